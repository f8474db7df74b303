use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use chargegrid::analytic::QuadratureConfig;
use chargegrid::ModelParams;

/// What a run computes; chosen by the subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analytic,
    Mc,
    Compare,
    SweepTc,
    OracleCheck,
    X1x2Check,
}

impl Mode {
    /// Modes whose rows are CDF values on the threshold grid.
    pub fn needs_grid(self) -> bool {
        !matches!(self, Mode::OracleCheck)
    }

    fn needs_spans(self) -> bool {
        !matches!(self, Mode::SweepTc)
    }
}

/// Fully resolved run: every field has a value and passed validation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: ModelParams,
    pub d_h: f64,
    pub d_v: f64,
    /// Thresholds for CDF modes; trip distances for the usage sweep.
    pub xs: Vec<f64>,
    pub n: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub quadrature: QuadratureConfig,
    pub tol_sigma: f64,
}

/// Flags shared by every subcommand. Values resolve as
/// flags > config file > preset > built-in default.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// Road intensity per family (roads/meter)
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Fraction of roads that are charging roads
    #[arg(long)]
    pub p: Option<f64>,

    /// Horizontal source-to-destination distance (meters)
    #[arg(long)]
    pub dh: Option<f64>,

    /// Vertical source-to-destination distance (meters)
    #[arg(long)]
    pub dv: Option<f64>,

    /// Evaluation grid as min:max:steps (steps = point count); thresholds
    /// in meters for CDF modes, total trip distances for sweep-tc
    #[arg(long = "x-grid", value_name = "MIN:MAX:STEPS")]
    pub x_grid: Option<String>,

    /// Monte-Carlo trial count
    #[arg(long)]
    pub n: Option<u64>,

    /// Master seed; a run is reproducible from its config plus this value
    #[arg(long)]
    pub seed: Option<u64>,

    /// Named parameter set: manhattan, chicago, or manhattan-tc
    #[arg(long)]
    pub preset: Option<String>,

    /// JSON config file; keys mirror the long flags
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output path (CSV, or JSON lines for oracle-check); stdout if absent
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Comparison tolerance in standard-error multiples
    #[arg(long = "tol-sigma")]
    pub tol_sigma: Option<f64>,
}

/// Config-file form of [`CommonArgs`], plus quadrature tolerances, which
/// have no flag form. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    lambda: Option<f64>,
    p: Option<f64>,
    dh: Option<f64>,
    dv: Option<f64>,
    x_grid: Option<String>,
    n: Option<u64>,
    seed: Option<u64>,
    preset: Option<String>,
    out: Option<PathBuf>,
    tol_sigma: Option<f64>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
}

struct Preset {
    lambda: f64,
    d_h: f64,
    d_v: f64,
}

fn preset(name: &str) -> Result<Preset> {
    // manhattan-tc: the charging-usage figure is calibrated with a lower
    // intensity than the distance-distribution figure for the same city
    match name {
        "manhattan" => Ok(Preset { lambda: 0.016, d_h: 2000.0, d_v: 3000.0 }),
        "chicago" => Ok(Preset { lambda: 0.006, d_h: 4000.0, d_v: 5000.0 }),
        "manhattan-tc" => Ok(Preset { lambda: 0.011, d_h: 2000.0, d_v: 3000.0 }),
        other => bail!("unknown preset {other:?}; known: manhattan, chicago, manhattan-tc"),
    }
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("invalid config {}", path.display()))
}

/// Parses a `min:max:steps` grid description into `steps` evenly spaced
/// points including both endpoints.
pub fn parse_x_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [min, max, steps] = parts.as_slice() else {
        bail!("x-grid must be min:max:steps, got {text:?}");
    };
    let min: f64 = min.parse().with_context(|| format!("x-grid min {min:?}"))?;
    let max: f64 = max.parse().with_context(|| format!("x-grid max {max:?}"))?;
    let steps: usize = steps
        .parse()
        .with_context(|| format!("x-grid steps {steps:?}"))?;
    if !min.is_finite() || !max.is_finite() || min < 0.0 {
        bail!("x-grid endpoints must be finite and nonnegative");
    }
    if max < min {
        bail!("x-grid max {max} is below min {min}");
    }
    if steps == 0 {
        bail!("x-grid needs at least one point");
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    let span = max - min;
    Ok((0..steps)
        .map(|i| min + span * i as f64 / (steps - 1) as f64)
        .collect())
}

/// Merges flag, file, preset, and default values into a validated run.
pub fn resolve(mode: Mode, args: &CommonArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };
    let preset = args
        .preset
        .as_deref()
        .or(file.preset.as_deref())
        .map(preset)
        .transpose()?;

    let lambda = args
        .lambda
        .or(file.lambda)
        .or(preset.as_ref().map(|pr| pr.lambda))
        .ok_or_else(|| anyhow!("missing lambda: pass --lambda, a config value, or --preset"))?;
    let p = args
        .p
        .or(file.p)
        .ok_or_else(|| anyhow!("missing p: pass --p or a config value"))?;
    let params = ModelParams::new(lambda, p).map_err(|e| anyhow!("invalid lambda or p: {e}"))?;

    let d_h = args.dh.or(file.dh).or(preset.as_ref().map(|pr| pr.d_h));
    let d_v = args.dv.or(file.dv).or(preset.as_ref().map(|pr| pr.d_v));
    let (d_h, d_v) = if mode.needs_spans() {
        let d_h = d_h.ok_or_else(|| anyhow!("missing dh: pass --dh, a config value, or --preset"))?;
        let d_v = d_v.ok_or_else(|| anyhow!("missing dv: pass --dv, a config value, or --preset"))?;
        for (name, d) in [("dh", d_h), ("dv", d_v)] {
            if !d.is_finite() || d <= 0.0 {
                bail!("invalid {name}: trip distance must be positive and finite, got {d}");
            }
        }
        (d_h, d_v)
    } else {
        // the sweep derives its geometry from each trip distance
        (d_h.unwrap_or(0.0), d_v.unwrap_or(0.0))
    };

    let xs = match args.x_grid.as_deref().or(file.x_grid.as_deref()) {
        Some(text) => parse_x_grid(text)?,
        None => Vec::new(),
    };
    if mode.needs_grid() && xs.is_empty() {
        bail!("missing x-grid: this mode evaluates on a grid; pass --x-grid min:max:steps");
    }
    if mode == Mode::SweepTc && xs.iter().any(|&d| d <= 0.0) {
        bail!("sweep-tc interprets the x-grid as trip distances; all must be positive");
    }

    let mut quadrature = QuadratureConfig::default();
    if let Some(abs_tol) = file.abs_tol {
        quadrature.abs_tol = abs_tol;
    }
    if let Some(rel_tol) = file.rel_tol {
        quadrature.rel_tol = rel_tol;
    }
    quadrature.validate().map_err(|e| anyhow!("invalid quadrature settings: {e}"))?;

    let tol_sigma = args.tol_sigma.or(file.tol_sigma).unwrap_or(3.0);
    if !tol_sigma.is_finite() || tol_sigma <= 0.0 {
        bail!("invalid tol-sigma: must be positive and finite, got {tol_sigma}");
    }

    let n = args.n.or(file.n).unwrap_or(100_000);
    if n == 0 {
        bail!("invalid n: at least one trial is required");
    }

    Ok(RunConfig {
        mode,
        params,
        d_h,
        d_v,
        xs,
        n,
        seed: args.seed.or(file.seed).unwrap_or(0),
        out: args.out.clone().or(file.out),
        quadrature,
        tol_sigma,
    })
}
