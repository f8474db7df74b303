//! Small statistics helpers shared by tests and the CLI.

/// Kolmogorov-Smirnov distance between a sample and a reference CDF:
/// sup_x |F_n(x) - F(x)| evaluated at the jump points of the empirical CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    assert!(!samples.is_empty(), "KS distance needs samples");
    samples.sort_by(|a, b| a.partial_cmp(b).expect("samples must be comparable"));
    let n = samples.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        let below = i as f64 / n;
        let above = (i + 1) as f64 / n;
        sup = sup.max((f - below).abs()).max((above - f).abs());
    }
    sup
}

/// KS acceptance threshold at 99% confidence for n samples.
pub fn ks_threshold_99(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Standard error of a Bernoulli proportion estimate.
pub fn bernoulli_stderr(value: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (value * (1.0 - value) / n as f64).sqrt()
}

/// Empirical CDF over a fixed sample, for grid evaluation and KS tests.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty(), "empirical CDF needs samples");
        samples.sort_by(|a, b| a.partial_cmp(b).expect("samples must be comparable"));
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// P(sample < x), strict to match the strict-inequality convention used
    /// for every distance law here.
    pub fn eval(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|&s| s < x);
        below as f64 / self.sorted.len() as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.sorted.len() as f64;
        let mut sup: f64 = 0.0;
        for (i, &x) in self.sorted.iter().enumerate() {
            let f = cdf(x);
            sup = sup
                .max((f - i as f64 / n).abs())
                .max(((i + 1) as f64 / n - f).abs());
        }
        sup
    }
}
