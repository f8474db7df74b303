use serde::Serialize;
use thiserror::Error;

/// Validation failure for a model or trip parameter.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("road intensity must be positive and finite, got {0}")]
    Intensity(f64),
    #[error("charging fraction must lie in [0, 1], got {0}")]
    Fraction(f64),
    #[error("trip distance must be positive and finite, got {0}")]
    Distance(f64),
}

/// Grid model parameters: road intensity per axis and the charging fraction.
///
/// Roads parallel to each axis form an independent 1-D Poisson point process
/// of intensity `lambda` (roads per meter of perpendicular offset); each road
/// is independently a charging road with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    lambda: f64,
    p: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, p: f64) -> Result<Self, ParamError> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(ParamError::Intensity(lambda));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(ParamError::Fraction(p));
        }
        Ok(Self { lambda, p })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Intensity of the thinned process of charging roads along one axis.
    pub fn charging_rate(&self) -> f64 {
        self.lambda * self.p
    }

    /// Intensity of the thinned process of non-charging roads along one axis.
    pub fn noncharging_rate(&self) -> f64 {
        self.lambda * (1.0 - self.p)
    }
}

/// Destination road direction relative to the source road.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Orientation {
    Parallel,
    Perpendicular,
}

/// Trip frame. The source sits at the origin on its road; the destination
/// sits at `(d_h, d_v)` on the destination road. Roads "toward" the
/// destination have positive offset; the span of interest is `(0, d_v)` for
/// roads parallel to the source road and `(0, d_h)` for the perpendicular
/// family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripGeometry {
    orientation: Orientation,
    d_h: f64,
    d_v: f64,
}

impl TripGeometry {
    pub fn new(orientation: Orientation, d_h: f64, d_v: f64) -> Result<Self, ParamError> {
        for d in [d_h, d_v] {
            if !d.is_finite() || d <= 0.0 {
                return Err(ParamError::Distance(d));
            }
        }
        Ok(Self {
            orientation,
            d_h,
            d_v,
        })
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn d_h(&self) -> f64 {
        self.d_h
    }

    pub fn d_v(&self) -> f64 {
        self.d_v
    }

    /// Manhattan distance of the trip.
    pub fn total(&self) -> f64 {
        self.d_h + self.d_v
    }

    pub fn with_orientation(self, orientation: Orientation) -> Self {
        Self {
            orientation,
            ..self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validate() {
        assert!(ModelParams::new(0.016, 0.2).is_ok());
        assert!(matches!(
            ModelParams::new(0.0, 0.2),
            Err(ParamError::Intensity(_))
        ));
        assert!(matches!(
            ModelParams::new(-1.0, 0.2),
            Err(ParamError::Intensity(_))
        ));
        assert!(matches!(
            ModelParams::new(f64::NAN, 0.2),
            Err(ParamError::Intensity(_))
        ));
        assert!(matches!(
            ModelParams::new(0.01, -0.1),
            Err(ParamError::Fraction(_))
        ));
        assert!(matches!(
            ModelParams::new(0.01, 1.5),
            Err(ParamError::Fraction(_))
        ));
        assert!(ModelParams::new(0.01, 0.0).is_ok());
        assert!(ModelParams::new(0.01, 1.0).is_ok());
    }

    #[test]
    fn thinned_rates_split_lambda() {
        let params = ModelParams::new(0.016, 0.2).unwrap();
        let sum = params.charging_rate() + params.noncharging_rate();
        assert!((sum - params.lambda()).abs() < 1e-15);
    }

    #[test]
    fn geometry_validates() {
        assert!(TripGeometry::new(Orientation::Parallel, 2000.0, 3000.0).is_ok());
        assert!(matches!(
            TripGeometry::new(Orientation::Parallel, 0.0, 3000.0),
            Err(ParamError::Distance(_))
        ));
        assert!(matches!(
            TripGeometry::new(Orientation::Parallel, 2000.0, f64::INFINITY),
            Err(ParamError::Distance(_))
        ));
    }
}
