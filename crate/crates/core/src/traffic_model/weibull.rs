//! Single Weibull variates: sampling and raw moments.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::TrafficError;

/// Shape/scale pair of a two-parameter Weibull law with survival
/// `exp(-(x / scale)^shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub shape: f64,
    /// Seconds.
    pub scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self, TrafficError> {
        let p = Self { shape, scale };
        p.validate()?;
        Ok(p)
    }

    /// Parking time of the Santander street deployment.
    pub const PARKING: WeibullParams = WeibullParams {
        shape: 0.4,
        scale: 3600.0,
    };

    /// Vacant time of the Santander street deployment.
    pub const VACANT: WeibullParams = WeibullParams {
        shape: 0.7,
        scale: 900.0,
    };

    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(TrafficError::InvalidParameter {
                name: "shape",
                value: self.shape,
            });
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(TrafficError::InvalidParameter {
                name: "scale",
                value: self.scale,
            });
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        (self.scale.ln() + ln_gamma(1.0 + 1.0 / self.shape)).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-(x / self.scale).powf(self.shape)).exp_m1()
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = x / self.scale;
        let log_pdf = self.shape.ln() - self.scale.ln() + (self.shape - 1.0) * z.ln()
            - z.powf(self.shape);
        log_pdf.exp()
    }
}

/// Inverse-transform draw: `scale * (-ln u)^(1/shape)`.
///
/// `u` must lie strictly inside (0, 1); both end points map to degenerate
/// durations and are rejected.
pub fn sample_weibull(p: &WeibullParams, u: f64) -> Result<f64, TrafficError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(TrafficError::InvalidDraw(u));
    }
    Ok(p.scale * (-u.ln()).powf(1.0 / p.shape))
}

/// `E[X^n] = scale^n * Gamma(1 + n/shape)`, evaluated through log-gamma.
pub fn weibull_moment(p: &WeibullParams, n: u32) -> Result<f64, TrafficError> {
    let log_m = log_weibull_moment(p, n);
    let m = log_m.exp();
    if m.is_finite() {
        Ok(m)
    } else {
        Err(TrafficError::NonFiniteMoment { order: n })
    }
}

/// Natural log of the n-th raw moment; the zeroth moment is 1.
pub(crate) fn log_weibull_moment(p: &WeibullParams, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = f64::from(n);
    n * p.scale.ln() + ln_gamma(1.0 + n / p.shape)
}
