use crate::bessel::nu_alpha;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("alpha_tilde must lie in (0, 1], got {0}")]
    AlphaTilde(f64),
    #[error("eta must be finite and >= 0, got {0}")]
    Eta(f64),
    #[error("rho must be finite and >= 0, got {0}")]
    Rho(f64),
}

/// Degeneracy exponent α, fractional order α̃, shift η and feedback gain ρ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub eta: f64,
    pub rho: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, alpha_tilde: f64, eta: f64, rho: f64) -> Result<Self, ParamError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ParamError::Alpha(alpha));
        }
        if !(alpha_tilde > 0.0 && alpha_tilde <= 1.0) {
            return Err(ParamError::AlphaTilde(alpha_tilde));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(ParamError::Eta(eta));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(ParamError::Rho(rho));
        }
        let p = Self { alpha, alpha_tilde, eta, rho };
        debug_assert_eq!(
            p.nu() - alpha_tilde + 0.5 <= 1e-14,
            alpha_tilde >= p.threshold() - 1e-14
        );
        Ok(p)
    }

    /// Bessel order ν_α = (1−α)/(2−α).
    pub fn nu(&self) -> f64 {
        nu_alpha(self.alpha)
    }

    /// ζ = ρ sin(α̃π)/π; zero in the direct damping mode α̃ = 1.
    pub fn zeta(&self) -> f64 {
        if self.direct_damping() {
            0.0
        } else {
            self.rho * (self.alpha_tilde * PI).sin() / PI
        }
    }

    pub fn direct_damping(&self) -> bool {
        self.alpha_tilde == 1.0
    }

    /// Order above which the resolvent stays bounded on the imaginary axis.
    pub fn threshold(&self) -> f64 {
        threshold(self.alpha)
    }

    /// Resolvent growth exponent ν_α − α̃ + 1/2 (non-positive means bounded).
    pub fn resolvent_exponent(&self) -> f64 {
        self.nu() - self.alpha_tilde + 0.5
    }
}

/// (4−3α)/(2(2−α)).
pub fn threshold(alpha: f64) -> f64 {
    (4.0 - 3.0 * alpha) / (2.0 * (2.0 - alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_identity() {
        for i in 1..20 {
            let alpha = i as f64 / 20.0;
            for j in 1..=40 {
                let at = j as f64 / 40.0;
                let p = ModelParams::new(alpha, at, 1.0, 1.0).unwrap();
                let lhs = p.nu() - at + 0.5 <= 0.0;
                let rhs = at >= threshold(alpha);
                if (at - threshold(alpha)).abs() > 1e-12 {
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn validation() {
        assert_eq!(ModelParams::new(1.5, 0.5, 1.0, 1.0), Err(ParamError::Alpha(1.5)));
        assert!(ModelParams::new(0.5, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.5, 0.5, -1.0, 1.0).is_err());
        let p = ModelParams::new(0.5, 0.5, 0.0, 2.0).unwrap();
        assert!((p.zeta() - 2.0 / PI).abs() < 1e-15);
        assert_eq!(ModelParams::new(0.5, 1.0, 0.0, 2.0).unwrap().zeta(), 0.0);
    }
}
