//! Margin losses `l(u)` for angle-based classifiers.
//!
//! Every loss here is convex, non-increasing and continuously
//! differentiable with `l'(u) < 0`, which the probability link
//! `-1 / l'(u)` relies on.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Beyond this margin the logistic loss switches to its asymptotic form.
const LOGISTIC_ASYMPTOTE: f64 = 30.0;

/// A smooth margin loss.
///
/// `log_weight(u)` is `ln(-1 / l'(u))`, the log of the unnormalized class
/// weight used for probability estimation. The default derives it from
/// [`MarginLoss::derivative`]; implementations override it when a direct
/// form avoids overflow.
pub trait MarginLoss: Send + Sync {
    fn value(&self, u: f64) -> f64;

    fn derivative(&self, u: f64) -> f64;

    fn log_weight(&self, u: f64) -> f64 {
        -(-self.derivative(u)).ln()
    }

    /// Upper bound on `l''`, used to seed the solver step size.
    fn curvature_bound(&self) -> f64;

    fn name(&self) -> &'static str;
}

/// Logistic deviance `log(1 + e^-u)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Logistic;

/// Soft large-margin unified machine loss (a = 1, c = 0):
/// `1 - u` for `u < 0` and `1 / (1 + u)` for `u >= 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SoftLum;

impl MarginLoss for Logistic {
    fn value(&self, u: f64) -> f64 {
        if u > LOGISTIC_ASYMPTOTE {
            (-u).exp()
        } else if u < -LOGISTIC_ASYMPTOTE {
            -u + u.exp()
        } else {
            (-u).exp().ln_1p()
        }
    }

    fn derivative(&self, u: f64) -> f64 {
        if u > LOGISTIC_ASYMPTOTE {
            let e = (-u).exp();
            -e / (1.0 + e)
        } else {
            -1.0 / (1.0 + u.exp())
        }
    }

    // ln(1 + e^u), never overflows
    fn log_weight(&self, u: f64) -> f64 {
        if u > LOGISTIC_ASYMPTOTE {
            u + (-u).exp()
        } else {
            u.exp().ln_1p()
        }
    }

    fn curvature_bound(&self) -> f64 {
        0.25
    }

    fn name(&self) -> &'static str {
        "logistic"
    }
}

impl MarginLoss for SoftLum {
    fn value(&self, u: f64) -> f64 {
        if u < 0.0 {
            1.0 - u
        } else {
            1.0 / (1.0 + u)
        }
    }

    fn derivative(&self, u: f64) -> f64 {
        if u < 0.0 {
            -1.0
        } else {
            -1.0 / ((1.0 + u) * (1.0 + u))
        }
    }

    fn log_weight(&self, u: f64) -> f64 {
        if u < 0.0 {
            0.0
        } else {
            2.0 * u.ln_1p()
        }
    }

    fn curvature_bound(&self) -> f64 {
        2.0
    }

    fn name(&self) -> &'static str {
        "soft"
    }
}

/// The shipped losses, selectable by identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    Logistic,
    SoftLum,
}

impl Loss {
    pub const ALL: [Loss; 2] = [Loss::SoftLum, Loss::Logistic];

    pub fn as_dyn(self) -> &'static dyn MarginLoss {
        match self {
            Loss::Logistic => &Logistic,
            Loss::SoftLum => &SoftLum,
        }
    }

    /// Identifier used in files and on the command line.
    pub fn id(self) -> &'static str {
        self.as_dyn().name()
    }

    /// Short method label used in reports ("Logi", "Soft").
    pub fn method_label(self) -> &'static str {
        match self {
            Loss::Logistic => "Logi",
            Loss::SoftLum => "Soft",
        }
    }

    pub fn at_zero(self) -> f64 {
        self.value(0.0)
    }

    /// `l(u)`, rejecting non-finite margins.
    pub fn try_value(self, u: f64) -> Result<f64> {
        check_finite(u)?;
        Ok(self.value(u))
    }

    /// `l'(u)`, rejecting non-finite margins.
    pub fn try_derivative(self, u: f64) -> Result<f64> {
        check_finite(u)?;
        Ok(self.derivative(u))
    }
}

fn check_finite(u: f64) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("margin must be finite, got {u}")))
    }
}

impl MarginLoss for Loss {
    fn value(&self, u: f64) -> f64 {
        self.as_dyn().value(u)
    }
    fn derivative(&self, u: f64) -> f64 {
        self.as_dyn().derivative(u)
    }
    fn log_weight(&self, u: f64) -> f64 {
        self.as_dyn().log_weight(u)
    }
    fn curvature_bound(&self) -> f64 {
        self.as_dyn().curvature_bound()
    }
    fn name(&self) -> &'static str {
        self.as_dyn().name()
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "logi" => Ok(Loss::Logistic),
            "soft" | "soft_lum" | "lum" => Ok(Loss::SoftLum),
            other => Err(invalid(format!(
                "unknown loss '{other}' (expected 'logistic' or 'soft')"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logistic_reference_points() {
        let l = Logistic;
        assert!((l.value(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((l.derivative(0.0) + 0.5).abs() < 1e-15);

        // e^-100 is representable; compare against ln(1+x) ~ x - x^2/2
        let e = (-100f64).exp();
        assert!(((l.value(100.0) - e) / e).abs() < 1e-12);
        assert!(((l.derivative(100.0) + e) / e).abs() < 1e-12);

        assert!((l.value(-100.0) - 100.0).abs() < 1e-12);
        assert!((l.derivative(-100.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_branches_agree_at_the_switch() {
        let l = Logistic;
        for u in [29.999, 30.0, 30.001, -29.999, -30.0, -30.001] {
            let direct = (-u as f64).exp().ln_1p();
            assert!(((l.value(u) - direct) / direct).abs() < 1e-12, "u={u}");
            let d = -1.0 / (1.0 + u.exp());
            assert!(((l.derivative(u) - d) / d).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn logistic_never_overflows() {
        let l = Logistic;
        for u in [-1e6, -800.0, 800.0, 1e6] {
            assert!(l.value(u).is_finite());
            assert!(l.derivative(u).is_finite());
            assert!(l.log_weight(u).is_finite());
        }
        assert!(l.derivative(700.0) < 0.0);
    }

    #[test]
    fn soft_lum_reference_points() {
        let l = SoftLum;
        assert_eq!(l.value(0.0), 1.0);
        assert_eq!(l.derivative(0.0), -1.0);
        assert_eq!(l.value(1.0), 0.5);
        assert_eq!(l.derivative(1.0), -0.25);
        assert_eq!(l.value(-2.0), 3.0);
        assert_eq!(l.derivative(-2.0), -1.0);
        // continuity at the junction
        assert!((l.value(-1e-12) - l.value(0.0)).abs() < 1e-11);
        assert!((l.derivative(-1e-12) - l.derivative(1e-12)).abs() < 1e-11);
    }

    #[test]
    fn non_finite_margins_are_rejected() {
        for loss in Loss::ALL {
            assert!(loss.try_value(f64::NAN).is_err());
            assert!(loss.try_derivative(f64::INFINITY).is_err());
            assert!(loss.try_value(1.0).is_ok());
        }
    }

    #[test]
    fn identifiers_parse() {
        assert_eq!("logistic".parse::<Loss>().unwrap(), Loss::Logistic);
        assert_eq!("soft".parse::<Loss>().unwrap(), Loss::SoftLum);
        assert!("hinge".parse::<Loss>().is_err());
        for loss in Loss::ALL {
            assert_eq!(loss.id().parse::<Loss>().unwrap(), loss);
        }
    }

    #[test]
    fn monotone_convex_and_strictly_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for loss in Loss::ALL {
            let mut us: Vec<f64> = (0..10_000).map(|_| rng.random_range(-50.0..50.0)).collect();
            us.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in us.windows(2) {
                assert!(loss.value(w[0]) >= loss.value(w[1]), "{loss} not monotone");
            }
            for &u in &us {
                assert!(loss.derivative(u) < 0.0, "{loss} derivative at {u}");
            }
            for _ in 0..10_000 {
                let a: f64 = rng.random_range(-50.0..50.0);
                let b: f64 = rng.random_range(-50.0..50.0);
                let mid = loss.value(0.5 * (a + b));
                assert!(mid <= 0.5 * (loss.value(a) + loss.value(b)) + 1e-12);
            }
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for loss in Loss::ALL {
            let mut checked = 0;
            while checked < 2_000 {
                let u: f64 = rng.random_range(-30.0..30.0);
                if loss == Loss::SoftLum && u.abs() < 1e-4 {
                    continue;
                }
                let fd = (loss.value(u + h) - loss.value(u - h)) / (2.0 * h);
                let d = loss.derivative(u);
                let rel = (fd - d).abs() / d.abs();
                assert!(rel < 1e-6, "{loss} u={u} fd={fd} d={d}");
                checked += 1;
            }
        }
    }

    #[test]
    fn log_weight_matches_derivative() {
        for loss in Loss::ALL {
            for u in [-20.0, -3.0, -0.5, 0.0, 0.5, 3.0, 20.0, 35.0] {
                let direct = -(-loss.derivative(u)).ln();
                assert!((loss.log_weight(u) - direct).abs() < 1e-10, "{loss} u={u}");
            }
        }
    }
}
