use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * x + (k * (k - 1)) as f64 * c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mu1 {
    /// `scale · exp(rate · sin α)`.
    ExpSin { scale: f64, rate: f64 },
    Polynomial { coeffs: Vec<f64> },
}

impl Mu1 {
    /// `(μ₁, μ₁′, μ₁″)` at `alpha`.
    pub fn eval(&self, alpha: f64) -> (f64, f64, f64) {
        match self {
            Mu1::ExpSin { scale, rate } => {
                let (s, c) = alpha.sin_cos();
                let m = scale * (rate * s).exp();
                let d1 = m * rate * c;
                let d2 = m * (rate * rate * c * c - rate * s);
                (m, d1, d2)
            }
            Mu1::Polynomial { coeffs } => {
                let p = Polynomial::new(coeffs.clone());
                (p.value(alpha), p.derivative(alpha), p.second_derivative(alpha))
            }
        }
    }
}

/// How `ψ` is obtained from `μ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiRule {
    /// `ψ′ = −5 μ₁ ψ / μ₁′`, `ψ(0) = 1`: the integrating factor that keeps
    /// `y` constant along the characteristics of the metric equations.
    Characteristic,
    /// `ψ = exp(+5 ∫₀^α μ₁/μ₁′)`, the opposite sign; kept for comparison.
    Candidate,
}

impl PsiRule {
    /// Sign `ε` in `ψ′/ψ = 5 ε μ₁/μ₁′`.
    pub fn sign(self) -> f64 {
        match self {
            PsiRule::Characteristic => -1.0,
            PsiRule::Candidate => 1.0,
        }
    }
}

/// `Ĉ₂ = −gain · ĝ₁₂ (1 + s_weight ṡ² + theta_weight θ̇²)(−μ ṡ + σ θ̇)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Damping {
    pub gain: f64,
    pub s_weight: f64,
    pub theta_weight: f64,
}

impl Damping {
    pub fn value(&self, g_hat12: f64, sigma: f64, mu: f64, sdot: f64, thetadot: f64) -> f64 {
        -self.gain
            * g_hat12
            * (1.0 + self.s_weight * sdot * sdot + self.theta_weight * thetadot * thetadot)
            * (-mu * sdot + sigma * thetadot)
    }
}

/// Free functions selecting one member of the closed-loop family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningFunctions {
    pub mu1: Mu1,
    pub h: Polynomial,
    pub w: Polynomial,
    pub damping: Damping,
    #[serde(default = "default_psi")]
    pub psi: PsiRule,
    /// Offset in `y` and `V̂`; the rescaled desired position when absent.
    #[serde(default)]
    pub s0_offset: Option<f64>,
}

fn default_psi() -> PsiRule {
    PsiRule::Characteristic
}

impl Default for TuningFunctions {
    fn default() -> Self {
        default_tuning()
    }
}

pub fn default_tuning() -> TuningFunctions {
    TuningFunctions {
        mu1: Mu1::ExpSin {
            scale: 1.0849,
            rate: 4.7845,
        },
        h: Polynomial::new(vec![1.1031]),
        w: Polynomial::new(vec![0.0, 0.0, 0.0023]),
        damping: Damping {
            gain: 1.0,
            s_weight: 1.0,
            theta_weight: 10.0,
        },
        psi: PsiRule::Characteristic,
        s0_offset: None,
    }
}

impl TuningFunctions {
    /// Checks `μ₁′ ≠ 0` on `points` of the working α-interval and convexity of `w` at 0.
    pub fn validate(&self, alpha_lo: f64, alpha_hi: f64, points: usize) -> Result<()> {
        let points = points.max(2);
        let mut sign = 0.0;
        for k in 0..points {
            let a = alpha_lo + (alpha_hi - alpha_lo) * k as f64 / (points - 1) as f64;
            let d1 = self.mu1.eval(a).1;
            if !(d1.abs() > 1e-12) || !d1.is_finite() {
                return Err(Error::Tuning(format!("mu1' vanishes near alpha = {a}")));
            }
            if sign != 0.0 && d1.signum() != sign {
                return Err(Error::Tuning(format!("mu1' changes sign near alpha = {a}")));
            }
            sign = d1.signum();
        }
        if !(self.w.second_derivative(0.0) > 0.0) {
            return Err(Error::Tuning("w must be convex at y = 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chosen_functions() {
        let t = default_tuning();
        assert_eq!(t.mu1.eval(0.0).0, 1.0849);
        assert!((t.w.value(10.0) - 0.23).abs() < 1e-15);
        assert_eq!(t.h.value(-3.0), 1.1031);
        t.validate(-0.1, 0.1, 101).unwrap();
    }

    #[test]
    fn mu1_derivatives() {
        let m = default_tuning().mu1;
        let h = 1e-5;
        for &a in &[-0.07, 0.0, 0.03] {
            let (_, d1, d2) = m.eval(a);
            let fd1 = (m.eval(a + h).0 - m.eval(a - h).0) / (2.0 * h);
            let fd2 = (m.eval(a + h).1 - m.eval(a - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-8 * d1.abs());
            assert!((d2 - fd2).abs() < 1e-7 * d2.abs().max(1.0));
        }
    }

    #[test]
    fn damping_is_odd() {
        let d = default_tuning().damping;
        let a = d.value(-0.18, 1.03, 0.8, 0.3, -0.7);
        let b = d.value(-0.18, 1.03, 0.8, -0.3, 0.7);
        assert_eq!(a, -b);
    }

    #[test]
    fn polynomial_calculus() {
        let p = Polynomial::new(vec![1.0, -2.0, 3.0, 0.5]);
        assert_eq!(p.value(2.0), 1.0 - 4.0 + 12.0 + 4.0);
        assert_eq!(p.derivative(2.0), -2.0 + 12.0 + 6.0);
        assert_eq!(p.second_derivative(2.0), 6.0 + 6.0);
    }

    #[test]
    fn serde_roundtrip() {
        let t = default_tuning();
        let s = serde_json::to_string(&t).unwrap();
        let back: TuningFunctions = serde_json::from_str(&s).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn flat_mu1_rejected() {
        let mut t = default_tuning();
        t.mu1 = Mu1::Polynomial { coeffs: vec![1.0] };
        assert!(t.validate(-0.1, 0.1, 11).is_err());
    }
}
