use crate::{Error, Result};

const NEWTON_MAX_ITER: usize = 50;
const BRANCH_JUMP: f64 = 0.3;

/// Beam angle `α` as an implicit function of the servo angle `θ` through
/// `F(α, θ) = (1 − cos α − a₂(1 − cos θ))² + (sin α + a₁ − a₂ sin θ)² − a₁² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub a1: f64,
    pub a2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintPartials {
    pub f: f64,
    pub f_a: f64,
    pub f_t: f64,
    pub f_aa: f64,
    pub f_at: f64,
    pub f_tt: f64,
}

/// `α(θ)`, `α′(θ)` and `α″(θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaDerivatives {
    pub alpha: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Kinematics {
    pub fn new(a1: f64, a2: f64) -> Self {
        Self { a1, a2 }
    }

    pub fn constraint(&self, alpha: f64, theta: f64) -> ConstraintPartials {
        let (a1, a2) = (self.a1, self.a2);
        let (sa, ca) = alpha.sin_cos();
        let (st, ct) = theta.sin_cos();
        let a = 1.0 - ca - a2 * (1.0 - ct);
        let b = sa + a1 - a2 * st;
        ConstraintPartials {
            f: a * a + b * b - a1 * a1,
            f_a: 2.0 * (a * sa + b * ca),
            f_t: 2.0 * (-a * a2 * st - b * a2 * ct),
            f_aa: 2.0 * (sa * sa + a * ca + ca * ca - b * sa),
            f_at: 2.0 * (-a2 * st * sa - a2 * ct * ca),
            f_tt: 2.0 * (a2 * a2 * st * st - a * a2 * ct + a2 * a2 * ct * ct + b * a2 * st),
        }
    }

    /// Newton iteration from `seed`.
    pub fn solve(&self, theta: f64, seed: f64) -> Result<f64> {
        let mut alpha = seed;
        for _ in 0..NEWTON_MAX_ITER {
            let c = self.constraint(alpha, theta);
            if c.f_a == 0.0 || !c.f_a.is_finite() {
                return Err(Error::Kinematics(format!(
                    "fold point of the linkage near theta = {theta}"
                )));
            }
            let step = c.f / c.f_a;
            alpha -= step;
            if step.abs() <= 1e-15 * alpha.abs().max(1.0) {
                return Ok(alpha);
            }
        }
        let c = self.constraint(alpha, theta);
        if c.f.abs() <= 1e-13 {
            return Ok(alpha);
        }
        Err(Error::Kinematics(format!(
            "Newton did not converge at theta = {theta} (residual {:e})",
            c.f
        )))
    }

    /// `α(θ)` on the branch through the origin, seeded by its tangent line.
    pub fn alpha(&self, theta: f64) -> Result<f64> {
        let alpha = self.solve(theta, self.a2 * theta)?;
        if (alpha - self.a2 * theta).abs() > BRANCH_JUMP {
            return Err(Error::Kinematics(format!(
                "left the branch through the origin at theta = {theta}"
            )));
        }
        Ok(alpha)
    }

    pub fn derivatives(&self, theta: f64) -> Result<AlphaDerivatives> {
        let alpha = self.alpha(theta)?;
        self.derivatives_at(alpha, theta)
    }

    /// Implicit derivatives at a point already on the constraint.
    pub fn derivatives_at(&self, alpha: f64, theta: f64) -> Result<AlphaDerivatives> {
        let c = self.constraint(alpha, theta);
        if c.f_a.abs() < 1e-12 {
            return Err(Error::Singular {
                what: "linkage (F_alpha = 0)",
                q: vec![theta],
            });
        }
        let d1 = -c.f_t / c.f_a;
        let d2 = -(c.f_aa * d1 * d1 + 2.0 * c.f_at * d1 + c.f_tt) / c.f_a;
        Ok(AlphaDerivatives { alpha, d1, d2 })
    }
}

/// Continuation state for sequential `α(θ)` queries.
///
/// Each simulation or sweep owns its own context; the previous solution
/// seeds the next Newton solve and large jumps are rejected.
#[derive(Debug, Clone)]
pub struct KinematicsContext {
    kin: Kinematics,
    last: Option<(f64, f64)>,
}

impl KinematicsContext {
    pub fn new(kin: Kinematics) -> Self {
        Self { kin, last: None }
    }

    pub fn alpha_of_theta(&mut self, theta: f64) -> Result<f64> {
        let (seed, prev) = match self.last {
            Some((t, a)) => (a + self.kin.a2 * (theta - t), Some(a)),
            None => (0.0, None),
        };
        let alpha = self.kin.solve(theta, seed)?;
        let reference = prev.unwrap_or(self.kin.a2 * theta);
        if (alpha - reference).abs() > BRANCH_JUMP {
            return Err(Error::Kinematics(format!(
                "branch jump of {:.3} rad at theta = {theta}",
                alpha - reference
            )));
        }
        self.last = Some((theta, alpha));
        Ok(alpha)
    }

    pub fn reset(&mut self) {
        self.last = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kin() -> Kinematics {
        Kinematics::new(0.2547, 0.0588)
    }

    fn bisect(k: &Kinematics, theta: f64) -> f64 {
        let (mut lo, mut hi) = (-0.2, 0.3);
        let f = |a: f64| k.constraint(a, theta).f;
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(lo) * f(m) <= 0.0 {
                hi = m;
            } else {
                lo = m;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn origin_is_on_branch() {
        assert_eq!(kin().alpha(0.0).unwrap(), 0.0);
        let d = kin().derivatives(0.0).unwrap();
        assert!((d.d1 - 0.0588).abs() < 1e-15);
    }

    #[test]
    fn matches_bisection() {
        let k = kin();
        for &t in &[-0.9, -0.1, 0.1, 0.45, 0.9] {
            let a = k.alpha(t).unwrap();
            assert!((a - bisect(&k, t)).abs() < 1e-12, "{t}");
            assert!(k.constraint(a, t).f.abs() < 1e-12);
        }
        assert!((k.alpha(0.1).unwrap() - 0.00588).abs() < 1e-4);
        assert!(k.alpha(-0.1).unwrap() < 0.0 && k.alpha(0.1).unwrap() > 0.0);
    }

    #[test]
    fn derivatives_match_differences() {
        let k = kin();
        let h = 1e-4;
        for i in 0..50 {
            let t = -0.9 + 1.8 * i as f64 / 49.0;
            let d = k.derivatives(t).unwrap();
            let fd1 = (k.alpha(t + h).unwrap() - k.alpha(t - h).unwrap()) / (2.0 * h);
            assert!((d.d1 - fd1).abs() < 1e-8, "{t}");
        }
        let d = k.derivatives(0.0).unwrap();
        let fd2 = (k.alpha(h).unwrap() - 2.0 * k.alpha(0.0).unwrap() + k.alpha(-h).unwrap()) / (h * h);
        assert!((d.d2 - fd2).abs() < 1e-6);
    }

    #[test]
    fn continuation_tracks_branch() {
        let mut ctx = KinematicsContext::new(kin());
        let mut prev = ctx.alpha_of_theta(-0.9).unwrap();
        for i in 1..=180 {
            let t = -0.9 + 0.01 * i as f64;
            let a = ctx.alpha_of_theta(t).unwrap();
            assert!((a - prev).abs() < 0.05);
            assert!((a - kin().alpha(t).unwrap()).abs() < 1e-14);
            prev = a;
        }
    }
}
