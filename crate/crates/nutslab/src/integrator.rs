//! Leapfrog integration with gradient caching and signed iteration.

use thiserror::Error;

use crate::model::{norm_sq, ModelError, PhasePoint, Target};

pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("leapfrog diverged at iterate {step}")]
    Divergence { step: i64 },
    #[error("step size must be finite and positive, got {0}")]
    InvalidStep(f64),
    #[error("leapfrog on the standard Gaussian is unstable for h >= 2, got {0}")]
    UnstableStep(f64),
}

/// A phase point together with U(q) and ∇U(q), so the next step can reuse
/// the gradient of the closing half kick.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub point: PhasePoint,
    pub grad: Vec<f64>,
    pub potential: f64,
}

impl Iterate {
    pub fn hamiltonian(&self) -> f64 {
        self.potential + 0.5 * norm_sq(&self.point.p)
    }
}

/// Leapfrog map Φ_h with a running count of gradient evaluations.
#[derive(Debug)]
pub struct Leapfrog<'a> {
    target: &'a Target,
    h: f64,
    threshold: f64,
    grad_evals: u64,
}

impl<'a> Leapfrog<'a> {
    pub fn new(target: &'a Target, h: f64) -> Result<Self, IntegratorError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(IntegratorError::InvalidStep(h));
        }
        Ok(Self { target, h, threshold: DEFAULT_DIVERGENCE_THRESHOLD, grad_evals: 0 })
    }

    /// Sets the magnitude beyond which |H| or a coordinate counts as
    /// divergence. `f64::INFINITY` only rejects non-finite values.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn target(&self) -> &'a Target {
        self.target
    }

    pub fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    fn diverged(&self, it: &Iterate) -> bool {
        let bad = |x: f64| !x.is_finite() || x.abs() > self.threshold;
        bad(it.hamiltonian()) || it.point.q.iter().chain(&it.point.p).any(|&x| bad(x))
    }

    /// Evaluates the gradient at `s`, costing one gradient evaluation.
    pub fn start(&mut self, s: &PhasePoint) -> Result<Iterate, IntegratorError> {
        if s.p.len() != self.target.dim() {
            return Err(ModelError::DimensionMismatch { expected: self.target.dim(), got: s.p.len() }.into());
        }
        let mut grad = vec![0.0; self.target.dim()];
        let potential = self.target.potential_and_gradient(&s.q, &mut grad)?;
        self.grad_evals += 1;
        let it = Iterate { point: s.clone(), grad, potential };
        if self.diverged(&it) {
            return Err(IntegratorError::Divergence { step: 0 });
        }
        Ok(it)
    }

    /// One step forward (`forward = true`) or one step of the exact inverse.
    /// `index` is the signed iterate index reported on divergence.
    pub fn step(&mut self, it: &Iterate, forward: bool, index: i64) -> Result<Iterate, IntegratorError> {
        let h = if forward { self.h } else { -self.h };
        let mut next = it.clone();
        self.step_in_place(&mut next, h, index)?;
        Ok(next)
    }

    fn step_in_place(&mut self, it: &mut Iterate, h: f64, index: i64) -> Result<(), IntegratorError> {
        let half = 0.5 * h;
        for (p, g) in it.point.p.iter_mut().zip(&it.grad) {
            *p -= half * g;
        }
        for (q, p) in it.point.q.iter_mut().zip(&it.point.p) {
            *q += h * p;
        }
        self.grad_evals += 1;
        it.potential = match self.target.potential_and_gradient(&it.point.q, &mut it.grad) {
            Ok(u) => u,
            Err(ModelError::NonFinite) | Err(ModelError::SingularGradient { .. }) => {
                return Err(IntegratorError::Divergence { step: index })
            }
            Err(e) => return Err(e.into()),
        };
        for (p, g) in it.point.p.iter_mut().zip(&it.grad) {
            *p -= half * g;
        }
        if self.diverged(it) {
            return Err(IntegratorError::Divergence { step: index });
        }
        Ok(())
    }

    /// Φ_h^{(j)}(s) for signed j, with j = 0 the identity.
    pub fn iterate(&mut self, s: &PhasePoint, j: i64) -> Result<PhasePoint, IntegratorError> {
        if j == 0 {
            return Ok(s.clone());
        }
        let mut it = self.start(s)?;
        let h = if j > 0 { self.h } else { -self.h };
        for k in 1..=j.unsigned_abs() as i64 {
            self.step_in_place(&mut it, h, k * j.signum())?;
        }
        Ok(it.point)
    }
}

pub fn leapfrog_step(target: &Target, s: &PhasePoint, h: f64) -> Result<PhasePoint, IntegratorError> {
    Leapfrog::new(target, h)?.iterate(s, 1)
}

pub fn leapfrog_iterate(target: &Target, s: &PhasePoint, h: f64, j: i64) -> Result<PhasePoint, IntegratorError> {
    Leapfrog::new(target, h)?.iterate(s, j)
}

/// β_h = arccos(1 − h²/2)/h, so that one leapfrog step on the standard
/// Gaussian rotates phase space by h β_h.
pub fn gaussian_step_angle(h: f64) -> Result<f64, IntegratorError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(IntegratorError::InvalidStep(h));
    }
    if h >= 2.0 {
        return Err(IntegratorError::UnstableStep(h));
    }
    Ok((1.0 - 0.5 * h * h).acos() / h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(q: &[f64], p: &[f64]) -> PhasePoint {
        PhasePoint::new(q.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn single_step_by_hand() {
        let t = Target::std_gaussian(1).unwrap();
        let s = leapfrog_step(&t, &pt(&[1.0], &[0.0]), 0.1).unwrap();
        // p = −0.05, q = 1 − 0.005 = 0.995, p = −0.05 − 0.04975.
        assert!((s.q[0] - 0.995).abs() < 1e-15);
        assert!((s.p[0] + 0.09975).abs() < 1e-15);
        let o = leapfrog_step(&t, &pt(&[0.0], &[0.0]), 0.7).unwrap();
        assert_eq!(o, pt(&[0.0], &[0.0]));
    }

    #[test]
    fn signed_iteration() {
        let t = Target::std_gaussian(1).unwrap();
        let s = pt(&[1.0], &[0.0]);
        assert_eq!(leapfrog_iterate(&t, &s, 0.1, 0).unwrap(), s);
        let two = leapfrog_iterate(&t, &s, 0.1, 2).unwrap();
        let twice = leapfrog_step(&t, &leapfrog_step(&t, &s, 0.1).unwrap(), 0.1).unwrap();
        assert_eq!(two, twice);
        // Two hand-composed steps give H − 0.5 = −4.9377496875e-5.
        assert!((t.hamiltonian(&two).unwrap() - 0.5 + 4.9377496875e-5).abs() <= 1e-15);
        let t4 = Target::power_law(2, 1.0, 4.0).unwrap();
        let s2 = pt(&[0.3, -0.8], &[1.1, 0.2]);
        let back = leapfrog_iterate(&t4, &leapfrog_iterate(&t4, &s2, 0.05, -3).unwrap(), 0.05, 3).unwrap();
        for (a, b) in back.q.iter().chain(&back.p).zip(s2.q.iter().chain(&s2.p)) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn gradient_caching_costs_n_plus_one() {
        let t = Target::std_gaussian(3).unwrap();
        let mut lf = Leapfrog::new(&t, 0.1).unwrap();
        lf.iterate(&pt(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), 7).unwrap();
        assert_eq!(lf.grad_evals(), 8);
    }

    #[test]
    fn divergence_reports_index() {
        let t = Target::power_law(1, 1.0, 4.0).unwrap();
        let err = leapfrog_iterate(&t, &pt(&[50.0], &[0.0]), 0.5, 10).unwrap_err();
        assert!(matches!(err, IntegratorError::Divergence { step } if (1..=10).contains(&step)));
        let mut lf = Leapfrog::new(&t, 0.1).unwrap().with_threshold(f64::INFINITY);
        assert!(lf.iterate(&pt(&[400.0], &[0.0]), 1).is_ok());
        assert!(Leapfrog::new(&t, 0.0).is_err());
        assert!(Leapfrog::new(&t, f64::NAN).is_err());
    }

    #[test]
    fn step_angle() {
        let b = gaussian_step_angle(0.001).unwrap();
        assert!((1.0..=1.0000001).contains(&b));
        assert!((gaussian_step_angle(0.1).unwrap() - 1.00042).abs() < 1e-5);
        let r2 = 2f64.sqrt();
        assert!((gaussian_step_angle(r2).unwrap() - std::f64::consts::PI / (2.0 * r2)).abs() < 1e-15);
        assert!(gaussian_step_angle(2.0).is_err());
    }

    proptest! {
        #[test]
        fn forward_then_inverse_is_identity(q in prop::collection::vec(-2.0f64..2.0, 3),
                                            p in prop::collection::vec(-2.0f64..2.0, 3),
                                            h in 0.01f64..0.3) {
            let targets = [Target::std_gaussian(3).unwrap(), Target::power_law(3, 1.0, 4.0).unwrap(),
                           Target::smooth_laplace(3, 2.0).unwrap()];
            let s = pt(&q, &p);
            for t in &targets {
                let there = leapfrog_iterate(t, &s, h, 1).unwrap();
                let back = leapfrog_iterate(t, &there, h, -1).unwrap();
                for (a, b) in back.q.iter().chain(&back.p).zip(s.q.iter().chain(&s.p)) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }
    }
}
