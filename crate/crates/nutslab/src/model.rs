//! Target distributions π ∝ exp(−U) with their gradients and the assumption
//! classes they are declared to satisfy.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: target has d = {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("gradient of the power-law potential is singular at the origin for beta = {beta}")]
    SingularGradient { beta: f64 },
    #[error("invalid target parameter: {0}")]
    InvalidParameter(String),
}

/// A point (q, p) of phase space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self, ModelError> {
        if q.len() != p.len() {
            return Err(ModelError::DimensionMismatch { expected: q.len(), got: p.len() });
        }
        if q.is_empty() {
            return Err(ModelError::InvalidParameter("dimension must be at least 1".into()));
        }
        if q.iter().chain(&p).any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Self { q, p })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// Bounded smooth perturbation Ũ added to a Gaussian potential.
pub trait Perturbation: Send + Sync + fmt::Debug {
    fn value(&self, q: &[f64]) -> f64;
    /// Adds ∇Ũ(q) to `out`.
    fn add_gradient(&self, q: &[f64], out: &mut [f64]);
    /// Lipschitz constant of ∇Ũ, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// Ũ(q) = a Σ cos(ω q_i).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosinePerturbation {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Perturbation for CosinePerturbation {
    fn value(&self, q: &[f64]) -> f64 {
        self.amplitude * q.iter().map(|x| (self.frequency * x).cos()).sum::<f64>()
    }

    fn add_gradient(&self, q: &[f64], out: &mut [f64]) {
        let c = -self.amplitude * self.frequency;
        for (o, x) in out.iter_mut().zip(q) {
            *o += c * (self.frequency * x).sin();
        }
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.amplitude.abs() * self.frequency * self.frequency)
    }
}

#[derive(Debug, Clone)]
pub enum TargetKind {
    /// U(q) = Σ q_i² / (2σ_i²). The standard Gaussian has every σ_i = 1.
    DiagGaussian { scales: Vec<f64> },
    /// U(q) = C |q|^β.
    PowerLaw { c: f64, beta: f64 },
    /// U(q) = Σ q_i² / (2σ_i²) + Ũ(q).
    PerturbedGaussian { scales: Vec<f64>, perturbation: Arc<dyn Perturbation> },
    /// U(q) = M (√(1 + |q|²) − 1), whose gradient is bounded by M.
    SmoothLaplace { m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum AssumptionTag {
    H1,
    H2i,
    H2ii,
    H3,
    H4,
}

/// Declared regularity metadata. Nothing here is enforced numerically.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AssumptionProfile {
    pub lipschitz_l1: Option<f64>,
    pub growth_m: Option<f64>,
    pub tail_beta: Option<f64>,
    pub gradient_bound: Option<f64>,
    pub satisfies: BTreeSet<AssumptionTag>,
}

#[derive(Debug, Clone)]
pub struct Target {
    dim: usize,
    kind: TargetKind,
    profile: AssumptionProfile,
}

fn check_scales(scales: &[f64]) -> Result<(), ModelError> {
    if scales.is_empty() {
        return Err(ModelError::InvalidParameter("dimension must be at least 1".into()));
    }
    if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(ModelError::InvalidParameter("scales must be finite and positive".into()));
    }
    Ok(())
}

fn gaussian_profile(scales: &[f64]) -> AssumptionProfile {
    let l1 = scales.iter().map(|s| 1.0 / (s * s)).fold(0.0, f64::max);
    AssumptionProfile {
        lipschitz_l1: Some(l1),
        growth_m: Some(2.0),
        tail_beta: Some(2.0),
        gradient_bound: None,
        satisfies: [AssumptionTag::H1, AssumptionTag::H3, AssumptionTag::H4].into(),
    }
}

impl Target {
    pub fn std_gaussian(dim: usize) -> Result<Self, ModelError> {
        Self::diag_gaussian(vec![1.0; dim])
    }

    pub fn diag_gaussian(scales: Vec<f64>) -> Result<Self, ModelError> {
        check_scales(&scales)?;
        let profile = gaussian_profile(&scales);
        Ok(Self { dim: scales.len(), kind: TargetKind::DiagGaussian { scales }, profile })
    }

    pub fn power_law(dim: usize, c: f64, beta: f64) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::InvalidParameter("dimension must be at least 1".into()));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(ModelError::InvalidParameter(format!("power law needs C > 0, got {c}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(ModelError::InvalidParameter(format!("power law needs beta > 0, got {beta}")));
        }
        let mut profile = AssumptionProfile { tail_beta: Some(beta), ..Default::default() };
        if beta <= 1.0 {
            profile.satisfies.insert(AssumptionTag::H2i);
            if beta == 1.0 {
                profile.gradient_bound = Some(c);
            }
        } else if beta <= 2.0 {
            profile.satisfies.insert(AssumptionTag::H3);
            profile.growth_m = Some(beta);
            if beta == 2.0 {
                profile.satisfies.insert(AssumptionTag::H1);
                profile.satisfies.insert(AssumptionTag::H4);
                profile.lipschitz_l1 = Some(2.0 * c);
            }
        } else {
            profile.satisfies.insert(AssumptionTag::H2ii);
        }
        Ok(Self { dim, kind: TargetKind::PowerLaw { c, beta }, profile })
    }

    pub fn perturbed_gaussian(scales: Vec<f64>, perturbation: Arc<dyn Perturbation>) -> Result<Self, ModelError> {
        check_scales(&scales)?;
        let mut profile = gaussian_profile(&scales);
        match perturbation.lipschitz() {
            Some(l) => profile.lipschitz_l1 = profile.lipschitz_l1.map(|g| g + l),
            None => {
                profile.lipschitz_l1 = None;
                profile.satisfies.remove(&AssumptionTag::H1);
            }
        }
        Ok(Self { dim: scales.len(), kind: TargetKind::PerturbedGaussian { scales, perturbation }, profile })
    }

    pub fn smooth_laplace(dim: usize, m: f64) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::InvalidParameter("dimension must be at least 1".into()));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(ModelError::InvalidParameter(format!("gradient cap must be positive, got {m}")));
        }
        let profile = AssumptionProfile {
            lipschitz_l1: Some(m),
            growth_m: None,
            tail_beta: Some(1.0),
            gradient_bound: Some(m),
            satisfies: [AssumptionTag::H1, AssumptionTag::H2i].into(),
        };
        Ok(Self { dim, kind: TargetKind::SmoothLaplace { m }, profile })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn profile(&self) -> &AssumptionProfile {
        &self.profile
    }

    pub fn is_std_gaussian(&self) -> bool {
        matches!(&self.kind, TargetKind::DiagGaussian { scales } if scales.iter().all(|&s| s == 1.0))
    }

    fn check(&self, q: &[f64]) -> Result<(), ModelError> {
        if q.len() != self.dim {
            return Err(ModelError::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }

    pub fn potential(&self, q: &[f64]) -> Result<f64, ModelError> {
        self.check(q)?;
        Ok(match &self.kind {
            TargetKind::DiagGaussian { scales } => gauss_value(scales, q),
            TargetKind::PowerLaw { c, beta } => c * norm(q).powf(*beta),
            TargetKind::PerturbedGaussian { scales, perturbation } => gauss_value(scales, q) + perturbation.value(q),
            TargetKind::SmoothLaplace { m } => m * ((1.0 + norm_sq(q)).sqrt() - 1.0),
        })
    }

    pub fn gradient(&self, q: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut g = vec![0.0; self.dim];
        self.potential_and_gradient(q, &mut g)?;
        Ok(g)
    }

    /// Writes ∇U(q) into `grad` and returns U(q).
    pub fn potential_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> Result<f64, ModelError> {
        self.check(q)?;
        if grad.len() != self.dim {
            return Err(ModelError::DimensionMismatch { expected: self.dim, got: grad.len() });
        }
        match &self.kind {
            TargetKind::DiagGaussian { scales } => Ok(gauss_grad(scales, q, grad)),
            TargetKind::PowerLaw { c, beta } => {
                let r = norm(q);
                if r == 0.0 {
                    if *beta < 2.0 {
                        return Err(ModelError::SingularGradient { beta: *beta });
                    }
                    grad.fill(0.0);
                    return Ok(0.0);
                }
                let f = c * beta * r.powf(beta - 2.0);
                for (g, x) in grad.iter_mut().zip(q) {
                    *g = f * x;
                }
                Ok(c * r.powf(*beta))
            }
            TargetKind::PerturbedGaussian { scales, perturbation } => {
                let u = gauss_grad(scales, q, grad);
                perturbation.add_gradient(q, grad);
                Ok(u + perturbation.value(q))
            }
            TargetKind::SmoothLaplace { m } => {
                let s = (1.0 + norm_sq(q)).sqrt();
                for (g, x) in grad.iter_mut().zip(q) {
                    *g = m * x / s;
                }
                Ok(m * (s - 1.0))
            }
        }
    }

    pub fn hamiltonian(&self, s: &PhasePoint) -> Result<f64, ModelError> {
        if s.p.len() != self.dim {
            return Err(ModelError::DimensionMismatch { expected: self.dim, got: s.p.len() });
        }
        Ok(self.potential(&s.q)? + 0.5 * norm_sq(&s.p))
    }
}

fn gauss_value(scales: &[f64], q: &[f64]) -> f64 {
    0.5 * q.iter().zip(scales).map(|(x, s)| (x / s) * (x / s)).sum::<f64>()
}

fn gauss_grad(scales: &[f64], q: &[f64], grad: &mut [f64]) -> f64 {
    let mut u = 0.0;
    for ((g, x), s) in grad.iter_mut().zip(q).zip(scales) {
        let w = 1.0 / (s * s);
        *g = w * x;
        u += w * x * x;
    }
    0.5 * u
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn targets(d: usize) -> Vec<Target> {
        let scales: Vec<f64> = (0..d).map(|i| 0.5 + i as f64 * 0.3).collect();
        vec![
            Target::std_gaussian(d).unwrap(),
            Target::diag_gaussian(scales.clone()).unwrap(),
            Target::power_law(d, 1.3, 4.0).unwrap(),
            Target::power_law(d, 0.7, 1.5).unwrap(),
            Target::power_law(d, 2.0, 0.8).unwrap(),
            Target::perturbed_gaussian(scales, Arc::new(CosinePerturbation { amplitude: 0.3, frequency: 1.7 }))
                .unwrap(),
            Target::smooth_laplace(d, 1.0).unwrap(),
        ]
    }

    #[test]
    fn potential_examples() {
        assert_eq!(Target::std_gaussian(3).unwrap().potential(&[0.0; 3]).unwrap(), 0.0);
        assert_eq!(Target::power_law(1, 1.0, 4.0).unwrap().potential(&[2.0]).unwrap(), 16.0);
        assert_eq!(Target::std_gaussian(2).unwrap().potential(&[3.0, 4.0]).unwrap(), 12.5);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(Target::std_gaussian(2).unwrap().gradient(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(Target::power_law(1, 1.0, 4.0).unwrap().gradient(&[2.0]).unwrap(), vec![32.0]);
        assert_eq!(Target::diag_gaussian(vec![1.0, 2.0]).unwrap().gradient(&[1.0, 1.0]).unwrap(), vec![1.0, 0.25]);
    }

    #[test]
    fn hamiltonian_examples() {
        let g1 = Target::std_gaussian(1).unwrap();
        let pl = Target::power_law(1, 1.0, 4.0).unwrap();
        let pt = |q: f64, p: f64| PhasePoint::new(vec![q], vec![p]).unwrap();
        assert_eq!(g1.hamiltonian(&pt(0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(g1.hamiltonian(&pt(1.0, 0.0)).unwrap(), 0.5);
        assert_eq!(pl.hamiltonian(&pt(1.0, 2.0)).unwrap(), 3.0);
    }

    #[test]
    fn errors() {
        let g = Target::std_gaussian(2).unwrap();
        assert!(matches!(g.potential(&[1.0]), Err(ModelError::DimensionMismatch { .. })));
        assert_eq!(g.potential(&[f64::NAN, 0.0]), Err(ModelError::NonFinite));
        let pl = Target::power_law(2, 1.0, 1.5).unwrap();
        assert!(matches!(pl.gradient(&[0.0, 0.0]), Err(ModelError::SingularGradient { .. })));
        let pl4 = Target::power_law(2, 1.0, 4.0).unwrap();
        assert_eq!(pl4.gradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(Target::power_law(1, 0.0, 2.0).is_err());
        assert!(Target::power_law(1, 1.0, -1.0).is_err());
        assert!(Target::diag_gaussian(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn profiles_follow_kind() {
        let tags = |t: Target| t.profile().satisfies.clone();
        let pl = |b| Target::power_law(3, 1.0, b).unwrap();
        assert!(tags(pl(0.5)).contains(&AssumptionTag::H2i));
        assert!(tags(pl(1.0)).contains(&AssumptionTag::H2i));
        assert_eq!(pl(1.5).profile().growth_m, Some(1.5));
        assert!(tags(pl(1.5)).contains(&AssumptionTag::H3));
        assert!(tags(pl(2.0)).contains(&AssumptionTag::H3));
        let t4 = tags(pl(4.0));
        assert!(t4.contains(&AssumptionTag::H2ii) && !t4.contains(&AssumptionTag::H1));
        let g = tags(Target::std_gaussian(2).unwrap());
        assert!(g.contains(&AssumptionTag::H1) && g.contains(&AssumptionTag::H4));
        assert!(Target::std_gaussian(4).unwrap().is_std_gaussian());
        assert!(!Target::diag_gaussian(vec![1.0, 2.0]).unwrap().is_std_gaussian());
    }

    #[test]
    fn smooth_laplace_gradient_is_capped() {
        let t = Target::smooth_laplace(3, 1.0).unwrap();
        let g = t.gradient(&[1e6, -3e5, 2e4]).unwrap();
        assert!(norm(&g) < 1.0);
    }

    // Points on a sphere of radius 0.5..3 keep the power laws away from their singular origin.
    fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
        (prop::collection::vec(-1.0f64..1.0, d), 0.5f64..3.0).prop_filter_map("zero", |(v, r)| {
            let n = norm(&v);
            (n > 1e-3).then(|| v.iter().map(|x| x * r / n).collect())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_matches_finite_differences(q in point(4)) {
            let eps = 1e-5;
            for t in targets(4) {
                let g = t.gradient(&q).unwrap();
                for i in 0..4 {
                    let mut a = q.clone();
                    let mut b = q.clone();
                    a[i] += eps;
                    b[i] -= eps;
                    let fd = (t.potential(&a).unwrap() - t.potential(&b).unwrap()) / (2.0 * eps);
                    let scale = norm(&g).max(1e-3);
                    prop_assert!((fd - g[i]).abs() / scale <= 1e-6, "{:?} i={} fd={} g={}", t.kind(), i, fd, g[i]);
                }
            }
        }

        #[test]
        fn rotation_invariance(q in point(5), normals in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 3)) {
            let mut rq = q.clone();
            for n in &normals {
                let nn = norm_sq(n);
                if nn < 1e-6 { continue; }
                let c = 2.0 * dot(&rq, n) / nn;
                for (x, v) in rq.iter_mut().zip(n) {
                    *x -= c * v;
                }
            }
            for t in [Target::std_gaussian(5).unwrap(), Target::power_law(5, 1.0, 4.0).unwrap(), Target::power_law(5, 2.0, 1.5).unwrap()] {
                let (a, b) = (t.potential(&q).unwrap(), t.potential(&rq).unwrap());
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
