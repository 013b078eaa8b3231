//! Markov kernels: NUTS with multinomial or BPS index selection, HMC with a
//! Metropolis correction, and the ideal randomised-HMC kernels whose
//! integration time follows the triangular or tent law.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::index_select::{bps_pmf, multinomial_pmf, BpsSelector};
use crate::integrator::{IntegratorError, Leapfrog, DEFAULT_DIVERGENCE_THRESHOLD};
use crate::model::{norm, ModelError, PhasePoint, Target};
use crate::orbit::{sample_orbit_with, IndexInterval, OrbitError, OrbitOptions, StopReason, UTurnMode};
use crate::rng::ChainStreams;
use crate::theory::{time_law_pmf, TheoryError, Variant};

/// Largest orbit depth a NUTS kernel may be configured with.
pub const MAX_NUTS_DEPTH: u32 = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("invalid kernel configuration: {0}")]
    InvalidConfig(String),
    #[error("ideal kernels are defined for the standard Gaussian only")]
    NotStdGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelVariant {
    NutsMul,
    NutsBps,
    Hmc { steps: u32 },
    IdealMul { kstar: u32 },
    IdealBps { kstar: u32 },
}

impl KernelVariant {
    pub fn name(&self) -> String {
        match self {
            KernelVariant::NutsMul => "nuts-mul".into(),
            KernelVariant::NutsBps => "nuts-bps".into(),
            KernelVariant::Hmc { steps } => format!("hmc-{steps}"),
            KernelVariant::IdealMul { kstar } => format!("ideal-mul-{kstar}"),
            KernelVariant::IdealBps { kstar } => format!("ideal-bps-{kstar}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConfig {
    pub variant: KernelVariant,
    pub h: f64,
    pub max_depth: u32,
    pub seed: u64,
    pub uturn_mode: UTurnMode,
    pub divergence_threshold: f64,
}

impl KernelConfig {
    pub fn new(variant: KernelVariant, h: f64, max_depth: u32, seed: u64) -> Result<Self, SamplerError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(SamplerError::InvalidConfig(format!("h must be positive, got {h}")));
        }
        match variant {
            KernelVariant::NutsMul | KernelVariant::NutsBps if !(1..=MAX_NUTS_DEPTH).contains(&max_depth) => {
                return Err(SamplerError::InvalidConfig(format!(
                    "max depth must be in 1..={MAX_NUTS_DEPTH}, got {max_depth}"
                )))
            }
            KernelVariant::Hmc { steps: 0 } => {
                return Err(SamplerError::InvalidConfig("HMC needs at least one step".into()))
            }
            KernelVariant::IdealMul { kstar: 0 } | KernelVariant::IdealBps { kstar: 0 } => {
                return Err(SamplerError::InvalidConfig("k* must be at least 1".into()))
            }
            _ => {}
        }
        Ok(Self {
            variant,
            h,
            max_depth,
            seed,
            uturn_mode: UTurnMode::StandardRecursive,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
        })
    }

    pub fn with_divergence_threshold(mut self, threshold: f64) -> Self {
        self.divergence_threshold = threshold;
        self
    }

    pub fn with_uturn_mode(mut self, mode: UTurnMode) -> Self {
        self.uturn_mode = mode;
        self
    }
}

/// What one transition did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostics {
    /// Index of the selected iterate, or the signed step count of HMC and ideal moves.
    pub selected: i64,
    pub orbit: Option<IndexInterval>,
    pub last_half: Option<IndexInterval>,
    pub depth: u32,
    pub stop: Option<StopReason>,
    /// max_j |H_j − H_0| over the orbit or trajectory.
    pub energy_error: f64,
    pub grad_evals: u64,
    /// Mass of the uniform component of the selection law on its ideal support.
    pub accept_mass: f64,
    /// Whether a uniform draw fell under `accept_mass`.
    pub accept_event: bool,
    pub stayed_put: bool,
    pub diverged: bool,
    /// HMC only: whether the proposal was accepted.
    pub accepted: Option<bool>,
    pub momentum_norm: f64,
}

fn draw_momentum(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn nuts_step(
    cfg: &KernelConfig,
    target: &Target,
    q: &[f64],
    streams: &mut ChainStreams,
) -> Result<(Vec<f64>, StepDiagnostics), SamplerError> {
    let p = draw_momentum(&mut streams.momentum, target.dim());
    nuts_step_from(cfg, target, PhasePoint::new(q.to_vec(), p)?, streams)
}

/// A NUTS transition from a given phase point, for callers that supply the momentum.
pub fn nuts_step_from(
    cfg: &KernelConfig,
    target: &Target,
    anchor: PhasePoint,
    streams: &mut ChainStreams,
) -> Result<(Vec<f64>, StepDiagnostics), SamplerError> {
    let options = OrbitOptions { mode: cfg.uturn_mode, divergence_threshold: cfg.divergence_threshold };
    let momentum_norm = norm(&anchor.p);
    let (orbit, selected, accept_mass) = match cfg.variant {
        KernelVariant::NutsMul => {
            let orbit = sample_orbit_with(target, &anchor, cfg.h, cfg.max_depth, options, &mut streams.bits, &mut ())?;
            let pmf = multinomial_pmf(&orbit);
            let j = pmf.sample(&mut streams.selection);
            let mass = pmf.uniform_mass(orbit.interval);
            (orbit, j, mass)
        }
        KernelVariant::NutsBps => {
            let mut selector = BpsSelector::new(&mut streams.selection);
            let orbit =
                sample_orbit_with(target, &anchor, cfg.h, cfg.max_depth, options, &mut streams.bits, &mut selector)?;
            let j = selector.selected();
            let support = orbit.last_half.unwrap_or(IndexInterval::singleton(0));
            let mass = bps_pmf(&orbit).uniform_mass(support);
            (orbit, j, mass)
        }
        _ => return Err(SamplerError::InvalidConfig(format!("{} is not a NUTS kernel", cfg.variant.name()))),
    };
    let u: f64 = streams.noise.random();
    let diag = StepDiagnostics {
        selected,
        orbit: Some(orbit.interval),
        last_half: orbit.last_half,
        depth: orbit.depth(),
        stop: Some(orbit.stopped_by),
        energy_error: orbit.max_energy_error(),
        grad_evals: orbit.grad_evals,
        accept_mass,
        accept_event: u < accept_mass,
        stayed_put: selected == 0,
        diverged: orbit.diverged,
        accepted: None,
        momentum_norm,
    };
    Ok((orbit.state(selected).q.clone(), diag))
}

pub fn hmc_step(
    cfg: &KernelConfig,
    target: &Target,
    q: &[f64],
    streams: &mut ChainStreams,
) -> Result<(Vec<f64>, StepDiagnostics), SamplerError> {
    let KernelVariant::Hmc { steps } = cfg.variant else {
        return Err(SamplerError::InvalidConfig(format!("{} is not an HMC kernel", cfg.variant.name())));
    };
    let p = draw_momentum(&mut streams.momentum, target.dim());
    let momentum_norm = norm(&p);
    let start = PhasePoint::new(q.to_vec(), p)?;
    let mut lf = Leapfrog::new(target, cfg.h)?.with_threshold(cfg.divergence_threshold);
    let mut it = lf.start(&start)?;
    let h0 = it.hamiltonian();
    let mut energy_error: f64 = 0.0;
    let mut diverged = false;
    for k in 1..=steps as i64 {
        match lf.step(&it, true, k) {
            Ok(next) => {
                energy_error = energy_error.max((next.hamiltonian() - h0).abs());
                it = next;
            }
            Err(IntegratorError::Divergence { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let u: f64 = streams.selection.random();
    let accept_prob = if diverged { 0.0 } else { (h0 - it.hamiltonian()).exp().min(1.0) };
    let accepted = u < accept_prob;
    let out = if accepted { it.point.q } else { q.to_vec() };
    let diag = StepDiagnostics {
        selected: if accepted { steps as i64 } else { 0 },
        orbit: None,
        last_half: None,
        depth: 0,
        stop: None,
        energy_error,
        grad_evals: lf.grad_evals(),
        accept_mass: accept_prob,
        accept_event: accepted,
        stayed_put: !accepted,
        diverged,
        accepted: Some(accepted),
        momentum_norm,
    };
    Ok((out, diag))
}

/// Moves (q, p) by T signed leapfrog steps.
pub fn ideal_move(target: &Target, q: &[f64], p: Vec<f64>, h: f64, t: i64) -> Result<Vec<f64>, SamplerError> {
    let s = PhasePoint::new(q.to_vec(), p)?;
    Ok(Leapfrog::new(target, h)?.iterate(&s, t)?.q)
}

pub fn ideal_step(
    cfg: &KernelConfig,
    target: &Target,
    q: &[f64],
    streams: &mut ChainStreams,
) -> Result<(Vec<f64>, StepDiagnostics), SamplerError> {
    let (rule, kstar) = match cfg.variant {
        KernelVariant::IdealMul { kstar } => (Variant::Mul, kstar),
        KernelVariant::IdealBps { kstar } => (Variant::Bps, kstar),
        _ => return Err(SamplerError::InvalidConfig(format!("{} is not an ideal kernel", cfg.variant.name()))),
    };
    if !target.is_std_gaussian() {
        return Err(SamplerError::NotStdGaussian);
    }
    let law = time_law_pmf(rule, kstar)?;
    let p = draw_momentum(&mut streams.momentum, target.dim());
    let momentum_norm = norm(&p);
    let t = law.sample_with(streams.selection.random());
    let out = ideal_move(target, q, p, cfg.h, t)?;
    let diag = StepDiagnostics {
        selected: t,
        orbit: None,
        last_half: None,
        depth: kstar,
        stop: None,
        energy_error: 0.0,
        grad_evals: if t == 0 { 0 } else { t.unsigned_abs() + 1 },
        accept_mass: 1.0,
        accept_event: true,
        stayed_put: t == 0,
        diverged: false,
        accepted: None,
        momentum_norm,
    };
    Ok((out, diag))
}

/// One transition of whichever kernel `cfg` names.
pub fn step(
    cfg: &KernelConfig,
    target: &Target,
    q: &[f64],
    streams: &mut ChainStreams,
) -> Result<(Vec<f64>, StepDiagnostics), SamplerError> {
    match cfg.variant {
        KernelVariant::NutsMul | KernelVariant::NutsBps => nuts_step(cfg, target, q, streams),
        KernelVariant::Hmc { .. } => hmc_step(cfg, target, q, streams),
        KernelVariant::IdealMul { .. } | KernelVariant::IdealBps { .. } => ideal_step(cfg, target, q, streams),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainTrace {
    pub seed: u64,
    pub chain: u64,
    pub positions: Vec<Vec<f64>>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub total_grad_evals: u64,
}

pub fn run_chain(cfg: &KernelConfig, target: &Target, q0: &[f64], n_steps: usize) -> Result<ChainTrace, SamplerError> {
    run_chain_indexed(cfg, target, q0, n_steps, 0)
}

pub fn run_chain_indexed(
    cfg: &KernelConfig,
    target: &Target,
    q0: &[f64],
    n_steps: usize,
    chain: u64,
) -> Result<ChainTrace, SamplerError> {
    if n_steps == 0 {
        return Err(SamplerError::InvalidConfig("a chain needs at least one step".into()));
    }
    let mut streams = ChainStreams::new(cfg.seed, chain);
    let mut q = q0.to_vec();
    let mut trace = ChainTrace {
        seed: cfg.seed,
        chain,
        positions: Vec::with_capacity(n_steps),
        diagnostics: Vec::with_capacity(n_steps),
        total_grad_evals: 0,
    };
    for _ in 0..n_steps {
        let (next, diag) = step(cfg, target, &q, &mut streams)?;
        trace.total_grad_evals += diag.grad_evals;
        trace.positions.push(next.clone());
        trace.diagnostics.push(diag);
        q = next;
    }
    Ok(trace)
}

/// Independent chains, chain i seeded by (cfg.seed, i), run in parallel.
pub fn run_chains(
    cfg: &KernelConfig,
    target: &Target,
    starts: &[Vec<f64>],
    n_steps: usize,
) -> Result<Vec<ChainTrace>, SamplerError> {
    starts.par_iter().enumerate().map(|(i, q0)| run_chain_indexed(cfg, target, q0, n_steps, i as u64)).collect()
}
