//! Monte Carlo drivers: coupled ideal chains, energy-error scans on the
//! typical set, ensemble mixing proxies, tail probes and drift estimates.
//! Every unit of work owns `ChainStreams::new(seed, unit)`, so results do not
//! depend on the thread count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index_select::{multinomial_pmf, BpsSelector, SelectionRule};
use crate::integrator::{IntegratorError, Leapfrog};
use crate::model::{norm, ModelError, PhasePoint, Target};
use crate::orbit::{sample_orbit_with, Orbit, OrbitError, OrbitOptions};
use crate::rng::ChainStreams;
use crate::samplers::{ideal_move, step, KernelConfig, KernelVariant, SamplerError};
use crate::stats::{chi_square_test, chi_squared_cdf, ks_statistic, linear_fit, mean_se, std_normal_cdf};
use crate::theory::{
    concentration_check, delta_big_delta, jump_bound, predict_kstar, rho_closed_form, tail_coefficients, time_law_pmf,
    TheoryError, Variant,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error("invalid experiment parameter: {0}")]
    InvalidParameter(String),
}

type Result<T> = std::result::Result<T, ExperimentError>;

fn normals(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn axis(d: usize, r: f64) -> Vec<f64> {
    let mut q = vec![0.0; d];
    q[0] = r;
    q
}

/// How coupled ideal chains move: by leapfrog, or by the exact Gaussian flow
/// for time hT (the h → 0 oracle).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Flow {
    Leapfrog,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub variant: Variant,
    pub flow: Flow,
    pub d: usize,
    pub h: f64,
    pub kstar: u32,
    pub n_pairs: usize,
    pub seed: u64,
    /// Mean of |q′ − q̃′| / |q − q̃| over pairs, per step.
    pub ratios: Vec<f64>,
    pub ratio_ses: Vec<f64>,
    /// Mean distance between the coupled chains after each step.
    pub distances: Vec<f64>,
    /// All steps pooled.
    pub pooled_ratio: f64,
    pub pooled_se: f64,
    /// 1 − ρ in the small-h limit.
    pub predicted: f64,
}

impl CouplingReport {
    pub fn csv_header() -> &'static [&'static str] {
        &["step", "ratio", "se", "mean_distance"]
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        (0..self.ratios.len())
            .map(|s| {
                vec![
                    (s + 1).to_string(),
                    self.ratios[s].to_string(),
                    self.ratio_ses[s].to_string(),
                    self.distances[s].to_string(),
                ]
            })
            .collect()
    }
}

/// Synchronously coupled ideal-kernel chains on the standard Gaussian: both
/// chains share the momentum and the integration time at every step.
/// With `start_offset = None` the second chain starts at an independent
/// stationary draw; with `Some(0.0)` both chains start together.
#[allow(clippy::too_many_arguments)]
pub fn coupling_contraction(
    variant: Variant,
    d: usize,
    h: f64,
    kstar: u32,
    n_pairs: usize,
    n_steps: usize,
    seed: u64,
    flow: Flow,
    start_offset: Option<f64>,
) -> Result<CouplingReport> {
    if d == 0 || n_pairs == 0 || n_steps == 0 {
        return Err(ExperimentError::InvalidParameter("d, n_pairs and n_steps must be positive".into()));
    }
    let target = Target::std_gaussian(d)?;
    let law = time_law_pmf(variant, kstar)?;
    let per_pair: Vec<Vec<(f64, f64)>> = (0..n_pairs)
        .into_par_iter()
        .map(|i| -> Result<Vec<(f64, f64)>> {
            let mut s = ChainStreams::new(seed, i as u64);
            let mut q = normals(&mut s.noise, d);
            let mut qt = match start_offset {
                None => normals(&mut s.noise, d),
                Some(off) => q.iter().map(|x| x + off).collect(),
            };
            let mut out = Vec::with_capacity(n_steps);
            for _ in 0..n_steps {
                let before = distance(&q, &qt);
                let p = normals(&mut s.momentum, d);
                let t = law.sample_with(s.selection.random());
                let (nq, nqt) = match flow {
                    Flow::Leapfrog => (ideal_move(&target, &q, p.clone(), h, t)?, ideal_move(&target, &qt, p, h, t)?),
                    Flow::Exact => {
                        let (c, sn) = ((h * t as f64).cos(), (h * t as f64).sin());
                        let f = |x: &[f64]| x.iter().zip(&p).map(|(a, b)| a * c + b * sn).collect::<Vec<f64>>();
                        (f(&q), f(&qt))
                    }
                };
                q = nq;
                qt = nqt;
                let after = distance(&q, &qt);
                let ratio = if before > 0.0 { after / before } else { 0.0 };
                out.push((ratio, after));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut ratios = Vec::with_capacity(n_steps);
    let mut ratio_ses = Vec::with_capacity(n_steps);
    let mut distances = Vec::with_capacity(n_steps);
    for s in 0..n_steps {
        let rs: Vec<f64> = per_pair.iter().map(|v| v[s].0).collect();
        let (m, se) = mean_se(&rs);
        ratios.push(m);
        ratio_ses.push(se);
        distances.push(per_pair.iter().map(|v| v[s].1).sum::<f64>() / n_pairs as f64);
    }
    let pooled: Vec<f64> = per_pair.iter().flat_map(|v| v.iter().map(|x| x.0)).collect();
    let (pooled_ratio, pooled_se) = mean_se(&pooled);
    Ok(CouplingReport {
        variant,
        flow,
        d,
        h,
        kstar,
        n_pairs,
        seed,
        ratios,
        ratio_ses,
        distances,
        pooled_ratio,
        pooled_se,
        predicted: 1.0 - rho_closed_form(variant),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyScanRow {
    pub sample: usize,
    pub orbit_size: usize,
    pub energy_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyScanReport {
    pub d: usize,
    pub h: f64,
    pub alpha: f64,
    pub r: f64,
    pub max_depth: u32,
    pub seed: u64,
    pub n_filtered: usize,
    pub n_drawn: usize,
    pub observed_max: f64,
    /// Δ from the concentration bounds.
    pub bound: f64,
    /// δ from the concentration bounds.
    pub formal_delta: f64,
    /// Angular margin used to predict k*.
    pub kstar_margin: f64,
    pub predicted_kstar: Option<u32>,
    /// Fraction of filtered samples whose orbit has size 2^{k*}.
    pub size_match: f64,
    /// Fraction whose energy error is at most Δ.
    pub within_bound: f64,
    pub rows: Vec<EnergyScanRow>,
}

impl EnergyScanReport {
    pub fn csv_header() -> &'static [&'static str] {
        &["sample", "orbit_size", "energy_error"]
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| vec![r.sample.to_string(), r.orbit_size.to_string(), r.energy_error.to_string()])
            .collect()
    }
}

/// Draws (q, p) from π ⊗ N(0, I), keeps pairs in D_α × E, builds one orbit
/// from each and records its size and sup_j |H_j − H_0|.
#[allow(clippy::too_many_arguments)]
pub fn energy_error_scan(
    d: usize,
    h: f64,
    alpha: f64,
    r: f64,
    n_samples: usize,
    max_depth: u32,
    kstar_margin: f64,
    seed: u64,
) -> Result<EnergyScanReport> {
    if n_samples == 0 {
        return Err(ExperimentError::InvalidParameter("n_samples must be positive".into()));
    }
    let target = Target::std_gaussian(d)?;
    let conc = delta_big_delta(d as f64, alpha, r, h)?;
    let kstar = predict_kstar(h, kstar_margin, max_depth);
    let results: Vec<(EnergyScanRow, usize)> = (0..n_samples)
        .into_par_iter()
        .map(|i| -> Result<(EnergyScanRow, usize)> {
            let mut s = ChainStreams::new(seed, i as u64);
            let mut drawn = 0;
            let (q, p) = loop {
                drawn += 1;
                let q = normals(&mut s.momentum, d);
                let p = normals(&mut s.momentum, d);
                if concentration_check(alpha, r, &q, &p) == (true, true) {
                    break (q, p);
                }
                if drawn > 100_000 {
                    return Err(ExperimentError::InvalidParameter("filter accepts almost nothing".into()));
                }
            };
            let orbit = sample_orbit_with(
                &target,
                &PhasePoint::new(q, p)?,
                h,
                max_depth,
                OrbitOptions::default(),
                &mut s.bits,
                &mut (),
            )?;
            Ok((EnergyScanRow { sample: i, orbit_size: orbit.size(), energy_error: orbit.max_energy_error() }, drawn))
        })
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    let rows: Vec<EnergyScanRow> = results.iter().map(|x| x.0.clone()).collect();
    let observed_max = rows.iter().map(|r| r.energy_error).fold(0.0, f64::max);
    let size_match = match kstar {
        Some(k) => rows.iter().filter(|r| r.orbit_size == 1usize << k).count() as f64 / n,
        None => 0.0,
    };
    let within_bound = rows.iter().filter(|r| r.energy_error <= conc.energy_bound).count() as f64 / n;
    Ok(EnergyScanReport {
        d,
        h,
        alpha,
        r,
        max_depth,
        seed,
        n_filtered: rows.len(),
        n_drawn: results.iter().map(|x| x.1).sum(),
        observed_max,
        bound: conc.energy_bound,
        formal_delta: conc.delta,
        kstar_margin,
        predicted_kstar: kstar,
        size_match,
        within_bound,
        rows,
    })
}

/// Where the mixing chains start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ColdStart {
    /// q₀ = √d e₁, on the shell |q|² = d.
    Axis,
    /// q₀ = (1, …, 1), on the same shell with every coordinate of order one.
    Diagonal,
    /// Independent draws from π.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingEntry {
    pub variant: String,
    pub d: usize,
    pub h: f64,
    pub threshold: f64,
    pub n_chains: usize,
    pub seed: u64,
    /// First iteration at which both KS distances fall below the threshold,
    /// or `None` when the cap was reached first.
    pub iterations: Option<usize>,
    /// Mean gradient evaluations per chain up to that iteration (or the cap).
    pub grad_evals: f64,
    pub ks_radial: Vec<f64>,
    pub ks_coordinate: Vec<f64>,
    /// Mean cumulative gradient evaluations per chain after each iteration.
    pub cumulative_grads: Vec<f64>,
}

impl MixingEntry {
    pub fn csv_header() -> &'static [&'static str] {
        &["iteration", "ks_radial", "ks_coordinate", "cumulative_grads"]
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        (0..self.ks_radial.len())
            .map(|i| {
                vec![
                    i.to_string(),
                    self.ks_radial[i].to_string(),
                    self.ks_coordinate[i].to_string(),
                    self.cumulative_grads[i].to_string(),
                ]
            })
            .collect()
    }
}

/// Runs `n_chains` chains in lockstep and, after each iteration, compares
/// the ensemble of |q|² with χ²(d) and of q₁ with N(0, 1) by KS distance.
pub fn mixing_proxy(
    cfg: &KernelConfig,
    d: usize,
    threshold: f64,
    n_chains: usize,
    max_iterations: usize,
    start: ColdStart,
) -> Result<MixingEntry> {
    if n_chains < 2 {
        return Err(ExperimentError::InvalidParameter("need at least two chains".into()));
    }
    let target = Target::std_gaussian(d)?;
    let mut chains: Vec<(Vec<f64>, ChainStreams, u64)> = (0..n_chains)
        .map(|i| {
            let mut s = ChainStreams::new(cfg.seed, i as u64);
            let q = match start {
                ColdStart::Axis => axis(d, (d as f64).sqrt()),
                ColdStart::Diagonal => vec![1.0; d],
                ColdStart::Stationary => normals(&mut s.noise, d),
            };
            (q, s, 0)
        })
        .collect();
    let ks = |chains: &[(Vec<f64>, ChainStreams, u64)]| {
        let r: Vec<f64> = chains.iter().map(|c| c.0.iter().map(|x| x * x).sum()).collect();
        let x: Vec<f64> = chains.iter().map(|c| c.0[0]).collect();
        (ks_statistic(&r, |v| chi_squared_cdf(d as f64, v)), ks_statistic(&x, std_normal_cdf))
    };
    let mut entry = MixingEntry {
        variant: cfg.variant.name(),
        d,
        h: cfg.h,
        threshold,
        n_chains,
        seed: cfg.seed,
        iterations: None,
        grad_evals: 0.0,
        ks_radial: Vec::new(),
        ks_coordinate: Vec::new(),
        cumulative_grads: Vec::new(),
    };
    for it in 0..=max_iterations {
        let (kr, kc) = ks(&chains);
        let grads = chains.iter().map(|c| c.2 as f64).sum::<f64>() / n_chains as f64;
        entry.ks_radial.push(kr);
        entry.ks_coordinate.push(kc);
        entry.cumulative_grads.push(grads);
        entry.grad_evals = grads;
        if kr < threshold && kc < threshold {
            entry.iterations = Some(it);
            break;
        }
        if it == max_iterations {
            break;
        }
        chains.par_iter_mut().try_for_each(|(q, s, g)| -> Result<()> {
            let (next, diag) = step(cfg, &target, q, s)?;
            *q = next;
            *g += diag.grad_evals;
            Ok(())
        })?;
    }
    Ok(entry)
}

/// Least-squares slope of ln(gradients) against ln(d) over uncensored entries.
pub fn scaling_exponent(entries: &[MixingEntry]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .filter(|e| e.iterations.is_some() && e.grad_evals > 0.0)
        .map(|e| ((e.d as f64).ln(), e.grad_evals.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(linear_fit(&x, &y).0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StayPutRow {
    pub radius: f64,
    pub frequency: f64,
    pub se: f64,
    pub mean_orbit_size: f64,
    pub diverged: f64,
}

/// Single NUTS steps from q₀ = R e₁; reports how often index 0 is selected.
pub fn stayput_probe(target: &Target, radii: &[f64], cfg: &KernelConfig, n_trials: usize) -> Result<Vec<StayPutRow>> {
    if !matches!(cfg.variant, KernelVariant::NutsMul | KernelVariant::NutsBps) {
        return Err(ExperimentError::InvalidParameter("stay-put probe needs a NUTS kernel".into()));
    }
    radii
        .iter()
        .enumerate()
        .map(|(ri, &radius)| {
            let q0 = axis(target.dim(), radius);
            let trials: Vec<(bool, usize, bool)> = (0..n_trials)
                .into_par_iter()
                .map(|i| -> Result<(bool, usize, bool)> {
                    let mut s = ChainStreams::new(cfg.seed, (ri * n_trials + i) as u64);
                    let (_, diag) = step(cfg, target, &q0, &mut s)?;
                    Ok((diag.stayed_put, diag.orbit.map_or(1, |o| o.len()), diag.diverged))
                })
                .collect::<Result<_>>()?;
            let n = n_trials as f64;
            let frequency = trials.iter().filter(|t| t.0).count() as f64 / n;
            Ok(StayPutRow {
                radius,
                frequency,
                se: crate::stats::binomial_se(frequency, n_trials),
                mean_orbit_size: trials.iter().map(|t| t.1 as f64).sum::<f64>() / n,
                diverged: trials.iter().filter(|t| t.2).count() as f64 / n,
            })
        })
        .collect()
}

/// True when the frequencies never drop by more than `n_se` standard errors
/// from one radius to the next.
pub fn stayput_monotone(rows: &[StayPutRow], n_se: f64) -> bool {
    rows.windows(2).all(|w| {
        let slack = n_se * (w[0].se * w[0].se + w[1].se * w[1].se).sqrt();
        w[1].frequency + slack >= w[0].frequency
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpReport {
    pub m: f64,
    pub h: f64,
    pub n_trials: usize,
    pub violations: usize,
    /// Largest displacement / bound over trials that moved.
    pub max_ratio: f64,
    pub max_displacement: f64,
}

/// Single NUTS-mul steps on a target with gradient norm below `m`, started
/// from q ~ N(0, spread² I); checks |q′ − q| ≤ |T| h |p| + (h T)² m.
pub fn jump_bound_probe(
    target: &Target,
    m: f64,
    cfg: &KernelConfig,
    spread: f64,
    n_trials: usize,
) -> Result<JumpReport> {
    let d = target.dim();
    let options = OrbitOptions { mode: cfg.uturn_mode, divergence_threshold: cfg.divergence_threshold };
    let rows: Vec<(f64, f64)> = (0..n_trials)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut s = ChainStreams::new(cfg.seed, i as u64);
            let q: Vec<f64> = normals(&mut s.noise, d).into_iter().map(|x| spread * x).collect();
            let p = normals(&mut s.momentum, d);
            let p_norm = norm(&p);
            let anchor = PhasePoint::new(q.clone(), p)?;
            let orbit = sample_orbit_with(target, &anchor, cfg.h, cfg.max_depth, options, &mut s.bits, &mut ())?;
            let j = multinomial_pmf(&orbit).sample(&mut s.selection);
            Ok((distance(&orbit.state(j).q, &q), jump_bound(j, cfg.h, p_norm, m)))
        })
        .collect::<Result<_>>()?;
    let tol = |b: f64| 1e-12 * (1.0 + b);
    Ok(JumpReport {
        m,
        h: cfg.h,
        n_trials,
        violations: rows.iter().filter(|(x, b)| *x > b + tol(*b)).count(),
        max_ratio: rows.iter().filter(|(_, b)| *b > 0.0).map(|(x, b)| x / b).fold(0.0, f64::max),
        max_displacement: rows.iter().map(|r| r.0).fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailGrowthRow {
    pub radius: f64,
    pub energy_change: Option<f64>,
    /// (H_T − H_0) / R^{β(β−2)}.
    pub normalized: Option<f64>,
    /// q_j / (R^{β−1} Π_{0<i<j} |q_i|^{β−2}) for j = 1..=T, the observed
    /// leading coefficients.
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailGrowthReport {
    pub c: f64,
    pub beta: f64,
    pub h: f64,
    pub steps: usize,
    pub gamma: f64,
    pub rows: Vec<TailGrowthRow>,
    /// Slope of ln(H_T − H_0) against ln R over rows with a positive change.
    pub slope: Option<f64>,
    pub min_normalized: Option<f64>,
    /// (α_q^j, α_p^j) for j = 0..=T.
    pub expansion: Vec<(f64, f64)>,
    /// Whether the observed ω at the largest finite radius has the sign of
    /// α_q^j and matches its magnitude to 1%, for every j.
    pub expansion_consistent: bool,
}

/// Leapfrog from q₀ = R e₁ with |p₀| = R^γ in a random direction, for each R.
/// Non-finite trajectories are recorded, not fatal.
pub fn tail_energy_growth(
    d: usize,
    c: f64,
    beta: f64,
    h: f64,
    steps: usize,
    radii: &[f64],
    seed: u64,
) -> Result<TailGrowthReport> {
    if !(1..=3).contains(&steps) {
        return Err(ExperimentError::InvalidParameter(format!("T must be 1, 2 or 3, got {steps}")));
    }
    let target = Target::power_law(d, c, beta)?;
    let gamma = ((beta - 2.0) / 2.0).min(0.5);
    let rows: Vec<TailGrowthRow> = radii
        .iter()
        .enumerate()
        .map(|(ri, &radius)| -> Result<TailGrowthRow> {
            let mut s = ChainStreams::new(seed, ri as u64);
            let dir = normals(&mut s.momentum, d);
            let scale = radius.max(1.0).powf(gamma.max(0.0)) / norm(&dir);
            let p0: Vec<f64> = dir.iter().map(|x| x * scale).collect();
            let start = PhasePoint::new(axis(d, radius), p0)?;
            let mut lf = Leapfrog::new(&target, h)?.with_threshold(f64::INFINITY);
            let mut it = match lf.start(&start) {
                Ok(it) => it,
                Err(IntegratorError::Divergence { .. }) => {
                    return Ok(TailGrowthRow { radius, energy_change: None, normalized: None, omega: vec![] })
                }
                Err(e) => return Err(e.into()),
            };
            let h0 = it.hamiltonian();
            let mut omega = Vec::with_capacity(steps);
            let mut scale = radius.powf(beta - 1.0);
            for j in 1..=steps as i64 {
                match lf.step(&it, true, j) {
                    Ok(next) => it = next,
                    Err(IntegratorError::Divergence { .. }) => {
                        return Ok(TailGrowthRow { radius, energy_change: None, normalized: None, omega })
                    }
                    Err(e) => return Err(e.into()),
                }
                let qj = it.point.q[0];
                omega.push(qj / scale);
                scale *= qj.abs().powf(beta - 2.0);
            }
            let dh = it.hamiltonian() - h0;
            if !dh.is_finite() {
                return Ok(TailGrowthRow { radius, energy_change: None, normalized: None, omega });
            }
            Ok(TailGrowthRow {
                radius,
                energy_change: Some(dh),
                normalized: Some(dh / radius.powf(beta * (beta - 2.0))),
                omega,
            })
        })
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| r.energy_change.filter(|&e| e > 0.0).map(|e| (r.radius.ln(), e.ln()))).collect();
    let slope = (pts.len() >= 2).then(|| {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&x, &y).0
    });
    let min_normalized = rows.iter().filter_map(|r| r.normalized).reduce(f64::min);
    let expansion = tail_coefficients(c, beta, h, steps);
    let expansion_consistent = rows.iter().rev().find(|r| r.energy_change.is_some()).is_some_and(|r| {
        r.omega.iter().enumerate().all(|(j, &w)| {
            let a = expansion[j + 1].0;
            a != 0.0 && w.signum() == a.signum() && ((w - a) / a).abs() <= 0.01
        })
    });
    Ok(TailGrowthReport { c, beta, h, steps, gamma, rows, slope, min_normalized, expansion, expansion_consistent })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftRow {
    pub radius: f64,
    /// Monte Carlo estimate of E[V_a(q′)] / V_a(q) with V_a = exp(a|q|).
    pub ratio: f64,
    pub se: f64,
}

pub fn drift_check(target: &Target, a: f64, radii: &[f64], cfg: &KernelConfig, n_mc: usize) -> Result<Vec<DriftRow>> {
    if a.is_nan() || a <= 0.0 {
        return Err(ExperimentError::InvalidParameter(format!("a must be positive, got {a}")));
    }
    radii
        .iter()
        .enumerate()
        .map(|(ri, &radius)| {
            let q0 = axis(target.dim(), radius);
            let xs: Vec<f64> = (0..n_mc)
                .into_par_iter()
                .map(|i| -> Result<f64> {
                    let mut s = ChainStreams::new(cfg.seed, (ri * n_mc + i) as u64);
                    let (q1, _) = step(cfg, target, &q0, &mut s)?;
                    Ok((a * (norm(&q1) - radius)).exp())
                })
                .collect::<Result<_>>()?;
            let (ratio, se) = mean_se(&xs);
            Ok(DriftRow { radius, ratio, se })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityReport {
    pub rule: SelectionRule,
    pub depth: usize,
    pub n_draws: usize,
    /// Counts over the orbit, lowest index first.
    pub counts: Vec<u64>,
    pub chi_square: f64,
    pub p_value: f64,
}

/// Index selection on a fixed orbit of the given depth whose states all
/// share the same energy. Multinomial draws are compared with the uniform law
/// on the orbit, BPS draws with the uniform law on the last half.
pub fn selection_uniformity(rule: SelectionRule, depth: usize, n_draws: usize, seed: u64) -> Result<UniformityReport> {
    if depth == 0 || depth > 12 {
        return Err(ExperimentError::InvalidParameter(format!("depth must be in 1..=12, got {depth}")));
    }
    let mut bits_rng = ChainStreams::new(seed, u64::MAX).bits;
    let bits: Vec<bool> = (0..depth).map(|_| bits_rng.random()).collect();
    let anchor = PhasePoint::new(vec![0.0], vec![0.0])?;
    let orbit = Orbit::synthetic(anchor, &bits, |_| -1.0);
    let interval = orbit.interval;
    let support = match rule {
        SelectionRule::Multinomial => interval,
        SelectionRule::Bps => orbit.last_half.expect("depth ≥ 1"),
    };
    let picks: Vec<i64> = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut s = ChainStreams::new(seed, i as u64);
            match rule {
                SelectionRule::Multinomial => multinomial_pmf(&orbit).sample(&mut s.selection),
                SelectionRule::Bps => BpsSelector::new(&mut s.selection).replay(&orbit).0,
            }
        })
        .collect();
    let mut counts = vec![0u64; interval.len()];
    for j in picks {
        counts[(j - interval.lo) as usize] += 1;
    }
    let probs: Vec<f64> =
        interval.iter().map(|j| if support.contains(j) { 1.0 / support.len() as f64 } else { 0.0 }).collect();
    let (chi_square, p_value) = chi_square_test(&counts, &probs);
    Ok(UniformityReport { rule, depth, n_draws, counts, chi_square, p_value })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub variant: String,
    pub d: usize,
    pub n_starts: usize,
    pub ks_coordinate: f64,
    pub ks_radial: f64,
}

/// One transition from each of `n_starts` independent draws from π; KS of
/// the first coordinate against N(0, 1) and of |q|² against χ²(d).
pub fn one_step_invariance(cfg: &KernelConfig, d: usize, n_starts: usize) -> Result<InvarianceReport> {
    let target = Target::std_gaussian(d)?;
    let out: Vec<Vec<f64>> = (0..n_starts)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut s = ChainStreams::new(cfg.seed, i as u64);
            let q = normals(&mut s.noise, d);
            Ok(step(cfg, &target, &q, &mut s)?.0)
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = out.iter().map(|q| q[0]).collect();
    let r: Vec<f64> = out.iter().map(|q| q.iter().map(|v| v * v).sum()).collect();
    Ok(InvarianceReport {
        variant: cfg.variant.name(),
        d,
        n_starts,
        ks_coordinate: ks_statistic(&x, std_normal_cdf),
        ks_radial: ks_statistic(&r, |v| chi_squared_cdf(d as f64, v)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeFrequencyReport {
    pub variant: Variant,
    pub kstar: u32,
    pub n_draws: usize,
    /// (T, observed frequency, exact probability, binomial SE) over the support.
    pub cells: Vec<(i64, f64, f64, f64)>,
    /// Largest |observed − exact| / SE over cells with positive probability.
    pub max_z: f64,
}

/// Integration times realised by the ideal kernel, compared cell by cell with the exact law.
pub fn ideal_time_frequencies(
    variant: Variant,
    kstar: u32,
    h: f64,
    n_draws: usize,
    seed: u64,
) -> Result<TimeFrequencyReport> {
    let kernel = match variant {
        Variant::Mul => KernelVariant::IdealMul { kstar },
        Variant::Bps => KernelVariant::IdealBps { kstar },
    };
    let cfg = KernelConfig::new(kernel, h, 1, seed)?;
    let target = Target::std_gaussian(1)?;
    let law = time_law_pmf(variant, kstar)?;
    let ts: Vec<i64> = (0..n_draws)
        .into_par_iter()
        .map(|i| -> Result<i64> {
            let mut s = ChainStreams::new(seed, i as u64);
            Ok(step(&cfg, &target, &[0.5], &mut s)?.1.selected)
        })
        .collect::<Result<_>>()?;
    let lo = -law.max_steps();
    let mut counts = vec![0u64; law.pmf.len()];
    for t in ts {
        counts[(t - lo) as usize] += 1;
    }
    let n = n_draws as f64;
    let cells: Vec<(i64, f64, f64, f64)> = law
        .support()
        .zip(&counts)
        .map(|(t, &c)| {
            let p = law.prob(t);
            (t, c as f64 / n, p, crate::stats::binomial_se(p, n_draws))
        })
        .collect();
    let max_z = cells
        .iter()
        .map(|&(_, f, p, se)| {
            if p > 0.0 {
                (f - p).abs() / se
            } else if f > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok(TimeFrequencyReport { variant, kstar, n_draws, cells, max_z })
}
