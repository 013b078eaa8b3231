use proptest::prelude::*;

use nutslab::index_select::{bps_pmf, multinomial_pmf};
use nutslab::orbit::{sample_orbit, sample_orbit_with, OrbitOptions};
use nutslab::rng::{ChainStreams, FixedBits};
use nutslab::samplers::{nuts_step, run_chains};
use nutslab::{KernelConfig, KernelVariant, PhasePoint, Target};

fn targets(d: usize) -> Vec<Target> {
    vec![
        Target::std_gaussian(d).unwrap(),
        Target::diag_gaussian(vec![0.5; d]).unwrap(),
        Target::power_law(d, 1.0, 4.0).unwrap(),
        Target::smooth_laplace(d, 1.0).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orbits_contain_a_neighbour_of_the_anchor(
        q in prop::collection::vec(-2.0f64..2.0, 2),
        p in prop::collection::vec(-2.0f64..2.0, 2),
        h in 0.02f64..0.5,
        bits in any::<u64>(),
    ) {
        let anchor = PhasePoint::new(q, p).unwrap();
        for t in targets(2) {
            let o = sample_orbit(&t, &anchor, h, 8, &mut FixedBits::from_integer(bits, 8)).unwrap();
            prop_assert!(o.interval.contains(0));
            prop_assert!(o.diverged || o.interval.contains(1) || o.interval.contains(-1));
            prop_assert!(o.size().is_power_of_two());
        }
    }

    #[test]
    fn selection_laws_live_on_the_orbit(
        q in prop::collection::vec(-2.0f64..2.0, 3),
        p in prop::collection::vec(-2.0f64..2.0, 3),
        seed in any::<u64>(),
    ) {
        let t = Target::std_gaussian(3).unwrap();
        let anchor = PhasePoint::new(q, p).unwrap();
        let mut s = ChainStreams::new(seed, 0);
        let o = sample_orbit_with(&t, &anchor, 0.3, 6, OrbitOptions::default(), &mut s.bits, &mut ()).unwrap();
        for pmf in [multinomial_pmf(&o), bps_pmf(&o)] {
            let total: f64 = o.interval.iter().map(|j| pmf.prob(j)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert_eq!(pmf.prob(o.interval.hi + 1), 0.0);
        }
    }
}

#[test]
fn nuts_kernels_move_from_the_typical_set() {
    let t = Target::std_gaussian(10).unwrap();
    for v in [KernelVariant::NutsMul, KernelVariant::NutsBps] {
        let cfg = KernelConfig::new(v, 0.2, 10, 21).unwrap();
        let mut s = ChainStreams::new(21, 0);
        let mut moved = 0;
        for _ in 0..500 {
            let (q, d) = nuts_step(&cfg, &t, &[0.5; 10], &mut s).unwrap();
            assert!(d.grad_evals > 0);
            moved += usize::from(q != vec![0.5; 10]);
        }
        assert!(moved >= 450);
    }
}

#[test]
fn parallel_chains_match_sequential_runs() {
    let t = Target::std_gaussian(2).unwrap();
    let cfg = KernelConfig::new(KernelVariant::NutsBps, 0.25, 8, 22).unwrap();
    let starts = vec![vec![0.0, 1.0], vec![1.0, -1.0], vec![2.0, 0.5]];
    let par = run_chains(&cfg, &t, &starts, 30).unwrap();
    for (i, tr) in par.iter().enumerate() {
        let seq = nutslab::samplers::run_chain_indexed(&cfg, &t, &starts[i], 30, i as u64).unwrap();
        assert_eq!(*tr, seq);
    }
}
