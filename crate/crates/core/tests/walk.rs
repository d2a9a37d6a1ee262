use ballwalk_core::discretize::{assemble_walk, build_grid, to_P};
use ballwalk_core::eigen::smallest_eigs;
use ballwalk_core::landscape::{analyze_landscape, LandscapeLabeling, LandscapeOptions};
use ballwalk_core::potential::{AxisBox, PotentialSpec};
use ballwalk_core::symbolics::quadrature::integrate_adaptive;
use ballwalk_core::walk::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn tilted() -> (PotentialSpec, AxisBox, LandscapeLabeling) {
    let spec = PotentialSpec::double_well_tilted(0.3);
    let bx = AxisBox::symmetric(1, 2.0);
    let lab = analyze_landscape(&spec, &bx, &LandscapeOptions::new(2e-3)).unwrap();
    (spec, bx, lab)
}

fn config(spec: &PotentialSpec, bx: &AxisBox, h: f64, start: Start) -> WalkConfig {
    WalkConfig {
        spec: spec.clone(),
        bx: bx.clone(),
        h,
        n_steps: 100,
        n_chains: 100,
        seed: 42,
        start,
        record_every: 1,
        stationary_dx: None,
    }
}

#[test]
fn constant_potential_increments_have_zero_mean() {
    let spec = PotentialSpec::poly1(&[(0, 1.0)]);
    let h = 0.2;
    let sampler = Sampler::new(&spec, &AxisBox::symmetric(1, 2.0), h);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut counts = StepCounts::default();
    let n = 1_000_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let mut x = [0.0];
        sampler.step(&mut x, &mut rng, &mut counts).unwrap();
        sum += x[0];
    }
    let sigma = h / 3f64.sqrt() / (n as f64).sqrt();
    assert!((sum / n as f64).abs() <= 4.0 * sigma);
    assert_eq!(counts.accepted, n);
}

#[test]
fn one_step_law_passes_chi_square() {
    let (spec, bx, _) = tilted();
    let h = 0.2;
    let sampler = Sampler::new(&spec, &bx, h);
    let bins = 40;
    let n = 1_000_000;
    let mut counts = vec![0u64; bins];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sc = StepCounts::default();
    for _ in 0..n {
        let mut x = [0.0];
        sampler.step(&mut x, &mut rng, &mut sc).unwrap();
        let b = (((x[0] + h) / (2.0 * h)) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let density = |y: f64| (-(spec.value(&[y]) - 1.0) / h).exp();
    let mass = |a: f64, b: f64| integrate_adaptive(density, a, b, 1e-14, 1e-12).unwrap().0;
    let total = mass(-h, h);
    let mut chi2 = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        let a = -h + 2.0 * h * k as f64 / bins as f64;
        let e = n as f64 * mass(a, a + 2.0 * h / bins as f64) / total;
        chi2 += (c as f64 - e).powi(2) / e;
    }
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 1e-3, "chi2 = {chi2}, p = {p}");
    assert!(sc.accepted as f64 / sc.proposals as f64 >= (-2.0 * sampler.lip_box()).exp());
}

#[test]
fn binned_flux_is_balanced_from_the_stationary_histogram() {
    let (spec, bx, _) = tilted();
    let h = 0.25;
    let sampler = Sampler::new(&spec, &bx, h);
    let hist = StationaryHistogram::new(&spec, &bx, h, h / 40.0).unwrap();
    let width = h / 2.0;
    let bins = (4.0 / width) as usize;
    let bin = |x: f64| (((x + 2.0) / width).floor() as usize).min(bins - 1);
    let mut flux = vec![vec![0u64; bins]; bins];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sc = StepCounts::default();
    for _ in 0..2_000_000 {
        let mut x = hist.sample(&mut rng);
        let i = bin(x[0]);
        sampler.step(&mut x, &mut rng, &mut sc).unwrap();
        flux[i][bin(x[0])] += 1;
    }
    let mut checked = 0;
    for i in 0..bins {
        for j in 0..i {
            let (a, b) = (flux[i][j] as f64, flux[j][i] as f64);
            if a + b >= 100.0 {
                checked += 1;
                assert!((a - b).abs() <= 4.5 * (a + b).sqrt(), "{i}->{j}: {a} vs {b}");
            }
        }
    }
    assert!(checked >= 20);
}

#[test]
fn stationary_start_stays_stationary() {
    let (spec, bx, lab) = tilted();
    let h = 0.25;
    let cfg = WalkConfig {
        n_steps: 200,
        n_chains: 100_000,
        record_every: 40,
        ..config(&spec, &bx, h, Start::Stationary)
    };
    let hist = StationaryHistogram::new(&spec, &bx, h, h / 10.0).unwrap();
    let pi = hist.well_fractions(&lab);
    let trace = simulate(&cfg, &lab).unwrap();
    assert_eq!(trace.steps.len(), 6);
    for k in 0..lab.pairs.len() {
        let sigma = (pi[k] * (1.0 - pi[k]) / cfg.n_chains as f64).sqrt();
        for f in trace.fractions(k) {
            assert!((f - pi[k]).abs() <= 4.0 * sigma, "well {k}: {f} vs {}", pi[k]);
        }
    }
}

#[test]
fn traces_do_not_depend_on_thread_count() {
    let (spec, bx, lab) = tilted();
    let cfg = WalkConfig {
        n_steps: 500,
        n_chains: 300,
        record_every: 10,
        ..config(&spec, &bx, 0.3, Start::Well(2))
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&cfg, &lab).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
    let exits = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mean_first_exit(&cfg, &lab).unwrap())
    };
    assert_eq!(exits(1), exits(4));
}

#[test]
fn relaxation_rate_matches_spectral_gap() {
    let (spec, bx, lab) = tilted();
    let h = 0.25;
    let grid = build_grid(&bx, 0.005).unwrap();
    let p = to_P(&assemble_walk(&spec, &grid, h).unwrap()).unwrap();
    let gap = smallest_eigs(&p, 3, 1e-10, 20_000).unwrap().eigenvalues[1];
    let cfg = WalkConfig {
        n_steps: (5.0 / gap) as u64,
        n_chains: 4000,
        record_every: 100,
        ..config(&spec, &bx, h, Start::Well(2))
    };
    let pi = StationaryHistogram::new(&spec, &bx, h, h / 10.0).unwrap().well_fractions(&lab);
    let trace = simulate(&cfg, &lab).unwrap();
    let est = empirical_gap(&trace, 1, pi[1], 1).unwrap();
    assert!(est.gap / gap > 0.5 && est.gap / gap < 2.0, "{est:?} vs {gap:e}");
    assert!(est.ci_low <= est.gap && est.gap <= est.ci_high);
}

#[test]
fn short_run_is_not_relaxed() {
    let (spec, bx, lab) = tilted();
    let cfg = WalkConfig {
        n_steps: 10,
        ..config(&spec, &bx, 0.1, Start::Well(2))
    };
    let trace = simulate(&cfg, &lab).unwrap();
    assert!(matches!(empirical_gap(&trace, 1, 1e-3, 0), Err(WalkError::NotRelaxed { .. })));
}

/// Well occupations of a two-state chain leaving well 0 with probability
/// `p` and returning with probability `q` per step.
fn two_state_trace(p: f64, q: f64, chains: usize, steps: u64, seed: u64) -> WalkTrace {
    let mut per_chain = Vec::with_capacity(chains);
    for c in 0..chains {
        let mut rng = chain_rng(seed, c);
        let mut s = 0u8;
        let mut w = vec![s];
        for _ in 0..steps {
            let u: f64 = rng.random();
            s = match s {
                0 if u < p => 1,
                1 if u < q => 0,
                x => x,
            };
            w.push(s);
        }
        per_chain.push(w);
    }
    let occupation = (0..=steps as usize)
        .map(|t| {
            let a = per_chain.iter().filter(|w| w[t] == 0).count() as u64;
            vec![a, chains as u64 - a]
        })
        .collect();
    WalkTrace {
        h: 0.5,
        n_chains: chains,
        n_wells: 2,
        record_every: 1,
        steps: (0..=steps).collect(),
        occupation,
        first_exit_steps: vec![None; chains],
        acceptance_rate: 1.0,
        proposals: 0,
        per_chain,
    }
}

#[test]
fn synthetic_two_state_rate_is_recovered() {
    let (p, q) = (0.015, 0.005);
    let trace = two_state_trace(p, q, 4000, 300, 17);
    let est = empirical_gap(&trace, 0, q / (p + q), 23).unwrap();
    assert!(est.ci_low <= p + q && p + q <= est.ci_high, "{est:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn occupation_rows_sum_to_chain_count(seed in any::<u64>(), chains in 1usize..40, every in 1u64..7) {
        let (spec, bx, lab) = tilted();
        let cfg = WalkConfig {
            n_steps: 60,
            n_chains: chains,
            record_every: every,
            seed,
            ..config(&spec, &bx, 0.35, Start::Point(vec![0.1]))
        };
        let trace = simulate(&cfg, &lab).unwrap();
        prop_assert_eq!(trace.steps.len() as u64, 60 / every + 1);
        for row in &trace.occupation {
            prop_assert_eq!(row.iter().sum::<u64>(), chains as u64);
        }
        for t in trace.first_exit_steps.iter().flatten() {
            prop_assert!(*t >= 1);
        }
        prop_assert!(trace.acceptance_rate > 0.0 && trace.acceptance_rate <= 1.0);
    }
}
