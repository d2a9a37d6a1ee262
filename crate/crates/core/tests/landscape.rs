use ballwalk_core::discretize::build_grid;
use ballwalk_core::landscape::*;
use ballwalk_core::potential::*;
use proptest::prelude::*;

/// Real roots of `x³ − x + t/4`, ascending, by the trigonometric formula.
fn tilted_roots(tilt: f64) -> [f64; 3] {
    let (p, q) = (-1.0f64, tilt / 4.0);
    let r = 2.0 * (-p / 3.0).sqrt();
    let a = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).acos() / 3.0;
    let mut x = [0.0; 3];
    for (k, xk) in x.iter_mut().enumerate() {
        *xk = r * (a - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
    }
    x.sort_by(f64::total_cmp);
    x
}

fn tilted_box() -> AxisBox {
    AxisBox::symmetric(1, 2.0)
}

#[test]
fn scalar_examples() {
    let dw = PotentialSpec::double_well_tilted(0.3);
    assert_eq!(dw.eval(&[0.0]).unwrap(), 1.0);
    assert!((dw.eval(&[1.0]).unwrap() - 0.3).abs() < 1e-15);
    assert!((dw.grad(&[0.0]).unwrap()[0] - 0.3).abs() < 1e-15);
    assert!((dw.grad(&[1.0]).unwrap()[0] - 0.3).abs() < 1e-15);
    assert_eq!(dw.hessian(&[0.0]).unwrap().get(0, 0), -4.0);
    assert_eq!(dw.hessian(&[1.0]).unwrap().get(0, 0), 8.0);
    assert_eq!(PotentialSpec::poly1(&[(4, 1.0)]).eval(&[2.0]).unwrap(), 16.0);
    assert!(dw.eval(&[0.0, 1.0]).is_err());
}

#[test]
fn critical_points_match_cubic_roots() {
    let spec = PotentialSpec::double_well_tilted(0.3);
    let pts = find_critical_points(&spec, &tilted_box(), 0.02, 1e-11).unwrap();
    let roots = tilted_roots(0.3);
    assert_eq!(pts.len(), 3);
    let mut locs: Vec<f64> = pts.iter().map(|c| c.location[0]).collect();
    locs.sort_by(f64::total_cmp);
    for (a, b) in locs.iter().zip(&roots) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    assert_eq!(pts.iter().filter(|c| c.index == 0).count(), 2);
    assert_eq!(pts.iter().filter(|c| c.index == 1).count(), 1);
}

#[test]
fn tilted_labeling_against_oracle() {
    let spec = PotentialSpec::double_well_tilted(0.3);
    let lab = analyze_landscape(&spec, &tilted_box(), &LandscapeOptions::new(1e-3)).unwrap();
    let [left, saddle, right] = tilted_roots(0.3);
    assert_eq!((lab.n0, lab.n1), (2, 1));
    assert!((lab.pairs[0].minimum.location[0] - left).abs() < 1e-10);
    assert!(lab.pairs[0].saddle.is_none());
    assert_eq!(lab.pairs[0].arrhenius, Barrier::Infinite);
    assert!((lab.pairs[1].minimum.location[0] - right).abs() < 1e-10);
    let s2 = spec.value(&[saddle]) - spec.value(&[right]);
    assert!((lab.pairs[1].arrhenius.value() - s2).abs() < 1e-12);
    assert!((s2 - 0.7171355).abs() < 1e-6);
}

#[test]
fn tilted_persistence_event() {
    let spec = PotentialSpec::double_well_tilted(0.3);
    let dx = 1e-3;
    let grid = build_grid(&tilted_box(), dx).unwrap();
    let values = grid.sample(|x| spec.value(x));
    let pairing = persistence_sweep(&values, &grid);
    let [_, saddle, right] = tilted_roots(0.3);
    assert_eq!(pairing.events.len(), 1);
    let e = pairing.events[0];
    assert!((grid.point(e.merge_cell)[0] - saddle).abs() <= 2.0 * dx);
    let s2 = spec.value(&[saddle]) - spec.value(&[right]);
    assert!((e.persistence - s2).abs() < 1e-3);
}

#[test]
fn hypotheses_on_one_dimensional_examples() {
    let bx = tilted_box();
    for (spec, n0) in [
        (PotentialSpec::double_well_tilted(0.3), 2),
        (PotentialSpec::builtin(Builtin::SymmetricDoubleWell).unwrap(), 2),
        (PotentialSpec::poly1(&[(2, 1.0)]), 1),
    ] {
        let lab = analyze_landscape(&spec, &bx, &LandscapeOptions::new(2e-3)).unwrap();
        let rep = check_hypotheses(&spec, &bx, &lab, HypothesisTolerances::default());
        assert_eq!(lab.n0, n0);
        assert!(rep.morse_ok && rep.generic_ok, "{rep:?}");
    }
}

#[test]
fn quadratic_has_one_point_with_det_two() {
    let spec = PotentialSpec::poly1(&[(2, 1.0)]);
    let pts = find_critical_points(&spec, &tilted_box(), 0.02, 1e-11).unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0].index, 0);
    assert!(pts[0].location[0].abs() < 1e-12);
    assert!((pts[0].hessian_det - 2.0).abs() < 1e-12);
}

#[test]
fn three_well_labeling() {
    let spec = PotentialSpec::three_well();
    let bx = AxisBox::symmetric(2, 3.2);
    let opts = LandscapeOptions {
        cell_cap: 2_000_000,
        ..LandscapeOptions::new(5e-3)
    };
    let lab = analyze_landscape(&spec, &bx, &opts).unwrap();
    assert_eq!(lab.n0, 3);
    assert!(lab.n1 >= 2);
    let s: Vec<f64> = lab.pairs.iter().map(|p| p.arrhenius.value()).collect();
    assert!(s[0].is_infinite() && s[1] > s[2]);
    let rep = check_hypotheses(&spec, &bx, &lab, HypothesisTolerances::default());
    assert!(rep.all_ok(), "{rep:?}");
}

/// Pairs from persistence agree with exhaustive flood fill of each sublevel
/// set, and `S_k` agrees with the grid persistence.
fn oracle_equivalence(spec: &PotentialSpec, bx: &AxisBox, dx: f64) {
    let lab = analyze_landscape(spec, bx, &LandscapeOptions::new(dx)).unwrap();
    let grid = build_grid(bx, dx).unwrap();
    let values = grid.sample(|x| spec.value(x));
    let brute = brute_force_pairs(spec, &grid, &values, &lab.critical_points);
    let finite: Vec<_> = lab.pairs.iter().filter(|p| p.saddle.is_some()).collect();
    assert_eq!(brute.len(), finite.len());
    let lip = values
        .iter()
        .enumerate()
        .map(|(i, _)| spec.grad_norm(&grid.point(i)[..grid.dim()]))
        .fold(0.0, f64::max);
    for (p, (m, s, big_s)) in finite.iter().zip(&brute) {
        assert_eq!(p.minimum, lab.critical_points[*m]);
        assert_eq!(p.saddle.as_ref().unwrap(), &lab.critical_points[*s]);
        assert!((p.arrhenius.value() - big_s).abs() < 1e-12);
        assert!((p.persistence.unwrap() - big_s).abs() <= 5.0 * dx * lip);
    }
}

#[test]
fn persistence_matches_flood_fill_oracle_1d() {
    for spec in [
        PotentialSpec::double_well_tilted(0.3),
        PotentialSpec::builtin(Builtin::SymmetricDoubleWell).unwrap(),
    ] {
        oracle_equivalence(&spec, &tilted_box(), 2e-3);
    }
}

#[test]
fn persistence_matches_flood_fill_oracle_2d() {
    oracle_equivalence(&PotentialSpec::three_well(), &AxisBox::symmetric(2, 3.2), 0.015);
}

#[test]
fn refinement_keeps_pairing_structure() {
    let cases = [
        (PotentialSpec::double_well_tilted(0.3), tilted_box(), 4e-3),
        (PotentialSpec::three_well(), AxisBox::symmetric(2, 3.2), 0.015),
    ];
    for (spec, bx, dx) in cases {
        let opts = |dx| LandscapeOptions {
            cell_cap: 1_000_000,
            ..LandscapeOptions::new(dx)
        };
        let a = analyze_landscape(&spec, &bx, &opts(dx)).unwrap();
        let b = analyze_landscape(&spec, &bx, &opts(dx / 2.0)).unwrap();
        let key = |l: &LandscapeLabeling| {
            l.pairs
                .iter()
                .map(|p| (p.minimum.clone(), p.saddle.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&a), key(&b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relabeled_s_strictly_decreasing(tilt in 0.05f64..0.6) {
        let spec = PotentialSpec::double_well_tilted(tilt);
        let lab = analyze_landscape(&spec, &tilted_box(), &LandscapeOptions::new(4e-3)).unwrap();
        prop_assert_eq!(lab.pairs.len(), lab.n0);
        let s: Vec<f64> = lab.pairs.iter().map(|p| p.arrhenius.value()).collect();
        for w in s.windows(2) {
            prop_assert!(w[0] > w[1]);
        }
        for (k, p) in lab.pairs.iter().enumerate().skip(1) {
            let mask = lab.well_mask(k);
            let inside_min = (0..mask.len()).filter(|&i| mask[i]).map(|i| lab.values[i]).fold(f64::INFINITY, f64::min);
            prop_assert!(inside_min >= p.minimum.value - 1e-12);
            prop_assert!(mask[lab.grid.nearest_cell(&p.minimum.location)]);
        }
    }

    #[test]
    fn sweep_conserves_components(values in proptest::collection::vec(-10.0f64..10.0, 2..200)) {
        let pairing = persistence_sweep(&values, &Path(values.len()));
        let local_minima = (0..values.len())
            .filter(|&i| {
                (i == 0 || key_less(&values, i, i - 1)) && (i + 1 == values.len() || key_less(&values, i, i + 1))
            })
            .count();
        prop_assert_eq!(pairing.events.len() + 1, local_minima);
        for e in &pairing.events {
            prop_assert!(e.merge_value > e.birth_value);
            prop_assert!(e.birth_value >= pairing.survivor_value);
        }
        for w in pairing.events.windows(2) {
            prop_assert!(w[0].persistence >= w[1].persistence);
        }
    }

    #[test]
    fn derivatives_match_central_differences(x in -1.95f64..1.95, y in -3.1f64..3.1, tilt in -0.5f64..0.5) {
        let h = 1e-5;
        let one = PotentialSpec::double_well_tilted(tilt);
        let fd = (one.value(&[x + h]) - one.value(&[x - h])) / (2.0 * h);
        let g = one.grad(&[x]).unwrap()[0];
        prop_assert!((g - fd).abs() <= 1e-6 * (1.0 + g.abs()));
        let two = PotentialSpec::three_well();
        let p = [x, y];
        let g = two.grad(&p).unwrap();
        let hs = two.hessian(&p).unwrap();
        prop_assert!(hs.is_symmetric());
        for a in 0..2 {
            let mut up = p;
            let mut dn = p;
            up[a] += h;
            dn[a] -= h;
            let fd = (two.value(&up) - two.value(&dn)) / (2.0 * h);
            prop_assert!((g[a] - fd).abs() <= 1e-6 * (1.0 + g[a].abs()));
            let gu = two.grad(&up).unwrap();
            let gd = two.grad(&dn).unwrap();
            for b in 0..2 {
                let fd = (gu[b] - gd[b]) / (2.0 * h);
                prop_assert!((hs.get(a, b) - fd).abs() <= 1e-6 * (1.0 + hs.get(a, b).abs()));
            }
        }
    }
}
