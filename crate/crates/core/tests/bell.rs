use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI, SQRT_2};

use proptest::prelude::*;

use statloc::bell::{
    annihilation_weight, chsh, configuration_probabilities, correlation, count_pairings, enumerate_geometries,
    enumerate_pairings, enumerate_trajectories, enumerate_trajectories_with_cap, factorization_defect,
    outcome_distribution, pre_measurement_distribution, pre_measurement_view, survival_probability, trajectory_weight,
    Emitter, ExperimentSpec, JointDistribution, Sign, SpecFile, SpecWarning, Step, TrajectoryConfig,
    TrajectoryFactorModel, Vec3, Vertex,
};
use statloc::weight::stable_sum;
use statloc::Error;

const SIGNS: [Sign; 2] = [Sign::Plus, Sign::Minus];

/// Every move string of a photon, as plain characters, that starts with
/// `first`, stays inside `u, w >= 0, u + w <= extent` and touches the line
/// `x = detector` at some vertex. Written without the crate's lattice types.
fn oracle_paths(extent: i32, start: (i32, i32), first: char, detector: i32) -> Vec<String> {
    fn grow(extent: i32, u: i32, w: i32, hit: bool, detector: i32, moves: &mut String, out: &mut Vec<String>) {
        if hit {
            out.push(moves.clone());
        }
        for c in ['L', 'R'] {
            let (nu, nw) = if c == 'R' { (u + 1, w) } else { (u, w + 1) };
            if nu + nw <= extent {
                moves.push(c);
                grow(extent, nu, nw, hit || nu - nw == detector, detector, moves, out);
                moves.pop();
            }
        }
    }
    let (u, w) = if first == 'R' { (start.0 + 1, start.1) } else { (start.0, start.1 + 1) };
    let mut out = Vec::new();
    if u + w <= extent {
        let mut moves = first.to_string();
        grow(extent, u, w, u - w == detector, detector, &mut moves, &mut out);
    }
    out
}

fn oracle_end(start: (i32, i32), moves: &str) -> (i32, i32) {
    moves.chars().fold(start, |(u, w), c| if c == 'R' { (u + 1, w) } else { (u, w + 1) })
}

/// Geometry pairs meeting head-on, found by checking every pair of paths.
fn oracle_geometries(extent: i32, dl: i32, dr: i32) -> Vec<(String, String)> {
    let lefts = oracle_paths(extent, (0, 0), 'L', dl);
    let rights = oracle_paths(extent, (0, 0), 'R', dr);
    let mut out = Vec::new();
    for l in &lefts {
        for r in &rights {
            if oracle_end((0, 0), l) == oracle_end((0, 0), r) && l.chars().last() != r.chars().last() {
                out.push((l.clone(), r.clone()));
            }
        }
    }
    out.sort();
    out
}

fn oracle_weight(moves: &str, eps: f64) -> f64 {
    let b = moves.as_bytes();
    b.windows(2).map(|w| if w[0] == w[1] { 1.0 - eps } else { eps }).product()
}

/// Prefix up to and including the first step onto the detector line.
fn oracle_prefix(moves: &str, detector: i32) -> String {
    let (mut u, mut w) = (0, 0);
    for (k, c) in moves.chars().enumerate() {
        if c == 'R' {
            u += 1
        } else {
            w += 1
        }
        if u - w == detector {
            return moves.chars().take(k + 1).collect();
        }
    }
    panic!("path misses its detector")
}

fn moves(config: &TrajectoryConfig) -> (String, String) {
    (config.left.move_string(), config.right.move_string())
}

fn settings_grid(n: usize) -> Vec<(Vec3, Vec3)> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            let a = Vec3::new(t.sin() * 0.6, 0.8 * t.sin(), t.cos()).unit().unwrap();
            (a, Vec3::from_angle(0.3 + 1.7 * t))
        })
        .collect()
}

#[test]
fn minimal_lattice_has_four_configurations() {
    let spec = ExperimentSpec::minimal(Vec3::Z, Vec3::X, 0.01).unwrap();
    let configs = enumerate_trajectories(&spec).unwrap();
    assert_eq!(configs.len(), 4);
    let text: String = configs.iter().map(|c| format!("{c}\n")).collect();
    assert_eq!(text, include_str!("golden/minimal_enumeration.txt"));
    for c in &configs {
        assert_eq!(c.to_string().parse::<TrajectoryConfig>().unwrap(), *c);
    }
}

#[test]
fn extent8_count_matches_brute_force_oracle() {
    for (dl, dr) in [(-2, 2), (-1, 1), (-3, 2), (-1, 4)] {
        let spec = ExperimentSpec::new(8, dl, dr, Vec3::Z, Vec3::X, 0.001).unwrap();
        let oracle = oracle_geometries(8, dl, dr);
        let geoms = enumerate_geometries(&spec).unwrap();
        let ours: Vec<(String, String)> = geoms.iter().map(|g| (g.left.move_string(), g.right.move_string())).collect();
        assert_eq!(ours, oracle, "detectors {dl},{dr}");
        assert_eq!(count_pairings(spec.lattice(), &spec.left_emitter(), &spec.right_emitter()), oracle.len() as u128);
        let configs = enumerate_trajectories(&spec).unwrap();
        assert_eq!(configs.len(), 4 * oracle.len());
        let distinct: BTreeSet<_> = configs.iter().collect();
        assert_eq!(distinct.len(), configs.len());
    }
    assert_eq!(oracle_geometries(8, -2, 2).len(), 645);
}

#[test]
fn detector_outside_future_cone_is_a_spec_error() {
    for (extent, dl, dr) in [(4, -5, 2), (4, -1, 5), (4, 1, 2), (4, -2, -1), (4, 0, 2)] {
        let err = ExperimentSpec::new(extent, dl, dr, Vec3::Z, Vec3::X, 0.01).unwrap_err();
        assert!(matches!(err, Error::Spec(_)), "{extent} {dl} {dr}: {err:?}");
    }
    // detectors reachable, but the photons can never meet again in time
    let spec = ExperimentSpec::new(2, -2, 2, Vec3::Z, Vec3::X, 0.01).unwrap();
    assert!(enumerate_trajectories(&spec).unwrap().is_empty());
    assert!(matches!(outcome_distribution(&spec), Err(Error::Degenerate(_))));
}

#[test]
fn enumeration_cap_is_enforced() {
    let spec = ExperimentSpec::extent8(Vec3::Z, Vec3::X, 0.001).unwrap();
    match enumerate_trajectories_with_cap(&spec, 100) {
        Err(Error::Capacity { count, cap }) => {
            assert_eq!(count, 4 * 645);
            assert_eq!(cap, 100);
        }
        other => panic!("expected capacity error, got {other:?}"),
    }
}

#[test]
fn weight_matches_hand_vertex_count() {
    // extent 4, detectors at x = ±2: the only geometry is LLRR / RRLL,
    // meeting at (2,2). Each path has interior vertices straight, switch,
    // straight, so m = 4 straight and k = 2 switch vertices in total.
    let eps = 0.03;
    let a = Vec3::from_degrees(20.0);
    let b = Vec3::from_degrees(110.0);
    let spec = ExperimentSpec::new(4, -2, 2, a, b, eps).unwrap();
    let configs = enumerate_trajectories(&spec).unwrap();
    assert_eq!(configs.len(), 4);
    for c in &configs {
        assert_eq!(moves(c), ("LLRR".to_string(), "RRLL".to_string()));
        assert_eq!(c.left.end(), Vertex::new(2, 2));
        let ab = (c.alpha.value() * a).dot(c.beta.value() * b);
        let expected = (1.0 - eps).powi(4) * eps.powi(2) * (1.0 - ab) / 2.0;
        assert!((trajectory_weight(c, &spec).unwrap() - expected).abs() < 1e-15);
    }
    // minimal lattice: one interior vertex per path, each a switch
    let spec = ExperimentSpec::minimal(a, b, eps).unwrap();
    for c in enumerate_trajectories(&spec).unwrap() {
        let ab = (c.alpha.value() * a).dot(c.beta.value() * b);
        assert!((trajectory_weight(&c, &spec).unwrap() - eps * eps * (1.0 - ab) / 2.0).abs() < 1e-15);
    }
}

#[test]
fn parallel_settings_equal_results_weigh_zero() {
    let spec = ExperimentSpec::extent8(Vec3::Z, Vec3::Z, 0.001).unwrap();
    for c in enumerate_trajectories(&spec).unwrap() {
        let w = trajectory_weight(&c, &spec).unwrap();
        if c.alpha == c.beta {
            assert_eq!(w, 0.0);
        } else {
            assert!(w > 0.0);
        }
    }
}

#[test]
fn mismatched_pair_labels_weigh_zero() {
    let spec = ExperimentSpec::minimal(Vec3::Z, Vec3::X, 0.01).unwrap();
    for mut c in enumerate_trajectories(&spec).unwrap() {
        c.right.pair = 1;
        assert_eq!(annihilation_weight(&c, &spec), 0.0);
    }
}

#[test]
fn weight_matches_oracle_on_extent8() {
    let eps = 0.002;
    let raw = Vec3::new(0.2, -0.4, 0.5);
    let (a, b) = (Vec3::from_degrees(33.0), (1.0 / raw.norm()) * raw);
    let spec = ExperimentSpec::extent8(a, b, eps).unwrap();
    for c in enumerate_trajectories(&spec).unwrap() {
        let (l, r) = moves(&c);
        let ab = (c.alpha.value() * a).dot(c.beta.value() * b);
        let expected = oracle_weight(&l, eps) * oracle_weight(&r, eps) * (1.0 - ab) / 2.0;
        let got = trajectory_weight(&c, &spec).unwrap();
        assert!((got - expected).abs() <= 1e-15 * expected.max(1e-300) + 1e-300, "{c}: {got} vs {expected}");
    }
}

#[test]
fn inadmissible_configurations_weigh_zero() {
    let spec = ExperimentSpec::extent8(Vec3::Z, Vec3::X, 0.01).unwrap();
    // paths never meet
    let c: TrajectoryConfig = "LL RR i=0 j=0 a=+ b=-".parse().unwrap();
    assert_eq!(trajectory_weight(&c, &spec).unwrap(), 0.0);
    // left photon misses its detector at x = -2
    let c: TrajectoryConfig = "LRRL RLRL i=0 j=0 a=+ b=-".parse().unwrap();
    assert_eq!(trajectory_weight(&c, &spec).unwrap(), 0.0);
    // same vertex, same incoming edge
    let c: TrajectoryConfig = "LLRRR RRLLR i=0 j=0 a=+ b=-".parse().unwrap();
    assert_eq!(trajectory_weight(&c, &spec).unwrap(), 0.0);
    // leaves the lattice
    let c: TrajectoryConfig = "LLLLLRRRRR RRRRRLLLLL i=0 j=0 a=+ b=-".parse().unwrap();
    assert_eq!(trajectory_weight(&c, &spec).unwrap(), 0.0);
}

#[test]
fn outcome_examples() {
    let spec = ExperimentSpec::extent8(Vec3::Z, Vec3::X, 0.001).unwrap();
    let d = outcome_distribution(&spec).unwrap();
    for (a, b) in
        [(Sign::Plus, Sign::Plus), (Sign::Plus, Sign::Minus), (Sign::Minus, Sign::Plus), (Sign::Minus, Sign::Minus)]
    {
        assert!((d.get(a, b) - 0.25).abs() < 1e-12);
    }
    let d = outcome_distribution(&spec.with_settings(Vec3::X, Vec3::X).unwrap()).unwrap();
    assert_eq!(d.get(Sign::Plus, Sign::Plus), 0.0);
    assert_eq!(d.get(Sign::Minus, Sign::Minus), 0.0);
    assert!((d.get(Sign::Plus, Sign::Minus) - 0.5).abs() < 1e-12);

    let spec = spec.with_settings(Vec3::from_angle(0.0), Vec3::from_angle(FRAC_PI_3)).unwrap();
    // brute-force label sum, independent of outcome_distribution
    let mut w = [[0.0; 2]; 2];
    for c in enumerate_trajectories(&spec).unwrap() {
        w[c.alpha.index()][c.beta.index()] += trajectory_weight(&c, &spec).unwrap();
    }
    let z: f64 = w.iter().flatten().sum();
    assert!((w[0][0] / z - 0.125).abs() < 1e-12);
    assert!((outcome_distribution(&spec).unwrap().get(Sign::Plus, Sign::Plus) - 0.125).abs() < 1e-12);
}

#[test]
fn degenerate_spec_is_reported() {
    // every annihilation weight is zero when the rule cannot fire
    let spec = ExperimentSpec::minimal(Vec3::Z, Vec3::Z, 0.01).unwrap().with_source(Vertex::ORIGIN, 0).unwrap();
    let rule = statloc::experiments::SignallingWeight::new(0.0).unwrap();
    assert!(outcome_distribution(&spec.with_rule(std::sync::Arc::new(rule))).is_ok());
    #[derive(Debug)]
    struct Never;
    impl statloc::bell::AnnihilationWeight for Never {
        fn weight(&self, _: &statloc::bell::AnnihilationEvent) -> f64 {
            0.0
        }
        fn name(&self) -> String {
            "never".into()
        }
    }
    let err = outcome_distribution(&spec.with_rule(std::sync::Arc::new(Never))).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)));
}

#[test]
fn correlation_examples() {
    let spec = ExperimentSpec::extent8(Vec3::Z, Vec3::Z, 0.001).unwrap();
    let e = |t: f64| correlation(&spec.with_settings(Vec3::from_angle(0.0), Vec3::from_angle(t)).unwrap()).unwrap();
    assert!((e(0.0) + 1.0).abs() < 1e-12);
    assert!(e(FRAC_PI_2).abs() < 1e-12);
    assert!((e(FRAC_PI_4) + SQRT_2 / 2.0).abs() < 1e-12);
}

#[test]
fn chsh_examples() {
    let spec = ExperimentSpec::extent8(Vec3::Z, Vec3::Z, 0.001).unwrap();
    let d = Vec3::from_degrees;
    let s = chsh(&spec, d(0.0), d(90.0), d(45.0), d(135.0)).unwrap();
    assert!((s.abs() - 2.0 * SQRT_2).abs() < 1e-9);
    let a = d(10.0);
    assert!((chsh(&spec, a, a, a, a).unwrap() + 2.0).abs() < 1e-12);
    // a = b, a' = b', a ⊥ b': E(a,b) = E(a',b') = -1, E(a,b') = 0, E(a',b) = 0
    let s = chsh(&spec, d(0.0), d(90.0), d(0.0), d(90.0)).unwrap();
    assert!((s.abs() - 2.0).abs() < 1e-12);
}

#[test]
fn singlet_law_and_factorization_on_grid() {
    for template in [
        ExperimentSpec::minimal(Vec3::Z, Vec3::Z, 0.001).unwrap(),
        ExperimentSpec::extent8(Vec3::Z, Vec3::Z, 0.001).unwrap(),
    ] {
        for (a, b) in settings_grid(12) {
            let spec = template.with_settings(a, b).unwrap();
            let d = outcome_distribution(&spec).unwrap();
            assert!(d.max_abs_diff(&JointDistribution::singlet(a, b)) < 1e-12);
            assert!(factorization_defect(&spec).unwrap() < 1e-12);
        }
    }
}

#[test]
fn survival_examples() {
    assert_eq!(survival_probability(0.5, 1).unwrap(), 0.5);
    assert_eq!(survival_probability(0.3, 0).unwrap(), 1.0);
    assert!(survival_probability(1e-6, 1000).unwrap() >= 0.999);
    for eps in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
        assert!(matches!(survival_probability(eps, 3), Err(Error::Input(_))));
    }
}

#[test]
fn low_survival_warning_threshold() {
    // extent8 longest source-to-detector path is 8 links
    let at = |eps: f64| ExperimentSpec::extent8(Vec3::Z, Vec3::X, eps).unwrap().warnings();
    let boundary = 1.0 - 0.99f64.powf(1.0 / 8.0);
    assert!(at(boundary * 0.999).is_empty());
    assert!(matches!(at(boundary * 1.001).as_slice(), [SpecWarning::LowSurvival { links: 8, .. }]));
    let spec = ExperimentSpec::extent8(Vec3::Z, Vec3::X, 0.001).unwrap();
    assert!(spec.warnings().is_empty());
    assert_eq!(spec.with_link_budget(Some(1000)).warnings().len(), 1);
}

#[test]
fn pre_measurement_records_ignore_labels() {
    let spec = ExperimentSpec::minimal(Vec3::Z, Vec3::X, 0.01).unwrap();
    let records: BTreeSet<String> = enumerate_trajectories(&spec)
        .unwrap()
        .iter()
        .map(|c| pre_measurement_view(c, &spec).unwrap().to_string())
        .collect();
    assert_eq!(records.into_iter().collect::<Vec<_>>(), vec!["L R i=0 j=0".to_string()]);

    // same pre-measurement prefix, different switch pattern afterwards
    let spec = ExperimentSpec::extent8(Vec3::Z, Vec3::X, 0.01).unwrap();
    let a: TrajectoryConfig = "LLRRRR RRRRLL i=0 j=0 a=+ b=-".parse().unwrap();
    let b: TrajectoryConfig = "LLRLRR RRLRLL i=0 j=0 a=- b=+".parse().unwrap();
    assert!(trajectory_weight(&a, &spec).unwrap() > 0.0);
    assert!(trajectory_weight(&b, &spec).unwrap() > 0.0);
    assert_eq!(pre_measurement_view(&a, &spec).unwrap(), pre_measurement_view(&b, &spec).unwrap());
}

#[test]
fn pre_measurement_distribution_matches_path_pair_oracle() {
    let eps = 0.003;
    let spec = ExperimentSpec::extent8(Vec3::from_degrees(17.0), Vec3::from_degrees(71.0), eps).unwrap();
    let mut oracle: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (l, r) in oracle_geometries(8, -2, 2) {
        let w = oracle_weight(&l, eps) * oracle_weight(&r, eps);
        *oracle.entry((oracle_prefix(&l, -2), oracle_prefix(&r, 2))).or_default() += w;
    }
    let z: f64 = oracle.values().sum();
    let ours = pre_measurement_distribution(&spec).unwrap();
    assert_eq!(ours.len(), oracle.len());
    for (rec, p) in &ours {
        let key = (rec.left.move_string(), rec.right.move_string());
        assert!((p - oracle[&key] / z).abs() < 1e-12, "{rec}");
    }
}

#[test]
fn free_will_across_chsh_settings() {
    let template = ExperimentSpec::extent8(Vec3::Z, Vec3::Z, 0.001).unwrap();
    let dists: Vec<_> = statloc::experiments::chsh_settings(0.0)
        .iter()
        .map(|&(a, b)| pre_measurement_distribution(&template.with_settings(a, b).unwrap()).unwrap())
        .collect();
    for d in &dists[1..] {
        assert_eq!(d.len(), dists[0].len());
        for (k, p) in d {
            assert!((p - dists[0][k]).abs() < 1e-12);
        }
    }
}

#[test]
fn no_signalling_on_grid() {
    let template = ExperimentSpec::extent8(Vec3::Z, Vec3::Z, 0.001).unwrap();
    for (a, b) in settings_grid(12).into_iter().chain([(Vec3::Z, Vec3::Z)]) {
        let d = outcome_distribution(&template.with_settings(a, b).unwrap()).unwrap();
        for s in SIGNS {
            assert!((d.marginal_left(s) - 0.5).abs() < 1e-12);
            assert!((d.marginal_right(s) - 0.5).abs() < 1e-12);
        }
    }
}

#[test]
fn normalization_over_configurations() {
    let spec = ExperimentSpec::extent8(Vec3::from_degrees(5.0), Vec3::from_degrees(95.0), 0.001).unwrap();
    let probs = configuration_probabilities(&spec).unwrap();
    assert!(probs.iter().all(|(_, p)| *p >= 0.0));
    assert!((stable_sum(probs.iter().map(|(_, p)| p)) - 1.0).abs() < 1e-12);
}

#[test]
fn positive_configurations_annihilate_exactly_once() {
    let spec = ExperimentSpec::extent8(Vec3::from_degrees(5.0), Vec3::from_degrees(95.0), 0.001).unwrap();
    let tfm = TrajectoryFactorModel::new(&spec);
    for (c, p) in configuration_probabilities(&spec).unwrap() {
        if p == 0.0 {
            continue;
        }
        let shared: Vec<Vertex> = c.left.vertices().iter().filter(|v| **v == c.right.end()).copied().collect();
        assert_eq!(shared, vec![c.left.end()]);
        let encoded = tfm.encode(&c).unwrap();
        assert_eq!(tfm.annihilation_vertices(&encoded), vec![c.left.end()]);
        assert_eq!(tfm.decode(&encoded).as_ref(), Some(&c));
    }
}

#[test]
fn cross_pair_annihilations_weigh_zero_in_two_source_scene() {
    // Two sources at (0,1) and (1,0). The left-wing photon of pair 0 and the
    // right-wing photon of pair 1 can meet, but the rule must forbid it.
    let spec = ExperimentSpec::new(8, -3, 3, Vec3::from_degrees(30.0), Vec3::from_degrees(100.0), 0.001).unwrap();
    let left = Emitter { start: Vertex::new(0, 1), first_step: Step::L, detector_x: -3, pair: 0 };
    let right = Emitter { start: Vertex::new(1, 0), first_step: Step::R, detector_x: 3, pair: 1 };
    let geoms = enumerate_pairings(spec.lattice(), &left, &right, 1 << 20).unwrap();
    assert!(!geoms.is_empty());

    // oracle count for the shifted sources
    let lp = oracle_paths(8, (0, 1), 'L', -3);
    let rp = oracle_paths(8, (1, 0), 'R', 3);
    let oracle = lp
        .iter()
        .flat_map(|l| rp.iter().map(move |r| (l, r)))
        .filter(|(l, r)| oracle_end((0, 1), l) == oracle_end((1, 0), r) && l.chars().last() != r.chars().last())
        .count();
    assert_eq!(geoms.len(), oracle);

    let mut same_pair_positive = 0;
    for g in &geoms {
        for alpha in SIGNS {
            for beta in SIGNS {
                let mut c = g.with_labels(alpha, beta);
                assert_eq!(annihilation_weight(&c, &spec), 0.0, "{c}");
                c.right.pair = 0;
                if annihilation_weight(&c, &spec) > 0.0 {
                    same_pair_positive += 1;
                }
            }
        }
    }
    assert!(same_pair_positive > 0);
}

#[test]
fn spec_file_round_trip() {
    let text = "extent = 8\ndetectors = [-2, 2]\na_meas = [0.0, 0.0, 1.0]\nb_meas = [1.0, 0.0, 0.0]\nepsilon = 0.001\n";
    let file = SpecFile::parse(text).unwrap();
    let spec = file.build().unwrap();
    assert!(spec.same_geometry(&ExperimentSpec::extent8(Vec3::Z, Vec3::X, 0.001).unwrap()));
    assert_eq!(spec.rule().name(), "canonical");
    let again = SpecFile::parse(&SpecFile::from_spec(&spec, None).to_toml()).unwrap();
    assert_eq!(again, file);
    assert!(matches!(SpecFile::parse("extent = 8\nbogus = 1\n"), Err(Error::Parse(_))));
    let bad = "extent = 3\ndetectors = [-5, 2]\na_meas = [0.0, 0.0, 1.0]\nb_meas = [1.0, 0.0, 0.0]\nepsilon = 0.001\n";
    assert!(matches!(SpecFile::parse(bad).unwrap().build(), Err(Error::Spec(_))));
}

fn unit_vector() -> impl Strategy<Value = Vec3> {
    (0.0..PI, 0.0..2.0 * PI).prop_map(|(t, p)| Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn singlet_law_for_random_settings(a in unit_vector(), b in unit_vector(), eps in 0.0001f64..0.3) {
        let spec = ExperimentSpec::new(6, -1, 2, a, b, eps).unwrap();
        let d = outcome_distribution(&spec).unwrap();
        prop_assert!(d.max_abs_diff(&JointDistribution::singlet(a, b)) < 1e-12);
        prop_assert!((d.correlation() + a.dot(b)).abs() < 1e-12);
        for s in SIGNS {
            prop_assert!((d.marginal_left(s) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn free_will_for_random_settings(a in unit_vector(), b in unit_vector(), a2 in unit_vector(), b2 in unit_vector()) {
        let spec = ExperimentSpec::new(6, -2, 1, a, b, 0.01).unwrap();
        let p = pre_measurement_distribution(&spec).unwrap();
        let q = pre_measurement_distribution(&spec.with_settings(a2, b2).unwrap()).unwrap();
        prop_assert_eq!(p.len(), q.len());
        for (k, x) in &p {
            prop_assert!((x - q[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn encoded_local_ratio_matches_global(i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>(), a in unit_vector()) {
        let spec = ExperimentSpec::new(6, -1, 1, a, Vec3::X, 0.02).unwrap();
        let probs: Vec<_> = configuration_probabilities(&spec).unwrap().into_iter().filter(|(_, p)| *p > 0.0).collect();
        let tfm = TrajectoryFactorModel::new(&spec);
        let (ca, pa) = &probs[i.index(probs.len())];
        let (cb, pb) = &probs[j.index(probs.len())];
        let r = tfm.model().local_ratio(&tfm.encode(ca).unwrap(), &tfm.encode(cb).unwrap()).unwrap();
        prop_assert!((r / (pa / pb) - 1.0).abs() < 1e-12);
    }
}
