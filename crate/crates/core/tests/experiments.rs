use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::sync::Arc;

use statloc::bell::{enumerate_trajectories, trajectory_weight, ExperimentSpec, Vec3};
use statloc::experiments::{
    chsh_settings, run_chsh_scan, run_free_will_suite, run_locality_audit, run_no_signalling_suite, run_sampler_check,
    run_signalling_demo, CampaignReport, LocalityTarget, SignallingWeight, Tolerance, CSV_HEADER,
};
use statloc::ising::IsingModel;
use statloc::Error;

/// P(α = +) under δ(1 + λ α b_z)/4, summing the four label weights by hand.
fn signalling_label_oracle(lambda: f64, b: Vec3) -> f64 {
    let w = |alpha: f64| (1.0 + lambda * alpha * b.0[2]) / 4.0;
    let plus = 2.0 * w(1.0);
    let minus = 2.0 * w(-1.0);
    plus / (plus + minus)
}

fn observation(report: &CampaignReport, id: &str) -> f64 {
    report.observations.iter().find(|o| o.id == id).unwrap_or_else(|| panic!("no observation {id}")).value
}

fn settings_for(template: &ExperimentSpec, pairs: &[(Vec3, Vec3)]) -> Vec<ExperimentSpec> {
    pairs.iter().map(|&(a, b)| template.with_settings(a, b).unwrap()).collect()
}

fn angle_grid(n: usize) -> Vec<(Vec3, Vec3)> {
    (0..n).map(|k| (Vec3::from_angle(0.4 * k as f64), Vec3::from_angle(PI * k as f64 / n as f64))).collect()
}

#[test]
fn locality_audit_examples() {
    let ising = LocalityTarget::Ising(IsingModel::new(4, 4, 0.6).unwrap());
    let r = run_locality_audit(&ising, 100, 7).unwrap();
    assert_eq!(r.checks.len(), 100);
    assert!(r.passed());

    let bell = LocalityTarget::Bell(ExperimentSpec::minimal(Vec3::Z, Vec3::from_degrees(60.0), 0.01).unwrap());
    let r = run_locality_audit(&bell, 50, 7).unwrap();
    assert_eq!(r.checks.len(), 50);
    assert!(r.passed());

    let r = run_locality_audit(&ising, 0, 7).unwrap();
    assert!(r.checks.is_empty() && r.passed());
}

#[test]
fn locality_audit_on_large_ising_uses_weight_ratio() {
    let r = run_locality_audit(&LocalityTarget::Ising(IsingModel::new(10, 10, 0.44).unwrap()), 30, 3).unwrap();
    assert!(r.passed());
    assert!(observation(&r, "mean-closure-sites") > observation(&r, "mean-region-sites"));
}

#[test]
fn locality_audit_is_deterministic() {
    let target = LocalityTarget::Bell(ExperimentSpec::extent8(Vec3::Z, Vec3::X, 0.001).unwrap());
    let a = run_locality_audit(&target, 20, 99).unwrap();
    let b = run_locality_audit(&target, 20, 99).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn free_will_examples() {
    for template in [
        ExperimentSpec::minimal(Vec3::Z, Vec3::Z, 0.01).unwrap(),
        ExperimentSpec::extent8(Vec3::Z, Vec3::Z, 0.001).unwrap(),
    ] {
        let r = run_free_will_suite(&settings_for(&template, &chsh_settings(0.0)), 1).unwrap();
        assert!(r.passed(), "{}", r.summary());
        assert!(r.checks.iter().filter(|c| matches!(c.tolerance, Tolerance::AtMost(_))).all(|c| c.observed < 1e-12));
    }
    let one = settings_for(&ExperimentSpec::minimal(Vec3::Z, Vec3::Z, 0.01).unwrap(), &[(Vec3::Z, Vec3::X)]);
    assert!(run_free_will_suite(&one, 1).unwrap().passed());

    let mixed = vec![
        ExperimentSpec::minimal(Vec3::Z, Vec3::X, 0.01).unwrap(),
        ExperimentSpec::extent8(Vec3::Z, Vec3::X, 0.001).unwrap(),
    ];
    assert!(matches!(run_free_will_suite(&mixed, 1), Err(Error::Spec(_))));
}

#[test]
fn no_signalling_examples() {
    let template = ExperimentSpec::extent8(Vec3::Z, Vec3::Z, 0.001).unwrap();
    let r = run_no_signalling_suite(&settings_for(&template, &angle_grid(12))).unwrap();
    assert!(r.passed(), "{}", r.summary());
    let r = run_no_signalling_suite(&settings_for(&template, &[(Vec3::Z, Vec3::Z)])).unwrap();
    assert!(r.passed());

    let signalling = template.with_rule(Arc::new(SignallingWeight::new(0.5).unwrap()));
    let r = run_no_signalling_suite(&settings_for(&signalling, &[(Vec3::X, Vec3::Z), (Vec3::X, Vec3::X)])).unwrap();
    assert!(!r.passed());
    let alice = r.checks.iter().find(|c| c.observed > 0.7).expect("a shifted marginal");
    assert!((alice.observed - signalling_label_oracle(0.5, Vec3::Z)).abs() < 1e-12);
}

#[test]
fn signalling_oracle_agrees_with_brute_force() {
    let lambda = 0.5;
    for b in [Vec3::Z, Vec3::X, Vec3::from_degrees(40.0)] {
        let spec = ExperimentSpec::extent8(Vec3::X, b, 0.001)
            .unwrap()
            .with_rule(Arc::new(SignallingWeight::new(lambda).unwrap()));
        let (mut plus, mut total) = (0.0, 0.0);
        for c in enumerate_trajectories(&spec).unwrap() {
            let w = trajectory_weight(&c, &spec).unwrap();
            assert!(w >= 0.0);
            total += w;
            if c.alpha.value() > 0.0 {
                plus += w;
            }
        }
        assert!((plus / total - signalling_label_oracle(lambda, b)).abs() < 1e-12);
    }
    assert!((signalling_label_oracle(0.5, Vec3::Z) - 0.75).abs() < 1e-15);
    assert!((signalling_label_oracle(0.5, Vec3::X) - 0.5).abs() < 1e-15);
}

#[test]
fn signalling_demo_examples() {
    let template = ExperimentSpec::extent8(Vec3::Z, Vec3::Z, 0.001).unwrap();
    let pairs = [(Vec3::X, Vec3::Z), (Vec3::X, Vec3::X)];

    let r = run_signalling_demo(&template, 0.0, &pairs).unwrap();
    assert!(r.passed());
    assert!(observation(&r, "marginal-shift").abs() < 1e-12);

    let r = run_signalling_demo(&template, 0.5, &pairs).unwrap();
    assert!(r.passed(), "{}", r.summary());
    assert!((observation(&r, "left-plus-0") - 0.75).abs() < 1e-12);
    assert!((observation(&r, "left-plus-1") - 0.5).abs() < 1e-12);
    assert!((observation(&r, "marginal-shift") - 0.25).abs() < 1e-12);
    let success = observation(&r, "signal-success-probability");
    assert!(success > 0.5 && success < 1.0);

    for lambda in [1.0, 1.5, -0.1] {
        assert!(matches!(run_signalling_demo(&template, lambda, &pairs), Err(Error::Input(_))));
    }
}

#[test]
fn chsh_scan_examples() {
    let template = ExperimentSpec::extent8(Vec3::Z, Vec3::Z, 0.001).unwrap();
    let grid = [0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4, PI];
    let r = run_chsh_scan(&template, &grid).unwrap();
    assert!(r.passed(), "{}", r.summary());
    let expected = [-1.0, -SQRT_2 / 2.0, 0.0, SQRT_2 / 2.0, 1.0];
    for (check, e) in r.checks.iter().zip(expected) {
        assert!((check.observed - e).abs() < 1e-9, "{}", check.id);
    }
    for theta in grid {
        let s = observation(&r, &format!("S({:.4})", theta.to_degrees()));
        assert!((s.abs() - 2.0 * SQRT_2).abs() < 1e-9);
    }
    assert!(run_chsh_scan(&template, &[]).unwrap().checks.is_empty());
}

#[test]
fn report_serialization() {
    let template = ExperimentSpec::minimal(Vec3::Z, Vec3::Z, 0.01).unwrap();
    let r = run_chsh_scan(&template, &[0.0]).unwrap();
    let csv = r.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), r.checks.len() + r.observations.len());
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["campaign"], "chsh-scan");
    assert!(json.get("runtime").is_none());
    assert!(r.summary().contains("chsh-scan"));
}

#[test]
fn sampler_check_small_run() {
    let ising = IsingModel::new(2, 2, 0.5).unwrap();
    let run = run_sampler_check(&ising, 50_000, 4, 2).unwrap();
    assert!(run.report.passed(), "{}", run.report.summary());
    assert_eq!(run.stats.count(), 50_000);
    let again = run_sampler_check(&ising, 50_000, 4, 2).unwrap();
    assert_eq!(run.report.to_csv(), again.report.to_csv());

    let single = run_sampler_check(&ising, 1, 4, 1).unwrap();
    assert_eq!(single.stats.count(), 1);
    assert!(matches!(run_sampler_check(&ising, 0, 4, 1), Err(Error::Input(_))));
}
