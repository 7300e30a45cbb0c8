use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::bell::{
    configuration_probabilities, correlation, outcome_distribution, pre_measurement_distribution, ExperimentSpec, Sign,
    TrajectoryFactorModel, Vec3,
};
use crate::error::{Error, Result};
use crate::ising::{IsingModel, SampleStats, SpinConfig};
use crate::rng::stream_rng;
use crate::weight::{run_parallel_chains, stable_sum, total_variation, Configuration, Region, SingleSiteFlip};

use super::report::{CampaignReport, Tolerance};
use super::signalling::SignallingWeight;

/// Tolerance for equalities that exact enumeration should hit to rounding.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for values that pass through trig and dot products.
pub const TRIG_TOL: f64 = 1e-9;
/// Largest total-variation distance accepted from a 10^6-sample chain.
pub const SAMPLER_TV_TOL: f64 = 0.01;

/// Which model a locality audit runs on.
#[derive(Debug, Clone)]
pub enum LocalityTarget {
    Ising(IsingModel),
    Bell(ExperimentSpec),
}

/// Largest side of the random rectangular regions used on the Ising lattice.
const ISING_REGION_SIDE: usize = 2;
/// Candidate partners drawn per Bell trial; the closest one is kept.
const BELL_CANDIDATES: usize = 16;

/// Draws `trials` pairs of configurations that differ on a small region and
/// compares the local ratio (factors touching the region only) against the
/// ratio of globally normalized probabilities.
pub fn run_locality_audit(target: &LocalityTarget, trials: usize, seed: u64) -> Result<CampaignReport> {
    let started = Instant::now();
    let mut report = CampaignReport::new(
        match target {
            LocalityTarget::Ising(_) => "locality-ising",
            LocalityTarget::Bell(_) => "locality-bell",
        },
        Some(seed),
    );
    if trials == 0 {
        return Ok(report);
    }
    let mut rng = stream_rng(seed, 0);
    let mut region_sizes = 0usize;
    let mut closure_sizes = 0usize;
    let total_factors;
    match target {
        LocalityTarget::Ising(ising) => {
            let model = ising.as_factor_model();
            total_factors = model.factors().len();
            let probs = ising.exact_distribution().ok();
            let n = ising.num_sites();
            for t in 0..trials {
                let a: Vec<i32> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
                let rw = rng.gen_range(1..=ISING_REGION_SIDE.min(ising.width()));
                let rh = rng.gen_range(1..=ISING_REGION_SIDE.min(ising.height()));
                let x0 = rng.gen_range(0..=ising.width() - rw);
                let y0 = rng.gen_range(0..=ising.height() - rh);
                let sites: Vec<usize> = (y0..y0 + rh)
                    .flat_map(|y| (x0..x0 + rw).map(move |x| (x, y)))
                    .map(|(x, y)| ising.site(x, y))
                    .collect();
                let mut b = a.clone();
                for &s in &sites {
                    b[s] = if rng.gen::<bool>() { 1 } else { -1 };
                }
                if a == b {
                    let s = *sites.choose(&mut rng).expect("regions are nonempty");
                    b[s] = -b[s];
                }
                let (ca, cb) = (Configuration::new(a), Configuration::new(b));
                let region = Region::between(&ca, &cb);
                region_sizes += region.sites().len();
                closure_sizes += region.closure(&model).len();
                let local = model.local_ratio(&ca, &cb)?;
                let global = match &probs {
                    Some(d) => {
                        let pa = d.probability(&SpinConfig::from_configuration(&ca)?);
                        let pb = d.probability(&SpinConfig::from_configuration(&cb)?);
                        pa / pb
                    }
                    None => model.config_weight(&ca)? / model.config_weight(&cb)?,
                };
                report.check(format!("trial-{t:04}"), global, local, Tolerance::Relative(EXACT_TOL));
            }
        }
        LocalityTarget::Bell(spec) => {
            let tfm = TrajectoryFactorModel::new(spec);
            let model = tfm.model();
            total_factors = model.factors().len();
            let positive: Vec<_> = configuration_probabilities(spec)?.into_iter().filter(|(_, p)| *p > 0.0).collect();
            let encoded: Vec<Configuration> = positive.iter().map(|(c, _)| tfm.encode(c)).collect::<Result<_>>()?;
            for t in 0..trials {
                let ia = rng.gen_range(0..positive.len());
                let mut ib = ia;
                let mut best = usize::MAX;
                if positive.len() > 1 {
                    for _ in 0..BELL_CANDIDATES {
                        let k = rng.gen_range(0..positive.len() - 1);
                        let k = if k >= ia { k + 1 } else { k };
                        let d = encoded[ia].differing_sites(&encoded[k]).len();
                        if d < best {
                            best = d;
                            ib = k;
                        }
                    }
                }
                let region = Region::between(&encoded[ia], &encoded[ib]);
                region_sizes += region.sites().len();
                closure_sizes += region.closure(model).len();
                let local = model.local_ratio(&encoded[ia], &encoded[ib])?;
                let global = positive[ia].1 / positive[ib].1;
                report.check(format!("trial-{t:04}"), global, local, Tolerance::Relative(EXACT_TOL));
            }
        }
    }
    report.observe("mean-region-sites", region_sizes as f64 / trials as f64);
    report.observe("mean-closure-sites", closure_sizes as f64 / trials as f64);
    report.observe("model-factors", total_factors as f64);
    report.runtime = started.elapsed();
    Ok(report)
}

/// Exact pre-measurement record distributions for each spec, compared
/// pairwise. Every spec must share the template's geometry.
pub fn run_free_will_suite(specs: &[ExperimentSpec], seed: u64) -> Result<CampaignReport> {
    let started = Instant::now();
    let mut report = CampaignReport::new("free-will", Some(seed));
    if let Some(first) = specs.first() {
        if let Some(bad) = specs.iter().position(|s| !s.same_geometry(first)) {
            return Err(Error::Spec(format!("settings entry {bad} does not share the template geometry")));
        }
    }
    let dists: Vec<BTreeMap<_, f64>> = specs.par_iter().map(pre_measurement_distribution).collect::<Result<_>>()?;
    for (k, d) in dists.iter().enumerate() {
        report.check(format!("normalized-{k}"), 1.0, stable_sum(d.values()), Tolerance::Absolute(EXACT_TOL));
    }
    for i in 0..dists.len() {
        for j in i + 1..dists.len() {
            let keys: BTreeSet<_> = dists[i].keys().chain(dists[j].keys()).collect();
            let diff = keys
                .into_iter()
                .map(|k| (dists[i].get(k).unwrap_or(&0.0) - dists[j].get(k).unwrap_or(&0.0)).abs())
                .fold(0.0, f64::max);
            report.check(format!("max-diff-{i}-{j}"), 0.0, diff, Tolerance::AtMost(EXACT_TOL));
        }
    }
    report.observe("records", dists.first().map_or(0, |d| d.len()) as f64);
    report.runtime = started.elapsed();
    Ok(report)
}

/// Single-wing marginals must equal 1/2 for every spec.
pub fn run_no_signalling_suite(specs: &[ExperimentSpec]) -> Result<CampaignReport> {
    let started = Instant::now();
    let mut report = CampaignReport::new("no-signalling", None);
    let dists: Vec<_> = specs.par_iter().map(outcome_distribution).collect::<Result<_>>()?;
    for (k, d) in dists.iter().enumerate() {
        for s in Sign::BOTH {
            report.check(format!("left-{}-{k}", s.as_char()), 0.5, d.marginal_left(s), Tolerance::Absolute(EXACT_TOL));
        }
        for s in Sign::BOTH {
            report.check(
                format!("right-{}-{k}", s.as_char()),
                0.5,
                d.marginal_right(s),
                Tolerance::Absolute(EXACT_TOL),
            );
        }
    }
    report.runtime = started.elapsed();
    Ok(report)
}

/// Runs the template under the signalling weight for each settings pair and
/// checks that the global distribution stays a probability distribution,
/// while reporting how far the left marginal moves with the right setting.
pub fn run_signalling_demo(
    template: &ExperimentSpec,
    lambda: f64,
    settings: &[(Vec3, Vec3)],
) -> Result<CampaignReport> {
    let started = Instant::now();
    let rule = Arc::new(SignallingWeight::new(lambda)?);
    let mut report = CampaignReport::new("signalling-demo", None);
    let base = template.with_rule(rule);
    let runs: Vec<(f64, f64, f64)> = settings
        .par_iter()
        .map(|&(a, b)| {
            let spec = base.with_settings(a, b)?;
            let probs = configuration_probabilities(&spec)?;
            let min = probs.iter().map(|(_, p)| *p).fold(f64::INFINITY, f64::min);
            let total = stable_sum(probs.iter().map(|(_, p)| p));
            let alice = outcome_distribution(&spec)?.marginal_left(Sign::Plus);
            Ok((min, total, alice))
        })
        .collect::<Result<_>>()?;
    let mut alice_plus = Vec::new();
    for (k, (&(_, b), &(min, total, alice))) in settings.iter().zip(&runs).enumerate() {
        report.check(format!("nonnegative-{k}"), 0.0, min, Tolerance::AtLeast(0.0));
        report.check(format!("normalized-{k}"), 1.0, total, Tolerance::Absolute(EXACT_TOL));
        let closed_form = (1.0 + lambda * b.dot(Vec3::Z)) / 2.0;
        report.check(format!("left-marginal-{k}"), closed_form, alice, Tolerance::Absolute(EXACT_TOL));
        report.observe(format!("left-plus-{k}"), alice);
        alice_plus.push(alice);
    }
    if !alice_plus.is_empty() {
        let hi = alice_plus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = alice_plus.iter().copied().fold(f64::INFINITY, f64::min);
        report.observe("marginal-shift", hi - lo);
        // Right wing encodes a bit by picking the setting with the highest or
        // lowest P(α=+); left wing guesses from α.
        report.observe("signal-success-probability", (hi + 1.0 - lo) / 2.0);
    }
    report.runtime = started.elapsed();
    Ok(report)
}

/// The four CHSH settings pairs `(a,b), (a,b'), (a',b), (a',b')` for
/// coplanar angles `φ, φ+90°` and `φ+45°, φ+135°`.
pub fn chsh_settings(phi: f64) -> [(Vec3, Vec3); 4] {
    let a = Vec3::from_angle(phi);
    let a2 = Vec3::from_angle(phi + FRAC_PI_2);
    let b = Vec3::from_angle(phi + FRAC_PI_4);
    let b2 = Vec3::from_angle(phi + 3.0 * FRAC_PI_4);
    [(a, b), (a, b2), (a2, b), (a2, b2)]
}

/// `E(θ)` between settings at angles 0 and θ for each grid angle, plus the
/// CHSH value of the optimal settings rotated by each grid angle.
pub fn run_chsh_scan(template: &ExperimentSpec, angles: &[f64]) -> Result<CampaignReport> {
    let started = Instant::now();
    let mut report = CampaignReport::new("chsh-scan", None);
    if angles.is_empty() {
        return Ok(report);
    }
    let rows: Vec<(f64, f64)> = angles
        .par_iter()
        .map(|&theta| {
            let e = correlation(&template.with_settings(Vec3::from_angle(0.0), Vec3::from_angle(theta))?)?;
            let pairs = chsh_settings(theta);
            let mut es = [0.0; 4];
            for (slot, (a, b)) in es.iter_mut().zip(pairs) {
                *slot = correlation(&template.with_settings(a, b)?)?;
            }
            Ok((e, es[0] - es[1] + es[2] + es[3]))
        })
        .collect::<Result<_>>()?;
    let mut max_s: f64 = 0.0;
    for (&theta, &(e, s)) in angles.iter().zip(&rows) {
        report.check(format!("E({:.4})", theta.to_degrees()), -theta.cos(), e, Tolerance::Absolute(TRIG_TOL));
        report.observe(format!("S({:.4})", theta.to_degrees()), s);
        max_s = max_s.max(s.abs());
    }
    report.check("max-abs-S", 2.0 * SQRT_2, max_s, Tolerance::Absolute(TRIG_TOL));
    report.runtime = started.elapsed();
    Ok(report)
}

/// Batch-means standard error of a series.
fn batch_standard_error(series: &[f64], batches: usize) -> f64 {
    let size = series.len() / batches;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = series.chunks(size).take(batches).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    (var / means.len() as f64).sqrt()
}

/// Result of [`run_sampler_check`]: the report and the merged statistics.
pub struct SamplerRun {
    pub report: CampaignReport,
    pub stats: SampleStats,
}

/// Runs Metropolis chains on an Ising lattice from the all-up state and
/// compares the visited distribution and nearest-neighbour correlation with
/// exact enumeration when the lattice is small enough.
pub fn run_sampler_check(ising: &IsingModel, samples: usize, seed: u64, chains: usize) -> Result<SamplerRun> {
    let started = Instant::now();
    let chains = chains.max(1);
    if samples == 0 {
        return Err(Error::Input("sample count must be at least 1".into()));
    }
    let model = ising.as_factor_model();
    let pair = if ising.num_sites() > 1 { ising.edges().first().copied().unwrap_or((0, 0)) } else { (0, 0) };
    let per_chain = samples.div_ceil(chains);
    let n_sites = ising.num_sites();
    let parts = run_parallel_chains(
        &model,
        &SingleSiteFlip,
        &Configuration::new(vec![1; n_sites]),
        per_chain,
        seed,
        chains,
        || (SampleStats::new(n_sites, vec![pair]), Vec::<f64>::new()),
        |(stats, series), c| {
            stats.record(c.values());
            series.push((c.values()[pair.0] * c.values()[pair.1]) as f64);
        },
    )?;
    let mut stats = SampleStats::new(n_sites, vec![pair]);
    let mut series = Vec::with_capacity(per_chain * chains);
    for (s, ser) in &parts {
        stats.merge(s);
        series.extend_from_slice(ser);
    }
    let mut report = CampaignReport::new("ising-sampler", Some(seed));
    report.observe("samples", stats.count() as f64);
    let sampled_corr = stats.pair_correlations()[0].1;
    report.observe(format!("corr-{}-{}", pair.0, pair.1), sampled_corr);
    if let Ok(exact) = ising.exact_distribution() {
        let empirical = stats.empirical_distribution().expect("enumerable lattices keep visit counts");
        let tv = total_variation(&empirical, exact.probabilities());
        report.check("total-variation", 0.0, tv, Tolerance::AtMost(SAMPLER_TV_TOL));
        let exact_corr = exact.expectation(|c| (c.spins()[pair.0] * c.spins()[pair.1]) as f64);
        let se = batch_standard_error(&series, 100);
        if se.is_finite() && se > 0.0 {
            report.check(
                format!("corr-{}-{}-3se", pair.0, pair.1),
                exact_corr,
                sampled_corr,
                Tolerance::Absolute(3.0 * se),
            );
        }
        report.observe("mean-abs-magnetization-exact", exact.mean_abs_magnetization());
    }
    let total: f64 = stats.magnetization_histogram().iter().map(|&(m, n)| (m.unsigned_abs() * n) as f64).sum();
    report.observe("mean-abs-magnetization", total / stats.count() as f64);
    report.runtime = started.elapsed();
    Ok(SamplerRun { report, stats })
}
