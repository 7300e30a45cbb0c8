use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::setting::{Sign, Vec3};
use super::spec::ExperimentSpec;
use super::trajectory::{
    enumerate_geometries, enumerate_trajectories, pre_measurement_view, trajectory_weight, PreMeasurementRecord,
    LABELINGS,
};

/// Probabilities of the four outcome pairs, indexed `[α][β]` with `+` first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub p: [[f64; 2]; 2],
}

impl JointDistribution {
    /// Normalizes raw label weights. Fails if they sum to zero.
    pub fn from_weights(w: [[f64; 2]; 2]) -> Result<Self> {
        let total: f64 = w.iter().flatten().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::Degenerate("no configuration with positive weight".into()));
        }
        Ok(JointDistribution { p: w.map(|row| row.map(|x| x / total)) })
    }

    /// The singlet law `(1 - αβ a·b) / 4`.
    pub fn singlet(a: Vec3, b: Vec3) -> Self {
        let ab = a.dot(b);
        let mut p = [[0.0; 2]; 2];
        for (alpha, beta) in LABELINGS {
            p[alpha.index()][beta.index()] = (1.0 - alpha.value() * beta.value() * ab) / 4.0;
        }
        JointDistribution { p }
    }

    pub fn get(&self, alpha: Sign, beta: Sign) -> f64 {
        self.p[alpha.index()][beta.index()]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    /// Left-wing marginal `Σ_β P(α, β)`.
    pub fn marginal_left(&self, alpha: Sign) -> f64 {
        self.p[alpha.index()].iter().sum()
    }

    /// Right-wing marginal `Σ_α P(α, β)`.
    pub fn marginal_right(&self, beta: Sign) -> f64 {
        self.p.iter().map(|row| row[beta.index()]).sum()
    }

    /// `E = Σ αβ P(α, β)`.
    pub fn correlation(&self) -> f64 {
        LABELINGS.iter().map(|&(a, b)| a.value() * b.value() * self.get(a, b)).sum()
    }

    pub fn max_abs_diff(&self, other: &JointDistribution) -> f64 {
        self.p.iter().flatten().zip(other.p.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// Unnormalized label weights summed over every enumerated configuration.
pub fn label_weight_sums(spec: &ExperimentSpec) -> Result<[[f64; 2]; 2]> {
    let configs = enumerate_trajectories(spec)?;
    let weights: Vec<f64> = configs.par_iter().map(|c| trajectory_weight(c, spec)).collect::<Result<_>>()?;
    let mut w = [[0.0; 2]; 2];
    for (c, x) in configs.iter().zip(weights) {
        w[c.alpha.index()][c.beta.index()] += x;
    }
    Ok(w)
}

/// Outcome law from brute-force summation over all configurations.
pub fn outcome_distribution(spec: &ExperimentSpec) -> Result<JointDistribution> {
    JointDistribution::from_weights(label_weight_sums(spec)?)
}

pub fn correlation(spec: &ExperimentSpec) -> Result<f64> {
    Ok(outcome_distribution(spec)?.correlation())
}

/// `S = E(a,b) - E(a,b') + E(a',b) + E(a',b')` on the template's geometry.
pub fn chsh(template: &ExperimentSpec, a: Vec3, a2: Vec3, b: Vec3, b2: Vec3) -> Result<f64> {
    let e = |x: Vec3, y: Vec3| correlation(&template.with_settings(x, y)?);
    Ok(e(a, b)? - e(a, b2)? + e(a2, b)? + e(a2, b2)?)
}

/// Largest deviation, over geometries, of the per-geometry normalized label
/// weights from the overall outcome law. Zero means geometry and labels
/// factorize.
pub fn factorization_defect(spec: &ExperimentSpec) -> Result<f64> {
    let overall = outcome_distribution(spec)?;
    let geoms = enumerate_geometries(spec)?;
    let mut worst: f64 = 0.0;
    for g in &geoms {
        let mut w = [[0.0; 2]; 2];
        for (alpha, beta) in LABELINGS {
            w[alpha.index()][beta.index()] = trajectory_weight(&g.with_labels(alpha, beta), spec)?;
        }
        if w.iter().flatten().all(|&x| x == 0.0) {
            continue;
        }
        worst = worst.max(JointDistribution::from_weights(w)?.max_abs_diff(&overall));
    }
    Ok(worst)
}

/// Normalized probability of each configuration, in enumeration order.
pub fn configuration_probabilities(spec: &ExperimentSpec) -> Result<Vec<(super::trajectory::TrajectoryConfig, f64)>> {
    let configs = enumerate_trajectories(spec)?;
    let weights: Vec<f64> = configs.par_iter().map(|c| trajectory_weight(c, spec)).collect::<Result<_>>()?;
    let z: f64 = crate::weight::stable_sum(&weights);
    if z.is_nan() || z <= 0.0 {
        return Err(Error::Degenerate("no configuration with positive weight".into()));
    }
    Ok(configs.into_iter().zip(weights).map(|(c, w)| (c, w / z)).collect())
}

/// Distribution of pre-measurement records under the normalized model.
pub fn pre_measurement_distribution(spec: &ExperimentSpec) -> Result<BTreeMap<PreMeasurementRecord, f64>> {
    let mut out = BTreeMap::new();
    for (c, p) in configuration_probabilities(spec)? {
        *out.entry(pre_measurement_view(&c, spec)?).or_insert(0.0) += p;
    }
    Ok(out)
}
