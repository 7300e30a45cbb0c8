use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::region::Region;

/// Default upper bound on the number of configurations exact enumeration
/// will visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 24;

/// Weights below this are multiplied in log space.
const UNDERFLOW_GUARD: f64 = 1e-300;

/// Inline buffer size for gathering factor inputs.
const INLINE_SUPPORT: usize = 8;

/// A value assigned to every site of a [`FactorModel`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(Vec<i32>);

impl Configuration {
    pub fn new(values: Vec<i32>) -> Self {
        Configuration(values)
    }

    pub fn values(&self) -> &[i32] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [i32] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_values(self) -> Vec<i32> {
        self.0
    }

    /// Sites on which `self` and `other` hold different values.
    pub fn differing_sites(&self, other: &Configuration) -> Vec<usize> {
        self.0.iter().zip(&other.0).enumerate().filter_map(|(i, (a, b))| (a != b).then_some(i)).collect()
    }
}

impl From<Vec<i32>> for Configuration {
    fn from(values: Vec<i32>) -> Self {
        Configuration(values)
    }
}

type WeightFn = dyn Fn(&[i32]) -> f64 + Send + Sync;

/// A nonnegative weight that reads only the sites in its support.
///
/// The weight function receives the support values in support order, so it
/// cannot observe any other site.
#[derive(Clone)]
pub struct Factor {
    support: Vec<usize>,
    weight: Arc<WeightFn>,
}

impl Factor {
    pub fn new<F>(support: Vec<usize>, weight: F) -> Self
    where
        F: Fn(&[i32]) -> f64 + Send + Sync + 'static,
    {
        Factor { support, weight: Arc::new(weight) }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Evaluates the factor on a full configuration.
    pub fn eval(&self, config: &[i32]) -> f64 {
        let n = self.support.len();
        if n <= INLINE_SUPPORT {
            let mut buf = [0i32; INLINE_SUPPORT];
            for (slot, &site) in buf.iter_mut().zip(&self.support) {
                *slot = config[site];
            }
            (self.weight)(&buf[..n])
        } else {
            let buf: Vec<i32> = self.support.iter().map(|&s| config[s]).collect();
            (self.weight)(&buf)
        }
    }

    /// Evaluates the factor directly on support-ordered local values.
    pub fn eval_local(&self, local: &[i32]) -> f64 {
        (self.weight)(local)
    }
}

impl fmt::Debug for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Factor").field("support", &self.support).finish_non_exhaustive()
    }
}

/// A finite configuration space together with local factors whose product is
/// the unnormalized probability of a configuration.
///
/// Immutable after construction; share it freely across threads.
#[derive(Clone, Debug)]
pub struct FactorModel {
    domains: Vec<Arc<[i32]>>,
    factors: Vec<Factor>,
    site_factors: Vec<Vec<usize>>,
}

impl FactorModel {
    /// Builds a model from per-site value domains and factors.
    pub fn new(domains: Vec<Arc<[i32]>>, factors: Vec<Factor>) -> Result<Self> {
        for (site, dom) in domains.iter().enumerate() {
            if dom.is_empty() {
                return Err(Error::Input(format!("site {site} has an empty domain")));
            }
            let mut sorted = dom.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != dom.len() {
                return Err(Error::Input(format!("site {site} has repeated domain values")));
            }
        }
        let mut site_factors = vec![Vec::new(); domains.len()];
        for (fi, factor) in factors.iter().enumerate() {
            for &s in factor.support() {
                let slot = site_factors.get_mut(s).ok_or_else(|| {
                    Error::Input(format!("factor {fi} reads site {s}, but the model has {} sites", domains.len()))
                })?;
                if slot.last() != Some(&fi) {
                    slot.push(fi);
                }
            }
        }
        Ok(FactorModel { domains, factors, site_factors })
    }

    /// Convenience constructor where every site shares one domain.
    pub fn uniform(sites: usize, domain: &[i32], factors: Vec<Factor>) -> Result<Self> {
        let dom: Arc<[i32]> = Arc::from(domain);
        Self::new(vec![dom; sites], factors)
    }

    pub fn num_sites(&self) -> usize {
        self.domains.len()
    }

    pub fn domain(&self, site: usize) -> &[i32] {
        &self.domains[site]
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Indices of the factors whose support contains `site`.
    pub fn factors_at(&self, site: usize) -> &[usize] {
        &self.site_factors[site]
    }

    /// Total number of configurations, saturating at `u128::MAX`.
    pub fn num_configurations(&self) -> u128 {
        self.domains.iter().try_fold(1u128, |acc, d| acc.checked_mul(d.len() as u128)).unwrap_or(u128::MAX)
    }

    pub fn validate(&self, config: &Configuration) -> Result<()> {
        if config.len() != self.num_sites() {
            return Err(Error::Input(format!(
                "configuration has {} sites, model has {}",
                config.len(),
                self.num_sites()
            )));
        }
        for (site, (v, dom)) in config.values().iter().zip(&self.domains).enumerate() {
            if !dom.contains(v) {
                return Err(Error::Input(format!("site {site} holds {v}, outside its domain")));
            }
        }
        Ok(())
    }

    fn checked_weight(value: f64, factor: usize) -> Result<f64> {
        if value >= 0.0 && value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Input(format!("factor {factor} returned invalid weight {value}")))
        }
    }

    /// Product of the given factors, switching to log space if any single
    /// weight is tiny enough to risk underflow.
    fn product_of(&self, values: &[i32], factors: impl Iterator<Item = usize> + Clone) -> Result<f64> {
        let mut product = 1.0;
        let mut use_log = false;
        for fi in factors.clone() {
            let w = Self::checked_weight(self.factors[fi].eval(values), fi)?;
            if w == 0.0 {
                return Ok(0.0);
            }
            if w < UNDERFLOW_GUARD {
                use_log = true;
            }
            product *= w;
        }
        if !use_log {
            return Ok(product);
        }
        let log: f64 = factors.map(|fi| self.factors[fi].eval(values).ln()).sum();
        Ok(log.exp())
    }

    /// Unnormalized weight: the product of every factor.
    pub fn config_weight(&self, config: &Configuration) -> Result<f64> {
        self.validate(config)?;
        self.product_of(config.values(), 0..self.factors.len())
    }

    /// Natural log of [`config_weight`](Self::config_weight); `-inf` for zero weight.
    pub fn log_weight(&self, config: &Configuration) -> Result<f64> {
        self.validate(config)?;
        let mut total = 0.0;
        for (fi, f) in self.factors.iter().enumerate() {
            let w = Self::checked_weight(f.eval(config.values()), fi)?;
            if w == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            total += w.ln();
        }
        Ok(total)
    }

    fn check_cap(&self, cap: u64) -> Result<u64> {
        let count = self.num_configurations();
        if count > cap as u128 {
            return Err(Error::Capacity { count, cap });
        }
        Ok(count as u64)
    }

    /// Decodes a mixed-radix index (site 0 least significant) into a configuration.
    pub fn config_at(&self, mut index: u64) -> Configuration {
        let values = self
            .domains
            .iter()
            .map(|d| {
                let radix = d.len() as u64;
                let v = d[(index % radix) as usize];
                index /= radix;
                v
            })
            .collect();
        Configuration(values)
    }

    /// Mixed-radix index of a configuration; inverse of [`config_at`](Self::config_at).
    pub fn index_of(&self, config: &Configuration) -> Result<u64> {
        self.validate(config)?;
        let mut index = 0u64;
        for (v, d) in config.values().iter().zip(&self.domains).rev() {
            let digit = d.iter().position(|x| x == v).expect("validated") as u64;
            index = index * d.len() as u64 + digit;
        }
        Ok(index)
    }

    /// Weight of every configuration, indexed by mixed-radix index.
    pub fn weight_table(&self, cap: u64) -> Result<Vec<f64>> {
        let count = self.check_cap(cap)?;
        const CHUNK: u64 = 1 << 12;
        let chunks: Vec<u64> = (0..count).step_by(CHUNK as usize).collect();
        let parts: Vec<Result<Vec<f64>>> = chunks
            .into_par_iter()
            .map(|start| {
                let end = (start + CHUNK).min(count);
                let mut config = self.config_at(start);
                let mut digits: Vec<usize> = config
                    .values()
                    .iter()
                    .zip(&self.domains)
                    .map(|(v, d)| d.iter().position(|x| x == v).expect("in domain"))
                    .collect();
                let mut out = Vec::with_capacity((end - start) as usize);
                for _ in start..end {
                    out.push(self.product_of(config.values(), 0..self.factors.len())?);
                    // odometer increment
                    for (site, digit) in digits.iter_mut().enumerate() {
                        *digit += 1;
                        if *digit < self.domains[site].len() {
                            config.0[site] = self.domains[site][*digit];
                            break;
                        }
                        *digit = 0;
                        config.0[site] = self.domains[site][0];
                    }
                }
                Ok(out)
            })
            .collect();
        let mut table = Vec::with_capacity(count as usize);
        for part in parts {
            table.extend(part?);
        }
        Ok(table)
    }

    /// Exact sum of weights over every configuration.
    pub fn partition_sum(&self) -> Result<f64> {
        self.partition_sum_with_cap(DEFAULT_ENUMERATION_CAP)
    }

    pub fn partition_sum_with_cap(&self, cap: u64) -> Result<f64> {
        let z: f64 = super::stable_sum(&self.weight_table(cap)?);
        if z > 0.0 {
            Ok(z)
        } else {
            Err(Error::Degenerate("every configuration has zero weight".into()))
        }
    }

    /// Normalized probability of every configuration, indexed by mixed-radix index.
    pub fn probability_table(&self, cap: u64) -> Result<Vec<f64>> {
        let mut table = self.weight_table(cap)?;
        let z: f64 = super::stable_sum(&table);
        if z <= 0.0 {
            return Err(Error::Degenerate("every configuration has zero weight".into()));
        }
        table.iter_mut().for_each(|w| *w /= z);
        Ok(table)
    }

    pub fn probability(&self, config: &Configuration) -> Result<f64> {
        let w = self.config_weight(config)?;
        let z = self.partition_sum()?;
        Ok(w / z)
    }

    /// `Prob(a) / Prob(b)` computed from the factors that touch the sites where
    /// `a` and `b` differ. No other factor is evaluated.
    pub fn local_ratio(&self, a: &Configuration, b: &Configuration) -> Result<f64> {
        self.validate(a)?;
        self.validate(b)?;
        let region = Region::between(a, b);
        let touched = region.touching_factors(self);
        let num = self.product_of(a.values(), touched.iter().copied())?;
        let den = self.product_of(b.values(), touched.iter().copied())?;
        if den == 0.0 {
            return Err(Error::DivisionDomain);
        }
        Ok(num / den)
    }

    /// Weight ratio `w(current with changes applied) / w(current)` using only
    /// factors that read a changed site. `scratch` must equal `current` on
    /// entry and is restored before returning.
    pub(crate) fn ratio_for_changes(
        &self,
        scratch: &mut Configuration,
        changes: &[(usize, i32)],
        touched: &mut Vec<usize>,
    ) -> Result<f64> {
        touched.clear();
        for &(site, _) in changes {
            touched.extend_from_slice(&self.site_factors[site]);
        }
        touched.sort_unstable();
        touched.dedup();
        let den = self.product_of(scratch.values(), touched.iter().copied())?;
        let old: Vec<i32> = changes.iter().map(|&(s, _)| scratch.0[s]).collect();
        for &(site, v) in changes {
            scratch.0[site] = v;
        }
        let num = self.product_of(scratch.values(), touched.iter().copied());
        for (&(site, _), v) in changes.iter().zip(old) {
            scratch.0[site] = v;
        }
        let num = num?;
        if den == 0.0 {
            return Err(Error::DivisionDomain);
        }
        Ok(num / den)
    }
}
