//! Square-lattice Ising model with `H = Σ_(i,j) (1 - s_i s_j)` over
//! horizontally and vertically adjacent pairs and weight `exp(-C H)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weight::{Configuration, Factor, FactorModel};

/// Largest lattice (in sites) for which exact distributions are produced.
pub const MAX_EXACT_SITES: usize = 24;

/// Domain order fixes the enumeration index: bit k set means site k is -1.
const SPIN_DOMAIN: [i32; 2] = [1, -1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    /// Wraps each axis of length at least 3; shorter axes stay open so no
    /// bond is doubled.
    Periodic,
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Boundary::Open),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::Parse(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Assignment of ±1 to every site, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|s| **s != 1 && **s != -1) {
            return Err(Error::Input(format!("spin value {bad} is not ±1")));
        }
        Ok(SpinConfig(spins))
    }

    pub fn all_up(sites: usize) -> Self {
        SpinConfig(vec![1; sites])
    }

    /// Spins read from the low `sites` bits of `index`; a set bit is -1.
    pub fn from_index(index: u64, sites: usize) -> Self {
        SpinConfig((0..sites).map(|k| if (index >> k) & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn index(&self) -> u64 {
        self.0.iter().enumerate().fold(0, |acc, (k, &s)| acc | (((s == -1) as u64) << k))
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flipped(&self) -> Self {
        SpinConfig(self.0.iter().map(|s| -s).collect())
    }

    pub fn magnetization(&self) -> i64 {
        self.0.iter().map(|&s| s as i64).sum()
    }

    pub fn to_configuration(&self) -> Configuration {
        Configuration::new(self.0.iter().map(|&s| s as i32).collect())
    }

    pub fn from_configuration(config: &Configuration) -> Result<Self> {
        SpinConfig::new(config.values().iter().map(|&v| v as i8).collect())
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for SpinConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("spin character '{other}'"))),
            })
            .collect::<Result<Vec<i8>>>()
            .map(SpinConfig)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    width: usize,
    height: usize,
    coupling: f64,
    boundary: Boundary,
}

impl IsingModel {
    pub fn new(width: usize, height: usize, coupling: f64) -> Result<Self> {
        Self::with_boundary(width, height, coupling, Boundary::Open)
    }

    pub fn with_boundary(width: usize, height: usize, coupling: f64, boundary: Boundary) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!("lattice {width}x{height} must have positive dimensions")));
        }
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::Input(format!("coupling {coupling} must be finite and nonnegative")));
        }
        Ok(IsingModel { width, height, coupling, boundary })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn num_sites(&self) -> usize {
        self.width * self.height
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Nearest-neighbour bonds, each listed once.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let (w, h) = (self.width, self.height);
        let wrap = self.boundary == Boundary::Periodic;
        let mut edges = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let i = self.site(x, y);
                if x + 1 < w {
                    edges.push((i, self.site(x + 1, y)));
                } else if wrap && w >= 3 {
                    edges.push((i, self.site(0, y)));
                }
                if y + 1 < h {
                    edges.push((i, self.site(x, y + 1)));
                } else if wrap && h >= 3 {
                    edges.push((i, self.site(x, 0)));
                }
            }
        }
        edges
    }

    fn check_dims(&self, config: &SpinConfig) -> Result<()> {
        if config.len() != self.num_sites() {
            return Err(Error::Input(format!(
                "configuration has {} spins, lattice has {} sites",
                config.len(),
                self.num_sites()
            )));
        }
        Ok(())
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.num_sites() {
            return Err(Error::Input(format!("site {site} outside lattice of {} sites", self.num_sites())));
        }
        Ok(())
    }

    pub fn hamiltonian(&self, config: &SpinConfig) -> Result<u32> {
        self.check_dims(config)?;
        let s = config.spins();
        Ok(self.edges().iter().map(|&(i, j)| (1 - (s[i] * s[j]) as i32) as u32).sum())
    }

    /// One factor `exp(-C (1 - s_i s_j))` per bond.
    pub fn as_factor_model(&self) -> FactorModel {
        let c = self.coupling;
        let factors = self
            .edges()
            .into_iter()
            .map(|(i, j)| Factor::new(vec![i, j], move |v| (-c * (1 - v[0] * v[1]) as f64).exp()))
            .collect();
        FactorModel::uniform(self.num_sites(), &SPIN_DOMAIN, factors).expect("edges lie inside the lattice")
    }

    pub fn exact_distribution(&self) -> Result<ExactDistribution> {
        let sites = self.num_sites();
        if sites > MAX_EXACT_SITES {
            return Err(Error::Capacity { count: 1u128 << sites.min(127), cap: 1 << MAX_EXACT_SITES });
        }
        let probs = self.as_factor_model().probability_table(1 << MAX_EXACT_SITES)?;
        Ok(ExactDistribution { sites, probs })
    }

    pub fn two_point_correlation(&self, i: usize, j: usize, source: CorrelationSource<'_>) -> Result<f64> {
        self.check_site(i)?;
        self.check_site(j)?;
        match source {
            CorrelationSource::Exact(dist) => {
                if dist.sites != self.num_sites() {
                    return Err(Error::Input("distribution belongs to a different lattice".into()));
                }
                Ok(dist.expectation(|c| (c.spins()[i] * c.spins()[j]) as f64))
            }
            CorrelationSource::Samples(samples) => {
                if samples.is_empty() {
                    return Err(Error::Input("no samples".into()));
                }
                let mut total = 0i64;
                for s in samples {
                    self.check_dims(s)?;
                    total += (s.spins()[i] * s.spins()[j]) as i64;
                }
                Ok(total as f64 / samples.len() as f64)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum CorrelationSource<'a> {
    Exact(&'a ExactDistribution),
    Samples(&'a [SpinConfig]),
}

/// Normalized probabilities of all `2^sites` spin configurations, indexed by
/// [`SpinConfig::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    sites: usize,
    probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, config: &SpinConfig) -> f64 {
        self.probs[config.index() as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (SpinConfig, f64)> + '_ {
        self.probs.iter().enumerate().map(|(k, &p)| (SpinConfig::from_index(k as u64, self.sites), p))
    }

    pub fn expectation(&self, f: impl Fn(&SpinConfig) -> f64) -> f64 {
        self.iter().map(|(c, p)| p * f(&c)).sum()
    }

    pub fn mean_abs_magnetization(&self) -> f64 {
        self.expectation(|c| c.magnetization().unsigned_abs() as f64)
    }

    /// `(config string, probability)` pairs sorted by config string.
    pub fn sorted_entries(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self.iter().map(|(c, p)| (c.to_string(), p)).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// Running summary of a stream of sampled spin configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats {
    sites: usize,
    count: u64,
    magnetization: Vec<u64>,
    pairs: Vec<(usize, usize)>,
    pair_sums: Vec<i64>,
    visits: Option<Vec<u64>>,
}

impl SampleStats {
    /// Tracks the given site pairs; full state visit counts are kept when the
    /// lattice is small enough to enumerate.
    pub fn new(sites: usize, pairs: Vec<(usize, usize)>) -> Self {
        let visits = (sites <= MAX_EXACT_SITES).then(|| vec![0; 1 << sites]);
        SampleStats {
            sites,
            count: 0,
            magnetization: vec![0; sites + 1],
            pair_sums: vec![0; pairs.len()],
            pairs,
            visits,
        }
    }

    pub fn record(&mut self, spins: &[i32]) {
        self.count += 1;
        let up = spins.iter().filter(|&&s| s == 1).count();
        self.magnetization[up] += 1;
        for ((i, j), sum) in self.pairs.iter().zip(&mut self.pair_sums) {
            *sum += (spins[*i] * spins[*j]) as i64;
        }
        if let Some(v) = &mut self.visits {
            let idx = spins.iter().enumerate().fold(0usize, |acc, (k, &s)| acc | (((s == -1) as usize) << k));
            v[idx] += 1;
        }
    }

    /// Combines statistics from independent chains.
    pub fn merge(&mut self, other: &SampleStats) {
        assert_eq!(self.sites, other.sites);
        assert_eq!(self.pairs, other.pairs);
        self.count += other.count;
        self.magnetization.iter_mut().zip(&other.magnetization).for_each(|(a, b)| *a += b);
        self.pair_sums.iter_mut().zip(&other.pair_sums).for_each(|(a, b)| *a += b);
        if let (Some(a), Some(b)) = (&mut self.visits, &other.visits) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `(magnetization, count)` for every reachable magnetization value.
    pub fn magnetization_histogram(&self) -> Vec<(i64, u64)> {
        self.magnetization.iter().enumerate().map(|(up, &n)| (2 * up as i64 - self.sites as i64, n)).collect()
    }

    pub fn pair_correlations(&self) -> Vec<((usize, usize), f64)> {
        self.pairs.iter().zip(&self.pair_sums).map(|(&p, &s)| (p, s as f64 / self.count as f64)).collect()
    }

    pub fn empirical_distribution(&self) -> Option<Vec<f64>> {
        self.visits.as_ref().map(|v| v.iter().map(|&n| n as f64 / self.count as f64).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_hand_counts() {
        let m = IsingModel::new(3, 3, 0.3).unwrap();
        assert_eq!(m.hamiltonian(&SpinConfig::all_up(9)).unwrap(), 0);
        let m2 = IsingModel::new(2, 2, 0.5).unwrap();
        assert_eq!(m2.hamiltonian(&"-+++".parse().unwrap()).unwrap(), 4);
        assert_eq!(m2.hamiltonian(&"+--+".parse().unwrap()).unwrap(), 8);
        assert!(matches!(m2.hamiltonian(&SpinConfig::all_up(3)), Err(Error::Input(_))));
    }

    #[test]
    fn edge_counts() {
        assert_eq!(IsingModel::new(3, 3, 0.0).unwrap().edges().len(), 12);
        assert_eq!(IsingModel::with_boundary(3, 3, 0.0, Boundary::Periodic).unwrap().edges().len(), 18);
        assert_eq!(IsingModel::with_boundary(2, 2, 0.0, Boundary::Periodic).unwrap().edges().len(), 4);
        assert!(IsingModel::new(1, 1, 0.0).unwrap().edges().is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(IsingModel::new(0, 3, 0.1).is_err());
        assert!(IsingModel::new(2, 2, -0.1).is_err());
        assert!(SpinConfig::new(vec![1, 0]).is_err());
        assert!("+x".parse::<SpinConfig>().is_err());
    }

    #[test]
    fn spin_string_round_trip_and_index() {
        let c: SpinConfig = "+-+-".parse().unwrap();
        assert_eq!(c.to_string(), "+-+-");
        assert_eq!(c.index(), 0b1010);
        assert_eq!(SpinConfig::from_index(0b1010, 4), c);
    }

    #[test]
    fn exact_capacity_limit() {
        let big = IsingModel::new(5, 5, 0.2).unwrap();
        assert!(matches!(big.exact_distribution(), Err(Error::Capacity { .. })));
    }

    #[test]
    fn correlation_edge_cases() {
        let m = IsingModel::new(2, 2, 0.0).unwrap();
        let d = m.exact_distribution().unwrap();
        assert_eq!(m.two_point_correlation(1, 1, CorrelationSource::Exact(&d)).unwrap(), 1.0);
        assert_eq!(m.two_point_correlation(0, 3, CorrelationSource::Exact(&d)).unwrap(), 0.0);
        assert!(m.two_point_correlation(0, 4, CorrelationSource::Exact(&d)).is_err());
        assert!(m.two_point_correlation(0, 1, CorrelationSource::Samples(&[])).is_err());
    }

    #[test]
    fn stats_track_samples() {
        let mut s = SampleStats::new(2, vec![(0, 1)]);
        s.record(&[1, 1]);
        s.record(&[1, -1]);
        assert_eq!(s.count(), 2);
        assert_eq!(s.magnetization_histogram(), vec![(-2, 0), (0, 1), (2, 1)]);
        assert_eq!(s.pair_correlations(), vec![((0, 1), 0.0)]);
        assert_eq!(s.empirical_distribution().unwrap(), vec![0.5, 0.0, 0.5, 0.0]);
    }
}
