use std::collections::BTreeSet;

use super::model::{Configuration, FactorModel};

/// A set of sites on which two configurations may differ.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Region {
    sites: BTreeSet<usize>,
}

impl Region {
    pub fn new(sites: impl IntoIterator<Item = usize>) -> Self {
        Region { sites: sites.into_iter().collect() }
    }

    /// The sites where `a` and `b` hold different values.
    pub fn between(a: &Configuration, b: &Configuration) -> Self {
        Region::new(a.differing_sites(b))
    }

    pub fn sites(&self) -> &BTreeSet<usize> {
        &self.sites
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Sorted indices of every factor that reads at least one site of the region.
    pub fn touching_factors(&self, model: &FactorModel) -> Vec<usize> {
        let mut out: Vec<usize> = self.sites.iter().flat_map(|&s| model.factors_at(s).iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The region together with every site that shares a factor with it.
    pub fn closure(&self, model: &FactorModel) -> BTreeSet<usize> {
        let mut out = self.sites.clone();
        for fi in self.touching_factors(model) {
            out.extend(model.factors()[fi].support().iter().copied());
        }
        out
    }
}
