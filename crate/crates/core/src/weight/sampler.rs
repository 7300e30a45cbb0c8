//! Metropolis sampling of a [`FactorModel`].
//!
//! Acceptance ratios come from the factors that read the proposed change,
//! never from the full product, so a step costs the same on any lattice size.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};

use super::model::{Configuration, FactorModel};

/// Proposes local changes to a configuration.
///
/// Implementations must be symmetric (the reverse move is proposed with the
/// same probability) and must connect the positive-weight configurations.
pub trait MoveSet: Send + Sync {
    /// Returns `(site, new value)` pairs.
    fn propose<R: Rng + ?Sized>(&self, model: &FactorModel, config: &Configuration, rng: &mut R) -> Vec<(usize, i32)>;
}

/// Pick a site uniformly and move it to a uniformly chosen different value.
#[derive(Debug, Clone, Copy, Default)]
pub struct SingleSiteFlip;

impl MoveSet for SingleSiteFlip {
    fn propose<R: Rng + ?Sized>(&self, model: &FactorModel, config: &Configuration, rng: &mut R) -> Vec<(usize, i32)> {
        let site = rng.gen_range(0..model.num_sites());
        let dom = model.domain(site);
        if dom.len() < 2 {
            return Vec::new();
        }
        let current = config.values()[site];
        let others: Vec<i32> = dom.iter().copied().filter(|&v| v != current).collect();
        vec![(site, others[rng.gen_range(0..others.len())])]
    }
}

/// A Metropolis chain that emits one configuration per sweep.
pub struct MetropolisChain<'m, M> {
    model: &'m FactorModel,
    moves: M,
    state: Configuration,
    rng: StreamRng,
    steps_per_sample: usize,
    remaining: usize,
    proposed: u64,
    accepted: u64,
    touched: Vec<usize>,
}

impl<'m, M: MoveSet> MetropolisChain<'m, M> {
    /// Starts a chain at `initial` that will emit `n` samples, each taken
    /// after `steps_per_sample` proposals.
    pub fn new(
        model: &'m FactorModel,
        moves: M,
        initial: Configuration,
        n: usize,
        steps_per_sample: usize,
        rng: StreamRng,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("sample count must be at least 1".into()));
        }
        if steps_per_sample == 0 {
            return Err(Error::Input("steps per sample must be at least 1".into()));
        }
        if model.config_weight(&initial)? <= 0.0 {
            return Err(Error::Input("initial configuration has zero weight".into()));
        }
        Ok(MetropolisChain {
            model,
            moves,
            state: initial,
            rng,
            steps_per_sample,
            remaining: n,
            proposed: 0,
            accepted: 0,
            touched: Vec::new(),
        })
    }

    pub fn state(&self) -> &Configuration {
        &self.state
    }

    pub fn proposed(&self) -> u64 {
        self.proposed
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    /// One proposal plus accept/reject.
    pub fn step(&mut self) -> Result<bool> {
        let changes = self.moves.propose(self.model, &self.state, &mut self.rng);
        self.proposed += 1;
        for &(site, v) in &changes {
            if site >= self.model.num_sites() || !self.model.domain(site).contains(&v) {
                return Err(Error::Move(format!("proposal sets site {site} to {v}")));
            }
        }
        if changes.is_empty() {
            return Ok(false);
        }
        let ratio = self.model.ratio_for_changes(&mut self.state, &changes, &mut self.touched)?;
        let accept = ratio >= 1.0 || self.rng.gen::<f64>() < ratio;
        if accept {
            for &(site, v) in &changes {
                self.state.values_mut()[site] = v;
            }
            self.accepted += 1;
        }
        Ok(accept)
    }

    /// Runs one sweep and returns the resulting state, or `None` when the
    /// requested number of samples has been produced.
    pub fn next_sample(&mut self) -> Option<Result<&Configuration>> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        for _ in 0..self.steps_per_sample {
            if let Err(e) = self.step() {
                self.remaining = 0;
                return Some(Err(e));
            }
        }
        Some(Ok(&self.state))
    }
}

impl<M: MoveSet> Iterator for MetropolisChain<'_, M> {
    type Item = Result<Configuration>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_sample().map(|r| r.cloned())
    }
}

/// Stream of `n` samples, one per sweep of `num_sites` proposals,
/// deterministic in `seed`.
pub fn metropolis_sample<M: MoveSet>(
    model: &FactorModel,
    moves: M,
    initial: Configuration,
    n: usize,
    seed: u64,
) -> Result<MetropolisChain<'_, M>> {
    let sweep = model.num_sites().max(1);
    MetropolisChain::new(model, moves, initial, n, sweep, stream_rng(seed, 0))
}

/// Runs `chains` independent chains in parallel, each on its own RNG stream,
/// and folds every sample with `visit`. Results come back in chain order.
#[allow(clippy::too_many_arguments)]
pub fn run_parallel_chains<M, T, F>(
    model: &FactorModel,
    moves: &M,
    initial: &Configuration,
    samples_per_chain: usize,
    seed: u64,
    chains: usize,
    init: impl Fn() -> T + Sync,
    visit: F,
) -> Result<Vec<T>>
where
    M: MoveSet + Clone,
    T: Send,
    F: Fn(&mut T, &Configuration) + Sync,
{
    (0..chains as u64)
        .into_par_iter()
        .map(|stream| {
            let sweep = model.num_sites().max(1);
            let mut chain = MetropolisChain::new(
                model,
                moves.clone(),
                initial.clone(),
                samples_per_chain,
                sweep,
                stream_rng(seed, stream),
            )?;
            let mut acc = init();
            while let Some(sample) = chain.next_sample() {
                visit(&mut acc, sample?);
            }
            Ok(acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::Factor;

    #[test]
    fn rejected_single_proposal_returns_initial_state() {
        // flipping away from +1 has zero weight, so every proposal is rejected
        let m = FactorModel::uniform(1, &[1, -1], vec![Factor::new(vec![0], |v| if v[0] == 1 { 1.0 } else { 0.0 })])
            .unwrap();
        let init = Configuration::new(vec![1]);
        let mut chain = MetropolisChain::new(&m, SingleSiteFlip, init.clone(), 1, 1, stream_rng(1, 0)).unwrap();
        assert_eq!(chain.next().unwrap().unwrap(), init);
        assert!(chain.next().is_none());
        assert_eq!(chain.accepted(), 0);
        assert_eq!(chain.proposed(), 1);
    }

    #[test]
    fn flat_model_accepts_every_flip() {
        let m = FactorModel::uniform(4, &[1, -1], vec![Factor::new(vec![0, 1], |_| 1.0)]).unwrap();
        let mut chain = metropolis_sample(&m, SingleSiteFlip, Configuration::new(vec![1; 4]), 1000, 9).unwrap();
        while let Some(s) = chain.next_sample() {
            s.unwrap();
        }
        assert_eq!(chain.accepted(), chain.proposed());
        assert_eq!(chain.proposed(), 4000);
    }

    #[test]
    fn bad_moves_are_reported() {
        #[derive(Clone)]
        struct Bogus;
        impl MoveSet for Bogus {
            fn propose<R: Rng + ?Sized>(&self, _: &FactorModel, _: &Configuration, _: &mut R) -> Vec<(usize, i32)> {
                vec![(0, 7)]
            }
        }
        let m = FactorModel::uniform(1, &[1, -1], vec![]).unwrap();
        let mut chain = metropolis_sample(&m, Bogus, Configuration::new(vec![1]), 3, 0).unwrap();
        assert!(matches!(chain.next(), Some(Err(Error::Move(_)))));
        assert!(chain.next().is_none());
    }

    #[test]
    fn zero_weight_start_and_empty_runs_rejected() {
        let m = FactorModel::uniform(1, &[1, -1], vec![Factor::new(vec![0], |v| (v[0] == 1) as i32 as f64)]).unwrap();
        assert!(metropolis_sample(&m, SingleSiteFlip, Configuration::new(vec![-1]), 1, 0).is_err());
        assert!(metropolis_sample(&m, SingleSiteFlip, Configuration::new(vec![1]), 0, 0).is_err());
    }
}
