//! Models whose configuration probability is a normalized product of local
//! factor weights.

mod model;
mod region;
mod sampler;

pub use model::{Configuration, Factor, FactorModel, DEFAULT_ENUMERATION_CAP};
pub use region::Region;
pub use sampler::{metropolis_sample, run_parallel_chains, MetropolisChain, MoveSet, SingleSiteFlip};

/// Total-variation distance between two distributions over the same index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must share an index set");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Compensated (Neumaier) summation. Keeps partition sums over millions of
/// terms accurate to a few ulps.
pub fn stable_sum<'a>(values: impl IntoIterator<Item = &'a f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
