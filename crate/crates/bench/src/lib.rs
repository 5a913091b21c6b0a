//! Fixtures shared by the criterion benches.

use hypercollapse::{sample_static, Hypergraph, MixingDistribution};

/// A Poisson random hypergraph with `n` vertices at intensity `t·ρ`.
pub fn fixture(rho: &[f64], t: f64, n: usize, seed: u64) -> Hypergraph {
    let rho = MixingDistribution::probability(rho.to_vec()).expect("valid fixture law");
    sample_static(&rho.scaled(t), n, seed)
}
