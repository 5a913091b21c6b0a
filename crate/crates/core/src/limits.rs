//! Executable limit objects: the Borel law of the total progeny of a
//! Poisson branching process, first-passage walks and their coupled family
//! across times, and the finite-`N` (patch, debris) Markov chain that
//! randomized collapse follows.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::MixingDistribution;
use crate::numeric::{ln_choose, ln_factorial};
use crate::sampler::poisson;
use crate::structure::escape_probability;

/// Extinction probability below which a supercritical walk is declared
/// escaped before reaching `n_cap`.
const ESCAPE_BARRIER_PROBABILITY: f64 = 1e-12;

/// Total progeny of a Poisson(`mu`) Galton–Watson tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BorelLaw {
    pub mu: f64,
}

impl BorelLaw {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::DomainError(format!("offspring mean must be finite and ≥ 0, got {mu}")));
        }
        Ok(BorelLaw { mu })
    }

    pub fn ln_pmf(&self, n: u64) -> f64 {
        if n == 0 {
            return f64::NEG_INFINITY;
        }
        if self.mu == 0.0 {
            return if n == 1 { 0.0 } else { f64::NEG_INFINITY };
        }
        let nf = n as f64;
        -self.mu * nf + (nf - 1.0) * (self.mu * nf).ln() - ln_factorial(n)
    }

    /// `P(M = n) = e^{-μn}(μn)^{n-1}/n!`.
    pub fn pmf(&self, n: u64) -> f64 {
        self.ln_pmf(n).exp()
    }

    /// `P(M = ∞)`, the survival probability.
    pub fn infinity_mass(&self) -> f64 {
        escape_probability(self.mu)
    }

    /// Upper bound on `Σ_{n > n_max} pmf(n)`, from Stirling's lower bound on
    /// `n!`: `pmf(n) ≤ q^n / (μ n √(2πn))` with `q = μ e^{1-μ} ≤ 1`.
    pub fn tail_bound(&self, n_max: u64) -> f64 {
        let mu = self.mu;
        if mu == 0.0 {
            return 0.0;
        }
        let c = 1.0 / (mu * (2.0 * std::f64::consts::PI).sqrt());
        let n0 = (n_max + 1) as f64;
        // Σ_{n ≥ n0} n^{-3/2} ≤ 2/√(n0 - 1) for the q = 1 case.
        let flat = if n_max == 0 { f64::INFINITY } else { 2.0 / (n_max as f64).sqrt() };
        let ln_q = mu.ln() + 1.0 - mu;
        let geometric = if ln_q < 0.0 {
            (n0 * ln_q).exp() * n0.powf(-1.5) / -ln_q.exp_m1()
        } else {
            f64::INFINITY
        };
        (c * flat.min(geometric)).min(1.0)
    }

    /// Smallest `n` such that `log((1-φ)^n)` drops below `ln p`; above this
    /// population a supercritical walk dies out with probability below `p`.
    fn escape_barrier(&self, p: f64) -> Option<u64> {
        let phi = self.infinity_mass();
        if phi <= 0.0 {
            return None;
        }
        let per = (-phi).ln_1p();
        if per >= 0.0 {
            return None;
        }
        Some((p.ln() / per).ceil().max(1.0) as u64)
    }
}

/// Default step cap standing in for `M = ∞`.
pub fn default_n_cap(mu: f64) -> u64 {
    if mu > 1.0 {
        let gap = (1.0 / ((mu - 1.0) * (mu - 1.0))).ceil();
        10_000u64.max((50.0 * gap).min(1e12) as u64)
    } else {
        10_000
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstPassage {
    /// Hit zero after this many steps.
    Extinct(u64),
    Escaped,
}

impl FirstPassage {
    pub fn steps(self) -> Option<u64> {
        match self {
            FirstPassage::Extinct(n) => Some(n),
            FirstPassage::Escaped => None,
        }
    }

    pub fn is_escaped(self) -> bool {
        self == FirstPassage::Escaped
    }
}

/// First passage to zero of `ξ₀ = 1, ξ_{n+1} = ξ_n - 1 + Poisson(μ)`.
///
/// Reports `Escaped` after `n_cap` steps, or earlier once `ξ` is so large
/// that extinction from there has probability below 1e-12.
pub fn simulate_first_passage<R: Rng + ?Sized>(mu: f64, n_cap: u64, rng: &mut R) -> Result<FirstPassage> {
    let law = BorelLaw::new(mu)?;
    if n_cap == 0 {
        return Err(Error::DomainError("n_cap must be at least 1".into()));
    }
    let barrier = law.escape_barrier(ESCAPE_BARRIER_PROBABILITY).unwrap_or(u64::MAX);
    let mut xi: u64 = 1;
    for n in 1..=n_cap {
        xi = xi - 1 + poisson(rng, mu);
        if xi == 0 {
            return Ok(FirstPassage::Extinct(n));
        }
        if xi >= barrier {
            return Ok(FirstPassage::Escaped);
        }
    }
    Ok(FirstPassage::Escaped)
}

/// One realization of the coupled walks `ξ_t`, `t` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkFamily {
    pub time_grid: Vec<f64>,
    pub rho2: f64,
    pub n_cap: u64,
    pub passages: Vec<FirstPassage>,
}

impl WalkFamily {
    /// χ: the first grid time whose walk escapes.
    pub fn chi(&self) -> Option<f64> {
        self.passages
            .iter()
            .position(|p| p.is_escaped())
            .map(|i| self.time_grid[i])
    }

    pub fn is_monotone(&self) -> bool {
        self.passages.windows(2).all(|w| match (w[0], w[1]) {
            (_, FirstPassage::Escaped) => true,
            (FirstPassage::Escaped, FirstPassage::Extinct(_)) => false,
            (FirstPassage::Extinct(a), FirstPassage::Extinct(b)) => a <= b,
        })
    }
}

/// Runs the walks `ξ_t(n+1) = ξ_t(n) - 1 + (P_t(n+1) - P_t(n))` for every
/// grid time at once. Step `n`'s offspring counts are one Poisson process in
/// `t` of rate `2ρ₂`, realized as independent increments between grid times,
/// so a later time always has at least as many offspring as an earlier one.
pub fn coupled_family<R: Rng + ?Sized>(
    time_grid: &[f64],
    rho2: f64,
    n_cap: u64,
    rng: &mut R,
) -> Result<WalkFamily> {
    if time_grid.is_empty() || time_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::DomainError("time grid must be non-empty and positive".into()));
    }
    if time_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::DomainError("time grid must be sorted".into()));
    }
    if !(rho2 > 0.0 && rho2.is_finite()) {
        return Err(Error::DomainError(format!("rho2 must be positive, got {rho2}")));
    }
    if n_cap == 0 {
        return Err(Error::DomainError("n_cap must be at least 1".into()));
    }
    let r = time_grid.len();
    let barriers: Vec<u64> = time_grid
        .iter()
        .map(|&t| {
            BorelLaw { mu: 2.0 * rho2 * t }
                .escape_barrier(ESCAPE_BARRIER_PROBABILITY)
                .unwrap_or(u64::MAX)
        })
        .collect();
    let mut xi = vec![1u64; r];
    let mut passages = vec![FirstPassage::Escaped; r];
    // The coupling makes the dead walks a prefix of the grid and the escaped
    // walks a suffix.
    let mut first_alive = 0;
    let mut last_alive = r;
    for n in 1..=n_cap {
        if first_alive >= last_alive {
            break;
        }
        let mut offspring = poisson(rng, 2.0 * rho2 * time_grid[first_alive]);
        for j in first_alive..last_alive {
            if j > first_alive {
                offspring += poisson(rng, 2.0 * rho2 * (time_grid[j] - time_grid[j - 1]));
            }
            xi[j] = xi[j] - 1 + offspring;
        }
        while first_alive < last_alive && xi[first_alive] == 0 {
            passages[first_alive] = FirstPassage::Extinct(n);
            first_alive += 1;
        }
        while last_alive > first_alive && xi[last_alive - 1] >= barriers[last_alive - 1] {
            last_alive -= 1;
        }
    }
    Ok(WalkFamily {
        time_grid: time_grid.to_vec(),
        rho2,
        n_cap,
        passages,
    })
}

/// State of the (patch, debris) chain after `n` collapse steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainState {
    pub n: usize,
    pub y: u64,
    pub z: u64,
    pub num_vertices: usize,
}

impl ChainState {
    pub fn new(num_vertices: usize, y: u64, z: u64) -> Self {
        ChainState { n: 0, y, z, num_vertices }
    }

    pub fn is_stopped(&self) -> bool {
        self.y == 0
    }
}

/// `λ₂(N, n) = N Σ_i ρ_{2+i} C(n, i) / C(N, i+2)`.
pub fn lambda2(rho: &MixingDistribution, num_vertices: usize, n: usize) -> f64 {
    let big = num_vertices as u64;
    let mut acc = 0.0;
    for i in 0..=n {
        let k = i + 2;
        if k > rho.max_cardinality() || k as u64 > big {
            break;
        }
        let c = rho.coeff(k);
        if c > 0.0 {
            acc += c * (ln_choose(n as u64, i as u64) - ln_choose(big, k as u64)).exp();
        }
    }
    num_vertices as f64 * acc
}

/// Smallest `N₀ ≤ n_max` such that `|(N-n-1)λ₂(N,n) - 2ρ₂| < tol` for every
/// `N` in `N₀..=n_max`.
pub fn lambda2_settling_size(rho: &MixingDistribution, n: usize, tol: f64, n_max: usize) -> Option<usize> {
    let target = 2.0 * rho.coeff(2);
    let ok = |big: usize| ((big - n - 1) as f64 * lambda2(rho, big, n) - target).abs() < tol;
    if n_max < n + 2 || !ok(n_max) {
        return None;
    }
    let mut big = n_max;
    while big > n + 2 && ok(big - 1) {
        big -= 1;
    }
    Some(big)
}

/// One step of the chain: `W ~ Bin(Y-1, 1/(N-n))` extra patches on the
/// removed vertex become debris alongside the chosen one, and
/// `U ~ Poisson((N-n-1)·t·λ₂(N,n))` new patches appear.
pub fn chain_step<R: Rng + ?Sized>(
    state: ChainState,
    rho: &MixingDistribution,
    t: f64,
    rng: &mut R,
) -> Result<ChainState> {
    if state.y == 0 {
        return Err(Error::ChainStopped);
    }
    let big = state.num_vertices;
    if state.n >= big {
        return Err(Error::DomainError(format!("step {} of a chain on {big} vertices", state.n)));
    }
    let live = (big - state.n) as f64;
    let w = Binomial::new(state.y - 1, 1.0 / live)
        .expect("valid binomial parameters")
        .sample(rng);
    let rate = (big - state.n - 1) as f64 * t * lambda2(rho, big, state.n);
    let u = poisson(rng, rate);
    Ok(ChainState {
        n: state.n + 1,
        y: state.y - 1 - w + u,
        z: state.z + 1 + w,
        num_vertices: big,
    })
}

/// States `0..=steps`, frozen once `Y` hits zero.
pub fn run_chain<R: Rng + ?Sized>(
    initial: ChainState,
    rho: &MixingDistribution,
    t: f64,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<ChainState>> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut state = initial;
    out.push(state);
    for _ in 0..steps {
        if !state.is_stopped() && state.n < state.num_vertices {
            state = chain_step(state, rho, t, rng)?;
        }
        out.push(state);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn naive_pmf(mu: f64, n: u64) -> f64 {
        let mut fact = 1.0;
        for i in 1..=n {
            fact *= i as f64;
        }
        (-mu * n as f64).exp() * (mu * n as f64).powi(n as i32 - 1) / fact
    }

    #[test]
    fn borel_examples() {
        let b = BorelLaw::new(0.5).unwrap();
        assert!((b.pmf(1) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((b.pmf(2) - (-1f64).exp() * 0.5).abs() < 1e-15);
        assert_eq!(b.pmf(0), 0.0);
        assert_eq!(BorelLaw::new(0.0).unwrap().pmf(1), 1.0);
        assert_eq!(BorelLaw::new(0.0).unwrap().pmf(2), 0.0);
        assert!(BorelLaw::new(-1.0).is_err());
    }

    #[test]
    fn log_space_matches_naive() {
        for mu in [0.1, 0.5, 1.0, 1.7, 2.5, 3.0] {
            let b = BorelLaw::new(mu).unwrap();
            for n in 1..=20 {
                let (a, e) = (b.pmf(n), naive_pmf(mu, n));
                assert!((a - e).abs() <= 1e-12 * e, "μ = {mu}, n = {n}");
            }
        }
    }

    #[test]
    fn partial_sums_and_defect() {
        for mu in [0.5, 0.9] {
            let b = BorelLaw::new(mu).unwrap();
            let s: f64 = (1..=1_000_000).map(|n| b.pmf(n)).sum();
            assert!((s - 1.0).abs() < 1e-6, "μ = {mu}: {s}");
        }
        let b = BorelLaw::new(2.0).unwrap();
        let s: f64 = (1..=2000).map(|n| b.pmf(n)).sum();
        assert!((1.0 - s - b.infinity_mass()).abs() < 1e-12);
        assert!((b.infinity_mass() - 0.7968121300200202).abs() < 1e-12);
    }

    #[test]
    fn tail_bound_sandwich() {
        for mu in [0.3, 0.8, 1.0, 1.5, 2.0, 3.0] {
            let b = BorelLaw::new(mu).unwrap();
            for n_max in [1u64, 5, 30, 200, 5000] {
                let s: f64 = (1..=n_max).map(|n| b.pmf(n)).sum::<f64>() + b.infinity_mass();
                assert!(s <= 1.0 + 1e-12, "μ = {mu}, n_max = {n_max}: {s}");
                assert!(s >= 1.0 - b.tail_bound(n_max) - 1e-12, "μ = {mu}, n_max = {n_max}");
            }
        }
    }

    #[test]
    fn first_passage_basics() {
        let mut rng = seeded_rng(1, 0);
        assert_eq!(simulate_first_passage(0.0, 10, &mut rng).unwrap(), FirstPassage::Extinct(1));
        assert!(simulate_first_passage(1.0, 0, &mut rng).is_err());
        assert_eq!(default_n_cap(0.5), 10_000);
        assert_eq!(default_n_cap(1.05), 20_000);
    }

    #[test]
    fn first_passage_matches_borel() {
        let mut rng = seeded_rng(2, 0);
        let runs = 100_000;
        let mut counts = [0u64; 21];
        for _ in 0..runs {
            if let FirstPassage::Extinct(n) = simulate_first_passage(0.5, 10_000, &mut rng).unwrap() {
                if n <= 20 {
                    counts[n as usize] += 1;
                }
            }
        }
        let b = BorelLaw::new(0.5).unwrap();
        let tv: f64 = 0.5
            * (1..=20)
                .map(|n| (counts[n] as f64 / runs as f64 - b.pmf(n as u64)).abs())
                .sum::<f64>();
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn supercritical_escape_frequency() {
        let mut rng = seeded_rng(3, 0);
        let runs = 100_000;
        let escaped = (0..runs)
            .filter(|_| simulate_first_passage(2.0, 10_000, &mut rng).unwrap().is_escaped())
            .count();
        let freq = escaped as f64 / runs as f64;
        assert!((freq - 0.7968121300200202).abs() < 0.01, "{freq}");
    }

    #[test]
    fn subcritical_escape_rate_tracks_borel_tail() {
        let runs = 100_000;
        let b = BorelLaw::new(0.9).unwrap();
        let mut prev = 1.0;
        for cap in [25u64, 50, 100, 200, 400] {
            let mut rng = seeded_rng(4, cap);
            let rate = (0..runs)
                .filter(|_| simulate_first_passage(0.9, cap, &mut rng).unwrap().is_escaped())
                .count() as f64
                / runs as f64;
            let tail = 1.0 - (1..=cap).map(|n| b.pmf(n)).sum::<f64>();
            let se = (tail * (1.0 - tail) / runs as f64).sqrt();
            assert!((rate - tail).abs() < 5.0 * se + 1e-5, "cap {cap}: {rate} vs {tail}");
            assert!(rate < prev);
            prev = rate;
        }
    }

    #[test]
    fn family_is_monotone_and_marginal() {
        let grid = [0.2, 0.4, 0.5, 0.8, 1.0];
        let mut rng = seeded_rng(5, 0);
        let mut single = seeded_rng(5, 1);
        let runs = 100_000;
        let mut fam_counts = [0u64; 21];
        let mut walk_counts = [0u64; 21];
        let mut escaped = 0;
        for _ in 0..runs {
            let fam = coupled_family(&grid, 1.0, 10_000, &mut rng).unwrap();
            assert!(fam.is_monotone(), "{fam:?}");
            if let Some(n) = fam.passages[1].steps().filter(|&n| n <= 20) {
                fam_counts[n as usize] += 1;
            }
            if let Some(n) = simulate_first_passage(0.8, 10_000, &mut single).unwrap().steps().filter(|&n| n <= 20) {
                walk_counts[n as usize] += 1;
            }
            escaped += fam.passages[4].is_escaped() as u64;
        }
        let tv: f64 = 0.5
            * (1..=20)
                .map(|n| (fam_counts[n] as f64 - walk_counts[n] as f64).abs() / runs as f64)
                .sum::<f64>();
        assert!(tv < 0.01, "tv = {tv}");
        let freq = escaped as f64 / runs as f64;
        assert!((freq - 0.7968121300200202).abs() < 0.01, "{freq}");
    }

    #[test]
    fn family_rejects_bad_grids() {
        let mut rng = seeded_rng(6, 0);
        assert!(coupled_family(&[0.5, 0.3], 1.0, 10, &mut rng).is_err());
        assert!(coupled_family(&[], 1.0, 10, &mut rng).is_err());
        assert!(coupled_family(&[0.5], 0.0, 10, &mut rng).is_err());
    }

    #[test]
    fn lambda2_values() {
        let rho = MixingDistribution::probability(vec![0.3, 0.5, 0.2]).unwrap();
        for big in [10usize, 100, 1_000_000] {
            let l = lambda2(&rho, big, 0);
            assert!((l - 2.0 * 0.5 / (big as f64 - 1.0)).abs() < 1e-12 * l);
        }
        // Two terms at n = 1: ρ₂/C(N,2) + ρ₃/C(N,3), times N.
        let big = 40.0f64;
        let expect = big * (0.5 / (big * (big - 1.0) / 2.0) + 0.2 / (big * (big - 1.0) * (big - 2.0) / 6.0));
        assert!((lambda2(&rho, 40, 1) - expect).abs() < 1e-14);
    }

    #[test]
    fn lambda2_settling() {
        // Only ρ₂ contributes here, so (N-6)λ₂(N,5) = 2ρ₂(N-6)/(N-1) and the
        // gap 10ρ₂/(N-1) is below 0.015 iff N - 1 > 10ρ₂/0.015.
        let sq = MixingDistribution::probability(vec![0.0, 1.0]).unwrap();
        assert_eq!(lambda2_settling_size(&sq, 5, 0.015, 100_000), Some(668));
        let rho = MixingDistribution::probability(vec![0.3, 0.7]).unwrap();
        assert_eq!(lambda2_settling_size(&rho, 5, 0.015, 1_000_000), Some(468));
        assert_eq!(lambda2_settling_size(&sq, 5, 0.015, 500), None);
    }

    #[test]
    fn chain_conservation() {
        let rho = MixingDistribution::probability(vec![0.3, 0.7]).unwrap();
        let mut rng = seeded_rng(7, 0);
        for _ in 0..2000 {
            let states = run_chain(ChainState::new(30, 3, 0), &rho, 0.4, 30, &mut rng).unwrap();
            for s in &states {
                assert!(s.z as usize >= s.n);
                assert!(s.n <= s.num_vertices);
            }
            let stop = states.iter().position(|s| s.is_stopped());
            if let Some(i) = stop {
                assert!(states[i..].iter().all(|s| *s == states[i]));
            }
        }
        assert!(matches!(
            chain_step(ChainState::new(30, 0, 0), &rho, 0.4, &mut rng),
            Err(Error::ChainStopped)
        ));
    }
}
