//! Configuration-driven Monte Carlo experiments.
//!
//! Each experiment samples independent trials in parallel, each on its own
//! seeded stream, and compares the outcome with analytic targets computed at
//! run time from [`crate::structure`] and [`crate::limits`]. A [`Report`] is
//! a pure function of its config: no timestamps, no thread-order effects.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collapse::{
    collapse, collapse_with_rng, domain_counts, dual_two_core, identifiable_counts, peel_two_core,
};
use crate::error::{Error, Result};
use crate::hypergraph::VertexId;
use crate::limits::{coupled_family, run_chain, BorelLaw, ChainState, FirstPassage};
use crate::mixing::MixingDistribution;
use crate::rng::{seeded_rng, stream_id, TrialRng};
use crate::sampler::{poisson, sample_process_with, sample_static_with};
use crate::stats::{compare_distributions, mean, quantile, Histogram};
use crate::structure::{
    graph_envelope, nonidentifiable_mean, FluidPrediction, StructureProfile,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Static Poisson(tρ) samples against the fluid atoms.
    StaticLimit,
    /// One process per trial, identifiability path on the time grid.
    ProcessPath,
    /// Static samples at the jump times of the lower envelope.
    JumpCoinflip,
    /// Small domains against the Borel law.
    DomainMicroscopic,
    /// Large-domain frequency and size against `g₂` and `g`.
    DomainMacroscopic,
    /// Random multigraphs: peeled 2-core against the dual-collapse core.
    CoreCheck,
    /// Random hypergraphs collapsed in several orders.
    OrderInvariance,
    /// Non-identifiable edge counts binned by the identifiable vertex count.
    ConditionalMean,
    /// The (patch, debris) chain against randomized-collapse traces.
    ChainVsCollapse,
    /// Coupled first-passage walks against `g₂`.
    CoupledWalks,
}

/// Pass/fail thresholds. Unset fields take the per-kind defaults of
/// [`Tolerances::for_kind`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Absolute error allowed on rescaled vertex and edge counts.
    pub abs: f64,
    /// Fraction of trials that must fall within `abs`.
    pub pass_fraction: f64,
    /// Distance from a trial to its cluster at a jump time.
    pub cluster: f64,
    /// Allowed range of the `g(s-)` cluster frequency.
    pub cluster_band: (f64, f64),
    /// Absolute error allowed on an event frequency.
    pub frequency: f64,
    /// Largest total-variation distance.
    pub tv: f64,
    /// Largest |z|-score.
    pub z: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            abs: 0.01,
            pass_fraction: 0.9,
            cluster: 0.05,
            cluster_band: (0.35, 0.65),
            frequency: 0.05,
            tv: 0.03,
            z: 4.0,
        }
    }
}

impl Tolerances {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let base = Tolerances::default();
        match kind {
            ExperimentKind::DomainMacroscopic => Tolerances { abs: 0.02, ..base },
            ExperimentKind::ChainVsCollapse => Tolerances { tv: 0.05, ..base },
            ExperimentKind::CoupledWalks => Tolerances {
                frequency: 0.01,
                ..base
            },
            _ => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Cardinality law `ρ`; entry `i` is the weight of cardinality `i + 1`.
    #[serde(default)]
    pub rho: Vec<f64>,
    /// Number of vertices (the maximum, for core-check and
    /// order-invariance).
    pub n: usize,
    /// Time grid. For core-check the entries are mean degrees; for
    /// jump-coinflip an empty grid means "every jump time".
    #[serde(default)]
    pub times: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    /// Chain length for chain-vs-collapse.
    #[serde(default)]
    pub steps: Option<usize>,
    /// Walk step cap for coupled-walks.
    #[serde(default)]
    pub n_cap: Option<u64>,
    #[serde(default = "yes")]
    pub keep_records: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, rho: Vec<f64>, n: usize, times: Vec<f64>, trials: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            kind,
            rho,
            n,
            times,
            trials,
            master_seed,
            tolerances: None,
            steps: None,
            n_cap: None,
            keep_records: true,
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if let Some(t) = self.times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Config(format!("times must be finite and non-negative, got {t}")));
        }
        if self.trials as u64 >= 1 << 48 {
            return Err(Error::Config("too many trials".into()));
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.unwrap_or_else(|| Tolerances::for_kind(self.kind))
    }

    fn mixing(&self) -> Result<MixingDistribution> {
        MixingDistribution::probability(self.rho.clone())
    }

    fn require_times(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::Config(format!("{:?} needs a non-empty time grid", self.kind)));
        }
        Ok(())
    }

    fn rng(&self, trial: usize, tag: u16) -> TrialRng {
        seeded_rng(self.master_seed, stream_id(trial as u64, tag))
    }
}

/// One check of a Monte Carlo summary against an analytic target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    /// Where the expected value comes from.
    pub target: String,
    pub expected: f64,
    pub observed: f64,
    /// Pass rule, e.g. `|observed - expected| <= 0.01`.
    pub rule: String,
    pub passed: bool,
}

impl Comparison {
    fn within(name: String, target: &str, expected: f64, observed: f64, tol: f64) -> Self {
        Comparison {
            name,
            target: target.into(),
            expected,
            observed,
            rule: format!("|observed - expected| <= {tol}"),
            passed: (observed - expected).abs() <= tol,
        }
    }

    fn at_least(name: String, target: &str, expected: f64, observed: f64, floor: f64) -> Self {
        Comparison {
            name,
            target: target.into(),
            expected,
            observed,
            rule: format!("observed >= {floor}"),
            passed: observed >= floor,
        }
    }

    fn at_most(name: String, target: &str, expected: f64, observed: f64, ceiling: f64) -> Self {
        Comparison {
            name,
            target: target.into(),
            expected,
            observed,
            rule: format!("observed <= {ceiling}"),
            passed: observed <= ceiling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    /// Column names of `records`, after the leading `trial` column.
    pub columns: Vec<String>,
    pub records: Vec<(u64, Vec<f64>)>,
    pub summaries: BTreeMap<String, f64>,
    pub comparisons: Vec<Comparison>,
    pub passed: bool,
}

impl Report {
    fn new(cfg: &ExperimentConfig, columns: &[&str]) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            kind: cfg.kind,
            config: cfg.clone(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            records: Vec::new(),
            summaries: BTreeMap::new(),
            comparisons: Vec::new(),
            passed: true,
        }
    }

    fn record(&mut self, keep: bool, trial: usize, values: Vec<f64>) {
        if keep {
            self.records.push((trial as u64, values));
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.comparisons.iter().all(|c| c.passed);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["trial".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (trial, values) in &self.records {
            let mut row = vec![trial.to_string()];
            row.extend(values.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_comparisons_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["name", "target", "expected", "observed", "rule", "passed"])?;
        for c in &self.comparisons {
            w.write_record([
                c.name.clone(),
                c.target.clone(),
                c.expected.to_string(),
                c.observed.to_string(),
                c.rule.clone(),
                c.passed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `report.json`, `records.csv` and `comparisons.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        self.write_records_csv(std::fs::File::create(dir.join("records.csv"))?)?;
        self.write_comparisons_csv(std::fs::File::create(dir.join("comparisons.csv"))?)?;
        Ok(())
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::StaticLimit | ExperimentKind::JumpCoinflip => run_static_limit(cfg),
        ExperimentKind::ProcessPath => run_process_path(cfg),
        ExperimentKind::DomainMicroscopic | ExperimentKind::DomainMacroscopic => run_domain_experiments(cfg),
        ExperimentKind::CoreCheck => run_core_check(cfg),
        ExperimentKind::OrderInvariance => run_order_invariance(cfg),
        ExperimentKind::ConditionalMean => run_conditional_mean(cfg),
        ExperimentKind::ChainVsCollapse => run_chain_vs_collapse(cfg),
        ExperimentKind::CoupledWalks => run_coupled_walks(cfg),
    }
}

fn par_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

fn require_patches(rho: &MixingDistribution) -> Result<()> {
    if rho.coeff(1) <= 0.0 {
        return Err(Error::Config("this experiment needs ρ₁ > 0".into()));
    }
    Ok(())
}

/// Checks `(T̃, Z̃)` samples at one time against a fluid prediction.
fn fluid_comparisons(label: &str, pred: &FluidPrediction, samples: &[(f64, f64)], tol: &Tolerances) -> Vec<Comparison> {
    let count = samples.len() as f64;
    let t = pred.t;
    match pred.atoms.as_slice() {
        [atom] => {
            let near_v = samples.iter().filter(|s| (s.0 - atom.vertices).abs() < tol.abs).count() as f64;
            let near_z = samples.iter().filter(|s| (s.1 - atom.edges).abs() < tol.abs).count() as f64;
            vec![
                Comparison::at_least(
                    format!("{label} t={t}: fraction of trials with |T/N - g(t)| < {}", tol.abs),
                    "g(t), lower envelope of the structure function",
                    atom.vertices,
                    near_v / count,
                    tol.pass_fraction,
                ),
                Comparison::at_least(
                    format!("{label} t={t}: fraction of trials with |Z/N - Z(g)| < {}", tol.abs),
                    "tρ(g) - (1-g)ln(1-g) at g = g(t)",
                    atom.edges,
                    near_z / count,
                    tol.pass_fraction,
                ),
            ]
        }
        [left, right] => {
            let mid = 0.5 * (left.vertices + right.vertices);
            let mut near = 0usize;
            let mut left_count = 0usize;
            for &(v, _) in samples {
                let atom = if v < mid { left } else { right };
                left_count += (v < mid) as usize;
                near += ((v - atom.vertices).abs() < tol.cluster) as usize;
            }
            let freq = left_count as f64 / count;
            vec![
                Comparison::at_least(
                    format!("{label} t={t}: fraction of trials within {} of g(t-) or g(t)", tol.cluster),
                    "jump endpoints g(t-), g(t) of the lower envelope",
                    1.0,
                    near as f64 / count,
                    1.0,
                ),
                Comparison {
                    name: format!("{label} t={t}: frequency of the g(t-) cluster (midpoint classifier)"),
                    target: "fair coin between g(t-) and g(t)".into(),
                    expected: left.probability,
                    observed: freq,
                    rule: format!("{} <= observed <= {}", tol.cluster_band.0, tol.cluster_band.1),
                    passed: (tol.cluster_band.0..=tol.cluster_band.1).contains(&freq),
                },
            ]
        }
        _ => Vec::new(),
    }
}

pub fn run_static_limit(cfg: &ExperimentConfig) -> Result<Report> {
    let rho = cfg.mixing()?;
    require_patches(&rho)?;
    let profile = StructureProfile::with_defaults(&rho)?;
    let times: Vec<f64> = if cfg.kind == ExperimentKind::JumpCoinflip && cfg.times.is_empty() {
        if profile.xi.is_empty() {
            return Err(Error::Config("the lower envelope has no jumps".into()));
        }
        profile.xi.iter().map(|j| j.s).collect()
    } else {
        cfg.require_times()?;
        cfg.times.clone()
    };
    let tol = cfg.tolerances();
    let mut report = Report::new(cfg, &["t", "vertices", "edges"]);
    for (ti, &t) in times.iter().enumerate() {
        let beta = rho.scaled(t);
        let samples = par_trials(cfg.trials, |trial| {
            let mut rng = cfg.rng(trial, ti as u16);
            let h = sample_static_with(&beta, cfg.n, &mut rng);
            let (v, e) = identifiable_counts(&h);
            (v as f64 / cfg.n as f64, e as f64 / cfg.n as f64)
        });
        for (trial, s) in samples.iter().enumerate() {
            report.record(cfg.keep_records, trial, vec![t, s.0, s.1]);
        }
        let pred = profile.fluid_prediction(t)?;
        let vs: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let zs: Vec<f64> = samples.iter().map(|s| s.1).collect();
        report.summaries.insert(format!("t={t} mean vertices"), mean(&vs).unwrap_or(0.0));
        report.summaries.insert(format!("t={t} mean edges"), mean(&zs).unwrap_or(0.0));
        report.comparisons.extend(fluid_comparisons("static", &pred, &samples, &tol));
    }
    Ok(report.finish())
}

pub fn run_process_path(cfg: &ExperimentConfig) -> Result<Report> {
    let rho = cfg.mixing()?;
    require_patches(&rho)?;
    cfg.require_times()?;
    let mut grid = cfg.times.clone();
    grid.sort_by(f64::total_cmp);
    let horizon = grid.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let profile = StructureProfile::with_defaults(&rho)?;
    let tol = cfg.tolerances();
    let paths = par_trials(cfg.trials, |trial| {
        let mut rng = cfg.rng(trial, 0);
        let seed = stream_id(trial as u64, 0);
        sample_process_with(&rho, cfg.n, horizon, seed, &mut rng)
            .and_then(|s| s.identifiability_path(&grid))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut report = Report::new(cfg, &["t", "vertices", "edges"]);
    let mut sup_dev = Vec::with_capacity(paths.len());
    let mut monotone = 0usize;
    for (trial, path) in paths.iter().enumerate() {
        let mut dev: f64 = 0.0;
        for p in path {
            report.record(cfg.keep_records, trial, vec![p.t, p.vertices, p.edges]);
            if profile.jump_at(p.t).is_none() {
                dev = dev.max((p.vertices - profile.lower(p.t)).abs());
            }
        }
        sup_dev.push(dev);
        monotone += path
            .windows(2)
            .all(|w| w[0].vertices <= w[1].vertices && w[0].edges <= w[1].edges) as usize;
    }
    for (i, &t) in grid.iter().enumerate() {
        let samples: Vec<(f64, f64)> = paths.iter().map(|p| (p[i].vertices, p[i].edges)).collect();
        let pred = profile.fluid_prediction(t)?;
        report.comparisons.extend(fluid_comparisons("path", &pred, &samples, &tol));
    }
    for q in [0.5, 0.9] {
        report
            .summaries
            .insert(format!("sup deviation q{q}"), quantile(&sup_dev, q).unwrap_or(0.0));
    }
    report.comparisons.push(Comparison::at_least(
        "fraction of monotone paths".into(),
        "identifiable sets only grow as edges arrive",
        1.0,
        monotone as f64 / paths.len() as f64,
        1.0,
    ));
    Ok(report.finish())
}

pub fn run_domain_experiments(cfg: &ExperimentConfig) -> Result<Report> {
    let rho = cfg.mixing()?;
    let rho2 = rho.coeff(2);
    if rho.coeff(1) != 0.0 || rho2 <= 0.0 {
        return Err(Error::Config("domain experiments need ρ₁ = 0 < ρ₂".into()));
    }
    cfg.require_times()?;
    let tol = cfg.tolerances();
    let profile = StructureProfile::with_defaults(&rho)?;
    let n = cfg.n as f64;
    let mut report = Report::new(cfg, &["t", "domain_vertices", "domain_edges"]);
    for (ti, &t) in cfg.times.iter().enumerate() {
        let beta = rho.scaled(t);
        let samples = par_trials(cfg.trials, |trial| {
            let mut rng = cfg.rng(trial, ti as u16);
            let h = sample_static_with(&beta, cfg.n, &mut rng);
            domain_counts(&h, VertexId(0))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        for (trial, &(v, e)) in samples.iter().enumerate() {
            report.record(cfg.keep_records, trial, vec![t, v as f64, e as f64]);
        }
        match cfg.kind {
            ExperimentKind::DomainMicroscopic => {
                let mu = 2.0 * t * rho2;
                let law = BorelLaw::new(mu)?;
                let hist: Histogram<u64> = samples.iter().map(|&(v, _)| v as u64).collect();
                let window = (1, 30);
                let cmp = compare_distributions(&hist, |k| law.pmf(k), window)?;
                report.summaries.insert(format!("t={t} mass outside window"), cmp.empirical_outside);
                report.comparisons.push(Comparison::at_most(
                    format!("t={t}: TV(domain size on 1..=30, Borel({mu}))"),
                    "Borel law e^{-μn}(μn)^{n-1}/n!, μ = 2tρ₂",
                    0.0,
                    cmp.tv,
                    tol.tv,
                ));
                let small: Vec<_> = samples.iter().filter(|&&(v, _)| v <= window.1 as usize).collect();
                if !small.is_empty() {
                    let tree_like = small.iter().filter(|&&&(v, e)| e + 1 == v).count();
                    report.comparisons.push(Comparison::at_least(
                        format!("t={t}: fraction of small domains with edges = vertices - 1"),
                        "domain size and edge count share the same small-scale limit",
                        1.0,
                        tree_like as f64 / small.len() as f64,
                        1.0 - tol.abs,
                    ));
                }
            }
            _ => {
                let pred = profile.macroscopic_prediction(t)?;
                let giant = pred.atoms[1];
                let threshold = n.powf(2.0 / 3.0);
                let large: Vec<(f64, f64)> = samples
                    .iter()
                    .filter(|&&(v, _)| v as f64 > threshold)
                    .map(|&(v, e)| (v as f64 / n, e as f64 / n))
                    .collect();
                let freq = large.len() as f64 / samples.len() as f64;
                report.comparisons.push(Comparison::within(
                    format!("t={t}: frequency of domains larger than N^(2/3)"),
                    "g₂(t), largest root of 2tρ₂x + ln(1-x) = 0",
                    graph_envelope(rho2, t),
                    freq,
                    tol.frequency,
                ));
                if !large.is_empty() {
                    let vs: Vec<f64> = large.iter().map(|s| s.0).collect();
                    let zs: Vec<f64> = large.iter().map(|s| s.1).collect();
                    report.comparisons.push(Comparison::within(
                        format!("t={t}: mean T/N over large domains"),
                        "g(t), lower envelope of the structure function",
                        giant.vertices,
                        mean(&vs).unwrap_or(0.0),
                        tol.abs,
                    ));
                    report.comparisons.push(Comparison::within(
                        format!("t={t}: mean Z/N over large domains"),
                        "tρ(g) - (1-g)ln(1-g) at g = g(t)",
                        giant.edges,
                        mean(&zs).unwrap_or(0.0),
                        tol.abs,
                    ));
                }
            }
        }
    }
    Ok(report.finish())
}

/// Mean degrees swept by core-check when no grid is given.
const DEFAULT_DEGREE_SWEEP: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0];

pub fn run_core_check(cfg: &ExperimentConfig) -> Result<Report> {
    use rand::Rng;
    let sweep: Vec<f64> = if cfg.times.is_empty() {
        DEFAULT_DEGREE_SWEEP.to_vec()
    } else {
        cfg.times.clone()
    };
    let outcomes = par_trials(cfg.trials, |trial| {
        let mut rng = cfg.rng(trial, 0);
        let n = rng.random_range(1..=cfg.n);
        let c = sweep[trial % sweep.len()];
        let beta = MixingDistribution::intensity(vec![0.0, c / 2.0]).expect("non-negative");
        let g = sample_static_with(&beta, n, &mut rng);
        let peeled = peel_two_core(&g)?;
        let dual = dual_two_core(&g)?;
        Ok((n, c, peeled.len(), peeled == dual))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut report = Report::new(cfg, &["n", "mean_degree", "core_size", "agree"]);
    let agree = outcomes.iter().filter(|o| o.3).count();
    for (trial, o) in outcomes.iter().enumerate() {
        report.record(cfg.keep_records, trial, vec![o.0 as f64, o.1, o.2 as f64, o.3 as u8 as f64]);
    }
    report.comparisons.push(Comparison::at_least(
        "fraction of graphs whose dual-collapse core equals the peeled core".into(),
        "2-core = complement of the dual's identifiable set",
        1.0,
        agree as f64 / outcomes.len() as f64,
        1.0,
    ));
    Ok(report.finish())
}

/// Collapse orders tried per hypergraph in order-invariance.
const ORDERS_PER_TRIAL: u64 = 10;

pub fn run_order_invariance(cfg: &ExperimentConfig) -> Result<Report> {
    use rand::Rng;
    let rho = if cfg.rho.is_empty() {
        MixingDistribution::probability(vec![0.25, 0.25, 0.25, 0.25])?
    } else {
        cfg.mixing()?
    };
    let scales: Vec<f64> = if cfg.times.is_empty() { vec![0.5, 1.0, 2.0] } else { cfg.times.clone() };
    let outcomes = par_trials(cfg.trials, |trial| {
        let mut rng = cfg.rng(trial, 0);
        let n = rng.random_range(1..=cfg.n);
        let t = scales[trial % scales.len()];
        let h = sample_static_with(&rho.scaled(t), n, &mut rng);
        let reference = collapse(&h, None);
        let key = (reference.identifiable_vertices.clone(), reference.identifiable_edge_count);
        let agree = (0..ORDERS_PER_TRIAL).all(|k| {
            let r = collapse_with_rng(&h, cfg.rng(trial, 1 + k as u16));
            (r.identifiable_vertices, r.identifiable_edge_count) == key
        });
        (n, key.0.len(), key.1, agree)
    });
    let mut report = Report::new(cfg, &["n", "identifiable_vertices", "identifiable_edges", "agree"]);
    for (trial, o) in outcomes.iter().enumerate() {
        report.record(cfg.keep_records, trial, vec![o.0 as f64, o.1 as f64, o.2 as f64, o.3 as u8 as f64]);
    }
    let agree = outcomes.iter().filter(|o| o.3).count();
    report.comparisons.push(Comparison::at_least(
        format!("fraction of hypergraphs with identical results over {ORDERS_PER_TRIAL} random orders"),
        "collapse outcome does not depend on the order",
        1.0,
        agree as f64 / outcomes.len() as f64,
        1.0,
    ));
    Ok(report.finish())
}

pub fn run_conditional_mean(cfg: &ExperimentConfig) -> Result<Report> {
    let rho = cfg.mixing()?;
    cfg.require_times()?;
    let tol = cfg.tolerances();
    let mut report = Report::new(cfg, &["t", "identifiable_vertices", "nonidentifiable_edges"]);
    for (ti, &t) in cfg.times.iter().enumerate() {
        let beta = rho.scaled(t);
        let samples = par_trials(cfg.trials, |trial| {
            let mut rng = cfg.rng(trial, ti as u16);
            let h = sample_static_with(&beta, cfg.n, &mut rng);
            let (v, e) = identifiable_counts(&h);
            (v, h.num_edges() - e)
        });
        let mut bins: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (trial, &(v, x)) in samples.iter().enumerate() {
            report.record(cfg.keep_records, trial, vec![t, v as f64, x as f64]);
            bins.entry(v).or_default().push(x as f64);
        }
        let mut worst: f64 = 0.0;
        for (&m, xs) in &bins {
            let expected = nonidentifiable_mean(&rho, cfg.n, t, m)?;
            let observed = mean(xs).unwrap_or(0.0);
            let z = if expected > 0.0 {
                (observed - expected) / (expected / xs.len() as f64).sqrt()
            } else if observed == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z.abs());
        }
        report.summaries.insert(format!("t={t} populated bins"), bins.len() as f64);
        report.comparisons.push(Comparison::at_most(
            format!("t={t}: largest |z| of binned non-identifiable edge means"),
            "conditional Poisson mean Nt Σ ρ_k [1 - (C(m,k) + (N-m)C(m,k-1))/C(N,k)]",
            0.0,
            worst,
            tol.z,
        ));
    }
    Ok(report.finish())
}

pub fn run_chain_vs_collapse(cfg: &ExperimentConfig) -> Result<Report> {
    let rho = cfg.mixing()?;
    cfg.require_times()?;
    let steps = cfg.steps.unwrap_or(5);
    let tol = cfg.tolerances();
    let n = cfg.n;
    let mut report = Report::new(cfg, &["t", "side", "n", "patches", "debris"]);
    for (ti, &t) in cfg.times.iter().enumerate() {
        let beta = rho.scaled(t);
        let chain_tag = (2 * ti) as u16;
        let chains = par_trials(cfg.trials, |trial| {
            let mut rng = cfg.rng(trial, chain_tag);
            let y0 = 1 + poisson(&mut rng, n as f64 * beta.coeff(1));
            run_chain(ChainState::new(n, y0, 0), &rho, t, steps, &mut rng)
                .map(|s| s.iter().map(|c| (c.y as usize, c.z as usize)).collect::<Vec<_>>())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let traces = par_trials(cfg.trials, |trial| -> Result<Vec<(usize, usize)>> {
            let mut rng = cfg.rng(trial, chain_tag + 1);
            let h = sample_static_with(&beta, n, &mut rng).with_edge(&[VertexId(0)])?;
            let trace = collapse_with_rng(&h, &mut rng).trace.expect("collapse records its trace");
            Ok((0..=steps).map(|k| trace.state_at(k)).collect())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        for (side, paths) in [(0.0, &chains), (1.0, &traces)] {
            for (trial, path) in paths.iter().enumerate() {
                for (k, &(y, z)) in path.iter().enumerate() {
                    report.record(cfg.keep_records, trial, vec![t, side, k as f64, y as f64, z as f64]);
                }
            }
        }
        for k in 1..=steps {
            let a: Histogram<(usize, usize)> = chains.iter().map(|p| p[k]).collect();
            let b: Histogram<(usize, usize)> = traces.iter().map(|p| p[k]).collect();
            report.comparisons.push(Comparison::at_most(
                format!("t={t} n={k}: TV of (Y, Z) between chain and collapse traces"),
                "patch/debris Markov chain with W ~ Bin(Y-1, 1/(N-n)), U ~ Poisson((N-n-1)tλ₂)",
                0.0,
                a.tv_distance(&b)?,
                tol.tv,
            ));
        }
    }
    Ok(report.finish())
}

pub fn run_coupled_walks(cfg: &ExperimentConfig) -> Result<Report> {
    let rho = cfg.mixing()?;
    cfg.require_times()?;
    let rho2 = rho.coeff(2);
    let n_cap = cfg.n_cap.unwrap_or(10_000);
    let tol = cfg.tolerances();
    let families = par_trials(cfg.trials, |trial| {
        coupled_family(&cfg.times, rho2, n_cap, &mut cfg.rng(trial, 0))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut report = Report::new(cfg, &["t", "m"]);
    for (trial, fam) in families.iter().enumerate() {
        for (&t, p) in fam.time_grid.iter().zip(&fam.passages) {
            let m = match p {
                FirstPassage::Extinct(k) => *k as f64,
                FirstPassage::Escaped => f64::INFINITY,
            };
            report.record(cfg.keep_records, trial, vec![t, m]);
        }
    }
    let monotone = families.iter().filter(|f| f.is_monotone()).count();
    report.comparisons.push(Comparison::at_least(
        "fraction of families with M_t non-decreasing in t".into(),
        "coupled walks share offspring arrivals",
        1.0,
        monotone as f64 / families.len() as f64,
        1.0,
    ));
    for (i, &t) in cfg.times.iter().enumerate() {
        let escaped = families.iter().filter(|f| f.passages[i].is_escaped()).count();
        report.comparisons.push(Comparison::within(
            format!("t={t}: escape frequency"),
            "g₂(t), largest root of 2tρ₂x + ln(1-x) = 0",
            graph_envelope(rho2, t),
            escaped as f64 / families.len() as f64,
            tol.frequency,
        ));
    }
    Ok(report.finish())
}
