//! Poisson random hypergraphs and the Poisson hypergraph process.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::collapse::IncrementalCollapse;
use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, VertexId};
use crate::mixing::MixingDistribution;
use crate::rng::{seeded_rng, TrialRng};

/// Poisson variate; zero for a non-positive mean.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive Poisson mean");
    d.sample(rng) as u64
}

/// Uniform k-subsets of `0..n` by partial Fisher–Yates.
///
/// The permutation buffer is never reset: a partial shuffle of any
/// permutation yields a uniform k-prefix, so consecutive draws stay exact.
#[derive(Debug, Clone)]
pub struct SubsetSampler {
    perm: Vec<u32>,
}

impl SubsetSampler {
    pub fn new(n: usize) -> Self {
        SubsetSampler {
            perm: (0..n as u32).collect(),
        }
    }

    /// A uniform `k`-subset in canonical (sorted) order. Requires `k <= n`.
    pub fn sample<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) -> Vec<VertexId> {
        let n = self.perm.len();
        assert!(k <= n, "cannot draw {k} vertices out of {n}");
        for i in 0..k {
            let j = rng.random_range(i..n);
            self.perm.swap(i, j);
        }
        let mut out: Vec<VertexId> = self.perm[..k].iter().copied().map(VertexId).collect();
        out.sort_unstable();
        out
    }
}

/// Poisson(β) random hypergraph on `n` vertices: every `k`-subset carries a
/// Poisson number of copies with mean `n·β_k / C(n, k)`, independently.
///
/// Sampled by cardinality: `Poisson(n·β_k)` edges of size `k`, each a
/// uniform `k`-subset. Coefficients with `k > n` have no subsets and are
/// ignored.
pub fn sample_static_with<R: Rng + ?Sized>(
    beta: &MixingDistribution,
    n: usize,
    rng: &mut R,
) -> Hypergraph {
    let mut subsets = SubsetSampler::new(n);
    let mut edges = Vec::new();
    for k in 1..=beta.max_cardinality().min(n) {
        let count = poisson(rng, n as f64 * beta.coeff(k));
        edges.reserve(count as usize);
        for _ in 0..count {
            edges.push(subsets.sample(k, rng));
        }
    }
    Hypergraph::from_canonical_unchecked(n, edges)
}

pub fn sample_static(beta: &MixingDistribution, n: usize, seed: u64) -> Hypergraph {
    sample_static_with(beta, n, &mut seeded_rng(seed, 0))
}

/// One arrival of the hypergraph process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tau: f64,
    /// Drawn cardinality.
    pub k: usize,
    /// The hyperedge; empty when `k` exceeds the vertex count.
    pub edge: Vec<VertexId>,
}

impl Event {
    /// Whether the arrival produced a hyperedge.
    pub fn is_edge(&self, num_vertices: usize) -> bool {
        self.k <= num_vertices
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub horizon: f64,
    pub num_vertices: usize,
    pub seed: u64,
}

/// `(t, T̃, Z̃)`: identifiable vertices and edges at time `t`, divided by N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub vertices: f64,
    pub edges: f64,
}

/// Poisson(ρ) hypergraph process on `[0, horizon]`: a rate-`n` arrival clock,
/// each arrival drawing a cardinality from ρ and a uniform subset of that
/// size. Arrivals whose cardinality exceeds `n` stay in the stream with an
/// empty edge and contribute nothing to snapshots.
pub fn sample_process_with<R: Rng + ?Sized>(
    rho: &MixingDistribution,
    n: usize,
    horizon: f64,
    seed: u64,
    rng: &mut R,
) -> Result<EventStream> {
    if !rho.is_probability() {
        return Err(Error::Config(
            "the process needs a cardinality law summing to one".into(),
        ));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::DomainError(format!("horizon must be positive, got {horizon}")));
    }
    if n == 0 {
        return Err(Error::DomainError("the process needs at least one vertex".into()));
    }
    let gap = Exp::new(n as f64).expect("positive rate");
    let cardinality =
        WeightedIndex::new(rho.coeffs()).map_err(|e| Error::Config(e.to_string()))?;
    let mut subsets = SubsetSampler::new(n);
    let mut events = Vec::with_capacity((n as f64 * horizon * 1.05) as usize + 16);
    let mut tau = 0.0;
    loop {
        tau += gap.sample(rng);
        if tau > horizon {
            break;
        }
        let k = cardinality.sample(rng) + 1;
        let edge = if k <= n {
            subsets.sample(k, rng)
        } else {
            Vec::new()
        };
        events.push(Event { tau, k, edge });
    }
    Ok(EventStream {
        events,
        horizon,
        num_vertices: n,
        seed,
    })
}

pub fn sample_process(
    rho: &MixingDistribution,
    n: usize,
    horizon: f64,
    seed: u64,
) -> Result<EventStream> {
    let mut rng: TrialRng = seeded_rng(seed, 0);
    sample_process_with(rho, n, horizon, seed, &mut rng)
}

impl EventStream {
    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::DomainError(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Edges that arrived by time `t`, as an edge list.
    fn edges_until(&self, t: f64) -> impl Iterator<Item = &Vec<VertexId>> {
        let n = self.num_vertices;
        self.events
            .iter()
            .take_while(move |e| e.tau <= t)
            .filter(move |e| e.is_edge(n))
            .map(|e| &e.edge)
    }

    /// Λ_t: all hyperedges with arrival time at most `t`.
    pub fn snapshot_at(&self, t: f64) -> Result<Hypergraph> {
        self.check_time(t)?;
        let edges = self.edges_until(t).cloned().collect();
        Ok(Hypergraph::from_canonical_unchecked(self.num_vertices, edges))
    }

    /// Rescaled identifiable counts at each grid time, computed by
    /// collapsing incrementally as edges arrive.
    pub fn identifiability_path(&self, grid: &[f64]) -> Result<Vec<PathPoint>> {
        for &t in grid {
            self.check_time(t)?;
        }
        if grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::DomainError("time grid must be sorted".into()));
        }
        let n = self.num_vertices;
        let mut state = IncrementalCollapse::new(n);
        let mut next = self.events.iter().peekable();
        let mut out = Vec::with_capacity(grid.len());
        for &t in grid {
            while let Some(e) = next.next_if(|e| e.tau <= t) {
                if e.is_edge(n) {
                    state.insert(&e.edge);
                }
            }
            out.push(PathPoint {
                t,
                vertices: state.identifiable_vertex_count() as f64 / n as f64,
                edges: state.identifiable_edge_count() as f64 / n as f64,
            });
        }
        Ok(out)
    }

    /// Writes `tau,k,vertices` rows; vertices are `;`-separated.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau", "k", "vertices"])?;
        for e in &self.events {
            let vertices: Vec<String> = e.edge.iter().map(|v| v.to_string()).collect();
            w.write_record([e.tau.to_string(), e.k.to_string(), vertices.join(";")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(
        input: R,
        num_vertices: usize,
        horizon: f64,
        seed: u64,
    ) -> Result<EventStream> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["tau", "k", "vertices"] {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut events = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for row in r.records() {
            let row = row?;
            let parse_err = |what: &str| Error::Parse(format!("bad {what} in row {row:?}"));
            let tau: f64 = row[0].parse().map_err(|_| parse_err("tau"))?;
            let k: usize = row[1].parse().map_err(|_| parse_err("k"))?;
            let edge = if row[2].is_empty() {
                Vec::new()
            } else {
                row[2]
                    .split(';')
                    .map(|v| v.parse::<u32>().map(VertexId))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| parse_err("vertex list"))?
            };
            if !(tau > last && tau <= horizon) {
                return Err(Error::Parse(format!(
                    "arrival time {tau} not increasing or beyond horizon {horizon}"
                )));
            }
            last = tau;
            let expected = if k <= num_vertices { k } else { 0 };
            let canonical = edge.windows(2).all(|w| w[0] < w[1])
                && edge.iter().all(|v| v.index() < num_vertices);
            if edge.len() != expected || !canonical {
                return Err(parse_err("edge"));
            }
            events.push(Event { tau, k, edge });
        }
        Ok(EventStream {
            events,
            horizon,
            num_vertices,
            seed,
        })
    }
}
