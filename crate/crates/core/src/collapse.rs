//! Hypergraph collapse and the operations built on it.
//!
//! Collapse repeatedly picks a vertex carrying a patch, deletes it, and
//! shrinks every edge through it. The engine below tracks, per edge, how many
//! live vertices remain together with the XOR of their indices; when only one
//! live vertex is left the XOR is that vertex, so patches are located without
//! scanning. Total work is linear in the summed edge sizes (plus a log factor
//! for the deterministic selection heap).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, VertexId};
use crate::rng::seeded_rng;

/// One step of collapse: the vertex removed, and the patch count `Y_n` and
/// debris count `Z_n` after the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub vertex: VertexId,
    pub patches: usize,
    pub debris: usize,
}

/// The (Y_n, Z_n) path of a collapse run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapseTrace {
    /// Patch and debris counts before the first step.
    pub initial_patches: usize,
    pub initial_debris: usize,
    pub steps: Vec<TraceStep>,
}

impl CollapseTrace {
    /// T: the first `n` with `Y_n = 0`.
    pub fn stop_index(&self) -> usize {
        self.steps.len()
    }

    /// `(Y_n, Z_n)` for `n = 0..=T`.
    pub fn path(&self) -> Vec<(usize, usize)> {
        std::iter::once((self.initial_patches, self.initial_debris))
            .chain(self.steps.iter().map(|s| (s.patches, s.debris)))
            .collect()
    }

    /// `(Y_n, Z_n)`, frozen at the stopped state for `n > T`.
    pub fn state_at(&self, n: usize) -> (usize, usize) {
        match self.steps.get(n.min(self.steps.len()).wrapping_sub(1)) {
            Some(s) => (s.patches, s.debris),
            None => (self.initial_patches, self.initial_debris),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    /// V★, sorted.
    pub identifiable_vertices: Vec<VertexId>,
    /// Number of input edges contained in V★, with multiplicity. Initial
    /// debris counts.
    pub identifiable_edge_count: usize,
    /// Non-identifiable edges restricted to the surviving vertices. Vertex
    /// indices are those of the input.
    pub residual: Hypergraph,
    /// Input label of each residual edge.
    pub residual_labels: Vec<usize>,
    pub trace: Option<CollapseTrace>,
}

/// Selection rule for the next patch.
trait PatchPool {
    fn push(&mut self, edge: u32, vertex: u32);
    fn remove(&mut self, edge: u32);
    /// Next vertex to delete, or `None` when no patch remains.
    fn pick(&mut self, removed: &[bool], xor: &[u32]) -> Option<u32>;
}

/// Deterministic rule: lowest-index vertex carrying a patch.
#[derive(Default)]
struct LowestVertex {
    heap: BinaryHeap<Reverse<u32>>,
}

impl PatchPool for LowestVertex {
    fn push(&mut self, _edge: u32, vertex: u32) {
        self.heap.push(Reverse(vertex));
    }

    fn remove(&mut self, _edge: u32) {}

    fn pick(&mut self, removed: &[bool], _xor: &[u32]) -> Option<u32> {
        while let Some(Reverse(v)) = self.heap.pop() {
            if !removed[v as usize] {
                return Some(v);
            }
        }
        None
    }
}

const ABSENT: u32 = u32::MAX;

/// Randomized collapse: a patch token chosen uniformly, so a vertex is picked
/// with probability proportional to the number of patches on it.
struct UniformToken<R> {
    tokens: Vec<u32>,
    pos: Vec<u32>,
    rng: R,
}

impl<R: Rng> PatchPool for UniformToken<R> {
    fn push(&mut self, edge: u32, _vertex: u32) {
        let e = edge as usize;
        if e >= self.pos.len() {
            self.pos.resize(e + 1, ABSENT);
        }
        self.pos[e] = self.tokens.len() as u32;
        self.tokens.push(edge);
    }

    fn remove(&mut self, edge: u32) {
        let p = self.pos[edge as usize];
        debug_assert_ne!(p, ABSENT);
        let last = *self.tokens.last().unwrap();
        self.tokens.swap_remove(p as usize);
        if last != edge {
            self.pos[last as usize] = p;
        }
        self.pos[edge as usize] = ABSENT;
    }

    fn pick(&mut self, _removed: &[bool], xor: &[u32]) -> Option<u32> {
        if self.tokens.is_empty() {
            return None;
        }
        let i = self.rng.random_range(0..self.tokens.len());
        Some(xor[self.tokens[i] as usize])
    }
}

struct Engine<P> {
    removed: Vec<bool>,
    incidence: Vec<Vec<u32>>,
    live: Vec<u32>,
    xor: Vec<u32>,
    patches_on: Vec<u32>,
    removed_count: usize,
    debris: usize,
    patches: usize,
    pool: P,
}

impl<P: PatchPool> Engine<P> {
    fn new(num_vertices: usize, pool: P) -> Self {
        Engine {
            removed: vec![false; num_vertices],
            incidence: vec![Vec::new(); num_vertices],
            live: Vec::new(),
            xor: Vec::new(),
            patches_on: vec![0; num_vertices],
            removed_count: 0,
            debris: 0,
            patches: 0,
            pool,
        }
    }

    /// Adds an edge, ignoring vertices already deleted.
    fn add_edge(&mut self, edge: &[VertexId]) {
        let id = self.live.len() as u32;
        let mut live = 0u32;
        let mut xor = 0u32;
        for &v in edge {
            let v = v.0;
            if !self.removed[v as usize] {
                live += 1;
                xor ^= v;
                self.incidence[v as usize].push(id);
            }
        }
        self.live.push(live);
        self.xor.push(xor);
        match live {
            0 => self.debris += 1,
            1 => self.note_patch(id, xor),
            _ => {}
        }
    }

    fn note_patch(&mut self, edge: u32, vertex: u32) {
        self.patches += 1;
        self.patches_on[vertex as usize] += 1;
        self.pool.push(edge, vertex);
    }

    /// Deletes `v`; every patch on `v` turns into debris.
    fn remove_vertex(&mut self, v: u32) {
        let vi = v as usize;
        let on_v = self.patches_on[vi] as usize;
        debug_assert!(on_v >= 1);
        self.removed[vi] = true;
        self.removed_count += 1;
        self.patches_on[vi] = 0;
        self.patches -= on_v;
        for e in std::mem::take(&mut self.incidence[vi]) {
            let ei = e as usize;
            self.live[ei] -= 1;
            self.xor[ei] ^= v;
            match self.live[ei] {
                0 => {
                    self.debris += 1;
                    self.pool.remove(e);
                }
                1 => {
                    let w = self.xor[ei];
                    self.note_patch(e, w);
                }
                _ => {}
            }
        }
    }

    fn run(&mut self, mut trace: Option<&mut Vec<TraceStep>>) {
        while let Some(v) = self.pool.pick(&self.removed, &self.xor) {
            self.remove_vertex(v);
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceStep {
                    vertex: VertexId(v),
                    patches: self.patches,
                    debris: self.debris,
                });
            }
        }
        debug_assert_eq!(self.patches, 0);
    }

    fn load(&mut self, h: &Hypergraph) {
        self.live.reserve(h.num_edges());
        self.xor.reserve(h.num_edges());
        for e in h.edges() {
            self.add_edge(e);
        }
    }

    fn identifiable_vertices(&self) -> Vec<VertexId> {
        (0..self.removed.len() as u32)
            .filter(|&v| self.removed[v as usize])
            .map(VertexId)
            .collect()
    }
}

fn run_collapse<P: PatchPool>(h: &Hypergraph, pool: P) -> CollapseResult {
    let mut engine = Engine::new(h.num_vertices(), pool);
    engine.load(h);
    let initial_patches = engine.patches;
    let initial_debris = engine.debris;
    let mut steps = Vec::new();
    engine.run(Some(&mut steps));

    let mut residual = Hypergraph::new(h.num_vertices());
    let mut residual_labels = Vec::new();
    for (label, e) in h.edges().iter().enumerate() {
        if engine.live[label] > 0 {
            let kept: Vec<VertexId> = e
                .iter()
                .copied()
                .filter(|v| !engine.removed[v.index()])
                .collect();
            residual
                .insert_edge(&kept)
                .expect("subset of a valid edge is valid");
            residual_labels.push(label);
        }
    }

    CollapseResult {
        identifiable_vertices: engine.identifiable_vertices(),
        identifiable_edge_count: engine.debris,
        residual,
        residual_labels,
        trace: Some(CollapseTrace {
            initial_patches,
            initial_debris,
            steps,
        }),
    }
}

/// Runs hypergraph collapse.
///
/// With no seed the lowest-index patched vertex is deleted first. With a
/// seed, each step picks a patch token uniformly at random (randomized
/// collapse). V★ and the identifiable edge count do not depend on the
/// choice; only the trace does.
pub fn collapse(h: &Hypergraph, order_seed: Option<u64>) -> CollapseResult {
    match order_seed {
        None => run_collapse(h, LowestVertex::default()),
        Some(seed) => run_collapse(h, uniform_pool(seed_rng_for(seed))),
    }
}

/// Randomized collapse driven by a caller-supplied generator.
pub fn collapse_with_rng<R: Rng>(h: &Hypergraph, rng: R) -> CollapseResult {
    run_collapse(h, uniform_pool(rng))
}

fn seed_rng_for(seed: u64) -> impl Rng {
    seeded_rng(seed, 0)
}

fn uniform_pool<R: Rng>(rng: R) -> UniformToken<R> {
    UniformToken {
        tokens: Vec::new(),
        pos: Vec::new(),
        rng,
    }
}

/// `(|V★|, identifiable edge count)` without building the residual.
pub fn identifiable_counts(h: &Hypergraph) -> (usize, usize) {
    let mut engine = Engine::new(h.num_vertices(), LowestVertex::default());
    engine.load(h);
    engine.run(None);
    (engine.removed_count, engine.debris)
}

/// Vertices and edges identifiable from a single extra patch on `v0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub vertices: Vec<VertexId>,
    /// Identifiable edges of the input; the added patch is not counted.
    pub identifiable_edge_count: usize,
}

impl Domain {
    pub fn size(&self) -> usize {
        self.vertices.len()
    }
}

/// Domain of `v0` in a patch-free hypergraph.
pub fn domain_of(h: &Hypergraph, v0: VertexId) -> Result<Domain> {
    let mut engine = domain_engine(h, v0)?;
    engine.run(None);
    Ok(Domain {
        vertices: engine.identifiable_vertices(),
        identifiable_edge_count: engine.debris - 1,
    })
}

/// `(domain size, identifiable edge count)` without materializing the set.
pub fn domain_counts(h: &Hypergraph, v0: VertexId) -> Result<(usize, usize)> {
    let mut engine = domain_engine(h, v0)?;
    engine.run(None);
    Ok((engine.removed_count, engine.debris - 1))
}

fn domain_engine(h: &Hypergraph, v0: VertexId) -> Result<Engine<LowestVertex>> {
    if v0.index() >= h.num_vertices() {
        return Err(Error::InvalidVertex {
            vertex: v0.index(),
            num_vertices: h.num_vertices(),
        });
    }
    let patches = h.patch_count();
    if patches > 0 {
        return Err(Error::PatchesPresent(patches));
    }
    let mut engine = Engine::new(h.num_vertices(), LowestVertex::default());
    engine.load(h);
    engine.add_edge(&[v0]);
    Ok(engine)
}

fn require_graph(g: &Hypergraph) -> Result<()> {
    for (label, e) in g.edges().iter().enumerate() {
        if e.len() != 2 {
            return Err(Error::NotAGraph {
                label,
                cardinality: e.len(),
            });
        }
    }
    Ok(())
}

/// 2-core by peeling: repeatedly drop an edge at a degree-one vertex, then
/// keep the vertices that still have edges.
pub fn peel_two_core(g: &Hypergraph) -> Result<Vec<VertexId>> {
    require_graph(g)?;
    let n = g.num_vertices();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (label, e) in g.edges().iter().enumerate() {
        for v in e {
            incident[v.index()].push(label);
        }
    }
    let mut degree: Vec<usize> = incident.iter().map(Vec::len).collect();
    let mut alive = vec![true; g.num_edges()];
    let mut stack: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    while let Some(v) = stack.pop() {
        if degree[v] != 1 {
            continue;
        }
        let label = *incident[v]
            .iter()
            .find(|&&l| alive[l])
            .expect("degree one implies a live edge");
        alive[label] = false;
        for w in g.edges()[label].iter().map(|w| w.index()) {
            degree[w] -= 1;
            if degree[w] == 1 {
                stack.push(w);
            }
        }
    }
    Ok((0..n)
        .filter(|&v| degree[v] > 0)
        .map(|v| VertexId(v as u32))
        .collect())
}

/// 2-core through the dual: vertices whose dual edge survives collapse of
/// the dual hypergraph.
pub fn dual_two_core(g: &Hypergraph) -> Result<Vec<VertexId>> {
    require_graph(g)?;
    let result = collapse(&g.dual(), None);
    Ok(result
        .residual_labels
        .iter()
        .map(|&label| VertexId(label as u32))
        .collect())
}

/// The 2-core of a multigraph, computed by peeling and through the dual.
/// Panics if the two routes disagree.
pub fn two_core(g: &Hypergraph) -> Result<Vec<VertexId>> {
    let peeled = peel_two_core(g)?;
    let dual = dual_two_core(g)?;
    assert_eq!(peeled, dual, "peeling and dual collapse disagree on the 2-core");
    Ok(peeled)
}

/// Collapse maintained under edge insertion. Identifiable sets only grow as
/// edges are added, so each insertion costs time proportional to the new
/// edge plus whatever it makes identifiable.
pub struct IncrementalCollapse {
    engine: Engine<LowestVertex>,
}

impl IncrementalCollapse {
    pub fn new(num_vertices: usize) -> Self {
        IncrementalCollapse {
            engine: Engine::new(num_vertices, LowestVertex::default()),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.engine.removed.len()
    }

    /// Inserts an edge and collapses to a patch-free state. The edge must be
    /// canonical and in range.
    pub fn insert(&mut self, edge: &[VertexId]) {
        debug_assert!(edge.iter().all(|v| v.index() < self.num_vertices()));
        self.engine.add_edge(edge);
        if self.engine.patches > 0 {
            self.engine.run(None);
        }
    }

    pub fn identifiable_vertex_count(&self) -> usize {
        self.engine.removed_count
    }

    pub fn identifiable_edge_count(&self) -> usize {
        self.engine.debris
    }

    pub fn is_identifiable(&self, v: VertexId) -> bool {
        self.engine.removed[v.index()]
    }
}
