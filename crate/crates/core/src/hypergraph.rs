//! Edge-labelled multiset hypergraphs.
//!
//! A [`Hypergraph`] stores its hyperedges as a flat list; the position of an
//! edge in the list is its label. Each edge is kept in canonical form (a
//! strictly increasing list of vertices), so the multiplicity of a vertex
//! subset is simply the number of equal entries in the list. Empty edges are
//! allowed and are called debris.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a vertex in `0..num_vertices`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
#[repr(transparent)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for VertexId {
    fn from(v: u32) -> Self {
        VertexId(v)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Convenience for building vertex lists in tests and examples.
pub fn vids(raw: &[u32]) -> Vec<VertexId> {
    raw.iter().copied().map(VertexId).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "HypergraphRepr", into = "HypergraphRepr")]
pub struct Hypergraph {
    num_vertices: usize,
    edges: Vec<Vec<VertexId>>,
}

#[derive(Serialize, Deserialize)]
struct HypergraphRepr {
    n: usize,
    edges: Vec<Vec<u32>>,
}

impl TryFrom<HypergraphRepr> for Hypergraph {
    type Error = Error;

    fn try_from(repr: HypergraphRepr) -> Result<Self> {
        let mut h = Hypergraph::new(repr.n);
        for e in repr.edges {
            h.insert_edge(&vids(&e))?;
        }
        Ok(h)
    }
}

impl From<Hypergraph> for HypergraphRepr {
    fn from(h: Hypergraph) -> Self {
        HypergraphRepr {
            n: h.num_vertices,
            edges: h
                .edges
                .into_iter()
                .map(|e| e.into_iter().map(|v| v.0).collect())
                .collect(),
        }
    }
}

impl Hypergraph {
    pub fn new(num_vertices: usize) -> Self {
        assert!(num_vertices <= u32::MAX as usize, "too many vertices");
        Hypergraph {
            num_vertices,
            edges: Vec::new(),
        }
    }

    pub fn from_edges<I, E>(num_vertices: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = E>,
        E: AsRef<[u32]>,
    {
        let mut h = Hypergraph::new(num_vertices);
        for e in edges {
            h.insert_edge(&vids(e.as_ref()))?;
        }
        Ok(h)
    }

    /// Builds a hypergraph from edges already known to be canonical and in
    /// range. Used by the samplers on their hot path.
    pub(crate) fn from_canonical_unchecked(
        num_vertices: usize,
        edges: Vec<Vec<VertexId>>,
    ) -> Self {
        debug_assert!(edges.iter().all(|e| {
            e.windows(2).all(|w| w[0] < w[1]) && e.iter().all(|v| v.index() < num_vertices)
        }));
        Hypergraph {
            num_vertices,
            edges,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in label order.
    pub fn edges(&self) -> &[Vec<VertexId>] {
        &self.edges
    }

    pub fn edge(&self, label: usize) -> Option<&[VertexId]> {
        self.edges.get(label).map(Vec::as_slice)
    }

    fn canonical(&self, vertices: &[VertexId]) -> Result<Vec<VertexId>> {
        let mut e = vertices.to_vec();
        e.sort_unstable();
        for w in e.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateVertex(w[0].index()));
            }
        }
        if let Some(&v) = e.last() {
            if v.index() >= self.num_vertices {
                return Err(Error::InvalidVertex {
                    vertex: v.index(),
                    num_vertices: self.num_vertices,
                });
            }
        }
        Ok(e)
    }

    /// Appends a hyperedge and returns its label.
    pub fn insert_edge(&mut self, vertices: &[VertexId]) -> Result<usize> {
        let e = self.canonical(vertices)?;
        self.edges.push(e);
        Ok(self.edges.len() - 1)
    }

    /// Value-style variant of [`Hypergraph::insert_edge`].
    pub fn with_edge(mut self, vertices: &[VertexId]) -> Result<Self> {
        self.insert_edge(vertices)?;
        Ok(self)
    }

    /// Λ(A): the number of labels whose edge equals `set`.
    pub fn multiplicity(&self, set: &[VertexId]) -> usize {
        let mut key = set.to_vec();
        key.sort_unstable();
        self.edges.iter().filter(|e| **e == key).count()
    }

    /// The full multiplicity map, keyed by canonical vertex list.
    pub fn multiplicities(&self) -> BTreeMap<Vec<VertexId>, usize> {
        let mut map = BTreeMap::new();
        for e in &self.edges {
            *map.entry(e.clone()).or_insert(0) += 1;
        }
        map
    }

    /// Total number of patches (edges of cardinality one).
    pub fn patch_count(&self) -> usize {
        self.edges.iter().filter(|e| e.len() == 1).count()
    }

    /// Number of debris edges (empty edges).
    pub fn debris_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_empty()).count()
    }

    pub fn is_patch_free(&self) -> bool {
        self.patch_count() == 0
    }

    /// Per-vertex degree (number of incident edge labels).
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices];
        for e in &self.edges {
            for v in e {
                deg[v.index()] += 1;
            }
        }
        deg
    }

    /// Λ^S: every edge `B` becomes `B \ S`, labels and vertex indices are
    /// kept. Edges that become empty remain as debris.
    pub fn restrict(&self, s: &[VertexId]) -> Result<Hypergraph> {
        let mut removed = vec![false; self.num_vertices];
        for &v in s {
            if v.index() >= self.num_vertices {
                return Err(Error::InvalidVertex {
                    vertex: v.index(),
                    num_vertices: self.num_vertices,
                });
            }
            removed[v.index()] = true;
        }
        let edges = self
            .edges
            .iter()
            .map(|e| e.iter().copied().filter(|v| !removed[v.index()]).collect())
            .collect();
        Ok(Hypergraph {
            num_vertices: self.num_vertices,
            edges,
        })
    }

    /// Transpose of the vertex/edge incidence relation. Vertex `i` of the
    /// dual is edge label `i` here; dual edge `v` lists the labels through
    /// vertex `v`.
    pub fn dual(&self) -> Hypergraph {
        let mut edges: Vec<Vec<VertexId>> = vec![Vec::new(); self.num_vertices];
        for (label, e) in self.edges.iter().enumerate() {
            for v in e {
                edges[v.index()].push(VertexId(label as u32));
            }
        }
        // Labels are visited in increasing order, so each dual edge is sorted.
        Hypergraph::new(self.edges.len()).with_raw_edges(edges)
    }

    fn with_raw_edges(mut self, edges: Vec<Vec<VertexId>>) -> Self {
        self.edges = edges;
        self
    }

    /// Λ ∧ 1: keeps the first occurrence of every distinct edge.
    pub fn simplify(&self) -> Hypergraph {
        let mut seen = HashSet::new();
        let edges = self
            .edges
            .iter()
            .filter(|e| seen.insert(e.as_slice()))
            .cloned()
            .collect();
        Hypergraph {
            num_vertices: self.num_vertices,
            edges,
        }
    }

    /// Line-oriented text form: `N <n>` then one edge per line. A blank line
    /// is a debris edge.
    pub fn to_text(&self) -> String {
        let mut out = format!("N {}\n", self.num_vertices);
        for e in &self.edges {
            let line: Vec<String> = e.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Hypergraph> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing `N <num_vertices>` header".into()))?;
        let mut parts = header.split_whitespace();
        let n = match (parts.next(), parts.next(), parts.next()) {
            (Some("N"), Some(n), None) => n
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad vertex count {n:?}: {e}")))?,
            _ => return Err(Error::Parse(format!("bad header line {header:?}"))),
        };
        let mut h = Hypergraph::new(n);
        for (lineno, line) in lines.enumerate() {
            let edge = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<u32>().map(VertexId).map_err(|e| {
                        Error::Parse(format!("line {}: bad vertex {tok:?}: {e}", lineno + 2))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            h.insert_edge(&edge)?;
        }
        Ok(h)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("hypergraph serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Hypergraph> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parses either the text or the JSON form, sniffing the first
    /// non-blank character.
    pub fn parse(text: &str) -> Result<Hypergraph> {
        if text.trim_start().starts_with('{') {
            Hypergraph::from_json(text)
        } else {
            Hypergraph::from_text(text)
        }
    }
}
