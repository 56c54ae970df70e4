//! Connected metric graphs made of bounded edges and half-lines.
//!
//! A graph is read from a JSON document of the form
//!
//! ```json
//! {
//!   "vertices": ["v1", "v2"],
//!   "edges": [
//!     {"id": "e1", "from": "v1", "to": "v2", "length": 4.0, "kind": "bounded", "nonlinear": true},
//!     {"id": "h1", "from": "v1", "to": null, "length": null, "kind": "half_line", "nonlinear": false}
//!   ]
//! }
//! ```
//!
//! Bounded edges carry the coordinate `x ∈ [0, ℓ]` running from `from` to
//! `to`; a half-line carries `x ∈ [0, ∞)` with its origin at `from`.

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeKind {
    Bounded { length: f64 },
    HalfLine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    /// Vertex at `x = 0`.
    pub from: usize,
    /// Vertex at `x = ℓ`; `None` for half-lines.
    pub to: Option<usize>,
    pub kind: EdgeKind,
    /// Whether the nonlinear term acts on this edge.
    pub nonlinear: bool,
}

impl Edge {
    pub fn length(&self) -> Option<f64> {
        match self.kind {
            EdgeKind::Bounded { length } => Some(length),
            EdgeKind::HalfLine => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.kind, EdgeKind::Bounded { .. })
    }

    pub fn is_half_line(&self) -> bool {
        !self.is_bounded()
    }
}

/// Serialized form of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    pub id: String,
    pub from: String,
    #[serde(default)]
    pub to: Option<String>,
    #[serde(default)]
    pub length: Option<f64>,
    pub kind: String,
    #[serde(default)]
    pub nonlinear: bool,
}

/// A validated, connected, noncompact metric graph with nonempty compact core.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    incident: Vec<Vec<usize>>,
}

impl MetricGraph {
    pub fn from_document(doc: &GraphDocument) -> Result<Self, GraphError> {
        let mut vertex_index = HashMap::new();
        for (i, v) in doc.vertices.iter().enumerate() {
            if vertex_index.insert(v.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(v.clone()));
            }
        }
        let lookup = |edge: &str, v: &str| {
            vertex_index.get(v).copied().ok_or_else(|| GraphError::UnknownVertex {
                edge: edge.to_string(),
                vertex: v.to_string(),
            })
        };

        let mut seen_edges = HashMap::new();
        let mut edges = Vec::with_capacity(doc.edges.len());
        for e in &doc.edges {
            if seen_edges.insert(e.id.clone(), ()).is_some() {
                return Err(GraphError::DuplicateEdge(e.id.clone()));
            }
            let from = lookup(&e.id, &e.from)?;
            let edge = match e.kind.as_str() {
                "bounded" => {
                    let (Some(to), Some(length)) = (&e.to, e.length) else {
                        return Err(GraphError::IncompleteBoundedEdge(e.id.clone()));
                    };
                    if !(length.is_finite() && length > 0.0) {
                        return Err(GraphError::NonpositiveLength(e.id.clone()));
                    }
                    Edge {
                        id: e.id.clone(),
                        from,
                        to: Some(lookup(&e.id, to)?),
                        kind: EdgeKind::Bounded { length },
                        nonlinear: e.nonlinear,
                    }
                }
                "half_line" => {
                    if e.to.is_some() || e.length.is_some() {
                        return Err(GraphError::MalformedHalfLine(e.id.clone()));
                    }
                    if e.nonlinear {
                        return Err(GraphError::NonlinearHalfLine(e.id.clone()));
                    }
                    Edge {
                        id: e.id.clone(),
                        from,
                        to: None,
                        kind: EdgeKind::HalfLine,
                        nonlinear: false,
                    }
                }
                other => return Err(GraphError::UnknownKind(other.to_string())),
            };
            edges.push(edge);
        }
        Self::new(doc.vertices.clone(), edges)
    }

    /// Validates and builds a graph from already-indexed parts.
    pub fn new(vertices: Vec<String>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let n = vertices.len();
        let mut incident = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if e.from >= n || e.to.is_some_and(|t| t >= n) {
                return Err(GraphError::Malformed(format!("edge `{}` has a vertex index out of range", e.id)));
            }
            match e.kind {
                EdgeKind::Bounded { length } => {
                    if !(length.is_finite() && length > 0.0) {
                        return Err(GraphError::NonpositiveLength(e.id.clone()));
                    }
                    if e.to.is_none() {
                        return Err(GraphError::IncompleteBoundedEdge(e.id.clone()));
                    }
                }
                EdgeKind::HalfLine => {
                    if e.to.is_some() {
                        return Err(GraphError::MalformedHalfLine(e.id.clone()));
                    }
                    if e.nonlinear {
                        return Err(GraphError::NonlinearHalfLine(e.id.clone()));
                    }
                }
            }
            incident[e.from].push(i);
            if let Some(t) = e.to {
                if t != e.from {
                    incident[t].push(i);
                }
            }
        }
        let g = Self { vertices, edges, incident };
        if g.vertices.is_empty() || !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        if !g.edges.iter().any(Edge::is_bounded) {
            return Err(GraphError::EmptyCore);
        }
        if !g.edges.iter().any(Edge::is_half_line) {
            return Err(GraphError::NoHalfLine);
        }
        if !g.edges.iter().any(|e| e.nonlinear) {
            return Err(GraphError::NoNonlinearEdge);
        }
        Ok(g)
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDocument {
                    id: e.id.clone(),
                    from: self.vertices[e.from].clone(),
                    to: e.to.map(|t| self.vertices[t].clone()),
                    length: e.length(),
                    kind: if e.is_bounded() { "bounded" } else { "half_line" }.to_string(),
                    nonlinear: e.nonlinear,
                })
                .collect(),
        }
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> &Edge {
        &self.edges[index]
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    /// Edges incident to a vertex (a self-loop is listed once).
    pub fn incident_edges(&self, vertex: usize) -> &[usize] {
        &self.incident[vertex]
    }

    pub fn degree(&self, vertex: usize) -> usize {
        self.incident[vertex]
            .iter()
            .map(|&e| if self.edges[e].to == Some(self.edges[e].from) { 2 } else { 1 })
            .sum()
    }

    pub fn half_lines(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_half_line()).map(|(i, _)| i)
    }

    pub fn nonlinear_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| e.nonlinear).map(|(i, _)| i)
    }

    pub fn shortest_bounded_length(&self) -> f64 {
        self.edges.iter().filter_map(Edge::length).fold(f64::INFINITY, f64::min)
    }

    fn is_connected(&self) -> bool {
        self.reachable_from(0, |_| true).iter().all(|&r| r)
    }

    fn reachable_from(&self, start: usize, use_edge: impl Fn(&Edge) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.vertices.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for &ei in &self.incident[v] {
                let e = &self.edges[ei];
                if !use_edge(e) {
                    continue;
                }
                for w in [Some(e.from), e.to].into_iter().flatten() {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        seen
    }

    /// Whether the bounded edges form a connected subgraph on the vertices
    /// they touch.
    pub fn core_is_connected(&self) -> bool {
        let touched: Vec<bool> = (0..self.vertices.len())
            .map(|v| self.incident[v].iter().any(|&e| self.edges[e].is_bounded()))
            .collect();
        let Some(start) = touched.iter().position(|&t| t) else {
            return false;
        };
        let seen = self.reachable_from(start, Edge::is_bounded);
        touched.iter().zip(&seen).all(|(&t, &s)| !t || s)
    }

    /// Two-vertex graph: one nonlinear edge of length `length` with a
    /// half-line attached at each end.
    pub fn dumbbell(length: f64) -> Result<Self, GraphError> {
        Self::path(&[length])
    }

    /// A straight chain of nonlinear bounded edges with a half-line at each end.
    pub fn path(lengths: &[f64]) -> Result<Self, GraphError> {
        let n = lengths.len();
        let vertices: Vec<String> = (1..=n + 1).map(|i| format!("v{i}")).collect();
        let mut edges = vec![Edge {
            id: "h1".into(),
            from: 0,
            to: None,
            kind: EdgeKind::HalfLine,
            nonlinear: false,
        }];
        for (i, &length) in lengths.iter().enumerate() {
            edges.push(Edge {
                id: format!("e{}", i + 1),
                from: i,
                to: Some(i + 1),
                kind: EdgeKind::Bounded { length },
                nonlinear: true,
            });
        }
        edges.push(Edge {
            id: "h2".into(),
            from: n,
            to: None,
            kind: EdgeKind::HalfLine,
            nonlinear: false,
        });
        Self::new(vertices, edges)
    }
}

pub fn parse_graph(text: &str) -> Result<MetricGraph, GraphError> {
    let doc: GraphDocument = serde_json::from_str(text).map_err(|e| GraphError::Malformed(e.to_string()))?;
    MetricGraph::from_document(&doc)
}

/// Indices of the bounded edges.
pub fn compact_core(g: &MetricGraph) -> Vec<usize> {
    g.edges().iter().enumerate().filter(|(_, e)| e.is_bounded()).map(|(i, _)| i).collect()
}

/// Longest bounded edge; ties go to the smallest id in natural order.
pub fn longest_core_edge(g: &MetricGraph) -> (usize, f64) {
    longest_among(g, compact_core(g))
}

/// Longest edge carrying the nonlinearity, with the same tie-break.
pub fn longest_nonlinear_edge(g: &MetricGraph) -> (usize, f64) {
    longest_among(g, g.nonlinear_edges().collect())
}

fn longest_among(g: &MetricGraph, candidates: Vec<usize>) -> (usize, f64) {
    candidates
        .into_iter()
        .map(|i| (i, g.edge(i).length().expect("bounded")))
        .max_by(|a, b| {
            a.1.total_cmp(&b.1).then_with(|| natural_cmp(&g.edge(b.0).id, &g.edge(a.0).id))
        })
        .expect("nonempty compact core")
}

/// Orders identifiers so that embedded digit runs compare numerically
/// (`e2 < e10`).
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let mut ai = a.chars().peekable();
    let mut bi = b.chars().peekable();
    loop {
        match (ai.peek().copied(), bi.peek().copied()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let take = |it: &mut std::iter::Peekable<std::str::Chars>| {
                    let mut s = String::new();
                    while let Some(c) = it.peek().copied().filter(char::is_ascii_digit) {
                        s.push(c);
                        it.next();
                    }
                    s
                };
                let (na, nb) = (take(&mut ai), take(&mut bi));
                let (ta, tb) = (na.trim_start_matches('0'), nb.trim_start_matches('0'));
                let ord = ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb));
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(&y);
                }
                ai.next();
                bi.next();
            }
        }
    }
}
