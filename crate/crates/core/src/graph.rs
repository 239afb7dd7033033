//! Decorated quotient graphs: a spanning tree plus extra edges, every
//! vertex and edge carrying a finite abelian stabilizer. Volume, curvature,
//! contraction to reduced form, and the genus count via the discrete
//! Gauss-Bonnet identity |Q|·μ = g−1.

use crate::group::{self, GroupDesc};
use crate::rat::Rat;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    pub group: GroupDesc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub group: GroupDesc,
}

impl Edge {
    pub fn new(from: &str, to: &str, group: GroupDesc) -> Self {
        Edge {
            from: from.to_string(),
            to: to.to_string(),
            group,
        }
    }

    fn touches(&self, id: &str) -> bool {
        self.from == id || self.to == id
    }
}

/// Quotient graph of a group acting on a tree. `tree_edges` must span the
/// vertex set; `extra_edges` each add one generator to the fundamental
/// group and carry the order of the identified pair of subgroups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoratedGraph {
    pub p: u64,
    pub vertices: Vec<Vertex>,
    #[serde(default)]
    pub tree_edges: Vec<Edge>,
    #[serde(default)]
    pub extra_edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NonPrimeCharacteristic { p: u64 },
    DuplicateVertexId { id: String },
    UnknownEndpoint { edge: String, id: String },
    NotSpanningTree { reason: String },
    EdgeNotEmbeddable { edge: String, group: GroupDesc, vertex: String },
    NotCanonical { site: String, group: GroupDesc },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPrimeCharacteristic { p } => write!(f, "p={p} is not prime"),
            Violation::DuplicateVertexId { id } => write!(f, "duplicate vertex id {id}"),
            Violation::UnknownEndpoint { edge, id } => {
                write!(f, "{edge} references unknown vertex {id}")
            }
            Violation::NotSpanningTree { reason } => {
                write!(f, "tree_edges are not a spanning tree: {reason}")
            }
            Violation::EdgeNotEmbeddable { edge, group, vertex } => {
                write!(f, "{edge} group {group} does not embed in vertex {vertex}")
            }
            Violation::NotCanonical { site, group } => {
                write!(f, "{site} group {group} is not canonical for this characteristic")
            }
        }
    }
}

impl Serialize for Violation {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown vertex id {0}")]
    UnknownVertex(String),
    #[error("index {index} times volume {volume} is {product}, not an integer")]
    NonIntegralGenus { index: u64, volume: Rat, product: Rat },
    #[error("genus does not fit in 64 bits")]
    GenusOverflow,
}

/// Genus of the quotiented curve, with a flag for the g < 2 range where
/// the uniformization statements do not apply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genus {
    pub value: i64,
    pub low_genus: bool,
}

impl DecoratedGraph {
    /// Two vertices joined by a trivially decorated tree edge.
    pub fn segment(p: u64, a: GroupDesc, b: GroupDesc) -> Self {
        DecoratedGraph::path(p, &[a, b], &[GroupDesc::Trivial])
    }

    pub fn single(p: u64, g: GroupDesc) -> Self {
        DecoratedGraph::path(p, &[g], &[])
    }

    /// Path with vertices `groups` and tree edges `edge_groups` in order.
    pub fn path(p: u64, groups: &[GroupDesc], edge_groups: &[GroupDesc]) -> Self {
        assert_eq!(groups.len(), edge_groups.len() + 1, "path shape");
        let vertices = groups
            .iter()
            .enumerate()
            .map(|(i, g)| Vertex {
                id: format!("v{i}"),
                group: *g,
            })
            .collect();
        let tree_edges = edge_groups
            .iter()
            .enumerate()
            .map(|(i, g)| Edge::new(&format!("v{i}"), &format!("v{}", i + 1), *g))
            .collect();
        DecoratedGraph {
            p,
            vertices,
            tree_edges,
            extra_edges: vec![],
        }
    }

    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    fn group_of(&self, id: &str) -> Option<GroupDesc> {
        self.vertex(id).map(|v| v.group)
    }

    /// All edges, tree first, each tagged with a stable position label.
    fn labeled_edges(&self) -> impl Iterator<Item = (String, &Edge)> {
        let tree = self
            .tree_edges
            .iter()
            .enumerate()
            .map(|(i, e)| (format!("tree_edges[{i}]"), e));
        let extra = self
            .extra_edges
            .iter()
            .enumerate()
            .map(|(i, e)| (format!("extra_edges[{i}]"), e));
        tree.chain(extra)
    }

    /// Empty iff the graph satisfies every structural invariant.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !group::is_prime(self.p) {
            out.push(Violation::NonPrimeCharacteristic { p: self.p });
        }
        let mut seen = BTreeSet::new();
        for v in &self.vertices {
            if !seen.insert(v.id.as_str()) {
                out.push(Violation::DuplicateVertexId { id: v.id.clone() });
            }
        }
        for (label, e) in self.labeled_edges() {
            for end in [&e.from, &e.to] {
                if !seen.contains(end.as_str()) {
                    out.push(Violation::UnknownEndpoint {
                        edge: label.clone(),
                        id: end.clone(),
                    });
                }
            }
        }
        if let Some(reason) = self.spanning_tree_defect() {
            out.push(Violation::NotSpanningTree { reason });
        }
        if group::is_prime(self.p) {
            for v in &self.vertices {
                if !group::valid_in_char(&v.group, self.p) {
                    out.push(Violation::NotCanonical {
                        site: format!("vertex {}", v.id),
                        group: v.group,
                    });
                }
            }
            for (label, e) in self.labeled_edges() {
                if !group::valid_in_char(&e.group, self.p) {
                    out.push(Violation::NotCanonical {
                        site: label,
                        group: e.group,
                    });
                }
            }
        }
        for (label, e) in self.labeled_edges() {
            for end in [&e.from, &e.to] {
                if let Some(g) = self.group_of(end) {
                    if !group::admissible_subgroup(&e.group, &g) {
                        out.push(Violation::EdgeNotEmbeddable {
                            edge: label.clone(),
                            group: e.group,
                            vertex: end.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    fn spanning_tree_defect(&self) -> Option<String> {
        let n = self.vertices.len();
        if n == 0 {
            return Some("no vertices".to_string());
        }
        if self.tree_edges.len() != n - 1 {
            return Some(format!(
                "{} vertices need {} tree edges, found {}",
                n,
                n - 1,
                self.tree_edges.len()
            ));
        }
        let index: BTreeMap<&str, usize> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.as_str(), i))
            .collect();
        let mut adj = vec![Vec::new(); n];
        for e in &self.tree_edges {
            match (index.get(e.from.as_str()), index.get(e.to.as_str())) {
                (Some(&a), Some(&b)) => {
                    adj[a].push(b);
                    adj[b].push(a);
                }
                _ => return Some("tree edge with unknown endpoint".to_string()),
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            None
        } else {
            Some("tree_edges do not connect all vertices".to_string())
        }
    }

    /// μ = Σ_extra 1/f + Σ_tree 1/e − Σ 1/v. May be zero or negative.
    pub fn volume(&self) -> Rat {
        let extra: Rat = self.extra_edges.iter().map(|e| Rat::recip_of(e.group.order())).sum();
        extra + self.tree_volume()
    }

    /// μ of the tree part alone: Σ_tree 1/e − Σ 1/v.
    pub fn tree_volume(&self) -> Rat {
        let edges: Rat = self.tree_edges.iter().map(|e| Rat::recip_of(e.group.order())).sum();
        let verts: Rat = self.vertices.iter().map(|v| Rat::recip_of(v.group.order())).sum();
        edges - verts
    }

    /// c(v) = ½ Σ_{tree star} 1/|N_e| − 1/|N_v|. Curvatures sum to the
    /// tree volume, each tree edge splitting evenly between its endpoints.
    pub fn curvature(&self, id: &str) -> Result<Rat, GraphError> {
        let v = self
            .vertex(id)
            .ok_or_else(|| GraphError::UnknownVertex(id.to_string()))?;
        let mut star = Rat::zero();
        for e in &self.tree_edges {
            if e.from == id {
                star += &Rat::recip_of(e.group.order());
            }
            if e.to == id {
                star += &Rat::recip_of(e.group.order());
            }
        }
        Ok(star * Rat::new(1, 2) - Rat::recip_of(v.group.order()))
    }

    pub fn curvatures(&self) -> Vec<(String, Rat)> {
        self.vertices
            .iter()
            .map(|v| (v.id.clone(), self.curvature(&v.id).expect("own vertex")))
            .collect()
    }

    /// Contract every tree edge whose group has full order in an endpoint,
    /// absorbing that endpoint into the other. Leaves μ and the tree μ
    /// unchanged; the result has |N_v| > |N_e| at every incidence.
    pub fn reduce(&self) -> DecoratedGraph {
        let mut g = self.clone();
        loop {
            let target = g.tree_edges.iter().position(|e| {
                let ou = g.group_of(&e.from).map(|x| x.order());
                let ov = g.group_of(&e.to).map(|x| x.order());
                let oe = e.group.order();
                ou == Some(oe) || ov == Some(oe)
            });
            let Some(i) = target else { break };
            let e = g.tree_edges.remove(i);
            let ou = g.group_of(&e.from).expect("validated").order();
            let oe = e.group.order();
            let ov = g.group_of(&e.to).expect("validated").order();
            let (gone, survivor) = if ou == oe && ov == oe {
                let (a, b) = (e.from.clone(), e.to.clone());
                if a < b {
                    (b, a)
                } else {
                    (a, b)
                }
            } else if ou == oe {
                (e.from.clone(), e.to.clone())
            } else {
                (e.to.clone(), e.from.clone())
            };
            g.vertices.retain(|v| v.id != gone);
            let relink = |edge: &mut Edge| {
                if edge.from == gone {
                    edge.from = survivor.clone();
                }
                if edge.to == gone {
                    edge.to = survivor.clone();
                }
            };
            g.tree_edges.iter_mut().for_each(relink);
            g.extra_edges.iter_mut().for_each(relink);
        }
        g
    }

    /// True when no tree edge can be contracted.
    pub fn is_reduced(&self) -> bool {
        self.tree_edges.iter().all(|e| {
            let oe = e.group.order();
            self.group_of(&e.from).map(|g| g.order() > oe) == Some(true)
                && self.group_of(&e.to).map(|g| g.order() > oe) == Some(true)
        })
    }

    /// Genus of the curve uniformized by an index-`index` free subgroup:
    /// 1 + index·μ, defined only when that product is an integer.
    pub fn genus_from_index(&self, index: u64) -> Result<Genus, GraphError> {
        let volume = self.volume();
        let product = volume.scale(index);
        if !product.is_integer() {
            return Err(GraphError::NonIntegralGenus {
                index,
                volume,
                product,
            });
        }
        let value = (Rat::one() + product)
            .to_i64()
            .ok_or(GraphError::GenusOverflow)?;
        Ok(Genus {
            value,
            low_genus: value < 2,
        })
    }

    pub fn canonical_key(&self) -> String {
        canonical_key(self)
    }

    /// Short form like `Z2-Z3` or `D2-(Z2)-D2` for path trees; falls back
    /// to the canonical nested encoding otherwise.
    pub fn compact(&self) -> String {
        if let Some(s) = self.path_display() {
            return s;
        }
        self.canonical_key()
    }

    fn path_display(&self) -> Option<String> {
        if !self.extra_edges.is_empty() || self.vertices.len() != self.tree_edges.len() + 1 {
            return None;
        }
        if self.vertices.len() == 1 {
            return Some(self.vertices[0].group.to_string());
        }
        let mut deg: BTreeMap<&str, usize> = BTreeMap::new();
        let mut adj: BTreeMap<&str, Vec<(&str, GroupDesc)>> = BTreeMap::new();
        for e in &self.tree_edges {
            *deg.entry(e.from.as_str()).or_default() += 1;
            *deg.entry(e.to.as_str()).or_default() += 1;
            adj.entry(e.from.as_str()).or_default().push((e.to.as_str(), e.group));
            adj.entry(e.to.as_str()).or_default().push((e.from.as_str(), e.group));
        }
        if deg.values().any(|&d| d > 2) {
            return None;
        }
        let ends: Vec<&str> = deg
            .iter()
            .filter(|(_, &d)| d == 1)
            .map(|(&id, _)| id)
            .collect();
        if ends.len() != 2 {
            return None;
        }
        let walk = |start: &str| -> String {
            let mut out = self.group_of(start).expect("endpoint").to_string();
            let mut prev: Option<&str> = None;
            let mut cur = start;
            loop {
                let next = adj[cur].iter().find(|(w, _)| Some(*w) != prev);
                let Some(&(w, eg)) = next else { break };
                if eg.is_trivial() {
                    out.push('-');
                } else {
                    out.push_str(&format!("-({eg})-"));
                }
                out.push_str(&self.group_of(w).expect("path vertex").to_string());
                prev = Some(cur);
                cur = w;
            }
            out
        };
        let a = walk(ends[0]);
        let b = walk(ends[1]);
        Some(a.min(b))
    }
}

impl fmt::Display for DecoratedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.compact())
    }
}

/// Isomorphism key of the decorated tree part, invariant under vertex
/// relabeling. Extra edges are appended as a sorted multiset of groups,
/// which is enough for the tree-only uses here.
fn canonical_key(g: &DecoratedGraph) -> String {
    let n = g.vertices.len();
    let index: BTreeMap<&str, usize> = g
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.id.as_str(), i))
        .collect();
    let mut adj: Vec<Vec<(GroupDesc, usize)>> = vec![Vec::new(); n];
    for e in &g.tree_edges {
        if let (Some(&a), Some(&b)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) {
            adj[a].push((e.group, b));
            adj[b].push((e.group, a));
        }
    }
    fn enc(v: usize, parent: Option<usize>, g: &DecoratedGraph, adj: &[Vec<(GroupDesc, usize)>]) -> String {
        let mut kids: Vec<String> = adj[v]
            .iter()
            .filter(|(_, w)| Some(*w) != parent)
            .map(|(eg, w)| format!("[{}{}]", eg, enc(*w, Some(v), g, adj)))
            .collect();
        kids.sort();
        format!("{}({})", g.vertices[v].group, kids.concat())
    }
    let mut best: Option<String> = None;
    for r in 0..n {
        let s = enc(r, None, g, &adj);
        if best.as_ref().map(|b| s < *b).unwrap_or(true) {
            best = Some(s);
        }
    }
    let mut key = best.unwrap_or_default();
    if !g.extra_edges.is_empty() {
        let mut extras: Vec<String> = g.extra_edges.iter().map(|e| e.group.to_string()).collect();
        extras.sort();
        key.push_str(&format!("+extra[{}]", extras.join(",")));
    }
    key
}
