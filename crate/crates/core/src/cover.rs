//! Covering graphs attached to a surjection onto a finite abelian group Q.
//! Over each vertex sits one covering vertex per coset of the embedded
//! stabilizer, over each edge one covering edge per coset of the edge
//! group; extra edges glue with trivial twist because their conjugators
//! die in Q. The first Betti number of a connected cover is the rank of
//! the kernel, which is the genus count this construction cross-checks.

use crate::graph::DecoratedGraph;
use crate::group::GroupDesc;
use crate::rat::Rat;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Element of Q = ⊕ Z/m_i, one residue per factor.
pub type QElem = Vec<u64>;

const MAX_QUOTIENT_ORDER: u64 = 1 << 20;

/// Finite abelian quotient Q plus, per vertex id, the images in Q of that
/// vertex group's generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianQuotient {
    pub factors: Vec<u64>,
    #[serde(default)]
    pub embeddings: BTreeMap<String, Vec<QElem>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoverError {
    #[error("invalid quotient: {0}")]
    InvalidQuotient(String),
    #[error("quotient order {order} exceeds the supported bound")]
    QuotientTooLarge { order: u64 },
    #[error("graph fails validation with {violations} violation(s)")]
    InvalidGraph { violations: usize },
    #[error("vertex {vertex} has a nontrivial group but no embedding")]
    MissingEmbedding { vertex: String },
    #[error("embedding at vertex {vertex} is malformed: {reason}")]
    MalformedEmbedding { vertex: String, reason: String },
    #[error("embedding at vertex {vertex} is not injective: {reason}")]
    NonInjectiveEmbedding { vertex: String, reason: String },
    #[error("no subgroup of the stabilizer intersection at {edge} realizes edge group {group}")]
    NoCompatibleEdgeEmbedding { edge: String, group: GroupDesc },
    #[error("covering graph is disconnected")]
    DisconnectedCover,
    #[error("free factors must be nontrivial")]
    TrivialFreeFactor,
}

impl AbelianQuotient {
    pub fn new(factors: Vec<u64>) -> Self {
        AbelianQuotient {
            factors,
            embeddings: BTreeMap::new(),
        }
    }

    pub fn with_embedding(mut self, vertex: &str, images: Vec<QElem>) -> Self {
        self.embeddings.insert(vertex.to_string(), images);
        self
    }

    /// Q = product of the vertex groups in declaration order, each vertex
    /// embedded on its own block of factors.
    pub fn direct_sum(graph: &DecoratedGraph) -> Self {
        let mut factors = Vec::new();
        let mut blocks = Vec::new();
        for v in &graph.vertices {
            let orders = v.group.generator_orders();
            blocks.push((v.id.clone(), factors.len(), orders.len()));
            factors.extend(orders);
        }
        let total = factors.len();
        let mut q = AbelianQuotient::new(factors);
        for (id, offset, len) in blocks {
            let images = (0..len)
                .map(|i| {
                    let mut e = vec![0u64; total];
                    e[offset + i] = 1;
                    e
                })
                .collect();
            q.embeddings.insert(id, images);
        }
        q
    }

    pub fn order(&self) -> Result<u64, CoverError> {
        let mut order: u64 = 1;
        for &m in &self.factors {
            if m == 0 {
                return Err(CoverError::InvalidQuotient("zero factor".to_string()));
            }
            order = order
                .checked_mul(m)
                .filter(|&o| o <= MAX_QUOTIENT_ORDER)
                .ok_or(CoverError::QuotientTooLarge { order: u64::MAX })?;
        }
        Ok(order)
    }

    pub fn zero(&self) -> QElem {
        vec![0; self.factors.len()]
    }

    pub fn add(&self, a: &QElem, b: &QElem) -> QElem {
        a.iter()
            .zip(b)
            .zip(&self.factors)
            .map(|((x, y), m)| (x + y) % m)
            .collect()
    }

    pub fn reduce(&self, a: &QElem) -> QElem {
        a.iter().zip(&self.factors).map(|(x, m)| x % m).collect()
    }

    /// All elements in lexicographic order.
    pub fn elements(&self) -> Vec<QElem> {
        let mut out = vec![self.zero()];
        for (i, &m) in self.factors.iter().enumerate() {
            let prev = std::mem::take(&mut out);
            for e in prev {
                for v in 0..m {
                    let mut e2 = e.clone();
                    e2[i] = v;
                    out.push(e2);
                }
            }
        }
        out.sort();
        out
    }

    pub fn element_order(&self, a: &QElem) -> u64 {
        a.iter()
            .zip(&self.factors)
            .map(|(x, m)| m / num_integer::gcd(*x, *m))
            .fold(1, num_integer::lcm)
    }

    /// Subgroup generated by `gens`, as a sorted set.
    pub fn span(&self, gens: &[QElem]) -> BTreeSet<QElem> {
        let mut set = BTreeSet::new();
        set.insert(self.zero());
        let mut frontier = vec![self.zero()];
        while let Some(x) = frontier.pop() {
            for g in gens {
                let y = self.add(&x, g);
                if set.insert(y.clone()) {
                    frontier.push(y);
                }
            }
        }
        set
    }
}

/// Vertex and edge counts of the covering graph. The counts are
/// Σ_v |Q|/|image of G_v| and Σ_e |Q|/|image of G_e|.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveringGraph {
    pub vertex_count: u64,
    pub edge_count: u64,
    pub connected: bool,
}

/// Covering graph plus the deterministic choices that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverDetail {
    pub covering: CoveringGraph,
    pub quotient_order: u64,
    pub vertex_image_orders: BTreeMap<String, u64>,
    pub edge_images: Vec<EdgeImage>,
}

/// The subgroup of Q chosen for one edge, by generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeImage {
    pub edge: String,
    pub group: GroupDesc,
    pub generators: Vec<QElem>,
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

fn checked_embeddings(
    graph: &DecoratedGraph,
    q: &AbelianQuotient,
) -> Result<BTreeMap<String, Vec<QElem>>, CoverError> {
    let width = q.factors.len();
    let mut out = BTreeMap::new();
    for v in &graph.vertices {
        let expected = v.group.generator_orders();
        let images: Vec<QElem> = match q.embeddings.get(&v.id) {
            Some(imgs) => imgs.clone(),
            None if expected.is_empty() => vec![],
            None => {
                return Err(CoverError::MissingEmbedding {
                    vertex: v.id.clone(),
                })
            }
        };
        if images.len() != expected.len() {
            return Err(CoverError::MalformedEmbedding {
                vertex: v.id.clone(),
                reason: format!(
                    "group {} needs {} generator image(s), got {}",
                    v.group,
                    expected.len(),
                    images.len()
                ),
            });
        }
        let mut reduced = Vec::with_capacity(images.len());
        for (img, &gen_order) in images.iter().zip(&expected) {
            if img.len() != width {
                return Err(CoverError::MalformedEmbedding {
                    vertex: v.id.clone(),
                    reason: format!("image has {} residues, quotient has {} factors", img.len(), width),
                });
            }
            let img = q.reduce(img);
            let ord = q.element_order(&img);
            if gen_order % ord != 0 {
                return Err(CoverError::MalformedEmbedding {
                    vertex: v.id.clone(),
                    reason: format!(
                        "image order {ord} does not divide generator order {gen_order}, not a homomorphism"
                    ),
                });
            }
            reduced.push(img);
        }
        let image_order = q.span(&reduced).len() as u64;
        if image_order != v.group.order() {
            return Err(CoverError::NonInjectiveEmbedding {
                vertex: v.id.clone(),
                reason: format!(
                    "image subgroup has order {image_order}, group {} has order {}",
                    v.group,
                    v.group.order()
                ),
            });
        }
        out.insert(v.id.clone(), reduced);
    }
    Ok(out)
}

/// First subgroup of `ambient` isomorphic to `shape`, scanning candidate
/// generators in lexicographic order. None when `ambient` has no such
/// subgroup.
fn pick_subgroup(q: &AbelianQuotient, ambient: &BTreeSet<QElem>, shape: &GroupDesc) -> Option<Vec<QElem>> {
    match *shape {
        GroupDesc::Trivial => Some(vec![]),
        GroupDesc::Cyclic { n } => ambient
            .iter()
            .find(|x| q.element_order(x) == n)
            .map(|x| vec![x.clone()]),
        GroupDesc::Klein4 => pick_elementary(q, ambient, 2, 2),
        GroupDesc::ElemAb { p, r } => pick_elementary(q, ambient, p, r),
    }
}

fn pick_elementary(
    q: &AbelianQuotient,
    ambient: &BTreeSet<QElem>,
    p: u64,
    r: u32,
) -> Option<Vec<QElem>> {
    let mut gens: Vec<QElem> = Vec::new();
    let mut span = q.span(&gens);
    for x in ambient {
        if gens.len() == r as usize {
            break;
        }
        if q.element_order(x) == p && !span.contains(x) {
            gens.push(x.clone());
            span = q.span(&gens);
        }
    }
    (gens.len() == r as usize).then_some(gens)
}

/// Build the covering graph and report the choices made.
pub fn covering_graph_detail(
    graph: &DecoratedGraph,
    q: &AbelianQuotient,
) -> Result<CoverDetail, CoverError> {
    let violations = graph.validate();
    if !violations.is_empty() {
        return Err(CoverError::InvalidGraph {
            violations: violations.len(),
        });
    }
    let quotient_order = q.order()?;
    let embeddings = checked_embeddings(graph, q)?;

    let elements = q.elements();
    let elem_index: BTreeMap<&QElem, usize> = elements.iter().enumerate().map(|(i, e)| (e, i)).collect();

    // Per vertex: coset representative table over its image subgroup, and
    // the global index of each covering vertex.
    let mut rep_of: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut cover_index: BTreeMap<(String, usize), usize> = BTreeMap::new();
    let mut spans: BTreeMap<String, BTreeSet<QElem>> = BTreeMap::new();
    let mut vertex_image_orders = BTreeMap::new();
    let mut next = 0usize;
    for v in &graph.vertices {
        let h = q.span(&embeddings[&v.id]);
        vertex_image_orders.insert(v.id.clone(), h.len() as u64);
        let mut reps = vec![usize::MAX; elements.len()];
        for (i, x) in elements.iter().enumerate() {
            if reps[i] != usize::MAX {
                continue;
            }
            for off in &h {
                let y = q.add(x, off);
                reps[elem_index[&y]] = i;
            }
            cover_index.insert((v.id.clone(), i), next);
            next += 1;
        }
        spans.insert(v.id.clone(), h);
        rep_of.insert(v.id.clone(), reps);
    }
    let vertex_count = next as u64;

    let mut dsu = Dsu::new(next);
    let mut edge_count = 0u64;
    let mut edge_images = Vec::new();
    let labeled: Vec<(String, &crate::graph::Edge)> = graph
        .tree_edges
        .iter()
        .enumerate()
        .map(|(i, e)| (format!("tree_edges[{i}]"), e))
        .chain(
            graph
                .extra_edges
                .iter()
                .enumerate()
                .map(|(i, e)| (format!("extra_edges[{i}]"), e)),
        )
        .collect();
    for (label, e) in labeled {
        let inter: BTreeSet<QElem> = spans[&e.from].intersection(&spans[&e.to]).cloned().collect();
        let gens = pick_subgroup(q, &inter, &e.group).ok_or_else(|| {
            CoverError::NoCompatibleEdgeEmbedding {
                edge: label.clone(),
                group: e.group,
            }
        })?;
        let he = q.span(&gens);
        let mut seen = vec![false; elements.len()];
        for (i, x) in elements.iter().enumerate() {
            if seen[i] {
                continue;
            }
            for off in &he {
                seen[elem_index[&q.add(x, off)]] = true;
            }
            let a = cover_index[&(e.from.clone(), rep_of[&e.from][i])];
            let b = cover_index[&(e.to.clone(), rep_of[&e.to][i])];
            dsu.union(a, b);
            edge_count += 1;
        }
        edge_images.push(EdgeImage {
            edge: label,
            group: e.group,
            generators: gens,
        });
    }

    debug_assert_eq!(
        vertex_count,
        graph
            .vertices
            .iter()
            .map(|v| quotient_order / vertex_image_orders[&v.id])
            .sum::<u64>()
    );

    let root = dsu.find(0);
    let connected = (0..next).all(|i| dsu.find(i) == root);
    Ok(CoverDetail {
        covering: CoveringGraph {
            vertex_count,
            edge_count,
            connected,
        },
        quotient_order,
        vertex_image_orders,
        edge_images,
    })
}

pub fn covering_graph(graph: &DecoratedGraph, q: &AbelianQuotient) -> Result<CoveringGraph, CoverError> {
    covering_graph_detail(graph, q).map(|d| d.covering)
}

/// First Betti number E − V + 1 of a connected graph.
pub fn betti(c: &CoveringGraph) -> Result<u64, CoverError> {
    if !c.connected {
        return Err(CoverError::DisconnectedCover);
    }
    Ok(c.edge_count + 1 - c.vertex_count)
}

/// Rank (|A|−1)(|B|−1) of the kernel of A*B → A×B.
pub fn rank_free_product_kernel(a: &GroupDesc, b: &GroupDesc) -> Result<u64, CoverError> {
    if a.is_trivial() || b.is_trivial() {
        return Err(CoverError::TrivialFreeFactor);
    }
    Ok((a.order() - 1) * (b.order() - 1))
}

/// Both sides of |Q|·μ = g−1, computed independently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussBonnetReport {
    pub quotient_order: u64,
    pub volume: Rat,
    pub betti: u64,
    pub genus_minus_one: i64,
    pub index_times_volume: Rat,
    pub matches: bool,
}

pub fn check_gauss_bonnet(
    graph: &DecoratedGraph,
    q: &AbelianQuotient,
) -> Result<GaussBonnetReport, CoverError> {
    let cover = covering_graph(graph, q)?;
    let b = betti(&cover)?;
    let quotient_order = q.order()?;
    let volume = graph.volume();
    let index_times_volume = volume.scale(quotient_order);
    let genus_minus_one = b as i64 - 1;
    let matches = index_times_volume == Rat::int(genus_minus_one);
    Ok(GaussBonnetReport {
        quotient_order,
        volume,
        betti: b,
        genus_minus_one,
        index_times_volume,
        matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDesc::{Klein4, Trivial};

    fn c(n: u64) -> GroupDesc {
        GroupDesc::cyclic(n)
    }

    fn seg(a: GroupDesc, b: GroupDesc) -> DecoratedGraph {
        DecoratedGraph::segment(5, a, b)
    }

    #[test]
    fn quotient_basics() {
        let q = AbelianQuotient::new(vec![2, 3]);
        assert_eq!(q.order().unwrap(), 6);
        assert_eq!(q.elements().len(), 6);
        assert_eq!(q.element_order(&vec![1, 0]), 2);
        assert_eq!(q.element_order(&vec![1, 1]), 6);
        assert_eq!(q.element_order(&vec![0, 0]), 1);
        assert_eq!(q.span(&[vec![1, 1]]).len(), 6);
        assert_eq!(q.span(&[vec![0, 1]]).len(), 3);
        assert!(AbelianQuotient::new(vec![2, 0]).order().is_err());
    }

    #[test]
    fn segment_cover_over_cyclic_six() {
        let g = seg(c(2), c(3));
        let q = AbelianQuotient::new(vec![6])
            .with_embedding("v0", vec![vec![3]])
            .with_embedding("v1", vec![vec![2]]);
        let cover = covering_graph(&g, &q).unwrap();
        assert_eq!(cover.vertex_count, 5);
        assert_eq!(cover.edge_count, 6);
        assert!(cover.connected);
        assert_eq!(betti(&cover).unwrap(), 2);
    }

    #[test]
    fn segment_cover_over_direct_sum() {
        let g = seg(c(3), c(3));
        let q = AbelianQuotient::direct_sum(&g);
        assert_eq!(q.factors, vec![3, 3]);
        let cover = covering_graph(&g, &q).unwrap();
        assert_eq!((cover.vertex_count, cover.edge_count), (6, 9));
        assert_eq!(betti(&cover).unwrap(), 4);
    }

    #[test]
    fn point_cover() {
        let g = DecoratedGraph::single(5, c(2));
        let q = AbelianQuotient::new(vec![2]).with_embedding("v0", vec![vec![1]]);
        let cover = covering_graph(&g, &q).unwrap();
        assert_eq!((cover.vertex_count, cover.edge_count), (1, 0));
        assert_eq!(betti(&cover).unwrap(), 0);
    }

    #[test]
    fn loop_cover_counts_extra_edges() {
        let mut g = DecoratedGraph::single(5, c(3));
        g.extra_edges.push(crate::graph::Edge::new("v0", "v0", Trivial));
        let q = AbelianQuotient::new(vec![3]).with_embedding("v0", vec![vec![1]]);
        let cover = covering_graph(&g, &q).unwrap();
        assert_eq!((cover.vertex_count, cover.edge_count), (1, 3));
        assert_eq!(betti(&cover).unwrap(), 3);
        let rep = check_gauss_bonnet(&g, &q).unwrap();
        assert!(rep.matches);
    }

    #[test]
    fn disconnected_cover_is_rejected_by_betti() {
        let g = DecoratedGraph::single(5, Trivial);
        let q = AbelianQuotient::new(vec![2]);
        let cover = covering_graph(&g, &q).unwrap();
        assert!(!cover.connected);
        assert_eq!(betti(&cover), Err(CoverError::DisconnectedCover));
    }

    #[test]
    fn rejects_non_injective_embedding() {
        let g = DecoratedGraph::single(5, c(4));
        let q = AbelianQuotient::new(vec![4]).with_embedding("v0", vec![vec![2]]);
        assert!(matches!(
            covering_graph(&g, &q),
            Err(CoverError::NonInjectiveEmbedding { .. })
        ));
    }

    #[test]
    fn rejects_non_homomorphic_embedding() {
        let g = DecoratedGraph::single(5, c(2));
        let q = AbelianQuotient::new(vec![3]).with_embedding("v0", vec![vec![1]]);
        assert!(matches!(
            covering_graph(&g, &q),
            Err(CoverError::MalformedEmbedding { .. })
        ));
    }

    #[test]
    fn rejects_missing_embedding() {
        let g = DecoratedGraph::single(5, c(2));
        let q = AbelianQuotient::new(vec![2]);
        assert_eq!(
            covering_graph(&g, &q),
            Err(CoverError::MissingEmbedding {
                vertex: "v0".into()
            })
        );
    }

    #[test]
    fn rejects_edge_group_missing_from_intersection() {
        let g = DecoratedGraph::path(5, &[c(2), c(2)], &[c(2)]);
        assert!(g.validate().is_empty());
        let q = AbelianQuotient::new(vec![2, 2])
            .with_embedding("v0", vec![vec![1, 0]])
            .with_embedding("v1", vec![vec![0, 1]]);
        assert!(matches!(
            covering_graph(&g, &q),
            Err(CoverError::NoCompatibleEdgeEmbedding { .. })
        ));
    }

    #[test]
    fn shared_edge_group_collapses_cover() {
        // Same graph as above but both vertices land on the same Z/2.
        let g = DecoratedGraph::path(5, &[c(2), c(2)], &[c(2)]);
        let q = AbelianQuotient::new(vec![2])
            .with_embedding("v0", vec![vec![1]])
            .with_embedding("v1", vec![vec![1]]);
        let cover = covering_graph(&g, &q).unwrap();
        assert_eq!((cover.vertex_count, cover.edge_count), (2, 1));
        assert_eq!(betti(&cover).unwrap(), 0);
    }

    #[test]
    fn kernel_rank_closed_form() {
        assert_eq!(rank_free_product_kernel(&c(2), &c(3)).unwrap(), 2);
        assert_eq!(
            rank_free_product_kernel(&GroupDesc::elemab(3, 1), &GroupDesc::elemab(3, 1)).unwrap(),
            4
        );
        assert_eq!(rank_free_product_kernel(&Klein4, &c(4)).unwrap(), 9);
        assert_eq!(
            rank_free_product_kernel(&Trivial, &c(2)),
            Err(CoverError::TrivialFreeFactor)
        );
    }

    #[test]
    fn kernel_rank_matches_cover_betti() {
        let pairs = [
            (5, c(2), c(3)),
            (5, c(2), c(2)),
            (5, c(4), c(3)),
            (5, Klein4, c(4)),
            (5, Klein4, Klein4),
            (3, GroupDesc::elemab(3, 1), GroupDesc::elemab(3, 1)),
            (7, c(6), c(5)),
        ];
        for (p, a, b) in pairs {
            let g = DecoratedGraph::segment(p, a, b);
            let q = AbelianQuotient::direct_sum(&g);
            let cover = covering_graph(&g, &q).unwrap();
            assert_eq!(
                betti(&cover).unwrap(),
                rank_free_product_kernel(&a, &b).unwrap(),
                "{a}*{b}"
            );
        }
    }

    #[test]
    fn gauss_bonnet_examples() {
        let g = seg(c(2), c(3));
        let q = AbelianQuotient::new(vec![6])
            .with_embedding("v0", vec![vec![3]])
            .with_embedding("v1", vec![vec![2]]);
        let rep = check_gauss_bonnet(&g, &q).unwrap();
        assert!(rep.matches);
        assert_eq!(rep.genus_minus_one, 1);
        assert_eq!(rep.index_times_volume, Rat::one());

        let g = seg(c(3), c(3));
        let rep = check_gauss_bonnet(&g, &AbelianQuotient::direct_sum(&g)).unwrap();
        assert!(rep.matches);
        assert_eq!(rep.betti, 4);

        let g = DecoratedGraph::path(5, &[Klein4, Trivial, c(4)], &[Trivial, Trivial]);
        let rep = check_gauss_bonnet(&g, &AbelianQuotient::direct_sum(&g)).unwrap();
        assert!(rep.matches);
        assert_eq!(rep.quotient_order, 16);
        assert_eq!(rep.betti, 9);
        assert_eq!(rep.index_times_volume, Rat::int(8));
    }

    #[test]
    fn klein_edge_image_choice_is_deterministic() {
        let g = DecoratedGraph::path(5, &[Klein4, Klein4], &[c(2)]);
        let q = AbelianQuotient::direct_sum(&g);
        // Both blocks embed independently, so the intersection is trivial
        // and the edge group cannot land anywhere.
        assert!(matches!(
            covering_graph(&g, &q),
            Err(CoverError::NoCompatibleEdgeEmbedding { .. })
        ));
        // Sharing one generator across the blocks makes the first shared
        // involution the canonical edge image.
        let q = AbelianQuotient::new(vec![2, 2, 2])
            .with_embedding("v0", vec![vec![1, 0, 0], vec![0, 1, 0]])
            .with_embedding("v1", vec![vec![1, 0, 0], vec![0, 0, 1]]);
        let detail = covering_graph_detail(&g, &q).unwrap();
        assert_eq!(detail.edge_images[0].generators, vec![vec![1, 0, 0]]);
        // volume of the amalgam is 1/2 - 1/4 - 1/4 = 0, so the cover has
        // betti 1 and the curve genus 1.
        assert_eq!(betti(&detail.covering).unwrap(), 1);
        let rep = check_gauss_bonnet(&g, &q).unwrap();
        assert!(rep.matches);
        assert_eq!(rep.genus_minus_one, 0);
    }
}
