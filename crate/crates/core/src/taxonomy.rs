//! Rooted label taxonomy: root → main symbols → leaf labels.
//!
//! Mixture leaves hang under the main-symbol nodes of both their members, so
//! the graph is a DAG rather than a tree. Similarity between two non-mixture
//! leaves is derived from the height of their lowest common ancestor; for
//! pairs involving mixtures a closed-form target follows from expanding the
//! mixture columns as weighted sums of their member embeddings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::grammar::{HorizonLabel, MainSymbol};
use crate::math;

pub type NodeId = usize;

/// A node of the taxonomy graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Root,
    Main(MainSymbol),
    Leaf(HorizonLabel),
}

/// Height of a node: the longest downward path to a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeHeight {
    pub node: NodeId,
    pub height: usize,
}

/// How leaves are ordered in the embedding matrix.
///
/// Non-mixture leaves always come first, mixtures after. `Sorted` groups
/// non-mixture leaves by main symbol alphabetically and sorts lexicographically
/// within a group; `Listed` keeps the caller's order within each block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeafOrder {
    #[default]
    Sorted,
    Listed,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaxonomyError {
    #[error("taxonomy has no labels")]
    EmptyTaxonomy,
    #[error("duplicate label \"{label}\"")]
    DuplicateLabel { label: String },
    #[error("mixture \"{mixture}\" references member \"{member}\" which is not a non-mixture leaf")]
    DanglingMixtureParent { mixture: String, member: String },
    #[error("mixture \"{mixture}\" combines two members of the main symbol '{symbol}'")]
    MixtureSameMain { mixture: String, symbol: char },
    #[error("label \"{label}\" is not in the taxonomy")]
    LabelNotInTaxonomy { label: String },
    #[error("\"{label}\" is a mixture; LCA similarity is defined for non-mixture leaves")]
    MixtureNotAllowed { label: String },
}

/// The rooted label DAG together with a fixed leaf order.
#[derive(Debug, Clone)]
pub struct TaxonomyGraph {
    nodes: Vec<Node>,
    children: Vec<Vec<NodeId>>,
    parents: Vec<Vec<NodeId>>,
    heights: Vec<usize>,
    /// Leaf node ids in leaf order: non-mixture block first, then mixtures.
    leaves: Vec<NodeId>,
    leaf_lookup: BTreeMap<String, usize>,
    non_mixture_count: usize,
    /// For each mixture leaf position, the leaf positions of its two members.
    members: BTreeMap<usize, (usize, usize)>,
}

impl TaxonomyGraph {
    /// Builds the taxonomy with the default [`LeafOrder::Sorted`] layout.
    pub fn build(labels: &[HorizonLabel]) -> Result<Self, TaxonomyError> {
        Self::build_with_order(labels, LeafOrder::Sorted)
    }

    pub fn build_with_order(labels: &[HorizonLabel], order: LeafOrder) -> Result<Self, TaxonomyError> {
        if labels.is_empty() {
            return Err(TaxonomyError::EmptyTaxonomy);
        }
        let mut seen = BTreeSet::new();
        for label in labels {
            if !seen.insert(label.render()) {
                return Err(TaxonomyError::DuplicateLabel {
                    label: label.render(),
                });
            }
        }

        let mut simple: Vec<HorizonLabel> =
            labels.iter().filter(|l| !l.is_mixture()).cloned().collect();
        let mut mixtures: Vec<HorizonLabel> =
            labels.iter().filter(|l| l.is_mixture()).cloned().collect();
        if order == LeafOrder::Sorted {
            simple.sort_by_key(|l| (l.main_symbol().as_char(), l.render()));
            mixtures.sort_by_key(|l| l.render());
        }
        let non_mixture_count = simple.len();
        let ordered: Vec<HorizonLabel> = simple.into_iter().chain(mixtures).collect();

        let mains: BTreeSet<MainSymbol> = ordered[..non_mixture_count]
            .iter()
            .map(|l| l.main_symbol())
            .collect();

        // Node layout: root, then main-symbol nodes, then leaves in leaf order.
        let mut nodes = Vec::with_capacity(1 + mains.len() + ordered.len());
        nodes.push(Node::Root);
        let mut main_ids = BTreeMap::new();
        for main in &mains {
            main_ids.insert(*main, nodes.len());
            nodes.push(Node::Main(*main));
        }
        let mut leaves = Vec::with_capacity(ordered.len());
        let mut leaf_lookup = BTreeMap::new();
        for label in &ordered {
            let id = nodes.len();
            leaf_lookup.insert(label.render(), leaves.len());
            leaves.push(id);
            nodes.push(Node::Leaf(label.clone()));
        }

        let mut children = alloc::vec![Vec::new(); nodes.len()];
        let mut parents = alloc::vec![Vec::new(); nodes.len()];
        let link = |children: &mut Vec<Vec<NodeId>>, parents: &mut Vec<Vec<NodeId>>, p: NodeId, c: NodeId| {
            children[p].push(c);
            parents[c].push(p);
        };
        for id in main_ids.values() {
            link(&mut children, &mut parents, 0, *id);
        }
        let mut members = BTreeMap::new();
        for (pos, label) in ordered.iter().enumerate() {
            let leaf_id = leaves[pos];
            match label {
                HorizonLabel::Simple(s) => {
                    link(&mut children, &mut parents, main_ids[&s.main()], leaf_id);
                }
                HorizonLabel::Mixture(first, second) => {
                    if first.main() == second.main() {
                        return Err(TaxonomyError::MixtureSameMain {
                            mixture: label.render(),
                            symbol: first.main().as_char(),
                        });
                    }
                    for member in [first, second] {
                        let rendered = member.to_string();
                        let member_pos = *leaf_lookup.get(&rendered).filter(|p| **p < non_mixture_count).ok_or_else(|| {
                            TaxonomyError::DanglingMixtureParent {
                                mixture: label.render(),
                                member: rendered.clone(),
                            }
                        })?;
                        let main_id = main_ids[&member.main()];
                        link(&mut children, &mut parents, main_id, leaf_id);
                        let _ = member_pos;
                    }
                    let first_pos = leaf_lookup[&first.to_string()];
                    let second_pos = leaf_lookup[&second.to_string()];
                    members.insert(pos, (first_pos, second_pos));
                }
            }
        }

        let mut heights = alloc::vec![0usize; nodes.len()];
        for id in (0..nodes.len()).rev() {
            // Children always have larger ids than their parents, so one
            // reverse sweep computes longest downward paths.
            heights[id] = children[id]
                .iter()
                .map(|c| heights[*c] + 1)
                .max()
                .unwrap_or(0);
        }

        Ok(TaxonomyGraph {
            nodes,
            children,
            parents,
            heights,
            leaves,
            leaf_lookup,
            non_mixture_count,
            members,
        })
    }

    pub const ROOT: NodeId = 0;

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id]
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id]
    }

    pub fn height(&self, id: NodeId) -> usize {
        self.heights[id]
    }

    pub fn node_heights(&self) -> impl Iterator<Item = NodeHeight> + '_ {
        self.heights
            .iter()
            .enumerate()
            .map(|(node, height)| NodeHeight { node, height: *height })
    }

    /// Total number of leaves (non-mixture and mixture).
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Number of non-mixture leaves; also the embedding dimension.
    pub fn non_mixture_count(&self) -> usize {
        self.non_mixture_count
    }

    pub fn mixture_count(&self) -> usize {
        self.leaves.len() - self.non_mixture_count
    }

    pub fn main_symbols(&self) -> impl Iterator<Item = MainSymbol> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Main(m) => Some(*m),
            _ => None,
        })
    }

    /// Leaf label at a leaf-order position.
    pub fn leaf(&self, pos: usize) -> &HorizonLabel {
        match &self.nodes[self.leaves[pos]] {
            Node::Leaf(label) => label,
            _ => unreachable!("leaf ids point at leaf nodes"),
        }
    }

    pub fn leaf_node_id(&self, pos: usize) -> NodeId {
        self.leaves[pos]
    }

    pub fn leaf_labels(&self) -> impl Iterator<Item = &HorizonLabel> + '_ {
        (0..self.leaf_count()).map(|pos| self.leaf(pos))
    }

    /// Leaf-order position of a label, by rendered form.
    pub fn leaf_position(&self, rendered: &str) -> Option<usize> {
        self.leaf_lookup.get(rendered).copied()
    }

    pub fn is_mixture_pos(&self, pos: usize) -> bool {
        pos >= self.non_mixture_count
    }

    /// Member leaf positions of a mixture leaf.
    pub fn member_positions(&self, pos: usize) -> Option<(usize, usize)> {
        self.members.get(&pos).copied()
    }

    fn require_position(&self, label: &HorizonLabel) -> Result<usize, TaxonomyError> {
        self.leaf_position(&label.render())
            .ok_or_else(|| TaxonomyError::LabelNotInTaxonomy {
                label: label.render(),
            })
    }

    fn ancestors(&self, id: NodeId) -> BTreeSet<NodeId> {
        let mut set = BTreeSet::new();
        let mut stack = alloc::vec![id];
        while let Some(n) = stack.pop() {
            if set.insert(n) {
                stack.extend(self.parents[n].iter().copied());
            }
        }
        set
    }

    /// Height of the lowest common ancestor of two leaves.
    fn lca_height(&self, a: NodeId, b: NodeId) -> usize {
        let common: Vec<NodeId> = self.ancestors(a).intersection(&self.ancestors(b)).copied().collect();
        common
            .iter()
            .map(|n| self.heights[*n])
            .min()
            .expect("root is a common ancestor of any two nodes")
    }

    /// LCA-based similarity between two non-mixture leaves, in `[0, 1]`.
    ///
    /// The LCA height is normalized by the hierarchy height, so identical
    /// leaves score 1, siblings under one main symbol score 1/2 in the
    /// standard two-level hierarchy and leaves under different main symbols
    /// score 0.
    pub fn lca_similarity(&self, a: &HorizonLabel, b: &HorizonLabel) -> Result<f64, TaxonomyError> {
        for label in [a, b] {
            if label.is_mixture() {
                return Err(TaxonomyError::MixtureNotAllowed {
                    label: label.render(),
                });
            }
        }
        let pa = self.require_position(a)?;
        let pb = self.require_position(b)?;
        Ok(self.similarity_by_pos(pa, pb))
    }

    fn similarity_by_pos(&self, a: usize, b: usize) -> f64 {
        let lca = self.lca_height(self.leaves[a], self.leaves[b]);
        let max_height = self.heights[Self::ROOT];
        1.0 - lca as f64 / max_height as f64
    }

    /// The target inner product between the embeddings of any two leaves.
    ///
    /// Non-mixture pairs use the LCA similarity directly. Pairs involving a
    /// mixture expand the mixture embedding `(m1 + 2 m2) / sqrt(5)` by
    /// bilinearity, which yields the constants listed in
    /// [`PairRelation::flat_target`] for the two-level hierarchy.
    pub fn required_similarity(&self, a: &HorizonLabel, b: &HorizonLabel) -> Result<f64, TaxonomyError> {
        let pa = self.require_position(a)?;
        let pb = self.require_position(b)?;
        Ok(self.required_similarity_by_pos(pa, pb))
    }

    pub(crate) fn required_similarity_by_pos(&self, a: usize, b: usize) -> f64 {
        let sqrt5 = math::sqrt(5.0);
        match (self.member_positions(a), self.member_positions(b)) {
            (None, None) => self.similarity_by_pos(a, b),
            (None, Some((q1, q2))) => {
                (self.similarity_by_pos(a, q1) + 2.0 * self.similarity_by_pos(a, q2)) / sqrt5
            }
            (Some((p1, p2)), None) => {
                (self.similarity_by_pos(b, p1) + 2.0 * self.similarity_by_pos(b, p2)) / sqrt5
            }
            (Some((p1, p2)), Some((q1, q2))) => {
                (self.similarity_by_pos(p1, q1)
                    + 2.0 * self.similarity_by_pos(p1, q2)
                    + 2.0 * self.similarity_by_pos(p2, q1)
                    + 4.0 * self.similarity_by_pos(p2, q2))
                    / 5.0
            }
        }
    }

    /// Structural relation of a leaf pair; see [`PairRelation`].
    pub fn pair_relation(&self, a: &HorizonLabel, b: &HorizonLabel) -> Result<PairRelation, TaxonomyError> {
        let pa = self.require_position(a)?;
        let pb = self.require_position(b)?;
        Ok(self.pair_relation_by_pos(pa, pb))
    }

    pub(crate) fn pair_relation_by_pos(&self, a: usize, b: usize) -> PairRelation {
        if a == b {
            return PairRelation::SameLeaf;
        }
        let main_of = |pos: usize| self.leaf(pos).main_symbol();
        match (self.member_positions(a), self.member_positions(b)) {
            (None, None) => {
                if main_of(a) == main_of(b) {
                    PairRelation::MainSiblings
                } else {
                    PairRelation::DisjointMains
                }
            }
            (None, Some(members)) => self.simple_vs_mixture(a, members),
            (Some(members), None) => self.simple_vs_mixture(b, members),
            (Some((p1, p2)), Some((q1, q2))) => {
                #[derive(PartialEq, Clone, Copy)]
                enum Edge {
                    None,
                    SameMain,
                    Equal,
                }
                let edge = |x: usize, y: usize| {
                    if x == y {
                        Edge::Equal
                    } else if main_of(x) == main_of(y) {
                        Edge::SameMain
                    } else {
                        Edge::None
                    }
                };
                let (e11, e12, e21, e22) = (edge(p1, q1), edge(p1, q2), edge(p2, q1), edge(p2, q2));
                let straight = [e11, e22].iter().filter(|e| **e != Edge::None).count();
                let crossed = [e12, e21].iter().filter(|e| **e != Edge::None).count();
                match (straight, crossed) {
                    (0, 0) => PairRelation::DisjointMains,
                    (1, 0) => match (e11, e22) {
                        (Edge::Equal, _) => PairRelation::SharedFirstMember,
                        (Edge::SameMain, _) => PairRelation::AlignedFirstMains,
                        (_, Edge::Equal) => PairRelation::SharedSecondMember,
                        _ => PairRelation::AlignedSecondMains,
                    },
                    (0, 1) => {
                        if e12 == Edge::Equal || e21 == Edge::Equal {
                            PairRelation::SharedCrossMember
                        } else {
                            PairRelation::CrossedMains
                        }
                    }
                    (2, 0) => {
                        if e11 == Edge::SameMain && e22 == Edge::SameMain {
                            PairRelation::AlignedBothMains
                        } else {
                            PairRelation::Compound
                        }
                    }
                    (0, 2) => {
                        if e12 == Edge::SameMain && e21 == Edge::SameMain {
                            PairRelation::CrossedBothMains
                        } else {
                            PairRelation::Compound
                        }
                    }
                    _ => PairRelation::Compound,
                }
            }
        }
    }

    fn simple_vs_mixture(&self, simple: usize, (m1, m2): (usize, usize)) -> PairRelation {
        let main_of = |pos: usize| self.leaf(pos).main_symbol();
        if simple == m1 {
            PairRelation::FirstParent
        } else if simple == m2 {
            PairRelation::SecondParent
        } else if main_of(simple) == main_of(m1) {
            PairRelation::FirstParentSibling
        } else if main_of(simple) == main_of(m2) {
            PairRelation::SecondParentSibling
        } else {
            PairRelation::DisjointMains
        }
    }
}

/// Convenience wrapper around [`TaxonomyGraph::build`].
pub fn build_taxonomy(labels: &[HorizonLabel]) -> Result<TaxonomyGraph, TaxonomyError> {
    TaxonomyGraph::build(labels)
}

/// Structural relation between two taxonomy leaves.
///
/// For the standard two-level hierarchy every relation except [`Compound`]
/// pins the inner product of the pair's embeddings to a single constant; see
/// [`PairRelation::flat_target`]. `Compound` covers overlapping patterns
/// (e.g. mixtures sharing a member while the remaining members share a main
/// symbol) whose target is still well-defined via
/// [`TaxonomyGraph::required_similarity`], just not one of the named
/// constants.
///
/// [`Compound`]: PairRelation::Compound
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PairRelation {
    /// The same leaf twice.
    SameLeaf,
    /// No main symbol in common anywhere.
    DisjointMains,
    /// Two non-mixture leaves under the same main symbol.
    MainSiblings,
    /// The non-mixture leaf is the first member of the mixture.
    FirstParent,
    /// The non-mixture leaf is the second (dominant) member of the mixture.
    SecondParent,
    /// The non-mixture leaf shares a main symbol with the first member only.
    FirstParentSibling,
    /// The non-mixture leaf shares a main symbol with the second member only.
    SecondParentSibling,
    /// Two mixtures with the same second member.
    SharedSecondMember,
    /// Two mixtures with the same first member.
    SharedFirstMember,
    /// The first member of one mixture is the second member of the other.
    SharedCrossMember,
    /// Distinct first members sharing a main symbol.
    AlignedFirstMains,
    /// Both positions share main symbols, all members distinct.
    AlignedBothMains,
    /// One main symbol shared across positions, all members distinct.
    CrossedMains,
    /// Both main symbols shared across positions, all members distinct.
    CrossedBothMains,
    /// Distinct second members sharing a main symbol.
    AlignedSecondMains,
    /// Overlapping patterns not covered by the named cases.
    Compound,
}

impl PairRelation {
    /// The inner-product constant for this relation in a two-level hierarchy,
    /// or `None` for [`PairRelation::Compound`].
    pub fn flat_target(&self) -> Option<f64> {
        let sqrt5 = math::sqrt(5.0);
        Some(match self {
            PairRelation::SameLeaf => 1.0,
            PairRelation::DisjointMains => 0.0,
            PairRelation::MainSiblings => 0.5,
            PairRelation::FirstParent => 1.0 / sqrt5,
            PairRelation::SecondParent => 2.0 / sqrt5,
            PairRelation::FirstParentSibling => 1.0 / (2.0 * sqrt5),
            PairRelation::SecondParentSibling => 1.0 / sqrt5,
            PairRelation::SharedSecondMember => 4.0 / 5.0,
            PairRelation::SharedFirstMember => 1.0 / 5.0,
            PairRelation::SharedCrossMember => 2.0 / 5.0,
            PairRelation::AlignedFirstMains => 1.0 / 10.0,
            PairRelation::AlignedBothMains => 1.0 / 2.0,
            PairRelation::CrossedMains => 1.0 / 5.0,
            PairRelation::CrossedBothMains => 2.0 / 5.0,
            PairRelation::AlignedSecondMains => 2.0 / 5.0,
            PairRelation::Compound => return None,
        })
    }

    /// Short identifier used by verification reports.
    pub fn id(&self) -> &'static str {
        match self {
            PairRelation::SameLeaf => "same-leaf",
            PairRelation::DisjointMains => "disjoint-mains",
            PairRelation::MainSiblings => "main-siblings",
            PairRelation::FirstParent => "first-parent",
            PairRelation::SecondParent => "second-parent",
            PairRelation::FirstParentSibling => "first-parent-sibling",
            PairRelation::SecondParentSibling => "second-parent-sibling",
            PairRelation::SharedSecondMember => "shared-second-member",
            PairRelation::SharedFirstMember => "shared-first-member",
            PairRelation::SharedCrossMember => "shared-cross-member",
            PairRelation::AlignedFirstMains => "aligned-first-mains",
            PairRelation::AlignedBothMains => "aligned-both-mains",
            PairRelation::CrossedMains => "crossed-mains",
            PairRelation::CrossedBothMains => "crossed-both-mains",
            PairRelation::AlignedSecondMains => "aligned-second-mains",
            PairRelation::Compound => "compound",
        }
    }
}
