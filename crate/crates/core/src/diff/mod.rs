//! Tree differencing between two contract versions.
//!
//! The matcher is the two-phase GumTree heuristic: a top-down pass anchors
//! the largest isomorphic subtrees, then a bottom-up pass pairs containers by
//! dice similarity and recovers matches among their remaining descendants.
//! From the final mapping an edit script (insert / delete / update / move) is
//! generated Chawathe-style, and each script operation is enriched into a
//! [`ChangeRecord`] carrying the location, enclosing function, identifiers
//! and source snippet the matching stage scores against findings.
//!
//! Scripts are correct but not guaranteed minimal; `apply_script` exists so
//! correctness can always be checked by replaying a script against the old
//! tree and comparing isomorphism hashes with the new one.

mod changes;
mod edit;
mod gumtree;

pub use changes::extract_changes;
pub use edit::{apply_script, edit_script, tree_hash, SimpleTree};
pub use gumtree::{bottom_up_match, top_down_match};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ast::{Ast, AstNode, NodeId, NodeKind, SourceSpan};

/// Matcher parameters. Defaults are the canonical GumTree settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffParams {
    /// Minimum subtree height considered by the top-down phase.
    pub min_height: u32,
    /// Dice threshold for accepting a bottom-up container pair.
    pub min_dice: f64,
    /// Maximum subtree size for running descendant recovery inside an
    /// accepted container pair.
    pub max_size: u32,
}

impl Default for DiffParams {
    fn default() -> Self {
        DiffParams { min_height: 2, min_dice: 0.5, max_size: 100 }
    }
}

/// An injective mapping between node ids of the old (v1) and new (v2) trees.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeMapping {
    fwd: BTreeMap<NodeId, NodeId>,
    rev: BTreeMap<NodeId, NodeId>,
}

impl NodeMapping {
    pub fn new() -> Self {
        NodeMapping::default()
    }

    /// Insert a pair; rejects (returns false) if either side is taken.
    pub fn insert(&mut self, v1_id: NodeId, v2_id: NodeId) -> bool {
        if self.fwd.contains_key(&v1_id) || self.rev.contains_key(&v2_id) {
            return false;
        }
        self.fwd.insert(v1_id, v2_id);
        self.rev.insert(v2_id, v1_id);
        true
    }

    pub fn to_v2(&self, v1_id: NodeId) -> Option<NodeId> {
        self.fwd.get(&v1_id).copied()
    }

    pub fn to_v1(&self, v2_id: NodeId) -> Option<NodeId> {
        self.rev.get(&v2_id).copied()
    }

    pub fn has_v1(&self, v1_id: NodeId) -> bool {
        self.fwd.contains_key(&v1_id)
    }

    pub fn has_v2(&self, v2_id: NodeId) -> bool {
        self.rev.contains_key(&v2_id)
    }

    pub fn contains(&self, v1_id: NodeId, v2_id: NodeId) -> bool {
        self.fwd.get(&v1_id) == Some(&v2_id)
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    /// Pairs in ascending (v1_id, v2_id) order.
    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.fwd.iter().map(|(a, b)| (*a, *b))
    }

    /// Both directions are functions; checked by construction, asserted here
    /// for tests.
    pub fn is_injective(&self) -> bool {
        self.fwd.len() == self.rev.len()
            && self.fwd.iter().all(|(a, b)| self.rev.get(b) == Some(a))
    }
}

/// The kind of an edit operation, used by change records and score tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeOp {
    Insert,
    Delete,
    Update,
    Move,
}

impl ChangeOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChangeOp::Insert => "insert",
            ChangeOp::Delete => "delete",
            ChangeOp::Update => "update",
            ChangeOp::Move => "move",
        }
    }
}

impl core::fmt::Display for ChangeOp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One edit-script operation.
///
/// Insert subjects reference v2 nodes; delete, update and move subjects
/// reference v1 nodes. Parents for insert and move are v2 ids (`None` means
/// the tree root position).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum EditOp {
    Insert { node: NodeId, parent: Option<NodeId>, position: usize },
    Delete { node: NodeId },
    Update { node: NodeId, old_label: String, new_label: String },
    Move { node: NodeId, parent: Option<NodeId>, position: usize },
}

impl EditOp {
    pub fn kind(&self) -> ChangeOp {
        match self {
            EditOp::Insert { .. } => ChangeOp::Insert,
            EditOp::Delete { .. } => ChangeOp::Delete,
            EditOp::Update { .. } => ChangeOp::Update,
            EditOp::Move { .. } => ChangeOp::Move,
        }
    }

    pub fn node(&self) -> NodeId {
        match self {
            EditOp::Insert { node, .. }
            | EditOp::Delete { node }
            | EditOp::Update { node, .. }
            | EditOp::Move { node, .. } => *node,
        }
    }
}

/// A semantically enriched edit operation: the unit the matcher scores
/// against findings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRecord {
    #[serde(rename = "id")]
    pub change_id: u32,
    pub op: ChangeOp,
    /// Representative 1-based line: the first line of the subject's span on
    /// its own side (v1 for deletes, v2 otherwise).
    pub line: u32,
    /// Last line of the span, duplicated flat for report consumers.
    pub end_line: u32,
    pub span: SourceSpan,
    #[serde(rename = "function")]
    pub function_name: Option<String>,
    pub node_kind: NodeKind,
    /// Identifier labels collected from the changed subtree.
    pub identifiers: BTreeSet<String>,
    /// Source excerpt of the span on the subject's side.
    pub snippet: String,
}

/// Height and isomorphism hash of a subtree.
///
/// Height is 1 for leaves. Two subtrees hash equal iff they are isomorphic
/// over (kind, label, child order), up to hash collision.
pub fn subtree_signature(node: &AstNode) -> (u32, u128) {
    use sha2::Digest;
    let mut height = 1;
    let mut hasher = sha2::Sha256::default();
    hasher.update(node.kind.tag().as_bytes());
    hasher.update([0u8]);
    hasher.update(node.label.as_bytes());
    hasher.update([1u8]);
    for child in &node.children {
        let (h, child_hash) = subtree_signature(child);
        height = height.max(h + 1);
        hasher.update(child_hash.to_le_bytes());
    }
    (height, digest_to_u128(hasher))
}

fn digest_to_u128(hasher: sha2::Sha256) -> u128 {
    use sha2::Digest;
    let bytes = hasher.finalize();
    let mut buf = [0u8; 16];
    buf.copy_from_slice(&bytes[..16]);
    u128::from_le_bytes(buf)
}

/// Dice similarity of two subtrees under a mapping:
/// `2·|mapped descendant pairs| / (|desc(t1)| + |desc(t2)|)`.
///
/// Descendants are proper (the nodes themselves excluded); two leaves have no
/// descendants and score 0.0.
pub fn dice(mapping: &NodeMapping, t1: &AstNode, t2: &AstNode) -> f64 {
    let d1 = t1.subtree_size() - 1;
    let d2 = t2.subtree_size() - 1;
    if d1 + d2 == 0 {
        return 0.0;
    }
    let t2_lo = t2.id + 1;
    let t2_hi = t2.id + 1 + d2; // exclusive
    let mut common = 0u32;
    for node in t1.preorder().skip(1) {
        if let Some(img) = mapping.to_v2(node.id) {
            if (t2_lo..t2_hi).contains(&img) {
                common += 1;
            }
        }
    }
    2.0 * common as f64 / (d1 + d2) as f64
}

/// Preorder-indexed view over an [`Ast`] used by the matcher phases.
///
/// Because ids are preorder, the subtree of node `i` is exactly the id range
/// `i .. i + size[i]`.
pub(crate) struct TreeIndex<'a> {
    pub nodes: Vec<&'a AstNode>,
    pub parent: Vec<Option<NodeId>>,
    pub height: Vec<u32>,
    pub size: Vec<u32>,
    pub hash: Vec<u128>,
}

impl<'a> TreeIndex<'a> {
    pub fn build(ast: &'a Ast) -> TreeIndex<'a> {
        let n = ast.node_count as usize;
        let mut index = TreeIndex {
            nodes: Vec::with_capacity(n),
            parent: alloc::vec![None; n],
            height: alloc::vec![1; n],
            size: alloc::vec![1; n],
            hash: alloc::vec![0; n],
        };
        // preorder collect keeping parent links
        fn walk<'a>(node: &'a AstNode, parent: Option<NodeId>, index: &mut TreeIndex<'a>) {
            debug_assert_eq!(node.id as usize, index.nodes.len());
            index.nodes.push(node);
            index.parent[node.id as usize] = parent;
            for child in &node.children {
                walk(child, Some(node.id), index);
            }
        }
        walk(&ast.root, None, &mut index);
        // bottom-up passes over reverse preorder
        for i in (0..n).rev() {
            let node = index.nodes[i];
            let mut height = 1;
            let mut size = 1;
            for child in &node.children {
                height = height.max(index.height[child.id as usize] + 1);
                size += index.size[child.id as usize];
            }
            index.height[i] = height;
            index.size[i] = size;
            use sha2::Digest;
            let mut hasher = sha2::Sha256::default();
            hasher.update(node.kind.tag().as_bytes());
            hasher.update([0u8]);
            hasher.update(node.label.as_bytes());
            hasher.update([1u8]);
            for child in &node.children {
                hasher.update(index.hash[child.id as usize].to_le_bytes());
            }
            index.hash[i] = digest_to_u128(hasher);
        }
        index
    }

    /// Proper descendant id range of `id` (exclusive of the node itself).
    pub fn descendants(&self, id: NodeId) -> core::ops::Range<NodeId> {
        id + 1..id + self.size[id as usize]
    }

    /// Dice over id ranges, the fast path used inside the matcher.
    pub fn dice_ids(&self, other: &TreeIndex<'_>, mapping: &NodeMapping, a: NodeId, b: NodeId) -> f64 {
        let d1 = self.size[a as usize] - 1;
        let d2 = other.size[b as usize] - 1;
        if d1 + d2 == 0 {
            return 0.0;
        }
        let range = other.descendants(b);
        let mut common = 0u32;
        for id in self.descendants(a) {
            if let Some(img) = mapping.to_v2(id) {
                if range.contains(&img) {
                    common += 1;
                }
            }
        }
        2.0 * common as f64 / (d1 + d2) as f64
    }
}

/// Run both matcher phases with the given parameters.
pub fn match_trees(v1: &Ast, v2: &Ast, params: &DiffParams) -> NodeMapping {
    let seed = top_down_match(v1, v2, params.min_height);
    bottom_up_match(v1, v2, seed, params.min_dice, params.max_size)
}

/// Full pipeline: match, script, enrich.
pub fn compute_changes(
    v1: &Ast,
    v2: &Ast,
    v1_source: &str,
    v2_source: &str,
    params: &DiffParams,
) -> (NodeMapping, Vec<EditOp>, Vec<ChangeRecord>) {
    let mapping = match_trees(v1, v2, params);
    let script = edit_script(v1, v2, &mapping);
    let records = extract_changes(&script, v1, v2, &mapping, v1_source, v2_source);
    (mapping, script, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_source;

    fn leaf(kind: NodeKind, label: &str) -> AstNode {
        AstNode::new(kind, label, SourceSpan::new(1, 0, 1, 1))
    }

    #[test]
    fn signature_leaf_has_height_one() {
        let node = leaf(NodeKind::Identifier, "x");
        let (height, _) = subtree_signature(&node);
        assert_eq!(height, 1);
    }

    #[test]
    fn signature_equal_for_isomorphic_trees_only() {
        let mut a = leaf(NodeKind::Block, "");
        a.children.push(leaf(NodeKind::Identifier, "x"));
        a.children.push(leaf(NodeKind::Literal, "1"));
        let mut b = leaf(NodeKind::Block, "");
        b.children.push(leaf(NodeKind::Identifier, "x"));
        b.children.push(leaf(NodeKind::Literal, "1"));
        assert_eq!(subtree_signature(&a).1, subtree_signature(&b).1);

        // one leaf label differs
        let mut c = leaf(NodeKind::Block, "");
        c.children.push(leaf(NodeKind::Identifier, "y"));
        c.children.push(leaf(NodeKind::Literal, "1"));
        assert_ne!(subtree_signature(&a).1, subtree_signature(&c).1);

        // child order matters
        let mut d = leaf(NodeKind::Block, "");
        d.children.push(leaf(NodeKind::Literal, "1"));
        d.children.push(leaf(NodeKind::Identifier, "x"));
        assert_ne!(subtree_signature(&a).1, subtree_signature(&d).1);
    }

    #[test]
    fn dice_hand_computed_cases() {
        // v1 subtree with 3 proper descendants, v2 with 5, 2 mapped pairs:
        // 2*2/(3+5) = 0.5
        let src1 = "contract C { function f() public { x = 1; } }";
        let src2 = "contract C { function f() public { x = 1; y = 2; } }";
        let a1 = parse_source(src1, "v1");
        let a2 = parse_source(src2, "v2");
        // hand-pick: block of f in each tree
        let block1 = a1.root.preorder().find(|n| n.kind == NodeKind::Block).unwrap();
        let block2 = a2.root.preorder().find(|n| n.kind == NodeKind::Block).unwrap();
        let d1 = block1.subtree_size() - 1;
        let d2 = block2.subtree_size() - 1;
        let mut mapping = NodeMapping::new();
        // map the two first descendants of each block pairwise
        let desc1: Vec<NodeId> = block1.preorder().skip(1).map(|n| n.id).collect();
        let desc2: Vec<NodeId> = block2.preorder().skip(1).map(|n| n.id).collect();
        mapping.insert(desc1[0], desc2[0]);
        mapping.insert(desc1[1], desc2[1]);
        let expect = 2.0 * 2.0 / (d1 + d2) as f64;
        assert!((dice(&mapping, block1, block2) - expect).abs() < 1e-12);

        // leaves score 0.0
        let l1 = leaf(NodeKind::Identifier, "x");
        let l2 = leaf(NodeKind::Identifier, "x");
        assert_eq!(dice(&NodeMapping::new(), &l1, &l2), 0.0);

        // fully mapped equal subtrees score 1.0
        let mut full = NodeMapping::new();
        for (a, b) in desc1.iter().zip(desc1.iter()) {
            full.insert(*a, *b);
        }
        let ast_same = parse_source(src1, "v2");
        let block_same = ast_same.root.preorder().find(|n| n.kind == NodeKind::Block).unwrap();
        let mut identity = NodeMapping::new();
        for n in block1.preorder().skip(1) {
            identity.insert(n.id, n.id);
        }
        assert!((dice(&identity, block1, block_same) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mapping_rejects_non_injective_inserts() {
        let mut m = NodeMapping::new();
        assert!(m.insert(1, 2));
        assert!(!m.insert(1, 3));
        assert!(!m.insert(4, 2));
        assert!(m.insert(4, 5));
        assert!(m.is_injective());
        assert_eq!(m.len(), 2);
    }
}
