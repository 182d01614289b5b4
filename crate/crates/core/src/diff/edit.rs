//! Edit script generation and replay.
//!
//! `edit_script` turns a node mapping into an ordered Insert/Delete/Update/
//! Move sequence over a working copy of the old tree, so every recorded
//! position is valid at the moment its operation applies. `apply_script`
//! replays a script the same way from scratch; replaying onto v1 and hashing
//! the result against v2 is the correctness oracle for the generator.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use super::gumtree::lcs_pairs;
use super::{EditOp, NodeMapping};
use crate::ast::{Ast, AstNode, NodeId, NodeKind};

/// A bare (kind, label, children) tree, the output of script replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleTree {
    pub kind: NodeKind,
    pub label: String,
    pub children: Vec<SimpleTree>,
}

impl From<&AstNode> for SimpleTree {
    fn from(node: &AstNode) -> Self {
        SimpleTree {
            kind: node.kind.clone(),
            label: node.label.clone(),
            children: node.children.iter().map(SimpleTree::from).collect(),
        }
    }
}

/// Isomorphism hash of a [`SimpleTree`]; matches
/// [`super::subtree_signature`] on the equivalent [`AstNode`].
pub fn tree_hash(tree: &SimpleTree) -> u128 {
    use sha2::Digest;
    let mut hasher = sha2::Sha256::default();
    hasher.update(tree.kind.tag().as_bytes());
    hasher.update([0u8]);
    hasher.update(tree.label.as_bytes());
    hasher.update([1u8]);
    for child in &tree.children {
        hasher.update(tree_hash(child).to_le_bytes());
    }
    let bytes = hasher.finalize();
    let mut buf = [0u8; 16];
    buf.copy_from_slice(&bytes[..16]);
    u128::from_le_bytes(buf)
}

/// Mutable working tree. Slots `0..n1` mirror v1 ids; the sentinel parent of
/// the root sits at slot `n1`; inserted nodes take fresh slots above.
struct Work {
    kind: Vec<NodeKind>,
    label: Vec<String>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    sentinel: usize,
}

impl Work {
    fn from_ast(ast: &Ast) -> Work {
        let n = ast.node_count as usize;
        let mut work = Work {
            kind: alloc::vec![NodeKind::Other(String::new()); n + 1],
            label: alloc::vec![String::new(); n + 1],
            parent: alloc::vec![None; n + 1],
            children: alloc::vec![Vec::new(); n + 1],
            sentinel: n,
        };
        fn walk(node: &AstNode, parent: usize, work: &mut Work) {
            let slot = node.id as usize;
            work.kind[slot] = node.kind.clone();
            work.label[slot] = node.label.clone();
            work.parent[slot] = Some(parent);
            work.children[parent].push(slot);
            for child in &node.children {
                walk(child, slot, work);
            }
        }
        work.kind[n] = NodeKind::Other("sentinel".into());
        walk(&ast.root, n, &mut work);
        work
    }

    fn new_node(&mut self, kind: NodeKind, label: String) -> usize {
        let slot = self.kind.len();
        self.kind.push(kind);
        self.label.push(label);
        self.parent.push(None);
        self.children.push(Vec::new());
        slot
    }

    fn index_in_parent(&self, node: usize) -> Option<usize> {
        let p = self.parent[node]?;
        self.children[p].iter().position(|&c| c == node)
    }

    fn detach(&mut self, node: usize) {
        if let Some(p) = self.parent[node] {
            self.children[p].retain(|&c| c != node);
        }
        self.parent[node] = None;
    }

    /// Attach at `pos` clamped to the child count; returns the actual index.
    fn attach(&mut self, node: usize, parent: usize, pos: usize) -> usize {
        let pos = pos.min(self.children[parent].len());
        self.children[parent].insert(pos, node);
        self.parent[node] = Some(parent);
        pos
    }

    fn to_simple(&self, node: usize) -> SimpleTree {
        SimpleTree {
            kind: self.kind[node].clone(),
            label: self.label[node].clone(),
            children: self.children[node].iter().map(|&c| self.to_simple(c)).collect(),
        }
    }
}

/// Generate an edit script transforming v1 into a tree isomorphic to v2 under
/// the given (injective) mapping.
pub fn edit_script(v1: &Ast, v2: &Ast, mapping: &NodeMapping) -> Vec<EditOp> {
    let mut ops = Vec::new();
    let mut work = Work::from_ast(v1);
    let n1 = v1.node_count as usize;
    let sentinel_v2: NodeId = v2.node_count;

    // v2 structural tables
    let n2 = v2.node_count as usize;
    let mut v2_nodes: Vec<&AstNode> = Vec::with_capacity(n2);
    let mut v2_parent: Vec<Option<NodeId>> = alloc::vec![None; n2];
    fn collect<'a>(
        node: &'a AstNode,
        parent: Option<NodeId>,
        nodes: &mut Vec<&'a AstNode>,
        parents: &mut [Option<NodeId>],
    ) {
        nodes.push(node);
        parents[node.id as usize] = parent;
        for child in &node.children {
            collect(child, Some(node.id), nodes, parents);
        }
    }
    collect(&v2.root, None, &mut v2_nodes, &mut v2_parent);
    v2_nodes.sort_by_key(|n| n.id);

    let mut v2_to_work: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut work_to_v2: BTreeMap<usize, NodeId> = BTreeMap::new();
    for (a, b) in mapping.pairs() {
        v2_to_work.insert(b, a as usize);
        work_to_v2.insert(a as usize, b);
    }
    v2_to_work.insert(sentinel_v2, work.sentinel);
    work_to_v2.insert(work.sentinel, sentinel_v2);

    let mut in_order_work: BTreeSet<usize> = BTreeSet::new();
    let mut in_order_v2: BTreeSet<NodeId> = BTreeSet::new();

    let v2_children = |id: NodeId| -> Vec<NodeId> {
        if id == sentinel_v2 {
            alloc::vec![v2.root.id]
        } else {
            v2_nodes[id as usize].children.iter().map(|c| c.id).collect()
        }
    };

    // findPos from Chawathe: position after the partner of the nearest
    // in-order left sibling, measured in the working tree.
    let find_pos = |x: NodeId,
                    v2_parent: &[Option<NodeId>],
                    v2_to_work: &BTreeMap<NodeId, usize>,
                    in_order_v2: &BTreeSet<NodeId>,
                    work: &Work|
     -> usize {
        let y = v2_parent[x as usize].unwrap_or(sentinel_v2);
        let siblings = v2_children(y);
        let my_idx = siblings.iter().position(|&s| s == x).unwrap_or(0);
        let left = siblings[..my_idx].iter().rev().find(|s| in_order_v2.contains(s));
        match left {
            None => 0,
            Some(&u) => match v2_to_work.get(&u) {
                Some(&v) => work.index_in_parent(v).map(|i| i + 1).unwrap_or(0),
                None => 0,
            },
        }
    };

    // breadth-first over v2
    let mut queue: Vec<NodeId> = alloc::vec![v2.root.id];
    let mut head = 0;
    while head < queue.len() {
        let x = queue[head];
        head += 1;
        queue.extend(v2_children(x));

        let y = v2_parent[x as usize].unwrap_or(sentinel_v2);
        let z = v2_to_work[&y];
        let xn = v2_nodes[x as usize];

        let w = match v2_to_work.get(&x) {
            None => {
                let k = find_pos(x, &v2_parent, &v2_to_work, &in_order_v2, &work);
                let w = work.new_node(xn.kind.clone(), xn.label.clone());
                let k = work.attach(w, z, k);
                ops.push(EditOp::Insert {
                    node: x,
                    parent: (y != sentinel_v2).then_some(y),
                    position: k,
                });
                v2_to_work.insert(x, w);
                work_to_v2.insert(w, x);
                in_order_work.insert(w);
                in_order_v2.insert(x);
                w
            }
            Some(&w) => {
                if work.label[w] != xn.label {
                    ops.push(EditOp::Update {
                        node: w as NodeId,
                        old_label: core::mem::replace(&mut work.label[w], xn.label.clone()),
                        new_label: xn.label.clone(),
                    });
                }
                if work.parent[w] != Some(z) {
                    let k = find_pos(x, &v2_parent, &v2_to_work, &in_order_v2, &work);
                    work.detach(w);
                    let k = work.attach(w, z, k);
                    ops.push(EditOp::Move {
                        node: w as NodeId,
                        parent: (y != sentinel_v2).then_some(y),
                        position: k,
                    });
                    in_order_work.insert(w);
                    in_order_v2.insert(x);
                }
                w
            }
        };

        // align misordered mapped children of (w, x)
        for &c in &work.children[w] {
            in_order_work.remove(&c);
        }
        let x_kids = v2_children(x);
        for c in &x_kids {
            in_order_v2.remove(c);
        }
        let s1: Vec<usize> = work.children[w]
            .iter()
            .copied()
            .filter(|c| {
                work_to_v2.get(c).map(|img| v2_parent[*img as usize] == Some(x)).unwrap_or(false)
            })
            .collect();
        let s2: Vec<NodeId> = x_kids
            .iter()
            .copied()
            .filter(|c| {
                v2_to_work.get(c).map(|p| work.parent[*p] == Some(w)).unwrap_or(false)
            })
            .collect();
        let lcs: Vec<(usize, NodeId)> =
            lcs_pairs(&s1, &s2, |a, b| work_to_v2.get(&a) == Some(&b));
        let in_lcs: BTreeSet<(usize, NodeId)> = lcs.iter().copied().collect();
        for (a, b) in &lcs {
            in_order_work.insert(*a);
            in_order_v2.insert(*b);
        }
        for &b in &s2 {
            let Some(&a) = v2_to_work.get(&b) else { continue };
            if !s1.contains(&a) || in_lcs.contains(&(a, b)) {
                continue;
            }
            let mut k = find_pos(b, &v2_parent, &v2_to_work, &in_order_v2, &work);
            if work.parent[a] == Some(w) && work.index_in_parent(a).unwrap_or(0) < k {
                k -= 1;
            }
            work.detach(a);
            let k = work.attach(a, w, k);
            ops.push(EditOp::Move { node: a as NodeId, parent: Some(x), position: k });
            in_order_work.insert(a);
            in_order_v2.insert(b);
        }
    }

    // deletes, children before parents
    let mut post = Vec::with_capacity(n1);
    fn postorder(node: &AstNode, out: &mut Vec<NodeId>) {
        for child in &node.children {
            postorder(child, out);
        }
        out.push(node.id);
    }
    postorder(&v1.root, &mut post);
    for id in post {
        if !mapping.has_v1(id) {
            work.detach(id as usize);
            ops.push(EditOp::Delete { node: id });
        }
    }
    ops
}

/// Replay a script against v1. Insert content is resolved from v2 by id; the
/// replayed structure comes entirely from the script. Returns `None` if the
/// result is not a single-rooted tree.
pub fn apply_script(
    v1: &Ast,
    v2: &Ast,
    mapping: &NodeMapping,
    script: &[EditOp],
) -> Option<SimpleTree> {
    let mut work = Work::from_ast(v1);
    let sentinel_v2: NodeId = v2.node_count;
    let mut v2_to_work: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (a, b) in mapping.pairs() {
        v2_to_work.insert(b, a as usize);
    }
    v2_to_work.insert(sentinel_v2, work.sentinel);

    for op in script {
        match op {
            EditOp::Insert { node, parent, position } => {
                let content = v2.node(*node)?;
                let w = work.new_node(content.kind.clone(), content.label.clone());
                let z = *v2_to_work.get(&parent.unwrap_or(sentinel_v2))?;
                work.attach(w, z, *position);
                v2_to_work.insert(*node, w);
            }
            EditOp::Delete { node } => {
                work.detach(*node as usize);
            }
            EditOp::Update { node, new_label, .. } => {
                work.label[*node as usize] = new_label.clone();
            }
            EditOp::Move { node, parent, position } => {
                let w = *node as usize;
                let z = *v2_to_work.get(&parent.unwrap_or(sentinel_v2))?;
                work.detach(w);
                work.attach(w, z, *position);
            }
        }
    }
    if work.children[work.sentinel].len() != 1 {
        return None;
    }
    Some(work.to_simple(work.children[work.sentinel][0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_source;
    use crate::diff::{match_trees, DiffParams};

    fn assert_script_applies(v1_src: &str, v2_src: &str) -> Vec<EditOp> {
        let v1 = parse_source(v1_src, "v1");
        let v2 = parse_source(v2_src, "v2");
        let mapping = match_trees(&v1, &v2, &DiffParams::default());
        assert!(mapping.is_injective());
        let script = edit_script(&v1, &v2, &mapping);
        let applied = apply_script(&v1, &v2, &mapping, &script).expect("single root");
        assert_eq!(
            tree_hash(&applied),
            tree_hash(&SimpleTree::from(&v2.root)),
            "script does not reproduce v2\nscript: {script:#?}"
        );
        script
    }

    #[test]
    fn identical_trees_produce_empty_script() {
        let src = "contract C {\n  uint256 x;\n  function f() public {\n    x = 1;\n  }\n}\n";
        let script = assert_script_applies(src, src);
        assert!(script.is_empty(), "{script:?}");
    }

    #[test]
    fn added_statement_yields_inserts_covering_subtree() {
        let v1_src = "contract C {\n  function f() public {\n    a = 1;\n  }\n}\n";
        let v2_src = "contract C {\n  function f() public {\n    a = 1;\n    b = 2;\n  }\n}\n";
        let script = assert_script_applies(v1_src, v2_src);
        assert!(script.iter().all(|op| matches!(op, EditOp::Insert { .. })), "{script:?}");
        // the new statement subtree: ExpressionStatement, Assignment, b, 2
        assert_eq!(script.len(), 4);
    }

    #[test]
    fn label_only_change_yields_single_update() {
        let v1_src = "contract C {\n  function f() public {\n    total = total + fee;\n  }\n}\n";
        let v2_src = "contract C {\n  function f() public {\n    total = total + bonus;\n  }\n}\n";
        let script = assert_script_applies(v1_src, v2_src);
        let updates: Vec<_> =
            script.iter().filter(|op| matches!(op, EditOp::Update { .. })).collect();
        assert_eq!(updates.len(), 1, "{script:?}");
        assert_eq!(script.len(), 1, "{script:?}");
        if let EditOp::Update { old_label, new_label, .. } = &script[0] {
            assert_eq!(old_label, "fee");
            assert_eq!(new_label, "bonus");
        }
    }

    #[test]
    fn swapped_statements_yield_moves() {
        let v1_src = "contract C {\n  function f() public {\n    balances[msg.sender] = 0;\n    recipient.transfer(amount);\n  }\n}\n";
        let v2_src = "contract C {\n  function f() public {\n    recipient.transfer(amount);\n    balances[msg.sender] = 0;\n  }\n}\n";
        let script = assert_script_applies(v1_src, v2_src);
        assert!(script.iter().any(|op| matches!(op, EditOp::Move { .. })), "{script:?}");
        assert!(script.iter().all(|op| matches!(op, EditOp::Move { .. })), "{script:?}");
    }

    #[test]
    fn deleted_function_yields_deletes() {
        let v1_src = "contract C {\n  function keepme() public {\n    x = 1;\n  }\n  function dropme() public {\n    y = 2;\n  }\n}\n";
        let v2_src = "contract C {\n  function keepme() public {\n    x = 1;\n  }\n}\n";
        let script = assert_script_applies(v1_src, v2_src);
        assert!(!script.is_empty());
        assert!(script.iter().all(|op| matches!(op, EditOp::Delete { .. })), "{script:?}");
    }

    #[test]
    fn disjoint_trees_still_apply() {
        // Same root kind (SourceUnit) but nothing else shared.
        assert_script_applies(
            "contract A {\n  function f() public {\n    x = 1;\n  }\n}\n",
            "library B {\n  function g() internal {\n    q.call();\n  }\n}\n",
        );
    }

    #[test]
    fn moved_function_applies() {
        let v1_src = "contract C {\n  function a() public {\n    x = 1;\n    y = 2;\n  }\n  function b() public {\n    z = 3;\n    w = 4;\n  }\n}\n";
        let v2_src = "contract C {\n  function b() public {\n    z = 3;\n    w = 4;\n  }\n  function a() public {\n    x = 1;\n    y = 2;\n  }\n}\n";
        assert_script_applies(v1_src, v2_src);
    }
}
