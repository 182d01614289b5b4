//! The two matcher phases.
//!
//! Top-down: greedily anchor the largest isomorphic subtree pairs, deferring
//! ambiguous signature groups to a candidate list resolved by parent dice.
//! Bottom-up: pair unmatched containers with same-kind counterparts when dice
//! over already-mapped descendants clears the threshold, then recover matches
//! among the remaining descendants of accepted pairs with an LCS pass.
//!
//! Every tie anywhere is broken by the smallest (v1_id, v2_id) pair so a
//! given input always produces the same mapping.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{NodeMapping, TreeIndex};
use crate::ast::{Ast, NodeId};

/// Height-bucketed worklist; pops whole buckets of maximal height.
struct HeightQueue {
    buckets: BTreeMap<u32, Vec<NodeId>>,
}

impl HeightQueue {
    fn new() -> Self {
        HeightQueue { buckets: BTreeMap::new() }
    }

    fn push(&mut self, id: NodeId, height: u32) {
        self.buckets.entry(height).or_default().push(id);
    }

    fn peek_height(&self) -> Option<u32> {
        self.buckets.keys().next_back().copied()
    }

    fn pop_max(&mut self) -> Vec<NodeId> {
        self.buckets
            .keys()
            .next_back()
            .copied()
            .and_then(|h| self.buckets.remove(&h))
            .unwrap_or_default()
    }
}

/// Greedy top-down anchoring of isomorphic subtrees of height ≥ `min_height`.
pub fn top_down_match(v1: &Ast, v2: &Ast, min_height: u32) -> NodeMapping {
    let t1 = TreeIndex::build(v1);
    let t2 = TreeIndex::build(v2);
    let mut q1 = HeightQueue::new();
    let mut q2 = HeightQueue::new();
    q1.push(v1.root.id, t1.height[v1.root.id as usize]);
    q2.push(v2.root.id, t2.height[v2.root.id as usize]);

    let mut mapping = NodeMapping::new();
    // Ambiguous pairs deferred until the main sweep finishes.
    let mut candidates: Vec<(NodeId, NodeId)> = Vec::new();

    let open1 = |id: NodeId, q: &mut HeightQueue| {
        for child in &t1.nodes[id as usize].children {
            q.push(child.id, t1.height[child.id as usize]);
        }
    };
    let open2 = |id: NodeId, q: &mut HeightQueue| {
        for child in &t2.nodes[id as usize].children {
            q.push(child.id, t2.height[child.id as usize]);
        }
    };

    while let (Some(h1), Some(h2)) = (q1.peek_height(), q2.peek_height()) {
        if h1.min(h2) < min_height {
            break;
        }
        if h1 > h2 {
            for id in q1.pop_max() {
                open1(id, &mut q1);
            }
            continue;
        }
        if h2 > h1 {
            for id in q2.pop_max() {
                open2(id, &mut q2);
            }
            continue;
        }

        let set1 = {
            let mut s = q1.pop_max();
            s.sort_unstable();
            s
        };
        let set2 = {
            let mut s = q2.pop_max();
            s.sort_unstable();
            s
        };
        let mut by_hash1: BTreeMap<u128, Vec<NodeId>> = BTreeMap::new();
        for id in &set1 {
            by_hash1.entry(t1.hash[*id as usize]).or_default().push(*id);
        }
        let mut by_hash2: BTreeMap<u128, Vec<NodeId>> = BTreeMap::new();
        for id in &set2 {
            by_hash2.entry(t2.hash[*id as usize]).or_default().push(*id);
        }

        for id in &set1 {
            let hash = t1.hash[*id as usize];
            let occ1 = &by_hash1[&hash];
            match by_hash2.get(&hash) {
                None => open1(*id, &mut q1),
                Some(occ2) => {
                    if occ1.len() == 1 && occ2.len() == 1 {
                        map_isomorphic(&mut mapping, *id, occ2[0], &t1);
                    } else if occ1[0] == *id {
                        // enqueue the cross product once per group
                        for a in occ1 {
                            for b in occ2 {
                                candidates.push((*a, *b));
                            }
                        }
                    }
                }
            }
        }
        for id in &set2 {
            if !by_hash1.contains_key(&t2.hash[*id as usize]) {
                open2(*id, &mut q2);
            }
        }
    }

    // Ambiguous occurrences: order by parent dice (computed against the
    // unique matches gathered so far), ties by smallest pair.
    let mut scored: Vec<(f64, NodeId, NodeId)> = candidates
        .into_iter()
        .map(|(a, b)| {
            let pd = match (t1.parent[a as usize], t2.parent[b as usize]) {
                (Some(pa), Some(pb)) => t1.dice_ids(&t2, &mapping, pa, pb),
                _ => 0.0,
            };
            (pd, a, b)
        })
        .collect();
    scored.sort_by(|x, y| {
        y.0.total_cmp(&x.0).then_with(|| (x.1, x.2).cmp(&(y.1, y.2)))
    });
    for (_, a, b) in scored {
        if !mapping.has_v1(a) && !mapping.has_v2(b) {
            map_isomorphic(&mut mapping, a, b, &t1);
        }
    }
    mapping
}

/// Map two isomorphic subtrees node-by-node. Isomorphism means identical
/// shape, so preorder offsets line up exactly.
fn map_isomorphic(mapping: &mut NodeMapping, a: NodeId, b: NodeId, t1: &TreeIndex<'_>) {
    let size = t1.size[a as usize];
    for k in 0..size {
        mapping.insert(a + k, b + k);
    }
}

/// Bottom-up container matching over a top-down seed.
pub fn bottom_up_match(
    v1: &Ast,
    v2: &Ast,
    seed: NodeMapping,
    min_dice: f64,
    max_size: u32,
) -> NodeMapping {
    let t1 = TreeIndex::build(v1);
    let t2 = TreeIndex::build(v2);
    let mut mapping = seed;

    // postorder: children before parents; with preorder ids this is just
    // descending id order filtered to nodes with children handled naturally
    let postorder = postorder_ids(&t1);
    for &a in &postorder {
        if mapping.has_v1(a) {
            continue;
        }
        // candidates: unmapped v2 nodes of equal kind that contain the image
        // of some mapped descendant of `a`
        let kind_a = &t1.nodes[a as usize].kind;
        let mut cands: Vec<NodeId> = Vec::new();
        for d in t1.descendants(a) {
            if let Some(img) = mapping.to_v2(d) {
                let mut up = t2.parent[img as usize];
                while let Some(p) = up {
                    if !mapping.has_v2(p) && &t2.nodes[p as usize].kind == kind_a {
                        cands.push(p);
                    }
                    up = t2.parent[p as usize];
                }
            }
        }
        cands.sort_unstable();
        cands.dedup();
        if cands.is_empty() {
            continue;
        }
        let mut best: Option<(f64, NodeId)> = None;
        for b in cands {
            let d = t1.dice_ids(&t2, &mapping, a, b);
            let better = match best {
                None => true,
                Some((bd, bb)) => d > bd || (d == bd && b < bb),
            };
            if better {
                best = Some((d, b));
            }
        }
        if let Some((d, b)) = best {
            if d >= min_dice {
                mapping.insert(a, b);
                if t1.size[a as usize] <= max_size && t2.size[b as usize] <= max_size {
                    recover_descendants(&mut mapping, &t1, &t2, a, b);
                }
            }
        }
    }

    // Roots act as the outermost container: pair them when same-kind and
    // still unmatched so the script has a stable frame.
    let r1 = v1.root.id;
    let r2 = v2.root.id;
    if !mapping.has_v1(r1) && !mapping.has_v2(r2) && v1.root.kind == v2.root.kind {
        mapping.insert(r1, r2);
        if t1.size[r1 as usize] <= max_size && t2.size[r2 as usize] <= max_size {
            recover_descendants(&mut mapping, &t1, &t2, r1, r2);
        }
    }
    mapping
}

fn postorder_ids(t: &TreeIndex<'_>) -> Vec<NodeId> {
    let mut order = Vec::with_capacity(t.nodes.len());
    fn walk(t: &TreeIndex<'_>, id: NodeId, out: &mut Vec<NodeId>) {
        for child in &t.nodes[id as usize].children {
            walk(t, child.id, out);
        }
        out.push(id);
    }
    if !t.nodes.is_empty() {
        walk(t, 0, &mut order);
    }
    order
}

/// Recovery matching inside an accepted container pair: LCS over the
/// remaining unmapped descendants, first on (kind, label), then kind-only so
/// pure renames still pair up as updates.
fn recover_descendants(
    mapping: &mut NodeMapping,
    t1: &TreeIndex<'_>,
    t2: &TreeIndex<'_>,
    a: NodeId,
    b: NodeId,
) {
    for exact in [true, false] {
        let s1: Vec<NodeId> = t1.descendants(a).filter(|id| !mapping.has_v1(*id)).collect();
        let s2: Vec<NodeId> = t2.descendants(b).filter(|id| !mapping.has_v2(*id)).collect();
        if s1.is_empty() || s2.is_empty() {
            return;
        }
        let eq = |x: NodeId, y: NodeId| {
            let n1 = t1.nodes[x as usize];
            let n2 = t2.nodes[y as usize];
            n1.kind == n2.kind && (!exact || n1.label == n2.label)
        };
        for (x, y) in lcs_pairs(&s1, &s2, eq) {
            mapping.insert(x, y);
        }
    }
}

/// Longest common subsequence pairs between two sequences. Backtracking
/// prefers consuming from the first sequence on ties, which keeps earlier v1
/// elements paired.
pub(crate) fn lcs_pairs<A: Copy, B: Copy, F: Fn(A, B) -> bool>(
    s1: &[A],
    s2: &[B],
    eq: F,
) -> Vec<(A, B)> {
    let n = s1.len();
    let m = s2.len();
    let mut table = alloc::vec![0u32; (n + 1) * (m + 1)];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    for i in 1..=n {
        for j in 1..=m {
            table[at(i, j)] = if eq(s1[i - 1], s2[j - 1]) {
                table[at(i - 1, j - 1)] + 1
            } else {
                table[at(i - 1, j)].max(table[at(i, j - 1)])
            };
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        if eq(s1[i - 1], s2[j - 1]) && table[at(i, j)] == table[at(i - 1, j - 1)] + 1 {
            pairs.push((s1[i - 1], s2[j - 1]));
            i -= 1;
            j -= 1;
        } else if table[at(i - 1, j)] >= table[at(i, j - 1)] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    pairs.reverse();
    pairs
}
