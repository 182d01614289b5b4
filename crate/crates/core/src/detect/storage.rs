//! Storage slot layout computation and cross-version collision comparison.
//!
//! Slots are assigned in declaration order, base contracts first in the order
//! of the inheritance list, with canonical value-type packing: a variable that
//! still fits in the current 32-byte slot shares it, anything else opens a
//! fresh slot. Mappings, arrays, `bytes` and `string` always occupy a fresh
//! full slot. Outside the supported elementary subset a variable still gets a
//! fresh full slot but carries an unknown-type warning flag.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Finding, Severity, VulnType};
use crate::ast::{Ast, AstNode, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageSlotEntry {
    pub slot_index: u32,
    /// 0–31, byte offset within the slot.
    pub byte_offset: u32,
    pub type_signature: String,
    pub var_name: String,
    pub contract_name: String,
    /// Declaration line on this entry's own version.
    pub line: u32,
    /// Set when the type is outside the supported subset; the entry occupies
    /// a conservative fresh full slot.
    pub unknown_type: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageSlotLayout {
    /// Sorted by (slot_index, byte_offset) by construction.
    pub entries: Vec<StorageSlotEntry>,
}

/// Byte size of a value type; `None` for slot-consuming (dynamic or unknown)
/// types.
fn value_size(sig: &str) -> Option<u32> {
    match sig {
        "address" | "address payable" => return Some(20),
        "bool" => return Some(1),
        "uint" | "int" => return Some(32),
        "byte" => return Some(1),
        _ => {}
    }
    for (prefix, is_bytes) in [("uint", false), ("int", false), ("bytes", true)] {
        if let Some(suffix) = sig.strip_prefix(prefix) {
            if let Ok(n) = suffix.parse::<u32>() {
                if is_bytes && (1..=32).contains(&n) {
                    return Some(n);
                }
                if !is_bytes && n % 8 == 0 && (8..=256).contains(&n) {
                    return Some(n / 8);
                }
            }
        }
    }
    None
}

enum SlotUse {
    Value(u32),
    FullSlot,
    Unknown,
}

fn classify_type(node: &AstNode) -> (String, SlotUse) {
    let sig = node.label.clone();
    match &node.kind {
        NodeKind::Other(tag) if tag == "ElementaryTypeName" => {
            if sig == "bytes" || sig == "string" {
                (sig, SlotUse::FullSlot)
            } else {
                match value_size(&sig) {
                    Some(n) => (sig, SlotUse::Value(n)),
                    None => (sig, SlotUse::Unknown),
                }
            }
        }
        NodeKind::Other(tag) if tag == "Mapping" || tag == "ArrayTypeName" => {
            (sig, SlotUse::FullSlot)
        }
        _ => (sig, SlotUse::Unknown),
    }
}

/// Compute the storage layout for the analysis target: the last
/// non-interface, non-library contract in the file, with its bases laid out
/// first in inheritance-list order.
pub fn compute_storage_layout(ast: &Ast) -> StorageSlotLayout {
    let contracts: Vec<&AstNode> = ast
        .root
        .preorder()
        .filter(|n| n.kind == NodeKind::ContractDefinition)
        .collect();
    let by_name: BTreeMap<&str, &AstNode> =
        contracts.iter().map(|c| (c.label.as_str(), *c)).collect();
    let is_plain = |c: &AstNode| {
        !c.children.iter().any(|k| {
            k.kind == NodeKind::Other("ContractKind".into())
                && (k.label == "interface" || k.label == "library")
        })
    };
    let Some(target) = contracts.iter().rev().find(|c| is_plain(c)) else {
        return StorageSlotLayout::default();
    };

    // base-first linearization over the declared inheritance lists
    let mut order: Vec<&AstNode> = Vec::new();
    fn linearize<'a>(
        contract: &'a AstNode,
        by_name: &BTreeMap<&str, &'a AstNode>,
        out: &mut Vec<&'a AstNode>,
    ) {
        for spec in &contract.children {
            if spec.kind == NodeKind::InheritanceSpecifier {
                if let Some(base) = by_name.get(spec.label.as_str()) {
                    linearize(base, by_name, out);
                }
            }
        }
        if !out.iter().any(|c| c.label == contract.label) {
            out.push(contract);
        }
    }
    linearize(target, &by_name, &mut order);

    let mut layout = StorageSlotLayout::default();
    let mut slot = 0u32;
    let mut offset = 0u32;
    for contract in order {
        for var in &contract.children {
            if var.kind != NodeKind::VariableDeclaration || var.label.is_empty() {
                continue;
            }
            // constants and immutables never occupy storage
            if var.children.iter().any(|m| m.kind == NodeKind::Other("Mutability".into())) {
                continue;
            }
            let Some(ty) = var.children.first() else { continue };
            let (sig, slot_use) = classify_type(ty);
            let (entry_slot, entry_offset, unknown) = match slot_use {
                SlotUse::Value(size) => {
                    if offset + size > 32 {
                        slot += 1;
                        offset = 0;
                    }
                    let at = (slot, offset);
                    offset += size;
                    if offset == 32 {
                        slot += 1;
                        offset = 0;
                    }
                    (at.0, at.1, false)
                }
                SlotUse::FullSlot | SlotUse::Unknown => {
                    if offset > 0 {
                        slot += 1;
                        offset = 0;
                    }
                    let at = slot;
                    slot += 1;
                    (at, 0, matches!(slot_use, SlotUse::Unknown))
                }
            };
            layout.entries.push(StorageSlotEntry {
                slot_index: entry_slot,
                byte_offset: entry_offset,
                type_signature: sig,
                var_name: var.label.clone(),
                contract_name: contract.label.clone(),
                line: var.span.start_line,
                unknown_type: unknown,
            });
        }
    }
    layout
}

/// Compare two layouts position-by-position. A (slot, offset) present in both
/// versions with a different type is a high-severity collision; same type but
/// renamed variable is medium. Appended variables beyond the old extent are
/// safe.
pub fn compare_layouts(l1: &StorageSlotLayout, l2: &StorageSlotLayout) -> Vec<Finding> {
    let old: BTreeMap<(u32, u32), &StorageSlotEntry> =
        l1.entries.iter().map(|e| ((e.slot_index, e.byte_offset), e)).collect();
    let mut findings = Vec::new();
    for entry in &l2.entries {
        let Some(prev) = old.get(&(entry.slot_index, entry.byte_offset)) else {
            continue;
        };
        if prev.type_signature != entry.type_signature {
            findings.push(Finding::new(
                VulnType::StorageCollision,
                Severity::High,
                entry.line,
                None,
                alloc::format!(
                    "slot {} offset {}: `{} {}` overwrites `{} {}` from the previous version",
                    entry.slot_index,
                    entry.byte_offset,
                    entry.type_signature,
                    entry.var_name,
                    prev.type_signature,
                    prev.var_name
                ),
                "storage-collision",
            ));
        } else if prev.var_name != entry.var_name {
            findings.push(Finding::new(
                VulnType::StorageCollision,
                Severity::Medium,
                entry.line,
                None,
                alloc::format!(
                    "slot {} offset {}: variable renamed `{}` -> `{}` with unchanged type {}",
                    entry.slot_index,
                    entry.byte_offset,
                    prev.var_name,
                    entry.var_name,
                    entry.type_signature
                ),
                "storage-collision",
            ));
        }
    }
    super::sort_and_renumber(&mut findings);
    findings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_source;

    fn layout_of(src: &str) -> StorageSlotLayout {
        compute_storage_layout(&parse_source(src, "v1"))
    }

    fn slots(layout: &StorageSlotLayout) -> Vec<(u32, u32, &str, &str)> {
        layout
            .entries
            .iter()
            .map(|e| (e.slot_index, e.byte_offset, e.type_signature.as_str(), e.var_name.as_str()))
            .collect()
    }

    #[test]
    fn full_width_values_take_consecutive_slots() {
        let layout = layout_of("contract C {\n  uint256 a;\n  address b;\n}\n");
        assert_eq!(slots(&layout), [(0, 0, "uint256", "a"), (1, 0, "address", "b")]);
    }

    #[test]
    fn half_width_values_pack_into_one_slot() {
        let layout = layout_of("contract C {\n  uint128 a;\n  uint128 b;\n}\n");
        assert_eq!(slots(&layout), [(0, 0, "uint128", "a"), (0, 16, "uint128", "b")]);
    }

    #[test]
    fn no_state_variables_means_empty_layout() {
        let layout = layout_of("contract C {\n  function f() public {\n    x = 1;\n  }\n}\n");
        assert!(layout.entries.is_empty());
    }

    #[test]
    fn mixed_packing_and_dynamic_types() {
        let layout = layout_of(
            "contract C {\n  uint128 a;\n  address b;\n  bool c;\n  mapping(address => uint256) m;\n  uint8 d;\n}\n",
        );
        // a(16) + b(20) won't fit: b starts slot 1; c(1) packs after b at
        // offset 20; mapping takes fresh slot 2; d opens slot 3.
        assert_eq!(
            slots(&layout),
            [
                (0, 0, "uint128", "a"),
                (1, 0, "address", "b"),
                (1, 20, "bool", "c"),
                (2, 0, "mapping(address => uint256)", "m"),
                (3, 0, "uint8", "d"),
            ]
        );
    }

    #[test]
    fn constants_are_skipped_and_unknown_types_flagged() {
        let layout = layout_of(
            "contract C {\n  uint256 constant FEE = 100;\n  SomeStruct s;\n  uint256 a;\n}\n",
        );
        assert_eq!(layout.entries.len(), 2);
        assert!(layout.entries[0].unknown_type);
        assert_eq!(layout.entries[0].slot_index, 0);
        assert_eq!(layout.entries[1].var_name, "a");
        assert_eq!(layout.entries[1].slot_index, 1);
    }

    #[test]
    fn inherited_bases_lay_out_first() {
        let src = "contract Base {\n  uint256 x;\n}\ncontract Mid is Base {\n  uint256 y;\n}\ncontract Top is Mid {\n  uint256 z;\n}\n";
        let layout = layout_of(src);
        assert_eq!(
            slots(&layout),
            [(0, 0, "uint256", "x"), (1, 0, "uint256", "y"), (2, 0, "uint256", "z")]
        );
        assert_eq!(layout.entries[0].contract_name, "Base");
        assert_eq!(layout.entries[2].contract_name, "Top");
    }

    #[test]
    fn swap_collision_produces_two_high_findings() {
        let l1 = layout_of("contract C {\n  uint256 a;\n  address b;\n}\n");
        let l2 = layout_of("contract C {\n  address b;\n  uint256 a;\n}\n");
        let findings = compare_layouts(&l1, &l2);
        assert_eq!(findings.len(), 2);
        assert!(findings.iter().all(|f| f.vuln_type == VulnType::StorageCollision));
        assert!(findings.iter().all(|f| f.severity == Severity::High));
        let mut lines: Vec<u32> = findings.iter().map(|f| f.line).collect();
        lines.sort_unstable();
        assert_eq!(lines, [2, 3]);
    }

    #[test]
    fn identical_layouts_are_clean_and_appends_are_safe() {
        let l1 = layout_of("contract C {\n  uint256 a;\n  address b;\n}\n");
        assert!(compare_layouts(&l1, &l1).is_empty());
        let l2 = layout_of("contract C {\n  uint256 a;\n  address b;\n  uint256 c;\n}\n");
        assert!(compare_layouts(&l1, &l2).is_empty());
    }

    #[test]
    fn rename_only_is_medium() {
        let l1 = layout_of("contract C {\n  uint256 total;\n}\n");
        let l2 = layout_of("contract C {\n  uint256 supply;\n}\n");
        let findings = compare_layouts(&l1, &l2);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].severity, Severity::Medium);
    }
}
