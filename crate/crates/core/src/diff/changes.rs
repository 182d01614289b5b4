//! Semantic enrichment of edit scripts into change records.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::{ChangeRecord, EditOp, NodeMapping};
use crate::ast::{self, Ast, AstNode, LineIndex, NodeKind};

/// Build one [`ChangeRecord`] per script operation.
///
/// Delete records carry v1 coordinates; inserts, updates and moves carry v2
/// coordinates (updates and moves through the subject's mapping image), so
/// downstream matching compares against findings on the version where the
/// change landed.
pub fn extract_changes(
    script: &[EditOp],
    v1: &Ast,
    v2: &Ast,
    mapping: &NodeMapping,
    v1_source: &str,
    v2_source: &str,
) -> Vec<ChangeRecord> {
    let v1_index = LineIndex::new(v1_source);
    let v2_index = LineIndex::new(v2_source);
    let mut records = Vec::with_capacity(script.len());

    for (i, op) in script.iter().enumerate() {
        let (ast_side, source, index, node_id) = match op {
            EditOp::Insert { node, .. } => (v2, v2_source, &v2_index, *node),
            EditOp::Delete { node } => (v1, v1_source, &v1_index, *node),
            EditOp::Update { node, .. } | EditOp::Move { node, .. } => {
                match mapping.to_v2(*node) {
                    Some(img) => (v2, v2_source, &v2_index, img),
                    // an update/move subject is mapped by construction; fall
                    // back to the v1 side rather than dropping the record
                    None => (v1, v1_source, &v1_index, *node),
                }
            }
        };
        let Some(node) = ast_side.node(node_id) else {
            continue;
        };
        let span = node.span;
        let line = span.start_line;
        records.push(ChangeRecord {
            change_id: i as u32,
            op: op.kind(),
            line,
            end_line: span.end_line,
            span,
            function_name: ast::enclosing_function(ast_side, line).map(String::from),
            node_kind: node.kind.clone(),
            identifiers: collect_identifiers(node),
            snippet: ast::snippet(source, index, &span),
        });
    }
    records
}

/// Identifier-bearing labels in a subtree: identifiers, member accesses,
/// function and variable definitions.
fn collect_identifiers(node: &AstNode) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for n in node.preorder() {
        if matches!(
            n.kind,
            NodeKind::Identifier
                | NodeKind::MemberAccess
                | NodeKind::FunctionDefinition
                | NodeKind::VariableDeclaration
        ) && !n.label.is_empty()
        {
            out.insert(n.label.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_source;
    use crate::diff::{compute_changes, ChangeOp, DiffParams};

    #[test]
    fn empty_script_gives_no_records() {
        let src = "contract C {\n  function f() public {\n    x = 1;\n  }\n}\n";
        let v1 = parse_source(src, "v1");
        let v2 = parse_source(src, "v2");
        let (_, script, records) = compute_changes(&v1, &v2, src, src, &DiffParams::default());
        assert!(script.is_empty());
        assert!(records.is_empty());
    }

    #[test]
    fn inserted_require_carries_identifiers_and_v2_line() {
        let v1_src = "contract C {\n  address owner;\n  function set(uint256 v) public {\n    value = v;\n  }\n}\n";
        let v2_src = "contract C {\n  address owner;\n  function set(uint256 v) public {\n    require(msg.sender == owner);\n    value = v;\n  }\n}\n";
        let v1 = parse_source(v1_src, "v1");
        let v2 = parse_source(v2_src, "v2");
        let (_, script, records) =
            compute_changes(&v1, &v2, v1_src, v2_src, &DiffParams::default());
        assert_eq!(records.len(), script.len());
        let stmt = records
            .iter()
            .find(|r| r.op == ChangeOp::Insert && r.node_kind == NodeKind::ExpressionStatement)
            .expect("statement-level insert record");
        assert_eq!(stmt.line, 4);
        assert!(stmt.identifiers.contains("msg"));
        assert!(stmt.identifiers.contains("sender"));
        assert!(stmt.identifiers.contains("owner"));
        assert_eq!(stmt.function_name.as_deref(), Some("set"));
        assert!(stmt.snippet.contains("require"));
    }

    #[test]
    fn deleted_function_record_uses_v1_lines() {
        let v1_src = "contract C {\n  function keep() public {\n    a = 1;\n  }\n  function drop(uint256 x) public {\n    b = x;\n    c = x;\n  }\n}\n";
        let v2_src = "contract C {\n  function keep() public {\n    a = 1;\n  }\n}\n";
        let v1 = parse_source(v1_src, "v1");
        let v2 = parse_source(v2_src, "v2");
        let (_, _, records) = compute_changes(&v1, &v2, v1_src, v2_src, &DiffParams::default());
        let fun = records
            .iter()
            .find(|r| r.op == ChangeOp::Delete && r.node_kind == NodeKind::FunctionDefinition)
            .expect("function delete record");
        assert_eq!(fun.line, 5);
        assert_eq!(fun.function_name.as_deref(), Some("drop"));
        assert!(fun.identifiers.contains("drop"));
        // every record's line falls inside its span
        for r in &records {
            assert!(r.span.contains_line(r.line));
        }
    }
}
