//! Ingestion of compiler-emitted compact JSON AST documents.
//!
//! The dialect is the one produced by `solc --ast-compact-json`: every node is
//! an object carrying `nodeType` and a `src` range of the form
//! `"<start>:<length>:<file>"`, with children stored under arbitrary keys.
//! Unknown node types map to [`NodeKind::Other`] so no document is rejected
//! for vocabulary reasons alone.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use serde_json::Value;

use super::{Ast, AstNode, IngestError, LineIndex, NodeKind};

/// Ingest a compact JSON AST document against its source text.
///
/// Ids are reassigned in preorder (any ids in the document are ignored) and
/// quality is scored as part of finalization.
pub fn ingest_ast(document: &Value, source: &str, version_tag: &str) -> Result<Ast, IngestError> {
    let root_obj = locate_root(document)?;
    let index = LineIndex::new(source);
    let root = build_node(root_obj, &index)?;
    Ok(Ast::from_root(root, version_tag, source))
}

/// Accept either a bare node or the `{"ast": {...}}` wrapper some pipelines
/// emit.
fn locate_root(document: &Value) -> Result<&Value, IngestError> {
    let obj = document
        .as_object()
        .ok_or_else(|| IngestError::MalformedDocument("root is not an object".to_owned()))?;
    if obj.contains_key("nodeType") {
        return Ok(document);
    }
    if let Some(inner) = obj.get("ast") {
        if inner.get("nodeType").is_some() {
            return Ok(inner);
        }
    }
    Err(IngestError::MalformedDocument("no nodeType at document root".to_owned()))
}

fn build_node(value: &Value, index: &LineIndex) -> Result<AstNode, IngestError> {
    let obj = value
        .as_object()
        .ok_or_else(|| IngestError::MalformedDocument("node is not an object".to_owned()))?;
    let node_type = obj
        .get("nodeType")
        .and_then(Value::as_str)
        .ok_or_else(|| IngestError::MalformedDocument("node lacks nodeType".to_owned()))?;

    let (start, length) = parse_src(obj.get("src"))?;
    if start + length > index.source_len() {
        return Err(IngestError::SpanOutOfRange {
            start,
            length,
            source_len: index.source_len(),
        });
    }
    let span = index.span(start, start + length);

    let mut node = AstNode::new(NodeKind::from_tag(node_type), extract_label(node_type, obj), span);

    // Children live under arbitrary keys, singly or in arrays. Collect every
    // nested object that itself looks like a node, then order by source
    // position (key order in the map is alphabetical, not positional).
    let mut children: Vec<(usize, usize, AstNode)> = Vec::new();
    let mut discovery = 0usize;
    for (_key, field) in obj {
        match field {
            Value::Object(inner) if inner.contains_key("nodeType") => {
                let child = build_node(field, index)?;
                let off = parse_src(inner.get("src")).map(|(s, _)| s).unwrap_or(0);
                children.push((off, discovery, child));
                discovery += 1;
            }
            Value::Array(items) => {
                for item in items {
                    if let Value::Object(inner) = item {
                        if inner.contains_key("nodeType") {
                            let child = build_node(item, index)?;
                            let off = parse_src(inner.get("src")).map(|(s, _)| s).unwrap_or(0);
                            children.push((off, discovery, child));
                            discovery += 1;
                        }
                    }
                }
            }
            _ => {}
        }
    }
    children.sort_by_key(|(off, disc, _)| (*off, *disc));
    node.children = children.into_iter().map(|(_, _, c)| c).collect();
    Ok(node)
}

fn parse_src(src: Option<&Value>) -> Result<(usize, usize), IngestError> {
    let text = src
        .and_then(Value::as_str)
        .ok_or_else(|| IngestError::MalformedDocument("node lacks src range".to_owned()))?;
    let mut parts = text.split(':');
    let start = parts
        .next()
        .and_then(|p| p.parse::<usize>().ok())
        .ok_or_else(|| IngestError::MalformedDocument("bad src range".to_owned()))?;
    let length = parts
        .next()
        .and_then(|p| p.parse::<usize>().ok())
        .ok_or_else(|| IngestError::MalformedDocument("bad src range".to_owned()))?;
    Ok((start, length))
}

fn extract_label(node_type: &str, obj: &serde_json::Map<String, Value>) -> String {
    let get_str = |key: &str| obj.get(key).and_then(Value::as_str).unwrap_or("");

    match node_type {
        "PragmaDirective" => {
            if let Some(lits) = obj.get("literals").and_then(Value::as_array) {
                let parts: Vec<&str> = lits.iter().filter_map(Value::as_str).collect();
                match parts.split_first() {
                    Some((first, rest)) => {
                        let mut label = String::from(*first);
                        if !rest.is_empty() {
                            label.push(' ');
                            label.push_str(&rest.concat());
                        }
                        label
                    }
                    None => String::new(),
                }
            } else {
                String::new()
            }
        }
        "MemberAccess" => get_str("memberName").to_owned(),
        "Literal" => get_str("value").to_owned(),
        "Assignment" | "BinaryOperation" | "UnaryOperation" => get_str("operator").to_owned(),
        "FunctionDefinition" => {
            let name = get_str("name");
            if name.is_empty() {
                // constructor / fallback / receive carry an empty name
                get_str("kind").to_owned()
            } else {
                name.to_owned()
            }
        }
        "InheritanceSpecifier" | "ModifierInvocation" | "UsingForDirective" => {
            for key in ["baseName", "modifierName", "libraryName"] {
                if let Some(inner) = obj.get(key) {
                    let name = inner.get("name").and_then(Value::as_str).unwrap_or("");
                    if !name.is_empty() {
                        return name.to_owned();
                    }
                }
            }
            get_str("name").to_owned()
        }
        _ => get_str("name").to_owned(),
    }
}
