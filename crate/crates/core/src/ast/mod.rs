//! AST data model, ingestion and quality scoring.
//!
//! Trees come from one of two ingestion paths: [`ingest_ast`] consumes a
//! compiler-emitted compact JSON AST document, and [`parse_source`] is a
//! built-in fallback parser covering the Solidity subset the analyzers care
//! about. Both produce the same [`Ast`] shape: a typed, ordered tree with
//! 1-based line spans, preorder node ids and three quality ratios.

mod ingest;
mod parser;

pub use ingest::ingest_ast;
pub use parser::parse_source;

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Node id, assigned in preorder and unique within one [`Ast`].
pub type NodeId = u32;

/// All three quality ratios must reach this for an AST to be considered
/// usable without a report warning.
pub const QUALITY_THRESHOLD: f64 = 0.8;

/// A line/column range in the original source text.
///
/// Lines are 1-based, columns 0-based byte offsets within the line. The end
/// column is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl SourceSpan {
    pub fn new(start_line: u32, start_col: u32, end_line: u32, end_col: u32) -> Self {
        debug_assert!(start_line >= 1);
        debug_assert!(end_line >= start_line);
        debug_assert!(start_line != end_line || end_col >= start_col);
        SourceSpan { start_line, start_col, end_line, end_col }
    }

    /// Single-point span, used for degenerate zero-length ranges.
    pub fn point(line: u32, col: u32) -> Self {
        SourceSpan::new(line, col, line, col)
    }

    pub fn contains_line(&self, line: u32) -> bool {
        self.start_line <= line && line <= self.end_line
    }

    /// Line-wise containment of `other` within `self`.
    pub fn contains_span(&self, other: &SourceSpan) -> bool {
        self.start_line <= other.start_line && other.end_line <= self.end_line
    }
}

/// Node-kind vocabulary. Closed under [`NodeKind::Other`]: unknown kinds from
/// any ingestion dialect are preserved by tag rather than rejected.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    ContractDefinition,
    FunctionDefinition,
    ModifierDefinition,
    VariableDeclaration,
    FunctionCall,
    MemberAccess,
    Identifier,
    Literal,
    Assignment,
    IfStatement,
    ForStatement,
    Block,
    ExpressionStatement,
    InheritanceSpecifier,
    PragmaDirective,
    Other(String),
}

impl NodeKind {
    /// The exact tag string; `Other` yields its inner tag.
    pub fn tag(&self) -> &str {
        match self {
            NodeKind::ContractDefinition => "ContractDefinition",
            NodeKind::FunctionDefinition => "FunctionDefinition",
            NodeKind::ModifierDefinition => "ModifierDefinition",
            NodeKind::VariableDeclaration => "VariableDeclaration",
            NodeKind::FunctionCall => "FunctionCall",
            NodeKind::MemberAccess => "MemberAccess",
            NodeKind::Identifier => "Identifier",
            NodeKind::Literal => "Literal",
            NodeKind::Assignment => "Assignment",
            NodeKind::IfStatement => "IfStatement",
            NodeKind::ForStatement => "ForStatement",
            NodeKind::Block => "Block",
            NodeKind::ExpressionStatement => "ExpressionStatement",
            NodeKind::InheritanceSpecifier => "InheritanceSpecifier",
            NodeKind::PragmaDirective => "PragmaDirective",
            NodeKind::Other(tag) => tag,
        }
    }

    pub fn from_tag(tag: &str) -> NodeKind {
        match tag {
            "ContractDefinition" => NodeKind::ContractDefinition,
            "FunctionDefinition" => NodeKind::FunctionDefinition,
            "ModifierDefinition" => NodeKind::ModifierDefinition,
            "VariableDeclaration" => NodeKind::VariableDeclaration,
            "FunctionCall" => NodeKind::FunctionCall,
            "MemberAccess" => NodeKind::MemberAccess,
            "Identifier" => NodeKind::Identifier,
            "Literal" => NodeKind::Literal,
            "Assignment" => NodeKind::Assignment,
            "IfStatement" => NodeKind::IfStatement,
            "ForStatement" => NodeKind::ForStatement,
            "Block" => NodeKind::Block,
            "ExpressionStatement" => NodeKind::ExpressionStatement,
            "InheritanceSpecifier" => NodeKind::InheritanceSpecifier,
            "PragmaDirective" => NodeKind::PragmaDirective,
            other => NodeKind::Other(other.to_owned()),
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl Serialize for NodeKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for NodeKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let tag = String::deserialize(deserializer)?;
        Ok(NodeKind::from_tag(&tag))
    }
}

/// One node of the tree. `label` carries the identifier text, literal text or
/// operator where applicable and is empty otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
    pub span: SourceSpan,
    pub children: Vec<AstNode>,
}

impl AstNode {
    pub fn new(kind: NodeKind, label: impl Into<String>, span: SourceSpan) -> Self {
        AstNode { id: 0, kind, label: label.into(), span, children: Vec::new() }
    }

    /// Preorder traversal of this subtree, including the node itself.
    pub fn preorder(&self) -> Preorder<'_> {
        Preorder { stack: alloc::vec![self] }
    }

    /// Number of nodes in this subtree, including the node itself.
    pub fn subtree_size(&self) -> u32 {
        let mut n = 0;
        for _ in self.preorder() {
            n += 1;
        }
        n
    }
}

/// Iterator over a subtree in preorder (node before its children, children in
/// order).
pub struct Preorder<'a> {
    stack: Vec<&'a AstNode>,
}

impl<'a> Iterator for Preorder<'a> {
    type Item = &'a AstNode;

    fn next(&mut self) -> Option<&'a AstNode> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

/// Quality indicators for an ingested tree, each a ratio in `[0,1]`.
///
/// `node_completeness` is the fraction of source lines covered by at least
/// one node span, `structural_integrity` the fraction of nodes whose child
/// spans nest line-wise within them, and `semantic_completeness` the fraction
/// of function/variable definitions carrying a nonempty label. Empty
/// denominators score 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub node_completeness: f64,
    pub structural_integrity: f64,
    pub semantic_completeness: f64,
}

impl QualityMetrics {
    pub fn is_usable(&self) -> bool {
        self.node_completeness >= QUALITY_THRESHOLD
            && self.structural_integrity >= QUALITY_THRESHOLD
            && self.semantic_completeness >= QUALITY_THRESHOLD
    }
}

/// A whole ingested tree plus metadata. Immutable after construction; safe to
/// share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ast {
    pub root: AstNode,
    pub node_count: u32,
    pub version_tag: String,
    pub source_hash: String,
    pub quality: QualityMetrics,
}

impl Ast {
    /// Finalize a built tree: assign preorder ids, count nodes, hash the
    /// source and score quality.
    pub fn from_root(mut root: AstNode, version_tag: impl Into<String>, source: &str) -> Ast {
        let mut next = 0;
        assign_preorder_ids(&mut root, &mut next);
        let mut ast = Ast {
            root,
            node_count: next,
            version_tag: version_tag.into(),
            source_hash: source_content_hash(source),
            quality: QualityMetrics {
                node_completeness: 1.0,
                structural_integrity: 1.0,
                semantic_completeness: 1.0,
            },
        };
        ast.quality = assess_quality(&ast, source);
        ast
    }

    /// Look up a node by id, exploiting preorder numbering: a node's subtree
    /// occupies the contiguous id range up to its next sibling.
    pub fn node(&self, id: NodeId) -> Option<&AstNode> {
        let mut current = &self.root;
        if id >= self.node_count {
            return None;
        }
        loop {
            if current.id == id {
                return Some(current);
            }
            let mut chosen = None;
            for (i, child) in current.children.iter().enumerate() {
                let upper = current
                    .children
                    .get(i + 1)
                    .map(|next| next.id)
                    .unwrap_or(u32::MAX);
                if child.id <= id && id < upper {
                    chosen = Some(child);
                    break;
                }
            }
            current = chosen?;
        }
    }
}

fn assign_preorder_ids(node: &mut AstNode, next: &mut u32) {
    node.id = *next;
    *next += 1;
    for child in &mut node.children {
        assign_preorder_ids(child, next);
    }
}

/// Hex-encoded SHA-256 of the source text, the cache key for ingested trees.
pub fn source_content_hash(source: &str) -> String {
    let digest = Sha256::digest(source.as_bytes());
    hex::encode(digest)
}

/// Number of lines in `source`. CRLF counts as one break; a trailing newline
/// does not open an extra line.
pub fn line_count(source: &str) -> usize {
    if source.is_empty() {
        return 0;
    }
    let breaks = source.bytes().filter(|&b| b == b'\n').count();
    if source.ends_with('\n') {
        breaks
    } else {
        breaks + 1
    }
}

/// Maps byte offsets to 1-based line / 0-based column positions.
#[derive(Debug, Clone)]
pub struct LineIndex {
    /// Byte offset at which each line starts; `line_starts[0] == 0`.
    line_starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(source: &str) -> LineIndex {
        let mut line_starts = alloc::vec![0];
        for (i, b) in source.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(i + 1);
            }
        }
        LineIndex { line_starts, len: source.len() }
    }

    pub fn source_len(&self) -> usize {
        self.len
    }

    /// (line, col) of a byte offset; offsets past the end clamp to the end.
    pub fn position(&self, offset: usize) -> (u32, u32) {
        let offset = offset.min(self.len);
        let line_idx = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        ((line_idx + 1) as u32, (offset - self.line_starts[line_idx]) as u32)
    }

    /// Byte offset of a (line, col) position; out-of-range positions clamp.
    pub fn offset(&self, line: u32, col: u32) -> usize {
        if line == 0 {
            return 0;
        }
        let idx = (line as usize - 1).min(self.line_starts.len() - 1);
        (self.line_starts[idx] + col as usize).min(self.len)
    }

    /// Convert a byte range to a span. The range end is exclusive.
    pub fn span(&self, start: usize, end: usize) -> SourceSpan {
        let (sl, sc) = self.position(start);
        let (el, ec) = self.position(end.max(start));
        SourceSpan::new(sl, sc, el, ec)
    }
}

/// Extract the source text covered by a span.
pub fn snippet(source: &str, index: &LineIndex, span: &SourceSpan) -> String {
    let start = index.offset(span.start_line, span.start_col);
    let end = index.offset(span.end_line, span.end_col).max(start);
    source.get(start..end).unwrap_or("").to_owned()
}

/// Compute the three quality ratios for an ingested tree.
pub fn assess_quality(ast: &Ast, source: &str) -> QualityMetrics {
    let total_lines = line_count(source);

    let node_completeness = if total_lines == 0 {
        1.0
    } else {
        let mut covered = alloc::vec![false; total_lines + 1];
        for node in ast.root.preorder() {
            let lo = node.span.start_line as usize;
            let hi = (node.span.end_line as usize).min(total_lines);
            covered[lo..=hi].fill(true);
        }
        let hit = covered[1..].iter().filter(|&&c| c).count();
        hit as f64 / total_lines as f64
    };

    let mut nodes = 0usize;
    let mut nested = 0usize;
    let mut defs = 0usize;
    let mut labeled = 0usize;
    for node in ast.root.preorder() {
        nodes += 1;
        if node.children.iter().all(|c| node.span.contains_span(&c.span)) {
            nested += 1;
        }
        if matches!(node.kind, NodeKind::FunctionDefinition | NodeKind::VariableDeclaration) {
            defs += 1;
            if !node.label.is_empty() {
                labeled += 1;
            }
        }
    }

    QualityMetrics {
        node_completeness,
        structural_integrity: if nodes == 0 { 1.0 } else { nested as f64 / nodes as f64 },
        semantic_completeness: if defs == 0 { 1.0 } else { labeled as f64 / defs as f64 },
    }
}

/// Label of the innermost function definition whose span contains `line`.
/// Modifier definitions are not functions and do not count.
pub fn enclosing_function(ast: &Ast, line: u32) -> Option<&str> {
    let mut best: Option<&AstNode> = None;
    let mut stack = alloc::vec![&ast.root];
    while let Some(node) = stack.pop() {
        if !node.span.contains_line(line) {
            continue;
        }
        if node.kind == NodeKind::FunctionDefinition {
            // Preorder ids make "deeper or later" the innermost candidate.
            let replace = match best {
                Some(prev) => node.span.start_line >= prev.span.start_line,
                None => true,
            };
            if replace {
                best = Some(node);
            }
        }
        stack.extend(node.children.iter());
    }
    best.map(|n| n.label.as_str())
}

/// Errors raised while ingesting an AST document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestError {
    /// The document structure is not a recognizable AST.
    MalformedDocument(String),
    /// A node's source range points outside the provided source text.
    SpanOutOfRange { start: usize, length: usize, source_len: usize },
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestError::MalformedDocument(why) => write!(f, "malformed AST document: {why}"),
            IngestError::SpanOutOfRange { start, length, source_len } => write!(
                f,
                "source range {start}:{length} exceeds source length {source_len}"
            ),
        }
    }
}

impl core::error::Error for IngestError {}
