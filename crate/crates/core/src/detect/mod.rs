//! Pattern-based static vulnerability detectors over a single version's AST,
//! plus the storage-layout comparator for cross-version collision findings.
//!
//! Detectors are deliberately syntactic: each one encodes a known bad shape
//! (external call before a state write, guard-less upgrade entry point, ...)
//! and anchors its finding to the line of the offending node. The suite is
//! deterministic: same tree in, same findings out, sorted by (line, type).

mod storage;

pub use storage::{
    compare_layouts, compute_storage_layout, StorageSlotEntry, StorageSlotLayout,
};

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ast::{Ast, AstNode, NodeKind};

/// Closed vulnerability taxonomy. Serialization is the exact tag string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VulnType {
    Reentrancy,
    AccessControl,
    IntegerOverflow,
    TxOriginAuth,
    UnprotectedDelegatecall,
    UninitializedProxy,
    StorageCollision,
    UnprotectedUpgrade,
}

impl VulnType {
    /// Taxonomy in declaration order; classification emits one row per entry.
    pub const ALL: &'static [VulnType] = &[
        VulnType::Reentrancy,
        VulnType::AccessControl,
        VulnType::IntegerOverflow,
        VulnType::TxOriginAuth,
        VulnType::UnprotectedDelegatecall,
        VulnType::UninitializedProxy,
        VulnType::StorageCollision,
        VulnType::UnprotectedUpgrade,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VulnType::Reentrancy => "Reentrancy",
            VulnType::AccessControl => "AccessControl",
            VulnType::IntegerOverflow => "IntegerOverflow",
            VulnType::TxOriginAuth => "TxOriginAuth",
            VulnType::UnprotectedDelegatecall => "UnprotectedDelegatecall",
            VulnType::UninitializedProxy => "UninitializedProxy",
            VulnType::StorageCollision => "StorageCollision",
            VulnType::UnprotectedUpgrade => "UnprotectedUpgrade",
        }
    }

    /// Trigger keywords per type, shared by the pattern score (keyword
    /// window) and the trait-match semantic feature.
    pub fn keywords(&self) -> &'static [&'static str] {
        match self {
            VulnType::Reentrancy => {
                &["call", "send", "transfer", "balance", "withdraw", "nonreentrant"]
            }
            VulnType::AccessControl => {
                &["owner", "onlyowner", "admin", "require", "msg.sender", "auth"]
            }
            VulnType::IntegerOverflow => {
                &["overflow", "unchecked", "safemath", "add", "sub", "mul", "uint256"]
            }
            VulnType::TxOriginAuth => &["tx.origin", "origin", "tx", "require", "sender"],
            VulnType::UnprotectedDelegatecall => {
                &["delegatecall", "target", "implementation", "proxy", "call"]
            }
            VulnType::UninitializedProxy => {
                &["initialize", "initializer", "initialized", "init", "constructor"]
            }
            VulnType::StorageCollision => {
                &["storage", "slot", "layout", "mapping", "uint256", "address"]
            }
            VulnType::UnprotectedUpgrade => {
                &["upgrade", "upgradeto", "implementation", "setimplementation", "onlyowner", "admin"]
            }
        }
    }

    fn keyword_set(&self) -> BTreeSet<String> {
        self.keywords().iter().map(|k| (*k).to_owned()).collect()
    }
}

impl core::fmt::Display for VulnType {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    High,
    Medium,
    Low,
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::High => "High",
            Severity::Medium => "Medium",
            Severity::Low => "Low",
        }
    }
}

/// One detected vulnerability instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    #[serde(rename = "id")]
    pub finding_id: u32,
    #[serde(rename = "type")]
    pub vuln_type: VulnType,
    pub severity: Severity,
    pub line: u32,
    #[serde(rename = "function")]
    pub function_name: Option<String>,
    pub description: String,
    pub keywords: BTreeSet<String>,
    #[serde(rename = "detector")]
    pub detector_id: String,
}

impl Finding {
    fn new(
        vuln_type: VulnType,
        severity: Severity,
        line: u32,
        function_name: Option<&str>,
        description: String,
        detector_id: &str,
    ) -> Finding {
        Finding {
            finding_id: 0,
            vuln_type,
            severity,
            line,
            function_name: function_name.map(String::from),
            description,
            keywords: vuln_type.keyword_set(),
            detector_id: detector_id.to_owned(),
        }
    }
}

/// Run every registered detector and return findings sorted by (line, type)
/// with ids renumbered.
pub fn detect(ast: &Ast, source: &str) -> Vec<Finding> {
    let _ = source; // detectors are AST-driven; the parameter keeps the
                    // calling convention uniform with snippet-based stages
    let mut findings = Vec::new();
    findings.extend(detect_reentrancy(ast));
    findings.extend(detect_access_control(ast));
    findings.extend(detect_overflow(ast));
    findings.extend(detect_tx_origin(ast));
    findings.extend(detect_delegatecall(ast));
    findings.extend(detect_uninitialized_proxy(ast));
    findings.extend(detect_unprotected_upgrade(ast));
    sort_and_renumber(&mut findings);
    findings
}

/// Canonical ordering and id assignment for a findings list.
pub fn sort_and_renumber(findings: &mut [Finding]) {
    findings.sort_by(|a, b| {
        (a.line, a.vuln_type, &a.detector_id, &a.function_name)
            .cmp(&(b.line, b.vuln_type, &b.detector_id, &b.function_name))
    });
    for (i, f) in findings.iter_mut().enumerate() {
        f.finding_id = i as u32;
    }
}

// ---------------------------------------------------------------------------
// shared AST queries
// ---------------------------------------------------------------------------

fn contracts(ast: &Ast) -> Vec<&AstNode> {
    ast.root
        .preorder()
        .filter(|n| n.kind == NodeKind::ContractDefinition)
        .collect()
}

fn is_plain_contract(contract: &AstNode) -> bool {
    !contract.children.iter().any(|c| {
        c.kind == NodeKind::Other("ContractKind".into())
            && (c.label == "interface" || c.label == "library")
    })
}

fn functions(contract: &AstNode) -> impl Iterator<Item = &AstNode> {
    contract.children.iter().filter(|c| c.kind == NodeKind::FunctionDefinition)
}

fn state_var_names(contract: &AstNode) -> BTreeSet<&str> {
    contract
        .children
        .iter()
        .filter(|c| c.kind == NodeKind::VariableDeclaration && !c.label.is_empty())
        .map(|c| c.label.as_str())
        .collect()
}

fn body_of(func: &AstNode) -> Option<&AstNode> {
    func.children.iter().find(|c| c.kind == NodeKind::Block)
}

fn has_modifier_containing(func: &AstNode, needle: &str) -> bool {
    func.children.iter().any(|c| {
        c.kind == NodeKind::Other("ModifierInvocation".into())
            && c.label.to_lowercase().contains(needle)
    })
}

fn visibility(func: &AstNode) -> Option<&str> {
    func.children
        .iter()
        .find(|c| c.kind == NodeKind::Other("Visibility".into()))
        .map(|c| c.label.as_str())
}

/// Externally reachable: explicit public/external, or no visibility at all
/// (pre-0.5 sources default to public).
fn is_externally_reachable(func: &AstNode) -> bool {
    matches!(visibility(func), Some("public") | Some("external") | None)
}

/// Callee member name of an external low-level call, unwrapping call options:
/// `target.call{value: v}(...)` and `token.transfer(...)` both resolve.
fn external_call_member(call: &AstNode) -> Option<&AstNode> {
    if call.kind != NodeKind::FunctionCall {
        return None;
    }
    let mut callee = call.children.first()?;
    if callee.kind == NodeKind::Other("FunctionCallOptions".into()) {
        callee = callee.children.first()?;
    }
    if callee.kind == NodeKind::MemberAccess
        && matches!(callee.label.as_str(), "call" | "send" | "transfer" | "delegatecall" | "staticcall")
    {
        return Some(callee);
    }
    None
}

/// Leftmost identifier label under an lvalue expression: `balances[msg.sender]`
/// resolves to `balances`.
fn base_identifier(expr: &AstNode) -> Option<&str> {
    let mut node = expr;
    loop {
        match &node.kind {
            NodeKind::Identifier => return Some(node.label.as_str()),
            NodeKind::MemberAccess => node = node.children.first()?,
            NodeKind::Other(tag) if tag == "IndexAccess" || tag == "TupleExpression" => {
                node = node.children.first()?
            }
            _ => return None,
        }
    }
}

/// State variable names mapped to whether they are mapping-typed.
fn state_var_kinds(contract: &AstNode) -> alloc::collections::BTreeMap<&str, bool> {
    contract
        .children
        .iter()
        .filter(|c| c.kind == NodeKind::VariableDeclaration && !c.label.is_empty())
        .map(|c| {
            let is_mapping = c
                .children
                .first()
                .map(|ty| ty.kind == NodeKind::Other("Mapping".into()))
                .unwrap_or(false);
            (c.label.as_str(), is_mapping)
        })
        .collect()
}

/// Does the index expression of a mapping write scope it to the caller
/// (`balances[msg.sender] = ...`)? Such writes need no separate guard.
fn indexed_by_msg_sender(lvalue: &AstNode) -> bool {
    if lvalue.kind != NodeKind::Other("IndexAccess".into()) {
        return false;
    }
    lvalue.children.iter().skip(1).any(|index| {
        index.preorder().any(|n| {
            n.kind == NodeKind::MemberAccess
                && n.label == "sender"
                && n.children
                    .first()
                    .map(|c| c.kind == NodeKind::Identifier && c.label == "msg")
                    .unwrap_or(false)
        })
    })
}

/// Does this function mutate contract state in a way that warrants an access
/// guard? Scalar state writes, increments and deletes count; mapping writes
/// keyed by `msg.sender` are self-scoped and do not.
fn mutates_guarded_state(func: &AstNode, state_vars: &alloc::collections::BTreeMap<&str, bool>) -> bool {
    let Some(body) = body_of(func) else { return false };
    let relevant_write = |lhs: &AstNode| -> bool {
        let Some(name) = base_identifier(lhs) else { return false };
        let Some(is_mapping) = state_vars.get(name) else { return false };
        !(*is_mapping && indexed_by_msg_sender(lhs))
    };
    body.preorder().any(|n| match &n.kind {
        NodeKind::Assignment => n.children.first().map(relevant_write).unwrap_or(false),
        NodeKind::Other(tag) if tag == "UnaryOperation" => {
            matches!(n.label.as_str(), "++" | "--" | "delete")
                && n.children.first().map(relevant_write).unwrap_or(false)
        }
        NodeKind::Identifier => n.label == "selfdestruct",
        _ => false,
    })
}

/// Access-guard predicate shared by several detectors: an `only*` modifier,
/// or a require over `msg.sender` / an owner/admin variable.
fn has_access_guard(func: &AstNode) -> bool {
    if has_modifier_containing(func, "only") {
        return true;
    }
    let Some(body) = body_of(func) else { return false };
    body.preorder().any(|n| {
        if !is_call_to(n, "require") {
            return false;
        }
        let mut saw_msg = false;
        let mut saw_sender = false;
        let mut saw_owner = false;
        for sub in n.preorder() {
            match &sub.kind {
                NodeKind::Identifier if sub.label == "msg" => saw_msg = true,
                NodeKind::MemberAccess if sub.label == "sender" => saw_sender = true,
                NodeKind::Identifier | NodeKind::MemberAccess => {
                    let lower = sub.label.to_lowercase();
                    if lower.contains("owner") || lower.contains("admin") {
                        saw_owner = true;
                    }
                }
                _ => {}
            }
        }
        (saw_msg && saw_sender) || saw_owner
    })
}

fn is_call_to(node: &AstNode, name: &str) -> bool {
    node.kind == NodeKind::FunctionCall
        && node
            .children
            .first()
            .map(|c| c.kind == NodeKind::Identifier && c.label == name)
            .unwrap_or(false)
}

/// Pragma strictly below 0.8 means unchecked arithmetic by default. Missing
/// pragma is treated as a modern compiler.
fn pragma_below_0_8(ast: &Ast) -> bool {
    for node in ast.root.preorder() {
        if node.kind != NodeKind::PragmaDirective {
            continue;
        }
        if !node.label.starts_with("solidity") {
            continue;
        }
        if let Some((major, minor)) = parse_pragma_version(&node.label) {
            return (major, minor) < (0, 8);
        }
    }
    false
}

fn parse_pragma_version(label: &str) -> Option<(u32, u32)> {
    // first `digits.digits` group in the label
    let bytes = label.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                let major: u32 = label[start..i].parse().ok()?;
                i += 1;
                let mstart = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let minor: u32 = label[mstart..i].parse().ok()?;
                return Some((major, minor));
            }
        } else {
            i += 1;
        }
    }
    None
}

// ---------------------------------------------------------------------------
// detectors
// ---------------------------------------------------------------------------

/// External call followed by a state write in the same function body, absent
/// a `nonReentrant`-style modifier.
pub fn detect_reentrancy(ast: &Ast) -> Vec<Finding> {
    let mut findings = Vec::new();
    for contract in contracts(ast) {
        let state_vars = state_var_names(contract);
        for func in functions(contract) {
            if has_modifier_containing(func, "nonreentrant") {
                continue;
            }
            let Some(body) = body_of(func) else { continue };
            let mut calls: Vec<&AstNode> = Vec::new();
            let mut writes: Vec<&AstNode> = Vec::new();
            for n in body.preorder() {
                if external_call_member(n).is_some() {
                    calls.push(n);
                }
                if n.kind == NodeKind::Assignment {
                    if let Some(name) = n.children.first().and_then(base_identifier) {
                        if state_vars.contains(name) {
                            writes.push(n);
                        }
                    }
                }
            }
            for call in calls {
                let call_pos = (call.span.start_line, call.span.start_col);
                if writes.iter().any(|w| (w.span.start_line, w.span.start_col) > call_pos) {
                    findings.push(Finding::new(
                        VulnType::Reentrancy,
                        Severity::High,
                        call.span.start_line,
                        Some(&func.label),
                        alloc::format!(
                            "external call in `{}` precedes a state-variable write; reentrant callers can observe stale state",
                            func.label
                        ),
                        "reentrancy",
                    ));
                    break; // one finding per function, anchored at the first offending call
                }
            }
        }
    }
    findings
}

/// State-mutating externally reachable function with no access guard at all.
pub fn detect_access_control(ast: &Ast) -> Vec<Finding> {
    let mut findings = Vec::new();
    for contract in contracts(ast) {
        if !is_plain_contract(contract) {
            continue;
        }
        let state_vars = state_var_kinds(contract);
        for func in functions(contract) {
            if matches!(func.label.as_str(), "constructor" | "fallback" | "receive") {
                continue;
            }
            // initializer- and upgrade-shaped functions are judged by their
            // dedicated detectors; double-reporting them here would turn one
            // defect into two findings
            let lower = func.label.to_lowercase();
            if lower.starts_with("init")
                || lower.starts_with("upgradeto")
                || lower == "setimplementation"
                || lower == "_setimplementation"
            {
                continue;
            }
            if !is_externally_reachable(func) || !mutates_guarded_state(func, &state_vars) {
                continue;
            }
            if has_access_guard(func) {
                continue;
            }
            findings.push(Finding::new(
                VulnType::AccessControl,
                Severity::Medium,
                func.span.start_line,
                Some(&func.label),
                alloc::format!(
                    "state-mutating function `{}` is externally reachable without modifier or sender check",
                    func.label
                ),
                "access-control",
            ));
        }
    }
    findings
}

/// Unchecked arithmetic: `+`/`-`/`*` (or compound assignment forms) under a
/// pre-0.8 pragma, or inside an `unchecked` block on any compiler.
pub fn detect_overflow(ast: &Ast) -> Vec<Finding> {
    let legacy = pragma_below_0_8(ast);
    let mut findings = Vec::new();
    let mut seen_lines = BTreeSet::new();
    for contract in contracts(ast) {
        for func in functions(contract) {
            let Some(body) = body_of(func) else { continue };
            collect_overflow(body, legacy, false, func, &mut findings, &mut seen_lines);
        }
    }
    findings
}

fn collect_overflow(
    node: &AstNode,
    legacy: bool,
    in_unchecked: bool,
    func: &AstNode,
    findings: &mut Vec<Finding>,
    seen_lines: &mut BTreeSet<u32>,
) {
    let in_unchecked = in_unchecked || (node.kind == NodeKind::Block && node.label == "unchecked");
    let flagged = if !(legacy || in_unchecked) {
        false
    } else {
        match &node.kind {
            NodeKind::Other(tag) if tag == "BinaryOperation" => {
                matches!(node.label.as_str(), "+" | "-" | "*")
                    && !node.children.iter().all(|c| c.kind == NodeKind::Literal)
            }
            NodeKind::Assignment => matches!(node.label.as_str(), "+=" | "-=" | "*="),
            _ => false,
        }
    };
    if flagged && seen_lines.insert(node.span.start_line) {
        findings.push(Finding::new(
            VulnType::IntegerOverflow,
            Severity::Medium,
            node.span.start_line,
            Some(&func.label),
            alloc::format!(
                "arithmetic in `{}` is not overflow-checked ({})",
                func.label,
                if in_unchecked { "unchecked block" } else { "pre-0.8 pragma" }
            ),
            "integer-overflow",
        ));
    }
    for child in &node.children {
        collect_overflow(child, legacy, in_unchecked, func, findings, seen_lines);
    }
}

/// `tx.origin` inside an equality comparison.
pub fn detect_tx_origin(ast: &Ast) -> Vec<Finding> {
    let mut findings = Vec::new();
    for contract in contracts(ast) {
        for func in functions(contract) {
            let Some(body) = body_of(func) else { continue };
            for n in body.preorder() {
                let is_cmp = matches!(&n.kind, NodeKind::Other(tag) if tag == "BinaryOperation")
                    && matches!(n.label.as_str(), "==" | "!=");
                if !is_cmp {
                    continue;
                }
                let has_tx_origin = n.preorder().any(|sub| {
                    sub.kind == NodeKind::MemberAccess
                        && sub.label == "origin"
                        && sub
                            .children
                            .first()
                            .map(|c| c.kind == NodeKind::Identifier && c.label == "tx")
                            .unwrap_or(false)
                });
                if has_tx_origin {
                    findings.push(Finding::new(
                        VulnType::TxOriginAuth,
                        Severity::Medium,
                        n.span.start_line,
                        Some(&func.label),
                        alloc::format!(
                            "`{}` authorizes with tx.origin, which any intermediate contract can satisfy",
                            func.label
                        ),
                        "tx-origin-auth",
                    ));
                }
            }
        }
    }
    findings
}

/// `delegatecall` whose target derives from a parameter or mutable state, in
/// a function without an access guard.
pub fn detect_delegatecall(ast: &Ast) -> Vec<Finding> {
    let mut findings = Vec::new();
    for contract in contracts(ast) {
        let mutable_state: BTreeSet<&str> = contract
            .children
            .iter()
            .filter(|c| {
                c.kind == NodeKind::VariableDeclaration
                    && !c.label.is_empty()
                    && !c.children.iter().any(|m| m.kind == NodeKind::Other("Mutability".into()))
            })
            .map(|c| c.label.as_str())
            .collect();
        for func in functions(contract) {
            if has_access_guard(func) {
                continue;
            }
            let params: BTreeSet<&str> = func
                .children
                .iter()
                .filter(|c| c.kind == NodeKind::VariableDeclaration && !c.label.is_empty())
                .map(|c| c.label.as_str())
                .collect();
            let Some(body) = body_of(func) else { continue };
            for n in body.preorder() {
                let Some(member) = external_call_member(n) else { continue };
                if member.label != "delegatecall" {
                    continue;
                }
                let target_tainted = member
                    .children
                    .first()
                    .map(|target| {
                        target.preorder().any(|sub| {
                            sub.kind == NodeKind::Identifier
                                && (params.contains(sub.label.as_str())
                                    || mutable_state.contains(sub.label.as_str()))
                        })
                    })
                    .unwrap_or(false);
                if target_tainted {
                    findings.push(Finding::new(
                        VulnType::UnprotectedDelegatecall,
                        Severity::High,
                        n.span.start_line,
                        Some(&func.label),
                        alloc::format!(
                            "`{}` delegatecalls a caller-influenced target without an access guard",
                            func.label
                        ),
                        "unprotected-delegatecall",
                    ));
                }
            }
        }
    }
    findings
}

/// Initializer-style function lacking both an `initializer` modifier and an
/// initialized-flag check.
pub fn detect_uninitialized_proxy(ast: &Ast) -> Vec<Finding> {
    let mut findings = Vec::new();
    for contract in contracts(ast) {
        if !is_plain_contract(contract) {
            continue;
        }
        for func in functions(contract) {
            let lower = func.label.to_lowercase();
            if !(lower == "initialize" || lower.starts_with("init")) || lower == "initializer" {
                continue;
            }
            if !is_externally_reachable(func) {
                continue;
            }
            if has_modifier_containing(func, "initializer") || has_modifier_containing(func, "only")
            {
                continue;
            }
            let guarded = body_of(func)
                .map(|body| {
                    body.preorder().any(|n| {
                        (is_call_to(n, "require") || n.kind == NodeKind::IfStatement)
                            && n.preorder().any(|sub| {
                                matches!(sub.kind, NodeKind::Identifier | NodeKind::MemberAccess)
                                    && sub.label.to_lowercase().contains("initial")
                            })
                    })
                })
                .unwrap_or(false);
            if !guarded {
                findings.push(Finding::new(
                    VulnType::UninitializedProxy,
                    Severity::High,
                    func.span.start_line,
                    Some(&func.label),
                    alloc::format!(
                        "initializer `{}` can be re-invoked: no initializer modifier or initialized-flag check",
                        func.label
                    ),
                    "uninitialized-proxy",
                ));
            }
        }
    }
    findings
}

/// Upgrade entry points (`upgradeTo`, `setImplementation`, ...) without an
/// access guard.
pub fn detect_unprotected_upgrade(ast: &Ast) -> Vec<Finding> {
    let mut findings = Vec::new();
    for contract in contracts(ast) {
        if !is_plain_contract(contract) {
            continue;
        }
        for func in functions(contract) {
            let lower = func.label.to_lowercase();
            let is_upgrade = lower.starts_with("upgradeto")
                || lower == "setimplementation"
                || lower == "_setimplementation";
            if !is_upgrade || !is_externally_reachable(func) {
                continue;
            }
            if has_access_guard(func) {
                continue;
            }
            findings.push(Finding::new(
                VulnType::UnprotectedUpgrade,
                Severity::High,
                func.span.start_line,
                Some(&func.label),
                alloc::format!("upgrade entry point `{}` has no access guard", func.label),
                "unprotected-upgrade",
            ));
        }
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_source;

    fn types_of(findings: &[Finding]) -> Vec<VulnType> {
        findings.iter().map(|f| f.vuln_type).collect()
    }

    #[test]
    fn clean_contract_has_no_findings() {
        let src = "pragma solidity ^0.8.0;\ncontract Clean {\n  uint256 total;\n  address owner;\n  constructor() {\n    owner = msg.sender;\n  }\n  function set(uint256 v) public {\n    require(msg.sender == owner, \"auth\");\n    total = v;\n  }\n}\n";
        let ast = parse_source(src, "v1");
        assert_eq!(detect(&ast, src), Vec::new());
    }

    #[test]
    fn empty_contract_has_no_findings() {
        let src = "contract Empty {}\n";
        let ast = parse_source(src, "v1");
        assert!(detect(&ast, src).is_empty());
    }

    #[test]
    fn reentrancy_call_before_state_write() {
        let src = "pragma solidity ^0.8.0;\ncontract Bank {\n  mapping(address => uint256) balances;\n  address owner;\n  function withdraw() public {\n    uint256 amount = balances[msg.sender];\n    (bool ok, ) = msg.sender.call{value: amount}(\"\");\n    require(ok, \"send failed\");\n    balances[msg.sender] = 0;\n  }\n}\n";
        let ast = parse_source(src, "v1");
        let findings = detect_reentrancy(&ast);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].line, 7);
        assert_eq!(findings[0].severity, Severity::High);
        assert_eq!(findings[0].function_name.as_deref(), Some("withdraw"));
    }

    #[test]
    fn reentrancy_not_flagged_when_write_precedes_call() {
        let src = "pragma solidity ^0.8.0;\ncontract Bank {\n  mapping(address => uint256) balances;\n  function withdraw() public {\n    uint256 amount = balances[msg.sender];\n    balances[msg.sender] = 0;\n    (bool ok, ) = msg.sender.call{value: amount}(\"\");\n    require(ok);\n  }\n}\n";
        let ast = parse_source(src, "v1");
        assert!(detect_reentrancy(&ast).is_empty());
    }

    #[test]
    fn reentrancy_skipped_under_nonreentrant_modifier() {
        let src = "contract Bank {\n  uint256 total;\n  function withdraw() public nonReentrant {\n    msg.sender.call{value: 1}(\"\");\n    total = 0;\n  }\n}\n";
        let ast = parse_source(src, "v1");
        assert!(detect_reentrancy(&ast).is_empty());
    }

    #[test]
    fn tx_origin_comparison_flagged() {
        let src = "pragma solidity ^0.8.0;\ncontract A {\n  address owner;\n  uint256 x;\n  function act() public {\n    require(tx.origin == owner);\n    x = 1;\n  }\n}\n";
        let ast = parse_source(src, "v1");
        let findings = detect_tx_origin(&ast);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].line, 6);
        assert_eq!(findings[0].severity, Severity::Medium);
        // the guard satisfies the access-control detector, so the full suite
        // reports exactly the tx-origin finding
        assert_eq!(types_of(&detect(&ast, src)), [VulnType::TxOriginAuth]);
    }

    #[test]
    fn access_control_missing_guard() {
        let src = "pragma solidity ^0.8.0;\ncontract A {\n  address owner;\n  function setOwner(address o) external {\n    owner = o;\n  }\n}\n";
        let ast = parse_source(src, "v1");
        let findings = detect_access_control(&ast);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].line, 4);
        // guarded variant is clean
        let guarded = "pragma solidity ^0.8.0;\ncontract A {\n  address owner;\n  function setOwner(address o) external {\n    require(msg.sender == owner);\n    owner = o;\n  }\n}\n";
        let ast2 = parse_source(guarded, "v1");
        assert!(detect_access_control(&ast2).is_empty());
        // modifier variant is clean
        let modded = "pragma solidity ^0.8.0;\ncontract A {\n  address owner;\n  function setOwner(address o) external onlyOwner {\n    owner = o;\n  }\n}\n";
        let ast3 = parse_source(modded, "v1");
        assert!(detect_access_control(&ast3).is_empty());
        // mapping writes keyed by msg.sender are self-scoped, no guard needed
        let self_scoped = "pragma solidity ^0.8.0;\ncontract A {\n  mapping(address => uint256) balances;\n  function reset() public {\n    balances[msg.sender] = 0;\n  }\n}\n";
        assert!(detect_access_control(&parse_source(self_scoped, "v1")).is_empty());
        // ... but writing someone else's entry still demands one
        let other_scoped = "pragma solidity ^0.8.0;\ncontract A {\n  mapping(address => uint256) balances;\n  function clobber(address who) public {\n    balances[who] = 0;\n  }\n}\n";
        assert_eq!(detect_access_control(&parse_source(other_scoped, "v1")).len(), 1);
    }

    #[test]
    fn overflow_under_legacy_pragma_and_unchecked_blocks() {
        let src = "pragma solidity ^0.7.0;\ncontract M {\n  uint256 total;\n  address owner;\n  function add(uint256 v) public {\n    require(msg.sender == owner);\n    total = total + v;\n  }\n}\n";
        let ast = parse_source(src, "v1");
        let findings = detect_overflow(&ast);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].line, 7);

        // same code on 0.8 is clean
        let modern = src.replace("^0.7.0", "^0.8.0");
        let ast2 = parse_source(&modern, "v1");
        assert!(detect_overflow(&ast2).is_empty());

        // ... unless the arithmetic sits in an unchecked block
        let unchecked = "pragma solidity ^0.8.0;\ncontract M {\n  uint256 total;\n  function bump(uint256 v) public {\n    unchecked {\n      total += v;\n    }\n  }\n}\n";
        let ast3 = parse_source(unchecked, "v1");
        let f3 = detect_overflow(&ast3);
        assert_eq!(f3.len(), 1);
        assert_eq!(f3[0].line, 6);
    }

    #[test]
    fn delegatecall_with_tainted_target() {
        let src = "pragma solidity ^0.8.0;\ncontract P {\n  function exec(address target, bytes memory data) public {\n    target.delegatecall(data);\n  }\n}\n";
        let ast = parse_source(src, "v1");
        let findings = detect_delegatecall(&ast);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].line, 4);
        assert_eq!(findings[0].severity, Severity::High);

        // guarded → clean
        let guarded = "pragma solidity ^0.8.0;\ncontract P {\n  address owner;\n  function exec(address target, bytes memory data) public {\n    require(msg.sender == owner);\n    target.delegatecall(data);\n  }\n}\n";
        assert!(detect_delegatecall(&parse_source(guarded, "v1")).is_empty());
    }

    #[test]
    fn uninitialized_proxy_guard_variants() {
        let bare = "pragma solidity ^0.8.0;\ncontract L {\n  address owner;\n  function initialize(address o) public {\n    owner = o;\n  }\n}\n";
        let findings = detect_uninitialized_proxy(&parse_source(bare, "v1"));
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].line, 4);

        let flag_checked = "pragma solidity ^0.8.0;\ncontract L {\n  bool initialized;\n  address owner;\n  function initialize(address o) public {\n    require(!initialized, \"init\");\n    initialized = true;\n    owner = o;\n  }\n}\n";
        assert!(detect_uninitialized_proxy(&parse_source(flag_checked, "v1")).is_empty());

        let modifier_guarded = "pragma solidity ^0.8.0;\ncontract L {\n  address owner;\n  function initialize(address o) public initializer {\n    owner = o;\n  }\n}\n";
        assert!(detect_uninitialized_proxy(&parse_source(modifier_guarded, "v1")).is_empty());
    }

    #[test]
    fn unprotected_upgrade_entry_points() {
        let src = "pragma solidity ^0.8.0;\ncontract Proxy {\n  address implementation;\n  function upgradeTo(address impl) external {\n    implementation = impl;\n  }\n}\n";
        let findings = detect_unprotected_upgrade(&parse_source(src, "v1"));
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].line, 4);
        assert_eq!(findings[0].severity, Severity::High);

        let guarded = "pragma solidity ^0.8.0;\ncontract Proxy {\n  address implementation;\n  function upgradeTo(address impl) external onlyOwner {\n    implementation = impl;\n  }\n}\n";
        assert!(detect_unprotected_upgrade(&parse_source(guarded, "v1")).is_empty());
    }

    #[test]
    fn detect_is_deterministic_and_sorted() {
        let src = "pragma solidity ^0.7.0;\ncontract A {\n  uint256 x;\n  address owner;\n  function f(uint256 v) public {\n    x = x + v;\n  }\n  function g() public {\n    require(tx.origin == owner);\n    x = 1;\n  }\n}\n";
        let ast = parse_source(src, "v1");
        let a = detect(&ast, src);
        let b = detect(&ast, src);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| (w[0].line, w[0].vuln_type) <= (w[1].line, w[1].vuln_type)));
        assert!(a.iter().enumerate().all(|(i, f)| f.finding_id == i as u32));
        // every finding's line is covered by some node span
        for f in &a {
            assert!(ast.root.preorder().any(|n| n.span.contains_line(f.line)));
        }
    }
}
