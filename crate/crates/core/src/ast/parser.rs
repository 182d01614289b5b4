//! Built-in fallback parser for Solidity sources.
//!
//! Used when no compiler-emitted AST document accompanies a source file. This
//! is not a full grammar: it is a tolerant recursive-descent parser over the
//! constructs the detectors and the differ care about (contracts, state
//! variables, functions, modifiers, statements and ordinary expressions).
//! Anything it cannot make sense of is preserved as an `Unparsed` leaf, and
//! the resulting tree is scored by the usual quality metrics rather than
//! rejected.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Ast, AstNode, LineIndex, NodeKind, SourceSpan};

/// Parse a source file into an [`Ast`]. Never fails; low-quality trees are
/// reported through [`super::QualityMetrics`].
pub fn parse_source(source: &str, version_tag: &str) -> Ast {
    let index = LineIndex::new(source);
    let toks = tokenize(source);
    let mut parser = Parser { toks, pos: 0, index: &index };
    let root = parser.source_unit();
    Ast::from_root(root, version_tag, source)
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokenKind {
    Ident,
    Number,
    Str,
    Punct,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    text: String,
    start: usize,
    end: usize,
}

const MULTI_PUNCT: &[&str] = &[
    "<<=", ">>=", "**", "++", "--", "+=", "-=", "*=", "/=", "%=", "==", "!=", "<=", ">=", "&&",
    "||", "=>", "->", "|=", "&=", "^=", "<<", ">>",
];

fn tokenize(source: &str) -> Vec<Token> {
    let bytes = source.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // comments
        if b == b'/' && i + 1 < bytes.len() {
            if bytes[i + 1] == b'/' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            if bytes[i + 1] == b'*' {
                i += 2;
                while i + 1 < bytes.len() && !(bytes[i] == b'*' && bytes[i + 1] == b'/') {
                    i += 1;
                }
                i = (i + 2).min(bytes.len());
                continue;
            }
        }
        let start = i;
        if b.is_ascii_alphabetic() || b == b'_' || b == b'$' {
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$')
            {
                i += 1;
            }
            toks.push(Token {
                kind: TokenKind::Ident,
                text: source[start..i].to_owned(),
                start,
                end: i,
            });
            continue;
        }
        if b.is_ascii_digit() {
            if b == b'0' && i + 1 < bytes.len() && (bytes[i + 1] | 0x20) == b'x' {
                i += 2;
                while i < bytes.len() && (bytes[i].is_ascii_hexdigit() || bytes[i] == b'_') {
                    i += 1;
                }
            } else {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                    i += 1;
                }
                if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                        i += 1;
                    }
                }
                if i < bytes.len()
                    && (bytes[i] | 0x20) == b'e'
                    && i + 1 < bytes.len()
                    && (bytes[i + 1].is_ascii_digit() || bytes[i + 1] == b'+' || bytes[i + 1] == b'-')
                {
                    i += 2;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            toks.push(Token {
                kind: TokenKind::Number,
                text: source[start..i].to_owned(),
                start,
                end: i,
            });
            continue;
        }
        if b == b'"' || b == b'\'' {
            let quote = b;
            i += 1;
            let inner_start = i;
            while i < bytes.len() && bytes[i] != quote {
                if bytes[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            let inner_end = i.min(bytes.len());
            i = (i + 1).min(bytes.len());
            toks.push(Token {
                kind: TokenKind::Str,
                text: source[inner_start..inner_end].to_owned(),
                start,
                end: i,
            });
            continue;
        }
        // punctuation, longest match first
        let rest = &source[i..];
        let mut matched = None;
        for cand in MULTI_PUNCT {
            if rest.starts_with(cand) {
                matched = Some(cand.len());
                break;
            }
        }
        let len = matched.unwrap_or(1);
        i += len;
        toks.push(Token {
            kind: TokenKind::Punct,
            text: source[start..i].to_owned(),
            start,
            end: i,
        });
    }
    toks
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

const ASSIGN_OPS: &[&str] =
    &["=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>="];

/// Binary operator precedence levels, loosest first.
const BINARY_LEVELS: &[&[&str]] = &[
    &["||"],
    &["&&"],
    &["==", "!="],
    &["<", ">", "<=", ">="],
    &["|"],
    &["^"],
    &["&"],
    &["<<", ">>"],
    &["+", "-"],
    &["*", "/", "%"],
    &["**"],
];

fn is_elementary(name: &str) -> bool {
    match name {
        "address" | "bool" | "string" | "bytes" | "byte" | "uint" | "int" => true,
        _ => {
            for (prefix, max) in [("uint", 256u32), ("int", 256), ("bytes", 32)] {
                if let Some(suffix) = name.strip_prefix(prefix) {
                    if let Ok(n) = suffix.parse::<u32>() {
                        let ok = if *prefix.as_bytes().last().unwrap() == b's' {
                            (1..=max).contains(&n)
                        } else {
                            n % 8 == 0 && (8..=max).contains(&n)
                        };
                        if ok {
                            return true;
                        }
                    }
                }
            }
            name.starts_with("fixed") || name.starts_with("ufixed")
        }
    }
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    index: &'a LineIndex,
}

impl Parser<'_> {
    fn eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.toks.get(self.pos + n)
    }

    fn peek_text(&self) -> &str {
        self.peek().map(|t| t.text.as_str()).unwrap_or("")
    }

    fn bump(&mut self) -> Token {
        let tok = self.toks[self.pos].clone();
        self.pos += 1;
        tok
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.peek_text() == text {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn at_ident(&self) -> bool {
        self.peek().map(|t| t.kind == TokenKind::Ident).unwrap_or(false)
    }

    /// Span covering tokens `[from, self.pos)`.
    fn span_from(&self, from: usize) -> SourceSpan {
        if from >= self.toks.len() {
            let end = self.index.source_len();
            return self.index.span(end, end);
        }
        let start = self.toks[from].start;
        let last = self.pos.saturating_sub(1).max(from).min(self.toks.len() - 1);
        let end = self.toks[last].end.max(start);
        self.index.span(start, end)
    }

    fn node(&self, kind: NodeKind, label: impl Into<String>, from: usize) -> AstNode {
        AstNode::new(kind, label, self.span_from(from))
    }

    fn other(&self, tag: &str, label: impl Into<String>, from: usize) -> AstNode {
        self.node(NodeKind::Other(tag.to_owned()), label, from)
    }

    /// Skip past the next `;`, or stop before `}`/eof, so a parse error in
    /// one statement cannot swallow its enclosing block.
    fn recover_to_semi(&mut self) {
        while !self.eof() {
            match self.peek_text() {
                ";" => {
                    self.pos += 1;
                    return;
                }
                "}" | "{" => return,
                _ => {
                    self.pos += 1;
                }
            }
        }
    }

    fn skip_balanced(&mut self, open: &str, close: &str) {
        if !self.eat(open) {
            return;
        }
        let mut depth = 1;
        while !self.eof() && depth > 0 {
            let t = self.bump();
            if t.text == open {
                depth += 1;
            } else if t.text == close {
                depth -= 1;
            }
        }
    }

    // -- top level ----------------------------------------------------------

    fn source_unit(&mut self) -> AstNode {
        let from = self.pos;
        let mut children = Vec::new();
        while !self.eof() {
            match self.peek_text() {
                "pragma" => children.push(self.pragma()),
                "import" => children.push(self.import()),
                "abstract" | "contract" | "interface" | "library" => {
                    children.push(self.contract())
                }
                _ => {
                    let m = self.pos;
                    let tok = self.bump();
                    children.push(self.other("Unparsed", tok.text, m));
                }
            }
        }
        let mut root = self.other("SourceUnit", "", from);
        // the unit spans the whole file, comments included
        root.span = if self.index.source_len() == 0 {
            SourceSpan::point(1, 0)
        } else {
            self.index.span(0, self.index.source_len())
        };
        root.children = children;
        root
    }

    fn pragma(&mut self) -> AstNode {
        let from = self.pos;
        self.bump(); // pragma
        let mut label = String::new();
        if self.at_ident() {
            label.push_str(&self.bump().text);
        }
        let mut rest = String::new();
        while !self.eof() && self.peek_text() != ";" {
            rest.push_str(&self.bump().text);
        }
        if !rest.is_empty() {
            label.push(' ');
            label.push_str(&rest);
        }
        self.eat(";");
        self.node(NodeKind::PragmaDirective, label, from)
    }

    fn import(&mut self) -> AstNode {
        let from = self.pos;
        self.bump(); // import
        let mut path = String::new();
        while !self.eof() && self.peek_text() != ";" {
            let t = self.bump();
            if t.kind == TokenKind::Str && path.is_empty() {
                path = t.text;
            }
        }
        self.eat(";");
        self.other("ImportDirective", path, from)
    }

    fn contract(&mut self) -> AstNode {
        let from = self.pos;
        self.eat("abstract");
        let kw_at = self.pos;
        let kw = self.bump().text; // contract | interface | library
        let name = if self.at_ident() { self.bump().text } else { String::new() };
        let mut children = Vec::new();
        if kw != "contract" {
            children.push(self.other("ContractKind", kw, kw_at));
        }
        if self.eat("is") {
            loop {
                let base_from = self.pos;
                let base = self.dotted_name();
                if base.is_empty() {
                    break;
                }
                if self.peek_text() == "(" {
                    self.skip_balanced("(", ")");
                }
                children.push(self.node(NodeKind::InheritanceSpecifier, base, base_from));
                if !self.eat(",") {
                    break;
                }
            }
        }
        if self.eat("{") {
            while !self.eof() && self.peek_text() != "}" {
                let before = self.pos;
                children.push(self.contract_member());
                if self.pos == before {
                    let m = self.pos;
                    let tok = self.bump();
                    children.push(self.other("Unparsed", tok.text, m));
                }
            }
            self.eat("}");
        }
        let mut node = self.node(NodeKind::ContractDefinition, name, from);
        node.children = children;
        node
    }

    fn dotted_name(&mut self) -> String {
        let mut name = String::new();
        if self.at_ident() {
            name.push_str(&self.bump().text);
            while self.peek_text() == "."
                && self.peek_at(1).map(|t| t.kind == TokenKind::Ident).unwrap_or(false)
            {
                self.bump();
                name.push('.');
                name.push_str(&self.bump().text);
            }
        }
        name
    }

    fn contract_member(&mut self) -> AstNode {
        match self.peek_text() {
            "function" | "constructor" | "fallback" | "receive" => self.function_def(),
            "modifier" => self.modifier_def(),
            "event" | "error" => self.event_def(),
            "struct" => self.struct_def(),
            "enum" => self.enum_def(),
            "using" => self.using_directive(),
            _ => self.state_variable(),
        }
    }

    fn function_def(&mut self) -> AstNode {
        let from = self.pos;
        let kw = self.bump().text; // function | constructor | fallback | receive
        let name = if kw == "function" {
            if self.at_ident() { self.bump().text } else { String::new() }
        } else {
            kw
        };
        let mut children = self.parameter_list();
        // attribute soup until the body or a terminating semicolon
        while !self.eof() {
            match self.peek_text() {
                "{" | ";" => break,
                "public" | "external" | "internal" | "private" => {
                    let m = self.pos;
                    let vis = self.bump().text;
                    children.push(self.other("Visibility", vis, m));
                }
                "view" | "pure" | "payable" => {
                    let m = self.pos;
                    let sm = self.bump().text;
                    children.push(self.other("StateMutability", sm, m));
                }
                "virtual" => {
                    self.bump();
                }
                "override" => {
                    self.bump();
                    if self.peek_text() == "(" {
                        self.skip_balanced("(", ")");
                    }
                }
                "returns" => {
                    self.bump();
                    children.extend(self.parameter_list());
                }
                _ if self.at_ident() => {
                    let m = self.pos;
                    let mname = self.dotted_name();
                    let mut minode = self.other("ModifierInvocation", mname, m);
                    if self.peek_text() == "(" {
                        minode.children = self.call_arguments();
                        minode.span = self.span_from(m);
                    }
                    children.push(minode);
                }
                _ => {
                    self.bump();
                }
            }
        }
        if self.peek_text() == "{" {
            children.push(self.block(""));
        } else {
            self.eat(";");
        }
        let mut node = self.node(NodeKind::FunctionDefinition, name, from);
        node.children = children;
        node
    }

    fn modifier_def(&mut self) -> AstNode {
        let from = self.pos;
        self.bump(); // modifier
        let name = if self.at_ident() { self.bump().text } else { String::new() };
        let mut children = Vec::new();
        if self.peek_text() == "(" {
            children = self.parameter_list();
        }
        while !self.eof() && self.peek_text() != "{" && self.peek_text() != ";" {
            self.bump();
        }
        if self.peek_text() == "{" {
            children.push(self.block(""));
        } else {
            self.eat(";");
        }
        let mut node = self.node(NodeKind::ModifierDefinition, name, from);
        node.children = children;
        node
    }

    fn event_def(&mut self) -> AstNode {
        let from = self.pos;
        let kw = self.bump().text; // event | error
        let name = if self.at_ident() { self.bump().text } else { String::new() };
        let mut node = self.other(
            if kw == "event" { "EventDefinition" } else { "ErrorDefinition" },
            name,
            from,
        );
        node.children = self.parameter_list();
        node.span = self.span_from(from);
        self.recover_to_semi();
        node.span = self.span_from(from);
        node
    }

    fn struct_def(&mut self) -> AstNode {
        let from = self.pos;
        self.bump(); // struct
        let name = if self.at_ident() { self.bump().text } else { String::new() };
        let mut children = Vec::new();
        if self.eat("{") {
            while !self.eof() && self.peek_text() != "}" {
                let m = self.pos;
                match self.type_name() {
                    Some(ty) => {
                        let field = if self.at_ident() { self.bump().text } else { String::new() };
                        let mut decl = self.node(NodeKind::VariableDeclaration, field, m);
                        decl.children.push(ty);
                        self.recover_to_semi();
                        decl.span = self.span_from(m);
                        children.push(decl);
                    }
                    None => self.recover_to_semi(),
                }
            }
            self.eat("}");
        }
        let mut node = self.other("StructDefinition", name, from);
        node.children = children;
        node
    }

    fn enum_def(&mut self) -> AstNode {
        let from = self.pos;
        self.bump(); // enum
        let name = if self.at_ident() { self.bump().text } else { String::new() };
        let mut children = Vec::new();
        if self.eat("{") {
            while !self.eof() && self.peek_text() != "}" {
                if self.at_ident() {
                    let m = self.pos;
                    let value = self.bump().text;
                    children.push(self.other("EnumValue", value, m));
                } else {
                    self.bump();
                }
            }
            self.eat("}");
        }
        let mut node = self.other("EnumDefinition", name, from);
        node.children = children;
        node
    }

    fn using_directive(&mut self) -> AstNode {
        let from = self.pos;
        self.bump(); // using
        let lib = self.dotted_name();
        self.recover_to_semi();
        self.other("UsingForDirective", lib, from)
    }

    fn state_variable(&mut self) -> AstNode {
        let from = self.pos;
        let Some(ty) = self.type_name() else {
            let tok = self.bump();
            return self.other("Unparsed", tok.text, from);
        };
        let mut children = alloc::vec![ty];
        let mut name = String::new();
        while !self.eof() {
            match self.peek_text() {
                "public" | "private" | "internal" => {
                    let m = self.pos;
                    let vis = self.bump().text;
                    children.push(self.other("Visibility", vis, m));
                }
                "constant" | "immutable" => {
                    let m = self.pos;
                    let kw = self.bump().text;
                    children.push(self.other("Mutability", kw, m));
                }
                "override" => {
                    self.bump();
                }
                _ => break,
            }
        }
        if self.at_ident() {
            name = self.bump().text;
        }
        if self.eat("=") {
            children.push(self.expression());
        }
        self.recover_to_semi();
        let mut node = self.node(NodeKind::VariableDeclaration, name, from);
        node.children = children;
        node
    }

    // -- types ---------------------------------------------------------------

    /// Attempt to parse a type name; restores the cursor on failure.
    fn type_name(&mut self) -> Option<AstNode> {
        let save = self.pos;
        let from = self.pos;
        let tok = self.peek()?;
        if tok.kind != TokenKind::Ident {
            return None;
        }
        let mut node = if tok.text == "mapping" {
            self.bump();
            if !self.eat("(") {
                self.pos = save;
                return None;
            }
            let key = self.type_name()?;
            if !self.eat("=>") {
                self.pos = save;
                return None;
            }
            let value = self.type_name()?;
            if !self.eat(")") {
                self.pos = save;
                return None;
            }
            let sig = alloc::format!("mapping({} => {})", type_sig(&key), type_sig(&value));
            self.other("Mapping", sig, from)
        } else if tok.text == "function" {
            // function-typed values: consume the parameter list, keep a stub
            self.bump();
            self.skip_balanced("(", ")");
            self.other("FunctionTypeName", "function", from)
        } else {
            let name = self.dotted_name();
            if name.is_empty() {
                self.pos = save;
                return None;
            }
            if is_elementary(&name) {
                let mut label = name;
                if label == "address" && self.peek_text() == "payable" {
                    self.bump();
                    label.push_str(" payable");
                }
                self.other("ElementaryTypeName", label, from)
            } else {
                self.other("UserDefinedTypeName", name, from)
            }
        };
        // array suffixes
        while self.peek_text() == "[" {
            self.bump();
            let mut dim = String::new();
            if self.peek_text() != "]" {
                // only literal dimensions are kept in the signature
                while !self.eof() && self.peek_text() != "]" {
                    dim.push_str(&self.bump().text);
                }
            }
            if !self.eat("]") {
                self.pos = save;
                return None;
            }
            let sig = alloc::format!("{}[{}]", node.label, dim);
            node = self.other("ArrayTypeName", sig, from);
        }
        Some(node)
    }

    /// `( [type [location] [name]] , ... )`; named entries become variable
    /// declarations, unnamed ones bare type nodes.
    fn parameter_list(&mut self) -> Vec<AstNode> {
        let mut out = Vec::new();
        if !self.eat("(") {
            return out;
        }
        while !self.eof() && self.peek_text() != ")" {
            let from = self.pos;
            match self.type_name() {
                Some(ty) => {
                    while matches!(
                        self.peek_text(),
                        "memory" | "calldata" | "storage" | "indexed"
                    ) {
                        self.bump();
                    }
                    if self.at_ident() {
                        let name = self.bump().text;
                        let mut decl = self.node(NodeKind::VariableDeclaration, name, from);
                        decl.children.push(ty);
                        out.push(decl);
                    } else {
                        out.push(ty);
                    }
                }
                None => {
                    self.bump();
                }
            }
            if !self.eat(",") && self.peek_text() != ")" {
                // tolerate missing separators
                if self.peek_text() != ")" && !self.eof() && self.peek_text() == ";" {
                    break;
                }
            }
        }
        self.eat(")");
        out
    }

    // -- statements ----------------------------------------------------------

    fn block(&mut self, label: &str) -> AstNode {
        let from = self.pos;
        self.eat("{");
        let mut children = Vec::new();
        while !self.eof() && self.peek_text() != "}" {
            let before = self.pos;
            children.push(self.statement());
            if self.pos == before {
                let m = self.pos;
                let tok = self.bump();
                children.push(self.other("Unparsed", tok.text, m));
            }
        }
        self.eat("}");
        let mut node = self.node(NodeKind::Block, label, from);
        node.children = children;
        node
    }

    fn statement(&mut self) -> AstNode {
        let from = self.pos;
        match self.peek_text() {
            "{" => return self.block(""),
            "unchecked" => {
                self.bump();
                let mut node = self.block("unchecked");
                node.span = self.span_from(from);
                return node;
            }
            "if" => {
                self.bump();
                self.eat("(");
                let cond = self.expression();
                self.eat(")");
                let then = self.statement();
                let mut children = alloc::vec![cond, then];
                if self.eat("else") {
                    children.push(self.statement());
                }
                let mut node = self.node(NodeKind::IfStatement, "", from);
                node.children = children;
                return node;
            }
            "for" => {
                self.bump();
                self.eat("(");
                let mut children = Vec::new();
                if !self.eat(";") {
                    children.push(self.simple_statement());
                }
                if self.peek_text() != ";" && self.peek_text() != ")" {
                    children.push(self.expression());
                }
                self.eat(";");
                if self.peek_text() != ")" {
                    children.push(self.expression());
                }
                self.eat(")");
                children.push(self.statement());
                let mut node = self.node(NodeKind::ForStatement, "", from);
                node.children = children;
                return node;
            }
            "while" => {
                self.bump();
                self.eat("(");
                let cond = self.expression();
                self.eat(")");
                let body = self.statement();
                let mut node = self.other("WhileStatement", "", from);
                node.children = alloc::vec![cond, body];
                return node;
            }
            "do" => {
                self.bump();
                let body = self.statement();
                self.eat("while");
                self.eat("(");
                let cond = self.expression();
                self.eat(")");
                self.eat(";");
                let mut node = self.other("DoWhileStatement", "", from);
                node.children = alloc::vec![body, cond];
                return node;
            }
            "return" => {
                self.bump();
                let mut node = self.other("Return", "", from);
                if self.peek_text() != ";" {
                    node.children.push(self.expression());
                }
                self.eat(";");
                node.span = self.span_from(from);
                return node;
            }
            "emit" => {
                self.bump();
                let call = self.expression();
                self.eat(";");
                let mut node = self.other("EmitStatement", "", from);
                node.children.push(call);
                node.span = self.span_from(from);
                return node;
            }
            "break" | "continue" => {
                let kw = self.bump().text;
                self.eat(";");
                let tag = if kw == "break" { "Break" } else { "Continue" };
                return self.other(tag, "", from);
            }
            "assembly" => {
                self.bump();
                if self.peek().map(|t| t.kind == TokenKind::Str).unwrap_or(false) {
                    self.bump();
                }
                self.skip_balanced("{", "}");
                return self.other("InlineAssembly", "", from);
            }
            _ => {}
        }
        let stmt = self.simple_statement();
        self.eat(";");
        stmt
    }

    /// Declaration or expression statement, without the trailing semicolon.
    fn simple_statement(&mut self) -> AstNode {
        let from = self.pos;
        // tuple declaration: `(bool ok, ) = ...`
        if self.peek_text() == "(" {
            if let Some(node) = self.try_tuple_declaration() {
                return node;
            }
        }
        // single declaration: `uint256 x = ...`
        if self.at_ident() {
            let save = self.pos;
            if let Some(ty) = self.type_name() {
                while matches!(self.peek_text(), "memory" | "calldata" | "storage") {
                    self.bump();
                }
                if self.at_ident() {
                    let name = self.bump().text;
                    let mut decl = self.node(NodeKind::VariableDeclaration, name, from);
                    decl.children.push(ty);
                    if self.eat("=") {
                        decl.children.push(self.expression());
                    }
                    decl.span = self.span_from(from);
                    return decl;
                }
            }
            self.pos = save;
        }
        let expr = self.expression();
        let mut node = self.node(NodeKind::ExpressionStatement, "", from);
        node.children.push(expr);
        node
    }

    fn try_tuple_declaration(&mut self) -> Option<AstNode> {
        let save = self.pos;
        let from = self.pos;
        self.eat("(");
        let mut decls = Vec::new();
        let mut any = false;
        loop {
            if self.peek_text() == ")" {
                break;
            }
            if self.peek_text() == "," {
                self.bump(); // empty slot
                continue;
            }
            let m = self.pos;
            let ty = match self.type_name() {
                Some(ty) => ty,
                None => {
                    self.pos = save;
                    return None;
                }
            };
            while matches!(self.peek_text(), "memory" | "calldata" | "storage") {
                self.bump();
            }
            if !self.at_ident() {
                self.pos = save;
                return None;
            }
            let name = self.bump().text;
            let mut decl = self.node(NodeKind::VariableDeclaration, name, m);
            decl.children.push(ty);
            decls.push(decl);
            any = true;
            if !self.eat(",") {
                break;
            }
        }
        if !self.eat(")") || !any {
            self.pos = save;
            return None;
        }
        if !self.eat("=") {
            self.pos = save;
            return None;
        }
        let rhs = self.expression();
        let mut node = self.other("TupleDeclaration", "", from);
        node.children = decls;
        node.children.push(rhs);
        node.span = self.span_from(from);
        Some(node)
    }

    // -- expressions ----------------------------------------------------------

    fn expression(&mut self) -> AstNode {
        self.assignment()
    }

    fn assignment(&mut self) -> AstNode {
        let from = self.pos;
        let lhs = self.conditional();
        if ASSIGN_OPS.contains(&self.peek_text()) {
            let op = self.bump().text;
            let rhs = self.assignment();
            let mut node = self.node(NodeKind::Assignment, op, from);
            node.children = alloc::vec![lhs, rhs];
            return node;
        }
        lhs
    }

    fn conditional(&mut self) -> AstNode {
        let from = self.pos;
        let cond = self.binary(0);
        if self.eat("?") {
            let then = self.expression();
            self.eat(":");
            let alt = self.conditional();
            let mut node = self.other("Conditional", "", from);
            node.children = alloc::vec![cond, then, alt];
            return node;
        }
        cond
    }

    fn binary(&mut self, level: usize) -> AstNode {
        if level >= BINARY_LEVELS.len() {
            return self.unary();
        }
        let from = self.pos;
        let mut lhs = self.binary(level + 1);
        while BINARY_LEVELS[level].contains(&self.peek_text()) {
            let op = self.bump().text;
            let rhs = self.binary(level + 1);
            let mut node = self.node(NodeKind::Other("BinaryOperation".to_owned()), op, from);
            node.children = alloc::vec![lhs, rhs];
            node.span = self.span_from(from);
            lhs = node;
        }
        lhs
    }

    fn unary(&mut self) -> AstNode {
        let from = self.pos;
        match self.peek_text() {
            "!" | "~" | "-" | "+" | "++" | "--" => {
                let op = self.bump().text;
                let operand = self.unary();
                let mut node = self.other("UnaryOperation", op, from);
                node.children.push(operand);
                node.span = self.span_from(from);
                return node;
            }
            "delete" => {
                self.bump();
                let operand = self.unary();
                let mut node = self.other("UnaryOperation", "delete", from);
                node.children.push(operand);
                node.span = self.span_from(from);
                return node;
            }
            "new" => {
                self.bump();
                let label = match self.type_name() {
                    Some(ty) => type_sig(&ty),
                    None => String::new(),
                };
                let node = self.other("NewExpression", label, from);
                return self.postfix(node, from);
            }
            _ => {}
        }
        let primary_from = self.pos;
        let primary = self.primary();
        self.postfix(primary, primary_from)
    }

    fn postfix(&mut self, mut node: AstNode, from: usize) -> AstNode {
        loop {
            match self.peek_text() {
                "." => {
                    if self.peek_at(1).map(|t| t.kind == TokenKind::Ident).unwrap_or(false) {
                        self.bump();
                        let member = self.bump().text;
                        let mut ma = self.node(NodeKind::MemberAccess, member, from);
                        ma.children.push(node);
                        ma.span = self.span_from(from);
                        node = ma;
                    } else {
                        break;
                    }
                }
                "(" => {
                    let args = self.call_arguments();
                    let mut call = self.node(NodeKind::FunctionCall, "", from);
                    call.children.push(node);
                    call.children.extend(args);
                    call.span = self.span_from(from);
                    node = call;
                }
                "{" if self.looks_like_call_options() => {
                    self.bump();
                    let mut opts = Vec::new();
                    while !self.eof() && self.peek_text() != "}" {
                        if self.at_ident() && self.peek_at(1).map(|t| t.text == ":").unwrap_or(false)
                        {
                            self.bump();
                            self.bump();
                            opts.push(self.expression());
                        } else {
                            self.bump();
                        }
                        self.eat(",");
                    }
                    self.eat("}");
                    let mut fco = self.other("FunctionCallOptions", "", from);
                    fco.children.push(node);
                    fco.children.extend(opts);
                    fco.span = self.span_from(from);
                    node = fco;
                }
                "[" => {
                    self.bump();
                    let mut ia = self.other("IndexAccess", "", from);
                    ia.children.push(node);
                    if self.peek_text() != "]" {
                        ia.children.push(self.expression());
                    }
                    self.eat("]");
                    ia.span = self.span_from(from);
                    node = ia;
                }
                "++" | "--" => {
                    let op = self.bump().text;
                    let mut un = self.other("UnaryOperation", op, from);
                    un.children.push(node);
                    un.span = self.span_from(from);
                    node = un;
                }
                _ => break,
            }
        }
        node
    }

    /// `{value: x}` call options vs. a block statement: options start with
    /// `ident :`.
    fn looks_like_call_options(&self) -> bool {
        self.peek_at(1).map(|t| t.kind == TokenKind::Ident).unwrap_or(false)
            && self.peek_at(2).map(|t| t.text == ":").unwrap_or(false)
    }

    fn call_arguments(&mut self) -> Vec<AstNode> {
        let mut args = Vec::new();
        if !self.eat("(") {
            return args;
        }
        while !self.eof() && self.peek_text() != ")" {
            if self.peek_text() == "{" {
                // named arguments: treat each value as an argument
                self.bump();
                while !self.eof() && self.peek_text() != "}" {
                    if self.at_ident() && self.peek_at(1).map(|t| t.text == ":").unwrap_or(false) {
                        self.bump();
                        self.bump();
                        args.push(self.expression());
                    } else {
                        self.bump();
                    }
                    self.eat(",");
                }
                self.eat("}");
            } else {
                args.push(self.expression());
            }
            if !self.eat(",") {
                break;
            }
        }
        self.eat(")");
        args
    }

    fn primary(&mut self) -> AstNode {
        let from = self.pos;
        let Some(tok) = self.peek() else {
            return self.other("Unparsed", "", from);
        };
        match tok.kind {
            TokenKind::Number => {
                let text = self.bump().text;
                // unit suffixes (ether, days, ...) merge into the literal
                let mut label = text;
                if self.at_ident()
                    && matches!(
                        self.peek_text(),
                        "wei" | "gwei" | "ether" | "seconds" | "minutes" | "hours" | "days" | "weeks"
                    )
                {
                    label.push(' ');
                    label.push_str(&self.bump().text);
                }
                self.node(NodeKind::Literal, label, from)
            }
            TokenKind::Str => {
                let text = self.bump().text;
                self.node(NodeKind::Literal, text, from)
            }
            TokenKind::Ident => {
                let text = tok.text.clone();
                match text.as_str() {
                    "true" | "false" => {
                        self.bump();
                        self.node(NodeKind::Literal, text, from)
                    }
                    "payable" => {
                        self.bump();
                        self.other("ElementaryTypeNameExpression", "payable", from)
                    }
                    _ if is_elementary(&text) => {
                        self.bump();
                        self.other("ElementaryTypeNameExpression", text, from)
                    }
                    _ => {
                        self.bump();
                        self.node(NodeKind::Identifier, text, from)
                    }
                }
            }
            TokenKind::Punct => match tok.text.as_str() {
                "(" => {
                    self.bump();
                    let mut items = Vec::new();
                    let mut tuple = false;
                    if self.peek_text() != ")" {
                        items.push(self.expression());
                        while self.eat(",") {
                            tuple = true;
                            if self.peek_text() == ")" {
                                break; // trailing empty component
                            }
                            items.push(self.expression());
                        }
                    } else {
                        tuple = true;
                    }
                    self.eat(")");
                    if tuple || items.len() != 1 {
                        let mut node = self.other("TupleExpression", "", from);
                        node.children = items;
                        node
                    } else {
                        items.pop().unwrap()
                    }
                }
                "[" => {
                    self.bump();
                    let mut node = self.other("ArrayLiteral", "", from);
                    while !self.eof() && self.peek_text() != "]" {
                        node.children.push(self.expression());
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.eat("]");
                    node.span = self.span_from(from);
                    node
                }
                _ => {
                    let text = self.bump().text;
                    self.other("Unparsed", text, from)
                }
            },
        }
    }
}

/// Canonical signature string for a type node, used for storage layouts and
/// composite labels.
pub(crate) fn type_sig(node: &AstNode) -> String {
    node.label.clone()
}
