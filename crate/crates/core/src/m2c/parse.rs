//! Template concrete syntax.
//!
//! ```text
//! [markers '<<' '>>']                      -- optional, before the template
//! [template name(var : MM!Class) file('Out.c')]
//! text [expr /] text
//! [for (v : nav)] ... [/for]
//! [if (cond)] ... [else] ... [/if]
//! {{nav}} ... {{/}}    {{nav[[i/]]}} ... {{/}}
//! [/template]
//! ```
//!
//! A `[` that does not open a tag is ordinary text; `['[' /]` always emits a
//! bracket. One line break directly after a block tag belongs to the tag.

use super::{
    push_merged, Clause, CmpOp, Cond, Expr, Loc, MarkPath, Markers, Nav, Node, Param, StepKind, Template, TemplateError,
};
use crate::lex::{tokenize, Cursor, LexError, Tok, Token};
use crate::model::{Feature, MetamodelRegistry, PrimitiveType, Value};
use crate::trace::line_col;

impl From<LexError> for TemplateError {
    fn from(e: LexError) -> Self {
        TemplateError::Syntax {
            line: e.line,
            col: e.col,
            message: e.message,
        }
    }
}

/// Parses a `*.m2c` template and type-checks it against its parameter's
/// metamodel.
pub fn parse_template(text: &str, metamodels: &MetamodelRegistry) -> Result<Template, TemplateError> {
    let (header, markers, lexemes, end) = scan(text)?;
    let mut stream = Stream {
        items: lexemes,
        pos: 0,
        end,
    };
    let (body, term) = stream.nodes(&[Term::EndTemplate])?;
    debug_assert_eq!(term, Term::EndTemplate);
    let t = Template {
        name: header.name,
        param: header.param,
        file: header.file,
        markers,
        body,
    };
    Checker {
        metamodels,
        mm: &t.param.metamodel,
    }
    .check(&t)?;
    Ok(t)
}

struct Header {
    name: String,
    param: Param,
    file: String,
}

#[derive(Debug)]
enum Tag {
    Markers(String, String),
    Template(Header),
    EndTemplate,
    For(String, Nav),
    EndFor,
    If(Cond),
    Else,
    EndIf,
    Emit(Expr),
}

impl std::fmt::Debug for Header {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug)]
enum Lexeme {
    Text(String),
    Tag(Tag, Loc),
    MarkOpen(MarkPath, Loc),
    MarkClose(Loc),
}

fn syntax(loc: Loc, message: impl Into<String>) -> TemplateError {
    TemplateError::Syntax {
        line: loc.line,
        col: loc.col,
        message: message.into(),
    }
}

fn loc_at(text: &str, offset: usize) -> Loc {
    let (line, col) = line_col(text, offset);
    Loc { line, col }
}

/// End of a tag starting at `start` (the `[`): the offset just past the
/// matching `]` outside string literals. Tags neither span lines nor contain
/// brackets.
fn tag_extent(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut i = start + 1;
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) => {
                if b == b'\\' {
                    i += 1;
                } else if b == q {
                    quote = None;
                }
            }
            None => match b {
                b'\'' | b'"' => quote = Some(b),
                b']' => return Some(i + 1),
                b'\n' | b'[' => return None,
                _ => {}
            },
        }
        i += 1;
    }
    None
}

const CONTROL: [&str; 5] = ["for", "if", "else", "template", "markers"];

fn is_control(toks: &[Token]) -> bool {
    match toks {
        [Token { tok: Tok::Ident(k), .. }, ..] => CONTROL.contains(&k.as_str()),
        [Token {
            tok: Tok::Punct("/"), ..
        }, Token { tok: Tok::Ident(k), .. }, ..] => ["for", "if", "template"].contains(&k.as_str()),
        _ => false,
    }
}

fn scan(text: &str) -> Result<(Header, Markers, Vec<Lexeme>, Loc), TemplateError> {
    let mut markers = Markers::default();
    let mut header: Option<Header> = None;
    let mut closed = false;
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut i = 0;
    let flush = |buf: &mut String, out: &mut Vec<Lexeme>| {
        if !buf.is_empty() {
            out.push(Lexeme::Text(std::mem::take(buf)));
        }
    };
    while i < text.len() {
        let rest = &text[i..];
        if header.is_some() && !closed && rest.starts_with(&markers.open) {
            flush(&mut buf, &mut out);
            let loc = loc_at(text, i);
            let end_token = markers.end_token();
            if rest.starts_with(&end_token) {
                out.push(Lexeme::MarkClose(loc));
                i += end_token.len();
                continue;
            }
            let payload_start = i + markers.open.len();
            let Some(len) = text[payload_start..].find(&markers.close) else {
                return Err(syntax(loc, "unterminated marker"));
            };
            let payload = &text[payload_start..payload_start + len];
            out.push(Lexeme::MarkOpen(mark_path(payload, loc_at(text, payload_start))?, loc));
            i = payload_start + len + markers.close.len();
            continue;
        }
        if rest.starts_with('[') {
            if let Some(end) = tag_extent(text, i) {
                let loc = loc_at(text, i);
                let inner = &text[i + 1..end - 1];
                let inner_loc = Loc {
                    line: loc.line,
                    col: loc.col + 1,
                };
                if let Some(tag) = classify(inner, inner_loc)? {
                    flush(&mut buf, &mut out);
                    let block = !matches!(tag, Tag::Emit(_));
                    match &tag {
                        Tag::Markers(open, close) => {
                            if header.is_some() {
                                return Err(syntax(loc, "[markers] must precede the template"));
                            }
                            if open.is_empty() || close.is_empty() {
                                return Err(syntax(loc, "marker delimiters must not be empty"));
                            }
                            markers = Markers {
                                open: open.clone(),
                                close: close.clone(),
                            };
                        }
                        Tag::Template(_) if header.is_some() => {
                            return Err(syntax(loc, "only one template per file"));
                        }
                        Tag::Template(_) => {}
                        Tag::EndTemplate if header.is_some() && !closed => closed = true,
                        _ if header.is_none() || closed => {
                            return Err(syntax(loc, "tag outside the template"));
                        }
                        _ => {}
                    }
                    i = end;
                    if block && text[i..].starts_with('\n') {
                        i += 1;
                    }
                    match tag {
                        Tag::Template(h) => header = Some(h),
                        Tag::Markers(..) => {}
                        tag => out.push(Lexeme::Tag(tag, loc)),
                    }
                    continue;
                }
            }
        }
        let c = rest.chars().next().expect("non-empty");
        if (header.is_none() || closed) && !c.is_whitespace() {
            return Err(syntax(loc_at(text, i), "text outside the template"));
        }
        if header.is_some() && !closed {
            buf.push(c);
        }
        i += c.len_utf8();
    }
    flush(&mut buf, &mut out);
    let end = loc_at(text, text.len());
    let header = header.ok_or_else(|| syntax(end, "expected `[template ...]`"))?;
    Ok((header, markers, out, end))
}

fn mark_path(payload: &str, loc: Loc) -> Result<MarkPath, TemplateError> {
    let (nav_text, indexed) = match payload.strip_suffix("[[i/]]") {
        Some(p) => (p, true),
        None => (payload, false),
    };
    let toks = tokenize(nav_text, loc.line, loc.col, false)?;
    let mut c = Cursor::new(toks, (loc.line, loc.col + payload.len()));
    let nav = nav(&mut c)?;
    c.expect_end()?;
    Ok(MarkPath { nav, indexed })
}

fn classify(inner: &str, loc: Loc) -> Result<Option<Tag>, TemplateError> {
    let emit_like = inner.trim_end().ends_with('/');
    let toks = match tokenize(inner, loc.line, loc.col, false) {
        Ok(t) => t,
        Err(e) if emit_like || inner.split_whitespace().next().is_some_and(|w| CONTROL.contains(&w)) => {
            return Err(e.into())
        }
        Err(_) => return Ok(None),
    };
    let end = (loc.line, loc.col + inner.chars().count());
    if is_control(&toks) {
        let mut c = Cursor::new(toks, end);
        let tag = control(&mut c)?;
        c.expect_end()?;
        return Ok(Some(tag));
    }
    if emit_like {
        let mut c = Cursor::new(toks, end);
        let e = expr(&mut c)?;
        c.expect_punct("/")?;
        c.expect_end()?;
        return Ok(Some(Tag::Emit(e)));
    }
    Ok(None)
}

fn control(c: &mut Cursor) -> Result<Tag, LexError> {
    if c.eat_punct("/") {
        let kw = c.expect_ident()?;
        return Ok(match kw.as_str() {
            "for" => Tag::EndFor,
            "if" => Tag::EndIf,
            _ => Tag::EndTemplate,
        });
    }
    let kw = c.expect_ident()?;
    match kw.as_str() {
        "for" => {
            c.expect_punct("(")?;
            let var = c.expect_ident()?;
            c.expect_punct(":")?;
            let over = nav(c)?;
            c.expect_punct(")")?;
            Ok(Tag::For(var, over))
        }
        "if" => {
            c.expect_punct("(")?;
            let cond = cond(c)?;
            c.expect_punct(")")?;
            Ok(Tag::If(cond))
        }
        "else" => Ok(Tag::Else),
        "markers" => {
            let open = c.expect_str()?;
            let close = c.expect_str()?;
            Ok(Tag::Markers(open, close))
        }
        _ => {
            let name = c.expect_ident()?;
            c.expect_punct("(")?;
            let var = c.expect_ident()?;
            c.expect_punct(":")?;
            let metamodel = c.expect_ident()?;
            c.expect_punct("!")?;
            let class = c.expect_ident()?;
            c.expect_punct(")")?;
            c.expect_keyword("file")?;
            c.expect_punct("(")?;
            let file = c.expect_str()?;
            c.expect_punct(")")?;
            Ok(Tag::Template(Header {
                name,
                param: Param { var, metamodel, class },
                file,
            }))
        }
    }
}

fn nav(c: &mut Cursor) -> Result<Nav, LexError> {
    let var = c.expect_ident()?;
    let mut steps = Vec::new();
    while c.eat_punct(".") {
        steps.push(c.expect_ident()?);
    }
    Ok(Nav { var, steps })
}

fn expr(c: &mut Cursor) -> Result<Expr, LexError> {
    let lit = match c.peek() {
        Some(Tok::Str(s)) => Some(Value::Str(s.clone())),
        Some(Tok::Int(i)) => Some(Value::Int(*i)),
        Some(Tok::Float(x)) => Some(Value::Float(*x)),
        Some(Tok::Ident(s)) if s == "true" || s == "false" => Some(Value::Bool(s == "true")),
        _ => None,
    };
    if let Some(v) = lit {
        c.bump();
        return Ok(Expr::Literal(v));
    }
    if c.is_keyword("i") && !matches!(c.peek_at(1), Some(Tok::Punct("." | "->"))) {
        c.bump();
        return Ok(Expr::Index);
    }
    let n = nav(c)?;
    if c.eat_punct("->") {
        c.expect_keyword("size")?;
        c.expect_punct("(")?;
        c.expect_punct(")")?;
        return Ok(Expr::Size(n));
    }
    Ok(Expr::Nav(n))
}

fn cond(c: &mut Cursor) -> Result<Cond, LexError> {
    let mut clauses = vec![clause(c)?];
    while c.eat_keyword("and") {
        clauses.push(clause(c)?);
    }
    Ok(Cond { clauses })
}

fn clause(c: &mut Cursor) -> Result<Clause, LexError> {
    let lhs = expr(c)?;
    let ops = [
        ("=", CmpOp::Eq),
        ("<>", CmpOp::Ne),
        ("<=", CmpOp::Le),
        (">=", CmpOp::Ge),
        ("<", CmpOp::Lt),
        (">", CmpOp::Gt),
    ];
    for (p, op) in ops {
        if c.eat_punct(p) {
            return Ok(Clause {
                lhs,
                rhs: Some((op, expr(c)?)),
            });
        }
    }
    Ok(Clause { lhs, rhs: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Term {
    EndTemplate,
    EndFor,
    Else,
    EndIf,
    MarkClose,
}

impl Term {
    fn describe(self) -> &'static str {
        match self {
            Term::EndTemplate => "[/template]",
            Term::EndFor => "[/for]",
            Term::Else => "[else]",
            Term::EndIf => "[/if]",
            Term::MarkClose => "closing marker",
        }
    }
}

struct Stream {
    items: Vec<Lexeme>,
    pos: usize,
    end: Loc,
}

impl Stream {
    /// Parses nodes up to one of `until`, which is consumed and returned.
    fn nodes(&mut self, until: &[Term]) -> Result<(Vec<Node>, Term), TemplateError> {
        let mut out = Vec::new();
        loop {
            let Some(item) = self.items.get_mut(self.pos) else {
                let wanted: Vec<&str> = until.iter().map(|t| t.describe()).collect();
                return Err(syntax(self.end, format!("expected {}", wanted.join(" or "))));
            };
            let item = std::mem::replace(item, Lexeme::Text(String::new()));
            self.pos += 1;
            let (term, at) = match item {
                Lexeme::Text(t) => {
                    push_merged(&mut out, Node::Text(t));
                    continue;
                }
                Lexeme::MarkClose(at) => (Term::MarkClose, at),
                Lexeme::MarkOpen(path, at) => {
                    let (body, _) = self.nodes(&[Term::MarkClose]).map_err(|e| unclosed(e, "marker", at))?;
                    out.push(Node::Mark { path, body, at });
                    continue;
                }
                Lexeme::Tag(tag, at) => match tag {
                    Tag::EndTemplate => (Term::EndTemplate, at),
                    Tag::EndFor => (Term::EndFor, at),
                    Tag::Else => (Term::Else, at),
                    Tag::EndIf => (Term::EndIf, at),
                    Tag::Emit(expr) => {
                        out.push(Node::Emit { expr, at });
                        continue;
                    }
                    Tag::For(var, over) => {
                        let (body, _) = self.nodes(&[Term::EndFor]).map_err(|e| unclosed(e, "[for]", at))?;
                        out.push(Node::For { var, over, body, at });
                        continue;
                    }
                    Tag::If(cond) => {
                        let (then, t) = self
                            .nodes(&[Term::Else, Term::EndIf])
                            .map_err(|e| unclosed(e, "[if]", at))?;
                        let els = if t == Term::Else {
                            self.nodes(&[Term::EndIf]).map_err(|e| unclosed(e, "[if]", at))?.0
                        } else {
                            Vec::new()
                        };
                        out.push(Node::If { cond, then, els, at });
                        continue;
                    }
                    Tag::Markers(..) | Tag::Template(_) => unreachable!("handled by the scanner"),
                },
            };
            if until.contains(&term) {
                return Ok((out, term));
            }
            let wanted: Vec<&str> = until.iter().map(|t| t.describe()).collect();
            return Err(syntax(
                at,
                format!("unexpected {}, expected {}", term.describe(), wanted.join(" or ")),
            ));
        }
    }
}

fn unclosed(e: TemplateError, what: &str, at: Loc) -> TemplateError {
    match e {
        TemplateError::Syntax { message, .. }
            if message.contains("expected [") || message.contains("expected closing") =>
        {
            syntax(
                at,
                format!("unclosed {what} opened at line {}, column {}", at.line, at.col),
            )
        }
        other => other,
    }
}

/// Static type of a navigation.
#[derive(Debug, Clone, PartialEq)]
enum NavTy {
    Attr(PrimitiveType),
    Elems(String),
}

/// Per-step feature kinds of `nav`, as far as they can be resolved.
pub(crate) fn step_kinds(
    nav: &Nav,
    scope: &[(String, String)],
    metamodels: &MetamodelRegistry,
    mm: &str,
) -> Vec<StepKind> {
    let mut out = Vec::new();
    let (Some(mm), Some((_, mut class))) = (
        metamodels.get(mm),
        scope.iter().rev().find(|(v, _)| *v == nav.var).cloned(),
    ) else {
        return out;
    };
    for step in &nav.steps {
        match mm.class(&class).and_then(|c| c.feature(step)) {
            Some(Feature::Attribute(_)) => {
                out.push(StepKind::Attribute);
                break;
            }
            Some(Feature::Collection(c)) => {
                out.push(StepKind::Collection);
                class = c.to_string();
            }
            Some(Feature::Reference { target, .. }) => {
                out.push(StepKind::Reference);
                class = target.to_string();
            }
            None => break,
        }
    }
    out
}

/// Class of the elements `nav` reaches, if it reaches elements.
pub(crate) fn nav_class(
    nav: &Nav,
    scope: &[(String, String)],
    metamodels: &MetamodelRegistry,
    mm: &str,
) -> Option<String> {
    let mm = metamodels.get(mm)?;
    match nav_type(nav, scope, mm).ok()? {
        NavTy::Elems(c) => Some(c),
        NavTy::Attr(_) => None,
    }
}

fn nav_type(nav: &Nav, scope: &[(String, String)], mm: &crate::model::Metamodel) -> Result<NavTy, String> {
    let (_, mut class) = scope
        .iter()
        .rev()
        .find(|(v, _)| *v == nav.var)
        .cloned()
        .ok_or_else(|| format!("unknown variable `{}`", nav.var))?;
    for (i, step) in nav.steps.iter().enumerate() {
        let def = mm.class(&class).ok_or_else(|| format!("unknown class `{class}`"))?;
        match def.feature(step) {
            None => return Err(format!("class `{class}` has no feature `{step}`")),
            Some(Feature::Attribute(ty)) => {
                if i + 1 != nav.steps.len() {
                    return Err(format!("attribute `{step}` must end the navigation"));
                }
                return Ok(NavTy::Attr(ty));
            }
            Some(Feature::Collection(c)) => class = c.to_string(),
            Some(Feature::Reference { target, .. }) => class = target.to_string(),
        }
    }
    Ok(NavTy::Elems(class))
}

struct Checker<'a> {
    metamodels: &'a MetamodelRegistry,
    mm: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ETy {
    Prim(PrimitiveType),
    Elems,
}

impl Checker<'_> {
    fn check(&self, t: &Template) -> Result<(), TemplateError> {
        let at = Loc { line: 1, col: 1 };
        let mm = self
            .metamodels
            .get(self.mm)
            .ok_or_else(|| type_err(at, format!("unknown metamodel `{}`", self.mm)))?;
        if mm.class(&t.param.class).is_none() {
            return Err(type_err(at, format!("unknown class `{}`", t.param.class)));
        }
        if t.param.var == "i" {
            return Err(type_err(at, "`i` is reserved for the loop index"));
        }
        let mut scope = vec![(t.param.var.clone(), t.param.class.clone())];
        self.nodes(&t.body, &mut scope, mm)
    }

    fn nodes(
        &self,
        nodes: &[Node],
        scope: &mut Vec<(String, String)>,
        mm: &crate::model::Metamodel,
    ) -> Result<(), TemplateError> {
        for n in nodes {
            match n {
                Node::Text(_) => {}
                Node::Emit { expr, at } => {
                    if self.expr(expr, scope, mm, *at)? == ETy::Elems {
                        return Err(type_err(*at, "cannot emit a model element; select an attribute"));
                    }
                }
                Node::For { var, over, body, at } => {
                    if var == "i" {
                        return Err(type_err(*at, "`i` is reserved for the loop index"));
                    }
                    if scope.iter().any(|(v, _)| v == var) {
                        return Err(type_err(*at, format!("variable `{var}` is already bound")));
                    }
                    let class = match nav_type(over, scope, mm).map_err(|m| type_err(*at, m))? {
                        NavTy::Elems(c) => c,
                        NavTy::Attr(_) => return Err(type_err(*at, "a loop must range over model elements")),
                    };
                    scope.push((var.clone(), class));
                    let r = self.nodes(body, scope, mm);
                    scope.pop();
                    r?;
                }
                Node::If { cond, then, els, at } => {
                    for c in &cond.clauses {
                        let l = self.expr(&c.lhs, scope, mm, *at)?;
                        match &c.rhs {
                            None if l == ETy::Prim(PrimitiveType::Bool) => {}
                            None => return Err(type_err(*at, "condition operand is not boolean")),
                            Some((op, rhs)) => {
                                let r = self.expr(rhs, scope, mm, *at)?;
                                comparable(*op, l, r).map_err(|m| type_err(*at, m))?;
                            }
                        }
                    }
                    self.nodes(then, scope, mm)?;
                    self.nodes(els, scope, mm)?;
                }
                Node::Mark { path, body, at } => {
                    if let NavTy::Attr(_) = nav_type(&path.nav, scope, mm).map_err(|m| type_err(*at, m))? {
                        return Err(type_err(*at, "a marker must designate a model element"));
                    }
                    if path.indexed && scope.len() < 2 {
                        return Err(type_err(*at, "`[i/]` used outside a loop"));
                    }
                    self.nodes(body, scope, mm)?;
                }
            }
        }
        Ok(())
    }

    fn expr(
        &self,
        e: &Expr,
        scope: &[(String, String)],
        mm: &crate::model::Metamodel,
        at: Loc,
    ) -> Result<ETy, TemplateError> {
        Ok(match e {
            Expr::Literal(v) => ETy::Prim(v.ty()),
            Expr::Index => {
                if scope.len() < 2 {
                    return Err(type_err(at, "`i` used outside a loop"));
                }
                ETy::Prim(PrimitiveType::Int)
            }
            Expr::Nav(n) => match nav_type(n, scope, mm).map_err(|m| type_err(at, m))? {
                NavTy::Attr(ty) => ETy::Prim(ty),
                NavTy::Elems(_) => ETy::Elems,
            },
            Expr::Size(n) => match nav_type(n, scope, mm).map_err(|m| type_err(at, m))? {
                NavTy::Elems(_) => ETy::Prim(PrimitiveType::Int),
                NavTy::Attr(_) => return Err(type_err(at, "size() applies to elements")),
            },
        })
    }
}

fn comparable(op: CmpOp, l: ETy, r: ETy) -> Result<(), String> {
    use PrimitiveType::*;
    let (ETy::Prim(a), ETy::Prim(b)) = (l, r) else {
        return Err("only primitive values can be compared".into());
    };
    let numeric = |t| matches!(t, Int | Float);
    let same = a == b || (numeric(a) && numeric(b));
    let ordered = matches!(op, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge);
    if !same {
        return Err(format!("cannot compare {a:?} with {b:?}"));
    }
    if ordered && a == Bool {
        return Err("booleans are not ordered".into());
    }
    Ok(())
}

fn type_err(at: Loc, message: impl Into<String>) -> TemplateError {
    TemplateError::Type {
        line: at.line,
        col: at.col,
        message: message.into(),
    }
}
