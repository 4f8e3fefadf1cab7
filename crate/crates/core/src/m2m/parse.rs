//! Concrete syntax:
//!
//! ```text
//! module <name>;
//! create <alias> : <MM> from <alias> : <MM> (, <alias> : <MM>)*;
//! rule <Name> {
//!   from <var> : <MM>!<Class> ( <guard> )?
//!   to <var> : <MM>!<Class> ( <feature> <- <expr>, ... ) (trace (<key> = '<value>', ...))?
//!      (, <var> : <MM>!<Class> ( ... ))*
//! }
//! ```
//!
//! `--` starts a line comment.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    Binding, CmpOp, Condition, Expr, M2mError, ModelDecl, Rule, SourcePattern, TargetPattern, TraceClause,
    TransformationM2M,
};
use crate::lex::{tokenize, Cursor, LexError, Tok};
use crate::model::{Feature, MetamodelRegistry, PrimitiveType, Value};

impl From<LexError> for M2mError {
    fn from(e: LexError) -> Self {
        M2mError::Syntax {
            line: e.line,
            col: e.col,
            message: e.message,
        }
    }
}

/// Parses a `*.m2m` document and checks it against the metamodels it names.
pub fn parse_m2m(text: &str, metamodels: &MetamodelRegistry) -> Result<TransformationM2M, M2mError> {
    let t = parse_syntax(text)?;
    check(&t, metamodels)?;
    Ok(t)
}

fn end_of(text: &str) -> (usize, usize) {
    let line = 1 + text.matches('\n').count();
    let col = 1 + text.rsplit('\n').next().map_or(0, |l| l.chars().count());
    (line, col)
}

pub(crate) fn parse_syntax(text: &str) -> Result<TransformationM2M, M2mError> {
    let mut c = Cursor::new(tokenize(text, 1, 1, true)?, end_of(text));
    c.expect_keyword("module")?;
    let name = c.expect_ident()?;
    c.expect_punct(";")?;
    c.expect_keyword("create")?;
    let output = model_decl(&mut c)?;
    c.expect_keyword("from")?;
    let mut inputs = vec![model_decl(&mut c)?];
    while c.eat_punct(",") {
        inputs.push(model_decl(&mut c)?);
    }
    c.expect_punct(";")?;
    let mut rules = Vec::new();
    while !c.at_end() {
        rules.push(rule(&mut c)?);
    }
    Ok(TransformationM2M {
        name,
        output,
        inputs,
        rules,
    })
}

fn model_decl(c: &mut Cursor) -> Result<ModelDecl, LexError> {
    let alias = c.expect_ident()?;
    c.expect_punct(":")?;
    let metamodel = c.expect_ident()?;
    Ok(ModelDecl { alias, metamodel })
}

fn typed_var(c: &mut Cursor) -> Result<(String, String, String), LexError> {
    let var = c.expect_ident()?;
    c.expect_punct(":")?;
    let mm = c.expect_ident()?;
    c.expect_punct("!")?;
    let class = c.expect_ident()?;
    Ok((var, mm, class))
}

fn rule(c: &mut Cursor) -> Result<Rule, LexError> {
    c.expect_keyword("rule")?;
    let name = c.expect_ident()?;
    c.expect_punct("{")?;
    c.expect_keyword("from")?;
    let (var, metamodel, class) = typed_var(c)?;
    let mut guard = Vec::new();
    if c.eat_punct("(") {
        guard.push(condition(c)?);
        while c.eat_keyword("and") {
            guard.push(condition(c)?);
        }
        c.expect_punct(")")?;
    }
    c.expect_keyword("to")?;
    let mut to = vec![target(c)?];
    while c.eat_punct(",") {
        to.push(target(c)?);
    }
    c.expect_punct("}")?;
    Ok(Rule {
        name,
        from: SourcePattern {
            var,
            metamodel,
            class,
            guard,
        },
        to,
    })
}

fn condition(c: &mut Cursor) -> Result<Condition, LexError> {
    let left = expr(c)?;
    let op = if c.eat_punct("=") {
        CmpOp::Eq
    } else if c.eat_punct("<>") {
        CmpOp::Ne
    } else {
        return Err(c.error("expected `=` or `<>`"));
    };
    let right = expr(c)?;
    Ok(Condition { left, op, right })
}

fn target(c: &mut Cursor) -> Result<TargetPattern, LexError> {
    let (var, metamodel, class) = typed_var(c)?;
    c.expect_punct("(")?;
    let mut bindings = Vec::new();
    if !c.is_punct(")") {
        loop {
            let feature = c.expect_ident()?;
            c.expect_punct("<-")?;
            bindings.push(Binding {
                feature,
                expr: expr(c)?,
            });
            if !c.eat_punct(",") {
                break;
            }
        }
    }
    c.expect_punct(")")?;
    let mut trace = None;
    if c.eat_keyword("trace") {
        c.expect_punct("(")?;
        let mut tags = BTreeMap::new();
        loop {
            let key = c.expect_ident()?;
            c.expect_punct("=")?;
            tags.insert(key, c.expect_str()?);
            if !c.eat_punct(",") {
                break;
            }
        }
        c.expect_punct(")")?;
        trace = Some(TraceClause { tags });
    }
    Ok(TargetPattern {
        var,
        metamodel,
        class,
        bindings,
        trace,
    })
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
    if c.is_keyword("concat") && matches!(c.peek_at(1), Some(Tok::Punct("("))) {
        c.bump();
        c.expect_punct("(")?;
        let a = expr(c)?;
        c.expect_punct(",")?;
        let b = expr(c)?;
        c.expect_punct(")")?;
        return Ok(Expr::Concat(Box::new(a), Box::new(b)));
    }
    let var = c.expect_ident()?;
    let mut steps = Vec::new();
    while c.eat_punct(".") {
        steps.push(c.expect_ident()?);
    }
    Ok(Expr::Nav { var, steps })
}

/// Static type of an expression.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Ty {
    Prim(PrimitiveType),
    /// Source or target elements; `many` when a collection step was taken.
    Elements {
        many: bool,
    },
}

struct RuleScope<'a> {
    rule: &'a Rule,
    metamodels: &'a MetamodelRegistry,
}

impl RuleScope<'_> {
    fn type_error(&self, message: impl Into<String>) -> M2mError {
        M2mError::Type {
            rule: self.rule.name.clone(),
            message: message.into(),
        }
    }

    fn expr_ty(&self, e: &Expr) -> Result<Ty, M2mError> {
        match e {
            Expr::Literal(v) => Ok(Ty::Prim(v.ty())),
            Expr::Concat(a, b) => {
                for side in [a, b] {
                    if !matches!(self.expr_ty(side)?, Ty::Prim(_)) {
                        return Err(self.type_error("concat expects primitive operands"));
                    }
                }
                Ok(Ty::Prim(PrimitiveType::String))
            }
            Expr::Nav { var, steps } => {
                if self.rule.to.iter().any(|p| &p.var == var) {
                    if !steps.is_empty() {
                        return Err(self.type_error(format!("cannot navigate from target variable `{var}`")));
                    }
                    return Ok(Ty::Elements { many: false });
                }
                if var != &self.rule.from.var {
                    return Err(self.type_error(format!("unknown variable `{var}`")));
                }
                let mm = self
                    .metamodels
                    .get(&self.rule.from.metamodel)
                    .ok_or_else(|| M2mError::UnknownMetamodel(self.rule.from.metamodel.clone()))?;
                let mut class = self.rule.from.class.as_str();
                let mut many = false;
                for (i, step) in steps.iter().enumerate() {
                    let def = mm
                        .class(class)
                        .ok_or_else(|| M2mError::UnknownClass(class.to_string()))?;
                    match def.feature(step) {
                        None => {
                            return Err(M2mError::UnknownFeature {
                                class: class.to_string(),
                                feature: step.clone(),
                            })
                        }
                        Some(Feature::Attribute(ty)) => {
                            if i + 1 != steps.len() {
                                return Err(self.type_error(format!("attribute `{step}` must end the navigation")));
                            }
                            if many {
                                return Err(self.type_error(format!("attribute `{step}` read through a collection")));
                            }
                            return Ok(Ty::Prim(ty));
                        }
                        Some(Feature::Collection(c)) => {
                            many = true;
                            class = c;
                        }
                        Some(Feature::Reference { target, .. }) => class = target,
                    }
                }
                Ok(Ty::Elements { many })
            }
        }
    }
}

fn check(t: &TransformationM2M, metamodels: &MetamodelRegistry) -> Result<(), M2mError> {
    for decl in t.inputs.iter().chain([&t.output]) {
        if metamodels.get(&decl.metamodel).is_none() {
            return Err(M2mError::UnknownMetamodel(decl.metamodel.clone()));
        }
    }
    let mut names = BTreeSet::new();
    for rule in &t.rules {
        if !names.insert(&rule.name) {
            return Err(M2mError::DuplicateRule(rule.name.clone()));
        }
        let scope = RuleScope { rule, metamodels };
        let from = &rule.from;
        if !t.inputs.iter().any(|d| d.metamodel == from.metamodel) {
            return Err(scope.type_error(format!("source metamodel `{}` is not an input", from.metamodel)));
        }
        let src_mm = metamodels
            .get(&from.metamodel)
            .ok_or_else(|| M2mError::UnknownMetamodel(from.metamodel.clone()))?;
        if src_mm.class(&from.class).is_none() {
            return Err(M2mError::UnknownClass(from.class.clone()));
        }
        for cond in &from.guard {
            for side in [&cond.left, &cond.right] {
                match side {
                    Expr::Nav { var, .. } if var != &from.var => {
                        return Err(scope.type_error("guards may only read the source variable"))
                    }
                    _ => {}
                }
                if !matches!(scope.expr_ty(side)?, Ty::Prim(_)) {
                    return Err(scope.type_error("guards compare primitive values"));
                }
            }
        }
        let mut vars = BTreeSet::from([&from.var]);
        for pattern in &rule.to {
            if !vars.insert(&pattern.var) {
                return Err(scope.type_error(format!("duplicate variable `{}`", pattern.var)));
            }
            if pattern.metamodel != t.output.metamodel {
                return Err(scope.type_error(format!(
                    "target metamodel `{}` is not the output `{}`",
                    pattern.metamodel, t.output.metamodel
                )));
            }
            let out_mm = metamodels
                .get(&pattern.metamodel)
                .ok_or_else(|| M2mError::UnknownMetamodel(pattern.metamodel.clone()))?;
            let class = out_mm
                .class(&pattern.class)
                .ok_or_else(|| M2mError::UnknownClass(pattern.class.clone()))?;
            let mut bound = BTreeSet::new();
            for b in &pattern.bindings {
                if !bound.insert(&b.feature) {
                    return Err(scope.type_error(format!("`{}` bound twice", b.feature)));
                }
                let feature = class.feature(&b.feature).ok_or_else(|| M2mError::UnknownFeature {
                    class: class.name.clone(),
                    feature: b.feature.clone(),
                })?;
                let ty = scope.expr_ty(&b.expr)?;
                let ok = match (feature, &ty) {
                    (Feature::Attribute(PrimitiveType::Float), Ty::Prim(PrimitiveType::Int)) => true,
                    (Feature::Attribute(want), Ty::Prim(got)) => want == *got,
                    (Feature::Collection(_), Ty::Elements { .. }) => true,
                    (Feature::Reference { .. }, Ty::Elements { many }) => !many,
                    _ => false,
                };
                if !ok {
                    return Err(scope.type_error(format!("binding `{}` has incompatible type {ty:?}", b.feature)));
                }
            }
        }
    }
    Ok(())
}
