use std::fmt;

use super::{Clause, Cond, Expr, Markers, Node, Template};
use crate::lex::{literal, quote};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => f.write_str(&literal(v)),
            Expr::Nav(n) => n.fmt(f),
            Expr::Size(n) => write!(f, "{n}->size()"),
            Expr::Index => f.write_str("i"),
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.lhs.fmt(f)?;
        if let Some((op, rhs)) = &self.rhs {
            write!(f, " {} {rhs}", op.symbol())?;
        }
        Ok(())
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            c.fmt(f)?;
        }
        Ok(())
    }
}

fn nodes(nodes: &[Node], m: &Markers, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for n in nodes {
        match n {
            Node::Text(t) => f.write_str(t)?,
            Node::Emit { expr, .. } => write!(f, "[{expr} /]")?,
            Node::For { var, over, body, .. } => {
                writeln!(f, "[for ({var} : {over})]")?;
                self::nodes(body, m, f)?;
                writeln!(f, "[/for]")?;
            }
            Node::If { cond, then, els, .. } => {
                writeln!(f, "[if ({cond})]")?;
                self::nodes(then, m, f)?;
                if !els.is_empty() {
                    writeln!(f, "[else]")?;
                    self::nodes(els, m, f)?;
                }
                writeln!(f, "[/if]")?;
            }
            Node::Mark { path, body, .. } => {
                let index = if path.indexed { "[[i/]]" } else { "" };
                write!(f, "{}{}{index}{}", m.open, path.nav, m.close)?;
                self::nodes(body, m, f)?;
                f.write_str(&m.end_token())?;
            }
        }
    }
    Ok(())
}

/// Canonical concrete syntax; re-parsing it yields an equal template.
impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.markers.is_default() {
            writeln!(
                f,
                "[markers {} {}]",
                quote(&self.markers.open),
                quote(&self.markers.close)
            )?;
        }
        writeln!(
            f,
            "[template {}({} : {}!{}) file({})]",
            self.name,
            self.param.var,
            self.param.metamodel,
            self.param.class,
            quote(&self.file)
        )?;
        nodes(&self.body, &self.markers, f)?;
        writeln!(f, "[/template]")
    }
}
