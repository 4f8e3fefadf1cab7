use std::fmt;

use super::{CmpOp, Condition, Expr, TargetPattern, TransformationM2M};
use crate::lex::{literal, quote};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => f.write_str(&literal(v)),
            Expr::Nav { var, steps } => {
                f.write_str(var)?;
                for s in steps {
                    write!(f, ".{s}")?;
                }
                Ok(())
            }
            Expr::Concat(a, b) => write!(f, "concat({a}, {b})"),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
        };
        write!(f, "{} {op} {}", self.left, self.right)
    }
}

fn fmt_target(p: &TargetPattern, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{} : {}!{} (", p.var, p.metamodel, p.class)?;
    for (i, b) in p.bindings.iter().enumerate() {
        let sep = if i + 1 < p.bindings.len() { "," } else { "" };
        write!(f, "\n      {} <- {}{sep}", b.feature, b.expr)?;
    }
    if !p.bindings.is_empty() {
        f.write_str("\n    ")?;
    }
    f.write_str(")")?;
    if let Some(trace) = &p.trace {
        let tags: Vec<String> = trace.tags.iter().map(|(k, v)| format!("{k} = {}", quote(v))).collect();
        write!(f, " trace ({})", tags.join(", "))?;
    }
    Ok(())
}

/// Canonical concrete syntax; re-parsing it yields an equal transformation.
impl fmt::Display for TransformationM2M {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "module {};", self.name)?;
        let inputs: Vec<String> = self
            .inputs
            .iter()
            .map(|d| format!("{} : {}", d.alias, d.metamodel))
            .collect();
        writeln!(
            f,
            "create {} : {} from {};",
            self.output.alias,
            self.output.metamodel,
            inputs.join(", ")
        )?;
        for rule in &self.rules {
            writeln!(f, "\nrule {} {{", rule.name)?;
            let from = &rule.from;
            write!(f, "  from {} : {}!{}", from.var, from.metamodel, from.class)?;
            if !from.guard.is_empty() {
                let conds: Vec<String> = from.guard.iter().map(ToString::to_string).collect();
                write!(f, " ({})", conds.join(" and "))?;
            }
            f.write_str("\n  to ")?;
            for (i, p) in rule.to.iter().enumerate() {
                if i > 0 {
                    f.write_str(",\n     ")?;
                }
                fmt_target(p, f)?;
            }
            f.write_str("\n}\n")?;
        }
        Ok(())
    }
}
