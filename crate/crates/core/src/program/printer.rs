//! Canonical text form of programs. The output parses back to an equal AST.

use std::fmt;

use super::ast::*;
use super::parser::is_variable;

fn write_constant(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    let plain_ident = name.starts_with(|c: char| c.is_alphabetic() || c == '_')
        && !is_variable(name)
        && name.chars().all(|c| c.is_alphanumeric() || c == '_');
    let plain_number = !name.is_empty() && name.chars().all(|c| c.is_ascii_digit());
    if plain_ident || plain_number {
        return f.write_str(name);
    }
    f.write_str("\"")?;
    for c in name.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Variable(name) => f.write_str(name),
            Term::Constant(name) => write_constant(f, name),
        }
    }
}

impl fmt::Display for SetExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, branch) in self.branches().into_iter().enumerate() {
            if i > 0 {
                f.write_str(" ++ ")?;
            }
            write!(f, "{{{}", branch.anchor)?;
            for relation in &branch.path {
                write!(f, ".{relation}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("~")?;
        }
        match &self.kind {
            LiteralKind::Atom { predicate, args } => {
                write!(f, "{predicate}(")?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{arg}")?;
                }
                f.write_str(")")
            }
            LiteralKind::Similarity { function, left, right } => {
                write!(f, "fn[{function}]({left}, {right})")
            }
            LiteralKind::SetSimilarity { member, left, right } => {
                write!(f, "setsim[{member}]({left}, {right})")
            }
            LiteralKind::Inequality { left, right } => write!(f, "{left} != {right}"),
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, literals: &[Literal], sep: &str) -> fmt::Result {
    for (i, literal) in literals.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{literal}")?;
    }
    Ok(())
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : ", self.weight)?;
        if self.head.is_empty() {
            // a headless conjunction is the disjunction of the negations
            let negated: Vec<Literal> = self.body.iter().cloned().map(Literal::negate).collect();
            join(f, &negated, " | ")?;
        } else {
            if !self.body.is_empty() {
                join(f, &self.body, " & ")?;
                f.write_str(" => ")?;
            }
            join(f, &self.head, " | ")?;
        }
        f.write_str(" .")
    }
}

impl fmt::Display for PredicateDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.closed { "closed" } else { "open" };
        if self.arg_types.iter().all(Option::is_none) {
            return write!(f, "{kind} {}/{}.", self.name, self.arity());
        }
        write!(f, "{kind} {}(", self.name)?;
        for (i, ty) in self.arg_types.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(ty.as_deref().unwrap_or("_"))?;
        }
        f.write_str(").")
    }
}

impl fmt::Display for ExclusivityConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EXCLUSIVE : {}(", self.predicate)?;
        for i in 0..self.arity {
            if i > 0 {
                f.write_str(", ")?;
            }
            if i == self.free_position {
                f.write_str("*")?;
            } else {
                write!(f, "V{i}")?;
            }
        }
        f.write_str(") .")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for decl in &self.schema {
            writeln!(f, "{decl}")?;
        }
        if !self.rules.is_empty() || !self.exclusivity.is_empty() {
            writeln!(f)?;
        }
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        for constraint in &self.exclusivity {
            writeln!(f, "{constraint}")?;
        }
        Ok(())
    }
}
