//! AST normalization: alpha-rename variables to `v0, v1, ...` in first-use
//! order, discard source locations, and compute a stable content hash.
//!
//! Literals, call names, and structure are preserved; only variable names and
//! formatting are erased. The hash is a 64-bit FNV-1a over a canonical
//! s-expression encoding and is stable across runs and platforms.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::ast::{Expr, Program, Stmt, UnaryOp};
use crate::util;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAst {
    pub program: Program,
    pub hash: u64,
}

impl NormalizedAst {
    /// Fixed-width hex form used in reports.
    pub fn hash_hex(&self) -> String {
        util::hex64(self.hash)
    }
}

pub fn normalize(program: &Program) -> NormalizedAst {
    let mut renamer = Renamer::default();
    let param = renamer.rename(&program.param);
    let body: Vec<Stmt> = program.body.iter().map(|s| renamer.stmt(s)).collect();
    let normalized = Program { param, body, span: super::ast::Span::ZERO };
    let stripped = normalized.strip_spans();
    let mut canon = String::new();
    write_program(&mut canon, &stripped);
    let hash = util::fnv1a(canon.as_bytes());
    NormalizedAst { program: stripped, hash }
}

#[derive(Default)]
struct Renamer {
    map: BTreeMap<String, String>,
    next: usize,
}

impl Renamer {
    fn rename(&mut self, name: &str) -> String {
        if let Some(v) = self.map.get(name) {
            return v.clone();
        }
        let fresh = format!("v{}", self.next);
        self.next += 1;
        self.map.insert(name.to_string(), fresh.clone());
        fresh
    }

    fn stmt(&mut self, s: &Stmt) -> Stmt {
        match s {
            Stmt::Assign { target, value, span } => {
                // Source order: the target appears before the value.
                let target = self.rename(target);
                Stmt::Assign { target, value: self.expr(value), span: *span }
            }
            Stmt::ExprStmt { expr, span } => Stmt::ExprStmt { expr: self.expr(expr), span: *span },
            Stmt::For { var, iterable, body, span } => {
                let var = self.rename(var);
                let iterable = self.expr(iterable);
                Stmt::For { var, iterable, body: body.iter().map(|s| self.stmt(s)).collect(), span: *span }
            }
            Stmt::If { arms, else_body, span } => Stmt::If {
                arms: arms
                    .iter()
                    .map(|(c, b)| (self.expr(c), b.iter().map(|s| self.stmt(s)).collect()))
                    .collect(),
                else_body: else_body.as_ref().map(|b| b.iter().map(|s| self.stmt(s)).collect()),
                span: *span,
            },
            Stmt::Return { value, span } => Stmt::Return { value: self.expr(value), span: *span },
        }
    }

    fn expr(&mut self, e: &Expr) -> Expr {
        match e {
            Expr::Ident { name, span } => Expr::Ident { name: self.rename(name), span: *span },
            Expr::Str { .. } | Expr::Int { .. } | Expr::Float { .. } | Expr::Bool { .. } => e.clone(),
            Expr::List { items, span } => {
                Expr::List { items: items.iter().map(|i| self.expr(i)).collect(), span: *span }
            }
            Expr::Attr { obj, name, span } => Expr::Attr {
                obj: Box::new(self.expr(obj)),
                name: name.clone(),
                span: *span,
            },
            Expr::Index { obj, index, span } => Expr::Index {
                obj: Box::new(self.expr(obj)),
                index: Box::new(self.expr(index)),
                span: *span,
            },
            Expr::Call { func, args, span } => Expr::Call {
                func: func.clone(),
                args: args.iter().map(|a| self.expr(a)).collect(),
                span: *span,
            },
            Expr::MethodCall { obj, method, args, span } => Expr::MethodCall {
                obj: Box::new(self.expr(obj)),
                method: method.clone(),
                args: args.iter().map(|a| self.expr(a)).collect(),
                span: *span,
            },
            Expr::SortBy { obj, key_attr, span } => Expr::SortBy {
                obj: Box::new(self.expr(obj)),
                key_attr: key_attr.clone(),
                span: *span,
            },
            Expr::Unary { op, operand, span } => {
                Expr::Unary { op: *op, operand: Box::new(self.expr(operand)), span: *span }
            }
            Expr::Binary { op, lhs, rhs, span } => Expr::Binary {
                op: *op,
                lhs: Box::new(self.expr(lhs)),
                rhs: Box::new(self.expr(rhs)),
                span: *span,
            },
        }
    }
}

fn write_program(out: &mut String, p: &Program) {
    write!(out, "(program {}", p.param).unwrap();
    for s in &p.body {
        write_stmt(out, s);
    }
    out.push(')');
}

fn write_stmt(out: &mut String, s: &Stmt) {
    match s {
        Stmt::Assign { target, value, .. } => {
            write!(out, "(assign {target} ").unwrap();
            write_expr(out, value);
            out.push(')');
        }
        Stmt::ExprStmt { expr, .. } => {
            out.push_str("(expr ");
            write_expr(out, expr);
            out.push(')');
        }
        Stmt::For { var, iterable, body, .. } => {
            write!(out, "(for {var} ").unwrap();
            write_expr(out, iterable);
            for s in body {
                write_stmt(out, s);
            }
            out.push(')');
        }
        Stmt::If { arms, else_body, .. } => {
            out.push_str("(if");
            for (cond, body) in arms {
                out.push_str("(arm ");
                write_expr(out, cond);
                for s in body {
                    write_stmt(out, s);
                }
                out.push(')');
            }
            if let Some(body) = else_body {
                out.push_str("(else");
                for s in body {
                    write_stmt(out, s);
                }
                out.push(')');
            }
            out.push(')');
        }
        Stmt::Return { value, .. } => {
            out.push_str("(return ");
            write_expr(out, value);
            out.push(')');
        }
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Ident { name, .. } => write!(out, "(id {name})").unwrap(),
        Expr::Str { value, .. } => write!(out, "(str {value:?})").unwrap(),
        Expr::Int { value, .. } => write!(out, "(int {value})").unwrap(),
        Expr::Float { value, .. } => write!(out, "(float {value:?})").unwrap(),
        Expr::Bool { value, .. } => write!(out, "(bool {value})").unwrap(),
        Expr::List { items, .. } => {
            out.push_str("(list");
            for i in items {
                out.push(' ');
                write_expr(out, i);
            }
            out.push(')');
        }
        Expr::Attr { obj, name, .. } => {
            out.push_str("(attr ");
            write_expr(out, obj);
            write!(out, " {name})").unwrap();
        }
        Expr::Index { obj, index, .. } => {
            out.push_str("(index ");
            write_expr(out, obj);
            out.push(' ');
            write_expr(out, index);
            out.push(')');
        }
        Expr::Call { func, args, .. } => {
            write!(out, "(call {func}").unwrap();
            for a in args {
                out.push(' ');
                write_expr(out, a);
            }
            out.push(')');
        }
        Expr::MethodCall { obj, method, args, .. } => {
            out.push_str("(method ");
            write_expr(out, obj);
            write!(out, " {method}").unwrap();
            for a in args {
                out.push(' ');
                write_expr(out, a);
            }
            out.push(')');
        }
        Expr::SortBy { obj, key_attr, .. } => {
            out.push_str("(sortby ");
            write_expr(out, obj);
            write!(out, " {key_attr})").unwrap();
        }
        Expr::Unary { op, operand, .. } => {
            let name = match op {
                UnaryOp::Not => "not",
                UnaryOp::Neg => "neg",
            };
            write!(out, "(unary {name} ").unwrap();
            write_expr(out, operand);
            out.push(')');
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            write!(out, "(binary {} ", op.symbol()).unwrap();
            write_expr(out, lhs);
            out.push(' ');
            write_expr(out, rhs);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    const A: &str = "def execute_command(image):\n\
                     \x20   image_patch = ImagePatch(image)\n\
                     \x20   foo_patches = image_patch.find(\"dog\")\n\
                     \x20   return len(foo_patches)\n";

    #[test]
    fn renaming_does_not_change_hash() {
        let b = A.replace("image_patch", "q").replace("foo_patches", "zs");
        let na = normalize(&parse(A).unwrap());
        let nb = normalize(&parse(&b).unwrap());
        assert_eq!(na.hash, nb.hash);
        assert_eq!(na.program, nb.program);
    }

    #[test]
    fn literals_are_semantic() {
        let b = A.replace("dog", "cat");
        let na = normalize(&parse(A).unwrap());
        let nb = normalize(&parse(&b).unwrap());
        assert_ne!(na.hash, nb.hash);
    }

    #[test]
    fn normalize_is_idempotent() {
        let n1 = normalize(&parse(A).unwrap());
        let n2 = normalize(&n1.program);
        assert_eq!(n1.program, n2.program);
        assert_eq!(n1.hash, n2.hash);
    }

    #[test]
    fn first_use_order_names_the_param_v0() {
        let n = normalize(&parse(A).unwrap());
        assert_eq!(n.program.param, "v0");
        let printed = crate::lang::pretty_print(&n.program);
        assert!(printed.contains("v1 = ImagePatch(v0)"));
    }

    #[test]
    fn hash_hex_is_fixed_width() {
        let n = normalize(&parse(A).unwrap());
        assert_eq!(n.hash_hex().len(), 16);
    }
}
