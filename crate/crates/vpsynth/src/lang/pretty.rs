//! Canonical source rendering: 4-space indents, double-quoted strings, and
//! the minimal parentheses the grammar needs. `parse(pretty_print(a))` is
//! structurally `a`; pretty-printing a freshly parsed program is idempotent.

use super::ast::{BinOp, Expr, Program, Stmt, UnaryOp};

// Precedence levels, loosest to tightest. Postfix chains are 8; atoms 9.
const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_NOT: u8 = 3;
const PREC_CMP: u8 = 4;
const PREC_ADD: u8 = 5;
const PREC_MUL: u8 = 6;
const PREC_NEG: u8 = 7;
const PREC_POSTFIX: u8 = 8;

pub fn pretty_print(program: &Program) -> String {
    let mut out = format!("def execute_command({}):\n", program.param);
    for stmt in &program.body {
        write_stmt(&mut out, stmt, 1);
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn write_stmt(out: &mut String, stmt: &Stmt, level: usize) {
    match stmt {
        Stmt::Assign { target, value, .. } => {
            indent(out, level);
            out.push_str(target);
            out.push_str(" = ");
            out.push_str(&expr_str(value, 0));
            out.push('\n');
        }
        Stmt::ExprStmt { expr, .. } => {
            indent(out, level);
            out.push_str(&expr_str(expr, 0));
            out.push('\n');
        }
        Stmt::For { var, iterable, body, .. } => {
            indent(out, level);
            out.push_str("for ");
            out.push_str(var);
            out.push_str(" in ");
            out.push_str(&expr_str(iterable, 0));
            out.push_str(":\n");
            for s in body {
                write_stmt(out, s, level + 1);
            }
        }
        Stmt::If { arms, else_body, .. } => {
            for (i, (cond, body)) in arms.iter().enumerate() {
                indent(out, level);
                out.push_str(if i == 0 { "if " } else { "elif " });
                out.push_str(&expr_str(cond, 0));
                out.push_str(":\n");
                for s in body {
                    write_stmt(out, s, level + 1);
                }
            }
            if let Some(body) = else_body {
                indent(out, level);
                out.push_str("else:\n");
                for s in body {
                    write_stmt(out, s, level + 1);
                }
            }
        }
        Stmt::Return { value, .. } => {
            indent(out, level);
            out.push_str("return ");
            out.push_str(&expr_str(value, 0));
            out.push('\n');
        }
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => match op {
            BinOp::Or => PREC_OR,
            BinOp::And => PREC_AND,
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div => PREC_MUL,
            _ => PREC_CMP,
        },
        Expr::Unary { op: UnaryOp::Not, .. } => PREC_NOT,
        Expr::Unary { op: UnaryOp::Neg, .. } => PREC_NEG,
        Expr::Attr { .. }
        | Expr::Index { .. }
        | Expr::Call { .. }
        | Expr::MethodCall { .. }
        | Expr::SortBy { .. } => PREC_POSTFIX,
        _ => 9,
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}

fn expr_str(e: &Expr, min_prec: u8) -> String {
    let rendered = match e {
        Expr::Ident { name, .. } => name.clone(),
        Expr::Str { value, .. } => escape(value),
        Expr::Int { value, .. } => value.to_string(),
        // Debug formatting keeps the decimal point so the literal re-lexes
        // as a float.
        Expr::Float { value, .. } => format!("{value:?}"),
        Expr::Bool { value, .. } => if *value { "True" } else { "False" }.to_string(),
        Expr::List { items, .. } => {
            let inner: Vec<String> = items.iter().map(|i| expr_str(i, 0)).collect();
            format!("[{}]", inner.join(", "))
        }
        Expr::Attr { obj, name, .. } => format!("{}.{}", expr_str(obj, PREC_POSTFIX), name),
        Expr::Index { obj, index, .. } => {
            format!("{}[{}]", expr_str(obj, PREC_POSTFIX), expr_str(index, 0))
        }
        Expr::Call { func, args, .. } => {
            let inner: Vec<String> = args.iter().map(|a| expr_str(a, 0)).collect();
            format!("{}({})", func, inner.join(", "))
        }
        Expr::MethodCall { obj, method, args, .. } => {
            let inner: Vec<String> = args.iter().map(|a| expr_str(a, 0)).collect();
            format!("{}.{}({})", expr_str(obj, PREC_POSTFIX), method, inner.join(", "))
        }
        Expr::SortBy { obj, key_attr, .. } => {
            format!("{}.sort(key=lambda x: x.{})", expr_str(obj, PREC_POSTFIX), key_attr)
        }
        Expr::Unary { op, operand, .. } => match op {
            UnaryOp::Not => format!("not {}", expr_str(operand, PREC_CMP)),
            UnaryOp::Neg => format!("-{}", expr_str(operand, PREC_POSTFIX)),
        },
        Expr::Binary { op, lhs, rhs, .. } => {
            let my = prec(e);
            // Comparisons are non-associative; arithmetic/boolean chains are
            // left-associative.
            let (lp, rp) = if op.is_comparison() { (my + 1, my + 1) } else { (my, my + 1) };
            format!("{} {} {}", expr_str(lhs, lp), op.symbol(), expr_str(rhs, rp))
        }
    };
    if prec(e) < min_prec {
        format!("({rendered})")
    } else {
        rendered
    }
}
