//! Abstract syntax tree for VPL programs.
//!
//! A program is exactly one `def execute_command(<param>):` function. Every
//! node carries the source location it was parsed from; structural equality
//! helpers strip locations first.

use serde::{Deserialize, Serialize};

/// Free functions callable in VPL.
pub const FREE_FUNCTIONS: &[&str] = &["ImagePatch", "bool_to_yesno", "len", "abs"];

/// Methods callable on values, with their arity.
pub const METHODS: &[(&str, usize)] = &[
    ("find", 1),
    ("exists", 1),
    ("verify_property", 2),
    ("simple_query", 1),
    ("crop_left_of_bbox", 4),
    ("crop_right_of_bbox", 4),
    ("crop_above_bbox", 4),
    ("crop_below_bbox", 4),
    ("append", 1),
];

/// Attributes readable from a patch.
pub const PATCH_ATTRS: &[&str] = &[
    "left",
    "right",
    "upper",
    "lower",
    "horizontal_center",
    "vertical_center",
    "area",
    "category",
];

/// Attributes legal as a sort key (ascending, stable).
pub const SORT_KEY_ATTRS: &[&str] = &[
    "area",
    "horizontal_center",
    "vertical_center",
    "left",
    "right",
    "upper",
    "lower",
];

pub fn method_arity(name: &str) -> Option<usize> {
    METHODS.iter().find(|(m, _)| *m == name).map(|(_, a)| *a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const ZERO: Span = Span { line: 0, col: 0 };

    pub fn new(line: u32, col: u32) -> Span {
        Span { line, col }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub param: String,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    Assign { target: String, value: Expr, span: Span },
    ExprStmt { expr: Expr, span: Span },
    For { var: String, iterable: Expr, body: Vec<Stmt>, span: Span },
    If { arms: Vec<(Expr, Vec<Stmt>)>, else_body: Option<Vec<Stmt>>, span: Span },
    Return { value: Expr, span: Span },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    pub fn is_comparison(&self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Ident { name: String, span: Span },
    Str { value: String, span: Span },
    Int { value: i64, span: Span },
    Float { value: f64, span: Span },
    Bool { value: bool, span: Span },
    List { items: Vec<Expr>, span: Span },
    Attr { obj: Box<Expr>, name: String, span: Span },
    Index { obj: Box<Expr>, index: Box<Expr>, span: Span },
    Call { func: String, args: Vec<Expr>, span: Span },
    MethodCall { obj: Box<Expr>, method: String, args: Vec<Expr>, span: Span },
    /// `obj.sort(key=lambda x: x.<attr>)`
    SortBy { obj: Box<Expr>, key_attr: String, span: Span },
    Unary { op: UnaryOp, operand: Box<Expr>, span: Span },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, span: Span },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Ident { span, .. }
            | Expr::Str { span, .. }
            | Expr::Int { span, .. }
            | Expr::Float { span, .. }
            | Expr::Bool { span, .. }
            | Expr::List { span, .. }
            | Expr::Attr { span, .. }
            | Expr::Index { span, .. }
            | Expr::Call { span, .. }
            | Expr::MethodCall { span, .. }
            | Expr::SortBy { span, .. }
            | Expr::Unary { span, .. }
            | Expr::Binary { span, .. } => *span,
        }
    }
}

impl Program {
    /// Copy with all spans zeroed; the basis of structural equality.
    pub fn strip_spans(&self) -> Program {
        Program {
            param: self.param.clone(),
            body: self.body.iter().map(strip_stmt).collect(),
            span: Span::ZERO,
        }
    }

    pub fn structurally_eq(&self, other: &Program) -> bool {
        self.strip_spans() == other.strip_spans()
    }
}

fn strip_stmt(s: &Stmt) -> Stmt {
    match s {
        Stmt::Assign { target, value, .. } => {
            Stmt::Assign { target: target.clone(), value: strip_expr(value), span: Span::ZERO }
        }
        Stmt::ExprStmt { expr, .. } => Stmt::ExprStmt { expr: strip_expr(expr), span: Span::ZERO },
        Stmt::For { var, iterable, body, .. } => Stmt::For {
            var: var.clone(),
            iterable: strip_expr(iterable),
            body: body.iter().map(strip_stmt).collect(),
            span: Span::ZERO,
        },
        Stmt::If { arms, else_body, .. } => Stmt::If {
            arms: arms
                .iter()
                .map(|(c, b)| (strip_expr(c), b.iter().map(strip_stmt).collect()))
                .collect(),
            else_body: else_body.as_ref().map(|b| b.iter().map(strip_stmt).collect()),
            span: Span::ZERO,
        },
        Stmt::Return { value, .. } => Stmt::Return { value: strip_expr(value), span: Span::ZERO },
    }
}

fn strip_expr(e: &Expr) -> Expr {
    match e {
        Expr::Ident { name, .. } => Expr::Ident { name: name.clone(), span: Span::ZERO },
        Expr::Str { value, .. } => Expr::Str { value: value.clone(), span: Span::ZERO },
        Expr::Int { value, .. } => Expr::Int { value: *value, span: Span::ZERO },
        Expr::Float { value, .. } => Expr::Float { value: *value, span: Span::ZERO },
        Expr::Bool { value, .. } => Expr::Bool { value: *value, span: Span::ZERO },
        Expr::List { items, .. } => {
            Expr::List { items: items.iter().map(strip_expr).collect(), span: Span::ZERO }
        }
        Expr::Attr { obj, name, .. } => Expr::Attr {
            obj: Box::new(strip_expr(obj)),
            name: name.clone(),
            span: Span::ZERO,
        },
        Expr::Index { obj, index, .. } => Expr::Index {
            obj: Box::new(strip_expr(obj)),
            index: Box::new(strip_expr(index)),
            span: Span::ZERO,
        },
        Expr::Call { func, args, .. } => Expr::Call {
            func: func.clone(),
            args: args.iter().map(strip_expr).collect(),
            span: Span::ZERO,
        },
        Expr::MethodCall { obj, method, args, .. } => Expr::MethodCall {
            obj: Box::new(strip_expr(obj)),
            method: method.clone(),
            args: args.iter().map(strip_expr).collect(),
            span: Span::ZERO,
        },
        Expr::SortBy { obj, key_attr, .. } => Expr::SortBy {
            obj: Box::new(strip_expr(obj)),
            key_attr: key_attr.clone(),
            span: Span::ZERO,
        },
        Expr::Unary { op, operand, .. } => {
            Expr::Unary { op: *op, operand: Box::new(strip_expr(operand)), span: Span::ZERO }
        }
        Expr::Binary { op, lhs, rhs, .. } => Expr::Binary {
            op: *op,
            lhs: Box::new(strip_expr(lhs)),
            rhs: Box::new(strip_expr(rhs)),
            span: Span::ZERO,
        },
    }
}

/// Span-free node constructors, used by the grammar's template builders and
/// by tests.
pub mod build {
    use super::*;

    pub fn program(param: &str, body: Vec<Stmt>) -> Program {
        Program { param: param.into(), body, span: Span::ZERO }
    }

    pub fn assign(target: &str, value: Expr) -> Stmt {
        Stmt::Assign { target: target.into(), value, span: Span::ZERO }
    }

    pub fn expr_stmt(expr: Expr) -> Stmt {
        Stmt::ExprStmt { expr, span: Span::ZERO }
    }

    pub fn for_loop(var: &str, iterable: Expr, body: Vec<Stmt>) -> Stmt {
        Stmt::For { var: var.into(), iterable, body, span: Span::ZERO }
    }

    pub fn if_stmt(cond: Expr, body: Vec<Stmt>) -> Stmt {
        Stmt::If { arms: vec![(cond, body)], else_body: None, span: Span::ZERO }
    }

    pub fn ret(value: Expr) -> Stmt {
        Stmt::Return { value, span: Span::ZERO }
    }

    pub fn ident(name: &str) -> Expr {
        Expr::Ident { name: name.into(), span: Span::ZERO }
    }

    pub fn string(value: &str) -> Expr {
        Expr::Str { value: value.into(), span: Span::ZERO }
    }

    pub fn int(value: i64) -> Expr {
        Expr::Int { value, span: Span::ZERO }
    }

    pub fn boolean(value: bool) -> Expr {
        Expr::Bool { value, span: Span::ZERO }
    }

    pub fn list(items: Vec<Expr>) -> Expr {
        Expr::List { items, span: Span::ZERO }
    }

    pub fn attr(obj: Expr, name: &str) -> Expr {
        Expr::Attr { obj: Box::new(obj), name: name.into(), span: Span::ZERO }
    }

    pub fn index(obj: Expr, idx: Expr) -> Expr {
        Expr::Index { obj: Box::new(obj), index: Box::new(idx), span: Span::ZERO }
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Unary { op: UnaryOp::Neg, operand: Box::new(e), span: Span::ZERO }
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary { op: UnaryOp::Not, operand: Box::new(e), span: Span::ZERO }
    }

    pub fn call(func: &str, args: Vec<Expr>) -> Expr {
        Expr::Call { func: func.into(), args, span: Span::ZERO }
    }

    pub fn method(obj: Expr, name: &str, args: Vec<Expr>) -> Expr {
        Expr::MethodCall { obj: Box::new(obj), method: name.into(), args, span: Span::ZERO }
    }

    pub fn sort_by(obj: Expr, key_attr: &str) -> Expr {
        Expr::SortBy { obj: Box::new(obj), key_attr: key_attr.into(), span: Span::ZERO }
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span: Span::ZERO }
    }
}
