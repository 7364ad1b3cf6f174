//! Recursive-descent parser for VPL.
//!
//! The language is a closed subset of Python surface syntax: one
//! `execute_command` function of statements (assignment, expression, `for`
//! over a list, `if`/`elif`/`else`, `return`) over a fixed set of callables.
//! Anything else is a [`ParseError`] carrying the source position, including
//! constructs Python would accept (nested `def`, `while`, imports, keyword
//! arguments outside `sort`, comparison chains).

use super::ast::{
    method_arity, BinOp, Expr, Program, Span, Stmt, UnaryOp, FREE_FUNCTIONS, PATCH_ATTRS,
    SORT_KEY_ATTRS,
};
use super::lex::{lex, Tok, Token};
use super::ParseError;

/// Python keywords VPL deliberately rejects at parse time.
const UNSUPPORTED: &[&str] = &[
    "while", "import", "from", "class", "with", "try", "except", "finally", "raise", "assert",
    "global", "nonlocal", "del", "pass", "break", "continue", "yield", "async", "await", "is",
    "None",
];

pub fn parse(source: &str) -> Result<Program, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0 };
    p.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek2(&self) -> &Token {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError {
            line: t.span.line,
            column: t.span.col,
            expected: expected.to_string(),
            found: t.tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Span, ParseError> {
        if self.peek().tok == tok {
            Ok(self.advance().span)
        } else {
            Err(self.err_here(expected))
        }
    }

    fn expect_ident(&mut self, expected: &str) -> Result<(String, Span), ParseError> {
        match &self.peek().tok {
            Tok::Ident(name) => {
                let name = name.clone();
                let span = self.advance().span;
                Ok((name, span))
            }
            _ => Err(self.err_here(expected)),
        }
    }

    /// A name legal as a variable binding (assignment target, loop variable,
    /// function parameter).
    fn expect_binding_name(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        let (name, span) = self.expect_ident(what)?;
        if FREE_FUNCTIONS.contains(&name.as_str()) || UNSUPPORTED.contains(&name.as_str()) {
            return Err(ParseError {
                line: span.line,
                column: span.col,
                expected: what.to_string(),
                found: format!("reserved name `{name}`"),
            });
        }
        Ok((name, span))
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let span = self.expect(Tok::Def, "`def`")?;
        let (name, name_span) = self.expect_ident("function name `execute_command`")?;
        if name != "execute_command" {
            return Err(ParseError {
                line: name_span.line,
                column: name_span.col,
                expected: "function name `execute_command`".into(),
                found: format!("`{name}`"),
            });
        }
        self.expect(Tok::LParen, "`(`")?;
        let (param, _) = self.expect_binding_name("a parameter name")?;
        self.expect(Tok::RParen, "`)` (exactly one parameter)")?;
        let body = self.block()?;
        self.expect(Tok::Eof, "end of input (exactly one top-level function)")?;
        Ok(Program { param, body, span })
    }

    /// `: NEWLINE INDENT stmt+ DEDENT`
    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::Colon, "`:`")?;
        self.expect(Tok::Newline, "end of line after `:`")?;
        self.expect(Tok::Indent, "an indented block")?;
        let mut body = Vec::new();
        while self.peek().tok != Tok::Dedent {
            body.push(self.stmt()?);
        }
        self.expect(Tok::Dedent, "dedent")?;
        if body.is_empty() {
            return Err(self.err_here("at least one statement"));
        }
        Ok(body)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.peek().span;
        match &self.peek().tok {
            Tok::Return => {
                self.advance();
                if self.peek().tok == Tok::Newline {
                    return Err(self.err_here("an expression after `return`"));
                }
                let value = self.expr()?;
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::Return { value, span })
            }
            Tok::For => {
                self.advance();
                let (var, _) = self.expect_binding_name("a loop variable")?;
                self.expect(Tok::In, "`in`")?;
                let iterable = self.expr()?;
                let body = self.block()?;
                Ok(Stmt::For { var, iterable, body, span })
            }
            Tok::If => {
                self.advance();
                let cond = self.expr()?;
                let body = self.block()?;
                let mut arms = vec![(cond, body)];
                let mut else_body = None;
                loop {
                    match &self.peek().tok {
                        Tok::Elif => {
                            self.advance();
                            let cond = self.expr()?;
                            let body = self.block()?;
                            arms.push((cond, body));
                        }
                        Tok::Else => {
                            self.advance();
                            else_body = Some(self.block()?);
                            break;
                        }
                        _ => break,
                    }
                }
                Ok(Stmt::If { arms, else_body, span })
            }
            Tok::Def => Err(self.err_here("a statement (nested function definitions are not allowed)")),
            Tok::Ident(name) if UNSUPPORTED.contains(&name.as_str()) => {
                Err(self.err_here("a VPL statement"))
            }
            Tok::Ident(_) if self.peek2().tok == Tok::Assign => {
                let (target, _) = self.expect_binding_name("an assignment target")?;
                self.expect(Tok::Assign, "`=`")?;
                let value = self.expr()?;
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::Assign { target, value, span })
            }
            _ => {
                let expr = self.expr()?;
                self.expect(Tok::Newline, "end of line")?;
                Ok(Stmt::ExprStmt { expr, span })
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.peek().tok == Tok::Or {
            let span = self.advance().span;
            let rhs = self.and_expr()?;
            lhs = Expr::Binary { op: BinOp::Or, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.not_expr()?;
        while self.peek().tok == Tok::And {
            let span = self.advance().span;
            let rhs = self.not_expr()?;
            lhs = Expr::Binary { op: BinOp::And, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Not {
            let span = self.advance().span;
            let operand = self.not_expr()?;
            return Ok(Expr::Unary { op: UnaryOp::Not, operand: Box::new(operand), span });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.arith()?;
        let op = match self.peek().tok {
            Tok::EqEq => Some(BinOp::Eq),
            Tok::NotEq => Some(BinOp::Ne),
            Tok::Lt => Some(BinOp::Lt),
            Tok::Le => Some(BinOp::Le),
            Tok::Gt => Some(BinOp::Gt),
            Tok::Ge => Some(BinOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            let span = self.advance().span;
            let rhs = self.arith()?;
            // No comparison chaining in VPL.
            return Ok(Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span });
        }
        Ok(lhs)
    }

    fn arith(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            let span = self.advance().span;
            let rhs = self.term()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            let span = self.advance().span;
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            let span = self.advance().span;
            let operand = self.unary()?;
            return Ok(Expr::Unary { op: UnaryOp::Neg, operand: Box::new(operand), span });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.atom()?;
        loop {
            match self.peek().tok {
                Tok::Dot => {
                    self.advance();
                    let (name, span) = self.expect_ident("an attribute or method name")?;
                    if name == "sort" {
                        e = self.sort_call(e, span)?;
                    } else if self.peek().tok == Tok::LParen {
                        let Some(arity) = method_arity(&name) else {
                            return Err(ParseError {
                                line: span.line,
                                column: span.col,
                                expected: "a known method (find, exists, verify_property, \
                                           simple_query, crop_*_of_bbox, sort, append)"
                                    .into(),
                                found: format!("`{name}`"),
                            });
                        };
                        let args = self.call_args()?;
                        if args.len() != arity {
                            return Err(ParseError {
                                line: span.line,
                                column: span.col,
                                expected: format!("{arity} argument(s) to `{name}`"),
                                found: format!("{}", args.len()),
                            });
                        }
                        e = Expr::MethodCall { obj: Box::new(e), method: name, args, span };
                    } else {
                        if !PATCH_ATTRS.contains(&name.as_str()) {
                            return Err(ParseError {
                                line: span.line,
                                column: span.col,
                                expected: "a patch attribute (left, right, upper, lower, \
                                           horizontal_center, vertical_center, area, category)"
                                    .into(),
                                found: format!("`{name}`"),
                            });
                        }
                        e = Expr::Attr { obj: Box::new(e), name, span };
                    }
                }
                Tok::LBracket => {
                    let span = self.advance().span;
                    let index = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    e = Expr::Index { obj: Box::new(e), index: Box::new(index), span };
                }
                _ => break,
            }
        }
        Ok(e)
    }

    /// `.sort(key=lambda x: x.<attr>)` with the attr restricted to the sort
    /// key set; the lambda must reference its own parameter.
    fn sort_call(&mut self, obj: Expr, span: Span) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        match self.expect_ident("`key=`")? {
            (k, kspan) if k != "key" => {
                return Err(ParseError {
                    line: kspan.line,
                    column: kspan.col,
                    expected: "`key=`".into(),
                    found: format!("`{k}`"),
                })
            }
            _ => {}
        }
        self.expect(Tok::Assign, "`=`")?;
        self.expect(Tok::Lambda, "`lambda`")?;
        let (param, _) = self.expect_binding_name("a lambda parameter")?;
        self.expect(Tok::Colon, "`:`")?;
        let (body_name, bspan) = self.expect_ident("the lambda parameter")?;
        if body_name != param {
            return Err(ParseError {
                line: bspan.line,
                column: bspan.col,
                expected: format!("the lambda parameter `{param}`"),
                found: format!("`{body_name}`"),
            });
        }
        self.expect(Tok::Dot, "`.`")?;
        let (attr, aspan) = self.expect_ident("a sort key attribute")?;
        if !SORT_KEY_ATTRS.contains(&attr.as_str()) {
            return Err(ParseError {
                line: aspan.line,
                column: aspan.col,
                expected: "a sort key attribute (area, horizontal_center, vertical_center, \
                           left, right, upper, lower)"
                    .into(),
                found: format!("`{attr}`"),
            });
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(Expr::SortBy { obj: Box::new(obj), key_attr: attr, span })
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                // Keyword arguments are only legal in `sort`.
                if matches!(self.peek().tok, Tok::Ident(_)) && self.peek2().tok == Tok::Assign {
                    return Err(self.err_here("a positional argument"));
                }
                args.push(self.expr()?);
                if self.peek().tok == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let span = self.peek().span;
        match self.peek().tok.clone() {
            Tok::Ident(name) => {
                if UNSUPPORTED.contains(&name.as_str()) {
                    return Err(self.err_here("a VPL expression"));
                }
                self.advance();
                if FREE_FUNCTIONS.contains(&name.as_str()) {
                    if self.peek().tok != Tok::LParen {
                        return Err(self.err_here(&format!("`(` after `{name}`")));
                    }
                    let args = self.call_args()?;
                    if args.len() != 1 {
                        return Err(ParseError {
                            line: span.line,
                            column: span.col,
                            expected: format!("1 argument to `{name}`"),
                            found: format!("{}", args.len()),
                        });
                    }
                    return Ok(Expr::Call { func: name, args, span });
                }
                if self.peek().tok == Tok::LParen {
                    return Err(ParseError {
                        line: span.line,
                        column: span.col,
                        expected: "a known function (ImagePatch, bool_to_yesno, len, abs)".into(),
                        found: format!("`{name}`"),
                    });
                }
                Ok(Expr::Ident { name, span })
            }
            Tok::Str(value) => {
                self.advance();
                Ok(Expr::Str { value, span })
            }
            Tok::Int(value) => {
                self.advance();
                Ok(Expr::Int { value, span })
            }
            Tok::Float(value) => {
                self.advance();
                Ok(Expr::Float { value, span })
            }
            Tok::True => {
                self.advance();
                Ok(Expr::Bool { value: true, span })
            }
            Tok::False => {
                self.advance();
                Ok(Expr::Bool { value: false, span })
            }
            Tok::LBracket => {
                self.advance();
                let mut items = Vec::new();
                if self.peek().tok != Tok::RBracket {
                    loop {
                        items.push(self.expr()?);
                        if self.peek().tok == Tok::Comma {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Expr::List { items, span })
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Lambda => Err(self.err_here("an expression (lambdas are only legal as sort keys)")),
            _ => Err(self.err_here("an expression")),
        }
    }
}
