//! Indentation-aware lexer for VPL.
//!
//! Produces a flat token stream with synthetic `Indent`/`Dedent`/`Newline`
//! tokens, Python style. Newlines inside parentheses or brackets are ignored
//! so calls may span lines. Tabs in indentation are rejected; comments run
//! from `#` to end of line.

use super::ParseError;
use crate::lang::ast::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    // keywords
    Def,
    Return,
    For,
    In,
    If,
    Elif,
    Else,
    Not,
    And,
    Or,
    True,
    False,
    Lambda,
    // literals and names
    Ident(String),
    Str(String),
    Int(i64),
    Float(f64),
    // punctuation
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Dot,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    // layout
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(n) => format!("identifier `{n}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Float(v) => format!("float `{v:?}`"),
            Tok::Newline => "end of line".to_string(),
            Tok::Indent => "indent".to_string(),
            Tok::Dedent => "dedent".to_string(),
            Tok::Eof => "end of input".to_string(),
            Tok::Def => "`def`".to_string(),
            Tok::Return => "`return`".to_string(),
            Tok::For => "`for`".to_string(),
            Tok::In => "`in`".to_string(),
            Tok::If => "`if`".to_string(),
            Tok::Elif => "`elif`".to_string(),
            Tok::Else => "`else`".to_string(),
            Tok::Not => "`not`".to_string(),
            Tok::And => "`and`".to_string(),
            Tok::Or => "`or`".to_string(),
            Tok::True => "`True`".to_string(),
            Tok::False => "`False`".to_string(),
            Tok::Lambda => "`lambda`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::LBracket => "`[`".to_string(),
            Tok::RBracket => "`]`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Colon => "`:`".to_string(),
            Tok::Dot => "`.`".to_string(),
            Tok::Assign => "`=`".to_string(),
            Tok::EqEq => "`==`".to_string(),
            Tok::NotEq => "`!=`".to_string(),
            Tok::Lt => "`<`".to_string(),
            Tok::Le => "`<=`".to_string(),
            Tok::Gt => "`>`".to_string(),
            Tok::Ge => "`>=`".to_string(),
            Tok::Plus => "`+`".to_string(),
            Tok::Minus => "`-`".to_string(),
            Tok::Star => "`*`".to_string(),
            Tok::Slash => "`/`".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    depth: usize,
    indents: Vec<u32>,
    out: Vec<Token>,
    src: std::marker::PhantomData<&'a str>,
}

pub fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        depth: 0,
        indents: vec![0],
        out: Vec::new(),
        src: std::marker::PhantomData,
    };
    lx.run()?;
    Ok(lx.out)
}

impl<'a> Lexer<'a> {
    fn err(&self, expected: &str, found: &str) -> ParseError {
        ParseError {
            line: self.line,
            column: self.col,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn push(&mut self, tok: Tok, span: Span) {
        self.out.push(Token { tok, span });
    }

    fn at_line_start(&self) -> bool {
        self.col == 1
    }

    fn run(&mut self) -> Result<(), ParseError> {
        loop {
            if self.at_line_start() && self.depth == 0 && !self.handle_indentation()? {
                break;
            }
            let Some(c) = self.peek() else { break };
            let span = Span::new(self.line, self.col);
            match c {
                ' ' => {
                    self.bump();
                }
                '\t' => return Err(self.err("space (tabs are not allowed)", "tab")),
                '\r' => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        if let Some(last) = self.out.last() {
                            if !matches!(last.tok, Tok::Newline | Tok::Indent | Tok::Dedent) {
                                self.push(Tok::Newline, span);
                            }
                        }
                    }
                }
                '"' | '\'' => self.lex_string(c)?,
                '0'..='9' => self.lex_number()?,
                'a'..='z' | 'A'..='Z' | '_' => self.lex_word(),
                '(' => {
                    self.bump();
                    self.depth += 1;
                    self.push(Tok::LParen, span);
                }
                ')' => {
                    self.bump();
                    self.depth = self.depth.saturating_sub(1);
                    self.push(Tok::RParen, span);
                }
                '[' => {
                    self.bump();
                    self.depth += 1;
                    self.push(Tok::LBracket, span);
                }
                ']' => {
                    self.bump();
                    self.depth = self.depth.saturating_sub(1);
                    self.push(Tok::RBracket, span);
                }
                ',' => {
                    self.bump();
                    self.push(Tok::Comma, span);
                }
                ':' => {
                    self.bump();
                    self.push(Tok::Colon, span);
                }
                '.' => {
                    self.bump();
                    self.push(Tok::Dot, span);
                }
                '=' => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        self.push(Tok::EqEq, span);
                    } else {
                        self.push(Tok::Assign, span);
                    }
                }
                '!' => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        self.push(Tok::NotEq, span);
                    } else {
                        return Err(self.err("`=` after `!`", "`!`"));
                    }
                }
                '<' => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        self.push(Tok::Le, span);
                    } else {
                        self.push(Tok::Lt, span);
                    }
                }
                '>' => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        self.push(Tok::Ge, span);
                    } else {
                        self.push(Tok::Gt, span);
                    }
                }
                '+' => {
                    self.bump();
                    self.push(Tok::Plus, span);
                }
                '-' => {
                    self.bump();
                    self.push(Tok::Minus, span);
                }
                '*' => {
                    self.bump();
                    self.push(Tok::Star, span);
                }
                '/' => {
                    self.bump();
                    self.push(Tok::Slash, span);
                }
                other => {
                    return Err(self.err("a VPL token", &format!("`{other}`")));
                }
            }
        }
        // Close the final line and any open blocks.
        let span = Span::new(self.line, self.col);
        if let Some(last) = self.out.last() {
            if !matches!(last.tok, Tok::Newline | Tok::Indent | Tok::Dedent) {
                self.push(Tok::Newline, span);
            }
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, span);
        }
        self.push(Tok::Eof, span);
        Ok(())
    }

    /// Measure the new line's indentation and emit Indent/Dedent tokens.
    /// Returns false at end of input.
    fn handle_indentation(&mut self) -> Result<bool, ParseError> {
        loop {
            // Count leading spaces of the current line.
            let mut width = 0u32;
            loop {
                match self.peek() {
                    Some(' ') => {
                        self.bump();
                        width += 1;
                    }
                    Some('\t') => return Err(self.err("space (tabs are not allowed)", "tab")),
                    _ => break,
                }
            }
            match self.peek() {
                // Blank or comment-only lines do not affect indentation.
                Some('\n') | Some('\r') => {
                    while let Some(c) = self.peek() {
                        self.bump();
                        if c == '\n' {
                            break;
                        }
                    }
                    continue;
                }
                Some('#') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                    continue;
                }
                None => return Ok(false),
                Some(_) => {
                    let span = Span::new(self.line, self.col);
                    let current = *self.indents.last().unwrap();
                    if width > current {
                        self.indents.push(width);
                        self.push(Tok::Indent, span);
                    } else if width < current {
                        while width < *self.indents.last().unwrap() {
                            self.indents.pop();
                            self.push(Tok::Dedent, span);
                        }
                        if width != *self.indents.last().unwrap() {
                            return Err(self.err("a matching indentation level", "misaligned indent"));
                        }
                    }
                    return Ok(true);
                }
            }
        }
    }

    fn lex_string(&mut self, quote: char) -> Result<(), ParseError> {
        let span = Span::new(self.line, self.col);
        self.bump();
        let mut value = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err("closing quote", "end of input")),
                Some('\n') => return Err(self.err("closing quote", "end of line")),
                Some('\\') => {
                    self.bump();
                    match self.bump() {
                        Some('n') => value.push('\n'),
                        Some('t') => value.push('\t'),
                        Some('\\') => value.push('\\'),
                        Some('"') => value.push('"'),
                        Some('\'') => value.push('\''),
                        other => {
                            return Err(self.err(
                                "escape (\\n, \\t, \\\\, \\\", \\')",
                                &other.map(|c| format!("`\\{c}`")).unwrap_or("end of input".into()),
                            ))
                        }
                    }
                }
                Some(c) if c == quote => {
                    self.bump();
                    break;
                }
                Some(c) => {
                    self.bump();
                    value.push(c);
                }
            }
        }
        self.push(Tok::Str(value), span);
        Ok(())
    }

    fn lex_number(&mut self) -> Result<(), ParseError> {
        let span = Span::new(self.line, self.col);
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        let is_float = self.peek() == Some('.')
            && self.chars.get(self.pos + 1).map(|c| c.is_ascii_digit()).unwrap_or(false);
        if is_float {
            text.push('.');
            self.bump();
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    text.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            let value: f64 = text.parse().map_err(|_| self.err("a float literal", &text))?;
            // Require round-trippable decimal notation so pretty-printing is
            // an exact inverse of parsing.
            if format!("{value:?}").contains('e') {
                return Err(self.err("a float literal in plain decimal range", &text));
            }
            self.push(Tok::Float(value), span);
        } else {
            let value: i64 =
                text.parse().map_err(|_| self.err("an integer that fits in 64 bits", &text))?;
            self.push(Tok::Int(value), span);
        }
        Ok(())
    }

    fn lex_word(&mut self) {
        let span = Span::new(self.line, self.col);
        let mut word = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                word.push(c);
                self.bump();
            } else {
                break;
            }
        }
        let tok = match word.as_str() {
            "def" => Tok::Def,
            "return" => Tok::Return,
            "for" => Tok::For,
            "in" => Tok::In,
            "if" => Tok::If,
            "elif" => Tok::Elif,
            "else" => Tok::Else,
            "not" => Tok::Not,
            "and" => Tok::And,
            "or" => Tok::Or,
            "True" => Tok::True,
            "False" => Tok::False,
            "lambda" => Tok::Lambda,
            _ => Tok::Ident(word),
        };
        self.push(tok, span);
    }
}
