//! Tokenizer and recursive-descent parser for sky source text.
//!
//! ```text
//! program    := statement* ;
//! statement  := fact | rule | constraint | directive ;
//! fact       := atom "." ;
//! rule       := atom ":-" body "." ;
//! constraint := ":-" body "." ;
//! directive  := "#guess" atom (":-" body)? "."
//!             | "#minimize" predlist "." | "#fix" predlist "." | "#show" predlist "." ;
//! body       := literal ("," literal)* ;
//! literal    := ["not"] atom ;
//! atom       := ident ["(" term ("," term)* ")"] ;
//! term       := ident | VARIABLE | INTEGER ;
//! ```
//!
//! The first syntax error stops the parse. Semantic problems are collected
//! by [`Program::new`] and reported together.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::analysis::ValidityReport;
use crate::ast::{Atom, Constant, Directives, Literal, Position, Program, Rule, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TokenKind {
    Identifier,
    Variable,
    Integer,
    Punctuation,
    Directive,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenKind::Identifier => "identifier",
            TokenKind::Variable => "variable",
            TokenKind::Integer => "integer",
            TokenKind::Punctuation => "punctuation",
            TokenKind::Directive => "directive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    pub column: usize,
}

impl Token {
    fn position(&self) -> Position {
        Position {
            line: self.line,
            column: self.column,
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punctuation && self.text == p
    }

    /// Position of the last character of the lexeme.
    fn end(&self) -> Position {
        Position {
            line: self.line,
            column: self.column + self.text.chars().count().saturating_sub(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub column: usize,
    pub expected: BTreeSet<TokenKind>,
}

impl ParseError {
    fn at(pos: Position, message: impl Into<String>, expected: &[TokenKind]) -> Self {
        ParseError {
            message: message.into(),
            line: pos.line,
            column: pos.column,
            expected: expected.iter().copied().collect(),
        }
    }
}

/// Failure to turn source text into a [`Program`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Invalid(#[from] ValidityReport),
}

const DIRECTIVES: [&str; 4] = ["#guess", "#minimize", "#fix", "#show"];

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    while let Some(&c) = chars.peek() {
        let start = Position { line, column };
        let mut take = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };

        if c.is_whitespace() {
            take(&mut chars);
            continue;
        }
        if c == '%' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                take(&mut chars);
            }
            continue;
        }

        let push = |tokens: &mut Vec<Token>, kind, text: String| {
            tokens.push(Token {
                kind,
                text,
                line: start.line,
                column: start.column,
            })
        };

        if c.is_ascii_alphabetic() || c == '#' {
            let mut word = String::from(take(&mut chars));
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    word.push(take(&mut chars));
                } else {
                    break;
                }
            }
            let kind = if c == '#' {
                if !DIRECTIVES.contains(&word.as_str()) {
                    return Err(ParseError::at(
                        start,
                        format!("unknown directive `{word}`"),
                        &[TokenKind::Directive],
                    ));
                }
                TokenKind::Directive
            } else if c.is_ascii_uppercase() {
                TokenKind::Variable
            } else {
                TokenKind::Identifier
            };
            push(&mut tokens, kind, word);
        } else if c.is_ascii_digit() {
            let mut digits = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    digits.push(take(&mut chars));
                } else {
                    break;
                }
            }
            push(&mut tokens, TokenKind::Integer, digits);
        } else if matches!(c, '(' | ')' | ',' | '.') {
            take(&mut chars);
            push(&mut tokens, TokenKind::Punctuation, c.to_string());
        } else if c == ':' {
            take(&mut chars);
            if chars.peek() == Some(&'-') {
                take(&mut chars);
                push(&mut tokens, TokenKind::Punctuation, ":-".to_string());
            } else {
                return Err(ParseError::at(
                    start,
                    "expected `:-`",
                    &[TokenKind::Punctuation],
                ));
            }
        } else {
            return Err(ParseError::at(
                start,
                format!("illegal character `{c}`"),
                &[],
            ));
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        self.pos += 1;
        t
    }

    /// Errors at end of input point at the last character of the last token.
    fn eof_error(&self, what: &str, expected: &[TokenKind]) -> ParseError {
        let pos = self
            .tokens
            .last()
            .map(Token::end)
            .unwrap_or(Position { line: 1, column: 1 });
        ParseError::at(
            pos,
            format!("unexpected end of input, expected {what}"),
            expected,
        )
    }

    fn unexpected(&self, what: &str, expected: &[TokenKind]) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::at(
                t.position(),
                format!("expected {what}, found `{}`", t.text),
                expected,
            ),
            None => self.eof_error(what, expected),
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<Token, ParseError> {
        match self.peek() {
            Some(t) if t.is_punct(p) => Ok(self.bump()),
            _ => Err(self.unexpected(&format!("`{p}`"), &[TokenKind::Punctuation])),
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn program(&mut self) -> Result<(Vec<Rule>, Directives), ParseError> {
        let mut rules = Vec::new();
        let mut directives = Directives::default();
        while let Some(tok) = self.peek() {
            let start = tok.position();
            match tok.kind {
                TokenKind::Directive => {
                    let d = self.bump();
                    match d.text.as_str() {
                        "#guess" => {
                            let head = self.atom()?;
                            let body = if self.eat_punct(":-") {
                                self.body()?
                            } else {
                                Vec::new()
                            };
                            self.expect_punct(".")?;
                            rules.push(Rule::guess(head, body).at(start));
                        }
                        other => {
                            let preds = self.predlist()?;
                            self.expect_punct(".")?;
                            let slot = match other {
                                "#minimize" => &mut directives.minimize,
                                "#fix" => &mut directives.fix,
                                _ => &mut directives.show,
                            };
                            slot.get_or_insert_with(BTreeSet::new).extend(preds);
                        }
                    }
                }
                TokenKind::Punctuation if tok.is_punct(":-") => {
                    self.bump();
                    let body = self.body()?;
                    self.expect_punct(".")?;
                    rules.push(Rule::constraint(body).at(start));
                }
                TokenKind::Identifier => {
                    let head = self.atom()?;
                    if self.eat_punct(":-") {
                        let body = self.body()?;
                        self.expect_punct(".")?;
                        rules.push(Rule::rule(head, body).at(start));
                    } else {
                        match self.peek() {
                            Some(t) if t.is_punct(".") => {
                                self.bump();
                                rules.push(Rule::fact(head).at(start));
                            }
                            _ => {
                                return Err(
                                    self.unexpected("`.` or `:-`", &[TokenKind::Punctuation])
                                )
                            }
                        }
                    }
                }
                _ => {
                    return Err(self.unexpected(
                        "a statement",
                        &[
                            TokenKind::Identifier,
                            TokenKind::Directive,
                            TokenKind::Punctuation,
                        ],
                    ))
                }
            }
        }
        Ok((rules, directives))
    }

    fn predlist(&mut self) -> Result<Vec<String>, ParseError> {
        let mut preds = vec![self.identifier("a predicate name")?];
        while self.eat_punct(",") {
            preds.push(self.identifier("a predicate name")?);
        }
        Ok(preds)
    }

    fn identifier(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => Ok(self.bump().text),
            _ => Err(self.unexpected(what, &[TokenKind::Identifier])),
        }
    }

    fn body(&mut self) -> Result<Vec<Literal>, ParseError> {
        let mut body = vec![self.literal()?];
        while self.eat_punct(",") {
            body.push(self.literal()?);
        }
        Ok(body)
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        // `not` followed by another identifier negates; a bare `not` is an atom.
        let negated = matches!(
            (self.peek(), self.tokens.get(self.pos + 1)),
            (Some(a), Some(b)) if a.kind == TokenKind::Identifier && a.text == "not" && b.kind == TokenKind::Identifier
        );
        if negated {
            self.bump();
            Ok(Literal::neg(self.atom()?))
        } else {
            Ok(Literal::pos(self.atom()?))
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let predicate = self.identifier("a predicate name")?;
        let mut args = Vec::new();
        if self.eat_punct("(") {
            args.push(self.term()?);
            while self.eat_punct(",") {
                args.push(self.term()?);
            }
            self.expect_punct(")")?;
        }
        Ok(Atom { predicate, args })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        const TERM: [TokenKind; 3] = [
            TokenKind::Identifier,
            TokenKind::Variable,
            TokenKind::Integer,
        ];
        let Some(tok) = self.peek() else {
            return Err(self.eof_error("a term", &TERM));
        };
        let term = match tok.kind {
            TokenKind::Identifier => Term::Const(Constant::Sym(tok.text.clone())),
            TokenKind::Variable => Term::Var(tok.text.clone()),
            TokenKind::Integer => {
                let n: i64 = tok.text.parse().map_err(|_| {
                    ParseError::at(
                        tok.position(),
                        "integer out of range",
                        &[TokenKind::Integer],
                    )
                })?;
                Term::Const(Constant::Int(n))
            }
            _ => return Err(self.unexpected("a term", &TERM)),
        };
        self.pos += 1;
        Ok(term)
    }
}

/// Syntax only: rules and directives in source order, unvalidated.
pub fn parse_statements(text: &str) -> Result<(Vec<Rule>, Directives), ParseError> {
    let tokens = tokenize(text)?;
    Parser { tokens, pos: 0 }.program()
}

pub fn parse_program(text: &str) -> Result<Program, LoadError> {
    let (rules, directives) = parse_statements(text)?;
    Ok(Program::new(rules, directives)?)
}
