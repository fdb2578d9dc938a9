//! Lexer and recursive-descent parser for the surface language, plus
//! definition inlining.
//!
//! Surface syntax (`--` comments run to end of line):
//!
//! ```text
//! program  := def* main?
//! def      := "def" IDENT param* "=" term
//! param    := "(" IDENT ":" type ")"
//! main     := "main" "[" ctx "]" "=" term
//! ctx      := ε | IDENT ":" type ("," IDENT ":" type)*
//! type     := "Q1" | "Q2" | type "*" type | "(" type ")"
//! term     := "let" pat "=" term "in" term
//!           | "qif" term "then" term "else" term
//!           | sum
//! sum      := prod ("+" prod)*
//! prod     := "{" ampexpr "}" "*" prod | atom
//! atom     := "(" term "," term ")" | "(" term ")" | "()" | "false" | "true"
//!           | "zero" "[" type "]" | IDENT | IDENT atom+      -- global call
//! pat      := IDENT | "(" IDENT "," IDENT ")"
//! ```
//!
//! Amplitude expressions inside `{...}` support decimal literals, `i`,
//! `sqrt(..)`, the operators `+ - * /`, unary minus and parentheses; they
//! are evaluated to a complex double at parse time.
//!
//! Binders never shadow: a name may not be rebound while in scope, nor
//! collide with a definition name.  `inline_defs` expands global calls
//! `f a1 .. an` into `let p1 = a1 in .. body`, renaming the definition's
//! parameters and internal binders to globally fresh names so the output
//! stays shadowing-free.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::syntax::{amp, fresh_name, Amplitude, Context, Pattern, QType, Term};

/// Position of a construct in the source text, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Source locations for a lowered [`Term`], mirroring its tree shape:
/// `children[i]` describes the same child as [`crate::syntax::child`]`(t, i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanNode {
    pub span: Span,
    pub children: Vec<SpanNode>,
}

impl SpanNode {
    fn leaf(span: Span) -> Self {
        SpanNode {
            span,
            children: Vec::new(),
        }
    }

    /// Span of the subterm at `path` (see [`crate::syntax::subterm_at`]).
    pub fn at_path(&self, path: &[usize]) -> Option<&SpanNode> {
        let mut node = self;
        for &i in path {
            node = node.children.get(i)?;
        }
        Some(node)
    }
}

/// A term as written, before globals are expanded.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTerm {
    pub span: Span,
    pub node: RawNode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawNode {
    Var(String),
    Unit,
    False,
    True,
    Zero(QType),
    Pair(Box<RawTerm>, Box<RawTerm>),
    Let(Pattern, Box<RawTerm>, Box<RawTerm>),
    IfQ(Box<RawTerm>, Box<RawTerm>, Box<RawTerm>),
    Scale(Amplitude, Box<RawTerm>),
    Sup(Box<RawTerm>, Box<RawTerm>),
    Call(String, Vec<RawTerm>),
}

/// A top-level definition `def name (p1:ty1) .. = body`.
#[derive(Debug, Clone, PartialEq)]
pub struct Def {
    pub name: String,
    pub params: Vec<(String, QType)>,
    pub body: RawTerm,
    pub span: Span,
}

/// A parsed source file: definitions in order, then an optional
/// `main [ctx] = term`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceProgram {
    pub defs: Vec<Def>,
    pub main: Option<(Context, RawTerm)>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("{span}: syntax error: expected {expected}")]
    Syntax { span: Span, expected: String },
    #[error("{span}: `{name}` is already bound and may not be shadowed")]
    Shadowing { span: Span, name: String },
    #[error("{span}: unknown identifier `{name}`")]
    UnknownIdentifier { span: Span, name: String },
    #[error("{span}: `{name}` is defined more than once")]
    DuplicateDefinition { span: Span, name: String },
    #[error("{span}: `{name}` takes {expected} argument(s), found {found}")]
    ArityMismatch {
        span: Span,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("{span}: bad amplitude: {message}")]
    BadAmplitude { span: Span, message: String },
    #[error("program has no main term")]
    MissingMain,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Equals,
    Plus,
    Minus,
    Star,
    Slash,
    KwDef,
    KwMain,
    KwLet,
    KwIn,
    KwQif,
    KwThen,
    KwElse,
    KwFalse,
    KwTrue,
    KwZero,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::KwDef => "`def`".into(),
            Tok::KwMain => "`main`".into(),
            Tok::KwLet => "`let`".into(),
            Tok::KwIn => "`in`".into(),
            Tok::KwQif => "`qif`".into(),
            Tok::KwThen => "`then`".into(),
            Tok::KwElse => "`else`".into(),
            Tok::KwFalse => "`false`".into(),
            Tok::KwTrue => "`true`".into(),
            Tok::KwZero => "`zero`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "def" => Tok::KwDef,
        "main" => Tok::KwMain,
        "let" => Tok::KwLet,
        "in" => Tok::KwIn,
        "qif" => Tok::KwQif,
        "then" => Tok::KwThen,
        "else" => Tok::KwElse,
        "false" => Tok::KwFalse,
        "true" => Tok::KwTrue,
        "zero" => Tok::KwZero,
        _ => return None,
    })
}

fn lex(text: &str) -> Result<(Vec<Token>, Span), ParseError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();

    macro_rules! bump {
        () => {{
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let span = Span { line, col };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '-' => {
                bump!();
                if chars.peek() == Some(&'-') {
                    // comment to end of line
                    while let Some(&c2) = chars.peek() {
                        if c2 == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    toks.push(Token {
                        tok: Tok::Minus,
                        span,
                    });
                }
            }
            '(' | ')' | '[' | ']' | '{' | '}' | ',' | ':' | '=' | '+' | '*' | '/' => {
                bump!();
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    '=' => Tok::Equals,
                    '+' => Tok::Plus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    _ => unreachable!(),
                };
                toks.push(Token { tok, span });
            }
            '0'..='9' | '.' => {
                let mut s = String::new();
                let mut seen_dot = false;
                while let Some(&c2) = chars.peek() {
                    match c2 {
                        '0'..='9' => s.push(bump!()),
                        '.' if !seen_dot => {
                            seen_dot = true;
                            s.push(bump!());
                        }
                        _ => break,
                    }
                }
                if s == "." {
                    return Err(ParseError::Syntax {
                        span,
                        expected: "a number".into(),
                    });
                }
                toks.push(Token {
                    tok: Tok::Number(s),
                    span,
                });
            }
            c2 if c2.is_ascii_alphabetic() || c2 == '_' => {
                let mut s = String::new();
                while let Some(&c3) = chars.peek() {
                    if c3.is_ascii_alphanumeric() || c3 == '_' || c3 == '\'' {
                        s.push(bump!());
                    } else {
                        break;
                    }
                }
                let tok = keyword(&s).unwrap_or(Tok::Ident(s));
                toks.push(Token { tok, span });
            }
            _ => {
                return Err(ParseError::Syntax {
                    span,
                    expected: format!("a token (found `{c}`)"),
                });
            }
        }
    }
    Ok((toks, Span { line, col }))
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Token>,
    eof: Span,
    pos: usize,
    /// Definition name -> number of parameters, in reading order.
    defs: HashMap<String, usize>,
    /// Variables currently in scope.
    scope: Vec<String>,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        let (toks, eof) = lex(text)?;
        Ok(Parser {
            toks,
            eof,
            pos: 0,
            defs: HashMap::new(),
            scope: Vec::new(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> Span {
        self.toks.get(self.pos).map_or(self.eof, |t| t.span)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Span, ParseError> {
        let span = self.here();
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(span)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let found = match self.peek() {
            Some(t) => format!("{expected} (found {})", t.describe()),
            None => format!("{expected} (found end of input)"),
        };
        ParseError::Syntax {
            span: self.here(),
            expected: found,
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        let span = self.here();
        match self.peek() {
            Some(Tok::Ident(_)) => {
                let Some(Tok::Ident(s)) = self.bump() else {
                    unreachable!()
                };
                Ok((s, span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    /// Bring `name` into scope, rejecting shadowing and collisions with
    /// definition names.
    fn bind(&mut self, name: String, span: Span) -> Result<(), ParseError> {
        if self.scope.contains(&name) || self.defs.contains_key(&name) {
            return Err(ParseError::Shadowing { span, name });
        }
        self.scope.push(name);
        Ok(())
    }

    // -- types and contexts --------------------------------------------------

    fn parse_type(&mut self) -> Result<QType, ParseError> {
        let mut ty = self.parse_type_factor()?;
        while self.eat(&Tok::Star) {
            let rhs = self.parse_type_factor()?;
            ty = QType::tensor(ty, rhs);
        }
        Ok(ty)
    }

    fn parse_type_factor(&mut self) -> Result<QType, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == "Q1" => {
                self.bump();
                Ok(QType::Unit)
            }
            Some(Tok::Ident(s)) if s == "Q2" => {
                self.bump();
                Ok(QType::Qubit)
            }
            Some(Tok::LParen) => {
                self.bump();
                let ty = self.parse_type()?;
                self.expect(Tok::RParen)?;
                Ok(ty)
            }
            _ => Err(self.unexpected("a type (`Q1`, `Q2` or `(`)")),
        }
    }

    /// `IDENT ":" type ("," IDENT ":" type)*`, possibly empty; the caller
    /// handles the surrounding brackets.
    fn parse_ctx_entries(&mut self, terminator: &Tok) -> Result<Context, ParseError> {
        let mut ctx = Context::empty();
        if self.peek() == Some(terminator) {
            return Ok(ctx);
        }
        loop {
            let (name, span) = self.expect_ident("a variable name")?;
            self.expect(Tok::Colon)?;
            let ty = self.parse_type()?;
            if ctx.contains(&name) || self.defs.contains_key(&name) {
                return Err(ParseError::Shadowing { span, name });
            }
            ctx.push(name, ty);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(ctx)
    }

    // -- terms ---------------------------------------------------------------

    fn parse_term(&mut self) -> Result<RawTerm, ParseError> {
        let span = self.here();
        match self.peek() {
            Some(Tok::KwLet) => {
                self.bump();
                let pat = self.parse_pattern()?;
                self.expect(Tok::Equals)?;
                let bound = self.parse_term()?;
                self.expect(Tok::KwIn)?;
                let depth = self.scope.len();
                for (name, nspan) in pat.clone() {
                    self.bind(name, nspan)?;
                }
                let body = self.parse_term()?;
                self.scope.truncate(depth);
                let pattern = match &pat[..] {
                    [(x, _)] => Pattern::Var(x.clone()),
                    [(x, _), (y, _)] => Pattern::Pair(x.clone(), y.clone()),
                    _ => unreachable!(),
                };
                Ok(RawTerm {
                    span,
                    node: RawNode::Let(pattern, Box::new(bound), Box::new(body)),
                })
            }
            Some(Tok::KwQif) => {
                self.bump();
                let cond = self.parse_term()?;
                self.expect(Tok::KwThen)?;
                let then_t = self.parse_term()?;
                self.expect(Tok::KwElse)?;
                let else_t = self.parse_term()?;
                Ok(RawTerm {
                    span,
                    node: RawNode::IfQ(Box::new(cond), Box::new(then_t), Box::new(else_t)),
                })
            }
            _ => self.parse_sum(),
        }
    }

    fn parse_pattern(&mut self) -> Result<Vec<(String, Span)>, ParseError> {
        if self.eat(&Tok::LParen) {
            let (x, xs) = self.expect_ident("a variable name")?;
            self.expect(Tok::Comma)?;
            let (y, ys) = self.expect_ident("a variable name")?;
            if x == y {
                return Err(ParseError::Shadowing { span: ys, name: y });
            }
            self.expect(Tok::RParen)?;
            Ok(vec![(x, xs), (y, ys)])
        } else {
            let (x, xs) = self.expect_ident("a pattern")?;
            Ok(vec![(x, xs)])
        }
    }

    fn parse_sum(&mut self) -> Result<RawTerm, ParseError> {
        let span = self.here();
        let mut t = self.parse_prod()?;
        while self.eat(&Tok::Plus) {
            let rhs = self.parse_prod()?;
            t = RawTerm {
                span,
                node: RawNode::Sup(Box::new(t), Box::new(rhs)),
            };
        }
        Ok(t)
    }

    fn parse_prod(&mut self) -> Result<RawTerm, ParseError> {
        let span = self.here();
        if self.eat(&Tok::LBrace) {
            let k = self.parse_amp_expr()?;
            if !k.re.is_finite() || !k.im.is_finite() {
                return Err(ParseError::BadAmplitude {
                    span,
                    message: "value is not finite".into(),
                });
            }
            self.expect(Tok::RBrace)?;
            self.expect(Tok::Star)?;
            let arg = self.parse_prod()?;
            Ok(RawTerm {
                span,
                node: RawNode::Scale(k, Box::new(arg)),
            })
        } else {
            self.parse_atom()
        }
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::LParen | Tok::KwFalse | Tok::KwTrue | Tok::KwZero | Tok::Ident(_))
        )
    }

    fn parse_atom(&mut self) -> Result<RawTerm, ParseError> {
        let span = self.here();
        match self.peek() {
            Some(Tok::LParen) => {
                self.bump();
                if self.eat(&Tok::RParen) {
                    return Ok(RawTerm {
                        span,
                        node: RawNode::Unit,
                    });
                }
                let first = self.parse_term()?;
                if self.eat(&Tok::Comma) {
                    let second = self.parse_term()?;
                    self.expect(Tok::RParen)?;
                    Ok(RawTerm {
                        span,
                        node: RawNode::Pair(Box::new(first), Box::new(second)),
                    })
                } else {
                    self.expect(Tok::RParen)?;
                    Ok(first)
                }
            }
            Some(Tok::KwFalse) => {
                self.bump();
                Ok(RawTerm {
                    span,
                    node: RawNode::False,
                })
            }
            Some(Tok::KwTrue) => {
                self.bump();
                Ok(RawTerm {
                    span,
                    node: RawNode::True,
                })
            }
            Some(Tok::KwZero) => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let ty = self.parse_type()?;
                self.expect(Tok::RBracket)?;
                Ok(RawTerm {
                    span,
                    node: RawNode::Zero(ty),
                })
            }
            Some(Tok::Ident(_)) => {
                let (name, span) = self.expect_ident("a variable")?;
                if self.defs.contains_key(&name) {
                    let mut args = Vec::new();
                    while self.starts_atom() {
                        args.push(self.parse_atom()?);
                    }
                    Ok(RawTerm {
                        span,
                        node: RawNode::Call(name, args),
                    })
                } else if self.scope.contains(&name) {
                    Ok(RawTerm {
                        span,
                        node: RawNode::Var(name),
                    })
                } else {
                    Err(ParseError::UnknownIdentifier { span, name })
                }
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    // -- amplitude expressions -----------------------------------------------

    fn parse_amp_expr(&mut self) -> Result<Amplitude, ParseError> {
        let mut v = self.parse_amp_term()?;
        loop {
            if self.eat(&Tok::Plus) {
                v += self.parse_amp_term()?;
            } else if self.eat(&Tok::Minus) {
                v -= self.parse_amp_term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn parse_amp_term(&mut self) -> Result<Amplitude, ParseError> {
        let mut v = self.parse_amp_factor()?;
        loop {
            if self.eat(&Tok::Star) {
                v *= self.parse_amp_factor()?;
            } else if self.eat(&Tok::Slash) {
                let span = self.here();
                let d = self.parse_amp_factor()?;
                if d.norm() == 0.0 {
                    return Err(ParseError::BadAmplitude {
                        span,
                        message: "division by zero".into(),
                    });
                }
                v /= d;
            } else {
                return Ok(v);
            }
        }
    }

    fn parse_amp_factor(&mut self) -> Result<Amplitude, ParseError> {
        let span = self.here();
        match self.peek() {
            Some(Tok::Minus) => {
                self.bump();
                Ok(-self.parse_amp_factor()?)
            }
            Some(Tok::Number(_)) => {
                let Some(Tok::Number(s)) = self.bump() else {
                    unreachable!()
                };
                let x: f64 = s.parse().map_err(|_| ParseError::BadAmplitude {
                    span,
                    message: format!("cannot read number `{s}`"),
                })?;
                Ok(amp(x, 0.0))
            }
            Some(Tok::Ident(s)) if s == "i" => {
                self.bump();
                Ok(amp(0.0, 1.0))
            }
            Some(Tok::Ident(s)) if s == "sqrt" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let v = self.parse_amp_expr()?;
                self.expect(Tok::RParen)?;
                Ok(v.sqrt())
            }
            Some(Tok::LParen) => {
                self.bump();
                let v = self.parse_amp_expr()?;
                self.expect(Tok::RParen)?;
                Ok(v)
            }
            _ => Err(self.unexpected("an amplitude (number, `i`, `sqrt` or `(`)")),
        }
    }

    // -- top level -----------------------------------------------------------

    fn parse_program(&mut self) -> Result<SourceProgram, ParseError> {
        let mut defs = Vec::new();
        while self.peek() == Some(&Tok::KwDef) {
            let span = self.here();
            self.bump();
            let (name, nspan) = self.expect_ident("a definition name")?;
            if self.defs.contains_key(&name) {
                return Err(ParseError::DuplicateDefinition { span: nspan, name });
            }
            let mut params = Vec::new();
            while self.eat(&Tok::LParen) {
                let (pname, pspan) = self.expect_ident("a parameter name")?;
                self.expect(Tok::Colon)?;
                let ty = self.parse_type()?;
                self.expect(Tok::RParen)?;
                self.bind(pname.clone(), pspan)?;
                params.push((pname, ty));
            }
            self.expect(Tok::Equals)?;
            let body = self.parse_term()?;
            self.scope.clear();
            self.defs.insert(name.clone(), params.len());
            defs.push(Def {
                name,
                params,
                body,
                span,
            });
        }
        let main = if self.peek() == Some(&Tok::KwMain) {
            self.bump();
            self.expect(Tok::LBracket)?;
            let ctx = self.parse_ctx_entries(&Tok::RBracket)?;
            self.expect(Tok::RBracket)?;
            self.expect(Tok::Equals)?;
            for (name, _) in ctx.iter() {
                self.scope.push(name.clone());
            }
            let body = self.parse_term()?;
            self.scope.clear();
            Some((ctx, body))
        } else {
            None
        };
        if self.pos < self.toks.len() {
            return Err(self.unexpected("`def`, `main` or end of input"));
        }
        Ok(SourceProgram { defs, main })
    }
}

/// Parse a whole source file.
pub fn parse(text: &str) -> Result<SourceProgram, ParseError> {
    Parser::new(text)?.parse_program()
}

/// Parse a bare term over the variables of `ctx`; global calls are not
/// available here.
pub fn parse_term_in(text: &str, ctx: &Context) -> Result<Term, ParseError> {
    let mut p = Parser::new(text)?;
    for (name, _) in ctx.iter() {
        p.scope.push(name.clone());
    }
    let raw = p.parse_term()?;
    if p.pos < p.toks.len() {
        return Err(p.unexpected("end of input"));
    }
    let empty = HashMap::new();
    let mut used = collect_names(&raw);
    used.extend(ctx.names());
    let (t, _) = lower(&raw, &empty, &mut used)?;
    Ok(t)
}

/// Parse a type such as `Q2*Q2`.
pub fn parse_type(text: &str) -> Result<QType, ParseError> {
    let mut p = Parser::new(text)?;
    let ty = p.parse_type()?;
    if p.pos < p.toks.len() {
        return Err(p.unexpected("end of input"));
    }
    Ok(ty)
}

/// Parse a context written `x:Q2, y:Q1*Q2` (no brackets); whitespace-only
/// input yields the empty context.
pub fn parse_context(text: &str) -> Result<Context, ParseError> {
    let mut p = Parser::new(text)?;
    if p.toks.is_empty() {
        return Ok(Context::empty());
    }
    let mut ctx = Context::empty();
    loop {
        let (name, span) = p.expect_ident("a variable name")?;
        p.expect(Tok::Colon)?;
        let ty = p.parse_type()?;
        if ctx.contains(&name) {
            return Err(ParseError::Shadowing { span, name });
        }
        ctx.push(name, ty);
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    if p.pos < p.toks.len() {
        return Err(p.unexpected("end of input"));
    }
    Ok(ctx)
}

// ---------------------------------------------------------------------------
// Definition inlining
// ---------------------------------------------------------------------------

struct InlinedDef {
    params: Vec<String>,
    body: Term,
    spans: SpanNode,
}

/// Expand all global calls in `main`, binding each argument with a `let`
/// so that argument terms are shared, not copied.  Returns the declared
/// context, the closed-over term, and source locations for every node.
pub fn inline_defs(p: &SourceProgram) -> Result<(Context, Term, SpanNode), ParseError> {
    let mut inlined: HashMap<String, InlinedDef> = HashMap::new();
    for def in &p.defs {
        let mut used: BTreeSet<String> = def.params.iter().map(|(n, _)| n.clone()).collect();
        used.extend(collect_names(&def.body));
        let (body, spans) = lower(&def.body, &inlined, &mut used)?;
        inlined.insert(
            def.name.clone(),
            InlinedDef {
                params: def.params.iter().map(|(n, _)| n.clone()).collect(),
                body,
                spans,
            },
        );
    }
    let (ctx, raw) = p.main.as_ref().ok_or(ParseError::MissingMain)?;
    let mut used = collect_names(raw);
    used.extend(ctx.names());
    let (term, spans) = lower(raw, &inlined, &mut used)?;
    Ok((ctx.clone(), term, spans))
}

/// Parse and inline in one step.
pub fn load_program(text: &str) -> Result<(Context, Term, SpanNode), ParseError> {
    inline_defs(&parse(text)?)
}

fn collect_names(raw: &RawTerm) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn go(raw: &RawTerm, out: &mut BTreeSet<String>) {
        match &raw.node {
            RawNode::Var(x) => {
                out.insert(x.clone());
            }
            RawNode::Unit | RawNode::False | RawNode::True | RawNode::Zero(_) => {}
            RawNode::Pair(a, b) | RawNode::Sup(a, b) => {
                go(a, out);
                go(b, out);
            }
            RawNode::Let(pat, a, b) => {
                out.extend(pat.names().iter().map(|s| s.to_string()));
                go(a, out);
                go(b, out);
            }
            RawNode::IfQ(c, a, b) => {
                go(c, out);
                go(a, out);
                go(b, out);
            }
            RawNode::Scale(_, a) => go(a, out),
            RawNode::Call(_, args) => {
                for a in args {
                    go(a, out);
                }
            }
        }
    }
    go(raw, &mut out);
    out
}

fn lower(
    raw: &RawTerm,
    defs: &HashMap<String, InlinedDef>,
    used: &mut BTreeSet<String>,
) -> Result<(Term, SpanNode), ParseError> {
    let span = raw.span;
    Ok(match &raw.node {
        RawNode::Var(x) => (Term::var(x), SpanNode::leaf(span)),
        RawNode::Unit => (Term::Unit, SpanNode::leaf(span)),
        RawNode::False => (Term::False, SpanNode::leaf(span)),
        RawNode::True => (Term::True, SpanNode::leaf(span)),
        RawNode::Zero(ty) => (Term::Zero(ty.clone()), SpanNode::leaf(span)),
        RawNode::Pair(a, b) => {
            let (ta, sa) = lower(a, defs, used)?;
            let (tb, sb) = lower(b, defs, used)?;
            (
                Term::pair(ta, tb),
                SpanNode {
                    span,
                    children: vec![sa, sb],
                },
            )
        }
        RawNode::Let(pat, a, b) => {
            let (ta, sa) = lower(a, defs, used)?;
            let (tb, sb) = lower(b, defs, used)?;
            (
                Term::Let(pat.clone(), Box::new(ta), Box::new(tb)),
                SpanNode {
                    span,
                    children: vec![sa, sb],
                },
            )
        }
        RawNode::IfQ(c, a, b) => {
            let (tc, sc) = lower(c, defs, used)?;
            let (ta, sa) = lower(a, defs, used)?;
            let (tb, sb) = lower(b, defs, used)?;
            (
                Term::qif(tc, ta, tb),
                SpanNode {
                    span,
                    children: vec![sc, sa, sb],
                },
            )
        }
        RawNode::Scale(k, a) => {
            let (ta, sa) = lower(a, defs, used)?;
            (
                Term::scale(*k, ta),
                SpanNode {
                    span,
                    children: vec![sa],
                },
            )
        }
        RawNode::Sup(a, b) => {
            let (ta, sa) = lower(a, defs, used)?;
            let (tb, sb) = lower(b, defs, used)?;
            (
                Term::sup(ta, tb),
                SpanNode {
                    span,
                    children: vec![sa, sb],
                },
            )
        }
        RawNode::Call(name, args) => {
            let def = defs
                .get(name)
                .unwrap_or_else(|| panic!("parser admitted unknown global `{name}`"));
            if args.len() != def.params.len() {
                return Err(ParseError::ArityMismatch {
                    span,
                    name: name.clone(),
                    expected: def.params.len(),
                    found: args.len(),
                });
            }
            let mut lowered_args = Vec::with_capacity(args.len());
            for a in args {
                lowered_args.push(lower(a, defs, used)?);
            }
            let mut rename = HashMap::new();
            let mut fresh_params = Vec::with_capacity(def.params.len());
            for p in &def.params {
                let f = fresh_name(p, used);
                used.insert(f.clone());
                rename.insert(p.clone(), f.clone());
                fresh_params.push(f);
            }
            let (mut term, mut spans) = freshen(&def.body, &def.spans, &rename, used);
            for (f, (arg, arg_spans)) in fresh_params.into_iter().zip(lowered_args).rev() {
                term = Term::let_in(Pattern::Var(f), arg, term);
                spans = SpanNode {
                    span,
                    children: vec![arg_spans, spans],
                };
            }
            (term, spans)
        }
    })
}

/// Rename free variables of `t` according to `map` and alpha-rename every
/// binder to a name fresh for `used`.  The tree shape is unchanged, so the
/// span tree is reused as-is.
fn freshen(
    t: &Term,
    spans: &SpanNode,
    map: &HashMap<String, String>,
    used: &mut BTreeSet<String>,
) -> (Term, SpanNode) {
    fn go(t: &Term, map: &HashMap<String, String>, used: &mut BTreeSet<String>) -> Term {
        match t {
            Term::Var(x) => Term::var(map.get(x).map_or(x.as_str(), |s| s.as_str())),
            Term::Unit | Term::False | Term::True | Term::Zero(_) => t.clone(),
            Term::Pair(a, b) => Term::pair(go(a, map, used), go(b, map, used)),
            Term::Sup(a, b) => Term::sup(go(a, map, used), go(b, map, used)),
            Term::Scale(k, a) => Term::scale(*k, go(a, map, used)),
            Term::IfQ(c, a, b) => Term::qif(go(c, map, used), go(a, map, used), go(b, map, used)),
            Term::Let(pat, a, b) => {
                let bound = go(a, map, used);
                let mut inner = map.clone();
                let fresh_pat = match pat {
                    Pattern::Var(x) => {
                        let f = fresh_name(x, used);
                        used.insert(f.clone());
                        inner.insert(x.clone(), f.clone());
                        Pattern::Var(f)
                    }
                    Pattern::Pair(x, y) => {
                        let fx = fresh_name(x, used);
                        used.insert(fx.clone());
                        let fy = fresh_name(y, used);
                        used.insert(fy.clone());
                        inner.insert(x.clone(), fx.clone());
                        inner.insert(y.clone(), fy.clone());
                        Pattern::Pair(fx, fy)
                    }
                };
                Term::Let(fresh_pat, Box::new(bound), Box::new(go(b, &inner, used)))
            }
        }
    }
    (go(t, map, used), spans.clone())
}
