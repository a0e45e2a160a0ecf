//! Formulas of the probabilistic modal mu-calculus in positive normal form.
//!
//! The concrete syntax accepted by [`parse`] is
//!
//! ```text
//! formula := binder | or
//! binder  := ("mu" | "nu") IDENT "." formula
//! or      := and { "|" and }
//! and     := modal { "&" modal }
//! modal   := "<" IDENT ">" modal | "[" IDENT "]" modal | atom
//! atom    := IDENT | "(" formula ")"
//! ```
//!
//! Binders extend as far right as possible. `Display` prints the same grammar
//! with the minimal number of parentheses, so `parse(&f.to_string()) == f`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown token {token:?} at {line}:{column}")]
    UnknownToken {
        line: usize,
        column: usize,
        token: char,
    },
    #[error("formula is not in normal form")]
    NotNormalForm,
    #[error("variable {0} is not bound in the formula")]
    NotBound(String),
    #[error("formula is open (free variables: {})", .0.join(", "))]
    Open(Vec<String>),
}

/// Least or greatest fixpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fixpoint {
    Mu,
    Nu,
}

impl Fixpoint {
    pub fn dual(self) -> Fixpoint {
        match self {
            Fixpoint::Mu => Fixpoint::Nu,
            Fixpoint::Nu => Fixpoint::Mu,
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            Fixpoint::Mu => "mu",
            Fixpoint::Nu => "nu",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Var(String),
    Diamond(String, Box<Formula>),
    Box(String, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Mu(String, Box<Formula>),
    Nu(String, Box<Formula>),
}

impl Formula {
    pub fn var(name: impl Into<String>) -> Formula {
        Formula::Var(name.into())
    }

    pub fn diamond(label: impl Into<String>, child: Formula) -> Formula {
        Formula::Diamond(label.into(), Box::new(child))
    }

    pub fn boxed(label: impl Into<String>, child: Formula) -> Formula {
        Formula::Box(label.into(), Box::new(child))
    }

    pub fn or(left: Formula, right: Formula) -> Formula {
        Formula::Or(Box::new(left), Box::new(right))
    }

    pub fn and(left: Formula, right: Formula) -> Formula {
        Formula::And(Box::new(left), Box::new(right))
    }

    pub fn mu(name: impl Into<String>, body: Formula) -> Formula {
        Formula::Mu(name.into(), Box::new(body))
    }

    pub fn nu(name: impl Into<String>, body: Formula) -> Formula {
        Formula::Nu(name.into(), Box::new(body))
    }

    pub fn fixpoint(kind: Fixpoint, name: impl Into<String>, body: Formula) -> Formula {
        match kind {
            Fixpoint::Mu => Formula::mu(name, body),
            Fixpoint::Nu => Formula::nu(name, body),
        }
    }

    /// The binder kind, variable and body if this is a fixpoint formula.
    pub fn as_fixpoint(&self) -> Option<(Fixpoint, &str, &Formula)> {
        match self {
            Formula::Mu(x, body) => Some((Fixpoint::Mu, x, body)),
            Formula::Nu(x, body) => Some((Fixpoint::Nu, x, body)),
            _ => None,
        }
    }

    /// Number of nodes in the syntax tree.
    pub fn size(&self) -> usize {
        match self {
            Formula::Var(_) => 1,
            Formula::Diamond(_, g) | Formula::Box(_, g) | Formula::Mu(_, g) | Formula::Nu(_, g) => {
                1 + g.size()
            }
            Formula::Or(g, h) | Formula::And(g, h) => 1 + g.size() + h.size(),
        }
    }

    /// Height of the syntax tree; a variable has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Var(_) => 1,
            Formula::Diamond(_, g) | Formula::Box(_, g) | Formula::Mu(_, g) | Formula::Nu(_, g) => {
                1 + g.depth()
            }
            Formula::Or(g, h) | Formula::And(g, h) => 1 + g.depth().max(h.depth()),
        }
    }

    /// Number of `mu`/`nu` binders.
    pub fn binder_count(&self) -> usize {
        match self {
            Formula::Var(_) => 0,
            Formula::Diamond(_, g) | Formula::Box(_, g) => g.binder_count(),
            Formula::Mu(_, g) | Formula::Nu(_, g) => 1 + g.binder_count(),
            Formula::Or(g, h) | Formula::And(g, h) => g.binder_count() + h.binder_count(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match f {
                Formula::Var(x) => {
                    if !bound.contains(x) {
                        out.insert(x.clone());
                    }
                }
                Formula::Diamond(_, g) | Formula::Box(_, g) => go(g, bound, out),
                Formula::Or(g, h) | Formula::And(g, h) => {
                    go(g, bound, out);
                    go(h, bound, out);
                }
                Formula::Mu(x, g) | Formula::Nu(x, g) => {
                    bound.push(x.clone());
                    go(g, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Variables bound by some binder, in preorder.
    pub fn bound_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Some((_, x, _)) = f.as_fixpoint() {
                out.push(x.to_string());
            }
        });
        out
    }

    /// Every name (variable or label) occurring anywhere in the formula.
    fn all_names(&self) -> HashSet<String> {
        let mut out = HashSet::new();
        self.visit(&mut |f| match f {
            Formula::Var(x) | Formula::Mu(x, _) | Formula::Nu(x, _) => {
                out.insert(x.clone());
            }
            Formula::Diamond(a, _) | Formula::Box(a, _) => {
                out.insert(a.clone());
            }
            _ => {}
        });
        out
    }

    /// Preorder traversal.
    pub fn visit<'a>(&'a self, visitor: &mut impl FnMut(&'a Formula)) {
        visitor(self);
        match self {
            Formula::Var(_) => {}
            Formula::Diamond(_, g) | Formula::Box(_, g) | Formula::Mu(_, g) | Formula::Nu(_, g) => {
                g.visit(visitor)
            }
            Formula::Or(g, h) | Formula::And(g, h) => {
                g.visit(visitor);
                h.visit(visitor);
            }
        }
    }

    /// Every binder binds a distinct variable and no variable is both free
    /// and bound.
    pub fn is_normal_form(&self) -> bool {
        let free = self.free_vars();
        let mut seen = HashSet::new();
        self.bound_vars()
            .into_iter()
            .all(|x| !free.contains(&x) && seen.insert(x))
    }

    /// Alpha-renames bound variables so the result is in normal form.
    ///
    /// A binder keeps its name unless that name was already claimed by a free
    /// variable or an earlier binder (in preorder); otherwise it gets the
    /// smallest numeric suffix that does not occur anywhere in the formula.
    pub fn normalize(&self) -> Formula {
        struct Renamer {
            taken: HashSet<String>,
            occurring: HashSet<String>,
        }

        impl Renamer {
            fn fresh(&mut self, base: &str) -> String {
                (1u64..)
                    .map(|i| format!("{base}{i}"))
                    .find(|c| !self.taken.contains(c) && !self.occurring.contains(c))
                    .expect("unbounded suffix search")
            }

            fn go(&mut self, f: &Formula, scope: &mut Vec<(String, String)>) -> Formula {
                match f {
                    Formula::Var(x) => {
                        let renamed = scope
                            .iter()
                            .rev()
                            .find(|(old, _)| old == x)
                            .map(|(_, new)| new.clone());
                        Formula::Var(renamed.unwrap_or_else(|| x.clone()))
                    }
                    Formula::Diamond(a, g) => Formula::diamond(a.clone(), self.go(g, scope)),
                    Formula::Box(a, g) => Formula::boxed(a.clone(), self.go(g, scope)),
                    Formula::Or(g, h) => {
                        let g = self.go(g, scope);
                        Formula::or(g, self.go(h, scope))
                    }
                    Formula::And(g, h) => {
                        let g = self.go(g, scope);
                        Formula::and(g, self.go(h, scope))
                    }
                    Formula::Mu(x, g) | Formula::Nu(x, g) => {
                        let kind = f.as_fixpoint().unwrap().0;
                        let name = if self.taken.contains(x) {
                            self.fresh(x)
                        } else {
                            x.clone()
                        };
                        self.taken.insert(name.clone());
                        scope.push((x.clone(), name.clone()));
                        let body = self.go(g, scope);
                        scope.pop();
                        Formula::fixpoint(kind, name, body)
                    }
                }
            }
        }

        let mut renamer = Renamer {
            taken: self.free_vars().into_iter().collect(),
            occurring: self.all_names(),
        };
        renamer.go(self, &mut Vec::new())
    }

    /// The dual formula: swaps `|`/`&`, `<a>`/`[a]` and `mu`/`nu`, leaving
    /// variable occurrences unchanged. Its value is one minus the value of
    /// `self` at every state.
    pub fn negate(&self) -> Result<Formula, FormulaError> {
        let free = self.free_vars();
        if !free.is_empty() {
            return Err(FormulaError::Open(free.into_iter().collect()));
        }
        if !self.is_normal_form() {
            return Err(FormulaError::NotNormalForm);
        }
        Ok(self.dual())
    }

    fn dual(&self) -> Formula {
        match self {
            Formula::Var(x) => Formula::Var(x.clone()),
            Formula::Diamond(a, g) => Formula::boxed(a.clone(), g.dual()),
            Formula::Box(a, g) => Formula::diamond(a.clone(), g.dual()),
            Formula::Or(g, h) => Formula::and(g.dual(), h.dual()),
            Formula::And(g, h) => Formula::or(g.dual(), h.dual()),
            Formula::Mu(x, g) => Formula::nu(x.clone(), g.dual()),
            Formula::Nu(x, g) => Formula::mu(x.clone(), g.dual()),
        }
    }

    /// Whether `x` subsumes `y`: the binder of `y` occurs in the body of the
    /// binder of `x`.
    pub fn subsumes(&self, x: &str, y: &str) -> Result<bool, FormulaError> {
        SubformulaTable::new(self)?.subsumes(x, y)
    }

    /// Structural equality up to consistent renaming of bound variables.
    pub fn alpha_eq(&self, other: &Formula) -> bool {
        fn go<'a>(a: &'a Formula, b: &'a Formula, env: &mut Vec<(&'a str, &'a str)>) -> bool {
            match (a, b) {
                (Formula::Var(x), Formula::Var(y)) => {
                    let bx = env.iter().rev().find(|(l, _)| *l == x.as_str());
                    let by = env.iter().rev().find(|(_, r)| *r == y.as_str());
                    match (bx, by) {
                        (None, None) => x == y,
                        (Some(p), Some(q)) => std::ptr::eq(p, q),
                        _ => false,
                    }
                }
                (Formula::Diamond(a1, g1), Formula::Diamond(a2, g2))
                | (Formula::Box(a1, g1), Formula::Box(a2, g2)) => a1 == a2 && go(g1, g2, env),
                (Formula::Or(g1, h1), Formula::Or(g2, h2))
                | (Formula::And(g1, h1), Formula::And(g2, h2)) => {
                    go(g1, g2, env) && go(h1, h2, env)
                }
                (Formula::Mu(x, g1), Formula::Mu(y, g2)) | (Formula::Nu(x, g1), Formula::Nu(y, g2)) => {
                    env.push((x, y));
                    let r = go(g1, g2, env);
                    env.pop();
                    r
                }
                _ => false,
            }
        }
        go(self, other, &mut Vec::new())
    }
}

// Precedence levels used by the printer: 0 = formula, 1 = or, 2 = and, 3 = modal.
impl Formula {
    fn write_prec(&self, out: &mut fmt::Formatter<'_>, level: u8) -> fmt::Result {
        match self {
            Formula::Var(x) => write!(out, "{x}"),
            Formula::Diamond(a, g) => {
                write!(out, "<{a}> ")?;
                g.write_prec(out, 3)
            }
            Formula::Box(a, g) => {
                write!(out, "[{a}] ")?;
                g.write_prec(out, 3)
            }
            Formula::Or(g, h) => parenthesize(out, level > 1, |out| {
                g.write_prec(out, 1)?;
                write!(out, " | ")?;
                h.write_prec(out, 2)
            }),
            Formula::And(g, h) => parenthesize(out, level > 2, |out| {
                g.write_prec(out, 2)?;
                write!(out, " & ")?;
                h.write_prec(out, 3)
            }),
            Formula::Mu(x, g) | Formula::Nu(x, g) => {
                let kind = self.as_fixpoint().unwrap().0;
                parenthesize(out, level > 0, |out| {
                    write!(out, "{} {x}. ", kind.keyword())?;
                    g.write_prec(out, 0)
                })
            }
        }
    }
}

fn parenthesize(
    out: &mut fmt::Formatter<'_>,
    parens: bool,
    inner: impl FnOnce(&mut fmt::Formatter<'_>) -> fmt::Result,
) -> fmt::Result {
    if parens {
        write!(out, "(")?;
        inner(out)?;
        write!(out, ")")
    } else {
        inner(out)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

impl std::str::FromStr for Formula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

pub fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Mu,
    Nu,
    Dot,
    Bar,
    Amp,
    LAngle,
    RAngle,
    LBracket,
    RBracket,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(x) => write!(f, "identifier `{x}`"),
            Token::Mu => write!(f, "`mu`"),
            Token::Nu => write!(f, "`nu`"),
            Token::Dot => write!(f, "`.`"),
            Token::Bar => write!(f, "`|`"),
            Token::Amp => write!(f, "`&`"),
            Token::LAngle => write!(f, "`<`"),
            Token::RAngle => write!(f, "`>`"),
            Token::LBracket => write!(f, "`[`"),
            Token::RBracket => write!(f, "`]`"),
            Token::LParen => write!(f, "`(`"),
            Token::RParen => write!(f, "`)`"),
            Token::End => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    token: Token,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, FormulaError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&c) = chars.peek() {
        let (start_line, start_column) = (line, column);
        if c == '\n' {
            chars.next();
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            column += 1;
            continue;
        }
        let token = if c.is_ascii_alphanumeric() || c == '_' {
            let mut ident = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    ident.push(c);
                    chars.next();
                    column += 1;
                } else {
                    break;
                }
            }
            match ident.as_str() {
                "mu" => Token::Mu,
                "nu" => Token::Nu,
                _ => Token::Ident(ident),
            }
        } else {
            let token = match c {
                '.' => Token::Dot,
                '|' => Token::Bar,
                '&' => Token::Amp,
                '<' => Token::LAngle,
                '>' => Token::RAngle,
                '[' => Token::LBracket,
                ']' => Token::RBracket,
                '(' => Token::LParen,
                ')' => Token::RParen,
                other => {
                    return Err(FormulaError::UnknownToken {
                        line,
                        column,
                        token: other,
                    })
                }
            };
            chars.next();
            column += 1;
            token
        };
        tokens.push(Spanned {
            token,
            line: start_line,
            column: start_column,
        });
    }
    tokens.push(Spanned {
        token: Token::End,
        line,
        column,
    });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].token
    }

    fn advance(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> FormulaError {
        let t = &self.tokens[self.pos];
        FormulaError::Syntax {
            line: t.line,
            column: t.column,
            message,
        }
    }

    fn expect(&mut self, expected: Token) -> Result<(), FormulaError> {
        if *self.peek() == expected {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("expected {expected}, found {}", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, FormulaError> {
        match self.peek().clone() {
            Token::Ident(x) => {
                self.advance();
                Ok(x)
            }
            other => Err(self.error(format!("expected identifier, found {other}"))),
        }
    }

    fn formula(&mut self) -> Result<Formula, FormulaError> {
        let kind = match self.peek() {
            Token::Mu => Fixpoint::Mu,
            Token::Nu => Fixpoint::Nu,
            _ => return self.or(),
        };
        self.advance();
        let x = self.ident()?;
        self.expect(Token::Dot)?;
        let body = self.formula()?;
        Ok(Formula::fixpoint(kind, x, body))
    }

    fn or(&mut self) -> Result<Formula, FormulaError> {
        let mut left = self.and()?;
        while *self.peek() == Token::Bar {
            self.advance();
            left = Formula::or(left, self.and()?);
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Formula, FormulaError> {
        let mut left = self.modal()?;
        while *self.peek() == Token::Amp {
            self.advance();
            left = Formula::and(left, self.modal()?);
        }
        Ok(left)
    }

    fn modal(&mut self) -> Result<Formula, FormulaError> {
        match self.peek() {
            Token::LAngle => {
                self.advance();
                let a = self.ident()?;
                self.expect(Token::RAngle)?;
                Ok(Formula::diamond(a, self.modal()?))
            }
            Token::LBracket => {
                self.advance();
                let a = self.ident()?;
                self.expect(Token::RBracket)?;
                Ok(Formula::boxed(a, self.modal()?))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, FormulaError> {
        match self.peek().clone() {
            Token::Ident(x) => {
                self.advance();
                Ok(Formula::Var(x))
            }
            Token::LParen => {
                self.advance();
                let f = self.formula()?;
                self.expect(Token::RParen)?;
                Ok(f)
            }
            Token::Mu | Token::Nu => Err(self.error(
                "a binder in operand position must be parenthesized".to_string(),
            )),
            other => Err(self.error(format!("expected formula, found {other}"))),
        }
    }
}

pub fn parse(text: &str) -> Result<Formula, FormulaError> {
    let mut parser = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let f = parser.formula()?;
    if *parser.peek() != Token::End {
        return Err(parser.error(format!("unexpected {}", parser.peek())));
    }
    Ok(f)
}

/// One entry of a [`SubformulaTable`]; children are table indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Var(String),
    Diamond(String, usize),
    Box(String, usize),
    Or(usize, usize),
    And(usize, usize),
    Fix(Fixpoint, String, usize),
}

impl Node {
    pub fn children(&self) -> Vec<usize> {
        match self {
            Node::Var(_) => vec![],
            Node::Diamond(_, c) | Node::Box(_, c) | Node::Fix(_, _, c) => vec![*c],
            Node::Or(l, r) | Node::And(l, r) => vec![*l, *r],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Binder {
    pub kind: Fixpoint,
    /// Table index of the binder formula `kind name. body`.
    pub index: usize,
    pub body: usize,
}

/// The distinct subformulas of a normal-form formula, indexed in preorder of
/// first occurrence. Index 0 is the formula itself.
#[derive(Debug, Clone)]
pub struct SubformulaTable {
    formulas: Vec<Formula>,
    nodes: Vec<Node>,
    parents: Vec<Vec<usize>>,
    binders: HashMap<String, Binder>,
    binder_order: Vec<String>,
}

impl SubformulaTable {
    pub fn new(f: &Formula) -> Result<SubformulaTable, FormulaError> {
        if !f.is_normal_form() {
            return Err(FormulaError::NotNormalForm);
        }
        let mut table = SubformulaTable {
            formulas: Vec::new(),
            nodes: Vec::new(),
            parents: Vec::new(),
            binders: HashMap::new(),
            binder_order: Vec::new(),
        };
        let mut index = HashMap::new();
        table.intern(f, &mut index);
        Ok(table)
    }

    fn intern(&mut self, f: &Formula, index: &mut HashMap<Formula, usize>) -> usize {
        if let Some(&i) = index.get(f) {
            return i;
        }
        let i = self.formulas.len();
        index.insert(f.clone(), i);
        self.formulas.push(f.clone());
        self.nodes.push(Node::Var(String::new()));
        self.parents.push(Vec::new());
        let node = match f {
            Formula::Var(x) => Node::Var(x.clone()),
            Formula::Diamond(a, g) => Node::Diamond(a.clone(), self.intern(g, index)),
            Formula::Box(a, g) => Node::Box(a.clone(), self.intern(g, index)),
            Formula::Or(g, h) => {
                let l = self.intern(g, index);
                Node::Or(l, self.intern(h, index))
            }
            Formula::And(g, h) => {
                let l = self.intern(g, index);
                Node::And(l, self.intern(h, index))
            }
            Formula::Mu(x, g) | Formula::Nu(x, g) => {
                let kind = f.as_fixpoint().unwrap().0;
                self.binder_order.push(x.clone());
                let body = self.intern(g, index);
                self.binders.insert(x.clone(), Binder { kind, index: i, body });
                Node::Fix(kind, x.clone(), body)
            }
        };
        for c in node.children() {
            if !self.parents[c].contains(&i) {
                self.parents[c].push(i);
            }
        }
        self.nodes[i] = node;
        i
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn formula(&self, i: usize) -> &Formula {
        &self.formulas[i]
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn position(&self, f: &Formula) -> Option<usize> {
        self.formulas.iter().position(|g| g == f)
    }

    pub fn binder(&self, x: &str) -> Option<&Binder> {
        self.binders.get(x)
    }

    /// Bound variables in order of their binders' first occurrence (outermost first).
    pub fn bound_vars(&self) -> &[String] {
        &self.binder_order
    }

    /// Indices reachable from `i` through child links, including `i`.
    pub fn descendants(&self, i: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![i];
        while let Some(j) = stack.pop() {
            if seen.insert(j) {
                stack.extend(self.nodes[j].children());
            }
        }
        seen
    }

    pub fn subsumes(&self, x: &str, y: &str) -> Result<bool, FormulaError> {
        let bx = self
            .binder(x)
            .ok_or_else(|| FormulaError::NotBound(x.to_string()))?;
        let by = self
            .binder(y)
            .ok_or_else(|| FormulaError::NotBound(y.to_string()))?;
        if x == y {
            return Ok(false);
        }
        Ok(self.descendants(bx.body).contains(&by.index))
    }
}
