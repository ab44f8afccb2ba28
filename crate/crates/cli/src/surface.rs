//! Text syntax for expressions.
//!
//! ```text
//! expr   := 'let' name '=' expr 'in' expr | choice
//! choice := sum ('|>' sum)*
//! sum    := split ('+' split)*
//! split  := prefix (('(+)' | '(<+)') prefix)*
//! prefix := ('sum' | 'lsum' | 'rev' | 'chain[' re ']' | 'lchain[' re ']') prefix | comp
//! comp   := 'o' comp comp | atom
//! atom   := re '/' value | name | '(' expr ')'
//! ```
//!
//! Binary operators associate to the left. A constant's regex runs up to the
//! first unnested `/` and may not contain unescaped whitespace. Values are
//! integers or strings; strings are bare words or JSON-quoted.
//!
//! Parsing yields an [`Ast`]; elaboration fixes the monoid and the input
//! alphabet. The alphabet of a composition's outer function is the set of
//! symbols its literals mention together with the symbols the inner function
//! outputs.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::rc::Rc;
use std::sync::Arc;

use regcomb::expr::{output_symbols, ExprError, Node};
use regcomb::monoid::{MonoidError, SURFACE_RESERVED};
use regcomb::relang::{escape_char, state_elimination, RegexLit, RelangError};
use regcomb::{Alphabet, Dfa, FuncExpr, Monoid, Re, Regex, Word, E};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("bad regex literal `{text}`: {source}")]
    Regex { text: String, source: RelangError },
    #[error(transparent)]
    Literal(#[from] MonoidError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ast {
    Const { regex: String, value: String },
    Var(String),
    Let(String, Rc<Ast>, Rc<Ast>),
    Choice(Rc<Ast>, Rc<Ast>),
    Sum(Rc<Ast>, Rc<Ast>),
    Split { f: Rc<Ast>, g: Rc<Ast>, left: bool },
    Iter { f: Rc<Ast>, left: bool },
    Chain { regex: String, f: Rc<Ast>, left: bool },
    Rev(Rc<Ast>),
    Compose { g: Rc<Ast>, f: Rc<Ast> },
}

pub fn parse_ast(text: &str) -> Result<Ast, SurfaceError> {
    let chars: Vec<char> = text.chars().collect();
    let mut p = Parser { s: &chars, i: 0 };
    let e = p.expr()?;
    p.ws();
    if p.i != chars.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

struct Parser<'a> {
    s: &'a [char],
    i: usize,
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl Parser<'_> {
    fn err<T>(&self, msg: &str) -> Result<T, SurfaceError> {
        Err(SurfaceError::Syntax { pos: self.i, msg: msg.to_string() })
    }

    fn ws(&mut self) {
        while self.s.get(self.i).is_some_and(|c| c.is_whitespace()) {
            self.i += 1;
        }
    }

    fn at(&self, lit: &str) -> bool {
        lit.chars().enumerate().all(|(k, c)| self.s.get(self.i + k) == Some(&c))
    }

    fn eat(&mut self, lit: &str) -> bool {
        self.ws();
        if self.at(lit) {
            self.i += lit.chars().count();
            true
        } else {
            false
        }
    }

    /// Keyword `kw` followed by one of `next` (or the end of input).
    fn keyword(&mut self, kw: &str, next: &[char]) -> bool {
        self.ws();
        let n = kw.chars().count();
        if !self.at(kw) {
            return false;
        }
        match self.s.get(self.i + n) {
            None => {}
            Some(c) if c.is_whitespace() || next.contains(c) => {}
            _ => return false,
        }
        self.i += n;
        true
    }

    fn expr(&mut self) -> Result<Ast, SurfaceError> {
        if self.keyword("let", &[]) {
            self.ws();
            let name = self.name().ok_or(()).or_else(|_| self.err("expected a name after `let`"))?;
            if !self.eat("=") {
                return self.err("expected `=`");
            }
            let value = self.expr()?;
            if !self.keyword("in", &['(']) {
                return self.err("expected `in`");
            }
            let body = self.expr()?;
            return Ok(Ast::Let(name, Rc::new(value), Rc::new(body)));
        }
        let mut l = self.sum()?;
        while self.eat("|>") {
            let r = self.sum()?;
            l = Ast::Choice(Rc::new(l), Rc::new(r));
        }
        Ok(l)
    }

    fn sum(&mut self) -> Result<Ast, SurfaceError> {
        let mut l = self.split()?;
        loop {
            self.ws();
            if self.at("+") {
                self.i += 1;
                let r = self.split()?;
                l = Ast::Sum(Rc::new(l), Rc::new(r));
            } else {
                return Ok(l);
            }
        }
    }

    fn split(&mut self) -> Result<Ast, SurfaceError> {
        let mut l = self.prefix()?;
        loop {
            let left = if self.eat("(+)") {
                false
            } else if self.eat("(<+)") {
                true
            } else {
                return Ok(l);
            };
            let r = self.prefix()?;
            l = Ast::Split { f: Rc::new(l), g: Rc::new(r), left };
        }
    }

    fn prefix(&mut self) -> Result<Ast, SurfaceError> {
        self.ws();
        if self.const_regex_end().is_some() {
            return self.atom();
        }
        for (kw, left) in [("sum", false), ("lsum", true)] {
            if self.keyword(kw, &['(']) {
                let f = self.prefix()?;
                return Ok(Ast::Iter { f: Rc::new(f), left });
            }
        }
        if self.keyword("rev", &['(']) {
            return Ok(Ast::Rev(Rc::new(self.prefix()?)));
        }
        for (kw, left) in [("chain", false), ("lchain", true)] {
            if self.keyword(kw, &['[']) {
                let regex = self.bracketed()?;
                let f = self.prefix()?;
                return Ok(Ast::Chain { regex, f: Rc::new(f), left });
            }
        }
        self.comp()
    }

    fn comp(&mut self) -> Result<Ast, SurfaceError> {
        self.ws();
        if self.const_regex_end().is_none() && self.keyword("o", &['(']) {
            let g = self.comp()?;
            let f = self.comp()?;
            return Ok(Ast::Compose { g: Rc::new(g), f: Rc::new(f) });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Ast, SurfaceError> {
        self.ws();
        if let Some(end) = self.const_regex_end() {
            let regex: String = self.s[self.i..end].iter().collect();
            self.i = end + 1;
            let value = self.value()?;
            return Ok(Ast::Const { regex, value });
        }
        if self.at("(") {
            self.i += 1;
            let e = self.expr()?;
            if !self.eat(")") {
                return self.err("expected `)`");
            }
            return Ok(e);
        }
        match self.name() {
            Some(n) if !["let", "in", "sum", "lsum", "rev", "chain", "lchain", "o"].contains(&n.as_str()) => {
                Ok(Ast::Var(n))
            }
            _ => self.err("expected a constant, a name or `(`"),
        }
    }

    fn name(&mut self) -> Option<String> {
        let start = self.i;
        while self.s.get(self.i).is_some_and(|&c| is_word(c) || (self.i > start && c == '\'')) {
            self.i += 1;
        }
        (self.i > start).then(|| self.s[start..self.i].iter().collect())
    }

    /// If a constant starts here, the offset of the `/` ending its regex.
    fn const_regex_end(&self) -> Option<usize> {
        let mut depth = 0i32;
        let mut j = self.i;
        while let Some(&c) = self.s.get(j) {
            match c {
                _ if c.is_whitespace() => return None,
                '\\' => j += 1,
                '[' => {
                    j += 1;
                    while let Some(&d) = self.s.get(j) {
                        match d {
                            ']' => break,
                            '\\' => j += 1,
                            _ => {}
                        }
                        j += 1;
                    }
                }
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth < 0 {
                        return None;
                    }
                }
                '|' if depth == 0 && self.s.get(j + 1) == Some(&'>') => return None,
                '/' if depth == 0 => return (j > self.i).then_some(j),
                _ => {}
            }
            j += 1;
        }
        None
    }

    fn value(&mut self) -> Result<String, SurfaceError> {
        let start = self.i;
        if self.at("\"") {
            self.i += 1;
            while let Some(&c) = self.s.get(self.i) {
                self.i += 1;
                match c {
                    '\\' => self.i += 1,
                    '"' => return Ok(self.s[start..self.i].iter().collect()),
                    _ => {}
                }
            }
            return self.err("unterminated string");
        }
        while self.s.get(self.i).is_some_and(|&c| !c.is_whitespace() && !SURFACE_RESERVED.contains(c)) {
            self.i += 1;
        }
        if self.i == start {
            return self.err("expected a value after `/`");
        }
        Ok(self.s[start..self.i].iter().collect())
    }

    /// Text between `[` and its matching `]`.
    fn bracketed(&mut self) -> Result<String, SurfaceError> {
        if !self.at("[") {
            return self.err("expected `[`");
        }
        self.i += 1;
        let start = self.i;
        let mut depth = 0;
        while let Some(&c) = self.s.get(self.i) {
            match c {
                '\\' => self.i += 1,
                '[' => depth += 1,
                ']' if depth == 0 => {
                    let text = self.s[start..self.i].iter().collect();
                    self.i += 1;
                    return Ok(text);
                }
                ']' => depth -= 1,
                _ => {}
            }
            self.i += 1;
        }
        self.err("unterminated `[`")
    }
}

/// A lexical scope of `let` bindings.
type Env = Option<Rc<Binding>>;

struct Binding {
    name: String,
    ast: Rc<Ast>,
    parent: Env,
    /// Elaborations of the bound expression, by monoid and alphabet.
    memo: RefCell<HashMap<(TypeId, Alphabet), Rc<dyn Any>>>,
}

fn lookup(env: &Env, name: &str) -> Option<Rc<Binding>> {
    let mut cur = env.clone();
    while let Some(b) = cur {
        if b.name == name {
            return Some(b);
        }
        cur = b.parent.clone();
    }
    None
}

fn bind(env: &Env, name: &str, ast: &Rc<Ast>) -> Env {
    Some(Rc::new(Binding {
        name: name.to_string(),
        ast: ast.clone(),
        parent: env.clone(),
        memo: RefCell::new(HashMap::new()),
    }))
}

/// Visits the constants and chain languages read over the input alphabet of
/// `ast`, following names to their bindings. Constants under a composition's
/// outer function are skipped; `inner_values` controls whether the inner
/// function's constants count.
fn visit(
    ast: &Ast,
    env: &Env,
    inner_values: bool,
    seen: &mut HashSet<*const Binding>,
    out: &mut dyn FnMut(&str, Option<&str>),
) -> Result<(), SurfaceError> {
    match ast {
        Ast::Const { regex, value } => out(regex, Some(value)),
        Ast::Var(n) => {
            let b = lookup(env, n).ok_or_else(|| SurfaceError::Unbound(n.clone()))?;
            if seen.insert(Rc::as_ptr(&b)) {
                visit(&b.ast, &b.parent, inner_values, seen, out)?;
            }
        }
        Ast::Let(n, v, body) => {
            let env2 = bind(env, n, v);
            visit(body, &env2, inner_values, seen, out)?;
        }
        Ast::Choice(f, g) | Ast::Sum(f, g) | Ast::Split { f, g, .. } => {
            visit(f, env, inner_values, seen, out)?;
            visit(g, env, inner_values, seen, out)?;
        }
        Ast::Iter { f, .. } | Ast::Rev(f) => visit(f, env, inner_values, seen, out)?,
        Ast::Chain { regex, f, .. } => {
            out(regex, None);
            visit(f, env, inner_values, seen, out)?;
        }
        Ast::Compose { f, .. } => {
            if inner_values {
                visit(f, env, inner_values, seen, out)?;
            } else {
                // Only the languages of the inner function are read over this alphabet.
                visit(f, env, true, seen, &mut |re, _| out(re, None))?;
            }
        }
    }
    Ok(())
}

fn regex_symbols(text: &str, out: &mut BTreeSet<char>) -> Result<(), SurfaceError> {
    let lit = RegexLit::parse(text).map_err(|source| SurfaceError::Regex { text: text.to_string(), source })?;
    let mut syms = Vec::new();
    lit.symbols(&mut syms);
    out.extend(syms);
    Ok(())
}

fn symbols_of(ast: &Ast, env: &Env) -> Result<BTreeSet<char>, SurfaceError> {
    let mut regexes = Vec::new();
    visit(ast, env, true, &mut HashSet::new(), &mut |re, _| regexes.push(re.to_string()))?;
    let mut out = BTreeSet::new();
    for r in regexes {
        regex_symbols(&r, &mut out)?;
    }
    Ok(out)
}

/// Symbols mentioned by the literals read over the input alphabet.
pub fn mentioned_symbols(ast: &Ast) -> Result<Alphabet, SurfaceError> {
    Ok(Alphabet::new(symbols_of(ast, &None)?))
}

/// True iff every result constant is an integer literal (and there is one).
pub fn looks_numeric(ast: &Ast) -> Result<bool, SurfaceError> {
    let mut values = Vec::new();
    visit(ast, &None, false, &mut HashSet::new(), &mut |_, v| values.extend(v.map(str::to_string)))?;
    Ok(!values.is_empty()
        && values.iter().all(|v| {
            let t = v.strip_prefix('-').unwrap_or(v);
            !t.is_empty() && t.chars().all(|c| c.is_ascii_digit())
        }))
}

/// Elaborates `ast` with values in `D` over `alphabet`.
pub fn elaborate<D: Monoid>(ast: &Ast, alphabet: &Alphabet) -> Result<E<D>, SurfaceError> {
    elab(ast, alphabet, &None)
}

fn elab<D: Monoid>(ast: &Ast, alphabet: &Alphabet, env: &Env) -> Result<E<D>, SurfaceError> {
    let regex_err = |text: &str, e: ExprError| match e {
        ExprError::Relang(source) => SurfaceError::Regex { text: text.to_string(), source },
        other => SurfaceError::Expr(other),
    };
    Ok(match ast {
        Ast::Const { regex, value } => {
            let d = D::parse_literal(value)?;
            FuncExpr::constant_regex(alphabet, regex, d).map_err(|e| regex_err(regex, e))?
        }
        Ast::Var(n) => {
            let b = lookup(env, n).ok_or_else(|| SurfaceError::Unbound(n.clone()))?;
            let key = (TypeId::of::<D>(), alphabet.clone());
            if let Some(hit) = b.memo.borrow().get(&key) {
                return Ok(hit.downcast_ref::<E<D>>().expect("memo keyed by type").clone());
            }
            let e: E<D> = elab(&b.ast, alphabet, &b.parent)?;
            b.memo.borrow_mut().insert(key, Rc::new(e.clone()));
            e
        }
        Ast::Let(n, v, body) => elab(body, alphabet, &bind(env, n, v))?,
        Ast::Choice(f, g) => FuncExpr::choice(elab(f, alphabet, env)?, elab(g, alphabet, env)?)?,
        Ast::Sum(f, g) => FuncExpr::sum(elab(f, alphabet, env)?, elab(g, alphabet, env)?)?,
        Ast::Split { f, g, left } => FuncExpr::split(elab(f, alphabet, env)?, elab(g, alphabet, env)?, *left)?,
        Ast::Iter { f, left } => FuncExpr::iter(elab(f, alphabet, env)?, *left),
        Ast::Chain { regex, f, left } => {
            FuncExpr::chain_regex(elab(f, alphabet, env)?, regex, *left).map_err(|e| regex_err(regex, e))?
        }
        Ast::Rev(f) => FuncExpr::reverse(elab(f, alphabet, env)?),
        Ast::Compose { g, f } => {
            let inner: E<Word> = elab(f, alphabet, env)?;
            let mut syms = symbols_of(g, env)?;
            syms.extend(output_symbols(&inner));
            let outer: E<D> = elab(g, &Alphabet::new(syms), env)?;
            FuncExpr::compose(outer, inner)?
        }
    })
}

/// Parses and elaborates in one step. Without `alphabet`, the symbols the
/// literals mention are used.
pub fn parse_expr<D: Monoid>(text: &str, alphabet: Option<&Alphabet>) -> Result<E<D>, SurfaceError> {
    let ast = parse_ast(text)?;
    let alphabet = match alphabet {
        Some(a) => a.clone(),
        None => mentioned_symbols(&ast)?,
    };
    elaborate(&ast, &alphabet)
}

/// Regex text for a language, by state elimination on its trimmed automaton.
pub fn dfa_regex_text(lang: &Dfa) -> String {
    let trimmed = lang.minimize().trim();
    if trimmed.is_empty() {
        return "[]".to_string();
    }
    let re = state_elimination(&trimmed.to_nfa());
    let mut out = String::new();
    write_regex(&re, 0, &mut out);
    out
}

/// Writes `re` at precedence `ctx` (0 union, 1 concatenation, 2 postfix operand).
fn write_regex(re: &Re<char>, ctx: u8, out: &mut String) {
    fn letters(re: &Re<char>, acc: &mut Vec<char>) -> bool {
        match &**re {
            Regex::Sym(c) => {
                acc.push(*c);
                true
            }
            Regex::Union(a, b) => letters(a, acc) && letters(b, acc),
            _ => false,
        }
    }
    let mut cs = Vec::new();
    if matches!(&**re, Regex::Union(..)) && letters(re, &mut cs) {
        cs.sort();
        cs.dedup();
        out.push('[');
        for c in cs {
            // Inside a class only `]` and `\` need escaping, but escaping more is harmless.
            out.push_str(&escape_char(c));
        }
        out.push(']');
        return;
    }
    match &**re {
        Regex::Empty => out.push_str("[]"),
        Regex::Eps => out.push_str("()"),
        Regex::Sym(c) => out.push_str(&escape_char(*c)),
        Regex::Union(a, b) => {
            if let (Regex::Eps, _) | (_, Regex::Eps) = (&**a, &**b) {
                let x = if matches!(&**a, Regex::Eps) { b } else { a };
                if matches!(&**x, Regex::Star(_)) {
                    write_regex(x, ctx, out);
                    return;
                }
                write_regex(x, 2, out);
                out.push('?');
                return;
            }
            if ctx > 0 {
                out.push('(');
            }
            write_regex(a, 0, out);
            out.push('|');
            write_regex(b, 0, out);
            if ctx > 0 {
                out.push(')');
            }
        }
        Regex::Concat(a, b) => {
            if ctx > 1 {
                out.push('(');
            }
            write_regex(a, 1, out);
            write_regex(b, 1, out);
            if ctx > 1 {
                out.push(')');
            }
        }
        Regex::Star(a) => {
            write_regex(a, 2, out);
            out.push('*');
        }
    }
}

const P_CHOICE: u8 = 0;
const P_SUM: u8 = 1;
const P_SPLIT: u8 = 2;
const P_PREFIX: u8 = 3;
const P_COMP: u8 = 4;

/// Prints an expression in the surface syntax. Subexpressions reached more
/// than once are bound with `let` so the text stays linear in the DAG size.
pub fn print_expr<D: Monoid>(e: &E<D>) -> String {
    let mut p = Printer::default();
    count_refs(e, &mut p.refs);
    let body = print_rec(e, P_CHOICE, &mut p);
    let mut out = String::new();
    for (name, text) in &p.defs {
        let _ = writeln!(out, "let {name} = {text} in");
    }
    out.push_str(&body);
    out
}

#[derive(Default)]
struct Printer {
    refs: HashMap<usize, usize>,
    names: HashMap<usize, String>,
    defs: Vec<(String, String)>,
}

fn key<D: Monoid>(e: &E<D>) -> usize {
    Arc::as_ptr(e) as *const () as usize
}

fn count_refs<D: Monoid>(e: &E<D>, refs: &mut HashMap<usize, usize>) {
    let n = refs.entry(key(e)).or_insert(0);
    *n += 1;
    if *n > 1 {
        return;
    }
    match e.node() {
        Node::Const { .. } => {}
        Node::Choice(f, g) | Node::Sum(f, g) | Node::Split { f, g, .. } => {
            count_refs(f, refs);
            count_refs(g, refs);
        }
        Node::Iter { f, .. } | Node::Chain { f, .. } | Node::Reverse(f) => count_refs(f, refs),
        Node::Compose { g, f } => {
            count_refs(g, refs);
            count_refs(f, refs);
        }
    }
}

fn const_text<D: Monoid>(lang: &Dfa, regex: &Option<Arc<str>>, value: &D) -> String {
    let re = match regex {
        Some(r) => r.to_string(),
        None => dfa_regex_text(lang),
    };
    format!("{re}/{}", value.surface())
}

fn print_rec<D: Monoid>(e: &E<D>, ctx: u8, p: &mut Printer) -> String {
    let k = key(e);
    if let Some(n) = p.names.get(&k) {
        return n.clone();
    }
    let (prec, text) = match e.node() {
        Node::Const { lang, regex, value } => (u8::MAX, const_text(lang, regex, value)),
        Node::Choice(f, g) => (P_CHOICE, format!("{} |> {}", print_rec(f, P_CHOICE, p), print_rec(g, P_SUM, p))),
        Node::Sum(f, g) => (P_SUM, format!("{} + {}", print_rec(f, P_SUM, p), print_rec(g, P_SPLIT, p))),
        Node::Split { f, g, left } => {
            let op = if *left { "(<+)" } else { "(+)" };
            (P_SPLIT, format!("{} {op} {}", print_rec(f, P_SPLIT, p), print_rec(g, P_PREFIX, p)))
        }
        Node::Iter { f, left } => {
            let kw = if *left { "lsum" } else { "sum" };
            (P_PREFIX, format!("{kw} {}", print_rec(f, P_PREFIX, p)))
        }
        Node::Chain { f, lang, regex, left } => {
            let kw = if *left { "lchain" } else { "chain" };
            let re = regex.as_ref().map(|r| r.to_string()).unwrap_or_else(|| dfa_regex_text(lang));
            (P_PREFIX, format!("{kw}[{re}] {}", print_rec(f, P_PREFIX, p)))
        }
        Node::Reverse(f) => (P_PREFIX, format!("rev {}", print_rec(f, P_PREFIX, p))),
        Node::Compose { g, f } => (P_COMP, format!("o {} {}", print_rec(g, P_COMP, p), print_rec(f, P_COMP, p))),
    };
    let shared = p.refs.get(&k).copied().unwrap_or(0) > 1;
    let small_const = prec == u8::MAX && text.len() <= 24;
    if shared && !small_const {
        let name = format!("t{}", p.defs.len());
        p.defs.push((name.clone(), text));
        p.names.insert(k, name.clone());
        return name;
    }
    if prec < ctx {
        format!("({text})")
    } else {
        text
    }
}

/// Structural equality: same node kinds, languages, values and alphabets.
pub fn same_structure<D: Monoid>(a: &E<D>, b: &E<D>) -> bool {
    same_rec(a, b, &mut HashSet::new())
}

fn same_rec<D: Monoid>(a: &E<D>, b: &E<D>, done: &mut HashSet<(usize, usize)>) -> bool {
    if !done.insert((key(a), key(b))) {
        return true;
    }
    if a.alphabet() != b.alphabet() {
        return false;
    }
    match (a.node(), b.node()) {
        (Node::Const { lang: l1, value: v1, .. }, Node::Const { lang: l2, value: v2, .. }) => l1 == l2 && v1 == v2,
        (Node::Choice(f1, g1), Node::Choice(f2, g2)) | (Node::Sum(f1, g1), Node::Sum(f2, g2)) => {
            same_rec(f1, f2, done) && same_rec(g1, g2, done)
        }
        (Node::Split { f: f1, g: g1, left: l1 }, Node::Split { f: f2, g: g2, left: l2 }) => {
            l1 == l2 && same_rec(f1, f2, done) && same_rec(g1, g2, done)
        }
        (Node::Iter { f: f1, left: l1 }, Node::Iter { f: f2, left: l2 }) => l1 == l2 && same_rec(f1, f2, done),
        (Node::Chain { f: f1, lang: a1, left: l1, .. }, Node::Chain { f: f2, lang: a2, left: l2, .. }) => {
            l1 == l2 && a1 == a2 && same_rec(f1, f2, done)
        }
        (Node::Reverse(f1), Node::Reverse(f2)) => same_rec(f1, f2, done),
        (Node::Compose { g: g1, f: f1 }, Node::Compose { g: g2, f: f2 }) => {
            same_rec(g1, g2, done) && same_rec(f1, f2, &mut HashSet::new())
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use regcomb::expr::eval_naive_str;
    use regcomb::Int;

    #[test]
    fn precedence() {
        let ast = parse_ast("sum (a/1 |> b/0)").unwrap();
        assert!(matches!(ast, Ast::Iter { left: false, .. }));
        let ast = parse_ast("(a*b)/x (+) b*/y").unwrap();
        match ast {
            Ast::Split { f, g, left: false } => {
                assert_eq!(*f, Ast::Const { regex: "(a*b)".into(), value: "x".into() });
                assert_eq!(*g, Ast::Const { regex: "b*".into(), value: "y".into() });
            }
            other => panic!("{other:?}"),
        }
        let ast = parse_ast("a/1 |> b/1 + b/2 (+) a/3").unwrap();
        let Ast::Choice(_, r) = ast else { panic!() };
        let Ast::Sum(_, r) = &*r else { panic!() };
        assert!(matches!(&**r, Ast::Split { .. }));
        let ast = parse_ast("let f = a/a in chain[a*b] f").unwrap();
        assert!(matches!(ast, Ast::Let(..)));
    }

    #[test]
    fn evaluates() {
        let e: E<Int> = parse_expr("sum (a/1 |> b/0)", None).unwrap();
        assert_eq!(eval_naive_str(&e, "abab").unwrap().unwrap().render(), "2");
        let e: E<Word> = parse_expr("lsum (a/a |> b/b)", None).unwrap();
        assert_eq!(eval_naive_str(&e, "aab").unwrap().unwrap().0, "baa");
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(parse_ast("a/1 |>"), Err(SurfaceError::Syntax { pos: 6, .. })));
        assert!(matches!(parse_expr::<Int>("f", None), Err(SurfaceError::Unbound(_))));
        assert!(matches!(parse_expr::<Int>("(a/1", None), Err(SurfaceError::Syntax { .. })));
    }

    #[test]
    fn regex_printing_roundtrips() {
        let a = Alphabet::from_symbols("ab#");
        for text in ["(a|b)*#", "a*b", "()", "[]", "(ab|b)*a?", ".*#.*"] {
            let d = regcomb::relang::regex_dfa(text, &a).unwrap().minimize();
            let back = regcomb::relang::regex_dfa(&dfa_regex_text(&d), &a).unwrap().minimize();
            assert_eq!(d, back, "{text}");
        }
    }
}
