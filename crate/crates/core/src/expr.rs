//! Combinator expressions and their reference semantics.
//!
//! An expression denotes a partial function from strings over its input
//! alphabet to a monoid `D`. [`eval_naive`] evaluates by looking for the unique
//! decomposition each combinator asks for; it is the oracle the compiled
//! machines are checked against.

use std::collections::HashMap;
use std::fmt::Debug;
use std::sync::Arc;

use thiserror::Error;

use crate::monoid::{Monoid, Word};
use crate::relang::{explore, Alphabet, Dfa, RelangError};

/// Shared handle to an expression node. Subexpressions may be shared, so an
/// expression is a DAG.
pub type E<D> = Arc<FuncExpr<D>>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("alphabet mismatch: {0}")]
    Alphabet(String),
    #[error("symbol {0:?} is not in the input alphabet")]
    UnknownSymbol(char),
    #[error("composition: inner function outputs {0:?}, which is outside the outer input alphabet")]
    ComposeOutput(char),
    #[error(transparent)]
    Relang(#[from] RelangError),
    #[error("{0}")]
    Unsupported(String),
}

/// A combinator expression over input alphabet `alphabet`.
#[derive(Clone, Debug)]
pub struct FuncExpr<D: Monoid> {
    alphabet: Alphabet,
    node: Node<D>,
}

#[derive(Clone, Debug)]
pub enum Node<D: Monoid> {
    /// `value` on strings of `lang`, undefined elsewhere. `lang` is minimal;
    /// `regex` keeps the source text when the constant came from a regex literal.
    Const { lang: Dfa, regex: Option<Arc<str>>, value: D },
    /// `f` where defined, else `g`.
    Choice(E<D>, E<D>),
    /// `f(σ) + g(σ)`.
    Sum(E<D>, E<D>),
    /// Unique split `σ₁σ₂` with both sides defined; `f(σ₁)+g(σ₂)`, or
    /// `g(σ₂)+f(σ₁)` when `left`.
    Split { f: E<D>, g: E<D>, left: bool },
    /// Unique decomposition into nonempty defined pieces, summed in order
    /// (reverse order when `left`). The empty string maps to zero.
    Iter { f: E<D>, left: bool },
    /// Unique decomposition into at least two nonempty pieces of `lang`; sums
    /// `f` over consecutive pairs of pieces (reverse order when `left`).
    Chain { f: E<D>, lang: Dfa, regex: Option<Arc<str>>, left: bool },
    /// `f(reverse σ)`.
    Reverse(E<D>),
    /// `g(f(σ))`; `f` outputs strings over `g`'s input alphabet.
    Compose { g: E<D>, f: E<Word> },
}

impl<D: Monoid> FuncExpr<D> {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn node(&self) -> &Node<D> {
        &self.node
    }

    fn wrap(alphabet: Alphabet, node: Node<D>) -> E<D> {
        Arc::new(FuncExpr { alphabet, node })
    }

    /// `value` on `lang`, undefined elsewhere.
    pub fn constant(lang: &Dfa, value: D) -> E<D> {
        Self::wrap(lang.alphabet().clone(), Node::Const { lang: lang.minimize(), regex: None, value })
    }

    /// Constant whose language is given by a regex literal over `alphabet`.
    pub fn constant_regex(alphabet: &Alphabet, regex: &str, value: D) -> Result<E<D>, ExprError> {
        let lang = crate::relang::regex_dfa(regex, alphabet)?;
        Ok(Self::wrap(alphabet.clone(), Node::Const { lang: lang.minimize(), regex: Some(Arc::from(regex)), value }))
    }

    /// `value` on the one-letter string `c`.
    pub fn letter(alphabet: &Alphabet, c: char, value: D) -> Result<E<D>, ExprError> {
        if !alphabet.contains(&c) {
            return Err(ExprError::UnknownSymbol(c));
        }
        let lang = Dfa::word(alphabet, &[c]);
        Ok(Self::wrap(
            alphabet.clone(),
            Node::Const { lang: lang.minimize(), regex: Some(Arc::from(crate::relang::escape_char(c))), value },
        ))
    }

    /// The everywhere-undefined function.
    pub fn bottom(alphabet: &Alphabet) -> E<D> {
        Self::wrap(
            alphabet.clone(),
            Node::Const { lang: Dfa::empty(alphabet), regex: Some(Arc::from("[]")), value: D::zero() },
        )
    }

    fn same_alphabet(f: &E<D>, g: &E<D>) -> Result<Alphabet, ExprError> {
        if f.alphabet == g.alphabet {
            Ok(f.alphabet.clone())
        } else {
            Err(ExprError::Alphabet(format!("{:?} vs {:?}", f.alphabet, g.alphabet)))
        }
    }

    pub fn choice(f: E<D>, g: E<D>) -> Result<E<D>, ExprError> {
        let a = Self::same_alphabet(&f, &g)?;
        Ok(Self::wrap(a, Node::Choice(f, g)))
    }

    pub fn sum(f: E<D>, g: E<D>) -> Result<E<D>, ExprError> {
        let a = Self::same_alphabet(&f, &g)?;
        Ok(Self::wrap(a, Node::Sum(f, g)))
    }

    pub fn split(f: E<D>, g: E<D>, left: bool) -> Result<E<D>, ExprError> {
        let a = Self::same_alphabet(&f, &g)?;
        Ok(Self::wrap(a, Node::Split { f, g, left }))
    }

    pub fn iter(f: E<D>, left: bool) -> E<D> {
        let a = f.alphabet.clone();
        Self::wrap(a, Node::Iter { f, left })
    }

    pub fn chain(f: E<D>, lang: &Dfa, left: bool) -> Result<E<D>, ExprError> {
        Self::chain_with_regex(f, lang, None, left)
    }

    pub fn chain_regex(f: E<D>, regex: &str, left: bool) -> Result<E<D>, ExprError> {
        let lang = crate::relang::regex_dfa(regex, f.alphabet())?;
        Self::chain_with_regex(f, &lang, Some(Arc::from(regex)), left)
    }

    fn chain_with_regex(f: E<D>, lang: &Dfa, regex: Option<Arc<str>>, left: bool) -> Result<E<D>, ExprError> {
        if lang.alphabet() != f.alphabet() {
            return Err(ExprError::Alphabet("chained-sum language and function differ in alphabet".into()));
        }
        let a = f.alphabet.clone();
        Ok(Self::wrap(a, Node::Chain { f, lang: lang.minimize(), regex, left }))
    }

    pub fn reverse(f: E<D>) -> E<D> {
        let a = f.alphabet.clone();
        Self::wrap(a, Node::Reverse(f))
    }

    /// `g ∘ f`. Every symbol `f` can output must belong to `g`'s alphabet.
    pub fn compose(g: E<D>, f: E<Word>) -> Result<E<D>, ExprError> {
        for c in output_symbols(&f) {
            if !g.alphabet.contains(&c) {
                return Err(ExprError::ComposeOutput(c));
            }
        }
        let a = f.alphabet.clone();
        Ok(Self::wrap(a, Node::Compose { g, f }))
    }

    /// `f` restricted to `lang`: `f + Const(lang, 0)`.
    pub fn restrict(f: E<D>, lang: &Dfa) -> Result<E<D>, ExprError> {
        Self::sum(f, Self::constant(lang, D::zero()))
    }

    /// `f ⊕ Const(lang, 0)`: `f` on a prefix followed by a suffix in `lang`.
    pub fn left_shift(f: E<D>, lang: &Dfa) -> Result<E<D>, ExprError> {
        Self::split(f, Self::constant(lang, D::zero()), false)
    }

    /// `Const(lang, 0) ⊕ f`: a prefix in `lang` followed by `f` on the suffix.
    pub fn right_shift(lang: &Dfa, f: E<D>) -> Result<E<D>, ExprError> {
        Self::split(Self::constant(lang, D::zero()), f, false)
    }

    /// Left-nested choice over a nonempty list, built as a balanced tree.
    pub fn choice_all(items: Vec<E<D>>) -> Result<E<D>, ExprError> {
        balanced(items, &Self::choice)
    }

    /// Sum over a nonempty list, built as a balanced tree.
    pub fn sum_all(items: Vec<E<D>>) -> Result<E<D>, ExprError> {
        balanced(items, &Self::sum)
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(self: &E<D>) -> usize {
        let mut seen = std::collections::HashSet::new();
        count_nodes(self, &mut seen);
        seen.len()
    }
}

fn balanced<T: Clone>(mut items: Vec<T>, join: &dyn Fn(T, T) -> Result<T, ExprError>) -> Result<T, ExprError> {
    assert!(!items.is_empty(), "balanced join of an empty list");
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(join(a, b)?),
                None => next.push(a),
            }
        }
        items = next;
    }
    Ok(items.pop().unwrap())
}

fn count_nodes<D: Monoid>(e: &E<D>, seen: &mut std::collections::HashSet<usize>) {
    if !seen.insert(Arc::as_ptr(e) as usize) {
        return;
    }
    match &e.node {
        Node::Const { .. } => {}
        Node::Choice(f, g) | Node::Sum(f, g) | Node::Split { f, g, .. } => {
            count_nodes(f, seen);
            count_nodes(g, seen);
        }
        Node::Iter { f, .. } | Node::Chain { f, .. } | Node::Reverse(f) => count_nodes(f, seen),
        Node::Compose { g, f } => {
            count_nodes(g, seen);
            count_nodes(f, seen);
        }
    }
}

/// Symbols that can occur in the output of a string-valued expression.
pub fn output_symbols(e: &E<Word>) -> Vec<char> {
    fn go(e: &E<Word>, out: &mut Vec<char>, seen: &mut std::collections::HashSet<usize>) {
        if !seen.insert(Arc::as_ptr(e) as usize) {
            return;
        }
        match &e.node {
            Node::Const { value, lang, .. } => {
                if !lang.is_empty() {
                    out.extend(value.0.chars());
                }
            }
            Node::Choice(f, g) | Node::Sum(f, g) | Node::Split { f, g, .. } => {
                go(f, out, seen);
                go(g, out, seen);
            }
            Node::Iter { f, .. } | Node::Chain { f, .. } | Node::Reverse(f) => go(f, out, seen),
            Node::Compose { g, .. } => go(g, out, seen),
        }
    }
    let mut out = Vec::new();
    go(e, &mut out, &mut std::collections::HashSet::new());
    out.sort_unstable();
    out.dedup();
    out
}

/// Language-aware structural equality: constants and chained-sum languages
/// compare by language, everything else by shape.
impl<D: Monoid> PartialEq for FuncExpr<D> {
    fn eq(&self, other: &Self) -> bool {
        if self.alphabet != other.alphabet {
            return false;
        }
        match (&self.node, &other.node) {
            (Node::Const { lang: l1, value: v1, .. }, Node::Const { lang: l2, value: v2, .. }) => l1 == l2 && v1 == v2,
            (Node::Choice(a, b), Node::Choice(c, d)) | (Node::Sum(a, b), Node::Sum(c, d)) => a == c && b == d,
            (Node::Split { f: a, g: b, left: l1 }, Node::Split { f: c, g: d, left: l2 }) => {
                l1 == l2 && a == c && b == d
            }
            (Node::Iter { f: a, left: l1 }, Node::Iter { f: b, left: l2 }) => l1 == l2 && a == b,
            (Node::Chain { f: a, lang: la, left: l1, .. }, Node::Chain { f: b, lang: lb, left: l2, .. }) => {
                l1 == l2 && la == lb && a == b
            }
            (Node::Reverse(a), Node::Reverse(b)) => a == b,
            (Node::Compose { g: a, f: b }, Node::Compose { g: c, f: d }) => a == c && b == d,
            _ => false,
        }
    }
}

/// Rebuilds `e` over a larger input alphabet. Constants and chained-sum
/// languages keep their strings, so the function is undefined on every string
/// using a new symbol.
pub fn widen<D: Monoid>(e: &E<D>, alphabet: &Alphabet) -> Result<E<D>, ExprError> {
    let mut memo: HashMap<usize, E<D>> = HashMap::new();
    widen_rec(e, alphabet, &mut memo)
}

fn widen_rec<D: Monoid>(e: &E<D>, alphabet: &Alphabet, memo: &mut HashMap<usize, E<D>>) -> Result<E<D>, ExprError> {
    if !e.alphabet.is_subset(alphabet) {
        return Err(ExprError::Alphabet("widen needs a superset alphabet".into()));
    }
    let key = Arc::as_ptr(e) as usize;
    if let Some(v) = memo.get(&key) {
        return Ok(v.clone());
    }
    let node = match &e.node {
        Node::Const { lang, regex, value } => {
            Node::Const { lang: lang.widen(alphabet).minimize(), regex: regex.clone(), value: value.clone() }
        }
        Node::Choice(f, g) => Node::Choice(widen_rec(f, alphabet, memo)?, widen_rec(g, alphabet, memo)?),
        Node::Sum(f, g) => Node::Sum(widen_rec(f, alphabet, memo)?, widen_rec(g, alphabet, memo)?),
        Node::Split { f, g, left } => {
            Node::Split { f: widen_rec(f, alphabet, memo)?, g: widen_rec(g, alphabet, memo)?, left: *left }
        }
        Node::Iter { f, left } => Node::Iter { f: widen_rec(f, alphabet, memo)?, left: *left },
        Node::Chain { f, lang, regex, left } => Node::Chain {
            f: widen_rec(f, alphabet, memo)?,
            lang: lang.widen(alphabet).minimize(),
            regex: regex.clone(),
            left: *left,
        },
        Node::Reverse(f) => Node::Reverse(widen_rec(f, alphabet, memo)?),
        Node::Compose { g, f } => Node::Compose { g: g.clone(), f: widen(f, alphabet)? },
    };
    let out = FuncExpr::wrap(alphabet.clone(), node);
    memo.insert(key, out.clone());
    Ok(out)
}

/// Evaluates `e` on `sigma` by the definitions of the combinators.
/// `Ok(None)` is the undefined value.
pub fn eval_naive<D: Monoid>(e: &E<D>, sigma: &[char]) -> Result<Option<D>, ExprError> {
    if let Some(&c) = sigma.iter().find(|c| !e.alphabet.contains(c)) {
        return Err(ExprError::UnknownSymbol(c));
    }
    Ok(Naive::new(sigma).eval(e, 0, sigma.len()))
}

pub fn eval_naive_str<D: Monoid>(e: &E<D>, sigma: &str) -> Result<Option<D>, ExprError> {
    let w: Vec<char> = sigma.chars().collect();
    eval_naive(e, &w)
}

/// Memoized evaluation of every node on substrings of one input string.
struct Naive<'w, D: Monoid> {
    w: &'w [char],
    memo: HashMap<(usize, usize, usize), Option<D>>,
}

impl<'w, D: Monoid> Naive<'w, D> {
    fn new(w: &'w [char]) -> Self {
        Naive { w, memo: HashMap::new() }
    }

    fn defined(&mut self, e: &E<D>, i: usize, j: usize) -> bool {
        self.eval(e, i, j).is_some()
    }

    fn eval(&mut self, e: &E<D>, i: usize, j: usize) -> Option<D> {
        if let Node::Const { lang, value, .. } = &e.node {
            return lang.accepts(&self.w[i..j]).then(|| value.clone());
        }
        let key = (Arc::as_ptr(e) as usize, i, j);
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let v = self.eval_node(e, i, j);
        self.memo.insert(key, v.clone());
        v
    }

    fn eval_node(&mut self, e: &E<D>, i: usize, j: usize) -> Option<D> {
        match &e.node {
            Node::Const { .. } => unreachable!("constants are evaluated directly"),
            Node::Choice(f, g) => self.eval(f, i, j).or_else(|| self.eval(g, i, j)),
            Node::Sum(f, g) => {
                if matches!(g.node, Node::Const { .. }) && !self.defined(g, i, j) {
                    return None;
                }
                let a = self.eval(f, i, j)?;
                let b = self.eval(g, i, j)?;
                Some(a.plus(&b))
            }
            Node::Split { f, g, left } => {
                let mut found = None;
                for k in i..=j {
                    if self.defined(g, k, j) && self.defined(f, i, k) {
                        if found.is_some() {
                            return None;
                        }
                        found = Some(k);
                    }
                }
                let k = found?;
                let a = self.eval(f, i, k)?;
                let b = self.eval(g, k, j)?;
                Some(if *left { b.plus(&a) } else { a.plus(&b) })
            }
            Node::Iter { f, left } => {
                let cuts = self.unique_cuts(i, j, &mut |s: &mut Self, a, b| s.defined(f, a, b))?;
                let mut total = D::zero();
                for w in cuts.windows(2) {
                    let v = self.eval(f, w[0], w[1])?;
                    total = if *left { v.plus(&total) } else { total.plus(&v) };
                }
                Some(total)
            }
            Node::Chain { f, lang, left, .. } => {
                let cuts = self.unique_cuts(i, j, &mut |s: &mut Self, a, b| lang.accepts(&s.w[a..b]))?;
                if cuts.len() < 3 {
                    return None;
                }
                let mut total = D::zero();
                for w in cuts.windows(3) {
                    let v = self.eval(f, w[0], w[2])?;
                    total = if *left { v.plus(&total) } else { total.plus(&v) };
                }
                Some(total)
            }
            Node::Reverse(f) => {
                let rev: Vec<char> = self.w[i..j].iter().rev().copied().collect();
                Naive::new(&rev).eval(f, 0, rev.len())
            }
            Node::Compose { g, f } => {
                let mid = Naive::<Word>::new(&self.w[i..j]).eval(f, 0, j - i)?;
                let mid: Vec<char> = mid.chars();
                if mid.iter().any(|c| !g.alphabet.contains(c)) {
                    return None;
                }
                Naive::new(&mid).eval(g, 0, mid.len())
            }
        }
    }

    /// Boundaries `i = c₀ < c₁ < … < c_k = j` of the unique decomposition of
    /// `w[i..j]` into nonempty pieces accepted by `piece`, if it is unique.
    fn unique_cuts(
        &mut self,
        i: usize,
        j: usize,
        piece: &mut dyn FnMut(&mut Self, usize, usize) -> bool,
    ) -> Option<Vec<usize>> {
        // count[k - i]: decompositions of w[k..j], capped at 2.
        let n = j - i;
        let mut count = vec![0u8; n + 1];
        let mut next = vec![usize::MAX; n + 1];
        count[n] = 1;
        for k in (i..j).rev() {
            let mut c = 0u8;
            for m in k + 1..=j {
                if count[m - i] > 0 && piece(self, k, m) {
                    c = (c + count[m - i]).min(2);
                    next[k - i] = m;
                }
            }
            count[k - i] = c;
        }
        if count[0] != 1 {
            return None;
        }
        let mut cuts = vec![i];
        let mut k = i;
        while k < j {
            k = next[k - i];
            cuts.push(k);
        }
        Some(cuts)
    }
}

/// The language of strings on which `e` is defined.
pub fn domain_dfa<D: Monoid>(e: &E<D>) -> Result<Dfa, ExprError> {
    let mut memo: HashMap<usize, Dfa> = HashMap::new();
    domain_rec(e, &mut memo)
}

/// As [`domain_dfa`], sharing `cache` across calls. The cache is keyed by node
/// address, so every expression passed in must outlive it.
pub fn domain_dfa_cached<D: Monoid>(e: &E<D>, cache: &mut HashMap<usize, Dfa>) -> Result<Dfa, ExprError> {
    domain_rec(e, cache)
}

fn domain_rec<D: Monoid>(e: &E<D>, memo: &mut HashMap<usize, Dfa>) -> Result<Dfa, ExprError> {
    let key = Arc::as_ptr(e) as usize;
    if let Some(d) = memo.get(&key) {
        return Ok(d.clone());
    }
    let d = match &e.node {
        Node::Const { lang, .. } => lang.clone(),
        Node::Choice(f, g) => domain_rec(f, memo)?.union(&domain_rec(g, memo)?)?,
        Node::Sum(f, g) => domain_rec(f, memo)?.intersect(&domain_rec(g, memo)?)?,
        Node::Split { f, g, .. } => domain_rec(f, memo)?.unambiguous_concat(&domain_rec(g, memo)?)?,
        Node::Iter { f, .. } => domain_rec(f, memo)?.unambiguous_star(),
        Node::Chain { f, lang, .. } => chain_domain(&domain_rec(f, memo)?, lang)?,
        Node::Reverse(f) => domain_rec(f, memo)?.reverse(),
        Node::Compose { g, f } => crate::compile::compose_domain(&domain_dfa(g)?, f)?,
    }
    .minimize();
    memo.insert(key, d.clone());
    Ok(d)
}

/// Domain of a chained sum with pair function domain `df` and piece language `lang`.
pub fn chain_domain(df: &Dfa, lang: &Dfa) -> Result<Dfa, ExprError> {
    const NONE: u32 = u32::MAX;
    // (piece state, pair-domain state since the previous piece began, domain
    // state since the current piece began, current piece nonempty)
    type T = (u32, u32, u32, bool);
    let alphabet = lang.alphabet().clone();
    if df.alphabet() != &alphabet {
        return Err(ExprError::Alphabet("chained-sum language and function differ in alphabet".into()));
    }
    let init: Vec<T> = vec![(lang.start(), NONE, df.start(), false)];
    let guessed = explore(
        &alphabet,
        init,
        |set, a| {
            let mut out: Vec<T> = Vec::new();
            for &(ql, dp, dc, ne) in set {
                let dp2 = if dp == NONE { NONE } else { df.next(dp, a) };
                out.push((lang.next(ql, a), dp2, df.next(dc, a), true));
                if ne && lang.is_accepting(ql) && (dp == NONE || df.is_accepting(dp)) {
                    out.push((lang.next(lang.start(), a), df.next(dc, a), df.next(df.start(), a), true));
                }
            }
            out.sort_unstable();
            out.dedup();
            out
        },
        |set| set.iter().any(|&(ql, dp, _, ne)| ne && lang.is_accepting(ql) && dp != NONE && df.is_accepting(dp)),
    );
    let unique = lang.unambiguous_star();
    let multi = unique.difference(lang)?.difference(&Dfa::epsilon(&alphabet))?;
    Ok(guessed.intersect(&multi)?)
}

/// Marker symbol used by the chained-sum composition pipeline.
pub const MARKER: char = '@';

/// The identity on strings over `symbols`, as an expression over `alphabet`.
pub fn identity_on(alphabet: &Alphabet, symbols: &[char]) -> Result<E<Word>, ExprError> {
    let letters: Vec<E<Word>> =
        symbols.iter().map(|&c| FuncExpr::letter(alphabet, c, Word::new(c.to_string()))).collect::<Result<_, _>>()?;
    if letters.is_empty() {
        return Ok(FuncExpr::constant(&Dfa::epsilon(alphabet), Word::zero()));
    }
    Ok(FuncExpr::iter(FuncExpr::choice_all(letters)?, false))
}

/// Expresses a chained sum (left-chained when `left`) as a composition
/// pipeline: pieces are copied with a marker after each copy, the outer copies
/// are dropped, at least one pair is required, and `f` runs on every pair.
pub fn chained_via_composition<D: Monoid>(f: &E<D>, lang: &Dfa, left: bool) -> Result<E<D>, ExprError> {
    chained_via_marker(f, lang, left, MARKER)
}

/// As [`chained_via_composition`] with a caller-chosen marker symbol.
pub fn chained_via_marker<D: Monoid>(f: &E<D>, lang: &Dfa, left: bool, marker: char) -> Result<E<D>, ExprError> {
    let sigma = f.alphabet().clone();
    if sigma.contains(&marker) {
        return Err(ExprError::Unsupported(format!("input alphabet already contains the marker {marker:?}")));
    }
    let ext = Alphabet::new(sigma.symbols().iter().copied().chain([marker]));
    let base: Vec<char> = sigma.symbols().to_vec();

    // copy: σ ↦ σ@σ@ on σ ∈ lang
    let id = identity_on(&sigma, &base)?;
    let at = FuncExpr::constant(&Dfa::epsilon(&sigma), Word::new(marker.to_string()));
    let half = FuncExpr::split(FuncExpr::restrict(id, lang)?, at, false)?;
    let copy = FuncExpr::iter(FuncExpr::sum(half.clone(), half)?, false);

    // drop: remove the first and the last copy, merging neighbours into pairs
    let id_ext = identity_on(&ext, &base)?;
    let lang_at = lang.widen(&ext).concat(&Dfa::word(&ext, &[marker]))?;
    let skip = FuncExpr::constant(&lang_at, Word::zero());
    let drop_marker = FuncExpr::letter(&ext, marker, Word::zero())?;
    let keep_marker = FuncExpr::letter(&ext, marker, Word::new(marker.to_string()))?;
    let pair = FuncExpr::split(
        id_ext.clone(),
        FuncExpr::split(drop_marker.clone(), FuncExpr::split(id_ext.clone(), keep_marker, false)?, false)?,
        false,
    )?;
    let drop = FuncExpr::split(skip.clone(), FuncExpr::split(FuncExpr::iter(pair, false), skip, false)?, false)?;

    // ensurelen: identity on nonempty strings
    let all: Vec<char> = ext.symbols().to_vec();
    let ensure = FuncExpr::sum(identity_on(&ext, &all)?, FuncExpr::constant(&Dfa::nonempty(&ext), Word::zero()))?;

    // final stage: f on each marker-terminated pair
    let f_ext = widen(f, &ext)?;
    let marker_zero = FuncExpr::letter(&ext, marker, D::zero())?;
    let last = FuncExpr::iter(FuncExpr::split(f_ext, marker_zero, false)?, left);

    let inner = FuncExpr::compose(drop, copy)?;
    let inner = FuncExpr::compose(ensure, inner)?;
    FuncExpr::compose(last, inner)
}

pub mod library {
    //! Expressions for a handful of well-known functions.

    use super::*;
    use crate::monoid::Additive;
    use num_bigint::BigInt;

    type Int = Additive<BigInt>;

    fn int(n: i64) -> Int {
        Additive(BigInt::from(n))
    }

    fn w(s: &str) -> Word {
        Word::new(s)
    }

    fn alph(s: &str) -> Alphabet {
        Alphabet::from_symbols(s)
    }

    /// Identity over `alphabet`.
    pub fn id(alphabet: &str) -> E<Word> {
        let a = alph(alphabet);
        identity_on(&a, a.symbols()).expect("identity")
    }

    /// `σ ↦ σσ` over {a, b}.
    pub fn copy() -> E<Word> {
        FuncExpr::sum(id("ab"), id("ab")).unwrap()
    }

    /// String reversal over {a, b}.
    pub fn reverse() -> E<Word> {
        let a = alph("ab");
        let f =
            FuncExpr::choice(FuncExpr::letter(&a, 'a', w("a")).unwrap(), FuncExpr::letter(&a, 'b', w("b")).unwrap())
                .unwrap();
        FuncExpr::iter(f, true)
    }

    /// Number of `a`s over {a, b}.
    pub fn count_a() -> E<Int> {
        let a = alph("ab");
        let f =
            FuncExpr::choice(FuncExpr::letter(&a, 'a', int(1)).unwrap(), FuncExpr::letter(&a, 'b', int(0)).unwrap())
                .unwrap();
        FuncExpr::iter(f, false)
    }

    /// 1 on `lang`, 0 elsewhere.
    pub fn indicator(alphabet: &str, lang: &str) -> E<Int> {
        let a = alph(alphabet);
        FuncExpr::choice(
            FuncExpr::constant_regex(&a, lang, int(1)).unwrap(),
            FuncExpr::constant_regex(&a, ".*", int(0)).unwrap(),
        )
        .unwrap()
    }

    /// Monthly coffee bill over {C, S, #}: 2 per cup, or 1 per cup in a month
    /// with a survey; months are separated by `#`.
    pub fn coffee() -> E<Int> {
        let a = alph("CS#");
        let c = |n| FuncExpr::letter(&a, 'C', int(n)).unwrap();
        let s0 = FuncExpr::letter(&a, 'S', int(0)).unwrap();
        let plain = FuncExpr::iter(c(2), false);
        let tail = FuncExpr::iter(FuncExpr::choice(c(1), s0.clone()).unwrap(), false);
        let survey =
            FuncExpr::split(FuncExpr::iter(c(1), false), FuncExpr::split(s0, tail, false).unwrap(), false).unwrap();
        let month = FuncExpr::choice(plain, survey).unwrap();
        let sep = FuncExpr::letter(&a, '#', int(0)).unwrap();
        let months = FuncExpr::iter(FuncExpr::split(month.clone(), sep, false).unwrap(), false);
        FuncExpr::split(months, month, false).unwrap()
    }

    /// `σ#τ ↦ τ#σ` for σ, τ over {a, b}.
    pub fn swap() -> E<Word> {
        let a = alph("ab#");
        let echo = identity_on(&a, &['a', 'b']).unwrap();
        let skip_first = FuncExpr::constant_regex(&a, "[ab]*#", w("")).unwrap();
        let skip_last = FuncExpr::constant_regex(&a, "#[ab]*", w("")).unwrap();
        let hash = FuncExpr::constant_regex(&a, ".*", w("#")).unwrap();
        let second = FuncExpr::split(skip_first, echo.clone(), false).unwrap();
        let first = FuncExpr::split(echo, skip_last, false).unwrap();
        FuncExpr::sum(second, FuncExpr::sum(hash, first).unwrap()).unwrap()
    }

    /// Drops the last `#`-separated field over {a, b, #}.
    pub fn strip() -> E<Word> {
        let a = alph("ab#");
        let skip_last = FuncExpr::constant_regex(&a, "#[ab]*", w("")).unwrap();
        FuncExpr::split(id("ab#"), skip_last, false).unwrap()
    }

    /// On a pair `aⁱb aʲb` outputs `aʲbⁱ`.
    pub fn shuffle_pair() -> E<Word> {
        let a = alph("ab");
        let b_eps = FuncExpr::letter(&a, 'b', w("")).unwrap();
        let as_b = FuncExpr::iter(FuncExpr::letter(&a, 'a', w("b")).unwrap(), false);
        let as_a = FuncExpr::iter(FuncExpr::letter(&a, 'a', w("a")).unwrap(), false);
        let first = FuncExpr::split(as_b, b_eps.clone(), false).unwrap();
        let second = FuncExpr::split(as_a, b_eps, false).unwrap();
        FuncExpr::split(first, second, true).unwrap()
    }

    /// `a^{m₁}b…a^{m_k}b ↦ a^{m₂}b^{m₁}…a^{m_k}b^{m_{k-1}}` for k ≥ 2.
    pub fn shuffle() -> E<Word> {
        FuncExpr::chain_regex(shuffle_pair(), "a*b", false).unwrap()
    }

    /// The same function as [`shuffle`], through the composition pipeline.
    pub fn shuffle_composed() -> E<Word> {
        let lang = crate::relang::regex_dfa("a*b", &alph("ab")).unwrap();
        chained_via_composition(&shuffle_pair(), &lang, false).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::library::*;
    use super::*;
    use crate::monoid::Additive;
    use num_bigint::BigInt;

    fn int(n: i64) -> Option<Additive<BigInt>> {
        Some(Additive(BigInt::from(n)))
    }

    fn word(s: &str) -> Option<Word> {
        Some(Word::new(s))
    }

    #[test]
    fn worked_examples() {
        assert_eq!(eval_naive_str(&count_a(), "abab").unwrap(), int(2));
        assert_eq!(eval_naive_str(&copy(), "ab").unwrap(), word("abab"));
        assert_eq!(eval_naive_str(&reverse(), "ab").unwrap(), word("ba"));
        assert_eq!(eval_naive_str(&swap(), "ab#b").unwrap(), word("b#ab"));
        assert_eq!(eval_naive_str(&strip(), "ab#a").unwrap(), word("ab"));
        assert_eq!(eval_naive_str(&shuffle(), "abab").unwrap(), word("ab"));
        assert_eq!(eval_naive_str(&coffee(), "CCSC#C").unwrap(), int(5));
        assert_eq!(eval_naive_str(&coffee(), "").unwrap(), int(0));
    }

    #[test]
    fn ambiguous_split_is_undefined() {
        let a = Alphabet::from_symbols("a");
        let f = FuncExpr::iter(FuncExpr::letter(&a, 'a', word("a").unwrap()).unwrap(), false);
        let e = FuncExpr::split(f.clone(), f, false).unwrap();
        assert_eq!(eval_naive_str(&e, "a").unwrap(), None);
    }

    #[test]
    fn iter_of_empty_string_is_zero() {
        let a = Alphabet::from_symbols("ab");
        let e = FuncExpr::iter(FuncExpr::<Word>::bottom(&a), false);
        assert_eq!(eval_naive_str(&e, "").unwrap(), word(""));
    }

    #[test]
    fn unknown_symbol_is_an_error() {
        assert_eq!(eval_naive_str(&count_a(), "abc"), Err(ExprError::UnknownSymbol('c')));
    }

    #[test]
    fn composition_output_alphabet_is_checked() {
        let inner = id("ab");
        let outer = FuncExpr::<Word>::bottom(&Alphabet::from_symbols("a"));
        assert_eq!(FuncExpr::compose(outer, inner).unwrap_err(), ExprError::ComposeOutput('b'));
    }

    #[test]
    fn domain_examples() {
        let a = Alphabet::from_symbols("ab");
        let c = FuncExpr::constant_regex(&a, "a*", int(7).unwrap()).unwrap();
        let expected = crate::relang::regex_dfa("a*", &a).unwrap();
        assert!(domain_dfa(&c).unwrap().equivalent(&expected).unwrap());
        let s = FuncExpr::sum(
            FuncExpr::letter(&a, 'a', int(1).unwrap()).unwrap(),
            FuncExpr::letter(&a, 'b', int(1).unwrap()).unwrap(),
        )
        .unwrap();
        assert!(domain_dfa(&s).unwrap().is_empty());
    }

    #[test]
    fn shuffle_domain() {
        let d = domain_dfa(&shuffle()).unwrap();
        let expected = crate::relang::regex_dfa("a*ba*b(a*b)*", &Alphabet::from_symbols("ab")).unwrap();
        assert!(d.equivalent(&expected).unwrap());
    }

    #[test]
    fn equality_compares_languages() {
        let a = Alphabet::from_symbols("ab");
        let x = FuncExpr::constant_regex(&a, "(a|b)*a", word("x").unwrap()).unwrap();
        let y = FuncExpr::constant_regex(&a, "(b*a)+", word("x").unwrap()).unwrap();
        assert_eq!(x, y);
    }
}
