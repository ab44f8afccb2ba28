//! Regular-language toolkit: DFAs, NFAs, regexes, split-counting automata
//! and state elimination.
//!
//! Every DFA is total. Automata are immutable once built; constructions go
//! through [`explore`], which enumerates the reachable part of an implicitly
//! given deterministic automaton.

use std::collections::{HashMap, VecDeque};
use std::fmt::{self, Debug, Write as _};
use std::hash::Hash;
use std::sync::Arc;

use thiserror::Error;

/// Letters of automata and regexes.
pub trait Symbol: Clone + Eq + Ord + Hash + Debug + Send + Sync + 'static {}

impl<T: Clone + Eq + Ord + Hash + Debug + Send + Sync + 'static> Symbol for T {}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelangError {
    #[error("alphabet mismatch")]
    AlphabetMismatch,
    #[error("regex syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

/// A finite, sorted, duplicate-free alphabet. Cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Alphabet<S: Symbol = char>(Arc<Vec<S>>);

impl<S: Symbol> Alphabet<S> {
    pub fn new(symbols: impl IntoIterator<Item = S>) -> Self {
        let mut v: Vec<S> = symbols.into_iter().collect();
        v.sort();
        v.dedup();
        Alphabet(Arc::new(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index(&self, s: &S) -> Option<usize> {
        self.0.binary_search(s).ok()
    }

    pub fn symbol(&self, i: usize) -> &S {
        &self.0[i]
    }

    pub fn symbols(&self) -> &[S] {
        &self.0
    }

    pub fn contains(&self, s: &S) -> bool {
        self.index(s).is_some()
    }

    pub fn union(&self, other: &Self) -> Self {
        Alphabet::new(self.0.iter().chain(other.0.iter()).cloned())
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.0.iter().all(|s| other.contains(s))
    }
}

impl<S: Symbol> Debug for Alphabet<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

impl Alphabet<char> {
    pub fn from_symbols(s: &str) -> Self {
        Alphabet::new(s.chars())
    }

    /// All strings over the alphabet of length at most `max_len`, shortest first.
    pub fn strings_up_to(&self, max_len: usize) -> Vec<Vec<char>> {
        let mut out = vec![Vec::new()];
        let mut layer = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::with_capacity(layer.len() * self.len());
            for w in &layer {
                for &c in self.symbols() {
                    let mut w2 = w.clone();
                    w2.push(c);
                    next.push(w2);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }
}

/// Deterministic, total finite automaton. States are `0..num_states()`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dfa<S: Symbol = char> {
    alphabet: Alphabet<S>,
    trans: Vec<u32>,
    accept: Vec<bool>,
    start: u32,
}

/// Enumerates the reachable part of a deterministic automaton whose states are
/// values of type `K`. `step(k, i)` gives the successor on the `i`-th symbol.
pub fn explore<S, K, F, A>(alphabet: &Alphabet<S>, init: K, step: F, accept: A) -> Dfa<S>
where
    S: Symbol,
    K: Clone + Eq + Hash,
    F: FnMut(&K, usize) -> K,
    A: FnMut(&K) -> bool,
{
    explore_with_keys(alphabet, init, step, accept).0
}

/// As [`explore`], also returning the key of every state.
pub fn explore_with_keys<S, K, F, A>(alphabet: &Alphabet<S>, init: K, mut step: F, mut accept: A) -> (Dfa<S>, Vec<K>)
where
    S: Symbol,
    K: Clone + Eq + Hash,
    F: FnMut(&K, usize) -> K,
    A: FnMut(&K) -> bool,
{
    let k = alphabet.len();
    let mut index: HashMap<K, u32> = HashMap::new();
    let mut keys: Vec<K> = Vec::new();
    let mut trans: Vec<u32> = Vec::new();
    let mut acc = Vec::new();
    index.insert(init.clone(), 0);
    keys.push(init);
    let mut i = 0;
    while i < keys.len() {
        let key = keys[i].clone();
        acc.push(accept(&key));
        for a in 0..k {
            let next = step(&key, a);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = keys.len() as u32;
                    index.insert(next.clone(), id);
                    keys.push(next);
                    id
                }
            };
            trans.push(id);
        }
        i += 1;
    }
    (Dfa { alphabet: alphabet.clone(), trans, accept: acc, start: 0 }, keys)
}

impl<S: Symbol> Dfa<S> {
    /// Builds a DFA from a row-major transition table (`trans[q * |Σ| + a]`).
    pub fn from_parts(alphabet: Alphabet<S>, trans: Vec<u32>, accept: Vec<bool>, start: u32) -> Self {
        assert_eq!(trans.len(), accept.len() * alphabet.len());
        assert!((start as usize) < accept.len());
        assert!(trans.iter().all(|&t| (t as usize) < accept.len()));
        Dfa { alphabet, trans, accept, start }
    }

    pub fn alphabet(&self) -> &Alphabet<S> {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.accept.len()
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn is_accepting(&self, q: u32) -> bool {
        self.accept[q as usize]
    }

    /// Successor of `q` on the symbol with index `a`.
    pub fn next(&self, q: u32, a: usize) -> u32 {
        self.trans[q as usize * self.alphabet.len() + a]
    }

    pub fn step(&self, q: u32, s: &S) -> Option<u32> {
        self.alphabet.index(s).map(|a| self.next(q, a))
    }

    pub fn run_from(&self, q: u32, word: &[S]) -> Option<u32> {
        word.iter().try_fold(q, |q, s| self.step(q, s))
    }

    pub fn accepts(&self, word: &[S]) -> bool {
        self.run_from(self.start, word).is_some_and(|q| self.is_accepting(q))
    }

    pub fn empty(alphabet: &Alphabet<S>) -> Self {
        explore(alphabet, (), |_, _| (), |_| false)
    }

    pub fn universal(alphabet: &Alphabet<S>) -> Self {
        explore(alphabet, (), |_, _| (), |_| true)
    }

    /// The language `{ε}`.
    pub fn epsilon(alphabet: &Alphabet<S>) -> Self {
        Self::word(alphabet, &[])
    }

    /// The language containing exactly `w`.
    pub fn word(alphabet: &Alphabet<S>, w: &[S]) -> Self {
        let idx: Vec<Option<usize>> = w.iter().map(|s| alphabet.index(s)).collect();
        let n = w.len();
        explore(
            alphabet,
            Some(0usize),
            |k, a| match *k {
                Some(i) if i < n && idx[i] == Some(a) => Some(i + 1),
                _ => None,
            },
            |k| *k == Some(n),
        )
    }

    /// The language of one-letter strings whose letter satisfies `pred`.
    pub fn letters(alphabet: &Alphabet<S>, pred: impl Fn(&S) -> bool) -> Self {
        let ok: Vec<bool> = alphabet.symbols().iter().map(pred).collect();
        explore(alphabet, 0u8, |k, a| if *k == 0 && ok[a] { 1 } else { 2 }, |k| *k == 1)
    }

    /// All nonempty strings.
    pub fn nonempty(alphabet: &Alphabet<S>) -> Self {
        explore(alphabet, false, |_, _| true, |k| *k)
    }

    fn check_alphabet(&self, other: &Self) -> Result<(), RelangError> {
        if self.alphabet == other.alphabet {
            Ok(())
        } else {
            Err(RelangError::AlphabetMismatch)
        }
    }

    pub fn complement(&self) -> Self {
        let mut d = self.clone();
        for a in d.accept.iter_mut() {
            *a = !*a;
        }
        d
    }

    /// Product automaton accepting where `op(left, right)` holds.
    pub fn product(&self, other: &Self, op: impl Fn(bool, bool) -> bool) -> Result<Self, RelangError> {
        self.check_alphabet(other)?;
        Ok(explore(
            &self.alphabet,
            (self.start, other.start),
            |&(p, q), a| (self.next(p, a), other.next(q, a)),
            |&(p, q)| op(self.is_accepting(p), other.is_accepting(q)),
        ))
    }

    pub fn intersect(&self, other: &Self) -> Result<Self, RelangError> {
        self.product(other, |a, b| a && b)
    }

    pub fn union(&self, other: &Self) -> Result<Self, RelangError> {
        self.product(other, |a, b| a || b)
    }

    pub fn difference(&self, other: &Self) -> Result<Self, RelangError> {
        self.product(other, |a, b| a && !b)
    }

    /// Predecessor lists: `inv[q * |Σ| + a]` are the states moving to `q` on `a`.
    fn inverse(&self) -> Vec<Vec<u32>> {
        let k = self.alphabet.len();
        let mut inv = vec![Vec::new(); self.num_states() * k];
        for p in 0..self.num_states() {
            for a in 0..k {
                let q = self.next(p as u32, a) as usize;
                inv[q * k + a].push(p as u32);
            }
        }
        inv
    }

    /// The reversed language, determinized by the subset construction.
    pub fn reverse(&self) -> Self {
        let k = self.alphabet.len();
        let inv = self.inverse();
        let init: Vec<u32> = (0..self.num_states() as u32).filter(|&q| self.is_accepting(q)).collect();
        explore(
            &self.alphabet,
            init,
            |set, a| {
                let mut out: Vec<u32> = set.iter().flat_map(|&q| inv[q as usize * k + a].iter().copied()).collect();
                out.sort_unstable();
                out.dedup();
                out
            },
            |set| set.binary_search(&self.start).is_ok(),
        )
    }

    /// Concatenation `L1·L2` with split counts capped at `cap`; accepts when the
    /// number of splits is at least one (`cap == 1`) or exactly one (`cap == 2`).
    fn concat_counting(&self, other: &Self, cap: u8) -> Result<Self, RelangError> {
        self.check_alphabet(other)?;
        let m = other.num_states();
        let mut init = vec![0u8; m];
        if self.is_accepting(self.start) {
            init[other.start as usize] = 1;
        }
        let accept_exact = cap == 2;
        Ok(explore(
            &self.alphabet,
            (self.start, init),
            |(p, counts), a| {
                let p2 = self.next(*p, a);
                let mut next = vec![0u8; m];
                for (q, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        let q2 = other.next(q as u32, a) as usize;
                        next[q2] = (next[q2] + c).min(cap);
                    }
                }
                if self.is_accepting(p2) {
                    let s = other.start as usize;
                    next[s] = (next[s] + 1).min(cap);
                }
                (p2, next)
            },
            |(_, counts)| {
                let total = counts
                    .iter()
                    .enumerate()
                    .filter(|&(q, _)| other.is_accepting(q as u32))
                    .fold(0u8, |acc, (_, &c)| (acc + c).min(cap));
                if accept_exact {
                    total == 1
                } else {
                    total >= 1
                }
            },
        ))
    }

    /// Iteration into nonempty pieces with decomposition counts capped at `cap`.
    fn star_counting(&self, cap: u8) -> Self {
        let m = self.num_states();
        let accept_exact = cap == 2;
        let complete = |counts: &Vec<u8>, at_start: bool| -> u8 {
            if at_start {
                1
            } else {
                counts
                    .iter()
                    .enumerate()
                    .filter(|&(q, _)| self.is_accepting(q as u32))
                    .fold(0u8, |acc, (_, &c)| (acc + c).min(cap))
            }
        };
        explore(
            &self.alphabet,
            (vec![0u8; m], true),
            |(counts, at_start), a| {
                let closed = complete(counts, *at_start);
                let mut next = vec![0u8; m];
                for (q, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        let q2 = self.next(q as u32, a) as usize;
                        next[q2] = (next[q2] + c).min(cap);
                    }
                }
                if closed > 0 {
                    let q2 = self.next(self.start, a) as usize;
                    next[q2] = (next[q2] + closed).min(cap);
                }
                (next, false)
            },
            |(counts, at_start)| {
                let c = complete(counts, *at_start);
                if accept_exact {
                    c == 1
                } else {
                    c >= 1
                }
            },
        )
    }

    /// Plain concatenation `L1·L2`.
    pub fn concat(&self, other: &Self) -> Result<Self, RelangError> {
        self.concat_counting(other, 1)
    }

    /// Kleene star `L*`.
    pub fn star(&self) -> Self {
        self.star_counting(1)
    }

    /// Strings with exactly one split `σ₁σ₂` with `σ₁ ∈ self`, `σ₂ ∈ other`.
    pub fn unambiguous_concat(&self, other: &Self) -> Result<Self, RelangError> {
        self.concat_counting(other, 2)
    }

    /// `ε` plus the nonempty strings with exactly one decomposition into
    /// nonempty pieces of `self`.
    pub fn unambiguous_star(&self) -> Self {
        self.star_counting(2)
    }

    /// States reachable from the start, renumbered in breadth-first order.
    pub fn trim(&self) -> Self {
        explore(&self.alphabet, self.start, |&q, a| self.next(q, a), |&q| self.is_accepting(q))
    }

    /// The minimal DFA, states numbered in breadth-first order from the start.
    /// Two DFAs recognize the same language iff their minimizations are equal.
    pub fn minimize(&self) -> Self {
        let d = self.trim();
        let n = d.num_states();
        let k = d.alphabet.len();
        let mut class: Vec<u32> = d.accept.iter().map(|&b| b as u32).collect();
        let mut count = {
            let mut c = class.clone();
            c.sort_unstable();
            c.dedup();
            c.len()
        };
        loop {
            let mut sig_index: HashMap<Vec<u32>, u32> = HashMap::new();
            let mut next_class = vec![0u32; n];
            for q in 0..n {
                let mut sig = Vec::with_capacity(k + 1);
                sig.push(class[q]);
                for a in 0..k {
                    sig.push(class[d.next(q as u32, a) as usize]);
                }
                let len = sig_index.len() as u32;
                next_class[q] = *sig_index.entry(sig).or_insert(len);
            }
            let new_count = sig_index.len();
            class = next_class;
            if new_count == count {
                break;
            }
            count = new_count;
        }
        let mut rep = vec![0u32; count];
        for q in (0..n).rev() {
            rep[class[q] as usize] = q as u32;
        }
        explore(
            &d.alphabet,
            class[d.start as usize],
            |&c, a| class[d.next(rep[c as usize], a) as usize],
            |&c| d.is_accepting(rep[c as usize]),
        )
    }

    pub fn is_empty(&self) -> bool {
        let t = self.trim();
        !t.accept.iter().any(|&b| b)
    }

    /// Language equality.
    pub fn equivalent(&self, other: &Self) -> Result<bool, RelangError> {
        Ok(self.product(other, |a, b| a != b)?.is_empty())
    }

    /// Same language over a larger alphabet; new symbols lead to a rejecting sink.
    pub fn widen(&self, alphabet: &Alphabet<S>) -> Self {
        assert!(self.alphabet.is_subset(alphabet), "widen needs a superset alphabet");
        let map: Vec<Option<usize>> = alphabet.symbols().iter().map(|s| self.alphabet.index(s)).collect();
        explore(
            alphabet,
            Some(self.start),
            |q, a| match (q, map[a]) {
                (Some(q), Some(b)) => Some(self.next(*q, b)),
                _ => None,
            },
            |q| q.is_some_and(|q| self.is_accepting(q)),
        )
    }

    pub fn to_nfa(&self) -> Nfa<S> {
        let k = self.alphabet.len();
        let mut edges = Vec::new();
        for q in 0..self.num_states() {
            for a in 0..k {
                edges.push((q as u32, a as u32, self.next(q as u32, a)));
            }
        }
        Nfa::from_edges(self.alphabet.clone(), self.num_states(), edges, vec![self.start], self.accept.clone())
    }

    /// Graphviz rendering of the transition graph.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph {name} {{\n  rankdir=LR;\n  init [shape=point];\n");
        for q in 0..self.num_states() {
            let shape = if self.accept[q] { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  q{q} [shape={shape}];");
        }
        let _ = writeln!(out, "  init -> q{};", self.start);
        let k = self.alphabet.len();
        for q in 0..self.num_states() {
            let mut by_target: Vec<(u32, Vec<String>)> = Vec::new();
            for a in 0..k {
                let t = self.next(q as u32, a);
                let label = format!("{:?}", self.alphabet.symbol(a));
                match by_target.iter_mut().find(|(x, _)| *x == t) {
                    Some((_, v)) => v.push(label),
                    None => by_target.push((t, vec![label])),
                }
            }
            for (t, labels) in by_target {
                let _ = writeln!(out, "  q{q} -> q{t} [label={:?}];", labels.join(","));
            }
        }
        out.push_str("}\n");
        out
    }
}

impl<S: Symbol> Debug for Dfa<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dfa({} states over {:?})", self.num_states(), self.alphabet)
    }
}

/// Boolean operations and reversal, dispatched by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DfaOp {
    Intersect,
    Union,
    Complement,
    Reverse,
}

/// Applies `op` to the arguments. Binary operations fold left over all arguments.
pub fn dfa_algebra<S: Symbol>(op: DfaOp, args: &[&Dfa<S>]) -> Result<Dfa<S>, RelangError> {
    let (first, rest) = args.split_first().ok_or(RelangError::AlphabetMismatch)?;
    match op {
        DfaOp::Complement => Ok(first.complement()),
        DfaOp::Reverse => Ok(first.reverse()),
        DfaOp::Intersect => rest.iter().try_fold((*first).clone(), |acc, d| acc.intersect(d)),
        DfaOp::Union => rest.iter().try_fold((*first).clone(), |acc, d| acc.union(d)),
    }
}

/// Strings with exactly one split into a prefix in `l1` and a suffix in `l2`.
pub fn unambiguous_concat_dfa<S: Symbol>(l1: &Dfa<S>, l2: &Dfa<S>) -> Result<Dfa<S>, RelangError> {
    l1.unambiguous_concat(l2)
}

/// `ε` plus the strings with exactly one decomposition into nonempty pieces of `l`.
pub fn unambiguous_star_dfa<S: Symbol>(l: &Dfa<S>) -> Dfa<S> {
    l.unambiguous_star()
}

pub fn determinize<S: Symbol>(n: &Nfa<S>) -> Dfa<S> {
    n.determinize()
}

pub fn nfa_is_unambiguous<S: Symbol>(n: &Nfa<S>) -> bool {
    n.is_unambiguous()
}

/// Nondeterministic automaton without ε-moves. Edges form a multiset, so two
/// parallel edges with the same letter count as two distinct paths.
#[derive(Clone)]
pub struct Nfa<S: Symbol = char> {
    alphabet: Alphabet<S>,
    num_states: usize,
    /// `(from, symbol index, to)`.
    edges: Vec<(u32, u32, u32)>,
    out: Vec<Vec<u32>>,
    starts: Vec<u32>,
    accept: Vec<bool>,
}

impl<S: Symbol> Nfa<S> {
    pub fn from_edges(
        alphabet: Alphabet<S>,
        num_states: usize,
        edges: Vec<(u32, u32, u32)>,
        starts: Vec<u32>,
        accept: Vec<bool>,
    ) -> Self {
        assert_eq!(accept.len(), num_states);
        let mut out = vec![Vec::new(); num_states];
        for (i, &(p, a, q)) in edges.iter().enumerate() {
            assert!((a as usize) < alphabet.len() && (q as usize) < num_states);
            out[p as usize].push(i as u32);
        }
        Nfa { alphabet, num_states, edges, out, starts, accept }
    }

    /// Builds from edges labelled with symbols; symbols outside the alphabet are rejected.
    pub fn new(
        alphabet: Alphabet<S>,
        num_states: usize,
        edges: &[(u32, S, u32)],
        starts: Vec<u32>,
        accepting: &[u32],
    ) -> Result<Self, RelangError> {
        let mut es = Vec::with_capacity(edges.len());
        for (p, s, q) in edges {
            let a = alphabet.index(s).ok_or(RelangError::AlphabetMismatch)?;
            es.push((*p, a as u32, *q));
        }
        let mut accept = vec![false; num_states];
        for &q in accepting {
            accept[q as usize] = true;
        }
        Ok(Self::from_edges(alphabet, num_states, es, starts, accept))
    }

    pub fn alphabet(&self) -> &Alphabet<S> {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn starts(&self) -> &[u32] {
        &self.starts
    }

    pub fn is_accepting(&self, q: u32) -> bool {
        self.accept[q as usize]
    }

    /// Edges as `(from, symbol, to)`.
    pub fn edges(&self) -> impl Iterator<Item = (u32, &S, u32)> + '_ {
        self.edges.iter().map(|&(p, a, q)| (p, self.alphabet.symbol(a as usize), q))
    }

    fn successors(&self, set: &[u32], a: usize) -> Vec<u32> {
        let mut out: Vec<u32> = set
            .iter()
            .flat_map(|&p| self.out[p as usize].iter())
            .map(|&e| self.edges[e as usize])
            .filter(|&(_, b, _)| b as usize == a)
            .map(|(_, _, q)| q)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn accepts(&self, word: &[S]) -> bool {
        let mut set: Vec<u32> = self.starts.clone();
        set.sort_unstable();
        set.dedup();
        for s in word {
            match self.alphabet.index(s) {
                Some(a) => set = self.successors(&set, a),
                None => return false,
            }
        }
        set.iter().any(|&q| self.is_accepting(q))
    }

    /// Number of accepting paths on `word`, saturating.
    pub fn count_paths(&self, word: &[S]) -> u64 {
        let mut counts = vec![0u64; self.num_states];
        for &s in &self.starts {
            counts[s as usize] += 1;
        }
        for s in word {
            let Some(a) = self.alphabet.index(s) else { return 0 };
            let mut next = vec![0u64; self.num_states];
            for &(p, b, q) in &self.edges {
                if b as usize == a {
                    next[q as usize] = next[q as usize].saturating_add(counts[p as usize]);
                }
            }
            counts = next;
        }
        (0..self.num_states).filter(|&q| self.accept[q]).fold(0u64, |acc, q| acc.saturating_add(counts[q]))
    }

    /// Subset construction.
    pub fn determinize(&self) -> Dfa<S> {
        let mut init = self.starts.clone();
        init.sort_unstable();
        init.dedup();
        explore(&self.alphabet, init, |set, a| self.successors(set, a), |set| set.iter().any(|&q| self.is_accepting(q)))
    }

    /// True iff every accepted string has exactly one accepting path. Decided on
    /// the self-product whose states remember whether the two runs have used
    /// different edges (or different start states) so far.
    pub fn is_unambiguous(&self) -> bool {
        let mut seen: HashMap<(u32, u32, bool), ()> = HashMap::new();
        let mut queue = VecDeque::new();
        for &s in &self.starts {
            for &t in &self.starts {
                let key = (s, t, s != t);
                if seen.insert(key, ()).is_none() {
                    queue.push_back(key);
                }
            }
        }
        let dup_starts = {
            let mut s = self.starts.clone();
            s.sort_unstable();
            s.windows(2).any(|w| w[0] == w[1])
        };
        if dup_starts && self.starts.iter().any(|&s| self.is_accepting(s)) {
            return false;
        }
        while let Some((p, q, diff)) = queue.pop_front() {
            if diff && self.is_accepting(p) && self.is_accepting(q) {
                return false;
            }
            for &e1 in &self.out[p as usize] {
                let (_, a1, p2) = self.edges[e1 as usize];
                for &e2 in &self.out[q as usize] {
                    let (_, a2, q2) = self.edges[e2 as usize];
                    if a1 != a2 {
                        continue;
                    }
                    let key = (p2, q2, diff || e1 != e2);
                    if seen.insert(key, ()).is_none() {
                        queue.push_back(key);
                    }
                }
            }
        }
        true
    }

    /// States that lie on some path from a start state to an accepting state.
    pub fn useful_states(&self) -> Vec<bool> {
        let n = self.num_states;
        let mut fwd = vec![false; n];
        let mut stack: Vec<u32> = self.starts.clone();
        while let Some(p) = stack.pop() {
            if std::mem::replace(&mut fwd[p as usize], true) {
                continue;
            }
            for &e in &self.out[p as usize] {
                stack.push(self.edges[e as usize].2);
            }
        }
        let mut back = vec![false; n];
        let mut stack: Vec<u32> = (0..n as u32).filter(|&q| self.accept[q as usize]).collect();
        while let Some(q) = stack.pop() {
            if std::mem::replace(&mut back[q as usize], true) {
                continue;
            }
            for &(p, _, q2) in &self.edges {
                if q2 == q {
                    stack.push(p);
                }
            }
        }
        (0..n).map(|q| fwd[q] && back[q]).collect()
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph {name} {{\n  rankdir=LR;\n");
        for q in 0..self.num_states {
            let shape = if self.accept[q] { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  q{q} [shape={shape}];");
        }
        for (i, &s) in self.starts.iter().enumerate() {
            let _ = writeln!(out, "  init{i} [shape=point];\n  init{i} -> q{s};");
        }
        for &(p, a, q) in &self.edges {
            let _ = writeln!(out, "  q{p} -> q{q} [label={:?}];", format!("{:?}", self.alphabet.symbol(a as usize)));
        }
        out.push_str("}\n");
        out
    }
}

impl<S: Symbol> Debug for Nfa<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nfa({} states, {} edges)", self.num_states, self.edges.len())
    }
}

/// Shared regex node.
pub type Re<S = char> = Arc<Regex<S>>;

/// Regular expressions over union, concatenation and star.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Regex<S: Symbol = char> {
    Empty,
    Eps,
    Sym(S),
    Union(Re<S>, Re<S>),
    Concat(Re<S>, Re<S>),
    Star(Re<S>),
}

impl<S: Symbol> Regex<S> {
    pub fn empty() -> Re<S> {
        Arc::new(Regex::Empty)
    }

    pub fn eps() -> Re<S> {
        Arc::new(Regex::Eps)
    }

    pub fn sym(s: S) -> Re<S> {
        Arc::new(Regex::Sym(s))
    }

    /// Union; `∅` is dropped.
    pub fn union(a: Re<S>, b: Re<S>) -> Re<S> {
        match (&*a, &*b) {
            (Regex::Empty, _) => b,
            (_, Regex::Empty) => a,
            _ => Arc::new(Regex::Union(a, b)),
        }
    }

    /// Concatenation; `∅` absorbs and `ε` is dropped.
    pub fn concat(a: Re<S>, b: Re<S>) -> Re<S> {
        match (&*a, &*b) {
            (Regex::Empty, _) | (_, Regex::Empty) => Regex::empty(),
            (Regex::Eps, _) => b,
            (_, Regex::Eps) => a,
            _ => Arc::new(Regex::Concat(a, b)),
        }
    }

    /// Star; the star of `∅` or `ε` is `ε`.
    pub fn star(a: Re<S>) -> Re<S> {
        match &*a {
            Regex::Empty | Regex::Eps => Regex::eps(),
            _ => Arc::new(Regex::Star(a)),
        }
    }

    pub fn union_all(items: impl IntoIterator<Item = Re<S>>) -> Re<S> {
        items.into_iter().fold(Regex::empty(), Regex::union)
    }

    pub fn is_empty_node(&self) -> bool {
        matches!(self, Regex::Empty)
    }

    /// Number of parses of `word`. Star iterations must be nonempty, so the
    /// count is finite; it saturates at `u64::MAX`.
    pub fn count_parses(self: &Re<S>, word: &[S]) -> u64 {
        let mut memo: HashMap<(usize, usize, usize), u64> = HashMap::new();
        count_rec(self, word, 0, word.len(), &mut memo)
    }

    pub fn matches(self: &Re<S>, word: &[S]) -> bool {
        self.count_parses(word) > 0
    }

    /// Glushkov position automaton (no ε-moves). Its accepting paths on a word
    /// correspond one-to-one with the parses of the word.
    pub fn to_nfa(self: &Re<S>, alphabet: &Alphabet<S>) -> Result<Nfa<S>, RelangError> {
        let mut positions: Vec<S> = Vec::new();
        let info = glushkov(self, &mut positions);
        let n = positions.len() + 1;
        let mut edges = Vec::new();
        for &p in &info.first {
            let a = alphabet.index(&positions[p]).ok_or(RelangError::AlphabetMismatch)?;
            edges.push((0u32, a as u32, (p + 1) as u32));
        }
        for (p, q) in info.follow {
            let a = alphabet.index(&positions[q]).ok_or(RelangError::AlphabetMismatch)?;
            edges.push(((p + 1) as u32, a as u32, (q + 1) as u32));
        }
        let mut accept = vec![false; n];
        accept[0] = info.nullable;
        for &p in &info.last {
            accept[p + 1] = true;
        }
        Ok(Nfa::from_edges(alphabet.clone(), n, edges, vec![0], accept))
    }

    pub fn to_dfa(self: &Re<S>, alphabet: &Alphabet<S>) -> Result<Dfa<S>, RelangError> {
        Ok(self.to_nfa(alphabet)?.determinize())
    }

    /// Fully parenthesized text form, with `()` for `ε` and `[]` for `∅`.
    pub fn fmt_with(&self, sym: &dyn Fn(&S) -> String) -> String {
        let mut out = String::new();
        self.write_with(&mut out, sym);
        out
    }

    fn write_with(&self, out: &mut String, sym: &dyn Fn(&S) -> String) {
        match self {
            Regex::Empty => out.push_str("[]"),
            Regex::Eps => out.push_str("()"),
            Regex::Sym(s) => out.push_str(&sym(s)),
            Regex::Union(a, b) => {
                out.push('(');
                a.write_with(out, sym);
                out.push('|');
                b.write_with(out, sym);
                out.push(')');
            }
            Regex::Concat(a, b) => {
                out.push('(');
                a.write_with(out, sym);
                b.write_with(out, sym);
                out.push(')');
            }
            Regex::Star(a) => {
                out.push('(');
                a.write_with(out, sym);
                out.push_str(")*");
            }
        }
    }

    /// Replaces every symbol by `f(symbol)`.
    pub fn map_symbols<T: Symbol>(self: &Re<S>, f: &dyn Fn(&S) -> Re<T>) -> Re<T> {
        let mut memo: HashMap<usize, Re<T>> = HashMap::new();
        map_rec(self, f, &mut memo)
    }
}

fn map_rec<S: Symbol, T: Symbol>(r: &Re<S>, f: &dyn Fn(&S) -> Re<T>, memo: &mut HashMap<usize, Re<T>>) -> Re<T> {
    let key = Arc::as_ptr(r) as usize;
    if let Some(v) = memo.get(&key) {
        return v.clone();
    }
    let out = match &**r {
        Regex::Empty => Regex::empty(),
        Regex::Eps => Regex::eps(),
        Regex::Sym(s) => f(s),
        Regex::Union(a, b) => Regex::union(map_rec(a, f, memo), map_rec(b, f, memo)),
        Regex::Concat(a, b) => Regex::concat(map_rec(a, f, memo), map_rec(b, f, memo)),
        Regex::Star(a) => Regex::star(map_rec(a, f, memo)),
    };
    memo.insert(key, out.clone());
    out
}

fn count_rec<S: Symbol>(r: &Re<S>, w: &[S], i: usize, j: usize, memo: &mut HashMap<(usize, usize, usize), u64>) -> u64 {
    let key = (Arc::as_ptr(r) as usize, i, j);
    if let Some(&c) = memo.get(&key) {
        return c;
    }
    let c = match &**r {
        Regex::Empty => 0,
        Regex::Eps => (i == j) as u64,
        Regex::Sym(s) => (j == i + 1 && w[i] == *s) as u64,
        Regex::Union(a, b) => count_rec(a, w, i, j, memo).saturating_add(count_rec(b, w, i, j, memo)),
        Regex::Concat(a, b) => {
            let mut total = 0u64;
            for k in i..=j {
                let left = count_rec(a, w, i, k, memo);
                if left > 0 {
                    total = total.saturating_add(left.saturating_mul(count_rec(b, w, k, j, memo)));
                }
            }
            total
        }
        Regex::Star(a) => {
            let mut total = (i == j) as u64;
            for k in i + 1..=j {
                let first = count_rec(a, w, i, k, memo);
                if first > 0 {
                    total = total.saturating_add(first.saturating_mul(count_rec(r, w, k, j, memo)));
                }
            }
            total
        }
    };
    memo.insert(key, c);
    c
}

struct GlushkovInfo {
    nullable: bool,
    first: Vec<usize>,
    last: Vec<usize>,
    follow: Vec<(usize, usize)>,
}

fn glushkov<S: Symbol>(r: &Re<S>, positions: &mut Vec<S>) -> GlushkovInfo {
    match &**r {
        Regex::Empty => GlushkovInfo { nullable: false, first: vec![], last: vec![], follow: vec![] },
        Regex::Eps => GlushkovInfo { nullable: true, first: vec![], last: vec![], follow: vec![] },
        Regex::Sym(s) => {
            positions.push(s.clone());
            let p = positions.len() - 1;
            GlushkovInfo { nullable: false, first: vec![p], last: vec![p], follow: vec![] }
        }
        Regex::Union(a, b) => {
            let x = glushkov(a, positions);
            let y = glushkov(b, positions);
            GlushkovInfo {
                nullable: x.nullable || y.nullable,
                first: [x.first, y.first].concat(),
                last: [x.last, y.last].concat(),
                follow: [x.follow, y.follow].concat(),
            }
        }
        Regex::Concat(a, b) => {
            let x = glushkov(a, positions);
            let y = glushkov(b, positions);
            let mut follow = [x.follow, y.follow].concat();
            for &l in &x.last {
                for &f in &y.first {
                    follow.push((l, f));
                }
            }
            let first = if x.nullable { [x.first, y.first.clone()].concat() } else { x.first };
            let last = if y.nullable { [x.last, y.last.clone()].concat() } else { y.last };
            GlushkovInfo { nullable: x.nullable && y.nullable, first, last, follow }
        }
        Regex::Star(a) => {
            let x = glushkov(a, positions);
            let mut follow = x.follow;
            for &l in &x.last {
                for &f in &x.first {
                    follow.push((l, f));
                }
            }
            GlushkovInfo { nullable: true, first: x.first, last: x.last, follow }
        }
    }
}

impl<S: Symbol> Debug for Regex<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fmt_with(&|s| format!("{s:?}")))
    }
}

impl fmt::Display for Regex<char> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fmt_with(&|c| escape_char(*c)))
    }
}

/// Characters with a meaning in regex literals.
pub const REGEX_SPECIAL: &str = "()[]|*+?.\\/ ";

pub fn escape_char(c: char) -> String {
    if REGEX_SPECIAL.contains(c) || c.is_whitespace() {
        format!("\\{c}")
    } else {
        c.to_string()
    }
}

/// Paths between `from` and `to` as a regex, built by eliminating states in
/// index order. Only nonempty paths are tracked during elimination; `ε` is
/// added at the end when `from == to`. This keeps the result unambiguous
/// whenever the automaton has a unique path per accepted string.
pub fn paths_regex<S: Symbol>(nfa: &Nfa<S>, from: u32, to: u32) -> Re<S> {
    let table = elimination_table(nfa);
    let r = table[from as usize][to as usize].clone();
    if from == to {
        Regex::union(Regex::eps(), r)
    } else {
        r
    }
}

fn elimination_table<S: Symbol>(nfa: &Nfa<S>) -> Vec<Vec<Re<S>>> {
    let n = nfa.num_states();
    let mut r: Vec<Vec<Re<S>>> = vec![vec![Regex::empty(); n]; n];
    for &(p, a, q) in &nfa.edges {
        let s = Regex::sym(nfa.alphabet.symbol(a as usize).clone());
        let cell = &mut r[p as usize][q as usize];
        *cell = Regex::union(cell.clone(), s);
    }
    for k in 0..n {
        let loop_star = Regex::star(r[k][k].clone());
        let mut next = r.clone();
        for q in 0..n {
            if r[q][k].is_empty_node() {
                continue;
            }
            let head = Regex::concat(r[q][k].clone(), loop_star.clone());
            for q2 in 0..n {
                if r[k][q2].is_empty_node() {
                    continue;
                }
                let through = Regex::concat(head.clone(), r[k][q2].clone());
                next[q][q2] = Regex::union(r[q][q2].clone(), through);
            }
        }
        r = next;
    }
    r
}

/// Regex for the language of `nfa`: the union over start/accept pairs of the
/// path regexes from [`paths_regex`].
pub fn state_elimination<S: Symbol>(nfa: &Nfa<S>) -> Re<S> {
    let table = elimination_table(nfa);
    let mut out = Regex::empty();
    for &s in nfa.starts() {
        for f in 0..nfa.num_states() as u32 {
            if !nfa.is_accepting(f) {
                continue;
            }
            let mut r = table[s as usize][f as usize].clone();
            if s == f {
                r = Regex::union(Regex::eps(), r);
            }
            out = Regex::union(out, r);
        }
    }
    out
}

/// A parsed regex literal before the alphabet is fixed. `.` stands for any symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RegexLit {
    Empty,
    Eps,
    Any,
    Chars(Vec<char>),
    Union(Box<RegexLit>, Box<RegexLit>),
    Concat(Box<RegexLit>, Box<RegexLit>),
    Star(Box<RegexLit>),
    Plus(Box<RegexLit>),
    Opt(Box<RegexLit>),
}

impl RegexLit {
    /// Parses a regex literal: `|` union, juxtaposition, postfix `*`, `+`, `?`,
    /// `.` any symbol, `[abc]` classes, `()` for `ε`, `[]` for `∅`, `\c` escapes.
    pub fn parse(text: &str) -> Result<RegexLit, RelangError> {
        let chars: Vec<char> = text.chars().collect();
        let mut p = LitParser { s: &chars, i: 0 };
        let r = p.alt()?;
        if p.i != chars.len() {
            return Err(RelangError::Syntax { pos: p.i, msg: format!("unexpected `{}`", chars[p.i]) });
        }
        Ok(r)
    }

    /// Symbols mentioned explicitly.
    pub fn symbols(&self, out: &mut Vec<char>) {
        match self {
            RegexLit::Chars(cs) => out.extend(cs.iter().copied()),
            RegexLit::Union(a, b) | RegexLit::Concat(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            RegexLit::Star(a) | RegexLit::Plus(a) | RegexLit::Opt(a) => a.symbols(out),
            _ => {}
        }
    }

    pub fn to_regex(&self, alphabet: &Alphabet<char>) -> Re<char> {
        match self {
            RegexLit::Empty => Regex::empty(),
            RegexLit::Eps => Regex::eps(),
            RegexLit::Any => Regex::union_all(alphabet.symbols().iter().map(|&c| Regex::sym(c))),
            RegexLit::Chars(cs) => Regex::union_all(cs.iter().map(|&c| Regex::sym(c))),
            RegexLit::Union(a, b) => Regex::union(a.to_regex(alphabet), b.to_regex(alphabet)),
            RegexLit::Concat(a, b) => Regex::concat(a.to_regex(alphabet), b.to_regex(alphabet)),
            RegexLit::Star(a) => Regex::star(a.to_regex(alphabet)),
            RegexLit::Plus(a) => {
                let r = a.to_regex(alphabet);
                Regex::concat(r.clone(), Regex::star(r))
            }
            RegexLit::Opt(a) => Regex::union(Regex::eps(), a.to_regex(alphabet)),
        }
    }

    pub fn to_dfa(&self, alphabet: &Alphabet<char>) -> Result<Dfa<char>, RelangError> {
        self.to_regex(alphabet).to_dfa(alphabet)
    }
}

struct LitParser<'a> {
    s: &'a [char],
    i: usize,
}

impl LitParser<'_> {
    fn peek(&self) -> Option<char> {
        self.s.get(self.i).copied()
    }

    fn err<T>(&self, msg: &str) -> Result<T, RelangError> {
        Err(RelangError::Syntax { pos: self.i, msg: msg.to_string() })
    }

    fn alt(&mut self) -> Result<RegexLit, RelangError> {
        let mut r = self.concat()?;
        while self.peek() == Some('|') {
            self.i += 1;
            let rhs = self.concat()?;
            r = RegexLit::Union(Box::new(r), Box::new(rhs));
        }
        Ok(r)
    }

    fn concat(&mut self) -> Result<RegexLit, RelangError> {
        let mut items = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' {
                break;
            }
            items.push(self.repeat()?);
        }
        if items.is_empty() {
            return self.err("empty alternative (write `()` for the empty string)");
        }
        let mut it = items.into_iter();
        let first = it.next().unwrap();
        Ok(it.fold(first, |acc, x| RegexLit::Concat(Box::new(acc), Box::new(x))))
    }

    fn repeat(&mut self) -> Result<RegexLit, RelangError> {
        let mut r = self.atom()?;
        loop {
            match self.peek() {
                Some('*') => r = RegexLit::Star(Box::new(r)),
                Some('+') => r = RegexLit::Plus(Box::new(r)),
                Some('?') => r = RegexLit::Opt(Box::new(r)),
                _ => break,
            }
            self.i += 1;
        }
        Ok(r)
    }

    fn atom(&mut self) -> Result<RegexLit, RelangError> {
        match self.peek() {
            Some('(') => {
                self.i += 1;
                if self.peek() == Some(')') {
                    self.i += 1;
                    return Ok(RegexLit::Eps);
                }
                let r = self.alt()?;
                if self.peek() != Some(')') {
                    return self.err("expected `)`");
                }
                self.i += 1;
                Ok(r)
            }
            Some('[') => {
                self.i += 1;
                let mut cs = Vec::new();
                loop {
                    match self.peek() {
                        Some(']') => {
                            self.i += 1;
                            break;
                        }
                        Some('\\') => {
                            self.i += 1;
                            match self.peek() {
                                Some(c) => cs.push(c),
                                None => return self.err("dangling escape"),
                            }
                            self.i += 1;
                        }
                        Some(c) => {
                            cs.push(c);
                            self.i += 1;
                        }
                        None => return self.err("unterminated class"),
                    }
                }
                if cs.is_empty() {
                    Ok(RegexLit::Empty)
                } else {
                    Ok(RegexLit::Chars(cs))
                }
            }
            Some('.') => {
                self.i += 1;
                Ok(RegexLit::Any)
            }
            Some('\\') => {
                self.i += 1;
                match self.peek() {
                    Some(c) => {
                        self.i += 1;
                        Ok(RegexLit::Chars(vec![c]))
                    }
                    None => self.err("dangling escape"),
                }
            }
            Some(c) if "*+?)]|/".contains(c) || c.is_whitespace() => self.err(&format!("unexpected `{c}`")),
            Some(c) => {
                self.i += 1;
                Ok(RegexLit::Chars(vec![c]))
            }
            None => self.err("unexpected end of regex"),
        }
    }
}

/// Parses `text` as a regex literal and builds its DFA over `alphabet`.
pub fn regex_dfa(text: &str, alphabet: &Alphabet<char>) -> Result<Dfa<char>, RelangError> {
    let lit = RegexLit::parse(text)?;
    let mut syms = Vec::new();
    lit.symbols(&mut syms);
    if syms.iter().any(|c| !alphabet.contains(c)) {
        return Err(RelangError::AlphabetMismatch);
    }
    lit.to_dfa(alphabet)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet<char> {
        Alphabet::from_symbols("ab")
    }

    fn d(s: &str) -> Dfa {
        regex_dfa(s, &ab()).unwrap()
    }

    fn w(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn boolean_examples() {
        let i = d("a*").intersect(&d("a*b")).unwrap();
        assert!(i.is_empty());
        assert!(Dfa::empty(&ab()).complement().equivalent(&Dfa::universal(&ab())).unwrap());
        let r = d("ab").reverse();
        assert!(r.accepts(&w("ba")) && !r.accepts(&w("ab")));
    }

    #[test]
    fn alphabet_mismatch_is_an_error() {
        let other = Dfa::universal(&Alphabet::from_symbols("abc"));
        assert_eq!(d("a").intersect(&other), Err(RelangError::AlphabetMismatch));
    }

    #[test]
    fn concat_counting_examples() {
        let u = d("a*").unambiguous_concat(&d("b*")).unwrap();
        assert!(u.accepts(&w("ab")));
        let u = d("a*").unambiguous_concat(&d("a*b")).unwrap();
        assert!(!u.accepts(&w("aab")));
        let u = Dfa::empty(&ab()).unambiguous_concat(&d("a*")).unwrap();
        assert!(u.is_empty());
    }

    #[test]
    fn star_counting_examples() {
        assert!(d("a*b").unambiguous_star().accepts(&w("abab")));
        assert!(!d("a|aa").unambiguous_star().accepts(&w("aaa")));
        assert!(Dfa::empty(&ab()).unambiguous_star().accepts(&[]));
    }

    #[test]
    fn determinize_examples() {
        let nfa = Nfa::new(ab(), 1, &[], vec![0], &[]).unwrap();
        assert!(nfa.determinize().is_empty());
        let eps = Nfa::new(ab(), 1, &[], vec![0], &[0]).unwrap().determinize();
        assert!(eps.equivalent(&Dfa::epsilon(&ab())).unwrap());
    }

    #[test]
    fn parallel_edges_are_ambiguous() {
        let nfa = Nfa::new(ab(), 2, &[(0, 'a', 1), (0, 'a', 1)], vec![0], &[1]).unwrap();
        assert!(!nfa.is_unambiguous());
        assert!(d("(a|b)*a").to_nfa().is_unambiguous());
    }

    #[test]
    fn minimize_is_canonical() {
        let x = d("(a|b)*a").minimize();
        let y = d("(b*a)+").minimize();
        assert_eq!(x, y);
        assert_eq!(x.num_states(), 2);
    }

    #[test]
    fn widen_keeps_language() {
        let big = Alphabet::from_symbols("ab#");
        let x = d("a*b").widen(&big);
        assert!(x.accepts(&w("aab")) && !x.accepts(&w("a#b")));
    }

    #[test]
    fn regex_printing_parses_back() {
        let r = RegexLit::parse("(a|b)*a()").unwrap().to_regex(&ab());
        let printed = r.to_string();
        let again = regex_dfa(&printed, &ab()).unwrap();
        assert!(again.equivalent(&d("(a|b)*a")).unwrap());
        assert!(RegexLit::parse("a|").is_err());
        assert_eq!(RegexLit::parse("[]").unwrap(), RegexLit::Empty);
    }

    #[test]
    fn elimination_of_empty_language() {
        let nfa = Nfa::new(ab(), 2, &[(0, 'a', 0)], vec![0], &[1]).unwrap();
        assert!(state_elimination(&nfa).is_empty_node());
    }
}
