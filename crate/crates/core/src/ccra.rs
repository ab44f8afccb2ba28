//! Cost register automata.
//!
//! [`Ccra`] is a deterministic machine with write-only registers updated by
//! copyless expressions. [`Acra`] restricts updates to `v := u + d`.
//! [`Stage`] pairs a machine over labelled input with a lookahead automaton;
//! a [`Cascade`] feeds the string output of each stage into the next.

use std::collections::HashMap;
use std::fmt::{self, Debug, Write as _};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::monoid::{Monoid, MonoidError, Word};
use crate::relang::{Alphabet, Dfa, Symbol};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CcraError {
    #[error("symbol {0} is not in the machine alphabet")]
    UnknownSymbol(String),
    #[error("update is not copyless: {0}")]
    NotCopyless(String),
    #[error("invalid machine: {0}")]
    Invalid(String),
    #[error("stage {0} outputs symbol {1:?}, which the next stage does not read")]
    Chaining(usize, char),
    #[error(transparent)]
    Monoid(#[from] MonoidError),
    #[error("malformed machine file: {0}")]
    Json(String),
}

/// One token of an update expression.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Tok<D> {
    Reg(u32),
    Const(D),
}

/// A sequence of registers and constants, read as their sum.
///
/// Canonical: no two adjacent constants and no zero constants.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Update<D: Monoid>(Vec<Tok<D>>);

impl<D: Monoid> Default for Update<D> {
    fn default() -> Self {
        Update(Vec::new())
    }
}

impl<D: Monoid> Update<D> {
    pub fn new(tokens: impl IntoIterator<Item = Tok<D>>) -> Self {
        let mut out: Vec<Tok<D>> = Vec::new();
        for t in tokens {
            match t {
                Tok::Const(d) if d.is_zero() => {}
                Tok::Const(d) => match out.last_mut() {
                    Some(Tok::Const(prev)) => *prev = prev.plus(&d),
                    _ => out.push(Tok::Const(d)),
                },
                r => out.push(r),
            }
        }
        Update(out)
    }

    /// The zero constant.
    pub fn zero() -> Self {
        Update(Vec::new())
    }

    pub fn reg(r: u32) -> Self {
        Update(vec![Tok::Reg(r)])
    }

    pub fn constant(d: D) -> Self {
        Update::new([Tok::Const(d)])
    }

    pub fn tokens(&self) -> &[Tok<D>] {
        &self.0
    }

    pub fn concat(&self, other: &Self) -> Self {
        Update::new(self.0.iter().chain(other.0.iter()).cloned())
    }

    pub fn registers(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().filter_map(|t| match t {
            Tok::Reg(r) => Some(*r),
            Tok::Const(_) => None,
        })
    }

    pub fn is_identity_of(&self, r: u32) -> bool {
        self.0.len() == 1 && self.0[0] == Tok::Reg(r)
    }

    pub fn eval(&self, val: &[D]) -> D {
        let mut acc = D::zero();
        for t in &self.0 {
            acc = match t {
                Tok::Reg(r) => acc.plus(&val[*r as usize]),
                Tok::Const(d) => acc.plus(d),
            };
        }
        acc
    }

    /// Replaces every register `r` by `f(r)`.
    pub fn substitute(&self, f: &dyn Fn(u32) -> Update<D>) -> Self {
        Update::new(self.0.iter().flat_map(|t| match t {
            Tok::Reg(r) => f(*r).0,
            c => vec![c.clone()],
        }))
    }

    pub fn rename(&self, f: &dyn Fn(u32) -> u32) -> Self {
        Update(
            self.0
                .iter()
                .map(|t| match t {
                    Tok::Reg(r) => Tok::Reg(f(*r)),
                    c => c.clone(),
                })
                .collect(),
        )
    }

    /// The constants only; every register is read as zero.
    pub fn erase_registers(&self) -> Self {
        Update::new(self.0.iter().filter(|t| matches!(t, Tok::Const(_))).cloned())
    }

    /// The constant slots: slot `k` precedes the `k`-th register and the last
    /// slot trails. There is one more slot than registers.
    pub fn patches(&self) -> Vec<D> {
        let mut out = vec![D::zero()];
        for t in &self.0 {
            match t {
                Tok::Reg(_) => out.push(D::zero()),
                Tok::Const(d) => {
                    let last = out.last_mut().unwrap();
                    *last = last.plus(d);
                }
            }
        }
        out
    }

    /// Inverse of [`Update::patches`].
    pub fn from_patches(regs: &[u32], patches: &[D]) -> Self {
        assert_eq!(patches.len(), regs.len() + 1);
        let mut toks = Vec::with_capacity(2 * regs.len() + 1);
        for (i, r) in regs.iter().enumerate() {
            toks.push(Tok::Const(patches[i].clone()));
            toks.push(Tok::Reg(*r));
        }
        toks.push(Tok::Const(patches[regs.len()].clone()));
        Update::new(toks)
    }

    pub fn render(&self, names: &[String]) -> String {
        if self.0.is_empty() {
            return D::zero().render();
        }
        self.0
            .iter()
            .map(|t| match t {
                Tok::Reg(r) => names[*r as usize].clone(),
                Tok::Const(d) => d.render(),
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// Register flow summary: for each register, the registers its new value is
/// built from, in order.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shape(pub Vec<Vec<u32>>);

impl Shape {
    pub fn identity(n: usize) -> Self {
        Shape((0..n as u32).map(|v| vec![v]).collect())
    }

    pub fn of_updates<D: Monoid>(updates: &[Update<D>]) -> Self {
        Shape(updates.iter().map(|u| u.registers().collect()).collect())
    }

    pub fn num_registers(&self) -> usize {
        self.0.len()
    }

    pub fn row(&self, v: u32) -> &[u32] {
        &self.0[v as usize]
    }

    /// Shape of a path made of a path with shape `self` followed by one with shape `next`.
    pub fn concat(&self, next: &Shape) -> Shape {
        Shape(next.0.iter().map(|row| row.iter().flat_map(|&u| self.0[u as usize].iter().copied()).collect()).collect())
    }

    /// Bitmask of registers occurring in their own row.
    pub fn support(&self) -> u64 {
        self.0.iter().enumerate().filter(|(v, row)| row.contains(&(*v as u32))).fold(0u64, |acc, (v, _)| acc | (1 << v))
    }

    pub fn is_copyless(&self) -> bool {
        let mut seen = vec![false; self.0.len()];
        for row in &self.0 {
            for &u in row {
                if std::mem::replace(&mut seen[u as usize], true) {
                    return false;
                }
            }
        }
        true
    }

    /// Upward flow in index order, self-flow accompanying every inflow, and
    /// no register dropped.
    pub fn is_normalized(&self) -> bool {
        let mut used = vec![false; self.0.len()];
        for (u, row) in self.0.iter().enumerate() {
            for &v in row {
                if (v as usize) < u {
                    return false;
                }
                used[v as usize] = true;
            }
            if !row.is_empty() && !row.contains(&(u as u32)) {
                return false;
            }
        }
        used.iter().all(|&b| b)
    }
}

impl Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .map(|(v, row)| format!("{v}:={}", row.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(".")))
            .collect();
        write!(f, "[{}]", rows.join(" "))
    }
}

/// Text form of machine symbols in files and diagrams.
pub trait SymbolText: Symbol {
    fn to_text(&self) -> String;
    fn from_text(s: &str) -> Option<Self>;
}

impl SymbolText for char {
    fn to_text(&self) -> String {
        self.to_string()
    }

    fn from_text(s: &str) -> Option<Self> {
        let mut it = s.chars();
        match (it.next(), it.next()) {
            (Some(c), None) => Some(c),
            _ => None,
        }
    }
}

/// An input symbol paired with the lookahead state of the rest of the input.
pub type Label = (char, u32);

impl SymbolText for Label {
    fn to_text(&self) -> String {
        format!("{}|{}", self.0, self.1)
    }

    fn from_text(s: &str) -> Option<Self> {
        let (c, n) = s.rsplit_once('|')?;
        Some((char::from_text(c)?, n.parse().ok()?))
    }
}

/// A copyless cost register automaton over input symbols `S`.
#[derive(Clone, PartialEq, Eq)]
pub struct Ccra<D: Monoid, S: Symbol = char> {
    alphabet: Alphabet<S>,
    states: Vec<String>,
    registers: Vec<String>,
    start: u32,
    /// `delta[q * |Σ| + a]`.
    delta: Vec<u32>,
    /// `mu[q * |Σ| + a][v]`.
    mu: Vec<Vec<Update<D>>>,
    /// Output expression; `Some` exactly at accepting states.
    nu: Vec<Option<Update<D>>>,
}

/// Machine state and register valuation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration<D> {
    pub state: u32,
    pub valuation: Vec<D>,
}

/// The kind of copylessness failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// A register occurs twice in one expression.
    Repeated,
    /// A register feeds two different registers on one transition.
    Shared,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation<S> {
    pub kind: ViolationKind,
    pub state: u32,
    /// `None` for an output expression.
    pub symbol: Option<S>,
    pub register: u32,
}

impl<D: Monoid, S: SymbolText> Ccra<D, S> {
    /// Builds a machine from complete tables. Fails when a table is not total,
    /// an index is out of range, or an update is not copyless.
    pub fn new(
        alphabet: Alphabet<S>,
        states: Vec<String>,
        registers: Vec<String>,
        start: u32,
        delta: Vec<u32>,
        mu: Vec<Vec<Update<D>>>,
        nu: Vec<Option<Update<D>>>,
    ) -> Result<Self, CcraError> {
        let m = Self::new_unchecked(alphabet, states, registers, start, delta, mu, nu)?;
        let v = m.validate_copyless();
        if let Some(first) = v.first() {
            return Err(CcraError::NotCopyless(m.describe_violation(first)));
        }
        Ok(m)
    }

    /// As [`Ccra::new`] without the copyless check.
    pub fn new_unchecked(
        alphabet: Alphabet<S>,
        states: Vec<String>,
        registers: Vec<String>,
        start: u32,
        delta: Vec<u32>,
        mu: Vec<Vec<Update<D>>>,
        nu: Vec<Option<Update<D>>>,
    ) -> Result<Self, CcraError> {
        let n = states.len();
        let k = alphabet.len();
        let nv = registers.len();
        if n == 0 || start as usize >= n {
            return Err(CcraError::Invalid("start state out of range".into()));
        }
        if delta.len() != n * k || mu.len() != n * k || nu.len() != n {
            return Err(CcraError::Invalid("transition tables are not total".into()));
        }
        if delta.iter().any(|&t| t as usize >= n) {
            return Err(CcraError::Invalid("transition target out of range".into()));
        }
        if nv > 64 {
            return Err(CcraError::Invalid("at most 64 registers are supported".into()));
        }
        for row in &mu {
            if row.len() != nv {
                return Err(CcraError::Invalid("update map is not total over registers".into()));
            }
        }
        let all = mu.iter().flatten().chain(nu.iter().flatten());
        for u in all {
            if u.registers().any(|r| r as usize >= nv) {
                return Err(CcraError::Invalid("update mentions an unknown register".into()));
            }
        }
        Ok(Ccra { alphabet, states, registers, start, delta, mu, nu })
    }

    /// Builds the reachable part of a machine whose states are keys of type `K`.
    pub fn explore<K, F, O>(
        alphabet: &Alphabet<S>,
        registers: Vec<String>,
        init: K,
        mut step: F,
        mut output: O,
        name: impl Fn(&K, usize) -> String,
    ) -> Self
    where
        K: Clone + Eq + Hash,
        F: FnMut(&K, usize) -> (K, Vec<Update<D>>),
        O: FnMut(&K) -> Option<Update<D>>,
    {
        let k = alphabet.len();
        let mut index: HashMap<K, u32> = HashMap::new();
        let mut keys = vec![init.clone()];
        index.insert(init, 0);
        let mut delta = Vec::new();
        let mut mu = Vec::new();
        let mut nu = Vec::new();
        let mut i = 0;
        while i < keys.len() {
            let key = keys[i].clone();
            nu.push(output(&key));
            for a in 0..k {
                let (next, ups) = step(&key, a);
                let id = match index.get(&next) {
                    Some(&id) => id,
                    None => {
                        let id = keys.len() as u32;
                        index.insert(next.clone(), id);
                        keys.push(next);
                        id
                    }
                };
                delta.push(id);
                mu.push(ups);
            }
            i += 1;
        }
        let states = keys.iter().enumerate().map(|(i, k)| name(k, i)).collect();
        Ccra { alphabet: alphabet.clone(), states, registers, start: 0, delta, mu, nu }
    }

    pub fn alphabet(&self) -> &Alphabet<S> {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn registers(&self) -> &[String] {
        &self.registers
    }

    pub fn num_registers(&self) -> usize {
        self.registers.len()
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn next(&self, q: u32, a: usize) -> u32 {
        self.delta[q as usize * self.alphabet.len() + a]
    }

    pub fn updates(&self, q: u32, a: usize) -> &[Update<D>] {
        &self.mu[q as usize * self.alphabet.len() + a]
    }

    pub fn output_expr(&self, q: u32) -> Option<&Update<D>> {
        self.nu[q as usize].as_ref()
    }

    pub fn is_accepting(&self, q: u32) -> bool {
        self.nu[q as usize].is_some()
    }

    /// Every register occurs at most once per expression and feeds at most
    /// one register per transition; every output expression is copyless.
    pub fn validate_copyless(&self) -> Vec<Violation<S>> {
        let mut out = Vec::new();
        let nv = self.registers.len();
        for q in 0..self.num_states() as u32 {
            for a in 0..self.alphabet.len() {
                let mut owner: Vec<Option<usize>> = vec![None; nv];
                for (v, up) in self.updates(q, a).iter().enumerate() {
                    for r in up.registers() {
                        let kind = match owner[r as usize] {
                            None => {
                                owner[r as usize] = Some(v);
                                continue;
                            }
                            Some(w) if w == v => ViolationKind::Repeated,
                            Some(_) => ViolationKind::Shared,
                        };
                        out.push(Violation {
                            kind,
                            state: q,
                            symbol: Some(self.alphabet.symbol(a).clone()),
                            register: r,
                        });
                    }
                }
            }
            if let Some(up) = self.output_expr(q) {
                let mut seen = vec![false; nv];
                for r in up.registers() {
                    if std::mem::replace(&mut seen[r as usize], true) {
                        out.push(Violation { kind: ViolationKind::Repeated, state: q, symbol: None, register: r });
                    }
                }
            }
        }
        out
    }

    fn describe_violation(&self, v: &Violation<S>) -> String {
        let place = match &v.symbol {
            Some(s) => format!("on {} from {}", s.to_text(), self.states[v.state as usize]),
            None => format!("in the output of {}", self.states[v.state as usize]),
        };
        let what = match v.kind {
            ViolationKind::Repeated => "occurs twice in one expression",
            ViolationKind::Shared => "feeds two registers",
        };
        format!("register {} {what} {place}", self.registers[v.register as usize])
    }

    pub fn initial(&self) -> Configuration<D> {
        Configuration { state: self.start, valuation: vec![D::zero(); self.registers.len()] }
    }

    pub fn step_config(&self, c: &Configuration<D>, a: usize) -> Configuration<D> {
        let ups = self.updates(c.state, a);
        Configuration { state: self.next(c.state, a), valuation: ups.iter().map(|u| u.eval(&c.valuation)).collect() }
    }

    fn index_of(&self, s: &S) -> Result<usize, CcraError> {
        self.alphabet.index(s).ok_or_else(|| CcraError::UnknownSymbol(s.to_text()))
    }

    pub fn run(&self, sigma: &[S]) -> Result<Configuration<D>, CcraError> {
        let mut c = self.initial();
        for s in sigma {
            c = self.step_config(&c, self.index_of(s)?);
        }
        Ok(c)
    }

    pub fn output(&self, c: &Configuration<D>) -> Option<D> {
        self.output_expr(c.state).map(|u| u.eval(&c.valuation))
    }

    /// The function computed by the machine; `Ok(None)` is undefined.
    pub fn eval(&self, sigma: &[S]) -> Result<Option<D>, CcraError> {
        Ok(self.output(&self.run(sigma)?))
    }

    /// Target state and composite updates of the path reading `sigma` from `q`.
    pub fn summary(&self, q: u32, sigma: &[S]) -> Result<(u32, Vec<Update<D>>), CcraError> {
        let mut cur: Vec<Update<D>> = (0..self.registers.len() as u32).map(Update::reg).collect();
        let mut state = q;
        for s in sigma {
            let a = self.index_of(s)?;
            let ups = self.updates(state, a);
            cur = ups.iter().map(|u| u.substitute(&|r| cur[r as usize].clone())).collect();
            state = self.next(state, a);
        }
        Ok((state, cur))
    }

    /// Strings on which the machine is defined.
    pub fn domain(&self) -> Dfa<S> {
        let k = self.alphabet.len();
        let trans = (0..self.num_states() as u32)
            .flat_map(|q| (0..k).map(move |a| (q, a)))
            .map(|(q, a)| self.next(q, a))
            .collect();
        let accept = (0..self.num_states() as u32).map(|q| self.is_accepting(q)).collect();
        Dfa::from_parts(self.alphabet.clone(), trans, accept, self.start).minimize()
    }

    /// True iff every transition's shape is normalized in register index order.
    pub fn is_normalized(&self) -> bool {
        (0..self.num_states() as u32)
            .all(|q| (0..self.alphabet.len()).all(|a| Shape::of_updates(self.updates(q, a)).is_normalized()))
    }

    /// Graphviz rendering with update annotations.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph {name} {{\n  rankdir=LR;\n  init [shape=point];\n");
        for (q, s) in self.states.iter().enumerate() {
            match &self.nu[q] {
                Some(u) => {
                    let _ = writeln!(
                        out,
                        "  q{q} [shape=doublecircle, label={:?}];",
                        format!("{s}\n{}", u.render(&self.registers))
                    );
                }
                None => {
                    let _ = writeln!(out, "  q{q} [shape=circle, label={s:?}];");
                }
            }
        }
        let _ = writeln!(out, "  init -> q{};", self.start);
        for q in 0..self.num_states() as u32 {
            for a in 0..self.alphabet.len() {
                let t = self.next(q, a);
                let ups: Vec<String> = self
                    .updates(q, a)
                    .iter()
                    .enumerate()
                    .filter(|(v, u)| !u.is_identity_of(*v as u32))
                    .map(|(v, u)| format!("{} := {}", self.registers[v], u.render(&self.registers)))
                    .collect();
                let mut label = self.alphabet.symbol(a).to_text();
                if !ups.is_empty() {
                    label = format!("{label} / {}", ups.join("; "));
                }
                let _ = writeln!(out, "  q{q} -> q{t} [label={label:?}];");
            }
        }
        out.push_str("}\n");
        out
    }
}

impl<D: Monoid, S: Symbol> Debug for Ccra<D, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ccra({} states, {} registers over {:?})", self.states.len(), self.registers.len(), self.alphabet)
    }
}

/// Evaluates a machine on a string.
pub fn eval_ccra<D: Monoid, S: SymbolText>(m: &Ccra<D, S>, sigma: &[S]) -> Result<Option<D>, CcraError> {
    m.eval(sigma)
}

/// Renames registers to `x0, x1, …` in a fixed order so that every transition
/// lets values flow only upward, and collects lost values in the sink `x0`.
/// States of the result pair an original state with a register renaming.
pub fn normalize<D: Monoid, S: SymbolText>(m: &Ccra<D, S>) -> Result<Ccra<D, S>, CcraError> {
    if let Some(v) = m.validate_copyless().first() {
        return Err(CcraError::NotCopyless(m.describe_violation(v)));
    }
    let n = m.num_registers();
    let registers: Vec<String> = (0..=n).map(|i| format!("x{i}")).collect();
    // A key is (state, f) where f[v] ∈ 1..=n is the new index of register v.
    let init: (u32, Vec<u32>) = (m.start, (1..=n as u32).collect());
    let out = Ccra::explore(
        &m.alphabet,
        registers,
        init,
        |(q, f), a| {
            let ups = m.updates(*q, a);
            let mut f2: Vec<Option<u32>> = vec![None; n];
            let mut used = vec![false; n + 1];
            for (v, up) in ups.iter().enumerate() {
                if let Some(min) = up.registers().map(|u| f[u as usize]).min() {
                    f2[v] = Some(min);
                    used[min as usize] = true;
                }
            }
            let mut free = (1..=n as u32).filter(|&i| !used[i as usize]);
            let f2: Vec<u32> = f2.into_iter().map(|x| x.unwrap_or_else(|| free.next().unwrap())).collect();
            let mut occurs = vec![false; n];
            for up in ups {
                for r in up.registers() {
                    occurs[r as usize] = true;
                }
            }
            let mut lost: Vec<u32> = (0..n).filter(|&u| !occurs[u]).map(|u| f[u]).collect();
            lost.sort_unstable();
            let mut new = vec![Update::zero(); n + 1];
            new[0] = Update::new(std::iter::once(Tok::Reg(0)).chain(lost.into_iter().map(Tok::Reg)));
            for (v, up) in ups.iter().enumerate() {
                new[f2[v] as usize] = up.rename(&|r| f[r as usize]);
            }
            ((m.next(*q, a), f2), new)
        },
        |(q, f)| m.output_expr(*q).map(|u| u.rename(&|r| f[r as usize])),
        |(q, f), _| {
            let perm: Vec<String> = f.iter().map(|i| format!("x{i}")).collect();
            format!("{}[{}]", m.states[*q as usize], perm.join(","))
        },
    );
    Ok(out)
}

/// Additive cost register automaton: every update is `v := u + d`.
#[derive(Clone, PartialEq, Eq)]
pub struct Acra<D: Monoid, S: Symbol = char> {
    alphabet: Alphabet<S>,
    states: Vec<String>,
    registers: Vec<String>,
    start: u32,
    delta: Vec<u32>,
    mu: Vec<Vec<(u32, D)>>,
    nu: Vec<Option<(u32, D)>>,
}

impl<D: Monoid, S: SymbolText> Acra<D, S> {
    /// The same machine with general updates.
    pub fn to_ccra(&self) -> Ccra<D, S> {
        Ccra {
            alphabet: self.alphabet.clone(),
            states: self.states.clone(),
            registers: self.registers.clone(),
            start: self.start,
            delta: self.delta.clone(),
            mu: self.to_updates(),
            nu: self
                .nu
                .iter()
                .map(|o| o.as_ref().map(|(u, d)| Update::new([Tok::Reg(*u), Tok::Const(d.clone())])))
                .collect(),
        }
    }

    pub fn new(
        alphabet: Alphabet<S>,
        states: Vec<String>,
        registers: Vec<String>,
        start: u32,
        delta: Vec<u32>,
        mu: Vec<Vec<(u32, D)>>,
        nu: Vec<Option<(u32, D)>>,
    ) -> Result<Self, CcraError> {
        let n = states.len();
        let k = alphabet.len();
        let nv = registers.len();
        if n == 0 || start as usize >= n {
            return Err(CcraError::Invalid("start state out of range".into()));
        }
        if delta.len() != n * k || mu.len() != n * k || nu.len() != n {
            return Err(CcraError::Invalid("transition tables are not total".into()));
        }
        if delta.iter().any(|&t| t as usize >= n) {
            return Err(CcraError::Invalid("transition target out of range".into()));
        }
        if mu.iter().any(|row| row.len() != nv || row.iter().any(|(u, _)| *u as usize >= nv))
            || nu.iter().flatten().any(|(u, _)| *u as usize >= nv)
        {
            return Err(CcraError::Invalid("update map is not total over registers".into()));
        }
        Ok(Acra { alphabet, states, registers, start, delta, mu, nu })
    }

    pub fn alphabet(&self) -> &Alphabet<S> {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn registers(&self) -> &[String] {
        &self.registers
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn next(&self, q: u32, a: usize) -> u32 {
        self.delta[q as usize * self.alphabet.len() + a]
    }

    /// `(u, d)` for each register `v`, meaning `v := u + d`.
    pub fn updates(&self, q: u32, a: usize) -> &[(u32, D)] {
        &self.mu[q as usize * self.alphabet.len() + a]
    }

    pub fn output_expr(&self, q: u32) -> Option<&(u32, D)> {
        self.nu[q as usize].as_ref()
    }

    pub fn eval(&self, sigma: &[S]) -> Result<Option<D>, CcraError> {
        let mut q = self.start;
        let mut val = vec![D::zero(); self.registers.len()];
        for s in sigma {
            let a = self.alphabet.index(s).ok_or_else(|| CcraError::UnknownSymbol(s.to_text()))?;
            val = self.updates(q, a).iter().map(|(u, d)| val[*u as usize].plus(d)).collect();
            q = self.next(q, a);
        }
        Ok(self.output_expr(q).map(|(u, d)| val[*u as usize].plus(d)))
    }

    /// The same machine viewed as a register automaton with general updates.
    /// It need not be copyless.
    pub fn to_updates(&self) -> Vec<Vec<Update<D>>> {
        self.mu
            .iter()
            .map(|row| row.iter().map(|(u, d)| Update::new([Tok::Reg(*u), Tok::Const(d.clone())])).collect())
            .collect()
    }
}

impl<D: Monoid, S: Symbol> Debug for Acra<D, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Acra({} states, {} registers)", self.states.len(), self.registers.len())
    }
}

pub fn eval_acra<D: Monoid, S: SymbolText>(m: &Acra<D, S>, sigma: &[S]) -> Result<Option<D>, CcraError> {
    m.eval(sigma)
}

/// Lookahead states for every position: entry `p` is the state reached by
/// reading the suffix starting at `p` from right to left. Entry `n` is the
/// start state.
pub fn labelling(lookahead: &Dfa, sigma: &[char]) -> Result<Vec<u32>, CcraError> {
    let n = sigma.len();
    let mut out = vec![lookahead.start(); n + 1];
    for p in (0..n).rev() {
        out[p] = lookahead.step(out[p + 1], &sigma[p]).ok_or_else(|| CcraError::UnknownSymbol(sigma[p].to_string()))?;
    }
    Ok(out)
}

/// The label string: symbol `p` paired with the lookahead state of the input after it.
pub fn label_string(lookahead: &Dfa, sigma: &[char]) -> Result<Vec<Label>, CcraError> {
    let states = labelling(lookahead, sigma)?;
    Ok(sigma.iter().enumerate().map(|(p, &c)| (c, states[p + 1])).collect())
}

/// Runs `m` on the labelling of `sigma` by `lookahead`.
pub fn eval_with_lookahead<D: Monoid>(
    m: &Ccra<D, Label>,
    lookahead: &Dfa,
    sigma: &[char],
) -> Result<Option<D>, CcraError> {
    m.eval(&label_string(lookahead, sigma)?)
}

/// A machine reading labelled input, with its lookahead automaton.
#[derive(Clone, Debug)]
pub struct Stage<D: Monoid> {
    pub lookahead: Dfa,
    pub machine: Ccra<D, Label>,
}

impl<D: Monoid> Stage<D> {
    /// A stage with a one-state lookahead running `m` directly.
    pub fn plain(m: &Ccra<D, char>) -> Self {
        let lookahead = Dfa::universal(m.alphabet());
        let alphabet = Alphabet::new(m.alphabet().symbols().iter().map(|&c| (c, 0u32)));
        let machine = Ccra {
            alphabet,
            states: m.states.clone(),
            registers: m.registers.clone(),
            start: m.start,
            delta: m.delta.clone(),
            mu: m.mu.clone(),
            nu: m.nu.clone(),
        };
        Stage { lookahead, machine }
    }

    pub fn input_alphabet(&self) -> &Alphabet {
        self.lookahead.alphabet()
    }

    pub fn eval(&self, sigma: &[char]) -> Result<Option<D>, CcraError> {
        eval_with_lookahead(&self.machine, &self.lookahead, sigma)
    }

    pub fn validate_copyless(&self) -> Vec<Violation<Label>> {
        self.machine.validate_copyless()
    }
}

/// Output symbols a string-valued machine may produce.
pub fn output_symbols<S: SymbolText>(m: &Ccra<Word, S>) -> Vec<char> {
    let mut out: Vec<char> =
        m.mu.iter()
            .flatten()
            .chain(m.nu.iter().flatten())
            .flat_map(|u| u.tokens().iter())
            .filter_map(|t| match t {
                Tok::Const(w) => Some(w.chars()),
                Tok::Reg(_) => None,
            })
            .flatten()
            .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Stages run left to right; each front stage produces the input of the next.
#[derive(Clone, Debug)]
pub struct Cascade<D: Monoid> {
    front: Vec<Stage<Word>>,
    last: Stage<D>,
}

impl<D: Monoid> Cascade<D> {
    pub fn new(front: Vec<Stage<Word>>, last: Stage<D>) -> Result<Self, CcraError> {
        for (i, st) in front.iter().enumerate() {
            let next = front.get(i + 1).map(|s| s.input_alphabet()).unwrap_or_else(|| last.input_alphabet());
            if let Some(c) = output_symbols(&st.machine).into_iter().find(|c| !next.contains(c)) {
                return Err(CcraError::Chaining(i, c));
            }
        }
        Ok(Cascade { front, last })
    }

    pub fn single(stage: Stage<D>) -> Self {
        Cascade { front: Vec::new(), last: stage }
    }

    pub fn front(&self) -> &[Stage<Word>] {
        &self.front
    }

    pub fn last(&self) -> &Stage<D> {
        &self.last
    }

    pub fn num_stages(&self) -> usize {
        self.front.len() + 1
    }

    pub fn input_alphabet(&self) -> &Alphabet {
        self.front.first().map(|s| s.input_alphabet()).unwrap_or_else(|| self.last.input_alphabet())
    }

    /// Places `self` after `inner`: the result computes `self ∘ inner`.
    pub fn after(self, inner: Cascade<Word>) -> Result<Self, CcraError> {
        let mut front = inner.front;
        front.push(inner.last);
        front.extend(self.front);
        Cascade::new(front, self.last)
    }

    pub fn eval(&self, sigma: &[char]) -> Result<Option<D>, CcraError> {
        let mut cur: Vec<char> = sigma.to_vec();
        for st in &self.front {
            match st.eval(&cur)? {
                Some(w) => cur = w.chars(),
                None => return Ok(None),
            }
        }
        self.last.eval(&cur)
    }
}

pub fn eval_cascade<D: Monoid>(c: &Cascade<D>, sigma: &[char]) -> Result<Option<D>, CcraError> {
    c.eval(sigma)
}

#[derive(Serialize, Deserialize)]
struct RawDelta {
    from: String,
    symbol: String,
    to: String,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawTok {
    Reg {
        reg: String,
    },
    Const {
        #[serde(rename = "const")]
        value: Json,
    },
}

#[derive(Serialize, Deserialize)]
struct RawMu {
    state: String,
    symbol: String,
    register: String,
    rhs: Vec<RawTok>,
}

#[derive(Serialize, Deserialize)]
struct RawNu {
    state: String,
    rhs: Vec<RawTok>,
}

#[derive(Serialize, Deserialize)]
struct RawDfa {
    states: Vec<String>,
    alphabet: Vec<String>,
    start: String,
    accepting: Vec<String>,
    delta: Vec<RawDelta>,
}

#[derive(Serialize, Deserialize)]
struct RawMachine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    monoid: Option<String>,
    states: Vec<String>,
    alphabet: Vec<String>,
    registers: Vec<String>,
    start: String,
    accepting: Vec<String>,
    delta: Vec<RawDelta>,
    #[serde(default)]
    mu: Vec<RawMu>,
    #[serde(default)]
    nu: Vec<RawNu>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lookahead: Option<RawDfa>,
}

fn jerr(msg: impl Into<String>) -> CcraError {
    CcraError::Json(msg.into())
}

fn lookup(names: &HashMap<&str, u32>, name: &str, what: &str) -> Result<u32, CcraError> {
    names.get(name).copied().ok_or_else(|| jerr(format!("unknown {what} `{name}`")))
}

fn name_index<'a>(names: &'a [String], what: &str) -> Result<HashMap<&'a str, u32>, CcraError> {
    let mut map = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        if map.insert(n.as_str(), i as u32).is_some() {
            return Err(jerr(format!("duplicate {what} `{n}`")));
        }
    }
    Ok(map)
}

fn parse_alphabet<S: SymbolText>(symbols: &[String]) -> Result<Alphabet<S>, CcraError> {
    let parsed: Vec<S> = symbols
        .iter()
        .map(|s| S::from_text(s).ok_or_else(|| jerr(format!("bad symbol `{s}`"))))
        .collect::<Result<_, _>>()?;
    let a = Alphabet::new(parsed);
    if a.len() != symbols.len() {
        return Err(jerr("duplicate alphabet symbol"));
    }
    Ok(a)
}

fn parse_rhs<D: Monoid>(rhs: &[RawTok], regs: &HashMap<&str, u32>) -> Result<Update<D>, CcraError> {
    let toks: Vec<Tok<D>> = rhs
        .iter()
        .map(|t| match t {
            RawTok::Reg { reg } => lookup(regs, reg, "register").map(Tok::Reg),
            RawTok::Const { value } => Ok(Tok::Const(D::from_json(value)?)),
        })
        .collect::<Result<_, _>>()?;
    Ok(Update::new(toks))
}

fn rhs_json<D: Monoid>(u: &Update<D>, names: &[String]) -> Vec<RawTok> {
    u.tokens()
        .iter()
        .map(|t| match t {
            Tok::Reg(r) => RawTok::Reg { reg: names[*r as usize].clone() },
            Tok::Const(d) => RawTok::Const { value: d.to_json() },
        })
        .collect()
}

/// Raw machine tables decoded from a file, before the update form is checked.
struct Decoded<D: Monoid, S: Symbol> {
    alphabet: Alphabet<S>,
    states: Vec<String>,
    registers: Vec<String>,
    start: u32,
    delta: Vec<u32>,
    mu: Vec<Vec<Update<D>>>,
    nu: Vec<Option<Update<D>>>,
}

fn decode<D: Monoid, S: SymbolText>(raw: &RawMachine) -> Result<Decoded<D, S>, CcraError> {
    let alphabet: Alphabet<S> = parse_alphabet(&raw.alphabet)?;
    let states = name_index(&raw.states, "state")?;
    let regs = name_index(&raw.registers, "register")?;
    let n = raw.states.len();
    let k = alphabet.len();
    let sym = |s: &str| -> Result<usize, CcraError> {
        let x = S::from_text(s).ok_or_else(|| jerr(format!("bad symbol `{s}`")))?;
        alphabet.index(&x).ok_or_else(|| jerr(format!("symbol `{s}` not in alphabet")))
    };
    let mut delta: Vec<Option<u32>> = vec![None; n * k];
    for d in &raw.delta {
        let i = lookup(&states, &d.from, "state")? as usize * k + sym(&d.symbol)?;
        if delta[i].replace(lookup(&states, &d.to, "state")?).is_some() {
            return Err(jerr(format!("duplicate transition from `{}` on `{}`", d.from, d.symbol)));
        }
    }
    let delta: Vec<u32> = delta
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            t.ok_or_else(|| {
                jerr(format!(
                    "missing transition from `{}` on `{}`",
                    raw.states[i / k],
                    alphabet.symbol(i % k).to_text()
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    let nv = raw.registers.len();
    // Unlisted register updates keep the register unchanged.
    let mut mu: Vec<Vec<Update<D>>> = vec![(0..nv as u32).map(Update::reg).collect(); n * k];
    let mut seen = std::collections::HashSet::new();
    for m in &raw.mu {
        let q = lookup(&states, &m.state, "state")? as usize;
        let a = sym(&m.symbol)?;
        let v = lookup(&regs, &m.register, "register")? as usize;
        if !seen.insert((q, a, v)) {
            return Err(jerr(format!("duplicate update of `{}` on `{}` from `{}`", m.register, m.symbol, m.state)));
        }
        mu[q * k + a][v] = parse_rhs(&m.rhs, &regs)?;
    }
    let mut accepting = vec![false; n];
    for s in &raw.accepting {
        accepting[lookup(&states, s, "state")? as usize] = true;
    }
    let mut nu: Vec<Option<Update<D>>> = vec![None; n];
    for o in &raw.nu {
        let q = lookup(&states, &o.state, "state")? as usize;
        if !accepting[q] {
            return Err(jerr(format!("output given for non-accepting state `{}`", o.state)));
        }
        nu[q] = Some(parse_rhs(&o.rhs, &regs)?);
    }
    if let Some(q) = (0..n).find(|&q| accepting[q] && nu[q].is_none()) {
        return Err(jerr(format!("accepting state `{}` has no output", raw.states[q])));
    }
    Ok(Decoded {
        alphabet,
        states: raw.states.clone(),
        registers: raw.registers.clone(),
        start: lookup(&states, &raw.start, "state")?,
        delta,
        mu,
        nu,
    })
}

fn encode<D: Monoid, S: SymbolText>(m: &Ccra<D, S>) -> RawMachine {
    let k = m.alphabet.len();
    let mut delta = Vec::new();
    let mut mu = Vec::new();
    for q in 0..m.num_states() as u32 {
        for a in 0..k {
            let symbol = m.alphabet.symbol(a).to_text();
            delta.push(RawDelta {
                from: m.states[q as usize].clone(),
                symbol: symbol.clone(),
                to: m.states[m.next(q, a) as usize].clone(),
            });
            for (v, u) in m.updates(q, a).iter().enumerate() {
                if !u.is_identity_of(v as u32) {
                    mu.push(RawMu {
                        state: m.states[q as usize].clone(),
                        symbol: symbol.clone(),
                        register: m.registers[v].clone(),
                        rhs: rhs_json(u, &m.registers),
                    });
                }
            }
        }
    }
    let accepting: Vec<String> =
        (0..m.num_states()).filter(|&q| m.nu[q].is_some()).map(|q| m.states[q].clone()).collect();
    let nu = (0..m.num_states())
        .filter_map(|q| m.nu[q].as_ref().map(|u| RawNu { state: m.states[q].clone(), rhs: rhs_json(u, &m.registers) }))
        .collect();
    RawMachine {
        kind: Some("ccra".into()),
        monoid: Some(D::NAME.into()),
        states: m.states.clone(),
        alphabet: m.alphabet.symbols().iter().map(|s| s.to_text()).collect(),
        registers: m.registers.clone(),
        start: m.states[m.start as usize].clone(),
        accepting,
        delta,
        mu,
        nu,
        lookahead: None,
    }
}

fn encode_dfa(d: &Dfa) -> RawDfa {
    let name = |q: u32| q.to_string();
    let mut delta = Vec::new();
    for q in 0..d.num_states() as u32 {
        for a in 0..d.alphabet().len() {
            delta.push(RawDelta { from: name(q), symbol: d.alphabet().symbol(a).to_string(), to: name(d.next(q, a)) });
        }
    }
    RawDfa {
        states: (0..d.num_states() as u32).map(name).collect(),
        alphabet: d.alphabet().symbols().iter().map(|c| c.to_string()).collect(),
        start: name(d.start()),
        accepting: (0..d.num_states() as u32).filter(|&q| d.is_accepting(q)).map(name).collect(),
        delta,
    }
}

fn decode_dfa(raw: &RawDfa) -> Result<Dfa, CcraError> {
    let alphabet: Alphabet = parse_alphabet(&raw.alphabet)?;
    let states = name_index(&raw.states, "lookahead state")?;
    let k = alphabet.len();
    let mut trans: Vec<Option<u32>> = vec![None; raw.states.len() * k];
    for d in &raw.delta {
        let c = char::from_text(&d.symbol).ok_or_else(|| jerr(format!("bad symbol `{}`", d.symbol)))?;
        let a = alphabet.index(&c).ok_or_else(|| jerr(format!("symbol `{c}` not in alphabet")))?;
        trans[lookup(&states, &d.from, "lookahead state")? as usize * k + a] =
            Some(lookup(&states, &d.to, "lookahead state")?);
    }
    let trans: Vec<u32> = trans
        .into_iter()
        .map(|t| t.ok_or_else(|| jerr("lookahead transitions are not total")))
        .collect::<Result<_, _>>()?;
    let mut accept = vec![false; raw.states.len()];
    for s in &raw.accepting {
        accept[lookup(&states, s, "lookahead state")? as usize] = true;
    }
    if raw.states.is_empty() {
        return Err(jerr("lookahead has no states"));
    }
    Ok(Dfa::from_parts(alphabet, trans, accept, lookup(&states, &raw.start, "lookahead state")?))
}

impl<D: Monoid, S: SymbolText> Ccra<D, S> {
    pub fn to_json(&self) -> Json {
        serde_json::to_value(encode(self)).expect("machine encodes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("machine encodes")
    }

    /// Loads a machine, checking totality and copylessness.
    pub fn from_json(value: &Json) -> Result<Self, CcraError> {
        let raw: RawMachine = serde_json::from_value(value.clone()).map_err(|e| jerr(e.to_string()))?;
        let d = decode::<D, S>(&raw)?;
        Ccra::new(d.alphabet, d.states, d.registers, d.start, d.delta, d.mu, d.nu)
    }

    /// As [`Ccra::from_json`] without the copyless check, for inspecting
    /// violations with [`Ccra::validate_copyless`].
    pub fn from_json_unchecked(value: &Json) -> Result<Self, CcraError> {
        let raw: RawMachine = serde_json::from_value(value.clone()).map_err(|e| jerr(e.to_string()))?;
        let d = decode::<D, S>(&raw)?;
        Ccra::new_unchecked(d.alphabet, d.states, d.registers, d.start, d.delta, d.mu, d.nu)
    }

    pub fn from_json_str(text: &str) -> Result<Self, CcraError> {
        let v: Json = serde_json::from_str(text).map_err(|e| jerr(e.to_string()))?;
        Self::from_json(&v)
    }
}

impl<D: Monoid> Acra<D, char> {
    /// Loads an additive machine. Each right-hand side holds exactly one
    /// register and at most one constant.
    pub fn from_json(value: &Json) -> Result<Self, CcraError> {
        let raw: RawMachine = serde_json::from_value(value.clone()).map_err(|e| jerr(e.to_string()))?;
        let d = decode::<D, char>(&raw)?;
        let additive = |u: &Update<D>| -> Result<(u32, D), CcraError> {
            let regs: Vec<u32> = u.registers().collect();
            if regs.len() != 1 {
                return Err(jerr("additive updates name exactly one register"));
            }
            let c = u.erase_registers().eval(&[]);
            Ok((regs[0], c))
        };
        let mu =
            d.mu.iter().map(|row| row.iter().map(additive).collect::<Result<Vec<_>, _>>()).collect::<Result<_, _>>()?;
        let nu = d.nu.iter().map(|o| o.as_ref().map(additive).transpose()).collect::<Result<_, _>>()?;
        Acra::new(d.alphabet, d.states, d.registers, d.start, d.delta, mu, nu)
    }

    pub fn from_json_str(text: &str) -> Result<Self, CcraError> {
        let v: Json = serde_json::from_str(text).map_err(|e| jerr(e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn to_json(&self) -> Json {
        let mut raw = encode(&self.to_ccra());
        raw.kind = Some("acra".into());
        serde_json::to_value(raw).expect("machine encodes")
    }
}

impl<D: Monoid> Stage<D> {
    pub fn to_json(&self) -> Json {
        let mut raw = encode(&self.machine);
        raw.lookahead = Some(encode_dfa(&self.lookahead));
        serde_json::to_value(raw).expect("stage encodes")
    }

    /// Loads a stage. A plain machine file (no lookahead section) becomes a
    /// stage with a one-state lookahead.
    pub fn from_json(value: &Json) -> Result<Self, CcraError> {
        let raw: RawMachine = serde_json::from_value(value.clone()).map_err(|e| jerr(e.to_string()))?;
        match &raw.lookahead {
            None => Ok(Stage::plain(&Ccra::<D, char>::from_json(value)?)),
            Some(la) => {
                let lookahead = decode_dfa(la)?;
                let machine = Ccra::<D, Label>::from_json(value)?;
                if machine
                    .alphabet
                    .symbols()
                    .iter()
                    .any(|(c, l)| !lookahead.alphabet().contains(c) || *l as usize >= lookahead.num_states())
                {
                    return Err(jerr("machine labels do not match the lookahead automaton"));
                }
                Ok(Stage { lookahead, machine })
            }
        }
    }
}

impl<D: Monoid> Cascade<D> {
    pub fn to_json(&self) -> Json {
        let mut stages: Vec<Json> = self.front.iter().map(|s| s.to_json()).collect();
        stages.push(self.last.to_json());
        serde_json::json!({ "stages": stages })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("cascade encodes")
    }

    /// Loads `{"stages": [...]}` or a single machine file.
    pub fn from_json(value: &Json) -> Result<Self, CcraError> {
        let Some(stages) = value.get("stages").and_then(|s| s.as_array()) else {
            return Ok(Cascade::single(Stage::from_json(value)?));
        };
        let (last, front) = stages.split_last().ok_or_else(|| jerr("cascade has no stages"))?;
        let front = front.iter().map(Stage::<Word>::from_json).collect::<Result<Vec<_>, _>>()?;
        Cascade::new(front, Stage::from_json(last)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self, CcraError> {
        let v: Json = serde_json::from_str(text).map_err(|e| jerr(e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        for (i, st) in self.front.iter().enumerate() {
            out.push_str(&st.machine.to_dot(&format!("stage{i}")));
        }
        out.push_str(&self.last.machine.to_dot(&format!("stage{}", self.front.len())));
        out
    }
}

/// Reads the `monoid` field of a machine or cascade file, if present.
pub fn declared_monoid(value: &Json) -> Option<String> {
    let v = match value.get("stages").and_then(|s| s.as_array()) {
        Some(stages) => stages.last()?,
        None => value,
    };
    v.get("monoid").and_then(|m| m.as_str()).map(str::to_string)
}

/// Reads the `kind` field of a machine file, if present.
pub fn declared_kind(value: &Json) -> Option<String> {
    value.get("kind").and_then(|m| m.as_str()).map(str::to_string)
}

pub mod library {
    //! Hand-built machines for well-known functions.

    use super::*;
    use crate::monoid::Additive;
    use num_bigint::BigInt;

    type Int = Additive<BigInt>;

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn w(s: &str) -> Tok<Word> {
        Tok::Const(Word::new(s))
    }

    /// Three-register transducer for the shuffle function over {a, b}: `x`
    /// holds the output, `z` collects one `b` per `a` of the current block and
    /// `y` holds those of the previous block.
    pub fn shuffle_sst() -> Ccra<Word> {
        let (x, y, z) = (0u32, 1u32, 2u32);
        let keep = |v: u32| Update::reg(v);
        let on_a_first = vec![keep(x), keep(y), Update::new([Tok::Reg(z), w("b")])];
        let on_a = vec![Update::new([Tok::Reg(x), w("a")]), keep(y), Update::new([Tok::Reg(z), w("b")])];
        let on_b = vec![Update::new([Tok::Reg(x), Tok::Reg(y)]), keep(z), Update::zero()];
        // states q0, q1, q2; symbols a, b
        let delta = vec![0, 1, 1, 2, 1, 2];
        let mu = vec![on_a_first, on_b.clone(), on_a.clone(), on_b.clone(), on_a, on_b];
        let nu = vec![None, None, Some(keep(x))];
        Ccra::new(Alphabet::from_symbols("ab"), names(&["q0", "q1", "q2"]), names(&["x", "y", "z"]), 0, delta, mu, nu)
            .expect("shuffle transducer is well formed")
    }

    fn int(n: i64) -> Int {
        Additive(BigInt::from(n))
    }

    /// Two-state additive machine for the coffee bill over {#, C, S}.
    pub fn coffee_acra() -> Acra<Int> {
        let (x, y) = (0u32, 1u32);
        let a = Alphabet::from_symbols("CS#");
        // symbols sorted: '#', 'C', 'S'; states: no survey yet, survey filled
        let no_survey =
            vec![vec![(x, int(0)), (x, int(0))], vec![(x, int(2)), (y, int(1))], vec![(y, int(0)), (y, int(0))]];
        let survey =
            vec![vec![(x, int(0)), (x, int(0))], vec![(x, int(1)), (y, int(0))], vec![(x, int(0)), (y, int(0))]];
        let delta = vec![0, 0, 1, 0, 1, 1];
        let mu = no_survey.into_iter().chain(survey).collect();
        Acra::new(
            a,
            names(&["no_survey", "survey"]),
            names(&["x", "y"]),
            0,
            delta,
            mu,
            vec![Some((x, int(0))), Some((x, int(0)))],
        )
        .expect("coffee machine is well formed")
    }

    /// Additive machine over {a, b, e}: `a` adds one to both registers, `b`
    /// adds one to `y`, `e` moves `y + 1` into `x` and adds one to `y`. Outputs `x`.
    pub fn flow_acra() -> Acra<Int> {
        let (x, y) = (0u32, 1u32);
        let a = Alphabet::from_symbols("abe");
        let mu = vec![vec![(x, int(1)), (y, int(1))], vec![(x, int(0)), (y, int(1))], vec![(y, int(1)), (y, int(1))]];
        Acra::new(a, names(&["q0"]), names(&["x", "y"]), 0, vec![0, 0, 0], mu, vec![Some((x, int(0)))])
            .expect("flow machine is well formed")
    }

    /// One state, one register: `x := x a` on `a`. Outputs `x`.
    pub fn echo() -> Ccra<Word> {
        Ccra::new(
            Alphabet::from_symbols("a"),
            names(&["q"]),
            names(&["x"]),
            0,
            vec![0],
            vec![vec![Update::new([Tok::Reg(0), w("a")])]],
            vec![Some(Update::reg(0))],
        )
        .expect("echo machine is well formed")
    }

    /// Two states, two registers over {a, b}: `x` collects the input and `y`
    /// a marked copy of the `b`s seen since the last `a`; accepting after `b`,
    /// outputting `y x`.
    pub fn two_state() -> Ccra<Word> {
        let (x, y) = (0u32, 1u32);
        let on_a = vec![Update::new([Tok::Reg(x), w("a")]), Update::zero()];
        let on_b = vec![Update::new([Tok::Reg(x), w("b")]), Update::new([w("<"), Tok::Reg(y), w(">")])];
        Ccra::new(
            Alphabet::from_symbols("ab"),
            names(&["p", "q"]),
            names(&["x", "y"]),
            0,
            vec![0, 1, 0, 1],
            vec![on_a.clone(), on_b.clone(), on_a, on_b],
            vec![None, Some(Update::new([Tok::Reg(y), Tok::Reg(x)]))],
        )
        .expect("two-state machine is well formed")
    }

    /// Two registers whose values cross on every `a` (`x := y a`, `y := x`)
    /// while `b` appends to `x`. Outputs `x y`.
    pub fn crossing() -> Ccra<Word> {
        let (x, y) = (0u32, 1u32);
        let on_a = vec![Update::new([Tok::Reg(y), w("a")]), Update::reg(x)];
        let on_b = vec![Update::new([Tok::Reg(x), w("b")]), Update::reg(y)];
        Ccra::new(
            Alphabet::from_symbols("ab"),
            names(&["q"]),
            names(&["x", "y"]),
            0,
            vec![0, 0],
            vec![on_a, on_b],
            vec![Some(Update::new([Tok::Reg(x), Tok::Reg(y)]))],
        )
        .expect("crossing machine is well formed")
    }

    /// Three registers with the update `x := y z`, `y := x`, `z := ε` on `a`
    /// and `z := z b` on `b`. Outputs `x y z`.
    pub fn rotating() -> Ccra<Word> {
        let (x, y, z) = (0u32, 1u32, 2u32);
        let on_a = vec![Update::new([Tok::Reg(y), Tok::Reg(z)]), Update::reg(x), Update::zero()];
        let on_b = vec![Update::reg(x), Update::reg(y), Update::new([Tok::Reg(z), w("b")])];
        Ccra::new(
            Alphabet::from_symbols("ab"),
            names(&["q"]),
            names(&["x", "y", "z"]),
            0,
            vec![0, 0],
            vec![on_a, on_b],
            vec![Some(Update::new([Tok::Reg(x), Tok::Reg(y), Tok::Reg(z)]))],
        )
        .expect("rotating machine is well formed")
    }
}

#[cfg(test)]
mod tests {
    use super::library::*;
    use super::*;
    use crate::monoid::Additive;
    use num_bigint::BigInt;

    fn w(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn shuffle_transducer_runs() {
        let m = shuffle_sst();
        assert!(m.validate_copyless().is_empty());
        assert_eq!(m.eval(&w("abab")).unwrap(), Some(Word::new("ab")));
        assert_eq!(m.eval(&w("ab")).unwrap(), None);
        assert_eq!(m.eval(&[]).unwrap(), None);
    }

    #[test]
    fn additive_machines_run() {
        let int = |n: i64| Some(Additive(BigInt::from(n)));
        assert_eq!(coffee_acra().eval(&w("CCSC#C")).unwrap(), int(5));
        assert_eq!(coffee_acra().eval(&[]).unwrap(), int(0));
        assert_eq!(flow_acra().eval(&w("abeb")).unwrap(), int(3));
    }

    #[test]
    fn copyless_violations_are_classified() {
        let a = Alphabet::from_symbols("a");
        let names = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let shared = Ccra::<Word>::new_unchecked(
            a.clone(),
            names(&["q"]),
            names(&["x", "y"]),
            0,
            vec![0],
            vec![vec![Update::reg(0), Update::reg(0)]],
            vec![None],
        )
        .unwrap();
        let v = shared.validate_copyless();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Shared);
        let repeated = Ccra::<Word>::new_unchecked(
            a,
            names(&["q"]),
            names(&["x"]),
            0,
            vec![0],
            vec![vec![Update::new([Tok::Reg(0), Tok::Reg(0)])]],
            vec![None],
        )
        .unwrap();
        assert_eq!(repeated.validate_copyless()[0].kind, ViolationKind::Repeated);
    }

    #[test]
    fn update_canonical_form() {
        let u = Update::new([
            Tok::Const(Word::new("a")),
            Tok::Const(Word::new("")),
            Tok::Const(Word::new("b")),
            Tok::Reg(0),
        ]);
        assert_eq!(u.tokens(), &[Tok::Const(Word::new("ab")), Tok::Reg(0)]);
        assert_eq!(u.patches(), vec![Word::new("ab"), Word::new("")]);
        assert_eq!(Update::from_patches(&[0], &u.patches()), u);
    }

    #[test]
    fn shape_examples() {
        let s1 = Shape(vec![vec![0], vec![1, 2], vec![]]);
        let s2 = Shape(vec![vec![0, 2], vec![1], vec![]]);
        assert_eq!(s1.concat(&s2), s1);
        assert_eq!(s2.concat(&s1), s2);
        assert!(s1.is_normalized() && s2.is_normalized());
        assert!(!Shape(vec![vec![1, 2], vec![0], vec![]]).is_normalized());
        assert!(Shape::identity(3).is_normalized());
    }

    #[test]
    fn normalization_preserves_function() {
        for m in [shuffle_sst(), crossing(), rotating()] {
            let n = normalize(&m).unwrap();
            assert!(n.is_normalized());
            assert!(n.validate_copyless().is_empty());
            for s in Alphabet::from_symbols("ab").strings_up_to(6) {
                assert_eq!(n.eval(&s).unwrap(), m.eval(&s).unwrap());
            }
        }
    }

    #[test]
    fn labelling_of_empty_string() {
        let la = Dfa::universal(&Alphabet::from_symbols("ab"));
        assert_eq!(labelling(&la, &[]).unwrap(), vec![la.start()]);
    }

    #[test]
    fn json_roundtrip() {
        let m = shuffle_sst();
        let back = Ccra::<Word>::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let c = coffee_acra();
        let back = Acra::<Additive<BigInt>>::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn loader_rejects_partial_transitions() {
        let text = r#"{"states":["q"],"alphabet":["a","b"],"registers":[],"start":"q",
            "accepting":[],"delta":[{"from":"q","symbol":"a","to":"q"}]}"#;
        assert!(matches!(Ccra::<Word>::from_json_str(text), Err(CcraError::Json(_))));
    }
}
