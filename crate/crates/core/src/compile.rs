//! Compilation of expressions into machine cascades.
//!
//! Every machine-level combinator compiles to a single [`Stage`]: a copyless
//! machine reading the input labelled by a lookahead automaton. Composition
//! and chained sums compile to cascades of stages.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

use thiserror::Error;

use crate::ccra::{Cascade, Ccra, CcraError, Label, Stage, Tok, Update};
use crate::expr::{chained_via_marker, domain_dfa_cached, output_symbols, ExprError, FuncExpr, Node, E};
use crate::monoid::{Monoid, Word};
use crate::relang::{explore_with_keys, Alphabet, Dfa, Nfa, RelangError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("{0} below a machine combinator would need machine-level composition; use it at the top level or under composition only")]
    NestedPipeline(&'static str),
    #[error("no symbol is free to serve as the chained-sum marker")]
    NoMarker,
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Ccra(#[from] CcraError),
    #[error(transparent)]
    Relang(#[from] RelangError),
}

/// Compiles `e` into a cascade computing the same function.
pub fn compile<D: Monoid>(e: &E<D>) -> Result<Cascade<D>, CompileError> {
    let mut markers = MarkerSupply::default();
    compile_with(e, &mut markers)
}

#[derive(Default)]
struct MarkerSupply {
    next: u32,
}

impl MarkerSupply {
    /// Markers are drawn from `@` and then the private use area, skipping symbols in `avoid`.
    fn fresh(&mut self, avoid: &Alphabet) -> Result<char, CompileError> {
        loop {
            let c = if self.next == 0 { Some('@') } else { char::from_u32(0xE000 + self.next - 1) };
            self.next += 1;
            match c {
                Some(c) if !avoid.contains(&c) => return Ok(c),
                Some(_) => continue,
                None => return Err(CompileError::NoMarker),
            }
        }
    }
}

fn compile_with<D: Monoid>(e: &E<D>, markers: &mut MarkerSupply) -> Result<Cascade<D>, CompileError> {
    match e.node() {
        Node::Compose { g, f } => {
            let inner = compile_with(f, markers)?;
            Ok(compile_with(g, markers)?.after(inner)?)
        }
        Node::Chain { f, lang, left, .. } => {
            let marker = markers.fresh(e.alphabet())?;
            compile_with(&chained_via_marker(f, lang, *left, marker)?, markers)
        }
        Node::Reverse(f) => Ok(compile_with(f, markers)?.after(Cascade::single(reversal_stage(e.alphabet())))?),
        _ => Ok(Cascade::single(Compiler::default().stage(e)?)),
    }
}

/// Stage computing string reversal over `alphabet`.
pub fn reversal_stage(alphabet: &Alphabet) -> Stage<Word> {
    let k = alphabet.len();
    let mu = (0..k)
        .map(|a| vec![Update::new([Tok::Const(Word::new(alphabet.symbol(a).to_string())), Tok::Reg(0)])])
        .collect();
    let m =
        Ccra::new(alphabet.clone(), vec!["q".into()], vec!["x".into()], 0, vec![0; k], mu, vec![Some(Update::reg(0))])
            .expect("reversal machine is well formed");
    Stage::plain(&m)
}

/// Zero-register machine on `lang`'s states outputting `d` at accepting states.
pub fn compile_base<D: Monoid>(lang: &Dfa, d: D) -> Ccra<D> {
    let a = lang.alphabet();
    let n = lang.num_states();
    let delta = (0..n as u32).flat_map(|q| (0..a.len()).map(move |c| lang.next(q, c))).collect();
    let nu = (0..n as u32).map(|q| lang.is_accepting(q).then(|| Update::constant(d.clone()))).collect();
    Ccra::new(
        a.clone(),
        (0..n).map(|q| format!("q{q}")).collect(),
        Vec::new(),
        lang.start(),
        delta,
        vec![Vec::new(); n * a.len()],
        nu,
    )
    .expect("constant machine is well formed")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductKind {
    Choice,
    Sum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitKind {
    Right,
    Left,
}

fn register_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn label_alphabet(lookahead: &Dfa) -> Alphabet<Label> {
    let n = lookahead.num_states() as u32;
    Alphabet::new(lookahead.alphabet().symbols().iter().flat_map(|&c| (0..n).map(move |s| (c, s))))
}

/// A compiled stage seen from a machine that runs it on its own labels.
struct Part<'a, D: Monoid> {
    m: &'a Ccra<D, Label>,
    width: usize,
    shift: u32,
}

impl<'a, D: Monoid> Part<'a, D> {
    fn new(st: &'a Stage<D>, shift: u32) -> Self {
        Part { m: &st.machine, width: st.lookahead.num_states(), shift }
    }

    fn label(&self, a: usize, s: u32) -> usize {
        a * self.width + s as usize
    }

    fn step(&self, q: u32, a: usize, s: u32) -> (u32, Vec<Update<D>>) {
        let l = self.label(a, s);
        let ups = self.m.updates(q, l).iter().map(|u| u.rename(&|r| r + self.shift)).collect();
        (self.m.next(q, l), ups)
    }

    fn keep(&self) -> Vec<Update<D>> {
        (0..self.m.num_registers() as u32).map(|r| Update::reg(r + self.shift)).collect()
    }

    fn zeros(&self) -> Vec<Update<D>> {
        vec![Update::zero(); self.m.num_registers()]
    }

    fn output(&self, q: u32) -> Option<Update<D>> {
        self.m.output_expr(q).map(|u| u.rename(&|r| r + self.shift))
    }
}

fn name_states<K>(_: &K, i: usize) -> String {
    format!("q{i}")
}

/// Builds a stage over the lookahead whose states are `keys`; `step` receives
/// the symbol index and the key of the lookahead state after it.
fn build_stage<D, K, L, F, O>(lookahead: Dfa, keys: &[L], registers: usize, init: K, mut step: F, output: O) -> Stage<D>
where
    D: Monoid,
    K: Clone + Eq + Hash,
    F: FnMut(&K, usize, &L) -> (K, Vec<Update<D>>),
    O: FnMut(&K) -> Option<Update<D>>,
{
    let width = lookahead.num_states();
    let labels = label_alphabet(&lookahead);
    let machine = Ccra::explore(
        &labels,
        register_names(registers),
        init,
        |k, l| step(k, l / width, &keys[l % width]),
        output,
        name_states,
    );
    Stage { lookahead, machine }
}

/// Product of two stages: `Choice` prefers the first where both are defined;
/// `Sum` adds the outputs.
pub fn compile_product<D: Monoid>(kind: ProductKind, f: &Stage<D>, g: &Stage<D>) -> Result<Stage<D>, CompileError> {
    let (la, keys) = explore_with_keys(
        f.lookahead.alphabet(),
        (f.lookahead.start(), g.lookahead.start()),
        |&(x, y), a| (f.lookahead.next(x, a), g.lookahead.next(y, a)),
        |_| false,
    );
    if f.lookahead.alphabet() != g.lookahead.alphabet() {
        return Err(RelangError::AlphabetMismatch.into());
    }
    let nf = f.machine.num_registers();
    let pf = Part::new(f, 0);
    let pg = Part::new(g, nf as u32);
    Ok(build_stage(
        la,
        &keys,
        nf + g.machine.num_registers(),
        (f.machine.start(), g.machine.start()),
        |&(qf, qg), a, &(sf, sg)| {
            let (qf2, mut ups) = pf.step(qf, a, sf);
            let (qg2, ug) = pg.step(qg, a, sg);
            ups.extend(ug);
            ((qf2, qg2), ups)
        },
        |&(qf, qg)| match kind {
            ProductKind::Choice => pf.output(qf).or_else(|| pg.output(qg)),
            ProductKind::Sum => Some(pf.output(qf)?.concat(&pg.output(qg)?)),
        },
    ))
}

/// Lookahead information for splitting the input into a piece for `f` and a
/// remainder. `pending` pairs a domain state `d` of `f` with the lookahead
/// state `r` that `f` would see if its piece, started from `d`, ended at a
/// point where the rest of the input is in the remainder language.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
struct PieceLookahead {
    rest: u32,
    pending: Vec<(u32, u32)>,
}

/// Steps of the piece lookahead, reading the input right to left.
struct PieceTracker<'a> {
    f_dom: &'a Dfa,
    f_la: &'a Dfa,
    rest_rev: &'a Dfa,
}

impl PieceTracker<'_> {
    fn closing(&self, rest: u32) -> Vec<(u32, u32)> {
        if !self.rest_rev.is_accepting(rest) {
            return Vec::new();
        }
        (0..self.f_dom.num_states() as u32)
            .filter(|&d| self.f_dom.is_accepting(d))
            .map(|d| (d, self.f_la.start()))
            .collect()
    }

    fn start(&self) -> PieceLookahead {
        let rest = self.rest_rev.start();
        PieceLookahead { rest, pending: self.closing(rest) }
    }

    fn step(&self, k: &PieceLookahead, a: usize) -> PieceLookahead {
        let rest = self.rest_rev.next(k.rest, a);
        let mut pending = self.closing(rest);
        // (d, r') continues to (d0, δ(r', a)) for every d0 with δ(d0, a) = d.
        for d0 in 0..self.f_dom.num_states() as u32 {
            let d = self.f_dom.next(d0, a);
            for &(_, r) in k.pending.iter().filter(|&&(x, _)| x == d) {
                pending.push((d0, self.f_la.next(r, a)));
            }
        }
        pending.sort_unstable();
        pending.dedup();
        PieceLookahead { rest, pending }
    }

    /// The unique lookahead state for `f` after reading a symbol that leads to domain state `d`.
    fn lookup(&self, k: &PieceLookahead, d: u32) -> Option<u32> {
        let mut it = k.pending.iter().filter(|&&(x, _)| x == d).map(|&(_, r)| r);
        let r = it.next()?;
        it.next().is_none().then_some(r)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum SplitState {
    First { qf: u32, d: u32, q3: u32 },
    Second { qg: u32, q3: u32 },
    Dead,
}

/// Unambiguous split `σ₁σ₂`: runs `f` on `σ₁`, banks its output in a `total`
/// register at the unique switch point, then runs `g` on `σ₂`.
pub fn compile_split<D: Monoid>(
    kind: SplitKind,
    f: &Stage<D>,
    g: &Stage<D>,
    f_dom: &Dfa,
    g_dom: &Dfa,
) -> Result<Stage<D>, CompileError> {
    let g_rev = g_dom.reverse().minimize();
    let tracker = PieceTracker { f_dom, f_la: &f.lookahead, rest_rev: &g_rev };
    let (la, keys) = explore_with_keys(
        f.lookahead.alphabet(),
        (g.lookahead.start(), tracker.start()),
        |(rg, k), a| (g.lookahead.next(*rg, a), tracker.step(k, a)),
        |_| false,
    );
    let whole = f_dom.unambiguous_concat(g_dom)?.minimize();
    let nf = f.machine.num_registers();
    let ng = g.machine.num_registers();
    let total = (nf + ng) as u32;
    let pf = Part::new(f, 0);
    let pg = Part::new(g, nf as u32);
    let g_empty = g.machine.output_expr(g.machine.start()).map(|u| u.erase_registers());
    let join = |first: Update<D>, second: Update<D>| match kind {
        SplitKind::Right => first.concat(&second),
        SplitKind::Left => second.concat(&first),
    };
    let keep_all = |mut ups: Vec<Update<D>>| {
        ups.push(Update::reg(total));
        ups
    };
    Ok(build_stage(
        la,
        &keys,
        nf + ng + 1,
        SplitState::First { qf: f.machine.start(), d: f_dom.start(), q3: whole.start() },
        |st, a, (rg, k)| match *st {
            SplitState::First { qf, d, q3 } => {
                let q3 = whole.next(q3, a);
                if f_dom.is_accepting(d) && g_rev.is_accepting(g_rev.next(k.rest, a)) {
                    let Some(banked) = pf.output(qf) else {
                        return (SplitState::Dead, keep_all([pf.keep(), pg.keep()].concat()));
                    };
                    let (qg, ug) = pg.step(g.machine.start(), a, *rg);
                    let ug: Vec<Update<D>> = ug.iter().map(|u| u.erase_registers()).collect();
                    let ups = [pf.zeros(), ug, vec![banked]].concat();
                    return (SplitState::Second { qg, q3 }, ups);
                }
                let d2 = f_dom.next(d, a);
                match tracker.lookup(k, d2) {
                    Some(r) => {
                        let (qf2, uf) = pf.step(qf, a, r);
                        (SplitState::First { qf: qf2, d: d2, q3 }, keep_all([uf, pg.keep()].concat()))
                    }
                    None => (SplitState::Dead, keep_all([pf.keep(), pg.keep()].concat())),
                }
            }
            SplitState::Second { qg, q3 } => {
                let (qg2, ug) = pg.step(qg, a, *rg);
                (SplitState::Second { qg: qg2, q3: whole.next(q3, a) }, keep_all([pf.keep(), ug].concat()))
            }
            SplitState::Dead => (SplitState::Dead, keep_all([pf.keep(), pg.keep()].concat())),
        },
        |st| match *st {
            SplitState::First { qf, q3, .. } if whole.is_accepting(q3) => Some(join(pf.output(qf)?, g_empty.clone()?)),
            SplitState::Second { qg, q3 } if whole.is_accepting(q3) => Some(join(Update::reg(total), pg.output(qg)?)),
            _ => None,
        },
    ))
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum IterState {
    Start,
    Piece { qf: u32, d: u32, q3: u32 },
    Dead,
}

/// Unambiguous iteration: runs `f` on each piece, banking each output into a
/// `total` register (appended on the right, or on the left for `Left`).
pub fn compile_iter<D: Monoid>(kind: SplitKind, f: &Stage<D>, f_dom: &Dfa) -> Result<Stage<D>, CompileError> {
    let star_rev = f_dom.star().reverse().minimize();
    let tracker = PieceTracker { f_dom, f_la: &f.lookahead, rest_rev: &star_rev };
    let (la, keys) = explore_with_keys(f.lookahead.alphabet(), tracker.start(), |k, a| tracker.step(k, a), |_| false);
    let whole = f_dom.unambiguous_star().minimize();
    let nf = f.machine.num_registers();
    let total = nf as u32;
    let pf = Part::new(f, 0);
    let bank = |t: Update<D>, piece: Update<D>| match kind {
        SplitKind::Right => t.concat(&piece),
        SplitKind::Left => piece.concat(&t),
    };
    let dead = || [pf.keep(), vec![Update::reg(total)]].concat();
    // Begins a piece at symbol `a`, with `carry` as the new total.
    let begin = |a: usize, k: &PieceLookahead, q3: u32, carry: Update<D>| {
        let d = f_dom.next(f_dom.start(), a);
        match tracker.lookup(k, d) {
            Some(r) => {
                let (qf, uf) = pf.step(f.machine.start(), a, r);
                let uf: Vec<Update<D>> = uf.iter().map(|u| u.erase_registers()).collect();
                (IterState::Piece { qf, d, q3 }, [uf, vec![carry]].concat())
            }
            None => (IterState::Dead, dead()),
        }
    };
    Ok(build_stage(
        la,
        &keys,
        nf + 1,
        IterState::Start,
        |st, a, k| match *st {
            IterState::Start => begin(a, k, whole.next(whole.start(), a), Update::reg(total)),
            IterState::Piece { qf, d, q3 } => {
                let q3 = whole.next(q3, a);
                if f_dom.is_accepting(d) && star_rev.is_accepting(star_rev.next(k.rest, a)) {
                    return match pf.output(qf) {
                        Some(out) => begin(a, k, q3, bank(Update::reg(total), out)),
                        None => (IterState::Dead, dead()),
                    };
                }
                let d2 = f_dom.next(d, a);
                match tracker.lookup(k, d2) {
                    Some(r) => {
                        let (qf2, uf) = pf.step(qf, a, r);
                        (IterState::Piece { qf: qf2, d: d2, q3 }, [uf, vec![Update::reg(total)]].concat())
                    }
                    None => (IterState::Dead, dead()),
                }
            }
            IterState::Dead => (IterState::Dead, dead()),
        },
        |st| match *st {
            IterState::Start => Some(Update::zero()),
            IterState::Piece { qf, q3, .. } if whole.is_accepting(q3) => Some(bank(Update::reg(total), pf.output(qf)?)),
            _ => None,
        },
    ))
}

/// Cascade for a chained sum (left-chained when `kind` is `Left`), built from
/// the marker pipeline.
pub fn compile_chained<D: Monoid>(kind: SplitKind, f: &E<D>, lang: &Dfa) -> Result<Cascade<D>, CompileError> {
    let e = FuncExpr::chain(f.clone(), lang, kind == SplitKind::Left)?;
    compile(&e)
}

/// Per-compilation state: memoized stages and domains, keyed by node address.
/// `keep` holds rewritten nodes so their addresses stay unique.
struct Compiler<D: Monoid> {
    stages: HashMap<usize, Stage<D>>,
    domains: HashMap<usize, Dfa>,
    reversed: HashMap<usize, E<D>>,
    keep: Vec<E<D>>,
}

impl<D: Monoid> Default for Compiler<D> {
    fn default() -> Self {
        Compiler { stages: HashMap::new(), domains: HashMap::new(), reversed: HashMap::new(), keep: Vec::new() }
    }
}

impl<D: Monoid> Compiler<D> {
    fn domain(&mut self, e: &E<D>) -> Result<Dfa, CompileError> {
        Ok(domain_dfa_cached(e, &mut self.domains)?)
    }

    fn stage(&mut self, e: &E<D>) -> Result<Stage<D>, CompileError> {
        let key = Arc::as_ptr(e) as usize;
        if let Some(s) = self.stages.get(&key) {
            return Ok(s.clone());
        }
        let st = match e.node() {
            Node::Const { lang, value, .. } => Stage::plain(&compile_base(lang, value.clone())),
            Node::Choice(f, g) => compile_product(ProductKind::Choice, &self.stage(f)?, &self.stage(g)?)?,
            Node::Sum(f, g) => compile_product(ProductKind::Sum, &self.stage(f)?, &self.stage(g)?)?,
            Node::Split { f, g, left } => {
                let (sf, sg) = (self.stage(f)?, self.stage(g)?);
                let (df, dg) = (self.domain(f)?, self.domain(g)?);
                compile_split(split_kind(*left), &sf, &sg, &df, &dg)?
            }
            Node::Iter { f, left } => {
                let sf = self.stage(f)?;
                let df = self.domain(f)?;
                compile_iter(split_kind(*left), &sf, &df)?
            }
            Node::Reverse(f) => {
                let r = self.reverse(f)?;
                self.stage(&r)?
            }
            Node::Chain { .. } => return Err(CompileError::NestedPipeline("a chained sum")),
            Node::Compose { .. } => return Err(CompileError::NestedPipeline("a composition")),
        };
        self.stages.insert(key, st.clone());
        Ok(st)
    }

    /// An expression for `σ ↦ e(reverse σ)` with the reversal pushed to the constants.
    fn reverse(&mut self, e: &E<D>) -> Result<E<D>, CompileError> {
        let key = Arc::as_ptr(e) as usize;
        if let Some(r) = self.reversed.get(&key) {
            return Ok(r.clone());
        }
        let r = match e.node() {
            Node::Const { lang, value, .. } => FuncExpr::constant(&lang.reverse(), value.clone()),
            Node::Choice(f, g) => FuncExpr::choice(self.reverse(f)?, self.reverse(g)?)?,
            Node::Sum(f, g) => FuncExpr::sum(self.reverse(f)?, self.reverse(g)?)?,
            Node::Split { f, g, left } => FuncExpr::split(self.reverse(g)?, self.reverse(f)?, !left)?,
            Node::Iter { f, left } => FuncExpr::iter(self.reverse(f)?, !left),
            Node::Chain { f, lang, left, .. } => FuncExpr::chain(self.reverse(f)?, &lang.reverse(), !left)?,
            Node::Reverse(f) => f.clone(),
            Node::Compose { g, f } => FuncExpr::compose(g.clone(), Compiler::<Word>::default().reverse(f)?)?,
        };
        self.keep.push(r.clone());
        self.reversed.insert(key, r.clone());
        Ok(r)
    }
}

fn split_kind(left: bool) -> SplitKind {
    if left {
        SplitKind::Left
    } else {
        SplitKind::Right
    }
}

/// The strings `σ` on which `f` is defined with `f(σ)` in `out`.
pub fn compose_domain(out: &Dfa, f: &E<Word>) -> Result<Dfa, ExprError> {
    let cascade = compile(f).map_err(|e| ExprError::Unsupported(e.to_string()))?;
    for c in output_symbols(f) {
        if !out.alphabet().contains(&c) {
            return Err(ExprError::ComposeOutput(c));
        }
    }
    cascade_preimage(&cascade, out).map_err(|e| ExprError::Unsupported(e.to_string()))
}

/// Inputs on which the cascade is defined with an output in `out`.
pub fn cascade_preimage(c: &Cascade<Word>, out: &Dfa) -> Result<Dfa, CompileError> {
    let mut lang = stage_preimage(c.last(), out);
    for st in c.front().iter().rev() {
        lang = stage_preimage(st, &lang);
    }
    Ok(lang)
}

const NO_STATE: u32 = u32::MAX;

/// State transformer of `out` for a constant string; `NO_STATE` when the
/// string leaves the alphabet of `out`.
fn word_transformer(out: &Dfa, w: &Word) -> Vec<u32> {
    let chars = w.chars();
    (0..out.num_states() as u32).map(|q| out.run_from(q, &chars).unwrap_or(NO_STATE)).collect()
}

fn then(first: &[u32], second: &[u32]) -> Vec<u32> {
    first.iter().map(|&q| if q == NO_STATE { NO_STATE } else { second[q as usize] }).collect()
}

/// Inputs on which one stage is defined with an output in `out`.
///
/// A deterministic automaton over labels tracks the machine state and, for
/// every register, the map its current value induces on the states of `out`.
/// An automaton over the plain input then guesses the lookahead state at
/// each position and checks the guess at the end.
fn stage_preimage(st: &Stage<Word>, out: &Dfa) -> Dfa {
    let m = &st.machine;
    let n = out.num_states() as u32;
    let identity: Vec<u32> = (0..n).collect();
    let transform = |regs: &[Vec<u32>], u: &Update<Word>| -> Vec<u32> {
        u.tokens().iter().fold(identity.clone(), |acc, t| match t {
            Tok::Reg(r) => then(&acc, &regs[*r as usize]),
            Tok::Const(w) => then(&acc, &word_transformer(out, w)),
        })
    };
    let init = (m.start(), vec![identity.clone(); m.num_registers()]);
    let labels = crate::relang::explore(
        m.alphabet(),
        init,
        |(q, regs), l| (m.next(*q, l), m.updates(*q, l).iter().map(|u| transform(regs, u)).collect()),
        |(q, regs)| match m.output_expr(*q) {
            Some(u) => {
                let t = transform(regs, u)[out.start() as usize];
                t != NO_STATE && out.is_accepting(t)
            }
            None => false,
        },
    );
    let la = &st.lookahead;
    let width = la.num_states() as u32;
    let k = la.alphabet().len();
    let mut edges = Vec::new();
    for kq in 0..labels.num_states() as u32 {
        for s_next in 0..width {
            for a in 0..k {
                let s_here = la.next(s_next, a);
                let kq2 = labels.next(kq, a * width as usize + s_next as usize);
                edges.push((kq * width + s_here, a as u32, kq2 * width + s_next));
            }
        }
    }
    let num = labels.num_states() * width as usize;
    let starts = (0..width).map(|s| labels.start() * width + s).collect();
    let accept = (0..num as u32).map(|x| x % width == la.start() && labels.is_accepting(x / width)).collect();
    Nfa::from_edges(la.alphabet().clone(), num, edges, starts, accept).determinize().minimize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::eval_naive;
    use crate::expr::library::*;
    use crate::relang::regex_dfa;

    fn sweep<D: Monoid>(e: &E<D>, max_len: usize) {
        let c = compile(e).unwrap();
        for st in c.front() {
            assert!(st.validate_copyless().is_empty());
        }
        assert!(c.last().validate_copyless().is_empty());
        for s in e.alphabet().strings_up_to(max_len) {
            assert_eq!(c.eval(&s).unwrap(), eval_naive(e, &s).unwrap(), "on {:?}", s.iter().collect::<String>());
        }
    }

    #[test]
    fn base_machines() {
        let a = Alphabet::from_symbols("ab");
        let m = compile_base(&regex_dfa("ab", &a).unwrap(), Word::new("x"));
        assert_eq!(m.eval(&['a', 'b']).unwrap(), Some(Word::new("x")));
        assert_eq!(m.eval(&['a']).unwrap(), None);
    }

    #[test]
    fn machine_level_examples() {
        sweep(&count_a(), 8);
        sweep(&copy(), 6);
        sweep(&reverse(), 6);
        sweep(&strip(), 5);
        sweep(&swap(), 5);
        sweep(&indicator("ab", "a"), 5);
    }

    #[test]
    fn ambiguous_split_is_undefined() {
        let a = Alphabet::from_symbols("a");
        let f = FuncExpr::constant_regex(&a, "a*", Word::new("x")).unwrap();
        let e = FuncExpr::split(f.clone(), f, false).unwrap();
        assert_eq!(compile(&e).unwrap().eval(&['a']).unwrap(), None);
        sweep(&e, 4);
    }

    #[test]
    fn nested_reverse_is_pushed_down() {
        let e = FuncExpr::sum(reverse(), FuncExpr::reverse(reverse())).unwrap();
        sweep(&e, 5);
    }

    #[test]
    fn top_level_reverse_uses_a_reversal_stage() {
        let e = FuncExpr::reverse(id("abc"));
        let c = compile(&e).unwrap();
        assert_eq!(c.num_stages(), 2);
        assert_eq!(c.eval(&['a', 'b', 'c']).unwrap(), Some(Word::new("cba")));
    }

    #[test]
    fn composed_domain_is_a_preimage() {
        let e = shuffle_composed();
        let d = crate::expr::domain_dfa(&e).unwrap();
        for s in e.alphabet().strings_up_to(6) {
            assert_eq!(d.accepts(&s), eval_naive(&e, &s).unwrap().is_some());
        }
    }
}
