//! Expressions from copyless machines over arbitrary monoids.
//!
//! The machine is normalized first. Paths are then summarized in the manner
//! of state elimination: for every pair of states, every elimination level
//! and every shape, an [`ExprVector`] gives each constant slot of the
//! composite update as an expression of the input. Loops at the eliminated
//! state are summarized by splitting them into blocks that first reach the
//! final support, which makes every slot either local to one block, local to
//! a pair of adjacent blocks (a chained sum), or local to the last block and
//! the remainder.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::ccra::{normalize, Ccra, CcraError, Shape};
use crate::expr::{ExprError, FuncExpr, E};
use crate::monoid::Monoid;
use crate::relang::{explore, Alphabet, Dfa};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("machine is not normalized")]
    NotNormalized,
    #[error("choice of expression vectors with overlapping domains")]
    Overlap,
    #[error("shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch(Shape, Shape),
    #[error(transparent)]
    Ccra(#[from] CcraError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Position of two shapes in the support order: a shape is below another
/// when its support is a strict superset.
impl From<crate::relang::RelangError> for ExtractError {
    fn from(e: crate::relang::RelangError) -> Self {
        ExtractError::Expr(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeOrder {
    Less,
    EqualSupport,
    Greater,
    Incomparable,
}

pub fn shape_concat(s1: &Shape, s2: &Shape) -> Shape {
    s1.concat(s2)
}

pub fn shape_order(s1: &Shape, s2: &Shape) -> ShapeOrder {
    let (a, b) = (s1.support(), s2.support());
    if a == b {
        ShapeOrder::EqualSupport
    } else if a & b == b {
        ShapeOrder::Less
    } else if a & b == a {
        ShapeOrder::Greater
    } else {
        ShapeOrder::Incomparable
    }
}

/// True iff `supp(s1) ⊋ supp(s2)`.
fn strictly_below(s1: u64, s2: u64) -> bool {
    s1 != s2 && s1 & s2 == s2
}

/// Strings whose path from `q` ends in `q2` with shape `shape`, visiting only
/// states with index below `level` in between. The empty path counts when
/// `q == q2` and the shape is the identity.
pub fn strings_with_shape<D: Monoid>(m: &Ccra<D>, q: u32, q2: u32, shape: &Shape, level: usize) -> Dfa {
    #[derive(Clone, PartialEq, Eq, Hash)]
    enum Key {
        Dead,
        At { state: u32, shape: Shape, nonempty: bool },
    }
    let n = m.num_registers();
    explore(
        m.alphabet(),
        Key::At { state: q, shape: Shape::identity(n), nonempty: false },
        |k, a| match k {
            Key::At { state, shape, nonempty } if !*nonempty || (*state as usize) < level => Key::At {
                state: m.next(*state, a),
                shape: shape.concat(&Shape::of_updates(m.updates(*state, a))),
                nonempty: true,
            },
            _ => Key::Dead,
        },
        |k| matches!(k, Key::At { state, shape: s, .. } if *state == q2 && s == shape),
    )
    .minimize()
}

/// Expressions for the constant slots of a shape, with a common domain.
///
/// `rows[v][k]` is slot `k` of register `v`: the constant before the `k`-th
/// register of `shape.row(v)`, the last slot trailing. Every component is
/// defined exactly on `domain`.
#[derive(Clone, Debug)]
pub struct ExprVector<D: Monoid> {
    pub shape: Shape,
    pub rows: Vec<Vec<E<D>>>,
    pub domain: Dfa,
}

impl<D: Monoid> ExprVector<D> {
    pub fn component(&self, v: u32, k: usize) -> &E<D> {
        &self.rows[v as usize][k]
    }

    /// Evaluates every component on `sigma`; `None` outside the domain.
    pub fn eval(&self, sigma: &[char]) -> Result<Option<Vec<Vec<D>>>, ExprError> {
        if !self.domain.accepts(sigma) {
            return Ok(None);
        }
        let mut out = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let mut vals = Vec::with_capacity(row.len());
            for e in row {
                match crate::expr::eval_naive(e, sigma)? {
                    Some(d) => vals.push(d),
                    None => return Ok(None),
                }
            }
            out.push(vals);
        }
        Ok(Some(out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftMode {
    Restrict,
    LeftShift,
    RightShift,
}

enum Piece<D: Monoid> {
    Expr(E<D>),
    Reg(u32),
}

/// Builds expressions over one alphabet, sharing constant nodes.
pub struct VectorBuilder<D: Monoid> {
    alphabet: Alphabet,
    consts: HashMap<(Dfa, D), E<D>>,
    all: Dfa,
}

impl<D: Monoid> VectorBuilder<D> {
    pub fn new(alphabet: &Alphabet) -> Self {
        VectorBuilder { alphabet: alphabet.clone(), consts: HashMap::new(), all: Dfa::universal(alphabet) }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn konst(&mut self, lang: &Dfa, d: D) -> E<D> {
        self.consts.entry((lang.clone(), d)).or_insert_with_key(|(l, d)| FuncExpr::constant(l, d.clone())).clone()
    }

    fn zero(&mut self, lang: &Dfa) -> E<D> {
        self.konst(lang, D::zero())
    }

    fn restrict(&mut self, f: E<D>, lang: &Dfa) -> Result<E<D>, ExprError> {
        let c = self.zero(lang);
        FuncExpr::sum(f, c)
    }

    fn lshift(&mut self, f: E<D>, lang: &Dfa) -> Result<E<D>, ExprError> {
        let c = self.zero(lang);
        FuncExpr::split(f, c, false)
    }

    fn rshift(&mut self, lang: &Dfa, f: E<D>) -> Result<E<D>, ExprError> {
        let c = self.zero(lang);
        FuncExpr::split(c, f, false)
    }

    fn sum_all(&mut self, items: Vec<E<D>>) -> Result<E<D>, ExprError> {
        FuncExpr::sum_all(items)
    }

    /// Groups pieces into slots: the sums of the expression runs between registers.
    fn collect(&mut self, pieces: Vec<Piece<D>>) -> Result<(Vec<u32>, Vec<E<D>>), ExprError> {
        let mut regs = Vec::new();
        let mut slots = Vec::new();
        let mut run: Vec<E<D>> = Vec::new();
        for p in pieces {
            match p {
                Piece::Expr(e) => run.push(e),
                Piece::Reg(r) => {
                    regs.push(r);
                    slots.push(self.sum_all(std::mem::take(&mut run))?);
                }
            }
        }
        slots.push(self.sum_all(run)?);
        Ok((regs, slots))
    }

    /// A vector whose components are first restricted to `domain`. `None`
    /// when the domain is empty.
    pub fn restricted(
        &mut self,
        shape: Shape,
        rows: Vec<Vec<E<D>>>,
        domain: Dfa,
    ) -> Result<Option<ExprVector<D>>, ExprError> {
        let domain = domain.minimize();
        if domain.is_empty() {
            return Ok(None);
        }
        let rows = rows
            .into_iter()
            .map(|row| row.into_iter().map(|e| self.restrict(e, &domain)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        Ok(Some(ExprVector { shape, rows, domain }))
    }

    /// Componentwise restriction or shift by `lang`.
    pub fn ev_restrict_shift(
        &mut self,
        a: &ExprVector<D>,
        mode: ShiftMode,
        lang: &Dfa,
    ) -> Result<Option<ExprVector<D>>, ExprError> {
        let domain = match mode {
            ShiftMode::Restrict => a.domain.intersect(lang)?,
            ShiftMode::LeftShift => a.domain.unambiguous_concat(lang)?,
            ShiftMode::RightShift => lang.unambiguous_concat(&a.domain)?,
        }
        .minimize();
        if domain.is_empty() {
            return Ok(None);
        }
        let mut rows = Vec::with_capacity(a.rows.len());
        for row in &a.rows {
            let mut out = Vec::with_capacity(row.len());
            for e in row {
                out.push(match mode {
                    ShiftMode::Restrict => self.restrict(e.clone(), lang)?,
                    ShiftMode::LeftShift => self.lshift(e.clone(), lang)?,
                    ShiftMode::RightShift => self.rshift(lang, e.clone())?,
                });
            }
            rows.push(out);
        }
        Ok(Some(ExprVector { shape: a.shape.clone(), rows, domain }))
    }

    /// Summary of the concatenation of a path summarized by `a` with one
    /// summarized by `b`: `b`'s rows with `a`'s rows substituted for the
    /// registers, concatenation read as sum.
    pub fn ev_concat(&mut self, a: &ExprVector<D>, b: &ExprVector<D>) -> Result<Option<ExprVector<D>>, ExprError> {
        let domain = a.domain.unambiguous_concat(&b.domain)?.minimize();
        if domain.is_empty() {
            return Ok(None);
        }
        let mut left: Vec<Vec<Option<E<D>>>> = a.rows.iter().map(|r| vec![None; r.len()]).collect();
        let mut rows = Vec::with_capacity(b.rows.len());
        for (v, brow) in b.rows.iter().enumerate() {
            let regs = b.shape.row(v as u32);
            let mut pieces = Vec::new();
            for (k, e) in brow.iter().enumerate() {
                pieces.push(Piece::Expr(self.rshift(&a.domain, e.clone())?));
                if let Some(&u) = regs.get(k) {
                    let arow = &a.rows[u as usize];
                    let aregs = a.shape.row(u);
                    for (j, f) in arow.iter().enumerate() {
                        let shifted = match &left[u as usize][j] {
                            Some(s) => s.clone(),
                            None => {
                                let s = self.lshift(f.clone(), &b.domain)?;
                                left[u as usize][j] = Some(s.clone());
                                s
                            }
                        };
                        pieces.push(Piece::Expr(shifted));
                        if let Some(&w) = aregs.get(j) {
                            pieces.push(Piece::Reg(w));
                        }
                    }
                }
            }
            let (_, slots) = self.collect(pieces)?;
            rows.push(slots);
        }
        Ok(Some(ExprVector { shape: a.shape.concat(&b.shape), rows, domain }))
    }

    /// Componentwise choice of two vectors for the same shape with disjoint domains.
    pub fn ev_choice(&mut self, a: &ExprVector<D>, b: &ExprVector<D>) -> Result<ExprVector<D>, ExtractError> {
        if a.shape != b.shape {
            return Err(ExtractError::ShapeMismatch(a.shape.clone(), b.shape.clone()));
        }
        if !a.domain.intersect(&b.domain).map_err(ExprError::from)?.is_empty() {
            return Err(ExtractError::Overlap);
        }
        self.choice_all(vec![a.clone(), b.clone()])
    }

    /// Choice over vectors for one shape whose domains are disjoint by construction.
    fn choice_all(&mut self, items: Vec<ExprVector<D>>) -> Result<ExprVector<D>, ExtractError> {
        let mut items = items;
        if items.len() == 1 {
            return Ok(items.pop().unwrap());
        }
        let shape = items[0].shape.clone();
        let mut domain = items[0].domain.clone();
        for it in &items[1..] {
            domain = domain.union(&it.domain).map_err(ExprError::from)?;
        }
        let rows = (0..items[0].rows.len())
            .map(|v| {
                (0..items[0].rows[v].len())
                    .map(|k| FuncExpr::choice_all(items.iter().map(|it| it.rows[v][k].clone()).collect()))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        Ok(ExprVector { shape, rows, domain: domain.minimize() })
    }

    /// The slots that a block summarized by `later` adds before (`leading`) or
    /// after register `v`'s own old value, with the registers it reads taken
    /// from the preceding block summarized by `earlier`, where they are reset.
    fn added_part(
        &mut self,
        earlier: &ExprVector<D>,
        later: &ExprVector<D>,
        v: u32,
        leading: bool,
    ) -> Result<E<D>, ExprError> {
        let regs = later.shape.row(v);
        let t = regs.iter().position(|&u| u == v).expect("support register occurs in its own row");
        let range = if leading { 0..t } else { t + 1..regs.len() };
        let first = if leading { 0 } else { t + 1 };
        let mut items = vec![self.rshift(&earlier.domain, later.rows[v as usize][first].clone())?];
        for idx in range {
            let u = regs[idx];
            debug_assert!(earlier.shape.row(u).is_empty(), "registers flowing in are reset by the preceding block");
            items.push(self.lshift(earlier.rows[u as usize][0].clone(), &later.domain)?);
            items.push(self.rshift(&earlier.domain, later.rows[v as usize][idx + 1].clone())?);
        }
        self.sum_all(items)
    }
}

/// Summaries of nonempty paths between each pair of states at one
/// elimination level: `table[q * n + q2]` maps shapes to vectors.
pub type Table<D> = Vec<BTreeMap<Shape, ExprVector<D>>>;

/// Single-transition summaries: slot `k` of register `v` is the constant
/// `k` of the update of `v`, on the one-letter string.
pub fn build_r0<D: Monoid>(b: &mut VectorBuilder<D>, m: &Ccra<D>) -> Result<Table<D>, ExtractError> {
    if !m.is_normalized() {
        return Err(ExtractError::NotNormalized);
    }
    let n = m.num_states();
    let mut groups: BTreeMap<(u32, u32, Shape), Vec<ExprVector<D>>> = BTreeMap::new();
    for q in 0..n as u32 {
        for a in 0..m.alphabet().len() {
            let c = *m.alphabet().symbol(a);
            let lang = Dfa::word(m.alphabet(), &[c]).minimize();
            let ups = m.updates(q, a);
            let shape = Shape::of_updates(ups);
            let rows = ups.iter().map(|u| u.patches().into_iter().map(|d| b.konst(&lang, d)).collect()).collect();
            groups.entry((q, m.next(q, a), shape.clone())).or_default().push(ExprVector { shape, rows, domain: lang });
        }
    }
    let mut table: Table<D> = vec![BTreeMap::new(); n * n];
    for ((q, q2, shape), items) in groups {
        table[q as usize * n + q2 as usize].insert(shape, b.choice_all(items)?);
    }
    Ok(table)
}

/// Summaries of loops at one pivot state, built in decreasing order of support.
///
/// `blocks` summarizes single blocks: nonempty loops at the pivot that do not
/// revisit it. `loops[S]` summarizes all sequences of blocks with shape `S`,
/// the empty sequence included under the identity shape.
///
/// A loop with support `U` factors uniquely into pieces followed by a loop of
/// strictly larger support. `first[S]` summarizes the pieces with shape `S`:
/// block sequences with support `U` none of whose proper prefixes has support
/// `U`. Pieces factor further into groups: the shortest piece sequences after
/// which no register outside `U` holds a register value. Every sequence of
/// `|V \ U|` pieces contains a group, and a group followed by any loop with
/// support containing `U` keeps the group's shape. `groups[S]` summarizes the
/// groups with shape `S`.
pub struct LoopBuilder<'t, D: Monoid> {
    blocks: &'t BTreeMap<Shape, ExprVector<D>>,
    registers: usize,
    pub loops: BTreeMap<Shape, ExprVector<D>>,
    pub first: BTreeMap<Shape, ExprVector<D>>,
    pub groups: BTreeMap<Shape, ExprVector<D>>,
    /// First-block candidates by support: (prefix loop shape, block shape).
    pending: BTreeMap<u64, Vec<(Shape, Shape)>>,
}

impl<'t, D: Monoid> LoopBuilder<'t, D> {
    pub fn new(blocks: &'t BTreeMap<Shape, ExprVector<D>>, registers: usize) -> Self {
        LoopBuilder {
            blocks,
            registers,
            loops: BTreeMap::new(),
            first: BTreeMap::new(),
            groups: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    /// Builds every loop summary.
    pub fn run(mut self, b: &mut VectorBuilder<D>) -> Result<Self, ExtractError> {
        let id = self.build_identity(b)?;
        self.record(id);
        // Largest support first; every strictly larger support is complete
        // before a support is processed.
        while let Some((&support, _)) = self.pending.iter().max_by_key(|(s, _)| (s.count_ones(), **s)) {
            let candidates = self.pending.remove(&support).unwrap();
            let pieces = self.build_a_first(b, support, candidates)?;
            self.build_support(b, support, &pieces)?;
        }
        Ok(self)
    }

    /// All loops with support `support`, given its pieces.
    fn build_support(&mut self, b: &mut VectorBuilder<D>, support: u64, pieces: &[Shape]) -> Result<(), ExtractError> {
        let pieces: Vec<ExprVector<D>> = pieces.iter().map(|s| self.first[s].clone()).collect();
        let unsaturated = self.build_groups(b, support, &pieces)?;
        let tails: Vec<ExprVector<D>> =
            self.loops.values().filter(|v| strictly_below(v.shape.support(), support)).cloned().collect();
        // Loops without a group are finite piece sequences followed by a tail;
        // after the last group the same kind of sequence remains.
        let mut short: BTreeMap<Shape, Vec<ExprVector<D>>> = BTreeMap::new();
        for u in &unsaturated {
            for t in &tails {
                if let Some(c) = b.ev_concat(u, t)? {
                    short.entry(c.shape.clone()).or_default().push(c);
                }
            }
        }
        let mut rest = tails;
        let mut found: BTreeMap<Shape, Vec<ExprVector<D>>> = BTreeMap::new();
        for (shape, vs) in short {
            let v = b.choice_all(vs)?;
            rest.push(v.clone());
            found.entry(shape).or_default().push(v);
        }
        let shapes: Vec<Shape> = self.groups.keys().filter(|s| s.support() == support).cloned().collect();
        for shape in shapes {
            if let Some(v) = self.build_b_loop(b, &shape, &rest)? {
                found.entry(shape).or_default().push(v);
            }
        }
        for vs in found.into_values() {
            let v = b.choice_all(vs)?;
            self.record(v);
        }
        Ok(())
    }

    /// Fills `groups` for one support from its pieces and returns the
    /// summaries of the piece sequences that contain no group, by shape.
    fn build_groups(
        &mut self,
        b: &mut VectorBuilder<D>,
        support: u64,
        pieces: &[ExprVector<D>],
    ) -> Result<Vec<ExprVector<D>>, ExtractError> {
        let saturated =
            |s: &Shape| (0..s.num_registers() as u32).all(|u| support & (1 << u) != 0 || s.row(u).is_empty());
        let mut groups: BTreeMap<Shape, Vec<ExprVector<D>>> = BTreeMap::new();
        let mut unsaturated: BTreeMap<Shape, Vec<ExprVector<D>>> = BTreeMap::new();
        let mut frontier: Vec<ExprVector<D>> = Vec::new();
        for p in pieces {
            if saturated(&p.shape) {
                groups.entry(p.shape.clone()).or_default().push(p.clone());
            } else {
                frontier.push(p.clone());
            }
        }
        // Each piece moves every value outside the support to a lower
        // register, so the frontier empties after `|V \ U|` rounds.
        while !frontier.is_empty() {
            let mut next: BTreeMap<Shape, Vec<ExprVector<D>>> = BTreeMap::new();
            for f in &frontier {
                unsaturated.entry(f.shape.clone()).or_default().push(f.clone());
                for p in pieces {
                    if let Some(c) = b.ev_concat(f, p)? {
                        let into = if saturated(&c.shape) { &mut groups } else { &mut next };
                        into.entry(c.shape.clone()).or_default().push(c);
                    }
                }
            }
            frontier = next.into_values().map(|vs| b.choice_all(vs)).collect::<Result<_, _>>()?;
        }
        for (shape, vs) in groups {
            let v = b.choice_all(vs)?;
            self.groups.insert(shape, v);
        }
        unsaturated.into_values().map(|vs| b.choice_all(vs)).collect()
    }

    fn record(&mut self, v: ExprVector<D>) {
        let s = v.shape.support();
        for t in self.blocks.keys() {
            let x = v.shape.concat(t);
            if strictly_below(s, x.support()) {
                self.pending.entry(x.support()).or_default().push((v.shape.clone(), t.clone()));
            }
        }
        self.loops.insert(v.shape.clone(), v);
    }

    /// Block sequences with the identity shape: every block has the identity
    /// shape, prepending to and appending to each register.
    fn build_identity(&mut self, b: &mut VectorBuilder<D>) -> Result<ExprVector<D>, ExtractError> {
        let id = Shape::identity(self.registers);
        match self.blocks.get(&id) {
            Some(a) => {
                let rows = a
                    .rows
                    .iter()
                    .map(|row| vec![FuncExpr::iter(row[0].clone(), true), FuncExpr::iter(row[1].clone(), false)])
                    .collect();
                Ok(ExprVector { shape: id, rows, domain: a.domain.star().minimize() })
            }
            None => {
                let eps = Dfa::epsilon(b.alphabet()).minimize();
                let zero = b.zero(&eps);
                Ok(ExprVector { shape: id, rows: vec![vec![zero.clone(), zero]; self.registers], domain: eps })
            }
        }
    }

    /// First-block summaries for one support: a loop with larger support
    /// followed by one block that brings the support down. Returns the shapes built.
    pub fn build_a_first(
        &mut self,
        b: &mut VectorBuilder<D>,
        support: u64,
        candidates: Vec<(Shape, Shape)>,
    ) -> Result<Vec<Shape>, ExtractError> {
        let mut groups: BTreeMap<Shape, Vec<ExprVector<D>>> = BTreeMap::new();
        for (pre, t) in candidates {
            debug_assert!(strictly_below(pre.support(), support));
            if let Some(v) = b.ev_concat(&self.loops[&pre], &self.blocks[&t])? {
                groups.entry(v.shape.clone()).or_default().push(v);
            }
        }
        let mut built = Vec::new();
        for (shape, items) in groups {
            let v = b.choice_all(items)?;
            built.push(shape.clone());
            self.first.insert(shape, v);
        }
        Ok(built)
    }

    /// Summary of the loops with shape `shape` that contain a group: a first
    /// group with that shape, further groups, then a remainder summarized by
    /// one of `rest`.
    pub fn build_b_loop(
        &self,
        b: &mut VectorBuilder<D>,
        shape: &Shape,
        rest: &[ExprVector<D>],
    ) -> Result<Option<ExprVector<D>>, ExtractError> {
        let support = shape.support();
        let Some(head) = self.groups.get(shape) else { return Ok(None) };
        let heads: Vec<&ExprVector<D>> = self.groups.values().filter(|v| v.shape.support() == support).collect();
        let tails: Vec<&ExprVector<D>> = rest.iter().collect();
        let alphabet = b.alphabet().clone();
        let union = |vs: &[&ExprVector<D>]| -> Result<Dfa, ExprError> {
            let mut d = Dfa::empty(&alphabet);
            for v in vs {
                d = d.union(&v.domain)?;
            }
            Ok(d.minimize())
        };
        let pieces = union(&heads)?;
        let pieces_star = pieces.star().minimize();
        let rest = union(&tails)?;
        let domain = head.domain.concat(&pieces_star)?.concat(&rest)?.minimize();
        if domain.is_empty() {
            return Ok(None);
        }
        let all = b.all.clone();
        let mut rows = Vec::with_capacity(self.registers);
        for v in 0..self.registers as u32 {
            let regs = shape.row(v);
            if regs.is_empty() {
                // Outside the support: determined by the last group and the remainder.
                let mut alts = Vec::new();
                for h in &heads {
                    for t in &tails {
                        if let Some(c) = b.ev_concat(h, t)? {
                            alts.push(c.rows[v as usize][0].clone());
                        }
                    }
                }
                let f = FuncExpr::choice_all(alts)?;
                rows.push(vec![b.rshift(&pieces_star, f)?]);
                continue;
            }
            let last = regs.len();
            let mut row = Vec::with_capacity(last + 1);
            for k in 0..=last {
                let own = b.lshift(head.rows[v as usize][k].clone(), &all)?;
                if k != 0 && k != last {
                    row.push(own);
                    continue;
                }
                let leading = k == 0;
                let mut pair_alts = Vec::new();
                for h1 in &heads {
                    for h2 in &heads {
                        if !h1.domain.concat(&h2.domain)?.is_empty() {
                            pair_alts.push(b.added_part(h1, h2, v, leading)?);
                        }
                    }
                }
                let mut tail_alts = Vec::new();
                for h in &heads {
                    for t in &tails {
                        if !h.domain.concat(&t.domain)?.is_empty() {
                            tail_alts.push(b.added_part(h, t, v, leading)?);
                        }
                    }
                }
                let post_inner = FuncExpr::choice_all(tail_alts)?;
                let post = b.rshift(&pieces_star, post_inner)?;
                let with_mid = if pair_alts.is_empty() {
                    None
                } else {
                    let g = FuncExpr::choice_all(pair_alts)?;
                    let chained = FuncExpr::chain(g, &pieces, leading)?;
                    Some(b.lshift(chained, &rest)?)
                };
                let (short, long) = if leading {
                    (FuncExpr::sum(post.clone(), own.clone())?, with_mid.map(|m| FuncExpr::sum_all(vec![post, m, own])))
                } else {
                    (FuncExpr::sum(own.clone(), post.clone())?, with_mid.map(|m| FuncExpr::sum_all(vec![own, m, post])))
                };
                row.push(match long {
                    Some(long) => FuncExpr::choice(long?, short)?,
                    None => short,
                });
            }
            rows.push(row);
        }
        Ok(b.restricted(shape.clone(), rows, domain)?)
    }
}

/// One elimination step: paths that may also pass through `pivot`.
fn next_level<D: Monoid>(
    b: &mut VectorBuilder<D>,
    table: &Table<D>,
    n: usize,
    registers: usize,
    pivot: u32,
) -> Result<Table<D>, ExtractError> {
    let p = pivot as usize;
    let loops = LoopBuilder::new(&table[p * n + p], registers).run(b)?.loops;
    let mut out: Table<D> = table.clone();
    for q in 0..n {
        // Paths into the pivot followed by loops at it, by shape.
        let mut into: BTreeMap<Shape, Vec<ExprVector<D>>> = BTreeMap::new();
        for x in table[q * n + p].values() {
            for l in loops.values() {
                if let Some(v) = b.ev_concat(x, l)? {
                    into.entry(v.shape.clone()).or_default().push(v);
                }
            }
        }
        let into: Vec<ExprVector<D>> = into.into_values().map(|vs| b.choice_all(vs)).collect::<Result<_, _>>()?;
        for q2 in 0..n {
            let mut through: BTreeMap<Shape, Vec<ExprVector<D>>> = BTreeMap::new();
            for x in &into {
                for y in table[p * n + q2].values() {
                    if let Some(v) = b.ev_concat(x, y)? {
                        through.entry(v.shape.clone()).or_default().push(v);
                    }
                }
            }
            let cell = &mut out[q * n + q2];
            for (shape, mut vs) in through {
                if let Some(old) = cell.remove(&shape) {
                    vs.insert(0, old);
                }
                let v = b.choice_all(vs)?;
                cell.insert(shape, v);
            }
        }
    }
    Ok(out)
}

/// Tables for every elimination level `0..=n` of a normalized machine.
pub fn summarize_levels<D: Monoid>(b: &mut VectorBuilder<D>, m: &Ccra<D>) -> Result<Vec<Table<D>>, ExtractError> {
    let n = m.num_states();
    let mut levels = vec![build_r0(b, m)?];
    for i in 0..n {
        let next = next_level(b, &levels[i], n, m.num_registers(), i as u32)?;
        levels.push(next);
    }
    Ok(levels)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ExtractOptions {
    /// Fail instead of normalizing a machine that is not normalized.
    pub skip_normalize: bool,
}

/// An expression equal to the machine.
pub fn extract_noncommutative<D: Monoid>(m: &Ccra<D>) -> Result<E<D>, ExtractError> {
    extract_noncommutative_with(m, ExtractOptions::default())
}

pub fn extract_noncommutative_with<D: Monoid>(m: &Ccra<D>, opts: ExtractOptions) -> Result<E<D>, ExtractError> {
    let normalized;
    let m = if m.is_normalized() {
        if let Some(v) = m.validate_copyless().first() {
            return Err(CcraError::NotCopyless(format!("{v:?}")).into());
        }
        m
    } else if opts.skip_normalize {
        return Err(ExtractError::NotNormalized);
    } else {
        normalized = normalize(m)?;
        &normalized
    };
    let mut b = VectorBuilder::new(m.alphabet());
    let n = m.num_states();
    let levels = summarize_levels(&mut b, m)?;
    let last = levels.last().expect("at least one level");
    let q0 = m.start() as usize;
    let mut parts = Vec::new();
    if let Some(out) = m.output_expr(m.start()) {
        let eps = Dfa::epsilon(m.alphabet()).minimize();
        parts.push(b.konst(&eps, out.erase_registers().eval(&[])));
    }
    for qf in 0..n as u32 {
        let Some(out) = m.output_expr(qf) else { continue };
        for v in last[q0 * n + qf as usize].values() {
            let mut items = Vec::new();
            for t in out.tokens() {
                match t {
                    crate::ccra::Tok::Reg(r) => items.extend(v.rows[*r as usize].iter().cloned()),
                    crate::ccra::Tok::Const(d) => items.push(b.konst(&v.domain, d.clone())),
                }
            }
            parts.push(if items.is_empty() { b.zero(&v.domain) } else { FuncExpr::sum_all(items)? });
        }
    }
    if parts.is_empty() {
        return Ok(FuncExpr::bottom(m.alphabet()));
    }
    Ok(FuncExpr::choice_all(parts)?)
}
