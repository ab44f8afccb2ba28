//! Expressions from additive machines over commutative monoids.
//!
//! The register flow of a machine is an automaton whose states are
//! (state, register) pairs and whose letters carry the added constant. Its
//! accepting paths are unique per input, so state elimination yields an
//! unambiguous regex, which reads directly as an expression: union as choice,
//! concatenation as split sum, star as iterated sum.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::ccra::Acra;
use crate::expr::{ExprError, FuncExpr, E};
use crate::monoid::Monoid;
use crate::relang::{paths_regex, Alphabet, Dfa, Nfa, Re, Regex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractCommError {
    #[error("the {0} monoid is not commutative")]
    NonCommutative(&'static str),
    #[error("the register flow automaton is ambiguous")]
    Ambiguous,
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A letter of the flow automaton: an input symbol and the constant added on it.
pub type FlowLetter<D> = (char, D);

/// Register flow automaton of an additive machine. State `q * |V| + v` stands
/// for register `v` in state `q`.
#[derive(Clone, Debug)]
pub struct FlowNfa<D: Monoid> {
    pub nfa: Nfa<FlowLetter<D>>,
    pub registers: usize,
    /// Constant added by the output expression, at accepting flow states.
    pub offsets: Vec<Option<D>>,
}

impl<D: Monoid> FlowNfa<D> {
    pub fn state(&self, q: u32, v: u32) -> u32 {
        q * self.registers as u32 + v
    }
}

/// Builds the flow automaton: an edge `(q, u) → (δ(q,a), v)` labelled
/// `(a, d)` for every update `v := u + d` on `a` from `q`. Every register of
/// the start state is initial; `(q, v)` accepts when `q` outputs `v`.
pub fn acra_to_flow_nfa<D: Monoid>(m: &Acra<D>) -> Result<FlowNfa<D>, ExtractCommError> {
    if !D::COMMUTATIVE {
        return Err(ExtractCommError::NonCommutative(D::NAME));
    }
    let nv = m.registers().len();
    let k = m.alphabet().len();
    let id = |q: u32, v: u32| q * nv as u32 + v;
    let mut edges: Vec<(u32, FlowLetter<D>, u32)> = Vec::new();
    for q in 0..m.num_states() as u32 {
        for a in 0..k {
            let q2 = m.next(q, a);
            let c = *m.alphabet().symbol(a);
            for (v, (u, d)) in m.updates(q, a).iter().enumerate() {
                edges.push((id(q, *u), (c, d.clone()), id(q2, v as u32)));
            }
        }
    }
    let letters = Alphabet::new(edges.iter().map(|(_, l, _)| l.clone()));
    let n = m.num_states() * nv;
    let mut offsets = vec![None; n];
    for q in 0..m.num_states() as u32 {
        if let Some((v, d)) = m.output_expr(q) {
            offsets[id(q, *v) as usize] = Some(d.clone());
        }
    }
    let accepting: Vec<u32> = (0..n as u32).filter(|&s| offsets[s as usize].is_some()).collect();
    let starts = (0..nv as u32).map(|v| id(m.start(), v)).collect();
    let nfa = Nfa::new(letters, n, &edges, starts, &accepting).expect("flow letters come from the edges");
    Ok(FlowNfa { nfa, registers: nv, offsets })
}

/// Reads an unambiguous flow regex as an expression over `alphabet`.
pub fn regex_to_expr<D: Monoid>(re: &Re<FlowLetter<D>>, alphabet: &Alphabet) -> Result<E<D>, ExprError> {
    let mut memo: HashMap<usize, E<D>> = HashMap::new();
    regex_rec(re, alphabet, &mut memo)
}

fn regex_rec<D: Monoid>(
    re: &Re<FlowLetter<D>>,
    alphabet: &Alphabet,
    memo: &mut HashMap<usize, E<D>>,
) -> Result<E<D>, ExprError> {
    let key = Arc::as_ptr(re) as usize;
    if let Some(e) = memo.get(&key) {
        return Ok(e.clone());
    }
    let e = match &**re {
        Regex::Empty => FuncExpr::bottom(alphabet),
        Regex::Eps => FuncExpr::constant(&Dfa::epsilon(alphabet), D::zero()),
        Regex::Sym((c, d)) => FuncExpr::letter(alphabet, *c, d.clone())?,
        Regex::Union(a, b) => FuncExpr::choice(regex_rec(a, alphabet, memo)?, regex_rec(b, alphabet, memo)?)?,
        Regex::Concat(a, b) => FuncExpr::split(regex_rec(a, alphabet, memo)?, regex_rec(b, alphabet, memo)?, false)?,
        Regex::Star(a) => FuncExpr::iter(regex_rec(a, alphabet, memo)?, false),
    };
    memo.insert(key, e.clone());
    Ok(e)
}

/// An expression equal to the machine, built from constants, choice, split
/// sum and iterated sum only.
pub fn extract_commutative<D: Monoid>(m: &Acra<D>) -> Result<E<D>, ExtractCommError> {
    let flow = acra_to_flow_nfa(m)?;
    if !flow.nfa.is_unambiguous() {
        return Err(ExtractCommError::Ambiguous);
    }
    let alphabet = m.alphabet();
    let mut parts = Vec::new();
    for &s in flow.nfa.starts() {
        for f in 0..flow.nfa.num_states() as u32 {
            let Some(d) = &flow.offsets[f as usize] else { continue };
            let re = paths_regex(&flow.nfa, s, f);
            if re.is_empty_node() {
                continue;
            }
            let mut e = regex_to_expr(&re, alphabet)?;
            if !d.is_zero() {
                e = FuncExpr::split(e, FuncExpr::constant(&Dfa::epsilon(alphabet), d.clone()), false)?;
            }
            parts.push(e);
        }
    }
    if parts.is_empty() {
        return Ok(FuncExpr::bottom(alphabet));
    }
    Ok(FuncExpr::choice_all(parts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccra::library::{coffee_acra, flow_acra};
    use crate::expr::eval_naive;
    use crate::monoid::{Additive, Word};
    use num_bigint::BigInt;

    #[test]
    fn flow_automaton_of_the_three_letter_machine() {
        let m = flow_acra();
        let flow = acra_to_flow_nfa(&m).unwrap();
        let (x, y) = (flow.state(0, 0), flow.state(0, 1));
        assert_eq!(flow.nfa.starts(), &[x, y]);
        assert!(flow.nfa.is_accepting(x) && !flow.nfa.is_accepting(y));
        let one = Additive(BigInt::from(1));
        let zero = Additive(BigInt::from(0));
        let mut edges: Vec<(u32, FlowLetter<_>, u32)> = flow.nfa.edges().map(|(p, l, q)| (p, l.clone(), q)).collect();
        edges.sort();
        let mut want = vec![
            (x, ('a', one.clone()), x),
            (x, ('b', zero), x),
            (y, ('a', one.clone()), y),
            (y, ('b', one.clone()), y),
            (y, ('e', one.clone()), y),
            (y, ('e', one), x),
        ];
        want.sort();
        assert_eq!(edges, want);
        assert!(flow.nfa.is_unambiguous());
    }

    #[test]
    fn roundtrip_examples() {
        for m in [flow_acra(), coffee_acra()] {
            let e = extract_commutative(&m).unwrap();
            for s in m.alphabet().strings_up_to(5) {
                assert_eq!(eval_naive(&e, &s).unwrap(), m.eval(&s).unwrap());
            }
        }
        let e = extract_commutative(&flow_acra()).unwrap();
        assert_eq!(eval_naive(&e, &['a', 'b', 'e', 'b']).unwrap(), Some(Additive(BigInt::from(3))));
    }

    #[test]
    fn strings_are_rejected() {
        let m = Acra::<Word>::new(
            Alphabet::from_symbols("a"),
            vec!["q".into()],
            vec!["x".into()],
            0,
            vec![0],
            vec![vec![(0, Word::new("a"))]],
            vec![Some((0, Word::new("")))],
        )
        .unwrap();
        assert!(matches!(extract_commutative(&m), Err(ExtractCommError::NonCommutative(_))));
    }
}
