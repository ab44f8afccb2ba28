//! The memoized evaluator, domains and the compiler checked against a
//! brute-force reference evaluator that enumerates every decomposition.

use num_bigint::BigInt;
use proptest::prelude::*;
use regcomb::compile::{compile, CompileError};
use regcomb::expr::{domain_dfa, Node};
use regcomb::relang::regex_dfa;
use regcomb::{eval_naive, Alphabet, Dfa, FuncExpr, Int, Monoid, Word, E};

/// All ways to cut a string of length `n` into nonempty pieces, as boundaries.
fn all_cuts(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for mask in 0u32..(1 << (n - 1)) {
        let mut cuts = vec![0];
        for k in 1..n {
            if mask & (1 << (k - 1)) != 0 {
                cuts.push(k);
            }
        }
        cuts.push(n);
        out.push(cuts);
    }
    out
}

/// The unique element of `xs`, if there is exactly one.
fn unique<T>(mut xs: Vec<T>) -> Option<T> {
    if xs.len() == 1 {
        xs.pop()
    } else {
        None
    }
}

fn reference<D: Monoid>(e: &E<D>, w: &[char]) -> Option<D> {
    match e.node() {
        Node::Const { lang, value, .. } => lang.accepts(w).then(|| value.clone()),
        Node::Choice(f, g) => reference(f, w).or_else(|| reference(g, w)),
        Node::Sum(f, g) => Some(reference(f, w)?.plus(&reference(g, w)?)),
        Node::Split { f, g, left } => {
            let splits: Vec<(D, D)> =
                (0..=w.len()).filter_map(|k| Some((reference(f, &w[..k])?, reference(g, &w[k..])?))).collect();
            let (a, b) = unique(splits)?;
            Some(if *left { b.plus(&a) } else { a.plus(&b) })
        }
        Node::Iter { f, left } => {
            let decomps: Vec<Vec<D>> = all_cuts(w.len())
                .into_iter()
                .filter_map(|c| c.windows(2).map(|p| reference(f, &w[p[0]..p[1]])).collect::<Option<Vec<D>>>())
                .collect();
            let mut vals = unique(decomps)?;
            if *left {
                vals.reverse();
            }
            Some(vals.iter().fold(D::zero(), |acc, v| acc.plus(v)))
        }
        Node::Chain { f, lang, left, .. } => {
            let decomps: Vec<Vec<usize>> = all_cuts(w.len())
                .into_iter()
                .filter(|c| c.len() >= 2 && c.windows(2).all(|p| lang.accepts(&w[p[0]..p[1]])))
                .collect();
            let cuts = unique(decomps)?;
            if cuts.len() < 3 {
                return None;
            }
            let mut vals: Vec<D> = cuts.windows(3).map(|t| reference(f, &w[t[0]..t[2]])).collect::<Option<_>>()?;
            if *left {
                vals.reverse();
            }
            Some(vals.iter().fold(D::zero(), |acc, v| acc.plus(v)))
        }
        Node::Reverse(f) => {
            let r: Vec<char> = w.iter().rev().copied().collect();
            reference(f, &r)
        }
        Node::Compose { g, f } => {
            let mid = reference(f, w)?.chars();
            if mid.iter().any(|c| !g.alphabet().contains(c)) {
                return None;
            }
            reference(g, &mid)
        }
    }
}

const LANGS: &[&str] = &["a", "b", "a*", "b*", "ab*", "(a|b)*b", ".*", "()", "aa|b", "a*b"];

fn lang(i: usize) -> Dfa {
    regex_dfa(LANGS[i % LANGS.len()], &Alphabet::from_symbols("ab")).unwrap()
}

/// Values usable in either monoid, by index.
trait Sample: Monoid {
    fn sample(i: usize) -> Self;
}

impl Sample for Int {
    fn sample(i: usize) -> Self {
        regcomb::Additive(BigInt::from(i as i64 % 4))
    }
}

impl Sample for Word {
    fn sample(i: usize) -> Self {
        Word::new(["", "a", "b", "ab"][i % 4])
    }
}

/// Expressions over {a, b}. `pipelines` allows chained sums, which the
/// compiler accepts only at the top.
fn arb_expr<D: Sample>(pipelines: bool) -> impl Strategy<Value = E<D>> {
    let leaf = (0usize..LANGS.len(), 0usize..4).prop_map(|(l, v)| FuncExpr::constant(&lang(l), D::sample(v)));
    leaf.prop_recursive(4, 24, 2, move |inner| {
        let pair = (inner.clone(), inner.clone());
        prop_oneof![
            pair.clone().prop_map(|(f, g)| FuncExpr::choice(f, g).unwrap()),
            pair.clone().prop_map(|(f, g)| FuncExpr::sum(f, g).unwrap()),
            (pair, any::<bool>()).prop_map(|((f, g), l)| FuncExpr::split(f, g, l).unwrap()),
            (inner.clone(), any::<bool>()).prop_map(|(f, l)| FuncExpr::iter(f, l)),
            inner.clone().prop_map(FuncExpr::reverse),
            (inner.clone(), 0usize..LANGS.len(), any::<bool>(), Just(pipelines)).prop_map(|(f, l, left, p)| {
                if p {
                    FuncExpr::chain(f, &lang(l), left).unwrap()
                } else {
                    FuncExpr::iter(f, left)
                }
            }),
        ]
    })
}

/// A string expression composed with an outer expression.
fn arb_composed() -> impl Strategy<Value = E<Word>> {
    (arb_expr::<Word>(false), arb_expr::<Word>(false)).prop_map(|(g, f)| FuncExpr::compose(g, f).unwrap())
}

fn strings(max_len: usize) -> Vec<Vec<char>> {
    Alphabet::from_symbols("ab").strings_up_to(max_len)
}

fn has_pipeline<D: Monoid>(e: &E<D>) -> bool {
    match e.node() {
        Node::Const { .. } => false,
        Node::Chain { .. } | Node::Compose { .. } => true,
        Node::Choice(f, g) | Node::Sum(f, g) | Node::Split { f, g, .. } => has_pipeline(f) || has_pipeline(g),
        Node::Iter { f, .. } | Node::Reverse(f) => has_pipeline(f),
    }
}

fn check_naive<D: Sample>(e: &E<D>, max_len: usize) -> Result<(), TestCaseError> {
    for s in strings(max_len) {
        prop_assert_eq!(eval_naive(e, &s).unwrap(), reference(e, &s), "input {:?}", s);
    }
    Ok(())
}

fn check_domain<D: Sample>(e: &E<D>, max_len: usize) -> Result<(), TestCaseError> {
    let dom = domain_dfa(e).unwrap();
    for s in strings(max_len) {
        prop_assert_eq!(dom.accepts(&s), reference(e, &s).is_some(), "input {:?}", s);
    }
    Ok(())
}

fn check_compiled<D: Sample>(e: &E<D>, max_len: usize) -> Result<(), TestCaseError> {
    let c = match compile(e) {
        Ok(c) => c,
        Err(CompileError::NestedPipeline(_)) => return Err(TestCaseError::reject("pipeline below a combinator")),
        Err(err) => return Err(TestCaseError::fail(err.to_string())),
    };
    for s in strings(max_len) {
        prop_assert_eq!(c.eval(&s).unwrap(), reference(e, &s), "input {:?}", s);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn naive_matches_reference_int(e in arb_expr::<Int>(true)) {
        check_naive(&e, 6)?;
    }

    #[test]
    fn naive_matches_reference_str(e in arb_expr::<Word>(true)) {
        check_naive(&e, 6)?;
    }

    #[test]
    fn naive_matches_reference_composed(e in arb_composed()) {
        check_naive(&e, 5)?;
    }

    #[test]
    fn domain_is_where_defined(e in arb_expr::<Int>(true)) {
        check_domain(&e, 6)?;
    }

    #[test]
    fn domain_of_composition_is_exact(e in arb_composed()) {
        check_domain(&e, 5)?;
    }

    #[test]
    fn left_sum_is_reversed_sum(f in arb_expr::<Word>(false)) {
        let lhs = FuncExpr::iter(f.clone(), true);
        let rhs = FuncExpr::reverse(FuncExpr::iter(FuncExpr::reverse(f), false));
        for s in strings(6) {
            prop_assert_eq!(eval_naive(&lhs, &s).unwrap(), eval_naive(&rhs, &s).unwrap());
        }
    }

    #[test]
    fn choice_with_bottom_is_neutral(f in arb_expr::<Int>(true)) {
        let bot = FuncExpr::bottom(f.alphabet());
        let l = FuncExpr::choice(bot.clone(), f.clone()).unwrap();
        let r = FuncExpr::choice(f.clone(), bot).unwrap();
        for s in strings(5) {
            let want = reference(&f, &s);
            prop_assert_eq!(eval_naive(&l, &s).unwrap(), want.clone());
            prop_assert_eq!(eval_naive(&r, &s).unwrap(), want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, max_global_rejects: 4096, ..ProptestConfig::default() })]

    #[test]
    fn compiled_int_matches_reference(e in arb_expr::<Int>(false)) {
        check_compiled(&e, 6)?;
    }

    #[test]
    fn compiled_str_matches_reference(e in arb_expr::<Word>(false)) {
        check_compiled(&e, 6)?;
    }

    #[test]
    fn compiled_top_level_chain(f in arb_expr::<Int>(false), l in 0usize..LANGS.len(), left in any::<bool>()) {
        let e = FuncExpr::chain(f, &lang(l), left).unwrap();
        prop_assert!(has_pipeline(&e));
        check_compiled(&e, 5)?;
    }

    #[test]
    fn compiled_composition(e in arb_composed()) {
        check_compiled(&e, 5)?;
    }
}

#[test]
fn reference_agrees_on_library_expressions() {
    use regcomb::expr::library::*;
    let w = |s: &str| s.chars().collect::<Vec<_>>();
    assert_eq!(reference(&count_a(), &w("abab")), Some(regcomb::Additive(BigInt::from(2))));
    assert_eq!(reference(&copy(), &w("ab")), Some(Word::new("abab")));
    assert_eq!(reference(&reverse(), &w("ab")), Some(Word::new("ba")));
    assert_eq!(reference(&swap(), &w("ab#b")), Some(Word::new("b#ab")));
    assert_eq!(reference(&strip(), &w("ab#a")), Some(Word::new("ab")));
    assert_eq!(reference(&shuffle(), &w("abab")), Some(Word::new("ab")));
    assert_eq!(reference(&coffee(), &w("CCSC#C")), Some(regcomb::Additive(BigInt::from(5))));
}
