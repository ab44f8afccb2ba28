//! Random copyless and additive machines: normalization, both extraction
//! routes and the shape laws, against a direct register simulation.

use num_bigint::BigInt;
use proptest::prelude::*;
use regcomb::ccra::{normalize, Shape, Tok};
use regcomb::extract_comm::extract_commutative;
use regcomb::extract_noncomm::{extract_noncommutative, shape_concat, shape_order, ShapeOrder};
use regcomb::{eval_naive, Acra, Additive, Alphabet, Ccra, Int, Monoid, Update, Word};

/// Reads choices from a fixed tape, wrapping around.
struct Tape<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Tape<'_> {
    fn pick(&mut self, n: usize) -> usize {
        let b = self.bytes[self.pos % self.bytes.len()];
        self.pos += 1;
        b as usize % n
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn word_const(t: &mut Tape) -> Tok<Word> {
    Tok::Const(Word::new(["", "a", "b", "ab"][t.pick(4)]))
}

/// A copyless update map: every register moves to at most one row, rows
/// interleave their registers with constants.
fn copyless_updates(t: &mut Tape, nv: usize) -> Vec<Update<Word>> {
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); nv];
    for u in 0..nv as u32 {
        let target = t.pick(nv + 1);
        if target < nv {
            let row = &mut rows[target];
            let at = t.pick(row.len() + 1);
            row.insert(at, u);
        }
    }
    rows.into_iter()
        .map(|row| {
            let mut toks = vec![word_const(t)];
            for r in row {
                toks.push(Tok::Reg(r));
                toks.push(word_const(t));
            }
            Update::new(toks)
        })
        .collect()
}

fn copyless_output(t: &mut Tape, nv: usize) -> Option<Update<Word>> {
    if t.pick(3) == 0 {
        return None;
    }
    let mut toks = vec![word_const(t)];
    let mut regs: Vec<u32> = (0..nv as u32).collect();
    for _ in 0..nv {
        let r = regs.remove(t.pick(regs.len()));
        if t.pick(2) == 0 {
            toks.push(Tok::Reg(r));
            toks.push(word_const(t));
        }
    }
    Some(Update::new(toks))
}

fn build_ccra(states: usize, regs: usize, tape: &[u8]) -> Ccra<Word> {
    let t = &mut Tape { bytes: tape, pos: 0 };
    let alphabet = Alphabet::from_symbols("ab");
    let mut delta = Vec::new();
    let mut mu = Vec::new();
    for _ in 0..states * alphabet.len() {
        delta.push(t.pick(states) as u32);
        mu.push(copyless_updates(t, regs));
    }
    let nu = (0..states).map(|_| copyless_output(t, regs)).collect();
    Ccra::new(alphabet, names("q", states), names("x", regs), 0, delta, mu, nu).expect("generated machine is copyless")
}

fn arb_ccra(max_states: usize, max_regs: usize) -> impl Strategy<Value = Ccra<Word>> {
    (1..=max_states, 1..=max_regs, prop::collection::vec(any::<u8>(), 64..128))
        .prop_map(|(s, r, tape)| build_ccra(s, r, &tape))
}

fn arb_acra() -> impl Strategy<Value = Acra<Int>> {
    (1usize..=3, 1usize..=3, prop::collection::vec(any::<u8>(), 64..128)).prop_map(|(states, regs, tape)| {
        let t = &mut Tape { bytes: &tape, pos: 0 };
        let alphabet = Alphabet::from_symbols("abe");
        let int = |n: usize| Additive(BigInt::from(n as i64));
        let mut delta = Vec::new();
        let mut mu = Vec::new();
        for _ in 0..states * alphabet.len() {
            delta.push(t.pick(states) as u32);
            mu.push((0..regs).map(|_| (t.pick(regs) as u32, int(t.pick(3)))).collect());
        }
        let nu = (0..states).map(|_| (t.pick(3) > 0).then(|| (t.pick(regs) as u32, int(t.pick(3))))).collect();
        Acra::new(alphabet, names("q", states), names("x", regs), 0, delta, mu, nu).unwrap()
    })
}

/// Runs the machine by substituting register values into the update tokens.
fn simulate<D: Monoid>(m: &Ccra<D>, sigma: &[char]) -> Option<D> {
    let eval = |u: &Update<D>, val: &[D]| {
        u.tokens().iter().fold(D::zero(), |acc, t| match t {
            Tok::Reg(r) => acc.plus(&val[*r as usize]),
            Tok::Const(d) => acc.plus(d),
        })
    };
    let mut q = m.start();
    let mut val = vec![D::zero(); m.num_registers()];
    for c in sigma {
        let a = m.alphabet().index(c).unwrap();
        val = m.updates(q, a).iter().map(|u| eval(u, &val)).collect();
        q = m.next(q, a);
    }
    m.output_expr(q).map(|u| eval(u, &val))
}

fn strings(m_alphabet: &Alphabet, max_len: usize) -> Vec<Vec<char>> {
    m_alphabet.strings_up_to(max_len)
}

/// Shape of the path reading `sigma` from `q`, and its end state.
fn path_shape<D: Monoid>(m: &Ccra<D>, q: u32, sigma: &[char]) -> (Shape, u32) {
    let (end, ups) = m.summary(q, sigma).unwrap();
    (Shape::of_updates(&ups), end)
}

fn check_shape_laws<D: Monoid>(m: &Ccra<D>, max_len: usize) -> Result<(), TestCaseError> {
    let normalized_paths = paths_stay_normalized(m, max_len);
    for q in 0..m.num_states() as u32 {
        for s in strings(m.alphabet(), max_len) {
            let (whole, _) = path_shape(m, q, &s);
            for i in 0..=s.len() {
                let (pre, mid) = path_shape(m, q, &s[..i]);
                let (post, _) = path_shape(m, mid, &s[i..]);
                prop_assert_eq!(&shape_concat(&pre, &post), &whole, "split of {:?} at {}", s, i);
                for j in i..=s.len() {
                    let (sub, _) = path_shape(m, mid, &s[i..j]);
                    let ord = shape_order(&sub, &whole);
                    prop_assert!(
                        matches!(ord, ShapeOrder::Less | ShapeOrder::EqualSupport),
                        "subpath {:?} of {:?} is {:?}",
                        &s[i..j],
                        s,
                        ord
                    );
                }
            }
            let first = shortest_prefix_not_below(m, q, &s, &whole);
            prop_assert_eq!(shape_order(&first, &whole), ShapeOrder::EqualSupport);
            if normalized_paths {
                prop_assert_eq!(&first, &whole, "shortest prefix of {:?}", s);
            }
        }
    }
    Ok(())
}

/// Shape of the shortest prefix of `s` read from `q` whose shape is not
/// strictly below `whole`.
fn shortest_prefix_not_below<D: Monoid>(m: &Ccra<D>, q: u32, s: &[char], whole: &Shape) -> Shape {
    (0..=s.len())
        .map(|i| path_shape(m, q, &s[..i]).0)
        .find(|p| shape_order(p, whole) != ShapeOrder::Less)
        .expect("the whole path is not below itself")
}

/// Whether every path of length at most `max_len` has a normalized shape.
fn paths_stay_normalized<D: Monoid>(m: &Ccra<D>, max_len: usize) -> bool {
    (0..m.num_states() as u32)
        .all(|q| strings(m.alphabet(), max_len).iter().all(|s| path_shape(m, q, s).0.is_normalized()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulation_agrees_with_eval(m in arb_ccra(3, 3)) {
        for s in strings(m.alphabet(), 6) {
            prop_assert_eq!(m.eval(&s).unwrap(), simulate(&m, &s));
        }
    }

    #[test]
    fn normalize_preserves_the_function(m in arb_ccra(3, 3)) {
        let n = normalize(&m).unwrap();
        prop_assert!(n.is_normalized());
        prop_assert!(n.validate_copyless().is_empty());
        for s in strings(m.alphabet(), 6) {
            prop_assert_eq!(simulate(&n, &s), simulate(&m, &s), "input {:?}", s);
        }
    }

    #[test]
    fn shape_laws_on_normalized_machines(m in arb_ccra(2, 3)) {
        check_shape_laws(&normalize(&m).unwrap(), 5)?;
    }

    #[test]
    fn commutative_extraction_roundtrip(m in arb_acra()) {
        let e = extract_commutative(&m).unwrap();
        let c = m.to_ccra();
        for s in strings(m.alphabet(), 5) {
            prop_assert_eq!(eval_naive(&e, &s).unwrap(), simulate(&c, &s), "input {:?}", s);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noncommutative_extraction_roundtrip(m in arb_ccra(2, 3)) {
        let e = extract_noncommutative(&m).unwrap();
        for s in strings(m.alphabet(), 5) {
            prop_assert_eq!(eval_naive(&e, &s).unwrap(), simulate(&m, &s), "input {:?}", s);
        }
    }
}

#[test]
fn shape_laws_on_library_machines() {
    use regcomb::ccra::library::*;
    for m in [shuffle_sst(), echo(), two_state(), crossing(), rotating()] {
        let n = normalize(&m).unwrap();
        assert!(paths_stay_normalized(&n, 5));
        check_shape_laws(&n, 5).unwrap();
    }
}

/// `x1` is emptied into the sink and later absorbs a higher register, so a
/// path can reach the final support before reaching the final shape.
fn refilled_register() -> Ccra<Word> {
    let c = |s: &str| Tok::Const(Word::new(s));
    let on_a = vec![Update::new([c("ab")]), Update::new([c("a"), Tok::Reg(0), c("a"), Tok::Reg(1), c("a")])];
    let on_b = vec![Update::new([c("ab"), Tok::Reg(0), c("b")]), Update::new([c("a")])];
    let nu = vec![Some(Update::new([Tok::Reg(0), Tok::Reg(1)]))];
    Ccra::new(Alphabet::from_symbols("ab"), names("q", 1), names("x", 2), 0, vec![0, 0], vec![on_a, on_b], nu).unwrap()
}

#[test]
fn shortest_prefix_can_stop_short_of_the_shape() {
    let m = normalize(&refilled_register()).unwrap();
    assert!(!paths_stay_normalized(&m, 3));
    let witness = (0..m.num_states() as u32).find_map(|q| {
        strings(m.alphabet(), 4).into_iter().find(|s| {
            let (whole, _) = path_shape(&m, q, s);
            shortest_prefix_not_below(&m, q, s, &whole) != whole
        })
    });
    assert!(witness.is_some());
    check_shape_laws(&m, 4).unwrap();
    let e = extract_noncommutative(&m).unwrap();
    for s in strings(m.alphabet(), 6) {
        assert_eq!(eval_naive(&e, &s).unwrap(), simulate(&m, &s), "input {s:?}");
    }
}

#[test]
fn noncommutative_extraction_with_three_registers() {
    use regcomb::ccra::library::rotating;
    let m = rotating();
    let e = extract_noncommutative(&m).unwrap();
    for s in strings(m.alphabet(), 5) {
        assert_eq!(eval_naive(&e, &s).unwrap(), simulate(&m, &s), "input {s:?}");
    }
}
