//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any
//! failure. Every comparison is exact; sweep lengths and time budgets are
//! pinned below.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use regcomb::ccra::{library as machines, normalize, CcraError, Shape, ViolationKind};
use regcomb::expr::{library as exprs, Node};
use regcomb::extract_comm::{acra_to_flow_nfa, extract_commutative};
use regcomb::extract_noncomm::{extract_noncommutative, shape_concat, shape_order, ShapeOrder};
use regcomb::relang::regex_dfa;
use regcomb::{compile, eval_naive, Additive, Alphabet, Ccra, FuncExpr, Monoid, Word, E};
use regcomb_cli::commands::{load, AnySubject, LoadOptions, Source, Subject};

const COMPILE_LEN: usize = 8;
const COMPILE_PIPELINE_LEN: usize = 6;
const SHUFFLE_LEN: usize = 8;
const COFFEE_LEN: usize = 7;
const IDENTITY_LEN: usize = 6;
const EXTRACT_LEN: usize = 6;
const NORMALIZE_LEN: usize = 6;
const SHAPE_LEN: usize = 6;

const WORKED_BUDGET: Duration = Duration::from_secs(1);
const COMPILE_BUDGET: Duration = Duration::from_secs(120);
const COMM_BUDGET: Duration = Duration::from_secs(60);
const NONCOMM_BUDGET: Duration = Duration::from_secs(600);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn int(n: i64) -> Additive<BigInt> {
    Additive(BigInt::from(n))
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn corpus_files(ext: &str) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.expect("corpus entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    files
}

fn load_corpus(path: &Path) -> AnySubject {
    let source = Source::File(path.to_string_lossy().into_owned());
    load(&source, &LoadOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// The two corpus machines that deliberately break copylessness.
fn is_invalid_fixture(path: &Path) -> bool {
    matches!(file_name(path).as_str(), "repeated.json" | "shared.json")
}

fn file_name(path: &Path) -> String {
    path.file_name().unwrap().to_string_lossy().into_owned()
}

/// Compares two evaluators on every string over `alphabet` up to `max_len`.
fn agree<D: Monoid>(
    what: &str,
    alphabet: &Alphabet,
    max_len: usize,
    lhs: impl Fn(&[char]) -> Option<D>,
    rhs: impl Fn(&[char]) -> Option<D>,
) -> Result<usize, String> {
    let strings = alphabet.strings_up_to(max_len);
    for s in &strings {
        let (a, b) = (lhs(s), rhs(s));
        if a != b {
            let input: String = s.iter().collect();
            return Err(format!("{what}: {input:?} gives {a:?} vs {b:?}"));
        }
    }
    Ok(strings.len())
}

fn within(budget: Duration, start: Instant) -> Result<(), String> {
    let spent = start.elapsed();
    if spent > budget {
        return Err(format!("took {spent:.1?}, budget {budget:?}"));
    }
    Ok(())
}

fn has_pipeline<D: Monoid>(e: &E<D>) -> bool {
    match e.node() {
        Node::Const { .. } => false,
        Node::Chain { .. } | Node::Compose { .. } => true,
        Node::Choice(f, g) | Node::Sum(f, g) | Node::Split { f, g, .. } => has_pipeline(f) || has_pipeline(g),
        Node::Iter { f, .. } | Node::Reverse(f) => has_pipeline(f),
    }
}

fn worked_examples() -> Outcome {
    let start = Instant::now();
    let w = |e: &E<Word>, s: &str| eval_naive(e, &chars(s)).unwrap();
    let n = |e: &E<Additive<BigInt>>, s: &str| eval_naive(e, &chars(s)).unwrap();
    let checks = [
        ("count_a(abab)", n(&exprs::count_a(), "abab") == Some(int(2))),
        ("copy(ab)", w(&exprs::copy(), "ab") == Some(Word::new("abab"))),
        ("reverse(ab)", w(&exprs::reverse(), "ab") == Some(Word::new("ba"))),
        ("swap(ab#b)", w(&exprs::swap(), "ab#b") == Some(Word::new("b#ab"))),
        ("strip(ab#a)", w(&exprs::strip(), "ab#a") == Some(Word::new("ab"))),
        ("shuffle(abab)", w(&exprs::shuffle(), "abab") == Some(Word::new("ab"))),
        ("coffee(CCSC#C)", n(&exprs::coffee(), "CCSC#C") == Some(int(5))),
    ];
    if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
        return Err(format!("{name} is wrong"));
    }
    within(WORKED_BUDGET, start)?;
    Ok(format!("{} examples in {:.1?}", checks.len(), start.elapsed()))
}

fn compile_sweep_one<D: Monoid>(name: &str, e: &E<D>) -> Result<usize, String> {
    let cascade = compile(e).map_err(|err| format!("{name}: {err}"))?;
    let len = if has_pipeline(e) { COMPILE_PIPELINE_LEN } else { COMPILE_LEN };
    agree(name, e.alphabet(), len, |s| cascade.eval(s).unwrap(), |s| eval_naive(e, s).unwrap())
}

fn compile_sweep() -> Outcome {
    let start = Instant::now();
    let mut strings = 0;
    let mut count = 0;
    for path in corpus_files("expr") {
        let name = file_name(&path);
        strings += match load_corpus(&path) {
            AnySubject::Int(Subject::Expr(e)) => compile_sweep_one(&name, &e)?,
            AnySubject::Str(Subject::Expr(e)) => compile_sweep_one(&name, &e)?,
            _ => return Err(format!("{name} is not an expression")),
        };
        count += 1;
    }
    let words = [
        ("id", exprs::id("ab")),
        ("copy", exprs::copy()),
        ("reverse", exprs::reverse()),
        ("swap", exprs::swap()),
        ("strip", exprs::strip()),
        ("shuffle", exprs::shuffle()),
        ("shuffle_composed", exprs::shuffle_composed()),
    ];
    for (name, e) in &words {
        strings += compile_sweep_one(name, e)?;
        count += 1;
    }
    let ints =
        [("count_a", exprs::count_a()), ("indicator", exprs::indicator("ab", "(a|b)*b")), ("coffee", exprs::coffee())];
    for (name, e) in &ints {
        strings += compile_sweep_one(name, e)?;
        count += 1;
    }
    within(COMPILE_BUDGET, start)?;
    Ok(format!("{count} expressions, {strings} strings in {:.1?}", start.elapsed()))
}

fn hand_machines() -> Outcome {
    let shuffle = exprs::shuffle();
    let sst = machines::shuffle_sst();
    let a =
        agree("shuffle", sst.alphabet(), SHUFFLE_LEN, |s| sst.eval(s).unwrap(), |s| eval_naive(&shuffle, s).unwrap())?;
    let coffee = exprs::coffee();
    let acra = machines::coffee_acra();
    let b =
        agree("coffee", acra.alphabet(), COFFEE_LEN, |s| acra.eval(s).unwrap(), |s| eval_naive(&coffee, s).unwrap())?;
    Ok(format!("shuffle {a} strings, coffee {b} strings"))
}

fn left_sum_identity() -> Outcome {
    fn check<D: Monoid>(name: &str, f: E<D>) -> Result<usize, String> {
        let lhs = FuncExpr::iter(f.clone(), true);
        let rhs = FuncExpr::reverse(FuncExpr::iter(FuncExpr::reverse(f), false));
        agree(name, lhs.alphabet(), IDENTITY_LEN, |s| eval_naive(&lhs, s).unwrap(), |s| eval_naive(&rhs, s).unwrap())
    }
    let ab = Alphabet::from_symbols("ab");
    let letters = FuncExpr::choice(
        FuncExpr::letter(&ab, 'a', Word::new("a")).unwrap(),
        FuncExpr::letter(&ab, 'b', Word::new("b")).unwrap(),
    )
    .unwrap();
    let counts =
        FuncExpr::choice(FuncExpr::letter(&ab, 'a', int(1)).unwrap(), FuncExpr::letter(&ab, 'b', int(0)).unwrap())
            .unwrap();
    let n = check("a/a |> b/b", letters)? + check("a/1 |> b/0", counts)?;
    Ok(format!("2 functions, {n} strings"))
}

fn chained_sum_pipeline() -> Outcome {
    let chained =
        FuncExpr::chain(exprs::shuffle_pair(), &regex_dfa("a*b", &Alphabet::from_symbols("ab")).unwrap(), false)
            .unwrap();
    let piped = exprs::shuffle_composed();
    let n = agree(
        "shuffle",
        chained.alphabet(),
        IDENTITY_LEN,
        |s| eval_naive(&chained, s).unwrap(),
        |s| eval_naive(&piped, s).unwrap(),
    )?;
    Ok(format!("{n} strings"))
}

fn commutative_roundtrip() -> Outcome {
    let start = Instant::now();
    let mut n = 0;
    for (name, m) in [("flow", machines::flow_acra()), ("coffee", machines::coffee_acra())] {
        let e = extract_commutative(&m).map_err(|err| format!("{name}: {err}"))?;
        n += agree(name, m.alphabet(), EXTRACT_LEN, |s| eval_naive(&e, s).unwrap(), |s| m.eval(s).unwrap())?;
    }
    let flow = machines::flow_acra();
    let spot = eval_naive(&extract_commutative(&flow).unwrap(), &chars("abeb")).unwrap();
    if spot != Some(int(3)) {
        return Err(format!("flow on abeb gives {spot:?}, want 3"));
    }
    if !acra_to_flow_nfa(&flow).unwrap().nfa.is_unambiguous() {
        return Err("flow automaton is ambiguous".into());
    }
    within(COMM_BUDGET, start)?;
    Ok(format!("2 machines, {n} strings, abeb = 3, flow automaton unambiguous"))
}

fn normalization() -> Outcome {
    let mut n = 0;
    for (name, m) in [("shuffle", machines::shuffle_sst()), ("crossing", machines::crossing())] {
        let norm = normalize(&m).map_err(|err| format!("{name}: {err}"))?;
        if !norm.is_normalized() {
            return Err(format!("{name}: result is not normalized"));
        }
        n += agree(name, m.alphabet(), NORMALIZE_LEN, |s| norm.eval(s).unwrap(), |s| m.eval(s).unwrap())?;
    }
    Ok(format!("2 machines, {n} strings"))
}

fn noncommutative_roundtrip() -> Outcome {
    let start = Instant::now();
    let shuffle = normalize(&machines::shuffle_sst()).unwrap();
    let cases = [("echo", machines::echo()), ("two_state", machines::two_state()), ("normalized shuffle", shuffle)];
    let mut n = 0;
    for (name, m) in &cases {
        let e = extract_noncommutative(m).map_err(|err| format!("{name}: {err}"))?;
        n += agree(name, m.alphabet(), EXTRACT_LEN, |s| eval_naive(&e, s).unwrap(), |s| m.eval(s).unwrap())?;
    }
    within(NONCOMM_BUDGET, start)?;
    Ok(format!("3 machines, {n} strings in {:.1?}", start.elapsed()))
}

fn path_shape(m: &Ccra<Word>, q: u32, s: &[char]) -> (Shape, u32) {
    let (end, ups) = m.summary(q, s).unwrap();
    (Shape::of_updates(&ups), end)
}

/// Checks, for every run from every state: the run shape is the concatenation
/// of the shapes of any two pieces, every infix is below or support-equal to
/// the run, and the shortest prefix not strictly below the run has the run's
/// shape.
fn shape_laws(name: &str, m: &Ccra<Word>) -> Result<usize, String> {
    let strings = m.alphabet().strings_up_to(SHAPE_LEN);
    let mut runs = 0;
    for q in 0..m.num_states() as u32 {
        for s in &strings {
            let input: String = s.iter().collect();
            let (whole, _) = path_shape(m, q, s);
            for i in 0..=s.len() {
                let (pre, mid) = path_shape(m, q, &s[..i]);
                let (post, _) = path_shape(m, mid, &s[i..]);
                if shape_concat(&pre, &post) != whole {
                    return Err(format!("{name}: split of {input:?} at {i} from state {q}"));
                }
                for j in i..=s.len() {
                    let (infix, _) = path_shape(m, mid, &s[i..j]);
                    if !matches!(shape_order(&infix, &whole), ShapeOrder::Less | ShapeOrder::EqualSupport) {
                        return Err(format!("{name}: infix {i}..{j} of {input:?} from state {q} is above the run"));
                    }
                }
            }
            let first = (0..=s.len())
                .map(|i| path_shape(m, q, &s[..i]).0)
                .find(|p| shape_order(p, &whole) != ShapeOrder::Less)
                .unwrap();
            if first != whole {
                return Err(format!("{name}: shortest prefix of {input:?} from state {q} has another shape"));
            }
            runs += 1;
        }
    }
    Ok(runs)
}

fn shape_law_machines() -> Vec<(String, Ccra<Word>)> {
    let mut out: Vec<(String, Ccra<Word>)> = vec![
        ("shuffle".into(), machines::shuffle_sst()),
        ("echo".into(), machines::echo()),
        ("two_state".into(), machines::two_state()),
        ("crossing".into(), machines::crossing()),
        ("rotating".into(), machines::rotating()),
    ];
    for path in corpus_files("json").iter().filter(|p| !is_invalid_fixture(p)) {
        if let AnySubject::Str(Subject::Machine(m)) = load_corpus(path) {
            out.push((file_name(path), m));
        }
    }
    out
}

fn shape_laws_all() -> Outcome {
    let mut runs = 0;
    let list = shape_law_machines();
    for (name, m) in &list {
        let norm = normalize(m).map_err(|err| format!("{name}: {err}"))?;
        runs += shape_laws(name, &norm)?;
    }
    Ok(format!("{} machines, {runs} runs", list.len()))
}

fn copyless_validation() -> Outcome {
    let mut ok = 0;
    let library =
        [machines::shuffle_sst(), machines::echo(), machines::two_state(), machines::crossing(), machines::rotating()];
    for m in &library {
        if let Some(v) = m.validate_copyless().first() {
            return Err(format!("library machine rejected: {v:?}"));
        }
        ok += 1;
    }
    for path in corpus_files("json") {
        let name = file_name(&path);
        if is_invalid_fixture(&path) {
            continue;
        }
        load(&Source::File(path.to_string_lossy().into_owned()), &LoadOptions::default())
            .map_err(|e| format!("{name}: {e}"))?;
        ok += 1;
    }
    for (file, want) in [("repeated.json", ViolationKind::Repeated), ("shared.json", ViolationKind::Shared)] {
        let text = std::fs::read_to_string(corpus_dir().join(file)).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        match Ccra::<Word>::from_json(&json) {
            Err(CcraError::NotCopyless(_)) => {}
            other => return Err(format!("{file}: loader gives {other:?}")),
        }
        let m = Ccra::<Word>::from_json_unchecked(&json).map_err(|e| format!("{file}: {e}"))?;
        let kinds: Vec<ViolationKind> = m.validate_copyless().into_iter().map(|v| v.kind).collect();
        if kinds != [want] {
            return Err(format!("{file}: violations {kinds:?}, want [{want:?}]"));
        }
    }
    Ok(format!("{ok} machines pass, repeated and shared fixtures rejected"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("worked examples", worked_examples),
        ("compiler sweep", compile_sweep),
        ("hand machines", hand_machines),
        ("left sum identity", left_sum_identity),
        ("chained sum pipeline", chained_sum_pipeline),
        ("commutative extraction", commutative_roundtrip),
        ("normalization", normalization),
        ("noncommutative extraction", noncommutative_roundtrip),
        ("shape laws", shape_laws_all),
        ("copyless validation", copyless_validation),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
