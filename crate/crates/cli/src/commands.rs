//! Loading inputs and running the subcommands.

use std::fmt;
use std::path::Path;

use regcomb::ccra::{declared_kind, declared_monoid, Acra, Cascade, Ccra, Label, Stage, Update};
use regcomb::compile::{cascade_preimage, compile};
use regcomb::expr::domain_dfa;
use regcomb::extract_comm::extract_commutative;
use regcomb::extract_noncomm::{extract_noncommutative_with, ExtractOptions};
use regcomb::monoid::{render_opt, MonoidKind, MonoidValue};
use regcomb::{eval_naive, Alphabet, Dfa, Int, Monoid, Word, E};
use serde_json::Value as Json;
use thiserror::Error;

use crate::surface::{self, Ast};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Semantic(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Semantic(_) => 3,
        }
    }
}

fn parse_err(e: impl fmt::Display) -> CliError {
    CliError::Parse(e.to_string())
}

fn sem_err(e: impl fmt::Display) -> CliError {
    CliError::Semantic(e.to_string())
}

/// Where a function comes from: inline expression text or a file. Files
/// ending in `.json` hold machines or cascades; other files hold expressions.
#[derive(Clone, Debug)]
pub enum Source {
    Text(String),
    File(String),
    Machine(String),
}

impl Source {
    /// A path to an existing file, or else inline expression text.
    pub fn guess(arg: &str) -> Source {
        if Path::new(arg).is_file() {
            Source::File(arg.to_string())
        } else {
            Source::Text(arg.to_string())
        }
    }
}

/// A function in one of its representations.
#[derive(Clone, Debug)]
pub enum Subject<D: Monoid> {
    Expr(E<D>),
    Machine(Ccra<D>),
    Additive(Acra<D>),
    Cascade(Cascade<D>),
}

impl<D: Monoid> Subject<D> {
    pub fn alphabet(&self) -> &Alphabet {
        match self {
            Subject::Expr(e) => e.alphabet(),
            Subject::Machine(m) => m.alphabet(),
            Subject::Additive(m) => m.alphabet(),
            Subject::Cascade(c) => c.input_alphabet(),
        }
    }

    pub fn eval(&self, sigma: &[char]) -> Result<Option<D>, CliError> {
        match self {
            Subject::Expr(e) => eval_naive(e, sigma).map_err(sem_err),
            Subject::Machine(m) => m.eval(sigma).map_err(sem_err),
            Subject::Additive(m) => m.eval(sigma).map_err(sem_err),
            Subject::Cascade(c) => c.eval(sigma).map_err(sem_err),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Subject::Expr(_) => "expression",
            Subject::Machine(_) => "machine",
            Subject::Additive(_) => "additive machine",
            Subject::Cascade(_) => "cascade",
        }
    }
}

/// A subject with its monoid fixed at run time.
#[derive(Clone, Debug)]
pub enum AnySubject {
    Int(Subject<Int>),
    Str(Subject<Word>),
}

/// Options shared by the loaders.
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    pub monoid: Option<MonoidKind>,
    pub alphabet: Option<Alphabet>,
}

fn read(path: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))
}

pub fn load(source: &Source, opts: &LoadOptions) -> Result<AnySubject, CliError> {
    match source {
        Source::Machine(path) => load_machine(&read(path)?, opts),
        Source::File(path) if path.ends_with(".json") => load_machine(&read(path)?, opts),
        Source::File(path) => load_expr(&read(path)?, opts),
        Source::Text(text) => load_expr(text, opts),
    }
}

pub fn load_expr(text: &str, opts: &LoadOptions) -> Result<AnySubject, CliError> {
    let ast = surface::parse_ast(text).map_err(parse_err)?;
    let alphabet = match &opts.alphabet {
        Some(a) => a.clone(),
        None => surface::mentioned_symbols(&ast).map_err(parse_err)?,
    };
    let monoid = match opts.monoid {
        Some(m) => m,
        None if surface::looks_numeric(&ast).map_err(parse_err)? => MonoidKind::Int,
        None => MonoidKind::Str,
    };
    fn elab<D: Monoid>(ast: &Ast, alphabet: &Alphabet) -> Result<E<D>, CliError> {
        surface::elaborate(ast, alphabet).map_err(|e| match e {
            surface::SurfaceError::Expr(x) => sem_err(x),
            other => parse_err(other),
        })
    }
    Ok(match monoid {
        MonoidKind::Int => AnySubject::Int(Subject::Expr(elab(&ast, &alphabet)?)),
        MonoidKind::Str => AnySubject::Str(Subject::Expr(elab(&ast, &alphabet)?)),
    })
}

pub fn load_machine(text: &str, opts: &LoadOptions) -> Result<AnySubject, CliError> {
    let json: Json = serde_json::from_str(text).map_err(parse_err)?;
    let declared = declared_monoid(&json).map(|m| m.parse::<MonoidKind>()).transpose().map_err(parse_err)?;
    let monoid = opts.monoid.or(declared).unwrap_or(MonoidKind::Str);
    fn typed<D: Monoid>(json: &Json) -> Result<Subject<D>, CliError> {
        let staged = json.get("stages").is_some() || json.get("lookahead").is_some();
        Ok(if staged {
            Subject::Cascade(Cascade::from_json(json).map_err(parse_err)?)
        } else if declared_kind(json).as_deref() == Some("acra") {
            Subject::Additive(Acra::from_json(json).map_err(parse_err)?)
        } else {
            Subject::Machine(Ccra::from_json(json).map_err(parse_err)?)
        })
    }
    Ok(match monoid {
        MonoidKind::Int => AnySubject::Int(typed(&json)?),
        MonoidKind::Str => AnySubject::Str(typed(&json)?),
    })
}

/// Outputs print raw: strings without quotes, `bot` where undefined.
pub fn render_value<D: Monoid>(v: &Option<D>) -> String {
    match v.as_ref().map(|d| d.to_value()) {
        Some(MonoidValue::Str(s)) => s,
        _ => render_opt(v),
    }
}

pub fn cmd_eval(subject: &AnySubject, inputs: &[String]) -> Result<String, CliError> {
    fn go<D: Monoid>(s: &Subject<D>, inputs: &[String]) -> Result<String, CliError> {
        let mut out = String::new();
        for input in inputs {
            let sigma: Vec<char> = input.chars().collect();
            if let Some(c) = sigma.iter().find(|c| !s.alphabet().contains(c)) {
                return Err(sem_err(format!("input symbol {c:?} is not in the alphabet {:?}", s.alphabet())));
            }
            out.push_str(&render_value(&s.eval(&sigma)?));
            out.push('\n');
        }
        Ok(out)
    }
    match subject {
        AnySubject::Int(s) => go(s, inputs),
        AnySubject::Str(s) => go(s, inputs),
    }
}

pub fn cmd_compile(subject: &AnySubject) -> Result<String, CliError> {
    fn go<D: Monoid>(s: &Subject<D>) -> Result<String, CliError> {
        match s {
            Subject::Expr(e) => Ok(compile(e).map_err(sem_err)?.to_json_string()),
            other => Err(CliError::Usage(format!("compile expects an expression, got a {}", other.kind()))),
        }
    }
    match subject {
        AnySubject::Int(s) => go(s),
        AnySubject::Str(s) => go(s),
    }
}

pub fn cmd_dot(subject: &AnySubject) -> Result<String, CliError> {
    fn go<D: Monoid>(s: &Subject<D>) -> Result<String, CliError> {
        Ok(match s {
            Subject::Expr(e) => compile(e).map_err(sem_err)?.to_dot(),
            Subject::Machine(m) => m.to_dot("machine"),
            Subject::Additive(m) => m.to_ccra().to_dot("machine"),
            Subject::Cascade(c) => c.to_dot(),
        })
    }
    match subject {
        AnySubject::Int(s) => go(s),
        AnySubject::Str(s) => go(s),
    }
}

/// The domain as a regex, or as a DOT graph when `dot` is set.
pub fn cmd_domain(subject: &AnySubject, dot: bool) -> Result<String, CliError> {
    fn go<D: Monoid>(s: &Subject<D>) -> Result<Dfa, CliError> {
        Ok(match s {
            Subject::Expr(e) => domain_dfa(e).map_err(sem_err)?,
            Subject::Machine(m) => m.domain(),
            Subject::Additive(m) => m.to_ccra().domain(),
            Subject::Cascade(c) => {
                // Swap the last stage for one that outputs the empty string
                // exactly where it is defined, then take a preimage.
                let last = c.last();
                let probe = Stage { lookahead: last.lookahead.clone(), machine: label_echo(&last.machine.domain()) };
                let echo = Cascade::new(c.front().to_vec(), probe).map_err(sem_err)?;
                cascade_preimage(&echo, &Dfa::universal(&Alphabet::new([]))).map_err(sem_err)?
            }
        })
    }
    let d = match subject {
        AnySubject::Int(s) => go(s)?,
        AnySubject::Str(s) => go(s)?,
    }
    .minimize();
    Ok(if dot { d.to_dot("domain") } else { surface::dfa_regex_text(&d) + "\n" })
}

/// A register-free machine over labels that outputs the empty string on `accepted`.
fn label_echo(accepted: &Dfa<Label>) -> Ccra<Word, Label> {
    Ccra::explore(
        accepted.alphabet(),
        vec![],
        accepted.start(),
        |q, a| (accepted.next(*q, a), vec![]),
        |q| accepted.is_accepting(*q).then(Update::zero),
        |q, _| format!("q{q}"),
    )
}

pub fn cmd_extract_comm(subject: &AnySubject) -> Result<String, CliError> {
    match subject {
        AnySubject::Int(Subject::Additive(m)) => {
            let e = extract_commutative(m).map_err(sem_err)?;
            Ok(surface::print_expr(&e) + "\n")
        }
        AnySubject::Int(other) => {
            Err(CliError::Usage(format!("extract-comm expects an additive machine, got a {}", other.kind())))
        }
        AnySubject::Str(_) => Err(sem_err("extract-comm needs a commutative monoid; the string monoid is not")),
    }
}

/// Extracts an expression; with `check_len`, also compares it with the
/// machine on every input up to that length.
pub fn cmd_extract_noncomm(
    subject: &AnySubject,
    skip_normalize: bool,
    check_len: Option<usize>,
) -> Result<String, CliError> {
    fn go<D: Monoid>(s: &Subject<D>, opts: ExtractOptions, check_len: Option<usize>) -> Result<String, CliError> {
        let m = match s {
            Subject::Machine(m) => m.clone(),
            Subject::Additive(m) => m.to_ccra(),
            other => return Err(CliError::Usage(format!("extract-noncomm expects a machine, got a {}", other.kind()))),
        };
        let e = extract_noncommutative_with(&m, opts).map_err(sem_err)?;
        if let Some(n) = check_len {
            let report = check_equiv(&Subject::Expr(e.clone()), &Subject::Machine(m), n, DEFAULT_LIMIT)?;
            if let EquivReport::Counterexample { .. } = report {
                return Err(sem_err(format!("extraction self-check failed: {report}")));
            }
        }
        Ok(surface::print_expr(&e) + "\n")
    }
    let opts = ExtractOptions { skip_normalize };
    match subject {
        AnySubject::Int(s) => go(s, opts, check_len),
        AnySubject::Str(s) => go(s, opts, check_len),
    }
}

/// Default cap on the number of strings compared.
pub const DEFAULT_LIMIT: u64 = 2_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EquivReport {
    Equivalent { max_len: usize, strings: u64 },
    Counterexample { input: String, lhs: String, rhs: String },
}

impl fmt::Display for EquivReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquivReport::Equivalent { max_len, strings } => write!(f, "equivalent up to {max_len} ({strings} strings)"),
            EquivReport::Counterexample { input, lhs, rhs } => write!(f, "counterexample {input:?}: {lhs} vs {rhs}"),
        }
    }
}

/// Compares two functions on every string up to `max_len`, undefinedness included.
pub fn check_equiv<D: Monoid>(
    lhs: &Subject<D>,
    rhs: &Subject<D>,
    max_len: usize,
    limit: u64,
) -> Result<EquivReport, CliError> {
    let alphabet = lhs.alphabet().union(rhs.alphabet());
    let k = alphabet.len() as u64;
    let total = (0..=max_len as u32).try_fold(0u64, |acc, n| k.checked_pow(n).and_then(|p| acc.checked_add(p)));
    match total {
        Some(t) if t <= limit => {}
        _ => {
            return Err(sem_err(format!(
                "more than {limit} strings up to length {max_len}; lower --max-len or raise --limit"
            )))
        }
    }
    let mut strings = 0;
    for sigma in alphabet.strings_up_to(max_len) {
        let in_l = sigma.iter().all(|c| lhs.alphabet().contains(c));
        let in_r = sigma.iter().all(|c| rhs.alphabet().contains(c));
        let a = if in_l { lhs.eval(&sigma)? } else { None };
        let b = if in_r { rhs.eval(&sigma)? } else { None };
        strings += 1;
        if a != b {
            return Ok(EquivReport::Counterexample {
                input: sigma.iter().collect(),
                lhs: render_value(&a),
                rhs: render_value(&b),
            });
        }
    }
    Ok(EquivReport::Equivalent { max_len, strings })
}

pub fn cmd_check_equiv(
    lhs: &AnySubject,
    rhs: &AnySubject,
    max_len: usize,
    limit: u64,
) -> Result<EquivReport, CliError> {
    match (lhs, rhs) {
        (AnySubject::Int(a), AnySubject::Int(b)) => check_equiv(a, b, max_len, limit),
        (AnySubject::Str(a), AnySubject::Str(b)) => check_equiv(a, b, max_len, limit),
        _ => Err(sem_err("the two sides have different monoids; pass --monoid")),
    }
}
