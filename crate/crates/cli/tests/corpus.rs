//! The example corpus through the command layer: printing and re-parsing,
//! compilation, and extraction checked against the source machines.

use std::path::{Path, PathBuf};

use regcomb::monoid::MonoidKind;
use regcomb::{compile, Monoid, E};
use regcomb_cli::commands::{
    check_equiv, cmd_extract_comm, cmd_extract_noncomm, load, load_expr, AnySubject, EquivReport, LoadOptions, Source,
    Subject, DEFAULT_LIMIT,
};
use regcomb_cli::surface::{parse_expr, print_expr, same_structure};

fn corpus(ext: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    files
}

fn load_file(path: &Path) -> Result<AnySubject, regcomb_cli::commands::CliError> {
    load(&Source::File(path.to_string_lossy().into_owned()), &LoadOptions::default())
}

fn assert_equivalent<D: Monoid>(what: &str, lhs: &Subject<D>, rhs: &Subject<D>, max_len: usize) {
    let report = check_equiv(lhs, rhs, max_len, DEFAULT_LIMIT).unwrap();
    assert!(matches!(report, EquivReport::Equivalent { .. }), "{what}: {report}");
}

fn reprint<D: Monoid>(what: &str, e: &E<D>) {
    let text = print_expr(e);
    let back: E<D> = parse_expr(&text, Some(e.alphabet())).unwrap_or_else(|err| panic!("{what}: {err}\n{text}"));
    assert!(same_structure(e, &back), "{what} reprints as\n{text}");
}

fn compiled<D: Monoid>(what: &str, e: &E<D>) {
    let c = compile(e).unwrap_or_else(|err| panic!("{what}: {err}"));
    assert_equivalent(what, &Subject::Expr(e.clone()), &Subject::Cascade(c), 5);
}

#[test]
fn expressions_reprint_and_compile() {
    let files = corpus("expr");
    assert!(files.len() >= 9);
    for path in files {
        let what = path.display().to_string();
        match load_file(&path).unwrap() {
            AnySubject::Int(Subject::Expr(e)) => {
                reprint(&what, &e);
                compiled(&what, &e);
            }
            AnySubject::Str(Subject::Expr(e)) => {
                reprint(&what, &e);
                compiled(&what, &e);
            }
            _ => panic!("{what} did not load as an expression"),
        }
    }
}

#[test]
fn printed_extractions_parse_back_to_the_machine() {
    for path in corpus("json") {
        let what = path.display().to_string();
        let Ok(subject) = load_file(&path) else {
            assert!(what.ends_with("repeated.json") || what.ends_with("shared.json"), "{what} failed to load");
            continue;
        };
        let (text, machine) = match &subject {
            AnySubject::Int(m @ Subject::Additive(_)) => {
                (cmd_extract_comm(&subject).unwrap(), AnySubject::Int(m.clone()))
            }
            AnySubject::Str(m @ Subject::Machine(_)) => {
                (cmd_extract_noncomm(&subject, false, Some(4)).unwrap(), AnySubject::Str(m.clone()))
            }
            _ => continue,
        };
        let opts = match &machine {
            AnySubject::Int(m) => LoadOptions { monoid: Some(MonoidKind::Int), alphabet: Some(m.alphabet().clone()) },
            AnySubject::Str(m) => LoadOptions { monoid: Some(MonoidKind::Str), alphabet: Some(m.alphabet().clone()) },
        };
        match (load_expr(&text, &opts).unwrap(), &machine) {
            (AnySubject::Int(e), AnySubject::Int(m)) => assert_equivalent(&what, &e, m, 5),
            (AnySubject::Str(e), AnySubject::Str(m)) => assert_equivalent(&what, &e, m, 5),
            _ => panic!("{what}: monoid changed on reparse"),
        }
    }
}
