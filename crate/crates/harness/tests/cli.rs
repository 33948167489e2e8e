use std::fs;
use std::path::Path;
use std::process::Command;

use psl_harness::cli::{run_cli, EXIT_INFERENCE, EXIT_INPUT, EXIT_USAGE};

const PROGRAM: &str = "closed simtext/2. open same/2.\n1 : simtext(A, B) => same(A, B) .\n0.5 : ~same(A, B) .\n";
const FACTS: &str = "simtext\td1\td2\t0.8\nsimtext\td1\td3\t0.2\n";

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn psl(dir: &Path, args: &[&str]) -> Run {
    let mut argv = vec!["psl".to_string()];
    for a in args {
        // relative file arguments resolve against the scratch directory
        let joined = dir.join(a);
        argv.push(if a.ends_with(".psl") || a.ends_with(".tsv") { joined.display().to_string() } else { a.to_string() });
    }
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(argv, &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn scratch() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("prog.psl"), PROGRAM).unwrap();
    fs::write(dir.path().join("facts.tsv"), FACTS).unwrap();
    dir
}

#[test]
fn infer_writes_sorted_query_values() {
    let dir = scratch();
    let run = psl(dir.path(), &["infer", "-p", "prog.psl", "-d", "facts.tsv", "-o", "out.tsv", "--report", "report.tsv"]);
    assert_eq!(run.code, 0, "{}", run.err);
    let out = fs::read_to_string(dir.path().join("out.tsv")).unwrap();
    assert_eq!(out, "same\td1\td2\t0.800000\nsame\td1\td3\t0.200000\n");
    let report = fs::read_to_string(dir.path().join("report.tsv")).unwrap();
    assert!(report.contains("converged true"), "{report}");
}

#[test]
fn weights_file_overrides_program_weights() {
    let dir = scratch();
    fs::write(dir.path().join("w.tsv"), "0\t0.1\n1\t0.5\n").unwrap();
    let run = psl(dir.path(), &["infer", "-p", "prog.psl", "-d", "facts.tsv", "-w", "w.tsv", "-o", "out.tsv", "--report", "r.tsv"]);
    assert_eq!(run.code, 0, "{}", run.err);
    let out = fs::read_to_string(dir.path().join("out.tsv")).unwrap();
    assert!(!out.contains("0.8"), "{out}");
    fs::write(dir.path().join("bad_w.tsv"), "7\t1\n").unwrap();
    let run = psl(dir.path(), &["infer", "-p", "prog.psl", "-d", "facts.tsv", "-w", "bad_w.tsv", "-o", "out.tsv"]);
    assert_eq!(run.code, EXIT_INPUT);
}

#[test]
fn input_errors_exit_one() {
    let dir = scratch();
    fs::write(dir.path().join("bad.psl"), "closed simtext/2.\nopen same/2.\n1 : simtext(A, B) => same(A, B)\n").unwrap();
    let run = psl(dir.path(), &["infer", "-p", "bad.psl", "-d", "facts.tsv", "-o", "out.tsv"]);
    assert_eq!(run.code, EXIT_INPUT);
    assert!(run.err.contains("bad.psl:4:1"), "{}", run.err);
    let run = psl(dir.path(), &["infer", "-p", "missing.psl", "-d", "facts.tsv", "-o", "out.tsv"]);
    assert_eq!(run.code, EXIT_INPUT);
    fs::write(dir.path().join("bad.tsv"), "simtext\td1\n").unwrap();
    let run = psl(dir.path(), &["infer", "-p", "prog.psl", "-d", "bad.tsv", "-o", "out.tsv"]);
    assert_eq!(run.code, EXIT_INPUT);
    assert!(!dir.path().join("out.tsv").exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = scratch();
    assert_eq!(psl(dir.path(), &["infer"]).code, EXIT_USAGE);
    assert_eq!(psl(dir.path(), &["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(psl(dir.path(), &["infer", "-p", "prog.psl", "-d", "facts.tsv", "-o", "o.tsv", "--metric", "l3"]).code, EXIT_USAGE);
    assert_eq!(psl(dir.path(), &["--help"]).code, 0);
}

#[test]
fn infeasible_programs_exit_three() {
    let dir = scratch();
    fs::write(
        dir.path().join("conflict.psl"),
        "closed simtext/2. open same/2.\nHARD : simtext(A, B) => same(A, B) .\nHARD : simtext(A, B) => ~same(A, B) .\n",
    )
    .unwrap();
    let run = psl(dir.path(), &["infer", "-p", "conflict.psl", "-d", "facts.tsv", "-o", "out.tsv"]);
    assert_eq!(run.code, EXIT_INFERENCE);
    assert!(run.err.contains("same(d1, d2)"), "{}", run.err);
    let run = psl(dir.path(), &["oracle", "-p", "conflict.psl", "-d", "facts.tsv", "--grid-step", "0.5"]);
    assert_eq!(run.code, EXIT_INFERENCE);
}

#[test]
fn eval_prints_scores() {
    let dir = scratch();
    fs::write(dir.path().join("pred.tsv"), "same\td1\td2\t0.8\nsame\td1\td3\t0.5\nsame\td2\td3\t0.1\n").unwrap();
    fs::write(dir.path().join("gold.tsv"), "same\td1\td2\nsame\td2\td3\n").unwrap();
    let run = psl(dir.path(), &["eval", "--predictions", "pred.tsv", "--gold", "gold.tsv", "-p", "prog.psl"]);
    assert_eq!(run.code, 0, "{}", run.err);
    assert_eq!(run.out, "precision\trecall\tf1\n0.5000\t0.5000\t0.5000\n");
    let run = psl(dir.path(), &["eval", "--predictions", "pred.tsv", "--gold", "gold.tsv", "--threshold", "0.9"]);
    assert_eq!(run.out, "precision\trecall\tf1\n0.0000\t0.0000\t0.0000\n");
    let run = psl(dir.path(), &["eval", "--predictions", "pred.tsv", "--gold", "gold.tsv", "--threshold", "1.5"]);
    assert_eq!(run.code, EXIT_INPUT);
}

#[test]
fn learn_writes_one_weight_per_soft_rule() {
    let dir = scratch();
    fs::write(dir.path().join("labels.tsv"), "same\td1\td2\t1\nsame\td1\td3\t0\n").unwrap();
    let run = psl(dir.path(), &["learn", "-p", "prog.psl", "-d", "facts.tsv", "-l", "labels.tsv", "-o", "w.tsv", "--iterations", "5"]);
    assert_eq!(run.code, 0, "{}", run.err);
    let text = fs::read_to_string(dir.path().join("w.tsv")).unwrap();
    let indices: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(indices, vec!["0", "1"]);
}

#[test]
fn gen_noise_is_reproducible() {
    let dir = scratch();
    fs::write(dir.path().join("tree.psl"), "closed name(concept, string). closed child/2. open similar/2.\n").unwrap();
    let facts: String = (0..10).map(|i| format!("name\tc{i}\tlabel{i}\nchild\tc0\tc{i}\n")).collect();
    fs::write(dir.path().join("tree.tsv"), facts).unwrap();
    let args = |out: &'static str, seed: &'static str| {
        ["gen-noise", "-p", "tree.psl", "-d", "tree.tsv", "-o", out, "--attr-noise", "0.3", "--struct-noise", "0.2", "--seed", seed]
    };
    assert_eq!(psl(dir.path(), &args("a.tsv", "4")).code, 0);
    assert_eq!(psl(dir.path(), &args("b.tsv", "4")).code, 0);
    assert_eq!(psl(dir.path(), &args("c.tsv", "5")).code, 0);
    let read = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap();
    assert_eq!(read("a.tsv"), read("b.tsv"));
    assert_ne!(read("a.tsv"), read("c.tsv"));
    assert_eq!(read("a.tsv").lines().filter(|l| l.starts_with("child")).count(), 8);
    let run = psl(dir.path(), &["gen-noise", "-p", "tree.psl", "-d", "tree.tsv", "-o", "d.tsv", "--attr-noise", "2"]);
    assert_eq!(run.code, EXIT_INPUT);
}

#[test]
fn oracle_and_desugar() {
    let dir = scratch();
    fs::write(dir.path().join("typed.psl"), PROGRAM.replace("simtext/2", "simtext(doc, doc)").replace("same/2", "same(doc, doc)")).unwrap();
    fs::write(dir.path().join("pair.tsv"), "simtext\td1\td2\t0.8\n").unwrap();
    let run = psl(dir.path(), &["oracle", "-p", "typed.psl", "-d", "pair.tsv", "--grid-step", "0.1", "-o", "grid.tsv"]);
    assert_eq!(run.code, 0, "{}", run.err);
    assert_eq!(run.out, "objective\t0.400000\n");
    fs::write(
        dir.path().join("sets.psl"),
        "closed editor/2. open same/2.\n0.5 : setsim[same]({A.editor}, {B.editor}) => same(A, B) .\n",
    )
    .unwrap();
    let run = psl(dir.path(), &["desugar", "-p", "sets.psl"]);
    assert_eq!(run.code, 0, "{}", run.err);
    assert!(run.out.contains("0.5 : editor(A, M1) & editor(B, M2) & same(M1, M2) => same(A, B) ."), "{}", run.out);
}

#[test]
fn binary_reports_exit_codes() {
    let dir = scratch();
    let status = Command::new(env!("CARGO_BIN_EXE_psl"))
        .args(["infer", "-p", "prog.psl", "-d", "facts.tsv", "-o", "out.tsv", "--report", "r.tsv"])
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let status = Command::new(env!("CARGO_BIN_EXE_psl")).arg("eval").current_dir(dir.path()).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
}
