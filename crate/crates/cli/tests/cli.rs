use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tagreduce"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const ADJECTIVES: &str = "\
the\tAT
easier\tJJR
path\tNN

the\tAT
easiest\tJJT
path\tNN

a\tAT
harder\tJJR
climb\tNN

a\tAT
hardest\tJJT
climb\tNN
";

fn synthetic(dir: &Path) {
    ok(
        &[
            "gen-synthetic",
            "--sentences",
            "1500",
            "--vocab",
            "800",
            "--tags",
            "10",
            "--pairs",
            "2",
            "-o",
            "c.txt",
        ],
        dir,
    );
    ok(
        &[
            "split",
            "c.txt",
            "--split",
            "0.7,0.15,0.15",
            "--out-dir",
            "parts",
        ],
        dir,
    );
}

#[test]
fn train_writes_a_model() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.txt", ADJECTIVES);
    ok(&["train", "c.txt", "-o", "m.txt"], dir.path());
    let model = fs::read_to_string(dir.path().join("m.txt")).unwrap();
    assert!(model.contains("LAMBDA\t"));
    assert!(model.contains("EMIT\tJJR easier\t1"));
}

#[test]
fn train_reports_missing_and_malformed_input() {
    let dir = TempDir::new().unwrap();
    let out = run(&["train", "nope.txt", "-o", "m.txt"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));

    write(dir.path(), "bad.txt", "the\tAT\ncliff NN\n");
    let out = run(&["train", "bad.txt", "-o", "m.txt"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn cluster_merges_planted_pairs_deterministically() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    synthetic(d);
    let args = [
        "cluster",
        "--train",
        "parts/A.txt",
        "--clustering",
        "parts/B.txt",
        "--map",
        "map1.txt",
        "--trace",
        "t1.json",
    ];
    ok(&args, d);
    let map = fs::read_to_string(d.join("map1.txt")).unwrap();
    assert!(
        map.lines().any(|l| l.contains(',')),
        "no merged cluster:\n{map}"
    );

    ok(
        &[
            "cluster",
            "--train",
            "parts/A.txt",
            "--clustering",
            "parts/B.txt",
            "--map",
            "map2.txt",
            "--trace",
            "t2.json",
            "--threads",
            "3",
        ],
        d,
    );
    assert_eq!(map, fs::read_to_string(d.join("map2.txt")).unwrap());
    assert_eq!(
        fs::read(d.join("t1.json")).unwrap(),
        fs::read(d.join("t2.json")).unwrap()
    );
    let trace: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("t1.json")).unwrap()).unwrap();
    assert_eq!(trace["initial_tagset_size"], 10);
    assert!(trace["final_tagset_size"].as_u64().unwrap() < 10);
}

#[test]
fn fully_constrained_lexicon_gives_identity_map() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "a.txt", "x\tA\nx\tB\n\nx\tC\ny\tA\n\n");
    write(d, "b.txt", "y\tA\nx\tC\n");
    ok(
        &[
            "cluster",
            "--train",
            "a.txt",
            "--clustering",
            "b.txt",
            "--map",
            "map.txt",
        ],
        d,
    );
    assert_eq!(fs::read_to_string(d.join("map.txt")).unwrap(), "A\nB\nC\n");
}

#[test]
fn empty_clustering_part_fails() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "a.txt", ADJECTIVES);
    write(d, "b.txt", "");
    let out = run(
        &[
            "cluster",
            "--train",
            "a.txt",
            "--clustering",
            "b.txt",
            "--map",
            "map.txt",
        ],
        d,
    );
    assert!(!out.status.success());
}

#[test]
fn tag_restores_original_tags() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "c.txt", ADJECTIVES);
    write(d, "map.txt", "AT\nJJR,JJT\nNN\n");
    write(d, "in.txt", "the\neasier\npath\n\na\nhardest\nclimb\n");
    ok(&["train", "c.txt", "-o", "m.txt"], d);
    let out = ok(
        &[
            "tag",
            "-m",
            "m.txt",
            "--map",
            "map.txt",
            "--lexicon",
            "c.txt",
            "in.txt",
            "--show-clusters",
        ],
        d,
    );
    assert_eq!(
        out,
        "the\tAT\tAT\neasier\tJJR\t{JJR,JJT}\npath\tNN\tNN\n\na\tAT\tAT\nhardest\tJJT\t{JJR,JJT}\nclimb\tNN\tNN\n\n"
    );
}

#[test]
fn identity_map_matches_plain_tagging() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    synthetic(d);
    ok(&["train", "parts/A.txt", "-o", "m.txt"], d);
    let tags = fs::read_to_string(d.join("parts/C.txt")).unwrap();
    let words: String = tags
        .lines()
        .map(|l| format!("{}\n", l.split('\t').next().unwrap()))
        .collect();
    write(d, "in.txt", &words);
    let identity: String = fs::read_to_string(d.join("parts/A.txt"))
        .unwrap()
        .lines()
        .filter_map(|l| l.split('\t').nth(1))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|t| format!("{t}\n"))
        .collect();
    write(d, "identity.txt", &identity);
    let plain = ok(
        &["tag", "-m", "m.txt", "--lexicon", "parts/A.txt", "in.txt"],
        d,
    );
    let mapped = ok(
        &[
            "tag",
            "-m",
            "m.txt",
            "--map",
            "identity.txt",
            "--lexicon",
            "parts/A.txt",
            "in.txt",
        ],
        d,
    );
    assert_eq!(plain, mapped);
}

#[test]
fn verbose_marks_guessed_unknown_words() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "c.txt", ADJECTIVES);
    ok(&["train", "c.txt", "-o", "m.txt"], d);
    let mut child = bin()
        .args(["tag", "-m", "m.txt", "--lexicon", "c.txt", "--verbose"])
        .current_dir(d)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"the\nzebra\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "the\tAT");
    assert!(
        lines[1].starts_with("zebra\t") && lines[1].ends_with("\t#guess"),
        "{text}"
    );
}

#[test]
fn inadmissible_map_is_rejected() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "c.txt", "cliff\tNN\n\ncliff\tNP\nthe\tAT\n");
    write(d, "map.txt", "AT\nNN,NP\n");
    write(d, "in.txt", "cliff\n");
    ok(&["train", "c.txt", "-o", "m.txt"], d);
    let out = run(
        &[
            "tag",
            "-m",
            "m.txt",
            "--map",
            "map.txt",
            "--lexicon",
            "c.txt",
            "in.txt",
        ],
        d,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cliff"));
}

#[test]
fn eval_reports_accuracy() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "c.txt", ADJECTIVES);
    ok(&["train", "c.txt", "-o", "m.txt"], d);
    let out = ok(&["eval", "-m", "m.txt", "--lexicon", "c.txt", "c.txt"], d);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["total_tokens"], 12);
    assert_eq!(report["known_accuracy"], 1.0);
}

#[test]
fn experiment_runs_default_and_custom_plans() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        &[
            "gen-synthetic",
            "--sentences",
            "800",
            "--vocab",
            "600",
            "--tags",
            "8",
            "--pairs",
            "1",
            "-o",
            "c.txt",
        ],
        d,
    );
    write(
        d,
        "four.toml",
        "corpus = \"c.txt\"\nsplit = [0.8, 0.1, 0.1]\n",
    );
    let out = ok(&["experiment", "four.toml"], d);
    let reports: serde_json::Value = serde_json::from_str(&out).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 4);
    assert_eq!(reports[0]["mode"], "baseline");
    assert_eq!(reports[2]["mode"], "clustered");
    assert_eq!(
        reports[0]["test_fingerprint"],
        reports[2]["test_fingerprint"]
    );
    assert_eq!(out, ok(&["experiment", "four.toml"], d));

    write(
        d,
        "baseline.toml",
        "corpus = \"c.txt\"\nsplit = [0.8, 0.1, 0.1]\n\n[[run]]\nname = \"b\"\nmode = \"baseline\"\ntraining = [\"A\"]\nclustering = [\"B\"]\ntesting = \"C\"\n",
    );
    ok(
        &[
            "experiment",
            "baseline.toml",
            "--split-mode",
            "shuffled",
            "--seed",
            "7",
            "-o",
            "r.json",
        ],
        d,
    );
    let reports: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 1);

    let out = run(&["experiment", "four.toml", "--split", "0.8,0.3,0.1"], d);
    assert!(!out.status.success());
}

#[test]
fn gen_synthetic_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let args = [
        "gen-synthetic",
        "--sentences",
        "50",
        "--vocab",
        "200",
        "--seed",
        "4",
    ];
    assert_eq!(ok(&args, d), ok(&args, d));
    let out = run(&args, d);
    assert_eq!(
        String::from_utf8_lossy(&out.stderr)
            .matches("planted")
            .count(),
        3
    );
}
