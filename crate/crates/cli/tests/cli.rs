use std::path::Path;
use std::process::{Command, Output};

fn litcoref(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_litcoref"))
        .current_dir(dir)
        .env_remove("LITCOREF_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(o),
        String::from_utf8_lossy(&o.stderr)
    );
}

/// Four one-token mentions a b c d with the given chain per mention.
fn four_mentions(chains: [&str; 4]) -> String {
    let mentions: Vec<String> = chains
        .iter()
        .enumerate()
        .map(|(i, c)| format!(r#"{{"start": {i}, "end": {i}, "category": "proper", "chain": "{c}"}}"#))
        .collect();
    format!(
        r#"{{"doc_id": "w", "tokens": [{{"text": "a"}}, {{"text": "b"}}, {{"text": "c"}}, {{"text": "d"}}], "mentions": [{}]}}"#,
        mentions.join(", ")
    )
}

fn metric(out: &str, name: &str, column: usize) -> f64 {
    let line = out.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("no {name} in\n{out}"));
    line.split('\t').nth(column).unwrap().parse().unwrap()
}

#[test]
fn score_worked_fixture() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.json"), four_mentions(["x", "x", "x", "y"])).unwrap();
    std::fs::write(dir.path().join("p.json"), four_mentions(["x", "x", "y", "y"])).unwrap();
    let o = litcoref(dir.path(), &["score", "--gold", "g.json", "--pred", "p.json"]);
    ok(&o);
    let out = stdout(&o);
    assert!((metric(&out, "MUC", 3) - 0.5).abs() < 1e-5);
    assert!((metric(&out, "B3", 3) - 0.70588).abs() < 1e-5);
    assert!((metric(&out, "CEAFe", 3) - 0.73333).abs() < 1e-5);
    assert!((metric(&out, "CoNLL", 3) - 0.64640).abs() < 1e-5);
    let manifest = std::fs::read_to_string(dir.path().join("litcoref-manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(v["command"], "score");
    assert_eq!(v["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(v["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = litcoref(dir.path(), &["stats", "--no-such-flag", "x.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(litcoref(dir.path(), &[]).status.code(), Some(1));
    assert_eq!(litcoref(dir.path(), &["--help"]).status.code(), Some(0));

    // mention past the last token
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"doc_id": "b", "tokens": [{"text": "a"}], "mentions": [{"start": 0, "end": 3}]}"#,
    )
    .unwrap();
    let o = litcoref(dir.path(), &["validate", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(litcoref(dir.path(), &["stats", "missing.json"]).status.code(), Some(2));

    std::fs::write(dir.path().join("bad.toml"), "[pipeline]\nnoun_window = 0\n").unwrap();
    std::fs::write(dir.path().join("g.json"), four_mentions(["x", "x", "x", "y"])).unwrap();
    let o = litcoref(
        dir.path(),
        &["--config", "bad.toml", "resolve", "g.json", "--gold-mentions", "--oracle", "--out-dir", "o"],
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[synth]\nn_docs = 1\ntokens_per_doc = 800\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_litcoref"))
        .current_dir(dir.path())
        .env("LITCOREF_CONFIG", "c.toml")
        .args(["synth", "--out-dir", "s"])
        .output()
        .unwrap();
    ok(&o);
    let docs: Vec<_> = std::fs::read_dir(dir.path().join("s"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "emb"))
        .collect();
    assert_eq!(docs.len(), 1);
}

#[test]
fn synth_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        ok(&litcoref(dir.path(), &["--jobs", "1", "--seed", "9", "synth", "--family", "short", "--out-dir", out]));
    }
    for f in ["synth-0000.json", "synth-0000.emb", "firstnames.tsv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn resolve_strategies_on_window_split_family() {
    let dir = tempfile::tempdir().unwrap();
    ok(&litcoref(dir.path(), &["synth", "--family", "window-split", "--seed", "2", "--out-dir", "c"]));
    let mut f1 = Vec::new();
    for s in ["left-to-right", "easy-first-global"] {
        let o = litcoref(
            dir.path(),
            &["resolve", "c", "--gold-mentions", "--noisy-oracle", "0", "--strategy", s, "--out-dir", s, "--taxonomy"],
        );
        ok(&o);
        f1.push(metric(&stdout(&o), "CoNLL", 3));
        assert!(dir.path().join(s).join("synth-0000.chains.json").is_file());
        assert!(dir.path().join(s).join("manifest.json").is_file());
    }
    assert!(f1[1] >= f1[0] + 0.03, "{f1:?}");

    // predictions written by resolve score back to the printed figure
    let o = litcoref(dir.path(), &["score", "--gold", "c", "--pred", "easy-first-global"]);
    ok(&o);
    assert!((metric(&stdout(&o), "CoNLL", 3) - f1[1]).abs() < 1e-5);
}

#[test]
fn statistics_sweep_and_gender() {
    let dir = tempfile::tempdir().unwrap();
    ok(&litcoref(dir.path(), &["synth", "--family", "gender", "--out-dir", "c"]));

    let o = litcoref(dir.path(), &["stats", "c"]);
    ok(&o);
    assert!(stdout(&o).contains("documents\t4"));
    let o = litcoref(dir.path(), &["antecedent-dist", "c", "--format", "json"]);
    ok(&o);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);

    let o = litcoref(
        dir.path(),
        &["length-sweep", "c", "--lengths", "500,1000,5000", "--oracle", "--out-dir", "sweep"],
    );
    ok(&o);
    let tsv = std::fs::read_to_string(dir.path().join("sweep/sweep.tsv")).unwrap();
    let rows: Vec<&str> = tsv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("500\tleft_to_right\t4\t24\t"));
    assert!(rows[3].ends_with("NA"));
    assert!(dir.path().join("sweep/sweep.dat").is_file());

    let o = litcoref(
        dir.path(),
        &["gender", "c", "--firstnames", "c/firstnames.tsv", "--out-dir", "g"],
    );
    ok(&o);
    let out = stdout(&o);
    let row = |stage: &str| -> Vec<f64> {
        out.lines()
            .find(|l| l.starts_with(&format!("{stage}\tall")))
            .unwrap()
            .split('\t')
            .skip(2)
            .map(|x| x.parse().unwrap())
            .collect()
    };
    assert_eq!(row("rules")[0], 1.0);
    assert!(row("+coreference")[1] > row("+lexicon")[1]);
    assert!(row("+lexicon")[1] > row("rules")[1]);
    assert!(dir.path().join("g/assignments.jsonl").is_file());
}

#[test]
fn train_pairs_then_resolve() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("small.toml"),
        "[synth]\nn_docs = 2\ntokens_per_doc = 600\nembedding_dim = 8\n\
         [pair_train]\nmax_epochs = 2\nhidden = 8\nlearning_rate = 0.003\n",
    )
    .unwrap();
    let cfg = ["--config", "small.toml"];
    ok(&litcoref(dir.path(), &[&cfg[..], &["synth", "--out-dir", "c"]].concat()));
    let o = litcoref(dir.path(), &[&cfg[..], &["train-pairs", "c", "--out", "m.prps", "--log", "m.jsonl"]].concat());
    ok(&o);
    assert!(dir.path().join("m.prps.manifest.json").is_file());
    assert_eq!(std::fs::read_to_string(dir.path().join("m.jsonl")).unwrap().lines().count(), 2);
    let o = litcoref(
        dir.path(),
        &[&cfg[..], &["resolve", "c", "--gold-mentions", "--scorer", "m.prps", "--out-dir", "r"]].concat(),
    );
    ok(&o);
    let f = metric(&stdout(&o), "CoNLL", 3);
    assert!((0.0..=1.0).contains(&f));
}

#[test]
fn train_detector_then_detect() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("det.toml"),
        "[capitalized]\nn_docs = 3\ntokens_per_doc = 200\n\
         [tagger]\nprojection_dim = 8\nhidden_size = 8\nencoder = { kind = \"mixer\", window = 1 }\n\
         [tagger_train]\nmax_epochs = 6\nlearning_rate = 0.02\n",
    )
    .unwrap();
    let cfg = ["--config", "det.toml"];
    ok(&litcoref(dir.path(), &[&cfg[..], &["synth", "--family", "capitalized", "--out-dir", "c"]].concat()));
    let o = litcoref(dir.path(), &[&cfg[..], &["train-detector", "c", "--out", "t0.prtm"]].concat());
    ok(&o);
    let o = litcoref(dir.path(), &["detect", "c", "--level0", "t0.prtm", "--out-dir", "d"]);
    ok(&o);
    let f1: f64 = stdout(&o)
        .lines()
        .find(|l| l.starts_with("f1"))
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(f1 > 0.9, "{}", stdout(&o));
    // detected mentions feed the resolver
    let o = litcoref(
        dir.path(),
        &["resolve", "c", "--detector", "t0.prtm", "--oracle", "--out-dir", "r"],
    );
    ok(&o);
}
