use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use fproxkit::ingest::{read_products, sample_corpus, write_products, LoadOptions, MappingConfig};

const SAMPLE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_products.csv");

fn fproxkit(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fproxkit")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn ok(args: &[&str]) {
    let (code, stderr) = fproxkit(args);
    assert_eq!(code, 0, "{args:?} failed: {stderr}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs the whole pipeline into `dir` and returns every non-manifest output by file name.
fn pipeline(dir: &Path, threads: &str) -> BTreeMap<String, Vec<u8>> {
    let p = |name: &str| dir.join(name);
    let clean = p("clean.csv");
    let t = ["--threads", threads];
    ok(&[&t[..], &["ingest", "--input", SAMPLE, "--complete", "--out", s(&clean)]].concat());
    ok(&[&t[..], &["nutriscore", "--input", s(&clean), "--out", s(&p("nutriscore.csv"))]].concat());
    ok(&[&t[..], &["siga", "--input", s(&clean), "--out", s(&p("siga.csv"))]].concat());
    ok(&[&t[..], &["profile", "--input", s(&clean), "--out", s(&p("stats.json"))]].concat());
    ok(&[&t[..], &["parse-ingredients", "--input", s(&clean), "--out", s(&p("ingredients.csv"))]].concat());
    let model = p("model.json");
    ok(&[&t[..], &["train", "--input", s(&clean), "--n-trees", "30", "--out", s(&model)]].concat());
    ok(&[&t[..], &["predict", "--input", SAMPLE, "--model", s(&model), "--out", s(&p("predict.csv"))]].concat());
    ok(&[&t[..], &["fpro", "--input", SAMPLE, "--model", s(&model), "--out", s(&p("fpro.csv"))]].concat());
    ok(&[&t[..], &["evaluate", "--input", s(&clean), "--grid", "small", "--out", s(&p("eval.json"))]].concat());
    ok(&[
        &t[..],
        &["report", "--input", s(&p("eval.json")), "--scores", s(&p("fpro.csv")), "--products", SAMPLE, "--out", s(&p("table.csv"))],
    ]
    .concat());

    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path: PathBuf = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if !name.ends_with(".manifest.json") {
            files.insert(name, std::fs::read(&path).unwrap());
        }
    }
    files
}

#[test]
fn pipeline_is_reproducible_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path(), "1");
    let second = pipeline(b.path(), "4");
    for name in ["clean.csv", "model.json", "fpro.csv", "eval.json", "eval.json.folds.csv", "eval.json.curves.csv", "table.csv", "table.csv.categories.csv"] {
        assert!(first.contains_key(name), "missing {name}");
    }
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (name, bytes) in &first {
        assert!(bytes == &second[name], "{name} differs between runs");
    }
    // every output gets a manifest
    for name in ["clean.csv", "model.json", "eval.json", "table.csv"] {
        let manifest = a.path().join(format!("{name}.manifest.json"));
        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
        assert_eq!(m["tool"], "fproxkit");
        assert!(m["outputs"].as_array().is_some_and(|o| !o.is_empty()), "{name}");
    }
}

#[test]
fn fpro_output_is_ranked() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let out = dir.path().join("f.csv");
    ok(&["train", "--input", SAMPLE, "--n-trees", "10", "--out", s(&model)]);
    ok(&["fpro", "--input", SAMPLE, "--model", s(&model), "--out", s(&out)]);
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["id", "p1", "p2", "p3", "p4", "fpro", "pc1", "pc2"]);
    let rows: Vec<(String, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[5].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 500);
    for w in rows.windows(2) {
        assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = fproxkit(&["train", "--bogus"]);
    assert_eq!(code, 1, "{stderr}");

    let (code, stderr) = fproxkit(&["ingest", "--input", "/no/such/file.csv", "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(code, 1);
    let err: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert!(err["error"]["message"].is_string());

    // a nutrients-only model cannot score a nutrients+additives matrix
    let model = dir.path().join("m.json");
    ok(&["train", "--input", SAMPLE, "--n-trees", "5", "--out", s(&model)]);
    let out = dir.path().join("p.csv");
    let (code, stderr) =
        fproxkit(&["predict", "--input", SAMPLE, "--spec", "nutrients11_plus_additives", "--model", s(&model), "--out", s(&out)]);
    assert_eq!(code, 1);
    assert!(stderr.contains("additive_count"), "{stderr}");

    let (code, _) = fproxkit(&["train", "--input", SAMPLE, "--n-trees", "0", "--out", s(&model)]);
    assert_eq!(code, 1);
}

#[test]
fn in_process_run_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["siga", "--input", SAMPLE, "--out", s(&a)]);
    let mut stderr = Vec::new();
    let code = fproxkit::cli::run(["fproxkit", "siga", "--input", SAMPLE, "--out", s(&b)], &mut stderr);
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&stderr));
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn canonical_csv_round_trips() {
    let (records, _) = sample_corpus();
    let mut buf = Vec::new();
    write_products(&records, &mut buf).unwrap();
    let (again, report) = read_products(&buf[..], &MappingConfig::canonical(), &LoadOptions::builtin()).unwrap();
    assert_eq!(report.rows_kept, records.len());
    assert!(report.repairs.is_empty());
    assert_eq!(again, records);
}
