use std::path::Path;
use std::process::{Command, Output};

use rase::csv_io::load_dataset;
use rase::model_io::load_model;

fn rase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rase")).args(args).env_remove("RASE_THREADS").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, t) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("t.csv"));
    for out in [&a, &b] {
        let r = rase(&["simulate", "--model", "1", "--n", "200", "--seed", "7", "--out-train", p(out), "--out-test", p(&t)]);
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let data = load_dataset(&a).unwrap();
    assert_eq!((data.n(), data.p()), (200, 400));
    let header = std::fs::read_to_string(&a).unwrap();
    assert!(header.starts_with("x1,x2,"));
}

#[test]
fn fit_predict_rank_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let model = dir.path().join("model.json");
    let preds = dir.path().join("pred.csv");
    assert_eq!(code(&rase(&["simulate", "--model", "1", "--n", "120", "--seed", "3", "--out-train", p(&train)])), 0);
    let r = rase(&[
        "fit", "--train", p(&train), "--base", "lda", "--b1", "20", "--b2", "30", "--iterations", "1", "--seed", "5",
        "--model-out", p(&model),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let summary = String::from_utf8(r.stdout).unwrap();
    assert!(summary.contains("alpha_hat"));

    let r = rase(&["predict", "--model", p(&model), "--data", p(&train), "--out", p(&preds)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));

    // the predicted training error is the minimum over all vote cuts
    let fitted = load_model(&model).unwrap();
    let data = load_dataset(&train).unwrap();
    let text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("score,prediction"));
    let rows: Vec<(f64, u8)> = lines
        .map(|l| {
            let (s, y) = l.split_once(',').unwrap();
            (s.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), data.n());
    let wrong = rows.iter().zip(data.labels()).filter(|((_, yh), y)| yh != *y).count();
    let best = rows
        .iter()
        .map(|&(c, _)| c)
        .chain([0.0, 1.0])
        .map(|c| rows.iter().zip(data.labels()).filter(|&(&(s, _), &y)| u8::from(s > c) != y).count())
        .min()
        .unwrap();
    assert_eq!(wrong, best);
    assert!(rows.iter().all(|&(s, yh)| yh == u8::from(s > fitted.alpha_hat())));

    let r = rase(&["rank", "--model", p(&model), "--top", "3"]);
    assert_eq!(code(&r), 0);
    let ranking = String::from_utf8(r.stdout).unwrap();
    let lines: Vec<&str> = ranking.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "feature,eta");
    let parsed: Vec<(usize, f64)> = lines[1..]
        .iter()
        .map(|l| {
            let (j, e) = l.split_once(',').unwrap();
            (j.parse().unwrap(), e.parse().unwrap())
        })
        .collect();
    assert!(parsed.windows(2).all(|w| w[0].1 >= w[1].1), "{ranking}");
    let expected = fitted.feature_ranking();
    for (&(j, e), &(j0, e0)) in parsed.iter().zip(&expected) {
        assert_eq!((j, e), (j0 + 1, e0));
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    // usage
    assert_eq!(code(&rase(&[])), 1);
    assert_eq!(code(&rase(&["fit", "--base", "lda"])), 1);
    assert_eq!(code(&rase(&["bench", "--model-spec", "9", "--methods", "sig"])), 1);
    assert_eq!(code(&rase(&["bench", "--model-spec", "1", "--methods", "rase-svm"])), 1);
    assert_eq!(code(&rase(&["--help"])), 0);

    // data: missing file, bad label, one class only
    let missing = dir.path().join("nope.csv");
    let r = rase(&["fit", "--train", p(&missing), "--base", "lda", "--model-out", p(&model)]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("nope.csv"));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,y\n1,2,0\n3,4,7\n").unwrap();
    let r = rase(&["fit", "--train", p(&bad), "--base", "lda", "--model-out", p(&model)]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));
    let one = dir.path().join("one.csv");
    std::fs::write(&one, "a,y\n1,1\n2,1\n3,1\n").unwrap();
    assert_eq!(code(&rase(&["fit", "--train", p(&one), "--base", "lda", "--model-out", p(&model)])), 2);

    // usage: invalid ensemble settings
    let ok = dir.path().join("ok.csv");
    std::fs::write(&ok, "a,y\n1,0\n2,0\n3,1\n4,1\n").unwrap();
    assert_eq!(code(&rase(&["fit", "--train", p(&ok), "--base", "lda", "--b1", "0", "--model-out", p(&model)])), 1);

    // fit failure: no subspace admits a QDA fit with one row per class
    let tiny = dir.path().join("tiny.csv");
    std::fs::write(&tiny, "a,b,y\n1,2,0\n3,5,1\n").unwrap();
    let r = rase(&["fit", "--train", p(&tiny), "--base", "qda", "--b1", "2", "--b2", "2", "--model-out", p(&model)]);
    assert_eq!(code(&r), 3, "{}", String::from_utf8_lossy(&r.stderr));

    // data: corrupt model, wrong width at predict
    std::fs::write(&model, "{\"format_version\": 1").unwrap();
    assert_eq!(code(&rase(&["rank", "--model", p(&model)])), 2);
    assert_eq!(code(&rase(&["fit", "--train", p(&ok), "--base", "lda", "--b1", "3", "--b2", "3", "--model-out", p(&model)])), 0);
    let wide = dir.path().join("wide.csv");
    std::fs::write(&wide, "a,b\n1,2\n").unwrap();
    assert_eq!(code(&rase(&["predict", "--model", p(&model), "--data", p(&wide)])), 2);
}

#[test]
fn bench_output_is_reproducible_across_thread_counts() {
    let args = |threads: &'static str| {
        vec![
            "bench", "--model-spec", "1:60", "--methods", "rase-lda,rase1-lda,sig", "--replicates", "3", "--seed", "11",
            "--b1", "6", "--b2", "10", "--n-test", "200", "--threads", threads,
        ]
    };
    let one = rase(&args("1"));
    assert_eq!(code(&one), 0, "{}", String::from_utf8_lossy(&one.stderr));
    let again = rase(&args("1"));
    let three = rase(&args("3"));
    assert_eq!(one.stdout, again.stdout);
    assert_eq!(one.stdout, three.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    assert!(text.contains("(n-1)"));
    assert!(text.lines().any(|l| l.starts_with("rase1-lda")));

    let mut json_args = args("2");
    json_args.extend(["--format", "json"]);
    let j = rase(&json_args);
    let v: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["rows"][0]["errors"].as_array().unwrap().len(), 3);

    // RASE_THREADS is only a default
    let env = Command::new(env!("CARGO_BIN_EXE_rase")).args(args("1")).env("RASE_THREADS", "2").output().unwrap();
    assert_eq!(env.stdout, text.as_bytes());
}
