use std::path::Path;

use gglt::cli::dispatch;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = dispatch(std::iter::once("gglt").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn verify_dctdst_succeeds() {
    let (code, out) = run(&["verify-dctdst"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().filter(|l| l.starts_with("loops")).count(), 9);
    assert!(out.contains("over 72 cases"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["no-such-command"]).0, 2);
    assert_eq!(run(&["verify-dctdst", "--bogus"]).0, 2);
    assert_eq!(run(&["eval", "--dataset", "x", "--scheme", "best", "--report", "r.csv"]).0, 2);
    assert_eq!(run(&["eval", "--dataset", "x", "--scheme", "dct", "--report", "r.csv", "--set", "dct,foo"]).0, 2);
    assert_eq!(run(&["gen-synthetic", "--count", "3", "--seed", "1"]).0, 2);
    assert_eq!(run(&["eval", "--dataset", "x", "--scheme", "dct", "--report", "r", "--qps", "60"]).0, 2);
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["bdrate", "--ref", &p(dir.path(), "a.csv"), "--test", &p(dir.path(), "b.csv")]).0, 1);
    assert_eq!(run(&["gen-synthetic", "--count", "3", "--seed", "1", "--scale=-1", "--out", &p(dir.path(), "d")]).0, 1);
}

#[test]
fn train_eval_bdrate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = |count: &str, seed: &str, class: &str, out: &str| {
        let args = ["gen-synthetic", "--model", "intra", "--n", "4", "--count", count, "--seed", seed, "--class-id", class, "--out", out];
        assert_eq!(run(&args).0, 0);
    };
    gen("400", "1", "0", &p(d, "train.bin"));
    gen("100", "2", "0", &p(d, "test.bin"));
    assert_eq!(run(&["train", "--dataset", &p(d, "train.bin"), "--kind", "gbnt", "--out-dir", &p(d, "tr")]).0, 0);
    assert!(d.join("tr/class_0_gbnt.txt").exists() && d.join("tr/class_0_gbnt_laplacian.txt").exists());

    let eval = |scheme: &str, report: &str, threads: &str| {
        run(&[
            "eval", "--dataset", &p(d, "test.bin"), "--scheme", scheme, "--set", "dct,glgbt,eagbt",
            "--transforms-dir", &p(d, "tr"), "--report", report, "--threads", threads,
        ])
    };
    assert_eq!(eval("dct", &p(d, "dct.csv"), "1").0, 0);
    assert_eq!(eval("rdot", &p(d, "rdot1.csv"), "1").0, 0);
    assert_eq!(eval("rdot", &p(d, "rdot4.csv"), "4").0, 0);
    let a = std::fs::read(d.join("rdot1.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("rdot4.csv")).unwrap());
    assert!(String::from_utf8(a).unwrap().starts_with("scheme,qp,rate_bpp,psnr_db,mse,mean_cost,sel_dct,sel_glgbt,sel_eagbt\n"));

    let (code, out) = run(&["bdrate", "--ref", &p(d, "dct.csv"), "--test", &p(d, "dct.csv")]);
    assert_eq!((code, out.as_str()), (0, "0.00%\n"));
    let (code, out) = run(&["bdrate", "--ref", &p(d, "dct.csv"), "--test", &p(d, "rdot1.csv")]);
    assert_eq!(code, 0);
    assert!(out.trim_end().trim_end_matches('%').parse::<f64>().unwrap() < 0.0);

    // A second class without a trained transform.
    gen("20", "3", "5", &p(d, "other.bin"));
    let code = run(&[
        "eval", "--dataset", &p(d, "other.bin"), "--scheme", "mdt", "--set", "dct,glgbt",
        "--transforms-dir", &p(d, "tr"), "--report", &p(d, "x.csv"),
    ])
    .0;
    assert_eq!(code, 1);
}

#[test]
fn analyze_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rob = |out: &str, threads: &str| {
        let args = ["analyze", "robustness", "--n", "3", "--ks", "18,36", "--trials", "4", "--seed", "9", "--out", out, "--threads", threads];
        assert_eq!(run(&args).0, 0);
    };
    rob(&p(d, "a.csv"), "1");
    rob(&p(d, "b.csv"), "3");
    let a = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(d.join("b.csv")).unwrap());
    assert_eq!(a.lines().count(), 1 + 8);

    let (code, out) = run(&["analyze", "cg-sedge", "--n", "8", "--s-max", "40", "--out", &p(d, "cg.csv")]);
    assert_eq!(code, 0);
    assert!(out.contains("crosses zero"));
    assert_eq!(run(&["analyze", "cg-rate", "--n", "8", "--out", &p(d, "cr.csv")]).0, 0);
    let cr = std::fs::read_to_string(d.join("cr.csv")).unwrap();
    assert_eq!(cr.lines().count(), 22);

    assert_eq!(run(&["gen-synthetic", "--n", "4", "--count", "50", "--seed", "4", "--out", &p(d, "v.bin")]).0, 0);
    assert_eq!(run(&["analyze", "variance-map", "--dataset", &p(d, "v.bin"), "--out", &p(d, "v.pgm")]).0, 0);
    let pgm = std::fs::read(d.join("v.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n4 4\n255\n") && pgm.len() == 11 + 16);
}
