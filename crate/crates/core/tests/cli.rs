use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn blgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blgp"))
        .args(args)
        .env("BLGP_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn tone_csv(dir: &Path) -> String {
    let mut text = String::from("time,value\n");
    for i in 0..64 {
        let t = i as f64 / 2.0;
        text += &format!("{t},{}\n", (std::f64::consts::TAU * 0.3 * t).sin());
    }
    write(dir, "tone.csv", &text)
}

#[test]
fn experiment_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = blgp(&[
            "experiment",
            "demodulate",
            "--seed",
            "5",
            "--subsample",
            "150",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in [
        "observations.csv",
        "channel1.csv",
        "channel2.csv",
        "truth_channels.csv",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let metrics: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["n_observations"], 150);
    assert!(metrics["rmse_ch1"].as_f64().unwrap() < 0.5);
}

#[test]
fn subcommands_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = tone_csv(dir.path());
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();
    let model = write(
        dir.path(),
        "m.json",
        r#"{"variant":"centred_sinc","sigma2":0.5,"xi0":0,"delta":1.0,"noise_var":0.001}"#,
    );
    let runs: &[(&[&str], &str)] = &[
        (
            &["predict", "--model", &model, "--points", "20"],
            "posterior.csv",
        ),
        (&["psd", "--support-threshold", "0.5"], "support.json"),
        (
            &["psd", "--method", "welch-uniform", "--segment", "16"],
            "psd.csv",
        ),
        (&["reconstruct", "--bandwidth", "2"], "oracle.json"),
        (&["sparse-fit", "--model", &model], "sparse_report.json"),
        (
            &["filter", "--band", "0.2,0.4", "--model", &model],
            "brick_wall.csv",
        ),
        (
            &["demodulate", "--carrier", "0.6", "--bandwidth", "0.4"],
            "channel2.csv",
        ),
        (&["fit"], "trace.csv"),
    ];
    for (args, file) in runs {
        let mut full = args.to_vec();
        full.extend(["--input", &input, "--out-dir", out_s]);
        let o = blgp(&full);
        assert!(
            o.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(out.join(file).exists(), "{file}");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("sparse_report.json")).unwrap()).unwrap();
    assert_eq!(report["M"], 33);
    let header = fs::read_to_string(out.join("inducing.csv")).unwrap();
    assert!(header.starts_with("t\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = tone_csv(dir.path());
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();

    let bad = write(dir.path(), "bad.csv", "time,value\n0,1\n1,abc\n");
    let o = blgp(&["fit", "--input", &bad, "--out-dir", out_s]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv:3"));

    let o = blgp(&["filter", "--input", &input, "--band", "0.5,0.2"]);
    assert_eq!(o.status.code(), Some(2));

    let o = blgp(&["experiment", "unknown"]);
    assert_eq!(o.status.code(), Some(2));

    let o = blgp(&[
        "reconstruct",
        "--input",
        &input,
        "--bandwidth",
        "1.5",
        "--out-dir",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(2));

    // A white source band-passed at times closer than the reciprocal
    // bandwidth has no valid joint prior.
    let white = write(
        dir.path(),
        "w.json",
        r#"{"variant":"white","sigma2":1,"noise_var":0}"#,
    );
    let o = blgp(&[
        "filter",
        "--input",
        &input,
        "--band",
        "0.2,0.7",
        "--model",
        &white,
        "--out-dir",
        out_s,
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}
