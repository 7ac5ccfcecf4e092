use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
name = "tiny"
seed = 1

[power_map]
spacing_m = 4.0

[trajectories]
count = 10
walk = { n_steps_min = 100, n_steps_max = 130 }

[dataset]
window_w = 16
stride = 8

[gan]
latent_dim = 6
embed_dim = 4
n_heads = 2
n_layers = 1
patch_size = 4
window_w = 16
batch_size = 8
n_iterations = 6
eval_interval = 3
label_embed_dim = 3
mlp_ratio = 2

[metrics]
hook_max_rows = 32

[syseval]
n_trajectories = 2
trajectory = { n_steps_min = 60, n_steps_max = 70 }
"#;

fn rssgan(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rssgan"))
        .args(args)
        .env("RSSGAN_OUTPUT_ROOT", root)
        .current_dir(root)
        .output()
        .unwrap()
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr)
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

#[test]
fn help_lists_every_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&rssgan(&["--help"], dir.path()));
    for c in [
        "scene",
        "trajectories",
        "dataset",
        "train",
        "generate",
        "evaluate",
        "simulate",
        "pipeline",
    ] {
        assert!(out.contains(c), "{c}");
    }
}

#[test]
fn pipeline_writes_under_the_output_root_and_skips_on_rerun() {
    let dir = setup();
    let out = ok(&rssgan(&["pipeline", "--config", "tiny.toml"], dir.path()));
    assert!(out.contains("Ran"));
    let run = dir.path().join("tiny");
    for f in [
        "manifest.json",
        "config.toml",
        "train/checkpoint.bin",
        "evaluate/metrics.csv",
        "simulate/summary.json",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }
    let out = ok(&rssgan(&["pipeline", "--config", "tiny.toml"], dir.path()));
    assert!(out.contains("Skipped") && !out.contains("Ran"));

    let out = ok(&rssgan(
        &["pipeline", "--config", "tiny.toml", "--set", "gan.lr_g=1e-4"],
        dir.path(),
    ));
    assert!(out.lines().any(|l| l.contains("dataset") && l.contains("Skipped")));
    assert!(out.lines().any(|l| l.contains("train") && l.contains("Ran")));
}

#[test]
fn stage_commands_stop_at_their_stage() {
    let dir = setup();
    ok(&rssgan(&["scene", "--config", "tiny.toml", "--out", "s"], dir.path()));
    assert!(dir.path().join("s/scene/scene.json").exists());
    assert!(!dir.path().join("s/trajectories").exists());

    let o = rssgan(
        &["dataset", "build", "--config", "tiny.toml", "--out", "d", "--augment"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("kernel_size"));
    ok(&rssgan(
        &[
            "dataset",
            "build",
            "--config",
            "tiny.toml",
            "--out",
            "d",
            "--augment",
            "--set",
            "dataset.kernel_size=4",
        ],
        dir.path(),
    ));
    let stats = ok(&rssgan(&["dataset", "stats", "--dataset", "d/dataset"], dir.path()));
    let v: serde_json::Value = serde_json::from_str(&stats).unwrap();
    assert!(v["train_augmented_rows"].as_u64().unwrap() > 0);
    assert!(!dir.path().join("d/train").exists());

    ok(&rssgan(
        &[
            "dataset",
            "augment",
            "--dataset",
            "d/dataset",
            "--kernel",
            "3",
            "--out",
            "d2",
        ],
        dir.path(),
    ));
    assert!(dir.path().join("d2/X.f32").exists());
}

#[test]
fn train_single_mode_then_generate_evaluate_simulate() {
    let dir = setup();
    ok(&rssgan(
        &["train", "--config", "tiny.toml", "--mode", "single", "--out", "t"],
        dir.path(),
    ));
    let ck = "t/train/checkpoint.bin";
    assert!(dir.path().join(ck).exists());
    let cfg = std::fs::read_to_string(dir.path().join("t/config.toml")).unwrap();
    assert!(cfg.contains("single_gnb"));

    let row: Vec<String> = (0..16).map(|i| format!("{}", 120 + 2 * i)).collect();
    std::fs::write(
        dir.path().join("d.csv"),
        format!("{}\n{}\n", row.join(","), row.join(",")),
    )
    .unwrap();
    std::fs::write(dir.path().join("l.csv"), "0\n0\n").unwrap();
    let args = [
        "generate",
        "--checkpoint",
        ck,
        "--distances",
        "d.csv",
        "--labels",
        "l.csv",
        "--seed",
        "4",
    ];
    let a = ok(&rssgan(&args, dir.path()));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), 16);
    assert!(lines[0].split(',').all(|v| v.parse::<f64>().unwrap().is_finite()));
    assert_eq!(a, ok(&rssgan(&args, dir.path())));

    let out = ok(&rssgan(
        &["evaluate", "--checkpoint", ck, "--dataset", "t/dataset", "--out", "ev"],
        dir.path(),
    ));
    assert!(out.contains("cmd"));
    assert!(dir.path().join("ev/metrics.csv").exists());

    let out = ok(&rssgan(
        &[
            "simulate",
            "--checkpoint",
            ck,
            "--scene",
            "t/scene",
            "--n",
            "2",
            "--hysteresis",
            "3",
            "--out",
            "sim",
        ],
        dir.path(),
    ));
    let v: serde_json::Value = serde_json::from_str(&out[..out.rfind('}').unwrap() + 1]).unwrap();
    assert_eq!(v["n_traces"], 2);
    assert_eq!(v["total_handovers"], 0);
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = setup();
    let o = rssgan(&["pipeline", "--config", "missing.toml"], dir.path());
    assert!(!o.status.success());
    let o = rssgan(
        &["pipeline", "--config", "tiny.toml", "--set", "gan.no_such_key=1"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));
    let o = rssgan(
        &["pipeline", "--config", "tiny.toml", "--set", "gan.window_w=32"],
        dir.path(),
    );
    assert!(!o.status.success());
    let o = rssgan(&["frobnicate"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["case1_single_gnb.toml", "case2_multi_gnb.toml"] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        let cfg = rssgan::pipeline::PipelineConfig::from_toml_str(&text).unwrap();
        cfg.validate().unwrap();
        let again = rssgan::pipeline::PipelineConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
}
