use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csdf::dataset::{DatasetManifest, ANALYTIC_SURFACE_RESOLUTION};
use csdf::extraction::mesh_analytic;
use csdf::geometry::io::write_obj;
use csdf_cli::commands::read_log;

const CONFIG: &str = r#"
seed = 3

[dataset]
[[dataset.shape]]
id = "ball"
analytic = { kind = "sphere", center = [0.0, 0.0, 0.0], radius = 0.5 }

[[dataset.shape]]
id = "cube"
analytic = { kind = "box", center = [0.0, 0.0, 0.0], half_extents = [0.35, 0.35, 0.35] }

[[dataset.shape]]
id = "ring"
analytic = { kind = "torus", center = [0.0, 0.0, 0.0], major_radius = 0.5, minor_radius = 0.15 }

[[dataset.shape]]
id = "ball_test"
split = "test"
analytic = { kind = "sphere", center = [0.0, 0.0, 0.0], radius = 0.45 }

[[dataset.shape]]
id = "cube_test"
split = "test"
analytic = { kind = "box", center = [0.0, 0.0, 0.0], half_extents = [0.3, 0.3, 0.3] }

[[dataset.shape]]
id = "ring_test"
split = "test"
analytic = { kind = "torus", center = [0.0, 0.0, 0.0], major_radius = 0.5, minor_radius = 0.12 }

[sampling]
count = 3000

[network]
latent_dim = 8
hidden_width = 24

[schedule]
epochs = 20
checkpoint_every = 5

[training]
shapes_per_step = 3
points_per_shape = 256
lr_network = 1e-3
passes_per_epoch = 1
chunk_rows = 256

[inference]
iterations = 30
lr_decay_at = 15
max_points = 512

[extraction]
resolution = 24

[metrics]
cd_points = 3000
emd_points = 100
accuracy_points = 300
"#;

fn csdf(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    if !cfg.exists() {
        fs::write(&cfg, CONFIG).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_csdf"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn data_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir.join("out/data"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.clone(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn trained(dir: &Path) {
    ok(&csdf(dir, &["sample-data"]));
    ok(&csdf(dir, &["train"]));
}

#[test]
fn sample_data_writes_files_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let out = csdf(tmp.path(), &["sample-data"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("ring_test"));
    let first = data_files(tmp.path());
    let sdf = first.iter().filter(|(p, _)| p.extension().unwrap() == "sdf").count();
    assert_eq!(sdf, 6);
    let manifest = DatasetManifest::load(&tmp.path().join("out/data/manifest.toml")).unwrap();
    assert_eq!(manifest.shapes.len(), 6);
    assert!(manifest.tag.contains("seed=3"));

    ok(&csdf(tmp.path(), &["sample-data"]));
    assert_eq!(first, data_files(tmp.path()));

    let other = csdf(tmp.path(), &["--seed", "4", "sample-data"]);
    ok(&other);
    assert_ne!(first, data_files(tmp.path()));
}

#[test]
fn missing_inputs_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, format!("{CONFIG}\n[[dataset.shape]]\nid = \"scan\"\nmesh = \"/no/such/scan.obj\"\n")).unwrap();
    let out = csdf(tmp.path(), &["sample-data"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/no/such/scan.obj"), "{}", stderr(&out));

    let tmp = tempfile::tempdir().unwrap();
    let out = csdf(tmp.path(), &["train"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = csdf(tmp.path(), &["reconstruct", "--checkpoint", "/no/such/ckpt.bin"]);
    assert_eq!(out.status.code(), Some(2));
    let out = csdf(tmp.path(), &["definitely-not-a-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_mesh_fails_only_that_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.obj");
    fs::write(&bad, "v 0 0 0\nf 1 2 3\n").unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        format!("{CONFIG}\n[[dataset.shape]]\nid = \"bad\"\nmesh = \"{}\"\n", bad.display()),
    )
    .unwrap();
    let out = csdf(tmp.path(), &["sample-data"]);
    assert_eq!(out.status.code(), Some(1));
    let manifest = DatasetManifest::load(&tmp.path().join("out/data/manifest.toml")).unwrap();
    assert_eq!(manifest.shapes.len(), 6);
}

#[test]
fn training_logs_every_epoch_and_resumes_bit_exactly() {
    let full = tempfile::tempdir().unwrap();
    trained(full.path());
    let log = read_log(&full.path().join("out/train/log.csv")).unwrap();
    assert_eq!(log.len(), 20);
    assert_eq!(log.iter().map(|r| r.epoch).collect::<Vec<_>>(), (0..20).collect::<Vec<_>>());
    let text = fs::read_to_string(full.path().join("out/train/log.csv")).unwrap();
    assert!(text.starts_with("# csdf config_hash="));

    let parted = tempfile::tempdir().unwrap();
    ok(&csdf(parted.path(), &["sample-data"]));
    ok(&csdf(parted.path(), &["train", "--until-epoch", "7"]));
    assert_eq!(read_log(&parted.path().join("out/train/log.csv")).unwrap().len(), 7);
    ok(&csdf(parted.path(), &["train", "--resume"]));
    let resumed = read_log(&parted.path().join("out/train/log.csv")).unwrap();
    assert_eq!(resumed.len(), 20);
    assert!(log.iter().zip(&resumed).all(|(a, b)| a.same_training(b)));
    assert_eq!(
        fs::read(full.path().join("out/train/checkpoint.bin")).unwrap(),
        fs::read(parted.path().join("out/train/checkpoint.bin")).unwrap()
    );

    // A different configuration cannot resume the checkpoint.
    let out = csdf(parted.path(), &["--seed", "9", "train", "--resume"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn baseline_schedule_keeps_full_depth() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&csdf(tmp.path(), &["sample-data"]));
    ok(&csdf(tmp.path(), &["train", "--schedule", "baseline", "--epochs", "4"]));
    let log = read_log(&tmp.path().join("out/train/log.csv")).unwrap();
    assert_eq!(log.len(), 4);
    assert!(log.iter().all(|r| r.epsilon == 0.0 && r.lambda == 0.0 && r.stage_index == 0));
    let state = csdf::training::read_state(&fs::read(tmp.path().join("out/train/checkpoint.bin")).unwrap()).unwrap();
    assert_eq!(state.net.growth().active_depth, 8);

    let schedule = tmp.path().join("schedule.toml");
    fs::write(&schedule, csdf::training::CurriculumSchedule::baseline(3, 6).unwrap().to_toml()).unwrap();
    ok(&csdf(tmp.path(), &["train", "--schedule", schedule.to_str().unwrap()]));
    assert_eq!(read_log(&tmp.path().join("out/train/log.csv")).unwrap().len(), 3);
}

#[test]
fn reconstruct_recover_and_eval() {
    let tmp = tempfile::tempdir().unwrap();
    trained(tmp.path());
    let out = tmp.path().join("out");

    ok(&csdf(tmp.path(), &["reconstruct"]));
    for id in ["ball_test", "cube_test", "ring_test"] {
        let obj = fs::read_to_string(out.join(format!("reconstruct/{id}.obj"))).unwrap();
        assert!(obj.starts_with("# csdf config_hash="));
    }
    assert!(!out.join("reconstruct/ball.obj").exists());

    let rec = csdf(tmp.path(), &["recover", "--ratios", "0.05,0.1,0.15,0.2,0.25"]);
    ok(&rec);
    assert!(!stderr(&rec).contains("warning"));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(out.join("recover/recover.csv"))
        .unwrap();
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "cd_mean_raw") && headers.iter().any(|h| h == "mesh_acc_raw"));
    assert_eq!(reader.records().count(), 15);

    let wide = csdf(tmp.path(), &["recover", "--split", "test", "--ratios", "0.5"]);
    ok(&wide);
    assert!(stderr(&wide).contains("warning"), "{}", stderr(&wide));

    // Ground truth against itself.
    let gt_dir = tmp.path().join("gt");
    fs::create_dir_all(&gt_dir).unwrap();
    let manifest = DatasetManifest::load(&out.join("data/manifest.toml")).unwrap();
    for e in &manifest.shapes {
        if let csdf::dataset::ShapeSource::Analytic { shape } = &e.source {
            let mesh = mesh_analytic(shape, ANALYTIC_SURFACE_RESOLUTION).unwrap();
            write_obj(&mesh, &gt_dir.join(format!("{}.obj", e.id)), &[]).unwrap();
        }
    }
    ok(&csdf(tmp.path(), &["eval", "--pred", gt_dir.to_str().unwrap()]));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(out.join("eval/metrics.csv"))
        .unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 8);
    for r in &rows[..6] {
        assert_eq!(&r[1], "ok");
        assert!(r[2].parse::<f64>().unwrap() < 1e-6);
    }
    assert_eq!((&rows[6][0], &rows[7][0]), ("mean", "median"));

    ok(&csdf(tmp.path(), &["eval", "--pred", gt_dir.to_str().unwrap(), "--split", "test", "--emd-points", "2000"]));
    let text = fs::read_to_string(out.join("eval/metrics.csv")).unwrap();
    assert!(text.lines().nth(2).unwrap().contains(",2000,"));

    fs::remove_file(gt_dir.join("cube.obj")).unwrap();
    let missing = csdf(tmp.path(), &["eval", "--pred", gt_dir.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    let text = fs::read_to_string(out.join("eval/metrics.csv")).unwrap();
    assert!(text.contains("cube,missing"));

    // Predictions from the reconstruct step evaluate too.
    ok(&csdf(tmp.path(), &["eval", "--pred", out.join("reconstruct").to_str().unwrap(), "--split", "test"]));
}
