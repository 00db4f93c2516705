use std::path::Path;
use std::process::{Command, Output};

use diner::signal::save_image;
use diner::GridSignal;

fn diner(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diner"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run binary")
}

fn config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn summary(dir: &Path) -> toml::Table {
    std::fs::read_to_string(dir.join("summary.toml")).unwrap().parse().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "seed = 2\n[input.synthetic]\nheight = 12\nwidth = 12\nchannels = 3\n\
                     [train]\nepochs = 15\nlr_net = 1e-3\nlr_hash = 1e-2\nlog_every = 5\n";

#[test]
fn fits_a_constant_image() {
    let dir = tempfile::tempdir().unwrap();
    let image = GridSignal::constant(vec![32, 32], &[0.2, 0.6, 0.8]).unwrap();
    save_image(&image, dir.path().join("flat.ppm")).unwrap();
    let cfg = config(dir.path(), "[train]\nepochs = 300\nlr_net = 1e-3\nlr_hash = 1e-2\nlog_every = 50\n");
    let o = diner(&["fit", "--config", &cfg, "--input", "flat.ppm", "--out-dir", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let psnr = summary(&out)["final_psnr_db"].as_float().unwrap();
    assert!(psnr >= 60.0, "constant image fitted to only {psnr} dB");
    for file in ["run.toml", "metrics.csv", "model.ckpt", "reconstruction.ppm"] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
    // A constant image has rank one, so the table is one column wide and the learned INR is a 1D raw grid.
    let s = summary(&out);
    assert_eq!(s["table_width"].as_integer(), Some(1));
    assert_eq!(s["learned_inr"].as_str(), Some("learned_inr.ding"));
    assert!(out.join("learned_inr.ding").is_file());
    let run: toml::Table = std::fs::read_to_string(out.join("run.toml")).unwrap().parse().unwrap();
    assert_eq!(run["run"]["task"].as_str(), Some("fit"));
    assert_eq!(run["run"]["config_sha256"].as_str().map(str::len), Some(64));
}

#[test]
fn reruns_without_timing_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let files = ["metrics.csv", "model.ckpt", "summary.toml", "run.toml", "reconstruction.ppm"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = diner(&["fit", "--config", &cfg, "--no-timing", "--out-dir", "out"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        runs.push(files.map(|f| std::fs::read(dir.path().join("out").join(f)).unwrap()));
    }
    for (file, (a, b)) in files.iter().zip(runs[0].iter().zip(&runs[1])) {
        assert!(a == b, "{file} differs between reruns");
    }
}

#[test]
fn missing_input_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[train]\nepochs = 1\n");
    let o = diner(&["fit", "--config", &cfg, "--input", "nowhere.ppm"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn invalid_configs_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        format!("{SMALL}[model]\ntable_width = 0\n"),
        format!("{SMALL}[model]\nhidden_width = 4\nwidht = 3\n"),
        "bogus = true\n".to_string(),
        format!("task = \"spectrum\"\n{SMALL}"),
    ] {
        let cfg = config(dir.path(), &bad);
        let o = diner(&["fit", "--config", &cfg], dir.path());
        assert_eq!(o.status.code(), Some(2), "config {bad:?}: {}", stderr(&o));
    }
}

#[test]
fn command_line_errors_and_help() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(diner(&["no-such-task"], dir.path()).status.code(), Some(2));
    assert_eq!(diner(&["fit", "--precision", "f16"], dir.path()).status.code(), Some(2));
    assert_eq!(diner(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn divergence_exits_with_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &SMALL.replace("lr_net = 1e-3", "lr_net = 1e300"));
    let o = diner(&["fit", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn disorder_test_overrides_mini_batches_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &format!("{SMALL}batch_size = 16\n[model]\ninit = \"uniform\"\n[disorder]\npermutations = 2\n"));
    let o = diner(&["disorder-test", "--config", &cfg, "--out-dir", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("full batch") && err.contains("zeros"), "{err}");
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["arrangements"].as_array().unwrap().len(), 4);
    assert_eq!(s["max_abs_delta_psnr_db"].as_float(), Some(0.0));
    for key in ["loss_traces_identical", "backbones_identical", "tables_permuted"] {
        assert_eq!(s[key].as_bool(), Some(true), "{key}");
    }
}

#[test]
fn disorder_test_rejects_the_coordinate_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &format!("{SMALL}[model]\nkind = \"baseline\"\n"));
    assert_eq!(diner(&["disorder-test", "--config", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn zero_epoch_bench_has_unit_training_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[bench]\nheight = 8\nwidth = 8\nrounds = 1\nlengths = [100, 1000]\nbatch = 64\nrepeats = 3\n");
    let o = diner(&["bench-hash", "--config", &cfg, "--epochs", "0", "--out-dir", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["train_ratio"].as_float(), Some(1.0));
    assert!(dir.path().join("out/bench.csv").is_file());
}

#[test]
fn width_sweep_reports_rank_and_every_width() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "seed = 4\n[input.synthetic]\nheight = 10\nwidth = 10\nchannels = 5\nrank = 2\n\
         [train]\nepochs = 10\nlr_net = 1e-3\nlr_hash = 1e-2\n[sweep]\nwidths = [3, 1, 2]\n",
    );
    let o = diner(&["width-sweep", "--config", &cfg, "--out-dir", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&dir.path().join("out"));
    assert_eq!(s["attribute_rank"].as_integer(), Some(2));
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn spectrum_and_lensless_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "[input.synthetic]\nheight = 12\nwidth = 16\nchannels = 3\n\
         [train]\nepochs = 5\nlr_net = 1e-3\nlr_hash = 1e-2\n\
         [lensless]\nheight = 12\nwidth = 12\ndistances = [5e-4, 1e-3]\n",
    );
    let o = diner(&["spectrum", "--config", &cfg, "--out-dir", "s"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for file in ["spectrum.csv", "original_bands.csv", "learned_inr_bands.csv", "learned_inr_spectrum_c0.csv", "learned_inr.ppm"] {
        assert!(dir.path().join("s").join(file).is_file(), "missing {file}");
    }
    let o = diner(&["lensless", "--config", &cfg, "--out-dir", "l"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&dir.path().join("l"));
    assert_eq!(s["planes"].as_integer(), Some(2));
    assert!(s["amplitude_psnr_db"].as_float().is_some());
    for file in ["amplitude.pgm", "phase.pgm", "metrics.csv", "model.ckpt"] {
        assert!(dir.path().join("l").join(file).is_file(), "missing {file}");
    }
    // Measurements written by one run feed the next.
    let again = config(
        dir.path(),
        "[train]\nepochs = 3\n[lensless]\nmeasurements = \"l/measurements\"\n",
    );
    let o = diner(&["lensless", "--config", &again, "--out-dir", "l2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(summary(&dir.path().join("l2")).get("amplitude_psnr_db").is_none());
}
