use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use specgrad::io::{read_filter_csv, read_wav, write_wav, WavEncoding};
use tempfile::TempDir;

fn specgrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specgrad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// 0.25 s two-tone test signal at 24 kHz, 20 frames of 300 samples.
fn write_tone(dir: &Path, rate: u32) -> PathBuf {
    let path = dir.join(format!("tone{rate}.wav"));
    let x: Vec<f64> = (0..6000)
        .map(|n| {
            let t = n as f64 / rate as f64;
            0.3 * (2.0 * PI * 220.0 * t).sin() + 0.1 * (2.0 * PI * 1870.0 * t).sin()
        })
        .collect();
    write_wav(&path, &x, rate, WavEncoding::Float32).unwrap();
    path
}

fn analyze(dir: &Path) -> (PathBuf, PathBuf) {
    let wav = write_tone(dir, 24_000);
    let mel = dir.join("tone.sgmel");
    let out = specgrad(&["analyze", s(&wav), "-o", s(&mel)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (wav, mel)
}

#[test]
fn lists_named_schedules() {
    let out = specgrad(&["schedules"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("WG-3 3e-4 6e-2 9e-1"), "{text}");
    assert!(text.contains("PG-6 1e-4 1e-3 1e-2 5e-2 2e-1 5e-1"));
    assert!(text.contains("WG-50"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&specgrad(&[])), 1);
    assert_eq!(code(&specgrad(&["analyze"])), 1);
    assert_eq!(code(&specgrad(&["schedules", "--bogus"])), 1);
    assert_eq!(code(&specgrad(&["--help"])), 0);
}

#[test]
fn unsupported_audio_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let wav = write_tone(dir.path(), 48_000);
    let out = specgrad(&["analyze", s(&wav), "-o", s(&dir.path().join("x.sgmel"))]);
    assert_eq!(code(&out), 2);
    let missing = specgrad(&["analyze", "/nonexistent/in.wav", "-o", "/tmp/never.sgmel"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn bad_config_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(code(&specgrad(&["--config", s(&cfg), "schedules"])), 2);
}

#[test]
fn default_config_is_loadable() {
    let dir = TempDir::new().unwrap();
    let out = specgrad(&["default-config"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("hop = 300"));
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, out.stdout).unwrap();
    assert_eq!(code(&specgrad(&["--config", s(&cfg), "schedules"])), 0);
}

#[test]
fn oracle_sampling_recovers_the_reference() {
    let dir = TempDir::new().unwrap();
    let (wav, mel) = analyze(dir.path());
    let oracle = format!("oracle:{}", s(&wav));
    for schedule in ["WG-3", "WG-6", "PG-6", "WG-50"] {
        for prior in ["standard", "diagonal", "envelope"] {
            let out_wav = dir.path().join(format!("{schedule}-{prior}.wav"));
            let out = specgrad(&[
                "sample", "--mel", s(&mel), "--schedule", schedule, "--prior", prior, "--predictor", &oracle,
                "--seed", "3", "--no-inject", "-o", s(&out_wav),
            ]);
            assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
            let x0 = read_wav(&wav, 24_000).unwrap();
            let x = read_wav(&out_wav, 24_000).unwrap();
            let err = x0.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-4, "{schedule}/{prior}: {err}");
        }
    }
}

#[test]
fn schedule_file_is_accepted() {
    let dir = TempDir::new().unwrap();
    let (wav, mel) = analyze(dir.path());
    let sched = dir.path().join("sched.txt");
    std::fs::write(&sched, "linspace(1e-4, 0.05, 8)\n").unwrap();
    let out = specgrad(&[
        "sample", "--mel", s(&mel), "--schedule", s(&sched), "--predictor", &format!("oracle:{}", s(&wav)),
        "-o", s(&dir.path().join("o.wav")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let missing = specgrad(&[
        "sample", "--mel", s(&mel), "--schedule", "no-such-file", "--predictor", "zero",
        "-o", s(&dir.path().join("o.wav")),
    ]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn shaped_noise_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (_, mel) = analyze(dir.path());
    let run = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        let out = specgrad(&["shape-noise", "--mel", s(&mel), "--prior", "envelope", "--seed", seed, "-o", s(&path)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let a = run("5", "a.wav");
    assert_eq!(a, run("5", "b.wav"));
    assert_ne!(a, run("6", "c.wav"));
    assert_eq!(read_wav(dir.path().join("a.wav"), 24_000).unwrap().len(), 6000);
}

#[test]
fn unknown_prior_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let (_, mel) = analyze(dir.path());
    let out = specgrad(&["shape-noise", "--mel", s(&mel), "--prior", "pink", "-o", s(&dir.path().join("n.wav"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn exports_filter_magnitudes() {
    let dir = TempDir::new().unwrap();
    let (_, mel) = analyze(dir.path());
    let csv = dir.path().join("m.csv");
    let out = specgrad(&["export-filter", "--mel", s(&mel), "-o", s(&csv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("bin,frame_0,frame_1,"));
    let rows = read_filter_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 1025);
    assert!(rows.iter().all(|r| r.len() == 20 && r.iter().all(|v| *v > 0.0)));
}

#[test]
fn loss_eval_reports_step_and_loss() {
    let dir = TempDir::new().unwrap();
    let (wav, _) = analyze(dir.path());
    let out = specgrad(&["loss-eval", "--wav", s(&wav), "--prior", "diagonal", "--schedule", "WG-6", "--t", "4", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("prior=diagonal t=4 loss="), "{text}");

    let oracle = specgrad(&["loss-eval", "--wav", s(&wav), "--schedule", "WG-6", "--t", "2", "--predictor", "oracle"]);
    let text = stdout(&oracle);
    let loss: f64 = text.trim().rsplit('=').next().unwrap().parse().unwrap();
    assert!(loss < 1e-12, "{text}");

    let bad_step = specgrad(&["loss-eval", "--wav", s(&wav), "--schedule", "WG-3", "--t", "9"]);
    assert_eq!(code(&bad_step), 1);
}

#[test]
fn bench_prints_a_table() {
    let out = specgrad(&["bench", "--frames", "8", "--fft", "256", "--repeat", "3"]);
    // Timing on a shared machine is noisy; a bound violation is exit code 3.
    assert!(matches!(code(&out), 0 | 3));
    assert!(stdout(&out).contains("ratio(2K/K)"));
}
