//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

#[path = "../../core/tests/support/lloyd_oracle.rs"]
mod lloyd_oracle;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vqspk::mfcc::{dct_ii, hz_to_mel, mel_to_hz};
use vqspk::signal::default_profiles;
use vqspk::{
    hamming_window, load_db, power_spectrum, read_wav, save_db, synth_speaker_clip, train_codebook,
    AudioClip, LbgConfig,
};

type Outcome = Result<String, String>;

fn vqspk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vqspk"))
        .args(args)
        .output()
        .expect("failed to launch vqspk")
}

fn run_ok(args: &[&str]) -> Result<String, String> {
    let out = vqspk(args);
    if !out.status.success() {
        return Err(format!(
            "`vqspk {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, format!("took {took:.2?}, limit {limit:?}"))
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("temp paths are UTF-8")
}

fn generate(root: &Path, name: &str, speakers: usize) -> Result<(PathBuf, PathBuf), String> {
    let dir = root.join(name);
    run_ok(&[
        "corpus",
        "generate",
        "--out-dir",
        path_str(&dir),
        "--speakers",
        &speakers.to_string(),
    ])?;
    Ok((dir, root.join(format!("{name}-test"))))
}

fn field(stdout: &str, key: &str) -> Result<f64, String> {
    stdout
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(key))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("no `{key}` in output: {stdout}"))
}

fn evaluate(train: &Path, test: &Path, csv: &Path, extra: &[&str]) -> Result<(f64, f64), String> {
    let mut args = vec![
        "evaluate",
        "--train-dir",
        path_str(train),
        "--test-dir",
        path_str(test),
        "--out-csv",
        path_str(csv),
    ];
    args.extend_from_slice(extra);
    let out = run_ok(&args)?;
    Ok((field(&out, "accuracy=")?, field(&out, "mean=")?))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let w = hamming_window(256);
    check(
        (w[0] - 0.08).abs() <= 1e-12 && (w[255] - 0.08).abs() <= 1e-12,
        "Hamming end points",
    )?;
    check(hz_to_mel(0.0) == 0.0, "hz_to_mel(0)")?;
    let m1000 = hz_to_mel(1000.0);
    check(
        (m1000 - 1000.0).abs() <= 0.5,
        format!("hz_to_mel(1000) = {m1000}"),
    )?;
    for i in 1..=8000 {
        let f = i as f64;
        let back = mel_to_hz(hz_to_mel(f));
        check(
            (back - f).abs() <= 1e-6 * f,
            format!("mel round trip at {f} Hz"),
        )?;
    }
    let mut impulse = vec![0.0; 256];
    impulse[0] = 1.0;
    let flat = power_spectrum(&impulse);
    check(
        flat.iter().all(|p| (p - 1.0 / 256.0).abs() <= 1e-12),
        "impulse PSD not flat at 1/256",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let frame: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let psd = power_spectrum(&frame);
        let two_sided = psd[0] + psd[128] + 2.0 * psd[1..128].iter().sum::<f64>();
        let energy: f64 = frame.iter().map(|x| x * x).sum();
        check((two_sided - energy).abs() <= 1e-9 * energy, "Parseval")?;

        let v: Vec<f64> = (0..26).map(|_| rng.random_range(-30.0..5.0)).collect();
        let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
        check(
            (norm(&dct_ii(&v)) - norm(&v)).abs() <= 1e-9 * norm(&v),
            "DCT norm",
        )?;
    }
    within(Duration::from_secs(1), start)?;
    Ok(format!(
        "hz_to_mel(1000)={m1000:.6}, {:.0?}",
        start.elapsed()
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let points: Vec<Vec<f64>> = (0..64)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let cfg = LbgConfig::default();
    let (_, trace) = train_codebook(&points, &cfg).map_err(|e| e.to_string())?;
    let oracle = lloyd_oracle::lbg_oracle(
        &points,
        8,
        cfg.epsilon,
        cfg.rel_distortion_tol,
        cfg.max_lloyd_iters,
    );
    check(
        trace.records.len() == oracle.len(),
        format!(
            "{} trace records, oracle has {}",
            trace.records.len(),
            oracle.len()
        ),
    )?;
    for (r, o) in trace.records.iter().zip(&oracle) {
        check(r.stage == o.stage, "stage layout differs from oracle")?;
        check(
            (r.distortion - o.distortion).abs() <= 1e-12,
            "distortion differs from oracle",
        )?;
        for (c, oc) in r.codebook.iter().zip(&o.codebook) {
            for (a, b) in c.iter().zip(oc) {
                check(
                    (a - b).abs() <= 1e-12,
                    format!("codeword differs at stage {}", r.stage),
                )?;
            }
        }
    }
    for pair in trace.records.windows(2) {
        if pair[0].stage == pair[1].stage {
            check(
                pair[1].distortion <= pair[0].distortion,
                "distortion rose within a stage",
            )?;
        }
    }
    let sizes = trace.sizes();
    check(sizes == [1, 2, 4, 8], format!("sizes {sizes:?}"))?;
    within(Duration::from_secs(1), start)?;
    Ok(format!(
        "{} Lloyd steps match, sizes {sizes:?}",
        trace.records.len()
    ))
}

fn criterion_3(root: &Path) -> Outcome {
    let start = Instant::now();
    let (train, test) = generate(root, "c3", 11)?;
    let (self_acc, _) = evaluate(&train, &train, &root.join("c3-self.csv"), &[])?;
    let (held_acc, _) = evaluate(&train, &test, &root.join("c3-held.csv"), &[])?;
    check(self_acc == 1.0, format!("training accuracy {self_acc}"))?;
    check(held_acc == 1.0, format!("held-out accuracy {held_acc}"))?;
    within(Duration::from_secs(30), start)?;
    Ok(format!("train {self_acc}, held-out {held_acc}"))
}

fn criterion_4(root: &Path) -> Outcome {
    let start = Instant::now();
    let (train, test) = generate(root, "c4", 13)?;
    let (acc, _) = evaluate(&train, &test, &root.join("c4.csv"), &[])?;
    check(acc == 1.0, format!("13-speaker accuracy {acc}"))?;
    within(Duration::from_secs(30), start)?;
    Ok(format!("13 speakers, accuracy {acc}"))
}

fn criterion_5(root: &Path) -> Outcome {
    let (train, test) = generate(root, "c5", 11)?;
    let default_csv = root.join("c5-default.csv");
    let ablated_csv = root.join("c5-no-preemphasis.csv");
    let (acc, margin) = evaluate(&train, &test, &default_csv, &[])?;
    let (ab_acc, ab_margin) = evaluate(&train, &test, &ablated_csv, &["--no-preemphasis"])?;
    for csv in [&default_csv, &ablated_csv] {
        let text = std::fs::read_to_string(csv).map_err(|e| format!("{}: {e}", csv.display()))?;
        check(
            text.starts_with("true_id,"),
            format!("{} is not a distance matrix", csv.display()),
        )?;
    }
    Ok(format!(
        "mean margin {margin:.4} with pre-emphasis (accuracy {acc}), {ab_margin:.4} without (accuracy {ab_acc})"
    ))
}

fn criterion_6(root: &Path) -> Outcome {
    let start = Instant::now();
    let (train, test) = generate(root, "c6", 11)?;
    let csv = root.join("c6-sweep.csv");
    let out = run_ok(&[
        "notch-sweep",
        "--train-dir",
        path_str(&train),
        "--test-dir",
        path_str(&test),
        "--widths",
        "0.1,0.2,0.3,0.4,0.5",
        "--center",
        "1000",
        "--out-csv",
        path_str(&csv),
    ])?;
    let rows: Vec<(usize, usize)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let counts: Vec<usize> = rows.iter().map(|r| r.0).collect();
    check(rows.len() == 5, format!("expected 5 widths, got {out}"))?;
    check(
        counts.windows(2).all(|w| w[1] <= w[0]),
        format!("counts {counts:?} rise with width"),
    )?;
    check(
        counts[0] == rows[0].1,
        format!("width 0.1 identified {}/{}", counts[0], rows[0].1),
    )?;
    within(Duration::from_secs(60), start)?;
    Ok(format!(
        "identified {counts:?} of {} (reference shape 8,8,5,4,4 of 8)",
        rows[0].1
    ))
}

fn random_clip(rng: &mut ChaCha8Rng) -> AudioClip {
    let profiles = default_profiles(16);
    let profile = &profiles[rng.random_range(0..profiles.len())];
    let duration = rng.random_range(0.3..1.2);
    synth_speaker_clip(profile, duration, 16000, rng.random()).expect("valid synthetic clip")
}

fn criterion_7(root: &Path) -> Outcome {
    let (train, _) = generate(root, "c7", 11)?;
    let first = root.join("c7-db.txt");
    let second = root.join("c7-db-resaved.txt");
    run_ok(&[
        "train",
        "--input-dir",
        path_str(&train),
        "--db-out",
        path_str(&first),
    ])?;
    let db = load_db(&first).map_err(|e| e.to_string())?;
    save_db(&db, &second).map_err(|e| e.to_string())?;
    let a = std::fs::read(&first).map_err(|e| e.to_string())?;
    let b = std::fs::read(&second).map_err(|e| e.to_string())?;
    check(a == b, "re-saved database differs from the original bytes")?;
    let reloaded = load_db(&second).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..20 {
        let clip = random_clip(&mut rng);
        let x = db.identify(&clip).map_err(|e| e.to_string())?;
        let y = reloaded.identify(&clip).map_err(|e| e.to_string())?;
        check(x == y, format!("clip {i} matches differently after reload"))?;
    }
    Ok(format!(
        "{} bytes re-saved identically, 20 clips agree",
        a.len()
    ))
}

fn criterion_8(root: &Path) -> Outcome {
    let (train, test) = generate(root, "c8", 11)?;
    let db_path = root.join("c8-db.txt");
    run_ok(&[
        "train",
        "--input-dir",
        path_str(&train),
        "--db-out",
        path_str(&db_path),
    ])?;
    let db = load_db(&db_path).map_err(|e| e.to_string())?;
    let mut clips: Vec<AudioClip> = Vec::new();
    for dir in [&train, &test] {
        for k in 1..=11 {
            clips.push(read_wav(dir.join(format!("s{k}.wav"))).map_err(|e| e.to_string())?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    clips.extend((0..10).map(|_| random_clip(&mut rng)));
    clips.push(
        AudioClip::new(
            (0..8000)
                .map(|i| 0.9 * (2.0 * PI * 440.0 * i as f64 / 16000.0).sin())
                .collect(),
            16000,
        )
        .map_err(|e| e.to_string())?,
    );
    let mut worst: f64 = 0.0;
    for (i, clip) in clips.iter().enumerate() {
        let quiet = clip.scaled(0.3).map_err(|e| e.to_string())?;
        let x = db.identify(clip).map_err(|e| e.to_string())?;
        let y = db.identify(&quiet).map_err(|e| e.to_string())?;
        check(
            x.predicted == y.predicted,
            format!("clip {i} prediction changed under gain"),
        )?;
        for ((_, a), (_, b)) in x.distances.iter().zip(&y.distances) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-6, format!("distance moved by {worst:e}"))?;
    Ok(format!(
        "{} clips, largest distance change {worst:.1e}",
        clips.len()
    ))
}

#[test]
fn acceptance() {
    let root = tempfile::tempdir().expect("temp dir");
    let root = root.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 unit formulas", Box::new(criterion_1)),
        ("2 LBG oracle", Box::new(criterion_2)),
        (
            "3 train/held-out identification",
            Box::new(|| criterion_3(root)),
        ),
        ("4 two more speakers", Box::new(|| criterion_4(root))),
        ("5 pre-emphasis ablation", Box::new(|| criterion_5(root))),
        ("6 notch sweep trend", Box::new(|| criterion_6(root))),
        ("7 persistence", Box::new(|| criterion_7(root))),
        ("8 gain invariance", Box::new(|| criterion_8(root))),
    ];
    let mut failed = Vec::new();
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(reason) => {
                println!("criterion {name}: FAIL ({reason})");
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
