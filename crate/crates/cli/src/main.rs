//! `vqspk`: train, identify and run experiments from the command line.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on invalid flags.

mod corpus;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use vqspk::recognizer::DistanceMatrix;
use vqspk::{
    distance_matrix, extract_mfcc, load_db, notch_filter, read_wav, save_db, train_codebook,
    AudioClip, LbgConfig, MfccConfig, NotchSpec, SpeakerDb,
};

use crate::corpus::CorpusSpec;

#[derive(Parser)]
#[command(
    name = "vqspk",
    version,
    about = "MFCC + LBG vector-quantization speaker identification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enroll every speaker in a corpus directory and write a database.
    Train {
        #[arg(long)]
        input_dir: PathBuf,
        #[arg(long)]
        db_out: PathBuf,
        #[command(flatten)]
        mfcc: MfccArgs,
        #[command(flatten)]
        lbg: LbgArgs,
    },
    /// Identify the speaker of one clip.
    Identify {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        /// Fail unless the database was built with the feature flags given here.
        #[arg(long)]
        check_config: bool,
        #[command(flatten)]
        mfcc: MfccArgs,
    },
    /// Train on one directory, score another and write the distance matrix.
    Evaluate {
        #[arg(long)]
        train_dir: PathBuf,
        #[arg(long)]
        test_dir: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
        /// Also save the trained database.
        #[arg(long)]
        db_out: Option<PathBuf>,
        #[command(flatten)]
        mfcc: MfccArgs,
        #[command(flatten)]
        lbg: LbgArgs,
    },
    /// Count correct identifications as the notch around `--center` widens.
    NotchSweep {
        #[arg(long)]
        train_dir: PathBuf,
        #[arg(long)]
        test_dir: PathBuf,
        /// Comma-separated width factors in [0, 1); the stop band spans factor * fs / 2.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
        widths: Vec<f64>,
        #[arg(long, default_value_t = 1000.0)]
        center: f64,
        #[arg(long, default_value_t = 50.0)]
        transition: f64,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[command(flatten)]
        mfcc: MfccArgs,
        #[command(flatten)]
        lbg: LbgArgs,
    },
    /// Synthetic corpus tools.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Write one clip's features and its codebook training history as CSV.
    Dump {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        features_out: PathBuf,
        #[arg(long)]
        trace_out: PathBuf,
        /// Directory for per-stage codeword snapshots (`stage<k>.csv`).
        #[arg(long)]
        snapshots_dir: Option<PathBuf>,
        #[command(flatten)]
        mfcc: MfccArgs,
        #[command(flatten)]
        lbg: LbgArgs,
    },
}

#[derive(Subcommand)]
enum CorpusAction {
    /// Write `<dir>/s<k>.wav` training clips and `<dir>-test/s<k>.wav` held-out clips.
    Generate {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 11)]
        speakers: usize,
        #[arg(long, default_value_t = 16000)]
        fs: u32,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = 25.0)]
        snr: f64,
        #[arg(long, default_value_t = 1)]
        train_seed: u64,
        #[arg(long, default_value_t = 2)]
        test_seed: u64,
    },
}

#[derive(Args, Clone)]
struct MfccArgs {
    /// Samples per frame, also the FFT size.
    #[arg(long, default_value_t = 256)]
    frame_len: usize,
    /// Samples shared by neighbouring frames.
    #[arg(long, default_value_t = 100)]
    overlap: usize,
    #[arg(long, default_value_t = 0.99)]
    alpha: f64,
    #[arg(long)]
    no_preemphasis: bool,
    #[arg(long, default_value_t = 26)]
    num_filters: usize,
    /// First kept cepstral coefficient (1-based).
    #[arg(long, default_value_t = 2)]
    coeff_lo: usize,
    /// Last kept cepstral coefficient (1-based, inclusive).
    #[arg(long, default_value_t = 13)]
    coeff_hi: usize,
    #[arg(long, default_value_t = 1e-10)]
    log_floor: f64,
}

impl MfccArgs {
    fn config(&self) -> MfccConfig {
        MfccConfig {
            frame_len: self.frame_len,
            overlap: self.overlap,
            preemphasis_alpha: self.alpha,
            preemphasis_enabled: !self.no_preemphasis,
            num_filters: self.num_filters,
            coeff_lo: self.coeff_lo,
            coeff_hi: self.coeff_hi,
            log_floor: self.log_floor,
        }
    }
}

#[derive(Args, Clone)]
struct LbgArgs {
    /// Codewords per speaker; a power of two.
    #[arg(long, default_value_t = 8)]
    codebook_size: usize,
    /// Splitting perturbation.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Lloyd stops once the relative distortion drop is below this.
    #[arg(long, default_value_t = 1e-3)]
    rel_tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
}

impl LbgArgs {
    fn config(&self) -> LbgConfig {
        LbgConfig {
            target_size: self.codebook_size,
            epsilon: self.epsilon,
            rel_distortion_tol: self.rel_tol,
            max_lloyd_iters: self.max_iters,
        }
    }
}

/// Flag values that parse but break a type invariant.
struct Usage(String);

fn checked<T>(value: T, check: impl FnOnce(&T) -> vqspk::Result<()>) -> Result<T, Usage> {
    check(&value).map_err(|e| Usage(e.to_string()))?;
    Ok(value)
}

fn mfcc_config(args: &MfccArgs) -> Result<MfccConfig, Usage> {
    checked(args.config(), MfccConfig::validate)
}

fn lbg_config(args: &LbgArgs) -> Result<LbgConfig, Usage> {
    checked(args.config(), LbgConfig::validate)
}

/// A validated command, ready to run.
enum Job {
    Train(PathBuf, PathBuf, MfccConfig, LbgConfig),
    Identify(PathBuf, PathBuf, Option<MfccConfig>),
    Evaluate(
        PathBuf,
        PathBuf,
        PathBuf,
        Option<PathBuf>,
        MfccConfig,
        LbgConfig,
    ),
    NotchSweep(Sweep),
    Generate(PathBuf, CorpusSpec),
    Dump(DumpJob),
}

struct Sweep {
    train_dir: PathBuf,
    test_dir: PathBuf,
    specs: Vec<NotchSpec>,
    out_csv: Option<PathBuf>,
    mfcc: MfccConfig,
    lbg: LbgConfig,
}

struct DumpJob {
    wav: PathBuf,
    features_out: PathBuf,
    trace_out: PathBuf,
    snapshots_dir: Option<PathBuf>,
    mfcc: MfccConfig,
    lbg: LbgConfig,
}

fn validate(command: Command) -> Result<Job, Usage> {
    Ok(match command {
        Command::Train {
            input_dir,
            db_out,
            mfcc,
            lbg,
        } => Job::Train(input_dir, db_out, mfcc_config(&mfcc)?, lbg_config(&lbg)?),
        Command::Identify {
            db,
            wav,
            check_config,
            mfcc,
        } => {
            let forced = if check_config {
                Some(mfcc_config(&mfcc)?)
            } else {
                None
            };
            Job::Identify(db, wav, forced)
        }
        Command::Evaluate {
            train_dir,
            test_dir,
            out_csv,
            db_out,
            mfcc,
            lbg,
        } => Job::Evaluate(
            train_dir,
            test_dir,
            out_csv,
            db_out,
            mfcc_config(&mfcc)?,
            lbg_config(&lbg)?,
        ),
        Command::NotchSweep {
            train_dir,
            test_dir,
            widths,
            center,
            transition,
            out_csv,
            mfcc,
            lbg,
        } => {
            if widths.is_empty() {
                return Err(Usage("--widths needs at least one value".into()));
            }
            let specs = widths
                .iter()
                .map(|&w| NotchSpec::new(center, w, transition).map_err(|e| Usage(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            Job::NotchSweep(Sweep {
                train_dir,
                test_dir,
                specs,
                out_csv,
                mfcc: mfcc_config(&mfcc)?,
                lbg: lbg_config(&lbg)?,
            })
        }
        Command::Corpus {
            action:
                CorpusAction::Generate {
                    out_dir,
                    speakers,
                    fs,
                    duration,
                    snr,
                    train_seed,
                    test_seed,
                },
        } => {
            if speakers == 0 {
                return Err(Usage("--speakers must be at least 1".into()));
            }
            if fs == 0 {
                return Err(Usage("--fs must be positive".into()));
            }
            if !(duration > 0.0 && duration.is_finite()) {
                return Err(Usage(format!("--duration {duration} must be positive")));
            }
            if snr.is_nan() {
                return Err(Usage("--snr must be a number".into()));
            }
            Job::Generate(
                out_dir,
                CorpusSpec {
                    speakers,
                    sample_rate_hz: fs,
                    duration_s: duration,
                    snr_db: snr,
                    train_seed,
                    test_seed,
                },
            )
        }
        Command::Dump {
            wav,
            features_out,
            trace_out,
            snapshots_dir,
            mfcc,
            lbg,
        } => Job::Dump(DumpJob {
            wav,
            features_out,
            trace_out,
            snapshots_dir,
            mfcc: mfcc_config(&mfcc)?,
            lbg: lbg_config(&lbg)?,
        }),
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn enroll(
    dir: &Path,
    mfcc: MfccConfig,
    lbg: LbgConfig,
) -> Result<(SpeakerDb, Vec<(String, usize, f64)>)> {
    let speakers = corpus::load_speakers(dir)?;
    eprintln!(
        "enrolling {} speakers from {}",
        speakers.len(),
        dir.display()
    );
    let (db, stats) = SpeakerDb::new(mfcc, lbg)?.enroll_all(&speakers)?;
    let summary = speakers
        .iter()
        .zip(&stats)
        .map(|((id, _), s)| (id.clone(), s.frames, s.final_distortion()))
        .collect();
    Ok((db, summary))
}

fn margin_summary(out: &mut String, m: &DistanceMatrix) -> Result<()> {
    let margins = m.margins();
    if margins.is_empty() {
        return Ok(());
    }
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    writeln!(
        out,
        "margin mean={:.6} min={:.6} max={:.6}",
        m.mean_margin(),
        min,
        max
    )?;
    Ok(())
}

fn run(job: Job) -> Result<String> {
    let mut out = String::new();
    match job {
        Job::Train(input_dir, db_out, mfcc, lbg) => {
            let (db, summary) = enroll(&input_dir, mfcc, lbg)?;
            writeln!(out, "speaker,frames,distortion")?;
            for (id, frames, distortion) in summary {
                writeln!(out, "{id},{frames},{distortion:.6}")?;
            }
            save_db(&db, &db_out).with_context(|| format!("writing {}", db_out.display()))?;
            eprintln!("wrote {} speakers to {}", db.len(), db_out.display());
        }
        Job::Identify(db_path, wav, forced) => {
            let db = load_db(&db_path).with_context(|| format!("loading {}", db_path.display()))?;
            let clip = read_wav(&wav).with_context(|| format!("reading {}", wav.display()))?;
            let result = match forced {
                Some(cfg) => db.identify_with_config(&clip, &cfg)?,
                None => db.identify(&clip)?,
            };
            writeln!(out, "predicted={}", result.predicted)?;
            for (id, d) in result.ranked() {
                writeln!(out, "{id} {d:.9}")?;
            }
        }
        Job::Evaluate(train_dir, test_dir, out_csv, db_out, mfcc, lbg) => {
            let (db, _) = enroll(&train_dir, mfcc, lbg)?;
            if let Some(path) = db_out {
                save_db(&db, &path).with_context(|| format!("writing {}", path.display()))?;
            }
            let labeled = corpus::load_labeled(&test_dir)?;
            let m = distance_matrix(&labeled, &db)?;
            write(&out_csv, &m.to_csv())?;
            writeln!(
                out,
                "accuracy={:.6} ({}/{})",
                m.accuracy(),
                m.correct(),
                m.rows.len()
            )?;
            margin_summary(&mut out, &m)?;
        }
        Job::NotchSweep(s) => {
            let (db, _) = enroll(&s.train_dir, s.mfcc, s.lbg)?;
            let labeled = corpus::load_labeled(&s.test_dir)?;
            let mut table = String::from("width,identified,total\n");
            for spec in &s.specs {
                let filtered = labeled
                    .iter()
                    .map(|(id, clip)| Ok((id.clone(), notch_filter(clip, spec)?)))
                    .collect::<Result<Vec<(String, AudioClip)>>>()?;
                let m = distance_matrix(&filtered, &db)?;
                writeln!(
                    table,
                    "{},{},{}",
                    spec.width_factor,
                    m.correct(),
                    m.rows.len()
                )?;
            }
            if let Some(path) = s.out_csv {
                write(&path, &table)?;
            }
            out = table;
        }
        Job::Generate(out_dir, spec) => {
            let (train, test) = corpus::generate(&out_dir, &spec)?;
            eprintln!(
                "wrote {} speakers to {} and {}",
                spec.speakers,
                train.display(),
                test.display()
            );
        }
        Job::Dump(d) => {
            let clip = read_wav(&d.wav).with_context(|| format!("reading {}", d.wav.display()))?;
            let features = extract_mfcc(&clip, &d.mfcc)?;
            write(&d.features_out, &features.to_csv(d.mfcc.coeff_lo))?;
            let (_, trace) = train_codebook(&features.as_rows(), &d.lbg)?;
            write(&d.trace_out, &trace.to_csv())?;
            if let Some(dir) = d.snapshots_dir {
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                for stage in 0..trace.stages() {
                    if let Some(csv) = trace.snapshot_csv(stage) {
                        write(&dir.join(format!("stage{stage}.csv")), &csv)?;
                    }
                }
            }
            eprintln!(
                "{} frames, final codebook size {}",
                features.rows(),
                trace.sizes().last().unwrap_or(&0)
            );
        }
    }
    Ok(out)
}

fn configure_threads() -> Result<(), Usage> {
    let Ok(raw) = std::env::var("VQSPK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Usage(format!("VQSPK_THREADS={raw:?} is not a thread count")))?;
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let job = configure_threads().and_then(|()| validate(cli.command));
    let job = match job {
        Ok(job) => job,
        Err(Usage(reason)) => {
            eprintln!("error: {reason}");
            return ExitCode::from(2);
        }
    };
    match run(job) {
        Ok(text) => {
            let mut stdout = io::stdout().lock();
            match stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
            {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                    eprintln!("error: writing output: {e}");
                    ExitCode::from(1)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
