//! Speaker enrollment, identification and the speaker database file.
//!
//! A speaker is modelled by one LBG codebook trained on the pooled MFCC
//! frames of their enrollment clips. An unknown clip is scored against
//! every codebook by the mean Euclidean distance of its frames to the
//! nearest codeword, and the lowest score wins.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::mfcc::{FeatureMatrix, MfccConfig, MfccExtractor};
use crate::vq::{avg_distortion, train_codebook, Codebook, LbgConfig, LbgTrace};

const MAGIC: &str = "VQSPKDB";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerModel {
    pub id: String,
    pub codebook: Codebook,
}

/// Summary of one enrollment run.
#[derive(Debug, Clone)]
pub struct EnrollStats {
    pub frames: usize,
    pub trace: LbgTrace,
}

impl EnrollStats {
    /// Mean squared quantization error of the final codebook.
    pub fn final_distortion(&self) -> f64 {
        self.trace.final_distortion().unwrap_or(0.0)
    }
}

fn validate_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Error::InvalidId(id.to_string()));
    }
    Ok(())
}

/// Extracts normalized features, building an extractor for the clip's rate.
pub fn extract_features(clip: &AudioClip, config: &MfccConfig) -> Result<FeatureMatrix> {
    if clip.is_empty() {
        return Err(Error::EmptyInput("audio clip"));
    }
    MfccExtractor::new(config, clip.sample_rate_hz())?.extract(clip)
}

/// Trains one speaker model from the concatenated frames of `clips`.
pub fn train_model(
    id: &str,
    clips: &[AudioClip],
    mfcc: &MfccConfig,
    lbg: &LbgConfig,
) -> Result<(SpeakerModel, EnrollStats)> {
    validate_id(id)?;
    if clips.is_empty() {
        return Err(Error::EmptyInput("enrollment clips"));
    }
    let parts = clips
        .iter()
        .map(|c| extract_features(c, mfcc))
        .collect::<Result<Vec<_>>>()?;
    let features = FeatureMatrix::concat(&parts)?;
    let (codebook, trace) = train_codebook(&features.as_rows(), lbg)?;
    Ok((
        SpeakerModel {
            id: id.to_string(),
            codebook,
        },
        EnrollStats {
            frames: features.rows(),
            trace,
        },
    ))
}

/// Distances from one clip to every enrolled speaker, in database order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub distances: Vec<(String, f64)>,
    pub predicted: String,
}

impl MatchResult {
    fn from_distances(distances: Vec<(String, f64)>) -> Self {
        let predicted = distances
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
            .map(|(id, _)| id.clone())
            .unwrap_or_default();
        Self {
            distances,
            predicted,
        }
    }

    pub fn distance(&self, id: &str) -> Option<f64> {
        self.distances
            .iter()
            .find(|(s, _)| s == id)
            .map(|(_, d)| *d)
    }

    /// Runner-up distance minus winning distance; `None` with one speaker.
    pub fn margin(&self) -> Option<f64> {
        let mut d: Vec<f64> = self.distances.iter().map(|(_, d)| *d).collect();
        d.sort_by(f64::total_cmp);
        (d.len() >= 2).then(|| d[1] - d[0])
    }

    /// Distances sorted ascending, ties by id.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut r = self.distances.clone();
        r.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerDb {
    speakers: Vec<SpeakerModel>,
    mfcc_config: MfccConfig,
    lbg_config: LbgConfig,
}

impl SpeakerDb {
    /// An empty database; enroll at least one speaker before identifying.
    pub fn new(mfcc_config: MfccConfig, lbg_config: LbgConfig) -> Result<Self> {
        mfcc_config.validate()?;
        lbg_config.validate()?;
        Ok(Self {
            speakers: Vec::new(),
            mfcc_config,
            lbg_config,
        })
    }

    pub fn speakers(&self) -> &[SpeakerModel] {
        &self.speakers
    }

    pub fn ids(&self) -> Vec<&str> {
        self.speakers.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn mfcc_config(&self) -> &MfccConfig {
        &self.mfcc_config
    }

    pub fn lbg_config(&self) -> &LbgConfig {
        &self.lbg_config
    }

    pub fn contains(&self, id: &str) -> bool {
        self.speakers.iter().any(|s| s.id == id)
    }

    /// Appends a trained model.
    pub fn add_model(mut self, model: SpeakerModel) -> Result<Self> {
        validate_id(&model.id)?;
        if self.contains(&model.id) {
            return Err(Error::DuplicateId(model.id));
        }
        let dim = self.mfcc_config.dim();
        if model.codebook.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: model.codebook.dim(),
            });
        }
        self.speakers.push(model);
        Ok(self)
    }

    /// Extracts features from `clips`, trains a codebook and appends the
    /// speaker.
    pub fn enroll(self, id: &str, clips: &[AudioClip]) -> Result<Self> {
        Ok(self.enroll_with_stats(id, clips)?.0)
    }

    pub fn enroll_with_stats(self, id: &str, clips: &[AudioClip]) -> Result<(Self, EnrollStats)> {
        if self.contains(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        let (model, stats) = train_model(id, clips, &self.mfcc_config, &self.lbg_config)?;
        Ok((self.add_model(model)?, stats))
    }

    /// Enrolls several speakers, training their codebooks in parallel.
    /// Speakers are appended in input order.
    pub fn enroll_all(
        mut self,
        speakers: &[(String, Vec<AudioClip>)],
    ) -> Result<(Self, Vec<EnrollStats>)> {
        for (i, (id, _)) in speakers.iter().enumerate() {
            if self.contains(id) || speakers[..i].iter().any(|(other, _)| other == id) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let trained = speakers
            .par_iter()
            .map(|(id, clips)| train_model(id, clips, &self.mfcc_config, &self.lbg_config))
            .collect::<Result<Vec<_>>>()?;
        let mut stats = Vec::with_capacity(trained.len());
        for (model, s) in trained {
            self = self.add_model(model)?;
            stats.push(s);
        }
        Ok((self, stats))
    }

    /// Fails with `ConfigMismatch` unless `forced` equals the stored
    /// feature configuration.
    pub fn check_config(&self, forced: &MfccConfig) -> Result<()> {
        if forced != &self.mfcc_config {
            return Err(Error::ConfigMismatch(format!(
                "database was enrolled with {:?}, caller requested {:?}",
                self.mfcc_config, forced
            )));
        }
        Ok(())
    }

    pub fn identify(&self, clip: &AudioClip) -> Result<MatchResult> {
        if self.is_empty() {
            return Err(Error::EmptyInput("speaker database"));
        }
        let features = extract_features(clip, &self.mfcc_config)?;
        self.identify_features(&features)
    }

    /// Like [`identify`](Self::identify), but first checks that `forced`
    /// matches the stored configuration.
    pub fn identify_with_config(
        &self,
        clip: &AudioClip,
        forced: &MfccConfig,
    ) -> Result<MatchResult> {
        self.check_config(forced)?;
        self.identify(clip)
    }

    /// Scores precomputed feature rows against every codebook.
    pub fn identify_features(&self, features: &FeatureMatrix) -> Result<MatchResult> {
        if self.is_empty() {
            return Err(Error::EmptyInput("speaker database"));
        }
        let rows = features.as_rows();
        let distances = self
            .speakers
            .iter()
            .map(|s| Ok((s.id.clone(), avg_distortion(&rows, &s.codebook)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MatchResult::from_distances(distances))
    }

    /// Serializes to the text database format.
    pub fn to_text(&self) -> Result<String> {
        if self.is_empty() {
            return Err(Error::EmptyInput("speaker database"));
        }
        let m = &self.mfcc_config;
        let l = &self.lbg_config;
        let mut out = format!("{MAGIC} {VERSION}\n");
        let _ = writeln!(
            out,
            "MFCC {} {} {} {} {} {} {} {}",
            m.frame_len,
            m.overlap,
            m.preemphasis_alpha,
            u8::from(m.preemphasis_enabled),
            m.num_filters,
            m.coeff_lo,
            m.coeff_hi,
            m.log_floor
        );
        let _ = writeln!(
            out,
            "LBG {} {} {} {}",
            l.target_size, l.epsilon, l.rel_distortion_tol, l.max_lloyd_iters
        );
        for s in &self.speakers {
            let cb = &s.codebook;
            let _ = writeln!(out, "SPEAKER {} {} {}", s.id, cb.size(), cb.dim());
            for c in cb.iter() {
                let line: Vec<String> = c.iter().map(|v| format!("{v:.16e}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Format {
                line: 0,
                reason: format!("unexpected end of file, expected {what}"),
            })
        };

        let (n, header) = next("header")?;
        let mut parts = header.split(' ');
        if parts.next() != Some(MAGIC) {
            return Err(format_err(n, "bad magic"));
        }
        if parts.next() != Some("1") || parts.next().is_some() {
            return Err(format_err(n, "unsupported version"));
        }

        let (n, line) = next("MFCC line")?;
        let f = fields(n, line, "MFCC", 8)?;
        let mfcc_config = MfccConfig {
            frame_len: parse(n, f[0])?,
            overlap: parse(n, f[1])?,
            preemphasis_alpha: parse(n, f[2])?,
            preemphasis_enabled: match f[3] {
                "0" => false,
                "1" => true,
                other => return Err(format_err(n, &format!("bad preemphasis flag {other:?}"))),
            },
            num_filters: parse(n, f[4])?,
            coeff_lo: parse(n, f[5])?,
            coeff_hi: parse(n, f[6])?,
            log_floor: parse(n, f[7])?,
        };
        mfcc_config
            .validate()
            .map_err(|e| format_err(n, &e.to_string()))?;

        let (n, line) = next("LBG line")?;
        let f = fields(n, line, "LBG", 4)?;
        let lbg_config = LbgConfig {
            target_size: parse(n, f[0])?,
            epsilon: parse(n, f[1])?,
            rel_distortion_tol: parse(n, f[2])?,
            max_lloyd_iters: parse(n, f[3])?,
        };
        lbg_config
            .validate()
            .map_err(|e| format_err(n, &e.to_string()))?;

        let mut db = SpeakerDb {
            speakers: Vec::new(),
            mfcc_config,
            lbg_config,
        };
        while let Ok((n, line)) = next("speaker") {
            if line.is_empty() {
                // Only a trailing newline may follow the last codebook.
                if let Ok((m, _)) = next("end") {
                    return Err(format_err(m, "content after blank line"));
                }
                break;
            }
            let f = fields(n, line, "SPEAKER", 3)?;
            let id = f[0].to_string();
            let size: usize = parse(n, f[1])?;
            let dim: usize = parse(n, f[2])?;
            if size == 0 || dim == 0 {
                return Err(format_err(n, "codebook must be non-empty"));
            }
            let mut rows = Vec::with_capacity(size);
            for _ in 0..size {
                let (m, line) = next("codeword")?;
                let row = line
                    .split(' ')
                    .map(|t| parse::<f64>(m, t))
                    .collect::<Result<Vec<_>>>()?;
                if row.len() != dim {
                    return Err(format_err(
                        m,
                        &format!("expected {dim} values, found {}", row.len()),
                    ));
                }
                rows.push(row);
            }
            let codebook = Codebook::from_rows(&rows).map_err(|e| format_err(n, &e.to_string()))?;
            db = db
                .add_model(SpeakerModel { id, codebook })
                .map_err(|e| format_err(n, &e.to_string()))?;
        }
        if db.is_empty() {
            return Err(format_err(0, "database holds no speakers"));
        }
        Ok(db)
    }
}

fn format_err(line: usize, reason: &str) -> Error {
    Error::Format {
        line,
        reason: reason.to_string(),
    }
}

fn fields<'a>(line_no: usize, line: &'a str, tag: &str, count: usize) -> Result<Vec<&'a str>> {
    let mut parts = line.split(' ');
    if parts.next() != Some(tag) {
        return Err(format_err(line_no, &format!("expected {tag} line")));
    }
    let rest: Vec<&str> = parts.collect();
    if rest.len() != count {
        return Err(format_err(
            line_no,
            &format!("{tag} line needs {count} fields, found {}", rest.len()),
        ));
    }
    Ok(rest)
}

fn parse<T: std::str::FromStr>(line: usize, token: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| format_err(line, &format!("cannot parse {token:?}")))
}

pub fn identify(clip: &AudioClip, db: &SpeakerDb) -> Result<MatchResult> {
    db.identify(clip)
}

pub fn save_db(db: &SpeakerDb, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, db.to_text()?)?;
    Ok(())
}

pub fn load_db(path: impl AsRef<Path>) -> Result<SpeakerDb> {
    let text = fs::read_to_string(path)?;
    SpeakerDb::from_text(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub true_id: String,
    pub result: MatchResult,
}

/// Clip-by-speaker distances: rows in input order, columns in database order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub speaker_ids: Vec<String>,
    pub rows: Vec<MatrixRow>,
}

impl DistanceMatrix {
    pub fn accuracy(&self) -> f64 {
        let hits = self
            .rows
            .iter()
            .filter(|r| r.result.predicted == r.true_id)
            .count();
        hits as f64 / self.rows.len() as f64
    }

    pub fn correct(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.result.predicted == r.true_id)
            .count()
    }

    pub fn margins(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.result.margin()).collect()
    }

    pub fn mean_margin(&self) -> f64 {
        let m = self.margins();
        if m.is_empty() {
            0.0
        } else {
            m.iter().sum::<f64>() / m.len() as f64
        }
    }

    /// CSV: `true_id,<ids...>,predicted`, one row per clip, then
    /// `accuracy,<value>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true_id");
        for id in &self.speaker_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push_str(",predicted\n");
        for r in &self.rows {
            out.push_str(&r.true_id);
            for (_, d) in &r.result.distances {
                let _ = write!(out, ",{d:.9e}");
            }
            let _ = writeln!(out, ",{}", r.result.predicted);
        }
        let _ = writeln!(out, "accuracy,{}", self.accuracy());
        out
    }
}

/// Identifies every labelled clip against `db`. Clips are processed in
/// parallel; output order follows the input.
pub fn distance_matrix(labeled: &[(String, AudioClip)], db: &SpeakerDb) -> Result<DistanceMatrix> {
    if labeled.is_empty() {
        return Err(Error::EmptyInput("labelled clips"));
    }
    if db.is_empty() {
        return Err(Error::EmptyInput("speaker database"));
    }
    let rows = labeled
        .par_iter()
        .map(|(true_id, clip)| {
            Ok(MatrixRow {
                true_id: true_id.clone(),
                result: db.identify(clip)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceMatrix {
        speaker_ids: db.ids().into_iter().map(String::from).collect(),
        rows,
    })
}
