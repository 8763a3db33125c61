//! MFCC feature extraction.
//!
//! Pipeline per clip: peak normalization, optional pre-emphasis, framing
//! with zero-padded tail, Hamming window, one-sided power spectrum
//! (`|FFT|^2 / N`), triangular mel filterbank, natural log with a floor,
//! orthonormal DCT-II, selection of cepstral indices `coeff_lo..=coeff_hi`
//! (1-based), and per-utterance mean/variance normalization.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::{peak_normalize, AudioClip};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    /// Samples per analysis frame; also the FFT size.
    pub frame_len: usize,
    /// Samples shared by consecutive frames (`hop = frame_len - overlap`).
    pub overlap: usize,
    pub preemphasis_alpha: f64,
    pub preemphasis_enabled: bool,
    pub num_filters: usize,
    /// First kept cepstral index, 1-based. Index 1 is the DCT's first output.
    pub coeff_lo: usize,
    /// Last kept cepstral index, 1-based and inclusive.
    pub coeff_hi: usize,
    /// Lower bound applied to filterbank energies before the log.
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_len: 256,
            overlap: 100,
            preemphasis_alpha: 0.99,
            preemphasis_enabled: true,
            num_filters: 26,
            coeff_lo: 2,
            coeff_hi: 13,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn hop(&self) -> usize {
        self.frame_len - self.overlap
    }

    /// Number of coefficients per feature vector.
    pub fn dim(&self) -> usize {
        self.coeff_hi + 1 - self.coeff_lo
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.frame_len < 2 {
            return bad(format!("frame_len {} must be at least 2", self.frame_len));
        }
        if self.overlap == 0 || self.overlap >= self.frame_len {
            return bad(format!(
                "overlap {} must satisfy 0 < overlap < frame_len ({})",
                self.overlap, self.frame_len
            ));
        }
        if !(0.0..1.0).contains(&self.preemphasis_alpha) {
            return bad(format!(
                "preemphasis alpha {} must lie in [0, 1)",
                self.preemphasis_alpha
            ));
        }
        if self.coeff_lo < 2 || self.coeff_lo > self.coeff_hi {
            return bad(format!(
                "coefficient range {}..={} must satisfy 1 < lo <= hi",
                self.coeff_lo, self.coeff_hi
            ));
        }
        if self.num_filters < self.coeff_hi {
            return bad(format!(
                "num_filters {} must be at least coeff_hi {}",
                self.num_filters, self.coeff_hi
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return bad(format!("log_floor {} must be positive", self.log_floor));
        }
        Ok(())
    }
}

/// Frames x coefficients, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("feature dim must be positive".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: values.len() % dim,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("feature values must be finite".into()));
        }
        Ok(Self { dim, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or(Error::EmptyInput("feature rows"))?;
        let mut values = Vec::with_capacity(dim * rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(dim, values)
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_rows(&self) -> Vec<&[f64]> {
        self.iter_rows().collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stacks matrices vertically.
    pub fn concat(parts: &[FeatureMatrix]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyInput("feature matrices"))?;
        let mut values = Vec::new();
        for p in parts {
            if p.dim != first.dim {
                return Err(Error::DimensionMismatch {
                    expected: first.dim,
                    got: p.dim,
                });
            }
            values.extend_from_slice(&p.values);
        }
        Ok(Self {
            dim: first.dim,
            values,
        })
    }

    /// CSV with header `frame,c<lo>,...,c<hi>`.
    pub fn to_csv(&self, coeff_lo: usize) -> String {
        let mut out = String::from("frame");
        for k in 0..self.dim {
            out.push_str(&format!(",c{}", coeff_lo + k));
        }
        out.push('\n');
        for (i, row) in self.iter_rows().enumerate() {
            out.push_str(&i.to_string());
            for v in row {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// First-order high-pass `y[t] = x[t] - alpha * x[t-1]`, with `y[0] = x[0]`.
pub fn pre_emphasize(samples: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    if let Some(&first) = samples.first() {
        out.push(first);
    }
    out.extend(samples.windows(2).map(|w| w[1] - alpha * w[0]));
    out
}

/// Number of frames `frame_signal` produces for `len` samples.
pub fn frame_count(len: usize, frame_len: usize, overlap: usize) -> usize {
    let hop = frame_len - overlap;
    if len <= frame_len {
        1
    } else {
        (len - frame_len).div_ceil(hop) + 1
    }
}

/// Splits samples into overlapping frames starting every `frame_len - overlap`
/// samples. The final frame is zero-padded to `frame_len`.
pub fn frame_signal(samples: &[f64], frame_len: usize, overlap: usize) -> Vec<Vec<f64>> {
    let hop = frame_len - overlap;
    (0..frame_count(samples.len(), frame_len, overlap))
        .map(|k| {
            let start = (k * hop).min(samples.len());
            let end = (start + frame_len).min(samples.len());
            let mut frame = samples[start..end].to_vec();
            frame.resize(frame_len, 0.0);
            frame
        })
        .collect()
}

/// `w[n] = 0.54 - 0.46 cos(2 pi n / (N - 1))`.
pub fn hamming_window(frame_len: usize) -> Vec<f64> {
    let denom = (frame_len - 1) as f64;
    (0..frame_len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

fn psd_with(fft: &dyn Fft<f64>, frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fft.process(&mut buf);
    buf[..n / 2 + 1]
        .iter()
        .map(|c| c.norm_sqr() / n as f64)
        .collect()
}

/// One-sided power spectrum `|FFT(frame)[k]|^2 / N` for `k = 0..=N/2`.
pub fn power_spectrum(frame: &[f64]) -> Vec<f64> {
    let fft = FftPlanner::new().plan_fft_forward(frame.len());
    psd_with(fft.as_ref(), frame)
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with unit peaks, equally spaced on the mel scale
/// between 0 Hz and Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    edges: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    /// Bins of the `num_filters + 2` edge points. Filter `k` spans
    /// `edges[k]..=edges[k + 2]` and peaks at `edges[k + 1]`.
    pub fn edge_bins(&self) -> &[usize] {
        &self.edges
    }

    pub fn center_bins(&self) -> &[usize] {
        &self.edges[1..self.edges.len() - 1]
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn apply(&self, psd: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(psd).map(|(a, b)| a * b).sum())
            .collect()
    }
}

pub fn mel_filterbank(
    num_filters: usize,
    fft_size: usize,
    sample_rate_hz: u32,
) -> Result<MelFilterbank> {
    if num_filters == 0 {
        return Err(Error::InvalidGeometry("need at least one filter".into()));
    }
    if fft_size < 2 || sample_rate_hz == 0 {
        return Err(Error::InvalidGeometry(format!(
            "fft size {fft_size} at {sample_rate_hz} Hz"
        )));
    }
    let fs = sample_rate_hz as f64;
    let n_bins = fft_size / 2 + 1;
    let mel_max = hz_to_mel(fs / 2.0);
    let step = mel_max / (num_filters + 1) as f64;
    let edges: Vec<usize> = (0..num_filters + 2)
        .map(|i| {
            let hz = mel_to_hz(i as f64 * step);
            ((hz * fft_size as f64 / fs).round() as usize).min(n_bins - 1)
        })
        .collect();
    if let Some(w) = edges.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGeometry(format!(
            "{num_filters} filters do not map to distinct bins at fft size {fft_size} and \
             {sample_rate_hz} Hz (bin {} repeats)",
            w[1]
        )));
    }
    let weights = edges
        .windows(3)
        .map(|e| {
            let (lo, mid, hi) = (e[0], e[1], e[2]);
            (0..n_bins)
                .map(|b| {
                    if b < lo || b > hi {
                        0.0
                    } else if b <= mid {
                        (b - lo) as f64 / (mid - lo) as f64
                    } else {
                        (hi - b) as f64 / (hi - mid) as f64
                    }
                })
                .collect()
        })
        .collect();
    Ok(MelFilterbank { edges, weights })
}

/// Row `k` of the orthonormal DCT-II basis of length `n`.
fn dct_basis_row(k: usize, n: usize) -> Vec<f64> {
    let scale = if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    };
    (0..n)
        .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
        .collect()
}

/// Orthonormal DCT-II.
pub fn dct_ii(input: &[f64]) -> Vec<f64> {
    let n = input.len();
    (0..n)
        .map(|k| {
            dct_basis_row(k, n)
                .iter()
                .zip(input)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Per-coefficient standardization across frames (population variance).
/// Columns whose standard deviation is below `1e-12` become zero.
pub fn normalize_features(raw: &FeatureMatrix) -> Result<FeatureMatrix> {
    let rows = raw.rows();
    if rows < 2 {
        return Err(Error::TooFewFrames(rows));
    }
    let dim = raw.dim();
    let n = rows as f64;
    let mut values = raw.values.clone();
    for c in 0..dim {
        let mean = raw.iter_rows().map(|r| r[c]).sum::<f64>() / n;
        let var = raw.iter_rows().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for r in 0..rows {
            let v = &mut values[r * dim + c];
            *v = if sd < 1e-12 { 0.0 } else { (*v - mean) / sd };
        }
    }
    Ok(FeatureMatrix { dim, values })
}

/// Reusable extractor holding the FFT plan, window, filterbank and DCT rows
/// for one configuration and sample rate.
#[derive(Clone)]
pub struct MfccExtractor {
    config: MfccConfig,
    sample_rate_hz: u32,
    window: Vec<f64>,
    filterbank: MelFilterbank,
    dct_rows: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor")
            .field("config", &self.config)
            .field("sample_rate_hz", &self.sample_rate_hz)
            .finish_non_exhaustive()
    }
}

impl MfccExtractor {
    pub fn new(config: &MfccConfig, sample_rate_hz: u32) -> Result<Self> {
        config.validate()?;
        let filterbank = mel_filterbank(config.num_filters, config.frame_len, sample_rate_hz)?;
        let dct_rows = (config.coeff_lo - 1..config.coeff_hi)
            .map(|k| dct_basis_row(k, config.num_filters))
            .collect();
        Ok(Self {
            config: config.clone(),
            sample_rate_hz,
            window: hamming_window(config.frame_len),
            filterbank,
            dct_rows,
            fft: FftPlanner::new().plan_fft_forward(config.frame_len),
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Kept cepstral coefficients of one frame (before normalization).
    pub fn frame_cepstrum(&self, frame: &[f64]) -> Vec<f64> {
        let windowed: Vec<f64> = frame.iter().zip(&self.window).map(|(x, w)| x * w).collect();
        let psd = psd_with(self.fft.as_ref(), &windowed);
        let log_energies: Vec<f64> = self
            .filterbank
            .apply(&psd)
            .into_iter()
            .map(|e| e.max(self.config.log_floor).ln())
            .collect();
        self.dct_rows
            .iter()
            .map(|row| row.iter().zip(&log_energies).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Pre-emphasis (when enabled), framing and per-frame cepstra. The
    /// samples are used as given, without peak normalization.
    pub fn analyze(&self, samples: &[f64]) -> Result<FeatureMatrix> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("audio samples"));
        }
        let emphasized;
        let signal = if self.config.preemphasis_enabled {
            emphasized = pre_emphasize(samples, self.config.preemphasis_alpha);
            &emphasized[..]
        } else {
            samples
        };
        let mut values = Vec::new();
        for frame in frame_signal(signal, self.config.frame_len, self.config.overlap) {
            values.extend(self.frame_cepstrum(&frame));
        }
        FeatureMatrix::new(self.config.dim(), values)
    }

    /// Un-normalized cepstra of a peak-normalized clip.
    pub fn raw_cepstra(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        self.check_rate(clip)?;
        self.analyze(peak_normalize(clip).samples())
    }

    /// Full pipeline, ending in per-utterance normalization.
    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        normalize_features(&self.raw_cepstra(clip)?)
    }

    fn check_rate(&self, clip: &AudioClip) -> Result<()> {
        if clip.sample_rate_hz() != self.sample_rate_hz {
            return Err(Error::InvalidConfig(format!(
                "extractor built for {} Hz, clip is {} Hz",
                self.sample_rate_hz,
                clip.sample_rate_hz()
            )));
        }
        Ok(())
    }
}

/// Runs the full MFCC pipeline on one clip.
pub fn extract_mfcc(clip: &AudioClip, config: &MfccConfig) -> Result<FeatureMatrix> {
    if clip.is_empty() {
        return Err(Error::EmptyInput("audio clip"));
    }
    MfccExtractor::new(config, clip.sample_rate_hz())?.extract(clip)
}
