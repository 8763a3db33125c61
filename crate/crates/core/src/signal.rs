//! Frequency-domain notch filtering and deterministic synthetic speakers.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Band-stop centred on `center_hz`. The full stop width is
/// `width_factor * fs / 2`, flanked by raised-cosine ramps of
/// `transition_hz` on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct NotchSpec {
    pub center_hz: f64,
    pub width_factor: f64,
    pub transition_hz: f64,
}

impl Default for NotchSpec {
    fn default() -> Self {
        Self {
            center_hz: 1000.0,
            width_factor: 0.0,
            transition_hz: 50.0,
        }
    }
}

impl NotchSpec {
    pub fn new(center_hz: f64, width_factor: f64, transition_hz: f64) -> Result<Self> {
        let spec = Self {
            center_hz,
            width_factor,
            transition_hz,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_hz > 0.0 && self.center_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "notch center {} Hz must be positive",
                self.center_hz
            )));
        }
        if !(0.0..1.0).contains(&self.width_factor) {
            return Err(Error::InvalidConfig(format!(
                "notch width factor {} must lie in [0, 1)",
                self.width_factor
            )));
        }
        if !(self.transition_hz > 0.0 && self.transition_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "notch transition {} Hz must be positive",
                self.transition_hz
            )));
        }
        Ok(())
    }

    /// Half of the stop band, in Hz.
    pub fn half_width_hz(&self, sample_rate_hz: u32) -> f64 {
        self.width_factor * sample_rate_hz as f64 / 4.0
    }

    /// Amplitude response at `freq_hz`.
    pub fn gain(&self, freq_hz: f64, sample_rate_hz: u32) -> f64 {
        let half = self.half_width_hz(sample_rate_hz);
        if half == 0.0 {
            return 1.0;
        }
        let d = (freq_hz - self.center_hz).abs();
        if d <= half {
            0.0
        } else if d < half + self.transition_hz {
            0.5 * (1.0 - (PI * (d - half) / self.transition_hz).cos())
        } else {
            1.0
        }
    }
}

/// Applies the notch mask to the full-length spectrum of `samples`. Linear
/// in its input; never adds energy.
pub fn notch_filter_samples(samples: &[f64], sample_rate_hz: u32, spec: &NotchSpec) -> Vec<f64> {
    let n = samples.len();
    if n == 0 || spec.half_width_hz(sample_rate_hz) == 0.0 {
        return samples.to_vec();
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let fs = sample_rate_hz as f64;
    for (k, c) in buf.iter_mut().enumerate() {
        // Bins above n/2 mirror the negative frequencies.
        let bin = k.min(n - k);
        *c *= spec.gain(bin as f64 * fs / n as f64, sample_rate_hz);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Notch-filters a clip. If removing the band pushes the peak above 1 the
/// output is rescaled to unit peak.
pub fn notch_filter(clip: &AudioClip, spec: &NotchSpec) -> Result<AudioClip> {
    spec.validate()?;
    let nyquist = clip.sample_rate_hz() as f64 / 2.0;
    if spec.center_hz > nyquist {
        return Err(Error::InvalidConfig(format!(
            "notch center {} Hz is above Nyquist ({nyquist} Hz)",
            spec.center_hz
        )));
    }
    let mut out = notch_filter_samples(clip.samples(), clip.sample_rate_hz(), spec);
    let peak = out.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 1.0 {
        out.iter_mut().for_each(|s| *s /= peak);
    }
    AudioClip::new(out, clip.sample_rate_hz())
}

/// Parameters of one synthetic voice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerProfile {
    /// `(frequency_hz, relative_amplitude)` pairs.
    pub formants: Vec<(f64, f64)>,
    pub jitter_seed: u64,
    /// Signal-to-noise ratio of the added white noise; `f64::INFINITY`
    /// disables noise.
    pub noise_snr_db: f64,
}

impl SpeakerProfile {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        if self.formants.is_empty() {
            return Err(Error::InvalidConfig("profile needs formants".into()));
        }
        for (i, &(f, a)) in self.formants.iter().enumerate() {
            if !(f > 0.0 && f * 1.02 < nyquist) {
                return Err(Error::InvalidConfig(format!(
                    "formant {f} Hz must lie in (0, {nyquist}) Hz with jitter headroom"
                )));
            }
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "formant amplitude {a} must be positive"
                )));
            }
            if self.formants[..i].iter().any(|&(g, _)| g == f) {
                return Err(Error::InvalidConfig(format!("formant {f} Hz repeats")));
            }
        }
        if self.noise_snr_db.is_nan() || self.noise_snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidConfig("noise SNR must be a number".into()));
        }
        Ok(())
    }
}

const JITTER: f64 = 0.02;

/// Renders one utterance of a synthetic speaker: each formant is a
/// sinusoid with seeded +/-2% frequency jitter and its own slow amplitude
/// modulation, the sum is shaped by an onset/offset envelope, white
/// Gaussian noise is added at the profile's SNR, and the result is
/// peak-normalized. Identical arguments give bit-identical clips.
/// Relative depth of a formant envelope at its quietest point.
const FLOOR_DEPTH: f64 = 0.1;

pub fn synth_speaker_clip(
    profile: &SpeakerProfile,
    duration_s: f64,
    sample_rate_hz: u32,
    utterance_seed: u64,
) -> Result<AudioClip> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "duration {duration_s} s must be positive"
        )));
    }
    if sample_rate_hz == 0 {
        return Err(Error::InvalidConfig("sample rate must be positive".into()));
    }
    profile.validate(sample_rate_hz)?;

    // Speaker traits: syllable rate and the phase of each formant's
    // amplitude envelope within a syllable. Fixed per profile, so every
    // utterance of a speaker shares one articulation pattern.
    let mut traits = ChaCha8Rng::seed_from_u64(profile.jitter_seed);
    let syllable_hz = traits.random_range(2.5..5.0);
    let envelope_phases: Vec<f64> = profile
        .formants
        .iter()
        .map(|_| traits.random_range(0.0..2.0 * PI))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(
        profile
            .jitter_seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(utterance_seed),
    );
    let fs = sample_rate_hz as f64;
    let n = ((duration_s * fs).round() as usize).max(1);
    let rate = syllable_hz * (1.0 + rng.random_range(-0.05..=0.05));
    let offset = rng.random_range(0.0..2.0 * PI);

    struct Partial {
        freq: f64,
        amp: f64,
        phase: f64,
        envelope_phase: f64,
    }
    let partials: Vec<Partial> = profile
        .formants
        .iter()
        .zip(&envelope_phases)
        .map(|(&(f, a), &ep)| Partial {
            freq: f * (1.0 + rng.random_range(-JITTER..=JITTER)),
            amp: a,
            phase: rng.random_range(0.0..2.0 * PI),
            envelope_phase: ep + offset,
        })
        .collect();

    let ramp = (0.05 * fs).max(1.0);
    let mut samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let edge = (i as f64 / ramp).min((n - 1 - i) as f64 / ramp).min(1.0);
            let onset = 0.5 - 0.5 * (PI * edge).cos();
            let voiced: f64 = partials
                .iter()
                .map(|p| {
                    let depth = 0.5 + 0.5 * (2.0 * PI * rate * t + p.envelope_phase).sin();
                    let gain = FLOOR_DEPTH + (1.0 - FLOOR_DEPTH) * depth;
                    p.amp * gain * (2.0 * PI * p.freq * t + p.phase).sin()
                })
                .sum();
            onset * voiced
        })
        .collect();

    if profile.noise_snr_db.is_finite() {
        let power = samples.iter().map(|s| s * s).sum::<f64>() / n as f64;
        let sigma = (power / 10f64.powf(profile.noise_snr_db / 10.0)).sqrt();
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| Error::InvalidConfig(format!("noise level: {e}")))?;
            for s in &mut samples {
                *s += normal.sample(&mut rng);
            }
        }
    }
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|s| *s /= peak);
    }
    AudioClip::new(samples, sample_rate_hz)
}

/// Deterministic default corpus profiles. The first eleven are the
/// standard set; later entries extend it without changing earlier ones.
pub fn default_profiles(count: usize) -> Vec<SpeakerProfile> {
    (0..count).map(default_profile).collect()
}

fn default_profile(k: usize) -> SpeakerProfile {
    // Formant triples drawn from a 150 Hz grid on [300, 3400] Hz with a
    // per-speaker stride so no two speakers share a triple.
    const TABLE: [[f64; 3]; 16] = [
        [300.0, 1500.0, 2400.0],
        [450.0, 1700.0, 3000.0],
        [350.0, 2000.0, 2700.0],
        [500.0, 1600.0, 3300.0],
        [320.0, 2250.0, 2850.0],
        [420.0, 1850.0, 2550.0],
        [380.0, 1500.0, 3150.0],
        [480.0, 2100.0, 2600.0],
        [340.0, 1750.0, 3350.0],
        [460.0, 2400.0, 3100.0],
        [400.0, 1550.0, 2250.0],
        [520.0, 1950.0, 2900.0],
        [310.0, 1650.0, 2150.0],
        [440.0, 2300.0, 3250.0],
        [360.0, 1800.0, 2450.0],
        [490.0, 2050.0, 3050.0],
    ];
    let triple = TABLE[k % TABLE.len()];
    let amps = [
        1.0,
        0.6 + 0.05 * (k % 5) as f64,
        0.35 + 0.04 * (k % 4) as f64,
    ];
    SpeakerProfile {
        formants: triple.iter().copied().zip(amps).collect(),
        jitter_seed: 1000 + k as u64,
        noise_snr_db: 25.0,
    }
}
