//! Python bindings for `vqspk`.
//!
//! Feature vectors and codewords cross the boundary as lists of float lists.
//! Errors surface as `ValueError`, or `OSError` for file problems.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use vqspk::signal::default_profiles as core_default_profiles;
use vqspk::{
    avg_distortion, quantize, Codebook, Error, LbgConfig, MfccConfig, NotchSpec, SpeakerDb,
    SpeakerProfile,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for vqspk::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Mono audio in [-1, 1] with its sample rate.
#[pyclass(name = "AudioClip", module = "vqspk", skip_from_py_object, frozen)]
#[derive(Clone)]
pub struct PyAudioClip {
    inner: vqspk::AudioClip,
}

#[pymethods]
impl PyAudioClip {
    #[new]
    fn new(samples: Vec<f64>, sample_rate_hz: u32) -> PyResult<Self> {
        Ok(Self {
            inner: vqspk::AudioClip::new(samples, sample_rate_hz).py()?,
        })
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    #[getter]
    fn sample_rate_hz(&self) -> u32 {
        self.inner.sample_rate_hz()
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.duration_s()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn scaled(&self, gain: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.scaled(gain).py()?,
        })
    }

    fn peak_normalized(&self) -> Self {
        Self {
            inner: vqspk::peak_normalize(&self.inner),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "AudioClip({} samples, {} Hz)",
            self.inner.len(),
            self.inner.sample_rate_hz()
        )
    }
}

#[pyfunction]
fn read_wav(path: std::path::PathBuf) -> PyResult<PyAudioClip> {
    Ok(PyAudioClip {
        inner: vqspk::read_wav(path).py()?,
    })
}

#[pyfunction]
fn write_wav(clip: PyRef<'_, PyAudioClip>, path: std::path::PathBuf) -> PyResult<()> {
    vqspk::write_wav(&clip.inner, path).py()
}

#[pyclass(
    name = "MfccConfig",
    module = "vqspk",
    skip_from_py_object,
    get_all,
    set_all
)]
#[derive(Clone)]
pub struct PyMfccConfig {
    frame_len: usize,
    overlap: usize,
    preemphasis_alpha: f64,
    preemphasis_enabled: bool,
    num_filters: usize,
    coeff_lo: usize,
    coeff_hi: usize,
    log_floor: f64,
}

impl From<&MfccConfig> for PyMfccConfig {
    fn from(c: &MfccConfig) -> Self {
        Self {
            frame_len: c.frame_len,
            overlap: c.overlap,
            preemphasis_alpha: c.preemphasis_alpha,
            preemphasis_enabled: c.preemphasis_enabled,
            num_filters: c.num_filters,
            coeff_lo: c.coeff_lo,
            coeff_hi: c.coeff_hi,
            log_floor: c.log_floor,
        }
    }
}

impl PyMfccConfig {
    fn to_core(&self) -> PyResult<MfccConfig> {
        let c = MfccConfig {
            frame_len: self.frame_len,
            overlap: self.overlap,
            preemphasis_alpha: self.preemphasis_alpha,
            preemphasis_enabled: self.preemphasis_enabled,
            num_filters: self.num_filters,
            coeff_lo: self.coeff_lo,
            coeff_hi: self.coeff_hi,
            log_floor: self.log_floor,
        };
        c.validate().py()?;
        Ok(c)
    }
}

#[pymethods]
impl PyMfccConfig {
    #[new]
    #[pyo3(signature = (
        frame_len = 256, overlap = 100, preemphasis_alpha = 0.99, preemphasis_enabled = true,
        num_filters = 26, coeff_lo = 2, coeff_hi = 13, log_floor = 1e-10
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        frame_len: usize,
        overlap: usize,
        preemphasis_alpha: f64,
        preemphasis_enabled: bool,
        num_filters: usize,
        coeff_lo: usize,
        coeff_hi: usize,
        log_floor: f64,
    ) -> PyResult<Self> {
        let c = Self {
            frame_len,
            overlap,
            preemphasis_alpha,
            preemphasis_enabled,
            num_filters,
            coeff_lo,
            coeff_hi,
            log_floor,
        };
        c.to_core()?;
        Ok(c)
    }

    fn __repr__(&self) -> String {
        format!(
            "MfccConfig(frame_len={}, overlap={}, preemphasis_alpha={}, preemphasis_enabled={}, \
             num_filters={}, coeff_lo={}, coeff_hi={}, log_floor={})",
            self.frame_len,
            self.overlap,
            self.preemphasis_alpha,
            if self.preemphasis_enabled {
                "True"
            } else {
                "False"
            },
            self.num_filters,
            self.coeff_lo,
            self.coeff_hi,
            self.log_floor
        )
    }
}

fn mfcc_or_default(config: Option<PyRef<'_, PyMfccConfig>>) -> PyResult<MfccConfig> {
    config.map_or_else(|| Ok(MfccConfig::default()), |c| c.to_core())
}

#[pyclass(
    name = "LbgConfig",
    module = "vqspk",
    skip_from_py_object,
    get_all,
    set_all
)]
#[derive(Clone)]
pub struct PyLbgConfig {
    target_size: usize,
    epsilon: f64,
    rel_distortion_tol: f64,
    max_lloyd_iters: usize,
}

impl PyLbgConfig {
    fn to_core(&self) -> PyResult<LbgConfig> {
        let c = LbgConfig {
            target_size: self.target_size,
            epsilon: self.epsilon,
            rel_distortion_tol: self.rel_distortion_tol,
            max_lloyd_iters: self.max_lloyd_iters,
        };
        c.validate().py()?;
        Ok(c)
    }
}

#[pymethods]
impl PyLbgConfig {
    #[new]
    #[pyo3(signature = (target_size = 8, epsilon = 0.01, rel_distortion_tol = 1e-3, max_lloyd_iters = 100))]
    fn new(
        target_size: usize,
        epsilon: f64,
        rel_distortion_tol: f64,
        max_lloyd_iters: usize,
    ) -> PyResult<Self> {
        let c = Self {
            target_size,
            epsilon,
            rel_distortion_tol,
            max_lloyd_iters,
        };
        c.to_core()?;
        Ok(c)
    }
}

fn lbg_or_default(config: Option<PyRef<'_, PyLbgConfig>>) -> PyResult<LbgConfig> {
    config.map_or_else(|| Ok(LbgConfig::default()), |c| c.to_core())
}

/// Normalized MFCC frames of a clip, one list per frame.
#[pyfunction]
#[pyo3(signature = (clip, config = None))]
fn extract_mfcc(
    clip: PyRef<'_, PyAudioClip>,
    config: Option<PyRef<'_, PyMfccConfig>>,
) -> PyResult<Vec<Vec<f64>>> {
    let cfg = mfcc_or_default(config)?;
    let features = vqspk::extract_mfcc(&clip.inner, &cfg).py()?;
    Ok(features.iter_rows().map(<[f64]>::to_vec).collect())
}

#[pyclass(name = "Codebook", module = "vqspk", skip_from_py_object, frozen)]
#[derive(Clone)]
pub struct PyCodebook {
    inner: Codebook,
}

#[pymethods]
impl PyCodebook {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: Codebook::from_rows(&rows).py()?,
        })
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    /// `(index, distance)` of the nearest codeword.
    fn quantize(&self, vector: Vec<f64>) -> PyResult<(usize, f64)> {
        quantize(&vector, &self.inner).py()
    }

    /// Mean Euclidean distance from each vector to its nearest codeword.
    fn avg_distortion(&self, vectors: Vec<Vec<f64>>) -> PyResult<f64> {
        avg_distortion(&vectors, &self.inner).py()
    }

    fn __repr__(&self) -> String {
        format!(
            "Codebook(size={}, dim={})",
            self.inner.size(),
            self.inner.dim()
        )
    }
}

/// Trains a codebook. Returns it with the training history as
/// `(stage, size, iteration, distortion)` tuples.
#[pyfunction]
#[pyo3(signature = (vectors, config = None))]
#[allow(clippy::type_complexity)]
fn train_codebook(
    vectors: Vec<Vec<f64>>,
    config: Option<PyRef<'_, PyLbgConfig>>,
) -> PyResult<(PyCodebook, Vec<(usize, usize, usize, f64)>)> {
    let cfg = lbg_or_default(config)?;
    let (cb, trace) = vqspk::train_codebook(&vectors, &cfg).py()?;
    let history = trace
        .records
        .iter()
        .map(|r| (r.stage, r.size, r.iter, r.distortion))
        .collect();
    Ok((PyCodebook { inner: cb }, history))
}

#[pyclass(name = "MatchResult", module = "vqspk", frozen, get_all)]
pub struct PyMatchResult {
    predicted: String,
    /// `(speaker_id, distance)` pairs in database order.
    distances: Vec<(String, f64)>,
}

#[pymethods]
impl PyMatchResult {
    fn __repr__(&self) -> String {
        format!("MatchResult(predicted={:?})", self.predicted)
    }
}

/// Enrolled speaker codebooks plus the settings used to build them.
#[pyclass(name = "SpeakerDb", module = "vqspk")]
pub struct PySpeakerDb {
    inner: SpeakerDb,
}

#[pymethods]
impl PySpeakerDb {
    #[new]
    #[pyo3(signature = (mfcc = None, lbg = None))]
    fn new(
        mfcc: Option<PyRef<'_, PyMfccConfig>>,
        lbg: Option<PyRef<'_, PyLbgConfig>>,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: SpeakerDb::new(mfcc_or_default(mfcc)?, lbg_or_default(lbg)?).py()?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: vqspk::load_db(path).py()?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        vqspk::save_db(&self.inner, path).py()
    }

    fn to_text(&self) -> PyResult<String> {
        self.inner.to_text().py()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids().into_iter().map(String::from).collect()
    }

    #[getter]
    fn mfcc_config(&self) -> PyMfccConfig {
        self.inner.mfcc_config().into()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn codebook(&self, id: &str) -> PyResult<PyCodebook> {
        self.inner
            .speakers()
            .iter()
            .find(|m| m.id == id)
            .map(|m| PyCodebook {
                inner: m.codebook.clone(),
            })
            .ok_or_else(|| PyValueError::new_err(format!("unknown speaker {id:?}")))
    }

    /// Trains a codebook from the pooled frames of `clips` and adds it.
    fn enroll(
        &mut self,
        py: Python<'_>,
        id: &str,
        clips: Vec<PyRef<'_, PyAudioClip>>,
    ) -> PyResult<()> {
        let clips: Vec<vqspk::AudioClip> = clips.iter().map(|c| c.inner.clone()).collect();
        let db = self.inner.clone();
        self.inner = py.detach(|| db.enroll(id, &clips)).py()?;
        Ok(())
    }

    fn identify(&self, py: Python<'_>, clip: PyRef<'_, PyAudioClip>) -> PyResult<PyMatchResult> {
        let clip = clip.inner.clone();
        let r = py.detach(|| self.inner.identify(&clip)).py()?;
        Ok(PyMatchResult {
            predicted: r.predicted,
            distances: r.distances,
        })
    }
}

/// Removes a band of `width_factor * fs / 2` Hz centred on `center_hz`.
#[pyfunction]
#[pyo3(signature = (clip, width_factor, center_hz = 1000.0, transition_hz = 50.0))]
fn notch_filter(
    clip: PyRef<'_, PyAudioClip>,
    width_factor: f64,
    center_hz: f64,
    transition_hz: f64,
) -> PyResult<PyAudioClip> {
    let spec = NotchSpec::new(center_hz, width_factor, transition_hz).py()?;
    Ok(PyAudioClip {
        inner: vqspk::notch_filter(&clip.inner, &spec).py()?,
    })
}

#[pyclass(
    name = "SpeakerProfile",
    module = "vqspk",
    skip_from_py_object,
    get_all,
    set_all
)]
#[derive(Clone)]
pub struct PySpeakerProfile {
    /// `(frequency_hz, relative_amplitude)` pairs.
    formants: Vec<(f64, f64)>,
    jitter_seed: u64,
    noise_snr_db: f64,
}

impl PySpeakerProfile {
    fn to_core(&self) -> SpeakerProfile {
        SpeakerProfile {
            formants: self.formants.clone(),
            jitter_seed: self.jitter_seed,
            noise_snr_db: self.noise_snr_db,
        }
    }
}

#[pymethods]
impl PySpeakerProfile {
    #[new]
    #[pyo3(signature = (formants, jitter_seed, noise_snr_db = 25.0))]
    fn new(formants: Vec<(f64, f64)>, jitter_seed: u64, noise_snr_db: f64) -> Self {
        Self {
            formants,
            jitter_seed,
            noise_snr_db,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "SpeakerProfile(formants={:?}, jitter_seed={}, noise_snr_db={})",
            self.formants, self.jitter_seed, self.noise_snr_db
        )
    }
}

#[pyfunction]
fn default_profiles(count: usize) -> Vec<PySpeakerProfile> {
    core_default_profiles(count)
        .into_iter()
        .map(|p| PySpeakerProfile {
            formants: p.formants,
            jitter_seed: p.jitter_seed,
            noise_snr_db: p.noise_snr_db,
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (profile, duration_s, sample_rate_hz = 16000, utterance_seed = 0))]
fn synth_speaker_clip(
    profile: PyRef<'_, PySpeakerProfile>,
    duration_s: f64,
    sample_rate_hz: u32,
    utterance_seed: u64,
) -> PyResult<PyAudioClip> {
    Ok(PyAudioClip {
        inner: vqspk::synth_speaker_clip(
            &profile.to_core(),
            duration_s,
            sample_rate_hz,
            utterance_seed,
        )
        .py()?,
    })
}

#[pymodule]
#[pyo3(name = "vqspk")]
fn vqspk_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAudioClip>()?;
    m.add_class::<PyMfccConfig>()?;
    m.add_class::<PyLbgConfig>()?;
    m.add_class::<PyCodebook>()?;
    m.add_class::<PyMatchResult>()?;
    m.add_class::<PySpeakerDb>()?;
    m.add_class::<PySpeakerProfile>()?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(extract_mfcc, m)?)?;
    m.add_function(wrap_pyfunction!(train_codebook, m)?)?;
    m.add_function(wrap_pyfunction!(notch_filter, m)?)?;
    m.add_function(wrap_pyfunction!(default_profiles, m)?)?;
    m.add_function(wrap_pyfunction!(synth_speaker_clip, m)?)?;
    Ok(())
}
