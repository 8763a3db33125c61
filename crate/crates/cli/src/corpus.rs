//! Reading and writing clip directories.
//!
//! A directory holds either `<id>.wav` files, one clip per speaker, or
//! `<id>/` subdirectories with any number of `.wav` clips, or a mix.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vqspk::signal::default_profiles;
use vqspk::{read_wav, synth_speaker_clip, write_wav, AudioClip, Error};

fn is_wav(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Orders names so that digit runs compare by value: `s2` before `s10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a, b);
    loop {
        let (Some(ca), Some(cb)) = (a.chars().next(), b.chars().next()) else {
            return a.len().cmp(&b.len());
        };
        if ca.is_ascii_digit() && cb.is_ascii_digit() {
            let na = a.len() - a.trim_start_matches(|c: char| c.is_ascii_digit()).len();
            let nb = b.len() - b.trim_start_matches(|c: char| c.is_ascii_digit()).len();
            let (da, db) = (
                a[..na].trim_start_matches('0'),
                b[..nb].trim_start_matches('0'),
            );
            let ord = da
                .len()
                .cmp(&db.len())
                .then_with(|| da.cmp(db))
                .then_with(|| na.cmp(&nb));
            if ord != Ordering::Equal {
                return ord;
            }
            (a, b) = (&a[na..], &b[nb..]);
        } else {
            if ca != cb {
                return ca.cmp(&cb);
            }
            (a, b) = (&a[ca.len_utf8()..], &b[cb.len_utf8()..]);
        }
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort_by(|a, b| natural_cmp(&file_name(a), &file_name(b)));
    Ok(entries)
}

/// Clip paths grouped by speaker id, ids in natural order.
pub fn scan(dir: &Path) -> Result<Vec<(String, Vec<PathBuf>)>> {
    let mut found: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for path in sorted_entries(dir)? {
        let (id, clips) = if is_wav(&path) {
            (stem(&path), vec![path])
        } else if path.is_dir() {
            let clips: Vec<PathBuf> = sorted_entries(&path)?
                .into_iter()
                .filter(|p| is_wav(p))
                .collect();
            if clips.is_empty() {
                continue;
            }
            (file_name(&path), clips)
        } else {
            continue;
        };
        if found.insert(id.clone(), clips).is_some() {
            return Err(Error::DuplicateId(id)).with_context(|| format!("in {}", dir.display()));
        }
    }
    if found.is_empty() {
        bail!("no wav files found in {}", dir.display());
    }
    let mut speakers: Vec<(String, Vec<PathBuf>)> = found.into_iter().collect();
    speakers.sort_by(|a, b| natural_cmp(&a.0, &b.0));
    Ok(speakers)
}

fn read(path: &Path) -> Result<AudioClip> {
    read_wav(path).with_context(|| format!("reading {}", path.display()))
}

/// Loads clips grouped by speaker, for enrollment.
pub fn load_speakers(dir: &Path) -> Result<Vec<(String, Vec<AudioClip>)>> {
    scan(dir)?
        .into_iter()
        .map(|(id, paths)| {
            let clips = paths.iter().map(|p| read(p)).collect::<Result<Vec<_>>>()?;
            Ok((id, clips))
        })
        .collect()
}

/// Loads every clip with its speaker label, for evaluation.
pub fn load_labeled(dir: &Path) -> Result<Vec<(String, AudioClip)>> {
    let mut out = Vec::new();
    for (id, paths) in scan(dir)? {
        for p in paths {
            out.push((id.clone(), read(&p)?));
        }
    }
    Ok(out)
}

/// `<dir>-test`, next to `dir`.
pub fn test_dir_for(dir: &Path) -> PathBuf {
    let mut name = dir
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push("-test");
    dir.with_file_name(name)
}

pub struct CorpusSpec {
    pub speakers: usize,
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub snr_db: f64,
    pub train_seed: u64,
    pub test_seed: u64,
}

/// Writes `s<k>.wav` training clips to `dir` and held-out clips to
/// `<dir>-test`. Returns the two directories.
pub fn generate(dir: &Path, spec: &CorpusSpec) -> Result<(PathBuf, PathBuf)> {
    let test_dir = test_dir_for(dir);
    for d in [dir, &test_dir] {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    for (k, mut profile) in default_profiles(spec.speakers).into_iter().enumerate() {
        profile.noise_snr_db = spec.snr_db;
        let name = format!("s{}.wav", k + 1);
        for (d, seed) in [(dir, spec.train_seed), (&test_dir, spec.test_seed)] {
            let clip = synth_speaker_clip(&profile, spec.duration_s, spec.sample_rate_hz, seed)?;
            let path = d.join(&name);
            write_wav(&clip, &path).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok((dir.to_path_buf(), test_dir))
}
