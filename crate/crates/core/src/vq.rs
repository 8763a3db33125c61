//! Linde-Buzo-Gray vector quantization.
//!
//! Training starts from the global centroid and repeatedly doubles the
//! codebook by splitting every codeword `c` into `c(1+eps)` and `c(1-eps)`,
//! refining each doubled codebook with Lloyd iterations (nearest-codeword
//! assignment followed by centroid update).

use std::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LbgConfig {
    /// Final codebook size; a power of two.
    pub target_size: usize,
    /// Splitting perturbation.
    pub epsilon: f64,
    /// Lloyd iterations stop once the relative drop in mean squared
    /// distortion falls below this value.
    pub rel_distortion_tol: f64,
    pub max_lloyd_iters: usize,
}

impl Default for LbgConfig {
    fn default() -> Self {
        Self {
            target_size: 8,
            epsilon: 0.01,
            rel_distortion_tol: 1e-3,
            max_lloyd_iters: 100,
        }
    }
}

impl LbgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !self.target_size.is_power_of_two() {
            return bad(format!(
                "codebook size {} must be a power of two",
                self.target_size
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} must lie in (0, 1)", self.epsilon));
        }
        if self.rel_distortion_tol.is_nan() || self.rel_distortion_tol <= 0.0 {
            return bad(format!(
                "relative distortion tolerance {} must be positive",
                self.rel_distortion_tol
            ));
        }
        if self.max_lloyd_iters == 0 {
            return bad("max Lloyd iterations must be at least 1".into());
        }
        Ok(())
    }
}

/// `size x dim` codeword matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    codewords: Vec<f64>,
}

impl Codebook {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = check_vectors(rows)?;
        let codewords: Vec<f64> = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        if codewords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("codewords must be finite".into()));
        }
        Ok(Self { dim, codewords })
    }

    pub fn size(&self) -> usize {
        self.codewords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codeword(&self, i: usize) -> &[f64] {
        &self.codewords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.codewords.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Nearest codeword by squared Euclidean distance; ties go to the lowest
    /// index.
    fn nearest_sq(&self, v: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.iter().enumerate() {
            let d = sq_dist(v, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    fn set(&mut self, i: usize, v: &[f64]) {
        self.codewords[i * self.dim..(i + 1) * self.dim].copy_from_slice(v);
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_vectors<R: AsRef<[f64]>>(vectors: &[R]) -> Result<usize> {
    let dim = vectors
        .first()
        .map(|v| v.as_ref().len())
        .ok_or(Error::EmptyInput("training vectors"))?;
    if dim == 0 {
        return Err(Error::EmptyInput("vector components"));
    }
    for v in vectors {
        let len = v.as_ref().len();
        if len != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: len,
            });
        }
    }
    Ok(dim)
}

/// Index of the nearest codeword and its Euclidean distance.
pub fn quantize(v: &[f64], cb: &Codebook) -> Result<(usize, f64)> {
    if v.len() != cb.dim {
        return Err(Error::DimensionMismatch {
            expected: cb.dim,
            got: v.len(),
        });
    }
    let (i, d) = cb.nearest_sq(v);
    Ok((i, d.sqrt()))
}

/// Mean Euclidean (not squared) distance from each vector to its nearest
/// codeword.
pub fn avg_distortion<R: AsRef<[f64]>>(vectors: &[R], cb: &Codebook) -> Result<f64> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput("vectors"));
    }
    let mut total = 0.0;
    for v in vectors {
        total += quantize(v.as_ref(), cb)?.1;
    }
    Ok(total / vectors.len() as f64)
}

/// One recorded Lloyd iteration. Iteration 0 is the codebook a stage
/// starts from, after any empty-cluster repair.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydStep {
    pub iter: usize,
    /// Mean squared Euclidean distance to the nearest codeword.
    pub distortion: f64,
    pub codebook: Codebook,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub stage: usize,
    pub size: usize,
    pub iter: usize,
    pub distortion: f64,
    pub codebook: Codebook,
}

/// History of codebook evolution during training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LbgTrace {
    pub records: Vec<TraceRecord>,
}

impl LbgTrace {
    /// Distinct codebook sizes in the order they were visited.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = Vec::new();
        for r in &self.records {
            if sizes.last() != Some(&r.size) {
                sizes.push(r.size);
            }
        }
        sizes
    }

    pub fn stages(&self) -> usize {
        self.records.last().map_or(0, |r| r.stage + 1)
    }

    pub fn stage_records(&self, stage: usize) -> impl Iterator<Item = &TraceRecord> + '_ {
        self.records.iter().filter(move |r| r.stage == stage)
    }

    /// Distortion of the final codebook.
    pub fn final_distortion(&self) -> Option<f64> {
        self.records.last().map(|r| r.distortion)
    }

    /// CSV with header `stage,size,iter,distortion`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,size,iter,distortion\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{:.12e}\n",
                r.stage, r.size, r.iter, r.distortion
            ));
        }
        out
    }

    /// Final codebook of `stage` as CSV rows `stage,codeword_index,c1..cD`.
    pub fn snapshot_csv(&self, stage: usize) -> Option<String> {
        let last = self.stage_records(stage).last()?;
        let cb = &last.codebook;
        let mut out = String::from("stage,codeword_index");
        for d in 1..=cb.dim() {
            out.push_str(&format!(",c{d}"));
        }
        out.push('\n');
        for (i, c) in cb.iter().enumerate() {
            out.push_str(&format!("{stage},{i}"));
            for v in c {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push('\n');
        }
        Some(out)
    }
}

fn centroid<R: AsRef<[f64]>>(vectors: &[R], dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    for v in vectors {
        for (s, x) in sum.iter_mut().zip(v.as_ref()) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    sum
}

fn count_distinct<R: AsRef<[f64]>>(vectors: &[R]) -> usize {
    let mut keys: Vec<Vec<u64>> = vectors
        .iter()
        .map(|v| v.as_ref().iter().map(|x| (x + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Splits codewords into `c(1+eps)` and `c(1-eps)` pairs, in place of the
/// original. Only codewords with `split[i]` set are split. A codeword at the
/// origin splits into the origin and the origin shifted by `eps` on every
/// coordinate.
pub fn split_codebook(cb: &Codebook, epsilon: f64, split: &[bool]) -> Codebook {
    let mut codewords = Vec::with_capacity(cb.codewords.len() * 2);
    for (c, &do_split) in cb.iter().zip(split) {
        if !do_split {
            codewords.extend_from_slice(c);
            continue;
        }
        let plus: Vec<f64> = c.iter().map(|x| x * (1.0 + epsilon)).collect();
        let mut minus: Vec<f64> = c.iter().map(|x| x * (1.0 - epsilon)).collect();
        if plus == minus {
            minus.iter_mut().for_each(|x| *x += epsilon);
        }
        codewords.extend(plus);
        codewords.extend(minus);
    }
    Codebook {
        dim: cb.dim,
        codewords,
    }
}

struct Assignment {
    labels: Vec<usize>,
    sq_dists: Vec<f64>,
}

impl Assignment {
    fn compute<R: AsRef<[f64]>>(vectors: &[R], cb: &Codebook) -> Self {
        let (labels, sq_dists) = vectors.iter().map(|v| cb.nearest_sq(v.as_ref())).unzip();
        Self { labels, sq_dists }
    }

    fn mean_sq(&self) -> f64 {
        self.sq_dists.iter().sum::<f64>() / self.sq_dists.len() as f64
    }

    fn empty_clusters(&self, size: usize) -> Vec<usize> {
        let mut counts = vec![0usize; size];
        for &l in &self.labels {
            counts[l] += 1;
        }
        (0..size).filter(|&j| counts[j] == 0).collect()
    }
}

/// Moves every codeword without members onto the training vector that is
/// currently worst quantized, then reassigns. Returns whether anything moved.
fn repair_empty<R: AsRef<[f64]>>(
    vectors: &[R],
    cb: &mut Codebook,
    assignment: &mut Assignment,
) -> bool {
    let mut repaired = false;
    for _ in 0..cb.size() {
        let empty = assignment.empty_clusters(cb.size());
        if empty.is_empty() {
            break;
        }
        let mut dists = assignment.sq_dists.clone();
        for j in empty {
            let worst = dists
                .iter()
                .enumerate()
                .fold(0, |best, (i, &d)| if d > dists[best] { i } else { best });
            cb.set(j, vectors[worst].as_ref());
            dists[worst] = -1.0;
        }
        *assignment = Assignment::compute(vectors, cb);
        repaired = true;
    }
    repaired
}

/// Lloyd refinement starting from `init`. Stops when assignments no longer
/// change, the distortion reaches zero, the relative distortion drop falls
/// below `rel_distortion_tol`, or after `max_lloyd_iters` updates.
pub fn lloyd<R: AsRef<[f64]>>(
    vectors: &[R],
    init: Codebook,
    config: &LbgConfig,
) -> Result<(Codebook, Vec<LloydStep>)> {
    let dim = check_vectors(vectors)?;
    if dim != init.dim {
        return Err(Error::DimensionMismatch {
            expected: init.dim,
            got: dim,
        });
    }
    let size = init.size();
    let mut cb = init;
    let mut assignment = Assignment::compute(vectors, &cb);
    repair_empty(vectors, &mut cb, &mut assignment);
    let mut distortion = assignment.mean_sq();
    let mut steps = vec![LloydStep {
        iter: 0,
        distortion,
        codebook: cb.clone(),
    }];

    for iter in 1..=config.max_lloyd_iters {
        if distortion == 0.0 {
            break;
        }
        let mut sums = vec![0.0; size * dim];
        let mut counts = vec![0usize; size];
        for (v, &l) in vectors.iter().zip(&assignment.labels) {
            counts[l] += 1;
            for (s, x) in sums[l * dim..(l + 1) * dim].iter_mut().zip(v.as_ref()) {
                *s += x;
            }
        }
        for (j, &n) in counts.iter().enumerate() {
            let n = n as f64;
            let mean: Vec<f64> = sums[j * dim..(j + 1) * dim].iter().map(|s| s / n).collect();
            cb.set(j, &mean);
        }

        let mut next = Assignment::compute(vectors, &cb);
        let repaired = repair_empty(vectors, &mut cb, &mut next);
        let next_distortion = next.mean_sq();
        steps.push(LloydStep {
            iter,
            distortion: next_distortion,
            codebook: cb.clone(),
        });
        let stable = !repaired && next.labels == assignment.labels;
        let rel_drop = (distortion - next_distortion) / distortion;
        assignment = next;
        distortion = next_distortion;
        if stable || rel_drop < config.rel_distortion_tol {
            break;
        }
    }
    Ok((cb, steps))
}

/// Trains a codebook of `config.target_size` codewords, or as many as there
/// are distinct training vectors when that is fewer.
pub fn train_codebook<R: AsRef<[f64]>>(
    vectors: &[R],
    config: &LbgConfig,
) -> Result<(Codebook, LbgTrace)> {
    config.validate()?;
    let dim = check_vectors(vectors)?;
    if vectors
        .iter()
        .flat_map(|v| v.as_ref())
        .any(|x| !x.is_finite())
    {
        return Err(Error::InvalidConfig(
            "training vectors must be finite".into(),
        ));
    }
    let limit = config.target_size.min(count_distinct(vectors));

    let mut cb = Codebook {
        dim,
        codewords: centroid(vectors, dim),
    };
    let mut trace = LbgTrace::default();
    trace.records.push(TraceRecord {
        stage: 0,
        size: 1,
        iter: 0,
        distortion: Assignment::compute(vectors, &cb).mean_sq(),
        codebook: cb.clone(),
    });

    let mut stage = 0;
    while cb.size() < limit {
        stage += 1;
        let split = choose_splits(vectors, &cb, limit - cb.size());
        let (refined, steps) = lloyd(vectors, split_codebook(&cb, config.epsilon, &split), config)?;
        cb = refined;
        trace.records.extend(steps.into_iter().map(|s| TraceRecord {
            stage,
            size: cb.size(),
            iter: s.iter,
            distortion: s.distortion,
            codebook: s.codebook,
        }));
    }
    Ok((cb, trace))
}

/// Marks which codewords to split. All of them while doubling fits;
/// otherwise the `budget` clusters with the largest total squared error.
fn choose_splits<R: AsRef<[f64]>>(vectors: &[R], cb: &Codebook, budget: usize) -> Vec<bool> {
    let size = cb.size();
    if budget >= size {
        return vec![true; size];
    }
    let assignment = Assignment::compute(vectors, cb);
    let mut err = vec![0.0; size];
    for (&l, &d) in assignment.labels.iter().zip(&assignment.sq_dists) {
        err[l] += d;
    }
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| err[b].partial_cmp(&err[a]).unwrap_or(Ordering::Equal));
    let mut split = vec![false; size];
    for &j in order.iter().take(budget) {
        split[j] = true;
    }
    split
}
