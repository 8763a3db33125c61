//! Straightforward LBG written without reference to the library internals.
//! Every Lloyd iteration of every stage is recorded as (stage, codebook, distortion).

pub struct OracleStep {
    pub stage: usize,
    pub codebook: Vec<Vec<f64>>,
    pub distortion: f64,
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

fn assign(points: &[Vec<f64>], cb: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    let mut labels = vec![0; points.len()];
    let mut dists = vec![0.0; points.len()];
    for (p, point) in points.iter().enumerate() {
        let mut best = 0;
        let mut best_d = sq(point, &cb[0]);
        for (j, c) in cb.iter().enumerate().skip(1) {
            let d = sq(point, c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        labels[p] = best;
        dists[p] = best_d;
    }
    (labels, dists)
}

fn mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

/// Fills empty clusters with the worst-quantized points. Returns true when
/// any codeword moved.
fn repair(
    points: &[Vec<f64>],
    cb: &mut [Vec<f64>],
    labels: &mut Vec<usize>,
    dists: &mut Vec<f64>,
) -> bool {
    let mut moved = false;
    for _ in 0..cb.len() {
        let empty: Vec<usize> = (0..cb.len()).filter(|j| !labels.contains(j)).collect();
        if empty.is_empty() {
            break;
        }
        let mut d = dists.clone();
        for j in empty {
            let mut worst = 0;
            for i in 1..d.len() {
                if d[i] > d[worst] {
                    worst = i;
                }
            }
            cb[j] = points[worst].clone();
            d[worst] = -1.0;
        }
        let (l, ds) = assign(points, cb);
        *labels = l;
        *dists = ds;
        moved = true;
    }
    moved
}

pub fn lloyd_oracle(
    points: &[Vec<f64>],
    mut cb: Vec<Vec<f64>>,
    tol: f64,
    max_iters: usize,
    stage: usize,
    out: &mut Vec<OracleStep>,
) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let (mut labels, mut dists) = assign(points, &cb);
    repair(points, &mut cb, &mut labels, &mut dists);
    let mut distortion = mean(&dists);
    out.push(OracleStep {
        stage,
        codebook: cb.clone(),
        distortion,
    });
    for _ in 0..max_iters {
        if distortion == 0.0 {
            break;
        }
        for j in 0..cb.len() {
            let mut sum = vec![0.0; dim];
            let mut n = 0.0;
            for (p, point) in points.iter().enumerate() {
                if labels[p] == j {
                    for d in 0..dim {
                        sum[d] += point[d];
                    }
                    n += 1.0;
                }
            }
            cb[j] = sum.iter().map(|s| s / n).collect();
        }
        let (mut new_labels, mut new_dists) = assign(points, &cb);
        let moved = repair(points, &mut cb, &mut new_labels, &mut new_dists);
        let new_distortion = mean(&new_dists);
        out.push(OracleStep {
            stage,
            codebook: cb.clone(),
            distortion: new_distortion,
        });
        let stable = !moved && new_labels == labels;
        let drop = (distortion - new_distortion) / distortion;
        labels = new_labels;
        distortion = new_distortion;
        if stable || drop < tol {
            break;
        }
    }
    cb
}

/// Full LBG by doubling, assuming at least `target` distinct points.
pub fn lbg_oracle(
    points: &[Vec<f64>],
    target: usize,
    eps: f64,
    tol: f64,
    max_iters: usize,
) -> Vec<OracleStep> {
    let dim = points[0].len();
    let mut centroid = vec![0.0; dim];
    for p in points {
        for d in 0..dim {
            centroid[d] += p[d];
        }
    }
    for c in centroid.iter_mut() {
        *c /= points.len() as f64;
    }
    let mut cb = vec![centroid];
    let mut out = Vec::new();
    let (_, d0) = assign(points, &cb);
    out.push(OracleStep {
        stage: 0,
        codebook: cb.clone(),
        distortion: mean(&d0),
    });
    let mut stage = 0;
    while cb.len() < target {
        stage += 1;
        let mut split = Vec::new();
        for c in &cb {
            let a: Vec<f64> = c.iter().map(|x| x * (1.0 + eps)).collect();
            let mut b: Vec<f64> = c.iter().map(|x| x * (1.0 - eps)).collect();
            if a == b {
                b = b.iter().map(|x| x + eps).collect();
            }
            split.push(a);
            split.push(b);
        }
        cb = lloyd_oracle(points, split, tol, max_iters, stage, &mut out);
    }
    out
}
