use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub labels: Vec<usize>,
    /// Inertia after each Lloyd iteration of the winning restart.
    pub history: Vec<f64>,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn predict(&self, row: ArrayView1<f64>) -> usize {
        nearest(&self.centroids, row).0
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the closest centroid; ties go to the lower index.
fn nearest(centroids: &Array2<f64>, row: ArrayView1<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.axis_iter(Axis(0)).enumerate() {
        let d = sq_dist(c, row);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(x: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centroids = Array2::zeros((k, x.ncols()));
    centroids.row_mut(0).assign(&x.row(rng.gen_range(0..n)));
    let mut d2: Vec<f64> = x.axis_iter(Axis(0)).map(|r| sq_dist(r, centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).assign(&x.row(idx));
        for (i, r) in x.axis_iter(Axis(0)).enumerate() {
            d2[i] = d2[i].min(sq_dist(r, centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(x: ArrayView2<f64>, mut centroids: Array2<f64>, max_iter: usize) -> KMeansModel {
    let (n, k) = (x.nrows(), centroids.nrows());
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, r) in x.axis_iter(Axis(0)).enumerate() {
            let (j, d) = nearest(&centroids, r);
            inertia += d;
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
        }
        history.push(inertia);
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for (i, r) in x.axis_iter(Axis(0)).enumerate() {
            sums.row_mut(labels[i]).scaled_add(1.0, &r);
            counts[labels[i]] += 1;
        }
        for j in 0..k {
            // An emptied cluster keeps its previous centroid.
            if counts[j] > 0 {
                let c = &sums.row(j) / counts[j] as f64;
                centroids.row_mut(j).assign(&c);
            }
        }
    }
    let inertia = x
        .axis_iter(Axis(0))
        .zip(&labels)
        .map(|(r, l)| sq_dist(r, centroids.row(*l)))
        .sum();
    KMeansModel { centroids, inertia, labels, history }
}

/// k-means++ seeding, Lloyd iterations, best of `n_init` restarts by inertia.
pub fn kmeans_fit(x: ArrayView2<f64>, k: usize, seed: u64, n_init: usize, max_iter: usize) -> Result<KMeansModel> {
    let n = x.nrows();
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let mut best: Option<KMeansModel> = None;
    for restart in 0..n_init.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let m = lloyd(x, plus_plus_init(x, k, &mut rng), max_iter);
        if best.as_ref().is_none_or(|b| m.inertia < b.inertia) {
            best = Some(m);
        }
    }
    Ok(best.unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub k: usize,
    /// (K, inertia) for every candidate.
    pub curve: Vec<(usize, f64)>,
}

/// Pick K at the largest discrete second difference of the inertia curve.
pub fn elbow_select_k(
    x: ArrayView2<f64>,
    ks: &[usize],
    seed: u64,
    n_init: usize,
    max_iter: usize,
) -> Result<ElbowResult> {
    if ks.len() < 3 {
        return Err(Error::RangeTooSmall(ks.len()));
    }
    let mut curve = Vec::with_capacity(ks.len());
    for &k in ks {
        curve.push((k, kmeans_fit(x, k, seed, n_init, max_iter)?.inertia));
    }
    Ok(ElbowResult { k: elbow_from_curve(&curve), curve })
}

/// Elbow of a precomputed curve; ties within a relative 1e-9 go to the smaller K.
pub fn elbow_from_curve(curve: &[(usize, f64)]) -> usize {
    let scale = curve.iter().map(|c| c.1.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut best = (curve[1].0, f64::NEG_INFINITY);
    for w in curve.windows(3) {
        let d2 = w[0].1 - 2.0 * w[1].1 + w[2].1;
        if d2 > best.1 + 1e-9 * scale {
            best = (w[1].0, d2);
        }
    }
    best.0
}

/// Mean of each centroid row; used when ordering clusters.
pub fn row_means(m: &Array2<f64>) -> Array1<f64> {
    m.mean_axis(Axis(1)).unwrap_or_else(|| Array1::zeros(m.nrows()))
}
