use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// Retained components, one orthonormal row each.
    pub components: Array2<f64>,
    /// Explained-variance fraction of every nonzero component, descending.
    pub explained: Vec<f64>,
    /// Set when the input had no variance; transforms then pass rows through.
    pub identity: bool,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        if self.identity {
            0
        } else {
            self.components.nrows()
        }
    }

    pub fn retained_variance(&self) -> f64 {
        self.explained.iter().take(self.n_components()).sum()
    }
}

/// Fit PCA and keep the smallest number of components whose cumulative
/// explained variance reaches `variance_target`.
pub fn pca_fit(x: ArrayView2<f64>, variance_target: f64) -> Result<PcaModel> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(Error::DegenerateInput(format!("PCA needs at least 2 rows, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite entry in PCA input".into()));
    }
    let mean = x.mean_axis(Axis(0)).unwrap();
    let xc = &x - &mean;

    // Eigen-decompose whichever of X Xᵀ and XᵀX is smaller.
    let gram = n < p;
    let small = if gram { xc.dot(&xc.t()) } else { xc.t().dot(&xc) };
    let m = small.nrows();
    let eig = SymmetricEigen::new(DMatrix::from_fn(m, m, |i, j| small[[i, j]]));
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| eig.eigenvalues[*b].partial_cmp(&eig.eigenvalues[*a]).unwrap().then(a.cmp(b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let top = eig.eigenvalues[order[0]].max(0.0);
    if total <= 0.0 || top <= 1e-12 * (1.0 + x.iter().map(|v| v * v).sum::<f64>()) {
        log::warn!("zero-variance PCA input; using identity transform");
        return Ok(PcaModel { mean, components: Array2::zeros((0, p)), explained: Vec::new(), identity: true });
    }
    let keep: Vec<usize> = order.into_iter().filter(|i| eig.eigenvalues[*i] > top * 1e-12).collect();
    let explained: Vec<f64> = keep.iter().map(|i| eig.eigenvalues[*i] / total).collect();

    let mut comps = Array2::<f64>::zeros((keep.len(), p));
    for (r, i) in keep.iter().enumerate() {
        let u = Array1::from_iter(eig.eigenvectors.column(*i).iter().copied());
        let v = if gram { xc.t().dot(&u) } else { u };
        comps.row_mut(r).assign(&v);
    }
    orthonormalize(&mut comps);

    let mut cum = 0.0;
    let mut n_keep = explained.len();
    for (i, e) in explained.iter().enumerate() {
        cum += e;
        if cum >= variance_target - 1e-12 {
            n_keep = i + 1;
            break;
        }
    }
    let components = comps.slice(ndarray::s![..n_keep, ..]).to_owned();
    Ok(PcaModel { mean, components, explained, identity: false })
}

/// Modified Gram-Schmidt on the rows, run twice for numerical safety.
fn orthonormalize(m: &mut Array2<f64>) {
    for _ in 0..2 {
        for i in 0..m.nrows() {
            for j in 0..i {
                let d = m.row(i).dot(&m.row(j));
                let rj = m.row(j).to_owned();
                m.row_mut(i).scaled_add(-d, &rj);
            }
            let norm = m.row(i).dot(&m.row(i)).sqrt();
            if norm > 0.0 {
                m.row_mut(i).mapv_inplace(|v| v / norm);
            }
        }
    }
}

pub fn pca_transform(model: &PcaModel, rows: ArrayView2<f64>) -> Array2<f64> {
    if model.identity {
        return rows.to_owned();
    }
    (&rows - &model.mean).dot(&model.components.t())
}

pub fn pca_inverse_transform(model: &PcaModel, reduced: ArrayView2<f64>) -> Array2<f64> {
    if model.identity {
        return reduced.to_owned();
    }
    reduced.dot(&model.components) + &model.mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn line_has_one_component() {
        let x = array![[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let m = pca_fit(x.view(), 0.9).unwrap();
        assert_eq!(m.n_components(), 1);
        assert!((m.explained[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_reconstruction() {
        let x = array![[1.0, 2.0, 0.5], [0.0, -1.0, 3.0], [2.0, 2.0, 2.0], [4.0, 0.0, 1.0]];
        let m = pca_fit(x.view(), 1.0).unwrap();
        let back = pca_inverse_transform(&m, pca_transform(&m, x.view()).view());
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
        let z = pca_transform(&m, m.mean.view().insert_axis(Axis(0)));
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gram_route_matches_covariance_route() {
        let x = array![[1.0, 2.0, 0.5, 1.0], [0.0, -1.0, 3.0, 2.0], [2.0, 2.0, 2.0, 0.0]];
        let a = pca_fit(x.view(), 1.0).unwrap();
        let b = pca_fit(x.t().t().view(), 1.0).unwrap();
        assert_eq!(a.explained.len(), 2);
        for (u, v) in a.explained.iter().zip(&b.explained) {
            assert!((u - v).abs() < 1e-12);
        }
        let g = a.components.dot(&a.components.t());
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - e).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn isotropic_gaussian_splits_evenly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((10_000, 2), |_| StandardNormal.sample(&mut rng));
        let m = pca_fit(x.view(), 0.999).unwrap();
        assert_eq!(m.n_components(), 2);
        for e in &m.explained {
            assert!((e - 0.5).abs() < 0.05, "{e}");
        }
    }

    #[test]
    fn constant_input_falls_back_to_identity() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let m = pca_fit(x.view(), 0.9).unwrap();
        assert!(m.identity);
        assert_eq!(m.n_components(), 0);
        assert_eq!(pca_transform(&m, x.view()), x);
    }
}
