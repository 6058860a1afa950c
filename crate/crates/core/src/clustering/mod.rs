//! Daily profile construction, PCA + K-means clustering with ordered labels,
//! and association between two labelings.

pub mod association;
pub mod kmeans;
pub mod pca;
pub mod profiles;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub use association::{chi_squared_cramers_v, cramers_v, Association};
pub use kmeans::{elbow_from_curve, elbow_select_k, kmeans_fit, ElbowResult, KMeansModel};
pub use pca::{pca_fit, pca_inverse_transform, pca_transform, PcaModel};
pub use profiles::{build_road_profiles, build_tweeting_profiles, RoadProfileMatrix, TweetingProfile, TweetingProfiles};

use crate::config::ClusteringConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedClusterLabels {
    /// Ordered label of every training row.
    pub labels: Vec<usize>,
    /// `perm[raw]` is the ordered label of raw k-means cluster `raw`.
    pub perm: Vec<usize>,
    /// Ordering score of each ordered cluster, nondecreasing.
    pub scores: Vec<f64>,
}

fn order_by_scores(kmeans: &KMeansModel, raw_scores: &[f64]) -> OrderedClusterLabels {
    let mut idx: Vec<usize> = (0..raw_scores.len()).collect();
    idx.sort_by(|a, b| raw_scores[*a].total_cmp(&raw_scores[*b]).then(a.cmp(b)));
    let mut perm = vec![0; idx.len()];
    for (new, old) in idx.iter().enumerate() {
        perm[*old] = new;
    }
    OrderedClusterLabels {
        labels: kmeans.labels.iter().map(|l| perm[*l]).collect(),
        perm,
        scores: idx.iter().map(|i| raw_scores[*i]).collect(),
    }
}

/// Relabel clusters so the mean of each reconstructed centroid increases with the label.
pub fn order_clusters_by_mean_tti(kmeans: &KMeansModel, pca: &PcaModel) -> OrderedClusterLabels {
    let prof = pca_inverse_transform(pca, kmeans.centroids.view());
    let means: Vec<f64> = prof.mean_axis(Axis(1)).unwrap().to_vec();
    order_by_scores(kmeans, &means)
}

/// Relabel clusters by the centre of mass of each reconstructed centroid
/// histogram, so earlier activity gets the lower label.
pub fn order_clusters_by_center_of_mass(kmeans: &KMeansModel, pca: &PcaModel) -> OrderedClusterLabels {
    let prof = pca_inverse_transform(pca, kmeans.centroids.view());
    let com: Vec<f64> = prof
        .axis_iter(Axis(0))
        .map(|r| {
            let w: f64 = r.iter().map(|v| v.max(0.0)).sum();
            if w <= 0.0 {
                return 0.0;
            }
            r.iter().enumerate().map(|(i, v)| i as f64 * v.max(0.0)).sum::<f64>() / w
        })
        .collect();
    order_by_scores(kmeans, &com)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterOrder {
    MeanValue,
    CenterOfMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileClustering {
    pub pca: PcaModel,
    pub kmeans: KMeansModel,
    pub ordered: OrderedClusterLabels,
    /// Inertia against K; empty when K was fixed.
    pub curve: Vec<(usize, f64)>,
    /// Reconstructed centroid profiles in ordered-label order.
    pub centroid_profiles: Array2<f64>,
}

impl ProfileClustering {
    pub fn k(&self) -> usize {
        self.kmeans.k()
    }

    pub fn labels(&self) -> &[usize] {
        &self.ordered.labels
    }

    /// Ordered label of an unseen profile row.
    pub fn assign(&self, row: ArrayView1<f64>) -> usize {
        let z = pca_transform(&self.pca, row.insert_axis(Axis(0)));
        self.ordered.perm[self.kmeans.predict(z.row(0))]
    }
}

/// PCA to the configured variance, K by elbow (or `fixed_k`), then ordered labels.
pub fn fit_profile_clustering(
    rows: ArrayView2<f64>,
    cfg: &ClusteringConfig,
    seed: u64,
    fixed_k: Option<usize>,
    order: ClusterOrder,
) -> Result<ProfileClustering> {
    let n = rows.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("profile rows"));
    }
    let pca = pca_fit(rows, cfg.variance_target)?;
    let z = pca_transform(&pca, rows);
    let (k, curve) = match fixed_k.or(cfg.fixed_k) {
        Some(k) => (k.min(n), Vec::new()),
        None => {
            let ks: Vec<usize> = (cfg.k_min..=cfg.k_max.min(n)).collect();
            match elbow_select_k(z.view(), &ks, seed, cfg.n_init, cfg.max_iter) {
                Ok(e) => (e.k, e.curve),
                Err(Error::RangeTooSmall(_)) => {
                    log::warn!("too few candidate K values for the elbow; using K = {}", cfg.k_min.min(n));
                    (cfg.k_min.min(n), Vec::new())
                }
                Err(e) => return Err(e),
            }
        }
    };
    let kmeans = kmeans_fit(z.view(), k, seed, cfg.n_init, cfg.max_iter)?;
    let ordered = match order {
        ClusterOrder::MeanValue => order_clusters_by_mean_tti(&kmeans, &pca),
        ClusterOrder::CenterOfMass => order_clusters_by_center_of_mass(&kmeans, &pca),
    };
    let raw = pca_inverse_transform(&pca, kmeans.centroids.view());
    let mut centroid_profiles = Array2::zeros(raw.dim());
    for (old, new) in ordered.perm.iter().enumerate() {
        centroid_profiles.row_mut(*new).assign(&raw.row(old));
    }
    Ok(ProfileClustering { pca, kmeans, ordered, curve, centroid_profiles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn model(centroids: Array2<f64>, labels: Vec<usize>) -> (KMeansModel, PcaModel) {
        let p = centroids.ncols();
        let km = KMeansModel { centroids, inertia: 0.0, labels, history: vec![] };
        let pca = PcaModel {
            mean: ndarray::Array1::zeros(p),
            components: Array2::zeros((0, p)),
            explained: vec![],
            identity: true,
        };
        (km, pca)
    }

    #[test]
    fn two_centroids_sorted_by_mean() {
        let (km, pca) = model(array![[2.5, 2.5], [1.2, 1.2]], vec![0, 1, 1]);
        let o = order_clusters_by_mean_tti(&km, &pca);
        assert_eq!(o.perm, vec![1, 0]);
        assert_eq!(o.labels, vec![1, 0, 0]);
        assert!((o.scores[0] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn equal_means_keep_original_order() {
        let (km, pca) = model(array![[1.0, 3.0], [2.0, 2.0]], vec![0, 1]);
        let o = order_clusters_by_mean_tti(&km, &pca);
        assert_eq!(o.perm, vec![0, 1]);
    }

    #[test]
    fn fixed_k_and_assignment() {
        let rows = array![[1.0, 1.0, 1.0], [1.1, 1.0, 1.0], [3.0, 3.0, 3.1], [3.0, 3.1, 3.0]];
        let cfg = ClusteringConfig::default();
        let c = fit_profile_clustering(rows.view(), &cfg, 7, Some(2), ClusterOrder::MeanValue).unwrap();
        assert_eq!(c.labels(), &[0, 0, 1, 1]);
        assert_eq!(c.assign(array![2.9, 3.0, 3.0].view()), 1);
        assert!(c.centroid_profiles[[0, 0]] < c.centroid_profiles[[1, 0]]);
    }
}
