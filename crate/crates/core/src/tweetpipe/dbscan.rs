use crate::geo::{haversine_km, LatLon};

pub const NOISE: usize = usize::MAX;

/// DBSCAN with haversine distance. Clusters are numbered in order of their
/// first core point; noise points get `NOISE` (impossible when `min_pts <= 1`).
pub fn dbscan_cluster(coords: &[LatLon], eps_km: f64, min_pts: usize) -> Vec<usize> {
    let n = coords.len();
    let neighbours = |i: usize| -> Vec<usize> {
        (0..n).filter(|&j| haversine_km(&coords[i], &coords[j]) <= eps_km).collect()
    };
    let mut labels = vec![NOISE; n];
    let mut visited = vec![false; n];
    let mut next = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let nb = neighbours(i);
        if nb.len() < min_pts {
            continue;
        }
        let c = next;
        next += 1;
        labels[i] = c;
        let mut queue = nb;
        while let Some(j) = queue.pop() {
            if labels[j] == NOISE {
                labels[j] = c;
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nj = neighbours(j);
            if nj.len() >= min_pts {
                queue.extend(nj.into_iter().filter(|k| !visited[*k] || labels[*k] == NOISE));
            }
        }
    }
    labels
}
