use crate::error::{Error, Result};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Local outlier factor of every point.
///
/// Follows the textbook definition: the k-distance neighborhood keeps every
/// point tied at the k-th distance, reachability distance is
/// `max(k-distance(o), d(p, o))`, and the score is the mean ratio of the
/// neighbors' local reachability density to the point's own. Densities are
/// infinite when a point has at least k exact duplicates; ratios of two
/// infinite densities count as 1, so a set of identical points scores 1.0.
pub fn lof(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Config("LOF needs k >= 1".into()));
    }
    let n = points.len();
    if n < k + 1 {
        return Err(Error::InsufficientData(format!(
            "LOF with k = {k} needs at least {} points, got {n}",
            k + 1
        )));
    }
    if let Some(d) = points.first().map(Vec::len) {
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::Config("LOF points differ in dimension".into()));
        }
    }

    let mut k_dist = vec![0.0; n];
    let mut neighbors: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut d: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, dist(&points[i], &points[j])))
            .collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1));
        let kd = d[k - 1].1;
        k_dist[i] = kd;
        d.retain(|&(_, dj)| dj <= kd);
        neighbors.push(d);
    }

    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let total: f64 = neighbors[i]
                .iter()
                .map(|&(j, d)| d.max(k_dist[j]))
                .sum();
            let mean = total / neighbors[i].len() as f64;
            if mean == 0.0 {
                f64::INFINITY
            } else {
                1.0 / mean
            }
        })
        .collect();

    Ok((0..n)
        .map(|i| {
            let sum: f64 = neighbors[i]
                .iter()
                .map(|&(j, _)| match (lrd[j].is_infinite(), lrd[i].is_infinite()) {
                    (true, true) => 1.0,
                    (true, false) => f64::INFINITY,
                    (false, true) => 0.0,
                    (false, false) => lrd[j] / lrd[i],
                })
                .sum();
            sum / neighbors[i].len() as f64
        })
        .collect())
}

/// Neighborhood size used for a group of `n` points: `max(5, ceil(n / 10))`,
/// capped so at least one point remains outside the neighborhood.
pub fn default_k(n: usize) -> usize {
    (n.div_ceil(10)).max(5).min(n.saturating_sub(1)).max(1)
}
