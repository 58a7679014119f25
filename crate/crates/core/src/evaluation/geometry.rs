use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::engine::{ModelState, TopicId};
use crate::error::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-9;

fn check_distribution(p: &[f64]) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::NotADistribution(format!("entry {x}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotADistribution(format!("sums to {s}")));
    }
    Ok(())
}

/// Jensen-Shannon divergence in bits.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let (mut kp, mut kq) = (0.0, 0.0);
    for (&a, &b) in p.iter().zip(q) {
        let m = (a + b) / 2.0;
        if a > 0.0 {
            kp += a * (a / m).log2();
        }
        if b > 0.0 {
            kq += b * (b / m).log2();
        }
    }
    Ok((0.5 * kp + 0.5 * kq).clamp(0.0, 1.0))
}

/// Classical (Torgerson) MDS of a symmetric distance matrix into `dims`
/// coordinates. Each axis is oriented so that its largest-magnitude
/// coordinate is positive.
pub fn classical_mds(dist: &[Vec<f64>], dims: usize) -> Vec<Vec<f64>> {
    let n = dist.len();
    if n == 0 {
        return Vec::new();
    }
    let d2 = DMatrix::from_fn(n, n, |i, j| dist[i][j] * dist[i][j]);
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));

    let mut coords = vec![vec![0.0; dims]; n];
    for (axis, &e) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[e].max(0.0);
        let scale = lambda.sqrt();
        let v = eig.eigenvectors.column(e);
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i][axis] = sign * v[i] * scale;
        }
    }
    coords
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub topic: TopicId,
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

/// 2-D layout of the active topics from pairwise JSD of their word
/// distributions; one topic sits at the origin.
pub fn distance_map(state: &ModelState) -> Result<Vec<MapPoint>> {
    let topics = state.active_topics();
    if topics.is_empty() {
        return Err(Error::EmptySelection);
    }
    let dists: Vec<Vec<f64>> = topics.iter().map(|&k| state.topic_word_dist(k)).collect::<Result<_>>()?;
    let n = topics.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = jsd(&dists[i], &dists[j])?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    let coords = classical_mds(&d, 2);
    Ok(topics
        .iter()
        .zip(coords)
        .map(|(&k, c)| MapPoint { topic: k, x: c[0], y: c[1], weight: state.topic_weight(k) })
        .collect())
}
