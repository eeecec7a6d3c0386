//! Quadrature weight estimation when `V` and `A` are not supplied.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::dist2;

/// Constant weights `total_volume / n`, appropriate for uniform random samples.
pub fn estimate_weights_uniform(n: usize, total_volume: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    if !(total_volume.is_finite() && total_volume > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "total volume must be positive, got {total_volume}"
        )));
    }
    Ok(vec![total_volume / n as f64; n])
}

/// Parameters of the tangent-plane Voronoi estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoronoiConfig {
    /// Neighbors used for the tangent fit and the Voronoi cell.
    pub k_nn: usize,
    /// The cell is clipped to a ball of radius `clip_scale` times the distance
    /// to the `k_nn`-th neighbor.
    pub clip_scale: f64,
}

impl Default for VoronoiConfig {
    fn default() -> Self {
        Self {
            k_nn: 10,
            clip_scale: 0.5,
        }
    }
}

/// Per-point weight from the Voronoi cell of the point within its locally
/// fitted tangent space.
///
/// `coords` holds points of dimension `dim` row-major. Supported intrinsic
/// dimensions are 1 and 2. Points whose neighborhood has fewer than `k`
/// significant principal directions are reported together in
/// [`Error::DegenerateNeighborhoods`].
pub fn estimate_weights_tangent_voronoi(
    coords: &[f64],
    dim: usize,
    k: usize,
    config: VoronoiConfig,
) -> Result<Vec<f64>> {
    if !(1..=2).contains(&k) || k > dim {
        return Err(Error::UnsupportedDimension(k));
    }
    if config.k_nn < k + 2 {
        return Err(Error::InvalidArgument(format!(
            "k_nn = {} must be at least k + 2 = {}",
            config.k_nn,
            k + 2
        )));
    }
    if !(config.clip_scale > 0.0) {
        return Err(Error::InvalidArgument("clip scale must be positive".into()));
    }
    let n = coords.len() / dim;
    if n < config.k_nn + 1 {
        return Err(Error::TooFewPoints {
            needed: config.k_nn + 1,
            found: n,
        });
    }
    let point = |i: usize| &coords[i * dim..(i + 1) * dim];

    let results: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = point(i);
            let mut by_dist: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist2(p, point(j)), j))
                .collect();
            by_dist.select_nth_unstable_by(config.k_nn - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            by_dist.truncate(config.k_nn);
            by_dist.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

            let clip = config.clip_scale * by_dist[config.k_nn - 1].0.sqrt();
            if !(clip > 0.0) {
                return None;
            }
            let duplicates = by_dist.iter().filter(|(d2, _)| *d2 == 0.0).count();
            let offsets: Vec<Vec<f64>> = by_dist
                .iter()
                .filter(|(d2, _)| *d2 > 0.0)
                .map(|&(_, j)| point(j).iter().zip(p).map(|(a, b)| a - b).collect())
                .collect();
            let basis = tangent_basis(&offsets, dim, k)?;
            let projected: Vec<Vec<f64>> = offsets
                .iter()
                .map(|o| {
                    basis
                        .iter()
                        .map(|b| b.iter().zip(o).map(|(x, y)| x * y).sum())
                        .collect()
                })
                .collect();
            let area = match k {
                1 => interval_cell(&projected, clip),
                _ => planar_cell(&projected, clip),
            };
            let w = area / (duplicates + 1) as f64;
            (w > 0.0 && w.is_finite()).then_some(w)
        })
        .collect();

    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.is_none().then_some(i))
        .collect();
    if !failed.is_empty() {
        return Err(Error::DegenerateNeighborhoods { indices: failed });
    }
    Ok(results.into_iter().map(Option::unwrap).collect())
}

/// Top-`k` principal directions of the offsets about the base point.
fn tangent_basis(offsets: &[Vec<f64>], dim: usize, k: usize) -> Option<Vec<Vec<f64>>> {
    if offsets.len() < k {
        return None;
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for o in offsets {
        for a in 0..dim {
            for b in 0..dim {
                cov[(a, b)] += o[a] * o[b];
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]];
    if !(largest > 0.0) || eig.eigenvalues[order[k - 1]] <= 1e-10 * largest {
        return None;
    }
    Some(
        order[..k]
            .iter()
            .map(|&c| eig.eigenvectors.column(c).iter().copied().collect())
            .collect(),
    )
}

fn interval_cell(projected: &[Vec<f64>], clip: f64) -> f64 {
    let mut left = -clip;
    let mut right = clip;
    for y in projected {
        let half = 0.5 * y[0];
        if y[0] > 0.0 {
            right = right.min(half);
        } else if y[0] < 0.0 {
            left = left.max(half);
        }
    }
    (right - left).max(0.0)
}

fn planar_cell(projected: &[Vec<f64>], clip: f64) -> f64 {
    let mut poly = vec![[-clip, -clip], [clip, -clip], [clip, clip], [-clip, clip]];
    for q in projected {
        let (qx, qy) = (q[0], q[1]);
        let c = 0.5 * (qx * qx + qy * qy);
        if c == 0.0 {
            continue;
        }
        poly = clip_half_plane(&poly, [qx, qy], c);
        if poly.len() < 3 {
            return 0.0;
        }
    }
    polygon_disk_area(&poly, clip)
}

/// Sutherland–Hodgman clip of a convex polygon to `{x : n·x <= c}`.
fn clip_half_plane(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let side = |p: &[f64; 2]| n[0] * p[0] + n[1] * p[1] - c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for (i, a) in poly.iter().enumerate() {
        let b = &poly[(i + 1) % poly.len()];
        let (sa, sb) = (side(a), side(b));
        if sa <= 0.0 {
            out.push(*a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let s = sa / (sa - sb);
            out.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    out
}

/// Exact area of a counter-clockwise polygon intersected with the disk of
/// radius `r` about the origin.
fn polygon_disk_area(poly: &[[f64; 2]], r: f64) -> f64 {
    (0..poly.len())
        .map(|i| triangle_disk_area(poly[i], poly[(i + 1) % poly.len()], r))
        .sum()
}

/// Signed area of triangle `(0, a, b)` intersected with the disk.
fn triangle_disk_area(a: [f64; 2], b: [f64; 2], r: f64) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    if qa == 0.0 {
        return 0.0;
    }
    // |a + s d|² = r² for s in [0, 1].
    let qb = a[0] * d[0] + a[1] * d[1];
    let qc = a[0] * a[0] + a[1] * a[1] - r * r;
    let disc = qb * qb - qa * qc;
    let mut cuts = vec![0.0];
    if disc > 0.0 {
        let sq = disc.sqrt();
        for s in [(-qb - sq) / qa, (-qb + sq) / qa] {
            if s > 0.0 && s < 1.0 {
                cuts.push(s);
            }
        }
    }
    cuts.push(1.0);
    let at = |s: f64| [a[0] + s * d[0], a[1] + s * d[1]];
    cuts.windows(2)
        .map(|w| {
            let (p, q) = (at(w[0]), at(w[1]));
            let m = at(0.5 * (w[0] + w[1]));
            let cross = p[0] * q[1] - p[1] * q[0];
            if m[0] * m[0] + m[1] * m[1] < r * r {
                0.5 * cross
            } else {
                let dot = p[0] * q[0] + p[1] * q[1];
                0.5 * r * r * cross.atan2(dot)
            }
        })
        .sum()
}
