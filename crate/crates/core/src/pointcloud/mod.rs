//! Sampled manifold data: points with volume weights, plus a boundary subset
//! with area weights.

mod grid;
mod io;
mod weights;

pub use grid::NeighborGrid;
pub use io::{fmt_f64, load_cloud, read_cloud, save_cloud, write_cloud};
pub use weights::{estimate_weights_tangent_voronoi, estimate_weights_uniform, VoronoiConfig};

use crate::error::{Error, Result};

/// Points `p_1..p_n` in `R^d` sampling a `k`-manifold, volume weights `V`,
/// boundary indices `S` into the points and boundary area weights `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    intrinsic_dim: usize,
    coords: Vec<f64>,
    volume_weights: Vec<f64>,
    boundary_indices: Vec<usize>,
    area_weights: Vec<f64>,
}

impl PointCloud {
    /// `coords` is row-major, `dim` values per point.
    pub fn new(
        dim: usize,
        intrinsic_dim: usize,
        coords: Vec<f64>,
        volume_weights: Vec<f64>,
        boundary_indices: Vec<usize>,
        area_weights: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCloud("ambient dimension must be positive".into()));
        }
        if intrinsic_dim == 0 || intrinsic_dim > dim {
            return Err(Error::InvalidCloud(format!(
                "intrinsic dimension {intrinsic_dim} must lie in 1..={dim}"
            )));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidCloud(format!(
                "{} coordinates do not divide into points of dimension {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::EmptyCloud);
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidCloud(format!("non-finite coordinate {c}")));
        }
        if volume_weights.len() != n {
            return Err(Error::LengthMismatch {
                what: "volume weights",
                expected: n,
                found: volume_weights.len(),
            });
        }
        if area_weights.len() != boundary_indices.len() {
            return Err(Error::LengthMismatch {
                what: "area weights",
                expected: boundary_indices.len(),
                found: area_weights.len(),
            });
        }
        if let Some((i, v)) = volume_weights
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidCloud(format!("volume weight {i} is {v}, must be positive")));
        }
        if let Some((i, a)) = area_weights
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a > 0.0))
        {
            return Err(Error::InvalidCloud(format!("area weight {i} is {a}, must be positive")));
        }
        let mut seen = vec![false; n];
        for &b in &boundary_indices {
            if b >= n {
                return Err(Error::InvalidCloud(format!("boundary index {b} out of range for {n} points")));
            }
            if std::mem::replace(&mut seen[b], true) {
                return Err(Error::InvalidCloud(format!("boundary index {b} repeated")));
            }
        }
        Ok(Self {
            dim,
            intrinsic_dim,
            coords,
            volume_weights,
            boundary_indices,
            area_weights,
        })
    }

    /// Cloud without boundary samples.
    pub fn closed(dim: usize, intrinsic_dim: usize, coords: Vec<f64>, volume_weights: Vec<f64>) -> Result<Self> {
        Self::new(dim, intrinsic_dim, coords, volume_weights, Vec::new(), Vec::new())
    }

    /// Same points and boundary, new weights.
    pub fn with_weights(&self, volume_weights: Vec<f64>, area_weights: Vec<f64>) -> Result<Self> {
        Self::new(
            self.dim,
            self.intrinsic_dim,
            self.coords.clone(),
            volume_weights,
            self.boundary_indices.clone(),
            area_weights,
        )
    }

    pub fn len(&self) -> usize {
        self.volume_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume_weights.is_empty()
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary_indices.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn volume_weights(&self) -> &[f64] {
        &self.volume_weights
    }

    pub fn boundary_indices(&self) -> &[usize] {
        &self.boundary_indices
    }

    pub fn area_weights(&self) -> &[f64] {
        &self.area_weights
    }

    /// Coordinates of the `j`-th boundary sample `s_j`.
    pub fn boundary_point(&self, j: usize) -> &[f64] {
        self.point(self.boundary_indices[j])
    }

    pub fn total_volume(&self) -> f64 {
        self.volume_weights.iter().sum()
    }

    pub fn total_area(&self) -> f64 {
        self.area_weights.iter().sum()
    }

    /// `⟨u, v⟩_V = Σ u_i v_i V_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .zip(&self.volume_weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    /// `Σ u_i V_i / Σ V_i`.
    pub fn weighted_mean(&self, u: &[f64]) -> f64 {
        let s: f64 = u.iter().zip(&self.volume_weights).map(|(a, w)| a * w).sum();
        s / self.total_volume()
    }
}
