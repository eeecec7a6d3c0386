use std::collections::HashMap;

use super::PointCloud;
use crate::error::{Error, Result};
use crate::kernel::dist2;

// Bins are a hair wider than the advertised cell size so that a point at
// distance exactly `cell_size` never rounds into a cell two steps away.
const BIN_SLACK: f64 = 1e-9;

/// Uniform spatial hash over a point cloud for fixed-radius queries.
#[derive(Debug, Clone)]
pub struct NeighborGrid<'a> {
    cloud: &'a PointCloud,
    cell_size: f64,
    bin_width: f64,
    cells: HashMap<Box<[i64]>, Vec<usize>>,
}

impl<'a> NeighborGrid<'a> {
    pub fn build(cloud: &'a PointCloud, radius: f64) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!("grid radius must be positive, got {radius}")));
        }
        let bin_width = radius * (1.0 + BIN_SLACK);
        let mut cells: HashMap<Box<[i64]>, Vec<usize>> = HashMap::new();
        let mut key = vec![0i64; cloud.dim()];
        for (i, p) in cloud.points().enumerate() {
            cell_of(p, bin_width, &mut key);
            match cells.get_mut(key.as_slice()) {
                Some(bucket) => bucket.push(i),
                None => {
                    cells.insert(key.clone().into_boxed_slice(), vec![i]);
                }
            }
        }
        Ok(Self {
            cloud,
            cell_size: radius,
            bin_width,
            cells,
        })
    }

    pub fn cloud(&self) -> &'a PointCloud {
        self.cloud
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn bucket_count(&self) -> usize {
        self.cells.len()
    }

    pub fn buckets(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.cells.values().map(Vec::as_slice)
    }

    /// Indices `j` with `|x - p_j| <= radius`, ascending.
    pub fn neighbors(&self, x: &[f64], radius: f64) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.neighbors_into(x, radius, &mut out)?;
        Ok(out)
    }

    /// Like [`neighbors`](Self::neighbors) but reuses `out`.
    pub fn neighbors_into(&self, x: &[f64], radius: f64, out: &mut Vec<usize>) -> Result<()> {
        let d = self.cloud.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        if !(radius >= 0.0) {
            return Err(Error::InvalidArgument(format!("query radius must be nonnegative, got {radius}")));
        }
        if radius > self.cell_size {
            return Err(Error::RadiusExceedsCell {
                radius,
                cell_size: self.cell_size,
            });
        }
        out.clear();
        let r2 = radius * radius;
        let mut center = vec![0i64; d];
        cell_of(x, self.bin_width, &mut center);
        let mut key = center.clone();
        // Odometer over the 3^d surrounding cells.
        let mut offset = vec![-1i64; d];
        loop {
            for a in 0..d {
                key[a] = center[a] + offset[a];
            }
            if let Some(bucket) = self.cells.get(key.as_slice()) {
                out.extend(
                    bucket
                        .iter()
                        .copied()
                        .filter(|&j| dist2(x, self.cloud.point(j)) <= r2),
                );
            }
            let mut a = 0;
            loop {
                if a == d {
                    out.sort_unstable();
                    return Ok(());
                }
                offset[a] += 1;
                if offset[a] <= 1 {
                    break;
                }
                offset[a] = -1;
                a += 1;
            }
        }
    }
}

fn cell_of(p: &[f64], width: f64, key: &mut [i64]) {
    for (k, c) in key.iter_mut().zip(p) {
        *k = (c / width).floor() as i64;
    }
}
