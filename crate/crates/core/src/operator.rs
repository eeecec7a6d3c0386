//! The discrete integral Laplacian on a point cloud,
//!
//! ```text
//! (𝓛u)_i = (1/t) Σ_j R_t(p_i, p_j) (u_i - u_j) V_j,
//! ```
//!
//! the matching right-hand side, the `V`-weighted quadratic form and the
//! kernel-smoothing operator.
//!
//! Rows are stored in CSR form with `w_ij = R_t(p_i, p_j) V_j / t` for every
//! `j` within the support radius `2√t` of `p_i` (self pair included) and the
//! row sums `d_i = Σ_j w_ij`, so that `(𝓛u)_i = d_i u_i - Σ_j w_ij u_j`.
//! `𝓛` itself is not symmetric; `diag(V) 𝓛` is.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{dist2, KernelSpec};
use crate::pointcloud::{NeighborGrid, PointCloud};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    t: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    row_sums: Vec<f64>,
}

/// Per-row neighbor lists with kernel values `(R_t, R̄_t)`, ascending in `j`.
struct KernelRows {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<(f64, f64)>,
}

impl KernelRows {
    fn build(cloud: &PointCloud, spec: &KernelSpec) -> Result<Self> {
        let radius = spec.support_radius();
        let grid = NeighborGrid::build(cloud, radius)?;
        let rows: Vec<Vec<(usize, (f64, f64))>> = (0..cloud.len())
            .into_par_iter()
            .map_init(Vec::new, |scratch, i| {
                let p = cloud.point(i);
                grid.neighbors_into(p, radius, scratch)?;
                Ok(scratch
                    .iter()
                    .map(|&j| (j, spec.pair_from_dist2(dist2(p, cloud.point(j)))))
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { row_ptr, cols, values })
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, (f64, f64))> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }
}

/// Boundary data scattered onto point indices: `g_i = b_j A_j` when
/// `p_i = s_j`, zero otherwise.
pub(crate) fn boundary_load(cloud: &PointCloud, b_vals: &[f64]) -> Result<Vec<f64>> {
    check_len("boundary values", cloud.boundary_len(), b_vals.len())?;
    let mut g = vec![0.0; cloud.len()];
    for ((&i, a), b) in cloud.boundary_indices().iter().zip(cloud.area_weights()).zip(b_vals) {
        g[i] = b * a;
    }
    Ok(g)
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch { what, expected, found });
    }
    Ok(())
}

impl DiscreteOperator {
    pub fn assemble(cloud: &PointCloud, spec: &KernelSpec) -> Result<Self> {
        let rows = KernelRows::build(cloud, spec)?;
        let inv_t = 1.0 / spec.t();
        let v = cloud.volume_weights();
        let weights: Vec<f64> = rows
            .cols
            .iter()
            .zip(&rows.values)
            .map(|(&j, &(r, _))| inv_t * r * v[j])
            .collect();
        let row_sums = (0..rows.len())
            .map(|i| weights[rows.row_ptr[i]..rows.row_ptr[i + 1]].iter().sum())
            .collect();
        Ok(Self {
            t: spec.t(),
            row_ptr: rows.row_ptr,
            cols: rows.cols,
            weights,
            row_sums,
        })
    }

    pub fn len(&self) -> usize {
        self.row_sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_sums.is_empty()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    /// Stored `(j, w_ij)` of row `i`, ascending in `j`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.weights[range].iter().copied())
    }

    /// Diagonal entry of `𝓛` as a matrix, `d_i - w_ii`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let self_weight: f64 = self.row(i).filter(|&(j, _)| j == i).map(|(_, w)| w).sum();
                self.row_sums[i] - self_weight
            })
            .collect()
    }

    /// `𝓛u`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("operand", self.len(), u.len())?;
        check_len("output", self.len(), out.len())?;
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let mixed: f64 = self.row(i).map(|(j, w)| w * u[j]).sum();
            *o = self.row_sums[i] * u[i] - mixed;
        });
        Ok(())
    }

    /// `⟨u, 𝓛u⟩_V = Σ_i u_i (𝓛u)_i V_i`.
    pub fn quadratic_form(&self, cloud: &PointCloud, u: &[f64]) -> Result<f64> {
        check_len("volume weights", self.len(), cloud.len())?;
        let lu = self.apply(u)?;
        Ok(cloud.inner(u, &lu))
    }

    /// Writes `i j w_ij` lines (0-based, ascending) for inspection.
    pub fn write_coordinate_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "% n={} nnz={} t={:.16e}", self.len(), self.nnz(), self.t)?;
        for i in 0..self.len() {
            for (j, w) in self.row(i) {
                writeln!(out, "{i} {j} {w:.16e}")?;
            }
        }
        Ok(())
    }
}

/// Assembles `𝓛` for the cloud at the given kernel.
pub fn assemble_laplacian(cloud: &PointCloud, spec: &KernelSpec) -> Result<DiscreteOperator> {
    DiscreteOperator::assemble(cloud, spec)
}

/// Right-hand side of `-𝓛u = rhs` for `-Δu = f` in the interior and
/// `∂u/∂n = b` on the boundary:
///
/// ```text
/// rhs_i = -Σ_j R̄_t(p_i, p_j) f_j V_j - 2 Σ_{s_j ∈ S} R̄_t(p_i, s_j) b_j A_j
/// ```
///
/// The interior source enters with a negative sign because `𝓛` approximates
/// `-Δ` (it is positive semidefinite), so `𝓛u ≈ Σ R̄_t f V + 2 Σ R̄_t b A`.
pub fn assemble_rhs(cloud: &PointCloud, spec: &KernelSpec, f_vals: &[f64], b_vals: &[f64]) -> Result<Vec<f64>> {
    check_len("source values", cloud.len(), f_vals.len())?;
    let g = boundary_load(cloud, b_vals)?;
    let rows = KernelRows::build(cloud, spec)?;
    let v = cloud.volume_weights();
    Ok((0..rows.len())
        .into_par_iter()
        .map(|i| {
            let mut interior = 0.0;
            let mut boundary = 0.0;
            for (j, (_, rb)) in rows.row(i) {
                interior += rb * f_vals[j] * v[j];
                boundary += rb * g[j];
            }
            -interior - 2.0 * boundary
        })
        .collect())
}

/// Kernel average `v_i = Σ_j R_t(p_i,p_j) u_j V_j / Σ_j R_t(p_i,p_j) V_j`.
pub fn smooth(cloud: &PointCloud, spec: &KernelSpec, u: &[f64]) -> Result<Vec<f64>> {
    check_len("operand", cloud.len(), u.len())?;
    let rows = KernelRows::build(cloud, spec)?;
    let v = cloud.volume_weights();
    Ok((0..rows.len())
        .into_par_iter()
        .map(|i| {
            let (mut num, mut den) = (0.0, 0.0);
            for (j, (r, _)) in rows.row(i) {
                num += r * u[j] * v[j];
                den += r * v[j];
            }
            num / den
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Profile;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_cloud(n: usize, d: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n * d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let v = (0..n).map(|_| rng.gen_range(0.5..1.5) / n as f64).collect();
        PointCloud::closed(d, d, coords, v).unwrap()
    }

    fn circle_cloud(n: usize) -> PointCloud {
        let coords = (0..n)
            .flat_map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                [th.cos(), th.sin()]
            })
            .collect();
        PointCloud::closed(2, 1, coords, vec![2.0 * PI / n as f64; n]).unwrap()
    }

    /// Dense `𝓛` from the all-pairs double loop.
    fn dense_laplacian(cloud: &PointCloud, spec: &KernelSpec) -> Vec<Vec<f64>> {
        let n = cloud.len();
        let v = cloud.volume_weights();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let (r, _) = spec.pair_kernel(cloud.point(i), cloud.point(j)).unwrap();
                let w = r * v[j] / spec.t();
                m[i][i] += w;
                m[i][j] -= w;
            }
        }
        m
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn two_point_hand_value() {
        let cloud = PointCloud::closed(1, 1, vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let spec = KernelSpec::wendland(1.0, 1).unwrap();
        let op = assemble_laplacian(&cloud, &spec).unwrap();
        let u = [3.0, 1.0];
        let lu = op.apply(&u).unwrap();
        let c_t = (4.0 * PI).powf(-0.5);
        // r = |x - y|² / 4t = 1/4
        let r = 0.75f64.powi(4) * 2.0;
        assert_relative_eq!(lu[0], c_t * r * (u[0] - u[1]), max_relative = 1e-14);
        assert_relative_eq!(lu[1], c_t * r * (u[1] - u[0]), max_relative = 1e-14);
    }

    #[test]
    fn matches_dense_oracle() {
        for (d, seed) in [(1, 1), (2, 2), (3, 3)] {
            let cloud = random_cloud(200, d, seed);
            let spec = KernelSpec::wendland(0.01, d).unwrap();
            let op = assemble_laplacian(&cloud, &spec).unwrap();
            let dense = dense_laplacian(&cloud, &spec);
            let u = random_vec(200, seed + 10);
            let lu = op.apply(&u).unwrap();
            for i in 0..200 {
                let expected: f64 = (0..200).map(|j| dense[i][j] * u[j]).sum();
                let scale = op.row_sums()[i].max(1e-300);
                assert!((lu[i] - expected).abs() <= 1e-12 * scale, "row {i}");
            }
            // Only pairs within the support radius are stored.
            for i in 0..200 {
                for (j, w) in op.row(i) {
                    assert!(dist2(cloud.point(i), cloud.point(j)) <= 4.0 * spec.t());
                    assert!(w >= 0.0);
                }
            }
        }
    }

    #[test]
    fn null_vector_and_symmetry() {
        let cloud = random_cloud(300, 2, 5);
        for t in [0.001, 0.01, 0.05] {
            let spec = KernelSpec::wendland(t, 2).unwrap();
            let op = assemble_laplacian(&cloud, &spec).unwrap();
            assert_eq!(op.apply(&vec![0.0; 300]).unwrap(), vec![0.0; 300]);
            let max_row = op.row_sums().iter().cloned().fold(0.0, f64::max);
            let ones = op.apply(&vec![1.0; 300]).unwrap();
            assert!(ones.iter().all(|x| x.abs() <= 1e-12 * max_row));

            let v = cloud.volume_weights();
            let mut max_vw: f64 = 0.0;
            let mut max_gap: f64 = 0.0;
            for i in 0..300 {
                for (j, w) in op.row(i) {
                    let back = op.row(j).find(|&(k, _)| k == i).expect("symmetric pattern").1;
                    max_vw = max_vw.max((v[i] * w).abs());
                    max_gap = max_gap.max((v[i] * w - v[j] * back).abs());
                }
            }
            assert!(max_gap <= 1e-13 * max_vw);
        }
    }

    #[test]
    fn quadratic_form_matches_double_sum() {
        let cloud = random_cloud(250, 2, 8);
        let spec = KernelSpec::new(Profile::TruncatedGaussian, 0.005, 2).unwrap();
        let op = assemble_laplacian(&cloud, &spec).unwrap();
        let v = cloud.volume_weights();
        for seed in 0..10 {
            let u = random_vec(250, seed);
            let single = op.quadratic_form(&cloud, &u).unwrap();
            let mut double = 0.0;
            for i in 0..250 {
                for j in 0..250 {
                    let (r, _) = spec.pair_kernel(cloud.point(i), cloud.point(j)).unwrap();
                    double += r * (u[i] - u[j]).powi(2) * v[i] * v[j];
                }
            }
            double /= 2.0 * spec.t();
            assert!(single >= 0.0);
            assert_relative_eq!(single, double, max_relative = 1e-10);
        }
        assert!(op.quadratic_form(&cloud, &vec![2.5; 250]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rhs_single_point() {
        let cloud = PointCloud::closed(2, 1, vec![0.2, 0.3], vec![0.7]).unwrap();
        let spec = KernelSpec::wendland(0.05, 1).unwrap();
        let rhs = assemble_rhs(&cloud, &spec, &[1.0], &[]).unwrap();
        assert_relative_eq!(rhs[0], -spec.normalization() / 3.0 * 0.7, max_relative = 1e-14);
        assert_eq!(assemble_rhs(&cloud, &spec, &[0.0], &[]).unwrap(), vec![0.0]);
    }

    #[test]
    fn rhs_matches_dense_oracle_on_circle() {
        let n = 400;
        let cloud = circle_cloud(n);
        let spec = KernelSpec::wendland(0.01, 1).unwrap();
        let f: Vec<f64> = cloud.points().map(|p| p[0]).collect();
        let rhs = assemble_rhs(&cloud, &spec, &f, &[]).unwrap();
        for i in 0..n {
            let mut expected = 0.0;
            for j in 0..n {
                let (_, rb) = spec.pair_kernel(cloud.point(i), cloud.point(j)).unwrap();
                expected -= rb * f[j] * cloud.volume_weights()[j];
            }
            assert!((rhs[i] - expected).abs() <= 1e-12 * expected.abs().max(1e-3), "row {i}");
        }
    }

    #[test]
    fn rhs_boundary_term() {
        // Interval with both endpoints on the boundary.
        let coords: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let cloud = PointCloud::new(1, 1, coords, vec![0.1; 11], vec![0, 10], vec![1.0, 1.0]).unwrap();
        let spec = KernelSpec::wendland(0.01, 1).unwrap();
        let b = [2.0, -1.0];
        let rhs = assemble_rhs(&cloud, &spec, &vec![0.0; 11], &b).unwrap();
        for i in 0..11 {
            let mut expected = 0.0;
            for (s, &bs) in [0usize, 10].iter().zip(&b) {
                let (_, rb) = spec.pair_kernel(cloud.point(i), cloud.point(*s)).unwrap();
                expected -= 2.0 * rb * bs;
            }
            assert_relative_eq!(rhs[i], expected, epsilon = 1e-14);
        }
        assert!(assemble_rhs(&cloud, &spec, &vec![0.0; 11], &[1.0]).is_err());
    }

    #[test]
    fn smoothing() {
        let cloud = random_cloud(200, 2, 4);
        let spec = KernelSpec::wendland(0.004, 2).unwrap();
        let c = smooth(&cloud, &spec, &vec![1.7; 200]).unwrap();
        assert!(c.iter().all(|x| (x - 1.7).abs() < 1e-14));

        let u = random_vec(200, 3);
        let s = smooth(&cloud, &spec, &u).unwrap();
        let (lo, hi) = u.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        for i in 0..200 {
            assert!(s[i] >= lo - 1e-15 && s[i] <= hi + 1e-15);
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..200 {
                let (r, _) = spec.pair_kernel(cloud.point(i), cloud.point(j)).unwrap();
                num += r * u[j] * cloud.volume_weights()[j];
                den += r * cloud.volume_weights()[j];
            }
            assert_relative_eq!(s[i], num / den, max_relative = 1e-12, epsilon = 1e-14);
        }

        let far = PointCloud::closed(1, 1, vec![0.0, 10.0], vec![1.0, 1.0]).unwrap();
        let spec = KernelSpec::wendland(0.01, 1).unwrap();
        assert_eq!(smooth(&far, &spec, &[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
    }

    #[test]
    fn length_errors() {
        let cloud = random_cloud(10, 1, 1);
        let spec = KernelSpec::wendland(0.01, 1).unwrap();
        let op = assemble_laplacian(&cloud, &spec).unwrap();
        assert!(op.apply(&[0.0; 3]).is_err());
        assert!(op.quadratic_form(&cloud, &[0.0; 3]).is_err());
        assert!(assemble_rhs(&cloud, &spec, &[0.0; 3], &[]).is_err());
        assert!(smooth(&cloud, &spec, &[0.0; 3]).is_err());
    }

    #[test]
    fn coordinate_dump_is_ordered() {
        let cloud = random_cloud(30, 1, 2);
        let spec = KernelSpec::wendland(0.01, 1).unwrap();
        let op = assemble_laplacian(&cloud, &spec).unwrap();
        let mut buf = Vec::new();
        op.write_coordinate_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let pairs: Vec<(usize, usize)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split_whitespace();
                (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
            })
            .collect();
        assert_eq!(pairs.len(), op.nnz());
        assert!(pairs.windows(2).all(|w| w[0] < w[1]));
    }
}
