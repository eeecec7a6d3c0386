//! Off-sample reconstruction of a solved nodal vector:
//!
//! ```text
//! I(x) = [Σ_j R_t(x,p_j) u_j V_j - t·rhs(x)] / Σ_j R_t(x,p_j) V_j
//! rhs(x) = -Σ_j R̄_t(x,p_j) f_j V_j - 2 Σ_{s_j ∈ S} R̄_t(x,s_j) b_j A_j
//! ```
//!
//! `rhs(p_i)` is the discrete right-hand side, so `I(p_i) = u_i` whenever `u`
//! solves `-𝓛u = rhs`.

use crate::error::{Error, Result};
use crate::kernel::{dist2, KernelSpec};
use crate::operator::{boundary_load, check_len};
use crate::pointcloud::{NeighborGrid, PointCloud};

#[derive(Debug, Clone)]
pub struct PimSolution<'a> {
    grid: NeighborGrid<'a>,
    spec: KernelSpec,
    u: Vec<f64>,
    f_vals: Vec<f64>,
    b_vals: Vec<f64>,
    /// `f_j V_j + 2 b_j A_j` scattered onto point indices.
    tail_load: Vec<f64>,
}

impl<'a> PimSolution<'a> {
    pub fn new(cloud: &'a PointCloud, spec: KernelSpec, u: Vec<f64>, f_vals: Vec<f64>, b_vals: Vec<f64>) -> Result<Self> {
        check_len("solution", cloud.len(), u.len())?;
        check_len("source values", cloud.len(), f_vals.len())?;
        let g = boundary_load(cloud, &b_vals)?;
        let tail_load = f_vals
            .iter()
            .zip(cloud.volume_weights())
            .zip(&g)
            .map(|((f, v), g)| f * v + 2.0 * g)
            .collect();
        let grid = NeighborGrid::build(cloud, spec.support_radius())?;
        Ok(Self {
            grid,
            spec,
            u,
            f_vals,
            b_vals,
            tail_load,
        })
    }

    pub fn cloud(&self) -> &'a PointCloud {
        self.grid.cloud()
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn f_vals(&self) -> &[f64] {
        &self.f_vals
    }

    pub fn b_vals(&self) -> &[f64] {
        &self.b_vals
    }

    fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.grid.neighbors(x, self.spec.support_radius())
    }

    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let cloud = self.cloud();
        let v = cloud.volume_weights();
        let t = self.spec.t();
        let (mut num, mut den) = (0.0, 0.0);
        for j in self.neighbors(x)? {
            let (r, rb) = self.spec.pair_from_dist2(dist2(x, cloud.point(j)));
            num += r * self.u[j] * v[j] + t * rb * self.tail_load[j];
            den += r * v[j];
        }
        if den > 0.0 {
            Ok(num / den)
        } else {
            Err(Error::OutOfReach)
        }
    }

    /// Value and exact ambient gradient of the reconstruction at `x`.
    pub fn interpolate_with_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let cloud = self.cloud();
        let d = cloud.dim();
        let v = cloud.volume_weights();
        let t = self.spec.t();
        let c_t = self.spec.normalization();
        let profile = self.spec.profile();
        let (mut num, mut den) = (0.0, 0.0);
        let mut grad_num = vec![0.0; d];
        let mut grad_den = vec![0.0; d];
        for j in self.neighbors(x)? {
            let p = cloud.point(j);
            let r = self.spec.scaled(dist2(x, p));
            if r > 1.0 {
                continue;
            }
            let value = c_t * profile.value(r);
            let tail = c_t * profile.tail(r);
            num += value * self.u[j] * v[j] + t * tail * self.tail_load[j];
            den += value * v[j];
            // d r / dx = (x - p) / 2t, d R̄ / dr = -R.
            let d_value = c_t * profile.derivative(r) / (2.0 * t);
            let d_tail = -value / (2.0 * t);
            let cn = d_value * self.u[j] * v[j] + t * d_tail * self.tail_load[j];
            let cd = d_value * v[j];
            for a in 0..d {
                let dx = x[a] - p[a];
                grad_num[a] += cn * dx;
                grad_den[a] += cd * dx;
            }
        }
        if !(den > 0.0) {
            return Err(Error::OutOfReach);
        }
        let value = num / den;
        let grad = grad_num
            .iter()
            .zip(&grad_den)
            .map(|(gn, gd)| (gn - value * gd) / den)
            .collect();
        Ok((value, grad))
    }

    pub fn interpolate_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.interpolate_with_gradient(x).map(|(_, g)| g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{assemble_laplacian, assemble_rhs};
    use crate::solver::{solve, SolverOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
        PointCloud::closed(2, 2, coords, vec![1.0 / n as f64; n]).unwrap()
    }

    fn fd_gradient(sol: &PimSolution, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|a| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[a] += h;
                xm[a] -= h;
                (sol.interpolate(&xp).unwrap() - sol.interpolate(&xm).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn constant_and_zero_fields() {
        let cloud = random_plane(100, 1);
        let spec = KernelSpec::wendland(0.005, 2).unwrap();
        let zero = PimSolution::new(&cloud, spec, vec![0.0; 100], vec![0.0; 100], vec![]).unwrap();
        let konst = PimSolution::new(&cloud, spec, vec![2.5; 100], vec![0.0; 100], vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let x = [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)];
            assert_eq!(zero.interpolate(&x).unwrap(), 0.0);
            assert!((konst.interpolate(&x).unwrap() - 2.5).abs() < 1e-14);
            let g = konst.interpolate_gradient(&x).unwrap();
            assert!(g.iter().all(|c| c.abs() < 1e-10), "{g:?}");
        }
    }

    #[test]
    fn out_of_reach() {
        let cloud = random_plane(20, 3);
        let spec = KernelSpec::wendland(0.001, 2).unwrap();
        let sol = PimSolution::new(&cloud, spec, vec![1.0; 20], vec![0.0; 20], vec![]).unwrap();
        assert!(matches!(sol.interpolate(&[5.0, 5.0]), Err(Error::OutOfReach)));
        assert!(matches!(sol.interpolate_gradient(&[5.0, 5.0]), Err(Error::OutOfReach)));
    }

    #[test]
    fn single_point_cloud_is_flat_near_sample() {
        let cloud = PointCloud::closed(2, 1, vec![0.0, 0.0], vec![1.0]).unwrap();
        let spec = KernelSpec::wendland(0.01, 1).unwrap();
        let sol = PimSolution::new(&cloud, spec, vec![0.7], vec![0.0], vec![]).unwrap();
        for x in [[0.01, 0.0], [0.05, -0.1]] {
            assert!((sol.interpolate(&x).unwrap() - 0.7).abs() < 1e-15);
            assert!(sol.interpolate_gradient(&x).unwrap().iter().all(|g| g.abs() < 1e-12));
        }
    }

    #[test]
    fn range_bound_without_sources() {
        let cloud = random_plane(150, 5);
        let spec = KernelSpec::wendland(0.004, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u: Vec<f64> = (0..150).map(|_| rng.gen_range(-2.0..3.0)).collect();
        let (lo, hi) = u.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        let sol = PimSolution::new(&cloud, spec, u, vec![0.0; 150], vec![]).unwrap();
        for _ in 0..100 {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            if let Ok(val) = sol.interpolate(&x) {
                assert!(val >= lo - 1e-12 && val <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn reproduces_samples_after_solve_with_boundary() {
        // Interval grid with nonzero Neumann data at both ends.
        let n = 60;
        let coords: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let h = 1.0 / (n - 1) as f64;
        let mut v = vec![h; n];
        v[0] = h / 2.0;
        v[n - 1] = h / 2.0;
        let cloud = PointCloud::new(1, 1, coords, v, vec![0, n - 1], vec![1.0, 1.0]).unwrap();
        let spec = KernelSpec::wendland(0.004, 1).unwrap();
        let f: Vec<f64> = cloud.points().map(|p| (3.0 * p[0]).sin()).collect();
        let b = vec![0.4, -0.9];
        let op = assemble_laplacian(&cloud, &spec).unwrap();
        let rhs = assemble_rhs(&cloud, &spec, &f, &b).unwrap();
        let (u, rep) = solve(&op, &rhs, cloud.volume_weights(), &SolverOptions::default()).unwrap();
        assert!(rep.converged);
        let max_u = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let sol = PimSolution::new(&cloud, spec, u.clone(), f, b).unwrap();
        // The solver drops the mean c of rhs, which reappears as -t·c / w(p_i).
        let shift = spec.t() * rep.discarded_mean;
        for i in 0..n {
            let val = sol.interpolate(cloud.point(i)).unwrap();
            let w: f64 = (0..n)
                .map(|j| spec.pair_kernel(cloud.point(i), cloud.point(j)).unwrap().0 * cloud.volume_weights()[j])
                .sum();
            let expected = u[i] - shift / w;
            assert!((val - expected).abs() <= 1e-10 * (1.0 + max_u), "i={i}: {val} vs {expected}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cloud = random_plane(300, 7);
        let spec = KernelSpec::wendland(0.003, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u: Vec<f64> = cloud.points().map(|p| (4.0 * p[0]).sin() * p[1]).collect();
        let f: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = PimSolution::new(&cloud, spec, u, f, vec![]).unwrap();
        let step = 1e-6 * spec.t().sqrt();
        let mut checked = 0;
        while checked < 50 {
            let x = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let Ok(g) = sol.interpolate_gradient(&x) else { continue };
            let fd = fd_gradient(&sol, &x, step);
            let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(err <= 1e-5 * norm, "x={x:?} g={g:?} fd={fd:?}");
            checked += 1;
        }
    }

    #[test]
    fn locality() {
        let cloud = random_plane(200, 9);
        let spec = KernelSpec::wendland(0.002, 2).unwrap();
        let x = [0.5, 0.5];
        let radius = spec.support_radius();
        let mut moved = cloud.coords().to_vec();
        for i in 0..200 {
            let p = cloud.point(i);
            if dist2(&x, p).sqrt() > radius + 0.05 {
                moved[2 * i] += 0.01;
            }
        }
        let moved = PointCloud::closed(2, 2, moved, cloud.volume_weights().to_vec()).unwrap();
        let u: Vec<f64> = (0..200).map(|i| (i as f64).sin()).collect();
        let a = PimSolution::new(&cloud, spec, u.clone(), vec![0.1; 200], vec![]).unwrap();
        let b = PimSolution::new(&moved, spec, u, vec![0.1; 200], vec![]).unwrap();
        assert_eq!(a.interpolate(&x).unwrap().to_bits(), b.interpolate(&x).unwrap().to_bits());
    }
}
