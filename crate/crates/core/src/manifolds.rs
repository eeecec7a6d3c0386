//! Analytic test manifolds with closed-form solutions of the Neumann problem
//! `-Δ_M u = f`, `∂u/∂n = b`, exact quadrature weights and error norms.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interpolant::PimSolution;
use crate::pointcloud::PointCloud;

const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// `[0,1]`, `u = cos πx`, `f = π² cos πx`, `b = 0`.
    Interval,
    /// Unit circle in R², `u = f = cos θ`.
    Circle,
    /// Unit sphere in R³, `u = z`, `f = 2z`.
    Sphere,
    /// Unit disk, `u = x² - y²`, `f = 0`, `b = 2(x² - y²)`.
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleMode {
    Grid,
    Random,
}

impl FromStr for SampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(SampleMode::Grid),
            "random" => Ok(SampleMode::Random),
            other => Err(Error::InvalidArgument(format!("unknown sampling mode `{other}`"))),
        }
    }
}

impl fmt::Display for SampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleMode::Grid => "grid",
            SampleMode::Random => "random",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub cloud: PointCloud,
    /// Grid mode: largest spacing between adjacent grid points.
    /// Random mode: `|M|^{1/k} n^{-1/k}`.
    pub h: f64,
    /// Monte Carlo scale `n^{-1/2}`; only set in random mode.
    pub h_mc: Option<f64>,
    /// Count asked for; `cloud.len()` may differ for structured grids.
    pub requested_n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactData {
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    /// One value per boundary index of the cloud.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub linf: f64,
    pub l2: f64,
    pub h1: f64,
    /// Evaluation points outside kernel reach.
    pub skipped: usize,
    pub evaluated: usize,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::Interval, Case::Circle, Case::Sphere, Case::Disk];

    pub fn name(self) -> &'static str {
        match self {
            Case::Interval => "interval",
            Case::Circle => "circle",
            Case::Sphere => "sphere",
            Case::Disk => "disk",
        }
    }

    /// Intrinsic dimension.
    pub fn k(self) -> usize {
        match self {
            Case::Interval | Case::Circle => 1,
            Case::Sphere | Case::Disk => 2,
        }
    }

    /// Ambient dimension.
    pub fn d(self) -> usize {
        match self {
            Case::Interval => 1,
            Case::Circle | Case::Disk => 2,
            Case::Sphere => 3,
        }
    }

    pub fn volume(self) -> f64 {
        match self {
            Case::Interval => 1.0,
            Case::Circle => 2.0 * PI,
            Case::Sphere => 4.0 * PI,
            Case::Disk => PI,
        }
    }

    /// Measure of `∂M`; the interval's boundary is two points.
    pub fn boundary_measure(self) -> f64 {
        match self {
            Case::Interval => 2.0,
            Case::Circle | Case::Sphere => 0.0,
            Case::Disk => 2.0 * PI,
        }
    }

    pub fn has_boundary(self) -> bool {
        self.boundary_measure() > 0.0
    }

    pub fn exact_u(self, p: &[f64]) -> f64 {
        match self {
            Case::Interval => (PI * p[0]).cos(),
            Case::Circle => p[0],
            Case::Sphere => p[2],
            Case::Disk => p[0] * p[0] - p[1] * p[1],
        }
    }

    pub fn exact_f(self, p: &[f64]) -> f64 {
        match self {
            Case::Interval => PI * PI * (PI * p[0]).cos(),
            Case::Circle => p[0],
            Case::Sphere => 2.0 * p[2],
            Case::Disk => 0.0,
        }
    }

    /// Outward normal derivative at a boundary point.
    pub fn exact_b(self, p: &[f64]) -> f64 {
        match self {
            Case::Interval | Case::Circle | Case::Sphere => 0.0,
            Case::Disk => 2.0 * (p[0] * p[0] - p[1] * p[1]),
        }
    }

    /// Ambient gradient of a smooth extension of `exact_u`; its tangential
    /// part is the intrinsic gradient.
    pub fn exact_gradient(self, p: &[f64]) -> Vec<f64> {
        match self {
            Case::Interval => vec![-PI * (PI * p[0]).sin()],
            Case::Circle => vec![1.0, 0.0],
            Case::Sphere => vec![0.0, 0.0, 1.0],
            Case::Disk => vec![2.0 * p[0], -2.0 * p[1]],
        }
    }

    /// `k` orthonormal ambient vectors spanning the tangent space at `p`.
    pub fn tangent_basis(self, p: &[f64]) -> Vec<Vec<f64>> {
        match self {
            Case::Interval => vec![vec![1.0]],
            Case::Circle => {
                let r = p[0].hypot(p[1]);
                vec![vec![-p[1] / r, p[0] / r]]
            }
            Case::Disk => vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            Case::Sphere => {
                let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let n = [p[0] / norm, p[1] / norm, p[2] / norm];
                let e = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
                let en = e[0] * n[0] + e[1] * n[1] + e[2] * n[2];
                let mut t1 = [e[0] - en * n[0], e[1] - en * n[1], e[2] - en * n[2]];
                let l = (t1[0] * t1[0] + t1[1] * t1[1] + t1[2] * t1[2]).sqrt();
                t1.iter_mut().for_each(|c| *c /= l);
                let t2 = [
                    n[1] * t1[2] - n[2] * t1[1],
                    n[2] * t1[0] - n[0] * t1[2],
                    n[0] * t1[1] - n[1] * t1[0],
                ];
                vec![t1.to_vec(), t2.to_vec()]
            }
        }
    }

    pub fn eval_exact(self, cloud: &PointCloud) -> ExactData {
        ExactData {
            u: cloud.points().map(|p| self.exact_u(p)).collect(),
            f: cloud.points().map(|p| self.exact_f(p)).collect(),
            b: (0..cloud.boundary_len()).map(|j| self.exact_b(cloud.boundary_point(j))).collect(),
        }
    }

    pub fn sample(self, n: usize, mode: SampleMode, seed: u64) -> Result<Sample> {
        if n < MIN_POINTS {
            return Err(Error::TooFewPoints { needed: MIN_POINTS, found: n });
        }
        let (cloud, h, h_mc) = match mode {
            SampleMode::Grid => {
                let (cloud, h) = match self {
                    Case::Interval => interval_grid(n)?,
                    Case::Circle => circle_grid(n)?,
                    Case::Sphere => sphere_grid(n)?,
                    Case::Disk => disk_grid(n)?,
                };
                (cloud, h, None)
            }
            SampleMode::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let cloud = match self {
                    Case::Interval => interval_random(n, &mut rng)?,
                    Case::Circle => circle_random(n, &mut rng)?,
                    Case::Sphere => sphere_random(n, &mut rng)?,
                    Case::Disk => disk_random(n, &mut rng)?,
                };
                let k = self.k() as f64;
                let h = self.volume().powf(1.0 / k) * (n as f64).powf(-1.0 / k);
                (cloud, h, Some((n as f64).powf(-0.5)))
            }
        };
        Ok(Sample { cloud, h, h_mc, requested_n: n })
    }

    /// Error of the reconstruction against `exact_u` on an independent grid
    /// of about `n_eval` points.
    pub fn error_norms(self, sol: &PimSolution, n_eval: usize) -> Result<ErrorNorms> {
        if sol.cloud().dim() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: sol.cloud().dim(),
            });
        }
        let eval = self.sample(n_eval, SampleMode::Grid, 0)?.cloud;
        let per_point: Vec<Result<Option<(f64, f64)>>> = (0..eval.len())
            .into_par_iter()
            .map(|i| {
                let p = eval.point(i);
                match sol.interpolate_with_gradient(p) {
                    Ok((val, grad)) => {
                        let e = self.exact_u(p) - val;
                        let ge: Vec<f64> = self.exact_gradient(p).iter().zip(&grad).map(|(a, b)| a - b).collect();
                        let tangential: f64 = self
                            .tangent_basis(p)
                            .iter()
                            .map(|t| t.iter().zip(&ge).map(|(a, b)| a * b).sum::<f64>().powi(2))
                            .sum();
                        Ok(Some((e, tangential)))
                    }
                    Err(Error::OutOfReach) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();

        let mut norms = ErrorNorms {
            linf: 0.0,
            l2: 0.0,
            h1: 0.0,
            skipped: 0,
            evaluated: 0,
        };
        for (item, w) in per_point.into_iter().zip(eval.volume_weights()) {
            match item? {
                Some((e, g2)) => {
                    norms.linf = norms.linf.max(e.abs());
                    norms.l2 += e * e * w;
                    norms.h1 += g2 * w;
                    norms.evaluated += 1;
                }
                None => norms.skipped += 1,
            }
        }
        norms.l2 = norms.l2.sqrt();
        norms.h1 = norms.h1.sqrt();
        Ok(norms)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown case `{s}` (expected interval|circle|sphere|disk)")))
    }
}

fn interval_grid(n: usize) -> Result<(PointCloud, f64)> {
    let h = 1.0 / (n - 1) as f64;
    let coords = (0..n).map(|i| i as f64 * h).collect();
    let mut v = vec![h; n];
    v[0] = h / 2.0;
    v[n - 1] = h / 2.0;
    Ok((PointCloud::new(1, 1, coords, v, vec![0, n - 1], vec![1.0, 1.0])?, h))
}

fn circle_grid(n: usize) -> Result<(PointCloud, f64)> {
    let coords = (0..n)
        .flat_map(|i| {
            let th = 2.0 * PI * i as f64 / n as f64;
            [th.cos(), th.sin()]
        })
        .collect();
    let h = 2.0 * (PI / n as f64).sin();
    Ok((PointCloud::closed(2, 1, coords, vec![2.0 * PI / n as f64; n])?, h))
}

/// Equal-area zonal partition: single-cell polar caps and latitude collars
/// whose cell counts come from equal-θ bands. An odd number of collars keeps
/// the partition mirror-symmetric about the equator; each point sits at its
/// collar's z-midpoint, so every cell has area exactly `4π/n`.
fn sphere_grid(n: usize) -> Result<(PointCloud, f64)> {
    let nf = n as f64;
    let cell = 4.0 * PI / nf;
    let theta_cap = (1.0 - 2.0 / nf).acos();
    let span = PI - 2.0 * theta_cap;
    let mut collars = ((span / cell.sqrt()).round() as usize).max(1);
    if collars.is_multiple_of(2) {
        collars += 1;
    }
    let half = collars / 2;
    let dtheta = span / collars as f64;

    let mut north = Vec::with_capacity(half);
    let (mut ideal, mut assigned) = (0.0, 0usize);
    for j in 0..half {
        let (a, b) = (theta_cap + j as f64 * dtheta, theta_cap + (j + 1) as f64 * dtheta);
        ideal += 2.0 * PI * (a.cos() - b.cos()) / cell;
        let target = (ideal.round() as usize).max(assigned + 1);
        north.push(target - assigned);
        assigned = target;
    }
    while 2 * assigned + 2 >= n {
        let (j, _) = north.iter().enumerate().max_by_key(|(_, c)| **c).expect("nonempty when n is small");
        north[j] -= 1;
        assigned -= 1;
        if north[j] == 0 {
            north.remove(j);
        }
    }
    let equator = n - 2 - 2 * assigned;

    // (z, count, phase) per ring from north pole to equator
    let mut rings = vec![(1.0, 1usize, 0.0)];
    let mut above = 1usize;
    for (j, &c) in north.iter().enumerate() {
        let top = 1.0 - 2.0 * above as f64 / nf;
        let bottom = 1.0 - 2.0 * (above + c) as f64 / nf;
        rings.push((0.5 * (top + bottom), c, if j % 2 == 1 { 0.5 } else { 0.0 }));
        above += c;
    }
    let eq_phase = if north.len() % 2 == 1 { 0.5 } else { 0.0 };

    let ring_points = |z: f64, count: usize, phase: f64, out: &mut Vec<f64>| {
        let s = (1.0 - z * z).max(0.0).sqrt();
        for i in 0..count {
            let phi = 2.0 * PI * (i as f64 + phase) / count as f64;
            out.extend_from_slice(&[s * phi.cos(), s * phi.sin(), z]);
        }
    };
    let mut coords = Vec::with_capacity(3 * n);
    for &(z, c, ph) in &rings {
        ring_points(z, c, ph, &mut coords);
    }
    ring_points(0.0, equator, eq_phase, &mut coords);
    for &(z, c, ph) in rings.iter().rev() {
        ring_points(-z, c, ph, &mut coords);
    }

    // spacing: within rings and between consecutive rings along a meridian
    let mut all: Vec<(f64, usize)> = rings.iter().map(|&(z, c, _)| (z, c)).collect();
    all.push((0.0, equator));
    let mut h: f64 = 0.0;
    for w in all.windows(2) {
        let (s0, s1) = ((1.0 - w[0].0 * w[0].0).sqrt(), (1.0 - w[1].0 * w[1].0).sqrt());
        h = h.max((s0 - s1).hypot(w[0].0 - w[1].0));
    }
    for &(z, c) in &all {
        if c > 1 {
            h = h.max(2.0 * (1.0 - z * z).sqrt() * (PI / c as f64).sin());
        }
    }
    Ok((PointCloud::closed(3, 2, coords, vec![cell; n])?, h))
}

fn disk_ring_count(i: usize) -> usize {
    (2.0 * PI * i as f64).round() as usize
}

/// Polar grid: a center point and rings at `r = i/N`, ring `i` holding about
/// `2πi` points. Interior rings own the annulus `[(i-½)/N, (i+½)/N]`, the
/// outer ring the strip `[(N-½)/N, 1]` and the center the disk of radius `1/2N`.
fn disk_grid(n: usize) -> Result<(PointCloud, f64)> {
    let total = |rings: usize| 1 + (1..=rings).map(disk_ring_count).sum::<usize>();
    let mut rings = 1;
    while total(rings + 1).abs_diff(n) < total(rings).abs_diff(n) {
        rings += 1;
    }
    let dr = 1.0 / rings as f64;
    let mut coords = vec![0.0, 0.0];
    let mut v = vec![PI * dr * dr / 4.0];
    let mut boundary = Vec::new();
    let mut h = dr;
    for i in 1..=rings {
        let count = disk_ring_count(i);
        let r = if i == rings { 1.0 } else { i as f64 * dr };
        let phase = if i % 2 == 1 { 0.5 } else { 0.0 };
        let area = if i == rings {
            PI * dr * dr * (rings as f64 - 0.25)
        } else {
            2.0 * PI * i as f64 * dr * dr
        };
        h = h.max(2.0 * r * (PI / count as f64).sin());
        for k in 0..count {
            let phi = 2.0 * PI * (k as f64 + phase) / count as f64;
            if i == rings {
                boundary.push(v.len());
            }
            coords.extend_from_slice(&[r * phi.cos(), r * phi.sin()]);
            v.push(area / count as f64);
        }
    }
    let a = vec![2.0 * PI / boundary.len() as f64; boundary.len()];
    Ok((PointCloud::new(2, 2, coords, v, boundary, a)?, h))
}

fn interval_random(n: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    let mut coords = vec![0.0, 1.0];
    coords.extend((2..n).map(|_| rng.gen_range(0.0..1.0)));
    PointCloud::new(1, 1, coords, vec![1.0 / n as f64; n], vec![0, 1], vec![1.0, 1.0])
}

fn circle_random(n: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    let coords = (0..n)
        .flat_map(|_| {
            let th: f64 = rng.gen_range(0.0..2.0 * PI);
            [th.cos(), th.sin()]
        })
        .collect();
    PointCloud::closed(2, 1, coords, vec![2.0 * PI / n as f64; n])
}

fn sphere_random(n: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    let coords = (0..n)
        .flat_map(|_| {
            let z: f64 = rng.gen_range(-1.0..=1.0);
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let s = (1.0 - z * z).sqrt();
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect();
    PointCloud::closed(3, 2, coords, vec![4.0 * PI / n as f64; n])
}

fn disk_random(n: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    // boundary density matched to the interior spacing
    let m = ((2.0 * (PI * n as f64).sqrt()).round() as usize).clamp(3, n - 1);
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..m {
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        coords.extend_from_slice(&[phi.cos(), phi.sin()]);
    }
    for _ in m..n {
        let r = rng.gen_range(0.0f64..1.0).sqrt();
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        coords.extend_from_slice(&[r * phi.cos(), r * phi.sin()]);
    }
    PointCloud::new(2, 2, coords, vec![PI / n as f64; n], (0..m).collect(), vec![2.0 * PI / m as f64; m])
}
