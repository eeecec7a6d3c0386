//! Compactly supported kernel profiles and their scaled pairwise evaluation.
//!
//! A profile `R` is a C² function on `[0, ∞)` vanishing for `r > 1` and bounded
//! below on `[0, 1/2]`. At bandwidth `t` the pair kernel is
//! `R_t(x, y) = C_t R(|x - y|² / 4t)` with `C_t = (4πt)^{-k/2}`, and the tail
//! kernel `R̄_t` uses the antiderivative `R̄(r) = ∫_r^∞ R(s) ds` in place of `R`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    /// `(1 - r)₊⁴ (4r + 1)`.
    WendlandC2,
    /// `e^{-r}` multiplied by a quintic smoothstep cutoff on `[0.8, 1]`.
    TruncatedGaussian,
}

impl Profile {
    pub const ALL: [Profile; 2] = [Profile::WendlandC2, Profile::TruncatedGaussian];

    pub fn name(self) -> &'static str {
        match self {
            Profile::WendlandC2 => "wendland_c2",
            Profile::TruncatedGaussian => "truncated_gaussian",
        }
    }

    /// Lower bound of the profile on `[0, 1/2]`.
    pub fn delta0(self) -> f64 {
        match self {
            Profile::WendlandC2 => 0.1875,
            Profile::TruncatedGaussian => (-0.5f64).exp(),
        }
    }

    pub fn value(self, r: f64) -> f64 {
        match self {
            Profile::WendlandC2 => wendland::value(r),
            Profile::TruncatedGaussian => gaussian::value(r),
        }
    }

    pub fn derivative(self, r: f64) -> f64 {
        match self {
            Profile::WendlandC2 => wendland::derivative(r),
            Profile::TruncatedGaussian => gaussian::derivative(r),
        }
    }

    pub fn second_derivative(self, r: f64) -> f64 {
        match self {
            Profile::WendlandC2 => wendland::second_derivative(r),
            Profile::TruncatedGaussian => gaussian::second_derivative(r),
        }
    }

    /// Tail integral `∫_r^∞ R(s) ds`.
    pub fn tail(self, r: f64) -> f64 {
        match self {
            Profile::WendlandC2 => wendland::tail(r),
            Profile::TruncatedGaussian => gaussian::tail(r),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wendland_c2" | "wendland" => Ok(Profile::WendlandC2),
            "truncated_gaussian" | "gaussian" => Ok(Profile::TruncatedGaussian),
            other => Err(Error::InvalidArgument(format!("unknown kernel profile `{other}`"))),
        }
    }
}

mod wendland {
    pub fn value(r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - r;
        let s2 = s * s;
        s2 * s2 * (4.0 * r + 1.0)
    }

    pub fn derivative(r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - r;
        -20.0 * r * s * s * s
    }

    pub fn second_derivative(r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - r;
        s * s * (80.0 * r - 20.0)
    }

    /// `(1 - r)⁵ (1 + 2r) / 3`.
    pub fn tail(r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - r;
        let s2 = s * s;
        s2 * s2 * s * (1.0 + 2.0 * r) / 3.0
    }
}

mod gaussian {
    //! `R(r) = e^{-r} σ(r)` with `σ = 1 - S((r - 0.8) / 0.2)` on the taper and
    //! `S(q) = 10q³ - 15q⁴ + 6q⁵`.

    use std::sync::OnceLock;

    pub const TAPER_START: f64 = 0.8;
    pub const TAPER_WIDTH: f64 = 0.2;

    // Terms kept in the exponential series of the taper antiderivative;
    // 0.2^26 / 26! is far below f64 resolution.
    const SERIES_TERMS: usize = 26;

    fn smoothstep(q: f64) -> (f64, f64, f64) {
        let q2 = q * q;
        let s = q2 * q * (10.0 + q * (-15.0 + 6.0 * q));
        let ds = q2 * (30.0 + q * (-60.0 + 30.0 * q));
        let dds = q * (60.0 + q * (-180.0 + 120.0 * q));
        (s, ds, dds)
    }

    /// Cutoff and its first two derivatives with respect to `r`.
    fn cutoff(r: f64) -> (f64, f64, f64) {
        if r <= TAPER_START {
            (1.0, 0.0, 0.0)
        } else if r >= 1.0 {
            (0.0, 0.0, 0.0)
        } else {
            let q = (r - TAPER_START) / TAPER_WIDTH;
            let (s, ds, dds) = smoothstep(q);
            (
                1.0 - s,
                -ds / TAPER_WIDTH,
                -dds / (TAPER_WIDTH * TAPER_WIDTH),
            )
        }
    }

    pub fn value(r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        (-r).exp() * cutoff(r).0
    }

    pub fn derivative(r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let (s, ds, _) = cutoff(r);
        (-r).exp() * (ds - s)
    }

    pub fn second_derivative(r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let (s, ds, dds) = cutoff(r);
        (-r).exp() * (dds - 2.0 * ds + s)
    }

    /// Coefficients (ascending powers of `q`) of `G(q) = ∫_0^q e^{-wq'} (1 - S(q')) dq'`
    /// with `w` the taper width; the product is expanded exactly except for the
    /// truncated exponential series.
    fn taper_antiderivative() -> &'static [f64] {
        static COEFFS: OnceLock<Vec<f64>> = OnceLock::new();
        COEFFS.get_or_init(|| {
            let mut exp_series = vec![0.0; SERIES_TERMS];
            exp_series[0] = 1.0;
            for k in 1..SERIES_TERMS {
                exp_series[k] = exp_series[k - 1] * (-TAPER_WIDTH) / k as f64;
            }
            let one_minus_s = [1.0, 0.0, 0.0, -10.0, 15.0, -6.0];
            let mut product = vec![0.0; SERIES_TERMS + one_minus_s.len() - 1];
            for (i, a) in exp_series.iter().enumerate() {
                for (j, b) in one_minus_s.iter().enumerate() {
                    product[i + j] += a * b;
                }
            }
            let mut integral = vec![0.0; product.len() + 1];
            for (p, c) in product.iter().enumerate() {
                integral[p + 1] = c / (p + 1) as f64;
            }
            integral
        })
    }

    fn horner(coeffs: &[f64], q: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, c| acc * q + c)
    }

    fn taper_tail(q: f64) -> f64 {
        let g = taper_antiderivative();
        TAPER_WIDTH * (-TAPER_START).exp() * (horner(g, 1.0) - horner(g, q))
    }

    pub fn tail(r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else if r >= TAPER_START {
            taper_tail((r - TAPER_START) / TAPER_WIDTH)
        } else {
            (-r).exp() - (-TAPER_START).exp() + taper_tail(0.0)
        }
    }
}

/// Kernel profile together with bandwidth and intrinsic dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    profile: Profile,
    t: f64,
    k: usize,
    c_t: f64,
}

impl KernelSpec {
    pub fn new(profile: Profile, t: f64, k: usize) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidArgument(format!("bandwidth t must be positive, got {t}")));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("intrinsic dimension must be positive".into()));
        }
        let c_t = (4.0 * PI * t).powf(-(k as f64) / 2.0);
        Ok(Self { profile, t, k, c_t })
    }

    pub fn wendland(t: f64, k: usize) -> Result<Self> {
        Self::new(Profile::WendlandC2, t, k)
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta0(&self) -> f64 {
        self.profile.delta0()
    }

    /// Normalization `(4πt)^{-k/2}`.
    pub fn normalization(&self) -> f64 {
        self.c_t
    }

    /// Support radius `2√t` in ambient distance.
    pub fn support_radius(&self) -> f64 {
        2.0 * self.t.sqrt()
    }

    pub fn eval_profile(&self, r: f64) -> f64 {
        self.profile.value(r)
    }

    pub fn eval_profile_derivative(&self, r: f64) -> f64 {
        self.profile.derivative(r)
    }

    pub fn eval_bar(&self, r: f64) -> f64 {
        self.profile.tail(r)
    }

    /// Profile argument `|x - y|² / 4t` for a squared distance.
    #[inline]
    pub fn scaled(&self, dist2: f64) -> f64 {
        dist2 / (4.0 * self.t)
    }

    /// `(R_t, R̄_t)` for a squared distance.
    #[inline]
    pub fn pair_from_dist2(&self, dist2: f64) -> (f64, f64) {
        let r = self.scaled(dist2);
        if r > 1.0 {
            return (0.0, 0.0);
        }
        (self.c_t * self.profile.value(r), self.c_t * self.profile.tail(r))
    }

    pub fn pair_kernel(&self, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        Ok(self.pair_from_dist2(dist2(x, y)))
    }
}

#[inline]
pub fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}
