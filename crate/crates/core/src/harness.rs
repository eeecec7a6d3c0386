//! End-to-end runs: sample → weights → assemble → solve → reconstruct → error
//! norms, plus convergence sweeps with log–log rate fits and CSV output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::interpolant::PimSolution;
use crate::kernel::{KernelSpec, Profile};
use crate::manifolds::{Case, SampleMode};
use crate::operator::{assemble_laplacian, assemble_rhs};
use crate::pointcloud::{estimate_weights_tangent_voronoi, estimate_weights_uniform, fmt_f64, PointCloud, VoronoiConfig};
use crate::solver::{solve, SolverOptions};

pub const CSV_HEADER: &str = "case,n,h,t,linf,l2,h1,iters,residual,converged,skipped,wall_ms";

/// Rule mapping the sampling scale `h` to the bandwidth `t = c·h^α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// `t = 2h`.
    Empirical,
    /// `t = c₀·h^{1/2}·|M|^{3/(2k)}` with `c₀ = THEORY_CONSTANT`; the volume
    /// factor makes `t` scale like a squared length.
    Theory,
    Power { c: f64, alpha: f64 },
}

impl Coupling {
    pub const THEORY_CONSTANT: f64 = 0.1;

    /// `(c, α)` of the rule for a given case.
    pub fn coefficients(self, case: Case) -> (f64, f64) {
        match self {
            Coupling::Empirical => (2.0, 1.0),
            Coupling::Theory => (
                Self::THEORY_CONSTANT * case.volume().powf(1.5 / case.k() as f64),
                0.5,
            ),
            Coupling::Power { c, alpha } => (c, alpha),
        }
    }

    pub fn bandwidth(self, case: Case, h: f64) -> f64 {
        let (c, alpha) = self.coefficients(case);
        c * h.powf(alpha)
    }

    fn validate(self) -> Result<()> {
        if let Coupling::Power { c, alpha } = self {
            if !(c > 0.0 && c.is_finite()) || !(alpha > 0.0 && alpha <= 2.0) {
                return Err(Error::InvalidArgument(format!(
                    "coupling needs c > 0 and α in (0, 2], got c={c}, α={alpha}"
                )));
            }
        }
        Ok(())
    }
}

impl FromStr for Coupling {
    type Err = Error;

    /// `empirical`, `theory` or `c,alpha`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(Coupling::Empirical),
            "theory" => Ok(Coupling::Theory),
            other => {
                let bad = || Error::InvalidArgument(format!("coupling `{other}` is not empirical|theory|c,alpha"));
                let (c, a) = other.split_once(',').ok_or_else(bad)?;
                let c = c.trim().parse().map_err(|_| bad())?;
                let alpha = a.trim().parse().map_err(|_| bad())?;
                let rule = Coupling::Power { c, alpha };
                rule.validate()?;
                Ok(rule)
            }
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Empirical => f.write_str("empirical"),
            Coupling::Theory => f.write_str("theory"),
            Coupling::Power { c, alpha } => write!(f, "{c},{alpha}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TRule {
    /// One bandwidth per entry of the `n` list (a single value applies to all).
    Explicit(Vec<f64>),
    Coupled(Coupling),
}

impl TRule {
    fn bandwidth(&self, case: Case, h: f64, index: usize) -> f64 {
        match self {
            TRule::Explicit(ts) => ts[index.min(ts.len() - 1)],
            TRule::Coupled(c) => c.bandwidth(case, h),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSource {
    /// Weights produced by the sampler.
    Exact,
    /// `|M|/n` and `|∂M|/m`.
    Uniform,
    /// Tangent-plane Voronoi estimate from the points alone.
    Voronoi,
}

impl FromStr for WeightSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(WeightSource::Exact),
            "uniform" => Ok(WeightSource::Uniform),
            "voronoi" => Ok(WeightSource::Voronoi),
            other => Err(Error::InvalidArgument(format!("unknown weight source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: Case,
    pub ns: Vec<usize>,
    pub t_rule: TRule,
    pub profile: Profile,
    pub mode: SampleMode,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub weights: WeightSource,
    /// Evaluation grid size; `None` means `16 n`.
    pub n_eval: Option<usize>,
}

impl RunConfig {
    pub fn new(case: Case, ns: Vec<usize>, t_rule: TRule) -> Self {
        Self {
            case,
            ns,
            t_rule,
            profile: Profile::WendlandC2,
            mode: SampleMode::Grid,
            seed: 0,
            tol: 1e-10,
            max_iter: None,
            weights: WeightSource::Exact,
            n_eval: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::InvalidArgument("n list must be nonempty and positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == Some(0) || self.n_eval == Some(0) {
            return Err(Error::InvalidArgument("max_iter and n_eval must be positive".into()));
        }
        match &self.t_rule {
            TRule::Explicit(ts) => {
                if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                    return Err(Error::InvalidArgument("bandwidths must be positive".into()));
                }
                if ts.len() != 1 && ts.len() != self.ns.len() {
                    return Err(Error::LengthMismatch {
                        what: "bandwidth list",
                        expected: self.ns.len(),
                        found: ts.len(),
                    });
                }
            }
            TRule::Coupled(c) => c.validate()?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub case: Case,
    pub profile: Profile,
    /// Actual number of points (structured grids may adjust the request).
    pub n: usize,
    pub h: f64,
    /// Monte Carlo scale `n^{-1/2}` in random mode.
    pub h_mc: Option<f64>,
    pub t: f64,
    pub linf: f64,
    pub l2: f64,
    pub h1: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub skipped: usize,
    pub discarded_mean: f64,
    pub wall_ms: u128,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.case,
            self.n,
            fmt_f64(self.h),
            fmt_f64(self.t),
            fmt_f64(self.linf),
            fmt_f64(self.l2),
            fmt_f64(self.h1),
            self.iterations,
            fmt_f64(self.residual),
            self.converged,
            self.skipped,
            self.wall_ms
        )
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Applies the configured weight source to a sampled cloud.
pub fn apply_weights(case: Case, cloud: PointCloud, source: WeightSource) -> Result<PointCloud> {
    let m = cloud.boundary_len();
    let (v, a) = match source {
        WeightSource::Exact => return Ok(cloud),
        WeightSource::Uniform => {
            let v = estimate_weights_uniform(cloud.len(), case.volume())?;
            let a = if m > 0 { estimate_weights_uniform(m, case.boundary_measure())? } else { vec![] };
            (v, a)
        }
        WeightSource::Voronoi => {
            let cfg = VoronoiConfig::default();
            let v = estimate_weights_tangent_voronoi(cloud.coords(), cloud.dim(), cloud.intrinsic_dim(), cfg)?;
            let a = match (m, case.k()) {
                (0, _) => vec![],
                // zero-dimensional boundary: counting measure
                (_, 1) => vec![1.0; m],
                _ => {
                    let coords: Vec<f64> = (0..m).flat_map(|j| cloud.boundary_point(j).to_vec()).collect();
                    estimate_weights_tangent_voronoi(&coords, cloud.dim(), case.k() - 1, cfg)?
                }
            };
            (v, a)
        }
    };
    cloud.with_weights(v, a)
}

/// One end-to-end solve at `n` points and bandwidth rule index `index`.
pub fn run_case(config: &RunConfig, index: usize) -> Result<ResultRow> {
    config.validate()?;
    let n = *config
        .ns
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("row index {index} out of range")))?;
    let start = Instant::now();
    let case = config.case;
    let sample = case.sample(n, config.mode, config.seed)?;
    let cloud = apply_weights(case, sample.cloud, config.weights)?;
    let t = config.t_rule.bandwidth(case, sample.h, index);
    let spec = KernelSpec::new(config.profile, t, case.k())?;
    let exact = case.eval_exact(&cloud);
    let op = assemble_laplacian(&cloud, &spec)?;
    let rhs = assemble_rhs(&cloud, &spec, &exact.f, &exact.b)?;
    let opts = SolverOptions {
        tol: config.tol,
        max_iter: config.max_iter,
        jacobi: false,
    };
    let (u, report) = solve(&op, &rhs, cloud.volume_weights(), &opts)?;
    let sol = PimSolution::new(&cloud, spec, u, exact.f, exact.b)?;
    let norms = case.error_norms(&sol, config.n_eval.unwrap_or(16 * cloud.len()))?;
    Ok(ResultRow {
        case,
        profile: config.profile,
        n: cloud.len(),
        h: sample.h,
        h_mc: sample.h_mc,
        t,
        linf: norms.linf,
        l2: norms.l2,
        h1: norms.h1,
        iterations: report.iterations,
        residual: report.final_relative_residual,
        converged: report.converged,
        skipped: norms.skipped,
        discarded_mean: report.discarded_mean,
        wall_ms: start.elapsed().as_millis(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slopes {
    pub linf: Option<f64>,
    pub l2: Option<f64>,
    pub h1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    /// Fits over converged rows; `None` with fewer than two of them.
    pub slopes: Slopes,
}

/// Runs every `n` of the config in order.
///
/// Rows run one after another; each row already parallelizes assembly,
/// products and error evaluation internally.
pub fn sweep(config: &RunConfig) -> Result<SweepResult> {
    config.validate()?;
    let rows = (0..config.ns.len())
        .map(|i| run_case(config, i))
        .collect::<Result<Vec<_>>>()?;
    let fit = |err: fn(&ResultRow) -> f64| -> Option<f64> {
        let pairs: Vec<(f64, f64)> = rows.iter().filter(|r| r.converged).map(|r| (r.h, err(r))).collect();
        fit_slope(&pairs).ok()
    };
    let slopes = Slopes {
        linf: fit(|r| r.linf),
        l2: fit(|r| r.l2),
        h1: fit(|r| r.h1),
    };
    Ok(SweepResult { rows, slopes })
}

/// Least-squares slope of `log error` against `log h`.
pub fn fit_slope(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: pairs.len(),
        });
    }
    if let Some((h, e)) = pairs.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0 && h.is_finite() && e.is_finite())) {
        return Err(Error::InvalidArgument(format!("slope fit needs positive finite data, got ({h}, {e})")));
    }
    let logs: Vec<(f64, f64)> = pairs.iter().map(|(h, e)| (h.ln(), e.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs at least two distinct h".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// `‖𝓛u_exact - (Σ R̄ f V + 2 Σ R̄ b A)‖∞`: how far the exact solution is from
/// satisfying the discrete equation.
pub fn consistency_residual(case: Case, cloud: &PointCloud, spec: &KernelSpec) -> Result<f64> {
    let exact = case.eval_exact(cloud);
    let op = assemble_laplacian(cloud, spec)?;
    let rhs = assemble_rhs(cloud, spec, &exact.f, &exact.b)?;
    let lu = op.apply(&exact.u)?;
    Ok(lu.iter().zip(&rhs).map(|(l, r)| (l + r).abs()).fold(0.0, f64::max))
}
