//! Projected conjugate gradients for the singular Neumann system.
//!
//! `𝓛` has the constants as its null space. The system `-𝓛u = rhs` is made
//! consistent by removing the `V`-weighted mean of `rhs`, symmetrized by
//! multiplying with `D_V = diag(V)`, and solved by CG with every iterate
//! projected onto `{u : Σ u_i V_i = 0}`.

use crate::error::{Error, Result};
use crate::operator::{check_len, DiscreteOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target for `‖D_V(𝓛u + rhs_p)‖₂ / ‖D_V rhs_p‖₂`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 n`.
    pub max_iter: Option<usize>,
    /// Diagonal preconditioning with `diag(D_V 𝓛)`.
    pub jacobi: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            jacobi: false,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_relative_residual: f64,
    /// `|Σ u_i V_i| / Σ V_i` of the returned iterate.
    pub constraint_residual: f64,
    /// `V`-weighted mean removed from `rhs` before solving. Large values mean
    /// the data were far from compatible.
    pub discarded_mean: f64,
    pub converged: bool,
}

/// Subtracts the `V`-weighted mean in place.
pub fn project_mean_zero(u: &mut [f64], v: &[f64]) {
    let total: f64 = v.iter().sum();
    let mean = u.iter().zip(v).map(|(a, w)| a * w).sum::<f64>() / total;
    for x in u.iter_mut() {
        *x -= mean;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `D_V 𝓛 x`.
fn apply_symmetric(op: &DiscreteOperator, v: &[f64], x: &[f64], out: &mut [f64]) -> Result<()> {
    op.apply_into(x, out)?;
    for (o, w) in out.iter_mut().zip(v) {
        *o *= w;
    }
    Ok(())
}

/// Solves `-𝓛u = rhs` subject to `Σ u_i V_i = 0`.
///
/// Returns the best iterate with `converged = false` when the iteration cap
/// is reached; fails on non-finite input or iterates.
pub fn solve(op: &DiscreteOperator, rhs: &[f64], v: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    let n = op.len();
    check_len("right-hand side", n, rhs.len())?;
    check_len("volume weights", n, v.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if rhs.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("solver input"));
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n);
    let total_v: f64 = v.iter().sum();

    let mut projected = rhs.to_vec();
    let discarded_mean = dot(rhs, v) / total_v;
    project_mean_zero(&mut projected, v);
    // D_V 𝓛 u = -D_V rhs_p
    let b: Vec<f64> = projected.iter().zip(v).map(|(r, w)| -r * w).collect();
    let b_norm = dot(&b, &b).sqrt();

    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                final_relative_residual: 0.0,
                constraint_residual: 0.0,
                discarded_mean,
                converged: true,
            },
        ));
    }

    let precond: Option<Vec<f64>> = opts.jacobi.then(|| {
        op.diagonal()
            .iter()
            .zip(v)
            .map(|(d, w)| if d * w > 0.0 { 1.0 / (d * w) } else { 1.0 })
            .collect()
    });
    let precondition = |r: &[f64], z: &mut [f64]| match &precond {
        Some(m) => z.iter_mut().zip(r).zip(m).for_each(|((z, r), m)| *z = r * m),
        None => z.copy_from_slice(r),
    };

    let mut r = b.clone();
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    let mut best = x.clone();
    let mut best_res = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        apply_symmetric(op, v, &p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(Error::NonFinite("conjugate gradient iterate"));
        }
        if pap <= 0.0 {
            // Search direction fell into the null space; nothing left to reduce.
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project_mean_zero(&mut x, v);
        let res = dot(&r, &r).sqrt() / b_norm;
        if !res.is_finite() {
            return Err(Error::NonFinite("conjugate gradient residual"));
        }
        if res < best_res {
            best_res = res;
            best.copy_from_slice(&x);
        }
        if res <= opts.tol {
            // Confirm with the true residual; restart from it if recursion drifted.
            let true_res = true_residual(op, v, &x, &b, &mut r)? / b_norm;
            if true_res <= opts.tol {
                converged = true;
                best.copy_from_slice(&x);
                break;
            }
            best_res = true_res;
            precondition(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let mut scratch = vec![0.0; n];
    let final_relative_residual = true_residual(op, v, &best, &b, &mut scratch)? / b_norm;
    let constraint_residual = dot(&best, v).abs() / total_v;
    Ok((
        best,
        SolveReport {
            iterations,
            final_relative_residual,
            constraint_residual,
            discarded_mean,
            converged: converged && final_relative_residual <= opts.tol,
        },
    ))
}

/// Writes `b - D_V 𝓛 x` into `r` and returns its norm.
fn true_residual(op: &DiscreteOperator, v: &[f64], x: &[f64], b: &[f64], r: &mut [f64]) -> Result<f64> {
    apply_symmetric(op, v, x, r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(dot(r, r).sqrt())
}
