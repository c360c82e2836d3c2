//! Verification oracles. Nothing here is used by the fitting backends; these
//! exist so the `check` command and the test suites can cross-validate the
//! constrained solvers by an unrelated numerical route.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::optim::{minimize, BfgsOptions};

/// Penalty weight on squared block sums.
pub const PENALTY: f64 = 1e10;

/// Minimizes `‖y − Xβ‖² + 1e10 · Σ_B (Σ_{j∈B} β_j)²` with BFGS, starting from the
/// minimum-norm unconstrained least-squares solution.
pub fn oracle_constrained_ls(x: &DMatrix<f64>, y: &DVector<f64>, blocks: &[Vec<usize>]) -> Result<DVector<f64>> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let start = x
        .clone()
        .svd(true, true)
        .solve(y, 1e-12 * x.amax().max(1.0))
        .map_err(|e| Error::Config(e.to_string()))?;
    if blocks.is_empty() {
        return Ok(start);
    }

    let xtx = x.tr_mul(x);
    let xty = x.tr_mul(y);
    let yty = y.norm_squared();
    // Work with the objective divided by its initial scale so the gradient
    // tolerance is meaningful across problems.
    let scale = yty.max(1.0);
    let objective = |beta: &DVector<f64>| {
        let xtxb = &xtx * beta;
        let mut value = yty - 2.0 * xty.dot(beta) + beta.dot(&xtxb);
        let mut grad = (xtxb - &xty) * 2.0;
        for block in blocks {
            let s = compensated_sum(block.iter().map(|&j| beta[j]));
            value += PENALTY * s * s;
            for &j in block {
                grad[j] += 2.0 * PENALTY * s;
            }
        }
        (value / scale, grad / scale)
    };

    let opts = BfgsOptions {
        grad_tol: 1e-11,
        max_iter: 500,
        c2: 0.1,
        ..BfgsOptions::default()
    };
    let mut best = minimize(objective, start, &opts);
    // Restarting refreshes the inverse-Hessian approximation, which helps
    // when the first run stalls on the penalty's conditioning.
    for _ in 0..5 {
        if best.converged {
            break;
        }
        let again = minimize(objective, best.x.clone(), &opts);
        if again.value > best.value {
            break;
        }
        best = again;
    }
    // Along the block indicators the gradient carries rounding noise of order
    // PENALTY·ε·|β|; stationarity is judged on the complementary directions.
    let projected = project_off_blocks(&best.gradient, blocks);
    if !best.converged && projected.amax() > 1e-10 {
        return Err(Error::NonConvergence {
            grad_norm: projected.amax(),
            iterations: best.iterations,
        });
    }
    Ok(best.x)
}

/// Neumaier summation. Block sums near zero are multiplied by the penalty
/// weight, so plain summation error (ε·Σ|β|) would dominate the gradient.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

fn project_off_blocks(g: &DVector<f64>, blocks: &[Vec<usize>]) -> DVector<f64> {
    let mut out = g.clone();
    for block in blocks {
        let mean = block.iter().map(|&j| g[j]).sum::<f64>() / block.len() as f64;
        for &j in block {
            out[j] -= mean;
        }
    }
    out
}
