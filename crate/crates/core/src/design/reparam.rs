//! Maps between zero-sum (constrained) coefficients and free coordinates, and
//! between per-part slopes and the compositional/total decomposition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO_SUM_TOL: f64 = 1e-8;

/// Splits per-part slopes `gamma_j = beta_j + beta_t` into a zero-sum vector
/// and the common total effect `beta_t = mean(gamma)`.
pub fn decompose_total(gamma: &[f64]) -> (Vec<f64>, f64) {
    let beta_t = gamma.iter().sum::<f64>() / gamma.len() as f64;
    (gamma.iter().map(|g| g - beta_t).collect(), beta_t)
}

pub fn recompose_total(beta: &[f64], beta_t: f64) -> Result<Vec<f64>> {
    let sum: f64 = beta.iter().sum();
    if sum.abs() > ZERO_SUM_TOL {
        return Err(Error::NotZeroSum { sum });
    }
    Ok(beta.iter().map(|b| b + beta_t).collect())
}

/// How a zero-sum block of size `D` is parameterized by `D - 1` free values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockReduction {
    /// Helmert basis of the orthogonal complement of the ones vector.
    #[default]
    Orthonormal,
    /// Free values are the coefficients of every part except the given
    /// position within the block, which is minus their sum (alr-style).
    Reference(usize),
}

/// `m x p` matrix whose rows are the block indicator vectors.
pub fn constraint_matrix(p: usize, blocks: &[Vec<usize>]) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(blocks.len(), p);
    for (r, block) in blocks.iter().enumerate() {
        for &j in block {
            c[(r, j)] = 1.0;
        }
    }
    c
}

/// `p x (p - m)` matrix `M` with `C M = 0` and full column rank, so every
/// coefficient vector satisfying the constraints is `M γ` for a unique `γ`.
/// Unconstrained columns map through the identity, in their original order;
/// each block's free coordinates take the slot of the block's first member.
pub fn constraint_basis(p: usize, blocks: &[Vec<usize>], reduction: BlockReduction) -> Result<DMatrix<f64>> {
    let mut in_block = vec![None; p];
    for (b, block) in blocks.iter().enumerate() {
        if block.len() < 2 {
            return Err(Error::UnknownBlock(format!("block {b} has fewer than 2 members")));
        }
        if let BlockReduction::Reference(r) = reduction {
            if r >= block.len() {
                return Err(Error::RefIndexOutOfRange {
                    index: r,
                    parts: block.len(),
                });
            }
        }
        for &j in block {
            in_block[j] = Some(b);
        }
    }

    let free = p - blocks.len();
    let mut m = DMatrix::zeros(p, free);
    let mut col = 0;
    for j in 0..p {
        match in_block[j] {
            None => {
                m[(j, col)] = 1.0;
                col += 1;
            }
            Some(b) if blocks[b][0] == j => {
                let block = &blocks[b];
                let d = block.len();
                match reduction {
                    BlockReduction::Orthonormal => {
                        for k in 1..d {
                            let scale = 1.0 / ((k * (k + 1)) as f64).sqrt();
                            for &member in &block[..k] {
                                m[(member, col)] = scale;
                            }
                            m[(block[k], col)] = -(k as f64) * scale;
                            col += 1;
                        }
                    }
                    BlockReduction::Reference(r) => {
                        for (pos, &member) in block.iter().enumerate() {
                            if pos == r {
                                continue;
                            }
                            m[(member, col)] = 1.0;
                            m[(block[r], col)] = -1.0;
                            col += 1;
                        }
                    }
                }
            }
            Some(_) => {}
        }
    }
    debug_assert_eq!(col, free);
    Ok(m)
}

/// Sum of the coefficients in each block.
pub fn block_sums(coefficients: &DVector<f64>, blocks: &[Vec<usize>]) -> Vec<f64> {
    blocks
        .iter()
        .map(|b| b.iter().map(|&j| coefficients[j]).sum())
        .collect()
}
