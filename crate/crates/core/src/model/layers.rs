//! Graph layers over a batch of graphs that share one topology.
//!
//! Node states are stored as `[B * n, d]`: rows `b*n .. (b+1)*n` belong to
//! sample `b`. Topology enters through an `n x n` neighbor matrix `M` with
//! `M[i][j] = 1` iff `j` is a neighbor of `i`, so the neighbor sum for every
//! sample is a single `block_matmul(M, H)`.

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

use super::config::NeighborMode;

/// Neighbor matrix from a row-major `n x n` adjacency where
/// `adjacency[i][j] > 0` means `i` drives `j`.
///
/// With `use_causality == false` the result is the complete graph without
/// self loops, regardless of `adjacency` (which still fixes `n`).
pub fn neighbor_matrix(
    adjacency: &[f64],
    n: usize,
    use_causality: bool,
    mode: NeighborMode,
) -> Result<Tensor> {
    if adjacency.len() != n * n {
        return Err(Error::Shape {
            op: "neighbor_matrix",
            lhs: vec![n, n],
            rhs: vec![adjacency.len()],
        });
    }
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let edge = if !use_causality {
                true
            } else {
                let into_i = adjacency[j * n + i] > 0.0;
                match mode {
                    NeighborMode::Causes => into_i,
                    NeighborMode::Symmetric => into_i || adjacency[i * n + j] > 0.0,
                }
            };
            if edge {
                m[i * n + j] = 1.0;
            }
        }
    }
    Tensor::matrix(n, n, m)
}

/// `relu(H W_self + M H W_neigh)`; without `activate` the ReLU is skipped.
pub fn kgnn_layer(
    tape: &mut Tape,
    h: Var,
    mix: Var,
    w_self: Var,
    w_neigh: Var,
    activate: bool,
) -> Result<Var> {
    let own = tape.matmul(h, w_self)?;
    let msg = tape.matmul(h, w_neigh)?;
    let agg = tape.block_matmul(mix, msg)?;
    let out = tape.add(own, agg)?;
    Ok(if activate { tape.relu(out) } else { out })
}

#[derive(Clone, Copy, Debug)]
pub struct GinVars {
    pub eps: Var,
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

/// `MLP((1 + eps) H + M H)` with `MLP(z) = relu(z W1 + b1) W2 + b2`.
pub fn gin_layer(tape: &mut Tape, h: Var, mix: Var, p: GinVars) -> Result<Var> {
    let rows = tape.shape(h)[0];
    let scaled = tape.mul(p.eps, h)?;
    let self_term = tape.add(h, scaled)?;
    let neigh = tape.block_matmul(mix, h)?;
    let agg = tape.add(self_term, neigh)?;
    let ones = tape.constant(Tensor::matrix(rows, 1, vec![1.0; rows])?);
    let z = tape.matmul(agg, p.w1)?;
    let bias1 = tape.matmul(ones, p.b1)?;
    let z = tape.add(z, bias1)?;
    let z = tape.relu(z);
    let out = tape.matmul(z, p.w2)?;
    let bias2 = tape.matmul(ones, p.b2)?;
    tape.add(out, bias2)
}
