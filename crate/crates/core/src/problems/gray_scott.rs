use nalgebra::DMatrix;
use rand::Rng;

use super::{seeded_rng, GridSpec};
use crate::error::{Error, Result};
use crate::integrators::{Partition, PartitionedIvp};
use crate::operators::{IndexPermutation, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrayScottParams {
    pub d_u: f64,
    pub d_v: f64,
    pub d_p: f64,
    pub k1: f64,
    pub k2: f64,
    pub k_m1: f64,
    pub k_m2: f64,
    pub f: f64,
    pub tf: f64,
}

impl Default for GrayScottParams {
    fn default() -> Self {
        GrayScottParams {
            d_u: 2.0,
            d_v: 1.0,
            d_p: 0.1,
            k1: 1.0,
            k2: 0.055,
            k_m1: 0.001,
            k_m2: 0.001,
            f: 0.028,
            tf: 5.0,
        }
    }
}

/// Storage of the reaction Jacobian W^{2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReactionJacobian {
    /// Point-major 3x3 blocks wrapped in the species/point permutation.
    Permuted,
    /// One sparse matrix in species-major order.
    Plain,
}

fn reaction(p: &GrayScottParams, u: f64, v: f64, w: f64) -> [f64; 3] {
    let uv2 = p.k1 * u * v * v;
    let v3 = p.k_m1 * v * v * v;
    [
        -uv2 + p.f * (1.0 - u) + v3,
        uv2 - (p.f + p.k2) * v - v3 + p.k_m2 * w,
        -p.k_m2 * w - p.f * w,
    ]
}

fn reaction_jac(p: &GrayScottParams, u: f64, v: f64) -> [[f64; 3]; 3] {
    [
        [-p.k1 * v * v - p.f, -2.0 * p.k1 * u * v + 3.0 * p.k_m1 * v * v, 0.0],
        [p.k1 * v * v, 2.0 * p.k1 * u * v - (p.f + p.k2) - 3.0 * p.k_m1 * v * v, p.k_m2],
        [0.0, 0.0, -p.k_m2 - p.f],
    ]
}

/// Species-major index s*N + g gathered into point-major 3g + s.
fn species_to_points(n: usize) -> IndexPermutation {
    let mut fwd = vec![0; 3 * n];
    for g in 0..n {
        for s in 0..3 {
            fwd[3 * g + s] = s * n + g;
        }
    }
    IndexPermutation::new(fwd).expect("bijection")
}

/// Reaction Jacobian of the species-major state `y` (length 3N).
pub fn gray_scott_reaction_jacobian(p: &GrayScottParams, y: &[f64], kind: ReactionJacobian) -> LinearOperator {
    let n = y.len() / 3;
    match kind {
        ReactionJacobian::Permuted => {
            let blocks = (0..n)
                .map(|g| {
                    let j = reaction_jac(p, y[g], y[n + g]);
                    LinearOperator::dense(DMatrix::from_fn(3, 3, |r, c| j[r][c])).expect("square block")
                })
                .collect();
            LinearOperator::permuted(LinearOperator::block_diagonal(blocks), species_to_points(n)).expect("matching length")
        }
        ReactionJacobian::Plain => {
            let mut t = Vec::with_capacity(6 * n);
            for g in 0..n {
                let j = reaction_jac(p, y[g], y[n + g]);
                for (r, row) in j.iter().enumerate() {
                    for (c, &val) in row.iter().enumerate() {
                        if val != 0.0 {
                            t.push((r * n + g, c * n + g, val));
                        }
                    }
                }
            }
            LinearOperator::from_triplets(3 * n, &t).expect("indices in range")
        }
    }
}

/// Reversible Gray-Scott on the periodic unit square with nx^2 points per
/// species; the state is [U; V; P].
pub fn gray_scott(nx: usize, params: &GrayScottParams, kind: ReactionJacobian, seed: u64) -> Result<PartitionedIvp> {
    if nx < 8 {
        return Err(Error::contract(format!("Gray-Scott needs nx >= 8, got {nx}")));
    }
    let grid = GridSpec::periodic_unit_square(nx)?;
    let n = grid.len();
    let blocks = vec![
        grid.laplacian(params.d_u)?,
        grid.laplacian(params.d_v)?,
        grid.laplacian(params.d_p)?,
    ];
    let diffusion = LinearOperator::block_diagonal(blocks);

    let mut rng = seeded_rng(seed);
    let mut y0 = vec![0.0; 3 * n];
    y0[..n].iter_mut().for_each(|u| *u = 1.0);
    let (lo, hi) = (2 * nx / 5, 3 * nx / 5);
    for j in lo..hi {
        for i in lo..hi {
            let g = grid.index(i, j);
            y0[g] = 0.5 * (1.0 + 0.1 * rng.gen_range(-1.0..=1.0));
            y0[n + g] = 0.25 * (1.0 + 0.1 * rng.gen_range(-1.0..=1.0));
        }
    }

    let d1 = diffusion.clone();
    let w1 = diffusion.clone();
    let p1 = Partition::new(move |y, out| d1.apply_into(y, out), move |_| w1.clone())
        .with_split(diffusion.clone(), |_, out| out.iter_mut().for_each(|x| *x = 0.0));

    let pr = *params;
    let f2 = move |y: &[f64], out: &mut [f64]| {
        for g in 0..n {
            let r = reaction(&pr, y[g], y[n + g], y[2 * n + g]);
            out[g] = r[0];
            out[n + g] = r[1];
            out[2 * n + g] = r[2];
        }
    };
    let pj = *params;
    let p2 = Partition::new(f2, move |y| gray_scott_reaction_jacobian(&pj, y, kind)).with_split(LinearOperator::zero(3 * n), f2);

    let name = match kind {
        ReactionJacobian::Permuted => "gray-scott",
        ReactionJacobian::Plain => "gray-scott-plain",
    };
    PartitionedIvp::new(name, y0, 0.0, params.tf, vec![p1, p2])
}
