//! Benchmark IVPs with their partitions and Jacobian approximations.

mod allen_cahn;
mod gray_scott;
mod lorenz96;
mod semilinear;

pub use allen_cahn::{allen_cahn, allen_cahn_preset, AllenCahnPreset};
pub use gray_scott::{gray_scott, gray_scott_reaction_jacobian, GrayScottParams, ReactionJacobian};
pub use lorenz96::{lorenz96, lorenz96_jacobian, lorenz96_rhs, lorenz96_unspun};
pub use semilinear::{semilinear_exact, semilinear_parabolic};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::integrators::PartitionedIvp;
use crate::operators::LinearOperator;

pub const DEFAULT_SEED: u64 = 42;

/// Seeded generator shared by every randomized construction.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    DirichletZero,
}

/// Uniform tensor grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lengths: (f64, f64),
    pub bc: Boundary,
}

impl GridSpec {
    pub fn periodic_unit_square(n: usize) -> Result<Self> {
        let g = GridSpec {
            nx: n,
            ny: n,
            lengths: (1.0, 1.0),
            bc: Boundary::Periodic,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::contract(format!("grid {}x{} is below 3x3", self.nx, self.ny)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> (f64, f64) {
        match self.bc {
            Boundary::Periodic => (self.lengths.0 / self.nx as f64, self.lengths.1 / self.ny as f64),
            Boundary::DirichletZero => (self.lengths.0 / (self.nx + 1) as f64, self.lengths.1 / (self.ny + 1) as f64),
        }
    }

    /// Coordinates of grid point (i, j); x varies with i.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let (dx, dy) = self.spacing();
        match self.bc {
            Boundary::Periodic => (i as f64 * dx, j as f64 * dy),
            Boundary::DirichletZero => ((i + 1) as f64 * dx, (j + 1) as f64 * dy),
        }
    }

    /// Linear index, x fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Scaled five-point Laplacian as a symmetric sparse operator.
    pub fn laplacian(&self, coeff: f64) -> Result<LinearOperator> {
        let (dx, dy) = self.spacing();
        let (cx, cy) = (coeff / (dx * dx), coeff / (dy * dy));
        let mut t = Vec::with_capacity(5 * self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = self.index(i, j);
                t.push((k, k, -2.0 * (cx + cy)));
                for (di, dj, c) in [(1isize, 0isize, cx), (-1, 0, cx), (0, 1, cy), (0, -1, cy)] {
                    if let Some(nb) = self.neighbor(i, j, di, dj) {
                        t.push((k, nb, c));
                    }
                }
            }
        }
        LinearOperator::from_triplets(self.len(), &t)
    }

    fn neighbor(&self, i: usize, j: usize, di: isize, dj: isize) -> Option<usize> {
        let (ni, nj) = (i as isize + di, j as isize + dj);
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        match self.bc {
            Boundary::Periodic => Some(self.index(ni.rem_euclid(nx) as usize, nj.rem_euclid(ny) as usize)),
            Boundary::DirichletZero => (ni >= 0 && ni < nx && nj >= 0 && nj < ny).then(|| self.index(ni as usize, nj as usize)),
        }
    }
}

/// Problem names accepted by [`build`].
pub const PROBLEM_NAMES: [&str; 4] = ["lorenz96", "semilinear", "allen-cahn", "gray-scott"];

/// Named presets on top of the four problems.
pub const PRESET_NAMES: [&str; 4] = ["allen-cahn-I", "allen-cahn-II", "allen-cahn-III", "gray-scott-plain"];

/// Size parameters for the catalog. `None` picks the desk-scale default,
/// or the paper's size when `paper_scale` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub size: Option<usize>,
    pub seed: u64,
    pub paper_scale: bool,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            size: None,
            seed: DEFAULT_SEED,
            paper_scale: false,
        }
    }
}

pub fn build(name: &str, params: &ProblemParams) -> Result<PartitionedIvp> {
    let size = |desk: usize, paper: usize| params.size.unwrap_or(if params.paper_scale { paper } else { desk });
    match name {
        "lorenz96" => lorenz96(size(40, 40), 8.0, params.seed),
        "semilinear" => semilinear_parabolic(size(500, 500)),
        "allen-cahn" => allen_cahn(size(64, 150), 1.0, 10.0),
        "allen-cahn-I" => allen_cahn_preset(AllenCahnPreset::I, size(64, 300)),
        "allen-cahn-II" => allen_cahn_preset(AllenCahnPreset::II, size(64, 300)),
        "allen-cahn-III" => allen_cahn_preset(AllenCahnPreset::III, size(64, 300)),
        "gray-scott" => gray_scott(size(50, 100), &GrayScottParams::default(), ReactionJacobian::Permuted, params.seed),
        "gray-scott-plain" => gray_scott(size(50, 100), &GrayScottParams::default(), ReactionJacobian::Plain, params.seed),
        _ => Err(Error::UnknownProblem {
            name: name.to_string(),
            available: PROBLEM_NAMES.iter().chain(PRESET_NAMES.iter()).map(|s| s.to_string()).collect(),
        }),
    }
}
