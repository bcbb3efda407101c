use super::GridSpec;
use crate::error::{Error, Result};
use crate::integrators::{Partition, PartitionedIvp};
use crate::operators::LinearOperator;

/// The adaptive-experiment settings: alpha = 1 with gamma 10, 100, 1000.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllenCahnPreset {
    I,
    II,
    III,
}

impl AllenCahnPreset {
    pub fn gamma(self) -> f64 {
        match self {
            AllenCahnPreset::I => 10.0,
            AllenCahnPreset::II => 100.0,
            AllenCahnPreset::III => 1000.0,
        }
    }
}

pub fn allen_cahn_preset(preset: AllenCahnPreset, nx: usize) -> Result<PartitionedIvp> {
    let mut ivp = allen_cahn(nx, 1.0, preset.gamma())?;
    ivp.name = format!("allen-cahn-{preset:?}");
    Ok(ivp)
}

/// u_t = alpha Lap u + gamma (u - u^3) on the periodic unit square, t in
/// [0, 0.5], partitioned into diffusion and reaction.
pub fn allen_cahn(nx: usize, alpha: f64, gamma: f64) -> Result<PartitionedIvp> {
    if nx < 8 {
        return Err(Error::contract(format!("Allen-Cahn needs nx >= 8, got {nx}")));
    }
    let grid = GridSpec::periodic_unit_square(nx)?;
    let lap = grid.laplacian(alpha)?;
    let mut y0 = vec![0.0; grid.len()];
    for j in 0..nx {
        for i in 0..nx {
            let (x, y) = grid.point(i, j);
            y0[grid.index(i, j)] = 0.4 + 0.1 * (x + y) + 0.1 * (10.0 * x).sin() * (20.0 * y).sin();
        }
    }

    let l1 = lap.clone();
    let w1 = lap.clone();
    let p1 = Partition::new(move |y, out| l1.apply_into(y, out), move |_| w1.clone())
        .with_split(lap.clone(), |_, out| out.iter_mut().for_each(|x| *x = 0.0));

    let f2 = move |y: &[f64], out: &mut [f64]| {
        for (o, &u) in out.iter_mut().zip(y) {
            *o = gamma * (u - u * u * u);
        }
    };
    let j2 = move |y: &[f64]| LinearOperator::diagonal(y.iter().map(|&u| gamma * (1.0 - 3.0 * u * u)).collect());
    let n = grid.len();
    let p2 = Partition::new(f2, j2).with_split(LinearOperator::zero(n), f2);

    PartitionedIvp::new("allen-cahn", y0, 0.0, 0.5, vec![p1, p2])
}
