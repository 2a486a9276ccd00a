use std::fmt;
use std::str::FromStr;

use densekrp::{DenseTensor, Error, FactorMatrix, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distribution {
    /// Independent draws from `[0, 1)`.
    #[default]
    Uniform,
    Ones,
}

impl FromStr for Distribution {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Distribution::Uniform),
            "ones" => Ok(Distribution::Ones),
            other => Err(BenchError::Usage(format!("unknown distribution {other:?}"))),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Uniform => "uniform",
            Distribution::Ones => "ones",
        })
    }
}

/// Seeded synthetic tensor. Entries are drawn in natural order, so the
/// content depends only on `dims`, `seed` and `dist`.
pub fn gen_tensor(dims: &[usize], seed: u64, dist: Distribution) -> Result<DenseTensor> {
    let shape = Shape::new(dims)?;
    let mut values = Vec::new();
    values
        .try_reserve_exact(shape.total())
        .map_err(|e| Error::Resource(format!("cannot allocate {} entries: {e}", shape.total())))?;
    match dist {
        Distribution::Ones => values.resize(shape.total(), 1.0),
        Distribution::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            values.extend((0..shape.total()).map(|_| rng.random::<f64>()));
        }
    }
    Ok(DenseTensor::new(shape, values)?)
}

/// Uniform factor matrices for benchmarking, seeded independently of the
/// tensor content.
pub fn gen_factors(dims: &[usize], rank: usize, seed: u64) -> Vec<FactorMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    dims.iter().map(|&d| FactorMatrix::random(d, rank, &mut rng)).collect()
}

/// Named benchmark shapes: fMRI-shaped tensors and equal-extent cubes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fmri3d,
    Fmri4d,
    Cube3,
    Cube4,
    Cube5,
    Cube6,
}

/// Entry count the desk-scale variants aim for.
pub const DESK_ENTRIES: f64 = 1e6;

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fmri3d,
        Preset::Fmri4d,
        Preset::Cube3,
        Preset::Cube4,
        Preset::Cube5,
        Preset::Cube6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fmri3d => "fmri3d",
            Preset::Fmri4d => "fmri4d",
            Preset::Cube3 => "cube3",
            Preset::Cube4 => "cube4",
            Preset::Cube5 => "cube5",
            Preset::Cube6 => "cube6",
        }
    }

    /// Full-size dimensions.
    pub fn dims(self) -> Vec<usize> {
        match self {
            // subjects x regions x region pairs (upper triangle of 200 x 200)
            Preset::Fmri3d => vec![225, 59, 19900],
            Preset::Fmri4d => vec![225, 59, 200, 200],
            Preset::Cube3 => vec![900; 3],
            Preset::Cube4 => vec![165; 4],
            Preset::Cube5 => vec![60; 5],
            Preset::Cube6 => vec![30; 6],
        }
    }

    /// Dimensions scaled uniformly to roughly [`DESK_ENTRIES`] entries,
    /// keeping aspect ratios and every extent at least 2.
    pub fn desk_dims(self) -> Vec<usize> {
        let dims = self.dims();
        let total: f64 = dims.iter().map(|&d| d as f64).product();
        let scale = (DESK_ENTRIES / total).powf(1.0 / dims.len() as f64);
        dims.iter().map(|&d| ((d as f64 * scale).round() as usize).max(2)).collect()
    }
}

impl FromStr for Preset {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| BenchError::Usage(format!("unknown preset {s:?}")))
    }
}
