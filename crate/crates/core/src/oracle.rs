//! Test-only dense reference constructions, written directly from the
//! defining sums so they share no code path with the matrix-free operator.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{FourierField, GridShape, SpatialImage};

/// Dense stacked operator, row-major `m x n`.
pub(crate) fn dense_operator(shape: GridShape, shifts: &[f64]) -> Vec<Vec<Complex64>> {
    let (n1, n2, m1, m2) = (shape.n1(), shape.n2(), shape.m1(), shape.m2());
    let s = 1.0 / ((m1 * m2 * shifts.len()) as f64).sqrt();
    let mut rows = Vec::new();
    for &d in shifts {
        for k1 in 0..m1 {
            for k2 in 0..m2 {
                let mut row = Vec::with_capacity(n1 * n2);
                for i1 in 0..n1 {
                    for i2 in 0..n2 {
                        let mask = d * (i1 * i1 + i2 * i2) as f64;
                        let freq =
                            -TAU * ((k1 * i1) as f64 / m1 as f64 + (k2 * i2) as f64 / m2 as f64);
                        row.push(Complex64::from_polar(s, mask + freq));
                    }
                }
                rows.push(row);
            }
        }
    }
    rows
}

pub(crate) fn random_complex(shape: GridShape, seed: u64) -> SpatialImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..shape.spatial_len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    SpatialImage::complex(shape, v).unwrap()
}

/// Entries uniform in `[0.2, 1)`, so `|A x|` stays away from zero.
pub(crate) fn random_real(shape: GridShape, seed: u64) -> SpatialImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..shape.spatial_len())
        .map(|_| rng.random_range(0.2..1.0))
        .collect();
    SpatialImage::real(shape, v).unwrap()
}

pub(crate) fn random_fourier(shape: GridShape, patterns: usize, seed: u64) -> FourierField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..patterns * shape.fourier_len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    FourierField::new(shape, patterns, v).unwrap()
}
