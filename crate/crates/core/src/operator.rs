//! The matrix-free propagation operator: quadratic phase mask, zero padding
//! to the `2n1 x 2n2` grid, unitary 2-D DFT, and stacking of one or two
//! patterns. The normalization makes `A* A = I`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{FourierField, GridShape, SpatialImage};

/// Phase-shift coefficients, one per recorded diffraction pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    shifts: Vec<f64>,
}

impl MaskSpec {
    pub fn new(shifts: Vec<f64>) -> Result<Self> {
        match shifts.as_slice() {
            [d] if d.is_finite() => {}
            [d1, d2] if d1.is_finite() && d2.is_finite() => {
                if d1 == d2 {
                    return Err(Error::InvalidConfig(
                        "two-pattern mask needs distinct shifts".into(),
                    ));
                }
            }
            [_] | [_, _] => return Err(Error::InvalidConfig("phase shifts must be finite".into())),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "expected 1 or 2 phase shifts, got {}",
                    shifts.len()
                )))
            }
        }
        Ok(MaskSpec { shifts })
    }

    pub fn one(d: f64) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn two(d1: f64, d2: f64) -> Result<Self> {
        Self::new(vec![d1, d2])
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn patterns(&self) -> usize {
        self.shifts.len()
    }
}

/// The object-domain constraint set: real signals or unrestricted complex ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    RealLine,
    FullComplex,
}

impl ConstraintKind {
    /// The conventional choice: one pattern for real objects, two for complex.
    pub fn for_patterns(patterns: usize) -> Self {
        if patterns == 1 {
            ConstraintKind::RealLine
        } else {
            ConstraintKind::FullComplex
        }
    }

    /// Orthogonal projection onto the constraint set.
    pub fn project(&self, z: &SpatialImage) -> SpatialImage {
        match self {
            ConstraintKind::RealLine => z.real_part(),
            ConstraintKind::FullComplex => z.clone(),
        }
    }
}

/// `exp(i d (i1^2 + i2^2))` on the spatial grid, zero-based integer indices.
pub fn make_mask(shape: GridShape, d: f64) -> Vec<Complex64> {
    let mut mask = Vec::with_capacity(shape.spatial_len());
    for i1 in 0..shape.n1() {
        for i2 in 0..shape.n2() {
            let r2 = (i1 * i1 + i2 * i2) as f64;
            mask.push(Complex64::from_polar(1.0, d * r2));
        }
    }
    mask
}

#[derive(Clone)]
struct Plans {
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

#[derive(Clone)]
pub struct ForwardOperator {
    shape: GridShape,
    mask: MaskSpec,
    constraint: ConstraintKind,
    masks: Vec<Vec<Complex64>>,
    scale: f64,
    plans: Plans,
}

impl std::fmt::Debug for ForwardOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForwardOperator")
            .field("shape", &self.shape)
            .field("mask", &self.mask)
            .field("constraint", &self.constraint)
            .field("scale", &self.scale)
            .finish()
    }
}

impl ForwardOperator {
    pub fn new(shape: GridShape, mask: MaskSpec, constraint: ConstraintKind) -> Self {
        let mut planner = FftPlanner::new();
        let plans = Plans {
            row_fwd: planner.plan_fft_forward(shape.m2()),
            row_inv: planner.plan_fft_inverse(shape.m2()),
            col_fwd: planner.plan_fft_forward(shape.m1()),
            col_inv: planner.plan_fft_inverse(shape.m1()),
        };
        let masks = mask.shifts().iter().map(|&d| make_mask(shape, d)).collect();
        let scale = 1.0 / ((shape.fourier_len() * mask.patterns()) as f64).sqrt();
        ForwardOperator {
            shape,
            mask,
            constraint,
            masks,
            scale,
            plans,
        }
    }

    /// Operator with the constraint matched to the pattern count.
    pub fn for_case(shape: GridShape, mask: MaskSpec) -> Self {
        let constraint = ConstraintKind::for_patterns(mask.patterns());
        Self::new(shape, mask, constraint)
    }

    /// Multiplies the normalization by `s`. Only useful for exercising
    /// [`ForwardOperator::isometry_check`] on a deliberately broken operator.
    pub fn rescaled(mut self, s: f64) -> Self {
        self.scale *= s;
        self
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn mask(&self) -> &MaskSpec {
        &self.mask
    }

    pub fn constraint(&self) -> ConstraintKind {
        self.constraint
    }

    pub fn patterns(&self) -> usize {
        self.mask.patterns()
    }

    /// Total number of Fourier samples `m`.
    pub fn range_len(&self) -> usize {
        self.patterns() * self.shape.fourier_len()
    }

    pub fn constrain(&self, z: &SpatialImage) -> SpatialImage {
        self.constraint.project(z)
    }

    pub fn apply(&self, x: &SpatialImage) -> Result<FourierField> {
        if x.shape() != self.shape {
            return Err(Error::dimension(self.shape, x.shape()));
        }
        let (n1, n2) = (self.shape.n1(), self.shape.n2());
        let (m1, m2) = (self.shape.m1(), self.shape.m2());
        let plane = m1 * m2;
        let mut out = vec![Complex64::new(0.0, 0.0); self.range_len()];
        for (mask, buf) in self.masks.iter().zip(out.chunks_exact_mut(plane)) {
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    let k = i1 * n2 + i2;
                    buf[i1 * m2 + i2] = x.values()[k] * mask[k];
                }
            }
            self.fft2(buf, false);
            for v in buf.iter_mut() {
                *v *= self.scale;
            }
        }
        FourierField::new(self.shape, self.patterns(), out)
    }

    pub fn adjoint(&self, y: &FourierField) -> Result<SpatialImage> {
        if y.shape() != self.shape || y.patterns() != self.patterns() {
            return Err(Error::dimension(
                format!("{} x{}", self.shape, self.patterns()),
                format!("{} x{}", y.shape(), y.patterns()),
            ));
        }
        let (n1, n2) = (self.shape.n1(), self.shape.n2());
        let (m1, m2) = (self.shape.m1(), self.shape.m2());
        let plane = m1 * m2;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.shape.spatial_len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); plane];
        for (mask, chunk) in self.masks.iter().zip(y.values().chunks_exact(plane)) {
            buf.copy_from_slice(chunk);
            self.fft2(&mut buf, true);
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    let k = i1 * n2 + i2;
                    acc[k] += buf[i1 * m2 + i2] * mask[k].conj() * self.scale;
                }
            }
        }
        SpatialImage::complex(self.shape, acc)
    }

    /// Max over seeded random probes of `||A* A x - x|| / ||x||`.
    pub fn isometry_check(&self, trials: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..trials.max(1) {
            let values = (0..self.shape.spatial_len())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let x = SpatialImage::complex(self.shape, values)?;
            let back = self.adjoint(&self.apply(&x)?)?;
            let diff = back.axpy(Complex64::new(-1.0, 0.0), &x)?;
            worst = worst.max(diff.norm() / x.norm());
        }
        Ok(worst)
    }

    /// Unnormalized in-place 2-D DFT of a row-major `m1 x m2` buffer.
    fn fft2(&self, buf: &mut [Complex64], inverse: bool) {
        let (m1, m2) = (self.shape.m1(), self.shape.m2());
        let (rows, cols) = if inverse {
            (&self.plans.row_inv, &self.plans.col_inv)
        } else {
            (&self.plans.row_fwd, &self.plans.col_fwd)
        };
        let mut scratch = vec![
            Complex64::new(0.0, 0.0);
            rows.get_inplace_scratch_len()
                .max(cols.get_inplace_scratch_len())
        ];
        rows.process_with_scratch(buf, &mut scratch);

        let mut t = vec![Complex64::new(0.0, 0.0); m1 * m2];
        transpose(buf, &mut t, m1, m2);
        cols.process_with_scratch(&mut t, &mut scratch);
        transpose(&t, buf, m2, m1);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}
