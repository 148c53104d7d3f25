//! Fourier-domain constraint projections.
//!
//! `P1 y = A [A* y]_X` projects onto the image of the object constraint set,
//! `P2 y = b . y / |y|` onto the measured-magnitude set. Entries with `y = 0`
//! map to 0 under `P2`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{FourierField, GridShape};
use crate::operator::ForwardOperator;

/// Measured Fourier magnitudes `b >= 0` on the stacked oversampled grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeData {
    shape: GridShape,
    patterns: usize,
    values: Vec<f64>,
}

impl MagnitudeData {
    pub fn new(shape: GridShape, patterns: usize, values: Vec<f64>) -> Result<Self> {
        let expected = patterns * shape.fourier_len();
        if values.len() != expected {
            return Err(Error::dimension(expected, values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidData(format!(
                "magnitude at index {i} is {} (must be finite and >= 0)",
                values[i]
            )));
        }
        Ok(MagnitudeData {
            shape,
            patterns,
            values,
        })
    }

    /// `|y|` elementwise.
    pub fn from_field(y: &FourierField) -> Self {
        MagnitudeData {
            shape: y.shape(),
            patterns: y.patterns(),
            values: y.magnitudes(),
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn patterns(&self) -> usize {
        self.patterns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `|| |y| - b || / ||b||`.
    pub fn residual(&self, y: &FourierField) -> Result<f64> {
        self.check(y)?;
        let num = y
            .values()
            .iter()
            .zip(&self.values)
            .map(|(v, b)| (v.norm() - b).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(num / self.norm())
    }

    fn check(&self, y: &FourierField) -> Result<()> {
        if y.shape() != self.shape || y.patterns() != self.patterns {
            return Err(Error::dimension(
                format!("{} x{}", self.shape, self.patterns),
                format!("{} x{}", y.shape(), y.patterns()),
            ));
        }
        Ok(())
    }
}

/// `A [A* y]_X`.
pub fn project_range(op: &ForwardOperator, y: &FourierField) -> Result<FourierField> {
    let z = op.adjoint(y)?;
    op.apply(&op.constrain(&z))
}

/// `b . y/|y|`, with 0 wherever `y` vanishes.
pub fn project_magnitude(b: &MagnitudeData, y: &FourierField) -> Result<FourierField> {
    b.check(y)?;
    let values = y
        .values()
        .iter()
        .zip(b.values())
        .map(|(&v, &bj)| unit_phase(v) * bj)
        .collect();
    FourierField::new(y.shape(), y.patterns(), values)
}

/// `y/|y|` with the zero convention.
pub(crate) fn unit_phase(v: Complex64) -> Complex64 {
    let r = v.norm();
    if r == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        v / r
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Projection<'a> {
    Range(&'a ForwardOperator),
    Magnitude(&'a MagnitudeData),
}

impl Projection<'_> {
    pub fn apply(&self, y: &FourierField) -> Result<FourierField> {
        match self {
            Projection::Range(op) => project_range(op, y),
            Projection::Magnitude(b) => project_magnitude(b, y),
        }
    }
}

/// `2 P y - y`.
pub fn reflect(p: Projection<'_>, y: &FourierField) -> Result<FourierField> {
    let py = p.apply(y)?;
    py.zip_with(y, |a, b| 2.0 * a - b)
}
