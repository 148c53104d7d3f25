//! Grid geometry, complex field containers and the alignment metrics
//! (global-phase distance and relative error) shared by every other module.
//!
//! Fields are stored as row-major sequences of `Complex64`; the first grid
//! index varies slowest.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Spatial grid `n1 x n2` together with its oversampled Fourier grid
/// `m1 x m2`, where `m_j = 2 n_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    n1: usize,
    n2: usize,
}

impl GridShape {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid must be at least 2x2, got {n1}x{n2}"
            )));
        }
        Ok(GridShape { n1, n2 })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn m1(&self) -> usize {
        2 * self.n1
    }

    pub fn m2(&self) -> usize {
        2 * self.n2
    }

    /// Number of spatial pixels `n = n1 n2`.
    pub fn spatial_len(&self) -> usize {
        self.n1 * self.n2
    }

    /// Number of samples on one oversampled Fourier grid.
    pub fn fourier_len(&self) -> usize {
        self.m1() * self.m2()
    }
}

impl std::fmt::Display for GridShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.n1, self.n2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Real,
    Complex,
}

/// A field on the spatial grid. Real-kind images carry exactly zero
/// imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialImage {
    shape: GridShape,
    kind: FieldKind,
    values: Vec<Complex64>,
}

impl SpatialImage {
    pub fn real(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        check_len(shape.spatial_len(), values.len())?;
        Ok(SpatialImage {
            shape,
            kind: FieldKind::Real,
            values: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        })
    }

    pub fn complex(shape: GridShape, values: Vec<Complex64>) -> Result<Self> {
        check_len(shape.spatial_len(), values.len())?;
        Ok(SpatialImage {
            shape,
            kind: FieldKind::Complex,
            values,
        })
    }

    pub fn zeros(shape: GridShape, kind: FieldKind) -> Self {
        SpatialImage {
            shape,
            kind,
            values: vec![Complex64::new(0.0, 0.0); shape.spatial_len()],
        }
    }

    /// The constant-ones image used as the default starting point.
    pub fn ones(shape: GridShape) -> Self {
        SpatialImage {
            shape,
            kind: FieldKind::Real,
            values: vec![Complex64::new(1.0, 0.0); shape.spatial_len()],
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, i1: usize, i2: usize) -> Complex64 {
        self.values[i1 * self.shape.n2 + i2]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// `c * self`. The result stays real only when `c` is real and `self` is real.
    pub fn scaled(&self, c: Complex64) -> Self {
        let kind = if self.kind == FieldKind::Real && c.im == 0.0 {
            FieldKind::Real
        } else {
            FieldKind::Complex
        };
        SpatialImage {
            shape: self.shape,
            kind,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: Complex64, other: &SpatialImage) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::dimension(self.shape, other.shape));
        }
        let kind =
            if self.kind == FieldKind::Real && other.kind == FieldKind::Real && alpha.im == 0.0 {
                FieldKind::Real
            } else {
                FieldKind::Complex
            };
        Ok(SpatialImage {
            shape: self.shape,
            kind,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        })
    }

    /// Elementwise real part, tagged real.
    pub fn real_part(&self) -> Self {
        SpatialImage {
            shape: self.shape,
            kind: FieldKind::Real,
            values: self
                .values
                .iter()
                .map(|v| Complex64::new(v.re, 0.0))
                .collect(),
        }
    }
}

/// Stacked oversampled Fourier data: `patterns` grids of `m1 x m2` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    shape: GridShape,
    patterns: usize,
    values: Vec<Complex64>,
}

impl FourierField {
    pub fn new(shape: GridShape, patterns: usize, values: Vec<Complex64>) -> Result<Self> {
        check_len(patterns * shape.fourier_len(), values.len())?;
        Ok(FourierField {
            shape,
            patterns,
            values,
        })
    }

    pub fn zeros(shape: GridShape, patterns: usize) -> Self {
        FourierField {
            shape,
            patterns,
            values: vec![Complex64::new(0.0, 0.0); patterns * shape.fourier_len()],
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn patterns(&self) -> usize {
        self.patterns
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub(crate) fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        FourierField {
            shape: self.shape,
            patterns: self.patterns,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two fields of the same layout.
    pub(crate) fn zip_with(
        &self,
        other: &FourierField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.check_layout(other)?;
        Ok(FourierField {
            shape: self.shape,
            patterns: self.patterns,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub(crate) fn check_layout(&self, other: &FourierField) -> Result<()> {
        if self.shape != other.shape || self.patterns != other.patterns {
            return Err(Error::dimension(
                format!("{} x{}", self.shape, self.patterns),
                format!("{} x{}", other.shape, other.patterns),
            ));
        }
        Ok(())
    }

    /// Max absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &FourierField) -> Result<f64> {
        self.check_layout(other)?;
        Ok(max_abs_diff(&self.values, &other.values))
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::dimension(expected, actual));
    }
    Ok(())
}

/// `sum_j a_j conj(b_j)`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Result<Complex64> {
    check_len(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y.conj()).sum())
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    /// `|c| = 1`: the solution-set distance modulo global phase.
    Unit,
    /// `c` free in the complex plane: the least-squares scalar.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    pub c: Complex64,
    pub aligned_error: f64,
}

/// Finds the scalar `c` minimizing `||c x - x0||` over the unit circle
/// (`Unit`) or the whole complex plane (`Free`).
pub fn align_phase(
    x: &SpatialImage,
    x0: &SpatialImage,
    mode: AlignMode,
) -> Result<AlignmentResult> {
    if x.shape() != x0.shape() {
        return Err(Error::dimension(x0.shape(), x.shape()));
    }
    let cross = inner(x.values(), x0.values())?;
    let c = match mode {
        AlignMode::Unit => {
            let mag = cross.norm();
            if mag == 0.0 {
                return Err(Error::DegenerateAlignment);
            }
            cross.conj() / mag
        }
        AlignMode::Free => {
            let xx = x.norm().powi(2);
            if xx == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                cross.conj() / xx
            }
        }
    };
    let aligned_error = x
        .values()
        .iter()
        .zip(x0.values())
        .map(|(a, b)| (c * a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(AlignmentResult { c, aligned_error })
}

/// `min_{c in C} ||c x - x0|| / ||x0||`.
pub fn relative_error(x: &SpatialImage, x0: &SpatialImage) -> Result<f64> {
    let reference = x0.norm();
    if reference == 0.0 {
        return Err(Error::InvalidReference);
    }
    Ok(align_phase(x, x0, AlignMode::Free)?.aligned_error / reference)
}

/// `min_{|c|=1} ||c x - x0||`, falling back to `c = 1` when `<x, x0> = 0`.
pub fn distance(x: &SpatialImage, x0: &SpatialImage) -> Result<f64> {
    match align_phase(x, x0, AlignMode::Unit) {
        Ok(r) => Ok(r.aligned_error),
        Err(Error::DegenerateAlignment) => Ok(norm(
            &x.values()
                .iter()
                .zip(x0.values())
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        )),
        Err(e) => Err(e),
    }
}
