//! The RAAR iteration in the Fourier domain.
//!
//! One step maps
//!
//! ```text
//! y -> beta * ( y + A[A*(2 b.u - y)]_X - gamma * b.u ),   u = y/|y|,
//! gamma = (2 beta - 1) / beta
//! ```
//!
//! which equals `beta T(y) + (1 - beta) P2(y)` with the Douglas-Rachford map
//! `T = (R1 R2 + I) / 2`. `beta = 1/2` reproduces error reduction and
//! `beta = 1` the hybrid input-output scheme.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{relative_error, FourierField, SpatialImage};
use crate::operator::ForwardOperator;
use crate::projections::{project_magnitude, MagnitudeData};

pub const BETA_ER: f64 = 0.5;
pub const BETA_HIO: f64 = 1.0;

fn check_beta(beta: f64) -> Result<()> {
    if !(BETA_ER..=BETA_HIO).contains(&beta) {
        return Err(Error::InvalidConfig(format!(
            "beta must lie in [0.5, 1], got {beta}"
        )));
    }
    Ok(())
}

pub fn raar_step(
    op: &ForwardOperator,
    b: &MagnitudeData,
    y: &FourierField,
    beta: f64,
) -> Result<FourierField> {
    check_beta(beta)?;
    let gamma = (2.0 * beta - 1.0) / beta;
    let p2 = project_magnitude(b, y)?;
    let reflected = p2.zip_with(y, |p, v| 2.0 * p - v)?;
    let back = op.apply(&op.constrain(&op.adjoint(&reflected)?))?;
    let values = y
        .values()
        .iter()
        .zip(back.values())
        .zip(p2.values())
        .map(|((&v, &r), &p)| beta * (v + r - gamma * p))
        .collect();
    FourierField::new(y.shape(), y.patterns(), values)
}

/// Error reduction, `raar_step` at `beta = 1/2`.
pub fn er_step(op: &ForwardOperator, b: &MagnitudeData, y: &FourierField) -> Result<FourierField> {
    raar_step(op, b, y, BETA_ER)
}

/// Hybrid input-output, `raar_step` at `beta = 1`.
pub fn hio_step(op: &ForwardOperator, b: &MagnitudeData, y: &FourierField) -> Result<FourierField> {
    raar_step(op, b, y, BETA_HIO)
}

#[derive(Debug, Clone)]
pub enum SolverInit {
    /// `y_1 = A 1`: every pixel set to unity, then propagated.
    ConstantOnes,
    Fourier(FourierField),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub beta: f64,
    pub max_iter: usize,
    /// Stopping threshold on the relative error (with a reference) or on the
    /// magnitude residual (without). Non-finite values disable early stopping.
    pub tol: f64,
    pub init: SolverInit,
    pub reference: Option<SpatialImage>,
}

impl SolverConfig {
    pub fn new(beta: f64, max_iter: usize) -> Self {
        SolverConfig {
            beta,
            max_iter,
            tol: f64::INFINITY,
            init: SolverInit::ConstantOnes,
            reference: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_init(mut self, init: SolverInit) -> Self {
        self.init = init;
        self
    }

    pub fn with_reference(mut self, reference: SpatialImage) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tol must be nonnegative, got {}",
                self.tol
            )));
        }
        if let Some(r) = &self.reference {
            if r.norm() == 0.0 {
                return Err(Error::InvalidReference);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub rel_err: Option<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxIterations,
    ToleranceReached,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::MaxIterations => "max_iterations",
            Termination::ToleranceReached => "tolerance_reached",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub final_image: SpatialImage,
    pub final_fourier: FourierField,
    pub termination: Termination,
}

impl SolverTrace {
    pub fn final_rel_err(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.rel_err)
    }

    pub fn rel_errs(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.rel_err).collect()
    }

    /// First iteration whose relative error is at or below `level`.
    pub fn iterations_to(&self, level: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.rel_err.is_some_and(|e| e <= level))
            .map(|r| r.iter)
    }
}

/// Stepwise RAAR state, for callers that inspect every iterate.
#[derive(Debug, Clone)]
pub struct Raar<'a> {
    op: &'a ForwardOperator,
    b: &'a MagnitudeData,
    beta: f64,
    y: FourierField,
}

impl<'a> Raar<'a> {
    pub fn new(
        op: &'a ForwardOperator,
        b: &'a MagnitudeData,
        beta: f64,
        y: FourierField,
    ) -> Result<Self> {
        check_beta(beta)?;
        if y.shape() != op.shape() || y.patterns() != op.patterns() {
            return Err(Error::dimension(
                format!("{} x{}", op.shape(), op.patterns()),
                format!("{} x{}", y.shape(), y.patterns()),
            ));
        }
        Ok(Raar { op, b, beta, y })
    }

    pub fn from_init(
        op: &'a ForwardOperator,
        b: &'a MagnitudeData,
        beta: f64,
        init: &SolverInit,
    ) -> Result<Self> {
        let y = match init {
            SolverInit::ConstantOnes => op.apply(&SpatialImage::ones(op.shape()))?,
            SolverInit::Fourier(y) => y.clone(),
        };
        Self::new(op, b, beta, y)
    }

    pub fn step(&mut self) -> Result<&FourierField> {
        self.y = raar_step(self.op, self.b, &self.y, self.beta)?;
        Ok(&self.y)
    }

    pub fn fourier(&self) -> &FourierField {
        &self.y
    }

    /// `x = [A* y]_X`.
    pub fn spatial(&self) -> Result<SpatialImage> {
        Ok(self.op.constrain(&self.op.adjoint(&self.y)?))
    }

    pub fn into_fourier(self) -> FourierField {
        self.y
    }
}

pub fn run(op: &ForwardOperator, b: &MagnitudeData, config: &SolverConfig) -> Result<SolverTrace> {
    config.validate()?;
    let mut raar = Raar::from_init(op, b, config.beta, &config.init)?;
    let mut records = Vec::with_capacity(config.max_iter);
    let mut termination = Termination::MaxIterations;
    let mut x = raar.spatial()?;
    for iter in 1..=config.max_iter {
        raar.step()?;
        x = raar.spatial()?;
        let residual = b.residual(raar.fourier())?;
        let rel_err = match &config.reference {
            Some(x0) => Some(relative_error(&x, x0)?),
            None => None,
        };
        records.push(TraceRecord {
            iter,
            rel_err,
            residual,
        });
        let metric = rel_err.unwrap_or(residual);
        if config.tol.is_finite() && metric <= config.tol {
            termination = Termination::ToleranceReached;
            break;
        }
    }
    Ok(SolverTrace {
        records,
        final_image: x,
        final_fourier: raar.into_fourier(),
        termination,
    })
}

/// Reference error-reduction loop in the object domain,
/// `x <- [A*(b . Ax/|Ax|)]_X`, one entry per step.
pub fn error_reduction_spatial(
    op: &ForwardOperator,
    b: &MagnitudeData,
    x_start: &SpatialImage,
    steps: usize,
) -> Result<Vec<SpatialImage>> {
    let mut x = x_start.clone();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let y = op.apply(&x)?;
        x = op.constrain(&op.adjoint(&project_magnitude(b, &y)?)?);
        out.push(x.clone());
    }
    Ok(out)
}

/// Multiplies a field by a unit scalar; used for phase-equivariance checks.
pub fn rotate(y: &FourierField, theta: f64) -> FourierField {
    y.scaled(Complex64::from_polar(1.0, theta))
}
