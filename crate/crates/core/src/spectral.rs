//! Real linearization of the phase-fixing map at a solution `x0`, and the
//! spectral-gap certificate for local geometric convergence.
//!
//! With `B = diag(conj(A x0)/|A x0|) A` and `G(z) = (Re z, Im z)`, the real
//! matrix `calB = [Re B, -Im B]` satisfies `calB G(z) = Re(B z)`. Its
//! singular values obey `sigma_1 = 1` (along `G(x0)`), `sigma_2n = 0` (along
//! `G(-i x0)`), and `sigma_k^2 + sigma_{2n+1-k}^2 = 1`. Local convergence
//! needs the gap `sigma_2 < 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{FourierField, SpatialImage};
use crate::io::fmt_decimal;
use crate::operator::ForwardOperator;

/// `sigma_2 < 1 - GAP_MARGIN` counts as a genuine gap.
pub const GAP_MARGIN: f64 = 1e-6;

/// Largest grid (pixels) for which the dense matrix is materialized.
pub const DENSE_MAX_PIXELS: usize = 64;

/// Relative Rayleigh-quotient change regarded as converged.
const POWER_RTOL: f64 = 1e-10;
/// Consecutive converged steps required.
const POWER_STABLE_STEPS: usize = 10;
pub const POWER_DEFAULT_ITERS: usize = 5000;

/// Two stacked real fields `(Re z, Im z)`, length `2n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPairField(Vec<f64>);

impl RealPairField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !values.len().is_multiple_of(2) {
            return Err(Error::dimension("even length", values.len()));
        }
        Ok(RealPairField(values))
    }

    /// `G(z)`.
    pub fn from_complex(z: &[Complex64]) -> Self {
        RealPairField(
            z.iter()
                .map(|v| v.re)
                .chain(z.iter().map(|v| v.im))
                .collect(),
        )
    }

    /// `G^{-1}`.
    pub fn to_complex(&self) -> Vec<Complex64> {
        let (re, im) = self.0.split_at(self.0.len() / 2);
        re.iter()
            .zip(im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect()
    }

    /// `G(-i G^{-1}(w))`, i.e. `(Im, -Re)`.
    pub fn rotate_minus_i(&self) -> Self {
        let (re, im) = self.0.split_at(self.0.len() / 2);
        RealPairField(im.iter().copied().chain(re.iter().map(|v| -v)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &RealPairField) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// The phase-fixed operator `B` and its real form at a solution.
#[derive(Debug, Clone)]
pub struct Linearization<'a> {
    op: &'a ForwardOperator,
    x0: SpatialImage,
    /// `conj(A x0) / |A x0|`
    phase: Vec<Complex64>,
}

impl<'a> Linearization<'a> {
    pub fn new(op: &'a ForwardOperator, x0: &SpatialImage) -> Result<Self> {
        let y0 = op.apply(x0)?;
        let peak = y0.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let floor = peak * 1e-12;
        let mut phase = Vec::with_capacity(y0.values().len());
        for (index, v) in y0.values().iter().enumerate() {
            let r = v.norm();
            if r <= floor || r == 0.0 {
                return Err(Error::DegenerateSolution { index });
            }
            phase.push(v.conj() / r);
        }
        Ok(Linearization {
            op,
            x0: x0.clone(),
            phase,
        })
    }

    /// Spatial dimension `n`.
    pub fn n(&self) -> usize {
        self.op.shape().spatial_len()
    }

    /// Fourier dimension `m`.
    pub fn m(&self) -> usize {
        self.op.range_len()
    }

    pub fn b_apply(&self, z: &SpatialImage) -> Result<FourierField> {
        let az = self.op.apply(z)?;
        FourierField::new(
            az.shape(),
            az.patterns(),
            az.values()
                .iter()
                .zip(&self.phase)
                .map(|(a, p)| a * p)
                .collect(),
        )
    }

    pub fn b_adjoint(&self, w: &FourierField) -> Result<SpatialImage> {
        if w.values().len() != self.m() {
            return Err(Error::dimension(self.m(), w.values().len()));
        }
        let rotated = FourierField::new(
            w.shape(),
            w.patterns(),
            w.values()
                .iter()
                .zip(&self.phase)
                .map(|(a, p)| a * p.conj())
                .collect(),
        )?;
        self.op.adjoint(&rotated)
    }

    /// `calB w = Re(B G^{-1}(w))`.
    pub fn calb_apply(&self, w: &RealPairField) -> Result<Vec<f64>> {
        if w.len() != 2 * self.n() {
            return Err(Error::dimension(2 * self.n(), w.len()));
        }
        let z = SpatialImage::complex(self.op.shape(), w.to_complex())?;
        Ok(self.b_apply(&z)?.values().iter().map(|v| v.re).collect())
    }

    /// `calB^T u = G(B* u)` for real `u`.
    pub fn calb_adjoint(&self, u: &[f64]) -> Result<RealPairField> {
        if u.len() != self.m() {
            return Err(Error::dimension(self.m(), u.len()));
        }
        let w = FourierField::new(
            self.op.shape(),
            self.op.patterns(),
            u.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )?;
        Ok(RealPairField::from_complex(self.b_adjoint(&w)?.values()))
    }

    /// `v_1 = G(x0) / ||x0||`, the top right singular vector.
    pub fn leading_vector(&self) -> RealPairField {
        let s = 1.0 / self.x0.norm();
        RealPairField(
            RealPairField::from_complex(self.x0.values())
                .0
                .into_iter()
                .map(|v| v * s)
                .collect(),
        )
    }

    fn gain(&self, w: &RealPairField) -> Result<f64> {
        let u = self.calb_apply(w)?;
        Ok(u.iter().map(|v| v * v).sum::<f64>().sqrt() / w.norm())
    }

    /// Deflated power iteration on `calB^T calB`, with `v_1` projected out
    /// after every multiply.
    pub fn sigma2_power(&self, max_iter: usize, seed: u64) -> Result<f64> {
        let v1 = self.leading_vector();
        let deflate = |w: &mut Vec<f64>| {
            let c: f64 = w.iter().zip(v1.as_slice()).map(|(a, b)| a * b).sum();
            for (a, b) in w.iter_mut().zip(v1.as_slice()) {
                *a -= c * b;
            }
        };
        let normalize = |w: &mut Vec<f64>| {
            let nrm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm > 0.0 {
                w.iter_mut().for_each(|v| *v /= nrm);
            }
            nrm
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w: Vec<f64> = (0..2 * self.n())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        deflate(&mut w);
        normalize(&mut w);

        let mut lambda = f64::NAN;
        let mut stable = 0;
        for _ in 0..max_iter {
            let u = self.calb_apply(&RealPairField(w.clone()))?;
            let mut next = self.calb_adjoint(&u)?.0;
            deflate(&mut next);
            let rayleigh: f64 = next.iter().zip(&w).map(|(a, b)| a * b).sum();
            let nrm = normalize(&mut next);
            if nrm == 0.0 {
                return Ok(0.0);
            }
            w = next;
            if (rayleigh - lambda).abs() <= POWER_RTOL * rayleigh.abs() {
                stable += 1;
                if stable >= POWER_STABLE_STEPS {
                    return Ok(rayleigh.max(0.0).sqrt());
                }
            } else {
                stable = 0;
            }
            lambda = rayleigh;
        }
        Err(Error::ToleranceNotReached {
            estimate: lambda.max(0.0).sqrt(),
            iters: max_iter,
        })
    }

    /// `calB` materialized column by column from coordinate vectors.
    pub fn dense_matrix(&self) -> Result<DMatrix<f64>> {
        if self.n() > DENSE_MAX_PIXELS {
            return Err(Error::Capacity(format!(
                "dense mode supports at most {DENSE_MAX_PIXELS} pixels (8x8), got {}",
                self.n()
            )));
        }
        let cols = 2 * self.n();
        let mut mat = DMatrix::<f64>::zeros(self.m(), cols);
        let mut e = vec![0.0; cols];
        for j in 0..cols {
            e[j] = 1.0;
            let col = self.calb_apply(&RealPairField(e.clone()))?;
            mat.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        Ok(mat)
    }

    /// Dense SVD of `calB` and the singular-value pairing residuals.
    pub fn pairing_check(&self) -> Result<PairingCheck> {
        // Singular values from the values-only SVD; right vectors from the
        // symmetric eigenproblem of M^T M. nalgebra's vector-computing SVD
        // occasionally misconverges on these matrices.
        let mat = self.dense_matrix()?;
        let sv_raw = mat.clone().svd(false, false).singular_values;
        let mut sv: Vec<f64> = sv_raw.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let eig = (mat.transpose() * &mat).symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let vecs: Vec<RealPairField> = order
            .iter()
            .map(|&i| RealPairField(eig.eigenvectors.column(i).iter().copied().collect()))
            .collect();

        let k_max = sv.len();
        let residual = (0..k_max)
            .map(|k| (sv[k].powi(2) + sv[k_max - 1 - k].powi(2) - 1.0).abs())
            .fold(0.0, f64::max);

        // Vector pairing only makes sense for isolated singular values.
        let isolated = |k: usize| {
            let below = k + 1 >= k_max || (sv[k] - sv[k + 1]).abs() > PAIRING_GAP;
            let above = k == 0 || (sv[k - 1] - sv[k]).abs() > PAIRING_GAP;
            below && above
        };
        let mut vector_residual: f64 = 0.0;
        let mut vectors_checked = 0;
        for k in 0..k_max {
            let partner = k_max - 1 - k;
            if partner == k || !isolated(k) || !isolated(partner) {
                continue;
            }
            let rotated = vecs[k].rotate_minus_i();
            let target = &vecs[partner];
            let minus: f64 = rotated
                .as_slice()
                .iter()
                .zip(target.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let plus: f64 = rotated
                .as_slice()
                .iter()
                .zip(target.as_slice())
                .map(|(a, b)| (a + b).powi(2))
                .sum::<f64>()
                .sqrt();
            vector_residual = vector_residual.max(minus.min(plus));
            vectors_checked += 1;
        }
        Ok(PairingCheck {
            singular_values: sv,
            residual,
            vector_residual,
            vectors_checked,
        })
    }

    pub fn report(&self, mode: SpectralMode) -> Result<SpectralReport> {
        match mode {
            SpectralMode::Dense => {
                let check = self.pairing_check()?;
                let sv = &check.singular_values;
                Ok(SpectralReport::new(
                    sv[0],
                    sv[1],
                    sv[sv.len() - 1],
                    Some(check.residual),
                    mode,
                ))
            }
            SpectralMode::Power { iters, seed } => {
                let sigma1 = self.gain(&self.leading_vector())?;
                let sigma_min = self.gain(&self.leading_vector().rotate_minus_i())?;
                let sigma2 = self.sigma2_power(iters, seed)?;
                Ok(SpectralReport::new(sigma1, sigma2, sigma_min, None, mode))
            }
        }
    }
}

const PAIRING_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct PairingCheck {
    /// All `2n` singular values, descending.
    pub singular_values: Vec<f64>,
    /// `max_k |sigma_k^2 + sigma_{2n+1-k}^2 - 1|`
    pub residual: f64,
    /// Worst `min(||v_{2n+1-k} -+ G(-i G^{-1} v_k)||)` over isolated pairs.
    pub vector_residual: f64,
    pub vectors_checked: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralMode {
    Dense,
    Power { iters: usize, seed: u64 },
}

impl SpectralMode {
    pub fn name(&self) -> &'static str {
        match self {
            SpectralMode::Dense => "dense",
            SpectralMode::Power { .. } => "power",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma_min: f64,
    pub pairing_residual: Option<f64>,
    pub gap_ok: bool,
    pub eta_hint: f64,
    pub mode: SpectralMode,
}

impl SpectralReport {
    fn new(
        sigma1: f64,
        sigma2: f64,
        sigma_min: f64,
        pairing_residual: Option<f64>,
        mode: SpectralMode,
    ) -> Self {
        SpectralReport {
            sigma1,
            sigma2,
            sigma_min,
            pairing_residual,
            gap_ok: sigma2 < 1.0 - GAP_MARGIN,
            eta_hint: sigma2,
            mode,
        }
    }

    pub const CSV_HEADER: &'static str =
        "mode,sigma1,sigma2,sigma_min,pairing_residual,gap_ok,eta_hint";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.mode.name(),
            fmt_decimal(self.sigma1),
            fmt_decimal(self.sigma2),
            fmt_decimal(self.sigma_min),
            self.pairing_residual.map(fmt_decimal).unwrap_or_default(),
            self.gap_ok,
            fmt_decimal(self.eta_hint),
        )
    }

    /// Flat `key=value` block, one entry per line.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("mode={}\n", self.mode.name()));
        s.push_str(&format!("sigma1={}\n", fmt_decimal(self.sigma1)));
        s.push_str(&format!("sigma2={}\n", fmt_decimal(self.sigma2)));
        s.push_str(&format!("sigma_min={}\n", fmt_decimal(self.sigma_min)));
        if let Some(r) = self.pairing_residual {
            s.push_str(&format!("pairing_residual={}\n", fmt_decimal(r)));
        }
        s.push_str(&format!("gap_ok={}\n", self.gap_ok));
        s.push_str(&format!("eta_hint={}\n", fmt_decimal(self.eta_hint)));
        s
    }
}

pub fn sigma2_power(
    op: &ForwardOperator,
    x0: &SpatialImage,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    Linearization::new(op, x0)?.sigma2_power(iters, seed)
}

pub fn pairing_check(op: &ForwardOperator, x0: &SpatialImage) -> Result<PairingCheck> {
    Linearization::new(op, x0)?.pairing_check()
}

pub fn spectral_report(
    op: &ForwardOperator,
    x0: &SpatialImage,
    mode: SpectralMode,
) -> Result<SpectralReport> {
    Linearization::new(op, x0)?.report(mode)
}
