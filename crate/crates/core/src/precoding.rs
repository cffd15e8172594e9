//! RZF and ZF precoders, power normalization and regularization parameters.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-normalized precoder `W` with its normalization scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecodeMatrix {
    w: DMatrix<Complex64>,
    gamma: f64,
}

impl PrecodeMatrix {
    /// Normalizes to the total power constraint: `γ = ‖W‖²_F / M`.
    pub fn new(w: DMatrix<Complex64>) -> Result<Self> {
        let m = w.nrows() as f64;
        Self::with_budget(w, m)
    }

    /// Normalizes so that `‖W / √γ‖²_F = budget`.
    pub fn with_budget(w: DMatrix<Complex64>, budget: f64) -> Result<Self> {
        if w.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::domain("precoder", "non-finite precoder entries"));
        }
        let fro = w.norm_squared();
        if !(fro > 0.0) || !(budget > 0.0) {
            return Err(Error::domain("precoder", "zero precoder or power budget"));
        }
        Ok(Self { w, gamma: fro / budget })
    }

    pub fn raw(&self) -> &DMatrix<Complex64> {
        &self.w
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn antennas(&self) -> usize {
        self.w.nrows()
    }

    pub fn streams(&self) -> usize {
        self.w.ncols()
    }

    /// `W / √γ`.
    pub fn normalized(&self) -> DMatrix<Complex64> {
        &self.w / Complex64::new(self.gamma.sqrt(), 0.0)
    }
}

fn check_input(op: &'static str, h: &DMatrix<Complex64>) -> Result<()> {
    if h.nrows() == 0 || h.nrows() > h.ncols() {
        return Err(Error::config(
            "k",
            format!("{op} needs 1 <= KL <= M, got {}x{}", h.nrows(), h.ncols()),
        ));
    }
    if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::domain(op, "non-finite channel entries"));
    }
    Ok(())
}

/// `Hᴴ (H Hᴴ + α I)⁻¹` via a Cholesky solve of the Gram system.
pub fn rzf_precoder(h: &DMatrix<Complex64>, alpha: f64) -> Result<PrecodeMatrix> {
    check_input("rzf_precoder", h)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain("rzf_precoder", format!("alpha must be finite and > 0, got {alpha}")));
    }
    let n = h.nrows();
    let gram = h * h.adjoint() + DMatrix::<Complex64>::identity(n, n) * Complex64::new(alpha, 0.0);
    let chol = Cholesky::new(gram).ok_or(Error::Singular { op: "rzf_precoder" })?;
    PrecodeMatrix::new(chol.solve(h).adjoint())
}

/// Pseudo-inverse `Hᴴ (H Hᴴ)⁻¹`.
pub fn zf_precoder(h: &DMatrix<Complex64>) -> Result<PrecodeMatrix> {
    check_input("zf_precoder", h)?;
    let n = h.nrows();
    let gram = h * h.adjoint();
    let chol: Cholesky<Complex64, Dyn> = Cholesky::new(gram).ok_or(Error::Singular { op: "zf_precoder" })?;
    let w = chol.solve(h).adjoint();
    let residual = (h * &w - DMatrix::<Complex64>::identity(n, n)).camax();
    if !(residual < 1e-8) {
        return Err(Error::Singular { op: "zf_precoder" });
    }
    PrecodeMatrix::new(w)
}

/// How each BS picks its regularization parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegStrategy {
    /// Mean of `1/P` over the BS's own users.
    SingleCellAvg,
    /// Mean of `1/P` over every coordinated link of the BS.
    MulticellAvg,
    /// Per-cell sum-rate maximizer over a log-spaced grid.
    GridOpt { lo: f64, hi: f64, points: usize },
    Fixed { alpha: f64 },
}

impl RegStrategy {
    pub const DEFAULT_GRID: RegStrategy = RegStrategy::GridOpt {
        lo: 1e-4,
        hi: 1e3,
        points: 200,
    };

    pub fn validate(&self) -> Result<()> {
        match *self {
            RegStrategy::GridOpt { lo, hi, points } => {
                if !(lo > 0.0 && lo < hi && hi.is_finite()) || points < 2 {
                    return Err(Error::config("reg", "grid needs 0 < lo < hi and at least 2 points"));
                }
            }
            RegStrategy::Fixed { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::config("reg", "fixed alpha must be finite and > 0"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// `(1/n) Σ 1/P` over the given link powers.
pub fn mean_inverse_power(powers: &[f64]) -> Result<f64> {
    if powers.is_empty() {
        return Err(Error::domain("reg_param", "no link powers"));
    }
    if powers.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::domain("reg_param", "link powers must be finite and > 0"));
    }
    Ok(powers.iter().map(|p| 1.0 / p).sum::<f64>() / powers.len() as f64)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Maximizes `objective` over `grid`, returning `(α, value)`. The first
/// maximizer wins ties; non-finite objective values are skipped.
pub fn grid_argmax<F>(grid: &[f64], mut objective: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut best: Option<(f64, f64)> = None;
    for &alpha in grid {
        let v = objective(alpha)?;
        if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
            best = Some((alpha, v));
        }
    }
    best.ok_or_else(|| Error::domain("reg_param", "objective not finite anywhere on the grid"))
}
