//! Closed-form expectations over the eigenvalues of a square complex Wishart
//! matrix and the expected-SINR approximations built from them.
//!
//! For an `M x M` matrix `H` with i.i.d. `CN(0, 1)` entries and eigenvalues
//! `λ_n` of `H Hᴴ`, this module evaluates
//!
//! ```text
//! D(t) = E[ Σ_n λ_n^t / (λ_n + α)² ]            t ∈ {1, 2}
//! F    = E[ (Σ_n λ_n / (λ_n + α))² ]
//! ```
//!
//! through the Laguerre expansion of the (joint) eigenvalue density. Each
//! Laguerre-weighted moment reduces to a binomial sum of `e^{α} Γ(b, α)`
//! terms. Those sums alternate in sign and cancel badly once `α` or `M` grow,
//! so all accumulation happens in double-double arithmetic with a running
//! absolute error bound; a result whose bound exceeds [`REL_TOLERANCE`] is
//! refused with [`Error::Precision`] instead of being returned silently.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::rvq::quantization_variance;
use crate::special::{ScaledTailTable, DD_EPS};

/// Largest antenna count for which the closed forms are validated.
pub const M_MAX: usize = 8;

/// Largest tolerated relative error bound on a closed-form value.
pub const REL_TOLERANCE: f64 = 1e-10;

type Dd = DoubleDouble;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Monomial coefficients of the Laguerre polynomial `L_n`.
fn laguerre_coefficients(n: usize) -> Vec<Dd> {
    (0..=n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            Dd::from_f64(sign * binomial(n, n - j)) / Dd::from_f64(factorial(j))
        })
        .collect()
}

/// `Σ_s C(n, s) (-α)^{n-s} e^{α} Γ(s + shift, α)` for `n = 0..=n_max`, with
/// error bounds. `shift = -1` gives `∫₀^∞ λⁿ e^{-λ} / (λ + α)² dλ` and
/// `shift = 0` gives `∫₀^∞ λⁿ e^{-λ} / (λ + α) dλ`.
fn shifted_moments(table: &ScaledTailTable, n_max: usize, shift: i32) -> (Vec<Dd>, Vec<f64>) {
    let alpha = table.alpha();
    let neg_alpha = Dd::from_f64(-alpha);
    let mut values = Vec::with_capacity(n_max + 1);
    let mut errors = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut acc = Dd::ZERO;
        let mut err = 0.0;
        for s in 0..=n {
            let coef = neg_alpha.powi((n - s) as u32) * binomial(n, s);
            let g = table.get(s as i32 + shift);
            let term = coef * g;
            acc += term;
            err += coef.to_f64().abs() * table.error(s as i32 + shift)
                + term.to_f64().abs() * 4.0 * DD_EPS;
        }
        values.push(acc);
        errors.push(err);
    }
    (values, errors)
}

fn check_m(op: &'static str, m: usize, alpha: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::domain(op, "M must be at least 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(op, format!("alpha must be finite and > 0, got {alpha}")));
    }
    if m > M_MAX {
        return Err(Error::Precision {
            op,
            m,
            alpha,
            reason: format!("closed forms are validated only for 1 <= M <= {M_MAX}"),
        });
    }
    Ok(())
}

fn check_precision(op: &'static str, m: usize, alpha: f64, value: Dd, err: f64) -> Result<f64> {
    let v = value.to_f64();
    let rel = err / v.abs();
    if !(rel <= REL_TOLERANCE) || !v.is_finite() {
        return Err(Error::Precision {
            op,
            m,
            alpha,
            reason: format!(
                "estimated relative error {rel:.2e} exceeds {REL_TOLERANCE:.0e}; \
                 alpha is too large for this M"
            ),
        });
    }
    Ok(v)
}

/// The three eigenvalue expectations `D(1)`, `D(2)` and `F` for one `(M, α)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WishartMoments {
    pub d1: f64,
    pub d2: f64,
    pub f: f64,
}

impl WishartMoments {
    pub fn evaluate(m: usize, alpha: f64) -> Result<Self> {
        check_m("wishart_moments", m, alpha)?;
        let eval = Evaluator::new(m, alpha)?;
        let (d1, e1) = eval.d_term(1);
        let (d2, e2) = eval.d_term(2);
        let (f, ef) = eval.f_term(d2, e2);
        Ok(Self {
            d1: check_precision("d_term", m, alpha, d1, e1)?,
            d2: check_precision("d_term", m, alpha, d2, e2)?,
            f: check_precision("f_term", m, alpha, f, ef)?,
        })
    }
}

struct Evaluator {
    m: usize,
    laguerre: Vec<Vec<Dd>>,
    sq_moments: (Vec<Dd>, Vec<f64>),
    lin_moments: (Vec<Dd>, Vec<f64>),
}

impl Evaluator {
    fn new(m: usize, alpha: f64) -> Result<Self> {
        let table = ScaledTailTable::new(alpha, 2 * m)?;
        Ok(Self {
            m,
            laguerre: (0..m).map(laguerre_coefficients).collect(),
            sq_moments: shifted_moments(&table, 2 * m, -1),
            lin_moments: shifted_moments(&table, 2 * m, 0),
        })
    }

    /// `D(t) = Σ_i ∫ λ^t / (λ + α)² e^{-λ} L_{i-1}(λ)² dλ`.
    fn d_term(&self, t: usize) -> (Dd, f64) {
        let (vals, errs) = &self.sq_moments;
        let mut acc = Dd::ZERO;
        let mut err = 0.0;
        for c in &self.laguerre {
            for (j, cj) in c.iter().enumerate() {
                for (l, cl) in c.iter().enumerate() {
                    let n = t + j + l;
                    let w = *cj * *cl;
                    let term = w * vals[n];
                    acc += term;
                    err += w.to_f64().abs() * errs[n] + term.to_f64().abs() * 4.0 * DD_EPS;
                }
            }
        }
        (acc, err)
    }

    /// `A_ij = ∫ λ / (λ + α) e^{-λ} L_{i-1}(λ) L_{j-1}(λ) dλ`.
    fn cross_moment(&self, i: usize, j: usize) -> (Dd, f64) {
        let (vals, errs) = &self.lin_moments;
        let mut acc = Dd::ZERO;
        let mut err = 0.0;
        for (r, cr) in self.laguerre[i].iter().enumerate() {
            for (s, cs) in self.laguerre[j].iter().enumerate() {
                let n = 1 + r + s;
                let w = *cr * *cs;
                let term = w * vals[n];
                acc += term;
                err += w.to_f64().abs() * errs[n] + term.to_f64().abs() * 4.0 * DD_EPS;
            }
        }
        (acc, err)
    }

    /// `F = D(2) + Σ_{i≠j} (A_ii A_jj - A_ij²)`: the 2x2 determinant of the
    /// joint density's kernel integrated against the product test function.
    fn f_term(&self, d2: Dd, d2_err: f64) -> (Dd, f64) {
        let m = self.m;
        let mut a = vec![vec![(Dd::ZERO, 0.0); m]; m];
        for i in 0..m {
            for j in i..m {
                let v = self.cross_moment(i, j);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        let mut acc = d2;
        let mut err = d2_err;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let (aii, eii) = a[i][i];
                let (ajj, ejj) = a[j][j];
                let (aij, eij) = a[i][j];
                let term = aii * ajj - aij * aij;
                acc += term;
                err += ajj.to_f64().abs() * eii
                    + aii.to_f64().abs() * ejj
                    + 2.0 * aij.to_f64().abs() * eij
                    + (aii * ajj).to_f64().abs() * 8.0 * DD_EPS;
            }
        }
        (acc, err)
    }
}

/// `D(t) = E[Σ_n λ_n^t / (λ_n + α)²]` for `t ∈ {1, 2}`.
pub fn d_term(m: usize, t: u32, alpha: f64) -> Result<f64> {
    if t != 1 && t != 2 {
        return Err(Error::Unsupported {
            op: "d_term",
            reason: format!("t must be 1 or 2, got {t}"),
        });
    }
    check_m("d_term", m, alpha)?;
    let eval = Evaluator::new(m, alpha)?;
    let (v, e) = eval.d_term(t as usize);
    check_precision("d_term", m, alpha, v, e)
}

/// `F = E[(Σ_n λ_n / (λ_n + α))²]`.
pub fn f_term(m: usize, alpha: f64) -> Result<f64> {
    Ok(WishartMoments::evaluate(m, alpha)?.f)
}

/// Cached expectation terms for one `(M, α)` pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticsContext {
    pub m: usize,
    pub alpha: f64,
    pub d1: f64,
    pub d2: f64,
    pub f: f64,
    /// Expected desired-signal gain `E|h w|²` (non-normalized precoder).
    pub delta: f64,
    /// Expected normalization `E[γ] = E‖W‖²_F / M`.
    pub gamma_bar: f64,
    /// Expected total received power per user `E‖h W‖²`.
    pub xi: f64,
    /// Expected leakage into a single other stream.
    pub psi: f64,
    /// Normalized residual-interference coefficient used by bit allocation.
    pub big_delta: f64,
}

impl AnalyticsContext {
    /// Builds the context for the square case (`KL = M`).
    pub fn build(m: usize, alpha: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain(
                "build_context",
                "interference terms need M >= 2 (division by M - 1)",
            ));
        }
        Self::from_moments(m, alpha, WishartMoments::evaluate(m, alpha)?)
    }

    /// Assembles the context from eigenvalue expectations obtained
    /// elsewhere (for example by quadrature).
    pub fn from_moments(m: usize, alpha: f64, moments: WishartMoments) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain(
                "build_context",
                "interference terms need M >= 2 (division by M - 1)",
            ));
        }
        let WishartMoments { d1, d2, f } = moments;
        let mf = m as f64;
        let delta = (f + d2) / (mf * (mf + 1.0));
        let gamma_bar = d1 / mf;
        let xi = d2 / mf;
        let leak = xi - delta;
        let psi = leak / (mf - 1.0);
        let big_delta = leak / (gamma_bar * (mf - 1.0));
        Ok(Self {
            m,
            alpha,
            d1,
            d2,
            f,
            delta,
            gamma_bar,
            xi,
            psi,
            big_delta,
        })
    }

    /// Expected signal gain with a `B`-bit quantized direction:
    /// `(1 - σ²) δ + σ² γ̄`.
    pub fn rvq_signal(&self, bits: u32) -> f64 {
        let s2 = quantization_variance(bits, self.m);
        (1.0 - s2) * self.delta + s2 * self.gamma_bar
    }
}

/// Per-stream expected leakage `ψ' = ψ̃ / (M - 1)` under `B`-bit RVQ, where
/// `ψ̃ = γ̄ M σ² + (1 - σ²) ξ - (1 - σ²) δ - σ² γ̄` and `σ² = 2^{-B/(M-1)}`.
pub fn rvq_psi(ctx: &AnalyticsContext, bits: u32) -> f64 {
    rvq_psi_with_variance(ctx, quantization_variance(bits, ctx.m))
}

pub(crate) fn rvq_psi_with_variance(ctx: &AnalyticsContext, s2: f64) -> f64 {
    let m = ctx.m as f64;
    let total = ctx.gamma_bar * m * s2 + (1.0 - s2) * ctx.xi;
    let signal = (1.0 - s2) * ctx.delta + s2 * ctx.gamma_bar;
    (total - signal) / (m - 1.0)
}

/// Thread-safe cache of contexts keyed on the exact `(M, α)` bit pattern.
#[derive(Debug, Default)]
pub struct ContextCache {
    inner: RwLock<HashMap<(usize, u64), Arc<AnalyticsContext>>>,
}

impl ContextCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, m: usize, alpha: f64) -> Result<Arc<AnalyticsContext>> {
        let key = (m, alpha.to_bits());
        if let Some(ctx) = self.inner.read().expect("context cache poisoned").get(&key) {
            return Ok(Arc::clone(ctx));
        }
        let ctx = Arc::new(AnalyticsContext::build(m, alpha)?);
        let mut guard = self.inner.write().expect("context cache poisoned");
        Ok(Arc::clone(guard.entry(key).or_insert(ctx)))
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("context cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Received powers seen by one coordinated user (noise normalized to 1).
#[derive(Clone, Debug, PartialEq)]
pub struct LinkBudget {
    /// `P_{l,k,k}`.
    pub p_serving: f64,
    /// `P_{l,k,j}` for the `K - 1` other coordinated BSs.
    pub p_interf: Vec<f64>,
    /// `P_{l,k,c}` for every non-coordinated interferer.
    pub p_noncoord: Vec<f64>,
    /// `L`.
    pub users_per_cell: usize,
}

impl LinkBudget {
    pub fn cells(&self) -> usize {
        self.p_interf.len() + 1
    }

    fn validate(&self, serving: &AnalyticsContext, interferers: &[&AnalyticsContext]) -> Result<()> {
        let op = "expected_sinr";
        if self.users_per_cell == 0 {
            return Err(Error::domain(op, "L must be at least 1"));
        }
        let powers = std::iter::once(&self.p_serving)
            .chain(&self.p_interf)
            .chain(&self.p_noncoord);
        if powers.clone().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::domain(op, "powers must be finite and non-negative"));
        }
        if interferers.len() != self.p_interf.len() {
            return Err(Error::domain(
                op,
                format!(
                    "{} interfering contexts for {} interfering powers",
                    interferers.len(),
                    self.p_interf.len()
                ),
            ));
        }
        let kl = self.cells() * self.users_per_cell;
        for ctx in std::iter::once(serving).chain(interferers.iter().copied()) {
            if ctx.m != kl {
                return Err(Error::domain(
                    op,
                    format!("closed forms need KL = M, got KL = {kl}, M = {}", ctx.m),
                ));
            }
        }
        Ok(())
    }
}

/// `Υ`: expected power a user collects from one non-coordinated BS's `L`
/// unit-mean normalized streams.
pub fn noncoord_factor(users_per_cell: usize) -> f64 {
    users_per_cell as f64
}

/// Numerator and denominator pieces of an expected-SINR approximation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinrTerms {
    pub signal: f64,
    pub intra: f64,
    pub inter: f64,
    pub noncoord: f64,
}

impl SinrTerms {
    pub fn sinr(&self) -> f64 {
        self.signal / (1.0 + self.intra + self.inter + self.noncoord)
    }
}

fn noncoord_term(budget: &LinkBudget) -> f64 {
    budget.p_noncoord.iter().sum::<f64>() * noncoord_factor(budget.users_per_cell)
}

/// Expected-SINR terms with perfect CDI.
pub fn perfect_terms(
    serving: &AnalyticsContext,
    interferers: &[&AnalyticsContext],
    budget: &LinkBudget,
) -> Result<SinrTerms> {
    budget.validate(serving, interferers)?;
    let l = budget.users_per_cell as f64;
    let ps = budget.p_serving / serving.gamma_bar;
    let inter = budget
        .p_interf
        .iter()
        .zip(interferers)
        .map(|(p, ctx)| l * p / ctx.gamma_bar * ctx.psi)
        .sum();
    Ok(SinrTerms {
        signal: ps * serving.delta,
        intra: (l - 1.0) * ps * serving.psi,
        inter,
        noncoord: noncoord_term(budget),
    })
}

/// Expected SINR with perfect CDI at every coordinated BS.
pub fn expected_sinr_perfect(
    serving: &AnalyticsContext,
    interferers: &[&AnalyticsContext],
    budget: &LinkBudget,
) -> Result<f64> {
    Ok(perfect_terms(serving, interferers, budget)?.sinr())
}

/// Expected-SINR terms with RVQ feedback. `bits[0]` quantizes the serving
/// link and `bits[1..]` follow the order of `budget.p_interf`.
pub fn rvq_terms(
    serving: &AnalyticsContext,
    interferers: &[&AnalyticsContext],
    budget: &LinkBudget,
    bits: &[u32],
) -> Result<SinrTerms> {
    budget.validate(serving, interferers)?;
    if bits.len() != budget.cells() {
        return Err(Error::domain(
            "expected_sinr_rvq",
            format!("expected {} bit counts, got {}", budget.cells(), bits.len()),
        ));
    }
    let l = budget.users_per_cell as f64;
    let ps = budget.p_serving / serving.gamma_bar;
    let inter = budget
        .p_interf
        .iter()
        .zip(interferers)
        .zip(&bits[1..])
        .map(|((p, ctx), &b)| l * p / ctx.gamma_bar * rvq_psi(ctx, b))
        .sum();
    Ok(SinrTerms {
        signal: ps * serving.rvq_signal(bits[0]),
        intra: (l - 1.0) * ps * rvq_psi(serving, bits[0]),
        inter,
        noncoord: noncoord_term(budget),
    })
}

/// Expected SINR with RVQ-quantized CDI.
pub fn expected_sinr_rvq(
    serving: &AnalyticsContext,
    interferers: &[&AnalyticsContext],
    budget: &LinkBudget,
    bits: &[u32],
) -> Result<f64> {
    Ok(rvq_terms(serving, interferers, budget, bits)?.sinr())
}

/// `L log₂(1 + E[SINR])` in bits/s/Hz.
pub fn expected_cell_edge_se(expected_sinr: f64, users_per_cell: usize) -> Result<f64> {
    if !(expected_sinr >= 0.0) {
        return Err(Error::domain(
            "expected_cell_edge_se",
            format!("expected SINR must be >= 0, got {expected_sinr}"),
        ));
    }
    Ok(users_per_cell as f64 * (1.0 + expected_sinr).log2())
}
