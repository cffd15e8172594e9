//! Independent evaluation paths for the Wishart expectations: Monte Carlo
//! over sampled eigenvalues, and adaptive quadrature of the Laguerre-kernel
//! integrals.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytics::{AnalyticsContext, WishartMoments};
use crate::cell::complex_normal;
use crate::error::{Error, Result};

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Number of standard errors separating `value` from the mean.
    pub fn z_score(&self, value: f64) -> f64 {
        (value - self.mean).abs() / self.stderr
    }
}

/// Monte Carlo estimates of `D(1)`, `D(2)` and `F`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    pub alpha: f64,
    pub d1: Estimate,
    pub d2: Estimate,
    pub f: Estimate,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    sum: [f64; 3],
    sum_sq: [f64; 3],
}

impl Moments {
    fn push(&mut self, x: [f64; 3]) {
        self.n += 1.0;
        for i in 0..3 {
            self.sum[i] += x[i];
            self.sum_sq[i] += x[i] * x[i];
        }
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        for i in 0..3 {
            self.sum[i] += o.sum[i];
            self.sum_sq[i] += o.sum_sq[i];
        }
    }

    fn estimate(&self, i: usize) -> Estimate {
        let mean = self.sum[i] / self.n;
        let var = ((self.sum_sq[i] - self.n * mean * mean) / (self.n - 1.0)).max(0.0);
        Estimate {
            mean,
            stderr: (var / self.n).sqrt(),
        }
    }
}

fn statistics(eigs: &[f64], alpha: f64) -> [f64; 3] {
    let mut s = [0.0; 3];
    for &l in eigs {
        let d = l + alpha;
        s[0] += l / (d * d);
        s[1] += l * l / (d * d);
        s[2] += l / d;
    }
    s[2] *= s[2];
    s
}

/// Eigenvalues of `H Hᴴ` for an `m x m` i.i.d. `CN(0, 1)` matrix.
pub fn sample_wishart_eigenvalues<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let h = DMatrix::from_fn(m, m, |_, _| complex_normal(rng, 1.0));
    let w: DMatrix<Complex64> = &h * h.adjoint();
    w.symmetric_eigenvalues().iter().map(|l| l.max(0.0)).collect()
}

fn check_args(m: usize, trials: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::config("m", "must be at least 1"));
    }
    if trials < 1000 {
        return Err(Error::config("trials", format!("oracle needs at least 1000 trials, got {trials}")));
    }
    Ok(())
}

fn finish(alpha: f64, acc: &Moments) -> OracleEstimate {
    OracleEstimate {
        alpha,
        d1: acc.estimate(0),
        d2: acc.estimate(1),
        f: acc.estimate(2),
    }
}

/// Sequential Monte Carlo estimate for one `α`.
pub fn eigen_oracle<R: Rng + ?Sized>(m: usize, alpha: f64, trials: usize, rng: &mut R) -> Result<OracleEstimate> {
    check_args(m, trials)?;
    let mut acc = Moments::default();
    for _ in 0..trials {
        acc.push(statistics(&sample_wishart_eigenvalues(m, rng), alpha));
    }
    Ok(finish(alpha, &acc))
}

const CHUNK: usize = 8192;

/// Parallel Monte Carlo estimates for several `α` from one shared set of
/// eigenvalue samples. Chunk `i` draws from stream `i` of a generator keyed
/// on `seed`, so the result does not depend on the thread count.
pub fn eigen_oracle_grid(m: usize, alphas: &[f64], trials: usize, seed: u64) -> Result<Vec<OracleEstimate>> {
    check_args(m, trials)?;
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(trials - c * CHUNK);
            let mut acc = vec![Moments::default(); alphas.len()];
            for _ in 0..n {
                let eigs = sample_wishart_eigenvalues(m, &mut rng);
                for (a, &alpha) in acc.iter_mut().zip(alphas) {
                    a.push(statistics(&eigs, alpha));
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); alphas.len()];
    for p in &partial {
        for (t, x) in total.iter_mut().zip(p) {
            t.merge(x);
        }
    }
    Ok(alphas.iter().zip(&total).map(|(&a, acc)| finish(a, acc)).collect())
}

/// Laguerre polynomials `L_0(x), ..., L_{n-1}(x)` by the three-term
/// recurrence.
pub fn laguerre_values(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(1.0);
    if n > 1 {
        out.push(1.0 - x);
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

fn simpson_step(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let h = (b - a) / 6.0;
    fa.iter().zip(fm).zip(fb).map(|((x, y), z)| h * (x + 4.0 * y + z)).collect()
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: u32,
    out: &mut [f64],
) where
    F: Fn(f64) -> Vec<f64>,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_step(a, m, fa, &flm, fm);
    let right = simpson_step(m, b, fm, &frm, fb);
    let err = left
        .iter()
        .zip(&right)
        .zip(whole)
        .map(|((l, r), w)| (l + r - w).abs())
        .fold(0.0, f64::max);
    if depth == 0 || err <= 15.0 * tol {
        for (o, ((l, r), w)) in out.iter_mut().zip(left.iter().zip(&right).zip(whole)) {
            *o += l + r + (l + r - w) / 15.0;
        }
        return;
    }
    adaptive(f, a, m, fa, &flm, fm, &left, tol / 2.0, depth - 1, out);
    adaptive(f, m, b, fm, &frm, fb, &right, tol / 2.0, depth - 1, out);
}

/// Vector-valued adaptive Simpson quadrature on `[a, b]`. The tolerance is
/// relative to the largest component of a first coarse estimate.
pub fn integrate<F>(f: &F, a: f64, b: f64, rel_tol: f64, dim: usize) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    let mut out = vec![0.0; dim];
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson_step(a, b, &fa, &fm, &fb);
    let scale = whole.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    adaptive(f, a, b, &fa, &fm, &fb, &whole, rel_tol * scale, 30, &mut out);
    out
}

/// Breakpoints that resolve the `λ ≈ α` feature and the `e^{-λ}` tail.
fn breakpoints(alpha: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut x = alpha / 16.0;
    while x < 1.0 {
        pts.push(x);
        x *= 4.0;
    }
    let mut x = 1.0;
    while x <= 1024.0 {
        pts.push(x);
        x *= 2.0;
    }
    pts
}

fn integrate_pieces<F>(f: &F, alpha: f64, tol: f64, dim: usize) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    let pts = breakpoints(alpha);
    let mut total = vec![0.0; dim];
    for w in pts.windows(2) {
        for (t, v) in total.iter_mut().zip(integrate(f, w[0], w[1], tol, dim)) {
            *t += v;
        }
    }
    total
}

/// `∫_α^∞ v^{b-1} e^{-v} dv` by quadrature.
pub fn quadrature_tail_integral(b: i32, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::domain("quadrature_tail_integral", "alpha must be > 0"));
    }
    let f = |x: f64| {
        let v = x + alpha;
        vec![v.powi(b - 1) * (-v).exp()]
    };
    Ok(integrate_pieces(&f, alpha, 1e-14, 1)[0])
}

/// `D(1)`, `D(2)` and `F` by adaptive quadrature of the Laguerre-kernel
/// integrals. Valid for any `α > 0`, at the cost of many function
/// evaluations.
pub fn quadrature_moments(m: usize, alpha: f64) -> Result<WishartMoments> {
    if m == 0 {
        return Err(Error::config("m", "must be at least 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain("quadrature_moments", "alpha must be finite and > 0"));
    }
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let dim = 2 + pairs.len();
    let f = |x: f64| {
        let lag = laguerre_values(m, x);
        let w = (-x).exp();
        let d = x + alpha;
        let kernel: f64 = lag.iter().map(|v| v * v).sum::<f64>() * w;
        let mut out = Vec::with_capacity(dim);
        out.push(x / (d * d) * kernel);
        out.push(x * x / (d * d) * kernel);
        let g = x / d * w;
        out.extend(pairs.iter().map(|&(i, j)| g * lag[i] * lag[j]));
        out
    };
    let v = integrate_pieces(&f, alpha, 1e-13, dim);
    let mut a = vec![vec![0.0; m]; m];
    for (&(i, j), val) in pairs.iter().zip(&v[2..]) {
        a[i][j] = *val;
        a[j][i] = *val;
    }
    let mut f_val = v[1];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                f_val += a[i][i] * a[j][j] - a[i][j] * a[i][j];
            }
        }
    }
    Ok(WishartMoments {
        d1: v[0],
        d2: v[1],
        f: f_val,
    })
}

/// Closed-form context, falling back to quadrature when the closed form
/// refuses the request for precision reasons.
pub fn context_with_fallback(m: usize, alpha: f64) -> Result<AnalyticsContext> {
    match AnalyticsContext::build(m, alpha) {
        Err(Error::Precision { .. }) => AnalyticsContext::from_moments(m, alpha, quadrature_moments(m, alpha)?),
        other => other,
    }
}
