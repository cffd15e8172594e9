//! Feedback-bit allocation across the `K` coordinated links of one user.
//!
//! Vectors are ordered serving link first, then the other coordinated BSs in
//! coordination order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest budget accepted by [`exhaustive_bits`].
pub const EXHAUSTIVE_MAX_BITS: u32 = 16;
/// Largest link count accepted by [`exhaustive_bits`].
pub const EXHAUSTIVE_MAX_LINKS: usize = 3;

/// Weights below this fraction of the largest weight are treated as zero.
const ZERO_WEIGHT: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct AllocationInput {
    pub b_total: u32,
    /// `P̄_i`, the interference each link contributes per unit `2^{-B/(M-1)}`.
    pub weights: Vec<f64>,
    pub m: usize,
}

impl AllocationInput {
    /// Weights `P (L-1)(1-Δ_k)` for the serving link and `P_j L (1-Δ_j)` for
    /// the others.
    pub fn from_powers(
        b_total: u32,
        m: usize,
        users_per_cell: usize,
        p_serving: f64,
        delta_serving: f64,
        p_interf: &[f64],
        delta_interf: &[f64],
    ) -> Result<Self> {
        if p_interf.len() != delta_interf.len() {
            return Err(Error::domain("allocation_input", "one Δ per interfering BS is required"));
        }
        let l = users_per_cell as f64;
        let mut weights = vec![p_serving * (l - 1.0) * (1.0 - delta_serving)];
        weights.extend(p_interf.iter().zip(delta_interf).map(|(p, d)| p * l * (1.0 - d)));
        let input = Self { b_total, weights, m };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::domain("bit_allocation", "no links"));
        }
        if self.m < 2 {
            return Err(Error::domain("bit_allocation", "need M >= 2"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::domain("bit_allocation", "weights must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn links(&self) -> usize {
        self.weights.len()
    }

    fn step(&self) -> f64 {
        1.0 / (self.m as f64 - 1.0)
    }

    /// Modelled residual interference `Σ P̄_i 2^{-B_i/(M-1)}` (the constant
    /// part is omitted).
    pub fn objective(&self, bits: &[u32]) -> f64 {
        let s = self.step();
        self.weights
            .iter()
            .zip(bits)
            .map(|(w, &b)| w * (-(f64::from(b)) * s).exp2())
            .sum()
    }

    /// Decrease of the objective when link `i` goes from `b` to `b + 1` bits.
    pub fn marginal_gain(&self, i: usize, b: u32) -> f64 {
        let s = self.step();
        let b = f64::from(b);
        self.weights[i] * ((-b * s).exp2() - (-(b + 1.0) * s).exp2())
    }

    fn active(&self) -> Vec<bool> {
        let max = self.weights.iter().copied().fold(0.0, f64::max);
        self.weights.iter().map(|w| max > 0.0 && *w > ZERO_WEIGHT * max).collect()
    }
}

/// Integer bits per link.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub bits: Vec<u32>,
}

impl Allocation {
    pub fn total(&self) -> u32 {
        self.bits.iter().sum()
    }
}

/// Real-valued minimizer of the modelled interference under
/// `Σ B_i = B_total`, before clamping:
/// `B_i = B_total/K + (M-1)(log₂ P̄_i - (1/K) Σ_j log₂ P̄_j)`.
///
/// Links with zero weight get 0 bits and the rest share the full budget.
pub fn adaptive_bits_real(input: &AllocationInput) -> Result<Vec<f64>> {
    input.validate()?;
    let active = input.active();
    let k = active.iter().filter(|a| **a).count();
    if k == 0 {
        let mut out = vec![0.0; input.links()];
        out[0] = f64::from(input.b_total);
        return Ok(out);
    }
    let logs: Vec<f64> = input.weights.iter().map(|w| w.log2()).collect();
    let mean_log = logs.iter().zip(&active).filter(|(_, a)| **a).map(|(l, _)| l).sum::<f64>() / k as f64;
    let share = f64::from(input.b_total) / k as f64;
    let scale = input.m as f64 - 1.0;
    Ok(logs
        .iter()
        .zip(&active)
        .map(|(l, a)| if *a { share + scale * (l - mean_log) } else { 0.0 })
        .collect())
}

/// How real-valued bits are turned into integers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Floor and clamp, then hand leftover bits out greedily and exchange
    /// single bits while that lowers the objective.
    #[default]
    FloorRepair,
    /// Round to nearest and clamp; only trims if the budget is exceeded.
    Nearest,
}

/// Integer allocation from real bits. The result never exceeds the budget.
pub fn integerize(input: &AllocationInput, real: &[f64], rounding: Rounding) -> Result<Allocation> {
    input.validate()?;
    if real.len() != input.links() {
        return Err(Error::domain("integerize", "one real value per link is required"));
    }
    let cap = f64::from(input.b_total);
    let mut bits: Vec<u32> = real
        .iter()
        .map(|&r| {
            let v = match rounding {
                Rounding::FloorRepair => r.floor(),
                Rounding::Nearest => r.round(),
            };
            v.clamp(0.0, cap) as u32
        })
        .collect();
    trim(input, &mut bits);
    if rounding == Rounding::FloorRepair {
        fill(input, &mut bits);
        exchange(input, &mut bits);
    }
    Ok(Allocation { bits })
}

/// Removes bits where they cost least until the budget holds.
fn trim(input: &AllocationInput, bits: &mut [u32]) {
    while bits.iter().sum::<u32>() > input.b_total {
        let (i, _) = bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b > 0)
            .map(|(i, &b)| (i, input.marginal_gain(i, b - 1)))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        bits[i] -= 1;
    }
}

fn best_gain(input: &AllocationInput, bits: &[u32]) -> (usize, f64) {
    bits.iter()
        .enumerate()
        .map(|(i, &b)| (i, input.marginal_gain(i, b)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
}

fn fill(input: &AllocationInput, bits: &mut [u32]) {
    while bits.iter().sum::<u32>() < input.b_total {
        let (i, _) = best_gain(input, bits);
        bits[i] += 1;
    }
}

fn exchange(input: &AllocationInput, bits: &mut [u32]) {
    loop {
        let (to, gain) = best_gain(input, bits);
        let from = bits
            .iter()
            .enumerate()
            .filter(|(i, b)| **b > 0 && *i != to)
            .map(|(i, &b)| (i, input.marginal_gain(i, b - 1)))
            .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                Some(a) if a.1 <= x.1 => Some(a),
                _ => Some(x),
            });
        match from {
            Some((from, loss)) if gain > loss * (1.0 + 1e-12) => {
                bits[from] -= 1;
                bits[to] += 1;
            }
            _ => return,
        }
    }
}

/// Closed-form allocation followed by [`integerize`].
pub fn adaptive_bits(input: &AllocationInput, rounding: Rounding) -> Result<Allocation> {
    let real = adaptive_bits_real(input)?;
    integerize(input, &real, rounding)
}

/// `⌊B_total/K⌋` per link, remainder handed out serving link first.
pub fn uniform_bits(b_total: u32, k: usize) -> Result<Allocation> {
    if k == 0 {
        return Err(Error::domain("uniform_bits", "no links"));
    }
    let k32 = k as u32;
    let (base, rem) = (b_total / k32, b_total % k32);
    Ok(Allocation {
        bits: (0..k32).map(|i| base + u32::from(i < rem)).collect(),
    })
}

/// Every split of at most `b_total` bits over `k` links, in lexicographic
/// order.
pub fn enumerate_splits(b_total: u32, k: usize) -> Result<Vec<Vec<u32>>> {
    if k == 0 || k > EXHAUSTIVE_MAX_LINKS || b_total > EXHAUSTIVE_MAX_BITS {
        return Err(Error::Unsupported {
            op: "exhaustive_bits",
            reason: format!(
                "enumeration limited to 1 <= K <= {EXHAUSTIVE_MAX_LINKS} and B_total <= {EXHAUSTIVE_MAX_BITS}, got K = {k}, B_total = {b_total}"
            ),
        });
    }
    let mut out = Vec::new();
    let mut current = vec![0u32; k];
    fn rec(pos: usize, left: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for b in 0..=left {
            current[pos] = b;
            rec(pos + 1, left - b, current, out);
        }
        current[pos] = 0;
    }
    rec(0, b_total, &mut current, &mut out);
    Ok(out)
}

/// Split minimizing `cost` over [`enumerate_splits`]; the first minimizer in
/// enumeration order wins ties.
pub fn exhaustive_bits<F>(b_total: u32, k: usize, mut cost: F) -> Result<Allocation>
where
    F: FnMut(&[u32]) -> Result<f64>,
{
    let mut best: Option<(Vec<u32>, f64)> = None;
    for split in enumerate_splits(b_total, k)? {
        let c = cost(&split)?;
        if best.as_ref().is_none_or(|(_, b)| c < *b) {
            best = Some((split, c));
        }
    }
    let (bits, _) = best.expect("enumeration is never empty");
    Ok(Allocation { bits })
}

/// Exhaustive minimizer of the modelled interference.
pub fn exhaustive_model(input: &AllocationInput) -> Result<Allocation> {
    input.validate()?;
    exhaustive_bits(input.b_total, input.links(), |b| Ok(input.objective(b)))
}
