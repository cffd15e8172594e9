use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::precoding::PrecodeMatrix;

/// One transmitting BS: its normalized precoder and which columns carry
/// data for whom.
#[derive(Clone, Debug)]
pub struct Transmitter {
    /// Index into a user's per-BS link lists.
    pub bs: usize,
    pub gamma: f64,
    /// `W / √γ`.
    pub w: DMatrix<Complex64>,
    /// `(column, coordinated user)` for every data stream; `None` marks a
    /// stream for a user outside the coordinated set.
    pub data: Vec<(usize, Option<usize>)>,
}

impl Transmitter {
    pub fn new(bs: usize, precoder: &PrecodeMatrix, data: Vec<(usize, Option<usize>)>) -> Self {
        Self {
            bs,
            gamma: precoder.gamma(),
            w: precoder.normalized(),
            data,
        }
    }

    /// `|h w_c|²` with `h` a row vector.
    fn gain(&self, h: &DVector<Complex64>, col: usize) -> f64 {
        self.w.column(col).iter().zip(h.iter()).map(|(w, h)| h * w).sum::<Complex64>().norm_sqr()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinrParts {
    pub signal: f64,
    pub interference: f64,
}

impl SinrParts {
    /// Noise power is 1.
    pub fn sinr(&self) -> f64 {
        self.signal / (1.0 + self.interference)
    }
}

/// Signal and interference at `user` given the received powers and
/// channels of all its links (indexed by `Transmitter::bs`).
pub fn instantaneous_sinr(
    user: usize,
    powers: &[f64],
    channels: &[&DVector<Complex64>],
    txs: &[&Transmitter],
) -> Result<SinrParts> {
    let mut signal = None;
    let mut interference = 0.0;
    for tx in txs {
        let (Some(&p), Some(h)) = (powers.get(tx.bs), channels.get(tx.bs)) else {
            return Err(Error::domain("instantaneous_sinr", format!("user {user} has no link to BS {}", tx.bs)));
        };
        for &(col, target) in &tx.data {
            let g = p * tx.gain(h, col);
            if target == Some(user) {
                signal = Some(g);
            } else {
                interference += g;
            }
        }
    }
    let signal = signal.ok_or_else(|| Error::domain("instantaneous_sinr", format!("no stream serves user {user}")))?;
    Ok(SinrParts { signal, interference })
}
