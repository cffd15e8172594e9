//! Random vector quantization of channel directions and the Gaussian
//! quantization-error model.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::cell::{complex_normal, ChannelVector};
use crate::error::{Error, Result};

/// Largest codebook size (in bits) searched exhaustively.
pub const EXACT_MAX_BITS: u32 = 14;

/// Worst-case quantization error variance `2^{-B/(M-1)}`.
///
/// For `M = 1` the direction is a pure phase and every codeword is exact,
/// so the variance is 0.
pub fn quantization_variance(bits: u32, m: usize) -> f64 {
    if m < 2 {
        return 0.0;
    }
    (-f64::from(bits) / (m as f64 - 1.0)).exp2()
}

/// `2^B` i.i.d. isotropic unit vectors, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    bits: u32,
    m: usize,
    entries: Vec<Complex64>,
}

impl Codebook {
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.entries.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, index: usize) -> &[Complex64] {
        &self.entries[index * self.m..(index + 1) * self.m]
    }

    pub fn entry_vector(&self, index: usize) -> DVector<Complex64> {
        DVector::from_column_slice(self.entry(index))
    }

    /// Builds a codebook from explicit entries, normalizing each one.
    pub fn from_entries(m: usize, entries: Vec<DVector<Complex64>>) -> Result<Self> {
        let n = entries.len();
        if m == 0 || n == 0 || !n.is_power_of_two() {
            return Err(Error::config("codebook", "need M >= 1 and a power-of-two entry count"));
        }
        let mut flat = Vec::with_capacity(n * m);
        for e in entries {
            if e.len() != m {
                return Err(Error::config("codebook", "entry length differs from M"));
            }
            let norm = e.norm();
            if !(norm > 0.0) {
                return Err(Error::config("codebook", "zero entry"));
            }
            flat.extend(e.iter().map(|c| c / norm));
        }
        Ok(Self {
            bits: n.trailing_zeros(),
            m,
            entries: flat,
        })
    }
}

/// Draws a codebook of `2^bits` normalized complex Gaussian vectors.
pub fn generate_codebook<R: Rng + ?Sized>(bits: u32, m: usize, rng: &mut R) -> Result<Codebook> {
    if bits > EXACT_MAX_BITS {
        return Err(Error::Unsupported {
            op: "generate_codebook",
            reason: format!(
                "B = {bits} exceeds the exact-search limit {EXACT_MAX_BITS}; use the error-model feedback mode"
            ),
        });
    }
    if m == 0 {
        return Err(Error::config("m", "antenna count must be at least 1"));
    }
    let n = 1usize << bits;
    let mut entries = Vec::with_capacity(n * m);
    let mut row = vec![Complex64::new(0.0, 0.0); m];
    for _ in 0..n {
        loop {
            for c in row.iter_mut() {
                *c = complex_normal(rng, 1.0);
            }
            let norm = row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                entries.extend(row.iter().map(|c| c / norm));
                break;
            }
        }
    }
    Ok(Codebook { bits, m, entries })
}

/// Squared chordal distance `1 - |⟨u, c⟩|²` between unit vectors.
pub fn chordal_distance_sq(u: &[Complex64], c: &[Complex64]) -> f64 {
    let ip: Complex64 = u.iter().zip(c).map(|(a, b)| a.conj() * b).sum();
    (1.0 - ip.norm_sqr()).max(0.0)
}

/// Feedback seen by a BS for one link.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedChannel {
    /// Row handed to the precoder, already on the scale of the true channel.
    pub row: DVector<Complex64>,
    /// Channel used to evaluate the received signal.
    pub effective: DVector<Complex64>,
    pub bits: u32,
    /// Modelled error variance `2^{-B/(M-1)}`.
    pub sigma_sq: f64,
    /// True channel norm.
    pub cqi: f64,
    /// Codeword index in exact mode.
    pub index: Option<usize>,
}

impl QuantizedChannel {
    /// Perfect CDI: the BS sees the channel itself.
    pub fn perfect(h: &ChannelVector) -> Self {
        Self {
            row: h.0.clone(),
            effective: h.0.clone(),
            bits: u32::MAX,
            sigma_sq: 0.0,
            cqi: h.norm(),
            index: None,
        }
    }

    /// Squared chordal distance between the fed-back and true directions.
    pub fn chordal_distance_sq(&self) -> f64 {
        let (a, b) = (self.row.norm(), self.effective.norm());
        if !(a > 0.0 && b > 0.0) {
            return 1.0;
        }
        let ip = self.row.dotc(&self.effective);
        (1.0 - ip.norm_sqr() / (a * a * b * b)).max(0.0)
    }
}

/// Best codeword for `h` over the first `2^bits` entries of `cb`. Ties go
/// to the lowest index.
fn best_index(direction: &DVector<Complex64>, cb: &Codebook, count: usize) -> usize {
    let mut best = 0;
    let mut best_gain = f64::NEG_INFINITY;
    for i in 0..count {
        let ip: Complex64 = direction.iter().zip(cb.entry(i)).map(|(a, b)| a.conj() * b).sum();
        let gain = ip.norm_sqr();
        if gain > best_gain {
            best_gain = gain;
            best = i;
        }
    }
    best
}

fn check_dims(h: &ChannelVector, cb: &Codebook) -> Result<()> {
    if h.len() != cb.dim() {
        return Err(Error::config(
            "codebook",
            format!("channel length {} differs from codebook dimension {}", h.len(), cb.dim()),
        ));
    }
    Ok(())
}

fn exact_result(h: &ChannelVector, cb: &Codebook, bits: u32, index: usize) -> QuantizedChannel {
    let cqi = h.norm();
    QuantizedChannel {
        row: cb.entry_vector(index) * Complex64::new(cqi, 0.0),
        effective: h.0.clone(),
        bits,
        sigma_sq: quantization_variance(bits, cb.dim()),
        cqi,
        index: Some(index),
    }
}

/// Quantizes the direction of `h` with the full codebook.
pub fn quantize_cdi(h: &ChannelVector, cb: &Codebook) -> Result<QuantizedChannel> {
    quantize_cdi_prefix(h, cb, cb.bits())
}

/// Quantizes with the nested sub-codebook formed by the first `2^bits`
/// entries.
pub fn quantize_cdi_prefix(h: &ChannelVector, cb: &Codebook, bits: u32) -> Result<QuantizedChannel> {
    check_dims(h, cb)?;
    if bits > cb.bits() {
        return Err(Error::config(
            "bits",
            format!("requested {bits} bits from a {}-bit codebook", cb.bits()),
        ));
    }
    let dir = h.direction()?;
    let index = best_index(&dir, cb, 1 << bits);
    Ok(exact_result(h, cb, bits, index))
}

/// Best index for every nested prefix size `2^0, 2^1, ..., 2^B` from a
/// single scan of the codebook.
pub fn nested_best_indices(h: &ChannelVector, cb: &Codebook) -> Result<Vec<usize>> {
    check_dims(h, cb)?;
    let dir = h.direction()?;
    let mut out = Vec::with_capacity(cb.bits() as usize + 1);
    let mut best = 0;
    let mut best_gain = f64::NEG_INFINITY;
    let mut next_boundary = 1;
    for i in 0..cb.len() {
        let ip: Complex64 = dir.iter().zip(cb.entry(i)).map(|(a, b)| a.conj() * b).sum();
        let gain = ip.norm_sqr();
        if gain > best_gain {
            best_gain = gain;
            best = i;
        }
        if i + 1 == next_boundary {
            out.push(best);
            next_boundary <<= 1;
        }
    }
    Ok(out)
}

/// Prefix-quantized feedback from a precomputed [`nested_best_indices`] scan.
pub fn quantize_from_nested(h: &ChannelVector, cb: &Codebook, nested: &[usize], bits: u32) -> Result<QuantizedChannel> {
    let index = *nested.get(bits as usize).ok_or_else(|| {
        Error::config("bits", format!("requested {bits} bits from a {}-bit codebook", cb.bits()))
    })?;
    Ok(exact_result(h, cb, bits, index))
}

/// Error-model feedback. `h` plays the role of the unit-variance estimate
/// direction `h̃`; the BS sees `h̃`, and the channel is `√(1-σ²) h̃ + e` with
/// `e ~ CN(0, σ² I)`.
pub fn model_quantize<R: Rng + ?Sized>(h: &ChannelVector, bits: u32, rng: &mut R) -> QuantizedChannel {
    let unit_error = DVector::from_fn(h.len(), |_, _| complex_normal(rng, 1.0));
    model_quantize_with(h, &unit_error, bits)
}

/// [`model_quantize`] with a caller-supplied `CN(0, I)` draw that is scaled
/// by `σ`, so different bit counts can share the same randomness.
pub fn model_quantize_with(h: &ChannelVector, unit_error: &DVector<Complex64>, bits: u32) -> QuantizedChannel {
    let s2 = quantization_variance(bits, h.len());
    let estimate = &h.0 * Complex64::new((1.0 - s2).sqrt(), 0.0);
    let effective = estimate + unit_error * Complex64::new(s2.sqrt(), 0.0);
    QuantizedChannel {
        row: h.0.clone(),
        cqi: effective.norm(),
        effective,
        bits,
        sigma_sq: s2,
        index: None,
    }
}

/// Recovers the unit-variance row `ĥ / √(1-σ²)` from an estimate.
pub fn rescale_estimate(estimate: &DVector<Complex64>, sigma_sq: f64) -> Result<DVector<Complex64>> {
    if !(0.0..1.0).contains(&sigma_sq) {
        return Err(Error::domain(
            "quantized_concat_matrix",
            format!("sigma^2 = {sigma_sq} carries no direction information"),
        ));
    }
    Ok(estimate / Complex64::new((1.0 - sigma_sq).sqrt(), 0.0))
}

/// Stacks the fed-back rows of one BS's `KL` links.
pub fn quantized_concat_matrix(quantized: &[QuantizedChannel]) -> Result<DMatrix<Complex64>> {
    let Some(first) = quantized.first() else {
        return Err(Error::config("k", "no quantized channels"));
    };
    let m = first.row.len();
    if quantized.len() > m {
        return Err(Error::config(
            "k",
            format!("KL = {} exceeds M = {m}", quantized.len()),
        ));
    }
    if quantized.iter().any(|q| q.row.len() != m) {
        return Err(Error::config("m", "quantized rows have different lengths"));
    }
    Ok(DMatrix::from_fn(quantized.len(), m, |r, c| quantized[r].row[c]))
}
