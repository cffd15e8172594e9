use crzf_core::cell::{sample_channel, ChannelVector};
use crzf_core::rvq::{
    chordal_distance_sq, generate_codebook, model_quantize_with, nested_best_indices, quantization_variance,
    quantize_cdi, quantize_cdi_prefix, quantize_from_nested, Codebook,
};
use crzf_core::C64;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_unitary(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let cols: Vec<DVector<C64>> = (0..m).map(|_| sample_channel(m, rng).unwrap().0).collect();
    DMatrix::from_columns(&cols).qr().q()
}

#[test]
fn model_error_has_the_configured_variance() {
    let (m, bits) = (4, 6);
    let s2 = quantization_variance(bits, m);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 50_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let h = sample_channel(m, &mut rng).unwrap();
        let e = sample_channel(m, &mut rng).unwrap();
        let q = model_quantize_with(&h, &e.0, bits);
        let scaled = &q.row * C64::new((1.0 - s2).sqrt(), 0.0);
        acc += (&q.effective - scaled).norm_squared();
    }
    let mean = acc / n as f64;
    assert!((mean / (m as f64 * s2) - 1.0).abs() < 0.02, "{mean} vs {}", m as f64 * s2);
}

#[test]
fn exact_search_beats_the_bound_for_small_codebooks() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (m, bits) in [(2, 3), (4, 4), (4, 6)] {
        let n = 4000;
        let mut acc = 0.0;
        for _ in 0..n {
            let h = sample_channel(m, &mut rng).unwrap();
            let cb = generate_codebook(bits, m, &mut rng).unwrap();
            acc += quantize_cdi(&h, &cb).unwrap().chordal_distance_sq();
        }
        assert!(acc / n as f64 <= quantization_variance(bits, m), "M={m} B={bits}");
    }
}

#[test]
fn codewords_are_unit_norm() {
    let cb = generate_codebook(8, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(cb.len(), 256);
    for i in 0..cb.len() {
        let n: f64 = cb.entry(i).iter().map(|c| c.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
}

#[test]
fn too_many_exact_bits_is_unsupported() {
    assert!(generate_codebook(15, 4, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quantization_is_rotation_equivariant(seed in any::<u64>(), m in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = sample_channel(m, &mut rng).unwrap();
        let cb = generate_codebook(5, m, &mut rng).unwrap();
        let u = random_unitary(m, &mut rng);
        let rotate = |v: &DVector<C64>| (v.transpose() * &u).transpose();
        let rotated_h = ChannelVector(rotate(&h.0));
        let rotated_cb = Codebook::from_entries(m, (0..cb.len()).map(|i| rotate(&cb.entry_vector(i))).collect()).unwrap();
        let a = quantize_cdi(&h, &cb).unwrap();
        let b = quantize_cdi(&rotated_h, &rotated_cb).unwrap();
        let d = (a.chordal_distance_sq() - b.chordal_distance_sq()).abs();
        prop_assert!(a.index == b.index || d < 1e-12);
    }

    #[test]
    fn nested_search_matches_prefix_search(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = sample_channel(4, &mut rng).unwrap();
        let cb = generate_codebook(8, 4, &mut rng).unwrap();
        let nested = nested_best_indices(&h, &cb).unwrap();
        prop_assert_eq!(nested.len(), 9);
        let mut prev = f64::INFINITY;
        for bits in 0..=8 {
            let a = quantize_cdi_prefix(&h, &cb, bits).unwrap();
            let b = quantize_from_nested(&h, &cb, &nested, bits).unwrap();
            prop_assert_eq!(a.index, b.index);
            let d = a.chordal_distance_sq();
            prop_assert!(d <= prev + 1e-15);
            prev = d;
        }
    }

    #[test]
    fn chordal_distance_is_scale_free(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = sample_channel(4, &mut rng).unwrap();
        let c = sample_channel(4, &mut rng).unwrap();
        let u = h.direction().unwrap();
        let cu = c.direction().unwrap();
        let d = chordal_distance_sq(u.as_slice(), cu.as_slice());
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        let cs = &cu * C64::from_polar(1.0, scale);
        prop_assert!((chordal_distance_sq(u.as_slice(), cs.as_slice()) - d).abs() < 1e-12);
    }
}
