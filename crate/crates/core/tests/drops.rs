use crzf_core::cell::{drop_users, CellLayout, LayoutKind, Point, PowerModel, Region, ShadowDraw, Wedge};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn two_cell() -> CellLayout {
    CellLayout::preset(LayoutKind::TwoCell, 500.0, (325.0, 500.0), 2, 0).unwrap()
}

/// Equal-area rings and equal-angle sectors should receive equal counts.
#[test]
fn annulus_drops_are_area_uniform() {
    let lay = two_cell();
    let (lo, hi) = lay.annulus;
    let n = 200_000;
    let pts = drop_users(&lay, 1, n, Region::Annulus, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
    let (rings, sectors) = (8usize, 8usize);
    let mut counts = vec![0usize; rings * sectors];
    let c = lay.centers[1];
    for p in &pts {
        let (dx, dy) = (p.x - c.x, p.y - c.y);
        let u = ((dx * dx + dy * dy) - lo * lo) / (hi * hi - lo * lo);
        let ring = ((u * rings as f64) as usize).min(rings - 1);
        let theta = dy.atan2(dx).rem_euclid(std::f64::consts::TAU);
        let sector = ((theta / std::f64::consts::TAU * sectors as f64) as usize).min(sectors - 1);
        counts[ring * sectors + sector] += 1;
    }
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi-square {stat}, p = {p}");
}

#[test]
fn neighbouring_sites_are_sqrt3_radii_apart() {
    for kind in [LayoutKind::TwoCell, LayoutKind::ThreeCell, LayoutKind::TwentyoneCell] {
        let lay = CellLayout::preset(kind, 500.0, (325.0, 500.0), 2, 0).unwrap();
        let d = lay.centers[0].distance(&lay.centers[1]);
        assert!((d - 500.0 * 3f64.sqrt()).abs() < 1e-9);
    }
    let lay = CellLayout::preset(LayoutKind::TwentyoneCell, 500.0, (325.0, 500.0), 3, 18).unwrap();
    assert_eq!(lay.noncoord_set.len(), 18);
    let min_gap = (0..21)
        .flat_map(|i| (i + 1..21).map(move |j| (i, j)))
        .map(|(i, j)| lay.centers[i].distance(&lay.centers[j]))
        .fold(f64::INFINITY, f64::min);
    assert!((min_gap - 500.0 * 3f64.sqrt()).abs() < 1e-9);
}

#[test]
fn too_many_noncoordinated_cells_rejected() {
    assert!(CellLayout::preset(LayoutKind::ThreeCell, 500.0, (325.0, 500.0), 3, 1).is_err());
    assert!(CellLayout::preset(LayoutKind::TwoCell, 500.0, (325.0, 500.0), 3, 0).is_err());
}

#[test]
fn unshadowed_power_at_radius_is_reference() {
    let model = PowerModel {
        p0: 7.0,
        radius: 500.0,
        exponent: 3.8,
        shadow_db: 8.0,
        shadowing: false,
        shadow_draw: ShadowDraw::RealNormal,
    };
    assert!((model.path_gain(500.0).unwrap() - 7.0).abs() < 1e-12);
    assert!((model.path_gain(250.0).unwrap() / 7.0 - 2f64.powf(3.8)).abs() < 1e-9);
    assert!(model.path_gain(0.0).is_err());
}

#[test]
fn shadowing_has_the_configured_spread() {
    let model = PowerModel {
        p0: 1.0,
        radius: 500.0,
        exponent: 3.8,
        shadow_db: 8.0,
        shadowing: true,
        shadow_draw: ShadowDraw::RealNormal,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 100_000;
    let db: Vec<f64> = (0..n).map(|_| 10.0 * model.shadowing_factor(&mut rng).log10()).collect();
    let mean = db.iter().sum::<f64>() / n as f64;
    let sd = (db.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    assert!(mean.abs() < 0.1 && (sd - 8.0).abs() < 0.1, "mean {mean}, sd {sd}");
}

proptest! {
    #[test]
    fn drops_stay_in_their_wedge(center in 0.0f64..360.0, width in 1.0f64..360.0, seed in any::<u64>()) {
        let lay = two_cell().with_wedges(vec![Wedge { center_deg: center, width_deg: width }, Wedge::FULL]).unwrap();
        let pts = drop_users(&lay, 0, 50, Region::Annulus, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let origin = Point::new(0.0, 0.0);
        for p in pts {
            let d = p.distance(&origin);
            prop_assert!((325.0 - 1e-9..=500.0 + 1e-9).contains(&d));
            let theta = p.y.atan2(p.x).to_degrees();
            let off = (theta - center + 540.0).rem_euclid(360.0) - 180.0;
            prop_assert!(off.abs() <= width / 2.0 + 1e-6);
        }
    }

    #[test]
    fn full_cell_drops_respect_min_distance(seed in any::<u64>()) {
        let lay = two_cell();
        let pts = drop_users(&lay, 1, 50, Region::FullCell, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for p in pts {
            let d = p.distance(&lay.centers[1]);
            prop_assert!(d >= 35.0 - 1e-9 && d <= 500.0 + 1e-9);
        }
    }
}
