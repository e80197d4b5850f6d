//! Property tests for the library invariants.

use longsim_core::harness::{one_sided_pvalue, two_sided_pvalue};
use longsim_core::kuiper::kuiper_distance;
use longsim_core::returns::{assign_signs, inject_sign_acf, SignModel};
use longsim_core::series::{stationary_embed, ReturnKind, ReturnSeries};
use longsim_core::stats::{acf, d_acf, gain_loss_curve, heavy_tail_measure_with_grid, quantile_mad, AcfCurve};
use proptest::prelude::*;

fn finite_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, len)
}

fn nonzero_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-1e3..1e3f64).prop_map(|v| if v == 0.0 { 0.5 } else { v }), len)
}

proptest! {
    #[test]
    fn kuiper_symmetric_and_bounded(a in finite_vec(1..40), b in finite_vec(1..40)) {
        let d1 = kuiper_distance(&a, &b).unwrap();
        let d2 = kuiper_distance(&b, &a).unwrap();
        prop_assert_eq!(d1.to_bits(), d2.to_bits());
        prop_assert!((0.0..=2.0).contains(&d1));
    }

    #[test]
    fn kuiper_invariant_under_increasing_map(a in finite_vec(1..30), b in finite_vec(1..30)) {
        // exactly monotone map: replace values by their pooled dense ranks,
        // which preserves order and tie structure without rounding
        let mut pool: Vec<f64> = a.iter().chain(&b).copied().collect();
        pool.sort_by(f64::total_cmp);
        pool.dedup();
        let rank = |v: f64| pool.partition_point(|p| *p < v) as f64;
        let ta: Vec<f64> = a.iter().map(|v| rank(*v)).collect();
        let tb: Vec<f64> = b.iter().map(|v| rank(*v)).collect();
        let d = kuiper_distance(&a, &b).unwrap();
        let dt = kuiper_distance(&ta, &tb).unwrap();
        prop_assert_eq!(d.to_bits(), dt.to_bits());
    }

    #[test]
    fn heavy_tail_scale_invariant(x in nonzero_vec(120..400), c in prop::sample::select(vec![0.5f64, 2.0, -4.0, 1e-4, 1e4])) {
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let a = heavy_tail_measure_with_grid(&x, 500).unwrap();
        let b = heavy_tail_measure_with_grid(&scaled, 500).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn acf_affine_invariant(x in finite_vec(30..200), a in 0.1..10.0f64, b in -5.0..5.0f64) {
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-6);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let ax = acf(&x, 5).unwrap();
        let ay = acf(&y, 5).unwrap();
        for (u, v) in ax.values.iter().zip(&ay.values) {
            prop_assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn d_acf_is_a_metric(x in finite_vec(10..11), y in finite_vec(10..11), z in finite_vec(10..11)) {
        let cx = AcfCurve { values: x };
        let cy = AcfCurve { values: y };
        let cz = AcfCurve { values: z };
        let dxy = d_acf(&cx, &cy).unwrap();
        let dyx = d_acf(&cy, &cx).unwrap();
        let dxz = d_acf(&cx, &cz).unwrap();
        let dzy = d_acf(&cz, &cy).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(dxy.to_bits(), dyx.to_bits());
        prop_assert!(dxy <= dxz + dzy + 1e-12);
        prop_assert_eq!(d_acf(&cx, &cx).unwrap(), 0.0);
    }

    #[test]
    fn pvalues_in_range_and_permutation_invariant(
        sims in finite_vec(5..200),
        emp in -1e3..1e3f64,
        rot in 0usize..200,
    ) {
        let p2 = two_sided_pvalue(emp, &sims);
        let p1 = one_sided_pvalue(emp, &sims);
        prop_assert!((0.0..=0.5).contains(&p2));
        prop_assert!((0.0..=1.0).contains(&p1));
        let mut rotated = sims.clone();
        rotated.rotate_left(rot % sims.len());
        prop_assert_eq!(two_sided_pvalue(emp, &rotated).to_bits(), p2.to_bits());
        prop_assert_eq!(one_sided_pvalue(emp, &rotated).to_bits(), p1.to_bits());
    }

    #[test]
    fn embed_preserves_multiset(x in nonzero_vec(2..100), seed in any::<u64>()) {
        let s = ReturnSeries::new(x.clone(), None, "p", 0, ReturnKind::Simple).unwrap();
        let e = stationary_embed(&s, seed);
        let mut a = x;
        let mut b = e.values().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sign_stages_preserve_magnitudes(
        mags in prop::collection::vec(1e-6..10.0f64, 2..200),
        gamma in 0.0..=1.0f64,
        eacf1 in -0.9..0.9f64,
        seed in any::<u64>(),
    ) {
        let model = SignModel { eqa: vec![0.5, 1.0, 3.0], p: vec![0.8, 0.5, 0.2] };
        let signed = assign_signs(&mags, &model, gamma, seed);
        let injected = inject_sign_acf(&signed, eacf1, seed ^ 1);
        for (m, v) in mags.iter().zip(&injected) {
            prop_assert_eq!(*m, v.abs());
        }
    }

    #[test]
    fn quantile_mad_shift(x in prop::collection::vec(-100.0..100.0f64, 1..80), c in -10.0..10.0f64) {
        let mut a = x;
        a.sort_by(f64::total_cmp);
        let b: Vec<f64> = a.iter().map(|v| v + c).collect();
        let d = quantile_mad(&a, &b).unwrap();
        prop_assert!((d - c.abs()).abs() < 1e-9);
    }

    #[test]
    fn gain_loss_curve_invariants(seed in any::<u64>()) {
        use rand::RngExt;
        let mut rng = longsim_core::seeding::rng_for(seed, &[]);
        let n = 600 + (seed % 97) as usize;
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                let m = rng.random::<f64>().max(1e-9);
                if rng.random::<bool>() { m } else { -m }
            })
            .collect();
        let r = ReturnSeries::new(vals, None, "g", 0, ReturnKind::Simple).unwrap();
        let g = gain_loss_curve(&r, 0.02, 0.98, 12).unwrap();
        prop_assert!(g.pos_frequency.iter().all(|p| (0.0..=1.0).contains(p)));
        let max = g.bin_counts.iter().max().unwrap();
        let min = g.bin_counts.iter().min().unwrap();
        prop_assert!(max - min <= 1, "bin counts {:?}", g.bin_counts);
        prop_assert!(g.bin_centers.windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #[test]
    fn acf_values_within_unit_band(x in prop::collection::vec(-50.0..50.0f64, 20..150)) {
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-9);
        let a = acf(&x, 8).unwrap();
        for v in &a.values {
            prop_assert!(v.abs() <= 1.0 + 1e-12, "acf value {}", v);
        }
    }
}
