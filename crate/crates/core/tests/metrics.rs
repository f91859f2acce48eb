mod common;

use proptest::prelude::*;

use nlb_core::metrics::spearman;

proptest! {
    #[test]
    fn spearman_matches_brute_force(pairs in prop::collection::vec((0u8..6, -3.0..3.0f64), 3..60)) {
        // small integer range on x forces ties
        let x: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let want = common::spearman_brute(&x, &y);
        match spearman(&x, &y) {
            Ok(got) => prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}"),
            Err(_) => prop_assert!(!want.is_finite()),
        }
    }
}

#[test]
fn spearman_is_invariant_to_monotone_maps() {
    let x: Vec<f64> = (0..40).map(|i| f64::from(i * 7 % 13)).collect();
    let y: Vec<f64> = (0..40).map(|i| f64::from(i * 5 % 11)).collect();
    let cubed: Vec<f64> = x.iter().map(|v| v.powi(3) - 2.0).collect();
    assert!((spearman(&x, &y).unwrap() - spearman(&cubed, &y).unwrap()).abs() < 1e-15);
}
