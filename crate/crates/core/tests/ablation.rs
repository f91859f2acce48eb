use nlb_core::experiments::{ablate_nominations, AblationSpec};
use nlb_core::sim::{ContentId, UserId};

const USERS: u32 = 100_000;

#[test]
fn every_item_survives_at_rate_one_minus_x() {
    let items: Vec<ContentId> = (0..50).map(ContentId).collect();
    for x in [0.1, 0.25, 0.5] {
        let spec = AblationSpec::new(x, "survival").unwrap();
        let mut kept = vec![0u32; items.len()];
        for u in 0..USERS {
            for id in &ablate_nominations(std::slice::from_ref(&items), &spec, UserId(u))[0] {
                kept[id.0 as usize] += 1;
            }
        }
        for (i, &k) in kept.iter().enumerate() {
            let f = f64::from(k) / f64::from(USERS);
            assert!((f - (1.0 - x)).abs() < 0.01, "x={x} item {i}: {f}");
        }
    }
}

#[test]
fn inflated_lists_keep_about_n_items() {
    let n = 20;
    for x in [0.1, 0.25, 0.5] {
        let spec = AblationSpec::new(x, "inflate").unwrap();
        let pool: Vec<ContentId> = (0..spec.inflate(n) as u32).map(ContentId).collect();
        let total: usize = (0..10_000u32)
            .map(|u| ablate_nominations(std::slice::from_ref(&pool), &spec, UserId(u))[0].len())
            .sum();
        let mean = total as f64 / 10_000.0;
        let want = pool.len() as f64 * (1.0 - x);
        assert!((mean - want).abs() < 0.1, "x={x}: {mean} vs {want}");
        assert!(want >= n as f64 - 1e-9);
    }
}

#[test]
fn a_user_sees_the_same_reduced_corpus_every_request() {
    let spec = AblationSpec::new(0.5, "fixed").unwrap();
    let a: Vec<ContentId> = (0..200).map(ContentId).collect();
    let b: Vec<ContentId> = (100..300).map(ContentId).collect();
    let user = UserId(42);
    let ka = &ablate_nominations(&[a], &spec, user)[0];
    let kb = &ablate_nominations(&[b], &spec, user)[0];
    let shared_a: Vec<_> = ka.iter().filter(|c| c.0 >= 100).collect();
    let shared_b: Vec<_> = kb.iter().filter(|c| c.0 < 200).collect();
    assert_eq!(shared_a, shared_b);
}
