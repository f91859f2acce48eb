use statrs::function::gamma::ln_gamma;

use nlb_core::sim::{build_world, WorldConfig};

/// `E|v|` for `v ~ N(0, s^2 I_k)` is `s * sqrt(2) * Gamma((k+1)/2) / Gamma(k/2)`.
fn chi_mean(k: usize, s: f64) -> f64 {
    let k = k as f64;
    s * 2f64.sqrt() * (ln_gamma((k + 1.0) / 2.0) - ln_gamma(k / 2.0)).exp()
}

#[test]
fn latent_norms_follow_the_chi_distribution() {
    let cfg = WorldConfig {
        n_users: 20_000,
        initial_corpus: 20_000,
        latent_dim: 6,
        latent_scale: 1.5,
        ..WorldConfig::default()
    };
    let w = build_world(cfg.clone()).unwrap();
    let s = cfg.latent_scale / (cfg.latent_dim as f64).sqrt();
    let want = chi_mean(cfg.latent_dim, s);
    // Var|v| = k s^2 - (E|v|)^2
    let sd = (cfg.latent_dim as f64 * s * s - want * want).sqrt();
    let norms = [
        w.users().iter().map(|u| norm(&u.latent_pref)).collect::<Vec<_>>(),
        w.items().iter().map(|c| norm(&c.latent_topic)).collect::<Vec<_>>(),
    ];
    for v in norms {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - want).abs() < 4.0 * sd / (v.len() as f64).sqrt(), "{mean} vs {want}");
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
