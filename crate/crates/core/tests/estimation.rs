use ssr_telescopy::ancilla;
use ssr_telescopy::estimation::monte_carlo;
use ssr_telescopy::{McMode, MonteCarloConfig, SourceParams};

fn gjc() -> Vec<ssr_telescopy::C64> {
    ancilla::gjc().diagonal().unwrap()
}

fn config(eps: f64, trials: u64, repetitions: u64, seed: u64, mode: McMode) -> MonteCarloConfig {
    MonteCarloConfig {
        source: SourceParams::new(eps, 0.7, 0.3).unwrap(),
        trials,
        repetitions,
        seed,
        mode,
    }
}

#[test]
fn theta_only_fit_matches_one_parameter_bound() {
    let r = monte_carlo(&gjc(), &config(1e-2, 100_000, 200, 0, McMode::ThetaOnly)).unwrap();
    assert!((r.ratio - 1.0).abs() < 0.10, "ratio {}", r.ratio);
    assert!(!r.wide_interval);
}

#[test]
fn visibility_estimate_is_consistent() {
    let r = monte_carlo(&gjc(), &config(1e-3, 1_000_000, 100, 7, McMode::Joint)).unwrap();
    assert!(
        r.g_bias.abs() < 3.0 * r.g_standard_error,
        "bias {} vs standard error {}",
        r.g_bias,
        r.g_standard_error
    );
}

#[test]
fn no_super_efficiency() {
    // Pooled over many repetitions so the variance estimate itself is tight.
    let r = monte_carlo(&gjc(), &config(1e-2, 100_000, 4000, 1, McMode::ThetaOnly)).unwrap();
    assert!(r.ratio >= 0.95, "theta-only ratio {}", r.ratio);
    let reps = 1000u64;
    let r = monte_carlo(&gjc(), &config(1e-2, 100_000, reps, 2, McMode::Joint)).unwrap();
    // Three standard errors of a sample variance over `reps` draws.
    let slack = 3.0 * (2.0 / (reps as f64 - 1.0)).sqrt();
    assert!(r.ratio >= 0.95 - slack, "joint theta ratio {}", r.ratio);
    assert!(r.ratio_gmod.unwrap() >= 0.95 - slack, "joint |g| ratio {:?}", r.ratio_gmod);
}

#[test]
fn covariance_is_positive_semidefinite() {
    let r = monte_carlo(&gjc(), &config(1e-2, 50_000, 50, 3, McMode::Joint)).unwrap();
    let c = r.covariance;
    assert!(c[0][0] >= 0.0 && c[1][1] >= 0.0);
    assert!(c[0][0] * c[1][1] - c[0][1] * c[1][0] >= -1e-15);
    assert_eq!(c[0][1], c[1][0]);
}

#[test]
fn repetitions_are_reproducible() {
    let cfg = config(1e-2, 20_000, 16, 42, McMode::Joint);
    assert_eq!(monte_carlo(&gjc(), &cfg).unwrap(), monte_carlo(&gjc(), &cfg).unwrap());
}
