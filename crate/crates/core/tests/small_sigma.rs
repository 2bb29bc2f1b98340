use motorlab::analysis::{convergence_study, REGION_SAMPLES};
use motorlab::discretize::build_grid;
use motorlab::hj_limit::applicable_limit;
use motorlab::model::{check_assumptions, decompose_regions, presets, ModelConfig, Regime};
use motorlab::steady::{solve_density, solve_phase_newton, PhaseField};

fn gap_quotients(cfg: &ModelConfig, cells: usize, sigmas: &[f64]) -> Vec<f64> {
    let g = build_grid(cells).unwrap();
    let regions = decompose_regions(&cfg.potentials, REGION_SAMPLES);
    let report = check_assumptions(cfg, &regions);
    let limit = applicable_limit(cfg, &regions, g, &report).unwrap();
    let table = convergence_study(cfg, g, sigmas, limit.profile().unwrap()).unwrap();
    assert!(table.failure.is_none());
    table
        .rows
        .iter()
        .map(|r| r.gap_integral / r.sigma)
        .collect()
}

#[test]
fn phase_gap_quotient_stays_below_its_first_value() {
    let q = gap_quotients(
        &presets::demo(Regime::Bounded),
        1024,
        &[0.05, 0.02, 0.01, 0.005],
    );
    for w in q.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "{q:?}");
    }
    assert!(q.iter().all(|v| v.is_finite() && *v >= 0.0));
}

/// The stronger reading: the quotient stays within a factor 5 of itself over
/// the sweep. On the demo model it decays roughly like `σ`, so this fails.
#[test]
#[ignore = "quotient decays with sigma on the demo model; see README"]
fn phase_gap_quotient_is_flat() {
    let q = gap_quotients(
        &presets::demo(Regime::Bounded),
        2048,
        &[0.05, 0.02, 0.01, 0.005, 0.002],
    );
    let hi = q.iter().cloned().fold(0.0, f64::max);
    let lo = q.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo <= 5.0, "{q:?}");
}

#[test]
fn density_and_phase_paths_agree() {
    let g = build_grid(1024).unwrap();
    for cfg in [
        presets::demo(Regime::Bounded),
        presets::cosine_pair(),
        presets::unit_and_cosine(),
    ] {
        let sigma = 0.02;
        let (_, from_density) = solve_density(&cfg, g, sigma).unwrap();
        let guess: Vec<Vec<f64>> = from_density
            .r_values
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(m, v)| v + 1e-3 * (m as f64 * 0.01).sin())
                    .collect()
            })
            .collect();
        let init = PhaseField::from_phases(g, sigma, guess, cfg.normalization);
        let newton = solve_phase_newton(&cfg, g, sigma, &init).unwrap();
        for (a, b) in from_density.r_values.iter().zip(&newton.r_values) {
            let diff = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-8, "{diff}");
        }
    }
}
