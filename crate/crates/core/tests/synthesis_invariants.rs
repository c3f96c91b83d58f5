//! Structural invariants of the gridded synthesis problem: enriching the
//! certificate basis can only help, refining the grid must not move the
//! optimum much, and recovered gains must re-certify with the analysis LMI.

use lpvsyn::iqc::{make_multiplier, realize_filter, MultiplierKind, MultiplierRealization};
use lpvsyn::model::{augment_with_filter, benchmark_plant, nominal_interconnection, DelayedLpvPlant, DelaySpec};
use lpvsyn::synth::{minimize_gamma, synthesize, verify_analysis, SynthesisConfig};

fn pi2_setup(nu: f64) -> (DelayedLpvPlant, MultiplierRealization) {
    let plant = benchmark_plant(DelaySpec::new(2.0, 1.2).unwrap(), nu);
    let spec = make_multiplier(MultiplierKind::Pi2, &plant.delay, 1.0, 1e-7, 1e-4).unwrap();
    let real = realize_filter(&[spec], plant.n_x).unwrap();
    (plant, real)
}

#[test]
fn basis_enrichment_never_increases_gamma() {
    let (plant, real) = pi2_setup(0.5);
    let constant = SynthesisConfig::quadratic(1, vec![11]);
    let enriched = SynthesisConfig::parameter_dependent(vec![11]);
    let g_const = minimize_gamma(&plant, &real, &constant).unwrap().gamma;
    let g_rich = minimize_gamma(&plant, &real, &enriched).unwrap().gamma;
    assert!(
        g_rich <= g_const + 1e-6,
        "enriched basis got worse: {g_rich} vs {g_const}"
    );
}

#[test]
fn grid_doubling_moves_gamma_by_at_most_two_percent() {
    let (plant, real) = pi2_setup(0.5);
    let coarse = SynthesisConfig::parameter_dependent(vec![11]);
    let fine = SynthesisConfig::parameter_dependent(vec![21]);
    let g_coarse = minimize_gamma(&plant, &real, &coarse).unwrap().gamma;
    let g_fine = minimize_gamma(&plant, &real, &fine).unwrap().gamma;
    let rel = (g_fine - g_coarse).abs() / g_fine;
    assert!(
        rel <= 0.02,
        "grid refinement moved gamma by {:.2}%: {g_coarse} -> {g_fine}",
        rel * 100.0
    );
}

#[test]
fn recovered_gains_recertify_with_analysis_lmi() {
    let (plant, real) = pi2_setup(0.5);
    let config = SynthesisConfig::parameter_dependent(vec![11]);
    let result = synthesize(&plant, &real, &config).unwrap();
    assert_eq!(result.gains.len(), result.grid.len());
    let aug = augment_with_filter(&nominal_interconnection(&plant).unwrap(), &real).unwrap();
    let cert = verify_analysis(
        &aug,
        &result.gains,
        &result.grid,
        &result.r_basis,
        &result.x_basis,
        result.gamma * (1.0 + 2.0 * config.recovery_margin),
        &config.sdp,
    )
    .unwrap();
    assert!(cert.margin < 0.0, "analysis slack not negative: {}", cert.margin);
}
