//! Implementations of the CLI subcommands.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use lpvsyn::iqc::{
    check_hard_iqc_empirical, default_frequency_grid, make_multiplier, realize_filter,
    verify_spectral_factorization, MultiplierKind,
};
use lpvsyn::model::{augment_with_filter, nominal_interconnection, DelaySpec};
use lpvsyn::param::{BasisFunction, ParameterDomain};
use lpvsyn::sim::{l2_gain_estimate, simulate, SimulationTrace};
use lpvsyn::synth::{
    minimize_gamma, synthesize, verify_analysis, GainSchedule, SynthesisResult,
};
use lpvsyn::{Error, Result};

use crate::config::RunConfig;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::InvalidConfig(format!("cannot create {parent:?}: {e}")))?;
        }
    }
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display())))
}

fn out_path(config: &RunConfig, explicit: Option<&Path>, default_name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => match &config.output_dir {
            Some(dir) => Path::new(dir).join(default_name),
            None => PathBuf::from(default_name),
        },
    }
}

fn load_result(path: &Path) -> Result<SynthesisResult> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

pub fn cmd_synthesize(
    config_path: &Path,
    out: Option<&Path>,
    gamma: Option<f64>,
) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let plant = config.build_plant()?;
    let realization = config.build_realization(&plant)?;
    let synth_config = config.build_synthesis(gamma)?;
    let result = synthesize(&plant, &realization, &synth_config)?;
    let path = out_path(&config, out, "synthesis_result.json");
    write_json(&path, &result)?;
    println!(
        "synthesis ok: gamma = {:.6}, {} grid points, result -> {}",
        result.gamma,
        result.grid.len(),
        path.display()
    );
    Ok(())
}

pub fn cmd_analyze(
    config_path: &Path,
    gains_path: &Path,
    gamma: f64,
    out: Option<&Path>,
) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let plant = config.build_plant()?;
    let realization = config.build_realization(&plant)?;
    let result = load_result(gains_path)?;
    if result.gains.is_empty() {
        return Err(Error::InvalidConfig(
            "gains file carries no recovered gain schedule".into(),
        ));
    }
    let aug = augment_with_filter(&nominal_interconnection(&plant)?, &realization)?;
    let cert = verify_analysis(
        &aug,
        &result.gains,
        &result.grid,
        &result.r_basis,
        &result.x_basis,
        gamma,
        &Default::default(),
    )?;
    let path = out_path(&config, out, "analysis_certificate.json");
    write_json(&path, &cert)?;
    println!(
        "analysis ok: gamma = {gamma:.6} certified (slack {:.3e}), certificate -> {}",
        cert.margin,
        path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    scenario: String,
    l2_ratio: f64,
    certified_gamma: f64,
    max_abs_u: f64,
    max_state_norm: f64,
    final_state_norm: f64,
}

fn write_trace_csv(path: &Path, trace: &SimulationTrace) -> Result<()> {
    let mut out = String::new();
    out.push('t');
    let vec_cols = |out: &mut String, name: &str, n: usize| {
        for i in 0..n {
            out.push_str(&format!(",{name}{i}"));
        }
    };
    vec_cols(&mut out, "x_p", trace.x_p[0].len());
    vec_cols(&mut out, "x_psi", trace.x_psi[0].len());
    vec_cols(&mut out, "w", trace.w[0].len());
    vec_cols(&mut out, "u", trace.u[0].len());
    vec_cols(&mut out, "e", trace.e[0].len());
    vec_cols(&mut out, "d", trace.d[0].len());
    out.push_str(",tau");
    vec_cols(&mut out, "rho", trace.rho[0].len());
    out.push('\n');
    for i in 0..trace.t.len() {
        out.push_str(&format!("{}", trace.t[i]));
        let push_vec = |out: &mut String, v: &DVector<f64>| {
            for x in v.iter() {
                out.push_str(&format!(",{x}"));
            }
        };
        push_vec(&mut out, &trace.x_p[i]);
        push_vec(&mut out, &trace.x_psi[i]);
        push_vec(&mut out, &trace.w[i]);
        push_vec(&mut out, &trace.u[i]);
        push_vec(&mut out, &trace.e[i]);
        push_vec(&mut out, &trace.d[i]);
        out.push_str(&format!(",{}", trace.tau[i]));
        for x in &trace.rho[i] {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::InvalidConfig(format!("cannot create {parent:?}: {e}")))?;
        }
    }
    fs::write(path, out)
        .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_simulate(
    config_path: &Path,
    gains_path: &Path,
    scenario_name: &str,
    out: Option<&Path>,
) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let plant = config.build_plant()?;
    let realization = config.build_realization(&plant)?;
    let result = load_result(gains_path)?;
    if result.gains.is_empty() {
        return Err(Error::InvalidConfig(
            "gains file carries no recovered gain schedule".into(),
        ));
    }
    let schedule = GainSchedule::new(&result.grid, result.gains.clone())?;
    let scenario = config.scenario(scenario_name)?;
    let trace = simulate(&plant, &realization, &schedule, scenario)?;
    let ratio = l2_gain_estimate(&trace)?;
    let max_abs_u = trace
        .u
        .iter()
        .map(|u| u.amax())
        .fold(0.0_f64, f64::max);
    let max_state_norm = trace
        .x_p
        .iter()
        .map(|x| x.norm())
        .fold(0.0_f64, f64::max);
    let summary = SimulationSummary {
        scenario: scenario_name.to_string(),
        l2_ratio: ratio,
        certified_gamma: result.gamma,
        max_abs_u,
        max_state_norm,
        final_state_norm: trace.x_p.last().map_or(0.0, |x| x.norm()),
    };
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(config.output_dir.as_deref().unwrap_or(".")),
    };
    let trace_path = dir.join(format!("{scenario_name}_trace.csv"));
    let summary_path = dir.join(format!("{scenario_name}_summary.json"));
    write_trace_csv(&trace_path, &trace)?;
    write_json(&summary_path, &summary)?;
    println!(
        "simulation ok: ratio = {:.6} (certified {:.6}), trace -> {}",
        ratio,
        result.gamma,
        trace_path.display()
    );
    Ok(())
}

/// The delay classes of the benchmark comparison table.
pub const TABLE_DELAY_PAIRS: [(f64, f64); 5] =
    [(0.0, 10.0), (0.5, 2.5), (0.9, 1.0), (1.5, 1.0), (1.7, 2.5)];

/// The rate bounds of the parameter-dependent rows.
pub const TABLE_NU_VALUES: [f64; 5] = [0.1, 0.5, 1.0, 5.0, 10.0];

/// One synthesis cell of the comparison table: the plant from the config
/// with the delay class and parameter rate bound overridden.
fn table_cell(
    config: &RunConfig,
    r: f64,
    tau_bar: f64,
    nu: Option<f64>,
) -> Result<f64> {
    let base = config.build_plant()?;
    let rate: Vec<(f64, f64)> = match nu {
        Some(v) => base.domain.intervals().iter().map(|_| (-v, v)).collect(),
        None => base.domain.intervals().iter().map(|_| (0.0, 0.0)).collect(),
    };
    let domain = ParameterDomain::new(base.domain.intervals().to_vec(), rate)?;
    let delay = DelaySpec::new(tau_bar, r)?;
    let mut plant = base;
    plant.domain = domain;
    plant.delay = delay;

    let specs: Vec<_> = config
        .multiplier_kinds(r)
        .iter()
        .map(|&kind| {
            make_multiplier(
                kind,
                &plant.delay,
                config.multipliers.c1,
                config.multipliers.epsilon,
                config.multipliers.delta,
            )
        })
        .collect::<Result<_>>()?;
    let realization = realize_filter(&specs, plant.n_x)?;

    let dim = plant.domain.dim();
    let mut synth_config = config.build_synthesis(None)?;
    if nu.is_none() {
        // Quadratic Lyapunov function row.
        synth_config.r_basis = vec![BasisFunction::constant(dim)];
        synth_config.x_basis = vec![BasisFunction::constant(dim)];
    }
    Ok(minimize_gamma(&plant, &realization, &synth_config)?.gamma)
}

pub fn cmd_reproduce_table(config_path: &Path, out: Option<&Path>) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let rows: Vec<(String, Option<f64>)> = std::iter::once(("quadratic".to_string(), None))
        .chain(TABLE_NU_VALUES.iter().map(|&nu| ("pd".to_string(), Some(nu))))
        .collect();

    let cells: Vec<((usize, usize), Result<f64>)> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, (_, nu))| {
            TABLE_DELAY_PAIRS
                .iter()
                .enumerate()
                .map(move |(j, &(r, tau))| (i, j, r, tau, *nu))
        })
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, j, r, tau, nu)| ((i, j), table_cell(&config, r, tau, nu)))
        .collect();

    let mut table = vec![vec![String::new(); TABLE_DELAY_PAIRS.len()]; rows.len()];
    for ((i, j), cell) in cells {
        table[i][j] = match cell {
            Ok(g) => format!("{g:.4}"),
            Err(Error::Infeasible(_)) => "inf".to_string(),
            Err(e) => return Err(e),
        };
    }

    let mut csv = String::from("method,nu");
    for (r, tau) in TABLE_DELAY_PAIRS {
        csv.push_str(&format!(",r{r}_tau{tau}"));
    }
    csv.push('\n');
    for (i, (method, nu)) in rows.iter().enumerate() {
        let nu_str = nu.map_or(String::new(), |v| format!("{v}"));
        csv.push_str(&format!("{method},{nu_str},{}\n", table[i].join(",")));
    }
    // Comparison row from the exact-memory LFT method: not implemented.
    csv.push_str(&format!(
        "lft_exact_memory,,{}\n",
        vec!["out-of-scope"; TABLE_DELAY_PAIRS.len()].join(",")
    ));

    let path = out_path(&config, out, "table.csv");
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            let _ = fs::create_dir_all(parent);
        }
    }
    fs::write(&path, &csv)
        .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display())))?;
    print!("{csv}");
    let _ = std::io::stdout().flush();
    println!("table -> {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct IqcValidationEntry {
    kind: MultiplierKind,
    factorization_max_error: f64,
    filter_stable: bool,
    inverse_stable: bool,
    hard_iqc_min: Vec<f64>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct IqcValidationReport {
    tau_bar: f64,
    r: f64,
    seed: u64,
    entries: Vec<IqcValidationEntry>,
    pass: bool,
}

/// A randomized admissible input/delay pair for the empirical check.
fn random_hard_iqc_scenario(
    rng: &mut ChaCha8Rng,
    tau_bar: f64,
    r: f64,
) -> (impl Fn(f64) -> DVector<f64>, impl Fn(f64) -> f64) {
    let amps: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let freqs: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..3.0)).collect();
    let decay: f64 = rng.random_range(0.05..0.3);
    let v = move |t: f64| {
        let s: f64 = amps
            .iter()
            .zip(&freqs)
            .map(|(a, f)| a * (f * t).sin())
            .sum();
        DVector::from_element(1, s * (-decay * t).exp())
    };
    // Delay oscillating around tau_bar/2 within both the range and the
    // rate bound.
    let amp: f64 = rng.random_range(0.0..0.4) * tau_bar;
    let max_rate = (0.9 * r).max(1e-3);
    let freq: f64 = rng.random_range(0.0..max_rate / amp.max(1e-6)).min(5.0);
    let phase: f64 = rng.random_range(0.0..6.28);
    let mid = tau_bar / 2.0;
    let tau = move |t: f64| mid + amp * (freq * t + phase).sin();
    (v, tau)
}

pub fn cmd_validate_iqc(
    config_path: &Path,
    seed: u64,
    out: Option<&Path>,
    trials: usize,
) -> Result<bool> {
    let config = RunConfig::load(config_path)?;
    let delay = DelaySpec::new(config.delay.tau_bar, config.delay.r)?;
    let specs = config.build_multipliers(&delay)?;
    let realization = realize_filter(&specs, 1)?;
    let grid = default_frequency_grid(delay.tau_bar, 100);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let report = verify_spectral_factorization(spec, &realization, &grid, 1e-6)?;
        let mut hard_iqc_min = Vec::with_capacity(trials);
        let mut pass = report.pass;
        for _ in 0..trials {
            let (v, tau) = random_hard_iqc_scenario(&mut rng, delay.tau_bar, delay.r);
            let energy: f64 = (0..30_000)
                .map(|i| v(i as f64 * 1e-3).norm_squared() * 1e-3)
                .sum();
            let min = check_hard_iqc_empirical(&realization, k, &v, &tau, 30.0, 1e-3)?;
            pass &= min >= -1e-6 * energy.max(1.0);
            hard_iqc_min.push(min);
        }
        entries.push(IqcValidationEntry {
            kind: spec.kind,
            factorization_max_error: report.max_error,
            filter_stable: report.filter_stable,
            inverse_stable: report.inverse_stable,
            hard_iqc_min,
            pass,
        });
    }
    let all_pass = entries.iter().all(|e| e.pass);
    let report = IqcValidationReport {
        tau_bar: delay.tau_bar,
        r: delay.r,
        seed,
        entries,
        pass: all_pass,
    };
    let path = out_path(&config, out, "iqc_validation.json");
    write_json(&path, &report)?;
    println!(
        "iqc validation {}: report -> {}",
        if all_pass { "ok" } else { "FAILED" },
        path.display()
    );
    Ok(all_pass)
}
