//! Fixed-step simulation of the closed-loop delay-differential system.
//!
//! The plant is integrated in its transformed form, where the delay enters
//! only through the mismatch signal `w(t) = x_p(t) - x_p(t - tau(t))`
//! (zero pre-history for nonpositive arguments). The multiplier filter
//! states are propagated alongside the plant, and the scheduled feedback
//! `u = F_c(rho) [x_p; x_psi] + H_c(rho) w` closes the loop. Integration
//! is classical fourth-order Runge-Kutta; delayed values inside the stages
//! come from the partially built history, which is valid for an explicit
//! method because the step is required to satisfy `h <= tau_min / 2`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iqc::MultiplierRealization;
use crate::model::DelayedLpvPlant;
use crate::synth::GainSchedule;

/// Absolute slack when checking sampled trajectory values against bounds.
const VALUE_TOL: f64 = 1e-9;
/// Slack on finite-difference rate checks (centered differences).
const RATE_TOL: f64 = 1e-4;

/// Scalar signal descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Trajectory {
    Constant { value: f64 },
    /// `amplitude * sin(omega * t + phase) + offset`.
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude` on `[start, end)`, zero elsewhere.
    Pulse { amplitude: f64, start: f64, end: f64 },
    /// Piecewise-linear table, clamped outside the time range.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl Trajectory {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Trajectory::Constant { value } => *value,
            Trajectory::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => amplitude * (omega * t + phase).sin() + offset,
            Trajectory::Pulse {
                amplitude,
                start,
                end,
            } => {
                if t >= *start && t < *end {
                    *amplitude
                } else {
                    0.0
                }
            }
            Trajectory::Tabulated { times, values } => {
                if times.is_empty() {
                    return 0.0;
                }
                if t <= times[0] {
                    return values[0];
                }
                if t >= *times.last().unwrap() {
                    return *values.last().unwrap();
                }
                let j = times.partition_point(|&g| g <= t) - 1;
                let s = (t - times[j]) / (times[j + 1] - times[j]);
                values[j] * (1.0 - s) + values[j + 1] * s
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Trajectory::Tabulated { times, values } = self {
            if times.len() != values.len() || times.is_empty() {
                return Err(Error::InvalidConfig(
                    "tabulated trajectory needs matching, nonempty times/values".into(),
                ));
            }
            if times.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(
                    "tabulated trajectory times must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A complete simulation scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    /// One trajectory per parameter component.
    pub rho: Vec<Trajectory>,
    pub tau: Trajectory,
    /// One trajectory per disturbance channel.
    pub d: Vec<Trajectory>,
    /// Horizon in seconds.
    pub horizon: f64,
    /// Step size in seconds.
    pub step: f64,
    /// Initial plant state; empty means zero.
    #[serde(default)]
    pub x0: Vec<f64>,
}

/// Recorded closed-loop signals, one row per time node.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub t: Vec<f64>,
    pub x_p: Vec<DVector<f64>>,
    pub x_psi: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub e: Vec<DVector<f64>>,
    pub d: Vec<DVector<f64>>,
    pub tau: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
}

/// Uniformly sampled plant-state history supporting delayed lookups.
#[derive(Debug, Clone)]
pub struct History {
    step: f64,
    dim: usize,
    values: Vec<DVector<f64>>,
}

impl History {
    pub fn new(step: f64, dim: usize) -> Self {
        Self {
            step,
            dim,
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, value: DVector<f64>) {
        debug_assert_eq!(value.len(), self.dim);
        self.values.push(value);
    }

    fn current_time(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 * self.step
    }

    /// Value at `t_query`: zero for nonpositive times, stored values at
    /// nodes, linear interpolation between nodes.
    pub fn delayed_lookup(&self, t_query: f64) -> Result<DVector<f64>> {
        if t_query <= 0.0 {
            return Ok(DVector::zeros(self.dim));
        }
        let tip = self.current_time();
        if t_query > tip + VALUE_TOL {
            return Err(Error::InvalidDomain(format!(
                "delayed lookup at t = {t_query} beyond current time {tip}"
            )));
        }
        let pos = (t_query / self.step).min((self.values.len() - 1) as f64);
        let j = (pos.floor() as usize).min(self.values.len() - 1);
        if j + 1 >= self.values.len() {
            return Ok(self.values[j].clone());
        }
        let s = pos - j as f64;
        Ok(&self.values[j] * (1.0 - s) + &self.values[j + 1] * s)
    }
}

fn sample_vec(trajs: &[Trajectory], t: f64) -> Vec<f64> {
    trajs.iter().map(|tr| tr.eval(t)).collect()
}

/// Validate the sampled delay and parameter trajectories against the
/// plant's admissible class over the scenario horizon.
fn validate_scenario(plant: &DelayedLpvPlant, scenario: &Scenario) -> Result<()> {
    if scenario.rho.len() != plant.domain.dim() {
        return Err(Error::ScenarioViolation(format!(
            "scenario provides {} parameter trajectories, plant expects {}",
            scenario.rho.len(),
            plant.domain.dim()
        )));
    }
    if scenario.d.len() != plant.n_d {
        return Err(Error::ScenarioViolation(format!(
            "scenario provides {} disturbance channels, plant expects {}",
            scenario.d.len(),
            plant.n_d
        )));
    }
    if !(scenario.step > 0.0) || !(scenario.horizon > scenario.step) {
        return Err(Error::InvalidConfig(
            "scenario needs 0 < step < horizon".into(),
        ));
    }
    if !scenario.x0.is_empty() && scenario.x0.len() != plant.n_x {
        return Err(Error::InvalidConfig(format!(
            "initial state has {} entries, plant has {} states",
            scenario.x0.len(),
            plant.n_x
        )));
    }
    for tr in scenario.rho.iter().chain(std::iter::once(&scenario.tau)).chain(&scenario.d) {
        tr.validate()?;
    }

    let h = scenario.step;
    let n_steps = (scenario.horizon / h).round() as usize;
    let mut tau_min = f64::INFINITY;
    let mut tau_max: f64 = 0.0;
    for i in 0..=n_steps {
        let t = i as f64 * h;
        let tau = scenario.tau.eval(t);
        if !(-VALUE_TOL..=plant.delay.tau_bar + VALUE_TOL).contains(&tau) {
            return Err(Error::ScenarioViolation(format!(
                "tau({t}) = {tau} outside [0, {}]",
                plant.delay.tau_bar
            )));
        }
        tau_min = tau_min.min(tau);
        tau_max = tau_max.max(tau);
        let rho = sample_vec(&scenario.rho, t);
        if !plant.domain.contains(&rho, VALUE_TOL) {
            return Err(Error::ScenarioViolation(format!(
                "rho({t}) = {rho:?} outside the parameter set"
            )));
        }
        if i > 0 && i < n_steps {
            let dtau = (scenario.tau.eval(t + h) - scenario.tau.eval(t - h)) / (2.0 * h);
            if dtau.abs() > plant.delay.r + RATE_TOL {
                return Err(Error::ScenarioViolation(format!(
                    "tau rate {dtau:.4} at t = {t} exceeds bound {}",
                    plant.delay.r
                )));
            }
            let rho_p = sample_vec(&scenario.rho, t + h);
            let rho_m = sample_vec(&scenario.rho, t - h);
            let drho: Vec<f64> = rho_p
                .iter()
                .zip(&rho_m)
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect();
            if !plant.domain.rate_contains(&drho, RATE_TOL) {
                return Err(Error::ScenarioViolation(format!(
                    "rho rate {drho:?} at t = {t} outside the rate box"
                )));
            }
        }
    }
    // Explicit delayed lookups require the delay to dominate the step;
    // an identically-zero delay short-circuits to w = 0 instead.
    if tau_max > 0.0 && h > tau_min / 2.0 {
        return Err(Error::InvalidConfig(format!(
            "step {h} exceeds tau_min/2 = {}; reduce the step",
            tau_min / 2.0
        )));
    }
    Ok(())
}

struct StageDerivative {
    dx_p: DVector<f64>,
    dx_psi: DVector<f64>,
}

/// Integrate the closed loop over the scenario horizon.
pub fn simulate(
    plant: &DelayedLpvPlant,
    realization: &MultiplierRealization,
    gains: &GainSchedule,
    scenario: &Scenario,
) -> Result<SimulationTrace> {
    validate_scenario(plant, scenario)?;
    if realization.n_x != plant.n_x {
        return Err(Error::DimensionMismatch(format!(
            "filter built for {} states, plant has {}",
            realization.n_x, plant.n_x
        )));
    }
    let h = scenario.step;
    let n_steps = (scenario.horizon / h).round() as usize;
    let n_psi = realization.n_psi();
    let zero_delay = (0..=n_steps).all(|i| scenario.tau.eval(i as f64 * h) == 0.0);

    let mut x_p = DVector::zeros(plant.n_x);
    if !scenario.x0.is_empty() {
        x_p = DVector::from_column_slice(&scenario.x0);
    }
    let mut x_psi = DVector::<f64>::zeros(n_psi);
    let mut history = History::new(h, plant.n_x);
    history.push(x_p.clone());

    // Right-hand side at a stage time with stage state estimates.
    let derivative = |t_s: f64,
                      xp_s: &DVector<f64>,
                      xpsi_s: &DVector<f64>,
                      history: &History|
     -> Result<(StageDerivative, DVector<f64>, DVector<f64>)> {
        let rho = sample_vec(&scenario.rho, t_s);
        let tau = scenario.tau.eval(t_s);
        let d = DVector::from_vec(sample_vec(&scenario.d, t_s));
        let w = if zero_delay {
            DVector::zeros(plant.n_x)
        } else {
            xp_s - history.delayed_lookup(t_s - tau)?
        };
        let (f_c, h_c) = gains.eval(rho[0]);
        let mut xc = DVector::zeros(plant.n_x + n_psi);
        xc.rows_mut(0, plant.n_x).copy_from(xp_s);
        xc.rows_mut(plant.n_x, n_psi).copy_from(xpsi_s);
        let u = &f_c * &xc + &h_c * &w;

        let a_p = plant.a_p.eval(&rho)?;
        let a_d = plant.a_d.eval(&rho)?;
        let b_p1 = plant.b_p1.eval(&rho)?;
        let b_p2 = plant.b_p2.eval(&rho)?;
        let dx_p = (&a_p + &a_d) * xp_s - &a_d * &w + &b_p1 * &d + &b_p2 * &u;
        let dx_psi = &realization.b_psi1 * xp_s
            + &realization.a_psi * xpsi_s
            + &realization.b_psi2 * &w;
        Ok((StageDerivative { dx_p, dx_psi }, w, u))
    };

    let mut trace = SimulationTrace {
        t: Vec::with_capacity(n_steps + 1),
        x_p: Vec::with_capacity(n_steps + 1),
        x_psi: Vec::with_capacity(n_steps + 1),
        w: Vec::with_capacity(n_steps + 1),
        u: Vec::with_capacity(n_steps + 1),
        e: Vec::with_capacity(n_steps + 1),
        d: Vec::with_capacity(n_steps + 1),
        tau: Vec::with_capacity(n_steps + 1),
        rho: Vec::with_capacity(n_steps + 1),
    };

    for i in 0..=n_steps {
        let t = i as f64 * h;
        let rho = sample_vec(&scenario.rho, t);
        let tau = scenario.tau.eval(t);
        let d = DVector::from_vec(sample_vec(&scenario.d, t));

        // Record the node signals.
        let (_, w, u) = derivative(t, &x_p, &x_psi, &history)?;
        let c_p1 = plant.c_p1.eval(&rho)?;
        let c_d1 = plant.c_d1.eval(&rho)?;
        let d_p11 = plant.d_p11.eval(&rho)?;
        let d_p12 = plant.d_p12.eval(&rho)?;
        let e = (&c_p1 + &c_d1) * &x_p - &c_d1 * &w + &d_p11 * &d + &d_p12 * &u;
        trace.t.push(t);
        trace.x_p.push(x_p.clone());
        trace.x_psi.push(x_psi.clone());
        trace.w.push(w);
        trace.u.push(u);
        trace.e.push(e);
        trace.d.push(d);
        trace.tau.push(tau);
        trace.rho.push(rho);

        if i == n_steps {
            break;
        }

        // Classical RK4 step.
        let (k1, _, _) = derivative(t, &x_p, &x_psi, &history)?;
        let (k2, _, _) = derivative(
            t + h / 2.0,
            &(&x_p + &k1.dx_p * (h / 2.0)),
            &(&x_psi + &k1.dx_psi * (h / 2.0)),
            &history,
        )?;
        let (k3, _, _) = derivative(
            t + h / 2.0,
            &(&x_p + &k2.dx_p * (h / 2.0)),
            &(&x_psi + &k2.dx_psi * (h / 2.0)),
            &history,
        )?;
        let (k4, _, _) = derivative(
            t + h,
            &(&x_p + &k3.dx_p * h),
            &(&x_psi + &k3.dx_psi * h),
            &history,
        )?;
        x_p += (k1.dx_p + k2.dx_p * 2.0 + k3.dx_p * 2.0 + k4.dx_p) * (h / 6.0);
        x_psi += (k1.dx_psi + k2.dx_psi * 2.0 + k3.dx_psi * 2.0 + k4.dx_psi) * (h / 6.0);
        history.push(x_p.clone());
    }
    Ok(trace)
}

/// Trapezoidal estimate of `||e||_2 / ||d||_2` over the trace horizon.
pub fn l2_gain_estimate(trace: &SimulationTrace) -> Result<f64> {
    let energy = |sig: &[DVector<f64>]| -> f64 {
        let mut acc = 0.0;
        for i in 1..trace.t.len() {
            let h = trace.t[i] - trace.t[i - 1];
            acc += 0.5 * h * (sig[i - 1].norm_squared() + sig[i].norm_squared());
        }
        acc
    };
    let d_energy = energy(&trace.d);
    if d_energy <= 0.0 {
        return Err(Error::ZeroDisturbance);
    }
    Ok((energy(&trace.e) / d_energy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{benchmark_plant, DelaySpec};
    use crate::param::{ParamMatrixFunction, ParameterDomain};
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, DMatrix};

    fn scalar_decaying_plant() -> DelayedLpvPlant {
        let c = |m: DMatrix<f64>| ParamMatrixFunction::constant(m, 1);
        DelayedLpvPlant::new(
            c(dmatrix![-1.0]),
            c(dmatrix![0.0]),
            c(dmatrix![1.0]),
            c(dmatrix![0.0]),
            c(dmatrix![1.0]),
            c(dmatrix![0.0]),
            c(dmatrix![0.0]),
            c(dmatrix![0.0]),
            DelaySpec::new(1.0, 0.0).unwrap(),
            ParameterDomain::frozen(&[0.0]),
        )
        .unwrap()
    }

    fn scalar_realization(plant: &DelayedLpvPlant) -> MultiplierRealization {
        use crate::iqc::{make_multiplier, realize_filter, MultiplierKind};
        realize_filter(
            &[
                make_multiplier(MultiplierKind::Pi2, &plant.delay, 1.0, 1e-7, 1e-4).unwrap(),
            ],
            plant.n_x,
        )
        .unwrap()
    }

    fn zero_gains(plant: &DelayedLpvPlant, n_psi: usize) -> GainSchedule {
        GainSchedule::new(
            &[vec![0.0]],
            vec![(
                DMatrix::zeros(plant.n_u, plant.n_x + n_psi),
                DMatrix::zeros(plant.n_u, plant.n_x),
            )],
        )
        .unwrap()
    }

    fn free_decay_scenario(h: f64, horizon: f64) -> Scenario {
        Scenario {
            rho: vec![Trajectory::Constant { value: 0.0 }],
            tau: Trajectory::Constant { value: 0.0 },
            d: vec![Trajectory::Constant { value: 0.0 }],
            horizon,
            step: h,
            x0: vec![1.0],
        }
    }

    #[test]
    fn delayed_lookup_prehistory_nodes_and_interpolation() {
        let mut hist = History::new(0.5, 1);
        hist.push(DVector::from_vec(vec![1.0]));
        hist.push(DVector::from_vec(vec![3.0]));
        assert_relative_eq!(hist.delayed_lookup(-0.3).unwrap()[0], 0.0);
        assert_relative_eq!(hist.delayed_lookup(0.5).unwrap()[0], 3.0);
        assert_relative_eq!(hist.delayed_lookup(0.25).unwrap()[0], 2.0);
        assert!(hist.delayed_lookup(0.75).is_err());
    }

    #[test]
    fn delay_free_decay_matches_analytic_solution() {
        let plant = scalar_decaying_plant();
        let real = scalar_realization(&plant);
        let gains = zero_gains(&plant, real.n_psi());
        let trace = simulate(&plant, &real, &gains, &free_decay_scenario(1e-3, 1.0)).unwrap();
        let end = trace.x_p.last().unwrap()[0];
        assert!((end - (-1.0_f64).exp()).abs() <= 1e-9);
    }

    #[test]
    fn integrator_is_fourth_order() {
        let plant = scalar_decaying_plant();
        let real = scalar_realization(&plant);
        let gains = zero_gains(&plant, real.n_psi());
        let exact = (-1.0_f64).exp();
        let err = |h: f64| {
            let trace = simulate(&plant, &real, &gains, &free_decay_scenario(h, 1.0)).unwrap();
            (trace.x_p.last().unwrap()[0] - exact).abs()
        };
        let (e1, e2) = (err(0.05), err(0.025));
        assert!(e1 / e2 >= 14.0, "halving gain {} too small", e1 / e2);
    }

    #[test]
    fn zero_state_zero_disturbance_stays_at_rest() {
        let plant = benchmark_plant(DelaySpec::new(2.0, 1.2).unwrap(), 0.5);
        let real = scalar_realization(&plant);
        let gains = zero_gains(&plant, real.n_psi());
        let scenario = Scenario {
            rho: vec![Trajectory::Sinusoid {
                amplitude: 1.0,
                omega: 0.5,
                phase: 0.0,
                offset: 0.0,
            }],
            tau: Trajectory::Sinusoid {
                amplitude: 0.2,
                omega: 6.0,
                phase: 0.0,
                offset: 1.8,
            },
            d: vec![Trajectory::Constant { value: 0.0 }],
            horizon: 2.0,
            step: 1e-3,
            x0: vec![],
        };
        let trace = simulate(&plant, &real, &gains, &scenario).unwrap();
        for i in 0..trace.t.len() {
            assert_eq!(trace.x_p[i].amax(), 0.0);
            assert_eq!(trace.x_psi[i].amax(), 0.0);
            assert_eq!(trace.u[i].amax(), 0.0);
            assert_eq!(trace.e[i].amax(), 0.0);
        }
    }

    #[test]
    fn filter_states_match_offline_refiltering() {
        let plant = benchmark_plant(DelaySpec::new(2.0, 1.2).unwrap(), 0.5);
        let real = scalar_realization(&plant);
        let gains = zero_gains(&plant, real.n_psi());
        let h = 2.5e-4;
        let scenario = Scenario {
            rho: vec![Trajectory::Sinusoid {
                amplitude: 1.0,
                omega: 0.5,
                phase: 0.0,
                offset: 0.0,
            }],
            tau: Trajectory::Sinusoid {
                amplitude: 0.2,
                omega: 6.0,
                phase: 0.0,
                offset: 1.8,
            },
            d: vec![Trajectory::Pulse {
                amplitude: 1.0,
                start: 0.0,
                end: 2.0,
            }],
            horizon: 5.0,
            step: h,
            x0: vec![],
        };
        let trace = simulate(&plant, &real, &gains, &scenario).unwrap();

        // Offline refilter: drive the filter with the recorded (x_p, w)
        // samples, interpolating linearly at the half steps.
        let n_psi = real.n_psi();
        let mut xpsi = DVector::<f64>::zeros(n_psi);
        let interp = |sig: &[DVector<f64>], i: usize, s: f64| -> DVector<f64> {
            if s == 0.0 {
                sig[i].clone()
            } else if s == 1.0 {
                sig[i + 1].clone()
            } else {
                &sig[i] * (1.0 - s) + &sig[i + 1] * s
            }
        };
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..trace.t.len() - 1 {
            let f = |s: f64, x: &DVector<f64>| -> DVector<f64> {
                &real.b_psi1 * interp(&trace.x_p, i, s)
                    + &real.a_psi * x
                    + &real.b_psi2 * interp(&trace.w, i, s)
            };
            let k1 = f(0.0, &xpsi);
            let k2 = f(0.5, &(&xpsi + &k1 * (h / 2.0)));
            let k3 = f(0.5, &(&xpsi + &k2 * (h / 2.0)));
            let k4 = f(1.0, &(&xpsi + &k3 * h));
            xpsi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            worst = worst.max((&xpsi - &trace.x_psi[i + 1]).amax());
            scale = scale.max(trace.x_psi[i + 1].amax());
        }
        assert!(worst / scale <= 1e-6, "relative error {}", worst / scale);
    }

    #[test]
    fn l2_estimate_identity_and_zero_output() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let d: Vec<DVector<f64>> = t
            .iter()
            .map(|&ti| DVector::from_vec(vec![(3.0 * ti).cos() + 0.5]))
            .collect();
        let zeros: Vec<DVector<f64>> = t.iter().map(|_| DVector::zeros(1)).collect();
        let mk = |e: Vec<DVector<f64>>, d: Vec<DVector<f64>>| SimulationTrace {
            t: t.clone(),
            x_p: zeros.clone(),
            x_psi: zeros.clone(),
            w: zeros.clone(),
            u: zeros.clone(),
            e,
            d,
            tau: vec![0.0; t.len()],
            rho: vec![vec![0.0]; t.len()],
        };
        assert_relative_eq!(
            l2_gain_estimate(&mk(d.clone(), d.clone())).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            l2_gain_estimate(&mk(zeros.clone(), d.clone())).unwrap(),
            0.0
        );
        assert!(matches!(
            l2_gain_estimate(&mk(d, zeros.clone())),
            Err(Error::ZeroDisturbance)
        ));
    }

    #[test]
    fn scenario_class_violations_rejected() {
        let plant = benchmark_plant(DelaySpec::new(2.0, 1.2).unwrap(), 0.5);
        let real = scalar_realization(&plant);
        let gains = zero_gains(&plant, real.n_psi());
        let base = Scenario {
            rho: vec![Trajectory::Constant { value: 0.0 }],
            tau: Trajectory::Constant { value: 1.8 },
            d: vec![Trajectory::Constant { value: 1.0 }],
            horizon: 1.0,
            step: 1e-3,
            x0: vec![],
        };

        let mut s = base.clone();
        s.tau = Trajectory::Constant { value: 2.5 };
        assert!(matches!(
            simulate(&plant, &real, &gains, &s),
            Err(Error::ScenarioViolation(_))
        ));

        let mut s = base.clone();
        s.rho = vec![Trajectory::Constant { value: 1.5 }];
        assert!(matches!(
            simulate(&plant, &real, &gains, &s),
            Err(Error::ScenarioViolation(_))
        ));

        // Delay rate above the class bound.
        let mut s = base.clone();
        s.tau = Trajectory::Sinusoid {
            amplitude: 1.0,
            omega: 2.0,
            phase: 0.0,
            offset: 1.0,
        };
        assert!(matches!(
            simulate(&plant, &real, &gains, &s),
            Err(Error::ScenarioViolation(_))
        ));

        // Step too large relative to the minimum delay.
        let mut s = base.clone();
        s.step = 1.0;
        assert!(matches!(
            simulate(&plant, &real, &gains, &s),
            Err(Error::InvalidConfig(_))
        ));
    }
}
