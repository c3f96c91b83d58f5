//! Dynamic IQC multipliers for the delay-difference operator, their
//! J-spectral factor filters, and numerical validators.
//!
//! Two multiplier families are provided for the operator
//! `S(x_p) = x_p - x_p(t - tau(t))` over the delay class `(tau_bar, r)`:
//!
//! * `Pi1`: valid for `r < 1`, frequency weight
//!   `phi(s) = k1 (tau^2 s^2 + c1 tau s)/(tau^2 s^2 + a1 tau s + k1 c1) + eps`;
//! * `Pi2`: valid for `r < 2`, frequency weight
//!   `varphi(s) = k2 (tau^2 s^2 + c2 tau s)/(tau^2 s^2 + a2 tau s + b2) + delta`.
//!
//! Both are diagonal multipliers `diag(|phi|^2 X, -X)` and admit a
//! J-spectral factor `Psi = diag(psi I, I)` with `W = diag(X, -X)`, where
//! `psi` is a stable, stably invertible biproper scalar transfer function
//! with `|psi(jw)| = |phi(jw)|`. The factor is realized in state space so
//! the quadratic form `z' W z` can be evaluated in the time domain.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DelaySpec;

/// Which multiplier family to instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierKind {
    Pi1,
    Pi2,
}

/// A delay multiplier with all derived shaping constants resolved.
///
/// The two families share the parametrization
/// `phi(s) = k (tau^2 s^2 + c tau s)/(tau^2 s^2 + a tau s + b) + shift`,
/// with `(k, a, b, c, shift)` derived from the delay class at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSpec {
    pub kind: MultiplierKind,
    pub tau_bar: f64,
    pub r: f64,
    /// High-frequency gain of the weight.
    pub k: f64,
    /// Damping coefficient of the shared denominator.
    pub a: f64,
    /// Constant denominator coefficient (before the 1/tau_bar^2 scaling).
    pub b: f64,
    /// Numerator zero location coefficient.
    pub c: f64,
    /// Strict-positivity shift (epsilon for Pi1, delta for Pi2).
    pub shift: f64,
}

/// Default shaping constant `c1` for the `Pi1` multiplier.
pub const DEFAULT_C1: f64 = 1.0;
/// Default strict-positivity shift for `Pi1`.
pub const DEFAULT_EPSILON: f64 = 1e-7;
/// Default strict-positivity shift for `Pi2`.
pub const DEFAULT_DELTA: f64 = 1e-4;

/// Build a multiplier for the given delay class.
///
/// `Pi1` requires `r < 1` and `c1 < 2 k1`; `Pi2` requires `r < 2`. The
/// shifts must be positive (they keep the factor biproper and stably
/// invertible).
pub fn make_multiplier(
    kind: MultiplierKind,
    delay: &DelaySpec,
    c1: f64,
    epsilon: f64,
    delta: f64,
) -> Result<MultiplierSpec> {
    let (tau_bar, r) = (delay.tau_bar, delay.r);
    match kind {
        MultiplierKind::Pi1 => {
            if r >= 1.0 {
                return Err(Error::InvalidMultiplier(format!(
                    "pi1 requires r<1, got r={r}"
                )));
            }
            let k1 = 1.0 + 1.0 / (1.0 - r).sqrt();
            if !(c1 > 0.0 && c1 < 2.0 * k1) {
                return Err(Error::InvalidMultiplier(format!(
                    "pi1 requires 0 < c1 < 2*k1 = {}, got c1={c1}",
                    2.0 * k1
                )));
            }
            if epsilon <= 0.0 {
                return Err(Error::InvalidMultiplier("epsilon must be positive".into()));
            }
            Ok(MultiplierSpec {
                kind,
                tau_bar,
                r,
                k: k1,
                a: (2.0 * k1 * c1).sqrt(),
                b: k1 * c1,
                c: c1,
                shift: epsilon,
            })
        }
        MultiplierKind::Pi2 => {
            if r >= 2.0 {
                return Err(Error::InvalidMultiplier(format!(
                    "pi2 requires r<2, got r={r}"
                )));
            }
            if delta <= 0.0 {
                return Err(Error::InvalidMultiplier("delta must be positive".into()));
            }
            let b2 = 50.0_f64.sqrt();
            Ok(MultiplierSpec {
                kind,
                tau_bar,
                r,
                k: (8.0 / (2.0 - r)).sqrt(),
                a: (6.5 + 2.0 * b2).sqrt(),
                b: b2,
                c: 12.5_f64.sqrt(),
                shift: delta,
            })
        }
    }
}

impl MultiplierSpec {
    /// Closed-form multiplier weight `phi(j omega)`.
    pub fn phi(&self, omega: f64) -> Complex<f64> {
        let s = Complex::new(0.0, omega);
        let t = self.tau_bar;
        let num = t * t * s * s + self.c * t * s;
        let den = t * t * s * s + self.a * t * s + self.b;
        self.k * num / den + self.shift
    }

    /// Closed-form spectral factor `psi(j omega)`.
    ///
    /// `psi(s) = (k(c-a)s/tau - k b/tau^2)/(s^2 + a s/tau + b/tau^2)
    ///           + k + shift`; it satisfies `|psi(jw)| = |phi(jw)|` exactly.
    pub fn psi(&self, omega: f64) -> Complex<f64> {
        let s = Complex::new(0.0, omega);
        let t = self.tau_bar;
        let num = self.k * (self.c - self.a) / t * s - self.k * self.b / (t * t);
        let den = s * s + self.a / t * s + self.b / (t * t);
        num / den + self.k + self.shift
    }

    /// Minimal state-space realization `(A, B, C, D)` of the scalar factor
    /// `psi`, in controllable companion form with two states.
    pub fn scalar_realization(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
        let t = self.tau_bar;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -self.b / (t * t), -self.a / t]);
        let b = DVector::from_column_slice(&[0.0, 1.0]);
        // Row vector stored as a DVector; entries [-k*b/tau^2, k(c-a)/tau].
        let c = DVector::from_column_slice(&[
            -self.k * self.b / (t * t),
            self.k * (self.c - self.a) / t,
        ]);
        let d = self.k + self.shift;
        (a, b, c, d)
    }
}

/// State-space realization of the stacked factor filters `Psi_k`.
///
/// The filter is driven by `(x_p, w)` and produces per-multiplier outputs
/// `z_k = [zbar_k; w]`, where `zbar_k` is the `psi_k`-filtered plant state.
/// Scalar filters act elementwise on the `n_x`-dimensional signals, so all
/// matrices are Kronecker duplications of the two-state scalar blocks. The
/// quadratic-form sign structure is `W_k = diag(X_k, -X_k)` with `X_k` a
/// free positive-definite matrix (a variable of the synthesis step).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplierRealization {
    pub specs: Vec<MultiplierSpec>,
    pub n_x: usize,
    pub a_psi: DMatrix<f64>,
    pub b_psi1: DMatrix<f64>,
    pub b_psi2: DMatrix<f64>,
    /// Per-multiplier `Cbar_{psi,k}` (the zbar rows; the w rows are zero).
    pub c_bar: Vec<DMatrix<f64>>,
    /// Per-multiplier `Dbar_{psi1,k}` = (k + shift) I.
    pub d_bar1: Vec<DMatrix<f64>>,
}

impl MultiplierRealization {
    /// Number of multipliers.
    pub fn n_lambda(&self) -> usize {
        self.specs.len()
    }

    /// Filter state dimension.
    pub fn n_psi(&self) -> usize {
        self.a_psi.nrows()
    }

    /// Full output matrix `C_{psi,k}` of `z_k` (zbar rows then w rows).
    pub fn c_full(&self, k: usize) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(2 * self.n_x, self.n_psi());
        c.view_mut((0, 0), (self.n_x, self.n_psi()))
            .copy_from(&self.c_bar[k]);
        c
    }

    /// Full feedthrough from `x_p` for `z_k`.
    pub fn d1_full(&self, k: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(2 * self.n_x, self.n_x);
        d.view_mut((0, 0), (self.n_x, self.n_x))
            .copy_from(&self.d_bar1[k]);
        d
    }

    /// Full feedthrough from `w` for `z_k`: `[0; I]`.
    pub fn d2_full(&self, _k: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(2 * self.n_x, self.n_x);
        d.view_mut((self.n_x, 0), (self.n_x, self.n_x))
            .copy_from(&DMatrix::identity(self.n_x, self.n_x));
        d
    }

    /// Frequency response of the `z_k` output from inputs `(x_p, w)`:
    /// `D + C (j w I - A)^{-1} B`, a `2 n_x x 2 n_x` complex matrix.
    pub fn freq_response(&self, k: usize, omega: f64) -> Result<DMatrix<Complex<f64>>> {
        let n = self.n_psi();
        let jw = Complex::new(0.0, omega);
        let mut m = DMatrix::from_fn(n, n, |i, j| -Complex::new(self.a_psi[(i, j)], 0.0));
        for i in 0..n {
            m[(i, i)] += jw;
        }
        let b = {
            let mut b = DMatrix::<Complex<f64>>::zeros(n, 2 * self.n_x);
            for i in 0..n {
                for j in 0..self.n_x {
                    b[(i, j)] = Complex::new(self.b_psi1[(i, j)], 0.0);
                    b[(i, j + self.n_x)] = Complex::new(self.b_psi2[(i, j)], 0.0);
                }
            }
            b
        };
        let x = m
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SolverFailure("jwI - A_psi singular".into()))?;
        let c = self.c_full(k).map(|v| Complex::new(v, 0.0));
        let mut d = DMatrix::<Complex<f64>>::zeros(2 * self.n_x, 2 * self.n_x);
        let d1 = self.d1_full(k);
        let d2 = self.d2_full(k);
        for i in 0..2 * self.n_x {
            for j in 0..self.n_x {
                d[(i, j)] = Complex::new(d1[(i, j)], 0.0);
                d[(i, j + self.n_x)] = Complex::new(d2[(i, j)], 0.0);
            }
        }
        Ok(d + c * x)
    }
}

/// Realize the stacked factor filters for `n_x`-dimensional signals.
///
/// Filter states are grouped per multiplier, each contributing `2 n_x`
/// states (two per signal channel).
pub fn realize_filter(specs: &[MultiplierSpec], n_x: usize) -> Result<MultiplierRealization> {
    if specs.is_empty() {
        return Err(Error::InvalidMultiplier("empty multiplier list".into()));
    }
    if n_x == 0 {
        return Err(Error::DimensionMismatch("n_x must be positive".into()));
    }
    let n = specs.len();
    // Scalar-filter stack: block-diagonal over multipliers, then duplicated
    // per signal channel with a Kronecker product.
    let mut a_til = DMatrix::zeros(2 * n, 2 * n);
    let mut b_til = DMatrix::zeros(2 * n, 1);
    let mut c_til: Vec<DMatrix<f64>> = vec![DMatrix::zeros(1, 2 * n); n];
    for (i, spec) in specs.iter().enumerate() {
        let (a, b, c, _) = spec.scalar_realization();
        a_til.view_mut((2 * i, 2 * i), (2, 2)).copy_from(&a);
        b_til.view_mut((2 * i, 0), (2, 1)).copy_from(&b);
        c_til[i]
            .view_mut((0, 2 * i), (1, 2))
            .copy_from(&c.transpose());
    }
    let eye = DMatrix::<f64>::identity(n_x, n_x);
    let a_psi = eye.kronecker(&a_til);
    let b_psi1 = eye.kronecker(&b_til);
    let b_psi2 = DMatrix::zeros(a_psi.nrows(), n_x);
    let c_bar = c_til.iter().map(|c| eye.kronecker(c)).collect();
    let d_bar1 = specs
        .iter()
        .map(|s| DMatrix::identity(n_x, n_x) * (s.k + s.shift))
        .collect();
    Ok(MultiplierRealization {
        specs: specs.to_vec(),
        n_x,
        a_psi,
        b_psi1,
        b_psi2,
        c_bar,
        d_bar1,
    })
}

/// Result of the spectral-factorization cross-check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub max_error: f64,
    pub worst_omega: f64,
    pub filter_stable: bool,
    pub inverse_stable: bool,
    pub pass: bool,
}

/// Strict Hurwitz test: every eigenvalue real part below `-margin`.
fn is_hurwitz(a: &DMatrix<f64>, margin: f64) -> bool {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .all(|l| l.re <= -margin)
}

/// Default log-spaced validation grid covering the filter break
/// frequencies, which scale as `1/tau_bar`.
pub fn default_frequency_grid(tau_bar: f64, count: usize) -> Vec<f64> {
    let (lo, hi) = (1e-3 / tau_bar, 1e3 / tau_bar);
    let lg_lo = lo.log10();
    let lg_hi = hi.log10();
    (0..count)
        .map(|i| 10f64.powf(lg_lo + (lg_hi - lg_lo) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Verify `|psi_realized(jw)|^2 = |phi(jw)|^2` pointwise on a frequency
/// grid (the factorization identity with the `X` slot set to identity),
/// and that both the filter and its inverse are stable.
pub fn verify_spectral_factorization(
    spec: &MultiplierSpec,
    realization: &MultiplierRealization,
    omega_grid: &[f64],
    tol: f64,
) -> Result<FactorizationReport> {
    let k_idx = realization
        .specs
        .iter()
        .position(|s| s == spec)
        .ok_or_else(|| Error::InvalidMultiplier("spec not part of the realization".into()))?;
    let mut max_error = 0.0_f64;
    let mut worst_omega = 0.0;
    for &omega in omega_grid {
        let resp = realization.freq_response(k_idx, omega)?;
        // Scalar channel: zbar_1 from x_p,1.
        let psi_sq = resp[(0, 0)].norm_sqr();
        let phi_sq = spec.phi(omega).norm_sqr();
        let err = (psi_sq - phi_sq).abs() / phi_sq.max(1.0);
        if err > max_error {
            max_error = err;
            worst_omega = omega;
        }
    }
    let filter_stable = is_hurwitz(&realization.a_psi, 1e-9);
    // Inverse system of the biproper scalar factor: A - B D^{-1} C.
    let (a, b, c, d) = spec.scalar_realization();
    let a_inv = &a - &b * c.transpose() / d;
    let inverse_stable = is_hurwitz(&a_inv, 1e-9);
    Ok(FactorizationReport {
        max_error,
        worst_omega,
        filter_stable,
        inverse_stable,
        pass: max_error <= tol && filter_stable && inverse_stable,
    })
}

/// Empirical hard-IQC check: drive the factor filter with a signal `v`
/// (playing the plant state, zero for `t <= 0`) and the induced delay
/// difference `w(t) = v(t) - v(t - tau(t))`, and return the minimum over
/// truncation horizons of `int_0^T' z' W z dt` with the `X` slot set to
/// identity. A sound multiplier keeps this nonnegative up to quadrature
/// error.
pub fn check_hard_iqc_empirical(
    realization: &MultiplierRealization,
    k_idx: usize,
    v: &dyn Fn(f64) -> DVector<f64>,
    tau: &dyn Fn(f64) -> f64,
    horizon: f64,
    step: f64,
) -> Result<f64> {
    if k_idx >= realization.n_lambda() {
        return Err(Error::DimensionMismatch(format!(
            "multiplier index {k_idx} out of range"
        )));
    }
    let spec = &realization.specs[k_idx];
    let n_steps = (horizon / step).round() as usize;
    if n_steps == 0 {
        return Err(Error::InvalidConfig("empty horizon".into()));
    }
    // Validate the delay trajectory against its class.
    let rate_tol = 1e-6;
    for i in 0..=n_steps {
        let t = i as f64 * step;
        let ti = tau(t);
        if !(0.0..=spec.tau_bar + 1e-12).contains(&ti) {
            return Err(Error::ScenarioViolation(format!(
                "tau({t}) = {ti} outside [0, {}]",
                spec.tau_bar
            )));
        }
        if i > 0 {
            let rate = (ti - tau(t - step)) / step;
            if rate.abs() > spec.r + rate_tol {
                return Err(Error::ScenarioViolation(format!(
                    "|tau_dot| ~ {} exceeds r = {} near t = {t}",
                    rate.abs(),
                    spec.r
                )));
            }
        }
    }
    let v_eff = |t: f64| -> DVector<f64> {
        if t <= 0.0 {
            DVector::zeros(realization.n_x)
        } else {
            v(t)
        }
    };
    let w_of = |t: f64| -> DVector<f64> { v_eff(t) - v_eff(t - tau(t)) };

    let n_psi = realization.n_psi();
    let mut x = DVector::<f64>::zeros(n_psi);
    let deriv = |x: &DVector<f64>, t: f64| -> DVector<f64> {
        &realization.a_psi * x + &realization.b_psi1 * v_eff(t)
    };
    let z_quad = |x: &DVector<f64>, t: f64| -> f64 {
        let zbar = &realization.c_bar[k_idx] * x + &realization.d_bar1[k_idx] * v_eff(t);
        let w = w_of(t);
        zbar.norm_squared() - w.norm_squared()
    };

    let mut integral = 0.0;
    let mut min_integral = 0.0; // T' = 0 gives 0.
    let mut prev_q = z_quad(&x, 0.0);
    for i in 0..n_steps {
        let t = i as f64 * step;
        // Classical RK4 on the filter state.
        let k1 = deriv(&x, t);
        let k2 = deriv(&(&x + &k1 * (step / 2.0)), t + step / 2.0);
        let k3 = deriv(&(&x + &k2 * (step / 2.0)), t + step / 2.0);
        let k4 = deriv(&(&x + &k3 * step), t + step);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0);
        let q = z_quad(&x, t + step);
        integral += 0.5 * step * (prev_q + q);
        prev_q = q;
        if integral < min_integral {
            min_integral = integral;
        }
    }
    Ok(min_integral)
}
