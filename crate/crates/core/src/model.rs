//! Delayed LPV plant description, the delay-operator model transformation,
//! IQC-filter augmentation, and closed-loop matrix assembly.
//!
//! The plant
//!
//! ```text
//! x_p' = A_p(rho) x_p + A_d(rho) x_p(t - tau) + B_p1(rho) d + B_p2(rho) u
//! e    = C_p1(rho) x_p + C_d1(rho) x_p(t - tau) + D_p11(rho) d + D_p12(rho) u
//! ```
//!
//! is rewritten against the delay-difference signal
//! `w = x_p - x_p(t - tau)`, which pulls the delayed state out of the loop
//! and leaves a delay-free nominal system in feedback with the
//! delay-difference operator. Appending the IQC factor filter states gives
//! the augmented open loop, and the state-feedback law
//! `u = F_c [x_p; x_psi] + H_c w` closes it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iqc::MultiplierRealization;
use crate::param::{ParamMatrixFunction, ParameterDomain};

/// Admissible delay class: `tau(t) in [0, tau_bar]`, `|tau'(t)| <= r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub tau_bar: f64,
    pub r: f64,
}

impl DelaySpec {
    pub fn new(tau_bar: f64, r: f64) -> Result<Self> {
        if !(tau_bar > 0.0) {
            return Err(Error::InvalidPlant(format!(
                "tau_bar must be positive, got {tau_bar}"
            )));
        }
        if !(r >= 0.0) {
            return Err(Error::InvalidPlant(format!("r must be nonnegative, got {r}")));
        }
        Ok(Self { tau_bar, r })
    }
}

/// LPV plant with a single time-varying state delay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayedLpvPlant {
    pub a_p: ParamMatrixFunction,
    pub a_d: ParamMatrixFunction,
    pub b_p1: ParamMatrixFunction,
    pub b_p2: ParamMatrixFunction,
    pub c_p1: ParamMatrixFunction,
    pub c_d1: ParamMatrixFunction,
    pub d_p11: ParamMatrixFunction,
    pub d_p12: ParamMatrixFunction,
    pub n_x: usize,
    pub n_d: usize,
    pub n_u: usize,
    pub n_e: usize,
    pub delay: DelaySpec,
    pub domain: ParameterDomain,
}

impl DelayedLpvPlant {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a_p: ParamMatrixFunction,
        a_d: ParamMatrixFunction,
        b_p1: ParamMatrixFunction,
        b_p2: ParamMatrixFunction,
        c_p1: ParamMatrixFunction,
        c_d1: ParamMatrixFunction,
        d_p11: ParamMatrixFunction,
        d_p12: ParamMatrixFunction,
        delay: DelaySpec,
        domain: ParameterDomain,
    ) -> Result<Self> {
        let n_x = a_p.nrows();
        let n_d = b_p1.ncols();
        let n_u = b_p2.ncols();
        let n_e = c_p1.nrows();
        let expect = [
            ("A_p", &a_p, n_x, n_x),
            ("A_d", &a_d, n_x, n_x),
            ("B_p1", &b_p1, n_x, n_d),
            ("B_p2", &b_p2, n_x, n_u),
            ("C_p1", &c_p1, n_e, n_x),
            ("C_d1", &c_d1, n_e, n_x),
            ("D_p11", &d_p11, n_e, n_d),
            ("D_p12", &d_p12, n_e, n_u),
        ];
        for (name, m, r, c) in expect {
            if m.nrows() != r || m.ncols() != c {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.param_dim() != domain.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "{name} basis dimension {} differs from domain dimension {}",
                    m.param_dim(),
                    domain.dim()
                )));
            }
        }
        Ok(Self {
            a_p,
            a_d,
            b_p1,
            b_p2,
            c_p1,
            c_d1,
            d_p11,
            d_p12,
            n_x,
            n_d,
            n_u,
            n_e,
            delay,
            domain,
        })
    }
}

/// Delay-free nominal system in feedback with the delay-difference
/// operator (`w` is the operator output, `x_p` its input).
#[derive(Debug, Clone)]
pub struct NominalLpvSystem {
    /// State map `A_p + A_d`.
    pub a: ParamMatrixFunction,
    /// Gain from `w`: `-A_d`.
    pub b_w: ParamMatrixFunction,
    pub b1: ParamMatrixFunction,
    pub b2: ParamMatrixFunction,
    /// Output map `C_p1 + C_d1`.
    pub c1: ParamMatrixFunction,
    /// Output gain from `w`: `-C_d1`.
    pub d_w: ParamMatrixFunction,
    pub d11: ParamMatrixFunction,
    pub d12: ParamMatrixFunction,
    pub n_x: usize,
    pub n_d: usize,
    pub n_u: usize,
    pub n_e: usize,
    pub delay: DelaySpec,
    pub domain: ParameterDomain,
}

/// Rewrite the delayed plant against `w = x_p - x_p(t - tau)`.
pub fn nominal_interconnection(plant: &DelayedLpvPlant) -> Result<NominalLpvSystem> {
    Ok(NominalLpvSystem {
        a: plant.a_p.add(&plant.a_d)?,
        b_w: plant.a_d.negate(),
        b1: plant.b_p1.clone(),
        b2: plant.b_p2.clone(),
        c1: plant.c_p1.add(&plant.c_d1)?,
        d_w: plant.c_d1.negate(),
        d11: plant.d_p11.clone(),
        d12: plant.d_p12.clone(),
        n_x: plant.n_x,
        n_d: plant.n_d,
        n_u: plant.n_u,
        n_e: plant.n_e,
        delay: plant.delay,
        domain: plant.domain.clone(),
    })
}

/// Open-loop augmentation of the nominal system with the factor-filter
/// states `x_psi`. State `x_aug = [x_p; x_psi]`; inputs `(w, d, u)`;
/// outputs: stacked filter signals `z_k` and the performance output `e`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub a_aug: ParamMatrixFunction,
    /// Input map from `w`.
    pub b_aug0: ParamMatrixFunction,
    /// Input map from `d`.
    pub b_aug1: ParamMatrixFunction,
    /// Input map from `u`.
    pub b_aug2: ParamMatrixFunction,
    /// Stacked `z` output map (parameter-independent: the filter is LTI).
    pub c_aug0: DMatrix<f64>,
    /// Stacked `z` feedthrough from `w` (parameter-independent).
    pub d_aug00: DMatrix<f64>,
    pub c_aug1: ParamMatrixFunction,
    /// `e` feedthrough from `w`.
    pub d_aug10: ParamMatrixFunction,
    pub d_aug11: ParamMatrixFunction,
    pub d_aug12: ParamMatrixFunction,
    pub realization: MultiplierRealization,
    pub n_x: usize,
    pub n_psi: usize,
    pub n_d: usize,
    pub n_u: usize,
    pub n_e: usize,
    pub delay: DelaySpec,
    pub domain: ParameterDomain,
}

impl AugmentedSystem {
    /// Total augmented state dimension `n_x + n_psi`.
    pub fn n_cl(&self) -> usize {
        self.n_x + self.n_psi
    }

    /// Rows of one `z_k` block.
    pub fn z_rows(&self) -> usize {
        2 * self.n_x
    }

    /// Number of multipliers.
    pub fn n_lambda(&self) -> usize {
        self.realization.n_lambda()
    }
}

/// Append the factor-filter dynamics to the nominal system.
pub fn augment_with_filter(
    nominal: &NominalLpvSystem,
    realization: &MultiplierRealization,
) -> Result<AugmentedSystem> {
    if realization.n_x != nominal.n_x {
        return Err(Error::DimensionMismatch(format!(
            "filter built for n_x = {}, plant has n_x = {}",
            realization.n_x, nominal.n_x
        )));
    }
    let n_x = nominal.n_x;
    let n_psi = realization.n_psi();
    let n_cl = n_x + n_psi;
    let s = nominal.domain.dim();
    let n_lambda = realization.n_lambda();

    // A_aug = [A_p + A_d, 0; B_psi1, A_psi].
    let mut lower = DMatrix::zeros(n_cl, n_cl);
    lower
        .view_mut((n_x, 0), (n_psi, n_x))
        .copy_from(&realization.b_psi1);
    lower
        .view_mut((n_x, n_x), (n_psi, n_psi))
        .copy_from(&realization.a_psi);
    let a_aug = nominal
        .a
        .embed(n_cl, n_cl, 0, 0)
        .add(&ParamMatrixFunction::constant(lower, s))?;

    // B_aug0 = [-A_d; B_psi2].
    let mut b0_lower = DMatrix::zeros(n_cl, n_x);
    b0_lower
        .view_mut((n_x, 0), (n_psi, n_x))
        .copy_from(&realization.b_psi2);
    let b_aug0 = nominal
        .b_w
        .embed(n_cl, n_x, 0, 0)
        .add(&ParamMatrixFunction::constant(b0_lower, s))?;

    let b_aug1 = nominal.b1.embed(n_cl, nominal.n_d, 0, 0);
    let b_aug2 = nominal.b2.embed(n_cl, nominal.n_u, 0, 0);

    // Stacked z maps: per multiplier, z_k = [zbar_k; w] with
    // zbar_k = Dbar1_k x_p + Cbar_k x_psi.
    let z_rows = 2 * n_x;
    let mut c_aug0 = DMatrix::zeros(n_lambda * z_rows, n_cl);
    let mut d_aug00 = DMatrix::zeros(n_lambda * z_rows, n_x);
    for k in 0..n_lambda {
        let r0 = k * z_rows;
        c_aug0
            .view_mut((r0, 0), (n_x, n_x))
            .copy_from(&realization.d_bar1[k]);
        c_aug0
            .view_mut((r0, n_x), (n_x, n_psi))
            .copy_from(&realization.c_bar[k]);
        d_aug00
            .view_mut((r0 + n_x, 0), (n_x, n_x))
            .copy_from(&DMatrix::identity(n_x, n_x));
    }

    let c_aug1 = nominal.c1.embed(nominal.n_e, n_cl, 0, 0);

    Ok(AugmentedSystem {
        a_aug,
        b_aug0,
        b_aug1,
        b_aug2,
        c_aug0,
        d_aug00,
        c_aug1,
        d_aug10: nominal.d_w.clone(),
        d_aug11: nominal.d11.clone(),
        d_aug12: nominal.d12.clone(),
        realization: realization.clone(),
        n_x,
        n_psi,
        n_d: nominal.n_d,
        n_u: nominal.n_u,
        n_e: nominal.n_e,
        delay: nominal.delay,
        domain: nominal.domain.clone(),
    })
}

/// Numeric closed-loop matrices at one parameter point.
///
/// Inputs are `(w, d)`; outputs are the per-multiplier `z_k` and `e`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedLoopRealization {
    pub a_cl: DMatrix<f64>,
    /// Input map from `w`.
    pub b_cl1: DMatrix<f64>,
    /// Input map from `d`.
    pub b_cl2: DMatrix<f64>,
    pub c_cl1: Vec<DMatrix<f64>>,
    pub d_cl11: Vec<DMatrix<f64>>,
    pub d_cl12: Vec<DMatrix<f64>>,
    pub c_cl2: DMatrix<f64>,
    pub d_cl21: DMatrix<f64>,
    pub d_cl22: DMatrix<f64>,
    pub n_x: usize,
    pub n_psi: usize,
}

/// Close the loop with `u = F_c [x_p; x_psi] + H_c w` at a parameter point.
pub fn close_loop(
    aug: &AugmentedSystem,
    f_c: &DMatrix<f64>,
    h_c: &DMatrix<f64>,
    rho: &[f64],
) -> Result<ClosedLoopRealization> {
    let n_cl = aug.n_cl();
    if f_c.nrows() != aug.n_u || f_c.ncols() != n_cl {
        return Err(Error::DimensionMismatch(format!(
            "F_c is {}x{}, expected {}x{n_cl}",
            f_c.nrows(),
            f_c.ncols(),
            aug.n_u
        )));
    }
    if h_c.nrows() != aug.n_u || h_c.ncols() != aug.n_x {
        return Err(Error::DimensionMismatch(format!(
            "H_c is {}x{}, expected {}x{}",
            h_c.nrows(),
            h_c.ncols(),
            aug.n_u,
            aug.n_x
        )));
    }
    let b_aug2 = aug.b_aug2.eval(rho)?;
    let d_aug12 = aug.d_aug12.eval(rho)?;
    let a_cl = aug.a_aug.eval(rho)? + &b_aug2 * f_c;
    let b_cl1 = aug.b_aug0.eval(rho)? + &b_aug2 * h_c;
    let b_cl2 = aug.b_aug1.eval(rho)?;
    let c_cl2 = aug.c_aug1.eval(rho)? + &d_aug12 * f_c;
    let d_cl21 = aug.d_aug10.eval(rho)? + &d_aug12 * h_c;
    let d_cl22 = aug.d_aug11.eval(rho)?;

    let z_rows = aug.z_rows();
    let mut c_cl1 = Vec::new();
    let mut d_cl11 = Vec::new();
    let mut d_cl12 = Vec::new();
    for k in 0..aug.n_lambda() {
        let r0 = k * z_rows;
        c_cl1.push(aug.c_aug0.view((r0, 0), (z_rows, n_cl)).into_owned());
        d_cl11.push(aug.d_aug00.view((r0, 0), (z_rows, aug.n_x)).into_owned());
        d_cl12.push(DMatrix::zeros(z_rows, aug.n_d));
    }
    Ok(ClosedLoopRealization {
        a_cl,
        b_cl1,
        b_cl2,
        c_cl1,
        d_cl11,
        d_cl12,
        c_cl2,
        d_cl21,
        d_cl22,
        n_x: aug.n_x,
        n_psi: aug.n_psi,
    })
}

/// Two-state benchmark plant used throughout the documentation and tests:
///
/// ```text
/// A_p = [0, 1 + 0.2 rho; -2, -3 + 0.1 rho]
/// A_d = [0.2 rho, 0.1; -0.2 + 0.1 rho, -0.3]
/// B_p1 = [0.2; 0.2],  B_p2 = [0.2 rho; 0.1 + 0.1 rho]
/// C_p1 = [0, 10; 0, 0],  D_p12 = [0; 0.1]
/// ```
///
/// with `rho in [-1, 1]`, `|rho'| <= nu`.
pub fn benchmark_plant(delay: DelaySpec, nu: f64) -> DelayedLpvPlant {
    use crate::param::BasisFunction;
    use nalgebra::dmatrix;

    let one = BasisFunction::constant(1);
    let rho = BasisFunction::monomial(vec![1]);
    let pmf = |c: DMatrix<f64>, l: DMatrix<f64>| {
        ParamMatrixFunction::new(vec![(one.clone(), c), (rho.clone(), l)]).unwrap()
    };
    let a_p = pmf(
        dmatrix![0.0, 1.0; -2.0, -3.0],
        dmatrix![0.0, 0.2; 0.0, 0.1],
    );
    let a_d = pmf(
        dmatrix![0.0, 0.1; -0.2, -0.3],
        dmatrix![0.2, 0.0; 0.1, 0.0],
    );
    let b_p1 = ParamMatrixFunction::constant(dmatrix![0.2; 0.2], 1);
    let b_p2 = pmf(dmatrix![0.0; 0.1], dmatrix![0.2; 0.1]);
    let c_p1 = ParamMatrixFunction::constant(dmatrix![0.0, 10.0; 0.0, 0.0], 1);
    let c_d1 = ParamMatrixFunction::zeros(2, 2, 1);
    let d_p11 = ParamMatrixFunction::zeros(2, 1, 1);
    let d_p12 = ParamMatrixFunction::constant(dmatrix![0.0; 0.1], 1);
    DelayedLpvPlant::new(
        a_p,
        a_d,
        b_p1,
        b_p2,
        c_p1,
        c_d1,
        d_p11,
        d_p12,
        delay,
        ParameterDomain::scalar_symmetric(nu),
    )
    .unwrap()
}
