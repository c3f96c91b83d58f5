//! State-feedback synthesis: assembly of the parameter-dependent synthesis
//! LMIs, L2-gain minimization, pointwise controller-gain recovery, and the
//! independent analysis-LMI verification of the recovered gains.
//!
//! The synthesis condition eliminates the controller variables by a
//! nullspace congruence: at every grid point `rho_j` and every rate-box
//! vertex, the projected inequality
//!
//! ```text
//! N' [ He{A_aug R} - sum_i nu_i dR/drho_i   *      *           *        *
//!      Xh' B_aug0'                          -S     *           *        *
//!      B_aug1'                              0      -gamma I    *        *
//!      C_aug0 R                             D00 Xh 0           -Lambda  *
//!      C_aug1 R                             D10 Xh D_aug11     0   -gamma I ] N < 0
//! ```
//!
//! must hold, with `S = sum_k (Xh + Xh' - Xh_k)`, `Lambda = diag(Xh_k)`,
//! and `N` spanning the kernel of `[B_aug2' 0 0 0 D_aug12']`. A second
//! small LMI bounds the feedthrough. Gains are then recovered pointwise
//! by re-inserting the controller term at a slightly inflated gain level
//! and solving for the transformed gains, which are unwound as
//! `F_c = Fhat_c R^{-1}`, `H_c = Hhat_c Xh^{-1}`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmat::LinMat;
use crate::model::{
    augment_with_filter, close_loop, nominal_interconnection, AugmentedSystem, DelayedLpvPlant,
};
use crate::iqc::MultiplierRealization;
use crate::param::{make_grid, rate_vertices, BasisFunction};
use crate::sdp::{check_solution, solve_sdp, SdpBlock, SdpOptions, SdpProblem, SdpStatus};

/// Lower bound enforced on positivity blocks (`R`, `X` sums, `P`, `X_k`).
const EPS_POS: f64 = 1e-6;
/// Relative tolerance for rank decisions in [`nullspace_basis`].
const NULLSPACE_TOL: f64 = 1e-9;

/// Whether to minimize the gain bound or certify a fixed level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    Minimize,
    Fixed(f64),
}

/// Synthesis configuration: basis catalogs, grid resolution, gain mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Basis for the Lyapunov-side variable `R(rho)`. Must contain the
    /// constant function so the parameter-independent case is expressible.
    pub r_basis: Vec<BasisFunction>,
    /// Basis shared by `Xhat(rho)` and every `Xhat_k(rho)`.
    pub x_basis: Vec<BasisFunction>,
    /// Grid-point counts per parameter component.
    pub grid_counts: Vec<usize>,
    pub gamma_mode: GammaMode,
    /// Relative inflation of the certified gain before pointwise recovery.
    pub recovery_margin: f64,
    pub sdp: SdpOptions,
}

impl SynthesisConfig {
    /// Parameter-independent (quadratic Lyapunov function) configuration.
    pub fn quadratic(param_dim: usize, grid_counts: Vec<usize>) -> Self {
        Self {
            r_basis: vec![BasisFunction::constant(param_dim)],
            x_basis: vec![BasisFunction::constant(param_dim)],
            grid_counts,
            gamma_mode: GammaMode::Minimize,
            recovery_margin: 0.01,
            sdp: SdpOptions::default(),
        }
    }

    /// Scalar-parameter configuration with bases `{1, rho, rho^2}` for `R`
    /// and `{1, rho}` for `Xhat`, `Xhat_k`.
    pub fn parameter_dependent(grid_counts: Vec<usize>) -> Self {
        Self {
            r_basis: vec![
                BasisFunction::constant(1),
                BasisFunction::monomial(vec![1]),
                BasisFunction::monomial(vec![2]),
            ],
            x_basis: vec![BasisFunction::constant(1), BasisFunction::monomial(vec![1])],
            grid_counts,
            gamma_mode: GammaMode::Minimize,
            recovery_margin: 0.01,
            sdp: SdpOptions::default(),
        }
    }

    fn validate(&self, param_dim: usize) -> Result<()> {
        if !self.r_basis.iter().any(|b| b.is_constant()) {
            return Err(Error::InvalidConfig(
                "R basis must contain the constant function".into(),
            ));
        }
        for b in self.r_basis.iter().chain(&self.x_basis) {
            if b.dim() != param_dim {
                return Err(Error::InvalidConfig(format!(
                    "basis function over {} components, domain has {param_dim}",
                    b.dim()
                )));
            }
        }
        if !(self.recovery_margin > 0.0) {
            return Err(Error::InvalidConfig(
                "recovery margin must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Certified synthesis outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub gamma: f64,
    pub r_basis: Vec<BasisFunction>,
    pub x_basis: Vec<BasisFunction>,
    pub r_coeffs: Vec<DMatrix<f64>>,
    pub x_hat_coeffs: Vec<DMatrix<f64>>,
    /// `[multiplier][basis]` coefficients of `Xhat_k(rho)`.
    pub x_hat_k_coeffs: Vec<Vec<DMatrix<f64>>>,
    pub grid: Vec<Vec<f64>>,
    /// Per-grid-point `(F_c, H_c)`; empty until gains are recovered.
    pub gains: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    /// Most-positive scaled block eigenvalue of the certified solution.
    pub worst_margin: f64,
}

impl SynthesisResult {
    fn expansion(basis: &[BasisFunction], coeffs: &[DMatrix<f64>], rho: &[f64]) -> Result<DMatrix<f64>> {
        let mut acc = DMatrix::zeros(coeffs[0].nrows(), coeffs[0].ncols());
        for (b, m) in basis.iter().zip(coeffs) {
            acc += m * b.eval(rho)?;
        }
        Ok(acc)
    }

    pub fn r_at(&self, rho: &[f64]) -> Result<DMatrix<f64>> {
        Self::expansion(&self.r_basis, &self.r_coeffs, rho)
    }

    pub fn x_hat_at(&self, rho: &[f64]) -> Result<DMatrix<f64>> {
        Self::expansion(&self.x_basis, &self.x_hat_coeffs, rho)
    }

    pub fn x_hat_k_at(&self, k: usize, rho: &[f64]) -> Result<DMatrix<f64>> {
        Self::expansion(&self.x_basis, &self.x_hat_k_coeffs[k], rho)
    }

    /// `sum_i nu_i dR/drho_i` at a point and rate vector.
    fn r_rate_at(&self, rho: &[f64], rate: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.r_coeffs[0].nrows();
        let mut acc = DMatrix::zeros(n, n);
        for (b, m) in self.r_basis.iter().zip(&self.r_coeffs) {
            for (i, &nu) in rate.iter().enumerate() {
                acc += m * (nu * b.eval_derivative(rho, i)?);
            }
        }
        Ok(acc)
    }
}

/// Feasibility certificate for the analysis condition at fixed gains.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisCertificate {
    pub gamma: f64,
    pub p_basis: Vec<BasisFunction>,
    pub x_basis: Vec<BasisFunction>,
    pub p_coeffs: Vec<DMatrix<f64>>,
    pub x_k_coeffs: Vec<Vec<DMatrix<f64>>>,
    /// Optimized slack: strictly negative for a valid certificate.
    pub margin: f64,
}

/// Piecewise-linear gain schedule over a scalar parameter grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainSchedule {
    grid: Vec<f64>,
    gains: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

impl GainSchedule {
    pub fn new(grid: &[Vec<f64>], gains: Vec<(DMatrix<f64>, DMatrix<f64>)>) -> Result<Self> {
        if grid.len() != gains.len() || grid.is_empty() {
            return Err(Error::InvalidConfig(
                "gain schedule needs one gain pair per grid point".into(),
            ));
        }
        if grid.iter().any(|p| p.len() != 1) {
            return Err(Error::InvalidConfig(
                "gain interpolation is only supported for scalar parameters".into(),
            ));
        }
        let flat: Vec<f64> = grid.iter().map(|p| p[0]).collect();
        if flat.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "gain schedule grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { grid: flat, gains })
    }

    /// Linear interpolation in `rho`, clamped at the grid ends.
    pub fn eval(&self, rho: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.grid.len();
        if rho <= self.grid[0] || n == 1 {
            return self.gains[0].clone();
        }
        if rho >= self.grid[n - 1] {
            return self.gains[n - 1].clone();
        }
        let j = self.grid.partition_point(|&g| g <= rho) - 1;
        let (g0, g1) = (self.grid[j], self.grid[j + 1]);
        let t = (rho - g0) / (g1 - g0);
        let f = &self.gains[j].0 * (1.0 - t) + &self.gains[j + 1].0 * t;
        let h = &self.gains[j].1 * (1.0 - t) + &self.gains[j + 1].1 * t;
        (f, h)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn gains(&self) -> &[(DMatrix<f64>, DMatrix<f64>)] {
        &self.gains
    }
}

/// Orthonormal basis of `ker(M)`: columns `N` with `M N = 0`, `N' N = I`.
///
/// Computed from the symmetric eigendecomposition of `M' M`; eigenvalues
/// below `tol * lambda_max` are treated as zero. The threshold is relative
/// to the Gram spectrum so it stays above the eigensolver noise floor.
pub fn nullspace_basis(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    let gram = m.transpose() * m;
    let eig = SymmetricEigen::new(gram);
    let lam_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let thresh = (tol * lam_max).max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..cols)
        .filter(|&i| eig.eigenvalues[i].max(0.0) <= thresh)
        .collect();
    let mut n = DMatrix::zeros(cols, keep.len());
    for (out, &i) in keep.iter().enumerate() {
        n.set_column(out, &eig.eigenvectors.column(i));
    }
    n
}

// ---------------------------------------------------------------------------
// Matrix-variable bookkeeping over the flat SDP decision vector.

/// Symmetric matrix variable: upper triangle stored column-major.
#[derive(Debug, Clone)]
struct SymMatVar {
    dim: usize,
    base: usize,
}

impl SymMatVar {
    fn n_scalars(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    /// Affine expression `weight * M` of this variable.
    fn linmat(&self, weight: f64) -> LinMat {
        let mut m = LinMat::zeros(self.dim, self.dim);
        let mut idx = self.base;
        for c in 0..self.dim {
            for r in 0..=c {
                let mut coeff = DMatrix::zeros(self.dim, self.dim);
                coeff[(r, c)] = weight;
                coeff[(c, r)] = weight;
                m.add_term(idx, coeff);
                idx += 1;
            }
        }
        m
    }

    fn extract(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let mut idx = self.base;
        for c in 0..self.dim {
            for r in 0..=c {
                m[(r, c)] = x[idx];
                m[(c, r)] = x[idx];
                idx += 1;
            }
        }
        m
    }
}

/// General (non-symmetric) matrix variable, stored column-major.
#[derive(Debug, Clone)]
struct FullMatVar {
    nrows: usize,
    ncols: usize,
    base: usize,
}

impl FullMatVar {
    fn linmat(&self, weight: f64) -> LinMat {
        let mut m = LinMat::zeros(self.nrows, self.ncols);
        let mut idx = self.base;
        for c in 0..self.ncols {
            for r in 0..self.nrows {
                let mut coeff = DMatrix::zeros(self.nrows, self.ncols);
                coeff[(r, c)] = weight;
                m.add_term(idx, coeff);
                idx += 1;
            }
        }
        m
    }

    fn extract(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        let mut idx = self.base;
        for c in 0..self.ncols {
            for r in 0..self.nrows {
                m[(r, c)] = x[idx];
                idx += 1;
            }
        }
        m
    }
}

#[derive(Debug, Default)]
struct VarPool {
    next: usize,
}

impl VarPool {
    fn scalar(&mut self) -> usize {
        let i = self.next;
        self.next += 1;
        i
    }

    fn sym(&mut self, dim: usize) -> SymMatVar {
        let base = self.next;
        self.next += SymMatVar::n_scalars(dim);
        SymMatVar { dim, base }
    }

    fn full(&mut self, nrows: usize, ncols: usize) -> FullMatVar {
        let base = self.next;
        self.next += nrows * ncols;
        FullMatVar { nrows, ncols, base }
    }
}

fn sym_expansion(vars: &[SymMatVar], weights: &[f64]) -> LinMat {
    let mut acc = LinMat::zeros(vars[0].dim, vars[0].dim);
    for (v, &w) in vars.iter().zip(weights) {
        if w != 0.0 {
            acc.add_assign(&v.linmat(w));
        }
    }
    acc
}

fn full_expansion(vars: &[FullMatVar], weights: &[f64]) -> LinMat {
    let mut acc = LinMat::zeros(vars[0].nrows, vars[0].ncols);
    for (v, &w) in vars.iter().zip(weights) {
        if w != 0.0 {
            acc.add_assign(&v.linmat(w));
        }
    }
    acc
}

/// `g * I_n` for a 1x1 affine expression `g`.
fn scalar_identity(g: &LinMat, n: usize) -> LinMat {
    let eye = DMatrix::<f64>::identity(n, n);
    let mut out = LinMat::from_constant(&eye * g.constant[(0, 0)]);
    for (&v, m) in &g.terms {
        out.add_term(v, &eye * m[(0, 0)]);
    }
    out
}

// ---------------------------------------------------------------------------
// Numeric augmented-system data at one grid point.

struct AugAt {
    a_aug: DMatrix<f64>,
    b_aug0: DMatrix<f64>,
    b_aug1: DMatrix<f64>,
    b_aug2: DMatrix<f64>,
    /// Stacked `zbar` output rows `[Dbar1_k, Cbar_k]` (N * n_x rows).
    c0_bar: DMatrix<f64>,
    /// Stacked `zbar` feedthrough from `w` (identically zero here).
    d00_bar: DMatrix<f64>,
    c_aug1: DMatrix<f64>,
    d_aug10: DMatrix<f64>,
    d_aug11: DMatrix<f64>,
    d_aug12: DMatrix<f64>,
    n_cl: usize,
    n_x: usize,
    n_d: usize,
    n_e: usize,
    n_lambda: usize,
}

impl AugAt {
    fn total_dim(&self) -> usize {
        self.n_cl + self.n_x + self.n_d + self.n_lambda * self.n_x + self.n_e
    }

    /// Column offsets of the five block rows.
    fn offsets(&self) -> [usize; 5] {
        let o1 = self.n_cl;
        let o2 = o1 + self.n_x;
        let o3 = o2 + self.n_d;
        let o4 = o3 + self.n_lambda * self.n_x;
        [0, o1, o2, o3, o4]
    }
}

fn eval_aug(aug: &AugmentedSystem, rho: &[f64]) -> Result<AugAt> {
    let real = &aug.realization;
    let n_lambda = real.n_lambda();
    let n_cl = aug.n_cl();
    let mut c0_bar = DMatrix::zeros(n_lambda * aug.n_x, n_cl);
    for k in 0..n_lambda {
        c0_bar
            .view_mut((k * aug.n_x, 0), (aug.n_x, aug.n_x))
            .copy_from(&real.d_bar1[k]);
        c0_bar
            .view_mut((k * aug.n_x, aug.n_x), (aug.n_x, aug.n_psi))
            .copy_from(&real.c_bar[k]);
    }
    Ok(AugAt {
        a_aug: aug.a_aug.eval(rho)?,
        b_aug0: aug.b_aug0.eval(rho)?,
        b_aug1: aug.b_aug1.eval(rho)?,
        b_aug2: aug.b_aug2.eval(rho)?,
        c0_bar,
        d00_bar: DMatrix::zeros(n_lambda * aug.n_x, aug.n_x),
        c_aug1: aug.c_aug1.eval(rho)?,
        d_aug10: aug.d_aug10.eval(rho)?,
        d_aug11: aug.d_aug11.eval(rho)?,
        d_aug12: aug.d_aug12.eval(rho)?,
        n_cl,
        n_x: aug.n_x,
        n_d: aug.n_d,
        n_e: aug.n_e,
        n_lambda,
    })
}

/// Assemble the (unprojected) synthesis inequality at one grid point and
/// rate vertex, as an affine expression in the decision variables.
///
/// `rate_r` is `sum_i nu_i dR/drho_i` for the chosen rate vertex.
fn build_lmi1(
    at: &AugAt,
    r: &LinMat,
    rate_r: &LinMat,
    x: &LinMat,
    xk: &[LinMat],
    gamma: &LinMat,
) -> LinMat {
    let [o0, o1, o2, o3, o4] = at.offsets();
    let mut m = LinMat::zeros(at.total_dim(), at.total_dim());

    // (1,1): He{A_aug R} - sum nu_i dR/drho_i.
    m.add_block(o0, o0, &r.lmul(&at.a_aug).he());
    m.add_block(o0, o0, &rate_r.neg());

    // (1,2)/(2,1): B_aug0 Xhat and its transpose.
    let b0x = x.lmul(&at.b_aug0);
    m.add_block(o0, o1, &b0x);
    m.add_block(o1, o0, &b0x.transpose());

    // (2,2): -sum_k (Xhat + Xhat' - Xhat_k).
    let mut xsum = LinMat::zeros(at.n_x, at.n_x);
    for xk_k in xk {
        xsum.add_assign(x);
        xsum.add_assign(&x.transpose());
        xsum.add_assign(&xk_k.neg());
    }
    m.add_block(o1, o1, &xsum.neg());

    // (1,3)/(3,1): B_aug1.
    m.add_block(o0, o2, &LinMat::from_constant(at.b_aug1.clone()));
    m.add_block(o2, o0, &LinMat::from_constant(at.b_aug1.transpose()));

    // (3,3): -gamma I.
    m.add_block(o2, o2, &scalar_identity(gamma, at.n_d).neg());

    // (4,1)/(1,4): C_aug0 R; (4,2)/(2,4): D_aug00 Xhat.
    let u41 = r.lmul(&at.c0_bar);
    m.add_block(o3, o0, &u41);
    m.add_block(o0, o3, &u41.transpose());
    let u42 = x.lmul(&at.d00_bar);
    m.add_block(o3, o1, &u42);
    m.add_block(o1, o3, &u42.transpose());

    // (4,4): -diag(Xhat_k).
    for (k, xk_k) in xk.iter().enumerate() {
        m.add_block(o3 + k * at.n_x, o3 + k * at.n_x, &xk_k.neg());
    }

    // Row 5: performance output.
    let u51 = r.lmul(&at.c_aug1);
    m.add_block(o4, o0, &u51);
    m.add_block(o0, o4, &u51.transpose());
    let u52 = x.lmul(&at.d_aug10);
    m.add_block(o4, o1, &u52);
    m.add_block(o1, o4, &u52.transpose());
    m.add_block(o4, o2, &LinMat::from_constant(at.d_aug11.clone()));
    m.add_block(o2, o4, &LinMat::from_constant(at.d_aug11.transpose()));
    m.add_block(o4, o4, &scalar_identity(gamma, at.n_e).neg());

    m
}

/// The feedthrough inequality at one grid point.
fn build_lmi2(at: &AugAt, xk: &[LinMat], gamma: &LinMat) -> LinMat {
    let n_z = at.n_lambda * at.n_x;
    let dim = at.n_d + n_z + at.n_e;
    let mut m = LinMat::zeros(dim, dim);
    m.add_block(0, 0, &scalar_identity(gamma, at.n_d).neg());
    for (k, xk_k) in xk.iter().enumerate() {
        m.add_block(at.n_d + k * at.n_x, at.n_d + k * at.n_x, &xk_k.neg());
    }
    let o_e = at.n_d + n_z;
    m.add_block(o_e, 0, &LinMat::from_constant(at.d_aug11.clone()));
    m.add_block(0, o_e, &LinMat::from_constant(at.d_aug11.transpose()));
    m.add_block(o_e, o_e, &scalar_identity(gamma, at.n_e).neg());
    m
}

fn linmat_block(m: &LinMat, label: String) -> SdpBlock {
    SdpBlock::new(
        m.constant.clone(),
        m.terms.iter().map(|(&v, c)| (v, c.clone())).collect(),
        &label,
    )
}

/// The elimination-lemma projection row `[B_aug2' 0 0 0 D_aug12']`.
fn projection_row(at: &AugAt) -> DMatrix<f64> {
    let t = at.total_dim();
    let n_u = at.b_aug2.ncols();
    let mut row = DMatrix::zeros(n_u, t);
    row.view_mut((0, 0), (n_u, at.n_cl))
        .copy_from(&at.b_aug2.transpose());
    row.view_mut((0, t - at.n_e), (n_u, at.n_e))
        .copy_from(&at.d_aug12.transpose());
    row
}

/// Synthesis SDP plus the variable layout needed to unpack solutions.
pub struct AssembledSynthesis {
    pub problem: SdpProblem,
    pub grid: Vec<Vec<f64>>,
    gamma_var: Option<usize>,
    r_vars: Vec<SymMatVar>,
    x_vars: Vec<FullMatVar>,
    xk_vars: Vec<Vec<SymMatVar>>,
}

impl AssembledSynthesis {
    /// Number of blocks whose label starts with `prefix` (diagnostics).
    pub fn block_count(&self, prefix: &str) -> usize {
        self.problem
            .blocks
            .iter()
            .filter(|b| b.label.starts_with(prefix))
            .count()
    }
}

/// Build the full synthesis SDP over the grid and rate-box vertices.
pub fn assemble_synthesis_sdp(
    aug: &AugmentedSystem,
    config: &SynthesisConfig,
) -> Result<AssembledSynthesis> {
    config.validate(aug.domain.dim())?;
    let grid = make_grid(&aug.domain, &config.grid_counts)?;
    let vertices = rate_vertices(&aug.domain);
    let n_lambda = aug.n_lambda();
    let n_cl = aug.n_cl();

    let mut pool = VarPool::default();
    let gamma_var = match config.gamma_mode {
        GammaMode::Minimize => Some(pool.scalar()),
        GammaMode::Fixed(g) if g > 0.0 => None,
        GammaMode::Fixed(g) => {
            return Err(Error::InvalidConfig(format!(
                "fixed gamma must be positive, got {g}"
            )))
        }
    };
    let r_vars: Vec<SymMatVar> = config.r_basis.iter().map(|_| pool.sym(n_cl)).collect();
    let x_vars: Vec<FullMatVar> = config
        .x_basis
        .iter()
        .map(|_| pool.full(aug.n_x, aug.n_x))
        .collect();
    let xk_vars: Vec<Vec<SymMatVar>> = (0..n_lambda)
        .map(|_| config.x_basis.iter().map(|_| pool.sym(aug.n_x)).collect())
        .collect();

    let gamma_lin = match (gamma_var, config.gamma_mode) {
        (Some(v), _) => {
            let mut g = LinMat::zeros(1, 1);
            g.add_term(v, DMatrix::from_element(1, 1, 1.0));
            g
        }
        (None, GammaMode::Fixed(g)) => LinMat::from_constant(DMatrix::from_element(1, 1, g)),
        _ => unreachable!(),
    };

    let mut blocks = Vec::new();
    for (j, rho) in grid.iter().enumerate() {
        let at = eval_aug(aug, rho)?;
        let fb: Vec<f64> = config
            .r_basis
            .iter()
            .map(|b| b.eval(rho))
            .collect::<Result<_>>()?;
        let gb: Vec<f64> = config
            .x_basis
            .iter()
            .map(|b| b.eval(rho))
            .collect::<Result<_>>()?;
        let r = sym_expansion(&r_vars, &fb);
        let x = full_expansion(&x_vars, &gb);
        let xk: Vec<LinMat> = xk_vars.iter().map(|v| sym_expansion(v, &gb)).collect();

        let nproj = nullspace_basis(&projection_row(&at), NULLSPACE_TOL);
        for (vi, vert) in vertices.iter().enumerate() {
            // Rate weights per R-basis function at this vertex.
            let mut rw = vec![0.0; config.r_basis.len()];
            for (l, b) in config.r_basis.iter().enumerate() {
                for (i, &nu) in vert.iter().enumerate() {
                    rw[l] += nu * b.eval_derivative(rho, i)?;
                }
            }
            let rate_r = sym_expansion(&r_vars, &rw);
            let m = build_lmi1(&at, &r, &rate_r, &x, &xk, &gamma_lin);
            if nproj.ncols() == 0 {
                // Fully actuated in every channel: the projected block is
                // vacuous at this point.
                continue;
            }
            let proj = m.congruence(&nproj);
            blocks.push(linmat_block(&proj, format!("lmi1[{j},{vi}]")));
        }
        blocks.push(linmat_block(
            &build_lmi2(&at, &xk, &gamma_lin),
            format!("lmi2[{j}]"),
        ));

        // Positivity: R(rho_j) >= eps I and sum_k (X + X' - X_k) >= eps I.
        let mut pos_r = r.neg();
        pos_r.constant += DMatrix::<f64>::identity(n_cl, n_cl) * EPS_POS;
        blocks.push(linmat_block(&pos_r, format!("posR[{j}]")).non_strict());
        let mut xsum = LinMat::zeros(aug.n_x, aug.n_x);
        for xk_k in &xk {
            xsum.add_assign(&x);
            xsum.add_assign(&x.transpose());
            xsum.add_assign(&xk_k.neg());
        }
        let mut pos_x = xsum.neg();
        pos_x.constant += DMatrix::<f64>::identity(aug.n_x, aug.n_x) * EPS_POS;
        blocks.push(linmat_block(&pos_x, format!("posX[{j}]")).non_strict());
    }

    let n_vars = pool.next;
    let mut objective = vec![0.0; n_vars];
    if let Some(v) = gamma_var {
        objective[v] = 1.0;
    }
    Ok(AssembledSynthesis {
        problem: SdpProblem {
            n_vars,
            objective,
            blocks,
        },
        grid,
        gamma_var,
        r_vars,
        x_vars,
        xk_vars,
    })
}

/// Solve the synthesis SDP and unpack the certificate (gains left empty).
pub fn minimize_gamma(
    plant: &DelayedLpvPlant,
    realization: &MultiplierRealization,
    config: &SynthesisConfig,
) -> Result<SynthesisResult> {
    let aug = augment_with_filter(&nominal_interconnection(plant)?, realization)?;
    let asm = assemble_synthesis_sdp(&aug, config)?;
    let sol = solve_sdp(&asm.problem, &config.sdp)?;
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(Error::Infeasible(format!(
                "synthesis LMIs infeasible at (tau_bar={}, r={})",
                plant.delay.tau_bar, plant.delay.r
            )))
        }
        SdpStatus::NumericalFailure => {
            return Err(Error::SolverFailure(format!(
                "solver breakdown during synthesis: {}",
                sol.detail
            )))
        }
    }
    let gamma = match (asm.gamma_var, config.gamma_mode) {
        (Some(v), _) => sol.x[v],
        (None, GammaMode::Fixed(g)) => g,
        _ => unreachable!(),
    };
    Ok(SynthesisResult {
        gamma,
        r_basis: config.r_basis.clone(),
        x_basis: config.x_basis.clone(),
        r_coeffs: asm.r_vars.iter().map(|v| v.extract(&sol.x)).collect(),
        x_hat_coeffs: asm.x_vars.iter().map(|v| v.extract(&sol.x)).collect(),
        x_hat_k_coeffs: asm
            .xk_vars
            .iter()
            .map(|vk| vk.iter().map(|v| v.extract(&sol.x)).collect())
            .collect(),
        grid: asm.grid,
        gains: Vec::new(),
        worst_margin: sol.worst_margin,
    })
}

/// Recover `(F_c, H_c)` at every grid point by solving the pointwise
/// controller-insertion LMI with all certificate variables frozen and the
/// gain level inflated by `margin`.
///
/// Among all feasible transformed gains the minimum-norm pair is chosen
/// (an auxiliary bound keeps the recovered gains well conditioned). Each
/// returned pair is audited by re-substitution; a positive residual is a
/// certificate inconsistency and reported as an error.
pub fn recover_gains(
    plant: &DelayedLpvPlant,
    realization: &MultiplierRealization,
    result: &SynthesisResult,
    margin: f64,
    opts: &SdpOptions,
) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    let aug = augment_with_filter(&nominal_interconnection(plant)?, realization)?;
    let vertices = rate_vertices(&aug.domain);
    let n_cl = aug.n_cl();
    let n_x = aug.n_x;
    let n_u = aug.n_u;
    let gamma_lin = LinMat::from_constant(DMatrix::from_element(
        1,
        1,
        result.gamma * (1.0 + margin),
    ));

    let mut gains = Vec::with_capacity(result.grid.len());
    for rho in &result.grid {
        let at = eval_aug(&aug, rho)?;
        let t_dim = at.total_dim();
        let r_j = result.r_at(rho)?;
        let x_j = result.x_hat_at(rho)?;
        let r_lin = LinMat::from_constant(r_j.clone());
        let x_lin = LinMat::from_constant(x_j.clone());
        let xk_lin: Vec<LinMat> = (0..aug.n_lambda())
            .map(|k| Ok(LinMat::from_constant(result.x_hat_k_at(k, rho)?)))
            .collect::<Result<_>>()?;

        // Controller-insertion pattern: M0 + He{U Y V} with
        // U = [B_aug2; 0; 0; 0; D_aug12], V = [I 0 ...; 0 I 0 ...].
        let mut u = DMatrix::zeros(t_dim, n_u);
        u.view_mut((0, 0), (n_cl, n_u)).copy_from(&at.b_aug2);
        u.view_mut((t_dim - at.n_e, 0), (at.n_e, n_u))
            .copy_from(&at.d_aug12);
        let mut v = DMatrix::zeros(n_cl + n_x, t_dim);
        v.view_mut((0, 0), (n_cl, n_cl))
            .copy_from(&DMatrix::identity(n_cl, n_cl));
        v.view_mut((n_cl, n_cl), (n_x, n_x))
            .copy_from(&DMatrix::identity(n_x, n_x));

        let mut pool = VarPool::default();
        let y_var = pool.full(n_u, n_cl + n_x);
        // Auxiliary scalar: the norm bound `t` in stage one, the margin
        // slack `s` in stage two.
        let aux_var = pool.scalar();
        let n_vars = pool.next;

        // Insertion inequalities M0 + He{U Y V}, affine in the entries
        // of Y, one per rate vertex.
        let mut insertion = Vec::with_capacity(vertices.len());
        for vert in &vertices {
            let rate_r = LinMat::from_constant(result.r_rate_at(rho, vert)?);
            let mut m = build_lmi1(&at, &r_lin, &rate_r, &x_lin, &xk_lin, &gamma_lin);
            let mut idx = y_var.base;
            for c in 0..n_cl + n_x {
                for a in 0..n_u {
                    let add = &u.column(a) * v.row(c);
                    let coeff = &add + add.transpose();
                    let mut lm = LinMat::zeros(t_dim, t_dim);
                    lm.add_term(idx, coeff);
                    m.add_assign(&lm);
                    idx += 1;
                }
            }
            insertion.push(m);
        }
        // Y-dependent off-diagonal part of the norm block [[*, Y], [Y', *]].
        let nb_dim = n_u + n_cl + n_x;
        let mut nb_y = LinMat::zeros(nb_dim, nb_dim);
        {
            let mut idx = y_var.base;
            for c in 0..n_cl + n_x {
                for a in 0..n_u {
                    let mut coeff = DMatrix::zeros(nb_dim, nb_dim);
                    coeff[(a, n_u + c)] = 1.0;
                    coeff[(n_u + c, a)] = 1.0;
                    let mut lm = LinMat::zeros(nb_dim, nb_dim);
                    lm.add_term(idx, coeff);
                    nb_y.add_assign(&lm);
                    idx += 1;
                }
            }
        }
        let mut objective = vec![0.0; n_vars];
        objective[aux_var] = 1.0;

        // Stage one: minimize the transformed-gain norm bound t subject to
        // the insertion inequalities and [[-t I, Y], [Y', -t I]] <= 0.
        let mut blocks: Vec<SdpBlock> = insertion
            .iter()
            .enumerate()
            .map(|(vi, m)| linmat_block(m, format!("temp[{vi}]")))
            .collect();
        let mut nb = nb_y.clone();
        nb.add_term(aux_var, -DMatrix::<f64>::identity(nb_dim, nb_dim));
        blocks.push(linmat_block(&nb, "normbound".into()).non_strict());
        let stage1 = SdpProblem {
            n_vars,
            objective: objective.clone(),
            blocks,
        };
        let sol1 = solve_sdp(&stage1, opts)?;
        if sol1.status != SdpStatus::Optimal {
            return Err(Error::Infeasible(format!(
                "gain recovery infeasible at rho = {rho:?} ({}); certificate inconsistent",
                sol1.detail
            )));
        }
        let t_bound = sol1.x[aux_var].max(0.0) * 1.05 + 1e-9;

        // Stage two: with the norm capped slightly above the stage-one
        // optimum, re-center by maximizing the worst insertion margin
        // (min s with M <= s I), so the recovered gains sit strictly
        // inside the feasible set instead of on the solver-tolerance
        // boundary.
        let mut blocks: Vec<SdpBlock> = insertion
            .iter()
            .enumerate()
            .map(|(vi, m)| {
                let mut m2 = m.clone();
                m2.add_term(aux_var, -DMatrix::<f64>::identity(t_dim, t_dim));
                linmat_block(&m2, format!("temp[{vi}]")).non_strict()
            })
            .collect();
        let mut nb2 = nb_y.clone();
        nb2.constant -= DMatrix::<f64>::identity(nb_dim, nb_dim) * t_bound;
        blocks.push(linmat_block(&nb2, "normbound".into()).non_strict());
        let stage2 = SdpProblem {
            n_vars,
            objective,
            blocks,
        };
        let sol2 = solve_sdp(&stage2, opts)?;
        if sol2.status != SdpStatus::Optimal {
            return Err(Error::SolverFailure(format!(
                "gain re-centering failed at rho = {rho:?} ({})",
                sol2.detail
            )));
        }

        // Audit: re-substitute the recovered gains into the raw insertion
        // inequalities (no slack variable involved).
        let audit = SdpProblem {
            n_vars,
            objective: vec![0.0; n_vars],
            blocks: insertion
                .iter()
                .enumerate()
                .map(|(vi, m)| linmat_block(m, format!("temp[{vi}]")))
                .collect(),
        };
        let margins = check_solution(&audit, &sol2.x)?;
        if let Some(worst) = margins.iter().cloned().reduce(f64::max) {
            if worst > -1e-8 {
                return Err(Error::SolverFailure(format!(
                    "recovered gains violate the insertion LMI at rho = {rho:?} (margin {worst})"
                )));
            }
        }
        let y = y_var.extract(&sol2.x);
        let r_inv = r_j.clone().try_inverse().ok_or_else(|| {
            Error::SolverFailure("R(rho) is numerically singular during recovery".into())
        })?;
        let x_inv = x_j.clone().try_inverse().ok_or_else(|| {
            Error::SolverFailure("Xhat(rho) is numerically singular during recovery".into())
        })?;
        let f_c = y.view((0, 0), (n_u, n_cl)).into_owned() * r_inv;
        let h_c = y.view((0, n_cl), (n_u, n_x)).into_owned() * x_inv;
        gains.push((f_c, h_c));
    }
    Ok(gains)
}

/// Full pipeline: minimize the gain bound, re-center the certificate at the
/// inflated level, then recover the gain schedule.
///
/// The minimizing certificate is active at `gamma*` (typically `R` touches
/// its positivity floor somewhere on the grid), which leaves no room for
/// the insertion step. Re-solving the same LMIs as a feasibility problem at
/// the fixed level `gamma* (1 + margin)` returns an interior certificate
/// from which gains can be recovered reliably.
pub fn synthesize(
    plant: &DelayedLpvPlant,
    realization: &MultiplierRealization,
    config: &SynthesisConfig,
) -> Result<SynthesisResult> {
    let result = minimize_gamma(plant, realization, config)?;
    let gamma_star = result.gamma;
    let mut recenter_config = config.clone();
    recenter_config.gamma_mode = GammaMode::Fixed(gamma_star * (1.0 + config.recovery_margin));
    let mut recentered = minimize_gamma(plant, realization, &recenter_config)?;
    recentered.gamma = gamma_star;
    recentered.gains = recover_gains(
        plant,
        realization,
        &recentered,
        config.recovery_margin,
        &config.sdp,
    )?;
    Ok(recentered)
}

/// Check the analysis condition for fixed per-grid-point gains at a fixed
/// gain level, searching over parameter-dependent `P(rho)` and `X_k(rho)`.
///
/// Feasibility is decided through slack minimization: the blocks
/// `M - t I <= 0`, `-P + eps I - t I <= 0`, `-X_k + eps I - t I <= 0` are
/// solved for the smallest `t`; a certificate exists iff `t < 0`.
pub fn verify_analysis(
    aug: &AugmentedSystem,
    gains: &[(DMatrix<f64>, DMatrix<f64>)],
    grid: &[Vec<f64>],
    p_basis: &[BasisFunction],
    x_basis: &[BasisFunction],
    gamma: f64,
    opts: &SdpOptions,
) -> Result<AnalysisCertificate> {
    if gains.len() != grid.len() {
        return Err(Error::DimensionMismatch(
            "one gain pair per grid point required".into(),
        ));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig("gamma must be positive".into()));
    }
    let n_cl = aug.n_cl();
    let n_x = aug.n_x;
    let n_lambda = aug.n_lambda();
    let vertices = rate_vertices(&aug.domain);

    let mut pool = VarPool::default();
    let t_var = pool.scalar();
    let p_vars: Vec<SymMatVar> = p_basis.iter().map(|_| pool.sym(n_cl)).collect();
    let xk_vars: Vec<Vec<SymMatVar>> = (0..n_lambda)
        .map(|_| x_basis.iter().map(|_| pool.sym(n_x)).collect())
        .collect();

    let slack = |dim: usize| {
        let mut lm = LinMat::zeros(dim, dim);
        lm.add_term(t_var, -DMatrix::<f64>::identity(dim, dim));
        lm
    };

    let mut blocks = Vec::new();
    for (j, rho) in grid.iter().enumerate() {
        let cl = close_loop(aug, &gains[j].0, &gains[j].1, rho)?;
        let pb: Vec<f64> = p_basis.iter().map(|b| b.eval(rho)).collect::<Result<_>>()?;
        let gb: Vec<f64> = x_basis.iter().map(|b| b.eval(rho)).collect::<Result<_>>()?;
        let p = sym_expansion(&p_vars, &pb);
        let xk: Vec<LinMat> = xk_vars.iter().map(|v| sym_expansion(v, &gb)).collect();

        let t_dim = n_cl + n_x + aug.n_d + n_lambda * n_x + aug.n_e;
        let o1 = n_cl;
        let o2 = o1 + n_x;
        let o3 = o2 + aug.n_d;
        let o4 = o3 + n_lambda * n_x;

        for (vi, vert) in vertices.iter().enumerate() {
            let mut m = LinMat::zeros(t_dim, t_dim);
            // (1,1): He{P A_cl} + sum nu_i dP/drho_i.
            m.add_block(0, 0, &p.rmul(&cl.a_cl).he());
            let mut pw = vec![0.0; p_basis.len()];
            for (l, b) in p_basis.iter().enumerate() {
                for (i, &nu) in vert.iter().enumerate() {
                    pw[l] += nu * b.eval_derivative(rho, i)?;
                }
            }
            m.add_block(0, 0, &sym_expansion(&p_vars, &pw));
            // (2,1)/(1,2): B_cl1' P.
            let b1p = p.lmul(&cl.b_cl1.transpose());
            m.add_block(o1, 0, &b1p);
            m.add_block(0, o1, &b1p.transpose());
            // (2,2): -sum_k X_k.
            let mut xs = LinMat::zeros(n_x, n_x);
            for xk_k in &xk {
                xs.add_assign(&xk_k.neg());
            }
            m.add_block(o1, o1, &xs);
            // (3,1)/(1,3): B_cl2' P.
            let b2p = p.lmul(&cl.b_cl2.transpose());
            m.add_block(o2, 0, &b2p);
            m.add_block(0, o2, &b2p.transpose());
            // (3,3): -gamma I.
            m.add_block(
                o2,
                o2,
                &LinMat::from_constant(-DMatrix::<f64>::identity(aug.n_d, aug.n_d) * gamma),
            );
            // Rows 4 (per multiplier): [X_k Cbar_k, X_k Dbar11_k, X_k Dbar12_k | -X_k].
            for (k, xk_k) in xk.iter().enumerate() {
                let row0 = o3 + k * n_x;
                let cbar = cl.c_cl1[k].view((0, 0), (n_x, n_cl)).into_owned();
                let dbar11 = cl.d_cl11[k].view((0, 0), (n_x, n_x)).into_owned();
                let dbar12 = cl.d_cl12[k].view((0, 0), (n_x, aug.n_d)).into_owned();
                let xc = xk_k.rmul(&cbar);
                m.add_block(row0, 0, &xc);
                m.add_block(0, row0, &xc.transpose());
                let xd1 = xk_k.rmul(&dbar11);
                m.add_block(row0, o1, &xd1);
                m.add_block(o1, row0, &xd1.transpose());
                let xd2 = xk_k.rmul(&dbar12);
                m.add_block(row0, o2, &xd2);
                m.add_block(o2, row0, &xd2.transpose());
                m.add_block(row0, row0, &xk_k.neg());
            }
            // Row 5: performance output (Schur form of the 1/gamma term).
            m.add_block(o4, 0, &LinMat::from_constant(cl.c_cl2.clone()));
            m.add_block(0, o4, &LinMat::from_constant(cl.c_cl2.transpose()));
            m.add_block(o4, o1, &LinMat::from_constant(cl.d_cl21.clone()));
            m.add_block(o1, o4, &LinMat::from_constant(cl.d_cl21.transpose()));
            m.add_block(o4, o2, &LinMat::from_constant(cl.d_cl22.clone()));
            m.add_block(o2, o4, &LinMat::from_constant(cl.d_cl22.transpose()));
            m.add_block(
                o4,
                o4,
                &LinMat::from_constant(-DMatrix::<f64>::identity(aug.n_e, aug.n_e) * gamma),
            );

            m.add_assign(&slack(t_dim));
            blocks.push(linmat_block(&m, format!("ana[{j},{vi}]")).non_strict());
        }

        // Positivity with slack: P >= eps I - t I, X_k >= eps I - t I.
        let mut pos_p = p.neg();
        pos_p.constant += DMatrix::<f64>::identity(n_cl, n_cl) * EPS_POS;
        pos_p.add_assign(&slack(n_cl));
        blocks.push(linmat_block(&pos_p, format!("posP[{j}]")).non_strict());
        for (k, xk_k) in xk.iter().enumerate() {
            let mut pos_x = xk_k.neg();
            pos_x.constant += DMatrix::<f64>::identity(n_x, n_x) * EPS_POS;
            pos_x.add_assign(&slack(n_x));
            blocks.push(linmat_block(&pos_x, format!("posXk[{j},{k}]")).non_strict());
        }
    }

    let mut objective = vec![0.0; pool.next];
    objective[t_var] = 1.0;
    let problem = SdpProblem {
        n_vars: pool.next,
        objective,
        blocks,
    };
    let sol = solve_sdp(&problem, opts)?;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::SolverFailure(format!(
            "analysis slack problem not solved: {}",
            sol.detail
        )));
    }
    let margin = sol.x[t_var];
    if margin >= 0.0 {
        return Err(Error::Infeasible(format!(
            "no analysis certificate at gamma = {gamma} (best slack {margin:.3e})"
        )));
    }
    Ok(AnalysisCertificate {
        gamma,
        p_basis: p_basis.to_vec(),
        x_basis: x_basis.to_vec(),
        p_coeffs: p_vars.iter().map(|v| v.extract(&sol.x)).collect(),
        x_k_coeffs: xk_vars
            .iter()
            .map(|vk| vk.iter().map(|v| v.extract(&sol.x)).collect())
            .collect(),
        margin,
    })
}
