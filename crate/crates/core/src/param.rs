//! Parameter-dependent matrix functions, basis catalogs, grids and rate
//! vertices.
//!
//! All scheduling-parameter dependence in the toolbox is expressed as a
//! monomial basis expansion `M(rho) = sum_i f_i(rho) M_i`, which keeps
//! derivatives exact: the rate terms of the synthesis and analysis LMIs
//! never rely on finite differencing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compact parameter box with per-component rate bounds.
///
/// The rate box must contain the origin: frozen parameter trajectories are
/// always admissible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    intervals: Vec<(f64, f64)>,
    rate_intervals: Vec<(f64, f64)>,
}

impl ParameterDomain {
    pub fn new(intervals: Vec<(f64, f64)>, rate_intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.len() != rate_intervals.len() {
            return Err(Error::InvalidDomain(format!(
                "box has {} components but rate box has {}",
                intervals.len(),
                rate_intervals.len()
            )));
        }
        if intervals.is_empty() {
            return Err(Error::InvalidDomain("empty parameter box".into()));
        }
        for (k, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo <= hi) {
                return Err(Error::InvalidDomain(format!(
                    "component {k}: lo={lo} > hi={hi}"
                )));
            }
        }
        for (k, &(lo, hi)) in rate_intervals.iter().enumerate() {
            if !(lo <= 0.0 && 0.0 <= hi) {
                return Err(Error::InvalidDomain(format!(
                    "rate component {k}: [{lo}, {hi}] must contain 0"
                )));
            }
        }
        Ok(Self {
            intervals,
            rate_intervals,
        })
    }

    /// Domain frozen at a single point with zero rates.
    pub fn frozen(point: &[f64]) -> Self {
        Self {
            intervals: point.iter().map(|&p| (p, p)).collect(),
            rate_intervals: vec![(0.0, 0.0); point.len()],
        }
    }

    /// Symmetric scalar domain `rho in [-1, 1]`, `|rho_dot| <= nu`.
    pub fn scalar_symmetric(nu: f64) -> Self {
        Self {
            intervals: vec![(-1.0, 1.0)],
            rate_intervals: vec![(-nu, nu)],
        }
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn rate_intervals(&self) -> &[(f64, f64)] {
        &self.rate_intervals
    }

    pub fn contains(&self, rho: &[f64], tol: f64) -> bool {
        rho.len() == self.dim()
            && rho
                .iter()
                .zip(&self.intervals)
                .all(|(&p, &(lo, hi))| p >= lo - tol && p <= hi + tol)
    }

    pub fn rate_contains(&self, rate: &[f64], tol: f64) -> bool {
        rate.len() == self.dim()
            && rate
                .iter()
                .zip(&self.rate_intervals)
                .all(|(&v, &(lo, hi))| v >= lo - tol && v <= hi + tol)
    }
}

/// A monomial `rho_1^{e_1} ... rho_s^{e_s}` over the scheduling parameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisFunction {
    exponents: Vec<u32>,
}

impl BasisFunction {
    pub fn monomial(exponents: Vec<u32>) -> Self {
        Self { exponents }
    }

    /// The constant function 1 over an `s`-dimensional parameter.
    pub fn constant(dim: usize) -> Self {
        Self {
            exponents: vec![0; dim],
        }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn is_constant(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    fn check_point(&self, rho: &[f64]) -> Result<()> {
        if rho.len() != self.exponents.len() {
            return Err(Error::DimensionMismatch(format!(
                "parameter point has dimension {} but basis expects {}",
                rho.len(),
                self.exponents.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, rho: &[f64]) -> Result<f64> {
        self.check_point(rho)?;
        Ok(self
            .exponents
            .iter()
            .zip(rho)
            .map(|(&e, &p)| p.powi(e as i32))
            .product())
    }

    /// Exact partial derivative with respect to component `k`.
    pub fn eval_derivative(&self, rho: &[f64], k: usize) -> Result<f64> {
        self.check_point(rho)?;
        if k >= self.exponents.len() {
            return Err(Error::DimensionMismatch(format!(
                "derivative component {k} out of range (dim {})",
                self.exponents.len()
            )));
        }
        let ek = self.exponents[k];
        if ek == 0 {
            return Ok(0.0);
        }
        let mut v = ek as f64 * rho[k].powi(ek as i32 - 1);
        for (j, (&e, &p)) in self.exponents.iter().zip(rho).enumerate() {
            if j != k {
                v *= p.powi(e as i32);
            }
        }
        Ok(v)
    }
}

/// Matrix-valued function of the scheduling parameter, stored as
/// basis/coefficient pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamMatrixFunction {
    terms: Vec<(BasisFunction, DMatrix<f64>)>,
    nrows: usize,
    ncols: usize,
}

impl ParamMatrixFunction {
    pub fn new(terms: Vec<(BasisFunction, DMatrix<f64>)>) -> Result<Self> {
        let Some((first_basis, first)) = terms.first() else {
            return Err(Error::InvalidPlant("empty basis expansion".into()));
        };
        let (nrows, ncols) = (first.nrows(), first.ncols());
        let dim = first_basis.dim();
        for (b, m) in &terms {
            if m.nrows() != nrows || m.ncols() != ncols {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient shapes differ: {}x{} vs {}x{}",
                    m.nrows(),
                    m.ncols(),
                    nrows,
                    ncols
                )));
            }
            if b.dim() != dim {
                return Err(Error::DimensionMismatch(
                    "basis functions have mixed parameter dimensions".into(),
                ));
            }
        }
        Ok(Self {
            terms,
            nrows,
            ncols,
        })
    }

    /// Parameter-independent matrix (single constant basis term).
    pub fn constant(m: DMatrix<f64>, param_dim: usize) -> Self {
        let (nrows, ncols) = (m.nrows(), m.ncols());
        Self {
            terms: vec![(BasisFunction::constant(param_dim), m)],
            nrows,
            ncols,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize, param_dim: usize) -> Self {
        Self::constant(DMatrix::zeros(nrows, ncols), param_dim)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn param_dim(&self) -> usize {
        self.terms[0].0.dim()
    }

    pub fn terms(&self) -> &[(BasisFunction, DMatrix<f64>)] {
        &self.terms
    }

    pub fn eval(&self, rho: &[f64]) -> Result<DMatrix<f64>> {
        let mut acc = DMatrix::zeros(self.nrows, self.ncols);
        for (b, m) in &self.terms {
            acc += m * b.eval(rho)?;
        }
        Ok(acc)
    }

    /// Exact analytic derivative with respect to component `k`.
    pub fn eval_derivative(&self, rho: &[f64], k: usize) -> Result<DMatrix<f64>> {
        let mut acc = DMatrix::zeros(self.nrows, self.ncols);
        for (b, m) in &self.terms {
            acc += m * b.eval_derivative(rho, k)?;
        }
        Ok(acc)
    }

    /// Term-wise sum; shapes must agree.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut terms = self.terms.clone();
        for (b, m) in &other.terms {
            if let Some((_, acc)) = terms.iter_mut().find(|(tb, _)| tb == b) {
                *acc += m;
            } else {
                terms.push((b.clone(), m.clone()));
            }
        }
        Self::new(terms)
    }

    pub fn negate(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(b, m)| (b.clone(), -m))
            .collect();
        Self {
            terms,
            nrows: self.nrows,
            ncols: self.ncols,
        }
    }

    /// Embed every coefficient at offset `(r0, c0)` of a larger zero matrix.
    pub fn embed(&self, total_rows: usize, total_cols: usize, r0: usize, c0: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(b, m)| {
                let mut big = DMatrix::zeros(total_rows, total_cols);
                big.view_mut((r0, c0), (m.nrows(), m.ncols())).copy_from(m);
                (b.clone(), big)
            })
            .collect();
        Self {
            terms,
            nrows: total_rows,
            ncols: total_cols,
        }
    }
}

/// Uniform tensor grid over the parameter box, endpoints included.
pub fn make_grid(domain: &ParameterDomain, counts: &[usize]) -> Result<Vec<Vec<f64>>> {
    if counts.len() != domain.dim() {
        return Err(Error::InvalidGrid(format!(
            "counts has {} entries for a {}-dimensional box",
            counts.len(),
            domain.dim()
        )));
    }
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(domain.dim());
    for (k, (&count, &(lo, hi))) in counts.iter().zip(domain.intervals()).enumerate() {
        if count == 0 {
            return Err(Error::InvalidGrid(format!("component {k}: count is 0")));
        }
        if count == 1 {
            if lo != hi {
                return Err(Error::InvalidGrid(format!(
                    "component {k}: count 1 requires a degenerate interval"
                )));
            }
            axes.push(vec![lo]);
        } else {
            let n = count - 1;
            axes.push(
                (0..count)
                    .map(|i| lo + (hi - lo) * i as f64 / n as f64)
                    .collect(),
            );
        }
    }
    let mut grid = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(grid.len() * axis.len());
        for point in &grid {
            for &v in axis {
                let mut p = point.clone();
                p.push(v);
                next.push(p);
            }
        }
        grid = next;
    }
    Ok(grid)
}

/// All corner combinations of the rate box (degenerate components collapse).
pub fn rate_vertices(domain: &ParameterDomain) -> Vec<Vec<f64>> {
    let mut vertices = vec![Vec::new()];
    for &(lo, hi) in domain.rate_intervals() {
        let choices: &[f64] = if lo == hi { &[lo] } else { &[lo, hi] };
        let mut next = Vec::with_capacity(vertices.len() * choices.len());
        for v in &vertices {
            for &c in choices {
                let mut w = v.clone();
                w.push(c);
                next.push(w);
            }
        }
        vertices = next;
    }
    vertices
}
