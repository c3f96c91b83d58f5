//! Affine matrix expressions in scalar decision variables.
//!
//! An [`LinMat`] represents `F0 + sum_i x_i F_i` where the `x_i` are entries
//! of the global SDP decision vector. LMI blocks are built by composing
//! these expressions with constant matrices (left/right products, block
//! placement, congruence), which keeps the assembly code close to the
//! block-matrix notation of the synthesis conditions.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub(crate) struct LinMat {
    pub constant: DMatrix<f64>,
    /// Variable index -> coefficient matrix.
    pub terms: BTreeMap<usize, DMatrix<f64>>,
}

impl LinMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            constant: DMatrix::zeros(nrows, ncols),
            terms: BTreeMap::new(),
        }
    }

    pub fn from_constant(constant: DMatrix<f64>) -> Self {
        Self {
            constant,
            terms: BTreeMap::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    /// Add `coeff * x_var` to the expression.
    pub fn add_term(&mut self, var: usize, coeff: DMatrix<f64>) {
        debug_assert_eq!(coeff.shape(), self.constant.shape());
        self.terms
            .entry(var)
            .and_modify(|m| *m += &coeff)
            .or_insert(coeff);
    }

    pub fn add_assign(&mut self, other: &LinMat) {
        debug_assert_eq!(self.constant.shape(), other.constant.shape());
        self.constant += &other.constant;
        for (&v, m) in &other.terms {
            self.add_term(v, m.clone());
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            constant: &self.constant * s,
            terms: self.terms.iter().map(|(&v, m)| (v, m * s)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn transpose(&self) -> Self {
        Self {
            constant: self.constant.transpose(),
            terms: self
                .terms
                .iter()
                .map(|(&v, m)| (v, m.transpose()))
                .collect(),
        }
    }

    /// Left product by a constant matrix: `L * self`.
    pub fn lmul(&self, l: &DMatrix<f64>) -> Self {
        Self {
            constant: l * &self.constant,
            terms: self.terms.iter().map(|(&v, m)| (v, l * m)).collect(),
        }
    }

    /// Right product by a constant matrix: `self * R`.
    pub fn rmul(&self, r: &DMatrix<f64>) -> Self {
        Self {
            constant: &self.constant * r,
            terms: self.terms.iter().map(|(&v, m)| (v, m * r)).collect(),
        }
    }

    /// Hermitian part `self + self^T` (square expressions only).
    pub fn he(&self) -> Self {
        let mut out = self.transpose();
        out.add_assign(self);
        out
    }

    /// Congruence `N^T * self * N` with a constant matrix `N`.
    pub fn congruence(&self, n: &DMatrix<f64>) -> Self {
        self.lmul(&n.transpose()).rmul(n)
    }

    /// Add `other` embedded at block offset `(r0, c0)`.
    pub fn add_block(&mut self, r0: usize, c0: usize, other: &LinMat) {
        let (br, bc) = other.constant.shape();
        debug_assert!(r0 + br <= self.nrows() && c0 + bc <= self.ncols());
        self.constant
            .view_mut((r0, c0), (br, bc))
            .add_assign_alias(&other.constant);
        for (&v, m) in &other.terms {
            let mut big = DMatrix::zeros(self.nrows(), self.ncols());
            big.view_mut((r0, c0), (br, bc)).copy_from(m);
            self.add_term(v, big);
        }
    }

    /// Evaluate the expression at a decision vector.
    #[cfg(test)]
    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut acc = self.constant.clone();
        for (&v, m) in &self.terms {
            acc += m * x[v];
        }
        acc
    }
}

/// Small extension so `add_block` can accumulate into a view.
trait AddAssignAlias {
    fn add_assign_alias(&mut self, rhs: &DMatrix<f64>);
}

impl AddAssignAlias for nalgebra::DMatrixViewMut<'_, f64> {
    fn add_assign_alias(&mut self, rhs: &DMatrix<f64>) {
        *self += rhs;
    }
}
