//! Solver-agnostic semidefinite-programming layer.
//!
//! Problems are stated as: minimize `q' x` subject to affine matrix
//! inequalities `F0 + sum_i x_i F_i <= 0` (one PSD block each). Strict
//! blocks are tightened to `<= -eps I`, with `eps` proportional to the
//! block's constant-term magnitude, and every block is rescaled by that
//! magnitude before it reaches the solver; the filter realizations put
//! `1/tau_bar^2` factors into the data, so raw entries span many orders of
//! magnitude.
//!
//! The conic solve itself is delegated to Clarabel; [`check_solution`]
//! audits any candidate point with an independent symmetric eigensolver.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One affine matrix-inequality block `F0 + sum x_i F_i <= 0`.
#[derive(Debug, Clone)]
pub struct SdpBlock {
    pub f0: DMatrix<f64>,
    /// (variable index, coefficient matrix) pairs.
    pub terms: Vec<(usize, DMatrix<f64>)>,
    /// Strict blocks are shifted to `<= -eps_strict * scale * I`.
    pub strict: bool,
    /// Free-form label used in diagnostics.
    pub label: String,
}

impl SdpBlock {
    pub fn new(f0: DMatrix<f64>, terms: Vec<(usize, DMatrix<f64>)>, label: &str) -> Self {
        Self {
            f0,
            terms,
            strict: true,
            label: label.to_string(),
        }
    }

    pub fn non_strict(mut self) -> Self {
        self.strict = false;
        self
    }

    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    /// Conditioning scale: max absolute entry of the constant term,
    /// floored at 1.
    pub fn scale(&self) -> f64 {
        self.f0.amax().max(1.0)
    }
}

/// A complete SDP: minimize `objective . x` over the block constraints.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<SdpBlock>,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.n_vars {
            return Err(Error::InvalidConfig(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.n_vars
            )));
        }
        for block in &self.blocks {
            let n = block.dim();
            if block.f0.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "block '{}' constant term is not square",
                    block.label
                )));
            }
            for (v, m) in &block.terms {
                if *v >= self.n_vars {
                    return Err(Error::DimensionMismatch(format!(
                        "block '{}' references variable {v} of {}",
                        block.label, self.n_vars
                    )));
                }
                if m.shape() != (n, n) {
                    return Err(Error::DimensionMismatch(format!(
                        "block '{}' coefficient for variable {v} has shape {:?}, expected {n}x{n}",
                        block.label,
                        m.shape()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Solver tolerances and limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Relative strictness shift applied to strict blocks.
    pub eps_strict: f64,
    /// Post-solve feasibility audit tolerance (scaled eigenvalues).
    pub feas_tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            eps_strict: 1e-7,
            feas_tol: 1e-6,
            max_iter: 200,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Most-positive scaled maximum eigenvalue across blocks (only
    /// meaningful for optimal solutions).
    pub worst_margin: f64,
    /// Human-readable solver diagnostic.
    pub detail: String,
}

/// Scaled upper-triangle vectorization used by the PSD triangle cone:
/// column-major upper triangle with off-diagonals multiplied by sqrt(2).
/// The input is symmetrized first.
fn svec(m: &DMatrix<f64>, scale: f64) -> Vec<f64> {
    let n = m.nrows();
    let sq2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for col in 0..n {
        for row in 0..=col {
            let v = if row == col {
                m[(row, col)]
            } else {
                0.5 * (m[(row, col)] + m[(col, row)]) * sq2
            };
            out.push(v * scale);
        }
    }
    out
}

/// Solve the SDP with Clarabel.
///
/// Infeasibility and solver breakdown are reported through
/// [`SdpSolution::status`], never silently.
pub fn solve_sdp(problem: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    use clarabel::algebra::CscMatrix;
    use clarabel::solver::{
        DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    };

    problem.validate()?;

    let mut cones: Vec<SupportedConeT<f64>> = Vec::with_capacity(problem.blocks.len());
    let mut b: Vec<f64> = Vec::new();
    // Per-variable sparse column entries of A (global row index, value).
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.n_vars];
    let mut row_offset = 0usize;
    for block in &problem.blocks {
        let n = block.dim();
        let scale = block.scale();
        let mut f0 = block.f0.clone();
        if block.strict {
            for i in 0..n {
                f0[(i, i)] += opts.eps_strict * scale;
            }
        }
        // s = b - A x = svec(-F0 - sum x_i F_i)/scale.
        b.extend(svec(&(-&f0), 1.0 / scale));
        for (v, m) in &block.terms {
            for (local, val) in svec(m, 1.0 / scale).into_iter().enumerate() {
                if val != 0.0 {
                    cols[*v].push((row_offset + local, val));
                }
            }
        }
        cones.push(SupportedConeT::PSDTriangleConeT(n));
        row_offset += n * (n + 1) / 2;
    }

    let mut colptr = Vec::with_capacity(problem.n_vars + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0usize);
    for col in cols.iter_mut() {
        col.sort_by_key(|&(r, _)| r);
        // Duplicate rows can arise when a variable appears twice in one
        // block; merge them.
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
        for &(r, v) in col.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == r => last.1 += v,
                _ => merged.push((r, v)),
            }
        }
        for (r, v) in merged {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    let a = CscMatrix::new(row_offset, problem.n_vars, colptr, rowval, nzval);
    let p = CscMatrix::<f64>::zeros((problem.n_vars, problem.n_vars));

    let settings = DefaultSettingsBuilder::default()
        .verbose(opts.verbose)
        .max_iter(opts.max_iter)
        .build()
        .map_err(|e| Error::SolverFailure(format!("settings: {e}")))?;
    let mut solver = DefaultSolver::new(&p, &problem.objective, &a, &b, &cones, settings)
        .map_err(|e| Error::SolverFailure(format!("setup: {e:?}")))?;
    solver.solve();

    let status = solver.solution.status;
    let detail = format!("{status:?}");
    let mapped = match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SdpStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SdpStatus::Infeasible
        }
        _ => SdpStatus::NumericalFailure,
    };
    let x = solver.solution.x.clone();
    let worst_margin = if mapped == SdpStatus::Optimal {
        check_solution(problem, &x)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        f64::NAN
    };
    Ok(SdpSolution {
        status: mapped,
        x,
        objective: solver.solution.obj_val,
        worst_margin,
        detail,
    })
}

/// Per-block maximum eigenvalue of `F0 + sum x_i F_i`, normalized by the
/// block scale. Computed with nalgebra's symmetric eigensolver,
/// independent of the conic solver.
pub fn check_solution(problem: &SdpProblem, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != problem.n_vars {
        return Err(Error::DimensionMismatch(format!(
            "candidate point has {} entries for {} variables",
            x.len(),
            problem.n_vars
        )));
    }
    let mut margins = Vec::with_capacity(problem.blocks.len());
    for block in &problem.blocks {
        let mut m = block.f0.clone();
        for (v, coeff) in &block.terms {
            m += coeff * x[*v];
        }
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        margins.push(eig.eigenvalues.max() / block.scale());
    }
    Ok(margins)
}

/// Sparse text dump for cross-solver debugging: one line per nonzero,
/// `block var row col value`, with `var = -1` for the constant term.
pub fn dump_sparse(problem: &SdpProblem) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for (bi, block) in problem.blocks.iter().enumerate() {
        for r in 0..block.dim() {
            for c in 0..block.dim() {
                if block.f0[(r, c)] != 0.0 {
                    let _ = writeln!(out, "{bi} -1 {r} {c} {:.17e}", block.f0[(r, c)]);
                }
            }
        }
        for (v, m) in &block.terms {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    if m[(r, c)] != 0.0 {
                        let _ = writeln!(out, "{bi} {v} {r} {c} {:.17e}", m[(r, c)]);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn scalar_bound_problem() -> SdpProblem {
        // minimize -x s.t. x - 1 <= 0.
        SdpProblem {
            n_vars: 1,
            objective: vec![-1.0],
            blocks: vec![SdpBlock::new(
                dmatrix![-1.0],
                vec![(0, dmatrix![1.0])],
                "x <= 1",
            )
            .non_strict()],
        }
    }

    #[test]
    fn scalar_bound_attained() {
        let sol = solve_sdp(&scalar_bound_problem(), &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-6);
        assert!(sol.worst_margin <= 1e-6);
    }

    #[test]
    fn gamma_lower_bound() {
        // minimize g s.t. 1 - g <= 0.
        let p = SdpProblem {
            n_vars: 1,
            objective: vec![1.0],
            blocks: vec![SdpBlock::new(
                dmatrix![1.0],
                vec![(0, dmatrix![-1.0])],
                "1 <= g",
            )
            .non_strict()],
        };
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn psd_block_gamma() {
        // minimize g s.t. [[-g, 0.5], [0.5, -g]] <= 0 -> g = 0.5.
        let p = SdpProblem {
            n_vars: 1,
            objective: vec![1.0],
            blocks: vec![SdpBlock::new(
                dmatrix![0.0, 0.5; 0.5, 0.0],
                vec![(0, dmatrix![-1.0, 0.0; 0.0, -1.0])],
                "offdiag",
            )
            .non_strict()],
        };
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        // x + 1 <= 0 and 1 - x <= 0 cannot both hold.
        let p = SdpProblem {
            n_vars: 1,
            objective: vec![0.0],
            blocks: vec![
                SdpBlock::new(dmatrix![1.0], vec![(0, dmatrix![1.0])], "x <= -1").non_strict(),
                SdpBlock::new(dmatrix![1.0], vec![(0, dmatrix![-1.0])], "x >= 1").non_strict(),
            ],
        };
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn check_solution_flags_violations() {
        let p = scalar_bound_problem();
        assert!(check_solution(&p, &[0.0]).unwrap()[0] <= 0.0);
        assert_relative_eq!(check_solution(&p, &[0.0]).unwrap()[0], -1.0);
        assert!(check_solution(&p, &[2.0]).unwrap()[0] > 0.0);
    }

    #[test]
    fn optimal_solutions_pass_audit() {
        let p = scalar_bound_problem();
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        let margins = check_solution(&p, &sol.x).unwrap();
        assert!(margins.iter().all(|&m| m <= 1e-6));
    }

    #[test]
    fn deterministic_resolve() {
        let p = SdpProblem {
            n_vars: 2,
            objective: vec![1.0, 0.3],
            blocks: vec![
                SdpBlock::new(
                    dmatrix![0.0, 1.0; 1.0, 0.0],
                    vec![
                        (0, dmatrix![-1.0, 0.0; 0.0, 0.0]),
                        (1, dmatrix![0.0, 0.0; 0.0, -1.0]),
                    ],
                    "coupled",
                )
                .non_strict(),
            ],
        };
        let o1 = solve_sdp(&p, &SdpOptions::default()).unwrap().objective;
        let o2 = solve_sdp(&p, &SdpOptions::default()).unwrap().objective;
        assert!((o1 - o2).abs() <= 1e-7 * o1.abs().max(1.0));
    }

    #[test]
    fn strict_shift_applied() {
        // Strict x <= 0 pushes the optimum below zero by eps * scale.
        let p = SdpProblem {
            n_vars: 1,
            objective: vec![-1.0],
            blocks: vec![SdpBlock::new(dmatrix![0.0], vec![(0, dmatrix![1.0])], "x < 0")],
        };
        let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.x[0] <= -0.9e-7);
    }

    #[test]
    fn invalid_problem_rejected() {
        let p = SdpProblem {
            n_vars: 1,
            objective: vec![0.0],
            blocks: vec![SdpBlock::new(dmatrix![0.0], vec![(3, dmatrix![1.0])], "bad var")],
        };
        assert!(solve_sdp(&p, &SdpOptions::default()).is_err());
    }

    #[test]
    fn dump_sparse_roundtrip_lines() {
        let p = scalar_bound_problem();
        let dump = dump_sparse(&p);
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("0 -1 0 0"));
        assert!(lines[1].starts_with("0 0 0 0"));
    }
}
