//! The weighted implicit-explicit theta time scheme.
//!
//! Three-level stencils with theta in [0, 1/2]:
//!
//!   D_tau v^{n-theta} = [(3-2theta) v^n - (4-4theta) v^{n-1}
//!                        + (1-2theta) v^{n-2}] / (2 tau),
//!   v^{n-theta}       = (1-theta) v^n + theta v^{n-1},
//!   vhat^{n-theta}    = (2-theta) v^{n-1} - (1-theta) v^{n-2},
//!
//! so theta = 0 recovers BDF2 and theta = 1/2 a Crank-Nicolson-type scheme.
//! The cubic term is linearized through the extrapolation vhat, the first
//! step is a backward Euler step weighted by |u^0|^2, and the initial field
//! is the elliptic projection of the initial datum.

use crate::error::{Error, Result};
use crate::forms::{self, ModelParams};
use crate::geometry::Point2;
use crate::solver::{self, BlockIlu0, BlockJacobi, DenseLu, SolverConfig, SparseComplexMatrix};
use crate::space::{BrokenSpace, FieldCoefficients};
use num_complex::Complex64;
use serde::Serialize;
use std::time::Instant;

/// Time discretization: N uniform steps of size tau with averaging weight
/// theta in [0, 1/2].
#[derive(Debug, Clone, Copy)]
pub struct TimeScheme {
    pub theta: f64,
    pub tau: f64,
    pub n_steps: usize,
}

impl TimeScheme {
    pub fn new(theta: f64, tau: f64, n_steps: usize) -> Result<Self> {
        if !(0.0..=0.5).contains(&theta) {
            return Err(Error::invalid(format!(
                "theta must lie in [0, 1/2], got {theta}"
            )));
        }
        if !(tau > 0.0) || n_steps == 0 {
            return Err(Error::invalid("need tau > 0 and at least one step"));
        }
        Ok(TimeScheme {
            theta,
            tau,
            n_steps,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.tau
    }

    /// Quadrature time of the theta-weighted level n.
    pub fn t_weighted(&self, n: usize) -> f64 {
        (n as f64 - self.theta) * self.tau
    }
}

/// The scalar stencil weights of the scheme at a given theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaStencils {
    /// D_tau numerator weights on (v^n, v^{n-1}, v^{n-2}); divide by 2 tau.
    pub derivative: [f64; 3],
    /// Weights of v^{n-theta} on (v^n, v^{n-1}).
    pub average: [f64; 2],
    /// Weights of vhat^{n-theta} on (v^{n-1}, v^{n-2}).
    pub extrapolation: [f64; 2],
}

pub fn stencils(theta: f64) -> Result<ThetaStencils> {
    if !(0.0..=0.5).contains(&theta) {
        return Err(Error::invalid(format!(
            "theta must lie in [0, 1/2], got {theta}"
        )));
    }
    Ok(ThetaStencils {
        derivative: [3.0 - 2.0 * theta, -(4.0 - 4.0 * theta), 1.0 - 2.0 * theta],
        average: [1.0 - theta, theta],
        extrapolation: [2.0 - theta, -(1.0 - theta)],
    })
}

/// Closed-form stability constant: with max{0, gamma} tau <= 1/16 every
/// source-free run satisfies ||u_h^n|| <= C1 ||u_h^0||.
pub fn stability_constant(gamma: f64, t_final: f64) -> f64 {
    let g = gamma.max(0.0);
    ((32.0 * g * t_final).exp() * (24.0 + 128.0 / 7.0 * g)).sqrt()
}

/// Source term of a run; `Zero` skips load assembly entirely and arms the
/// stability assertion.
pub enum Source<'a> {
    Zero,
    Term(&'a dyn Fn(Point2, f64) -> Complex64),
}

impl Source<'_> {
    fn is_zero(&self) -> bool {
        matches!(self, Source::Zero)
    }

    fn load(&self, space: &BrokenSpace, t: f64) -> Option<Vec<Complex64>> {
        match self {
            Source::Zero => None,
            Source::Term(f) => Some(forms::assemble_load(space, f, t)),
        }
    }
}

/// Wall-clock accounting per stage, in seconds.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StageTimings {
    pub setup: f64,
    pub assembly: f64,
    pub solve: f64,
}

/// Result of a time integration.
pub struct RunOutput {
    pub field: FieldCoefficients,
    /// True L2 norms ||u_h^n|| for n = 0..=N.
    pub l2_history: Vec<f64>,
    pub timings: StageTimings,
    /// For source-free runs: max_n ||u^n|| / ||u^0|| against the Theorem-1
    /// constant C1.
    pub stability: Option<StabilityCheck>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityCheck {
    pub c1: f64,
    pub max_ratio: f64,
    pub bound_holds: bool,
}

/// Precomputed operators for a Ginzburg-Landau run on one space.
pub struct Stepper<'a> {
    pub space: &'a BrokenSpace,
    pub params: ModelParams,
    pub scheme: TimeScheme,
    pub mass: SparseComplexMatrix,
    pub stiffness: SparseComplexMatrix,
    pub solver_cfg: SolverConfig,
    block_offsets: Vec<usize>,
    /// Position of each block-diagonal (mass pattern) entry inside the
    /// stiffness CSR values, for sort-free per-step composition.
    block_map: Vec<usize>,
}

impl<'a> Stepper<'a> {
    /// Assemble the time-independent operators (M once, A once).
    pub fn new(
        space: &'a BrokenSpace,
        params: ModelParams,
        scheme: TimeScheme,
        lambda: f64,
        solver_cfg: SolverConfig,
    ) -> Result<Self> {
        let mass = forms::assemble_mass(space)?;
        let stiffness = forms::assemble_sipg(space, lambda)?;
        Stepper::with_operators(space, params, scheme, mass, stiffness, solver_cfg)
    }

    /// Reuse pre-assembled operators (temporal studies run many schemes over
    /// one mesh).
    pub fn with_operators(
        space: &'a BrokenSpace,
        params: ModelParams,
        scheme: TimeScheme,
        mass: SparseComplexMatrix,
        stiffness: SparseComplexMatrix,
        solver_cfg: SolverConfig,
    ) -> Result<Self> {
        if params.gamma > 0.0 && params.gamma * scheme.tau > 1.0 / 16.0 {
            log::warn!(
                "gamma tau = {:.4} exceeds 1/16; the stability bound is not guaranteed",
                params.gamma * scheme.tau
            );
        }
        let nd = space.dofs_per_cell;
        let mut block_map = Vec::with_capacity(space.total_dofs() * nd);
        for c in 0..space.mesh.n_cells() {
            let off = space.cell_offset(c);
            for i in 0..nd {
                let r = off + i;
                let row = &stiffness.col_idx[stiffness.row_ptr[r]..stiffness.row_ptr[r + 1]];
                for j in 0..nd {
                    let col = off + j;
                    let p = row.binary_search(&col).map_err(|_| {
                        Error::geometry(format!(
                            "stiffness pattern misses diagonal block entry ({r}, {col})"
                        ))
                    })?;
                    block_map.push(stiffness.row_ptr[r] + p);
                }
            }
        }
        Ok(Stepper {
            space,
            params,
            scheme,
            mass,
            stiffness,
            solver_cfg,
            block_offsets: space.block_offsets(),
            block_map,
        })
    }

    /// c_stiff A + c_mass M + c_w W without resorting: W is given by its
    /// block values, and the block pattern scatters into the stiffness CSR.
    fn compose(
        &self,
        c_stiff: Complex64,
        c_mass: Complex64,
        c_w: Complex64,
        w_vals: &[f64],
    ) -> SparseComplexMatrix {
        let mut values: Vec<Complex64> =
            self.stiffness.values.iter().map(|&v| c_stiff * v).collect();
        for (k, &p) in self.block_map.iter().enumerate() {
            values[p] += c_mass * self.mass.values[k] + c_w * w_vals[k];
        }
        SparseComplexMatrix {
            n: self.stiffness.n,
            row_ptr: self.stiffness.row_ptr.clone(),
            col_idx: self.stiffness.col_idx.clone(),
            values,
        }
    }

    /// Initial field u_h^0 = R_h u^0 (elliptic projection of the datum).
    pub fn initial_field(
        &self,
        u0: impl Fn(Point2) -> Complex64,
        grad_u0: impl Fn(Point2) -> [Complex64; 2],
    ) -> Result<FieldCoefficients> {
        let pc = BlockJacobi::new(&self.stiffness, &self.block_offsets)?;
        let (field, _) =
            forms::ritz_project(self.space, &self.stiffness, &pc, u0, grad_u0, &self.solver_cfg)?;
        Ok(field)
    }

    /// Solve one linear system with block-ILU(0) preconditioned GMRES,
    /// degrading to block-Jacobi if the factorization hits a singular pivot
    /// and to a dense factorization for small systems if Krylov stalls.
    fn solve_system(
        &self,
        lhs: &SparseComplexMatrix,
        rhs: &[Complex64],
        guess: Option<&[Complex64]>,
    ) -> Result<Vec<Complex64>> {
        let attempt = match BlockIlu0::new(lhs, self.space.dofs_per_cell) {
            Ok(pc) => solver::solve(lhs, &pc, rhs, guess, &self.solver_cfg),
            Err(e) => {
                log::warn!("block-ILU(0) factorization failed ({e}); using block-Jacobi");
                let pc = BlockJacobi::new(lhs, &self.block_offsets)?;
                solver::solve(lhs, &pc, rhs, guess, &self.solver_cfg)
            }
        };
        match attempt {
            Ok((x, _)) => Ok(x),
            Err(err @ Error::SolveFailed { .. }) if lhs.n <= 2000 => {
                log::warn!("krylov solve failed ({err}); retrying densely for n = {}", lhs.n);
                let lu = DenseLu::factor(lhs.to_dense(), lhs.n)?;
                Ok(lu.solve(rhs))
            }
            Err(e) => Err(e),
        }
    }

    /// Backward Euler first step: (1/tau) M u^1 + (nu+i alpha) A u^1
    /// + (kappa+i beta) W_0 u^1 - gamma M u^1 = (1/tau) M u^0 + F(t_1).
    pub fn first_step(&self, u0: &FieldCoefficients, source: &Source) -> Result<FieldCoefficients> {
        let tau = self.scheme.tau;
        let w0 = forms::weighted_mass_block_values(self.space, u0);
        let lhs = self.compose(
            self.params.diffusion(),
            Complex64::new(1.0 / tau - self.params.gamma, 0.0),
            self.params.nonlinearity(),
            &w0,
        );
        let mut rhs = self.mass.matvec_alloc(&u0.values);
        for v in rhs.iter_mut() {
            *v /= tau;
        }
        if let Some(load) = source.load(self.space, tau) {
            for (r, l) in rhs.iter_mut().zip(&load) {
                *r += l;
            }
        }
        let x = self
            .solve_system(&lhs, &rhs, Some(&u0.values))
            .map_err(|e| e.at_step(1))?;
        Ok(FieldCoefficients { values: x, t: tau })
    }

    /// One theta step producing u^n from (u^{n-1}, u^{n-2}), n >= 2.
    pub fn theta_step(
        &self,
        n: usize,
        u_prev1: &FieldCoefficients,
        u_prev2: &FieldCoefficients,
        source: &Source,
    ) -> Result<FieldCoefficients> {
        debug_assert!(n >= 2);
        let tau = self.scheme.tau;
        let theta = self.scheme.theta;
        let st = stencils(theta)?;

        // Extrapolated weight field uhat = (2-theta) u^{n-1} - (1-theta) u^{n-2}.
        let mut uhat = u_prev1.clone();
        for (h, (&p1, &p2)) in uhat
            .values
            .iter_mut()
            .zip(u_prev1.values.iter().zip(&u_prev2.values))
        {
            *h = st.extrapolation[0] * p1 + st.extrapolation[1] * p2;
        }
        let w_vals = forms::weighted_mass_block_values(self.space, &uhat);

        // lhs = (3-2theta)/(2tau) M + (1-theta)[(nu+ia) A + (k+ib) W - g M].
        let avg0 = st.average[0];
        let lhs = self.compose(
            avg0 * self.params.diffusion(),
            Complex64::new(st.derivative[0] / (2.0 * tau) - avg0 * self.params.gamma, 0.0),
            avg0 * self.params.nonlinearity(),
            &w_vals,
        );

        // rhs = (4-4theta)/(2tau) M u1 - (1-2theta)/(2tau) M u2
        //       - theta [(nu+ia) A + (k+ib) W - g M] u1 + F(t_{n-theta}).
        let m_u1 = self.mass.matvec_alloc(&u_prev1.values);
        let m_u2 = self.mass.matvec_alloc(&u_prev2.values);
        let a_u1 = self.stiffness.matvec_alloc(&u_prev1.values);
        let w_u1 = forms::block_diag_matvec(self.space, &w_vals, &u_prev1.values);
        let c1 = -st.derivative[1] / (2.0 * tau);
        let c2 = -st.derivative[2] / (2.0 * tau);
        let (diff, nonl, gamma) = (
            self.params.diffusion(),
            self.params.nonlinearity(),
            self.params.gamma,
        );
        let mut rhs: Vec<Complex64> = (0..self.space.total_dofs())
            .map(|i| {
                let reaction_u1 = diff * a_u1[i] + nonl * w_u1[i] - gamma * m_u1[i];
                m_u1[i] * c1 + m_u2[i] * c2 - reaction_u1 * st.average[1]
            })
            .collect();
        if let Some(load) = source.load(self.space, self.scheme.t_weighted(n)) {
            for (r, l) in rhs.iter_mut().zip(&load) {
                *r += l;
            }
        }
        let x = self
            .solve_system(&lhs, &rhs, Some(&u_prev1.values))
            .map_err(|e| e.at_step(n))?;
        Ok(FieldCoefficients {
            values: x,
            t: n as f64 * tau,
        })
    }

    /// Drive the full integration: elliptic-projection initialization,
    /// backward Euler first step, then theta steps. The L2 norm history has
    /// length N + 1. Source-free runs also report the Theorem-1 stability
    /// check.
    pub fn run(
        &self,
        u0: impl Fn(Point2) -> Complex64,
        grad_u0: impl Fn(Point2) -> [Complex64; 2],
        source: &Source,
    ) -> Result<RunOutput> {
        let t0 = Instant::now();
        let u0 = self.initial_field(&u0, &grad_u0)?;
        let setup = t0.elapsed().as_secs_f64();
        self.run_from(u0, source, setup)
    }

    /// As `run`, but starting from an externally supplied initial field.
    pub fn run_from(
        &self,
        u0: FieldCoefficients,
        source: &Source,
        setup_seconds: f64,
    ) -> Result<RunOutput> {
        let mut timings = StageTimings {
            setup: setup_seconds,
            ..Default::default()
        };
        let mut history = Vec::with_capacity(self.scheme.n_steps + 1);
        history.push(forms::norms(self.space, &u0).l2);

        let t_loop = Instant::now();
        let mut prev2 = u0;
        let mut prev1 = self.first_step(&prev2, source)?;
        history.push(forms::norms(self.space, &prev1).l2);
        for n in 2..=self.scheme.n_steps {
            let next = self.theta_step(n, &prev1, &prev2, source)?;
            history.push(forms::norms(self.space, &next).l2);
            prev2 = prev1;
            prev1 = next;
        }
        timings.solve = t_loop.elapsed().as_secs_f64();

        let stability = if source.is_zero() {
            let c1 = stability_constant(self.params.gamma, self.scheme.t_final());
            let base = history[0].max(f64::MIN_POSITIVE);
            let max_ratio = history.iter().cloned().fold(0.0, f64::max) / base;
            Some(StabilityCheck {
                c1,
                max_ratio,
                bound_holds: max_ratio <= c1,
            })
        } else {
            None
        };
        Ok(RunOutput {
            field: prev1,
            l2_history: history,
            timings,
            stability,
        })
    }
}

/// Emit a norm history as RFC-4180 CSV with columns (n, t, l2_norm).
pub fn history_to_csv(history: &[f64], tau: f64) -> String {
    let mut out = String::from("n,t,l2_norm\r\n");
    for (n, v) in history.iter().enumerate() {
        out.push_str(&format!("{},{:.12},{:.12e}\r\n", n, n as f64 * tau, v));
    }
    out
}
