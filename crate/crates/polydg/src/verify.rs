//! Verification harness: manufactured solutions with exact sources, error
//! norms at final time, convergence-order tables, stability runs and the
//! executable inequality suites.

use crate::config::{MeshFamily, RunConfig};
use crate::error::{Error, Result};
use crate::forms::{self, ModelParams};
use crate::geometry::Point2;
use crate::space::{build_space, BrokenSpace, FieldCoefficients};
use crate::stepper::{Source, StabilityCheck, Stepper, TimeScheme};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::Serialize;

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Manufactured test cases. The source is assembled from the model equation
/// u_t - (nu + i alpha) Lap u + (kappa + i beta) |u|^2 u - gamma u = f.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedCase {
    /// u = e^{it} sin(x) sin(y) (1-x)(1-y) on the unit square.
    Example1,
    /// u = i sin(x^2 + y^2 - 1) e^{-t} on the unit disk.
    Example2,
}

impl ManufacturedCase {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(ManufacturedCase::Example1),
            2 => Ok(ManufacturedCase::Example2),
            other => Err(Error::invalid(format!("unknown example id {other}"))),
        }
    }

    /// Default mesh family of the case's domain.
    pub fn default_family(&self) -> MeshFamily {
        match self {
            ManufacturedCase::Example1 => MeshFamily::Nonconvex,
            ManufacturedCase::Example2 => MeshFamily::Disk,
        }
    }

    pub fn exact(&self, p: Point2, t: f64) -> Complex64 {
        match self {
            ManufacturedCase::Example1 => {
                let g = p.x.sin() * p.y.sin() * (1.0 - p.x) * (1.0 - p.y);
                c64(t.cos(), t.sin()) * g
            }
            ManufacturedCase::Example2 => {
                let w = p.x * p.x + p.y * p.y - 1.0;
                c64(0.0, w.sin() * (-t).exp())
            }
        }
    }

    pub fn grad(&self, p: Point2, t: f64) -> [Complex64; 2] {
        match self {
            ManufacturedCase::Example1 => {
                let px = p.x.sin() * (1.0 - p.x);
                let py = p.y.sin() * (1.0 - p.y);
                let dpx = p.x.cos() * (1.0 - p.x) - p.x.sin();
                let dpy = p.y.cos() * (1.0 - p.y) - p.y.sin();
                let phase = c64(t.cos(), t.sin());
                [phase * (dpx * py), phase * (px * dpy)]
            }
            ManufacturedCase::Example2 => {
                let w = p.x * p.x + p.y * p.y - 1.0;
                let s = c64(0.0, w.cos() * (-t).exp());
                [s * (2.0 * p.x), s * (2.0 * p.y)]
            }
        }
    }

    fn laplacian(&self, p: Point2, t: f64) -> Complex64 {
        match self {
            ManufacturedCase::Example1 => {
                let px = p.x.sin() * (1.0 - p.x);
                let py = p.y.sin() * (1.0 - p.y);
                let ddpx = -p.x.sin() * (1.0 - p.x) - 2.0 * p.x.cos();
                let ddpy = -p.y.sin() * (1.0 - p.y) - 2.0 * p.y.cos();
                c64(t.cos(), t.sin()) * (ddpx * py + px * ddpy)
            }
            ManufacturedCase::Example2 => {
                let r2 = p.x * p.x + p.y * p.y;
                let w = r2 - 1.0;
                c64(0.0, (-t).exp() * (4.0 * w.cos() - 4.0 * r2 * w.sin()))
            }
        }
    }

    fn time_derivative(&self, p: Point2, t: f64) -> Complex64 {
        match self {
            ManufacturedCase::Example1 => c64(0.0, 1.0) * self.exact(p, t),
            ManufacturedCase::Example2 => -self.exact(p, t),
        }
    }

    pub fn source(&self, p: Point2, t: f64, params: &ModelParams) -> Complex64 {
        let u = self.exact(p, t);
        self.time_derivative(p, t) - params.diffusion() * self.laplacian(p, t)
            + params.nonlinearity() * u.norm_sqr() * u
            - params.gamma * u
    }

    /// Sample a point inside the case's domain.
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Point2 {
        match self {
            ManufacturedCase::Example1 => Point2::new(rng.gen(), rng.gen()),
            ManufacturedCase::Example2 => {
                let r = 0.9 * rng.gen::<f64>().sqrt();
                let a = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                Point2::new(r * a.cos(), r * a.sin())
            }
        }
    }
}

/// Finite-difference consistency check of the closed-form source: central
/// differences for u_t and the five-point stencil for the Laplacian must
/// reproduce f at random points. Returns the largest deviation.
pub fn source_consistency_error(
    case: ManufacturedCase,
    params: &ModelParams,
    seed: u64,
    n_points: usize,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1e-4;
    let dx = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..n_points {
        let p = case.sample_point(&mut rng);
        let t = 0.05 + 0.9 * rng.gen::<f64>();
        let ut = (case.exact(p, t + dt) - case.exact(p, t - dt)) / (2.0 * dt);
        let lap = (case.exact(Point2::new(p.x + dx, p.y), t)
            + case.exact(Point2::new(p.x - dx, p.y), t)
            + case.exact(Point2::new(p.x, p.y + dx), t)
            + case.exact(Point2::new(p.x, p.y - dx), t)
            - 4.0 * case.exact(p, t))
            / (dx * dx);
        let u = case.exact(p, t);
        let f_fd =
            ut - params.diffusion() * lap + params.nonlinearity() * u.norm_sqr() * u
                - params.gamma * u;
        worst = worst.max((f_fd - case.source(p, t, params)).norm());
    }
    worst
}

/// L2 and broken H1 errors of a discrete field against the exact solution at
/// time `t`, integrated cellwise over the mesh (the polygonal domain).
pub fn final_errors(
    space: &BrokenSpace,
    field: &FieldCoefficients,
    case: ManufacturedCase,
    t: f64,
) -> (f64, f64) {
    let nd = space.dofs_per_cell;
    let mut l2_sq = 0.0;
    let mut h1_sq = 0.0;
    for c in 0..space.mesh.n_cells() {
        let cq = &space.cell_quads[c];
        let off = space.cell_offset(c);
        for (q, &p) in cq.points.iter().enumerate() {
            let mut v = c64(0.0, 0.0);
            let mut gx = c64(0.0, 0.0);
            let mut gy = c64(0.0, 0.0);
            for i in 0..nd {
                let ci = field.values[off + i];
                v += ci * cq.phi[q * nd + i];
                gx += ci * cq.grad[q * nd + i][0];
                gy += ci * cq.grad[q * nd + i][1];
            }
            let ue = case.exact(p, t);
            let ge = case.grad(p, t);
            let w = cq.weights[q];
            l2_sq += w * (v - ue).norm_sqr();
            h1_sq += w * ((gx - ge[0]).norm_sqr() + (gy - ge[1]).norm_sqr());
        }
    }
    (l2_sq.sqrt(), h1_sq.sqrt())
}

/// One row of a convergence table.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub level: f64,
    pub l2_error: f64,
    pub l2_order: Option<f64>,
    pub h1_error: f64,
    pub h1_order: Option<f64>,
}

/// Errors and log2 orders against a refinement parameter (h or tau).
#[derive(Debug, Clone, Default, Serialize)]
pub struct ConvergenceTable {
    pub parameter: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn new(parameter: &str) -> Self {
        ConvergenceTable {
            parameter: parameter.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, level: f64, l2_error: f64, h1_error: f64) {
        let order = |prev: &ConvergenceRow, e_prev: f64, e: f64| {
            ((e_prev / e).ln() / (prev.level / level).ln()).into()
        };
        let (l2_order, h1_order) = match self.rows.last() {
            Some(prev) => (
                order(prev, prev.l2_error, l2_error),
                order(prev, prev.h1_error, h1_error),
            ),
            None => (None, None),
        };
        self.rows.push(ConvergenceRow {
            level,
            l2_error,
            l2_order,
            h1_error,
            h1_order,
        });
    }

    /// Orders between the two finest rows.
    pub fn finest_pair_orders(&self) -> Option<(f64, f64)> {
        let last = self.rows.last()?;
        Some((last.l2_order?, last.h1_order?))
    }

    /// Errors strictly decrease down the table.
    pub fn is_monotone(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].l2_error < w[0].l2_error && w[1].h1_error < w[0].h1_error)
    }

    /// RFC-4180 CSV (CRLF line endings).
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},l2_error,l2_order,h1_error,h1_order\r\n", self.parameter);
        for r in &self.rows {
            let fmt = |o: Option<f64>| o.map(|v| format!("{v:.4}")).unwrap_or_default();
            out.push_str(&format!(
                "{:.6},{:.6e},{},{:.6e},{}\r\n",
                r.level,
                r.l2_error,
                fmt(r.l2_order),
                r.h1_error,
                fmt(r.h1_order)
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "| {} | L2 error | order | H1 error | order |\n|---|---|---|---|---|\n",
            self.parameter
        );
        for r in &self.rows {
            let fmt = |o: Option<f64>| o.map(|v| format!("{v:.4}")).unwrap_or_else(|| "--".into());
            out.push_str(&format!(
                "| {:.6} | {:.5e} | {} | {:.5e} | {} |\n",
                r.level,
                r.l2_error,
                fmt(r.l2_order),
                r.h1_error,
                fmt(r.h1_order)
            ));
        }
        out
    }
}

/// Result of the tau-independence gate on the finest level.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TauGate {
    pub relative_change: f64,
    pub passed: bool,
}

/// Outcome of a convergence study with its gates.
#[derive(Debug, Clone, Serialize)]
pub struct StudyOutcome {
    pub table: ConvergenceTable,
    pub tau: f64,
    pub monotone: bool,
    pub tau_gate: Option<TauGate>,
    pub l2_gate: Option<bool>,
    pub h1_gate: Option<bool>,
    pub passed: bool,
}

impl StudyOutcome {
    fn evaluate(table: ConvergenceTable, tau: f64, cfg: &RunConfig, tau_gate: Option<TauGate>) -> Self {
        let monotone = table.is_monotone();
        if !monotone {
            log::warn!("convergence table is not monotone:\n{}", table.to_markdown());
        }
        let pair = table.finest_pair_orders();
        let in_range = |range: Option<[f64; 2]>, value: Option<f64>| -> Option<bool> {
            range.map(|[lo, hi]| value.map(|v| v >= lo && v <= hi).unwrap_or(false))
        };
        let l2_gate = in_range(cfg.l2_order_range, pair.map(|p| p.0));
        let h1_gate = in_range(cfg.h1_order_range, pair.map(|p| p.1));
        let passed = l2_gate.unwrap_or(true)
            && h1_gate.unwrap_or(true)
            && tau_gate.map(|g| g.passed).unwrap_or(true);
        StudyOutcome {
            table,
            tau,
            monotone,
            tau_gate,
            l2_gate,
            h1_gate,
            passed,
        }
    }
}

/// The spatial-study default step: tau = h_finest^{(k+1)/2} / 4, small enough
/// that the O(tau^2) error sits below the O(h^{k+1}) spatial error.
pub fn default_spatial_tau(h_finest: f64, k: usize) -> f64 {
    h_finest.powf((k as f64 + 1.0) / 2.0) / 4.0
}

fn check_source_consistency(case: ManufacturedCase, params: &ModelParams, seed: u64) -> Result<()> {
    let err = source_consistency_error(case, params, seed, 100);
    if err > 1e-5 {
        return Err(Error::Config(format!(
            "manufactured source failed its finite-difference consistency check: {err:.3e}"
        )));
    }
    Ok(())
}

/// Run one level: generate the mesh, integrate to T and measure errors.
fn run_level(
    case: ManufacturedCase,
    cfg: &RunConfig,
    h: f64,
    tau: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    let mesh = cfg.family.generate_at(h, cfg.lloyd_iters, cfg.seed)?;
    let space = build_space(mesh, cfg.k)?;
    let n_steps = (cfg.t_final / tau).round().max(1.0) as usize;
    let scheme = TimeScheme::new(cfg.theta, cfg.t_final / n_steps as f64, n_steps)?;
    let stepper = Stepper::new(
        &space,
        cfg.params,
        scheme,
        cfg.resolved_lambda(),
        cfg.solver_config(),
    )?;
    let params = cfg.params;
    let source_fn = move |p: Point2, t: f64| case.source(p, t, &params);
    let source = if cfg.zero_source {
        Source::Zero
    } else {
        Source::Term(&source_fn)
    };
    let out = stepper.run(|p| case.exact(p, 0.0), |p| case.grad(p, 0.0), &source)?;
    let (l2, h1) = final_errors(&space, &out.field, case, scheme.t_final());
    Ok((l2, h1, out.l2_history))
}

/// Spatial convergence study over cfg.h_levels with a fixed fine time step.
pub fn spatial_convergence(cfg: &RunConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let case = ManufacturedCase::from_id(cfg.example)?;
    check_source_consistency(case, &cfg.params, cfg.seed)?;
    if cfg.h_levels.len() < 2 {
        return Err(Error::Config("spatial study needs at least two h levels".into()));
    }
    let mut levels = cfg.h_levels.clone();
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let h_finest = *levels.last().unwrap();
    let tau = cfg.tau.unwrap_or_else(|| default_spatial_tau(h_finest, cfg.k));

    let mut table = ConvergenceTable::new("h");
    let mut finest_errors = (0.0, 0.0);
    for &h in &levels {
        let (l2, h1, _) = run_level(case, cfg, h, tau)?;
        table.push(h, l2, h1);
        finest_errors = (l2, h1);
    }

    let tau_gate = if cfg.check_tau_gate {
        let (l2_half, _, _) = run_level(case, cfg, h_finest, tau / 2.0)?;
        let relative_change = (l2_half - finest_errors.0).abs() / finest_errors.0;
        Some(TauGate {
            relative_change,
            passed: relative_change < 0.05,
        })
    } else {
        None
    };
    Ok(StudyOutcome::evaluate(table, tau, cfg, tau_gate))
}

/// Temporal convergence study on a fixed mesh over cfg.tau_levels. The
/// initial field is computed once and shared by all steps sizes.
pub fn temporal_convergence(cfg: &RunConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let case = ManufacturedCase::from_id(cfg.example)?;
    check_source_consistency(case, &cfg.params, cfg.seed)?;
    let h = cfg
        .h
        .ok_or_else(|| Error::Config("temporal study needs a mesh size h".into()))?;
    if cfg.tau_levels.len() < 2 {
        log::warn!("temporal study with fewer than two tau levels produces no orders");
    }
    let mut levels = cfg.tau_levels.clone();
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));

    let mesh = cfg.family.generate_at(h, cfg.lloyd_iters, cfg.seed)?;
    let space = build_space(mesh, cfg.k)?;
    let mass = forms::assemble_mass(&space)?;
    let stiffness = forms::assemble_sipg(&space, cfg.resolved_lambda())?;
    let params = cfg.params;
    let source_fn = move |p: Point2, t: f64| case.source(p, t, &params);

    // The elliptic projection is tau-independent; reuse it.
    let scheme0 = TimeScheme::new(cfg.theta, levels[0], (cfg.t_final / levels[0]).round() as usize)?;
    let stepper0 = Stepper::with_operators(
        &space,
        cfg.params,
        scheme0,
        mass.clone(),
        stiffness.clone(),
        cfg.solver_config(),
    )?;
    let u0 = stepper0.initial_field(|p| case.exact(p, 0.0), |p| case.grad(p, 0.0))?;

    let mut table = ConvergenceTable::new("tau");
    for &tau in &levels {
        let n_steps = (cfg.t_final / tau).round().max(1.0) as usize;
        let scheme = TimeScheme::new(cfg.theta, cfg.t_final / n_steps as f64, n_steps)?;
        let stepper = Stepper::with_operators(
            &space,
            cfg.params,
            scheme,
            mass.clone(),
            stiffness.clone(),
            cfg.solver_config(),
        )?;
        let out = stepper.run_from(u0.clone(), &Source::Term(&source_fn), 0.0)?;
        let (l2, h1) = final_errors(&space, &out.field, case, scheme.t_final());
        table.push(tau, l2, h1);
    }
    Ok(StudyOutcome::evaluate(table, *levels.last().unwrap(), cfg, None))
}

/// Source-free stability run: L2 history against the Theorem-1 bound plus a
/// qualitative decay check on the tail.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityOutcome {
    pub history: Vec<f64>,
    pub tau: f64,
    pub check: StabilityCheck,
    pub eventually_decreasing: bool,
    pub passed: bool,
}

pub fn run_stability(cfg: &RunConfig) -> Result<StabilityOutcome> {
    cfg.validate()?;
    let case = ManufacturedCase::from_id(cfg.example)?;
    let h = cfg.h.unwrap_or(1.0 / 30.0);
    let tau = cfg.tau.unwrap_or(0.01);
    let mesh = cfg.family.generate_at(h, cfg.lloyd_iters, cfg.seed)?;
    let space = build_space(mesh, cfg.k)?;
    let n_steps = (cfg.t_final / tau).round().max(1.0) as usize;
    let scheme = TimeScheme::new(cfg.theta, cfg.t_final / n_steps as f64, n_steps)?;
    let stepper = Stepper::new(
        &space,
        cfg.params,
        scheme,
        cfg.resolved_lambda(),
        cfg.solver_config(),
    )?;
    let out = stepper.run(|p| case.exact(p, 0.0), |p| case.grad(p, 0.0), &Source::Zero)?;
    let check = out.stability.expect("source-free run reports stability");

    let hist = &out.l2_history;
    let peak = hist
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let tail_start = hist.len() * 4 / 5;
    let tail_monotone = hist[tail_start..]
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let eventually_decreasing = peak < hist.len() / 2 && tail_monotone;
    Ok(StabilityOutcome {
        history: out.l2_history.clone(),
        tau: scheme.tau,
        check,
        eventually_decreasing,
        passed: check.bound_holds && eventually_decreasing,
    })
}

/// Fitted least-squares slope of log2(error) against refinement level for
/// levels halving each step; equals the mean of the successive orders.
pub fn fitted_order(errors: &[f64]) -> f64 {
    assert!(errors.len() >= 2);
    let n = errors.len() as f64;
    (errors[0] / errors[errors.len() - 1]).log2() / (n - 1.0)
}

/// Projection-order study for a case's initial datum: fitted orders of the
/// L2 projector and of the elliptic projection over halving mesh levels.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionStudy {
    pub l2_projector_order: f64,
    pub ritz_order: f64,
}

pub fn projection_orders(cfg: &RunConfig) -> Result<ProjectionStudy> {
    cfg.validate()?;
    let case = ManufacturedCase::from_id(cfg.example)?;
    if cfg.h_levels.len() < 2 {
        return Err(Error::Config("projection study needs at least two levels".into()));
    }
    let mut levels = cfg.h_levels.clone();
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut proj_errors = Vec::new();
    let mut ritz_errors = Vec::new();
    for &h in &levels {
        let mesh = cfg.family.generate_at(h, cfg.lloyd_iters, cfg.seed)?;
        let space = build_space(mesh, cfg.k)?;
        let proj = space.l2_project(|p| case.exact(p, 0.0));
        let (e_proj, _) = final_errors(&space, &proj, case, 0.0);
        proj_errors.push(e_proj);

        let a = forms::assemble_sipg(&space, cfg.resolved_lambda())?;
        let pc = crate::solver::BlockJacobi::new(&a, &space.block_offsets())?;
        let (ritz, _) = forms::ritz_project(
            &space,
            &a,
            &pc,
            |p| case.exact(p, 0.0),
            |p| case.grad(p, 0.0),
            &cfg.solver_config(),
        )?;
        let (e_ritz, _) = final_errors(&space, &ritz, case, 0.0);
        ritz_errors.push(e_ritz);
    }
    Ok(ProjectionStudy {
        l2_projector_order: fitted_order(&proj_errors),
        ritz_order: fitted_order(&ritz_errors),
    })
}

/// Report from the random-trial inequality suites.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaSuiteReport {
    pub trials: usize,
    pub energy_inequality_failures: usize,
    pub transfer_inequality_failures: usize,
    /// Per (family, k): spread of the max DG-inverse ratio across levels.
    pub inverse_constant_spreads: Vec<InverseConstantSpread>,
    pub negative_control_detects: bool,
    pub counterexamples: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InverseConstantSpread {
    pub family: MeshFamily,
    pub k: usize,
    pub maxima: Vec<f64>,
    pub relative_spread: f64,
}

fn random_sequence(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<Vec<Complex64>> {
    (0..len)
        .map(|_| {
            (0..dim)
                .map(|_| c64(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0))
                .collect()
        })
        .collect()
}

fn seq_norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

fn seq_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(&x, &y)| x.conj() * y).sum()
}

/// Energy functional E^n of the three-level scheme.
fn energy_functional(theta: f64, v_n: &[Complex64], v_nm1: &[Complex64]) -> f64 {
    let diff_sq: f64 = v_n
        .iter()
        .zip(v_nm1)
        .map(|(&a, &b)| (a - b).norm_sqr())
        .sum();
    (3.0 - 2.0 * theta) * seq_norm_sq(v_n) - (1.0 - 2.0 * theta) * seq_norm_sq(v_nm1)
        + (2.0 - theta) * (1.0 - 2.0 * theta) * diff_sq
}

/// Check the discrete energy inequality on one random sequence; returns a
/// counterexample description on failure. `flip` inverts the inequality for
/// the suite's negative control.
fn energy_inequality_violation(
    vs: &[Vec<Complex64>],
    theta: f64,
    tau: f64,
    flip: bool,
) -> Option<String> {
    let slack = 1e-10;
    for n in 2..vs.len() {
        let dim = vs[0].len();
        let mut d_tau = vec![c64(0.0, 0.0); dim];
        let mut v_theta = vec![c64(0.0, 0.0); dim];
        for i in 0..dim {
            d_tau[i] = ((3.0 - 2.0 * theta) * vs[n][i] - (4.0 - 4.0 * theta) * vs[n - 1][i]
                + (1.0 - 2.0 * theta) * vs[n - 2][i])
                / (2.0 * tau);
            v_theta[i] = (1.0 - theta) * vs[n][i] + theta * vs[n - 1][i];
        }
        let lhs = seq_inner(&d_tau, &v_theta).re;
        let e_n = energy_functional(theta, &vs[n], &vs[n - 1]);
        let e_nm1 = energy_functional(theta, &vs[n - 1], &vs[n - 2]);
        let rhs = (e_n - e_nm1) / (4.0 * tau);
        let scale = 1.0 + lhs.abs() + rhs.abs();
        let holds = if flip {
            lhs <= rhs - slack * scale
        } else {
            lhs >= rhs - slack * scale
        };
        if !holds {
            return Some(format!(
                "energy inequality failed at n={n}, theta={theta:.6}, tau={tau:.6}: \
                 Re(D_tau v, v_theta) = {lhs:.12e} vs (E^n - E^(n-1))/(4 tau) = {rhs:.12e}"
            ));
        }
        let floor = seq_norm_sq(&vs[n]) / (1.0 - theta);
        if e_n < floor - slack * (1.0 + e_n.abs() + floor) {
            return Some(format!(
                "energy floor failed at n={n}, theta={theta:.6}: E^n = {e_n:.12e} < {floor:.12e}"
            ));
        }
    }
    None
}

/// Check the norm-transfer inequality on one random sequence.
fn transfer_inequality_violation(vs: &[Vec<Complex64>], theta: f64) -> Option<String> {
    let slack = 1e-10;
    let dim = vs[0].len();
    for n in 1..vs.len() {
        let mut sum = 0.0;
        for m in 1..=n {
            let mut v_theta = vec![c64(0.0, 0.0); dim];
            for i in 0..dim {
                v_theta[i] = (1.0 - theta) * vs[m][i] + theta * vs[m - 1][i];
            }
            sum += seq_norm_sq(&v_theta).sqrt();
        }
        let lhs = seq_norm_sq(&vs[n]).sqrt();
        let rhs = (1.0 + 2.0 * theta) * sum + 2.0 * theta * seq_norm_sq(&vs[0]).sqrt();
        if lhs > rhs + slack * (1.0 + lhs + rhs) {
            return Some(format!(
                "transfer inequality failed at n={n}, theta={theta:.6}: \
                 ||v^n|| = {lhs:.12e} > {rhs:.12e}"
            ));
        }
    }
    None
}

/// Execute the three inequality oracles: the discrete energy inequality and
/// the norm-transfer inequality on random sequences, and the boundedness of
/// the DG inverse-inequality constant across refinements. Includes a
/// negative control that must detect a deliberately flipped inequality.
pub fn lemma_property_suite(seed: u64, trials: usize) -> Result<LemmaSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut energy_failures = 0;
    let mut transfer_failures = 0;
    let mut counterexamples = Vec::new();

    for _ in 0..trials {
        let theta = 0.5 * rng.gen::<f64>();
        let tau = 0.01 + rng.gen::<f64>();
        let vs = random_sequence(&mut rng, 6, 4);
        if let Some(cex) = energy_inequality_violation(&vs, theta, tau, false) {
            energy_failures += 1;
            if counterexamples.len() < 5 {
                counterexamples.push(cex);
            }
        }
        if let Some(cex) = transfer_inequality_violation(&vs, theta) {
            transfer_failures += 1;
            if counterexamples.len() < 5 {
                counterexamples.push(cex);
            }
        }
    }

    // Negative control: the flipped energy inequality must fail somewhere.
    let mut control_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut negative_control_detects = false;
    for _ in 0..64 {
        let theta = 0.5 * control_rng.gen::<f64>();
        let tau = 0.01 + control_rng.gen::<f64>();
        let vs = random_sequence(&mut control_rng, 6, 4);
        if energy_inequality_violation(&vs, theta, tau, true).is_some() {
            negative_control_detects = true;
            break;
        }
    }

    // DG inverse-inequality constant across three refinements.
    let mut spreads = Vec::new();
    for family in [MeshFamily::Nonconvex, MeshFamily::Mixed] {
        for k in [1usize, 2] {
            let mut maxima = Vec::new();
            for h in [0.5, 0.25, 0.125] {
                let mesh = family.generate_at(h, 3, seed)?;
                let space = build_space(mesh, k)?;
                let mut worst = 0.0f64;
                for _ in 0..100 {
                    let v = FieldCoefficients {
                        values: (0..space.total_dofs())
                            .map(|_| c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                            .collect(),
                        t: 0.0,
                    };
                    let n = forms::norms(&space, &v);
                    worst = worst.max(n.dg * space.mesh.h / n.l2);
                }
                maxima.push(worst);
            }
            let lo = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = maxima.iter().cloned().fold(0.0f64, f64::max);
            spreads.push(InverseConstantSpread {
                family,
                k,
                maxima,
                relative_spread: (hi - lo) / lo,
            });
        }
    }

    let passed = energy_failures == 0
        && transfer_failures == 0
        && negative_control_detects
        && spreads.iter().all(|s| s.relative_spread < 0.15);
    Ok(LemmaSuiteReport {
        trials,
        energy_inequality_failures: energy_failures,
        transfer_inequality_failures: transfer_failures,
        inverse_constant_spreads: spreads,
        negative_control_detects,
        counterexamples,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_closed_forms() {
        let case = ManufacturedCase::Example1;
        // At t = 0, x = (1/2, 1/2): u = sin(1/2)^2 * 1/4, real.
        let u = case.exact(Point2::new(0.5, 0.5), 0.0);
        let expect = 0.5f64.sin().powi(2) * 0.25;
        assert!((u - c64(expect, 0.0)).norm() < 1e-15);
        // Zero trace on the square boundary.
        for p in [
            Point2::new(0.0, 0.3),
            Point2::new(1.0, 0.7),
            Point2::new(0.4, 0.0),
            Point2::new(0.9, 1.0),
        ] {
            assert!(case.exact(p, 0.37).norm() < 1e-15);
        }
    }

    #[test]
    fn example2_vanishes_on_unit_circle() {
        let case = ManufacturedCase::Example2;
        for t in [0.0, 0.5, 1.0] {
            for a in [0.1f64, 1.7, 3.0] {
                let p = Point2::new(a.cos(), a.sin());
                assert!(case.exact(p, t).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn sources_pass_finite_difference_check() {
        let params = ModelParams::default();
        for case in [ManufacturedCase::Example1, ManufacturedCase::Example2] {
            let err = source_consistency_error(case, &params, 42, 100);
            assert!(err < 1e-5, "{case:?}: {err:.3e}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d = 1e-6;
        for case in [ManufacturedCase::Example1, ManufacturedCase::Example2] {
            let p = Point2::new(0.31, 0.22);
            let t = 0.63;
            let g = case.grad(p, t);
            let gx = (case.exact(Point2::new(p.x + d, p.y), t)
                - case.exact(Point2::new(p.x - d, p.y), t))
                / (2.0 * d);
            let gy = (case.exact(Point2::new(p.x, p.y + d), t)
                - case.exact(Point2::new(p.x, p.y - d), t))
                / (2.0 * d);
            assert!((g[0] - gx).norm() < 1e-8);
            assert!((g[1] - gy).norm() < 1e-8);
        }
    }

    #[test]
    fn order_computation_is_exact_on_synthetic_errors() {
        // e(h) = c h^p gives orders exactly p.
        let mut table = ConvergenceTable::new("h");
        let (c, p) = (3.7, 2.5);
        for i in 0..4 {
            let h = 0.5f64.powi(i);
            table.push(h, c * h.powf(p), 2.0 * c * h.powf(p - 1.0));
        }
        for row in &table.rows[1..] {
            assert!((row.l2_order.unwrap() - p).abs() < 1e-12);
            assert!((row.h1_order.unwrap() - (p - 1.0)).abs() < 1e-12);
        }
        assert!(table.is_monotone());
    }

    #[test]
    fn fitted_order_matches_synthetic_decay() {
        let errs: Vec<f64> = (0..4).map(|i| 5.0 * 0.5f64.powi(3 * i)).collect();
        assert!((fitted_order(&errs) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_and_markdown_have_expected_shape() {
        let mut table = ConvergenceTable::new("h");
        table.push(0.5, 1e-2, 1e-1);
        table.push(0.25, 2.5e-3, 5e-2);
        let csv = table.to_csv();
        assert!(csv.starts_with("h,l2_error,l2_order,h1_error,h1_order\r\n"));
        assert_eq!(csv.matches("\r\n").count(), 3);
        let md = table.to_markdown();
        assert!(md.contains("| 0.250000 |"));
        assert!(md.contains("2.0000"));
    }

    #[test]
    fn lemma_suite_passes_and_detects_flipped_inequality() {
        let report = lemma_property_suite(42, 200).unwrap();
        assert_eq!(report.energy_inequality_failures, 0, "{:?}", report.counterexamples);
        assert_eq!(report.transfer_inequality_failures, 0, "{:?}", report.counterexamples);
        assert!(report.negative_control_detects);
        for s in &report.inverse_constant_spreads {
            assert!(
                s.relative_spread < 0.15,
                "family {:?} k={} spread {:?}",
                s.family,
                s.k,
                s.maxima
            );
        }
        assert!(report.passed);
    }

    #[test]
    fn energy_inequality_theta_half_special_case() {
        // At theta = 1/2 the (1-2theta) terms vanish: E^n = 2 ||v^n||^2.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vs = random_sequence(&mut rng, 4, 3);
        let e = energy_functional(0.5, &vs[1], &vs[0]);
        assert!((e - 2.0 * seq_norm_sq(&vs[1])).abs() < 1e-12);
        assert!(energy_inequality_violation(&vs, 0.5, 0.3, false).is_none());
    }
}
