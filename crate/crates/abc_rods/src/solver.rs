//! Global assembly and nonlinear solution: Newton-Raphson with per-iteration
//! increment capping and a penetration guard, quasi-static load stepping and
//! generalized-alpha dynamics with adaptive step halving.

use crate::contact::abc::{evaluate_pair, ContactForceSample, Formulation, PairConfig, PairWarmStart};
use crate::closest_point::ProjectionParams;
use crate::element::{self, ElementLoad};
use crate::error::{Error, Result};
use crate::geometry::{BeamSection, ElementDofVector};
use crate::search::{find_candidates, SearchConfig};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;

pub const DOFS_PER_NODE: usize = 6;

#[derive(Debug, Clone)]
pub struct MeshElement {
    pub nodes: [usize; 2],
    /// Physical fiber the element belongs to; used for slave ordering.
    pub fiber: usize,
    pub section: usize,
    pub l0: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub n_nodes: usize,
    pub elements: Vec<MeshElement>,
    pub sections: Vec<BeamSection>,
    /// Reference dof values (positions and tangents), 6 per node.
    pub initial: DVector<f64>,
}

impl Mesh {
    pub fn n_dofs(&self) -> usize {
        DOFS_PER_NODE * self.n_nodes
    }

    pub fn element_dofs(&self, d: &DVector<f64>, k: usize) -> Result<ElementDofVector> {
        let el = &self.elements[k];
        let mut dofs = crate::ElemVector::zeros();
        for (slot, &node) in el.nodes.iter().enumerate() {
            for c in 0..DOFS_PER_NODE {
                dofs[DOFS_PER_NODE * slot + c] = d[DOFS_PER_NODE * node + c];
            }
        }
        ElementDofVector::new(dofs, el.l0, 0.0)
    }

    pub fn shares_node(&self, i: usize, j: usize) -> bool {
        let a = &self.elements[i].nodes;
        let b = &self.elements[j].nodes;
        a.iter().any(|n| b.contains(n))
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.sections[self.elements[k].section].radius
    }

    pub fn min_radius(&self) -> f64 {
        self.sections
            .iter()
            .map(|s| s.radius)
            .fold(f64::INFINITY, f64::min)
    }

    fn scatter(&self, k: usize, local: &crate::ElemVector, out: &mut DVector<f64>) {
        let el = &self.elements[k];
        for (slot, &node) in el.nodes.iter().enumerate() {
            for c in 0..DOFS_PER_NODE {
                out[DOFS_PER_NODE * node + c] += local[DOFS_PER_NODE * slot + c];
            }
        }
    }

    fn scatter_matrix(&self, k: usize, local: &crate::ElemMatrix, out: &mut DMatrix<f64>) {
        let el = &self.elements[k];
        for (si, &ni) in el.nodes.iter().enumerate() {
            for (sj, &nj) in el.nodes.iter().enumerate() {
                for a in 0..DOFS_PER_NODE {
                    for b in 0..DOFS_PER_NODE {
                        out[(DOFS_PER_NODE * ni + a, DOFS_PER_NODE * nj + b)] +=
                            local[(DOFS_PER_NODE * si + a, DOFS_PER_NODE * sj + b)];
                    }
                }
            }
        }
    }

    fn scatter_pair(&self, i: usize, j: usize, r: &crate::PairVector, out: &mut DVector<f64>) {
        for (slot, &node) in self.elements[i]
            .nodes
            .iter()
            .chain(self.elements[j].nodes.iter())
            .enumerate()
        {
            for c in 0..DOFS_PER_NODE {
                out[DOFS_PER_NODE * node + c] += r[DOFS_PER_NODE * slot + c];
            }
        }
    }

    fn scatter_pair_matrix(
        &self,
        i: usize,
        j: usize,
        k: &crate::PairMatrix,
        out: &mut DMatrix<f64>,
    ) {
        let nodes: Vec<usize> = self.elements[i]
            .nodes
            .iter()
            .chain(self.elements[j].nodes.iter())
            .copied()
            .collect();
        for (si, &ni) in nodes.iter().enumerate() {
            for (sj, &nj) in nodes.iter().enumerate() {
                for a in 0..DOFS_PER_NODE {
                    for b in 0..DOFS_PER_NODE {
                        out[(DOFS_PER_NODE * ni + a, DOFS_PER_NODE * nj + b)] +=
                            k[(DOFS_PER_NODE * si + a, DOFS_PER_NODE * sj + b)];
                    }
                }
            }
        }
    }
}

/// Consistent global mass matrix assembled on the reference configuration.
pub fn global_mass(mesh: &Mesh) -> Result<DMatrix<f64>> {
    let n = mesh.n_dofs();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..mesh.elements.len() {
        let e = mesh.element_dofs(&mesh.initial, k)?;
        let local = element::mass_matrix(&e, &mesh.sections[mesh.elements[k].section]);
        mesh.scatter_matrix(k, &local, &mut m);
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct ContactSettings {
    pub pair: PairConfig,
    pub search: SearchConfig,
}

/// Warm-start store living across Newton iterations and steps.
#[derive(Debug, Default)]
pub struct ContactContext {
    warm: HashMap<(usize, usize), PairWarmStart>,
}

/// Per-assembly contact bookkeeping for diagnostics and the guard.
#[derive(Debug, Clone)]
pub struct ContactSummary {
    pub potential: f64,
    pub n_point: usize,
    pub n_line_gp: usize,
    pub n_endpoint: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub min_gap: f64,
    pub forces: Vec<ContactForceSample>,
}

impl ContactSummary {
    fn empty() -> Self {
        Self {
            potential: 0.0,
            n_point: 0,
            n_line_gp: 0,
            n_endpoint: 0,
            alpha_min: f64::INFINITY,
            alpha_max: f64::NEG_INFINITY,
            min_gap: f64::INFINITY,
            forces: Vec::new(),
        }
    }
}

/// Contact residual, tangent and summary at the given configuration.
pub fn assemble_contact(
    mesh: &Mesh,
    d: &DVector<f64>,
    settings: &ContactSettings,
    ctx: &mut ContactContext,
) -> Result<(DVector<f64>, DMatrix<f64>, ContactSummary)> {
    let n = mesh.n_dofs();
    let mut r = DVector::zeros(n);
    let mut k = DMatrix::zeros(n, n);
    let mut summary = ContactSummary::empty();

    let elements: Vec<ElementDofVector> = (0..mesh.elements.len())
        .map(|i| mesh.element_dofs(d, i))
        .collect::<Result<_>>()?;
    let radii: Vec<f64> = (0..mesh.elements.len()).map(|i| mesh.radius(i)).collect();
    let candidates = find_candidates(&elements, &radii, &settings.search, &|i, j| {
        mesh.shares_node(i, j)
    })?;

    // One prepared job per candidate; evaluated in parallel, merged in
    // candidate order so the assembly is deterministic.
    struct Job {
        i: usize,
        j: usize,
        enable_point: bool,
        enable_line: bool,
        warm: PairWarmStart,
    }
    let jobs: Vec<Job> = candidates
        .iter()
        .map(|cand| {
            // Lower fiber (and element id within it) carries the Gauss points.
            let (i, j) = if mesh.elements[cand.elem1].fiber <= mesh.elements[cand.elem2].fiber {
                (cand.elem1, cand.elem2)
            } else {
                (cand.elem2, cand.elem1)
            };
            let (enable_point, enable_line) =
                if settings.pair.formulation == Formulation::AllAngle {
                    (cand.point, cand.line)
                } else {
                    (true, true)
                };
            let mut warm = ctx.warm.get(&(i, j)).cloned().unwrap_or_default();
            if warm.point.is_none() {
                let (xi, eta) = if i == cand.elem1 {
                    (cand.warm_xi, cand.warm_eta)
                } else {
                    (cand.warm_eta, cand.warm_xi)
                };
                warm.point = Some((xi, eta));
            }
            Job {
                i,
                j,
                enable_point,
                enable_line,
                warm,
            }
        })
        .collect();

    let eval_job = |job: &Job| {
        let params = ProjectionParams::new(radii[job.i], radii[job.j]);
        evaluate_pair(
            &elements[job.i],
            &elements[job.j],
            &settings.pair,
            &params,
            Some(&job.warm),
            job.enable_point,
            job.enable_line,
        )
    };
    let workers = crate::worker_count().min(jobs.len().max(1));
    let results: Vec<Result<crate::contact::abc::PairEvaluation>> = if workers <= 1 {
        jobs.iter().map(eval_job).collect()
    } else {
        let chunk = jobs.len().div_ceil(workers);
        let mut out: Vec<Option<Result<_>>> = (0..jobs.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut rest = out.as_mut_slice();
            let mut handles = Vec::new();
            for batch in jobs.chunks(chunk) {
                let (head, tail) = rest.split_at_mut(batch.len());
                rest = tail;
                handles.push(scope.spawn(move || {
                    for (slot, job) in head.iter_mut().zip(batch) {
                        *slot = Some(eval_job(job));
                    }
                }));
            }
            for h in handles {
                h.join().expect("contact worker panicked");
            }
        });
        out.into_iter().map(|o| o.expect("job evaluated")).collect()
    };

    for (job, result) in jobs.into_iter().zip(results) {
        let (i, j) = (job.i, job.j);
        let ev = result?;
        mesh.scatter_pair(i, j, &ev.residual, &mut r);
        mesh.scatter_pair_matrix(i, j, &ev.stiffness, &mut k);
        summary.potential += ev.potential;
        summary.n_point += ev.n_point;
        summary.n_line_gp += ev.n_line_gp;
        summary.n_endpoint += ev.n_endpoint;
        summary.alpha_min = summary.alpha_min.min(ev.alpha_min);
        summary.alpha_max = summary.alpha_max.max(ev.alpha_max);
        summary.min_gap = summary.min_gap.min(ev.min_gap);
        summary.forces.extend(ev.forces.iter().copied());
        ctx.warm.insert((i, j), ev.warm);
    }
    Ok((r, k, summary))
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub tol_r: f64,
    pub tol_d: f64,
    pub max_newton: usize,
    /// Increment cap of the step size control; the scene's minimal radius.
    pub r_cap: f64,
    /// Penetration guard factor in [0, 1]; guard disabled if NaN.
    pub k_pen: f64,
    pub use_mcs: bool,
    pub n_gauss: usize,
    /// Disable the while-loop increment capping (baseline comparisons).
    pub step_size_control: bool,
}

impl SolverConfig {
    pub fn new(r_cap: f64) -> Self {
        Self {
            tol_r: 1e-7,
            tol_d: 1e-7,
            max_newton: 50,
            r_cap,
            k_pen: 0.5,
            use_mcs: false,
            n_gauss: 4,
            step_size_control: true,
        }
    }
}

/// Internal + external static force part F(d, t) = R_int + R_con - R_ext
/// with consistent tangent and the contact summary.
pub fn assemble_static(
    mesh: &Mesh,
    d: &DVector<f64>,
    loads: &[(usize, ElementLoad)],
    settings: &ContactSettings,
    ctx: &mut ContactContext,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, DMatrix<f64>, ContactSummary)> {
    let n = mesh.n_dofs();
    let mut r = DVector::zeros(n);
    let mut k = DMatrix::zeros(n, n);
    for e in 0..mesh.elements.len() {
        let dofs = mesh.element_dofs(d, e)?;
        let section = &mesh.sections[mesh.elements[e].section];
        if cfg.use_mcs {
            let (re, ke) = element::mcs_internal_residual_stiffness(&dofs, section, cfg.n_gauss)?;
            mesh.scatter(e, &re, &mut r);
            mesh.scatter_matrix(e, &ke, &mut k);
        } else {
            let re = element::internal_residual(&dofs, section, cfg.n_gauss)?;
            let ke = element::internal_stiffness(&dofs, section, cfg.n_gauss)?;
            mesh.scatter(e, &re, &mut r);
            mesh.scatter_matrix(e, &ke, &mut k);
        }
    }
    for (e, load) in loads {
        if load.is_zero() {
            continue;
        }
        let dofs = mesh.element_dofs(d, *e)?;
        // The external residual already carries its assembly sign.
        let (re, ke) = element::external_residual_stiffness(&dofs, load, cfg.n_gauss)?;
        mesh.scatter(*e, &re, &mut r);
        mesh.scatter_matrix(*e, &ke, &mut k);
    }
    let (rc, kc, summary) = assemble_contact(mesh, d, settings, ctx)?;
    r += &rc;
    k += &kc;
    Ok((r, k, summary))
}

/// Prescribed dof value at the current step.
#[derive(Debug, Clone, Copy)]
pub struct Constraint {
    pub dof: usize,
    pub value: f64,
}

fn apply_constraints(
    constraints: &[Constraint],
    r: &mut DVector<f64>,
    k: &mut DMatrix<f64>,
) {
    for c in constraints {
        r[c.dof] = 0.0;
        for m in 0..k.nrows() {
            k[(c.dof, m)] = 0.0;
            k[(m, c.dof)] = 0.0;
        }
        k[(c.dof, c.dof)] = 1.0;
    }
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub iterations: usize,
    pub dd_inf: f64,
    pub contact: ContactSummary,
    /// Assembled contact residual at the converged state.
    pub r_con: DVector<f64>,
}

fn guard_gap(summary: &ContactSummary, cfg: &SolverConfig) -> Result<()> {
    let limit = -cfg.k_pen * cfg.r_cap;
    if cfg.k_pen.is_finite() && summary.min_gap < limit {
        return Err(Error::PenetrationGuard {
            gap: summary.min_gap,
            limit,
        });
    }
    Ok(())
}

/// Shared Newton loop. `extra` turns the static force part into the full
/// residual (adds inertia terms) and its tangent.
fn newton_loop(
    mesh: &Mesh,
    d: &mut DVector<f64>,
    constraints: &[Constraint],
    loads: &[(usize, ElementLoad)],
    settings: &ContactSettings,
    ctx: &mut ContactContext,
    cfg: &SolverConfig,
    mut extra: impl FnMut(&DVector<f64>, &mut DVector<f64>, &mut DMatrix<f64>),
) -> Result<NewtonReport> {
    for c in constraints {
        d[c.dof] = c.value;
    }
    let mut dd_inf = f64::INFINITY;
    let mut dd_norm = f64::INFINITY;
    let mut last_residual = f64::INFINITY;
    for it in 0..cfg.max_newton {
        let (mut r, mut k, summary) = assemble_static(mesh, d, loads, settings, ctx, cfg)?;
        guard_gap(&summary, cfg)?;
        extra(d, &mut r, &mut k);
        apply_constraints(constraints, &mut r, &mut k);
        last_residual = r.norm();
        if r.norm() < cfg.tol_r && dd_norm < cfg.tol_d {
            let (r_con, _, _) = assemble_contact(mesh, d, settings, ctx)?;
            return Ok(NewtonReport {
                iterations: it,
                dd_inf,
                contact: summary,
                r_con,
            });
        }
        let lu = k.lu();
        let mut delta = lu
            .solve(&(-&r))
            .ok_or_else(|| Error::Scenario("singular global tangent".to_string()))?;
        if cfg.step_size_control {
            while delta.amax() > cfg.r_cap {
                delta *= 0.5;
            }
        }
        dd_inf = delta.amax();
        dd_norm = delta.norm();
        *d += &delta;
    }
    Err(Error::NewtonDiverged {
        iterations: cfg.max_newton,
        residual: last_residual,
    })
}

/// One quasi-static equilibrium solve at fixed constraints and loads.
pub fn newton_static(
    mesh: &Mesh,
    d: &mut DVector<f64>,
    constraints: &[Constraint],
    loads: &[(usize, ElementLoad)],
    settings: &ContactSettings,
    ctx: &mut ContactContext,
    cfg: &SolverConfig,
) -> Result<NewtonReport> {
    newton_loop(mesh, d, constraints, loads, settings, ctx, cfg, |_, _, _| {})
}

/// Generalized-alpha parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenAlpha {
    pub alpha_m: f64,
    pub alpha_f: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl GenAlpha {
    /// Parameters from the desired spectral radius at infinity.
    pub fn from_spectral_radius(rho: f64) -> Self {
        let alpha_m = (2.0 * rho - 1.0) / (rho + 1.0);
        let alpha_f = rho / (rho + 1.0);
        let beta = 0.25 * (1.0 - alpha_m + alpha_f).powi(2);
        let gamma = 0.5 - alpha_m + alpha_f;
        Self {
            alpha_m,
            alpha_f,
            beta,
            gamma,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DynamicState {
    pub d: DVector<f64>,
    pub v: DVector<f64>,
    pub a: DVector<f64>,
    pub t: f64,
}

impl DynamicState {
    pub fn at_rest(mesh: &Mesh) -> Self {
        let n = mesh.n_dofs();
        Self {
            d: mesh.initial.clone(),
            v: DVector::zeros(n),
            a: DVector::zeros(n),
            t: 0.0,
        }
    }
}

/// One generalized-alpha time step; on success the state is advanced.
#[allow(clippy::too_many_arguments)]
pub fn genalpha_step(
    mesh: &Mesh,
    mass: &DMatrix<f64>,
    state: &mut DynamicState,
    dt: f64,
    ga: &GenAlpha,
    constraints: &[Constraint],
    loads_old: &[(usize, ElementLoad)],
    loads_new: &[(usize, ElementLoad)],
    settings: &ContactSettings,
    ctx: &mut ContactContext,
    cfg: &SolverConfig,
) -> Result<NewtonReport> {
    let (f_old, _, _) = assemble_static(mesh, &state.d, loads_old, settings, ctx, cfg)?;
    let d0 = state.d.clone();
    let v0 = state.v.clone();
    let a0 = state.a.clone();
    let k_kin = 1.0 / (ga.beta * dt * dt);
    let accel = |d: &DVector<f64>| -> DVector<f64> {
        (d - &d0 - dt * &v0) * k_kin - (0.5 / ga.beta - 1.0) * &a0
    };

    let mut d = d0.clone();
    let report = newton_loop(
        mesh,
        &mut d,
        constraints,
        loads_new,
        settings,
        ctx,
        cfg,
        |d, r, k| {
            let a_new = accel(d);
            let inertia = mass * ((1.0 - ga.alpha_m) * &a_new + ga.alpha_m * &a0);
            // r currently holds F(d_{n+1}); blend the force levels.
            *r *= 1.0 - ga.alpha_f;
            *r += ga.alpha_f * &f_old;
            *r += inertia;
            *k *= 1.0 - ga.alpha_f;
            let mscale = (1.0 - ga.alpha_m) * k_kin;
            for i in 0..k.nrows() {
                for j in 0..k.ncols() {
                    k[(i, j)] += mscale * mass[(i, j)];
                }
            }
        },
    );
    match report {
        Ok(rep) => {
            let a_new = accel(&d);
            state.v = &v0 + dt * ((1.0 - ga.gamma) * &a0 + ga.gamma * &a_new);
            state.a = a_new;
            state.d = d;
            state.t += dt;
            Ok(rep)
        }
        Err(e) => Err(e),
    }
}

/// Errors that reject the step and trigger halving rather than aborting.
pub fn is_recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NewtonDiverged { .. }
            | Error::PenetrationGuard { .. }
            | Error::ProjectionDiverged { .. }
    )
}

/// Output of one accepted step, handed to the caller's observer.
pub struct StepOutput<'a> {
    pub step: usize,
    pub t: f64,
    pub d: &'a DVector<f64>,
    pub v: Option<&'a DVector<f64>>,
    pub report: &'a NewtonReport,
    /// Displacement increment of the whole accepted step.
    pub delta_d: &'a DVector<f64>,
}

/// Quasi-static driver over a load/constraint path parameterized by s in
/// [0, 1]. Steps of size 1/n_steps; halved on rejection, re-doubled after
/// four successes, never above the base size.
#[allow(clippy::too_many_arguments)]
pub fn run_static(
    mesh: &Mesh,
    constraints_at: &dyn Fn(f64) -> Vec<Constraint>,
    loads_at: &dyn Fn(f64) -> Vec<(usize, ElementLoad)>,
    n_steps: usize,
    settings: &ContactSettings,
    cfg: &SolverConfig,
    on_step: &mut dyn FnMut(StepOutput<'_>) -> Result<()>,
) -> Result<DVector<f64>> {
    let mut d = mesh.initial.clone();
    let mut ctx = ContactContext::default();
    let base = 1.0 / n_steps as f64;
    let min_step = base / 1024.0;
    let mut h = base;
    let mut s = 0.0;
    let mut successes = 0usize;
    let mut step = 0usize;
    while s < 1.0 - 1e-12 {
        let target = (s + h).min(1.0);
        let mut trial = d.clone();
        let constraints = constraints_at(target);
        let loads = loads_at(target);
        match newton_static(mesh, &mut trial, &constraints, &loads, settings, &mut ctx, cfg) {
            Ok(report) => {
                let delta = &trial - &d;
                d = trial;
                s = target;
                step += 1;
                successes += 1;
                if successes >= 4 && h < base {
                    h = (2.0 * h).min(base);
                    successes = 0;
                }
                on_step(StepOutput {
                    step,
                    t: s,
                    d: &d,
                    v: None,
                    report: &report,
                    delta_d: &delta,
                })?;
            }
            Err(e) if is_recoverable(&e) => {
                h *= 0.5;
                successes = 0;
                if h < min_step {
                    return Err(Error::StepSizeUnderflow { min: min_step });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(d)
}

/// Dynamic driver from t=0 to t_end with adaptive halving of dt.
#[allow(clippy::too_many_arguments)]
pub fn run_dynamic(
    mesh: &Mesh,
    state: &mut DynamicState,
    dt: f64,
    t_end: f64,
    ga: &GenAlpha,
    constraints_at: &dyn Fn(f64) -> Vec<Constraint>,
    loads_at: &dyn Fn(f64) -> Vec<(usize, ElementLoad)>,
    settings: &ContactSettings,
    cfg: &SolverConfig,
    on_step: &mut dyn FnMut(StepOutput<'_>) -> Result<()>,
) -> Result<()> {
    let mass = global_mass(mesh)?;
    let mut ctx = ContactContext::default();
    let min_dt = dt / 1024.0;
    let mut h = dt;
    let mut successes = 0usize;
    let mut step = 0usize;
    while state.t < t_end - 1e-12 * t_end.max(1.0) {
        let h_eff = h.min(t_end - state.t);
        let mut trial = state.clone();
        let loads_old = loads_at(state.t);
        let loads_new = loads_at(state.t + h_eff);
        let constraints = constraints_at(state.t + h_eff);
        match genalpha_step(
            mesh,
            &mass,
            &mut trial,
            h_eff,
            ga,
            &constraints,
            &loads_old,
            &loads_new,
            settings,
            &mut ctx,
            cfg,
        ) {
            Ok(report) => {
                let delta = &trial.d - &state.d;
                *state = trial;
                step += 1;
                successes += 1;
                if successes >= 4 && h < dt {
                    h = (2.0 * h).min(dt);
                    successes = 0;
                }
                on_step(StepOutput {
                    step,
                    t: state.t,
                    d: &state.d,
                    v: Some(&state.v),
                    report: &report,
                    delta_d: &delta,
                })?;
            }
            Err(e) if is_recoverable(&e) => {
                h *= 0.5;
                successes = 0;
                if h < min_dt {
                    return Err(Error::StepSizeUnderflow { min: min_dt });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
