//! Variational solver for the boundary-reaction problem on the half plane:
//! weighted Dirichlet energy in the bulk, reaction primitive on the thin row,
//! Dirichlet data on the remaining boundary.
//!
//! The discrete energy is
//!
//!   E(u) = sum_faces W_face (du/h)^2 (transverse measure)
//!        + sum_{bottom nodes} 2 B_eps(u) dx'
//!
//! with exact integrated weights. The residual is the gradient of E (halved),
//! so the interior operator is the weighted five-point scheme and the thin
//! row carries beta_eps. Newton corrections are solved exactly: the operator
//! is separable off the thin row, so interior unknowns are eliminated per
//! sine mode and only a dense system on the thin row is factored.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, ThinField};
use crate::reaction::ReactionProfile;
use nalgebra::DMatrix;
use std::sync::Arc;

/// Dirichlet data generator for the lateral and top boundary.
#[derive(Debug, Clone)]
pub enum BoundarySpec {
    Constant(f64),
    /// amplitude * P(x1, xn) with the profile of the problem's s
    ScaledProfile { amplitude: f64 },
    /// explicit nodal values (only boundary entries are read)
    Values(Vec<f64>),
}

impl BoundarySpec {
    fn value(&self, s: f64, x: f64, z: f64, grid: &Grid, i: usize, j: usize) -> f64 {
        match self {
            BoundarySpec::Constant(c) => *c,
            BoundarySpec::ScaledProfile { amplitude } => {
                amplitude * crate::closed_forms::profile_p(x, z, s)
            }
            BoundarySpec::Values(v) => v[grid.idx(i, j)],
        }
    }
}

/// All scalar parameters governing one solve.
#[derive(Debug, Clone)]
pub struct ProblemParams {
    pub s: f64,
    pub eps: f64,
    pub reaction: ReactionProfile,
    pub l: f64,
    pub h: f64,
    pub nx: usize,
    pub nz: usize,
    pub boundary: BoundarySpec,
    pub residual_tol: f64,
    pub max_iter: usize,
    pub damping_floor: f64,
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::invalid_parameter(format!("s = {} outside (0,1)", self.s)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid_parameter(format!("eps = {} must be positive", self.eps)));
        }
        if self.residual_tol <= 0.0 || self.max_iter == 0 || self.damping_floor <= 0.0 {
            return Err(Error::invalid_parameter(
                "residual_tol, max_iter and damping_floor must be positive",
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        self.validate()?;
        Grid::new(self.s, self.l, self.h, self.nx, self.nz)
    }

    /// Write the Dirichlet data onto the lateral and top boundary nodes.
    /// The bottom row (except its corners) is free.
    pub fn apply_boundary(&self, u: &mut Field) -> Result<()> {
        let grid = u.grid.clone();
        let mut min_g = f64::INFINITY;
        let mut set = |i: usize, j: usize, u: &mut Field| {
            let v = self.boundary.value(self.s, grid.x(i), grid.z(j), &grid, i, j);
            min_g = min_g.min(v);
            u.set(i, j, v);
        };
        for j in 0..grid.nz {
            set(0, j, u);
            set(grid.nx - 1, j, u);
        }
        for i in 0..grid.nx {
            set(i, grid.nz - 1, u);
        }
        if !(min_g >= 0.0) {
            return Err(Error::invalid_parameter(format!(
                "boundary data must be nonnegative (min {min_g})"
            )));
        }
        Ok(())
    }

    pub fn max_boundary(&self, grid: &Grid) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for j in 0..grid.nz {
            for i in [0, grid.nx - 1] {
                m = m.max(self.boundary.value(self.s, grid.x(i), grid.z(j), grid, i, j));
            }
        }
        for i in 0..grid.nx {
            m = m.max(self.boundary.value(
                self.s,
                grid.x(i),
                grid.z(grid.nz - 1),
                grid,
                i,
                grid.nz - 1,
            ));
        }
        m
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub final_energy: f64,
    pub energy_history: Vec<f64>,
    pub converged: bool,
    /// most negative nodal value before the tiny-undershoot clamp
    pub min_value: f64,
    pub warnings: Vec<String>,
    /// Newton steps that fell back to the positive-part linearization
    pub clamped_steps: usize,
}

fn check_same_grid(u: &Field, grid: &Grid) -> Result<()> {
    if !u.grid.compatible(grid) {
        return Err(Error::invalid_argument("field lives on an incompatible grid"));
    }
    Ok(())
}

/// Discrete energy E(u); see the module docs for the exact form.
pub fn discrete_energy(u: &Field, params: &ProblemParams) -> Result<f64> {
    let grid = params.grid()?;
    check_same_grid(u, &grid)?;
    Ok(energy_inner(u, params, true))
}

/// Weighted Dirichlet part of the discrete energy (no thin term).
pub fn dirichlet_energy(u: &Field) -> f64 {
    bulk_energy(u)
}

fn bulk_energy(u: &Field) -> f64 {
    let g = &u.grid;
    let mut e = 0.0;
    for j in 0..g.nz {
        let c = g.wz_dual[j] / g.hx;
        for i in 0..g.nx - 1 {
            let d = u.at(i + 1, j) - u.at(i, j);
            e += c * d * d;
        }
    }
    for j in 0..g.nz - 1 {
        let c = g.wz_face[j] / (g.hz * g.hz);
        for i in 0..g.nx {
            let d = u.at(i, j + 1) - u.at(i, j);
            e += c * g.thin_dual_len(i) * d * d;
        }
    }
    e
}

fn energy_inner(u: &Field, params: &ProblemParams, with_reaction: bool) -> f64 {
    let g = &u.grid;
    let mut e = bulk_energy(u);
    if with_reaction {
        for i in 0..g.nx {
            let b = params.reaction.b_eps(params.eps, u.at(i, 0)).unwrap_or(0.0);
            e += 2.0 * b * g.thin_dual_len(i);
        }
    }
    e
}

/// Gradient of the discrete energy (halved) at every node; zero on the
/// Dirichlet part of the boundary. Thin-row entries include beta_eps.
pub fn assemble_residual(u: &Field, params: &ProblemParams) -> Result<Field> {
    let grid = params.grid()?;
    check_same_grid(u, &grid)?;
    let mut r = Field::zeros(&u.grid);
    residual_free_nodes(u, params, true, &mut r.values);
    Ok(r)
}

/// Residual at the free nodes (i in 1..nx-1, j in 0..nz-1), written into
/// `out` in full-grid layout; Dirichlet nodes stay zero.
fn residual_free_nodes(u: &Field, params: &ProblemParams, with_reaction: bool, out: &mut [f64]) {
    let g = &u.grid;
    for v in out.iter_mut() {
        *v = 0.0;
    }
    for j in 0..g.nz - 1 {
        let ch = g.wz_dual[j] / g.hx;
        let vc_up = g.wz_face[j] / (g.hz * g.hz) * g.hx;
        let vc_dn = if j > 0 { g.wz_face[j - 1] / (g.hz * g.hz) * g.hx } else { 0.0 };
        for i in 1..g.nx - 1 {
            let uc = u.at(i, j);
            let mut acc = ch * (2.0 * uc - u.at(i - 1, j) - u.at(i + 1, j));
            acc += vc_up * (uc - u.at(i, j + 1));
            if j > 0 {
                acc += vc_dn * (uc - u.at(i, j - 1));
            }
            out[g.idx(i, j)] = acc;
        }
    }
    if with_reaction {
        for i in 1..g.nx - 1 {
            let b = params.reaction.beta_eps(params.eps, u.at(i, 0)).unwrap_or(0.0);
            out[g.idx(i, 0)] += b * g.hx;
        }
    }
}

/// Residual norm: max gradient entry per unit cell area.
fn residual_norm(grid: &Grid, r: &[f64]) -> f64 {
    let scale = grid.hx * grid.hz;
    r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
}

/// Discrete weighted flux on the bottom row, normalized so that
/// flux + beta_eps(u) ~ 0 at converged solutions.
pub fn neumann_flux(u: &Field, params: &ProblemParams) -> Result<ThinField> {
    let grid = params.grid()?;
    check_same_grid(u, &grid)?;
    let g = &u.grid;
    let mut vals = vec![0.0; g.nx];
    let ch = g.wz_dual[0] / g.hx;
    let vc = g.wz_face[0] / (g.hz * g.hz);
    for i in 0..g.nx {
        let uc = u.at(i, 0);
        let mut acc = 0.0;
        if i > 0 {
            acc += ch * (uc - u.at(i - 1, 0));
        }
        if i < g.nx - 1 {
            acc += ch * (uc - u.at(i + 1, 0));
        }
        let tl = g.thin_dual_len(i);
        acc += vc * tl * (uc - u.at(i, 1));
        vals[i] = acc / tl;
    }
    Ok(ThinField { values: vals })
}

// ---------------------------------------------------------------------------
// Newton-correction solver: sine-mode elimination + dense thin-row Schur
// ---------------------------------------------------------------------------

pub struct SchurSolver {
    grid: Arc<Grid>,
    /// free columns
    m: usize,
    /// free rows (j = 0..nz-2)
    jrows: usize,
    vc: Vec<f64>,
    /// orthonormal sine transform, symmetric
    q: DMatrix<f64>,
    /// elimination pivots e_j(k), valid for j >= 1
    e: DMatrix<f64>,
    /// Schur eigenvalues sigma_k
    sigma: Vec<f64>,
    /// dense thin-row Schur complement Q^T diag(sigma) Q
    s_dense: DMatrix<f64>,
}

impl SchurSolver {
    pub fn new(grid: &Arc<Grid>) -> SchurSolver {
        let g = grid.as_ref();
        let m = g.nx - 2;
        let jrows = g.nz - 1;
        let n1 = (g.nx - 1) as f64;
        let ch: Vec<f64> = (0..jrows).map(|j| g.wz_dual[j] / g.hx).collect();
        let vc: Vec<f64> = (0..jrows).map(|j| g.wz_face[j] / (g.hz * g.hz) * g.hx).collect();
        let mu: Vec<f64> =
            (1..=m).map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / n1).cos()).collect();
        let norm = (2.0 / n1).sqrt();
        let q = DMatrix::from_fn(m, m, |k, i| {
            norm * ((k + 1) as f64 * (i + 1) as f64 * std::f64::consts::PI / n1).sin()
        });
        // elimination pivots from the top row downward
        let mut e = DMatrix::zeros(jrows, m);
        for k in 0..m {
            let dj = |j: usize| ch[j] * mu[k] + vc[j] + if j > 0 { vc[j - 1] } else { 0.0 };
            if jrows >= 2 {
                e[(jrows - 1, k)] = dj(jrows - 1);
                for j in (1..jrows - 1).rev() {
                    e[(j, k)] = dj(j) - vc[j] * vc[j] / e[(j + 1, k)];
                }
            }
        }
        let d0: Vec<f64> = (0..m).map(|k| ch[0] * mu[k] + vc[0]).collect();
        let sigma: Vec<f64> = (0..m)
            .map(|k| if jrows >= 2 { d0[k] - vc[0] * vc[0] / e[(1, k)] } else { d0[k] })
            .collect();
        // S = Q^T diag(sigma) Q; q is symmetric
        let mut sq = q.clone();
        for k in 0..m {
            for i in 0..m {
                sq[(k, i)] *= sigma[k];
            }
        }
        let s_dense = q.transpose() * sq;
        SchurSolver { grid: grid.clone(), m, jrows, vc, q, e, sigma, s_dense }
    }

    /// Solve (A + diag(thin_diag) on the bottom row) delta = rhs, where A is
    /// the reaction-free operator on free nodes and `rhs` is in full-grid
    /// layout. Returns the correction in full-grid layout (Dirichlet zero),
    /// plus whether the dense factorization needed the LU fallback.
    pub fn solve(&self, thin_diag: &[f64], rhs: &[f64]) -> Result<(Vec<f64>, bool)> {
        let g = self.grid.as_ref();
        let (m, jrows) = (self.m, self.jrows);
        // rows to mode space
        let mut b = DMatrix::zeros(jrows, m);
        for j in 0..jrows {
            for i in 0..m {
                b[(j, i)] = rhs[g.idx(i + 1, j)];
            }
        }
        let mut bh = &b * &self.q; // row-wise transform (q symmetric)
        // eliminate interior onto the bottom: g_j = b_j + (vc_j/e_{j+1}) g_{j+1}
        for k in 0..m {
            for j in (1..jrows - 1).rev() {
                let t = self.vc[j] / self.e[(j + 1, k)];
                let add = t * bh[(j + 1, k)];
                bh[(j, k)] += add;
            }
        }
        // reduced thin-row rhs in mode space, then back to real space
        let mut b0h = vec![0.0; m];
        for k in 0..m {
            b0h[k] = bh[(0, k)]
                + if jrows >= 2 { self.vc[0] / self.e[(1, k)] * bh[(1, k)] } else { 0.0 };
        }
        let mut b0 = vec![0.0; m];
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += self.q[(k, i)] * b0h[k];
            }
            b0[i] = acc;
        }
        // dense thin-row system
        let mut mat = self.s_dense.clone();
        for i in 0..m {
            mat[(i, i)] += thin_diag[i];
        }
        let rhs0 = nalgebra::DVector::from_vec(b0);
        let (delta0, fell_back) = match mat.clone().cholesky() {
            Some(ch) => (ch.solve(&rhs0), false),
            None => {
                let lu = mat.lu();
                match lu.solve(&rhs0) {
                    Some(x) => (x, true),
                    None => {
                        return Err(Error::SolverBreakdown(
                            "singular thin-row system".into(),
                        ))
                    }
                }
            }
        };
        // expand back to the interior, mode by mode
        let mut dh = DMatrix::zeros(jrows, m);
        let d0h = &self.q * &delta0;
        for k in 0..m {
            dh[(0, k)] = d0h[k];
            for j in 1..jrows {
                let num = bh[(j, k)] + self.vc[j - 1] * dh[(j - 1, k)];
                dh[(j, k)] = num / self.e[(j, k)];
            }
        }
        let dreal = &dh * &self.q;
        let mut out = vec![0.0; g.node_count()];
        for j in 0..jrows {
            for i in 0..m {
                out[g.idx(i + 1, j)] = dreal[(j, i)];
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverBreakdown("non-finite Newton correction".into()));
        }
        Ok((out, fell_back))
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
}

// ---------------------------------------------------------------------------
// Damped Newton with energy line search
// ---------------------------------------------------------------------------

/// Solve the discrete problem. `initial` defaults to the weighted-harmonic
/// extension of the boundary data (reaction off). Steps are accepted only
/// when the energy decreases; the linearization falls back to the
/// positive-part of beta' when the full Newton matrix is not usable.
pub fn solve(params: &ProblemParams, initial: Option<&Field>) -> Result<(Field, SolveReport)> {
    let grid = params.grid()?;
    let schur = SchurSolver::new(&grid);
    solve_with(params, initial, &schur)
}

/// Same as `solve` but reuses a prebuilt `SchurSolver` (grids must match);
/// used by continuation ladders.
///
/// Without an initial field the solve runs its own internal eps ladder:
/// beta' scales like 1/eps^2, so a cold Newton start at small eps diverges;
/// halving eps from the data scale with warm starts keeps every rung in the
/// Newton basin.
pub fn solve_with(
    params: &ProblemParams,
    initial: Option<&Field>,
    schur: &SchurSolver,
) -> Result<(Field, SolveReport)> {
    let grid = params.grid()?;
    if !schur.grid.compatible(&grid) {
        return Err(Error::invalid_argument("Schur solver built for another grid"));
    }
    let mut warnings = Vec::new();
    let mut pre_iterations = 0;
    let mut pre_clamped = 0;
    let mut u = match initial {
        Some(f) => {
            check_same_grid(f, &grid)?;
            let mut u = f.clone();
            params.apply_boundary(&mut u)?;
            u
        }
        None => {
            let mut u = harmonic_extension(params, schur)?;
            let scale = params.max_boundary(grid.as_ref());
            let mut eps_eff = 0.5 * scale;
            let loose = params.residual_tol * 1e3;
            while eps_eff > params.eps {
                let mut p = params.clone();
                p.eps = eps_eff;
                let st = newton_loop(&p, &mut u, schur, loose, params.max_iter)?;
                pre_iterations += st.iterations;
                pre_clamped += st.clamped_steps;
                if !st.converged {
                    warnings.push(format!(
                        "continuation rung eps = {eps_eff:.3e} stopped at residual {:.3e}",
                        st.final_residual
                    ));
                }
                eps_eff = (0.5 * eps_eff).max(params.eps);
                if eps_eff == params.eps {
                    break;
                }
            }
            u
        }
    };

    let st = newton_loop(params, &mut u, schur, params.residual_tol, params.max_iter)?;
    warnings.extend(st.warnings);
    if !st.converged && st.iterations >= params.max_iter {
        warnings.push(format!(
            "max_iter = {} reached with residual {:.3e}",
            params.max_iter, st.final_residual
        ));
    }

    // nonnegativity: clamp floating-point dust, report real undershoots
    let g = grid.as_ref();
    let scale = params.max_boundary(g).abs().max(1.0);
    let floor = -1e-12 * scale;
    let mut min_value: f64 = 0.0;
    for v in u.values.iter_mut() {
        min_value = min_value.min(*v);
        if *v < 0.0 && *v >= floor {
            *v = 0.0;
        }
    }
    if min_value < floor {
        warnings.push(format!("negative undershoot {min_value:.3e} below {floor:.3e}"));
    }

    let report = SolveReport {
        iterations: st.iterations + pre_iterations,
        final_residual: st.final_residual,
        final_energy: st.final_energy,
        energy_history: st.energy_history,
        converged: st.converged,
        min_value,
        warnings,
        clamped_steps: st.clamped_steps + pre_clamped,
    };
    Ok((u, report))
}

struct NewtonStats {
    iterations: usize,
    final_residual: f64,
    final_energy: f64,
    energy_history: Vec<f64>,
    converged: bool,
    clamped_steps: usize,
    warnings: Vec<String>,
}

/// Damped Newton on the energy gradient at fixed eps. Steps are accepted on
/// an Armijo test with a floating-point noise allowance, so the iteration
/// does not stall once energy differences fall below roundoff.
fn newton_loop(
    params: &ProblemParams,
    u: &mut Field,
    schur: &SchurSolver,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonStats> {
    let g = u.grid.clone();
    let g = g.as_ref();
    let m = g.nx - 2;
    let mut rhs = vec![0.0; g.node_count()];
    let mut energy = energy_inner(u, params, true);
    let mut history = vec![energy];
    let mut clamped_steps = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut warnings = Vec::new();
    let mut final_residual;

    loop {
        residual_free_nodes(u, params, true, &mut rhs);
        final_residual = residual_norm(g, &rhs);
        if !final_residual.is_finite() {
            return Err(Error::SolverBreakdown("non-finite residual".into()));
        }
        if final_residual <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        // negated gradient as right-hand side
        let neg: Vec<f64> = rhs.iter().map(|v| -v).collect();
        let thin_diag: Vec<f64> = (0..m)
            .map(|i| {
                params.reaction.beta_eps_prime(params.eps, u.at(i + 1, 0)).unwrap_or(0.0) * g.hx
            })
            .collect();
        let noise = 50.0 * f64::EPSILON * energy.abs().max(1.0);

        let mut step = None;
        // full Newton first, then the positive-part linearization
        for clamp in [false, true] {
            let diag: Vec<f64> = if clamp {
                clamped_steps += 1;
                thin_diag.iter().map(|d| d.max(0.0)).collect()
            } else {
                thin_diag.clone()
            };
            let delta = match schur.solve(&diag, &neg) {
                Ok((d, _)) => d,
                Err(_) if !clamp => continue,
                Err(e) => return Err(e),
            };
            // directional derivative of E along delta is 2 r . delta
            let slope: f64 = 2.0 * rhs.iter().zip(&delta).map(|(r, d)| r * d).sum::<f64>();
            if slope >= 0.0 {
                continue; // not a descent direction
            }
            // Armijo backtracking on the energy
            let mut t = 1.0;
            while t >= params.damping_floor {
                let trial = add_scaled(u, &delta, t);
                let et = energy_inner(&trial, params, true);
                if et.is_finite() && et <= energy + 1e-4 * t * slope + noise {
                    step = Some((trial, et));
                    break;
                }
                t *= 0.5;
            }
            if step.is_some() {
                break;
            }
        }

        match step {
            Some((trial, et)) => {
                *u = trial;
                energy = et;
                history.push(energy);
            }
            None => {
                warnings.push(format!(
                    "line search stalled at iteration {iterations} (residual {final_residual:.3e})"
                ));
                break;
            }
        }
    }

    Ok(NewtonStats {
        iterations,
        final_residual,
        final_energy: energy,
        energy_history: history,
        converged,
        clamped_steps,
        warnings,
    })
}

/// Weighted-harmonic extension of the boundary data (reaction off); one
/// exact linear solve.
pub fn harmonic_extension(params: &ProblemParams, schur: &SchurSolver) -> Result<Field> {
    let grid = params.grid()?;
    let mut u = Field::zeros(&grid);
    params.apply_boundary(&mut u)?;
    let g = grid.as_ref();
    let mut rhs = vec![0.0; g.node_count()];
    residual_free_nodes(&u, params, false, &mut rhs);
    for v in rhs.iter_mut() {
        *v = -*v;
    }
    let zeros = vec![0.0; g.nx - 2];
    let (delta, _) = schur.solve(&zeros, &rhs)?;
    for (uv, dv) in u.values.iter_mut().zip(&delta) {
        *uv += dv;
    }
    Ok(u)
}

fn add_scaled(u: &Field, delta: &[f64], t: f64) -> Field {
    let mut out = u.clone();
    for (o, d) in out.values.iter_mut().zip(delta) {
        *o += t * d;
    }
    out
}

// ---------------------------------------------------------------------------
// Domain-variation identity
// ---------------------------------------------------------------------------

/// A smooth vector field with its Jacobian, for domain variations.
pub struct VectorField {
    #[allow(clippy::type_complexity)]
    pub eval: Box<dyn Fn(f64, f64) -> VectorSample + Sync>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VectorSample {
    pub v1: f64,
    pub vn: f64,
    pub d1v1: f64,
    pub dnv1: f64,
    pub d1vn: f64,
    pub dnvn: f64,
}

impl VectorField {
    /// Radial bump times e1, centered at (cx, 0): psi1 = exp(1 - 1/(1 - rho^2/R^2))
    /// inside rho < R, zero outside; psi_n = 0 everywhere.
    pub fn bump_e1(cx: f64, radius: f64) -> VectorField {
        let r2 = radius * radius;
        VectorField {
            eval: Box::new(move |x: f64, z: f64| {
                let dx = x - cx;
                let t = (dx * dx + z * z) / r2;
                if t >= 1.0 {
                    return VectorSample::default();
                }
                let g = (1.0 - 1.0 / (1.0 - t)).exp();
                let dgdt = -g / ((1.0 - t) * (1.0 - t));
                VectorSample {
                    v1: g,
                    vn: 0.0,
                    d1v1: dgdt * 2.0 * dx / r2,
                    dnv1: dgdt * 2.0 * z / r2,
                    d1vn: 0.0,
                    dnvn: 0.0,
                }
            }),
        }
    }
}

/// Quadrature of the domain-variation identity for the pair (u, chi):
///
///   int_B |xn|^{1-2s} [ -grad u (x) grad u : grad psi + 1/2 |grad u|^2 div psi ]
///     + int_{B'} 2 chi d1 psi1,
///
/// over the evenly reflected ball (bulk doubled). Near zero for limit pairs.
/// psi must vanish near the lateral/top boundary and be tangential on the
/// thin row.
pub fn domain_variation_residual(u: &Field, chi: &ThinField, psi: &VectorField) -> Result<f64> {
    let g = u.grid.as_ref();
    if chi.len() != g.nx {
        return Err(Error::invalid_argument("chi length does not match the grid"));
    }
    // tangentiality and support checks
    for i in 0..g.nx {
        let smp = (psi.eval)(g.x(i), 0.0);
        if smp.vn.abs() > 1e-12 {
            return Err(Error::invalid_argument("psi is not tangential on the thin row"));
        }
    }
    for j in 0..g.nz {
        for i in [0usize, g.nx - 1] {
            let smp = (psi.eval)(g.x(i), g.z(j));
            if smp.v1.abs() > 1e-10 || smp.vn.abs() > 1e-10 {
                return Err(Error::invalid_argument("psi does not vanish near the boundary"));
            }
        }
    }
    for i in 0..g.nx {
        let smp = (psi.eval)(g.x(i), g.h);
        if smp.v1.abs() > 1e-10 || smp.vn.abs() > 1e-10 {
            return Err(Error::invalid_argument("psi does not vanish near the boundary"));
        }
    }
    let mut bulk = 0.0;
    for j in 0..g.nz - 1 {
        let wmass = g.wz_face[j] * g.hx;
        let zc = g.z(j) + 0.5 * g.hz;
        for i in 0..g.nx - 1 {
            let xc = g.x(i) + 0.5 * g.hx;
            let d1 = (u.at(i + 1, j) + u.at(i + 1, j + 1) - u.at(i, j) - u.at(i, j + 1))
                / (2.0 * g.hx);
            let dn = (u.at(i, j + 1) + u.at(i + 1, j + 1) - u.at(i, j) - u.at(i + 1, j))
                / (2.0 * g.hz);
            let p = (psi.eval)(xc, zc);
            let tensor = d1 * (d1 * p.d1v1 + dn * p.dnv1) + dn * (d1 * p.d1vn + dn * p.dnvn);
            let div = p.d1v1 + p.dnvn;
            bulk += wmass * (-tensor + 0.5 * (d1 * d1 + dn * dn) * div);
        }
    }
    let mut thin = 0.0;
    for i in 0..g.nx {
        let p = (psi.eval)(g.x(i), 0.0);
        thin += 2.0 * chi.values[i] * p.d1v1 * g.thin_dual_len(i);
    }
    Ok(2.0 * bulk + thin)
}
