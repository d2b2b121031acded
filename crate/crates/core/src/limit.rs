//! eps -> 0 continuation and limit diagnostics: Cauchy differences and
//! Hölder seminorms on a fixed compact, the two-valuedness defect of the
//! reaction primitive, interface location, blowup rescalings with profile
//! fits, and thin nondegeneracy averages.

use crate::closed_forms::profile_p;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, ThinField};
use crate::solver::{solve_with, ProblemParams, SchurSolver, SolveReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Axis-aligned compact used for continuation diagnostics.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CompactRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl CompactRegion {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.x_min && x <= self.x_max && z >= self.z_min && z <= self.z_max
    }
}

/// Per-step diagnostics of an eps ladder.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ContinuationReport {
    pub eps_ladder: Vec<f64>,
    /// sup |u_{k+1} - u_k| on the compact, length = ladder - 1
    pub sup_diffs: Vec<f64>,
    /// Hölder-s seminorm on the compact, one per step
    pub holder_seminorms: Vec<f64>,
    /// thin reaction mass int beta_eps(u), one per step
    pub reaction_masses: Vec<f64>,
    /// two-valuedness defect of B_eps(u), one per step
    pub defects: Vec<f64>,
    pub solve_reports: Vec<SolveReport>,
    pub warnings: Vec<String>,
}

/// Warm-started eps continuation. The ladder must be strictly decreasing;
/// each solve starts from the previous field. Non-Cauchy behavior of the
/// sup differences is flagged as a warning, not an error.
pub fn continuation(
    base: &ProblemParams,
    eps_ladder: &[f64],
    compact: &CompactRegion,
    seed: u64,
) -> Result<(Vec<Field>, ContinuationReport)> {
    if eps_ladder.is_empty() {
        return Err(Error::invalid_parameter("continuation: empty eps ladder"));
    }
    if eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid_parameter(
            "continuation: eps ladder must be strictly decreasing",
        ));
    }
    let grid = base.grid()?;
    let schur = SchurSolver::new(&grid);
    let mut fields: Vec<Field> = Vec::with_capacity(eps_ladder.len());
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    // profile data admits the profile itself as a first-rung start; other
    // data goes through the solver's internal eps ladder
    let seed_field = match &base.boundary {
        crate::solver::BoundarySpec::ScaledProfile { amplitude } => {
            let a = *amplitude;
            Some(Field::from_fn(&grid, |x, z| a * profile_p(x, z, base.s)))
        }
        _ => None,
    };
    for &eps in eps_ladder {
        let mut p = base.clone();
        p.eps = eps;
        let init = fields.last().or(seed_field.as_ref());
        let (u, rep) = solve_with(&p, init, &schur)?;
        if !rep.converged {
            warnings.push(format!(
                "solve at eps = {eps} did not converge (residual {:.3e})",
                rep.final_residual
            ));
        }
        fields.push(u);
        reports.push(rep);
    }
    let mut sup_diffs = Vec::new();
    for w in fields.windows(2) {
        sup_diffs.push(sup_diff_on(&w[0], &w[1], compact));
    }
    for (k, w) in sup_diffs.windows(2).enumerate() {
        if w[1] > w[0] {
            warnings.push(format!(
                "non-Cauchy step {}: sup diff rose {:.3e} -> {:.3e}",
                k + 1,
                w[0],
                w[1]
            ));
        }
    }
    let mut holder_seminorms = Vec::new();
    let mut reaction_masses = Vec::new();
    let mut defects = Vec::new();
    for (k, u) in fields.iter().enumerate() {
        let mut p = base.clone();
        p.eps = eps_ladder[k];
        holder_seminorms.push(holder_seminorm(u, compact, base.s, 300_000, seed));
        reaction_masses.push(reaction_mass(u, &p)?);
        let (_, defect) = chi_extract(u, &p)?;
        defects.push(defect);
    }
    let report = ContinuationReport {
        eps_ladder: eps_ladder.to_vec(),
        sup_diffs,
        holder_seminorms,
        reaction_masses,
        defects,
        solve_reports: reports,
        warnings,
    };
    Ok((fields, report))
}

fn sup_diff_on(a: &Field, b: &Field, compact: &CompactRegion) -> f64 {
    let g = a.grid.as_ref();
    let mut m: f64 = 0.0;
    for j in 0..g.nz {
        for i in 0..g.nx {
            if compact.contains(g.x(i), g.z(j)) {
                m = m.max((a.at(i, j) - b.at(i, j)).abs());
            }
        }
    }
    m
}

/// Thin reaction mass int beta_eps(u(., 0)) dx'.
pub fn reaction_mass(u: &Field, params: &ProblemParams) -> Result<f64> {
    let g = u.grid.as_ref();
    let mut acc = 0.0;
    for i in 0..g.nx {
        acc += params.reaction.beta_eps(params.eps, u.at(i, 0))? * g.thin_dual_len(i);
    }
    Ok(acc)
}

/// Nodewise primitive of the trace, B_eps(u(., 0)), plus the two-valuedness
/// defect |{delta < B_eps < M - delta}| / (2L) with delta = M/10.
pub fn chi_extract(u: &Field, params: &ProblemParams) -> Result<(ThinField, f64)> {
    chi_extract_with_delta(u, params, params.reaction.mass / 10.0)
}

pub fn chi_extract_with_delta(
    u: &Field,
    params: &ProblemParams,
    delta: f64,
) -> Result<(ThinField, f64)> {
    let g = u.grid.as_ref();
    let mass = params.reaction.mass;
    if !(delta > 0.0 && delta < 0.5 * mass) {
        return Err(Error::invalid_parameter("chi_extract: delta outside (0, M/2)"));
    }
    let mut vals = Vec::with_capacity(g.nx);
    let mut bad_len = 0.0;
    for i in 0..g.nx {
        let b = params.reaction.b_eps(params.eps, u.at(i, 0))?;
        if b > delta && b < mass - delta {
            bad_len += g.thin_dual_len(i);
        }
        vals.push(b);
    }
    Ok((ThinField { values: vals }, bad_len / (2.0 * g.l)))
}

/// Boundary points of {trace > level} by linear interpolation between
/// adjacent nodes. Values within `slack` of the level count as exactly on it.
pub fn free_boundary(trace: &ThinField, grid: &Grid, level: f64, slack: f64) -> Vec<f64> {
    let n = trace.len();
    let sgn = |v: f64| -> i8 {
        let d = v - level;
        if d > slack {
            1
        } else if d < -slack {
            -1
        } else {
            0
        }
    };
    let mut pts = Vec::new();
    for i in 0..n - 1 {
        let a = sgn(trace.values[i]);
        let b = sgn(trace.values[i + 1]);
        if a == b {
            continue;
        }
        let xa = grid.x(i);
        if a == 0 || b == 0 {
            // node exactly on the level: the boundary point sits on it when
            // the other side is positive
            if (a == 0 && b > 0) || (b == 0 && a > 0) {
                pts.push(if a == 0 { xa } else { grid.x(i + 1) });
            }
            continue;
        }
        // strict sign change: linear zero of (trace - level)
        let fa = trace.values[i] - level;
        let fb = trace.values[i + 1] - level;
        pts.push(xa + grid.hx * fa / (fa - fb));
    }
    pts
}

/// Blowup fit at a thin point: amplitudes of the rescalings
/// u_lambda(x) = u(x0 + lambda x) / lambda^s fitted against the oriented
/// profile over an annulus.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BlowupFit {
    pub center: f64,
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    /// relative L2 residual of each fit
    pub residuals: Vec<f64>,
    /// +1: positivity set on the right of the center, -1: on the left
    pub orientation: i8,
    pub annulus: (f64, f64),
    /// headline amplitude: the smallest-lambda fit
    pub alpha: f64,
}

pub fn blowup_fit(
    u: &Field,
    x0: f64,
    lambdas: &[f64],
    orientation: Option<i8>,
    annulus: (f64, f64),
) -> Result<BlowupFit> {
    let g = u.grid.as_ref();
    let (a, b) = annulus;
    if !(0.0 < a && a < b) {
        return Err(Error::invalid_parameter("blowup_fit: need 0 < a < b"));
    }
    if lambdas.is_empty() {
        return Err(Error::invalid_parameter("blowup_fit: empty lambda ladder"));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid_parameter("blowup_fit: lambdas must be strictly decreasing"));
    }
    let lam_max = lambdas[0];
    if x0 - lam_max * b < -g.l || x0 + lam_max * b > g.l || lam_max * b > g.h {
        return Err(Error::invalid_parameter(format!(
            "blowup_fit: annulus at lambda = {lam_max} exits the domain"
        )));
    }
    let s = g.s;
    let orient = match orientation {
        Some(o) if o == 1 || o == -1 => o,
        Some(o) => {
            return Err(Error::invalid_parameter(format!("orientation must be +-1, got {o}")))
        }
        None => {
            // side with the larger trace mass carries the positivity set
            let w = lam_max * b;
            let mut right = 0.0;
            let mut left = 0.0;
            for i in 0..g.nx {
                let x = g.x(i);
                if x > x0 && x <= x0 + w {
                    right += u.at(i, 0);
                } else if x < x0 && x >= x0 - w {
                    left += u.at(i, 0);
                }
            }
            if right >= left {
                1
            } else {
                -1
            }
        }
    };
    const NTH: usize = 24;
    const NRHO: usize = 12;
    let mut alphas = Vec::with_capacity(lambdas.len());
    let mut residuals = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let mut su_p = 0.0;
        let mut sp_p = 0.0;
        let mut samples = Vec::with_capacity(NTH * NRHO);
        for q in 0..NTH {
            let th = std::f64::consts::PI * (q as f64 + 0.5) / NTH as f64;
            for m in 0..NRHO {
                let rho = a + (b - a) * (m as f64 + 0.5) / NRHO as f64;
                let (cx, cz) = (rho * th.cos(), rho * th.sin());
                let uval = u.interp(x0 + lam * cx, lam * cz) / lam.powf(s);
                let pval = profile_p(orient as f64 * cx, cz, s);
                su_p += uval * pval;
                sp_p += pval * pval;
                samples.push((uval, pval));
            }
        }
        let alpha = (su_p / sp_p).max(0.0);
        let mut num = 0.0;
        let mut den = 0.0;
        for (uval, pval) in samples {
            num += (uval - alpha * pval) * (uval - alpha * pval);
            den += uval * uval;
        }
        alphas.push(alpha);
        residuals.push(if den > 0.0 { (num / den).sqrt() } else { 0.0 });
    }
    let alpha = *alphas.last().unwrap();
    Ok(BlowupFit {
        center: x0,
        lambdas: lambdas.to_vec(),
        alphas,
        residuals,
        orientation: orient,
        annulus,
        alpha,
    })
}

/// Hölder seminorm sup |u(x) - u(y)| / |x - y|^exponent over a deterministic
/// sample of node pairs in the region: all pairs when their count stays
/// under `cap`, otherwise a seeded sample stratified by distance decade.
pub fn holder_seminorm(
    u: &Field,
    region: &CompactRegion,
    exponent: f64,
    cap: usize,
    seed: u64,
) -> f64 {
    let g = u.grid.as_ref();
    let mut nodes = Vec::new();
    for j in 0..g.nz {
        for i in 0..g.nx {
            if region.contains(g.x(i), g.z(j)) {
                nodes.push((i, j));
            }
        }
    }
    let n = nodes.len();
    if n < 2 {
        return 0.0;
    }
    let ratio = |p: (usize, usize), q: (usize, usize)| -> f64 {
        if p == q {
            return 0.0;
        }
        let dx = g.x(p.0) - g.x(q.0);
        let dz = g.z(p.1) - g.z(q.1);
        let dist = dx.hypot(dz);
        (u.at(p.0, p.1) - u.at(q.0, q.1)).abs() / dist.powf(exponent)
    };
    let mut best: f64 = 0.0;
    if n * (n - 1) / 2 <= cap {
        for a in 0..n {
            for b in a + 1..n {
                best = best.max(ratio(nodes[a], nodes[b]));
            }
        }
        return best;
    }
    // stratified sample: random base nodes, partners drawn per distance decade
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diam = (region.x_max - region.x_min).hypot(region.z_max - region.z_min);
    let decades = {
        let mut d = Vec::new();
        let mut lo = g.hx.min(g.hz);
        while lo < diam {
            d.push((lo, (2.0 * lo).min(diam)));
            lo *= 2.0;
        }
        d
    };
    let n_base = 4000.min(n);
    for _ in 0..n_base {
        let p = nodes[rng.gen_range(0..n)];
        for &(lo, hi) in &decades {
            for _ in 0..8 {
                let ang = rng.gen_range(0.0..std::f64::consts::PI * 2.0);
                let dist = rng.gen_range(lo..hi);
                let x = g.x(p.0) + dist * ang.cos();
                let z = g.z(p.1) + dist * ang.sin();
                if !region.contains(x, z) {
                    continue;
                }
                let qi = ((x + g.l) / g.hx).round() as usize;
                let qj = (z / g.hz).round() as usize;
                if qi >= g.nx || qj >= g.nz {
                    continue;
                }
                best = best.max(ratio(p, (qi, qj)));
            }
        }
    }
    best
}

/// Normalized thin averages: for each radius, the average of the trace over
/// (x0 - r, x0 + r) divided by r^s. A positive lower bound across radii
/// certifies nondegeneracy.
pub fn nondegeneracy(trace: &ThinField, grid: &Grid, x0: f64, radii: &[f64]) -> Result<Vec<f64>> {
    let s = grid.s;
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r > 0.0) || x0 - r < -grid.l || x0 + r > grid.l {
            return Err(Error::InvalidRadius(format!("nondegeneracy: radius {r} inadmissible")));
        }
        let lo = x0 - r;
        let hi = x0 + r;
        let mut acc = 0.0;
        for i in 0..grid.nx {
            let a = (grid.x(i) - 0.5 * grid.hx).max(-grid.l).max(lo);
            let b = (grid.x(i) + 0.5 * grid.hx).min(grid.l).min(hi);
            if b > a {
                acc += trace.values[i] * (b - a);
            }
        }
        out.push(acc / (2.0 * r * r.powf(s)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::reaction::ReactionProfile;
    use crate::solver::BoundarySpec;
    use approx::assert_relative_eq;

    fn params(s: f64, eps: f64, nx: usize, nz: usize, boundary: BoundarySpec) -> ProblemParams {
        ProblemParams {
            s,
            eps,
            reaction: ReactionProfile::poly6(1.0).unwrap(),
            l: 1.0,
            h: 1.0,
            nx,
            nz,
            boundary,
            residual_tol: 1e-9,
            max_iter: 60,
            damping_floor: 1e-4,
        }
    }

    #[test]
    fn continuation_constant_data() {
        let p = params(0.5, 0.3, 33, 17, BoundarySpec::Constant(1.0));
        let compact = CompactRegion { x_min: -0.5, x_max: 0.5, z_min: 0.0, z_max: 0.5 };
        let (fields, rep) = continuation(&p, &[0.3, 0.15, 0.075], &compact, 7).unwrap();
        assert_eq!(fields.len(), 3);
        for d in &rep.sup_diffs {
            assert!(*d <= 1e-9, "diff {d}");
        }
        for m in &rep.reaction_masses {
            assert!(*m <= 1e-9);
        }
        for d in &rep.defects {
            assert_eq!(*d, 0.0);
        }
        // ladder validation
        assert!(continuation(&p, &[0.1, 0.2], &compact, 7).is_err());
        assert!(continuation(&p, &[], &compact, 7).is_err());
    }

    #[test]
    fn continuation_zero_data() {
        let p = params(0.5, 0.3, 17, 9, BoundarySpec::Constant(0.0));
        let compact = CompactRegion { x_min: -0.5, x_max: 0.5, z_min: 0.0, z_max: 0.5 };
        let (fields, rep) = continuation(&p, &[0.3, 0.1], &compact, 7).unwrap();
        for f in &fields {
            assert!(f.values.iter().all(|v| v.abs() <= 1e-12));
        }
        assert!(rep.sup_diffs[0] <= 1e-12);
    }

    #[test]
    fn chi_extract_trivial_cases() {
        let p = params(0.5, 0.1, 33, 17, BoundarySpec::Constant(0.0));
        let grid = p.grid().unwrap();
        let u0 = Field::zeros(&grid);
        let (chi, defect) = chi_extract(&u0, &p).unwrap();
        assert!(chi.values.iter().all(|v| *v == 0.0));
        assert_eq!(defect, 0.0);
        let u1 = Field::constant(&grid, 0.5); // >= eps everywhere
        let (chi, defect) = chi_extract(&u1, &p).unwrap();
        assert!(chi.values.iter().all(|v| *v == 1.0));
        assert_eq!(defect, 0.0);
        assert!(chi_extract_with_delta(&u1, &p, 0.6).is_err());
    }

    #[test]
    fn free_boundary_of_profile_trace() {
        let s = 0.5;
        let grid = Grid::new(s, 1.0, 1.0, 257, 9).unwrap();
        let trace = ThinField::from_fn(&grid, |x| x.max(0.0).powf(s));
        let pts = free_boundary(&trace, &grid, 0.0, 1e-12);
        assert_eq!(pts.len(), 1, "points {pts:?}");
        assert!(pts[0].abs() <= grid.hx / 2.0, "point {}", pts[0]);
        // constant trace: empty
        let one = ThinField::constant(grid.nx, 1.0);
        assert!(free_boundary(&one, &grid, 0.0, 1e-12).is_empty());
    }

    #[test]
    fn free_boundary_strict_crossing() {
        let grid = Grid::new(0.5, 1.0, 1.0, 101, 9).unwrap();
        let trace = ThinField::from_fn(&grid, |x| x - 0.137);
        let pts = free_boundary(&trace, &grid, 0.0, 1e-12);
        assert_eq!(pts.len(), 1);
        assert_relative_eq!(pts[0], 0.137, epsilon = 1e-12);
        // level variant
        let pts = free_boundary(&trace, &grid, 0.5, 1e-12);
        assert_relative_eq!(pts[0], 0.637, epsilon = 1e-12);
    }

    #[test]
    fn blowup_fit_recovers_profile_amplitude() {
        let s = 0.5;
        let amp = 2.2;
        let grid = Grid::new(s, 1.0, 1.0, 513, 257).unwrap();
        let u = Field::from_fn(&grid, |x, z| amp * profile_p(x, z, s));
        let fit =
            blowup_fit(&u, 0.0, &[0.8, 0.4, 0.2], None, (0.25, 0.75)).unwrap();
        assert_eq!(fit.orientation, 1);
        for (a, r) in fit.alphas.iter().zip(&fit.residuals) {
            assert_relative_eq!(*a, amp, max_relative = 2e-3);
            assert!(*r <= 2e-3, "residual {r}");
        }
    }

    #[test]
    fn blowup_fit_orientation_flip() {
        let s = 0.6;
        let amp = 1.3;
        let grid = Grid::new(s, 1.0, 1.0, 513, 257).unwrap();
        // mirrored profile: positivity on the left
        let u = Field::from_fn(&grid, |x, z| amp * profile_p(-x, z, s));
        let fit = blowup_fit(&u, 0.0, &[0.5, 0.25], None, (0.25, 0.75)).unwrap();
        assert_eq!(fit.orientation, -1);
        assert_relative_eq!(fit.alpha, amp, max_relative = 5e-3);
        assert!(blowup_fit(&u, 0.0, &[0.5], Some(2), (0.25, 0.75)).is_err());
        assert!(blowup_fit(&u, 0.9, &[0.5], None, (0.25, 0.75)).is_err());
    }

    #[test]
    fn blowup_fit_linear_perturbation_rate() {
        // u = amp P + c x1: the perturbation rescales like lambda^{1-s}, so
        // fitted alpha approaches amp at that rate
        let s = 0.5;
        let amp = 1.5;
        let c = 0.4;
        let grid = Grid::new(s, 1.0, 1.0, 1025, 513).unwrap();
        let u = Field::from_fn(&grid, |x, z| amp * profile_p(x, z, s) + c * x);
        let lambdas = [0.64, 0.32, 0.16, 0.08];
        let fit = blowup_fit(&u, 0.0, &lambdas, Some(1), (0.25, 0.75)).unwrap();
        let errs: Vec<f64> = fit.alphas.iter().map(|a| (a - amp).abs()).collect();
        // halving lambda halves the error at order 1 - s = 1/2: ratio ~ 2^{1/2}
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(
                (order - (1.0 - s)).abs() <= 0.2,
                "observed order {order}, errors {errs:?}"
            );
        }
    }

    #[test]
    fn rescaling_consistency_of_fit() {
        // fitting the analytically rescaled field at lambda equals fitting
        // the original at scaled lambda
        let s = 0.4;
        let amp = 1.1;
        let grid = Grid::new(s, 1.0, 1.0, 513, 257).unwrap();
        let u = Field::from_fn(&grid, |x, z| amp * profile_p(x, z, s));
        let lam0 = 0.5;
        let u_resc =
            Field::from_fn(&grid, |x, z| amp * profile_p(lam0 * x, lam0 * z, s) / lam0.powf(s));
        let f1 = blowup_fit(&u_resc, 0.0, &[0.4], Some(1), (0.25, 0.75)).unwrap();
        let f2 = blowup_fit(&u, 0.0, &[0.4 * lam0], Some(1), (0.25, 0.75)).unwrap();
        assert_relative_eq!(f1.alpha, f2.alpha, max_relative = 1e-3);
    }

    #[test]
    fn holder_seminorm_cases() {
        let s = 0.5;
        let grid = Grid::new(s, 1.0, 1.0, 129, 65).unwrap();
        let region = CompactRegion { x_min: -0.9, x_max: 0.9, z_min: 0.0, z_max: 0.9 };
        let uc = Field::constant(&grid, 3.0);
        assert_eq!(holder_seminorm(&uc, &region, s, 1_000_000, 1), 0.0);
        // profile: the sharp pairs sit on the trace near the tip; the
        // seminorm approaches 1 from below on {x1 >= 0}
        let up = Field::from_fn(&grid, |x, z| profile_p(x, z, s));
        let h = holder_seminorm(&up, &region, s, 10_000_000, 1);
        assert!(h <= 1.3, "seminorm {h}");
        assert!(h >= 0.9, "seminorm {h}");
        // capped path is deterministic
        let h1 = holder_seminorm(&up, &region, s, 10_000, 42);
        let h2 = holder_seminorm(&up, &region, s, 10_000, 42);
        assert_eq!(h1, h2);
    }

    #[test]
    fn nondegeneracy_of_profile_trace() {
        // scale invariance: value = 1 / (2 (1 + s)) at every radius
        for s in [0.3, 0.5, 0.75] {
            let grid = Grid::new(s, 1.0, 1.0, 2049, 9).unwrap();
            let trace = ThinField::from_fn(&grid, |x| x.max(0.0).powf(s));
            let vals = nondegeneracy(&trace, &grid, 0.0, &[0.1, 0.2, 0.4]).unwrap();
            let exact = 1.0 / (2.0 * (1.0 + s));
            for v in &vals {
                assert_relative_eq!(*v, exact, max_relative = 1e-3);
            }
        }
        let grid = Grid::new(0.5, 1.0, 1.0, 65, 9).unwrap();
        let zero = ThinField::constant(grid.nx, 0.0);
        let vals = nondegeneracy(&zero, &grid, 0.0, &[0.1, 0.3]).unwrap();
        assert!(vals.iter().all(|v| *v == 0.0));
        assert!(nondegeneracy(&zero, &grid, 0.9, &[0.5]).is_err());
    }
}
