use thinfb_core::closed_forms::{alpha_matched, profile_p};
use thinfb_core::grid::Field;
use thinfb_core::limit::{blowup_fit, continuation, free_boundary, CompactRegion};
use thinfb_core::reaction::ReactionProfile;
use thinfb_core::solver::{BoundarySpec, ProblemParams};
use std::time::Instant;

fn headline(s: f64, tilt: f64) {
    let mass = 1.0;
    let amp = alpha_matched(s, mass).unwrap();
    let l = 2.0;
    let mk = |nx: usize, nz: usize| -> ProblemParams {
        let mut p = ProblemParams {
            s, eps: 0.2,
            reaction: ReactionProfile::poly6(mass).unwrap(),
            l, h: 1.2, nx, nz,
            boundary: BoundarySpec::Constant(0.0),
            residual_tol: 1e-8, max_iter: 200, damping_floor: 1e-6,
        };
        let grid = p.grid().unwrap();
        let g = grid.as_ref();
        let mut vals = vec![0.0; g.node_count()];
        for j in 0..g.nz {
            for i in 0..g.nx {
                let (x, z) = (g.x(i), g.z(j));
                vals[g.idx(i, j)] = amp * profile_p(x, z, s) * (1.0 + tilt * (x / l));
            }
        }
        p.boundary = BoundarySpec::Values(vals);
        p
    };
    let base = mk(512, 256);
    let compact = CompactRegion { x_min: -0.5, x_max: 0.5, z_min: 0.0, z_max: 0.5 };
    let t0 = Instant::now();
    // seed with the profile field ourselves since boundary is Values
    let grid = base.grid().unwrap();
    let seed = Field::from_fn(&grid, |x, z| amp * profile_p(x, z, s));
    let schur = thinfb_core::solver::SchurSolver::new(&grid);
    let mut fields = Vec::new();
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let mut p = base.clone();
        p.eps = eps;
        let init = fields.last().or(Some(&seed));
        let (u, rep) = thinfb_core::solver::solve_with(&p, init, &schur).unwrap();
        assert!(rep.converged, "eps={eps} residual {}", rep.final_residual);
        fields.push(u);
    }
    let _ = (&continuation, &compact);
    let last = fields.last().unwrap();
    let mut p = base.clone();
    p.eps = 0.025;
    let fbe = free_boundary(&last.trace(), &last.grid, p.eps, 1e-12);
    let x0 = fbe[0];
    let lams: Vec<f64> = (0..6).map(|i| 0.6 * 0.75f64.powi(i)).collect();
    let fit = blowup_fit(last, x0, &lams, None, (0.25, 0.75)).unwrap();
    println!("s={s} tilt={tilt}: x0={x0:.4} alphas {:?}", fit.alphas);
    println!("  residuals {:?}", fit.residuals);
    println!("  alpha={:.4} vs matched {amp:.4} ({:+.1}%) [{:.1?}]", fit.alpha, 100.0*(fit.alpha/amp - 1.0), t0.elapsed());
}

fn main() {
    headline(0.5, 0.15);
    headline(0.75, 0.15);
}
