//! Weak-residual pairings of the smooth ansatz against test bumps.
//!
//! The pairings are evaluated in the distributional form with every spatial
//! derivative moved onto the test function:
//!
//!   <L[u], psi>  = int u_t psi - int f(u) psi' - eps^2 int u psi'''
//!   <uL[u], psi> = int (u^2)_t psi - int q(u) psi'
//!                  + eps^2 [ 3 int (u_x)^2 psi' - int u^2 psi''' ]
//!
//! with q the entropy flux paired with u^2. Only u, u_t and u_x of the
//! ansatz are needed pointwise. Panels pin the peak core (at least 40 nodes
//! across ten widths each side), the shelf seam and the soliton position.

use crate::flux::Flux;
use crate::quad;

use super::ansatz::SmoothAnsatz;
use super::bank::TestBump;
use super::VerifyError;

/// Operator selection for the residual: the flux and whether the
/// third-derivative dispersion term is present.
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    pub flux: Flux,
    pub dispersive: bool,
}

impl OperatorSpec {
    /// u_t + (u^2)_x, no dispersion.
    pub fn hopf() -> Self {
        OperatorSpec {
            flux: Flux::quadratic(),
            dispersive: false,
        }
    }

    /// u_t + (u^2)_x + eps^2 u_xxx.
    pub fn kdv() -> Self {
        OperatorSpec {
            flux: Flux::quadratic(),
            dispersive: true,
        }
    }

    pub fn general(flux: Flux, dispersive: bool) -> Self {
        OperatorSpec { flux, dispersive }
    }
}

/// Integration panel edges: test-function support subdivided, with extra
/// edges pinning the peak core and the shelf seam.
fn panel_edges(u: &SmoothAnsatz, testfn: &TestBump, t: f64) -> Vec<f64> {
    let (lo, hi) = testfn.support();
    let mut edges = vec![lo, hi];
    let base = 12;
    for k in 1..base {
        edges.push(lo + (hi - lo) * k as f64 / base as f64);
    }
    let traj = u.trajectory();
    let phi = traj.phi(t);
    let w = u.eps() / u.core_scale(t).max(1e-9);
    for m in [-10.0, -5.0, -2.5, -1.0, -0.5, 0.0, 0.5, 1.0, 2.5, 5.0, 10.0] {
        edges.push(phi + m * w);
    }
    // Shelf seam: last initial characteristic behind the soliton.
    let n0 = &traj.nodes()[0];
    let sep = n0.phi + traj.background().flux().d1(n0.u0_at_phi) * t;
    edges.push(sep);
    edges.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * (1.0 + a.abs()));
    edges
}

fn pair_tol<F: Fn(f64) -> f64>(integrand: &F, edges: &[f64]) -> f64 {
    let (lo, hi) = (edges[0], *edges.last().unwrap());
    let mut scale: f64 = 0.0;
    for k in 0..=32 {
        let x = lo + (hi - lo) * k as f64 / 32.0;
        scale = scale.max(integrand(x).abs());
    }
    (1e-12 * scale * (hi - lo)).max(1e-300)
}

/// <L[u*](., t), psi> for the selected operator.
pub fn residual_pairing(
    u: &SmoothAnsatz,
    op: &OperatorSpec,
    testfn: &TestBump,
    t: f64,
) -> Result<f64, VerifyError> {
    let edges = panel_edges(u, testfn, t);
    if edges.len() < 2 {
        return Ok(0.0);
    }
    let eps2 = u.eps() * u.eps();
    let integrand = |x: f64| {
        let ut = u.dt(x, t).unwrap_or(f64::NAN);
        let val = u.eval(x, t);
        let mut r = ut * testfn.eval(x) - op.flux.eval(val) * testfn.d1(x);
        if op.dispersive {
            r -= eps2 * val * testfn.d3(x);
        }
        r
    };
    let tol = pair_tol(&integrand, &edges);
    Ok(quad::integrate_panels(integrand, &edges, tol)?)
}

/// <u* L[u*](., t), psi> scaled as the second conservation law
/// (u^2)_t + (q(u))_x + 2 eps^2 u u_xxx.
pub fn entropy_pairing(
    u: &SmoothAnsatz,
    op: &OperatorSpec,
    testfn: &TestBump,
    t: f64,
) -> Result<f64, VerifyError> {
    let edges = panel_edges(u, testfn, t);
    if edges.len() < 2 {
        return Ok(0.0);
    }
    let eps2 = u.eps() * u.eps();
    let integrand = |x: f64| {
        let val = u.eval(x, t);
        let ut = u.dt(x, t).unwrap_or(f64::NAN);
        let mut r = 2.0 * val * ut * testfn.eval(x) - op.flux.entropy_flux(val) * testfn.d1(x);
        if op.dispersive {
            let ux = u.dx(x, t);
            r += eps2 * (3.0 * ux * ux * testfn.d1(x) - val * val * testfn.d3(x));
        }
        r
    };
    let tol = pair_tol(&integrand, &edges);
    Ok(quad::integrate_panels(integrand, &edges, tol)?)
}
