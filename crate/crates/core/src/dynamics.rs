//! Soliton dynamics: the four coupled systems for position, amplitude and
//! the corrective shelf field.
//!
//! Modes:
//!  - A: quadratic flux, shelf ahead of the soliton; amplitude driven by the
//!    shelf value at the soliton through the width closure.
//!  - B: quadratic flux, shelf behind; the conserved combination
//!    g + 2 u0(phi, t) closes the system, the shelf is slaved and receives
//!    boundary values emitted at the soliton path.
//!  - C: general flux, shelf ahead; the profile mass evolves through the
//!    shelf value, profiles re-solved from the traveling-wave problem.
//!  - D: general flux with dispersion, shelf behind; the squared-profile
//!    moment constraint fixes the amplitude, boundary values are emitted.
//!
//! The shelf e(x, t) satisfies e_t + (f'(u0) e)_x = 0 in its region. Its
//! characteristics coincide with the background characteristics and carry
//! constant u0, so transport is evaluated in closed form: an initial-data
//! record arrives as e0(xi)/J(xi, t), a boundary record emitted at time s
//! as e_b(s) J(xi_s, s)/J(xi_s, t), with J the characteristic-map Jacobian.
//! The field is stored as this fan of records, never on a grid.

use thiserror::Error;

use crate::hopf::{Background, HopfError};
use crate::mollifiers::Mollifier;
use crate::profiles::{profile_summary, ProfileError};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("soliton amplitude collapsed to {0} (must stay positive)")]
    AmplitudeCollapse(f64),
    #[error(transparent)]
    Background(#[from] HopfError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("profile mass is insensitive to the amplitude (jacobian {0:e})")]
    SingularJacobian(f64),
    #[error("moment-constraint projection failed to converge (residual {0:e})")]
    ConstraintNewtonFail(f64),
    #[error("query point x = {x} lies outside the shelf region at t = {t}")]
    QueryOutsideRegion { x: f64, t: f64 },
    #[error(transparent)]
    Kernel(#[from] crate::mollifiers::MollifierError),
    #[error("shelf initial value {init} at the corner does not match the emitted value {emitted}")]
    IncompatibleCorner { init: f64, emitted: f64 },
    #[error("mode {0:?} requires the quadratic flux")]
    QuadraticFluxRequired(Mode),
    #[error("end time {t_end} reaches the breaking time {breaking}")]
    BeyondBreakingTime { t_end: f64, breaking: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    A,
    B,
    C,
    D,
}

impl Mode {
    pub fn shelf_region(self) -> Region {
        match self {
            Mode::A | Mode::C => Region::Ahead,
            Mode::B | Mode::D => Region::Behind,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Ahead,
    Behind,
}

/// Width closure alpha(g) for the peak profile in mode A.
#[derive(Clone, Copy, Debug)]
pub enum WidthClosure {
    /// alpha = sqrt(g/6): the dispersive traveling-wave closure.
    SqrtG6,
    Fixed(f64),
}

impl WidthClosure {
    pub fn alpha(&self, g: f64) -> f64 {
        match *self {
            WidthClosure::SqrtG6 => (g / 6.0).sqrt(),
            WidthClosure::Fixed(a) => a,
        }
    }

    pub fn dalpha_dg(&self, g: f64) -> f64 {
        match *self {
            WidthClosure::SqrtG6 => 0.5 / (6.0 * g).sqrt(),
            WidthClosure::Fixed(_) => 0.0,
        }
    }

    /// d/dg [ g / alpha(g) ].
    fn mass_scale_slope(&self, g: f64) -> f64 {
        let a = self.alpha(g);
        (a - g * self.dalpha_dg(g)) / (a * a)
    }
}

/// Initial shelf data on the mode's side of the soliton.
#[derive(Clone, Debug, PartialEq)]
pub enum ShelfInit {
    Zero,
    Bump { amp: f64, center: f64, width: f64 },
}

impl ShelfInit {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ShelfInit::Zero => 0.0,
            ShelfInit::Bump { amp, center, width } => {
                let s = (x - center) / width;
                amp * (-s * s).exp()
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            ShelfInit::Zero => 0.0,
            ShelfInit::Bump { amp, center, width } => {
                let s = (x - center) / width;
                -2.0 * amp * s / width * (-s * s).exp()
            }
        }
    }
}

/// One accepted step of the soliton state.
#[derive(Clone, Copy, Debug)]
pub struct SolitonState {
    pub t: f64,
    pub phi: f64,
    pub g: f64,
    pub phi_t: f64,
    pub g_t: f64,
    /// Background value at the soliton.
    pub u0_at_phi: f64,
    /// d/dt of the background along the soliton path.
    pub u0_slope: f64,
    /// Shelf boundary value emitted here (modes B/D) or the transported
    /// shelf value arriving at the soliton (modes A/C).
    pub e_at_phi: f64,
}

/// Integrated soliton trajectory plus the shelf fan attached to it.
#[derive(Clone, Debug)]
pub struct Trajectory {
    mode: Mode,
    background: Background,
    init: ShelfInit,
    kernel_mass: f64,
    kernel_square: f64,
    width: WidthClosure,
    nodes: Vec<SolitonState>,
    step: f64,
    conserved: Option<f64>,
    /// Endpoint movement under step halving (position, amplitude).
    pub step_check: (f64, f64),
    /// Corner mismatch |e_init(phi0) - e_b(0)| when the mode emits.
    pub corner_mismatch: Option<f64>,
    /// min over accepted steps of phi_t - f'(u0(phi)).
    pub min_speed_margin: f64,
}

impl Trajectory {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn shelf_init(&self) -> &ShelfInit {
        &self.init
    }

    pub fn width_closure(&self) -> WidthClosure {
        self.width
    }

    pub fn nodes(&self) -> &[SolitonState] {
        &self.nodes
    }

    pub fn t_end(&self) -> f64 {
        self.nodes.last().map(|n| n.t).unwrap_or(0.0)
    }

    pub fn conserved(&self) -> Option<f64> {
        self.conserved
    }

    fn bracket(&self, t: f64) -> (usize, f64) {
        let h = self.step;
        let idx = ((t - self.nodes[0].t) / h).floor() as isize;
        let i = idx.clamp(0, self.nodes.len() as isize - 2) as usize;
        let s = ((t - self.nodes[i].t) / h).clamp(0.0, 1.0);
        (i, s)
    }

    fn hermite(&self, t: f64, value: impl Fn(&SolitonState) -> f64, slope: impl Fn(&SolitonState) -> f64) -> f64 {
        if self.nodes.len() == 1 {
            return value(&self.nodes[0]);
        }
        let (i, s) = self.bracket(t);
        let h = self.step;
        let (n0, n1) = (&self.nodes[i], &self.nodes[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        value(n0) * (2.0 * s3 - 3.0 * s2 + 1.0)
            + slope(n0) * h * (s3 - 2.0 * s2 + s)
            + value(n1) * (-2.0 * s3 + 3.0 * s2)
            + slope(n1) * h * (s3 - s2)
    }

    fn hermite_slope(&self, t: f64, value: impl Fn(&SolitonState) -> f64, slope: impl Fn(&SolitonState) -> f64) -> f64 {
        if self.nodes.len() == 1 {
            return slope(&self.nodes[0]);
        }
        let (i, s) = self.bracket(t);
        let h = self.step;
        let (n0, n1) = (&self.nodes[i], &self.nodes[i + 1]);
        let s2 = s * s;
        (value(n0) * (6.0 * s2 - 6.0 * s)
            + slope(n0) * h * (3.0 * s2 - 4.0 * s + 1.0)
            + value(n1) * (-6.0 * s2 + 6.0 * s)
            + slope(n1) * h * (3.0 * s2 - 2.0 * s))
            / h
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.hermite(t, |n| n.phi, |n| n.phi_t)
    }

    pub fn g(&self, t: f64) -> f64 {
        self.hermite(t, |n| n.g, |n| n.g_t)
    }

    pub fn phi_t(&self, t: f64) -> f64 {
        self.hermite_slope(t, |n| n.phi, |n| n.phi_t)
    }

    pub fn g_t(&self, t: f64) -> f64 {
        self.hermite_slope(t, |n| n.g, |n| n.g_t)
    }

    /// Background value along the soliton path, interpolated with the chain
    /// rule slope.
    fn u0_on_path(&self, s: f64) -> f64 {
        self.hermite(s, |n| n.u0_at_phi, |n| n.u0_slope)
    }

    fn trace_slope_at(&self, j: usize) -> f64 {
        let h = self.step;
        if j == 0 {
            (self.nodes[1].e_at_phi - self.nodes[0].e_at_phi) / h
        } else if j + 1 == self.nodes.len() {
            (self.nodes[j].e_at_phi - self.nodes[j - 1].e_at_phi) / h
        } else {
            (self.nodes[j + 1].e_at_phi - self.nodes[j - 1].e_at_phi) / (2.0 * h)
        }
    }

    /// Shelf value along the soliton path: the emitted boundary value for
    /// modes B/D, the transported arrival value for modes A/C. Interpolated
    /// with centered-difference slopes at the nodes.
    pub fn shelf_trace(&self, s: f64) -> f64 {
        if self.nodes.len() == 1 {
            return self.nodes[0].e_at_phi;
        }
        let (i, u) = self.bracket(s);
        let h = self.step;
        let (y0, y1) = (self.nodes[i].e_at_phi, self.nodes[i + 1].e_at_phi);
        let (m0, m1) = (self.trace_slope_at(i) * h, self.trace_slope_at(i + 1) * h);
        let u2 = u * u;
        let u3 = u2 * u;
        y0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + m0 * (u3 - 2.0 * u2 + u)
            + y1 * (-2.0 * u3 + 3.0 * u2)
            + m1 * (u3 - u2)
    }

    /// d/dt of [`shelf_trace`](Self::shelf_trace).
    pub fn shelf_trace_deriv(&self, s: f64) -> f64 {
        if self.nodes.len() == 1 {
            return 0.0;
        }
        let (i, u) = self.bracket(s);
        let h = self.step;
        let (y0, y1) = (self.nodes[i].e_at_phi, self.nodes[i + 1].e_at_phi);
        let (m0, m1) = (self.trace_slope_at(i) * h, self.trace_slope_at(i + 1) * h);
        let u2 = u * u;
        (y0 * (6.0 * u2 - 6.0 * u)
            + m0 * (3.0 * u2 - 4.0 * u + 1.0)
            + y1 * (-6.0 * u2 + 6.0 * u)
            + m1 * (3.0 * u2 - 2.0 * u))
            / h
    }

    fn boundary_value(&self, s: f64) -> f64 {
        self.shelf_trace(s)
    }

    /// Shelf field evaluation at (x, t) inside the mode's region.
    pub fn shelf(&self, x: f64, t: f64) -> Result<f64, DynamicsError> {
        let phi = self.phi(t);
        let region = self.mode.shelf_region();
        match region {
            Region::Ahead => {
                if x < phi - 1e-9 * (1.0 + phi.abs()) {
                    return Err(DynamicsError::QueryOutsideRegion { x, t });
                }
                self.initial_record(x, t)
            }
            Region::Behind => {
                if x > phi + 1e-9 * (1.0 + phi.abs()) {
                    return Err(DynamicsError::QueryOutsideRegion { x, t });
                }
                let bf = &self.background;
                let phi0 = self.nodes[0].phi;
                let sep = phi0 + bf.flux().d1(self.nodes[0].u0_at_phi) * t;
                if x <= sep {
                    return self.initial_record(x, t);
                }
                // Wedge: find the emission time by bisection on the straight
                // characteristic from the soliton path.
                let pos = |s: f64| {
                    let ps = self.phi(s);
                    let us = self.u0_on_path(s);
                    ps + bf.flux().d1(us) * (t - s)
                };
                let (mut lo, mut hi) = (0.0, t);
                for _ in 0..90 {
                    let mid = 0.5 * (lo + hi);
                    if pos(mid) < x {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 * (1.0 + t) {
                        break;
                    }
                }
                let s = 0.5 * (lo + hi);
                let us = self.u0_on_path(s);
                let xi = self.phi(s) - bf.flux().d1(us) * s;
                let num = bf.jacobian_at_foot(xi, s);
                let den = bf.jacobian_at_foot(xi, t);
                Ok(self.boundary_value(s) * num / den)
            }
        }
    }

    fn initial_record(&self, x: f64, t: f64) -> Result<f64, DynamicsError> {
        let xi = self.background.foot(x, t)?;
        Ok(self.init.eval(xi) / self.background.jacobian_at_foot(xi, t))
    }

    /// Whether x sits on the shelf's side of the soliton at time t.
    pub fn shelf_side(&self, x: f64, t: f64) -> bool {
        let phi = self.phi(t);
        match self.mode.shelf_region() {
            Region::Ahead => x >= phi,
            Region::Behind => x <= phi,
        }
    }

    /// Shelf extended continuously across the soliton by its path trace;
    /// the step factor of the ansatz suppresses the extension side.
    pub fn shelf_extended(&self, x: f64, t: f64) -> f64 {
        if self.shelf_side(x, t) {
            self.shelf(x, t).unwrap_or(0.0)
        } else {
            self.shelf_trace(t)
        }
    }

    /// Conserved-combination residual g + 2 u0(phi) - K at a node time
    /// (modes B/D with quadratic flux; zero by construction elsewhere).
    pub fn conserved_residual(&self, t: f64) -> f64 {
        match self.conserved {
            Some(k) => {
                let phi = self.phi(t);
                let u0 = self.background.eval(phi, t).unwrap_or(f64::NAN);
                self.g(t) + 2.0 * u0 - k
            }
            None => 0.0,
        }
    }
}

/// Fixed-step fourth-order Runge-Kutta over a 2-vector state.
fn rk4_path<F>(
    mut state: [f64; 2],
    t0: f64,
    t_end: f64,
    steps: usize,
    mut rhs: F,
) -> Result<(Vec<(f64, [f64; 2], [f64; 2])>, [f64; 2]), DynamicsError>
where
    F: FnMut(f64, [f64; 2]) -> Result<[f64; 2], DynamicsError>,
{
    let h = (t_end - t0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut deriv = rhs(t0, state)?;
    out.push((t0, state, deriv));
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = deriv;
        let k2 = rhs(
            t + 0.5 * h,
            [state[0] + 0.5 * h * k1[0], state[1] + 0.5 * h * k1[1]],
        )?;
        let k3 = rhs(
            t + 0.5 * h,
            [state[0] + 0.5 * h * k2[0], state[1] + 0.5 * h * k2[1]],
        )?;
        let k4 = rhs(t + h, [state[0] + h * k3[0], state[1] + h * k3[1]])?;
        state = [
            state[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            state[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        let t_next = t0 + (k + 1) as f64 * h;
        deriv = rhs(t_next, state)?;
        out.push((t_next, state, deriv));
    }
    Ok((out, state))
}

fn check_horizon(bf: &Background, t_end: f64) -> Result<(), DynamicsError> {
    let breaking = bf.breaking_time();
    if t_end >= breaking {
        return Err(DynamicsError::BeyondBreakingTime { t_end, breaking });
    }
    Ok(())
}

/// Shelf value ahead of the soliton from initial data only.
fn shelf_ahead_value(
    bf: &Background,
    init: &ShelfInit,
    x: f64,
    t: f64,
) -> Result<f64, DynamicsError> {
    let xi = bf.foot(x, t)?;
    Ok(init.eval(xi) / bf.jacobian_at_foot(xi, t))
}

/// Mode A: quadratic flux, shelf ahead, amplitude fed by the shelf value at
/// the soliton through the width closure.
pub fn integrate_mode_a(
    bf: &Background,
    kernel: &Mollifier,
    width: WidthClosure,
    g0: f64,
    phi0: f64,
    e_init: &ShelfInit,
    t_end: f64,
    steps: usize,
) -> Result<Trajectory, DynamicsError> {
    if !bf.flux().is_quadratic() {
        return Err(DynamicsError::QuadraticFluxRequired(Mode::A));
    }
    if g0 <= 0.0 {
        return Err(DynamicsError::AmplitudeCollapse(g0));
    }
    check_horizon(bf, t_end)?;
    let m1 = kernel.moment(1)?;
    let m2 = kernel.moment(2)?;
    let speed_ratio = m2 / m1;
    let shelf_gain = m2 / (m1 * m1);

    let rhs = |t: f64, y: [f64; 2]| -> Result<[f64; 2], DynamicsError> {
        let (phi, g) = (y[0], y[1]);
        if g <= 0.0 {
            return Err(DynamicsError::AmplitudeCollapse(g));
        }
        let u0 = bf.eval(phi, t)?;
        let phi_t = 2.0 * u0 + speed_ratio * g;
        let e = shelf_ahead_value(bf, e_init, phi, t)?;
        let g_t = shelf_gain * g * e / width.mass_scale_slope(g);
        Ok([phi_t, g_t])
    };

    let (path, end) = rk4_path([phi0, g0], 0.0, t_end, steps, rhs)?;
    let (_, end_half) = rk4_path([phi0, g0], 0.0, t_end, 2 * steps, rhs)?;
    let step_check = ((end[0] - end_half[0]).abs(), (end[1] - end_half[1]).abs());

    build_trajectory(
        Mode::A,
        bf,
        e_init,
        m1,
        m2,
        width,
        path,
        (t_end) / steps as f64,
        None,
        step_check,
        None,
    )
}

/// Mode B: quadratic flux, shelf behind, closed by the conserved
/// combination K = g0 + 2 u0(phi0, 0). The position equation reduces to
/// phi_t = (2/3)(K + u0(phi, t)) after substituting g = K - 2 u0(phi, t)
/// into phi_t = 2 u0 + (2/3) g.
pub fn integrate_mode_b(
    bf: &Background,
    g0: f64,
    phi0: f64,
    e_init: &ShelfInit,
    t_end: f64,
    steps: usize,
    strict_corner: bool,
) -> Result<Trajectory, DynamicsError> {
    if !bf.flux().is_quadratic() {
        return Err(DynamicsError::QuadraticFluxRequired(Mode::B));
    }
    if g0 <= 0.0 {
        return Err(DynamicsError::AmplitudeCollapse(g0));
    }
    check_horizon(bf, t_end)?;
    let k = g0 + 2.0 * bf.eval(phi0, 0.0)?;

    let rhs = |t: f64, y: [f64; 2]| -> Result<[f64; 2], DynamicsError> {
        let phi = y[0];
        let u0 = bf.eval(phi, t)?;
        let g = k - 2.0 * u0;
        if g <= 0.0 {
            return Err(DynamicsError::AmplitudeCollapse(g));
        }
        Ok([(2.0 / 3.0) * (k + u0), 0.0])
    };

    let (path, end) = rk4_path([phi0, 0.0], 0.0, t_end, steps, rhs)?;
    let (_, end_half) = rk4_path([phi0, 0.0], 0.0, t_end, 2 * steps, rhs)?;
    let step_check = ((end[0] - end_half[0]).abs(), 0.0);

    let traj = build_trajectory(
        Mode::B,
        bf,
        e_init,
        2.0,
        4.0 / 3.0,
        WidthClosure::SqrtG6,
        path,
        t_end / steps as f64,
        Some(k),
        step_check,
        None,
    )?;

    let emitted = traj.nodes[0].e_at_phi;
    let init_at_corner = e_init.eval(phi0);
    let mismatch = (emitted - init_at_corner).abs();
    if mismatch > 1e-8 * (1.0 + emitted.abs()) {
        if strict_corner {
            return Err(DynamicsError::IncompatibleCorner {
                init: init_at_corner,
                emitted,
            });
        }
        let mut traj = traj;
        traj.corner_mismatch = Some(mismatch);
        return Ok(traj);
    }
    Ok(traj)
}

/// Mode C: general flux, shelf ahead. The profile-mass balance drives the
/// amplitude; jacobians of the mass in (amplitude, background) come from
/// central differences over the profile solver.
pub fn integrate_mode_c(
    bf: &Background,
    a0: f64,
    phi0: f64,
    e_init: &ShelfInit,
    t_end: f64,
    steps: usize,
) -> Result<Trajectory, DynamicsError> {
    if a0 <= 0.0 {
        return Err(DynamicsError::AmplitudeCollapse(a0));
    }
    check_horizon(bf, t_end)?;
    let flux = bf.flux().clone();

    let rhs = |t: f64, y: [f64; 2]| -> Result<[f64; 2], DynamicsError> {
        let (phi, a) = (y[0], y[1]);
        if a <= 0.0 {
            return Err(DynamicsError::AmplitudeCollapse(a));
        }
        let (u0, u0x) = bf.eval_with_dx(phi, t)?;
        let s = profile_summary(&flux, u0, a)?;
        let mass = s.moments.mass;
        let phi_t = s.averages.excess / mass;
        let du0_dt = (phi_t - flux.d1(u0)) * u0x;
        let (dmass_da, dmass_du) = mass_jacobian(&flux, u0, a)?;
        if dmass_da.abs() < 1e-10 {
            return Err(DynamicsError::SingularJacobian(dmass_da));
        }
        let e = shelf_ahead_value(bf, e_init, phi, t)?;
        let a_t = -(dmass_du * du0_dt + (flux.d1(u0) - phi_t) * e) / dmass_da;
        Ok([phi_t, a_t])
    };

    let (path, end) = rk4_path([phi0, a0], 0.0, t_end, steps, rhs)?;
    let (_, end_half) = rk4_path([phi0, a0], 0.0, t_end, 2 * steps, rhs)?;
    let step_check = ((end[0] - end_half[0]).abs(), (end[1] - end_half[1]).abs());

    build_trajectory(
        Mode::C,
        bf,
        e_init,
        0.0,
        0.0,
        WidthClosure::SqrtG6,
        path,
        t_end / steps as f64,
        None,
        step_check,
        None,
    )
}

/// Mode D: general flux with dispersion, shelf behind. The amplitude is
/// pinned per step by the squared-moment constraint
/// d(square)/dt + 2 mass d(u0 at phi)/dt = 0, enforced with a Newton
/// projection on its trapezoidal form.
pub fn integrate_mode_d(
    bf: &Background,
    a0: f64,
    phi0: f64,
    e_init: &ShelfInit,
    t_end: f64,
    steps: usize,
) -> Result<Trajectory, DynamicsError> {
    if a0 <= 0.0 {
        return Err(DynamicsError::AmplitudeCollapse(a0));
    }
    check_horizon(bf, t_end)?;
    let flux = bf.flux().clone();

    let rhs = |t: f64, y: [f64; 2]| -> Result<[f64; 2], DynamicsError> {
        let (phi, a) = (y[0], y[1]);
        if a <= 0.0 {
            return Err(DynamicsError::AmplitudeCollapse(a));
        }
        let (u0, u0x) = bf.eval_with_dx(phi, t)?;
        let s = profile_summary(&flux, u0, a)?;
        let mass = s.moments.mass;
        let phi_t = s.averages.excess / mass;
        let du0_dt = (phi_t - flux.d1(u0)) * u0x;
        let (dsq_da, dsq_du) = square_jacobian(&flux, u0, a)?;
        if dsq_da.abs() < 1e-10 {
            return Err(DynamicsError::SingularJacobian(dsq_da));
        }
        let a_t = -(dsq_du + 2.0 * mass) * du0_dt / dsq_da;
        Ok([phi_t, a_t])
    };

    // RK4 march with a per-step Newton projection back onto the constraint.
    let h = t_end / steps as f64;
    let mut states = Vec::with_capacity(steps + 1);
    let mut y = [phi0, a0];
    states.push((0.0, y, rhs(0.0, y)?));
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = rhs(t, y)?;
        let k2 = rhs(t + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]])?;
        let k3 = rhs(t + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]])?;
        let k4 = rhs(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]])?;
        let mut next = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        let t_next = t + h;
        next[1] = project_constraint(&flux, bf, y, next, t, t_next)?;
        y = next;
        states.push((t_next, y, rhs(t_next, y)?));
    }

    // Step-halving check on the endpoint.
    let mut yh = [phi0, a0];
    let h2 = 0.5 * h;
    for k in 0..(2 * steps) {
        let t = k as f64 * h2;
        let k1 = rhs(t, yh)?;
        let k2 = rhs(t + 0.5 * h2, [yh[0] + 0.5 * h2 * k1[0], yh[1] + 0.5 * h2 * k1[1]])?;
        let k3 = rhs(t + 0.5 * h2, [yh[0] + 0.5 * h2 * k2[0], yh[1] + 0.5 * h2 * k2[1]])?;
        let k4 = rhs(t + h2, [yh[0] + h2 * k3[0], yh[1] + h2 * k3[1]])?;
        let mut next = [
            yh[0] + h2 / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            yh[1] + h2 / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        next[1] = project_constraint(&flux, bf, yh, next, t, t + h2)?;
        yh = next;
    }
    let step_check = ((y[0] - yh[0]).abs(), (y[1] - yh[1]).abs());

    let conserved = if flux.is_quadratic() {
        Some(states[0].1[1] + 2.0 * bf.eval(phi0, 0.0)?)
    } else {
        None
    };
    build_trajectory(
        Mode::D,
        bf,
        e_init,
        0.0,
        0.0,
        WidthClosure::SqrtG6,
        states,
        h,
        conserved,
        step_check,
        None,
    )
}

fn project_constraint(
    flux: &crate::flux::Flux,
    bf: &Background,
    prev: [f64; 2],
    predicted: [f64; 2],
    t_prev: f64,
    t_next: f64,
) -> Result<f64, DynamicsError> {
    let u_prev = bf.eval(prev[0], t_prev)?;
    let u_next = bf.eval(predicted[0], t_next)?;
    let s_prev = profile_summary(flux, u_prev, prev[1])?;
    let mut a = predicted[1];
    let scale = 1.0 + s_prev.moments.square.abs();
    let mut residual = f64::INFINITY;
    for _ in 0..40 {
        let s = profile_summary(flux, u_next, a)?;
        residual = s.moments.square - s_prev.moments.square
            + (s.moments.mass + s_prev.moments.mass) * (u_next - u_prev);
        if residual.abs() <= 1e-13 * scale {
            return Ok(a);
        }
        let da = 1e-6 * a.max(1e-3);
        let sp = profile_summary(flux, u_next, a + da)?;
        let sm = profile_summary(flux, u_next, a - da)?;
        let slope = (sp.moments.square - sm.moments.square) / (2.0 * da)
            + (sp.moments.mass - sm.moments.mass) / (2.0 * da) * (u_next - u_prev);
        if slope.abs() < 1e-14 {
            break;
        }
        a -= residual / slope;
        if a <= 0.0 {
            return Err(DynamicsError::AmplitudeCollapse(a));
        }
    }
    if residual.abs() <= 1e-10 * scale {
        Ok(a)
    } else {
        Err(DynamicsError::ConstraintNewtonFail(residual))
    }
}

fn mass_jacobian(
    flux: &crate::flux::Flux,
    u0: f64,
    a: f64,
) -> Result<(f64, f64), DynamicsError> {
    let da = 1e-5 * a.max(0.1);
    let du = 1e-5 * (1.0 + u0.abs());
    let m = |u: f64, amp: f64| -> Result<f64, DynamicsError> {
        Ok(profile_summary(flux, u, amp)?.moments.mass)
    };
    Ok((
        (m(u0, a + da)? - m(u0, a - da)?) / (2.0 * da),
        (m(u0 + du, a)? - m(u0 - du, a)?) / (2.0 * du),
    ))
}

fn square_jacobian(
    flux: &crate::flux::Flux,
    u0: f64,
    a: f64,
) -> Result<(f64, f64), DynamicsError> {
    let da = 1e-5 * a.max(0.1);
    let du = 1e-5 * (1.0 + u0.abs());
    let m = |u: f64, amp: f64| -> Result<f64, DynamicsError> {
        Ok(profile_summary(flux, u, amp)?.moments.square)
    };
    Ok((
        (m(u0, a + da)? - m(u0, a - da)?) / (2.0 * da),
        (m(u0 + du, a)? - m(u0 - du, a)?) / (2.0 * du),
    ))
}

#[allow(clippy::too_many_arguments)]
fn build_trajectory(
    mode: Mode,
    bf: &Background,
    e_init: &ShelfInit,
    kernel_mass: f64,
    kernel_square: f64,
    width: WidthClosure,
    path: Vec<(f64, [f64; 2], [f64; 2])>,
    step: f64,
    mut conserved: Option<f64>,
    step_check: (f64, f64),
    corner_mismatch: Option<f64>,
) -> Result<Trajectory, DynamicsError> {
    let mut nodes = Vec::with_capacity(path.len());
    let mut min_margin = f64::INFINITY;
    // Mode B stores the conserved combination before this call.
    if mode == Mode::B {
        debug_assert!(conserved.is_some());
    }
    for &(t, y, dy) in &path {
        let phi = y[0];
        let (u0, u0x) = bf.eval_with_dx(phi, t)?;
        let (g, g_t, phi_t) = match mode {
            Mode::B => {
                let k = conserved.unwrap();
                let g = k - 2.0 * u0;
                let phi_t = dy[0];
                let g_t = -2.0 * (phi_t - bf.flux().d1(u0)) * u0x;
                (g, g_t, phi_t)
            }
            _ => (y[1], dy[1], dy[0]),
        };
        if g <= 0.0 {
            return Err(DynamicsError::AmplitudeCollapse(g));
        }
        let u0_slope = (phi_t - bf.flux().d1(u0)) * u0x;
        let e_at_phi = match mode {
            Mode::A | Mode::C => shelf_ahead_value(bf, e_init, phi, t)?,
            Mode::B => -(1.5) * 6.0_f64.sqrt() * g_t / g.powf(1.5),
            Mode::D => {
                let s = profile_summary(bf.flux(), u0, g)?;
                let (dm_da, dm_du) = mass_jacobian(bf.flux(), u0, g)?;
                let mass_t = dm_da * g_t + dm_du * u0_slope;
                let denom = bf.flux().d1(u0) - s.averages.excess / s.moments.mass;
                mass_t / denom
            }
        };
        min_margin = min_margin.min(phi_t - bf.flux().d1(u0));
        nodes.push(SolitonState {
            t,
            phi,
            g,
            phi_t,
            g_t,
            u0_at_phi: u0,
            e_at_phi,
            u0_slope,
        });
    }
    if mode != Mode::B && mode != Mode::D {
        conserved = None;
    }
    Ok(Trajectory {
        mode,
        background: bf.clone(),
        init: e_init.clone(),
        kernel_mass,
        kernel_square,
        width,
        nodes,
        step,
        conserved,
        step_check,
        corner_mismatch,
        min_speed_margin: min_margin,
    })
}

impl Trajectory {
    pub fn kernel_moments(&self) -> (f64, f64) {
        (self.kernel_mass, self.kernel_square)
    }
}
