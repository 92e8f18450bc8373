//! Traveling-wave soliton profiles for general flux.
//!
//! The profile w(tau) of a solitary wave moving at speed c on background u0
//! solves -c w' + [f(u0 + w)]' + w''' = 0 with decay at infinity. One
//! integration gives w'' = -V'(w) with the well potential
//!
//!   V(w) = int_0^w [f(u0 + z) - f(u0)] dz - (c/2) w^2,
//!
//! and the homoclinic orbit satisfies (1/2) (w')^2 + V(w) = 0. Everything
//! here is built on that first integral: the amplitude is the first positive
//! root of V, the shape comes from quadrature of dtau = -dw / sqrt(-2V),
//! and moments and flux averages are evaluated in w-space where the
//! integrands are smooth after an endpoint substitution.
//!
//! V is expanded around the background exactly (the flux is polynomial), so
//! small-w evaluations do not lose digits to cancellation.

use thiserror::Error;

use crate::flux::Flux;
use crate::quad::{self, QuadError};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("soliton amplitude must be positive (got {0})")]
    NonPositiveAmplitude(f64),
    #[error("potential has no admissible positive turning point")]
    NoSoliton,
    #[error("turning point is a double root (V' = {0:e}); borderline localized solution")]
    DegenerateRoot(f64),
    #[error("well curvature at the origin is nonnegative; tail does not decay")]
    TailDivergence,
    #[error("turning point {found} does not match requested amplitude {requested}")]
    AmplitudeMismatch { requested: f64, found: f64 },
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
}

/// Well potential of the profile equation, stored as an exact expansion
/// around the background value.
#[derive(Clone, Debug)]
pub struct Potential {
    flux: Flux,
    u0_val: f64,
    speed: f64,
    /// Coefficients e_k of V'(w) = sum_{k>=1} e_k w^k (index 0 <-> k = 1).
    dv_coeffs: Vec<f64>,
}

/// Shifted expansion: coefficients p_k of f(u0 + w) = sum_k p_k w^k.
fn taylor_shift(flux: &Flux, u0: f64) -> Vec<f64> {
    let c = flux.coeffs();
    let n = c.len();
    let mut p = vec![0.0; n];
    // Horner-style shift: repeatedly divide by (w) after substituting u = u0 + w.
    // Equivalent to p_k = sum_j binom(j, k) c_j u0^(j-k), done stably in place.
    let mut work = c.to_vec();
    for k in 0..n {
        // Evaluate and deflate at u0.
        let mut acc = 0.0;
        for j in (k..n).rev() {
            acc = acc * u0 + work[j];
            work[j] = acc;
        }
        p[k] = work[k];
        // After this pass work[k..] holds the deflated polynomial with the
        // remainder in work[k]; the next pass starts one slot higher.
    }
    p
}

impl Potential {
    pub fn new(flux: &Flux, u0_val: f64, speed: f64) -> Self {
        let p = taylor_shift(flux, u0_val);
        let mut dv: Vec<f64> = p.iter().copied().skip(1).collect();
        if dv.is_empty() {
            dv.push(0.0);
        }
        dv[0] -= speed;
        Potential {
            flux: flux.clone(),
            u0_val,
            speed,
            dv_coeffs: dv,
        }
    }

    pub fn flux(&self) -> &Flux {
        &self.flux
    }

    pub fn background(&self) -> f64 {
        self.u0_val
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// V(w); exactly zero with zero slope at w = 0.
    pub fn eval(&self, w: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &e) in self.dv_coeffs.iter().enumerate().rev() {
            acc = acc * w + e / (i as f64 + 2.0);
        }
        acc * w * w
    }

    /// V'(w) = f(u0 + w) - f(u0) - c w.
    pub fn d1(&self, w: f64) -> f64 {
        let mut acc = 0.0;
        for &e in self.dv_coeffs.iter().rev() {
            acc = acc * w + e;
        }
        acc * w
    }

    /// V''(w) = f'(u0 + w) - c.
    pub fn d2(&self, w: f64) -> f64 {
        self.flux.d1(self.u0_val + w) - self.speed
    }

    /// Admissibility curvature V''(0) = f'(u0) - c; a soliton needs it negative.
    pub fn curvature_at_origin(&self) -> f64 {
        self.dv_coeffs[0]
    }

    /// Factored radicand -2 V(w) = w^2 (A - w) D(w) for the homoclinic orbit
    /// with turning point `amplitude`. The root at the turning point is
    /// deflated out of the polynomial, so the square root loses no digits at
    /// either end of the well.
    pub fn radicand(&self, amplitude: f64) -> Radicand {
        // -2 V = w^2 P(w) with p_j = -2 e_{j+1} / (j + 2).
        let p: Vec<f64> = self
            .dv_coeffs
            .iter()
            .enumerate()
            .map(|(i, &e)| -2.0 * e / (i as f64 + 2.0))
            .collect();
        // Synthetic division P(w) = (w - A) Q(w) + P(A); D = -Q.
        let n = p.len();
        let mut d = vec![0.0; n.saturating_sub(1).max(1)];
        if n >= 2 {
            let mut acc = p[n - 1];
            for j in (1..n).rev() {
                d[j - 1] = -acc;
                acc = p[j - 1] + amplitude * acc;
            }
        } else {
            // Linear P: constant well (quadratic flux); P = p0 (A - w) / ...
            // cannot happen since dv always has the curvature slot, but keep
            // a sane fallback.
            d[0] = 0.0;
        }
        Radicand {
            amplitude,
            coeffs: d,
        }
    }
}

/// Cancellation-free evaluator of -2 V(w) on the homoclinic well.
#[derive(Clone, Debug)]
pub struct Radicand {
    amplitude: f64,
    coeffs: Vec<f64>,
}

impl Radicand {
    /// -2 V(w), factored as w^2 (A - w) D(w).
    pub fn eval(&self, w: f64) -> f64 {
        let mut d = 0.0;
        for &c in self.coeffs.iter().rev() {
            d = d * w + c;
        }
        w * w * (self.amplitude - w) * d
    }

    /// |w'| = sqrt(-2V(w)) on the orbit.
    pub fn speed(&self, w: f64) -> f64 {
        self.eval(w).max(0.0).sqrt()
    }

    /// Deflated factor D(w) of -2V = w^2 (A - w) D(w).
    pub fn deflated(&self, w: f64) -> f64 {
        let mut d = 0.0;
        for &c in self.coeffs.iter().rev() {
            d = d * w + c;
        }
        d
    }

    /// Integrand of int h dtau after the substitution w = A - s^2 near the
    /// turning point: the jacobian 2s cancels the root, leaving
    /// 2 h(w) / (w sqrt(D(w))).
    fn peak_weight(&self, w: f64) -> f64 {
        let d = self.deflated(w);
        if d <= 0.0 || w <= 0.0 {
            return 0.0;
        }
        2.0 / (w * d.sqrt())
    }
}

/// Build the well potential for flux `f`, background `u0_val` and wave
/// speed `c`, with the integration constant fixed so V(0) = V'(0) = 0.
pub fn build_potential(flux: &Flux, u0_val: f64, speed: f64) -> Potential {
    Potential::new(flux, u0_val, speed)
}

/// Smallest positive simple root of V: the soliton amplitude.
pub fn find_turning_point(p: &Potential) -> Result<f64, ProfileError> {
    // Geometric scan for the first sign change of V from the well outward.
    let mut lo = 1e-9;
    if p.eval(lo) >= 0.0 {
        // No negative well right of the origin.
        return Err(ProfileError::NoSoliton);
    }
    let mut hi = lo;
    let mut found = false;
    while hi < 1e9 {
        let next = hi * 1.1;
        if p.eval(next) >= 0.0 {
            lo = hi;
            hi = next;
            found = true;
            break;
        }
        hi = next;
    }
    if !found {
        return Err(ProfileError::NoSoliton);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p.eval(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + hi) {
            break;
        }
    }
    let mut root = 0.5 * (lo + hi);
    let slope = p.d1(root);
    if slope.abs() < 1e-10 {
        return Err(ProfileError::DegenerateRoot(slope));
    }
    // Newton polish to the rounding floor.
    for _ in 0..3 {
        let d = p.d1(root);
        if d.abs() < 1e-14 {
            break;
        }
        root -= p.eval(root) / d;
    }
    Ok(root)
}

/// Profile moments: integrals of powers of the shape and of its squared
/// slope over the whole line.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProfileMoments {
    /// int w dtau
    pub mass: f64,
    /// int w^2 dtau
    pub square: f64,
    /// int w^3 dtau
    pub cube: f64,
    /// int (w_tau)^2 dtau
    pub grad_energy: f64,
}

/// Nonlinear flux averages over the profile.
#[derive(Clone, Copy, Debug, Default)]
pub struct FluxAverages {
    /// int [f(u0+w) - f(u0)] dtau
    pub excess: f64,
    /// Same with the entropy flux 2uf - 2 int_0^u f.
    pub entropy_excess: f64,
    /// Same with the primitive int_0^u f.
    pub primitive_excess: f64,
    /// int [f(u0+w) - f(u0)] w dtau
    pub weighted_excess: f64,
    /// int (w_tau)^2 dtau (duplicated here for the identity checks)
    pub grad_energy: f64,
}

#[derive(Clone, Debug)]
enum Shape {
    /// amplitude * sech^2(alpha tau), the quadratic-flux closure.
    ClosedForm { alpha: f64 },
    /// Monotone branch tabulated from the quadrature of dtau = -dw/sqrt(-2V),
    /// mirrored evenly; cubic Hermite with first-integral slopes at the knots.
    Tabulated {
        tau: Vec<f64>,
        w: Vec<f64>,
        slope: Vec<f64>,
        tau_cut: f64,
        w_cut: f64,
        kappa: f64,
    },
}

/// A solved traveling-wave profile: even shape peaked at tau = 0, its
/// moments, and the flux averages entering the dynamics systems. All in the
/// unscaled co-moving variable tau = (x - phi)/eps with the amplitude folded
/// into the shape.
#[derive(Clone, Debug)]
pub struct SolitonProfile {
    shape: Shape,
    amplitude: f64,
    speed: f64,
    u0_val: f64,
    potential: Potential,
    radicand: Radicand,
    moments: ProfileMoments,
    averages: FluxAverages,
}

impl SolitonProfile {
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn background(&self) -> f64 {
        self.u0_val
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn moments(&self) -> &ProfileMoments {
        &self.moments
    }

    pub fn averages(&self) -> &FluxAverages {
        &self.averages
    }

    /// Shape value w(tau) (even in tau, peak at 0).
    pub fn shape(&self, tau: f64) -> f64 {
        match &self.shape {
            Shape::ClosedForm { alpha } => {
                let s = sech(alpha * tau);
                self.amplitude * s * s
            }
            Shape::Tabulated {
                tau: knots,
                w,
                slope,
                tau_cut,
                w_cut,
                kappa,
            } => {
                let a = tau.abs();
                if a >= *tau_cut {
                    return w_cut * (-kappa * (a - tau_cut)).exp();
                }
                let i = match knots.binary_search_by(|v| v.partial_cmp(&a).unwrap()) {
                    Ok(i) => i.min(knots.len() - 2),
                    Err(i) => i.saturating_sub(1).min(knots.len() - 2),
                };
                let h = knots[i + 1] - knots[i];
                let t = (a - knots[i]) / h;
                hermite(w[i], w[i + 1], slope[i] * h, slope[i + 1] * h, t)
            }
        }
    }

    /// w'(tau), from the closed form or the first integral.
    pub fn shape_d1(&self, tau: f64) -> f64 {
        match &self.shape {
            Shape::ClosedForm { alpha } => {
                let s = sech(alpha * tau);
                -2.0 * self.amplitude * alpha * s * s * (alpha * tau).tanh()
            }
            Shape::Tabulated { .. } => {
                let w = self.shape(tau);
                let v = self.radicand.speed(w);
                if tau >= 0.0 {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// w''(tau) = -V'(w).
    pub fn shape_d2(&self, tau: f64) -> f64 {
        -self.potential.d1(self.shape(tau))
    }

    /// w'''(tau) = -V''(w) w'.
    pub fn shape_d3(&self, tau: f64) -> f64 {
        -self.potential.d2(self.shape(tau)) * self.shape_d1(tau)
    }
}

fn sech(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * (t3 - 2.0 * t2 + t)
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * (t3 - t2)
}

/// Closed-form quadratic-flux profile g sech^2(sqrt(g/6) tau) on background
/// `u0_val`; speed 2 u0 + (2/3) g. Moments in closed form.
pub fn kdv_profile(g: f64, u0_val: f64) -> Result<SolitonProfile, ProfileError> {
    if g <= 0.0 {
        return Err(ProfileError::NonPositiveAmplitude(g));
    }
    let alpha = (g / 6.0).sqrt();
    let speed = 2.0 * u0_val + 2.0 * g / 3.0;
    let flux = Flux::quadratic();
    let potential = Potential::new(&flux, u0_val, speed);
    let radicand = potential.radicand(g);
    let sqrt6 = 6.0_f64.sqrt();
    let moments = ProfileMoments {
        mass: 2.0 * sqrt6 * g.sqrt(),
        square: (4.0 / 3.0) * sqrt6 * g.powf(1.5),
        cube: (16.0 / 15.0) * sqrt6 * g.powf(2.5),
        grad_energy: (16.0 / 15.0) / sqrt6 * g.powf(2.5),
    };
    let mut profile = SolitonProfile {
        shape: Shape::ClosedForm { alpha },
        amplitude: g,
        speed,
        u0_val,
        potential,
        radicand,
        moments,
        averages: FluxAverages::default(),
    };
    profile.averages = profile_functionals(&profile, &flux)?;
    Ok(profile)
}

/// w-space integral 2 int_0^A h(w) / sqrt(-2V(w)) dw with the turning-point
/// substitution w = A - s^2 on the upper half.
fn line_integral<H: Fn(f64) -> f64>(
    rad: &Radicand,
    h: H,
    tol: f64,
) -> Result<f64, ProfileError> {
    let a = rad.amplitude;
    let split = 0.5 * a;
    let upper = quad::integrate(
        |s: f64| {
            let w = a - s * s;
            h(w) * rad.peak_weight(w)
        },
        0.0,
        (a - split).sqrt(),
        tol,
    )?;
    let lower = quad::integrate(
        |w: f64| {
            let v = rad.speed(w);
            if v == 0.0 {
                return 0.0;
            }
            h(w) / v
        },
        0.0,
        split,
        tol,
    )?;
    Ok(2.0 * (upper + lower))
}

/// Flux averages and gradient energy of a profile, by quadrature in w-space.
/// The integrands use the exact shifted expansions, so the near-zero tail
/// costs no precision.
pub fn profile_functionals(
    profile: &SolitonProfile,
    flux: &Flux,
) -> Result<FluxAverages, ProfileError> {
    averages_over(&profile.potential, profile.amplitude, flux)
}

fn averages_over(p: &Potential, a: f64, flux: &Flux) -> Result<FluxAverages, ProfileError> {
    let u0 = p.background();
    let rad = p.radicand(a);
    let tol = 1e-13 * (1.0 + a);

    let shifted = taylor_shift(flux, u0);
    let excess = |w: f64| {
        let mut acc = 0.0;
        for &c in shifted.iter().skip(1).rev() {
            acc = acc * w + c;
        }
        acc * w
    };
    let entropy = flux_entropy_coeffs(flux);
    let entropy_shifted = taylor_shift(&entropy, u0);
    let entropy_excess = |w: f64| {
        let mut acc = 0.0;
        for &c in entropy_shifted.iter().skip(1).rev() {
            acc = acc * w + c;
        }
        acc * w
    };
    let primitive = flux_primitive_coeffs(flux);
    let primitive_shifted = taylor_shift(&primitive, u0);
    let primitive_excess = |w: f64| {
        let mut acc = 0.0;
        for &c in primitive_shifted.iter().skip(1).rev() {
            acc = acc * w + c;
        }
        acc * w
    };

    let grad_energy = 2.0
        * quad::integrate(
            |s: f64| {
                let w = a - s * s;
                2.0 * s * rad.speed(w)
            },
            0.0,
            (0.5 * a).sqrt(),
            tol,
        )?
        + 2.0 * quad::integrate(|w: f64| rad.speed(w), 0.0, 0.5 * a, tol)?;

    Ok(FluxAverages {
        excess: line_integral(&rad, &excess, tol)?,
        entropy_excess: line_integral(&rad, &entropy_excess, tol)?,
        primitive_excess: line_integral(&rad, &primitive_excess, tol)?,
        weighted_excess: line_integral(&rad, |w| excess(w) * w, tol)?,
        grad_energy,
    })
}

/// Moments and averages of the amplitude-`amplitude` profile without
/// tabulating the shape; the light path for dynamics right-hand sides.
#[derive(Clone, Debug)]
pub struct ProfileSummary {
    pub speed: f64,
    pub amplitude: f64,
    pub moments: ProfileMoments,
    pub averages: FluxAverages,
}

pub fn profile_summary(
    flux: &Flux,
    u0_val: f64,
    amplitude: f64,
) -> Result<ProfileSummary, ProfileError> {
    if amplitude <= 0.0 {
        return Err(ProfileError::NonPositiveAmplitude(amplitude));
    }
    let speed = speed_for_amplitude(flux, u0_val, amplitude);
    let potential = Potential::new(flux, u0_val, speed);
    if potential.curvature_at_origin() >= 0.0 {
        return Err(ProfileError::TailDivergence);
    }
    let found = find_turning_point(&potential)?;
    if (found - amplitude).abs() > 1e-8 * amplitude {
        return Err(ProfileError::AmplitudeMismatch {
            requested: amplitude,
            found,
        });
    }
    let tol = 1e-13 * (1.0 + amplitude);
    let rad = potential.radicand(amplitude);
    let averages = averages_over(&potential, amplitude, flux)?;
    let moments = ProfileMoments {
        mass: line_integral(&rad, |w| w, tol)?,
        square: line_integral(&rad, |w| w * w, tol)?,
        cube: line_integral(&rad, |w| w * w * w, tol)?,
        grad_energy: averages.grad_energy,
    };
    Ok(ProfileSummary {
        speed,
        amplitude,
        moments,
        averages,
    })
}

fn flux_entropy_coeffs(flux: &Flux) -> Flux {
    // q(u) = 2 u f(u) - 2 int_0^u f: q_{k+1} = 2 c_k k / (k+1).
    let c = flux.coeffs();
    let mut q = vec![0.0; c.len() + 1];
    for (k, &ck) in c.iter().enumerate() {
        q[k + 1] = 2.0 * ck * k as f64 / (k as f64 + 1.0);
    }
    Flux::new(q)
}

fn flux_primitive_coeffs(flux: &Flux) -> Flux {
    let c = flux.coeffs();
    let mut q = vec![0.0; c.len() + 1];
    for (k, &ck) in c.iter().enumerate() {
        q[k + 1] = ck / (k as f64 + 1.0);
    }
    Flux::new(q)
}

/// Wave speed for which the profile of `flux` on background `u0_val` has
/// turning point exactly `amplitude`: c = (2/A^2) int_0^A [f(u0+z)-f(u0)] dz.
pub fn speed_for_amplitude(flux: &Flux, u0_val: f64, amplitude: f64) -> f64 {
    let p = taylor_shift(flux, u0_val);
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate().skip(1).rev() {
        acc = acc * amplitude + 2.0 * pk / (k as f64 + 1.0);
    }
    acc
}

/// Solve the profile boundary-value problem for general flux.
pub fn solve_profile(flux: &Flux, u0_val: f64, speed: f64) -> Result<SolitonProfile, ProfileError> {
    let potential = Potential::new(flux, u0_val, speed);
    if potential.curvature_at_origin() >= 0.0 {
        return Err(ProfileError::TailDivergence);
    }
    let amplitude = find_turning_point(&potential)?;
    build_profile(flux, potential, amplitude)
}

/// Solve for a requested amplitude, with the speed eliminated through the
/// turning-point relation. Errors if the resulting potential puts a smaller
/// root below the requested amplitude.
pub fn solve_profile_by_amplitude(
    flux: &Flux,
    u0_val: f64,
    amplitude: f64,
) -> Result<SolitonProfile, ProfileError> {
    if amplitude <= 0.0 {
        return Err(ProfileError::NonPositiveAmplitude(amplitude));
    }
    let speed = speed_for_amplitude(flux, u0_val, amplitude);
    let potential = Potential::new(flux, u0_val, speed);
    if potential.curvature_at_origin() >= 0.0 {
        return Err(ProfileError::TailDivergence);
    }
    let found = find_turning_point(&potential)?;
    if (found - amplitude).abs() > 1e-8 * amplitude {
        return Err(ProfileError::AmplitudeMismatch {
            requested: amplitude,
            found,
        });
    }
    build_profile(flux, potential, amplitude)
}

fn build_profile(
    flux: &Flux,
    potential: Potential,
    amplitude: f64,
) -> Result<SolitonProfile, ProfileError> {
    let a = amplitude;
    let speed = potential.speed();
    let u0 = potential.background();
    let kappa = (-potential.curvature_at_origin()).sqrt();
    let rad = potential.radicand(a);

    // Knot ladder in w: uniform in s = sqrt(A - w) near the peak, geometric
    // toward the tail, cut at 1e-13 of the amplitude.
    let n_peak = 800;
    let n_tail = 2900;
    let s_max = (0.5 * a).sqrt();
    let mut w_knots = Vec::with_capacity(n_peak + n_tail + 1);
    for i in 0..=n_peak {
        let s = s_max * i as f64 / n_peak as f64;
        w_knots.push(a - s * s);
    }
    let w_cut = 1e-13 * a;
    let ratio = (w_cut / (0.5 * a)).powf(1.0 / n_tail as f64);
    let mut w = 0.5 * a;
    for _ in 1..=n_tail {
        w *= ratio;
        w_knots.push(w);
    }

    // Cumulative tau over the knots; the first panel carries the
    // turning-point substitution w = A - s^2.
    let inv_speed = {
        let r = rad.clone();
        move |w: f64| {
            let v = r.speed(w);
            if v == 0.0 {
                0.0
            } else {
                1.0 / v
            }
        }
    };
    let peak_weight = {
        let r = rad.clone();
        move |w: f64| r.peak_weight(w)
    };
    let mut tau = Vec::with_capacity(w_knots.len());
    tau.push(0.0);
    let tol = 1e-13 * (1.0 + 1.0 / kappa);
    let mut acc = 0.0;
    for i in 1..w_knots.len() {
        let (hi, lo) = (w_knots[i - 1], w_knots[i]);
        let panel = if i <= n_peak {
            let s0 = (a - hi).max(0.0).sqrt();
            let s1 = (a - lo).sqrt();
            quad::integrate(|s: f64| peak_weight(a - s * s), s0, s1, tol)?
        } else {
            quad::integrate(&inv_speed, lo, hi, tol)?
        };
        acc += panel;
        tau.push(acc);
    }
    let slope: Vec<f64> = w_knots.iter().map(|&w| -rad.speed(w)).collect();

    let tol_m = 1e-13 * (1.0 + a);
    let moments = ProfileMoments {
        mass: line_integral(&rad, |w| w, tol_m)?,
        square: line_integral(&rad, |w| w * w, tol_m)?,
        cube: line_integral(&rad, |w| w * w * w, tol_m)?,
        grad_energy: 0.0,
    };
    let tau_cut = *tau.last().unwrap();
    let mut profile = SolitonProfile {
        shape: Shape::Tabulated {
            tau,
            w: w_knots,
            slope,
            tau_cut,
            w_cut,
            kappa,
        },
        amplitude: a,
        speed,
        u0_val: u0,
        potential,
        radicand: rad,
        moments,
        averages: FluxAverages::default(),
    };
    let averages = profile_functionals(&profile, flux)?;
    profile.moments.grad_energy = averages.grad_energy;
    profile.averages = averages;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_potential_closed_form() {
        // f = u^2, c = 2 u0 + (2/3) g: V = w^3/3 - (g/3) w^2 for any u0.
        let g = 1.3;
        for &u0 in &[0.0, 0.7] {
            let p = build_potential(&Flux::quadratic(), u0, 2.0 * u0 + 2.0 * g / 3.0);
            for &w in &[0.1, 0.5, 1.0, 1.8] {
                let want = w * w * w / 3.0 - g * w * w / 3.0;
                assert!((p.eval(w) - want).abs() < 1e-12, "u0={u0} w={w}");
            }
            assert!(p.eval(0.0) == 0.0 && p.d1(0.0) == 0.0);
        }
    }

    #[test]
    fn potential_small_w_no_cancellation() {
        let p = build_potential(&Flux::quadratic(), 0.4, 1.6);
        let w = 1e-9;
        // V ~ (1/2)(f'(u0) - c) w^2 = (1/2)(0.8 - 1.6) w^2, plus w^3/3.
        let want = -0.4 * w * w + w * w * w / 3.0;
        assert!(((p.eval(w) - want) / want).abs() < 1e-12);
    }

    #[test]
    fn turning_point_quadratic_flux() {
        let g = 0.9;
        let p = build_potential(&Flux::quadratic(), 0.0, 2.0 * g / 3.0);
        // Analytic factorization oracle: V = w^2 (w - g) / 3.
        let wmax = find_turning_point(&p).unwrap();
        assert!((wmax - g).abs() < 1e-10);
    }

    #[test]
    fn turning_point_cubic_flux() {
        // f = u^3, u0 = 0: V = w^4/4 - c w^2 / 2, root at sqrt(2c).
        let c = 0.8;
        let p = build_potential(&Flux::cubic(), 0.0, c);
        let wmax = find_turning_point(&p).unwrap();
        assert!((wmax - (2.0 * c).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn linear_flux_has_no_soliton() {
        // f = u with c > 1: V = (1-c) w^2/2 < 0 everywhere, no return to zero.
        let p = build_potential(&Flux::new(vec![0.0, 1.0]), 0.0, 2.0);
        assert!(matches!(find_turning_point(&p), Err(ProfileError::NoSoliton)));
        // And with no negative well at all (c < f'(u0)):
        let p = build_potential(&Flux::quadratic(), 1.0, 0.5);
        assert!(matches!(find_turning_point(&p), Err(ProfileError::NoSoliton)));
    }

    #[test]
    fn solved_profile_matches_closed_form_shape() {
        let g = 1.0;
        let sol = solve_profile(&Flux::quadratic(), 0.0, 2.0 * g / 3.0).unwrap();
        assert!((sol.amplitude() - g).abs() < 1e-10);
        let alpha = (g / 6.0_f64).sqrt();
        let mut worst: f64 = 0.0;
        let mut tau = -10.0;
        while tau <= 10.0 {
            let s = sech(alpha * tau);
            worst = worst.max((sol.shape(tau) - g * s * s).abs());
            tau += 0.0137;
        }
        assert!(worst <= 1e-6, "sup-norm distance {worst}");
    }

    #[test]
    fn solved_profile_first_integral_residual() {
        for (flux, c) in [
            (Flux::quadratic(), 2.0 / 3.0),
            (Flux::cubic(), 0.8),
            (Flux::quadratic_cubic(0.1), 0.9),
        ] {
            let sol = solve_profile(&flux, 0.0, c).unwrap();
            let p = sol.potential();
            let mut worst: f64 = 0.0;
            let h = 1e-3;
            let mut tau = 0.0;
            while tau <= 12.0 {
                // Five-point stencil: independent of the stored knot slopes.
                let d = (-sol.shape(tau + 2.0 * h) + 8.0 * sol.shape(tau + h)
                    - 8.0 * sol.shape(tau - h)
                    + sol.shape(tau - 2.0 * h))
                    / (12.0 * h);
                worst = worst.max((0.5 * d * d + p.eval(sol.shape(tau))).abs());
                tau += 0.173;
            }
            assert!(worst <= 1e-8, "first-integral residual {worst}");
        }
    }

    #[test]
    fn cubic_profile_amplitude_consistency() {
        let c = 0.8;
        let sol = solve_profile(&Flux::cubic(), 0.0, c).unwrap();
        assert!((sol.amplitude() - (2.0 * c).sqrt()).abs() < 1e-10);
        assert!((sol.shape(0.0) - sol.amplitude()).abs() < 1e-10);
    }

    #[test]
    fn kdv_profile_closed_moments() {
        let g = 1.7;
        let p = kdv_profile(g, 0.0).unwrap();
        let sqrt6 = 6.0_f64.sqrt();
        assert!((p.moments().mass - 2.0 * sqrt6 * g.sqrt()).abs() < 1e-12);
        assert!((p.speed() - 2.0 * g / 3.0).abs() < 1e-14);
        assert!(kdv_profile(-1.0, 0.0).is_err());
    }

    #[test]
    fn solved_moments_match_kdv_closed_forms() {
        let g = 1.25;
        let u0 = 0.3;
        let exact = kdv_profile(g, u0).unwrap();
        let solved = solve_profile(&Flux::quadratic(), u0, exact.speed()).unwrap();
        let (em, sm) = (exact.moments(), solved.moments());
        assert!((em.mass - sm.mass).abs() < 1e-6);
        assert!((em.square - sm.square).abs() < 1e-6);
        assert!((em.cube - sm.cube).abs() < 1e-6);
        assert!((em.grad_energy - sm.grad_energy).abs() < 1e-6);
    }

    #[test]
    fn functionals_quadratic_flux_monomials() {
        // f = u^2 at u0 = 0: excess = square moment, primitive excess = cube/3.
        let sol = solve_profile(&Flux::quadratic(), 0.0, 2.0 / 3.0).unwrap();
        let av = sol.averages();
        let m = sol.moments();
        assert!((av.excess - m.square).abs() < 1e-9);
        assert!((av.primitive_excess - m.cube / 3.0).abs() < 1e-9);
        assert!((av.weighted_excess - m.cube).abs() < 1e-9);
    }

    #[test]
    fn speed_consistency_and_energy_identities() {
        // c mass = excess; energy and virial identities; the entropy identity.
        for (flux, u0, c) in [
            (Flux::quadratic(), 0.0, 2.0 / 3.0),
            (Flux::quadratic(), 0.4, 2.0 * 0.4 + 0.5),
            (Flux::cubic(), 0.2, 3.0 * 0.04 + 0.9),
            (Flux::quadratic_cubic(0.1), 0.1, 1.0),
        ] {
            let sol = solve_profile(&flux, u0, c).unwrap();
            let m = sol.moments();
            let av = sol.averages();
            let f0 = flux.eval(u0);
            assert!(
                (c * m.mass - av.excess).abs() < 1e-7,
                "speed consistency for {flux}"
            );
            let energy = -c * m.square - 2.0 * f0 * m.mass
                + 2.0 * av.primitive_excess
                + m.grad_energy;
            assert!(energy.abs() < 1e-7, "energy identity {energy:e} for {flux}");
            let virial = -c * m.square + av.weighted_excess - m.grad_energy;
            assert!(virial.abs() < 1e-7, "virial identity {virial:e} for {flux}");
            let recombine = 2.0 * u0 * av.excess + 2.0 * f0 * m.mass
                + 2.0 * av.weighted_excess
                - 2.0 * av.primitive_excess;
            assert!(
                (av.entropy_excess - recombine).abs() < 1e-7,
                "entropy recombination for {flux}"
            );
        }
    }

    #[test]
    fn functionals_match_tau_space_oracle() {
        // Independent route: direct quadrature in tau using the tabulated shape.
        let sol = solve_profile(&Flux::quadratic_cubic(0.1), 0.2, 1.1).unwrap();
        let flux = Flux::quadratic_cubic(0.1);
        let u0 = 0.2;
        let f0 = flux.eval(u0);
        let oracle = quad::integrate(
            |tau: f64| flux.eval(u0 + sol.shape(tau)) - f0,
            -60.0,
            60.0,
            1e-11,
        )
        .unwrap();
        assert!((sol.averages().excess - oracle).abs() < 1e-8);
    }

    #[test]
    fn amplitude_parametrization_round_trip() {
        let flux = Flux::quadratic_cubic(0.2);
        let sol = solve_profile_by_amplitude(&flux, 0.1, 0.8).unwrap();
        assert!((sol.amplitude() - 0.8).abs() < 1e-9);
        // Quadratic check: c(A) = 2 u0 + (2/3) A.
        let c = speed_for_amplitude(&Flux::quadratic(), 0.3, 0.9);
        assert!((c - (0.6 + 0.6)).abs() < 1e-12);
    }

    #[test]
    fn tail_divergence_detected() {
        assert!(matches!(
            solve_profile(&Flux::quadratic(), 1.0, 1.0),
            Err(ProfileError::TailDivergence)
        ));
    }
}
