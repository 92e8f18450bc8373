//! Approximation kernels.
//!
//! A [`Mollifier`] is a smooth kernel omega(z) generating the narrow-peak
//! approximation (1/eps) omega(x/eps) and, through its cumulative integral,
//! a smeared step [`HeavisideApprox`]. The module computes kernel moments
//! int omega^n, the gradient moment int (omega')^2, and the nonlinear
//! average int [f(u0 + w(tau)) - f(u0)] dtau that drives the soliton
//! dynamics for general flux.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::quad::{self, QuadError};

pub type Shape = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum MollifierError {
    #[error("moment of order {0} is not guaranteed to converge for this decay class")]
    NonIntegrable(u32),
    #[error("kernel mass is {0}, expected 1 (normalize first)")]
    NotNormalized(f64),
    #[error("integrand fails the (1+|z|)^-3 decay check (ratio {0:.3e} at z = {1})")]
    DecayCheck(f64, f64),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
}

/// How fast the kernel falls off; controls quadrature truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayClass {
    /// Identically zero outside a finite support interval.
    Compact,
    /// Bounded by C (1+|z|)^-3 (exponential kernels included).
    Rapid,
    /// Algebraic ~ z^-2 tails; moments handled by the tangent substitution.
    /// The first moment converges, but only as the normalization itself.
    Cauchy,
}

/// Step-function orientation: `Plus` smears theta(x) (1 far ahead),
/// `Minus` smears theta(-x) (1 far behind).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Plus,
    Minus,
}

#[derive(Clone)]
pub struct Mollifier {
    name: String,
    shape: Shape,
    dshape: Option<Shape>,
    decay: DecayClass,
    support: Option<(f64, f64)>,
    cache: Arc<Mutex<HashMap<u32, f64>>>,
}

impl std::fmt::Debug for Mollifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mollifier")
            .field("name", &self.name)
            .field("decay", &self.decay)
            .field("support", &self.support)
            .finish()
    }
}

impl Mollifier {
    pub fn from_shape(
        name: &str,
        shape: Shape,
        dshape: Option<Shape>,
        decay: DecayClass,
        support: Option<(f64, f64)>,
    ) -> Self {
        Mollifier {
            name: name.to_string(),
            shape,
            dshape,
            decay,
            support,
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    /// Unit-mass sech^2 kernel: omega(z) = sech^2(z) / 2.
    pub fn sech2() -> Self {
        Mollifier::from_shape(
            "sech2",
            Arc::new(|z: f64| {
                let s = sech(z);
                0.5 * s * s
            }),
            Some(Arc::new(|z: f64| {
                let s = sech(z);
                -s * s * z.tanh()
            })),
            DecayClass::Rapid,
            None,
        )
    }

    /// Raw sech^2 traveling-wave kernel (mass 2). This is the shape the
    /// dispersive profile closure uses, amplitude folded in elsewhere.
    pub fn sech2_kernel() -> Self {
        Mollifier::from_shape(
            "sech2_kernel",
            Arc::new(|z: f64| {
                let s = sech(z);
                s * s
            }),
            Some(Arc::new(|z: f64| {
                let s = sech(z);
                -2.0 * s * s * z.tanh()
            })),
            DecayClass::Rapid,
            None,
        )
    }

    /// Unit-mass Gaussian of standard deviation `sigma`.
    pub fn gaussian(sigma: f64) -> Self {
        assert!(sigma > 0.0, "sigma must be positive");
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let s2 = sigma * sigma;
        Mollifier::from_shape(
            &format!("gaussian({sigma})"),
            Arc::new(move |z: f64| norm * (-0.5 * z * z / s2).exp()),
            Some(Arc::new(move |z: f64| {
                -norm * z / s2 * (-0.5 * z * z / s2).exp()
            })),
            DecayClass::Rapid,
            None,
        )
    }

    /// Unit-mass compactly supported bump ~ exp(-1/(1-z^2)) on (-1, 1).
    pub fn bump() -> Self {
        let raw = |z: f64| {
            if z.abs() >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - z * z)).exp()
            }
        };
        // Normalize by quadrature once; the value is cached in the closure.
        let mass = quad::integrate(raw, -1.0, 1.0, 1e-14).expect("bump mass");
        let norm = 1.0 / mass;
        Mollifier::from_shape(
            "bump",
            Arc::new(move |z: f64| norm * raw(z)),
            Some(Arc::new(move |z: f64| {
                if z.abs() >= 1.0 {
                    0.0
                } else {
                    let r = 1.0 - z * z;
                    norm * raw(z) * (-2.0 * z / (r * r))
                }
            })),
            DecayClass::Compact,
            Some((-1.0, 1.0)),
        )
    }

    /// Cauchy kernel 1/(pi (1+z^2)). Slow algebraic decay; admitted for
    /// the harmonic smoothing preset even though it misses the cubic
    /// decay bound the remainder estimates assume.
    pub fn cauchy() -> Self {
        let pi = std::f64::consts::PI;
        Mollifier::from_shape(
            "cauchy",
            Arc::new(move |z: f64| 1.0 / (pi * (1.0 + z * z))),
            Some(Arc::new(move |z: f64| {
                let d = 1.0 + z * z;
                -2.0 * z / (pi * d * d)
            })),
            DecayClass::Cauchy,
            None,
        )
    }

    /// Preset lookup by name, as used in scenario configs.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "sech2" => Some(Self::sech2()),
            "sech2_kernel" => Some(Self::sech2_kernel()),
            "gaussian" => Some(Self::gaussian(1.0)),
            "bump" => Some(Self::bump()),
            "cauchy" => Some(Self::cauchy()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn decay_class(&self) -> DecayClass {
        self.decay
    }

    pub fn eval(&self, z: f64) -> f64 {
        (self.shape)(z)
    }

    pub fn shape_handle(&self) -> Shape {
        self.shape.clone()
    }

    /// Kernel derivative; analytic for presets, five-point stencil otherwise.
    pub fn deriv(&self, z: f64) -> f64 {
        match &self.dshape {
            Some(d) => d(z),
            None => {
                let h = 1e-4;
                let f = &self.shape;
                (-f(z + 2.0 * h) + 8.0 * f(z + h) - 8.0 * f(z - h) + f(z - 2.0 * h)) / (12.0 * h)
            }
        }
    }

    /// Rescaled kernel alpha * omega(alpha z); preserves mass.
    pub fn scaled(&self, alpha: f64) -> Self {
        assert!(alpha > 0.0);
        let shape = self.shape.clone();
        let dshape = self.dshape.clone();
        Mollifier {
            name: format!("{}@{alpha}", self.name),
            shape: Arc::new(move |z: f64| alpha * shape(alpha * z)),
            dshape: dshape
                .map(|d| -> Shape { Arc::new(move |z: f64| alpha * alpha * d(alpha * z)) }),
            decay: self.decay,
            support: self.support.map(|(a, b)| (a / alpha, b / alpha)),
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    /// Copy rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self, MollifierError> {
        let mass = self.moment(1)?;
        let shape = self.shape.clone();
        let dshape = self.dshape.clone();
        let inv = 1.0 / mass;
        Ok(Mollifier {
            name: format!("{}/norm", self.name),
            shape: Arc::new(move |z: f64| inv * shape(z)),
            dshape: dshape.map(|d| -> Shape { Arc::new(move |z: f64| inv * d(z)) }),
            decay: self.decay,
            support: self.support,
            cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    /// Truncation radius where the rapid-class tail drops below 1e-14
    /// (capped at the default window [-50, 50]).
    fn truncation_radius(&self) -> f64 {
        let mut r = 4.0;
        while r < 50.0 {
            if self.eval(r).abs() < 1e-14
                && self.eval(-r).abs() < 1e-14
                && self.eval(1.25 * r).abs() < 1e-14
                && self.eval(-1.25 * r).abs() < 1e-14
            {
                return 1.25 * r;
            }
            r *= 1.25;
        }
        50.0
    }

    /// Moment int omega^n(z) dz, memoized per order.
    pub fn moment(&self, n: u32) -> Result<f64, MollifierError> {
        if n == 0 {
            return Err(MollifierError::NonIntegrable(0));
        }
        if let Some(&v) = self.cache.lock().unwrap().get(&n) {
            return Ok(v);
        }
        let shape = &self.shape;
        let f = |z: f64| shape(z).powi(n as i32);
        let v = match self.decay {
            DecayClass::Compact => {
                let (a, b) = self.support.unwrap_or((-1.0, 1.0));
                quad::integrate(f, a, b, 1e-12)?
            }
            DecayClass::Rapid => {
                let r = self.truncation_radius();
                quad::integrate_panels(f, &[-r, -r / 4.0, 0.0, r / 4.0, r], 1e-12)?
            }
            DecayClass::Cauchy => quad::integrate_line_tan(f, 1.0, 1e-12)?,
        };
        self.cache.lock().unwrap().insert(n, v);
        Ok(v)
    }

    /// Gradient moment int (omega'(z))^2 dz.
    pub fn grad_moment(&self) -> Result<f64, MollifierError> {
        let f = |z: f64| {
            let d = self.deriv(z);
            d * d
        };
        let v = match self.decay {
            DecayClass::Compact => {
                let (a, b) = self.support.unwrap_or((-1.0, 1.0));
                quad::integrate(f, a, b, 1e-12)?
            }
            DecayClass::Rapid => {
                let r = self.truncation_radius();
                quad::integrate_panels(f, &[-r, -r / 4.0, 0.0, r / 4.0, r], 1e-12)?
            }
            DecayClass::Cauchy => quad::integrate_line_tan(f, 1.0, 1e-12)?,
        };
        Ok(v)
    }

    /// Sampled decay constant sup |omega(z)| (1+|z|)^3 over a test grid;
    /// finite for compact/rapid kernels by construction.
    pub fn decay_constant(&self) -> f64 {
        let mut c: f64 = 0.0;
        let mut z = 0.0;
        while z <= 50.0 {
            let w = self.eval(z).abs().max(self.eval(-z).abs());
            c = c.max(w * (1.0 + z).powi(3));
            z += 0.125;
        }
        c
    }

    /// Build the smeared step from the cumulative integral of the kernel.
    /// Requires unit mass so the far limits are exactly 0 and 1.
    pub fn heaviside(&self, orientation: Orientation) -> Result<HeavisideApprox, MollifierError> {
        let mass = self.moment(1)?;
        if (mass - 1.0).abs() > 1e-8 {
            return Err(MollifierError::NotNormalized(mass));
        }
        HeavisideApprox::build(self.clone(), orientation)
    }
}

fn sech(z: f64) -> f64 {
    // 2 e^-|z| / (1 + e^-2|z|): no overflow for large |z|.
    let e = (-z.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

/// Smooth step built from the cumulative integral of a unit-mass kernel,
/// tabulated in arctan space with exact knot derivatives (cubic Hermite).
#[derive(Clone)]
pub struct HeavisideApprox {
    generator: Mollifier,
    orientation: Orientation,
    s_step: f64,
    s_min: f64,
    values: Vec<f64>,
    slopes: Vec<f64>, // dH/ds at each knot
}

impl HeavisideApprox {
    fn build(generator: Mollifier, orientation: Orientation) -> Result<Self, MollifierError> {
        let n = 2000usize;
        let s_min = -std::f64::consts::FRAC_PI_2;
        let s_step = std::f64::consts::PI / n as f64;
        let integrand = |s: f64| {
            let c = s.cos();
            if c < 1e-300 {
                return 0.0;
            }
            let z = s.tan();
            let w = generator.eval(z);
            if w == 0.0 {
                return 0.0;
            }
            let v = w / (c * c);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let mut values = Vec::with_capacity(n + 1);
        let mut slopes = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        values.push(0.0);
        slopes.push(integrand(s_min));
        for k in 1..=n {
            let a = s_min + (k - 1) as f64 * s_step;
            let b = s_min + k as f64 * s_step;
            acc += quad::integrate(integrand, a, b, 1e-15)?;
            values.push(acc);
            slopes.push(integrand(b));
        }
        // Pin the far limit exactly to the computed mass (1 within 1e-8).
        let total = acc;
        if total != 0.0 {
            for v in values.iter_mut() {
                *v /= total;
            }
            for s in slopes.iter_mut() {
                *s /= total;
            }
        }
        Ok(HeavisideApprox {
            generator,
            orientation,
            s_step,
            s_min,
            values,
            slopes,
        })
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn generator(&self) -> &Mollifier {
        &self.generator
    }

    fn plus_eval(&self, z: f64) -> f64 {
        let s = z.atan();
        let u = (s - self.s_min) / self.s_step;
        let k = (u.floor() as usize).min(self.values.len() - 2);
        let t = u - k as f64;
        hermite(
            self.values[k],
            self.values[k + 1],
            self.slopes[k] * self.s_step,
            self.slopes[k + 1] * self.s_step,
            t,
        )
    }

    fn plus_deriv(&self, z: f64) -> f64 {
        let s = z.atan();
        let u = (s - self.s_min) / self.s_step;
        let k = (u.floor() as usize).min(self.values.len() - 2);
        let t = u - k as f64;
        let dh_ds = hermite_deriv(
            self.values[k],
            self.values[k + 1],
            self.slopes[k] * self.s_step,
            self.slopes[k + 1] * self.s_step,
            t,
        ) / self.s_step;
        dh_ds / (1.0 + z * z)
    }

    /// Step value; tends to (0, 1) for `Plus` and (1, 0) for `Minus` as
    /// z goes from -inf to +inf.
    pub fn eval(&self, z: f64) -> f64 {
        match self.orientation {
            Orientation::Plus => self.plus_eval(z),
            Orientation::Minus => 1.0 - self.plus_eval(z),
        }
    }

    /// d/dz of [`eval`](Self::eval): the generating kernel up to sign.
    pub fn deriv(&self, z: f64) -> f64 {
        match self.orientation {
            Orientation::Plus => self.plus_deriv(z),
            Orientation::Minus => -self.plus_deriv(z),
        }
    }
}

fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * (t3 - 2.0 * t2 + t)
        + y1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * (t3 - t2)
}

fn hermite_deriv(y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    y0 * (6.0 * t2 - 6.0 * t)
        + m0 * (3.0 * t2 - 4.0 * t + 1.0)
        + y1 * (-6.0 * t2 + 6.0 * t)
        + m1 * (3.0 * t2 - 2.0 * t)
}

/// Nonlinear kernel average int [f(u0 + w(tau)) - f(u0)] dtau.
///
/// The profile `w` must decay at least like (1+|tau|)^-3; a sampled check
/// rejects slower tails. Integration runs over the whole line through the
/// tangent substitution, so algebraic tails within the bound are fine.
pub fn lambda_functional<F, W>(f: F, u0_val: f64, shape: W) -> Result<f64, MollifierError>
where
    F: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
{
    // Decay check: |w(tau)| (1+|tau|)^3 must not grow from the near field
    // to the far field, i.e. the tail falls at least like the cube.
    let mut near: f64 = 0.0;
    let mut tau = 2.0;
    while tau <= 6.0 {
        near = near
            .max(shape(tau).abs() * (1.0 + tau).powi(3))
            .max(shape(-tau).abs() * (1.0 + tau).powi(3));
        tau += 0.25;
    }
    let bound = 2.0 * near + 1e-9;
    for &far in &[8.0, 16.0, 32.0, 48.0] {
        for &s in &[far, -far] {
            let v = shape(s).abs() * (1.0 + s.abs()).powi(3);
            if v > bound {
                return Err(MollifierError::DecayCheck(v / near.max(1e-300), s));
            }
        }
    }
    let f0 = f(u0_val);
    let g = |tau: f64| f(u0_val + shape(tau)) - f0;
    Ok(quad::integrate_line_tan(g, 4.0, 1e-12)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent trapezoid oracle used to freeze expected values below.
    fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = 0.5 * (f(a) + f(b));
        for k in 1..n {
            s += f(a + k as f64 * h);
        }
        s * h
    }

    #[test]
    fn sech2_kernel_moments_match_closed_forms() {
        let m = Mollifier::sech2_kernel();
        assert!((m.moment(1).unwrap() - 2.0).abs() < 1e-10);
        assert!((m.moment(2).unwrap() - 4.0 / 3.0).abs() < 1e-10);
        assert!((m.moment(3).unwrap() - 16.0 / 15.0).abs() < 1e-10);
        assert!((m.grad_moment().unwrap() - 16.0 / 15.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_second_moment_matches_trapezoid_oracle() {
        // Frozen from the oracle below: int pdf^2 = 1/(2 sqrt(pi)).
        let frozen = 0.282_094_791_773_878_14;
        let m = Mollifier::gaussian(1.0);
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let oracle = trapezoid(|z| pdf(z) * pdf(z), -20.0, 20.0, 400_000);
        assert!((oracle - frozen).abs() < 1e-12);
        assert!((m.moment(2).unwrap() - frozen).abs() < 1e-10);
    }

    #[test]
    fn presets_are_normalized() {
        for name in ["sech2", "gaussian", "bump", "cauchy"] {
            let m = Mollifier::preset(name).unwrap();
            assert!(
                (m.moment(1).unwrap() - 1.0).abs() <= 1e-10,
                "{name} mass off"
            );
        }
    }

    #[test]
    fn rapid_presets_satisfy_cubic_decay_bound() {
        for name in ["sech2", "gaussian", "bump"] {
            let m = Mollifier::preset(name).unwrap();
            assert!(m.decay_constant().is_finite());
            assert!(m.decay_constant() < 10.0, "{name} decay constant too large");
        }
    }

    #[test]
    fn moment_rescaling_homogeneity() {
        // For omega_a(z) = a omega(a z): moment_n = a^(n-1) moment_n(omega).
        let base = Mollifier::gaussian(1.0);
        for &alpha in &[0.5, 2.0] {
            let scaled = base.scaled(alpha);
            for n in 1..=3u32 {
                let want = alpha.powi(n as i32 - 1) * base.moment(n).unwrap();
                let got = scaled.moment(n).unwrap();
                assert!((got - want).abs() < 1e-9, "alpha={alpha} n={n}");
            }
        }
    }

    #[test]
    fn zero_order_moment_rejected() {
        let m = Mollifier::sech2();
        assert!(matches!(m.moment(0), Err(MollifierError::NonIntegrable(0))));
    }

    #[test]
    fn cauchy_moments() {
        let m = Mollifier::cauchy();
        // Conditionally the normalization; the analytic value is exactly 1.
        assert!((m.moment(1).unwrap() - 1.0).abs() < 1e-10);
        // int 1/(pi^2 (1+z^2)^2) = 1/(2 pi).
        let want = 0.5 / std::f64::consts::PI;
        assert!((m.moment(2).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn heaviside_midpoint_and_limits() {
        let h = Mollifier::sech2().heaviside(Orientation::Plus).unwrap();
        assert!((h.eval(0.0) - 0.5).abs() < 1e-10, "even kernel midpoint");
        assert!((h.eval(1e6) - 1.0).abs() < 1e-10);
        assert!(h.eval(-1e6).abs() < 1e-10);
        let hm = Mollifier::sech2().heaviside(Orientation::Minus).unwrap();
        assert!((hm.eval(-1e6) - 1.0).abs() < 1e-10);
        assert!(hm.eval(1e6).abs() < 1e-10);
    }

    #[test]
    fn heaviside_of_compact_kernel_saturates_past_support() {
        let h = Mollifier::bump().heaviside(Orientation::Plus).unwrap();
        assert!((h.eval(2.0) - 1.0).abs() < 1e-10);
        assert!(h.eval(-2.0).abs() < 1e-10);
    }

    #[test]
    fn heaviside_gaussian_matches_normal_cdf_oracle() {
        // Frozen standard normal CDF at z = 1, cross-checked by quadrature.
        let frozen = 0.841_344_746_068_542_9;
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let oracle = 0.5 + trapezoid(pdf, 0.0, 1.0, 200_000);
        assert!((oracle - frozen).abs() < 1e-11);
        let h = Mollifier::gaussian(1.0).heaviside(Orientation::Plus).unwrap();
        assert!((h.eval(1.0) - frozen).abs() < 1e-10);
    }

    #[test]
    fn heaviside_derivative_reproduces_kernel() {
        for name in ["sech2", "gaussian", "cauchy"] {
            let m = Mollifier::preset(name).unwrap();
            let h = m.heaviside(Orientation::Plus).unwrap();
            let mut z = -6.0;
            while z <= 6.0 {
                assert!(
                    (h.deriv(z) - m.eval(z)).abs() < 1e-9,
                    "{name} derivative mismatch at z={z}"
                );
                z += 0.37;
            }
        }
    }

    #[test]
    fn unnormalized_kernel_rejected_for_heaviside() {
        let raw = Mollifier::sech2_kernel();
        assert!(matches!(
            raw.heaviside(Orientation::Plus),
            Err(MollifierError::NotNormalized(_))
        ));
    }

    #[test]
    fn lambda_linear_flux_gives_mass() {
        // f(u) = u: the average collapses to the kernel mass.
        let m = Mollifier::sech2_kernel();
        let shape = m.shape_handle();
        let v = lambda_functional(|u| u, 0.7, |t| shape(t)).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lambda_quadratic_flux_moment_table() {
        let m = Mollifier::sech2_kernel();
        let shape = m.shape_handle();
        let v = lambda_functional(|u| u * u, 0.0, |t| shape(t)).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-9);
        // Shifted background: expand (c+w)^2 - c^2 = 2 c w + w^2.
        let c = 0.8;
        let want = 2.0 * c * 2.0 + 4.0 / 3.0;
        let v = lambda_functional(|u| u * u, c, |t| shape(t)).unwrap();
        assert!((v - want).abs() < 1e-9);
    }

    #[test]
    fn lambda_matches_moments_for_monomials() {
        let m = Mollifier::sech2();
        let shape = m.shape_handle();
        for n in 1..=3u32 {
            let v = lambda_functional(|u| u.powi(n as i32), 0.0, |t| shape(t)).unwrap();
            assert!((v - m.moment(n).unwrap()).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn lambda_exponential_map_vs_quadrature_oracle() {
        // Oracle: trapezoid of exp(w(tau)) - 1 on [-20, 20].
        let m = Mollifier::gaussian(1.0);
        let shape = m.shape_handle();
        let oracle = trapezoid(|t| (shape(t)).exp_m1(), -20.0, 20.0, 200_000);
        let v = lambda_functional(|u| u.exp(), 0.0, |t| shape(t)).unwrap();
        assert!((v - oracle).abs() < 1e-9);
    }

    #[test]
    fn lambda_rejects_slow_tails() {
        // ~ |tau|^-2 tail violates the cubic decay requirement.
        let r = lambda_functional(|u| u * u, 0.0, |t: f64| 1.0 / (1.0 + t * t));
        assert!(matches!(r, Err(MollifierError::DecayCheck(_, _))));
    }
}
