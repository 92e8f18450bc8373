//! Smooth background u0(x, t) solving u_t + (f(u))_x = 0 by characteristics.
//!
//! Below the breaking time the characteristic map xi -> xi + f'(u0(xi)) t is
//! strictly increasing, so every evaluation reduces to inverting it with a
//! safeguarded Newton iteration. Values, slopes and time derivatives all come
//! out in closed form once the characteristic foot is known.

use std::sync::OnceLock;

use thiserror::Error;

use crate::flux::Flux;

#[derive(Debug, Error)]
pub enum HopfError {
    #[error("t = {t} is at or beyond the breaking time {breaking}")]
    BeyondBreakingTime { t: f64, breaking: f64 },
    #[error("characteristic inversion stalled at x = {x}, t = {t} (residual {residual:e})")]
    NewtonStall { x: f64, t: f64, residual: f64 },
}

/// Initial datum presets. All are globally smooth with analytic first and
/// second derivatives.
#[derive(Clone, Debug, PartialEq)]
pub enum Datum {
    Constant { value: f64 },
    Linear { value_at_origin: f64, slope: f64 },
    TanhRamp { base: f64, amp: f64, steep: f64 },
    GaussianBump { base: f64, amp: f64, width: f64, center: f64 },
    /// Periodic replica of the tanh ramp: base + amp tanh(steep * s(x)) with
    /// s(x) = (L/pi) sin(pi (x - center)/L). Smooth and L-periodic, close to
    /// the plain ramp near the center; meant for spectral cross-checks.
    PeriodicRamp { base: f64, amp: f64, steep: f64, center: f64, period: f64 },
}

impl Datum {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Datum::Constant { value } => value,
            Datum::Linear { value_at_origin, slope } => value_at_origin + slope * x,
            Datum::TanhRamp { base, amp, steep } => base + amp * (steep * x).tanh(),
            Datum::GaussianBump { base, amp, width, center } => {
                let s = (x - center) / width;
                base + amp * (-s * s).exp()
            }
            Datum::PeriodicRamp { base, amp, steep, center, period } => {
                let s = warp(x - center, period);
                base + amp * (steep * s).tanh()
            }
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match *self {
            Datum::Constant { .. } => 0.0,
            Datum::Linear { slope, .. } => slope,
            Datum::TanhRamp { amp, steep, .. } => {
                let c = (steep * x).cosh();
                amp * steep / (c * c)
            }
            Datum::GaussianBump { amp, width, center, .. } => {
                let s = (x - center) / width;
                -2.0 * amp * s / width * (-s * s).exp()
            }
            Datum::PeriodicRamp { amp, steep, center, period, .. } => {
                let s = warp(x - center, period);
                let c = (steep * s).cosh();
                amp * steep / (c * c) * warp_d1(x - center, period)
            }
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match *self {
            Datum::Constant { .. } | Datum::Linear { .. } => 0.0,
            Datum::TanhRamp { amp, steep, .. } => {
                let t = (steep * x).tanh();
                let c = (steep * x).cosh();
                -2.0 * amp * steep * steep * t / (c * c)
            }
            Datum::GaussianBump { amp, width, center, .. } => {
                let s = (x - center) / width;
                amp * (4.0 * s * s - 2.0) / (width * width) * (-s * s).exp()
            }
            Datum::PeriodicRamp { amp, steep, center, period, .. } => {
                let y = x - center;
                let s = warp(y, period);
                let t = (steep * s).tanh();
                let c = (steep * s).cosh();
                let w1 = warp_d1(y, period);
                let w2 = warp_d2(y, period);
                amp * steep * (-2.0 * steep * t * w1 * w1 / (c * c) + w2 / (c * c))
            }
        }
    }

    /// Interval worth scanning for slope extrema; `None` means the datum has
    /// a constant characteristic speed everywhere.
    fn scan_interval(&self) -> Option<(f64, f64)> {
        match *self {
            Datum::Constant { .. } => None,
            Datum::Linear { .. } => Some((-1.0, 1.0)),
            Datum::TanhRamp { steep, .. } => {
                let r = 15.0 / steep.abs().max(1e-12);
                Some((-r, r))
            }
            Datum::GaussianBump { width, center, .. } => {
                Some((center - 10.0 * width.abs(), center + 10.0 * width.abs()))
            }
            Datum::PeriodicRamp { center, period, .. } => {
                Some((center - 0.5 * period, center + 0.5 * period))
            }
        }
    }
}

fn warp(y: f64, period: f64) -> f64 {
    let k = 2.0 * std::f64::consts::PI / period;
    (k * y).sin() / k
}

fn warp_d1(y: f64, period: f64) -> f64 {
    let k = 2.0 * std::f64::consts::PI / period;
    (k * y).cos()
}

fn warp_d2(y: f64, period: f64) -> f64 {
    let k = 2.0 * std::f64::consts::PI / period;
    -k * (k * y).sin()
}

/// Smooth background field: datum + flux, evaluated by characteristics.
#[derive(Clone, Debug)]
pub struct Background {
    datum: Datum,
    flux: Flux,
    breaking: OnceLock<f64>,
}

impl Background {
    pub fn new(datum: Datum, flux: Flux) -> Self {
        Background {
            datum,
            flux,
            breaking: OnceLock::new(),
        }
    }

    pub fn datum(&self) -> &Datum {
        &self.datum
    }

    pub fn flux(&self) -> &Flux {
        &self.flux
    }

    /// Characteristic speed at the foot: G(xi) = f'(u0(xi)).
    fn speed_at_foot(&self, xi: f64) -> f64 {
        self.flux.d1(self.datum.eval(xi))
    }

    fn speed_slope(&self, xi: f64) -> f64 {
        let u = self.datum.eval(xi);
        self.flux.d2(u) * self.datum.d1(xi)
    }

    /// First time characteristics cross: inf over xi with G'(xi) < 0 of
    /// -1/G'(xi); +infinity when every characteristic speed is nondecreasing.
    pub fn breaking_time(&self) -> f64 {
        *self.breaking.get_or_init(|| {
            let Some((lo, hi)) = self.datum.scan_interval() else {
                return f64::INFINITY;
            };
            let n = 4000;
            let h = (hi - lo) / n as f64;
            let mut best_x = lo;
            let mut best = f64::INFINITY;
            for k in 0..=n {
                let x = lo + k as f64 * h;
                let s = self.speed_slope(x);
                if s < best {
                    best = s;
                    best_x = x;
                }
            }
            if best >= -1e-300 {
                return f64::INFINITY;
            }
            // Golden-section refinement of the slope minimum.
            let (mut a, mut b) = (best_x - h, best_x + h);
            let gr = 0.5 * (5.0_f64.sqrt() - 1.0);
            let mut c = b - gr * (b - a);
            let mut d = a + gr * (b - a);
            let mut fc = self.speed_slope(c);
            let mut fd = self.speed_slope(d);
            for _ in 0..80 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - gr * (b - a);
                    fc = self.speed_slope(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + gr * (b - a);
                    fd = self.speed_slope(d);
                }
                if (b - a).abs() < 1e-9 * (1.0 + best_x.abs()) {
                    break;
                }
            }
            let s = self.speed_slope(0.5 * (a + b)).min(best);
            -1.0 / s
        })
    }

    fn check_time(&self, t: f64) -> Result<(), HopfError> {
        let breaking = self.breaking_time();
        if t < 0.0 || t >= breaking {
            return Err(HopfError::BeyondBreakingTime { t, breaking });
        }
        Ok(())
    }

    /// Characteristic foot: the xi solving xi + f'(u0(xi)) t = x.
    pub fn foot(&self, x: f64, t: f64) -> Result<f64, HopfError> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok(x);
        }
        let scale = 1.0 + x.abs() + t * self.speed_at_foot(x).abs();
        let tol = 1e-12 * scale;
        let residual = |xi: f64| xi + self.speed_at_foot(xi) * t - x;

        // Newton from the frozen-speed guess, kept inside an expanding bracket.
        let mut xi = x - self.speed_at_foot(x) * t;
        let mut r = residual(xi);
        for _ in 0..50 {
            if r.abs() <= tol {
                return Ok(xi);
            }
            let jac = 1.0 + self.speed_slope(xi) * t;
            if jac <= 1e-12 {
                break;
            }
            let step = r / jac;
            let next = xi - step;
            if !next.is_finite() {
                break;
            }
            xi = next;
            r = residual(xi);
        }
        if r.abs() <= tol {
            return Ok(xi);
        }

        // Bisection fallback: expand a bracket around the guess, then halve.
        let mut width = 1.0 + scale;
        let (mut lo, mut hi);
        loop {
            lo = xi - width;
            hi = xi + width;
            if residual(lo) < 0.0 && residual(hi) > 0.0 {
                break;
            }
            width *= 2.0;
            if width > 1e12 * scale {
                return Err(HopfError::NewtonStall { x, t, residual: r });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let rm = residual(mid);
            if rm.abs() <= tol || (hi - lo) < f64::EPSILON * (1.0 + mid.abs()) {
                return Ok(mid);
            }
            if rm < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        let rm = residual(mid);
        if rm.abs() <= 100.0 * tol {
            Ok(mid)
        } else {
            Err(HopfError::NewtonStall { x, t, residual: rm })
        }
    }

    /// u0(x, t) = u0^0(foot(x, t)).
    pub fn eval(&self, x: f64, t: f64) -> Result<f64, HopfError> {
        Ok(self.datum.eval(self.foot(x, t)?))
    }

    /// Jacobian of the characteristic map at a foot point:
    /// J = 1 + t d/dxi f'(u0(xi)). Positive below breaking.
    pub fn jacobian_at_foot(&self, xi: f64, t: f64) -> f64 {
        1.0 + self.speed_slope(xi) * t
    }

    /// Spatial slope by implicit differentiation through the foot.
    pub fn eval_dx(&self, x: f64, t: f64) -> Result<f64, HopfError> {
        let xi = self.foot(x, t)?;
        Ok(self.datum.d1(xi) / self.jacobian_at_foot(xi, t))
    }

    /// Time derivative from the equation itself: u_t = -f'(u) u_x.
    pub fn eval_dt(&self, x: f64, t: f64) -> Result<f64, HopfError> {
        let xi = self.foot(x, t)?;
        let u = self.datum.eval(xi);
        let ux = self.datum.d1(xi) / self.jacobian_at_foot(xi, t);
        Ok(-self.flux.d1(u) * ux)
    }

    /// Value and slope in one inversion.
    pub fn eval_with_dx(&self, x: f64, t: f64) -> Result<(f64, f64), HopfError> {
        let xi = self.foot(x, t)?;
        let u = self.datum.eval(xi);
        let ux = self.datum.d1(xi) / self.jacobian_at_foot(xi, t);
        Ok((u, ux))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_ramp() -> Background {
        Background::new(
            Datum::TanhRamp {
                base: 0.3,
                amp: 0.25,
                steep: 0.4,
            },
            Flux::quadratic(),
        )
    }

    #[test]
    fn constant_datum_is_constant() {
        let bf = Background::new(Datum::Constant { value: 0.7 }, Flux::quadratic());
        assert_eq!(bf.breaking_time(), f64::INFINITY);
        for &(x, t) in &[(0.0, 0.0), (3.0, 5.0), (-2.0, 11.0)] {
            assert!((bf.eval(x, t).unwrap() - 0.7).abs() < 1e-14);
            assert!(bf.eval_dx(x, t).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn linear_datum_matches_implicit_oracle() {
        // u0^0 = x/2, f = u^2: x = xi (1 + t), so u0 = x / (2 (1 + t)).
        let bf = Background::new(
            Datum::Linear {
                value_at_origin: 0.0,
                slope: 0.5,
            },
            Flux::quadratic(),
        );
        for &(x, t) in &[(1.0, 0.1), (-2.0, 0.5), (4.0, 2.0)] {
            let want = x / (2.0 * (1.0 + t));
            assert!((bf.eval(x, t).unwrap() - want).abs() < 1e-11);
            // Implicit differentiation oracle: u_x = (1/2) / (1 + t).
            let want_dx = 0.5 / (1.0 + t);
            assert!((bf.eval_dx(x, t).unwrap() - want_dx).abs() < 1e-11);
        }
    }

    #[test]
    fn breaking_time_of_decreasing_linear_datum() {
        // u0^0 = -beta x, f = u^2: speeds -2 beta xi, crossing at 1/(2 beta).
        let beta = 0.25;
        let bf = Background::new(
            Datum::Linear {
                value_at_origin: 0.0,
                slope: -beta,
            },
            Flux::quadratic(),
        );
        let t = bf.breaking_time();
        assert!((t - 1.0 / (2.0 * beta)).abs() < 1e-6 * t);
        assert!(bf.eval(0.0, t + 0.1).is_err());
    }

    #[test]
    fn rising_ramp_never_breaks() {
        let bf = quadratic_ramp();
        assert_eq!(bf.breaking_time(), f64::INFINITY);
    }

    #[test]
    fn falling_ramp_breaking_matches_grid_oracle() {
        let bf = Background::new(
            Datum::TanhRamp {
                base: 0.0,
                amp: -0.3,
                steep: 0.5,
            },
            Flux::quadratic(),
        );
        // Steepest descent of 2 u0^0 is at x = 0: slope -2*0.3*0.5 = -0.3.
        let want = 1.0 / 0.3;
        let t = bf.breaking_time();
        assert!((t - want).abs() < 1e-5 * want, "got {t}, want {want}");
    }

    #[test]
    fn conservation_along_characteristics() {
        let bf = quadratic_ramp();
        for &xi in &[-3.0, -1.0, 0.0, 2.0] {
            let u = bf.datum().eval(xi);
            for &t in &[0.1, 1.0, 4.0] {
                let x = xi + bf.flux().d1(u) * t;
                assert!((bf.eval(x, t).unwrap() - u).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pde_residual_small_on_grid() {
        let bump = Background::new(
            Datum::GaussianBump {
                base: 0.1,
                amp: 0.3,
                width: 2.0,
                center: 0.0,
            },
            Flux::quadratic(),
        );
        let t_max = 0.9 * bump.breaking_time();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..12 {
            let x = -5.0 + i as f64;
            for j in 1..5 {
                let t = t_max * j as f64 / 5.0;
                let ut =
                    (bump.eval(x, t + h).unwrap() - bump.eval(x, t - h).unwrap()) / (2.0 * h);
                let fl = |xx: f64| {
                    let u = bump.eval(xx, t).unwrap();
                    u * u
                };
                let fx = (fl(x + h) - fl(x - h)) / (2.0 * h);
                worst = worst.max((ut + fx).abs());
            }
        }
        assert!(worst <= 1e-6, "residual {worst}");
    }

    #[test]
    fn monotone_characteristic_map_near_breaking() {
        let bf = Background::new(
            Datum::GaussianBump {
                base: 0.0,
                amp: 0.4,
                width: 1.5,
                center: 0.0,
            },
            Flux::quadratic(),
        );
        let t = 0.97 * bf.breaking_time();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..200 {
            let xi = -8.0 + k as f64 * 0.08;
            let x = xi + bf.flux().d1(bf.datum().eval(xi)) * t;
            assert!(x > prev, "characteristic map not increasing");
            prev = x;
        }
    }

    #[test]
    fn eval_dx_matches_centered_difference() {
        let bf = quadratic_ramp();
        let h = 1e-5;
        for &(x, t) in &[(0.5, 0.3), (-1.0, 1.2), (2.0, 2.5)] {
            let fd = (bf.eval(x + h, t).unwrap() - bf.eval(x - h, t).unwrap()) / (2.0 * h);
            assert!((bf.eval_dx(x, t).unwrap() - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn eval_dt_matches_centered_difference() {
        let bf = quadratic_ramp();
        let h = 1e-5;
        for &(x, t) in &[(0.5, 0.3), (-1.0, 1.2)] {
            let fd = (bf.eval(x, t + h).unwrap() - bf.eval(x, t - h).unwrap()) / (2.0 * h);
            assert!((bf.eval_dt(x, t).unwrap() - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn periodic_ramp_is_periodic_and_close_to_plain_ramp() {
        let period = 40.0;
        let d = Datum::PeriodicRamp {
            base: 0.3,
            amp: 0.25,
            steep: 0.4,
            center: 0.0,
            period,
        };
        for &x in &[-7.0, 0.0, 3.0, 11.0] {
            assert!((d.eval(x) - d.eval(x + period)).abs() < 1e-12);
        }
        let ramp = Datum::TanhRamp {
            base: 0.3,
            amp: 0.25,
            steep: 0.4,
        };
        for &x in &[-2.0, 0.0, 2.0] {
            assert!((d.eval(x) - ramp.eval(x)).abs() < 2e-3);
        }
    }
}
