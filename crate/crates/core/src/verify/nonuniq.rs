//! Ill-posedness demonstration: with the shelf behind the soliton but
//! *without* the conserved-combination closure, the amplitude history is
//! free. Two admissible histories with the same initial data build shelf
//! fields that agree on the initial-data region yet differ in the wedge
//! between the last initial characteristic and the soliton path, while both
//! satisfy the transport system to tolerance.

use std::sync::Arc;

use crate::dynamics::{DynamicsError, ShelfInit};
use crate::hopf::Background;

use super::VerifyError;

/// Prescribed amplitude history g(t) with derivative.
#[derive(Clone)]
pub struct AmplitudeHistory {
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    dg: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub label: String,
}

impl AmplitudeHistory {
    pub fn new<G, D>(label: &str, g: G, dg: D) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        AmplitudeHistory {
            g: Arc::new(g),
            dg: Arc::new(dg),
            label: label.to_string(),
        }
    }

    pub fn constant(g0: f64) -> Self {
        Self::new(&format!("const({g0})"), move |_| g0, |_| 0.0)
    }

    /// g0 (1 + beta t^2): same value and slope at t = 0 as the constant
    /// history, so the corner stays compatible.
    pub fn quadratic_growth(g0: f64, beta: f64) -> Self {
        Self::new(
            &format!("grow({g0},{beta})"),
            move |t| g0 * (1.0 + beta * t * t),
            move |t| 2.0 * g0 * beta * t,
        )
    }

    pub fn g(&self, t: f64) -> f64 {
        (self.g)(t)
    }

    pub fn dg(&self, t: f64) -> f64 {
        (self.dg)(t)
    }
}

/// Shelf field behind a soliton whose amplitude is prescribed, built from
/// initial data plus boundary emissions along the path.
pub struct WedgeField {
    bf: Background,
    init: ShelfInit,
    history: AmplitudeHistory,
    nodes: Vec<(f64, f64, f64)>, // (t, phi, phi_t)
    step: f64,
}

impl WedgeField {
    fn build(
        bf: &Background,
        phi0: f64,
        init: &ShelfInit,
        history: &AmplitudeHistory,
        t_end: f64,
        steps: usize,
    ) -> Result<Self, VerifyError> {
        let h = t_end / steps as f64;
        let speed = |phi: f64, t: f64| -> Result<f64, VerifyError> {
            Ok(2.0 * bf.eval(phi, t)? + 2.0 / 3.0 * history.g(t))
        };
        let mut nodes = Vec::with_capacity(steps + 1);
        let mut phi = phi0;
        nodes.push((0.0, phi, speed(phi, 0.0)?));
        for k in 0..steps {
            let t = k as f64 * h;
            let k1 = speed(phi, t)?;
            let k2 = speed(phi + 0.5 * h * k1, t + 0.5 * h)?;
            let k3 = speed(phi + 0.5 * h * k2, t + 0.5 * h)?;
            let k4 = speed(phi + h * k3, t + h)?;
            phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            nodes.push((t + h, phi, speed(phi, t + h)?));
        }
        Ok(WedgeField {
            bf: bf.clone(),
            init: init.clone(),
            history: history.clone(),
            nodes,
            step: h,
        })
    }

    pub fn phi(&self, t: f64) -> f64 {
        let i = ((t / self.step).floor() as isize)
            .clamp(0, self.nodes.len() as isize - 2) as usize;
        let s = ((t - self.nodes[i].0) / self.step).clamp(0.0, 1.0);
        let (y0, m0) = (self.nodes[i].1, self.nodes[i].2 * self.step);
        let (y1, m1) = (self.nodes[i + 1].1, self.nodes[i + 1].2 * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + m0 * (s3 - 2.0 * s2 + s)
            + y1 * (-2.0 * s3 + 3.0 * s2)
            + m1 * (s3 - s2)
    }

    pub fn phi_t(&self, t: f64) -> f64 {
        let i = ((t / self.step).floor() as isize)
            .clamp(0, self.nodes.len() as isize - 2) as usize;
        let s = ((t - self.nodes[i].0) / self.step).clamp(0.0, 1.0);
        let (y0, m0) = (self.nodes[i].1, self.nodes[i].2 * self.step);
        let (y1, m1) = (self.nodes[i + 1].1, self.nodes[i + 1].2 * self.step);
        let s2 = s * s;
        (y0 * (6.0 * s2 - 6.0 * s)
            + m0 * (3.0 * s2 - 4.0 * s + 1.0)
            + y1 * (-6.0 * s2 + 6.0 * s)
            + m1 * (3.0 * s2 - 2.0 * s))
            / self.step
    }

    /// Emitted boundary value at time s.
    pub fn boundary_value(&self, s: f64) -> f64 {
        -1.5 * 6.0_f64.sqrt() * self.history.dg(s) / self.history.g(s).powf(1.5)
    }

    /// Last initial characteristic at time t.
    pub fn seam(&self, t: f64) -> f64 {
        let phi0 = self.nodes[0].1;
        phi0 + self.bf.flux().d1(self.bf.datum().eval(phi0)) * t
    }

    pub fn wedge_width(&self, t: f64) -> f64 {
        self.phi(t) - self.seam(t)
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64, DynamicsError> {
        let phi = self.phi(t);
        if x > phi + 1e-9 * (1.0 + phi.abs()) {
            return Err(DynamicsError::QueryOutsideRegion { x, t });
        }
        if x <= self.seam(t) {
            let xi = self.bf.foot(x, t)?;
            return Ok(self.init.eval(xi) / self.bf.jacobian_at_foot(xi, t));
        }
        let pos = |s: f64| -> f64 {
            let ps = self.phi(s);
            let us = self.bf.eval(ps, s).unwrap_or(f64::NAN);
            ps + self.bf.flux().d1(us) * (t - s)
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
        let ps = self.phi(s);
        let us = self.bf.eval(ps, s)?;
        let xi = ps - self.bf.flux().d1(us) * s;
        Ok(self.boundary_value(s) * self.bf.jacobian_at_foot(xi, s)
            / self.bf.jacobian_at_foot(xi, t))
    }
}

/// Measured outcome of the two-history construction.
#[derive(Clone, Copy, Debug)]
pub struct NonUniqueReport {
    /// max |e1 - e2| over wedge samples; positive when the histories differ.
    pub wedge_gap: f64,
    /// max finite-difference transport residual over interior samples.
    pub transport_residual: f64,
    /// max |phi_t - 2 u0(phi) - (2/3) g| over sample times.
    pub speed_residual: f64,
    /// max |e(phi-, t) - emitted value| over sample times.
    pub boundary_residual: f64,
    pub wedge_width_end: f64,
}

/// Build the two shelf fields and measure how they differ and how well each
/// satisfies the unclosed system.
pub fn nonuniqueness_demo(
    bf: &Background,
    phi0: f64,
    init: &ShelfInit,
    histories: (&AmplitudeHistory, &AmplitudeHistory),
    t_end: f64,
    steps: usize,
) -> Result<(NonUniqueReport, WedgeField, WedgeField), VerifyError> {
    let f1 = WedgeField::build(bf, phi0, init, histories.0, t_end, steps)?;
    let f2 = WedgeField::build(bf, phi0, init, histories.1, t_end, steps)?;

    let mut wedge_gap = 0.0_f64;
    let mut transport = 0.0_f64;
    let mut speed = 0.0_f64;
    let mut boundary = 0.0_f64;
    for k in 1..=8 {
        let t = t_end * k as f64 / 8.0;
        for f in [&f1, &f2] {
            let g = f.history.g(t);
            speed = speed
                .max((f.phi_t(t) - 2.0 * bf.eval(f.phi(t), t)? - 2.0 / 3.0 * g).abs());
            let probe = f.phi(t) - 1e-7;
            boundary = boundary.max((f.eval(probe, t)? - f.boundary_value(t)).abs());
        }
        // Common wedge samples.
        let lo = f1.seam(t).max(f2.seam(t)) + 0.02;
        let hi = f1.phi(t).min(f2.phi(t)) - 0.02;
        if hi <= lo {
            continue;
        }
        for j in 0..=16 {
            let x = lo + (hi - lo) * j as f64 / 16.0;
            let (e1, e2) = (f1.eval(x, t)?, f2.eval(x, t)?);
            wedge_gap = wedge_gap.max((e1 - e2).abs());
            // Transport residual e_t + 2 (u0 e)_x by centered stencils,
            // interior points only.
            if t > 0.05 && t < t_end - 0.05 {
                let h = 1e-5;
                for f in [&f1, &f2] {
                    let et = (f.eval(x, t + h)? - f.eval(x, t - h)?) / (2.0 * h);
                    let flx = |xx: f64| -> Result<f64, VerifyError> {
                        Ok(2.0 * bf.eval(xx, t)? * f.eval(xx, t).unwrap_or(f64::NAN))
                    };
                    let fx = (flx(x + h)? - flx(x - h)?) / (2.0 * h);
                    transport = transport.max((et + fx).abs());
                }
            }
        }
    }

    Ok((
        NonUniqueReport {
            wedge_gap,
            transport_residual: transport,
            speed_residual: speed,
            boundary_residual: boundary,
            wedge_width_end: f1.wedge_width(t_end).min(f2.wedge_width(t_end)),
        },
        f1,
        f2,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::Flux;
    use crate::hopf::Datum;

    fn bg() -> Background {
        Background::new(
            Datum::TanhRamp {
                base: 0.3,
                amp: 0.2,
                steep: 0.3,
            },
            Flux::quadratic(),
        )
    }

    #[test]
    fn identical_histories_identical_fields() {
        let bf = bg();
        let h1 = AmplitudeHistory::constant(1.0);
        let h2 = AmplitudeHistory::constant(1.0);
        let (rep, _, _) =
            nonuniqueness_demo(&bf, -2.0, &ShelfInit::Zero, (&h1, &h2), 1.0, 400).unwrap();
        assert!(rep.wedge_gap < 1e-12);
    }

    #[test]
    fn differing_histories_split_in_the_wedge() {
        let bf = bg();
        let h1 = AmplitudeHistory::constant(1.0);
        let h2 = AmplitudeHistory::quadratic_growth(1.0, 0.3);
        let (rep, _, _) =
            nonuniqueness_demo(&bf, -2.0, &ShelfInit::Zero, (&h1, &h2), 1.0, 400).unwrap();
        assert!(rep.wedge_gap > 1e-3, "gap {:e}", rep.wedge_gap);
        assert!(rep.transport_residual < 1e-6, "{:e}", rep.transport_residual);
        assert!(rep.speed_residual < 1e-9);
        assert!(rep.boundary_residual < 1e-5);
    }

    #[test]
    fn wedge_width_matches_quadrature_on_constant_background() {
        // Constant background: width(t) = (2/3) int g, here with g = g0(1+b t^2).
        let bf = Background::new(Datum::Constant { value: 0.2 }, Flux::quadratic());
        let h = AmplitudeHistory::quadratic_growth(0.9, 0.5);
        let f = WedgeField::build(&bf, 0.0, &ShelfInit::Zero, &h, 1.0, 400).unwrap();
        let t: f64 = 1.0;
        // int_0^t g0 (1 + 0.5 s^2) ds = g0 (t + 0.5 t^3 / 3).
        let want = 2.0 / 3.0 * 0.9 * (t + 0.5 * t.powi(3) / 3.0);
        assert!(
            (f.wedge_width(t) - want).abs() < 1e-8,
            "{} vs {want}",
            f.wedge_width(t)
        );
    }
}
