//! Finite algebra of narrow-peak asymptotics, truncated after the
//! first-order singular terms.
//!
//! An [`AsymptoticDistribution`] is a smooth field plus singular terms
//! carried along a single moving center phi(t): eps-scaled delta and delta'
//! terms and eps-scaled smeared steps. Peak-type terms remember the kernel
//! power that generated them, so products follow the kernel-moment rules
//! (omega^p has weight moment(p)/alpha) instead of collapsing prematurely.
//! Everything beyond the retained terms is second order against any test
//! function and is dropped.
//!
//! Coefficients are function handles, not grids. Time differentiation is
//! routed exclusively through analytic parameter derivatives supplied with
//! the handles; the algebra never finite-differences in t.

use std::sync::Arc;

use thiserror::Error;

use crate::mollifiers::{Mollifier, MollifierError, Orientation};
use crate::quad::{self, QuadError};

pub type Fxt = dyn Fn(f64, f64) -> f64 + Send + Sync;
pub type Ft = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("singular terms live on different centers")]
    CenterMismatch,
    #[error("missing kernel moment for this product: {0}")]
    MissingMoment(&'static str),
    #[error("product leaves the truncation range: {0}")]
    OutOfTruncation(&'static str),
    #[error("collect requires a reduced distribution")]
    UnreducedInput,
    #[error("time derivative handle missing for {0}")]
    MissingTimeDerivative(&'static str),
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Mollifier(#[from] MollifierError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Scalar function of time with an optional analytic derivative.
#[derive(Clone)]
pub struct TimeFn {
    val: Arc<Ft>,
    deriv: Option<Arc<Ft>>,
}

impl TimeFn {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        TimeFn {
            val: Arc::new(f),
            deriv: None,
        }
    }

    pub fn with_deriv<F, D>(f: F, d: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        TimeFn {
            val: Arc::new(f),
            deriv: Some(Arc::new(d)),
        }
    }

    pub fn constant(c: f64) -> Self {
        TimeFn {
            val: Arc::new(move |_| c),
            deriv: Some(Arc::new(|_| 0.0)),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.val)(t)
    }

    pub fn deriv_at(&self, t: f64) -> Option<f64> {
        self.deriv.as_ref().map(|d| d(t))
    }

    pub fn deriv_fn(&self) -> Option<TimeFn> {
        self.deriv.as_ref().map(|d| TimeFn {
            val: d.clone(),
            deriv: None,
        })
    }

    fn close_to(&self, other: &TimeFn) -> bool {
        if Arc::ptr_eq(&self.val, &other.val) {
            return true;
        }
        [0.0, 0.31, 1.07, 2.3].iter().all(|&t| {
            let (a, b) = (self.eval(t), other.eval(t));
            (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
        })
    }
}

/// Space-time coefficient field with optional analytic partials.
#[derive(Clone)]
pub struct Field {
    val: Arc<Fxt>,
    dx: Option<Arc<Fxt>>,
    dt: Option<Arc<Fxt>>,
}

impl Field {
    pub fn new<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Field {
            val: Arc::new(f),
            dx: None,
            dt: None,
        }
    }

    pub fn with_partials<F, Dx, Dt>(f: F, dx: Dx, dt: Dt) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Dx: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Dt: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Field {
            val: Arc::new(f),
            dx: Some(Arc::new(dx)),
            dt: Some(Arc::new(dt)),
        }
    }

    pub fn constant(c: f64) -> Self {
        Field {
            val: Arc::new(move |_, _| c),
            dx: Some(Arc::new(|_, _| 0.0)),
            dt: Some(Arc::new(|_, _| 0.0)),
        }
    }

    pub fn zero() -> Self {
        Field::constant(0.0)
    }

    /// Lift a time function to a field (constant in x).
    pub fn from_time(tf: &TimeFn) -> Self {
        let v = tf.val.clone();
        let d = tf.deriv.clone();
        Field {
            val: Arc::new(move |_, t| v(t)),
            dx: Some(Arc::new(|_, _| 0.0)),
            dt: d.map(|d| -> Arc<Fxt> { Arc::new(move |_, t| d(t)) }),
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        (self.val)(x, t)
    }

    pub fn has_dt(&self) -> bool {
        self.dt.is_some()
    }

    /// Spatial derivative: analytic when supplied, five-point stencil
    /// fallback otherwise.
    pub fn dx_field(&self) -> Field {
        match &self.dx {
            Some(d) => Field {
                val: d.clone(),
                dx: None,
                dt: None,
            },
            None => {
                let f = self.val.clone();
                Field::new(move |x, t| {
                    let h = 1e-5 * (1.0 + x.abs());
                    (-f(x + 2.0 * h, t) + 8.0 * f(x + h, t) - 8.0 * f(x - h, t)
                        + f(x - 2.0 * h, t))
                        / (12.0 * h)
                })
            }
        }
    }

    /// Time derivative; analytic handles only.
    pub fn dt_field(&self) -> Result<Field, AlgebraError> {
        match &self.dt {
            Some(d) => Ok(Field {
                val: d.clone(),
                dx: None,
                dt: None,
            }),
            None => Err(AlgebraError::MissingTimeDerivative("coefficient field")),
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        let (f, g) = (self.val.clone(), other.val.clone());
        Field {
            val: Arc::new(move |x, t| f(x, t) + g(x, t)),
            dx: zip_partial(&self.dx, &other.dx, |a, b, x, t| a(x, t) + b(x, t)),
            dt: zip_partial(&self.dt, &other.dt, |a, b, x, t| a(x, t) + b(x, t)),
        }
    }

    pub fn mul(&self, other: &Field) -> Field {
        let (f, g) = (self.val.clone(), other.val.clone());
        let val: Arc<Fxt> = Arc::new(move |x, t| f(x, t) * g(x, t));
        let dx = match (&self.dx, &other.dx) {
            (Some(da), Some(db)) => {
                let (f, g, da, db) = (
                    self.val.clone(),
                    other.val.clone(),
                    da.clone(),
                    db.clone(),
                );
                Some(Arc::new(move |x: f64, t: f64| {
                    da(x, t) * g(x, t) + f(x, t) * db(x, t)
                }) as Arc<Fxt>)
            }
            _ => None,
        };
        let dt = match (&self.dt, &other.dt) {
            (Some(da), Some(db)) => {
                let (f, g, da, db) = (
                    self.val.clone(),
                    other.val.clone(),
                    da.clone(),
                    db.clone(),
                );
                Some(Arc::new(move |x: f64, t: f64| {
                    da(x, t) * g(x, t) + f(x, t) * db(x, t)
                }) as Arc<Fxt>)
            }
            _ => None,
        };
        Field { val, dx, dt }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.mul(&Field::constant(c))
    }

    pub fn mul_time(&self, tf: &TimeFn) -> Field {
        self.mul(&Field::from_time(tf))
    }

    /// Freeze the spatial argument at the moving center: (x, t) -> c(phi(t), t).
    pub fn localize(&self, center: &TimeFn) -> Field {
        let f = self.val.clone();
        let phi = center.val.clone();
        let val: Arc<Fxt> = Arc::new(move |_, t| f(phi(t), t));
        let dt = match (&self.dx, &self.dt, &center.deriv) {
            (Some(dx), Some(dt), Some(dphi)) => {
                let (dx, dt, dphi) = (dx.clone(), dt.clone(), dphi.clone());
                let phi = center.val.clone();
                Some(Arc::new(move |_: f64, t: f64| {
                    let p = phi(t);
                    dx(p, t) * dphi(t) + dt(p, t)
                }) as Arc<Fxt>)
            }
            _ => None,
        };
        Field {
            val,
            dx: Some(Arc::new(|_, _| 0.0)),
            dt,
        }
    }
}

fn zip_partial(
    a: &Option<Arc<Fxt>>,
    b: &Option<Arc<Fxt>>,
    op: fn(&Arc<Fxt>, &Arc<Fxt>, f64, f64) -> f64,
) -> Option<Arc<Fxt>> {
    match (a, b) {
        (Some(a), Some(b)) => {
            let (a, b) = (a.clone(), b.clone());
            Some(Arc::new(move |x, t| op(&a, &b, x, t)))
        }
        _ => None,
    }
}

/// Smooth scalar map for composition, with an optional derivative handle.
#[derive(Clone)]
pub struct SmoothMap {
    f: Arc<Ft>,
    df: Option<Arc<Ft>>,
}

impl SmoothMap {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        SmoothMap {
            f: Arc::new(f),
            df: None,
        }
    }

    pub fn with_deriv<F, D>(f: F, d: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        SmoothMap {
            f: Arc::new(f),
            df: Some(Arc::new(d)),
        }
    }

    pub fn from_flux(flux: &crate::flux::Flux) -> Self {
        let f = flux.clone();
        let g = flux.clone();
        SmoothMap::with_deriv(move |u| f.eval(u), move |u| g.d1(u))
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }
}

/// Generating kernel of the peak terms plus the width scale alpha(t).
/// A peak of power p and coefficient c(x,t) stands for the narrow profile
/// c(x,t) omega^p(alpha(t) (x - phi(t)) / eps), whose weak reading is
/// c moment(p)/alpha times the eps-delta.
#[derive(Clone)]
pub struct KernelContext {
    kernel: Mollifier,
    alpha: TimeFn,
}

impl KernelContext {
    pub fn new(kernel: Mollifier, alpha: TimeFn) -> Self {
        KernelContext { kernel, alpha }
    }

    /// Unit-width context for a plain mollifier peak.
    pub fn unit(kernel: Mollifier) -> Self {
        KernelContext::new(kernel, TimeFn::constant(1.0))
    }

    /// Dispersive closure: sech^2 kernel with width sqrt(g(t)/6).
    pub fn dispersive(g: TimeFn) -> Self {
        let gv = g.val.clone();
        let gd = g.deriv.clone();
        let alpha = TimeFn {
            val: Arc::new(move |t| (gv(t) / 6.0).sqrt()),
            deriv: gd.map(|gd| {
                let gv = g.val.clone();
                Arc::new(move |t: f64| gd(t) / (2.0 * 6.0_f64.sqrt() * gv(t).sqrt())) as Arc<Ft>
            }),
        };
        KernelContext::new(Mollifier::sech2_kernel(), alpha)
    }

    pub fn kernel(&self) -> &Mollifier {
        &self.kernel
    }

    pub fn alpha(&self) -> &TimeFn {
        &self.alpha
    }

    pub fn moment(&self, n: u32) -> Result<f64, AlgebraError> {
        Ok(self.kernel.moment(n)?)
    }

    /// moment(p)/alpha as a time function, with its derivative when alpha
    /// carries one.
    fn weight(&self, p: u32) -> Result<TimeFn, AlgebraError> {
        let m = self.moment(p)?;
        let a = self.alpha.val.clone();
        let ad = self.alpha.deriv.clone();
        Ok(TimeFn {
            val: Arc::new(move |t| m / a(t)),
            deriv: ad.map(|ad| {
                let a = self.alpha.val.clone();
                Arc::new(move |t: f64| {
                    let av = a(t);
                    -m * ad(t) / (av * av)
                }) as Arc<Ft>
            }),
        })
    }

    fn compatible(&self, other: &KernelContext) -> bool {
        self.kernel.name() == other.kernel.name() && self.alpha.close_to(&other.alpha)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum DeltaKind {
    /// Generated by the p-th power of the context kernel.
    Kernel { power: u32 },
    /// Plain weak term: the coefficient multiplies the eps-delta directly.
    Weak,
}

#[derive(Clone)]
struct SingularTerm {
    coef: Field,
    kind: DeltaKind,
    localized: bool,
}

#[derive(Clone)]
struct ThetaTerm {
    coef: Field,
    orientation: Orientation,
}

/// Finite combination: regular field + peak terms + derivative-of-peak
/// terms + smeared steps, all sharing one center, modulo second order.
#[derive(Clone)]
pub struct AsymptoticDistribution {
    regular: Field,
    center: Option<TimeFn>,
    context: Option<KernelContext>,
    delta: Vec<SingularTerm>,
    delta_prime: Vec<SingularTerm>,
    theta: Vec<ThetaTerm>,
}

impl AsymptoticDistribution {
    pub fn from_regular(field: Field) -> Self {
        AsymptoticDistribution {
            regular: field,
            center: None,
            context: None,
            delta: Vec::new(),
            delta_prime: Vec::new(),
            theta: Vec::new(),
        }
    }

    pub fn one() -> Self {
        Self::from_regular(Field::constant(1.0))
    }

    /// Peak term: amplitude(t) times the power-1 kernel profile at the center.
    pub fn delta_profile(amplitude: TimeFn, center: TimeFn, ctx: KernelContext) -> Self {
        AsymptoticDistribution {
            regular: Field::zero(),
            center: Some(center),
            context: Some(ctx),
            delta: vec![SingularTerm {
                coef: Field::from_time(&amplitude),
                kind: DeltaKind::Kernel { power: 1 },
                localized: false,
            }],
            delta_prime: Vec::new(),
            theta: Vec::new(),
        }
    }

    /// Plain weak delta term: coef(x,t) eps-delta(x - phi(t)).
    pub fn delta_weak(coef: Field, center: TimeFn) -> Self {
        AsymptoticDistribution {
            regular: Field::zero(),
            center: Some(center),
            context: None,
            delta: vec![SingularTerm {
                coef,
                kind: DeltaKind::Weak,
                localized: false,
            }],
            delta_prime: Vec::new(),
            theta: Vec::new(),
        }
    }

    /// Plain weak delta' term (used e.g. to inject the dispersion
    /// contribution into a budget of coefficients).
    pub fn delta_prime_weak(coef: Field, center: TimeFn) -> Self {
        AsymptoticDistribution {
            regular: Field::zero(),
            center: Some(center),
            context: None,
            delta: Vec::new(),
            delta_prime: vec![SingularTerm {
                coef,
                kind: DeltaKind::Weak,
                localized: false,
            }],
            theta: Vec::new(),
        }
    }

    /// Step term: coef(x,t) eps-theta(+-(x - phi(t))).
    pub fn theta_term(coef: Field, orientation: Orientation, center: TimeFn) -> Self {
        AsymptoticDistribution {
            regular: Field::zero(),
            center: Some(center),
            context: None,
            delta: Vec::new(),
            delta_prime: Vec::new(),
            theta: vec![ThetaTerm { coef, orientation }],
        }
    }

    fn merged_center(&self, other: &Self) -> Result<Option<TimeFn>, AlgebraError> {
        match (&self.center, &other.center) {
            (Some(a), Some(b)) => {
                if a.close_to(b) {
                    Ok(Some(a.clone()))
                } else {
                    Err(AlgebraError::CenterMismatch)
                }
            }
            (Some(a), None) => Ok(Some(a.clone())),
            (None, b) => Ok(b.clone()),
        }
    }

    fn merged_context(&self, other: &Self) -> Result<Option<KernelContext>, AlgebraError> {
        match (&self.context, &other.context) {
            (Some(a), Some(b)) => {
                if a.compatible(b) {
                    Ok(Some(a.clone()))
                } else {
                    Err(AlgebraError::OutOfTruncation(
                        "peak terms generated by different kernels",
                    ))
                }
            }
            (Some(a), None) => Ok(Some(a.clone())),
            (None, b) => Ok(b.clone()),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, AlgebraError> {
        let center = self.merged_center(other)?;
        let context = self.merged_context(other)?;
        let mut out = AsymptoticDistribution {
            regular: self.regular.add(&other.regular),
            center,
            context,
            delta: self.delta.clone(),
            delta_prime: self.delta_prime.clone(),
            theta: self.theta.clone(),
        };
        out.delta.extend(other.delta.iter().cloned());
        out.delta_prime.extend(other.delta_prime.iter().cloned());
        out.theta.extend(other.theta.iter().cloned());
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.regular = out.regular.scale(c);
        for term in out.delta.iter_mut().chain(out.delta_prime.iter_mut()) {
            term.coef = term.coef.scale(c);
        }
        for term in out.theta.iter_mut() {
            term.coef = term.coef.scale(c);
        }
        out
    }

    /// Product modulo second order. Peak x peak adds kernel powers; peak or
    /// step factors against the derivative terms leave the truncation range
    /// and are rejected; step x step and peak x step are second order and
    /// drop.
    pub fn multiply(
        a: &Self,
        b: &Self,
        ctx: &KernelContext,
    ) -> Result<Self, AlgebraError> {
        let center = a.merged_center(b)?;
        for side in [a, b] {
            if let Some(c) = &side.context {
                if !c.compatible(ctx) {
                    return Err(AlgebraError::OutOfTruncation(
                        "product context does not match term kernels",
                    ));
                }
            }
        }
        if (!a.delta_prime.is_empty() && b.has_singular())
            || (!b.delta_prime.is_empty() && a.has_singular())
        {
            return Err(AlgebraError::OutOfTruncation(
                "derivative peak times a singular factor",
            ));
        }

        let mut delta: Vec<SingularTerm> = Vec::new();
        let mut delta_prime: Vec<SingularTerm> = Vec::new();
        let mut theta: Vec<ThetaTerm> = Vec::new();

        // regular x singular, both ways
        for (reg, terms) in [(&b.regular, &a.delta), (&a.regular, &b.delta)] {
            for term in terms.iter() {
                delta.push(SingularTerm {
                    coef: term.coef.mul(reg),
                    kind: term.kind,
                    localized: false,
                });
            }
        }
        for (reg, terms) in [(&b.regular, &a.delta_prime), (&a.regular, &b.delta_prime)] {
            for term in terms.iter() {
                delta_prime.push(SingularTerm {
                    coef: term.coef.mul(reg),
                    kind: term.kind,
                    localized: false,
                });
            }
        }
        for (reg, terms) in [(&b.regular, &a.theta), (&a.regular, &b.theta)] {
            for term in terms.iter() {
                theta.push(ThetaTerm {
                    coef: term.coef.mul(reg),
                    orientation: term.orientation,
                });
            }
        }

        // peak x peak
        for ta in &a.delta {
            for tb in &b.delta {
                match (ta.kind, tb.kind) {
                    (DeltaKind::Kernel { power: p }, DeltaKind::Kernel { power: q }) => {
                        // Make sure the needed moment exists before deferring.
                        ctx.moment(p + q).map_err(|_| {
                            AlgebraError::MissingMoment("kernel moment of the combined power")
                        })?;
                        delta.push(SingularTerm {
                            coef: ta.coef.mul(&tb.coef),
                            kind: DeltaKind::Kernel { power: p + q },
                            localized: false,
                        });
                    }
                    _ => {
                        return Err(AlgebraError::MissingMoment(
                            "peak products need kernel-generated factors",
                        ))
                    }
                }
            }
        }
        // peak x step and step x step are second order: dropped.

        Ok(AsymptoticDistribution {
            regular: a.regular.mul(&b.regular),
            center,
            context: Some(ctx.clone()),
            delta,
            delta_prime,
            theta,
        })
    }

    fn has_singular(&self) -> bool {
        !self.delta.is_empty() || !self.delta_prime.is_empty() || !self.theta.is_empty()
    }

    /// Composition with a smooth map F: F(u0) plus the peak average term
    /// plus F'(u0) times the step terms, modulo second order.
    pub fn compose(map: &SmoothMap, a: &Self, ctx: &KernelContext) -> Result<Self, AlgebraError> {
        if !a.delta_prime.is_empty() {
            return Err(AlgebraError::Unsupported(
                "composition over derivative peaks",
            ));
        }
        if a.delta.len() > 1 {
            return Err(AlgebraError::Unsupported(
                "composition over several peak terms; merge them first",
            ));
        }
        if let Some(c) = &a.context {
            if !c.compatible(ctx) {
                return Err(AlgebraError::OutOfTruncation(
                    "composition context does not match term kernels",
                ));
            }
        }

        let u0 = a.regular.clone();
        let fmap = map.f.clone();
        let regular_val = {
            let u0 = u0.val.clone();
            let f = fmap.clone();
            Arc::new(move |x: f64, t: f64| f(u0(x, t))) as Arc<Fxt>
        };
        let chain = |part: &Option<Arc<Fxt>>| -> Option<Arc<Fxt>> {
            match (&map.df, part) {
                (Some(df), Some(p)) => {
                    let (df, p, u0) = (df.clone(), p.clone(), u0.val.clone());
                    Some(Arc::new(move |x, t| df(u0(x, t)) * p(x, t)))
                }
                _ => None,
            }
        };
        let regular = Field {
            val: regular_val,
            dx: chain(&u0.dx),
            dt: chain(&u0.dt),
        };

        let mut delta = Vec::new();
        if let Some(term) = a.delta.first() {
            let DeltaKind::Kernel { power } = term.kind else {
                return Err(AlgebraError::Unsupported(
                    "composition over a plain weak peak; no generating kernel",
                ));
            };
            delta.push(SingularTerm {
                coef: peak_average(map, &u0, &term.coef, power, ctx)?,
                kind: DeltaKind::Weak,
                localized: false,
            });
        }

        let theta = a
            .theta
            .iter()
            .map(|term| -> Result<ThetaTerm, AlgebraError> {
                let df = map
                    .df
                    .clone()
                    .ok_or(AlgebraError::Unsupported("composition needs F' for steps"))?;
                let u0v = u0.val.clone();
                let fprime = Field::new(move |x, t| df(u0v(x, t)));
                Ok(ThetaTerm {
                    coef: fprime.mul(&term.coef),
                    orientation: term.orientation,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(AsymptoticDistribution {
            regular,
            center: a.center.clone(),
            context: Some(ctx.clone()),
            delta,
            delta_prime: Vec::new(),
            theta,
        })
    }

    /// Spatial derivative: peaks shed derivative peaks, steps shed their
    /// boundary peak, the regular part differentiates pointwise.
    pub fn differentiate_x(&self) -> Result<Self, AlgebraError> {
        if !self.delta_prime.is_empty() {
            return Err(AlgebraError::OutOfTruncation(
                "second spatial derivative of a peak",
            ));
        }
        let mut delta = Vec::new();
        let mut delta_prime = Vec::new();
        let mut theta = Vec::new();
        for term in &self.delta {
            delta.push(SingularTerm {
                coef: term.coef.dx_field(),
                kind: term.kind,
                localized: false,
            });
            delta_prime.push(SingularTerm {
                coef: term.coef.clone(),
                kind: term.kind,
                localized: false,
            });
        }
        for term in &self.theta {
            let sign = match term.orientation {
                Orientation::Plus => 1.0,
                Orientation::Minus => -1.0,
            };
            delta.push(SingularTerm {
                coef: term.coef.scale(sign),
                kind: DeltaKind::Weak,
                localized: false,
            });
            theta.push(ThetaTerm {
                coef: term.coef.dx_field(),
                orientation: term.orientation,
            });
        }
        Ok(AsymptoticDistribution {
            regular: self.regular.dx_field(),
            center: self.center.clone(),
            context: self.context.clone(),
            delta,
            delta_prime,
            theta,
        })
    }

    /// Time derivative through the supplied parameter derivatives. Peaks are
    /// first normalized to weak terms; the moving center contributes
    /// derivative peaks via the chain rule.
    pub fn differentiate_t(&self) -> Result<Self, AlgebraError> {
        if !self.delta_prime.is_empty() {
            return Err(AlgebraError::OutOfTruncation(
                "time derivative of a derivative peak",
            ));
        }
        let regular = self.regular.dt_field()?;
        if !self.has_singular() {
            return Ok(Self::from_regular(regular));
        }
        let center = self
            .center
            .clone()
            .ok_or(AlgebraError::Unsupported("singular terms without a center"))?;
        let phi_t = center
            .deriv_fn()
            .ok_or(AlgebraError::MissingTimeDerivative("center path"))?;

        let mut delta = Vec::new();
        let mut delta_prime = Vec::new();
        let mut theta = Vec::new();
        for term in &self.delta {
            let weak = self.weak_coef(term)?;
            delta.push(SingularTerm {
                coef: weak.dt_field()?,
                kind: DeltaKind::Weak,
                localized: false,
            });
            delta_prime.push(SingularTerm {
                coef: weak.mul_time(&phi_t).scale(-1.0),
                kind: DeltaKind::Weak,
                localized: false,
            });
        }
        for term in &self.theta {
            let sign = match term.orientation {
                Orientation::Plus => -1.0,
                Orientation::Minus => 1.0,
            };
            delta.push(SingularTerm {
                coef: term.coef.mul_time(&phi_t).scale(sign),
                kind: DeltaKind::Weak,
                localized: false,
            });
            theta.push(ThetaTerm {
                coef: term.coef.dt_field()?,
                orientation: term.orientation,
            });
        }
        Ok(AsymptoticDistribution {
            regular,
            center: self.center.clone(),
            context: self.context.clone(),
            delta,
            delta_prime,
            theta,
        })
    }

    /// Weak (plain-delta) coefficient of a singular term.
    fn weak_coef(&self, term: &SingularTerm) -> Result<Field, AlgebraError> {
        match term.kind {
            DeltaKind::Weak => Ok(term.coef.clone()),
            DeltaKind::Kernel { power } => {
                let ctx = self
                    .context
                    .as_ref()
                    .ok_or(AlgebraError::MissingMoment("kernel term without context"))?;
                Ok(term.coef.mul_time(&ctx.weight(power)?))
            }
        }
    }

    /// Canonical reduction: localize peak coefficients at the center and
    /// trade field-coefficient derivative peaks for constant-coefficient
    /// ones plus a peak correction, a(x) d' = a(phi) d' - a'(phi) d.
    pub fn reduce(&self) -> Result<Self, AlgebraError> {
        let Some(center) = self.center.clone() else {
            return Ok(self.clone());
        };
        let mut delta_sum = Field::zero();
        let mut prime_sum = Field::zero();
        for term in &self.delta {
            delta_sum = delta_sum.add(&self.weak_coef(term)?.localize(&center));
        }
        for term in &self.delta_prime {
            let weak = self.weak_coef(term)?;
            prime_sum = prime_sum.add(&weak.localize(&center));
            delta_sum = delta_sum.add(&weak.dx_field().localize(&center).scale(-1.0));
        }
        let mut plus = Field::zero();
        let mut minus = Field::zero();
        let (mut any_plus, mut any_minus) = (false, false);
        for term in &self.theta {
            match term.orientation {
                Orientation::Plus => {
                    plus = plus.add(&term.coef);
                    any_plus = true;
                }
                Orientation::Minus => {
                    minus = minus.add(&term.coef);
                    any_minus = true;
                }
            }
        }
        let mut theta = Vec::new();
        if any_plus {
            theta.push(ThetaTerm {
                coef: plus,
                orientation: Orientation::Plus,
            });
        }
        if any_minus {
            theta.push(ThetaTerm {
                coef: minus,
                orientation: Orientation::Minus,
            });
        }
        Ok(AsymptoticDistribution {
            regular: self.regular.clone(),
            center: Some(center),
            context: self.context.clone(),
            delta: vec![SingularTerm {
                coef: delta_sum,
                kind: DeltaKind::Weak,
                localized: true,
            }],
            delta_prime: vec![SingularTerm {
                coef: prime_sum,
                kind: DeltaKind::Weak,
                localized: true,
            }],
            theta,
        })
    }

    /// Read off the four coefficient slots of a reduced distribution.
    pub fn collect(&self) -> Result<CoefficientLedger, AlgebraError> {
        for term in self.delta.iter().chain(self.delta_prime.iter()) {
            if !term.localized || term.kind != DeltaKind::Weak {
                return Err(AlgebraError::UnreducedInput);
            }
        }
        if self.theta.len() > 1 {
            return Err(AlgebraError::Unsupported(
                "mixed step orientations in one ledger",
            ));
        }
        let sum_terms = |terms: &[SingularTerm]| -> TimeFn {
            let coefs: Vec<Arc<Fxt>> = terms.iter().map(|t| t.coef.val.clone()).collect();
            TimeFn::new(move |t| coefs.iter().map(|c| c(0.0, t)).sum())
        };
        Ok(CoefficientLedger {
            regular: self.regular.clone(),
            delta: sum_terms(&self.delta),
            delta_prime: sum_terms(&self.delta_prime),
            theta: self
                .theta
                .first()
                .map(|t| t.coef.clone())
                .unwrap_or_else(Field::zero),
            theta_orientation: self.theta.first().map(|t| t.orientation),
        })
    }
}

/// Weak average of a composed peak:
/// (1/alpha) int [F(u0(x,t) + c(x,t) omega^p(eta)) - F(u0(x,t))] d eta.
fn peak_average(
    map: &SmoothMap,
    u0: &Field,
    coef: &Field,
    power: u32,
    ctx: &KernelContext,
) -> Result<Field, AlgebraError> {
    let kernel = ctx.kernel().shape_handle();
    let alpha = ctx.alpha().clone();
    let f = map.f.clone();
    let u0v = u0.val.clone();
    let cv = coef.val.clone();
    let p = power as i32;
    let val: Arc<Fxt> = Arc::new(move |x, t| {
        let base = u0v(x, t);
        let c = cv(x, t);
        let f0 = f(base);
        let integrand = |eta: f64| f(base + c * kernel(eta).powi(p)) - f0;
        let v = quad::integrate_line_tan(integrand, 4.0, 1e-12).unwrap_or(f64::NAN);
        v / alpha.eval(t)
    });

    // Analytic x-partial when the chain pieces exist.
    let dx = match (&map.df, &u0.dx, &coef.dx) {
        (Some(df), Some(u0dx), Some(cdx)) => {
            let kernel = ctx.kernel().shape_handle();
            let alpha = ctx.alpha().clone();
            let (df, u0v, cv) = (df.clone(), u0.val.clone(), coef.val.clone());
            let (u0dx, cdx) = (u0dx.clone(), cdx.clone());
            Some(Arc::new(move |x: f64, t: f64| {
                let base = u0v(x, t);
                let c = cv(x, t);
                let (bx, cx) = (u0dx(x, t), cdx(x, t));
                let d0 = df(base);
                let integrand = |eta: f64| {
                    let w = kernel(eta).powi(p);
                    df(base + c * w) * (bx + cx * w) - d0 * bx
                };
                let v = quad::integrate_line_tan(integrand, 4.0, 1e-12).unwrap_or(f64::NAN);
                v / alpha.eval(t)
            }) as Arc<Fxt>)
        }
        _ => None,
    };

    // Analytic t-partial: chain through u0_t, c_t and the width.
    let dt = match (&map.df, &u0.dt, &coef.dt, &ctx.alpha().deriv) {
        (Some(df), Some(u0dt), Some(cdt), Some(adt)) => {
            let kernel = ctx.kernel().shape_handle();
            let alpha = ctx.alpha().clone();
            let (df, fmap) = (df.clone(), map.f.clone());
            let (u0v, cv) = (u0.val.clone(), coef.val.clone());
            let (u0dt, cdt, adt) = (u0dt.clone(), cdt.clone(), adt.clone());
            Some(Arc::new(move |x: f64, t: f64| {
                let base = u0v(x, t);
                let c = cv(x, t);
                let (bt, ct) = (u0dt(x, t), cdt(x, t));
                let d0 = df(base);
                let f0 = fmap(base);
                let core = |eta: f64| {
                    let w = kernel(eta).powi(p);
                    df(base + c * w) * (bt + ct * w) - d0 * bt
                };
                let lam = |eta: f64| fmap(base + c * kernel(eta).powi(p)) - f0;
                let a = alpha.eval(t);
                let dcore = quad::integrate_line_tan(core, 4.0, 1e-12).unwrap_or(f64::NAN);
                let lamv = quad::integrate_line_tan(lam, 4.0, 1e-12).unwrap_or(f64::NAN);
                dcore / a - lamv * adt(t) / (a * a)
            }) as Arc<Fxt>)
        }
        _ => None,
    };

    Ok(Field { val, dx, dt })
}

/// The four coefficient slots of a reduced distribution: the smooth part,
/// the peak and derivative-peak weights at the center, and the step field.
pub struct CoefficientLedger {
    pub regular: Field,
    pub delta: TimeFn,
    pub delta_prime: TimeFn,
    pub theta: Field,
    pub theta_orientation: Option<Orientation>,
}
