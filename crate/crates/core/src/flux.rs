//! Polynomial flux functions f(u) and the derived quantities the
//! conservation-law machinery needs: derivatives, the primitive
//! F1(u) = int_0^u f, and the entropy flux 2 u f(u) - 2 F1(u) that pairs
//! with the entropy u^2.

use std::fmt;

/// Flux as a polynomial sum_k c_k u^k. Coefficients are stored from the
/// constant term upward. All derivatives and primitives are exact.
#[derive(Clone, Debug, PartialEq)]
pub struct Flux {
    coeffs: Vec<f64>,
}

impl Flux {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Flux { coeffs }
    }

    /// f(u) = u^2, the quadratic flux of the Hopf equation.
    pub fn quadratic() -> Self {
        Flux::new(vec![0.0, 0.0, 1.0])
    }

    /// f(u) = u^3.
    pub fn cubic() -> Self {
        Flux::new(vec![0.0, 0.0, 0.0, 1.0])
    }

    /// f(u) = u^2 + beta u^3.
    pub fn quadratic_cubic(beta: f64) -> Self {
        Flux::new(vec![0.0, 0.0, 1.0, beta])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_quadratic(&self) -> bool {
        self.coeffs == [0.0, 0.0, 1.0]
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    /// f'(u).
    pub fn d1(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * u + k as f64 * c;
        }
        acc
    }

    /// f''(u).
    pub fn d2(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(2).rev() {
            acc = acc * u + (k * (k - 1)) as f64 * c;
        }
        acc
    }

    /// f'''(u).
    pub fn d3(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(3).rev() {
            acc = acc * u + (k * (k - 1) * (k - 2)) as f64 * c;
        }
        acc
    }

    /// Primitive F1(u) = int_0^u f(z) dz, exact.
    pub fn primitive(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * u + c / (k + 1) as f64;
        }
        acc * u
    }

    /// Entropy flux q(u) = 2 u f(u) - 2 int_0^u f(z) dz, the flux paired
    /// with the entropy u^2 in the second conservation law.
    pub fn entropy_flux(&self, u: f64) -> f64 {
        2.0 * u * self.eval(u) - 2.0 * self.primitive(u)
    }
}

impl fmt::Display for Flux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*u")?,
                _ => write!(f, "{c}*u^{k}")?,
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_values() {
        let f = Flux::quadratic();
        assert_eq!(f.eval(3.0), 9.0);
        assert_eq!(f.d1(3.0), 6.0);
        assert_eq!(f.d2(3.0), 2.0);
        assert_eq!(f.d3(3.0), 0.0);
        assert_eq!(f.primitive(3.0), 9.0);
        // 2 u^3 - 2 u^3/3 = 4/3 u^3
        assert!((f.entropy_flux(3.0) - 36.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_flux_derivatives_match_finite_differences() {
        let f = Flux::quadratic_cubic(0.1);
        let h = 1e-5;
        for &u in &[-1.0, 0.3, 2.0] {
            let fd = (f.eval(u + h) - f.eval(u - h)) / (2.0 * h);
            assert!((f.d1(u) - fd).abs() < 1e-8);
            let fd2 = (f.d1(u + h) - f.d1(u - h)) / (2.0 * h);
            assert!((f.d2(u) - fd2).abs() < 1e-8);
        }
    }

    #[test]
    fn primitive_is_antiderivative() {
        let f = Flux::new(vec![1.0, -2.0, 0.5, 0.25]);
        let h = 1e-6;
        let u = 1.37;
        let fd = (f.primitive(u + h) - f.primitive(u - h)) / (2.0 * h);
        assert!((fd - f.eval(u)).abs() < 1e-8);
    }
}
