//! Deterministic bank of compactly supported test bumps.
//!
//! Each member is b((x - c)/w) with b(s) = exp(-1/(1-s^2)) on (-1, 1).
//! Derivatives up to third order are hard-coded; a unit test pins them to
//! frozen reference values.

/// Compactly supported bump with analytic derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestBump {
    pub center: f64,
    pub width: f64,
}

fn core(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

impl TestBump {
    pub fn new(center: f64, width: f64) -> Self {
        assert!(width > 0.0);
        TestBump { center, width }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }

    pub fn max_value(&self) -> f64 {
        (-1.0_f64).exp()
    }

    pub fn eval(&self, x: f64) -> f64 {
        core((x - self.center) / self.width)
    }

    pub fn d1(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.width;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let r = 1.0 - s * s;
        core(s) * (-2.0 * s / (r * r)) / self.width
    }

    pub fn d2(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.width;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let r = 1.0 - s * s;
        let s2 = s * s;
        core(s) * (2.0 * (3.0 * s2 * s2 - 1.0) / r.powi(4)) / (self.width * self.width)
    }

    pub fn d3(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.width;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let r = 1.0 - s * s;
        let s2 = s * s;
        let poly = 6.0 * s2 * s2 * s2 + 3.0 * s2 * s2 - 10.0 * s2 + 3.0;
        core(s) * (-4.0 * s * poly / r.powi(6)) / self.width.powi(3)
    }
}

/// Fixed eight-member bank straddling a reference point (the mid-run peak
/// position): wide and medium members over the path, narrow and medium
/// satellites in both half-regions, far sentinels on each side. Support
/// edges keep clear of the path itself: the third derivative of a bump
/// blows up toward its support boundary, and parking an edge on the peak
/// path buries the quadratic decay under an enormous higher-order constant
/// until eps is far below the sweep.
#[derive(Clone, Debug)]
pub struct TestFunctionBank {
    members: Vec<TestBump>,
}

impl TestFunctionBank {
    pub fn standard(x_ref: f64) -> Self {
        TestFunctionBank {
            members: vec![
                TestBump::new(x_ref, 2.0),
                TestBump::new(x_ref, 1.0),
                TestBump::new(x_ref - 2.5, 0.5),
                TestBump::new(x_ref + 2.5, 0.5),
                TestBump::new(x_ref - 2.0, 1.0),
                TestBump::new(x_ref + 2.0, 1.0),
                TestBump::new(x_ref - 4.0, 2.0),
                TestBump::new(x_ref + 4.0, 2.0),
            ],
        }
    }

    pub fn members(&self) -> &[TestBump] {
        &self.members
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_frozen_reference() {
        // Values from an independent symbolic differentiation of
        // exp(-1/(1-s^2)).
        let b = TestBump::new(0.0, 1.0);
        let cases = [
            (0.3, -0.241_446_982_603_229_44, -0.948_274_447_232_504_1, -1.498_978_363_971_499),
            (-0.7, 0.757_582_398_530_269, -1.163_814_999_005_416_5, -10.611_571_952_349_461),
        ];
        for (s, d1, d2, d3) in cases {
            assert!((b.d1(s) - d1).abs() < 1e-13, "d1 at {s}");
            assert!((b.d2(s) - d2).abs() < 1e-12, "d2 at {s}");
            assert!((b.d3(s) - d3).abs() < 1e-11, "d3 at {s}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences_when_scaled() {
        let b = TestBump::new(1.5, 0.75);
        let h = 1e-5;
        for &x in &[1.2, 1.5, 1.9] {
            let fd1 = (b.eval(x + h) - b.eval(x - h)) / (2.0 * h);
            assert!((b.d1(x) - fd1).abs() < 1e-8);
            let fd2 = (b.d1(x + h) - b.d1(x - h)) / (2.0 * h);
            assert!((b.d2(x) - fd2).abs() < 1e-7);
            let fd3 = (b.d2(x + h) - b.d2(x - h)) / (2.0 * h);
            assert!((b.d3(x) - fd3).abs() < 1e-6);
        }
    }

    #[test]
    fn vanishes_identically_outside_support() {
        let b = TestBump::new(0.0, 2.0);
        for &x in &[-2.0, 2.0, 5.0, -100.0] {
            assert_eq!(b.eval(x), 0.0);
            assert_eq!(b.d3(x), 0.0);
        }
    }

    #[test]
    fn bank_covers_both_sides() {
        let bank = TestFunctionBank::standard(1.0);
        assert_eq!(bank.members().len(), 8);
        assert!(bank.members().iter().any(|m| m.support().1 < 1.0));
        assert!(bank.members().iter().any(|m| m.support().0 > 1.0));
    }
}
