//! Second-order forward-mode jets: value with first and second derivative.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn var(x: f64) -> Jet {
        Jet { v: x, d1: 1.0, d2: 0.0 }
    }

    pub fn cst(x: f64) -> Jet {
        Jet { v: x, d1: 0.0, d2: 0.0 }
    }

    /// Apply a scalar function given its value and first two derivatives at `self.v`.
    fn chain(self, f: f64, f1: f64, f2: f64) -> Jet {
        Jet {
            v: f,
            d1: f1 * self.d1,
            d2: f2 * self.d1 * self.d1 + f1 * self.d2,
        }
    }

    pub fn powf(self, p: f64) -> Jet {
        let x = self.v;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    pub fn exp(self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Jet {
        let x = self.v;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn ln_1p(self) -> Jet {
        let g = 1.0 / (1.0 + self.v);
        self.chain(self.v.ln_1p(), g, -g * g)
    }

    pub fn exp_m1(self) -> Jet {
        let e = self.v.exp();
        self.chain(self.v.exp_m1(), e, e)
    }

    /// `ln(1 - exp(-x))` for `x > 0`.
    pub fn ln_1m_exp(self) -> Jet {
        let g = 1.0 / self.v.exp_m1();
        self.chain(ln_1m_exp(self.v), g, -(g + g * g))
    }
}

/// `ln(1 - exp(-x))` for `x > 0`, accurate at both ends.
pub fn ln_1m_exp(x: f64) -> f64 {
    if x < std::f64::consts::LN_2 {
        (-(-x).exp_m1()).ln()
    } else {
        (-(-x).exp()).ln_1p()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let inv = o.chain(1.0 / o.v, -1.0 / (o.v * o.v), 2.0 / (o.v * o.v * o.v));
        self * inv
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            v: -self.v,
            d1: -self.d1,
            d2: -self.d2,
        }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        Jet { v: self.v + c, ..self }
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::cst(self) - o
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self * o.v,
            d1: self * o.d1,
            d2: self * o.d2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_composite() {
        // f(x) = ln(1 + x^3) / exp(x)
        let f = |x: Jet| (Jet::cst(1.0) + x.powf(3.0)).ln() / x.exp();
        let x0 = 0.7;
        let j = f(Jet::var(x0));
        let g = |x: f64| (1.0 + x.powi(3)).ln() / x.exp();
        let h = 1e-4;
        let d1 = (g(x0 + h) - g(x0 - h)) / (2.0 * h);
        let d2 = (g(x0 + h) - 2.0 * g(x0) + g(x0 - h)) / (h * h);
        assert!((j.v - g(x0)).abs() < 1e-15);
        assert!((j.d1 - d1).abs() < 1e-8);
        assert!((j.d2 - d2).abs() < 1e-6);
    }

    #[test]
    fn special_functions_match_naive_forms() {
        let x0 = 0.37;
        let j = Jet::var(x0).ln_1m_exp();
        let g = |x: f64| (1.0 - (-x).exp()).ln();
        let h = 1e-4;
        assert!((j.v - g(x0)).abs() < 1e-14);
        assert!((j.d1 - (g(x0 + h) - g(x0 - h)) / (2.0 * h)).abs() < 1e-7);
        assert!((j.d2 - (g(x0 + h) - 2.0 * g(x0) + g(x0 - h)) / (h * h)).abs() < 1e-5);
        let e = Jet::var(x0).exp_m1();
        assert!((e.v - (x0.exp() - 1.0)).abs() < 1e-15 && e.d2 == x0.exp());
        let l = Jet::var(x0).ln_1p();
        assert!((l.d2 + 1.0 / (1.0 + x0).powi(2)).abs() < 1e-15);
        assert!((ln_1m_exp(1e-20) - (1e-20f64).ln()).abs() < 1e-12);
        assert!(ln_1m_exp(50.0).abs() < 1e-20);
    }
}
