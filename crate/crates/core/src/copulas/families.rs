//! Unrotated densities, distribution functions and h-functions of every family.
//!
//! `h1(u, v) = C(u | v) = dC/dv` and `h2(u, v) = C(v | u) = dC/du`.

use statrs::function::gamma::ln_gamma;

use super::jet::{ln_1m_exp, Jet};
use super::Family;
use crate::numeric::quadrature::integrate;
use crate::numeric::roots::brent_root;
use crate::numeric::special::{norm_cdf, norm_ppf, t_cdf, t_ppf};
use crate::numeric::U_EPS;

/// Archimedean generator `phi` with inverse `psi`.
#[derive(Debug, Clone, Copy)]
pub enum Generator {
    Clayton(f64),
    Gumbel(f64),
    Frank(f64),
    Joe(f64),
    Bb1(f64, f64),
    Bb6(f64, f64),
    Bb7(f64, f64),
    Bb8(f64, f64),
}

impl Generator {
    pub fn of(family: Family, p: &[f64]) -> Option<Generator> {
        Some(match family {
            Family::Clayton => Generator::Clayton(p[0]),
            Family::Gumbel => Generator::Gumbel(p[0]),
            Family::Frank => Generator::Frank(p[0]),
            Family::Joe => Generator::Joe(p[0]),
            Family::Bb1 => Generator::Bb1(p[0], p[1]),
            Family::Bb6 => Generator::Bb6(p[0], p[1]),
            Family::Bb7 => Generator::Bb7(p[0], p[1]),
            Family::Bb8 => Generator::Bb8(p[0], p[1]),
            _ => return None,
        })
    }

    /// `phi(t)` with its first two derivatives in `t`, given `t` and `1 - t`
    /// separately so that neither end loses precision.
    pub fn phi2(&self, t: f64, tb: f64) -> Jet {
        let x = Jet::var(t);
        let xb = Jet { v: tb, d1: -1.0, d2: 0.0 };
        let ln_x = |_: ()| if t < 0.5 { x.ln() } else { (-xb).ln_1p() };
        let ln_xb = |_: ()| if tb < 0.5 { xb.ln() } else { (-x).ln_1p() };
        match *self {
            Generator::Clayton(th) => (1.0 / th) * (-th * ln_x(())).exp_m1(),
            Generator::Gumbel(th) => (-ln_x(())).powf(th),
            Generator::Frank(th) => -((-th * x).exp_m1() / Jet::cst((-th).exp_m1())).ln(),
            Generator::Joe(th) => -(-th * ln_xb(())).ln_1m_exp(),
            Generator::Bb1(th, de) => (-th * ln_x(())).exp_m1().powf(de),
            Generator::Bb6(th, de) => (-(-th * ln_xb(())).ln_1m_exp()).powf(de),
            Generator::Bb7(th, de) => (-de * (-th * ln_xb(())).ln_1m_exp()).exp_m1(),
            Generator::Bb8(th, de) => {
                let ln_base = if de >= 1.0 { ln_xb(()) } else { (Jet::cst(1.0 - de) + de * xb).ln() };
                let ln_eta = ln_1m_exp(-th * (-de).ln_1p());
                -(-th * ln_base).ln_1m_exp() + Jet::cst(ln_eta)
            }
        }
    }

    pub fn phi(&self, t: f64) -> Jet {
        self.phi2(t, 1.0 - t)
    }

    /// Inverse generator, returning `(C, 1 - C)`.
    pub fn psi2(&self, s: f64) -> (f64, f64) {
        // ln(1 - C) for the families built on powers of 1 - t
        let upper = |l: f64| (-l.exp_m1(), l.exp());
        match *self {
            Generator::Clayton(th) => {
                let l = -(th * s).ln_1p() / th;
                (l.exp(), -l.exp_m1())
            }
            Generator::Gumbel(th) => {
                let z = -s.powf(1.0 / th);
                (z.exp(), -z.exp_m1())
            }
            Generator::Frank(th) => {
                let c = -((-s).exp() * (-th).exp_m1()).ln_1p() / th;
                (c, 1.0 - c)
            }
            Generator::Joe(th) => upper(ln_1m_exp(s) / th),
            Generator::Bb1(th, de) => {
                let l = -s.powf(1.0 / de).ln_1p() / th;
                (l.exp(), -l.exp_m1())
            }
            Generator::Bb6(th, de) => upper(ln_1m_exp(s.powf(1.0 / de)) / th),
            Generator::Bb7(th, de) => upper(ln_1m_exp(s.ln_1p() / de) / th),
            Generator::Bb8(th, de) => {
                let ln_eta = ln_1m_exp(-th * (-de).ln_1p());
                if de >= 1.0 {
                    return upper(ln_1m_exp(s) / th);
                }
                // m = 1 - eta e^-s, with 1 - de C = m^(1/th)
                let floor = th * (-de).ln_1p();
                let ln_m = (floor.exp() - ln_eta.exp() * (-s).exp_m1()).ln();
                let r = ln_m / th;
                let c = -r.exp_m1() / de;
                let cb = (1.0 - de) * (r - (-de).ln_1p()).exp_m1() / de;
                (c, cb)
            }
        }
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.psi2(s).0
    }

    fn cdf2(&self, u: f64, v: f64) -> (f64, f64) {
        self.psi2(self.phi(u).v + self.phi(v).v)
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        self.cdf2(u, v).0
    }

    pub fn h1(&self, u: f64, v: f64) -> f64 {
        let (c, cb) = self.cdf2(u, v);
        let dv = self.phi(v).d1;
        let dc = self.phi2(c, cb).d1;
        (dv.abs().ln() - dc.abs().ln()).exp().min(1.0)
    }

    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        let (c, cb) = self.cdf2(u, v);
        let pc = self.phi2(c, cb);
        let pu = self.phi(u).d1;
        let pv = self.phi(v).d1;
        pc.d2.ln() + pu.abs().ln() + pv.abs().ln() - 3.0 * pc.d1.abs().ln()
    }

    /// Kendall's tau as `1 + 4 * int_0^1 phi / phi'`.
    pub fn tau(&self) -> f64 {
        let r = integrate(
            |t| {
                let j = self.phi(t);
                let q = j.v / j.d1;
                if q.is_finite() {
                    q
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
            1e-11,
            1e-10,
        );
        match r {
            Ok(i) => 1.0 + 4.0 * i.value,
            Err(_) => f64::NAN,
        }
    }
}

/// Extreme-value stable tail function of the Tawn families:
/// `l(x, y) = (1 - p1) x + (1 - p2) y + ((p1 x)^th + (p2 y)^th)^(1/th)`.
#[derive(Debug, Clone, Copy)]
pub struct Tawn {
    pub theta: f64,
    pub psi1: f64,
    pub psi2: f64,
}

impl Tawn {
    pub fn of(family: Family, p: &[f64]) -> Option<Tawn> {
        match family {
            Family::Tawn1 => Some(Tawn {
                theta: p[0],
                psi1: p[1],
                psi2: 1.0,
            }),
            Family::Tawn2 => Some(Tawn {
                theta: p[0],
                psi1: 1.0,
                psi2: p[1],
            }),
            Family::Gumbel => Some(Tawn {
                theta: p[0],
                psi1: 1.0,
                psi2: 1.0,
            }),
            _ => None,
        }
    }

    /// `(l, l_x, l_y, l_xy)`.
    pub fn ell(&self, x: f64, y: f64) -> (f64, f64, f64, f64) {
        let th = self.theta;
        let a = (self.psi1 * x).powf(th);
        let b = (self.psi2 * y).powf(th);
        let s = a + b;
        if s <= 0.0 {
            return ((1.0 - self.psi1) * x + (1.0 - self.psi2) * y, 1.0 - self.psi1, 1.0 - self.psi2, 0.0);
        }
        let r = s.powf(1.0 / th);
        let l = (1.0 - self.psi1) * x + (1.0 - self.psi2) * y + r;
        // x^(th-1) psi1^th = a / x
        let ax = if x > 0.0 { a / x } else { 0.0 };
        let by = if y > 0.0 { b / y } else { 0.0 };
        let lx = (1.0 - self.psi1) + ax * r / s;
        let ly = (1.0 - self.psi2) + by * r / s;
        let lxy = (1.0 - th) * ax * by * r / (s * s);
        (l, lx, ly, lxy)
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        (-self.ell(-u.ln(), -v.ln()).0).exp()
    }

    pub fn h1(&self, u: f64, v: f64) -> f64 {
        let (l, _, ly, _) = self.ell(-u.ln(), -v.ln());
        (-l).exp() * ly / v
    }

    pub fn h2(&self, u: f64, v: f64) -> f64 {
        let (l, lx, _, _) = self.ell(-u.ln(), -v.ln());
        (-l).exp() * lx / u
    }

    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        let (l, lx, ly, lxy) = self.ell(-u.ln(), -v.ln());
        -l - u.ln() - v.ln() + (lx * ly - lxy).ln()
    }

    /// Pickands dependence function `A(w) = l(1 - w, w)`.
    pub fn pickands(&self, w: f64) -> f64 {
        self.ell(1.0 - w, w).0
    }

    /// Kendall's tau as `int_0^1 -l_xy(1 - w, w) / A(w) dw`.
    pub fn tau(&self) -> f64 {
        let r = integrate(
            |w| {
                let (l, _, _, lxy) = self.ell(1.0 - w, w);
                -lxy / l
            },
            0.0,
            1.0,
            1e-11,
            1e-10,
        );
        r.map(|i| i.value).unwrap_or(f64::NAN)
    }
}

pub fn gaussian_ln_pdf_xy(x: f64, y: f64, rho: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    -0.5 * r2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)
}

pub fn t_ln_pdf_xy(x: f64, y: f64, rho: f64, nu: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    let k = ln_gamma((nu + 2.0) / 2.0) + ln_gamma(nu / 2.0) - 2.0 * ln_gamma((nu + 1.0) / 2.0) - 0.5 * r2.ln();
    let q = (x * x + y * y - 2.0 * rho * x * y) / (nu * r2);
    k - (nu + 2.0) / 2.0 * q.ln_1p() + (nu + 1.0) / 2.0 * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
}

fn frank_parts(th: f64, u: f64, v: f64) -> (f64, f64, f64) {
    ((-th * u).exp_m1(), (-th * v).exp_m1(), (-th).exp_m1())
}

/// Natural log of the unrotated density.
pub fn ln_pdf(family: Family, p: &[f64], u: f64, v: f64) -> f64 {
    match family {
        Family::Independence => 0.0,
        Family::Gaussian => gaussian_ln_pdf_xy(norm_ppf(u), norm_ppf(v), p[0]),
        Family::StudentT => t_ln_pdf_xy(t_ppf(u, p[1]), t_ppf(v, p[1]), p[0], p[1]),
        Family::Clayton => {
            let th = p[0];
            let s = u.powf(-th) + v.powf(-th) - 1.0;
            th.ln_1p() - (1.0 + th) * (u.ln() + v.ln()) - (2.0 + 1.0 / th) * s.ln()
        }
        Family::Gumbel => {
            let th = p[0];
            let (x, y) = (-u.ln(), -v.ln());
            let a = (x.powf(th) + y.powf(th)).powf(1.0 / th);
            -a - u.ln() - v.ln() + (th - 1.0) * (x.ln() + y.ln()) + (1.0 - 2.0 * th) * a.ln() + (a + th - 1.0).ln()
        }
        Family::Frank => {
            let th = p[0];
            if th.abs() < 1e-10 {
                return 0.0;
            }
            let (au, av, k) = frank_parts(th, u, v);
            (-th * k).ln() - th * (u + v) - 2.0 * (k + au * av).abs().ln()
        }
        Family::Joe => {
            let th = p[0];
            let a = (1.0 - u).powf(th);
            let b = (1.0 - v).powf(th);
            let s = a + b - a * b;
            (1.0 / th - 2.0) * s.ln() + (th - 1.0) * ((1.0 - u).ln() + (1.0 - v).ln()) + (th - 1.0 + s).ln()
        }
        Family::Bb1 | Family::Bb6 | Family::Bb7 | Family::Bb8 => Generator::of(family, p).unwrap().ln_pdf(u, v),
        Family::Tawn1 | Family::Tawn2 => Tawn::of(family, p).unwrap().ln_pdf(u, v),
    }
}

/// Unrotated distribution function; `None` for the elliptical families.
pub fn cdf(family: Family, p: &[f64], u: f64, v: f64) -> Option<f64> {
    Some(match family {
        Family::Independence => u * v,
        Family::Gaussian | Family::StudentT => return None,
        Family::Clayton => (u.powf(-p[0]) + v.powf(-p[0]) - 1.0).powf(-1.0 / p[0]),
        Family::Gumbel => Tawn::of(family, p).unwrap().cdf(u, v),
        Family::Frank => {
            let th = p[0];
            if th.abs() < 1e-10 {
                return Some(u * v);
            }
            let (au, av, k) = frank_parts(th, u, v);
            -(au * av / k).ln_1p() / th
        }
        Family::Joe => {
            let th = p[0];
            let a = (1.0 - u).powf(th);
            let b = (1.0 - v).powf(th);
            1.0 - (a + b - a * b).powf(1.0 / th)
        }
        Family::Bb1 | Family::Bb6 | Family::Bb7 | Family::Bb8 => Generator::of(family, p).unwrap().cdf(u, v),
        Family::Tawn1 | Family::Tawn2 => Tawn::of(family, p).unwrap().cdf(u, v),
    })
}

/// `C(u | v)` for the unrotated copula.
pub fn h1(family: Family, p: &[f64], u: f64, v: f64) -> f64 {
    match family {
        Family::Independence => u,
        Family::Gaussian => {
            let rho = p[0];
            norm_cdf((norm_ppf(u) - rho * norm_ppf(v)) / (1.0 - rho * rho).sqrt())
        }
        Family::StudentT => {
            let (rho, nu) = (p[0], p[1]);
            let x = t_ppf(u, nu);
            let y = t_ppf(v, nu);
            let s = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
            t_cdf((x - rho * y) / s, nu + 1.0)
        }
        Family::Clayton => {
            let th = p[0];
            let s = u.powf(-th) + v.powf(-th) - 1.0;
            (-(th + 1.0) * v.ln() - (1.0 / th + 1.0) * s.ln()).exp()
        }
        Family::Gumbel => Tawn::of(family, p).unwrap().h1(u, v),
        Family::Frank => {
            let th = p[0];
            if th.abs() < 1e-10 {
                return u;
            }
            let (au, av, k) = frank_parts(th, u, v);
            (-th * v).exp() * au / (k + au * av)
        }
        Family::Joe => {
            let th = p[0];
            let a = (1.0 - u).powf(th);
            let b = (1.0 - v).powf(th);
            let s = a + b - a * b;
            (1.0 - v).powf(th - 1.0) * (1.0 - a) * s.powf(1.0 / th - 1.0)
        }
        Family::Bb1 | Family::Bb6 | Family::Bb7 | Family::Bb8 => Generator::of(family, p).unwrap().h1(u, v),
        Family::Tawn1 | Family::Tawn2 => Tawn::of(family, p).unwrap().h1(u, v),
    }
}

/// `C(v | u)` for the unrotated copula.
pub fn h2(family: Family, p: &[f64], u: f64, v: f64) -> f64 {
    match family {
        Family::Tawn1 | Family::Tawn2 => Tawn::of(family, p).unwrap().h2(u, v),
        _ => h1(family, p, v, u),
    }
}

/// Solve `f(x) = w` for increasing `f` on the clamped unit interval.
fn invert_increasing<F: Fn(f64) -> f64>(f: F, w: f64) -> f64 {
    let lo = U_EPS;
    let hi = 1.0 - U_EPS;
    if f(lo) >= w {
        return lo;
    }
    if f(hi) <= w {
        return hi;
    }
    brent_root(|x| f(x) - w, lo, hi, 1e-16, 300).unwrap_or(0.5)
}

/// Numerical inverse of `h1` in its first argument.
pub fn hinv1_numeric(family: Family, p: &[f64], w: f64, v: f64) -> f64 {
    invert_increasing(|u| h1(family, p, u, v), w)
}

/// Numerical inverse of `h2` in its second argument.
pub fn hinv2_numeric(family: Family, p: &[f64], w: f64, u: f64) -> f64 {
    invert_increasing(|v| h2(family, p, u, v), w)
}

/// `u` with `h1(u, v) = w`.
pub fn hinv1(family: Family, p: &[f64], w: f64, v: f64) -> f64 {
    match family {
        Family::Independence => w,
        Family::Gaussian => {
            let rho = p[0];
            norm_cdf(norm_ppf(w) * (1.0 - rho * rho).sqrt() + rho * norm_ppf(v))
        }
        Family::StudentT => {
            let (rho, nu) = (p[0], p[1]);
            let y = t_ppf(v, nu);
            let s = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
            t_cdf(t_ppf(w, nu + 1.0) * s + rho * y, nu)
        }
        Family::Clayton => {
            let th = p[0];
            let inner = (w * v.powf(th + 1.0)).powf(-th / (th + 1.0)) + 1.0 - v.powf(-th);
            inner.powf(-1.0 / th)
        }
        Family::Frank => {
            let th = p[0];
            if th.abs() < 1e-10 {
                return w;
            }
            let k = (-th).exp_m1();
            let b = (-th * v).exp_m1();
            -(w * k / (1.0 + b * (1.0 - w))).ln_1p() / th
        }
        _ => hinv1_numeric(family, p, w, v),
    }
}

/// `v` with `h2(u, v) = w`.
pub fn hinv2(family: Family, p: &[f64], w: f64, u: f64) -> f64 {
    match family {
        Family::Tawn1 | Family::Tawn2 => hinv2_numeric(family, p, w, u),
        _ => hinv1(family, p, w, u),
    }
}

/// Debye function `D1(x) = (1/x) int_0^x t / (e^t - 1) dt`.
pub fn debye1(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        return 1.0;
    }
    let f = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    let (a, b, sign) = if x > 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
    let r = integrate(f, a, b, 1e-14, 1e-13).map(|i| i.value).unwrap_or(f64::NAN);
    sign * r / x
}

/// Kendall's tau of the unrotated copula.
pub fn tau(family: Family, p: &[f64]) -> f64 {
    match family {
        Family::Independence => 0.0,
        Family::Gaussian | Family::StudentT => 2.0 * p[0].asin() / std::f64::consts::PI,
        Family::Clayton => p[0] / (p[0] + 2.0),
        Family::Gumbel => 1.0 - 1.0 / p[0],
        Family::Frank => {
            let th = p[0];
            if th.abs() < 1e-10 {
                0.0
            } else {
                1.0 - 4.0 / th * (1.0 - debye1(th))
            }
        }
        Family::Bb1 => 1.0 - 2.0 / (p[1] * (p[0] + 2.0)),
        Family::Joe | Family::Bb6 | Family::Bb7 | Family::Bb8 => Generator::of(family, p).unwrap().tau(),
        Family::Tawn1 | Family::Tawn2 => Tawn::of(family, p).unwrap().tau(),
    }
}
