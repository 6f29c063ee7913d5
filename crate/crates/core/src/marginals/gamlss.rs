//! Four-parameter location/scale/shape families: SHASHo, SHASHo2, SST, NET
//! and SEP4.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::numeric::roots::solve_unbounded;
use crate::numeric::special::{norm_cdf, norm_ppf, t_cdf, t_ln_pdf, t_ppf, LN_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GamlssFamily {
    /// Original sinh-arcsinh.
    #[serde(rename = "SHASHo")]
    Shasho,
    /// Sinh-arcsinh with the scale multiplied by the kurtosis parameter.
    #[serde(rename = "SHASHo2")]
    Shasho2,
    /// Skew Student-t (two-piece, mode/scale parameterisation).
    #[serde(rename = "SST")]
    Sst,
    /// Normal-exponential-t.
    #[serde(rename = "NET")]
    Net,
    /// Skew exponential power, type 4.
    #[serde(rename = "SEP4")]
    Sep4,
}

impl GamlssFamily {
    pub const ALL: [GamlssFamily; 5] = [
        GamlssFamily::Shasho,
        GamlssFamily::Shasho2,
        GamlssFamily::Sst,
        GamlssFamily::Net,
        GamlssFamily::Sep4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GamlssFamily::Shasho => "SHASHo",
            GamlssFamily::Shasho2 => "SHASHo2",
            GamlssFamily::Sst => "SST",
            GamlssFamily::Net => "NET",
            GamlssFamily::Sep4 => "SEP4",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        GamlssFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Config(format!("unknown GAMLSS family `{name}`")))
    }

    /// Whether `nu` must be strictly positive.
    pub fn positive_nu(self) -> bool {
        !matches!(self, GamlssFamily::Shasho | GamlssFamily::Shasho2)
    }
}

/// One fully resolved parameter record (location already evaluated at a time index).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GamlssParams {
    pub family: GamlssFamily,
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
    pub tau: f64,
    /// Fixed mask in `[mu, sigma, nu, tau]` order.
    #[serde(default)]
    pub fixed: [bool; 4],
}

fn ln_cosh(a: f64) -> f64 {
    let a = a.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl GamlssParams {
    pub fn new(family: GamlssFamily, mu: f64, sigma: f64, nu: f64, tau: f64) -> Result<Self> {
        let p = GamlssParams {
            family,
            mu,
            sigma,
            nu,
            tau,
            fixed: if family == GamlssFamily::Net {
                [false, false, true, true]
            } else {
                [false; 4]
            },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let name = self.family.name();
        if !(self.mu.is_finite() && self.nu.is_finite() && self.tau.is_finite()) {
            return Err(Error::Domain(format!("{name}: non-finite parameter")));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Domain(format!("{name}: sigma must be > 0, got {}", self.sigma)));
        }
        if self.family.positive_nu() && self.nu <= 0.0 {
            return Err(Error::Domain(format!("{name}: nu must be > 0, got {}", self.nu)));
        }
        if self.tau <= 0.0 {
            return Err(Error::Domain(format!("{name}: tau must be > 0, got {}", self.tau)));
        }
        if self.family == GamlssFamily::Net && self.tau <= self.nu.max(1.0 / self.nu) {
            return Err(Error::Domain(format!(
                "NET: tau must exceed max(nu, 1/nu) = {}, got {}",
                self.nu.max(1.0 / self.nu),
                self.tau
            )));
        }
        Ok(())
    }

    /// Standardised argument `z` for the family.
    fn z(&self, x: f64) -> f64 {
        match self.family {
            GamlssFamily::Shasho2 => (x - self.mu) / (self.sigma * self.tau),
            _ => (x - self.mu) / self.sigma,
        }
    }

    fn x_of_z(&self, z: f64) -> f64 {
        match self.family {
            GamlssFamily::Shasho2 => self.mu + self.sigma * self.tau * z,
            _ => self.mu + self.sigma * z,
        }
    }

    fn net_constants(&self) -> (f64, f64, f64) {
        let (nu, tau) = (self.nu, self.tau);
        let c1 = (2.0 * std::f64::consts::PI).sqrt() * (2.0 * norm_cdf(nu) - 1.0);
        let c2 = 2.0 / nu * (-0.5 * nu * nu).exp();
        let c3 = 2.0 / ((nu * tau - 1.0) * nu) * (-nu * tau + 0.5 * nu * nu).exp();
        (c1, c2, c3)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = self.z(x);
        match self.family {
            GamlssFamily::Shasho | GamlssFamily::Shasho2 => {
                let a = self.tau * z.asinh() - self.nu;
                let r = a.sinh();
                let ln_tau = if self.family == GamlssFamily::Shasho {
                    self.tau.ln()
                } else {
                    0.0
                };
                ln_tau + ln_cosh(a) - self.sigma.ln() - LN_SQRT_2PI - 0.5 * z.mul_add(z, 1.0).ln()
                    - 0.5 * r * r
            }
            GamlssFamily::Sst => {
                let nu = self.nu;
                let w = if z < 0.0 { nu * z } else { z / nu };
                (2.0 * nu / (1.0 + nu * nu)).ln() - self.sigma.ln() + t_ln_pdf(w, self.tau)
            }
            GamlssFamily::Net => {
                let (c1, c2, c3) = self.net_constants();
                let (nu, tau) = (self.nu, self.tau);
                let az = z.abs();
                let kernel = if az <= nu {
                    -0.5 * z * z
                } else if az <= tau {
                    -nu * az + 0.5 * nu * nu
                } else {
                    -nu * tau * (az / tau).ln() - nu * tau + 0.5 * nu * nu
                };
                kernel - (c1 + c2 + c3).ln() - self.sigma.ln()
            }
            GamlssFamily::Sep4 => {
                let ln_c = -(ln_gamma(1.0 + 1.0 / self.nu).exp() + ln_gamma(1.0 + 1.0 / self.tau).exp()).ln();
                let power = if z < 0.0 { self.nu } else { self.tau };
                ln_c - self.sigma.ln() - z.abs().powf(power)
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        let z = self.z(x);
        match self.family {
            GamlssFamily::Shasho | GamlssFamily::Shasho2 => {
                norm_cdf((self.tau * z.asinh() - self.nu).sinh())
            }
            GamlssFamily::Sst => {
                let nu = self.nu;
                let k = 1.0 + nu * nu;
                if z < 0.0 {
                    2.0 / k * t_cdf(nu * z, self.tau)
                } else {
                    1.0 / k + 2.0 * nu * nu / k * (t_cdf(z / nu, self.tau) - 0.5)
                }
            }
            GamlssFamily::Net => {
                let half = self.net_half_mass(z.abs());
                if z < 0.0 {
                    0.5 - half
                } else {
                    0.5 + half
                }
            }
            GamlssFamily::Sep4 => {
                let g_left = ln_gamma(1.0 + 1.0 / self.nu).exp();
                let g_right = ln_gamma(1.0 + 1.0 / self.tau).exp();
                let c = 1.0 / (g_left + g_right);
                if z < 0.0 {
                    c * g_left * gamma_ur(1.0 / self.nu, (-z).powf(self.nu))
                } else if z == 0.0 {
                    c * g_left
                } else {
                    c * g_left + c * g_right * gamma_lr(1.0 / self.tau, z.powf(self.tau))
                }
            }
        }
    }

    /// Probability mass of `z` in `[0, a]` for the NET family.
    fn net_half_mass(&self, a: f64) -> f64 {
        let (c1, c2, c3) = self.net_constants();
        let c = 1.0 / (c1 + c2 + c3);
        let (nu, tau) = (self.nu, self.tau);
        let root_2pi = (2.0 * std::f64::consts::PI).sqrt();
        let core = |b: f64| root_2pi * (norm_cdf(b) - 0.5);
        let shoulder = |b: f64| ((-0.5 * nu * nu).exp() - (-nu * b + 0.5 * nu * nu).exp()) / nu;
        let mass = if a <= nu {
            core(a)
        } else if a <= tau {
            core(nu) + shoulder(a)
        } else {
            let edge = (-nu * tau + 0.5 * nu * nu).exp();
            core(nu) + shoulder(tau) + edge * tau / (nu * tau - 1.0) * (1.0 - (a / tau).powf(1.0 - nu * tau))
        };
        c * mass
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Argument(format!("quantile level must lie in (0,1), got {u}")));
        }
        let z = match self.family {
            GamlssFamily::Shasho | GamlssFamily::Shasho2 => {
                ((norm_ppf(u).asinh() + self.nu) / self.tau).sinh()
            }
            GamlssFamily::Sst => {
                let nu = self.nu;
                let k = 1.0 + nu * nu;
                if u < 1.0 / k {
                    t_ppf(u * k / 2.0, self.tau) / nu
                } else {
                    nu * t_ppf(0.5 + (u - 1.0 / k) * k / (2.0 * nu * nu), self.tau)
                }
            }
            GamlssFamily::Net | GamlssFamily::Sep4 => {
                let x = solve_unbounded(
                    |x| self.cdf(x) - u,
                    self.mu - self.sigma,
                    self.mu + self.sigma,
                    1e-14 * self.sigma,
                )?;
                return Ok(x);
            }
        };
        Ok(self.x_of_z(z))
    }
}
