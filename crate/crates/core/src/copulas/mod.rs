//! Bivariate copula catalog with rotations, h-functions, sampling,
//! Kendall's tau and maximum-likelihood fitting.

pub mod families;
pub mod fit;
pub mod jet;
pub mod tau;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::clamp_unit;
use crate::numeric::rng::{open_uniform, stream_rng};

pub use fit::{fit_mle, select_family, Criterion};
pub use tau::{empirical_kendall_tau, kendall_tau_pairs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    Independence,
    Gaussian,
    #[serde(rename = "StudentT")]
    StudentT,
    Clayton,
    Gumbel,
    Frank,
    Joe,
    #[serde(rename = "BB1")]
    Bb1,
    #[serde(rename = "BB6")]
    Bb6,
    #[serde(rename = "BB7")]
    Bb7,
    #[serde(rename = "BB8")]
    Bb8,
    Tawn1,
    Tawn2,
}

impl Family {
    /// Catalog order, also used for tie-breaking.
    pub const ALL: [Family; 13] = [
        Family::Independence,
        Family::Gaussian,
        Family::StudentT,
        Family::Clayton,
        Family::Gumbel,
        Family::Frank,
        Family::Joe,
        Family::Bb1,
        Family::Bb6,
        Family::Bb7,
        Family::Bb8,
        Family::Tawn1,
        Family::Tawn2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Independence => "Independence",
            Family::Gaussian => "Gaussian",
            Family::StudentT => "StudentT",
            Family::Clayton => "Clayton",
            Family::Gumbel => "Gumbel",
            Family::Frank => "Frank",
            Family::Joe => "Joe",
            Family::Bb1 => "BB1",
            Family::Bb6 => "BB6",
            Family::Bb7 => "BB7",
            Family::Bb8 => "BB8",
            Family::Tawn1 => "Tawn1",
            Family::Tawn2 => "Tawn2",
        }
    }

    pub fn parse(name: &str) -> Result<Family> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(name) || (name.eq_ignore_ascii_case("t") && *f == Family::StudentT))
            .ok_or_else(|| Error::Config(format!("unknown copula family `{name}`")))
    }

    pub fn catalog_index(self) -> usize {
        Family::ALL.iter().position(|f| *f == self).unwrap_or(usize::MAX)
    }

    pub fn n_params(self) -> usize {
        match self {
            Family::Independence => 0,
            Family::Gaussian | Family::Clayton | Family::Gumbel | Family::Frank | Family::Joe => 1,
            _ => 2,
        }
    }

    /// Families whose rotated versions are distinct copulas.
    pub fn rotatable(self) -> bool {
        !matches!(
            self,
            Family::Independence | Family::Gaussian | Family::StudentT | Family::Frank
        )
    }

    pub fn exchangeable(self) -> bool {
        !matches!(self, Family::Tawn1 | Family::Tawn2)
    }

    /// Admissible closed box `(lower, upper)` per parameter, as used by the fitter.
    pub fn bounds(self) -> Vec<(f64, f64)> {
        match self {
            Family::Independence => vec![],
            Family::Gaussian => vec![(-0.999, 0.999)],
            Family::StudentT => vec![(-0.999, 0.999), (2.001, 30.0)],
            Family::Clayton => vec![(1e-4, 28.0)],
            Family::Gumbel => vec![(1.0, 17.0)],
            Family::Frank => vec![(-35.0, 35.0)],
            Family::Joe => vec![(1.0, 30.0)],
            Family::Bb1 => vec![(1e-4, 7.0), (1.0, 7.0)],
            Family::Bb6 => vec![(1.0, 6.0), (1.0, 8.0)],
            Family::Bb7 => vec![(1.0, 6.0), (0.01, 25.0)],
            Family::Bb8 => vec![(1.0, 8.0), (1e-4, 1.0)],
            Family::Tawn1 | Family::Tawn2 => vec![(1.0, 20.0), (0.0, 1.0)],
        }
    }

    pub fn has_closed_cdf(self) -> bool {
        !matches!(self, Family::Gaussian | Family::StudentT)
    }

    /// Rotations to consider for a sample with Kendall's tau of the given sign.
    pub fn rotations_for_sign(self, positive: bool) -> Vec<Rotation> {
        if !self.rotatable() {
            return vec![Rotation::R0];
        }
        if positive {
            vec![Rotation::R0, Rotation::R180]
        } else {
            vec![Rotation::R90, Rotation::R270]
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Counter-clockwise rotation of the copula density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    pub fn from_degrees(d: u16) -> Result<Rotation> {
        match d {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            _ => Err(Error::Config(format!("rotation must be 0, 90, 180 or 270, got {d}"))),
        }
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u16(self.degrees())
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u16::deserialize(d)?;
        Rotation::from_degrees(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    /// Kendall's tau implied by the fitted parameters.
    pub tau: f64,
    /// Empirical Kendall's tau of the fitted sample.
    pub empirical_tau: f64,
    pub n: usize,
}

/// One bivariate copula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub family: Family,
    #[serde(default)]
    pub rotation: Rotation,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<FitStats>,
}

impl CopulaSpec {
    pub fn new(family: Family, rotation: Rotation, params: &[f64]) -> Result<CopulaSpec> {
        let spec = CopulaSpec {
            family,
            rotation,
            params: params.to_vec(),
            stats: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn independence() -> CopulaSpec {
        CopulaSpec {
            family: Family::Independence,
            rotation: Rotation::R0,
            params: vec![],
            stats: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.family;
        if self.params.len() != f.n_params() {
            return Err(Error::Domain(format!(
                "{f} takes {} parameters, got {}",
                f.n_params(),
                self.params.len()
            )));
        }
        if self.rotation != Rotation::R0 && !f.rotatable() {
            return Err(Error::Domain(format!("{f} does not admit rotation {}", self.rotation.degrees())));
        }
        for (i, (&x, (lo, hi))) in self.params.iter().zip(f.bounds()).enumerate() {
            let ok = match (f, i) {
                (Family::Gaussian, 0) | (Family::StudentT, 0) => x > -1.0 && x < 1.0,
                (Family::StudentT, 1) => x > 2.0 && x <= hi,
                (Family::Clayton, 0) | (Family::Bb1, 0) | (Family::Bb7, 1) | (Family::Bb8, 1) => x > 0.0 && x <= hi,
                (Family::Frank, 0) => x.is_finite() && x.abs() <= hi,
                _ => x >= lo && x <= hi,
            };
            if !ok || !x.is_finite() {
                return Err(Error::Domain(format!("{f} parameter {} = {x} outside its admissible range", i + 1)));
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params()
    }

    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let (a, b) = match self.rotation {
            Rotation::R0 => (u, v),
            Rotation::R90 => (1.0 - u, v),
            Rotation::R180 => (1.0 - u, 1.0 - v),
            Rotation::R270 => (u, 1.0 - v),
        };
        let l = families::ln_pdf(self.family, &self.params, a, b);
        if l.is_nan() {
            f64::NEG_INFINITY
        } else {
            l
        }
    }

    pub fn pdf(&self, u: f64, v: f64) -> f64 {
        self.ln_pdf(u, v).exp()
    }

    /// Distribution function where a closed form exists.
    pub fn cdf(&self, u: f64, v: f64) -> Option<f64> {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let c = |a, b| families::cdf(self.family, &self.params, a, b);
        Some(match self.rotation {
            Rotation::R0 => c(u, v)?,
            Rotation::R90 => v - c(1.0 - u, v)?,
            Rotation::R180 => u + v - 1.0 + c(1.0 - u, 1.0 - v)?,
            Rotation::R270 => u - c(u, 1.0 - v)?,
        })
    }

    fn finish(h: f64) -> f64 {
        if h.is_nan() {
            0.5
        } else {
            clamp_unit(h)
        }
    }

    /// `which = 1`: `C(u | v) = dC/dv`; `which = 2`: `C(v | u) = dC/du`.
    pub fn hfunc(&self, u: f64, v: f64, which: u8) -> f64 {
        if which == 2 {
            self.h2(u, v)
        } else {
            self.h1(u, v)
        }
    }

    pub fn h1(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let f = |a, b| families::h1(self.family, &self.params, a, b);
        Self::finish(match self.rotation {
            Rotation::R0 => f(u, v),
            Rotation::R90 => 1.0 - f(1.0 - u, v),
            Rotation::R180 => 1.0 - f(1.0 - u, 1.0 - v),
            Rotation::R270 => f(u, 1.0 - v),
        })
    }

    pub fn h2(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let f = |a, b| families::h2(self.family, &self.params, a, b);
        Self::finish(match self.rotation {
            Rotation::R0 => f(u, v),
            Rotation::R90 => f(1.0 - u, v),
            Rotation::R180 => 1.0 - f(1.0 - u, 1.0 - v),
            Rotation::R270 => 1.0 - f(u, 1.0 - v),
        })
    }

    /// Inverse of `hfunc` in the conditioned argument.
    pub fn hfunc_inverse(&self, w: f64, cond: f64, which: u8) -> f64 {
        if which == 2 {
            self.hinv2(w, cond)
        } else {
            self.hinv1(w, cond)
        }
    }

    /// `u` with `h1(u, v) = w`.
    pub fn hinv1(&self, w: f64, v: f64) -> f64 {
        let (w, v) = (clamp_unit(w), clamp_unit(v));
        let f = |a, b| families::hinv1(self.family, &self.params, a, b);
        Self::finish(match self.rotation {
            Rotation::R0 => f(w, v),
            Rotation::R90 => 1.0 - f(1.0 - w, v),
            Rotation::R180 => 1.0 - f(1.0 - w, 1.0 - v),
            Rotation::R270 => f(w, 1.0 - v),
        })
    }

    /// `v` with `h2(u, v) = w`.
    pub fn hinv2(&self, w: f64, u: f64) -> f64 {
        let (w, u) = (clamp_unit(w), clamp_unit(u));
        let f = |a, b| families::hinv2(self.family, &self.params, a, b);
        Self::finish(match self.rotation {
            Rotation::R0 => f(w, u),
            Rotation::R90 => f(w, 1.0 - u),
            Rotation::R180 => 1.0 - f(1.0 - w, 1.0 - u),
            Rotation::R270 => 1.0 - f(1.0 - w, u),
        })
    }

    /// Theoretical Kendall's tau; rotations by 90 and 270 degrees negate it.
    pub fn kendall_tau(&self) -> f64 {
        let base = cached_tau(self.family, &self.params);
        match self.rotation {
            Rotation::R90 | Rotation::R270 => -base,
            _ => base,
        }
    }

    /// Conditional-inversion sample of `n` pairs.
    pub fn sample(&self, n: usize, seed: u64) -> PseudoSample {
        let mut rng = stream_rng(seed, &[0xc0b1a]);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PseudoSample {
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            let vi = open_uniform(rng);
            let w = open_uniform(rng);
            u.push(self.hinv1(w, vi));
            v.push(clamp_unit(vi));
        }
        PseudoSample { u, v }
    }

    pub fn loglik(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| self.ln_pdf(*a, *b)).sum()
    }
}

impl fmt::Display for CopulaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if self.rotation != Rotation::R0 {
            write!(f, "{}", self.rotation.degrees())?;
        }
        if !self.params.is_empty() {
            let p: Vec<String> = self.params.iter().map(|x| format!("{x:.4}")).collect();
            write!(f, "({})", p.join(", "))?;
        }
        Ok(())
    }
}

fn cached_tau(family: Family, params: &[f64]) -> f64 {
    let cacheable = matches!(
        family,
        Family::Joe | Family::Bb6 | Family::Bb7 | Family::Bb8 | Family::Tawn1 | Family::Tawn2 | Family::Frank
    );
    if !cacheable {
        return families::tau(family, params);
    }
    type Key = (Family, Vec<u64>);
    static CACHE: OnceLock<Mutex<HashMap<Key, f64>>> = OnceLock::new();
    let key: Key = (family, params.iter().map(|p| p.to_bits()).collect());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().ok().and_then(|c| c.get(&key).copied()) {
        return t;
    }
    let t = families::tau(family, params);
    if let Ok(mut c) = cache.lock() {
        if c.len() > 100_000 {
            c.clear();
        }
        c.insert(key, t);
    }
    t
}

/// `n` pairs of u-data strictly inside the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSample {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl PseudoSample {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<PseudoSample> {
        if u.len() != v.len() {
            return Err(Error::Argument("pseudo-sample columns differ in length".into()));
        }
        if u.iter().chain(&v).any(|x| !(*x > 0.0 && *x < 1.0)) {
            return Err(Error::Argument("pseudo-observations must lie strictly inside (0,1)".into()));
        }
        Ok(PseudoSample { u, v })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Every family with every admissible rotation, in catalog order.
pub fn full_candidate_set() -> Vec<(Family, Rotation)> {
    let mut out = Vec::new();
    for f in Family::ALL {
        if f.rotatable() {
            for r in Rotation::ALL {
                out.push((f, r));
            }
        } else {
            out.push((f, Rotation::R0));
        }
    }
    out
}
