//! Closed-form Archimedean generators: Independence, Clayton, Frank, Gumbel.
//!
//! All generators map `[0, inf] -> [0, 1]`:
//!
//! | family       | phi(t)                                   | phi^{-1}(u)                         |
//! |--------------|------------------------------------------|-------------------------------------|
//! | Independence | `exp(-t)`                                | `-ln u`                             |
//! | Clayton      | `(1 + theta t)^(-1/theta)`               | `(u^-theta - 1) / theta`            |
//! | Gumbel       | `exp(-t^(1/theta))`                      | `(-ln u)^theta`                     |
//! | Frank        | `-ln(1 + e^-t (e^-theta - 1)) / theta`   | `-ln((e^(-theta u) - 1)/(e^-theta - 1))` |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Jet;
use crate::roots::adaptive_simpson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Independence,
    Clayton,
    Frank,
    Gumbel,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Independence,
        Family::Clayton,
        Family::Frank,
        Family::Gumbel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Independence => "independence",
            Family::Clayton => "clayton",
            Family::Frank => "frank",
            Family::Gumbel => "gumbel",
        }
    }

    pub fn check_theta(self, theta: f64) -> Result<()> {
        let ok = match self {
            Family::Independence => true,
            Family::Clayton => theta > 0.0 && theta.is_finite(),
            Family::Frank => theta != 0.0 && theta.is_finite(),
            Family::Gumbel => theta >= 1.0 && theta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "theta = {theta} outside the {} domain ({})",
                self.name(),
                self.theta_range()
            )))
        }
    }

    pub fn theta_range(self) -> &'static str {
        match self {
            Family::Independence => "no parameter",
            Family::Clayton => "theta > 0",
            Family::Frank => "theta != 0",
            Family::Gumbel => "theta >= 1",
        }
    }

    pub fn tau_range(self) -> &'static str {
        match self {
            Family::Independence => "tau = 0",
            Family::Clayton => "0 < tau < 1",
            Family::Frank => "-1 < tau < 1, tau != 0",
            Family::Gumbel => "0 <= tau < 1",
        }
    }

    /// Kendall's tau implied by `theta`.
    pub fn kendall_tau(self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self {
            Family::Independence => 0.0,
            Family::Clayton => theta / (theta + 2.0),
            Family::Gumbel => (theta - 1.0) / theta,
            Family::Frank => frank_tau(theta),
        })
    }

    /// Inverse of [`Family::kendall_tau`].
    pub fn theta_from_tau(self, tau: f64) -> Result<f64> {
        let bad = || {
            Error::domain(format!(
                "tau = {tau} outside the achievable {} range ({})",
                self.name(),
                self.tau_range()
            ))
        };
        match self {
            Family::Independence => {
                if tau == 0.0 {
                    Ok(0.0)
                } else {
                    Err(bad())
                }
            }
            Family::Clayton => {
                if tau > 0.0 && tau < 1.0 {
                    Ok(2.0 * tau / (1.0 - tau))
                } else {
                    Err(bad())
                }
            }
            Family::Gumbel => {
                if (0.0..1.0).contains(&tau) {
                    Ok(1.0 / (1.0 - tau))
                } else {
                    Err(bad())
                }
            }
            Family::Frank => {
                if !(tau > -1.0 && tau < 1.0) || tau == 0.0 {
                    return Err(bad());
                }
                // tau(theta) is odd and increasing; bracket on |theta|
                let target = tau.abs();
                let mut hi = 1.0;
                while frank_tau(hi) < target {
                    hi *= 2.0;
                    if hi > 1e6 {
                        return Err(bad());
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if frank_tau(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                let theta = 0.5 * (lo + hi);
                Ok(theta.copysign(tau))
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independence" | "independent" => Ok(Family::Independence),
            "clayton" => Ok(Family::Clayton),
            "frank" => Ok(Family::Frank),
            "gumbel" => Ok(Family::Gumbel),
            other => Err(Error::Config(format!("unknown copula family '{other}'"))),
        }
    }
}

/// First Debye function `D_1(x) = (1/x) int_0^x t / (e^t - 1) dt`.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x.abs() < 1e-4 {
        // series 1 - x/4 + x^2/36 - x^4/3600
        return 1.0 - x / 4.0 + x * x / 36.0 - x.powi(4) / 3600.0;
    }
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    let integral = adaptive_simpson(integrand, 0.0, x, 1e-14 * x.abs().max(1.0));
    integral / x
}

fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-3 {
        // tau = theta/9 - theta^3/900 + O(theta^5)
        return theta / 9.0 - theta.powi(3) / 900.0;
    }
    1.0 + 4.0 / theta * (debye1(theta) - 1.0)
}

/// A closed-form generator with its dependence parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClosedForm", into = "RawClosedForm")]
pub struct ClosedFormGenerator {
    family: Family,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClosedForm {
    family: Family,
    #[serde(default)]
    theta: f64,
}

impl TryFrom<RawClosedForm> for ClosedFormGenerator {
    type Error = Error;
    fn try_from(r: RawClosedForm) -> Result<Self> {
        ClosedFormGenerator::new(r.family, r.theta)
    }
}

impl From<ClosedFormGenerator> for RawClosedForm {
    fn from(g: ClosedFormGenerator) -> Self {
        RawClosedForm {
            family: g.family,
            theta: g.theta,
        }
    }
}

impl ClosedFormGenerator {
    pub fn new(family: Family, theta: f64) -> Result<Self> {
        family.check_theta(theta)?;
        let theta = if family == Family::Independence {
            0.0
        } else {
            theta
        };
        Ok(Self { family, theta })
    }

    pub fn independence() -> Self {
        Self {
            family: Family::Independence,
            theta: 0.0,
        }
    }

    pub fn from_tau(family: Family, tau: f64) -> Result<Self> {
        Self::new(family, family.theta_from_tau(tau)?)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kendall_tau(&self) -> f64 {
        self.family.kendall_tau(self.theta).unwrap_or(0.0)
    }

    pub fn num_params(&self) -> usize {
        usize::from(self.family != Family::Independence)
    }

    pub fn params(&self) -> Vec<f64> {
        if self.num_params() == 1 {
            vec![self.theta]
        } else {
            Vec::new()
        }
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: p.len(),
            });
        }
        if let Some(&theta) = p.first() {
            self.family.check_theta(theta)?;
            self.theta = theta;
        }
        Ok(())
    }

    /// Moves `theta` into the family domain (used after optimizer steps).
    pub fn clamp_params(&self, p: &mut [f64]) {
        if let Some(theta) = p.first_mut() {
            *theta = match self.family {
                Family::Clayton => theta.max(1e-6),
                Family::Gumbel => theta.max(1.0),
                Family::Frank if theta.abs() < 1e-6 => 1e-6f64.copysign(*theta),
                _ => *theta,
            };
        }
    }

    pub fn jet(&self, t: f64) -> Jet {
        if t == f64::INFINITY {
            return Jet::ZERO;
        }
        let th = self.theta;
        match self.family {
            Family::Independence => {
                let e = (-t).exp();
                Jet {
                    value: e,
                    d1: -e,
                    d2: e,
                }
            }
            Family::Clayton => {
                let w = 1.0 + th * t;
                let p = w.powf(-1.0 / th);
                Jet {
                    value: p,
                    d1: -p / w,
                    d2: (1.0 + th) * p / (w * w),
                }
            }
            Family::Gumbel => {
                let r = 1.0 / th;
                if t == 0.0 {
                    let d1 = if th == 1.0 { -1.0 } else { f64::NEG_INFINITY };
                    let d2 = if th == 1.0 { 1.0 } else { f64::INFINITY };
                    return Jet { value: 1.0, d1, d2 };
                }
                let p = t.powf(r);
                let v = (-p).exp();
                Jet {
                    value: v,
                    d1: -r * p / t * v,
                    d2: v * r * p / (t * t) * (r * p - r + 1.0),
                }
            }
            Family::Frank => {
                let c = (-th).exp_m1();
                let e = (-t).exp();
                let q = 1.0 + c * e;
                Jet {
                    value: if t == 0.0 { 1.0 } else { -q.ln() / th },
                    d1: c * e / (th * q),
                    d2: -c * e / (th * q * q),
                }
            }
        }
    }

    pub fn inverse(&self, u: f64) -> f64 {
        if u == 1.0 {
            return 0.0;
        }
        let th = self.theta;
        match self.family {
            Family::Independence => -u.ln(),
            Family::Clayton => (u.powf(-th) - 1.0) / th,
            Family::Gumbel => (-u.ln()).powf(th),
            Family::Frank => -((-th * u).exp_m1() / (-th).exp_m1()).ln(),
        }
    }

    /// `(d phi / d theta, d phi' / d theta)` at `t`.
    pub fn theta_grad(&self, t: f64) -> (f64, f64) {
        let th = self.theta;
        if t == f64::INFINITY {
            return (0.0, 0.0);
        }
        match self.family {
            Family::Independence => (0.0, 0.0),
            Family::Clayton => {
                let w = 1.0 + th * t;
                let lw = (th * t).ln_1p();
                let j = self.jet(t);
                (
                    j.value * (lw / (th * th) - t / (th * w)),
                    j.d1 * (lw / (th * th) - (1.0 + th) * t / (th * w)),
                )
            }
            Family::Gumbel => {
                if t == 0.0 {
                    return (0.0, 0.0);
                }
                let r = 1.0 / th;
                let p = t.powf(r);
                let lt = t.ln();
                let j = self.jet(t);
                (
                    j.value * r * r * p * lt,
                    j.d1 * (-r - r * r * lt * (1.0 - p)),
                )
            }
            Family::Frank => {
                let c = (-th).exp_m1();
                let e = (-t).exp();
                let q = 1.0 + c * e;
                let emt = (-th - t).exp();
                let dphi = q.ln() / (th * th) + emt / (th * q);
                let dslope = e * (-(-th).exp() * th * q - c * q + c * th * emt) / (th * th * q * q);
                (dphi, dslope)
            }
        }
    }

    /// Closed-form solution of `dC/du(u, v) = w` for `v` when the family has one.
    pub fn conditional_quantile(&self, u: f64, w: f64) -> Option<f64> {
        let th = self.theta;
        match self.family {
            Family::Independence => Some(w),
            Family::Clayton => {
                let inner = (w.powf(-th / (1.0 + th)) - 1.0) * u.powf(-th) + 1.0;
                Some(inner.powf(-1.0 / th))
            }
            Family::Frank => {
                let a = (-th).exp_m1();
                let eu = (-th * u).exp();
                let v = -(a * w / (w + (1.0 - w) * eu)).ln_1p() / th;
                Some(v)
            }
            Family::Gumbel => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fams() -> Vec<ClosedFormGenerator> {
        vec![
            ClosedFormGenerator::new(Family::Clayton, 2.0).unwrap(),
            ClosedFormGenerator::new(Family::Clayton, 0.4).unwrap(),
            ClosedFormGenerator::new(Family::Frank, 5.7).unwrap(),
            ClosedFormGenerator::new(Family::Frank, -3.0).unwrap(),
            ClosedFormGenerator::new(Family::Gumbel, 2.0).unwrap(),
            ClosedFormGenerator::new(Family::Gumbel, 1.3).unwrap(),
            ClosedFormGenerator::independence(),
        ]
    }

    #[test]
    fn theta_domains() {
        assert!(Family::Clayton.check_theta(0.0).is_err());
        assert!(Family::Gumbel.check_theta(0.99).is_err());
        assert!(Family::Frank.check_theta(0.0).is_err());
        assert!(Family::Frank.check_theta(-2.0).is_ok());
        assert!(ClosedFormGenerator::new(Family::Clayton, f64::NAN).is_err());
    }

    #[test]
    fn tau_table_values() {
        assert_eq!(Family::Clayton.kendall_tau(2.0).unwrap(), 0.5);
        assert_eq!(Family::Gumbel.kendall_tau(1.0).unwrap(), 0.0);
        assert!(Family::Frank.kendall_tau(1e-9).unwrap().abs() < 1e-9);
        assert!(Family::Frank.kendall_tau(1e-2).unwrap() > 0.0);
    }

    #[test]
    fn frank_tau_matches_direct_quadrature() {
        // tau = 1 - 4/theta + 4/theta^2 int_0^theta t/(e^t-1) dt, integrated by midpoint rule
        let theta = 5.0;
        let n = 200_000;
        let h = theta / n as f64;
        let integral: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                t / t.exp_m1() * h
            })
            .sum();
        let want = 1.0 - 4.0 / theta + 4.0 / (theta * theta) * integral;
        assert!((Family::Frank.kendall_tau(theta).unwrap() - want).abs() < 1e-9);
        let neg = Family::Frank.kendall_tau(-theta).unwrap();
        assert!((neg + want).abs() < 1e-9);
    }

    #[test]
    fn theta_tau_round_trip() {
        for fam in [Family::Clayton, Family::Gumbel, Family::Frank] {
            for &tau in &[0.05, 0.25, 0.5, 0.75, 0.9] {
                let th = fam.theta_from_tau(tau).unwrap();
                assert!(
                    (fam.kendall_tau(th).unwrap() - tau).abs() < 1e-10,
                    "{fam} {tau}"
                );
            }
        }
        let th = Family::Frank.theta_from_tau(-0.3).unwrap();
        assert!(th < 0.0);
        assert!((Family::Frank.kendall_tau(th).unwrap() + 0.3).abs() < 1e-10);
    }

    #[test]
    fn tau_out_of_range() {
        assert!(Family::Clayton.theta_from_tau(1.5).is_err());
        assert!(Family::Clayton.theta_from_tau(0.0).is_err());
        assert!(Family::Gumbel.theta_from_tau(-0.1).is_err());
        assert!(Family::Independence.theta_from_tau(0.2).is_err());
    }

    #[test]
    fn jets_match_finite_differences() {
        let h = 1e-5;
        for g in fams() {
            for &t in &[0.05, 0.7, 3.0] {
                let j = g.jet(t);
                let p = g.jet(t + h);
                let m = g.jet(t - h);
                let d1 = (p.value - m.value) / (2.0 * h);
                let d2 = (p.d1 - m.d1) / (2.0 * h);
                assert!(
                    (j.d1 - d1).abs() < 1e-6 * j.d1.abs().max(1.0),
                    "{:?} t={t}",
                    g
                );
                assert!(
                    (j.d2 - d2).abs() < 1e-5 * j.d2.abs().max(1.0),
                    "{:?} t={t}",
                    g
                );
                assert!(j.d1 < 0.0 && j.d2 > 0.0);
            }
            assert_eq!(g.jet(0.0).value, 1.0);
        }
    }

    #[test]
    fn inverse_round_trip() {
        for g in fams() {
            for &u in &[1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999] {
                let t = g.inverse(u);
                assert!((g.jet(t).value - u).abs() < 1e-12, "{:?} u={u}", g);
            }
            assert_eq!(g.inverse(1.0), 0.0);
        }
    }

    #[test]
    fn theta_gradients_match_finite_differences() {
        let h = 1e-6;
        for g in fams() {
            if g.family() == Family::Independence {
                assert_eq!(g.num_params(), 0);
                continue;
            }
            for &t in &[0.1, 1.0, 4.0] {
                let (dv, ds) = g.theta_grad(t);
                let gp = ClosedFormGenerator::new(g.family(), g.theta() + h).unwrap();
                let gm = ClosedFormGenerator::new(g.family(), g.theta() - h).unwrap();
                let fdv = (gp.jet(t).value - gm.jet(t).value) / (2.0 * h);
                let fds = (gp.jet(t).d1 - gm.jet(t).d1) / (2.0 * h);
                assert!(
                    (dv - fdv).abs() < 1e-6 * fdv.abs().max(1e-3),
                    "{:?} t={t}: {dv} vs {fdv}",
                    g
                );
                assert!(
                    (ds - fds).abs() < 1e-6 * fds.abs().max(1e-3),
                    "{:?} t={t}: {ds} vs {fds}",
                    g
                );
            }
        }
    }

    #[test]
    fn serde_validates_theta() {
        let ok: ClosedFormGenerator =
            serde_json::from_str(r#"{"family":"clayton","theta":2.0}"#).unwrap();
        assert_eq!(ok.theta(), 2.0);
        assert!(
            serde_json::from_str::<ClosedFormGenerator>(r#"{"family":"gumbel","theta":0.5}"#)
                .is_err()
        );
        let ind: ClosedFormGenerator =
            serde_json::from_str(r#"{"family":"independence"}"#).unwrap();
        assert_eq!(ind.num_params(), 0);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("Clayton".parse::<Family>().unwrap(), Family::Clayton);
        assert!("gaussian".parse::<Family>().is_err());
    }
}
