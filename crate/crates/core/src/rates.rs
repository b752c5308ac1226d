//! Exponential decay rates of the failure probability of each method group.
//!
//! For a method whose failure event can be written as `sum_l Y_l > y L` with
//! i.i.d. `Y_l`, the rate is the Chernoff exponent `y s* - ln phi(s*)`, where
//! `phi` is the moment-generating function of `Y_l` and `s* > 0` solves
//! `phi'(s*) / phi(s*) = y`. The R* and STEAC rates below are closed forms
//! (or a scalar fixed point) of that exponent; [`chernoff_rate`] evaluates
//! the same exponent generically from an [`Mgf`] and serves as a second route.
//!
//! ```text
//! alpha_GLASS(t) = t
//! alpha_R*(t)    = -ln(2 sqrt(W (1 - 2W)) + W),          W = exp(-t) / 3
//! alpha_STEAC(t) = -ln phi(s*),  s* = F_t(s*) on (0, 1)
//!   phi(s)  = (3 exp(-s t) - s^2 exp(-t)) / (3 (1 - s^2))
//!   F_t(s)  = (1/2) [6 s - 3 t (1 - s^2)] exp((1 - s) t)
//! ```

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::estimators::MethodGroup;
use crate::solve::{bisect, newton_polish};

/// Above this branch length the STEAC fixed point is solved in the
/// coordinate `sigma = (1 - s) t`, where `exp((1 - s) t)` stays bounded.
pub const STEAC_SIGMA_SWITCH: f64 = 30.0;

/// Upper end of the STEAC tilt bracket.
const S_CAP: f64 = 1.0 - 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateSolution {
    pub rate: f64,
    /// Optimal tilt.
    pub s_star: f64,
}

/// Analytic decay rates of all three method groups at one branch length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatePoint {
    pub t: f64,
    pub alpha_glass: f64,
    pub alpha_rstar: f64,
    pub alpha_steac: f64,
    pub s_star_rstar: f64,
    pub s_star_steac: f64,
}

fn check_branch_length(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBranchLength(t))
    }
}

pub fn alpha_glass(t: f64) -> Result<f64> {
    check_branch_length(t)?;
    Ok(t)
}

/// `W_p = (1 - p) / 3 = exp(-t) / 3`, the probability of each topology on a
/// locus that fails to coalesce in the internal branch.
pub fn w_p(t: f64) -> f64 {
    (-t).exp() / 3.0
}

/// R* / STAR / MDC. The tilt solves a quadratic in `exp(s)`:
/// `exp(s*) = sqrt((p + W_p) / W_p) = sqrt(3 exp(t) - 2)`.
pub fn alpha_rstar(t: f64) -> Result<RateSolution> {
    check_branch_length(t)?;
    if t == 0.0 {
        return Ok(RateSolution { rate: 0.0, s_star: 0.0 });
    }
    let e = (-t).exp();
    // factor exp(-t/2) out of the logarithm so that large t does not underflow
    let inner = 2.0 * ((1.0 - 2.0 / 3.0 * e) / 3.0).sqrt() + (-0.5 * t).exp() / 3.0;
    let rate = 0.5 * t - inner.ln();
    let s_star = 0.5 * (t + (3.0 - 2.0 * e).ln());
    Ok(RateSolution { rate, s_star })
}

/// `F_t(s)`, whose fixed point in `(0, 1)` is the STEAC tilt.
pub fn steac_fixed_point_map(t: f64, s: f64) -> f64 {
    0.5 * (6.0 * s - 3.0 * t * (1.0 - s) * (1.0 + s)) * ((1.0 - s) * t).exp()
}

/// `F_t'(s) = (1/2) exp((1 - s) t) [6 + 3 t^2 (1 - s^2)]`, which exceeds one on
/// `(0, 1)`.
pub fn steac_fixed_point_slope(t: f64, s: f64) -> f64 {
    0.5 * ((1.0 - s) * t).exp() * (6.0 + 3.0 * t * t * (1.0 - s) * (1.0 + s))
}

/// Moment-generating function of `d(A,B) - d(A,C)` on one locus.
pub fn steac_phi(t: f64, s: f64) -> f64 {
    (3.0 * (-s * t).exp() - s * s * (-t).exp()) / (3.0 * (1.0 - s * s))
}

/// `phi'(s) / phi(s)` for the STEAC moment-generating function.
pub fn steac_log_derivative(t: f64, s: f64) -> f64 {
    // multiply through by exp(s t)
    let decay = (-(1.0 - s) * t).exp();
    let one_minus_s2 = (1.0 - s) * (1.0 + s);
    let num = (6.0 * s - 3.0 * t * one_minus_s2) - 2.0 * s * decay;
    let den = one_minus_s2 * (3.0 - s * s * decay);
    num / den
}

/// `-ln phi(s)`. Near `phi = 1` (small t) it goes through `phi - 1` so that
/// the O(t^2) result does not cancel against the O(1) terms; otherwise the
/// factor `exp(-s t)` is taken out of the logarithm.
fn steac_neg_log_phi(t: f64, s: f64) -> f64 {
    let s2 = s * s;
    let one_minus_s2 = (1.0 - s) * (1.0 + s);
    let phi_minus_one =
        (3.0 * (-s * t).exp_m1() - s2 * (-t).exp_m1() + 2.0 * s2) / (3.0 * one_minus_s2);
    if phi_minus_one > -0.5 {
        -phi_minus_one.ln_1p()
    } else {
        s * t - ((3.0 - s2 * (-(1.0 - s) * t).exp()) / (3.0 * one_minus_s2)).ln()
    }
}

/// STEAC / SC.
pub fn alpha_steac(t: f64) -> Result<RateSolution> {
    check_branch_length(t)?;
    if t > STEAC_SIGMA_SWITCH {
        alpha_steac_sigma(t)
    } else {
        alpha_steac_direct(t)
    }
}

/// Fixed point solved directly in `s`. Accurate up to moderate `t`.
pub fn alpha_steac_direct(t: f64) -> Result<RateSolution> {
    check_branch_length(t)?;
    if t == 0.0 {
        return Ok(RateSolution { rate: 0.0, s_star: 0.0 });
    }
    let g = |s: f64| steac_fixed_point_map(t, s) - s;
    let s = bisect(g, 0.0, S_CAP, 0.0)
        .map_err(|e| Error::Solver(format!("STEAC fixed point at t = {t}: {e}")))?;
    let s = newton_polish(g, |s| steac_fixed_point_slope(t, s) - 1.0, s, 0.0, S_CAP, 4);
    Ok(RateSolution { rate: steac_neg_log_phi(t, s), s_star: s })
}

/// Fixed point solved in `sigma = (1 - s) t`:
/// `1 - sigma/t = (1/2) [6 (1 - sigma/t) - 3 sigma (2 - sigma/t)] exp(sigma)`.
/// Requires `t > 2`.
pub fn alpha_steac_sigma(t: f64) -> Result<RateSolution> {
    check_branch_length(t)?;
    if t <= 2.0 {
        return Err(Error::Solver(format!("sigma coordinates need t > 2, got {t}")));
    }
    let u = 1.0 / t;
    let h = |sigma: f64| {
        0.5 * (6.0 * (1.0 - sigma * u) - 3.0 * sigma * (2.0 - sigma * u)) * sigma.exp()
            - (1.0 - sigma * u)
    };
    let sigma = bisect(h, 0.0, 2.0, 0.0)
        .map_err(|e| Error::Solver(format!("STEAC sigma fixed point at t = {t}: {e}")))?;
    let s = 1.0 - sigma * u;
    let one_minus_s2 = sigma * u * (2.0 - sigma * u);
    let rate = t - ((3.0 * sigma.exp() - s * s) / (3.0 * one_minus_s2)).ln();
    Ok(RateSolution { rate, s_star: s })
}

/// `G(sigma) = 3 e^sigma - 1 - 3 sigma e^sigma`, strictly decreasing on
/// `sigma > 0` with `G(0) = 2`.
pub fn sigma_star_equation(sigma: f64) -> f64 {
    3.0 * sigma.exp() - 1.0 - 3.0 * sigma * sigma.exp()
}

/// Positive root of [`sigma_star_equation`].
pub fn solve_sigma_star() -> f64 {
    static SIGMA_STAR: OnceLock<f64> = OnceLock::new();
    *SIGMA_STAR.get_or_init(|| {
        bisect(sigma_star_equation, 0.0, 2.0, 0.0).expect("G changes sign on [0, 2]")
    })
}

/// Limits of the large-t corrections.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticConstants {
    pub sigma_star: f64,
    /// `alpha_STEAC(t) ~ t - ln t - beta_infinity_steac`
    pub beta_infinity_steac: f64,
    /// `alpha_R*(t) ~ t/2 - beta_infinity_rstar`
    pub beta_infinity_rstar: f64,
}

impl AsymptoticConstants {
    pub fn compute() -> Self {
        let sigma_star = solve_sigma_star();
        AsymptoticConstants {
            sigma_star,
            beta_infinity_steac: sigma_star - std::f64::consts::LN_2,
            beta_infinity_rstar: 0.5 * (4.0f64 / 3.0).ln(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Small,
    Large,
}

/// Leading-order behavior of each rate as `t -> 0` or `t -> infinity`.
pub fn asymptote(group: MethodGroup, t: f64, regime: Regime) -> f64 {
    match (group, regime) {
        (MethodGroup::Glass, _) => t,
        (MethodGroup::Rstar, Regime::Small) => 0.75 * t * t,
        (MethodGroup::Rstar, Regime::Large) => {
            0.5 * t - AsymptoticConstants::compute().beta_infinity_rstar
        }
        (MethodGroup::Steac, Regime::Small) => 0.375 * t * t,
        (MethodGroup::Steac, Regime::Large) => {
            t - t.ln() - AsymptoticConstants::compute().beta_infinity_steac
        }
    }
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Moment-generating function of a per-locus statistic together with the
/// threshold its average must exceed for the method to fail.
pub struct Mgf {
    pub phi: ScalarFn,
    pub phi_prime: ScalarFn,
    /// Open interval on which `phi` is finite; must contain zero.
    pub domain: (f64, f64),
    pub threshold: f64,
}

impl Mgf {
    pub fn log_derivative(&self, s: f64) -> f64 {
        (self.phi_prime)(s) / (self.phi)(s)
    }

    pub fn mean(&self) -> f64 {
        self.log_derivative(0.0)
    }
}

/// Per-locus `2 I_AC + I_BC`, where `I_XY` flags a locus that failed to
/// coalesce in the internal branch and has topology `XY|*`; R* fails roughly
/// when the sum exceeds `L`.
pub fn rstar_mgf(t: f64) -> Mgf {
    let w = w_p(t);
    let p = -(-t).exp_m1();
    Mgf {
        phi: Box::new(move |s: f64| (p + w) + w * (s.exp() + (2.0 * s).exp())),
        phi_prime: Box::new(move |s: f64| w * (s.exp() + 2.0 * (2.0 * s).exp())),
        domain: (f64::NEG_INFINITY, f64::INFINITY),
        threshold: 1.0,
    }
}

/// Per-locus `d(A,B) - d(A,C)`; STEAC fails roughly when the sum exceeds zero.
pub fn steac_mgf(t: f64) -> Mgf {
    Mgf {
        phi: Box::new(move |s: f64| steac_phi(t, s)),
        phi_prime: Box::new(move |s: f64| {
            let one_minus_s2 = 1.0 - s * s;
            ((18.0 * s - 9.0 * t * one_minus_s2) * (-s * t).exp() - 6.0 * s * (-t).exp())
                / (9.0 * one_minus_s2 * one_minus_s2)
        }),
        domain: (-1.0, 1.0),
        threshold: 0.0,
    }
}

/// Generic Chernoff exponent `y s* - ln phi(s*)`.
///
/// The tilt is bracketed by walking towards the upper end of the domain until
/// `phi'/phi` exceeds the threshold, then found by bisection. `phi'/phi` is
/// increasing because `ln phi` is convex.
pub fn chernoff_rate(mgf: &Mgf) -> Result<RateSolution> {
    let (lo, hi) = mgf.domain;
    if !(lo < 0.0 && hi > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "MGF domain ({lo}, {hi}) must contain zero"
        )));
    }
    let y = mgf.threshold;
    let mean = mgf.mean();
    if !(y > mean) {
        return Err(Error::ThresholdNotAboveMean { threshold: y, mean });
    }
    let psi = |s: f64| mgf.log_derivative(s) - y;

    let mut upper = None;
    for k in 1..=64 {
        let s = if hi.is_finite() {
            hi - hi * 0.5f64.powi(k)
        } else {
            0.5 * 2f64.powi(k - 1)
        };
        if !(s < hi) {
            break;
        }
        let v = psi(s);
        if !v.is_finite() {
            break;
        }
        if v > 0.0 {
            upper = Some(s);
            break;
        }
    }
    let upper = upper.ok_or(Error::NoBracket)?;
    let s_star = bisect(psi, 0.0, upper, 0.0)?;
    let rate = y * s_star - (mgf.phi)(s_star).ln();
    Ok(RateSolution { rate, s_star })
}

pub fn rate_point(t: f64) -> Result<RatePoint> {
    let rstar = alpha_rstar(t)?;
    let steac = alpha_steac(t)?;
    Ok(RatePoint {
        t,
        alpha_glass: alpha_glass(t)?,
        alpha_rstar: rstar.rate,
        alpha_steac: steac.rate,
        s_star_rstar: rstar.s_star,
        s_star_steac: steac.s_star,
    })
}

/// Uniform grid of `steps` points from `t_min` to `t_max` inclusive.
pub fn rate_curve(t_min: f64, t_max: f64, steps: usize) -> Result<Vec<RatePoint>> {
    if !(t_min >= 0.0 && t_min < t_max && t_max.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "rate grid needs 0 <= t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidConfig(format!("rate grid needs at least 2 points, got {steps}")));
    }
    let h = (t_max - t_min) / (steps - 1) as f64;
    (0..steps)
        .map(|i| {
            let t = if i + 1 == steps { t_max } else { t_min + h * i as f64 };
            rate_point(t)
        })
        .collect()
}

fn rstar_minus_steac(t: f64) -> f64 {
    let r = alpha_rstar(t).map(|r| r.rate).unwrap_or(f64::NAN);
    let s = alpha_steac(t).map(|r| r.rate).unwrap_or(f64::NAN);
    r - s
}

/// Branch length at which the R* and STEAC rates cross, by bisection on
/// `[lo, hi]`.
pub fn rstar_steac_crossover(lo: f64, hi: f64) -> Result<f64> {
    bisect(rstar_minus_steac, lo, hi, 0.0)
}

/// Finds the first grid cell over which `alpha_R* - alpha_STEAC` changes sign
/// and refines the crossing inside it.
pub fn locate_crossover(curve: &[RatePoint]) -> Result<f64> {
    curve
        .windows(2)
        .find(|w| {
            let a = w[0].alpha_rstar - w[0].alpha_steac;
            let b = w[1].alpha_rstar - w[1].alpha_steac;
            a > 0.0 && b <= 0.0
        })
        .ok_or_else(|| Error::Solver("rates do not cross on the grid".into()))
        .and_then(|w| rstar_steac_crossover(w[0].t, w[1].t))
}
