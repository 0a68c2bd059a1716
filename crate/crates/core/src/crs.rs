//! Capability-risk scaling: as capability `C` grows, the tolerated
//! catastrophe probability `k D(C)^-alpha` shrinks, and so does the error
//! rate a system must meet.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 365-day year.
pub const SECONDS_PER_YEAR: f64 = 31_536_000.0;
pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Tolerance of the bisection fallback for the risk-map inverse.
pub const INVERSE_TOLERANCE: f64 = 1e-12;

/// Damage as a function of capability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Impact {
    Constant { value: f64 },
    /// `scale * C`
    Linear { scale: f64 },
    /// `scale * C^exponent`
    Power { scale: f64, exponent: f64 },
    /// `scale * 10^(rate * C)`
    Exponential { scale: f64, rate: f64 },
}

impl Impact {
    pub fn eval(&self, c: f64) -> f64 {
        match *self {
            Impact::Constant { value } => value,
            Impact::Linear { scale } => scale * c,
            Impact::Power { scale, exponent } => scale * c.powf(exponent),
            Impact::Exponential { scale, rate } => scale * 10f64.powf(rate * c),
        }
    }

    /// Whether `D(C) -> infinity` as `C -> infinity`.
    pub fn is_unbounded(&self) -> bool {
        match *self {
            Impact::Constant { .. } => false,
            Impact::Linear { scale } => scale > 0.0,
            Impact::Power { scale, exponent } => scale > 0.0 && exponent > 0.0,
            Impact::Exponential { scale, rate } => scale > 0.0 && rate > 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Impact::Constant { value } => value.is_finite() && value >= 0.0,
            Impact::Linear { scale } => scale.is_finite() && scale >= 0.0,
            Impact::Power { scale, exponent } => {
                scale.is_finite() && scale >= 0.0 && exponent.is_finite() && exponent >= 0.0
            }
            Impact::Exponential { scale, rate } => {
                scale.is_finite() && scale >= 0.0 && rate.is_finite() && rate >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("impact", "parameters must be finite and non-negative"))
        }
    }
}

/// Map from error rate to catastrophe probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskMap {
    Identity,
    /// `eps^exponent`
    Power { exponent: f64 },
    /// `slope * eps`
    Linear { slope: f64 },
    /// `1 - exp(-rate * eps)`
    Saturating { rate: f64 },
    /// `linear * eps + cubic * eps^3`; inverted numerically.
    Polynomial { linear: f64, cubic: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseMethod {
    Analytic,
    Bisection,
    /// The target exceeds `f_risk(1)`: every error rate is acceptable.
    Unconstrained,
}

impl RiskMap {
    pub fn eval(&self, eps: f64) -> f64 {
        match *self {
            RiskMap::Identity => eps,
            RiskMap::Power { exponent } => eps.powf(exponent),
            RiskMap::Linear { slope } => slope * eps,
            RiskMap::Saturating { rate } => -(-rate * eps).exp_m1(),
            RiskMap::Polynomial { linear, cubic } => linear * eps + cubic * eps * eps * eps,
        }
    }

    fn analytic_inverse(&self, r: f64) -> Option<f64> {
        match *self {
            RiskMap::Identity => Some(r),
            RiskMap::Power { exponent } => Some(r.powf(1.0 / exponent)),
            RiskMap::Linear { slope } => Some(r / slope),
            RiskMap::Saturating { rate } => Some(-(-r).ln_1p() / rate),
            RiskMap::Polynomial { .. } => None,
        }
        .filter(|v| v.is_finite())
    }

    /// Least `eps` in `[0, 1]` with `f(eps) = target`.
    pub fn inverse(&self, target: f64) -> Result<(f64, InverseMethod)> {
        if !(target.is_finite() && target >= 0.0) {
            return Err(Error::invalid("target", "must be finite and non-negative"));
        }
        if target >= self.eval(1.0) {
            return Ok((1.0, InverseMethod::Unconstrained));
        }
        if let Some(v) = self.analytic_inverse(target) {
            return Ok((v.clamp(0.0, 1.0), InverseMethod::Analytic));
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > INVERSE_TOLERANCE * hi.max(f64::MIN_POSITIVE) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((hi, InverseMethod::Bisection))
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RiskMap::Identity => true,
            RiskMap::Power { exponent } => exponent.is_finite() && exponent > 0.0,
            RiskMap::Linear { slope } => slope.is_finite() && slope > 0.0,
            RiskMap::Saturating { rate } => rate.is_finite() && rate > 0.0,
            RiskMap::Polynomial { linear, cubic } => {
                linear.is_finite() && cubic.is_finite() && linear > 0.0 && cubic >= 0.0
            }
        };
        if !ok {
            return Err(Error::invalid("risk_map", "must be strictly increasing from 0"));
        }
        if self.eval(0.0) != 0.0 {
            return Err(Error::invalid("risk_map", "f_risk(0) must be 0"));
        }
        Ok(())
    }
}

/// Verification cost as a function of the required error rate:
/// `scale * eps^-exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub scale: f64,
    pub exponent: f64,
}

impl CostModel {
    pub fn eval(&self, eps: f64) -> f64 {
        self.scale * eps.powf(-self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrsModel {
    pub label: String,
    pub impact: Impact,
    pub alpha: f64,
    pub k: f64,
    pub risk_map: RiskMap,
    pub cost: CostModel,
    /// Upper end of the capability range used for validation and search.
    pub c_max: f64,
}

impl CrsModel {
    /// Reverse-engineered to reproduce the trap figure: `D(C) = 10^C`,
    /// `alpha = 2`, `k = 10^-2`, identity risk map and cost
    /// `0.1 eps^-1.5`, so that `eps(C) = 10^(-2C-2)` and
    /// `cost(C) = 10^(3C+2)`.
    pub fn figure_default() -> Self {
        Self {
            label: "figure-default (reverse-engineered from the trap figure's plotted curves)".into(),
            impact: Impact::Exponential { scale: 1.0, rate: 1.0 },
            alpha: 2.0,
            k: 1e-2,
            risk_map: RiskMap::Identity,
            cost: CostModel {
                scale: 0.1,
                exponent: 1.5,
            },
            c_max: 4.0,
        }
    }

    /// A random model satisfying every invariant.
    pub fn random(rng: &mut impl Rng) -> Self {
        let impact = match rng.random_range(0..4) {
            0 => Impact::Constant {
                value: rng.random_range(0.5..100.0),
            },
            1 => Impact::Linear {
                scale: rng.random_range(0.1..10.0),
            },
            2 => Impact::Power {
                scale: rng.random_range(0.1..10.0),
                exponent: rng.random_range(0.5..3.0),
            },
            _ => Impact::Exponential {
                scale: rng.random_range(0.1..10.0),
                rate: rng.random_range(0.1..2.0),
            },
        };
        let risk_map = match rng.random_range(0..5) {
            0 => RiskMap::Identity,
            1 => RiskMap::Power {
                exponent: rng.random_range(0.5..3.0),
            },
            2 => RiskMap::Linear {
                slope: rng.random_range(0.5..5.0),
            },
            3 => RiskMap::Saturating {
                rate: rng.random_range(0.5..5.0),
            },
            _ => RiskMap::Polynomial {
                linear: rng.random_range(0.5..2.0),
                cubic: rng.random_range(0.0..2.0),
            },
        };
        Self {
            label: "random".into(),
            impact,
            alpha: rng.random_range(1.0..3.0),
            k: rng.random_range(1e-3..1.0),
            risk_map,
            cost: CostModel {
                scale: rng.random_range(0.1..10.0),
                exponent: rng.random_range(0.5..2.0),
            },
            c_max: rng.random_range(1.0..10.0),
        }
    }

    /// Checks parameters and the monotonicity of `D` and `f_risk` on a
    /// 100-point grid.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 1.0) {
            return Err(Error::invalid("alpha", "must be at least 1"));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::invalid("k", "must be positive"));
        }
        if !(self.c_max.is_finite() && self.c_max > 0.0) {
            return Err(Error::invalid("c_max", "must be positive"));
        }
        if !(self.cost.scale > 0.0 && self.cost.exponent >= 0.0) {
            return Err(Error::invalid("cost", "scale must be positive, exponent non-negative"));
        }
        self.impact.validate()?;
        self.risk_map.validate()?;
        let grid = |hi: f64| (0..100).map(move |i| hi * i as f64 / 99.0);
        let d: Vec<f64> = grid(self.c_max).map(|c| self.impact.eval(c)).collect();
        if d.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("impact", "D(C) must be non-decreasing"));
        }
        let f: Vec<f64> = grid(1.0).map(|e| self.risk_map.eval(e)).collect();
        if f.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("risk_map", "f_risk must be non-decreasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptableRisk {
    pub value: f64,
    /// `D(C) = 0`: no impact, no constraint.
    pub zero_impact: bool,
    /// `k D(C)^-alpha` exceeded 1 and was capped.
    pub capped: bool,
}

/// `min(1, k D(C)^-alpha)`.
pub fn acceptable_risk(model: &CrsModel, c: f64) -> Result<AcceptableRisk> {
    if !c.is_finite() || c < 0.0 {
        return Err(Error::invalid("C", "must be finite and non-negative"));
    }
    let d = model.impact.eval(c);
    if d == 0.0 {
        return Ok(AcceptableRisk {
            value: 1.0,
            zero_impact: true,
            capped: false,
        });
    }
    let raw = model.k * d.powf(-model.alpha);
    Ok(AcceptableRisk {
        value: raw.min(1.0),
        zero_impact: false,
        capped: raw > 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequiredEpsilon {
    pub eps: f64,
    pub acceptable_risk: f64,
    pub method: InverseMethod,
}

/// `f_risk^-1(acceptable_risk(C))`.
pub fn required_epsilon(model: &CrsModel, c: f64) -> Result<RequiredEpsilon> {
    let risk = acceptable_risk(model, c)?;
    let (eps, method) = model.risk_map.inverse(risk.value)?;
    Ok(RequiredEpsilon {
        eps,
        acceptable_risk: risk.value,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FnCheck {
    pub acceptable: bool,
    /// `k - F N^alpha`; zero counts as acceptable.
    pub margin: f64,
}

pub fn fn_curve_check(frequency: f64, fatalities: f64, alpha: f64, k: f64) -> Result<FnCheck> {
    if !(frequency > 0.0 && fatalities > 0.0) {
        return Err(Error::invalid("F, N", "must be positive"));
    }
    let load = frequency * fatalities.powf(alpha);
    Ok(FnCheck {
        acceptable: load <= k,
        margin: k - load,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureRate {
    pub mtbf_seconds: f64,
    pub mtbf_days: f64,
    pub failures_per_year: f64,
}

pub fn operational_failure_rate(eps: f64, decisions_per_second: f64) -> Result<FailureRate> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid("eps", "must lie in (0, 1]"));
    }
    if !(decisions_per_second.is_finite() && decisions_per_second > 0.0) {
        return Err(Error::invalid("rate", "must be positive"));
    }
    let per_second = eps * decisions_per_second;
    let mtbf = 1.0 / per_second;
    Ok(FailureRate {
        mtbf_seconds: mtbf,
        mtbf_days: mtbf / SECONDS_PER_DAY,
        failures_per_year: per_second * SECONDS_PER_YEAR,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    #[serde(rename = "C")]
    pub c: f64,
    pub acceptable_risk: f64,
    pub required_eps: f64,
    pub verification_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrsCurve {
    pub model_label: String,
    pub rows: Vec<CurveRow>,
}

impl CrsCurve {
    pub fn eps_non_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].required_eps <= w[0].required_eps)
    }

    pub fn cost_non_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].verification_cost >= w[0].verification_cost)
    }
}

pub fn emit_trap_curves(model: &CrsModel, c_grid: &[f64]) -> Result<CrsCurve> {
    model.validate()?;
    if c_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("C_grid", "must be strictly ascending"));
    }
    let rows = c_grid
        .iter()
        .map(|&c| {
            let r = required_epsilon(model, c)?;
            Ok(CurveRow {
                c,
                acceptable_risk: r.acceptable_risk,
                required_eps: r.eps,
                verification_cost: model.cost.eval(r.eps),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrsCurve {
        model_label: model.label.clone(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceWitness {
    pub eps0: f64,
    /// Capability at which the requirement first drops below `eps0`.
    pub capability: Option<f64>,
    pub required_eps: f64,
    pub doublings: u32,
}

/// Doubles `C` from 1 up to `c_limit` until `required_epsilon(C) < eps0`.
pub fn convergence_witness(model: &CrsModel, eps0: f64, c_limit: f64) -> Result<ConvergenceWitness> {
    model.validate()?;
    if !(eps0 > 0.0 && eps0 <= 1.0) {
        return Err(Error::invalid("eps0", "must lie in (0, 1]"));
    }
    let mut c = 1.0;
    let mut doublings = 0;
    loop {
        let r = required_epsilon(model, c)?;
        if r.eps < eps0 {
            return Ok(ConvergenceWitness {
                eps0,
                capability: Some(c),
                required_eps: r.eps,
                doublings,
            });
        }
        if c * 2.0 > c_limit {
            return Ok(ConvergenceWitness {
                eps0,
                capability: None,
                required_eps: r.eps,
                doublings,
            });
        }
        c *= 2.0;
        doublings += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn linear_model(alpha: f64, k: f64) -> CrsModel {
        CrsModel {
            impact: Impact::Linear { scale: 1.0 },
            alpha,
            k,
            c_max: 100.0,
            ..CrsModel::figure_default()
        }
    }

    #[test]
    fn acceptable_risk_arithmetic() {
        assert_eq!(acceptable_risk(&linear_model(1.0, 1.0), 100.0).unwrap().value, 0.01);
        let z = acceptable_risk(&linear_model(1.0, 1.0), 0.0).unwrap();
        assert_eq!(z.value, 1.0);
        assert!(z.zero_impact);
        let m = CrsModel {
            impact: Impact::Constant { value: 10.0 },
            ..linear_model(2.0, 1.0)
        };
        assert!(rel(acceptable_risk(&m, 3.0).unwrap().value, 0.01) < 1e-15);
    }

    #[test]
    fn figure_default_endpoints() {
        let m = CrsModel::figure_default();
        assert!(rel(required_epsilon(&m, 0.0).unwrap().eps, 1e-2) < 1e-12);
        assert!(rel(required_epsilon(&m, 4.0).unwrap().eps, 1e-10) < 1e-12);
    }

    #[test]
    fn bisection_inverts_polynomial_map() {
        let f = RiskMap::Polynomial { linear: 1.0, cubic: 1.0 };
        let (e, method) = f.inverse(0.5).unwrap();
        assert_eq!(method, InverseMethod::Bisection);
        assert!((f.eval(e) - 0.5).abs() < 1e-11);
    }

    #[test]
    fn fn_boundary_is_acceptable() {
        let c = fn_curve_check(1e-4, 100.0, 1.0, 0.01).unwrap();
        assert!(c.acceptable);
        assert_eq!(c.margin, 0.0);
        assert!(fn_curve_check(0.01, 1.0, 1.0, 0.01).unwrap().acceptable);
        assert!(!fn_curve_check(1.0, 1e6, 1.0, 0.01).unwrap().acceptable);
    }

    #[test]
    fn failure_rate_figures() {
        let r = operational_failure_rate(1e-9, 1000.0).unwrap();
        assert!((r.mtbf_days - 11.574).abs() < 1e-3);
        assert!((r.failures_per_year - 31.536).abs() < 1e-9);
        assert_eq!(operational_failure_rate(1.0, 1.0).unwrap().mtbf_seconds, 1.0);
    }

    #[test]
    fn constant_impact_gives_flat_curve() {
        let m = CrsModel {
            impact: Impact::Constant { value: 5.0 },
            ..CrsModel::figure_default()
        };
        let c = emit_trap_curves(&m, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(c.rows.iter().all(|r| r.required_eps == c.rows[0].required_eps));
    }

    #[test]
    fn rejects_invalid_models() {
        let m = CrsModel {
            alpha: 0.5,
            ..CrsModel::figure_default()
        };
        assert!(m.validate().is_err());
        let m = CrsModel {
            risk_map: RiskMap::Linear { slope: -1.0 },
            ..CrsModel::figure_default()
        };
        assert!(m.validate().is_err());
    }
}
