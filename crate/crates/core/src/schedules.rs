//! Time-scaling and regularization curves, their integrals, and the
//! hypothesis checks that decide which convergence results apply.
//!
//! Power curves are decided exactly from their exponents. User curves are
//! checked numerically on a finite horizon and reported as horizon-limited.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::{Error, Result};

/// A curve given by its value and derivative.
pub trait UserCurve: Send + Sync {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
}

#[derive(Clone)]
pub enum CurveFamily {
    /// `c · t^r`
    Power {
        c: f64,
        r: f64,
    },
    Zero,
    User(Arc<dyn UserCurve>),
}

impl fmt::Debug for CurveFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveFamily::Power { c, r } => write!(f, "Power {{ c: {c}, r: {r} }}"),
            CurveFamily::Zero => write!(f, "Zero"),
            CurveFamily::User(_) => write!(f, "User"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Curve {
    family: CurveFamily,
    t0: f64,
}

fn check_t0(t0: f64) -> Result<()> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::input(format!(
            "curve start time must be positive and finite, got {t0}"
        )));
    }
    Ok(())
}

impl Curve {
    pub fn power(c: f64, r: f64, t0: f64) -> Result<Self> {
        check_t0(t0)?;
        if !(c > 0.0 && c.is_finite() && r.is_finite()) {
            return Err(Error::input(format!(
                "power curve needs c > 0 and finite r, got c={c}, r={r}"
            )));
        }
        Ok(Curve {
            family: CurveFamily::Power { c, r },
            t0,
        })
    }

    pub fn constant(c: f64, t0: f64) -> Result<Self> {
        Self::power(c, 0.0, t0)
    }

    pub fn zero(t0: f64) -> Result<Self> {
        check_t0(t0)?;
        Ok(Curve {
            family: CurveFamily::Zero,
            t0,
        })
    }

    pub fn user(curve: Arc<dyn UserCurve>, t0: f64) -> Result<Self> {
        check_t0(t0)?;
        Ok(Curve {
            family: CurveFamily::User(curve),
            t0,
        })
    }

    pub fn family(&self) -> &CurveFamily {
        &self.family
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, CurveFamily::Zero)
    }

    pub fn power_params(&self) -> Option<(f64, f64)> {
        match self.family {
            CurveFamily::Power { c, r } => Some((c, r)),
            _ => None,
        }
    }

    /// `(value, derivative)` at `t ≥ t0`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= self.t0) {
            return Err(Error::BeforeStart { t, t0: self.t0 });
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> (f64, f64) {
        match &self.family {
            CurveFamily::Power { c, r } => {
                if *r == 0.0 {
                    (*c, 0.0)
                } else {
                    let v = c * t.powf(*r);
                    (v, r * v / t)
                }
            }
            CurveFamily::Zero => (0.0, 0.0),
            CurveFamily::User(u) => (u.value(t), u.derivative(t)),
        }
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.0)
    }

    /// Checks the time-scaling role: positive and nondecreasing.
    pub fn check_beta_role(&self) -> Result<()> {
        match self.family {
            CurveFamily::Power { r, .. } if r < 0.0 => Err(Error::input(format!(
                "time scaling must be nondecreasing, got exponent {r}"
            ))),
            CurveFamily::Zero => Err(Error::input(
                "time scaling must be positive, got zero curve",
            )),
            _ => Ok(()),
        }
    }

    /// Checks the regularization role: nonnegative, nonincreasing, vanishing.
    pub fn check_eps_role(&self) -> Result<()> {
        match self.family {
            CurveFamily::Power { r, .. } if r >= 0.0 => Err(Error::input(format!(
                "regularization curve must decrease to 0, got exponent {r} (write c/t^r with r > 0)"
            ))),
            _ => Ok(()),
        }
    }
}

/// Which product of curves to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    BetaEps,
    Eps,
    Beta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum IntegralValue {
    Finite(f64),
    Divergent,
}

impl IntegralValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            IntegralValue::Finite(v) => Some(v),
            IntegralValue::Divergent => None,
        }
    }
}

/// Coefficient and exponent of a product of power/zero curves.
/// `Some((0, 0))` encodes the zero function.
fn power_product(curves: &[&Curve]) -> Option<(f64, f64)> {
    let mut c = 1.0;
    let mut p = 0.0;
    for curve in curves {
        match curve.family {
            CurveFamily::Power { c: ci, r } => {
                c *= ci;
                p += r;
            }
            CurveFamily::Zero => return Some((0.0, 0.0)),
            CurveFamily::User(_) => return None,
        }
    }
    Some((c, p))
}

fn select<'a>(which: Integrand, beta: &'a Curve, eps: &'a Curve) -> Vec<&'a Curve> {
    match which {
        Integrand::BetaEps => vec![beta, eps],
        Integrand::Eps => vec![eps],
        Integrand::Beta => vec![beta],
    }
}

/// `∫ c t^p dt` over `[a, b]`, with `b` possibly infinite.
fn power_integral(c: f64, p: f64, a: f64, b: f64) -> IntegralValue {
    if c == 0.0 {
        return IntegralValue::Finite(0.0);
    }
    let q = p + 1.0;
    if b.is_infinite() {
        return if q < 0.0 {
            IntegralValue::Finite(-c * a.powf(q) / q)
        } else {
            IntegralValue::Divergent
        };
    }
    if q == 0.0 {
        IntegralValue::Finite(c * (b / a).ln())
    } else {
        IntegralValue::Finite(c * (b.powf(q) - a.powf(q)) / q)
    }
}

/// Integral of the selected product over `[t0, t1]`; `t1` may be `+∞` for
/// power/zero curves, in which case divergence is reported as a flag.
pub fn integral(
    which: Integrand,
    beta: &Curve,
    eps: &Curve,
    t0: f64,
    t1: f64,
) -> Result<IntegralValue> {
    let start = beta.t0().max(eps.t0());
    if !(t0 >= start) {
        return Err(Error::BeforeStart { t: t0, t0: start });
    }
    if !(t1 > t0) {
        return Err(Error::input(format!(
            "integration bounds must satisfy t1 > t0, got [{t0}, {t1}]"
        )));
    }
    let curves = select(which, beta, eps);
    if let Some((c, p)) = power_product(&curves) {
        return Ok(power_integral(c, p, t0, t1));
    }
    if t1.is_infinite() {
        return Err(Error::Unsupported(
            "infinite-horizon integral of a user curve".into(),
        ));
    }
    let f = |t: f64| {
        curves
            .iter()
            .map(|c| c.eval_unchecked(t).0)
            .product::<f64>()
    };
    Ok(IntegralValue::Finite(adaptive_simpson(&f, t0, t1, 1e-10)))
}

/// Adaptive Simpson quadrature with tolerance relative to `max(1, |I|)`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    // split on a log grid first so that long horizons are resolved
    let pieces = if a > 0.0 && b / a > 10.0 {
        ((b / a).log10().ceil() as usize) * 4
    } else {
        1
    };
    let nodes: Vec<f64> = (0..=pieces)
        .map(|i| {
            if a > 0.0 && pieces > 1 {
                a * (b / a).powf(i as f64 / pieces as f64)
            } else {
                a + (b - a) * i as f64 / pieces as f64
            }
        })
        .collect();
    let coarse: f64 = nodes
        .windows(2)
        .map(|w| simpson(f(w[0]), f(0.5 * (w[0] + w[1])), f(w[1]), w[0], w[1]))
        .sum();
    let scale = coarse.abs().max(1.0);
    nodes
        .windows(2)
        .map(|w| {
            let (l, r) = (w[0], w[1]);
            let (fl, fm, fr) = (f(l), f(0.5 * (l + r)), f(r));
            recurse(
                f,
                l,
                r,
                fl,
                fm,
                fr,
                simpson(fl, fm, fr, l, r),
                tol * scale / pieces as f64,
                48,
            )
        })
        .sum()
}

/// One hypothesis and whether it holds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub ok: bool,
    pub applicable: bool,
    /// Decided numerically on a finite horizon rather than exactly.
    pub horizon_limited: bool,
    pub conditions: Vec<Condition>,
}

impl HypothesisCheck {
    fn new(conditions: Vec<Condition>, applicable: bool, horizon_limited: bool) -> Self {
        let ok = applicable && conditions.iter().all(|c| c.holds);
        HypothesisCheck {
            ok,
            applicable,
            horizon_limited,
            conditions,
        }
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum PowerRateCase {
    /// `1 < r2 < r1 + 1`: gap of order `t^{−(r2−1)}`.
    Polynomial {
        exponent: f64,
    },
    /// `r2 = r1 + 1`: gap of order `ln t / t^{r1}`.
    Logarithmic {
        exponent: f64,
    },
    OutOfRange,
}

/// Rate classification for `β = t^{r1}`, `ε = c / t^{r2}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerRate {
    pub r1: f64,
    pub r2: f64,
    pub case: PowerRateCase,
    pub predicted_order: String,
    /// `r1 · δ ≤ t0`, i.e. `β̇ ≤ β/δ` from the start.
    pub start_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    pub rate_bounds: HypothesisCheck,
    pub energy_decay: HypothesisCheck,
    pub strong_convergence: HypothesisCheck,
    pub power_rate: Option<PowerRate>,
    pub earliest_valid_t: f64,
    pub damping_ok: bool,
    pub horizon: f64,
    pub warnings: Vec<String>,
}

const INTEGRABLE: &str = "int_beta_eps_finite";
const EPS_INTEGRABLE: &str = "int_eps_finite";
const BETA_GROWTH: &str = "beta_dot_le_beta_over_delta";
const DAMPING: &str = "inv_delta_lt_gamma";
const BETA_DIVERGES: &str = "beta_to_infinity";
const BETA_EPS_DIVERGES: &str = "beta_eps_to_infinity";

/// Horizon used for numerical checks of user curves.
pub fn check_horizon(t0: f64) -> f64 {
    1e4f64.max(100.0 * t0)
}

struct Facts {
    int_beta_eps: bool,
    int_eps: bool,
    beta_inf: bool,
    beta_eps_inf: bool,
    earliest: f64,
}

fn exact_facts(beta: (f64, f64), eps: Option<(f64, f64)>, delta: f64, t0: f64) -> Facts {
    let (_, r1) = beta;
    let earliest = if r1 <= 0.0 { t0 } else { t0.max(r1 * delta) };
    match eps {
        None => Facts {
            int_beta_eps: true,
            int_eps: true,
            beta_inf: r1 > 0.0,
            beta_eps_inf: false,
            earliest,
        },
        Some((_, re)) => {
            let p = r1 + re;
            Facts {
                int_beta_eps: p < -1.0,
                int_eps: re < -1.0,
                beta_inf: r1 > 0.0,
                beta_eps_inf: p > 0.0,
                earliest,
            }
        }
    }
}

/// Tail-ratio integrability test: the integral over the last decade must be
/// strictly smaller than over the one before it.
fn numeric_integrable(f: &dyn Fn(f64) -> f64, horizon: f64) -> bool {
    let late = adaptive_simpson(f, horizon / 10.0, horizon, 1e-12);
    let early = adaptive_simpson(f, horizon / 100.0, horizon / 10.0, 1e-12);
    if early <= 0.0 {
        return late <= 0.0;
    }
    late < (1.0 - 1e-6) * early
}

fn numeric_diverges(f: &dyn Fn(f64) -> f64, horizon: f64) -> bool {
    let hi = f(horizon);
    let lo = f(horizon / 10.0);
    hi > 0.0 && lo > 0.0 && hi > (1.0 + 1e-6) * lo
}

/// Smallest `t` on `[t0, horizon]` after which `β̇ ≤ β/δ` holds on the scan grid.
fn numeric_earliest(beta: &Curve, delta: f64, t0: f64, horizon: f64) -> f64 {
    let ok = |t: f64| {
        let (b, db) = beta.eval_unchecked(t);
        db <= b / delta * (1.0 + 1e-12)
    };
    let n = 4000;
    let grid: Vec<f64> = (0..=n)
        .map(|i| t0 * (horizon / t0).powf(i as f64 / n as f64))
        .collect();
    let Some(last_bad) = grid.iter().rposition(|&t| !ok(t)) else {
        return t0;
    };
    if last_bad == n {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (grid[last_bad], grid[last_bad + 1]);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn numeric_facts(beta: &Curve, eps: &Curve, delta: f64, t0: f64, horizon: f64) -> Facts {
    let be = |t: f64| beta.eval_unchecked(t).0 * eps.eval_unchecked(t).0;
    let e = |t: f64| eps.eval_unchecked(t).0;
    let b = |t: f64| beta.eval_unchecked(t).0;
    Facts {
        int_beta_eps: numeric_integrable(&be, horizon),
        int_eps: numeric_integrable(&e, horizon),
        beta_inf: numeric_diverges(&b, horizon),
        beta_eps_inf: !eps.is_zero() && numeric_diverges(&be, horizon),
        earliest: numeric_earliest(beta, delta, t0, horizon),
    }
}

fn fmt_exp(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn classify_power_rate(r1: f64, r2: f64, delta: f64, t0: f64) -> PowerRate {
    let tol = 1e-12 * (1.0 + r1.abs());
    let case = if (r2 - (r1 + 1.0)).abs() <= tol {
        PowerRateCase::Logarithmic { exponent: r1 }
    } else if r2 > 1.0 && r2 < r1 + 1.0 {
        PowerRateCase::Polynomial { exponent: r2 - 1.0 }
    } else {
        PowerRateCase::OutOfRange
    };
    let predicted_order = match case {
        PowerRateCase::Polynomial { exponent } => format!("t^(-{})", fmt_exp(exponent)),
        PowerRateCase::Logarithmic { exponent } => format!("ln t / t^{}", fmt_exp(exponent)),
        PowerRateCase::OutOfRange => "not covered (needs 1 < r2 <= r1 + 1)".to_string(),
    };
    PowerRate {
        r1,
        r2,
        case,
        predicted_order,
        start_ok: r1 * delta <= t0,
    }
}

/// Decides the hypotheses of the rate, integral-estimate and strong
/// convergence results for a `(β, ε, γ, δ)` configuration starting at the
/// later of the two curves' start times.
pub fn validate_regimes(beta: &Curve, eps: &Curve, gamma: f64, delta: f64) -> Result<RegimeReport> {
    if !(gamma > 0.0 && gamma.is_finite() && delta > 0.0 && delta.is_finite()) {
        return Err(Error::input(format!(
            "gamma and delta must be positive, got {gamma}, {delta}"
        )));
    }
    beta.check_beta_role()?;
    eps.check_eps_role()?;
    let t0 = beta.t0().max(eps.t0());
    let horizon = check_horizon(t0);

    let eps_power = match eps.family {
        CurveFamily::Zero => Some(None),
        CurveFamily::Power { c, r } => Some(Some((c, r))),
        CurveFamily::User(_) => None,
    };
    let (facts, limited) = match (beta.power_params(), eps_power) {
        (Some(bp), Some(ep)) => (exact_facts(bp, ep, delta, t0), false),
        _ => (numeric_facts(beta, eps, delta, t0, horizon), true),
    };

    let growth_ok = facts.earliest <= t0;
    let damping_ok = 1.0 / delta < gamma;
    let suffix = if limited {
        format!(" (checked numerically on [{t0}, {horizon}])")
    } else {
        String::new()
    };
    let cond = |name: &str, holds: bool, detail: String| Condition {
        name: name.to_string(),
        holds,
        detail: format!("{detail}{suffix}"),
    };
    let growth = cond(
        BETA_GROWTH,
        growth_ok,
        if growth_ok {
            format!("holds from t0 = {t0}")
        } else {
            format!("holds only from t = {}", facts.earliest)
        },
    );
    let damping = cond(
        DAMPING,
        damping_ok,
        format!("1/delta = {} vs gamma = {gamma}", 1.0 / delta),
    );
    let int_be = cond(INTEGRABLE, facts.int_beta_eps, String::new());
    let int_e = cond(EPS_INTEGRABLE, facts.int_eps, String::new());
    let beta_inf = cond(BETA_DIVERGES, facts.beta_inf, String::new());
    let be_inf = cond(BETA_EPS_DIVERGES, facts.beta_eps_inf, String::new());

    let rate_bounds =
        HypothesisCheck::new(vec![int_be, growth.clone(), damping.clone()], true, limited);
    let energy_decay = HypothesisCheck::new(
        vec![int_e.clone(), beta_inf, growth.clone(), damping.clone()],
        true,
        limited,
    );
    let strong_convergence = HypothesisCheck::new(
        vec![be_inf, int_e, growth, damping],
        !eps.is_zero(),
        limited,
    );

    let power_rate = match (beta.power_params(), eps.power_params()) {
        (Some((_, r1)), Some((_, re))) => Some(classify_power_rate(r1, -re, delta, t0)),
        _ => None,
    };

    let mut warnings = Vec::new();
    if !growth_ok {
        warnings.push(format!(
            "beta_dot <= beta/delta fails on [{t0}, {}); earliest_valid_t = {}",
            facts.earliest, facts.earliest
        ));
    }
    if !damping_ok {
        warnings.push(format!(
            "1/delta = {} is not below gamma = {gamma}",
            1.0 / delta
        ));
    }
    if eps.is_zero() {
        warnings.push("eps is identically zero: strong convergence result not applicable".into());
    } else if !strong_convergence.ok && energy_decay.ok {
        warnings.push("beta*eps does not diverge: strong convergence hypotheses fail".into());
    }
    if limited {
        warnings.push(format!(
            "user curve: conditions are horizon-limited checks on [{t0}, {horizon}], not proofs"
        ));
    }

    Ok(RegimeReport {
        rate_bounds,
        energy_decay,
        strong_convergence,
        power_rate,
        earliest_valid_t: facts.earliest,
        damping_ok,
        horizon,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct Wrapped(f64, f64);
    impl UserCurve for Wrapped {
        fn value(&self, t: f64) -> f64 {
            self.0 * t.powf(self.1)
        }
        fn derivative(&self, t: f64) -> f64 {
            self.0 * self.1 * t.powf(self.1 - 1.0)
        }
    }

    #[test]
    fn eval_power_and_zero() {
        let b = Curve::power(1.0, 0.5, 1.0).unwrap();
        assert_eq!(b.eval(4.0).unwrap(), (2.0, 0.25));
        let e = Curve::power(3.0, -1.6, 1.0).unwrap();
        let (v, d) = e.eval(1.0).unwrap();
        assert_eq!(v, 3.0);
        assert_abs_diff_eq!(d, -4.8, epsilon = 1e-15);
        assert_eq!(Curve::zero(1.0).unwrap().eval(17.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn eval_before_start_is_an_error() {
        let b = Curve::power(1.0, 0.5, 1.0).unwrap();
        assert!(matches!(b.eval(0.5), Err(Error::BeforeStart { .. })));
    }

    #[test]
    fn rejects_bad_curves() {
        assert!(Curve::power(0.0, 1.0, 1.0).is_err());
        assert!(Curve::power(1.0, 1.0, 0.0).is_err());
        assert!(Curve::power(1.0, -1.0, 1.0)
            .unwrap()
            .check_beta_role()
            .is_err());
        assert!(Curve::power(1.0, 0.5, 1.0)
            .unwrap()
            .check_eps_role()
            .is_err());
        assert!(Curve::zero(1.0).unwrap().check_beta_role().is_err());
    }

    #[test]
    fn first_experiment_regime() {
        let beta = Curve::power(1.0, 0.5, 1.0).unwrap();
        let eps = Curve::power(3.0, -1.6, 1.0).unwrap();
        let rep = validate_regimes(&beta, &eps, 0.25, 9.0).unwrap();
        assert!(rep.rate_bounds.condition(INTEGRABLE).unwrap().holds);
        assert!(rep.rate_bounds.condition(DAMPING).unwrap().holds);
        assert!(!rep.rate_bounds.condition(BETA_GROWTH).unwrap().holds);
        assert!(!rep.rate_bounds.ok);
        assert_eq!(rep.earliest_valid_t, 4.5);
        assert!(!rep.rate_bounds.horizon_limited);
    }

    #[test]
    fn strong_convergence_case_regime() {
        let beta = Curve::power(1.0, 0.5, 1.0).unwrap();
        let eps = Curve::power(15.0, -1.6, 1.0).unwrap();
        let rep = validate_regimes(&beta, &eps, 10.0, 0.5).unwrap();
        assert!(rep.energy_decay.ok);
        assert!(!rep.strong_convergence.ok);
        assert!(
            !rep.strong_convergence
                .condition(BETA_EPS_DIVERGES)
                .unwrap()
                .holds
        );
        assert_eq!(rep.earliest_valid_t, 1.0);
    }

    #[test]
    fn power_rate_classification() {
        let beta = Curve::power(1.0, 2.0, 1.0).unwrap();
        let eps = Curve::power(3.0, -2.5, 1.0).unwrap();
        let rep = validate_regimes(&beta, &eps, 10.0, 0.2).unwrap();
        let pr = rep.power_rate.unwrap();
        assert_eq!(pr.case, PowerRateCase::Polynomial { exponent: 1.5 });
        assert_eq!(pr.predicted_order, "t^(-1.5)");
        assert!(pr.start_ok);

        let eps3 = Curve::power(3.0, -3.0, 1.0).unwrap();
        let pr = validate_regimes(&beta, &eps3, 10.0, 0.2)
            .unwrap()
            .power_rate
            .unwrap();
        assert_eq!(pr.case, PowerRateCase::Logarithmic { exponent: 2.0 });
        assert_eq!(pr.predicted_order, "ln t / t^2");

        let eps4 = Curve::power(3.0, -4.0, 1.0).unwrap();
        let pr = validate_regimes(&beta, &eps4, 10.0, 0.2)
            .unwrap()
            .power_rate
            .unwrap();
        assert_eq!(pr.case, PowerRateCase::OutOfRange);
    }

    #[test]
    fn zero_eps_makes_strong_convergence_inapplicable() {
        let beta = Curve::power(1.0, 0.4, 1.0).unwrap();
        let rep = validate_regimes(&beta, &Curve::zero(1.0).unwrap(), 10.0, 0.2).unwrap();
        assert!(!rep.strong_convergence.applicable);
        assert!(!rep.strong_convergence.ok);
        assert!(rep.rate_bounds.ok);
        assert!(rep.power_rate.is_none());
    }

    #[test]
    fn integrals_closed_form() {
        let one = Curve::constant(1.0, 1.0).unwrap();
        let e = Curve::power(3.0, -1.1, 1.0).unwrap();
        let v = integral(Integrand::Eps, &one, &e, 1.0, 1e6)
            .unwrap()
            .finite()
            .unwrap();
        assert_abs_diff_eq!(v, 30.0 * (1.0 - 1e6f64.powf(-0.1)), epsilon = 1e-12);
        let tail = integral(Integrand::Eps, &one, &e, 1.0, f64::INFINITY)
            .unwrap()
            .finite()
            .unwrap();
        assert_abs_diff_eq!(tail, 30.0, epsilon = 1e-12);
        let inv = Curve::power(1.0, -1.0, 1.0).unwrap();
        let v = integral(Integrand::Eps, &one, &inv, 1.0, 50.0)
            .unwrap()
            .finite()
            .unwrap();
        assert_abs_diff_eq!(v, 50f64.ln(), epsilon = 1e-14);
        assert_eq!(
            integral(Integrand::Eps, &one, &inv, 1.0, f64::INFINITY).unwrap(),
            IntegralValue::Divergent
        );
        let b2 = Curve::power(1.0, 2.0, 1.0).unwrap();
        let e2 = Curve::power(1.0, -2.0, 1.0).unwrap();
        let v = integral(Integrand::BetaEps, &b2, &e2, 1.0, 10.0)
            .unwrap()
            .finite()
            .unwrap();
        assert_abs_diff_eq!(v, 9.0, epsilon = 1e-14);
    }

    #[test]
    fn user_integral_matches_closed_form() {
        let one = Curve::constant(1.0, 1.0).unwrap();
        let u = Curve::user(Arc::new(Wrapped(3.0, -1.1)), 1.0).unwrap();
        let v = integral(Integrand::Eps, &one, &u, 1.0, 1e4)
            .unwrap()
            .finite()
            .unwrap();
        assert_abs_diff_eq!(v, 30.0 * (1.0 - 1e4f64.powf(-0.1)), epsilon = 1e-9);
        assert!(integral(Integrand::Eps, &one, &u, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn running_average_vanishes() {
        // (1/ψ(t)) ∫ ψφ with ψ(t) = t, φ(t) = t^{-2} equals ln t / t
        let t = 1e4;
        let avg = adaptive_simpson(&|s: f64| s * s.powi(-2), 1.0, t, 1e-10) / t;
        assert_abs_diff_eq!(avg, t.ln() / t, epsilon = 1e-12);
        assert!(avg < 1e-3);
    }

    #[test]
    fn user_curves_are_horizon_limited() {
        let beta = Curve::user(Arc::new(Wrapped(1.0, 0.5)), 1.0).unwrap();
        let eps = Curve::user(Arc::new(Wrapped(3.0, -1.6)), 1.0).unwrap();
        let rep = validate_regimes(&beta, &eps, 0.25, 9.0).unwrap();
        assert!(rep.rate_bounds.horizon_limited);
        assert_abs_diff_eq!(rep.earliest_valid_t, 4.5, epsilon = 1e-9);
        assert!(rep.warnings.iter().any(|w| w.contains("horizon-limited")));
    }
}
