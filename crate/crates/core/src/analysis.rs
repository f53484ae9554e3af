//! Post-processing of trajectories: convergence metrics, Lyapunov energies,
//! integral estimates, Tikhonov-path gaps and decay-rate fits.

use serde::Serialize;

use crate::dynamics::{SystemState, SystemTrajectory, TikhonovParams};
use crate::problem::{ReferenceSolution, SeparableProblem, Vector};
use crate::schedules::{integral, Curve, IntegralValue, Integrand};
use crate::{Error, Result};

/// Pointwise convergence measures along a trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricSeries {
    pub times: Vec<f64>,
    /// `𝓛(x, y, λ*) − 𝓛(x*, y*, λ*)` for the augmented Lagrangian.
    pub lag_gap: Vec<f64>,
    pub phi_err: Vec<f64>,
    pub feas: Vec<f64>,
    pub gradf_gap: Vec<f64>,
    pub gradg_gap: Vec<f64>,
    pub minnorm_dist: Vec<f64>,
    pub vel_x: Vec<f64>,
    pub vel_y: Vec<f64>,
    pub vel_lam: Option<Vec<f64>>,
}

fn point_metrics(
    prob: &SeparableProblem,
    refs: &ReferenceSolution,
    s: &SystemState,
) -> Result<[f64; 6]> {
    let base = prob.aug_lagrangian(&refs.x_star, &refs.y_star, &refs.lambda_star)?;
    let lag_gap = prob.aug_lagrangian(&s.x, &s.y, &refs.lambda_star)? - base;
    let phi_err = (prob.objective(&s.x, &s.y)? - refs.phi_star).abs();
    let feas = prob.constraint_residual(&s.x, &s.y)?.norm();
    let gradf_gap = (prob.f().gradient(&s.x) - prob.f().gradient(&refs.x_star)).norm();
    let gradg_gap = (prob.g().gradient(&s.y) - prob.g().gradient(&refs.y_star)).norm();
    let minnorm_dist =
        ((&s.x - &refs.x_bar).norm_squared() + (&s.y - &refs.y_bar).norm_squared()).sqrt();
    Ok([lag_gap, phi_err, feas, gradf_gap, gradg_gap, minnorm_dist])
}

pub fn metrics(
    traj: &SystemTrajectory,
    prob: &SeparableProblem,
    refs: &ReferenceSolution,
) -> Result<MetricSeries> {
    let mut out = MetricSeries {
        times: traj.times.clone(),
        ..Default::default()
    };
    let mut vel_lam = Vec::new();
    for s in &traj.states {
        let [g, p, f, gf, gg, mn] = point_metrics(prob, refs, s)?;
        out.lag_gap.push(g);
        out.phi_err.push(p);
        out.feas.push(f);
        out.gradf_gap.push(gf);
        out.gradg_gap.push(gg);
        out.minnorm_dist.push(mn);
        out.vel_x.push(s.vx.norm());
        out.vel_y.push(s.vy.norm());
        if let Some(vl) = &s.vlam {
            vel_lam.push(vl.norm());
        }
    }
    if traj.layout.second_order_dual {
        out.vel_lam = Some(vel_lam);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EnergyReport {
    pub e: Vec<f64>,
    pub etilde: Vec<f64>,
    /// Empty when no minimal-norm reference is available.
    pub ehat: Vec<f64>,
    pub corrected: Vec<f64>,
    /// Largest increase of `corrected` between consecutive samples, relative
    /// to the largest magnitude of the series.
    pub monotonicity_violation: f64,
    /// `√β · ‖(x − x*)/δ + ẋ‖`, reported but not gated.
    pub scaled_velocity_x: Vec<f64>,
    pub scaled_velocity_y: Vec<f64>,
    /// `δγ ≤ 1`: E may be sign-indefinite.
    pub sign_indefinite: bool,
}

/// Kinetic part of the energies divided by β, about the reference `(x°, y°, λ°)`.
fn kinetic_over_beta(
    s: &SystemState,
    xr: &Vector,
    yr: &Vector,
    lr: &Vector,
    p: &TikhonovParams,
    beta: f64,
) -> f64 {
    let d = p.delta;
    let w = (d * p.gamma - 1.0) / (2.0 * d * d);
    let dx = &s.x - xr;
    let dy = &s.y - yr;
    let ax = (&dx / d + &s.vx).norm_squared();
    let ay = (&dy / d + &s.vy).norm_squared();
    (0.5 * (ax + ay)
        + w * (dx.norm_squared() + dy.norm_squared())
        + (&s.lam - lr).norm_squared() / (2.0 * d))
        / beta
}

/// Energies along a trajectory of the regularized system.
pub fn energies(
    traj: &SystemTrajectory,
    prob: &SeparableProblem,
    refs: &ReferenceSolution,
    params: &TikhonovParams,
    with_min_norm: bool,
) -> Result<EnergyReport> {
    if traj.layout.second_order_dual {
        return Err(Error::input(
            "energies are defined for the regularized first-order-dual system",
        ));
    }
    let base = prob.aug_lagrangian(&refs.x_star, &refs.y_star, &refs.lambda_star)?;
    let zbar_sq = refs.min_norm_sq();
    let t0 = traj.times[0];
    let mut rep = EnergyReport {
        sign_indefinite: params.delta * params.gamma <= 1.0,
        ..Default::default()
    };
    for (&t, s) in traj.times.iter().zip(&traj.states) {
        let (beta, _) = params.beta.eval(t)?;
        let (eps, _) = params.eps.eval(t)?;
        let gap = prob.aug_lagrangian(&s.x, &s.y, &refs.lambda_star)? - base;
        let reg = 0.5 * eps * (s.x.norm_squared() + s.y.norm_squared());
        let et = gap
            + reg
            + kinetic_over_beta(
                s,
                &refs.x_star,
                &refs.y_star,
                &refs.lambda_star,
                params,
                beta,
            );
        rep.etilde.push(et);
        rep.e.push(beta * et);
        if with_min_norm {
            let lb = &refs.lambda_bar;
            let eh = prob.tikhonov_objective(lb, eps, &s.x, &s.y)?
                - prob.tikhonov_objective(lb, eps, &refs.x_bar, &refs.y_bar)?
                + kinetic_over_beta(s, &refs.x_bar, &refs.y_bar, lb, params, beta);
            rep.ehat.push(eh);
        }
        let acc = if t > t0 {
            match integral(Integrand::BetaEps, &params.beta, &params.eps, t0, t)? {
                IntegralValue::Finite(v) => v,
                IntegralValue::Divergent => f64::INFINITY,
            }
        } else {
            0.0
        };
        rep.corrected
            .push(beta * et - zbar_sq / (2.0 * params.delta) * acc);
        let sb = beta.sqrt();
        rep.scaled_velocity_x
            .push(sb * ((&s.x - &refs.x_star) / params.delta + &s.vx).norm());
        rep.scaled_velocity_y
            .push(sb * ((&s.y - &refs.y_star) / params.delta + &s.vy).norm());
    }
    rep.monotonicity_violation = max_relative_increase(&rep.corrected);
    Ok(rep)
}

/// Largest `(v[i] − v[i−1])⁺` divided by `max |v|`.
pub fn max_relative_increase(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    v.windows(2)
        .map(|w| (w[1] - w[0]).max(0.0))
        .fold(0.0, f64::max)
        / scale
}

/// Running trapezoid integrals of the four integral-estimate integrands.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IntegralEstimates {
    pub times: Vec<f64>,
    /// `((δγ − 1)/δ)(‖ẋ‖² + ‖ẏ‖²)`
    pub velocity: Vec<f64>,
    /// `(β/δ − β̇) · gap`
    pub gap: Vec<f64>,
    /// `(βε/2δ)(‖x − x*‖² + ‖y − y*‖²)`
    pub tikhonov: Vec<f64>,
    /// `β ‖Ax + By − b‖²`
    pub feasibility: Vec<f64>,
}

impl IntegralEstimates {
    pub fn series(&self) -> [(&'static str, &Vec<f64>); 4] {
        [
            ("velocity", &self.velocity),
            ("gap", &self.gap),
            ("tikhonov", &self.tikhonov),
            ("feasibility", &self.feasibility),
        ]
    }
}

fn running_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..t.len() {
        acc += 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
        out.push(acc);
    }
    out
}

pub fn integral_estimates(
    traj: &SystemTrajectory,
    prob: &SeparableProblem,
    refs: &ReferenceSolution,
    params: &TikhonovParams,
) -> Result<IntegralEstimates> {
    let base = prob.aug_lagrangian(&refs.x_star, &refs.y_star, &refs.lambda_star)?;
    let d = params.delta;
    let mut f = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (&t, s) in traj.times.iter().zip(&traj.states) {
        let (beta, dbeta) = params.beta.eval(t)?;
        let (eps, _) = params.eps.eval(t)?;
        let gap = prob.aug_lagrangian(&s.x, &s.y, &refs.lambda_star)? - base;
        let dist = (&s.x - &refs.x_star).norm_squared() + (&s.y - &refs.y_star).norm_squared();
        let feas = prob.constraint_residual(&s.x, &s.y)?.norm_squared();
        f[0].push((d * params.gamma - 1.0) / d * (s.vx.norm_squared() + s.vy.norm_squared()));
        f[1].push((beta / d - dbeta) * gap);
        f[2].push(beta * eps / (2.0 * d) * dist);
        f[3].push(beta * feas);
    }
    let t = &traj.times;
    Ok(IntegralEstimates {
        times: t.clone(),
        velocity: running_trapezoid(t, &f[0]),
        gap: running_trapezoid(t, &f[1]),
        tikhonov: running_trapezoid(t, &f[2]),
        feasibility: running_trapezoid(t, &f[3]),
    })
}

/// Least-squares line through `(ln t, ln v)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub t_lo: f64,
    pub t_hi: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub samples: usize,
    /// Samples in the window dropped for being non-positive.
    pub dropped: usize,
}

pub fn fit_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::input("times and values differ in length"));
    }
    let (lo, hi) = window;
    let mut dropped = 0;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .filter_map(|(t, v)| {
            if *v > 0.0 && v.is_finite() && *t > 0.0 {
                Some((t.ln(), v.ln()))
            } else {
                dropped += 1;
                None
            }
        })
        .collect();
    if pts.len() < 10 {
        return Err(Error::input(format!(
            "rate fit needs at least 10 positive samples in [{lo}, {hi}], got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::input("rate fit window has no spread in t"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        t_lo: lo,
        t_hi: hi,
        slope,
        intercept,
        r2,
        samples: pts.len(),
        dropped,
    })
}

/// `max_{late}(w·v) / max_{early}(w·v)`; at most `1 + tol` certifies an
/// `O(1/w)` bound on the sampled range. Samples with non-finite weight are
/// skipped.
pub fn bounded_ratio(
    times: &[f64],
    values: &[f64],
    weight: &dyn Fn(f64) -> f64,
    early: (f64, f64),
    late: (f64, f64),
) -> Result<f64> {
    let window_max = |(lo, hi): (f64, f64)| -> Result<f64> {
        let vals: Vec<f64> = times
            .iter()
            .zip(values)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(t, v)| weight(*t) * v)
            .filter(|x| x.is_finite())
            .collect();
        if vals.is_empty() {
            return Err(Error::input(format!("no samples in window [{lo}, {hi}]")));
        }
        Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
    };
    let e = window_max(early)?;
    let l = window_max(late)?;
    if !(e > 0.0) {
        return Err(Error::input(format!(
            "early window maximum must be positive, got {e}"
        )));
    }
    Ok(l / e)
}

/// Weight function from a curve's value.
pub fn curve_weight(c: &Curve) -> impl Fn(f64) -> f64 + '_ {
    move |t| c.eval(t).map_or(f64::NAN, |(v, _)| v)
}

/// Distance to the Tikhonov minimiser along a trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TikhonovPath {
    pub times: Vec<f64>,
    /// `‖(x, y) − (x_ε, y_ε)‖`; `None` where `ε(t) = 0`.
    pub gap: Vec<Option<f64>>,
    pub residual: Vec<Option<f64>>,
    pub skipped: usize,
}

/// Residual of the lower bound
/// `L_ε(z) − L_ε(z̄) ≥ (ε/2)‖z − z_ε‖² + (ε/2)(‖z_ε‖² − ‖z̄‖²)`; nonnegative
/// when the bound holds.
pub fn tikhonov_residual(
    prob: &SeparableProblem,
    refs: &ReferenceSolution,
    eps: f64,
    z: (&Vector, &Vector),
    z_eps: (&Vector, &Vector),
) -> Result<f64> {
    let lb = &refs.lambda_bar;
    let lhs = prob.tikhonov_objective(lb, eps, z.0, z.1)?
        - prob.tikhonov_objective(lb, eps, &refs.x_bar, &refs.y_bar)?;
    let dist = (z.0 - z_eps.0).norm_squared() + (z.1 - z_eps.1).norm_squared();
    let norms = z_eps.0.norm_squared() + z_eps.1.norm_squared() - refs.min_norm_sq();
    Ok(lhs - 0.5 * eps * dist - 0.5 * eps * norms)
}

pub fn tikhonov_path(
    traj: &SystemTrajectory,
    prob: &SeparableProblem,
    refs: &ReferenceSolution,
    eps: &Curve,
) -> Result<TikhonovPath> {
    let mut out = TikhonovPath {
        times: traj.times.clone(),
        ..Default::default()
    };
    for (&t, s) in traj.times.iter().zip(&traj.states) {
        let (e, _) = eps.eval(t)?;
        if e <= 0.0 {
            out.gap.push(None);
            out.residual.push(None);
            out.skipped += 1;
            continue;
        }
        let (xe, ye) = prob.tikhonov_minimizer(&refs.lambda_bar, e)?;
        out.gap.push(Some(
            ((&s.x - &xe).norm_squared() + (&s.y - &ye).norm_squared()).sqrt(),
        ));
        out.residual.push(Some(tikhonov_residual(
            prob,
            refs,
            e,
            (&s.x, &s.y),
            (&xe, &ye),
        )?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Layout;
    use crate::integrator::StepStats;
    use crate::problem::{builtin, Builtin};
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn frozen(prob: &SeparableProblem, s: SystemState, n: usize) -> SystemTrajectory {
        let times: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        SystemTrajectory {
            layout: Layout::for_problem(prob, s.vlam.is_some()),
            states: vec![s; n],
            times,
            stats: StepStats::default(),
        }
    }

    fn saddle_state(r: &ReferenceSolution) -> SystemState {
        SystemState {
            x: r.x_star.clone(),
            y: r.y_star.clone(),
            lam: r.lambda_star.clone(),
            vx: Vector::zeros(r.x_star.len()),
            vy: Vector::zeros(r.y_star.len()),
            vlam: None,
        }
    }

    fn params(beta: Curve, eps: Curve) -> TikhonovParams {
        TikhonovParams {
            gamma: 10.0,
            delta: 0.2,
            beta,
            eps,
        }
    }

    #[test]
    fn metrics_at_saddle_vanish() {
        let prob = builtin(&Builtin::Example2).unwrap();
        let r = prob.solve_saddle_point().unwrap();
        let tr = frozen(&prob, saddle_state(&r), 5);
        let m = metrics(&tr, &prob, &r).unwrap();
        for series in [
            &m.lag_gap,
            &m.phi_err,
            &m.feas,
            &m.gradf_gap,
            &m.gradg_gap,
            &m.minnorm_dist,
        ] {
            assert!(series.iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn metrics_example1_initial_state() {
        let prob = builtin(&Builtin::Example1 {
            m: 5.0,
            n: 1.0,
            e: 1.0,
            d: 5.0,
        })
        .unwrap();
        let r = prob.solve_saddle_point().unwrap();
        let s = SystemState {
            x: v(&[1.0, 1.0, 1.0]),
            y: v(&[1.0]),
            lam: v(&[1.0]),
            vx: v(&[1.0, 1.0, 1.0]),
            vy: v(&[1.0]),
            vlam: None,
        };
        let m = metrics(&frozen(&prob, s, 2), &prob, &r).unwrap();
        assert_abs_diff_eq!(m.phi_err[0], 54.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.feas[0], 10.0, epsilon = 1e-12);
    }

    #[test]
    fn energies_at_saddle_and_identities() {
        let prob = builtin(&Builtin::Example2).unwrap();
        let r = prob.solve_saddle_point().unwrap();
        let p = params(
            Curve::power(1.0, 0.4, 1.0).unwrap(),
            Curve::zero(1.0).unwrap(),
        );
        let rep = energies(&frozen(&prob, saddle_state(&r), 4), &prob, &r, &p, true).unwrap();
        assert!(rep.e.iter().all(|x| x.abs() < 1e-12));

        let p = params(
            Curve::power(1.0, 0.4, 1.0).unwrap(),
            Curve::power(1.0, -2.0, 1.0).unwrap(),
        );
        let s = SystemState {
            x: v(&[1.0, 1.0]),
            y: v(&[1.0, 1.0]),
            lam: v(&[1.0, 1.0]),
            vx: v(&[1.0, 1.0]),
            vy: v(&[1.0, 1.0]),
            vlam: None,
        };
        let tr = frozen(&prob, s, 6);
        let rep = energies(&tr, &prob, &r, &p, true).unwrap();
        for (i, &t) in tr.times.iter().enumerate() {
            let beta = t.powf(0.4);
            assert_abs_diff_eq!(
                rep.etilde[i],
                rep.e[i] / beta,
                epsilon = 1e-12 * rep.e[i].abs()
            );
            let eps = t.powi(-2);
            let expected = rep.etilde[i] - 0.5 * eps * r.min_norm_sq();
            assert_abs_diff_eq!(rep.ehat[i], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn integral_estimates_vanish_at_saddle() {
        let prob = builtin(&Builtin::Example2).unwrap();
        let r = prob.solve_saddle_point().unwrap();
        let p = params(
            Curve::power(1.0, 0.4, 1.0).unwrap(),
            Curve::zero(1.0).unwrap(),
        );
        let est = integral_estimates(&frozen(&prob, saddle_state(&r), 4), &prob, &r, &p).unwrap();
        for (_, s) in est.series() {
            assert!(s.iter().all(|x| x.abs() < 1e-12));
        }
    }

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn fit_rate_exact_powers() {
        let t = log_grid(1.0, 100.0, 50);
        let v: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
        let f = fit_rate(&t, &v, (1.0, 100.0)).unwrap();
        assert_abs_diff_eq!(f.slope, -1.0, epsilon = 1e-12);
        let v: Vec<f64> = t.iter().map(|t| 5.0 * t.powf(-0.5)).collect();
        let f = fit_rate(&t, &v, (1.0, 100.0)).unwrap();
        assert_abs_diff_eq!(f.slope, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.intercept, 5f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(f.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_rate_oscillating() {
        let t = log_grid(10.0, 1000.0, 200);
        let v: Vec<f64> = t.iter().map(|t| (2.0 + t.ln().sin()) / t).collect();
        let f = fit_rate(&t, &v, (10.0, 1000.0)).unwrap();
        assert!((f.slope + 1.0).abs() < 0.1, "{}", f.slope);
    }

    #[test]
    fn fit_rate_drops_nonpositive_and_needs_samples() {
        let t = log_grid(1.0, 100.0, 30);
        let mut v: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
        v[3] = 0.0;
        v[4] = -1.0;
        let f = fit_rate(&t, &v, (1.0, 100.0)).unwrap();
        assert_eq!(f.dropped, 2);
        assert!(fit_rate(&t, &v, (1.0, 2.0)).is_err());
    }

    #[test]
    fn bounded_ratio_examples() {
        let t = log_grid(1.0, 100.0, 100);
        let beta = Curve::power(1.0, 0.4, 1.0).unwrap();
        let w = curve_weight(&beta);
        let inv: Vec<f64> = t.iter().map(|t| t.powf(-0.4)).collect();
        let r = bounded_ratio(&t, &inv, &w, (1.0, 10.0), (50.0, 100.0)).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
        let inv2: Vec<f64> = t.iter().map(|t| t.powf(-0.8)).collect();
        assert!(bounded_ratio(&t, &inv2, &w, (1.0, 10.0), (50.0, 100.0)).unwrap() < 1.0);
        assert!(bounded_ratio(&t, &inv2, &w, (200.0, 300.0), (50.0, 100.0)).is_err());
    }

    #[test]
    fn bounded_ratio_skips_singular_weight() {
        let t = log_grid(1.0, 100.0, 100);
        let v: Vec<f64> = t.iter().map(|t| t.ln().max(1e-300) / (t * t)).collect();
        let w = |t: f64| t * t / t.ln();
        let r = bounded_ratio(&t, &v, &w, (1.0, 10.0), (50.0, 100.0)).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tikhonov_path_example1_is_distance_to_origin() {
        let prob = builtin(&Builtin::Example1 {
            m: 5.0,
            n: 1.0,
            e: 1.0,
            d: 5.0,
        })
        .unwrap();
        let r = prob.solve_saddle_point().unwrap();
        let s = SystemState {
            x: v(&[1.0, -2.0, 0.5]),
            y: v(&[0.3]),
            lam: v(&[0.0]),
            vx: Vector::zeros(3),
            vy: Vector::zeros(1),
            vlam: None,
        };
        let norm = (1.0f64 + 4.0 + 0.25 + 0.09).sqrt();
        let eps = Curve::power(15.0, -1.6, 1.0).unwrap();
        let path = tikhonov_path(&frozen(&prob, s, 3), &prob, &r, &eps).unwrap();
        for g in &path.gap {
            assert_abs_diff_eq!(g.unwrap(), norm, epsilon = 1e-12);
        }
        assert!(path.residual.iter().all(|x| x.unwrap() >= -1e-9));
    }

    #[test]
    fn residual_at_tikhonov_point() {
        let prob = builtin(&Builtin::Example2).unwrap();
        let r = prob.solve_saddle_point().unwrap();
        let eps = 0.3;
        let (xe, ye) = prob.tikhonov_minimizer(&r.lambda_bar, eps).unwrap();
        let res = tikhonov_residual(&prob, &r, eps, (&xe, &ye), (&xe, &ye)).unwrap();
        // at z = z_eps the bound reduces to the saddle inequality 𝓛(z_eps, λ̄) ≥ 𝓛(z̄, λ̄)
        let lb = &r.lambda_bar;
        let expected = prob.aug_lagrangian(&xe, &ye, lb).unwrap()
            - prob.aug_lagrangian(&r.x_bar, &r.y_bar, lb).unwrap();
        assert_abs_diff_eq!(res, expected, epsilon = 1e-12);
        assert!(res >= 0.0);
    }

    #[test]
    fn relative_increase() {
        assert_eq!(max_relative_increase(&[4.0, 3.0, 2.0]), 0.0);
        assert_abs_diff_eq!(
            max_relative_increase(&[4.0, 3.0, 3.4]),
            0.1,
            epsilon = 1e-15
        );
    }
}
