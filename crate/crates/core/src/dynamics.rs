//! Vector fields of the regularized primal-dual system and the two
//! second-order-dual comparison systems, state packing, and the growth
//! constants that guarantee global existence.

use std::ops::Range;

use nalgebra::DVectorView;
use serde::Serialize;

use crate::integrator::{self, IntegratorConfig, Sampling, StepStats};
use crate::problem::{spectral_norm, SeparableProblem, Vector};
use crate::schedules::Curve;
use crate::{Error, Result};

/// Block sizes of the flat state `(x, y, λ, ẋ, ẏ[, λ̇])`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Layout {
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub second_order_dual: bool,
}

impl Layout {
    pub fn for_problem(prob: &SeparableProblem, second_order_dual: bool) -> Self {
        Layout {
            n1: prob.n1(),
            n2: prob.n2(),
            m: prob.m(),
            second_order_dual,
        }
    }

    pub fn len(&self) -> usize {
        2 * (self.n1 + self.n2) + self.m * if self.second_order_dual { 2 } else { 1 }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self) -> Range<usize> {
        0..self.n1
    }
    pub fn y(&self) -> Range<usize> {
        self.n1..self.n1 + self.n2
    }
    pub fn lam(&self) -> Range<usize> {
        let s = self.n1 + self.n2;
        s..s + self.m
    }
    pub fn vx(&self) -> Range<usize> {
        let s = self.n1 + self.n2 + self.m;
        s..s + self.n1
    }
    pub fn vy(&self) -> Range<usize> {
        let s = 2 * self.n1 + self.n2 + self.m;
        s..s + self.n2
    }
    pub fn vlam(&self) -> Option<Range<usize>> {
        let s = 2 * (self.n1 + self.n2) + self.m;
        self.second_order_dual.then(|| s..s + self.m)
    }

    /// CSV column names in packing order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        let mut block =
            |prefix: &str, n: usize| names.extend((0..n).map(|i| format!("{prefix}_{i}")));
        block("x", self.n1);
        block("y", self.n2);
        block("lam", self.m);
        block("vx", self.n1);
        block("vy", self.n2);
        if self.second_order_dual {
            block("vlam", self.m);
        }
        names
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub x: Vector,
    pub y: Vector,
    pub lam: Vector,
    pub vx: Vector,
    pub vy: Vector,
    pub vlam: Option<Vector>,
}

impl SystemState {
    pub fn layout(&self) -> Layout {
        Layout {
            n1: self.x.len(),
            n2: self.y.len(),
            m: self.lam.len(),
            second_order_dual: self.vlam.is_some(),
        }
    }

    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout().len());
        for v in [&self.x, &self.y, &self.lam, &self.vx, &self.vy] {
            out.extend(v.iter());
        }
        if let Some(vl) = &self.vlam {
            out.extend(vl.iter());
        }
        out
    }

    pub fn unpack(flat: &[f64], layout: &Layout) -> Result<Self> {
        if flat.len() != layout.len() {
            return Err(Error::input(format!(
                "state has length {}, layout expects {}",
                flat.len(),
                layout.len()
            )));
        }
        let take = |r: Range<usize>| Vector::from_column_slice(&flat[r]);
        Ok(SystemState {
            x: take(layout.x()),
            y: take(layout.y()),
            lam: take(layout.lam()),
            vx: take(layout.vx()),
            vy: take(layout.vy()),
            vlam: layout.vlam().map(take),
        })
    }
}

/// Parameters of the regularized system: constant damping `γ`, extrapolation
/// `δ`, time scaling `β(t)` and Tikhonov term `ε(t)`.
#[derive(Clone, Debug)]
pub struct TikhonovParams {
    pub gamma: f64,
    pub delta: f64,
    pub beta: Curve,
    pub eps: Curve,
}

/// Second-order dual system without time scaling, with damping `γ(t)` and
/// extrapolation `δ(t)`.
#[derive(Clone, Debug)]
pub struct SecondOrderDualParams {
    pub gamma: Curve,
    pub delta: Curve,
}

/// Time-rescaled inertial augmented Lagrangian system.
#[derive(Clone, Debug)]
pub struct RescaledAlmParams {
    pub gamma: Curve,
    pub beta: Curve,
    pub a: Curve,
    pub mu: f64,
}

#[derive(Clone, Debug)]
pub enum SystemKind {
    TikhonovPd(TikhonovParams),
    SecondOrderDual(SecondOrderDualParams),
    RescaledAlm(RescaledAlmParams),
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl SystemKind {
    pub fn second_order_dual(&self) -> bool {
        !matches!(self, SystemKind::TikhonovPd(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::TikhonovPd(_) => "tikhonov_pd",
            SystemKind::SecondOrderDual(_) => "second_order_dual",
            SystemKind::RescaledAlm(_) => "rescaled_alm",
        }
    }

    /// Latest start time of the parameter curves.
    pub fn t0(&self) -> f64 {
        match self {
            SystemKind::TikhonovPd(p) => p.beta.t0().max(p.eps.t0()),
            SystemKind::SecondOrderDual(p) => p.gamma.t0().max(p.delta.t0()),
            SystemKind::RescaledAlm(p) => p.gamma.t0().max(p.beta.t0()).max(p.a.t0()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SystemKind::TikhonovPd(p) => {
                positive("gamma", p.gamma)?;
                positive("delta", p.delta)?;
                p.beta.check_beta_role()?;
                p.eps.check_eps_role()
            }
            SystemKind::SecondOrderDual(_) => Ok(()),
            SystemKind::RescaledAlm(p) => {
                if !(p.mu >= 0.0 && p.mu.is_finite()) {
                    return Err(Error::input(format!(
                        "mu must be nonnegative, got {}",
                        p.mu
                    )));
                }
                p.beta.check_beta_role()
            }
        }
    }

    pub fn layout(&self, prob: &SeparableProblem) -> Layout {
        Layout::for_problem(prob, self.second_order_dual())
    }

    /// Warning when `1/δ ≥ γ` for the regularized system.
    pub fn damping_warning(&self) -> Option<String> {
        match self {
            SystemKind::TikhonovPd(p) if 1.0 / p.delta >= p.gamma => Some(format!(
                "1/delta = {} is not below gamma = {}",
                1.0 / p.delta,
                p.gamma
            )),
            _ => None,
        }
    }
}

fn view<'a>(s: &'a [f64], r: Range<usize>) -> DVectorView<'a, f64> {
    let n = r.len();
    DVectorView::from_slice(&s[r], n)
}

/// Flat right-hand side: writes the time derivative of `s` into `out`.
pub fn vector_field_flat(
    kind: &SystemKind,
    prob: &SeparableProblem,
    t: f64,
    s: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let l = kind.layout(prob);
    if s.len() != l.len() || out.len() != l.len() {
        return Err(Error::input(format!(
            "state has length {}, expected {}",
            s.len(),
            l.len()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::PoisonedState { t });
    }
    let x = Vector::from(view(s, l.x()));
    let y = Vector::from(view(s, l.y()));
    let lam = view(s, l.lam());
    let vx = view(s, l.vx());
    let vy = view(s, l.vy());
    let (a, b) = (prob.a(), prob.b());
    let gf = prob.f().gradient(&x);
    let gg = prob.g().gradient(&y);
    let r = a * &x + b * &y - prob.rhs();

    let (ax, ay, dlam, alam) = match kind {
        SystemKind::TikhonovPd(p) => {
            let (beta, _) = p.beta.eval(t)?;
            let (eps, _) = p.eps.eval(t)?;
            let mult = lam + &r;
            let ax = -p.gamma * vx - beta * (gf + a.tr_mul(&mult) + eps * &x);
            let ay = -p.gamma * vy - beta * (gg + b.tr_mul(&mult) + eps * &y);
            let dlam = beta * (&r + p.delta * (a * vx + b * vy));
            (ax, ay, dlam, None)
        }
        SystemKind::SecondOrderDual(p) => {
            let (gamma, _) = p.gamma.eval(t)?;
            let (delta, _) = p.delta.eval(t)?;
            let vlam = view(s, l.vlam().expect("second-order layout"));
            let mult = lam + delta * vlam + &r;
            let ax = -gamma * vx - gf - a.tr_mul(&mult);
            let ay = -gamma * vy - gg - b.tr_mul(&mult);
            let alam = -gamma * vlam + &r + delta * (a * vx + b * vy);
            (ax, ay, Vector::from(vlam), Some(alam))
        }
        SystemKind::RescaledAlm(p) => {
            let (gamma, _) = p.gamma.eval(t)?;
            let (beta, _) = p.beta.eval(t)?;
            let (ac, _) = p.a.eval(t)?;
            let vlam = view(s, l.vlam().expect("second-order layout"));
            let mult = lam + ac * vlam + p.mu * &r;
            let ax = -gamma * vx - beta * (gf + a.tr_mul(&mult));
            let ay = -gamma * vy - beta * (gg + b.tr_mul(&mult));
            let alam = -gamma * vlam + beta * (&r + ac * (a * vx + b * vy));
            (ax, ay, Vector::from(vlam), Some(alam))
        }
    };

    out[l.x()].copy_from_slice(&s[l.vx()]);
    out[l.y()].copy_from_slice(&s[l.vy()]);
    out[l.lam()].copy_from_slice(dlam.as_slice());
    out[l.vx()].copy_from_slice(ax.as_slice());
    out[l.vy()].copy_from_slice(ay.as_slice());
    if let (Some(range), Some(al)) = (l.vlam(), alam) {
        out[range].copy_from_slice(al.as_slice());
    }
    Ok(())
}

/// Time derivative of a structured state, returned in the same layout.
pub fn vector_field(
    kind: &SystemKind,
    prob: &SeparableProblem,
    t: f64,
    s: &SystemState,
) -> Result<SystemState> {
    let l = kind.layout(prob);
    if s.layout() != l {
        return Err(Error::input(format!(
            "state layout {:?} does not match system layout {:?}",
            s.layout(),
            l
        )));
    }
    let flat = s.pack();
    let mut out = vec![0.0; flat.len()];
    vector_field_flat(kind, prob, t, &flat, &mut out)?;
    SystemState::unpack(&out, &l)
}

/// Growth and Lipschitz constants from the global existence argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExistenceConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Lipschitz modulus of the right-hand side at time t.
    pub k: f64,
    /// Linear growth modulus of the right-hand side at time t.
    pub s: f64,
}

pub fn existence_constants(
    prob: &SeparableProblem,
    params: &TikhonovParams,
    t: f64,
) -> Result<ExistenceConstants> {
    let (a, b) = (prob.a(), prob.b());
    let na = spectral_norm(a);
    let nb = spectral_norm(b);
    let nat = spectral_norm(&a.transpose());
    let nbt = spectral_norm(&b.transpose());
    let ata = spectral_norm(&a.tr_mul(a));
    let bta = spectral_norm(&b.tr_mul(a));
    let atb = spectral_norm(&a.tr_mul(b));
    let btb = spectral_norm(&b.tr_mul(b));
    let (l1, l2) = (prob.l1(), prob.l2());
    let gamma = params.gamma;
    let c1 = [
        1.0 + gamma,
        nat + nbt,
        na + ata + bta + l1,
        nb + atb + btb + l2,
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    let gf0 = prob.f().gradient(&Vector::zeros(prob.n1())).norm();
    let gg0 = prob.g().gradient(&Vector::zeros(prob.n2())).norm();
    let c2 = (l1 + l2).max(gf0 + gg0 + a.tr_mul(prob.rhs()).norm() + b.tr_mul(prob.rhs()).norm());
    let c3 = [
        1.0 + gamma,
        nat + nbt,
        na + ata + bta,
        nb + btb + atb,
        prob.rhs().norm(),
        c2,
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    let (beta, _) = params.beta.eval(t)?;
    let (eps, _) = params.eps.eval(t)?;
    let shared = params.delta * beta * (na + nb) + 2.0 * beta * eps;
    Ok(ExistenceConstants {
        c1,
        c2,
        c3,
        k: 2.0 * c1 + 3.0 * c1 * beta + shared,
        s: 2.0 * c3 + 5.0 * c3 * beta + shared,
    })
}

/// Simulated trajectory with structured states.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemTrajectory {
    pub layout: Layout,
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub stats: StepStats,
}

impl SystemTrajectory {
    fn from_flat(layout: Layout, tr: integrator::Trajectory) -> Result<Self> {
        let states = tr
            .states
            .iter()
            .map(|s| SystemState::unpack(s, &layout))
            .collect::<Result<Vec<_>>>()?;
        Ok(SystemTrajectory {
            layout,
            times: tr.times,
            states,
            stats: tr.stats,
        })
    }
}

fn check_start(
    kind: &SystemKind,
    prob: &SeparableProblem,
    t0: f64,
    s0: &SystemState,
) -> Result<Layout> {
    kind.validate()?;
    let layout = kind.layout(prob);
    if s0.layout() != layout {
        return Err(Error::input(format!(
            "initial state layout {:?} does not match system layout {:?}",
            s0.layout(),
            layout
        )));
    }
    if t0 < kind.t0() {
        return Err(Error::BeforeStart {
            t: t0,
            t0: kind.t0(),
        });
    }
    Ok(layout)
}

/// Integrates a system with the adaptive solver.
pub fn simulate(
    kind: &SystemKind,
    prob: &SeparableProblem,
    t0: f64,
    t1: f64,
    s0: &SystemState,
    cfg: &IntegratorConfig,
    sampling: &Sampling,
) -> Result<SystemTrajectory> {
    let layout = check_start(kind, prob, t0, s0)?;
    let field = |t: f64, s: &[f64], out: &mut [f64]| vector_field_flat(kind, prob, t, s, out);
    let tr = integrator::integrate(field, t0, t1, &s0.pack(), cfg, sampling)?;
    SystemTrajectory::from_flat(layout, tr)
}

/// Integrates a system with fixed-step RK4 (cross-check route).
pub fn simulate_rk4(
    kind: &SystemKind,
    prob: &SeparableProblem,
    t0: f64,
    t1: f64,
    s0: &SystemState,
    h: f64,
    sampling: &Sampling,
) -> Result<SystemTrajectory> {
    let layout = check_start(kind, prob, t0, s0)?;
    let field = |t: f64, s: &[f64], out: &mut [f64]| vector_field_flat(kind, prob, t, s, out);
    let tr = integrator::integrate_rk4(field, t0, t1, &s0.pack(), h, sampling)?;
    SystemTrajectory::from_flat(layout, tr)
}
