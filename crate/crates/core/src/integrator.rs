//! Dormand–Prince 5(4) with PI step control and dense output, plus a
//! fixed-step classical RK4 used for cross-checks.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    /// Defaults to a tenth of the horizon.
    pub h_max: Option<f64>,
    pub max_steps: usize,
    pub safety: f64,
    /// Record every accepted step as well as the samples.
    pub keep_steps: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: 1e-3,
            h_max: None,
            max_steps: 5_000_000,
            safety: 0.9,
            keep_steps: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self, t0: f64, t1: f64) -> Result<()> {
        let h_max = self.h_max.unwrap_or((t1 - t0) / 10.0);
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::input("rtol and atol must be positive"));
        }
        if !(self.h_init > 0.0 && self.h_init <= h_max) {
            return Err(Error::input(format!(
                "need 0 < h_init <= h_max, got {} and {h_max}",
                self.h_init
            )));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::input("safety factor must lie in (0, 1]"));
        }
        if self.max_steps == 0 {
            return Err(Error::input("max_steps must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Sampling {
    LogSpaced(usize),
    Linear(usize),
    /// Sample instants; `t0` and `T` are added when missing.
    Explicit(Vec<f64>),
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::LogSpaced(200)
    }
}

impl Sampling {
    pub fn times(&self, t0: f64, t1: f64) -> Result<Vec<f64>> {
        let mut ts = match self {
            Sampling::LogSpaced(n) | Sampling::Linear(n) if *n < 2 => {
                return Err(Error::input("need at least two samples"));
            }
            Sampling::LogSpaced(n) => {
                if !(t0 > 0.0) {
                    return Err(Error::input("log-spaced sampling needs t0 > 0"));
                }
                let ratio = (t1 / t0).ln();
                (0..*n)
                    .map(|i| t0 * (ratio * i as f64 / (*n - 1) as f64).exp())
                    .collect::<Vec<_>>()
            }
            Sampling::Linear(n) => (0..*n)
                .map(|i| t0 + (t1 - t0) * i as f64 / (*n - 1) as f64)
                .collect(),
            Sampling::Explicit(list) => {
                if list
                    .iter()
                    .any(|t| !(t.is_finite() && *t >= t0 && *t <= t1))
                {
                    return Err(Error::input(format!(
                        "explicit sample times must lie in [{t0}, {t1}]"
                    )));
                }
                if list.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::input(
                        "explicit sample times must be strictly increasing",
                    ));
                }
                let mut v = list.clone();
                if v.first() != Some(&t0) {
                    v.insert(0, t0);
                }
                if v.last() != Some(&t1) {
                    v.push(t1);
                }
                v
            }
        };
        ts[0] = t0;
        let last = ts.len() - 1;
        ts[last] = t1;
        Ok(ts)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub final_step: f64,
    pub rhs_evals: usize,
}

/// Sampled solution of a flat ODE.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: StepStats,
    /// Accepted step nodes `(t, y)`, when requested.
    pub steps: Option<Vec<(f64, Vec<f64>)>>,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const PI_BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - PI_BETA * 0.75;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

fn check_finite(v: &[f64], t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::PoisonedState { t })
    }
}

fn check_inputs(t0: f64, t1: f64, y0: &[f64]) -> Result<()> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::input(format!(
            "need finite t0 < T, got [{t0}, {t1}]"
        )));
    }
    check_finite(y0, t0)
}

/// Dense-output coefficients of one accepted step.
struct DenseStep {
    t: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + th * (self.r[1][i]
                    + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
    }
}

/// Adaptive Dormand–Prince 5(4) integration of `y' = field(t, y)` on `[t0, t1]`.
pub fn integrate<F>(
    mut field: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    cfg: &IntegratorConfig,
    sampling: &Sampling,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    check_inputs(t0, t1, y0)?;
    cfg.validate(t0, t1)?;
    let samples = sampling.times(t0, t1)?;
    let n = y0.len();
    let h_max = cfg.h_max.unwrap_or((t1 - t0) / 10.0);

    let mut times = Vec::with_capacity(samples.len());
    let mut states = Vec::with_capacity(samples.len());
    times.push(t0);
    states.push(y0.to_vec());
    let mut next_sample = 1;
    let mut steps = cfg.keep_steps.then(|| vec![(t0, y0.to_vec())]);

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut y_stage = vec![0.0; n];
    let mut t = t0;
    field(t, &y, &mut k[0])?;
    check_finite(&k[0], t)?;
    let mut stats = StepStats {
        rhs_evals: 1,
        ..Default::default()
    };
    let mut h = cfg.h_init.min(h_max).min(t1 - t0);
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    while t < t1 {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::StepBudget {
                max_steps: cfg.max_steps,
                t,
            });
        }
        if h < 1e-14 * t.abs() {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + 1.01 * h >= t1;
        if last {
            h = t1 - t;
        }

        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            if s == 6 {
                // FSAL: the last stage is the new point itself
                y_new.copy_from_slice(&y_stage);
            }
            field(t + C[s] * h, &y_stage, &mut k[s])?;
            stats.rhs_evals += 1;
            check_finite(&k[s], t + C[s] * h)?;
        }

        let mut sum = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
            let r = h * e / sc;
            sum += r * r;
        }
        let err = if n == 0 { 0.0 } else { (sum / n as f64).sqrt() };
        if !err.is_finite() {
            return Err(Error::PoisonedState { t });
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / fac_old.powf(PI_BETA) / cfg.safety)
                .clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
            let mut h_new = (h / fac).min(h_max);
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = err.max(1e-4);

            let t_new = if last { t1 } else { t + h };
            let needs_dense = next_sample < samples.len() && samples[next_sample] < t_new;
            let dense = needs_dense.then(|| {
                let mut r: [Vec<f64>; 5] = Default::default();
                r[0] = y.clone();
                r[1] = (0..n).map(|i| y_new[i] - y[i]).collect();
                r[2] = (0..n).map(|i| h * k[0][i] - r[1][i]).collect();
                r[3] = (0..n).map(|i| r[1][i] - h * k[6][i] - r[2][i]).collect();
                r[4] = (0..n)
                    .map(|i| h * D.iter().zip(k.iter()).map(|(d, kj)| d * kj[i]).sum::<f64>())
                    .collect();
                DenseStep { t, h, r }
            });
            while next_sample < samples.len() && samples[next_sample] <= t_new {
                let ts = samples[next_sample];
                if ts == t_new {
                    states.push(y_new.clone());
                } else {
                    let mut out = vec![0.0; n];
                    dense
                        .as_ref()
                        .expect("dense step prepared")
                        .eval(ts, &mut out);
                    states.push(out);
                }
                times.push(ts);
                next_sample += 1;
            }

            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            stats.accepted += 1;
            stats.final_step = h;
            if let Some(st) = steps.as_mut() {
                st.push((t, y.clone()));
            }
            h = h_new;
            last_rejected = false;
        } else {
            h /= (fac11 / cfg.safety).min(1.0 / MIN_FACTOR);
            stats.rejected += 1;
            last_rejected = true;
        }
    }

    Ok(Trajectory {
        times,
        states,
        stats,
        steps,
    })
}

fn rk4_step<F>(
    field: &mut F,
    t: f64,
    y: &mut [f64],
    h: f64,
    k: &mut [Vec<f64>; 4],
    tmp: &mut [f64],
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    field(t, y, &mut k[0])?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k[0][i];
    }
    field(t + 0.5 * h, tmp, &mut k[1])?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k[1][i];
    }
    field(t + 0.5 * h, tmp, &mut k[2])?;
    for i in 0..n {
        tmp[i] = y[i] + h * k[2][i];
    }
    field(t + h, tmp, &mut k[3])?;
    for i in 0..n {
        y[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
    check_finite(y, t + h)
}

/// Classical RK4 with step at most `h`; each gap between consecutive samples
/// is split into equal substeps so that every sample is hit exactly.
pub fn integrate_rk4<F>(
    mut field: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    h: f64,
    sampling: &Sampling,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    check_inputs(t0, t1, y0)?;
    if !(h > 0.0) {
        return Err(Error::input("RK4 step must be positive"));
    }
    let samples = sampling.times(t0, t1)?;
    let n = y0.len();
    let mut k: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y = y0.to_vec();
    let mut times = vec![t0];
    let mut states = vec![y.clone()];
    let mut stats = StepStats::default();
    for w in samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        let count = ((b - a) / h).ceil().max(1.0) as usize;
        let hs = (b - a) / count as f64;
        for i in 0..count {
            rk4_step(&mut field, a + i as f64 * hs, &mut y, hs, &mut k, &mut tmp)?;
        }
        stats.accepted += count;
        stats.rhs_evals += 4 * count;
        stats.final_step = hs;
        times.push(b);
        states.push(y.clone());
    }
    Ok(Trajectory {
        times,
        states,
        stats,
        steps: None,
    })
}
