//! Dormand-Prince 5(4) with PI step-size control and dense output.

use serde::{Deserialize, Serialize};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
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

// Fifth-order weights equal the last row of A (FSAL).
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// Continuous extension (Hairer's contd5).
const DENSE: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            atol: 1e-12,
            rtol: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            atol: self.atol * factor,
            rtol: self.rtol * factor,
        }
    }
}

/// Where the solution is recorded.
#[derive(Clone, Debug, PartialEq)]
pub enum Sampling {
    /// Initial state and every accepted step.
    Steps,
    /// Accepted steps, subdivided with the dense output so that consecutive
    /// samples are at most `max_gap` apart in the Euclidean norm.
    Refined { max_gap: f64 },
    /// Dense output at the given increasing times (the final state is also
    /// recorded when the run stops before or after the last one).
    Times(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TEnd,
    Converged,
    BlowupGuard,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub tolerances: Tolerances,
    pub h_max: f64,
    pub max_steps: usize,
    /// Project components in `(-atol, 0)` to zero; reject steps that leave
    /// the cone by more than that.
    pub nonnegative: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
            nonnegative: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub termination: Termination,
    pub accepted: usize,
    pub rejected: usize,
}

impl<const N: usize> Solution<N> {
    pub fn last(&self) -> Option<(f64, [f64; N])> {
        Some((*self.times.last()?, *self.states.last()?))
    }
}

/// One accepted step, exposing the dense output to stop predicates.
pub struct Step<'a, const N: usize> {
    pub t: f64,
    pub y: &'a [f64; N],
    pub dydt: &'a [f64; N],
}

/// `y + h * sum_j coefs[j] * k[j]`.
#[inline]
fn combine<const N: usize>(y: &[f64; N], h: f64, coefs: &[f64], k: &[[f64; N]; 7]) -> [f64; N] {
    let mut out = *y;
    for (coef, kj) in coefs.iter().zip(k) {
        if *coef != 0.0 {
            for i in 0..N {
                out[i] += h * coef * kj[i];
            }
        }
    }
    out
}

struct Dense<const N: usize> {
    t0: f64,
    h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> Dense<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let s = if self.h == 0.0 {
            1.0
        } else {
            (t - self.t0) / self.h
        };
        let s1 = 1.0 - s;
        let c = &self.cont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        out
    }
}

fn error_norm<const N: usize>(
    y0: &[f64; N],
    y1: &[f64; N],
    err: &[f64; N],
    tol: &Tolerances,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sk = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sk).powi(2);
    }
    (acc / N as f64).sqrt()
}

/// Integrates `y' = field(t, y)` from `t0` to `t_end` (which may be smaller
/// than `t0` for reversed time).
///
/// After every accepted step `stop` is consulted; returning `true` ends the
/// run with [`Termination::Converged`]. Step-size underflow or a non-finite
/// state ends it with [`Termination::BlowupGuard`].
pub fn integrate<const N: usize, F, S>(
    field: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    options: &Options,
    sampling: &Sampling,
    mut stop: S,
) -> Solution<N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    S: FnMut(&Step<'_, N>) -> bool,
{
    let tol = options.tolerances;
    let direction = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();

    let mut sol = Solution {
        times: Vec::new(),
        states: Vec::new(),
        termination: Termination::TEnd,
        accepted: 0,
        rejected: 0,
    };
    let mut sample_times: &[f64] = match sampling {
        Sampling::Times(ts) => ts.as_slice(),
        _ => &[],
    };
    let record_steps = !matches!(sampling, Sampling::Times(_));

    let mut emit_due =
        |sol: &mut Solution<N>, upto: f64, dense: Option<&Dense<N>>, y_at: &[f64; N]| {
            while let Some((&ts, rest)) = sample_times.split_first() {
                if (ts - upto) * direction > 0.0 {
                    break;
                }
                let y = match dense {
                    Some(d) => d.eval(ts),
                    None => *y_at,
                };
                sol.times.push(ts);
                sol.states.push(y);
                sample_times = rest;
            }
        };

    let mut t = t0;
    let mut y = y0;
    if record_steps {
        sol.times.push(t);
        sol.states.push(y);
    } else {
        emit_due(&mut sol, t0, None, &y0);
    }
    if span == 0.0 {
        return sol;
    }

    let mut k = [[0.0; N]; 7];
    k[0] = field(t, &y);

    // Initial step guess (Hairer, Norsett, Wanner II.4).
    let mut h = {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sk = tol.atol + tol.rtol * y[i].abs();
            d0 += (y[i] / sk).powi(2);
            d1 += (k[0][i] / sk).powi(2);
        }
        d0 = (d0 / N as f64).sqrt();
        d1 = (d1 / N as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let y1: [f64; N] = std::array::from_fn(|i| y[i] + direction * h0 * k[0][i]);
        let f1 = field(t + direction * h0, &y1);
        let mut d2 = 0.0;
        for i in 0..N {
            let sk = tol.atol + tol.rtol * y[i].abs();
            d2 += ((f1[i] - k[0][i]) / sk).powi(2);
        }
        d2 = (d2 / N as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span).min(options.h_max)
    };

    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let expo = 0.2 - BETA * 0.75;

    loop {
        if sol.accepted + sol.rejected >= options.max_steps {
            sol.termination = Termination::BlowupGuard;
            break;
        }
        let remaining = (t_end - t) * direction;
        if remaining <= 0.0 {
            break;
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            sol.termination = Termination::BlowupGuard;
            break;
        }
        let hs = direction * h;

        for stage in 1..7 {
            let ys = combine(&y, hs, &A[stage][..stage], &k);
            k[stage] = field(t + C[stage] * hs, &ys);
        }
        let mut y_new = combine(&y, hs, &B, &k);
        // k[6] was evaluated at the fifth-order solution (FSAL).
        let mut err = [0.0; N];
        for i in 0..N {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            err[i] = hs * e;
        }
        let mut err_norm = error_norm(&y, &y_new, &err, &tol);

        let finite = y_new.iter().all(|v| v.is_finite()) && err_norm.is_finite();
        if !finite {
            err_norm = f64::INFINITY;
        }
        let mut projected = false;
        if options.nonnegative && err_norm <= 1.0 {
            for v in y_new.iter_mut() {
                if *v < 0.0 {
                    if *v > -tol.atol {
                        *v = 0.0;
                        projected = true;
                    } else {
                        // Leaving the cone by more than atol: retry smaller.
                        err_norm = f64::INFINITY;
                    }
                }
            }
        }

        let fac11 = if err_norm.is_finite() {
            err_norm.powf(expo)
        } else {
            f64::INFINITY
        };
        if err_norm <= 1.0 {
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            fac_old = err_norm.max(1e-4);

            let k_new = if projected {
                field(t + hs, &y_new)
            } else {
                k[6]
            };
            let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
            let bspl: [f64; N] = std::array::from_fn(|i| hs * k[0][i] - ydiff[i]);
            let c3: [f64; N] = std::array::from_fn(|i| ydiff[i] - hs * k_new[i] - bspl[i]);
            let c4: [f64; N] = std::array::from_fn(|i| {
                let mut s = 0.0;
                for j in 0..7 {
                    s += DENSE[j] * k[j][i];
                }
                hs * s
            });
            let dense = Dense {
                t0: t,
                h: hs,
                cont: [y, ydiff, bspl, c3, c4],
            };

            let t_new = if last { t_end } else { t + hs };
            match sampling {
                Sampling::Steps => {
                    sol.times.push(t_new);
                    sol.states.push(y_new);
                }
                Sampling::Refined { max_gap } => {
                    let dist = ydiff.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let pieces = ((dist / max_gap).ceil() as usize).clamp(1, 10_000);
                    for p in 1..pieces {
                        let ts = t + hs * p as f64 / pieces as f64;
                        sol.times.push(ts);
                        sol.states.push(dense.eval(ts));
                    }
                    sol.times.push(t_new);
                    sol.states.push(y_new);
                }
                Sampling::Times(_) => emit_due(&mut sol, t_new, Some(&dense), &y_new),
            }

            t = t_new;
            y = y_new;
            k[0] = k_new;
            sol.accepted += 1;

            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new.min(options.h_max);

            let converged = stop(&Step {
                t,
                y: &y,
                dydt: &k[0],
            });
            if converged {
                sol.termination = Termination::Converged;
                break;
            }
            if last {
                break;
            }
        } else {
            sol.rejected += 1;
            last_rejected = true;
            let shrink = if fac11.is_finite() {
                (fac11 / SAFETY).min(1.0 / FAC_MIN)
            } else {
                10.0
            };
            h /= shrink;
        }
    }

    if matches!(sampling, Sampling::Times(_)) && sol.times.last().is_none_or(|&tl| tl != t) {
        sol.times.push(t);
        sol.states.push(y);
    }
    sol
}
