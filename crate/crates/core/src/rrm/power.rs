//! Power control on one subchannel by successive convex approximation.
//!
//! Each weighted rate is `w * (log2(S + I + N) - log2(I + N))`, a difference
//! of two concave functions of the power vector. Replacing the subtracted
//! term by its tangent gives a concave minorant that touches the objective at
//! the current iterate; maximizing it can only raise the objective.

use std::f64::consts::LN_2;

use super::ChannelGains;

/// Lower bound on powers as a fraction of `p_max`, keeping every link on.
pub const MIN_POWER_FRACTION: f64 = 1e-3;

const INNER_STEP: f64 = 0.1;
const INNER_TOL: f64 = 1e-6;
const INNER_MAX_ITERS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    /// Powers in mW, aligned with the `members` argument.
    pub powers_mw: Vec<f64>,
    /// Objective value at the initial point and after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

struct Subproblem<'a> {
    members: &'a [usize],
    gains: &'a ChannelGains,
    weights: Vec<f64>,
    channel: usize,
    p_max: f64,
}

impl Subproblem<'_> {
    fn gain(&self, a: usize, b: usize) -> f64 {
        self.gains.cross[self.members[a]][self.members[b]]
    }

    fn floor(&self, a: usize) -> f64 {
        self.gains.floor[self.members[a]][self.channel]
    }

    /// Interference-plus-noise at receiver `a`; powers are normalized by `p_max`.
    fn denominator(&self, x: &[f64], a: usize) -> f64 {
        let mut d = self.floor(a);
        for b in 0..x.len() {
            if b != a {
                d += self.gain(a, b) * x[b] * self.p_max;
            }
        }
        d
    }

    fn objective(&self, x: &[f64]) -> f64 {
        (0..x.len())
            .map(|a| {
                let d = self.denominator(x, a);
                let s = self.gain(a, a) * x[a] * self.p_max;
                self.weights[a] * (s / d).ln_1p() / LN_2
            })
            .sum()
    }

    /// Gradient of the subtracted concave term, w.r.t. normalized powers.
    fn tangent(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut c = vec![0.0; n];
        for a in 0..n {
            let d = self.denominator(x, a);
            for (b, cb) in c.iter_mut().enumerate() {
                if b != a {
                    *cb += self.weights[a] * self.gain(a, b) * self.p_max / (d * LN_2);
                }
            }
        }
        c
    }

    fn total_received(&self, x: &[f64], a: usize) -> f64 {
        self.denominator(x, a) + self.gain(a, a) * x[a] * self.p_max
    }

    fn surrogate(&self, x: &[f64], tangent: &[f64]) -> f64 {
        let concave: f64 = (0..x.len())
            .map(|a| self.weights[a] * self.total_received(x, a).log2())
            .sum();
        concave - tangent.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>()
    }

    fn surrogate_grad(&self, x: &[f64], tangent: &[f64]) -> Vec<f64> {
        let n = x.len();
        let slope: Vec<f64> = (0..n)
            .map(|a| self.weights[a] * self.p_max / (self.total_received(x, a) * LN_2))
            .collect();
        // Own term first, so relabelling links permutes the result exactly.
        (0..n)
            .map(|b| {
                let mut g = slope[b] * self.gain(b, b) - tangent[b];
                for a in (0..n).filter(|&a| a != b) {
                    g += slope[a] * self.gain(a, b);
                }
                g
            })
            .collect()
    }

    /// Projected gradient ascent on the concave surrogate with backtracking.
    fn maximize_surrogate(&self, start: &[f64], tangent: &[f64]) -> Vec<f64> {
        let mut x = start.to_vec();
        let mut value = self.surrogate(&x, tangent);
        for _ in 0..INNER_MAX_ITERS {
            let grad = self.surrogate_grad(&x, tangent);
            let mut step = INNER_STEP;
            let mut moved = false;
            while step > 1e-12 {
                let cand: Vec<f64> = x
                    .iter()
                    .zip(&grad)
                    .map(|(xi, gi)| (xi + step * gi).clamp(MIN_POWER_FRACTION, 1.0))
                    .collect();
                let v = self.surrogate(&cand, tangent);
                if v > value {
                    let shift = cand.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    x = cand;
                    value = v;
                    moved = shift >= INNER_TOL;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        x
    }
}

/// Maximizes `sum_i w_i log2(1 + SINR_i)` over powers in
/// `[MIN_POWER_FRACTION * p_max, p_max]` for the links in `members`, all on
/// subchannel `channel`. Weights are renormalized to mean one, so scaling
/// them leaves the result unchanged.
pub fn power_control_subchannel(
    members: &[usize],
    channel: usize,
    gains: &ChannelGains,
    weights: &[f64],
    p_max_mw: f64,
    tol: f64,
    max_iters: usize,
) -> PowerOutcome {
    assert!(!members.is_empty(), "power control needs at least one link");
    if members.len() == 1 {
        // The rate is increasing in power.
        return PowerOutcome {
            powers_mw: vec![p_max_mw],
            objective_trace: Vec::new(),
            converged: true,
        };
    }
    let raw: Vec<f64> = members.iter().map(|&i| weights[i]).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let weights = if mean > 0.0 {
        raw.iter().map(|w| w / mean).collect()
    } else {
        vec![1.0; raw.len()]
    };
    let sub = Subproblem {
        members,
        gains,
        weights,
        channel,
        p_max: p_max_mw,
    };

    let mut x = vec![0.5; members.len()];
    let mut f = sub.objective(&x);
    let mut trace = vec![f];
    let mut converged = false;
    for _ in 0..max_iters {
        let tangent = sub.tangent(&x);
        let next = sub.maximize_surrogate(&x, &tangent);
        let f_next = sub.objective(&next);
        // The minorization guarantees f_next >= f up to rounding.
        if f_next < f {
            converged = true;
            break;
        }
        let gain = f_next - f;
        x = next;
        f = f_next;
        trace.push(f);
        if gain <= tol * f.abs().max(1e-12) {
            converged = true;
            break;
        }
    }
    PowerOutcome {
        powers_mw: x.iter().map(|xi| xi * p_max_mw).collect(),
        objective_trace: trace,
        converged,
    }
}
