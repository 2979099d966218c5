//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the filter or the dynamic program.

#![allow(dead_code)]

use wavefront::geometry::Point;

fn log_gauss(x: f64, v: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + x * x / v)
}

/// A tiny world described by plain numbers.
#[derive(Debug, Clone)]
pub struct Tiny {
    pub origins: Vec<Point>,
    pub unit: f64,
    pub r_max: u32,
    pub rho: f64,
    pub rho1: f64,
    pub p_inf: f64,
    pub sigma2: f64,
    pub gamma2: f64,
    /// Path-loss exponent with distances floored at 1; `None` for the flat model.
    pub theta: Option<f64>,
}

/// Readings of one slot.
#[derive(Debug, Clone)]
pub struct Frame {
    pub sensors: Vec<Point>,
    pub readings: Vec<f64>,
}

impl Tiny {
    fn alt_var(&self, d: f64) -> f64 {
        match self.theta {
            None => self.sigma2 + self.gamma2,
            Some(th) => self.sigma2 + self.gamma2 / d.max(1.0).powf(th),
        }
    }

    fn frame_loglik(&self, f: &Frame, origin: Point, r: u32) -> f64 {
        f.sensors
            .iter()
            .zip(&f.readings)
            .map(|(a, &x)| {
                let d = ((a.x - origin.x).powi(2) + (a.y - origin.y).powi(2)).sqrt();
                if d < r as f64 * self.unit {
                    log_gauss(x, self.alt_var(d))
                } else {
                    log_gauss(x, self.sigma2)
                }
            })
            .sum()
    }

    /// Posterior over `(m, r)` after `frames` (slots 1..=n), flattened as
    /// `m * (r_max + 1) + r`, by summing over every change slot and every
    /// growth path.
    pub fn enumerate_posterior(&self, frames: &[Frame]) -> Vec<f64> {
        let n = frames.len();
        let w = self.r_max as usize + 1;
        let mm = self.origins.len();
        let mut out = vec![0.0; mm * w];
        let mut logs: Vec<(usize, f64)> = Vec::new();
        for (m, &o) in self.origins.iter().enumerate() {
            let quiet: f64 = frames.iter().map(|f| self.frame_loglik(f, o, 0)).sum();
            let mut p_before = 0.0;
            for k in 0..=n {
                p_before += (1.0 - self.p_inf) * self.rho * (1.0 - self.rho).powi(k as i32);
            }
            logs.push((m * w, (1.0 - p_before).ln() + quiet));
            for k in 0..=n {
                let pk = (1.0 - self.p_inf) * self.rho * (1.0 - self.rho).powi(k as i32);
                // Frames before slot k see radius 0.
                let pre: f64 = frames[..k.saturating_sub(1)]
                    .iter()
                    .map(|f| self.frame_loglik(f, o, 0))
                    .sum();
                self.grow(frames, o, m, k, 1.min(self.r_max), pk.ln() + pre, &mut logs);
            }
        }
        let top = logs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        for (s, l) in logs {
            out[s] += (l - top).exp();
        }
        let z: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= z);
        out
    }

    /// Radius `r` at slot `slot`; adds this slot's frame (if any) and recurses.
    #[allow(clippy::too_many_arguments)]
    fn grow(
        &self,
        frames: &[Frame],
        o: Point,
        m: usize,
        slot: usize,
        r: u32,
        acc: f64,
        logs: &mut Vec<(usize, f64)>,
    ) {
        let acc = if slot >= 1 {
            acc + self.frame_loglik(&frames[slot - 1], o, r)
        } else {
            acc
        };
        if slot == frames.len() {
            logs.push((m * (self.r_max as usize + 1) + r as usize, acc));
            return;
        }
        if r == self.r_max {
            self.grow(frames, o, m, slot + 1, r, acc, logs);
        } else {
            if self.rho1 < 1.0 {
                self.grow(
                    frames,
                    o,
                    m,
                    slot + 1,
                    r,
                    acc + (1.0 - self.rho1).ln(),
                    logs,
                );
            }
            self.grow(frames, o, m, slot + 1, r + 1, acc + self.rho1.ln(), logs);
        }
    }
}

/// Shiryaev-style posterior that the change has happened, for a detector
/// that sees every sensor exposed from the change slot on: a direct sum over
/// change slots `k = 0..=n` of prior times likelihood ratio products.
pub fn shiryaev_change_posterior(rho: f64, p_inf: f64, llr_per_slot: &[f64]) -> f64 {
    let n = llr_per_slot.len();
    let mut terms = Vec::with_capacity(n + 2);
    let mut before = 0.0;
    for k in 0..=n {
        let pk = (1.0 - p_inf) * rho * (1.0 - rho).powi(k as i32);
        before += pk;
        // Slots max(k,1)..=n carry the alternative.
        let start = k.max(1);
        let l: f64 = llr_per_slot[start - 1..].iter().sum();
        terms.push(pk.ln() + l);
    }
    let none = (1.0 - before).ln();
    let top = terms.iter().copied().fold(none, f64::max);
    let changed: f64 = terms.iter().map(|t| (t - top).exp()).sum();
    changed / (changed + (none - top).exp())
}

/// One-origin, two-radius instance with binary symbols, solved exactly by
/// expanding the observation tree.
#[derive(Debug, Clone)]
pub struct BinaryTree {
    pub rho: f64,
    pub cost: f64,
    pub horizon: usize,
    /// `P(symbol = 1)` per sensor when unexposed and when exposed.
    pub p_null: f64,
    pub p_alt: f64,
    /// Whether each sensor is exposed at radius 1.
    pub exposed: Vec<bool>,
}

impl BinaryTree {
    /// `J_n(p)` where `p = P(r = 0)`.
    pub fn value(&self, n: usize, p0: f64) -> f64 {
        if n >= self.horizon {
            return p0;
        }
        // Prediction to slot n + 1.
        let q0 = p0 * (1.0 - self.rho);
        let q1 = 1.0 - q0;
        let l = self.exposed.len();
        let mut cont = 0.0;
        for code in 0..(1usize << l) {
            let mut l0 = 1.0;
            let mut l1 = 1.0;
            for (a, &exp) in self.exposed.iter().enumerate() {
                let y = code >> a & 1 == 1;
                let pick = |p: f64| if y { p } else { 1.0 - p };
                l0 *= pick(self.p_null);
                l1 *= pick(if exp { self.p_alt } else { self.p_null });
            }
            let mass = q0 * l0 + q1 * l1;
            if mass > 0.0 {
                cont += mass * self.value(n + 1, q0 * l0 / mass);
            }
        }
        p0.min(self.cost * (1.0 - p0) + cont)
    }
}

/// Mean and standard error of paired differences `a[i] - b[i]`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
