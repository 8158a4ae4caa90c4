//! Transient analysis of the lumped chain by uniformization.

use std::io;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::netio::format_rate;
use crate::statespace::LumpedCtmc;

pub const DEFAULT_EPSILON: f64 = 1e-10;
pub const UNIFORMIZATION_FACTOR: f64 = 1.02;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtmcError {
    #[error("chain has no states")]
    EmptyChain,
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("time points must be finite, nonnegative and nondecreasing")]
    BadTimes,
    #[error("bad time grid {0:?}: expected t0:t1:n[:geom]")]
    BadGrid(String),
}

#[derive(Debug, Clone)]
pub struct TransientResult {
    pub times: Vec<f64>,
    pub distributions: Vec<Vec<f64>>,
}

/// ln P(X = m) for X ~ Poisson(lt), m = floor(lt). Past small m the Stirling
/// form keeps the large terms from cancelling.
fn ln_mode_weight(lt: f64, m: usize) -> f64 {
    if m < 16 {
        return -lt + m as f64 * lt.ln() - ln_gamma(m as f64 + 1.0);
    }
    let m = m as f64;
    let f = lt - m;
    let series = 1.0 / (12.0 * m) - 1.0 / (360.0 * m.powi(3)) + 1.0 / (1260.0 * m.powi(5));
    m * (f / m).ln_1p() - f - 0.5 * (2.0 * std::f64::consts::PI * m).ln() - series
}

/// Poisson(lt) weights on the window `left..left+w.len()`, which holds at least
/// `1 − eps` of the mass. Built outward from the mode, heavier side first, then
/// scaled to sum to one.
pub fn poisson_window(lt: f64, eps: f64) -> (usize, Vec<f64>) {
    if lt == 0.0 {
        return (0, vec![1.0]);
    }
    let mode = lt.floor() as usize;
    let wm = ln_mode_weight(lt, mode).exp();
    let mut left_w: Vec<f64> = Vec::new(); // mode-1, mode-2, ...
    let mut right_w: Vec<f64> = vec![wm]; // mode, mode+1, ...
    let mut total = wm;
    let (mut lo, mut hi) = (mode, mode);
    let (mut wl, mut wr) = (wm, wm);
    while total < 1.0 - eps {
        let next_r = wr * lt / (hi + 1) as f64;
        let next_l = if lo > 0 { wl * lo as f64 / lt } else { 0.0 };
        if next_r == 0.0 && next_l == 0.0 {
            break;
        }
        if lo > 0 && next_l >= next_r {
            lo -= 1;
            wl = next_l;
            left_w.push(wl);
            total += wl;
        } else {
            hi += 1;
            wr = next_r;
            right_w.push(wr);
            total += wr;
        }
    }
    left_w.reverse();
    left_w.extend(right_w);
    left_w.iter_mut().for_each(|w| *w /= total);
    (lo, left_w)
}

fn check(c: &LumpedCtmc, times: &[f64], eps: f64) -> Result<(), CtmcError> {
    if c.is_empty() {
        return Err(CtmcError::EmptyChain);
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CtmcError::BadEpsilon(eps));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(CtmcError::BadTimes);
    }
    Ok(())
}

/// v ← v + vQ/Λ
fn step(c: &LumpedCtmc, v: &[f64], lambda: f64, out: &mut [f64]) {
    out.copy_from_slice(v);
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        let s = vi / lambda;
        for &(j, q) in c.row(i) {
            out[j] += s * q;
        }
        out[i] += s * c.diagonal(i);
    }
}

/// π(t) = π(0)·exp(Qt) for every requested time.
pub fn transient(c: &LumpedCtmc, times: &[f64], eps: f64) -> Result<TransientResult, CtmcError> {
    check(c, times, eps)?;
    let n = c.len();
    let max_exit = (0..n).map(|i| c.diagonal(i).abs()).fold(0.0, f64::max);
    if max_exit == 0.0 {
        return Ok(TransientResult { times: times.to_vec(), distributions: vec![c.initial.clone(); times.len()] });
    }
    let lambda = UNIFORMIZATION_FACTOR * max_exit;
    let windows: Vec<(usize, Vec<f64>)> = times.iter().map(|&t| poisson_window(lambda * t, eps)).collect();
    let last = windows.iter().map(|(l, w)| l + w.len() - 1).max().unwrap_or(0);

    let mut acc = vec![vec![0.0; n]; times.len()];
    let mut v = c.initial.clone();
    let mut next = vec![0.0; n];
    for k in 0..=last {
        for (ti, (left, w)) in windows.iter().enumerate() {
            if k >= *left && k < left + w.len() {
                let wk = w[k - left];
                for (a, x) in acc[ti].iter_mut().zip(&v) {
                    *a += wk * x;
                }
            }
        }
        if k < last {
            step(c, &v, lambda, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
    }
    Ok(TransientResult { times: times.to_vec(), distributions: acc })
}

/// 1 − probability of having been absorbed.
pub fn reliability(c: &LumpedCtmc, times: &[f64], eps: f64) -> Result<Vec<(f64, f64)>, CtmcError> {
    let absorbing = c.absorbing_states();
    let r = transient(c, times, eps)?;
    Ok(r
        .times
        .iter()
        .zip(&r.distributions)
        .map(|(&t, pi)| (t, 1.0 - absorbing.iter().map(|&i| pi[i]).sum::<f64>()))
        .collect())
}

/// Expected firing rate of the edges whose label passes `filter`.
pub fn throughput(
    c: &LumpedCtmc,
    filter: impl Fn(&str) -> bool,
    times: &[f64],
    eps: f64,
) -> Result<Vec<(f64, f64)>, CtmcError> {
    let mut reward = vec![0.0; c.len()];
    for e in &c.edges {
        if filter(&e.label) {
            reward[e.source] += e.rate;
        }
    }
    let r = transient(c, times, eps)?;
    Ok(r
        .times
        .iter()
        .zip(&r.distributions)
        .map(|(&t, pi)| (t, pi.iter().zip(&reward).map(|(p, w)| p * w).sum()))
        .collect())
}

/// `t0:t1:n` (linear) or `t0:t1:n:geom`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
    pub geometric: bool,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { start: 0.0, end: 5000.0, count: 200, geometric: true }
    }
}

impl FromStr for TimeGrid {
    type Err = CtmcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CtmcError::BadGrid(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let geometric = match parts.get(3).map(|p| p.trim()) {
            None | Some("lin") => false,
            Some("geom") => true,
            Some(_) => return Err(bad()),
        };
        if !(start.is_finite() && end.is_finite() && 0.0 <= start && start <= end && count >= 1) {
            return Err(bad());
        }
        Ok(TimeGrid { start, end, count, geometric })
    }
}

impl TimeGrid {
    /// Points from `start` to `end` inclusive. A geometric grid starting at 0
    /// places 0 first and spaces the rest from `end·1e-3` to `end`.
    pub fn points(&self) -> Vec<f64> {
        let n = self.count;
        if n == 1 {
            return vec![self.start];
        }
        if !self.geometric || self.end == 0.0 {
            let h = (self.end - self.start) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| self.start + h * i as f64).collect();
            v[n - 1] = self.end;
            return v;
        }
        let (mut out, lo, m) = if self.start > 0.0 {
            (Vec::with_capacity(n), self.start, n)
        } else {
            (vec![0.0], self.end * 1e-3, n - 1)
        };
        let ratio = self.end / lo;
        for i in 0..m {
            let x = if m == 1 { self.end } else { lo * ratio.powf(i as f64 / (m - 1) as f64) };
            out.push(x);
        }
        *out.last_mut().unwrap() = self.end;
        out
    }
}

/// `t,state_0,state_1,…`
pub fn write_transient_csv<W: io::Write>(r: &TransientResult, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let n = r.distributions.first().map_or(0, |d| d.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("state_{i}")));
    wr.write_record(&header)?;
    for (t, d) in r.times.iter().zip(&r.distributions) {
        let mut row = vec![format_rate(*t)];
        row.extend(d.iter().map(|x| format_rate(*x)));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// `t,value`
pub fn write_measure_csv<W: io::Write>(values: &[(f64, f64)], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "value"])?;
    for (t, v) in values {
        wr.write_record([format_rate(*t), format_rate(*v)])?;
    }
    wr.flush()?;
    Ok(())
}
