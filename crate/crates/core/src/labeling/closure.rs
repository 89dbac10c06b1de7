use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::LabelError;

const EPS: f64 = 1e-9;

/// Gripper aperture over time, normalised to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthSignal {
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub sample_rate: f64,
}

impl WidthSignal {
    pub fn new(t: Vec<f64>, w: Vec<f64>) -> Result<Self, LabelError> {
        if t.len() != w.len() || t.len() < 2 {
            return Err(LabelError::Format("width signal needs matching t and w with at least two samples".into()));
        }
        if t.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(LabelError::Format("width signal timestamps must be strictly increasing".into()));
        }
        if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(LabelError::Format("width samples must lie in [0, 1]".into()));
        }
        let sample_rate = (t.len() - 1) as f64 / (t[t.len() - 1] - t[0]);
        Ok(Self { t, w, sample_rate })
    }

    /// Samples at `rate` Hz starting from `t = 0`.
    pub fn uniform(rate: f64, w: Vec<f64>) -> Result<Self, LabelError> {
        let t = (0..w.len()).map(|i| i as f64 / rate).collect();
        Self::new(t, w)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosureParams {
    /// Trailing window for the drop (s).
    pub window: f64,
    pub min_drop: f64,
    /// Required flat stretch after the drop (s).
    pub min_plateau: f64,
    pub plateau_tol: f64,
}

impl Default for ClosureParams {
    fn default() -> Self {
        Self { window: 0.5, min_drop: 0.3, min_plateau: 1.0, plateau_tol: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureEvent {
    pub t_star: f64,
    pub index: usize,
    pub drop_magnitude: f64,
    /// Longest stretch from `t_star` whose peak-to-peak stays within tolerance (s).
    pub plateau_len: f64,
}

/// First index whose trailing-window drop reaches `min_drop` and whose next
/// `min_plateau` seconds stay within `plateau_tol` peak-to-peak.
pub fn detect_closure(sig: &WidthSignal, params: &ClosureParams) -> Result<ClosureEvent, LabelError> {
    let mut det = ClosureDetector::new(*params);
    for (&t, &w) in sig.t.iter().zip(&sig.w) {
        if let Some(ev) = det.push(t, w) {
            return Ok(det.finalize(ev, sig));
        }
    }
    match det.finish() {
        Some(ev) => Ok(det.finalize(ev, sig)),
        None => Err(LabelError::NoClosureFound),
    }
}

/// Every closure in order. After each event the search resumes once the
/// width rises above that event's plateau band again.
pub fn detect_closures(sig: &WidthSignal, params: &ClosureParams) -> Vec<ClosureEvent> {
    let mut out = Vec::new();
    let mut start = 0;
    while sig.len() - start >= 2 {
        let sub = WidthSignal { t: sig.t[start..].to_vec(), w: sig.w[start..].to_vec(), sample_rate: sig.sample_rate };
        let Ok(mut ev) = detect_closure(&sub, params) else { break };
        ev.index += start;
        let level = sig.w[ev.index];
        out.push(ev);
        match (ev.index + 1..sig.len()).find(|&j| sig.w[j] > level + params.plateau_tol + EPS) {
            Some(j) => start = j,
            None => break,
        }
    }
    out
}

/// Online form of [`detect_closure`]. Samples are pushed in time order; an
/// event is reported once its plateau interval is fully observed.
#[derive(Debug, Clone)]
pub struct ClosureDetector {
    params: ClosureParams,
    t: Vec<f64>,
    w: Vec<f64>,
    /// Indices whose values are decreasing; front is the window maximum.
    window_max: VecDeque<usize>,
    /// Indices that passed the drop test and await their plateau.
    candidates: VecDeque<(usize, f64)>,
    lo: f64,
    hi: f64,
    done: bool,
}

impl ClosureDetector {
    pub fn new(params: ClosureParams) -> Self {
        Self {
            params,
            t: Vec::new(),
            w: Vec::new(),
            window_max: VecDeque::new(),
            candidates: VecDeque::new(),
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
            done: false,
        }
    }

    pub fn push(&mut self, t: f64, w: f64) -> Option<(usize, f64)> {
        if self.done {
            return None;
        }
        let i = self.t.len();
        // Samples past the front candidate's plateau end settle it.
        let settled = self.settle(t);
        if settled.is_some() {
            self.done = true;
            return settled;
        }
        self.t.push(t);
        self.w.push(w);

        while self.window_max.back().is_some_and(|&j| self.w[j] <= w) {
            self.window_max.pop_back();
        }
        self.window_max.push_back(i);
        while self.window_max.front().is_some_and(|&j| self.t[j] < t - self.params.window - EPS) {
            self.window_max.pop_front();
        }
        let drop = self.w[self.window_max[0]] - w;
        if drop >= self.params.min_drop - EPS {
            if self.candidates.is_empty() {
                self.lo = w;
                self.hi = w;
            }
            self.candidates.push_back((i, drop));
        }
        if let Some(&(c, _)) = self.candidates.front() {
            if c != i {
                self.lo = self.lo.min(w);
                self.hi = self.hi.max(w);
            }
        }
        self.prune();
        None
    }

    /// Reports a candidate whose plateau ends exactly at the last sample.
    pub fn finish(&mut self) -> Option<(usize, f64)> {
        if self.done {
            return None;
        }
        self.done = true;
        let last = *self.t.last()?;
        let &(c, drop) = self.candidates.front()?;
        (self.t[c] + self.params.min_plateau <= last + EPS).then_some((c, drop))
    }

    fn settle(&mut self, t_next: f64) -> Option<(usize, f64)> {
        let &(c, drop) = self.candidates.front()?;
        (t_next > self.t[c] + self.params.min_plateau + EPS).then_some((c, drop))
    }

    /// Drops leading candidates whose plateau has already broken.
    fn prune(&mut self) {
        while !self.candidates.is_empty() {
            if self.hi - self.lo <= self.params.plateau_tol + EPS {
                return;
            }
            self.candidates.pop_front();
            let Some(&(next, _)) = self.candidates.front() else { return };
            self.lo = f64::INFINITY;
            self.hi = f64::NEG_INFINITY;
            let end = self.t[next] + self.params.min_plateau + EPS;
            for j in next..self.t.len() {
                if self.t[j] > end {
                    break;
                }
                self.lo = self.lo.min(self.w[j]);
                self.hi = self.hi.max(self.w[j]);
            }
        }
    }

    fn finalize(&self, (index, drop): (usize, f64), sig: &WidthSignal) -> ClosureEvent {
        let t0 = sig.t[index];
        let (mut lo, mut hi) = (sig.w[index], sig.w[index]);
        let mut plateau_len = 0.0;
        for j in index..sig.len() {
            lo = lo.min(sig.w[j]);
            hi = hi.max(sig.w[j]);
            if hi - lo > self.params.plateau_tol + EPS {
                break;
            }
            plateau_len = sig.t[j] - t0;
        }
        ClosureEvent { t_star: t0, index, drop_magnitude: drop, plateau_len }
    }
}
