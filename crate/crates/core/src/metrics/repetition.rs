//! Windowed word-frequency entropy (`H_rep`), repetition-loop detection and
//! trajectory extraction for repeated tokens.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::Sample;
use crate::dist::TokenId;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_WINDOW: usize = 200;
pub const DEFAULT_LOOP_THRESHOLD: f64 = 2.0;
pub const DEFAULT_MIN_COUNT: usize = 30;

fn f_ln_f(c: usize) -> f64 {
    if c <= 1 {
        0.0
    } else {
        let c = c as f64;
        c * c.ln()
    }
}

/// Token counts of a window with `sum f ln f` kept incrementally.
#[derive(Debug, Default)]
struct WindowCounts {
    counts: HashMap<TokenId, usize>,
    total: usize,
    sum_f_ln_f: f64,
}

impl WindowCounts {
    fn add(&mut self, t: TokenId) {
        let c = self.counts.entry(t).or_insert(0);
        self.sum_f_ln_f += f_ln_f(*c + 1) - f_ln_f(*c);
        *c += 1;
        self.total += 1;
    }

    fn remove(&mut self, t: TokenId) {
        let c = self.counts.get_mut(&t).expect("removing a token that was never added");
        self.sum_f_ln_f += f_ln_f(*c - 1) - f_ln_f(*c);
        *c -= 1;
        if *c == 0 {
            self.counts.remove(&t);
        }
        self.total -= 1;
    }

    /// `-sum p ln p` with `p = f / total`, written as `ln N - (1/N) sum f ln f`.
    fn entropy(&self) -> f64 {
        if self.counts.len() <= 1 {
            return 0.0;
        }
        let n = self.total as f64;
        (n.ln() - self.sum_f_ln_f / n).max(0.0)
    }
}

/// Entropy (nats) of the token-frequency distribution of `window`. Empty windows score 0.
pub fn h_rep(window: &[TokenId]) -> f64 {
    let mut w = WindowCounts::default();
    window.iter().for_each(|&t| w.add(t));
    w.entropy()
}

/// `H_rep` of every stride-1 window of length `window_len`; a sample shorter
/// than the window is scored as one window.
pub fn window_entropies(tokens: &[TokenId], window_len: usize) -> Result<Vec<f64>> {
    if window_len == 0 {
        return Err(invalid("window", "must be >= 1"));
    }
    if tokens.is_empty() {
        return Err(Error::EmptyInput("sample"));
    }
    let width = window_len.min(tokens.len());
    let mut w = WindowCounts::default();
    tokens[..width].iter().for_each(|&t| w.add(t));
    let mut out = Vec::with_capacity(tokens.len() - width + 1);
    out.push(w.entropy());
    for i in width..tokens.len() {
        w.add(tokens[i]);
        w.remove(tokens[i - width]);
        out.push(w.entropy());
    }
    Ok(out)
}

/// Mean `H_rep` over all sliding windows of the sample.
pub fn sample_h_rep(tokens: &[TokenId], window_len: usize) -> Result<f64> {
    let hs = window_entropies(tokens, window_len)?;
    Ok(hs.iter().sum::<f64>() / hs.len() as f64)
}

/// Token span `[start, end)` covered by a run of low-entropy windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopSpan {
    pub sample: usize,
    pub start: usize,
    pub end: usize,
}

/// Spans covered by maximal runs of windows whose `H_rep` is below `threshold`.
pub fn detect_loops(tokens: &[TokenId], window_len: usize, threshold: f64) -> Result<Vec<(usize, usize)>> {
    let hs = window_entropies(tokens, window_len)?;
    let width = window_len.min(tokens.len());
    let mut spans = Vec::new();
    let mut run_start = None;
    for (i, &h) in hs.iter().chain(std::iter::once(&f64::INFINITY)).enumerate() {
        match (h < threshold, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i - 1 + width));
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(spans)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// 1-based appearance count of the token within the sample.
    pub appearance: usize,
    /// Position of the token in the sample.
    pub position: usize,
    pub probability: f64,
    /// 1-based rank in the step distribution.
    pub rank: usize,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample: usize,
    pub word: TokenId,
    pub points: Vec<TrajectoryPoint>,
}

/// Traces every token that appears more than `min_count` times inside some
/// loop window, from its first appearance to the end of the last loop span.
pub fn extract_trajectories(samples: &[Sample], window_len: usize, min_count: usize) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for (s, sample) in samples.iter().enumerate() {
        let dists = sample.step_distributions.as_ref().ok_or(Error::MissingDistributions(s))?;
        sample.validate(s)?;
        let tokens = &sample.tokens;
        let spans = detect_loops(tokens, window_len, DEFAULT_LOOP_THRESHOLD)?;
        let Some(last_end) = spans.last().map(|sp| sp.1) else { continue };

        let width = window_len.min(tokens.len());
        let hs = window_entropies(tokens, window_len)?;
        let mut repeated = BTreeSet::new();
        let mut w = WindowCounts::default();
        tokens[..width].iter().for_each(|&t| w.add(t));
        for (i, &h) in hs.iter().enumerate() {
            if i > 0 {
                w.add(tokens[i + width - 1]);
                w.remove(tokens[i - 1]);
            }
            if h < DEFAULT_LOOP_THRESHOLD {
                repeated.extend(w.counts.iter().filter(|(_, &c)| c > min_count).map(|(&t, _)| t));
            }
        }

        for word in repeated {
            let mut points = Vec::new();
            for (pos, &t) in tokens[..last_end].iter().enumerate() {
                if t != word {
                    continue;
                }
                let d = &dists[pos];
                points.push(TrajectoryPoint {
                    appearance: points.len() + 1,
                    position: pos,
                    probability: d.prob_of(t).unwrap_or(0.0),
                    rank: d.rank_of(t).unwrap_or(d.len() + 1),
                    entropy: d.entropy(),
                });
            }
            out.push(Trajectory { sample: s, word, points });
        }
    }
    Ok(out)
}
