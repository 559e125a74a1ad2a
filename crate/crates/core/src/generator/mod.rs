//! Transition rules of the JSQ/SLQ dynamics and the QBD blocks built from them.
//!
//! Blocks are never written out by hand here: each row is produced by
//! embedding a phase into a representative full state, applying
//! [`route_arrival`] and [`complete_service`], and mapping the successors
//! back to `(level, phase)` coordinates.

pub mod printed;

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::model::{
    ModelParams, Phase, BOUNDARY_PHASES, NUM_BOUNDARY_PHASES, NUM_PHASES, PHASES,
};

pub type Mat12 = SMatrix<f64, NUM_PHASES, NUM_PHASES>;
pub type Mat7 = SMatrix<f64, NUM_BOUNDARY_PHASES, NUM_BOUNDARY_PHASES>;
pub type Mat7x12 = SMatrix<f64, NUM_BOUNDARY_PHASES, NUM_PHASES>;
pub type Mat12x7 = SMatrix<f64, NUM_PHASES, NUM_BOUNDARY_PHASES>;

/// Queue lengths plus the (0-based) attended queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FullState {
    pub l: [u64; 3],
    pub server: usize,
}

/// Successor states with their probabilities.
pub type Outcomes = Vec<(FullState, f64)>;

impl FullState {
    pub fn new(l: [u64; 3], server: usize) -> Self {
        FullState { l, server }
    }

    /// Embeds a phase at level `n` (`n = L1`).
    ///
    /// Returns `None` when the phase would need a negative queue length.
    pub fn from_level_phase(n: u64, phase: Phase) -> Option<Self> {
        let l2 = n as i64 - phase.d2 as i64;
        let l3 = n as i64 - phase.d3 as i64;
        if l2 < 0 || l3 < 0 {
            return None;
        }
        Some(FullState {
            l: [n, l2 as u64, l3 as u64],
            server: phase.server_index(),
        })
    }

    /// `(L1, D)` coordinates; fails if the state lies outside the phase sets.
    pub fn level_phase(&self) -> Result<(u64, Phase)> {
        let outside = || Error::StateOutsidePhaseSet {
            l: self.l,
            server: self.server + 1,
        };
        let d2 = self.l[0] as i64 - self.l[1] as i64;
        let d3 = self.l[0] as i64 - self.l[2] as i64;
        if !(-1..=1).contains(&d2) || !(-1..=1).contains(&d3) || self.server > 2 {
            return Err(outside());
        }
        let phase = Phase::new(self.server as u8 + 1, d2 as i8, d3 as i8);
        let known = if self.l[0] == 0 {
            phase.boundary_index().is_some()
        } else {
            PHASES.contains(&phase)
        };
        if known {
            Ok((self.l[0], phase))
        } else {
            Err(outside())
        }
    }

    /// The server sits at a longest queue (trivially true when empty), and
    /// all pairwise differences are at most one.
    pub fn is_reachable(&self) -> bool {
        let max = *self.l.iter().max().unwrap();
        let min = *self.l.iter().min().unwrap();
        self.server < 3 && max - min <= 1 && (max == 0 || self.l[self.server] == max)
    }
}

/// Relocates the server if a non-attended queue strictly exceeds the attended
/// one. Ties between the two others are split by `q`.
fn relocate(l: [u64; 3], server: usize, params: &ModelParams, weight: f64, out: &mut Outcomes) {
    let others: Vec<usize> = (0..3).filter(|&k| k != server).collect();
    let top = others.iter().map(|&k| l[k]).max().unwrap();
    if top <= l[server] {
        out.push((FullState::new(l, server), weight));
        return;
    }
    let longest: Vec<usize> = others.into_iter().filter(|&k| l[k] == top).collect();
    match longest.as_slice() {
        [k] => out.push((FullState::new(l, *k), weight)),
        [i, j] => {
            out.push((FullState::new(l, *i), weight * params.q_ratio(*i, *j)));
            out.push((FullState::new(l, *j), weight * params.q_ratio(*j, *i)));
        }
        _ => unreachable!("at most two non-attended queues"),
    }
}

/// Distribution of the state right after an arrival.
pub fn route_arrival(state: &FullState, params: &ModelParams) -> Outcomes {
    let min = *state.l.iter().min().unwrap();
    let shortest: Vec<usize> = (0..3).filter(|&k| state.l[k] == min).collect();
    let p = params.p();
    let joins: Vec<(usize, f64)> = match shortest.as_slice() {
        [k] => vec![(*k, 1.0)],
        [i, j] => vec![(*i, params.p_ratio(*i, *j)), (*j, params.p_ratio(*j, *i))],
        _ => (0..3).map(|k| (k, p[k])).collect(),
    };
    let mut out = Outcomes::new();
    for (k, w) in joins.into_iter().filter(|&(_, w)| w > 0.0) {
        let mut l = state.l;
        l[k] += 1;
        relocate(l, state.server, params, w, &mut out);
    }
    out
}

/// Distribution of the state right after a service completion at the
/// attended queue.
pub fn complete_service(state: &FullState, params: &ModelParams) -> Result<Outcomes> {
    if state.l[state.server] == 0 {
        return Err(Error::EmptyAttendedQueue(state.server + 1));
    }
    let mut l = state.l;
    l[state.server] -= 1;
    let mut out = Outcomes::new();
    relocate(l, state.server, params, 1.0, &mut out);
    Ok(out)
}

/// All outgoing transitions `(target, rate)` of a state.
pub fn transitions(state: &FullState, params: &ModelParams) -> Vec<(FullState, f64)> {
    let lambda = params.lambda();
    let mut out: Vec<(FullState, f64)> = route_arrival(state, params)
        .into_iter()
        .map(|(s, w)| (s, lambda * w))
        .collect();
    if let Ok(served) = complete_service(state, params) {
        let mu = params.mu()[state.server];
        out.extend(served.into_iter().map(|(s, w)| (s, mu * w)));
    }
    out
}

/// The six generator blocks of the level process.
///
/// `b1`/`b0` are the level-0 internal/upward blocks, `b2` the level-1 to
/// level-0 block, and `a0`/`a1`/`a2` the homogeneous up/internal/down blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct QbdBlocks {
    pub b0: Mat7x12,
    pub b1: Mat7,
    pub b2: Mat12x7,
    pub a0: Mat12,
    pub a1: Mat12,
    pub a2: Mat12,
}

impl QbdBlocks {
    /// Generator of the phase process for levels >= 1.
    pub fn phase_generator(&self) -> Mat12 {
        self.a0 + self.a1 + self.a2
    }

    /// Largest absolute entry-wise difference over all six blocks.
    pub fn max_abs_diff(&self, other: &QbdBlocks) -> f64 {
        [
            (self.b0 - other.b0).amax(),
            (self.b1 - other.b1).amax(),
            (self.b2 - other.b2).amax(),
            (self.a0 - other.a0).amax(),
            (self.a1 - other.a1).amax(),
            (self.a2 - other.a2).amax(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Row sums of `[b1 | b0]` (7 values) and `[b2 | a1 | a0]` (12 values).
    pub fn boundary_row_sums(&self) -> ([f64; 7], [f64; 12]) {
        let mut top = [0.0; 7];
        for (i, t) in top.iter_mut().enumerate() {
            *t = self.b1.row(i).sum() + self.b0.row(i).sum();
        }
        let mut first = [0.0; 12];
        for (i, f) in first.iter_mut().enumerate() {
            *f = self.b2.row(i).sum() + self.a1.row(i).sum() + self.a0.row(i).sum();
        }
        (top, first)
    }
}

/// Derives all six blocks from the transition rules.
///
/// Boundary rows use levels 0 and 1; homogeneous rows use level 2 so that a
/// downward step stays away from the boundary.
pub fn build_blocks(params: &ModelParams) -> QbdBlocks {
    let mut b0 = Mat7x12::zeros();
    let mut b1 = Mat7::zeros();
    let mut b2 = Mat12x7::zeros();
    let mut a0 = Mat12::zeros();
    let mut a1 = Mat12::zeros();
    let mut a2 = Mat12::zeros();

    let target = |s: &FullState| s.level_phase().expect("rules keep states inside the phase sets");

    for (i, &phase) in BOUNDARY_PHASES.iter().enumerate() {
        let state = FullState::from_level_phase(0, phase).unwrap();
        for (next, rate) in transitions(&state, params) {
            let (n, d) = target(&next);
            match n {
                0 => b1[(i, d.boundary_index().unwrap())] += rate,
                1 => b0[(i, d.index().unwrap())] += rate,
                _ => unreachable!("one step moves at most one level"),
            }
            b1[(i, i)] -= rate;
        }
    }

    for (i, &phase) in PHASES.iter().enumerate() {
        let state = FullState::from_level_phase(1, phase).unwrap();
        for (next, rate) in transitions(&state, params) {
            let (n, d) = target(&next);
            if n == 0 {
                b2[(i, d.boundary_index().unwrap())] += rate;
            }
        }

        let state = FullState::from_level_phase(2, phase).unwrap();
        for (next, rate) in transitions(&state, params) {
            let (n, d) = target(&next);
            let j = d.index().unwrap();
            match n {
                3 => a0[(i, j)] += rate,
                2 => a1[(i, j)] += rate,
                1 => a2[(i, j)] += rate,
                _ => unreachable!("one step moves at most one level"),
            }
            a1[(i, i)] -= rate;
        }
    }

    QbdBlocks {
        b0,
        b1,
        b2,
        a0,
        a1,
        a2,
    }
}
