//! Direct stationary solve of the chain truncated at `L1 <= N`.
//!
//! The generator is assembled state by state from [`transitions`], drops
//! moves above the top level, and is solved by block elimination from the
//! top level down. It shares no code with the block construction or the
//! rate-matrix solver and serves as ground truth for both.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generator::{route_arrival, transitions, FullState};
use crate::linalg::stationary_dense;
use crate::mg::MgSolution;
use crate::model::{ModelParams, BOUNDARY_PHASES, NUM_PHASES, PHASES};

pub const DEFAULT_TRUNCATION: u64 = 400;
/// Raise the truncation level until the top level carries less than this.
pub const TOP_MASS_BOUND: f64 = 1e-12;
const MAX_TRUNCATION: u64 = 409_600;

#[derive(Debug, Clone)]
pub struct TruncatedSolution {
    pub params: ModelParams,
    pub truncation: u64,
    /// `levels[n][i]` is the probability of level `n`, phase `i` (level-0
    /// phases use their own 7-element order).
    pub levels: Vec<DVector<f64>>,
}

fn phases_at(n: u64) -> &'static [crate::model::Phase] {
    if n == 0 {
        &BOUNDARY_PHASES
    } else {
        &PHASES
    }
}

fn state_at(n: u64, i: usize) -> FullState {
    FullState::from_level_phase(n, phases_at(n)[i]).expect("phase set embeds at its level")
}

fn position(state: &FullState) -> Result<(u64, usize)> {
    let (n, d) = state.level_phase()?;
    let i = if n == 0 {
        d.boundary_index()
    } else {
        d.index().ok()
    };
    Ok((n, i.expect("level_phase only returns phases of the level")))
}

/// Down, local and up blocks of one level.
struct LevelBlocks {
    down: DMatrix<f64>,
    local: DMatrix<f64>,
    up: DMatrix<f64>,
}

fn level_blocks(params: &ModelParams, n: u64, top: u64) -> Result<LevelBlocks> {
    let size = |m: u64| phases_at(m).len();
    let rows = size(n);
    let mut down = DMatrix::zeros(rows, if n == 0 { 0 } else { size(n - 1) });
    let mut local = DMatrix::zeros(rows, rows);
    let mut up = DMatrix::zeros(rows, if n == top { 0 } else { size(n + 1) });
    for i in 0..rows {
        for (next, rate) in transitions(&state_at(n, i), params) {
            let (m, j) = position(&next)?;
            if m > top {
                continue;
            }
            match m as i64 - n as i64 {
                -1 => down[(i, j)] += rate,
                0 => local[(i, j)] += rate,
                1 => up[(i, j)] += rate,
                _ => unreachable!("one step moves at most one level"),
            }
            local[(i, i)] -= rate;
        }
    }
    Ok(LevelBlocks { down, local, up })
}

/// Stationary distribution of the chain truncated at level `top`.
pub fn solve_truncated(params: &ModelParams, top: u64) -> Result<TruncatedSolution> {
    // Level-independent interior blocks are built once.
    let boundary = level_blocks(params, 0, top)?;
    let first = level_blocks(params, 1, top)?;
    let interior = level_blocks(params, 2, top.max(3))?;
    let last = level_blocks(params, top, top)?;
    let blocks_of = |n: u64| -> &LevelBlocks {
        match n {
            0 => &boundary,
            _ if n == top => &last,
            1 => &first,
            _ => &interior,
        }
    };

    // S_top = L_top; S_n = L_n + U_n (-S_{n+1})^-1 D_{n+1}.
    // carry[n] = U_n (-S_{n+1})^-1, so x_{n+1} = x_n carry[n].
    let mut carry: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); top as usize];
    let mut s = blocks_of(top).local.clone();
    for n in (0..top).rev() {
        let b = blocks_of(n);
        let neg_inv = (-&s)
            .try_inverse()
            .ok_or(Error::SingularSystem("truncated level reduction"))?;
        let w = &b.up * neg_inv;
        s = &b.local + &w * &blocks_of(n + 1).down;
        carry[n as usize] = w;
    }
    let x0 = stationary_dense(&s)?;
    let mut levels = Vec::with_capacity(top as usize + 1);
    levels.push(x0);
    for n in 0..top as usize {
        let next = (levels[n].transpose() * &carry[n]).transpose();
        levels.push(next);
    }
    let total: f64 = levels.iter().map(|v| v.sum()).sum();
    for v in &mut levels {
        *v /= total;
    }
    Ok(TruncatedSolution {
        params: *params,
        truncation: top,
        levels,
    })
}

/// Starts at `start` and doubles until `P(L1 = N) < 1e-12`.
pub fn solve_auto(params: &ModelParams, start: u64) -> Result<TruncatedSolution> {
    let mut top = start.max(2);
    loop {
        let sol = solve_truncated(params, top)?;
        if sol.top_mass() < TOP_MASS_BOUND || top >= MAX_TRUNCATION {
            return Ok(sol);
        }
        top *= 2;
    }
}

/// Raw moments of the full queue-length vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMoments {
    pub mean: [f64; 3],
    /// `E[L_i L_j]`
    pub second: [[f64; 3]; 3],
    pub idle: f64,
    /// Long-run fraction of time the server sits at each queue.
    pub server: [f64; 3],
    /// Long-run rate of arrivals joining each queue.
    pub joins: [f64; 3],
}

impl StateMoments {
    pub fn var(&self, i: usize) -> f64 {
        self.second[i][i] - self.mean[i] * self.mean[i]
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.second[i][j] - self.mean[i] * self.mean[j]
    }
}

impl TruncatedSolution {
    pub fn top_mass(&self) -> f64 {
        self.levels.last().map_or(0.0, |v| v.sum())
    }

    /// `P(L1 = n, phase)` with interior indexing for `n >= 1`.
    pub fn level(&self, n: u64) -> Option<&DVector<f64>> {
        self.levels.get(n as usize)
    }

    /// Moments computed from explicit queue-length vectors.
    pub fn moments(&self) -> StateMoments {
        let mut mean = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        let mut idle = 0.0;
        let mut server = [0.0; 3];
        let mut joins = [0.0; 3];
        let lambda = self.params.lambda();
        for (n, v) in self.levels.iter().enumerate() {
            for (i, &prob) in v.iter().enumerate() {
                let s = state_at(n as u64, i);
                let l = s.l.map(|x| x as f64);
                for a in 0..3 {
                    mean[a] += prob * l[a];
                    for b in 0..3 {
                        second[a][b] += prob * l[a] * l[b];
                    }
                }
                if s.l == [0, 0, 0] {
                    idle += prob;
                }
                server[s.server] += prob;
                for (t, w) in route_arrival(&s, &self.params) {
                    let k = (0..3).find(|&k| t.l[k] == s.l[k] + 1).unwrap();
                    joins[k] += prob * w * lambda;
                }
            }
        }
        StateMoments {
            mean,
            second,
            idle,
            server,
            joins,
        }
    }

    /// `sum_n P_{n,d}` and `sum_n n P_{n,d}` per interior phase, level 0
    /// folded into the first sum at its interior index.
    pub fn phase_sums(&self) -> ([f64; NUM_PHASES], [f64; NUM_PHASES], [f64; NUM_PHASES]) {
        let mut g = [0.0; NUM_PHASES];
        let mut gp = [0.0; NUM_PHASES];
        let mut gpp = [0.0; NUM_PHASES];
        for (n, v) in self.levels.iter().enumerate() {
            let nf = n as f64;
            for (i, &prob) in v.iter().enumerate() {
                let j = if n == 0 {
                    BOUNDARY_PHASES[i].index().unwrap()
                } else {
                    i
                };
                g[j] += prob;
                gp[j] += nf * prob;
                gpp[j] += nf * (nf - 1.0) * prob;
            }
        }
        (g, gp, gpp)
    }

    /// Total variation distance to the matrix-geometric distribution,
    /// including the geometric tail above the truncation level.
    pub fn tv_distance(&self, sol: &MgSolution) -> f64 {
        let mut diff: f64 = self.levels[0]
            .iter()
            .zip(sol.p0.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        let mut level = sol.p1;
        for n in 1..=self.truncation as usize {
            diff += self.levels[n]
                .iter()
                .zip(level.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
            level = (level.transpose() * sol.r).transpose();
        }
        diff += sol.tail_mass(self.truncation);
        0.5 * diff
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_to_one_and_balances() {
        let m = ModelParams::new(3.0, [4.0, 5.0, 6.0], [0.2, 0.3, 0.5], [1.0, 2.0, 3.0]).unwrap();
        let t = solve_truncated(&m, 30).unwrap();
        let total: f64 = t.levels.iter().map(|v| v.sum()).sum();
        assert!((total - 1.0).abs() < 1e-14);
        // Global balance at level 5, all phases.
        let b = level_blocks(&m, 5, 30).unwrap();
        let below = level_blocks(&m, 4, 30).unwrap();
        let above = level_blocks(&m, 6, 30).unwrap();
        let flow = t.levels[4].transpose() * &below.up
            + t.levels[5].transpose() * &b.local
            + t.levels[6].transpose() * &above.down;
        assert!(flow.amax() < 1e-14);
    }

    #[test]
    fn light_traffic_is_mostly_idle() {
        let m = ModelParams::uniform(0.01, [5.0; 3]).unwrap();
        let t = solve_auto(&m, 20).unwrap();
        let mo = t.moments();
        assert!(mo.idle > 0.99);
        let joins: f64 = mo.joins.iter().sum();
        assert!((joins - 0.01).abs() < 1e-15);
    }

    #[test]
    fn auto_raises_truncation() {
        let m = ModelParams::new(4.0, [4.5, 3.0, 5.0], [1.0 / 3.0; 3], [1.0; 3]).unwrap();
        let t = solve_auto(&m, 50).unwrap();
        assert!(t.truncation > 50);
        assert!(t.top_mass() < TOP_MASS_BOUND);
    }
}
