//! Event-driven simulation of the raw `(L1, L2, L3, server)` chain.
//!
//! Routing and switching are written out again here rather than taken from
//! [`crate::generator`], so the simulator can disagree with the rules used
//! to build the blocks. Each replication draws from its own ChaCha8 stream
//! (master seed, stream index = replication) and holding times are sampled
//! by inverse transform.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::measures::{gini, PerformanceReport, PAIRS};
use crate::model::{ModelParams, Phase, NUM_BOUNDARY_PHASES, NUM_PHASES};

/// Queue growth faster than this fraction of `lambda` per unit time is
/// flagged.
pub const GROWTH_FRACTION: f64 = 0.01;
/// Significance level of the tie-routing chi-square check.
pub const TIE_ALPHA: f64 = 0.001;
const SLOPE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub seed: u64,
    pub horizon: f64,
    pub warmup: f64,
    pub replications: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            horizon: 2e6,
            warmup: 1e4,
            replications: 20,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.warmup >= 0.0 && self.horizon.is_finite() && self.horizon > self.warmup) {
            return Err(Error::InvalidConfig(format!(
                "need horizon > warmup >= 0, got horizon {} warmup {}",
                self.horizon, self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be positive".into()));
        }
        Ok(())
    }

    fn window(&self) -> f64 {
        self.horizon - self.warmup
    }
}

/// Point estimate with its standard error across replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// `NaN` with a single replication.
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = if xs.len() < 2 {
            f64::NAN
        } else {
            let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (n - 1.0) / n).sqrt()
        };
        Estimate { mean, se }
    }

    /// `|exact - mean| / se`.
    pub fn z(&self, exact: f64) -> f64 {
        (exact - self.mean).abs() / self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimates {
    pub mean_l: [Estimate; 3],
    pub var_l: [Estimate; 3],
    /// Pair order as in [`PAIRS`].
    pub cov: [Estimate; 3],
    pub cor: [Estimate; 3],
    pub gamma: [Estimate; 3],
    pub p_idle: Estimate,
    pub lambda_eff: [Estimate; 3],
    /// Time-average length over the measured joining rate.
    pub mean_w_little: [Estimate; 3],
    /// Average of tagged sojourn times.
    pub mean_w_sojourn: [Estimate; 3],
    /// Index of the pooled means, jackknife bias-corrected, with jackknife error.
    pub gini: Estimate,
    pub events: u64,
    /// Chosen queue at arrivals finding all three queues equal.
    pub tie_counts: [u64; 3],
    pub tie_chi2: f64,
    pub tie_chi2_critical: f64,
    /// Least-squares slope of `L1` over time.
    pub growth_slope: Estimate,
    pub growing: bool,
    /// Fold of every event and state; equal runs give equal digests.
    pub digest: u64,
    pub replications: usize,
}

/// Exact value next to the simulated one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub measure: String,
    pub exact: f64,
    pub estimate: f64,
    pub se: f64,
    /// `|exact - estimate| <= k se`
    pub within: bool,
}

impl SimEstimates {
    /// Pairs every simulated measure with its exact counterpart.
    pub fn compare(&self, exact: &PerformanceReport, k: f64) -> Vec<Comparison> {
        let mut out = Vec::new();
        let mut push = |name: String, x: f64, e: &Estimate| {
            out.push(Comparison {
                measure: name,
                exact: x,
                estimate: e.mean,
                se: e.se,
                within: (x - e.mean).abs() <= k * e.se,
            });
        };
        for i in 0..3 {
            push(format!("mean_l{}", i + 1), exact.mean_l[i], &self.mean_l[i]);
            push(format!("var_l{}", i + 1), exact.var_l[i], &self.var_l[i]);
            push(format!("gamma{}", i + 1), exact.gamma[i], &self.gamma[i]);
            push(format!("lambda_eff{}", i + 1), exact.lambda_eff[i], &self.lambda_eff[i]);
            push(format!("mean_w{}_little", i + 1), exact.mean_w[i], &self.mean_w_little[i]);
            push(format!("mean_w{}_sojourn", i + 1), exact.mean_w[i], &self.mean_w_sojourn[i]);
        }
        for (k, (i, j)) in PAIRS.iter().enumerate() {
            push(format!("cov{}{}", i + 1, j + 1), exact.cov[k], &self.cov[k]);
            push(format!("cor{}{}", i + 1, j + 1), exact.cor[k], &self.cor[k]);
        }
        push("p_idle".into(), exact.p_idle, &self.p_idle);
        push("gini".into(), exact.gini, &self.gini);
        out
    }
}

/// Occupancy of each `(L1, D)` cell for `L1 <= cap`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateOccupancy {
    pub cap: u64,
    /// Level-0 phases, in the level-0 order.
    pub level0: [Estimate; NUM_BOUNDARY_PHASES],
    /// `levels[n - 1][i]` for `1 <= n <= cap`, interior phase order.
    pub levels: Vec<[Estimate; NUM_PHASES]>,
    /// Time spent above `cap`.
    pub above_cap: Estimate,
    pub events: u64,
}

/// Per-replication accumulators.
#[derive(Debug, Clone, Default)]
struct Tally {
    sum_l: [f64; 3],
    sum_ll: [[f64; 3]; 3],
    server: [f64; 3],
    idle: f64,
    joins: [u64; 3],
    sojourn: [f64; 3],
    served: [u64; 3],
    ties: [u64; 3],
    events: u64,
    digest: u64,
    slope: [f64; 5],
    occupancy: Option<Occupancy>,
}

#[derive(Debug, Clone)]
struct Occupancy {
    cap: u64,
    level0: [f64; NUM_BOUNDARY_PHASES],
    levels: Vec<[f64; NUM_PHASES]>,
    above: f64,
}

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fold(digest: u64, x: u64) -> u64 {
    (digest ^ x).wrapping_mul(FNV_PRIME)
}

/// Draws an index from non-negative weights over `candidates`.
fn pick(rng: &mut ChaCha8Rng, candidates: &[usize], weights: &[f64; 3]) -> usize {
    let total: f64 = candidates.iter().map(|&k| weights[k]).sum();
    let mut u = rng.random::<f64>() * total;
    for &k in candidates {
        if u < weights[k] {
            return k;
        }
        u -= weights[k];
    }
    // Rounding can leave u just above the last weight.
    *candidates.iter().rev().find(|&&k| weights[k] > 0.0).unwrap()
}

/// Moves the server to a strictly longer queue, if any.
fn switch(l: &[u64; 3], server: usize, q: &[f64; 3], rng: &mut ChaCha8Rng) -> usize {
    let (a, b) = ((server + 1) % 3, (server + 2) % 3);
    let top = l[a].max(l[b]);
    if top <= l[server] {
        server
    } else if l[a] != l[b] {
        if l[a] > l[b] {
            a
        } else {
            b
        }
    } else {
        pick(rng, &[a, b], q)
    }
}

/// Membership of the state in the phase sets of the level process.
fn phase_of(l: &[u64; 3], server: usize) -> Option<Phase> {
    let d2 = l[0] as i64 - l[1] as i64;
    let d3 = l[0] as i64 - l[2] as i64;
    if d2.abs() > 1 || d3.abs() > 1 {
        return None;
    }
    let d = Phase::new(server as u8 + 1, d2 as i8, d3 as i8);
    let member = if l[0] == 0 {
        d.boundary_index().is_some()
    } else {
        d.index().is_ok()
    };
    member.then_some(d)
}

fn run_replication(
    params: &ModelParams,
    cfg: &SimConfig,
    rep: usize,
    occupancy_cap: Option<u64>,
) -> Result<Tally> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);
    let lambda = params.lambda();
    let mu = params.mu();
    let p = params.p();
    let q = params.q();
    let (warmup, horizon) = (cfg.warmup, cfg.horizon);
    let sample_step = cfg.window() / SLOPE_SAMPLES as f64;

    let mut tally = Tally {
        occupancy: occupancy_cap.map(|cap| Occupancy {
            cap,
            level0: [0.0; NUM_BOUNDARY_PHASES],
            levels: vec![[0.0; NUM_PHASES]; cap as usize],
            above: 0.0,
        }),
        ..Tally::default()
    };
    let mut l = [0u64; 3];
    let mut server = 0usize;
    let mut arrivals: [VecDeque<f64>; 3] = Default::default();
    let mut t = 0.0;
    let mut next_sample = warmup;

    loop {
        let busy = l[server] > 0;
        let rate = lambda + if busy { mu[server] } else { 0.0 };
        let dt = -(1.0 - rng.random::<f64>()).ln() / rate;
        let t_next = t + dt;

        // Time-weighted statistics over the part of [t, t_next) in the window.
        let hold = t_next.min(horizon) - t.max(warmup);
        if hold > 0.0 {
            let lf = l.map(|x| x as f64);
            for i in 0..3 {
                tally.sum_l[i] += hold * lf[i];
                for j in i..3 {
                    tally.sum_ll[i][j] += hold * lf[i] * lf[j];
                }
            }
            tally.server[server] += hold;
            if l == [0, 0, 0] {
                tally.idle += hold;
            }
            if let Some(occ) = tally.occupancy.as_mut() {
                let d = phase_of(&l, server).expect("checked at the previous event");
                if l[0] == 0 {
                    occ.level0[d.boundary_index().unwrap()] += hold;
                } else if l[0] <= occ.cap {
                    occ.levels[l[0] as usize - 1][d.index().unwrap()] += hold;
                } else {
                    occ.above += hold;
                }
            }
        }
        while next_sample < t_next.min(horizon) {
            let x = next_sample;
            let y = l[0] as f64;
            for (acc, v) in tally.slope.iter_mut().zip([1.0, x, y, x * x, x * y]) {
                *acc += v;
            }
            next_sample += sample_step;
        }
        if t_next >= horizon {
            break;
        }
        t = t_next;
        let counted = t >= warmup;

        if rng.random::<f64>() * rate < lambda {
            let min = l[0].min(l[1]).min(l[2]);
            let mut shortest = [0usize; 3];
            let mut count = 0;
            for k in 0..3 {
                if l[k] == min {
                    shortest[count] = k;
                    count += 1;
                }
            }
            let k = if count == 1 {
                shortest[0]
            } else {
                pick(&mut rng, &shortest[..count], &p)
            };
            if count == 3 && counted {
                tally.ties[k] += 1;
            }
            l[k] += 1;
            arrivals[k].push_back(t);
            if counted {
                tally.joins[k] += 1;
            }
            server = switch(&l, server, &q, &mut rng);
            tally.digest = fold(tally.digest, k as u64);
        } else {
            let arrived = arrivals[server].pop_front().expect("attended queue is non-empty");
            if arrived >= warmup {
                tally.sojourn[server] += t - arrived;
                tally.served[server] += 1;
            }
            l[server] -= 1;
            server = switch(&l, server, &q, &mut rng);
            tally.digest = fold(tally.digest, 3);
        }
        tally.events += 1;
        tally.digest = fold(tally.digest, (l[0] << 42) ^ (l[1] << 21) ^ l[2] ^ ((server as u64) << 62));

        if phase_of(&l, server).is_none() {
            return Err(Error::StateOutsidePhaseSet { l, server: server + 1 });
        }
    }
    Ok(tally)
}

fn jackknife_gini(means: &[[f64; 3]]) -> Estimate {
    let r = means.len();
    let pooled = |skip: Option<usize>| {
        let mut m = [0.0; 3];
        let mut n = 0.0;
        for (k, x) in means.iter().enumerate() {
            if Some(k) != skip {
                for i in 0..3 {
                    m[i] += x[i];
                }
                n += 1.0;
            }
        }
        gini(m.map(|v| v / n)).unwrap_or(0.0)
    };
    let mean = pooled(None);
    if r < 2 {
        return Estimate { mean, se: f64::NAN };
    }
    let loo: Vec<f64> = (0..r).map(|k| pooled(Some(k))).collect();
    let avg = loo.iter().sum::<f64>() / r as f64;
    let ss: f64 = loo.iter().map(|x| (x - avg).powi(2)).sum();
    let rf = r as f64;
    Estimate {
        mean: rf * mean - (rf - 1.0) * avg,
        se: ((rf - 1.0) / rf * ss).sqrt(),
    }
}

/// Chi-square statistic of tie routing against `p`, with its critical
/// value at [`TIE_ALPHA`]; zero-weight queues are left out.
pub fn tie_chi_square(counts: &[u64; 3], p: &[f64; 3]) -> (f64, f64) {
    let n: u64 = counts.iter().sum();
    let cells: Vec<usize> = (0..3).filter(|&k| p[k] > 0.0).collect();
    if n == 0 || cells.len() < 2 {
        return (0.0, f64::INFINITY);
    }
    let stat = cells
        .iter()
        .map(|&k| {
            let e = n as f64 * p[k];
            (counts[k] as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((cells.len() - 1) as f64).expect("positive degrees of freedom");
    (stat, dist.inverse_cdf(1.0 - TIE_ALPHA))
}

pub fn simulate(params: &ModelParams, cfg: &SimConfig) -> Result<SimEstimates> {
    cfg.validate()?;
    let tallies = (0..cfg.replications)
        .map(|rep| run_replication(params, cfg, rep, None))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(params, cfg, &tallies))
}

fn summarize(params: &ModelParams, cfg: &SimConfig, tallies: &[Tally]) -> SimEstimates {
    let window = cfg.window();
    let per_rep = |f: &dyn Fn(&Tally) -> f64| -> Estimate {
        Estimate::from_samples(&tallies.iter().map(f).collect::<Vec<_>>())
    };
    let mean = |t: &Tally, i: usize| t.sum_l[i] / window;
    let second = |t: &Tally, i: usize, j: usize| t.sum_ll[i.min(j)][i.max(j)] / window;
    let cov = |t: &Tally, i: usize, j: usize| second(t, i, j) - mean(t, i) * mean(t, j);

    let by_queue = |f: &dyn Fn(&Tally, usize) -> f64| [0, 1, 2].map(|i| per_rep(&|t| f(t, i)));
    let by_pair = |f: &dyn Fn(&Tally, usize, usize) -> f64| {
        [0, 1, 2].map(|k| {
            let (i, j) = PAIRS[k];
            per_rep(&|t| f(t, i, j))
        })
    };

    let means: Vec<[f64; 3]> = tallies.iter().map(|t| [0, 1, 2].map(|i| mean(t, i))).collect();
    let mut ties = [0u64; 3];
    for t in tallies {
        for k in 0..3 {
            ties[k] += t.ties[k];
        }
    }
    let (tie_chi2, tie_chi2_critical) = tie_chi_square(&ties, &params.p());
    let growth_slope = per_rep(&|t| {
        let [n, sx, sy, sxx, sxy] = t.slope;
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    });
    let digest = tallies.iter().fold(0xcbf2_9ce4_8422_2325, |d, t| fold(d, t.digest));

    SimEstimates {
        mean_l: by_queue(&mean),
        var_l: by_queue(&|t, i| cov(t, i, i)),
        cov: by_pair(&cov),
        cor: by_pair(&|t, i, j| cov(t, i, j) / (cov(t, i, i) * cov(t, j, j)).sqrt()),
        gamma: by_queue(&|t, i| t.server[i] / window),
        p_idle: per_rep(&|t| t.idle / window),
        lambda_eff: by_queue(&|t, i| t.joins[i] as f64 / window),
        mean_w_little: by_queue(&|t, i| mean(t, i) / (t.joins[i] as f64 / window)),
        mean_w_sojourn: by_queue(&|t, i| t.sojourn[i] / t.served[i] as f64),
        gini: jackknife_gini(&means),
        events: tallies.iter().map(|t| t.events).sum(),
        tie_counts: ties,
        tie_chi2,
        tie_chi2_critical,
        growing: growth_slope.mean > GROWTH_FRACTION * params.lambda(),
        growth_slope,
        digest,
        replications: tallies.len(),
    }
}

/// Time fractions of the `(L1, D)` cells up to level `cap`.
pub fn simulate_state_distribution(
    params: &ModelParams,
    cfg: &SimConfig,
    cap: u64,
) -> Result<StateOccupancy> {
    cfg.validate()?;
    let tallies = (0..cfg.replications)
        .map(|rep| run_replication(params, cfg, rep, Some(cap)))
        .collect::<Result<Vec<_>>>()?;
    let window = cfg.window();
    let occ: Vec<&Occupancy> = tallies.iter().map(|t| t.occupancy.as_ref().unwrap()).collect();
    let est = |f: &dyn Fn(&Occupancy) -> f64| {
        Estimate::from_samples(&occ.iter().map(|o| f(o) / window).collect::<Vec<_>>())
    };
    let level0 = std::array::from_fn(|i| est(&|o| o.level0[i]));
    let levels = (0..cap as usize)
        .map(|n| std::array::from_fn(|i| est(&|o| o.levels[n][i])))
        .collect();
    Ok(StateOccupancy {
        cap,
        level0,
        levels,
        above_cap: est(&|o| o.above),
        events: tallies.iter().map(|t| t.events).sum(),
    })
}

impl StateOccupancy {
    /// Estimate for phase `d` at level `n`, if tracked.
    pub fn get(&self, n: u64, d: Phase) -> Option<Estimate> {
        if n == 0 {
            return d.boundary_index().map(|i| self.level0[i]);
        }
        let row = self.levels.get(n as usize - 1)?;
        d.index().ok().map(|i| row[i])
    }
}
