//! Performance measures from the partial generating functions at `z = 1`.
//!
//! Everything is expressed through three 12-vectors: `g1[d] = G_d(1)`,
//! `gp1[d] = G'_d(1)` and `gpp1[d] = G''_d(1)`, realized here by the
//! matrix-geometric moment sums. Joint moments of `(L1, D2, D3)` are signed
//! sums over phases; queue-length moments follow from `Lj = L1 - Dj`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mg::MgSolution;
use crate::model::{ModelParams, NUM_PHASES, PHASES};

pub type PhaseVector = [f64; NUM_PHASES];

// Phase indices in the interior order.
const P111: usize = 0;
const P101: usize = 1;
const P110: usize = 2;
const P100: usize = 3;
const P201: usize = 4;
const P200: usize = 5;
const P2M0: usize = 6;
const P2MM: usize = 7;
const P310: usize = 8;
const P300: usize = 9;
const P30M: usize = 10;
const P3MM: usize = 11;

/// Pair order used for `cov` and `cor`: (1,2), (1,3), (2,3).
pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    pub mean_l: [f64; 3],
    pub var_l: [f64; 3],
    /// Ordered as [`PAIRS`].
    pub cov: [f64; 3],
    pub cor: [f64; 3],
    pub lambda_eff: [f64; 3],
    pub rho_eff: [f64; 3],
    pub p_idle: f64,
    pub mean_w: [f64; 3],
    pub gamma: [f64; 3],
    pub gini: f64,
    pub g1: PhaseVector,
    pub gp1: PhaseVector,
    pub gpp1: PhaseVector,
}

fn to_array(v: impl IntoIterator<Item = f64>) -> PhaseVector {
    let mut out = [0.0; NUM_PHASES];
    for (o, x) in out.iter_mut().zip(v) {
        *o = x;
    }
    out
}

/// `(G(1), G'(1), G''(1))` per interior phase.
pub fn pgf_values_at_one(sol: &MgSolution) -> (PhaseVector, PhaseVector, PhaseVector) {
    let mut g1 = to_array(sol.sum1.iter().copied());
    for (i, d) in PHASES.iter().enumerate() {
        if let Some(b) = d.boundary_index() {
            g1[i] += sol.p0[b];
        }
    }
    (
        g1,
        to_array(sol.sum_n.iter().copied()),
        to_array(sol.sum_n2m.iter().copied()),
    )
}

/// `sum_d D2(d) v[d]`.
fn signed_d2(v: &PhaseVector) -> f64 {
    v[P111] + v[P110] + v[P310] - v[P2M0] - v[P2MM] - v[P3MM]
}

/// `sum_d D3(d) v[d]`.
fn signed_d3(v: &PhaseVector) -> f64 {
    v[P111] + v[P101] + v[P201] - v[P2MM] - v[P30M] - v[P3MM]
}

/// `P(|D2| = 1)`, which is `E[D2^2]` because `D2` takes values in {-1, 0, 1}.
pub fn second_moment_d2(g1: &PhaseVector) -> f64 {
    g1[P111] + g1[P110] + g1[P310] + g1[P2M0] + g1[P2MM] + g1[P3MM]
}

/// `P(|D3| = 1)`.
pub fn second_moment_d3(g1: &PhaseVector) -> f64 {
    g1[P111] + g1[P101] + g1[P201] + g1[P2MM] + g1[P30M] + g1[P3MM]
}

/// The signed expressions for `E[D2^2]` and `E[D3^2]` as originally
/// printed. Kept only to show they disagree with the truncated oracle;
/// nothing in the pipeline uses them.
pub fn printed_second_moments(g1: &PhaseVector) -> [f64; 2] {
    let d2 = g1[P111] + g1[P110] + g1[P2M0] - g1[P2MM] - g1[P310] - g1[P3MM];
    [d2, signed_d3(g1)]
}

/// `(P(Dj = 1), P(Dj = -1))` for j = 2, 3, summed phase by phase.
pub fn difference_masses(g1: &PhaseVector) -> [(f64, f64); 2] {
    let mut out = [(0.0, 0.0); 2];
    for (d, &m) in PHASES.iter().zip(g1) {
        for (k, diff) in [d.d2, d.d3].into_iter().enumerate() {
            match diff {
                1 => out[k].0 += m,
                -1 => out[k].1 += m,
                _ => {}
            }
        }
    }
    out
}

/// Long-run joining rate per queue.
pub fn effective_arrival_rates(g1: &PhaseVector, params: &ModelParams) -> [f64; 3] {
    let lambda = params.lambda();
    let [p1, p2, p3] = params.p();
    let all_equal = g1[P100] + g1[P200] + g1[P300];
    let share = |a: f64, b: f64| if a + b > 0.0 { a / (a + b) } else { 0.0 };
    [
        lambda
            * (p1 * all_equal
                + g1[P2MM]
                + g1[P3MM]
                + share(p1, p2) * g1[P30M]
                + share(p1, p3) * g1[P2M0]),
        lambda
            * (p2 * all_equal
                + g1[P110]
                + g1[P310]
                + share(p2, p1) * g1[P30M]
                + share(p2, p3) * g1[P111]),
        lambda
            * (p3 * all_equal
                + g1[P101]
                + g1[P201]
                + share(p3, p1) * g1[P2M0]
                + share(p3, p2) * g1[P111]),
    ]
}

/// Mean absolute difference of the three means over twice their sum,
/// normalized by the number of queues.
pub fn gini(means: [f64; 3]) -> Result<f64> {
    let total: f64 = means.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroMeans);
    }
    let mut spread = 0.0;
    for a in means {
        for b in means {
            spread += (a - b).abs();
        }
    }
    Ok(spread / (6.0 * total))
}

pub fn compute_report(sol: &MgSolution, params: &ModelParams) -> Result<PerformanceReport> {
    let (g1, gp1, gpp1) = pgf_values_at_one(sol);
    report_from_values(g1, gp1, gpp1, sol.p0[0] + sol.p0[1] + sol.p0[4], params)
}

/// Builds the report from the three phase vectors and the empty-system mass.
pub fn report_from_values(
    g1: PhaseVector,
    gp1: PhaseVector,
    gpp1: PhaseVector,
    p_idle: f64,
    params: &ModelParams,
) -> Result<PerformanceReport> {
    let l1: f64 = gp1.iter().sum();
    let ed = [signed_d2(&g1), signed_d3(&g1)];
    let mean_l = [l1, l1 - ed[0], l1 - ed[1]];

    let l1_sq = gpp1.iter().sum::<f64>() + l1;
    let l1d = [signed_d2(&gp1), signed_d3(&gp1)];
    let d_sq = [second_moment_d2(&g1), second_moment_d3(&g1)];
    let d2d3 = g1[P111] + g1[P2MM] + g1[P3MM];

    let var_l = [
        l1_sq - l1 * l1,
        l1_sq - 2.0 * l1d[0] + d_sq[0] - mean_l[1] * mean_l[1],
        l1_sq - 2.0 * l1d[1] + d_sq[1] - mean_l[2] * mean_l[2],
    ];
    let cov = [
        l1_sq - l1d[0] - l1 * mean_l[1],
        l1_sq - l1d[1] - l1 * mean_l[2],
        l1_sq - l1d[0] - l1d[1] + d2d3 - mean_l[1] * mean_l[2],
    ];
    let mut cor = [0.0; 3];
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        cor[k] = cov[k] / (var_l[i] * var_l[j]).sqrt();
    }

    let lambda_eff = effective_arrival_rates(&g1, params);
    let mu = params.mu();
    let rho_eff = [0, 1, 2].map(|i| lambda_eff[i] / mu[i]);
    let mut mean_w = [0.0; 3];
    for i in 0..3 {
        if lambda_eff[i] <= 0.0 {
            return Err(Error::ZeroEffectiveRate(i + 1));
        }
        mean_w[i] = mean_l[i] / lambda_eff[i];
    }
    let mut gamma = [0.0; 3];
    for (d, &m) in PHASES.iter().zip(&g1) {
        gamma[d.server_index()] += m;
    }
    let gini = gini(mean_l)?;

    Ok(PerformanceReport {
        mean_l,
        var_l,
        cov,
        cor,
        lambda_eff,
        rho_eff,
        p_idle,
        mean_w,
        gamma,
        gini,
        g1,
        gp1,
        gpp1,
    })
}
