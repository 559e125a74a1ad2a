//! Stability of the level process.
//!
//! With `pi` the stationary vector of the phase generator `A = A0 + A1 + A2`,
//! the chain is positive recurrent iff the mean upward drift `pi A0 e` is
//! below the mean downward drift `pi A2 e`.

use nalgebra::SVector;

use crate::error::{Error, Result};
use crate::generator::{build_blocks, QbdBlocks};
use crate::linalg::stationary_vector;
use crate::model::{ModelParams, NUM_PHASES};

/// Bisection iteration cap.
const MAX_BISECTIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStationaryVector {
    pub pi: SVector<f64, NUM_PHASES>,
}

pub fn phase_stationary(blocks: &QbdBlocks) -> Result<PhaseStationaryVector> {
    let pi = stationary_vector(&blocks.phase_generator())?;
    Ok(PhaseStationaryVector { pi })
}

/// Both forms of the drift for one parameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    /// `pi A0 e`
    pub up: f64,
    /// `pi A2 e`
    pub down: f64,
    /// The closed scalar expression in terms of individual `pi` entries.
    pub scalar: f64,
}

impl Drift {
    pub fn value(&self) -> f64 {
        self.scalar
    }
}

/// Closed form of `pi A0 e - pi A2 e` using 1-based `pi` indices.
fn scalar_drift(params: &ModelParams, pi: &SVector<f64, NUM_PHASES>) -> f64 {
    let p = |k: usize| pi[k - 1];
    let [p1, p2, p3] = params.p();
    let up = params.lambda()
        * (p(8)
            + p(12)
            + p1 * (p(4) + p(6) + p(10))
            + p1 / (p1 + p2) * p(11)
            + p1 / (p1 + p3) * p(7));
    up - params.mu()[0] * (p(1) + p(2) + p(3) + p(4))
}

/// `(pi A0 e, pi A2 e)` straight from the blocks.
pub fn block_drift(blocks: &QbdBlocks) -> Result<(f64, f64, PhaseStationaryVector)> {
    let stat = phase_stationary(blocks)?;
    let pi_t = stat.pi.transpose();
    Ok(((pi_t * blocks.a0).sum(), (pi_t * blocks.a2).sum(), stat))
}

/// Drift within rounding of zero counts as unstable.
pub fn drift_is_negative(up: f64, down: f64) -> bool {
    up - down < -1e-12 * (up + down).max(1e-300)
}

pub fn drift_terms(params: &ModelParams) -> Result<(Drift, PhaseStationaryVector)> {
    let blocks = build_blocks(params);
    let (up, down, stat) = block_drift(&blocks)?;
    let scalar = scalar_drift(params, &stat.pi);
    debug_assert!(
        (scalar - (up - down)).abs() <= 1e-10 * (up.abs() + down.abs()).max(1.0),
        "scalar drift {scalar} disagrees with matrix form {}",
        up - down
    );
    Ok((Drift { up, down, scalar }, stat))
}

/// `f(lambda)`; negative means stable.
pub fn drift(params: &ModelParams) -> Result<f64> {
    drift_terms(params).map(|(d, _)| d.value())
}

/// Stable iff `f(lambda) < 0`. A drift within rounding of zero counts as
/// unstable.
pub fn is_stable(params: &ModelParams) -> Result<bool> {
    let (d, _) = drift_terms(params)?;
    Ok(drift_is_negative(d.up, d.down))
}

fn drift_at(base: &ModelParams, lambda: f64) -> Result<f64> {
    drift(&base.with_lambda(lambda)?)
}

pub fn default_bracket(base: &ModelParams) -> (f64, f64) {
    (1e-6, base.total_service_rate())
}

/// Arrival rate at which `f` changes sign, by bisection to absolute `tol`.
/// `base` supplies every parameter except `lambda`.
pub fn threshold_lambda(base: &ModelParams, bracket: Option<(f64, f64)>, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = bracket.unwrap_or_else(|| default_bracket(base));
    let (f_lo, f_hi) = (drift_at(base, lo)?, drift_at(base, hi)?);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoBracket { lo, hi });
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if drift_at(base, mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Intervals of a uniform scan over the bracket on which `f` changes sign.
pub fn sign_changes(
    base: &ModelParams,
    bracket: Option<(f64, f64)>,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = bracket.unwrap_or_else(|| default_bracket(base));
    let grid: Vec<f64> = (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect();
    let mut values = Vec::with_capacity(points);
    for &x in &grid {
        values.push(drift_at(base, x)?);
    }
    Ok(grid
        .windows(2)
        .zip(values.windows(2))
        .filter(|(_, f)| f[0].signum() != f[1].signum())
        .map(|(x, _)| (x[0], x[1]))
        .collect())
}
