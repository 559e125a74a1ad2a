//! Model parameters and the finite phase sets of the (L1, D) representation.
//!
//! A phase `(I; D2, D3)` records the attended queue `I` together with the
//! differences `D2 = L1 - L2` and `D3 = L1 - L3`. For levels `L1 >= 1` all
//! twelve phases are reachable; at level 0 only seven are.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of interior phases.
pub const NUM_PHASES: usize = 12;
/// Number of level-0 phases.
pub const NUM_BOUNDARY_PHASES: usize = 7;

const P_SUM_TOL: f64 = 1e-12;

/// Unvalidated parameter record, as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub lambda: f64,
    pub mu: [f64; 3],
    pub p: [f64; 3],
    pub q: [f64; 3],
}

/// Validated parameters: Poisson arrival rate, exponential service rates,
/// arrival tie weights `p` and server tie weights `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    lambda: f64,
    mu: [f64; 3],
    p: [f64; 3],
    q: [f64; 3],
}

impl From<ModelParams> for RawParams {
    fn from(m: ModelParams) -> Self {
        RawParams {
            lambda: m.lambda,
            mu: m.mu,
            p: m.p,
            q: m.q,
        }
    }
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        validate_params(&raw)
    }
}

/// Checks positivity of all rates and the routing-weight constraints.
pub fn validate_params(raw: &RawParams) -> Result<ModelParams> {
    let finite_pos = |x: f64| x.is_finite() && x > 0.0;
    if !finite_pos(raw.lambda) {
        return Err(Error::NonPositiveRate(format!("lambda = {}", raw.lambda)));
    }
    for (i, &m) in raw.mu.iter().enumerate() {
        if !finite_pos(m) {
            return Err(Error::NonPositiveRate(format!("mu{} = {}", i + 1, m)));
        }
    }
    for (i, &w) in raw.q.iter().enumerate() {
        if !finite_pos(w) {
            return Err(Error::NonPositiveRate(format!("q{} = {}", i + 1, w)));
        }
    }
    if raw.p.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(Error::BadRoutingWeights(format!(
            "negative or non-finite entry in p = {:?}",
            raw.p
        )));
    }
    let sum: f64 = raw.p.iter().sum();
    if (sum - 1.0).abs() > P_SUM_TOL {
        return Err(Error::BadRoutingWeights(format!(
            "p sums to {sum}, expected 1"
        )));
    }
    if raw.p.iter().filter(|&&w| w == 0.0).count() >= 2 {
        return Err(Error::BadRoutingWeights(format!(
            "at most one entry of p may be zero, got {:?}",
            raw.p
        )));
    }
    Ok(ModelParams {
        lambda: raw.lambda,
        mu: raw.mu,
        p: raw.p,
        q: raw.q,
    })
}

impl ModelParams {
    pub fn new(lambda: f64, mu: [f64; 3], p: [f64; 3], q: [f64; 3]) -> Result<Self> {
        validate_params(&RawParams { lambda, mu, p, q })
    }

    /// `mu`, uniform `p = 1/3` and unit `q`.
    pub fn uniform(lambda: f64, mu: [f64; 3]) -> Result<Self> {
        Self::new(lambda, mu, [1.0 / 3.0; 3], [1.0; 3])
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> [f64; 3] {
        self.mu
    }

    pub fn p(&self) -> [f64; 3] {
        self.p
    }

    pub fn q(&self) -> [f64; 3] {
        self.q
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.mu, self.p, self.q)
    }

    /// Arrival split `p_i / (p_i + p_j)` when queues `i` and `j` tie for shortest.
    pub fn p_ratio(&self, i: usize, j: usize) -> f64 {
        self.p[i] / (self.p[i] + self.p[j])
    }

    /// Server split `q_i / (q_i + q_j)` when queues `i` and `j` tie for longest.
    pub fn q_ratio(&self, i: usize, j: usize) -> f64 {
        self.q[i] / (self.q[i] + self.q[j])
    }

    pub fn total_service_rate(&self) -> f64 {
        self.mu.iter().sum()
    }
}

/// Interior phase `(server; L1 - L2, L1 - L3)`. `server` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Phase {
    pub server: u8,
    pub d2: i8,
    pub d3: i8,
}

impl Phase {
    pub const fn new(server: u8, d2: i8, d3: i8) -> Self {
        Phase { server, d2, d3 }
    }

    /// Zero-based index of the attended queue.
    pub fn server_index(&self) -> usize {
        self.server as usize - 1
    }

    pub fn index(&self) -> Result<usize> {
        phase_index(*self)
    }

    /// Position in the level-0 ordering, if this phase exists at level 0.
    pub fn boundary_index(&self) -> Option<usize> {
        BOUNDARY_PHASES.iter().position(|b| b == self)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({};{},{})", self.server, self.d2, self.d3)
    }
}

/// The twelve interior phases in their canonical order.
pub const PHASES: [Phase; NUM_PHASES] = [
    Phase::new(1, 1, 1),
    Phase::new(1, 0, 1),
    Phase::new(1, 1, 0),
    Phase::new(1, 0, 0),
    Phase::new(2, 0, 1),
    Phase::new(2, 0, 0),
    Phase::new(2, -1, 0),
    Phase::new(2, -1, -1),
    Phase::new(3, 1, 0),
    Phase::new(3, 0, 0),
    Phase::new(3, 0, -1),
    Phase::new(3, -1, -1),
];

/// The seven level-0 phases in their canonical order.
pub const BOUNDARY_PHASES: [Phase; NUM_BOUNDARY_PHASES] = [
    Phase::new(1, 0, 0),
    Phase::new(2, 0, 0),
    Phase::new(2, -1, 0),
    Phase::new(2, -1, -1),
    Phase::new(3, 0, 0),
    Phase::new(3, 0, -1),
    Phase::new(3, -1, -1),
];

/// Level-0 phase, indexed 0..7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryPhase(Phase);

impl BoundaryPhase {
    pub fn new(phase: Phase) -> Result<Self> {
        match phase.boundary_index() {
            Some(_) => Ok(BoundaryPhase(phase)),
            None => Err(Error::PhaseNotAtLevelZero),
        }
    }

    pub fn phase(&self) -> Phase {
        self.0
    }

    pub fn index(&self) -> usize {
        self.0.boundary_index().expect("validated on construction")
    }

    pub fn from_index(i: usize) -> Result<Self> {
        BOUNDARY_PHASES
            .get(i)
            .map(|&p| BoundaryPhase(p))
            .ok_or(Error::PhaseIndexOutOfRange(i))
    }
}

pub fn phase_index(phase: Phase) -> Result<usize> {
    PHASES
        .iter()
        .position(|p| *p == phase)
        .ok_or(Error::UnknownPhase {
            server: phase.server,
            d2: phase.d2,
            d3: phase.d3,
        })
}

pub fn index_phase(i: usize) -> Result<Phase> {
    PHASES.get(i).copied().ok_or(Error::PhaseIndexOutOfRange(i))
}

/// Interior index of each level-0 phase.
pub fn boundary_to_interior() -> [usize; NUM_BOUNDARY_PHASES] {
    BOUNDARY_PHASES.map(|b| phase_index(b).expect("level-0 phases are interior phases"))
}
