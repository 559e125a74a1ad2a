//! Matrix-geometric solution: `P_n = P_1 R^(n-1)` for `n >= 1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generator::{build_blocks, Mat12, QbdBlocks};
use crate::linalg::{spectral_radius, to_dynamic, Vec12, Vec7};
use crate::model::{ModelParams, Phase, NUM_BOUNDARY_PHASES, NUM_PHASES};
use crate::stability::{block_drift, drift_is_negative};

/// Bound on `|A0 + R A1 + R^2 A2|_max` accepted from either solver.
pub const R_RESIDUAL_BOUND: f64 = 1e-11;
/// Bound on the normalization defect.
pub const NORMALIZATION_BOUND: f64 = 1e-10;
const NEGATIVE_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RSolver {
    /// `R <- -(A0 + R^2 A2) A1^-1` from `R = 0`.
    Functional,
    /// Logarithmic reduction for `G`, then `R = A0 (-A1 - A0 G)^-1`.
    LogReduction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub solver: RSolver,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            max_iter: 1_000_000,
            solver: RSolver::Functional,
        }
    }
}

/// Rate matrix and the number of iterations used to get it.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    pub r: Mat12,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgSolution {
    pub r: Mat12,
    pub p0: Vec7,
    pub p1: Vec12,
    /// `sum_{n>=1} P_n = P_1 (I-R)^-1`
    pub sum1: Vec12,
    /// `sum_{n>=1} n P_n = P_1 (I-R)^-2`
    pub sum_n: Vec12,
    /// `sum_{n>=1} n(n-1) P_n = 2 P_1 R (I-R)^-3`
    pub sum_n2m: Vec12,
    pub iterations: usize,
    pub residual: f64,
}

pub fn r_residual(blocks: &QbdBlocks, r: &Mat12) -> f64 {
    (blocks.a0 + r * blocks.a1 + r * r * blocks.a2).amax()
}

/// Minimal non-negative solution of `A0 + R A1 + R^2 A2 = 0`.
pub fn solve_r(blocks: &QbdBlocks, opts: &SolveOptions) -> Result<RateMatrix> {
    let (up, down, _) = block_drift(blocks)?;
    if !drift_is_negative(up, down) {
        return Err(Error::Unstable { drift: up - down });
    }
    let (r, iterations) = match opts.solver {
        RSolver::Functional => functional_iteration(blocks, opts)?,
        RSolver::LogReduction => log_reduction(blocks, opts)?,
    };
    let residual = r_residual(blocks, &r);
    if !(residual <= R_RESIDUAL_BOUND) {
        return Err(Error::ResidualTooLarge { residual });
    }
    Ok(RateMatrix {
        r,
        iterations,
        residual,
    })
}

fn functional_iteration(blocks: &QbdBlocks, opts: &SolveOptions) -> Result<(Mat12, usize)> {
    let a1_inv = blocks.a1.try_inverse().ok_or(Error::SingularA1)?;
    let c = -blocks.a0 * a1_inv;
    let d = -blocks.a2 * a1_inv;
    let mut r = Mat12::zeros();
    let mut change = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let next = c + r * r * d;
        let prev = change;
        change = (next - r).amax();
        r = next;
        // Linear convergence: remaining error is about change / (1 - ratio).
        let ratio = if prev.is_finite() && prev > 0.0 {
            (change / prev).min(1.0)
        } else {
            0.0
        };
        if change <= opts.tol * (1.0 - ratio) {
            return Ok((r, k));
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        change,
    })
}

fn log_reduction(blocks: &QbdBlocks, opts: &SolveOptions) -> Result<(Mat12, usize)> {
    let id = Mat12::identity();
    let neg_a1_inv = (-blocks.a1).try_inverse().ok_or(Error::SingularA1)?;
    let mut h = neg_a1_inv * blocks.a0;
    let mut l = neg_a1_inv * blocks.a2;
    let mut g = l;
    let mut t = h;
    let mut change = f64::INFINITY;
    for k in 1..=opts.max_iter.min(200) {
        let u = h * l + l * h;
        let inv = (id - u)
            .try_inverse()
            .ok_or(Error::SingularSystem("logarithmic reduction"))?;
        h = inv * (h * h);
        l = inv * (l * l);
        let step = t * l;
        g += step;
        t *= h;
        change = step.amax();
        let defect = (id * Vec12::repeat(1.0) - g * Vec12::repeat(1.0)).amax();
        if defect <= opts.tol && change <= opts.tol {
            let r = blocks.a0
                * (-(blocks.a1 + blocks.a0 * g))
                    .try_inverse()
                    .ok_or(Error::SingularSystem("R from G"))?;
            return Ok((r, k));
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter.min(200),
        change,
    })
}

/// Level-0 and level-1 probabilities.
///
/// The 19 balance equations `[P0 P1] [[B1, B0], [B2, A1 + R A2]] = 0` have
/// rank 18; together with the normalization row they form a consistent
/// 20 x 19 system, solved in the least-squares sense.
pub fn solve_boundary(blocks: &QbdBlocks, r: &Mat12) -> Result<(Vec7, Vec12)> {
    const B: usize = NUM_BOUNDARY_PHASES;
    const I: usize = NUM_PHASES;
    let n = B + I;
    let inner = blocks.a1 + r * blocks.a2;
    let id = Mat12::identity();
    let fund = (id - r)
        .try_inverse()
        .ok_or(Error::SingularSystem("I - R"))?;
    let p1_weights = fund * Vec12::repeat(1.0);

    // Rows of `system` are equations; unknown x = [P0, P1] as a column.
    let mut system = DMatrix::<f64>::zeros(n + 1, n);
    for col in 0..B {
        for i in 0..B {
            system[(col, i)] = blocks.b1[(i, col)];
        }
        for i in 0..I {
            system[(col, B + i)] = blocks.b2[(i, col)];
        }
    }
    for col in 0..I {
        for i in 0..B {
            system[(B + col, i)] = blocks.b0[(i, col)];
        }
        for i in 0..I {
            system[(B + col, B + i)] = inner[(i, col)];
        }
    }
    // Scale the normalization row to the size of the balance rows.
    let scale = system.amax().max(1.0);
    for i in 0..B {
        system[(n, i)] = scale;
    }
    for i in 0..I {
        system[(n, B + i)] = scale * p1_weights[i];
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    rhs[n] = scale;

    let svd = system.clone().svd(true, true);
    let smallest = svd.singular_values.min();
    if smallest <= 1e-13 * svd.singular_values.max() {
        return Err(Error::SingularBoundarySystem);
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|_| Error::SingularBoundarySystem)?;
    for (index, &value) in x.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::SingularBoundarySystem);
        }
        if value < NEGATIVE_FLOOR {
            return Err(Error::NegativeProbability { index, value });
        }
    }
    let p0 = Vec7::from_iterator(x.rows(0, B).iter().copied());
    let p1 = Vec12::from_iterator(x.rows(B, I).iter().copied());
    Ok((p0, p1))
}

/// Full pipeline with default options.
pub fn solve(params: &ModelParams) -> Result<MgSolution> {
    solve_with(params, &SolveOptions::default())
}

pub fn solve_with(params: &ModelParams, opts: &SolveOptions) -> Result<MgSolution> {
    let blocks = build_blocks(params);
    solve_blocks(&blocks, opts)
}

pub fn solve_blocks(blocks: &QbdBlocks, opts: &SolveOptions) -> Result<MgSolution> {
    let rate = solve_r(blocks, opts)?;
    let r = rate.r;
    let (p0, p1) = solve_boundary(blocks, &r)?;
    let fund = (Mat12::identity() - r)
        .try_inverse()
        .ok_or(Error::SingularSystem("I - R"))?;
    let p1t = p1.transpose();
    let sum1 = (p1t * fund).transpose();
    let sum_n = (p1t * fund * fund).transpose();
    let sum_n2m = (p1t * r * fund * fund * fund).transpose() * 2.0;
    let sol = MgSolution {
        r,
        p0,
        p1,
        sum1,
        sum_n,
        sum_n2m,
        iterations: rate.iterations,
        residual: rate.residual,
    };
    let defect = sol.normalization_defect();
    if !(defect <= NORMALIZATION_BOUND) {
        return Err(Error::SingularBoundarySystem);
    }
    Ok(sol)
}

impl MgSolution {
    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.r)
    }

    /// `|P0 e + P1 (I-R)^-1 e - 1|`
    pub fn normalization_defect(&self) -> f64 {
        (self.p0.sum() + self.sum1.sum() - 1.0).abs()
    }

    /// `P_n` for `n >= 1`.
    pub fn level(&self, n: u64) -> Vec12 {
        assert!(n >= 1, "level 0 has its own phase set");
        let mut v = self.p1.transpose();
        for _ in 1..n {
            v *= self.r;
        }
        v.transpose()
    }

    /// `P(L1 > n)`, computed as `P_1 R^n (I-R)^-1 e`.
    pub fn tail_mass(&self, n: u64) -> f64 {
        if n == 0 {
            return self.sum1.sum();
        }
        let fund = (Mat12::identity() - self.r).try_inverse().unwrap_or_else(Mat12::zeros);
        (self.level(n).transpose() * self.r * fund).sum()
    }

    /// Level-1 probabilities keyed like the dense helpers.
    pub fn p1_dynamic(&self) -> DVector<f64> {
        DVector::from_iterator(NUM_PHASES, self.p1.iter().copied())
    }

    pub fn r_dynamic(&self) -> DMatrix<f64> {
        to_dynamic(&self.r)
    }
}

/// `P_{n,d}`.
pub fn level_probability(sol: &MgSolution, n: u64, d: Phase) -> Result<f64> {
    if n == 0 {
        let i = d.boundary_index().ok_or(Error::PhaseNotAtLevelZero)?;
        return Ok(sol.p0[i]);
    }
    let j = d.index()?;
    Ok(sol.level(n)[j])
}

/// `G_d(z) = P_{0,d} 1{d at level 0} + z [P_1 (I - zR)^-1]_d`.
pub fn pgf_from_mg(sol: &MgSolution, d: Phase, z: f64) -> Result<f64> {
    let j = d.index()?;
    let base = d.boundary_index().map_or(0.0, |i| sol.p0[i]);
    let m = (Mat12::identity() - sol.r * z)
        .try_inverse()
        .ok_or(Error::SingularSystem("I - zR"))?;
    Ok(base + z * (sol.p1.transpose() * m)[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BOUNDARY_PHASES, PHASES};

    fn symmetric() -> ModelParams {
        ModelParams::uniform(4.0, [5.0; 3]).unwrap()
    }

    /// Swapping queues 2 and 3 keeps the level and permutes the phases.
    fn swap23(d: Phase) -> Phase {
        let server = [1, 3, 2][d.server_index()];
        Phase::new(server, d.d3, d.d2)
    }

    #[test]
    fn symmetric_solution() {
        let sol = solve(&symmetric()).unwrap();
        assert!(sol.residual <= R_RESIDUAL_BOUND);
        assert!(sol.spectral_radius() < 1.0);
        assert!(sol.normalization_defect() <= 1e-12);
        assert!(sol.r.iter().all(|&x| x >= -1e-14));
        let u = [sol.p0[0], sol.p0[1], sol.p0[4]];
        assert!((u[0] - u[1]).abs() < 1e-12 && (u[1] - u[2]).abs() < 1e-12);
        for (i, &d) in PHASES.iter().enumerate() {
            let j = swap23(d).index().unwrap();
            assert!((sol.p1[i] - sol.p1[j]).abs() < 1e-12, "{d} vs {}", swap23(d));
        }
        for (i, &d) in BOUNDARY_PHASES.iter().enumerate() {
            let j = swap23(d).boundary_index().unwrap();
            assert!((sol.p0[i] - sol.p0[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn solvers_agree() {
        let m = ModelParams::new(4.0, [4.5, 3.0, 5.0], [1.0 / 3.0; 3], [1.0; 3]).unwrap();
        let b = build_blocks(&m);
        let f = solve_r(&b, &SolveOptions::default()).unwrap();
        let lr = solve_r(
            &b,
            &SolveOptions {
                solver: RSolver::LogReduction,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((f.r - lr.r).amax() < 1e-11, "{}", (f.r - lr.r).amax());
        assert!(lr.iterations < f.iterations);
    }

    #[test]
    fn unstable_is_refused() {
        let b = build_blocks(&ModelParams::uniform(5.0, [5.0; 3]).unwrap());
        assert!(matches!(
            solve_r(&b, &SolveOptions::default()),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn tiny_iteration_budget() {
        let b = build_blocks(&symmetric());
        let opts = SolveOptions {
            max_iter: 3,
            ..Default::default()
        };
        assert!(matches!(solve_r(&b, &opts), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn boundary_equations_hold() {
        let m = ModelParams::new(3.0, [4.0, 5.0, 6.0], [0.2, 0.3, 0.5], [1.0, 2.0, 3.0]).unwrap();
        let b = build_blocks(&m);
        let sol = solve(&m).unwrap();
        let (p0t, p1t) = (sol.p0.transpose(), sol.p1.transpose());
        assert!((p0t * b.b1 + p1t * b.b2).amax() <= 1e-10);
        assert!((p0t * b.b0 + p1t * (b.a1 + sol.r * b.a2)).amax() <= 1e-10);
    }

    #[test]
    fn moment_sums_round_trip() {
        let sol = solve(&symmetric()).unwrap();
        let id = Mat12::identity();
        let back = sol.sum1.transpose() * (id - sol.r);
        assert!((back - sol.p1.transpose()).amax() < 1e-12);
        let back = sol.sum_n.transpose() * (id - sol.r) * (id - sol.r);
        assert!((back - sol.p1.transpose()).amax() < 1e-12);
        // Direct partial sums.
        let mut s1 = Vec12::zeros();
        let mut sn = Vec12::zeros();
        let mut sn2 = Vec12::zeros();
        for n in 1..400u64 {
            let v = sol.level(n);
            let nf = n as f64;
            s1 += v;
            sn += v * nf;
            sn2 += v * (nf * (nf - 1.0));
        }
        assert!((s1 - sol.sum1).amax() < 1e-12);
        assert!((sn - sol.sum_n).amax() < 1e-11);
        assert!((sn2 - sol.sum_n2m).amax() < 1e-10);
    }

    #[test]
    fn level_probabilities() {
        let sol = solve(&symmetric()).unwrap();
        let d = Phase::new(2, 0, 0);
        assert_eq!(level_probability(&sol, 1, d).unwrap(), sol.p1[5]);
        assert_eq!(level_probability(&sol, 0, d).unwrap(), sol.p0[1]);
        assert!(matches!(
            level_probability(&sol, 0, Phase::new(1, 1, 1)),
            Err(Error::PhaseNotAtLevelZero)
        ));
        let mut total = sol.p0.sum();
        let mut prev = total;
        for n in 1..200 {
            total += sol.level(n).sum();
            assert!(total >= prev && total <= 1.0 + 1e-12);
            prev = total;
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert!((sol.tail_mass(10) - (1.0 - sol.p0.sum() - (1..=10).map(|n| sol.level(n).sum()).sum::<f64>())).abs() < 1e-13);
    }

    #[test]
    fn pgf_closed_form() {
        let sol = solve(&symmetric()).unwrap();
        let mut at_one = 0.0;
        for (i, &d) in PHASES.iter().enumerate() {
            let g0 = pgf_from_mg(&sol, d, 0.0).unwrap();
            let expect = d.boundary_index().map_or(0.0, |b| sol.p0[b]);
            assert_eq!(g0, expect);
            let g1 = pgf_from_mg(&sol, d, 1.0).unwrap();
            assert!((g1 - expect - sol.sum1[i]).abs() < 1e-13);
            at_one += g1;
        }
        assert!((at_one - 1.0).abs() < 1e-12);
    }
}
