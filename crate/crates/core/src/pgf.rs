//! Generating-function route to the level-0 probabilities.
//!
//! The partial generating functions `G_d(z) = sum_n P_{n,d} z^n` solve a
//! 12 x 12 linear system `A(z) G(z) = P(z; u)` whose right side is linear in
//! the three empty-system probabilities `u`. Zeros of `|A(z)|` inside the
//! unit interval force linear conditions on `u`.
//!
//! `A(0)` has rank 10 for every parameter set, so `|A(z)|` carries a
//! structural factor `z^2`; it gives no condition on `u` and is divided out
//! before looking for tangential (double) roots.

use nalgebra::{Complex, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::generator::Mat12;
use crate::linalg::Vec12;
use crate::model::{ModelParams, Phase, NUM_PHASES, PHASES};

type Mat12x3 = SMatrix<f64, NUM_PHASES, 3>;
type CMat12 = SMatrix<Complex<f64>, NUM_PHASES, NUM_PHASES>;
type CVec12 = SVector<Complex<f64>, NUM_PHASES>;

pub const SCAN_POINTS: usize = 10_000;
pub const SCAN_LO: f64 = -1.0 + 1e-9;
pub const SCAN_HI: f64 = 1.0 - 1e-6;
pub const ROOT_TOL: f64 = 1e-13;
/// `|det A(z)|` relative to the Hadamard bound below which `A(z)` counts
/// as singular.
pub const NEAR_SINGULAR: f64 = 1e-12;

/// `A(z) = const + z * lin`, `P(z; u) = (pc + z * pz) u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PgfSystem {
    a_const: Mat12,
    a_lin: Mat12,
    p_const: Mat12x3,
    p_lin: Mat12x3,
}

/// `u = (P_{0,(1;0,0)}, P_{0,(2;0,0)}, P_{0,(3;0,0)})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryProbs {
    pub u: [f64; 3],
}

impl BoundaryProbs {
    pub fn idle(&self) -> f64 {
        self.u.iter().sum()
    }
}

/// How the null vector of the root conditions is scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Scale so that `u1 + u2 + u3` equals the given idle probability.
    IdleTotal(f64),
    /// Scale so that `sum_d lim_{z->1} |A_d(z)| / |A(z)| = 1`, with both
    /// derivatives at 1 taken by central differences.
    DeterminantLimit,
}

impl PgfSystem {
    pub fn new(params: &ModelParams) -> Self {
        let l = params.lambda();
        let [m1, m2, m3] = params.mu();
        let [p1, p2, p3] = params.p();
        let [q1, q2, q3] = params.q();
        let mut c = Mat12::zeros();
        let mut z = Mat12::zeros();
        // 1-based (row, col) entries of the constant and z parts.
        let put = |m: &mut Mat12, r: usize, k: usize, v: f64| m[(r - 1, k - 1)] = v;

        put(&mut c, 1, 1, l + m1);
        put(&mut z, 1, 4, -l * p1);
        put(&mut c, 1, 5, -m2);
        put(&mut z, 1, 6, -l * p1);
        put(&mut c, 1, 9, -m3);
        put(&mut z, 1, 10, -l * p1);

        put(&mut c, 2, 1, -l * p2 / (p2 + p3));
        put(&mut c, 2, 2, l + m1);
        put(&mut c, 2, 10, -m3 * q1 / (q1 + q2));

        put(&mut c, 3, 1, -l * p3 / (p2 + p3));
        put(&mut c, 3, 3, l + m1);
        put(&mut c, 3, 6, -m2 * q1 / (q1 + q3));

        put(&mut c, 4, 1, -m1);
        put(&mut z, 4, 2, -l);
        put(&mut z, 4, 3, -l);
        put(&mut z, 4, 4, l + m1);

        put(&mut c, 5, 5, l + m2);
        put(&mut z, 5, 7, -l * p1 / (p1 + p3));
        put(&mut c, 5, 10, -m3 * q2 / (q1 + q2));

        put(&mut c, 6, 5, -l);
        put(&mut c, 6, 6, l + m2);
        put(&mut c, 6, 7, -m2);
        put(&mut z, 6, 8, -l);

        put(&mut c, 7, 2, -m1);
        put(&mut z, 7, 4, -l * p2);
        put(&mut z, 7, 6, -l * p2);
        put(&mut z, 7, 7, l + m2);
        put(&mut z, 7, 10, -l * p2);
        put(&mut z, 7, 12, -m3);

        put(&mut c, 8, 4, -m1 * q2 / (q2 + q3));
        put(&mut z, 8, 7, -l * p3 / (p1 + p3));
        put(&mut z, 8, 8, l + m2);

        put(&mut c, 9, 6, -m2 * q3 / (q1 + q3));
        put(&mut c, 9, 9, l + m3);
        put(&mut z, 9, 11, -l * p1 / (p1 + p2));

        put(&mut c, 10, 9, -l);
        put(&mut c, 10, 10, l + m3);
        put(&mut c, 10, 11, -m3);
        put(&mut z, 10, 12, -l);

        put(&mut c, 11, 3, -m1);
        put(&mut z, 11, 4, -l * p3);
        put(&mut z, 11, 6, -l * p3);
        put(&mut z, 11, 8, -m2);
        put(&mut z, 11, 10, -l * p3);
        put(&mut z, 11, 11, l + m3);

        put(&mut c, 12, 4, -m1 * q3 / (q2 + q3));
        put(&mut z, 12, 11, -l * p2 / (p1 + p2));
        put(&mut z, 12, 12, l + m3);

        let mut pc = Mat12x3::zeros();
        let mut pz = Mat12x3::zeros();
        // Columns: u1 = P_{0,(1;0,0)}, u2 = P_{0,(2;0,0)}, u3 = P_{0,(3;0,0)}.
        pc[(1, 2)] = -m3 * q1 / (q1 + q2);
        pc[(2, 1)] = -m2 * q1 / (q1 + q3);
        pz[(3, 0)] = m1;
        pc[(4, 2)] = -m3 * q2 / (q1 + q2);
        pc[(5, 1)] = m2;
        pc[(7, 0)] = -m1 * q2 / (q2 + q3);
        pc[(8, 1)] = -m2 * q3 / (q1 + q3);
        pc[(9, 2)] = m3;
        pc[(11, 0)] = -m1 * q3 / (q2 + q3);

        PgfSystem {
            a_const: c,
            a_lin: z,
            p_const: pc,
            p_lin: pz,
        }
    }

    pub fn a_of_z(&self, z: f64) -> Mat12 {
        self.a_const + self.a_lin * z
    }

    pub fn p_of_z(&self, z: f64, u: &[f64; 3]) -> Vec12 {
        (self.p_const + self.p_lin * z) * SVector::<f64, 3>::from(*u)
    }

    fn a_of_complex(&self, z: Complex<f64>) -> CMat12 {
        self.a_const.map(|x| Complex::new(x, 0.0)) + self.a_lin.map(|x| Complex::new(x, 0.0)) * z
    }

    fn p_of_complex(&self, z: Complex<f64>, u: &[f64; 3]) -> CVec12 {
        let c = self.p_const * SVector::<f64, 3>::from(*u);
        let l = self.p_lin * SVector::<f64, 3>::from(*u);
        c.map(|x| Complex::new(x, 0.0)) + l.map(|x| Complex::new(x, 0.0)) * z
    }

    pub fn det_a(&self, z: f64) -> f64 {
        self.a_of_z(z).lu().determinant()
    }

    /// `|A_d(z)|`: column `d` of `A(z)` replaced with `P(z; u)`.
    pub fn det_a_d(&self, d: usize, z: f64, u: &[f64; 3]) -> f64 {
        let mut m = self.a_of_z(z);
        m.set_column(d, &self.p_of_z(z, u));
        m.lu().determinant()
    }

    /// `|det A(z)|` divided by the product of row norms.
    pub fn relative_det(&self, z: f64) -> f64 {
        let a = self.a_of_z(z);
        let bound: f64 = (0..NUM_PHASES).map(|i| a.row(i).norm()).product();
        a.lu().determinant().abs() / bound
    }
}

/// Sign changes of `|A(z)|` on a uniform grid, each bracket returned.
pub fn scan_sign_changes(sys: &PgfSystem, points: usize) -> Vec<(f64, f64)> {
    let grid: Vec<f64> = (0..points)
        .map(|k| SCAN_LO + (SCAN_HI - SCAN_LO) * k as f64 / (points - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&z| sys.det_a(z)).collect();
    let mut out = Vec::new();
    for k in 0..points - 1 {
        let (a, b) = (values[k], values[k + 1]);
        if a == 0.0 {
            out.push((grid[k], grid[k]));
        } else if a.signum() != b.signum() && b != 0.0 {
            out.push((grid[k], grid[k + 1]));
        }
    }
    out
}

fn bisect(sys: &PgfSystem, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = sys.det_a(lo);
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        let f_mid = sys.det_a(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `|A(z)| / z^2`.
pub fn reduced_det(sys: &PgfSystem, z: f64) -> f64 {
    sys.det_a(z) / (z * z)
}

/// A zero of `|A(z)|` in `(-1, 1)`, away from the structural zero at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub z: f64,
    /// Touches zero without a sign change.
    pub double: bool,
}

/// Accept a sign-preserving minimum of `|A(z)|/z^2` as a double root when
/// it is this small relative to the values `TANGENCY_PROBE` away.
const TANGENCY_RATIO: f64 = 1e-8;
const TANGENCY_PROBE: f64 = 1e-3;

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > ROOT_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Sign-change roots refined by bisection, plus tangential roots found at
/// sign-preserving local minima of `|A(z)|/z^2`.
pub fn scan_roots(sys: &PgfSystem, points: usize) -> Vec<Root> {
    let mut roots: Vec<Root> = scan_sign_changes(sys, points)
        .into_iter()
        .map(|(lo, hi)| Root {
            z: if lo == hi { lo } else { bisect(sys, lo, hi) },
            double: false,
        })
        .collect();
    let grid: Vec<f64> = (0..points)
        .map(|k| SCAN_LO + (SCAN_HI - SCAN_LO) * k as f64 / (points - 1) as f64)
        .collect();
    let h: Vec<f64> = grid.iter().map(|&z| reduced_det(sys, z)).collect();
    for k in 1..points - 1 {
        let (a, b, c) = (h[k - 1], h[k], h[k + 1]);
        let same_sign = a.signum() == b.signum() && b.signum() == c.signum();
        if !(same_sign && b.abs() <= a.abs() && b.abs() <= c.abs()) {
            continue;
        }
        let z = golden_min(|x| reduced_det(sys, x).abs(), grid[k - 1], grid[k + 1]);
        let probe = reduced_det(sys, z - TANGENCY_PROBE)
            .abs()
            .max(reduced_det(sys, z + TANGENCY_PROBE).abs());
        if reduced_det(sys, z).abs() <= TANGENCY_RATIO * probe {
            roots.push(Root { z, double: true });
        }
    }
    roots.sort_by(|a, b| a.z.total_cmp(&b.z));
    roots
}

/// The two roots of `|A(z)|` in `(-1, 1)`, counted with multiplicity; a
/// double root appears twice.
pub fn find_interior_roots(sys: &PgfSystem) -> Result<[f64; 2]> {
    let roots = scan_roots(sys, SCAN_POINTS);
    let count: usize = roots.iter().map(|r| if r.double { 2 } else { 1 }).sum();
    match (count, roots.as_slice()) {
        (2, [a, b]) => Ok([a.z, b.z]),
        (2, [a]) => Ok([a.z, a.z]),
        _ => Err(Error::RootCountMismatch {
            found: count,
            roots: roots.iter().map(|r| r.z).collect(),
        }),
    }
}

/// Coefficients `c` with `|A_d(z; u)| = c . u`.
fn root_condition(sys: &PgfSystem, d: usize, z: f64) -> [f64; 3] {
    let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    basis.map(|e| sys.det_a_d(d, z, &e))
}

fn central_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let c = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * c(0.5 * h) - c(h)) / 3.0
}

/// Weights `w` with `sum_d G_d(1) = w . u`.
pub fn determinant_limit_weights(sys: &PgfSystem) -> [f64; 3] {
    const H: f64 = 1e-5;
    let denom = central_derivative(|z| sys.det_a(z), 1.0, H);
    let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    basis.map(|e| {
        (0..NUM_PHASES)
            .map(|d| central_derivative(|z| sys.det_a_d(d, z, &e), 1.0, H) / denom)
            .sum()
    })
}

pub const DEFAULT_PAIR: (Phase, Phase) = (Phase::new(1, 1, 1), Phase::new(2, 0, 0));

/// At a double root where `A(z)` loses rank 2, every `|A_d(z)|` vanishes
/// identically in `u`. Solvability of `A(z) G = P(z; u)` then requires
/// `y . P(z; u) = 0` for both left null vectors `y`.
fn range_conditions(sys: &PgfSystem, z: f64) -> Option<Vec<[f64; 3]>> {
    let svd = sys.a_of_z(z).svd(true, false);
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..NUM_PHASES).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let top = s.max();
    if s[order[1]] > 1e-9 * top {
        return None;
    }
    let u = svd.u.expect("requested");
    let coeff = sys.p_const + sys.p_lin * z;
    Some(
        order[..2]
            .iter()
            .map(|&k| {
                let y = u.column(k);
                [0, 1, 2].map(|i| y.dot(&coeff.column(i)))
            })
            .collect(),
    )
}

/// Roots closer than this are treated as one double root.
const COINCIDENT: f64 = 1e-9;

/// Solves the root conditions for `u` and scales the result.
///
/// A double root contributes `c(z) . u = 0` and `c'(z) . u = 0`, or the
/// two range conditions when `A(z)` loses rank 2 there.
pub fn solve_boundary_probs(
    sys: &PgfSystem,
    roots: &[f64; 2],
    pair: (Phase, Phase),
    norm: Normalization,
) -> Result<BoundaryProbs> {
    let ds = [pair.0.index()?, pair.1.index()?];
    let double = (roots[0] - roots[1]).abs() <= COINCIDENT;
    let groups: Vec<Vec<[f64; 3]>> = if !double {
        roots
            .iter()
            .map(|&z| ds.iter().map(|&d| root_condition(sys, d, z)).collect())
            .collect()
    } else if let Some(rows) = range_conditions(sys, roots[0]) {
        vec![rows]
    } else {
        const H: f64 = 1e-5;
        let z = roots[0];
        let slope = |d: usize| {
            let (up, down) = (root_condition(sys, d, z + H), root_condition(sys, d, z - H));
            [0, 1, 2].map(|i| (up[i] - down[i]) / (2.0 * H))
        };
        vec![
            ds.iter().map(|&d| root_condition(sys, d, z)).collect(),
            ds.iter().map(|&d| slope(d)).collect(),
        ]
    };
    // Rows of one group share a scale: a phase whose cofactor vanishes at
    // that root yields a row of rounding noise and must stay small.
    let mut m = SMatrix::<f64, 4, 3>::zeros();
    let mut row = 0;
    for rows in &groups {
        let scale = rows.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        for c in rows {
            if scale > 0.0 {
                for i in 0..3 {
                    m[(row, i)] = c[i] / scale;
                }
            }
            row += 1;
        }
    }
    let svd = m.svd(false, true);
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let sv = [s[order[0]], s[order[1]], s[order[2]]];
    if sv[1] <= 1e-8 * sv[0] || sv[2] > 1e-6 * sv[0] {
        return Err(Error::DegenerateNullSpace(sv));
    }
    let vt = svd.v_t.expect("requested");
    let null = vt.row(order[2]);
    let v = [null[0], null[1], null[2]];
    let scale = match norm {
        Normalization::IdleTotal(total) => total / (v[0] + v[1] + v[2]),
        Normalization::DeterminantLimit => {
            let w = determinant_limit_weights(sys);
            1.0 / (w[0] * v[0] + w[1] * v[1] + w[2] * v[2])
        }
    };
    let u = v.map(|x| x * scale);
    if let Some(&bad) = u.iter().find(|&&x| !(x >= -1e-12)) {
        return Err(Error::NegativeBoundaryProb(bad));
    }
    Ok(BoundaryProbs { u })
}

/// All twelve `G_d(z)` by a direct solve of `A(z) G = P(z; u)`.
pub fn evaluate_all(sys: &PgfSystem, u: &BoundaryProbs, z: f64) -> Result<Vec12> {
    if sys.relative_det(z) < NEAR_SINGULAR {
        return Err(Error::NearSingularAz(z));
    }
    sys.a_of_z(z)
        .lu()
        .solve(&sys.p_of_z(z, &u.u))
        .ok_or(Error::NearSingularAz(z))
}

/// `G_d(z)` by a direct linear solve.
pub fn evaluate_pgf(sys: &PgfSystem, u: &BoundaryProbs, d: Phase, z: f64) -> Result<f64> {
    let j = d.index()?;
    Ok(evaluate_all(sys, u, z)?[j])
}

/// `G_d(z) = |A_d(z)| / |A(z)|`.
pub fn evaluate_pgf_cramer(sys: &PgfSystem, u: &BoundaryProbs, d: Phase, z: f64) -> Result<f64> {
    let j = d.index()?;
    if sys.relative_det(z) < NEAR_SINGULAR {
        return Err(Error::NearSingularAz(z));
    }
    Ok(sys.det_a_d(j, z, &u.u) / sys.det_a(z))
}

/// First `count` Taylor coefficients of every `G_d`, by the trapezoid rule
/// on the circle `|z| = radius` with `nodes` points.
///
/// Works through the removable singularities of the solve at zeros of
/// `|A(z)|` inside the disk, provided none lies on the circle.
pub fn taylor_coefficients(
    sys: &PgfSystem,
    u: &BoundaryProbs,
    radius: f64,
    count: usize,
    nodes: usize,
) -> Result<Vec<Vec12>> {
    let mut coeffs = vec![Vec12::zeros(); count];
    for k in 0..nodes {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / nodes as f64;
        let z = Complex::from_polar(radius, theta);
        let g = sys
            .a_of_complex(z)
            .lu()
            .solve(&sys.p_of_complex(z, &u.u))
            .ok_or(Error::NearSingularAz(radius))?;
        let mut zpow = Complex::new(1.0, 0.0);
        for c in coeffs.iter_mut() {
            for d in 0..NUM_PHASES {
                c[d] += (g[d] / zpow).re;
            }
            zpow *= z;
        }
    }
    for c in coeffs.iter_mut() {
        *c /= nodes as f64;
    }
    Ok(coeffs)
}

/// Boundary probabilities with the default phase pair.
pub fn boundary_from_params(params: &ModelParams, norm: Normalization) -> Result<BoundaryProbs> {
    let sys = PgfSystem::new(params);
    let roots = find_interior_roots(&sys)?;
    solve_boundary_probs(&sys, &roots, DEFAULT_PAIR, norm)
}

/// Phases whose `G_d(0)` may be non-zero.
pub fn phases_at_zero() -> impl Iterator<Item = (usize, Phase)> {
    PHASES
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, d)| d.boundary_index().is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_blocks;

    fn params() -> ModelParams {
        ModelParams::new(3.5, [4.0, 2.5, 6.0], [0.2, 0.3, 0.5], [1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn matches_transposed_level_blocks() {
        // Row d of A(z) is column d of -(A1 + z A0 + A2 / z), times z when
        // A2 feeds phase d.
        let m = params();
        let b = build_blocks(&m);
        let sys = PgfSystem::new(&m);
        for z in [-0.7, 0.3, 0.9] {
            let a = sys.a_of_z(z);
            let fold = -(b.a1.transpose() + b.a0.transpose() * z + b.a2.transpose() / z);
            for j in 0..NUM_PHASES {
                let lifted = if b.a2.column(j).amax() > 0.0 { z } else { 1.0 };
                let expect = fold.row(j) * lifted;
                assert!((a.row(j) - expect).amax() < 1e-13, "row {}", j + 1);
            }
        }
    }

    #[test]
    fn structural_rank_at_zero() {
        for m in [params(), ModelParams::uniform(4.0, [5.0; 3]).unwrap()] {
            let s = PgfSystem::new(&m).a_of_z(0.0).svd(false, false).singular_values;
            let floor = 1e-12 * s.max();
            assert_eq!(s.iter().filter(|&&x| x <= floor).count(), 2);
        }
    }

    #[test]
    fn singular_at_one() {
        let sys = PgfSystem::new(&params());
        assert!(sys.relative_det(1.0) < 1e-12);
        assert!(sys.relative_det(0.5) > 1e-9);
    }

    #[test]
    fn right_side_is_linear() {
        let sys = PgfSystem::new(&params());
        let (a, b) = ([0.1, 0.2, 0.3], [0.05, -0.4, 0.7]);
        let sum = [a[0] + 2.0 * b[0], a[1] + 2.0 * b[1], a[2] + 2.0 * b[2]];
        for z in [-0.5, 0.0, 0.8] {
            let lhs = sys.p_of_z(z, &sum);
            let rhs = sys.p_of_z(z, &a) + sys.p_of_z(z, &b) * 2.0;
            assert!((lhs - rhs).amax() < 1e-15);
        }
    }

    #[test]
    fn golden_section_finds_minimum() {
        let x = golden_min(|x| (x - 0.3).powi(2), 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-7);
    }
}
