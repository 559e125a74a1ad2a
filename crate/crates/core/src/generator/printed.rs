//! Entry-by-entry transcription of the published generator blocks.
//!
//! This is a test fixture: the solver never uses it. It exists so the
//! rule-derived blocks of [`super::build_blocks`] can be compared against the
//! printed matrices. Indices below are 1-based to match the printed layout.
//!
//! The printed `B0` carries one entry that breaks the generator row-sum
//! property; it is listed in [`ERRATA`] and corrected by
//! [`transcribed_blocks`]. [`printed_blocks`] keeps it verbatim.

use nalgebra::{Dim, Matrix, RawStorageMut};

use super::{Mat12, Mat12x7, Mat7, Mat7x12, QbdBlocks};
use crate::model::ModelParams;

/// Which block an erratum refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    B0,
    B1,
    B2,
    A0,
    A1,
    A2,
}

/// A printed entry known to be wrong, with its 1-based position.
#[derive(Debug, Clone, Copy)]
pub struct Erratum {
    pub block: Block,
    pub row: usize,
    pub col: usize,
    pub printed: &'static str,
    pub corrected: &'static str,
}

/// Row 4 of `B0` is the empty-`Q1` state `(0,(2;-1,-1))`: Q1 is the unique
/// shortest queue, so every arrival joins it at full rate `lambda`.
/// The printed `lambda p1` leaves row 4 of `[B1 | B0]` summing to
/// `-lambda (1 - p1)` instead of 0.
pub const ERRATA: &[Erratum] = &[Erratum {
    block: Block::B0,
    row: 4,
    col: 6,
    printed: "lambda*p1",
    corrected: "lambda",
}];

fn set<R: Dim, C: Dim, S: RawStorageMut<f64, R, C>>(
    m: &mut Matrix<f64, R, C, S>,
    r: usize,
    c: usize,
    v: f64,
) {
    m[(r - 1, c - 1)] = v;
}

/// The blocks exactly as printed, including the entries in [`ERRATA`].
pub fn printed_blocks(params: &ModelParams) -> QbdBlocks {
    let l = params.lambda();
    let [m1, m2, m3] = params.mu();
    let [p1, p2, p3] = params.p();
    let [q1, q2, q3] = params.q();

    let mut b0 = Mat7x12::zeros();
    set(&mut b0, 1, 1, l * p1);
    set(&mut b0, 2, 1, l * p1);
    set(&mut b0, 3, 5, l * p1 / (p1 + p3));
    set(&mut b0, 4, 6, l * p1);
    set(&mut b0, 5, 1, l * p1);
    set(&mut b0, 6, 9, l * p1 / (p1 + p2));
    set(&mut b0, 7, 10, l);

    let mut b1 = Mat7::zeros();
    set(&mut b1, 1, 1, -l);
    set(&mut b1, 1, 3, l * p2);
    set(&mut b1, 1, 6, l * p3);
    set(&mut b1, 2, 2, -l);
    set(&mut b1, 2, 3, l * p2);
    set(&mut b1, 2, 6, l * p3);
    set(&mut b1, 3, 2, m2);
    set(&mut b1, 3, 3, -(l + m2));
    set(&mut b1, 3, 4, l * p3 / (p1 + p3));
    set(&mut b1, 4, 4, -(l + m2));
    set(&mut b1, 4, 6, m2);
    set(&mut b1, 5, 3, l * p2);
    set(&mut b1, 5, 5, -l);
    set(&mut b1, 5, 6, l * p3);
    set(&mut b1, 6, 5, m3);
    set(&mut b1, 6, 6, -(l + m3));
    set(&mut b1, 6, 7, l * p2 / (p1 + p2));
    set(&mut b1, 7, 3, m3);
    set(&mut b1, 7, 7, -(l + m3));

    let mut b2 = Mat12x7::zeros();
    set(&mut b2, 1, 1, m1);
    set(&mut b2, 2, 3, m1);
    set(&mut b2, 3, 6, m1);
    set(&mut b2, 4, 4, m1 * q2 / (q2 + q3));
    set(&mut b2, 4, 7, m1 * q3 / (q2 + q3));

    let mut a0 = Mat12::zeros();
    set(&mut a0, 4, 1, l * p1);
    set(&mut a0, 6, 1, l * p1);
    set(&mut a0, 7, 5, l * p1 / (p1 + p3));
    set(&mut a0, 8, 6, l);
    set(&mut a0, 10, 1, l * p1);
    set(&mut a0, 11, 9, l * p1 / (p1 + p2));
    set(&mut a0, 12, 10, l);

    let mut a1 = Mat12::zeros();
    set(&mut a1, 1, 1, -(l + m1));
    set(&mut a1, 1, 2, l * p2 / (p2 + p3));
    set(&mut a1, 1, 3, l * p3 / (p2 + p3));
    set(&mut a1, 2, 2, -(l + m1));
    set(&mut a1, 2, 4, l);
    set(&mut a1, 3, 3, -(l + m1));
    set(&mut a1, 3, 4, l);
    set(&mut a1, 4, 4, -(l + m1));
    set(&mut a1, 4, 7, l * p2);
    set(&mut a1, 4, 11, l * p3);
    set(&mut a1, 5, 1, m2);
    set(&mut a1, 5, 5, -(l + m2));
    set(&mut a1, 5, 6, l);
    set(&mut a1, 6, 3, m2 * q1 / (q1 + q3));
    set(&mut a1, 6, 6, -(l + m2));
    set(&mut a1, 6, 7, l * p2);
    set(&mut a1, 6, 9, m2 * q3 / (q1 + q3));
    set(&mut a1, 6, 11, l * p3);
    set(&mut a1, 7, 6, m2);
    set(&mut a1, 7, 7, -(l + m2));
    set(&mut a1, 7, 8, l * p3 / (p1 + p3));
    set(&mut a1, 8, 8, -(l + m2));
    set(&mut a1, 8, 11, m2);
    set(&mut a1, 9, 1, m3);
    set(&mut a1, 9, 9, -(l + m3));
    set(&mut a1, 9, 10, l);
    set(&mut a1, 10, 2, m3 * q1 / (q1 + q2));
    set(&mut a1, 10, 5, m3 * q2 / (q1 + q2));
    set(&mut a1, 10, 7, l * p2);
    set(&mut a1, 10, 10, -(l + m3));
    set(&mut a1, 10, 11, l * p3);
    set(&mut a1, 11, 10, m3);
    set(&mut a1, 11, 11, -(l + m3));
    set(&mut a1, 11, 12, l * p2 / (p1 + p2));
    set(&mut a1, 12, 7, m3);
    set(&mut a1, 12, 12, -(l + m3));

    let mut a2 = Mat12::zeros();
    set(&mut a2, 1, 4, m1);
    set(&mut a2, 2, 7, m1);
    set(&mut a2, 3, 11, m1);
    set(&mut a2, 4, 8, m1 * q2 / (q2 + q3));
    set(&mut a2, 4, 12, m1 * q3 / (q2 + q3));

    QbdBlocks {
        b0,
        b1,
        b2,
        a0,
        a1,
        a2,
    }
}

/// The printed blocks with every entry of [`ERRATA`] corrected.
pub fn transcribed_blocks(params: &ModelParams) -> QbdBlocks {
    let mut blocks = printed_blocks(params);
    // B0 row 4: (0,(2;-1,-1)) -> (1,(2;0,0)) at rate lambda.
    set(&mut blocks.b0, 4, 6, params.lambda());
    blocks
}

/// The printed phase generator `A = A0 + A1 + A2`, transcribed on its own.
pub fn printed_phase_generator(params: &ModelParams) -> Mat12 {
    let l = params.lambda();
    let [m1, m2, m3] = params.mu();
    let [p1, p2, p3] = params.p();
    let [q1, q2, q3] = params.q();

    let mut a = Mat12::zeros();
    set(&mut a, 1, 1, -(l + m1));
    set(&mut a, 1, 2, l * p2 / (p2 + p3));
    set(&mut a, 1, 3, l * p3 / (p2 + p3));
    set(&mut a, 1, 4, m1);
    set(&mut a, 2, 2, -(l + m1));
    set(&mut a, 2, 4, l);
    set(&mut a, 2, 7, m1);
    set(&mut a, 3, 3, -(l + m1));
    set(&mut a, 3, 4, l);
    set(&mut a, 3, 11, m1);
    set(&mut a, 4, 1, l * p1);
    set(&mut a, 4, 4, -(l + m1));
    set(&mut a, 4, 7, l * p2);
    set(&mut a, 4, 8, m1 * q2 / (q2 + q3));
    set(&mut a, 4, 11, l * p3);
    set(&mut a, 4, 12, m1 * q3 / (q2 + q3));
    set(&mut a, 5, 1, m2);
    set(&mut a, 5, 5, -(l + m2));
    set(&mut a, 5, 6, l);
    set(&mut a, 6, 1, l * p1);
    set(&mut a, 6, 3, m2 * q1 / (q1 + q3));
    set(&mut a, 6, 6, -(l + m2));
    set(&mut a, 6, 7, l * p2);
    set(&mut a, 6, 9, m2 * q3 / (q1 + q3));
    set(&mut a, 6, 11, l * p3);
    set(&mut a, 7, 5, l * p1 / (p1 + p3));
    set(&mut a, 7, 6, m2);
    set(&mut a, 7, 7, -(l + m2));
    set(&mut a, 7, 8, l * p3 / (p1 + p3));
    set(&mut a, 8, 6, l);
    set(&mut a, 8, 8, -(l + m2));
    set(&mut a, 8, 11, m2);
    set(&mut a, 9, 1, m3);
    set(&mut a, 9, 9, -(l + m3));
    set(&mut a, 9, 10, l);
    set(&mut a, 10, 1, l * p1);
    set(&mut a, 10, 2, m3 * q1 / (q1 + q2));
    set(&mut a, 10, 5, m3 * q2 / (q1 + q2));
    set(&mut a, 10, 7, l * p2);
    set(&mut a, 10, 10, -(l + m3));
    set(&mut a, 10, 11, l * p3);
    set(&mut a, 11, 9, l * p1 / (p1 + p2));
    set(&mut a, 11, 10, m3);
    set(&mut a, 11, 11, -(l + m3));
    set(&mut a, 11, 12, l * p2 / (p1 + p2));
    set(&mut a, 12, 7, m3);
    set(&mut a, 12, 10, l);
    set(&mut a, 12, 12, -(l + m3));
    a
}
