//! Dense complex linear algebra helpers shared by the lifting, simulation and
//! estimation modules.

use nalgebra::{DMatrix, DVector, Dyn, QR};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative pivot size below which a triangular factor is declared rank deficient.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Householder QR factorisation of a tall matrix, reused across right-hand sides.
pub struct QrSolver {
    qr: QR<C64, Dyn, Dyn>,
    r: CMatrix,
    rows: usize,
    cols: usize,
    condition_estimate: f64,
}

impl QrSolver {
    pub fn new(a: &CMatrix) -> Result<Self> {
        Self::with_tolerance(a, DEFAULT_RANK_TOL)
    }

    pub fn with_tolerance(a: &CMatrix, rank_tol: f64) -> Result<Self> {
        let (rows, cols) = a.shape();
        if rows < cols {
            return Err(Error::RankDeficient {
                rank: rows,
                cols,
                condition: f64::INFINITY,
                hint: "; system has fewer equations than unknowns",
            });
        }
        let qr = a.clone().qr();
        let r = qr.r();
        let diag: Vec<f64> = (0..cols).map(|i| r[(i, i)].norm()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition_estimate = if cols == 0 {
            1.0
        } else if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        };
        let rank = diag.iter().filter(|&&d| d > rank_tol * max).count();
        if cols > 0 && (max == 0.0 || rank < cols) {
            return Err(Error::RankDeficient {
                rank,
                cols,
                condition: condition_estimate,
                hint: "",
            });
        }
        Ok(Self {
            qr,
            r,
            rows,
            cols,
            condition_estimate,
        })
    }

    /// Ratio of the largest to smallest pivot of R; a cheap lower bound on the
    /// 2-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    pub fn r(&self) -> &CMatrix {
        &self.r
    }

    /// Least-squares solution of `A x = b`; never forms a pseudoinverse.
    pub fn solve(&self, b: &CVector) -> CVector {
        assert_eq!(b.len(), self.rows, "right-hand side length");
        let mut qtb = b.clone();
        self.qr.q_tr_mul(&mut qtb);
        let head = qtb.rows(0, self.cols).into_owned();
        self.r
            .solve_upper_triangular(&head)
            .expect("R verified nonsingular at construction")
    }
}

/// Least-squares solve returning the solution and the residual norm.
pub fn lstsq(a: &CMatrix, b: &CVector) -> Result<(CVector, f64, f64)> {
    let solver = QrSolver::new(a)?;
    let x = solver.solve(b);
    let residual = (b - a * &x).norm();
    Ok((x, residual, solver.condition_estimate()))
}

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves a square system by LU with partial pivoting, rejecting solutions
/// whose growth `|x| |A| / |b|` exceeds `max_growth`.
pub fn solve_square(a: &CMatrix, b: &CVector, max_growth: f64) -> Result<CVector> {
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or(Error::IllConditioned { growth: f64::INFINITY })?;
    let bn = b.norm();
    if bn > 0.0 {
        let growth = x.norm() * a.norm() / bn;
        if !growth.is_finite() || growth > max_growth {
            return Err(Error::IllConditioned { growth });
        }
    }
    Ok(x)
}

/// `|a - b| / |b|` over two equally long sequences.
pub fn relative_l2(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn energy(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn to_cvector(x: &[C64]) -> CVector {
    CVector::from_column_slice(x)
}

pub fn real_vector(x: &[f64]) -> CVector {
    CVector::from_iterator(x.len(), x.iter().map(|&v| C64::new(v, 0.0)))
}

/// First `cols` columns of a matrix.
pub fn leading_columns(m: &CMatrix, cols: usize) -> CMatrix {
    m.columns(0, cols).into_owned()
}

/// Payload followed by `zeros` trailing zeros.
pub fn zero_pad(payload: &CVector, zeros: usize) -> CVector {
    let mut v = CVector::zeros(payload.len() + zeros);
    v.rows_mut(0, payload.len()).copy_from(payload);
    v
}
