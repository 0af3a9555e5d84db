//! Fit diagnostics and the plurality baseline.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ingest::AnswerPredictionMatrix;
use crate::rank::{AnswerMatrix, ClusterHierarchy, Ranking};

mod eval;

pub use eval::{evaluate, Aggregate, EvalResult, Question, QuestionResult, EVAL_SCHEMA};

/// Tolerance for `W W^T = I`.
pub const SEMI_ORTHOGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// `||M - W^T Lambda W||_F^2` with `Lambda = Up(W M W^T)`.
    pub lack_of_fit_raw: f64,
    /// `lack_of_fit_raw / ||M||_F^2`; 0 for an all-zero matrix.
    pub lack_of_fit_normalized: f64,
    pub residual_matrix: DMatrix<f64>,
}

/// A solution whose lack-of-fit can be measured.
#[derive(Debug, Clone, Copy)]
pub enum Solution<'a> {
    Order(&'a Ranking),
    Clusters(&'a ClusterHierarchy),
}

impl<'a> From<&'a Ranking> for Solution<'a> {
    fn from(r: &'a Ranking) -> Self {
        Solution::Order(r)
    }
}

impl<'a> From<&'a ClusterHierarchy> for Solution<'a> {
    fn from(h: &'a ClusterHierarchy) -> Self {
        Solution::Clusters(h)
    }
}

/// Permutation matrix with row `i` selecting answer `order[i]`.
pub fn permutation_matrix(order: &[usize]) -> DMatrix<f64> {
    let n = order.len();
    let mut w = DMatrix::zeros(n, n);
    for (i, &a) in order.iter().enumerate() {
        w[(i, a)] = 1.0;
    }
    w
}

/// Upper triangle (diagonal included) of a square matrix.
pub fn upper(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i <= j { m[(i, j)] } else { 0.0 })
}

/// Raw lack-of-fit and residual of `m` at weight matrix `w` (rows = types in
/// hierarchy order), with `Lambda = Up(w m w^T)`.
pub(crate) fn residual_for(m: &DMatrix<f64>, w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let lambda = upper(&(w * m * w.transpose()));
    let residual = m - w.transpose() * lambda * w;
    (residual.norm_squared(), residual)
}

/// Lack-of-fit of a ranking or clustering against the matrix it came from.
pub fn lack_of_fit<'a, M: AnswerMatrix + ?Sized>(m: &M, solution: impl Into<Solution<'a>>) -> Result<FitReport> {
    let values = m.values();
    let n = values.nrows();
    if values.ncols() != n {
        return Err(Error::NotSquare { rows: n, cols: values.ncols() });
    }
    let w = match solution.into() {
        Solution::Order(r) => {
            let mut seen = vec![false; n];
            if r.indices.len() != n || r.indices.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::DimensionMismatch(format!(
                    "order of length {} is not a permutation of {n} answers",
                    r.indices.len()
                )));
            }
            permutation_matrix(&r.indices)
        }
        Solution::Clusters(h) => {
            if h.w_unit.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "clustering covers {} answers, matrix has {n}",
                    h.w_unit.ncols()
                )));
            }
            h.w_unit.clone()
        }
    };
    let (raw, residual_matrix) = residual_for(&values, &w);
    let total = values.norm_squared();
    Ok(FitReport {
        lack_of_fit_raw: raw,
        lack_of_fit_normalized: if total > 0.0 { raw / total } else { 0.0 },
        residual_matrix,
    })
}

/// Checks `W W^T = I` and the one-nonzero-per-column structure.
pub fn check_semi_orthogonal(w: &DMatrix<f64>) -> Result<()> {
    for (a, col) in w.column_iter().enumerate() {
        if col.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::NotSemiOrthogonal(format!("column {a} has a negative or non-finite entry")));
        }
        let nonzero = col.iter().filter(|&&x| x != 0.0).count();
        if nonzero != 1 {
            return Err(Error::NotSemiOrthogonal(format!("column {a} has {nonzero} non-zero entries")));
        }
    }
    let k = w.nrows();
    let dev = (w * w.transpose() - DMatrix::<f64>::identity(k, k)).amax();
    if dev > SEMI_ORTHOGONAL_TOL {
        return Err(Error::NotSemiOrthogonal(format!("W W^T deviates from I by {dev:e}")));
    }
    Ok(())
}

/// For semi-orthogonal `w`, the residual at `Lambda = Up(W M W^T)` equals
/// `||M||_F^2 - sum_{i <= j} (W M W^T)_{ij}^2`. Returns the absolute gap between the
/// two sides.
pub fn lemma3_identity_check(m: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() || w.ncols() != m.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "W is {}x{}, M is {}x{}",
            w.nrows(),
            w.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    check_semi_orthogonal(w)?;
    let (lhs, _) = residual_for(m, w);
    let rhs = m.norm_squared() - upper(&(w * m * w.transpose())).norm_squared();
    Ok((lhs - rhs).abs())
}

/// Most-supported answer; ties go to the lexicographically smallest label.
pub fn plurality(matrix: &AnswerPredictionMatrix) -> &str {
    let mut best = 0;
    for i in 1..matrix.len() {
        let (s, b) = (matrix.support[i], matrix.support[best]);
        if s > b || (s == b && matrix.answers[i] < matrix.answers[best]) {
            best = i;
        }
    }
    &matrix.answers[best]
}
