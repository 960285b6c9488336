//! Small dense least-squares helpers shared by the estimators and trainers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Which factorization solves a least-squares system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    /// Householder QR of the (row-scaled) design.
    #[default]
    Qr,
    /// Cholesky factorization of the normal equations.
    NormalEquations,
}

const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares `min ||a x - y||`.
pub fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>, path: SolverPath) -> Result<DVector<f64>> {
    if a.nrows() != y.len() {
        return Err(Error::Data(format!(
            "design has {} rows but target has {}",
            a.nrows(),
            y.len()
        )));
    }
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    if a.nrows() < a.ncols() {
        return Err(Error::RankDeficient(format!(
            "{} equations for {} unknowns",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares input".into()));
    }
    match path {
        SolverPath::Qr => {
            let qr = a.clone().qr();
            let r = qr.r();
            let max_diag = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max_diag == 0.0
                || r
                    .diagonal()
                    .iter()
                    .any(|d| d.abs() <= RANK_TOL * max_diag)
            {
                return Err(Error::RankDeficient(format!(
                    "QR of {}x{} design has a vanishing pivot",
                    a.nrows(),
                    a.ncols()
                )));
            }
            let qty = qr.q().transpose() * y;
            r.solve_upper_triangular(&qty)
                .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))
        }
        SolverPath::NormalEquations => {
            let ata = a.transpose() * a;
            let aty = a.transpose() * y;
            let max_diag = ata.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let chol = ata
                .cholesky()
                .ok_or_else(|| Error::RankDeficient("normal matrix is not positive definite".into()))?;
            let l = chol.l();
            if l
                .diagonal()
                .iter()
                .any(|d| d * d <= RANK_TOL * RANK_TOL * max_diag)
            {
                return Err(Error::RankDeficient(
                    "normal matrix is numerically singular".into(),
                ));
            }
            Ok(chol.solve(&aty))
        }
    }
}

/// Weighted least squares `min sum_r w_r (a_r . x - y_r)^2` subject to `sum(x) = total`.
///
/// The last unknown is eliminated through the constraint, the rest is solved
/// unconstrained on `sqrt(w)`-scaled rows.
pub fn sum_constrained_wls(
    a: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    total: f64,
    path: SolverPath,
) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    if y.len() != rows || weights.len() != rows {
        return Err(Error::Design(format!(
            "{rows} design rows, {} values, {} weights",
            y.len(),
            weights.len()
        )));
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("constraint total".into()));
    }
    if cols == 0 {
        return Err(Error::Design("no unknowns".into()));
    }
    if cols == 1 {
        return Ok(DVector::from_element(1, total));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::Design(format!("weight {w} is not finite and positive")));
    }
    let free = cols - 1;
    let mut reduced = DMatrix::zeros(rows, free);
    let mut rhs = DVector::zeros(rows);
    for r in 0..rows {
        let sw = weights[r].sqrt();
        let last = a[(r, free)];
        for c in 0..free {
            reduced[(r, c)] = sw * (a[(r, c)] - last);
        }
        rhs[r] = sw * (y[r] - last * total);
    }
    let head = least_squares(&reduced, &rhs, path)?;
    let mut out = DVector::zeros(cols);
    let mut sum = 0.0;
    for c in 0..free {
        out[c] = head[c];
        sum += head[c];
    }
    out[free] = total - sum;
    Ok(out)
}
