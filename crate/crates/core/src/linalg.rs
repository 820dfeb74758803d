//! Small dense matrices: Gram eigenvalues by cyclic Jacobi, singular value
//! bounds, finite-difference Jacobians.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{KlError, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Matrix> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(KlError::arg(
                "matrix must have at least one row and one column",
            ));
        }
        if rows.iter().any(|row| row.len() != c) {
            return Err(KlError::arg("matrix rows have different lengths"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(KlError::arg("matrix entries must be finite"));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn identity(n: usize) -> Matrix {
        Matrix::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Matrix {
        let n = d.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in d.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Matrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A·Aᵀ`.
    pub fn gram(&self) -> Matrix {
        let m = self.rows;
        let mut g = Matrix {
            rows: m,
            cols: m,
            data: vec![0.0; m * m],
        };
        for i in 0..m {
            for j in i..m {
                let v: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = KlError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        (0..m.rows).map(|i| m.row(i).to_vec()).collect()
    }
}

/// Rows separated by `;`, entries by `,` or whitespace: `"2,0;0,1"`.
impl FromStr for Matrix {
    type Err = KlError;

    fn from_str(s: &str) -> Result<Matrix> {
        let rows = s
            .split(';')
            .map(|row| {
                row.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| {
                            KlError::parse(1, format!("matrix entry {t:?} is not a number"))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(rows)
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            if i > 0 {
                f.write_str(";")?;
            }
            let row: Vec<String> = self.row(i).iter().map(f64::to_string).collect();
            f.write_str(&row.join(","))?;
        }
        Ok(())
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.rows;
    if a.cols != n {
        return Err(KlError::arg("eigenvalues need a square matrix"));
    }
    let mut m = a.clone();
    let scale: f64 = m.data.iter().map(|v| v * v).sum::<f64>().sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            let mut ev: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
            ev.sort_by(f64::total_cmp);
            return Ok(ev);
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    Err(KlError::numeric(
        "Jacobi eigenvalue iteration did not converge",
    ))
}

/// `√λ_min(A·Aᵀ)` for an `m×n` matrix with `m ≤ n`.
pub fn smallest_singular_value(a: &Matrix) -> Result<f64> {
    if a.rows > a.cols {
        return Err(KlError::arg(format!(
            "smallest singular value needs rows <= columns, got {}x{}",
            a.rows, a.cols
        )));
    }
    let ev = symmetric_eigenvalues(&a.gram())?;
    Ok(ev[0].max(0.0).sqrt())
}

/// `‖A‖₂ = √λ_max(A·Aᵀ)`.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    let ev = symmetric_eigenvalues(&a.gram())?;
    Ok(ev[ev.len() - 1].max(0.0).sqrt())
}

/// Central-difference Jacobian of `f: ℝⁿ → ℝᵐ` with step `1e-6·(1 + ‖x‖)`.
pub fn jacobian_fd(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Result<Matrix> {
    let h = 1e-6 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
    let n = x.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        if fp.len() != fm.len() || fp.is_empty() {
            return Err(KlError::numeric(
                "map returned outputs of inconsistent length",
            ));
        }
        let col: Vec<f64> = fp
            .iter()
            .zip(&fm)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        if col.iter().any(|v| !v.is_finite()) {
            return Err(KlError::numeric(format!(
                "non-finite Jacobian entry at {x:?}"
            )));
        }
        cols.push(col);
    }
    let m = cols[0].len();
    Matrix::from_rows(
        (0..m)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect(),
    )
}
