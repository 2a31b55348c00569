//! One-dimensional smile interpolants with flat extrapolation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vols produced by least-squares fits are floored here so an oscillating
/// polynomial can never return a non-positive vol.
pub const MIN_VOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Linear,
    CubicSpline,
    QuadraticFit,
    CubicFit,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Linear,
        Scheme::CubicSpline,
        Scheme::QuadraticFit,
        Scheme::CubicFit,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Linear => "linear",
            Scheme::CubicSpline => "cubic_spline",
            Scheme::QuadraticFit => "quadratic_fit",
            Scheme::CubicFit => "cubic_fit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.label() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Interpolant {
    Linear {
        x: Vec<f64>,
        y: Vec<f64>,
    },
    /// Natural cubic spline; `m` holds second derivatives at the knots.
    Spline {
        x: Vec<f64>,
        y: Vec<f64>,
        m: Vec<f64>,
    },
    /// Polynomial in (M - 1), ascending coefficients, evaluated on the clamped range.
    Poly {
        coef: Vec<f64>,
        lo: f64,
        hi: f64,
    },
}

impl Interpolant {
    /// `x` strictly increasing, at least two points.
    pub(crate) fn new(scheme: Scheme, x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InsufficientAnchors { found: x.len() });
        }
        Ok(match scheme {
            Scheme::Linear => Interpolant::Linear {
                x: x.to_vec(),
                y: y.to_vec(),
            },
            Scheme::CubicSpline => Interpolant::Spline {
                x: x.to_vec(),
                y: y.to_vec(),
                m: natural_spline_second_derivatives(x, y),
            },
            Scheme::QuadraticFit => poly_fit(x, y, 2)?,
            Scheme::CubicFit => poly_fit(x, y, 3)?,
        })
    }

    pub(crate) fn eval(&self, m: f64) -> f64 {
        match self {
            Interpolant::Linear { x, y } => {
                let n = x.len();
                if m <= x[0] {
                    return y[0];
                }
                if m >= x[n - 1] {
                    return y[n - 1];
                }
                let i = x.partition_point(|v| *v <= m) - 1;
                let w = (m - x[i]) / (x[i + 1] - x[i]);
                y[i] + w * (y[i + 1] - y[i])
            }
            Interpolant::Spline { x, y, m: d2 } => {
                let n = x.len();
                if m <= x[0] {
                    return y[0];
                }
                if m >= x[n - 1] {
                    return y[n - 1];
                }
                let i = x.partition_point(|v| *v <= m) - 1;
                let h = x[i + 1] - x[i];
                let a = (x[i + 1] - m) / h;
                let b = (m - x[i]) / h;
                a * y[i]
                    + b * y[i + 1]
                    + ((a * a * a - a) * d2[i] + (b * b * b - b) * d2[i + 1]) * h * h / 6.0
            }
            Interpolant::Poly { coef, lo, hi } => {
                let t = m.clamp(*lo, *hi) - 1.0;
                coef.iter().rev().fold(0.0, |acc, c| acc * t + c).max(MIN_VOL)
            }
        }
    }
}

fn natural_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Tridiagonal system for interior second derivatives (Thomas algorithm).
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[j] = 2.0 * (h0 + h1);
        upper[j] = h1;
        rhs[j] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for j in 1..k {
        let lower = x[j + 1] - x[j];
        let f = lower / diag[j - 1];
        diag[j] -= f * upper[j - 1];
        rhs[j] -= f * rhs[j - 1];
    }
    let mut sol = vec![0.0; k];
    sol[k - 1] = rhs[k - 1] / diag[k - 1];
    for j in (0..k - 1).rev() {
        sol[j] = (rhs[j] - upper[j] * sol[j + 1]) / diag[j];
    }
    m[1..n - 1].copy_from_slice(&sol);
    m
}

/// Least-squares polynomial in (M - 1). With fewer anchors than
/// coefficients the degree drops to `n - 1` (an interpolating polynomial).
fn poly_fit(x: &[f64], y: &[f64], degree: usize) -> Result<Interpolant> {
    let deg = degree.min(x.len() - 1);
    let coef = least_squares_poly(x, y, deg)?;
    Ok(Interpolant::Poly {
        coef,
        lo: x[0],
        hi: x[x.len() - 1],
    })
}

pub(crate) fn least_squares_poly(x: &[f64], y: &[f64], deg: usize) -> Result<Vec<f64>> {
    let n = x.len();
    let a = DMatrix::from_fn(n, deg + 1, |i, j| (x[i] - 1.0).powi(j as i32));
    let b = DVector::from_column_slice(y);
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    let r = qr.r();
    let sol = r.solve_upper_triangular(&qtb).ok_or_else(|| {
        Error::InvalidInput("singular smile fit (repeated moneyness anchors)".into())
    })?;
    Ok(sol.iter().copied().collect())
}
