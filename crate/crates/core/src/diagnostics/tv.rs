use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;

/// Pair of environment-angle distributions whose TV distance has a closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TvQuery {
    /// `δ(t1)` vs `δ(t2)`.
    DiracPair { t1: f64, t2: f64 },
    /// `U(t1 − α, t1 + α)` vs `U(t2 − α, t2 + α)`.
    UniformPair { t1: f64, t2: f64, alpha: f64 },
}

impl TvQuery {
    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            TvQuery::DiracPair { t1, t2 } => t1.is_finite() && t2.is_finite(),
            TvQuery::UniformPair { t1, t2, alpha } => {
                if !(alpha > 0.0) {
                    return Err(Error::invalid(format!("alpha must be > 0, got {alpha}")));
                }
                t1.is_finite() && t2.is_finite() && alpha.is_finite()
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::invalid("tv query values must be finite"))
        }
    }
}

/// Closed-form TV distance (∫|p1 − p2|, so disjoint supports give 2).
pub fn tv_analytic(q: &TvQuery) -> Result<f64> {
    q.validate()?;
    Ok(match *q {
        TvQuery::DiracPair { t1, t2 } => {
            if t1 == t2 {
                0.0
            } else {
                2.0
            }
        }
        TvQuery::UniformPair { t1, t2, alpha } => ((t2 - t1).abs() / alpha).min(2.0),
    })
}

/// Evenly spaced points `start + k·step`, `k = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Grid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || !start.is_finite() || len < 2 {
            return Err(Error::invalid(
                "grid needs a finite start, step > 0 and at least 2 points",
            ));
        }
        Ok(Self { start, step, len })
    }

    /// Grid over `[lo, hi]` at `cells` cells per unit of width, padded by two
    /// empty cells on each side.
    pub fn covering(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) || cells == 0 {
            return Err(Error::invalid("covering grid needs hi > lo and cells > 0"));
        }
        let step = (hi - lo) / cells as f64;
        Grid::new(lo - 2.0 * step, step, cells + 5)
    }

    pub fn point(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    /// Density value at each point as the average over its cell
    /// `[x − step/2, x + step/2]`, computed from a CDF.
    pub fn cell_average(&self, cdf: impl Fn(f64) -> f64) -> Vec<f64> {
        let h = self.step;
        (0..self.len)
            .map(|k| {
                let x = self.point(k);
                (cdf(x + 0.5 * h) - cdf(x - 0.5 * h)) / h
            })
            .collect()
    }

    /// Cell-averaged density of `U(lo, hi)`.
    pub fn uniform(&self, lo: f64, hi: f64) -> Vec<f64> {
        let width = hi - lo;
        self.cell_average(|x| ((x - lo) / width).clamp(0.0, 1.0))
    }
}

/// Trapezoid rule on an evenly spaced grid.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => step * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

fn check_density(p: &[f64], step: f64, which: &str) -> Result<()> {
    if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("{which} has negative or non-finite values")));
    }
    let mass = trapezoid(p, step);
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("{which} integrates to {mass}, not 1")));
    }
    Ok(())
}

/// `∫|p1 − p2|` by the trapezoid rule; both densities must integrate to 1 within 1e-6.
pub fn tv_numeric(p1: &[f64], p2: &[f64], step: f64) -> Result<f64> {
    if p1.len() != p2.len() {
        return Err(Error::dim(format!(
            "densities on grids of {} and {} points",
            p1.len(),
            p2.len()
        )));
    }
    if !(step > 0.0) {
        return Err(Error::invalid(format!("grid step must be > 0, got {step}")));
    }
    check_density(p1, step, "p1")?;
    check_density(p2, step, "p2")?;
    let diff: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| (a - b).abs()).collect();
    Ok(trapezoid(&diff, step))
}

fn trapezoid_2d(m: &RealMatrix, step_rows: f64, step_cols: f64) -> f64 {
    let rows: Vec<f64> = (0..m.rows()).map(|r| trapezoid(m.row(r), step_cols)).collect();
    trapezoid(&rows, step_rows)
}

/// [`tv_numeric`] for densities on a 2-D tensor grid (rows × cols).
pub fn tv_numeric_2d(p1: &RealMatrix, p2: &RealMatrix, step_rows: f64, step_cols: f64) -> Result<f64> {
    if p1.rows() != p2.rows() || p1.cols() != p2.cols() {
        return Err(Error::dim("joint densities on different grids"));
    }
    if !(step_rows > 0.0) || !(step_cols > 0.0) {
        return Err(Error::invalid("grid steps must be > 0"));
    }
    for (p, which) in [(p1, "p1"), (p2, "p2")] {
        if p.as_slice().iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid(format!("{which} has negative values")));
        }
        let mass = trapezoid_2d(p, step_rows, step_cols);
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("{which} integrates to {mass}, not 1")));
        }
    }
    let diff: Vec<f64> = p1
        .as_slice()
        .iter()
        .zip(p2.as_slice())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(trapezoid_2d(
        &RealMatrix::new(p1.rows(), p1.cols(), diff)?,
        step_rows,
        step_cols,
    ))
}

/// Numeric counterpart of a uniform-pair query, on a grid of 1000 cells across the union support.
pub fn tv_uniform_numeric(t1: f64, t2: f64, alpha: f64) -> Result<f64> {
    TvQuery::UniformPair { t1, t2, alpha }.validate()?;
    let grid = Grid::covering(t1.min(t2) - alpha, t1.max(t2) + alpha, 1000)?;
    tv_numeric(
        &grid.uniform(t1 - alpha, t1 + alpha),
        &grid.uniform(t2 - alpha, t2 + alpha),
        grid.step,
    )
}
