//! The cubic `B^d` bin grid over `[0,1]^d`, bin-count rules, and bin averages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::environment::LambdaFunction;
use crate::error::{Error, Result};

/// Which rate regime the bin count and presampling follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Slow,
    Fast,
    Intermediate,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "slow" => Ok(Regime::Slow),
            "fast" => Ok(Regime::Fast),
            "intermediate" => Ok(Regime::Intermediate),
            other => Err(Error::validation(
                "regime",
                format!("`{other}` is not one of slow, fast, intermediate"),
            )),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Slow => "slow",
            Regime::Fast => "fast",
            Regime::Intermediate => "intermediate",
        })
    }
}

/// `B` bins per axis in `d` dimensions. Bin indices are row-major with axis 0
/// varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BinGrid {
    bins_per_axis: usize,
    dim: usize,
}

impl BinGrid {
    pub fn new(bins_per_axis: usize, dim: usize) -> Result<Self> {
        if bins_per_axis == 0 || dim == 0 {
            return Err(Error::Config("bin grid needs B >= 1 and d >= 1".into()));
        }
        bins_per_axis
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Config(format!("{bins_per_axis}^{dim} bins overflow")))?;
        Ok(BinGrid { bins_per_axis, dim })
    }

    pub fn bins_per_axis(&self) -> usize {
        self.bins_per_axis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_bins(&self) -> usize {
        self.bins_per_axis.pow(self.dim as u32)
    }

    pub fn volume(&self) -> f64 {
        (self.bins_per_axis as f64).powi(-(self.dim as i32))
    }

    pub fn diameter(&self) -> f64 {
        (self.dim as f64).sqrt() / self.bins_per_axis as f64
    }

    /// Cell of `x`; points on the upper boundary fold into the last cell.
    pub fn bin_index(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::Input(format!(
                "context has {} coordinates, grid has {}",
                x.len(),
                self.dim
            )));
        }
        let b = self.bins_per_axis;
        let mut index = 0;
        let mut stride = 1;
        for &xi in x {
            if !(0.0..=1.0).contains(&xi) {
                return Err(Error::Input(format!("coordinate {xi} outside [0,1]")));
            }
            let cell = ((xi * b as f64).floor() as usize).min(b - 1);
            index += cell * stride;
            stride *= b;
        }
        Ok(index)
    }

    /// Per-axis cell coordinates of a bin.
    pub fn cell(&self, mut index: usize) -> Vec<usize> {
        let b = self.bins_per_axis;
        (0..self.dim)
            .map(|_| {
                let c = index % b;
                index /= b;
                c
            })
            .collect()
    }

    pub fn index_of_cell(&self, cell: &[usize]) -> usize {
        cell.iter()
            .rev()
            .fold(0, |acc, &c| acc * self.bins_per_axis + c)
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        let side = 1.0 / self.bins_per_axis as f64;
        self.cell(index)
            .iter()
            .map(|&c| (c as f64 + 0.5) * side)
            .collect()
    }

    /// Midpoint nodes inside a bin, `nodes_per_axis` per axis.
    pub fn midpoint_nodes(&self, index: usize, nodes_per_axis: usize) -> Vec<Vec<f64>> {
        let side = 1.0 / self.bins_per_axis as f64;
        let cell = self.cell(index);
        let total = nodes_per_axis.pow(self.dim as u32);
        (0..total)
            .map(|mut flat| {
                cell.iter()
                    .map(|&c| {
                        let j = flat % nodes_per_axis;
                        flat /= nodes_per_axis;
                        (c as f64 + (j as f64 + 0.5) / nodes_per_axis as f64) * side
                    })
                    .collect()
            })
            .collect()
    }
}

/// Bins per axis for horizon `T`:
/// `(T / log T)^{1/(2β+d)}` in the slow regime and `(T / log² T)^{1/(2β+d)}`
/// otherwise, scaled by `theta`, truncated, and at least 1.
pub fn select_bin_count(horizon: u64, beta: f64, dim: usize, regime: Regime, theta: f64) -> usize {
    if horizon < 3 {
        return 1;
    }
    let t = horizon as f64;
    let log_t = t.ln();
    let effective = match regime {
        Regime::Slow => t / log_t,
        Regime::Fast | Regime::Intermediate => t / (log_t * log_t),
    };
    let b = theta * effective.powf(1.0 / (2.0 * beta + dim as f64));
    (b.floor() as usize).max(1)
}

/// Default number of midpoint nodes per axis for bin averages.
pub const DEFAULT_QUAD_NODES: usize = 32;

/// `λ̄(b)`: midpoint-rule average of `λ` over a bin.
pub fn bin_average_lambda(
    grid: &BinGrid,
    bin: usize,
    lambda: &LambdaFunction,
    nodes_per_axis: usize,
) -> f64 {
    if let Some(v) = lambda.constant_value() {
        return v;
    }
    let nodes = grid.midpoint_nodes(bin, nodes_per_axis.max(1));
    nodes.iter().map(|x| lambda.eval(x)).sum::<f64>() / nodes.len() as f64
}

/// Midpoint-rule average of a vector-valued function over a bin.
pub fn bin_average_vector(
    grid: &BinGrid,
    bin: usize,
    nodes_per_axis: usize,
    width: usize,
    f: impl Fn(&[f64]) -> Vec<f64>,
) -> Vec<f64> {
    let nodes = grid.midpoint_nodes(bin, nodes_per_axis.max(1));
    let mut acc = vec![0.0; width];
    for x in &nodes {
        for (a, v) in acc.iter_mut().zip(f(x)) {
            *a += v;
        }
    }
    let n = nodes.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}
