use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numerics::DenseMatrix;

/// The decomposition methods known to this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    WlrPipeline,
    Wlr,
    Gtls,
    Golub,
    Iealm,
    Apg,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::WlrPipeline,
        Method::Wlr,
        Method::Gtls,
        Method::Golub,
        Method::Iealm,
        Method::Apg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::WlrPipeline => "wlr-pipeline",
            Method::Wlr => "wlr",
            Method::Gtls => "gtls",
            Method::Golub => "golub",
            Method::Iealm => "iealm",
            Method::Apg => "apg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Background/foreground split of a frames-as-columns matrix `A`.
///
/// For the low-rank approximation methods `foreground = A - background`
/// exactly. The robust PCA solvers return their sparse component as the
/// foreground, and `residual` records `||A - B - F||_F / ||A||_F`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub method: Method,
    pub background: DenseMatrix,
    pub foreground: DenseMatrix,
    /// Foreground with every entry of magnitude `<= eps1` set to zero, when
    /// the method learned such a threshold.
    pub thresholded_foreground: Option<DenseMatrix>,
    pub iterations: usize,
    pub converged: bool,
    /// Full singular value decompositions of data-sized matrices performed.
    pub svd_count: usize,
    pub residual: f64,
}

impl Decomposition {
    pub(crate) fn from_background(method: Method, a: &DenseMatrix, background: DenseMatrix) -> Self {
        let foreground = a - &background;
        Decomposition {
            method,
            background,
            foreground,
            thresholded_foreground: None,
            iterations: 0,
            converged: true,
            svd_count: 0,
            residual: 0.0,
        }
    }

    /// The foreground that evaluation should score: thresholded when available.
    pub fn evaluated_foreground(&self) -> &DenseMatrix {
        self.thresholded_foreground.as_ref().unwrap_or(&self.foreground)
    }
}

pub(crate) fn relative_residual(a: &DenseMatrix, b: &DenseMatrix, f: &DenseMatrix) -> f64 {
    let norm_a = a.norm();
    if norm_a == 0.0 {
        return (b + f).norm();
    }
    (a - b - f).norm() / norm_a
}
