//! Equilibrium bifunctions `f(x, y)` given by parsed expressions.

mod expr;
mod parser;

pub use expr::{BinOp, CmpOp, Comparison, Condition, EvalError, Expr, Extremum, Func, Var};
pub use parser::{parse, parse_condition, ParseError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ConvexBody, Grid, NodeSet, Point};

/// Tolerance for `|f(x,x)|` in [`DiagonalMode::Full`] and `f(x,x) >= -tol`
/// in [`DiagonalMode::Weak`].
pub const DIAGONAL_TOL: f64 = 1e-9;

/// Default enlargement factor for the extension body.
pub const DEFAULT_EXTENSION_SCALE: f64 = 1.5;

#[derive(Debug, Error)]
pub enum BifunctionError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expression uses {var}{index} but the problem dimension is {dim}")]
    Dimension { var: char, index: usize, dim: usize },
    #[error("extension scale must exceed 1, got {0}")]
    Scale(f64),
}

/// An enlarged body `A` around `C` together with `f̂` defined on `A × A`.
#[derive(Clone, Debug)]
pub struct Extension {
    pub scale: f64,
    pub expr: Expr,
}

#[derive(Clone, Debug)]
pub struct Bifunction {
    pub expr: Expr,
    pub dim: usize,
    pub extension: Option<Extension>,
}

fn check_indices(e: &Expr, dim: usize) -> Result<(), BifunctionError> {
    let (xi, yi) = e.max_index();
    if xi > dim {
        return Err(BifunctionError::Dimension {
            var: 'x',
            index: xi,
            dim,
        });
    }
    if yi > dim {
        return Err(BifunctionError::Dimension {
            var: 'y',
            index: yi,
            dim,
        });
    }
    Ok(())
}

impl Bifunction {
    pub fn new(expr: Expr, dim: usize) -> Result<Self, BifunctionError> {
        check_indices(&expr, dim)?;
        Ok(Bifunction {
            expr,
            dim,
            extension: None,
        })
    }

    pub fn parse(text: &str, dim: usize) -> Result<Self, BifunctionError> {
        Bifunction::new(parse(text)?, dim)
    }

    pub fn with_extension(mut self, scale: f64, expr: Expr) -> Result<Self, BifunctionError> {
        if !(scale > 1.0 && scale.is_finite()) {
            return Err(BifunctionError::Scale(scale));
        }
        check_indices(&expr, self.dim)?;
        self.extension = Some(Extension { scale, expr });
        Ok(self)
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64, EvalError> {
        self.expr.eval(x.coords(), y.coords())
    }

    /// Evaluates `f̂`, or `f` itself when no extension is attached.
    pub fn eval_extended(&self, x: &Point, y: &Point) -> Result<f64, EvalError> {
        match &self.extension {
            Some(ext) => ext.expr.eval(x.coords(), y.coords()),
            None => self.eval(x, y),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.expr.is_exact()
    }

    /// The enlarged body `A` (scaled about the centroid of `body`).
    pub fn extension_body(&self, body: &ConvexBody) -> Option<ConvexBody> {
        self.extension.as_ref().map(|e| body.scaled(e.scale))
    }

    /// Largest `|f̂ - f|` over the given pairs; `Ok(0.0)` without extension.
    pub fn extension_gap<'a>(
        &self,
        pairs: impl IntoIterator<Item = (&'a Point, &'a Point)>,
    ) -> Result<f64, EvalError> {
        if self.extension.is_none() {
            return Ok(0.0);
        }
        let mut worst: f64 = 0.0;
        for (x, y) in pairs {
            worst = worst.max((self.eval_extended(x, y)? - self.eval(x, y)?).abs());
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagonalMode {
    Full,
    Weak,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagonalViolation {
    pub x: Point,
    /// `f(x, x)`, or `None` when evaluation failed.
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagonalReport {
    pub mode: DiagonalMode,
    pub checked: usize,
    pub violations: Vec<DiagonalViolation>,
}

impl DiagonalReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DiagonalError {
    #[error("weak diagonal check needs a fixed-point mask")]
    MissingMask,
}

/// Checks `f(x,x) = 0` on every node (`Full`) or `f(x,x) >= 0` on the nodes of
/// `fixmask` (`Weak`).
pub fn check_diagonal(
    f: &Bifunction,
    grid: &Grid,
    mode: DiagonalMode,
    fixmask: Option<&NodeSet>,
) -> Result<DiagonalReport, DiagonalError> {
    let nodes: Vec<usize> = match (mode, fixmask) {
        (DiagonalMode::Weak, None) => return Err(DiagonalError::MissingMask),
        (DiagonalMode::Weak, Some(m)) => m.indices(),
        (DiagonalMode::Full, _) => (0..grid.len()).collect(),
    };
    let mut violations = Vec::new();
    for &i in &nodes {
        let x = grid.node(i);
        match f.eval(x, x) {
            Ok(v) => {
                let ok = match mode {
                    DiagonalMode::Full => v.abs() <= DIAGONAL_TOL,
                    DiagonalMode::Weak => v >= -DIAGONAL_TOL,
                };
                if !ok {
                    violations.push(DiagonalViolation {
                        x: x.clone(),
                        value: Some(v),
                        error: None,
                    });
                }
            }
            Err(e) => violations.push(DiagonalViolation {
                x: x.clone(),
                value: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(DiagonalReport {
        mode,
        checked: nodes.len(),
        violations,
    })
}
