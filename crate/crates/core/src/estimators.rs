//! Two-point gradient estimators and Monte-Carlo access to the smoothed
//! function `f̂(w) = E_u[f(w + δu)]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_unit_sphere, Direction};
use crate::linalg::axpy;
use crate::stats::Moments;

/// A black-box loss that can be queried at arbitrary points of `ℝ^d`.
///
/// Implementors count every [`TwoPointOracle::eval`] call. Objectives that
/// change from round to round (adversarial or stochastic losses) switch to
/// the next function in [`TwoPointOracle::round_reset`]; between two resets
/// every query sees the same function.
pub trait TwoPointOracle {
    fn dim(&self) -> usize;

    /// Evaluates the current loss at `w`. Counts as one query.
    fn eval(&mut self, w: &[f64]) -> Result<f64>;

    fn query_count(&self) -> u64;

    /// Moves on to the next round's loss.
    fn round_reset(&mut self) {}

    /// Evaluates the current loss without charging the learner's query
    /// budget. Used by harnesses to record `f_t(w_t)` for regret; oracles
    /// that cannot support it (external processes) return `None`.
    fn diagnostic_eval(&mut self, _w: &[f64]) -> Option<Result<f64>> {
        None
    }

    /// Declared Lipschitz constant with respect to `‖·‖₂`.
    fn lipschitz_l2(&self) -> Option<f64> {
        None
    }

    /// Declared Lipschitz constant with respect to `‖·‖₁`.
    fn lipschitz_l1(&self) -> Option<f64> {
        None
    }
}

impl<O: TwoPointOracle + ?Sized> TwoPointOracle for &mut O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&mut self, w: &[f64]) -> Result<f64> {
        (**self).eval(w)
    }
    fn query_count(&self) -> u64 {
        (**self).query_count()
    }
    fn round_reset(&mut self) {
        (**self).round_reset()
    }
    fn diagnostic_eval(&mut self, w: &[f64]) -> Option<Result<f64>> {
        (**self).diagnostic_eval(w)
    }
    fn lipschitz_l2(&self) -> Option<f64> {
        (**self).lipschitz_l2()
    }
    fn lipschitz_l1(&self) -> Option<f64> {
        (**self).lipschitz_l1()
    }
}

/// Oracle over a fixed closure `f: ℝ^d → ℝ`.
pub struct FnOracle<F> {
    f: F,
    dim: usize,
    queries: u64,
    lipschitz_l2: Option<f64>,
    lipschitz_l1: Option<f64>,
}

impl<F: FnMut(&[f64]) -> f64> FnOracle<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnOracle {
            f,
            dim,
            queries: 0,
            lipschitz_l2: None,
            lipschitz_l1: None,
        }
    }

    pub fn with_lipschitz_l2(mut self, g2: f64) -> Self {
        self.lipschitz_l2 = Some(g2);
        self
    }

    pub fn with_lipschitz_l1(mut self, g1: f64) -> Self {
        self.lipschitz_l1 = Some(g1);
        self
    }
}

impl<F: FnMut(&[f64]) -> f64> TwoPointOracle for FnOracle<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&mut self, w: &[f64]) -> Result<f64> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: w.len(),
            });
        }
        self.queries += 1;
        Ok((self.f)(w))
    }

    fn query_count(&self) -> u64 {
        self.queries
    }

    fn diagnostic_eval(&mut self, w: &[f64]) -> Option<Result<f64>> {
        Some(Ok((self.f)(w)))
    }

    fn lipschitz_l2(&self) -> Option<f64> {
        self.lipschitz_l2
    }

    fn lipschitz_l1(&self) -> Option<f64> {
        self.lipschitz_l1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// `(d/2δ)(f(w+δu) − f(w−δu))u`
    Symmetric,
    /// `(d/δ)(f(w+δu) − f(w))u`
    Anchored,
}

/// A single gradient estimate together with the raw query values that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    pub u: Direction,
    pub delta: f64,
    pub kind: EstimatorKind,
    /// `f(w + δu)`
    pub f_plus: f64,
    /// `f(w − δu)` for the symmetric estimator, `f(w)` for the anchored one.
    pub f_minus_or_anchor: f64,
    pub queries_used: u32,
}

impl GradientEstimate {
    /// Scalar `s` with `g = s·u`.
    pub fn coefficient(&self) -> f64 {
        let d = self.u.dim() as f64;
        match self.kind {
            EstimatorKind::Symmetric => {
                d / (2.0 * self.delta) * (self.f_plus - self.f_minus_or_anchor)
            }
            EstimatorKind::Anchored => d / self.delta * (self.f_plus - self.f_minus_or_anchor),
        }
    }
}

fn query<O: TwoPointOracle + ?Sized>(oracle: &mut O, point: Vec<f64>) -> Result<f64> {
    let v = oracle.eval(&point)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::OracleFailure {
            point,
            message: format!("non-finite value {v}"),
        })
    }
}

fn check_inputs(dim: usize, w: &[f64], delta: f64, u: &Direction) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param(
            "delta",
            format!("{delta} must be positive and finite"),
        ));
    }
    if w.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w.len(),
        });
    }
    if u.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: u.dim(),
        });
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("w"));
    }
    Ok(())
}

/// Symmetric two-point estimate `(d/2δ)(f(w+δu) − f(w−δu))u`. Issues
/// exactly two queries.
pub fn two_point_gradient<O: TwoPointOracle + ?Sized>(
    oracle: &mut O,
    w: &[f64],
    delta: f64,
    u: &Direction,
) -> Result<GradientEstimate> {
    check_inputs(oracle.dim(), w, delta, u)?;
    let f_plus = query(oracle, axpy(w, delta, u.coords()))?;
    let f_minus = query(oracle, axpy(w, -delta, u.coords()))?;
    let s = u.dim() as f64 / (2.0 * delta) * (f_plus - f_minus);
    Ok(GradientEstimate {
        g: u.coords().iter().map(|x| s * x).collect(),
        u: u.clone(),
        delta,
        kind: EstimatorKind::Symmetric,
        f_plus,
        f_minus_or_anchor: f_minus,
        queries_used: 2,
    })
}

/// Anchored estimate `(d/δ)(f(w+δu) − f(w))u`. Issues exactly two queries.
pub fn anchored_gradient<O: TwoPointOracle + ?Sized>(
    oracle: &mut O,
    w: &[f64],
    delta: f64,
    u: &Direction,
) -> Result<GradientEstimate> {
    check_inputs(oracle.dim(), w, delta, u)?;
    let f_plus = query(oracle, axpy(w, delta, u.coords()))?;
    let f_anchor = query(oracle, w.to_vec())?;
    let s = u.dim() as f64 / delta * (f_plus - f_anchor);
    Ok(GradientEstimate {
        g: u.coords().iter().map(|x| s * x).collect(),
        u: u.clone(),
        delta,
        kind: EstimatorKind::Anchored,
        f_plus,
        f_minus_or_anchor: f_anchor,
        queries_used: 2,
    })
}

/// Dispatches on `kind`.
pub fn estimate_gradient<O: TwoPointOracle + ?Sized>(
    kind: EstimatorKind,
    oracle: &mut O,
    w: &[f64],
    delta: f64,
    u: &Direction,
) -> Result<GradientEstimate> {
    match kind {
        EstimatorKind::Symmetric => two_point_gradient(oracle, w, delta, u),
        EstimatorKind::Anchored => anchored_gradient(oracle, w, delta, u),
    }
}

/// A Monte-Carlo scalar estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// A Monte-Carlo vector estimate with per-coordinate standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McVector {
    pub value: Vec<f64>,
    pub std_error: Vec<f64>,
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < 2 {
        return Err(Error::param("n_samples", format!("{n_samples} < 2")));
    }
    Ok(())
}

/// Monte-Carlo estimate of `f̂(w) = E_u[f(w + δu)]`.
pub fn smoothed_value<O, R>(
    oracle: &mut O,
    w: &[f64],
    delta: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<McEstimate>
where
    O: TwoPointOracle + ?Sized,
    R: Rng + ?Sized,
{
    check_samples(n_samples)?;
    let d = oracle.dim();
    let mut m = Moments::new();
    for _ in 0..n_samples {
        let u = sample_unit_sphere(d, rng)?;
        check_inputs(d, w, delta, &u)?;
        m.push(query(oracle, axpy(w, delta, u.coords()))?);
    }
    Ok(McEstimate {
        value: m.mean(),
        std_error: m.std_error(),
    })
}

/// Monte-Carlo estimate of `∇f̂(w)` as the mean of `n_samples` symmetric
/// two-point estimates with fresh directions.
pub fn smoothed_gradient_mc<O, R>(
    oracle: &mut O,
    w: &[f64],
    delta: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<McVector>
where
    O: TwoPointOracle + ?Sized,
    R: Rng + ?Sized,
{
    check_samples(n_samples)?;
    let d = oracle.dim();
    let mut acc = vec![Moments::new(); d];
    for _ in 0..n_samples {
        let u = sample_unit_sphere(d, rng)?;
        let est = two_point_gradient(oracle, w, delta, &u)?;
        for (m, g) in acc.iter_mut().zip(&est.g) {
            m.push(*g);
        }
    }
    Ok(McVector {
        value: acc.iter().map(Moments::mean).collect(),
        std_error: acc.iter().map(Moments::std_error).collect(),
    })
}
