//! Probe directions, feasible sets and the mirror (argmax) step for the
//! Euclidean-ball and probability-simplex geometries.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm1, norm2, norm_inf};

/// Tolerance used by domain membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Floor applied to exponential-weights probabilities so that downstream
/// logarithms never see an exact zero.
pub const PROB_FLOOR: f64 = 1e-300;

/// Fitted bound on `(E‖u‖∞⁴)^{1/4} / sqrt(ln d / d)` for `u` uniform on the
/// sphere. The supremum over `d` is attained at `d = 2` (≈1.55); see the
/// `diagnostics::infinity_norm_moment` scan.
pub const P_STAR_CONSTANT: f64 = 1.6;

/// A point on the Euclidean unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Wraps `coords`, which must already have unit Euclidean norm.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let n = norm2(&coords);
        if !n.is_finite() {
            return Err(Error::NonFinite("direction"));
        }
        if (n - 1.0).abs() > MEMBERSHIP_TOL {
            return Err(Error::param("direction", format!("norm {n} is not 1")));
        }
        Ok(Direction(coords))
    }

    /// Rescales a nonzero vector onto the sphere.
    pub fn normalize(mut v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let n = norm2(&v);
        if !n.is_finite() {
            return Err(Error::NonFinite("direction"));
        }
        if n == 0.0 {
            return Err(Error::param("direction", "zero vector"));
        }
        v.iter_mut().for_each(|x| *x /= n);
        Ok(Direction(v))
    }

    /// Standard basis vector `e_i` in `d` dimensions.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if d == 0 || i >= d {
            return Err(Error::InvalidDimension(d));
        }
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Ok(Direction(v))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Direction {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Draws a direction uniformly from the unit sphere in `d` dimensions by
/// normalizing a standard Gaussian vector.
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Direction> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let mut v = vec![0.0; d];
    loop {
        for x in v.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        let n = norm2(&v);
        // n == 0 has probability zero; resample instead of dividing by it.
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
            return Ok(Direction(v));
        }
    }
}

/// A closed convex feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// `{w : ‖w‖₂ ≤ radius}`
    L2Ball { dim: usize, radius: f64 },
    /// The probability simplex in `dim > 1` dimensions.
    Simplex { dim: usize },
    /// Homothety of `base` about its center: `w` belongs to the set iff
    /// `c + (w − c)/factor ∈ base`. For a ball centered at the origin this is
    /// `w/factor ∈ base`; for the simplex it is the mixture
    /// `factor·y + (1 − factor)·uniform`.
    Shrunk { base: Box<Domain>, factor: f64 },
}

impl Domain {
    pub fn l2_ball(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::param(
                "radius",
                format!("{radius} must be positive and finite"),
            ));
        }
        Ok(Domain::L2Ball { dim, radius })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Domain::Simplex { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::L2Ball { dim, .. } | Domain::Simplex { dim } => *dim,
            Domain::Shrunk { base, .. } => base.dim(),
        }
    }

    /// The un-shrunk set this domain was derived from.
    pub fn root(&self) -> &Domain {
        match self {
            Domain::Shrunk { base, .. } => base.root(),
            other => other,
        }
    }

    /// Product of all shrink factors applied on top of [`Domain::root`].
    pub fn total_factor(&self) -> f64 {
        match self {
            Domain::Shrunk { base, factor } => factor * base.total_factor(),
            _ => 1.0,
        }
    }

    /// Center of the homothety used by [`shrink_domain`].
    pub fn center(&self) -> Vec<f64> {
        match self {
            Domain::L2Ball { dim, .. } => vec![0.0; *dim],
            Domain::Simplex { dim } => vec![1.0 / *dim as f64; *dim],
            Domain::Shrunk { base, .. } => base.center(),
        }
    }

    /// Largest Euclidean norm attained on the set.
    pub fn max_norm(&self) -> f64 {
        match self {
            Domain::L2Ball { radius, .. } => *radius,
            Domain::Simplex { .. } => 1.0,
            Domain::Shrunk { base, factor } => {
                let c = base.center();
                let nc = norm2(&c);
                // ‖c + γ(y − c)‖ ≤ (1 − γ)‖c‖ + γ‖y‖
                (1.0 - factor) * nc + factor * base.max_norm()
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::L2Ball { radius, .. } => norm2(x) <= radius + MEMBERSHIP_TOL,
            Domain::Simplex { .. } => {
                x.iter().all(|&v| v >= -MEMBERSHIP_TOL)
                    && (x.iter().sum::<f64>() - 1.0).abs() <= MEMBERSHIP_TOL
            }
            Domain::Shrunk { base, factor } => base.contains(&self.to_base(base, *factor, x)),
        }
    }

    fn to_base(&self, base: &Domain, factor: f64, x: &[f64]) -> Vec<f64> {
        let c = base.center();
        x.iter()
            .zip(&c)
            .map(|(xi, ci)| ci + (xi - ci) / factor)
            .collect()
    }

    /// Draws a point from the set (uniform for balls, flat Dirichlet for the
    /// simplex, pushed forward through any shrink maps).
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Domain::L2Ball { dim, radius } => {
                let u = sample_unit_sphere(*dim, rng).expect("dim ≥ 1");
                let r = radius * rng.random::<f64>().powf(1.0 / *dim as f64);
                u.into_inner().into_iter().map(|x| x * r).collect()
            }
            Domain::Simplex { dim } => {
                let mut v: Vec<f64> = (0..*dim).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                v
            }
            Domain::Shrunk { base, factor } => {
                let y = base.sample_point(rng);
                let c = base.center();
                y.iter()
                    .zip(&c)
                    .map(|(yi, ci)| ci + factor * (yi - ci))
                    .collect()
            }
        }
    }

    /// Extreme points useful as audit probes: the simplex vertices, or the
    /// signed scaled basis vectors of a ball.
    pub fn extreme_points(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        match self {
            Domain::L2Ball { radius, .. } => (0..2 * d)
                .map(|k| {
                    let mut v = vec![0.0; d];
                    v[k / 2] = if k % 2 == 0 { *radius } else { -*radius };
                    v
                })
                .collect(),
            Domain::Simplex { .. } => (0..d)
                .map(|i| {
                    let mut v = vec![0.0; d];
                    v[i] = 1.0;
                    v
                })
                .collect(),
            Domain::Shrunk { base, factor } => {
                let c = base.center();
                base.extreme_points()
                    .into_iter()
                    .map(|y| {
                        y.iter()
                            .zip(&c)
                            .map(|(yi, ci)| ci + factor * (yi - ci))
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

/// Shrinks `domain` toward its center by `gamma ∈ (0, 1)`.
///
/// Balls shrink to `L2Ball(γρ)`, so a member plus any `δu` with
/// `δ ≤ (1 − γ)ρ` stays inside the original ball. Simplices become
/// `Shrunk { Simplex, γ }`, whose members have every coordinate at least
/// `(1 − γ)/d`; the probes `w ± δu` still leave the affine hull of the
/// simplex, so objectives must accept ambient evaluation.
pub fn shrink_domain(domain: &Domain, gamma: f64) -> Result<Domain> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param("gamma", format!("{gamma} is outside (0, 1)")));
    }
    Ok(match domain {
        Domain::L2Ball { dim, radius } => Domain::L2Ball {
            dim: *dim,
            radius: radius * gamma,
        },
        Domain::Simplex { .. } => Domain::Shrunk {
            base: Box::new(domain.clone()),
            factor: gamma,
        },
        Domain::Shrunk { base, factor } => Domain::Shrunk {
            base: base.clone(),
            factor: factor * gamma,
        },
    })
}

/// Shrink factor giving a boundary margin of at least `margin`: Euclidean
/// distance for balls, minimum coordinate for simplices.
pub fn shrink_factor_for_margin(domain: &Domain, margin: f64) -> Result<f64> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::param("margin", format!("{margin} must be positive")));
    }
    let gamma = match domain.root() {
        Domain::L2Ball { radius, .. } => 1.0 - margin / radius,
        Domain::Simplex { dim } => 1.0 - *dim as f64 * margin,
        Domain::Shrunk { .. } => unreachable!("root is never shrunk"),
    };
    if gamma <= 0.0 {
        return Err(Error::param(
            "margin",
            format!("{margin} leaves an empty domain"),
        ));
    }
    Ok(gamma)
}

/// Euclidean projection of `x` onto `domain`.
pub fn project_euclidean(domain: &Domain, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("point"));
    }
    Ok(match domain {
        Domain::L2Ball { radius, .. } => project_ball(x, *radius),
        Domain::Simplex { .. } => project_simplex(x),
        Domain::Shrunk { base, factor } => {
            let c = base.center();
            let y: Vec<f64> = x
                .iter()
                .zip(&c)
                .map(|(xi, ci)| ci + (xi - ci) / factor)
                .collect();
            let p = project_euclidean(base, &y)?;
            p.iter()
                .zip(&c)
                .map(|(pi, ci)| ci + factor * (pi - ci))
                .collect()
        }
    })
}

/// Sort-based projection onto the probability simplex.
fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    x.iter().map(|v| (v - tau).max(0.0)).collect()
}

/// `min_{w ∈ domain} ⟨v, w⟩`.
pub fn min_linear(domain: &Domain, v: &[f64]) -> f64 {
    match domain {
        Domain::L2Ball { radius, .. } => -radius * norm2(v),
        Domain::Simplex { .. } => v.iter().copied().fold(f64::INFINITY, f64::min),
        Domain::Shrunk { base, factor } => {
            let vc = dot(v, &base.center());
            vc + factor * (min_linear(base, v) - vc)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormId {
    L2,
    L1,
}

impl NormId {
    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            NormId::L2 => norm2(x),
            NormId::L1 => norm1(x),
        }
    }

    /// The dual norm: ℓ₂ for ℓ₂, ℓ∞ for ℓ₁.
    pub fn dual_norm(self, g: &[f64]) -> f64 {
        match self {
            NormId::L2 => norm2(g),
            NormId::L1 => norm_inf(g),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegularizerId {
    /// `½‖w‖₂²`
    HalfSquaredL2,
    /// `Σ wᵢ ln(d·wᵢ)`
    NegEntropyScaled,
}

/// Geometry of a mirror-descent run: norm, regularizer, the bound `R` with
/// `sup r ≤ R²`, the dual-norm fourth-moment constant `p*`, and the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorSetup {
    pub norm: NormId,
    pub regularizer: RegularizerId,
    pub radius_bound: f64,
    pub p_star: f64,
    pub domain: Domain,
}

impl MirrorSetup {
    /// `½‖·‖²` on a ball of radius ρ: `R = ρ/√2`, `p* = 1`.
    pub fn euclidean(domain: Domain) -> Result<Self> {
        let rho = match domain.root() {
            Domain::L2Ball { radius, .. } => *radius,
            _ => return Err(Error::param("domain", "euclidean setup needs an L2 ball")),
        };
        Ok(MirrorSetup {
            norm: NormId::L2,
            regularizer: RegularizerId::HalfSquaredL2,
            radius_bound: rho / std::f64::consts::SQRT_2,
            p_star: 1.0,
            domain,
        })
    }

    /// Scaled negative entropy on the simplex: `R = sqrt(ln d)` and
    /// `p* = P_STAR_CONSTANT·sqrt(ln d / d)`.
    pub fn entropic(domain: Domain) -> Result<Self> {
        let d = match domain.root() {
            Domain::Simplex { dim } => *dim as f64,
            _ => return Err(Error::param("domain", "entropic setup needs a simplex")),
        };
        Ok(MirrorSetup {
            norm: NormId::L1,
            regularizer: RegularizerId::NegEntropyScaled,
            radius_bound: d.ln().sqrt(),
            p_star: P_STAR_CONSTANT * (d.ln() / d).sqrt(),
            domain,
        })
    }

    /// Replaces `p*`, e.g. with a Monte-Carlo estimate.
    pub fn with_p_star(mut self, p_star: f64) -> Result<Self> {
        if !(p_star.is_finite() && p_star > 0.0) {
            return Err(Error::param("p_star", format!("{p_star} must be positive")));
        }
        self.p_star = p_star;
        Ok(self)
    }

    /// Replaces `R`; it may only grow past the regularizer's supremum.
    pub fn with_radius_bound(mut self, radius_bound: f64) -> Result<Self> {
        let min = self.min_radius_bound();
        if !(radius_bound.is_finite() && radius_bound * radius_bound >= min * min * (1.0 - 1e-12)) {
            return Err(Error::param(
                "R",
                format!("{radius_bound} is below the regularizer bound {min}"),
            ));
        }
        self.radius_bound = radius_bound;
        Ok(self)
    }

    fn min_radius_bound(&self) -> f64 {
        match (self.regularizer, self.domain.root()) {
            (RegularizerId::HalfSquaredL2, Domain::L2Ball { radius, .. }) => {
                radius / std::f64::consts::SQRT_2
            }
            (_, root) => (root.dim() as f64).ln().sqrt(),
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        self.norm.dual_norm(g)
    }

    /// Regularizer value at `w`. On shrunk domains the regularizer is the
    /// root regularizer composed with the inverse shrink map, which keeps it
    /// (1/γ²)-strongly convex with the same supremum.
    pub fn regularizer_value(&self, w: &[f64]) -> f64 {
        let gamma = self.domain.total_factor();
        let c = self.domain.center();
        let y: Vec<f64> = if gamma == 1.0 {
            w.to_vec()
        } else {
            w.iter()
                .zip(&c)
                .map(|(wi, ci)| ci + (wi - ci) / gamma)
                .collect()
        };
        match self.regularizer {
            RegularizerId::HalfSquaredL2 => 0.5 * dot(&y, &y),
            RegularizerId::NegEntropyScaled => {
                let d = y.len() as f64;
                y.iter()
                    .map(|&v| if v > 0.0 { v * (d * v).ln() } else { 0.0 })
                    .sum()
            }
        }
    }

    /// `argmax_{w ∈ domain} ⟨θ, w⟩ − r(w)`.
    pub fn mirror_step(&self, theta: &[f64]) -> Result<Vec<f64>> {
        mirror_step(self, theta)
    }
}

/// `argmax_{w ∈ domain} ⟨θ, w⟩ − r(w)` in closed form.
///
/// Euclidean: projection of θ onto the ball. Entropic: softmax of θ; the
/// constant `ln d` inside `r` shifts the objective but not the maximizer.
/// On shrunk domains the step is taken in root coordinates with `γθ` and
/// mapped back through `w = c + γ(y − c)`.
pub fn mirror_step(setup: &MirrorSetup, theta: &[f64]) -> Result<Vec<f64>> {
    let d = setup.dim();
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta.len(),
        });
    }
    if theta.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("theta"));
    }
    let gamma = setup.domain.total_factor();
    let root = setup.domain.root();
    let scaled;
    let th = if gamma == 1.0 {
        theta
    } else {
        scaled = theta.iter().map(|x| x * gamma).collect::<Vec<_>>();
        &scaled[..]
    };
    let y = match (setup.regularizer, root) {
        (RegularizerId::HalfSquaredL2, Domain::L2Ball { radius, .. }) => project_ball(th, *radius),
        (RegularizerId::NegEntropyScaled, Domain::Simplex { .. }) => softmax(th),
        _ => {
            return Err(Error::param(
                "regularizer",
                "regularizer does not match the domain geometry",
            ))
        }
    };
    if gamma == 1.0 {
        return Ok(y);
    }
    let c = root.center();
    Ok(y.iter()
        .zip(&c)
        .map(|(yi, ci)| ci + gamma * (yi - ci))
        .collect())
}

fn project_ball(theta: &[f64], radius: f64) -> Vec<f64> {
    let n = norm2(theta);
    if n <= radius {
        theta.to_vec()
    } else {
        theta.iter().map(|x| x * (radius / n)).collect()
    }
}

fn softmax(theta: &[f64]) -> Vec<f64> {
    let m = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = theta.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x = (*x / s).max(PROB_FLOOR));
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn one_dimensional_sphere_is_two_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let mut plus = 0;
        for _ in 0..n {
            let u = sample_unit_sphere(1, &mut rng).unwrap();
            let x = u.coords()[0];
            assert!(x == 1.0 || x == -1.0);
            if x > 0.0 {
                plus += 1;
            }
        }
        let frac = plus as f64 / n as f64;
        // 4 standard errors of a fair coin
        assert!(
            (frac - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(),
            "{frac}"
        );
    }

    #[test]
    fn zero_dimension_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            sample_unit_sphere(0, &mut rng).unwrap_err(),
            Error::InvalidDimension(0)
        );
    }

    #[test]
    fn sphere_draws_are_unit_and_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = sample_unit_sphere(16, &mut rng).unwrap();
        assert!((norm2(u.coords()) - 1.0).abs() < 1e-9);

        let n = 100_000;
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let u = sample_unit_sphere(3, &mut rng).unwrap();
            for (m, x) in mean.iter_mut().zip(u.coords()) {
                *m += x / n as f64;
            }
        }
        for m in mean {
            assert!(m.abs() < 4.0 / (n as f64).sqrt(), "{m}");
        }
    }

    #[test]
    fn second_moment_is_isotropic() {
        let d = 4;
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut acc = vec![crate::stats::Moments::new(); d * d];
        for _ in 0..n {
            let u = sample_unit_sphere(d, &mut rng).unwrap();
            let c = u.coords();
            for i in 0..d {
                for j in 0..d {
                    acc[i * d + j].push(c[i] * c[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                let m = &acc[i * d + j];
                let target = if i == j { 1.0 / d as f64 } else { 0.0 };
                assert!(
                    (m.mean() - target).abs() < 5.0 * m.std_error(),
                    "({i},{j}) {} vs {target}",
                    m.mean()
                );
            }
        }
    }

    #[test]
    fn sphere_sampling_is_deterministic() {
        let a = sample_unit_sphere(5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_unit_sphere(5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn euclidean_step_examples() {
        let setup = MirrorSetup::euclidean(Domain::l2_ball(2, 1.0).unwrap()).unwrap();
        assert!(close(
            &setup.mirror_step(&[3.0, 4.0]).unwrap(),
            &[0.6, 0.8],
            1e-12
        ));
        assert!(close(
            &setup.mirror_step(&[0.1, 0.2]).unwrap(),
            &[0.1, 0.2],
            0.0
        ));
    }

    #[test]
    fn entropic_step_examples() {
        let s3 = MirrorSetup::entropic(Domain::simplex(3).unwrap()).unwrap();
        assert!(close(
            &s3.mirror_step(&[0.0; 3]).unwrap(),
            &[1.0 / 3.0; 3],
            1e-15
        ));
        let s2 = MirrorSetup::entropic(Domain::simplex(2).unwrap()).unwrap();
        let w = s2.mirror_step(&[2f64.ln(), 0.0]).unwrap();
        assert!(close(&w, &[2.0 / 3.0, 1.0 / 3.0], 1e-15), "{w:?}");
    }

    #[test]
    fn entropic_step_survives_huge_duals() {
        let s = MirrorSetup::entropic(Domain::simplex(3).unwrap()).unwrap();
        let w = s.mirror_step(&[1e6, -1e6, 0.0]).unwrap();
        assert!(s.domain.contains(&w));
        assert!(w.iter().all(|&x| x >= PROB_FLOOR));
        assert!((w[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mirror_step_errors() {
        let setup = MirrorSetup::euclidean(Domain::l2_ball(2, 1.0).unwrap()).unwrap();
        assert_eq!(
            setup.mirror_step(&[1.0]).unwrap_err(),
            Error::DimensionMismatch {
                expected: 2,
                got: 1
            }
        );
        assert_eq!(
            setup.mirror_step(&[f64::NAN, 0.0]).unwrap_err(),
            Error::NonFinite("theta")
        );
    }

    #[test]
    fn setup_constructors_check_geometry() {
        assert!(MirrorSetup::euclidean(Domain::simplex(3).unwrap()).is_err());
        assert!(MirrorSetup::entropic(Domain::l2_ball(3, 1.0).unwrap()).is_err());
        let e = MirrorSetup::euclidean(Domain::l2_ball(3, 2.0).unwrap()).unwrap();
        assert!(e.radius_bound.powi(2) >= 2.0 - 1e-12);
        assert_eq!(e.p_star, 1.0);
        assert!(e.clone().with_radius_bound(1.0).is_err());
        let s = MirrorSetup::entropic(Domain::simplex(8).unwrap()).unwrap();
        assert!(s.radius_bound.powi(2) >= 8f64.ln() - 1e-12);
    }

    #[test]
    fn ball_shrink_examples() {
        let ball = Domain::l2_ball(3, 1.0).unwrap();
        let small = shrink_domain(&ball, 0.9).unwrap();
        assert_eq!(
            small,
            Domain::L2Ball {
                dim: 3,
                radius: 0.9
            }
        );
        assert_eq!(
            shrink_domain(&Domain::l2_ball(2, 2.0).unwrap(), 0.5).unwrap(),
            Domain::L2Ball {
                dim: 2,
                radius: 1.0
            }
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let mut w = small.sample_point(&mut rng);
            // push to the boundary of the shrunk ball
            let n = norm2(&w);
            w.iter_mut().for_each(|x| *x *= 0.9 / n);
            let u = sample_unit_sphere(3, &mut rng).unwrap();
            let probe = crate::linalg::axpy(&w, 0.1, u.coords());
            assert!(ball.contains(&probe));
        }
        assert!(shrink_domain(&ball, 1.0).is_err());
        assert!(shrink_domain(&ball, 0.0).is_err());
    }

    #[test]
    fn simplex_shrink_keeps_margin() {
        let simplex = Domain::simplex(3).unwrap();
        let margin = 0.01;
        let gamma = shrink_factor_for_margin(&simplex, margin).unwrap();
        let shrunk = shrink_domain(&simplex, gamma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let w = shrunk.sample_point(&mut rng);
            assert!(shrunk.contains(&w));
            assert!(simplex.contains(&w));
            assert!(w.iter().all(|&x| x >= margin - 1e-15), "{w:?}");
            // probes stay in the nonnegative orthant but leave the affine hull
            let u = sample_unit_sphere(3, &mut rng).unwrap();
            let probe = crate::linalg::axpy(&w, margin, u.coords());
            assert!(probe.iter().all(|&x| x >= -1e-15));
        }
        for v in shrunk.extreme_points() {
            assert!(v.iter().all(|&x| x >= margin - 1e-15));
        }
    }

    #[test]
    fn shrunk_membership_matches_definition() {
        let base = Domain::l2_ball(2, 1.0).unwrap();
        let s = Domain::Shrunk {
            base: Box::new(base),
            factor: 0.5,
        };
        assert!(s.contains(&[0.5, 0.0]));
        assert!(!s.contains(&[0.51, 0.0]));
        let simplex = shrink_domain(&Domain::simplex(2).unwrap(), 0.5).unwrap();
        assert!(simplex.contains(&[0.75, 0.25]));
        assert!(!simplex.contains(&[0.8, 0.2]));
    }

    fn check_optimality(setup: &MirrorSetup, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = setup.dim();
        for _ in 0..10_000 {
            let theta: Vec<f64> = (0..d)
                .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let w = setup.mirror_step(&theta).unwrap();
            assert!(setup.domain.contains(&w));
            let best = dot(&theta, &w) - setup.regularizer_value(&w);
            let cand = setup.domain.sample_point(&mut rng);
            let other = dot(&theta, &cand) - setup.regularizer_value(&cand);
            assert!(best >= other - 1e-8, "{best} < {other}");
        }
    }

    #[test]
    fn mirror_step_is_the_argmax() {
        check_optimality(
            &MirrorSetup::euclidean(Domain::l2_ball(3, 1.5).unwrap()).unwrap(),
            6,
            4.0,
        );
        check_optimality(
            &MirrorSetup::entropic(Domain::simplex(4).unwrap()).unwrap(),
            7,
            6.0,
        );
        let shrunk = shrink_domain(&Domain::simplex(4).unwrap(), 0.8).unwrap();
        check_optimality(&MirrorSetup::entropic(shrunk).unwrap(), 8, 6.0);
        let shrunk_ball = Domain::Shrunk {
            base: Box::new(Domain::l2_ball(3, 1.0).unwrap()),
            factor: 0.7,
        };
        check_optimality(&MirrorSetup::euclidean(shrunk_ball).unwrap(), 9, 4.0);
    }

    #[test]
    fn projections() {
        let ball = Domain::l2_ball(2, 1.0).unwrap();
        assert!(close(
            &project_euclidean(&ball, &[3.0, 4.0]).unwrap(),
            &[0.6, 0.8],
            1e-15
        ));
        let simplex = Domain::simplex(3).unwrap();
        let p = project_euclidean(&simplex, &[0.5, 0.5, 0.5]).unwrap();
        assert!(close(&p, &[1.0 / 3.0; 3], 1e-15));
        let p = project_euclidean(&simplex, &[2.0, 0.0, -1.0]).unwrap();
        assert!(close(&p, &[1.0, 0.0, 0.0], 1e-15));
        let shrunk = shrink_domain(&simplex, 0.5).unwrap();
        let p = project_euclidean(&shrunk, &[2.0, 0.0, -1.0]).unwrap();
        assert!(shrunk.contains(&p));
        assert!(close(&p, &[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1e-15));
    }

    #[test]
    fn projection_is_nearest_sampled_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for domain in [
            Domain::simplex(4).unwrap(),
            shrink_domain(&Domain::simplex(4).unwrap(), 0.6).unwrap(),
            Domain::l2_ball(4, 0.7).unwrap(),
        ] {
            for _ in 0..200 {
                let x: Vec<f64> = (0..4).map(|_| 3.0 * rng.random::<f64>() - 1.5).collect();
                let p = project_euclidean(&domain, &x).unwrap();
                assert!(domain.contains(&p));
                let dp = crate::linalg::dist2(&x, &p);
                for _ in 0..50 {
                    let q = domain.sample_point(&mut rng);
                    assert!(dp <= crate::linalg::dist2(&x, &q) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn linear_minimum_is_attained_by_extreme_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let simplex = shrink_domain(&Domain::simplex(5).unwrap(), 0.7).unwrap();
        for _ in 0..100 {
            let v: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let m = min_linear(&simplex, &v);
            let best = simplex
                .extreme_points()
                .iter()
                .map(|p| dot(&v, p))
                .fold(f64::INFINITY, f64::min);
            assert!((m - best).abs() < 1e-12);
        }
        let ball = Domain::l2_ball(2, 2.0).unwrap();
        assert!((min_linear(&ball, &[3.0, 4.0]) + 10.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn entropic_shift_invariance(
            theta in proptest::collection::vec(-30.0f64..30.0, 2..12),
            c in -1e3f64..1e3,
        ) {
            let setup = MirrorSetup::entropic(Domain::simplex(theta.len()).unwrap()).unwrap();
            let a = setup.mirror_step(&theta).unwrap();
            let shifted: Vec<f64> = theta.iter().map(|x| x + c).collect();
            let b = setup.mirror_step(&shifted).unwrap();
            prop_assert!(close(&a, &b, 1e-9));
        }

        #[test]
        fn euclidean_step_lands_in_ball(
            theta in proptest::collection::vec(-1e6f64..1e6, 1..10),
            radius in 0.01f64..100.0,
        ) {
            let setup = MirrorSetup::euclidean(Domain::l2_ball(theta.len(), radius).unwrap()).unwrap();
            let w = setup.mirror_step(&theta).unwrap();
            prop_assert!(setup.domain.contains(&w));
        }
    }
}
