//! Problem definition: the field expansion, the period, the domain `V`, and
//! the epsilon range.
//!
//! A problem file is a UTF-8 JSON object with keys `dimension`, `period`,
//! `order_k`, `F` (array of `k` arrays of `n` DSL strings), optional `R`
//! (array of `n` strings, default all `"0"`), `domain`, `eps_max`, and
//! `eps_grid`. Unknown keys are rejected. Coefficient expressions may
//! reference `t`, `x1..xn`; remainder expressions may also reference `eps`.

use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::expr::Expression;
use crate::{Error, Real, Result};

/// Membership mode for [`DomainSpec::contains`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Open,
    Closed,
}

/// Truncated expansion of the right-hand side:
/// `x' = sum_{i=1..k} eps^i F_i(t, x) + eps^(k+1) R(t, x, eps)`.
///
/// In standard form `x' = eps * F(t, x, eps)` the field is
/// `F = sum_i eps^(i-1) F_i + eps^k R`.
#[derive(Debug, Clone)]
pub struct VectorFieldExpansion<R> {
    dimension: usize,
    period: R,
    order: usize,
    coefficients: Vec<Vec<Expression<R>>>,
    remainder: Vec<Expression<R>>,
}

/// Canonical state-variable names `x1..xn`.
pub fn state_variable_names(dimension: usize) -> Vec<String> {
    (1..=dimension).map(|i| format!("x{i}")).collect()
}

fn var_lookup<'a, R: Real>(t: R, x: &'a [R], eps: Option<R>) -> impl Fn(&str) -> Option<R> + 'a {
    move |name: &str| match name {
        "t" => Some(t),
        "eps" => eps,
        _ => {
            let digits = name.strip_prefix('x')?;
            if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let idx: usize = digits.parse().ok()?;
            x.get(idx.checked_sub(1)?).copied()
        }
    }
}

impl<R: Real> VectorFieldExpansion<R> {
    /// Builds and validates an expansion. `coefficients[i]` holds the `n`
    /// components of `F_{i+1}`; `remainder` holds the `n` components of `R`.
    pub fn new(
        dimension: usize,
        period: R,
        coefficients: Vec<Vec<Expression<R>>>,
        remainder: Vec<Expression<R>>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Problem("dimension must be at least 1".into()));
        }
        if period <= R::zero() {
            return Err(Error::Problem("period must be positive".into()));
        }
        let order = coefficients.len();
        if order == 0 {
            return Err(Error::Problem("order k must be at least 1".into()));
        }
        let names = state_variable_names(dimension);
        let mut allowed: Vec<&str> = vec!["t"];
        allowed.extend(names.iter().map(String::as_str));
        for (i, comps) in coefficients.iter().enumerate() {
            if comps.len() != dimension {
                return Err(Error::Problem(format!(
                    "F[{}] has {} components, expected {}",
                    i + 1,
                    comps.len(),
                    dimension
                )));
            }
            for (c, e) in comps.iter().enumerate() {
                let bad = e.check_bindings(&allowed);
                if !bad.is_empty() {
                    return Err(Error::Problem(format!(
                        "F[{}][{}] references disallowed variable(s): {}",
                        i + 1,
                        c + 1,
                        bad.join(", ")
                    )));
                }
            }
        }
        if remainder.len() != dimension {
            return Err(Error::Problem(format!(
                "R has {} components, expected {}",
                remainder.len(),
                dimension
            )));
        }
        let mut allowed_r = allowed.clone();
        allowed_r.push("eps");
        for (c, e) in remainder.iter().enumerate() {
            let bad = e.check_bindings(&allowed_r);
            if !bad.is_empty() {
                return Err(Error::Problem(format!(
                    "R[{}] references disallowed variable(s): {}",
                    c + 1,
                    bad.join(", ")
                )));
            }
        }
        Ok(VectorFieldExpansion {
            dimension,
            period,
            order,
            coefficients,
            remainder,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn period(&self) -> R {
        self.period
    }

    /// Expansion order `k`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Components of `F_j` for `j` in `1..=k`.
    pub fn coefficient(&self, j: usize) -> &[Expression<R>] {
        &self.coefficients[j - 1]
    }

    pub fn remainder(&self) -> &[Expression<R>] {
        &self.remainder
    }

    fn check_state(&self, x: &[R]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Evaluates `F_j(t, x)` for `j` in `1..=k`.
    pub fn eval_coefficient(&self, j: usize, t: R, x: &[R]) -> Result<Vec<R>> {
        self.check_state(x)?;
        let lookup = var_lookup(t, x, None);
        let comps = &self.coefficients[j - 1];
        let mut out = Vec::with_capacity(self.dimension);
        for (c, e) in comps.iter().enumerate() {
            let v = e
                .evaluate_with(&lookup)
                .map_err(|err| Error::from(err).in_slot(&format!("F[{}][{}]", j, c + 1)))?;
            out.push(v);
        }
        Ok(out)
    }

    /// Evaluates `R(t, x, eps)`.
    pub fn eval_remainder(&self, t: R, x: &[R], eps: R) -> Result<Vec<R>> {
        self.check_state(x)?;
        let lookup = var_lookup(t, x, Some(eps));
        let mut out = Vec::with_capacity(self.dimension);
        for (c, e) in self.remainder.iter().enumerate() {
            let v = e
                .evaluate_with(&lookup)
                .map_err(|err| Error::from(err).in_slot(&format!("R[{}]", c + 1)))?;
            out.push(v);
        }
        Ok(out)
    }

    /// True when every remainder component is syntactically zero.
    pub fn remainder_is_zero(&self) -> bool {
        self.remainder.iter().all(Expression::is_zero)
    }

    /// Evaluates `F(t, x, eps) = sum_i eps^(i-1) F_i(t, x) + eps^k R(t, x, eps)`.
    pub fn eval_standard_form(&self, t: R, x: &[R], eps: R) -> Result<Vec<R>> {
        self.check_state(x)?;
        let mut acc = vec![R::zero(); self.dimension];
        let mut scale = R::one();
        for j in 1..=self.order {
            let fj = self.eval_coefficient(j, t, x)?;
            for (a, v) in acc.iter_mut().zip(&fj) {
                *a = *a + scale * *v;
            }
            scale = scale * eps;
        }
        // scale is now eps^k
        if !self.remainder_is_zero() {
            let r = self.eval_remainder(t, x, eps)?;
            for (a, v) in acc.iter_mut().zip(&r) {
                *a = *a + scale * *v;
            }
        }
        Ok(acc)
    }
}

/// Boundary sample: a point on the topological boundary of `V` paired with
/// the outward unit normal.
#[derive(Debug, Clone)]
pub struct BoundarySample<R> {
    pub point: Vec<R>,
    pub normal: Vec<R>,
}

/// The open bounded set `V`.
///
/// Membership tests treat the boundary as a few-ulp-thick shell so that
/// sampled boundary points robustly satisfy closed and fail open membership.
#[derive(Debug, Clone)]
pub enum DomainSpec<R> {
    Box { lower: Vec<R>, upper: Vec<R> },
    Ball { center: Vec<R>, radius: R },
    Annulus { center: Vec<R>, r_inner: R, r_outer: R },
}

impl<R: Real> DomainSpec<R> {
    pub fn interval(a: R, b: R) -> Self {
        DomainSpec::Box {
            lower: vec![a],
            upper: vec![b],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(Error::Problem(
                        "box lower/upper must have equal, nonzero length".into(),
                    ));
                }
                for i in 0..lower.len() {
                    if !(lower[i] < upper[i]) {
                        return Err(Error::Problem(format!(
                            "box requires lower[{i}] < upper[{i}]"
                        )));
                    }
                }
            }
            DomainSpec::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::Problem("ball center must be nonempty".into()));
                }
                if !(*radius > R::zero()) {
                    return Err(Error::Problem("ball radius must be positive".into()));
                }
            }
            DomainSpec::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                if center.len() > 2 || center.is_empty() {
                    return Err(Error::Problem(
                        "annulus is supported in dimensions 1 and 2".into(),
                    ));
                }
                if !(*r_inner >= R::zero()) || !(*r_outer > *r_inner) {
                    return Err(Error::Problem(
                        "annulus requires 0 <= r_inner < r_outer".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        match self {
            DomainSpec::Box { lower, .. } => lower.len(),
            DomainSpec::Ball { center, .. } => center.len(),
            DomainSpec::Annulus { center, .. } => center.len(),
        }
    }

    pub fn diameter(&self) -> R {
        match self {
            DomainSpec::Box { lower, upper } => norm2(
                &lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| *u - *l)
                    .collect::<Vec<_>>(),
            ),
            DomainSpec::Ball { radius, .. } => *radius + *radius,
            DomainSpec::Annulus { r_outer, .. } => *r_outer + *r_outer,
        }
    }

    pub fn bounding_box(&self) -> (Vec<R>, Vec<R>) {
        match self {
            DomainSpec::Box { lower, upper } => (lower.clone(), upper.clone()),
            DomainSpec::Ball { center, radius } => (
                center.iter().map(|c| *c - *radius).collect(),
                center.iter().map(|c| *c + *radius).collect(),
            ),
            DomainSpec::Annulus {
                center, r_outer, ..
            } => (
                center.iter().map(|c| *c - *r_outer).collect(),
                center.iter().map(|c| *c + *r_outer).collect(),
            ),
        }
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    ///
    /// Exact for balls and annuli; for boxes it is the exact inside distance
    /// and a lower bound on the outside distance.
    pub fn signed_boundary_distance(&self, z: &[R]) -> Result<R> {
        if z.len() != self.dimension() {
            return Err(Error::Dimension {
                expected: self.dimension(),
                got: z.len(),
            });
        }
        Ok(match self {
            DomainSpec::Box { lower, upper } => {
                let mut d = R::infinity();
                for i in 0..z.len() {
                    d = d.min(z[i] - lower[i]).min(upper[i] - z[i]);
                }
                d
            }
            DomainSpec::Ball { center, radius } => *radius - dist2(z, center),
            DomainSpec::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let rho = dist2(z, center);
                (rho - *r_inner).min(*r_outer - rho)
            }
        })
    }

    fn membership_slack(&self) -> R {
        let (lo, hi) = self.bounding_box();
        let mut scale = self.diameter();
        for v in lo.iter().chain(hi.iter()) {
            scale = scale.max(v.abs());
        }
        R::epsilon() * R::of(32.0) * scale
    }

    /// Strict membership for `Open`, non-strict for `Closed`.
    pub fn contains(&self, z: &[R], mode: Containment) -> Result<bool> {
        let d = self.signed_boundary_distance(z)?;
        let slack = self.membership_slack();
        Ok(match mode {
            Containment::Open => d > slack,
            Containment::Closed => d >= -slack,
        })
    }

    /// Samples the boundary with mesh size at most `diameter / density`,
    /// pairing each point with its outward unit normal.
    pub fn boundary_sample(&self, density: usize) -> Vec<BoundarySample<R>> {
        let density = density.max(4);
        match self {
            DomainSpec::Box { lower, upper } if lower.len() == 1 => vec![
                BoundarySample {
                    point: vec![lower[0]],
                    normal: vec![-R::one()],
                },
                BoundarySample {
                    point: vec![upper[0]],
                    normal: vec![R::one()],
                },
            ],
            DomainSpec::Box { lower, upper } => {
                let n = lower.len();
                let diam = self.diameter();
                let mesh = diam / R::of(density as f64);
                let mut out = Vec::new();
                for axis in 0..n {
                    for (face_value, sign) in [(lower[axis], -R::one()), (upper[axis], R::one())] {
                        let mut normal = vec![R::zero(); n];
                        normal[axis] = sign;
                        let others: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
                        let counts: Vec<usize> = others
                            .iter()
                            .map(|&i| {
                                let len = upper[i] - lower[i];
                                ((len / mesh).as_f64().ceil() as usize).max(1) + 1
                            })
                            .collect();
                        let mut idx = vec![0usize; others.len()];
                        loop {
                            let mut point = vec![R::zero(); n];
                            point[axis] = face_value;
                            for (slot, &i) in others.iter().enumerate() {
                                let m = counts[slot];
                                let frac = R::of(idx[slot] as f64) / R::of((m - 1) as f64);
                                point[i] = lower[i] + (upper[i] - lower[i]) * frac;
                            }
                            out.push(BoundarySample {
                                point,
                                normal: normal.clone(),
                            });
                            // odometer over the face grid
                            let mut carry = 0;
                            while carry < idx.len() {
                                idx[carry] += 1;
                                if idx[carry] < counts[carry] {
                                    break;
                                }
                                idx[carry] = 0;
                                carry += 1;
                            }
                            if carry == idx.len() {
                                break;
                            }
                        }
                    }
                }
                out
            }
            DomainSpec::Ball { center, radius } if center.len() == 1 => vec![
                BoundarySample {
                    point: vec![center[0] - *radius],
                    normal: vec![-R::one()],
                },
                BoundarySample {
                    point: vec![center[0] + *radius],
                    normal: vec![R::one()],
                },
            ],
            DomainSpec::Ball { center, radius } if center.len() == 2 => {
                circle_samples(center, *radius, R::one(), circle_count(density))
            }
            DomainSpec::Ball { center, radius } => {
                // UV sphere; poles sampled once
                let m_pol = ((std::f64::consts::PI * density as f64 / 2.0).ceil() as usize).max(2);
                let m_az = ((std::f64::consts::PI * density as f64).ceil() as usize).max(4);
                let mut out = Vec::new();
                for i in 0..=m_pol {
                    let phi = R::of(std::f64::consts::PI * i as f64 / m_pol as f64);
                    let (sp, cp) = (phi.sin(), phi.cos());
                    let az_count = if i == 0 || i == m_pol { 1 } else { m_az };
                    for j in 0..az_count {
                        let theta = R::of(2.0 * std::f64::consts::PI * j as f64 / az_count as f64);
                        let u = vec![sp * theta.cos(), sp * theta.sin(), cp];
                        let point = center
                            .iter()
                            .zip(&u)
                            .map(|(c, ui)| *c + *radius * *ui)
                            .collect();
                        out.push(BoundarySample { point, normal: u });
                    }
                }
                out
            }
            DomainSpec::Annulus {
                center,
                r_inner,
                r_outer,
            } if center.len() == 1 => vec![
                BoundarySample {
                    point: vec![center[0] - *r_outer],
                    normal: vec![-R::one()],
                },
                BoundarySample {
                    point: vec![center[0] - *r_inner],
                    normal: vec![R::one()],
                },
                BoundarySample {
                    point: vec![center[0] + *r_inner],
                    normal: vec![-R::one()],
                },
                BoundarySample {
                    point: vec![center[0] + *r_outer],
                    normal: vec![R::one()],
                },
            ],
            DomainSpec::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                let mut out = circle_samples(center, *r_outer, R::one(), circle_count(density));
                if *r_inner > R::zero() {
                    let ratio = (*r_inner / *r_outer).as_f64();
                    let m = ((circle_count(density) as f64 * ratio).ceil() as usize).max(4);
                    out.extend(circle_samples(center, *r_inner, -R::one(), m));
                } else {
                    // punctured disk: the inner boundary degenerates to the center
                    out.push(BoundarySample {
                        point: center.clone(),
                        normal: vec![R::zero(); 2],
                    });
                }
                out
            }
        }
    }

    /// Uniform grid over the bounding box restricted to the closure of `V`.
    pub fn interior_grid(&self, per_dim: usize) -> Vec<Vec<R>> {
        let n = self.dimension();
        let per_dim = per_dim.max(2);
        let (lo, hi) = self.bounding_box();
        let mut out = Vec::new();
        let mut idx = vec![0usize; n];
        loop {
            let point: Vec<R> = (0..n)
                .map(|i| {
                    let frac = R::of(idx[i] as f64) / R::of((per_dim - 1) as f64);
                    lo[i] + (hi[i] - lo[i]) * frac
                })
                .collect();
            if self.contains(&point, Containment::Closed).unwrap_or(false) {
                out.push(point);
            }
            let mut carry = 0;
            while carry < n {
                idx[carry] += 1;
                if idx[carry] < per_dim {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == n {
                break;
            }
        }
        out
    }

    /// True when the axis-aligned cell `[lo, hi]` lies inside the closure.
    pub fn cell_in_closure(&self, lo: &[R], hi: &[R]) -> Result<bool> {
        if lo.len() != self.dimension() || hi.len() != self.dimension() {
            return Err(Error::Dimension {
                expected: self.dimension(),
                got: lo.len(),
            });
        }
        Ok(match self {
            DomainSpec::Box { lower, upper } => {
                (0..lo.len()).all(|i| lo[i] >= lower[i] && hi[i] <= upper[i])
            }
            DomainSpec::Ball { center, radius } => cell_max_dist(lo, hi, center) <= *radius,
            DomainSpec::Annulus {
                center,
                r_inner,
                r_outer,
            } => {
                cell_max_dist(lo, hi, center) <= *r_outer
                    && cell_min_dist(lo, hi, center) >= *r_inner
            }
        })
    }
}

fn circle_count(density: usize) -> usize {
    ((std::f64::consts::PI * density as f64).ceil() as usize).max(4)
}

fn circle_samples<R: Real>(
    center: &[R],
    radius: R,
    orientation: R,
    m: usize,
) -> Vec<BoundarySample<R>> {
    (0..m)
        .map(|j| {
            let theta = R::of(2.0 * std::f64::consts::PI * j as f64 / m as f64);
            let u = vec![theta.cos(), theta.sin()];
            BoundarySample {
                point: vec![center[0] + radius * u[0], center[1] + radius * u[1]],
                normal: vec![orientation * u[0], orientation * u[1]],
            }
        })
        .collect()
}

/// Largest distance from `point` to the cell `[lo, hi]`.
fn cell_max_dist<R: Real>(lo: &[R], hi: &[R], point: &[R]) -> R {
    let mut acc = R::zero();
    for i in 0..lo.len() {
        let d = (point[i] - lo[i]).abs().max((hi[i] - point[i]).abs());
        acc = acc + d * d;
    }
    acc.sqrt()
}

/// Smallest distance from `point` to the cell `[lo, hi]`.
fn cell_min_dist<R: Real>(lo: &[R], hi: &[R], point: &[R]) -> R {
    let mut acc = R::zero();
    for i in 0..lo.len() {
        let clamped = point[i].max(lo[i]).min(hi[i]);
        let d = point[i] - clamped;
        acc = acc + d * d;
    }
    acc.sqrt()
}

pub(crate) fn norm2<R: Real>(v: &[R]) -> R {
    v.iter().fold(R::zero(), |acc, x| acc + *x * *x).sqrt()
}

pub(crate) fn norm_inf<R: Real>(v: &[R]) -> R {
    v.iter().fold(R::zero(), |acc, x| acc.max(x.abs()))
}

pub(crate) fn dist2<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter()
        .zip(b)
        .fold(R::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y))
        .sqrt()
}

/// A fully validated analysis problem.
#[derive(Debug, Clone)]
pub struct Problem<R> {
    pub field: VectorFieldExpansion<R>,
    pub domain: DomainSpec<R>,
    pub eps_max: R,
    pub eps_grid: Vec<R>,
}

impl<R: Real> Problem<R> {
    pub fn new(
        field: VectorFieldExpansion<R>,
        domain: DomainSpec<R>,
        eps_max: R,
        eps_grid: Vec<R>,
    ) -> Result<Self> {
        domain.validate()?;
        if domain.dimension() != field.dimension() {
            return Err(Error::Problem(format!(
                "domain dimension {} does not match field dimension {}",
                domain.dimension(),
                field.dimension()
            )));
        }
        if !(eps_max > R::zero()) {
            return Err(Error::Problem("eps_max must be positive".into()));
        }
        for (i, e) in eps_grid.iter().enumerate() {
            if !(*e > R::zero() && *e <= eps_max) {
                return Err(Error::Problem(format!(
                    "eps_grid[{i}] must lie in (0, eps_max]"
                )));
            }
            if i > 0 && !(*e < eps_grid[i - 1]) {
                return Err(Error::Problem(
                    "eps_grid must be strictly decreasing".into(),
                ));
            }
        }
        Ok(Problem {
            field,
            domain,
            eps_max,
            eps_grid,
        })
    }

    /// Serializes back to the problem-file JSON schema (expressions as DSL text).
    pub fn to_json_value(&self) -> Value {
        let f: Vec<Vec<String>> = (1..=self.field.order())
            .map(|j| {
                self.field
                    .coefficient(j)
                    .iter()
                    .map(|e| e.to_string())
                    .collect()
            })
            .collect();
        let r: Vec<String> = self
            .field
            .remainder()
            .iter()
            .map(|e| e.to_string())
            .collect();
        let domain = match &self.domain {
            DomainSpec::Box { lower, upper } => json!({
                "type": "box",
                "lower": lower.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
                "upper": upper.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            }),
            DomainSpec::Ball { center, radius } => json!({
                "type": "ball",
                "center": center.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
                "radius": radius.as_f64(),
            }),
            DomainSpec::Annulus {
                center,
                r_inner,
                r_outer,
            } => json!({
                "type": "annulus",
                "center": center.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
                "r_inner": r_inner.as_f64(),
                "r_outer": r_outer.as_f64(),
            }),
        };
        json!({
            "dimension": self.field.dimension(),
            "period": self.field.period().as_f64(),
            "order_k": self.field.order(),
            "F": f,
            "R": r,
            "domain": domain,
            "eps_max": self.eps_max.as_f64(),
            "eps_grid": self.eps_grid.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    dimension: usize,
    period: f64,
    order_k: usize,
    #[serde(rename = "F")]
    f: Vec<Vec<String>>,
    #[serde(rename = "R", default)]
    r: Option<Vec<String>>,
    domain: Value,
    eps_max: f64,
    eps_grid: Vec<f64>,
}

fn expect_keys(obj: &serde_json::Map<String, Value>, allowed: &[&str]) -> Result<()> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Problem(format!("unknown domain key `{key}`")));
        }
    }
    for key in allowed {
        if !obj.contains_key(*key) {
            return Err(Error::Problem(format!("missing domain key `{key}`")));
        }
    }
    Ok(())
}

fn number<R: Real>(v: &Value, what: &str) -> Result<R> {
    v.as_f64()
        .map(R::of)
        .ok_or_else(|| Error::Problem(format!("{what} must be a number")))
}

fn vector<R: Real>(v: &Value, what: &str) -> Result<Vec<R>> {
    v.as_array()
        .ok_or_else(|| Error::Problem(format!("{what} must be an array of numbers")))?
        .iter()
        .map(|x| number(x, what))
        .collect()
}

fn domain_from_json<R: Real>(v: &Value) -> Result<DomainSpec<R>> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Problem("domain must be a JSON object".into()))?;
    let ty = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Problem("domain.type must be a string".into()))?;
    let spec = match ty {
        "box" => {
            expect_keys(obj, &["type", "lower", "upper"])?;
            DomainSpec::Box {
                lower: vector(&obj["lower"], "domain.lower")?,
                upper: vector(&obj["upper"], "domain.upper")?,
            }
        }
        "ball" => {
            expect_keys(obj, &["type", "center", "radius"])?;
            DomainSpec::Ball {
                center: vector(&obj["center"], "domain.center")?,
                radius: number(&obj["radius"], "domain.radius")?,
            }
        }
        "annulus" => {
            expect_keys(obj, &["type", "center", "r_inner", "r_outer"])?;
            let center: Vec<R> = vector(&obj["center"], "domain.center")?;
            if center.len() != 2 {
                return Err(Error::Problem(
                    "annulus domain in a problem file requires a 2D center [cx, cy]".into(),
                ));
            }
            DomainSpec::Annulus {
                center,
                r_inner: number(&obj["r_inner"], "domain.r_inner")?,
                r_outer: number(&obj["r_outer"], "domain.r_outer")?,
            }
        }
        other => {
            return Err(Error::Problem(format!(
                "unknown domain type `{other}` (expected box, ball, or annulus)"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_slot<R: Real>(src: &str, slot: &str) -> Result<Expression<R>> {
    Expression::parse(src).map_err(|e| Error::Problem(format!("{slot}: {e}")))
}

/// Builds a [`Problem`] from parsed problem-file JSON.
pub fn problem_from_json<R: Real>(value: Value) -> Result<Problem<R>> {
    let file: ProblemFile = serde_json::from_value(value)?;
    if file.f.len() != file.order_k {
        return Err(Error::Problem(format!(
            "F has {} entries, expected order_k = {}",
            file.f.len(),
            file.order_k
        )));
    }
    let mut coefficients = Vec::with_capacity(file.order_k);
    for (i, comps) in file.f.iter().enumerate() {
        let mut row = Vec::with_capacity(comps.len());
        for (c, src) in comps.iter().enumerate() {
            row.push(parse_slot(src, &format!("F[{}][{}]", i + 1, c + 1))?);
        }
        coefficients.push(row);
    }
    let remainder: Vec<Expression<R>> = match &file.r {
        Some(comps) => comps
            .iter()
            .enumerate()
            .map(|(c, src)| parse_slot(src, &format!("R[{}]", c + 1)))
            .collect::<Result<_>>()?,
        None => vec![Expression::zero(); file.dimension],
    };
    let field =
        VectorFieldExpansion::new(file.dimension, R::of(file.period), coefficients, remainder)?;
    let domain = domain_from_json(&file.domain)?;
    let eps_grid = file.eps_grid.iter().copied().map(R::of).collect();
    Problem::new(field, domain, R::of(file.eps_max), eps_grid)
}

/// Loads and fully validates a problem file.
pub fn load_problem<R: Real>(path: impl AsRef<Path>) -> Result<Problem<R>> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    problem_from_json(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem_json() -> Value {
        json!({
            "dimension": 1,
            "period": 6.283185307179586,
            "order_k": 1,
            "F": [["x1*(x1 + cbrt(x1^2-1)*sin(t))*sin(t)"]],
            "domain": {"type": "box", "lower": [0.5], "upper": [1.5]},
            "eps_max": 0.05,
            "eps_grid": [0.05, 0.02, 0.01, 0.005]
        })
    }

    #[test]
    fn loads_a_valid_problem() {
        let p: Problem<f64> = problem_from_json(problem_json()).unwrap();
        assert_eq!(p.field.dimension(), 1);
        assert_eq!(p.field.order(), 1);
        assert!((p.field.period() - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert!(p.field.remainder_is_zero());
    }

    #[test]
    fn rejects_eps_in_coefficient_slot() {
        let mut v = problem_json();
        v["F"][0][0] = json!("eps*x1");
        let err = problem_from_json::<f64>(v).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("F[1][1]") && msg.contains("eps"), "{msg}");
    }

    #[test]
    fn rejects_degenerate_box() {
        let mut v = problem_json();
        v["domain"] = json!({"type": "box", "lower": [1.0], "upper": [1.0]});
        let err = problem_from_json::<f64>(v).unwrap_err();
        assert!(err.to_string().contains("lower[0] < upper[0]"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys() {
        let mut v = problem_json();
        v["extra"] = json!(1);
        assert!(problem_from_json::<f64>(v).is_err());

        let mut v = problem_json();
        v["domain"]["slack"] = json!(1.0);
        let err = problem_from_json::<f64>(v).unwrap_err();
        assert!(err.to_string().contains("unknown domain key"), "{err}");
    }

    #[test]
    fn rejects_non_decreasing_eps_grid() {
        let mut v = problem_json();
        v["eps_grid"] = json!([0.01, 0.02]);
        assert!(problem_from_json::<f64>(v).is_err());
        let mut v = problem_json();
        v["eps_grid"] = json!([0.06]);
        assert!(problem_from_json::<f64>(v).is_err());
    }

    #[test]
    fn membership_examples() {
        let unit_box = DomainSpec::Box {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        assert!(unit_box.contains(&[0.5, 0.5], Containment::Open).unwrap());

        let disk = DomainSpec::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        assert!(!disk.contains(&[1.0, 0.0], Containment::Open).unwrap());
        assert!(disk.contains(&[1.0, 0.0], Containment::Closed).unwrap());

        let ann = DomainSpec::Annulus {
            center: vec![0.0, 0.0],
            r_inner: 0.8,
            r_outer: 1.2,
        };
        assert!(ann.contains(&[1.0, 0.0], Containment::Open).unwrap());
        assert!(!ann.contains(&[0.5, 0.0], Containment::Closed).unwrap());

        assert!(matches!(
            disk.contains(&[0.0], Containment::Open),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn interval_boundary_is_two_points() {
        let v: DomainSpec<f64> = DomainSpec::interval(0.5, 1.5);
        let samples = v.boundary_sample(100);
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].point, vec![0.5]);
        assert_eq!(samples[0].normal, vec![-1.0]);
        assert_eq!(samples[1].point, vec![1.5]);
        assert_eq!(samples[1].normal, vec![1.0]);
    }

    #[test]
    fn boundary_samples_sit_on_the_boundary() {
        let shapes: Vec<DomainSpec<f64>> = vec![
            DomainSpec::Box {
                lower: vec![-1.0, 0.0],
                upper: vec![2.0, 1.0],
            },
            DomainSpec::Ball {
                center: vec![0.3, -0.2],
                radius: 1.7,
            },
            DomainSpec::Annulus {
                center: vec![0.0, 0.0],
                r_inner: 0.8,
                r_outer: 1.2,
            },
            DomainSpec::Ball {
                center: vec![0.0, 0.0, 0.0],
                radius: 1.0,
            },
        ];
        for shape in &shapes {
            let samples = shape.boundary_sample(8);
            assert!(samples.len() >= 4);
            for s in &samples {
                assert!(
                    shape.contains(&s.point, Containment::Closed).unwrap(),
                    "{shape:?} {:?}",
                    s.point
                );
                assert!(
                    !shape.contains(&s.point, Containment::Open).unwrap(),
                    "{shape:?} {:?}",
                    s.point
                );
            }
        }
    }

    #[test]
    fn ball_samples_have_exact_radius() {
        let ball = DomainSpec::Ball {
            center: vec![0.5, -0.25, 1.0],
            radius: 2.0,
        };
        for s in ball.boundary_sample(16) {
            let r = dist2(&s.point, &[0.5, -0.25, 1.0]);
            assert!((r - 2.0).abs() < 1e-12);
            // outward normal is radial
            let mut dot = 0.0;
            for i in 0..3 {
                dot += s.normal[i] * (s.point[i] - [0.5, -0.25, 1.0][i]);
            }
            assert!(dot > 0.0);
        }
    }

    #[test]
    fn annulus_circles_have_opposite_normals() {
        let ann = DomainSpec::Annulus {
            center: vec![0.0, 0.0],
            r_inner: 0.8,
            r_outer: 1.2,
        };
        let mut saw_inner = false;
        let mut saw_outer = false;
        for s in ann.boundary_sample(8) {
            let rho = norm2(&s.point);
            let radial_dot = s.normal[0] * s.point[0] + s.normal[1] * s.point[1];
            if (rho - 1.2).abs() < 1e-12 {
                saw_outer = true;
                assert!(radial_dot > 0.0);
            } else {
                saw_inner = true;
                assert!((rho - 0.8).abs() < 1e-12);
                assert!(radial_dot < 0.0);
            }
        }
        assert!(saw_inner && saw_outer);
    }

    #[test]
    fn box_face_mesh_is_fine_enough() {
        let b = DomainSpec::Box {
            lower: vec![0.0, 0.0],
            upper: vec![4.0, 3.0],
        };
        let density = 10;
        let mesh = b.diameter() / density as f64; // 0.5
        let samples = b.boundary_sample(density);
        // bottom edge points sorted by x must be spaced <= mesh
        let mut xs: Vec<f64> = samples
            .iter()
            .filter(|s| s.point[1] == 0.0 && s.normal[1] == -1.0)
            .map(|s| s.point[0])
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(xs.len() >= 2);
        for w in xs.windows(2) {
            assert!(w[1] - w[0] <= mesh + 1e-12);
        }
    }

    #[test]
    fn standard_form_combines_orders_and_remainder() {
        // F_1 = (x1), F_2 = (1), R = (eps) => F(t,x,eps) = x1 + eps*1 + eps^2*eps
        let field = VectorFieldExpansion::<f64>::new(
            1,
            1.0,
            vec![
                vec![Expression::parse("x1").unwrap()],
                vec![Expression::parse("1").unwrap()],
            ],
            vec![Expression::parse("eps").unwrap()],
        )
        .unwrap();
        let v = field.eval_standard_form(0.0, &[3.0], 0.5).unwrap();
        assert!((v[0] - (3.0 + 0.5 + 0.125)).abs() < 1e-15);
    }

    #[test]
    fn interior_grid_respects_closure() {
        let ann = DomainSpec::Annulus {
            center: vec![0.0, 0.0],
            r_inner: 0.8,
            r_outer: 1.2,
        };
        let grid = ann.interior_grid(16);
        assert!(!grid.is_empty());
        for p in &grid {
            assert!(ann.contains(p, Containment::Closed).unwrap());
        }
    }

    #[test]
    fn cell_closure_tests() {
        let ann = DomainSpec::Annulus {
            center: vec![0.0, 0.0],
            r_inner: 0.5,
            r_outer: 2.0,
        };
        // cell with all corners in the annulus but crossing the hole
        assert!(!ann.cell_in_closure(&[-0.7, -0.7], &[0.7, 0.7]).unwrap());
        assert!(ann.cell_in_closure(&[0.8, 0.8], &[1.0, 1.0]).unwrap());
    }

    #[test]
    fn problem_round_trips_through_json() {
        let p: Problem<f64> = problem_from_json(problem_json()).unwrap();
        let v = p.to_json_value();
        let q: Problem<f64> = problem_from_json(v.clone()).unwrap();
        assert_eq!(q.to_json_value(), v);
    }
}
