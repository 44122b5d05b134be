//! Query parameter selection.
//!
//! Strict mode enforces the constraints under which recovery is guaranteed:
//!
//! * `pi >= max(18 k, 18 R / (phi sqrt(lambda)))`
//! * `epsilon <= min(1/2, phi pi sqrt(lambda) / (828 n))`
//! * `delta <= lambda / (54 (2 + 12 n / pi))`
//!
//! These constants are loose, so strict parameters are usually infeasible at
//! small `n`. Practical mode takes user overrides and reports violations as
//! warnings.

use std::fmt;
use std::str::FromStr;

use crate::ecc::Codebook;
use crate::error::{Error, Result};
use crate::sketch::{buckets_for_epsilon, MAX_SKETCH_CELLS};

pub const DEFAULT_THETA: f64 = 2.0 / 3.0;
pub const DEFAULT_PRACTICAL_GAMMA: usize = 16;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParamMode {
    Strict,
    #[default]
    Practical,
}

impl FromStr for ParamMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Self::Strict),
            "practical" => Ok(Self::Practical),
            other => Err(Error::Parameter(format!("unknown mode {other:?}, expected strict or practical"))),
        }
    }
}

impl fmt::Display for ParamMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Strict => "strict",
            Self::Practical => "practical",
        })
    }
}

/// What the caller asks for; unset overrides fall back to mode defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRequest {
    pub phi: f64,
    pub k: usize,
    /// Bound on the Frobenius norm of the correlation matrix after removing
    /// the diagonal and the `k` largest off-diagonal entries.
    pub residual: f64,
    pub theta: f64,
    pub mode: ParamMode,
    pub pi: Option<usize>,
    pub gamma: Option<usize>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
}

impl QueryRequest {
    pub fn new(phi: f64, k: usize, residual: f64) -> Self {
        Self {
            phi,
            k,
            residual,
            theta: DEFAULT_THETA,
            mode: ParamMode::default(),
            pi: None,
            gamma: None,
            epsilon: None,
            delta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryParams {
    pub phi: f64,
    pub k: usize,
    pub residual: f64,
    pub pi: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: usize,
    pub theta: f64,
    pub lambda: f64,
    pub mode: ParamMode,
    pub warnings: Vec<String>,
}

/// Limits implied by the recovery guarantee for a given `pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrictBounds {
    pub min_pi: usize,
    pub max_epsilon: f64,
    pub max_delta: f64,
}

/// Smallest admissible `pi`, ignoring the `theta` scaling.
pub fn min_buckets(phi: f64, k: usize, residual: f64, lambda: f64) -> usize {
    let by_k = 18 * k;
    let by_residual = (18.0 * residual / (phi * lambda.sqrt())).ceil() as usize;
    by_k.max(by_residual).max(1)
}

pub fn max_epsilon(n: usize, phi: f64, pi: usize, lambda: f64) -> f64 {
    (phi * pi as f64 * lambda.sqrt() / (828.0 * n as f64)).min(0.5)
}

pub fn max_delta(n: usize, pi: usize, lambda: f64) -> f64 {
    lambda / (54.0 * (2.0 + 12.0 * n as f64 / pi as f64))
}

pub fn strict_bounds(n: usize, phi: f64, k: usize, residual: f64, lambda: f64, pi: usize) -> StrictBounds {
    StrictBounds {
        min_pi: min_buckets(phi, k, residual, lambda),
        max_epsilon: max_epsilon(n, phi, pi, lambda),
        max_delta: max_delta(n, pi, lambda),
    }
}

/// `ceil(n^theta * (k + R / phi))`, at least 1.
pub fn scaled_buckets(n: usize, theta: f64, phi: f64, k: usize, residual: f64) -> usize {
    let v = (n as f64).powf(theta) * (k as f64 + residual / phi);
    (v.ceil() as usize).max(1)
}

pub fn strict_gamma(n: usize) -> usize {
    ((10.0 * (n as f64).log2()).ceil() as usize).max(1)
}

fn validate(n: usize, req: &QueryRequest) -> Result<()> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 rows, got {n}")));
    }
    if !(req.phi.is_finite() && req.phi > 0.0) {
        return Err(Error::Parameter(format!("phi must be positive, got {}", req.phi)));
    }
    if !(req.residual.is_finite() && req.residual >= 0.0) {
        return Err(Error::Parameter(format!("R must be non-negative, got {}", req.residual)));
    }
    if !(0.0..=1.0).contains(&req.theta) {
        return Err(Error::Parameter(format!("theta must lie in [0, 1], got {}", req.theta)));
    }
    if let Some(e) = req.epsilon {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(Error::Parameter(format!("epsilon must be non-negative, got {e}")));
        }
    }
    if let Some(d) = req.delta {
        if !(0.0..1.0).contains(&d) {
            return Err(Error::Parameter(format!("delta must lie in [0, 1), got {d}")));
        }
    }
    if req.gamma == Some(0) {
        return Err(Error::Parameter("gamma must be at least 1".into()));
    }
    if let Some(pi) = req.pi {
        if pi == 0 || pi > n {
            return Err(Error::Parameter(format!("pi = {pi} must lie in [1, {n}]")));
        }
    }
    Ok(())
}

pub fn select_parameters(n: usize, req: &QueryRequest, codebook: &Codebook) -> Result<QueryParams> {
    validate(n, req)?;
    let lambda = codebook.lambda();
    match req.mode {
        ParamMode::Strict => select_strict(n, req, lambda),
        ParamMode::Practical => Ok(select_practical(n, req, lambda)),
    }
}

fn select_strict(n: usize, req: &QueryRequest, lambda: f64) -> Result<QueryParams> {
    if req.phi > 1.0 {
        return Err(Error::Parameter(format!("strict mode needs phi <= 1, got {}", req.phi)));
    }
    if req.k == 0 {
        return Err(Error::Parameter("strict mode needs k >= 1".into()));
    }
    let floor = min_buckets(req.phi, req.k, req.residual, lambda);
    let scaled = scaled_buckets(n, req.theta, req.phi, req.k, req.residual);
    let pi = req.pi.unwrap_or(0).max(floor).max(scaled);
    if pi > n {
        return Err(Error::Infeasible {
            constraint: "pi",
            detail: format!("pi >= {pi}, but only {n} rows exist"),
        });
    }
    let eps_max = max_epsilon(n, req.phi, pi, lambda);
    let delta_max = max_delta(n, pi, lambda);
    let epsilon = match req.epsilon {
        Some(e) if e > eps_max => {
            return Err(Error::Infeasible {
                constraint: "epsilon",
                detail: format!("epsilon <= {eps_max:.3e}, got {e}"),
            })
        }
        Some(e) => e,
        None => eps_max,
    };
    // Zero means exact sketches, which need no buckets bound.
    let cells = if epsilon > 0.0 { buckets_for_epsilon(epsilon) } else { 0.0 };
    if cells > MAX_SKETCH_CELLS as f64 {
        return Err(Error::Infeasible {
            constraint: "epsilon",
            detail: format!(
                "epsilon <= {epsilon:.3e}, i.e. b = {cells:.3e} buckets per row (limit {MAX_SKETCH_CELLS})"
            ),
        });
    }
    let delta = match req.delta {
        Some(d) if d > delta_max => {
            return Err(Error::Infeasible {
                constraint: "delta",
                detail: format!("delta <= {delta_max:.3e}, got {d}"),
            })
        }
        Some(d) => d,
        None => delta_max,
    };
    Ok(QueryParams {
        phi: req.phi,
        k: req.k,
        residual: req.residual,
        pi,
        epsilon,
        delta,
        gamma: req.gamma.unwrap_or_else(|| strict_gamma(n)),
        theta: req.theta,
        lambda,
        mode: ParamMode::Strict,
        warnings: Vec::new(),
    })
}

fn select_practical(n: usize, req: &QueryRequest, lambda: f64) -> QueryParams {
    let pi = req
        .pi
        .unwrap_or_else(|| scaled_buckets(n, req.theta, req.phi, req.k, req.residual).clamp(1, n));
    let epsilon = req.epsilon.unwrap_or(DEFAULT_EPSILON);
    let delta = req.delta.unwrap_or(DEFAULT_DELTA);
    let mut warnings = Vec::new();
    if req.phi > 1.0 {
        warnings.push(format!("phi = {} exceeds 1, no pair can qualify", req.phi));
    } else {
        let floor = min_buckets(req.phi, req.k, req.residual, lambda);
        if pi < floor {
            warnings.push(format!("pi = {pi} is below the guaranteed-recovery minimum {floor}"));
        }
        let eps_max = max_epsilon(n, req.phi, pi, lambda);
        if epsilon > eps_max {
            warnings.push(format!("epsilon = {epsilon} exceeds the guaranteed-recovery maximum {eps_max:.3e}"));
        }
        let delta_max = max_delta(n, pi, lambda);
        if delta > delta_max {
            warnings.push(format!("delta = {delta} exceeds the guaranteed-recovery maximum {delta_max:.3e}"));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    QueryParams {
        phi: req.phi,
        k: req.k,
        residual: req.residual,
        pi,
        epsilon,
        delta,
        gamma: req.gamma.unwrap_or(DEFAULT_PRACTICAL_GAMMA),
        theta: req.theta,
        lambda,
        mode: ParamMode::Practical,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_floor_binding_on_k() {
        assert_eq!(min_buckets(0.5, 4, 0.0, 0.15), 72);
    }

    #[test]
    fn bucket_floor_binding_on_residual() {
        // 36 / (0.5 * sqrt(0.15)) = 185.9...
        assert_eq!(min_buckets(0.5, 4, 2.0, 0.15), 186);
    }

    #[test]
    fn practical_allows_empty_promise() {
        let cb = Codebook::for_indices(64).unwrap();
        let mut req = QueryRequest::new(0.8, 0, 0.0);
        req.theta = 0.0;
        let p = select_parameters(64, &req, &cb).unwrap();
        assert_eq!(p.pi, 1);
        req.mode = ParamMode::Strict;
        assert!(select_parameters(64, &req, &cb).is_err());
    }

    #[test]
    fn strict_reports_binding_constraint() {
        let cb = Codebook::for_indices(1024).unwrap();
        let mut req = QueryRequest::new(0.5, 4, 2.0);
        req.mode = ParamMode::Strict;
        req.theta = 0.0;
        match select_parameters(1024, &req, &cb) {
            Err(Error::Infeasible { constraint, .. }) => assert_eq!(constraint, "epsilon"),
            other => panic!("expected infeasible epsilon, got {other:?}"),
        }
    }
}
