//! Quadratic Lyapunov certificates for the reduced and boundary-layer
//! models, their composition `nu = V + W`, and an empirical exponential
//! stability check of the full system.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ChiError, Result};
use crate::linalg::{add, central_jacobian, fit_line, norm2, spectral_radius, sub};
use crate::manifold::{solve_h, solve_h_from, InitialGuess, ManifoldSolverConfig};
use crate::model::{BoxDomain, ChiSystem};
use crate::simulate::simulate_full;

/// A decrease factor passes only when it is below `1 - SIGMA_MARGIN`.
pub const SIGMA_MARGIN: f64 = 1e-6;
/// Residual bound for the Lyapunov solve, relative to `max(1, ||P||)`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;
/// Trajectory samples below this norm are excluded from decay fits; the
/// manifold solver's absolute tolerance makes smaller values unreliable.
pub const STABILITY_FLOOR: f64 = 1e-9;

/// `V(u) = u^T P u` with `P` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    p: DMatrix<f64>,
    lambda_min: f64,
    lambda_max: f64,
}

impl QuadraticForm {
    /// Rejects non-square, non-symmetric (exact comparison) and
    /// non-positive-definite matrices. No symmetrization is applied.
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() || p.nrows() == 0 {
            return Err(ChiError::DimensionMismatch {
                context: "quadratic form",
                expected: p.nrows(),
                actual: p.ncols(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ChiError::NonFinite {
                context: "quadratic form matrix".into(),
            });
        }
        if p != p.transpose() {
            return Err(ChiError::NotSymmetric);
        }
        let eig = p.clone().symmetric_eigenvalues();
        let lambda_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let lambda_max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lambda_min.is_nan() || lambda_min <= 0.0 {
            return Err(ChiError::NotPositiveDefinite(lambda_min));
        }
        Ok(Self {
            p,
            lambda_min,
            lambda_max,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is positive definite")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        let v = DVector::from_column_slice(u);
        v.dot(&(&self.p * &v))
    }

    /// Tight constants `(lambda_min(P), lambda_max(P))` with
    /// `lo ||u||^2 <= V(u) <= hi ||u||^2`.
    pub fn sandwich_bounds(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }
}

/// Sandwich constants of `u^T P u`.
pub fn sandwich_bounds(p: &DMatrix<f64>) -> Result<(f64, f64)> {
    Ok(QuadraticForm::new(p.clone())?.sandwich_bounds())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateSource {
    Reduced,
    Boundary,
}

/// Constants of one Lyapunov function:
/// `gamma_lo ||u||^2 <= V(u) <= gamma_hi ||u||^2`, `V(u+) <= sigma V(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub sigma: f64,
    pub source: CertificateSource,
}

impl LyapunovCertificate {
    pub fn validate(&self) -> Result<()> {
        check_constants(self.gamma_lo, self.gamma_hi, self.sigma)
    }
}

/// Constants of `nu = V + W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeCertificate {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub sigma: f64,
}

impl CompositeCertificate {
    pub fn validate(&self) -> Result<()> {
        check_constants(self.gamma_lo, self.gamma_hi, self.sigma)
    }
}

fn check_constants(lo: f64, hi: f64, sigma: f64) -> Result<()> {
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(ChiError::Certificate(format!(
            "gamma_lo must be positive, got {lo}"
        )));
    }
    if lo > hi {
        return Err(ChiError::Certificate(format!(
            "gamma_lo {lo} exceeds gamma_hi {hi}"
        )));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(ChiError::Certificate(format!(
            "sigma must lie in (0, 1), got {sigma}"
        )));
    }
    Ok(())
}

/// True when a sampled decrease factor clears the round-off margin.
pub fn sigma_passes(sigma: f64) -> bool {
    sigma < 1.0 - SIGMA_MARGIN
}

/// Combines the reduced-model and boundary-layer certificates:
/// `min` of the lower constants, `max` of the upper constants and of the
/// decrease factors.
pub fn compose_certificates(
    cx: &LyapunovCertificate,
    cy: &LyapunovCertificate,
) -> Result<CompositeCertificate> {
    if cx.source != CertificateSource::Reduced || cy.source != CertificateSource::Boundary {
        return Err(ChiError::Certificate(
            "expected a reduced certificate followed by a boundary certificate".into(),
        ));
    }
    cx.validate()?;
    cy.validate()?;
    Ok(CompositeCertificate {
        gamma_lo: cx.gamma_lo.min(cy.gamma_lo),
        gamma_hi: cx.gamma_hi.max(cy.gamma_hi),
        sigma: cx.sigma.max(cy.sigma),
    })
}

/// Sampled `max V(step(u)) / V(u)` over nonzero `u` drawn uniformly from
/// `domain`. An estimate of the supremum, not a bound.
pub fn decrease_factor<F>(
    v: &QuadraticForm,
    step: F,
    domain: &BoxDomain,
    n_samples: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if n_samples == 0 {
        return Err(ChiError::InvalidArgument("n_samples must be >= 1".into()));
    }
    if domain.dim() != v.dim() {
        return Err(ChiError::DimensionMismatch {
            context: "decrease_factor domain",
            expected: v.dim(),
            actual: domain.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<f64> = None;
    for _ in 0..n_samples {
        let u = domain.sample(&mut rng);
        let vu = v.eval(&u);
        if vu == 0.0 {
            continue;
        }
        let ratio = v.eval(&step(&u)?) / vu;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.ok_or_else(|| ChiError::InvalidArgument("every sample was at the origin".into()))
}

/// Reduced-model step `x -> x + f(mu h(x))`.
pub fn reduced_map<'a>(
    sys: &'a ChiSystem,
    cfg: &'a ManifoldSolverConfig,
) -> impl Fn(&[f64]) -> Result<Vec<f64>> + 'a {
    move |x: &[f64]| {
        let h = solve_h(sys, x, cfg)?;
        let w: Vec<f64> = h.iter().map(|v| sys.mu() * v).collect();
        Ok(add(x, &sys.eval_f(&w)?))
    }
}

/// Boundary-layer step `y -> g(x_s, y + h(x_s), 0) - h(x_s)` at a fixed `x_s`.
pub fn boundary_map(sys: &ChiSystem, x_s: &[f64], h: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    Ok(sub(&sys.eval_g_quasi_steady(x_s, &add(y, h))?, h))
}

/// Boundary-layer decrease factor, sampled jointly over `x_s in D_x` and
/// `y in D_z` so the estimate reflects uniformity in `x_s`.
pub fn boundary_decrease_factor(
    sys: &ChiSystem,
    w: &QuadraticForm,
    n_samples: usize,
    seed: u64,
    cfg: &ManifoldSolverConfig,
) -> Result<f64> {
    let n_x = sys.n_x();
    let joint = sys.domain_x().product(sys.domain_z());
    if w.dim() != sys.m_z() {
        return Err(ChiError::DimensionMismatch {
            context: "boundary quadratic form",
            expected: sys.m_z(),
            actual: w.dim(),
        });
    }
    if n_samples == 0 {
        return Err(ChiError::InvalidArgument("n_samples must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<f64> = None;
    for _ in 0..n_samples {
        let s = joint.sample(&mut rng);
        let (x_s, y) = s.split_at(n_x);
        let wy = w.eval(y);
        if wy == 0.0 {
            continue;
        }
        let h = solve_h(sys, x_s, cfg)?;
        let ratio = w.eval(&boundary_map(sys, x_s, &h, y)?) / wy;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.ok_or_else(|| ChiError::InvalidArgument("every sample had y = 0".into()))
}

/// Solves `A^T P A - P = -I` for symmetric positive-definite `P`.
pub fn solve_discrete_lyapunov(a: &DMatrix<f64>) -> Result<QuadraticForm> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(ChiError::DimensionMismatch {
            context: "Lyapunov matrix",
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(ChiError::NonFinite {
            context: "Lyapunov matrix".into(),
        });
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(ChiError::Unstable(rho));
    }
    let d = a.nrows();
    let at = a.transpose();
    // vec(A^T P A) = (A^T kron A^T) vec(P) for column-major vec.
    let lhs = at.kronecker(&at) - DMatrix::<f64>::identity(d * d, d * d);
    let rhs = -DVector::from_column_slice(DMatrix::<f64>::identity(d, d).as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| ChiError::Fit("Lyapunov system is singular".into()))?;
    let p = DMatrix::from_column_slice(d, d, sol.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    let residual = (&at * &p * a - &p + DMatrix::<f64>::identity(d, d)).norm();
    if residual > LYAPUNOV_RESIDUAL_TOL * p.norm().max(1.0) {
        return Err(ChiError::Fit(format!(
            "Lyapunov residual {residual:e} too large"
        )));
    }
    QuadraticForm::new(p)
}

/// Finite-difference Jacobian of the reduced map at the origin.
pub fn linearize_reduced(sys: &ChiSystem, cfg: &ManifoldSolverConfig) -> Result<DMatrix<f64>> {
    let zero = vec![0.0; sys.n_x()];
    central_jacobian(reduced_map(sys, cfg), &zero, cfg.fd_step)
}

/// Finite-difference Jacobian of the boundary-layer map at `x_s = 0`, `y = 0`.
pub fn linearize_boundary(sys: &ChiSystem, cfg: &ManifoldSolverConfig) -> Result<DMatrix<f64>> {
    let x0 = vec![0.0; sys.n_x()];
    let h0 = solve_h(sys, &x0, cfg)?;
    let zero = vec![0.0; sys.m_z()];
    central_jacobian(|y| boundary_map(sys, &x0, &h0, y), &zero, cfg.fd_step)
}

/// Quadratic certificates from the linearizations plus their composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateAnalysis {
    pub reduced_linearization: Vec<Vec<f64>>,
    pub boundary_linearization: Vec<Vec<f64>>,
    pub reduced_p: Vec<Vec<f64>>,
    pub boundary_p: Vec<Vec<f64>>,
    pub reduced: LyapunovCertificate,
    pub boundary: LyapunovCertificate,
    /// `None` when either decrease factor fails the `sigma < 1` test.
    pub composite: Option<CompositeCertificate>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Builds `V` and `W` by solving the discrete Lyapunov equation for the
/// linearized reduced and boundary maps, then samples their decrease
/// factors on the nonlinear maps.
pub fn build_certificates(
    sys: &ChiSystem,
    n_samples: usize,
    seed: u64,
    cfg: &ManifoldSolverConfig,
) -> Result<CertificateAnalysis> {
    let ay = linearize_boundary(sys, cfg).map_err(|e| e.in_model("boundary-layer"))?;
    let w = solve_discrete_lyapunov(&ay).map_err(|e| e.in_model("boundary-layer"))?;
    let ax = linearize_reduced(sys, cfg).map_err(|e| e.in_model("reduced"))?;
    let v = solve_discrete_lyapunov(&ax).map_err(|e| e.in_model("reduced"))?;
    let sigma_x = decrease_factor(&v, reduced_map(sys, cfg), sys.domain_x(), n_samples, seed)?;
    let sigma_y = boundary_decrease_factor(sys, &w, n_samples, seed.wrapping_add(1), cfg)?;
    let (gx_lo, gx_hi) = v.sandwich_bounds();
    let (gy_lo, gy_hi) = w.sandwich_bounds();
    let reduced = LyapunovCertificate {
        gamma_lo: gx_lo,
        gamma_hi: gx_hi,
        sigma: sigma_x,
        source: CertificateSource::Reduced,
    };
    let boundary = LyapunovCertificate {
        gamma_lo: gy_lo,
        gamma_hi: gy_hi,
        sigma: sigma_y,
        source: CertificateSource::Boundary,
    };
    let composite = if sigma_passes(sigma_x) && sigma_passes(sigma_y) {
        Some(compose_certificates(&reduced, &boundary)?)
    } else {
        None
    };
    Ok(CertificateAnalysis {
        reduced_linearization: rows(&ax),
        boundary_linearization: rows(&ay),
        reduced_p: rows(v.matrix()),
        boundary_p: rows(w.matrix()),
        reduced,
        boundary,
        composite,
    })
}

/// Initial condition `(x0, z0)`.
pub type InitialCondition = (Vec<f64>, Vec<f64>);

/// 3 x 3 grid: each block at `-1/2`, `0` or `+1/2` of its domain bound.
pub fn default_grid(sys: &ChiSystem) -> Vec<InitialCondition> {
    let pick = |d: &BoxDomain, s: i32| -> Vec<f64> {
        d.lo.iter()
            .zip(&d.hi)
            .map(|(lo, hi)| match s {
                -1 => 0.5 * lo,
                1 => 0.5 * hi,
                _ => 0.0,
            })
            .collect()
    };
    let mut grid = Vec::with_capacity(9);
    for sx in [-1, 0, 1] {
        for sz in [-1, 0, 1] {
            grid.push((pick(sys.domain_x(), sx), pick(sys.domain_z(), sz)));
        }
    }
    grid
}

/// Empirical exponential-stability test on a grid of initial conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCriterion {
    pub grid: Vec<InitialCondition>,
    pub n_steps: usize,
    /// A trajectory passes when its fitted rate is below `1 - delta`.
    pub delta: f64,
    pub solver: ManifoldSolverConfig,
}

impl StabilityCriterion {
    /// 9-point grid, 2000 steps, `delta = 0.01`.
    pub fn default_for(sys: &ChiSystem) -> Self {
        Self {
            grid: default_grid(sys),
            n_steps: 2000,
            delta: 0.01,
            solver: ManifoldSolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(ChiError::InvalidArgument("stability grid is empty".into()));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(ChiError::InvalidArgument(format!(
                "delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if self.n_steps == 0 {
            return Err(ChiError::InvalidArgument("n_steps must be >= 1".into()));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrajectoryVerdict {
    /// Fitted rate below the threshold.
    Pass,
    /// Zero initial offset: the equilibrium itself.
    Trivial,
    /// Fitted rate at or above the threshold.
    SlowDecay,
    Diverged {
        index: usize,
    },
    Failed {
        message: String,
    },
}

/// Decay fit of `||(x[n], z[n] - h(x[n]))||` for one initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStability {
    pub x0: Vec<f64>,
    pub z0: Vec<f64>,
    pub rho: Option<f64>,
    /// Smallest `C` with `e[n] <= C rho^n` on the fitted samples.
    pub c: Option<f64>,
    pub r2: Option<f64>,
    /// Samples used in the fit.
    pub samples: usize,
    pub verdict: TrajectoryVerdict,
}

impl TrajectoryStability {
    pub fn passed(&self) -> bool {
        matches!(
            self.verdict,
            TrajectoryVerdict::Pass | TrajectoryVerdict::Trivial
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub mu: f64,
    pub rho_threshold: f64,
    pub trajectories: Vec<TrajectoryStability>,
    pub rho_max: Option<f64>,
    pub all_pass: bool,
}

/// Simulates from `(x0, z0)` and fits the decay rate of the offset from the
/// equilibrium measured in slow-manifold coordinates.
pub fn trajectory_decay(
    sys: &ChiSystem,
    x0: &[f64],
    z0: &[f64],
    n_steps: usize,
    rho_threshold: f64,
    cfg: &ManifoldSolverConfig,
) -> TrajectoryStability {
    let mut out = TrajectoryStability {
        x0: x0.to_vec(),
        z0: z0.to_vec(),
        rho: None,
        c: None,
        r2: None,
        samples: 0,
        verdict: TrajectoryVerdict::Trivial,
    };
    let (x, z) = match simulate_full(sys, x0, z0, n_steps) {
        Ok(t) => t,
        Err(e) => {
            out.verdict = match e.divergence_index() {
                Some(index) => TrajectoryVerdict::Diverged { index },
                None => TrajectoryVerdict::Failed {
                    message: e.to_string(),
                },
            };
            return out;
        }
    };

    let mut norms = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    for (xn, zn) in x.iter().zip(z.iter()) {
        let guess = match cfg.initial_guess {
            InitialGuess::WarmStart => prev.as_deref(),
            InitialGuess::Zero => None,
        };
        let h = match solve_h_from(sys, xn, guess, cfg) {
            Ok(h) => h,
            Err(e) => {
                out.verdict = TrajectoryVerdict::Failed {
                    message: e.at_index(norms.len()).to_string(),
                };
                return out;
            }
        };
        let off = sub(zn, &h);
        let e = (norm2(xn).powi(2) + norm2(&off).powi(2)).sqrt();
        prev = Some(h);
        if e < STABILITY_FLOOR {
            break;
        }
        norms.push(e);
    }
    out.samples = norms.len();
    if norms.is_empty() {
        return out;
    }

    let (rho, r2) = if norms.len() >= 2 {
        let ns: Vec<f64> = (0..norms.len()).map(|n| n as f64).collect();
        let logs: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
        match fit_line(&ns, &logs) {
            Ok(fit) => (fit.slope.exp(), fit.r2),
            Err(e) => {
                out.verdict = TrajectoryVerdict::Failed {
                    message: e.to_string(),
                };
                return out;
            }
        }
    } else {
        // Dropped below the floor after one step.
        (STABILITY_FLOOR / norms[0], 1.0)
    };
    let c = norms
        .iter()
        .enumerate()
        .map(|(n, v)| v / rho.powi(n as i32))
        .fold(0.0, f64::max);
    out.rho = Some(rho);
    out.c = Some(c);
    out.r2 = Some(r2);
    out.verdict = if rho < rho_threshold {
        TrajectoryVerdict::Pass
    } else {
        TrajectoryVerdict::SlowDecay
    };
    out
}

/// Runs [`trajectory_decay`] over the criterion's grid (in parallel, results
/// kept in grid order).
pub fn empirical_stability(
    sys: &ChiSystem,
    criterion: &StabilityCriterion,
) -> Result<StabilityReport> {
    criterion.validate()?;
    for (x0, z0) in &criterion.grid {
        if x0.len() != sys.n_x() || z0.len() != sys.m_z() {
            return Err(ChiError::DimensionMismatch {
                context: "stability grid point",
                expected: sys.n_x() + sys.m_z(),
                actual: x0.len() + z0.len(),
            });
        }
    }
    let threshold = 1.0 - criterion.delta;
    let trajectories: Vec<TrajectoryStability> = criterion
        .grid
        .par_iter()
        .map(|(x0, z0)| {
            trajectory_decay(sys, x0, z0, criterion.n_steps, threshold, &criterion.solver)
        })
        .collect();
    let rho_max = trajectories
        .iter()
        .filter_map(|t| t.rho)
        .fold(None, |acc: Option<f64>, r| {
            Some(acc.map_or(r, |a| a.max(r)))
        });
    let all_pass = trajectories.iter().all(TrajectoryStability::passed);
    Ok(StabilityReport {
        mu: sys.mu(),
        rho_threshold: threshold,
        trajectories,
        rho_max,
        all_pass,
    })
}

/// Checks that every grid trajectory of the full system decays with a fitted
/// rate below 1. The composite certificate must be valid; it documents the
/// hypotheses under which the conclusion is expected.
pub fn check_full_system_stability(
    sys: &ChiSystem,
    composite: &CompositeCertificate,
    grid: &[InitialCondition],
    n_steps: usize,
    cfg: &ManifoldSolverConfig,
) -> Result<StabilityReport> {
    composite.validate()?;
    let criterion = StabilityCriterion {
        grid: grid.to_vec(),
        n_steps,
        delta: 0.0,
        solver: *cfg,
    };
    empirical_stability(sys, &criterion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin::{lin1, unstable_boundary};
    use approx::assert_abs_diff_eq;

    fn m(rows: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, data.len() / rows, data)
    }

    #[test]
    fn sandwich_examples() {
        assert_eq!(
            sandwich_bounds(&DMatrix::identity(3, 3)).unwrap(),
            (1.0, 1.0)
        );
        let (lo, hi) = sandwich_bounds(&m(2, &[1.0, 0.0, 0.0, 4.0])).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 4.0, epsilon = 1e-14);
        assert!(matches!(
            sandwich_bounds(&m(2, &[0.0, 1.0, 1.0, 0.0])),
            Err(ChiError::NotPositiveDefinite(_))
        ));
        assert!(matches!(
            QuadraticForm::new(m(2, &[2.0, 1.0, 1.0 + 1e-15, 2.0])),
            Err(ChiError::NotSymmetric)
        ));
    }

    #[test]
    fn lyapunov_examples() {
        let p = solve_discrete_lyapunov(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(p.matrix(), &DMatrix::<f64>::identity(2, 2));
        let p = solve_discrete_lyapunov(&m(1, &[0.5])).unwrap();
        assert_abs_diff_eq!(p.matrix()[(0, 0)], 4.0 / 3.0, epsilon = 1e-14);
        assert!(matches!(
            solve_discrete_lyapunov(&m(1, &[1.1])),
            Err(ChiError::Unstable(_))
        ));
    }

    #[test]
    fn lyapunov_residual_nonsymmetric_a() {
        let a = m(3, &[0.5, 0.3, 0.0, -0.2, 0.4, 0.1, 0.0, 0.25, -0.6]);
        let p = solve_discrete_lyapunov(&a).unwrap();
        let r = a.transpose() * p.matrix() * &a - p.matrix() + DMatrix::<f64>::identity(3, 3);
        assert!(r.norm() <= 1e-12);
    }

    #[test]
    fn compose_examples() {
        let cx = LyapunovCertificate {
            gamma_lo: 1.0,
            gamma_hi: 2.0,
            sigma: 0.9,
            source: CertificateSource::Reduced,
        };
        let cy = LyapunovCertificate {
            gamma_lo: 0.5,
            gamma_hi: 4.0,
            sigma: 0.25,
            source: CertificateSource::Boundary,
        };
        let c = compose_certificates(&cx, &cy).unwrap();
        assert_eq!((c.gamma_lo, c.gamma_hi, c.sigma), (0.5, 4.0, 0.9));
        let same = LyapunovCertificate {
            source: CertificateSource::Boundary,
            ..cx
        };
        let c = compose_certificates(&cx, &same).unwrap();
        assert_eq!((c.gamma_lo, c.gamma_hi, c.sigma), (1.0, 2.0, 0.9));
        let bad = LyapunovCertificate { sigma: 1.0, ..cy };
        assert!(compose_certificates(&cx, &bad).is_err());
        assert!(compose_certificates(&cy, &cx).is_err());
    }

    #[test]
    fn decrease_factor_examples() {
        let cfg = ManifoldSolverConfig::default();
        let sys = lin1().with_mu(0.1).unwrap();
        let v = QuadraticForm::identity(1);
        let s = decrease_factor(&v, reduced_map(&sys, &cfg), sys.domain_x(), 500, 42).unwrap();
        assert_abs_diff_eq!(s, 0.9025, epsilon = 1e-12);

        let s = decrease_factor(&v, |u| Ok(u.to_vec()), sys.domain_x(), 50, 1).unwrap();
        assert_eq!(s, 1.0);
        assert!(!sigma_passes(s));

        let s = boundary_decrease_factor(&sys, &v, 500, 42, &cfg).unwrap();
        assert_abs_diff_eq!(s, 0.25, epsilon = 1e-9);
    }

    #[test]
    fn grid_shape() {
        let g = default_grid(&lin1());
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], (vec![-1.0], vec![-1.0]));
        assert_eq!(g[4], (vec![0.0], vec![0.0]));
    }

    #[test]
    fn zero_initial_condition_is_trivial() {
        let t = trajectory_decay(
            &lin1(),
            &[0.0],
            &[0.0],
            100,
            1.0,
            &ManifoldSolverConfig::default(),
        );
        assert_eq!(t.verdict, TrajectoryVerdict::Trivial);
        assert!(t.passed());
        assert!(t.rho.is_none());
    }

    #[test]
    fn unstable_control_diverges() {
        let t = trajectory_decay(
            &unstable_boundary(),
            &[0.0],
            &[1.0],
            2000,
            1.0,
            &ManifoldSolverConfig::default(),
        );
        assert_eq!(t.verdict, TrajectoryVerdict::Diverged { index: 40 });
    }
}
