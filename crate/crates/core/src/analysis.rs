//! Error measurement and empirical checks of the O(mu) approximation claims.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ChiError, Result};
use crate::linalg::{dist2, fit_line, norm2};
use crate::lyapunov::{empirical_stability, StabilityCriterion};
use crate::manifold::{solve_h, ManifoldSolverConfig};
use crate::model::{BoxDomain, ChiSystem};
use crate::simulate::{
    simulate_boundary_layer_on, simulate_full, simulate_reduced, BoundaryMode, Trajectory,
};

/// Errors are clamped to this before taking logarithms.
pub const ERROR_FLOOR: f64 = 1e-300;
/// Largest admissible perturbation parameter in a sweep.
pub const MU_MAX: f64 = 1.0;
/// Boundary-layer samples below this fraction of `||y[0]||` are left out of
/// the decay fit; they sit at round-off level.
pub const DECAY_FIT_REL_FLOOR: f64 = 1e-8;

/// `e[n] = ||a[n] - b[n]||_2`.
pub fn error_series(a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    if a.dim() != b.dim() {
        return Err(ChiError::DimensionMismatch {
            context: "error_series dimension",
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    if a.len() != b.len() {
        return Err(ChiError::DimensionMismatch {
            context: "error_series length",
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter().zip(b.iter()).map(|(p, q)| dist2(p, q)).collect())
}

/// Which approximation error a sweep measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTarget {
    /// `sup_n ||x[n] - x_s[n]||`.
    SlowError,
    /// `sup_n ||z[n] - h(x_s[n]) - y[n]||`.
    FastCompositeError,
    /// `sup_{n >= n1(mu)} ||z[n] - h(x_s[n])||`.
    FastTailError,
}

impl ErrorTarget {
    pub const ALL: [ErrorTarget; 3] = [
        ErrorTarget::SlowError,
        ErrorTarget::FastCompositeError,
        ErrorTarget::FastTailError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorTarget::SlowError => "slow_error",
            ErrorTarget::FastCompositeError => "fast_composite_error",
            ErrorTarget::FastTailError => "fast_tail_error",
        }
    }
}

/// Exponential decay `||y[n]|| ~ epsilon ||y[0]|| exp(-theta n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub theta: f64,
    pub epsilon: f64,
    pub r2: f64,
}

/// Result of a mu sweep for one error target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub target: ErrorTarget,
    /// Strictly decreasing.
    pub mu_values: Vec<f64>,
    pub sup_errors: Vec<f64>,
    /// Log-log slope of `sup_errors` against `mu_values`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `sup_n ||x_s[n]||` at the largest mu.
    pub alpha: f64,
    /// `sup_n ||y[n]||` at the largest mu.
    pub beta: f64,
    /// True when every error was below [`ERROR_FLOOR`].
    pub degenerate: bool,
    pub below_floor: Vec<bool>,
    /// Per-mu boundary-layer decay fits (tail target only; `None` when the
    /// boundary layer starts at zero).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_fits: Option<Vec<Option<DecayFit>>>,
    /// Per-mu `n1` thresholds (tail target only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1_values: Option<Vec<usize>>,
}

impl ScalingReport {
    /// `sup_error / mu` for each sweep point.
    pub fn scaled_errors(&self) -> Vec<f64> {
        self.sup_errors
            .iter()
            .zip(&self.mu_values)
            .map(|(e, m)| e / m)
            .collect()
    }

    /// Ratio of the largest to the smallest `sup_error / mu`; 1 means a
    /// perfectly uniform O(mu) constant.
    pub fn constant_spread(&self) -> f64 {
        let s = self.scaled_errors();
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }
}

/// Sweep inputs shared by every target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub x0: Vec<f64>,
    pub z0: Vec<f64>,
    pub mu_values: Vec<f64>,
    pub n_steps: usize,
    pub solver: ManifoldSolverConfig,
}

/// All error measures for one mu.
#[derive(Debug, Clone, PartialEq)]
struct MuRun {
    slow: f64,
    composite: f64,
    tail: f64,
    decay: Option<DecayFit>,
    n1: usize,
    alpha: f64,
    beta: f64,
}

fn validated_mus(mu_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = mu_values
        .iter()
        .find(|m| !(m.is_finite() && **m > 0.0 && **m <= MU_MAX))
    {
        return Err(ChiError::InvalidArgument(format!(
            "mu values must lie in (0, {MU_MAX}], got {bad}"
        )));
    }
    let mut mus = mu_values.to_vec();
    mus.sort_by(|a, b| b.total_cmp(a));
    mus.dedup();
    if mus.len() < 2 {
        return Err(ChiError::InvalidArgument(
            "a slope needs at least two distinct mu values".into(),
        ));
    }
    Ok(mus)
}

fn run_one(sys: &ChiSystem, spec: &SweepSpec, with_tail: bool) -> Result<MuRun> {
    let n = spec.n_steps;
    let (x, z) = simulate_full(sys, &spec.x0, &spec.z0, n)?;
    let (xs, zs) = simulate_reduced(sys, &spec.x0, n, &spec.solver)?;
    let y0: Vec<f64> = spec.z0.iter().zip(zs.first()).map(|(a, b)| a - b).collect();
    let y = simulate_boundary_layer_on(sys, &xs, &zs, &y0, n, BoundaryMode::Tracking)?;

    let slow = error_series(&x, &xs)?.into_iter().fold(0.0, f64::max);
    let composite = z
        .iter()
        .zip(zs.iter())
        .zip(y.iter())
        .map(|((zn, hn), yn)| {
            zn.iter()
                .zip(hn)
                .zip(yn)
                .map(|((a, b), c)| (a - b - c) * (a - b - c))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);

    if !with_tail {
        return Ok(MuRun {
            slow,
            composite,
            tail: f64::NAN,
            decay: None,
            n1: 0,
            alpha: xs.norms().into_iter().fold(0.0, f64::max),
            beta: y.norms().into_iter().fold(0.0, f64::max),
        });
    }
    let decay = if norm2(&y0) > 0.0 {
        Some(fit_boundary_decay(&y)?)
    } else {
        None
    };
    let n1 = match decay {
        Some(d) => n1_threshold(sys.mu(), d.theta)?,
        None => 0,
    };
    if n1 > n {
        return Err(ChiError::InvalidArgument(format!(
            "horizon {n} is shorter than n1 = {n1}; increase the number of steps"
        )));
    }
    let tail = error_series(&z, &zs)?[n1..]
        .iter()
        .copied()
        .fold(0.0, f64::max);

    Ok(MuRun {
        slow,
        composite,
        tail,
        decay,
        n1,
        alpha: xs.norms().into_iter().fold(0.0, f64::max),
        beta: y.norms().into_iter().fold(0.0, f64::max),
    })
}

/// The tail target needs a boundary-layer decay fit; other targets skip it.
fn sweep(sys: &ChiSystem, spec: &SweepSpec, with_tail: bool) -> Result<(Vec<f64>, Vec<MuRun>)> {
    spec.solver.validate()?;
    let mus = validated_mus(&spec.mu_values)?;
    // Shape checks up front so errors are not attributed to a mu.
    if spec.x0.len() != sys.n_x() {
        return Err(ChiError::DimensionMismatch {
            context: "x0",
            expected: sys.n_x(),
            actual: spec.x0.len(),
        });
    }
    if spec.z0.len() != sys.m_z() {
        return Err(ChiError::DimensionMismatch {
            context: "z0",
            expected: sys.m_z(),
            actual: spec.z0.len(),
        });
    }
    let runs: Vec<Result<MuRun>> = mus
        .par_iter()
        .map(|&mu| {
            let s = sys.with_mu(mu)?;
            run_one(&s, spec, with_tail).map_err(|e| e.at_mu(mu))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((mus, runs))
}

fn report_for(target: ErrorTarget, mus: &[f64], runs: &[MuRun]) -> Result<ScalingReport> {
    let raw: Vec<f64> = runs
        .iter()
        .map(|r| match target {
            ErrorTarget::SlowError => r.slow,
            ErrorTarget::FastCompositeError => r.composite,
            ErrorTarget::FastTailError => r.tail,
        })
        .collect();
    let below_floor: Vec<bool> = raw.iter().map(|e| *e < ERROR_FLOOR).collect();
    let degenerate = below_floor.iter().all(|b| *b);
    let sup_errors: Vec<f64> = raw.iter().map(|e| e.max(ERROR_FLOOR)).collect();
    let log_mu: Vec<f64> = mus.iter().map(|m| m.ln()).collect();
    let log_e: Vec<f64> = sup_errors.iter().map(|e| e.ln()).collect();
    let fit = fit_line(&log_mu, &log_e)?;
    let tail = target == ErrorTarget::FastTailError;
    Ok(ScalingReport {
        target,
        mu_values: mus.to_vec(),
        sup_errors,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        alpha: runs[0].alpha,
        beta: runs[0].beta,
        degenerate,
        below_floor,
        decay_fits: tail.then(|| runs.iter().map(|r| r.decay).collect()),
        n1_values: tail.then(|| runs.iter().map(|r| r.n1).collect()),
    })
}

/// Runs the full, reduced and boundary-layer models at every mu and fits
/// `log(sup error)` against `log(mu)`. `y[0] = z0 - h(x0)`.
pub fn fit_order(sys: &ChiSystem, spec: &SweepSpec, target: ErrorTarget) -> Result<ScalingReport> {
    let (mus, runs) = sweep(sys, spec, target == ErrorTarget::FastTailError)?;
    report_for(target, &mus, &runs)
}

/// One sweep, one report per requested target.
pub fn fit_orders(
    sys: &ChiSystem,
    spec: &SweepSpec,
    targets: &[ErrorTarget],
) -> Result<Vec<ScalingReport>> {
    let with_tail = targets.contains(&ErrorTarget::FastTailError);
    let (mus, runs) = sweep(sys, spec, with_tail)?;
    targets
        .iter()
        .map(|t| report_for(*t, &mus, &runs))
        .collect()
}

/// Least-squares fit of `ln ||y[n]||` against `n` over the nonzero samples.
pub fn fit_exponential_decay(y: &Trajectory) -> Result<DecayFit> {
    let norms = y.norms();
    let y0 = norms[0];
    if y0 == 0.0 {
        return Err(ChiError::Fit("initial sample is zero".into()));
    }
    let (ns, logs): (Vec<f64>, Vec<f64>) = norms
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(n, v)| (n as f64, v.ln()))
        .unzip();
    if ns.len() < 3 {
        return Err(ChiError::Fit(format!(
            "need at least 3 nonzero samples, found {}",
            ns.len()
        )));
    }
    let fit = fit_line(&ns, &logs)?;
    if fit.slope >= 0.0 {
        return Err(ChiError::Fit(format!(
            "samples do not decay (log slope {:.6})",
            fit.slope
        )));
    }
    Ok(DecayFit {
        theta: -fit.slope,
        epsilon: fit.intercept.exp() / y0,
        r2: fit.r2,
    })
}

/// Decay fit over the leading samples that stay above
/// [`DECAY_FIT_REL_FLOOR`]` * ||y[0]||`.
pub fn fit_boundary_decay(y: &Trajectory) -> Result<DecayFit> {
    let norms = y.norms();
    let floor = DECAY_FIT_REL_FLOOR * norms[0];
    let keep = norms
        .iter()
        .take_while(|v| **v >= floor && **v > 0.0)
        .count();
    fit_exponential_decay(&y.prefix(keep.max(1)))
}

/// `ceil(-ln(mu) / theta)`: the index after which the boundary-layer term is
/// itself of order mu.
pub fn n1_threshold(mu: f64, theta: f64) -> Result<usize> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(ChiError::InvalidArgument(format!(
            "mu must lie in (0, 1], got {mu}"
        )));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(ChiError::InvalidArgument(format!(
            "theta must be positive, got {theta}"
        )));
    }
    Ok((-mu.ln() / theta).ceil().max(0.0) as usize)
}

/// Sampled lower bound on the Lipschitz constant of `map` over `domain`:
/// the largest `||map(u) - map(v)|| / ||u - v||` over `n_pairs` random pairs.
/// Pairs are drawn in a fixed order from `seed`, so more pairs never lower
/// the estimate.
pub fn estimate_lipschitz<F>(map: F, domain: &BoxDomain, n_pairs: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if n_pairs == 0 {
        return Err(ChiError::InvalidArgument("n_pairs must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<f64> = None;
    for _ in 0..n_pairs {
        let u = domain.sample(&mut rng);
        let v = domain.sample(&mut rng);
        let d = dist2(&u, &v);
        if d == 0.0 {
            continue;
        }
        let ratio = dist2(&map(&u)?, &map(&v)?) / d;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.ok_or_else(|| ChiError::InvalidArgument("every sampled pair was degenerate".into()))
}

/// Sampled Lipschitz estimate of `h` over `D_x`.
pub fn estimate_lipschitz_h(
    sys: &ChiSystem,
    cfg: &ManifoldSolverConfig,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    estimate_lipschitz(|x| solve_h(sys, x, cfg), sys.domain_x(), n_pairs, seed)
}

/// Outcome of the stability-threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuStarReport {
    pub mu_star: f64,
    /// Every probed mu with its verdict, in probe order.
    pub probes: Vec<(f64, bool)>,
}

/// Smallest probe is `mu_hi * MU_STAR_MIN_RATIO`.
pub const MU_STAR_MIN_RATIO: f64 = 1e-6;
/// Bisection stops once `hi / lo <= 1 + MU_STAR_RESOLUTION`.
pub const MU_STAR_RESOLUTION: f64 = 1e-2;

/// Largest mu in `(0, mu_hi]` (to 1% relative resolution) at which every
/// grid trajectory of the full system decays with a fitted rate below
/// `1 - criterion.delta`. Zero when even `mu_hi * 1e-6` fails.
pub fn find_mu_star(
    sys: &ChiSystem,
    mu_hi: f64,
    criterion: &StabilityCriterion,
) -> Result<MuStarReport> {
    if !(mu_hi > 0.0 && mu_hi.is_finite()) {
        return Err(ChiError::InvalidArgument(format!(
            "mu_hi must be positive, got {mu_hi}"
        )));
    }
    criterion.validate()?;
    let mut probes = Vec::new();
    let mut passes = |mu: f64| -> Result<bool> {
        let s = sys.with_mu(mu)?;
        let ok = empirical_stability(&s, criterion)?.all_pass;
        probes.push((mu, ok));
        Ok(ok)
    };

    if passes(mu_hi)? {
        return Ok(MuStarReport {
            mu_star: mu_hi,
            probes,
        });
    }
    let mut hi = mu_hi;
    let mut lo = None;
    let mut mu = mu_hi;
    while mu > mu_hi * MU_STAR_MIN_RATIO * (1.0 + 1e-9) {
        mu /= 10.0;
        if passes(mu)? {
            lo = Some(mu);
            break;
        }
        hi = mu;
    }
    let Some(mut lo) = lo else {
        return Ok(MuStarReport {
            mu_star: 0.0,
            probes,
        });
    };
    while hi / lo > 1.0 + MU_STAR_RESOLUTION {
        let mid = (lo * hi).sqrt();
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MuStarReport {
        mu_star: lo,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin::lin1;
    use approx::assert_abs_diff_eq;

    fn traj(values: &[f64]) -> Trajectory {
        let states: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
        Trajectory::from_states(0, 1, &states).unwrap()
    }

    #[test]
    fn error_series_examples() {
        let a = Trajectory::from_states(0, 2, &[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(error_series(&a, &a).unwrap(), vec![0.0, 0.0]);
        let b = Trajectory::from_states(0, 2, &[vec![1.0, 1.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(error_series(&a, &b).unwrap(), vec![0.0, 5.0]);
        assert!(error_series(&a, &traj(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn decay_fit_geometric() {
        let y = traj(&(0..=50).map(|n| 0.5f64.powi(n)).collect::<Vec<_>>());
        let d = fit_exponential_decay(&y).unwrap();
        assert_abs_diff_eq!(d.theta, std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(d.epsilon, 1.0, epsilon = 1e-12);
        assert!(fit_exponential_decay(&traj(&[0.0; 10])).is_err());
        let grow = traj(&(0..10).map(|n| 2f64.powi(n)).collect::<Vec<_>>());
        assert!(matches!(
            fit_exponential_decay(&grow),
            Err(ChiError::Fit(_))
        ));
        assert!(fit_exponential_decay(&traj(&[1.0, 0.5, 0.0, 0.0])).is_err());
    }

    #[test]
    fn boundary_decay_ignores_round_off_tail() {
        let mut v: Vec<f64> = (0..40).map(|n| 0.3 * 0.5f64.powi(n)).collect();
        v.extend(std::iter::repeat_n(1e-17, 500));
        let d = fit_boundary_decay(&traj(&v)).unwrap();
        assert_abs_diff_eq!(d.theta, std::f64::consts::LN_2, epsilon = 1e-12);
        // Plain fit is dragged toward zero decay by the plateau.
        assert!(fit_exponential_decay(&traj(&v)).unwrap().theta < 0.2);
    }

    #[test]
    fn n1_examples() {
        assert_eq!(n1_threshold(0.01, std::f64::consts::LN_2).unwrap(), 7);
        assert_eq!(n1_threshold(1.0, 0.3).unwrap(), 0);
        assert!(n1_threshold(0.1, -1.0).is_err());
        assert!(n1_threshold(0.0, 1.0).is_err());
        assert!(n1_threshold(1.5, 1.0).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let d = BoxDomain::cube(1, -2.0, 2.0).unwrap();
        let l = estimate_lipschitz(|w| Ok(vec![-w[0]]), &d, 100, 7).unwrap();
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-9);
        let lh = estimate_lipschitz_h(&lin1(), &ManifoldSolverConfig::default(), 200, 42).unwrap();
        assert!((lh - 0.5).abs() <= 0.01, "{lh}");
        assert!(estimate_lipschitz(|w| Ok(w.to_vec()), &d, 0, 1).is_err());
    }

    #[test]
    fn sweep_argument_checks() {
        let spec = SweepSpec {
            x0: vec![1.0],
            z0: vec![1.0],
            mu_values: vec![0.1],
            n_steps: 100,
            solver: ManifoldSolverConfig::default(),
        };
        assert!(fit_order(&lin1(), &spec, ErrorTarget::SlowError).is_err());
        let dup = SweepSpec {
            mu_values: vec![0.1, 0.1],
            ..spec.clone()
        };
        assert!(fit_order(&lin1(), &dup, ErrorTarget::SlowError).is_err());
        let neg = SweepSpec {
            mu_values: vec![0.1, -0.01],
            ..spec.clone()
        };
        assert!(fit_order(&lin1(), &neg, ErrorTarget::SlowError).is_err());
    }

    #[test]
    fn degenerate_sweep_without_slow_coupling() {
        let sys = crate::model::parse_system_config(
            "n_x = 1\nm_z = 1\nmu = 0.1\nf1 = 0*w1\ng1 = 0.25*x1 + 0.5*z1 + w1\n",
        )
        .unwrap();
        let spec = SweepSpec {
            x0: vec![1.0],
            z0: vec![1.0],
            mu_values: vec![0.1, 0.01, 0.001],
            n_steps: 200,
            solver: ManifoldSolverConfig::default(),
        };
        let r = fit_order(&sys, &spec, ErrorTarget::SlowError).unwrap();
        assert!(r.degenerate);
        assert!(r.below_floor.iter().all(|b| *b));
        assert_eq!(r.sup_errors, vec![ERROR_FLOOR; 3]);
    }

    #[test]
    fn mu_star_argument_check() {
        assert!(find_mu_star(&lin1(), -1.0, &StabilityCriterion::default_for(&lin1())).is_err());
    }
}
