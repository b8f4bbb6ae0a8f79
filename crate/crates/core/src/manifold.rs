//! Slow manifold `z = h(x)`, the solution of `z = g(x, z, 0)`.
//!
//! [`solve_h`] runs Newton's method with a central-difference Jacobian.
//! [`fixed_point_oracle`] is an independent damped Picard iteration used to
//! cross-check it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ChiError, Result};
use crate::linalg::{central_jacobian, dist2, norm2, singular_value_range, sub};
use crate::model::ChiSystem;
use crate::simulate::Trajectory;

/// Newton matrix is singular when `sigma_min < SINGULAR_RATIO * sigma_max`
/// or `sigma_min < SINGULAR_FLOOR`.
pub const SINGULAR_RATIO: f64 = 1e-10;
/// Central differences with the default step carry about 1e-10 of round-off
/// for O(1) values of `g`, so an exactly singular matrix never shows up as 0.
pub const SINGULAR_FLOOR: f64 = 1e-8;
/// Step halvings tried when a full Newton step increases the residual.
pub const MAX_HALVINGS: usize = 20;
/// Extra Newton steps taken after reaching `tol`, kept only while they
/// strictly reduce the residual.
const POLISH_STEPS: usize = 3;
/// Residual target of the fixed-point oracle.
pub const ORACLE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Zero,
    WarmStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSolverConfig {
    /// Stop once `||g(x, z, 0) - z||_2 <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Central-difference step for `dg/dz`.
    pub fd_step: f64,
    pub initial_guess: InitialGuess,
}

impl Default for ManifoldSolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            fd_step: 1e-6,
            initial_guess: InitialGuess::WarmStart,
        }
    }
}

impl ManifoldSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ChiError::InvalidArgument(format!(
                "solver tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(ChiError::InvalidArgument(format!(
                "solver fd_step must be positive, got {}",
                self.fd_step
            )));
        }
        if self.max_iter == 0 {
            return Err(ChiError::InvalidArgument(
                "solver max_iter must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Central-difference approximation of `dg/dz` at `(x, z, 0)`.
pub fn jacobian_gz(sys: &ChiSystem, x: &[f64], z: &[f64], fd_step: f64) -> Result<DMatrix<f64>> {
    central_jacobian(|zz| sys.eval_g_quasi_steady(x, zz), z, fd_step)
}

/// Residual `g(x, z, 0) - z`.
fn residual(sys: &ChiSystem, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    Ok(sub(&sys.eval_g_quasi_steady(x, z)?, z))
}

/// Newton step `-(dg/dz - I)^{-1} r`.
fn newton_step(sys: &ChiSystem, x: &[f64], z: &[f64], r: &[f64], fd_step: f64) -> Result<Vec<f64>> {
    let m = z.len();
    let jac = jacobian_gz(sys, x, z, fd_step)? - DMatrix::<f64>::identity(m, m);
    let (sigma_min, sigma_max) = singular_value_range(&jac);
    if sigma_max.is_nan()
        || sigma_max <= 0.0
        || sigma_min < SINGULAR_RATIO * sigma_max
        || sigma_min < SINGULAR_FLOOR
    {
        return Err(ChiError::SingularMatrix {
            sigma_min,
            sigma_max,
        });
    }
    let rhs = DVector::from_column_slice(r);
    let delta = jac.lu().solve(&rhs).ok_or(ChiError::SingularMatrix {
        sigma_min,
        sigma_max,
    })?;
    Ok(delta.iter().map(|d| -d).collect())
}

/// Solves `z = g(x, z, 0)` starting from `z_init` (zero when `None`).
pub fn solve_h_from(
    sys: &ChiSystem,
    x: &[f64],
    z_init: Option<&[f64]>,
    cfg: &ManifoldSolverConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let m = sys.m_z();
    let mut z = match z_init {
        Some(z0) if z0.len() == m => z0.to_vec(),
        Some(z0) => {
            return Err(ChiError::DimensionMismatch {
                context: "solve_h initial guess",
                expected: m,
                actual: z0.len(),
            })
        }
        None => vec![0.0; m],
    };
    let mut r = residual(sys, x, &z)?;
    let mut rn = norm2(&r);
    let mut iter = 0;
    while rn > cfg.tol {
        if iter == cfg.max_iter {
            return Err(ChiError::NoConvergence {
                iterations: iter,
                residual: rn,
            });
        }
        iter += 1;
        let delta = newton_step(sys, x, &z, &r, cfg.fd_step)?;
        // Full step first; halve while the residual grows.
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a + scale * d).collect();
            if trial.iter().any(|v| !v.is_finite()) {
                return Err(ChiError::NonFinite {
                    context: "Newton iterate".into(),
                });
            }
            let tr = residual(sys, x, &trial)?;
            let trn = norm2(&tr);
            if trn <= rn {
                accepted = Some((trial, tr, trn));
                break;
            }
            scale *= 0.5;
        }
        // No halving helped: take the full step and let the iteration
        // count decide.
        let (nz, nr, nrn) = match accepted {
            Some(t) => t,
            None => {
                let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a + d).collect();
                let tr = residual(sys, x, &trial)?;
                let trn = norm2(&tr);
                (trial, tr, trn)
            }
        };
        z = nz;
        r = nr;
        rn = nrn;
    }
    for _ in 0..POLISH_STEPS {
        if rn == 0.0 {
            break;
        }
        let Ok(delta) = newton_step(sys, x, &z, &r, cfg.fd_step) else {
            break;
        };
        let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let Ok(tr) = residual(sys, x, &trial) else {
            break;
        };
        let trn = norm2(&tr);
        if trn < rn {
            z = trial;
            r = tr;
            rn = trn;
        } else {
            break;
        }
    }
    Ok(z)
}

/// `h(x)` by Newton iteration from the zero guess.
pub fn solve_h(sys: &ChiSystem, x: &[f64], cfg: &ManifoldSolverConfig) -> Result<Vec<f64>> {
    solve_h_from(sys, x, None, cfg)
}

/// Damped fixed-point iteration `z <- (1 - d) z + d g(x, z, 0)` run until the
/// residual is at most [`ORACLE_TOL`].
pub fn fixed_point_oracle(
    sys: &ChiSystem,
    x: &[f64],
    damping: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(ChiError::InvalidArgument(format!(
            "damping must lie in (0, 1], got {damping}"
        )));
    }
    let bound = sys.domain_z().scaled(10.0);
    let mut z = vec![0.0; sys.m_z()];
    for iteration in 0..=max_iter {
        let gz = sys.eval_g_quasi_steady(x, &z)?;
        if dist2(&gz, &z) <= ORACLE_TOL {
            return Ok(z);
        }
        if iteration == max_iter {
            return Err(ChiError::NoConvergence {
                iterations: max_iter,
                residual: dist2(&gz, &z),
            });
        }
        for (zi, gi) in z.iter_mut().zip(&gz) {
            *zi = (1.0 - damping) * *zi + damping * gi;
        }
        if !bound.contains(&z) {
            return Err(ChiError::Escaped { iteration });
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// `h(x_s[n])` along a slow trajectory; solves warm-start from the previous
/// point when the policy asks for it.
pub fn h_along_trajectory(
    sys: &ChiSystem,
    xs: &Trajectory,
    cfg: &ManifoldSolverConfig,
) -> Result<Trajectory> {
    if xs.dim() != sys.n_x() {
        return Err(ChiError::DimensionMismatch {
            context: "h_along_trajectory",
            expected: sys.n_x(),
            actual: xs.dim(),
        });
    }
    let mut out = Trajectory::with_capacity(xs.start_index(), sys.m_z(), xs.len());
    let mut prev: Option<Vec<f64>> = None;
    for (k, x) in xs.iter().enumerate() {
        let guess = match cfg.initial_guess {
            InitialGuess::WarmStart => prev.as_deref(),
            InitialGuess::Zero => None,
        };
        let z = solve_h_from(sys, x, guess, cfg).map_err(|e| e.at_index(xs.start_index() + k))?;
        out.push(&z)?;
        prev = Some(z);
    }
    Ok(out)
}
