//! Full, reduced and boundary-layer simulations.
//!
//! ```text
//! full:      x[n+1] = x[n] + f(mu z[n]),        z[n+1] = g(x[n], z[n], mu z[n])
//! reduced:   x_s[n+1] = x_s[n] + f(mu h(x_s[n])), z_s[n] = h(x_s[n])
//! boundary:  y[n+1] = g(x_s[n], y[n] + h(x_s[n]), 0) - h(x_s[n])
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{ChiError, Result};
use crate::linalg::{add, norm2, sub};
use crate::manifold::{h_along_trajectory, ManifoldSolverConfig};
use crate::model::ChiSystem;

/// States whose 2-norm exceeds this are reported as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;
/// Upper bound on stored states per trajectory.
pub const MAX_STATES: usize = 10_000_000;

/// Dense sequence of equal-dimension finite states, indexed from
/// `start_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    start_index: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub(crate) fn with_capacity(start_index: usize, dim: usize, len: usize) -> Self {
        Self {
            start_index,
            dim,
            data: Vec::with_capacity(dim * len),
        }
    }

    pub fn from_states(start_index: usize, dim: usize, states: &[Vec<f64>]) -> Result<Self> {
        if dim == 0 {
            return Err(ChiError::InvalidArgument(
                "trajectory dimension must be positive".into(),
            ));
        }
        if states.is_empty() {
            return Err(ChiError::InvalidArgument(
                "trajectory needs at least one state".into(),
            ));
        }
        let mut t = Self::with_capacity(start_index, dim, states.len());
        for s in states {
            t.push(s)?;
        }
        Ok(t)
    }

    pub(crate) fn push(&mut self, state: &[f64]) -> Result<()> {
        if state.len() != self.dim {
            return Err(ChiError::DimensionMismatch {
                context: "trajectory state",
                expected: self.dim,
                actual: state.len(),
            });
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(ChiError::NonFinite {
                context: format!("trajectory state {}", self.start_index + self.len()),
            });
        }
        self.data.extend_from_slice(state);
        Ok(())
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// State at position `k` (absolute index `start_index + k`).
    pub fn get(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn first(&self) -> &[f64] {
        self.get(0)
    }

    pub fn last(&self) -> &[f64] {
        self.get(self.len() - 1)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// `||state||_2` for every state.
    pub fn norms(&self) -> Vec<f64> {
        self.iter().map(norm2).collect()
    }

    /// First `len` states.
    pub fn prefix(&self, len: usize) -> Trajectory {
        let len = len.min(self.len());
        Trajectory {
            start_index: self.start_index,
            dim: self.dim,
            data: self.data[..len * self.dim].to_vec(),
        }
    }

    /// CSV with header `n,comp_0,...,comp_{d-1}` and 17 significant digits
    /// per value.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.data.len() * 25 + 32);
        s.push('n');
        for i in 0..self.dim {
            let _ = write!(s, ",comp_{i}");
        }
        s.push('\n');
        for (k, state) in self.iter().enumerate() {
            let _ = write!(s, "{}", self.start_index + k);
            for v in state {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| ChiError::Config("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let dim = cols.len().saturating_sub(1);
        let well_formed = cols.first() == Some(&"n")
            && cols[1..]
                .iter()
                .enumerate()
                .all(|(i, c)| *c == format!("comp_{i}"));
        if dim == 0 || !well_formed {
            return Err(ChiError::Config(format!("bad CSV header `{header}`")));
        }
        let bad = |line: usize| ChiError::Config(format!("bad CSV row at line {}", line + 1));
        let mut start = None;
        let mut states = Vec::new();
        for (line, row) in lines {
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(bad(line));
            }
            let n: usize = fields[0].parse().map_err(|_| bad(line))?;
            let expected = start.map_or(n, |s: usize| s + states.len());
            if n != expected {
                return Err(bad(line));
            }
            start.get_or_insert(n);
            let state: std::result::Result<Vec<f64>, _> =
                fields[1..].iter().map(|f| f.parse::<f64>()).collect();
            states.push(state.map_err(|_| bad(line))?);
        }
        Trajectory::from_states(start.unwrap_or(0), dim, &states)
    }
}

fn check_dim(context: &'static str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(ChiError::DimensionMismatch {
            context,
            expected: dim,
            actual: v.len(),
        });
    }
    Ok(())
}

fn check_length(n_steps: usize) -> Result<()> {
    if n_steps == 0 {
        return Err(ChiError::InvalidArgument(
            "number of steps must be >= 1".into(),
        ));
    }
    if n_steps >= MAX_STATES {
        return Err(ChiError::InvalidArgument(format!(
            "{} states exceed the limit of {MAX_STATES}",
            n_steps + 1
        )));
    }
    Ok(())
}

fn guard(which: &'static str, index: usize, state: &[f64]) -> Result<()> {
    if state.iter().any(|v| !v.is_finite()) {
        return Err(ChiError::NonFiniteState { which, index });
    }
    let norm = norm2(state);
    if norm > DIVERGENCE_NORM {
        return Err(ChiError::Divergence { which, index, norm });
    }
    Ok(())
}

/// Map failures inside a step become non-finite-state errors at `index`.
fn step_error(which: &'static str, index: usize, e: ChiError) -> ChiError {
    match e {
        ChiError::NonFinite { .. } => ChiError::NonFiniteState { which, index },
        other => other.at_index(index),
    }
}

/// Iterates the full system `n_steps` times. Returns `(X, Z)` with
/// `n_steps + 1` states each.
pub fn simulate_full(
    sys: &ChiSystem,
    x0: &[f64],
    z0: &[f64],
    n_steps: usize,
) -> Result<(Trajectory, Trajectory)> {
    check_dim("x0", x0, sys.n_x())?;
    check_dim("z0", z0, sys.m_z())?;
    check_length(n_steps)?;
    guard("x", 0, x0)?;
    guard("z", 0, z0)?;
    let mut xs = Trajectory::with_capacity(0, sys.n_x(), n_steps + 1);
    let mut zs = Trajectory::with_capacity(0, sys.m_z(), n_steps + 1);
    xs.push(x0)?;
    zs.push(z0)?;
    let (mut x, mut z) = (x0.to_vec(), z0.to_vec());
    for n in 1..=n_steps {
        let (xn, zn) = sys.step(&x, &z).map_err(|e| step_error("x", n, e))?;
        guard("x", n, &xn)?;
        guard("z", n, &zn)?;
        xs.push(&xn)?;
        zs.push(&zn)?;
        x = xn;
        z = zn;
    }
    Ok((xs, zs))
}

/// Iterates the reduced model. Returns `(X_s, Z_s)` with `Z_s[n] = h(X_s[n])`.
pub fn simulate_reduced(
    sys: &ChiSystem,
    x0: &[f64],
    n_steps: usize,
    cfg: &ManifoldSolverConfig,
) -> Result<(Trajectory, Trajectory)> {
    check_dim("x0", x0, sys.n_x())?;
    check_length(n_steps)?;
    guard("x_s", 0, x0)?;
    let mu = sys.mu();
    let mut xs = Trajectory::with_capacity(0, sys.n_x(), n_steps + 1);
    let mut zs = Trajectory::with_capacity(0, sys.m_z(), n_steps + 1);
    let mut x = x0.to_vec();
    let mut prev_h: Option<Vec<f64>> = None;
    for n in 0..=n_steps {
        let guess = match cfg.initial_guess {
            crate::manifold::InitialGuess::WarmStart => prev_h.as_deref(),
            crate::manifold::InitialGuess::Zero => None,
        };
        let h = crate::manifold::solve_h_from(sys, &x, guess, cfg).map_err(|e| e.at_index(n))?;
        xs.push(&x)?;
        zs.push(&h)?;
        if n < n_steps {
            let w: Vec<f64> = h.iter().map(|v| mu * v).collect();
            let dx = sys.eval_f(&w).map_err(|e| step_error("x_s", n + 1, e))?;
            x = add(&x, &dx);
            guard("x_s", n + 1, &x)?;
        }
        prev_h = Some(h);
    }
    Ok((xs, zs))
}

/// How the boundary-layer model treats the slow state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Uses `x_s[n]` at step `n`.
    #[default]
    Tracking,
    /// Holds `x_s[0]` for every step (the classical frozen-slow-state model).
    FreezeSlowState,
}

/// Boundary layer from precomputed manifold values `hs[n] = h(xs[n])`.
pub fn simulate_boundary_layer_on(
    sys: &ChiSystem,
    xs: &Trajectory,
    hs: &Trajectory,
    y0: &[f64],
    n_steps: usize,
    mode: BoundaryMode,
) -> Result<Trajectory> {
    check_dim("y0", y0, sys.m_z())?;
    check_length(n_steps)?;
    let needed = match mode {
        BoundaryMode::Tracking => n_steps,
        BoundaryMode::FreezeSlowState => 1,
    };
    if xs.len() < needed || hs.len() < needed {
        return Err(ChiError::InvalidArgument(format!(
            "slow trajectory has {} states, boundary layer needs {needed}",
            xs.len().min(hs.len())
        )));
    }
    guard("y", 0, y0)?;
    let zero = vec![0.0; sys.m_z()];
    let mut out = Trajectory::with_capacity(0, sys.m_z(), n_steps + 1);
    out.push(y0)?;
    let mut y = y0.to_vec();
    for n in 0..n_steps {
        let k = match mode {
            BoundaryMode::Tracking => n,
            BoundaryMode::FreezeSlowState => 0,
        };
        let (x, h) = (xs.get(k), hs.get(k));
        let gz = sys
            .eval_g(x, &add(&y, h), &zero)
            .map_err(|e| step_error("y", n + 1, e))?;
        y = sub(&gz, h);
        guard("y", n + 1, &y)?;
        out.push(&y)?;
    }
    Ok(out)
}

/// Boundary-layer model along `xs`, solving `h(xs[n])` as needed.
pub fn simulate_boundary_layer(
    sys: &ChiSystem,
    xs: &Trajectory,
    y0: &[f64],
    n_steps: usize,
    cfg: &ManifoldSolverConfig,
) -> Result<Trajectory> {
    simulate_boundary_layer_with(sys, xs, y0, n_steps, cfg, BoundaryMode::Tracking)
}

pub fn simulate_boundary_layer_with(
    sys: &ChiSystem,
    xs: &Trajectory,
    y0: &[f64],
    n_steps: usize,
    cfg: &ManifoldSolverConfig,
    mode: BoundaryMode,
) -> Result<Trajectory> {
    check_length(n_steps)?;
    if xs.len() < n_steps + 1 {
        return Err(ChiError::InvalidArgument(format!(
            "slow trajectory has {} states, need at least {}",
            xs.len(),
            n_steps + 1
        )));
    }
    let used = match mode {
        BoundaryMode::Tracking => n_steps,
        BoundaryMode::FreezeSlowState => 1,
    };
    let prefix = xs.prefix(used);
    let hs = h_along_trajectory(sys, &prefix, cfg)?;
    simulate_boundary_layer_on(sys, &prefix, &hs, y0, n_steps, mode)
}

/// Two-time-scale approximation `h(x_s[n]) + y[n]` of `z[n]`.
pub fn compose_approximation(zs: &Trajectory, y: &Trajectory) -> Result<Trajectory> {
    if zs.dim() != y.dim() {
        return Err(ChiError::DimensionMismatch {
            context: "compose_approximation dimension",
            expected: zs.dim(),
            actual: y.dim(),
        });
    }
    if zs.len() != y.len() {
        return Err(ChiError::DimensionMismatch {
            context: "compose_approximation length",
            expected: zs.len(),
            actual: y.len(),
        });
    }
    let mut out = Trajectory::with_capacity(zs.start_index(), zs.dim(), zs.len());
    for (a, b) in zs.iter().zip(y.iter()) {
        out.push(&add(a, b))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::solve_h;
    use crate::model::builtin::{lin1, sat1, unstable_boundary};
    use approx::assert_abs_diff_eq;

    /// Plain scalar recursion for LIN1, independent of the system type.
    fn lin1_brute(mu: f64, x0: f64, z0: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let (mut x, mut z) = (vec![x0], vec![z0]);
        for k in 0..n {
            let w = mu * z[k];
            x.push(x[k] - w);
            z.push(0.25 * x[k] + 0.5 * z[k] + w);
        }
        (x, z)
    }

    #[test]
    fn full_lin1_matches_brute_force() {
        let sys = lin1().with_mu(0.1).unwrap();
        let (x, z) = simulate_full(&sys, &[1.0], &[0.0], 2).unwrap();
        let (bx, bz) = lin1_brute(0.1, 1.0, 0.0, 2);
        // Frozen from the brute-force recursion: x = [1, 1, 0.975], z = [0, 0.25, 0.4].
        for (got, want) in bx.iter().zip([1.0, 1.0, 0.975]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        for (got, want) in bz.iter().zip([0.0, 0.25, 0.4]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        for k in 0..3 {
            assert_eq!(x.get(k)[0], bx[k]);
            assert_eq!(z.get(k)[0], bz[k]);
        }
    }

    #[test]
    fn full_from_origin_stays_zero() {
        for sys in [lin1(), sat1()] {
            let (x, z) = simulate_full(&sys, &[0.0], &[0.0], 10).unwrap();
            assert_eq!(x.len(), 11);
            assert!(x.iter().chain(z.iter()).all(|s| s[0] == 0.0));
        }
    }

    #[test]
    fn full_rejects_bad_dimension() {
        assert!(matches!(
            simulate_full(&lin1(), &[1.0, 2.0], &[0.0], 3),
            Err(ChiError::DimensionMismatch { .. })
        ));
        assert!(simulate_full(&lin1(), &[1.0], &[0.0], 0).is_err());
    }

    #[test]
    fn divergence_reports_first_index() {
        let err = simulate_full(&unstable_boundary(), &[0.0], &[1.0], 100).unwrap_err();
        // z[n] = 2^n; 2^40 > 1e12 > 2^39.
        match err {
            ChiError::Divergence { which, index, .. } => {
                assert_eq!(which, "z");
                assert_eq!(index, 40);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tiny_mu_keeps_slow_state_constant() {
        let sys = sat1().with_mu(f64::MIN_POSITIVE).unwrap();
        let (x, _) = simulate_full(&sys, &[1.3], &[0.7], 50).unwrap();
        assert!(x.iter().all(|s| s[0] == 1.3));
    }

    #[test]
    fn reduced_lin1_geometric() {
        let cfg = ManifoldSolverConfig::default();
        let sys = lin1().with_mu(0.1).unwrap();
        let (xs, zs) = simulate_reduced(&sys, &[1.0], 60, &cfg).unwrap();
        for (n, (x, z)) in xs.iter().zip(zs.iter()).enumerate() {
            let want = 0.95f64.powi(n as i32);
            assert_abs_diff_eq!(x[0], want, epsilon = 1e-13);
            assert_abs_diff_eq!(z[0], 0.5 * x[0], epsilon = 1e-13);
        }
    }

    #[test]
    fn reduced_from_origin_and_pointwise_manifold() {
        let cfg = ManifoldSolverConfig::default();
        let (xs, zs) = simulate_reduced(&sat1(), &[0.0], 20, &cfg).unwrap();
        assert!(xs.iter().chain(zs.iter()).all(|s| s[0] == 0.0));

        let (xs, zs) = simulate_reduced(&sat1(), &[1.0], 100, &cfg).unwrap();
        for (x, z) in xs.iter().zip(zs.iter()) {
            let direct = solve_h(&sat1(), x, &cfg).unwrap();
            assert!(crate::linalg::dist2(z, &direct) <= 10.0 * cfg.tol);
        }
    }

    #[test]
    fn boundary_layer_examples() {
        let cfg = ManifoldSolverConfig::default();
        let sys = lin1();
        let zero = Trajectory::from_states(0, 1, &vec![vec![0.0]; 11]).unwrap();
        let y = simulate_boundary_layer(&sys, &zero, &[1.0], 10, &cfg).unwrap();
        assert_eq!(y.get(3)[0], 0.125);

        for c in [0.0, 1.0, 2.0] {
            let frozen = Trajectory::from_states(0, 1, &vec![vec![c]; 31]).unwrap();
            let y = simulate_boundary_layer(&sys, &frozen, &[0.8], 30, &cfg).unwrap();
            for (n, v) in y.iter().enumerate() {
                assert_abs_diff_eq!(v[0], 0.8 * 0.5f64.powi(n as i32), epsilon = 1e-12);
            }
        }

        let y = simulate_boundary_layer(&sys, &zero, &[0.0], 10, &cfg).unwrap();
        assert!(y.iter().all(|v| v[0] == 0.0));
        assert!(simulate_boundary_layer(&sys, &zero, &[1.0], 11, &cfg).is_err());
    }

    #[test]
    fn frozen_mode_uses_first_slow_state() {
        let cfg = ManifoldSolverConfig::default();
        let sys = sat1();
        let (xs, _) = simulate_reduced(&sys.with_mu(0.1).unwrap(), &[1.5], 40, &cfg).unwrap();
        let tracking = simulate_boundary_layer(&sys, &xs, &[0.5], 40, &cfg).unwrap();
        let frozen = simulate_boundary_layer_with(
            &sys,
            &xs,
            &[0.5],
            40,
            &cfg,
            BoundaryMode::FreezeSlowState,
        )
        .unwrap();
        let constant = Trajectory::from_states(0, 1, &vec![xs.get(0).to_vec(); 41]).unwrap();
        let reference = simulate_boundary_layer(&sys, &constant, &[0.5], 40, &cfg).unwrap();
        assert_eq!(frozen, reference);
        assert_ne!(frozen, tracking);
    }

    #[test]
    fn compose() {
        let zs = Trajectory::from_states(0, 1, &[vec![1.0], vec![2.0]]).unwrap();
        let y0 = Trajectory::from_states(0, 1, &[vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(compose_approximation(&zs, &y0).unwrap(), zs);
        let z0 = Trajectory::from_states(0, 1, &[vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(compose_approximation(&z0, &zs).unwrap(), zs);
        let short = Trajectory::from_states(0, 1, &[vec![0.0]]).unwrap();
        assert!(compose_approximation(&zs, &short).is_err());
    }

    #[test]
    fn compose_lin1_matches_closed_form() {
        // h(x_s[n]) + y[n] = 0.5 * 0.95^n x0 + 0.5^n y0 for LIN1 at mu = 0.1.
        let cfg = ManifoldSolverConfig::default();
        let sys = lin1().with_mu(0.1).unwrap();
        let (xs, zs) = simulate_reduced(&sys, &[1.0], 30, &cfg).unwrap();
        let y = simulate_boundary_layer(&sys, &xs, &[0.5], 30, &cfg).unwrap();
        let approx = compose_approximation(&zs, &y).unwrap();
        for (n, v) in approx.iter().enumerate() {
            let want = 0.5 * 0.95f64.powi(n as i32) + 0.5 * 0.5f64.powi(n as i32);
            assert_abs_diff_eq!(v[0], want, epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_exact() {
        let t = Trajectory::from_states(
            5,
            2,
            &[
                vec![0.1, -1.0 / 3.0],
                vec![1e-300, 2.0f64.sqrt()],
                vec![f64::MAX, -0.0],
            ],
        )
        .unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("n,comp_0,comp_1\n5,"));
        assert_eq!(Trajectory::from_csv(&csv).unwrap(), t);
        assert!(Trajectory::from_csv("n,x\n0,1\n").is_err());
        assert!(Trajectory::from_csv("n,comp_0\n0,1\n2,1\n").is_err());
    }
}
