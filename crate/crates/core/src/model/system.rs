use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ChiError, Result};
use crate::linalg::norm2;

/// Residual bound on `f(0)` and `g(0,0,0)` accepted at construction.
pub const ORIGIN_TOL: f64 = 1e-12;

/// `f`: receives `w = mu * z` and returns the slow increment.
pub type SlowMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// `g(x, z, w)`: next fast state.
pub type FastMap = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(ChiError::DimensionMismatch {
                context: "box bounds",
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(ChiError::InvalidArgument(
                "box must have at least one axis".into(),
            ));
        }
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(ChiError::EmptyDomain { axis, lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    /// The same interval on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn contains_origin(&self) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .all(|(l, h)| *l <= 0.0 && 0.0 <= *h)
    }

    /// Box scaled about the origin.
    pub fn scaled(&self, factor: f64) -> BoxDomain {
        BoxDomain {
            lo: self.lo.iter().map(|v| v * factor).collect(),
            hi: self.hi.iter().map(|v| v * factor).collect(),
        }
    }

    /// Uniform sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| rng.gen_range(*l..=*h))
            .collect()
    }

    /// Cartesian product `self x other`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        BoxDomain {
            lo: self.lo.iter().chain(&other.lo).copied().collect(),
            hi: self.hi.iter().chain(&other.hi).copied().collect(),
        }
    }
}

/// A two-time-scale system
///
/// ```text
/// x[n+1] = x[n] + f(mu z[n])
/// z[n+1] = g(x[n], z[n], mu z[n])
/// ```
///
/// Immutable after construction; clones share the maps.
#[derive(Clone)]
pub struct ChiSystem {
    name: String,
    n_x: usize,
    m_z: usize,
    mu: f64,
    f: SlowMap,
    g: FastMap,
    domain_x: BoxDomain,
    domain_z: BoxDomain,
}

impl fmt::Debug for ChiSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChiSystem")
            .field("name", &self.name)
            .field("n_x", &self.n_x)
            .field("m_z", &self.m_z)
            .field("mu", &self.mu)
            .field("domain_x", &self.domain_x)
            .field("domain_z", &self.domain_z)
            .finish_non_exhaustive()
    }
}

impl ChiSystem {
    /// Builds a system and checks `f(0) = 0`, `g(0,0,0) = 0` to [`ORIGIN_TOL`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        n_x: usize,
        m_z: usize,
        mu: f64,
        f: SlowMap,
        g: FastMap,
        domain_x: BoxDomain,
        domain_z: BoxDomain,
    ) -> Result<Self> {
        if n_x == 0 || m_z == 0 {
            return Err(ChiError::InvalidArgument(
                "state dimensions must be positive".into(),
            ));
        }
        check_mu(mu)?;
        if domain_x.dim() != n_x {
            return Err(ChiError::DimensionMismatch {
                context: "domain_x",
                expected: n_x,
                actual: domain_x.dim(),
            });
        }
        if domain_z.dim() != m_z {
            return Err(ChiError::DimensionMismatch {
                context: "domain_z",
                expected: m_z,
                actual: domain_z.dim(),
            });
        }
        if !domain_x.contains_origin() || !domain_z.contains_origin() {
            return Err(ChiError::InvalidArgument(
                "domain boxes must contain the origin".into(),
            ));
        }
        let sys = Self {
            name: name.into(),
            n_x,
            m_z,
            mu,
            f,
            g,
            domain_x,
            domain_z,
        };
        let (rf, rg) = sys.origin_residuals()?;
        if rf > ORIGIN_TOL {
            return Err(ChiError::OriginResidual(format!("||f(0)|| = {rf:e}")));
        }
        if rg > ORIGIN_TOL {
            return Err(ChiError::OriginResidual(format!("||g(0,0,0)|| = {rg:e}")));
        }
        Ok(sys)
    }

    /// Same maps and domains with a different perturbation parameter.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(Self { mu, ..self.clone() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn m_z(&self) -> usize {
        self.m_z
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn domain_x(&self) -> &BoxDomain {
        &self.domain_x
    }
    pub fn domain_z(&self) -> &BoxDomain {
        &self.domain_z
    }

    /// `(||f(0)||, ||g(0,0,0)||)`.
    pub fn origin_residuals(&self) -> Result<(f64, f64)> {
        let zero_z = vec![0.0; self.m_z];
        let zero_x = vec![0.0; self.n_x];
        let f0 = self.eval_f(&zero_z)?;
        let g0 = self.eval_g(&zero_x, &zero_z, &zero_z)?;
        Ok((norm2(&f0), norm2(&g0)))
    }

    pub fn eval_f(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_input("f argument", w, self.m_z)?;
        let out = (self.f)(w);
        check_output("f", &out, self.n_x)?;
        Ok(out)
    }

    pub fn eval_g(&self, x: &[f64], z: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        check_input("g argument x", x, self.n_x)?;
        check_input("g argument z", z, self.m_z)?;
        check_input("g argument w", w, self.m_z)?;
        let out = (self.g)(x, z, w);
        check_output("g", &out, self.m_z)?;
        Ok(out)
    }

    /// `g(x, z, 0)`, the map whose fixed points define the slow manifold.
    pub fn eval_g_quasi_steady(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let zero = vec![0.0; self.m_z];
        self.eval_g(x, z, &zero)
    }

    /// One step of the full system.
    pub fn step(&self, x: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let w: Vec<f64> = z.iter().map(|v| self.mu * v).collect();
        let dx = self.eval_f(&w)?;
        let z_next = self.eval_g(x, z, &w)?;
        let x_next = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        Ok((x_next, z_next))
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(ChiError::InvalidArgument(format!(
            "mu must be positive and finite, got {mu}"
        )))
    }
}

fn check_input(context: &'static str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(ChiError::DimensionMismatch {
            context,
            expected: dim,
            actual: v.len(),
        });
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(ChiError::NonFinite {
            context: context.to_string(),
        });
    }
    Ok(())
}

fn check_output(context: &'static str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(ChiError::DimensionMismatch {
            context,
            expected: dim,
            actual: v.len(),
        });
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(ChiError::NonFinite {
            context: format!("{context} result"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(mu: f64, g_origin: f64) -> Result<ChiSystem> {
        ChiSystem::new(
            "t",
            1,
            1,
            mu,
            Arc::new(|w: &[f64]| vec![-w[0]]),
            Arc::new(move |x: &[f64], z: &[f64], w: &[f64]| {
                vec![0.25 * x[0] + 0.5 * z[0] + w[0] + g_origin]
            }),
            BoxDomain::cube(1, -2.0, 2.0).unwrap(),
            BoxDomain::cube(1, -2.0, 2.0).unwrap(),
        )
    }

    #[test]
    fn rejects_nonzero_origin() {
        assert!(matches!(
            scalar(0.1, 1e-3),
            Err(ChiError::OriginResidual(_))
        ));
        assert!(scalar(0.1, 1e-13).is_ok());
    }

    #[test]
    fn rejects_bad_mu() {
        assert!(scalar(0.0, 0.0).is_err());
        assert!(scalar(-1.0, 0.0).is_err());
        assert!(scalar(f64::NAN, 0.0).is_err());
        assert!(scalar(0.1, 0.0).unwrap().with_mu(0.0).is_err());
    }

    #[test]
    fn box_checks() {
        assert!(matches!(
            BoxDomain::new(vec![1.0], vec![1.0]),
            Err(ChiError::EmptyDomain { .. })
        ));
        let b = BoxDomain::new(vec![0.5], vec![1.0]).unwrap();
        assert!(!b.contains_origin());
        let p = BoxDomain::cube(1, -1.0, 1.0).unwrap().product(&b);
        assert_eq!(p.dim(), 2);
        assert!(p.contains(&[0.0, 0.75]));
    }

    #[test]
    fn step_uses_mu_scaled_argument() {
        let s = scalar(0.1, 0.0).unwrap();
        let (x, z) = s.step(&[1.0], &[2.0]).unwrap();
        assert_eq!(x, vec![1.0 - 0.1 * 2.0]);
        assert_eq!(z, vec![0.25 + 1.0 + 0.2]);
    }
}
