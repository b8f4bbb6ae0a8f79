//! Sampled checks of the standing assumptions:
//! (a) `dg/dz - I` invertible on `D_x x D_z`,
//! (b) `f`, `g` Lipschitz (sampled lower bounds only),
//! (c) `f(0) = 0`, `g(0,0,0) = 0`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::system::{ChiSystem, ORIGIN_TOL};
use crate::analysis::{estimate_lipschitz, estimate_lipschitz_h};
use crate::error::{ChiError, Result};
use crate::linalg::singular_value_range;
use crate::manifold::{jacobian_gz, ManifoldSolverConfig};

/// Smallest singular value of `dg/dz - I` accepted as invertible.
pub const MIN_INVERTIBILITY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityCheck {
    /// Minimum over samples of `sigma_min(dg/dz - I)`.
    pub margin: f64,
    pub worst_x: Vec<f64>,
    pub worst_z: Vec<f64>,
    pub threshold: f64,
    pub pass: bool,
}

/// Sampled lower bounds, labelled `"estimate"`: sampling cannot prove a
/// Lipschitz constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCheck {
    pub kind: String,
    pub l_f: f64,
    /// One constant over all three arguments of `g`.
    pub l_g: f64,
    pub l_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_h_error: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginCheck {
    pub f_residual: f64,
    pub g_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub system: String,
    pub n_samples: usize,
    pub seed: u64,
    pub invertibility: InvertibilityCheck,
    pub lipschitz: LipschitzCheck,
    pub origin: OriginCheck,
    pub all_pass: bool,
}

pub fn validate_assumptions(
    sys: &ChiSystem,
    n_samples: usize,
    seed: u64,
    cfg: &ManifoldSolverConfig,
) -> Result<AssumptionReport> {
    if n_samples == 0 {
        return Err(ChiError::InvalidArgument("n_samples must be >= 1".into()));
    }
    cfg.validate()?;
    let m = sys.m_z();
    let eye = DMatrix::<f64>::identity(m, m);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margin = f64::INFINITY;
    let mut worst = (Vec::new(), Vec::new());
    for _ in 0..n_samples {
        let x = sys.domain_x().sample(&mut rng);
        let z = sys.domain_z().sample(&mut rng);
        let j = jacobian_gz(sys, &x, &z, cfg.fd_step)? - &eye;
        if j.iter().any(|v| !v.is_finite()) {
            return Err(ChiError::NonFinite {
                context: "dg/dz".into(),
            });
        }
        let (smin, _) = singular_value_range(&j);
        if smin < margin {
            margin = smin;
            worst = (x, z);
        }
    }
    let invertibility = InvertibilityCheck {
        margin,
        worst_x: worst.0,
        worst_z: worst.1,
        threshold: MIN_INVERTIBILITY_MARGIN,
        pass: margin >= MIN_INVERTIBILITY_MARGIN,
    };

    let n_x = sys.n_x();
    let l_f = estimate_lipschitz(|w| sys.eval_f(w), sys.domain_z(), n_samples, seed ^ 0xF)?;
    let gdom = sys
        .domain_x()
        .product(sys.domain_z())
        .product(sys.domain_z());
    let l_g = estimate_lipschitz(
        |u| {
            let (x, rest) = u.split_at(n_x);
            let (z, w) = rest.split_at(m);
            sys.eval_g(x, z, w)
        },
        &gdom,
        n_samples,
        seed ^ 0x6,
    )?;
    let (l_h, l_h_error) = if invertibility.pass {
        match estimate_lipschitz_h(sys, cfg, n_samples, seed ^ 0x4) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("skipped: dg/dz - I not invertible".into()))
    };
    let lipschitz = LipschitzCheck {
        kind: "estimate".into(),
        l_f,
        l_g,
        l_h,
        l_h_error,
        pass: l_f.is_finite() && l_g.is_finite(),
    };

    let (f_residual, g_residual) = sys.origin_residuals()?;
    let origin = OriginCheck {
        f_residual,
        g_residual,
        tol: ORIGIN_TOL,
        pass: f_residual <= ORIGIN_TOL && g_residual <= ORIGIN_TOL,
    };

    let all_pass = invertibility.pass && lipschitz.pass && origin.pass;
    Ok(AssumptionReport {
        system: sys.name().to_string(),
        n_samples,
        seed,
        invertibility,
        lipschitz,
        origin,
        all_pass,
    })
}
