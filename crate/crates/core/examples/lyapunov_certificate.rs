// Quadratic Lyapunov functions for the reduced and boundary-layer models
// and their composite.

use std::error::Error;

use chi_spt::lyapunov::{build_certificates, decrease_factor, solve_discrete_lyapunov};
use chi_spt::manifold::ManifoldSolverConfig;
use chi_spt::model::builtin::{lin1, sat1};
use chi_spt::model::BoxDomain;
use nalgebra::DMatrix;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, -0.2, 0.4]);
    let p = solve_discrete_lyapunov(&a)?;
    let (lo, hi) = p.sandwich_bounds();
    let step = |u: &[f64]| -> chi_spt::Result<Vec<f64>> {
        Ok(vec![0.5 * u[0] + 0.3 * u[1], -0.2 * u[0] + 0.4 * u[1]])
    };
    let sigma = decrease_factor(&p, step, &BoxDomain::cube(2, -1.0, 1.0)?, 2000, 7)?;
    println!("linear map: gamma [{lo:.4}, {hi:.4}] sigma {sigma:.4}");

    let cfg = ManifoldSolverConfig::default();
    for sys in [lin1(), sat1()] {
        let c = build_certificates(&sys, 1000, 42, &cfg)?;
        println!(
            "{}: V sigma {:.6}, W sigma {:.6}",
            sys.name(),
            c.reduced.sigma,
            c.boundary.sigma
        );
        if let Some(nu) = c.composite {
            println!(
                "  composite: {:.4} |u|^2 <= nu(u) <= {:.4} |u|^2, nu+ <= {:.6} nu",
                nu.gamma_lo, nu.gamma_hi, nu.sigma
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
