// Sweep mu and fit the log-log slope of each approximation error.

use std::error::Error;

use chi_spt::analysis::{fit_orders, ErrorTarget, SweepSpec};
use chi_spt::manifold::ManifoldSolverConfig;
use chi_spt::model::builtin::{coupled2, lin1, sat1};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    for (sys, x0, z0) in [
        (lin1(), vec![1.0], vec![1.0]),
        (sat1(), vec![1.0], vec![1.0]),
        (coupled2(), vec![1.0, -0.5], vec![0.5, 1.0]),
    ] {
        let spec = SweepSpec {
            x0,
            z0,
            mu_values: vec![1e-1, 1e-2, 1e-3, 1e-4],
            n_steps: 2000,
            solver: ManifoldSolverConfig::default(),
        };
        for r in fit_orders(&sys, &spec, &ErrorTarget::ALL)? {
            println!(
                "{:<9} {:<21} slope {:.4}  r2 {:.6}  error/mu {:?}",
                sys.name(),
                r.target.as_str(),
                r.slope,
                r.r2,
                r.scaled_errors()
                    .iter()
                    .map(|c| (c * 1e3).round() / 1e3)
                    .collect::<Vec<_>>()
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
