// Fit the boundary-layer decay rate and derive the tail threshold
// `n1(mu) = ceil(-ln(mu) / theta)`.

use std::error::Error;

use chi_spt::analysis::{fit_boundary_decay, fit_order, n1_threshold, ErrorTarget, SweepSpec};
use chi_spt::manifold::ManifoldSolverConfig;
use chi_spt::model::builtin::sat1;
use chi_spt::simulate::{simulate_boundary_layer, simulate_reduced};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = ManifoldSolverConfig::default();
    let sys = sat1();
    let (xs, _) = simulate_reduced(&sys, &[1.0], 200, &cfg)?;
    let y = simulate_boundary_layer(&sys, &xs, &[1.0], 200, &cfg)?;
    let fit = fit_boundary_decay(&y)?;
    println!(
        "theta = {:.5}  epsilon = {:.4}  r2 = {:.6}",
        fit.theta, fit.epsilon, fit.r2
    );
    for mu in [1e-1, 1e-2, 1e-3, 1e-4] {
        println!("mu = {mu:.0e}  n1 = {}", n1_threshold(mu, fit.theta)?);
    }

    let spec = SweepSpec {
        x0: vec![1.0],
        z0: vec![1.0],
        mu_values: vec![1e-1, 1e-2, 1e-3, 1e-4],
        n_steps: 2000,
        solver: cfg,
    };
    let r = fit_order(&sys, &spec, ErrorTarget::FastTailError)?;
    println!("tail errors {:?}", r.sup_errors);
    println!(
        "n1 per mu   {:?}",
        r.n1_values.as_deref().unwrap_or_default()
    );
    println!("spread of error/mu = {:.3}", r.constant_spread());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
