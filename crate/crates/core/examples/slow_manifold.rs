// Solve the slow manifold `z = h(x)` with Newton and cross-check it with
// the fixed-point iteration.

use std::error::Error;

use chi_spt::manifold::{fixed_point_oracle, solve_h, InitialGuess, ManifoldSolverConfig};
use chi_spt::model::builtin::{lin1, sat1};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = ManifoldSolverConfig::default();

    // LIN1: h(x) = x / 2.
    let sys = lin1();
    for x in [-2.0, -0.5, 0.0, 1.0, 2.0] {
        let h = solve_h(&sys, &[x], &cfg)?;
        println!(
            "LIN1  x = {x:>5}  h = {:>8.5}  exact = {:>8.5}",
            h[0],
            0.5 * x
        );
    }

    let sys = sat1();
    let zero_start = ManifoldSolverConfig {
        initial_guess: InitialGuess::Zero,
        ..cfg
    };
    for x in [-2.0, -1.0, 0.5, 1.5] {
        let newton = solve_h(&sys, &[x], &zero_start)?;
        let picard = fixed_point_oracle(&sys, &[x], 1.0, 10_000)?;
        println!(
            "SAT1  x = {x:>5}  newton = {:>10.7}  fixed point = {:>10.7}  gap = {:.1e}",
            newton[0],
            picard[0],
            (newton[0] - picard[0]).abs()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
