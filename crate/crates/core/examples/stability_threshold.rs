// Empirical decay rates of the full system and the largest mu that keeps
// them below `1 - delta`.

use std::error::Error;

use chi_spt::analysis::find_mu_star;
use chi_spt::lyapunov::{empirical_stability, StabilityCriterion};
use chi_spt::model::builtin::{lin1, unstable_boundary};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let sys = lin1();
    let criterion = StabilityCriterion::default_for(&sys);
    let r = empirical_stability(&sys, &criterion)?;
    for t in &r.trajectories {
        println!("x0 {:>5?} z0 {:>5?}  rho {:?}", t.x0, t.z0, t.rho);
    }
    println!("all below {:.2}: {}", r.rho_threshold, r.all_pass);

    let m = find_mu_star(&sys, 1.0, &criterion)?;
    println!(
        "LIN1 mu* = {:.4} after {} probes",
        m.mu_star,
        m.probes.len()
    );

    let ctl = unstable_boundary();
    let m = find_mu_star(&ctl, 1.0, &StabilityCriterion::default_for(&ctl))?;
    println!("control mu* = {}", m.mu_star);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
