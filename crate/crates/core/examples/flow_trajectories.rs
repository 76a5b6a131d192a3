//! Integrate the cut-off field from a few collar points and show ρ rising
//! along each trajectory.
//!
//! cargo run --release --example flow_trajectories -- UnitSquare

use rough_domain::flow::Flow;
use rough_domain::{C0Domain, FixtureId};
use std::sync::Arc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "UnitSquare".into());
    let fixture = FixtureId::from_name(&name).ok_or(format!("unknown fixture {name}"))?;
    let flow = Flow::for_domain(Arc::new(C0Domain::fixture(fixture)?))?;
    println!("eps_bar {:.5}, eps0 {:.5}", flow.eps_bar(), flow.eps0());
    for x in flow.collar_sample(6, 1)? {
        let tr = flow.integrate(&x, flow.eps_bar(), flow.opts.ode.atol)?;
        println!(
            "start {:>8.4} {:>8.4}  rho {:+.5} -> {:+.5}  steps {:4}  min increment {:.2e}",
            x.x,
            x.y,
            tr.rho[0],
            tr.rho.last().unwrap(),
            tr.times.len() - 1,
            tr.min_increment()
        );
    }
    let report = flow.monotonicity_audit(&flow.collar_sample(100, 2)?, flow.eps_bar(), 1e-10)?;
    println!("{} trajectories, {} violations", report.trajectories, report.violations);
    Ok(())
}
