//! Extract ∂Ω_ε for a few levels inside and outside the domain and report
//! closure, components, Euler characteristic and the level residual.
//!
//! cargo run --release --example smooth_levels -- Annulus

use rough_domain::approximation::{extract_level_domain, LevelOptions};
use rough_domain::flow::Flow;
use rough_domain::topology::planar_euler_characteristic;
use rough_domain::{C0Domain, FixtureId};
use std::sync::Arc;
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "Annulus".into());
    let fixture = FixtureId::from_name(&name).ok_or(format!("unknown fixture {name}"))?;
    let flow = Flow::for_domain(Arc::new(C0Domain::fixture(fixture)?))?;
    let mut opts = LevelOptions::for_dim(flow.dim());
    if flow.dim() == 3 {
        opts.grid = 32;
    }
    let e0 = flow.eps0();
    for s in [-0.5, 0.25, 0.5] {
        let t = Instant::now();
        let level = extract_level_domain(&flow.rho, s * e0, &opts)?;
        let chi = if level.dim == 3 {
            level.euler_characteristic()?
        } else {
            let loops: Vec<Vec<_>> =
                level.loops().iter().map(|l| l.iter().map(|&v| level.vertices[v as usize]).collect()).collect();
            planar_euler_characteristic(&loops)
        };
        println!(
            "eps {:+.5}: {} vertices, closed {}, {} components, chi {chi}, residual {:.1e} ({:.1}s)",
            level.level,
            level.vertices.len(),
            level.is_closed(),
            level.components(),
            level.max_residual,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
