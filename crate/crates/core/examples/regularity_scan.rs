//! Partial-regularity scan of a fixture: certificates per boundary component
//! and single-direction points.
//!
//! cargo run --release --example regularity_scan -- WeierstrassDomain

use rough_domain::regularity::{partial_regularity_scan, ScanOptions};
use rough_domain::{C0Domain, FixtureId};
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "WeierstrassDomain".into());
    let fixture = FixtureId::from_name(&name).ok_or(format!("unknown fixture {name}"))?;
    let domain = C0Domain::fixture(fixture)?;
    let opts = ScanOptions::for_dim(domain.dim);
    let start = Instant::now();
    let scan = partial_regularity_scan(&domain, &opts)?;
    println!("radii {:?}, angular resolution {:.2} deg", scan.deltas, opts.angular_res.to_degrees());
    for c in &scan.components {
        let certs = c.certificates().count();
        let unique = c.points.iter().filter(|p| p.unique_direction).count();
        let lmax = c.certificates().map(|c| c.lipschitz).fold(0.0, f64::max);
        println!(
            "component {} ({}): {} points, {} certificates (max L {:.3}), {} single-direction points",
            c.label,
            if c.outer { "outer" } else { "inner" },
            c.points.len(),
            certs,
            lmax,
            unique
        );
    }
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
