//! Check ½ ≤ ρ/d ≤ 2 on a grid around each fixture.

use rough_domain::distance::RegularizedDistance;
use rough_domain::domain::BuildOptions;
use rough_domain::{C0Domain, FixtureId};
use std::sync::Arc;
use std::time::Instant;

fn main() -> rough_domain::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let names: Vec<&str> = if args.is_empty() { vec!["UnitDisk", "UnitSquare", "Annulus", "SolidTorus"] } else { args.iter().map(|s| s.as_str()).collect() };
    for name in names {
        let f = FixtureId::from_name(name).expect("unknown fixture");
        let n = if f.dim() == 2 { 64 } else { 32 };
        let spacing = std::env::var("SPACING").ok().and_then(|s| s.parse().ok());
        let d = C0Domain::from_fixture(f, &BuildOptions { spacing, no_atlas: true, ..Default::default() })?;
        let bbox = d.bounding_box().inflate(0.25);
        let rho = RegularizedDistance::new(Arc::new(d));
        let t = Instant::now();
        let g = rough_domain::distance::RhoGrid::layout(rho.dim(), &bbox, n);
        let rep = rho.equivalence_audit(&g.points(), 0.02)?;
        println!(
            "{name:12} n={n} points {:6} ratio [{:.4}, {:.4}] contraction {:.3} iters {} pass {} ({:.1}s)",
            rep.points,
            rep.min_ratio,
            rep.max_ratio,
            rep.max_contraction,
            rep.max_iterations,
            rep.pass,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
