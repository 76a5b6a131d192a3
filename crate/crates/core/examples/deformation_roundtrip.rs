//! Push boundary points onto ∂Ω_ε with the global deformation, pull them
//! back, and audit every map kind on a stratified sample.
//!
//! cargo run --release --example deformation_roundtrip -- UnitDisk

use rough_domain::approximation::{roundtrip_audit, Deformation, DeformationMap, MapKind};
use rough_domain::flow::Flow;
use rough_domain::{C0Domain, FixtureId};
use std::sync::Arc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "UnitDisk".into());
    let fixture = FixtureId::from_name(&name).ok_or(format!("unknown fixture {name}"))?;
    let flow = Arc::new(Flow::for_domain(Arc::new(C0Domain::fixture(fixture)?))?);
    let d = Deformation::new(flow.clone());
    let eps = 0.5 * d.eps0();
    let cloud = flow.domain().boundary_cloud();
    for q in cloud.iter().step_by(cloud.len() / 4) {
        let y = d.global_map(eps, q)?;
        let back = d.global_map_inverse(eps, &y)?;
        println!(
            "|f(q) - q| {:.5}  rho(f(q)) - eps {:+.1e}  |f^-1(f(q)) - q| {:.1e}",
            (y - q).norm(),
            flow.rho_at(&y)? - eps,
            (back - q).norm()
        );
    }
    let threshold = if flow.dim() == 2 { 1e-5 } else { 1e-4 };
    for (kind, e, ep) in [
        (MapKind::Interior, eps, 0.0),
        (MapKind::Exterior, -eps, 0.0),
        (MapKind::TwoSided, 0.8 * eps, -0.6 * eps),
        (MapKind::Global, eps, 0.0),
    ] {
        let r = roundtrip_audit(&DeformationMap::new(d.clone(), kind, e, ep), 64, 3, threshold)?;
        println!(
            "{kind:?}: {} + {} samples, {} moved, max errors {:.1e} / {:.1e}, pass {}",
            r.forward_samples, r.inverse_samples, r.moved, r.max_inverse_after_forward, r.max_forward_after_inverse, r.pass
        );
    }
    Ok(())
}
