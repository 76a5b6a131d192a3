//! Build the atlas of every fixture and report patch counts, radii and the
//! collar width.

use rough_domain::{C0Domain, FixtureId};
use std::time::Instant;

fn main() -> rough_domain::Result<()> {
    for name in FixtureId::NAMES {
        let f = FixtureId::from_name(name).unwrap();
        let t = Instant::now();
        let d = C0Domain::fixture(f)?;
        let built = t.elapsed().as_secs_f64();
        let (lo, hi) = d
            .atlas
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.delta), hi.max(p.delta)));
        let collar = match d.collar_width() {
            Ok(w) => format!("{w:.4}"),
            Err(e) => format!("n/a ({e})"),
        };
        println!(
            "{name:18} cloud {:6}  h {:.2e}  patches {:5}  delta [{lo:.3}, {hi:.3}]  collar {collar}  ({built:.2}s)",
            d.boundary_cloud().len(),
            d.h_bnd(),
            d.atlas.len()
        );
    }
    Ok(())
}
