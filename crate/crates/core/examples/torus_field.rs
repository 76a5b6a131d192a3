//! The torus pseudonormal family ñ^γ: validity, the band holding its image,
//! and which directions it misses.

use rough_domain::topology::{band_cover_audit, torus_band_audit, torus_inward_normal, torus_pseudonormal};

fn main() -> rough_domain::Result<()> {
    let res = 2f64.to_radians();
    let normal = band_cover_audit(|t, p| -torus_inward_normal(t, p), 256, 0.5, res);
    println!("outward normal covers E_0.5: {} ({} band directions)", normal.covered, normal.band_directions);
    for gamma in [0.3, 0.5, 1.0, 1.2, 1.4] {
        let field = torus_pseudonormal(gamma)?;
        let band = torus_band_audit(&field, 512);
        let cover = band_cover_audit(|t, p| field.eval(t, p), 256, 0.5, res);
        println!(
            "gamma {gamma:.1}: min alignment {:.4}, max |e3| {:.4} (cos gamma {:.4}), largest covered band {:.2}",
            band.min_alignment, band.max_e3, band.band_bound, cover.largest_covered_band
        );
    }
    Ok(())
}
