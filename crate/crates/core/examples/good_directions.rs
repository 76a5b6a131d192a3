//! Sets of good directions on the unit square: the full cone at an edge
//! point, the narrower cone at a corner, and the smooth field G built from
//! the atlas.

use rough_domain::geometry::p2;
use rough_domain::good_directions::{build_canonical_field, convexity_audit, pseudonormal_set};
use rough_domain::{C0Domain, FixtureId};

fn main() -> rough_domain::Result<()> {
    let d = C0Domain::fixture(FixtureId::UnitSquare)?;
    let res = 2f64.to_radians();
    for (label, p) in [("edge", p2(0.5, 0.0)), ("corner", p2(0.0, 0.0))] {
        let set = pseudonormal_set(&d, &p, 0.2, res)?;
        println!(
            "{label:6}: {} good directions, angular diameter {:.1} deg, convex {}",
            set.directions.len(),
            set.angular_diameter().to_degrees(),
            convexity_audit(&set, 200, 1)
        );
    }
    let g = build_canonical_field(&d)?;
    println!("collar {:.4}, {} patches", g.collar, g.partition.len());
    for x in [p2(0.5, 0.02), p2(0.03, 0.03), p2(0.98, 0.5)] {
        if let Some(v) = g.eval(&x)? {
            println!("G({:.2}, {:.2}) = ({:+.4}, {:+.4})", x.x, x.y, v.x, v.y);
        }
    }
    Ok(())
}
