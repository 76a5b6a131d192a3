//! Degrees of Gauss maps: sphere, torus, and the boundary of a smoothed
//! planar domain.

use rough_domain::approximation::{extract_level_domain, LevelOptions};
use rough_domain::flow::Flow;
use rough_domain::mesh::TriMesh;
use rough_domain::topology::{degree, euler_characteristic, SphereField};
use rough_domain::{C0Domain, FixtureId};
use std::sync::Arc;

fn main() -> rough_domain::Result<()> {
    for (name, mesh) in [("icosphere", TriMesh::icosphere(4)), ("torus", TriMesh::torus(2.0, 1.0, 96, 48))] {
        let r = degree(&SphereField::mesh_normals(&mesh)?)?;
        println!("{name:10} chi {:2}  degree {:2}  raw {:+.6}", euler_characteristic(&mesh)?, r.degree, r.raw);
    }
    for name in ["UnitDisk", "Annulus", "UnitSquare"] {
        let flow = Flow::for_domain(Arc::new(C0Domain::fixture(FixtureId::from_name(name).unwrap())?))?;
        let level = extract_level_domain(&flow.rho, 0.5 * flow.eps0(), &LevelOptions::for_dim(2))?;
        let r = degree(&SphereField::level_normals(&level)?)?;
        println!("{name:10} level winding {:2}  raw {:+.6}  max jump {:.3} rad", r.degree, r.raw, r.max_jump);
    }
    Ok(())
}
