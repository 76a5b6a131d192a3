//! JSON domain-spec files.

use super::{C0Domain, FixtureId, GraphPatch};
use crate::geometry::Point;
use crate::{Error, Result};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub origin: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
    pub delta: f64,
    pub grid: GridSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dimension: usize,
    pub patches: Vec<PatchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<FixtureId>,
    /// Row-major rotation applied to the fixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 3]; 3]>,
}

fn vec_of(p: &Point, dim: usize) -> Vec<f64> {
    (0..dim).map(|k| p[k]).collect()
}

fn point_of(v: &[f64], dim: usize) -> Result<Point> {
    if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("expected {dim} finite coordinates, got {v:?}")));
    }
    let mut p = Point::zeros();
    for (k, x) in v.iter().enumerate() {
        p[k] = *x;
    }
    Ok(p)
}

impl DomainSpec {
    pub fn from_domain(d: &C0Domain) -> Self {
        let patches = d
            .atlas
            .iter()
            .map(|p| PatchSpec {
                origin: vec_of(&p.origin, d.dim),
                frame: p.frame.iter().map(|e| vec_of(e, d.dim)).collect(),
                delta: p.delta,
                grid: GridSpec { resolution: p.resolution, values: p.values.clone() },
            })
            .collect();
        let rotation = d.transform.map(|t| {
            let mut r = [[0.0; 3]; 3];
            for (i, row) in r.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = t[(i, j)];
                }
            }
            r
        });
        DomainSpec { dimension: d.dim, patches, fixture: d.fixture.clone(), rotation }
    }

    pub fn transform(&self) -> Option<Matrix3<f64>> {
        self.rotation.map(|r| Matrix3::from_fn(|i, j| r[i][j]))
    }

    /// Validated patches.
    pub fn patches(&self) -> Result<Vec<GraphPatch>> {
        let dim = self.dimension;
        self.patches
            .iter()
            .enumerate()
            .map(|(i, ps)| {
                let bad = |why: &str| Error::InvalidInput(format!("patch {i}: {why}"));
                if ps.frame.len() != dim {
                    return Err(bad("frame must have one vector per dimension"));
                }
                if !(ps.delta > 0.0) {
                    return Err(bad("delta must be positive"));
                }
                let r = ps.grid.resolution;
                if r < 2 || ps.grid.values.len() != r.pow(dim as u32 - 1) {
                    return Err(bad("grid size does not match resolution"));
                }
                let frame = ps.frame.iter().map(|e| point_of(e, dim)).collect::<Result<Vec<_>>>()?;
                let p = GraphPatch {
                    origin: point_of(&ps.origin, dim)?,
                    frame,
                    delta: ps.delta,
                    resolution: r,
                    values: ps.grid.values.clone(),
                };
                if p.frame_error() > 1e-9 {
                    return Err(bad("frame is not orthonormal"));
                }
                Ok(p)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let d = C0Domain::fixture(FixtureId::UnitSquare).unwrap();
        let spec = d.to_spec();
        let s = spec.to_json();
        let back = DomainSpec::from_json(&s).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_json(), s);
        for (a, b) in spec.patches.iter().zip(&back.patches) {
            for (x, y) in a.grid.values.iter().zip(&b.grid.values) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        let d2 = C0Domain::from_spec(&back).unwrap();
        assert_eq!(d2.atlas, d.atlas);
    }

    #[test]
    fn rejects_malformed_patches() {
        let d = C0Domain::fixture(FixtureId::UnitDisk).unwrap();
        let mut spec = d.to_spec();
        spec.patches[0].grid.values.pop();
        assert!(C0Domain::from_spec(&spec).is_err());
    }
}
