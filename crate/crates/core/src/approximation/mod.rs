//! Smooth inner and outer approximations Ω_ε = {ρ > ε} and the flow-built
//! deformations between them.

mod level;
mod maps;
mod transfer;

pub use level::{extract_level_domain, LevelDomain, LevelOptions};
pub(crate) use level::UnionFind;
pub use maps::{roundtrip_audit, Deformation, DeformationMap, MapKind, RoundTripReport};
pub use transfer::{build_smooth_transfer, transfer_width, ReshapeProfile, SmoothTransfer};
