//! Dimension bounds, finite Cantor stages and grid-regularity probes.

mod bounds;
mod cantor;
mod grid;

pub use bounds::{
    bound_code_lower, bound_code_w, bound_doubling, bound_hoeffding, bound_radii_lower, bound_upper_finite,
    bound_upper_radii, cantor_lambda, grid_transfer, DimensionBound, MassSequence,
};
pub use cantor::{
    build_cantor_stage, frostman_exponent, frostman_from_pairs, BlockRecord, CantorStage, FrostmanReport,
    LevelRecord, StageBlock, StageLevel, StageRecord, DEFAULT_FROSTMAN_CAP, SMB_EPS,
};
pub use grid::{grid_regularity_probe, GridSpec, ProbeBall, ProbePoint, ProbeTrace};

use num_traits::Zero;

use crate::exact::to_f64;
use crate::maps::{MapKind, MapModel};

/// `λ(P_{ij}) / λ(P_i)` for linear maps, `None` when `i → j` is forbidden.
pub(crate) fn digit_ratio(map: &MapModel, i: u32, j: u32) -> Option<f64> {
    match map.kind() {
        MapKind::DAryShift { digits } => Some(1.0 / *digits as f64),
        MapKind::MarkovLinear(m) => {
            let p = m.matrix().get(i as usize, j as usize);
            if p.is_zero() { None } else { Some(to_f64(p)) }
        }
        _ => None,
    }
}
