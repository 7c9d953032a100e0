//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use conic_schemes::{Gf, PlaneGeometry};

pub fn geometry(q: u32) -> Arc<PlaneGeometry> {
    let ctx = if q.is_power_of_two() {
        Gf::binary(q.trailing_zeros()).unwrap()
    } else {
        Gf::prime(q).unwrap()
    };
    Arc::new(PlaneGeometry::new(ctx).unwrap())
}

pub fn tower_geometry(sub_deg: u32) -> Arc<PlaneGeometry> {
    let base = Gf::binary(sub_deg).unwrap();
    Arc::new(PlaneGeometry::new(base.tower_extend().unwrap()).unwrap())
}
