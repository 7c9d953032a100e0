//! Property tests over randomly drawn field elements and configurations,
//! complementing the exhaustive desk-scale checks in the unit suites.

use std::sync::Arc;

use proptest::prelude::*;

use conic_schemes::crossratio::{cross_ratio, f_reduce, rho_hat_points};
use conic_schemes::gf::{Fe, ProjElem};
use conic_schemes::{Gf, PlaneGeometry};

fn field(which: u8) -> Arc<Gf> {
    match which % 5 {
        0 => Gf::binary(2).unwrap(),
        1 => Gf::binary(3).unwrap(),
        2 => Gf::binary(4).unwrap(),
        3 => Gf::prime(7).unwrap(),
        _ => Gf::prime(11).unwrap(),
    }
}

fn proj(ctx: &Gf, idx: usize) -> ProjElem {
    let n = ctx.order() + 1;
    let i = idx % n;
    if i == ctx.order() {
        ProjElem::Infinity
    } else {
        ProjElem::Finite(ctx.el(i))
    }
}

proptest! {
    /// Swapping both argument pairs preserves the cross-ratio; swapping
    /// one pair inverts it.
    #[test]
    fn cross_ratio_swap_laws(which in 0u8..5, a in 0usize..20, b in 0usize..20, c in 0usize..20, d in 0usize..20) {
        let ctx = field(which);
        let (a, b, c, d) = (proj(&ctx, a), proj(&ctx, b), proj(&ctx, c), proj(&ctx, d));
        let args = [a, b, c, d];
        let degenerate = args.iter().any(|&x| args.iter().filter(|&&y| y == x).count() >= 3);
        prop_assume!(!degenerate);
        let r = cross_ratio(&ctx, a, b, c, d).unwrap();
        prop_assert_eq!(cross_ratio(&ctx, b, a, d, c).unwrap(), r);
        let inv = match r {
            ProjElem::Infinity => ProjElem::Finite(Fe::ZERO),
            ProjElem::Finite(v) if v == Fe::ZERO => ProjElem::Infinity,
            ProjElem::Finite(v) => ProjElem::Finite(ctx.inv(v)),
        };
        prop_assert_eq!(cross_ratio(&ctx, a, b, d, c).unwrap(), inv);
    }

    /// f collapses exactly the inversion classes {x, x⁻¹}.
    #[test]
    fn f_reduce_collapses_inversion(which in 0u8..5, x in 0usize..300) {
        let ctx = field(which).extend_quadratic().unwrap();
        let x = proj(&ctx, x);
        let x_inv = match x {
            ProjElem::Infinity => ProjElem::Finite(Fe::ZERO),
            ProjElem::Finite(v) if v == Fe::ZERO => ProjElem::Infinity,
            ProjElem::Finite(v) => ProjElem::Finite(ctx.inv(v)),
        };
        prop_assert_eq!(f_reduce(&ctx, x), f_reduce(&ctx, x_inv));
    }

    /// The pair label is symmetric in its two lines.
    #[test]
    fn rho_hat_symmetry(which in 0u8..3, i in 0usize..4096, j in 0usize..4096) {
        let q: u32 = match which { 0 => 4, 1 => 8, _ => 5 };
        let ctx = if q.is_power_of_two() {
            Gf::binary(q.trailing_zeros()).unwrap()
        } else {
            Gf::prime(q).unwrap()
        };
        let geom = PlaneGeometry::new(ctx).unwrap();
        let n = geom.lines.len();
        let (i, j) = (i % n, j % n);
        prop_assume!(i != j);
        prop_assert_eq!(
            rho_hat_points(&geom, i as u32, j as u32).unwrap(),
            rho_hat_points(&geom, j as u32, i as u32).unwrap()
        );
    }

    /// Cache round-trips are exact for arbitrary label matrices that
    /// satisfy the structural shape (diagonal + off-diagonal labels).
    #[test]
    fn cache_round_trip(n in 2usize..12, labels in proptest::collection::vec(0u16..3, 144)) {
        use conic_schemes::cache::{load, save, CacheMeta, FORMAT_VERSION};
        use conic_schemes::coherent::{CoherentConfiguration, RelLabel, RelationInfo};
        let mut rel = vec![0u16; n * n];
        for i in 0..n {
            for j in 0..n {
                rel[i * n + j] = if i == j { 0 } else { 1 + labels[i * 12 + j] };
            }
        }
        let mut relations = vec![RelationInfo { src: 0, dst: 0, diag: true, label: RelLabel::Diag, size: 0 }];
        for v in 0..3u16 {
            relations.push(RelationInfo { src: 0, dst: 0, diag: false, label: RelLabel::RhoHat(v), size: 0 });
        }
        // Ensure every relation is nonempty so assemble sizes are valid.
        prop_assume!((1..4u16).all(|id| rel.iter().any(|&r| r == id)));
        let cc = CoherentConfiguration::assemble(vec![0; n], rel, relations);
        let meta = CacheMeta {
            format_version: FORMAT_VERSION,
            code_version: "test".into(),
            field_order: n,
            poly_mask: 0,
            tower_sub: 0,
            variant: "full".into(),
            method: "formula".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        save(dir.path(), &cc, &meta).unwrap();
        let loaded = load(dir.path(), &meta).unwrap().expect("hit");
        prop_assert_eq!(loaded.rel, cc.rel);
        prop_assert_eq!(loaded.fibre, cc.fibre);
    }
}
