//! Points and lines of PG(2,q), the conic `{(ξ, ξ², 1)} ∪ {(0,1,0)}`, and
//! the classification of lines by their intersection with the conic's
//! extension to PG(2,q²).
//!
//! A line is carried in dual coordinates `(z, x, y)`: the point
//! `(P₀, P₁, P₂)` lies on it when `z·P₀ + x·P₁ + y·P₂ = 0`, so a conic
//! point P_ξ lies on the line exactly when `x·ξ² + z·ξ + y = 0`. Both
//! points and lines are canonicalized by scaling the first nonzero
//! coordinate to 1, which makes the representative unique and hashable.

use std::collections::HashMap;
use std::sync::Arc;

use crate::gf::{classes, Fe, Gf, ProjElem, TraceClasses};
use crate::{Error, Result};

/// A point of PG(2,·) in canonical homogeneous coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Point(pub [Fe; 3]);

/// Dual coordinates (z, x, y) of a line, canonicalized like a point.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct LineCoords(pub [Fe; 3]);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, serde::Serialize, serde::Deserialize)]
pub enum LineType {
    Tangent,
    Hyperbolic,
    Elliptic,
}

/// A non-tangent line together with its cached classification and its
/// intersection pair with the extended conic.
#[derive(Clone, Debug)]
pub struct Line {
    pub coords: LineCoords,
    pub ty: LineType,
    /// The two points of `ℓ ∩ O_{q²}`, as elements of F_{q²} ∪ {∞} in
    /// canonical (sorted) order. Hyperbolic: both in the embedded
    /// F_q ∪ {∞}; elliptic: a Frobenius-conjugate pair outside F_q.
    pub on_conic: (ProjElem, ProjElem),
}

/// Scale a homogeneous triple so its first nonzero coordinate is 1.
pub fn canonicalize(ctx: &Gf, c: [Fe; 3]) -> Result<[Fe; 3]> {
    let lead = c.iter().copied().find(|&v| v != Fe::ZERO).ok_or(Error::ZeroTriple)?;
    if lead == Fe::ONE {
        return Ok(c);
    }
    let s = ctx.inv(lead);
    Ok([ctx.mul(c[0], s), ctx.mul(c[1], s), ctx.mul(c[2], s)])
}

/// The conic point P_ξ = (ξ, ξ², 1), with P_∞ = (0,1,0), canonicalized.
pub fn conic_point(ctx: &Gf, xi: ProjElem) -> Point {
    match xi {
        ProjElem::Infinity => Point([Fe::ZERO, Fe::ONE, Fe::ZERO]),
        ProjElem::Finite(x) => {
            let raw = [x, ctx.sq(x), Fe::ONE];
            Point(canonicalize(ctx, raw).expect("conic point is nonzero"))
        }
    }
}

/// The q^m + 1 points of the conic in the given context.
pub fn conic(ctx: &Gf) -> Vec<Point> {
    let mut pts: Vec<Point> = ctx.iter().map(|x| conic_point(ctx, x.into())).collect();
    pts.push(conic_point(ctx, ProjElem::Infinity));
    pts
}

/// The tangent line t_ξ = (2ξ, 1, ξ²), with t_∞ = (0,0,1), canonicalized.
pub fn tangent_line(ctx: &Gf, xi: ProjElem) -> LineCoords {
    match xi {
        ProjElem::Infinity => LineCoords([Fe::ZERO, Fe::ZERO, Fe::ONE]),
        ProjElem::Finite(x) => {
            let two_xi = ctx.add(x, x);
            let raw = [two_xi, Fe::ONE, ctx.sq(x)];
            LineCoords(canonicalize(ctx, raw).expect("tangent is nonzero"))
        }
    }
}

/// The nucleus (1,0,0): for even q, the common point of all tangents.
pub fn nucleus() -> Point {
    Point([Fe::ONE, Fe::ZERO, Fe::ZERO])
}

pub fn incident(ctx: &Gf, l: &LineCoords, p: &Point) -> bool {
    let s = ctx.add(
        ctx.mul(l.0[0], p.0[0]),
        ctx.add(ctx.mul(l.0[1], p.0[1]), ctx.mul(l.0[2], p.0[2])),
    );
    s == Fe::ZERO
}

/// Classify a line by the discriminant Δ(ℓ): xy/z² for even q (∞ iff
/// z = 0), 1/(z² − 4xy) for odd q (∞ iff z² = 4xy). Tangent iff Δ = ∞,
/// hyperbolic iff Δ ∈ T₀, elliptic iff Δ ∈ T₁.
pub fn classify_line(ctx: &Gf, cls: &TraceClasses, l: &LineCoords) -> Result<LineType> {
    let [z, x, y] = l.0;
    if z == Fe::ZERO && x == Fe::ZERO && y == Fe::ZERO {
        return Err(Error::ZeroTriple);
    }
    if ctx.characteristic() == 2 {
        if z == Fe::ZERO {
            return Ok(LineType::Tangent);
        }
        let delta = ctx.div(ctx.mul(x, y), ctx.sq(z));
        Ok(if cls.in_t(0, delta) {
            LineType::Hyperbolic
        } else {
            LineType::Elliptic
        })
    } else {
        let four = ctx.add(ctx.add(Fe::ONE, Fe::ONE), ctx.add(Fe::ONE, Fe::ONE));
        let disc = ctx.sub(ctx.sq(z), ctx.mul(four, ctx.mul(x, y)));
        if disc == Fe::ZERO {
            return Ok(LineType::Tangent);
        }
        Ok(if cls.in_t(0, disc) {
            LineType::Hyperbolic
        } else {
            LineType::Elliptic
        })
    }
}

/// The unordered pair {α, β} ⊂ F_{q²} ∪ {∞} where a non-tangent line meets
/// the extended conic: the solutions of x·ξ² + z·ξ + y = 0, with ξ = ∞ a
/// solution iff x = 0. Returned in canonical (sorted) order.
pub fn intersect_conic(ext: &Gf, l: &LineCoords) -> Result<(ProjElem, ProjElem)> {
    let [z, x, y] = l.0;
    let (ez, ex, ey) = (ext.embed(z), ext.embed(x), ext.embed(y));
    if ex == Fe::ZERO {
        if ez == Fe::ZERO {
            // The line (0,0,1) is the tangent t_∞.
            return Err(Error::TangentLine);
        }
        let beta = ext.neg(ext.div(ey, ez));
        return Ok((ProjElem::Finite(beta), ProjElem::Infinity));
    }
    let roots = ext.solve_quadratic(ex, ez, ey)?;
    match roots.len() {
        2 => Ok((ProjElem::Finite(roots[0]), ProjElem::Finite(roots[1]))),
        _ => Err(Error::TangentLine),
    }
}

/// True iff some nonzero scalar multiple of the triple has all coordinates
/// in the embedded base field; with canonical coordinates this reduces to
/// being fixed coordinate-wise by the relative Frobenius.
pub fn is_real_triple(ext: &Gf, c: [Fe; 3]) -> bool {
    let canon = canonicalize(ext, c).expect("nonzero triple");
    canon.iter().all(|&v| ext.in_subfield(v))
}

pub fn is_real_point(ext: &Gf, p: &Point) -> bool {
    is_real_triple(ext, p.0)
}

/// The full non-tangent line geometry of PG(2,q): every line enumerated in
/// a deterministic order, classified, and paired with its conic
/// intersection over F_{q²}.
pub struct PlaneGeometry {
    pub ctx: Arc<Gf>,
    pub ext: Arc<Gf>,
    pub classes: TraceClasses,
    /// Non-tangent lines, deterministic order.
    pub lines: Vec<Line>,
    /// Ids of hyperbolic lines, in enumeration order.
    pub hyperbolic: Vec<u32>,
    /// Ids of elliptic lines, in enumeration order.
    pub elliptic: Vec<u32>,
    pub tangents: Vec<LineCoords>,
    index: HashMap<[Fe; 3], u32>,
}

impl PlaneGeometry {
    /// Enumerate PG(2,q) for the given field. Even q lists the non-tangent
    /// lines as (1,x,y) lexicographically in (x,y); odd q enumerates all
    /// canonical triples in (1,x,y), (0,1,y), (0,0,1) order and filters
    /// out the q+1 tangents.
    pub fn new(ctx: Arc<Gf>) -> Result<PlaneGeometry> {
        let ext = ctx.extend_quadratic()?;
        let cls = classes(&ctx);
        let mut lines = Vec::new();
        let mut tangents = Vec::new();
        {
            let mut push = |coords: LineCoords| -> Result<()> {
                match classify_line(&ctx, &cls, &coords)? {
                    LineType::Tangent => tangents.push(coords),
                    ty => {
                        let pair = intersect_conic(&ext, &coords)?;
                        lines.push(Line { coords, ty, on_conic: pair });
                    }
                }
                Ok(())
            };
            for x in ctx.iter() {
                for y in ctx.iter() {
                    push(LineCoords([Fe::ONE, x, y]))?;
                }
            }
            for y in ctx.iter() {
                push(LineCoords([Fe::ZERO, Fe::ONE, y]))?;
            }
            push(LineCoords([Fe::ZERO, Fe::ZERO, Fe::ONE]))?;
        }

        let mut hyperbolic = Vec::new();
        let mut elliptic = Vec::new();
        let mut index = HashMap::new();
        for (i, line) in lines.iter().enumerate() {
            index.insert(line.coords.0, i as u32);
            match line.ty {
                LineType::Hyperbolic => hyperbolic.push(i as u32),
                LineType::Elliptic => elliptic.push(i as u32),
                LineType::Tangent => unreachable!(),
            }
        }
        Ok(PlaneGeometry {
            ctx,
            ext,
            classes: cls,
            lines,
            hyperbolic,
            elliptic,
            tangents,
            index,
        })
    }

    pub fn q(&self) -> usize {
        self.ctx.order()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn line_id(&self, coords: &LineCoords) -> Option<u32> {
        self.index.get(&coords.0).copied()
    }

    /// CSV dump of the non-tangent lines: id, canonical triple, type tag.
    pub fn lines_csv(&self) -> String {
        let mut out = String::from("id,z,x,y,type\n");
        for (i, l) in self.lines.iter().enumerate() {
            let tag = match l.ty {
                LineType::Hyperbolic => "hyperbolic",
                LineType::Elliptic => "elliptic",
                LineType::Tangent => "tangent",
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i, l.coords.0[0].0, l.coords.0[1].0, l.coords.0[2].0, tag
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn geom(q: u32) -> PlaneGeometry {
        let ctx = if q.is_power_of_two() {
            Gf::binary(q.trailing_zeros()).unwrap()
        } else {
            Gf::prime(q).unwrap()
        };
        PlaneGeometry::new(ctx).unwrap()
    }

    #[test]
    fn conic_point_examples() {
        let f4 = Gf::binary(2).unwrap();
        assert_eq!(
            conic_point(&f4, Fe::ZERO.into()),
            Point([Fe::ZERO, Fe::ZERO, Fe::ONE])
        );
        assert_eq!(
            conic_point(&f4, ProjElem::Infinity),
            Point([Fe::ZERO, Fe::ONE, Fe::ZERO])
        );
        let w = f4.el(2);
        assert_eq!(conic_point(&f4, w.into()), Point([Fe::ONE, w, f4.sq(w)]));
    }

    #[test]
    fn tangent_examples() {
        let f4 = Gf::binary(2).unwrap();
        assert_eq!(
            tangent_line(&f4, ProjElem::Infinity),
            LineCoords([Fe::ZERO, Fe::ZERO, Fe::ONE])
        );
        assert_eq!(
            tangent_line(&f4, Fe::ONE.into()),
            LineCoords([Fe::ZERO, Fe::ONE, Fe::ONE])
        );
        // Every tangent passes through the nucleus for even q.
        for x in f4.iter() {
            assert!(incident(&f4, &tangent_line(&f4, x.into()), &nucleus()));
        }
        assert!(incident(&f4, &tangent_line(&f4, ProjElem::Infinity), &nucleus()));
    }

    #[test]
    fn classify_examples() {
        let f4 = Gf::binary(2).unwrap();
        let cls = classes(&f4);
        let w = f4.el(2);
        assert_eq!(
            classify_line(&f4, &cls, &LineCoords([Fe::ONE, Fe::ZERO, Fe::ZERO])).unwrap(),
            LineType::Hyperbolic
        );
        assert_eq!(
            classify_line(&f4, &cls, &LineCoords([Fe::ZERO, Fe::ZERO, Fe::ONE])).unwrap(),
            LineType::Tangent
        );
        assert_eq!(
            classify_line(&f4, &cls, &LineCoords([Fe::ONE, Fe::ONE, w])).unwrap(),
            LineType::Elliptic
        );
        assert!(matches!(
            classify_line(&f4, &cls, &LineCoords([Fe::ZERO; 3])),
            Err(Error::ZeroTriple)
        ));
    }

    #[test]
    fn intersect_examples() {
        let g = geom(4);
        // (1,0,0) meets the conic in {∞, 0}.
        let pair = intersect_conic(&g.ext, &LineCoords([Fe::ONE, Fe::ZERO, Fe::ZERO])).unwrap();
        assert_eq!(pair, (ProjElem::Finite(Fe::ZERO), ProjElem::Infinity));
        // (1,0,1) meets it in {∞, 1} for even q.
        let pair = intersect_conic(&g.ext, &LineCoords([Fe::ONE, Fe::ZERO, Fe::ONE])).unwrap();
        assert_eq!(pair, (ProjElem::Finite(Fe::ONE), ProjElem::Infinity));
        // (1,1,ω) is elliptic: a conjugate pair in GF(16) ∖ GF(4).
        let w = g.ctx.el(2);
        let (a, b) = intersect_conic(&g.ext, &LineCoords([Fe::ONE, Fe::ONE, w])).unwrap();
        let (a, b) = (a.finite().unwrap(), b.finite().unwrap());
        assert!(!g.ext.in_subfield(a));
        assert_eq!(g.ext.rel_frob(a), b);
        // Tangent input rejected.
        assert!(matches!(
            intersect_conic(&g.ext, &tangent_line(&g.ctx, Fe::ONE.into())),
            Err(Error::TangentLine)
        ));
    }

    #[test]
    fn enumeration_counts() {
        for (q, np, nm) in [
            (2u32, 3usize, 1usize),
            (3, 6, 3),
            (4, 10, 6),
            (5, 15, 10),
            (7, 28, 21),
            (8, 36, 28),
            (16, 136, 120),
        ] {
            let g = geom(q);
            assert_eq!(g.line_count(), (q * q) as usize, "q={q}");
            assert_eq!(g.hyperbolic.len(), np, "q={q}");
            assert_eq!(g.elliptic.len(), nm, "q={q}");
            assert_eq!(g.tangents.len(), (q + 1) as usize, "q={q}");
        }
    }

    #[test]
    fn oval_property_and_type_coherence() {
        for q in [2u32, 3, 4, 5, 7, 8, 16] {
            let g = geom(q);
            let pts = conic(&g.ctx);
            assert_eq!(pts.len(), (q + 1) as usize);
            for l in &g.lines {
                let hits = pts.iter().filter(|p| incident(&g.ctx, &l.coords, p)).count();
                let expected = match l.ty {
                    LineType::Hyperbolic => 2,
                    LineType::Elliptic => 0,
                    LineType::Tangent => 1,
                };
                assert_eq!(hits, expected);
                // Type matches the nature of the cached intersection pair.
                let (a, b) = l.on_conic;
                let real = |p: ProjElem| match p {
                    ProjElem::Infinity => true,
                    ProjElem::Finite(x) => g.ext.in_subfield(x),
                };
                match l.ty {
                    LineType::Hyperbolic => {
                        assert!(real(a) && real(b));
                        assert_ne!(a, b);
                    }
                    LineType::Elliptic => {
                        let (x, y) = (a.finite().unwrap(), b.finite().unwrap());
                        assert!(!g.ext.in_subfield(x));
                        assert_eq!(g.ext.rel_frob(x), y);
                    }
                    LineType::Tangent => unreachable!(),
                }
            }
            for t in &g.tangents {
                let hits = pts.iter().filter(|p| incident(&g.ctx, t, p)).count();
                assert_eq!(hits, 1);
            }
        }
    }

    #[test]
    fn tangents_concurrent_at_nucleus_for_even_q() {
        for q in [2u32, 4, 8, 16] {
            let g = geom(q);
            for t in &g.tangents {
                assert!(incident(&g.ctx, t, &nucleus()));
            }
        }
    }

    #[test]
    fn line_to_pair_is_a_bijection() {
        for q in [4u32, 5, 8] {
            let g = geom(q);
            let mut seen = std::collections::HashSet::new();
            for l in &g.lines {
                assert!(seen.insert(l.on_conic), "duplicate pair at q={q}");
            }
            // Cardinalities match Ω₊ and Ω₋.
            let qv = q as usize;
            assert_eq!(g.hyperbolic.len(), (qv + 1) * qv / 2);
            assert_eq!(g.elliptic.len(), (qv * qv - qv) / 2);
        }
    }

    #[test]
    fn real_point_counts() {
        // The extended conic has exactly q+1 real points.
        for q in [4u32, 5, 8] {
            let g = geom(q);
            let pts = conic(&g.ext);
            let real = pts.iter().filter(|p| is_real_point(&g.ext, p)).count();
            assert_eq!(real, (q + 1) as usize);
        }
    }

    #[test]
    fn csv_export() {
        let g = geom(2);
        let csv = g.lines_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("id,z,x,y,type"));
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.matches("hyperbolic").count(), 3);
        assert_eq!(csv.matches("elliptic").count(), 1);
    }

    #[test]
    fn real_examples() {
        let f4 = Gf::binary(2).unwrap();
        let f16 = f4.tower_extend().unwrap();
        let w = f16.embed(f4.el(2));
        assert!(is_real_point(&f16, &conic_point(&f16, w.into())));
        let alpha = f16.iter().find(|&x| !f16.in_subfield(x)).unwrap();
        assert!(!is_real_point(&f16, &conic_point(&f16, alpha.into())));
    }
}
