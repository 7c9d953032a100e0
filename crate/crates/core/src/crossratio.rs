//! The cross-ratio on PG(1,·), the pair-collapsing map `f`, and the
//! modified cross-ratio of two non-tangent lines — computed both from the
//! lines' conic-intersection pairs and directly from their homogeneous
//! coordinates.
//!
//! The modified cross-ratio is the single scalar that labels the relation
//! a pair of lines belongs to: `f` identifies r with r⁻¹, so one ordered
//! evaluation of the cross-ratio already determines the orbit invariant.

use crate::gf::{Fe, Gf, ProjElem};
use crate::projconic::{Line, LineType, PlaneGeometry};
use crate::{Error, Result};

/// PG(1,·) representative of a projective element: x ↦ (x, 1), ∞ ↦ (1, 0).
fn pg1(x: ProjElem) -> (Fe, Fe) {
    match x {
        ProjElem::Finite(v) => (v, Fe::ONE),
        ProjElem::Infinity => (Fe::ONE, Fe::ZERO),
    }
}

fn det2(ctx: &Gf, a: (Fe, Fe), b: (Fe, Fe)) -> Fe {
    ctx.sub(ctx.mul(a.0, b.1), ctx.mul(a.1, b.0))
}

/// The cross-ratio ρ(α,β,γ,δ) = (α−γ)(β−δ) / ((α−δ)(β−γ)), evaluated
/// through its determinant form so the ∞ conventions need no special
/// cases: the result is the PG(1,·) point
/// (det(v_α,v_γ)·det(v_β,v_δ) : det(v_α,v_δ)·det(v_β,v_γ)).
pub fn cross_ratio(ctx: &Gf, a: ProjElem, b: ProjElem, c: ProjElem, d: ProjElem) -> Result<ProjElem> {
    let args = [a, b, c, d];
    for x in args {
        if args.iter().filter(|&&y| y == x).count() >= 3 {
            return Err(Error::CrossRatioDegenerate);
        }
    }
    let (va, vb, vc, vd) = (pg1(a), pg1(b), pg1(c), pg1(d));
    let num = ctx.mul(det2(ctx, va, vc), det2(ctx, vb, vd));
    let den = ctx.mul(det2(ctx, va, vd), det2(ctx, vb, vc));
    Ok(if den == Fe::ZERO {
        ProjElem::Infinity
    } else {
        ProjElem::Finite(ctx.div(num, den))
    })
}

/// The map f collapsing {x, x⁻¹} to one value: 1/(x + x⁻¹) for even q,
/// 1/4 + 1/(−2 + x + x⁻¹) for odd q, with f(1) = ∞ and
/// f(0) = f(∞) = 0 (even) or 1/4 (odd).
pub fn f_reduce(ctx: &Gf, x: ProjElem) -> ProjElem {
    let quarter = || {
        let four = ctx.add(ctx.add(Fe::ONE, Fe::ONE), ctx.add(Fe::ONE, Fe::ONE));
        ctx.inv(four)
    };
    let x = match x {
        ProjElem::Infinity => {
            return if ctx.characteristic() == 2 {
                ProjElem::Finite(Fe::ZERO)
            } else {
                ProjElem::Finite(quarter())
            }
        }
        ProjElem::Finite(v) => v,
    };
    if x == Fe::ZERO {
        return if ctx.characteristic() == 2 {
            ProjElem::Finite(Fe::ZERO)
        } else {
            ProjElem::Finite(quarter())
        };
    }
    if x == Fe::ONE {
        return ProjElem::Infinity;
    }
    let s = ctx.add(x, ctx.inv(x));
    if ctx.characteristic() == 2 {
        // x + x⁻¹ = 0 would force x² = 1, i.e. x = 1, already excluded.
        ProjElem::Finite(ctx.inv(s))
    } else {
        let two = ctx.add(Fe::ONE, Fe::ONE);
        let t = ctx.sub(s, two);
        // t = 0 would force (x−1)² = 0, i.e. x = 1, already excluded.
        ProjElem::Finite(ctx.add(quarter(), ctx.inv(t)))
    }
}

/// The modified cross-ratio of two distinct non-tangent lines, evaluated
/// from their cached conic-intersection pairs: f(ρ(α,β,γ,δ)) mapped back
/// into the base field.
pub fn rho_hat_points(geom: &PlaneGeometry, l: u32, m: u32) -> Result<Fe> {
    if l == m {
        return Err(Error::EqualLines);
    }
    let (a, b) = geom.lines[l as usize].on_conic;
    let (c, d) = geom.lines[m as usize].on_conic;
    let r = cross_ratio(&geom.ext, a, b, c, d)?;
    match f_reduce(&geom.ext, r) {
        ProjElem::Finite(v) => geom
            .ext
            .to_subfield(v)
            .ok_or_else(|| Error::InvalidLabel(format!("rho-hat {v:?} outside the base field"))),
        ProjElem::Infinity => Err(Error::InvalidLabel("rho-hat = ∞ for distinct lines".into())),
    }
}

/// The same value computed directly from homogeneous coordinates
/// (z,x,y) and (z̄,x̄,ȳ):
/// even q: ((xȳ + x̄y)² + (xz̄ + x̄z)(yz̄ + ȳz)) / (z²z̄²);
/// odd q:  (xȳ + x̄y − zz̄/2)² · Δ(ℓ) · Δ(m).
pub fn rho_hat_coords(ctx: &Gf, l: &Line, m: &Line) -> Result<Fe> {
    if l.coords == m.coords {
        return Err(Error::EqualLines);
    }
    if l.ty == LineType::Tangent || m.ty == LineType::Tangent {
        return Err(Error::TangentLine);
    }
    Ok(rho_hat_coords_unchecked(ctx, &l.coords.0, &m.coords.0))
}

/// Unchecked fast path used by the pair loops: both triples must be
/// non-tangent lines (distinctness is not required — a line against
/// itself evaluates to 0, matching the diagonal convention).
pub fn rho_hat_coords_unchecked(ctx: &Gf, l: &[Fe; 3], m: &[Fe; 3]) -> Fe {
    let [z, x, y] = *l;
    let [zb, xb, yb] = *m;
    if ctx.characteristic() == 2 {
        let t = ctx.add(ctx.mul(x, yb), ctx.mul(xb, y));
        let u = ctx.mul(
            ctx.add(ctx.mul(x, zb), ctx.mul(xb, z)),
            ctx.add(ctx.mul(y, zb), ctx.mul(yb, z)),
        );
        let num = ctx.add(ctx.sq(t), u);
        ctx.div(num, ctx.sq(ctx.mul(z, zb)))
    } else {
        let two = ctx.add(Fe::ONE, Fe::ONE);
        let four = ctx.sq(two);
        let delta = |c: &[Fe; 3]| {
            let d = ctx.sub(ctx.sq(c[0]), ctx.mul(four, ctx.mul(c[1], c[2])));
            ctx.inv(d)
        };
        let s = ctx.sub(
            ctx.add(ctx.mul(x, yb), ctx.mul(xb, y)),
            ctx.div(ctx.mul(z, zb), two),
        );
        ctx.mul(ctx.sq(s), ctx.mul(delta(l), delta(m)))
    }
}

/// Type constraint from the label, for even q: a pair with label c has
/// types (ε, φ) with Tr(c) = e + f, so the type of one line determines
/// the other; c = 0 forces a hyperbolic pair.
pub fn type_from_rho_hat(ctx: &Gf, c: Fe, first: LineType) -> Result<LineType> {
    if ctx.characteristic() != 2 {
        return Err(Error::UnsupportedField("type_from_rho_hat requires even q".into()));
    }
    if c == Fe::ZERO {
        return Ok(LineType::Hyperbolic);
    }
    let e = match first {
        LineType::Hyperbolic => 0,
        LineType::Elliptic => 1,
        LineType::Tangent => return Err(Error::TangentLine),
    };
    let f = ctx.abs_trace(c) ^ e;
    Ok(if f == 0 { LineType::Hyperbolic } else { LineType::Elliptic })
}
