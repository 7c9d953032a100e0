//! PGL(2,q): enumeration, the Möbius action on PG(1,q^m), the embedding
//! into PGL(3,q) fixing the conic, the induced action on lines, and the
//! two independent constructions of the coherent configuration on
//! non-tangent lines — orbit closure under generators, and direct
//! labelling by line type and modified cross-ratio.

use std::collections::HashMap;
use std::sync::Arc;

use crate::coherent::{CoherentConfiguration, RelId, RelLabel, RelationInfo};
use crate::crossratio::rho_hat_coords_unchecked;
use crate::gf::{Fe, Gf, ProjElem};
use crate::projconic::{canonicalize, LineType, PlaneGeometry};
use crate::{Error, Result};

/// Largest q for which full group enumeration and orbit closure run.
pub const GROUP_BOUND: u32 = 16;

/// An element of PGL(2,q): a 2×2 matrix [a, b; c, d], canonicalized so the
/// first nonzero entry is 1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Pgl2(pub [Fe; 4]);

impl Pgl2 {
    pub fn identity() -> Pgl2 {
        Pgl2([Fe::ONE, Fe::ZERO, Fe::ZERO, Fe::ONE])
    }

    pub fn canonical(ctx: &Gf, m: [Fe; 4]) -> Pgl2 {
        let lead = m.iter().copied().find(|&v| v != Fe::ZERO).expect("nonzero matrix");
        if lead == Fe::ONE {
            return Pgl2(m);
        }
        let s = ctx.inv(lead);
        Pgl2([ctx.mul(m[0], s), ctx.mul(m[1], s), ctx.mul(m[2], s), ctx.mul(m[3], s)])
    }

    pub fn det(&self, ctx: &Gf) -> Fe {
        let [a, b, c, d] = self.0;
        ctx.sub(ctx.mul(a, d), ctx.mul(b, c))
    }

    pub fn inverse(&self, ctx: &Gf) -> Pgl2 {
        let [a, b, c, d] = self.0;
        // Projectively the adjugate is the inverse.
        Pgl2::canonical(ctx, [d, ctx.neg(b), ctx.neg(c), a])
    }

    pub fn compose(&self, ctx: &Gf, other: &Pgl2) -> Pgl2 {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = other.0;
        Pgl2::canonical(
            ctx,
            [
                ctx.add(ctx.mul(a, e), ctx.mul(b, g)),
                ctx.add(ctx.mul(a, f), ctx.mul(b, h)),
                ctx.add(ctx.mul(c, e), ctx.mul(d, g)),
                ctx.add(ctx.mul(c, f), ctx.mul(d, h)),
            ],
        )
    }
}

/// The Möbius action x ↦ (ax+b)/(cx+d) on F_{q^m} ∪ {∞}. The matrix
/// entries live in the base field; with the tower encoding they are valid
/// elements of any extension context passed here.
pub fn apply_moebius(ctx: &Gf, m: &Pgl2, x: ProjElem) -> ProjElem {
    let [a, b, c, d] = m.0;
    match x {
        ProjElem::Finite(v) => {
            let num = ctx.add(ctx.mul(a, v), b);
            let den = ctx.add(ctx.mul(c, v), d);
            if den == Fe::ZERO {
                ProjElem::Infinity
            } else {
                ProjElem::Finite(ctx.div(num, den))
            }
        }
        ProjElem::Infinity => {
            if c == Fe::ZERO {
                ProjElem::Infinity
            } else {
                ProjElem::Finite(ctx.div(a, c))
            }
        }
    }
}

/// The embedding of PGL(2,q) into PGL(3,q) as the stabilizer of the conic:
/// [a,b;c,d] ↦ [[ad+bc, ac, bd], [2ab, a², b²], [2cd, c², d²]],
/// canonicalized so the first nonzero entry (row-major) is 1.
pub fn embed_pgl3(ctx: &Gf, m: &Pgl2) -> [[Fe; 3]; 3] {
    let [a, b, c, d] = m.0;
    let two = ctx.add(Fe::ONE, Fe::ONE);
    let raw = [
        [ctx.add(ctx.mul(a, d), ctx.mul(b, c)), ctx.mul(a, c), ctx.mul(b, d)],
        [ctx.mul(two, ctx.mul(a, b)), ctx.sq(a), ctx.sq(b)],
        [ctx.mul(two, ctx.mul(c, d)), ctx.sq(c), ctx.sq(d)],
    ];
    let lead = raw
        .iter()
        .flatten()
        .copied()
        .find(|&v| v != Fe::ZERO)
        .expect("nonzero matrix");
    if lead == Fe::ONE {
        return raw;
    }
    let s = ctx.inv(lead);
    raw.map(|row| row.map(|v| ctx.mul(v, s)))
}

pub fn mat3_apply(ctx: &Gf, m: &[[Fe; 3]; 3], v: &[Fe; 3]) -> [Fe; 3] {
    let dot = |row: &[Fe; 3]| {
        ctx.add(
            ctx.mul(row[0], v[0]),
            ctx.add(ctx.mul(row[1], v[1]), ctx.mul(row[2], v[2])),
        )
    };
    [dot(&m[0]), dot(&m[1]), dot(&m[2])]
}

/// All q³−q canonical elements, deterministic order. Errors above the
/// enumeration bound.
pub fn enumerate_group(ctx: &Gf) -> Result<Vec<Pgl2>> {
    let q = ctx.order() as u32;
    if q > GROUP_BOUND {
        return Err(Error::GroupBound(q, GROUP_BOUND));
    }
    let mut out = Vec::with_capacity((q * q * q - q) as usize);
    // The first nonzero entry of a canonical representative is 1; iterate
    // entries lexicographically and keep invertible canonical tuples.
    for a in ctx.iter() {
        for b in ctx.iter() {
            for c in ctx.iter() {
                for d in ctx.iter() {
                    let m = [a, b, c, d];
                    let lead = m.iter().copied().find(|&v| v != Fe::ZERO);
                    if lead != Some(Fe::ONE) {
                        continue;
                    }
                    let g = Pgl2(m);
                    if g.det(ctx) != Fe::ZERO {
                        out.push(g);
                    }
                }
            }
        }
    }
    debug_assert_eq!(out.len(), (q * q * q - q) as usize);
    Ok(out)
}

/// Generators of PGL(2,q): the translation x ↦ x+1, the scaling x ↦ δx by
/// a primitive element, and the inversion x ↦ 1/x.
pub fn generators(ctx: &Gf) -> Vec<Pgl2> {
    let delta = ctx.generator();
    vec![
        Pgl2([Fe::ONE, Fe::ONE, Fe::ZERO, Fe::ONE]),
        Pgl2::canonical(ctx, [delta, Fe::ZERO, Fe::ZERO, Fe::ONE]),
        Pgl2([Fe::ZERO, Fe::ONE, Fe::ONE, Fe::ZERO]),
    ]
}

/// The permutation a group element induces on the non-tangent lines:
/// dual coordinates transform by the transpose of the embedded inverse,
/// then canonicalize.
pub fn line_permutation(geom: &PlaneGeometry, g: &Pgl2) -> Vec<u32> {
    let ctx = &geom.ctx;
    let m = embed_pgl3(ctx, &g.inverse(ctx));
    let mt = [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ];
    geom.lines
        .iter()
        .map(|l| {
            let image = canonicalize(ctx, mat3_apply(ctx, &mt, &l.coords.0)).expect("nonzero");
            geom.line_id(&crate::projconic::LineCoords(image))
                .expect("the action permutes non-tangent lines")
        })
        .collect()
}

/// A configuration on the lines of one geometry, keeping the handle that
/// gives relation labels their meaning.
pub struct LineConfiguration {
    pub cc: CoherentConfiguration,
    pub geom: Arc<PlaneGeometry>,
    /// For formula-built configurations: (src fibre, dst fibre, label idx)
    /// → relation id.
    label_index: HashMap<(u8, u8, u16), RelId>,
}

impl LineConfiguration {
    /// Relation id of an off-diagonal label on a fibre pair.
    pub fn rel_of_label(&self, src: u8, dst: u8, label: Fe) -> Option<RelId> {
        self.label_index.get(&(src, dst, label.0)).copied()
    }

    /// Reattach a (cache-loaded) configuration to its geometry, rebuilding
    /// the label lookup from the relation table.
    pub fn from_cc(geom: Arc<PlaneGeometry>, cc: CoherentConfiguration) -> Result<LineConfiguration> {
        if cc.n != geom.lines.len() {
            return Err(Error::Cache(format!(
                "configuration on {} points does not fit a geometry with {} lines",
                cc.n,
                geom.lines.len()
            )));
        }
        let mut label_index = HashMap::new();
        for (id, r) in cc.relations.iter().enumerate() {
            if let RelLabel::RhoHat(v) = r.label {
                label_index.insert((r.src, r.dst, v), id as RelId);
            }
        }
        Ok(LineConfiguration {
            cc,
            geom,
            label_index,
        })
    }
}

fn fibre_of(ty: LineType) -> u8 {
    match ty {
        LineType::Hyperbolic => 0,
        LineType::Elliptic => 1,
        LineType::Tangent => unreachable!("geometry stores non-tangent lines"),
    }
}

/// Build the configuration by direct labelling: each ordered pair of
/// distinct lines gets (type ℓ, type m, ρ̂(ℓ,m)); the diagonal splits by
/// fibre. Relation ids are deterministic: diagonals first, then observed
/// labels sorted by (src, dst, label).
pub fn build_cc_formula(geom: &Arc<PlaneGeometry>) -> LineConfiguration {
    let ctx = &geom.ctx;
    let n = geom.lines.len();
    let order = ctx.order();
    let fibre: Vec<u8> = geom.lines.iter().map(|l| fibre_of(l.ty)).collect();
    let coords: Vec<[Fe; 3]> = geom.lines.iter().map(|l| l.coords.0).collect();

    let mut observed = vec![false; 4 * order];
    let mut labels = vec![0u16; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let lab = rho_hat_coords_unchecked(ctx, &coords[i], &coords[j]);
            labels[i * n + j] = lab.0;
            let combo = (fibre[i] * 2 + fibre[j]) as usize;
            observed[combo * order + lab.idx()] = true;
        }
    }

    let mut relations = Vec::new();
    let mut diag_id = [RelId::MAX; 2];
    for f in 0..2u8 {
        if fibre.iter().any(|&x| x == f) {
            diag_id[f as usize] = relations.len() as RelId;
            relations.push(RelationInfo {
                src: f,
                dst: f,
                diag: true,
                label: RelLabel::Diag,
                size: 0,
            });
        }
    }
    let mut id_table = vec![RelId::MAX; 4 * order];
    for combo in 0..4 {
        for lab in 0..order {
            if observed[combo * order + lab] {
                id_table[combo * order + lab] = relations.len() as RelId;
                relations.push(RelationInfo {
                    src: (combo / 2) as u8,
                    dst: (combo % 2) as u8,
                    diag: false,
                    label: RelLabel::RhoHat(lab as u16),
                    size: 0,
                });
            }
        }
    }

    let mut rel = vec![0 as RelId; n * n];
    for i in 0..n {
        for j in 0..n {
            rel[i * n + j] = if i == j {
                diag_id[fibre[i] as usize]
            } else {
                let combo = (fibre[i] * 2 + fibre[j]) as usize;
                id_table[combo * order + labels[i * n + j] as usize]
            };
        }
    }

    let mut label_index = HashMap::new();
    for (id, r) in relations.iter().enumerate() {
        if let RelLabel::RhoHat(v) = r.label {
            label_index.insert((r.src, r.dst, v), id as RelId);
        }
    }

    LineConfiguration {
        cc: CoherentConfiguration::assemble(fibre, rel, relations),
        geom: Arc::clone(geom),
        label_index,
    }
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
    }
}

/// Build the configuration as the orbit partition of L×L under the group,
/// by union-find closure over the generator images of every pair.
pub fn build_cc_orbit(geom: &Arc<PlaneGeometry>) -> Result<LineConfiguration> {
    let q = geom.ctx.order() as u32;
    if q > GROUP_BOUND {
        return Err(Error::GroupBound(q, GROUP_BOUND));
    }
    let n = geom.lines.len();
    let perms: Vec<Vec<u32>> = generators(&geom.ctx)
        .iter()
        .map(|g| line_permutation(geom, g))
        .collect();
    let mut uf = UnionFind::new(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = (i * n + j) as u32;
            for perm in &perms {
                let img = perm[i] * n as u32 + perm[j];
                uf.union(p, img);
            }
        }
    }
    // Orbit ids in order of first appearance (row-major).
    let fibre: Vec<u8> = geom.lines.iter().map(|l| fibre_of(l.ty)).collect();
    let mut root_to_id: HashMap<u32, RelId> = HashMap::new();
    let mut relations = Vec::new();
    let mut rel = vec![0 as RelId; n * n];
    for i in 0..n {
        for j in 0..n {
            let root = uf.find((i * n + j) as u32);
            let next = relations.len() as RelId;
            let id = *root_to_id.entry(root).or_insert_with(|| {
                relations.push(RelationInfo {
                    src: fibre[i],
                    dst: fibre[j],
                    diag: i == j,
                    label: RelLabel::Orbit(next as u32),
                    size: 0,
                });
                next
            });
            rel[i * n + j] = id;
        }
    }
    Ok(LineConfiguration {
        cc: CoherentConfiguration::assemble(fibre, rel, relations),
        geom: Arc::clone(geom),
        label_index: HashMap::new(),
    })
}

/// Do two configurations on the same ground set induce the same partition
/// of X×X? (Relation ids and labels may differ.)
pub fn partitions_equal(a: &CoherentConfiguration, b: &CoherentConfiguration) -> bool {
    if a.n != b.n {
        return false;
    }
    let mut a_to_b = vec![RelId::MAX; a.relations.len()];
    let mut b_to_a = vec![RelId::MAX; b.relations.len()];
    for idx in 0..a.n * a.n {
        let (x, y) = (a.rel[idx] as usize, b.rel[idx] as usize);
        if a_to_b[x] == RelId::MAX {
            a_to_b[x] = y as RelId;
        } else if a_to_b[x] as usize != y {
            return false;
        }
        if b_to_a[y] == RelId::MAX {
            b_to_a[y] = x as RelId;
        } else if b_to_a[y] as usize != x {
            return false;
        }
    }
    true
}
