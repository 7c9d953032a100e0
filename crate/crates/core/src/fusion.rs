//! Fusions of the line configuration for even q: the Frobenius fusion of
//! R(q), the five-relation fusion of R(q²) with its closed-form
//! intersection tables, the further merges, and the strongly regular
//! graphs those merges produce.
//!
//! Tables are stored as integer polynomial expressions in q (with ε and
//! δ_{ε,1} as parameters) and evaluated on demand, so a transcription slip
//! shows up as a brute-force mismatch rather than a silently wrong
//! constant for one field size.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coherent::{CoherentConfiguration, FusedClass, RelId, RelLabel, RelationInfo};
use crate::gf::{Fe, Gf};
use crate::group_action::LineConfiguration;
use crate::projconic::PlaneGeometry;
use crate::{Error, Result};

/// A relation-label partition defining a fusion: every old relation id is
/// assigned to a class of the coarser configuration. Diagonal relations
/// map to themselves.
#[derive(Clone, Debug)]
pub struct FusionSpec {
    pub name: String,
    /// old relation id → new relation id.
    pub assignment: Vec<RelId>,
    /// Metadata of the new relations (sizes recomputed on apply).
    pub classes: Vec<RelationInfo>,
}

impl FusionSpec {
    pub fn apply(&self, cc: &CoherentConfiguration) -> Result<CoherentConfiguration> {
        if self.assignment.len() != cc.relations.len() {
            return Err(Error::Fusion("assignment length mismatch".into()));
        }
        for (old, r) in cc.relations.iter().enumerate() {
            let new = &self.classes[self.assignment[old] as usize];
            if r.diag != new.diag || r.src != new.src || r.dst != new.dst {
                return Err(Error::Fusion(format!(
                    "class {} does not respect fibres/diagonal of relation {old}",
                    self.assignment[old]
                )));
            }
        }
        let rel: Vec<RelId> = cc.rel.iter().map(|&id| self.assignment[id as usize]).collect();
        Ok(CoherentConfiguration::assemble(
            cc.fibre.clone(),
            rel,
            self.classes.clone(),
        ))
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The fusion of R(q) along the orbits of the field automorphism
/// x ↦ x^{2^k} on the label set F_q. Requires gcd(k, r) = 1 for q = 2^r.
pub struct FrobeniusFusion {
    pub cc: CoherentConfiguration,
    /// τ_k-orbits of F_q, each sorted, ordered by minimal element.
    pub orbits: Vec<Vec<Fe>>,
    class_index: HashMap<(u8, u8, u16), RelId>,
}

impl FrobeniusFusion {
    /// Relation id of an orbit (by its minimal element) on a fibre pair.
    pub fn rel_of_orbit(&self, src: u8, dst: u8, rep: Fe) -> Option<RelId> {
        self.class_index.get(&(src, dst, rep.0)).copied()
    }
}

/// Orbit representative map of x ↦ x^{2^k} on the field.
pub fn frobenius_orbits(ctx: &Gf, k: u32) -> (Vec<Vec<Fe>>, Vec<Fe>) {
    let n = ctx.order();
    let mut rep = vec![Fe::ZERO; n];
    let mut seen = vec![false; n];
    let mut orbits = Vec::new();
    let step = |x: Fe| {
        let mut y = x;
        for _ in 0..k {
            y = ctx.frobenius(y);
        }
        y
    };
    for x in ctx.iter() {
        if seen[x.idx()] {
            continue;
        }
        let mut orbit = vec![x];
        seen[x.idx()] = true;
        let mut y = step(x);
        while y != x {
            seen[y.idx()] = true;
            orbit.push(y);
            y = step(y);
        }
        orbit.sort();
        let r = orbit[0];
        for &z in &orbit {
            rep[z.idx()] = r;
        }
        orbits.push(orbit);
    }
    (orbits, rep)
}

pub fn frobenius_fusion(conf: &LineConfiguration, k: u32) -> Result<FrobeniusFusion> {
    let ctx = &conf.geom.ctx;
    if ctx.characteristic() != 2 {
        return Err(Error::Fusion("Frobenius fusion requires even q".into()));
    }
    let r = ctx.degree();
    if gcd(k, r) != 1 {
        return Err(Error::Fusion(format!("gcd(k={k}, r={r}) must be 1")));
    }
    let (orbits, rep) = frobenius_orbits(ctx, k);
    // New classes: diagonals first (in original order), then per fibre
    // pair the orbit representatives in element order.
    let mut classes = Vec::new();
    let mut assignment = vec![RelId::MAX; conf.cc.relations.len()];
    for (old, rel) in conf.cc.relations.iter().enumerate() {
        if rel.diag {
            assignment[old] = classes.len() as RelId;
            classes.push(rel.clone());
        }
    }
    let mut class_index: HashMap<(u8, u8, u16), RelId> = HashMap::new();
    for combo in 0..4u8 {
        let (src, dst) = (combo / 2, combo % 2);
        for orbit in &orbits {
            let r0 = orbit[0];
            // Collect the old relations with labels in this orbit.
            let members: Vec<usize> = conf
                .cc
                .relations
                .iter()
                .enumerate()
                .filter(|(_, rel)| {
                    !rel.diag
                        && rel.src == src
                        && rel.dst == dst
                        && matches!(rel.label, RelLabel::RhoHat(v) if rep[v as usize] == r0)
                })
                .map(|(i, _)| i)
                .collect();
            if members.is_empty() {
                continue;
            }
            let id = classes.len() as RelId;
            class_index.insert((src, dst, r0.0), id);
            classes.push(RelationInfo {
                src,
                dst,
                diag: false,
                label: RelLabel::LabelOrbit(r0.0),
                size: 0,
            });
            for old in members {
                assignment[old] = id;
            }
        }
    }
    if assignment.iter().any(|&a| a == RelId::MAX) {
        return Err(Error::Fusion("unassigned relation in Frobenius fusion".into()));
    }
    let spec = FusionSpec {
        name: format!("frobenius(k={k})"),
        assignment,
        classes,
    };
    Ok(FrobeniusFusion {
        cc: spec.apply(&conf.cc)?,
        orbits,
        class_index,
    })
}

/// The five-relation fusion of R(q²), q even: labels are grouped into
/// R₁ = S₀*, R₂ = S₁, R₃ = T₀ ∖ F_q, R₄ = {0}, R₅ = T₁, each split by
/// fibre pair.
pub struct FusedConfiguration {
    pub cc: CoherentConfiguration,
    pub geom: Arc<PlaneGeometry>,
    /// The subfield size q (the field of the configuration is F_{q²}).
    pub sub_q: usize,
    class_index: HashMap<(u8, u8, FusedClass), RelId>,
}

impl FusedConfiguration {
    pub fn rel_of_class(&self, src: u8, dst: u8, class: FusedClass) -> Option<RelId> {
        self.class_index.get(&(src, dst, class)).copied()
    }
}

/// The class of a label of F_{q²} under the five-relation partition.
pub fn five_class_of_label(ext: &Gf, x: Fe) -> FusedClass {
    if x == Fe::ZERO {
        return FusedClass::R4;
    }
    if ext.in_subfield(x) {
        let parent = ext.parent().expect("tower");
        if parent.abs_trace(x) == 0 {
            FusedClass::R1
        } else {
            FusedClass::R2
        }
    } else if ext.abs_trace(x) == 0 {
        FusedClass::R3
    } else {
        FusedClass::R5
    }
}

pub fn five_class_fusion(conf: &LineConfiguration) -> Result<FusedConfiguration> {
    let ext = &conf.geom.ctx;
    if ext.characteristic() != 2 {
        return Err(Error::Fusion("five-class fusion requires even order".into()));
    }
    let parent = ext
        .parent()
        .ok_or_else(|| Error::Fusion("field order must be an even square q² built over F_q".into()))?;
    let sub_q = parent.order();

    let all = [
        FusedClass::R1,
        FusedClass::R2,
        FusedClass::R3,
        FusedClass::R4,
        FusedClass::R5,
    ];
    let mut classes = Vec::new();
    let mut assignment = vec![RelId::MAX; conf.cc.relations.len()];
    for (old, rel) in conf.cc.relations.iter().enumerate() {
        if rel.diag {
            assignment[old] = classes.len() as RelId;
            classes.push(rel.clone());
        }
    }
    let mut class_index = HashMap::new();
    for combo in 0..4u8 {
        let (src, dst) = (combo / 2, combo % 2);
        for class in all {
            let members: Vec<usize> = conf
                .cc
                .relations
                .iter()
                .enumerate()
                .filter(|(_, rel)| {
                    !rel.diag
                        && rel.src == src
                        && rel.dst == dst
                        && matches!(rel.label, RelLabel::RhoHat(v) if five_class_of_label(ext, Fe(v)) == class)
                })
                .map(|(i, _)| i)
                .collect();
            if members.is_empty() {
                continue;
            }
            // Nonemptiness pattern: same-fibre for R₁..R₃, hyperbolic
            // diagonal block only for R₄, mixed only for R₅.
            let legal = match class {
                FusedClass::R1 | FusedClass::R2 | FusedClass::R3 => src == dst,
                FusedClass::R4 => src == 0 && dst == 0,
                FusedClass::R5 => src != dst,
                _ => false,
            };
            if !legal {
                return Err(Error::Fusion(format!(
                    "class {} appears on fibre pair ({src},{dst})",
                    class.name()
                )));
            }
            let id = classes.len() as RelId;
            class_index.insert((src, dst, class), id);
            classes.push(RelationInfo {
                src,
                dst,
                diag: false,
                label: RelLabel::Class(class),
                size: 0,
            });
            for old in members {
                assignment[old] = id;
            }
        }
    }
    if assignment.iter().any(|&a| a == RelId::MAX) {
        return Err(Error::Fusion("unassigned relation in five-class fusion".into()));
    }
    let spec = FusionSpec {
        name: "five-class".into(),
        assignment,
        classes,
    };
    Ok(FusedConfiguration {
        cc: spec.apply(&conf.cc)?,
        geom: Arc::clone(&conf.geom),
        sub_q,
        class_index,
    })
}

/// The further merges: R₁ ∪ R₂ on both fibres (3-class scheme on L₊,
/// strongly regular graph on L₋), and additionally with R₄ on L₊
/// (strongly regular graph on L₊).
pub struct FurtherFusions {
    pub merged12: FusedConfiguration,
    pub merged124: FusedConfiguration,
}

fn merge_classes(
    five: &FusedConfiguration,
    name: &str,
    merged: impl Fn(u8, FusedClass) -> FusedClass,
) -> Result<FusedConfiguration> {
    let mut classes = Vec::new();
    let mut assignment = vec![RelId::MAX; five.cc.relations.len()];
    let mut class_index: HashMap<(u8, u8, FusedClass), RelId> = HashMap::new();
    for (old, rel) in five.cc.relations.iter().enumerate() {
        if rel.diag {
            assignment[old] = classes.len() as RelId;
            classes.push(rel.clone());
            continue;
        }
        let class = match rel.label {
            RelLabel::Class(c) => merged(rel.src, c),
            _ => return Err(Error::Fusion("expected a five-class configuration".into())),
        };
        let key = (rel.src, rel.dst, class);
        let id = *class_index.entry(key).or_insert_with(|| {
            let id = classes.len() as RelId;
            classes.push(RelationInfo {
                src: rel.src,
                dst: rel.dst,
                diag: false,
                label: RelLabel::Class(class),
                size: 0,
            });
            id
        });
        assignment[old] = id;
    }
    let spec = FusionSpec {
        name: name.into(),
        assignment,
        classes,
    };
    Ok(FusedConfiguration {
        cc: spec.apply(&five.cc)?,
        geom: Arc::clone(&five.geom),
        sub_q: five.sub_q,
        class_index,
    })
}

pub fn three_class_and_srg_fusions(five: &FusedConfiguration) -> Result<FurtherFusions> {
    let merged12 = merge_classes(five, "merge-12", |_, c| match c {
        FusedClass::R1 | FusedClass::R2 => FusedClass::R12,
        other => other,
    })?;
    let merged124 = merge_classes(five, "merge-124", |src, c| match c {
        FusedClass::R1 | FusedClass::R2 if src == 0 => FusedClass::R124,
        FusedClass::R4 if src == 0 => FusedClass::R124,
        FusedClass::R1 | FusedClass::R2 => FusedClass::R12,
        other => other,
    })?;
    Ok(FurtherFusions { merged12, merged124 })
}

// ----------------------------------------------------------------------
// Closed-form tables.
// ----------------------------------------------------------------------

/// Class sizes r_i of the five label groups.
pub fn class_sizes(q: i64) -> [i64; 6] {
    [0, (q - 2) / 2, q / 2, q * (q - 2) / 2, 1, q * q / 2]
}

/// Valencies: v_i(ε) = r_i (q² − ε) for i ≠ 4, v₄(ε) = 2(q²−1) δ_{ε,1}.
pub fn fused_valency(q: i64, eps: i64, i: usize) -> i64 {
    let r = class_sizes(q);
    if i == 4 {
        if eps == 1 {
            2 * (q * q - 1)
        } else {
            0
        }
    } else {
        r[i] * (q * q - eps)
    }
}

/// Every closed-form intersection number of the five-class fusion and its
/// merges, evaluated at a given q. Entries are indexed 1..=5 for the
/// five-class tables; the merge tables use the merged class lists.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FusedTables {
    pub q: i64,
    pub eps: i64,
    /// v[i], i in 1..=5.
    pub valencies: [i64; 6],
    /// five[k][i][j] = p^k_{i,j}(ε), 1-based.
    pub five: [[[i64; 6]; 6]; 6],
    /// Classes {12}, 3, 4, 5 (indices 0..4): merged12[k][i][j].
    pub merged12: [[[i64; 4]; 4]; 4],
    /// Classes {124}, 3, 5 (indices 0..3), hyperbolic side (ε = 1 only).
    pub merged124: [[[i64; 3]; 3]; 3],
}

/// Evaluate the tables at q (even) and ε ∈ {+1, −1}.
pub fn fused_tables(q: i64, eps: i64) -> FusedTables {
    assert!(q >= 2 && q % 2 == 0 && (eps == 1 || eps == -1));
    let e = eps;
    let d = i64::from(eps == 1);
    let v = |i: usize| fused_valency(q, e, i);
    let vm = |i: usize| fused_valency(q, -e, i);

    let mut five = [[[0i64; 6]; 6]; 6];
    {
        // k = 1 (labels in S₀*).
        let t = &mut five[1];
        t[1][1] = (1 + e) * q * q / 2 - (4 + 5 * e) * q / 2 + 2 + 4 * e;
        t[1][2] = q * (q - 2 * (e + 1)) / 2;
        t[1][3] = (q * q - (4 + e) * q + 4 * (1 + e)) * q / 2;
        t[1][4] = 2 * (q - 3) * d;
        t[2][2] = q * ((1 + e) * q - e) / 2;
        t[2][3] = q * q * (q - (2 + e)) / 2;
        t[2][4] = 2 * q * d;
        t[3][3] = (q * q * q - 4 * q * q + (4 - e) * q + 2 * e) * q / 2;
        t[3][4] = 2 * q * (q - 2) * d;
        t[4][4] = 4 * d;
        t[5][5] = v(5);
    }
    {
        // k = 2 (labels in S₁).
        let t = &mut five[2];
        t[1][1] = (q / 2 - 1) * (q - 2 * (e + 1));
        t[1][2] = (1 + e) * q * q / 2 - (3 * e + 2) * q / 2 + e;
        t[1][3] = (q * q - (4 + e) * q + 2 * (e + 2)) * q / 2;
        t[1][4] = 2 * (q - 2) * d;
        t[2][2] = q * (q / 2 - e);
        t[2][3] = (q * q - (2 + e) * q + 2 * e) * q / 2;
        t[2][4] = 2 * (q - 1) * d;
        t[3][3] = (q * q * q - 4 * q * q + (4 - e) * q + 2 * e) * q / 2;
        t[3][4] = 2 * q * (q - 2) * d;
        t[4][4] = 4 * d;
        t[5][5] = v(5);
    }
    {
        // k = 3 (labels in T₀ ∖ F_q).
        let t = &mut five[3];
        t[1][1] = (q * q - (e + 4) * q + 4 * (e + 1)) / 2;
        t[1][2] = q * (q - e - 2) / 2;
        t[1][3] = (q / 2 - 1) * (q * q - 2 * q - e);
        t[1][4] = 2 * (q - 2) * d;
        t[2][2] = q * (q - e) / 2;
        t[2][3] = (q * q - 2 * q - e) * q / 2;
        t[2][4] = 2 * q * d;
        t[3][3] = (q * q * q - 4 * q * q + (4 - 3 * e) * q + 8 * e) * q / 2;
        t[3][4] = 2 * (q * q - 2 * q - 1) * d;
        t[4][4] = 4 * d;
        t[5][5] = v(5);
    }
    if eps == 1 {
        // k = 4 (label 0; hyperbolic pairs only).
        let t = &mut five[4];
        t[1][1] = (q - 2) * (q - 3) / 2;
        t[1][2] = q * (q - 2) / 2;
        t[1][3] = q * (q - 2) * (q - 2) / 2;
        t[1][4] = q - 2;
        t[2][2] = q * (q - 1) / 2;
        t[2][3] = q * q * (q - 2) / 2;
        t[2][4] = q;
        t[3][3] = q * (q - 2) * (q * q - 2 * q - 1) / 2;
        t[3][4] = q * (q - 2);
        t[4][4] = q * q - 1;
        t[5][5] = v(5);
    }
    {
        // k = 5 (labels in T₁; mixed pairs).
        let t = &mut five[5];
        for i in 1..=4 {
            t[i][5] = v(i);
            t[5][i] = vm(i);
        }
    }
    // Symmetrize: p^k_{j,i}(ε) = p^k_{i,j}(ε) for k ≤ 4.
    for t in five.iter_mut().take(5).skip(1) {
        for i in 1..6 {
            for j in 0..i {
                t[i][j] = t[j][i];
            }
        }
    }

    // Merged {1,2}: classes A = {12} (0), 3 (1), 4 (2), 5 (3).
    let mut merged12 = [[[0i64; 4]; 4]; 4];
    {
        // k = A.
        let t = &mut merged12[0];
        t[0][0] = (2 + e) * q * q - (4 + 5 * e) * q + 2 + 4 * e;
        t[0][1] = q * (q * q - (e + 3) * q + 2 * (1 + e));
        t[0][2] = 2 * (2 * q - 3) * d;
        t[1][1] = (q * q * q - 4 * q * q + (4 - e) * q + 2 * e) * q / 2;
        t[1][2] = 2 * q * (q - 2) * d;
        t[2][2] = 4 * d;
        t[3][3] = v(5);
    }
    {
        // k = 3.
        let t = &mut merged12[1];
        t[0][0] = 2 * q * q - (2 * e + 4) * q + 2 * (e + 1);
        t[0][1] = q * q * q - 3 * q * q - (e - 2) * q + e;
        t[0][2] = 4 * (q - 1) * d;
        t[1][1] = (q * q * q - 4 * q * q + (4 - 3 * e) * q + 8 * e) * q / 2;
        t[1][2] = 2 * (q * q - 2 * q - 1) * d;
        t[2][2] = 4 * d;
        t[3][3] = v(5);
    }
    if eps == 1 {
        // k = 4.
        let t = &mut merged12[2];
        t[0][0] = 2 * q * q - 5 * q + 3;
        t[0][1] = q * (q - 1) * (q - 2);
        t[0][2] = 2 * (q - 1);
        t[1][1] = q * (q - 2) * (q * q - 2 * q - 1) / 2;
        t[1][2] = q * (q - 2);
        t[2][2] = q * q - 1;
        t[3][3] = v(5);
    }
    {
        // k = 5.
        let t = &mut merged12[3];
        t[0][3] = v(1) + v(2);
        t[1][3] = v(3);
        t[2][3] = v(4);
        t[3][0] = vm(1) + vm(2);
        t[3][1] = vm(3);
        t[3][2] = vm(4);
    }
    for t in merged12.iter_mut().take(3) {
        for i in 0..4 {
            for j in 0..i {
                t[i][j] = t[j][i];
            }
        }
    }

    // Further merge {1,2,4} on the hyperbolic side: classes B = {124} (0),
    // 3 (1), 5 (2). Only meaningful at ε = 1.
    let mut merged124 = [[[0i64; 3]; 3]; 3];
    if eps == 1 {
        {
            // k = B.
            let t = &mut merged124[0];
            t[0][0] = 3 * q * q - q - 2;
            t[0][1] = q * q * (q - 2);
            t[1][1] = q * (q - 2) * (q * q - 2 * q - 1) / 2;
            t[2][2] = v(5);
        }
        {
            // k = 3. The head entry reads 2q(q+2) in the source table, but
            // summing the fine-grained tables (and the strongly-regular
            // parameter identity) force 2q(q+1).
            let t = &mut merged124[1];
            t[0][0] = 2 * q * (q + 1);
            t[0][1] = (q + 1) * (q * q - 2 * q - 1);
            t[1][1] = (q * q * q - 4 * q * q + q + 8) * q / 2;
            t[2][2] = v(5);
        }
        {
            // k = 5.
            let t = &mut merged124[2];
            t[0][2] = v(1) + v(2) + v(4);
            t[1][2] = v(3);
            t[2][0] = vm(1) + vm(2) + vm(4);
            t[2][1] = vm(3);
        }
        for t in merged124.iter_mut().take(2) {
            for i in 0..3 {
                for j in 0..i {
                    t[i][j] = t[j][i];
                }
            }
        }
    }

    FusedTables {
        q,
        eps,
        valencies: [0, v(1), v(2), v(3), v(4), v(5)],
        five,
        merged12,
        merged124,
    }
}

// ----------------------------------------------------------------------
// Strongly regular graphs.
// ----------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrgParams {
    pub v: i64,
    pub k: i64,
    pub lambda: i64,
    pub mu: i64,
}

/// The parameter family of the two strongly regular graphs:
/// v = q²(q²+ε)/2, k = (q²−ε)(q+ε), λ = 2(q²−1) + εq(q−1), μ = 2q(q+ε).
pub fn srg_family(q: i64, eps: i64) -> SrgParams {
    SrgParams {
        v: q * q * (q * q + eps) / 2,
        k: (q * q - eps) * (q + eps),
        lambda: 2 * (q * q - 1) + eps * q * (q - 1),
        mu: 2 * q * (q + eps),
    }
}

/// The feasibility identity k(k−λ−1) = (v−k−1)μ.
pub fn srg_feasible(p: &SrgParams) -> bool {
    let lhs = i128::from(p.k) * i128::from(p.k - p.lambda - 1);
    let rhs = i128::from(p.v - p.k - 1) * i128::from(p.mu);
    lhs == rhs
}

/// Verify vertex-by-vertex that one relation of a 2-class scheme is a
/// strongly regular graph, returning its measured parameters. Adjacency
/// rows are packed into bit words so a common-neighbour count is an
/// AND-popcount sweep.
pub fn verify_srg(cc: &CoherentConfiguration, adj: RelId) -> Result<SrgParams> {
    if cc.fibre_sizes.len() != 1 {
        return Err(Error::UnsupportedCombination("srg check needs a single fibre".into()));
    }
    let n = cc.n;
    let words = n.div_ceil(64);
    let mut rows = vec![0u64; n * words];
    for i in 0..n {
        for j in 0..n {
            if cc.rel_at(i, j) == adj {
                if i == j {
                    return Err(Error::UnsupportedCombination("loop in adjacency relation".into()));
                }
                rows[i * words + j / 64] |= 1 << (j % 64);
            }
        }
    }
    let degree = |i: usize| -> usize {
        rows[i * words..(i + 1) * words]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    };
    let k = degree(0);
    for i in 1..n {
        let deg = degree(i);
        if deg != k {
            return Err(Error::UnsupportedCombination(format!(
                "vertex {i} has degree {deg} ≠ {k}"
            )));
        }
    }
    let mut lambda: Option<usize> = None;
    let mut mu: Option<usize> = None;
    for i in 0..n {
        for j in i + 1..n {
            let common: usize = (0..words)
                .map(|w| (rows[i * words + w] & rows[j * words + w]).count_ones() as usize)
                .sum();
            let adjacent = rows[i * words + j / 64] >> (j % 64) & 1 == 1;
            let slot = if adjacent { &mut lambda } else { &mut mu };
            match slot {
                None => *slot = Some(common),
                Some(v) if *v == common => {}
                Some(v) => {
                    return Err(Error::UnsupportedCombination(format!(
                        "common-neighbour count {common} at ({i},{j}) contradicts {v}"
                    )))
                }
            }
        }
    }
    Ok(SrgParams {
        v: n as i64,
        k: k as i64,
        lambda: lambda.unwrap_or(0) as i64,
        mu: mu.unwrap_or(0) as i64,
    })
}

/// Undirected edge list of one relation (i < j), for export.
pub fn edge_list(cc: &CoherentConfiguration, adj: RelId) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for i in 0..cc.n {
        for j in i + 1..cc.n {
            if cc.rel_at(i, j) == adj {
                edges.push((i as u32, j as u32));
            }
        }
    }
    edges
}

// ----------------------------------------------------------------------
// Elliptic fusion eigenmatrices.
// ----------------------------------------------------------------------

/// The first and second eigenmatrices of the 3-class elliptic fusion
/// scheme E(q²) on q²(q²−1)/2 points, as exact integer matrices.
pub fn elliptic_fusion_eigenmatrices(q: i64) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let p = vec![
        vec![1, (q - 2) * (q * q + 1) / 2, q * (q * q + 1) / 2, q * (q - 2) * (q * q + 1) / 2],
        vec![1, -(q - 1) * (q - 2) / 2, -q * (q - 1) / 2, q * (q - 2)],
        vec![1, -(q * q - q + 2) / 2, q * (q + 1) / 2, -q],
        vec![1, q - 1, 0, -q],
    ];
    let qm = vec![
        vec![1, q * (q * q + 1) / 2, (q - 2) * (q * q + 1) / 2, q * (q - 2) * (q * q + 1) / 2],
        vec![1, -q * (q - 1) / 2, -(q * q - q + 2) / 2, q * (q - 1)],
        vec![1, -q * (q - 1) / 2, (q - 2) * (q + 1) / 2, 0],
        vec![1, q, -1, -q],
    ];
    (p, qm)
}

/// One fused intersection number: where it sits, the brute-force count,
/// and the closed-form value.
#[derive(Clone, Debug, Serialize)]
pub struct TableEntry {
    pub table: &'static str,
    pub k: &'static str,
    pub i: &'static str,
    pub j: &'static str,
    pub eps: i64,
    pub counted: i64,
    pub formula: i64,
}

/// Brute-force every fused intersection number against the closed-form
/// tables, exhaustively over all classes and both ε. Superscript classes
/// and leg classes are listed separately because the further merge's
/// printed tables only cover hyperbolic superscripts.
pub fn fused_table_entries(five: &FusedConfiguration, further: &FurtherFusions) -> Vec<TableEntry> {
    let q = five.sub_q as i64;
    let mut entries = Vec::new();

    let mut count = |fused: &FusedConfiguration,
                     k_classes: &[FusedClass],
                     ij_classes: &[FusedClass],
                     only_eps: Option<i64>,
                     table: &dyn Fn(usize, usize, usize, i64) -> i64,
                     name: &'static str| {
        let tensor = crate::coherent::intersection_tensor(&fused.cc);
        for (krel, kinfo) in fused.cc.relations.iter().enumerate() {
            if kinfo.diag {
                continue;
            }
            let kclass = match kinfo.label {
                RelLabel::Class(c) => c,
                _ => unreachable!(),
            };
            let eps: i64 = if kinfo.src == 0 { 1 } else { -1 };
            if only_eps.is_some_and(|want| want != eps) {
                continue;
            }
            let Some(ki) = k_classes.iter().position(|&c| c == kclass) else {
                continue;
            };
            for (ii, &ci) in ij_classes.iter().enumerate() {
                for (jj, &cj) in ij_classes.iter().enumerate() {
                    let mut counted = 0u64;
                    for (irel, iinfo) in fused.cc.relations.iter().enumerate() {
                        if iinfo.diag
                            || iinfo.src != kinfo.src
                            || iinfo.label != RelLabel::Class(ci)
                        {
                            continue;
                        }
                        for (jrel, jinfo) in fused.cc.relations.iter().enumerate() {
                            if jinfo.diag
                                || jinfo.dst != kinfo.dst
                                || jinfo.src != iinfo.dst
                                || jinfo.label != RelLabel::Class(cj)
                            {
                                continue;
                            }
                            counted += u64::from(tensor.get(irel, jrel, krel));
                        }
                    }
                    entries.push(TableEntry {
                        table: name,
                        k: kclass.name(),
                        i: ci.name(),
                        j: cj.name(),
                        eps,
                        counted: counted as i64,
                        formula: table(ki, ii, jj, eps),
                    });
                }
            }
        }
    };

    let five_classes = [
        FusedClass::R1,
        FusedClass::R2,
        FusedClass::R3,
        FusedClass::R4,
        FusedClass::R5,
    ];
    count(
        five,
        &five_classes,
        &five_classes,
        None,
        &|k, i, j, eps| fused_tables(q, eps).five[k + 1][i + 1][j + 1],
        "five",
    );

    let m12_classes = [FusedClass::R12, FusedClass::R3, FusedClass::R4, FusedClass::R5];
    count(
        &further.merged12,
        &m12_classes,
        &m12_classes,
        None,
        &|k, i, j, eps| fused_tables(q, eps).merged12[k][i][j],
        "merged12",
    );

    let m124_classes = [FusedClass::R124, FusedClass::R3, FusedClass::R5];
    count(
        &further.merged124,
        &m124_classes[..2],
        &m124_classes,
        Some(1),
        &|k, i, j, _eps| fused_tables(q, 1).merged124[k][i][j],
        "merged124",
    );

    entries
}

/// Compare the closed-form tables (and valencies) against brute-force
/// counts from a built fusion. Returns mismatches, empty on success.
pub fn check_fused_tables(five: &FusedConfiguration, further: &FurtherFusions) -> Vec<String> {
    let q = five.sub_q as i64;
    let mut failures: Vec<String> = fused_table_entries(five, further)
        .into_iter()
        .filter(|e| e.counted != e.formula)
        .map(|e| {
            format!(
                "{}: p^{}_({},{})(eps={}) counted {} vs table {}",
                e.table, e.k, e.i, e.j, e.eps, e.counted, e.formula
            )
        })
        .collect();

    let five_classes = [
        FusedClass::R1,
        FusedClass::R2,
        FusedClass::R3,
        FusedClass::R4,
        FusedClass::R5,
    ];
    for (id, rel) in five.cc.relations.iter().enumerate() {
        if rel.diag {
            continue;
        }
        let class = match rel.label {
            RelLabel::Class(c) => c,
            _ => unreachable!(),
        };
        let eps: i64 = if rel.src == 0 { 1 } else { -1 };
        let i = five_classes.iter().position(|&c| c == class).unwrap() + 1;
        let expect = fused_valency(q, eps, i);
        let counted = five.cc.valency(id as RelId) as i64;
        if counted != expect {
            failures.push(format!(
                "valency v_{}(eps={eps}) counted {counted} vs {expect}",
                class.name()
            ));
        }
    }
    failures
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::{intersection_tensor, pseudocyclic_check, verify_axioms, VerifyMode};
    use crate::group_action::build_cc_formula;

    fn tower_geom(sub_deg: u32) -> Arc<PlaneGeometry> {
        let base = Gf::binary(sub_deg).unwrap();
        let tower = base.tower_extend().unwrap();
        Arc::new(PlaneGeometry::new(tower).unwrap())
    }

    fn flat_geom(q: u32) -> Arc<PlaneGeometry> {
        Arc::new(PlaneGeometry::new(Gf::binary(q.trailing_zeros()).unwrap()).unwrap())
    }

    #[test]
    fn frobenius_orbit_structure() {
        let f8 = Gf::binary(3).unwrap();
        let (orbits, _) = frobenius_orbits(&f8, 1);
        let sizes: Vec<usize> = orbits.iter().map(|o| o.len()).collect();
        assert_eq!(sizes, vec![1, 1, 3, 3]);
        let f4 = Gf::binary(2).unwrap();
        let (orbits4, _) = frobenius_orbits(&f4, 1);
        let sizes4: Vec<usize> = orbits4.iter().map(|o| o.len()).collect();
        assert_eq!(sizes4, vec![1, 1, 2]);
    }

    #[test]
    fn frobenius_fusion_q8() {
        let conf = build_cc_formula(&flat_geom(8));
        let fused = frobenius_fusion(&conf, 1).unwrap();
        // Fused configuration is again coherent.
        let report = verify_axioms(&fused.cc, VerifyMode::Full);
        assert!(report.pass, "{:?}", report.failures);
        // Elliptic restriction: the three T₀* labels fuse into one class
        // of valency 27 = 3 · 9 — all valencies equal (r = 3 is prime).
        let (ell, _) = fused.cc.restrict_fibre(1).unwrap();
        assert_eq!(ell.relations.len() - 1, 1);
        assert_eq!(ell.valency(1), 27);
        // Hyperbolic restriction: label 0 stays alone, the three T₀*
        // labels fuse; valencies 14 and 21 differ (not pseudocyclic).
        let (hyp, _) = fused.cc.restrict_fibre(0).unwrap();
        let mut vals: Vec<u64> = (1..hyp.relations.len() as RelId).map(|i| hyp.valency(i)).collect();
        vals.sort();
        assert_eq!(vals, vec![14, 21]);
    }

    #[test]
    fn frobenius_fusion_q4_keeps_two_classes() {
        let conf = build_cc_formula(&flat_geom(4));
        let fused = frobenius_fusion(&conf, 1).unwrap();
        let (hyp, _) = fused.cc.restrict_fibre(0).unwrap();
        assert_eq!(hyp.relations.len() - 1, 2);
        assert!(verify_axioms(&fused.cc, VerifyMode::Full).pass);
    }

    #[test]
    fn frobenius_gcd_precondition() {
        let conf = build_cc_formula(&flat_geom(16));
        assert!(matches!(frobenius_fusion(&conf, 2), Err(Error::Fusion(_))));
        assert!(frobenius_fusion(&conf, 3).is_ok());
    }

    #[test]
    fn frobenius_parameter_invariance() {
        // π^c_{a,b}(ε) = π^{τc}_{τa,τb}(ε), exhaustive at q ∈ {4, 8}.
        for q in [4u32, 8] {
            let conf = build_cc_formula(&flat_geom(q));
            let ctx = conf.geom.ctx.clone();
            let tensor = intersection_tensor(&conf.cc);
            for eps in [1i8, -1] {
                for a in ctx.iter() {
                    for b in ctx.iter() {
                        for c in ctx.iter() {
                            let lhs = crate::coherent::counted_pi(&conf, &tensor, a, b, c, eps);
                            let rhs = crate::coherent::counted_pi(
                                &conf,
                                &tensor,
                                ctx.frobenius(a),
                                ctx.frobenius(b),
                                ctx.frobenius(c),
                                eps,
                            );
                            assert_eq!(lhs, rhs, "q={q} a={a:?} b={b:?} c={c:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn five_class_sizes_q4() {
        let r = class_sizes(4);
        assert_eq!(&r[1..], &[1, 2, 4, 1, 8]);
        let conf = build_cc_formula(&tower_geom(2));
        let five = five_class_fusion(&conf).unwrap();
        assert_eq!(five.sub_q, 4);
        // Hyperbolic restriction: 4 classes on 136 points; elliptic: 3 on
        // 120 (R₄ is empty there).
        let (hyp, _) = five.cc.restrict_fibre(0).unwrap();
        assert_eq!((hyp.n, hyp.relations.len() - 1), (136, 4));
        let (ell, _) = five.cc.restrict_fibre(1).unwrap();
        assert_eq!((ell.n, ell.relations.len() - 1), (120, 3));
    }

    #[test]
    fn five_class_degenerate_q2() {
        // Field F₄ over F₂: R₁ is empty ((q−2)/2 = 0) but the fusion is
        // still constructible.
        let conf = build_cc_formula(&tower_geom(1));
        let five = five_class_fusion(&conf).unwrap();
        assert_eq!(five.sub_q, 2);
        assert!(five.rel_of_class(0, 0, FusedClass::R1).is_none());
        assert!(five.rel_of_class(0, 0, FusedClass::R2).is_some());
        assert!(verify_axioms(&five.cc, VerifyMode::Full).pass);
    }

    #[test]
    fn five_class_rejects_flat_fields() {
        let conf = build_cc_formula(&flat_geom(4));
        assert!(matches!(five_class_fusion(&conf), Err(Error::Fusion(_))));
    }

    #[test]
    fn table_spot_values() {
        let t1 = fused_tables(4, 1);
        assert_eq!(t1.five[4][4][4], 15); // q² − 1
        assert_eq!(t1.five[5][1][5], t1.valencies[1]);
        let tm = fused_tables(4, -1);
        assert_eq!(tm.five[1][1][1], 0);
        assert_eq!(tm.valencies[1], 17); // (q−2)(q²+1)/2
        assert_eq!(tm.valencies[4], 0);
    }

    #[test]
    fn tables_match_brute_force_at_q4() {
        // Field F₁₆ (q = 4): every entry of the five-class and merged
        // tables against counted values. The F₆₄ run is in the acceptance
        // suite.
        let conf = build_cc_formula(&tower_geom(2));
        let five = five_class_fusion(&conf).unwrap();
        let further = three_class_and_srg_fusions(&five).unwrap();
        assert!(verify_axioms(&five.cc, VerifyMode::Full).pass);
        assert!(verify_axioms(&further.merged12.cc, VerifyMode::Full).pass);
        assert!(verify_axioms(&further.merged124.cc, VerifyMode::Full).pass);
        let failures = check_fused_tables(&five, &further);
        assert!(failures.is_empty(), "{failures:#?}");
    }

    #[test]
    fn row_sums_match_valencies() {
        // Σ_j p^k_{i,j}(ε) + δ_{k,i} = v_i(ε) over the five-class tables.
        for q in [2i64, 4, 8, 16] {
            for eps in [1i64, -1] {
                let t = fused_tables(q, eps);
                for k in 1..=5usize {
                    if k == 4 && eps == -1 {
                        continue;
                    }
                    for i in 1..=5usize {
                        let sum: i64 = (1..=5).map(|j| t.five[k][i][j]).sum::<i64>()
                            + i64::from(k == i);
                        assert_eq!(sum, t.valencies[i], "q={q} eps={eps} k={k} i={i}");
                    }
                }
            }
        }
    }

    #[test]
    fn table_transpose_law() {
        // p^k_{j,i}(ε) = p^k_{i,j}(ε) for k ≤ 4 and p⁵_{j,i}(ε) = p⁵_{i,j}(−ε).
        for q in [2i64, 4, 8, 16] {
            for eps in [1i64, -1] {
                let t = fused_tables(q, eps);
                let t_flip = fused_tables(q, -eps);
                for k in 1..=4usize {
                    for i in 1..=5 {
                        for j in 1..=5 {
                            assert_eq!(t.five[k][i][j], t.five[k][j][i], "q={q} k={k}");
                        }
                    }
                }
                for i in 1..=5 {
                    for j in 1..=5 {
                        assert_eq!(t.five[5][i][j], t_flip.five[5][j][i], "q={q} eps={eps}");
                    }
                }
            }
        }
    }

    #[test]
    fn srg_parameters_q4() {
        let conf = build_cc_formula(&tower_geom(2));
        let five = five_class_fusion(&conf).unwrap();
        let further = three_class_and_srg_fusions(&five).unwrap();
        // Elliptic SRG: adjacency {12} on the 120 elliptic lines.
        let (ell, _) = further.merged12.cc.restrict_fibre(1).unwrap();
        assert_eq!(ell.relations.len(), 3);
        let p = verify_srg(&ell, 1).unwrap();
        assert_eq!(
            p,
            SrgParams { v: 120, k: 51, lambda: 18, mu: 24 }
        );
        assert_eq!(p, srg_family(4, -1));
        // Hyperbolic SRG: adjacency {124} on the 136 hyperbolic lines.
        let (hyp, _) = further.merged124.cc.restrict_fibre(0).unwrap();
        assert_eq!(hyp.relations.len(), 3);
        let p = verify_srg(&hyp, 1).unwrap();
        assert_eq!(
            p,
            SrgParams { v: 136, k: 75, lambda: 42, mu: 40 }
        );
        assert_eq!(p, srg_family(4, 1));
        // Edge count of the elliptic graph.
        assert_eq!(edge_list(&ell, 1).len(), 51 * 120 / 2);
    }

    #[test]
    fn srg_degenerate_q2() {
        // Field F₄: the elliptic merge is the complete graph K₆ with
        // degenerate parameters (6,5,4,4).
        let conf = build_cc_formula(&tower_geom(1));
        let five = five_class_fusion(&conf).unwrap();
        let further = three_class_and_srg_fusions(&five).unwrap();
        let (ell, _) = further.merged12.cc.restrict_fibre(1).unwrap();
        let p = verify_srg(&ell, 1).unwrap();
        let fam = srg_family(2, -1);
        assert_eq!((p.v, p.k, p.lambda), (fam.v, fam.k, fam.lambda));
        // K₆ has no non-adjacent pairs, so μ is vacuous (family says 4).
        assert_eq!(fam.mu, 4);
    }

    #[test]
    fn srg_feasibility_identity() {
        for q in [2i64, 4, 8, 16] {
            for eps in [1i64, -1] {
                assert!(srg_feasible(&srg_family(q, eps)), "q={q} eps={eps}");
            }
        }
    }

    #[test]
    fn eigenmatrix_identities() {
        for q in [2i64, 4, 8] {
            let (p, qm) = elliptic_fusion_eigenmatrices(q);
            let x = q * q * (q * q - 1) / 2;
            // Row 0 of P sums to |X| and lists the valencies.
            assert_eq!(p[0].iter().sum::<i64>(), x);
            for i in 1..4 {
                assert_eq!(fused_valency(q, -1, i), p[0][i]);
            }
            // P·Q = |X| I exactly.
            for i in 0..4 {
                for j in 0..4 {
                    let dot: i64 = (0..4).map(|t| p[i][t] * qm[t][j]).sum();
                    assert_eq!(dot, if i == j { x } else { 0 }, "q={q} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn elliptic_fusion_pseudocyclic_e8_after_frobenius() {
        // The Frobenius-fused elliptic scheme at q = 8 has all valencies
        // equal (r = 3 prime); report its multiplicities.
        let conf = build_cc_formula(&flat_geom(8));
        let fused = frobenius_fusion(&conf, 1).unwrap();
        let (ell, _) = fused.cc.restrict_fibre(1).unwrap();
        let tensor = intersection_tensor(&ell);
        let verdict = pseudocyclic_check(&ell, &tensor);
        // One fused class of valency 27 on 28 points: trivially the
        // complete graph, pseudocyclic with t = 27.
        assert!(verdict.pseudocyclic);
        assert_eq!(verdict.t, Some(27));
    }
}
