//! Coherent-configuration machinery: axiom verification, valencies and
//! intersection tensors, the closed-form parameter formulas for even q,
//! numeric eigen-analysis, pseudocyclicity checks, and the cyclotomic
//! reference scheme.
//!
//! A configuration is stored as a dense n×n matrix of 16-bit relation ids
//! plus a relation table. Dense lookup is what the counting loops want:
//! computing one intersection number is a single pass over the ground set
//! with two O(1) probes per step.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::gf::{Fe, Gf, TraceClasses};
use crate::{Error, Result};

pub type RelId = u16;

/// Named classes of the fused configurations.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum FusedClass {
    R1,
    R2,
    R3,
    R4,
    R5,
    R12,
    R124,
}

impl FusedClass {
    pub fn name(self) -> &'static str {
        match self {
            FusedClass::R1 => "R1",
            FusedClass::R2 => "R2",
            FusedClass::R3 => "R3",
            FusedClass::R4 => "R4",
            FusedClass::R5 => "R5",
            FusedClass::R12 => "R12",
            FusedClass::R124 => "R124",
        }
    }
}

/// What a relation is, independent of its id.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum RelLabel {
    /// A diagonal relation of one fibre.
    Diag,
    /// A modified-cross-ratio label (index of a base-field element).
    RhoHat(u16),
    /// An orbit id from the orbit-closure builder.
    Orbit(u32),
    /// A Frobenius orbit of labels, identified by its minimal element.
    LabelOrbit(u16),
    /// A class of the five-relation fusion or one of its merges.
    Class(FusedClass),
    /// A multiplicative coset (cyclotomic scheme), 0-based.
    Coset(u16),
}

impl RelLabel {
    pub fn name(&self) -> String {
        match self {
            RelLabel::Diag => "diag".into(),
            RelLabel::RhoHat(v) => format!("rho={v}"),
            RelLabel::Orbit(k) => format!("orbit={k}"),
            RelLabel::LabelOrbit(v) => format!("rho-orbit={v}"),
            RelLabel::Class(c) => c.name().into(),
            RelLabel::Coset(c) => format!("C{c}"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationInfo {
    /// Source fibre (0 = hyperbolic / single fibre, 1 = elliptic).
    pub src: u8,
    /// Destination fibre.
    pub dst: u8,
    pub diag: bool,
    pub label: RelLabel,
    pub size: u64,
}

#[derive(Clone)]
pub struct CoherentConfiguration {
    pub n: usize,
    pub fibre: Vec<u8>,
    pub fibre_sizes: Vec<usize>,
    /// Row-major n×n relation ids.
    pub rel: Vec<RelId>,
    pub relations: Vec<RelationInfo>,
}

impl std::fmt::Debug for CoherentConfiguration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "CoherentConfiguration(n={}, fibres={:?}, relations={})",
            self.n,
            self.fibre_sizes,
            self.relations.len()
        )
    }
}

impl CoherentConfiguration {
    /// Assemble from parts, recomputing relation sizes.
    pub fn assemble(fibre: Vec<u8>, rel: Vec<RelId>, mut relations: Vec<RelationInfo>) -> Self {
        let n = fibre.len();
        assert_eq!(rel.len(), n * n);
        let nf = fibre.iter().copied().max().map_or(1, |m| m as usize + 1);
        let mut fibre_sizes = vec![0usize; nf];
        for &f in &fibre {
            fibre_sizes[f as usize] += 1;
        }
        for r in relations.iter_mut() {
            r.size = 0;
        }
        for &id in &rel {
            relations[id as usize].size += 1;
        }
        CoherentConfiguration {
            n,
            fibre,
            fibre_sizes,
            rel,
            relations,
        }
    }

    #[inline]
    pub fn rel_at(&self, i: usize, j: usize) -> RelId {
        self.rel[i * self.n + j]
    }

    pub fn class_count(&self) -> usize {
        self.relations.len()
    }

    /// Non-diagonal relation count within one fibre (the "classes" of the
    /// restricted association scheme).
    pub fn classes_on_fibre(&self, f: u8) -> usize {
        self.relations
            .iter()
            .filter(|r| !r.diag && r.src == f && r.dst == f)
            .count()
    }

    /// Valency of a relation: partners per source point.
    pub fn valency(&self, id: RelId) -> u64 {
        let r = &self.relations[id as usize];
        if r.size == 0 {
            return 0;
        }
        r.size / self.fibre_sizes[r.src as usize] as u64
    }

    /// First pair (row-major) belonging to each relation.
    pub fn representatives(&self) -> Vec<Option<(u32, u32)>> {
        let mut reps = vec![None; self.relations.len()];
        let mut remaining = self.relations.len();
        'outer: for i in 0..self.n {
            for j in 0..self.n {
                let id = self.rel_at(i, j) as usize;
                if reps[id].is_none() {
                    reps[id] = Some((i as u32, j as u32));
                    remaining -= 1;
                    if remaining == 0 {
                        break 'outer;
                    }
                }
            }
        }
        reps
    }

    /// Transpose partner of each relation, when the transpose axiom holds.
    pub fn transpose_map(&self) -> Option<Vec<RelId>> {
        let mut t = vec![RelId::MAX; self.relations.len()];
        for i in 0..self.n {
            for j in 0..self.n {
                let a = self.rel_at(i, j) as usize;
                let b = self.rel_at(j, i);
                if t[a] == RelId::MAX {
                    t[a] = b;
                } else if t[a] != b {
                    return None;
                }
            }
        }
        Some(t)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.rel_at(i, j) == self.rel_at(j, i)))
    }

    /// Restriction to one fibre, with the diagonal relabelled to id 0.
    /// Fails when the restriction is not symmetric.
    pub fn restrict_fibre(&self, f: u8) -> Result<(CoherentConfiguration, Vec<u32>)> {
        let elems: Vec<u32> = (0..self.n as u32)
            .filter(|&i| self.fibre[i as usize] == f)
            .collect();
        let m = elems.len();
        let mut old_to_new = vec![RelId::MAX; self.relations.len()];
        let mut relations = Vec::new();
        // Diagonal first.
        for (id, r) in self.relations.iter().enumerate() {
            if r.diag && r.src == f {
                old_to_new[id] = 0;
                relations.push(RelationInfo {
                    src: 0,
                    dst: 0,
                    diag: true,
                    label: RelLabel::Diag,
                    size: 0,
                });
            }
        }
        for (id, r) in self.relations.iter().enumerate() {
            if !r.diag && r.src == f && r.dst == f {
                old_to_new[id] = relations.len() as RelId;
                relations.push(RelationInfo {
                    src: 0,
                    dst: 0,
                    diag: false,
                    label: r.label,
                    size: 0,
                });
            }
        }
        let mut rel = vec![0 as RelId; m * m];
        for (a, &i) in elems.iter().enumerate() {
            for (b, &j) in elems.iter().enumerate() {
                let old = self.rel_at(i as usize, j as usize) as usize;
                let new = old_to_new[old];
                if new == RelId::MAX {
                    return Err(Error::UnsupportedCombination(
                        "fibre restriction hit a cross-fibre relation".into(),
                    ));
                }
                rel[a * m + b] = new;
            }
        }
        let cc = CoherentConfiguration::assemble(vec![0; m], rel, relations);
        if !cc.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        Ok((cc, elems))
    }
}

/// Mode for the axiom-4 constancy check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerifyMode {
    Full,
    /// At least this many random pairs per relation (seeded).
    Sampled { pairs: usize, seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomReport {
    pub pass: bool,
    pub failures: Vec<String>,
    pub checked_pairs: usize,
}

/// Check the four defining properties: partition, diagonal sub-partition,
/// transpose closure, and constancy of the intersection numbers. Failures
/// are reported (first counterexample per axiom), not raised.
pub fn verify_axioms(cc: &CoherentConfiguration, mode: VerifyMode) -> AxiomReport {
    let mut failures = Vec::new();
    let n = cc.n;

    // Axiom 1: total labelling with nonempty relations.
    if let Some(r) = cc.relations.iter().position(|r| r.size == 0) {
        failures.push(format!("axiom 1: relation {r} is empty"));
    }

    // Axiom 2 plus the fibre-product remark: diagonal cells carry the diag
    // relation of their fibre, off-diagonal cells a relation matching both
    // fibres.
    'a2: for i in 0..n {
        for j in 0..n {
            let r = &cc.relations[cc.rel_at(i, j) as usize];
            let ok = if i == j {
                r.diag && r.src == cc.fibre[i] && r.dst == cc.fibre[i]
            } else {
                !r.diag && r.src == cc.fibre[i] && r.dst == cc.fibre[j]
            };
            if !ok {
                failures.push(format!("axiom 2: cell ({i},{j}) carries {:?}", r.label));
                break 'a2;
            }
        }
    }

    // Axiom 3: transpose closure.
    if cc.transpose_map().is_none() {
        failures.push("axiom 3: transpose of a relation is not a relation".into());
    }

    // Axiom 4: intersection numbers constant over each relation. A pair's
    // signature is the sorted multiset of (rel(x,z), rel(z,y)) codes.
    let m = cc.relations.len();
    let signature = |x: usize, y: usize| -> Vec<u32> {
        let mut sig: Vec<u32> = (0..n)
            .map(|z| cc.rel_at(x, z) as u32 * m as u32 + cc.rel_at(z, y) as u32)
            .collect();
        sig.sort_unstable();
        sig
    };
    let reps = cc.representatives();
    let refs: Vec<Option<Vec<u32>>> = reps
        .iter()
        .map(|r| r.map(|(x, y)| signature(x as usize, y as usize)))
        .collect();
    let mut checked = 0usize;
    match mode {
        VerifyMode::Full => {
            'a4: for x in 0..n {
                for y in 0..n {
                    let k = cc.rel_at(x, y) as usize;
                    if let Some(reference) = &refs[k] {
                        checked += 1;
                        if signature(x, y) != *reference {
                            failures.push(format!(
                                "axiom 4: pairs {:?} and ({x},{y}) in relation {k} disagree",
                                reps[k].unwrap()
                            ));
                            break 'a4;
                        }
                    }
                }
            }
        }
        VerifyMode::Sampled { pairs, seed } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // Bucket the pairs of each relation lazily: draw random cells
            // and keep the first `pairs` hits per relation.
            let mut need: Vec<usize> = cc.relations.iter().map(|r| (r.size as usize).min(pairs)).collect();
            let mut outstanding: usize = need.iter().sum();
            let mut guard = 0usize;
            while outstanding > 0 && guard < 200 * n * n {
                guard += 1;
                let x = rng.gen_range(0..n);
                let y = rng.gen_range(0..n);
                let k = cc.rel_at(x, y) as usize;
                if need[k] == 0 {
                    continue;
                }
                need[k] -= 1;
                outstanding -= 1;
                checked += 1;
                if let Some(reference) = &refs[k] {
                    if signature(x, y) != *reference {
                        failures.push(format!(
                            "axiom 4: pairs {:?} and ({x},{y}) in relation {k} disagree",
                            reps[k].unwrap()
                        ));
                        break;
                    }
                }
            }
        }
    }

    AxiomReport {
        pass: failures.is_empty(),
        failures,
        checked_pairs: checked,
    }
}

/// The full tensor of intersection numbers p_{i,j}^k, computed from one
/// representative pair per relation (legitimate once axiom 4 has been
/// certified), plus the valency vector.
#[derive(Clone, Debug)]
pub struct ParamTensor {
    pub m: usize,
    /// p[(k·m + i)·m + j] = p_{i,j}^k.
    pub p: Vec<u32>,
    pub valencies: Vec<u64>,
}

impl ParamTensor {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> u32 {
        self.p[(k * self.m + i) * self.m + j]
    }

    /// Nonzero entries as (i, j, k, p) tuples in deterministic order.
    pub fn nonzero(&self) -> Vec<(u16, u16, u16, u32)> {
        let mut out = Vec::new();
        for k in 0..self.m {
            for i in 0..self.m {
                for j in 0..self.m {
                    let v = self.get(i, j, k);
                    if v != 0 {
                        out.push((i as u16, j as u16, k as u16, v));
                    }
                }
            }
        }
        out
    }
}

pub fn intersection_tensor(cc: &CoherentConfiguration) -> ParamTensor {
    let m = cc.relations.len();
    let mut p = vec![0u32; m * m * m];
    for (k, rep) in cc.representatives().iter().enumerate() {
        let (x, y) = rep.expect("every relation is nonempty");
        let (x, y) = (x as usize, y as usize);
        for z in 0..cc.n {
            let i = cc.rel_at(x, z) as usize;
            let j = cc.rel_at(z, y) as usize;
            p[(k * m + i) * m + j] += 1;
        }
    }
    let valencies = (0..m as u16).map(|id| cc.valency(id)).collect();
    ParamTensor { m, p, valencies }
}

/// Closed-form valency of the relation with label a on fibre ε: 2(q−1) for
/// the meets-on-conic label (ε = +1 only), (q−ε)/2 for the self-paired
/// cross-ratio class of odd q, q−ε otherwise.
pub fn closed_form_valency(ctx: &Gf, a: Fe, eps: i8) -> u64 {
    let q = ctx.order() as i64;
    let e = i64::from(eps);
    if ctx.characteristic() == 2 {
        if a == Fe::ZERO {
            if eps == 1 {
                (2 * (q - 1)) as u64
            } else {
                0
            }
        } else {
            (q - e) as u64
        }
    } else {
        let four = ctx.add(ctx.add(Fe::ONE, Fe::ONE), ctx.add(Fe::ONE, Fe::ONE));
        let quarter = ctx.inv(four);
        if a == quarter {
            if eps == 1 {
                (2 * (q - 1)) as u64
            } else {
                0
            }
        } else if a == Fe::ZERO {
            ((q - e) / 2) as u64
        } else {
            (q - e) as u64
        }
    }
}

/// Closed form for π^c_{a,b}(ε), even q: the count of lines n with
/// ρ̂(ℓ,n) = a and ρ̂(n,m) = b over a pair (ℓ,m) with ρ̂(ℓ,m) = c. Zero
/// whenever a+b+c has trace 1, or c = 0 on the elliptic side.
pub fn closed_form_pi(ctx: &Gf, cls: &TraceClasses, a: Fe, b: Fe, c: Fe, eps: i8) -> Result<u64> {
    if ctx.characteristic() != 2 {
        return Err(Error::UnsupportedField(
            "closed-form intersection numbers require even q".into(),
        ));
    }
    let q = ctx.order() as u64;
    let s = ctx.add(ctx.add(a, b), c);
    if !cls.in_t(0, s) {
        return Ok(0);
    }
    let e: u8 = if eps == 1 { 0 } else { 1 };
    if c == Fe::ZERO {
        if eps != 1 {
            return Ok(0);
        }
        // Tr(a) = Tr(b) is implied by Tr(a+b) = Tr(s) = 0 here.
        return Ok(if a == b {
            if a == Fe::ZERO {
                q + 1
            } else {
                1
            }
        } else {
            2
        });
    }
    let ac = ctx.mul(a, c);
    if s == Fe::ZERO {
        // τ ∈ {0, 1}: the τ = 0 branch contributes the single solution ∞.
        return Ok(1 + 2 * u64::from(ctx.abs_trace(ac) == e));
    }
    // Two nonzero τ with τ² + τ = a+b+c.
    let taus = ctx.solve_quadratic(Fe::ONE, Fe::ONE, s)?;
    debug_assert_eq!(taus.len(), 2);
    let mut total = 0u64;
    for tau in taus {
        let w = ctx.div(ac, ctx.sq(tau));
        total += 2 * u64::from(ctx.abs_trace(w) == e);
    }
    Ok(total)
}

/// p^c_{a,b}(ε) from the π value by removing the n = ℓ and n = m terms.
/// Zero when no pair carries label c on fibre ε (c = 0 is hyperbolic-only).
pub fn closed_form_p(ctx: &Gf, cls: &TraceClasses, a: Fe, b: Fe, c: Fe, eps: i8) -> Result<u64> {
    if c == Fe::ZERO && eps != 1 {
        return Ok(0);
    }
    let pi = closed_form_pi(ctx, cls, a, b, c, eps)?;
    let d1 = u64::from(a == Fe::ZERO && b == c);
    let d2 = u64::from(b == Fe::ZERO && a == c);
    Ok(pi - d1 - d2)
}

/// Counted π^c_{a,b}(ε) of a formula-built line configuration: the tensor
/// entry plus the n ∈ {ℓ, m} contributions. `None` when no pair carries
/// label c on fibre ε (the count is vacuous there). Even q only.
pub fn counted_pi(
    conf: &crate::group_action::LineConfiguration,
    tensor: &ParamTensor,
    a: Fe,
    b: Fe,
    c: Fe,
    eps: i8,
) -> Option<u64> {
    let ctx = &conf.geom.ctx;
    debug_assert_eq!(ctx.characteristic(), 2);
    let src: u8 = if eps == 1 { 0 } else { 1 };
    let dst = src ^ ctx.abs_trace(c);
    let k = conf.rel_of_label(src, dst, c)?;
    let theta = src ^ ctx.abs_trace(a);
    let p = match (
        conf.rel_of_label(src, theta, a),
        conf.rel_of_label(theta, dst, b),
    ) {
        (Some(i), Some(j)) => tensor.get(i as usize, j as usize, k as usize) as u64,
        _ => 0,
    };
    let d1 = u64::from(a == Fe::ZERO && b == c);
    let d2 = u64::from(b == Fe::ZERO && a == c);
    Some(p + d1 + d2)
}

/// Compare every counted π^c_{a,b}(ε) (and the valencies) against the
/// closed forms, exhaustively over all label triples. Returns the list of
/// mismatches, empty on success.
pub fn check_closed_forms(conf: &crate::group_action::LineConfiguration) -> Vec<String> {
    let ctx = &conf.geom.ctx;
    let mut failures = Vec::new();
    // Valencies hold for both parities.
    for (id, r) in conf.cc.relations.iter().enumerate() {
        if r.diag {
            continue;
        }
        let label = match r.label {
            RelLabel::RhoHat(v) => Fe(v),
            _ => return vec!["closed forms apply to formula-built configurations".into()],
        };
        let eps = if r.src == 0 { 1 } else { -1 };
        let counted = conf.cc.valency(id as RelId);
        let formula = closed_form_valency(ctx, label, eps);
        if counted != formula {
            failures.push(format!(
                "valency: relation {id} label {label:?} eps {eps}: counted {counted} vs formula {formula}"
            ));
        }
    }
    if ctx.characteristic() != 2 {
        return failures;
    }
    let cls = crate::gf::classes(ctx);
    let tensor = intersection_tensor(&conf.cc);
    for eps in [1i8, -1] {
        for c in ctx.iter() {
            for a in ctx.iter() {
                for b in ctx.iter() {
                    let formula = match closed_form_pi(ctx, &cls, a, b, c, eps) {
                        Ok(v) => v,
                        Err(e) => {
                            failures.push(format!("closed_form_pi failed: {e}"));
                            return failures;
                        }
                    };
                    let counted = counted_pi(conf, &tensor, a, b, c, eps).unwrap_or(0);
                    if counted != formula {
                        failures.push(format!(
                            "pi: a={a:?} b={b:?} c={c:?} eps={eps}: counted {counted} vs formula {formula}"
                        ));
                        if failures.len() > 8 {
                            return failures;
                        }
                    }
                }
            }
        }
    }
    failures
}

/// Numeric spectral data of a symmetric association scheme: first and
/// second eigenmatrices, multiplicities, and the worst residual of the
/// eigen-equations.
#[derive(Clone, Debug)]
pub struct SpectralData {
    /// Rows = eigenspaces (E₀ first), columns = relations (diagonal first).
    pub p: Vec<Vec<f64>>,
    /// Q = |X| · P⁻¹.
    pub q: Vec<Vec<f64>>,
    pub multiplicities: Vec<usize>,
    /// max over (i,j) of ‖A_j b − P_j(i) b‖ over unit basis vectors b of E_i.
    pub max_residual: f64,
    /// max deviation of P·Q from |X|·I.
    pub inverse_residual: f64,
}

/// Simultaneous eigenspace decomposition of the adjacency matrices of a
/// symmetric scheme, by successive subspace refinement. The clustering
/// tolerance separates eigenvalues within one refinement step.
pub fn spectral(cc: &CoherentConfiguration, tol: f64) -> Result<SpectralData> {
    if cc.fibre_sizes.len() != 1 {
        return Err(Error::UnsupportedCombination(
            "spectral analysis applies to single-fibre schemes".into(),
        ));
    }
    if !cc.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let n = cc.n;
    let m = cc.relations.len();
    let adj: Vec<DMatrix<f64>> = (0..m)
        .map(|k| {
            DMatrix::from_fn(n, n, |i, j| if cc.rel_at(i, j) as usize == k { 1.0 } else { 0.0 })
        })
        .collect();

    let mut spaces: Vec<DMatrix<f64>> = vec![DMatrix::identity(n, n)];
    for a in adj.iter().skip(1) {
        let mut next = Vec::new();
        for basis in &spaces {
            let small = basis.transpose() * a * basis;
            let d = small.nrows();
            let eig = nalgebra::linalg::SymmetricEigen::new(small);
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
            let ctol = tol * (1.0 + eig.eigenvalues.amax());
            let mut start = 0;
            while start < d {
                let mut end = start + 1;
                while end < d
                    && (eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]]).abs() <= ctol
                {
                    end += 1;
                }
                let mut cluster = DMatrix::zeros(n, end - start);
                for (c, &oi) in order[start..end].iter().enumerate() {
                    cluster.set_column(c, &(basis * eig.eigenvectors.column(oi)));
                }
                next.push(cluster);
                start = end;
            }
        }
        spaces = next;
    }

    // Eigenvalue tuple and residual per space.
    let mut rows: Vec<(Vec<f64>, usize, f64)> = Vec::new();
    for basis in &spaces {
        let d = basis.ncols();
        let mut tuple = Vec::with_capacity(m);
        let mut residual = 0.0f64;
        for a in &adj {
            let image = a * basis;
            let b0 = basis.column(0);
            let lambda = image.column(0).dot(&b0);
            for c in 0..d {
                let r = (image.column(c) - basis.column(c) * lambda).norm();
                residual = residual.max(r);
            }
            tuple.push(lambda);
        }
        rows.push((tuple, d, residual));
    }
    // Merge spaces whose eigenvalue tuples coincide (they are one common
    // eigenspace that no refinement step happened to split apart).
    rows.sort_by(|a, b| {
        for (x, y) in a.0.iter().zip(&b.0) {
            match y.total_cmp(x) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        std::cmp::Ordering::Equal
    });
    let merge_tol = 1e-6;
    let mut merged: Vec<(Vec<f64>, usize, f64)> = Vec::new();
    for row in rows {
        if let Some(last) = merged.last_mut() {
            if last
                .0
                .iter()
                .zip(&row.0)
                .all(|(x, y)| (x - y).abs() <= merge_tol * (1.0 + x.abs()))
            {
                last.1 += row.1;
                last.2 = last.2.max(row.2);
                continue;
            }
        }
        merged.push(row);
    }
    // E₀ (the all-ones eigenspace, eigenvalues = valencies) first.
    let vals: Vec<f64> = (0..m as u16).map(|id| cc.valency(id) as f64).collect();
    let e0 = merged
        .iter()
        .position(|(t, _, _)| t.iter().zip(&vals).all(|(x, y)| (x - y).abs() <= 1e-6 * (1.0 + y)))
        .ok_or_else(|| Error::UnsupportedCombination("no valency eigenspace found".into()))?;
    merged.swap(0, e0);

    let mp = merged.len();
    let p_mat = DMatrix::from_fn(mp, m.max(1), |i, j| merged[i].0[j]);
    if mp != m {
        return Err(Error::UnsupportedCombination(format!(
            "eigenspace clustering ambiguous: {mp} common eigenspaces for {m} relations"
        )));
    }
    let inv = p_mat
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::UnsupportedCombination("singular eigenmatrix".into()))?;
    let q_mat = inv * (n as f64);
    let prod = &p_mat * &q_mat;
    let mut inverse_residual = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let want = if i == j { n as f64 } else { 0.0 };
            inverse_residual = inverse_residual.max((prod[(i, j)] - want).abs());
        }
    }
    Ok(SpectralData {
        p: (0..m).map(|i| (0..m).map(|j| p_mat[(i, j)]).collect()).collect(),
        q: (0..m).map(|i| (0..m).map(|j| q_mat[(i, j)]).collect()).collect(),
        multiplicities: merged.iter().map(|r| r.1).collect(),
        max_residual: merged.iter().map(|r| r.2).fold(0.0, f64::max),
        inverse_residual,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudocyclicReport {
    pub pseudocyclic: bool,
    pub t: Option<u64>,
    pub detail: String,
}

/// Combinatorial pseudocyclicity test: all non-diagonal valencies equal
/// some t, and Σ_k p^k_{k,j} = t−1 for every non-diagonal j.
pub fn pseudocyclic_check(cc: &CoherentConfiguration, tensor: &ParamTensor) -> PseudocyclicReport {
    let m = cc.relations.len();
    let nondiag: Vec<usize> = (1..m).collect();
    if cc.fibre_sizes.len() != 1 || cc.relations.is_empty() || !cc.relations[0].diag {
        return PseudocyclicReport {
            pseudocyclic: false,
            t: None,
            detail: "not a single-fibre scheme with leading diagonal".into(),
        };
    }
    if nondiag.is_empty() {
        return PseudocyclicReport {
            pseudocyclic: true,
            t: None,
            detail: "zero classes (trivial scheme)".into(),
        };
    }
    let t = tensor.valencies[nondiag[0]];
    for &j in &nondiag {
        if tensor.valencies[j] != t {
            return PseudocyclicReport {
                pseudocyclic: false,
                t: None,
                detail: format!(
                    "valencies differ: v_{} = {} vs v_{} = {}",
                    nondiag[0], t, j, tensor.valencies[j]
                ),
            };
        }
    }
    for &j in &nondiag {
        let sum: u64 = nondiag.iter().map(|&k| u64::from(tensor.get(k, j, k))).sum();
        if sum != t - 1 {
            return PseudocyclicReport {
                pseudocyclic: false,
                t: Some(t),
                detail: format!("sum_k p^k_(k,{j}) = {sum}, expected t-1 = {}", t - 1),
            };
        }
    }
    PseudocyclicReport {
        pseudocyclic: true,
        t: Some(t),
        detail: format!("t = {t}"),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignCheck {
    pub v: usize,
    pub t: u64,
    pub lambda: u64,
}

/// Exhaustive 2-design test on the blocks R_i(x): every block has size t
/// and every unordered pair of distinct points lies in exactly t−1 blocks.
pub fn two_design_check(cc: &CoherentConfiguration) -> Result<DesignCheck> {
    let m = cc.relations.len();
    if cc.fibre_sizes.len() != 1 || m < 2 {
        return Err(Error::UnsupportedCombination("need a nontrivial scheme".into()));
    }
    let t = cc.valency(1);
    let n = cc.n;
    let mut pair_count = vec![0u64; n * n];
    for x in 0..n {
        for k in 1..m as RelId {
            let block: Vec<usize> = (0..n).filter(|&y| cc.rel_at(x, y) == k).collect();
            if block.len() as u64 != t {
                return Err(Error::UnsupportedCombination(format!(
                    "block R_{k}({x}) has size {} ≠ t = {t}",
                    block.len()
                )));
            }
            for (ai, &u) in block.iter().enumerate() {
                for &w in &block[ai + 1..] {
                    pair_count[u * n + w] += 1;
                }
            }
        }
    }
    let lambda = t - 1;
    for u in 0..n {
        for w in u + 1..n {
            if pair_count[u * n + w] != lambda {
                return Err(Error::UnsupportedCombination(format!(
                    "pair ({u},{w}) covered {} times, expected {lambda}",
                    pair_count[u * n + w]
                )));
            }
        }
    }
    Ok(DesignCheck {
        v: n,
        t,
        lambda,
    })
}

/// The cyclotomic scheme on F_q with e classes: C₀ the index-e subgroup of
/// the multiplicative group, relations by the coset of x − y. Requires
/// −1 ∈ C₀ (else the relations are not symmetric).
pub fn build_cyclotomic(ctx: &Gf, e: usize) -> Result<CoherentConfiguration> {
    let q = ctx.order();
    if e <= 1 || (q - 1) % e != 0 {
        return Err(Error::Cyclotomy(format!("e = {e} must divide q−1 = {} and exceed 1", q - 1)));
    }
    // Coset index of x: its discrete log modulo e.
    let minus_one = ctx.neg(Fe::ONE);
    let coset = |x: Fe| -> usize { ctx.log_of(x).expect("nonzero") as usize % e };
    if coset(minus_one) != 0 {
        return Err(Error::Cyclotomy("−1 is not in the index-e subgroup C₀".into()));
    }
    let n = q;
    let mut rel = vec![0 as RelId; n * n];
    for x in 0..n {
        for y in 0..n {
            if x == y {
                rel[x * n + y] = 0;
            } else {
                let d = ctx.sub(ctx.el(x), ctx.el(y));
                rel[x * n + y] = (1 + coset(d)) as RelId;
            }
        }
    }
    let mut relations = vec![RelationInfo {
        src: 0,
        dst: 0,
        diag: true,
        label: RelLabel::Diag,
        size: 0,
    }];
    for c in 0..e {
        relations.push(RelationInfo {
            src: 0,
            dst: 0,
            diag: false,
            label: RelLabel::Coset(c as u16),
            size: 0,
        });
    }
    Ok(CoherentConfiguration::assemble(vec![0; n], rel, relations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::classes;
    use crate::group_action::build_cc_formula;
    use crate::projconic::PlaneGeometry;
    use std::sync::Arc;

    fn geom(q: u32) -> Arc<PlaneGeometry> {
        let ctx = if q.is_power_of_two() {
            Gf::binary(q.trailing_zeros()).unwrap()
        } else {
            Gf::prime(q).unwrap()
        };
        Arc::new(PlaneGeometry::new(ctx).unwrap())
    }

    #[test]
    fn axioms_pass_for_line_configurations() {
        for q in [4u32, 8, 5] {
            let conf = build_cc_formula(&geom(q));
            let report = verify_axioms(&conf.cc, VerifyMode::Full);
            assert!(report.pass, "q={q}: {:?}", report.failures);
        }
    }

    #[test]
    fn corrupted_matrix_reports_axiom4_counterexample() {
        let conf = build_cc_formula(&geom(4));
        let mut cc = conf.cc.clone();
        // Relabel one off-diagonal cell (and its transpose, to keep axioms
        // 2 and 3 intact) to another relation on the same fibre pair.
        let n = cc.n;
        let (i, j) = (0usize, 1usize);
        let old = cc.rel_at(i, j);
        let r = cc.relations[old as usize].clone();
        let other = cc
            .relations
            .iter()
            .position(|s| !s.diag && s.src == r.src && s.dst == r.dst && s.label != r.label)
            .unwrap() as RelId;
        cc.rel[i * n + j] = other;
        cc.rel[j * n + i] = other;
        let cc = CoherentConfiguration::assemble(cc.fibre, cc.rel, cc.relations);
        let report = verify_axioms(&cc, VerifyMode::Full);
        assert!(!report.pass);
        assert!(report.failures.iter().any(|f| f.contains("axiom 4")), "{:?}", report.failures);
    }

    #[test]
    fn sampled_mode_checks_pairs() {
        let conf = build_cc_formula(&geom(8));
        let report = verify_axioms(
            &conf.cc,
            VerifyMode::Sampled { pairs: 100, seed: 0 },
        );
        assert!(report.pass);
        assert!(report.checked_pairs >= 100);
    }

    #[test]
    fn restriction_class_counts() {
        // q=8: elliptic 3 classes on 28 points, hyperbolic 4 on 36;
        // q=5: hyperbolic 3 classes on 15 points.
        let conf = build_cc_formula(&geom(8));
        let (ell, _) = conf.cc.restrict_fibre(1).unwrap();
        assert_eq!(ell.n, 28);
        assert_eq!(ell.relations.len() - 1, 3);
        let (hyp, _) = conf.cc.restrict_fibre(0).unwrap();
        assert_eq!(hyp.n, 36);
        assert_eq!(hyp.relations.len() - 1, 4);

        let conf5 = build_cc_formula(&geom(5));
        let (hyp5, _) = conf5.cc.restrict_fibre(0).unwrap();
        assert_eq!(hyp5.n, 15);
        assert_eq!(hyp5.relations.len() - 1, 3);
        let (ell5, _) = conf5.cc.restrict_fibre(1).unwrap();
        assert_eq!(ell5.n, 10);
        assert_eq!(ell5.relations.len() - 1, 2);
    }

    #[test]
    fn elliptic_q4_tensor_value() {
        // E(4) is the complete graph K₆; its single class has p¹₁₁ = 4,
        // matching the brute-force count over all elliptic line pairs.
        let conf = build_cc_formula(&geom(4));
        let (ell, ids) = conf.cc.restrict_fibre(1).unwrap();
        assert_eq!(ell.n, 6);
        let tensor = intersection_tensor(&ell);
        assert_eq!(tensor.get(1, 1, 1), 4);
        // Brute force directly on the geometry.
        let g = conf.geom.clone();
        let (x, y) = (ids[0] as usize, ids[1] as usize);
        let count = (0..g.lines.len())
            .filter(|&z| {
                z != x
                    && z != y
                    && g.lines[z].ty == crate::projconic::LineType::Elliptic
                    && conf.cc.rel_at(x, z) == conf.cc.rel_at(x, y)
                    && conf.cc.rel_at(z, y) == conf.cc.rel_at(x, y)
            })
            .count();
        assert_eq!(count, 4);
    }

    #[test]
    fn diagonal_parameter_pattern() {
        // p^c_{diag,b} = δ_{b,c}, p^c_{a,diag} = δ_{a,c}, and
        // p^diag_{a,b} = v_a when b is the transpose of a, else 0.
        let conf = build_cc_formula(&geom(4));
        let cc = &conf.cc;
        let tensor = intersection_tensor(cc);
        let t = cc.transpose_map().unwrap();
        let m = cc.relations.len();
        for k in 0..m {
            let rk = &cc.relations[k];
            for i in 0..m {
                for j in 0..m {
                    let (ri, rj) = (&cc.relations[i], &cc.relations[j]);
                    let expect: u32 = if rk.diag {
                        if ri.src == rk.src && j == t[i] as usize {
                            cc.valency(i as RelId) as u32
                        } else {
                            0
                        }
                    } else if ri.diag {
                        u32::from(ri.src == rk.src && j == k)
                    } else if rj.diag {
                        u32::from(rj.src == rk.dst && i == k)
                    } else {
                        continue;
                    };
                    assert_eq!(tensor.get(i, j, k), expect, "i={i} j={j} k={k}");
                }
            }
        }
    }

    #[test]
    fn closed_form_valency_examples() {
        let f8 = Gf::binary(3).unwrap();
        assert_eq!(closed_form_valency(&f8, Fe::ZERO, 1), 14);
        assert_eq!(closed_form_valency(&f8, Fe::ONE, -1), 9);
        let f7 = Gf::prime(7).unwrap();
        assert_eq!(closed_form_valency(&f7, Fe::ZERO, 1), 3);
        // 1/4 = 2 in GF(7): the meets-on-conic label.
        assert_eq!(closed_form_valency(&f7, f7.el(2), 1), 12);
        assert_eq!(closed_form_valency(&f7, f7.el(2), -1), 0);
    }

    #[test]
    fn counted_valencies_match_closed_forms() {
        for q in [4u32, 8, 16, 5, 7] {
            let conf = build_cc_formula(&geom(q));
            for (id, r) in conf.cc.relations.iter().enumerate() {
                if r.diag {
                    continue;
                }
                let label = match r.label {
                    RelLabel::RhoHat(v) => Fe(v),
                    _ => unreachable!(),
                };
                let eps = if r.src == 0 { 1 } else { -1 };
                assert_eq!(
                    conf.cc.valency(id as RelId),
                    closed_form_valency(&conf.geom.ctx, label, eps),
                    "q={q} label={label:?} eps={eps}"
                );
            }
        }
    }

    #[test]
    fn closed_form_pi_examples() {
        let f8 = Gf::binary(3).unwrap();
        let cls8 = classes(&f8);
        assert_eq!(
            closed_form_pi(&f8, &cls8, Fe::ZERO, Fe::ZERO, Fe::ZERO, 1).unwrap(),
            9
        );
        let f4 = Gf::binary(2).unwrap();
        let cls4 = classes(&f4);
        assert_eq!(
            closed_form_pi(&f4, &cls4, Fe::ONE, Fe::ONE, Fe::ONE, -1).unwrap(),
            4
        );
        // Any triple with Tr(a+b+c) = 1 vanishes.
        let w = f4.el(2);
        assert_eq!(closed_form_pi(&f4, &cls4, w, Fe::ZERO, Fe::ZERO, 1).unwrap(), 0);
    }

    #[test]
    fn counted_intersections_match_closed_forms_q4_q8() {
        // The q=16 case runs in the acceptance suite; q ∈ {4,8} here.
        for q in [4u32, 8] {
            let conf = build_cc_formula(&geom(q));
            let failures = check_closed_forms(&conf);
            assert!(failures.is_empty(), "q={q}: {failures:?}");
        }
    }

    #[test]
    fn pi_symmetry_law() {
        // p^c_{a,b}(ε) = p^c_{b,a}((−1)^{Tr(c)} ε), exhaustive for q ∈ {4,8}.
        for q in [4u32, 8] {
            let ctx = Gf::binary(q.trailing_zeros()).unwrap();
            let cls = classes(&ctx);
            for eps in [1i8, -1] {
                for a in ctx.iter() {
                    for b in ctx.iter() {
                        for c in ctx.iter() {
                            let lhs = closed_form_p(&ctx, &cls, a, b, c, eps).unwrap();
                            let flip = if ctx.abs_trace(c) == 0 { eps } else { -eps };
                            let rhs = closed_form_p(&ctx, &cls, b, a, c, flip).unwrap();
                            assert_eq!(lhs, rhs, "q={q} a={a:?} b={b:?} c={c:?} eps={eps}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_row_sums_give_valencies() {
        for q in [4u32, 8, 5] {
            let conf = build_cc_formula(&geom(q));
            let cc = &conf.cc;
            let tensor = intersection_tensor(cc);
            let m = cc.relations.len();
            for k in 0..m {
                for i in 0..m {
                    let total: u64 = (0..m).map(|j| u64::from(tensor.get(i, j, k))).sum();
                    let expect = if cc.relations[i].src == cc.relations[k].src {
                        cc.valency(i as RelId)
                    } else {
                        0
                    };
                    assert_eq!(total, expect, "q={q} i={i} k={k}");
                }
            }
        }
    }

    #[test]
    fn elliptic_pseudocyclic_sum_identity() {
        // Σ_{a ∈ T₀*} p^a_{a,b}(ε) = q − 4δ_{ε,1} for b ∈ T₀*.
        for q in [4u32, 8, 16] {
            let ctx = Gf::binary(q.trailing_zeros()).unwrap();
            let cls = classes(&ctx);
            for eps in [1i8, -1] {
                for &b in &cls.t0_star {
                    let total: u64 = cls
                        .t0_star
                        .iter()
                        .map(|&a| closed_form_p(&ctx, &cls, a, b, a, eps).unwrap())
                        .sum();
                    let expect = q as u64 - if eps == 1 { 4 } else { 0 };
                    assert_eq!(total, expect, "q={q} eps={eps} b={b:?}");
                }
            }
        }
    }

    #[test]
    fn spectral_complete_graph() {
        // E(4) restricted is K₆: P = [[1,5],[1,−1]], μ = (1,5).
        let conf = build_cc_formula(&geom(4));
        let (ell, _) = conf.cc.restrict_fibre(1).unwrap();
        let s = spectral(&ell, 1e-8).unwrap();
        assert_eq!(s.multiplicities, vec![1, 5]);
        let rounded: Vec<Vec<i64>> = s
            .p
            .iter()
            .map(|row| row.iter().map(|x| x.round() as i64).collect())
            .collect();
        assert_eq!(rounded, vec![vec![1, 5], vec![1, -1]]);
        assert!(s.max_residual < 1e-9);
        assert!(s.inverse_residual < 1e-9);
    }

    #[test]
    fn spectral_e8_multiplicities() {
        let conf = build_cc_formula(&geom(8));
        let (ell, _) = conf.cc.restrict_fibre(1).unwrap();
        let s = spectral(&ell, 1e-8).unwrap();
        let mut mults = s.multiplicities.clone();
        mults.sort();
        assert_eq!(mults, vec![1, 9, 9, 9]);
        assert!(s.max_residual < 1e-6);
    }

    #[test]
    fn pseudocyclic_verdicts() {
        // E(8): yes with t = 9. H(8): no (valencies 14 vs 7).
        let conf = build_cc_formula(&geom(8));
        let (ell, _) = conf.cc.restrict_fibre(1).unwrap();
        let te = intersection_tensor(&ell);
        let verdict = pseudocyclic_check(&ell, &te);
        assert!(verdict.pseudocyclic);
        assert_eq!(verdict.t, Some(9));

        let (hyp, _) = conf.cc.restrict_fibre(0).unwrap();
        let th = intersection_tensor(&hyp);
        let verdict = pseudocyclic_check(&hyp, &th);
        assert!(!verdict.pseudocyclic);
    }

    #[test]
    fn design_property_e8() {
        let conf = build_cc_formula(&geom(8));
        let (ell, _) = conf.cc.restrict_fibre(1).unwrap();
        let d = two_design_check(&ell).unwrap();
        assert_eq!((d.v, d.t, d.lambda), (28, 9, 8));
    }

    #[test]
    fn cyclotomic_schemes() {
        let f13 = Gf::prime(13).unwrap();
        let cc = build_cyclotomic(&f13, 3).unwrap();
        assert_eq!(cc.relations.len(), 4);
        for id in 1..4 {
            assert_eq!(cc.valency(id), 4);
        }
        let report = verify_axioms(&cc, VerifyMode::Full);
        assert!(report.pass, "{:?}", report.failures);
        let tensor = intersection_tensor(&cc);
        let verdict = pseudocyclic_check(&cc, &tensor);
        assert!(verdict.pseudocyclic);
        assert_eq!(verdict.t, Some(4));

        // e = 4 fails: (q−1)/e = 3 is odd, so −1 ∉ C₀.
        assert!(matches!(build_cyclotomic(&f13, 4), Err(Error::Cyclotomy(_))));

        let f17 = Gf::prime(17).unwrap();
        let cc17 = build_cyclotomic(&f17, 4).unwrap();
        for id in 1..5 {
            assert_eq!(cc17.valency(id), 4);
        }
        assert!(verify_axioms(&cc17, VerifyMode::Full).pass);
    }
}
