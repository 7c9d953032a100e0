//! Run specifications, the named checks, and the serializable parameter
//! report. This is the layer the command-line front end drives; it is
//! kept in the library so the whole check matrix is exercisable in-process.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coherent::{
    build_cyclotomic, intersection_tensor, pseudocyclic_check, spectral, two_design_check,
    verify_axioms, CoherentConfiguration, RelId, VerifyMode,
};
use crate::fusion::{
    check_fused_tables, edge_list, elliptic_fusion_eigenmatrices, five_class_fusion,
    frobenius_fusion, srg_family, srg_feasible, three_class_and_srg_fusions, verify_srg,
    FrobeniusFusion, FurtherFusions, FusedConfiguration,
};
use crate::gf::Gf;
use crate::group_action::{build_cc_formula, build_cc_orbit, partitions_equal, LineConfiguration};
use crate::projconic::PlaneGeometry;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Variant {
    Full,
    Hyperbolic,
    Elliptic,
    Cyclotomic(u32),
}

impl Variant {
    pub fn name(&self) -> String {
        match self {
            Variant::Full => "full".into(),
            Variant::Hyperbolic => "hyperbolic".into(),
            Variant::Elliptic => "elliptic".into(),
            Variant::Cyclotomic(e) => format!("cyclotomic:{e}"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Fusion {
    None,
    Frobenius(u32),
    Five,
    Three,
    Srg,
}

impl Fusion {
    pub fn name(&self) -> String {
        match self {
            Fusion::None => "none".into(),
            Fusion::Frobenius(k) => format!("frobenius:{k}"),
            Fusion::Five => "five".into(),
            Fusion::Three => "three".into(),
            Fusion::Srg => "srg".into(),
        }
    }

    fn needs_square_field(&self) -> bool {
        matches!(self, Fusion::Five | Fusion::Three | Fusion::Srg)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum Check {
    Axioms,
    ClosedForms,
    Pseudocyclic,
    Tables,
    Srg,
    Eigen,
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Axioms => "axioms",
            Check::ClosedForms => "closed-forms",
            Check::Pseudocyclic => "pseudocyclic",
            Check::Tables => "tables",
            Check::Srg => "srg",
            Check::Eigen => "eigen",
        }
    }

    pub fn parse(s: &str) -> Result<Check> {
        Ok(match s {
            "axioms" => Check::Axioms,
            "closed-forms" => Check::ClosedForms,
            "pseudocyclic" => Check::Pseudocyclic,
            "tables" => Check::Tables,
            "srg" => Check::Srg,
            "eigen" => Check::Eigen,
            other => return Err(Error::UnsupportedCombination(format!("unknown check {other}"))),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSpec {
    pub q: u32,
    pub poly: Option<u64>,
    pub variant: Variant,
    pub fusion: Fusion,
    pub mode: VerifyMode,
    pub seed: u64,
}

impl RunSpec {
    pub fn new(q: u32, variant: Variant, fusion: Fusion) -> RunSpec {
        RunSpec {
            q,
            poly: None,
            variant,
            fusion,
            mode: VerifyMode::Full,
            seed: 0,
        }
    }
}

/// The base field for a run: GF(q) with the optional polynomial override.
pub fn base_field(q: u32, poly: Option<u64>) -> Result<Arc<Gf>> {
    if q >= 2 && q.is_power_of_two() {
        let deg = q.trailing_zeros();
        return match poly {
            Some(mask) => Gf::binary_with_poly(deg, mask),
            None => Gf::binary(deg),
        };
    }
    if poly.is_some() {
        return Err(Error::UnsupportedField(
            "polynomial masks only apply to characteristic 2".into(),
        ));
    }
    // Odd q restricted to primes at desk scale.
    Gf::prime(q)
}

/// Everything a run constructs, kept together so checks can reach both the
/// display object and the structures behind it.
pub struct Built {
    pub spec: RunSpec,
    /// The formula-built configuration on the working field (absent for
    /// cyclotomic runs).
    pub line_conf: Option<LineConfiguration>,
    pub five: Option<FusedConfiguration>,
    pub further: Option<FurtherFusions>,
    pub frobenius: Option<FrobeniusFusion>,
    /// The configuration the variant selects for reporting.
    pub cc: CoherentConfiguration,
    /// For restricted variants, the fibre that was selected.
    pub fibre: Option<u8>,
}

impl Built {
    pub fn working_field_order(&self) -> usize {
        match &self.line_conf {
            Some(conf) => conf.geom.ctx.order(),
            None => self.spec.q as usize,
        }
    }
}

/// Construct the configuration a run spec describes (without consulting
/// any cache; the CLI layers caching on top via [`crate::cache`]).
pub fn build(spec: &RunSpec) -> Result<Built> {
    if let Variant::Cyclotomic(e) = spec.variant {
        if spec.fusion != Fusion::None {
            return Err(Error::UnsupportedCombination(
                "cyclotomic schemes take no fusion".into(),
            ));
        }
        let ctx = base_field(spec.q, spec.poly)?;
        let cc = build_cyclotomic(&ctx, e as usize)?;
        return Ok(Built {
            spec: spec.clone(),
            line_conf: None,
            five: None,
            further: None,
            frobenius: None,
            cc,
            fibre: None,
        });
    }

    let base = base_field(spec.q, spec.poly)?;
    let field = if spec.fusion.needs_square_field() {
        if base.characteristic() != 2 {
            return Err(Error::UnsupportedCombination(
                "the five-class fusion family requires even q".into(),
            ));
        }
        base.tower_extend()?
    } else {
        base
    };
    let geom = Arc::new(PlaneGeometry::new(field)?);
    let conf = build_cc_formula(&geom);
    build_from_conf(spec, conf)
}

/// Same as [`build`], starting from an already constructed (possibly
/// cache-loaded) line configuration on the working field.
pub fn build_from_conf(spec: &RunSpec, conf: LineConfiguration) -> Result<Built> {
    let mut five = None;
    let mut further = None;
    let mut frobenius = None;
    let display = match spec.fusion {
        Fusion::None => conf.cc.clone(),
        Fusion::Frobenius(k) => {
            let f = frobenius_fusion(&conf, k)?;
            let cc = f.cc.clone();
            frobenius = Some(f);
            cc
        }
        Fusion::Five | Fusion::Three | Fusion::Srg => {
            let fv = five_class_fusion(&conf)?;
            let fu = three_class_and_srg_fusions(&fv)?;
            let cc = match spec.fusion {
                Fusion::Five => fv.cc.clone(),
                Fusion::Three => fu.merged12.cc.clone(),
                _ => fu.merged124.cc.clone(),
            };
            five = Some(fv);
            further = Some(fu);
            cc
        }
    };
    let (cc, fibre) = match spec.variant {
        Variant::Full => (display, None),
        Variant::Hyperbolic => (display.restrict_fibre(0)?.0, Some(0)),
        Variant::Elliptic => (display.restrict_fibre(1)?.0, Some(1)),
        Variant::Cyclotomic(_) => unreachable!("handled above"),
    };
    Ok(Built {
        spec: spec.clone(),
        line_conf: Some(conf),
        five,
        further,
        frobenius,
        cc,
        fibre,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelEntry {
    pub id: u16,
    pub label: String,
    pub eps: i8,
    pub phi: i8,
    pub valency: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamReport {
    pub schema_version: u32,
    pub q: u32,
    pub field_order: usize,
    pub poly: String,
    pub variant: String,
    pub fusion: String,
    pub n: usize,
    pub mode: String,
    pub seed: u64,
    pub relations: Vec<RelEntry>,
    /// Nonzero intersection numbers of the reported configuration as
    /// (i, j, k, p) with p = p_{i,j}^k.
    pub tensor: Vec<(u16, u16, u16, u32)>,
    pub multiplicities: Option<Vec<u64>>,
    pub checks: Vec<CheckResult>,
}

impl ParamReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// UTF-8 JSON with sorted keys (deterministic for a fixed RunSpec).
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        serde_json::to_string_pretty(&value).expect("json prints")
    }
}

fn eps_of_fibre(f: u8) -> i8 {
    if f == 0 {
        1
    } else {
        -1
    }
}

/// The default check set for a spec: every check that applies and that
/// the closed-form theory predicts to pass. Pseudocyclicity, notably,
/// holds for the even-q elliptic scheme and the cyclotomic schemes but
/// not for hyperbolic or generic fused restrictions, so elsewhere it runs
/// only on explicit request.
pub fn applicable_checks(spec: &RunSpec) -> Vec<Check> {
    let mut out = vec![Check::Axioms];
    let single_fibre = !matches!(spec.variant, Variant::Full);
    if spec.fusion == Fusion::None && !matches!(spec.variant, Variant::Cyclotomic(_)) {
        out.push(Check::ClosedForms);
    }
    let expect_pseudocyclic = matches!(spec.variant, Variant::Cyclotomic(_))
        || (spec.variant == Variant::Elliptic && spec.fusion == Fusion::None && spec.q % 2 == 0);
    if expect_pseudocyclic {
        out.push(Check::Pseudocyclic);
    }
    if spec.fusion.needs_square_field() {
        out.push(Check::Tables);
    }
    if matches!(spec.fusion, Fusion::Three | Fusion::Srg) {
        out.push(Check::Srg);
    }
    if single_fibre {
        out.push(Check::Eigen);
    }
    out
}

fn check_applicable(spec: &RunSpec, check: Check) -> bool {
    // An explicitly requested pseudocyclicity check is an assertion the
    // user makes about any single-fibre scheme.
    if check == Check::Pseudocyclic {
        return !matches!(spec.variant, Variant::Full);
    }
    applicable_checks(spec).contains(&check)
}

/// Run the requested checks (or every applicable one) and assemble the
/// report.
pub fn run_checks(built: &Built, requested: Option<&[Check]>) -> Result<ParamReport> {
    let spec = &built.spec;
    let checks: Vec<Check> = match requested {
        None => applicable_checks(spec),
        Some(list) => {
            let mut v = list.to_vec();
            v.sort();
            v.dedup();
            for c in &v {
                if !check_applicable(spec, *c) {
                    return Err(Error::UnsupportedCombination(format!(
                        "check {} does not apply to variant {} / fusion {}",
                        c.name(),
                        spec.variant.name(),
                        spec.fusion.name()
                    )));
                }
            }
            v
        }
    };

    let mut results = Vec::new();
    let mut multiplicities = None;
    for check in checks {
        match check {
            Check::Axioms => {
                // The full axiom-4 pass is cubic; above 300 points fall
                // back to sampled constancy checking.
                let mode = match spec.mode {
                    VerifyMode::Full if built.cc.n > 300 => VerifyMode::Sampled {
                        pairs: 100,
                        seed: spec.seed,
                    },
                    m => m,
                };
                let r = verify_axioms(&built.cc, mode);
                let note = if mode != spec.mode { ", sampled above 300 points" } else { "" };
                results.push(CheckResult {
                    name: "axioms".into(),
                    pass: r.pass,
                    detail: if r.pass {
                        format!("4 axioms hold ({} pairs checked{note})", r.checked_pairs)
                    } else {
                        r.failures.join("; ")
                    },
                });
            }
            Check::ClosedForms => {
                let conf = built
                    .line_conf
                    .as_ref()
                    .expect("closed forms need a line configuration");
                let failures = crate::coherent::check_closed_forms(conf);
                results.push(CheckResult {
                    name: "closed-forms".into(),
                    pass: failures.is_empty(),
                    detail: if failures.is_empty() {
                        "valencies and intersection numbers match the closed forms".into()
                    } else {
                        failures.join("; ")
                    },
                });
            }
            Check::Pseudocyclic => {
                let tensor = intersection_tensor(&built.cc);
                let verdict = pseudocyclic_check(&built.cc, &tensor);
                let mut detail = verdict.detail.clone();
                // The 2-design consequence, exhaustively, at desk sizes.
                if verdict.pseudocyclic && built.cc.n <= 64 && built.cc.relations.len() > 1 {
                    match two_design_check(&built.cc) {
                        Ok(d) => detail.push_str(&format!(
                            "; blocks form a 2-({},{},{}) design",
                            d.v, d.t, d.lambda
                        )),
                        Err(e) => {
                            results.push(CheckResult {
                                name: "pseudocyclic".into(),
                                pass: false,
                                detail: format!("design check failed: {e}"),
                            });
                            continue;
                        }
                    }
                }
                results.push(CheckResult {
                    name: "pseudocyclic".into(),
                    pass: verdict.pseudocyclic,
                    detail,
                });
            }
            Check::Tables => {
                let five = built.five.as_ref().expect("tables need the five-class fusion");
                let further = built.further.as_ref().expect("tables need the merges");
                let failures = check_fused_tables(five, further);
                results.push(CheckResult {
                    name: "tables".into(),
                    pass: failures.is_empty(),
                    detail: if failures.is_empty() {
                        "all fused intersection tables match brute-force counts".into()
                    } else {
                        failures.join("; ")
                    },
                });
            }
            Check::Srg => {
                let further = built.further.as_ref().expect("srg needs the merges");
                let q = built.five.as_ref().expect("srg needs the fusion").sub_q as i64;
                let mut pass = true;
                let mut notes = Vec::new();
                let cases = [
                    (&further.merged12, 1u8, -1i64, "elliptic"),
                    (&further.merged124, 0u8, 1i64, "hyperbolic"),
                ];
                for (fused, fibre, eps, name) in cases {
                    let (scheme, _) = fused.cc.restrict_fibre(fibre)?;
                    let fam = srg_family(q, eps);
                    match verify_srg(&scheme, 1) {
                        Ok(p) => {
                            let degenerate = p.k == p.v - 1;
                            let ok = p.v == fam.v
                                && p.k == fam.k
                                && p.lambda == fam.lambda
                                && (degenerate || p.mu == fam.mu)
                                && srg_feasible(&fam);
                            if !ok {
                                pass = false;
                            }
                            notes.push(format!(
                                "{name}: ({},{},{},{}) vs family ({},{},{},{})",
                                p.v, p.k, p.lambda, p.mu, fam.v, fam.k, fam.lambda, fam.mu
                            ));
                        }
                        Err(e) => {
                            pass = false;
                            notes.push(format!("{name}: {e}"));
                        }
                    }
                }
                results.push(CheckResult {
                    name: "srg".into(),
                    pass,
                    detail: notes.join("; "),
                });
            }
            Check::Eigen => {
                match spectral(&built.cc, 1e-8) {
                    Ok(s) => {
                        let mults: Vec<u64> = s.multiplicities.iter().map(|&m| m as u64).collect();
                        let mut pass = s.max_residual < 1e-6 && s.inverse_residual < 1e-6 * built.cc.n as f64;
                        let mut detail = format!(
                            "multiplicities {:?}, residual {:.2e}, P·Q residual {:.2e}",
                            mults, s.max_residual, s.inverse_residual
                        );
                        // For the elliptic three-class fusion the exact
                        // eigenmatrices are known; compare after rounding.
                        if spec.fusion == Fusion::Five
                            && spec.variant == Variant::Elliptic
                            && built.cc.relations.len() == 4
                        {
                            let q = built.five.as_ref().unwrap().sub_q as i64;
                            match match_eigenmatrices(&s.p, &s.q, q, 1e-6) {
                                Ok(()) => detail.push_str("; matches the closed-form eigenmatrices"),
                                Err(e) => {
                                    pass = false;
                                    detail.push_str(&format!("; eigenmatrix mismatch: {e}"));
                                }
                            }
                        }
                        multiplicities = Some(mults);
                        results.push(CheckResult {
                            name: "eigen".into(),
                            pass,
                            detail,
                        });
                    }
                    Err(e) => results.push(CheckResult {
                        name: "eigen".into(),
                        pass: false,
                        detail: format!("{e}"),
                    }),
                }
            }
        }
    }

    let relations = built
        .cc
        .relations
        .iter()
        .enumerate()
        .map(|(id, r)| RelEntry {
            id: id as u16,
            label: r.label.name(),
            eps: eps_of_fibre(r.src),
            phi: eps_of_fibre(r.dst),
            valency: built.cc.valency(id as RelId),
        })
        .collect();
    let tensor = intersection_tensor(&built.cc).nonzero();

    Ok(ParamReport {
        schema_version: SCHEMA_VERSION,
        q: spec.q,
        field_order: built.working_field_order(),
        poly: match spec.poly {
            Some(mask) => format!("0x{mask:x}"),
            None => "default".into(),
        },
        variant: spec.variant.name(),
        fusion: spec.fusion.name(),
        n: built.cc.n,
        mode: match spec.mode {
            VerifyMode::Full => "full".into(),
            VerifyMode::Sampled { pairs, seed } => format!("sampled({pairs},{seed})"),
        },
        seed: spec.seed,
        relations,
        tensor,
        multiplicities,
        checks: results,
    })
}

/// Rebuild the configuration through the group-orbit route and compare
/// the two partitions of L×L (the central agreement between the orbit
/// description and the cross-ratio labelling).
pub fn cross_check(built: &Built) -> Result<CheckResult> {
    let conf = built.line_conf.as_ref().ok_or_else(|| {
        Error::UnsupportedCombination("cross-check applies to line configurations".into())
    })?;
    let orbit = build_cc_orbit(&conf.geom)?;
    let pass = partitions_equal(&orbit.cc, &conf.cc);
    Ok(CheckResult {
        name: "cross-check".into(),
        pass,
        detail: if pass {
            format!(
                "orbit closure and formula labelling agree ({} relations)",
                conf.cc.relations.len()
            )
        } else {
            "orbit and formula partitions differ".into()
        },
    })
}

/// Match numeric P/Q of the 3-class elliptic fusion against the exact
/// matrices, up to the row permutation the numeric eigenspace order
/// introduces.
pub fn match_eigenmatrices(
    p_num: &[Vec<f64>],
    q_num: &[Vec<f64>],
    q: i64,
    tol: f64,
) -> std::result::Result<(), String> {
    let (p_exact, q_exact) = elliptic_fusion_eigenmatrices(q);
    let m = 4usize;
    if p_num.len() != m {
        return Err(format!("expected 4 eigenspaces, found {}", p_num.len()));
    }
    let mut perm = vec![usize::MAX; m];
    perm[0] = 0;
    for i in 1..m {
        let mut found = None;
        for t in 1..m {
            if (0..m).all(|j| (p_num[i][j] - p_exact[t][j] as f64).abs() <= tol) {
                found = Some(t);
                break;
            }
        }
        match found {
            Some(t) if !perm.contains(&t) => perm[i] = t,
            Some(t) => return Err(format!("numeric rows {i} and earlier both match exact row {t}")),
            None => return Err(format!("numeric row {i} matches no exact row")),
        }
    }
    for i in 0..m {
        for j in 0..m {
            let want = q_exact[j][perm[i]] as f64;
            // Q columns permute like P rows.
            let got = q_num[j][i];
            if (got - want).abs() > tol {
                return Err(format!("Q({j},{i}) = {got} vs exact {want}"));
            }
        }
    }
    Ok(())
}

/// CSV rendering of the numeric P and Q matrices.
pub fn spectral_csv(s: &crate::coherent::SpectralData) -> String {
    let mut out = String::from("matrix,row,values\n");
    for (name, m) in [("P", &s.p), ("Q", &s.q)] {
        for (i, row) in m.iter().enumerate() {
            let vals: Vec<String> = row.iter().map(|x| format!("{x:.10}")).collect();
            out.push_str(&format!("{name},{i},{}\n", vals.join(";")));
        }
    }
    out
}

/// Edge-list text for one relation of the reported scheme plus a JSON
/// parameter block.
pub fn edgelist_text(cc: &CoherentConfiguration, adj: RelId) -> String {
    let mut out = String::new();
    for (u, v) in edge_list(cc, adj) {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}
