//! Command-line front end: build configurations (with a binary cache),
//! run the named checks, and write report artifacts.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use conic_schemes::cache::{self, CacheLock, CacheMeta};
use conic_schemes::coherent::VerifyMode;
use conic_schemes::fusion::fused_table_entries;
use conic_schemes::group_action::{build_cc_formula, build_cc_orbit};
use conic_schemes::report::{
    self, base_field, build_from_conf, cross_check, run_checks, spectral_csv,
    Built, Check, Fusion, ParamReport, RunSpec, Variant,
};
use conic_schemes::{Gf, LineConfiguration, PlaneGeometry};

#[derive(Parser)]
#[command(
    name = "conic-schemes",
    about = "Coherent configurations and association schemes on the non-tangent lines of a conic in PG(2,q)",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configuration (cached) and print its descriptor.
    Build(RunArgs),
    /// Run checks and print the parameter report as JSON.
    Check(RunArgs),
    /// Run checks and write report artifacts to the output directory.
    Report(RunArgs),
    /// Remove cache entries.
    CleanCache,
}

#[derive(Args)]
struct RunArgs {
    /// Field size q: a power of 2 up to 64, or an odd prime up to 17.
    #[arg(long)]
    q: u32,
    /// Defining polynomial as a hex coefficient mask, e.g. 0x13 for
    /// x^4+x+1 (characteristic 2 only).
    #[arg(long)]
    poly: Option<String>,
    /// full | hyperbolic | elliptic | cyclotomic:<e>
    #[arg(long, default_value = "full")]
    variant: String,
    /// none | frobenius:<k> | five | three | srg
    #[arg(long, default_value = "none")]
    fusion: String,
    /// Comma-separated subset of: axioms,closed-forms,pseudocyclic,tables,srg,eigen
    #[arg(long)]
    checks: Option<String>,
    /// Verification mode: full | sampled
    #[arg(long, default_value = "full")]
    mode: String,
    /// Seed for sampled verification (recorded in the report).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for report artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Artifact format: json | csv | edgelist
    #[arg(long, default_value = "json")]
    format: String,
    /// Also rebuild by group-orbit closure and compare partitions (q ≤ 16).
    #[arg(long)]
    cross_check: bool,
}

fn parse_hex(s: &str) -> anyhow::Result<u64> {
    let t = s.trim().trim_start_matches("0x").trim_start_matches("0X");
    u64::from_str_radix(t, 16).with_context(|| format!("invalid hex mask {s}"))
}

fn parse_variant(s: &str) -> anyhow::Result<Variant> {
    match s {
        "full" => Ok(Variant::Full),
        "hyperbolic" => Ok(Variant::Hyperbolic),
        "elliptic" => Ok(Variant::Elliptic),
        other => {
            if let Some(rest) = other
                .strip_prefix("cyclotomic:")
                .or_else(|| other.strip_prefix("cyclotomic(").map(|r| r.trim_end_matches(')')))
            {
                Ok(Variant::Cyclotomic(rest.parse()?))
            } else {
                bail!("unknown variant {other}")
            }
        }
    }
}

fn parse_fusion(s: &str) -> anyhow::Result<Fusion> {
    match s {
        "none" => Ok(Fusion::None),
        "five" => Ok(Fusion::Five),
        "three" => Ok(Fusion::Three),
        "srg" => Ok(Fusion::Srg),
        other => {
            if let Some(rest) = other
                .strip_prefix("frobenius:")
                .or_else(|| other.strip_prefix("frobenius(").map(|r| r.trim_end_matches(')')))
            {
                Ok(Fusion::Frobenius(rest.parse()?))
            } else {
                bail!("unknown fusion {other}")
            }
        }
    }
}

fn parse_checks(s: &str) -> anyhow::Result<Vec<Check>> {
    s.split(',')
        .map(|t| Check::parse(t.trim()).map_err(|e| anyhow!(e)))
        .collect()
}

fn run_spec(args: &RunArgs) -> anyhow::Result<RunSpec> {
    let q = args.q;
    let supported_even = q.is_power_of_two() && (2..=64).contains(&q);
    let supported_odd = [3, 5, 7, 11, 13, 17].contains(&q);
    if !supported_even && !supported_odd {
        bail!("q = {q} is not a supported prime power (powers of 2 up to 64, or an odd prime up to 17)");
    }
    let mode = match args.mode.as_str() {
        "full" => VerifyMode::Full,
        "sampled" => VerifyMode::Sampled { pairs: 100, seed: args.seed },
        other => bail!("unknown mode {other}"),
    };
    Ok(RunSpec {
        q,
        poly: args.poly.as_deref().map(parse_hex).transpose()?,
        variant: parse_variant(&args.variant)?,
        fusion: parse_fusion(&args.fusion)?,
        mode,
        seed: args.seed,
    })
}

fn cache_dir() -> PathBuf {
    std::env::var_os("CONIC_SCHEMES_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("conic-schemes-cache"))
}

/// Polynomial mask of the binary root of a (possibly tower) field.
fn root_poly_mask(ctx: &Arc<Gf>) -> u64 {
    let mut cur = Arc::clone(ctx);
    while let Some(parent) = cur.parent() {
        let next = Arc::clone(parent);
        cur = next;
    }
    cur.poly_mask().unwrap_or(0)
}

fn meta_for(field: &Arc<Gf>, method: &str) -> CacheMeta {
    CacheMeta {
        format_version: cache::FORMAT_VERSION,
        code_version: env!("CARGO_PKG_VERSION").into(),
        field_order: field.order(),
        poly_mask: root_poly_mask(field),
        tower_sub: if field.parent().is_some() { field.subfield_order() } else { 0 },
        variant: "full".into(),
        method: method.into(),
    }
}

/// Build the line configuration for a spec, consulting the cache; returns
/// the assembled run object plus whether the cache was hit.
fn load_or_build(spec: &RunSpec) -> anyhow::Result<(Built, bool)> {
    if matches!(spec.variant, Variant::Cyclotomic(_)) {
        return Ok((report::build(spec)?, false));
    }
    let base = base_field(spec.q, spec.poly)?;
    let field = match spec.fusion {
        Fusion::Five | Fusion::Three | Fusion::Srg => {
            if base.characteristic() != 2 {
                bail!("the five-class fusion family requires even q");
            }
            base.tower_extend()?
        }
        _ => base,
    };
    let dir = cache_dir();
    let meta = meta_for(&field, "formula");
    let geom = Arc::new(PlaneGeometry::new(field)?);
    let (conf, hit) = match cache::load(&dir, &meta)? {
        Some(cc) => (LineConfiguration::from_cc(Arc::clone(&geom), cc)?, true),
        None => {
            let conf = build_cc_formula(&geom);
            let _lock = CacheLock::acquire(&dir)?;
            cache::save(&dir, &conf.cc, &meta)?;
            (conf, false)
        }
    };
    Ok((build_from_conf(spec, conf)?, hit))
}

fn cmd_build(args: &RunArgs) -> anyhow::Result<bool> {
    let spec = run_spec(args)?;
    let (built, hit) = load_or_build(&spec)?;
    let mut all_pass = true;
    let mut cross = serde_json::Value::Null;
    if args.cross_check {
        let result = cross_check(&built)?;
        all_pass &= result.pass;
        // Cache the orbit-built matrix as well.
        if let Some(conf) = &built.line_conf {
            let orbit = build_cc_orbit(&conf.geom)?;
            let dir = cache_dir();
            let _lock = CacheLock::acquire(&dir)?;
            cache::save(&dir, &orbit.cc, &meta_for(&conf.geom.ctx, "orbit"))?;
        }
        cross = serde_json::to_value(&result)?;
    }
    let descriptor = serde_json::json!({
        "q": spec.q,
        "variant": spec.variant.name(),
        "fusion": spec.fusion.name(),
        "field_order": built.working_field_order(),
        "n": built.cc.n,
        "fibre_sizes": built.cc.fibre_sizes,
        "relations": built.cc.relations.len(),
        "cache_hit": hit,
        "cross_check": cross,
    });
    println!("{}", serde_json::to_string_pretty(&serde_json::to_value(descriptor)?)?);
    Ok(all_pass)
}

fn requested_checks(args: &RunArgs) -> anyhow::Result<Option<Vec<Check>>> {
    args.checks.as_deref().map(parse_checks).transpose()
}

fn cmd_check(args: &RunArgs) -> anyhow::Result<bool> {
    let spec = run_spec(args)?;
    let (built, _) = load_or_build(&spec)?;
    let checks = requested_checks(args)?;
    let report = run_checks(&built, checks.as_deref())?;
    println!("{}", report.to_json());
    Ok(report.all_pass())
}

fn write_artifacts(args: &RunArgs, built: &Built, report: &ParamReport) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let stem = format!(
        "q{}_{}_{}",
        report.q,
        report.variant.replace(':', "-"),
        report.fusion.replace(':', "-")
    );
    let write = |name: &str, data: &str| -> anyhow::Result<PathBuf> {
        let path = args.out.join(name);
        std::fs::write(&path, data)?;
        println!("wrote {}", path.display());
        Ok(path)
    };
    write(&format!("{stem}.report.json"), &report.to_json())?;
    match args.format.as_str() {
        "json" => {}
        "csv" => {
            let mut tensor = String::from("i,j,k,p\n");
            for (i, j, k, p) in &report.tensor {
                tensor.push_str(&format!("{i},{j},{k},{p}\n"));
            }
            write(&format!("{stem}.tensor.csv"), &tensor)?;
            if let (Some(five), Some(further)) = (&built.five, &built.further) {
                let mut csv = String::from("table,k,i,j,eps,counted,formula\n");
                for e in fused_table_entries(five, further) {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        e.table, e.k, e.i, e.j, e.eps, e.counted, e.formula
                    ));
                }
                write(&format!("{stem}.tables.csv"), &csv)?;
            }
            if report.multiplicities.is_some() {
                if let Ok(s) = conic_schemes::coherent::spectral(&built.cc, 1e-8) {
                    write(&format!("{stem}.spectral.csv"), &spectral_csv(&s))?;
                }
            }
        }
        "edgelist" => {
            let further = built
                .further
                .as_ref()
                .ok_or_else(|| anyhow!("edge lists require --fusion three or srg"))?;
            let q = built.five.as_ref().unwrap().sub_q as i64;
            for (fused, fibre, eps, name) in [
                (&further.merged12, 1u8, -1i64, "elliptic"),
                (&further.merged124, 0u8, 1i64, "hyperbolic"),
            ] {
                let (scheme, _) = fused.cc.restrict_fibre(fibre)?;
                let text = report::edgelist_text(&scheme, 1);
                write(&format!("{stem}.{name}.edges"), &text)?;
                let params = conic_schemes::fusion::srg_family(q, eps);
                write(
                    &format!("{stem}.{name}.srg.json"),
                    &serde_json::to_string_pretty(&serde_json::to_value(params)?)?,
                )?;
            }
        }
        other => bail!("unknown format {other}"),
    }
    Ok(())
}

fn cmd_report(args: &RunArgs) -> anyhow::Result<bool> {
    let spec = run_spec(args)?;
    let (built, _) = load_or_build(&spec)?;
    let checks = requested_checks(args)?;
    let report = run_checks(&built, checks.as_deref())?;
    write_artifacts(args, &built, &report)?;
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Check(args) => cmd_check(args),
        Command::Report(args) => cmd_report(args),
        Command::CleanCache => cache::clean(&cache_dir())
            .map(|n| {
                println!("removed {n} cache files");
                true
            })
            .map_err(|e| anyhow!(e)),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
