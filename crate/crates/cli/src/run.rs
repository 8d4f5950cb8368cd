use std::fs;
use std::path::{Path, PathBuf};

use holofact_core::atlas::{build_atlas, verify_thm2};
use holofact_core::comp_lab::{
    asym_compose, asym_iterate, divide_recursion, growth_clunie, picard_factorize, polya_ratio,
    root_factorize, verify_composition, FactorChain,
};
use holofact_core::ivp::{auto_bounds, bounds_hille, residual_check, solve_local};
use holofact_core::ng::{build_cs, limit_eval, tail_bound_check};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{FactorMode, RunConfig};

pub const TOOL: &str = "holofact";

/// A failure reported by one of the engine modules.
#[derive(Debug)]
pub struct DomainError {
    pub code: String,
    pub message: String,
}

impl<E: std::error::Error + std::fmt::Debug> From<E> for DomainError {
    fn from(e: E) -> Self {
        let debug = format!("{e:?}");
        let code = debug
            .split(|c: char| !c.is_alphanumeric() && c != '_')
            .next()
            .unwrap_or("Error")
            .to_string();
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
}

impl Header {
    pub fn for_config(cfg: &RunConfig) -> Self {
        let canonical = serde_json::to_string(cfg).expect("configs serialize");
        let digest = Sha256::digest(canonical.as_bytes());
        Self {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: format!("sha256:{digest:x}"),
        }
    }
}

/// A CSV table; every row is extended with the header's version and hash.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

struct Output {
    result: Value,
    table: Option<Table>,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn execute(cfg: &RunConfig) -> Result<Output, DomainError> {
    let out = match cfg {
        RunConfig::Solve(p) => {
            let chart = solve_local(&p.spec, p.order)?;
            let residual = residual_check(&chart, p.samples);
            Output {
                result: json!({"chart": to_value(&chart), "ode_residual": residual}),
                table: None,
            }
        }
        RunConfig::Atlas(p) => {
            let atlas = build_atlas(&p.spec, &p.budget, &p.config)?;
            let report = verify_thm2(&atlas)?;
            Output {
                result: json!({
                    "atlas": to_value(&atlas.export()),
                    "scans": to_value(&atlas.scans),
                    "overlap_rejections": atlas.overlap_rejections,
                    "thm2": to_value(&report),
                }),
                table: None,
            }
        }
        RunConfig::Radius(p) => {
            let bounds = match p.box_ab {
                Some([a, b]) => bounds_hille(&p.spec, a, b)?,
                None => auto_bounds(&p.spec)?,
            };
            let chart = solve_local(&p.spec, p.order)?;
            let empirical = chart.r_emp.as_f64();
            Output {
                result: json!({"bounds": to_value(&bounds), "r_emp": to_value(&chart.r_emp)}),
                table: Some(Table {
                    columns: vec!["box_a", "box_b", "banach", "picard", "cauchy", "empirical"],
                    rows: vec![vec![
                        num(bounds.box_a),
                        num(bounds.box_b),
                        num(bounds.banach),
                        num(bounds.picard),
                        num(bounds.cauchy),
                        num(empirical),
                    ]],
                }),
            }
        }
        RunConfig::Factor(p) => {
            let chain = match p.mode {
                FactorMode::Picard => picard_factorize(&p.f, p.omitted)?,
                FactorMode::Eq15 => root_factorize(&p.f, p.n)?,
                FactorMode::Verify => FactorChain::user(p.chain.clone()),
            };
            let residual = verify_composition(&p.f, &chain, p.samples, p.box_radius)?;
            Output {
                result: json!({"chain": to_value(&chain), "residual": residual}),
                table: None,
            }
        }
        RunConfig::Ng(p) => {
            let seq = build_cs(p.k)?;
            let mut tails = Vec::new();
            for k in 1..seq.len() {
                tails.push(tail_bound_check(&seq, k, k as f64)?);
            }
            let mut limits = Vec::new();
            for z in &p.eval {
                limits.push(json!({"z": to_value(z), "limit": to_value(&limit_eval(&seq, *z)?)}));
            }
            let rows = (0..seq.len())
                .map(|i| {
                    let stage = |v: &[f64]| if i == 0 { String::new() } else { num(v[i - 1]) };
                    vec![
                        (i + 1).to_string(),
                        num(seq.cs[i]),
                        num(seq.log_cs[i].ln()),
                        stage(&seq.margins),
                        stage(&tails),
                    ]
                })
                .collect();
            Output {
                result: json!({"sequence": to_value(&seq), "tail_bounds": tails, "limits": limits}),
                table: Some(Table {
                    columns: vec!["k", "c", "log_c", "margin", "tail_bound"],
                    rows,
                }),
            }
        }
        RunConfig::Asym(p) => {
            let a_f = p.f.asymptotic_values()?;
            let mut result = json!({"f": to_value(&a_f)});
            if let Some(g) = &p.inner {
                let a_g = g.asymptotic_values()?;
                result["composed"] = to_value(&asym_compose(&a_f, &p.f, &a_g)?);
            }
            if p.iterate > 0 {
                result["iterated"] = to_value(&asym_iterate(&a_f, &p.f, p.iterate)?);
            }
            if !p.probe.is_empty() {
                result["probe"] = to_value(&p.f.surjectivity_probe(&p.probe, p.newton_budget)?);
            }
            Output { result, table: None }
        }
        RunConfig::Maxmod(p) => {
            let mut rows = Vec::new();
            let mut values = Vec::new();
            for &r in &p.radii {
                let m = p.f.max_modulus(r)?;
                values.push(m);
                rows.push(vec![num(r), num(m)]);
            }
            let mut result = json!({"radii": p.radii, "max_modulus": values});
            let mut columns = vec!["r", "max_modulus_f"];
            if let Some(g) = &p.g {
                let ratios = polya_ratio(&p.f, g, &p.radii)?;
                for (row, x) in rows.iter_mut().zip(&ratios.ratios) {
                    row.push(num(*x));
                }
                columns.push("log_ratio");
                result["ratios"] = to_value(&ratios);
                let mut growth = Vec::new();
                for &rho in &p.rho {
                    for &r in &p.radii {
                        growth.push(json!({"rho": rho, "r": r, "check": to_value(&growth_clunie(&p.f, g, rho, r)?)}));
                    }
                }
                result["growth"] = Value::Array(growth);
            }
            Output {
                result,
                table: Some(Table { columns, rows }),
            }
        }
        RunConfig::Recursion(p) => {
            let report = divide_recursion(&p.f, p.n_max)?;
            let rows = report
                .residuals
                .iter()
                .zip(&report.coefficient_residuals)
                .enumerate()
                .map(|(k, (r, c))| vec![k.to_string(), num(*r), num(*c)])
                .collect();
            Output {
                result: to_value(&report),
                table: Some(Table {
                    columns: vec!["k", "sample_residual", "coefficient_residual"],
                    rows,
                }),
            }
        }
    };
    Ok(out)
}

fn write_json(path: &Path, doc: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(doc).expect("values serialize");
    text.push('\n');
    fs::write(path, text)
}

fn write_csv(path: &Path, table: &Table, header: &Header) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head: Vec<&str> = table.columns.clone();
    head.extend(["tool_version", "config_hash"]);
    w.write_record(&head)?;
    for row in &table.rows {
        let mut rec = row.clone();
        rec.push(header.version.into());
        rec.push(header.config_hash.clone());
        w.write_record(&rec)?;
    }
    w.flush()
}

pub enum RunOutcome {
    Success(Vec<PathBuf>),
    Failed(DomainError, PathBuf),
}

/// Runs one configuration, writing `<command>.json` (and `<command>.csv` for
/// tabular results) into `out_dir`. Domain errors produce an error record
/// in place of the result.
pub fn run_command(cfg: &RunConfig, out_dir: &Path) -> std::io::Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let header = Header::for_config(cfg);
    let name = cfg.name();
    let json_path = out_dir.join(format!("{name}.json"));
    match execute(cfg) {
        Ok(out) => {
            let doc = json!({"header": to_value(&header), "command": name, "result": out.result});
            write_json(&json_path, &doc)?;
            let mut written = vec![json_path];
            if let Some(table) = &out.table {
                let csv_path = out_dir.join(format!("{name}.csv"));
                write_csv(&csv_path, table, &header)?;
                written.push(csv_path);
            }
            Ok(RunOutcome::Success(written))
        }
        Err(e) => {
            let doc = json!({
                "header": to_value(&header),
                "command": name,
                "error": {"code": e.code, "message": e.message},
            });
            write_json(&json_path, &doc)?;
            Ok(RunOutcome::Failed(e, json_path))
        }
    }
}
