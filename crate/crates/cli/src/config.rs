use holofact_core::atlas::{AtlasConfig, Budget};
use holofact_core::catalog::CatalogFn;
use holofact_core::ivp::IvpSpec;
use holofact_core::series::DEFAULT_ORDER;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unknown field `{path}`")]
    StrictField { path: String },
}

impl ConfigError {
    fn schema(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

fn default_samples() -> usize {
    200
}

fn default_box_radius() -> f64 {
    2.0
}

fn default_newton() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    pub spec: IvpSpec,
    #[serde(default = "default_order")]
    pub order: usize,
    /// Sample count for the ODE residual check.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasParams {
    pub spec: IvpSpec,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub config: AtlasConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusParams {
    pub spec: IvpSpec,
    /// `[box_a, box_b]`; the automatic search is used when absent.
    #[serde(default, rename = "box")]
    pub box_ab: Option<[f64; 2]>,
    #[serde(default = "default_order")]
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorMode {
    /// Factor through an omitted value.
    Picard,
    /// Factor through an `(N+1)`-th root.
    Eq15,
    /// Check a user supplied chain.
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorParams {
    pub f: CatalogFn,
    pub mode: FactorMode,
    #[serde(default)]
    pub omitted: C64,
    #[serde(rename = "N", default)]
    pub n: u32,
    #[serde(default)]
    pub chain: Vec<CatalogFn>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_box_radius")]
    pub box_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgParams {
    #[serde(rename = "K")]
    pub k: usize,
    /// Points at which to evaluate the limit.
    #[serde(default)]
    pub eval: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymParams {
    pub f: CatalogFn,
    /// Inner function `g` of `f ∘ g`.
    #[serde(default)]
    pub inner: Option<CatalogFn>,
    /// Number of extra self-compositions of `f`.
    #[serde(default)]
    pub iterate: usize,
    /// Targets for the surjectivity probe.
    #[serde(default)]
    pub probe: Vec<C64>,
    #[serde(default = "default_newton")]
    pub newton_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxmodParams {
    pub f: CatalogFn,
    pub radii: Vec<f64>,
    /// When present, growth ratios of `f ∘ g` against `f` are tabulated.
    #[serde(default)]
    pub g: Option<CatalogFn>,
    /// `ρ` values for the composition lower bound; needs `g`.
    #[serde(default)]
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecursionParams {
    /// A chain `g ∘ h`.
    pub f: CatalogFn,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "lowercase", deny_unknown_fields)]
pub enum RunConfig {
    Solve(SolveParams),
    Atlas(AtlasParams),
    Radius(RadiusParams),
    Factor(FactorParams),
    Ng(NgParams),
    Asym(AsymParams),
    Maxmod(MaxmodParams),
    Recursion(RecursionParams),
}

pub const COMMANDS: [&str; 8] = ["solve", "atlas", "radius", "factor", "ng", "asym", "maxmod", "recursion"];

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Solve(_) => "solve",
            RunConfig::Atlas(_) => "atlas",
            RunConfig::Radius(_) => "radius",
            RunConfig::Factor(_) => "factor",
            RunConfig::Ng(_) => "ng",
            RunConfig::Asym(_) => "asym",
            RunConfig::Maxmod(_) => "maxmod",
            RunConfig::Recursion(_) => "recursion",
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = |path: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::schema(path, format!("must be positive, got {x}")))
            }
        };
        match self {
            RunConfig::Solve(p) => positive("params.samples", p.samples as f64),
            RunConfig::Atlas(p) => {
                positive("params.config.lambda", p.config.lambda)?;
                positive("params.budget.max_charts", p.budget.max_charts as f64)?;
                positive("params.budget.angles_per_chart", p.budget.angles_per_chart as f64)
            }
            RunConfig::Radius(p) => match p.box_ab {
                Some([a, b]) => {
                    positive("params.box[0]", a)?;
                    positive("params.box[1]", b)
                }
                None => Ok(()),
            },
            RunConfig::Factor(p) => {
                positive("params.box_radius", p.box_radius)?;
                positive("params.samples", p.samples as f64)
            }
            RunConfig::Ng(_) | RunConfig::Asym(_) | RunConfig::Recursion(_) => Ok(()),
            RunConfig::Maxmod(p) => {
                for (i, r) in p.radii.iter().enumerate() {
                    positive(&format!("params.radii[{i}]"), *r)?;
                }
                for (i, r) in p.rho.iter().enumerate() {
                    if !(*r > 0.0 && *r < 1.0) {
                        return Err(ConfigError::schema(&format!("params.rho[{i}]"), "must lie in (0, 1)"));
                    }
                }
                if !p.rho.is_empty() && p.g.is_none() {
                    return Err(ConfigError::schema("params.rho", "needs `g`"));
                }
                Ok(())
            }
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        if message.starts_with("unknown field") {
            ConfigError::StrictField { path }
        } else {
            ConfigError::Schema { path, message }
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn complex_schema() -> Value {
    json!({"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2,
           "description": "[re, im]"})
}

fn spec_schema() -> Value {
    let c = complex_schema();
    json!({
        "type": "object",
        "additionalProperties": false,
        "required": ["type", "F", "G"],
        "properties": {
            "type": {"enum": ["type1", "type2"]},
            "F": {"type": "array", "items": c},
            "G": {"type": "array", "items": c},
            "N": {"type": "integer", "minimum": 0},
            "a": c, "alpha": c, "a0": c
        }
    })
}

fn catalog_schema() -> Value {
    json!({
        "type": "object",
        "required": ["kind"],
        "properties": {"kind": {"enum": [
            "int_exp_poly", "exp_affine", "affine", "linear", "log_shift", "monomial",
            "scaled_exp", "z_exp_h", "int_exp_exp", "ng_limit", "chain"
        ]}}
    })
}

fn object(required: &[&str], properties: Value) -> Value {
    json!({"type": "object", "additionalProperties": false, "required": required, "properties": properties})
}

/// JSON schema of one command's configuration document.
pub fn schema(command: &str) -> Option<Value> {
    let c = complex_schema();
    let f = catalog_schema();
    let pos_int = json!({"type": "integer", "minimum": 0});
    let params = match command {
        "solve" => object(&["spec"], json!({"spec": spec_schema(), "order": pos_int, "samples": pos_int})),
        "atlas" => object(
            &["spec"],
            json!({
                "spec": spec_schema(),
                "budget": object(&[], json!({"max_generation": pos_int, "max_charts": pos_int, "angles_per_chart": pos_int})),
                "config": object(&[], json!({"order": pos_int, "walk_order": pos_int, "lambda": {"type": "number", "exclusiveMinimum": 0}}))
            }),
        ),
        "radius" => object(
            &["spec"],
            json!({"spec": spec_schema(), "order": pos_int,
                   "box": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2, "maxItems": 2}}),
        ),
        "factor" => object(
            &["f", "mode"],
            json!({"f": f, "mode": {"enum": ["picard", "eq15", "verify"]}, "omitted": c, "N": pos_int,
                   "chain": {"type": "array", "items": f}, "samples": pos_int,
                   "box_radius": {"type": "number", "exclusiveMinimum": 0}}),
        ),
        "ng" => object(&["K"], json!({"K": {"type": "integer", "minimum": 1, "maximum": 40}, "eval": {"type": "array", "items": c}})),
        "asym" => object(
            &["f"],
            json!({"f": f, "inner": f, "iterate": pos_int, "probe": {"type": "array", "items": c}, "newton_budget": pos_int}),
        ),
        "maxmod" => object(
            &["f", "radii"],
            json!({"f": f, "g": f,
                   "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                   "rho": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}}}),
        ),
        "recursion" => object(&["f", "n_max"], json!({"f": f, "n_max": pos_int})),
        _ => return None,
    };
    Some(json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": format!("holofact {command} configuration"),
        "type": "object",
        "additionalProperties": false,
        "required": ["command", "params"],
        "properties": {"command": {"const": command}, "params": params}
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCH: &str = r#"{"type":"type1","F":[[0,0],[1,0]],"G":[[0,0],[-1,0]]}"#;

    #[test]
    fn radius_config_parses() {
        let text = format!(r#"{{"command":"radius","params":{{"spec":{BENCH},"box":[1,1]}}}}"#);
        let cfg = parse_config(&text).unwrap();
        assert!(matches!(cfg, RunConfig::Radius(RadiusParams { box_ab: Some([1.0, 1.0]), order: 64, .. })));
    }

    #[test]
    fn negative_generation_is_a_schema_error() {
        let text = format!(r#"{{"command":"atlas","params":{{"spec":{BENCH},"budget":{{"max_generation":-1}}}}}}"#);
        match parse_config(&text) {
            Err(ConfigError::Schema { path, .. }) => assert_eq!(path, "params.budget.max_generation"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn misspelt_field_is_reported_with_its_path() {
        let text = format!(r#"{{"command":"solve","params":{{"spec":{BENCH},"ordre":64}}}}"#);
        match parse_config(&text) {
            Err(ConfigError::StrictField { path }) => assert_eq!(path, "params.ordre"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn atlas_defaults_are_filled() {
        let text = format!(r#"{{"command":"atlas","params":{{"spec":{BENCH}}}}}"#);
        let RunConfig::Atlas(p) = parse_config(&text).unwrap() else {
            panic!()
        };
        assert_eq!(p.budget.max_generation, 3);
        assert_eq!(p.budget.angles_per_chart, 64);
        assert_eq!(p.config.order, 64);
        assert_eq!(p.config.lambda, 1e8);
    }

    #[test]
    fn nonpositive_tolerances_are_rejected() {
        let text = format!(r#"{{"command":"radius","params":{{"spec":{BENCH},"box":[1,0]}}}}"#);
        assert!(matches!(parse_config(&text), Err(ConfigError::Schema { .. })));
    }

    #[test]
    fn every_command_has_a_schema() {
        for c in COMMANDS {
            assert_eq!(schema(c).unwrap()["properties"]["command"]["const"], c);
        }
        assert!(schema("bogus").is_none());
    }
}
