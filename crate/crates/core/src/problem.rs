//! Problem descriptors (JSON), compilation into solver objects, and the
//! builtin registry.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::bifunction::{parse, parse_condition, Bifunction, Expr, DEFAULT_EXTENSION_SCALE};
use crate::geometry::ConvexBody;
use crate::setmap::{MapKind, SetValuedMap};
use crate::solver::{default_tol_eq, QepProblem, SolverParams};

pub const DEFAULT_H: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed descriptor: {0}")]
    Json(String),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("unknown builtin '{0}'")]
    UnknownBuiltin(String),
}

fn field(path: impl Into<String>, message: impl ToString) -> ProblemError {
    ProblemError::Field {
        path: path.into(),
        message: message.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BifunctionSpec {
    Text(String),
    Builtin { builtin: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapSpec {
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        body: Option<ConvexBody>,
    },
    Singleton {
        coords: Vec<String>,
    },
    Box {
        lo: Vec<String>,
        hi: Vec<String>,
    },
    Ball {
        center: Vec<String>,
        radius: String,
    },
    Punctured {
        base: Box<MapSpec>,
        exclusion_distance: String,
    },
    Piecewise {
        cases: Vec<CaseSpec>,
    },
    Intersection {
        maps: Vec<MapSpec>,
    },
    Sublevel {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expression: Option<String>,
        #[serde(default)]
        margin: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub when: String,
    pub map: MapSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionSpec {
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
}

fn default_scale() -> f64 {
    DEFAULT_EXTENSION_SCALE
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_fix: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_eq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl Parameters {
    /// Fields set in `other` win.
    pub fn overridden_by(&self, other: &Parameters) -> Parameters {
        Parameters {
            h: other.h.or(self.h),
            tol_fix: other.tol_fix.or(self.tol_fix),
            tol_eq: other.tol_eq.or(self.tol_eq),
            eps: other.eps.or(self.eps),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDescriptor {
    pub name: String,
    pub dim: usize,
    pub body: ConvexBody,
    /// Domain of the maps when it differs from `body`; such descriptors are
    /// analysis fixtures rather than QEPs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<ConvexBody>,
    pub bifunction: BifunctionSpec,
    pub constraint_map: MapSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary_map: Option<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<ExtensionSpec>,
    #[serde(default)]
    pub parameters: Parameters,
}

/// A compiled descriptor.
#[derive(Clone, Debug)]
pub struct Problem {
    pub descriptor: ProblemDescriptor,
    pub body: ConvexBody,
    pub domain: ConvexBody,
    pub f: Bifunction,
    pub constraint: SetValuedMap,
    pub secondary: Option<SetValuedMap>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParameters {
    pub h: f64,
    pub tol_fix: f64,
    pub tol_eq: f64,
    pub eps: f64,
}

impl ResolvedParameters {
    pub fn solver(&self) -> SolverParams {
        SolverParams {
            tol_fix: self.tol_fix,
            tol_eq: self.tol_eq,
            eps: self.eps,
        }
    }
}

impl Problem {
    pub fn name(&self) -> &str {
        &self.descriptor.name
    }

    pub fn is_qep(&self) -> bool {
        self.domain == self.body
    }

    pub fn qep(&self) -> Option<QepProblem> {
        if !self.is_qep() {
            return None;
        }
        QepProblem::new(self.body.clone(), self.f.clone(), self.constraint.clone()).ok()
    }

    /// Descriptor parameters, then `overrides`, then defaults: `h = 0.05`,
    /// `tol_fix = h`, `eps = 3h`, `tol_eq` from the bifunction.
    pub fn parameters(&self, overrides: &Parameters) -> ResolvedParameters {
        let p = self.descriptor.parameters.overridden_by(overrides);
        let h = p.h.unwrap_or(DEFAULT_H);
        ResolvedParameters {
            h,
            tol_fix: p.tol_fix.unwrap_or(h),
            tol_eq: p.tol_eq.unwrap_or_else(|| default_tol_eq(&self.f)),
            eps: p.eps.unwrap_or(3.0 * h),
        }
    }
}

pub fn builtin_bifunction(id: &str) -> Option<&'static str> {
    Some(match id {
        "zero" => "0",
        "linear" => "y1 - x1",
        "linear-reversed" => "x1 - y1",
        "example-3.1" => "cond(x1 == 0, cond(y1 > 0, -1, 0), 0)",
        _ => return None,
    })
}

fn parse_at(path: &str, text: &str) -> Result<Expr, ProblemError> {
    parse(text).map_err(|e| field(path, e))
}

fn parse_all(path: &str, texts: &[String]) -> Result<Vec<Expr>, ProblemError> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| parse_at(&format!("{path}[{i}]"), t))
        .collect()
}

struct Ctx<'a> {
    body: &'a ConvexBody,
    f_text: &'a str,
    f_dim: usize,
}

fn compile_map(spec: &MapSpec, path: &str, ctx: &Ctx) -> Result<MapKind, ProblemError> {
    Ok(match spec {
        MapSpec::Constant { body } => {
            MapKind::Constant(body.clone().unwrap_or_else(|| ctx.body.clone()))
        }
        MapSpec::Singleton { coords } => {
            MapKind::Singleton(parse_all(&format!("{path}.coords"), coords)?)
        }
        MapSpec::Box { lo, hi } => MapKind::Box {
            lo: parse_all(&format!("{path}.lo"), lo)?,
            hi: parse_all(&format!("{path}.hi"), hi)?,
        },
        MapSpec::Ball { center, radius } => MapKind::Ball {
            center: parse_all(&format!("{path}.center"), center)?,
            radius: parse_at(&format!("{path}.radius"), radius)?,
        },
        MapSpec::Punctured {
            base,
            exclusion_distance,
        } => MapKind::Punctured {
            base: Box::new(compile_map(base, &format!("{path}.base"), ctx)?),
            exclusion: parse_at(&format!("{path}.exclusion_distance"), exclusion_distance)?,
        },
        MapSpec::Piecewise { cases } => {
            let mut out = Vec::with_capacity(cases.len());
            for (i, c) in cases.iter().enumerate() {
                let p = format!("{path}.cases[{i}]");
                let cond = parse_condition(&c.when).map_err(|e| field(format!("{p}.when"), e))?;
                out.push((cond, compile_map(&c.map, &format!("{p}.map"), ctx)?));
            }
            MapKind::Piecewise(out)
        }
        MapSpec::Intersection { maps } => MapKind::Intersection(
            maps.iter()
                .enumerate()
                .map(|(i, m)| compile_map(m, &format!("{path}.maps[{i}]"), ctx))
                .collect::<Result<_, _>>()?,
        ),
        MapSpec::Sublevel { expression, margin } => {
            let text = expression.as_deref().unwrap_or(ctx.f_text);
            let f = Bifunction::parse(text, ctx.f_dim)
                .map_err(|e| field(format!("{path}.expression"), e))?;
            MapKind::Sublevel {
                f,
                margin: *margin,
                open: false,
            }
        }
    })
}

/// Parses every expression and checks dimensions; errors carry field paths.
pub fn compile(descriptor: ProblemDescriptor) -> Result<Problem, ProblemError> {
    let d = &descriptor;
    d.body.validate().map_err(|e| field("body", e))?;
    if d.body.dim() != d.dim {
        return Err(field(
            "dim",
            format!("body has dimension {}, expected {}", d.body.dim(), d.dim),
        ));
    }
    let domain = d.domain.clone().unwrap_or_else(|| d.body.clone());
    domain.validate().map_err(|e| field("domain", e))?;
    let f_text = match &d.bifunction {
        BifunctionSpec::Text(t) => t.clone(),
        BifunctionSpec::Builtin { builtin } => builtin_bifunction(builtin)
            .ok_or_else(|| {
                field(
                    "bifunction.builtin",
                    format!("unknown builtin bifunction '{builtin}'"),
                )
            })?
            .to_string(),
    };
    let mut f = Bifunction::parse(&f_text, d.dim).map_err(|e| field("bifunction", e))?;
    if let Some(ext) = &d.extension {
        let text = ext.expression.as_deref().unwrap_or(&f_text);
        let expr = parse_at("extension.expression", text)?;
        f = f
            .with_extension(ext.scale, expr)
            .map_err(|e| field("extension", e))?;
    }
    let ctx = Ctx {
        body: &d.body,
        f_text: &f_text,
        f_dim: d.dim,
    };
    let kind = compile_map(&d.constraint_map, "constraint_map", &ctx)?;
    let constraint = SetValuedMap::new(domain.clone(), d.body.clone(), kind)
        .map_err(|e| field("constraint_map", e))?;
    let secondary = match &d.secondary_map {
        Some(s) => {
            let kind = compile_map(s, "secondary_map", &ctx)?;
            Some(
                SetValuedMap::new(domain.clone(), d.body.clone(), kind)
                    .map_err(|e| field("secondary_map", e))?,
            )
        }
        None => None,
    };
    for (name, value) in [
        ("h", d.parameters.h),
        ("tol_fix", d.parameters.tol_fix),
        ("tol_eq", d.parameters.tol_eq),
        ("eps", d.parameters.eps),
    ] {
        if let Some(v) = value {
            if !(v.is_finite() && v >= 0.0) || (name == "h" && v == 0.0) {
                return Err(field(
                    format!("parameters.{name}"),
                    format!("invalid value {v}"),
                ));
            }
        }
    }
    Ok(Problem {
        body: d.body.clone(),
        domain,
        f,
        constraint,
        secondary,
        descriptor,
    })
}

pub fn parse_descriptor(text: &str) -> Result<Problem, ProblemError> {
    let d: ProblemDescriptor =
        serde_json::from_str(text).map_err(|e| ProblemError::Json(e.to_string()))?;
    compile(d)
}

/// A builtin name or a path to a JSON descriptor.
pub fn load_problem(spec: &str) -> Result<Problem, ProblemError> {
    if let Some(d) = builtin(spec) {
        return compile(d);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(ProblemError::UnknownBuiltin(spec.to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io {
        path: spec.to_string(),
        message: e.to_string(),
    })?;
    parse_descriptor(&text)
}

pub const BUILTINS: &[&str] = &[
    "example-2.1-map1",
    "example-2.1-map2",
    "example-3.1-k-identity",
    "example-3.1-k-reflect",
    "example-3.2",
    "example-3.3",
    "example-3.4",
    "kyfan-linear",
    "qep-movingbox-interior",
    "qep-movingbox-boundary",
];

fn punctured_disc() -> serde_json::Value {
    json!({"type": "piecewise", "cases": [
        {"when": "x1 > 0", "map": {"type": "punctured", "base": {"type": "constant"},
            "exclusion_distance": "sqrt((y1 - cos(x1))^2 + (y2 - sin(x1))^2)"}},
        {"when": "true", "map": {"type": "constant"}}
    ]})
}

fn moving_box(name: &str, f: &str) -> serde_json::Value {
    json!({
        "name": name, "dim": 1, "body": {"type": "interval", "a": 0.0, "b": 1.0},
        "bifunction": f,
        "constraint_map": {"type": "box", "lo": ["0"], "hi": ["(x1 + 1) / 3"]},
        "extension": {"scale": 1.5},
        "parameters": {"h": 0.01}
    })
}

/// Descriptor of a builtin; `qep-movingbox` aliases the interior variant.
pub fn builtin(name: &str) -> Option<ProblemDescriptor> {
    let unit = json!({"type": "interval", "a": 0.0, "b": 1.0});
    let v = match name {
        "example-2.1-map1" => json!({
            "name": name, "dim": 1, "body": {"type": "interval", "a": 0.0, "b": 3.0},
            "bifunction": {"builtin": "zero"},
            "constraint_map": {"type": "piecewise", "cases": [
                {"when": "x1 <= 1", "map": {"type": "singleton", "coords": ["1"]}},
                {"when": "x1 < 2", "map": {"type": "punctured",
                    "base": {"type": "box", "lo": ["1"], "hi": ["2"]},
                    "exclusion_distance": "min(abs(y1 - 1), abs(y1 - 2))"}},
                {"when": "true", "map": {"type": "singleton", "coords": ["2"]}}
            ]},
            "parameters": {"h": 0.05, "eps": 0.15}
        }),
        "example-2.1-map2" => json!({
            "name": name, "dim": 1, "body": {"type": "interval", "a": 0.0, "b": 3.0},
            "bifunction": {"builtin": "zero"},
            "constraint_map": {"type": "piecewise", "cases": [
                {"when": "x1 < 1", "map": {"type": "singleton", "coords": ["1"]}},
                {"when": "x1 <= 2", "map": {"type": "box", "lo": ["1"], "hi": ["2"]}},
                {"when": "true", "map": {"type": "singleton", "coords": ["2"]}}
            ]},
            "parameters": {"h": 0.05, "eps": 0.15}
        }),
        "example-3.1-k-identity" => json!({
            "name": name, "dim": 1, "body": unit,
            "bifunction": {"builtin": "example-3.1"},
            "constraint_map": {"type": "singleton", "coords": ["x1"]},
            "parameters": {"h": 0.01}
        }),
        "example-3.1-k-reflect" => json!({
            "name": name, "dim": 1, "body": unit,
            "bifunction": {"builtin": "example-3.1"},
            "constraint_map": {"type": "singleton", "coords": ["1 - x1"]},
            "parameters": {"h": 0.01}
        }),
        "example-3.2" => json!({
            "name": name, "dim": 2,
            "body": {"type": "polytope", "vertices": [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]},
            "domain": unit,
            "bifunction": {"builtin": "zero"},
            "constraint_map": {"type": "piecewise", "cases": [
                {"when": "x1 > 0", "map": {"type": "punctured", "base": {"type": "constant"},
                    "exclusion_distance": "abs(y1 + y2 - 1) / sqrt(2)"}},
                {"when": "true", "map": {"type": "constant"}}
            ]},
            "parameters": {"h": 0.05, "eps": 0.15}
        }),
        "example-3.3" => json!({
            "name": name, "dim": 2, "body": {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
            "domain": unit,
            "bifunction": {"builtin": "zero"},
            "constraint_map": punctured_disc(),
            "parameters": {"h": 0.05, "eps": 0.15}
        }),
        "example-3.4" => json!({
            "name": name, "dim": 2, "body": {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
            "domain": unit,
            "bifunction": {"builtin": "zero"},
            "constraint_map": punctured_disc(),
            "secondary_map": {"type": "singleton", "coords": ["cos(x1)", "sin(x1)"]},
            "parameters": {"h": 0.05, "eps": 0.15}
        }),
        "kyfan-linear" => json!({
            "name": name, "dim": 1, "body": unit,
            "bifunction": {"builtin": "linear"},
            "constraint_map": {"type": "constant"},
            "extension": {"scale": 1.5},
            "parameters": {"h": 0.01}
        }),
        "qep-movingbox-interior" | "qep-movingbox" => {
            moving_box("qep-movingbox-interior", "y1 - x1")
        }
        "qep-movingbox-boundary" => moving_box(name, "x1 - y1"),
        _ => return None,
    };
    Some(serde_json::from_value(v).expect("builtin descriptors are well-formed"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn every_builtin_compiles() {
        for name in BUILTINS {
            let p = load_problem(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(p.name(), *name);
        }
        assert_eq!(
            load_problem("qep-movingbox").unwrap().name(),
            "qep-movingbox-interior"
        );
    }

    #[test]
    fn qep_flag() {
        assert!(load_problem("kyfan-linear").unwrap().qep().is_some());
        assert!(load_problem("example-3.3").unwrap().qep().is_none());
    }

    #[test]
    fn reflect_fixture() {
        let p = load_problem("example-3.1-k-reflect").unwrap();
        assert_eq!(p.body, ConvexBody::interval(0.0, 1.0));
        let x = Point(vec![0.25]);
        assert!(p.constraint.membership(&x, &Point(vec![0.75])).unwrap());
        assert_eq!(
            p.f.eval(&Point(vec![0.0]), &Point(vec![0.5])).unwrap(),
            -1.0
        );
        assert_eq!(p.f.eval(&Point(vec![0.1]), &Point(vec![0.5])).unwrap(), 0.0);
    }

    #[test]
    fn positioned_errors() {
        let mut d = builtin("kyfan-linear").unwrap();
        d.bifunction = BifunctionSpec::Text("y1 +".into());
        let e = compile(d).unwrap_err().to_string();
        assert!(e.starts_with("bifunction:"), "{e}");
        assert!(e.contains("offset 4"), "{e}");

        let mut d = builtin("example-2.1-map1").unwrap();
        if let MapSpec::Piecewise { cases } = &mut d.constraint_map {
            cases[1].when = "x1 <".into();
        }
        let e = compile(d).unwrap_err().to_string();
        assert!(e.starts_with("constraint_map.cases[1].when:"), "{e}");

        let bad = r#"{"name": "x", "dim": 2, "body": {"type": "interval", "a": 0, "b": 1},
            "bifunction": "0", "constraint_map": {"type": "constant"}}"#;
        assert!(parse_descriptor(bad)
            .unwrap_err()
            .to_string()
            .starts_with("dim:"));
        assert!(matches!(
            load_problem("no-such-problem"),
            Err(ProblemError::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn descriptor_round_trip() {
        for name in BUILTINS {
            let d = builtin(name).unwrap();
            let text = serde_json::to_string(&d).unwrap();
            let back: ProblemDescriptor = serde_json::from_str(&text).unwrap();
            assert_eq!(back, d);
        }
    }

    #[test]
    fn parameter_resolution() {
        let p = load_problem("kyfan-linear").unwrap();
        let r = p.parameters(&Parameters::default());
        assert_eq!((r.h, r.tol_fix, r.tol_eq), (0.01, 0.01, 1e-9));
        let r = p.parameters(&Parameters {
            h: Some(0.1),
            ..Parameters::default()
        });
        assert_eq!((r.h, r.tol_fix, r.eps), (0.1, 0.1, 3.0 * 0.1));
    }
}
