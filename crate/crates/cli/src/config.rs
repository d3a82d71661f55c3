//! Run configuration: a JSON document (see docs/run-config.schema.json)
//! merged with command-line flags, flags taking precedence.

use loglap::barriers::{barrier_field, kelvin_barrier_field, BarrierSpec};
use loglap::field::ScalarField;
use loglap::geometry::{Domain, DomainSpec};
use loglap::quadrature::QuadConfig;
use loglap::solver::{GridFunction, GridFunctionRecord, Grading};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// A configuration problem; always maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn cfg_err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GradingKind {
    Graded,
    Uniform,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadOverrides {
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub max_panels: Option<usize>,
    pub angular_order: Option<usize>,
}

/// Builtin fields accepted by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero {
        dim: usize,
    },
    Gaussian {
        dim: usize,
    },
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Barrier {
        dim: usize,
        zeta: Option<f64>,
    },
    KelvinBarrier {
        dim: usize,
        zeta: Option<f64>,
    },
    /// A node/value table written by `torsion` or `sublinear`.
    Grid {
        path: PathBuf,
        domain: DomainSpec,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: Option<usize>,
    pub domain: Option<DomainSpec>,
    pub field: Option<FieldSpec>,
    pub points: Option<Vec<Vec<f64>>>,
    pub n: Option<usize>,
    pub grading: Option<GradingKind>,
    pub delta_min: Option<f64>,
    pub window: Option<[f64; 2]>,
    pub mu: Option<f64>,
    pub zeta: Option<f64>,
    pub input: Option<PathBuf>,
    pub quick: Option<bool>,
    pub quadrature: Option<QuadOverrides>,
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        parse_json(&text, "config")
    }

    /// Later values win.
    pub fn overlay(mut self, o: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if o.$f.is_some() { self.$f = o.$f; } )* };
        }
        take!(dim, domain, field, points, n, grading, delta_min, window, mu, zeta, input, quick, quadrature, output, format);
        self
    }

    pub fn require_dim(&self) -> Result<usize, ConfigError> {
        match self.dim {
            Some(d) if d >= 1 => Ok(d),
            Some(d) => cfg_err(format!("dimension must be at least 1, got {d}")),
            None => cfg_err("missing --dim"),
        }
    }

    pub fn require_domain(&self) -> Result<Domain, ConfigError> {
        let spec = self.domain.as_ref().ok_or_else(|| ConfigError("missing --domain".into()))?;
        spec.build().map_err(|e| ConfigError(e.to_string()))
    }

    pub fn quad(&self, dim: usize) -> Result<QuadConfig, ConfigError> {
        let mut q = QuadConfig::for_dim(dim);
        if let Some(o) = &self.quadrature {
            if let Some(v) = o.abs_tol {
                q.abs_tol = v;
            }
            if let Some(v) = o.rel_tol {
                q.rel_tol = v;
            }
            if let Some(v) = o.max_panels {
                q.max_panels = v;
            }
            if let Some(v) = o.angular_order {
                q.angular_order = v;
            }
        }
        q.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(q)
    }

    pub fn grading(&self) -> Result<Grading, ConfigError> {
        match self.grading.unwrap_or(GradingKind::Graded) {
            GradingKind::Uniform => Ok(Grading::Uniform),
            GradingKind::Graded => {
                let d = self.delta_min.unwrap_or(Grading::DEFAULT_DELTA_MIN);
                if !(d > 0.0) {
                    return cfg_err("delta_min must be positive");
                }
                Ok(Grading::BoundaryGraded { delta_min: d })
            }
        }
    }

    pub fn window(&self) -> Result<(f64, f64), ConfigError> {
        let [lo, hi] = self.window.unwrap_or([1e-6, 1e-2]);
        if !(lo > 0.0 && lo < hi && hi <= 0.1) {
            return cfg_err("window must satisfy 0 < lo < hi <= 0.1");
        }
        Ok((lo, hi))
    }

    pub fn barrier_spec(&self, dim: usize) -> Result<BarrierSpec, ConfigError> {
        let spec = match self.zeta {
            Some(z) => BarrierSpec::new(dim, z),
            None => BarrierSpec::default_for(dim),
        };
        spec.map_err(|e| ConfigError(e.to_string()))
    }
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError(format!("{what}: {e}")))
}

/// Reads a grid function table: JSON ({nodes, values}, or a report holding
/// one under "solution") or CSV with header `node,value`.
pub fn read_record(path: &Path) -> Result<GridFunctionRecord, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "csv") {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| ConfigError(format!("grid CSV: {e}")))?;
        if header.iter().collect::<Vec<_>>() != ["node", "value"] {
            return cfg_err("grid CSV must have the header node,value");
        }
        let mut rec = GridFunctionRecord { nodes: Vec::new(), values: Vec::new() };
        for row in rd.deserialize::<(f64, f64)>() {
            let (a, b) = row.map_err(|e| ConfigError(format!("grid CSV: {e}")))?;
            rec.nodes.push(a);
            rec.values.push(b);
        }
        return Ok(rec);
    }
    let v: serde_json::Value = parse_json(&text, "grid file")?;
    let inner = v.get("solution").cloned().unwrap_or(v);
    serde_json::from_value(inner).map_err(|e| ConfigError(format!("grid file: {e}")))
}

pub fn build_field(spec: &FieldSpec) -> Result<ScalarField, ConfigError> {
    let wrap = |e: loglap::LoglapError| ConfigError(e.to_string());
    Ok(match spec {
        FieldSpec::Zero { dim } => ScalarField::zero(positive_dim(*dim)?),
        FieldSpec::Gaussian { dim } => ScalarField::gaussian(positive_dim(*dim)?),
        FieldSpec::Bump { center, radius, amplitude } => {
            if center.is_empty() || !(*radius > 0.0) || !amplitude.is_finite() {
                return cfg_err("bump needs a nonempty centre, positive radius and finite amplitude");
            }
            ScalarField::bump(center, *radius, *amplitude)
        }
        FieldSpec::Barrier { dim, zeta } => {
            let s = match zeta {
                Some(z) => BarrierSpec::new(*dim, *z),
                None => BarrierSpec::default_for(*dim),
            }
            .map_err(wrap)?;
            barrier_field(&s)
        }
        FieldSpec::KelvinBarrier { dim, zeta } => {
            let s = match zeta {
                Some(z) => BarrierSpec::new(*dim, *z),
                None => BarrierSpec::default_for(*dim),
            }
            .map_err(wrap)?;
            kelvin_barrier_field(&s).map_err(wrap)?
        }
        FieldSpec::Grid { path, domain } => {
            let d = domain.build().map_err(wrap)?;
            let rec = read_record(path)?;
            GridFunction::from_record(&d, &rec).map_err(wrap)?.to_field()
        }
    })
}

fn positive_dim(d: usize) -> Result<usize, ConfigError> {
    if d == 0 {
        return cfg_err("dimension must be at least 1");
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_json::<RunConfig>(r#"{"dim":1,"colour":2}"#, "c").is_err());
        assert!(parse_json::<FieldSpec>(r#"{"kind":"bump","center":[0],"radius":1,"width":3}"#, "f").is_err());
        let c: RunConfig = parse_json(r#"{"dim":2,"quadrature":{"abs_tol":1e-7}}"#, "c").unwrap();
        assert_eq!(c.quad(2).unwrap().abs_tol, 1e-7);
    }

    #[test]
    fn overlay_prefers_later() {
        let a = RunConfig { dim: Some(1), n: Some(33), ..Default::default() };
        let b = RunConfig { n: Some(65), ..Default::default() };
        let c = a.overlay(b);
        assert_eq!((c.dim, c.n), (Some(1), Some(65)));
    }

    #[test]
    fn field_specs_build() {
        let f: FieldSpec = parse_json(r#"{"kind":"bump","center":[0.5],"radius":0.2}"#, "f").unwrap();
        assert_eq!(build_field(&f).unwrap().value(&[0.5]), 1.0);
        assert!(build_field(&FieldSpec::Zero { dim: 0 }).is_err());
        assert!(build_field(&FieldSpec::Barrier { dim: 1, zeta: Some(0.9) }).is_err());
    }
}
