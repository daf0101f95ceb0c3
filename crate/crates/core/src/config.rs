//! Batch configuration: a versioned JSON document of instance blocks.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{check_dim, Point, SphericalRing};
use crate::mappings::{MappingKind, MappingSpec};
use crate::quadrature::QuadratureSpec;
use crate::verify::Verdict;
use crate::weights::{OrliczFunction, WeightField, WeightKind};

pub const SCHEMA_VERSION: u32 = 1;

/// The built-in acceptance configuration.
pub const ACCEPTANCE_CONFIG: &str = include_str!("../configs/acceptance.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiConfig {
    /// e^{rate x}
    Exp {
        #[serde(default = "one")]
        rate: f64,
    },
    /// (shift + x)^p
    Power { p: f64, #[serde(default = "one")] shift: f64 },
    Constant { c: f64 },
}

fn one() -> f64 {
    1.0
}

impl PhiConfig {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PhiConfig::Exp { rate } => (rate * x).exp(),
            PhiConfig::Power { p, shift } => (shift + x).powf(*p),
            PhiConfig::Constant { c } => *c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    RadialStretch {
        alpha: [f64; 2],
        #[serde(default = "default_family_count")]
        count: usize,
    },
    Singleton { mapping: MappingKind },
}

fn default_family_count() -> usize {
    16
}

fn default_grid() -> usize {
    crate::modulus::DEFAULT_GRID
}

fn default_atoms() -> usize {
    256
}

fn default_iterations() -> usize {
    100_000
}

fn default_radius() -> f64 {
    1.0
}

fn default_deltas() -> Vec<f64> {
    (2..=12).map(|k| 2f64.powi(-k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Operation {
    ComputeModulus {
        ring: [f64; 2],
        #[serde(default)]
        p: Option<f64>,
        #[serde(default = "default_grid")]
        grid: usize,
    },
    ComputeCapacity {
        ring: [f64; 2],
        #[serde(default = "default_grid")]
        grid: usize,
    },
    Extremal {
        phi: PhiConfig,
        alpha: f64,
        interval: [f64; 2],
        #[serde(default = "default_atoms")]
        atoms: usize,
        #[serde(default = "default_iterations")]
        iterations: usize,
    },
    Criteria { weight: WeightKind },
    Orlicz { phi: OrliczFunction },
    VerifyLower {
        mapping: MappingKind,
        #[serde(default)]
        weight: Option<WeightKind>,
        ring: [f64; 2],
    },
    VerifyRing {
        mapping: MappingKind,
        #[serde(default)]
        weight: Option<WeightKind>,
        ring: [f64; 2],
        /// Under-scaling of the default ring weight.
        #[serde(default)]
        delta: Option<f64>,
    },
    VerifyChain {
        mapping: MappingKind,
        #[serde(default)]
        weight: Option<WeightKind>,
        ring: [f64; 2],
    },
    ProbeEquicontinuity {
        family: FamilyConfig,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_deltas")]
        deltas: Vec<f64>,
        #[serde(default)]
        seed: u64,
    },
    Suite {},
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::ComputeModulus { .. } => "compute-modulus",
            Operation::ComputeCapacity { .. } => "compute-capacity",
            Operation::Extremal { .. } => "extremal",
            Operation::Criteria { .. } => "criteria",
            Operation::Orlicz { .. } => "orlicz",
            Operation::VerifyLower { .. } => "verify-lower",
            Operation::VerifyRing { .. } => "verify-ring",
            Operation::VerifyChain { .. } => "verify-chain",
            Operation::ProbeEquicontinuity { .. } => "probe-equicontinuity",
            Operation::Suite {} => "suite",
        }
    }
}

/// One block after validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub name: String,
    pub dimension: usize,
    pub center: Point,
    /// Verdict the block is expected to produce.
    pub expect: Verdict,
    pub plot: bool,
    pub op: Operation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub dimension: usize,
    pub quadrature: QuadratureSpec,
    pub blocks: Vec<Block>,
}

const COMMON_KEYS: [&str; 5] = ["name", "dimension", "center", "expect", "plot"];

fn config_err(what: impl Into<String>) -> Error {
    Error::InvalidParameter { name: "config", reason: what.into() }
}

fn take<T: serde::de::DeserializeOwned>(map: &mut Map<String, Value>, key: &str, ctx: &str) -> Result<Option<T>> {
    match map.remove(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v).map(Some).map_err(|e| config_err(format!("{ctx}: field `{key}`: {e}"))),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| config_err(format!("not valid JSON: {e}")))?;
        Self::from_value(value, true)
    }

    fn from_value(value: Value, allow_suite: bool) -> Result<Self> {
        let Value::Object(mut top) = value else {
            return Err(config_err("top level must be an object"));
        };
        let schema_version: u32 =
            take(&mut top, "schema_version", "config")?.ok_or_else(|| config_err("missing `schema_version`"))?;
        if schema_version != SCHEMA_VERSION {
            return Err(config_err(format!("unsupported schema_version {schema_version}, expected {SCHEMA_VERSION}")));
        }
        let dimension: usize = take(&mut top, "dimension", "config")?.ok_or_else(|| config_err("missing `dimension`"))?;
        check_dim(dimension)?;
        let quadrature: QuadratureSpec = take(&mut top, "quadrature", "config")?.unwrap_or_default();
        quadrature.validate()?;
        let raw_blocks: Vec<Value> = take(&mut top, "blocks", "config")?.ok_or_else(|| config_err("missing `blocks`"))?;
        if let Some(k) = top.keys().next() {
            return Err(config_err(format!("unknown top-level key `{k}`")));
        }
        let mut blocks = Vec::new();
        for (i, raw) in raw_blocks.into_iter().enumerate() {
            let block = parse_block(raw, i, dimension)?;
            if let Operation::Suite {} = block.op {
                if !allow_suite {
                    return Err(config_err("the built-in suite cannot nest itself"));
                }
                let inner = Self::from_value(serde_json::from_str(ACCEPTANCE_CONFIG).expect("embedded config"), false)?;
                blocks.extend(inner.blocks.into_iter().map(|mut b| {
                    b.name = format!("{}/{}", block.name, b.name);
                    b
                }));
            } else {
                blocks.push(block);
            }
        }
        Ok(Self { schema_version, dimension, quadrature, blocks })
    }

    pub fn acceptance() -> Self {
        Self::from_json(ACCEPTANCE_CONFIG).expect("embedded acceptance config is valid")
    }
}

fn parse_block(raw: Value, index: usize, default_dim: usize) -> Result<Block> {
    let ctx = format!("block {index}");
    let Value::Object(mut map) = raw else {
        return Err(config_err(format!("{ctx}: must be an object")));
    };
    let name: Option<String> = take(&mut map, "name", &ctx)?;
    let dimension: usize = take(&mut map, "dimension", &ctx)?.unwrap_or(default_dim);
    check_dim(dimension).map_err(|e| config_err(format!("{ctx}: {e}")))?;
    let center: Option<Vec<f64>> = take(&mut map, "center", &ctx)?;
    let center = match center {
        Some(c) => Point::new(&c).map_err(|e| config_err(format!("{ctx}: center: {e}")))?,
        None => Point::origin(dimension)?,
    };
    if center.dim() != dimension {
        return Err(config_err(format!("{ctx}: center has dimension {}, block has {dimension}", center.dim())));
    }
    let expect: Verdict = take(&mut map, "expect", &ctx)?.unwrap_or(Verdict::Holds);
    let plot: bool = take(&mut map, "plot", &ctx)?.unwrap_or(false);
    debug_assert!(COMMON_KEYS.iter().all(|k| !map.contains_key(*k)));
    let op: Operation = serde_json::from_value(Value::Object(map)).map_err(|e| config_err(format!("{ctx}: {e}")))?;
    let block = Block { name: name.unwrap_or_else(|| format!("{index:03}-{}", op.name())), dimension, center, expect, plot, op };
    validate_block(&block).map_err(|e| config_err(format!("{ctx} ({}): {e}", block.name)))?;
    Ok(block)
}

fn ring_of(block: &Block, ring: &[f64; 2]) -> Result<SphericalRing> {
    SphericalRing::new(block.center, ring[0], ring[1])
}

impl Block {
    pub fn mapping(&self, kind: &MappingKind) -> Result<MappingSpec> {
        MappingSpec::new(kind.clone(), self.center)
    }

    pub fn weight(&self, kind: &WeightKind) -> Result<WeightField> {
        WeightField::new(kind.clone(), self.center)
    }
}

fn validate_block(b: &Block) -> Result<()> {
    match &b.op {
        Operation::ComputeModulus { ring, p, grid } => {
            crate::modulus::SphereFamily::new(ring_of(b, ring)?, *p)?;
            if *grid < 2 {
                return Err(Error::param("grid", "at least two nodes"));
            }
        }
        Operation::ComputeCapacity { ring, grid } => {
            ring_of(b, ring)?;
            if *grid < 2 {
                return Err(Error::param("grid", "at least two nodes"));
            }
        }
        Operation::Extremal { alpha, interval, atoms, .. } => {
            if !(*alpha > 1.0) {
                return Err(Error::param("alpha", "must exceed 1"));
            }
            if !(interval[0] < interval[1]) || *atoms < 2 {
                return Err(Error::param("interval", "need a < b and at least two atoms"));
            }
        }
        Operation::Criteria { weight } => {
            b.weight(weight)?;
        }
        Operation::Orlicz { phi } => {
            phi.validate()?;
        }
        Operation::VerifyLower { mapping, weight, ring }
        | Operation::VerifyRing { mapping, weight, ring, .. }
        | Operation::VerifyChain { mapping, weight, ring } => {
            let f = b.mapping(mapping)?;
            ring_of(b, ring)?;
            f.image_ring(&b.center, ring[0], ring[1])?;
            if let Some(w) = weight {
                b.weight(w)?;
            }
            if let Operation::VerifyRing { delta: Some(d), weight, .. } = &b.op {
                if !(0.0..1.0).contains(d) {
                    return Err(Error::param("delta", "must lie in [0, 1)"));
                }
                if weight.is_some() {
                    return Err(Error::param("delta", "applies to the default weight only"));
                }
            }
        }
        Operation::ProbeEquicontinuity { family, radius, deltas, .. } => {
            match family {
                FamilyConfig::RadialStretch { alpha, count } => {
                    crate::verify::FamilySpec::radial_stretch(b.dimension, alpha[0], alpha[1], *count)?;
                }
                FamilyConfig::Singleton { mapping } => {
                    b.mapping(mapping)?;
                }
            }
            if !(*radius > 0.0) {
                return Err(Error::param("radius", "must be positive"));
            }
            if deltas.len() < 2 || deltas.windows(2).any(|w| !(w[1] < w[0])) || !(deltas[deltas.len() - 1] > 0.0) {
                return Err(Error::param("deltas", "need at least two positive strictly decreasing values"));
            }
        }
        Operation::Suite {} => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acceptance_config_parses() {
        let cfg = RunConfig::acceptance();
        assert!(cfg.blocks.len() > 10);
        assert!(cfg.blocks.iter().all(|b| !matches!(b.op, Operation::Suite {})));
    }

    #[test]
    fn rejects_bad_documents() {
        let cases = [
            r#"{"dimension":3,"blocks":[]}"#,
            r#"{"schema_version":2,"dimension":3,"blocks":[]}"#,
            r#"{"schema_version":1,"dimension":4,"blocks":[]}"#,
            r#"{"schema_version":1,"dimension":3,"blocks":[],"extra":1}"#,
            r#"{"schema_version":1,"dimension":3,"blocks":[{"op":"compute-capacity"}]}"#,
            r#"{"schema_version":1,"dimension":3,"blocks":[{"op":"compute-capacity","ring":[2,1]}]}"#,
            r#"{"schema_version":1,"dimension":3,"blocks":[{"op":"compute-capacity","ring":[1,2],"bogus":0}]}"#,
            r#"{"schema_version":1,"dimension":3,"blocks":[{"op":"levitate"}]}"#,
            r#"{"schema_version":1,"dimension":3,"blocks":[{"op":"verify-lower","mapping":{"kind":"linear","matrix":[[1,1,0],[0,1,0],[0,0,1]]},"ring":[1,2]}]}"#,
            r#"{"schema_version":1,"dimension":3,"blocks":[{"op":"verify-lower","mapping":{"kind":"winding_2d","k":2},"ring":[1,2]}]}"#,
            r#"{"schema_version":1,"dimension":2,"blocks":[{"op":"verify-lower","center":[0,0,0],"mapping":{"kind":"identity"},"ring":[1,2]}]}"#,
            "not json",
        ];
        for c in cases {
            assert!(RunConfig::from_json(c).is_err(), "{c}");
        }
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::from_json(
            r#"{"schema_version":1,"dimension":3,"blocks":[
                {"op":"compute-capacity","ring":[1,2]},
                {"op":"verify-lower","dimension":2,"name":"w","mapping":{"kind":"winding_2d","k":2},"ring":[0.5,1]}
            ]}"#,
        )
        .unwrap();
        assert_eq!(cfg.blocks[0].name, "000-compute-capacity");
        assert_eq!(cfg.blocks[0].op, Operation::ComputeCapacity { ring: [1.0, 2.0], grid: 512 });
        assert_eq!(cfg.blocks[1].dimension, 2);
        assert_eq!(cfg.blocks[1].center, Point::origin(2).unwrap());
        assert_eq!(cfg.blocks[1].expect, Verdict::Holds);
    }

    #[test]
    fn suite_expands_inline() {
        let cfg = RunConfig::from_json(r#"{"schema_version":1,"dimension":3,"blocks":[{"op":"suite","name":"s"}]}"#).unwrap();
        assert_eq!(cfg.blocks.len(), RunConfig::acceptance().blocks.len());
        assert!(cfg.blocks[0].name.starts_with("s/"));
    }
}
