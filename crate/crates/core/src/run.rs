//! Block execution and report emission for the batch front-end.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Block, FamilyConfig, Operation, RunConfig};
use crate::error::{Error, Result};
use crate::extremal::{extremal_value_values, oracle_min_values, MeasureSpace, ORACLE_ACCEPT_RESIDUAL};
use crate::geometry::{Condenser, SphericalRing};
use crate::modulus::{
    hesse_duality_check, ring_capacity, ring_capacity_oracle, separating_modulus, sphere_family_modulus,
    sphere_family_modulus_oracle, sphere_family_modulus_quadrature, ziemer_duality_check, SphereFamily,
};
use crate::quadrature::{DivergenceKind, QuadratureSpec};
use crate::verify::{
    check_lower_q, check_main_lemma_chain, check_ring_q, equicontinuity_probe, lower_q_weight, FamilySpec, Instance,
    Tolerance, Verdict, VerificationReport,
};
use crate::weights::{equicontinuity_criteria, orlicz_condition, profile_table, WeightField, CRITERIA_WINDOW};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTATION: i32 = 3;
pub const EXIT_VIOLATED: i32 = 4;

/// Relative tolerance when an oracle value takes part in a comparison.
pub const ORACLE_TOL: f64 = 1e-3;
/// Closed form against quadrature of the same quantity.
pub const QUADRATURE_TOL: f64 = 1e-6;
/// Slack allowed below the closed form for oracle infima.
pub const ORACLE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Violated,
    Inconclusive,
    /// A computation without an inequality attached.
    Computed,
    Failed,
}

impl From<Verdict> for Status {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Holds => Status::Holds,
            Verdict::Violated => Status::Violated,
            Verdict::Inconclusive => Status::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockRecord {
    pub index: usize,
    pub name: String,
    pub op: String,
    pub status: Status,
    pub expected: Verdict,
    pub expectation_met: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<VerificationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub dimension: usize,
    pub records: Vec<BlockRecord>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.records.iter().any(|r| r.status == Status::Failed) {
            EXIT_COMPUTATION
        } else if self.records.iter().any(|r| !r.expectation_met) {
            EXIT_VIOLATED
        } else {
            EXIT_OK
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 or 1 runs sequentially.
    pub parallel: usize,
    /// Replaces the quadrature relative tolerance of every block.
    pub tol_override: Option<f64>,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub runtimes: Vec<f64>,
    pub plots: Vec<(usize, Vec<[f64; 3]>)>,
}

struct BlockOutput {
    status: Status,
    report: Option<VerificationReport>,
    details: Option<Value>,
    plot: Option<Vec<[f64; 3]>>,
}

impl BlockOutput {
    fn verified(report: VerificationReport) -> Self {
        Self { status: report.verdict.into(), report: Some(report), details: None, plot: None }
    }
}

fn details<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("details serialise")
}

/// Comparison of a closed form with a numeric value of the same quantity.
fn compare(check: &str, instance: Instance, closed: f64, numeric: f64, tol: f64, floor: Option<f64>) -> VerificationReport {
    let gap = (numeric - closed).abs() / closed.abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
    let above = floor.is_none_or(|f| numeric >= closed - f);
    VerificationReport {
        check: check.into(),
        instance,
        lhs: closed,
        rhs: numeric,
        slack: numeric - closed,
        slack_ratio: Some(numeric / closed),
        tolerance: Tolerance::Relative(tol),
        verdict: if gap <= tol && above { Verdict::Holds } else { Verdict::Violated },
        sub_reports: Vec::new(),
    }
}

fn ring_instance(ring: &SphericalRing) -> Instance {
    Instance {
        dimension: ring.dim(),
        ring: Some([ring.r_inner(), ring.r_outer()]),
        center: Some(ring.center()),
        ..Instance::default()
    }
}

fn plot_radii(a: f64, b: f64) -> Vec<f64> {
    (0..=32).map(|i| a * (b / a).powf(i as f64 / 32.0)).collect()
}

fn maybe_plot(block: &Block, q: &WeightField, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Option<Vec<[f64; 3]>>> {
    if !block.plot {
        return Ok(None);
    }
    profile_table(q, &block.center, &plot_radii(a, b), spec).map(Some)
}

fn execute_block(block: &Block, spec: &QuadratureSpec) -> Result<BlockOutput> {
    let c = block.center;
    let n = block.dimension;
    match &block.op {
        Operation::ComputeModulus { ring, p, grid } => {
            let ring = SphericalRing::new(c, ring[0], ring[1])?;
            let fam = SphereFamily::new(ring, *p)?;
            let closed = sphere_family_modulus(&fam).value;
            let quad = sphere_family_modulus_quadrature(&fam, spec)?.value;
            let oracle = sphere_family_modulus_oracle(&fam, *grid, None)?.value;
            let q = compare("sphere_family_quadrature", ring_instance(&ring), closed, quad, QUADRATURE_TOL, None);
            let mut r = compare("sphere_family_modulus", ring_instance(&ring), closed, oracle, ORACLE_TOL, Some(ORACLE_FLOOR));
            r.verdict = Verdict::all([r.verdict, q.verdict]);
            r.sub_reports.push(q);
            Ok(BlockOutput::verified(r))
        }
        Operation::ComputeCapacity { ring, grid } => {
            let cond = Condenser::new(SphericalRing::new(c, ring[0], ring[1])?);
            let closed = ring_capacity(&cond).value;
            let oracle = ring_capacity_oracle(&cond, *grid)?.value;
            let mut r = compare("ring_capacity", ring_instance(&cond.ring), closed, oracle, ORACLE_TOL, Some(ORACLE_FLOOR));
            let z = ziemer_duality_check(&cond, *grid)?;
            let h = hesse_duality_check(&cond, spec)?;
            let product = closed * separating_modulus(&cond).value.powi(n as i32 - 1);
            let mut p = compare("capacity_separating_product", ring_instance(&cond.ring), 1.0, product, 1e-9, None);
            p.tolerance = Tolerance::Additive(1e-9);
            p.verdict = if (product - 1.0).abs() <= 1e-9 { Verdict::Holds } else { Verdict::Violated };
            r.verdict = Verdict::all([r.verdict, z.verdict, h.verdict, p.verdict]);
            r.sub_reports.extend([z, h, p]);
            Ok(BlockOutput::verified(r))
        }
        Operation::Extremal { phi, alpha, interval, atoms, iterations } => {
            let space = MeasureSpace::gauss_legendre(interval[0], interval[1], *atoms)?;
            let values = space.sample(|x| phi.eval(x));
            let closed = extremal_value_values(&space, &values, *alpha)?;
            let out = oracle_min_values(&values, *alpha, &space, *iterations)?;
            if !(out.residual <= ORACLE_ACCEPT_RESIDUAL) {
                return Err(Error::NonConvergence(format!("extremal oracle residual {:e}", out.residual)));
            }
            let instance = Instance { dimension: n, ..Instance::default() };
            let mut r = compare("extremal_value", instance, closed, out.value, ORACLE_TOL, Some(ORACLE_FLOOR));
            r.instance.weight = Some(serde_json::to_string(phi).expect("phi serialises"));
            let mut out_block = BlockOutput::verified(r);
            out_block.details = Some(serde_json::json!({
                "oracle_residual": out.residual,
                "oracle_iterations": out.iterations,
                "atoms": atoms,
            }));
            Ok(out_block)
        }
        Operation::Criteria { weight } => {
            let q = block.weight(weight)?;
            let report = equicontinuity_criteria(&q, &c, n, spec)?;
            let plot = maybe_plot(block, &q, 1e-3, CRITERIA_WINDOW, spec)?;
            Ok(BlockOutput { status: Status::Computed, report: None, details: Some(details(&report)), plot })
        }
        Operation::Orlicz { phi } => {
            let v = orlicz_condition(phi, n, spec)?;
            let status = match v.kind {
                DivergenceKind::Convergent { .. } => Status::Holds,
                DivergenceKind::Divergent => Status::Violated,
                DivergenceKind::Inconclusive => Status::Inconclusive,
            };
            Ok(BlockOutput { status, report: None, details: Some(details(&v)), plot: None })
        }
        Operation::VerifyLower { mapping, weight, ring } => {
            let f = block.mapping(mapping)?;
            let sr = SphericalRing::new(c, ring[0], ring[1])?;
            let q = match weight {
                Some(w) => block.weight(w)?,
                None => lower_q_weight(&f, &sr, 0)?,
            };
            let mut out = BlockOutput::verified(check_lower_q(&f, &q, &c, ring[0], ring[1], spec)?);
            out.plot = maybe_plot(block, &q, ring[0], ring[1], spec)?;
            Ok(out)
        }
        Operation::VerifyRing { mapping, weight, ring, delta } => {
            let f = block.mapping(mapping)?;
            let sr = SphericalRing::new(c, ring[0], ring[1])?;
            let q = match weight {
                Some(w) => block.weight(w)?,
                None => lower_q_weight(&f, &sr, 0)?.powf(n as f64 - 1.0)?.scaled(1.0 - delta.unwrap_or(0.0))?,
            };
            let mut out = BlockOutput::verified(check_ring_q(&f, &q, &c, ring[0], ring[1], spec)?);
            out.plot = maybe_plot(block, &q, ring[0], ring[1], spec)?;
            Ok(out)
        }
        Operation::VerifyChain { mapping, weight, ring } => {
            let f = block.mapping(mapping)?;
            let sr = SphericalRing::new(c, ring[0], ring[1])?;
            let q = match weight {
                Some(w) => block.weight(w)?,
                None => lower_q_weight(&f, &sr, 0)?,
            };
            let mut out = BlockOutput::verified(check_main_lemma_chain(&f, &q, &c, (ring[0], ring[1]), spec)?);
            out.plot = maybe_plot(block, &q, ring[0], ring[1], spec)?;
            Ok(out)
        }
        Operation::ProbeEquicontinuity { family, radius, deltas, seed } => {
            let fam = match family {
                FamilyConfig::RadialStretch { alpha, count } => FamilySpec::radial_stretch(n, alpha[0], alpha[1], *count)?,
                FamilyConfig::Singleton { mapping } => FamilySpec::singleton(block.mapping(mapping)?),
            };
            let report = equicontinuity_probe(&fam, &c, *radius, deltas, *seed)?;
            Ok(BlockOutput { status: report.verdict.into(), report: None, details: Some(details(&report)), plot: None })
        }
        Operation::Suite {} => Err(Error::NotApplicable("suite blocks are expanded at parse time".into())),
    }
}

fn expectation_met(status: Status, expected: Verdict) -> bool {
    match status {
        Status::Computed => true,
        Status::Failed => false,
        s => s == Status::from(expected),
    }
}

/// Runs every block; records follow config order regardless of scheduling.
pub fn execute(config: &RunConfig, options: &RunOptions) -> Result<RunOutcome> {
    let mut spec = config.quadrature;
    if let Some(t) = options.tol_override {
        spec.rel_tol = t;
        spec.validate()?;
    }
    let run_one = |(index, block): (usize, &Block)| {
        let start = Instant::now();
        let result = execute_block(block, &spec);
        let elapsed = start.elapsed().as_secs_f64();
        let (record, plot) = match result {
            Ok(out) => (
                BlockRecord {
                    index,
                    name: block.name.clone(),
                    op: block.op.name().into(),
                    status: out.status,
                    expected: block.expect,
                    expectation_met: expectation_met(out.status, block.expect),
                    report: out.report,
                    details: out.details,
                    error: None,
                },
                out.plot,
            ),
            Err(e) => (
                BlockRecord {
                    index,
                    name: block.name.clone(),
                    op: block.op.name().into(),
                    status: Status::Failed,
                    expected: block.expect,
                    expectation_met: false,
                    report: None,
                    details: None,
                    error: Some(e.to_string()),
                },
                None,
            ),
        };
        (record, plot, elapsed)
    };
    let results: Vec<_> = if options.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.parallel)
            .build()
            .map_err(|e| Error::param("parallel", e.to_string()))?;
        pool.install(|| config.blocks.par_iter().enumerate().map(run_one).collect())
    } else {
        config.blocks.iter().enumerate().map(run_one).collect()
    };
    let mut records = Vec::with_capacity(results.len());
    let mut runtimes = Vec::with_capacity(results.len());
    let mut plots = Vec::new();
    for (record, plot, t) in results {
        if let Some(p) = plot {
            plots.push((record.index, p));
        }
        records.push(record);
        runtimes.push(t);
    }
    Ok(RunOutcome {
        report: RunReport {
            schema_version: config.schema_version,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            dimension: config.dimension,
            records,
        },
        runtimes,
        plots,
    })
}

/// Scientific notation with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn csv_table(outcome: &RunOutcome) -> Result<String> {
    let io = |e: csv::Error| Error::NonConvergence(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "name", "op", "check", "lhs", "rhs", "slack", "slack_ratio", "status", "runtime_s"])
        .map_err(io)?;
    for (rec, t) in outcome.report.records.iter().zip(&outcome.runtimes) {
        let r = rec.report.as_ref();
        w.write_record([
            rec.index.to_string(),
            rec.name.clone(),
            rec.op.clone(),
            r.map(|r| r.check.clone()).unwrap_or_default(),
            opt_float(r.map(|r| r.lhs)),
            opt_float(r.map(|r| r.rhs)),
            opt_float(r.map(|r| r.slack)),
            opt_float(r.and_then(|r| r.slack_ratio)),
            serde_json::to_value(rec.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            fmt_float(*t),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::NonConvergence(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    tool_version: &'a str,
    started_unix_s: f64,
    runtimes_s: Vec<(&'a str, f64)>,
    exit_code: i32,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::NonConvergence(format!("writing {}: {e}", path.display()))
}

/// Writes report.json, report.csv, metadata.json and any plot tables; returns the paths.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path, started: SystemTime) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| io_err(&p, e))?;
        written.push(p);
        Ok(())
    };
    put("report.json".into(), outcome.report.to_json())?;
    put("report.csv".into(), csv_table(outcome)?)?;
    let meta = Metadata {
        tool_version: &outcome.report.tool_version,
        started_unix_s: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        runtimes_s: outcome.report.records.iter().map(|r| r.name.as_str()).zip(outcome.runtimes.iter().copied()).collect(),
        exit_code: outcome.report.exit_code(),
    };
    put("metadata.json".into(), serde_json::to_string_pretty(&meta).expect("metadata serialises") + "\n")?;
    for (index, rows) in &outcome.plots {
        let mut body = String::from("# r\tq(r)\tnorm(r)\n");
        for [r, q, m] in rows {
            body.push_str(&format!("{}\t{}\t{}\n", fmt_float(*r), fmt_float(*q), fmt_float(*m)));
        }
        put(format!("plot_{index:03}.tsv"), body)?;
    }
    Ok(written)
}

/// Human readable summary, one line per block.
pub fn summary(outcome: &RunOutcome) -> String {
    let mut s = String::new();
    for rec in &outcome.report.records {
        let status = serde_json::to_value(rec.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let mark = if rec.expectation_met { "ok  " } else { "FAIL" };
        let nums = match &rec.report {
            Some(r) => format!("lhs={:.9e} rhs={:.9e} slack={:.3e}", r.lhs, r.rhs, r.slack),
            None => String::new(),
        };
        let err = rec.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default();
        s.push_str(&format!("{mark} {:<40} {:<22} {:<12} {nums}{err}\n", rec.name, rec.op, status));
    }
    s
}
