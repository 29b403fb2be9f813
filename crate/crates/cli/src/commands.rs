use std::fs;
use std::path::Path;
use std::str::FromStr;

use roughnas::baselines::{fit_predict, BaselineKind, BaselineParams};
use roughnas::dataio::{compute_metrics, load_csv};
use roughnas::pipeline::{
    augment_raw, baseline_on_split, load_artifact, prepare, run_pipeline, search_stage, train_stages,
};
use roughnas::{ArchitectureSpec, Dataset, MetricsReport, PipelineConfig, Strategy};
use serde::{Deserialize, Serialize};

use crate::output::{csv_bytes, fmt_f64, fmt_opt, jsonl, read_numeric_csv, Staged};
use crate::{CliError, Common};

pub const SPEC_FORMAT_VERSION: u32 = 1;
pub const REPORT_FORMAT_VERSION: u32 = 1;

/// `spec.json` as written by `search`.
#[derive(Debug, Serialize, Deserialize)]
struct SpecFile {
    format_version: u32,
    spec: ArchitectureSpec,
    val_rmse: Option<f64>,
}

/// Metrics of `evaluate` and `baseline`.
#[derive(Debug, Serialize)]
struct ReportFile {
    format_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    algo: Option<&'static str>,
    #[serde(flatten)]
    report: MetricsReport,
}

fn load_config(c: &Common) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            PipelineConfig::from_json(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(t) = &c.target_column {
        cfg.target_column = Some(t.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Config, data and a manifest stub recording both.
fn setup(c: &Common, command: &str) -> Result<(PipelineConfig, Dataset, Staged), CliError> {
    let cfg = load_config(c)?;
    let data = load_csv(&c.data, cfg.target_column.as_deref())?;
    let mut st = Staged::new(command);
    st.config(&cfg);
    if let Some(p) = &c.config {
        st.input("config", p)?;
    }
    st.input("data", &c.data)?;
    Ok((cfg, data, st))
}

fn artifact_bytes(a: &roughnas::PipelineArtifact) -> Result<Vec<u8>, CliError> {
    let mut text = a.to_json()?;
    text.push('\n');
    Ok(text.into_bytes())
}

pub fn run(c: &Common) -> Result<(), CliError> {
    let (cfg, data, mut st) = setup(c, "run")?;
    let out = run_pipeline(&data, &cfg)?;
    let mut artifact = out.artifact;
    artifact.bo_trace = Some("bo_trace.jsonl".to_string());
    st.file("artifact.json", artifact_bytes(&artifact)?);
    st.json("metrics.json", &out.metrics)?;
    st.file("bo_trace.jsonl", jsonl(&out.trace)?);
    st.timings(&out.timings.entries);
    st.commit(&c.out)?;
    Ok(())
}

enum SweepParam {
    PolyOrder(Vec<usize>),
    Acquisition(Vec<Strategy>),
}

fn parse_sweep(param: &str, values: &[String], cfg: &PipelineConfig) -> Result<SweepParam, CliError> {
    match param {
        "poly_order" => values
            .iter()
            .map(|v| match v.trim().parse::<usize>() {
                Ok(p) if p >= 1 => Ok(p),
                _ => Err(CliError::config(format!("invalid poly_order value {v:?}"))),
            })
            .collect::<Result<_, _>>()
            .map(SweepParam::PolyOrder),
        "acquisition" => {
            if cfg.architecture.is_some() {
                return Err(CliError::config(
                    "acquisition sweep needs a config without a fixed architecture",
                ));
            }
            values
                .iter()
                .map(|v| Strategy::from_str(v.trim()).map_err(CliError::from))
                .collect::<Result<_, _>>()
                .map(SweepParam::Acquisition)
        }
        other => Err(CliError::config(format!(
            "unknown sweep parameter {other:?} (expected poly_order or acquisition)"
        ))),
    }
}

pub fn sweep(c: &Common, param: &str, values: &[String]) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let parsed = parse_sweep(param, values, &cfg)?;
    let (cfg, data, mut st) = setup(c, "sweep")?;
    let configs: Vec<(String, PipelineConfig)> = match parsed {
        SweepParam::PolyOrder(ps) => ps
            .into_iter()
            .map(|p| (p.to_string(), PipelineConfig { poly_order: p, ..cfg.clone() }))
            .collect(),
        SweepParam::Acquisition(ss) => ss
            .into_iter()
            .map(|s| {
                let mut v = cfg.clone();
                v.bo.strategy = s;
                (s.name().to_string(), v)
            })
            .collect(),
    };
    let mut rows = Vec::new();
    for (label, run_cfg) in &configs {
        let out = run_pipeline(&data, run_cfg)?;
        let m = out.metrics.test;
        rows.push(vec![label.clone(), fmt_opt(m.mape), fmt_f64(m.rmse), fmt_f64(m.std)]);
        let stamped: Vec<(String, f64)> =
            out.timings.entries.iter().map(|(k, v)| (format!("{param}={label}/{k}"), *v)).collect();
        st.timings(&stamped);
    }
    st.file("sweep.csv", csv_bytes(&["value", "mape", "rmse", "std"], rows)?);
    st.commit(&c.out)?;
    Ok(())
}

pub fn augment(c: &Common) -> Result<(), CliError> {
    let (cfg, data, mut st) = setup(c, "augment")?;
    let aug = augment_raw(&data, &cfg)?;
    let mut header: Vec<&str> = aug.feature_names().iter().map(String::as_str).collect();
    header.push(aug.target_name());
    let rows = aug.features().iter_rows().zip(aug.targets()).map(|(x, y)| {
        x.iter()
            .map(|v| fmt_f64(*v))
            .chain(std::iter::once(fmt_f64(*y)))
            .collect::<Vec<_>>()
    });
    st.file("augmented.csv", csv_bytes(&header, rows)?);
    st.commit(&c.out)?;
    Ok(())
}

pub fn search(c: &Common) -> Result<(), CliError> {
    let (cfg, data, mut st) = setup(c, "search")?;
    let prepared = prepare(&data, &cfg)?;
    let (spec, trace) = search_stage(&prepared.train, &prepared.val, &cfg)?;
    let val_rmse = trace
        .iter()
        .filter(|r| r.spec == Some(spec))
        .filter_map(|r| r.objective)
        .reduce(f64::min);
    st.json(
        "spec.json",
        &SpecFile {
            format_version: SPEC_FORMAT_VERSION,
            spec,
            val_rmse,
        },
    )?;
    st.file("bo_trace.jsonl", jsonl(&trace)?);
    st.commit(&c.out)?;
    Ok(())
}

fn read_spec(path: &Path) -> Result<ArchitectureSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let inner = value.get("spec").cloned().unwrap_or(value);
    let spec: ArchitectureSpec =
        serde_json::from_value(inner).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    spec.validate()
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(spec)
}

pub fn train(c: &Common, spec_path: &Path) -> Result<(), CliError> {
    let spec = read_spec(spec_path)?;
    let (cfg, data, mut st) = setup(c, "train")?;
    st.input("spec", spec_path)?;
    let prepared = prepare(&data, &cfg)?;
    let trained = train_stages(&prepared, &spec, &cfg)?;
    st.file("artifact.json", artifact_bytes(&trained.artifact)?);
    st.json("metrics.json", &trained.metrics)?;
    st.commit(&c.out)?;
    Ok(())
}

fn check_columns(expected: &[String], found: &[String], what: &str) -> Result<(), CliError> {
    if expected != found {
        return Err(CliError::data(format!(
            "{what} columns {found:?} do not match the model's features {expected:?}"
        )));
    }
    Ok(())
}

pub fn predict(artifact_path: &Path, data: &Path, out: &Path) -> Result<(), CliError> {
    let artifact = load_artifact(artifact_path)?;
    let (header, rows) = read_numeric_csv(data)?;
    check_columns(&artifact.feature_names, &header, "input")?;
    let mut st = Staged::new("predict");
    st.input("artifact", artifact_path)?;
    st.input("data", data)?;
    let preds = rows
        .iter()
        .map(|r| artifact.predict(r).map(|p| vec![fmt_f64(p)]))
        .collect::<Result<Vec<_>, _>>()?;
    st.file("predictions.csv", csv_bytes(&["prediction"], preds)?);
    st.commit(out)?;
    Ok(())
}

pub fn evaluate(artifact_path: Option<&Path>, data: &Path, out: &Path, target: Option<&str>) -> Result<(), CliError> {
    let mut st = Staged::new("evaluate");
    let report = match artifact_path {
        Some(ap) => {
            let artifact = load_artifact(ap)?;
            let d = load_csv(data, target.or(Some(artifact.target_name.as_str())))?;
            check_columns(&artifact.feature_names, d.feature_names(), "data")?;
            st.input("artifact", ap)?;
            let yhat = artifact.predict_batch(d.features())?;
            compute_metrics(d.targets(), &yhat)?
        }
        None => {
            let (header, rows) = read_numeric_csv(data)?;
            let col = |name: &str| {
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| CliError::data(format!("without --artifact the data needs columns y and yhat (missing {name})")))
            };
            let (iy, ih) = (col("y")?, col("yhat")?);
            let y: Vec<f64> = rows.iter().map(|r| r[iy]).collect();
            let yhat: Vec<f64> = rows.iter().map(|r| r[ih]).collect();
            compute_metrics(&y, &yhat)?
        }
    };
    st.input("data", data)?;
    st.json(
        "metrics.json",
        &ReportFile {
            format_version: REPORT_FORMAT_VERSION,
            algo: None,
            report,
        },
    )?;
    st.commit(out)?;
    Ok(())
}

pub fn baseline(
    c: &Common,
    algo: &str,
    test: Option<&Path>,
    lambda: Option<f64>,
    alpha: Option<f64>,
    k: Option<usize>,
) -> Result<(), CliError> {
    let kind = BaselineKind::from_str(algo)?;
    let defaults = BaselineParams::default();
    let params = BaselineParams {
        lambda: lambda.unwrap_or(defaults.lambda),
        alpha: alpha.unwrap_or(defaults.alpha),
        k: k.unwrap_or(defaults.k),
        gp_hyper: None,
    };
    let (cfg, data, mut st) = setup(c, "baseline")?;
    let report = match test {
        Some(tp) => {
            let t = load_csv(tp, Some(data.target_name()))?;
            check_columns(data.feature_names(), t.feature_names(), "test")?;
            st.input("test", tp)?;
            let yhat = fit_predict(kind, &params, data.features(), data.targets(), t.features())?;
            let rows = t
                .targets()
                .iter()
                .zip(&yhat)
                .map(|(y, p)| vec![fmt_f64(*y), fmt_f64(*p)]);
            st.file("predictions.csv", csv_bytes(&["y", "yhat"], rows)?);
            compute_metrics(t.targets(), &yhat)?
        }
        None => baseline_on_split(&data, &cfg, kind, &params)?,
    };
    st.json(
        "metrics.json",
        &ReportFile {
            format_version: REPORT_FORMAT_VERSION,
            algo: Some(kind.name()),
            report,
        },
    )?;
    st.commit(&c.out)?;
    Ok(())
}
