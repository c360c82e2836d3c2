//! The `fit`, `report` and `synth` pipelines behind the command line.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bayes::{fit_bayes, PosteriorMode};
use crate::design::{apply_lag, build_design, response_vector, BlockKind, ColumnRole, ModelSpec, ResponseTransform};
use crate::error::{Error, Result};
use crate::freq::{f_test_block, fit_constrained_ols, t_test_coef};
use crate::glm::fit_zinb;
use crate::interpret::{elasticity_report, render_text, CoefficientSource, CoefficientTable};
use crate::io::config::{Backend, RunConfig};
use crate::io::data::{load_csv, write_csv};
use crate::io::output::{coefficients_csv, coefficients_text, sha256_hex, to_json, CoefficientRow};
use crate::io::synth::{synth_generate, SynthSpec};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Not recorded in manifests, so runs into different directories match.
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    pub backend: Option<Backend>,
}

/// Where a run wrote its files, in the order written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

fn config_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads the configuration and applies overrides. Relative paths inside the
/// file resolve against its directory; `--out-dir` is taken as given.
fn load_config(config_path: &Path, ov: &Overrides) -> Result<(RunConfig, Vec<u8>, PathBuf)> {
    let (mut config, bytes) = RunConfig::load(config_path)?;
    if let Some(seed) = ov.seed {
        config.seed = seed;
    }
    if let Some(backend) = ov.backend {
        config.backend = backend;
    }
    config.validate()?;
    let out_dir = match &ov.out_dir {
        Some(d) => d.clone(),
        None => resolve(&config_dir(config_path), &config.output.dir),
    };
    Ok((config, bytes, out_dir))
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: PathBuf) -> Result<Writer> {
        fs::create_dir_all(&dir)?;
        Ok(Writer { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(self) -> RunOutcome {
        RunOutcome {
            out_dir: self.dir,
            files: self.files,
        }
    }
}

fn rows_from(source: &dyn CoefficientSource, p_values: Option<&[Option<f64>]>) -> Vec<CoefficientRow> {
    let meta = source.meta();
    let est = source.estimates();
    let sd = source.sd();
    let prob = source.sign_prob();
    meta.column_roles
        .iter()
        .enumerate()
        .map(|(i, role)| CoefficientRow {
            term: role.label(&meta.spec.part_names),
            role: *role,
            estimate: est[i],
            sd: sd.as_ref().map(|s| s[i]),
            sign_prob: prob.as_ref().map(|p| p[i]),
            p_value: p_values.and_then(|p| p[i]),
        })
        .collect()
}

fn has_log_scale(spec: &ModelSpec, backend: Backend) -> bool {
    backend == Backend::Zinb || spec.response_transform == ResponseTransform::Log
}

/// Writes the elasticity report, or returns why it does not apply.
fn write_elasticity(w: &mut Writer, source: &dyn CoefficientSource, config: &RunConfig) -> Result<Value> {
    match elasticity_report(source, &config.report_options()) {
        Ok(report) => {
            w.write("elasticity.json", &to_json(&report)?)?;
            w.write("elasticity.txt", &render_text(&report))?;
            Ok(json!({ "written": true }))
        }
        Err(Error::NotLogScale) => Ok(json!({
            "written": false,
            "reason": "identity response: coefficients are level effects on y, not elasticities",
        })),
        Err(e) => Err(e),
    }
}

/// `fit`: load, lag, design, fit, report.
pub fn run_fit(config_path: &Path, ov: &Overrides) -> Result<RunOutcome> {
    let (config, bytes, out_dir) = load_config(config_path, ov)?;
    let input = config
        .input
        .as_ref()
        .map(|p| resolve(&config_dir(config_path), p))
        .ok_or_else(|| Error::Config("input is required for fit".into()))?;
    let input_bytes = fs::read(&input)?;
    let loaded = load_csv(&input, &config.columns)?;
    let data = apply_lag(&loaded, config.lag)?;
    let spec = config.model_spec();
    let x = build_design(&data, &spec)?;
    let y = response_vector(&data, &spec)?;

    let mut w = Writer::new(out_dir)?;
    let title = format!("{} fit, n = {}", config.backend.name(), data.len());
    let mut footer = vec![format!(
        "rows used {}, dropped for missing values {}",
        data.len(),
        loaded.dropped_rows
    )];
    if loaded.len() != data.len() {
        footer.push(format!(
            "rows without a lag-{} predecessor {}",
            config.lag,
            loaded.len() - data.len()
        ));
    }

    let (fit_info, elasticity) = match config.backend {
        Backend::Freq => {
            let fit = fit_constrained_ols(&x, &y)?;
            let p_values: Vec<Option<f64>> = fit
                .design_meta
                .column_roles
                .iter()
                .map(|r| t_test_coef(&fit, *r).ok().map(|t| t.p_value))
                .collect();
            let mut tests = Vec::new();
            for kind in [BlockKind::Comp, BlockKind::Interaction] {
                if x.block_columns(kind).is_some() {
                    let t = f_test_block(&fit, &y, &x, kind)?;
                    footer.push(format!(
                        "{}: F = {:.3}, p = {:.3}",
                        t.hypothesis, t.statistic, t.p_value
                    ));
                    tests.push(t);
                }
            }
            footer.push(format!("residual df {}, sigma^2 {:.4}", fit.df_resid, fit.sigma2_hat));
            let rows = rows_from(&fit, Some(&p_values));
            w.write("coefficients.csv", &coefficients_csv(&rows))?;
            w.write("coefficients.txt", &coefficients_text(&title, &rows, &spec, &footer))?;
            let info = json!({
                "sigma2_hat": fit.sigma2_hat,
                "df_resid": fit.df_resid,
                "rss": fit.rss,
                "block_tests": tests,
            });
            (info, write_elasticity(&mut w, &fit, &config)?)
        }
        Backend::BayesSoft | Backend::BayesHard => {
            let prior = config.prior_spec();
            let sampler = config.sampler_config();
            let post = fit_bayes(&x, &y, &prior, &sampler)?;
            let max_rhat = post
                .rhat
                .as_ref()
                .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            match post.mode {
                PosteriorMode::Analytic => footer.push("posterior: closed form (normal-inverse-gamma)".into()),
                PosteriorMode::Sampled => footer.push(format!(
                    "posterior: {} chains x {} draws after {} burn-in, max split R-hat {:.3}",
                    sampler.chains,
                    sampler.draws,
                    sampler.burn_in,
                    max_rhat.unwrap_or(f64::NAN)
                )),
            }
            footer.push(format!("posterior mean sigma^2 {:.4}", post.sigma2_mean));
            let rows = rows_from(&post, None);
            w.write("coefficients.csv", &coefficients_csv(&rows))?;
            w.write("coefficients.txt", &coefficients_text(&title, &rows, &spec, &footer))?;
            let info = json!({
                "posterior_mode": post.mode,
                "sigma2_mean": post.sigma2_mean,
                "rhat": post.rhat.as_ref().map(|r| r.iter().copied().collect::<Vec<_>>()),
                "max_rhat": max_rhat,
                "prior": prior,
                "sampler": sampler,
            });
            (info, write_elasticity(&mut w, &post, &config)?)
        }
        Backend::Zinb => {
            let opts = config.zinb_options();
            let fit = fit_zinb(&data, &spec, &opts)?;
            footer.push(format!(
                "theta {:.3}, pi {:.3}, log-likelihood {:.3}",
                fit.params.theta(),
                fit.params.pi(),
                fit.loglik
            ));
            footer.push(format!(
                "optimizer: {} iterations, gradient norm {:.2e}",
                fit.iterations, fit.grad_norm
            ));
            let rows = rows_from(&fit, None);
            w.write("coefficients.csv", &coefficients_csv(&rows))?;
            w.write("coefficients.txt", &coefficients_text(&title, &rows, &spec, &footer))?;
            let se = fit.std_errors();
            let p = fit.params.beta.len();
            let info = json!({
                "theta": fit.params.theta(),
                "pi": fit.params.pi(),
                "log_theta": fit.params.log_theta,
                "logit_pi": fit.params.logit_pi,
                "se_log_theta": se[p],
                "se_logit_pi": se[p + 1],
                "loglik": fit.loglik,
                "objective": fit.objective,
                "converged": fit.converged,
                "iterations": fit.iterations,
                "grad_norm": fit.grad_norm,
                "restart_objectives": fit.restart_objectives,
                "options": opts,
            });
            (info, write_elasticity(&mut w, &fit, &config)?)
        }
    };

    let manifest = json!({
        "tool": TOOL,
        "versions": { TOOL: VERSION },
        "command": "fit",
        "config_sha256": sha256_hex(&bytes),
        "input_sha256": sha256_hex(&input_bytes),
        "seed": config.seed,
        "backend": config.backend.name(),
        "overrides": ov,
        "config": resolved_config(&config),
        "data": {
            "rows_read": loaded.len() + loaded.dropped_rows,
            "rows_dropped_missing": loaded.dropped_rows,
            "rows_dropped_lag": loaded.len() - data.len(),
            "rows_used": data.len(),
            "parts": data.parts(),
        },
        "design": {
            "columns": x.labels(),
            "constraint_blocks": x.constraint_blocks,
            "centers": x.centers,
        },
        "fit": fit_info,
        "elasticity": elasticity,
        "log_scale": has_log_scale(&spec, config.backend),
    });
    let mut files = w.files.clone();
    files.push("manifest.json".into());
    let mut manifest = manifest;
    manifest["outputs"] = json!(files);
    w.write("manifest.json", &to_json(&manifest)?)?;
    Ok(w.finish())
}

/// The configuration with every default filled in, plus the fully resolved
/// backend settings.
fn resolved_config(config: &RunConfig) -> Value {
    let d = config.columns.parts.len();
    json!({
        "bayes_soft_variance_per_block": config.prior_spec().soft_variance_for(d),
        "zinb_soft_variance_per_block": config.zinb.soft_variance.unwrap_or(0.001 * d as f64),
        "file": config,
        "model_spec": config.model_spec(),
        "prior_spec": config.prior_spec(),
        "sampler_config": config.sampler_config(),
        "zinb_options": config.zinb_options(),
        "report_options": config.report_options(),
    })
}

/// Reads a `coefficients.csv` written by `fit` (or by hand) into a table.
pub fn read_coefficients(path: &Path, spec: &ModelSpec, log_link: bool) -> Result<CoefficientTable> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let term = col("term").ok_or_else(|| Error::MissingColumn("term".into()))?;
    let estimate = col("estimate").ok_or_else(|| Error::MissingColumn("estimate".into()))?;
    let (sd_col, prob_col) = (col("sd"), col("sign_prob"));

    let mut est = Vec::new();
    let mut sds = Vec::new();
    let mut probs = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let label = &record[term];
        let role =
            ColumnRole::parse_label(label, &spec.part_names).ok_or_else(|| Error::UnknownColumn(label.to_string()))?;
        let number = |c: usize| -> Result<Option<f64>> {
            let raw = record.get(c).unwrap_or("").trim();
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                row,
                column: headers[c].to_string(),
                value: raw.to_string(),
            })
        };
        let value = number(estimate)?.ok_or_else(|| Error::Parse {
            row,
            column: "estimate".into(),
            value: String::new(),
        })?;
        est.push((role, value));
        if let Some(v) = sd_col.map(number).transpose()?.flatten() {
            sds.push((role, v));
        }
        if let Some(v) = prob_col.map(number).transpose()?.flatten() {
            probs.push((role, v));
        }
    }
    let mut table = CoefficientTable::new(spec, &est)?;
    if !probs.is_empty() {
        table = table.with_sign_prob(&probs)?;
    }
    if !sds.is_empty() {
        let mut sd = DVector::from_element(table.estimates.len(), f64::NAN);
        for (role, v) in sds {
            let i = table
                .meta
                .column_index(role)
                .expect("role checked by CoefficientTable::new");
            sd[i] = v;
        }
        table.sd = Some(sd);
    }
    table.log_link = log_link;
    Ok(table)
}

/// `report`: rebuilds the elasticity report from a coefficient table,
/// by default `coefficients.csv` in the output directory.
pub fn run_report(config_path: &Path, coefficients: Option<&Path>, ov: &Overrides) -> Result<RunOutcome> {
    let (config, bytes, out_dir) = load_config(config_path, ov)?;
    let source = match coefficients {
        Some(p) => p.to_path_buf(),
        None => out_dir.join("coefficients.csv"),
    };
    let spec = config.model_spec();
    let table = read_coefficients(&source, &spec, config.backend == Backend::Zinb)?;
    let report = elasticity_report(&table, &config.report_options())?;
    let mut w = Writer::new(out_dir)?;
    w.write("elasticity.json", &to_json(&report)?)?;
    w.write("elasticity.txt", &render_text(&report))?;
    let manifest = json!({
        "tool": TOOL,
        "versions": { TOOL: VERSION },
        "command": "report",
        "config_sha256": sha256_hex(&bytes),
        "coefficients_sha256": sha256_hex(&fs::read(&source)?),
        "backend": config.backend.name(),
        "config": resolved_config(&config),
        "outputs": ["elasticity.json", "elasticity.txt", "report_manifest.json"],
    });
    w.write("report_manifest.json", &to_json(&manifest)?)?;
    Ok(w.finish())
}

/// `synth`: generates `data.csv` and `truth.json` from a synthetic spec.
/// Without `--out-dir` the files go next to the synthetic-data spec.
pub fn run_synth(spec_path: &Path, ov: &Overrides) -> Result<RunOutcome> {
    let bytes = fs::read(spec_path)?;
    let mut spec: SynthSpec = serde_json::from_slice(&bytes).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(seed) = ov.seed {
        spec.seed = seed;
    }
    let (data, truth) = synth_generate(&spec)?;
    for warning in &truth.warnings {
        eprintln!("warning: {warning}");
    }
    let out_dir = ov.out_dir.clone().unwrap_or_else(|| config_dir(spec_path));
    let mut w = Writer::new(out_dir)?;
    let mapping = spec.column_mapping();
    let counts = matches!(spec.law, crate::io::synth::ResponseLaw::Zinb { .. });
    write_csv(&w.dir.join("data.csv"), &data, &mapping, counts)?;
    w.files.push("data.csv".into());
    w.write("truth.json", &to_json(&truth)?)?;
    let manifest = json!({
        "tool": TOOL,
        "versions": { TOOL: VERSION },
        "command": "synth",
        "spec_sha256": sha256_hex(&bytes),
        "seed": spec.seed,
        "rows": data.len(),
        "columns": mapping,
        "outputs": ["data.csv", "truth.json", "synth_manifest.json"],
    });
    w.write("synth_manifest.json", &to_json(&manifest)?)?;
    Ok(w.finish())
}
