//! The four subcommands.

use std::fmt::Write as _;

use ife_core::fmt::{dec2, sig6};
use ife_core::montecarlo::{calibrate, run_design, synthetic_lfp, Design, DesignKind, Method};
use ife_core::neyman_scott::{ns_experiment, write_histogram_csv, AlphaRule, NsDesign};
use ife_core::{
    bc_hn, draw_shocks, fit_fe, hbc, load_panel, solve_ife, Family, FeFit, FeOptions, IfeOptions, PanelData,
    Schema,
};
use serde_json::{json, Value};

use crate::config::{CorrectMethod, RunConfig};
use crate::output::{present, Sink};
use crate::CliError;

/// Value of `--data` that selects the built-in synthetic labour-force panel.
pub const SYNTHETIC_DATA: &str = "synthetic";

struct Loaded {
    panel: PanelData<f64>,
    family: Family,
    opts: FeOptions<f64>,
}

fn load(config: &RunConfig) -> Result<Loaded, CliError> {
    let data = config.require_data()?;
    let mut schema = match &config.schema {
        Some(path) => Schema::load(path)?,
        None => match config.family {
            Some(f) => Schema::new(f),
            None => return Err(CliError::Input("missing --schema or --family".into())),
        },
    };
    if let Some(f) = config.family {
        schema.family = f;
    }
    let panel = load_panel::<f64>(data, &schema)?;
    let opts = FeOptions::default().with_alpha_bound(schema.alpha_bound);
    Ok(Loaded { panel, family: schema.family, opts })
}

fn coefficient_names(panel: &PanelData<f64>, family: Family) -> Vec<String> {
    if family.has_index() {
        panel.column_names().to_vec()
    } else {
        vec!["variance".into()]
    }
}

fn fe_meta(panel: &PanelData<f64>, fit: &FeFit<f64>) -> Vec<(&'static str, Value)> {
    vec![
        ("family", fit.family.name().into()),
        ("n", panel.n().into()),
        ("T", panel.periods_len().into()),
        ("dropped", fit.dropped.len().into()),
        ("loglik", json!(fit.loglik)),
        ("iterations", fit.trace.iterations.into()),
        ("fe_converged", fit.trace.converged.into()),
    ]
}

struct Row<'a> {
    estimator: String,
    theta: &'a [f64],
    se: &'a [f64],
}

fn long_table(names: &[String], rows: &[Row<'_>], with_estimator: bool) -> String {
    let mut s = String::from(if with_estimator { "estimator,name,estimate,se\n" } else { "name,estimate,se\n" });
    for row in rows {
        for (k, name) in names.iter().enumerate() {
            if with_estimator {
                let _ = write!(s, "{},", row.estimator);
            }
            let _ = writeln!(s, "{name},{},{}", sig6(row.theta[k]), sig6(row.se[k]));
        }
    }
    s
}

fn rows_json(names: &[String], rows: &[Row<'_>]) -> Value {
    Value::Array(
        rows.iter()
            .flat_map(|row| {
                names.iter().enumerate().map(move |(k, name)| {
                    json!({"estimator": row.estimator, "name": name, "estimate": row.theta[k], "se": row.se[k]})
                })
            })
            .collect(),
    )
}

/// Estimators as rows, coefficients as columns, standard errors in
/// parentheses beneath each estimate.
fn wide_table(names: &[String], rows: &[Row<'_>]) -> String {
    let w = names.iter().map(|n| n.len()).max().unwrap_or(0).max(9);
    let lw = rows.iter().map(|r| r.estimator.len()).max().unwrap_or(0).max(9);
    let mut s = format!("{:<lw$}", "");
    for n in names {
        let _ = write!(s, " {n:>w$}");
    }
    s.push('\n');
    for row in rows {
        let _ = write!(s, "{:<lw$}", row.estimator);
        for v in row.theta {
            let _ = write!(s, " {:>w$}", dec2(*v));
        }
        let _ = write!(s, "\n{:<lw$}", "");
        for v in row.se {
            let _ = write!(s, " {:>w$}", format!("({})", dec2(*v)));
        }
        s.push('\n');
    }
    s
}

pub fn fit(config: &RunConfig) -> Result<(), CliError> {
    let Loaded { panel, family, opts } = load(config)?;
    let fit = fit_fe(&panel, family, &opts)?;
    let names = coefficient_names(&panel, family);
    let rows = [Row { estimator: "fe".into(), theta: &fit.theta_hat, se: &fit.se }];
    let sink = Sink::new(config)?;
    sink.emit("fit", &fe_meta(&panel, &fit), &long_table(&names, &rows, false), rows_json(&names, &rows))?;
    let mut text = wide_table(&names, &rows);
    let _ = writeln!(
        text,
        "n = {}, T = {}, dropped = {}, loglik = {}",
        panel.n(),
        panel.periods_len(),
        fit.dropped.len(),
        sig6(fit.loglik)
    );
    present(&sink, &text);
    Ok(())
}

pub fn correct(config: &RunConfig) -> Result<(), CliError> {
    let method = config.method.ok_or_else(|| CliError::Input("missing --method (ife, hbc or bc_hn)".into()))?;
    let Loaded { panel, family, opts } = load(config)?;
    let names = coefficient_names(&panel, family);
    let sink = Sink::new(config)?;
    let mut meta;
    let (full, theta, se, label);
    match method {
        CorrectMethod::Ife => {
            let h = config.h.unwrap_or(10);
            let seed = config.seed();
            let base = fit_fe(&panel, family, &opts)?;
            let shocks = draw_shocks(seed, h, panel.n(), panel.periods_len())?;
            let ife_opts = IfeOptions { fe: opts.clone(), parallel: true, ..Default::default() };
            let res = solve_ife(&base, &shocks, &panel, family, &ife_opts)?;
            if config.verbosity() > 0 {
                for step in &res.solver_trace {
                    eprintln!("theta {:?} residual {:e}", step.theta, step.residual);
                }
            }
            meta = fe_meta(&panel, &base);
            meta.extend([
                ("H", h.into()),
                ("seed", seed.into()),
                ("residual", json!(res.residual)),
                ("converged", res.converged.into()),
                ("status", serde_json::to_value(res.status).unwrap_or(Value::Null)),
                ("evaluations", res.evaluations.into()),
                ("failed_evaluations", res.failed_evaluations.into()),
            ]);
            label = format!("ife-{h}");
            theta = res.theta_tilde;
            se = res.se;
            full = base;
        }
        CorrectMethod::Hbc | CorrectMethod::BcHn => {
            let jk = if method == CorrectMethod::Hbc {
                hbc(&panel, family, &opts)?
            } else {
                bc_hn(&panel, family, &opts)?
            };
            meta = fe_meta(&panel, &jk.full);
            let labels: Vec<&str> = jk.subfits.iter().map(|s| s.label.as_str()).collect();
            meta.push(("subfits", json!(labels)));
            label = method.name().to_string();
            theta = jk.theta_corrected;
            se = jk.se;
            full = jk.full;
        }
    }
    meta.insert(0, ("method", method.name().into()));
    let rows = [
        Row { estimator: "fe".into(), theta: &full.theta_hat, se: &full.se },
        Row { estimator: label, theta: &theta, se: &se },
    ];
    sink.emit("correct", &meta, &long_table(&names, &rows, true), rows_json(&names, &rows))?;
    let mut text = wide_table(&names, &rows);
    if let Some((_, Value::Bool(false))) = meta.iter().find(|(k, _)| *k == "converged") {
        text.push_str("warning: the indirect estimator did not converge; best iterate reported\n");
    }
    present(&sink, &text);
    Ok(())
}

fn mc_design(config: &RunConfig) -> Result<Design, CliError> {
    let kind = config.design.ok_or_else(|| CliError::Input("missing --design".into()))?;
    let methods = config.methods.clone().unwrap_or_else(|| vec![Method::Fe, Method::Ife]);
    let r = config.r.unwrap_or(200);
    let h = config.h.unwrap_or(10);
    let seed = config.seed();
    let mut design = match kind {
        DesignKind::VaryingT => {
            let mut d = Design::varying_t(config.n.unwrap_or(100), config.t.unwrap_or(4), r, h, seed, methods);
            if let Some(f) = config.family {
                d.family = f;
            }
            d
        }
        DesignKind::CalibratedStatic | DesignKind::CalibratedDynamic => {
            let dynamic = kind == DesignKind::CalibratedDynamic;
            let (panel, family, opts) = if config.data.as_deref().is_some_and(|p| p.as_os_str() == SYNTHETIC_DATA) {
                let panel = synthetic_lfp(config.n.unwrap_or(500), config.t.unwrap_or(9), dynamic, seed)?;
                (panel, Family::Probit, FeOptions::default())
            } else {
                let l = load(config)?;
                (l.panel, l.family, l.opts)
            };
            let d = Design::calibrated(calibrate(&panel, family, &opts)?, r, h, seed, methods);
            if d.kind != kind {
                return Err(CliError::Input(format!(
                    "design {} does not match the data ({} a lag column)",
                    kind.name(),
                    if dynamic { "needs" } else { "must not have" }
                )));
            }
            d
        }
    };
    if let Some(theta0) = &config.theta0 {
        if theta0.len() != design.theta0.len() {
            return Err(CliError::Input(format!("theta0 needs {} values", design.theta0.len())));
        }
        design.theta0 = theta0.clone();
    }
    design.validate()?;
    Ok(design)
}

pub fn mc(config: &RunConfig) -> Result<(), CliError> {
    let design = mc_design(config)?;
    let sink = Sink::new(config)?;
    let res = run_design(&design)?;
    let mut table = Vec::new();
    res.write_csv(&mut table)?;
    let table = String::from_utf8(table).map_err(|e| CliError::Input(e.to_string()))?;
    let mut meta: Vec<(&str, Value)> = vec![("design", design.kind.name().into()), ("unreliable", res.unreliable.into())];
    let failed: Vec<Value> = res.methods.iter().map(|m| json!({"method": m.method, "failed": m.failed})).collect();
    meta.push(("failed", Value::Array(failed)));
    let payload = serde_json::to_value(&res).map_err(|e| CliError::Input(e.to_string()))?;
    sink.emit("mc", &meta, &table, payload)?;
    let mut text = res.summary_table();
    let _ = writeln!(text, "wall time {:.1}s", res.wall_time_secs);
    present(&sink, &text);
    if res.unreliable {
        return Err(CliError::Numerical("more than 20% of replications failed for some method".into()));
    }
    Ok(())
}

pub fn ns_demo(config: &RunConfig) -> Result<(), CliError> {
    let defaults = NsDesign::default();
    let theta0 = match config.theta0.as_deref() {
        None => defaults.theta0,
        Some([v]) => *v,
        Some(_) => return Err(CliError::Input("theta0 takes a single value for ns-demo".into())),
    };
    let design = NsDesign {
        theta0,
        n: config.n.unwrap_or(defaults.n),
        t: config.t.unwrap_or(defaults.t),
        alpha_rule: AlphaRule::Index,
        r: config.r.unwrap_or(defaults.r),
        h: config.h.unwrap_or(defaults.h),
        seed: config.seed(),
    };
    let summary = ns_experiment(&design)?;
    let sink = Sink::new(config)?;
    let mut table = String::from("estimator,mean,sd,se_mean\n");
    for (name, m) in [("fe", &summary.fe), ("ife", &summary.ife)] {
        let _ = writeln!(table, "{name},{},{},{}", sig6(m.mean), sig6(m.sd), sig6(m.se_mean));
    }
    let meta: Vec<(&str, Value)> = vec![("theta0", json!(theta0)), ("plim_fe", json!(theta0 * (design.t as f64 - 1.0) / design.t as f64))];
    let payload = json!({"design": summary.design, "fe": summary.fe, "ife": summary.ife});
    sink.emit("ns_summary", &meta, &table, payload)?;
    if sink.has_dir() {
        let mut hist = Vec::new();
        write_histogram_csv(&summary.histogram, &mut hist)?;
        sink.emit_csv("ns_histogram.csv", &meta, &String::from_utf8_lossy(&hist))?;
    }
    let mut text = format!("{:<4} {:>9} {:>9}\n", "", "mean", "sd");
    for (name, m) in [("fe", &summary.fe), ("ife", &summary.ife)] {
        let _ = writeln!(text, "{name:<4} {:>9} {:>9}", format!("{:.3}", m.mean), format!("{:.3}", m.sd));
    }
    if !sink.has_dir() {
        text.push_str("(the histogram is written only with --out)\n");
    }
    present(&sink, &text);
    Ok(())
}
