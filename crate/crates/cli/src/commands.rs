use anyhow::{anyhow, Context, Result};
use nuexp::coding::{gibbs_ratio_scan, gibbs_scan_rows, ItineraryMap};
use nuexp::hyperbolic::{contraction_check, estimate_eps0, hyperbolic_times, HypError, HypOptions};
use nuexp::orbit::{
    default_v_threshold, estimate_gamma0, iterate_with, lyapunov_random, lyapunov_spectrum, random_orbit, Sampling,
};
use nuexp::sft::{
    equilibrium_markov, gibbs_bounds, integral, low_variation_check, markov_entropy, parry_measure, pressure,
    topological_entropy, variational_gap, variational_gap_sample, LocallyConstantPotential, TransitionMatrix,
};
use nuexp::torus::{verify_hypotheses, HypothesisReport, Point, TorusMap, VerifyOptions, MAX_DIM};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::output::{csv, num};

/// What a subcommand produced. `files` are extra outputs next to the main
/// `<command>.json` / `<command>.csv`.
pub struct Outcome {
    pub json: Value,
    pub csv: String,
    pub files: Vec<(String, String)>,
    pub passed: bool,
    pub warnings: Vec<String>,
}

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn header(command: &str, cfg: &ExperimentConfig) -> Result<serde_json::Map<String, Value>> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(VERSION));
    m.insert("config".into(), serde_json::to_value(cfg)?);
    Ok(m)
}

fn torus(cfg: &ExperimentConfig) -> Result<TorusMap> {
    let m = cfg.map.as_ref().ok_or_else(|| anyhow!("this command needs a [map] section"))?;
    Ok(TorusMap::new(m)?)
}

fn gamma0(cfg: &ExperimentConfig, f: &TorusMap) -> (f64, Value) {
    let r = &cfg.run;
    match r.gamma0 {
        Some(g) => (g, json!({ "value": g, "source": "config" })),
        None => {
            let e = estimate_gamma0(f, r.gamma0_seeds, r.gamma0_steps, r.seed);
            let v = json!({
                "value": e.max, "source": "estimated", "seeds": e.seeds, "steps": e.steps,
                "min": e.min, "mean": e.mean, "max": e.max,
            });
            (e.max, v)
        }
    }
}

fn run_verify(cfg: &ExperimentConfig, f: &TorusMap) -> Result<(HypothesisReport, Value)> {
    let (g, gv) = gamma0(cfg, f);
    let report = verify_hypotheses(f, &VerifyOptions::new(cfg.run.grid, g))?;
    Ok((report, gv))
}

/// `c` from the config or from a verification run.
fn resolve_c(cfg: &ExperimentConfig, f: &TorusMap) -> Result<(f64, Value)> {
    if let Some(c) = cfg.run.c {
        return Ok((c, json!({ "value": c, "source": "config" })));
    }
    let (report, _) = run_verify(cfg, f)?;
    let c = report.c.ok_or_else(|| {
        anyhow!("verification found no feasible constants ({}); set run.c", report.infeasible.clone().unwrap_or_default())
    })?;
    Ok((c, json!({ "value": c, "source": "verify", "alpha_exp": report.alpha_exp })))
}

fn start_point(x0: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    p[..x0.len()].copy_from_slice(x0);
    p
}

fn streams(cfg: &ExperimentConfig) -> Vec<u64> {
    match cfg.run.x0 {
        Some(_) => vec![0],
        None => (0..cfg.run.seeds as u64).collect(),
    }
}

pub fn verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let f = torus(cfg)?;
    let (report, gv) = run_verify(cfg, &f)?;
    let fixed = f.inv_norm(&[0.0; MAX_DIM]).ok();
    let mut out = header("verify", cfg)?;
    out.insert("gamma0".into(), gv);
    out.insert("inv_norm_at_fixed_point".into(), json!(fixed));
    out.insert("report".into(), serde_json::to_value(&report)?);
    let p = &report.passed;
    let checks = [
        ("H1", p.h1),
        ("H2", p.h2),
        ("H3", p.h3),
        ("v_subset_w", p.v_subset_w),
        ("constants", p.constants),
        ("all", p.all),
    ];
    let mut warnings = Vec::new();
    if let Some(why) = &report.infeasible {
        warnings.push(format!("constants infeasible: {why}"));
    }
    Ok(Outcome {
        json: Value::Object(out),
        csv: csv("check,passed", checks.iter().map(|(k, v)| vec![k.to_string(), v.to_string()])),
        files: Vec::new(),
        passed: p.all,
        warnings,
    })
}

pub fn lyapunov(cfg: &ExperimentConfig) -> Result<Outcome> {
    let f = torus(cfg)?;
    let (c, cv) = resolve_c(cfg, &f)?;
    let r = &cfg.run;
    let estimates = streams(cfg)
        .into_par_iter()
        .map(|s| match &r.x0 {
            Some(x0) => lyapunov_spectrum(&f, start_point(x0), r.steps),
            None => lyapunov_random(&f, r.steps, r.seed, s),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let all = estimates.iter().flat_map(|e| e.exponents.iter().copied());
    let min = all.clone().fold(f64::INFINITY, f64::min);
    let max = all.fold(f64::NEG_INFINITY, f64::max);
    let dim = f.dim();
    let mean: Vec<f64> = (0..dim)
        .map(|i| estimates.iter().map(|e| e.exponents[i]).sum::<f64>() / estimates.len() as f64)
        .collect();
    let fixed = f.inv_norm(&[0.0; MAX_DIM]).ok();
    let passed = min >= c - r.lyapunov_slack;

    let per_seed: Vec<Value> = estimates
        .iter()
        .enumerate()
        .map(|(s, e)| {
            json!({
                "stream": s, "exponents": e.exponents, "per_block_drift": e.per_block_drift,
                "log_det_average": e.log_det_average, "log_inv_norm_average": e.log_inv_norm_average,
            })
        })
        .collect();
    let mut out = header("lyapunov", cfg)?;
    out.insert("c".into(), cv);
    out.insert("min_exponent".into(), json!(min));
    out.insert("max_exponent".into(), json!(max));
    out.insert("mean_exponents".into(), json!(mean));
    out.insert("min_exponent_at_least_c".into(), json!(min >= c));
    out.insert("inv_norm_at_fixed_point".into(), json!(fixed));
    out.insert("non_uniform_at_fixed_point".into(), json!(fixed.is_some_and(|x| x > 1.0)));
    out.insert("passed".into(), json!(passed));
    out.insert("per_seed".into(), json!(per_seed));

    let mut head = String::from("stream");
    for i in 1..=dim {
        head.push_str(&format!(",lambda{i}"));
    }
    head.push_str(",per_block_drift,log_det_average");
    let rows = estimates.iter().enumerate().map(|(s, e)| {
        let mut row = vec![s.to_string()];
        row.extend(e.exponents.iter().map(|&x| num(x)));
        row.push(num(e.per_block_drift));
        row.push(num(e.log_det_average));
        row
    });
    let mut warnings = Vec::new();
    if !passed {
        warnings.push(format!("smallest exponent {min} is below c - {} = {}", r.lyapunov_slack, c - r.lyapunov_slack));
    }
    Ok(Outcome { json: Value::Object(out), csv: csv(&head, rows), files: Vec::new(), passed, warnings })
}

struct SeedTimes {
    stream: u64,
    times: usize,
    density: f64,
    d0: f64,
    a_max: f64,
    max_ratio: f64,
    log_diameter: f64,
    checked: usize,
    running: Vec<(usize, f64)>,
    error: Option<String>,
}

pub fn hyp_times(cfg: &ExperimentConfig) -> Result<Outcome> {
    let f = torus(cfg)?;
    let (c, cv) = resolve_c(cfg, &f)?;
    let r = &cfg.run;
    let eps0 = estimate_eps0(&f, c, r.eps0_grid)?;
    let opts = HypOptions { convention: r.convention, c2_factor: r.c2_factor };
    let threshold = default_v_threshold(&f);
    let seeds = streams(cfg)
        .into_par_iter()
        .map(|s| -> Result<SeedTimes> {
            let trace = match &r.x0 {
                Some(x0) => iterate_with(&f, start_point(x0), r.steps, Sampling::Exact, threshold)?,
                None => random_orbit(&f, r.steps, r.seed, s, threshold)?,
            };
            let mut out = SeedTimes {
                stream: s,
                times: 0,
                density: 0.0,
                d0: 0.0,
                a_max: 0.0,
                max_ratio: 0.0,
                log_diameter: f64::NEG_INFINITY,
                checked: 0,
                running: Vec::new(),
                error: None,
            };
            let report = match hyperbolic_times(&trace, c, &opts) {
                Ok(rep) => rep,
                Err(e @ HypError::PreconditionFailed { .. }) => {
                    out.error = Some(e.to_string());
                    return Ok(out);
                }
                Err(e) => return Err(e.into()),
            };
            out.times = report.times.len();
            out.density = report.density_liminf_proxy;
            out.d0 = report.d0;
            out.a_max = report.a_max;
            out.running = report.running_density(r.density_stride);
            for &n in report.times.iter().rev().take(r.deepest) {
                let cc = contraction_check(&f, &trace, n, c, eps0.eps0, r.probes, r.seed.wrapping_add(s + 1))
                    .with_context(|| format!("contraction at time {n} of stream {s}"))?;
                out.max_ratio = out.max_ratio.max(cc.max_ratio);
                out.log_diameter = out.log_diameter.max(cc.log_pullback_diameter);
                out.checked += 1;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let ok = |s: &SeedTimes| s.error.is_none() && s.density >= s.d0 - r.density_slack && s.max_ratio <= r.max_ratio;
    let passed = seeds.iter().all(ok);
    let min_margin = seeds.iter().filter(|s| s.error.is_none()).map(|s| s.density - s.d0).fold(f64::INFINITY, f64::min);
    let max_ratio = seeds.iter().map(|s| s.max_ratio).fold(0.0, f64::max);
    let per_seed: Vec<Value> = seeds
        .iter()
        .map(|s| {
            json!({
                "stream": s.stream, "times": s.times, "density": s.density, "d0": s.d0, "A": s.a_max,
                "contraction_checked": s.checked, "max_ratio": s.max_ratio,
                "log_pullback_diameter": if s.checked > 0 { Some(s.log_diameter) } else { None },
                "error": s.error,
            })
        })
        .collect();
    let mut out = header("hyp-times", cfg)?;
    out.insert("c".into(), cv);
    out.insert("eps0".into(), serde_json::to_value(&eps0)?);
    out.insert("min_density_minus_d0".into(), json!(min_margin.is_finite().then_some(min_margin)));
    out.insert("max_ratio".into(), json!(max_ratio));
    out.insert("failed_seeds".into(), json!(seeds.iter().filter(|s| !ok(s)).map(|s| s.stream).collect::<Vec<_>>()));
    out.insert("passed".into(), json!(passed));
    out.insert("per_seed".into(), json!(per_seed));

    let rows = seeds
        .iter()
        .flat_map(|s| s.running.iter().map(move |&(m, d)| vec![s.stream.to_string(), m.to_string(), num(d)]));
    let mut warnings: Vec<String> =
        seeds.iter().filter_map(|s| s.error.as_ref().map(|e| format!("stream {}: {e}", s.stream))).collect();
    if !passed && warnings.is_empty() {
        warnings.push("density or contraction threshold missed; see failed_seeds".into());
    }
    Ok(Outcome { json: Value::Object(out), csv: csv("stream,n,density", rows), files: Vec::new(), passed, warnings })
}

/// The SFT from `[sft]`, else the one induced by `[map]`, with the default
/// symbol for a `symbol` potential.
fn symbolic(cfg: &ExperimentConfig) -> Result<(TransitionMatrix, LocallyConstantPotential, Value)> {
    let (a, default_symbol, source) = match (&cfg.sft, &cfg.map) {
        (Some(s), _) => {
            let a = TransitionMatrix::new(s.rows.clone())?;
            let last = a.d() - 1;
            (a, last, json!("config"))
        }
        (None, Some(m)) => {
            let im = ItineraryMap::new(&TorusMap::new(m)?)?;
            let s = im.fixed_point_symbol();
            let part = &im.partition;
            let flags = json!({
                "source": "markov_partition", "rectangles": part.len(),
                "support_contained": part.support_contained, "window_contained": part.window_contained,
                "fixed_point_symbol": s,
            });
            (im.matrix, s, flags)
        }
        (None, None) => return Err(anyhow!("this command needs an [sft] or a [map] section")),
    };
    let phi = cfg.potential.build(&a, default_symbol)?;
    Ok((a, phi, source))
}

fn low_variation_warning(ok: bool, rho: f64) -> Vec<String> {
    if ok {
        Vec::new()
    } else {
        vec![format!("potential fails max phi < P(phi) - {rho} h_top; results are computed anyway")]
    }
}

pub fn equilibrium(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (a, phi, source) = symbolic(cfg)?;
    let r = &cfg.run;
    let p = pressure(&a, &phi)?;
    let htop = topological_entropy(&a)?;
    let mu = equilibrium_markov(&a, &phi)?;
    let h = markov_entropy(&mu);
    let int = integral(&mu, &phi)?;
    let low = low_variation_check(&phi, &a, r.rho)?;
    let parry = parry_measure(&a)?;
    let (lo, hi) = gibbs_bounds(&a, &phi)?;
    let scan = gibbs_ratio_scan(&a, &mu, &phi, p, r.gibbs_max_len)?;

    let mut out = header("equilibrium", cfg)?;
    out.insert("sft".into(), source);
    out.insert("d".into(), json!(a.d()));
    out.insert("pressure".into(), json!(p));
    out.insert("topological_entropy".into(), json!(htop));
    out.insert("entropy".into(), json!(h));
    out.insert("integral".into(), json!(int));
    out.insert("variational_identity_error".into(), json!(h + int - p));
    out.insert("max_phi".into(), json!(phi.max_value()));
    out.insert("low_variation".into(), json!(low));
    out.insert("rho".into(), json!(r.rho));
    out.insert("parry_max_entry_diff".into(), json!(mu.max_entry_diff(&parry)));
    out.insert("stationary".into(), json!(mu.stationary()));
    out.insert("transition_matrix".into(), json!(mu.transition_matrix()));
    out.insert("gibbs_bounds".into(), json!([lo, hi]));
    out.insert("gibbs_scan".into(), serde_json::to_value(&scan)?);

    let rows = (0..a.d()).map(|i| vec![i.to_string(), num(mu.stationary()[i])]);
    let gibbs = csv(
        "n,min_ratio,max_ratio",
        scan.by_length.iter().map(|e| vec![e.n.to_string(), num(e.min_ratio), num(e.max_ratio)]),
    );
    Ok(Outcome {
        json: Value::Object(out),
        csv: csv("state,stationary", rows),
        files: vec![("equilibrium_gibbs.csv".into(), gibbs)],
        passed: true,
        warnings: low_variation_warning(low, r.rho),
    })
}

pub fn variational(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (a, phi, source) = symbolic(cfg)?;
    let r = &cfg.run;
    let p = pressure(&a, &phi)?;
    let gaps = variational_gap_sample(&a, &phi, r.samples, r.seed)?;
    let eq = equilibrium_markov(&a, &phi)?;
    let eq_gap = variational_gap(&a, &phi, &eq)?;
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let passed = min >= -r.gap_tol && eq_gap.abs() <= r.gap_tol;
    let low = low_variation_check(&phi, &a, r.rho)?;

    let mut out = header("variational", cfg)?;
    out.insert("sft".into(), source);
    out.insert("pressure".into(), json!(p));
    out.insert("samples".into(), json!(gaps.len()));
    out.insert("min_gap".into(), json!(min));
    out.insert("max_gap".into(), json!(max));
    out.insert("mean_gap".into(), json!(mean));
    out.insert("equilibrium_gap".into(), json!(eq_gap));
    out.insert("low_variation".into(), json!(low));
    out.insert("passed".into(), json!(passed));

    let mut warnings = low_variation_warning(low, r.rho);
    if !passed {
        warnings.push(format!("gap out of tolerance: min sampled {min}, equilibrium {eq_gap}"));
    }
    Ok(Outcome {
        json: Value::Object(out),
        csv: csv("trial,gap", gaps.iter().enumerate().map(|(t, &g)| vec![t.to_string(), num(g)])),
        files: Vec::new(),
        passed,
        warnings,
    })
}

pub fn gibbs(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (a, phi, source) = symbolic(cfg)?;
    let r = &cfg.run;
    let p = pressure(&a, &phi)?;
    let mu = equilibrium_markov(&a, &phi)?;
    let (lo, hi) = gibbs_bounds(&a, &phi)?;
    let scan = gibbs_ratio_scan(&a, &mu, &phi, p, r.gibbs_max_len)?;
    let rows = gibbs_scan_rows(&a, &mu, &phi, p, r.gibbs_max_len, r.gibbs_rows)?;
    let rel = 1e-9;
    let passed = scan.min_ratio >= lo * (1.0 - rel) && scan.max_ratio <= hi * (1.0 + rel);

    let mut out = header("gibbs", cfg)?;
    out.insert("sft".into(), source);
    out.insert("pressure".into(), json!(p));
    out.insert("bounds".into(), json!([lo, hi]));
    out.insert("scan".into(), serde_json::to_value(&scan)?);
    out.insert("rows_written".into(), json!(rows.len()));
    out.insert("within_bounds".into(), json!(passed));

    let mut warnings = low_variation_warning(low_variation_check(&phi, &a, r.rho)?, r.rho);
    if !passed {
        warnings.push(format!("ratios [{}, {}] leave the bounds [{lo}, {hi}]", scan.min_ratio, scan.max_ratio));
    }
    Ok(Outcome {
        json: Value::Object(out),
        csv: csv(
            "word,mu,s_n_phi,ratio",
            rows.iter().map(|w| vec![w.word.clone(), num(w.mu), num(w.s_n_phi), num(w.ratio)]),
        ),
        files: Vec::new(),
        passed,
        warnings,
    })
}
