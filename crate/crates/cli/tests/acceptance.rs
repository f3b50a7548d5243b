//! The ten acceptance criteria, one PASS/FAIL line each. Runs without the
//! libtest harness so the lines always reach the terminal.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nuexp::coding::{gibbs_ratio_scan, ItineraryMap};
use nuexp::hyperbolic::{contraction_check, estimate_eps0, hyperbolic_times, pliss_times, HypOptions};
use nuexp::orbit::{default_v_threshold, estimate_gamma0, lyapunov_random, random_orbit};
use nuexp::sft::*;
use nuexp::stream_rng;
use nuexp::torus::{center, verify_hypotheses, wrap, Point, TorusMap, VerifyOptions};
use rand::Rng;
use sha2::{Digest, Sha256};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Runner {
    failed: usize,
}

impl Runner {
    fn run(&mut self, id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(d), Some(l)) if elapsed > l => Err(format!("{d}; runtime {elapsed:.1?} exceeds {l:?}")),
            (r, _) => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if result.is_err() {
            self.failed += 1;
        }
        println!("{tag} {id:>2} {name} [{:.2} s] {detail}", elapsed.as_secs_f64());
    }
}

/// A Hamiltonian cycle plus independent extra edges with probability `density`.
fn random_irreducible<R: Rng>(rng: &mut R, d: usize, density: f64) -> TransitionMatrix {
    let mut rows = vec![vec![0u8; d]; d];
    for (i, row) in rows.iter_mut().enumerate() {
        row[(i + 1) % d] = 1;
        for v in row.iter_mut() {
            if rng.random_bool(density) {
                *v = 1;
            }
        }
    }
    TransitionMatrix::new(rows).unwrap()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_1() -> Check {
    let mut worst = 0.0f64;
    for k in 2..=6 {
        let h = topological_entropy(&TransitionMatrix::full_shift(k)).map_err(|e| e.to_string())?;
        worst = worst.max((h - (k as f64).ln()).abs());
    }
    let root = bisect(|x| x * x - x - 1.0, 1.0, 2.0);
    let g = topological_entropy(&TransitionMatrix::golden_mean()).map_err(|e| e.to_string())?;
    let gerr = (g - root.ln()).abs();
    ensure(worst <= 1e-12 && gerr <= 1e-12, format!("full-shift error {worst:.1e}, golden-mean error {gerr:.1e}"))
}

fn criterion_2() -> Check {
    let mut rng = stream_rng(5, 0);
    let (mut worst_excess, mut worst_parry) = (f64::NEG_INFINITY, 0.0f64);
    let mut sampled = 0;
    for m in 0..5 {
        let a = random_irreducible(&mut rng, 2 + m % 4, 0.4);
        let h = topological_entropy(&a).unwrap();
        worst_parry = worst_parry.max((markov_entropy(&parry_measure(&a).unwrap()) - h).abs());
        let mut trng = stream_rng(5, 1 + m as u64);
        for _ in 0..10_000 {
            let nu = MarkovMeasure::random_compatible(&a, &mut trng).unwrap();
            worst_excess = worst_excess.max(markov_entropy(&nu) - h);
            sampled += 1;
        }
    }
    ensure(
        worst_excess <= 1e-10 && worst_parry <= 1e-10,
        format!("{sampled} measures, max h(nu) - h_top = {worst_excess:.2e}, Parry error {worst_parry:.1e}"),
    )
}

/// `(1/n) log Σ exp(S_nφ(w))` by visiting every admissible word of length `n`.
fn brute_force_pressure(a: &TransitionMatrix, v: &[f64], n: usize) -> f64 {
    fn go(a: &TransitionMatrix, v: &[f64], left: usize, last: usize, s: f64, total: &mut f64) {
        if left == 0 {
            *total += s.exp();
            return;
        }
        for j in a.successors(last) {
            go(a, v, left - 1, j, s + v[j], total);
        }
    }
    let mut total = 0.0;
    for i in 0..a.d() {
        go(a, v, n - 1, i, v[i], &mut total);
    }
    total.ln() / n as f64
}

fn criterion_3() -> Check {
    let mut rng = stream_rng(11, 0);
    let mut lines = Vec::new();
    let mut ok = true;
    for trial in 0..5 {
        let d = 2 + trial % 3;
        let a = random_irreducible(&mut rng, d, 0.5);
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi = LocallyConstantPotential::from_state_values(&a, &v).unwrap();
        let p = pressure(&a, &phi).unwrap();
        let e14 = (brute_force_pressure(&a, &v, 14) - p).abs();
        let e16 = (brute_force_pressure(&a, &v, 16) - p).abs();
        let mu = equilibrium_markov(&a, &phi).unwrap();
        let vp = (markov_entropy(&mu) + integral(&mu, &phi).unwrap() - p).abs();
        // a full shift with product weights has zero error at every n, so
        // "decreasing" allows rounding-level ties
        ok &= e16 <= 0.05 && e14 <= 0.05 && e16 <= e14 + 1e-12 && vp <= 1e-10;
        lines.push(format!("d={d}: {e14:.2e}->{e16:.2e} vp {vp:.0e}"));
    }
    ensure(ok, lines.join("; "))
}

fn pliss_oracle(a: &[f64], c1: f64) -> Vec<usize> {
    (1..=a.len())
        .filter(|&m| (0..m).all(|k| a[k..m].iter().sum::<f64>() >= c1 * (m - k) as f64))
        .collect()
}

fn criterion_4() -> Check {
    // multiples of 1/64 keep every partial sum exact, so both scans see the
    // same comparisons; values stay below A, which makes the count bound strict
    let mut rng = stream_rng(40, 0);
    let (big_a, c1, c2) = (1.0, 0.125, 0.25);
    let (mut mismatches, mut with_precondition, mut refused, mut short) = (0, 0, 0, 0);
    while with_precondition < 10_000 {
        let n = rng.random_range(1..=200);
        let bias = rng.random_range(-16..=40);
        let a: Vec<f64> =
            (0..n).map(|_| (rng.random_range(-48i32..=63) + bias).clamp(-64, 63) as f64 / 64.0).collect();
        let oracle = pliss_oracle(&a, c1);
        match pliss_times(&a, big_a, c1, c2) {
            Ok(p) => {
                with_precondition += 1;
                mismatches += usize::from(p.indices != oracle);
                short += usize::from(p.indices.len() as f64 <= p.d0 * n as f64);
            }
            Err(_) => {
                // a refusal has to be justified by the mean condition
                refused += 1;
                let total: f64 = a.iter().sum();
                if total >= c2 * n as f64 {
                    mismatches += 1;
                }
            }
        }
    }
    ensure(
        mismatches == 0 && short == 0,
        format!("{with_precondition} sequences ({refused} refused draws), {mismatches} mismatches, {short} below d0 n"),
    )
}

struct Flagship {
    f: TorusMap,
    c: f64,
    eps0: f64,
}

fn jacobian_error(f: &TorusMap) -> f64 {
    let mut rng = stream_rng(2, 0);
    let faces = [[0.1, 0.15], [0.05, 0.1], [0.05, 0.05]];
    let h = 1e-7;
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let x: Point = if k % 2 == 0 {
            [rng.random(), rng.random()]
        } else {
            let fc = faces[k % 3];
            let mut side = || if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let (s1, s2) = (side(), side());
            [wrap(s1 * fc[0] + rng.random_range(-1e-3..1e-3)), wrap(s2 * fc[1] + rng.random_range(-1e-3..1e-3))]
        };
        let j = f.jacobian(&x);
        for col in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[col] += h;
            xm[col] -= h;
            let (yp, ym) = (f.eval(&xp), f.eval(&xm));
            for row in 0..2 {
                worst = worst.max((center(yp[row] - ym[row]) / (2.0 * h) - j.m[row][col]).abs());
            }
        }
    }
    worst
}

fn criterion_5(slot: &mut Option<Flagship>) -> Check {
    let f = TorusMap::flagship();
    let g = estimate_gamma0(&f, 1000, 100_000, 1);
    let report = verify_hypotheses(&f, &VerifyOptions::new(512, g.max)).map_err(|e| e.to_string())?;
    let fd = jacobian_error(&f);
    let gamma2 = report.profile.as_ref().and_then(|p| p.gamma2_constraint);
    let detail = format!(
        "gamma0 {:.5}, H1 {} H2 {} H3 {}, (alpha, c) = ({:.4}, {:.5}), gamma2 constraint {:?}, FD error {fd:.1e}",
        g.max, report.passed.h1, report.passed.h2, report.passed.h3,
        report.alpha_exp.unwrap_or(f64::NAN), report.c.unwrap_or(f64::NAN), gamma2,
    );
    let ok = report.passed.all && report.constants.is_some() && gamma2 == Some(true) && fd <= 1e-6;
    if let Some(c) = report.c {
        let eps0 = estimate_eps0(&f, c, 512).map_err(|e| e.to_string())?.eps0;
        *slot = Some(Flagship { f, c, eps0 });
    }
    ensure(ok, detail)
}

const ENSEMBLE_SEED: u64 = 7;
const ENSEMBLE: u64 = 100;
const N: usize = 100_000;

fn criterion_6(fl: &Flagship) -> Check {
    let mut min = f64::INFINITY;
    for s in 0..ENSEMBLE {
        let e = lyapunov_random(&fl.f, N, ENSEMBLE_SEED, s).map_err(|e| e.to_string())?;
        min = e.exponents.iter().copied().fold(min, f64::min);
    }
    let at_p0 = fl.f.inv_norm(&[0.0, 0.0]).map_err(|e| e.to_string())?;
    ensure(
        min >= fl.c - 0.01 && at_p0 > 1.0,
        format!(
            "min exponent {min:.4} vs c - 0.01 = {:.4} (>= c: {}); |Df(p0)^-1| = {at_p0:.4}",
            fl.c - 0.01,
            min >= fl.c
        ),
    )
}

fn criterion_7(fl: &Flagship) -> Check {
    let threshold = default_v_threshold(&fl.f);
    let (mut margin, mut max_ratio, mut checked) = (f64::INFINITY, 0.0f64, 0);
    for s in 0..ENSEMBLE {
        let tr = random_orbit(&fl.f, N, ENSEMBLE_SEED, s, threshold).map_err(|e| e.to_string())?;
        let h = hyperbolic_times(&tr, fl.c, &HypOptions::default()).map_err(|e| format!("seed {s}: {e}"))?;
        margin = margin.min(h.density_liminf_proxy - (h.d0 - 0.02));
        for &n in h.times.iter().rev().take(10) {
            let cc = contraction_check(&fl.f, &tr, n, fl.c, fl.eps0, 4, s).map_err(|e| format!("seed {s}: {e}"))?;
            max_ratio = max_ratio.max(cc.max_ratio);
            checked += 1;
        }
    }
    ensure(
        margin > 0.0 && max_ratio <= 1.05 && checked == 10 * ENSEMBLE as usize,
        format!("min density - (d0 - 0.02) = {margin:.4}; max ratio {max_ratio:.4} over {checked} times"),
    )
}

fn criterion_8() -> Check {
    let g = TransitionMatrix::golden_mean();
    let zero = LocallyConstantPotential::zero(&g);
    let parry = parry_measure(&g).unwrap();
    let (lo, hi) = gibbs_bounds(&g, &zero).unwrap();
    let scan = gibbs_ratio_scan(&g, &parry, &zero, topological_entropy(&g).unwrap(), 12).unwrap();
    let inside = scan.min_ratio >= lo * (1.0 - 1e-12) && scan.max_ratio <= hi * (1.0 + 1e-12);

    // Bernoulli(p) with φ = log p has P = 0 and μ[w] = exp(S_nφ(w))
    let mut worst = 0.0f64;
    for p in [vec![0.5, 0.5], vec![2.0 / 3.0, 1.0 / 3.0], vec![0.5, 0.3, 0.2], vec![0.1, 0.2, 0.3, 0.4]] {
        let k = p.len();
        let a = TransitionMatrix::full_shift(k);
        let rows: Vec<f64> = (0..k).flat_map(|_| p.iter().copied()).collect();
        let mu = MarkovMeasure::from_stochastic(&a, rows).unwrap();
        let phi = LocallyConstantPotential::from_state_values(&a, &p.iter().map(|x| x.ln()).collect::<Vec<_>>()).unwrap();
        let s = gibbs_ratio_scan(&a, &mu, &phi, 0.0, 12).unwrap();
        worst = worst.max((s.min_ratio - 1.0).abs()).max((s.max_ratio - 1.0).abs());
    }
    ensure(
        inside && worst <= 1e-12,
        format!(
            "golden mean ratios [{:.6}, {:.6}] within [{lo:.6}, {hi:.6}]; Bernoulli ratios 1 within {worst:.1e}",
            scan.min_ratio, scan.max_ratio
        ),
    )
}

fn criterion_9() -> Check {
    let im = ItineraryMap::new(&TorusMap::flagship()).map_err(|e| e.to_string())?;
    let a = &im.matrix;
    let d = a.d();
    let zero = LocallyConstantPotential::zero(a);
    let mut rng = stream_rng(9, 0);
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let varied = LocallyConstantPotential::from_state_values(a, &v).unwrap();
    let (mut min_gap, mut eq_gap) = (f64::INFINITY, 0.0f64);
    for phi in [&zero, &varied] {
        let gaps = variational_gap_sample(a, phi, 1000, 9).unwrap();
        min_gap = gaps.into_iter().fold(min_gap, f64::min);
        let eq = equilibrium_markov(a, phi).unwrap();
        eq_gap = eq_gap.max(variational_gap(a, phi, &eq).unwrap().abs());
    }
    let mut spike = vec![0.0; d];
    spike[im.fixed_point_symbol()] = 10.0;
    let spike = LocallyConstantPotential::from_state_values(a, &spike).unwrap();
    let zero_low = low_variation_check(&zero, a, 0.5).unwrap();
    let spike_low = low_variation_check(&spike, a, 0.5).unwrap();
    ensure(
        min_gap >= -1e-10 && eq_gap <= 1e-10 && zero_low && !spike_low,
        format!("d = {d}, min sampled gap {min_gap:.3e}, equilibrium |gap| {eq_gap:.1e}, low variation: zero {zero_low}, spike {spike_low}"),
    )
}

fn digests(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), Sha256::digest(std::fs::read(e.path()).unwrap()).to_vec())
        })
        .collect()
}

fn criterion_10() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("small.toml");
    std::fs::write(
        &config,
        "[map]\neigenvalues = [2, 4]\nslope = 0.9\n\n[run]\nseeds = 3\nsteps = 20000\ngamma0 = 0.065\ngibbs_rows = 2000\nsamples = 200\n",
    )
    .map_err(|e| e.to_string())?;
    let commands = ["verify", "lyapunov", "hyp-times", "equilibrium", "variational", "gibbs"];
    let mut files = 0;
    for cmd in commands {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{cmd}-{rep}"));
            let run = Command::new(env!("CARGO_BIN_EXE_nuexp"))
                .args([cmd, "--seed", "3", "--config"])
                .arg(&config)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            if run.status.code() != Some(0) {
                return Err(format!("{cmd} exited with {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr)));
            }
            let mut d = digests(&out);
            d.insert("stdout".into(), Sha256::digest(&run.stdout).to_vec());
            runs.push(d);
        }
        if runs[0] != runs[1] {
            return Err(format!("{cmd}: outputs differ between identical runs"));
        }
        files += runs[0].len() - 1;
    }
    Ok(format!("{} commands, {files} output files and stdout identical across reruns", commands.len()))
}

fn main() {
    let mut r = Runner { failed: 0 };
    let secs = Duration::from_secs;
    r.run(1, "SFT spectral suite", Some(secs(1)), criterion_1);
    r.run(2, "Parry optimality", Some(secs(30)), criterion_2);
    r.run(3, "pressure oracle", Some(secs(60)), criterion_3);
    r.run(4, "Pliss equivalence", Some(secs(30)), criterion_4);
    let mut flagship = None;
    r.run(5, "flagship map suite", Some(secs(120)), || criterion_5(&mut flagship));
    match &flagship {
        Some(fl) => {
            r.run(6, "non-uniform expansion", Some(secs(300)), || criterion_6(fl));
            r.run(7, "hyperbolic-time density", Some(secs(300)), || criterion_7(fl));
        }
        None => {
            r.run(6, "non-uniform expansion", None, || Err("no feasible c from criterion 5".into()));
            r.run(7, "hyperbolic-time density", None, || Err("no feasible c from criterion 5".into()));
        }
    }
    r.run(8, "weak Gibbs", Some(secs(10)), criterion_8);
    r.run(9, "variational principle", Some(secs(30)), criterion_9);
    r.run(10, "determinism", None, criterion_10);
    if r.failed > 0 {
        println!("{} of 10 criteria failed", r.failed);
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
