//! Acceptance suite: one PASS/FAIL line per criterion, each with its time
//! budget. Exits non-zero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use survkit::bayes::{
    full_loglik, laplace_log_posterior, median_probability_model, posterior_summary, run_mcmc, BaselineHazardPrior,
    McmcOptions, PriorSpec,
};
use survkit::cox::{fit_cox_newton, partial_loglik, partial_loglik_grad};
use survkit::dataset::{make_cv_folds, standardize, write_dataset};
use survkit::metrics::{
    antolini_c, brier_score, calibration_fit, calibration_regression, dot632plus, harrell_c, uno_c,
    CalibrationOptions, PredictedCurves,
};
use survkit::nonparametric::{censoring_km, km_estimate};
use survkit::penalized::{fit_adaptive_lasso, fit_cv_enet, fit_enet, lambda_max, lambda_path, PathOptions, PenaltySpec};
use survkit::rng::derive_seed;
use survkit::synth::CoxGenerator;
use survkit::{SurvivalDataset, SurvivalOutcome as O};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Uniform draws in [0, 1) from a splitmix stream; keeps the suite free of
/// any dependency on the library's own sampling code.
struct Uniform(u64);

impl Uniform {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(1);
        (derive_seed(self.0, 77) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn below(&mut self, k: usize) -> usize {
        ((self.next() * k as f64) as usize).min(k - 1)
    }
}

// ---------------------------------------------------------------- 1

fn km_oracle() -> Outcome {
    let table = [O::censored(11.0), O::event(4.0), O::censored(5.0), O::event(9.0), O::censored(1.0)];
    let km = km_estimate(&table).map_err(e2s)?;
    ensure(km.survival_at(4.0) == 0.75, || format!("S(4) = {}", km.survival_at(4.0)))?;
    ensure(km.survival_at(9.0) == 0.375, || format!("S(9) = {}", km.survival_at(9.0)))?;
    ensure(km.median_survival() == Some(9.0), || format!("median = {:?}", km.median_survival()))?;
    let naive = table.iter().filter(|o| o.time > 10.0).count() as f64 / table.len() as f64;
    ensure(naive == 0.2, || format!("naive proportion past 10 = {naive}"))?;
    Ok(format!(
        "S(4)=0.75, S(9)=0.375, median=9, naive past-10 share 1/5 vs KM S(10)={}",
        km.survival_at(10.0)
    ))
}

// ---------------------------------------------------------------- 2

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let ds = CoxGenerator::new(30, 5, vec![0.5, -0.5, 0.3, 0.0, 0.2]).generate(100 + seed);
        let mut u = Uniform(seed);
        let beta: Vec<f64> = (0..5).map(|_| u.next() - 0.5).collect();
        let g = partial_loglik_grad(&ds, &beta).map_err(e2s)?;
        let h = 1e-5;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..5 {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (partial_loglik(&ds, &up).map_err(e2s)? - partial_loglik(&ds, &down).map_err(e2s)?) / (2.0 * h);
            num += (g[j] - fd).powi(2);
            den += fd * fd;
        }
        let rel = (num / den).sqrt();
        worst = worst.max(rel);
    }
    ensure(worst < 1e-6, || format!("largest relative error {worst:.2e}"))?;
    Ok(format!("20 instances (n=30, p=5), largest relative error {worst:.2e}"))
}

// ---------------------------------------------------------------- 3

/// Largest violation of the elastic-net optimality conditions, computed from
/// the partial-likelihood gradient.
fn kkt_gap(ds: &SurvivalDataset, lambda: f64, alpha: f64, beta: &[f64]) -> Result<f64, String> {
    let g = partial_loglik_grad(ds, beta).map_err(e2s)?;
    let scale = 2.0 / ds.n() as f64;
    let mut worst = 0.0f64;
    for (j, f) in ds.features().iter().enumerate() {
        let gj = scale * g[j];
        let gap = if f.mandatory {
            gj.abs()
        } else if beta[j] == 0.0 {
            (gj.abs() - lambda * alpha).max(0.0)
        } else {
            (gj - lambda * alpha * beta[j].signum() - lambda * (1.0 - alpha) * beta[j]).abs()
        };
        worst = worst.max(gap);
    }
    Ok(worst)
}

fn penalized_oracle() -> Outcome {
    let mut max_newton = 0.0f64;
    let mut max_kkt = 0.0f64;
    let mut points = 0;
    for seed in 0..3u64 {
        let mut g = CoxGenerator::new(100, 5, vec![0.8, -0.6, 0.4, 0.0, 0.0]);
        g.n_mandatory = usize::from(seed == 2);
        let ds = standardize(&g.generate(300 + seed));
        let newton = fit_cox_newton(&ds, &(0..5).collect::<Vec<_>>()).map_err(e2s)?;
        let enet = fit_enet(&ds, &PenaltySpec::lasso(0.0), None).map_err(e2s)?;
        for (a, b) in newton.coefficients.iter().zip(&enet.coefficients) {
            max_newton = max_newton.max((a - b).abs());
        }
        for alpha in [1.0, 0.5] {
            let opts = PathOptions {
                n_lambda: 30,
                ..PathOptions::default()
            };
            let path = lambda_path(&ds, alpha, None, &opts).map_err(e2s)?;
            for (l, fit) in path.lambdas.iter().zip(&path.fits) {
                max_kkt = max_kkt.max(kkt_gap(&ds, *l, alpha, &fit.coefficients)?);
                points += 1;
            }
            let (lmax, _) = lambda_max(&ds, alpha, None, &opts).map_err(e2s)?;
            for factor in [1.0, 2.0] {
                let fit = fit_enet(&ds, &PenaltySpec::enet(lmax * factor, alpha), None).map_err(e2s)?;
                ensure(fit.beta().iter().all(|&b| b == 0.0), || {
                    format!("nonzero penalized coefficient at {factor} x lambda_max: {:?}", fit.beta())
                })?;
            }
        }
    }
    ensure(max_newton < 1e-5, || format!("lambda=0 vs Newton differs by {max_newton:.2e}"))?;
    ensure(max_kkt < 1e-6, || format!("KKT violation {max_kkt:.2e}"))?;
    Ok(format!(
        "lambda=0 vs Newton {max_newton:.1e}, KKT {max_kkt:.1e} over {points} path points, zero at and above lambda_max"
    ))
}

// ---------------------------------------------------------------- 4

fn recovery_simulation() -> Outcome {
    let mut superset = 0;
    let mut fp_lasso = 0usize;
    let mut fp_adaptive = 0usize;
    for seed in 0..20u64 {
        let ds = standardize(&CoxGenerator::three_signal(200, 50).generate(1000 + seed));
        let events: Vec<bool> = ds.outcomes().iter().map(|o| o.event).collect();
        let plan = make_cv_folds(&events, 10, seed).map_err(e2s)?;
        let opts = PathOptions::default();
        let (lasso, _) = fit_cv_enet(&ds, 1.0, None, &plan, &opts).map_err(e2s)?;
        let sel = lasso.selected();
        if (0..3).all(|j| sel.contains(&j)) {
            superset += 1;
        }
        fp_lasso += sel.iter().filter(|&&j| j >= 3).count();
        let adaptive = fit_adaptive_lasso(&ds, &plan, &opts).map_err(e2s)?;
        fp_adaptive += adaptive.fit.selected().iter().filter(|&&j| j >= 3).count();
    }
    let (ml, ma) = (fp_lasso as f64 / 20.0, fp_adaptive as f64 / 20.0);
    let detail = format!("superset {superset}/20, mean false positives lasso {ml:.2} vs adaptive {ma:.2}");
    ensure(superset >= 16 && ma <= ml, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 5

fn credit(hi: f64, lo: f64) -> f64 {
    if hi > lo {
        1.0
    } else if hi == lo {
        0.5
    } else {
        0.0
    }
}

fn random_instance(u: &mut Uniform, censor: bool) -> (Vec<O>, Vec<f64>) {
    let outcomes = (0..8)
        .map(|_| O {
            time: 1.0 + u.below(6) as f64,
            event: !censor || u.next() < 0.6,
        })
        .collect();
    let scores = (0..8).map(|_| u.below(5) as f64).collect();
    (outcomes, scores)
}

fn brute_harrell(scores: &[f64], out: &[O]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0usize);
    for i in 0..out.len() {
        for j in 0..out.len() {
            if out[i].event && out[i].time < out[j].time {
                pairs += 1;
                num += credit(scores[i], scores[j]);
            }
        }
    }
    num / pairs as f64
}

/// Censoring survival just before `t`, by direct product over censoring times.
fn brute_g_before(out: &[O], t: f64) -> f64 {
    let mut times: Vec<f64> = out.iter().filter(|o| !o.event && o.time < t).map(|o| o.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut g = 1.0;
    for s in times {
        let c = out.iter().filter(|o| !o.event && o.time == s).count() as f64;
        let y = out.iter().filter(|o| o.time >= s).count() as f64;
        g *= 1.0 - c / y;
    }
    g
}

fn brute_uno(scores: &[f64], out: &[O], tau: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..out.len() {
        if !out[i].event || out[i].time >= tau {
            continue;
        }
        let g = brute_g_before(out, out[i].time);
        let w = 1.0 / (g * g);
        for j in 0..out.len() {
            if out[i].time < out[j].time {
                den += w;
                num += w * credit(scores[i], scores[j]);
            }
        }
    }
    num / den
}

fn concordance_oracle() -> Outcome {
    let mut u = Uniform(5);
    let mut checked = 0;
    while checked < 50 {
        let (out, scores) = random_instance(&mut u, true);
        let Ok(h) = harrell_c(&scores, &out) else { continue };
        ensure(h.c_index == brute_harrell(&scores, &out), || format!("Harrell mismatch on {out:?}"))?;
        let g = censoring_km(&out).map_err(e2s)?;
        let tau = 5.0;
        if let Ok(c) = uno_c(&scores, &out, &g, tau) {
            let b = brute_uno(&scores, &out, tau);
            ensure(c.c_index == b, || format!("Uno {} vs {b} on {out:?}", c.c_index))?;
        }
        let mut times: Vec<f64> = out.iter().filter(|o| o.event).map(|o| o.time).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let values: Vec<Vec<f64>> = times.iter().map(|_| (0..8).map(|_| (u.below(4) as f64) / 4.0).collect()).collect();
        let curves = PredictedCurves::new(times.clone(), values.clone()).map_err(e2s)?;
        let a = antolini_c(&curves, &out).map_err(e2s)?;
        let (mut num, mut pairs) = (0.0, 0usize);
        for i in 0..8 {
            if !out[i].event {
                continue;
            }
            let k = times.iter().position(|&t| t == out[i].time).expect("event time on grid");
            for j in 0..8 {
                if out[i].time < out[j].time {
                    pairs += 1;
                    num += credit(-values[k][i], -values[k][j]);
                }
            }
        }
        ensure(a.c_index == num / pairs as f64, || format!("Antolini mismatch on {out:?}"))?;
        checked += 1;
    }

    for _ in 0..20 {
        let (out, scores) = random_instance(&mut u, false);
        let Ok(h) = harrell_c(&scores, &out) else { continue };
        let g = censoring_km(&out).map_err(e2s)?;
        let c = uno_c(&scores, &out, &g, 100.0).map_err(e2s)?;
        ensure(c.c_index == h.c_index, || format!("Uno {} != Harrell {} without censoring", c.c_index, h.c_index))?;
    }

    for seed in 0..5u64 {
        let ds = standardize(&CoxGenerator::new(60, 3, vec![1.0, -0.5, 0.0]).generate(400 + seed));
        let fit = fit_cox_newton(&ds, &[0, 1, 2]).map_err(e2s)?;
        let h = harrell_c(&fit.linear_predictors(&ds).map_err(e2s)?, ds.outcomes()).map_err(e2s)?;
        let curves = PredictedCurves::at_event_times(&fit, &ds).map_err(e2s)?;
        let a = antolini_c(&curves, ds.outcomes()).map_err(e2s)?;
        ensure(a.c_index == h.c_index, || format!("Antolini {} != Harrell {} under PH", a.c_index, h.c_index))?;
    }
    Ok("50 random 8-patient instances equal brute force; Uno=Harrell uncensored; Antolini=Harrell under PH".into())
}

// ---------------------------------------------------------------- 6

fn brier_oracle() -> Outcome {
    let out = [O::event(1.0), O::censored(2.0), O::event(4.0)];
    let g = censoring_km(&out).map_err(e2s)?;
    let pred = [0.3, 0.6, 0.8];
    // G(1-) = 1; G(3) = 1 - 1/2 (one censoring among two at risk at t = 2)
    let hand = (0.3 * 0.3 / 1.0 + 0.0 + (1.0 - 0.8) * (1.0 - 0.8) / 0.5) / 3.0;
    let bs = brier_score(&pred, &out, 3.0, &g).map_err(e2s)?;
    ensure(bs == hand, || format!("BS(3) = {bs}, hand = {hand}"))?;

    let mut u = Uniform(9);
    for _ in 0..20 {
        let out: Vec<O> = (0..15).map(|_| O::event(0.1 + 10.0 * u.next())).collect();
        let pred: Vec<f64> = (0..15).map(|_| u.next()).collect();
        let t = 5.0;
        let g = censoring_km(&out).map_err(e2s)?;
        let mse = pred
            .iter()
            .zip(&out)
            .map(|(s, o)| (s - if o.time > t { 1.0 } else { 0.0 }).powi(2))
            .sum::<f64>()
            / 15.0;
        let bs = brier_score(&pred, &out, t, &g).map_err(e2s)?;
        ensure((bs - mse).abs() <= 1e-15, || format!("uncensored BS {bs} vs MSE {mse}"))?;
    }

    for _ in 0..1000 {
        let (a, b, c) = (u.next(), u.next(), u.next());
        let w = dot632plus(a, b, c).weight;
        ensure((0.632..=1.0).contains(&w), || format!("weight {w} for ({a}, {b}, {c})"))?;
    }
    let same = dot632plus(0.1, 0.1, 0.3);
    ensure(same.weight == 0.632 && (same.estimate - 0.1).abs() <= 1e-16, || format!("{same:?}"))?;
    let full = dot632plus(0.1, 0.3, 0.3);
    ensure(full.weight == 1.0 && full.estimate == 0.3, || format!("{full:?}"))?;
    let mid = dot632plus(0.1, 0.2, 0.3);
    let w = 0.632 / (1.0 - 0.368 * 0.5);
    let expected = (1.0 - w) * 0.1 + w * 0.2;
    ensure(
        (mid.relative_overfit - 0.5).abs() <= 1e-15 && (mid.weight - w).abs() <= 1e-15 && (mid.estimate - expected).abs() <= 1e-15,
        || format!("{mid:?}, expected weight {w} and estimate {expected}"),
    )?;
    Ok("hand 3-patient BS exact, uncensored BS = MSE, .632+ weight bounds and closed forms".into())
}

// ---------------------------------------------------------------- 7

fn calibration_check() -> Outcome {
    let x = [-2.0f64, -1.0, 0.0, 0.7];
    let pred: Vec<f64> = x.iter().map(|v| (-v.exp()).exp()).collect();
    let obs: Vec<f64> = x.iter().map(|v| (-(0.3 + 1.2 * v).exp()).exp()).collect();
    let (a, b, _) = calibration_regression(&pred, &obs).map_err(e2s)?;
    ensure((a - 0.3).abs() < 1e-12 && (b - 1.2).abs() < 1e-12, || format!("recovered ({a}, {b})"))?;

    let horizon = 10.0;
    let mut generator = CoxGenerator::new(1000, 1, vec![1.0]);
    generator.censoring_rate = 0.02;
    let mut ok = 0;
    let mut fails = Vec::new();
    for seed in 1..=20u64 {
        let ds = generator.generate(seed);
        let pred: Vec<f64> = (0..ds.n()).map(|i| generator.true_survival(&ds.row(i), horizon)).collect();
        let r = calibration_fit(&pred, ds.outcomes(), horizon, &CalibrationOptions::default()).map_err(e2s)?;
        if r.intercept.abs() <= 0.15 && (0.85..=1.15).contains(&r.slope) {
            ok += 1;
        } else {
            fails.push(format!("seed {seed}: ({:.3}, {:.3})", r.intercept, r.slope));
        }
    }
    let detail = format!("affine recovery exact; calibrated Cox data within bounds in {ok}/20 seeds {fails:?}");
    ensure(ok >= 18, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 8

/// Piecewise-exponential log-likelihood by direct integration of the hazard.
fn direct_full_loglik(out: &[O], eta: &[f64], cuts: &[f64], hazards: &[f64]) -> f64 {
    let mut total = 0.0;
    for (o, &e) in out.iter().zip(eta) {
        let mut cum = 0.0;
        let mut start = 0.0;
        let mut current = hazards[hazards.len() - 1];
        for (k, &c) in cuts.iter().enumerate() {
            let end = if k + 1 == cuts.len() { f64::INFINITY } else { c };
            if o.time > start {
                cum += hazards[k] * (o.time.min(end) - start);
            }
            if o.time > start && o.time <= end {
                current = hazards[k];
            }
            start = c;
        }
        total += if o.event { current.ln() + e } else { 0.0 } - e.exp() * cum;
    }
    total
}

fn bayesian_suite() -> Outcome {
    let opts = |seed| McmcOptions {
        iterations: 5000,
        seed,
        ..McmcOptions::default()
    };

    let ds = standardize(&CoxGenerator::new(80, 3, vec![1.0, 0.0, 0.0]).generate(11));
    let bp = BaselineHazardPrior::from_data(&ds, 10, 2.0).map_err(e2s)?;
    for prior in [PriorSpec::laplace(), PriorSpec::spike_slab(), PriorSpec::horseshoe()] {
        let short = McmcOptions {
            iterations: 400,
            seed: 3,
            ..McmcOptions::default()
        };
        let a = run_mcmc(&ds, &prior, &bp, &short).map_err(e2s)?;
        let b = run_mcmc(&ds, &prior, &bp, &short).map_err(e2s)?;
        ensure(a == b, || format!("{} chain not reproducible", prior.name()))?;
    }

    let lambda = 1.7;
    let prior = PriorSpec::laplace_fixed(lambda);
    let hazards: Vec<f64> = (0..bp.n_intervals()).map(|k| 0.05 + 0.01 * k as f64).collect();
    let b1 = [0.4, -0.2, 0.1];
    let b2 = [-0.3, 0.5, 0.0];
    let lp = |b: &[f64]| laplace_log_posterior(&ds, b, &hazards, &prior, &bp, 10.0).map_err(e2s);
    let target = |b: &[f64]| {
        let eta: Vec<f64> = (0..ds.n()).map(|i| ds.row(i).iter().zip(b).map(|(x, c)| x * c).sum()).collect();
        direct_full_loglik(ds.outcomes(), &eta, &bp.cuts, &hazards) - lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    };
    let diff = (lp(&b1)? - lp(&b2)?) - (target(&b1) - target(&b2));
    ensure(diff.abs() < 1e-8, || format!("log-density differencing identity off by {diff:.2e}"))?;
    let check = full_loglik(ds.outcomes(), &vec![0.0; ds.n()], &bp.cuts, &hazards)
        - direct_full_loglik(ds.outcomes(), &vec![0.0; ds.n()], &bp.cuts, &hazards);
    ensure(check.abs() < 1e-8, || format!("full log-likelihood off by {check:.2e}"))?;

    let mut signs = 0;
    let mut covered = 0;
    let mut nulls = 0;
    for seed in 0..50u64 {
        let ds = standardize(&CoxGenerator::new(200, 5, vec![1.0, -1.0]).generate(2000 + seed));
        let bp = BaselineHazardPrior::from_data(&ds, 20, 2.0).map_err(e2s)?;
        let s = run_mcmc(&ds, &PriorSpec::laplace(), &bp, &opts(seed)).map_err(e2s)?;
        let c = posterior_summary(&s, 0.95).map_err(e2s)?.coefficients;
        if seed < 20 && c[0].mean > 0.0 && c[1].mean < 0.0 && c[0].lower > 0.0 && c[1].upper < 0.0 {
            signs += 1;
        }
        for cj in &c[2..5] {
            nulls += 1;
            if cj.lower <= 0.0 && cj.upper >= 0.0 {
                covered += 1;
            }
        }
    }
    let coverage = covered as f64 / nulls as f64;

    let mut mpm = 0;
    let mut exact = 0;
    for seed in 0..20u64 {
        let ds = standardize(&CoxGenerator::three_signal(200, 20).generate(3000 + seed));
        let bp = BaselineHazardPrior::from_data(&ds, 20, 2.0).map_err(e2s)?;
        let s = run_mcmc(&ds, &PriorSpec::spike_slab(), &bp, &opts(seed)).map_err(e2s)?;
        let sel = median_probability_model(&posterior_summary(&s, 0.95).map_err(e2s)?).map_err(e2s)?.selected;
        let hit = ["x1", "x2", "x3"].iter().all(|t| sel.iter().any(|s| s == t));
        if hit {
            mpm += 1;
            if sel.len() == 3 {
                exact += 1;
            }
        }
    }
    let detail = format!(
        "deterministic chains, identity {:.1e}, signs/intervals {signs}/20, null coverage {:.1}% ({covered}/{nulls}), \
         SSVS median-probability model recovers the 3 signals in {mpm}/20 (exactly in {exact}/20)",
        diff.abs(),
        100.0 * coverage
    );
    ensure(signs >= 16 && (0.85..=1.0).contains(&coverage) && mpm >= 16, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 9

fn run_binary(dir: &Path, data: &Path, config: &Path, out: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_survkit"))
        .args(["run", "--config"])
        .arg(config)
        .arg("--input")
        .arg(data)
        .arg("--out")
        .arg(dir.join(out))
        .env_remove("SURVKIT_OUT")
        .output()
        .map_err(e2s)?;
    ensure(status.status.success(), || {
        format!("run failed: {}", String::from_utf8_lossy(&status.stderr))
    })
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let ds = CoxGenerator::three_signal(150, 10).generate(21);
    let data = dir.path().join("data.csv");
    write_dataset(&ds, std::fs::File::create(&data).map_err(e2s)?).map_err(e2s)?;
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "seed = 7\n[model]\nkind = \"lasso\"\n[validation]\nfolds = 5\nbootstrap = 25\nhorizons = [1.0, 3.0, 5.0]\n",
    )
    .map_err(e2s)?;
    run_binary(dir.path(), &data, &config, "a")?;
    run_binary(dir.path(), &data, &config, "b")?;

    let mut files: Vec<String> = std::fs::read_dir(dir.path().join("a"))
        .map_err(e2s)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()
        .map_err(e2s)?;
    files.sort();
    for f in &files {
        let a = std::fs::read(dir.path().join("a").join(f)).map_err(e2s)?;
        let b = std::fs::read(dir.path().join("b").join(f)).map_err(e2s)?;
        ensure(a == b, || format!("{f} differs between identical runs"))?;
    }
    let pec = std::fs::read_to_string(dir.path().join("a/pec.csv")).map_err(e2s)?;
    let header: Vec<&str> = pec.lines().next().unwrap_or_default().split(',').collect();
    for col in ["null", "apparent", "dot632plus"] {
        ensure(header.contains(&col), || format!("pec.csv header lacks {col}: {header:?}"))?;
    }
    let svg = std::fs::read_to_string(dir.path().join("a/pec.svg")).map_err(e2s)?;
    for label in ["Null model", "Apparent", ".632+"] {
        ensure(svg.contains(&format!(">{label}</text>")), || format!("pec.svg legend lacks {label}"))?;
    }
    Ok(format!(
        "{} files byte-identical across two runs; pec.csv and pec.svg carry null, apparent and .632+ series",
        files.len()
    ))
}

// ----------------------------------------------------------------

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "Kaplan-Meier oracle", budget: Duration::from_secs(1), run: km_oracle },
        Criterion { id: 2, name: "gradient check", budget: Duration::from_secs(5), run: gradient_check },
        Criterion { id: 3, name: "penalized-solver oracle", budget: Duration::from_secs(30), run: penalized_oracle },
        Criterion { id: 4, name: "recovery simulation", budget: Duration::from_secs(300), run: recovery_simulation },
        Criterion { id: 5, name: "concordance oracle", budget: Duration::from_secs(10), run: concordance_oracle },
        Criterion { id: 6, name: "Brier/IBS", budget: Duration::from_secs(5), run: brier_oracle },
        Criterion { id: 7, name: "calibration", budget: Duration::from_secs(120), run: calibration_check },
        Criterion { id: 8, name: "Bayesian suite", budget: Duration::from_secs(900), run: bayesian_suite },
        Criterion { id: 9, name: "end-to-end reproducibility", budget: Duration::from_secs(180), run: end_to_end },
    ];
    let filter: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {:?} budget", c.budget)),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {} ({}): {} [{:.2}s / {}s]",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
