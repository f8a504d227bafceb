//! One function per subcommand: validated config in, table and plot out.

use std::time::Instant;

use chaoslab::chaos::{barrier_critical_levels, check_barrier_level, BarrierResult, BarrierSetup};
use chaoslab::dist::{DistSpec, InputSequence};
use chaoslab::engine::{secular_coeffs, secular_coeffs_dc};
use chaoslab::experiments::{
    mass_moment, mc_low_moment, phase_predict, scaling_fit, sobolev_partial_sum, tightness_diagnostic, Estimator, FitModel,
    FitReport, MassSetup, MomentQuery, Regime,
};
use chaoslab::partition::{exact_second_moment, EnumerationBudget, PartitionConstraints};

use crate::config::{
    BenchConfig, ChaosConfig, Defaults, Family, MomentsConfig, OracleConfig, PhaseScanConfig, SobolevConfig, TightnessConfig,
};
use crate::error::CliResult;
use crate::report::{num, Table};
use crate::svg::Plot;

pub struct Output {
    pub table: Table,
    pub plot: Plot,
    /// Non-fatal notes printed to stderr.
    pub warnings: Vec<String>,
}

fn budget(defaults: &Defaults) -> EnumerationBudget {
    EnumerationBudget {
        max_partitions: defaults.enumeration_budget,
        ..EnumerationBudget::default()
    }
}

pub fn oracle(cfg: &OracleConfig, defaults: &Defaults) -> CliResult<Output> {
    cfg.validate()?;
    let budget = budget(defaults);
    let mut table = Table::new(&["dist", "N", "constraint", "log_E2"]);
    let mut plot = Plot::new("exact second moment", "N", "log E|A_N|^2");
    for dist in &cfg.dists {
        for &min_part in &cfg.min_part {
            let c = PartitionConstraints::min_part(min_part);
            let label = if min_part == 1 { "none".to_string() } else { format!("min_part={min_part}") };
            let mut pts = Vec::new();
            for &n in &cfg.n {
                let v = exact_second_moment(dist, n, c, &budget)?.ln_abs();
                table.push(vec![dist.label(), n.to_string(), label.clone(), num(v)]);
                pts.push((n as f64, v));
            }
            plot.line(format!("{} {label}", dist.label()), pts);
        }
    }
    Ok(Output {
        table,
        plot,
        warnings: Vec::new(),
    })
}

/// Conditional estimator where the plain one is refused, plain elsewhere.
fn auto_estimator(dist: &DistSpec, q: f64) -> CliResult<Estimator> {
    let regime = phase_predict(dist, q)?.regime;
    Ok(match regime {
        Regime::Se | Regime::ExpSuper => Estimator::X1Conditional,
        _ => Estimator::Plain,
    })
}

pub fn moments(cfg: &MomentsConfig, seed: u64) -> CliResult<Output> {
    cfg.validate()?;
    let mut table = Table::new(&[
        "dist", "q", "N", "M", "estimator", "log_mean", "log_stderr", "regime", "log_psi", "residual",
    ]);
    let mut plot = Plot::new("moment residual against prediction", "N", "log_mean - log_psi");
    for dist in &cfg.dists {
        for &q in &cfg.q {
            let estimator = match cfg.estimator.fixed() {
                Some(e) => e,
                None => auto_estimator(dist, q)?,
            };
            let pred = phase_predict(dist, q)?;
            let mut pts = Vec::new();
            for &n in &cfg.n {
                let mut query = MomentQuery::new(*dist, n, q, cfg.replicates, estimator, seed);
                query.force_plain = cfg.force_plain;
                let e = mc_low_moment(&query)?;
                let psi = pred.log_psi(n as f64);
                table.push(vec![
                    dist.label(),
                    num(q),
                    n.to_string(),
                    cfg.replicates.to_string(),
                    estimator.label().into(),
                    num(e.log_mean),
                    num(e.log_stderr),
                    pred.regime.label().into(),
                    num(psi),
                    num(e.log_mean - psi),
                ]);
                pts.push((n as f64, e.log_mean - psi));
            }
            plot.line(format!("{} q={q}", dist.label()), pts);
        }
    }
    Ok(Output {
        table,
        plot,
        warnings: Vec::new(),
    })
}

fn fit_model(regime: Regime) -> FitModel {
    match regime {
        Regime::ExpSuper | Regime::Se => FitModel::SlopeVsN,
        _ => FitModel::SlopeVsLogN,
    }
}

pub fn phase_scan(cfg: &PhaseScanConfig, seed: u64) -> CliResult<Output> {
    cfg.validate()?;
    let (param_name, title) = match cfg.family {
        Family::Exp => ("gamma", "phase diagram, exponential tails"),
        Family::Se => ("p", "phase diagram, stretched-exponential tails"),
    };
    let mut table = Table::new(&[param_name, "q", "regime", "model", "fitted_slope", "fitted_stderr", "predicted_slope", "agree"]);
    let mut warnings = Vec::new();
    let (mut agree, mut disagree, mut unfitted) = (Vec::new(), Vec::new(), Vec::new());
    for &param in &cfg.params {
        let dist = cfg.dist(param);
        for &q in &cfg.q {
            let pred = phase_predict(&dist, q)?;
            let estimator = auto_estimator(&dist, q)?;
            let model = fit_model(pred.regime);
            let mut measured = Vec::new();
            for &n in &cfg.n {
                let e = mc_low_moment(&MomentQuery::new(dist, n, q, cfg.replicates, estimator, seed))?;
                measured.push((n as f64, e.log_mean));
            }
            let predicted: Vec<(f64, f64)> = cfg.n.iter().map(|&n| (n as f64, pred.log_psi(n as f64))).collect();
            let model_name = match model {
                FitModel::SlopeVsN => "slope_vs_N",
                _ => "slope_vs_logN",
            };
            let fits = scaling_fit(&measured, model).and_then(|f| Ok((f, scaling_fit(&predicted, model)?)));
            let row_head = vec![num(param), num(q), pred.regime.label().to_string(), model_name.to_string()];
            match fits {
                Ok((FitReport::Slope { slope, stderr, .. }, FitReport::Slope { slope: want, .. })) => {
                    let ok = (slope - want).abs() <= (3.0 * stderr).max(0.25 * want.abs().max(1.0));
                    let mut row = row_head;
                    row.extend([num(slope), num(stderr), num(want), ok.to_string()]);
                    table.push(row);
                    if ok { &mut agree } else { &mut disagree }.push((param, q));
                }
                Ok(_) => unreachable!("slope models return slopes"),
                Err(e) => {
                    warnings.push(format!("{param_name}={param} q={q}: degenerate fit ({e})"));
                    let mut row = row_head;
                    row.extend(["nan".into(), "nan".into(), "nan".into(), "unfitted".into()]);
                    table.push(row);
                    unfitted.push((param, q));
                }
            }
        }
    }
    let mut plot = Plot::new(title, param_name, "q");
    if cfg.family == Family::Exp {
        let qmax = cfg.q.iter().copied().fold(0.0, f64::max);
        plot.line("gamma = 2q", vec![(0.0, 0.0), (2.0 * qmax, qmax)]);
    }
    plot.scatter("agrees", agree, "#2ca02c");
    plot.scatter("disagrees", disagree, "#d62728");
    plot.scatter("no fit", unfitted, "#7f7f7f");
    Ok(Output { table, plot, warnings })
}

pub fn chaos(cfg: &ChaosConfig, defaults: &Defaults, seed: u64) -> CliResult<Output> {
    cfg.validate(defaults)?;
    let m_star = cfg.m_star.unwrap_or(defaults.m_star);
    let mut table = Table::new(&["kind", "K", "r", "param", "estimate", "stderr", "reference", "ratio"]);
    let mut plot = Plot::new("truncated chaos", "K", "estimate");
    for &k in &cfg.k {
        for &r in &cfg.r {
            for &q in &cfg.q {
                let setup = MassSetup {
                    k,
                    m_star,
                    r,
                    oversample: defaults.oversample,
                };
                let e = mass_moment(&cfg.dist, &setup, q, cfg.replicates, seed)?;
                let (kind, reference) = if q == 1.0 {
                    ("mass_mean", setup.log_mean_reference(&cfg.dist)?)
                } else {
                    let kf = k as f64;
                    ("mass_moment", q * (kf / (1.0 + (1.0 - q) * kf.ln().sqrt())).ln())
                };
                table.push(vec![
                    kind.into(),
                    k.to_string(),
                    num(r),
                    num(q),
                    num(e.log_mean),
                    num(e.log_stderr),
                    num(reference),
                    num((e.log_mean - reference).exp()),
                ]);
            }
            if !cfg.a.is_empty() {
                for &a in &cfg.a {
                    check_barrier_level(a, k)?;
                }
                let setup = BarrierSetup {
                    k,
                    r,
                    l1: defaults.l1,
                    m_star,
                    theta_grid: None,
                    mu_mode: cfg.mu_mode.into(),
                };
                let levels = barrier_critical_levels(&cfg.dist, &setup, seed, cfg.barrier_replicates)?;
                let mut prev: Option<f64> = None;
                let mut pts = Vec::new();
                for &a in &cfg.a {
                    let res = BarrierResult::from_levels(&levels, a, &setup);
                    let ratio = prev.map_or(f64::NAN, |p| res.p_hat / p);
                    table.push(vec![
                        "barrier".into(),
                        k.to_string(),
                        num(r),
                        num(a),
                        num(res.p_hat),
                        num(res.stderr),
                        num((-a).exp()),
                        num(ratio),
                    ]);
                    prev = Some(res.p_hat);
                    pts.push((a, res.p_hat));
                }
                plot.line(format!("barrier K={k} r={r}"), pts);
            }
        }
    }
    for &q in &cfg.q {
        let pts = table
            .rows
            .iter()
            .filter(|row| row[0] != "barrier" && row[3] == num(q))
            .map(|row| (row[1].parse::<f64>().unwrap_or(f64::NAN), row[4].parse::<f64>().unwrap_or(f64::NAN)))
            .collect();
        plot.line(format!("log E[mass^{q}]"), pts);
    }
    Ok(Output {
        table,
        plot,
        warnings: Vec::new(),
    })
}

pub fn tightness(cfg: &TightnessConfig, seed: u64) -> CliResult<Output> {
    cfg.validate()?;
    let rows = tightness_diagnostic(&cfg.dist, &cfg.n, cfg.replicates, seed, cfg.power)?;
    let mut table = Table::new(&["N", "power", "p10", "p50", "p90"]);
    let mut plot = Plot::new("weighted |A_N| percentiles", "N", "|A_N| (log(1+N))^power");
    for r in &rows {
        table.push(vec![r.n.to_string(), num(cfg.power), num(r.p10), num(r.p50), num(r.p90)]);
    }
    plot.line("p10", rows.iter().map(|r| (r.n as f64, r.p10)).collect());
    plot.line("p50", rows.iter().map(|r| (r.n as f64, r.p50)).collect());
    plot.line("p90", rows.iter().map(|r| (r.n as f64, r.p90)).collect());
    Ok(Output {
        table,
        plot,
        warnings: Vec::new(),
    })
}

pub fn sobolev(cfg: &SobolevConfig, seed: u64) -> CliResult<Output> {
    cfg.validate()?;
    let mut table = Table::new(&["s", "cutoff", "log_mean", "converged"]);
    let mut plot = Plot::new("Sobolev partial sums", "cutoff", "log mean partial sum");
    for &s in &cfg.s {
        let rep = sobolev_partial_sum(&cfg.dist, s, cfg.n_max, cfg.replicates, seed)?;
        for (c, v) in &rep.cutoffs {
            table.push(vec![num(s), c.to_string(), num(*v), rep.converged.to_string()]);
        }
        plot.line(format!("s={s}"), rep.cutoffs.iter().map(|(c, v)| (*c as f64, *v)).collect());
    }
    Ok(Output {
        table,
        plot,
        warnings: Vec::new(),
    })
}

pub fn bench(cfg: &BenchConfig, seed: u64) -> CliResult<Output> {
    cfg.validate()?;
    let mut table = Table::new(&["N", "path", "median_seconds"]);
    let mut plot = Plot::new("engine timing", "N", "seconds");
    let mut quad = Vec::new();
    let mut dc = Vec::new();
    for &n in &cfg.n {
        let x = InputSequence::generate(DistSpec::ComplexGaussian, seed, 0, n.max(1));
        let time = |f: &dyn Fn() -> chaoslab::Result<()>| -> CliResult<f64> {
            let mut ts = Vec::with_capacity(cfg.repeats);
            for _ in 0..cfg.repeats {
                let t = Instant::now();
                f()?;
                ts.push(t.elapsed().as_secs_f64());
            }
            ts.sort_by(f64::total_cmp);
            Ok(ts[ts.len() / 2])
        };
        let a = time(&|| secular_coeffs(&x, n, 1).map(|_| ()))?;
        let b = time(&|| secular_coeffs_dc(&x, n, 1).map(|_| ()))?;
        table.push(vec![n.to_string(), "quadratic".into(), num(a)]);
        table.push(vec![n.to_string(), "divide_and_conquer".into(), num(b)]);
        quad.push((n as f64, a));
        dc.push((n as f64, b));
    }
    plot.line("quadratic", quad);
    plot.line("divide_and_conquer", dc);
    Ok(Output {
        table,
        plot,
        warnings: Vec::new(),
    })
}
