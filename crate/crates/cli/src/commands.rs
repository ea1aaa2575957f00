//! One function per experiment: parse the relevant flags, call the core
//! operation, and lay out the table and summary.

use std::f64::consts::PI;
use std::sync::Arc;

use slm_core::analytics::{
    self, bes3_from_zero_scaling_check, black_scholes_price, inv_bessel_call_deriv, inv_bessel_call_slope_mc,
    inverse_bessel_price, local_time_rate, local_time_slope_mc, CallTermStructure, OptionKind,
};
use slm_core::examples_suite::{
    conditioned_exit_expectation, conditioned_exit_profile, disc_exit_frequency, disc_harmonic_measure,
    dyson_ratio_expectation, inverse_entry_expectation, ratio_martingale_check, size_biased_expectations,
    vandermonde, vandermonde_control, DiscArc, SizeBiasedConfig,
};
use slm_core::htransform::{
    call, dual_expectation, madan_yor_price, martingale_defect, payoff_transform, price_profile, put, Eta,
    Payoff, ProbeGrid, TransformPair, Verdict, VERDICT_SIGMAS,
};
use slm_core::kelvin::{
    commutation_order, conformal_inversion_profile, invert_point, inverted_covariation, kelvin_transform,
    reference_fields, BoundedField, ScalarField,
};
use slm_core::mc::{joint_z, nondecreasing_within, separated_above, trend, Trend};
use slm_core::sde::mean_profile;
use slm_core::{BesqDimension, MCEstimate, McPlan, ProcessModel, RandomSource, TimeGrid};

use crate::args::{Check, Command, Experiment, KelvinExperiment, Opts};
use crate::output::Cell;
use crate::{CliError, Report};

type Res<T> = Result<T, CliError>;

const DEFAULT_PATHS: usize = 100_000;
const K: f64 = VERDICT_SIGMAS;

pub fn dispatch(command: Command, o: &Opts) -> Res<Report> {
    match command {
        Command::Simulate => simulate(o),
        Command::Defect => defect(o),
        Command::Price => price(o),
        Command::TermStructure => term_structure(o),
        Command::Verify { check } => match check {
            Check::Duality => verify_duality(o),
            Check::Scaling => verify_scaling(o),
            Check::Slope => verify_slope(o),
            Check::LocalTime => verify_local_time(o),
        },
        Command::Examples { experiment } => match experiment {
            Experiment::SizeBiased => size_biased(o),
            Experiment::Ratio => ratio(o),
            Experiment::Dyson => dyson(o),
            Experiment::VandermondeControl => control(o),
            Experiment::InverseEntry => inverse_entry(o),
            Experiment::ExitFrequency => exit_frequency(o),
            Experiment::ConditionedExit => conditioned_exit(o),
            Experiment::ExitProfile => exit_profile(o),
        },
        Command::Kelvin { experiment } => match experiment {
            KelvinExperiment::Involution => involution(o),
            KelvinExperiment::Residual => residual(o),
            KelvinExperiment::Inversion => inversion(o),
            KelvinExperiment::Covariation => covariation(o),
        },
    }
}

// ---------------------------------------------------------------- parsing

fn arg_err(msg: impl Into<String>) -> CliError {
    CliError::Argument(msg.into())
}

fn parse_list(s: &str, what: &str) -> Res<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| arg_err(format!("{what}: `{x}` is not a number")))
        })
        .collect()
}

fn grid_from_spec(spec: &str) -> Res<TimeGrid<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || arg_err(format!("t-grid `{spec}` must be lin:a:b:n or log:a:b:n"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let a: f64 = parts[1].parse().map_err(|_| bad())?;
    let b: f64 = parts[2].parse().map_err(|_| bad())?;
    let n: usize = parts[3].parse().map_err(|_| bad())?;
    Ok(match parts[0] {
        "lin" => TimeGrid::linspace(a, b, n)?,
        "log" => TimeGrid::logspace(a, b, n)?,
        _ => return Err(bad()),
    })
}

/// Observation times from `--t` or `--t-grid`, strictly increasing and positive.
fn times(o: &Opts) -> Res<Vec<f64>> {
    let ts = match (&o.t, &o.t_grid) {
        (Some(_), Some(_)) => return Err(arg_err("give either --t or --t-grid, not both")),
        (Some(t), None) => parse_list(t, "--t")?,
        (None, Some(g)) => grid_from_spec(g)?.times().to_vec(),
        (None, None) => return Err(arg_err("missing --t or --t-grid")),
    };
    if ts.iter().any(|t| !(*t > 0.0) || !t.is_finite()) || ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(arg_err("times must be positive, finite and strictly increasing"));
    }
    Ok(ts)
}

fn single_time(o: &Opts) -> Res<f64> {
    let ts = times(o)?;
    if ts.len() != 1 {
        return Err(arg_err("this command takes a single --t"));
    }
    Ok(ts[0])
}

fn plan(o: &Opts) -> Res<McPlan> {
    let seed = o
        .seed
        .ok_or_else(|| arg_err("--seed is required for Monte-Carlo commands"))?;
    let paths = o.paths.unwrap_or(DEFAULT_PATHS);
    if paths == 0 {
        return Err(arg_err("--paths must be positive"));
    }
    let workers = match o.workers {
        Some(w) => w,
        None => match std::env::var("SLM_WORKERS") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| arg_err(format!("SLM_WORKERS=`{v}` is not a worker count")))?,
            Err(_) => 0,
        },
    };
    Ok(McPlan::new(paths, seed).with_workers(workers))
}

fn required<T: Copy>(v: Option<T>, flag: &str) -> Res<T> {
    v.ok_or_else(|| arg_err(format!("missing {flag}")))
}

fn scalar_x0(o: &Opts, default: f64) -> Res<f64> {
    match &o.x0 {
        None => Ok(default),
        Some(s) => {
            let v = parse_list(s, "--x0")?;
            if v.len() != 1 {
                return Err(arg_err("--x0 must be a single number for this model"));
            }
            Ok(v[0])
        }
    }
}

fn point<const D: usize>(s: Option<&str>, default: [f64; D], flag: &str) -> Res<[f64; D]> {
    match s {
        None => Ok(default),
        Some(s) => parse_list(s, flag)?
            .try_into()
            .map_err(|_| arg_err(format!("{flag} needs {D} comma-separated numbers"))),
    }
}

fn model(o: &Opts) -> Res<ProcessModel> {
    let name = o.model.as_deref().ok_or_else(|| arg_err("missing --model"))?;
    let m = match name {
        "absorbed-bm" => ProcessModel::AbsorbedBm { x0: scalar_x0(o, 1.0)? },
        "free-bm" => ProcessModel::FreeBm { x0: scalar_x0(o, 0.0)? },
        "bes3" => ProcessModel::Bes3 { x0: scalar_x0(o, 1.0)? },
        "inverse-bes3" => ProcessModel::InverseBes3 { x0: scalar_x0(o, 1.0)? },
        "besq0" => ProcessModel::Besq { delta: BesqDimension::Zero, z: scalar_x0(o, 1.0)? },
        "besq4" => ProcessModel::Besq { delta: BesqDimension::Four, z: scalar_x0(o, 1.0)? },
        "gbm" => ProcessModel::Gbm { s0: scalar_x0(o, 1.0)?, sigma: required(o.sigma, "--sigma")? },
        "dyson" => ProcessModel::Dyson { start: start(o)? },
        "spliced-bubble" => ProcessModel::SplicedBubble { s0: scalar_x0(o, 1.0)? },
        other => return Err(arg_err(format!("unknown model `{other}`"))),
    };
    m.validate()?;
    Ok(m)
}

fn start(o: &Opts) -> Res<Vec<f64>> {
    parse_list(o.start.as_deref().ok_or_else(|| arg_err("missing --start"))?, "--start")
}

fn option_kind(o: &Opts) -> Res<OptionKind> {
    match o.kind.as_deref().unwrap_or("call") {
        "call" => Ok(OptionKind::Call),
        "put" => Ok(OptionKind::Put),
        other => Err(arg_err(format!("unknown option kind `{other}`"))),
    }
}

fn arc(s: &str) -> Res<DiscArc> {
    let bad = || arg_err(format!("arc `{s}` must be lo:hi in radians"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok(DiscArc::new(lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?)?)
}

fn arc_or(s: Option<&str>, default: DiscArc) -> Res<DiscArc> {
    s.map_or(Ok(default), arc)
}

// ---------------------------------------------------------------- formatting

fn pm(e: &MCEstimate) -> String {
    format!("{:.6} ± {:.2e}", e.mean, e.stderr)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run_tag(name: &str, p: &McPlan) -> String {
    format!("{name} paths={} seed={}", p.n_paths, p.seed)
}

// ---------------------------------------------------------------- commands

fn simulate(o: &Opts) -> Res<Report> {
    let m = model(o)?;
    let ts = times(o)?;
    let p = plan(o)?;
    let prof = mean_profile(&m, &ts, &p)?;
    let mut rows = Vec::new();
    for (t, ests) in &prof {
        for (i, e) in ests.iter().enumerate() {
            rows.push(vec![Cell::from(*t), Cell::from(i), e.mean.into(), e.stderr.into()]);
        }
    }
    let first: Vec<MCEstimate> = prof.iter().map(|(_, e)| e[0]).collect();
    let (t_last, last) = prof.last().expect("nonempty times");
    Ok(Report {
        header: vec!["t", "coordinate", "mean", "stderr"],
        rows,
        summary: format!(
            "{}: model={} E[X(0)] at t={t_last}: {}; trend={}",
            run_tag("simulate", &p),
            o.model.as_deref().unwrap_or_default(),
            pm(&last[0]),
            trend(&first, K).label()
        ),
    })
}

fn defect(o: &Opts) -> Res<Report> {
    let m = model(o)?;
    let ts = times(o)?;
    let p = plan(o)?;
    let (pair, closed): (TransformPair, Box<dyn Fn(f64) -> Res<f64>>) = match m {
        ProcessModel::InverseBes3 { x0 } => (
            TransformPair::inverse_bessel_from(x0),
            Box::new(move |t| Ok(x0 * analytics::absorption_probability(t, 1.0 / x0)?)),
        ),
        ProcessModel::Gbm { sigma, .. } => (TransformPair::gbm(sigma), Box::new(|_| Ok(0.0))),
        _ => return Err(arg_err("defect supports --model inverse-bes3 and gbm")),
    };
    let rep = martingale_defect(&pair, &ts, &p)?;
    let mut rows = Vec::new();
    let mut within = true;
    for (t, e) in &rep.points {
        let c = closed(*t)?;
        within &= e.within(c, K);
        rows.push(vec![Cell::from(*t), e.mean.into(), e.stderr.into(), c.into()]);
    }
    let (t_h, at_h) = rep.points.last().expect("nonempty times");
    let label = match rep.verdict {
        Verdict::StrictOnHorizon => "strict-on-horizon",
        Verdict::ConsistentWithMartingale => "consistent-with-martingale",
    };
    Ok(Report {
        header: vec!["t", "defect", "stderr", "closed_form"],
        rows,
        summary: format!(
            "{}: defect at t={t_h}: {}; verdict={label}; closed-form match {}",
            run_tag("defect", &p),
            pm(at_h),
            verdict(within)
        ),
    })
}

fn closed_price(m: &ProcessModel, kind: OptionKind, t: f64, k: f64) -> Res<f64> {
    Ok(match *m {
        ProcessModel::InverseBes3 { x0 } => inverse_bessel_price(kind, x0, t, k)?,
        ProcessModel::Gbm { s0, sigma } => black_scholes_price(kind, s0, sigma, t, k)?,
        _ => f64::NAN,
    })
}

fn price(o: &Opts) -> Res<Report> {
    let m = model(o)?;
    let kind = option_kind(o)?;
    let k = required(o.strike, "--strike")?;
    let p = plan(o)?;
    let payoff = match kind {
        OptionKind::Call => call(k),
        OptionKind::Put => put(k),
    };
    if let Some(b) = &o.barriers {
        if kind != OptionKind::Call {
            return Err(arg_err("barrier prices are defined for calls"));
        }
        let barriers = parse_list(b, "--barriers")?;
        let t = single_time(o)?;
        let seq = madan_yor_price(&m, k, t, &barriers, &p)?;
        let plain = price_profile(&m, &payoff, &[t], &p.side(1))?[0].1;
        let ests: Vec<MCEstimate> = seq.iter().map(|(_, e)| *e).collect();
        let monotone = nondecreasing_within(&ests, K);
        let top = ests.last().expect("nonempty barriers");
        let above = separated_above(top, &plain, K);
        let rows = seq
            .iter()
            .map(|(n, e)| vec![Cell::from(*n), e.mean.into(), e.stderr.into(), plain.mean.into(), plain.stderr.into()])
            .collect();
        return Ok(Report {
            header: vec!["barrier", "price", "stderr", "plain_price", "plain_stderr"],
            rows,
            summary: format!(
                "{}: barrier call T={t} K={k} top {} vs plain {}; nondecreasing {}; top above plain {}",
                run_tag("price", &p),
                pm(top),
                pm(&plain),
                verdict(monotone),
                verdict(above)
            ),
        });
    }
    let ts = times(o)?;
    let prof = price_profile(&m, &payoff, &ts, &p)?;
    let mut rows = Vec::new();
    for (t, e) in &prof {
        rows.push(vec![
            Cell::from(*t),
            e.mean.into(),
            e.stderr.into(),
            closed_price(&m, kind, *t, k)?.into(),
        ]);
    }
    let ests: Vec<MCEstimate> = prof.iter().map(|(_, e)| *e).collect();
    let first_vs_last = separated_above(&ests[0], ests.last().unwrap(), K);
    Ok(Report {
        header: vec!["t", "price", "stderr", "closed_form"],
        rows,
        summary: format!(
            "{}: {} K={k} trend={}; nondecreasing {}; first above last {}",
            run_tag("price", &p),
            if kind == OptionKind::Call { "call" } else { "put" },
            trend(&ests, K).label(),
            verdict(nondecreasing_within(&ests, K)),
            verdict(first_vs_last)
        ),
    })
}

fn term_structure(o: &Opts) -> Res<Report> {
    let k = required(o.strike, "--strike")?;
    let grid = TimeGrid::from_times(times(o)?)?;
    let ts = CallTermStructure::new(k, grid)?;
    let rows = ts
        .t_grid
        .times()
        .iter()
        .zip(ts.values.iter().zip(&ts.derivative))
        .map(|(&t, (&v, &d))| vec![Cell::from(t), v.into(), d.into()])
        .collect();
    let all_negative = ts.derivative.iter().all(|d| *d < 0.0);
    let thr = match ts.threshold() {
        Some(th) => {
            let after = ts
                .t_grid
                .times()
                .iter()
                .zip(&ts.derivative)
                .filter(|(t, _)| **t >= th)
                .all(|(_, d)| *d < 0.0);
            format!("threshold={th:.4} threshold_exact={th}; decreasing beyond threshold {}", verdict(after))
        }
        None => "threshold=none (strike <= 1/2)".to_string(),
    };
    Ok(Report {
        header: vec!["t", "value", "derivative"],
        rows,
        summary: format!("term-structure K={k}: {thr}; derivative negative on grid: {all_negative}"),
    })
}

fn duality_payoff(o: &Opts) -> Res<(String, Payoff)> {
    let name = o.payoff.as_deref().unwrap_or("put");
    Ok(match name {
        "put" => {
            let k = required(o.strike, "--strike")?;
            (format!("put K={k}"), put(k))
        }
        "call" => {
            let k = required(o.strike, "--strike")?;
            (format!("call K={k}"), call(k))
        }
        "sqrt" => ("sqrt".into(), Arc::new(|x: f64| x.sqrt())),
        "min" => {
            let c = required(o.cap, "--cap")?;
            (format!("min(x,{c})"), Arc::new(move |x: f64| x.min(c)))
        }
        "identity" => ("identity".into(), Arc::new(|x: f64| x)),
        other => return Err(arg_err(format!("unknown payoff `{other}`"))),
    })
}

fn verify_duality(o: &Opts) -> Res<Report> {
    let (name, h) = duality_payoff(o)?;
    let t = single_time(o)?;
    let p = plan(o)?;
    let tr = payoff_transform(h, &ProbeGrid::default())?;
    let eta = match tr.eta() {
        Eta::Finite(e) => e,
        Eta::Infinite => f64::INFINITY,
    };
    let d = dual_expectation(&TransformPair::inverse_bessel(), &tr, t, &p)?;
    let z = d.z();
    Ok(Report {
        header: vec!["side", "mean", "stderr"],
        rows: vec![
            vec!["lhs".into(), d.lhs.mean.into(), d.lhs.stderr.into()],
            vec!["rhs".into(), d.rhs.mean.into(), d.rhs.stderr.into()],
        ],
        summary: format!(
            "{}: duality {name} t={t} eta={eta}: lhs {} rhs {} |lhs-rhs|/se={z:.3} {}",
            run_tag("verify", &p),
            pm(&d.lhs),
            pm(&d.rhs),
            verdict(z < K)
        ),
    })
}

fn verify_scaling(o: &Opts) -> Res<Report> {
    let t = single_time(o)?;
    let u = required(o.u, "--u")?;
    let k = required(o.strike, "--strike")?;
    let p = plan(o)?;
    let c = bes3_from_zero_scaling_check(t, u, k, &p)?;
    let z = joint_z(&c.lhs, &c.rhs);
    let strict = separated_above(&c.at_t, &c.lhs, K);
    Ok(Report {
        header: vec!["quantity", "mean", "stderr"],
        rows: vec![
            vec!["lhs_at_u".into(), c.lhs.mean.into(), c.lhs.stderr.into()],
            vec!["rhs_scaled".into(), c.rhs.mean.into(), c.rhs.stderr.into()],
            vec!["at_t".into(), c.at_t.mean.into(), c.at_t.stderr.into()],
        ],
        summary: format!(
            "{}: scaling t={t} u={u} K={k}: identity z={z:.3} {}; at_t {} above lhs {}",
            run_tag("verify", &p),
            verdict(z < K),
            pm(&c.at_t),
            verdict(strict)
        ),
    })
}

fn verify_slope(o: &Opts) -> Res<Report> {
    let k = required(o.strike, "--strike")?;
    let step = o.step.unwrap_or(0.25);
    let ts = times(o)?;
    let p = plan(o)?;
    let mut rows = Vec::new();
    let mut agree = true;
    for (j, &t) in ts.iter().enumerate() {
        let e = inv_bessel_call_slope_mc(t, k, step, &p.side(j as u64))?;
        let d = inv_bessel_call_deriv(t, k)?;
        agree &= e.mean.signum() == d.signum() && e.mean.abs() > K * e.stderr;
        rows.push(vec![Cell::from(t), e.mean.into(), e.stderr.into(), d.into()]);
    }
    Ok(Report {
        header: vec!["t", "slope", "stderr", "closed_form_derivative"],
        rows,
        summary: format!("{}: slope K={k} signs agree {}", run_tag("verify", &p), verdict(agree)),
    })
}

fn verify_local_time(o: &Opts) -> Res<Report> {
    let k = required(o.strike, "--strike")?;
    let t = single_time(o)?;
    let step = o.step.unwrap_or(0.05);
    let p = plan(o)?;
    let e = local_time_slope_mc(t, k, step, &p)?;
    let exact = 0.5 * k * local_time_rate(t, 1.0 / k)?;
    let rel = (e.mean - exact).abs() / exact;
    Ok(Report {
        header: vec!["t", "estimate", "stderr", "exact"],
        rows: vec![vec![Cell::from(t), e.mean.into(), e.stderr.into(), exact.into()]],
        summary: format!(
            "{}: local-time rate K={k} t={t}: {} vs {exact:.6} rel.err {rel:.3} {}",
            run_tag("verify", &p),
            pm(&e),
            verdict(rel < 0.05)
        ),
    })
}

fn size_biased(o: &Opts) -> Res<Report> {
    let cfg = SizeBiasedConfig::new(o.n.unwrap_or(2), o.z.unwrap_or(1.0), TimeGrid::from_times(times(o)?)?)?;
    let p = plan(o)?;
    let rows_est = size_biased_expectations(&cfg, &p)?;
    let col = |f: fn(&slm_core::examples_suite::SizeBiasedRow) -> MCEstimate| -> Vec<MCEstimate> {
        rows_est.iter().map(f).collect()
    };
    let n_ = col(|r| r.total_sq_over_first);
    let u_ = col(|r| r.second_times_total_over_first);
    let v_ = col(|r| r.product_times_total_over_first);
    let m_ = col(|r| r.total_times_product);
    let decreasing = [&n_, &u_, &v_].iter().all(|c| trend(c, K) == Trend::StrictlyDecreasing);
    let flat = trend(&m_, K) == Trend::Flat;
    let rows = rows_est
        .iter()
        .map(|r| {
            let mut row = vec![Cell::from(r.t)];
            for e in [
                r.total_sq_over_first,
                r.second_times_total_over_first,
                r.product_times_total_over_first,
                r.total_times_product,
            ] {
                row.push(e.mean.into());
                row.push(e.stderr.into());
            }
            row
        })
        .collect();
    Ok(Report {
        header: vec!["t", "N", "N_stderr", "U", "U_stderr", "V", "V_stderr", "M", "M_stderr"],
        rows,
        summary: format!(
            "{}: size-biased n={} z={}: N,U,V strictly decreasing {}; M flat {}",
            run_tag("examples", &p),
            cfg.n(),
            cfg.z(),
            verdict(decreasing),
            verdict(flat)
        ),
    })
}

fn ratio(o: &Opts) -> Res<Report> {
    let cfg = SizeBiasedConfig::new(o.n.unwrap_or(2), o.z.unwrap_or(1.0), TimeGrid::from_times(times(o)?)?)?;
    let p = plan(o)?;
    let target = 1.0 / cfg.n() as f64;
    let prof = ratio_martingale_check(&cfg, &p)?;
    let ok = prof.iter().all(|(_, e)| e.within(target, K));
    Ok(Report {
        header: vec!["t", "share", "stderr"],
        rows: prof.iter().map(|(t, e)| vec![Cell::from(*t), e.mean.into(), e.stderr.into()]).collect(),
        summary: format!(
            "{}: ratio n={}: constant at 1/n={target:.6} {}",
            run_tag("examples", &p),
            cfg.n(),
            verdict(ok)
        ),
    })
}

fn dyson(o: &Opts) -> Res<Report> {
    let s = start(o)?;
    let m = o.m.unwrap_or(2);
    let p = plan(o)?;
    let prof = dyson_ratio_expectation(m, &s, &TimeGrid::from_times(times(o)?)?, &p)?;
    let ests: Vec<MCEstimate> = prof.iter().map(|(_, e)| *e).collect();
    Ok(Report {
        header: vec!["t", "ratio", "stderr"],
        rows: prof.iter().map(|(t, e)| vec![Cell::from(*t), e.mean.into(), e.stderr.into()]).collect(),
        summary: format!(
            "{}: dyson ratio m={m} n={}: ordering held on every path; strictly decreasing {}",
            run_tag("examples", &p),
            s.len(),
            verdict(trend(&ests, K) == Trend::StrictlyDecreasing)
        ),
    })
}

fn control(o: &Opts) -> Res<Report> {
    let s = start(o)?;
    let p = plan(o)?;
    let v0 = vandermonde(&s);
    let prof = vandermonde_control(&s, &TimeGrid::from_times(times(o)?)?, &p)?;
    let ok = prof.iter().all(|(_, e)| e.within(v0, K));
    Ok(Report {
        header: vec!["t", "mean", "stderr", "start_value"],
        rows: prof
            .iter()
            .map(|(t, e)| vec![Cell::from(*t), e.mean.into(), e.stderr.into(), v0.into()])
            .collect(),
        summary: format!(
            "{}: vandermonde control n={}: constant at {v0} {}",
            run_tag("examples", &p),
            s.len(),
            verdict(ok)
        ),
    })
}

fn inverse_entry(o: &Opts) -> Res<Report> {
    let s = start(o)?;
    let i = o.column.unwrap_or(1);
    let p = plan(o)?;
    let prof = inverse_entry_expectation(i, &s, &TimeGrid::from_times(times(o)?)?, &p)?;
    Ok(Report {
        header: vec!["t", "mean_abs_entry", "stderr"],
        rows: prof.iter().map(|(t, e)| vec![Cell::from(*t), e.mean.into(), e.stderr.into()]).collect(),
        summary: format!(
            "{}: inverse entry ({}, {i}): adjugate identity held on every path and time",
            run_tag("examples", &p),
            s.len()
        ),
    })
}

fn default_arcs() -> Vec<DiscArc> {
    vec![
        DiscArc::upper_half(),
        DiscArc::new(0.5, 2.0).expect("static arc"),
        DiscArc::new(3.5, 5.5).expect("static arc"),
    ]
}

fn exit_frequency(o: &Opts) -> Res<Report> {
    let x0 = point(o.x0.as_deref(), [0.5, 0.0], "--x0")?;
    let arcs = match &o.arcs {
        Some(s) => s.split(',').map(arc).collect::<Res<Vec<_>>>()?,
        None => default_arcs(),
    };
    let p = plan(o)?;
    let freq = disc_exit_frequency(x0, &arcs, &p)?;
    let mut rows = Vec::new();
    let mut ok = true;
    for (a, e) in arcs.iter().zip(&freq) {
        let q = disc_harmonic_measure(x0, a)?;
        ok &= e.within(q, K);
        rows.push(vec![Cell::from(a.lo()), a.hi().into(), e.mean.into(), e.stderr.into(), q.into()]);
    }
    Ok(Report {
        header: vec!["arc_lo", "arc_hi", "frequency", "stderr", "harmonic_measure"],
        rows,
        summary: format!(
            "{}: exit frequency x0=({}, {}): quadrature match {}",
            run_tag("examples", &p),
            x0[0],
            x0[1],
            verdict(ok)
        ),
    })
}

fn exit_arcs(o: &Opts) -> Res<(DiscArc, DiscArc)> {
    let exit = arc_or(o.exit_arc.as_deref(), DiscArc::upper_half())?;
    let payoff = arc_or(o.payoff_arc.as_deref(), DiscArc::new(PI + 0.2, 2.0 * PI - 0.2)?)?;
    Ok((exit, payoff))
}

fn conditioned_exit(o: &Opts) -> Res<Report> {
    let x0 = point(o.x0.as_deref(), [0.0, 0.0], "--x0")?;
    let (exit, payoff) = exit_arcs(o)?;
    let t = single_time(o)?;
    let p = plan(o)?;
    let r = conditioned_exit_expectation(x0, &exit, &payoff, t, &p)?;
    let z = joint_z(&r.via_rejection, &r.via_ptoq);
    Ok(Report {
        header: vec!["estimator", "mean", "stderr"],
        rows: vec![
            vec!["rejection".into(), r.via_rejection.mean.into(), r.via_rejection.stderr.into()],
            vec!["change_of_measure".into(), r.via_ptoq.mean.into(), r.via_ptoq.stderr.into()],
        ],
        summary: format!(
            "{}: conditioned exit t={t}: rejection {} vs change-of-measure {} z={z:.3} {}; acceptance={:.4} start={:.6}",
            run_tag("examples", &p),
            pm(&r.via_rejection),
            pm(&r.via_ptoq),
            verdict(z < K),
            r.acceptance,
            r.start_value
        ),
    })
}

fn exit_profile(o: &Opts) -> Res<Report> {
    let x0 = point(o.x0.as_deref(), [0.0, 0.0], "--x0")?;
    let (exit, payoff) = exit_arcs(o)?;
    let ts = times(o)?;
    let p = plan(o)?;
    let prof = conditioned_exit_profile(x0, &exit, &payoff, &ts, &p)?;
    let ests: Vec<MCEstimate> = prof.iter().map(|(_, e)| *e).collect();
    let n0 = disc_harmonic_measure(x0, &payoff)? / disc_harmonic_measure(x0, &exit)?;
    Ok(Report {
        header: vec!["t", "mean", "stderr"],
        rows: prof.iter().map(|(t, e)| vec![Cell::from(*t), e.mean.into(), e.stderr.into()]).collect(),
        summary: format!(
            "{}: exit profile start={n0:.6}: strictly decreasing {}",
            run_tag("examples", &p),
            verdict(trend(&ests, K) == Trend::StrictlyDecreasing)
        ),
    })
}

const INVOLUTION_TOL: f64 = 1e-12;

fn involution(o: &Opts) -> Res<Report> {
    let seed = required(o.seed, "--seed")?;
    let count = o.points.unwrap_or(100);
    let u = ScalarField::<f64>::new(3, Arc::new(|x: &[f64]| x[0] * x[1]))?;
    let kk = kelvin_transform(&kelvin_transform(&u));
    let mut rows = Vec::with_capacity(count);
    let mut worst = 0.0f64;
    for i in 0..count {
        let mut src = RandomSource::new(seed, i as u64);
        let x = [src.gaussian(), src.gaussian(), src.gaussian()];
        let back = invert_point(&invert_point(&x)?)?;
        let point_err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (a, b) = (u.eval(&x)?, kk.eval(&x)?);
        let field_err = (a - b).abs() / a.abs().max(1.0);
        worst = worst.max(point_err).max(field_err);
        rows.push(vec![Cell::from(i), x[0].into(), x[1].into(), x[2].into(), point_err.into(), field_err.into()]);
    }
    Ok(Report {
        header: vec!["index", "x1", "x2", "x3", "point_error", "field_error"],
        rows,
        summary: format!(
            "kelvin involution points={count} seed={seed}: max error {worst:.3e} {}",
            verdict(worst <= INVOLUTION_TOL)
        ),
    })
}

fn residual(o: &Opts) -> Res<Report> {
    let y = point(o.point.as_deref(), [0.7, -0.4, 0.5], "--point")?;
    let steps = match &o.steps {
        Some(s) => parse_list(s, "--steps")?,
        None => vec![1e-2, 5e-3, 2.5e-3],
    };
    let mut rows = Vec::new();
    let mut min_order = f64::INFINITY;
    for (name, u) in reference_fields::<f64>(3)? {
        let c = commutation_order(&u, &y, &steps)?;
        min_order = min_order.min(c.order);
        for (h, r) in steps.iter().zip(&c.residuals) {
            rows.push(vec![Cell::from(name), (*h).into(), (*r).into(), c.order.into()]);
        }
    }
    Ok(Report {
        header: vec!["field", "h", "residual", "order"],
        rows,
        summary: format!(
            "kelvin residual: minimum observed order {min_order:.3} {}",
            verdict(min_order >= 1.9)
        ),
    })
}

fn test_field(o: &Opts) -> Res<BoundedField> {
    let spec = o.field.as_deref().unwrap_or("min-norm:5");
    if spec == "one" {
        return Ok(BoundedField::constant(1.0));
    }
    let cap: f64 = spec
        .strip_prefix("min-norm:")
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| arg_err(format!("field `{spec}` must be one or min-norm:c")))?;
    Ok(BoundedField::new(
        cap.abs(),
        Arc::new(move |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt().min(cap)),
    ))
}

fn inversion(o: &Opts) -> Res<Report> {
    let radius = o.radius.unwrap_or(0.5);
    let x0 = point(o.x0.as_deref(), [1.0, 0.0, 0.0], "--x0")?;
    let u = test_field(o)?;
    let ts = times(o)?;
    let p = plan(o)?;
    let prof = conformal_inversion_profile(radius, x0, &u, &ts, &p)?;
    let star = invert_point(&x0)?;
    let mut rows = Vec::new();
    let (mut identity, mut weight, mut coords) = (true, true, true);
    for q in &prof {
        identity &= joint_z(&q.lhs, &q.rhs) < K;
        weight &= q.weight_mean.within(1.0, K);
        let mut row = vec![Cell::from(q.t)];
        for e in [q.lhs, q.rhs, q.weight_mean] {
            row.push(e.mean.into());
            row.push(e.stderr.into());
        }
        for (i, e) in q.inverted_mean.iter().enumerate() {
            coords &= e.within(star[i], K);
            row.push(e.mean.into());
            row.push(e.stderr.into());
        }
        rows.push(row);
    }
    Ok(Report {
        header: vec![
            "t", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "weight", "weight_stderr", "y1", "y1_stderr", "y2",
            "y2_stderr", "y3", "y3_stderr",
        ],
        rows,
        summary: format!(
            "{}: kelvin inversion r={radius}: identity {}; weight mean 1 {}; inverted coordinates constant {}",
            run_tag("kelvin", &p),
            verdict(identity),
            verdict(weight),
            verdict(coords)
        ),
    })
}

fn covariation(o: &Opts) -> Res<Report> {
    let radius = o.radius.unwrap_or(0.5);
    let x0 = point(o.x0.as_deref(), [1.0, 0.0, 0.0], "--x0")?;
    let t = single_time(o)?;
    let p = plan(o)?;
    let cov = inverted_covariation(radius, x0, t, &p)?;
    let mut rows = Vec::new();
    let mut ok = true;
    for i in 0..3 {
        for j in 0..3 {
            let e = cov[i][j];
            if i == j {
                ok &= joint_z(&e, &cov[(i + 1) % 3][(i + 1) % 3]) < K;
            } else {
                ok &= e.within(0.0, K);
            }
            rows.push(vec![Cell::from(i + 1), Cell::from(j + 1), e.mean.into(), e.stderr.into()]);
        }
    }
    Ok(Report {
        header: vec!["i", "j", "mean", "stderr"],
        rows,
        summary: format!("{}: kelvin covariation t={t}: conformal {}", run_tag("kelvin", &p), verdict(ok)),
    })
}
