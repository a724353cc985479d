//! One function per experiment kind. Each fills a [`Report`] and writes its
//! trace files into the output directory.

use std::path::{Path, PathBuf};

use dcflow::analysis::{
    check_local_exp_bound, damped_pl_report, distance_rate_check, estimate_metric_pl_sigma, flow_rate_check,
    kl_exponent_diagnostic, linearize_at, local_exp_certificate, max_energy_residual, measure_local_contraction,
    metric_bounds_on_box, q_eta_bound, Certification, CheckMode, LinearizationReport,
};
use dcflow::flow::{euler_interpolant_deviation, euler_refinement_study, log_log_slope, RefinementRow};
use dcflow::{
    audit_descent, closed_form_linear_flow, f_value, integrate_flow, make_shifted_decomposition, primal_velocity,
    run_scheme, BoxRegion, DcError, DcProblem, FlowConfig, FlowTrace64, IterateTrace64, Matrix, Mode, Termination,
    Vector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, SchemeMode};
use crate::error::CliError;
use crate::output::{flow_csv, fmt_float, num, nums, scheme_csv, write_text, Csv, Report};

const DESCENT_SLACK: f64 = 1e-9;
const DEFAULT_SWEEP: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const DEFAULT_REFINEMENT: [f64; 3] = [0.2, 0.1, 0.05];
const DEFAULT_LOCAL_ETAS: [f64; 3] = [0.25, 0.5, 1.0];

/// Everything an experiment needs besides the config itself.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub p: &'a dyn DcProblem<f64>,
    pub linear: Option<&'a (Matrix, Matrix)>,
    pub out: PathBuf,
    pub mode: CheckMode,
    pub strict_invariance: bool,
    pub seed: u64,
    pub pool: &'a rayon::ThreadPool,
}

impl Ctx<'_> {
    fn write(&self, report: &mut Report, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        write_text(&path, text)?;
        report.files.push(path);
        Ok(())
    }

    fn start_region(&self) -> Result<BoxRegion<f64>, CliError> {
        match self.p.region() {
            Some(r) => Ok(r),
            None => {
                let w = self.cfg.start_half_width;
                Ok(BoxRegion::cube(self.p.dim(), -w, w)?)
            }
        }
    }

    /// `x0` (if given) followed by `random_starts` seeded uniform draws.
    pub fn starts(&self) -> Result<Vec<Vector>, CliError> {
        let n = self.p.dim();
        let mut out = Vec::new();
        if let Some(x0) = &self.cfg.x0 {
            if x0.len() != n {
                return Err(CliError::Config(format!("x0 has length {}, problem dimension is {n}", x0.len())));
            }
            out.push(Vector::from_vec(x0.clone()));
        }
        let region = self.start_region()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        out.extend((0..self.cfg.random_starts).map(|_| region.sample_uniform(&mut rng)));
        Ok(out)
    }

    fn x_star(&self, near: &Vector) -> Result<Vector, CliError> {
        match &self.cfg.x_star {
            Some(x) if x.len() != self.p.dim() => {
                Err(CliError::Config(format!("x_star has length {}, expected {}", x.len(), self.p.dim())))
            }
            Some(x) => Ok(Vector::from_vec(x.clone())),
            None => Ok(self.p.nearest_critical_point(near).unwrap_or_else(|| near.clone())),
        }
    }

    fn flow_config(&self) -> FlowConfig<f64> {
        self.cfg.flow.to_config(self.cfg.scheme.newton)
    }

    /// Reports whether every recorded state stayed inside the declared region.
    fn invariance<'v>(&self, report: &mut Report, states: impl Iterator<Item = &'v Vector>) {
        let Some(region) = self.p.region() else {
            if self.strict_invariance {
                report.notes.push("problem declares no region; invariance not checked".into());
            }
            return;
        };
        let (mut total, mut outside) = (0usize, 0usize);
        for x in states {
            total += 1;
            if !region.contains(x, 1e-9) {
                outside += 1;
            }
        }
        let detail = format!("{outside} of {total} recorded states outside the region");
        if self.strict_invariance {
            report.flag("region_invariance", outside == 0, detail);
        } else if outside > 0 {
            report.warnings.push(format!("region invariance violated: {detail}"));
        }
    }
}

fn vec_json(v: &Vector) -> Value {
    nums(v.iter())
}

fn mat_json(m: &Matrix) -> Value {
    Value::Array((0..m.nrows()).map(|i| nums(m.row(i).iter())).collect())
}

fn termination_str(t: Termination) -> &'static str {
    match t {
        Termination::GradTol => "grad_tol",
        Termination::MaxIter => "max_iter",
        Termination::NumericError => "numeric_error",
    }
}

fn check_failure(trace: &IterateTrace64) -> Result<(), CliError> {
    match &trace.failure {
        Some(e) => Err(CliError::Oracle(e.clone())),
        None => Ok(()),
    }
}

fn sup_gap(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

pub fn run(ctx: &Ctx<'_>, report: &mut Report) -> Result<(), CliError> {
    match ctx.cfg.experiment {
        Experiment::RunScheme => run_scheme_experiment(ctx, report),
        Experiment::RunFlow => run_flow_experiment(ctx, report),
        Experiment::EtaSweep => eta_sweep(ctx, report),
        Experiment::RefinementStudy => refinement_study(ctx, report),
        Experiment::Linearize => linearize(ctx, report),
        Experiment::RateCertify => rate_certify(ctx, report),
        Experiment::DecompositionCompare => decomposition_compare(ctx, report),
    }
}

fn run_scheme_experiment(ctx: &Ctx<'_>, report: &mut Report) -> Result<(), CliError> {
    let p = ctx.p;
    let starts = ctx.starts()?;
    let scfg = ctx.cfg.scheme.to_config();
    let mode = ctx.cfg.scheme.mode;
    let runs: Vec<dcflow::Result<(IterateTrace64, Option<IterateTrace64>)>> = ctx.pool.install(|| {
        starts
            .par_iter()
            .map(|x0| match mode {
                SchemeMode::Primal => Ok((run_scheme(p, x0, &scfg, Mode::Primal)?, None)),
                SchemeMode::Dual => Ok((run_scheme(p, x0, &scfg, Mode::Dual)?, None)),
                SchemeMode::Both => {
                    Ok((run_scheme(p, x0, &scfg, Mode::Primal)?, Some(run_scheme(p, x0, &scfg, Mode::Dual)?)))
                }
            })
            .collect()
    });

    let (mut relaxed, mut strong, mut monotone) = (0usize, 0usize, 0usize);
    let mut identity = 0.0f64;
    let mut all_critical = true;
    let mut equivalence = 0.0f64;
    let mut per_run = Vec::new();
    let mut traces = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        let (trace, dual) = run?;
        ctx.write(report, &format!("scheme_{i:03}.csv"), &scheme_csv(&trace))?;
        if let Some(d) = &dual {
            ctx.write(report, &format!("scheme_{i:03}_dual.csv"), &scheme_csv(d))?;
        }
        check_failure(&trace)?;
        if let Some(d) = &dual {
            check_failure(d)?;
            equivalence = equivalence.max(sup_gap(&trace.points, &d.points));
        }
        for tr in std::iter::once(&trace).chain(dual.as_ref()) {
            let audit = audit_descent(p, tr, DESCENT_SLACK)?;
            relaxed += audit.relaxed_violations;
            strong += audit.strong_violations;
            monotone += audit.monotone_violations;
            identity = identity.max(audit.max_gradient_identity_residual);
            all_critical &= tr.termination == Termination::GradTol;
        }
        per_run.push(json!({
            "start": vec_json(&trace.points[0]),
            "termination": termination_str(trace.termination),
            "iterations": trace.iterations(),
            "final_f": num(*trace.f_values.last().unwrap()),
            "final_grad_norm": num(*trace.grad_norms.last().unwrap()),
            "max_point_norm": num(trace.max_point_norm()),
        }));
        traces.push(trace);
        traces.extend(dual);
    }

    let tol = scfg.newton.tol_grad;
    report.flag("relaxed_descent", relaxed == 0, format!("{relaxed} violation(s) with slack {DESCENT_SLACK:e}(1+|f|)"));
    report.flag("strong_descent", strong == 0, format!("{strong} violation(s)"));
    if scfg.eta == 1.0 {
        report.flag("monotone_descent", monotone == 0, format!("{monotone} violation(s)"));
    }
    report.flag(
        "gradient_difference_identity",
        identity <= 10.0 * tol,
        format!("max residual {identity:e}, limit {:e}", 10.0 * tol),
    );
    report.flag("criticality", all_critical, "every run stopped on the gradient tolerance");
    if mode == SchemeMode::Both {
        report.flag(
            "primal_dual_equivalence",
            equivalence <= 100.0 * tol,
            format!("sup distance {equivalence:e}, limit {:e}", 100.0 * tol),
        );
        report.put("primal_dual_sup_distance", num(equivalence));
    }
    ctx.invariance(report, traces.iter().flat_map(|t| t.points.iter()));
    report.put("eta", num(scfg.eta));
    report.put("runs", per_run);
    Ok(())
}

fn flow_scale(trace: &FlowTrace64) -> f64 {
    let (t, f) = (&trace.times, &trace.f_values);
    (1..t.len().saturating_sub(1))
        .map(|i| {
            let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            (2.0 * (h1 * f[i + 1] - (h1 + h2) * f[i] + h2 * f[i - 1]) / (h1 * h2 * (h1 + h2))).abs()
        })
        .fold(0.0, f64::max)
}

fn monotone_violations(trace: &FlowTrace64, rel_tol: f64) -> usize {
    trace.f_values.windows(2).filter(|w| w[1] > w[0] + 10.0 * rel_tol * (1.0 + w[0].abs())).count()
}

fn run_flow_experiment(ctx: &Ctx<'_>, report: &mut Report) -> Result<(), CliError> {
    let p = ctx.p;
    let starts = ctx.starts()?;
    let fcfg = ctx.flow_config();
    let traces: Vec<dcflow::Result<FlowTrace64>> =
        ctx.pool.install(|| starts.par_iter().map(|x0| integrate_flow(p, x0, &fcfg)).collect());

    let mut monotone = 0usize;
    let mut energy_ok = true;
    let mut worst_energy = 0.0f64;
    let mut closed_err = 0.0f64;
    let mut per_run = Vec::new();
    let mut all = Vec::new();
    for (i, tr) in traces.into_iter().enumerate() {
        let tr = tr?;
        ctx.write(report, &format!("flow_{i:03}.csv"), &flow_csv(&tr))?;
        monotone += monotone_violations(&tr, fcfg.rel_tol);
        if tr.len() >= 3 {
            let residual = max_energy_residual(p, &tr)?;
            let limit = 1e-5f64.max(10.0 * fcfg.record_stride.powi(2) * flow_scale(&tr));
            energy_ok &= residual <= limit;
            worst_energy = worst_energy.max(residual);
        }
        if let Some((a, b)) = ctx.linear {
            for (t, x) in tr.times.iter().zip(&tr.x_states) {
                let exact = closed_form_linear_flow(a, b, &tr.x_states[0], *t)?;
                closed_err = closed_err.max((x - exact).norm());
            }
        }
        let last = tr.last_x();
        per_run.push(json!({
            "start": vec_json(&tr.x_states[0]),
            "halted_at": tr.halted_at.map_or(Value::Null, num),
            "final_x": vec_json(last),
            "final_f": num(*tr.f_values.last().unwrap()),
            "final_grad_norm": num(*tr.grad_norms.last().unwrap()),
            "max_y_norm": num(tr.max_y_norm()),
            "accepted_steps": tr.stats.accepted,
            "rejected_steps": tr.stats.rejected,
            "diagonal_gap_first_record": tr.x_states.get(1).filter(|x| x.len() >= 2).map_or(Value::Null, |x| num((x[0] - x[1]).abs())),
        }));
        all.push(tr);
    }
    report.flag("flow_monotone", monotone == 0, format!("{monotone} increase(s) beyond 10 rel_tol (1+|f|)"));
    report.flag("energy_identity", energy_ok, format!("max interior residual {worst_energy:e}"));
    if ctx.linear.is_some() {
        report.flag("flow_matches_closed_form", closed_err <= 1e-6, format!("max error {closed_err:e}"));
    }
    ctx.invariance(report, all.iter().flat_map(|t| t.x_states.iter()));
    report.put("runs", per_run);
    Ok(())
}

/// σ, L_g and f⋆ for rate statements, with their provenance.
struct RateConstants {
    sigma: f64,
    lg: f64,
    f_star: f64,
    certification: Certification,
}

fn rate_constants(ctx: &Ctx<'_>, f_fallback: f64) -> Result<RateConstants, CliError> {
    let p = ctx.p;
    let region = ctx.start_region()?;
    let f_star = p.f_star().unwrap_or(f_fallback);
    match (p.metric_pl_sigma(), p.lg(), p.f_star()) {
        (Some(sigma), Some(lg), Some(_)) => Ok(RateConstants { sigma, lg, f_star, certification: Certification::Analytic }),
        (sigma, lg, _) => {
            let sigma = match sigma {
                Some(s) => s,
                None => estimate_metric_pl_sigma(p, &region, f_star, ctx.cfg.rate.sigma_samples)?,
            };
            let lg = match lg {
                Some(l) => l,
                None => metric_bounds_on_box(p, &region, ctx.cfg.rate.sigma_samples)?.big_m,
            };
            Ok(RateConstants { sigma, lg, f_star, certification: Certification::Empirical })
        }
    }
}

fn cert_str(c: Certification) -> &'static str {
    match c {
        Certification::Analytic => "analytic",
        Certification::Empirical => "empirical",
    }
}

fn local_factors(
    ctx: &Ctx<'_>,
    lin: &LinearizationReport<f64>,
    etas: &[f64],
) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let local = ctx.cfg.local;
    let measured: Vec<dcflow::Result<f64>> = ctx.pool.install(|| {
        etas.par_iter()
            .map(|&eta| measure_local_contraction(ctx.p, &lin.x_star, eta, local.radius, local.n_steps))
            .collect()
    });
    etas.iter()
        .zip(measured)
        .map(|(&eta, m)| Ok((eta, lin.local_factor(eta), m?)))
        .collect()
}

fn local_factor_flag(report: &mut Report, rows: &[(f64, f64, f64)]) {
    let worst = rows
        .iter()
        .map(|&(_, predicted, measured)| (measured - predicted).abs() / predicted.max(1e-12))
        .fold(0.0, f64::max);
    let ok = rows.iter().all(|&(_, predicted, measured)| (measured - predicted).abs() <= 0.05 * predicted + 1e-9);
    report.flag("local_factor_matches_linearization", ok, format!("worst relative gap {worst:.3e}, limit 5%"));
}

fn argmin(vals: &[f64]) -> usize {
    (0..vals.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0)
}

fn eta_sweep(ctx: &Ctx<'_>, report: &mut Report) -> Result<(), CliError> {
    let p = ctx.p;
    let x0 = ctx.starts()?.remove(0);
    let etas = ctx.cfg.etas.clone().unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
    let spec = ctx.cfg.scheme;
    let traces: Vec<dcflow::Result<IterateTrace64>> = ctx.pool.install(|| {
        etas.par_iter().map(|&eta| run_scheme(p, &x0, &spec.with_eta(eta), Mode::Primal)).collect()
    });
    let traces: Vec<IterateTrace64> = traces.into_iter().collect::<dcflow::Result<_>>()?;
    for (i, tr) in traces.iter().enumerate() {
        ctx.write(report, &format!("scheme_eta_{i:02}.csv"), &scheme_csv(tr))?;
        check_failure(tr)?;
    }

    let f_min = traces.iter().flat_map(|t| t.f_values.iter().copied()).fold(f64::INFINITY, f64::min);
    let rc = rate_constants(ctx, f_min)?;
    let x_star = ctx.x_star(traces.last().expect("non-empty sweep").last_point())?;
    let lin = linearize_at(p, &x_star, ctx.cfg.local.fd_step)?;
    let local = local_factors(ctx, &lin, &etas)?;

    let mut csv = Csv::new(&[
        "eta",
        "q_eta_bound",
        "measured_ratio_geomean",
        "max_step_ratio",
        "predicted_local_factor",
        "measured_local_factor",
    ]);
    let mut q_values = Vec::new();
    let mut violations = 0usize;
    let mut degenerate = 0usize;
    for ((tr, &eta), &(_, predicted, measured)) in traces.iter().zip(&etas).zip(&local) {
        let q = q_eta_bound(p.mu(), rc.sigma, rc.lg, eta);
        q_values.push(q);
        let (geo, max_ratio) = if eta < 1.0 && rc.sigma > 0.0 {
            match damped_pl_report(p, tr, rc.sigma, rc.lg, rc.f_star, rc.certification) {
                Ok(rep) => {
                    violations += rep.violations;
                    (fmt_float(rep.measured_ratio_geomean), fmt_float(rep.max_step_ratio))
                }
                Err(DcError::Degenerate(_)) => {
                    degenerate += 1;
                    (String::new(), String::new())
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            (String::new(), String::new())
        };
        csv.row(&[fmt_float(eta), fmt_float(q), geo, max_ratio, fmt_float(predicted), fmt_float(measured)]);
    }
    ctx.write(report, "eta_sweep.csv", &csv.into_string())?;

    if degenerate > 0 {
        report.notes.push(format!("{degenerate} run(s) started at the optimal value; no ratios"));
    }
    match rc.certification {
        Certification::Analytic => {
            report.flag("q_eta_bound", violations == 0, format!("{violations} step ratio(s) above q_eta + 1e-9"))
        }
        Certification::Empirical => report
            .notes
            .push(format!("sigma = {:e} is a sampled estimate; q_eta ratios reported, not asserted", rc.sigma)),
    }
    let nearest_half = argmin(&etas.iter().map(|e| (e - 0.5).abs()).collect::<Vec<_>>());
    let q_best = argmin(&q_values);
    let local_best = argmin(&local.iter().map(|r| r.2).collect::<Vec<_>>());
    let largest = argmin(&etas.iter().map(|e| -e).collect::<Vec<_>>());
    report.flag(
        "eta_tradeoff",
        (rc.sigma <= 0.0 || q_best == nearest_half) && local_best == largest,
        format!("q_eta minimized at eta={}, local factor minimized at eta={}", etas[q_best], etas[local_best]),
    );
    local_factor_flag(report, &local);

    report.put("sigma", num(rc.sigma));
    report.put("lg", num(rc.lg));
    report.put("mu", num(p.mu()));
    report.put("f_star", num(rc.f_star));
    report.put("constants", cert_str(rc.certification));
    report.put("x_star", vec_json(&x_star));
    report.put("lambda_min", num(lin.lambda_min));
    report.put("q_eta_argmin", num(etas[q_best]));
    report.put("local_factor_argmin", num(etas[local_best]));
    ctx.invariance(report, traces.iter().flat_map(|t| t.points.iter()));
    Ok(())
}

fn refinement_study(ctx: &Ctx<'_>, report: &mut Report) -> Result<(), CliError> {
    let p = ctx.p;
    let x0 = ctx.starts()?.remove(0);
    let etas = ctx.cfg.etas.clone().unwrap_or_else(|| DEFAULT_REFINEMENT.to_vec());
    if etas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Config("refinement etas must be strictly decreasing".into()));
    }
    let fcfg = ctx.flow_config();
    let rows: Vec<RefinementRow<f64>> = match ctx.linear {
        Some((a, b)) => {
            let times = fcfg.record_times();
            let rows: Vec<dcflow::Result<RefinementRow<f64>>> = ctx.pool.install(|| {
                etas.par_iter()
                    .map(|&eta| {
                        euler_interpolant_deviation(p, &x0, eta, fcfg.t_end, &times, &fcfg.newton, |_, t| {
                            let x = closed_form_linear_flow(a, b, &x0, t)?;
                            let y = a * &x;
                            Ok((x, y))
                        })
                    })
                    .collect()
            });
            report.put("reference", "closed_form");
            rows.into_iter().collect::<dcflow::Result<_>>()?
        }
        None => {
            report.put("reference", "integrated_flow");
            euler_refinement_study(p, &x0, &etas, fcfg.t_end, &fcfg)?
        }
    };
    let mut csv = Csv::new(&["eta", "deviation", "dual_deviation", "steps"]);
    for r in &rows {
        csv.row(&[fmt_float(r.eta), fmt_float(r.deviation), fmt_float(r.dual_deviation), r.steps.to_string()]);
    }
    ctx.write(report, "refinement.csv", &csv.into_string())?;

    match log_log_slope(&rows) {
        Some(slope) => {
            report.flag(
                "first_order_refinement",
                (0.8..=1.2).contains(&slope),
                format!("log-log slope {slope:.4}, expected [0.8, 1.2]"),
            );
            report.put("slope", num(slope));
        }
        None => report.notes.push("slope undefined (fewer than two rows or a zero deviation)".into()),
    }
    let last = rows.last().expect("non-empty etas");
    report.put("smallest_eta", num(last.eta));
    report.put("deviation_at_smallest_eta", num(last.deviation));
    report.put("relative_deviation_at_smallest_eta", num(last.deviation / x0.norm().max(f64::MIN_POSITIVE)));
    report.put("t_end", num(fcfg.t_end));
    Ok(())
}

fn linearize(ctx: &Ctx<'_>, report: &mut Report) -> Result<(), CliError> {
    let x0 = ctx.starts()?.remove(0);
    let x_star = ctx.x_star(&x0)?;
    let lin = linearize_at(ctx.p, &x_star, ctx.cfg.local.fd_step)?;
    let etas = ctx.cfg.etas.clone().unwrap_or_else(|| DEFAULT_LOCAL_ETAS.to_vec());
    let local = local_factors(ctx, &lin, &etas)?;

    let mut csv = Csv::new(&["eta", "predicted_local_factor", "measured_local_factor"]);
    for &(eta, predicted, measured) in &local {
        csv.row(&[fmt_float(eta), fmt_float(predicted), fmt_float(measured)]);
    }
    ctx.write(report, "linearization.csv", &csv.into_string())?;

    report.flag(
        "linearization_fd_jacobian",
        lin.fd_consistent(),
        format!("|J_fd + G*^-1 H_f|_F = {:e}, limit {:e}", lin.fd_error, 100.0 * lin.fd_step.powi(2)),
    );
    report.flag("spectrum_in_unit_interval", lin.spectrum_in_unit_interval(), format!("spectrum {:?}", lin.spectrum.as_slice()));
    local_factor_flag(report, &local);
    report.put("x_star", vec_json(&lin.x_star));
    report.put("spectrum", vec_json(&lin.spectrum));
    report.put("lambda_min", num(lin.lambda_min));
    report.put("h_f", mat_json(&lin.h_f));
    report.put("g_star", mat_json(&lin.g_star));
    report.put("fd_jacobian", mat_json(&lin.fd_jacobian));
    report.put("fd_error", num(lin.fd_error));
    Ok(())
}

fn rate_certify(ctx: &Ctx<'_>, report: &mut Report) -> Result<(), CliError> {
    let p = ctx.p;
    let x0 = ctx.starts()?.remove(0);
    let fcfg = ctx.flow_config();
    let flow = integrate_flow(p, &x0, &fcfg)?;
    ctx.write(report, "flow.csv", &flow_csv(&flow))?;

    let f_min = flow.f_values.iter().copied().fold(f64::INFINITY, f64::min);
    let rc = rate_constants(ctx, f_min)?;
    let theta = ctx.cfg.rate.theta;
    let v0 = flow.f_values[0] - rc.f_star;
    // A θ = ½ bound with constant sqrt(2σ) implies the θ bound with
    // sqrt(2σ) V(0)^{½−θ} along a trajectory whose gap never exceeds V(0).
    let c_max = if v0 > 0.0 { (2.0 * rc.sigma).sqrt() * v0.powf(0.5 - theta) } else { (2.0 * rc.sigma).sqrt() };
    let (c, certification) = match ctx.cfg.rate.c {
        Some(c) if c <= c_max * (1.0 + 1e-12) => (c, rc.certification),
        Some(c) => (c, Certification::Empirical),
        None => (c_max, rc.certification),
    };
    report.put("sigma", num(rc.sigma));
    report.put("lg", num(rc.lg));
    report.put("f_star", num(rc.f_star));
    report.put("constants", cert_str(certification));
    report.put("theta", num(theta));
    report.put("c", num(c));

    let global_pl = rc.sigma > 0.0;
    if !(c > 0.0) {
        report.notes.push(format!(
            "sigma = {:e}: no global metric PL constant on the region, global rates not evaluated",
            rc.sigma
        ));
    } else {
        match flow_rate_check(p, &flow, c, theta, rc.f_star, certification, ctx.mode) {
            Ok(chk) => {
                report.flag("metric_rate", chk.passed, format!("worst margin {:e}", chk.worst_margin));
                if let Some(d) = chk.measured_decay {
                    report.put("measured_decay", num(d));
                    report.put("predicted_decay", num(c * c));
                }
            }
            Err(DcError::Uncertified(msg)) => {
                report.flag("metric_rate", false, format!("{msg}; rerun with --report-only to evaluate"))
            }
            Err(e) => return Err(e.into()),
        }
    }

    if let Some(alpha) = p.quadratic_growth() {
        if p.dist_to_minimizers(&x0).is_some() {
            let chk = distance_rate_check(p, &flow, alpha, rc.f_star)?;
            report.flag("distance_from_value", chk.passed, format!("worst margin {:e}", chk.worst_margin));
        }
    }

    let scfg = ctx.cfg.scheme.to_config();
    if global_pl && scfg.eta > 0.0 && scfg.eta < 1.0 {
        let tr = run_scheme(p, &x0, &scfg, Mode::Primal)?;
        ctx.write(report, "scheme.csv", &scheme_csv(&tr))?;
        check_failure(&tr)?;
        match damped_pl_report(p, &tr, rc.sigma, rc.lg, rc.f_star, rc.certification) {
            Ok(rep) => {
                report.put("q_eta", num(rep.q_eta_bound));
                report.put("measured_ratio_geomean", num(rep.measured_ratio_geomean));
                if rc.certification == Certification::Analytic {
                    report.flag("q_eta_bound", rep.violations == 0, format!("{} violation(s)", rep.violations));
                }
            }
            Err(DcError::Degenerate(m)) => report.notes.push(m),
            Err(e) => return Err(e.into()),
        }
    }

    match kl_exponent_diagnostic(&flow, rc.f_star) {
        Ok(d) => {
            report.put("kl_theta_estimate", num(d.theta));
            report.put("kl_r_squared", num(d.r_squared));
        }
        Err(e) => report.notes.push(format!("KL diagnostic skipped: {e}")),
    }

    if ctx.cfg.x_star.is_some() || p.nearest_critical_point(flow.last_x()).is_some() {
        local_certificate(ctx, report, &ctx.x_star(flow.last_x())?)?;
    }
    ctx.invariance(report, flow.x_states.iter());
    Ok(())
}

fn local_certificate(ctx: &Ctx<'_>, report: &mut Report, x_star: &Vector) -> Result<(), CliError> {
    let local = ctx.cfg.local;
    let region = BoxRegion::around(x_star, local.box_half_width)?;
    let cert = match local_exp_certificate(ctx.p, x_star, &region) {
        Ok(c) => c,
        Err(e @ (DcError::IndefiniteHessian(_) | DcError::InvalidInput(_))) => {
            report.flag("local_exponential", false, e.to_string());
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(1));
    let starts: Vec<Vector> = (0..local.box_starts).map(|_| region.sample_uniform(&mut rng)).collect();
    let fcfg = ctx.flow_config();
    let traces: Vec<dcflow::Result<FlowTrace64>> =
        ctx.pool.install(|| starts.par_iter().map(|x| integrate_flow(ctx.p, x, &fcfg)).collect());
    let mut passed = 0usize;
    let mut worst = f64::INFINITY;
    for (i, tr) in traces.into_iter().enumerate() {
        let tr = tr?;
        ctx.write(report, &format!("local_{i:02}.csv"), &flow_csv(&tr))?;
        let chk = check_local_exp_bound(&cert, x_star, &tr, 1e-3)?;
        passed += usize::from(chk.passed);
        worst = worst.min(chk.worst_margin);
    }
    report.flag(
        "local_exponential",
        passed == local.box_starts,
        format!("{passed}/{} starts inside the bound, worst margin {worst:e}", local.box_starts),
    );
    report.put(
        "local_certificate",
        json!({
            "x_star": vec_json(x_star),
            "box_half_width": num(local.box_half_width),
            "lambda": num(cert.lambda),
            "c1": num(cert.c1),
            "m_f": num(cert.m_f),
            "l_f": num(cert.l_f),
            "big_m": num(cert.big_m),
        }),
    );
    Ok(())
}

fn decomposition_compare(ctx: &Ctx<'_>, report: &mut Report) -> Result<(), CliError> {
    let compare = ctx.cfg.compare.as_ref().expect("validated");
    let other: Box<dyn DcProblem<f64>> = match (&compare.problem, &compare.shift) {
        (Some(spec), _) => spec.build()?.inner,
        (None, Some(d)) => {
            let base = ctx.cfg.problem.build()?.inner;
            Box::new(make_shifted_decomposition(base, Vector::from_vec(d.clone())).map_err(|e| CliError::Config(e.to_string()))?)
        }
        (None, None) => unreachable!("validated"),
    };
    let (pa, pb) = (ctx.p, other.as_ref());
    if pb.dim() != pa.dim() {
        return Err(CliError::Config("compared decompositions have different dimensions".into()));
    }
    let x0 = ctx.starts()?.remove(0);
    let fcfg = ctx.flow_config();
    let (a, b) = ctx.pool.install(|| rayon::join(|| integrate_flow(pa, &x0, &fcfg), || integrate_flow(pb, &x0, &fcfg)));
    let (a, b) = (a?, b?);
    ctx.write(report, "flow_a.csv", &flow_csv(&a))?;
    ctx.write(report, "flow_b.csv", &flow_csv(&b))?;

    let mut worst = 0.0f64;
    let mut ok = true;
    for x in a.x_states.iter().chain(&b.x_states) {
        let (fa, fb) = (f_value(pa, x)?, f_value(pb, x)?);
        let gap = (fa - fb).abs();
        worst = worst.max(gap);
        ok &= gap <= 1e-12 * (1.0 + fa.abs());
    }
    report.flag("objective_invariant", ok, format!("max |f_a - f_b| = {worst:e} along both trajectories"));

    let (va, vb) = (primal_velocity(pa, &x0)?, primal_velocity(pb, &x0)?);
    let ratio: Vec<Value> =
        va.iter().zip(vb.iter()).map(|(&u, &v)| if v != 0.0 { num(u / v) } else { Value::Null }).collect();
    report.put("initial_velocity_a", vec_json(&va));
    report.put("initial_velocity_b", vec_json(&vb));
    report.put("initial_velocity_ratio", ratio);
    report.put("trajectory_sup_distance", num(sup_gap(&a.x_states, &b.x_states)));
    if x0.len() >= 2 {
        let gap = |t: &FlowTrace64| t.x_states.get(1).map_or(Value::Null, |x| num((x[0] - x[1]).abs()));
        report.put("diagonal_gap_first_record_a", gap(&a));
        report.put("diagonal_gap_first_record_b", gap(&b));
    }

    let x_star = ctx.x_star(a.last_x())?;
    match (linearize_at(pa, &x_star, ctx.cfg.local.fd_step), linearize_at(pb, &x_star, ctx.cfg.local.fd_step)) {
        (Ok(la), Ok(lb)) => {
            report.put("x_star", vec_json(&x_star));
            report.put("lambda_min_a", num(la.lambda_min));
            report.put("lambda_min_b", num(lb.lambda_min));
            report.put("lambda_min_ratio", num(la.lambda_min / lb.lambda_min));
        }
        (Err(e), _) | (_, Err(e)) => report.notes.push(format!("no linearization at x_star: {e}")),
    }
    ctx.invariance(report, a.x_states.iter().chain(&b.x_states));
    Ok(())
}

/// Output directory: `--out` wins over the config's `output_dir`.
pub fn resolve_out(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    fn with_ctx<R>(cfg: &ExperimentConfig, seed: u64, f: impl FnOnce(&Ctx<'_>) -> R) -> R {
        let problem = cfg.problem.build().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let ctx = Ctx {
            cfg,
            p: problem.inner.as_ref(),
            linear: problem.linear.as_ref(),
            out: PathBuf::from("unused"),
            mode: CheckMode::Certify,
            strict_invariance: false,
            seed,
            pool: &pool,
        };
        f(&ctx)
    }

    const WELL: &str = r#"{"schema_version": 1, "problem": {"name": "double_well", "q": [1, 2]},
        "experiment": "RunFlow", "x0": [0.5, 0.5], "random_starts": 5}"#;

    #[test]
    fn starts_are_seeded_and_inside_the_region() {
        let c = cfg(WELL);
        let a = with_ctx(&c, 3, |ctx| ctx.starts().unwrap());
        let b = with_ctx(&c, 3, |ctx| ctx.starts().unwrap());
        let other = with_ctx(&c, 4, |ctx| ctx.starts().unwrap());
        assert_eq!(a.len(), 6);
        assert_eq!(a[0], Vector::from_vec(vec![0.5, 0.5]));
        assert_eq!(a, b);
        assert_ne!(a[1..], other[1..]);
        assert!(a.iter().all(|x| x.amax() <= 2.0));
    }

    #[test]
    fn quadratic_starts_use_the_start_box() {
        let c = cfg(r#"{"schema_version": 1, "problem": {"name": "quadratic", "a": [[2]], "b": [[1]]},
            "experiment": "RunFlow", "random_starts": 50, "start_half_width": 0.25}"#);
        let starts = with_ctx(&c, 0, |ctx| ctx.starts().unwrap());
        assert_eq!(starts.len(), 50);
        assert!(starts.iter().all(|x| x[0].abs() <= 0.25));
    }

    #[test]
    fn x_star_falls_back_to_nearest_critical_point() {
        let c = cfg(WELL);
        let x = with_ctx(&c, 0, |ctx| ctx.x_star(&Vector::from_vec(vec![0.9, -1.2])).unwrap());
        assert_eq!(x, Vector::from_vec(vec![1.0, -1.0]));
    }

    #[test]
    fn helpers() {
        assert_eq!(argmin(&[3.0, 1.0, 2.0, 1.0]), 1);
        let a = [Vector::from_vec(vec![0.0, 1.0]), Vector::from_vec(vec![2.0, 2.0])];
        let b = [Vector::from_vec(vec![0.5, 1.0]), Vector::from_vec(vec![2.0, -1.0])];
        assert_eq!(sup_gap(&a, &b), 3.0);
    }

    #[test]
    fn flow_scale_is_second_derivative() {
        // f(t) = t² on a non-uniform grid has f'' = 2 everywhere.
        let times = vec![0.0, 0.1, 0.25, 0.3, 0.5];
        let trace = FlowTrace64 {
            f_values: times.iter().map(|t| t * t).collect(),
            times,
            y_states: vec![],
            x_states: vec![],
            grad_norms: vec![],
            metric_speed_sq: vec![],
            energy_residuals: vec![],
            halted_at: None,
            stats: Default::default(),
        };
        assert!((flow_scale(&trace) - 2.0).abs() < 1e-10);
    }
}
