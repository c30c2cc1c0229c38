//! The five subcommands. Each returns a summary plus its exit code, or a
//! [`Failure`] when no summary is written.

use std::path::Path;

use kamlin::diophantine::{check_condition, continued_fraction, estimate_alpha, DiophantineParams};
use kamlin::ingest::{check_omega, parse_spec, parse_spec_lenient, rational_witness, to_action_angle, HamiltonianSpec};
use kamlin::kam::{
    build_schedule, compute_c1, kam_run, min_admissible_q, verify_schedule, KamError, KamRunConfig, KamSchedule, ScheduleStatus, KERNEL_TOLERANCE,
};
use kamlin::lie::{deprit_normalize, quadratic_part, NormalForm};
use kamlin::{FourierTaylorSeries, LieError};
use serde_json::json;

use crate::report::{schedule_csv, step_csv, Summary, TwistEntry};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_TWIST: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;
pub const EXIT_SOLVER: u8 = 5;

/// Number of continued-fraction quotients reported.
const CF_DEPTH: usize = 20;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_INPUT, message: message.to_string() }
    }

    fn solver(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_SOLVER, message: message.to_string() }
    }
}

impl From<LieError> for Failure {
    fn from(e: LieError) -> Self {
        match e {
            LieError::Order(_) => Self::input(e),
            _ => Self::solver(e),
        }
    }
}

pub struct Outcome {
    pub summary: Summary,
    pub csv: Option<String>,
    pub code: u8,
}

fn read_spec(path: &Path, strict: bool) -> Result<HamiltonianSpec, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let parsed = if strict { parse_spec(&text) } else { parse_spec_lenient(&text) };
    parsed.map_err(Failure::input)
}

/// `α` from the input if stated (and checked up to `K`), otherwise estimated.
fn diophantine_params(spec: &HamiltonianSpec, k_max: u64) -> (DiophantineParams, bool) {
    match spec.alpha {
        Some(alpha) => {
            let mut params = DiophantineParams { omega: spec.omega, alpha, tau: spec.tau, k_verified: 0 };
            let holds = check_condition(&mut params, k_max);
            (params, holds)
        }
        None => (DiophantineParams::estimate(spec.omega, spec.tau, k_max), true),
    }
}

fn diophantine_json(params: &DiophantineParams, k_max: u64, holds: bool) -> serde_json::Value {
    json!({
        "omega": params.omega,
        "alpha": params.alpha,
        "tau": params.tau,
        "K": k_max,
        "k_verified": params.k_verified,
        "condition_holds": holds,
        "near_resonant": params.near_resonant(),
    })
}

/// First `j` whose `A_{2j}` exceeds the kernel tolerance relative to the
/// input perturbation.
fn first_twist(nf: &NormalForm, scale: f64) -> Option<(u32, f64)> {
    nf.coeffs.iter().find(|(_, a)| a.norm() > KERNEL_TOLERANCE * scale).map(|(n, a)| (n / 2, a.re))
}

fn perturbation_scale(h: &FourierTaylorSeries) -> f64 {
    (h - &quadratic_part(h)).majorant_norm(1.0, 1.0)
}

fn twist_table(nf: &NormalForm) -> Vec<TwistEntry> {
    nf.coeffs.iter().map(|(n, a)| TwistEntry::new(n / 2, *a)).collect()
}

fn normal_form_details(nf: &NormalForm, order: u32, scale: f64) -> serde_json::Value {
    let generators: Vec<_> = nf
        .generators
        .iter()
        .zip(3u32..)
        .filter(|(g, _)| !g.is_empty())
        .map(|(g, n)| json!({ "degree": n, "terms": g.len(), "majorant": g.majorant_norm(1.0, 1.0) }))
        .collect();
    json!({
        "order": order,
        "input_majorant": scale,
        "generators": generators,
        "kernel_purity_residual": nf.remainder.majorant_norm(1.0, 1.0),
    })
}

pub fn normalize(input: &Path, order: u32) -> Result<Outcome, Failure> {
    let spec = read_spec(input, true)?;
    let h = to_action_angle(&spec, order.max(3));
    let nf = deprit_normalize(&h, order)?;
    let scale = perturbation_scale(&h);
    let mut summary = Summary::new("normalize");
    summary.verdict = match first_twist(&nf, scale) {
        Some((j, _)) => format!("A_{{2j}}≠0 at j={j} (normal form to order {order})"),
        None => format!("no nonzero A_{{2j}} up to order {order}"),
    };
    summary.scope = format!("normal form computed to order {order} in sqrt(r); higher orders not examined");
    summary.a = twist_table(&nf);
    summary.details = normal_form_details(&nf, order, scale);
    Ok(Outcome { summary, csv: None, code: EXIT_OK })
}

pub struct KamRunArgs {
    pub steps: usize,
    pub s0: u32,
    pub rho_inf: f64,
    pub gamma_inf: f64,
    pub window: u32,
    pub k_max: u64,
}

pub fn kam_run_cmd(input: &Path, args: &KamRunArgs) -> Result<Outcome, Failure> {
    let spec = read_spec(input, true)?;
    if args.window < 2 * args.s0 {
        return Err(Failure::input(format!("window {} is below the first ladder degree {}", args.window, 2 * args.s0)));
    }
    let (params, holds) = diophantine_params(&spec, args.k_max);
    if !holds {
        return Err(Failure::input(format!("stated alpha = {} fails the Diophantine condition below K = {}", params.alpha, args.k_max)));
    }
    let h = to_action_angle(&spec, args.window);
    let mut config = KamRunConfig::new(&params, args.s0, args.steps, args.window);
    config.rho_inf = args.rho_inf;
    config.gamma_inf = args.gamma_inf;

    let mut summary = Summary::new("kam-run");
    summary.diophantine = diophantine_json(&params, args.k_max, holds);
    summary.scope = format!(
        "empirical run of at most {} steps with s0 = {}, degrees up to {}; norms on (rho, gamma) = ({}, {}); not a convergence proof",
        args.steps, args.s0, args.window, args.rho_inf, args.gamma_inf
    );
    let (run, code) = match kam_run(&h, spec.omega, &params, &config) {
        Ok(run) => (run, EXIT_OK),
        Err(failure) => match &failure.error {
            KamError::NonLinearizable { .. } => {
                let (j, a) = failure.error.twist_coefficient().expect("non-linearizable carries a coefficient");
                summary.a = vec![TwistEntry::new(j, a)];
                summary.verdict = format!("stable via Moser twist theorem (A_{{2j}}≠0 at j={j}, found during the iteration)");
                (*failure.partial, EXIT_TWIST)
            }
            KamError::InvalidParameter(_) => return Err(Failure::input(failure.error)),
            _ => return Err(Failure::solver(failure.error)),
        },
    };
    let norms = run.norm_sequence();
    if code == EXIT_OK {
        let decreasing = norms.windows(2).all(|w| w[1] < w[0]);
        summary.verdict = if run.steps.is_empty() {
            format!("no ladder steps executed; perturbation majorant {:.6e}", run.initial_norm)
        } else if decreasing {
            format!("perturbation majorant decreased over {} steps: {:.6e} -> {:.6e}", run.steps.len(), norms[0], norms[norms.len() - 1])
        } else {
            format!("perturbation majorant did not decrease monotonically over {} steps", run.steps.len())
        };
    }
    summary.details = json!({
        "c1": config.c1,
        "input_norm": run.input_norm,
        "initial_norm": run.initial_norm,
        "norm_sequence": norms,
        "ladder": run.ladder,
        "preparation": run.preparation,
        "generators": run.chain.len(),
        "stop": run.stop,
        "final_terms": run.final_h.len(),
    });
    summary.steps = run.steps;
    let csv = step_csv(&summary.steps);
    Ok(Outcome { summary, csv: Some(csv), code })
}

pub enum CoefficientSource {
    Given(f64),
    /// Computed from `α`, stated or estimated for `ω` over `1 ≤ k ≤ K`.
    Computed {
        alpha: Option<f64>,
        omega: f64,
        k_max: u64,
    },
}

pub struct ScheduleArgs {
    pub tau: f64,
    pub c1: CoefficientSource,
    pub q: Option<u32>,
    pub find_min_q: bool,
    pub horizon: usize,
}

pub fn schedule_cmd(args: &ScheduleArgs) -> Result<Outcome, Failure> {
    if !(args.tau.is_finite() && args.tau > 1.0) {
        return Err(Failure::input(format!("tau must exceed 1, got {}", args.tau)));
    }
    if args.horizon == 0 {
        return Err(Failure::input("horizon must be at least 1"));
    }
    let (c1, alpha) = match args.c1 {
        CoefficientSource::Given(c1) if c1.is_finite() && c1 > 0.0 => (c1, None),
        CoefficientSource::Given(c1) => return Err(Failure::input(format!("c1 must be positive, got {c1}"))),
        CoefficientSource::Computed { alpha, omega, k_max } => {
            let alpha = alpha.unwrap_or_else(|| estimate_alpha(omega, args.tau, k_max));
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Failure::input(format!("alpha must be positive, got {alpha}")));
            }
            (compute_c1(alpha, args.tau), Some(alpha))
        }
    };
    let mut summary = Summary::new("schedule");
    summary.scope = format!("parameter arithmetic over {} computed steps plus closed-form tail bounds", args.horizon);

    let q = if args.find_min_q {
        match min_admissible_q(args.tau, c1, args.horizon) {
            Ok(q) => q,
            Err(KamError::NotFound { max_q }) => {
                summary.verdict = format!("infeasible: no admissible q up to {max_q}");
                summary.schedule = json!({ "tau": args.tau, "c1": c1, "alpha": alpha, "horizon": args.horizon, "status": "infeasible" });
                return Ok(Outcome { summary, csv: None, code: EXIT_INFEASIBLE });
            }
            Err(e) => return Err(Failure::input(e)),
        }
    } else {
        args.q.ok_or_else(|| Failure::input("either --q or --find-min-q is required"))?
    };
    if q == 0 {
        return Err(Failure::input("q must be at least 1"));
    }
    let sched = KamSchedule::compute(q, args.tau, c1, args.horizon);
    let report = verify_schedule(&sched);
    let domain = build_schedule(q, args.tau, c1, args.horizon).err().map(|e| e.to_string());
    let code = if report.status == ScheduleStatus::Infeasible || domain.is_some() { EXIT_INFEASIBLE } else { EXIT_OK };
    let status = if domain.is_some() { ScheduleStatus::Infeasible } else { report.status };
    summary.verdict = match status {
        ScheduleStatus::Feasible => format!("feasible for q = {q}"),
        ScheduleStatus::Partial => format!("partial for q = {q}: computed steps pass, tails not bounded"),
        ScheduleStatus::Infeasible => format!("infeasible for q = {q}: {}", report.diagnostics.first().cloned().unwrap_or_default()),
    };
    summary.schedule = json!({
        "q": q,
        "tau": args.tau,
        "c1": c1,
        "alpha": alpha,
        "found_min_q": args.find_min_q,
        "status": status,
        "domain_error": domain,
        "report": report,
        "steps": sched.steps,
    });
    let csv = schedule_csv(&sched.steps);
    Ok(Outcome { summary, csv: Some(csv), code })
}

/// `10², 10³, …` below `K`, then `K` itself.
fn k_ladder(k_max: u64) -> Vec<u64> {
    let mut ks: Vec<u64> = std::iter::successors(Some(100u64), |k| k.checked_mul(10)).take_while(|k| *k < k_max).collect();
    ks.push(k_max);
    ks
}

pub fn diophantine_cmd(omega: f64, tau: f64, k_max: u64) -> Result<Outcome, Failure> {
    check_omega(omega).map_err(Failure::input)?;
    if !(tau.is_finite() && tau > 1.0) {
        return Err(Failure::input(format!("tau must exceed 1, got {tau}")));
    }
    if k_max == 0 {
        return Err(Failure::input("K must be at least 1"));
    }
    let cf = continued_fraction(omega, CF_DEPTH);
    let ladder: Vec<_> = k_ladder(k_max).into_iter().map(|k| json!({ "K": k, "alpha": estimate_alpha(omega, tau, k) })).collect();
    let params = DiophantineParams::estimate(omega, tau, k_max);
    let mut summary = Summary::new("diophantine");
    summary.verdict = if params.near_resonant() {
        "inconclusive (near-resonant ω)".to_string()
    } else {
        format!("Diophantine with alpha = {:.6e}, tau = {tau} for 1 <= k <= {k_max}", params.alpha)
    };
    summary.scope = format!("finite scan over 1 <= k <= {k_max}; larger k are not checked");
    summary.diophantine = json!({
        "omega": omega,
        "tau": tau,
        "K": k_max,
        "alpha": params.alpha,
        "near_resonant": params.near_resonant(),
        "continued_fraction": cf.quotients,
        "terminated_early": cf.terminated_early,
        "convergents": cf.convergents().iter().map(|(p, q)| [p.to_string(), q.to_string()]).collect::<Vec<_>>(),
        "alpha_ladder": ladder,
    });
    Ok(Outcome { summary, csv: None, code: EXIT_OK })
}

pub fn verdict_cmd(input: &Path, order: u32, k_max: u64) -> Result<Outcome, Failure> {
    let spec = read_spec(input, false)?;
    if !spec.omega.is_finite() {
        return Err(Failure::input(format!("omega must be finite, got {}", spec.omega)));
    }
    if k_max == 0 {
        return Err(Failure::input("K must be at least 1"));
    }
    let (params, holds) = diophantine_params(&spec, k_max);
    let mut summary = Summary::new("verdict");
    summary.diophantine = diophantine_json(&params, k_max, holds);
    summary.scope = format!("finite-order, finite-K statement: normal form to order {order} in sqrt(r), Diophantine condition scanned for 1 <= k <= {k_max}");
    if rational_witness(spec.omega).is_some() || params.near_resonant() {
        summary.verdict = "inconclusive (near-resonant ω)".to_string();
        return Ok(Outcome { summary, csv: None, code: EXIT_OK });
    }
    let h = to_action_angle(&spec, order.max(3));
    let nf = deprit_normalize(&h, order)?;
    let scale = perturbation_scale(&h);
    summary.a = twist_table(&nf);
    summary.details = normal_form_details(&nf, order, scale);
    let code = match first_twist(&nf, scale) {
        Some((j, _)) => {
            summary.verdict = format!("stable (twist, A_{{2j}}≠0 at j={j}), by Moser's twist theorem");
            EXIT_TWIST
        }
        None if holds => {
            summary.verdict =
                format!("formally linearizable to order {order}; Diophantine verified to K = {k_max}; analytic linearization theorem applies ⇒ stable");
            EXIT_OK
        }
        None => {
            summary.verdict = format!("inconclusive (stated alpha fails the Diophantine condition below K = {k_max})");
            EXIT_OK
        }
    };
    Ok(Outcome { summary, csv: None, code })
}
