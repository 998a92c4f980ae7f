use std::path::Path;

use serde::{Deserialize, Serialize};

use lambda_core::galerkin::{self, Basis, FunctionDescriptor, GalerkinError, GalerkinLevel, Ultrafunction};
use lambda_core::hyperreal::expr::{self, ExprError, Value};
use lambda_core::hyperreal::{format_rational, Magnitude};
use lambda_core::internal::{sexpr, transfer, InternalError};
use lambda_core::oracle::{DecisionRecord, ReplayLog, UltrafilterOracle};
use lambda_core::variational::{self, LevelRow, MinimizeConfig, SweepReport, VariationalError};
use lambda_core::{Oracle, OracleConfig};

use crate::output::{emit, emit_lines, Run};
use crate::{
    CliError, Cli, Command, Global, HrAction, LevelArgs, OracleAction, TransferAction, VariationalAction,
};

const FUNCTION_GRAMMAR: &str = "\
f := expression in x over numbers, + - * / ^, parentheses, the constants PI E,
     and the functions min max abs signum sin cos exp sqrt";

pub fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let g = &cli.global;
    let mut run = Run::start(g, argv);
    match &cli.command {
        Command::Hr {
            action: HrAction::Eval { expr },
        } => hr_eval(&mut run, g, expr),
        Command::Oracle {
            action: OracleAction::Log { exprs, transfer },
        } => oracle_log(&mut run, g, exprs, transfer.as_deref()),
        Command::Transfer {
            action: TransferAction::Check { file },
        } => transfer_check(&mut run, g, file),
        Command::Project(args) => project(&mut run, g, args, false),
        Command::Derive(args) => project(&mut run, g, args, true),
        Command::Variational {
            action: VariationalAction::Sweep { elements, starts },
        } => sweep(&mut run, g, elements, *starts),
    }
}

fn oracle(g: &Global) -> Result<Oracle, CliError> {
    if g.horizon == 0 {
        return Err(CliError::usage("--horizon must be positive"));
    }
    let cfg = OracleConfig::with_horizon(g.horizon);
    let Some(path) = &g.oracle_replay else {
        return Ok(Oracle::new(cfg));
    };
    let text = read(path)?;
    // Logs written by `oracle log` start with a manifest line.
    let records: Vec<&str> = text
        .lines()
        .filter(|l| {
            let l = l.trim();
            !l.is_empty()
                && !l.starts_with('#')
                && !serde_json::from_str::<serde_json::Value>(l).is_ok_and(|v| v.get("manifest").is_some())
        })
        .collect();
    let replay = ReplayLog::from_json_lines(&records.join("\n"))
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(Oracle::from_state(UltrafilterOracle::with_replay(cfg, replay)))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn expr_error(e: ExprError) -> CliError {
    match e {
        ExprError::Parse(p) => CliError::usage_with(p.to_string(), expr::GRAMMAR),
        other => CliError::domain(other),
    }
}

fn internal_error(e: InternalError) -> CliError {
    match e {
        InternalError::Syntax { .. } => CliError::usage_with(e.to_string(), sexpr::GRAMMAR),
        other => CliError::domain(other),
    }
}

fn galerkin_error(e: GalerkinError) -> CliError {
    match e {
        GalerkinError::Parse { .. } => CliError::usage_with(e.to_string(), FUNCTION_GRAMMAR),
        GalerkinError::InvalidLevel(_) => CliError::usage(e.to_string()),
        other => CliError::domain(other),
    }
}

fn variational_error(e: VariationalError) -> CliError {
    match e {
        VariationalError::InvalidLevel(_) | VariationalError::InvalidSweep(_) => CliError::usage(e.to_string()),
        VariationalError::Galerkin(g) => galerkin_error(g),
        other => CliError::domain(other),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalResult {
    value_label: String,
    /// `infinitesimal`, `finite` or `infinite`; `boolean` for comparisons.
    classification: String,
    standard_part: Option<String>,
    heuristic: bool,
    oracle_decisions_used: usize,
}

fn magnitude_name(m: Magnitude) -> &'static str {
    match m {
        Magnitude::Infinitesimal => "infinitesimal",
        Magnitude::FiniteNonInfinitesimal => "finite",
        Magnitude::Infinite => "infinite",
    }
}

fn evaluate(ctx: &Oracle, src: &str) -> Result<EvalResult, CliError> {
    let value = expr::eval_str(ctx, src).map_err(expr_error)?;
    let result = match value {
        Value::Bool(b) => EvalResult {
            value_label: b.to_string(),
            classification: "boolean".into(),
            standard_part: None,
            heuristic: ctx.decision_log().iter().any(|r| r.mode == lambda_core::oracle::DecisionMode::Heuristic),
            oracle_decisions_used: 0,
        },
        Value::Number(h) => {
            let a = h.analyze().map_err(CliError::domain)?;
            EvalResult {
                value_label: h.label().to_string(),
                classification: magnitude_name(a.magnitude).into(),
                standard_part: a.standard_part.as_ref().map(format_rational),
                heuristic: a.heuristic,
                oracle_decisions_used: 0,
            }
        }
    };
    Ok(result)
}

fn hr_eval(run: &mut Run, g: &Global, src: &str) -> Result<(), CliError> {
    let ctx = oracle(g)?;
    let mut result = evaluate(&ctx, src)?;
    result.oracle_decisions_used = ctx.decisions_made();
    let row = result.clone();
    emit(
        run,
        g,
        &result,
        &[row],
        &["value_label", "classification", "standard_part", "heuristic", "oracle_decisions_used"],
        &[],
    )
}

fn oracle_log(run: &mut Run, g: &Global, exprs: &[String], file: Option<&Path>) -> Result<(), CliError> {
    let ctx = oracle(g)?;
    for src in exprs {
        evaluate(&ctx, src)?;
    }
    if let Some(path) = file {
        check_file(&ctx, path)?;
    }
    let log: Vec<DecisionRecord> = ctx.decision_log();
    emit_lines(run, g, &log, &["label", "answer", "mode", "witness_count"])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SentenceResult {
    line: usize,
    sentence: String,
    value: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckResult {
    results: Vec<SentenceResult>,
}

fn check_file(ctx: &Oracle, path: &Path) -> Result<Vec<SentenceResult>, CliError> {
    let text = read(path)?;
    let file = sexpr::parse_file(ctx, &text).map_err(internal_error)?;
    file.sentences
        .iter()
        .map(|(line, src, f)| {
            let value = transfer::transfer_eval(ctx, f, &file.values)
                .map_err(|e| CliError::domain(format!("{}:{line}: {e}", path.display())))?;
            Ok(SentenceResult {
                line: *line,
                sentence: src.clone(),
                value,
            })
        })
        .collect()
}

fn transfer_check(run: &mut Run, g: &Global, path: &Path) -> Result<(), CliError> {
    let ctx = oracle(g)?;
    let results = check_file(&ctx, path)?;
    let payload = CheckResult { results };
    emit(run, g, &payload, &payload.results, &["line", "sentence", "value"], &[])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Coefficients {
    basis: Basis,
    m: usize,
    f: String,
    coeffs: Vec<f64>,
}

#[derive(Serialize)]
struct CoeffRow {
    index: usize,
    coeff: f64,
}

fn project(run: &mut Run, g: &Global, args: &LevelArgs, derive: bool) -> Result<(), CliError> {
    let level = GalerkinLevel::new(args.m, args.basis).map_err(galerkin_error)?;
    let f = FunctionDescriptor::parse(&args.f).map_err(galerkin_error)?;
    let mut u: Ultrafunction = galerkin::project(&f, &level).map_err(galerkin_error)?;
    if derive {
        u = galerkin::generalized_derivative(&u);
    }
    let coeffs = u.into_coeffs();
    if let Some(bad) = coeffs.iter().position(|c| !c.is_finite()) {
        return Err(CliError::domain(format!("coefficient {bad} of `{}` is not finite", args.f)));
    }
    let rows: Vec<CoeffRow> = coeffs
        .iter()
        .enumerate()
        .map(|(index, &coeff)| CoeffRow { index: index + 1, coeff })
        .collect();
    let payload = Coefficients {
        basis: args.basis,
        m: args.m,
        f: args.f.clone(),
        coeffs,
    };
    let extra = [
        ("basis", args.basis.to_string()),
        ("m", args.m.to_string()),
        ("f", args.f.clone()),
    ];
    emit(run, g, &payload, &rows, &["index", "coeff"], &extra)
}

fn sweep(run: &mut Run, g: &Global, elements: &[usize], starts: usize) -> Result<(), CliError> {
    if let Some(m) = elements.iter().find(|&&m| m < 2 || m % 2 == 1) {
        return Err(CliError::usage(format!("element count {m} must be even and at least 2")));
    }
    if elements.len() < 4 {
        return Err(CliError::usage(format!("a sweep needs at least 4 levels, got {}", elements.len())));
    }
    if elements.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::usage("element counts must strictly increase"));
    }
    let cfg = MinimizeConfig {
        random_starts: starts,
        seed: g.seed,
        ..MinimizeConfig::default()
    };
    let net = variational::minimize_net(elements, &cfg).map_err(variational_error)?;
    let report = SweepReport::new(&net);
    let rows: Vec<LevelRow> = report.levels.clone();
    let extra = [
        ("order_j", report.order_j.to_string()),
        ("order_sup", report.order_sup.to_string()),
        (
            "certificate",
            serde_json::to_value(report.certificate)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        ),
    ];
    emit(
        run,
        g,
        &report,
        &rows,
        &["m", "h", "j_value", "sup_norm", "grad_norm", "iterations", "starts_used", "converged"],
        &extra,
    )
}
