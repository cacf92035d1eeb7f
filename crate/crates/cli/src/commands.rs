use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use wmp_core::games::sure_values;
use wmp_core::graph::mec_decomposition;
use wmp_core::sim::{monte_carlo, MonteCarlo};
use wmp_core::strategy::{MealyStrategy, StrategyDocument};
use wmp_core::synthesis::{bp_program, decide, SynthesisResult};
use wmp_core::rational::int;
use wmp_core::values::mec_values;
use wmp_core::{format_rational, parse_mdp, GuaranteeQuery, Mdp, Mode, Rational, Vertex};

use crate::{Command, InvalidInput, Kind, SimulateArgs, SolveArgs};

pub fn run(command: Command) -> Result<Value> {
    match command {
        Command::Mec { model } => mec(&load(&model)?),
        Command::Values { kind, objective, model } => {
            let obj = objective.objective()?;
            let m = load(&model)?;
            Ok(match kind {
                Kind::Sure => {
                    let values = sure_values(&m, obj);
                    json!({
                        "kind": "sure",
                        "objective": obj.to_string(),
                        "values": m.vertices().map(|v| json!({"vertex": m.name(v), "value": r(&values[v])})).collect::<Vec<_>>(),
                    })
                }
                Kind::AlmostSure => {
                    let (dec, vals) = mec_values(&m, obj);
                    json!({
                        "kind": "almost-sure",
                        "objective": obj.to_string(),
                        "mecs": dec.mecs.iter().zip(&vals).enumerate().map(|(i, (mec, val))| json!({
                            "id": i,
                            "vertices": names(&m, mec),
                            "value": r(&val.value),
                            "witness": names(&m, &val.witness),
                        })).collect::<Vec<_>>(),
                    })
                }
            })
        }
        Command::Solve(args) => solve(&args),
        Command::Simulate(args) => simulate(&args),
    }
}

fn load(path: &Path) -> Result<Mdp> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_mdp(&text).with_context(|| format!("parsing {}", path.display()))
}

fn r(x: &Rational) -> String {
    format_rational(x)
}

fn names(m: &Mdp, vs: &[Vertex]) -> Vec<String> {
    let mut vs = vs.to_vec();
    vs.sort_unstable();
    vs.into_iter().map(|v| m.name(v).to_string()).collect()
}

fn mec(m: &Mdp) -> Result<Value> {
    let dec = mec_decomposition(m);
    Ok(json!({
        "mecs": dec.mecs.iter().enumerate().map(|(i, mec)| json!({"id": i, "vertices": names(m, mec)})).collect::<Vec<_>>(),
        "transient": names(m, &dec.transient()),
    }))
}

fn diagnostics(m: &Mdp, res: &SynthesisResult) -> Value {
    let d = &res.diagnostics;
    let mut out = json!({
        "region": names(m, &d.region),
        "commit": names(m, &d.commit),
    });
    if d.sure_values.iter().any(Option::is_some) {
        out["sure_values"] = m
            .vertices()
            .filter_map(|v| d.sure_values[v].as_ref().map(|x| (m.name(v).to_string(), json!(r(x)))))
            .collect::<serde_json::Map<_, _>>()
            .into();
    }
    if !d.mecs.is_empty() {
        out["mecs"] = d
            .mecs
            .iter()
            .zip(&d.mec_values)
            .map(|(mec, x)| json!({"vertices": names(m, mec), "value": r(x)}))
            .collect::<Vec<_>>()
            .into();
    }
    if let Some(p) = &d.max_probability {
        out["max_probability"] = json!(r(p));
    }
    if let Some(c) = &d.certificate {
        out["certificate"] = json!({"probability": r(&c.probability), "expectation": r(&c.expectation)});
    }
    out
}

fn solve(args: &SolveArgs) -> Result<Value> {
    let obj = args.objective.objective()?;
    let m = load(&args.model)?;
    let start = m.require_vertex(&args.start)?;
    let mode = args.mode();
    if mode == Mode::Bp && args.prob.is_none() {
        return Err(InvalidInput("bp needs --prob".into()).into());
    }
    if args.epsilon <= int(0) {
        return Err(InvalidInput("--epsilon must be positive".into()).into());
    }
    let query = GuaranteeQuery {
        mode,
        objective: obj,
        alpha: args.alpha.clone(),
        beta: args.beta.clone(),
        prob: args.prob.clone(),
        start: args.start.clone(),
    };
    let res = decide(&m, &query)?;
    if let Some(path) = &args.dump_lp {
        let prob = args.prob.clone().unwrap_or_else(|| int(1));
        let prog = bp_program(&m, start, obj, &prob, &args.alpha, &args.beta)?;
        fs::write(path, prog.lp.to_text()).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut out = json!({
        "mode": mode.to_string(),
        "objective": obj.to_string(),
        "from": args.start,
        "alpha": r(&args.alpha),
        "beta": r(&args.beta),
        "decision": res.decision(),
        "value": res.value().map(r),
        "diagnostics": diagnostics(&m, &res),
    });
    if let Some(p) = &args.prob {
        out["prob"] = json!(r(p));
    }
    if let (Some(path), true) = (&args.strategy, res.decision()) {
        let w = res.synthesize(&args.epsilon)?;
        let doc = serde_json::to_string_pretty(&w.strategy.to_document(&m))?;
        fs::write(path, doc).with_context(|| format!("writing {}", path.display()))?;
        out["strategy"] = json!({
            "file": path.display().to_string(),
            "states": w.strategy.num_states(),
            "deterministic": w.strategy.is_deterministic(),
        });
        if let Some(plan) = &w.switch {
            out["strategy"]["switch"] = json!({
                "steps": plan.steps,
                "epsilon": r(&plan.epsilon),
                "margin": r(&plan.margin),
                "miss": r(&plan.miss),
            });
        }
    }
    Ok(out)
}

fn simulate(args: &SimulateArgs) -> Result<Value> {
    let m = load(&args.model)?;
    let start = m.require_vertex(&args.start)?;
    let text = fs::read_to_string(&args.strategy).with_context(|| format!("reading {}", args.strategy.display()))?;
    let doc: StrategyDocument = serde_json::from_str(&text)
        .map_err(|e| InvalidInput(format!("strategy file {}: {e}", args.strategy.display())))?;
    let strategy = MealyStrategy::from_document(&m, &doc)?;
    let config = |window: usize| MonteCarlo {
        burn_in: args.burn_in,
        workers: args.workers,
        ..MonteCarlo::new(args.runs, args.horizon, args.seed, args.threshold.clone(), window)
    };
    match args.window {
        Some(l) => Ok(serde_json::to_value(monte_carlo(&m, &strategy, start, &config(l))?)?),
        None => {
            let burn_in = config(1).burn_in();
            let windows: Vec<usize> = std::iter::successors(Some(1usize), |l| Some(l * 2))
                .take_while(|l| burn_in + l < args.horizon)
                .collect();
            if windows.is_empty() {
                return Err(InvalidInput(format!("horizon {} leaves no room after burn-in {burn_in}", args.horizon)).into());
            }
            let reports = windows
                .iter()
                .map(|&l| Ok(serde_json::to_value(monte_carlo(&m, &strategy, start, &config(l))?)?))
                .collect::<Result<Vec<_>>>()?;
            Ok(json!({
                "approximate": true,
                "mean_payoff": reports[0]["mean_payoff"].clone(),
                "windows": reports,
            }))
        }
    }
}
