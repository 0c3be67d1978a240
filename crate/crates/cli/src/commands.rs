use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;
use verispace_core::baselines::{self, BaselineResult, Method};
use verispace_core::bayesnet::{random_network, RandomNetworkSpec};
use verispace_core::explorer::{
    convergence_sweep, explore as explore_states, length_grid, value_plot_data,
};
use verispace_core::optimize::state_seed;
use verispace_core::presets::{self, SatelliteScope};
use verispace_core::pt::{build_ladder, LadderSpec, REFERENCE_LADDER};
use verispace_core::scenario::{load_scenario, NAMED_RULES};
use verispace_core::treespace::ValuatorPool;
use verispace_core::{
    ExhaustiveOptimizer, McConfig, McOptimizer, PtConfig, PtOptimizer, ReworkRule, Scenario,
    StateOptimizer,
};
use verispace_service::{Service, ServiceOptions};

use crate::error::CliError;
use crate::{
    CompareArgs, ExploreArgs, FvtArgs, GenNetworkArgs, LadderArgs, OptimizerKind, ScenarioArgs,
    SearchArgs, ServeArgs, SweepArgs,
};

type Result<T> = std::result::Result<T, CliError>;

fn build_scenario(args: &ScenarioArgs, rule: &str) -> Result<Scenario> {
    if let (Some(net), Some(costs)) = (&args.network, &args.costs) {
        return Ok(load_scenario(
            net,
            costs,
            rule,
            args.horizon,
            args.rules_file.as_deref(),
        )?);
    }
    if !presets::PRESET_NAMES.contains(&args.preset.as_str()) {
        return Err(CliError::config(
            "unknown_scenario",
            format!(
                "unknown preset `{}`; expected one of {}",
                args.preset,
                presets::PRESET_NAMES.join(", ")
            ),
        ));
    }
    let book = args
        .rules_file
        .as_deref()
        .map(ReworkRule::load_book)
        .transpose()?;
    let rule = ReworkRule::lookup(rule, book.as_ref())?;
    Ok(presets::preset_scenario(&args.preset, &rule, args.horizon)?)
}

/// Scope column of `compare`: the preset, or the network file stem.
fn scope_label(args: &ScenarioArgs) -> String {
    match &args.network {
        Some(p) => p
            .file_stem()
            .map(|s| s.to_string_lossy().trim_end_matches(".network").to_owned())
            .unwrap_or_default(),
        None => args.preset.clone(),
    }
}

fn pt_config(s: &SearchArgs) -> Result<PtConfig> {
    let ladder = match s.ladder.as_str() {
        "reference" => LadderSpec::Explicit(REFERENCE_LADDER.to_vec()),
        "geometric" => LadderSpec::Geometric { base: None },
        other => match other.strip_prefix("geometric:") {
            Some(base) => LadderSpec::Geometric {
                base: Some(parse_f64(base, "ladder base")?),
            },
            None => LadderSpec::Explicit(
                other
                    .split(',')
                    .map(|t| parse_f64(t, "ladder temperature"))
                    .collect::<Result<_>>()?,
            ),
        },
    };
    let cfg = PtConfig {
        n_it: s.nit,
        convergence_length: s.convergence_length,
        max_iterations: s.max_iterations,
        ladder,
        replicas: s.replicas,
        seed: s.seed,
        ..PtConfig::default()
    };
    build_ladder(&cfg)?;
    Ok(cfg)
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::config("invalid_config", format!("{what} `{s}` is not a number")))
}

fn mc_config(s: &SearchArgs) -> McConfig {
    McConfig {
        convergence_length: s.convergence_length,
        max_samples: s.max_iterations,
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<String> {
    std::fs::create_dir_all(dir)?;
    let path: PathBuf = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(name.to_owned())
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn print(v: serde_json::Value) {
    print!("{}", pretty(&v));
}

pub fn gen_network(a: &GenNetworkArgs) -> Result<()> {
    let dir = &a.out.out_dir;
    let mut files = Vec::new();
    match a.preset.as_deref() {
        Some("exemplar") => {
            files.push(write(
                dir,
                "exemplar.network.json",
                &presets::exemplar_network().to_json(),
            )?);
            files.push(write(
                dir,
                "exemplar.costs.json",
                &pretty(&presets::exemplar_costs()),
            )?);
        }
        Some(name) if name == "satellite" || name.starts_with("satellite-") => {
            let scopes: Vec<SatelliteScope> = SatelliteScope::ALL
                .into_iter()
                .filter(|s| {
                    name == "satellite" || name.strip_prefix("satellite-") == Some(s.name())
                })
                .collect();
            if scopes.is_empty() {
                return Err(CliError::config(
                    "invalid_config",
                    format!("unknown satellite scope `{name}`"),
                ));
            }
            let full = presets::satellite_network();
            for s in scopes {
                let net = full.with_scope(s.activities())?;
                files.push(write(
                    dir,
                    &format!("satellite-{}.network.json", s.name()),
                    &net.to_json(),
                )?);
            }
            files.push(write(
                dir,
                "satellite.costs.json",
                &pretty(&presets::satellite_costs()),
            )?);
        }
        Some(other) => {
            return Err(CliError::config(
                "invalid_config",
                format!("unknown preset `{other}`"),
            ));
        }
        None => {
            let spec = RandomNetworkSpec {
                parameters: a.parameters,
                activities: a.activities,
                ..RandomNetworkSpec::default()
            };
            let net = random_network(&spec, a.seed)?;
            files.push(write(
                dir,
                &format!("random-{}.network.json", a.seed),
                &net.to_json(),
            )?);
        }
    }
    if a.preset.is_some() {
        files.push(write(
            dir,
            "rules.json",
            &pretty(&ReworkRule::builtin_book()),
        )?);
    }
    print(json!({ "files": files }));
    Ok(())
}

pub fn fvt(a: &FvtArgs) -> Result<()> {
    let scn = build_scenario(&a.scenario, &a.scenario.rule)?;
    let cfg = pt_config(&a.search)?;
    let origin = match &a.state {
        Some(text) => {
            let results: Vec<i8> = text
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<i8>()
                        .ok()
                        .filter(|r| (-1..=1).contains(r))
                        .ok_or_else(|| {
                            CliError::config(
                                "invalid_config",
                                format!("state entry `{x}` is not -1, 0 or 1"),
                            )
                        })
                })
                .collect::<Result<_>>()?;
            let t =
                a.t.unwrap_or_else(|| results.iter().filter(|&&r| r != 0).count());
            scn.state(&results, t)?
        }
        None => scn.initial_state(),
    };
    let seed = state_seed(a.search.seed, &origin);
    let mut pool = ValuatorPool::new(&scn);
    let out = PtOptimizer::new(cfg.clone()).run(&origin, seed, &mut pool)?;
    let dir = &a.out.out_dir;
    let mut files = vec![
        write(dir, "fvt.json", &out.fvt.to_json())?,
        write(dir, "fvt.dot", &out.fvt.to_dot())?,
    ];
    let run = json!({
        "origin": origin,
        "posterior": scn.posterior(&origin)?,
        "seed": a.search.seed,
        "stateSeed": seed,
        "ladder": build_ladder(&cfg)?,
        "termination": out.termination,
        "iterations": out.iterations,
        "bestValue": out.best_value,
        "incumbentTrace": out.incumbent_trace,
    });
    files.push(write(dir, "run.json", &pretty(&run))?);
    if !out.windows.is_empty() {
        files.push(write(dir, "acceptance.csv", &out.acceptance_csv()?)?);
        files.push(write(dir, "windows.json", &out.windows_json()?)?);
    }
    print(json!({
        "action": out.fvt.root_action(),
        "expectedValue": out.fvt.expected_value,
        "iterations": out.iterations,
        "termination": out.termination,
        "files": files,
    }));
    Ok(())
}

pub fn explore(a: &ExploreArgs) -> Result<()> {
    let scn = build_scenario(&a.scenario, &a.scenario.rule)?;
    let opt: Box<dyn StateOptimizer> = match a.optimizer {
        OptimizerKind::Pt => Box::new(PtOptimizer::new(pt_config(&a.search)?)),
        OptimizerKind::Mc => Box::new(McOptimizer {
            config: mc_config(&a.search),
        }),
        OptimizerKind::Exhaustive => Box::new(ExhaustiveOptimizer::default()),
    };
    let mut pool = ValuatorPool::new(&scn);
    let ex = explore_states(&scn.initial_state(), opt.as_ref(), a.search.seed, &mut pool)?;
    let plot = value_plot_data(&ex.hvt, &scn)?;
    let dir = &a.out.out_dir;
    let files = vec![
        write(dir, "hvt.json", &ex.hvt.to_json())?,
        write(dir, "hvt.dot", &ex.hvt.to_dot())?,
        write(dir, "value_plot.csv", &plot.to_csv())?,
    ];
    print(json!({
        "optimizer": opt.name(),
        "expectedValue": ex.hvt.expected_value(),
        "states": ex.hvt.nodes().len(),
        "leafPaths": ex.hvt.leaf_path_count()?,
        "optimizedStates": ex.optimized_states,
        "iterations": ex.iterations,
        "files": files,
    }));
    Ok(())
}

fn run_method(
    m: Method,
    scn: &Scenario,
    a: &CompareArgs,
    cfg: &PtConfig,
) -> Result<BaselineResult> {
    let seed = a.search.seed;
    Ok(match m {
        Method::Pta => baselines::pta(scn, cfg, seed)?,
        Method::Fp => baselines::fp_enumerate(scn, a.fp_budget)?,
        Method::Mc => baselines::mc_search(scn, &mc_config(&a.search), seed)?,
        Method::Dmc => baselines::dmc_explore(scn, &mc_config(&a.search), seed)?,
        Method::Sfvt => baselines::sfvt(scn, cfg, seed)?,
    })
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let methods: Vec<Method> = a
        .methods
        .split(',')
        .map(|m| Method::parse(m.trim()))
        .collect::<std::result::Result<_, _>>()?;
    let rules: Vec<String> = match a.rules.as_deref() {
        None => vec![a.scenario.rule.clone()],
        Some("all") => NAMED_RULES.iter().map(|(n, _)| n.to_string()).collect(),
        Some(list) => list.split(',').map(|r| r.trim().to_owned()).collect(),
    };
    let cfg = pt_config(&a.search)?;
    let scope = scope_label(&a.scenario);
    let mut csv = String::from("method,reworkRule,scope,expectedValue,wallTimeSeconds\n");
    for rule in &rules {
        let scn = build_scenario(&a.scenario, rule)?;
        let name = &scn.rework_rule().name;
        for &m in &methods {
            let r = run_method(m, &scn, a, &cfg)?;
            let time = if a.no_timing {
                String::new()
            } else {
                format!("{:.3}", r.wall_time_seconds)
            };
            let _ = writeln!(csv, "{m},{name},{scope},{},{time}", r.expected_value);
        }
    }
    write(&a.out.out_dir, "compare.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let scn = build_scenario(&a.scenario, &a.scenario.rule)?;
    let cfg = pt_config(&a.search)?;
    let lengths = length_grid(a.step, a.max);
    let report = convergence_sweep(&scn, &cfg, &lengths, a.search.seed)?;
    let dir = &a.out.out_dir;
    let files = vec![
        write(dir, "sweep.csv", &report.to_csv())?,
        write(dir, "sweep.json", &pretty(&report))?,
    ];
    print(json!({
        "plateau": report.plateau,
        "iterations": report.iterations,
        "rows": report.rows.len(),
        "files": files,
    }));
    Ok(())
}

pub fn ladder(a: &LadderArgs) -> Result<()> {
    let cfg = PtConfig {
        c1: a.c1,
        c2: a.c2,
        c3: a.c3,
        delta_e_max: a.delta_e_max,
        delta_e_thres: a.delta_e_thres,
        ..pt_config(&a.search)?
    };
    print(serde_json::to_value(build_ladder(&cfg)?).expect("serializable"));
    Ok(())
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let service = Service::open(ServiceOptions {
            data_dir: a.data_dir.clone(),
        })?;
        let listener = tokio::net::TcpListener::bind(&a.addr).await?;
        print(json!({ "listening": listener.local_addr()?.to_string() }));
        verispace_service::serve(listener, service).await?;
        Ok(())
    })
}
