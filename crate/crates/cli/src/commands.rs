use std::fs;
use std::path::Path;

use dyco_core::graph::{
    build_deletion_snapshots, build_growth_snapshots, build_moving_node_instance, ingest_temporal_edges, parse_tsplib,
    random_temporal_er, BURMA14, BURMA14_TRAJECTORY,
};
use dyco_core::gwlab::{
    perturbation_experiment, rows_to_csv, solve_gw_sdp, warmstart_sdp_experiment, ExperimentConfig, SdpConfig, SdpPoint,
};
use dyco_core::oracle::OracleCache;
use dyco_core::par::Exec;
use dyco_core::report::{apr_table, per_snapshot_csv, solve_csv, Statistic};
use dyco_core::solver::{run_repetitions, SolveSchedule, SolveTrace};
use dyco_core::{DynamicInstance, Error, GraphSnapshot, ProblemKind, Result};
use sha2::{Digest, Sha256};

use crate::{BuildArgs, GwlabArgs, OracleArgs, ReportArgs, SolveArgs};

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn parse_point(s: &str) -> Result<(f64, f64)> {
    let bad = || usage(format!("expected `x,y`, got `{s}`"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    Ok((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
}

fn load_instance(path: &Path) -> Result<DynamicInstance> {
    DynamicInstance::from_json(&read(path)?)
}

/// SHA-256 of the canonical instance JSON, so formatting does not matter.
pub fn instance_hash(inst: &DynamicInstance) -> Result<String> {
    Ok(hex::encode(Sha256::digest(inst.to_json()?.as_bytes())))
}

pub fn build(a: BuildArgs) -> Result<()> {
    let problem: ProblemKind = a.problem.parse()?;
    let builtin = a.input.as_deref().and_then(|p| p.to_str()).and_then(|s| s.strip_prefix("builtin:"));
    let inst = match problem {
        ProblemKind::Tsp => {
            let mut set = match builtin {
                Some("burma14") => parse_tsplib(BURMA14)?,
                Some(other) => return Err(usage(format!("unknown builtin instance `{other}`"))),
                None => parse_tsplib(&read(a.input.as_deref().ok_or_else(|| usage("tsp requires --input"))?)?)?,
            };
            if a.no_rounding {
                set.rounding = false;
            }
            let (start, end) = match (&a.start, &a.end) {
                (Some(s), Some(e)) => (parse_point(s)?, parse_point(e)?),
                (None, None) if builtin == Some("burma14") => BURMA14_TRAJECTORY,
                _ => return Err(usage("tsp requires both --start and --end")),
            };
            if !set.contains(start) || !set.contains(end) {
                eprintln!("warning: trajectory leaves the bounding box of the base instance");
            }
            build_moving_node_instance(&set, start, end, a.snapshots)?
        }
        ProblemKind::MaxCut | ProblemKind::Mis => {
            let events = match (&a.input, &a.random) {
                (Some(p), None) => ingest_temporal_edges(&read(p)?)?,
                (None, Some(spec)) => {
                    let bad = || usage(format!("expected --random nodes,edges, got `{spec}`"));
                    let (n, m) = spec.split_once(',').ok_or_else(bad)?;
                    random_temporal_er(
                        n.trim().parse().map_err(|_| bad())?,
                        m.trim().parse().map_err(|_| bad())?,
                        a.seed,
                    )?
                }
                _ => return Err(usage("one of --input or --random is required")),
            };
            if problem == ProblemKind::MaxCut {
                build_growth_snapshots(&events, a.snapshots, a.fraction)?
            } else {
                build_deletion_snapshots(&events, a.snapshots, a.fraction)?
            }
        }
    };
    write(&a.output, &inst.to_json()?)?;
    println!("snapshot\tnodes\tedges");
    for (t, g) in inst.snapshots().iter().enumerate() {
        println!("{t}\t{}\t{}", g.node_count(), g.edge_count());
    }
    Ok(())
}

/// Config file first, then any flags given on the command line.
pub fn schedule(a: &SolveArgs) -> Result<SolveSchedule> {
    let mut s: SolveSchedule = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => SolveSchedule::default(),
    };
    if let Some(v) = &a.strategy {
        s.strategy = v.parse()?;
    }
    if let Some(v) = &a.sp_subset {
        s.sp_subset = v.parse()?;
    }
    if let Some(v) = &a.conv {
        s.layer = v.parse()?;
    }
    if let Some(v) = &a.embedding_init {
        s.embedding_init = v.parse()?;
    }
    macro_rules! copy {
        ($($field:ident <- $arg:ident),*) => {
            $(if let Some(v) = a.$arg { s.$field = v; })*
        };
    }
    copy!(epoch_max <- epoch_max, epoch_ws <- epoch_ws, lr <- lr, seed <- seed, repetitions <- reps,
        lambda_shrink <- lambda_shrink, lambda_perturb <- lambda_perturb, sigma <- sigma,
        embedding_dim <- embedding_dim, hidden_dim <- hidden_dim, threshold <- threshold,
        beam_width <- beam_width, checkpoint_every <- checkpoint_every);
    if a.penalty.is_some() {
        s.penalty = a.penalty;
    }
    s.zero_noise |= a.zero_noise;
    s.keep_adam_state |= a.keep_adam_state;
    s.best_checkpoint |= a.best_checkpoint;
    if a.fresh_adam {
        s.carry_adam = false;
    }
    s.validate()?;
    Ok(s)
}

fn optima(inst: &DynamicInstance, cache_path: Option<&Path>) -> Result<Vec<f64>> {
    let hash = instance_hash(inst)?;
    let mut cache = match cache_path {
        Some(p) => OracleCache::load_or_new(p, &hash)?,
        None => OracleCache::new(hash),
    };
    let mut values = Vec::with_capacity(inst.len());
    for (t, g) in inst.snapshots().iter().enumerate() {
        values.push(cache.get_or_solve(t, inst.problem(), g, Exec::Parallel)?.value);
    }
    if let Some(p) = cache_path {
        cache.save(p)?;
    }
    Ok(values)
}

pub fn solve(a: SolveArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let sched = schedule(&a)?;
    let budgets = if a.budgets.is_empty() { vec![sched.epoch_ws] } else { a.budgets.clone() };
    let optima = if a.apr { Some(optima(&inst, a.oracle_cache.as_deref())?) } else { None };
    let traces = run_repetitions(&inst, &sched, &budgets, Exec::Parallel)?;
    fs::create_dir_all(&a.out_dir)?;
    write(&a.out_dir.join("trace.json"), &serde_json::to_string(&traces)?)?;
    write(&a.out_dir.join("solve.csv"), &solve_csv(&traces, optima.as_deref())?)?;
    if let Some(o) = &optima {
        print!("{}", apr_table(&traces, o)?.to_markdown(Statistic::Mean));
    }
    println!("wrote {} and {}", a.out_dir.join("trace.json").display(), a.out_dir.join("solve.csv").display());
    Ok(())
}

pub fn oracle(a: OracleArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let hash = instance_hash(&inst)?;
    let mut cache = OracleCache::load_or_new(&a.cache, &hash)?;
    println!("snapshot\tvalue\texact\tcached");
    for (t, g) in inst.snapshots().iter().enumerate() {
        let cached = cache.entries.contains_key(&t);
        if !cached {
            cache.get_or_solve(t, inst.problem(), g, Exec::Parallel)?;
            cache.save(&a.cache)?;
        }
        let r = &cache.entries[&t];
        println!("{t}\t{}\t{}\t{cached}", r.value, r.exact);
    }
    cache.save(&a.cache)
}

fn gw_graph(spec: &str) -> Result<GraphSnapshot> {
    let sized = |prefix: &str| -> Result<Option<usize>> {
        match spec.strip_prefix(prefix) {
            Some(n) => n.parse().map(Some).map_err(|_| usage(format!("bad graph size in `{spec}`"))),
            None => Ok(None),
        }
    };
    if let Some(n) = sized("cycle:")? {
        if n < 3 {
            return Err(usage("a cycle needs at least 3 nodes"));
        }
        return GraphSnapshot::unweighted(n, (0..n).map(|i| (i, (i + 1) % n)).collect());
    }
    if let Some(n) = sized("complete:")? {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        return GraphSnapshot::unweighted(n, edges);
    }
    let events = ingest_temporal_edges(&read(Path::new(spec))?)?;
    GraphSnapshot::unweighted(events.node_count, events.events.iter().map(|e| (e.u, e.v)).collect())
}

pub fn gwlab(a: GwlabArgs) -> Result<()> {
    let g = gw_graph(&a.graph)?;
    let n = g.node_count();
    let x0 = match a.x0.as_str() {
        "ones" => SdpPoint::all_ones(n),
        "identity" => SdpPoint::identity(n),
        "sdp" => solve_gw_sdp(&g, &SdpConfig { seed: a.seed, ..Default::default() })?.point,
        other => return Err(usage(format!("unknown --x0 `{other}` (expected ones, identity or sdp)"))),
    };
    let cfg = ExperimentConfig { draws: a.draws, rounding_trials: a.trials, seed: a.seed, ..Default::default() };
    let rows = match a.mode.as_str() {
        "perturb" => perturbation_experiment(&g, &x0, &a.lambdas, &cfg, Exec::Parallel)?,
        "warmstart" => warmstart_sdp_experiment(&g, &x0, &a.lambdas, &cfg, Exec::Parallel)?,
        other => return Err(usage(format!("unknown --mode `{other}` (expected perturb or warmstart)"))),
    };
    let csv = rows_to_csv(&rows)?;
    match &a.output {
        Some(p) => write(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub fn report(a: ReportArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let mut traces: Vec<SolveTrace> = Vec::new();
    for p in &a.traces {
        let batch: Vec<SolveTrace> =
            serde_json::from_str(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        traces.extend(batch);
    }
    if let Some(t) = traces.iter().find(|t| t.snapshots.len() != inst.len() || t.problem != inst.problem()) {
        return Err(usage(format!("trace for method `{}` does not match the instance", t.method)));
    }
    let optima = optima(&inst, a.oracle.as_deref())?;
    let table = apr_table(&traces, &optima)?;
    fs::create_dir_all(&a.out_dir)?;
    write(&a.out_dir.join("apr_mean.csv"), &table.to_csv(Statistic::Mean)?)?;
    write(&a.out_dir.join("apr_median.csv"), &table.to_csv(Statistic::Median)?)?;
    write(&a.out_dir.join("per_snapshot.csv"), &per_snapshot_csv(&traces, &optima)?)?;
    println!("mean ApR\n{}", table.to_markdown(Statistic::Mean));
    println!("median ApR\n{}", table.to_markdown(Statistic::Median));
    Ok(())
}
