//! Dispatch from a validated config to the simulation modules, producing
//! the output files of each experiment kind.

use anyhow::Context;
use mg_core::equilibrium::{count_pure_nash, verify_symmetric_mixed_ne, Tolerance, EXACT_PAYOFF_LIMIT};
use mg_core::metrics::{
    average_utility, control_parameter, mean_and_stderr, minimum_row, phase_scan, phase_scan_seed, predictability,
    predictability_centered, volatility, volatility_of, Centering, PhaseScanRow,
};
use mg_core::offload::{run_offloading_experiment, series_mode};
use mg_core::seed::{derive_seed, seeded_rng};
use mg_core::variants::{run_emg, run_gcmg, run_simplex};
use mg_core::GameTrace;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Kind};
use crate::output::{float, json as json_file, OutputFile, Table};

/// A seed actually used by the run, with the labels it was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedRecord {
    pub labels: String,
    pub seed: u64,
}

fn seed_record(labels: &[&str], seed: u64) -> SeedRecord {
    SeedRecord {
        labels: labels.join("/"),
        seed,
    }
}

pub struct RunOutput {
    pub files: Vec<OutputFile>,
    pub seeds: Vec<SeedRecord>,
}

/// Runs the experiment. Nothing touches the filesystem here.
pub fn execute(config: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    config.validate()?;
    let out = match config.kind {
        Kind::Basic => basic(config),
        Kind::Gcmg => gcmg(config),
        Kind::Emg => emg(config),
        Kind::Simplex => simplex(config),
        Kind::Offload => offload(config),
        Kind::PhaseScan => scan(config),
        Kind::EquilibriumReport => equilibrium(config),
    };
    out.with_context(|| format!("running kind = \"{}\"", config.kind.as_str()))
}

fn trace_stats(trace: &GameTrace, burn_in: usize) -> anyhow::Result<serde_json::Value> {
    let vol = volatility(trace, burn_in)?;
    Ok(json!({
        "alpha": control_parameter(trace.memory, trace.agents),
        "cutoff": trace.cutoff,
        "burn_in": burn_in,
        "volatility": vol,
        "predictability_cutoff_centered": predictability(trace, burn_in).h,
        "predictability_mean_centered": predictability_centered(trace, burn_in, Centering::Mean).h,
        "mean_utility": average_utility(trace, burn_in)?.population_mean,
    }))
}

fn trace_table(trace: &GameTrace, extra: Option<(&str, &[u32])>) -> OutputFile {
    let mut header = vec!["round", "history", "attendance", "winning_action"];
    if let Some((name, _)) = extra {
        header.push(name);
    }
    let mut table = Table::new("trace.csv", &header);
    for (t, r) in trace.rounds.iter().enumerate() {
        let mut fields = vec![
            t.to_string(),
            r.history.to_string(),
            r.attendance.to_string(),
            r.winning_action.to_string(),
        ];
        if let Some((_, column)) = extra {
            fields.push(column[t].to_string());
        }
        table.row(fields);
    }
    table.finish()
}

fn basic(config: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    let game = config.basic_game()?;
    let burn_in = config.basic.as_ref().expect("validated").burn_in;
    let trace = game.run()?;
    let summary = json!({
        "kind": "basic",
        "game": game,
        "stats": trace_stats(&trace, burn_in)?,
    });
    Ok(RunOutput {
        files: vec![trace_table(&trace, None), json_file("summary.json", &summary)?],
        seeds: vec![seed_record(&["basic"], game.seed)],
    })
}

fn gcmg(config: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    let cfg = config.gcmg_config()?;
    let burn_in = config.gcmg.as_ref().expect("validated").burn_in;
    let result = run_gcmg(&cfg)?;
    let active: Vec<f64> = result.active_counts[burn_in..].iter().map(|&a| f64::from(a)).collect();
    let (active_mean, active_stderr) = mean_and_stderr(&active);
    let summary = json!({
        "kind": "gcmg",
        "game": cfg.game,
        "threshold": cfg.threshold,
        "stats": trace_stats(&result.trace, burn_in)?,
        "active_mean": active_mean,
        "active_stderr": active_stderr,
        "active_volatility": volatility_of(&result.active_counts, cfg.game.agents, burn_in)?,
    });
    Ok(RunOutput {
        files: vec![
            trace_table(&result.trace, Some(("active", &result.active_counts))),
            json_file("summary.json", &summary)?,
        ],
        seeds: vec![seed_record(&["gcmg"], cfg.game.seed)],
    })
}

fn emg(config: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    let cfg = config.emg_config()?;
    let burn_in = config.emg.as_ref().expect("validated").burn_in;
    let result = run_emg(&cfg)?;

    let mut genes = Table::new("genes.csv", &["round", "agent", "gene"]);
    for (round, snapshot) in &result.gene_snapshots {
        for (agent, &g) in snapshot.iter().enumerate() {
            genes.row([round.to_string(), agent.to_string(), float(g)]);
        }
    }
    let finals: Vec<f64> = result.final_agents.iter().map(|a| a.gene).collect();
    let mut histogram = [0u32; 10];
    for &g in &finals {
        histogram[((g * 10.0) as usize).min(9)] += 1;
    }
    let summary = json!({
        "kind": "emg",
        "agents": cfg.agents,
        "memory": cfg.memory,
        "rounds": cfg.rounds,
        "threshold": config.emg.as_ref().and_then(|s| s.threshold),
        "mutation": cfg.mutation,
        "initial_genes": cfg.initial_genes,
        "common_strategy": cfg.common_strategy.resolve(cfg.memory)?.table(),
        "seed": cfg.seed,
        "stats": trace_stats(&result.trace, burn_in)?,
        "total_mutations": result.mutations_per_round.iter().map(|&m| u64::from(m)).sum::<u64>(),
        "final_gene_mean": finals.iter().sum::<f64>() / finals.len() as f64,
        "final_gene_histogram": histogram,
    });
    Ok(RunOutput {
        files: vec![
            trace_table(&result.trace, Some(("mutations", &result.mutations_per_round))),
            genes.finish(),
            json_file("summary.json", &summary)?,
        ],
        seeds: vec![seed_record(&["emg"], cfg.seed)],
    })
}

fn simplex(config: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    let cfg = config.simplex_config()?;
    let burn_in = config.simplex.as_ref().expect("validated").burn_in;
    let result = run_simplex(&cfg)?;
    let k = cfg.choices as usize;

    let count_names: Vec<String> = (0..k).map(|c| format!("count_{c}")).collect();
    let mut header = vec!["round", "history"];
    header.extend(count_names.iter().map(String::as_str));
    header.extend(["aggregate_bid", "winner"]);
    let mut table = Table::new("trace.csv", &header);
    for (t, r) in result.rounds.iter().enumerate() {
        let mut fields = vec![t.to_string(), r.history.to_string()];
        fields.extend(r.counts.iter().map(u32::to_string));
        fields.push(r.aggregate_bid.to_string());
        fields.push(r.recorded_winner().to_string());
        table.row(fields);
    }

    let window = &result.rounds[burn_in..];
    let per_choice: Vec<serde_json::Value> = (0..k)
        .map(|c| {
            let counts: Vec<u32> = window.iter().map(|r| r.counts[c]).collect();
            let vol = volatility_of(&counts, cfg.agents, 0).expect("window is nonempty");
            json!({ "choice": c, "mean_count": vol.mean_attendance, "sigma": vol.sigma })
        })
        .collect();
    let summary = json!({
        "kind": "simplex",
        "config": cfg,
        "burn_in": burn_in,
        "choices": per_choice,
    });
    Ok(RunOutput {
        files: vec![table.finish(), json_file("summary.json", &summary)?],
        seeds: vec![seed_record(&["simplex"], cfg.seed)],
    })
}

fn scan_table(rows: &[PhaseScanRow]) -> OutputFile {
    let mut table = Table::new(
        "phase_scan.csv",
        &[
            "m",
            "alpha",
            "runs",
            "sigma2_over_N_mean",
            "sigma2_over_N_stderr",
            "sigma_over_N_mean",
            "sigma_over_N_stderr",
            "H_mean",
            "H_stderr",
            "H_cutoff_mean",
            "utility_mean",
            "utility_stderr",
            "phase",
        ],
    );
    for r in rows {
        table.row([
            r.memory.to_string(),
            float(r.alpha),
            r.runs.to_string(),
            float(r.sigma2_over_n_mean),
            float(r.sigma2_over_n_stderr),
            float(r.sigma_over_n_mean),
            float(r.sigma_over_n_stderr),
            float(r.predictability_mean),
            float(r.predictability_stderr),
            float(r.predictability_cutoff_mean),
            float(r.utility_mean),
            float(r.utility_stderr),
            r.phase.to_string(),
        ]);
    }
    table.finish()
}

fn scan(config: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    let s = config.phase_scan.as_ref().expect("validated");
    let base = config.scan_base(s.memories[0])?;
    let rows = phase_scan(&base, &s.memories, s.runs, config.seed, s.burn_in)?;
    let min = &rows[minimum_row(&rows).context("empty scan")?];
    let summary = json!({
        "kind": "phase-scan",
        "config": s,
        "master_seed": config.seed,
        "minimum": { "m": min.memory, "alpha": min.alpha, "sigma2_over_N": min.sigma2_over_n_mean },
        "phases": rows.iter().map(|r| json!({ "m": r.memory, "alpha": r.alpha, "phase": r.phase })).collect::<Vec<_>>(),
    });
    let seeds = s
        .memories
        .iter()
        .flat_map(|&m| {
            (0..s.runs).map(move |run| {
                seed_record(
                    &["phase-scan", &format!("m={m}"), &format!("run={run}")],
                    phase_scan_seed(config.seed, m, run),
                )
            })
        })
        .collect();
    Ok(RunOutput {
        files: vec![scan_table(&rows), json_file("summary.json", &summary)?],
        seeds,
    })
}

fn offload(config: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    let cfg = config.offload_config()?;
    let report = run_offloading_experiment(&cfg)?;
    let burn_in = cfg.burn_in;
    let random = &report.random;

    let m_names: Vec<String> = report.attendance.iter().map(|s| format!("m{}", s.memory)).collect();
    let mut header = vec!["round"];
    header.extend(m_names.iter().map(String::as_str));
    let mut fig1 = Table::new("fig1_attendance.csv", &header);
    for t in 0..cfg.rounds {
        let mut fields = vec![t.to_string()];
        fields.extend(report.attendance.iter().map(|s| s.attendance[t].to_string()));
        fig1.row(fields);
    }

    let mut fig2 = Table::new(
        "fig2_volatility.csv",
        &["m", "alpha", "sigma_over_N_mean", "stderr", "random_baseline"],
    );
    for r in &report.rows {
        fig2.row([
            r.memory.to_string(),
            float(r.alpha),
            float(r.sigma_over_n_mean),
            float(r.sigma_over_n_stderr),
            float(random.sigma_over_n_mean),
        ]);
    }

    let mut fig3 = Table::new("fig3_utility.csv", &["round", "mg", "random", "optimal"]);
    for t in 0..cfg.rounds {
        fig3.row([
            t.to_string(),
            float(report.utility.mg[t]),
            float(report.utility.random[t]),
            float(report.utility.optimal),
        ]);
    }

    let mut fig4 = Table::new(
        "fig4_utility.csv",
        &[
            "m",
            "alpha",
            "mg_mean",
            "mg_stderr",
            "random_mean",
            "random_stderr",
            "optimal",
        ],
    );
    for r in &report.rows {
        fig4.row([
            r.memory.to_string(),
            float(r.alpha),
            float(r.utility_mean),
            float(r.utility_stderr),
            float(random.utility_mean),
            float(random.utility_stderr),
            float(report.utility.optimal),
        ]);
    }

    let below = &report.below_threshold;
    let mut fig5 = Table::new(
        "fig5_below_threshold.csv",
        &["round", "mg", "all_offload", "all_local", "optimal"],
    );
    let mut fig5_random = Table::new("fig5_random_baseline.csv", &["round", "random"]);
    for t in 0..cfg.rounds {
        fig5.row([
            t.to_string(),
            below.mg[t].to_string(),
            below.all_offload[t].to_string(),
            below.all_local[t].to_string(),
            below.optimal[t].to_string(),
        ]);
        fig5_random.row([t.to_string(), below.random[t].to_string()]);
    }

    let focus = report
        .rows
        .iter()
        .find(|r| r.memory == report.focus_memory)
        .expect("focus row exists");
    let summary = json!({
        "kind": "offload",
        "config": cfg,
        "cutoff": report.cutoff,
        "threshold_latency_ms": report.threshold_latency_ms,
        "all_offload_latency_ms": report.all_offload_latency_ms,
        "optimal_offloaders": report.optimal_offloaders,
        "focus_memory": report.focus_memory,
        "utilities": {
            "mg": { "m": focus.memory, "mean": focus.utility_mean, "stderr": focus.utility_stderr },
            "random": { "mean": random.utility_mean, "stderr": random.utility_stderr },
            "optimal": report.utility.optimal,
        },
        "volatility": {
            "mg": { "m": focus.memory, "mean": focus.sigma_over_n_mean, "stderr": focus.sigma_over_n_stderr },
            "random": { "mean": random.sigma_over_n_mean, "stderr": random.sigma_over_n_stderr, "analytic": random.sigma_over_n_analytic },
        },
        "below_threshold_mode": {
            "mg": series_mode(&below.mg, burn_in),
            "random": series_mode(&below.random, burn_in),
        },
        "phases": report.rows.iter().map(|r| json!({
            "m": r.memory,
            "alpha": r.alpha,
            "phase": r.phase,
            "predictability": r.predictability_mean,
        })).collect::<Vec<_>>(),
        "extensions": report.extensions,
    });

    let mut seeds: Vec<SeedRecord> = cfg
        .memories
        .iter()
        .flat_map(|&m| {
            let cfg = &cfg;
            (0..cfg.runs).map(move |run| {
                seed_record(
                    &["offload", "mg", &format!("m={m}"), &format!("run={run}")],
                    cfg.mg_seed(m, run),
                )
            })
        })
        .collect();
    seeds.extend(
        (0..cfg.runs).map(|run| seed_record(&["offload", "random", &format!("run={run}")], cfg.random_seed(run))),
    );

    Ok(RunOutput {
        files: vec![
            fig1.finish(),
            fig2.finish(),
            fig3.finish(),
            fig4.finish(),
            fig5.finish(),
            fig5_random.finish(),
            json_file("summary.json", &summary)?,
        ],
        seeds,
    })
}

/// JSON number when it fits in u64, decimal string otherwise.
fn big(n: u128) -> serde_json::Value {
    u64::try_from(n).map_or_else(|_| n.to_string().into(), Into::into)
}

fn equilibrium(config: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    let s = config.equilibrium.as_ref().expect("validated");
    let pure = count_pure_nash(s.agents)?;
    let seed = derive_seed(config.seed, ["equilibrium-report", "monte-carlo"]);
    let exact = s.agents <= EXACT_PAYOFF_LIMIT;
    let tolerance = if exact {
        Tolerance::Absolute(s.exact_tolerance)
    } else {
        Tolerance::StdErrors(s.monte_carlo_sigmas)
    };
    let check = verify_symmetric_mixed_ne(s.agents, tolerance, &mut seeded_rng(seed))?;
    let report = json!({
        "kind": "equilibrium-report",
        "agents": s.agents,
        "pure_nash": {
            "count": big(pure.formula),
            "enumerated": pure.enumerated.map(big),
            "cross_checked": pure.cross_checked(),
            "welfare": pure.welfare,
        },
        "symmetric_mixed": {
            "probability": 0.5,
            "method": if exact { "exact" } else { "monte-carlo" },
            "tolerance": tolerance,
            "payoffs": check.payoffs,
            "verified": check.verified,
        },
    });
    Ok(RunOutput {
        files: vec![json_file("equilibrium.json", &report)?],
        seeds: vec![seed_record(&["equilibrium-report", "monte-carlo"], seed)],
    })
}
