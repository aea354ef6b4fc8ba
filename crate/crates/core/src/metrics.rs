//! Attendance statistics, volatility, predictability and phase scans.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::game::{GameConfig, GameTrace};
use crate::seed::{derive_seed, seeded_rng};

/// Default number of leading rounds excluded from statistics.
pub const DEFAULT_BURN_IN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolatilityStats {
    pub mean_attendance: f64,
    /// Population standard deviation of attendance.
    pub sigma: f64,
    pub sigma2_over_n: f64,
    pub sigma_over_n: f64,
}

pub fn volatility(trace: &GameTrace, burn_in: usize) -> Result<VolatilityStats> {
    volatility_of(&trace.attendance(), trace.agents, burn_in)
}

pub fn volatility_of(attendance: &[u32], agents: usize, burn_in: usize) -> Result<VolatilityStats> {
    let window = post_burn_in(attendance, burn_in)?;
    let n = window.len() as f64;
    let mean = window.iter().map(|&a| f64::from(a)).sum::<f64>() / n;
    let var = window.iter().map(|&a| (f64::from(a) - mean).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    let agents = agents as f64;
    Ok(VolatilityStats {
        mean_attendance: mean,
        sigma,
        sigma2_over_n: var / agents,
        sigma_over_n: sigma / agents,
    })
}

fn post_burn_in<T>(series: &[T], burn_in: usize) -> Result<&[T]> {
    if burn_in >= series.len() {
        return Err(MgError::invalid(
            "burn_in",
            format!("burn-in {burn_in} leaves no rounds out of {}", series.len()),
        ));
    }
    Ok(&series[burn_in..])
}

/// `alpha = 2^m / N`.
pub fn control_parameter(memory: u32, agents: usize) -> f64 {
    2f64.powi(memory as i32) / agents as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictabilityStats {
    pub h: f64,
    /// `<A - cutoff | mu>` for each history index; `None` if never visited.
    pub conditional_means: Vec<Option<f64>>,
}

/// Reference point subtracted from attendance before conditioning on history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// The cut-off `phi`.
    #[default]
    Cutoff,
    /// The post-burn-in mean attendance; measures only history-conditional structure.
    Mean,
}

/// Mean over all `2^m` histories of the squared conditional mean of
/// cut-off-centered attendance. Unvisited histories contribute zero.
pub fn predictability(trace: &GameTrace, burn_in: usize) -> PredictabilityStats {
    predictability_centered(trace, burn_in, Centering::Cutoff)
}

pub fn predictability_centered(trace: &GameTrace, burn_in: usize, centering: Centering) -> PredictabilityStats {
    let histories: Vec<u32> = trace.rounds.iter().map(|r| r.history).collect();
    let attendance = trace.attendance();
    let center = match centering {
        Centering::Cutoff => trace.cutoff,
        Centering::Mean => {
            let window = attendance.get(burn_in..).unwrap_or(&[]);
            if window.is_empty() {
                0.0
            } else {
                window.iter().map(|&a| f64::from(a)).sum::<f64>() / window.len() as f64
            }
        }
    };
    predictability_of(&histories, &attendance, trace.memory, center, burn_in)
}

pub fn predictability_of(
    histories: &[u32],
    attendance: &[u32],
    memory: u32,
    center: f64,
    burn_in: usize,
) -> PredictabilityStats {
    let size = 1usize << memory;
    let mut sums = vec![0.0f64; size];
    let mut counts = vec![0u64; size];
    for (&mu, &a) in histories.iter().zip(attendance).skip(burn_in) {
        sums[mu as usize] += f64::from(a) - center;
        counts[mu as usize] += 1;
    }
    let conditional_means: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let h = conditional_means.iter().map(|m| m.map_or(0.0, |v| v * v)).sum::<f64>() / size as f64;
    PredictabilityStats { h, conditional_means }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityStats {
    pub per_agent: Vec<f64>,
    pub population_mean: f64,
}

pub fn average_utility(trace: &GameTrace, burn_in: usize) -> Result<UtilityStats> {
    let window = post_burn_in(&trace.rounds, burn_in)?;
    let t = window.len() as f64;
    let mut per_agent = vec![0.0; trace.agents];
    for round in window {
        for (acc, &p) in per_agent.iter_mut().zip(&round.payoffs) {
            *acc += f64::from(p);
        }
    }
    per_agent.iter_mut().for_each(|v| *v /= t);
    let population_mean = per_agent.iter().sum::<f64>() / trace.agents as f64;
    Ok(UtilityStats {
        per_agent,
        population_mean,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-run statistics kept by scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub memory: u32,
    pub run: usize,
    pub seed: u64,
    pub volatility: VolatilityStats,
    /// Mean-centered `H`.
    pub predictability: f64,
    /// Cut-off-centered `H`.
    pub predictability_cutoff: f64,
    pub mean_utility: f64,
}

pub fn summarize(trace: &GameTrace, memory: u32, run: usize, seed: u64, burn_in: usize) -> Result<RunSummary> {
    Ok(RunSummary {
        memory,
        run,
        seed,
        volatility: volatility(trace, burn_in)?,
        predictability: predictability_centered(trace, burn_in, Centering::Mean).h,
        predictability_cutoff: predictability(trace, burn_in).h,
        mean_utility: average_utility(trace, burn_in)?.population_mean,
    })
}

/// Runs `runs_per_m` games for every brain size, in parallel on the current
/// rayon pool. Output order is `(m, run)` regardless of scheduling.
pub fn run_grid<F>(
    base: &GameConfig,
    memories: &[u32],
    runs_per_m: usize,
    burn_in: usize,
    seed_for: F,
) -> Result<Vec<RunSummary>>
where
    F: Fn(u32, usize) -> u64 + Sync,
{
    if runs_per_m == 0 {
        return Err(MgError::invalid("runs_per_m", "at least one run per brain size"));
    }
    let jobs: Vec<(u32, usize)> = memories
        .iter()
        .flat_map(|&m| (0..runs_per_m).map(move |r| (m, r)))
        .collect();
    jobs.par_iter()
        .map(|&(m, run)| {
            let seed = seed_for(m, run);
            let config = GameConfig {
                memory: m,
                seed,
                ..base.clone()
            };
            let trace = crate::game::run_game(&config, &mut seeded_rng(seed))?;
            summarize(&trace, m, run, seed, burn_in)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// `alpha < alpha*`
    Crowded,
    /// The volatility minimum itself.
    Critical,
    /// `alpha > alpha*`
    Uncrowded,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Crowded => "crowded",
            Phase::Critical => "critical",
            Phase::Uncrowded => "uncrowded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScanRow {
    pub memory: u32,
    pub alpha: f64,
    pub runs: usize,
    pub sigma2_over_n_mean: f64,
    pub sigma2_over_n_stderr: f64,
    pub sigma_over_n_mean: f64,
    pub sigma_over_n_stderr: f64,
    pub predictability_mean: f64,
    pub predictability_stderr: f64,
    pub predictability_cutoff_mean: f64,
    pub utility_mean: f64,
    pub utility_stderr: f64,
    pub phase: Phase,
}

/// Aggregates run summaries into one row per brain size, sorted by alpha,
/// and labels phases relative to the minimum of mean `sigma^2/N`.
pub fn phase_rows(agents: usize, summaries: &[RunSummary]) -> Vec<PhaseScanRow> {
    let mut memories: Vec<u32> = summaries.iter().map(|s| s.memory).collect();
    memories.sort_unstable();
    memories.dedup();
    let mut rows: Vec<PhaseScanRow> = memories
        .into_iter()
        .map(|m| {
            let runs: Vec<&RunSummary> = summaries.iter().filter(|s| s.memory == m).collect();
            let stat = |f: &dyn Fn(&RunSummary) -> f64| mean_and_stderr(&runs.iter().map(|s| f(s)).collect::<Vec<_>>());
            let (s2, s2_se) = stat(&|s| s.volatility.sigma2_over_n);
            let (s1, s1_se) = stat(&|s| s.volatility.sigma_over_n);
            let (h, h_se) = stat(&|s| s.predictability);
            let (hc, _) = stat(&|s| s.predictability_cutoff);
            let (u, u_se) = stat(&|s| s.mean_utility);
            PhaseScanRow {
                memory: m,
                alpha: control_parameter(m, agents),
                runs: runs.len(),
                sigma2_over_n_mean: s2,
                sigma2_over_n_stderr: s2_se,
                sigma_over_n_mean: s1,
                sigma_over_n_stderr: s1_se,
                predictability_mean: h,
                predictability_stderr: h_se,
                predictability_cutoff_mean: hc,
                utility_mean: u,
                utility_stderr: u_se,
                phase: Phase::Critical,
            }
        })
        .collect();
    if let Some(critical) = minimum_row(&rows) {
        let alpha_star = rows[critical].alpha;
        for row in &mut rows {
            row.phase = if row.alpha < alpha_star {
                Phase::Crowded
            } else if row.alpha > alpha_star {
                Phase::Uncrowded
            } else {
                Phase::Critical
            };
        }
    }
    rows
}

/// Index of the row with the smallest mean `sigma^2/N` (first on ties).
pub fn minimum_row(rows: &[PhaseScanRow]) -> Option<usize> {
    rows.iter()
        .enumerate()
        .min_by(|a, b| a.1.sigma2_over_n_mean.total_cmp(&b.1.sigma2_over_n_mean))
        .map(|(i, _)| i)
}

/// Volatility and predictability versus brain size.
pub fn phase_scan_seed(master_seed: u64, memory: u32, run: usize) -> u64 {
    derive_seed(
        master_seed,
        ["phase-scan".to_string(), format!("m={memory}"), format!("run={run}")],
    )
}

pub fn phase_scan(
    base: &GameConfig,
    memories: &[u32],
    runs_per_m: usize,
    master_seed: u64,
    burn_in: usize,
) -> Result<Vec<PhaseScanRow>> {
    let summaries = run_grid(base, memories, runs_per_m, burn_in, |m, run| {
        phase_scan_seed(master_seed, m, run)
    })?;
    Ok(phase_rows(base.agents, &summaries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{resolve_round, RoundOutcome};
    use crate::history::History;

    fn synthetic(agents: usize, memory: u32, cutoff: f64, rounds: Vec<RoundOutcome>) -> GameTrace {
        GameTrace {
            agents,
            memory,
            cutoff,
            config: None,
            initial_history: History::new(memory, 0).unwrap(),
            rounds,
        }
    }

    fn round_with(history: u32, attendance: u32, agents: usize, cutoff: f64) -> RoundOutcome {
        let actions = (0..agents).map(|i| u8::from((i as u32) < attendance)).collect();
        resolve_round(actions, history, cutoff)
    }

    #[test]
    fn constant_series_has_no_volatility() {
        let v = volatility_of(&[7; 50], 15, 0).unwrap();
        assert_eq!(v.sigma, 0.0);
        assert_eq!(v.mean_attendance, 7.0);
    }

    #[test]
    fn alternating_extremes_give_half_n() {
        let series: Vec<u32> = (0..100).map(|t| if t % 2 == 0 { 0 } else { 31 }).collect();
        let v = volatility_of(&series, 31, 0).unwrap();
        assert!((v.sigma - 15.5).abs() < 1e-12);
        assert!((v.sigma_over_n - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_window_is_an_error() {
        assert!(volatility_of(&[1, 2, 3], 3, 3).is_err());
    }

    #[test]
    fn sigma2_over_n_matches_scaled_variance() {
        let series: Vec<u32> = (0..1000u32).map(|t| (t * 7919) % 32).collect();
        let v = volatility_of(&series, 31, 10).unwrap();
        let frac: Vec<f64> = series[10..].iter().map(|&a| f64::from(a) / 31.0).collect();
        let mean = frac.iter().sum::<f64>() / frac.len() as f64;
        let var = frac.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / frac.len() as f64;
        assert!((v.sigma2_over_n - 31.0 * var).abs() < 1e-12);
    }

    #[test]
    fn control_parameter_values() {
        assert!((control_parameter(3, 31) - 8.0 / 31.0).abs() < 1e-15);
        assert_eq!(control_parameter(5, 32), 1.0);
        assert_eq!(control_parameter(1, 2), 1.0);
    }

    #[test]
    fn predictability_of_history_driven_attendance() {
        // A = cutoff + 3 on even histories, cutoff - 3 on odd ones.
        let rounds = (0..400u32)
            .map(|t| {
                let mu = t % 4;
                round_with(mu, if mu % 2 == 0 { 23 } else { 17 }, 31, 20.0)
            })
            .collect();
        let h = predictability(&synthetic(31, 2, 20.0, rounds), 0);
        assert!((h.h - 9.0).abs() < 1e-12);
    }

    #[test]
    fn mean_centering_ignores_constant_offset() {
        let rounds = (0..100u32).map(|t| round_with(t % 2, 17, 31, 20.0)).collect();
        let trace = synthetic(31, 1, 20.0, rounds);
        assert!((predictability(&trace, 0).h - 9.0).abs() < 1e-12);
        assert_eq!(predictability_centered(&trace, 0, Centering::Mean).h, 0.0);
    }

    #[test]
    fn single_round_predictability() {
        let trace = synthetic(31, 2, 20.0, vec![round_with(2, 25, 31, 20.0)]);
        let p = predictability(&trace, 0);
        assert_eq!(p.conditional_means, vec![None, None, Some(5.0), None]);
        assert!((p.h - 25.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn utility_of_fixed_winner() {
        let rounds = (0..10).map(|_| resolve_round(vec![1, 0, 0], 0, 1.5)).collect();
        let u = average_utility(&synthetic(3, 1, 1.5, rounds), 0).unwrap();
        assert_eq!(u.per_agent, vec![1.0, 0.0, 0.0]);
        assert!((u.population_mean - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_coordination_utility() {
        let rounds = (0..100).map(|_| round_with(0, 19, 31, 20.0)).collect();
        let u = average_utility(&synthetic(31, 1, 20.0, rounds), 10).unwrap();
        assert!((u.population_mean - 19.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn stderr_of_known_sample() {
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn phase_scan_is_reproducible() {
        let base = GameConfig::new(31, 1, 2, 600, 0);
        let a = phase_scan(&base, &[1, 2, 3], 1, 99, 100).unwrap();
        let b = phase_scan(&base, &[1, 2, 3], 1, 99, 100).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].alpha < w[1].alpha));
        assert_eq!(a.iter().filter(|r| r.phase == Phase::Critical).count(), 1);
    }

    #[test]
    fn phase_labels_follow_minimum() {
        let mk = |memory: u32, s2: f64| RunSummary {
            memory,
            run: 0,
            seed: 0,
            volatility: VolatilityStats {
                mean_attendance: 0.0,
                sigma: 0.0,
                sigma2_over_n: s2,
                sigma_over_n: 0.0,
            },
            predictability: 0.0,
            predictability_cutoff: 0.0,
            mean_utility: 0.0,
        };
        let rows = phase_rows(31, &[mk(4, 0.5), mk(1, 3.0), mk(2, 0.2), mk(3, 0.1)]);
        let phases: Vec<Phase> = rows.iter().map(|r| r.phase).collect();
        assert_eq!(
            phases,
            vec![Phase::Crowded, Phase::Crowded, Phase::Critical, Phase::Uncrowded]
        );
    }
}
