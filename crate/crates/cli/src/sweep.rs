//! Sweep execution and CSV rendering.

use crate::config::{bits_name, fmt_num, header, mode_name, Engine, ExperimentConfig};
use crate::error::CliError;
use rand::Rng;
use ris_secrecy::analysis::ergodic_rates;
use ris_secrecy::channel::{sample_realization, sample_von_mises, trial_rng, ChannelRealization, ErrorMode, SystemConfig, SystemParams};
use ris_secrecy::linalg::ComplexVector;
use ris_secrecy::montecarlo::{estimate, map_trials, mc_esr, mc_mean_instantaneous_sr, McEstimate, PhasePolicy};
use ris_secrecy::optimize::{
    build_sdr, channel_vectors, discretize_aligned, discretize_phases, extract_rank_one, instantaneous_sr, lower_bound_sr,
    solve_sdp, statistical_csi_phases, SdpOptions,
};
use std::fmt::Write as _;
use std::f64::consts::PI;
use std::time::Instant;

/// Statistic reported by a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// `[E R_u - E R_e]^+`.
    Esr,
    /// Mean over realizations of the statistical-CSI lower bound of the SR.
    LowerBound,
    /// Mean over realizations of the clipped instantaneous SR.
    Instantaneous,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Esr => "esr",
            Metric::LowerBound => "lower-bound",
            Metric::Instantaneous => "instantaneous",
        }
    }

    pub fn default_for(engine: Engine) -> Self {
        match engine {
            Engine::Analytic | Engine::MonteCarlo => Metric::Esr,
            Engine::OptimizeStatistical => Metric::LowerBound,
            Engine::OptimizePerfect | Engine::RandomBaseline => Metric::Instantaneous,
        }
    }
}

/// Per-series replacements of the base parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamOverrides {
    pub mode: Option<ErrorMode>,
    pub bits: Option<Option<u32>>,
    pub kappa: Option<f64>,
    pub w_over_l: Option<f64>,
    pub sigma_j_u: Option<f64>,
    pub sigma_j_e: Option<f64>,
    pub cn2: Option<f64>,
}

impl ParamOverrides {
    pub fn apply(&self, p: &mut SystemParams) {
        if let Some(m) = self.mode {
            p.mode = m;
        }
        if let Some(b) = self.bits {
            p.bits = b;
        }
        if let Some(k) = self.kappa {
            p.kappa = k;
        }
        if let Some(v) = self.w_over_l {
            p.w_over_l = v;
        }
        if let Some(v) = self.sigma_j_u {
            p.sigma_j_u = v;
        }
        if let Some(v) = self.sigma_j_e {
            p.sigma_j_e = v;
        }
        if let Some(v) = self.cn2 {
            p.cn2 = v;
        }
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(m) = self.mode {
            parts.push(format!("error_model={}", mode_name(m)));
        }
        if let Some(b) = self.bits {
            parts.push(format!("bits={}", bits_name(b)));
        }
        if let Some(k) = self.kappa {
            parts.push(format!("kappa={}", fmt_num(k)));
        }
        if let Some(v) = self.w_over_l {
            parts.push(format!("w_over_l={v}"));
        }
        if let Some(v) = self.sigma_j_u {
            parts.push(format!("sigma_j_u={v}"));
        }
        if let Some(v) = self.sigma_j_e {
            parts.push(format!("sigma_j_e={v}"));
        }
        if let Some(v) = self.cn2 {
            parts.push(format!("cn2={}", fmt_num(v)));
        }
        parts.join(" ")
    }
}

/// One output curve: an engine, a statistic, and parameter overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub engine: Engine,
    pub metric: Metric,
    pub overrides: ParamOverrides,
}

impl Series {
    pub fn plain(engine: Engine) -> Self {
        Self {
            label: engine.name().to_string(),
            engine,
            metric: Metric::default_for(engine),
            overrides: ParamOverrides::default(),
        }
    }

    fn check(&self) -> Result<(), CliError> {
        let ok = match self.engine {
            Engine::Analytic => self.metric == Metric::Esr,
            Engine::MonteCarlo => self.metric != Metric::LowerBound,
            _ => self.metric != Metric::Esr,
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "engine {} cannot report {}",
                self.engine.name(),
                self.metric.name()
            )))
        }
    }
}

pub fn default_series(engines: &[Engine]) -> Vec<Series> {
    engines.iter().map(|&e| Series::plain(e)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_value: f64,
    pub engine: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
    pub wallclock_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<Row>,
    pub sdp_solves: usize,
    pub nonconverged: usize,
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult, CliError> {
    run_series(config, &default_series(&config.engines))
}

/// Evaluates every series at every sweep point. Rows are ordered by sweep
/// value, then by series.
pub fn run_series(config: &ExperimentConfig, series: &[Series]) -> Result<SweepResult, CliError> {
    for s in series {
        s.check()?;
    }
    let axis = config.axis();
    let mut rows = Vec::new();
    let mut sdp_solves = 0;
    let mut nonconverged = 0;
    for value in config.sweep_values() {
        let params: Vec<SystemParams> = series
            .iter()
            .map(|s| {
                let mut p = config.params;
                s.overrides.apply(&mut p);
                axis.apply(&mut p, value).map(|_| p)
            })
            .collect::<Result<_, _>>()
            .map_err(CliError::Usage)?;
        let mut results: Vec<Option<(McEstimate, u64)>> = vec![None; series.len()];
        for (i, s) in series.iter().enumerate() {
            let start = Instant::now();
            let cfg = params[i].build()?;
            let est = match (s.engine, s.metric) {
                (Engine::Analytic, _) => {
                    let r = ergodic_rates(&cfg)?;
                    McEstimate {
                        mean: r.esr,
                        standard_error: r.abs_error_u + r.abs_error_e,
                        trials: 0,
                        seed: config.seed,
                    }
                }
                (Engine::MonteCarlo, Metric::Instantaneous) => {
                    mc_mean_instantaneous_sr(&cfg, PhasePolicy::Baseline, config.trials, config.seed)?
                }
                (Engine::MonteCarlo, _) => mc_esr(&cfg, PhasePolicy::Baseline, config.trials, config.seed)?,
                _ => continue,
            };
            results[i] = Some((est, start.elapsed().as_millis() as u64));
        }
        // Phase-design engines that differ only in the phase-error model share
        // channel draws and one SDP solve per realization.
        let mut pending: Vec<usize> = (0..series.len()).filter(|&i| results[i].is_none()).collect();
        while let Some(&first) = pending.first() {
            let key = solve_key(&params[first]);
            let (group, rest): (Vec<usize>, Vec<usize>) = pending.iter().partition(|&&i| solve_key(&params[i]) == key);
            pending = rest;
            let start = Instant::now();
            let members: Vec<Member> = group
                .iter()
                .map(|&i| Member {
                    engine: series[i].engine,
                    metric: series[i].metric,
                    params: params[i],
                })
                .collect();
            let out = run_phase_group(&key, &members, config.trials, config.seed)?;
            let ms = start.elapsed().as_millis() as u64;
            sdp_solves += out.sdp_solves;
            nonconverged += out.nonconverged;
            for (k, &i) in group.iter().enumerate() {
                results[i] = Some((out.estimates[k], ms));
            }
        }
        for (s, r) in series.iter().zip(results) {
            let (est, ms) = r.expect("every series evaluated");
            rows.push(Row {
                sweep_value: value,
                engine: s.label.clone(),
                value: est.mean,
                stderr: est.standard_error,
                trials: est.trials,
                seed: config.seed,
                wallclock_ms: if config.wallclock { ms } else { 0 },
            });
        }
    }
    Ok(SweepResult {
        rows,
        sdp_solves,
        nonconverged,
    })
}

/// Parameters with the phase-error model removed.
fn solve_key(p: &SystemParams) -> SystemParams {
    SystemParams {
        mode: ErrorMode::P1,
        bits: None,
        kappa: SystemParams::default().kappa,
        ..*p
    }
}

struct Member {
    engine: Engine,
    metric: Metric,
    params: SystemParams,
}

struct GroupOutcome {
    estimates: Vec<McEstimate>,
    sdp_solves: usize,
    nonconverged: usize,
}

/// Stream for the estimation errors of concentration `kappa` in trial `t`.
fn estimation_rng(seed: u64, kappa: f64, t: u64) -> rand_chacha::ChaCha8Rng {
    trial_rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ kappa.to_bits(), t)
}

fn with_estimation_errors(real: &ChannelRealization, p: &SystemParams, seed: u64, t: u64) -> ChannelRealization {
    let mut r = real.clone();
    if p.mode == ErrorMode::P2 && p.kappa.is_finite() {
        let n = real.elements();
        let mut rng = estimation_rng(seed, p.kappa, t);
        r.estimation_u = (0..n).map(|_| sample_von_mises(p.kappa, &mut rng)).collect();
        r.estimation_e = (0..n).map(|_| sample_von_mises(p.kappa, &mut rng)).collect();
    }
    r
}

fn run_phase_group(key: &SystemParams, members: &[Member], trials: usize, seed: u64) -> Result<GroupOutcome, CliError> {
    let cfg: SystemConfig = key.build()?;
    for m in members {
        m.params.build()?;
    }
    let need_sdp = members.iter().any(|m| m.engine == Engine::OptimizePerfect);
    let per_trial = map_trials(trials, seed, |t, rng| {
        let real = sample_realization(&cfg, rng);
        let n = real.elements();
        let random = ComplexVector::from_phases(&(0..n).map(|_| 2.0 * PI * rng.gen::<f64>()).collect::<Vec<_>>())?;
        let (h_r, h_u, _) = channel_vectors(&real)?;
        let statistical = statistical_csi_phases(&h_r, &h_u)?;
        let perfect = if need_sdp {
            let problem = build_sdr(&cfg, &real)?;
            let sdp = solve_sdp(&problem, SdpOptions::default())?;
            Some((extract_rank_one(&sdp)?, problem, sdp.converged))
        } else {
            None
        };
        let mut values = Vec::with_capacity(members.len());
        for m in members {
            let bits = m.params.bits;
            let (t_vec, phases) = match m.engine {
                Engine::OptimizeStatistical => discretize_phases(&statistical, bits)?,
                Engine::RandomBaseline => discretize_phases(&random, bits)?,
                _ => {
                    let (t_cont, problem, _) = perfect.as_ref().expect("SDP solved");
                    match bits {
                        None => discretize_phases(t_cont, None)?,
                        Some(b) => discretize_aligned(t_cont, b, problem)?,
                    }
                }
            };
            let r = with_estimation_errors(&real, &m.params, seed, t);
            values.push(match m.metric {
                Metric::LowerBound => lower_bound_sr(&cfg, &r, &t_vec)?,
                _ => instantaneous_sr(&cfg, &r, &phases)?,
            });
        }
        Ok((values, perfect.is_some_and(|p| !p.2)))
    })?;
    let estimates = (0..members.len())
        .map(|k| {
            let v: Vec<f64> = per_trial.iter().map(|(vals, _)| vals[k]).collect();
            estimate(&v, seed)
        })
        .collect();
    Ok(GroupOutcome {
        estimates,
        sdp_solves: if need_sdp { trials } else { 0 },
        nonconverged: per_trial.iter().filter(|(_, nc)| *nc).count(),
    })
}

pub const CSV_COLUMNS: &str = "sweep_value,engine,esr_or_sr_bits,stderr,trials,seed,wallclock_ms";

/// CSV with a `#` metadata header describing `config`, `series` and any `notes`.
pub fn render_csv(command: &str, config: &ExperimentConfig, series: &[Series], notes: &[String], rows: &[Row]) -> String {
    let mut meta = vec![format!("ris-secrecy {command}")];
    meta.extend(config.describe());
    for s in series {
        let o = s.overrides.describe();
        let sep = if o.is_empty() { "" } else { " " };
        meta.push(format!("series {}: engine={} metric={}{sep}{o}", s.label, s.engine.name(), s.metric.name()));
    }
    meta.extend(notes.iter().cloned());
    let mut out = header(&meta);
    out.push_str(CSV_COLUMNS);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_num(r.sweep_value),
            r.engine,
            fmt_num(r.value),
            fmt_num(r.stderr),
            r.trials,
            r.seed,
            r.wallclock_ms
        );
    }
    out
}
