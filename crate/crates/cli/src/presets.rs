//! Figure reproductions as predefined sweeps.

use crate::config::{bits_name, fmt_num, mode_name, Axis, Engine, ExperimentConfig, Sweep};
use crate::sweep::{Metric, ParamOverrides, Series};
use ris_secrecy::channel::{ErrorMode, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// ESR versus N, analysis and simulation, P1/P2, two beam widths.
    Fig3,
    /// ESR versus N under P2 for several jitter pairs and turbulence strengths.
    Fig4,
    /// ESR versus transmit SNR under P1 for b = 1..4.
    Fig5a,
    /// ESR versus transmit SNR under P2 (b = 1) for several kappa, with the P1 reference.
    Fig5b,
    /// Optimized and random lower-bound and instantaneous SR versus transmit SNR.
    Fig6,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig3, Preset::Fig4, Preset::Fig5a, Preset::Fig5b, Preset::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5a => "fig5a",
            Preset::Fig5b => "fig5b",
            Preset::Fig6 => "fig6",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s.trim().to_ascii_lowercase())
    }
}

/// Base configuration, series, and header notes of a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetPlan {
    pub config: ExperimentConfig,
    pub series: Vec<Series>,
    pub notes: Vec<String>,
}

impl PresetPlan {
    /// Series whose engine is enabled in `config` (lets `--engines` thin a preset).
    pub fn active_series(&self, config: &ExperimentConfig) -> Vec<Series> {
        self.series
            .iter()
            .filter(|s| config.engines.contains(&s.engine))
            .cloned()
            .collect()
    }
}

fn series(engine: Engine, metric: Metric, label: String, overrides: ParamOverrides) -> Series {
    Series {
        label,
        engine,
        metric,
        overrides,
    }
}

fn engines_of(series: &[Series]) -> Vec<Engine> {
    let mut out = Vec::new();
    for s in series {
        if !out.contains(&s.engine) {
            out.push(s.engine);
        }
    }
    out
}

pub fn plan(preset: Preset) -> PresetPlan {
    let base = SystemParams {
        bits: Some(1),
        kappa: 5.0,
        sigma_j_u: 0.1,
        sigma_j_e: 0.2,
        cn2: 1e-13,
        w_over_l: 6.0,
        tx_snr_db: 260.0,
        ..SystemParams::default()
    };
    let snr_sweep = Sweep {
        axis: Axis::TxSnrDb,
        start: 220.0,
        stop: 300.0,
        step: 10.0,
    };
    let mut notes = Vec::new();
    let (params, sweep, list) = match preset {
        Preset::Fig3 => {
            let mut list = Vec::new();
            for wl in [6.0, 10.0] {
                for mode in [ErrorMode::P1, ErrorMode::P2] {
                    for engine in [Engine::Analytic, Engine::MonteCarlo] {
                        let o = ParamOverrides {
                            mode: Some(mode),
                            w_over_l: Some(wl),
                            ..Default::default()
                        };
                        let label = format!("{}|{}|w_over_l={wl}", engine.name(), mode_name(mode));
                        list.push(series(engine, Metric::Esr, label, o));
                    }
                }
            }
            let sweep = Sweep {
                axis: Axis::Elements,
                start: 10.0,
                stop: 100.0,
                step: 10.0,
            };
            (base, sweep, list)
        }
        Preset::Fig4 => {
            let p = SystemParams {
                kappa: 1.0,
                mode: ErrorMode::P2,
                ..base
            };
            let mut list = Vec::new();
            for cn2 in [1e-13, 1e-12] {
                for (su, se) in [(0.1, 0.2), (0.2, 0.2), (0.2, 0.1)] {
                    let o = ParamOverrides {
                        sigma_j_u: Some(su),
                        sigma_j_e: Some(se),
                        cn2: Some(cn2),
                        ..Default::default()
                    };
                    let label = format!("analytic|p2|cn2={}|sigma_j_u={su}|sigma_j_e={se}", fmt_num(cn2));
                    list.push(series(Engine::Analytic, Metric::Esr, label, o));
                }
            }
            let sweep = Sweep {
                axis: Axis::Elements,
                start: 20.0,
                stop: 200.0,
                step: 20.0,
            };
            (p, sweep, list)
        }
        Preset::Fig5a => {
            let p = SystemParams { elements: 80, ..base };
            let list = (1..=4)
                .map(|b| {
                    let o = ParamOverrides {
                        mode: Some(ErrorMode::P1),
                        bits: Some(Some(b)),
                        ..Default::default()
                    };
                    series(Engine::Analytic, Metric::Esr, format!("analytic|p1|b={b}"), o)
                })
                .collect();
            (p, snr_sweep, list)
        }
        Preset::Fig5b => {
            let p = SystemParams { elements: 80, ..base };
            let mut list: Vec<Series> = [1.0, 2.0, 5.0, 10.0]
                .into_iter()
                .map(|k| {
                    let o = ParamOverrides {
                        mode: Some(ErrorMode::P2),
                        bits: Some(Some(1)),
                        kappa: Some(k),
                        ..Default::default()
                    };
                    series(Engine::Analytic, Metric::Esr, format!("analytic|p2|b=1|kappa={k}"), o)
                })
                .collect();
            let o = ParamOverrides {
                mode: Some(ErrorMode::P1),
                bits: Some(Some(1)),
                ..Default::default()
            };
            list.push(series(Engine::Analytic, Metric::Esr, "analytic|p1|b=1".into(), o));
            (p, snr_sweep, list)
        }
        Preset::Fig6 => {
            let p = SystemParams {
                elements: 40,
                sigma_j_u: 0.2,
                sigma_j_e: 0.1,
                ..base
            };
            let mut list = Vec::new();
            let p1 = |bits| ParamOverrides {
                mode: Some(ErrorMode::P1),
                bits: Some(bits),
                ..Default::default()
            };
            for bits in [Some(1), Some(2), Some(3), None] {
                let b = bits_name(bits);
                list.push(series(
                    Engine::OptimizeStatistical,
                    Metric::LowerBound,
                    format!("optimize-statistical|lower-bound|p1|b={b}"),
                    p1(bits),
                ));
                list.push(series(
                    Engine::OptimizePerfect,
                    Metric::Instantaneous,
                    format!("optimize-perfect|instantaneous|p1|b={b}"),
                    p1(bits),
                ));
            }
            for metric in [Metric::LowerBound, Metric::Instantaneous] {
                list.push(series(
                    Engine::RandomBaseline,
                    metric,
                    format!("random-baseline|{}|p1|b=inf", metric.name()),
                    p1(None),
                ));
            }
            for kappa in [1.0, 5.0, 10.0] {
                let o = ParamOverrides {
                    mode: Some(ErrorMode::P2),
                    bits: Some(Some(1)),
                    kappa: Some(kappa),
                    ..Default::default()
                };
                list.push(series(
                    Engine::OptimizeStatistical,
                    Metric::LowerBound,
                    format!("optimize-statistical|lower-bound|p2|b=1|kappa={kappa}"),
                    o,
                ));
                list.push(series(
                    Engine::OptimizePerfect,
                    Metric::Instantaneous,
                    format!("optimize-perfect|instantaneous|p2|b=1|kappa={kappa}"),
                    o,
                ));
            }
            notes.push("optimize and random-baseline values are means over independent channel realizations".into());
            (p, snr_sweep, list)
        }
    };
    let config = ExperimentConfig {
        params,
        sweep: Some(sweep),
        engines: engines_of(&list),
        ..ExperimentConfig::default()
    };
    PresetPlan {
        config,
        series: list,
        notes,
    }
}
