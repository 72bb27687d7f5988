//! Experiment configuration: defaults, `key = value` files, and flag overrides.

use crate::error::CliError;
use ris_secrecy::channel::{ErrorMode, SystemConfig, SystemParams};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Elements,
    TxSnrDb,
    Bits,
    Kappa,
    Cn2,
    WOverL,
}

impl Axis {
    pub const ALL: [Axis; 6] = [
        Axis::Elements,
        Axis::TxSnrDb,
        Axis::Bits,
        Axis::Kappa,
        Axis::Cn2,
        Axis::WOverL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Elements => "elements",
            Axis::TxSnrDb => "tx_snr_db",
            Axis::Bits => "bits",
            Axis::Kappa => "kappa",
            Axis::Cn2 => "cn2",
            Axis::WOverL => "w_over_l",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let key = normalize_key(s);
        Self::ALL.into_iter().find(|a| a.name() == key)
    }

    /// Current value of this parameter in `params` (bits: `inf` when continuous).
    pub fn current(self, params: &SystemParams) -> f64 {
        match self {
            Axis::Elements => params.elements as f64,
            Axis::TxSnrDb => params.tx_snr_db,
            Axis::Bits => params.bits.map_or(f64::INFINITY, f64::from),
            Axis::Kappa => params.kappa,
            Axis::Cn2 => params.cn2,
            Axis::WOverL => params.w_over_l,
        }
    }

    pub fn apply(self, params: &mut SystemParams, value: f64) -> Result<(), String> {
        match self {
            Axis::Elements => params.elements = whole(value, "elements")? as usize,
            Axis::Bits => {
                params.bits = if value.is_infinite() {
                    None
                } else {
                    Some(whole(value, "bits")? as u32)
                }
            }
            Axis::TxSnrDb => params.tx_snr_db = value,
            Axis::Kappa => params.kappa = value,
            Axis::Cn2 => params.cn2 = value,
            Axis::WOverL => params.w_over_l = value,
        }
        Ok(())
    }
}

fn whole(value: f64, what: &str) -> Result<u64, String> {
    if value >= 1.0 && value.fract() == 0.0 && value < 1e9 {
        Ok(value as u64)
    } else {
        Err(format!("{what} must be a positive integer, got {value}"))
    }
}

/// Linear grid `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn single(axis: Axis, value: f64) -> Self {
        Self {
            axis,
            start: value,
            stop: value,
            step: 0.0,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.stop == self.start || self.step == 0.0 {
            return vec![self.start];
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.start + k as f64 * self.step).collect()
    }

    fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let axis = Axis::parse(parts[0]).ok_or_else(|| {
            let names: Vec<_> = Axis::ALL.iter().map(|a| a.name()).collect();
            format!("unknown sweep axis '{}' (expected one of {})", parts[0], names.join(", "))
        })?;
        let num = |t: &str| -> Result<f64, String> {
            if axis == Axis::Bits {
                parse_bits(t).map(|b| b.map_or(f64::INFINITY, f64::from))
            } else {
                parse_f64(t)
            }
        };
        let sweep = match parts.len() {
            2 => Self::single(axis, num(parts[1])?),
            4 => Self {
                axis,
                start: num(parts[1])?,
                stop: num(parts[2])?,
                step: num(parts[3])?,
            },
            _ => return Err(format!("sweep must be AXIS:VALUE or AXIS:START:STOP:STEP, got '{s}'")),
        };
        sweep.check()?;
        Ok(sweep)
    }

    fn check(&self) -> Result<(), String> {
        if !self.start.is_finite() && !(self.axis == Axis::Bits && self.start == self.stop) {
            return Err(format!("sweep start must be finite, got {}", self.start));
        }
        if self.stop != self.start {
            if !(self.stop > self.start) || !self.stop.is_finite() {
                return Err(format!("sweep stop {} must be finite and above start {}", self.stop, self.start));
            }
            if !(self.step > 0.0) || !self.step.is_finite() {
                return Err(format!("sweep step must be positive, got {}", self.step));
            }
            if (self.stop - self.start) / self.step > 1e5 {
                return Err("sweep has more than 100000 points".into());
            }
        }
        Ok(())
    }
}

/// Computation producing one CSV series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Analytic,
    MonteCarlo,
    OptimizeStatistical,
    OptimizePerfect,
    RandomBaseline,
}

impl Engine {
    pub const ALL: [Engine; 5] = [
        Engine::Analytic,
        Engine::MonteCarlo,
        Engine::OptimizeStatistical,
        Engine::OptimizePerfect,
        Engine::RandomBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::MonteCarlo => "montecarlo",
            Engine::OptimizeStatistical => "optimize-statistical",
            Engine::OptimizePerfect => "optimize-perfect",
            Engine::RandomBaseline => "random-baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    /// `None` evaluates the single point given by `params`.
    pub sweep: Option<Sweep>,
    pub engines: Vec<Engine>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Record measured run times; off by default so output is reproducible.
    pub wallclock: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            sweep: None,
            engines: vec![Engine::Analytic, Engine::MonteCarlo],
            trials: ris_secrecy::montecarlo::DEFAULT_TRIALS,
            seed: 1,
            out: None,
            wallclock: false,
        }
    }
}

/// Every key accepted in configuration files and as `--flag`.
pub const KEYS: [&str; 22] = [
    "elements",
    "bits",
    "kappa",
    "sigma_j_u",
    "sigma_j_e",
    "cn2",
    "w_over_l",
    "tx_snr_db",
    "trials",
    "seed",
    "error_model",
    "engines",
    "out",
    "wavelength",
    "d_sr",
    "d_ru",
    "d_re",
    "gain_s_dbi",
    "gain_u_dbi",
    "gain_e_dbi",
    "sweep",
    "wallclock",
];

pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("expected a number, got '{s}'"))
}

/// `inf`, `infinity`, `none` or `∞` mean continuous phases.
pub fn parse_bits(s: &str) -> Result<Option<u32>, String> {
    let t = s.trim().to_ascii_lowercase();
    if matches!(t.as_str(), "inf" | "infinity" | "none" | "∞") {
        return Ok(None);
    }
    match t.parse::<u32>() {
        Ok(b) if b >= 1 => Ok(Some(b)),
        _ => Err(format!("bits must be a positive integer or 'inf', got '{s}'")),
    }
}

fn parse_mode(s: &str) -> Result<ErrorMode, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "p1" => Ok(ErrorMode::P1),
        "p2" => Ok(ErrorMode::P2),
        _ => Err(format!("error model must be p1 or p2, got '{s}'")),
    }
}

pub fn mode_name(mode: ErrorMode) -> &'static str {
    match mode {
        ErrorMode::P1 => "p1",
        ErrorMode::P2 => "p2",
    }
}

/// Shortest round-trip representation, in exponent form outside `[1e-4, 1e7)`.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e7).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn bits_name(bits: Option<u32>) -> String {
    bits.map_or_else(|| "inf".to_string(), |b| b.to_string())
}

impl ExperimentConfig {
    /// Sets one key; `value` uses the same syntax in files and on the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let p = &mut self.params;
        let v = value.trim();
        match normalize_key(key).as_str() {
            "elements" => match v.parse::<usize>() {
                Ok(n) if n >= 1 => p.elements = n,
                _ => return Err(format!("elements must be a positive integer, got '{v}'")),
            },
            "bits" => p.bits = parse_bits(v)?,
            "kappa" => p.kappa = parse_f64(v)?,
            "sigma_j_u" => p.sigma_j_u = parse_f64(v)?,
            "sigma_j_e" => p.sigma_j_e = parse_f64(v)?,
            "cn2" => p.cn2 = parse_f64(v)?,
            "w_over_l" => p.w_over_l = parse_f64(v)?,
            "tx_snr_db" => p.tx_snr_db = parse_f64(v)?,
            "wavelength" => p.wavelength = parse_f64(v)?,
            "d_sr" => p.d_sr = parse_f64(v)?,
            "d_ru" => p.d_ru = parse_f64(v)?,
            "d_re" => p.d_re = parse_f64(v)?,
            "gain_s_dbi" => p.gain_s_dbi = parse_f64(v)?,
            "gain_u_dbi" => p.gain_u_dbi = parse_f64(v)?,
            "gain_e_dbi" => p.gain_e_dbi = parse_f64(v)?,
            "error_model" => p.mode = parse_mode(v)?,
            "trials" => match v.parse::<usize>() {
                Ok(n) if n >= 1 => self.trials = n,
                _ => return Err(format!("trials must be a positive integer, got '{v}'")),
            },
            "seed" => self.seed = v.parse().map_err(|_| format!("seed must be an unsigned integer, got '{v}'"))?,
            "engines" => {
                let mut engines = Vec::new();
                for name in v.split(',').filter(|s| !s.trim().is_empty()) {
                    let e = Engine::parse(name).ok_or_else(|| {
                        let names: Vec<_> = Engine::ALL.iter().map(|e| e.name()).collect();
                        format!("unknown engine '{}' (expected {})", name.trim(), names.join(", "))
                    })?;
                    if !engines.contains(&e) {
                        engines.push(e);
                    }
                }
                if engines.is_empty() {
                    return Err("at least one engine is required".into());
                }
                self.engines = engines;
            }
            "out" => self.out = Some(PathBuf::from(v)),
            "sweep" => self.sweep = Some(Sweep::parse(v)?),
            "wallclock" => {
                self.wallclock = match v.to_ascii_lowercase().as_str() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(format!("wallclock must be true or false, got '{v}'")),
                }
            }
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Checks that the parameters describe a valid scenario at every sweep point.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut p = self.params;
        for v in self.sweep_values() {
            if let Some(s) = &self.sweep {
                s.axis.apply(&mut p, v).map_err(CliError::Usage)?;
            }
            SystemConfig::from_params(&p).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn axis(&self) -> Axis {
        self.sweep.map_or(Axis::Elements, |s| s.axis)
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        match &self.sweep {
            Some(s) => s.values(),
            None => vec![self.axis().current(&self.params)],
        }
    }

    /// `key=value` lines describing the configuration.
    pub fn describe(&self) -> Vec<String> {
        let p = &self.params;
        let engines: Vec<_> = self.engines.iter().map(|e| e.name()).collect();
        let sweep = match &self.sweep {
            Some(s) if s.values().len() > 1 => format!("{}:{}:{}:{}", s.axis.name(), fmt_num(s.start), fmt_num(s.stop), fmt_num(s.step)),
            Some(s) => format!("{}:{}", s.axis.name(), fmt_num(s.start)),
            None => format!("{}:{}", Axis::Elements.name(), p.elements),
        };
        let mut out = Vec::new();
        let mut kv = |k: &str, v: String| out.push(format!("{k}={v}"));
        kv("elements", p.elements.to_string());
        kv("bits", bits_name(p.bits));
        kv("kappa", fmt_num(p.kappa));
        kv("sigma_j_u", fmt_num(p.sigma_j_u));
        kv("sigma_j_e", fmt_num(p.sigma_j_e));
        kv("cn2", fmt_num(p.cn2));
        kv("w_over_l", fmt_num(p.w_over_l));
        kv("tx_snr_db", fmt_num(p.tx_snr_db));
        kv("error_model", mode_name(p.mode).to_string());
        kv("wavelength", fmt_num(p.wavelength));
        kv("d_sr", fmt_num(p.d_sr));
        kv("d_ru", fmt_num(p.d_ru));
        kv("d_re", fmt_num(p.d_re));
        kv("gain_s_dbi", fmt_num(p.gain_s_dbi));
        kv("gain_u_dbi", fmt_num(p.gain_u_dbi));
        kv("gain_e_dbi", fmt_num(p.gain_e_dbi));
        kv("sweep", sweep);
        kv("engines", engines.join(","));
        kv("trials", self.trials.to_string());
        kv("seed", self.seed.to_string());
        kv("wallclock", self.wallclock.to_string());
        out
    }
}

/// Parses a flat `key = value` file; `#` starts a comment line.
pub fn parse_config_file(text: &str, path: &str) -> Result<Vec<(usize, String, String)>, CliError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| CliError::Config {
            path: path.to_string(),
            line: i + 1,
            message,
        };
        let Some((k, v)) = line.split_once('=') else {
            return Err(err(format!("expected 'key = value', got '{line}'")));
        };
        let key = normalize_key(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(err(format!("unknown key '{}'", k.trim())));
        }
        entries.push((i + 1, key, v.trim().to_string()));
    }
    Ok(entries)
}

/// Applies the file at `path` (if any) to `base`, then the command-line
/// `flags`, which take precedence.
pub fn load_config(
    base: ExperimentConfig,
    path: Option<&Path>,
    flags: &[(String, String)],
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = base;
    if let Some(path) = path {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: shown.clone(),
            source,
        })?;
        for (line, key, value) in parse_config_file(&text, &shown)? {
            cfg.set(&key, &value).map_err(|message| CliError::Config {
                path: shown.clone(),
                line,
                message,
            })?;
        }
    }
    for (key, value) in flags {
        cfg.set(key, value).map_err(|m| CliError::Usage(format!("--{}: {m}", key.replace('_', "-"))))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Renders `lines` as `# `-prefixed header lines.
pub fn header(lines: &[String]) -> String {
    let mut s = String::new();
    for l in lines {
        let _ = writeln!(s, "# {l}");
    }
    s
}
