use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::observables::Window;
use crate::sampling::{BathDistribution, InitialState, SamplingOptions, ThermostatMomentumVariance};

/// The four dynamics variants. Each fixes `(nhc_enabled, decay_enabled)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Smj,
    SmjNhc,
    SmjNh,
    SmjNhNhc,
}

keyword_enum!(Mode,
    Mode::Smj => "SMJ",
    Mode::SmjNhc => "SMJ+NHC",
    Mode::SmjNh => "SMJ+nH",
    Mode::SmjNhNhc => "SMJ+nH+NHC",
);

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Smj, Mode::SmjNhc, Mode::SmjNh, Mode::SmjNhNhc];

    /// `(nhc_enabled, decay_enabled)`.
    pub fn flags(self) -> (bool, bool) {
        match self {
            Mode::Smj => (false, false),
            Mode::SmjNhc => (true, false),
            Mode::SmjNh => (false, true),
            Mode::SmjNhNhc => (true, true),
        }
    }

    /// Writes the mode's switches into `params`.
    pub fn apply(self, params: &mut ModelParams) {
        (params.nhc_enabled, params.decay_enabled) = self.flags();
    }

    /// Filesystem-safe name used for sweep directories.
    pub fn dir_name(self) -> String {
        self.name().replace('+', "_")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaSweep {
    pub beta0: f64,
    pub count: usize,
}

impl BetaSweep {
    /// `β_l = β0 (1 + l)`.
    pub fn beta(&self, l: usize) -> f64 {
        self.beta0 * (1 + l) as f64
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Physics and numerics. The mode switches are kept in sync with `mode`.
    pub params: ModelParams,
    pub mode: Mode,
    pub beta_sweep: Option<BetaSweep>,
    /// Modes visited by a sweep.
    pub sweep_modes: Vec<Mode>,
    pub record_stride: usize,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub sampling: SamplingOptions,
    pub fft_window: Window,
    pub spectrum_t_min: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mode = Mode::SmjNhNhc;
        let mut params = ModelParams::default();
        mode.apply(&mut params);
        RunConfig {
            params,
            mode,
            beta_sweep: None,
            sweep_modes: Mode::ALL.to_vec(),
            record_stride: 10,
            output_dir: PathBuf::from("output"),
            workers: 1,
            sampling: SamplingOptions::default(),
            fft_window: Window::Rectangular,
            spectrum_t_min: 20.0,
        }
    }
}

/// Recognized configuration keys, in the order `metadata.txt` lists them.
pub const CONFIG_KEYS: [&str; 22] = [
    "delta",
    "omega",
    "coupling",
    "gamma",
    "beta",
    "mu1",
    "mu2",
    "tau",
    "n_step",
    "n_mcs",
    "seed",
    "mode",
    "sweep_count",
    "sweep_modes",
    "record_stride",
    "output_dir",
    "workers",
    "bath_distribution",
    "thermostat_momentum_variance",
    "initial_state",
    "fft_window",
    "spectrum_t_min",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| Error::config(key, format!("has invalid value '{}': {e}", value.trim())))
}

fn parse_modes(key: &str, value: &str) -> Result<Vec<Mode>> {
    let mut modes = Vec::new();
    for token in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let mode: Mode = parse_value(key, token)?;
        if !modes.contains(&mode) {
            modes.push(mode);
        }
    }
    if modes.is_empty() {
        return Err(Error::config(key, "must list at least one mode"));
    }
    Ok(modes)
}

/// Accumulates `key = value` assignments before validation.
#[derive(Clone, Debug, Default)]
pub struct ConfigBuilder {
    config: RunConfig,
    sweep_count: Option<usize>,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        ConfigBuilder::default()
    }

    /// Applies one assignment. Later assignments win.
    pub fn set(&mut self, key: &str, value: &str) -> Result<&mut Self> {
        let c = &mut self.config;
        let p = &mut c.params;
        match key {
            "delta" => p.delta = parse_value(key, value)?,
            "omega" => p.omega = parse_value(key, value)?,
            "coupling" => p.coupling = parse_value(key, value)?,
            "gamma" => p.gamma = parse_value(key, value)?,
            "beta" => p.beta = parse_value(key, value)?,
            "mu1" => p.mu1 = parse_value(key, value)?,
            "mu2" => p.mu2 = parse_value(key, value)?,
            "tau" => p.tau = parse_value(key, value)?,
            "n_step" => p.n_step = parse_value(key, value)?,
            "n_mcs" => p.n_mcs = parse_value(key, value)?,
            "seed" => p.seed = parse_value(key, value)?,
            "mode" => c.mode = parse_value(key, value)?,
            "sweep_count" => self.sweep_count = Some(parse_value(key, value)?),
            "sweep_modes" => c.sweep_modes = parse_modes(key, value)?,
            "record_stride" => c.record_stride = parse_value(key, value)?,
            "output_dir" => c.output_dir = PathBuf::from(value.trim()),
            "workers" => c.workers = parse_value(key, value)?,
            "bath_distribution" => c.sampling.bath = parse_value::<BathDistribution>(key, value)?,
            "thermostat_momentum_variance" => {
                c.sampling.thermostat_momenta = parse_value::<ThermostatMomentumVariance>(key, value)?
            }
            "initial_state" => c.sampling.initial_state = parse_value::<InitialState>(key, value)?,
            "fft_window" => c.fft_window = parse_value(key, value)?,
            "spectrum_t_min" => c.spectrum_t_min = parse_value(key, value)?,
            _ => return Err(Error::config(key, "is not a recognized key")),
        }
        Ok(self)
    }

    /// Applies a flat `key = value` text. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<&mut Self> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "is not of the form key = value"))?;
            self.set(key.trim(), value)?;
        }
        Ok(self)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<&mut Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("could not be read from {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Validates and returns the configuration.
    pub fn build(&self) -> Result<RunConfig> {
        let mut c = self.config.clone();
        c.mode.apply(&mut c.params);
        c.params.validate()?;
        if c.record_stride < 1 {
            return Err(Error::config("record_stride", "must be >= 1"));
        }
        if c.params.n_step % c.record_stride != 0 {
            return Err(Error::config("record_stride", "must divide n_step"));
        }
        if c.workers < 1 {
            return Err(Error::config("workers", "must be >= 1"));
        }
        if !(c.spectrum_t_min.is_finite() && c.spectrum_t_min >= 0.0) {
            return Err(Error::config("spectrum_t_min", "must be >= 0"));
        }
        c.beta_sweep = match self.sweep_count {
            None => None,
            Some(0) => return Err(Error::config("sweep_count", "must be >= 1")),
            Some(count) => Some(BetaSweep {
                beta0: c.params.beta,
                count,
            }),
        };
        Ok(c)
    }
}

/// Parses a configuration file (if any) and then applies `overrides` on top.
pub fn parse_config(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut builder = ConfigBuilder::new();
    if let Some(path) = file {
        builder.apply_file(path)?;
    }
    for (key, value) in overrides {
        builder.set(key, value)?;
    }
    builder.build()
}

impl RunConfig {
    /// `params` with the switches of `mode` applied.
    pub fn resolved_params(&self) -> ModelParams {
        let mut p = self.params;
        self.mode.apply(&mut p);
        p
    }

    /// Resolved `key = value` lines, parseable by [`parse_config`].
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        let modes: Vec<&str> = self.sweep_modes.iter().map(|m| m.name()).collect();
        CONFIG_KEYS
            .iter()
            .filter_map(|&key| {
                let value = match key {
                    "delta" => format!("{:?}", p.delta),
                    "omega" => format!("{:?}", p.omega),
                    "coupling" => format!("{:?}", p.coupling),
                    "gamma" => format!("{:?}", p.gamma),
                    "beta" => format!("{:?}", self.beta_sweep.map_or(p.beta, |s| s.beta0)),
                    "mu1" => format!("{:?}", p.mu1),
                    "mu2" => format!("{:?}", p.mu2),
                    "tau" => format!("{:?}", p.tau),
                    "n_step" => p.n_step.to_string(),
                    "n_mcs" => p.n_mcs.to_string(),
                    "seed" => p.seed.to_string(),
                    "mode" => self.mode.name().to_string(),
                    "sweep_count" => self.beta_sweep?.count.to_string(),
                    "sweep_modes" => modes.join(","),
                    "record_stride" => self.record_stride.to_string(),
                    "output_dir" => self.output_dir.display().to_string(),
                    "workers" => self.workers.to_string(),
                    "bath_distribution" => self.sampling.bath.name().to_string(),
                    "thermostat_momentum_variance" => self.sampling.thermostat_momenta.name().to_string(),
                    "initial_state" => self.sampling.initial_state.name().to_string(),
                    "fft_window" => self.fft_window.name().to_string(),
                    "spectrum_t_min" => format!("{:?}", self.spectrum_t_min),
                    _ => unreachable!(),
                };
                Some((key, value))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = parse_config(None, &[]).unwrap();
        let p = c.params;
        assert_eq!((p.delta, p.omega, p.coupling, p.gamma), (1.0, 1.0 / 3.0, 0.007, 0.1));
        assert_eq!((p.tau, p.n_step, p.n_mcs, p.mu1, p.mu2), (0.005, 10_000, 2500, 1.0, 1.0));
        assert_eq!((c.record_stride, p.seed), (10, 42));
        assert!(c.beta_sweep.is_none());
    }

    #[test]
    fn negative_tau_is_rejected() {
        let err = parse_config(None, &[("tau".into(), "-1".into())]).unwrap_err();
        assert_eq!(err.to_string(), "tau must be > 0");
    }

    #[test]
    fn mode_table() {
        let expected = [(false, false), (true, false), (false, true), (true, true)];
        for (mode, flags) in Mode::ALL.iter().zip(expected) {
            let c = parse_config(None, &[("mode".into(), mode.name().into())]).unwrap();
            assert_eq!((c.params.nhc_enabled, c.params.decay_enabled), flags);
        }
        assert!(parse_config(None, &[("mode".into(), "NHC".into())]).is_err());
    }

    #[test]
    fn file_then_flags() {
        let mut b = ConfigBuilder::new();
        b.apply_text("# comment\n gamma = 0.2 \n\nbeta=0.01 # trailing\nsweep_count = 3\n").unwrap();
        b.set("gamma", "0.3").unwrap();
        let c = b.build().unwrap();
        assert_eq!(c.params.gamma, 0.3);
        assert_eq!(c.beta_sweep, Some(BetaSweep { beta0: 0.01, count: 3 }));
    }

    #[test]
    fn invalid_entries_name_the_key() {
        let cases = [
            ("record_stride", "3", "record_stride must divide n_step"),
            ("workers", "0", "workers must be >= 1"),
            ("sweep_count", "0", "sweep_count must be >= 1"),
            ("n_mcs", "0", "n_mcs must be >= 1"),
            ("gamma", "-0.1", "gamma must be >= 0"),
        ];
        for (key, value, msg) in cases {
            let err = parse_config(None, &[(key.into(), value.into())]).unwrap_err();
            assert_eq!(err.to_string(), msg);
        }
        let err = parse_config(None, &[("colour".into(), "red".into())]).unwrap_err();
        assert!(err.to_string().starts_with("colour"));
        let err = ConfigBuilder::new().apply_text("tau 0.1").unwrap_err();
        assert!(err.to_string().starts_with("line 1"));
    }

    #[test]
    fn key_values_round_trip() {
        let mut b = ConfigBuilder::new();
        b.apply_text("mode = SMJ+NHC\nsweep_count = 4\nsweep_modes = SMJ, SMJ+nH\ncoupling = 0.0123\nfft_window = hann")
            .unwrap();
        let c = b.build().unwrap();
        let text: String = c.to_key_values().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let mut again = ConfigBuilder::new();
        again.apply_text(&text).unwrap();
        assert_eq!(again.build().unwrap(), c);
    }

    #[test]
    fn sweep_schedule() {
        let s = BetaSweep { beta0: 0.0005, count: 20 };
        assert!((s.beta(14) - 0.0075).abs() < 1e-15);
        assert!((s.beta(19) - 0.010).abs() < 1e-15);
        assert_eq!(Mode::SmjNhNhc.dir_name(), "SMJ_nH_NHC");
    }
}
