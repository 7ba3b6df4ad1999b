use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{Mode, RunConfig};
use super::output::{write_csv, write_spectrum};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::observables::{fourier_spectrum, Ensemble, Observable, SampleRecord};
use crate::sampling::{draw_initial_sample, SamplingOptions};

/// Largest tolerated fraction of aborted samples.
pub const MAX_ABORT_FRACTION: f64 = 0.01;

/// Files written by [`run_experiment`], besides `metadata.txt`.
pub const OUTPUT_FILES: [&str; 10] = [
    "trace.csv",
    "xi11.csv",
    "xi22.csv",
    "chi11.csv",
    "chi22.csv",
    "chi12.csv",
    "population_difference.csv",
    "momentum_squared.csv",
    "trace_law_residual.csv",
    "spectrum.csv",
];

/// Samples propagated per worker between two reductions. Bounds memory.
const CHUNK_PER_WORKER: usize = 32;

/// Reduced ensemble plus the samples that were dropped.
#[derive(Clone, Debug)]
pub struct EnsembleRun {
    pub ensemble: Ensemble,
    /// `(sample_index, reason)` in index order.
    pub aborted: Vec<(usize, String)>,
}

/// Propagates `params.n_mcs` samples on `workers` threads and reduces them
/// in sample-index order. The result does not depend on `workers`.
pub fn run_ensemble(
    params: &ModelParams,
    sampling: &SamplingOptions,
    record_stride: usize,
    workers: usize,
) -> Result<EnsembleRun> {
    params.validate()?;
    if record_stride < 1 {
        return Err(Error::config("record_stride", "must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::RunFailed(format!("thread pool: {e}")))?;
    let mut ensemble = Ensemble::new(*params, record_stride);
    let mut aborted = Vec::new();
    let chunk = CHUNK_PER_WORKER * workers.max(1);
    let mut start = 0;
    while start < params.n_mcs {
        let end = (start + chunk).min(params.n_mcs);
        let records: Vec<Result<SampleRecord>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| SampleRecord::propagate(&draw_initial_sample(params, sampling, i), params, record_stride))
                .collect()
        });
        for (i, record) in (start..end).zip(records) {
            match record {
                Ok(r) => ensemble.push(&r)?,
                Err(e @ Error::NonFiniteState { .. }) => aborted.push((i, e.to_string())),
                Err(e) => return Err(e),
            }
        }
        start = end;
    }
    let limit = MAX_ABORT_FRACTION * params.n_mcs as f64;
    if aborted.len() as f64 > limit {
        return Err(Error::RunFailed(format!(
            "{} of {} samples aborted (limit {:.0}%)",
            aborted.len(),
            params.n_mcs,
            100.0 * MAX_ABORT_FRACTION
        )));
    }
    Ok(EnsembleRun { ensemble, aborted })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSummary {
    pub output_dir: PathBuf,
    pub samples_used: usize,
    pub aborted: usize,
    pub wall_seconds: f64,
    /// Why the spectrum was not written, if it was not.
    pub spectrum_skipped: Option<String>,
}

/// Runs one ensemble for `config.mode` at `config.params.beta` and writes
/// every observable to `config.output_dir`.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentSummary> {
    let started = Instant::now();
    let params = config.resolved_params();
    let run = run_ensemble(&params, &config.sampling, config.record_stride, config.workers)?;
    write_outputs(config, &run, started)
}

/// Writes the CSVs and `metadata.txt` of an already reduced ensemble.
pub fn write_outputs(config: &RunConfig, run: &EnsembleRun, started: Instant) -> Result<ExperimentSummary> {
    let params = config.resolved_params();
    let ens = &run.ensemble;
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;

    let files = [
        (Observable::Trace, "trace.csv"),
        (Observable::Xi11, "xi11.csv"),
        (Observable::Xi22, "xi22.csv"),
        (Observable::Chi11, "chi11.csv"),
        (Observable::Chi22, "chi22.csv"),
        (Observable::Coherence, "chi12.csv"),
        (Observable::PopulationDifference, "population_difference.csv"),
        (Observable::MomentumSquared, "momentum_squared.csv"),
    ];
    let mut population = None;
    for (observable, name) in files {
        let series = ens.series(observable)?;
        write_csv(&series, &dir.join(name))?;
        if observable == Observable::PopulationDifference {
            population = Some(series);
        }
    }
    write_csv(&ens.trace_law_residual().series, &dir.join("trace_law_residual.csv"))?;

    let spectrum_path = dir.join("spectrum.csv");
    let population = population.expect("population difference is always written");
    let spectrum_skipped = match fourier_spectrum(&population, config.spectrum_t_min, config.fft_window) {
        Ok(spectrum) => {
            write_spectrum(&spectrum, &spectrum_path)?;
            None
        }
        Err(e @ (Error::InsufficientData { .. } | Error::NonUniformGrid)) => {
            if spectrum_path.exists() {
                fs::remove_file(&spectrum_path)?;
            }
            Some(e.to_string())
        }
        Err(e) => return Err(e),
    };

    let summary = ExperimentSummary {
        output_dir: dir.clone(),
        samples_used: ens.sample_count(),
        aborted: run.aborted.len(),
        wall_seconds: started.elapsed().as_secs_f64(),
        spectrum_skipped,
    };
    write_metadata(config, &params, run, &summary, &dir.join("metadata.txt"))?;
    Ok(summary)
}

fn write_metadata(
    config: &RunConfig,
    params: &ModelParams,
    run: &EnsembleRun,
    summary: &ExperimentSummary,
    path: &Path,
) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!("# junction {}\n", env!("CARGO_PKG_VERSION")));
    for (key, value) in config.to_key_values() {
        let value = match key {
            "beta" => format!("{:?}", params.beta),
            "mode" => config.mode.name().to_string(),
            "output_dir" => summary.output_dir.display().to_string(),
            _ => value,
        };
        if key == "sweep_count" || key == "sweep_modes" {
            continue;
        }
        text.push_str(&format!("{key} = {value}\n"));
    }
    text.push_str(&format!("# nhc_enabled = {}\n", params.nhc_enabled));
    text.push_str(&format!("# decay_enabled = {}\n", params.decay_enabled));
    text.push_str(&format!("# samples_used = {}\n", summary.samples_used));
    text.push_str(&format!("# samples_aborted = {}\n", summary.aborted));
    for (index, reason) in &run.aborted {
        text.push_str(&format!("# aborted sample {index}: {reason}\n"));
    }
    if let Some(reason) = &summary.spectrum_skipped {
        text.push_str(&format!("# spectrum skipped: {reason}\n"));
    }
    text.push_str(&format!("# wall_seconds = {:.3}\n", summary.wall_seconds));
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug)]
pub struct SweepCell {
    pub l: usize,
    pub beta: f64,
    pub mode: Mode,
    pub result: Result<ExperimentSummary>,
}

#[derive(Debug)]
pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
}

impl SweepSummary {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.result.is_err()).count()
    }
}

/// Runs every `(β_l, mode)` cell into `output_dir/beta_<l>/mode_<name>/`.
/// Failing cells are reported and do not stop the others. Without a
/// configured sweep a single β is run.
pub fn sweep_beta(config: &RunConfig) -> SweepSummary {
    let (beta0, count) = config
        .beta_sweep
        .map_or((config.params.beta, 1), |s| (s.beta0, s.count));
    let mut cells = Vec::new();
    for l in 0..count {
        let beta = beta0 * (1 + l) as f64;
        for &mode in &config.sweep_modes {
            let mut cell = config.clone();
            cell.params.beta = beta;
            cell.mode = mode;
            mode.apply(&mut cell.params);
            cell.beta_sweep = None;
            cell.output_dir = config
                .output_dir
                .join(format!("beta_{l}"))
                .join(format!("mode_{}", mode.dir_name()));
            cells.push(SweepCell {
                l,
                beta,
                mode,
                result: run_experiment(&cell),
            });
        }
    }
    SweepSummary { cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::BetaSweep;

    fn tiny(dir: &Path) -> RunConfig {
        let mut c = RunConfig {
            output_dir: dir.to_path_buf(),
            record_stride: 5,
            ..RunConfig::default()
        };
        c.params.n_step = 100;
        c.params.n_mcs = 8;
        c
    }

    #[test]
    fn worker_count_does_not_change_the_ensemble() {
        let p = ModelParams {
            n_step: 200,
            n_mcs: 40,
            ..ModelParams::default()
        };
        let opts = SamplingOptions::default();
        let a = run_ensemble(&p, &opts, 10, 1).unwrap().ensemble;
        let b = run_ensemble(&p, &opts, 10, 3).unwrap().ensemble;
        for obs in Observable::ALL {
            assert_eq!(a.series(obs).unwrap(), b.series(obs).unwrap());
        }
    }

    #[test]
    fn experiment_writes_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny(dir.path());
        let summary = run_experiment(&c).unwrap();
        assert_eq!(summary.samples_used, 8);
        // 0.5 time units cannot host a spectrum after t = 20
        assert!(summary.spectrum_skipped.is_some());
        for name in OUTPUT_FILES.iter().filter(|&&n| n != "spectrum.csv") {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let meta = fs::read_to_string(dir.path().join("metadata.txt")).unwrap();
        assert!(meta.contains("mode = SMJ+nH+NHC"));
        assert!(meta.contains("seed = 42"));
    }

    #[test]
    fn sweep_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny(dir.path());
        c.beta_sweep = Some(BetaSweep { beta0: 0.001, count: 2 });
        c.sweep_modes = vec![Mode::Smj, Mode::SmjNhNhc];
        let s = sweep_beta(&c);
        assert_eq!(s.cells.len(), 4);
        assert_eq!(s.failures(), 0);
        assert!(dir.path().join("beta_1/mode_SMJ_nH_NHC/trace.csv").exists());
        let meta = fs::read_to_string(dir.path().join("beta_1/mode_SMJ/metadata.txt")).unwrap();
        assert!(meta.contains("beta = 0.002"));
    }
}
