//! Ensemble estimators for the reduced density matrices and derived
//! observables.
//!
//! Samples are folded into an [`Ensemble`] one at a time, in sample-index
//! order, which makes every estimate bitwise reproducible. For each recorded
//! time the ensemble keeps running means and co-moments of the per-sample
//! contributions, so memory does not grow with the number of samples.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dynamics::{propagate_element, ElementTrajectory};
use crate::error::{Error, Result};
use crate::model::{AdiabaticPair, ModelParams};
use crate::sampling::InitialSample;

/// Smallest trace accepted as a normalization denominator.
pub const TRACE_FLOOR: f64 = 1e-12;

/// Minimum number of points a spectrum is computed from.
pub const MIN_SPECTRUM_POINTS: usize = 16;

/// 2×2 complex matrix in the adiabatic basis. Index 0 is adiabatic state 1.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QuantumMatrix2 {
    pub m: [[Complex64; 2]; 2],
}

impl QuantumMatrix2 {
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        QuantumMatrix2 {
            m: [[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.m[row][col]
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..2).all(|a| (0..2).all(|b| (self.m[a][b] - self.m[b][a].conj()).norm() <= tol))
    }

    pub fn matmul(&self, rhs: &QuantumMatrix2) -> QuantumMatrix2 {
        QuantumMatrix2::from_fn(|a, b| self.m[a][0] * rhs.m[0][b] + self.m[a][1] * rhs.m[1][b])
    }

    pub fn max_abs_diff(&self, rhs: &QuantumMatrix2) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                worst = worst.max((self.m[a][b] - rhs.m[a][b]).norm());
            }
        }
        worst
    }

    pub fn to_real_parts(&self) -> [[f64; 2]; 2] {
        [[self.m[0][0].re, self.m[0][1].re], [self.m[1][0].re, self.m[1][1].re]]
    }
}

/// Mean and standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SeriesValues {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl SeriesValues {
    pub fn len(&self) -> usize {
        match self {
            SeriesValues::Real(v) => v.len(),
            SeriesValues::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Time series of an ensemble average with its statistical error.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub mean: SeriesValues,
    pub stderr: Vec<f64>,
}

impl ObservableSeries {
    pub fn real(label: impl Into<String>, times: Vec<f64>, mean: Vec<f64>, stderr: Vec<f64>) -> Self {
        ObservableSeries {
            label: label.into(),
            times,
            mean: SeriesValues::Real(mean),
            stderr,
        }
    }

    pub fn complex(label: impl Into<String>, times: Vec<f64>, mean: Vec<Complex64>, stderr: Vec<f64>) -> Self {
        ObservableSeries {
            label: label.into(),
            times,
            mean: SeriesValues::Complex(mean),
            stderr,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Real part of the mean at every time.
    pub fn real_means(&self) -> Vec<f64> {
        match &self.mean {
            SeriesValues::Real(v) => v.clone(),
            SeriesValues::Complex(v) => v.iter().map(|z| z.re).collect(),
        }
    }
}

/// Observables that can be extracted as a full time series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    Trace,
    Xi11,
    Xi22,
    Chi11,
    Chi22,
    Coherence,
    PopulationDifference,
    MomentumSquared,
}

impl Observable {
    pub const ALL: [Observable; 8] = [
        Observable::Trace,
        Observable::Xi11,
        Observable::Xi22,
        Observable::Chi11,
        Observable::Chi22,
        Observable::Coherence,
        Observable::PopulationDifference,
        Observable::MomentumSquared,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Observable::Trace => "trace",
            Observable::Xi11 => "xi11",
            Observable::Xi22 => "xi22",
            Observable::Chi11 => "chi11",
            Observable::Chi22 => "chi22",
            Observable::Coherence => "chi12",
            Observable::PopulationDifference => "population_difference",
            Observable::MomentumSquared => "momentum_squared",
        }
    }
}

/// Recorded trajectories of one Monte Carlo sample: one per independent
/// density-matrix element, all started from the same point.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub sample_index: usize,
    pub omega0: QuantumMatrix2,
    pub upper: Vec<ElementTrajectory>,
    pub lower: Vec<ElementTrajectory>,
    /// The (1,2) element; (2,1) is its conjugate.
    pub coherence: Vec<ElementTrajectory>,
}

impl SampleRecord {
    pub fn propagate(sample: &InitialSample, params: &ModelParams, record_stride: usize) -> Result<Self> {
        let run = |pair| propagate_element(&sample.point, pair, params, record_stride);
        Ok(SampleRecord {
            sample_index: sample.sample_index,
            omega0: sample.omega0,
            upper: run(AdiabaticPair::UPPER)?,
            lower: run(AdiabaticPair::LOWER)?,
            coherence: run(AdiabaticPair::COHERENCE)?,
        })
    }
}

// Per-sample contributions tracked at every recorded time.
const XI11: usize = 0;
const XI22: usize = 1;
const XI12_RE: usize = 2;
const XI12_IM: usize = 3;
const POP: usize = 4;
const P2: usize = 5;
const N_TRACKED: usize = 6;

/// Running mean and co-moment matrix (Welford update).
#[derive(Clone, Debug, PartialEq)]
struct Moments<const N: usize> {
    count: usize,
    mean: [f64; N],
    comoment: [[f64; N]; N],
}

impl<const N: usize> Moments<N> {
    fn new() -> Self {
        Moments {
            count: 0,
            mean: [0.0; N],
            comoment: [[0.0; N]; N],
        }
    }

    fn push(&mut self, x: &[f64; N]) {
        self.count += 1;
        let n = self.count as f64;
        let delta: [f64; N] = std::array::from_fn(|i| x[i] - self.mean[i]);
        for i in 0..N {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..N {
            let after = x[i] - self.mean[i];
            for j in 0..N {
                self.comoment[j][i] += delta[j] * after;
            }
        }
    }

    /// Sample covariance of the mean, `Cov(x_i, x_j) / n`.
    fn mean_covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        self.comoment[i][j] / (n - 1.0) / n
    }

    /// Standard error of a linear combination `Σ c_k x_k`.
    fn stderr_of(&self, coeffs: &[(usize, f64)]) -> f64 {
        let mut var = 0.0;
        for &(i, a) in coeffs {
            for &(j, b) in coeffs {
                var += a * b * self.mean_covariance(i, j);
            }
        }
        var.max(0.0).sqrt()
    }

    /// Delta-method standard error of `Σ num / Σ den`.
    fn ratio_stderr(&self, num: &[(usize, f64)], den: &[(usize, f64)]) -> f64 {
        let mean_of = |c: &[(usize, f64)]| c.iter().map(|&(i, a)| a * self.mean[i]).sum::<f64>();
        let d = mean_of(den);
        if d == 0.0 {
            return f64::INFINITY;
        }
        let r = mean_of(num) / d;
        let mut combined: Vec<(usize, f64)> = num.to_vec();
        combined.extend(den.iter().map(|&(i, a)| (i, -r * a)));
        self.stderr_of(&combined) / d.abs()
    }
}

const TRACE_COEFFS: [(usize, f64); 2] = [(XI11, 1.0), (XI22, 1.0)];

/// Ensemble of propagated samples, reduced on the fly.
#[derive(Clone, Debug)]
pub struct Ensemble {
    params: ModelParams,
    times: Vec<f64>,
    moments: Vec<Moments<N_TRACKED>>,
    residual: Vec<Moments<1>>,
    samples: usize,
}

/// Recording grid of [`propagate_element`]: every `record_stride` steps
/// plus the final step.
pub fn record_times(params: &ModelParams, record_stride: usize) -> Vec<f64> {
    let mut times: Vec<f64> = (0..=params.n_step)
        .step_by(record_stride)
        .map(|n| n as f64 * params.tau)
        .collect();
    if params.n_step % record_stride != 0 {
        times.push(params.n_step as f64 * params.tau);
    }
    times
}

impl Ensemble {
    pub fn new(params: ModelParams, record_stride: usize) -> Self {
        let times = record_times(&params, record_stride);
        let n = times.len();
        Ensemble {
            params,
            times,
            moments: vec![Moments::new(); n],
            residual: vec![Moments::new(); n.saturating_sub(2)],
            samples: 0,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sample_count(&self) -> usize {
        self.samples
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Folds one sample into the ensemble.
    pub fn push(&mut self, record: &SampleRecord) -> Result<()> {
        for (name, traj) in [("upper", &record.upper), ("lower", &record.lower), ("coherence", &record.coherence)] {
            if traj.len() != self.times.len() || traj.iter().zip(&self.times).any(|(s, &t)| s.elapsed != t) {
                return Err(Error::IncompleteEnsemble(format!(
                    "sample {} {name} trajectory does not cover the recording grid",
                    record.sample_index
                )));
            }
        }
        let o = &record.omega0;
        let mut traces = Vec::with_capacity(self.times.len());
        let mut xi11s = Vec::with_capacity(self.times.len());
        for k in 0..self.times.len() {
            let (up, lo, co) = (&record.upper[k], &record.lower[k], &record.coherence[k]);
            let xi11 = (o.m[0][0] * up.volume_weighted()).re;
            let xi22 = (o.m[1][1] * lo.volume_weighted()).re;
            let xi12 = o.m[0][1] * co.volume_weighted();
            let s_up = self.params.sigma_z_adiabatic(up.point.q);
            let s_lo = self.params.sigma_z_adiabatic(lo.point.q);
            let s_co = self.params.sigma_z_adiabatic(co.point.q);
            let pop = xi11 * s_up[0][0] + xi22 * s_lo[1][1] + 2.0 * (xi12 * s_co[1][0]).re;
            let p2 = xi11 * up.point.p * up.point.p + xi22 * lo.point.p * lo.point.p;
            let mut x = [0.0; N_TRACKED];
            x[XI11] = xi11;
            x[XI22] = xi22;
            x[XI12_RE] = xi12.re;
            x[XI12_IM] = xi12.im;
            x[POP] = pop;
            x[P2] = p2;
            self.moments[k].push(&x);
            traces.push(xi11 + xi22);
            xi11s.push(xi11);
        }
        let sink = self.params.decay_rate(AdiabaticPair::UPPER);
        for k in 1..self.times.len().saturating_sub(1) {
            let slope = (traces[k + 1] - traces[k - 1]) / (self.times[k + 1] - self.times[k - 1]);
            self.residual[k - 1].push(&[slope + sink * xi11s[k]]);
        }
        self.samples += 1;
        Ok(())
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let k = self
            .times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .ok_or_else(|| Error::IncompleteEnsemble(format!("no snapshot recorded at t = {t}")))?;
        if self.samples == 0 || self.moments[k].count != self.samples {
            return Err(Error::IncompleteEnsemble(format!("not every sample reached t = {t}")));
        }
        Ok(k)
    }

    /// Non-normalized reduced density matrix Ξ(t) with per-element errors.
    pub fn estimate_unnormalized(&self, t: f64) -> Result<(QuantumMatrix2, [[f64; 2]; 2])> {
        let k = self.index_of(t)?;
        Ok(self.unnormalized_at(k))
    }

    fn unnormalized_at(&self, k: usize) -> (QuantumMatrix2, [[f64; 2]; 2]) {
        let m = &self.moments[k];
        let xi12 = Complex64::new(m.mean[XI12_RE], m.mean[XI12_IM]);
        let matrix = QuantumMatrix2 {
            m: [
                [Complex64::new(m.mean[XI11], 0.0), xi12],
                [xi12.conj(), Complex64::new(m.mean[XI22], 0.0)],
            ],
        };
        let off = m.stderr_of(&[(XI12_RE, 1.0)]).hypot(m.stderr_of(&[(XI12_IM, 1.0)]));
        let errors = [[m.stderr_of(&[(XI11, 1.0)]), off], [off, m.stderr_of(&[(XI22, 1.0)])]];
        (matrix, errors)
    }

    /// Trace of Ξ(t).
    pub fn trace_omega(&self, t: f64) -> Result<Estimate> {
        let k = self.index_of(t)?;
        Ok(self.trace_at(k))
    }

    fn trace_at(&self, k: usize) -> Estimate {
        let m = &self.moments[k];
        Estimate {
            value: m.mean[XI11] + m.mean[XI22],
            stderr: m.stderr_of(&TRACE_COEFFS),
        }
    }

    fn checked_trace(&self, k: usize) -> Result<f64> {
        let tr = self.trace_at(k).value;
        if !(tr > TRACE_FLOOR) {
            return Err(Error::VanishingTrace(tr));
        }
        Ok(tr)
    }

    /// Normalized reduced density matrix 𝒳(t) = Ξ(t)/Tr Ξ(t), with
    /// delta-method errors. The trace of the result is exactly 1.
    pub fn estimate_normalized(&self, t: f64) -> Result<(QuantumMatrix2, [[f64; 2]; 2])> {
        let k = self.index_of(t)?;
        self.normalized_at(k)
    }

    fn normalized_at(&self, k: usize) -> Result<(QuantumMatrix2, [[f64; 2]; 2])> {
        let tr = self.checked_trace(k)?;
        let m = &self.moments[k];
        let chi11 = m.mean[XI11] / tr;
        let chi12 = Complex64::new(m.mean[XI12_RE], m.mean[XI12_IM]) / tr;
        let matrix = QuantumMatrix2 {
            m: [
                [Complex64::new(chi11, 0.0), chi12],
                [chi12.conj(), Complex64::new(1.0 - chi11, 0.0)],
            ],
        };
        let diag = m.ratio_stderr(&[(XI11, 1.0)], &TRACE_COEFFS);
        let off = m
            .ratio_stderr(&[(XI12_RE, 1.0)], &TRACE_COEFFS)
            .hypot(m.ratio_stderr(&[(XI12_IM, 1.0)], &TRACE_COEFFS));
        Ok((matrix, [[diag, off], [off, diag]]))
    }

    /// 𝒳_12(t) and the standard error of its real part.
    pub fn coherence(&self, t: f64) -> Result<(Complex64, f64)> {
        let k = self.index_of(t)?;
        self.coherence_at(k)
    }

    fn coherence_at(&self, k: usize) -> Result<(Complex64, f64)> {
        let (matrix, _) = self.normalized_at(k)?;
        Ok((matrix.m[0][1], self.moments[k].ratio_stderr(&[(XI12_RE, 1.0)], &TRACE_COEFFS)))
    }

    /// Normalized average of diabatic σz, evaluated at the evolved phase
    /// point of every element.
    pub fn population_difference(&self, t: f64) -> Result<Estimate> {
        let k = self.index_of(t)?;
        self.ratio_at(k, POP)
    }

    /// Normalized average of P² over the diagonal elements.
    pub fn mean_momentum_squared(&self, t: f64) -> Result<Estimate> {
        let k = self.index_of(t)?;
        self.ratio_at(k, P2)
    }

    fn ratio_at(&self, k: usize, numerator: usize) -> Result<Estimate> {
        let tr = self.checked_trace(k)?;
        let m = &self.moments[k];
        Ok(Estimate {
            value: m.mean[numerator] / tr,
            stderr: m.ratio_stderr(&[(numerator, 1.0)], &TRACE_COEFFS),
        })
    }

    /// Full time series of one observable.
    pub fn series(&self, observable: Observable) -> Result<ObservableSeries> {
        if self.samples == 0 {
            return Err(Error::IncompleteEnsemble("no samples".into()));
        }
        let times = self.times.clone();
        let label = observable.label();
        let mut mean = Vec::with_capacity(times.len());
        let mut err = Vec::with_capacity(times.len());
        if observable == Observable::Coherence {
            let mut z = Vec::with_capacity(times.len());
            for k in 0..times.len() {
                let (c, e) = self.coherence_at(k)?;
                z.push(c);
                err.push(e);
            }
            return Ok(ObservableSeries::complex(label, times, z, err));
        }
        for k in 0..times.len() {
            let est = match observable {
                Observable::Trace => self.trace_at(k),
                Observable::Xi11 | Observable::Xi22 => {
                    let (m, e) = self.unnormalized_at(k);
                    let s = if observable == Observable::Xi11 { 0 } else { 1 };
                    Estimate {
                        value: m.m[s][s].re,
                        stderr: e[s][s],
                    }
                }
                Observable::Chi11 | Observable::Chi22 => {
                    let (m, e) = self.normalized_at(k)?;
                    let s = if observable == Observable::Chi11 { 0 } else { 1 };
                    Estimate {
                        value: m.m[s][s].re,
                        stderr: e[s][s],
                    }
                }
                Observable::PopulationDifference => self.ratio_at(k, POP)?,
                Observable::MomentumSquared => self.ratio_at(k, P2)?,
                Observable::Coherence => unreachable!(),
            };
            mean.push(est.value);
            err.push(est.stderr);
        }
        Ok(ObservableSeries::real(label, times, mean, err))
    }

    /// Residual of the trace law `d Tr Ξ/dt + 2 Tr(Γ Ξ)` on the interior of
    /// the recording grid, using central differences.
    pub fn trace_law_residual(&self) -> TraceLawResidual {
        let n = self.times.len();
        if n < 3 || self.samples == 0 {
            return TraceLawResidual {
                series: ObservableSeries::real("trace_law_residual", vec![], vec![], vec![]),
                discretization: vec![],
                roundoff: vec![],
            };
        }
        let trace: Vec<f64> = (0..n).map(|k| self.trace_at(k).value).collect();
        let scale = trace.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mut times = Vec::with_capacity(n - 2);
        let mut mean = Vec::with_capacity(n - 2);
        let mut err = Vec::with_capacity(n - 2);
        let mut disc = Vec::with_capacity(n - 2);
        let mut round = Vec::with_capacity(n - 2);
        for k in 1..n - 1 {
            let r = &self.residual[k - 1];
            times.push(self.times[k]);
            mean.push(r.mean[0]);
            err.push(r.stderr_of(&[(0, 1.0)]));
            let h = 0.5 * (self.times[k + 1] - self.times[k - 1]);
            disc.push(h * h / 6.0 * third_derivative(&trace, &self.times, k).abs());
            round.push(8.0 * f64::EPSILON * scale / h);
        }
        TraceLawResidual {
            series: ObservableSeries::real("trace_law_residual", times, mean, err),
            discretization: disc,
            roundoff: round,
        }
    }
}

/// Finite-difference estimate of f''' near index `k`, on a locally
/// uniform grid. Falls back to the nearest fully interior stencil.
fn third_derivative(f: &[f64], t: &[f64], k: usize) -> f64 {
    let n = f.len();
    if n < 5 {
        return 0.0;
    }
    let c = k.clamp(2, n - 3);
    let h = 0.5 * (t[c + 1] - t[c - 1]);
    (f[c + 2] - 2.0 * f[c + 1] + 2.0 * f[c - 1] - f[c - 2]) / (2.0 * h * h * h)
}

/// Trace-law residual with the error budget it should be compared against.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceLawResidual {
    /// Mean residual and its statistical error.
    pub series: ObservableSeries,
    /// Truncation error of the central difference, `h²/6 · |Tr'''|`.
    pub discretization: Vec<f64>,
    /// Floating-point floor of the difference quotient.
    pub roundoff: Vec<f64>,
}

impl TraceLawResidual {
    /// Combined error budget at grid index `i`.
    pub fn combined_error(&self, i: usize) -> f64 {
        self.series.stderr[i] + self.discretization[i] + self.roundoff[i]
    }

    /// Largest `|r| / combined_error` over the grid (0 when exact).
    pub fn worst_ratio(&self) -> f64 {
        let r = self.series.real_means();
        (0..r.len())
            .map(|i| {
                let e = self.combined_error(i);
                if r[i] == 0.0 {
                    0.0
                } else if e == 0.0 {
                    f64::INFINITY
                } else {
                    r[i].abs() / e
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

keyword_enum!(Window,
    Window::Rectangular => "rectangular",
    Window::Hann => "hann",
);

/// Single-sided amplitude spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Angular frequencies `2πk / (N Δt)`.
    pub omega: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl Spectrum {
    /// Largest magnitude with `lo <= ω < hi`, or 0 if the band is empty.
    pub fn band_peak(&self, lo: f64, hi: f64) -> f64 {
        self.omega
            .iter()
            .zip(&self.magnitude)
            .filter(|(&w, _)| w >= lo && w < hi)
            .map(|(_, &m)| m)
            .fold(0.0, f64::max)
    }

    /// Frequency of the largest magnitude with `lo <= ω < hi`.
    pub fn band_argmax(&self, lo: f64, hi: f64) -> Option<f64> {
        self.omega
            .iter()
            .zip(&self.magnitude)
            .filter(|(&w, _)| w >= lo && w < hi)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&w, _)| w)
    }
}

/// Amplitude spectrum of the real part of `series` for `t >= t_min`, after
/// removing the mean over that window.
pub fn fourier_spectrum(series: &ObservableSeries, t_min: f64, window: Window) -> Result<Spectrum> {
    let values = series.real_means();
    let picked: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= t_min - 1e-9 * t_min.abs().max(1.0))
        .map(|(&t, v)| (t, v))
        .collect();
    let n = picked.len();
    if n < MIN_SPECTRUM_POINTS {
        return Err(Error::InsufficientData {
            found: n,
            needed: MIN_SPECTRUM_POINTS,
        });
    }
    let dt = (picked[n - 1].0 - picked[0].0) / (n - 1) as f64;
    if !(dt > 0.0) || picked.windows(2).any(|w| ((w[1].0 - w[0].0) - dt).abs() > 1e-6 * dt) {
        return Err(Error::NonUniformGrid);
    }
    let mean = picked.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let mut buffer: Vec<Complex64> = picked
        .iter()
        .enumerate()
        .map(|(i, &(_, v))| {
            let w = match window {
                Window::Rectangular => 1.0,
                Window::Hann => {
                    let x = std::f64::consts::PI * i as f64 / (n - 1) as f64;
                    x.sin().powi(2)
                }
            };
            Complex64::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let half = n / 2;
    let norm = 2.0 / n as f64;
    let omega = (0..=half)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / (n as f64 * dt))
        .collect();
    let magnitude = (0..=half)
        .map(|k| {
            let edge = k == 0 || (n % 2 == 0 && k == half);
            buffer[k].norm() * if edge { 0.5 * norm } else { norm }
        })
        .collect();
    Ok(Spectrum { omega, magnitude })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ExtendedPoint;
    use crate::sampling::{draw_initial_sample, SamplingOptions};
    use approx::assert_abs_diff_eq;

    fn small_params(nhc: bool, decay: bool) -> ModelParams {
        ModelParams {
            n_step: 400,
            n_mcs: 64,
            nhc_enabled: nhc,
            decay_enabled: decay,
            ..ModelParams::default()
        }
    }

    fn build(params: ModelParams, stride: usize, options: SamplingOptions) -> Ensemble {
        let mut ens = Ensemble::new(params, stride);
        for i in 0..params.n_mcs {
            let s = draw_initial_sample(&params, &options, i);
            ens.push(&SampleRecord::propagate(&s, &params, stride).unwrap()).unwrap();
        }
        ens
    }

    #[test]
    fn welford_matches_two_pass() {
        let data = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.25], [7.0, 3.0]];
        let mut m = Moments::<2>::new();
        for d in &data {
            m.push(d);
        }
        let n = data.len() as f64;
        let mean0 = data.iter().map(|d| d[0]).sum::<f64>() / n;
        let mean1 = data.iter().map(|d| d[1]).sum::<f64>() / n;
        let cov = data.iter().map(|d| (d[0] - mean0) * (d[1] - mean1)).sum::<f64>() / (n - 1.0);
        assert_abs_diff_eq!(m.mean[0], mean0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.mean_covariance(0, 1), cov / n, epsilon = 1e-14);
    }

    #[test]
    fn initial_trace_is_one() {
        let p = small_params(true, true);
        let ens = build(p, 10, SamplingOptions::default());
        let tr = ens.trace_omega(0.0).unwrap();
        assert_abs_diff_eq!(tr.value, 1.0, epsilon = 1e-12);
        let (m, _) = ens.estimate_unnormalized(0.0).unwrap();
        assert!(m.is_hermitian(0.0));
    }

    #[test]
    fn normalized_trace_is_exactly_one() {
        let p = small_params(true, true);
        let ens = build(
            p,
            10,
            SamplingOptions {
                initial_state: crate::sampling::InitialState::EqualSuperposition,
                ..Default::default()
            },
        );
        for &t in ens.times() {
            let (m, _) = ens.estimate_normalized(t).unwrap();
            assert_eq!(m.trace().re, 1.0);
            assert_eq!(m.m[1][0], m.m[0][1].conj());
            let (c, _) = ens.coherence(t).unwrap();
            assert_eq!(c, m.m[0][1]);
        }
    }

    #[test]
    fn uncoupled_decay_follows_closed_form() {
        let p = ModelParams {
            coupling: 0.0,
            ..small_params(false, true)
        };
        let opts = SamplingOptions {
            initial_state: crate::sampling::InitialState::EqualSuperposition,
            ..Default::default()
        };
        let ens = build(p, 20, opts);
        for &t in ens.times() {
            let (xi, _) = ens.estimate_unnormalized(t).unwrap();
            assert_abs_diff_eq!(xi.m[0][0].re, 0.5 * (-p.gamma * t).exp(), epsilon = 1e-12);
            assert_abs_diff_eq!(xi.m[1][1].re, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn unitary_uncoupled_populations_are_constant() {
        let p = ModelParams {
            coupling: 0.0,
            gamma: 0.0,
            ..small_params(false, false)
        };
        let ens = build(p, 20, SamplingOptions::default());
        let (xi0, _) = ens.estimate_unnormalized(0.0).unwrap();
        for &t in ens.times() {
            let (xi, _) = ens.estimate_unnormalized(t).unwrap();
            assert_eq!(xi.m[0][0], xi0.m[0][0]);
            assert_eq!(xi.m[1][1], xi0.m[1][1]);
        }
    }

    #[test]
    fn trace_law_initial_slope() {
        // dTr/dt at t = 0 with Ξ11(0) = 1/2 is -γ/2
        let p = ModelParams {
            coupling: 0.0,
            ..small_params(false, true)
        };
        let opts = SamplingOptions {
            initial_state: crate::sampling::InitialState::EqualSuperposition,
            ..Default::default()
        };
        let ens = build(p, 2, opts);
        let tr = ens.series(Observable::Trace).unwrap().real_means();
        let t = ens.times();
        let slope = (tr[1] - tr[0]) / (t[1] - t[0]);
        assert_abs_diff_eq!(slope, -0.05, epsilon = 1e-4);
        let res = ens.trace_law_residual();
        assert!(res.worst_ratio() <= 3.0, "{}", res.worst_ratio());
    }

    #[test]
    fn trace_law_is_zero_without_decay() {
        let ens = build(small_params(true, false), 5, SamplingOptions::default());
        let res = ens.trace_law_residual();
        assert_eq!(res.series.len(), ens.times().len() - 2);
        assert!(res.series.real_means().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn incomplete_and_unknown_times_are_errors() {
        let p = small_params(false, false);
        let mut ens = Ensemble::new(p, 10);
        assert!(matches!(ens.trace_omega(0.0), Err(Error::IncompleteEnsemble(_))));
        let s = draw_initial_sample(&p, &SamplingOptions::default(), 0);
        let mut rec = SampleRecord::propagate(&s, &p, 10).unwrap();
        ens.push(&rec).unwrap();
        assert!(matches!(ens.trace_omega(0.0123), Err(Error::IncompleteEnsemble(_))));
        rec.lower.pop();
        assert!(matches!(ens.push(&rec), Err(Error::IncompleteEnsemble(_))));
    }

    #[test]
    fn depleted_ensemble_reports_vanishing_trace() {
        let p = ModelParams {
            coupling: 0.0,
            gamma: 1e4,
            n_step: 200,
            ..small_params(false, true)
        };
        let mut ens = Ensemble::new(p, 100);
        let mut s = draw_initial_sample(&p, &SamplingOptions::default(), 0);
        s.point = ExtendedPoint::new(0.0, 0.0);
        s.omega0 = QuantumMatrix2::from_fn(|a, b| Complex64::new(if a == 0 && b == 0 { 1.0 } else { 0.0 }, 0.0));
        ens.push(&SampleRecord::propagate(&s, &p, 100).unwrap()).unwrap();
        assert!(matches!(ens.estimate_normalized(1.0), Err(Error::VanishingTrace(_))));
        assert!(matches!(ens.population_difference(1.0), Err(Error::VanishingTrace(_))));
    }

    #[test]
    fn ground_state_population_difference_at_cold_start() {
        let p = ModelParams {
            beta: 1e6,
            coupling: 1e-9,
            n_step: 10,
            ..small_params(false, false)
        };
        let ens = build(p, 10, SamplingOptions::default());
        let pd = ens.population_difference(0.0).unwrap();
        assert_abs_diff_eq!(pd.value, 1.0, epsilon = 1e-12);
    }

    fn uniform(label: &str, n: usize, dt: f64, f: impl Fn(f64) -> f64) -> ObservableSeries {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let mean = times.iter().map(|&t| f(t)).collect();
        ObservableSeries::real(label, times, mean, vec![0.0; n])
    }

    #[test]
    fn constant_series_has_flat_spectrum() {
        let s = uniform("c", 64, 0.1, |_| 3.5);
        let spectrum = fourier_spectrum(&s, 0.0, Window::Rectangular).unwrap();
        assert!(spectrum.magnitude.iter().all(|&m| m.abs() < 1e-12));
    }

    #[test]
    fn cosine_has_single_peak() {
        let n = 200;
        let dt = 0.05;
        let bin = 7;
        let w0 = 2.0 * std::f64::consts::PI * bin as f64 / (n as f64 * dt);
        let s = uniform("cos", n, dt, |t| 0.3 * (w0 * t).cos() + 1.0);
        let spectrum = fourier_spectrum(&s, 0.0, Window::Rectangular).unwrap();
        let peak = spectrum.band_argmax(0.0, f64::INFINITY).unwrap();
        assert_abs_diff_eq!(peak, w0, epsilon = 1e-12);
        assert_abs_diff_eq!(spectrum.magnitude[bin], 0.3, epsilon = 1e-12);
        for (k, &m) in spectrum.magnitude.iter().enumerate() {
            if k != bin {
                assert!(m < 1e-12);
            }
        }
        let hann = fourier_spectrum(&s, 0.0, Window::Hann).unwrap();
        assert_abs_diff_eq!(hann.band_argmax(0.0, f64::INFINITY).unwrap(), w0, epsilon = 1e-12);
    }

    #[test]
    fn spectrum_needs_enough_points() {
        let s = uniform("short", 30, 1.0, |t| t);
        assert!(matches!(
            fourier_spectrum(&s, 20.0, Window::Rectangular),
            Err(Error::InsufficientData { found: 10, .. })
        ));
        let mut s = uniform("gap", 40, 1.0, |t| t);
        s.times[5] += 0.5;
        assert!(matches!(fourier_spectrum(&s, 0.0, Window::Rectangular), Err(Error::NonUniformGrid)));
    }
}
