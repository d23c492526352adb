//! Records → maximum-likelihood Choi matrix, family-parameter extraction, and
//! the batch studies built on top.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{is_trace_preserving, max_entangled, paulis, ChoiMatrix};
use crate::error::{Error, Result};
use crate::experiment::{derive_seed, generate_records, seeded_rng, MeasurementRecord};
use crate::likelihood::{
    log_likelihood, params_to_cholesky, penalized_log_likelihood, penalized_log_likelihood_choi,
    LikelihoodContext, DEFAULT_FLOOR,
};
use crate::linalg::{cholesky_unchecked, ComplexMatrix};
use crate::optimizer::{initial_point, maximize, OptimReport, SimplexOptions};
use crate::scalar::Scalar;

/// Below this many records a reconstruction still runs but carries a warning.
pub const MIN_RECORDS: usize = 100;
pub const MIN_REPETITIONS: usize = 5;
/// Standard deviation of the seeded perturbation applied to the starting point.
pub const DEFAULT_JITTER: f64 = 0.05;
/// Width of the final golden-section bracket in `extract_damping_p`.
pub const DAMPING_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Every positive `S`, through the Cholesky parameters.
    Full,
    /// `S = Σ q_i² |σ_i⟩⟩⟨⟨σ_i|`, four parameters.
    Pauli,
    /// `S = λ|Ψ⟩⟨Ψ| + (1−λ) I/2` with `λ = 1 − (4/3) sin²θ`.
    #[serde(rename = "depol")]
    Depolarizing,
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Model::Full),
            "pauli" => Ok(Model::Pauli),
            "depol" => Ok(Model::Depolarizing),
            other => Err(Error::InvalidParameter(format!(
                "unknown model `{other}`; expected full, pauli or depol"
            ))),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Full => "full",
            Model::Pauli => "pauli",
            Model::Depolarizing => "depol",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructOptions<T> {
    pub model: Model,
    pub simplex: SimplexOptions<T>,
    /// Seeds the perturbation of the starting point.
    pub seed: u64,
    pub jitter: T,
    pub floor: T,
}

impl<T: Scalar> ReconstructOptions<T> {
    pub fn new(model: Model, seed: u64) -> Self {
        Self {
            model,
            simplex: SimplexOptions::default(),
            seed,
            jitter: T::lit(DEFAULT_JITTER),
            floor: T::lit(DEFAULT_FLOOR),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult<T> {
    pub model: Model,
    pub choi: ChoiMatrix<T>,
    pub log_likelihood: T,
    /// Value the optimizer maximized.
    pub penalized_log_likelihood: T,
    /// `‖Tr_K[S] − I‖_F`.
    pub tp_deviation: T,
    pub trace_s: T,
    pub optimizer: OptimReport<T>,
    pub seed: u64,
    pub k: usize,
    /// `(p0, p1, p2, p3)` for the Pauli model, `λ` for the depolarizing one.
    pub model_params: Vec<T>,
    pub warnings: Vec<String>,
}

fn ket_outer<T: Scalar>(v: &[Complex<T>], weight: T, out: &mut ComplexMatrix<T>) {
    for (i, a) in v.iter().enumerate() {
        for (j, b) in v.iter().enumerate() {
            out[(i, j)] += (*a * b.conj()).scale(weight);
        }
    }
}

/// `Σ p_i |σ_i⟩⟩⟨⟨σ_i|`.
pub fn pauli_choi<T: Scalar>(p: [T; 4]) -> ComplexMatrix<T> {
    let mut s = ComplexMatrix::zeros(4, 4);
    for (sigma, w) in paulis::<T>().iter().zip(p) {
        ket_outer(sigma.entries(), w, &mut s);
    }
    s
}

/// `λ|Ψ⟩⟨Ψ| + (1−λ) I/2`.
pub fn depolarizing_choi<T: Scalar>(lambda: T) -> ComplexMatrix<T> {
    let mut s = ComplexMatrix::identity(4).scale((T::one() - lambda) / T::lit(2.0));
    ket_outer(&max_entangled::<T>(2), lambda, &mut s);
    s
}

/// The amplitude-damping Choi matrix: `1, √p` on the `|00⟩,|11⟩` block
/// corners, `1−p` and `p` on the remaining diagonal.
pub fn damping_choi<T: Scalar>(p: T) -> ComplexMatrix<T> {
    let mut s = ComplexMatrix::zeros(4, 4);
    let r = p.max(T::zero()).sqrt();
    s[(0, 0)] = Complex::new(T::one(), T::zero());
    s[(0, 3)] = Complex::new(r, T::zero());
    s[(3, 0)] = Complex::new(r, T::zero());
    s[(1, 1)] = Complex::new(T::one() - p, T::zero());
    s[(3, 3)] = Complex::new(p, T::zero());
    s
}

fn depol_lambda<T: Scalar>(theta: T) -> T {
    let s = theta.sin();
    T::one() - T::lit(4.0 / 3.0) * s * s
}

fn check_qubit<T: Scalar>(c: &ChoiMatrix<T>) -> Result<()> {
    if c.dim_in() != 2 || c.dim_out() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected a qubit channel, got N={} M={}",
            c.dim_in(),
            c.dim_out()
        )));
    }
    Ok(())
}

fn nan_to_neg_inf<T: Scalar>(r: Result<T>) -> T {
    match r {
        Ok(v) if !v.is_nan() => v,
        _ => T::neg_infinity(),
    }
}

/// Maximizes the penalized likelihood of `records` under `opts.model`.
///
/// `S` is reported as found; it is not projected onto trace-preserving maps.
pub fn reconstruct<T: Scalar>(
    records: &[MeasurementRecord<T>],
    opts: &ReconstructOptions<T>,
) -> Result<ReconstructionResult<T>> {
    let ctx = LikelihoodContext::from_records(records)?.with_floor(opts.floor)?;
    let (n, m) = (ctx.dim_in(), ctx.dim_out());
    let mut warnings = Vec::new();
    if records.len() < MIN_RECORDS {
        warnings.push(format!(
            "only {} records; estimates below {MIN_RECORDS} records are unreliable",
            records.len()
        ));
    }
    let mut rng = seeded_rng(opts.seed);
    let mut jitter = |x: T| x + opts.jitter * T::sample_normal(&mut rng);

    let (choi, report, model_params) = match opts.model {
        Model::Full => {
            let x0: Vec<T> = initial_point::<T>(n, m)
                .into_vec()
                .into_iter()
                .map(&mut jitter)
                .collect();
            let report = maximize(
                |v| nan_to_neg_inf(penalized_log_likelihood(v, &ctx)),
                &x0,
                &opts.simplex,
            )?;
            let s = params_to_cholesky(report.best_params.as_slice(), n, m)?.gram();
            (s, report, Vec::new())
        }
        Model::Pauli => {
            let x0: Vec<T> = (0..4).map(|_| jitter(T::lit(0.5))).collect();
            let objective = |q: &[T]| {
                let s = pauli_choi([q[0] * q[0], q[1] * q[1], q[2] * q[2], q[3] * q[3]]);
                penalized_log_likelihood_choi(&s, &ctx)
            };
            let report = maximize(|q| nan_to_neg_inf(Ok(objective(q))), &x0, &opts.simplex)?;
            let p: Vec<T> = report
                .best_params
                .as_slice()
                .iter()
                .map(|q| *q * *q)
                .collect();
            (pauli_choi([p[0], p[1], p[2], p[3]]), report, p)
        }
        Model::Depolarizing => {
            let x0 = [jitter(T::lit(std::f64::consts::FRAC_PI_3))];
            let report = maximize(
                |t| {
                    nan_to_neg_inf(Ok(penalized_log_likelihood_choi(
                        &depolarizing_choi(depol_lambda(t[0])),
                        &ctx,
                    )))
                },
                &x0,
                &opts.simplex,
            )?;
            let lambda = depol_lambda(report.best_params.as_slice()[0]);
            (depolarizing_choi(lambda), report, vec![lambda])
        }
    };
    if !report.converged {
        warnings.push(format!(
            "optimizer stopped after {} evaluations without meeting tol_f",
            report.evaluations
        ));
    }
    let log_likelihood = match opts.model {
        Model::Full => log_likelihood(report.best_params.as_slice(), &ctx)?,
        _ => crate::likelihood::log_likelihood_factor(&cholesky_unchecked(&choi), &ctx),
    };
    let choi = ChoiMatrix::from_psd_unchecked(choi, n, m);
    let (_, tp_deviation) = is_trace_preserving(&choi, T::zero());
    Ok(ReconstructionResult {
        model: opts.model,
        trace_s: choi.trace(),
        choi,
        log_likelihood,
        penalized_log_likelihood: report.best_value,
        tp_deviation,
        optimizer: report,
        seed: opts.seed,
        k: records.len(),
        model_params,
        warnings,
    })
}

/// Serialized form of a [`ReconstructionResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub model: Model,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub dim_in: usize,
    pub dim_out: usize,
    pub choi: ComplexMatrix<f64>,
    pub log_likelihood: f64,
    pub penalized_log_likelihood: f64,
    pub tp_deviation: f64,
    #[serde(rename = "trace_S")]
    pub trace_s: f64,
    pub model_params: Vec<f64>,
    pub converged: bool,
    pub evaluations: usize,
    pub restart_values: Vec<f64>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> ReconstructionResult<T> {
    pub fn to_file(&self) -> ResultFile {
        ResultFile {
            model: self.model,
            k: self.k,
            seed: self.seed,
            dim_in: self.choi.dim_in(),
            dim_out: self.choi.dim_out(),
            choi: {
                let m = self.choi.matrix();
                ComplexMatrix::from_fn(m.rows(), m.cols(), |i, j| {
                    Complex::new(m[(i, j)].re.as_f64(), m[(i, j)].im.as_f64())
                })
            },
            log_likelihood: self.log_likelihood.as_f64(),
            penalized_log_likelihood: self.penalized_log_likelihood.as_f64(),
            tp_deviation: self.tp_deviation.as_f64(),
            trace_s: self.trace_s.as_f64(),
            model_params: self.model_params.iter().map(|x| x.as_f64()).collect(),
            converged: self.optimizer.converged,
            evaluations: self.optimizer.evaluations,
            restart_values: self
                .optimizer
                .restart_values
                .iter()
                .map(|x| x.as_f64())
                .collect(),
            warnings: self.warnings.clone(),
        }
    }
}

impl ResultFile {
    /// Rebuilds the Choi matrix, checking positivity and the stored TP deviation.
    pub fn choi(&self) -> Result<ChoiMatrix<f64>> {
        let c = ChoiMatrix::new(self.choi.clone(), self.dim_in, self.dim_out)?;
        let (_, dev) = is_trace_preserving(&c, 0.0);
        if (dev - self.tp_deviation).abs() > 1e-9 {
            return Err(Error::Format(format!(
                "stored tp_deviation {} does not match recomputed {dev}",
                self.tp_deviation
            )));
        }
        Ok(c)
    }
}

/// `(p0, p1, p2, p3)` read off the entries a Pauli channel populates.
pub fn extract_pauli_probs<T: Scalar>(c: &ChoiMatrix<T>) -> Result<[T; 4]> {
    check_qubit(c)?;
    let s = c.matrix();
    let half = T::lit(0.5);
    let (s00, s03, s11, s12) = (s[(0, 0)].re, s[(0, 3)].re, s[(1, 1)].re, s[(1, 2)].re);
    Ok([
        (s00 + s03) * half,
        (s11 + s12) * half,
        (s11 - s12) * half,
        (s00 - s03) * half,
    ])
}

/// `(⟨Ψ|S|Ψ⟩ − 1)/3` with `|Ψ⟩ = |00⟩ + |11⟩`.
pub fn extract_depolarizing_lambda<T: Scalar>(c: &ChoiMatrix<T>) -> Result<T> {
    check_qubit(c)?;
    let psi = max_entangled::<T>(2);
    let s = c.matrix();
    let mut overlap = T::zero();
    for (i, a) in psi.iter().enumerate() {
        for (j, b) in psi.iter().enumerate() {
            overlap += (a.conj() * s[(i, j)] * b).re;
        }
    }
    Ok((overlap - T::one()) / T::lit(3.0))
}

/// Least-squares damping parameter: minimizes `‖S − S_a(p)‖_F²` over `[0, 1]`.
///
/// A coarse grid picks the bracket, golden-section search refines it.
pub fn extract_damping_p<T: Scalar>(c: &ChoiMatrix<T>) -> Result<T> {
    check_qubit(c)?;
    let f = |p: f64| -> f64 {
        let target = damping_choi(T::lit(p));
        c.matrix().distance(&target).as_f64().powi(2)
    };
    const GRID: usize = 200;
    let best = (0..=GRID)
        .map(|i| i as f64 / GRID as f64)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .expect("nonempty grid");
    let step = 1.0 / GRID as f64;
    let (mut lo, mut hi) = ((best - step).max(0.0), (best + step).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > DAMPING_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = (lo + hi) / 2.0;
    // The family minimum may sit on a boundary the bracket only approaches.
    let p = [0.0, mid, 1.0]
        .into_iter()
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .expect("nonempty");
    Ok(T::lit(p))
}

/// Settings shared by the Monte Carlo studies.
#[derive(Clone, Debug)]
pub struct StudyOptions {
    pub model: Model,
    pub simplex: SimplexOptions<f64>,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            model: Model::Full,
            simplex: SimplexOptions::default(),
            jobs: 1,
        }
    }
}

/// Seeds for repetition `rep` at sample size `k`: `(data, optimizer)`.
///
/// They depend only on `(seed, k, rep)`, so adding repetitions leaves the
/// earlier ones untouched.
pub fn repetition_seeds(seed: u64, k: usize, rep: usize) -> (u64, u64) {
    let cell = derive_seed(derive_seed(seed, k as u64), rep as u64);
    (derive_seed(cell, 0), derive_seed(cell, 1))
}

fn run_repetitions<F>(
    channel: &ChoiMatrix<f64>,
    cells: &[(usize, usize)],
    seed: u64,
    opts: &StudyOptions,
    extract: F,
) -> Result<Vec<f64>>
where
    F: Fn(&ReconstructionResult<f64>) -> Result<f64> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(k, rep)| {
                let (data_seed, opt_seed) = repetition_seeds(seed, k, rep);
                let records = generate_records(channel, k, data_seed)?;
                let mut ropts = ReconstructOptions::new(opts.model, opt_seed);
                ropts.simplex = opts.simplex.clone();
                extract(&reconstruct(&records, &ropts)?)
            })
            .collect()
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudyResult {
    pub sample_sizes: Vec<usize>,
    /// Sample standard deviation of the λ estimates at each size.
    pub errors: Vec<f64>,
    pub means: Vec<f64>,
    /// `estimates[i][r]`: repetition `r` at `sample_sizes[i]`.
    pub estimates: Vec<Vec<f64>>,
    pub fitted_slope: f64,
}

/// Spread of the depolarizing-parameter estimate versus sample size.
pub fn study_error_scaling(
    channel: &ChoiMatrix<f64>,
    sample_sizes: &[usize],
    repetitions: usize,
    seed: u64,
    opts: &StudyOptions,
) -> Result<ScalingStudyResult> {
    if repetitions < MIN_REPETITIONS {
        return Err(Error::TooFewRepetitions {
            min: MIN_REPETITIONS,
            got: repetitions,
        });
    }
    if sample_sizes.len() < 2 || sample_sizes.contains(&0) {
        return Err(Error::InvalidParameter(
            "need at least two positive sample sizes".into(),
        ));
    }
    let cells: Vec<(usize, usize)> = sample_sizes
        .iter()
        .flat_map(|&k| (0..repetitions).map(move |r| (k, r)))
        .collect();
    let flat = run_repetitions(channel, &cells, seed, opts, |r| {
        extract_depolarizing_lambda(&r.choi)
    })?;
    let estimates: Vec<Vec<f64>> = flat.chunks(repetitions).map(<[f64]>::to_vec).collect();
    let (means, errors): (Vec<f64>, Vec<f64>) = estimates.iter().map(|e| mean_std(e)).unzip();
    let sizes: Vec<f64> = sample_sizes.iter().map(|&k| k as f64).collect();
    Ok(ScalingStudyResult {
        sample_sizes: sample_sizes.to_vec(),
        fitted_slope: log_log_slope(&sizes, &errors),
        errors,
        means,
        estimates,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingRow {
    pub p_true: f64,
    pub p_mean: f64,
    pub p_std: f64,
}

/// Mean and spread of the damping estimate across a grid of true values.
pub fn study_damping_sweep(
    p_values: &[f64],
    k: usize,
    repetitions: usize,
    seed: u64,
    opts: &StudyOptions,
) -> Result<Vec<DampingRow>> {
    if repetitions < MIN_REPETITIONS {
        return Err(Error::TooFewRepetitions {
            min: MIN_REPETITIONS,
            got: repetitions,
        });
    }
    let mut rows = Vec::with_capacity(p_values.len());
    for (i, &p) in p_values.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "damping p={p} outside [0, 1]"
            )));
        }
        let channel = ChoiMatrix::new(damping_choi(p), 2, 2)?;
        let cells: Vec<(usize, usize)> = (0..repetitions).map(|r| (k, r)).collect();
        let grid_seed = derive_seed(seed, i as u64);
        let est = run_repetitions(&channel, &cells, grid_seed, opts, |r| {
            extract_damping_p(&r.choi)
        })?;
        let (p_mean, p_std) = mean_std(&est);
        rows.push(DampingRow {
            p_true: p,
            p_mean,
            p_std,
        });
    }
    Ok(rows)
}

pub fn write_scaling_csv<W: Write>(out: W, study: &ScalingStudyResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["K", "error", "mean"])?;
    for ((k, e), m) in study
        .sample_sizes
        .iter()
        .zip(&study.errors)
        .zip(&study.means)
    {
        w.write_record([k.to_string(), e.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_damping_csv<W: Write>(out: W, rows: &[DampingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{amplitude_damping, choi_from_kraus, depolarizing, pauli_channel};
    use crate::test_util::rng;
    use rand::Rng;

    fn choi(s: ComplexMatrix<f64>) -> ChoiMatrix<f64> {
        ChoiMatrix::new(s, 2, 2).unwrap()
    }

    fn pauli_true() -> ChoiMatrix<f64> {
        choi_from_kraus(&pauli_channel([0.3, 0.2, 0.4, 0.1]).unwrap())
    }

    // Brute-force least squares over the Pauli family: normal equations
    // built numerically from the four basis matrices.
    fn pauli_ls(s: &ComplexMatrix<f64>) -> [f64; 4] {
        let basis: Vec<ComplexMatrix<f64>> = (0..4)
            .map(|i| {
                let mut p = [0.0; 4];
                p[i] = 1.0;
                pauli_choi(p)
            })
            .collect();
        let mut g = [[0.0; 5]; 4];
        for i in 0..4 {
            for j in 0..4 {
                g[i][j] = basis[i].trace_product(&basis[j]).unwrap().re;
            }
            g[i][4] = basis[i].trace_product(s).unwrap().re;
        }
        for col in 0..4 {
            let piv = g[col][col];
            for r in 0..4 {
                if r != col {
                    let f = g[r][col] / piv;
                    for c in 0..5 {
                        g[r][c] -= f * g[col][c];
                    }
                }
            }
        }
        [0, 1, 2, 3].map(|i| g[i][4] / g[i][i])
    }

    // Closed-form one-parameter projection onto the depolarizing line.
    fn depol_ls(s: &ComplexMatrix<f64>) -> f64 {
        let base = depolarizing_choi(0.0);
        let dir = &depolarizing_choi(1.0) - &base;
        let r = s - &base;
        dir.trace_product(&r).unwrap().re / dir.trace_product(&dir).unwrap().re
    }

    // Dense scan in √p followed by ternary search.
    fn damping_ls(s: &ComplexMatrix<f64>) -> f64 {
        let f = |t: f64| s.distance(&damping_choi(t * t)).powi(2);
        let n = 100_000;
        let best = (0..=n)
            .map(|i| i as f64 / n as f64)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        let (mut lo, mut hi) = (
            (best - 1.0 / n as f64).max(0.0),
            (best + 1.0 / n as f64).min(1.0),
        );
        for _ in 0..200 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if f(a) <= f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let t = (lo + hi) / 2.0;
        t * t
    }

    #[test]
    fn pauli_choi_matches_kraus_route() {
        let p = [0.3, 0.2, 0.4, 0.1];
        assert!(pauli_choi(p).distance(pauli_true().matrix()) < 1e-15);
        let d = choi_from_kraus(&depolarizing(0.8).unwrap());
        assert!(depolarizing_choi(0.8).distance(d.matrix()) < 1e-15);
        for p in [0.0, 0.3, 1.0] {
            let a = choi_from_kraus(&amplitude_damping(p).unwrap());
            assert!(damping_choi(p).distance(a.matrix()) < 1e-15);
        }
    }

    #[test]
    fn pauli_extraction_examples() {
        let p = extract_pauli_probs(&pauli_true()).unwrap();
        for (a, b) in p.iter().zip([0.3, 0.2, 0.4, 0.1]) {
            assert!((a - b).abs() < 1e-15);
        }
        let p = extract_pauli_probs(&choi(depolarizing_choi(1.0))).unwrap();
        assert_eq!(p, [1.0, 0.0, 0.0, 0.0]);

        // A K=30000 estimate of the same channel; lower triangle by symmetry.
        let upper = [
            [
                (0.388964638, 0.0),
                (-0.011561621, -0.0160863415),
                (-0.00103390675, -0.0164688228),
                (0.188891975, -0.0241343938),
            ],
            [
                (0.0, 0.0),
                (0.617439461, 0.0),
                (-0.182118262, 0.000703314322),
                (-0.00825923682, 0.020653044),
            ],
            [
                (0.0, 0.0),
                (0.0, 0.0),
                (0.606198593, 0.0),
                (0.00111897098, 0.0150693168),
            ],
            [(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.389230293, 0.0)],
        ];
        let s = ComplexMatrix::from_fn(4, 4, |i, j| {
            let (re, im) = if i <= j { upper[i][j] } else { upper[j][i] };
            if i <= j {
                Complex::new(re, im)
            } else {
                Complex::new(re, -im)
            }
        });
        let p: [f64; 4] = extract_pauli_probs(&choi(s)).unwrap();
        let want = [0.2889283065, 0.2176606, 0.3997788615, 0.1000363315];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn pauli_extraction_inverts_builder_on_simplex() {
        let mut r = rng(31);
        for _ in 0..50 {
            let raw: [f64; 4] = [0; 4].map(|_| -r.random::<f64>().ln());
            let total: f64 = raw.iter().sum();
            let p = raw.map(|x| x / total);
            let c = choi_from_kraus(&pauli_channel(p).unwrap());
            let got: [f64; 4] = extract_pauli_probs(&c).unwrap();
            let ls = pauli_ls(c.matrix());
            for i in 0..4 {
                assert!((got[i] - p[i]).abs() < 1e-12);
                assert!((got[i] - ls[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn depolarizing_extraction() {
        let c = choi_from_kraus(&depolarizing(0.8f64).unwrap());
        assert!((extract_depolarizing_lambda(&c).unwrap() - 0.8).abs() < 1e-12);
        assert!(
            (extract_depolarizing_lambda(&choi(depolarizing_choi(1.0))).unwrap() - 1.0).abs()
                < 1e-15
        );
        let half_identity = ComplexMatrix::identity(4).scale(0.5);
        assert!(
            extract_depolarizing_lambda(&choi(half_identity))
                .unwrap()
                .abs()
                < 1e-15
        );
        for lambda in [-1.0 / 3.0, -0.1, 0.0, 0.37, 0.8, 1.0] {
            let c = choi(depolarizing_choi(lambda));
            let got = extract_depolarizing_lambda(&c).unwrap();
            assert!((got - depol_ls(c.matrix())).abs() < 1e-9);
        }
    }

    #[test]
    fn depolarizing_extraction_is_affine_in_s() {
        let mut r = rng(5);
        for _ in 0..20 {
            let lambda: f64 = r.random_range(-0.3..1.0);
            let c = choi(depolarizing_choi(lambda));
            let factor: f64 = r.random_range(0.1..3.0);
            let scaled = extract_depolarizing_lambda(&c.scaled(factor)).unwrap();
            let base = extract_depolarizing_lambda(&c).unwrap();
            assert!((3.0 * scaled + 1.0 - factor * (3.0 * base + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn damping_extraction() {
        for p in [0.0f64, 0.05, 0.25, 0.3, 0.5, 0.77, 1.0] {
            let c = choi_from_kraus(&amplitude_damping(p).unwrap());
            let got: f64 = extract_damping_p(&c).unwrap();
            assert!((got - p).abs() < 1e-9, "{got} vs {p}");
            assert!((got - damping_ls(c.matrix())).abs() < 1e-9);
        }
    }

    #[test]
    fn damping_extraction_off_family_agrees_with_brute_force() {
        let mut r = rng(12);
        for _ in 0..10 {
            let p = r.random_range(0.0..1.0);
            let noise =
                ComplexMatrix::from_fn(4, 4, |_, _| Complex::new(r.random_range(-0.02..0.02), 0.0));
            let s = &damping_choi(p) + &(&noise + &noise.adjoint()).scale(0.5);
            let s = &s + &ComplexMatrix::identity(4).scale(0.1);
            let c = choi(s);
            assert!((extract_damping_p(&c).unwrap() - damping_ls(c.matrix())).abs() < 1e-6);
        }
    }

    #[test]
    fn extraction_rejects_non_qubit() {
        let c = ChoiMatrix::new(ComplexMatrix::<f64>::identity(9), 3, 3).unwrap();
        assert!(extract_pauli_probs(&c).is_err());
        assert!(extract_depolarizing_lambda(&c).is_err());
        assert!(extract_damping_p(&c).is_err());
    }

    #[test]
    fn model_names() {
        for m in [Model::Full, Model::Pauli, Model::Depolarizing] {
            assert_eq!(m.to_string().parse::<Model>().unwrap(), m);
        }
        assert!("gauss".parse::<Model>().is_err());
    }

    #[test]
    fn reduced_models_recover_family_parameters() {
        let records = generate_records(&pauli_true(), 5000, 3).unwrap();
        let res = reconstruct(&records, &ReconstructOptions::new(Model::Pauli, 1)).unwrap();
        for (a, b) in res.model_params.iter().zip([0.3f64, 0.2, 0.4, 0.1]) {
            assert!((a - b).abs() < 0.05, "{:?}", res.model_params);
        }
        let d = choi_from_kraus(&depolarizing(0.8f64).unwrap());
        let records = generate_records(&d, 5000, 4).unwrap();
        let res = reconstruct(&records, &ReconstructOptions::new(Model::Depolarizing, 1)).unwrap();
        assert!((res.model_params[0] - 0.8).abs() < 0.05);
        assert!(res.tp_deviation < 1e-12);
        assert!(
            (extract_depolarizing_lambda(&res.choi).unwrap() - res.model_params[0]).abs() < 1e-12
        );
    }

    #[test]
    fn small_samples_warn() {
        let records = generate_records(&pauli_true(), 50, 3).unwrap();
        let res = reconstruct(&records, &ReconstructOptions::new(Model::Depolarizing, 1)).unwrap();
        assert!(res.warnings.iter().any(|w| w.contains("50 records")));
    }

    #[test]
    fn result_file_round_trip() {
        let records = generate_records(&pauli_true(), 500, 9).unwrap();
        let res = reconstruct(&records, &ReconstructOptions::new(Model::Pauli, 2)).unwrap();
        let file = res.to_file();
        let json = serde_json::to_string(&file).unwrap();
        let back: ResultFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.choi().unwrap().matrix(), res.choi.matrix());
        let mut tampered = back.clone();
        tampered.tp_deviation += 0.1;
        assert!(tampered.choi().is_err());
    }

    #[test]
    fn repetition_seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for k in [1875, 7500] {
            for rep in 0..20 {
                let (a, b) = repetition_seeds(7, k, rep);
                assert!(seen.insert(a) && seen.insert(b));
            }
        }
        assert_eq!(repetition_seeds(7, 1875, 3), repetition_seeds(7, 1875, 3));
    }

    #[test]
    fn studies_reject_few_repetitions() {
        let c = choi(depolarizing_choi(0.8));
        let opts = StudyOptions::default();
        assert!(matches!(
            study_error_scaling(&c, &[100, 200], 4, 1, &opts),
            Err(Error::TooFewRepetitions { min: 5, got: 4 })
        ));
        assert!(study_damping_sweep(&[0.5], 100, 2, 1, &opts).is_err());
    }

    #[test]
    fn log_log_slope_of_power_law() {
        let x = [10.0, 100.0, 1000.0];
        let y = x.map(|v: f64| 3.0 * v.powf(-0.5));
        assert!((log_log_slope(&x, &y) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_columns() {
        let study = ScalingStudyResult {
            sample_sizes: vec![10, 20],
            errors: vec![0.5, 0.25],
            means: vec![0.8, 0.81],
            estimates: vec![vec![], vec![]],
            fitted_slope: -1.0,
        };
        let mut buf = Vec::new();
        write_scaling_csv(&mut buf, &study).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "K,error,mean\n10,0.5,0.8\n20,0.25,0.81\n"
        );
        let mut buf = Vec::new();
        write_damping_csv(
            &mut buf,
            &[DampingRow {
                p_true: 0.5,
                p_mean: 0.49,
                p_std: 0.01,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "p_true,p_mean,p_std\n0.5,0.49,0.01\n"
        );
    }
}
