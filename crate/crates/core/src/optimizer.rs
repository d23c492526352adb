//! Downhill simplex (Nelder–Mead) maximization with restarts.

use crate::error::{Error, Result};
use crate::likelihood::{param_len, ParamVector};
use crate::scalar::Scalar;

/// Relative width below which a reflected value counts as equal to a vertex value.
pub const TIE_TOL: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexOptions<T> {
    /// Displacement of the initial vertices along each coordinate.
    pub initial_step: T,
    pub reflection: T,
    pub expansion: T,
    pub contraction: T,
    pub shrink: T,
    /// Objective evaluations allowed over all restarts.
    pub max_evals: usize,
    /// Stop when `|f_best − f_worst| / (|f_best| + 1e-30) ≤ tol_f`.
    pub tol_f: T,
    /// Additional runs re-seeded at the incumbent, each with half the previous step.
    pub restarts: usize,
}

impl<T: Scalar> Default for SimplexOptions<T> {
    fn default() -> Self {
        Self {
            initial_step: T::lit(0.1),
            reflection: T::one(),
            expansion: T::lit(2.0),
            contraction: T::lit(0.5),
            shrink: T::lit(0.5),
            max_evals: 200_000,
            tol_f: T::lit(1e-8),
            restarts: 3,
        }
    }
}

impl<T: Scalar> SimplexOptions<T> {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "cannot optimize over zero parameters".into(),
            ));
        }
        let coeffs = [
            ("initial_step", self.initial_step),
            ("reflection", self.reflection),
            ("expansion", self.expansion),
            ("contraction", self.contraction),
            ("shrink", self.shrink),
        ];
        for (name, value) in coeffs {
            if !(value > T::zero()) || !value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "simplex {name} must be positive, got {value}"
                )));
            }
        }
        if !(self.tol_f >= T::zero()) {
            return Err(Error::InvalidParameter("tol_f must be nonnegative".into()));
        }
        if self.max_evals <= dim + 1 {
            return Err(Error::InvalidParameter(format!(
                "max_evals must exceed dim + 1 = {}",
                dim + 1
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OptimReport<T> {
    pub best_params: ParamVector<T>,
    pub best_value: T,
    pub evaluations: usize,
    pub converged: bool,
    /// Incumbent value at the end of the initial run and of each restart.
    pub restart_values: Vec<T>,
    /// Incumbent value after every simplex iteration.
    pub trace: Vec<T>,
}

/// Start of the likelihood search: `C = 1/√M`, i.e. `S = 1/M`, the
/// completely mixing trace-preserving channel.
pub fn initial_point<T: Scalar>(dim_in: usize, dim_out: usize) -> ParamVector<T> {
    let d = dim_in * dim_out;
    let mut v = vec![T::zero(); param_len(dim_in, dim_out)];
    let diag = T::one() / T::from_usize(dim_out).expect("dimension fits").sqrt();
    v[..d].fill(diag);
    ParamVector::new(v).expect("finite")
}

struct Simplex<T> {
    points: Vec<Vec<T>>,
    values: Vec<T>,
}

impl<T: Scalar> Simplex<T> {
    /// Vertex indices from best to worst; ties keep index order.
    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| {
            self.values[b]
                .partial_cmp(&self.values[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx
    }
}

fn sanitize<T: Scalar>(v: T) -> T {
    if v.is_nan() {
        T::neg_infinity()
    } else {
        v
    }
}

fn ties<T: Scalar>(a: T, b: T) -> bool {
    let scale = T::one().max(a.abs()).max(b.abs());
    (a - b).abs() <= T::lit(TIE_TOL) * scale
}

/// Maximizes `objective` from `x0`.
///
/// Each run is standard Nelder–Mead. After a run stops (converged or
/// not), and while budget remains, a new simplex is built around the
/// incumbent with half the previous step. A reflected point whose value ties
/// the second-worst vertex is accepted.
pub fn maximize<T: Scalar, F: FnMut(&[T]) -> T>(
    mut objective: F,
    x0: &[T],
    opts: &SimplexOptions<T>,
) -> Result<OptimReport<T>> {
    let dim = x0.len();
    opts.validate(dim)?;
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::ObjectiveNotFinite);
    }
    let f0 = objective(x0);
    if !f0.is_finite() {
        return Err(Error::ObjectiveNotFinite);
    }
    let mut evals = 1usize;
    let mut best_x = x0.to_vec();
    let mut best_f = f0;
    let mut step = opts.initial_step;
    let mut converged = false;
    let mut restart_values = Vec::with_capacity(opts.restarts + 1);
    let mut trace = Vec::new();

    for _run in 0..=opts.restarts {
        if evals + dim + 1 > opts.max_evals {
            break;
        }
        let mut simplex = Simplex {
            points: vec![best_x.clone()],
            values: vec![best_f],
        };
        for i in 0..dim {
            let mut p = best_x.clone();
            p[i] += step;
            let f = sanitize(objective(&p));
            evals += 1;
            simplex.points.push(p);
            simplex.values.push(f);
        }
        converged = false;
        let mut centroid = vec![T::zero(); dim];
        loop {
            let order = simplex.order();
            let (ib, iw, isw) = (order[0], order[dim], order[dim.saturating_sub(1)]);
            let (fb, fw, fsw) = (simplex.values[ib], simplex.values[iw], simplex.values[isw]);
            if fb > best_f {
                best_f = fb;
                best_x.clone_from(&simplex.points[ib]);
            }
            trace.push(best_f);
            let spread = (fb - fw).abs() / (fb.abs() + T::lit(1e-30));
            if spread <= opts.tol_f {
                converged = true;
                break;
            }
            if evals >= opts.max_evals {
                break;
            }

            centroid.fill(T::zero());
            for &i in &order[..dim] {
                for (c, x) in centroid.iter_mut().zip(&simplex.points[i]) {
                    *c += *x;
                }
            }
            let inv = T::one() / T::from_usize(dim).expect("dim fits");
            centroid.iter_mut().for_each(|c| *c *= inv);
            let worst = simplex.points[iw].clone();
            let along = |t: T| -> Vec<T> {
                centroid
                    .iter()
                    .zip(&worst)
                    .map(|(&c, &w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(opts.reflection);
            let fr = sanitize(objective(&xr));
            evals += 1;

            if fr > fb && !ties(fr, fb) {
                let xe = along(opts.reflection * opts.expansion);
                let fe = sanitize(objective(&xe));
                evals += 1;
                if fe > fr {
                    simplex.points[iw] = xe;
                    simplex.values[iw] = fe;
                } else {
                    simplex.points[iw] = xr;
                    simplex.values[iw] = fr;
                }
                continue;
            }
            if fr >= fsw || ties(fr, fsw) {
                simplex.points[iw] = xr;
                simplex.values[iw] = fr;
                continue;
            }
            let (xc, accept) = if fr > fw {
                let xc = along(opts.reflection * opts.contraction);
                let fc = sanitize(objective(&xc));
                evals += 1;
                (xc, if fc >= fr { Some(fc) } else { None })
            } else {
                let xc = along(-opts.contraction);
                let fc = sanitize(objective(&xc));
                evals += 1;
                (xc, if fc > fw { Some(fc) } else { None })
            };
            if let Some(fc) = accept {
                simplex.points[iw] = xc;
                simplex.values[iw] = fc;
                continue;
            }
            let anchor = simplex.points[ib].clone();
            for &i in &order[1..] {
                let p: Vec<T> = anchor
                    .iter()
                    .zip(&simplex.points[i])
                    .map(|(&a, &x)| a + opts.shrink * (x - a))
                    .collect();
                simplex.values[i] = sanitize(objective(&p));
                simplex.points[i] = p;
                evals += 1;
            }
        }
        restart_values.push(best_f);
        step *= T::lit(0.5);
    }

    Ok(OptimReport {
        best_params: ParamVector::new(best_x)?,
        best_value: best_f,
        evaluations: evals,
        converged,
        restart_values,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{choi_from_kraus, identity_channel, is_trace_preserving, ChoiMatrix};
    use crate::experiment::{
        random_measurement, random_pure_state, seeded_rng, MeasurementRecord, Outcome,
        ProjectiveMeasurement,
    };
    use crate::likelihood::{params_to_cholesky, penalized_log_likelihood, LikelihoodContext};

    fn quadratic_target() -> Vec<f64> {
        (0..16).map(|i| 0.3 * (i as f64) - 2.0).collect()
    }

    #[test]
    fn concave_quadratic_in_16_dimensions() {
        let a = quadratic_target();
        let f = |x: &[f64]| -x.iter().zip(&a).map(|(x, a)| (x - a).powi(2)).sum::<f64>();
        let opts = SimplexOptions {
            max_evals: 20_000,
            tol_f: 1e-14,
            restarts: 6,
            initial_step: 1.0,
            ..Default::default()
        };
        let rep = maximize(f, &[0.0; 16], &opts).unwrap();
        assert!(rep.evaluations <= 20_000);
        let err = rep
            .best_params
            .as_slice()
            .iter()
            .zip(&a)
            .map(|(x, a)| (x - a).abs())
            .fold(0.0, f64::max);
        assert!(
            err <= 1e-4,
            "max coordinate error {err}, evals {}",
            rep.evaluations
        );
        assert!((rep.best_value - f(rep.best_params.as_slice())).abs() == 0.0);
    }

    #[test]
    fn best_value_is_monotone_and_not_below_start() {
        let f = |x: &[f64]| -(x[0] - 1.0).powi(2) - 10.0 * (x[1] + x[0] * x[0]).powi(2);
        let rep = maximize(f, &[-1.0, 2.0], &SimplexOptions::default()).unwrap();
        assert!(rep.best_value >= f(&[-1.0, 2.0]));
        assert!(rep.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(rep.restart_values.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(rep.best_value, f(rep.best_params.as_slice()));
    }

    #[test]
    fn deterministic_reports() {
        let f = |x: &[f64]| -x.iter().map(|v| (v - 0.5).powi(4) + v * v).sum::<f64>();
        let opts = SimplexOptions::default();
        let a = maximize(f, &[0.2; 6], &opts).unwrap();
        let b = maximize(f, &[0.2; 6], &opts).unwrap();
        assert_eq!(a.best_params, b.best_params);
        assert_eq!(a.best_value, b.best_value);
        assert_eq!(a.evaluations, b.evaluations);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn tie_rule() {
        assert!(ties(1.0, 1.0));
        assert!(ties(-3e4, -3e4 * (1.0 + 1e-16)));
        assert!(!ties(1.0, 1.0 + 1e-12));
    }

    #[test]
    fn plateau_objective_is_deterministic() {
        // piecewise-constant objective: reflected values tie vertex values often
        let f = |x: &[f64]| -x.iter().map(|v| (v * 4.0).round().abs()).sum::<f64>();
        let opts = SimplexOptions {
            max_evals: 400,
            ..Default::default()
        };
        let a = maximize(f, &[0.7, -0.4, 0.3], &opts).unwrap();
        let b = maximize(f, &[0.7, -0.4, 0.3], &opts).unwrap();
        assert_eq!(a.best_params, b.best_params);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.evaluations, b.evaluations);
        assert!(a.best_value >= f(&[0.7, -0.4, 0.3]));
    }

    #[test]
    fn rejects_non_finite_start_and_bad_options() {
        let f = |x: &[f64]| if x[0] == 0.0 { f64::NAN } else { 0.0 };
        assert!(matches!(
            maximize(f, &[0.0, 0.0], &SimplexOptions::default()),
            Err(Error::ObjectiveNotFinite)
        ));
        let opts = SimplexOptions::<f64> {
            max_evals: 3,
            ..Default::default()
        };
        assert!(maximize(|_| 0.0, &[0.0, 0.0], &opts).is_err());
        let opts = SimplexOptions::<f64> {
            shrink: 0.0,
            ..Default::default()
        };
        assert!(maximize(|_| 0.0, &[0.0], &opts).is_err());
    }

    #[test]
    fn nan_values_are_worst() {
        let f = |x: &[f64]| {
            if x[0] > 0.5 {
                f64::NAN
            } else {
                -(x[0] - 0.4).powi(2)
            }
        };
        let rep = maximize(f, &[0.0], &SimplexOptions::default()).unwrap();
        assert!((rep.best_params.as_slice()[0] - 0.4).abs() < 1e-3);
    }

    #[test]
    fn initial_point_is_completely_mixing() {
        let v = initial_point::<f64>(2, 2);
        let diag = 0.5f64.sqrt();
        assert!(v.as_slice()[..4].iter().all(|x| (x - diag).abs() < 1e-15));
        assert!(v.as_slice()[4..].iter().all(|&x| x == 0.0));
        let s = params_to_cholesky(v.as_slice(), 2, 2).unwrap().gram();
        let c = ChoiMatrix::new(s, 2, 2).unwrap();
        let (ok, dev) = is_trace_preserving(&c, 1e-12);
        assert!(ok && dev <= 1e-12);

        let mut r = seeded_rng(3);
        let recs: Vec<MeasurementRecord<f64>> = (0..50)
            .map(|_| MeasurementRecord {
                state: random_pure_state(&mut r, 2),
                measurement: random_measurement(&mut r),
                outcome: Outcome::Minus,
            })
            .collect();
        let ctx = LikelihoodContext::from_records(&recs).unwrap();
        let val = penalized_log_likelihood(v.as_slice(), &ctx).unwrap();
        assert!((val - (50.0 * 0.5f64.ln() - 50.0)).abs() < 1e-9);
    }

    #[test]
    fn recovers_identity_channel_from_aligned_data() {
        let id = choi_from_kraus(&identity_channel::<f64>(2));
        let mut r = seeded_rng(4);
        let recs: Vec<MeasurementRecord<f64>> = (0..5000)
            .map(|_| {
                let state = random_pure_state::<f64, _>(&mut r, 2);
                let measurement: ProjectiveMeasurement<f64> = random_measurement(&mut r);
                let outcome =
                    crate::experiment::sample_outcome(&mut r, &id, &state, &measurement).unwrap();
                MeasurementRecord {
                    state,
                    measurement,
                    outcome,
                }
            })
            .collect();
        let ctx = LikelihoodContext::from_records(&recs).unwrap();
        let x0 = initial_point::<f64>(2, 2);
        let rep = maximize(
            |v| penalized_log_likelihood(v, &ctx).unwrap(),
            x0.as_slice(),
            &SimplexOptions::default(),
        )
        .unwrap();
        let s = params_to_cholesky(rep.best_params.as_slice(), 2, 2)
            .unwrap()
            .gram();
        let psi = crate::channels::max_entangled::<f64>(2);
        let overlap = s.mul_vec(&psi).unwrap();
        let fid: f64 = psi
            .iter()
            .zip(&overlap)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            / 4.0;
        assert!(fid >= 0.99, "fidelity {fid}");
    }
}
