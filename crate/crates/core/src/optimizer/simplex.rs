//! Nelder-Mead downhill simplex.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Stopping rules of one simplex search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexSettings {
    pub max_iterations: usize,
    /// Largest vertex distance (max-norm) from the best vertex.
    pub x_tolerance: f64,
    /// Largest objective spread across vertices.
    pub f_tolerance: f64,
}

impl Default for SimplexSettings {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            x_tolerance: 1e-6,
            f_tolerance: 1e-12,
        }
    }
}

/// Outcome of [`nelder_mead`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best objective after each iteration.
    pub history: Vec<f64>,
    /// True when the tolerances were met before the iteration limit.
    pub converged: bool,
}

/// Minimizes `objective` from `x0`.
///
/// The starting simplex is `x0` plus one vertex per coordinate displaced by
/// `steps[i]` (a zero step falls back to 5% of the coordinate, or 2.5e-4).
/// A non-finite objective value aborts with [`Error::NonFiniteObjective`].
pub fn nelder_mead<F>(
    mut objective: F,
    x0: &[f64],
    steps: &[f64],
    settings: &SimplexSettings,
) -> Result<SimplexOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty parameter vector".into()));
    }
    if steps.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: steps.len(),
        });
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("x0 has non-finite entries".into()));
    }
    if !(settings.x_tolerance > 0.0 && settings.f_tolerance > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }

    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| -> Result<f64> {
        evaluations += 1;
        let f = objective(x);
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::NonFiniteObjective {
                evaluation: evaluations,
            })
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = if steps[i] != 0.0 {
            steps[i]
        } else if x0[i] != 0.0 {
            0.05 * x0[i]
        } else {
            2.5e-4
        };
        v[i] += step;
        simplex.push(v);
    }
    let mut values = Vec::with_capacity(n + 1);
    for v in &simplex {
        values.push(eval(v)?);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut xr = vec![0.0; n];
    let mut xe = vec![0.0; n];
    let mut xc = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    loop {
        // Stable sort keeps earlier vertices first among ties.
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let f_spread = values[worst] - values[best];
        let x_spread = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_spread <= settings.f_tolerance && x_spread <= settings.x_tolerance {
            converged = true;
            break;
        }
        if iterations >= settings.max_iterations {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &k in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[k]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        affine(&mut xr, &centroid, &simplex[worst], -REFLECT);
        let fr = eval(&xr)?;
        if fr < values[best] {
            affine(&mut xe, &centroid, &simplex[worst], -REFLECT * EXPAND);
            let fe = eval(&xe)?;
            if fe < fr {
                simplex[worst].copy_from_slice(&xe);
                values[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&xr);
                values[worst] = fr;
            }
        } else if fr < values[second] {
            simplex[worst].copy_from_slice(&xr);
            values[worst] = fr;
        } else {
            let outside = fr < values[worst];
            if outside {
                affine(&mut xc, &centroid, &simplex[worst], -REFLECT * CONTRACT);
            } else {
                affine(&mut xc, &centroid, &simplex[worst], CONTRACT);
            }
            let fc = eval(&xc)?;
            let accept = if outside { fc <= fr } else { fc < values[worst] };
            if accept {
                simplex[worst].copy_from_slice(&xc);
                values[worst] = fc;
            } else {
                let anchor = simplex[best].clone();
                for &k in &order[1..] {
                    for (x, a) in simplex[k].iter_mut().zip(&anchor) {
                        *x = a + SHRINK * (*x - a);
                    }
                    values[k] = eval(&simplex[k])?;
                }
            }
        }
        let f_best = values.iter().copied().fold(f64::INFINITY, f64::min);
        history.push(f_best);
    }

    let best = order[0];
    Ok(SimplexOutcome {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        evaluations,
        history,
        converged,
    })
}

/// `out = c + t (w − c)`.
fn affine(out: &mut [f64], c: &[f64], w: &[f64], t: f64) {
    for ((o, ci), wi) in out.iter_mut().zip(c).zip(w) {
        *o = ci + t * (wi - ci);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>();
        let settings = SimplexSettings {
            max_iterations: 10_000,
            x_tolerance: 1e-9,
            f_tolerance: 1e-18,
        };
        let out = nelder_mead(f, &[0.0; 4], &[0.0; 4], &settings).unwrap();
        assert!(out.converged);
        for v in &out.x {
            assert!((v - 1.0).abs() < 1e-6, "{:?}", out.x);
        }
    }

    #[test]
    fn absolute_value_one_dimension() {
        let out = nelder_mead(
            |x: &[f64]| x[0].abs(),
            &[5.0],
            &[0.0],
            &SimplexSettings::default(),
        )
        .unwrap();
        assert!(out.f < 1e-8, "{}", out.f);
        assert!(out.f <= 5.0);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = nelder_mead(f, &[-1.2, 1.0], &[0.0, 0.0], &SimplexSettings::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn non_finite_objective_aborts() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { -x[0] };
        let err = nelder_mead(f, &[0.0], &[0.2], &SimplexSettings::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteObjective { .. }));
    }

    #[test]
    fn zero_iterations_returns_start() {
        let settings = SimplexSettings {
            max_iterations: 0,
            ..SimplexSettings::default()
        };
        let out = nelder_mead(|x: &[f64]| x[0] * x[0] + 3.0, &[2.0], &[1.0], &settings).unwrap();
        // The start vertex is the best of the initial simplex here.
        assert_eq!(out.x, vec![2.0]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn history_is_non_increasing() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(4);
        let out = nelder_mead(f, &[0.0, 0.0], &[1.0, 1.0], &SimplexSettings::default()).unwrap();
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }
}
