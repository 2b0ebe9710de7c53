//! Projected quasi-Newton minimisation over a box.
//!
//! Gradients are forward differences; the inverse Hessian estimate is a BFGS
//! update that is reset to the identity whenever it stops producing descent
//! directions. Steps follow the projected path `clip(x + t·d)` with Armijo
//! backtracking, so accepted iterates never increase the objective.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Stationarity threshold on the projected gradient. It cannot usefully
    /// go below the forward-difference truncation error, about `fd_step` times
    /// the curvature.
    pub gradient_tolerance: f64,
    pub fd_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iterations: 40,
            gradient_tolerance: 1e-3,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted iterate, starting with the initial point.
    pub history: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], fx: f64, hi: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        // Step inward when the forward probe would leave the box.
        let step = if x[i] + h > hi[i] { -h } else { h };
        probe[i] = x[i] + step;
        let fi = f(&probe);
        g[i] = if fi.is_finite() {
            (fi - fx) / step
        } else {
            f64::INFINITY * step.signum()
        };
        probe[i] = x[i];
    }
    g
}

/// Norm of the projected-gradient step `x - clip(x - g)`.
fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| (xi - (xi - gi).clamp(lo[i], hi[i])).abs())
        .fold(0.0, f64::max)
}

pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], lo: &[f64], hi: &[f64], settings: &SolverSettings) -> Minimum {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut fx = f(&x);
    let mut history = vec![fx];
    if !fx.is_finite() {
        return Minimum {
            x,
            value: fx,
            iterations: 0,
            converged: false,
            history,
        };
    }
    let mut g = gradient(&f, &x, fx, hi, settings.fd_step);
    let mut h_inv = identity(n);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        if !g.iter().all(|v| v.is_finite()) {
            break;
        }
        if projected_gradient_norm(&x, &g, lo, hi) < settings.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut accepted = None;
        for attempt in 0..2 {
            let mut d = if attempt == 0 { mat_vec(&h_inv, &g) } else { g.clone() };
            d.iter_mut().for_each(|v| *v = -*v);
            // Variables pinned at a bound with the direction pointing out
            // carry no information; freeze them.
            for i in 0..n {
                if (x[i] <= lo[i] && d[i] < 0.0) || (x[i] >= hi[i] && d[i] > 0.0) {
                    d[i] = 0.0;
                }
            }
            if dot(&d, &g) >= 0.0 {
                h_inv = identity(n);
                continue;
            }
            let mut t = 1.0;
            for _ in 0..MAX_BACKTRACKS {
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                project(&mut trial, lo, hi);
                let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let ft = f(&trial);
                if ft.is_finite() && ft <= fx + ARMIJO * dot(&g, &step) && ft < fx {
                    accepted = Some((trial, ft));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            h_inv = identity(n);
        }

        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = gradient(&f, &x_new, f_new, hi, settings.fd_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        bfgs_update(&mut h_inv, &s, &y);
        x = x_new;
        fx = f_new;
        g = g_new;
        history.push(fx);
    }

    Minimum {
        x,
        value: fx,
        iterations,
        converged,
        history,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let sy = dot(s, y);
    if !(sy > 1e-12) {
        return;
    }
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_quadratic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 4.0 * (x[1] + 0.2).powi(2) + x[0] * x[1];
        let m = minimize(f, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], &SolverSettings::default());
        assert!(m.converged || m.iterations == 40);
        let g0 = 2.0 * (m.x[0] - 0.3) + m.x[1];
        let g1 = 8.0 * (m.x[1] + 0.2) + m.x[0];
        assert!(g0.abs() < 1e-4 && g1.abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn active_bound() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] - 0.5).powi(2);
        let m = minimize(f, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], &SolverSettings::default());
        assert_eq!(m.x[0], 1.0);
        assert!((m.x[1] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn monotone_history() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 10.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[-0.8, 0.9], &[-2.0, -2.0], &[2.0, 2.0], &SolverSettings::default());
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.value < m.history[0]);
    }

    #[test]
    fn infinite_start_is_returned() {
        let m = minimize(|_| f64::INFINITY, &[0.0], &[-1.0], &[1.0], &SolverSettings::default());
        assert_eq!(m.iterations, 0);
        assert!(!m.converged);
    }
}
