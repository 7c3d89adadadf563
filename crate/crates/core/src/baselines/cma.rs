//! CMA-ES with weighted recombination, cumulative step-size adaptation and
//! rank-one plus rank-μ covariance updates (positive weights only).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Clone)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub generation: u64,
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    mu_eff: f64,
    c_c: f64,
    c_sigma: f64,
    c_1: f64,
    c_mu: f64,
    damps: f64,
    chi_n: f64,
    /// Eigenvectors `B` and axis lengths `D` (square roots of eigenvalues).
    basis: DMatrix<f64>,
    axes: DVector<f64>,
}

impl CmaState {
    pub fn new(mean: &[f64], sigma: f64) -> Result<Self> {
        let n = mean.len();
        Self::with_population(mean, sigma, 4 + (3.0 * (n as f64).ln()).floor() as usize)
    }

    pub fn with_population(mean: &[f64], sigma: f64, lambda: usize) -> Result<Self> {
        let n = mean.len();
        if n == 0 || !(sigma > 0.0) || lambda < 2 || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "invalid CMA-ES setup: n={n}, sigma={sigma}, lambda={lambda}"
            )));
        }
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let damps = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            sigma,
            cov: DMatrix::identity(n, n),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
            lambda,
            mu,
            weights,
            mu_eff,
            c_c,
            c_sigma,
            c_1,
            c_mu,
            damps,
            chi_n,
            basis: DMatrix::identity(n, n),
            axes: DVector::from_element(n, 1.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Largest over smallest eigenvalue of the covariance.
    pub fn condition(&self) -> f64 {
        let max = self.axes.max();
        let min = self.axes.min();
        (max / min).powi(2)
    }

    /// Recomputes `B` and `D`, symmetrising `C` and lifting its spectrum if
    /// it became indefinite or too ill-conditioned.
    fn refresh_eigen(&mut self) {
        let n = self.dim();
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let mut eig = SymmetricEigen::new(sym.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if min <= 0.0 || max / min > MAX_CONDITION {
            let lift = max / MAX_CONDITION - min;
            let lifted = sym + DMatrix::identity(n, n) * lift;
            eig = SymmetricEigen::new(lifted.clone());
            self.cov = lifted;
        } else {
            self.cov = sym;
        }
        self.basis = eig.eigenvectors;
        self.axes = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    }
}

/// Draws `λ` candidates `m + σ·B·D·z`, `z ~ N(0, I)`.
pub fn cma_ask<R: Rng + ?Sized>(state: &CmaState, rng: &mut R) -> Vec<Vec<f64>> {
    let n = state.dim();
    (0..state.lambda)
        .map(|_| {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = &state.basis * state.axes.component_mul(&z);
            (&state.mean + y * state.sigma).as_slice().to_vec()
        })
        .collect()
}

/// Indices sorted best-first; non-finite fitnesses rank last, ties keep
/// candidate order.
fn ranking(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    let key = |i: usize| {
        if fitness[i].is_finite() {
            fitness[i]
        } else {
            f64::INFINITY
        }
    };
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
    order
}

/// One generation update from evaluated candidates (minimisation).
pub fn cma_tell(state: &mut CmaState, candidates: &[Vec<f64>], fitness: &[f64]) -> Result<()> {
    let n = state.dim();
    if candidates.len() != state.lambda || fitness.len() != state.lambda {
        return Err(Error::shape(
            "cma generation",
            &[state.lambda],
            &[candidates.len(), fitness.len()],
        ));
    }
    if candidates.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidArgument("candidate dimension mismatch".into()));
    }
    let order = ranking(fitness);
    let ys: Vec<DVector<f64>> = order[..state.mu]
        .iter()
        .map(|&i| (DVector::from_column_slice(&candidates[i]) - &state.mean) / state.sigma)
        .collect();
    let mut y_w = DVector::zeros(n);
    for (w, y) in state.weights.iter().zip(&ys) {
        y_w += y * *w;
    }
    state.mean += &y_w * state.sigma;

    // C^{-1/2} = B D^{-1} Bᵀ
    let inv_axes = state.axes.map(|d| 1.0 / d);
    let c_inv_sqrt_yw = &state.basis * inv_axes.component_mul(&(state.basis.transpose() * &y_w));
    let cs = state.c_sigma;
    state.p_sigma = &state.p_sigma * (1.0 - cs) + c_inv_sqrt_yw * (cs * (2.0 - cs) * state.mu_eff).sqrt();
    let ps_norm = state.p_sigma.norm();
    let g = state.generation as f64 + 1.0;
    let h_sigma = ps_norm / (1.0 - (1.0 - cs).powf(2.0 * g)).sqrt() < (1.4 + 2.0 / (n as f64 + 1.0)) * state.chi_n;
    let cc = state.c_c;
    state.p_c = &state.p_c * (1.0 - cc);
    if h_sigma {
        state.p_c += &y_w * (cc * (2.0 - cc) * state.mu_eff).sqrt();
    }
    let delta_h = if h_sigma { 0.0 } else { cc * (2.0 - cc) };
    let (c1, cmu) = (state.c_1, state.c_mu);
    let mut cov = &state.cov * (1.0 + c1 * delta_h - c1 - cmu) + &state.p_c * state.p_c.transpose() * c1;
    for (w, y) in state.weights.iter().zip(&ys) {
        cov += y * y.transpose() * (cmu * w);
    }
    state.cov = cov;
    state.sigma *= ((cs / state.damps) * (ps_norm / state.chi_n - 1.0)).exp();
    state.generation += 1;
    state.refresh_eigen();
    if !(state.sigma.is_finite() && state.sigma > 0.0) {
        return Err(Error::NonFinite(format!("CMA-ES step size became {}", state.sigma)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaOutcome {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    pub evaluations: usize,
    pub generations: u64,
    /// Every evaluated candidate and its fitness, in evaluation order.
    pub history: Vec<(Vec<f64>, f64)>,
}

/// Minimises `f` until `max_evals` evaluations are spent or the best
/// fitness drops to `target`. Whole generations are evaluated in parallel.
pub fn minimize<F, R>(f: F, state: &mut CmaState, max_evals: usize, target: f64, rng: &mut R) -> Result<CmaOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng + ?Sized,
{
    let mut out = CmaOutcome {
        best: state.mean.as_slice().to_vec(),
        best_fitness: f64::INFINITY,
        evaluations: 0,
        generations: 0,
        history: Vec::new(),
    };
    while out.evaluations + state.lambda <= max_evals {
        let candidates = cma_ask(state, rng);
        let fitness: Vec<f64> = candidates.par_iter().map(|c| f(c)).collect();
        for (c, &fx) in candidates.iter().zip(&fitness) {
            if fx < out.best_fitness {
                out.best_fitness = fx;
                out.best = c.clone();
            }
            out.history.push((c.clone(), fx));
        }
        out.evaluations += candidates.len();
        cma_tell(state, &candidates, &fitness)?;
        out.generations += 1;
        if out.best_fitness <= target {
            break;
        }
    }
    Ok(out)
}
