//! Finite-system single-site DMRG.
//!
//! The engine keeps the chain in mixed canonical form and sweeps back and
//! forth, replacing each site tensor by the lowest eigenvector of the
//! effective Hamiltonian built from cached left/right environments. The
//! eigenproblem is solved matrix-free with a Lanczos iteration warm-started
//! from the current tensor.

use crate::model::HamiltonianSpec;
use crate::mpo::{build_mpo, Mpo, MpoError};
use crate::mps::{CanonicalForm, MpsError, MpsState};
use crate::tensor::{contract, svd_truncated, C64, DenseTensor, TensorError, TruncationPolicy};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DmrgError {
    #[error("Krylov breakdown: starting vector has zero norm")]
    Breakdown,

    #[error("Lanczos failed to converge within {max_iter} iterations (residual {residual:.3e})")]
    NoConvergence { max_iter: usize, residual: f64 },

    #[error(transparent)]
    Mpo(#[from] MpoError),

    #[error(transparent)]
    Mps(#[from] MpsError),

    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type DmrgResult<T> = Result<T, DmrgError>;

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub reorthogonalize: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-12,
            reorthogonalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DmrgOptions {
    pub chi_max: usize,
    pub eps: f64,
    pub max_sweeps: usize,
    pub energy_tol: f64,
    pub lanczos: LanczosOptions,
}

impl DmrgOptions {
    pub fn new(chi_max: usize) -> Self {
        Self {
            chi_max,
            eps: 1e-10,
            max_sweeps: 20,
            energy_tol: 1e-10,
            lanczos: LanczosOptions::default(),
        }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Lowest eigenpair of a Hermitian operator given as a matrix-free closure.
///
/// Full reorthogonalization is used when requested; on slow convergence the
/// iteration restarts from the current Ritz vector (a handful of times)
/// before reporting failure.
pub fn lanczos_ground<F>(
    apply: F,
    v0: &[C64],
    opts: &LanczosOptions,
) -> DmrgResult<(f64, Vec<C64>)>
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let n = v0.len();
    let mut start = v0.to_vec();
    let n0 = norm(&start);
    if !(n0 > 1e-300) {
        return Err(DmrgError::Breakdown);
    }
    for x in &mut start {
        *x /= n0;
    }
    let mut last_residual = f64::INFINITY;
    for _restart in 0..5 {
        let dim = opts.max_iter.min(n);
        let mut vs: Vec<Vec<C64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut exhausted = false;
        let (theta, mut y) = loop {
            let k = alphas.len();
            let vk = vs[k].clone();
            let mut w = apply(&vk);
            let a = dot(&vk, &w).re;
            alphas.push(a);
            for (x, v) in w.iter_mut().zip(&vk) {
                *x -= C64::new(a, 0.0) * v;
            }
            if k > 0 {
                let b = betas[k - 1];
                for (x, v) in w.iter_mut().zip(&vs[k - 1]) {
                    *x -= C64::new(b, 0.0) * v;
                }
            }
            if opts.reorthogonalize {
                for v in &vs {
                    let c = dot(v, &w);
                    for (x, u) in w.iter_mut().zip(v) {
                        *x -= c * u;
                    }
                }
            }
            let b = norm(&w);
            // Ritz data from the k+1 dimensional tridiagonal problem
            let m = alphas.len();
            let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alphas[i];
                if i + 1 < m {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = t.symmetric_eigen();
            let mut best = 0;
            for i in 1..m {
                if eig.eigenvalues[i] < eig.eigenvalues[best] {
                    best = i;
                }
            }
            let theta = eig.eigenvalues[best];
            let yvec: Vec<f64> = (0..m).map(|i| eig.eigenvectors[(i, best)]).collect();
            let scale = eig
                .eigenvalues
                .iter()
                .fold(0.0f64, |acc, &x| acc.max(x.abs()))
                .max(1.0);
            let residual = (b * yvec[m - 1]).abs();
            last_residual = residual;
            if residual <= opts.tol * scale || b < 1e-14 || m >= dim {
                exhausted = residual > opts.tol * scale && b >= 1e-14;
                break (theta, yvec);
            }
            betas.push(b);
            let mut next = w;
            for x in &mut next {
                *x /= b;
            }
            vs.push(next);
        };
        // assemble the Ritz vector
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (j, v) in vs.iter().enumerate() {
            if j >= y.len() {
                break;
            }
            let c = C64::new(y[j], 0.0);
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += c * vi;
            }
        }
        let xn = norm(&x);
        if !(xn > 1e-300) {
            return Err(DmrgError::Breakdown);
        }
        for xi in &mut x {
            *xi /= xn;
        }
        y.clear();
        if !exhausted {
            return Ok((theta, x));
        }
        start = x;
    }
    Err(DmrgError::NoConvergence {
        max_iter: opts.max_iter,
        residual: last_residual,
    })
}

/// DMRG engine: state tensors, MPO, and cached environments.
pub struct DmrgEngine {
    ms: Vec<DenseTensor>,
    mpo: Mpo,
    left_envs: Vec<DenseTensor>,
    right_envs: Vec<DenseTensor>,
    options: DmrgOptions,
    last_energy: f64,
}

fn unit_env() -> DenseTensor {
    DenseTensor::new(vec![1, 1, 1], vec![C64::new(1.0, 0.0)]).unwrap()
}

/// `L(i+1)` from `L(i)` and the (bra = ket) site tensor.
fn next_left(l: &DenseTensor, m: &DenseTensor, w: &DenseTensor) -> DmrgResult<DenseTensor> {
    let x = contract(l, &[2], m, &[0])?; // (a, b, s', c')
    let y = contract(w, &[0, 3], &x, &[1, 2])?; // (b', s, a, c')
    Ok(contract(&m.conj(), &[0, 1], &y, &[2, 1])?) // (c, b', c')
}

/// `R(i-1)` from `R(i)`.
fn next_right(r: &DenseTensor, m: &DenseTensor, w: &DenseTensor) -> DmrgResult<DenseTensor> {
    let x = contract(m, &[2], r, &[2])?; // (a', s', c, b)
    let y = contract(w, &[1, 3], &x, &[3, 1])?; // (b, s, a', c)
    Ok(contract(&m.conj(), &[1, 2], &y, &[1, 3])?) // (a, b, a')
}

/// `H_eff * m` without materializing the effective Hamiltonian:
/// cost O(chi^3 d D_W).
pub fn effective_apply(
    left: &DenseTensor,
    right: &DenseTensor,
    w: &DenseTensor,
    m: &DenseTensor,
) -> DmrgResult<DenseTensor> {
    let x = contract(left, &[2], m, &[0])?; // (a, b, s', c')
    let y = contract(&x, &[1, 2], w, &[0, 3])?; // (a, c', b2, s)
    let z = contract(&y, &[1, 2], right, &[2, 1])?; // (a, s, c)
    Ok(z)
}

impl DmrgEngine {
    /// Build an engine from a state and MPO; the state is brought to right
    /// canonical form and all right environments are initialized.
    pub fn new(state: &MpsState, mpo: Mpo, options: DmrgOptions) -> DmrgResult<Self> {
        let policy = TruncationPolicy::new(options.chi_max).with_eps(options.eps);
        let right = state.canonicalize(CanonicalForm::Right, &policy)?;
        let l = right.len();
        let ms: Vec<DenseTensor> = (0..l).map(|i| right.gamma(i).clone()).collect();
        let mut engine = Self {
            ms,
            mpo,
            left_envs: vec![unit_env(); l],
            right_envs: vec![unit_env(); l],
            options,
            last_energy: f64::NAN,
        };
        for i in (1..l).rev() {
            engine.right_envs[i - 1] =
                next_right(&engine.right_envs[i], &engine.ms[i], engine.mpo.w(i))?;
        }
        Ok(engine)
    }

    pub fn site_tensors(&self) -> &[DenseTensor] {
        &self.ms
    }

    pub fn mpo(&self) -> &Mpo {
        &self.mpo
    }

    /// Apply the effective Hamiltonian at `site` to a rank-3 tensor.
    pub fn effective_apply_at(&self, site: usize, m: &DenseTensor) -> DmrgResult<DenseTensor> {
        effective_apply(
            &self.left_envs[site],
            &self.right_envs[site],
            self.mpo.w(site),
            m,
        )
    }

    fn site_update(&mut self, site: usize) -> DmrgResult<f64> {
        let shape = self.ms[site].shape().to_vec();
        let guess = self.ms[site].data().to_vec();
        let left = self.left_envs[site].clone();
        let right = self.right_envs[site].clone();
        let w = self.mpo.w(site).clone();
        let apply = |v: &[C64]| -> Vec<C64> {
            let m = DenseTensor::new(shape.clone(), v.to_vec()).unwrap();
            effective_apply(&left, &right, &w, &m)
                .unwrap()
                .data()
                .to_vec()
        };
        let (e, v) = lanczos_ground(apply, &guess, &self.options.lanczos)?;
        self.ms[site] = DenseTensor::new(shape, v)?;
        Ok(e)
    }

    /// One full back-and-forth sweep; returns the energy after the sweep.
    pub fn sweep(&mut self) -> DmrgResult<f64> {
        let l = self.ms.len();
        let policy = TruncationPolicy::new(self.options.chi_max).with_eps(self.options.eps);
        let d = self.ms[0].shape()[1];
        let mut energy = f64::NAN;
        // left to right
        for i in 0..l {
            energy = self.site_update(i)?;
            if i + 1 < l {
                let (cl, cr) = (self.ms[i].shape()[0], self.ms[i].shape()[2]);
                let m = self.ms[i].reshape(vec![cl * d, cr])?;
                let res = svd_truncated(&m, &policy)?;
                let k = res.s.len();
                self.ms[i] = res.u.reshape(vec![cl, d, k])?;
                let sv = crate::mps::scale_axis(&res.vh, 0, &res.s);
                self.ms[i + 1] = contract(&sv, &[1], &self.ms[i + 1], &[0])?;
                self.left_envs[i + 1] =
                    next_left(&self.left_envs[i], &self.ms[i], self.mpo.w(i))?;
            }
        }
        // right to left
        for i in (0..l).rev() {
            energy = self.site_update(i)?;
            if i > 0 {
                let (cl, cr) = (self.ms[i].shape()[0], self.ms[i].shape()[2]);
                let m = self.ms[i].reshape(vec![cl, d * cr])?;
                let res = svd_truncated(&m, &policy)?;
                let k = res.s.len();
                self.ms[i] = res.vh.reshape(vec![k, d, cr])?;
                let us = crate::mps::scale_axis(&res.u, 1, &res.s);
                self.ms[i - 1] = contract(&self.ms[i - 1], &[2], &us, &[0])?;
                self.right_envs[i - 1] =
                    next_right(&self.right_envs[i], &self.ms[i], self.mpo.w(i))?;
            }
        }
        self.last_energy = energy;
        Ok(energy)
    }

    /// Sweep until the energy difference falls below `energy_tol` or the
    /// sweep budget is exhausted; returns per-sweep energies.
    pub fn run(&mut self) -> DmrgResult<Vec<f64>> {
        let mut history = Vec::new();
        let mut prev = f64::INFINITY;
        for _ in 0..self.options.max_sweeps {
            let e = self.sweep()?;
            history.push(e);
            if (prev - e).abs() < self.options.energy_tol {
                break;
            }
            prev = e;
        }
        Ok(history)
    }

    /// The optimized state in Vidal canonical form.
    pub fn state(&self) -> DmrgResult<MpsState> {
        let policy = TruncationPolicy::new(self.options.chi_max).with_eps(self.options.eps);
        Ok(MpsState::from_site_tensors(self.ms.clone())?
            .canonicalize(CanonicalForm::Vidal, &policy)?)
    }

    /// Rebuild from scratch the environments that are current at the end of
    /// a back-and-forth sweep (all right environments plus the left
    /// boundary) and report the largest deviation from the cached ones.
    /// Left environments go stale during the return pass by construction
    /// and are refreshed in place on the next left-to-right pass.
    pub fn env_defect(&self) -> DmrgResult<f64> {
        let l = self.ms.len();
        let mut worst: f64 = 0.0;
        let boundary: f64 = self.left_envs[0]
            .data()
            .iter()
            .zip(unit_env().data())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(boundary);
        let mut fresh = unit_env();
        for i in (0..l).rev() {
            let diff: f64 = fresh
                .data()
                .iter()
                .zip(self.right_envs[i].data())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst = worst.max(diff);
            if i > 0 {
                fresh = next_right(&fresh, &self.ms[i], self.mpo.w(i))?;
            }
        }
        Ok(worst)
    }
}

/// Result of a ground-state search.
pub struct DmrgRun {
    pub energy: f64,
    pub state: MpsState,
    /// Energy after each full sweep.
    pub history: Vec<f64>,
}

/// Ground-state DMRG from a seeded random start.
pub fn dmrg_run(spec: &HamiltonianSpec, options: &DmrgOptions, seed: u64) -> DmrgResult<DmrgRun> {
    let mpo = build_mpo(spec)?;
    let init = crate::mps::random_mps(spec.length(), spec.phys_dim(), options.chi_max, seed);
    let mut engine = DmrgEngine::new(&init, mpo, *options)?;
    let history = engine.run()?;
    let energy = *history.last().expect("at least one sweep");
    Ok(DmrgRun {
        energy,
        state: engine.state()?,
        history,
    })
}
