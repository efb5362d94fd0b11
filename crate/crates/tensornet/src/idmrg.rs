//! Thermodynamic-limit ground states via the unit-cell growth recurrence.
//!
//! Each iteration inserts a fresh unit cell at the center, re-optimizes the
//! central two-site wavefunction against the accumulated environments, and
//! absorbs the optimized tensors outward. The trial center for the grown
//! system is the rotated wavefunction `Λ^R Λ^{-1}_{prev} Λ^L`, and the run
//! stops at the singular-value fixed point: the new center spectrum must
//! match both one-cell regroupings of the previous one.

use crate::dmrg::{lanczos_ground, DmrgError, DmrgResult, LanczosOptions};
use crate::model::HamiltonianSpec;
use crate::mpo::build_cell_mpo;
use crate::mps::{lambda_pinv, scale_axis, ImpsState, MpsError};
use crate::tensor::{contract, svd_truncated, C64, DenseTensor, TruncationPolicy};

#[derive(Debug, Clone, Copy)]
pub struct IdmrgOptions {
    pub chi_max: usize,
    pub eps: f64,
    pub max_iters: usize,
    pub energy_tol: f64,
    /// Fixed-point tolerance on the singular-value distance.
    pub lambda_tol: f64,
    pub lanczos: LanczosOptions,
}

impl IdmrgOptions {
    pub fn new(chi_max: usize) -> Self {
        Self {
            chi_max,
            eps: 1e-10,
            max_iters: 500,
            energy_tol: 1e-10,
            lambda_tol: 1e-8,
            lanczos: LanczosOptions::default(),
        }
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy)]
pub struct IdmrgRecord {
    pub iteration: usize,
    pub energy_per_site: f64,
    pub lambda_distance: f64,
}

pub struct IdmrgRun {
    pub energy_per_site: f64,
    pub state: ImpsState,
    pub history: Vec<IdmrgRecord>,
    pub converged: bool,
}

fn lambda_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let mut acc = 0.0;
    for i in 0..n {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        acc += (x - y) * (x - y);
    }
    acc.sqrt()
}

// two-site effective application: L[a,b,a'] W1[b,c,s1,s1'] W2[c,e,s2,s2'] R[f,e,f']
// acting on theta[a', s1', s2', f']
fn apply_two_site(
    left: &DenseTensor,
    right: &DenseTensor,
    w1: &DenseTensor,
    w2: &DenseTensor,
    theta: &DenseTensor,
) -> DmrgResult<DenseTensor> {
    let x = contract(left, &[2], theta, &[0])?; // (a, b, s1', s2', f')
    let y = contract(&x, &[1, 2], w1, &[0, 3])?; // (a, s2', f', c, s1)
    let z = contract(&y, &[1, 3], w2, &[3, 0])?; // (a, f', s1, e, s2)
    let out = contract(&z, &[1, 3], right, &[2, 1])?; // (a, s1, s2, f)
    Ok(out)
}

/// Ground state of the infinite chain for an even unit cell.
///
/// Convergence requires both the singular-value fixed point and a settled
/// energy per site; hitting the iteration cap returns the last state with
/// `converged = false` surfaced through [`IdmrgRun`], or an error when
/// requested via [`idmrg_run`].
pub fn idmrg_run(
    spec: &HamiltonianSpec,
    cell: usize,
    options: &IdmrgOptions,
) -> DmrgResult<IdmrgRun> {
    let run = idmrg_run_lenient(spec, cell, options)?;
    if !run.converged {
        // incommensurate unit cells legitimately fail to settle; surface the
        // last singular-value distance instead of hiding it
        let residual = run
            .history
            .last()
            .map(|r| r.lambda_distance)
            .unwrap_or(f64::NAN);
        return Err(DmrgError::NoConvergence {
            max_iter: options.max_iters,
            residual,
        });
    }
    Ok(run)
}

/// Like [`idmrg_run`] but reports non-convergence in the result instead of
/// failing, which legitimately happens for unit cells incommensurate with
/// the ground-state pattern.
pub fn idmrg_run_lenient(
    spec: &HamiltonianSpec,
    cell: usize,
    options: &IdmrgOptions,
) -> DmrgResult<IdmrgRun> {
    assert!(cell >= 2 && cell % 2 == 0, "unit cell must be even and >= 2");
    let cmpo = build_cell_mpo(spec, cell)?;
    let d = cmpo.d;
    let policy = TruncationPolicy::new(options.chi_max).with_eps(options.eps);

    // initial two-site problem: dense ground state of W0 W1 with boundary vectors
    let w0 = &cmpo.ws[0];
    let w1 = &cmpo.ws[1 % cell];
    let mut left = DenseTensor::zeros(vec![1, w0.shape()[0], 1]);
    left.set(&[0, cmpo.init[0], 0], C64::new(1.0, 0.0));
    let mut right = DenseTensor::zeros(vec![1, w1.shape()[1], 1]);
    right.set(&[0, cmpo.fin[2 % cell], 0], C64::new(1.0, 0.0));

    let mut theta = {
        // dense d^2 x d^2 block, solved exactly
        let dim = d * d;
        let mut h = nalgebra::DMatrix::<C64>::zeros(dim, dim);
        for k in 0..dim {
            let mut e = vec![C64::new(0.0, 0.0); dim];
            e[k] = C64::new(1.0, 0.0);
            let t = DenseTensor::new(vec![1, d, d, 1], e).unwrap();
            let out = apply_two_site(&left, &right, w0, w1, &t)?;
            for (i, z) in out.data().iter().enumerate() {
                h[(i, k)] = *z;
            }
        }
        let eig = h.symmetric_eigen();
        let mut best = 0;
        for i in 1..dim {
            if eig.eigenvalues[i] < eig.eigenvalues[best] {
                best = i;
            }
        }
        let col: Vec<C64> = (0..dim).map(|i| eig.eigenvectors[(i, best)]).collect();
        DenseTensor::new(vec![1, d, d, 1], col)?
    };

    let mut lambda_prev: Vec<f64> = vec![1.0];
    let mut prev_energy = f64::NAN;
    let mut prev_lambda_l: Vec<f64> = vec![1.0];
    let mut prev_lambda_r: Vec<f64> = vec![1.0];
    let mut energy_per_site = f64::NAN;
    let mut history = Vec::new();
    let mut converged = false;
    // tensors of the final unit cell (left-orthonormal U, right-orthonormal V)
    let mut last_u: Option<DenseTensor> = None;
    let mut last_vh: Option<DenseTensor> = None;
    let mut last_lambda: Vec<f64> = vec![1.0];

    for iteration in 0..options.max_iters {
        // positions of the two center sites within the Hamiltonian cell:
        // each growth step pushes one site into either environment, so the
        // center advances by one cell position per iteration
        let p0 = iteration % cell;
        let p1 = (p0 + 1) % cell;
        let w_a = &cmpo.ws[p0];
        let w_b = &cmpo.ws[p1];

        // optimize the center (skip Lanczos at iteration 0: theta is exact)
        let energy = if iteration == 0 {
            let ht = apply_two_site(&left, &right, w_a, w_b, &theta)?;
            let num: C64 = theta
                .data()
                .iter()
                .zip(ht.data())
                .map(|(a, b)| a.conj() * b)
                .sum();
            num.re
        } else {
            let shape = theta.shape().to_vec();
            let (l2, r2) = (left.clone(), right.clone());
            let (wa, wb) = (w_a.clone(), w_b.clone());
            let apply = |v: &[C64]| -> Vec<C64> {
                let t = DenseTensor::new(shape.clone(), v.to_vec()).unwrap();
                apply_two_site(&l2, &r2, &wa, &wb, &t)
                    .unwrap()
                    .data()
                    .to_vec()
            };
            let (e, v) = lanczos_ground(apply, theta.data(), &options.lanczos)?;
            theta = DenseTensor::new(theta.shape().to_vec(), v)?;
            e
        };

        // split the optimized center
        let (a_dim, f_dim) = (theta.shape()[0], theta.shape()[3]);
        let merged = theta.reshape(vec![a_dim * d, d * f_dim])?;
        let svd_c = svd_truncated(&merged, &policy)?;
        let k = svd_c.s.len();
        let u = svd_c.u.reshape(vec![a_dim, d, k])?;
        let vh = svd_c.vh.reshape(vec![k, d, f_dim])?;
        let lambda_c = svd_c.s.clone();

        // the two one-cell regroupings of the center give Λ^L and Λ^R
        let left_group = merged.reshape(vec![a_dim, d * d * f_dim])?;
        let lam_l = svd_truncated(&left_group, &TruncationPolicy::exact())?.s;
        let right_group = merged.reshape(vec![a_dim * d * d, f_dim])?;
        let lam_r = svd_truncated(&right_group, &TruncationPolicy::exact())?.s;

        // energy per site from the environment-energy difference; for
        // dimerized cells this oscillates with the cell period, so the
        // convergence comparison strides a full cell
        let e_site = if iteration == 0 {
            energy / 2.0
        } else {
            (energy - prev_energy) / 2.0
        };
        let dist = lambda_distance(&lambda_c, &prev_lambda_r)
            .max(lambda_distance(&lambda_c, &prev_lambda_l));
        history.push(IdmrgRecord {
            iteration,
            energy_per_site: e_site,
            lambda_distance: dist,
        });

        let energy_settled = history.len() > cell
            && (e_site - history[history.len() - 1 - cell].energy_per_site).abs()
                < options.energy_tol;
        let settled = iteration > 0 && dist < options.lambda_tol && energy_settled;
        energy_per_site = e_site;
        prev_energy = energy;

        last_u = Some(u.clone());
        last_vh = Some(vh.clone());

        if settled {
            last_lambda = lambda_c;
            converged = true;
            break;
        }

        // absorb the optimized tensors into the environments
        left = {
            let x = contract(&left, &[2], &u, &[0])?; // (a, b, s', c')
            let y = contract(w_a, &[0, 3], &x, &[1, 2])?; // (b', s, a, c')
            contract(&u.conj(), &[0, 1], &y, &[2, 1])? // (c, b', c')
        };
        right = {
            let x = contract(&vh, &[2], &right, &[2])?; // (a', s', c, b)
            let y = contract(w_b, &[1, 3], &x, &[3, 1])?; // (b, s, a', c)
            contract(&vh.conj(), &[1, 2], &y, &[1, 3])? // (a, b, a')
        };

        // rotated trial center for the grown system: the next center sits one
        // cell position over, so translate the optimized wavefunction as
        // Λ_c V† Λ_prev^{-1} U Λ_c (warm start for the next Lanczos solve)
        let bt = scale_axis(&vh, 0, &lambda_c); // (k, d, f)
        let bt = scale_axis(&bt, 2, &lambda_pinv(&lambda_prev));
        let at = scale_axis(&u, 2, &lambda_c); // (a, d, k)
        let mut trial = contract(&bt, &[2], &at, &[0])?; // (k, d, d, k)
        let tnorm = trial.norm();
        if tnorm > 1e-300 {
            trial = trial.scale(C64::new(1.0 / tnorm, 0.0));
        }
        theta = trial;
        lambda_prev = lambda_c.clone();
        prev_lambda_l = lam_l;
        prev_lambda_r = lam_r;
        last_lambda = lambda_c;
    }

    // report the energy averaged over one cell period
    if !history.is_empty() {
        let tail = history.len().min(cell);
        energy_per_site = history[history.len() - tail..]
            .iter()
            .map(|r| r.energy_per_site)
            .sum::<f64>()
            / tail as f64;
    }

    // assemble the unit cell in Vidal form: Γ_A = Λ_outer^{-1} U,
    // Γ_B = V† Λ_outer^{-1}, with the outer bond carrying the previous
    // iteration's center spectrum
    let u = last_u.expect("at least one iteration");
    let vh = last_vh.expect("at least one iteration");
    let lam_odd = lambda_prev.clone();
    // pad/trim the odd-bond spectrum to the actual outer bond dimensions
    let fit = |lam: &[f64], dim: usize| -> Vec<f64> {
        let mut v: Vec<f64> = lam.iter().take(dim).copied().collect();
        while v.len() < dim {
            v.push(0.0);
        }
        v
    };
    let lam_left = fit(&lam_odd, u.shape()[0]);
    let lam_right = fit(&lam_odd, vh.shape()[2]);
    let gamma_a = scale_axis(&u, 0, &lambda_pinv(&lam_left));
    let gamma_b = scale_axis(&vh, 2, &lambda_pinv(&lam_right));
    let state = ImpsState::new(
        vec![gamma_a, gamma_b],
        vec![lam_left, last_lambda.clone()],
    )?;
    Ok(IdmrgRun {
        energy_per_site,
        state,
        history,
        converged,
    })
}

/// Correlation length from the two leading eigenvalues of the unit-cell
/// transfer matrix: `xi = -cell / ln |mu_2 / mu_1|`.
///
/// The dominant eigenpair is found by power iteration (its exact form is
/// known only for a perfectly canonical state), the subleading magnitude by
/// power iteration on the deflated map.
pub fn correlation_length(istate: &ImpsState) -> Result<f64, MpsError> {
    let cell = istate.unit_cell();
    let chi = istate.lambda(0).len();
    if chi == 1 {
        return Ok(0.0);
    }
    // transfer of a (chi x chi) matrix through one unit cell with the
    // left-orthonormal regrouping: C -> sum_s A^s† C A^s, and its adjoint
    let transfer = |c: &DenseTensor| -> Result<DenseTensor, MpsError> {
        let mut cur = c.clone();
        for p in 0..cell {
            let a = scale_axis(istate.gamma(p), 0, istate.lambda(p));
            let y = contract(&cur, &[1], &a, &[0])?;
            cur = contract(&a.conj(), &[0, 1], &y, &[0, 1])?;
        }
        Ok(cur)
    };
    let transfer_adj = |c: &DenseTensor| -> Result<DenseTensor, MpsError> {
        let mut cur = c.clone();
        for p in (0..cell).rev() {
            let a = scale_axis(istate.gamma(p), 0, istate.lambda(p));
            let y = contract(&cur, &[1], &a.conj(), &[2])?; // (l, a, s)
            cur = contract(&a, &[2, 1], &y, &[0, 2])?; // (l', l) -> transposed
            cur = cur.permute(&[1, 0])?;
        }
        Ok(cur)
    };
    let power = |map: &dyn Fn(&DenseTensor) -> Result<DenseTensor, MpsError>,
                 start: DenseTensor|
     -> Result<(f64, DenseTensor), MpsError> {
        let mut c = start;
        let mut mu = 0.0f64;
        let mut last = f64::INFINITY;
        for it in 0..4000 {
            let nrm = c.norm();
            if nrm < 1e-280 {
                return Ok((0.0, c));
            }
            c = c.scale(C64::new(1.0 / nrm, 0.0));
            let next = map(&c)?;
            mu = next.norm();
            if it > 10 && (mu - last).abs() < 1e-13 * mu.max(1.0) {
                return Ok((mu, next.scale(C64::new(1.0 / mu.max(1e-300), 0.0))));
            }
            last = mu;
            c = next;
        }
        Err(MpsError::NonConvergedEigensolve)?;
        unreachable!()
    };
    // dominant pair
    let mut rho = DenseTensor::zeros(vec![chi, chi]);
    for (i, l) in istate.lambda(0).iter().enumerate() {
        rho.set(&[i, i], C64::new(l * l, 0.0));
    }
    let (mu1, r1) = power(&transfer, rho)?;
    if mu1 < 1e-14 {
        return Ok(0.0);
    }
    let (_, l1) = power(&transfer_adj, DenseTensor::identity(chi))?;
    let inner = |a: &DenseTensor, b: &DenseTensor| -> C64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x.conj() * y).sum()
    };
    let l1r1 = inner(&l1, &r1);
    let deflate = |c: &DenseTensor| -> DenseTensor {
        let w = inner(&l1, c) / l1r1;
        let mut out = c.clone();
        for (o, r) in out.data_mut().iter_mut().zip(r1.data()) {
            *o -= w * r * mu1;
        }
        out
    };
    // seeded start for determinism
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x1d3a);
    let mut c = DenseTensor::zeros(vec![chi, chi]);
    for i in 0..chi {
        for j in 0..chi {
            c.set(
                &[i, j],
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            );
        }
    }
    let composed = |x: &DenseTensor| -> Result<DenseTensor, MpsError> { Ok(deflate(&transfer(x)?)) };
    let (mu2, _) = power(&composed, deflate(&c))?;
    if mu2 < 1e-14 {
        return Ok(0.0);
    }
    let ratio = mu2 / mu1;
    if ratio >= 1.0 {
        return Err(MpsError::NonConvergedEigensolve);
    }
    Ok(-(cell as f64) / ratio.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmrg::{dmrg_run, DmrgOptions};
    use crate::model::ops;

    #[test]
    fn decoupled_limit_reaches_product_fixed_point() {
        // J = 0, g_x = 1: ground state |+>^inf with e = -1 and trivial bonds
        let spec = HamiltonianSpec::Tfim { l: 2, j: 0.0, g_x: 1.0, g_z: 0.0 };
        let run = idmrg_run(&spec, 2, &IdmrgOptions::new(8)).unwrap();
        assert!((run.energy_per_site + 1.0).abs() < 1e-9, "e {}", run.energy_per_site);
        assert_eq!(run.state.lambda(0).len(), 1);
        assert!((run.state.lambda(0)[0] - 1.0).abs() < 1e-10);
        let x = ops::as_tensor(&ops::pauli_x());
        let v = run.state.local_expectation(&x, 0).unwrap();
        assert!((v.re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gapped_tfim_matches_finite_size_bulk_energy() {
        let spec = HamiltonianSpec::Tfim { l: 2, j: 1.0, g_x: 2.0, g_z: 0.0 };
        let mut opts = IdmrgOptions::new(16);
        opts.lambda_tol = 1e-9;
        let run = idmrg_run(&spec, 2, &opts).unwrap();
        // finite-size oracle: bulk energy from the difference of two chain
        // lengths cancels the boundary term
        let e16 = dmrg_run(&spec.with_length(16), &DmrgOptions::new(24), 3)
            .unwrap()
            .energy;
        let e32 = dmrg_run(&spec.with_length(32), &DmrgOptions::new(24), 3)
            .unwrap()
            .energy;
        let bulk = (e32 - e16) / 16.0;
        assert!(
            (run.energy_per_site - bulk).abs() < 1e-6,
            "idmrg {} vs bulk {}",
            run.energy_per_site,
            bulk
        );
    }

    #[test]
    fn critical_entropy_grows_with_chi() {
        let spec = HamiltonianSpec::Tfim { l: 2, j: 1.0, g_x: 1.0, g_z: 0.0 };
        let mut entropies = Vec::new();
        for chi in [8usize, 16, 32] {
            let mut opts = IdmrgOptions::new(chi);
            // entropy growth is the observable here, not strict convergence
            opts.max_iters = 200;
            opts.lambda_tol = 1e-7;
            opts.energy_tol = 1e-9;
            let run = idmrg_run_lenient(&spec, 2, &opts).unwrap();
            let prof = run.state.entanglement_profile();
            entropies.push(prof[1].entropy);
        }
        assert!(
            entropies[0] < entropies[1] && entropies[1] < entropies[2],
            "no growth: {:?}",
            entropies
        );
    }

    #[test]
    fn local_energy_density_uniform_across_cell() {
        let spec = HamiltonianSpec::Tfim { l: 2, j: 1.0, g_x: 2.0, g_z: 0.0 };
        let mut opts = IdmrgOptions::new(16);
        opts.lambda_tol = 1e-9;
        let run = idmrg_run(&spec, 2, &opts).unwrap();
        // bulk bond Hamiltonian: on-site terms split half-half, so the sum
        // over bonds reproduces H and the per-site energy is the bond mean
        let x = ops::pauli_x();
        let z = ops::pauli_z();
        let id = ops::identity(2);
        let g = 2.0;
        let h2 = z.kronecker(&z)
            + x.kronecker(&id) * C64::new(-g / 2.0, 0.0)
            + id.kronecker(&x) * C64::new(-g / 2.0, 0.0);
        let hb = DenseTensor::from_matrix(&h2);
        let e0 = run.state.bond_expectation(&hb, 0).unwrap().re;
        let e1 = run.state.bond_expectation(&hb, 1).unwrap().re;
        assert!((e0 - e1).abs() < 1e-8, "bond energies {e0} vs {e1}");
        assert!(
            ((e0 + e1) / 2.0 - run.energy_per_site).abs() < 1e-6,
            "bond mean {} vs recurrence {}",
            (e0 + e1) / 2.0,
            run.energy_per_site
        );
    }

    #[test]
    fn fixed_point_survives_one_more_growth_step() {
        let spec = HamiltonianSpec::Tfim { l: 2, j: 1.0, g_x: 1.5, g_z: 0.0 };
        let mut opts = IdmrgOptions::new(16);
        opts.lambda_tol = 1e-9;
        let a = idmrg_run(&spec, 2, &opts).unwrap();
        let iters = a.history.len();
        // rerun with one extra iteration forced
        let mut opts2 = opts;
        opts2.lambda_tol = 0.0;
        opts2.energy_tol = 0.0;
        opts2.max_iters = iters + 1;
        let b = idmrg_run_lenient(&spec, 2, &opts2).unwrap();
        let la = a.state.lambda(1);
        let lb = b.state.lambda(1);
        let d = super::lambda_distance(la, lb);
        assert!(d < 10.0 * opts.lambda_tol.max(1e-8), "distance {d}");
    }

    #[test]
    fn correlation_length_product_gapped_and_scan() {
        // product state: xi = 0
        let mut g = DenseTensor::zeros(vec![1, 2, 1]);
        g.set(&[0, 0, 0], C64::new(1.0, 0.0));
        let prod = ImpsState::new(vec![g.clone(), g], vec![vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(correlation_length(&prod).unwrap(), 0.0);

        // gapped TFIM: finite xi, stable under chi doubling within 5%;
        // the fixed-point tolerance sits above the chi = 8 truncation floor
        let spec = HamiltonianSpec::Tfim { l: 2, j: 1.0, g_x: 2.0, g_z: 0.0 };
        let opts = IdmrgOptions::new(8);
        let xa = correlation_length(&idmrg_run(&spec, 2, &opts).unwrap().state).unwrap();
        let mut opts2 = IdmrgOptions::new(16);
        opts2.lambda_tol = 1e-9;
        let xb = correlation_length(&idmrg_run(&spec, 2, &opts2).unwrap().state).unwrap();
        assert!(xa > 0.0 && xb > 0.0);
        assert!((xa - xb).abs() / xb < 0.05, "xi {xa} vs {xb}");

        // xi grows monotonically toward the critical point
        let mut last = 0.0;
        for gx in [2.0, 1.8, 1.6, 1.4, 1.2] {
            let spec = HamiltonianSpec::Tfim { l: 2, j: 1.0, g_x: gx, g_z: 0.0 };
            let mut o = IdmrgOptions::new(24);
            o.lambda_tol = 1e-8;
            let run = idmrg_run_lenient(&spec, 2, &o).unwrap();
            let xi = correlation_length(&run.state).unwrap();
            assert!(xi > last, "xi({gx}) = {xi} not above {last}");
            last = xi;
        }
    }
}
