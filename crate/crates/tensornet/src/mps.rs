//! Matrix product states in Vidal canonical form, finite and infinite.
//!
//! A state is stored as per-site `Γ` tensors with index order
//! `(left virtual, physical, right virtual)` plus per-bond singular-value
//! vectors `Λ`. `lambdas[i]` lives on the bond to the *left* of site `i`;
//! the boundary vectors `lambdas[0]` and `lambdas[L]` are `[1.0]`.
//!
//! In Vidal form the regrouped tensors `Λ[i] Γ[i]` are left-orthonormal and
//! `Γ[i] Λ[i+1]` right-orthonormal, so Schmidt data is explicit at every
//! bond and local updates stay local.

use crate::tensor::{
    contract, qr_reduced, svd_truncated, C64, DenseTensor, TensorError, TruncationPolicy,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("state has numerically zero norm")]
    ZeroNorm,

    #[error("operation requires Vidal canonical form, state is {0:?}")]
    NotCanonical(CanonicalForm),

    #[error("site {site} out of range for length {length}")]
    SiteOutOfRange { site: usize, length: usize },

    #[error("dense materialization too large: d^L = {0}")]
    TooLarge(u128),

    #[error("transfer-matrix eigensolve did not converge")]
    NonConvergedEigensolve,

    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type MpsResult<T> = Result<T, MpsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalForm {
    Vidal,
    Left,
    Right,
    Mixed(usize),
    None,
}

/// Finite matrix product state.
#[derive(Debug, Clone)]
pub struct MpsState {
    length: usize,
    phys_dim: usize,
    pub(crate) gammas: Vec<DenseTensor>,
    pub(crate) lambdas: Vec<Vec<f64>>,
    form: CanonicalForm,
}

/// Per-bond Schmidt data.
#[derive(Debug, Clone)]
pub struct BondEntanglement {
    pub bond: usize,
    pub spectrum: Vec<f64>,
    pub entropy: f64,
}

/// The boundary-aware bond-dimension schedule `min(d^i, d^(L-i), chi_max)`.
pub fn chi_list(l: usize, d: usize, chi_max: usize) -> Vec<usize> {
    let mut a = vec![1usize; l + 1];
    for i in 0..=(l / 2) {
        let full = (d as u128).checked_pow(i as u32).unwrap_or(u128::MAX);
        let v = if full <= chi_max as u128 {
            full as usize
        } else {
            chi_max
        };
        a[i] = v;
        a[l - i] = v;
    }
    a
}

/// Random MPS with the boundary bond-dimension schedule; reproducible from `seed`.
pub fn random_mps(l: usize, d: usize, chi_max: usize, seed: u64) -> MpsState {
    assert!(l >= 2 && d >= 2, "need L >= 2 and d >= 2");
    let chis = chi_list(l, d, chi_max);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut gammas = Vec::with_capacity(l);
    for i in 0..l {
        let len = chis[i] * d * chis[i + 1];
        let data: Vec<C64> = (0..len)
            .map(|_| C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
            .collect();
        gammas.push(DenseTensor::new(vec![chis[i], d, chis[i + 1]], data).unwrap());
    }
    let lambdas = (0..=l)
        .map(|i| {
            let chi = chis[i];
            vec![1.0 / (chi as f64).sqrt(); chi]
        })
        .collect();
    MpsState {
        length: l,
        phys_dim: d,
        gammas,
        lambdas,
        form: CanonicalForm::None,
    }
}

fn entropy_of(spectrum: &[f64]) -> f64 {
    -spectrum
        .iter()
        .map(|&s| {
            let p = s * s;
            if p > 0.0 {
                p * p.ln()
            } else {
                0.0
            }
        })
        .sum::<f64>()
}

/// Pseudo-inverse of a singular-value vector: entries >= 1e-12 are inverted,
/// smaller ones map to zero.
pub(crate) fn lambda_pinv(lambda: &[f64]) -> Vec<f64> {
    lambda
        .iter()
        .map(|&x| if x >= 1e-12 { 1.0 / x } else { 0.0 })
        .collect()
}

/// Multiply real weights onto one axis of a tensor.
pub(crate) fn scale_axis(t: &DenseTensor, axis: usize, weights: &[f64]) -> DenseTensor {
    let shape = t.shape().to_vec();
    debug_assert_eq!(shape[axis], weights.len());
    let mut out = t.clone();
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let data = out.data_mut();
    for o in 0..outer {
        for (w_idx, &w) in weights.iter().enumerate() {
            let base = (o * weights.len() + w_idx) * inner;
            for x in &mut data[base..base + inner] {
                *x *= w;
            }
        }
    }
    out
}

impl MpsState {
    /// Build from raw parts, validating the bond structure.
    pub fn from_gammas_lambdas(
        gammas: Vec<DenseTensor>,
        lambdas: Vec<Vec<f64>>,
        form: CanonicalForm,
    ) -> MpsResult<Self> {
        let l = gammas.len();
        if l < 2 {
            return Err(MpsError::SiteOutOfRange { site: 0, length: l });
        }
        let d = gammas[0].shape()[1];
        if lambdas.len() != l + 1 {
            return Err(MpsError::Tensor(TensorError::ShapeMismatch(format!(
                "expected {} lambda vectors, got {}",
                l + 1,
                lambdas.len()
            ))));
        }
        for (i, g) in gammas.iter().enumerate() {
            if g.rank() != 3 || g.shape()[1] != d {
                return Err(MpsError::Tensor(TensorError::ShapeMismatch(format!(
                    "gamma {} has shape {:?}",
                    i,
                    g.shape()
                ))));
            }
            if g.shape()[0] != lambdas[i].len() || g.shape()[2] != lambdas[i + 1].len() {
                return Err(MpsError::Tensor(TensorError::ShapeMismatch(format!(
                    "gamma {} bonds {:?} vs lambdas {}/{}",
                    i,
                    g.shape(),
                    lambdas[i].len(),
                    lambdas[i + 1].len()
                ))));
            }
        }
        Ok(Self {
            length: l,
            phys_dim: d,
            gammas,
            lambdas,
            form,
        })
    }

    /// Build a (form-`None`) state from plain site tensors; bonds carry unit weights.
    pub fn from_site_tensors(tensors: Vec<DenseTensor>) -> MpsResult<Self> {
        let lambdas: Vec<Vec<f64>> = std::iter::once(vec![1.0])
            .chain(tensors.iter().map(|t| vec![1.0; t.shape()[2]]))
            .collect();
        Self::from_gammas_lambdas(tensors, lambdas, CanonicalForm::None)
    }

    /// Unentangled computational-basis product state.
    pub fn product_state(l: usize, d: usize, locals: &[usize]) -> MpsResult<Self> {
        assert_eq!(locals.len(), l);
        let mut gammas = Vec::with_capacity(l);
        for &s in locals {
            let mut t = DenseTensor::zeros(vec![1, d, 1]);
            t.set(&[0, s, 0], C64::new(1.0, 0.0));
            gammas.push(t);
        }
        let lambdas = vec![vec![1.0]; l + 1];
        Self::from_gammas_lambdas(gammas, lambdas, CanonicalForm::Vidal)
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn form(&self) -> CanonicalForm {
        self.form
    }

    pub fn gamma(&self, i: usize) -> &DenseTensor {
        &self.gammas[i]
    }

    pub fn lambda(&self, bond: usize) -> &[f64] {
        &self.lambdas[bond]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.gammas.iter().map(|g| g.shape()[0]).collect();
        v.push(self.gammas[self.length - 1].shape()[2]);
        v
    }

    fn check_site(&self, site: usize) -> MpsResult<()> {
        if site >= self.length {
            return Err(MpsError::SiteOutOfRange {
                site,
                length: self.length,
            });
        }
        Ok(())
    }

    fn require_vidal(&self) -> MpsResult<()> {
        if self.form != CanonicalForm::Vidal {
            return Err(MpsError::NotCanonical(self.form));
        }
        Ok(())
    }

    /// `Λ[i] Γ[i]`, left-orthonormal in canonical form.
    pub(crate) fn a_tensor(&self, i: usize) -> DenseTensor {
        scale_axis(&self.gammas[i], 0, &self.lambdas[i])
    }

    /// `Γ[i] Λ[i+1]`, right-orthonormal in canonical form.
    pub(crate) fn b_tensor(&self, i: usize) -> DenseTensor {
        scale_axis(&self.gammas[i], 2, &self.lambdas[i + 1])
    }

    /// `Θ[i] = Λ[i] Γ[i] Λ[i+1]`.
    pub fn theta(&self, i: usize) -> DenseTensor {
        scale_axis(&self.a_tensor(i), 2, &self.lambdas[i + 1])
    }

    /// Site tensors whose plain product reproduces the state.
    pub(crate) fn full_site_tensors(&self) -> Vec<DenseTensor> {
        match self.form {
            CanonicalForm::Vidal => (0..self.length).map(|i| self.b_tensor(i)).collect(),
            _ => self.gammas.clone(),
        }
    }

    /// sqrt(<psi|psi>) by transfer contraction.
    pub fn norm(&self) -> f64 {
        let tensors = self.full_site_tensors();
        let mut c = DenseTensor::identity(1);
        for t in &tensors {
            let y = contract(&c, &[1], t, &[0]).unwrap();
            c = contract(&t.conj(), &[0, 1], &y, &[0, 1]).unwrap();
        }
        c.data()[0].re.max(0.0).sqrt()
    }

    /// Contract into the full d^L coefficient vector (oracle support).
    /// Site 0 is the most significant digit of the flattened index.
    pub fn to_statevector(&self) -> MpsResult<Vec<C64>> {
        let full = (self.phys_dim as u128).pow(self.length as u32);
        if full > (1u128 << 22) {
            return Err(MpsError::TooLarge(full));
        }
        let tensors = self.full_site_tensors();
        let mut phys: usize = self.phys_dim;
        let mut acc = tensors[0].reshape(vec![phys, tensors[0].shape()[2]])?;
        for t in &tensors[1..] {
            let joined = contract(&acc, &[1], t, &[0])?; // (phys, d, chi')
            phys *= self.phys_dim;
            acc = joined.reshape(vec![phys, joined.shape()[2]])?;
        }
        Ok(acc.reshape(vec![phys])?.data().to_vec())
    }

    /// Bring the state into the requested canonical form.
    ///
    /// The result is normalized; truncation follows `policy` during the SVD
    /// sweep. Bond spectra are stored at unit 2-norm as the canonical form
    /// requires, whatever `policy.renormalize` says.
    pub fn canonicalize(
        &self,
        target: CanonicalForm,
        policy: &TruncationPolicy,
    ) -> MpsResult<MpsState> {
        let l = self.length;
        let d = self.phys_dim;
        let nrm = self.norm();
        if !(nrm > 1e-14) {
            return Err(MpsError::ZeroNorm);
        }
        let mut ts = self.full_site_tensors();

        // left-to-right QR sweep: everything left-orthonormal
        for i in 0..l {
            let (cl, cr) = (ts[i].shape()[0], ts[i].shape()[2]);
            let m = ts[i].reshape(vec![cl * d, cr])?;
            let (q, r) = qr_reduced(&m)?;
            let k = q.shape()[1];
            ts[i] = q.reshape(vec![cl, d, k])?;
            if i + 1 < l {
                ts[i + 1] = contract(&r, &[1], &ts[i + 1], &[0])?;
            }
            // the final r is the norm (real, non-negative by the QR sign fix);
            // dropping it normalizes without touching the global phase
        }

        // right-to-left SVD sweep: collect spectra, truncate, build B tensors
        let raw = TruncationPolicy {
            renormalize: false,
            ..*policy
        };
        let mut lambdas: Vec<Vec<f64>> = vec![vec![1.0]; l + 1];
        let mut bs: Vec<Option<DenseTensor>> = vec![None; l];
        for i in (1..l).rev() {
            let (cl, cr) = (ts[i].shape()[0], ts[i].shape()[2]);
            let m = ts[i].reshape(vec![cl, d * cr])?;
            let res = svd_truncated(&m, &raw)?;
            let k = res.s.len();
            bs[i] = Some(res.vh.reshape(vec![k, d, cr])?);
            let snorm = res.s.iter().map(|x| x * x).sum::<f64>().sqrt();
            lambdas[i] = res.s.iter().map(|x| x / snorm).collect();
            let us = scale_axis(&res.u, 1, &res.s);
            ts[i - 1] = contract(&ts[i - 1], &[2], &us, &[0])?;
        }
        let t0norm = ts[0].norm();
        if !(t0norm > 1e-300) {
            return Err(MpsError::ZeroNorm);
        }
        bs[0] = Some(ts[0].scale(C64::new(1.0 / t0norm, 0.0)));

        // Vidal tensors: Γ[i] = B[i] with the right bond weights divided out
        let mut gammas = Vec::with_capacity(l);
        for (i, slot) in bs.iter_mut().enumerate() {
            let b = slot.take().unwrap();
            let pinv = lambda_pinv(&lambdas[i + 1]);
            gammas.push(scale_axis(&b, 2, &pinv));
        }
        let vidal = MpsState {
            length: l,
            phys_dim: d,
            gammas,
            lambdas,
            form: CanonicalForm::Vidal,
        };
        Ok(match target {
            CanonicalForm::Vidal => vidal,
            CanonicalForm::Left => {
                let gammas = (0..l).map(|i| vidal.a_tensor(i)).collect();
                MpsState {
                    form: CanonicalForm::Left,
                    gammas,
                    ..vidal
                }
            }
            CanonicalForm::Right => {
                let gammas = (0..l).map(|i| vidal.b_tensor(i)).collect();
                MpsState {
                    form: CanonicalForm::Right,
                    gammas,
                    ..vidal
                }
            }
            CanonicalForm::Mixed(c) => {
                let gammas = (0..l)
                    .map(|i| {
                        if i < c {
                            vidal.a_tensor(i)
                        } else if i == c {
                            vidal.theta(i)
                        } else {
                            vidal.b_tensor(i)
                        }
                    })
                    .collect();
                MpsState {
                    form: CanonicalForm::Mixed(c),
                    gammas,
                    ..vidal
                }
            }
            CanonicalForm::None => MpsState {
                form: CanonicalForm::None,
                ..vidal
            },
        })
    }

    /// Schmidt spectrum and von Neumann entropy at every interior bond.
    pub fn entanglement_profile(&self) -> MpsResult<Vec<BondEntanglement>> {
        self.require_vidal()?;
        Ok((1..self.length)
            .map(|bond| BondEntanglement {
                bond,
                spectrum: self.lambdas[bond].clone(),
                entropy: entropy_of(&self.lambdas[bond]),
            })
            .collect())
    }

    /// `<psi| O_site |psi>` through the local Θ tensor.
    pub fn local_expectation(&self, op: &DenseTensor, site: usize) -> MpsResult<C64> {
        self.require_vidal()?;
        self.check_site(site)?;
        let th = self.theta(site);
        // x[s, s'] = sum_{a,b} conj(Θ[a,s,b]) Θ[a,s',b]
        let x = contract(&th.conj(), &[0, 2], &th, &[0, 2])?;
        let mut val = C64::new(0.0, 0.0);
        let d = self.phys_dim;
        for s in 0..d {
            for sp in 0..d {
                val += op.get(&[s, sp]) * x.get(&[s, sp]);
            }
        }
        Ok(val)
    }

    /// Expectation of a product of one-site operators on consecutive sites
    /// starting at `start`; `None` entries are identities.
    pub fn operator_string_expectation(
        &self,
        start: usize,
        ops: &[Option<&DenseTensor>],
    ) -> MpsResult<C64> {
        self.require_vidal()?;
        if ops.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        let end = start + ops.len() - 1;
        self.check_site(start)?;
        self.check_site(end)?;
        let th = self.theta(start);
        let mut c = match ops[0] {
            Some(o) => {
                let y = contract(o, &[1], &th, &[1])?; // (s, a, b)
                contract(&th.conj(), &[0, 1], &y, &[1, 0])? // (b, b')
            }
            None => contract(&th.conj(), &[0, 1], &th, &[0, 1])?,
        };
        for (k, op) in ops.iter().enumerate().skip(1) {
            let x = self.b_tensor(start + k);
            let mut y = contract(&c, &[1], &x, &[0])?; // (b, s', c')
            if let Some(o) = op {
                let oy = contract(o, &[1], &y, &[1])?; // (s, b, c')
                y = oy.permute(&[1, 0, 2])?;
            }
            c = contract(&x.conj(), &[0, 1], &y, &[0, 1])?; // (c, c')
        }
        let mut tr = C64::new(0.0, 0.0);
        for i in 0..c.shape()[0] {
            tr += c.get(&[i, i]);
        }
        Ok(tr)
    }

    /// Two-point correlator `<O_a[i] O_b[j]>` for `i < j`.
    pub fn two_point(
        &self,
        op_a: &DenseTensor,
        i: usize,
        op_b: &DenseTensor,
        j: usize,
    ) -> MpsResult<C64> {
        if i >= j {
            return Err(MpsError::SiteOutOfRange {
                site: i,
                length: self.length,
            });
        }
        let mut ops: Vec<Option<&DenseTensor>> = vec![None; j - i + 1];
        ops[0] = Some(op_a);
        ops[j - i] = Some(op_b);
        self.operator_string_expectation(i, &ops)
    }

    /// One sweep for a whole correlator row: `<O_a[i] O_b[j]>` for every
    /// `j` in `i+1..L`, reusing the partial contraction.
    pub fn two_point_row(
        &self,
        op_a: &DenseTensor,
        i: usize,
        op_b: &DenseTensor,
    ) -> MpsResult<Vec<C64>> {
        self.require_vidal()?;
        self.check_site(i)?;
        let th = self.theta(i);
        let y = contract(op_a, &[1], &th, &[1])?;
        let mut c = contract(&th.conj(), &[0, 1], &y, &[1, 0])?;
        let mut out = Vec::with_capacity(self.length - i - 1);
        for j in i + 1..self.length {
            let x = self.b_tensor(j);
            let y = contract(&c, &[1], &x, &[0])?;
            let oy = contract(op_b, &[1], &y, &[1])?.permute(&[1, 0, 2])?;
            let closed = contract(&x.conj(), &[0, 1], &oy, &[0, 1])?;
            let mut tr = C64::new(0.0, 0.0);
            for k in 0..closed.shape()[0] {
                tr += closed.get(&[k, k]);
            }
            out.push(tr);
            c = contract(&x.conj(), &[0, 1], &y, &[0, 1])?;
        }
        Ok(out)
    }

    /// Apply a two-site gate on sites `(i, i+1)`; the canonical form is
    /// restored locally by SVD under `policy`. Returns the new state and the
    /// discarded weight of the cut.
    pub fn apply_two_site_gate(
        &self,
        gate: &DenseTensor,
        i: usize,
        policy: &TruncationPolicy,
    ) -> MpsResult<(MpsState, f64)> {
        self.require_vidal()?;
        self.check_site(i)?;
        self.check_site(i + 1)?;
        let d = self.phys_dim;
        if gate.shape() != [d * d, d * d] {
            return Err(MpsError::Tensor(TensorError::ShapeMismatch(format!(
                "gate shape {:?}, want [{}, {}]",
                gate.shape(),
                d * d,
                d * d
            ))));
        }
        let th1 = self.theta(i);
        let x2 = self.b_tensor(i + 1);
        let theta2 = contract(&th1, &[2], &x2, &[0])?; // (a, s1, s2, b)
        let (a, b) = (theta2.shape()[0], theta2.shape()[3]);
        let merged = theta2.reshape(vec![a, d * d, b])?;
        let applied = contract(gate, &[1], &merged, &[1])?; // (t12, a, b)
        let applied = applied.permute(&[1, 0, 2])?.reshape(vec![a * d, d * b])?;

        let raw = TruncationPolicy {
            renormalize: false,
            ..*policy
        };
        let res = svd_truncated(&applied, &raw)?;
        let factor = res.s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let k = res.s.len();
        let new_lambda: Vec<f64> = res.s.iter().map(|x| x / factor).collect();

        let mut u = res.u.reshape(vec![a, d, k])?;
        if !policy.renormalize {
            // keep the physical norm in the state instead of dropping it
            u = u.scale(C64::new(factor, 0.0));
        }
        let gamma_i = scale_axis(&u, 0, &lambda_pinv(&self.lambdas[i]));
        let vh = res.vh.reshape(vec![k, d, b])?;
        let gamma_j = scale_axis(&vh, 2, &lambda_pinv(&self.lambdas[i + 2]));

        let mut out = self.clone();
        out.gammas[i] = gamma_i;
        out.gammas[i + 1] = gamma_j;
        out.lambdas[i + 1] = new_lambda;
        Ok((out, res.discarded_weight))
    }

    /// Apply a one-site operator at `site` (no truncation; canonical form is
    /// generally lost, so the result is tagged form-`None`).
    pub fn apply_one_site(&self, op: &DenseTensor, site: usize) -> MpsResult<MpsState> {
        self.check_site(site)?;
        let mut ts = self.full_site_tensors();
        let y = contract(op, &[1], &ts[site], &[1])?; // (s, a, b)
        ts[site] = y.permute(&[1, 0, 2])?;
        MpsState::from_site_tensors(ts)
    }

    /// Maximum deviation from the Vidal orthonormality conditions.
    pub fn vidal_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.length {
            let a = self.a_tensor(i);
            let aha = contract(&a.conj(), &[0, 1], &a, &[0, 1]).unwrap();
            let n = aha.shape()[0];
            for r in 0..n {
                for c in 0..n {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    worst = worst.max((aha.get(&[r, c]) - C64::new(expect, 0.0)).norm());
                }
            }
            let b = self.b_tensor(i);
            let bbh = contract(&b, &[1, 2], &b.conj(), &[1, 2]).unwrap();
            let n = bbh.shape()[0];
            for r in 0..n {
                for c in 0..n {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    worst = worst.max((bbh.get(&[r, c]) - C64::new(expect, 0.0)).norm());
                }
            }
        }
        worst
    }
}

/// Infinite MPS over a repeating unit cell. `lambdas[i]` sits on the bond to
/// the left of cell site `i`, periodically.
#[derive(Debug, Clone)]
pub struct ImpsState {
    unit_cell: usize,
    phys_dim: usize,
    gammas: Vec<DenseTensor>,
    lambdas: Vec<Vec<f64>>,
}

impl ImpsState {
    pub fn new(gammas: Vec<DenseTensor>, lambdas: Vec<Vec<f64>>) -> MpsResult<Self> {
        let l = gammas.len();
        assert!(l >= 1);
        let d = gammas[0].shape()[1];
        if lambdas.len() != l {
            return Err(MpsError::Tensor(TensorError::ShapeMismatch(format!(
                "unit cell {} needs {} lambda vectors, got {}",
                l,
                l,
                lambdas.len()
            ))));
        }
        for i in 0..l {
            let right = (i + 1) % l;
            if gammas[i].shape()[0] != lambdas[i].len()
                || gammas[i].shape()[2] != lambdas[right].len()
            {
                return Err(MpsError::Tensor(TensorError::ShapeMismatch(format!(
                    "cell site {} bonds {:?} vs lambdas {}/{}",
                    i,
                    gammas[i].shape(),
                    lambdas[i].len(),
                    lambdas[right].len()
                ))));
            }
        }
        Ok(Self {
            unit_cell: l,
            phys_dim: d,
            gammas,
            lambdas,
        })
    }

    pub fn unit_cell(&self) -> usize {
        self.unit_cell
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn gamma(&self, i: usize) -> &DenseTensor {
        &self.gammas[i % self.unit_cell]
    }

    pub fn lambda(&self, i: usize) -> &[f64] {
        &self.lambdas[i % self.unit_cell]
    }

    pub(crate) fn b_tensor(&self, i: usize) -> DenseTensor {
        let i = i % self.unit_cell;
        let right = (i + 1) % self.unit_cell;
        scale_axis(&self.gammas[i], 2, &self.lambdas[right])
    }

    pub fn theta(&self, i: usize) -> DenseTensor {
        let i = i % self.unit_cell;
        let a = scale_axis(&self.gammas[i], 0, &self.lambdas[i]);
        scale_axis(&a, 2, &self.lambdas[(i + 1) % self.unit_cell])
    }

    /// Local expectation value at cell position `i`.
    pub fn local_expectation(&self, op: &DenseTensor, i: usize) -> MpsResult<C64> {
        let th = self.theta(i);
        let x = contract(&th.conj(), &[0, 2], &th, &[0, 2])?;
        let d = self.phys_dim;
        let mut val = C64::new(0.0, 0.0);
        for s in 0..d {
            for sp in 0..d {
                val += op.get(&[s, sp]) * x.get(&[s, sp]);
            }
        }
        Ok(val)
    }

    /// Expectation of a two-site `(d^2 x d^2)` operator on the bond between
    /// cell positions `i` and `i+1`.
    pub fn bond_expectation(&self, op2: &DenseTensor, i: usize) -> MpsResult<C64> {
        let d = self.phys_dim;
        let th1 = self.theta(i);
        let x2 = self.b_tensor(i + 1);
        let theta2 = contract(&th1, &[2], &x2, &[0])?; // (a, s1, s2, b)
        let (a, b) = (theta2.shape()[0], theta2.shape()[3]);
        let merged = theta2.reshape(vec![a, d * d, b])?;
        let applied = contract(op2, &[1], &merged, &[1])?.permute(&[1, 0, 2])?;
        let x = contract(&merged.conj(), &[0, 1, 2], &applied, &[0, 1, 2])?;
        Ok(x.data()[0])
    }

    /// `<O_a[0] O_b[r]>` for each requested distance, by explicit transfer
    /// through the unit cell; identity boundaries are exact in canonical form.
    pub fn correlation(
        &self,
        op_a: &DenseTensor,
        op_b: &DenseTensor,
        distances: &[usize],
    ) -> MpsResult<Vec<C64>> {
        let max_r = distances.iter().copied().max().unwrap_or(0);
        let mut wanted: Vec<usize> = distances.to_vec();
        wanted.sort_unstable();
        let mut reached = std::collections::HashMap::new();

        let th = self.theta(0);
        let y = contract(op_a, &[1], &th, &[1])?;
        let mut c = contract(&th.conj(), &[0, 1], &y, &[1, 0])?;
        for r in 1..=max_r {
            let x = self.b_tensor(r);
            if wanted.binary_search(&r).is_ok() {
                let y = contract(&c, &[1], &x, &[0])?;
                let oy = contract(op_b, &[1], &y, &[1])?.permute(&[1, 0, 2])?;
                let closed = contract(&x.conj(), &[0, 1], &oy, &[0, 1])?;
                let mut tr = C64::new(0.0, 0.0);
                for i in 0..closed.shape()[0] {
                    tr += closed.get(&[i, i]);
                }
                reached.insert(r, tr);
            }
            let y = contract(&c, &[1], &x, &[0])?;
            c = contract(&x.conj(), &[0, 1], &y, &[0, 1])?;
        }
        distances
            .iter()
            .map(|&r| {
                if r == 0 {
                    let ma = op_a.to_matrix()?;
                    let mb = op_b.to_matrix()?;
                    self.local_expectation(&DenseTensor::from_matrix(&(ma * mb)), 0)
                } else {
                    Ok(reached[&r])
                }
            })
            .collect()
    }

    /// Schmidt spectrum and entropy on each bond of the unit cell.
    pub fn entanglement_profile(&self) -> Vec<BondEntanglement> {
        (0..self.unit_cell)
            .map(|bond| BondEntanglement {
                bond,
                spectrum: self.lambdas[bond].clone(),
                entropy: entropy_of(&self.lambdas[bond]),
            })
            .collect()
    }
}
