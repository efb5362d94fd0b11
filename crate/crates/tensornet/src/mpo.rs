//! Matrix product operators compiled from Hamiltonian term lists.
//!
//! The compiler implements the usual finite-automaton construction: bond
//! index 0 is the "finished" state, the last index the "initial" state, and
//! one channel in between per product term crossing the bond (plus an
//! identity-passthrough channel for next-nearest terms). Boundary vectors
//! are folded into the first and last tensors, so edge bonds have extent 1
//! and the bulk bond dimension is minimal for the term list: 2 for on-site
//! sums, 3 for a single nearest-neighbor term, 5 for the Heisenberg class.

use crate::model::{HamiltonianSpec, ModelError, TermData};
use crate::mps::{CanonicalForm, MpsError, MpsState};
use crate::tensor::{contract, C64, DenseTensor, TensorError, TruncationPolicy};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpoError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Mps(#[from] MpsError),

    #[error("dense materialization too large: d^L = {0} exceeds 2^14")]
    TooLarge(u128),
}

pub type MpoResult<T> = Result<T, MpoError>;

/// Matrix product operator; `ws[i]` has index order
/// `(left bond, right bond, phys out, phys in)`.
#[derive(Debug, Clone)]
pub struct Mpo {
    l: usize,
    d: usize,
    ws: Vec<DenseTensor>,
}

// states on one bond of the automaton
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum BondState {
    Finished,
    Nn { bond: usize, term: usize },
    NnnFirst { site: usize, term: usize },
    NnnSecond { site: usize, term: usize },
    Initial,
}

fn bond_states(t: &TermData, bond: usize) -> Vec<BondState> {
    let l = t.l;
    if bond == 0 {
        return vec![BondState::Initial];
    }
    if bond == l {
        return vec![BondState::Finished];
    }
    let mut states = vec![BondState::Finished];
    for (k, _) in t.nn[bond - 1].iter().enumerate() {
        states.push(BondState::Nn {
            bond: bond - 1,
            term: k,
        });
    }
    if bond >= 1 && bond - 1 < t.nnn.len() {
        for (k, _) in t.nnn[bond - 1].iter().enumerate() {
            states.push(BondState::NnnFirst {
                site: bond - 1,
                term: k,
            });
        }
    }
    if bond >= 2 && bond - 2 < t.nnn.len() {
        for (k, _) in t.nnn[bond - 2].iter().enumerate() {
            states.push(BondState::NnnSecond {
                site: bond - 2,
                term: k,
            });
        }
    }
    states.push(BondState::Initial);
    states
}

fn place(w: &mut DenseTensor, row: usize, col: usize, m: &DMatrix<C64>) {
    let d = m.nrows();
    for s_out in 0..d {
        for s_in in 0..d {
            let cur = w.get(&[row, col, s_out, s_in]);
            w.set(&[row, col, s_out, s_in], cur + m[(s_out, s_in)]);
        }
    }
}

/// Compile a Hamiltonian spec into its (boundary-folded) finite MPO.
pub fn build_mpo(spec: &HamiltonianSpec) -> MpoResult<Mpo> {
    let terms = spec.terms()?;
    Ok(build_from_terms(&terms))
}

fn build_from_terms(t: &TermData) -> Mpo {
    let (l, d) = (t.l, t.d);
    let mut ws = Vec::with_capacity(l);
    for site in 0..l {
        let rows = bond_states(t, site);
        let cols = bond_states(t, site + 1);
        let idx = |states: &[BondState], key: &BondState| -> Option<usize> {
            states.iter().position(|s| s == key)
        };
        let mut w = DenseTensor::zeros(vec![rows.len(), cols.len(), d, d]);
        let id = DMatrix::<C64>::identity(d, d);
        let init_r = idx(&rows, &BondState::Initial);
        let fin_c = idx(&cols, &BondState::Finished);
        if let (Some(fr), Some(fc)) = (idx(&rows, &BondState::Finished), fin_c) {
            place(&mut w, fr, fc, &id);
        }
        if let (Some(ir), Some(ic)) = (init_r, idx(&cols, &BondState::Initial)) {
            place(&mut w, ir, ic, &id);
        }
        if let (Some(ir), Some(fc)) = (init_r, fin_c) {
            place(&mut w, ir, fc, &t.onsite[site]);
        }
        // open a nearest-neighbor channel on the bond to the right
        if site < t.nn.len() {
            for (k, (a, _)) in t.nn[site].iter().enumerate() {
                let ch = idx(&cols, &BondState::Nn { bond: site, term: k }).unwrap();
                place(&mut w, init_r.unwrap(), ch, a);
            }
        }
        // close a channel opened on the bond to the left
        if site >= 1 && site - 1 < t.nn.len() {
            for (k, (_, b)) in t.nn[site - 1].iter().enumerate() {
                let ch = idx(
                    &rows,
                    &BondState::Nn {
                        bond: site - 1,
                        term: k,
                    },
                )
                .unwrap();
                place(&mut w, ch, fin_c.unwrap(), b);
            }
        }
        // next-nearest channels: open, pass through with identity, close
        if site < t.nnn.len() {
            for (k, (a, _)) in t.nnn[site].iter().enumerate() {
                let ch = idx(&cols, &BondState::NnnFirst { site, term: k }).unwrap();
                place(&mut w, init_r.unwrap(), ch, a);
            }
        }
        if site >= 1 && site - 1 < t.nnn.len() {
            for (k, _) in t.nnn[site - 1].iter().enumerate() {
                let from = idx(
                    &rows,
                    &BondState::NnnFirst {
                        site: site - 1,
                        term: k,
                    },
                )
                .unwrap();
                let to = idx(
                    &cols,
                    &BondState::NnnSecond {
                        site: site - 1,
                        term: k,
                    },
                )
                .unwrap();
                place(&mut w, from, to, &id);
            }
        }
        if site >= 2 && site - 2 < t.nnn.len() {
            for (k, (_, b)) in t.nnn[site - 2].iter().enumerate() {
                let from = idx(
                    &rows,
                    &BondState::NnnSecond {
                        site: site - 2,
                        term: k,
                    },
                )
                .unwrap();
                place(&mut w, from, fin_c.unwrap(), b);
            }
        }
        ws.push(w);
    }
    Mpo { l, d, ws }
}

impl Mpo {
    /// The identity operator at bond dimension 1.
    pub fn identity(l: usize, d: usize) -> Self {
        let mut ws = Vec::with_capacity(l);
        for _ in 0..l {
            let mut w = DenseTensor::zeros(vec![1, 1, d, d]);
            for s in 0..d {
                w.set(&[0, 0, s, s], C64::new(1.0, 0.0));
            }
            ws.push(w);
        }
        Self { l, d, ws }
    }

    pub fn from_tensors(ws: Vec<DenseTensor>) -> MpoResult<Self> {
        let l = ws.len();
        let d = ws[0].shape()[2];
        for (i, w) in ws.iter().enumerate() {
            if w.rank() != 4 || w.shape()[2] != d || w.shape()[3] != d {
                return Err(MpoError::Tensor(TensorError::ShapeMismatch(format!(
                    "w[{}] has shape {:?}",
                    i,
                    w.shape()
                ))));
            }
        }
        Ok(Self { l, d, ws })
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn phys_dim(&self) -> usize {
        self.d
    }

    pub fn w(&self, i: usize) -> &DenseTensor {
        &self.ws[i]
    }

    /// Bond extents including the folded boundaries.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.ws.iter().map(|w| w.shape()[0]).collect();
        v.push(self.ws[self.l - 1].shape()[1]);
        v
    }

    /// Dense `d^L x d^L` matrix (oracle support).
    pub fn to_dense(&self) -> MpoResult<DenseTensor> {
        let full = (self.d as u128).pow(self.l as u32);
        if full > (1u128 << 14) {
            return Err(MpoError::TooLarge(full));
        }
        let dim = full as usize;
        // accumulator (bond, out, in)
        let w0 = &self.ws[0];
        let mut acc = w0.reshape(vec![w0.shape()[1], self.d, self.d])?;
        let mut cur = self.d;
        for w in &self.ws[1..] {
            // acc[b, O, I] x w[b, b', o, i] -> (O, I, b', o, i)
            let joined = contract(&acc, &[0], w, &[0])?;
            let joined = joined.permute(&[2, 0, 3, 1, 4])?; // (b', O, o, I, i)
            cur *= self.d;
            acc = joined.reshape(vec![joined.shape()[0], cur, cur])?;
        }
        acc.reshape(vec![dim, dim]).map_err(Into::into)
    }
}

/// Apply an MPO to a state: bond dimensions first multiply, then the result
/// is recompressed per `policy`. Returns the compressed state in Vidal form
/// (normalized) together with the norm of `O|psi>`.
pub fn apply_mpo(
    mpo: &Mpo,
    state: &MpsState,
    policy: &TruncationPolicy,
) -> MpoResult<(MpsState, f64)> {
    if mpo.d != state.phys_dim() || mpo.l != state.len() {
        return Err(MpoError::Tensor(TensorError::ShapeMismatch(format!(
            "mpo ({}, d={}) vs state ({}, d={})",
            mpo.l,
            mpo.d,
            state.len(),
            state.phys_dim()
        ))));
    }
    let ts = state.full_site_tensors();
    let mut new_ts = Vec::with_capacity(mpo.l);
    for (w, t) in mpo.ws.iter().zip(&ts) {
        // w[b, b', s', s] * t[a, s, a'] -> (b, b', s', a, a')
        let joined = contract(w, &[3], t, &[1])?;
        let joined = joined.permute(&[0, 3, 2, 1, 4])?; // (b, a, s', b', a')
        let (bb, aa, d, b2, a2) = (
            joined.shape()[0],
            joined.shape()[1],
            joined.shape()[2],
            joined.shape()[3],
            joined.shape()[4],
        );
        new_ts.push(joined.reshape(vec![bb * aa, d, b2 * a2])?);
    }
    let raw = MpsState::from_site_tensors(new_ts)?;
    let norm = raw.norm();
    let compressed = raw.canonicalize(CanonicalForm::Vidal, policy)?;
    Ok((compressed, norm))
}

/// `<psi| O |psi>` by the standard three-layer transfer contraction.
/// Real part returned; the state is assumed normalized.
pub fn mpo_expectation(mpo: &Mpo, state: &MpsState) -> MpoResult<f64> {
    Ok(mpo_expectation_complex(mpo, state)?.re)
}

pub fn mpo_expectation_complex(mpo: &Mpo, state: &MpsState) -> MpoResult<C64> {
    if mpo.d != state.phys_dim() || mpo.l != state.len() {
        return Err(MpoError::Tensor(TensorError::ShapeMismatch(
            "mpo/state size mismatch".into(),
        )));
    }
    let ts = state.full_site_tensors();
    // c[a, b, a'] starts as the 1x1x1 unit tensor
    let mut c = DenseTensor::new(vec![1, 1, 1], vec![C64::new(1.0, 0.0)]).unwrap();
    for (w, t) in mpo.ws.iter().zip(&ts) {
        let x = contract(&c, &[2], t, &[0])?; // (a, b, s', c')
        let y = contract(w, &[0, 3], &x, &[1, 2])?; // (b', s, a, c')
        c = contract(&t.conj(), &[0, 1], &y, &[2, 1])?; // (c, b', c')
    }
    Ok(c.data()[0])
}

/// Square MPO tensors for one unit cell plus the automaton's entry/exit
/// indices, as needed by the infinite-system algorithms. Next-nearest terms
/// are not supported on the infinite lattice.
#[derive(Debug, Clone)]
pub struct CellMpo {
    pub cell: usize,
    pub d: usize,
    /// `ws[p]` has shape `(D_p, D_{p+1 mod cell}, d, d)`.
    pub ws: Vec<DenseTensor>,
    /// "initial" automaton index per bond (row entry point).
    pub init: Vec<usize>,
    /// "finished" automaton index per bond (column exit point).
    pub fin: Vec<usize>,
}

/// Build the unit-cell MPO for the infinite chain.
pub fn build_cell_mpo(spec: &HamiltonianSpec, cell: usize) -> MpoResult<CellMpo> {
    // expand on a finite chain long enough to read off per-position terms
    let probe = spec.with_length(cell + 2);
    let t = probe.terms()?;
    if t.nnn.iter().any(|v| !v.is_empty()) {
        return Err(MpoError::Model(ModelError::Invalid(
            "next-nearest terms are not supported on the infinite lattice".into(),
        )));
    }
    let d = t.d;
    let id = DMatrix::<C64>::identity(d, d);
    // bond p sits to the LEFT of cell position p; channels on bond p come
    // from the nn terms on the bond between positions p-1 and p
    let n_ch: Vec<usize> = (0..cell)
        .map(|p| {
            let bond = (p + cell - 1) % cell;
            t.nn[bond].len()
        })
        .collect();
    let dims: Vec<usize> = n_ch.iter().map(|c| c + 2).collect();
    let mut ws = Vec::with_capacity(cell);
    for p in 0..cell {
        let right = (p + 1) % cell;
        let (dl, dr) = (dims[p], dims[right]);
        let mut w = DenseTensor::zeros(vec![dl, dr, d, d]);
        place(&mut w, 0, 0, &id); // finished -> finished
        place(&mut w, dl - 1, dr - 1, &id); // initial -> initial
        place(&mut w, dl - 1, 0, &t.onsite[p]); // on-site closes directly
        for (k, (a, _)) in t.nn[p].iter().enumerate() {
            place(&mut w, dl - 1, 1 + k, a); // open channel on right bond
        }
        let left_bond = (p + cell - 1) % cell;
        for (k, (_, b)) in t.nn[left_bond].iter().enumerate() {
            place(&mut w, 1 + k, 0, b); // close channel from left bond
        }
        ws.push(w);
    }
    Ok(CellMpo {
        cell,
        d,
        ws,
        init: dims.iter().map(|&x| x - 1).collect(),
        fin: vec![0; cell],
    })
}
