//! Declarative Hamiltonian specifications and the local-operator registry.
//!
//! A [`HamiltonianSpec`] names a lattice model and its couplings; solvers
//! consume it through [`HamiltonianSpec::terms`], a normalized list of
//! on-site matrices and nearest-/next-nearest-neighbor product terms. Sign
//! conventions are fixed here once: hopping enters as `-t (b†_i b_{i+1} +
//! h.c.)`, the Ising chain as `+J Σ Z_i Z_{i+1} - g_x Σ X_i - g_z Σ Z_i`
//! with `Z|0> = +|0>`, so `J = +1` orders antiferromagnetically.

use crate::tensor::{C64, DenseTensor};
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown model tag `{0}`; valid tags: TFIM, Heisenberg, ExtendedBoseHubbard, DEBHM, Custom")]
    UnknownModel(String),

    #[error("model `{model}` is missing coupling `{name}`")]
    MissingCoupling { model: String, name: String },

    #[error("unknown operator name `{0}` for local dimension {1}")]
    UnknownOperator(String, usize),

    #[error("invalid spec: {0}")]
    Invalid(String),
}

pub type ModelResult<T> = Result<T, ModelError>;

/// Common local operators as dense matrices, row index = bra.
pub mod ops {
    use super::*;

    pub fn identity(d: usize) -> DMatrix<C64> {
        DMatrix::identity(d, d)
    }

    pub fn pauli_x() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[
            C64::new(0.0, 0.0), C64::new(1.0, 0.0),
            C64::new(1.0, 0.0), C64::new(0.0, 0.0),
        ])
    }

    pub fn pauli_y() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[
            C64::new(0.0, 0.0), C64::new(0.0, -1.0),
            C64::new(0.0, 1.0), C64::new(0.0, 0.0),
        ])
    }

    pub fn pauli_z() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[
            C64::new(1.0, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(-1.0, 0.0),
        ])
    }

    /// Raising operator |1><0|.
    pub fn sigma_plus() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[
            C64::new(0.0, 0.0), C64::new(0.0, 0.0),
            C64::new(1.0, 0.0), C64::new(0.0, 0.0),
        ])
    }

    /// Lowering operator |0><1|.
    pub fn sigma_minus() -> DMatrix<C64> {
        sigma_plus().transpose()
    }

    /// Bosonic annihilation operator truncated at occupation `d - 1`.
    pub fn boson_b(d: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(d, d);
        for k in 0..d - 1 {
            m[(k, k + 1)] = C64::new(((k + 1) as f64).sqrt(), 0.0);
        }
        m
    }

    pub fn boson_bdag(d: usize) -> DMatrix<C64> {
        boson_b(d).adjoint()
    }

    /// Number operator diag(0, 1, .., d-1).
    pub fn boson_n(d: usize) -> DMatrix<C64> {
        DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(i as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// n(n-1), the on-site interaction kernel.
    pub fn boson_nn1(d: usize) -> DMatrix<C64> {
        DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new((i * i.saturating_sub(1)) as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn as_tensor(m: &DMatrix<C64>) -> DenseTensor {
        DenseTensor::from_matrix(m)
    }

    /// Look an operator up by name for local dimension `d`.
    pub fn by_name(name: &str, d: usize) -> ModelResult<DMatrix<C64>> {
        let half = C64::new(0.5, 0.0);
        match (name, d) {
            ("I", _) => Ok(identity(d)),
            ("X", 2) => Ok(pauli_x()),
            ("Y", 2) => Ok(pauli_y()),
            ("Z", 2) => Ok(pauli_z()),
            ("Sx", 2) => Ok(pauli_x() * half),
            ("Sy", 2) => Ok(pauli_y() * half),
            ("Sz", 2) => Ok(pauli_z() * half),
            ("Sp", 2) => Ok(sigma_plus()),
            ("Sm", 2) => Ok(sigma_minus()),
            ("b", _) => Ok(boson_b(d)),
            ("bdag", _) => Ok(boson_bdag(d)),
            ("n", _) => Ok(boson_n(d)),
            ("nn1", _) => Ok(boson_nn1(d)),
            _ => Err(ModelError::UnknownOperator(name.to_string(), d)),
        }
    }
}

/// A custom one-site term `c * O[site]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneSiteTerm {
    pub site: usize,
    pub op: String,
    pub coeff: f64,
}

/// A custom product term `c * A[site] B[site + range]` with range 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSiteTerm {
    pub site: usize,
    pub op_a: String,
    pub op_b: String,
    pub coeff: f64,
    /// 1 = nearest neighbor, 2 = next-nearest neighbor.
    pub range: usize,
}

/// Supported lattice models, open boundaries throughout.
#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianSpec {
    /// `J Σ Z Z - g_x Σ X - g_z Σ Z` on `d = 2` sites.
    Tfim { l: usize, j: f64, g_x: f64, g_z: f64 },
    /// `Σ_i J_x Sx Sx + J_y Sy Sy + J_z Sz Sz - h Σ Sz`, spin-1/2.
    Heisenberg { l: usize, j_x: f64, j_y: f64, j_z: f64, h: f64 },
    /// `-t Σ (b† b + h.c.) + U/2 Σ n(n-1) + V Σ n n - mu Σ n`, occupation
    /// capped at `n_max` so `d = n_max + 1`.
    ExtendedBoseHubbard { l: usize, t: f64, u: f64, v: f64, mu: f64, n_max: usize },
    /// Hardcore bosons with dimerized hoppings: bond `b` (0-based) carries
    /// `J - delta_j * (-1)^b`, so the first bond is the weak one for
    /// `delta_j > 0`; plus `V Σ n n`.
    Debhm { l: usize, j: f64, delta_j: f64, v: f64 },
    /// Arbitrary one-site and two-site (range 1 or 2) terms by operator name.
    Custom {
        l: usize,
        d: usize,
        one_site: Vec<OneSiteTerm>,
        two_site: Vec<TwoSiteTerm>,
    },
}

/// Normalized term data consumed by the MPO compiler and the Trotter layer
/// builder: per-site on-site matrices and per-bond factor lists, with
/// coefficients folded into the left factor.
#[derive(Debug, Clone)]
pub struct TermData {
    pub l: usize,
    pub d: usize,
    pub onsite: Vec<DMatrix<C64>>,
    /// `nn[b]`: product terms on sites `(b, b+1)`.
    pub nn: Vec<Vec<(DMatrix<C64>, DMatrix<C64>)>>,
    /// `nnn[i]`: product terms on sites `(i, i+2)`.
    pub nnn: Vec<Vec<(DMatrix<C64>, DMatrix<C64>)>>,
}

impl HamiltonianSpec {
    /// Construct from a model tag and a named coupling map (config-file path).
    pub fn from_named(
        tag: &str,
        l: usize,
        couplings: &BTreeMap<String, f64>,
        n_max: Option<usize>,
    ) -> ModelResult<Self> {
        let want = |name: &str| -> ModelResult<f64> {
            couplings
                .get(name)
                .copied()
                .ok_or_else(|| ModelError::MissingCoupling {
                    model: tag.to_string(),
                    name: name.to_string(),
                })
        };
        let opt = |name: &str, default: f64| couplings.get(name).copied().unwrap_or(default);
        match tag {
            "TFIM" => Ok(Self::Tfim {
                l,
                j: want("J")?,
                g_x: want("g_x")?,
                g_z: opt("g_z", 0.0),
            }),
            "Heisenberg" => Ok(Self::Heisenberg {
                l,
                j_x: want("J_x")?,
                j_y: want("J_y")?,
                j_z: want("J_z")?,
                h: opt("h", 0.0),
            }),
            "ExtendedBoseHubbard" => Ok(Self::ExtendedBoseHubbard {
                l,
                t: want("t")?,
                u: want("U")?,
                v: want("V")?,
                mu: opt("mu", 0.0),
                n_max: n_max.ok_or_else(|| ModelError::MissingCoupling {
                    model: tag.to_string(),
                    name: "n_max".to_string(),
                })?,
            }),
            "DEBHM" => Ok(Self::Debhm {
                l,
                j: want("J")?,
                delta_j: want("delta_J")?,
                v: want("V")?,
            }),
            other => Err(ModelError::UnknownModel(other.to_string())),
        }
    }

    pub fn length(&self) -> usize {
        match self {
            Self::Tfim { l, .. }
            | Self::Heisenberg { l, .. }
            | Self::ExtendedBoseHubbard { l, .. }
            | Self::Debhm { l, .. }
            | Self::Custom { l, .. } => *l,
        }
    }

    pub fn phys_dim(&self) -> usize {
        match self {
            Self::Tfim { .. } | Self::Heisenberg { .. } | Self::Debhm { .. } => 2,
            Self::ExtendedBoseHubbard { n_max, .. } => n_max + 1,
            Self::Custom { d, .. } => *d,
        }
    }

    pub fn with_length(&self, l: usize) -> Self {
        let mut s = self.clone();
        match &mut s {
            Self::Tfim { l: x, .. }
            | Self::Heisenberg { l: x, .. }
            | Self::ExtendedBoseHubbard { l: x, .. }
            | Self::Debhm { l: x, .. }
            | Self::Custom { l: x, .. } => *x = l,
        }
        s
    }

    /// Hopping coefficient on bond `b` for position-dependent models; the
    /// first bond is the weak one for positive `delta_j`.
    pub fn bond_hopping(&self, b: usize) -> f64 {
        match self {
            Self::Debhm { j, delta_j, .. } => {
                j + delta_j * if b % 2 == 0 { -1.0 } else { 1.0 }
            }
            _ => 0.0,
        }
    }

    /// Expand into per-site / per-bond term lists.
    pub fn terms(&self) -> ModelResult<TermData> {
        let l = self.length();
        let d = self.phys_dim();
        if l == 0 {
            return Err(ModelError::Invalid("need at least one site".into()));
        }
        let zero = DMatrix::<C64>::zeros(d, d);
        let mut onsite = vec![zero.clone(); l];
        let mut nn: Vec<Vec<(DMatrix<C64>, DMatrix<C64>)>> = vec![Vec::new(); l.saturating_sub(1)];
        let mut nnn: Vec<Vec<(DMatrix<C64>, DMatrix<C64>)>> =
            vec![Vec::new(); l.saturating_sub(2)];
        let c = |x: f64| C64::new(x, 0.0);
        match self {
            Self::Tfim { j, g_x, g_z, .. } => {
                let x = ops::pauli_x();
                let z = ops::pauli_z();
                for site in onsite.iter_mut() {
                    *site = &x * c(-g_x) + &z * c(-g_z);
                }
                if *j != 0.0 {
                    for bond in nn.iter_mut() {
                        bond.push((&z * c(*j), z.clone()));
                    }
                }
            }
            Self::Heisenberg { j_x, j_y, j_z, h, .. } => {
                let sx = ops::by_name("Sx", 2)?;
                let sy = ops::by_name("Sy", 2)?;
                let sz = ops::by_name("Sz", 2)?;
                for site in onsite.iter_mut() {
                    *site = &sz * c(-h);
                }
                for bond in nn.iter_mut() {
                    if *j_x != 0.0 {
                        bond.push((&sx * c(*j_x), sx.clone()));
                    }
                    if *j_y != 0.0 {
                        bond.push((&sy * c(*j_y), sy.clone()));
                    }
                    if *j_z != 0.0 {
                        bond.push((&sz * c(*j_z), sz.clone()));
                    }
                }
            }
            Self::ExtendedBoseHubbard { t, u, v, mu, .. } => {
                let b = ops::boson_b(d);
                let bd = ops::boson_bdag(d);
                let n = ops::boson_n(d);
                let nn1 = ops::boson_nn1(d);
                for site in onsite.iter_mut() {
                    *site = &nn1 * c(u / 2.0) + &n * c(-mu);
                }
                for bond in nn.iter_mut() {
                    if *t != 0.0 {
                        bond.push((&bd * c(-t), b.clone()));
                        bond.push((&b * c(-t), bd.clone()));
                    }
                    if *v != 0.0 {
                        bond.push((&n * c(*v), n.clone()));
                    }
                }
            }
            Self::Debhm { j, delta_j, v, .. } => {
                let b = ops::boson_b(2);
                let bd = ops::boson_bdag(2);
                let n = ops::boson_n(2);
                for (bi, bond) in nn.iter_mut().enumerate() {
                    // J + delta_J * (-1)^(b+1) in 0-based bond numbering: the
                    // first bond is J - delta_J
                    let jb = j + delta_j * if bi % 2 == 0 { -1.0 } else { 1.0 };
                    if jb != 0.0 {
                        bond.push((&bd * c(-jb), b.clone()));
                        bond.push((&b * c(-jb), bd.clone()));
                    }
                    if *v != 0.0 {
                        bond.push((&n * c(*v), n.clone()));
                    }
                }
            }
            Self::Custom {
                one_site, two_site, ..
            } => {
                for t in one_site {
                    if t.site >= l {
                        return Err(ModelError::Invalid(format!(
                            "one-site term at {} beyond length {}",
                            t.site, l
                        )));
                    }
                    let m = ops::by_name(&t.op, d)?;
                    onsite[t.site] += &m * c(t.coeff);
                }
                for t in two_site {
                    let a = ops::by_name(&t.op_a, d)?;
                    let b = ops::by_name(&t.op_b, d)?;
                    match t.range {
                        1 => {
                            if t.site + 1 >= l {
                                return Err(ModelError::Invalid(format!(
                                    "bond term at {} beyond length {}",
                                    t.site, l
                                )));
                            }
                            nn[t.site].push((&a * c(t.coeff), b));
                        }
                        2 => {
                            if t.site + 2 >= l {
                                return Err(ModelError::Invalid(format!(
                                    "next-nearest term at {} beyond length {}",
                                    t.site, l
                                )));
                            }
                            nnn[t.site].push((&a * c(t.coeff), b));
                        }
                        r => {
                            return Err(ModelError::Invalid(format!(
                                "unsupported interaction range {}",
                                r
                            )))
                        }
                    }
                }
            }
        }
        Ok(TermData { l, d, onsite, nn, nnn })
    }
}
