//! Dense complex tensors with explicit shapes.
//!
//! A [`DenseTensor`] is a flat, row-major array of complex doubles together
//! with its shape. Everything else in this crate is built from three
//! primitives defined here: pairwise [`contract`]ion, [`qr_reduced`], and
//! [`svd_truncated`] with explicit truncation-error accounting.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum TensorError {
    /// The operation requires a rank-2 tensor.
    #[error("expected a matrix-shaped tensor, got rank {0}")]
    NonMatrix(usize),

    /// Every singular value fell below the truncation threshold.
    #[error("all singular values below the truncation threshold")]
    EmptySpectrum,

    /// Paired axes (or data lengths) do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type TensorResult<T> = Result<T, TensorError>;

/// Arbitrary-rank complex array; the universal currency of all tensor modules.
///
/// Data is stored row-major (last index fastest). Shapes are immutable after
/// construction; operations return new tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> TensorResult<Self> {
        if shape.iter().any(|&s| s == 0) {
            return Err(TensorError::ShapeMismatch("zero-extent axis".into()));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(TensorError::ShapeMismatch(format!(
                "shape {:?} wants {} entries, data has {}",
                shape,
                len,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![C64::new(0.0, 0.0); len],
        }
    }

    /// The d x d identity as a rank-2 tensor.
    pub fn identity(d: usize) -> Self {
        let mut t = Self::zeros(vec![d, d]);
        for i in 0..d {
            t.data[i * d + i] = C64::new(1.0, 0.0);
        }
        t
    }

    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            shape: vec![r, c],
            data,
        }
    }

    pub fn to_matrix(&self) -> TensorResult<DMatrix<C64>> {
        if self.rank() != 2 {
            return Err(TensorError::NonMatrix(self.rank()));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        Ok(DMatrix::from_fn(r, c, |i, j| self.data[i * c + j]))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Row-major strides for the current shape.
    fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        debug_assert_eq!(idx.len(), self.rank());
        let s = self.strides();
        let lin: usize = idx.iter().zip(&s).map(|(i, st)| i * st).sum();
        self.data[lin]
    }

    pub fn set(&mut self, idx: &[usize], v: C64) {
        let s = self.strides();
        let lin: usize = idx.iter().zip(&s).map(|(i, st)| i * st).sum();
        self.data[lin] = v;
    }

    /// Reinterpret the flat data under a new shape of equal length.
    pub fn reshape(&self, shape: Vec<usize>) -> TensorResult<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(TensorError::ShapeMismatch(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        Ok(Self {
            shape,
            data: self.data.clone(),
        })
    }

    /// Reorder axes; `axes[k]` names the input axis that lands at position `k`.
    pub fn permute(&self, axes: &[usize]) -> TensorResult<Self> {
        if axes.len() != self.rank() {
            return Err(TensorError::ShapeMismatch(format!(
                "permutation {:?} has wrong length for rank {}",
                axes,
                self.rank()
            )));
        }
        let mut seen = vec![false; axes.len()];
        for &a in axes {
            if a >= self.rank() || seen[a] {
                return Err(TensorError::ShapeMismatch(format!(
                    "invalid permutation {:?}",
                    axes
                )));
            }
            seen[a] = true;
        }
        let new_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let in_strides = self.strides();
        // stride of output axis k in the input layout
        let gather: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; new_shape.len()];
        let mut lin_in = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[lin_in]);
            // increment mixed-radix counter, updating the input offset
            for ax in (0..new_shape.len()).rev() {
                idx[ax] += 1;
                lin_in += gather[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                lin_in -= gather[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self {
            shape: new_shape,
            data,
        })
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, f: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z * f).collect(),
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Little-endian-friendly flat view: interleaved (re, im) doubles.
    pub fn to_interleaved(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.data.len());
        for z in &self.data {
            out.push(z.re);
            out.push(z.im);
        }
        out
    }

    pub fn from_interleaved(shape: Vec<usize>, raw: &[f64]) -> TensorResult<Self> {
        if raw.len() % 2 != 0 {
            return Err(TensorError::ShapeMismatch("odd interleaved length".into()));
        }
        let data: Vec<C64> = raw.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
        Self::new(shape, data)
    }
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Complex matrix product on row-major buffers, `out = a (m x k) * b (k x n)`.
///
/// Large products are dispatched as four real dgemm calls on split
/// real/imaginary planes; small ones use a plain triple loop.
pub(crate) fn zgemm(m: usize, k: usize, n: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    if m * n * k <= 8_192 {
        for i in 0..m {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..k {
                    acc += a[i * k + l] * b[l * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        return;
    }
    let split = |x: &[C64]| -> (Vec<f64>, Vec<f64>) {
        let mut re = Vec::with_capacity(x.len());
        let mut im = Vec::with_capacity(x.len());
        for z in x {
            re.push(z.re);
            im.push(z.im);
        }
        (re, im)
    };
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let mut cr = vec![0.0f64; m * n];
    let mut ci = vec![0.0f64; m * n];
    let (rsa, csa) = (k as isize, 1isize);
    let (rsb, csb) = (n as isize, 1isize);
    let (rsc, csc) = (n as isize, 1isize);
    unsafe {
        // cr = ar*br - ai*bi
        matrixmultiply::dgemm(m, k, n, 1.0, ar.as_ptr(), rsa, csa, br.as_ptr(), rsb, csb, 0.0, cr.as_mut_ptr(), rsc, csc);
        matrixmultiply::dgemm(m, k, n, -1.0, ai.as_ptr(), rsa, csa, bi.as_ptr(), rsb, csb, 1.0, cr.as_mut_ptr(), rsc, csc);
        // ci = ar*bi + ai*br
        matrixmultiply::dgemm(m, k, n, 1.0, ar.as_ptr(), rsa, csa, bi.as_ptr(), rsb, csb, 0.0, ci.as_mut_ptr(), rsc, csc);
        matrixmultiply::dgemm(m, k, n, 1.0, ai.as_ptr(), rsa, csa, br.as_ptr(), rsb, csb, 1.0, ci.as_mut_ptr(), rsc, csc);
    }
    for (o, (&re, &im)) in out.iter_mut().zip(cr.iter().zip(ci.iter())) {
        *o = C64::new(re, im);
    }
}

/// Contract `a` and `b` over the paired axes.
///
/// The output carries the free axes of `a` (in order) followed by the free
/// axes of `b`. Paired axes must have equal extents.
pub fn contract(
    a: &DenseTensor,
    axes_a: &[usize],
    b: &DenseTensor,
    axes_b: &[usize],
) -> TensorResult<DenseTensor> {
    if axes_a.len() != axes_b.len() {
        return Err(TensorError::ShapeMismatch(
            "unequal numbers of contraction axes".into(),
        ));
    }
    for (&x, &y) in axes_a.iter().zip(axes_b) {
        if x >= a.rank() || y >= b.rank() {
            return Err(TensorError::ShapeMismatch("contraction axis out of range".into()));
        }
        if a.shape[x] != b.shape[y] {
            return Err(TensorError::ShapeMismatch(format!(
                "axis extents differ: a[{}]={} vs b[{}]={}",
                x, a.shape[x], y, b.shape[y]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|i| !axes_a.contains(i)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|i| !axes_b.contains(i)).collect();

    let mut perm_a = free_a.clone();
    perm_a.extend_from_slice(axes_a);
    let mut perm_b = axes_b.to_vec();
    perm_b.extend_from_slice(&free_b);

    let pa = a.permute(&perm_a)?;
    let pb = b.permute(&perm_b)?;

    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axes_a.iter().map(|&i| a.shape[i]).product();
    let n: usize = free_b.iter().map(|&i| b.shape[i]).product();

    let mut out = vec![C64::new(0.0, 0.0); m * n];
    zgemm(m, k, n, pa.data(), pb.data(), &mut out);

    let mut shape: Vec<usize> = free_a.iter().map(|&i| a.shape[i]).collect();
    shape.extend(free_b.iter().map(|&i| b.shape[i]));
    if shape.is_empty() {
        shape.push(1);
    }
    DenseTensor::new(shape, out)
}

/// What to keep after an SVD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Maximum number of singular values to keep.
    pub chi_max: usize,
    /// Discard singular values below this threshold.
    pub eps: f64,
    /// Rescale the kept spectrum back to unit 2-norm.
    pub renormalize: bool,
}

impl TruncationPolicy {
    pub fn new(chi_max: usize) -> Self {
        Self {
            chi_max,
            eps: 1e-10,
            renormalize: true,
        }
    }

    /// Keep everything that is numerically nonzero.
    pub fn exact() -> Self {
        Self {
            chi_max: usize::MAX / 2,
            eps: 1e-14,
            renormalize: true,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_renormalize(mut self, r: bool) -> Self {
        self.renormalize = r;
        self
    }
}

/// Truncated singular value decomposition `m ~ u * diag(s) * vh`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Isometry with orthonormal columns.
    pub u: DenseTensor,
    /// Kept singular values, descending.
    pub s: Vec<f64>,
    /// Isometry with orthonormal rows.
    pub vh: DenseTensor,
    /// Sum of squared discarded singular values.
    pub discarded_weight: f64,
}

/// SVD with truncation, deterministic ordering, and a fixed sign gauge.
///
/// Columns of `u` are phase-fixed so that their largest-magnitude entry is
/// real and positive (the compensating phase goes into `vh`), which keeps
/// decompositions reproducible across runs. Ties at the truncation cut are
/// broken by original column index.
pub fn svd_truncated(m: &DenseTensor, policy: &TruncationPolicy) -> TensorResult<SvdResult> {
    if m.rank() != 2 {
        return Err(TensorError::NonMatrix(m.rank()));
    }
    let mat = m.to_matrix()?;
    let (rows, cols) = mat.shape();
    let (u_full, sv, vt_full) = match mat.clone().try_svd(true, true, f64::EPSILON, 10_000) {
        Some(svd) => (
            svd.u.expect("u requested"),
            svd.singular_values.iter().copied().collect::<Vec<f64>>(),
            svd.v_t.expect("v_t requested"),
        ),
        None => svd_via_gram(&mat),
    };

    let r = sv.len();
    let mut order: Vec<usize> = (0..r).collect();
    // descending by value, stable in original index
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(std::cmp::Ordering::Equal));

    let above: usize = order.iter().filter(|&&i| sv[i] >= policy.eps).count();
    let kept = above.min(policy.chi_max);
    if kept == 0 {
        return Err(TensorError::EmptySpectrum);
    }

    let mut s: Vec<f64> = Vec::with_capacity(kept);
    let mut u = DMatrix::<C64>::zeros(rows, kept);
    let mut vh = DMatrix::<C64>::zeros(kept, cols);
    for (k, &oi) in order.iter().take(kept).enumerate() {
        s.push(sv[oi]);
        let ucol = u_full.column(oi);
        // phase gauge: largest-magnitude entry of the left vector real-positive
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for (i, z) in ucol.iter().enumerate() {
            let mag = z.norm();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        let phase = if best_mag > 0.0 {
            ucol[best] / best_mag
        } else {
            C64::new(1.0, 0.0)
        };
        let inv_phase = phase.conj();
        for i in 0..rows {
            u[(i, k)] = ucol[i] * inv_phase;
        }
        for j in 0..cols {
            vh[(k, j)] = vt_full[(oi, j)] * phase;
        }
    }
    let discarded_weight: f64 = order.iter().skip(kept).map(|&i| sv[i] * sv[i]).sum();
    if policy.renormalize {
        let nrm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 0.0 {
            for x in &mut s {
                *x /= nrm;
            }
        }
    }
    Ok(SvdResult {
        u: DenseTensor::from_matrix(&u),
        s,
        vh: DenseTensor::from_matrix(&vh),
        discarded_weight,
    })
}

// Fallback route when the iterative SVD does not converge: singular data
// from the Hermitian eigendecomposition of M^H M, with left vectors
// recovered as M v / s (zero-padded columns for the numerical null space).
fn svd_via_gram(mat: &DMatrix<C64>) -> (DMatrix<C64>, Vec<f64>, DMatrix<C64>) {
    let (rows, cols) = mat.shape();
    let r = rows.min(cols);
    let gram = mat.adjoint() * mat;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut u = DMatrix::<C64>::zeros(rows, r);
    let mut vt = DMatrix::<C64>::zeros(r, cols);
    let mut sv = vec![0.0f64; r];
    for (k, &oi) in order.iter().take(r).enumerate() {
        let s = eig.eigenvalues[oi].max(0.0).sqrt();
        sv[k] = s;
        let v = eig.eigenvectors.column(oi);
        for j in 0..cols {
            vt[(k, j)] = v[j].conj();
        }
        if s > 1e-300 {
            let mv = mat * v;
            for i in 0..rows {
                u[(i, k)] = mv[i] / s;
            }
        }
    }
    (u, sv, vt)
}

/// Reduced QR with a sign-fixed (real, non-negative) diagonal of `r`.
pub fn qr_reduced(m: &DenseTensor) -> TensorResult<(DenseTensor, DenseTensor)> {
    if m.rank() != 2 {
        return Err(TensorError::NonMatrix(m.rank()));
    }
    let mat = m.to_matrix()?;
    let (rows, cols) = mat.shape();
    let k = rows.min(cols);
    let qr = mat.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    // fix phases so diag(r) is real and non-negative
    for i in 0..k {
        let d = r[(i, i)];
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            let inv = phase.conj();
            for j in 0..cols {
                r[(i, j)] *= inv;
            }
            for row in 0..rows {
                q[(row, i)] *= phase;
            }
        }
    }
    Ok((DenseTensor::from_matrix(&q), DenseTensor::from_matrix(&r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_tensor(shape: Vec<usize>, seed: u64) -> DenseTensor {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let len = shape.iter().product();
        let data = (0..len)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        DenseTensor::new(shape, data).unwrap()
    }

    #[test]
    fn svd_identity_keeps_unit_spectrum() {
        let t = DenseTensor::identity(2);
        let r = svd_truncated(&t, &TruncationPolicy::new(2).with_renormalize(false)).unwrap();
        assert_eq!(r.s.len(), 2);
        assert!((r.s[0] - 1.0).abs() < 1e-12 && (r.s[1] - 1.0).abs() < 1e-12);
        assert!(r.discarded_weight.abs() < 1e-15);
    }

    #[test]
    fn svd_rank_one_outer_product() {
        // u v^T of unit vectors has exactly one singular value equal to one
        let u = [C64::new(0.6, 0.0), C64::new(0.8, 0.0)];
        let v = [C64::new(0.0, 1.0), C64::new(0.0, 0.0)];
        let mut data = Vec::new();
        for a in &u {
            for b in &v {
                data.push(a * b);
            }
        }
        let t = DenseTensor::new(vec![2, 2], data).unwrap();
        let r = svd_truncated(&t, &TruncationPolicy::new(4).with_eps(0.0).with_renormalize(false))
            .unwrap();
        assert!((r.s[0] - 1.0).abs() < 1e-12);
        for &s in &r.s[1..] {
            assert!(s < 1e-14);
        }
    }

    #[test]
    fn svd_truncation_error_matches_gram_eigenvalues() {
        // reconstruction error against an independent eigen-decomposition of M^H M
        let t = random_tensor(vec![6, 4], 7);
        let m = t.to_matrix().unwrap();
        let r = svd_truncated(&t, &TruncationPolicy::new(2).with_eps(0.0).with_renormalize(false))
            .unwrap();
        let u = r.u.to_matrix().unwrap();
        let vh = r.vh.to_matrix().unwrap();
        let mut rec = DMatrix::<C64>::zeros(6, 4);
        for k in 0..r.s.len() {
            for i in 0..6 {
                for j in 0..4 {
                    rec[(i, j)] += u[(i, k)] * C64::new(r.s[k], 0.0) * vh[(k, j)];
                }
            }
        }
        let err2 = (m.clone() - rec).norm_squared();

        let gram = m.adjoint() * m.clone();
        let eig = gram.symmetric_eigen();
        let mut evs: Vec<f64> = eig.eigenvalues.iter().map(|x| x.max(0.0)).collect();
        evs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let expected: f64 = evs.iter().skip(2).sum();
        assert!(
            (err2 - expected).abs() < 1e-10,
            "err2={err2} expected={expected}"
        );
        assert!((r.discarded_weight - expected).abs() < 1e-10);
    }

    #[test]
    fn svd_empty_spectrum_is_an_error() {
        let t = DenseTensor::zeros(vec![3, 3]);
        let e = svd_truncated(&t, &TruncationPolicy::new(3).with_eps(1e-12));
        assert!(matches!(e, Err(TensorError::EmptySpectrum)));
    }

    #[test]
    fn svd_rejects_non_matrix() {
        let t = DenseTensor::zeros(vec![2, 2, 2]);
        assert!(matches!(
            svd_truncated(&t, &TruncationPolicy::new(2)),
            Err(TensorError::NonMatrix(3))
        ));
    }

    #[test]
    fn svd_renormalize_gives_unit_spectrum_norm() {
        let t = random_tensor(vec![5, 5], 3);
        let r = svd_truncated(&t, &TruncationPolicy::new(3).with_eps(0.0)).unwrap();
        let n2: f64 = r.s.iter().map(|x| x * x).sum();
        assert!((n2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qr_identity() {
        let t = DenseTensor::identity(3);
        let (q, r) = qr_reduced(&t).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((q.get(&[i, j]).re - expect).abs() < 1e-14);
                assert!((r.get(&[i, j]).re - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn qr_column_vector_is_pythagorean() {
        let t = DenseTensor::new(vec![2, 1], vec![C64::new(3.0, 0.0), C64::new(4.0, 0.0)]).unwrap();
        let (q, r) = qr_reduced(&t).unwrap();
        assert!((q.get(&[0, 0]).re - 0.6).abs() < 1e-14);
        assert!((q.get(&[1, 0]).re - 0.8).abs() < 1e-14);
        assert!((r.get(&[0, 0]).re - 5.0).abs() < 1e-14);
    }

    #[test]
    fn qr_reconstructs_random_matrix() {
        let t = random_tensor(vec![8, 3], 11);
        let (q, r) = qr_reduced(&t).unwrap();
        let prod = contract(&q, &[1], &r, &[0]).unwrap();
        let mut diff = 0.0;
        for (a, b) in prod.data().iter().zip(t.data()) {
            diff += (a - b).norm_sqr();
        }
        assert!(diff.sqrt() < 1e-12);
        // q^H q = 1
        let qhq = contract(&q.conj(), &[0], &q, &[0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((qhq.get(&[i, j]) - C64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
        // r upper triangular, non-negative real diagonal
        for i in 0..3 {
            for j in 0..3 {
                if j < i {
                    assert!(r.get(&[i, j]).norm() < 1e-13);
                }
            }
            assert!(r.get(&[i, i]).im.abs() < 1e-13 && r.get(&[i, i]).re >= 0.0);
        }
    }

    #[test]
    fn contract_vector_dot() {
        let a = DenseTensor::new(vec![2], vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)]).unwrap();
        let b = DenseTensor::new(vec![2], vec![C64::new(3.0, 0.0), C64::new(4.0, 0.0)]).unwrap();
        let c = contract(&a, &[0], &b, &[0]).unwrap();
        assert_eq!(c.shape(), &[1]);
        assert!((c.data()[0] - C64::new(11.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn contract_with_identity_is_identity() {
        let a = random_tensor(vec![3, 3], 5);
        let id = DenseTensor::identity(3);
        let c = contract(&a, &[1], &id, &[0]).unwrap();
        for (x, y) in c.data().iter().zip(a.data()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn contract_matches_nested_loops() {
        let a = random_tensor(vec![3, 4, 2], 21);
        let b = random_tensor(vec![4, 5, 2], 22);
        // contract a axes [1,2] with b axes [0,2] -> shape [3,5]
        let c = contract(&a, &[1, 2], &b, &[0, 2]).unwrap();
        assert_eq!(c.shape(), &[3, 5]);
        for i in 0..3 {
            for j in 0..5 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..4 {
                    for l in 0..2 {
                        acc += a.get(&[i, k, l]) * b.get(&[k, j, l]);
                    }
                }
                assert!((c.get(&[i, j]) - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn contract_shape_mismatch_is_an_error() {
        let a = random_tensor(vec![3, 4], 1);
        let b = random_tensor(vec![5, 3], 2);
        assert!(contract(&a, &[1], &b, &[0]).is_err());
    }

    #[test]
    fn permute_roundtrip() {
        let a = random_tensor(vec![2, 3, 4], 9);
        let p = a.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        let back = p.permute(&[1, 2, 0]).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn zgemm_large_path_matches_naive() {
        let a = random_tensor(vec![37, 41], 100);
        let b = random_tensor(vec![41, 29], 101);
        let c = contract(&a, &[1], &b, &[0]).unwrap();
        for i in (0..37).step_by(9) {
            for j in (0..29).step_by(7) {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..41 {
                    acc += a.get(&[i, k]) * b.get(&[k, j]);
                }
                assert!((c.get(&[i, j]) - acc).norm() < 1e-10);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn weight_conservation(seed in 0u64..500, rows in 2usize..7, cols in 2usize..7, chi in 1usize..5) {
            // discarded_weight + sum of kept s^2 = ||M||_F^2
            let t = random_tensor(vec![rows, cols], seed);
            let r = svd_truncated(&t, &TruncationPolicy { chi_max: chi, eps: 0.0, renormalize: false }).unwrap();
            let kept: f64 = r.s.iter().map(|x| x * x).sum();
            let total: f64 = t.data().iter().map(|z| z.norm_sqr()).sum();
            proptest::prop_assert!((kept + r.discarded_weight - total).abs() < 1e-10);
        }

        #[test]
        fn full_rank_svd_reconstructs(seed in 0u64..200, rows in 2usize..6, cols in 2usize..6) {
            let t = random_tensor(vec![rows, cols], seed);
            let r = svd_truncated(&t, &TruncationPolicy { chi_max: rows.min(cols), eps: 0.0, renormalize: false }).unwrap();
            let us = {
                let mut u = r.u.clone();
                let kept = r.s.len();
                let urows = u.shape()[0];
                for i in 0..urows {
                    for k in 0..kept {
                        let v = u.get(&[i, k]) * r.s[k];
                        u.set(&[i, k], v);
                    }
                }
                u
            };
            let rec = contract(&us, &[1], &r.vh, &[0]).unwrap();
            let mut err = 0.0;
            for (a, b) in rec.data().iter().zip(t.data()) {
                err += (a - b).norm_sqr();
            }
            proptest::prop_assert!(err.sqrt() < 1e-10);
        }

        #[test]
        fn contract_pairing_order_agrees(seed in 0u64..200) {
            // (a.b).c == a.(b.c) entry-wise for a small chain
            let a = random_tensor(vec![3, 4], seed);
            let b = random_tensor(vec![4, 5], seed + 1000);
            let c = random_tensor(vec![5, 2], seed + 2000);
            let left = contract(&contract(&a, &[1], &b, &[0]).unwrap(), &[1], &c, &[0]).unwrap();
            let right = contract(&a, &[1], &contract(&b, &[1], &c, &[0]).unwrap(), &[0]).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                proptest::prop_assert!((x - y).norm() < 1e-10);
            }
        }
    }
}
