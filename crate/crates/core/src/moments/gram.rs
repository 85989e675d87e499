use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, SymmetricEigen};

use super::MomentFunction;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::reduce::block_sum;
use crate::rng::DEFAULT_BLOCK;

/// Symmetric `r × r` matrix `(1/n) Σ_i ∇φ(x_i) ∇φ(x_i)ᵀ`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    r: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    pub fn from_entries(r: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != r * r {
            return Err(Error::mismatch("gram entries", r * r, entries.len()));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gram entry ({}, {})", i / r, i % r)));
        }
        Ok(Self { r, entries })
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[k * self.r + l]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.r).map(|k| self.get(k, k)).sum()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.r, self.r, &self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.to_dmatrix())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Largest `|G_kl − G_lk|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0_f64;
        for k in 0..self.r {
            for l in 0..k {
                worst = worst.max((self.get(k, l) - self.get(l, k)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }
}

/// Gram matrix of an ensemble, deterministic reduction.
pub fn gram(ensemble: &ParticleEnsemble, phi: &dyn MomentFunction) -> Result<GramMatrix> {
    gram_with(ensemble, phi, DEFAULT_BLOCK, true)
}

pub fn gram_with(
    ensemble: &ParticleEnsemble,
    phi: &dyn MomentFunction,
    block: usize,
    deterministic: bool,
) -> Result<GramMatrix> {
    if ensemble.dim() != phi.dim() {
        return Err(Error::mismatch("ensemble dimension", phi.dim(), ensemble.dim()));
    }
    let stats = ensemble_stats(ensemble.as_slice(), phi, StatsRequest::GRAM, block, deterministic)?;
    Ok(stats.gram.expect("requested"))
}

/// Which ensemble averages to accumulate in one pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct StatsRequest {
    pub phi: bool,
    pub gram: bool,
    pub laplacian: bool,
}

impl StatsRequest {
    pub const PHI: Self = Self {
        phi: true,
        gram: false,
        laplacian: false,
    };
    pub const GRAM: Self = Self {
        phi: false,
        gram: true,
        laplacian: false,
    };
    pub const PHI_GRAM: Self = Self {
        phi: true,
        gram: true,
        laplacian: false,
    };
}

#[derive(Debug, Clone, Default)]
pub(crate) struct EnsembleStats {
    pub phi_mean: Option<Vec<f64>>,
    pub gram: Option<GramMatrix>,
    pub lap_mean: Option<Vec<f64>>,
}

/// Per-block scratch plus accumulation of the requested averages into
/// `acc = [Σφ (r) | Σ∇φ∇φᵀ upper (r²) | ΣΔφ (r)]`.
pub(crate) struct StatsScratch {
    phi: Vec<f64>,
    jac: Vec<f64>,
    lap: Vec<f64>,
    req: StatsRequest,
    r: usize,
    d: usize,
    /// Column buffers `[φ_k over rows]` and `[∂_q φ_k over rows]` for
    /// the batched path.
    phi_cols: Vec<f64>,
    jac_cols: Vec<f64>,
}

/// Batches whose Jacobian columns would exceed this many values go row by row.
const COLUMN_LIMIT: usize = 1 << 16;

impl StatsScratch {
    pub fn new(phi: &dyn MomentFunction, req: StatsRequest) -> Self {
        let (r, d) = (phi.n_moments(), phi.dim());
        Self {
            phi: vec![0.0; r],
            jac: vec![0.0; if req.gram { r * d } else { 0 }],
            lap: vec![0.0; if req.laplacian { r } else { 0 }],
            req,
            r,
            d,
            phi_cols: Vec::new(),
            jac_cols: Vec::new(),
        }
    }

    /// Adds every row of `rows` (`d` values each). Small moment maps are
    /// evaluated into columns first so that the sums run over contiguous
    /// particle values.
    pub fn add_rows(&mut self, phi: &dyn MomentFunction, rows: &[f64], acc: &mut [f64]) -> Result<()> {
        let (r, d) = (self.r, self.d);
        let n = rows.len() / d;
        if !self.req.gram || self.req.laplacian || r * d * n > COLUMN_LIMIT || n < 8 {
            for x in rows.chunks_exact(d) {
                self.add(phi, x, acc)?;
            }
            return Ok(());
        }
        self.phi_cols.resize(r * n, 0.0);
        self.jac_cols.resize(r * d * n, 0.0);
        let cols = if self.req.phi { Some(&mut self.phi_cols[..]) } else { None };
        phi.columns(rows, cols, &mut self.jac_cols)?;
        if self.req.phi {
            for (a, col) in acc[..r].iter_mut().zip(self.phi_cols.chunks_exact(n)) {
                *a += sum(col);
            }
        }
        let g = &mut acc[r..r + r * r];
        for k in 0..r {
            for l in k..r {
                let mut s = 0.0;
                for q in 0..d {
                    let a = &self.jac_cols[(k * d + q) * n..(k * d + q + 1) * n];
                    let b = &self.jac_cols[(l * d + q) * n..(l * d + q + 1) * n];
                    s += dot(a, b);
                }
                g[k * r + l] += s;
            }
        }
        Ok(())
    }

    pub fn acc_len(r: usize) -> usize {
        2 * r + r * r
    }

    pub fn add(&mut self, phi: &dyn MomentFunction, x: &[f64], acc: &mut [f64]) -> Result<()> {
        let r = self.r;
        match (self.req.phi, self.req.gram) {
            (true, true) => phi.eval_and_jacobian(x, &mut self.phi, &mut self.jac)?,
            (true, false) => phi.eval(x, &mut self.phi)?,
            (false, true) => phi.jacobian(x, &mut self.jac)?,
            (false, false) => {}
        }
        if self.req.phi {
            for (a, v) in acc[..r].iter_mut().zip(&self.phi) {
                *a += v;
            }
        }
        if self.req.gram {
            add_outer_upper(&self.jac, r, self.d, &mut acc[r..r + r * r]);
        }
        if self.req.laplacian {
            phi.laplacian(x, &mut self.lap)?;
            for (a, v) in acc[r + r * r..].iter_mut().zip(&self.lap) {
                *a += v;
            }
        }
        Ok(())
    }

    /// Turns summed accumulators over `n` particles into averages.
    pub fn finish(req: StatsRequest, r: usize, mut acc: Vec<f64>, n: usize) -> Result<EnsembleStats> {
        let inv = 1.0 / n as f64;
        acc.iter_mut().for_each(|v| *v *= inv);
        let mut out = EnsembleStats::default();
        if req.phi {
            let m = acc[..r].to_vec();
            if let Some(k) = m.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("mean of moment {k}")));
            }
            out.phi_mean = Some(m);
        }
        if req.gram {
            let mut g = acc[r..r + r * r].to_vec();
            for k in 0..r {
                for l in 0..k {
                    g[k * r + l] = g[l * r + k];
                }
            }
            out.gram = Some(GramMatrix::from_entries(r, g)?);
        }
        if req.laplacian {
            out.lap_mean = Some(acc[r + r * r..].to_vec());
        }
        Ok(out)
    }
}

/// Jacobians with at least this many entries go through a blocked matrix
/// product.
const GEMM_LIMIT: usize = 1 << 14;

/// Adds `J Jᵀ` for a row-major `r × d` Jacobian. Only the upper triangle of
/// `g` is meaningful; large Jacobians update the lower one as well.
pub(crate) fn add_outer_upper(jac: &[f64], r: usize, d: usize, g: &mut [f64]) {
    if r > 8 && d > 8 && r * d >= GEMM_LIMIT {
        let j = DMatrixView::from_slice_with_strides(jac, r, d, d, 1);
        let jt = DMatrixView::from_slice_with_strides(jac, d, r, 1, d);
        DMatrixViewMut::from_slice(&mut g[..r * r], r, r).gemm(1.0, &j, &jt, 1.0);
        return;
    }
    if d == 1 {
        let jac = &jac[..r];
        for (k, row) in g.chunks_exact_mut(r).enumerate().take(r) {
            let jk = jac[k];
            for (gv, &jl) in row[k..].iter_mut().zip(&jac[k..]) {
                *gv += jk * jl;
            }
        }
        return;
    }
    for k in 0..r {
        let a = &jac[k * d..(k + 1) * d];
        if a.iter().all(|&v| v == 0.0) {
            continue;
        }
        for l in k..r {
            g[k * r + l] += dot(a, &jac[l * d..(l + 1) * d]);
        }
    }
}

fn sum(a: &[f64]) -> f64 {
    let mut s = [0.0; 4];
    let n4 = a.len() / 4 * 4;
    for c in a[..n4].chunks_exact(4) {
        for q in 0..4 {
            s[q] += c[q];
        }
    }
    (s[0] + s[1]) + (s[2] + s[3]) + a[n4..].iter().sum::<f64>()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0; 4];
    let n4 = a.len() / 4 * 4;
    for (ca, cb) in a[..n4].chunks_exact(4).zip(b[..n4].chunks_exact(4)) {
        for q in 0..4 {
            s[q] += ca[q] * cb[q];
        }
    }
    let mut tail = 0.0;
    for i in n4..a.len() {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

/// Averages of `φ`, `∇φ∇φᵀ` and `Δφ` over the rows of `states`.
pub(crate) fn ensemble_stats(
    states: &[f64],
    phi: &dyn MomentFunction,
    req: StatsRequest,
    block: usize,
    deterministic: bool,
) -> Result<EnsembleStats> {
    let (r, d) = (phi.n_moments(), phi.dim());
    if states.is_empty() || states.len() % d != 0 {
        return Err(Error::Empty("ensemble for moment statistics"));
    }
    let n = states.len() / d;
    let acc = block_sum(n, block, StatsScratch::acc_len(r), deterministic, |range, acc| {
        let mut scratch = StatsScratch::new(phi, req);
        scratch.add_rows(phi, &states[range.start * d..range.end * d], acc)
    })?;
    StatsScratch::finish(req, r, acc, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{MonomialMap, QuadraticMap};
    use crate::rng::RngContract;
    use proptest::prelude::*;

    fn ens(xs: &[f64]) -> ParticleEnsemble {
        ParticleEnsemble::from_flat(xs.len(), 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn gram_examples() {
        let m2 = MonomialMap::new(2).unwrap();
        assert_eq!(gram(&ens(&[1.0]), &m2).unwrap().entries(), &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(gram(&ens(&[-1.0, 1.0]), &m2).unwrap().entries(), &[1.0, 0.0, 0.0, 4.0]);
        let m1 = MonomialMap::new(1).unwrap();
        assert_eq!(gram(&ens(&[0.3, -7.0, 2.0]), &m1).unwrap().entries(), &[1.0]);
    }

    #[test]
    fn gram_is_symmetric_psd_in_several_dimensions() {
        let rng = RngContract::new(3);
        let e = ParticleEnsemble::standard_normal(500, 3, &rng).unwrap();
        let g = gram(&e, &QuadraticMap::new(3).unwrap()).unwrap();
        assert!(g.asymmetry() <= 1e-12);
        assert!(g.min_eigenvalue() >= -1e-10 * g.trace());
    }

    #[test]
    fn block_size_only_reorders_the_sum() {
        let rng = RngContract::new(5);
        let e = ParticleEnsemble::standard_normal(1000, 1, &rng).unwrap();
        let m = MonomialMap::new(4).unwrap();
        let a = gram_with(&e, &m, 256, true).unwrap();
        let b = gram_with(&e, &m, 7, false).unwrap();
        for (u, v) in a.entries().iter().zip(b.entries()) {
            assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }

    /// Wraps a map so only the trait's default column filler is used.
    struct RowWise(MonomialMap);

    impl MomentFunction for RowWise {
        fn dim(&self) -> usize {
            1
        }
        fn n_moments(&self) -> usize {
            self.0.n_moments()
        }
        fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
            self.0.eval(x, out)
        }
        fn jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
            self.0.jacobian(x, out)
        }
    }

    proptest! {
        #[test]
        fn monomial_columns_match_the_row_wise_default(xs in proptest::collection::vec(-3.0f64..3.0, 1..40), r in 1usize..7) {
            let m = MonomialMap::new(r).unwrap();
            let n = xs.len();
            let (mut p1, mut j1) = (vec![0.0; r * n], vec![0.0; r * n]);
            let (mut p2, mut j2) = (vec![0.0; r * n], vec![0.0; r * n]);
            m.columns(&xs, Some(&mut p1), &mut j1).unwrap();
            RowWise(m).columns(&xs, Some(&mut p2), &mut j2).unwrap();
            prop_assert_eq!(p1, p2);
            prop_assert_eq!(j1, j2);
        }

        #[test]
        fn gram_is_permutation_invariant(mut xs in proptest::collection::vec(-3.0f64..3.0, 2..60), seed in 0u64..1000) {
            let m = MonomialMap::new(3).unwrap();
            let a = gram(&ens(&xs), &m).unwrap();
            // deterministic shuffle
            let n = xs.len();
            for i in (1..n).rev() {
                let j = ((seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407))) >> 33) as usize % (i + 1);
                xs.swap(i, j);
            }
            let b = gram(&ens(&xs), &m).unwrap();
            for (u, v) in a.entries().iter().zip(b.entries()) {
                prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
        }
    }
}
