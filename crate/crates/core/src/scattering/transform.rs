//! Wavelet coefficients, scattering moments and their adjoint.

use num_complex::Complex64;

use super::fft::GridFft;
use super::filters::FilterBank;
use super::index::{ScatteringIndex, ScatteringMoment};
use crate::error::{Error, Result};

type C = Complex64;

fn check_size(bank: &FilterBank, len: usize) -> Result<()> {
    if len != bank.size() {
        return Err(Error::mismatch("signal length", bank.size(), len));
    }
    Ok(())
}

/// `x ∗ ψ_λ` for every channel (band-pass channels then low-pass), periodic.
pub fn wavelet_transform(x: &[f64], bank: &FilterBank) -> Result<Vec<Vec<C>>> {
    let z: Vec<C> = x.iter().map(|&v| C::new(v, 0.0)).collect();
    wavelet_transform_complex(&z, bank)
}

/// Same as [`wavelet_transform`] for complex input.
pub fn wavelet_transform_complex(x: &[C], bank: &FilterBank) -> Result<Vec<Vec<C>>> {
    check_size(bank, x.len())?;
    let fft = GridFft::new(bank.n_per_axis(), bank.kappa());
    let mut xhat = x.to_vec();
    fft.forward(&mut xhat);
    Ok((0..bank.channels().len())
        .map(|c| {
            let mut v: Vec<C> = xhat.iter().zip(bank.filter(c)).map(|(a, f)| a * f).collect();
            fft.inverse(&mut v);
            v
        })
        .collect())
}

/// Cached forward pass for one signal.
pub(crate) struct Forward {
    xhat: Vec<C>,
    coeffs: Vec<Vec<C>>,
    modulus: Vec<Vec<f64>>,
    modulus_hat: Vec<Vec<C>>,
}

/// Reusable transform engine bound to a bank and index.
#[derive(Clone)]
pub(crate) struct Engine<'a> {
    bank: &'a FilterBank,
    index: &'a ScatteringIndex,
    fft: GridFft,
}

impl<'a> Engine<'a> {
    pub fn new(bank: &'a FilterBank, index: &'a ScatteringIndex) -> Self {
        Self::with_fft(bank, index, GridFft::new(bank.n_per_axis(), bank.kappa()))
    }

    pub fn with_fft(bank: &'a FilterBank, index: &'a ScatteringIndex, fft: GridFft) -> Self {
        Self { bank, index, fft }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        check_size(self.bank, x.len())?;
        let mut xhat: Vec<C> = x.iter().map(|&v| C::new(v, 0.0)).collect();
        self.fft.forward(&mut xhat);
        let n_ch = self.bank.channels().len();
        let mut coeffs = Vec::with_capacity(n_ch);
        let mut modulus = Vec::with_capacity(n_ch);
        let mut modulus_hat = Vec::with_capacity(self.bank.n_band());
        for c in 0..n_ch {
            let mut v: Vec<C> = xhat.iter().zip(self.bank.filter(c)).map(|(a, f)| a * f).collect();
            self.fft.inverse(&mut v);
            let m: Vec<f64> = v.iter().map(|z| z.norm()).collect();
            if c < self.bank.n_band() {
                let mut mh: Vec<C> = m.iter().map(|&r| C::new(r, 0.0)).collect();
                self.fft.forward(&mut mh);
                modulus_hat.push(mh);
            }
            coeffs.push(v);
            modulus.push(m);
        }
        Ok(Forward {
            xhat,
            coeffs,
            modulus,
            modulus_hat,
        })
    }

    pub fn moments(&self, f: &Forward, out: &mut [f64]) -> Result<()> {
        if out.len() != self.index.len() {
            return Err(Error::mismatch("moment output length", self.index.len(), out.len()));
        }
        let d = self.bank.size() as f64;
        let d2 = d * d;
        for (o, e) in out.iter_mut().zip(self.index.entries()) {
            *o = match *e {
                ScatteringMoment::MeanModulus { channel } => f.modulus[channel].iter().sum::<f64>() / d,
                ScatteringMoment::Power { channel } => {
                    f.modulus[channel].iter().map(|m| m * m).sum::<f64>() / d
                }
                ScatteringMoment::EnvelopePhase {
                    fine,
                    coarse,
                    imaginary,
                } => {
                    let s = weighted_inner(&f.modulus_hat[fine], &f.xhat, self.bank.power(coarse)) / d2;
                    if imaginary {
                        s.im
                    } else {
                        s.re
                    }
                }
                ScatteringMoment::EnvelopeCross {
                    fine_a,
                    coarse,
                    fine_b,
                    imaginary,
                } => {
                    let s = weighted_inner(
                        &f.modulus_hat[fine_a],
                        &f.modulus_hat[fine_b],
                        self.bank.power(coarse),
                    ) / d2;
                    if imaginary {
                        s.im
                    } else {
                        s.re
                    }
                }
            };
        }
        Ok(())
    }

    /// Gradient of `Σ_k w_k φ_k` at the cached point. Moments with zero
    /// weight are skipped entirely.
    pub fn backward(&self, f: &Forward, w: &[f64], out: &mut [f64]) -> Result<()> {
        if w.len() != self.index.len() {
            return Err(Error::mismatch("weight length", self.index.len(), w.len()));
        }
        let d = self.bank.size();
        let df = d as f64;
        let d2 = df * df;
        let n_ch = self.bank.channels().len();
        let mut g_xhat: Option<Vec<C>> = None;
        let mut g_coeff: Vec<Option<Vec<C>>> = vec![None; n_ch];
        let mut g_mod: Vec<Option<Vec<f64>>> = vec![None; n_ch];
        let mut g_mod_hat: Vec<Option<Vec<C>>> = vec![None; self.bank.n_band()];

        fn slot<T: Clone + Default>(s: &mut Option<Vec<T>>, d: usize) -> &mut Vec<T> {
            s.get_or_insert_with(|| vec![T::default(); d])
        }

        for (&wk, e) in w.iter().zip(self.index.entries()) {
            if wk == 0.0 {
                continue;
            }
            match *e {
                ScatteringMoment::MeanModulus { channel } => {
                    let g = slot(&mut g_mod[channel], d);
                    let a = wk / df;
                    g.iter_mut().for_each(|v| *v += a);
                }
                ScatteringMoment::Power { channel } => {
                    let g = slot(&mut g_coeff[channel], d);
                    let a = 2.0 * wk / df;
                    for (gv, x) in g.iter_mut().zip(&f.coeffs[channel]) {
                        *gv += x * a;
                    }
                }
                ScatteringMoment::EnvelopePhase {
                    fine,
                    coarse,
                    imaginary,
                } => {
                    let alpha = part_weight(wk, imaginary) / d2;
                    let power = self.bank.power(coarse);
                    let gm = slot(&mut g_mod_hat[fine], d);
                    for ((g, x), p) in gm.iter_mut().zip(&f.xhat).zip(power) {
                        *g += alpha.conj() * x * *p;
                    }
                    let gx = slot(&mut g_xhat, d);
                    for ((g, m), p) in gx.iter_mut().zip(&f.modulus_hat[fine]).zip(power) {
                        *g += alpha * m * *p;
                    }
                }
                ScatteringMoment::EnvelopeCross {
                    fine_a,
                    coarse,
                    fine_b,
                    imaginary,
                } => {
                    let alpha = part_weight(wk, imaginary) / d2;
                    let power = self.bank.power(coarse);
                    {
                        let ga = slot(&mut g_mod_hat[fine_a], d);
                        for ((g, m), p) in ga.iter_mut().zip(&f.modulus_hat[fine_b]).zip(power) {
                            *g += alpha.conj() * m * *p;
                        }
                    }
                    let gb = slot(&mut g_mod_hat[fine_b], d);
                    for ((g, m), p) in gb.iter_mut().zip(&f.modulus_hat[fine_a]).zip(power) {
                        *g += alpha * m * *p;
                    }
                }
            }
        }

        // M̂ = FFT(M): adjoint is the unnormalized inverse, real part
        for (c, gmh) in g_mod_hat.into_iter().enumerate() {
            if let Some(mut v) = gmh {
                self.fft.inverse_unnormalized(&mut v);
                let g = slot(&mut g_mod[c], d);
                for (a, b) in g.iter_mut().zip(&v) {
                    *a += b.re;
                }
            }
        }
        // M = |X|
        for (c, gm) in g_mod.into_iter().enumerate() {
            if let Some(gm) = gm {
                let g = slot(&mut g_coeff[c], d);
                for ((gv, &gmv), (x, &m)) in g.iter_mut().zip(&gm).zip(f.coeffs[c].iter().zip(&f.modulus[c])) {
                    if m > 0.0 {
                        *gv += x * (gmv / m);
                    }
                }
            }
        }
        // X^λ = IFFT(ψ̂_λ X̂)
        for (c, gc) in g_coeff.into_iter().enumerate() {
            if let Some(mut v) = gc {
                self.fft.forward(&mut v);
                let g = slot(&mut g_xhat, d);
                for ((a, b), filt) in g.iter_mut().zip(&v).zip(self.bank.filter(c)) {
                    *a += filt.conj() * b / df;
                }
            }
        }
        match g_xhat {
            Some(mut v) => {
                self.fft.inverse_unnormalized(&mut v);
                for (o, z) in out.iter_mut().zip(&v) {
                    *o = z.re;
                }
            }
            None => out.fill(0.0),
        }
        Ok(())
    }
}

fn part_weight(w: f64, imaginary: bool) -> C {
    if imaginary {
        C::new(0.0, -w)
    } else {
        C::new(w, 0.0)
    }
}

/// `Σ_ω a(ω) conj(b(ω)) p(ω)`.
fn weighted_inner(a: &[C], b: &[C], p: &[f64]) -> C {
    let mut s = C::default();
    for ((x, y), w) in a.iter().zip(b).zip(p) {
        if *w != 0.0 {
            s += x * y.conj() * *w;
        }
    }
    s
}

/// Scattering moments of one signal or field, ordered as in `index`.
pub fn scattering_moments(x: &[f64], bank: &FilterBank, index: &ScatteringIndex) -> Result<Vec<f64>> {
    let eng = Engine::new(bank, index);
    let f = eng.forward(x)?;
    let mut out = vec![0.0; index.len()];
    eng.moments(&f, &mut out)?;
    Ok(out)
}

/// `∇_x Σ_k w_k φ_k(x)`.
pub fn scattering_vjp(x: &[f64], weights: &[f64], bank: &FilterBank, index: &ScatteringIndex) -> Result<Vec<f64>> {
    let eng = Engine::new(bank, index);
    let f = eng.forward(x)?;
    let mut out = vec![0.0; x.len()];
    eng.backward(&f, weights, &mut out)?;
    Ok(out)
}

/// Selected rows of the Jacobian, one adjoint pass per row.
pub fn scattering_jacobian_rows(
    x: &[f64],
    bank: &FilterBank,
    index: &ScatteringIndex,
    rows: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let eng = Engine::new(bank, index);
    let f = eng.forward(x)?;
    let mut w = vec![0.0; index.len()];
    let mut out = Vec::with_capacity(rows.len());
    for &k in rows {
        if k >= index.len() {
            return Err(Error::Domain(format!("row {k} outside {} moments", index.len())));
        }
        w[k] = 1.0;
        let mut g = vec![0.0; x.len()];
        eng.backward(&f, &w, &mut g)?;
        w[k] = 0.0;
        out.push(g);
    }
    Ok(out)
}

/// Writes all Jacobian rows into `jac` (row-major `r × d`) reusing one
/// forward pass.
pub(crate) fn jacobian_into(eng: &Engine<'_>, f: &Forward, jac: &mut [f64]) -> Result<()> {
    let r = eng.index.len();
    let d = eng.bank.size();
    let mut w = vec![0.0; r];
    for k in 0..r {
        w[k] = 1.0;
        eng.backward(f, &w, &mut jac[k * d..(k + 1) * d])?;
        w[k] = 0.0;
    }
    Ok(())
}
