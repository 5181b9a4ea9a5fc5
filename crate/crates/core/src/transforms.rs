//! Sine and cosine transforms that diagonalize the grid Laplacians, all
//! computed with one complex FFT of length `2n`.
//!
//! Three 1-D bases are needed:
//! * node-centered sine `sin(π k i / n)`, `i, k = 1..n−1` (DST-I): velocity
//!   component normal to a direction, zero on both walls;
//! * half-sample sine `sin(π k (j+½) / n)`, `k = 1..=n`: tangential component
//!   with reflected ghosts;
//! * half-sample cosine `cos(π k (j+½) / n)`, `k = 0..n`: Neumann scalar.
//!
//! Each has eigenvalue `(2 − 2cos(πk/n)) / h²` for the 3-point second difference.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    NodeSine,
    HalfSine,
    HalfCosine,
}

impl Basis {
    /// Number of unknowns for a direction with `n` cells.
    pub fn len(self, n: usize) -> usize {
        match self {
            Basis::NodeSine => n - 1,
            Basis::HalfSine | Basis::HalfCosine => n,
        }
    }

    /// Wavenumber of coefficient slot `s`.
    pub fn wavenumber(self, s: usize) -> usize {
        match self {
            Basis::NodeSine | Basis::HalfSine => s + 1,
            Basis::HalfCosine => s,
        }
    }

    /// Squared norm of basis vector in slot `s`.
    pub fn norm_sq(self, n: usize, s: usize) -> f64 {
        let k = self.wavenumber(s);
        match self {
            Basis::NodeSine => n as f64 / 2.0,
            Basis::HalfSine if k == n => n as f64,
            Basis::HalfCosine if k == 0 => n as f64,
            _ => n as f64 / 2.0,
        }
    }

    /// Eigenvalue of the negative second difference for slot `s`.
    pub fn eigenvalue(self, n: usize, h: f64, s: usize) -> f64 {
        let k = self.wavenumber(s) as f64;
        (2.0 - 2.0 * (std::f64::consts::PI * k / n as f64).cos()) / (h * h)
    }
}

/// 1-D transform pair for a fixed basis and cell count.
#[derive(Clone)]
pub struct TrigTransform {
    basis: Basis,
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    /// e^{iπk/(2n)}
    twiddle: Vec<Complex64>,
}

impl std::fmt::Debug for TrigTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrigTransform")
            .field("basis", &self.basis)
            .field("n", &self.n)
            .finish()
    }
}

impl TrigTransform {
    pub fn new(basis: Basis, n: usize, planner: &mut FftPlanner<f64>) -> Self {
        let fft = planner.plan_fft_inverse(2 * n);
        let twiddle = (0..=2 * n)
            .map(|k| Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 / (2 * n) as f64))
            .collect();
        Self {
            basis,
            n,
            fft,
            twiddle,
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len(self.n)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficients `X_s = Σ_j x_j φ_s(j)` (unnormalized analysis).
    pub fn forward(&self, x: &[f64], out: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        buf.clear();
        buf.resize(2 * n, Complex64::new(0.0, 0.0));
        match self.basis {
            Basis::NodeSine => {
                for (i, &v) in x.iter().enumerate() {
                    buf[i + 1].re = v;
                }
                self.fft.process(buf);
                for (s, o) in out.iter_mut().enumerate() {
                    *o = buf[s + 1].im;
                }
            }
            Basis::HalfSine | Basis::HalfCosine => {
                for (j, &v) in x.iter().enumerate() {
                    buf[j].re = v;
                }
                self.fft.process(buf);
                for (s, o) in out.iter_mut().enumerate() {
                    let k = self.basis.wavenumber(s);
                    let z = self.twiddle[k] * buf[k % (2 * n)];
                    *o = if self.basis == Basis::HalfSine {
                        z.im
                    } else {
                        z.re
                    };
                }
            }
        }
    }

    /// Synthesis `x_j = Σ_s c_s φ_s(j)`.
    pub fn backward(&self, c: &[f64], out: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        buf.clear();
        buf.resize(2 * n, Complex64::new(0.0, 0.0));
        match self.basis {
            Basis::NodeSine => {
                // DST-I is symmetric: synthesis and analysis coincide
                for (s, &v) in c.iter().enumerate() {
                    buf[s + 1].re = v;
                }
                self.fft.process(buf);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = buf[i + 1].im;
                }
            }
            Basis::HalfSine | Basis::HalfCosine => {
                for (s, &v) in c.iter().enumerate() {
                    let k = self.basis.wavenumber(s);
                    buf[k] = self.twiddle[k] * v;
                }
                self.fft.process(buf);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = if self.basis == Basis::HalfSine {
                        buf[j].im
                    } else {
                        buf[j].re
                    };
                }
            }
        }
    }
}

/// Separable 2-D transform on a row-major block of `len_x × len_y` values
/// (second index contiguous).
#[derive(Debug, Clone)]
pub struct Transform2d {
    pub x: TrigTransform,
    pub y: TrigTransform,
}

impl Transform2d {
    pub fn forward(&self, data: &mut [f64]) {
        self.apply(data, true);
    }

    pub fn backward(&self, data: &mut [f64]) {
        self.apply(data, false);
    }

    fn apply(&self, data: &mut [f64], forward: bool) {
        let (lx, ly) = (self.x.len(), self.y.len());
        debug_assert_eq!(data.len(), lx * ly);
        let mut buf = Vec::new();
        let mut tmp = vec![0.0; lx.max(ly)];
        for row in data.chunks_mut(ly) {
            tmp[..ly].copy_from_slice(row);
            if forward {
                self.y.forward(&tmp[..ly], row, &mut buf);
            } else {
                self.y.backward(&tmp[..ly], row, &mut buf);
            }
        }
        let mut col = vec![0.0; lx];
        for j in 0..ly {
            for i in 0..lx {
                col[i] = data[i * ly + j];
            }
            if forward {
                self.x.forward(&col, &mut tmp[..lx], &mut buf);
            } else {
                self.x.backward(&col, &mut tmp[..lx], &mut buf);
            }
            for i in 0..lx {
                data[i * ly + j] = tmp[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_basis(basis: Basis, n: usize, s: usize, j: usize) -> f64 {
        let k = basis.wavenumber(s) as f64;
        match basis {
            Basis::NodeSine => (PI * k * (j + 1) as f64 / n as f64).sin(),
            Basis::HalfSine => (PI * k * (j as f64 + 0.5) / n as f64).sin(),
            Basis::HalfCosine => (PI * k * (j as f64 + 0.5) / n as f64).cos(),
        }
    }

    #[test]
    fn forward_and_backward_match_naive_sums() {
        let mut planner = FftPlanner::new();
        for basis in [Basis::NodeSine, Basis::HalfSine, Basis::HalfCosine] {
            for n in [4usize, 7, 16] {
                let t = TrigTransform::new(basis, n, &mut planner);
                let m = t.len();
                let x: Vec<f64> = (0..m).map(|i| ((i * 7 + 3) % 5) as f64 - 1.3).collect();
                let mut fwd = vec![0.0; m];
                let mut bwd = vec![0.0; m];
                let mut buf = Vec::new();
                t.forward(&x, &mut fwd, &mut buf);
                t.backward(&x, &mut bwd, &mut buf);
                for s in 0..m {
                    let f: f64 = (0..m).map(|j| x[j] * naive_basis(basis, n, s, j)).sum();
                    let b: f64 = (0..m).map(|k| x[k] * naive_basis(basis, n, k, s)).sum();
                    assert!((fwd[s] - f).abs() < 1e-12, "{basis:?} n={n} s={s}");
                    assert!((bwd[s] - b).abs() < 1e-12, "{basis:?} n={n} s={s}");
                }
            }
        }
    }

    #[test]
    fn basis_norms() {
        for basis in [Basis::NodeSine, Basis::HalfSine, Basis::HalfCosine] {
            let n = 9;
            for s in 0..basis.len(n) {
                let sq: f64 = (0..basis.len(n))
                    .map(|j| naive_basis(basis, n, s, j).powi(2))
                    .sum();
                assert!((sq - basis.norm_sq(n, s)).abs() < 1e-12);
            }
        }
    }
}
