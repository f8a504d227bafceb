//! FFT plumbing and trigonometric-polynomial evaluation on uniform grids.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward DFT, `X_k = Σ x_n e^{-2πi nk/L}` (unnormalized).
pub fn fft_forward(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse DFT, `x_n = Σ X_k e^{+2πi nk/L}` (unnormalized).
pub fn fft_inverse(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Evaluates `Σ_k b_k e^{ikθ_j}` at `θ_j = 2πj/T − π` for `j = 0..T`, with the
/// coefficients folded modulo `T`.
pub fn eval_on_grid(coeffs: impl IntoIterator<Item = (usize, Complex64)>, t: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); t];
    for (k, c) in coeffs {
        // e^{ik(−π)} = (−1)^k
        let c = if k % 2 == 1 { -c } else { c };
        buf[k % t] += c;
    }
    fft_inverse(&mut buf);
    buf
}

/// Grid angle `θ_j = 2πj/T − π`.
#[inline]
pub fn grid_angle(j: usize, t: usize) -> f64 {
    2.0 * PI * j as f64 / t as f64 - PI
}

/// `2·Re Σ_{k=0}^{K} c_k r^k e^{ikθ_j}` on the uniform grid of size `T`.
///
/// `T` must be a power of two with `T ≥ 2(K+1)`.
pub fn fft_eval_trig_poly(coeffs: &[Complex64], r: f64, t: usize) -> Result<Vec<f64>> {
    let k1 = coeffs.len();
    if !t.is_power_of_two() || t < 2 * k1 {
        return Err(Error::Size(format!(
            "grid size {t} must be a power of two and at least 2(K+1) = {}",
            2 * k1
        )));
    }
    let lr = r.ln();
    let vals = eval_on_grid(
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c * (k as f64 * lr).exp())),
        t,
    );
    Ok(vals.into_iter().map(|z| 2.0 * z.re).collect())
}

/// Linear convolution of two complex sequences via zero-padded FFT.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let n = a.len() + b.len() - 1;
    let size = n.next_power_of_two();
    let mut fa = vec![Complex64::new(0.0, 0.0); size];
    let mut fb = fa.clone();
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fft_forward(&mut fa);
    fft_forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    fft_inverse(&mut fa);
    let inv = 1.0 / size as f64;
    fa.truncate(n);
    for x in fa.iter_mut() {
        *x *= inv;
    }
    fa
}
