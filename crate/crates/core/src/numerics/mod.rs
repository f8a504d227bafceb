//! Overflow-proof arithmetic, special functions, stable accumulation and FFT
//! helpers shared by every other module.

pub mod ext;
pub mod fft;
pub mod logreal;
pub mod quad;
pub mod special;

pub use ext::{ext_add, ext_mul, ExtComplex};
pub use fft::fft_eval_trig_poly;
pub use logreal::{log_add_exp, log_sum_exp, LogReal, LseAccumulator};
pub use special::{incomplete_gamma_lower, incomplete_gamma_upper, lgamma, ln_factorial};
