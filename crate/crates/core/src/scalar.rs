//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// The associated constants carry the default tolerances for the precision
/// of the type; the `f64` values are the documented library defaults.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Absolute tolerance for probability comparisons and normalization.
    const PROB_TOL: f64;
    /// Max-norm tolerance for the overlap fixed point.
    const FIXED_POINT_TOL: f64;
    /// Eigenvalues in `[-NEG_EIGEN_FLOOR, 0)` are clipped to zero.
    const NEG_EIGEN_FLOOR: f64;
    /// Default relative rank tolerance.
    const RANK_TOL: f64;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const PROB_TOL: f64 = 1e-9;
    const FIXED_POINT_TOL: f64 = 1e-12;
    const NEG_EIGEN_FLOOR: f64 = 1e-9;
    const RANK_TOL: f64 = 1e-9;
}

impl Real for f32 {
    const PROB_TOL: f64 = 1e-5;
    const FIXED_POINT_TOL: f64 = 1e-6;
    const NEG_EIGEN_FLOOR: f64 = 1e-5;
    const RANK_TOL: f64 = 1e-5;
}

/// `e^{iθ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(c, s)
}

/// `|z|` without requiring `num_traits::Float`.
#[inline]
pub fn modulus<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let two_pi = T::two_pi();
    let mut r = theta % two_pi;
    if r < T::zero() {
        r += two_pi;
    }
    if r >= two_pi {
        r -= two_pi;
    }
    r
}

/// `-p log2 p` with the `0 log 0 = 0` convention.
#[inline]
pub fn neg_plogp<T: Real>(p: T) -> T {
    if p > T::zero() {
        -p * p.log2()
    } else {
        T::zero()
    }
}

/// Shannon entropy in bits of a (sub-)probability vector.
pub fn shannon_bits<T: Real>(probs: impl IntoIterator<Item = T>) -> T {
    probs.into_iter().fold(T::zero(), |acc, p| acc + neg_plogp(p))
}
