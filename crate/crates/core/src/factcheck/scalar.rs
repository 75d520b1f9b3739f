use core::fmt::Debug;

use num_traits::Float;

/// Floating-point element type of the classifier.
///
/// `exp_`, `ln_` and `tanh_` always go through libm. `Float`'s versions
/// switch to the platform intrinsics whenever some other crate enables
/// `num-traits/std`, which changes results in the last bits.
pub trait Real: Float + Default + Debug + Send + Sync + 'static {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp_(self) -> Self;
    fn ln_(self) -> Self;
    fn tanh_(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn exp_(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn ln_(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn tanh_(self) -> Self {
        libm::tanh(self)
    }
}

impl Real for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    #[inline]
    fn exp_(self) -> Self {
        libm::expf(self)
    }
    #[inline]
    fn ln_(self) -> Self {
        libm::logf(self)
    }
    #[inline]
    fn tanh_(self) -> Self {
        libm::tanhf(self)
    }
}

#[inline]
pub(crate) fn c<T: Real>(x: f64) -> T {
    T::from_f64(x)
}
