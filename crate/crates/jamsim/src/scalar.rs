use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Sample type for buffers and grids. Physical parameters stay `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + Send + Sync + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^{j phase}` with the phase evaluated in `f64` before narrowing.
pub fn cis<T: Real>(phase: f64) -> Complex<T> {
    let (s, c) = phase.sin_cos();
    Complex::new(T::of(c), T::of(s))
}

pub fn cast<T: Real>(z: Complex<f64>) -> Complex<T> {
    Complex::new(T::of(z.re), T::of(z.im))
}

pub fn widen<T: Real>(z: Complex<T>) -> Complex<f64> {
    Complex::new(z.re.f64(), z.im.f64())
}
