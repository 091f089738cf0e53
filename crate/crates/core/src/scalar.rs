use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used by the physics and readout layers: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Characteristic impedance of the readout line, ohms.
pub const LOAD_OHMS: f64 = 50.0;

/// Planck constant times speed of light, J·m.
pub const HC: f64 = 6.626_070_15e-34 * 299_792_458.0;

/// Energy of one photon at `wavelength` metres.
pub fn photon_energy<T: Real>(wavelength: T) -> T {
    T::lit(HC) / wavelength
}
