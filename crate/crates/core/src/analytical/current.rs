use crate::error::{Error, Result};

/// Below this `|sin(k0 l / 2)|` the feed-normalized current is undefined.
pub const SINGULAR_SINE: f64 = 1e-9;

/// Sinusoidal current of a center-fed dipole, normalized to one at the feed:
/// `I(z) = sin(k0 (l/2 - |z - zc|)) / sin(k0 l / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidalCurrent {
    pub center: f64,
    pub length: f64,
    pub wavenumber: f64,
    inv_feed_sine: f64,
}

impl SinusoidalCurrent {
    pub fn new(center: f64, length: f64, wavenumber: f64) -> Result<Self> {
        if !(length > 0.0 && wavenumber > 0.0) {
            return Err(Error::Domain(format!("length {length} and wavenumber {wavenumber} must be positive")));
        }
        let sine = (0.5 * wavenumber * length).sin();
        if sine.abs() < SINGULAR_SINE {
            return Err(Error::SingularLength { length, sine });
        }
        Ok(Self { center, length, wavenumber, inv_feed_sine: 1.0 / sine })
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }

    /// `1 / sin(k0 l / 2)`.
    pub fn feed_normalization(&self) -> f64 {
        self.inv_feed_sine
    }

    /// Current at `z`; the caller guarantees `z` lies on the wire.
    #[inline]
    pub(crate) fn eval(&self, z: f64) -> f64 {
        let u = (self.half_length() - (z - self.center).abs()).max(0.0);
        (self.wavenumber * u).sin() * self.inv_feed_sine
    }

    /// Current at `z`, rejecting points off the wire.
    pub fn at(&self, z: f64) -> Result<f64> {
        let slack = 1e-12 * self.length;
        if (z - self.center).abs() > self.half_length() + slack {
            return Err(Error::Domain(format!(
                "z = {z} lies outside the wire [{}, {}]",
                self.center - self.half_length(),
                self.center + self.half_length()
            )));
        }
        Ok(self.eval(z))
    }
}

/// Evaluates the normalized sinusoidal current at `z`.
pub fn sinusoidal_current(z: f64, current: &SinusoidalCurrent) -> Result<f64> {
    current.at(z)
}
