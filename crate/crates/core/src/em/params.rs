use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Vacuum permeability, CODATA 2018 (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity, CODATA 2018 (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Free-space propagation quantities at one operating frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeSpaceParams {
    pub frequency: f64,
    pub wavelength: f64,
    pub wavenumber: f64,
    pub eta0: f64,
    pub eps0: f64,
    pub mu0: f64,
}

impl FreeSpaceParams {
    pub fn new(frequency: f64) -> Result<Self> {
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::Domain(format!("frequency must be positive and finite, got {frequency}")));
        }
        let c = 1.0 / (MU0 * EPS0).sqrt();
        let wavelength = c / frequency;
        Ok(Self {
            frequency,
            wavelength,
            wavenumber: 2.0 * PI / wavelength,
            eta0: (MU0 / EPS0).sqrt(),
            eps0: EPS0,
            mu0: MU0,
        })
    }

    pub fn speed_of_light(&self) -> f64 {
        1.0 / (self.mu0 * self.eps0).sqrt()
    }

    /// Angular frequency in rad/s.
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }
}

/// Shorthand for [`FreeSpaceParams::new`].
pub fn free_space_params(frequency: f64) -> Result<FreeSpaceParams> {
    FreeSpaceParams::new(frequency)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_gigahertz_is_ten_centimetres() {
        let p = free_space_params(3e9).unwrap();
        assert!((p.wavelength - 0.099_930_8).abs() < 1e-6, "{}", p.wavelength);
        assert!((p.eta0 - 376.730_313).abs() < 1e-5, "{}", p.eta0);
    }

    #[test]
    fn identities_hold_to_twelve_digits() {
        for f in [1e3, 2.4e9, 3e9, 6e10] {
            let p = free_space_params(f).unwrap();
            assert!((p.wavenumber * p.wavelength / (2.0 * PI) - 1.0).abs() < 1e-12);
            assert!((p.wavelength * p.frequency / p.speed_of_light() - 1.0).abs() < 1e-12);
            assert!((p.eta0 / (p.mu0 / p.eps0).sqrt() - 1.0).abs() < 1e-12);
            assert!(p.wavelength > 0.0 && p.wavenumber > 0.0 && p.eta0 > 0.0);
        }
    }

    #[test]
    fn rejects_non_positive_frequency() {
        assert!(matches!(free_space_params(0.0), Err(Error::Domain(_))));
        assert!(matches!(free_space_params(-1.0), Err(Error::Domain(_))));
        assert!(matches!(free_space_params(f64::NAN), Err(Error::Domain(_))));
    }
}
