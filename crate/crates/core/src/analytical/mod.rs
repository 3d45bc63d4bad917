//! Induced-EMF self and mutual impedances of parallel thin-wire dipoles.
//!
//! Both dipoles carry the feed-normalized sinusoidal current of
//! [`SinusoidalCurrent`]. The axial electric field radiated by such a current
//! at transverse distance `rho` has the closed three-wave form
//!
//! ```text
//! E_z = -j eta0 / (4 pi sin(k h)) [ e^{-jkR1}/R1 + e^{-jkR2}/R2 - 2 cos(kh) e^{-jkR0}/R0 ]
//! ```
//!
//! with `R1`, `R2` measured from the wire ends and `R0` from the feed. The
//! mutual impedance is the reaction of that field with the current on the
//! observation wire, `Z_qp = -int E_z,p(z) I_q(z) dz`, integrated with
//! composite Gauss-Legendre quadrature. Self reactances use `rho = a`; self
//! resistances use the regular on-axis kernel `sin(kR)/R`, which keeps the
//! resistive part of a whole array positive semidefinite. With `rho = a` the
//! resistance of every wire comes out about `(ka)^2/6` low, enough to make
//! dense arrays slightly active.

mod current;
mod quadrature;

pub use current::{sinusoidal_current, SinusoidalCurrent, SINGULAR_SINE};
pub use quadrature::{GaussLegendre, QuadratureSpec};

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::em::{BlockImpedanceMatrix, Dipole, Engine, FreeSpaceParams, Scenario};
use crate::error::{Error, Result};
use quadrature::graded_panels;

/// Field of a source dipole `p` sampled along a parallel observation dipole `q`.
#[derive(Debug, Clone, Copy)]
pub struct ImpedanceKernel {
    source: SinusoidalCurrent,
    observation: SinusoidalCurrent,
    /// Distance between the two parallel axes (the wire radius for self terms).
    pub rho: f64,
    /// Take the resistive part from the on-axis kernel (self terms).
    pub on_axis_resistance: bool,
    pub wavenumber: f64,
    pub eta0: f64,
}

impl ImpedanceKernel {
    /// Kernel for the field of `p` acting on `q`. `self_term` selects the
    /// `rho = a` regularization.
    pub fn new(p: &Dipole, q: &Dipole, params: &FreeSpaceParams, self_term: bool) -> Result<Self> {
        if !p.is_z_directed() || !q.is_z_directed() {
            return Err(Error::Geometry("mutual impedance needs parallel z-directed dipoles".into()));
        }
        let rho = if self_term {
            p.radius
        } else {
            let d = p.center.transverse_distance(&q.center);
            if d < p.radius + q.radius {
                return Err(Error::Geometry(format!(
                    "wire volumes overlap: axis distance {d:e} m < radii sum {:e} m",
                    p.radius + q.radius
                )));
            }
            d
        };
        let k = params.wavenumber;
        Ok(Self {
            source: SinusoidalCurrent::new(p.center.z, p.length, k)?,
            observation: SinusoidalCurrent::new(q.center.z, q.length, k)?,
            rho,
            on_axis_resistance: self_term,
            wavenumber: k,
            eta0: params.eta0,
        })
    }

    /// Bracketed three-wave term at height `z` (without the `j eta0 / 4pi sin(kh)` factor).
    #[inline]
    fn waves(&self, z: f64) -> Complex64 {
        let h = self.source.half_length();
        let zc = self.source.center;
        let k = self.wavenumber;
        let rho2 = self.rho * self.rho;
        let spherical = |dz: f64| {
            let r = (rho2 + dz * dz).sqrt();
            let (s, c) = (k * r).sin_cos();
            Complex64::new(c, -s) / r
        };
        spherical(z - zc - h) + spherical(z - zc + h) - 2.0 * (k * h).cos() * spherical(z - zc)
    }

    /// `-Im` of the bracketed term on the source axis, `sum sin(kR)/R`, which
    /// stays finite as `R -> 0`.
    #[inline]
    fn axial_sine_waves(&self, z: f64) -> f64 {
        let h = self.source.half_length();
        let zc = self.source.center;
        let k = self.wavenumber;
        let sinc = |dz: f64| {
            let r = dz.abs();
            if r * k < 1e-8 {
                k
            } else {
                (k * r).sin() / r
            }
        };
        sinc(z - zc - h) + sinc(z - zc + h) - 2.0 * (k * h).cos() * sinc(z - zc)
    }

    /// `-E_z` of the source at height `z` on the observation axis.
    pub fn field(&self, z: f64) -> Complex64 {
        self.prefactor() * self.waves(z)
    }

    fn prefactor(&self) -> Complex64 {
        Complex64::new(0.0, self.eta0 / (4.0 * PI)) * self.source.feed_normalization()
    }

    /// Quadrature panels along the observation wire: split at its feed and
    /// ends, at every source singular height that falls inside, and graded
    /// toward points where the integrand varies on the scale of `rho`.
    fn panels(&self, spec: &QuadratureSpec) -> Vec<(f64, f64)> {
        let obs = &self.observation;
        let (lo, hi) = (obs.center - obs.half_length(), obs.center + obs.half_length());
        let src = &self.source;
        let singular = [src.center - src.half_length(), src.center, src.center + src.half_length()];
        let tol = 1e-12 * obs.length;

        let mut breaks = vec![lo, obs.center, hi];
        breaks.extend(singular.iter().copied().filter(|s| *s > lo + tol && *s < hi - tol));
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup_by(|a, b| (*a - *b).abs() <= tol);

        let width = |x: f64| {
            singular
                .iter()
                .map(|s| (self.rho * self.rho + (x - s) * (x - s)).sqrt())
                .fold(f64::INFINITY, f64::min)
        };
        let mut out = Vec::new();
        for w in breaks.windows(2) {
            let step = (w[1] - w[0]) / spec.panels as f64;
            for i in 0..spec.panels {
                let a = w[0] + step * i as f64;
                let b = if i + 1 == spec.panels { w[1] } else { a + step };
                graded_panels(a, b, Some(width(a)), Some(width(b)), &mut out);
            }
        }
        out
    }

    /// Reaction integral with a prepared rule.
    pub fn integrate(&self, rule: &GaussLegendre, spec: &QuadratureSpec) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut axial = 0.0;
        for (a, b) in self.panels(spec) {
            for (z, w) in rule.mapped(a, b) {
                let wi = w * self.observation.eval(z);
                acc += self.waves(z) * wi;
                if self.on_axis_resistance {
                    axial += self.axial_sine_waves(z) * wi;
                }
            }
        }
        let mut z = self.prefactor() * acc;
        if self.on_axis_resistance {
            z.re = self.eta0 / (4.0 * PI) * self.source.feed_normalization() * axial;
        }
        z
    }
}

/// Mutual impedance `Z_qp` between dipoles `p` (source) and `q`
/// (observation). Passing the same dipole twice yields its self impedance.
pub fn mutual_impedance(p: &Dipole, q: &Dipole, params: &FreeSpaceParams, quad: &QuadratureSpec) -> Result<Complex64> {
    quad.validate()?;
    let self_term = same_wire(p, q);
    let kernel = ImpedanceKernel::new(p, q, params, self_term)?;
    Ok(kernel.integrate(&quad.rule(), quad))
}

fn same_wire(p: &Dipole, q: &Dipole) -> bool {
    p.center == q.center && p.length == q.length && p.radius == q.radius
}

/// System impedance matrix from pairwise induced-EMF evaluations. Only the
/// upper triangle is integrated; the lower one is its mirror image.
pub fn assemble_zsys_analytical(scenario: &Scenario, quad: &QuadratureSpec) -> Result<BlockImpedanceMatrix> {
    quad.validate()?;
    let rule = quad.rule();
    let dipoles = scenario.dipoles();
    let params = scenario.params();
    let n = dipoles.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<Complex64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let kernel = ImpedanceKernel::new(&dipoles[j], &dipoles[i], params, i == j)?;
            Ok(kernel.integrate(&rule, quad))
        })
        .collect::<Result<_>>()?;

    let mut z = Mat::<Complex64>::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(values) {
        z[(i, j)] = v;
        z[(j, i)] = v;
    }
    let mut zsys = BlockImpedanceMatrix::new(scenario.layout(), z, Engine::Analytical)?;
    if scenario.direct_path_blocked() {
        zsys.block_direct_path();
    }
    Ok(zsys)
}
