//! End-to-end channel of the multiport network.
//!
//! ```text
//! H = Z_RL [Z_ROT - Z_ROS Z_sca Z_SOT] Z_TG
//! Z_RL  = (I + Z_RR Z_L^-1)^-1
//! Z_sca = (Z_SS + Z_SOS + Z_RIS)^-1
//! ```
//!
//! Environmental objects enter as short-circuited scatterers, folded into the
//! composite blocks `Z_XOY = Z_XY - Z_XO Z_OO^-1 Z_OY` (with `Z_SOS` holding
//! only the correction term). Without objects the composite blocks are the
//! direct ones and `Z_SOS = 0`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::em::{BlockImpedanceMatrix, Engine, Role, Scenario};
use crate::error::{Error, Result};
use crate::linalg::{self, diagonal, factor, frobenius_sq, identity, CMat};

/// Reading of the transmitter-side factor `Z_TG`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZtgForm {
    /// `(Z_TT + Z_G)^-1`: the transmitter currents per unit generator
    /// voltage, which makes `H` the ratio `V_R / V_G`.
    #[default]
    VoltageTransfer,
    /// `(I + Z_TT Z_G^-1)^-1 = Z_G (Z_TT + Z_G)^-1`.
    Normalized,
    /// `(I + Z_TT Z_G)^-1`, taken literally.
    AsPrinted,
}

impl ZtgForm {
    pub fn name(self) -> &'static str {
        match self {
            ZtgForm::VoltageTransfer => "voltage_transfer",
            ZtgForm::Normalized => "normalized",
            ZtgForm::AsPrinted => "as_printed",
        }
    }
}

impl fmt::Display for ZtgForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ZtgForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "voltage_transfer" => Ok(ZtgForm::VoltageTransfer),
            "normalized" => Ok(ZtgForm::Normalized),
            "as_printed" => Ok(ZtgForm::AsPrinted),
            other => Err(Error::Configuration(format!(
                "unknown ztg_form '{other}' (expected voltage_transfer, normalized or as_printed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChannelOptions {
    pub ztg_form: ZtgForm,
}

#[derive(Debug, Clone)]
pub struct ChannelResult {
    /// Receivers x transmitters.
    pub h: CMat,
    pub gain_db: f64,
    pub engine: Engine,
    pub terminations: Vec<Complex64>,
}

/// `10 log10 ||h||_F^2`, or `-inf` for the zero matrix.
pub fn channel_gain_db(h: &CMat) -> f64 {
    let p = frobenius_sq(h);
    if p > 0.0 {
        10.0 * p.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// `(Z_SS + Z_SOS + Z_RIS)^-1`, rejecting sums with condition estimate above 1e12.
pub fn scattering_inverse(z_ss: &CMat, z_sos: &CMat, z_ris: &[Complex64]) -> Result<CMat> {
    let n = z_ss.nrows();
    if z_ss.ncols() != n || z_sos.nrows() != n || z_sos.ncols() != n || z_ris.len() != n {
        return Err(Error::Structural(format!(
            "scattering blocks disagree: Z_SS {}x{}, Z_SOS {}x{}, {} terminations",
            z_ss.nrows(),
            z_ss.ncols(),
            z_sos.nrows(),
            z_sos.ncols(),
            z_ris.len()
        )));
    }
    let sum = scattering_sum(z_ss, z_sos, z_ris);
    Ok(factor(&sum, "scattering sum Z_SS + Z_SOS + Z_RIS")?.inverse())
}

fn scattering_sum(z_ss: &CMat, z_sos: &CMat, z_ris: &[Complex64]) -> CMat {
    let mut sum = z_ss + z_sos;
    for (i, z) in z_ris.iter().enumerate() {
        sum[(i, i)] += *z;
    }
    sum
}

/// Termination-independent pieces of the channel, so that
/// `H(z) = A - B (S + diag z)^-1 C` for any RIS termination vector `z`.
#[derive(Debug, Clone)]
pub struct ChannelFactors {
    /// `Z_RL Z_ROT Z_TG`.
    pub a: CMat,
    /// `Z_RL Z_ROS`.
    pub b: CMat,
    /// `Z_SOT Z_TG`.
    pub c: CMat,
    /// `Z_SS + Z_SOS`.
    pub s: CMat,
    pub engine: Engine,
}

impl ChannelFactors {
    pub fn new(zsys: &BlockImpedanceMatrix, z_generator: &[Complex64], z_load: &[Complex64], options: &ChannelOptions) -> Result<Self> {
        let layout = zsys.layout();
        let (nt, nr) = (layout.transmitters, layout.receivers);
        if z_generator.len() != nt || z_load.len() != nr {
            return Err(Error::Structural(format!(
                "{} generator and {} load impedances for {nt} transmitters and {nr} receivers",
                z_generator.len(),
                z_load.len()
            )));
        }
        if nt == 0 || nr == 0 {
            return Err(Error::Structural("the channel needs at least one transmitter and one receiver".into()));
        }
        if z_load.iter().any(|z| z.norm() == 0.0) {
            return Err(Error::Domain("load impedances must be nonzero".into()));
        }
        let blk = |r, c| zsys.block(r, c);
        use Role::{Object as O, Receiver as R, RisElement as S, Transmitter as T};

        let (z_rot, z_ros, z_sot, z_sos) = if layout.objects == 0 {
            let ns = layout.ris;
            (blk(R, T), blk(R, S), blk(S, T), CMat::zeros(ns, ns))
        } else {
            let oo = factor(&blk(O, O), "object block Z_OO")?;
            let ot = oo.solve(&blk(O, T));
            let os = oo.solve(&blk(O, S));
            let (ro, so) = (blk(R, O), blk(S, O));
            (blk(R, T) - &ro * &ot, blk(R, S) - &ro * &os, blk(S, T) - &so * &ot, -(&so * &os))
        };

        let z_rl = load_factor(&blk(R, R), z_load)?;
        let z_tg = generator_factor(&blk(T, T), z_generator, options.ztg_form)?;
        Ok(Self {
            a: &z_rl * &z_rot * &z_tg,
            b: &z_rl * &z_ros,
            c: &z_sot * &z_tg,
            s: blk(S, S) + z_sos,
            engine: zsys.engine(),
        })
    }

    pub fn ris_count(&self) -> usize {
        self.s.nrows()
    }

    fn termination_sum(&self, terminations: &[Complex64]) -> Result<CMat> {
        if terminations.len() != self.ris_count() {
            return Err(Error::Structural(format!(
                "{} terminations for {} RIS elements",
                terminations.len(),
                self.ris_count()
            )));
        }
        let mut sum = self.s.clone();
        for (i, z) in terminations.iter().enumerate() {
            sum[(i, i)] += *z;
        }
        Ok(sum)
    }

    /// `(S + diag z)^-1`.
    pub fn scattering_inverse(&self, terminations: &[Complex64]) -> Result<CMat> {
        let sum = self.termination_sum(terminations)?;
        Ok(factor(&sum, "scattering sum Z_SS + Z_SOS + Z_RIS")?.inverse())
    }

    /// `A - B Z_sca C` for a given scattering inverse.
    pub fn channel_from_inverse(&self, z_sca: &CMat) -> CMat {
        if self.ris_count() == 0 {
            return self.a.clone();
        }
        &self.a - &self.b * z_sca * &self.c
    }

    pub fn channel(&self, terminations: &[Complex64]) -> Result<ChannelResult> {
        let h = if self.ris_count() == 0 {
            if !terminations.is_empty() {
                return Err(Error::Structural(format!("{} terminations for 0 RIS elements", terminations.len())));
            }
            self.a.clone()
        } else {
            // solve instead of forming the inverse
            let sum = self.termination_sum(terminations)?;
            let lu = factor(&sum, "scattering sum Z_SS + Z_SOS + Z_RIS")?;
            &self.a - &self.b * lu.solve(&self.c)
        };
        Ok(ChannelResult { gain_db: channel_gain_db(&h), h, engine: self.engine, terminations: terminations.to_vec() })
    }
}

/// `Z_RL = (I + Z_RR Z_L^-1)^-1 = Z_L (Z_L + Z_RR)^-1`.
fn load_factor(z_rr: &CMat, z_load: &[Complex64]) -> Result<CMat> {
    let sum = z_rr + diagonal(z_load);
    // Z_L (Z_L + Z_RR)^-1 = ((Z_L + Z_RR)^-T Z_L)^T since both Z_L and the sum transpose cleanly
    let lu = factor(&sum, "receiver sum Z_RR + Z_L")?;
    Ok(lu.solve_transpose(&diagonal(z_load)).transpose().to_owned())
}

fn generator_factor(z_tt: &CMat, z_generator: &[Complex64], form: ZtgForm) -> Result<CMat> {
    let n = z_tt.nrows();
    match form {
        ZtgForm::VoltageTransfer => {
            let sum = z_tt + diagonal(z_generator);
            Ok(factor(&sum, "transmitter sum Z_TT + Z_G")?.inverse())
        }
        ZtgForm::Normalized => {
            if z_generator.iter().any(|z| z.norm() == 0.0) {
                return Err(Error::Domain("normalized Z_TG needs nonzero generator impedances".into()));
            }
            let inv_g: Vec<Complex64> = z_generator.iter().map(|z| z.inv()).collect();
            let m = identity(n) + z_tt * diagonal(&inv_g);
            Ok(factor(&m, "I + Z_TT Z_G^-1")?.inverse())
        }
        ZtgForm::AsPrinted => {
            let m = identity(n) + z_tt * diagonal(z_generator);
            Ok(factor(&m, "I + Z_TT Z_G")?.inverse())
        }
    }
}

/// Channel for explicit port impedances.
pub fn end_to_end_channel_with(
    zsys: &BlockImpedanceMatrix,
    z_generator: &[Complex64],
    z_load: &[Complex64],
    z_ris: &[Complex64],
    options: &ChannelOptions,
) -> Result<ChannelResult> {
    if z_ris.len() != zsys.layout().ris {
        return Err(Error::Structural(format!(
            "{} terminations for {} RIS elements",
            z_ris.len(),
            zsys.layout().ris
        )));
    }
    ChannelFactors::new(zsys, z_generator, z_load, options)?.channel(z_ris)
}

/// Channel with the default transmitter factor.
pub fn end_to_end_channel(zsys: &BlockImpedanceMatrix, z_generator: &[Complex64], z_load: &[Complex64], z_ris: &[Complex64]) -> Result<ChannelResult> {
    end_to_end_channel_with(zsys, z_generator, z_load, z_ris, &ChannelOptions::default())
}

/// Channel of a scenario's own port impedances and terminations.
pub fn scenario_channel(zsys: &BlockImpedanceMatrix, scenario: &Scenario, options: &ChannelOptions) -> Result<ChannelResult> {
    if zsys.layout() != scenario.layout() {
        return Err(Error::Structural("impedance matrix layout does not match the scenario".into()));
    }
    end_to_end_channel_with(zsys, scenario.z_generator(), scenario.z_load(), scenario.ris_terminations(), options)
}

/// Relative Frobenius distance, re-exported for report code.
pub fn relative_channel_difference(a: &CMat, b: &CMat) -> f64 {
    linalg::relative_difference(a, b)
}
