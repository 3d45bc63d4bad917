//! Block coordinate ascent on the RIS terminations.
//!
//! Changing one termination `z_n` by `delta` is a rank-1 change of
//! `Z_SS + Z_SOS + Z_RIS`, so with `s = Z_sca[n, n]`
//!
//! ```text
//! H' = H + t b c^T,   t = delta / (1 + s delta),
//! b = B Z_sca[:, n],  c = (Z_sca C)[n, :]
//! ```
//!
//! and `||H'||_F^2 = (alpha + 2 Re(beta' delta) + gamma' |delta|^2) / |1 + s delta|^2`.
//! Along a line of fixed resistance this is a quadratic over a quadratic in
//! the reactance, maximized by comparing the roots of its stationarity
//! condition with the interval ends.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelFactors, ChannelResult};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, norm1, CMat, MAX_CONDITION, ONE, ZERO};

/// Relative guard on the rank-1 denominator `1 + delta * inv[n, n]`.
pub const SINGULAR_UPDATE_GUARD: f64 = 1e-12;

/// `(M + delta e_n e_n^T)^-1` from `inv = M^-1` in `O(N^2)`.
pub fn sherman_morrison_update(inv: &CMat, index: usize, delta: Complex64) -> Result<CMat> {
    let n = inv.nrows();
    if inv.ncols() != n || index >= n {
        return Err(Error::Structural(format!("index {index} outside a {}x{} inverse", n, inv.ncols())));
    }
    if delta == Complex64::new(0.0, 0.0) {
        return Ok(inv.clone());
    }
    let s = inv[(index, index)];
    let den = Complex64::new(1.0, 0.0) + delta * s;
    if den.norm() <= SINGULAR_UPDATE_GUARD * (delta * s).norm() || den.norm() == 0.0 {
        return Err(Error::SingularUpdate { index, denominator: den });
    }
    let t = delta / den;
    Ok(CMat::from_fn(n, n, |i, j| inv[(i, j)] - t * inv[(i, index)] * inv[(index, j)]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// `z = jx`.
    #[default]
    ReactiveOnly,
    /// `Re z >= 0`. The coordinate optimum of a passive network always lies
    /// on `Re z = 0`, so the search runs along that line.
    PassiveComplex,
    /// No sign constraint; the search varies the reactance at the current
    /// resistance (the objective is unbounded near its pole otherwise).
    Unconstrained,
}

impl Constraint {
    pub fn name(self) -> &'static str {
        match self {
            Constraint::ReactiveOnly => "reactive_only",
            Constraint::PassiveComplex => "passive_complex",
            Constraint::Unconstrained => "unconstrained",
        }
    }

    pub fn admits(self, z: Complex64) -> bool {
        match self {
            Constraint::ReactiveOnly => z.re == 0.0,
            Constraint::PassiveComplex => z.re >= 0.0,
            Constraint::Unconstrained => true,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "reactive_only" | "reactive" => Ok(Constraint::ReactiveOnly),
            "passive_complex" | "passive" => Ok(Constraint::PassiveComplex),
            "unconstrained" => Ok(Constraint::Unconstrained),
            other => Err(Error::Configuration(format!(
                "unknown constraint '{other}' (expected reactive_only, passive_complex or unconstrained)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordinateOrder {
    #[default]
    Sequential,
    /// A fresh ChaCha8 permutation every sweep, from one seeded stream.
    RandomPermutation { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub constraint: Constraint,
    /// Zero returns the initial state untouched.
    pub max_sweeps: usize,
    /// Stop once a sweep improves the objective by less than this, relatively.
    pub tolerance: f64,
    pub initial_termination: Complex64,
    pub coordinate_order: CoordinateOrder,
    /// Reactance search interval `[-max_reactance, max_reactance]` (ohm).
    pub max_reactance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            constraint: Constraint::ReactiveOnly,
            max_sweeps: 50,
            tolerance: 1e-6,
            initial_termination: Complex64::new(0.2, 0.0),
            coordinate_order: CoordinateOrder::Sequential,
            max_reactance: 1e6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Configuration(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.max_reactance > 0.0 && self.max_reactance.is_finite()) {
            return Err(Error::Configuration(format!("max_reactance must be positive, got {}", self.max_reactance)));
        }
        if !(self.initial_termination.re.is_finite() && self.initial_termination.im.is_finite()) {
            return Err(Error::Configuration("initial termination must be finite".into()));
        }
        Ok(())
    }
}

/// Optimizer state with the cached scattering inverse and channel.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub terminations: Vec<Complex64>,
    /// `(Z_SS + Z_SOS + diag(terminations))^-1`.
    pub z_sca_inverse: CMat,
    pub h: CMat,
    /// `||H||_F^2`.
    pub objective: f64,
    /// Accepted and rejected coordinate steps taken so far.
    pub iteration: usize,
    pub history: Vec<(usize, f64)>,
    /// Coordinate steps whose improving candidates were all rejected (singular
    /// update or conditioning limit).
    pub skipped: usize,
}

impl OptimizerState {
    pub fn new(factors: &ChannelFactors, terminations: Vec<Complex64>) -> Result<Self> {
        let z_sca_inverse = factors.scattering_inverse(&terminations)?;
        let h = factors.channel_from_inverse(&z_sca_inverse);
        let objective = frobenius_sq(&h);
        Ok(Self { terminations, z_sca_inverse, h, objective, iteration: 0, history: vec![(0, objective)], skipped: 0 })
    }
}

/// `f(delta) = (alpha + 2 Re(beta delta) + gamma |delta|^2) / |1 + s delta|^2`,
/// the objective as a function of the change of one termination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateObjective {
    pub index: usize,
    /// Termination the change is measured from.
    pub current: Complex64,
    pub alpha: f64,
    pub beta: Complex64,
    pub gamma: f64,
    /// `Z_sca[n, n]`.
    pub s: Complex64,
}

impl CoordinateObjective {
    pub fn eval_delta(&self, delta: Complex64) -> f64 {
        let num = self.alpha + 2.0 * (self.beta * delta).re + self.gamma * delta.norm_sqr();
        num / (Complex64::new(1.0, 0.0) + self.s * delta).norm_sqr()
    }

    /// Objective with termination `z` at this coordinate.
    pub fn eval(&self, z: Complex64) -> f64 {
        self.eval_delta(z - self.current)
    }

    /// Coefficients `(n0, n1, n2)` and `(d0, d1, d2)` of numerator and
    /// denominator along `z = r + jx`, as polynomials in `x`.
    fn along_line(&self, r: f64) -> ([f64; 3], [f64; 3]) {
        let d0 = Complex64::new(r - self.current.re, -self.current.im);
        let n2 = self.gamma;
        let n1 = -2.0 * self.beta.im + 2.0 * self.gamma * d0.im;
        let n0 = self.alpha + 2.0 * (self.beta * d0).re + self.gamma * d0.norm_sqr();
        let w = Complex64::new(1.0, 0.0) + self.s * d0;
        let v = Complex64::new(0.0, 1.0) * self.s;
        ([n0, n1, n2], [w.norm_sqr(), 2.0 * (w.conj() * v).re, v.norm_sqr()])
    }

    /// Reactances on the line `Re z = r` where the derivative vanishes.
    pub fn stationary_reactances(&self, r: f64) -> Vec<f64> {
        let ([n0, n1, n2], [d0, d1, d2]) = self.along_line(r);
        let qa = n2 * d1 - n1 * d2;
        let qb = 2.0 * (n2 * d0 - n0 * d2);
        let qc = n1 * d0 - n0 * d1;
        let scale = qa.abs().max(qb.abs()).max(qc.abs());
        if scale == 0.0 || !scale.is_finite() {
            return Vec::new();
        }
        let (qa, qb, qc) = (qa / scale, qb / scale, qc / scale);
        if qa.abs() < 1e-14 {
            return if qb.abs() < 1e-14 { Vec::new() } else { vec![-qc / qb] };
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return Vec::new();
        }
        // numerically stable pair
        let q = -0.5 * (qb + qb.signum() * disc.sqrt());
        let mut roots = vec![q / qa];
        if q != 0.0 {
            roots.push(qc / q);
        }
        roots
    }
}

/// Coefficients of the coordinate objective from the cached state.
pub fn coordinate_objective(state: &OptimizerState, factors: &ChannelFactors, index: usize) -> Result<CoordinateObjective> {
    let ns = state.terminations.len();
    if index >= ns {
        return Err(Error::Structural(format!("coordinate {index} outside {ns} RIS elements")));
    }
    let (b, c) = rank_one_vectors(state, factors, index);
    let h = &state.h;
    let mut beta = Complex64::new(0.0, 0.0);
    for j in 0..h.ncols() {
        for i in 0..h.nrows() {
            beta += h[(i, j)].conj() * b[i] * c[j];
        }
    }
    let gamma = b.iter().map(|v| v.norm_sqr()).sum::<f64>() * c.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let alpha = state.objective;
    let s = state.z_sca_inverse[(index, index)];
    Ok(CoordinateObjective {
        index,
        current: state.terminations[index],
        alpha,
        beta: alpha * s + beta,
        gamma: alpha * s.norm_sqr() + 2.0 * (s.conj() * beta).re + gamma,
        s,
    })
}

/// `b = B Z_sca[:, n]` and `c = (Z_sca C)[n, :]`.
fn rank_one_vectors(state: &OptimizerState, factors: &ChannelFactors, index: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let inv = &state.z_sca_inverse;
    let ns = inv.nrows();
    let b = (0..factors.b.nrows())
        .map(|i| (0..ns).map(|k| factors.b[(i, k)] * inv[(k, index)]).sum())
        .collect();
    let c = (0..factors.c.ncols())
        .map(|j| (0..ns).map(|k| inv[(index, k)] * factors.c[(k, j)]).sum())
        .collect();
    (b, c)
}

/// Maximizer of `f` on `[lo, hi]` by golden-section search (for unimodal `f`).
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol * (1.0 + x1.abs().max(x2.abs())) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Candidate terminations for one coordinate under `config`, best first,
/// each with its predicted objective. Ties go to the smaller `|z|`.
pub fn ranked_terminations(obj: &CoordinateObjective, config: &OptimizerConfig) -> Vec<(Complex64, f64)> {
    let r = match config.constraint {
        Constraint::ReactiveOnly | Constraint::PassiveComplex => 0.0,
        Constraint::Unconstrained => obj.current.re,
    };
    let xmax = config.max_reactance;
    let mut candidates: Vec<f64> = obj.stationary_reactances(r).into_iter().filter(|x| x.is_finite()).map(|x| x.clamp(-xmax, xmax)).collect();
    candidates.extend([-xmax, xmax]);
    if r == obj.current.re && obj.current.im.abs() <= xmax {
        candidates.push(obj.current.im);
    }
    let mut ranked: Vec<(Complex64, f64)> = candidates
        .into_iter()
        .map(|x| {
            let z = Complex64::new(r, x);
            (z, obj.eval(z))
        })
        .filter(|(_, f)| f.is_finite())
        .collect();
    if ranked.is_empty() {
        // every candidate sat on a pole: fall back to a bracketed search
        let x = golden_section_max(|x| obj.eval(Complex64::new(r, x)), -xmax, xmax, 1e-10);
        let z = Complex64::new(r, x);
        return vec![(z, obj.eval(z))];
    }
    ranked.sort_by(|a, b| {
        let tie = (a.1 - b.1).abs() <= 1e-12 * a.1.abs().max(b.1.abs());
        if tie {
            a.0.norm().total_cmp(&b.0.norm())
        } else {
            b.1.total_cmp(&a.1)
        }
    });
    ranked.dedup_by(|a, b| a.0 == b.0);
    ranked
}

/// Best termination for one coordinate under `config`, with its predicted
/// objective.
pub fn best_termination(obj: &CoordinateObjective, config: &OptimizerConfig) -> (Complex64, f64) {
    ranked_terminations(obj, config)[0]
}

/// `||Z_SS + Z_SOS + diag(terminations)||_1`.
fn scattering_sum_norm1(factors: &ChannelFactors, terminations: &[Complex64]) -> f64 {
    let s = &factors.s;
    (0..s.ncols())
        .map(|j| (0..s.nrows()).map(|i| (s[(i, j)] + if i == j { terminations[j] } else { ZERO }).norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Replaces termination `index` by its coordinate optimum. A step that would
/// lower the objective, hit a singular update or push the scattering sum past
/// the conditioning limit is not taken; the next best candidate is tried.
pub fn optimize_coordinate(state: &mut OptimizerState, factors: &ChannelFactors, index: usize, config: &OptimizerConfig) -> Result<()> {
    let obj = coordinate_objective(state, factors, index)?;
    state.iteration += 1;
    let current = state.terminations[index];
    // an infeasible starting point (e.g. resistive init under ReactiveOnly) must move
    let must_move = !config.constraint.admits(current);
    let mut rejected = false;
    for (z, predicted) in ranked_terminations(&obj, config) {
        if z == current || (!must_move && predicted <= state.objective) {
            break;
        }
        let delta = z - current;
        let inv = match sherman_morrison_update(&state.z_sca_inverse, index, delta) {
            Ok(inv) => inv,
            Err(Error::SingularUpdate { index, denominator }) => {
                log::debug!("coordinate {index}: candidate {z} rejected, singular update (denominator {denominator})");
                rejected = true;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut terms = state.terminations.clone();
        terms[index] = z;
        let condition = scattering_sum_norm1(factors, &terms) * norm1(&inv);
        // negated so that a NaN condition is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let ill = !(condition <= MAX_CONDITION);
        if ill {
            log::debug!("coordinate {index}: candidate {z} rejected, condition {condition:.3e}");
            rejected = true;
            continue;
        }
        let (b, c) = rank_one_vectors(state, factors, index);
        let t = delta / (ONE + delta * state.z_sca_inverse[(index, index)]);
        let h = CMat::from_fn(state.h.nrows(), state.h.ncols(), |i, j| state.h[(i, j)] + t * b[i] * c[j]);
        state.objective = frobenius_sq(&h);
        state.h = h;
        state.z_sca_inverse = inv;
        state.terminations = terms;
        rejected = false;
        break;
    }
    if rejected {
        log::warn!("coordinate {index} skipped: no admissible well-conditioned update");
        state.skipped += 1;
    }
    state.history.push((state.iteration, state.objective));
    Ok(())
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub terminations: Vec<Complex64>,
    pub channel: ChannelResult,
    /// `(coordinate step, ||H||_F^2)`, starting with the initial point.
    pub history: Vec<(usize, f64)>,
    pub sweeps: usize,
    pub state: OptimizerState,
}

/// Sweeps over all coordinates until a sweep gains less than the tolerance
/// or the sweep budget is spent.
pub fn optimize_ris(factors: &ChannelFactors, config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate()?;
    let ns = factors.ris_count();
    let mut state = OptimizerState::new(factors, vec![config.initial_termination; ns])?;
    let mut rng = match config.coordinate_order {
        CoordinateOrder::RandomPermutation { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        CoordinateOrder::Sequential => None,
    };
    let mut order: Vec<usize> = (0..ns).collect();
    let mut sweeps = 0;
    while sweeps < config.max_sweeps && ns > 0 {
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let before = state.objective;
        for &n in &order {
            optimize_coordinate(&mut state, factors, n, config)?;
        }
        sweeps += 1;
        let gain = (state.objective - before) / before.max(f64::MIN_POSITIVE);
        log::debug!("sweep {sweeps}: objective {:.6e} (relative gain {gain:.3e})", state.objective);
        if gain < config.tolerance && state.terminations.iter().all(|z| config.constraint.admits(*z)) {
            break;
        }
    }
    let channel = factors.channel(&state.terminations)?;
    Ok(OptimizationResult { terminations: state.terminations.clone(), channel, history: state.history.clone(), sweeps, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{factor, identity};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_delta_is_identity() {
        let m = CMat::from_fn(3, 3, |i, j| c(1.0 + (i * j) as f64, (i + j) as f64) + if i == j { c(5.0, 0.0) } else { c(0.0, 0.0) });
        let inv = factor(&m, "m").unwrap().inverse();
        let out = sherman_morrison_update(&inv, 1, c(0.0, 0.0)).unwrap();
        assert_eq!(out, inv);
    }

    #[test]
    fn singular_denominator_is_rejected() {
        let inv = identity(2);
        assert!(matches!(sherman_morrison_update(&inv, 0, c(-1.0, 0.0)), Err(Error::SingularUpdate { index: 0, .. })));
        assert!(matches!(sherman_morrison_update(&inv, 2, c(1.0, 0.0)), Err(Error::Structural(_))));
    }

    #[test]
    fn golden_section_finds_peak() {
        let x = golden_section_max(|x| -(x - 1.5) * (x - 1.5), -10.0, 10.0, 1e-12);
        assert!((x - 1.5).abs() < 1e-8);
    }

    #[test]
    fn constraint_parsing() {
        assert_eq!("Reactive_Only".parse::<Constraint>().unwrap(), Constraint::ReactiveOnly);
        assert_eq!("passive-complex".parse::<Constraint>().unwrap(), Constraint::PassiveComplex);
        assert!("box".parse::<Constraint>().is_err());
        assert!(Constraint::ReactiveOnly.admits(c(0.0, 3.0)));
        assert!(!Constraint::ReactiveOnly.admits(c(0.2, 0.0)));
        assert!(!Constraint::PassiveComplex.admits(c(-0.1, 0.0)));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig { tolerance: 0.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { max_reactance: f64::INFINITY, ..Default::default() }.validate().is_err());
    }
}
