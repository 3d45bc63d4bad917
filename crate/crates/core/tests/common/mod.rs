//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the code paths it is used to check: the impedance
//! oracles re-derive the integrals from scratch, and the network oracles solve
//! the Kirchhoff equations of the whole port network as one dense system.
#![allow(dead_code)]

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use ris_core::analytical::GaussLegendre;
use ris_core::em::{BlockImpedanceMatrix, Dipole, FreeSpaceParams, Role};

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn current(z: f64, center: f64, half: f64, k: f64) -> f64 {
    (k * (half - (z - center).abs()).max(0.0)).sin() / (k * half).sin()
}

fn current_slope(z: f64, center: f64, half: f64, k: f64) -> f64 {
    let s = if z >= center { -1.0 } else { 1.0 };
    s * k * (k * (half - (z - center).abs())).cos() / (k * half).sin()
}

fn composite(a: f64, b: f64, panels: usize, rule: &GaussLegendre) -> Vec<(f64, f64)> {
    let step = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|i| {
            let lo = a + step * i as f64;
            rule.mapped(lo, lo + step).collect::<Vec<_>>()
        })
        .collect()
}

/// Induced-EMF reaction integral of the three-wave field of `p` against the
/// current of `q` by plain composite Gauss-Legendre: each half of `q` gets
/// `panels_per_half` equal panels of `order` nodes, nothing else.
pub fn induced_emf_brute_force(p: &Dipole, q: &Dipole, params: &FreeSpaceParams, rho: f64, panels_per_half: usize, order: usize) -> C {
    let k = params.wavenumber;
    let (hp, hq) = (p.length / 2.0, q.length / 2.0);
    let (zp, zq) = (p.center.z, q.center.z);
    let rule = GaussLegendre::new(order);
    let mut nodes = composite(zq - hq, zq, panels_per_half, &rule);
    nodes.extend(composite(zq, zq + hq, panels_per_half, &rule));
    let wave = |dz: f64| {
        let r = (rho * rho + dz * dz).sqrt();
        C::new((k * r).cos(), -(k * r).sin()) / r
    };
    let mut acc = C::new(0.0, 0.0);
    for (z, w) in nodes {
        let e = wave(z - zp - hp) + wave(z - zp + hp) - 2.0 * (k * hp).cos() * wave(z - zp);
        acc += e * (w * current(z, zq, hq, k));
    }
    C::new(0.0, params.eta0 / (4.0 * PI * (k * hp).sin())) * acc
}

/// Mixed-potential double integral
/// `Z = j eta / (4 pi k) int int [k^2 I_p I_q - I_p' I_q'] e^{-jkR}/R dz' dz''`,
/// an integration-by-parts route that never uses the closed-form field.
pub fn mixed_potential_double_integral(p: &Dipole, q: &Dipole, params: &FreeSpaceParams, rho: f64, panels_per_half: usize, order: usize) -> C {
    let k = params.wavenumber;
    let (hp, hq) = (p.length / 2.0, q.length / 2.0);
    let (zp, zq) = (p.center.z, q.center.z);
    let rule = GaussLegendre::new(order);
    let mut src = composite(zp - hp, zp, panels_per_half, &rule);
    src.extend(composite(zp, zp + hp, panels_per_half, &rule));
    let mut obs = composite(zq - hq, zq, panels_per_half, &rule);
    obs.extend(composite(zq, zq + hq, panels_per_half, &rule));
    let src_vals: Vec<(f64, f64, f64, f64)> = src
        .iter()
        .map(|&(z, w)| (z, w, current(z, zp, hp, k), current_slope(z, zp, hp, k)))
        .collect();
    let mut acc = C::new(0.0, 0.0);
    for &(z2, w2) in &obs {
        let (iq, dq) = (current(z2, zq, hq, k), current_slope(z2, zq, hq, k));
        let mut inner = C::new(0.0, 0.0);
        for &(z1, w1, ip, dp) in &src_vals {
            let dz = z2 - z1;
            let r = (rho * rho + dz * dz).sqrt();
            let g = C::new((k * r).cos(), -(k * r).sin()) / r;
            inner += g * (w1 * (k * k * ip * iq - dp * dq));
        }
        acc += inner * w2;
    }
    C::new(0.0, params.eta0 / (4.0 * PI * k)) * acc
}

/// Which port quantities a network oracle drives and reads.
pub struct PortImpedances<'a> {
    pub z_generator: &'a [C],
    pub z_load: &'a [C],
    pub terminations: &'a [C],
}

fn ranges(z: &BlockImpedanceMatrix) -> [std::ops::Range<usize>; 4] {
    let l = z.layout();
    [l.range(Role::Transmitter), l.range(Role::RisElement), l.range(Role::Object), l.range(Role::Receiver)]
}

/// Solves the port network `(Z + Z_term) I = V_src` for one unit generator
/// voltage per transmitter and returns `V_R / V_G` (receivers x transmitters).
///
/// With `unilateral` set, the couplings that feed energy back toward the
/// source (receiver -> RIS, receiver -> transmitter, RIS -> transmitter) are
/// dropped before the solve, which is the network the closed-form end-to-end
/// channel describes. Without it, every coupling is kept.
pub fn network_voltage_transfer(zsys: &BlockImpedanceMatrix, ports: &PortImpedances, unilateral: bool) -> Mat<C> {
    let [t, s, o, r] = ranges(zsys);
    let n = zsys.dim();
    let role_rank = |i: usize| {
        if t.contains(&i) {
            0
        } else if s.contains(&i) || o.contains(&i) {
            1
        } else {
            2
        }
    };
    let mut m = Mat::<C>::from_fn(n, n, |i, j| {
        // RIS elements and objects share a rank, so they scatter into each other both ways
        if !unilateral || role_rank(j) <= role_rank(i) {
            zsys.get(i, j)
        } else {
            C::new(0.0, 0.0)
        }
    });
    for (k, i) in t.clone().enumerate() {
        m[(i, i)] += ports.z_generator[k];
    }
    for (k, i) in s.clone().enumerate() {
        m[(i, i)] += ports.terminations[k];
    }
    for (k, i) in r.clone().enumerate() {
        m[(i, i)] += ports.z_load[k];
    }
    let lu = m.partial_piv_lu();
    let mut h = Mat::<C>::zeros(r.len(), t.len());
    for (col, ti) in t.clone().enumerate() {
        let mut rhs = Mat::<C>::zeros(n, 1);
        rhs[(ti, 0)] = C::new(1.0, 0.0);
        let currents = lu.solve(&rhs);
        for (row, ri) in r.clone().enumerate() {
            // V_R = -Z_L I_R with the passive sign convention at the load
            h[(row, col)] = -ports.z_load[row] * currents[(ri, 0)];
        }
    }
    h
}

pub fn max_rel_diff(a: &Mat<C>, b: &Mat<C>) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            num = num.max((a[(i, j)] - b[(i, j)]).norm());
            den = den.max(b[(i, j)].norm());
        }
    }
    num / den.max(f64::MIN_POSITIVE)
}

/// Random dense complex matrix with a dominant diagonal.
pub fn random_well_conditioned(n: usize, rng: &mut impl rand::Rng) -> Mat<C> {
    Mat::from_fn(n, n, |i, j| {
        let v = C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if i == j {
            v + C::new(2.0 * n as f64, 0.0)
        } else {
            v
        }
    })
}

/// Random parallel-dipole deployment with the given role counts. Centers lie
/// on a jittered grid so that no two wires come closer than 0.1 wavelength.
pub fn random_scenario(
    rng: &mut impl rand::Rng,
    counts: [usize; 4],
    direct_path_blocked: bool,
) -> ris_core::em::Scenario {
    use ris_core::em::{Point3, Scenario};
    let params = FreeSpaceParams::new(rng.random_range(1e9..6e9)).unwrap();
    let l = params.wavelength;
    let roles = [Role::Transmitter, Role::RisElement, Role::Object, Role::Receiver];
    let total: usize = counts.iter().sum();
    let side = (total as f64).sqrt().ceil() as usize;
    let mut cells: Vec<usize> = (0..side * side).collect();
    for i in (1..cells.len()).rev() {
        cells.swap(i, rng.random_range(0..=i));
    }
    let mut dipoles = Vec::new();
    let mut cell = cells.into_iter();
    for (role, &count) in roles.iter().zip(&counts) {
        for _ in 0..count {
            let c = cell.next().unwrap();
            let (gx, gy) = ((c % side) as f64, (c / side) as f64);
            let center = Point3::new(
                (gx * 0.6 + rng.random_range(0.0..0.4)) * l,
                (gy * 0.6 + rng.random_range(0.0..0.4)) * l,
                rng.random_range(-0.2..0.2) * l,
            );
            let length = rng.random_range(0.3..0.7) * l;
            let radius = rng.random_range(5e-4..2e-3) * l;
            dipoles.push(Dipole::new(center, length, radius, *role).unwrap());
        }
    }
    use rand::Rng as _;
    let imp = |rng: &mut dyn rand::RngCore, n: usize| -> Vec<C> {
        (0..n).map(|_| c(rng.random_range(10.0..100.0), rng.random_range(-30.0..30.0))).collect()
    };
    let zg = imp(rng, counts[0]);
    let zl = imp(rng, counts[3]);
    let terms = (0..counts[1]).map(|_| c(rng.random_range(0.0..5.0), rng.random_range(-200.0..200.0))).collect();
    Scenario::new(params, dipoles, zg, zl, terms, direct_path_blocked).unwrap()
}
