use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use super::mesh::{Cell, PeecMesh};
use crate::analytical::GaussLegendre;
use crate::em::FreeSpaceParams;
use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Beyond this many cell lengths the kernel is integrated by a 4 x 4 Gauss
/// rule alone; closer in, the `1/R` singularity is handled in closed form.
const FAR_RATIO: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct PartialElements {
    /// Partial inductances (H), branches x branches.
    pub lp: CMat,
    /// Potential coefficients (1/F), nodes x nodes.
    pub p: CMat,
    /// Series cell impedances (ohm), one per branch.
    pub z_cell: Vec<Complex64>,
}

/// `F(u) = u asinh(u / rho) - sqrt(u^2 + rho^2)`, the second antiderivative
/// of `1 / sqrt(u^2 + rho^2)`.
fn antiderivative(u: f64, rho: f64) -> f64 {
    u * (u / rho).asinh() - (u * u + rho * rho).sqrt()
}

/// `int_a int_b dz dz' / sqrt(rho^2 + (z - z')^2)` for two parallel axial
/// stretches, in closed form.
pub fn parallel_filament_integral(a: (f64, f64), b: (f64, f64), rho: f64) -> f64 {
    let f = |u| antiderivative(u, rho);
    f(a.1 - b.0) - f(a.1 - b.1) - f(a.0 - b.0) + f(a.0 - b.1)
}

/// Axis separation used in the kernel: the wire radius for cells on the same
/// axis (thin-wire reduced kernel), the axis distance otherwise.
fn kernel_rho(a: &Cell, b: &Cell) -> f64 {
    let d = (a.x - b.x).hypot(a.y - b.y);
    if d < a.radius + b.radius {
        0.5 * (a.radius + b.radius)
    } else {
        d
    }
}

fn center_distance(a: &Cell, b: &Cell) -> f64 {
    let dz = a.center_z() - b.center_z();
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + dz * dz).sqrt()
}

/// Retarded `int int e^{-jkR}/R` between two cells. Near pairs (and a cell
/// with itself) take the static integral in closed form plus the smooth
/// remainder `(e^{-jkR} - 1)/R` by quadrature; far pairs integrate the full
/// kernel by quadrature. Either way the first-order term is exactly
/// `-jk len_a len_b`, which keeps the quasi-static limit lossless.
///
/// For cells on one axis the regular `sin(kR)/R` part is taken on the axis
/// itself rather than at the reduced-kernel offset, so the lossy part of the
/// whole mesh stays a positive semidefinite Gram form.
fn retarded_integral(a: &Cell, b: &Cell, same: bool, k: f64, rule: &GaussLegendre) -> Result<Complex64> {
    let rc = center_distance(a, b);
    if !same && rc == 0.0 {
        return Err(Error::Geometry(format!(
            "distinct cells share the center ({}, {}, {})",
            a.x,
            a.y,
            a.center_z()
        )));
    }
    let coaxial = same || (a.x - b.x).hypot(a.y - b.y) < a.radius + b.radius;
    let rho = if same { a.radius } else { kernel_rho(a, b) };
    let near = same || rc <= FAR_RATIO * a.length().max(b.length());
    let mut acc = Complex64::new(0.0, 0.0);
    for (z1, w1) in rule.mapped(a.lo, a.hi) {
        for (z2, w2) in rule.mapped(b.lo, b.hi) {
            let dz = z1 - z2;
            let r = (rho * rho + dz * dz).sqrt();
            let half = (0.5 * k * r).sin();
            let sinc = if coaxial {
                let r0 = dz.abs();
                if k * r0 < 1e-8 {
                    k
                } else {
                    (k * r0).sin() / r0
                }
            } else {
                (k * r).sin() / r
            };
            // e^{-jkR} - 1 = -2 sin^2(kR/2) - j sin(kR)
            let re = if near { -2.0 * half * half / r } else { (1.0 - 2.0 * half * half) / r };
            acc += Complex64::new(re, -sinc) * (w1 * w2);
        }
    }
    if near {
        acc += parallel_filament_integral((a.lo, a.hi), (b.lo, b.hi), rho);
    }
    Ok(acc)
}

/// Symmetric matrix of pairwise values, each computed once.
fn symmetric<F>(cells: &[Cell], f: F) -> Result<CMat>
where
    F: Fn(usize, usize) -> Result<Complex64> + Sync,
{
    let n = cells.len();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| f(i, j)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut m = Mat::<Complex64>::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Retarded partial inductances and potential coefficients of a mesh.
/// Cells are perfect conductors, so the series cell impedances are zero.
pub fn assemble_partial_elements(mesh: &PeecMesh, params: &FreeSpaceParams) -> Result<PartialElements> {
    let k = params.wavenumber;
    let rule = GaussLegendre::new(4);
    let branches: Vec<Cell> = mesh.branches.iter().map(|b| b.cell).collect();
    let nodes: Vec<Cell> = mesh.nodes.iter().map(|n| n.cell).collect();

    let mu = params.mu0 / (4.0 * PI);
    let lp = symmetric(&branches, |i, j| Ok(mu * retarded_integral(&branches[i], &branches[j], i == j, k, &rule)?))?;

    let pe = 1.0 / (4.0 * PI * params.eps0);
    let p = symmetric(&nodes, |i, j| {
        let (a, b) = (&nodes[i], &nodes[j]);
        Ok(pe * retarded_integral(a, b, i == j, k, &rule)? / (a.length() * b.length()))
    })?;
    Ok(PartialElements { lp, p, z_cell: vec![Complex64::new(0.0, 0.0); branches.len()] })
}
