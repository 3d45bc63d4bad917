use faer::Mat;
use num_complex::Complex64;

use super::elements::PartialElements;
use super::mesh::PeecMesh;
use crate::em::{EPS0, MU0};
use crate::error::{Error, Result};
use crate::linalg::{factor, CMat, ZERO};

/// Lumped element stamped into the circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lumped {
    /// Impedance in series with the feed branch of `port` (termination or load).
    Series { port: usize, impedance: Complex64 },
    /// Admittance between two nodes.
    Shunt { a: usize, b: usize, admittance: Complex64 },
}

/// Independent source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// Delta-gap voltage in the feed branch of `port`, driving current along +z.
    Voltage { port: usize, volts: Complex64 },
    /// Current injected into a node.
    Current { node: usize, amperes: Complex64 },
}

/// Frequency-domain MNA system
///
/// ```text
/// [ Z + s Lp    -A  ] [ I   ]   [ V_s ]
/// [ A^T   s P^-1 + Y] [ Phi ] = [ I_s ]
/// ```
///
/// with `A` the branch x node incidence.
#[derive(Debug, Clone)]
pub struct MnaSystem {
    pub matrix: CMat,
    pub rhs: CMat,
    pub branches: usize,
    pub nodes: usize,
    /// Node-potential scaling applied before factorization (ohm).
    scale: f64,
}

#[derive(Debug, Clone)]
pub struct MnaSolution {
    pub currents: Vec<Complex64>,
    pub potentials: Vec<Complex64>,
    /// `||M x - rhs|| / ||rhs||` (absolute when the rhs vanishes).
    pub residual: f64,
}

fn port_branch(mesh: &PeecMesh, port: usize) -> Result<usize> {
    mesh.port_map.get(port).copied().ok_or_else(|| {
        Error::Structural(format!("port {port} outside a mesh with {} ports", mesh.port_map.len()))
    })
}

fn check_node(mesh: &PeecMesh, node: usize) -> Result<()> {
    if node >= mesh.node_count() {
        return Err(Error::Structural(format!("node {node} outside a mesh with {} nodes", mesh.node_count())));
    }
    Ok(())
}

/// Builds the MNA system at complex frequency `s = j omega`.
pub fn assemble_mna(elements: &PartialElements, mesh: &PeecMesh, lumped: &[Lumped], excitation: &[Source], s: Complex64) -> Result<MnaSystem> {
    if !(s.re == 0.0 && s.im > 0.0) {
        return Err(Error::Domain(format!("MNA frequency must be s = j omega with omega > 0, got {s}")));
    }
    let (nb, nn) = (mesh.branch_count(), mesh.node_count());
    if elements.lp.nrows() != nb || elements.p.nrows() != nn || elements.z_cell.len() != nb {
        return Err(Error::Structural("partial elements do not match the mesh".into()));
    }
    let p_inv = factor(&elements.p, "potential coefficient matrix P")?.inverse();

    let mut m = Mat::<Complex64>::zeros(nb + nn, nb + nn);
    for j in 0..nb {
        for i in 0..nb {
            m[(i, j)] = s * elements.lp[(i, j)];
        }
        m[(j, j)] += elements.z_cell[j];
    }
    for (b, br) in mesh.branches.iter().enumerate() {
        m[(b, nb + br.from)] = Complex64::new(-1.0, 0.0);
        m[(b, nb + br.to)] = Complex64::new(1.0, 0.0);
        m[(nb + br.from, b)] = Complex64::new(1.0, 0.0);
        m[(nb + br.to, b)] = Complex64::new(-1.0, 0.0);
    }
    for j in 0..nn {
        for i in 0..nn {
            m[(nb + i, nb + j)] = s * p_inv[(i, j)];
        }
    }
    for l in lumped {
        match *l {
            Lumped::Series { port, impedance } => {
                let b = port_branch(mesh, port)?;
                m[(b, b)] += impedance;
            }
            Lumped::Shunt { a, b, admittance } => {
                check_node(mesh, a)?;
                check_node(mesh, b)?;
                if !admittance.is_finite() {
                    return Err(Error::Domain(format!("lumped admittance {admittance} is not finite")));
                }
                m[(nb + a, nb + a)] += admittance;
                m[(nb + b, nb + b)] += admittance;
                m[(nb + a, nb + b)] -= admittance;
                m[(nb + b, nb + a)] -= admittance;
            }
        }
    }
    let mut rhs = Mat::<Complex64>::zeros(nb + nn, 1);
    for src in excitation {
        match *src {
            Source::Voltage { port, volts } => rhs[(port_branch(mesh, port)?, 0)] += volts,
            Source::Current { node, amperes } => {
                check_node(mesh, node)?;
                rhs[(nb + node, 0)] += amperes;
            }
        }
    }
    Ok(MnaSystem { matrix: m, rhs, branches: nb, nodes: nn, scale: (MU0 / EPS0).sqrt() })
}

impl MnaSystem {
    pub fn dim(&self) -> usize {
        self.branches + self.nodes
    }

    /// `D M D` with `D = diag(1, .., 1, eta, .., eta)`, which brings the
    /// branch (ohm) and node (siemens) blocks to comparable magnitudes.
    pub(crate) fn scaled_matrix(&self) -> CMat {
        let nb = self.branches;
        let d = |i: usize| if i < nb { 1.0 } else { self.scale };
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.matrix[(i, j)] * (d(i) * d(j)))
    }

    pub(crate) fn node_scale(&self) -> f64 {
        self.scale
    }
}

/// Solves the MNA system by LU with partial pivoting.
pub fn solve_mna(system: &MnaSystem) -> Result<MnaSolution> {
    let nb = system.branches;
    let n = system.dim();
    let eta = system.node_scale();
    let lu = factor(&system.scaled_matrix(), "MNA system matrix")?;
    let scaled_rhs = Mat::from_fn(n, 1, |i, _| system.rhs[(i, 0)] * if i < nb { 1.0 } else { eta });
    let y = lu.solve(&scaled_rhs);
    let x = Mat::from_fn(n, 1, |i, _| y[(i, 0)] * if i < nb { 1.0 } else { eta });

    let r = &system.matrix * &x - &system.rhs;
    let norm = |v: &CMat| (0..v.nrows()).map(|i| v[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
    let rhs_norm = norm(&system.rhs);
    let residual = if rhs_norm > 0.0 { norm(&r) / rhs_norm } else { norm(&r) };
    Ok(MnaSolution {
        currents: (0..nb).map(|i| x[(i, 0)]).collect(),
        potentials: (nb..n).map(|i| x[(i, 0)]).collect(),
        residual,
    })
}

/// Charge-corrected KCL defect at every node, `A^T I + s P^-1 Phi + Y Phi - I_s`,
/// read back from the system rows.
pub fn kcl_defect(system: &MnaSystem, solution: &MnaSolution) -> Vec<Complex64> {
    let nb = system.branches;
    (0..system.nodes)
        .map(|i| {
            let row = nb + i;
            let mut acc = ZERO;
            for (j, v) in solution.currents.iter().chain(&solution.potentials).enumerate() {
                acc += system.matrix[(row, j)] * v;
            }
            acc - system.rhs[(row, 0)]
        })
        .collect()
}
