//! Partial element equivalent circuit (PEEC) solver for thin-wire dipoles.
//!
//! Each dipole is cut into uniform current cells (branches) with charge
//! cells around the nodes between them. Retarded partial inductances and
//! potential coefficients couple the cells, Kirchhoff's laws give the MNA
//! system of [`mna`], and the multiport impedance matrix follows from one
//! unit-current solve per port with every other port left open.

pub mod elements;
pub mod mesh;
pub mod mna;

pub use elements::{assemble_partial_elements, parallel_filament_integral, PartialElements};
pub use mesh::{mesh_dipole, mesh_dipole_segments, mesh_scenario, segment_count, Branch, Cell, Node, PeecMesh, MIN_SEGMENTS};
pub use mna::{assemble_mna, kcl_defect, solve_mna, Lumped, MnaSolution, MnaSystem, Source};

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::em::{BlockImpedanceMatrix, Dipole, Engine, FreeSpaceParams, Scenario};
use crate::error::{Error, Result};
use crate::linalg::{factor, CMat};

pub const DEFAULT_SEGMENTS_PER_HALFWAVE: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeecConfig {
    pub segments_per_halfwave: usize,
    pub refinement_check: bool,
}

impl Default for PeecConfig {
    fn default() -> Self {
        Self { segments_per_halfwave: DEFAULT_SEGMENTS_PER_HALFWAVE, refinement_check: false }
    }
}

/// `s = j omega` at the scenario frequency.
pub fn laplace_frequency(params: &FreeSpaceParams) -> Complex64 {
    Complex64::new(0.0, params.omega())
}

/// Open-circuit impedance matrix of the mesh ports.
///
/// Every feed-branch current is prescribed (one for the driven port, zero for
/// the open ones) and the feed-gap voltages become unknowns instead, so one
/// factorization of the bordered matrix serves all ports.
pub fn port_impedance_matrix(mesh: &PeecMesh, elements: &PartialElements, s: Complex64) -> Result<CMat> {
    let system = assemble_mna(elements, mesh, &[], &[], s)?;
    let mut m = system.scaled_matrix();
    let n = m.nrows();
    let ports = &mesh.port_map;
    // columns of the feed currents, in the scaled system (branch scale is one)
    let driven = Mat::from_fn(n, ports.len(), |i, p| -m[(i, ports[p])]);
    for &k in ports {
        for i in 0..n {
            m[(i, k)] = Complex64::new(0.0, 0.0);
        }
        m[(k, k)] = Complex64::new(-1.0, 0.0);
    }
    let x = factor(&m, "bordered port extraction matrix")?.solve(&driven);
    Ok(Mat::from_fn(ports.len(), ports.len(), |q, p| x[(ports[q], p)]))
}

/// System impedance matrix of a scenario from the PEEC model.
pub fn extract_zsys_peec(scenario: &Scenario, config: &PeecConfig) -> Result<BlockImpedanceMatrix> {
    let mesh = mesh_scenario(scenario, config.segments_per_halfwave)?;
    let params = scenario.params();
    let elements = assemble_partial_elements(&mesh, params)?;
    let z = port_impedance_matrix(&mesh, &elements, laplace_frequency(params))?;
    log::debug!(
        "PEEC extraction: {} branches, {} nodes, {} ports",
        mesh.branch_count(),
        mesh.node_count(),
        mesh.port_map.len()
    );
    let mut zsys = BlockImpedanceMatrix::new(scenario.layout(), z, Engine::Peec)?;
    if scenario.direct_path_blocked() {
        zsys.block_direct_path();
    }
    Ok(zsys)
}

/// Input impedance of an isolated center-fed dipole meshed into `segments`.
pub fn feed_impedance(dipole: &Dipole, params: &FreeSpaceParams, segments: usize) -> Result<Complex64> {
    let mesh = mesh_dipole_segments(dipole, segments)?;
    let elements = assemble_partial_elements(&mesh, params)?;
    let z = port_impedance_matrix(&mesh, &elements, laplace_frequency(params))?;
    Ok(z[(0, 0)])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementReport {
    pub coarse_segments: usize,
    pub fine_segments: usize,
    pub coarse: Complex64,
    pub fine: Complex64,
}

impl RefinementReport {
    /// `|Z_fine - Z_coarse| / |Z_fine|`.
    pub fn relative_change(&self) -> f64 {
        (self.fine - self.coarse).norm() / self.fine.norm()
    }
}

/// Feed impedance of `dipole` at its configured mesh and at the refined mesh
/// with `2 n - 1` segments (every segment halved).
pub fn refinement_check(dipole: &Dipole, params: &FreeSpaceParams, config: &PeecConfig) -> Result<RefinementReport> {
    let n = segment_count(dipole.length, params.wavelength, config.segments_per_halfwave)?;
    let fine_n = 2 * n - 1;
    Ok(RefinementReport {
        coarse_segments: n,
        fine_segments: fine_n,
        coarse: feed_impedance(dipole, params, n)?,
        fine: feed_impedance(dipole, params, fine_n)?,
    })
}

/// Refinement check on the first transmitter of a scenario.
pub fn scenario_refinement_check(scenario: &Scenario, config: &PeecConfig) -> Result<RefinementReport> {
    let d = scenario
        .dipoles()
        .first()
        .ok_or_else(|| Error::Structural("scenario has no dipoles".into()))?;
    refinement_check(d, scenario.params(), config)
}
