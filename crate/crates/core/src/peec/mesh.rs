use faer::Mat;

use crate::em::{Dipole, Scenario};
use crate::error::{Error, Result};

/// Smallest accepted segments-per-half-wave density.
pub const MIN_SEGMENTS: usize = 5;

/// A straight stretch `[lo, hi]` of a z-directed wire axis at `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub dipole: usize,
    pub x: f64,
    pub y: f64,
    pub lo: f64,
    pub hi: f64,
    pub radius: f64,
}

impl Cell {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center_z(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Volume current cell between two nodes; current flows `from -> to` (+z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub cell: Cell,
    pub from: usize,
    pub to: usize,
}

/// Surface charge cell around one node. End nodes own half cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub cell: Cell,
    /// Position of the node itself on the axis.
    pub z: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeecMesh {
    pub branches: Vec<Branch>,
    pub nodes: Vec<Node>,
    /// Feed (port) branch of each dipole, in scenario order.
    pub port_map: Vec<usize>,
    /// Segment count of each dipole.
    pub segments: Vec<usize>,
}

impl PeecMesh {
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Dense branch x node incidence: `+1` at the node a branch leaves, `-1`
    /// at the node it enters.
    pub fn incidence(&self) -> Mat<f64> {
        let mut a = Mat::<f64>::zeros(self.branch_count(), self.node_count());
        for (b, br) in self.branches.iter().enumerate() {
            a[(b, br.from)] = 1.0;
            a[(b, br.to)] = -1.0;
        }
        a
    }

    /// Appends another fragment, renumbering its nodes, branches and dipole.
    pub fn append(&mut self, mut other: PeecMesh, dipole: usize) {
        let (nb, nn) = (self.branches.len(), self.nodes.len());
        for br in &mut other.branches {
            br.from += nn;
            br.to += nn;
            br.cell.dipole = dipole;
        }
        for node in &mut other.nodes {
            node.cell.dipole = dipole;
        }
        self.branches.extend(other.branches);
        self.nodes.extend(other.nodes);
        self.port_map.extend(other.port_map.iter().map(|b| b + nb));
        self.segments.extend(other.segments);
    }
}

/// Segment count for a dipole of `length` at `wavelength`: the odd integer
/// nearest to `segments_per_halfwave * length / (wavelength / 2)`, at least
/// [`MIN_SEGMENTS`] and fine enough that every segment is at most a tenth of
/// a wavelength.
pub fn segment_count(length: f64, wavelength: f64, segments_per_halfwave: usize) -> Result<usize> {
    if segments_per_halfwave < MIN_SEGMENTS {
        return Err(Error::Configuration(format!(
            "segments_per_halfwave must be at least {MIN_SEGMENTS}, got {segments_per_halfwave}"
        )));
    }
    if segments_per_halfwave.is_multiple_of(2) {
        return Err(Error::Configuration(format!(
            "segments_per_halfwave must be odd so that a center feed branch exists, got {segments_per_halfwave}"
        )));
    }
    let target = segments_per_halfwave as f64 * length / (0.5 * wavelength);
    // nearest odd: 2 * round((t - 1) / 2) + 1
    let mut n = (2.0 * ((target - 1.0) / 2.0).round() + 1.0).max(MIN_SEGMENTS as f64) as usize;
    while length / n as f64 > wavelength / 10.0 {
        n += 2;
    }
    Ok(n)
}

/// Uniform mesh of one dipole into `n` branches and `n + 1` nodes, fed at the
/// central branch.
pub fn mesh_dipole_segments(d: &Dipole, n: usize) -> Result<PeecMesh> {
    if n < MIN_SEGMENTS || n.is_multiple_of(2) {
        return Err(Error::Configuration(format!("a dipole needs an odd segment count of at least {MIN_SEGMENTS}, got {n}")));
    }
    if !d.is_z_directed() {
        return Err(Error::Geometry("PEEC meshing supports z-directed dipoles only".into()));
    }
    let (x, y) = (d.center.x, d.center.y);
    let lo = d.center.z - d.half_length();
    let step = d.length / n as f64;
    let at = |k: usize| if k == n { d.center.z + d.half_length() } else { lo + step * k as f64 };
    let cell = |a: f64, b: f64| Cell { dipole: 0, x, y, lo: a, hi: b, radius: d.radius };
    let branches = (0..n).map(|k| Branch { cell: cell(at(k), at(k + 1)), from: k, to: k + 1 }).collect();
    let nodes = (0..=n)
        .map(|k| {
            let z = at(k);
            let a = if k == 0 { z } else { 0.5 * (at(k - 1) + z) };
            let b = if k == n { z } else { 0.5 * (z + at(k + 1)) };
            Node { cell: cell(a, b), z }
        })
        .collect();
    Ok(PeecMesh { branches, nodes, port_map: vec![n / 2], segments: vec![n] })
}

/// Mesh of one dipole at the density `segments_per_halfwave`.
pub fn mesh_dipole(d: &Dipole, segments_per_halfwave: usize, wavelength: f64) -> Result<PeecMesh> {
    mesh_dipole_segments(d, segment_count(d.length, wavelength, segments_per_halfwave)?)
}

/// Mesh of every dipole of a scenario, in scenario order.
pub fn mesh_scenario(scenario: &Scenario, segments_per_halfwave: usize) -> Result<PeecMesh> {
    let wavelength = scenario.params().wavelength;
    let mut mesh = PeecMesh::default();
    for (i, d) in scenario.dipoles().iter().enumerate() {
        mesh.append(mesh_dipole(d, segments_per_halfwave, wavelength)?, i);
    }
    Ok(mesh)
}
