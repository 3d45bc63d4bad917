use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use super::dipole::Role;
use super::scenario::RoleLayout;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Which engine produced an impedance matrix or channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Engine {
    Analytical,
    Peec,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytical => "analytical",
            Engine::Peec => "peec",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analytical" => Ok(Engine::Analytical),
            "peec" => Ok(Engine::Peec),
            other => Err(Error::Configuration(format!("unknown engine `{other}` (expected analytical or peec)"))),
        }
    }
}

/// System impedance matrix with role-indexed blocks in (T, S, O, R) order.
#[derive(Debug, Clone)]
pub struct BlockImpedanceMatrix {
    layout: RoleLayout,
    matrix: CMat,
    engine: Engine,
}

impl BlockImpedanceMatrix {
    pub fn new(layout: RoleLayout, matrix: CMat, engine: Engine) -> Result<Self> {
        let n = layout.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Structural(format!(
                "system matrix is {}x{}, layout needs {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { layout, matrix, engine })
    }

    pub fn layout(&self) -> RoleLayout {
        self.layout
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.total()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    /// Owned copy of the `rows x cols` block, e.g. `block(Role::Receiver, Role::RisElement)` is Z_RS.
    pub fn block(&self, rows: Role, cols: Role) -> CMat {
        linalg::block(&self.matrix, self.layout.range(rows), self.layout.range(cols))
    }

    /// `max |Z - Z^T| / max |Z|`.
    pub fn symmetry_defect(&self) -> f64 {
        linalg::symmetry_defect(&self.matrix)
    }

    /// Zeroes the transmitter/receiver coupling blocks (obstructed line of sight).
    pub fn block_direct_path(&mut self) {
        let t = self.layout.range(Role::Transmitter);
        let r = self.layout.range(Role::Receiver);
        for i in r.clone() {
            for j in t.clone() {
                self.matrix[(i, j)] = linalg::ZERO;
                self.matrix[(j, i)] = linalg::ZERO;
            }
        }
    }
}
