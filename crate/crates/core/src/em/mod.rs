//! Physical constants, geometry and the scenario data model.

mod dipole;
mod params;
mod scenario;
mod zsys;

pub use dipole::{Dipole, Point3, Role, MAX_RADIUS_FRACTION};
pub use params::{free_space_params, FreeSpaceParams, EPS0, MU0};
pub use scenario::{
    build_reference_scenario, RoleLayout, Scenario, DEFAULT_PORT_IMPEDANCE_OHM, DEFAULT_RADIUS_WAVELENGTHS,
    REFERENCE_FREQUENCY_HZ,
};
pub use zsys::{BlockImpedanceMatrix, Engine};

pub(crate) use scenario::ScenarioFile;
