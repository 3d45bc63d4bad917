//! The link description shared by both engines, its TOML schema and the
//! built-in reference deployment.

use std::ops::Range;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dipole::{Dipole, Point3, Role};
use super::params::FreeSpaceParams;
use crate::error::{Error, Result};

/// Operating frequency of the built-in deployment.
pub const REFERENCE_FREQUENCY_HZ: f64 = 3e9;
/// Generator and load impedance used when none is given.
pub const DEFAULT_PORT_IMPEDANCE_OHM: f64 = 50.0;
/// Default wire radius as a fraction of the wavelength.
pub const DEFAULT_RADIUS_WAVELENGTHS: f64 = 1e-3;

/// Number of dipoles per role, in block order (T, S, O, R).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoleLayout {
    pub transmitters: usize,
    pub ris: usize,
    pub objects: usize,
    pub receivers: usize,
}

impl RoleLayout {
    pub fn count(&self, role: Role) -> usize {
        match role {
            Role::Transmitter => self.transmitters,
            Role::RisElement => self.ris,
            Role::Object => self.objects,
            Role::Receiver => self.receivers,
        }
    }

    pub fn total(&self) -> usize {
        self.transmitters + self.ris + self.objects + self.receivers
    }

    /// Index range of a role inside the system matrix.
    pub fn range(&self, role: Role) -> Range<usize> {
        let start: usize = Role::ALL.iter().take_while(|r| **r != role).map(|r| self.count(*r)).sum();
        start..start + self.count(role)
    }

    pub fn from_dipoles(dipoles: &[Dipole]) -> Self {
        let mut layout = RoleLayout::default();
        for d in dipoles {
            match d.role {
                Role::Transmitter => layout.transmitters += 1,
                Role::RisElement => layout.ris += 1,
                Role::Object => layout.objects += 1,
                Role::Receiver => layout.receivers += 1,
            }
        }
        layout
    }
}

/// Complete description of a transmitter / RIS / receiver link.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    params: FreeSpaceParams,
    dipoles: Vec<Dipole>,
    layout: RoleLayout,
    z_generator: Vec<Complex64>,
    z_load: Vec<Complex64>,
    ris_terminations: Vec<Complex64>,
    direct_path_blocked: bool,
}

impl Scenario {
    /// Validates and builds a scenario. Dipoles may be given in any order;
    /// they are stably regrouped into block order (T, S, O, R).
    pub fn new(
        params: FreeSpaceParams,
        mut dipoles: Vec<Dipole>,
        z_generator: Vec<Complex64>,
        z_load: Vec<Complex64>,
        ris_terminations: Vec<Complex64>,
        direct_path_blocked: bool,
    ) -> Result<Self> {
        dipoles.sort_by_key(|d| d.role);
        let layout = RoleLayout::from_dipoles(&dipoles);
        if layout.transmitters == 0 || layout.receivers == 0 {
            return Err(Error::Structural("a scenario needs at least one transmitter and one receiver".into()));
        }
        check_len("z_generator", z_generator.len(), layout.transmitters)?;
        check_len("z_load", z_load.len(), layout.receivers)?;
        check_len("ris terminations", ris_terminations.len(), layout.ris)?;
        if z_load.iter().any(|z| z.norm() == 0.0) {
            return Err(Error::Domain("load impedances must be nonzero".into()));
        }
        if z_generator.iter().chain(&z_load).chain(&ris_terminations).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Domain("impedances must be finite".into()));
        }
        validate_geometry(&dipoles)?;
        Ok(Self { params, dipoles, layout, z_generator, z_load, ris_terminations, direct_path_blocked })
    }

    pub fn params(&self) -> &FreeSpaceParams {
        &self.params
    }

    /// All dipoles in block order.
    pub fn dipoles(&self) -> &[Dipole] {
        &self.dipoles
    }

    pub fn layout(&self) -> RoleLayout {
        self.layout
    }

    pub fn dipoles_of(&self, role: Role) -> &[Dipole] {
        &self.dipoles[self.layout.range(role)]
    }

    pub fn z_generator(&self) -> &[Complex64] {
        &self.z_generator
    }

    pub fn z_load(&self) -> &[Complex64] {
        &self.z_load
    }

    pub fn ris_terminations(&self) -> &[Complex64] {
        &self.ris_terminations
    }

    pub fn direct_path_blocked(&self) -> bool {
        self.direct_path_blocked
    }

    /// Same scenario with a different termination vector.
    pub fn with_terminations(&self, terminations: Vec<Complex64>) -> Result<Self> {
        check_len("ris terminations", terminations.len(), self.layout.ris)?;
        Ok(Self { ris_terminations: terminations, ..self.clone() })
    }

    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text)
            .map_err(|e| Error::Parse { source_name: source_name.to_string(), message: e.to_string() })?;
        file.into_scenario()
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&ScenarioFile::from_scenario(self))
            .map_err(|e| Error::Parse { source_name: "scenario".into(), message: e.to_string() })
    }
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Structural(format!("{what} has {got} entries, expected {expected}")));
    }
    Ok(())
}

fn validate_geometry(dipoles: &[Dipole]) -> Result<()> {
    for (i, d) in dipoles.iter().enumerate() {
        if !d.is_z_directed() {
            return Err(Error::Geometry(format!("dipole {i} is not z-directed; only parallel dipoles are supported")));
        }
    }
    for i in 0..dipoles.len() {
        for j in i + 1..dipoles.len() {
            let (p, q) = (&dipoles[i], &dipoles[j]);
            if p.center.distance(&q.center) == 0.0 {
                return Err(Error::Geometry(format!("dipoles {i} and {j} share the same center")));
            }
            if p.center.transverse_distance(&q.center) < p.radius + q.radius {
                let (plo, phi) = p.z_extent();
                let (qlo, qhi) = q.z_extent();
                let gap = (qlo - phi).max(plo - qhi);
                if gap <= 0.0 {
                    return Err(Error::Geometry(format!("dipoles {i} and {j} overlap")));
                }
            }
        }
    }
    Ok(())
}

/// Builds the built-in deployment: four transmit dipoles spaced by half a
/// wavelength along x from the origin, one receiver at (9.6, 14.4) wavelengths
/// and `n_ris` RIS elements spaced by an eighth of a wavelength along x from
/// (0, 24) wavelengths. All dipoles are half-wave, z-directed, with radius
/// lambda/1000; the direct transmitter-receiver path is blocked.
pub fn build_reference_scenario(n_ris: usize, termination: Complex64) -> Result<Scenario> {
    if n_ris == 0 {
        return Err(Error::Domain("the RIS needs at least one element".into()));
    }
    let params = FreeSpaceParams::new(REFERENCE_FREQUENCY_HZ)?;
    let lambda = params.wavelength;
    let length = 0.5 * lambda;
    let radius = DEFAULT_RADIUS_WAVELENGTHS * lambda;
    let mut dipoles = Vec::with_capacity(n_ris + 5);
    for i in 0..4 {
        let c = Point3::new(i as f64 * 0.5 * lambda, 0.0, 0.0);
        dipoles.push(Dipole::new(c, length, radius, Role::Transmitter)?);
    }
    for i in 0..n_ris {
        let c = Point3::new(i as f64 * lambda / 8.0, 24.0 * lambda, 0.0);
        dipoles.push(Dipole::new(c, length, radius, Role::RisElement)?);
    }
    dipoles.push(Dipole::new(Point3::new(9.6 * lambda, 14.4 * lambda, 0.0), length, radius, Role::Receiver)?);
    let z0 = Complex64::new(DEFAULT_PORT_IMPEDANCE_OHM, 0.0);
    Scenario::new(params, dipoles, vec![z0; 4], vec![z0], vec![termination; n_ris], true)
}

// ---------------------------------------------------------------------------
// TOML schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ScenarioFile {
    pub frequency_hz: f64,
    #[serde(default)]
    pub z_generator_ohm: Option<ImpedanceSpec>,
    #[serde(default)]
    pub z_load_ohm: Option<ImpedanceSpec>,
    #[serde(default = "default_true")]
    pub direct_path_blocked: bool,
    pub transmitters: Vec<WireSpec>,
    pub receivers: Vec<WireSpec>,
    #[serde(default)]
    pub ris: Vec<RisWireSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<WireSpec>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct WireSpec {
    pub center: Vec<f64>,
    pub length: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RisWireSpec {
    pub center: Vec<f64>,
    pub length: f64,
    pub radius: f64,
    #[serde(default)]
    pub termination_re: f64,
    #[serde(default)]
    pub termination_im: f64,
}

/// Either one real value applied to every port, or one entry per port given
/// as a real number or an `[re, im]` pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum ImpedanceSpec {
    Uniform(f64),
    PerPort(Vec<ComplexValue>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    fn value(&self) -> Complex64 {
        match *self {
            ComplexValue::Real(r) => Complex64::new(r, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl ImpedanceSpec {
    fn expand(spec: &Option<ImpedanceSpec>, n: usize, what: &str) -> Result<Vec<Complex64>> {
        match spec {
            None => Ok(vec![Complex64::new(DEFAULT_PORT_IMPEDANCE_OHM, 0.0); n]),
            Some(ImpedanceSpec::Uniform(r)) => Ok(vec![Complex64::new(*r, 0.0); n]),
            Some(ImpedanceSpec::PerPort(values)) => {
                check_len(what, values.len(), n)?;
                Ok(values.iter().map(ComplexValue::value).collect())
            }
        }
    }

    fn per_port(values: &[Complex64]) -> Self {
        ImpedanceSpec::PerPort(values.iter().map(|z| ComplexValue::Pair([z.re, z.im])).collect())
    }
}

fn point_from(center: &[f64]) -> Result<Point3> {
    match *center {
        [x, y] => Ok(Point3::new(x, y, 0.0)),
        [x, y, z] => Ok(Point3::new(x, y, z)),
        _ => Err(Error::Configuration(format!("center must have 2 or 3 coordinates, got {}", center.len()))),
    }
}

impl ScenarioFile {
    pub(crate) fn into_scenario(self) -> Result<Scenario> {
        let params = FreeSpaceParams::new(self.frequency_hz)?;
        let mut dipoles = Vec::new();
        let mut terminations = Vec::new();
        for w in &self.transmitters {
            dipoles.push(Dipole::new(point_from(&w.center)?, w.length, w.radius, Role::Transmitter)?);
        }
        for w in &self.ris {
            dipoles.push(Dipole::new(point_from(&w.center)?, w.length, w.radius, Role::RisElement)?);
            terminations.push(Complex64::new(w.termination_re, w.termination_im));
        }
        for w in &self.objects {
            dipoles.push(Dipole::new(point_from(&w.center)?, w.length, w.radius, Role::Object)?);
        }
        for w in &self.receivers {
            dipoles.push(Dipole::new(point_from(&w.center)?, w.length, w.radius, Role::Receiver)?);
        }
        let z_generator = ImpedanceSpec::expand(&self.z_generator_ohm, self.transmitters.len(), "z_generator_ohm")?;
        let z_load = ImpedanceSpec::expand(&self.z_load_ohm, self.receivers.len(), "z_load_ohm")?;
        Scenario::new(params, dipoles, z_generator, z_load, terminations, self.direct_path_blocked)
    }

    pub(crate) fn from_scenario(s: &Scenario) -> Self {
        let wire = |d: &Dipole| WireSpec {
            center: vec![d.center.x, d.center.y, d.center.z],
            length: d.length,
            radius: d.radius,
        };
        let ris = s
            .dipoles_of(Role::RisElement)
            .iter()
            .zip(s.ris_terminations())
            .map(|(d, z)| RisWireSpec {
                center: vec![d.center.x, d.center.y, d.center.z],
                length: d.length,
                radius: d.radius,
                termination_re: z.re,
                termination_im: z.im,
            })
            .collect();
        ScenarioFile {
            frequency_hz: s.params().frequency,
            z_generator_ohm: Some(ImpedanceSpec::per_port(s.z_generator())),
            z_load_ohm: Some(ImpedanceSpec::per_port(s.z_load())),
            direct_path_blocked: s.direct_path_blocked(),
            transmitters: s.dipoles_of(Role::Transmitter).iter().map(wire).collect(),
            receivers: s.dipoles_of(Role::Receiver).iter().map(wire).collect(),
            ris,
            objects: s.dipoles_of(Role::Object).iter().map(wire).collect(),
        }
    }
}
