//! Scenario files: TOML with SI quantities written as `"<number> <unit>"`
//! strings (bare numbers are SI base units), validated and converted once
//! into the internal unit system.
//!
//! ```toml
//! [particle]
//! species = "electron"
//!
//! [carrier]
//! velocity = "0.1 c"
//!
//! [grid]
//! n_points = 4096
//! xi_span = "20 um"
//!
//! [input]
//! kind = "gaussian"
//! sigma = "100 nm"
//!
//! [lens]
//! e0 = "1e5 V/m"
//! omega_m = "10 GHz"
//! n = 10
//! length = "1 cm"
//!
//! [imaging]
//! magnification = -2
//!
//! [experiment]
//! kind = "image"
//! ```
//!
//! With `particle.units = "natural"` every quantity is a bare number in units
//! where `hbar = m = 1` and `|q| = 1`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::carrier::CarrierState;
use crate::grid::Grid;
use crate::lens::{
    build_lens, matched_lens_for_focal_length, Aperture, LensMode, LensParams, LensSpec,
    PhaseVelocity,
};
use crate::units::{si, Dimension, PhysicalContext};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("missing required field: {0}")]
    Missing(String),
    #[error("field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("field `{field}`: {source}")]
    Physics {
        field: String,
        source: crate::error::Error,
    },
}

fn field_err(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn physics(field: &str) -> impl FnOnce(crate::error::Error) -> ConfigError + '_ {
    move |source| ConfigError::Physics {
        field: field.to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Raw file layout

/// A number in SI base units, or a `"<number> <unit>"` string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    particle: RawParticle,
    carrier: RawCarrier,
    grid: Option<RawGrid>,
    input: RawInput,
    lens: Option<RawLens>,
    imaging: Option<RawImaging>,
    experiment: RawExperiment,
    output: Option<RawOutput>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParticle {
    units: Option<String>,
    species: Option<String>,
    mass: Option<Quantity>,
    charge: Option<Quantity>,
    c_light: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCarrier {
    kinetic_energy: Option<Quantity>,
    k0: Option<Quantity>,
    velocity: Option<Quantity>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n_points: Option<usize>,
    xi_span: Option<Quantity>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    kind: String,
    sigma: Option<Quantity>,
    center: Option<Quantity>,
    chirp: Option<Quantity>,
    separation: Option<Quantity>,
    amplitude_ratio: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLens {
    e0: Option<Quantity>,
    focal_length: Option<Quantity>,
    omega_m: Option<Quantity>,
    k_m: Option<Quantity>,
    n: Option<f64>,
    v_p: Option<Quantity>,
    length: Option<Quantity>,
    mode: Option<String>,
    aperture: Option<Quantity>,
    aperture_rolloff: Option<f64>,
    diverging: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImaging {
    l1: Option<Quantity>,
    tau1: Option<Quantity>,
    magnification: Option<f64>,
    lens_transit_time: Option<Quantity>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: String,
    tau: Option<Quantity>,
    distance: Option<Quantity>,
    widths: Option<Vec<Quantity>>,
    probe_fwhm: Option<Quantity>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    format: Option<String>,
}

// ---------------------------------------------------------------------------
// Validated scenario

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    Gaussian {
        center: f64,
        sigma: f64,
        chirp: f64,
    },
    AsymmetricPair {
        separation: f64,
        sigma: f64,
        amplitude_ratio: f64,
    },
}

impl InputSpec {
    fn sigma(&self) -> f64 {
        match *self {
            InputSpec::Gaussian { sigma, .. } | InputSpec::AsymmetricPair { sigma, .. } => sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImagingRequest {
    ObjectDistance(f64),
    ObjectTime(f64),
    Magnification(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Disperse { tau: f64 },
    Lens,
    Image,
    Sweep { widths: Vec<f64> },
    Resolution { probe_fwhm: f64 },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Disperse { .. } => "disperse",
            Experiment::Lens => "lens",
            Experiment::Image => "image",
            Experiment::Sweep { .. } => "sweep",
            Experiment::Resolution { .. } => "resolution",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            "both" => Some(OutputFormat::Both),
            _ => None,
        }
    }

    pub fn csv(self) -> bool {
        self != OutputFormat::Json
    }

    pub fn json(self) -> bool {
        self != OutputFormat::Csv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

/// A derived quantity in SI and in internal units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Echo {
    pub si: f64,
    pub natural: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub ctx: PhysicalContext,
    pub carrier: CarrierState,
    pub grid: Grid,
    pub input: InputSpec,
    pub lens: Option<LensSpec>,
    pub lens_mode: LensMode,
    pub aperture: Option<Aperture>,
    pub imaging: Option<ImagingRequest>,
    pub lens_transit_time: f64,
    pub experiment: Experiment,
    pub output: OutputSpec,
    /// Quantities were given as bare dimensionless numbers.
    pub natural_units: bool,
    /// Derived quantities echoed back (SI and internal units), keyed by name.
    pub provenance: BTreeMap<String, Echo>,
}

impl ScenarioConfig {
    pub fn echo(&self, value: f64, dim: Dimension) -> Echo {
        Echo {
            si: self.ctx.to_si(value, dim),
            natural: value,
        }
    }
}

// ---------------------------------------------------------------------------
// Units

/// Physical kind of a configured quantity; picks the unit table and the
/// conversion dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Length,
    Time,
    Mass,
    Charge,
    Energy,
    Field,
    AngularFrequency,
    Velocity,
    Wavenumber,
    Chirp,
}

impl Kind {
    fn dimension(self) -> Dimension {
        match self {
            Kind::Length => Dimension::LENGTH,
            Kind::Time => Dimension::TIME,
            Kind::Mass => Dimension::MASS,
            Kind::Charge => Dimension::CHARGE,
            Kind::Energy => Dimension::ENERGY,
            Kind::Field => Dimension::FIELD,
            Kind::AngularFrequency => Dimension::ANGULAR_FREQUENCY,
            Kind::Velocity => Dimension::VELOCITY,
            Kind::Wavenumber => Dimension::WAVENUMBER,
            Kind::Chirp => Dimension::CHIRP,
        }
    }

    fn units(self) -> &'static [(&'static str, f64)] {
        const TWO_PI: f64 = 2.0 * PI;
        match self {
            Kind::Length => &[
                ("m", 1.0),
                ("cm", 1e-2),
                ("mm", 1e-3),
                ("um", 1e-6),
                ("nm", 1e-9),
                ("pm", 1e-12),
            ],
            Kind::Time => &[
                ("s", 1.0),
                ("ms", 1e-3),
                ("us", 1e-6),
                ("ns", 1e-9),
                ("ps", 1e-12),
                ("fs", 1e-15),
            ],
            Kind::Mass => &[
                ("kg", 1.0),
                ("me", si::ELECTRON_MASS),
                ("mp", si::PROTON_MASS),
            ],
            Kind::Charge => &[("C", 1.0), ("e", si::ELEMENTARY_CHARGE)],
            Kind::Energy => &[
                ("J", 1.0),
                ("eV", si::ELECTRON_VOLT),
                ("keV", 1e3 * si::ELECTRON_VOLT),
                ("MeV", 1e6 * si::ELECTRON_VOLT),
            ],
            Kind::Field => &[
                ("V/m", 1.0),
                ("kV/m", 1e3),
                ("MV/m", 1e6),
                ("V/cm", 1e2),
                ("kV/cm", 1e5),
            ],
            // Hz-family units are cycle frequencies and pick up 2 pi.
            Kind::AngularFrequency => &[
                ("rad/s", 1.0),
                ("Hz", TWO_PI),
                ("kHz", TWO_PI * 1e3),
                ("MHz", TWO_PI * 1e6),
                ("GHz", TWO_PI * 1e9),
                ("THz", TWO_PI * 1e12),
            ],
            Kind::Velocity => &[("m/s", 1.0), ("c", si::SPEED_OF_LIGHT)],
            Kind::Wavenumber => &[
                ("1/m", 1.0),
                ("rad/m", 1.0),
                ("1/nm", 1e9),
                ("1/um", 1e6),
                ("1/mm", 1e3),
            ],
            Kind::Chirp => &[("1/m^2", 1.0), ("1/um^2", 1e12), ("1/nm^2", 1e18)],
        }
    }
}

struct Reader {
    natural: bool,
    ctx: Option<PhysicalContext>,
}

impl Reader {
    /// Value of `q` in SI (or as given, in natural mode).
    fn raw(&self, field: &str, q: &Quantity, kind: Kind) -> Result<f64, ConfigError> {
        let v = match q {
            Quantity::Number(v) => *v,
            Quantity::Text(text) => {
                let text = text.trim();
                let (num, unit) = match text.find(char::is_whitespace) {
                    Some(i) => (&text[..i], text[i..].trim()),
                    None => (text, ""),
                };
                let v: f64 = num
                    .parse()
                    .map_err(|_| field_err(field, format!("cannot parse number `{num}`")))?;
                if unit.is_empty() {
                    v
                } else if self.natural {
                    return Err(field_err(
                        field,
                        "natural units take bare numbers, not unit suffixes",
                    ));
                } else {
                    let table = kind.units();
                    let factor = table
                        .iter()
                        .find(|(u, _)| *u == unit)
                        .map(|&(_, f)| f)
                        .ok_or_else(|| {
                            let known: Vec<&str> = table.iter().map(|(u, _)| *u).collect();
                            field_err(
                                field,
                                format!(
                                    "unknown unit `{unit}`, expected one of {}",
                                    known.join(", ")
                                ),
                            )
                        })?;
                    v * factor
                }
            }
        };
        if !v.is_finite() {
            return Err(field_err(field, "must be finite"));
        }
        Ok(v)
    }

    /// Value of `q` in internal units.
    fn get(&self, field: &str, q: &Quantity, kind: Kind) -> Result<f64, ConfigError> {
        let v = self.raw(field, q, kind)?;
        Ok(match &self.ctx {
            Some(ctx) if !self.natural => ctx.to_internal(v, kind.dimension()),
            _ => v,
        })
    }

    fn required(&self, field: &str, q: &Option<Quantity>, kind: Kind) -> Result<f64, ConfigError> {
        match q {
            Some(q) => self.get(field, q, kind),
            None => Err(ConfigError::Missing(field.to_string())),
        }
    }

    fn optional(
        &self,
        field: &str,
        q: &Option<Quantity>,
        kind: Kind,
    ) -> Result<Option<f64>, ConfigError> {
        q.as_ref().map(|q| self.get(field, q, kind)).transpose()
    }
}

fn exactly_one(section: &str, names: &[&str], present: &[bool]) -> Result<usize, ConfigError> {
    let given: Vec<usize> = (0..names.len()).filter(|&i| present[i]).collect();
    match given.len() {
        1 => Ok(given[0]),
        0 => Err(ConfigError::Missing(format!(
            "{section}.{}",
            names.join(" | ")
        ))),
        _ => Err(field_err(
            section,
            format!(
                "over-specified: give only one of {}",
                given
                    .iter()
                    .map(|&i| names[i])
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        )),
    }
}

// ---------------------------------------------------------------------------
// Loading

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    from_table(table)
}

/// Sets a dotted key (`lens.e0`) in a parsed config. The value is read as a
/// TOML literal when possible and as a string otherwise, so both `2e5` and
/// `1e5 V/m` work.
pub fn override_key(table: &mut toml::Table, key: &str, value: &str) -> Result<(), ConfigError> {
    let parsed: toml::Value = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| field_err(key, "empty key"))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| field_err(key, format!("`{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

/// Rewrites serde's messages into the field-level wording used by the CLI.
fn describe_serde(e: toml::de::Error) -> ConfigError {
    let msg = e.message().to_string();
    if let Some(rest) = msg.strip_prefix("missing field `") {
        let name = rest.split('`').next().unwrap_or(rest);
        return ConfigError::Missing(name.to_string());
    }
    ConfigError::Syntax(msg)
}

pub fn from_table(table: toml::Table) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig =
        RawConfig::deserialize(toml::Value::Table(table)).map_err(describe_serde)?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let natural = match raw.particle.units.as_deref() {
        None | Some("si") => false,
        Some("natural") => true,
        Some(other) => {
            return Err(field_err(
                "particle.units",
                format!("`{other}` is not one of si, natural"),
            ))
        }
    };
    let mut reader = Reader { natural, ctx: None };

    // Input width sets the internal length unit in SI mode.
    let input_sigma_si = match &raw.input.sigma {
        Some(q) => reader.raw("input.sigma", q, Kind::Length)?,
        None => return Err(ConfigError::Missing("input.sigma".into())),
    };
    if !(input_sigma_si > 0.0) {
        return Err(field_err("input.sigma", "must be positive"));
    }

    let p = &raw.particle;
    let ctx = if natural {
        if p.species.is_some() || p.mass.is_some() {
            return Err(field_err(
                "particle",
                "natural units fix m = 1; remove species/mass",
            ));
        }
        let charge = reader.required("particle.charge", &p.charge, Kind::Charge)?;
        if charge.abs() != 1.0 {
            return Err(field_err(
                "particle.charge",
                "natural units take a charge of +1 or -1",
            ));
        }
        let c_light = p
            .c_light
            .ok_or_else(|| ConfigError::Missing("particle.c_light".into()))?;
        PhysicalContext::dimensionless(charge, c_light).map_err(physics("particle"))?
    } else {
        if p.c_light.is_some() {
            return Err(field_err(
                "particle.c_light",
                "only meaningful with units = \"natural\"",
            ));
        }
        let (mass, charge) = match (&p.species, &p.mass, &p.charge) {
            (Some(s), None, None) => match s.as_str() {
                "electron" => (si::ELECTRON_MASS, -si::ELEMENTARY_CHARGE),
                "proton" => (si::PROTON_MASS, si::ELEMENTARY_CHARGE),
                other => {
                    return Err(field_err(
                        "particle.species",
                        format!("`{other}` is not one of electron, proton"),
                    ))
                }
            },
            (None, Some(m), Some(q)) => (
                reader.raw("particle.mass", m, Kind::Mass)?,
                reader.raw("particle.charge", q, Kind::Charge)?,
            ),
            (None, None, _) => {
                return Err(ConfigError::Missing(
                    "particle.species | particle.mass".into(),
                ))
            }
            (None, Some(_), None) => return Err(ConfigError::Missing("particle.charge".into())),
            (Some(_), _, _) => {
                return Err(field_err(
                    "particle",
                    "give either species or mass and charge, not both",
                ))
            }
        };
        PhysicalContext::natural_from_si(mass, charge, input_sigma_si)
            .map_err(physics("particle"))?
    };
    reader.ctx = Some(ctx);

    let c = &raw.carrier;
    let which = exactly_one(
        "carrier",
        &["kinetic_energy", "k0", "velocity"],
        &[
            c.kinetic_energy.is_some(),
            c.k0.is_some(),
            c.velocity.is_some(),
        ],
    )?;
    let carrier = match which {
        0 => {
            let e = reader.required("carrier.kinetic_energy", &c.kinetic_energy, Kind::Energy)?;
            CarrierState::from_kinetic_energy(&ctx, e)
        }
        1 => CarrierState::from_wavenumber(
            &ctx,
            reader.required("carrier.k0", &c.k0, Kind::Wavenumber)?,
        ),
        _ => {
            let v = reader.required("carrier.velocity", &c.velocity, Kind::Velocity)?;
            if v >= ctx.c_light {
                return Err(field_err(
                    "carrier.velocity",
                    "must be below the speed of light",
                ));
            }
            CarrierState::from_velocity(&ctx, v)
        }
    }
    .map_err(physics("carrier"))?;

    let input = match raw.input.kind.as_str() {
        "gaussian" => {
            if raw.input.separation.is_some() || raw.input.amplitude_ratio.is_some() {
                return Err(field_err(
                    "input",
                    "separation/amplitude_ratio only apply to asymmetric_pair",
                ));
            }
            InputSpec::Gaussian {
                center: reader
                    .optional("input.center", &raw.input.center, Kind::Length)?
                    .unwrap_or(0.0),
                sigma: reader.required("input.sigma", &raw.input.sigma, Kind::Length)?,
                chirp: reader
                    .optional("input.chirp", &raw.input.chirp, Kind::Chirp)?
                    .unwrap_or(0.0),
            }
        }
        "asymmetric_pair" => {
            if raw.input.center.is_some() || raw.input.chirp.is_some() {
                return Err(field_err("input", "center/chirp only apply to gaussian"));
            }
            InputSpec::AsymmetricPair {
                separation: reader.required(
                    "input.separation",
                    &raw.input.separation,
                    Kind::Length,
                )?,
                sigma: reader.required("input.sigma", &raw.input.sigma, Kind::Length)?,
                amplitude_ratio: raw
                    .input
                    .amplitude_ratio
                    .ok_or_else(|| ConfigError::Missing("input.amplitude_ratio".into()))?,
            }
        }
        other => {
            return Err(field_err(
                "input.kind",
                format!("`{other}` is not one of gaussian, asymmetric_pair"),
            ));
        }
    };

    let raw_grid = raw.grid.clone().unwrap_or(RawGrid {
        n_points: None,
        xi_span: None,
    });
    let n_points = raw_grid.n_points.unwrap_or(4096);
    let xi_span = reader
        .optional("grid.xi_span", &raw_grid.xi_span, Kind::Length)?
        .unwrap_or(128.0 * input.sigma());
    let grid = Grid::new(n_points, xi_span).map_err(physics("grid"))?;

    let mut provenance = BTreeMap::new();
    let mut echo = |name: &str, v: f64, dim: Dimension| {
        provenance.insert(
            name.to_string(),
            Echo {
                si: ctx.to_si(v, dim),
                natural: v,
            },
        );
    };
    echo("carrier.k0", carrier.k0, Dimension::WAVENUMBER);
    echo("carrier.v_group", carrier.v_group, Dimension::VELOCITY);
    echo(
        "carrier.omega0",
        carrier.omega0,
        Dimension::ANGULAR_FREQUENCY,
    );
    echo("carrier.lambda0", carrier.lambda0, Dimension::LENGTH);
    echo(
        "carrier.kinetic_energy",
        carrier.kinetic_energy(&ctx),
        Dimension::ENERGY,
    );
    echo("grid.xi_step", grid.xi_step, Dimension::LENGTH);
    echo("grid.xi_span", grid.xi_span, Dimension::LENGTH);
    echo("unit.length", 1.0, Dimension::LENGTH);
    echo("unit.time", 1.0, Dimension::TIME);

    let (lens, lens_mode, aperture) = match &raw.lens {
        None => (None, LensMode::Quadratic, None),
        Some(l) => {
            let (spec, mode, aperture) = build_lens_section(&reader, &ctx, &carrier, l)?;
            echo("lens.k_m", spec.k_m, Dimension::WAVENUMBER);
            echo("lens.omega_m", spec.omega_m, Dimension::ANGULAR_FREQUENCY);
            echo("lens.v_p", spec.v_p, Dimension::VELOCITY);
            echo("lens.n", spec.slow_factor_n, Dimension::DIMENSIONLESS);
            echo("lens.e0", spec.e0, Dimension::FIELD);
            echo("lens.length", spec.length, Dimension::LENGTH);
            echo("lens.delta_phi", spec.delta_phi, Dimension::DIMENSIONLESS);
            (Some(spec), mode, aperture)
        }
    };

    let (imaging, lens_transit_time) = match &raw.imaging {
        None => (None, 0.0),
        Some(im) => {
            let which = exactly_one(
                "imaging",
                &["l1", "tau1", "magnification"],
                &[
                    im.l1.is_some(),
                    im.tau1.is_some(),
                    im.magnification.is_some(),
                ],
            )?;
            let req = match which {
                0 => ImagingRequest::ObjectDistance(reader.required(
                    "imaging.l1",
                    &im.l1,
                    Kind::Length,
                )?),
                1 => ImagingRequest::ObjectTime(reader.required(
                    "imaging.tau1",
                    &im.tau1,
                    Kind::Time,
                )?),
                _ => ImagingRequest::Magnification(im.magnification.unwrap_or(f64::NAN)),
            };
            let t = reader
                .optional(
                    "imaging.lens_transit_time",
                    &im.lens_transit_time,
                    Kind::Time,
                )?
                .unwrap_or(0.0);
            (Some(req), t)
        }
    };

    let e = &raw.experiment;
    let needs_lens = |name: &str| -> Result<(), ConfigError> {
        if lens.is_none() {
            return Err(ConfigError::Missing(format!(
                "lens (required by experiment `{name}`)"
            )));
        }
        Ok(())
    };
    let needs_imaging = |name: &str| -> Result<(), ConfigError> {
        if imaging.is_none() {
            return Err(ConfigError::Missing(format!(
                "imaging (required by experiment `{name}`)"
            )));
        }
        Ok(())
    };
    let experiment = match e.kind.as_str() {
        "disperse" => {
            let which = exactly_one(
                "experiment",
                &["tau", "distance"],
                &[e.tau.is_some(), e.distance.is_some()],
            )?;
            let tau = if which == 0 {
                reader.required("experiment.tau", &e.tau, Kind::Time)?
            } else {
                reader.required("experiment.distance", &e.distance, Kind::Length)? / carrier.v_group
            };
            if tau < 0.0 {
                return Err(field_err("experiment.tau", "must be non-negative"));
            }
            Experiment::Disperse { tau }
        }
        "lens" => {
            needs_lens("lens")?;
            Experiment::Lens
        }
        "image" => {
            needs_lens("image")?;
            needs_imaging("image")?;
            Experiment::Image
        }
        "sweep" => {
            needs_lens("sweep")?;
            needs_imaging("sweep")?;
            let list = e
                .widths
                .as_ref()
                .ok_or_else(|| ConfigError::Missing("experiment.widths".into()))?;
            let widths = list
                .iter()
                .map(|q| reader.get("experiment.widths", q, Kind::Length))
                .collect::<Result<Vec<_>, _>>()?;
            if widths.is_empty() {
                return Err(field_err("experiment.widths", "must not be empty"));
            }
            Experiment::Sweep { widths }
        }
        "resolution" => {
            needs_lens("resolution")?;
            needs_imaging("resolution")?;
            Experiment::Resolution {
                probe_fwhm: reader.required(
                    "experiment.probe_fwhm",
                    &e.probe_fwhm,
                    Kind::Length,
                )?,
            }
        }
        other => {
            return Err(field_err(
                "experiment.kind",
                format!("`{other}` is not one of disperse, lens, image, sweep, resolution"),
            ))
        }
    };

    let out = raw.output.unwrap_or(RawOutput {
        dir: None,
        format: None,
    });
    let format = match out.format.as_deref() {
        None => OutputFormat::Both,
        Some(s) => OutputFormat::parse(s).ok_or_else(|| {
            field_err(
                "output.format",
                format!("`{s}` is not one of csv, json, both"),
            )
        })?,
    };
    let output = OutputSpec {
        dir: PathBuf::from(out.dir.unwrap_or_else(|| "out".to_string())),
        format,
    };

    Ok(ScenarioConfig {
        ctx,
        carrier,
        grid,
        input,
        lens,
        lens_mode,
        aperture,
        imaging,
        lens_transit_time,
        experiment,
        output,
        natural_units: natural,
        provenance,
    })
}

fn build_lens_section(
    reader: &Reader,
    ctx: &PhysicalContext,
    carrier: &CarrierState,
    l: &RawLens,
) -> Result<(LensSpec, LensMode, Option<Aperture>), ConfigError> {
    let length = reader.required("lens.length", &l.length, Kind::Length)?;

    let v_p_matched = matches!(&l.v_p, Some(Quantity::Text(s)) if s.trim() == "matched");
    let v_p = if v_p_matched {
        None
    } else {
        reader.optional("lens.v_p", &l.v_p, Kind::Velocity)?
    };
    let phase_velocity = match (l.n, v_p, v_p_matched) {
        (Some(_), _, true) => {
            return Err(field_err(
                "lens",
                "conflict: n given together with v_p = \"matched\"",
            ))
        }
        (Some(n), Some(v), false) => {
            let from_n = ctx.c_light / n;
            if ((from_n - v) / v).abs() > 1e-9 {
                return Err(field_err(
                    "lens",
                    format!(
                        "conflict: n = {n} implies v_p = c/n, which disagrees with the given v_p"
                    ),
                ));
            }
            PhaseVelocity::SlowFactor(n)
        }
        (Some(n), None, false) => PhaseVelocity::SlowFactor(n),
        (None, Some(v), false) => PhaseVelocity::Explicit(v),
        (None, None, true) => PhaseVelocity::Matched,
        (None, None, false) => return Err(ConfigError::Missing("lens.n | lens.v_p".into())),
        (None, Some(_), true) => unreachable!("matched v_p is not parsed as a number"),
    };

    let which = exactly_one(
        "lens",
        &["omega_m", "k_m"],
        &[l.omega_m.is_some(), l.k_m.is_some()],
    )?;
    let spec = match (&l.e0, &l.focal_length) {
        (Some(_), Some(_)) => {
            return Err(field_err(
                "lens",
                "over-specified: give only one of e0, focal_length",
            ))
        }
        (None, None) => return Err(ConfigError::Missing("lens.e0 | lens.focal_length".into())),
        (Some(e0q), None) => {
            let e0 = reader.get("lens.e0", e0q, Kind::Field)?;
            let omega_m = if which == 0 {
                reader.required("lens.omega_m", &l.omega_m, Kind::AngularFrequency)?
            } else {
                let k_m = reader.required("lens.k_m", &l.k_m, Kind::Wavenumber)?;
                let v = match phase_velocity {
                    PhaseVelocity::Explicit(v) => v,
                    PhaseVelocity::SlowFactor(n) => ctx.c_light / n,
                    PhaseVelocity::Matched => carrier.v_group,
                };
                k_m * v
            };
            build_lens(
                &LensParams {
                    e0,
                    omega_m,
                    phase_velocity,
                    length,
                },
                ctx,
                carrier,
            )
            .map_err(physics("lens"))?
        }
        (None, Some(fq)) => {
            if phase_velocity != PhaseVelocity::Matched {
                return Err(field_err(
                    "lens.focal_length",
                    "only supported with v_p = \"matched\"",
                ));
            }
            let f = reader.get("lens.focal_length", fq, Kind::Length)?;
            let k_m = if which == 0 {
                reader.required("lens.omega_m", &l.omega_m, Kind::AngularFrequency)?
                    / carrier.v_group
            } else {
                reader.required("lens.k_m", &l.k_m, Kind::Wavenumber)?
            };
            matched_lens_for_focal_length(ctx, carrier, k_m, f, length).map_err(physics("lens"))?
        }
    };
    let spec = if l.diverging.unwrap_or(false) {
        spec.diverging()
    } else {
        spec
    };

    let mode = match l.mode.as_deref() {
        None | Some("quadratic") => LensMode::Quadratic,
        Some("full_cosine") => LensMode::FullCosine,
        Some(other) => {
            return Err(field_err(
                "lens.mode",
                format!("`{other}` is not one of quadratic, full_cosine"),
            ))
        }
    };

    let width = match &l.aperture {
        None => None,
        Some(Quantity::Text(s)) if s.trim() == "none" => None,
        Some(Quantity::Text(s)) if s.trim() == "default" => Some(1.0 / spec.k_m),
        Some(q) => {
            let w = reader.get("lens.aperture", q, Kind::Length)?;
            if !(w > 0.0) {
                return Err(field_err("lens.aperture", "must be positive"));
            }
            Some(w)
        }
    };
    let aperture = match (width, l.aperture_rolloff) {
        (None, Some(_)) => return Err(field_err("lens.aperture_rolloff", "needs an aperture")),
        (None, None) => None,
        (Some(width), None) => Some(Aperture::Hard { width }),
        (Some(width), Some(rolloff)) => {
            if !(0.0..=1.0).contains(&rolloff) {
                return Err(field_err("lens.aperture_rolloff", "must lie in [0, 1]"));
            }
            Some(Aperture::RaisedCosine { width, rolloff })
        }
    };
    Ok((spec, mode, aperture))
}

impl ScenarioConfig {
    pub fn is_natural(&self) -> bool {
        self.natural_units
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ELECTRON_LENS: &str = r#"
[particle]
species = "electron"
[carrier]
velocity = "0.1 c"
[input]
kind = "gaussian"
sigma = "100 nm"
[lens]
e0 = "1e5 V/m"
omega_m = "10 GHz"
n = 10
length = "1 cm"
[experiment]
kind = "lens"
"#;

    #[test]
    fn empty_file_names_particle() {
        let err = parse_config("").unwrap_err();
        assert_eq!(err.to_string(), "missing required field: particle");
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let text = ELECTRON_LENS.replace("n = 10", "n = 10\nslowness = 3");
        let msg = parse_config(&text).unwrap_err().to_string();
        assert!(
            msg.contains("slowness") && msg.contains("e0") && msg.contains("v_p"),
            "{msg}"
        );
    }

    #[test]
    fn conflicting_phase_velocity() {
        let text = ELECTRON_LENS.replace("n = 10", "n = 10\nv_p = \"0.2 c\"");
        let msg = parse_config(&text).unwrap_err().to_string();
        assert!(msg.contains("conflict"), "{msg}");
        // A consistent pair is accepted.
        let text = ELECTRON_LENS.replace("n = 10", "n = 10\nv_p = \"0.1 c\"");
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn energy_echo_matches_kinematics() {
        let text = ELECTRON_LENS.replace("velocity = \"0.1 c\"", "kinetic_energy = \"3 keV\"");
        let cfg = parse_config(&text).unwrap();
        let k0 = cfg.provenance["carrier.k0"].si;
        let v = cfg.provenance["carrier.v_group"].si;
        let expect_v = (2.0 * 3e3 * si::ELECTRON_VOLT / si::ELECTRON_MASS).sqrt();
        assert!((v - expect_v).abs() / expect_v < 1e-12);
        assert!((k0 - si::ELECTRON_MASS * v / si::HBAR).abs() / k0 < 1e-12);
    }

    #[test]
    fn ghz_is_a_cycle_frequency() {
        let cfg = parse_config(ELECTRON_LENS).unwrap();
        let w = cfg.provenance["lens.omega_m"].si;
        assert!((w - 2.0 * PI * 1e10).abs() / w < 1e-12);
        assert!((cfg.provenance["unit.length"].si - 1e-7).abs() < 1e-20);
    }

    #[test]
    fn unknown_unit_rejected() {
        let text = ELECTRON_LENS.replace("\"1 cm\"", "\"1 furlong\"");
        let msg = parse_config(&text).unwrap_err().to_string();
        assert!(
            msg.contains("lens.length") && msg.contains("furlong"),
            "{msg}"
        );
    }

    #[test]
    fn over_specified_carrier() {
        let text = ELECTRON_LENS.replace("velocity = \"0.1 c\"", "velocity = \"0.1 c\"\nk0 = 1e11");
        assert!(parse_config(&text)
            .unwrap_err()
            .to_string()
            .contains("over-specified"));
    }

    #[test]
    fn experiment_requirements() {
        let text = ELECTRON_LENS.replace("kind = \"lens\"", "kind = \"image\"");
        assert!(matches!(parse_config(&text), Err(ConfigError::Missing(_))));
    }

    #[test]
    fn override_dotted_key() {
        let mut t: toml::Table = ELECTRON_LENS.parse().unwrap();
        override_key(&mut t, "lens.e0", "2e5 V/m").unwrap();
        override_key(&mut t, "lens.n", "10").unwrap();
        let cfg = from_table(t).unwrap();
        assert!((cfg.provenance["lens.e0"].si - 2e5).abs() < 1e-6);
    }

    #[test]
    fn natural_units_reject_suffixes() {
        let text = r#"
[particle]
units = "natural"
charge = -1
c_light = 100
[carrier]
k0 = 1
[input]
kind = "gaussian"
sigma = "1 m"
[experiment]
kind = "disperse"
tau = 1
"#;
        assert!(parse_config(text)
            .unwrap_err()
            .to_string()
            .contains("bare numbers"));
        let ok = text.replace("\"1 m\"", "1");
        let cfg = parse_config(&ok).unwrap();
        assert_eq!(cfg.grid.xi_span, 128.0);
        assert_eq!(cfg.experiment, Experiment::Disperse { tau: 1.0 });
    }
}
