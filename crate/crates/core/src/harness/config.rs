use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::allocator::AllocatorWeights;
use crate::nmpc::OcpConfig;
use crate::rate_mrac::{pack_gamma, Gamma, RateGains};
use crate::sim::NoiseConfig;
use crate::thrust_mrac::ThrustGains;
use crate::vehicle::VehicleParams;
use crate::ConfigError;

use super::reference::{circle_reference, hover_reference, Circle, ReferencePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Hold hover while the payload lands.
    StaticHover,
    /// Track a horizontal circle while the payload lands.
    DynamicCircle,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::StaticHover => "static",
            Mode::DynamicCircle => "dynamic",
        }
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" | "static-hover" => Ok(Mode::StaticHover),
            "dynamic" | "dynamic-circle" => Ok(Mode::DynamicCircle),
            other => Err(ConfigError::Invalid(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub mode: Mode,
    /// kg; zero disables the impact.
    pub payload_mass: f64,
    /// m above the top face.
    pub drop_height: f64,
    /// Body-frame contact and attachment point (m).
    pub impact_point: [f64; 3],
    pub impact_time: f64,
    pub duration: f64,
    /// Plant integration step (s).
    pub dt: f64,
    /// Hz
    pub nmpc_rate: f64,
    /// Hz, shared by both MRAC loops and the allocator.
    pub mrac_rate: f64,
    pub altitude: f64,
    pub circle_radius: f64,
    pub circle_speed: f64,
    /// Position-weight multiplier applied in static mode.
    pub static_position_scale: f64,
    pub seed: u64,
    pub out_dir: Option<String>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            mode: Mode::StaticHover,
            payload_mass: 0.5,
            drop_height: 0.8,
            impact_point: [0.2, 0.2, 0.0],
            impact_time: 3.0,
            duration: 10.0,
            dt: 0.0005,
            nmpc_rate: 100.0,
            mrac_rate: 1000.0,
            altitude: 1.0,
            circle_radius: 2.0,
            circle_speed: 1.5,
            static_position_scale: 0.5,
            seed: 0,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub vehicle: VehicleParams,
    pub nmpc: OcpConfig,
    pub thrust_mrac: ThrustGains,
    pub rate_mrac: RateGains,
    pub allocator: AllocatorWeights,
    pub noise: NoiseConfig,
    pub scenario: ScenarioSection,
}

impl ScenarioConfig {
    /// Defaults for `mode` with the given payload.
    pub fn new(mode: Mode, payload_mass: f64, drop_height: f64) -> Self {
        let mut cfg = Self::default();
        cfg.scenario.mode = mode;
        cfg.scenario.payload_mass = payload_mass;
        cfg.scenario.drop_height = drop_height;
        cfg.derive_defaults(&toml::Table::new());
        cfg
    }

    /// Parses a TOML document. Keys left out keep their defaults; the NMPC
    /// rate time constant and thrust bound follow the rate-loop gain and the
    /// rotor limit unless given explicitly.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse()?;
        let mut cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.derive_defaults(&table);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    fn derive_defaults(&mut self, table: &toml::Table) {
        let nmpc = table.get("nmpc").and_then(|v| v.as_table());
        let given = |key: &str| nmpc.is_some_and(|t| t.contains_key(key));
        if !given("rate_time_constant") {
            self.nmpc.rate_time_constant = 1.0 / self.rate_mrac.slowest_reference_pole();
        }
        if !given("input_max") {
            self.nmpc.input_max[0] = 4.0 * self.vehicle.thrust_max;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.vehicle.validate()?;
        self.nmpc.validate()?;
        self.thrust_mrac.validate()?;
        self.rate_mrac.validate()?;
        self.allocator.validate()?;
        self.noise.validate()?;
        let s = &self.scenario;
        if !(0.0..=2.0).contains(&s.payload_mass) {
            return Err(ConfigError::Invalid("payload_mass must lie in [0, 2] kg".into()));
        }
        if s.payload_mass > 0.0 && !(s.drop_height > 0.0 && s.drop_height <= 2.0) {
            return Err(ConfigError::Invalid("drop_height must lie in (0, 2] m".into()));
        }
        if !(s.dt > 0.0 && s.duration > 0.0) || s.impact_time < 0.0 || s.impact_time > s.duration {
            return Err(ConfigError::Invalid("need dt > 0, duration > 0, impact_time in [0, duration]".into()));
        }
        for (name, rate) in [("nmpc_rate", s.nmpc_rate), ("mrac_rate", s.mrac_rate)] {
            let ratio = 1.0 / (rate * s.dt);
            if !(rate > 0.0) || (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                return Err(ConfigError::Invalid(format!("{name} period must be a whole number of steps")));
            }
        }
        let impact_steps = s.impact_time / s.dt;
        if (impact_steps - impact_steps.round()).abs() > 1e-9 {
            return Err(ConfigError::Invalid("impact_time must land on a step boundary".into()));
        }
        if !(s.circle_radius > 0.0 && s.circle_speed > 0.0 && s.static_position_scale > 0.0) {
            return Err(ConfigError::Invalid("circle radius, speed and static scale must be positive".into()));
        }
        Ok(())
    }

    /// NMPC weights after the mode-specific position scaling.
    pub fn effective_nmpc(&self) -> OcpConfig {
        let mut cfg = self.nmpc.clone();
        if self.scenario.mode == Mode::StaticHover {
            for w in &mut cfg.q_position {
                *w *= self.scenario.static_position_scale;
            }
        }
        cfg
    }

    pub fn circle(&self) -> Circle {
        Circle {
            radius: self.scenario.circle_radius,
            speed: self.scenario.circle_speed,
            altitude: self.scenario.altitude,
        }
    }

    pub fn origin(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.scenario.altitude)
    }

    pub fn reference(&self, t: f64) -> ReferencePoint {
        match self.scenario.mode {
            Mode::StaticHover => hover_reference(t, &self.origin(), &self.vehicle),
            Mode::DynamicCircle => circle_reference(t, &self.circle(), &self.vehicle),
        }
    }

    pub fn impact_point(&self) -> Vector3<f64> {
        Vector3::from(self.scenario.impact_point)
    }

    /// Initial `γ`: nominal inertia, zero gravity torque.
    pub fn gamma_init(&self) -> Gamma {
        pack_gamma(&self.vehicle.inertia_matrix(), &Vector3::zeros())
    }

    /// Identifier of the random stream for this scenario, independent of
    /// the order in which a batch is run.
    pub fn stream_id(&self) -> u64 {
        let mode = match self.scenario.mode {
            Mode::StaticHover => 1u64,
            Mode::DynamicCircle => 2u64,
        };
        mode.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ self.scenario.payload_mass.to_bits().rotate_left(21)
            ^ self.scenario.drop_height.to_bits().rotate_left(42)
    }

    /// True inertia after attachment, for diagnostics.
    pub fn loaded_inertia(&self) -> Matrix3<f64> {
        crate::vehicle::system_inertia(&self.vehicle, self.scenario.payload_mass, &self.impact_point())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_derive() {
        let cfg = ScenarioConfig::new(Mode::DynamicCircle, 0.2, 0.5);
        assert!((cfg.nmpc.rate_time_constant - 1.0 / 16.7).abs() < 1e-15);
        assert_eq!(cfg.nmpc.input_max[0], 4.0 * cfg.vehicle.thrust_max);
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ScenarioConfig::from_toml_str(
            "[scenario]\nmode = \"dynamic-circle\"\npayload_mass = 0.2\n[rate_mrac]\nreference = [20.0, 20.0, 25.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.mode, Mode::DynamicCircle);
        assert_eq!(cfg.scenario.drop_height, 0.8);
        assert!((cfg.nmpc.rate_time_constant - 0.05).abs() < 1e-15);
        let explicit = ScenarioConfig::from_toml_str("[nmpc]\nrate_time_constant = 0.1\n").unwrap();
        assert_eq!(explicit.nmpc.rate_time_constant, 0.1);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(
            ScenarioConfig::from_toml_str("[vehicle]\nmas = 1.0\n"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml_str("[extra]\n"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml_str("[scenario]\npayload_mass = 3.0\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml_str("[scenario]\nnmpc_rate = 300.0\n"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn static_mode_softens_position_weight() {
        let s = ScenarioConfig::new(Mode::StaticHover, 0.5, 0.8);
        let d = ScenarioConfig::new(Mode::DynamicCircle, 0.5, 0.8);
        assert_eq!(s.effective_nmpc().q_position[0] * 2.0, d.effective_nmpc().q_position[0]);
    }

    #[test]
    fn modes_parse() {
        assert_eq!("static".parse::<Mode>().unwrap(), Mode::StaticHover);
        assert_eq!("dynamic-circle".parse::<Mode>().unwrap(), Mode::DynamicCircle);
        assert!("spiral".parse::<Mode>().is_err());
    }
}
