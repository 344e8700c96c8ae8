use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceDistribution {
    Exponential,
    Lognormal,
}

/// When a simulation run stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Every device resolves this many tasks, then retires.
    Tasks(u64),
    /// Events later than this simulated time are not processed.
    Time(f64),
}

/// Simulator parameters. Units: seconds, Mbit, GHz, gigacycles per Mbit.
///
/// Read from TOML; every key is optional and defaults to the reference
/// environment (20 devices, 2 edges, 2.5 GHz devices, 41.8 GHz edges, 30 Mbit
/// tasks at 0.297 gigacycles/Mbit, drop coefficient 1.5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_devices: usize,
    pub num_edges: usize,
    pub device_capacity_ghz: f64,
    /// One entry per edge, or a single entry applied to all edges.
    pub edge_capacity_ghz: Vec<f64>,
    pub task_size_mbits: f64,
    pub task_density: f64,
    /// Mean of the exponential transmission delay.
    pub transmission_mean: f64,
    /// Drop time as a multiple of the mean local processing time. `inf`
    /// disables drops.
    pub drop_coefficient: f64,
    /// Absolute drop time; overrides `drop_coefficient` when set.
    pub drop_time: Option<f64>,
    /// Largest admissible waiting time before generating the next task.
    pub z_max: f64,
    pub service_distribution: ServiceDistribution,
    pub lognormal_sigma: f64,
    pub horizon: Horizon,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_devices: 20,
            num_edges: 2,
            device_capacity_ghz: 2.5,
            edge_capacity_ghz: vec![41.8],
            task_size_mbits: 30.0,
            task_density: 0.297,
            transmission_mean: 0.05,
            drop_coefficient: 1.5,
            drop_time: None,
            z_max: 5.0,
            service_distribution: ServiceDistribution::Exponential,
            lognormal_sigma: 1.0,
            horizon: Horizon::Tasks(1000),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let config: Self = toml::from_str(text).map_err(|e| SimError::Config {
            field: "toml".into(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Config {
            field: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        fn positive(field: &str, v: f64) -> Result<(), SimError> {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(SimError::Config {
                    field: field.into(),
                    message: format!("must be > 0, got {v}"),
                })
            }
        }
        fn finite_positive(field: &str, v: f64) -> Result<(), SimError> {
            positive(field, v)?;
            if v.is_finite() {
                Ok(())
            } else {
                Err(SimError::Config {
                    field: field.into(),
                    message: "must be finite".into(),
                })
            }
        }
        if self.num_devices == 0 {
            return Err(SimError::Config {
                field: "num_devices".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.num_edges == 0 {
            return Err(SimError::Config {
                field: "num_edges".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.edge_capacity_ghz.len() != 1 && self.edge_capacity_ghz.len() != self.num_edges {
            return Err(SimError::Config {
                field: "edge_capacity_ghz".into(),
                message: format!(
                    "needs 1 or {} entries, got {}",
                    self.num_edges,
                    self.edge_capacity_ghz.len()
                ),
            });
        }
        for c in &self.edge_capacity_ghz {
            finite_positive("edge_capacity_ghz", *c)?;
        }
        finite_positive("device_capacity_ghz", self.device_capacity_ghz)?;
        finite_positive("task_size_mbits", self.task_size_mbits)?;
        finite_positive("task_density", self.task_density)?;
        finite_positive("transmission_mean", self.transmission_mean)?;
        positive("drop_coefficient", self.drop_coefficient)?;
        if let Some(t) = self.drop_time {
            positive("drop_time", t)?;
        }
        finite_positive("z_max", self.z_max)?;
        finite_positive("lognormal_sigma", self.lognormal_sigma)?;
        match self.horizon {
            Horizon::Tasks(0) => {
                return Err(SimError::Config {
                    field: "horizon".into(),
                    message: "task horizon must be at least 1".into(),
                })
            }
            Horizon::Time(t) => finite_positive("horizon", t)?,
            Horizon::Tasks(_) => {}
        }
        Ok(())
    }

    /// Mean local processing time `size · density / device_capacity`.
    pub fn local_mean(&self) -> f64 {
        self.task_size_mbits * self.task_density / self.device_capacity_ghz
    }

    pub fn edge_capacity(&self, edge: usize) -> f64 {
        if self.edge_capacity_ghz.len() == 1 {
            self.edge_capacity_ghz[0]
        } else {
            self.edge_capacity_ghz[edge]
        }
    }

    /// Mean service time at edge `edge` (0-based).
    pub fn edge_mean(&self, edge: usize) -> f64 {
        self.task_size_mbits * self.task_density / self.edge_capacity(edge)
    }

    /// Drop time `Ȳ`; infinite when drops are disabled.
    pub fn drop_time(&self) -> f64 {
        self.drop_time
            .unwrap_or(self.drop_coefficient * self.local_mean())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_means() {
        let c = SimConfig::default();
        assert!((c.local_mean() - 3.564).abs() < 1e-12);
        assert!((c.edge_mean(0) - 8.91 / 41.8).abs() < 1e-12);
        assert!((c.edge_mean(1) - 0.2132).abs() < 1e-4);
        assert!((c.drop_time() - 5.346).abs() < 1e-12);
    }

    #[test]
    fn parses_partial_toml() {
        let c = SimConfig::from_toml_str(
            "num_devices = 3\nedge_capacity_ghz = [10.0, 20.0]\nhorizon = { time = 100.0 }\n",
        )
        .unwrap();
        assert_eq!(c.num_devices, 3);
        assert_eq!(c.edge_capacity(1), 20.0);
        assert_eq!(c.horizon, Horizon::Time(100.0));
        assert_eq!(c.task_density, 0.297);
    }

    #[test]
    fn infinite_drop_coefficient_disables_drops() {
        let c = SimConfig::from_toml_str("drop_coefficient = inf\n").unwrap();
        assert!(c.drop_time().is_infinite());
    }

    #[test]
    fn field_level_errors() {
        let err = SimConfig::from_toml_str("task_density = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("task_density"), "{err}");
        let err = SimConfig::from_toml_str("num_edges = 3\nedge_capacity_ghz = [1.0, 2.0]\n").unwrap_err();
        assert!(err.to_string().contains("edge_capacity_ghz"), "{err}");
        assert!(SimConfig::from_toml_str("bogus_key = 1\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = SimConfig {
            drop_time: Some(4.0),
            ..SimConfig::default()
        };
        assert_eq!(SimConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }
}
