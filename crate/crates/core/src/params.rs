use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("parameter `{name}` out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("interval `{name}` ({value} s) is not a whole multiple of dt_s ({dt} s)")]
    NotMultipleOfDt {
        name: &'static str,
        value: f64,
        dt: f64,
    },
}

/// Free parameters of the simulation, serialized as the `params` section of
/// a scenario file. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    #[serde(rename = "dt_s")]
    pub dt: f64,
    #[serde(rename = "comm_range_m")]
    pub comm_range: f64,
    pub target_group_size: usize,
    #[serde(rename = "recluster_interval_s")]
    pub recluster_interval: f64,
    #[serde(rename = "gossip_interval_s")]
    pub gossip_interval: f64,
    #[serde(rename = "sssp_interval_s")]
    pub sssp_interval: f64,
    /// Records older than this are dropped on merge.
    #[serde(rename = "t_expire_s")]
    pub t_expire: f64,
    /// Speed floor as a fraction of free-flow speed.
    pub epsilon_v: f64,
    /// Upper bound on groups per epoch; also the gid stride between epochs.
    pub k_max: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 1.0,
            comm_range: 250.0,
            target_group_size: 20,
            recluster_interval: 30.0,
            gossip_interval: 5.0,
            sssp_interval: 10.0,
            t_expire: 60.0,
            epsilon_v: 0.05,
            k_max: 4096,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let positive = [
            ("dt_s", self.dt),
            ("comm_range_m", self.comm_range),
            ("recluster_interval_s", self.recluster_interval),
            ("gossip_interval_s", self.gossip_interval),
            ("sssp_interval_s", self.sssp_interval),
            ("t_expire_s", self.t_expire),
            ("target_group_size", self.target_group_size as f64),
            ("k_max", self.k_max as f64),
        ];
        for (name, value) in positive {
            // t_expire may be infinite to disable expiry.
            if value.is_nan() || value <= 0.0 || (value.is_infinite() && name != "t_expire_s") {
                return Err(ParamsError::OutOfRange { name, value });
            }
        }
        if !(self.epsilon_v > 0.0 && self.epsilon_v < 1.0) {
            return Err(ParamsError::OutOfRange {
                name: "epsilon_v",
                value: self.epsilon_v,
            });
        }
        for (name, value) in [
            ("recluster_interval_s", self.recluster_interval),
            ("gossip_interval_s", self.gossip_interval),
            ("sssp_interval_s", self.sssp_interval),
        ] {
            steps_in(value, self.dt).ok_or(ParamsError::NotMultipleOfDt {
                name,
                value,
                dt: self.dt,
            })?;
        }
        Ok(())
    }

    pub fn recluster_steps(&self) -> u64 {
        steps_in(self.recluster_interval, self.dt).unwrap_or(1)
    }

    pub fn gossip_steps(&self) -> u64 {
        steps_in(self.gossip_interval, self.dt).unwrap_or(1)
    }

    pub fn sssp_steps(&self) -> u64 {
        steps_in(self.sssp_interval, self.dt).unwrap_or(1)
    }
}

/// Number of `dt` steps in `interval`, if it is a whole multiple.
fn steps_in(interval: f64, dt: f64) -> Option<u64> {
    let ratio = interval / dt;
    let rounded = ratio.round();
    (rounded >= 1.0 && (ratio - rounded).abs() < 1e-9 * ratio.max(1.0)).then_some(rounded as u64)
}
