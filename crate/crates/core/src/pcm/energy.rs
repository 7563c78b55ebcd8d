use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference operating points the per-event energies are calibrated to.
pub const REF_INFER_TIME_S: f64 = 0.45;
pub const REF_INFER_SPIKES: f64 = 0.022e6;
pub const REF_TRAIN_TIME_S: f64 = 3000.0;
pub const REF_TRAIN_EVENTS: f64 = 172.51e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

/// Power and per-event energy figures; powers in µW, energies in pJ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyModel {
    pub p_static_uw: f64,
    pub p_active_train_uw: f64,
    pub p_active_infer_uw: f64,
    pub e_per_spike_event_pj: f64,
    pub e_per_update_event_pj: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        let (p_train, p_infer) = (7.0, 5.0);
        Self {
            p_static_uw: 23.0,
            p_active_train_uw: p_train,
            p_active_infer_uw: p_infer,
            e_per_spike_event_pj: p_infer * 1e-6 * REF_INFER_TIME_S / REF_INFER_SPIKES * 1e12,
            e_per_update_event_pj: p_train * 1e-6 * REF_TRAIN_TIME_S / REF_TRAIN_EVENTS * 1e12,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.p_static_uw,
            self.p_active_train_uw,
            self.p_active_infer_uw,
            self.e_per_spike_event_pj,
            self.e_per_update_event_pj,
        ];
        if fields.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::Config("energy model fields must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn p_active_w(&self, mode: Mode) -> f64 {
        1e-6 * match mode {
            Mode::Train => self.p_active_train_uw,
            Mode::Infer => self.p_active_infer_uw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    /// `(p_static + p_active(mode)) · t`, joules.
    pub total_j: f64,
    pub static_j: f64,
    pub active_j: f64,
    /// Per-event view of the active part, joules.
    pub event_j: f64,
    pub power_w: f64,
}

pub fn estimate_energy(run_time_s: f64, spike_events: u64, update_events: u64, mode: Mode, m: &EnergyModel) -> EnergyEstimate {
    let static_j = m.p_static_uw * 1e-6 * run_time_s;
    let active_j = m.p_active_w(mode) * run_time_s;
    let event_j = 1e-12
        * (m.e_per_spike_event_pj * spike_events as f64 + m.e_per_update_event_pj * update_events as f64);
    EnergyEstimate {
        total_j: static_j + active_j,
        static_j,
        active_j,
        event_j,
        power_w: m.p_static_uw * 1e-6 + m.p_active_w(mode),
    }
}

/// Programming-pulse amplitudes (V) and widths (µs) of the synapse drivers.
/// Carried as metadata and used for programming-time bookkeeping only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSpec {
    pub v_sbl_v: f64,
    pub v_bwl_v: f64,
    pub v_lwl_v: f64,
    pub v_wll_v: f64,
    pub v_wlh_v: f64,
    pub t_a_us: f64,
    pub t_b_us: f64,
    pub t_c_us: f64,
    pub t_d_us: f64,
}

pub const T_A_RANGE_US: (f64, f64) = (9.1, 2040.0);
pub const T_B_RANGE_US: (f64, f64) = (4.4, 85.8);
pub const T_C_RANGE_US: (f64, f64) = (0.020, 0.079);
pub const T_D_RANGE_US: (f64, f64) = (27.0, 4251.6);

fn midpoint((lo, hi): (f64, f64)) -> f64 {
    0.5 * (lo + hi)
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            v_sbl_v: 2.5,
            v_bwl_v: 1.2,
            v_lwl_v: 1.2,
            v_wll_v: 0.75,
            v_wlh_v: 1.4,
            t_a_us: midpoint(T_A_RANGE_US),
            t_b_us: midpoint(T_B_RANGE_US),
            t_c_us: midpoint(T_C_RANGE_US),
            t_d_us: midpoint(T_D_RANGE_US),
        }
    }
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("t_a_us", self.t_a_us, T_A_RANGE_US),
            ("t_b_us", self.t_b_us, T_B_RANGE_US),
            ("t_c_us", self.t_c_us, T_C_RANGE_US),
            ("t_d_us", self.t_d_us, T_D_RANGE_US),
        ];
        for (name, v, (lo, hi)) in checks {
            if !(lo..=hi).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [{lo}, {hi}] µs")));
            }
        }
        Ok(())
    }

    /// Duration of one programming event: the set-type (`a`) pulse for
    /// potentiation, the reset-type (`d`) pulse for depression.
    pub fn update_duration_s(&self, potentiate: bool) -> f64 {
        1e-6 * if potentiate { self.t_a_us } else { self.t_d_us }
    }
}
