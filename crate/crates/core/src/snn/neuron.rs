use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Capacitor-potential LIF constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifParams {
    pub v_rest: f64,
    pub v_th: f64,
    /// Floor of the potential; the capacitor cannot discharge further.
    pub v_min: f64,
    /// Potential change per unit of synaptic weight per incoming spike.
    pub alpha: f64,
    pub tau_leak_ms: f64,
    pub t_refr_ms: f64,
    pub t_syn_ms: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            v_rest: 0.0,
            v_th: 1.0,
            v_min: -1.0,
            alpha: 0.06,
            tau_leak_ms: 1.0,
            t_refr_ms: 4.0,
            t_syn_ms: 1.0,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_th > self.v_rest) {
            return Err(Error::Config("v_th must exceed v_rest".into()));
        }
        if !(self.v_min <= self.v_rest) {
            return Err(Error::Config("v_min must not exceed v_rest".into()));
        }
        if !(self.alpha > 0.0) || !(self.tau_leak_ms > 0.0) {
            return Err(Error::Config("alpha and tau_leak_ms must be positive".into()));
        }
        if !(self.t_refr_ms >= 0.0) || !(self.t_syn_ms >= 0.0) {
            return Err(Error::Config("t_refr_ms and t_syn_ms must be non-negative".into()));
        }
        Ok(())
    }

    pub fn t_refr_us(&self) -> u64 {
        (self.t_refr_ms * 1000.0).round() as u64
    }

    pub fn t_syn_us(&self) -> u64 {
        (self.t_syn_ms * 1000.0).round() as u64
    }

    pub fn tau_leak_us(&self) -> f64 {
        self.tau_leak_ms * 1000.0
    }

    /// Leak factor over `elapsed_us`.
    pub fn decay(&self, elapsed_us: u64) -> f64 {
        (-(elapsed_us as f64) / self.tau_leak_us()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifNeuron {
    pub v: f64,
    pub last_update_us: u64,
    pub refr_until_us: u64,
}

impl LifNeuron {
    pub fn at_rest(p: &LifParams) -> Self {
        Self {
            v: p.v_rest,
            last_update_us: 0,
            refr_until_us: 0,
        }
    }

    /// Potential at `t_us` without touching state.
    pub fn potential_at(&self, t_us: u64, p: &LifParams) -> f64 {
        let dt = t_us.saturating_sub(self.last_update_us);
        p.v_rest + (self.v - p.v_rest) * p.decay(dt)
    }

    pub fn is_refractory(&self, t_us: u64) -> bool {
        t_us < self.refr_until_us
    }

    /// Leak to `t_us`, integrate `alpha · w`, fire if the threshold is
    /// reached outside the refractory window. Returns whether it fired.
    pub fn deliver(&mut self, w: f64, t_us: u64, p: &LifParams) -> Result<bool> {
        if t_us < self.last_update_us {
            return Err(Error::Contract(format!(
                "delivery at {t_us} µs precedes last update at {} µs",
                self.last_update_us
            )));
        }
        let decay = p.decay(t_us - self.last_update_us);
        Ok(self.integrate(w, t_us, decay, p))
    }

    /// [`deliver`](Self::deliver) with a precomputed leak factor.
    #[inline]
    pub(crate) fn integrate(&mut self, w: f64, t_us: u64, decay: f64, p: &LifParams) -> bool {
        self.v = p.v_rest + (self.v - p.v_rest) * decay;
        self.last_update_us = t_us;
        self.v = (self.v + p.alpha * w).max(p.v_min);
        if self.v >= p.v_th {
            if t_us >= self.refr_until_us {
                self.fire(t_us, p);
                return true;
            }
            self.v = p.v_th;
        }
        false
    }

    /// Emits a spike at `t_us`: reset and start the refractory window.
    pub fn fire(&mut self, t_us: u64, p: &LifParams) {
        self.v = p.v_rest;
        self.last_update_us = t_us;
        self.refr_until_us = t_us + p.t_refr_us();
    }
}
