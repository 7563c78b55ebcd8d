//! Behavioral model of the differential PCM synapse.
//!
//! A synapse is a pair of cells (Rp, Rn) with quantized conductance levels;
//! the signed weight is `scale · (g_p − g_n)`. Potentiation raises `g_p` and
//! lowers `g_n`, depression does the opposite, both saturating at the bounds.

mod checkpoint;
mod energy;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, SynapseArray, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use energy::{estimate_energy, EnergyEstimate, EnergyModel, Mode, PulseSpec};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Device tunables as they appear in the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    pub n_states: u32,
    pub g_min_us: f64,
    pub g_max_us: f64,
    /// Normalized weight of a fully programmed pair (`g_p = g_max`, `g_n = g_min`).
    pub w_max: f64,
    pub potentiate_step_factor: f64,
    pub depress_step_factor: f64,
    pub read_noise_sigma: f64,
    pub auto_refresh: bool,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            n_states: 1000,
            g_min_us: 0.1,
            g_max_us: 10.0,
            w_max: 1.0,
            potentiate_step_factor: 1.0,
            depress_step_factor: 1.0,
            read_noise_sigma: 0.0,
            auto_refresh: true,
        }
    }
}

impl DeviceConfig {
    pub fn build(&self) -> Result<Device> {
        if !(2..=65_536).contains(&self.n_states) {
            return Err(Error::Config(format!("n_states {} outside 2..=65536", self.n_states)));
        }
        if !(self.g_max_us > self.g_min_us && self.g_min_us >= 0.0) {
            return Err(Error::Config("need 0 <= g_min_us < g_max_us".into()));
        }
        if !(self.w_max > 0.0 && self.w_max.is_finite()) {
            return Err(Error::Config("w_max must be positive".into()));
        }
        if !(self.potentiate_step_factor >= 0.0 && self.depress_step_factor >= 0.0) {
            return Err(Error::Config("step factors must be non-negative".into()));
        }
        if !(self.read_noise_sigma >= 0.0) {
            return Err(Error::Config("read_noise_sigma must be non-negative".into()));
        }
        let (g_min, g_max) = (self.g_min_us * 1e-6, self.g_max_us * 1e-6);
        Ok(Device {
            max_level: (self.n_states - 1) as u16,
            g_min,
            g_max,
            scale: self.w_max / (g_max - g_min),
            potentiate_factor: self.potentiate_step_factor,
            depress_factor: self.depress_step_factor,
            read_noise_sigma: self.read_noise_sigma,
            auto_refresh: self.auto_refresh,
        })
    }
}

/// Resolved device parameters shared by every synapse of an array.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub max_level: u16,
    /// Siemens.
    pub g_min: f64,
    pub g_max: f64,
    /// Weight per siemens of conductance difference.
    pub scale: f64,
    pub potentiate_factor: f64,
    pub depress_factor: f64,
    pub read_noise_sigma: f64,
    pub auto_refresh: bool,
}

impl Device {
    pub fn n_states(&self) -> u32 {
        self.max_level as u32 + 1
    }

    /// Conductance quantum.
    pub fn step(&self) -> f64 {
        (self.g_max - self.g_min) / self.max_level as f64
    }

    pub fn conductance(&self, level: u16) -> f64 {
        self.g_min + level as f64 * self.step()
    }

    pub fn weight_per_level(&self) -> f64 {
        self.scale * self.step()
    }

    /// Largest readable weight, `scale · (g_max − g_min)`.
    pub fn w_max(&self) -> f64 {
        self.max_level as f64 * self.weight_per_level()
    }

    /// Nearest level for a conductance, clamped to the bounds.
    pub fn level_of(&self, g: f64) -> u16 {
        ((g - self.g_min) / self.step()).round().clamp(0.0, self.max_level as f64) as u16
    }

    fn steps(magnitude: u32, factor: f64) -> u32 {
        (magnitude as f64 * factor).round() as u32
    }

    /// Signed weight; reads never change state.
    pub fn read_weight(&self, s: &DifferentialSynapse) -> f64 {
        s.level_diff() as f64 * self.weight_per_level()
    }

    /// Read with additive Gaussian noise of `read_noise_sigma · w_max`.
    pub fn read_weight_noisy<R: Rng>(&self, s: &DifferentialSynapse, rng: &mut R) -> f64 {
        let w = self.read_weight(s);
        if self.read_noise_sigma == 0.0 {
            return w;
        }
        // Box-Muller
        let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(f64::MIN_POSITIVE), rng.gen());
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        w + z * self.read_noise_sigma * self.w_max()
    }

    /// Raises `g_p` and lowers `g_n` by `magnitude` quanta each (saturating).
    /// Returns whether the weight changed.
    pub fn potentiate(&self, s: &mut DifferentialSynapse, magnitude: u32) -> bool {
        let k = Self::steps(magnitude, self.potentiate_factor);
        self.program(s, k as i64)
    }

    pub fn depress(&self, s: &mut DifferentialSynapse, magnitude: u32) -> bool {
        let k = Self::steps(magnitude, self.depress_factor);
        self.program(s, -(k as i64))
    }

    fn program(&self, s: &mut DifferentialSynapse, k: i64) -> bool {
        let before = s.level_diff();
        let max = self.max_level as i64;
        s.p = (s.p as i64 + k).clamp(0, max) as u16;
        s.n = (s.n as i64 - k).clamp(0, max) as u16;
        if self.auto_refresh && self.near_bound(s) {
            self.refresh(s);
        }
        s.level_diff() != before
    }

    fn near_bound(&self, s: &DifferentialSynapse) -> bool {
        let m = self.max_level;
        s.p <= 1 || s.n <= 1 || s.p + 1 >= m || s.n + 1 >= m
    }

    /// Re-centres the pair on the low end (one quantum above `g_min`)
    /// keeping `g_p − g_n` exactly.
    pub fn refresh(&self, s: &mut DifferentialSynapse) {
        let diff = s.level_diff();
        let span = diff.unsigned_abs() as u16;
        let low = 1u16.min(self.max_level - span);
        let high = low + span;
        if diff >= 0 {
            s.p = high;
            s.n = low;
        } else {
            s.p = low;
            s.n = high;
        }
    }

    /// Pair whose weight is the nearest representable value to `w`,
    /// centred on the mid level.
    pub fn synapse_for_weight(&self, w: f64) -> DifferentialSynapse {
        let max = self.max_level as i32;
        let diff = (w / self.weight_per_level()).round().clamp(-max as f64, max as f64) as i32;
        let mid = max / 2;
        let mut p = mid + diff.div_euclid(2) + diff.rem_euclid(2);
        p = p.clamp(diff.max(0), max + diff.min(0));
        DifferentialSynapse {
            p: p as u16,
            n: (p - diff) as u16,
        }
    }
}

/// Two PCM cells stored as quantized levels (0 = `g_min`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DifferentialSynapse {
    pub p: u16,
    pub n: u16,
}

impl DifferentialSynapse {
    pub fn new(p: u16, n: u16) -> Self {
        Self { p, n }
    }

    pub fn level_diff(&self) -> i32 {
        self.p as i32 - self.n as i32
    }

    /// The two cells as (g_p, g_n) in siemens.
    pub fn conductances(&self, device: &Device) -> (f64, f64) {
        (device.conductance(self.p), device.conductance(self.n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dev() -> Device {
        DeviceConfig::default().build().unwrap()
    }

    #[test]
    fn symmetric_pair_reads_zero() {
        let d = dev();
        assert_eq!(d.read_weight(&DifferentialSynapse::new(400, 400)), 0.0);
    }

    #[test]
    fn extremes_read_full_scale() {
        let d = dev();
        let w = d.read_weight(&DifferentialSynapse::new(999, 0));
        let (gp, gn) = DifferentialSynapse::new(999, 0).conductances(&d);
        assert!((w - d.scale * (gp - gn)).abs() < 1e-12);
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_potentiation_moves_two_quanta() {
        let d = dev();
        let mut s = DifferentialSynapse::new(500, 500);
        assert!(d.potentiate(&mut s, 1));
        assert_eq!(s, DifferentialSynapse::new(501, 499));
        assert!((d.read_weight(&s) - 2.0 * d.weight_per_level()).abs() < 1e-15);
        assert!(d.depress(&mut s, 1));
        assert!(d.depress(&mut s, 1));
        assert!((d.read_weight(&s) + 2.0 * d.weight_per_level()).abs() < 1e-15);
    }

    #[test]
    fn saturated_pairs_do_not_move() {
        let d = dev();
        let mut top = DifferentialSynapse::new(999, 0);
        assert!(!d.potentiate(&mut top, 1));
        assert_eq!(top, DifferentialSynapse::new(999, 0));
        let mut bottom = DifferentialSynapse::new(0, 999);
        assert!(!d.depress(&mut bottom, 1));
        assert_eq!(bottom, DifferentialSynapse::new(0, 999));
    }

    #[test]
    fn ten_up_ten_down_is_identity() {
        let d = dev();
        let mut s = DifferentialSynapse::new(480, 520);
        let start = d.read_weight(&s);
        (0..10).for_each(|_| {
            d.potentiate(&mut s, 1);
        });
        (0..10).for_each(|_| {
            d.depress(&mut s, 1);
        });
        assert_eq!(d.read_weight(&s), start);
        let mut t = DifferentialSynapse::new(300, 200);
        d.potentiate(&mut t, 7);
        d.depress(&mut t, 7);
        assert_eq!(t, DifferentialSynapse::new(300, 200));
    }

    #[test]
    fn full_sweep_in_999_steps() {
        let d = dev();
        let mut s = DifferentialSynapse::new(0, 999);
        for _ in 0..999 {
            assert!(d.potentiate(&mut s, 1));
        }
        assert_eq!(s, DifferentialSynapse::new(999, 0));
    }

    #[test]
    fn refresh_preserves_weight() {
        let d = dev();
        let mut s = DifferentialSynapse::new(999, 999);
        d.refresh(&mut s);
        assert_eq!(s, DifferentialSynapse::new(1, 1));
        assert_eq!(d.read_weight(&s), 0.0);
        for (p, n) in [(700, 100), (3, 950), (999, 0), (0, 999), (998, 0)] {
            let mut s = DifferentialSynapse::new(p, n);
            let w = d.read_weight(&s);
            d.refresh(&mut s);
            assert_eq!(d.read_weight(&s).to_bits(), w.to_bits());
        }
    }

    #[test]
    fn step_factors_scale_quanta() {
        let cfg = DeviceConfig {
            potentiate_step_factor: 2.0,
            depress_step_factor: 0.5,
            ..Default::default()
        };
        let d = cfg.build().unwrap();
        let mut s = DifferentialSynapse::new(500, 500);
        d.potentiate(&mut s, 1);
        assert_eq!(s.level_diff(), 4);
        d.depress(&mut s, 2);
        assert_eq!(s.level_diff(), 2);
    }

    #[test]
    fn synapse_for_weight_is_nearest() {
        let d = dev();
        for w in [-1.0, -0.05, 0.0, 0.0312, 0.5, 1.0] {
            let s = d.synapse_for_weight(w);
            assert!((d.read_weight(&s) - w).abs() <= d.weight_per_level() / 2.0 + 1e-12);
            assert!(s.p <= 999 && s.n <= 999);
        }
    }

    #[test]
    fn noisy_read_is_unbiased_and_pure() {
        let d = DeviceConfig { read_noise_sigma: 0.01, ..Default::default() }.build().unwrap();
        let s = DifferentialSynapse::new(600, 400);
        let mut rng = crate::rng::seeded(1);
        let mean: f64 = (0..20_000).map(|_| d.read_weight_noisy(&s, &mut rng)).sum::<f64>() / 20_000.0;
        assert!((mean - d.read_weight(&s)).abs() < 1e-3);
        assert_eq!(s, DifferentialSynapse::new(600, 400));
    }

    #[test]
    fn config_validation() {
        assert!(DeviceConfig { n_states: 1, ..Default::default() }.build().is_err());
        assert!(DeviceConfig { g_max_us: 0.0, ..Default::default() }.build().is_err());
        assert!(DeviceConfig { w_max: 0.0, ..Default::default() }.build().is_err());
    }
}
