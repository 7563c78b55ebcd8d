//! Run reports, RBM/FCNN comparison records and CSV emitters.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rbm::EpochMetrics;

/// Published reference figures for the spiking RBM and the FCNN baseline.
pub mod reference {
    pub const RBM_PARAMETERS: u64 = 209_296;
    pub const FCNN_PARAMETERS: u64 = 38_476;
    pub const RBM_SPIKES_INFER: f64 = 0.022e6;
    pub const RBM_SPIKES_TRAIN: f64 = 172.51e6;
    pub const FCNN_MACS_INFER: f64 = 1.548e6;
    pub const FCNN_MACS_TRAIN: f64 = 46.445e9;
    pub const RBM_ACCURACY: f64 = 0.7836;
    pub const FCNN_ACCURACY: f64 = 0.7896;
    pub const TRAIN_RATIO: f64 = 269.23;
    pub const INFER_RATIO: f64 = 70.36;

    /// Accuracy of published CNNs and of the spiking RBM per command set.
    pub const COMMAND_SET_ACCURACY: [(&str, f64, f64); 4] = [
        ("up,down,left,right", 0.945, 0.864),
        ("bed,cat,happy,bird,five", 0.9136, 0.8624),
        ("digits 0-9", 0.90, 0.7836),
        ("stop,go,left,right,on,off,up,down,yes,no,silence,unknown", 0.882, 0.6927),
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub task: String,
    pub model: String,
    pub accuracy: f64,
    pub spikes_infer: u64,
    pub spikes_train: u64,
    pub macs_infer: u64,
    pub macs_train: u64,
    pub sim_time_s: f64,
    pub energy_j: f64,
    pub per_class_errors: Vec<f64>,
    pub class_sizes: Vec<u64>,
    /// Inferences where no label neuron fired.
    pub no_spike: u64,
}

impl RunReport {
    pub fn new(task: &str, model: &str) -> Self {
        Self {
            task: task.into(),
            model: model.into(),
            accuracy: 0.0,
            spikes_infer: 0,
            spikes_train: 0,
            macs_infer: 0,
            macs_train: 0,
            sim_time_s: 0.0,
            energy_j: 0.0,
            per_class_errors: Vec::new(),
            class_sizes: Vec::new(),
            no_spike: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::Contract(format!("accuracy {} outside [0, 1]", self.accuracy)));
        }
        if self.per_class_errors.len() != self.class_sizes.len() {
            return Err(Error::Contract("per-class errors and sizes differ in length".into()));
        }
        let n: u64 = self.class_sizes.iter().sum();
        if n > 0 {
            let mean: f64 = self
                .per_class_errors
                .iter()
                .zip(&self.class_sizes)
                .map(|(e, &s)| e * s as f64)
                .sum::<f64>()
                / n as f64;
            if (mean - (1.0 - self.accuracy)).abs() > 1e-9 {
                return Err(Error::Contract(format!(
                    "per-class errors average to {mean}, accuracy implies {}",
                    1.0 - self.accuracy
                )));
            }
        }
        Ok(())
    }

    /// `key = value` block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task = {}", self.task);
        let _ = writeln!(s, "model = {}", self.model);
        let _ = writeln!(s, "accuracy = {:.6}", self.accuracy);
        let _ = writeln!(s, "spikes_infer = {}", self.spikes_infer);
        let _ = writeln!(s, "spikes_train = {}", self.spikes_train);
        let _ = writeln!(s, "macs_infer = {}", self.macs_infer);
        let _ = writeln!(s, "macs_train = {}", self.macs_train);
        let _ = writeln!(s, "sim_time_s = {:.6}", self.sim_time_s);
        let _ = writeln!(s, "energy_j = {:.6e}", self.energy_j);
        let errs: Vec<String> = self.per_class_errors.iter().map(|e| format!("{e:.6}")).collect();
        let _ = writeln!(s, "per_class_errors = {}", errs.join(","));
        let sizes: Vec<String> = self.class_sizes.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "class_sizes = {}", sizes.join(","));
        let _ = writeln!(s, "no_spike = {}", self.no_spike);
        s
    }
}

/// `cost / spikes`, undefined when there are no spikes.
fn ratio(cost: f64, spikes: f64) -> Option<f64> {
    (spikes > 0.0).then(|| cost / spikes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub train_ratio: Option<f64>,
    pub infer_ratio: Option<f64>,
    /// RBM accuracy minus FCNN accuracy.
    pub accuracy_delta: f64,
    pub rbm: RunReport,
    pub fcnn: RunReport,
}

pub fn compare(rbm: &RunReport, fcnn: &RunReport) -> Comparison {
    Comparison {
        train_ratio: ratio(fcnn.macs_train as f64, rbm.spikes_train as f64),
        infer_ratio: ratio(fcnn.macs_infer as f64, rbm.spikes_infer as f64),
        accuracy_delta: rbm.accuracy - fcnn.accuracy,
        rbm: rbm.clone(),
        fcnn: fcnn.clone(),
    }
}

/// Ratio arithmetic on raw counts, for reference inputs that are not whole
/// reports.
pub fn count_ratios(macs_train: f64, spikes_train: f64, macs_infer: f64, spikes_infer: f64) -> (Option<f64>, Option<f64>) {
    (ratio(macs_train, spikes_train), ratio(macs_infer, spikes_infer))
}

fn fmt_ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "undefined".to_string(), |v| format!("{v:.2}"))
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[comparison]");
        let _ = writeln!(s, "train_macs_per_spike = {}", fmt_ratio(self.train_ratio));
        let _ = writeln!(s, "infer_macs_per_spike = {}", fmt_ratio(self.infer_ratio));
        let _ = writeln!(s, "accuracy_delta = {:.6}", self.accuracy_delta);
        let (rt, ri) = count_ratios(
            reference::FCNN_MACS_TRAIN,
            reference::RBM_SPIKES_TRAIN,
            reference::FCNN_MACS_INFER,
            reference::RBM_SPIKES_INFER,
        );
        let _ = writeln!(s, "reference_train_ratio = {}", fmt_ratio(rt));
        let _ = writeln!(s, "reference_infer_ratio = {}", fmt_ratio(ri));
        let _ = writeln!(s, "\n[rbm]");
        s.push_str(&self.rbm.to_text());
        let _ = writeln!(s, "\n[fcnn]");
        s.push_str(&self.fcnn.to_text());
        s
    }
}

/// `epoch,err_<class>...,mean_error`; epochs without a test evaluation are
/// skipped.
pub fn epoch_error_series(epochs: &[EpochMetrics], class_names: &[String]) -> String {
    let mut s = String::from("epoch");
    for name in class_names {
        let _ = write!(s, ",err_{name}");
    }
    s.push_str(",mean_error\n");
    for m in epochs {
        let Some(ev) = &m.test else { continue };
        let _ = write!(s, "{}", m.epoch);
        for e in &ev.per_class_error {
            let _ = write!(s, ",{e:.6}");
        }
        let _ = writeln!(s, ",{:.6}", 1.0 - ev.accuracy);
    }
    s
}

/// `epoch,train_spikes,updates,test_error,wall_time`.
pub fn epoch_metrics_csv(epochs: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,train_spikes,updates,test_error,wall_time\n");
    for m in epochs {
        let err = m.test_error().map_or_else(String::new, |e| format!("{e:.6}"));
        let _ = writeln!(s, "{},{},{},{},{:.3}", m.epoch, m.train_spikes, m.updates(), err, m.wall_time_s);
    }
    s
}

/// One cell of an image-size sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepCell {
    Error(f64),
    Skipped(String),
}

/// Error-rate matrix: header row of heights, one row per width.
pub fn sweep_csv(widths: &[usize], heights: &[usize], cells: &[Vec<SweepCell>]) -> String {
    let mut s = String::from("width\\height");
    for h in heights {
        let _ = write!(s, ",{h}");
    }
    s.push('\n');
    for (w, row) in widths.iter().zip(cells) {
        let _ = write!(s, "{w}");
        for c in row {
            match c {
                SweepCell::Error(e) => {
                    let _ = write!(s, ",{e:.6}");
                }
                SweepCell::Skipped(_) => s.push_str(",skipped"),
            }
        }
        s.push('\n');
    }
    s
}
