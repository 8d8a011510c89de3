//! The cross-engine medical analytic: classify a test patient as likely
//! to deteriorate by comparing Haar-transform signatures of ECG-like
//! waveforms.
//!
//! Pipeline: Haar-basis transform per patient → per-scale histograms of
//! the coefficients, concatenated into a patient vector → TF-IDF
//! weighting → cosine k-NN vote.
//!
//! [`workload`] runs the pipeline in three execution modes over the
//! embedded engines — array-only, relational-only (through the
//! ARRAY-island shims) and hybrid (Haar + binning on the array engine,
//! one cast, TF-IDF and k-NN as relational aggregates) — and reports
//! per-stage wall times. All modes must classify identically; the modes
//! differ only in where the work runs.

pub mod cohort;
pub mod vector;
pub mod workload;

pub use cohort::{gen_cohort, Cohort, Label, PatientSeries};
pub use vector::{haar_patient_vector, idf_vector, knn_classify, tfidf_weight};
pub use workload::{run_all_modes, run_workload, ExecutionMode, WorkloadReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("bad workload config: {0}")]
    Config(String),
    #[error("engine error during {stage}: {message}")]
    Engine { stage: String, message: String },
}

/// Workload parameters. Defaults are desk scale; `paper_scale` raises
/// the cohort to 600 patients of 16384 samples.
#[derive(Debug, Clone)]
pub struct WorkloadConfig {
    /// Training patients (one extra test patient is always generated).
    pub n_patients: usize,
    /// Samples per patient; a power of two ≥ 8.
    pub signal_len: usize,
    /// Histogram bins per temporal scale.
    pub bins: usize,
    /// Neighbors in the k-NN vote; odd.
    pub k: usize,
    pub seed: u64,
    /// Probability a generated patient deteriorates.
    pub anomaly_rate: f64,
    pub mode: ExecutionMode,
}

impl Default for WorkloadConfig {
    fn default() -> WorkloadConfig {
        WorkloadConfig {
            n_patients: 64,
            signal_len: 1024,
            bins: 16,
            k: 5,
            seed: 1,
            anomaly_rate: 0.3,
            mode: ExecutionMode::Hybrid,
        }
    }
}

impl WorkloadConfig {
    /// The cohort size of the reference experiment.
    pub fn paper_scale(mut self) -> WorkloadConfig {
        self.n_patients = 600;
        self.signal_len = 16384;
        self
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.bins < 2 {
            return Err(AnalyticsError::Config("bins must be >= 2".into()));
        }
        if self.k.is_multiple_of(2) || self.k == 0 {
            return Err(AnalyticsError::Config("k must be odd and >= 1".into()));
        }
        if self.k > self.n_patients {
            return Err(AnalyticsError::Config(
                "k cannot exceed the training-patient count".into(),
            ));
        }
        if self.signal_len < 8 || !self.signal_len.is_power_of_two() {
            return Err(AnalyticsError::Config(
                "signal length must be a power of two >= 8".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.anomaly_rate) {
            return Err(AnalyticsError::Config("anomaly rate must be in [0,1]".into()));
        }
        Ok(())
    }
}
