//! Synthetic patient cohort: a desk-scale stand-in for real ICU
//! waveforms. Stable patients are a band-limited sinusoid mix with
//! stationary noise; deteriorating patients grow a noise-variance ramp
//! through the second half of the record.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::WorkloadConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Stable,
    Deteriorating,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Stable => "stable",
            Label::Deteriorating => "deteriorating",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientSeries {
    pub id: u32,
    pub signal: Vec<f64>,
    pub label: Label,
}

/// `train` patients carry usable labels; the test patient's label is the
/// generator's ground truth, reported but never consulted by the
/// classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub train: Vec<PatientSeries>,
    pub test: PatientSeries,
}

const BASE_NOISE_SIGMA: f64 = 0.2;
const RAMP_PEAK_FACTOR: f64 = 3.0;

/// Deterministically generates `n_patients + 1` series from the seed;
/// the last one is the test patient.
pub fn gen_cohort(config: &WorkloadConfig) -> Cohort {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut patients = Vec::with_capacity(config.n_patients + 1);
    for id in 0..=config.n_patients {
        let label = if rng.gen_bool(config.anomaly_rate) {
            Label::Deteriorating
        } else {
            Label::Stable
        };
        patients.push(PatientSeries {
            id: id as u32,
            signal: gen_signal(&mut rng, config.signal_len, label),
            label,
        });
    }
    let test = patients.pop().expect("n_patients + 1 generated");
    Cohort {
        train: patients,
        test,
    }
}

fn gen_signal(rng: &mut ChaCha8Rng, n: usize, label: Label) -> Vec<f64> {
    // three sinusoids in a low band
    let components: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.5..1.5),          // amplitude
                rng.gen_range(1.0..8.0),          // cycles over the record
                rng.gen_range(0.0..std::f64::consts::TAU), // phase
            )
        })
        .collect();
    let half = n / 2;
    (0..n)
        .map(|t| {
            let x = t as f64 / n as f64;
            let mut v = 0.0;
            for (a, f, p) in &components {
                v += a * (std::f64::consts::TAU * f * x + p).sin();
            }
            let sigma = match label {
                Label::Stable => BASE_NOISE_SIGMA,
                Label::Deteriorating if t >= half => {
                    let ramp = (t - half) as f64 / half as f64;
                    BASE_NOISE_SIGMA * (1.0 + RAMP_PEAK_FACTOR * ramp)
                }
                Label::Deteriorating => BASE_NOISE_SIGMA,
            };
            let noise: f64 = StandardNormal.sample(rng);
            v + sigma * noise
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, len: usize, seed: u64, rate: f64) -> WorkloadConfig {
        WorkloadConfig {
            n_patients: n,
            signal_len: len,
            seed,
            anomaly_rate: rate,
            ..WorkloadConfig::default()
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let a = gen_cohort(&config(8, 64, 42, 0.3));
        let b = gen_cohort(&config(8, 64, 42, 0.3));
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = gen_cohort(&config(8, 64, 1, 0.3));
        let b = gen_cohort(&config(8, 64, 2, 0.3));
        assert_ne!(a, b);
    }

    #[test]
    fn shapes_match_config() {
        let c = gen_cohort(&config(600, 1024, 7, 0.3));
        assert_eq!(c.train.len(), 600);
        assert!(c.train.iter().all(|p| p.signal.len() == 1024));
        assert_eq!(c.test.signal.len(), 1024);
    }

    #[test]
    fn zero_anomaly_rate_is_all_stable() {
        let c = gen_cohort(&config(32, 64, 9, 0.0));
        assert!(c.train.iter().all(|p| p.label == Label::Stable));
        assert_eq!(c.test.label, Label::Stable);
    }

    #[test]
    fn deteriorating_half_has_higher_variance() {
        // aggregate over patients so the check is statistical but stable
        let c = gen_cohort(&config(48, 256, 3, 1.0));
        let (mut first, mut second) = (0.0, 0.0);
        for p in &c.train {
            let half = p.signal.len() / 2;
            first += variance(&p.signal[..half]);
            second += variance(&p.signal[half..]);
        }
        assert!(second > first, "ramp must raise second-half variance");
    }

    fn variance(xs: &[f64]) -> f64 {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
    }
}
