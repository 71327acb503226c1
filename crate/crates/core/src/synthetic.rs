//! FD001-shaped synthetic run-to-failure data for tests and demos.
//!
//! Sensors with the same roles as in FD001: six are constant, sensor 6
//! takes two values, twelve drift with degradation plus noise. Operating
//! settings 1 and 2 are small noise and setting 3 is fixed at 100.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{EngineSeriesSet, RawRecord};
use crate::error::Result;

const CONSTANT_SENSORS: [usize; 6] = [1, 5, 10, 16, 18, 19];

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_units: u32,
    pub min_life: u32,
    pub max_life: u32,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_units: 20,
            min_life: 60,
            max_life: 120,
            noise: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Full run-to-failure series, unlabelled.
    pub train: EngineSeriesSet,
    /// Series cut before failure.
    pub test: EngineSeriesSet,
    /// True RUL at each test unit's last cycle.
    pub test_rul: Vec<u32>,
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn unit_records(rng: &mut ChaCha8Rng, unit_id: u32, life: u32, len: u32, noise: f64) -> Vec<RawRecord> {
    let offset: f64 = rng.gen_range(0.0..0.2);
    (1..=len)
        .map(|cycle| {
            let wear = offset + (f64::from(cycle) / f64::from(life)).powi(2);
            let mut sensors = [0.0; 21];
            for (k, s) in sensors.iter_mut().enumerate() {
                let n = k + 1;
                *s = if CONSTANT_SENSORS.contains(&n) {
                    100.0 + n as f64
                } else if n == 6 {
                    if rng.gen_bool(0.98) {
                        21.61
                    } else {
                        21.6
                    }
                } else {
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    let base = 50.0 + 10.0 * n as f64;
                    round4(base + sign * (1.0 + 0.1 * n as f64) * wear + noise * rng.gen_range(-1.0..1.0))
                };
            }
            RawRecord {
                unit_id,
                cycle,
                op_settings: [
                    round4(rng.gen_range(-0.002..0.002)),
                    round4(rng.gen_range(-0.0005..0.0005)),
                    100.0,
                ],
                sensors,
            }
        })
        .collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut test_rul = Vec::new();
    for u in 1..=spec.n_units {
        let life = rng.gen_range(spec.min_life..=spec.max_life);
        train.extend(unit_records(&mut rng, u, life, life, spec.noise));
        let life = rng.gen_range(spec.min_life..=spec.max_life);
        let cut = rng.gen_range((life * 3 / 10).max(1)..=(life * 95 / 100).max(1));
        test.extend(unit_records(&mut rng, u, life, cut, spec.noise));
        test_rul.push(life - cut);
    }
    Ok(SyntheticData {
        train: EngineSeriesSet::from_records(train)?,
        test: EngineSeriesSet::from_records(test)?,
        test_rul,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_series_file, summarize};
    use crate::preprocess::{build_feature_mask, MaskMode};

    #[test]
    fn shape_and_mask() {
        let d = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(d.train.n_units(), 20);
        assert_eq!(d.test_rul.len(), 20);
        let mask = build_feature_mask(&summarize(&d.train).unwrap(), MaskMode::Both).unwrap();
        assert_eq!(mask.n_features(), 12);
        // Text round trip.
        let back = parse_series_file(&d.train.to_text()).unwrap();
        assert_eq!(back, d.train);
    }

    #[test]
    fn seeded() {
        let a = generate(&SyntheticSpec::default()).unwrap();
        let b = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test_rul, b.test_rul);
    }
}
