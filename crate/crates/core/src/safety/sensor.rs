use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::contact::ContactForce;

/// Optoelectronic force sensor: additive gaussian noise then uniform quantization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorModel {
    /// Quantization step, N.
    pub step: f64,
    /// Noise standard deviation, N.
    pub sigma: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            step: 0.1,
            sigma: 0.05,
        }
    }
}

/// One quantized sample of (normal, lateral x, lateral y), stored as step counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub counts: [i64; 3],
    /// Quantization step, N.
    pub step: f64,
    pub sigma: f64,
    pub tick: u64,
}

impl SensorReading {
    pub fn zero(model: &SensorModel, tick: u64) -> Self {
        Self {
            counts: [0; 3],
            step: model.step,
            sigma: model.sigma,
            tick,
        }
    }

    /// Forces in N: normal, lateral x, lateral y.
    pub fn forces(&self) -> [f64; 3] {
        self.counts.map(|c| c as f64 * self.step)
    }

    pub fn normal(&self) -> f64 {
        self.forces()[0]
    }

    pub fn lateral_magnitude(&self) -> f64 {
        let f = self.forces();
        f[1].hypot(f[2])
    }
}

/// Noise stream for `(seed, tick)`: independent per tick, reproducible.
pub fn sensor_rng(seed: u64, tick: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tick);
    rng
}

/// Sense `force` at `tick`. Panics if the model step is not positive.
pub fn sense(force: &ContactForce, model: &SensorModel, seed: u64, tick: u64) -> SensorReading {
    assert!(model.step > 0.0, "quantization step must be positive");
    let mut rng = sensor_rng(seed, tick);
    let raw = [force.normal, force.lateral[0], force.lateral[1]];
    let noise = (model.sigma > 0.0).then(|| Normal::new(0.0, model.sigma).expect("finite sigma"));
    let counts = raw.map(|f| {
        let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
        ((f + n) / model.step).round() as i64
    });
    SensorReading {
        counts,
        step: model.step,
        sigma: model.sigma,
        tick,
    }
}
