//! Counter-based random substreams.
//!
//! Every random quantity in a campaign comes from a ChaCha8 stream keyed by
//! `(master seed, stream id)` and positioned at a replicate index, so a
//! replicate's draws do not depend on which worker runs it or on which
//! designs are being compared.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Patient outcome uniforms.
pub const OUTCOME_STREAM: u64 = 1;
/// Random scenario noise.
pub const SCENARIO_STREAM: u64 = 2;
/// Scenario draws used to calibrate the generator.
pub const CALIBRATION_STREAM: u64 = 3;

pub fn substream(master: u64, stream_id: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&stream_id.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// One uniform per `(dose, patient slot)`. The `k`-th patient treated at a
/// dose is toxic iff that slot's uniform falls below the dose's true
/// probability, so every design sees the same patient at the same slot.
#[derive(Clone, Debug)]
pub struct PatientOutcomes {
    slots: usize,
    uniforms: Vec<f64>,
}

impl PatientOutcomes {
    pub fn draw<R: Rng>(rng: &mut R, num_doses: usize, slots: usize) -> Self {
        let uniforms = (0..num_doses * slots).map(|_| rng.random::<f64>()).collect();
        PatientOutcomes { slots, uniforms }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn uniform(&self, dose: usize, slot: usize) -> f64 {
        assert!(slot < self.slots, "slot {slot} beyond {}", self.slots);
        self.uniforms[dose * self.slots + slot]
    }

    pub fn is_toxic(&self, dose: usize, slot: usize, prob: f64) -> bool {
        self.uniform(dose, slot) < prob
    }
}
