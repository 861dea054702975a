use std::sync::Mutex;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use uuid::Uuid;

/// Source of identifiers and schedule seeds.
pub trait Entropy: Send + Sync {
    /// A random (version 4) UUID.
    fn uuid(&self) -> Uuid;
    fn seed(&self) -> u64;
}

/// Operating-system randomness.
#[derive(Debug, Default, Clone, Copy)]
pub struct OsEntropy;

impl Entropy for OsEntropy {
    fn uuid(&self) -> Uuid {
        Uuid::new_v4()
    }

    fn seed(&self) -> u64 {
        rand::rng().next_u64()
    }
}

/// Reproducible identifiers for tests and golden files.
#[derive(Debug)]
pub struct SeededEntropy {
    rng: Mutex<ChaCha20Rng>,
}

impl SeededEntropy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Mutex::new(ChaCha20Rng::seed_from_u64(seed)),
        }
    }
}

impl Entropy for SeededEntropy {
    fn uuid(&self) -> Uuid {
        let mut bytes = [0u8; 16];
        self.rng.lock().unwrap().fill_bytes(&mut bytes);
        uuid::Builder::from_random_bytes(bytes).into_uuid()
    }

    fn seed(&self) -> u64 {
        self.rng.lock().unwrap().next_u64()
    }
}
