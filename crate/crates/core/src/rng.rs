//! Counter-based random substreams.
//!
//! A stream is keyed by `SHA-256(master_seed, site_label)` and selects the
//! ChaCha stream id `trial_index`, so the draws for a given
//! `(seed, index, label)` never depend on which thread runs the trial or in
//! what order trials are scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"qkd-lab/rng/v1";

/// A deterministic random stream owned by one trial.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn derive(master_seed: u64, trial_index: u64, site_label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(master_seed.to_le_bytes());
        hasher.update((site_label.len() as u64).to_le_bytes());
        hasher.update(site_label.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(trial_index);
        Self { inner }
    }
}

/// Derive the substream for `(master_seed, trial_index, site_label)`.
pub fn derive_trial_rng(master_seed: u64, trial_index: u64, site_label: &str) -> RngStream {
    RngStream::derive(master_seed, trial_index, site_label)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Factory for the per-trial streams of one experiment.
///
/// Operations that run many independent trials take a `&TrialStreams` and
/// draw `stream(i, label)` for trial `i`; they may fan out over rayon and
/// still produce identical results for any thread count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialStreams {
    master_seed: u64,
}

impl TrialStreams {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&self, trial_index: u64, site_label: &str) -> RngStream {
        RngStream::derive(self.master_seed, trial_index, site_label)
    }

    /// A factory whose streams are disjoint from this one's, for nesting
    /// experiments (e.g. one grid point of a sweep).
    pub fn child(&self, label: &str, index: u64) -> TrialStreams {
        let mut rng = self.stream(index, label);
        TrialStreams::new(rng.next_u64())
    }
}
