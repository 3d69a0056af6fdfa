//! Leveled approximate homomorphic encryption over real slots.

mod ciphertext;
mod encoding;
mod evaluator;
mod keys;
pub mod noise;
mod params;
mod wire;

pub use ciphertext::Ciphertext;
pub use encoding::Plaintext;
pub use evaluator::Evaluator;
pub use keys::{EvaluationKey, KeySet, PublicKey, SecretKey};
pub use params::{CkksContext, CkksParams, DEFAULT_SIGMA, MIN_LOG2_SCALE};
pub(crate) use wire::{put_u64s, Reader};
pub use wire::{CIPHERTEXT_MAGIC, CIPHERTEXT_VERSION};
