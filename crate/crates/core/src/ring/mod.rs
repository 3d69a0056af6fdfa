//! Exact RNS arithmetic in `Z_Q[X]/(X^N + 1)`.

mod element;
mod modulus;
mod ntt;
mod params;
mod prime;
mod sampler;

pub use element::{Direction, Representation, RingElement};
pub use modulus::{Modulus, MAX_MODULUS_BITS};
pub use ntt::NttTable;
pub use params::{RingContext, RingParams};
pub use prime::{find_ntt_primes, is_prime, primitive_root_2n, SearchDirection};
pub(crate) use sampler::uniform;
pub use sampler::{gaussian_coeffs, ternary_coeffs, DiscreteGaussian, SampleKind, TAIL_CUT};
