//! Numerical laboratory for non-uniformly expanding maps of the torus and
//! the thermodynamic formalism of their symbolic models.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coding;
pub mod hyperbolic;
pub mod orbit;
pub mod sft;
pub mod torus;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ChaCha8 keyed by `seed`, positioned on stream `stream`. Trial `i` of any
/// randomized computation draws from stream `i`, so results do not depend on
/// scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
