//! Deterministic parameter initialization.
//!
//! Each tensor draws from its own ChaCha stream keyed by `(seed, name)`, so
//! a parameter's initial value does not depend on which other parameters
//! exist in the model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Float;
use crate::tensor::Tensor;

/// FNV-1a over the name, mixed with the seed through SplitMix64.
pub fn stream_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, name))
}

/// `U(-√(6/fan_in), √(6/fan_in))`, marked trainable.
pub fn fan_in_uniform<T: Float>(shape: &[usize], fan_in: usize, seed: u64, name: &str) -> Tensor<T> {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    let mut rng = rng_for(seed, name);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.gen_range(-bound..bound))).collect();
    Tensor::from_vec(shape, data).expect("initializer shape").with_grad()
}

pub fn constant<T: Float>(shape: &[usize], value: f64, trainable: bool) -> Tensor<T> {
    let mut t = Tensor::full(shape, T::of(value));
    t.requires_grad = trainable;
    t
}
