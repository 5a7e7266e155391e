//! Seeded random streams.
//!
//! Every random quantity comes from a ChaCha20 stream. A trial in a sweep is
//! identified by `(master_seed, sweep_index, repetition)`; [`trial_seed`]
//! mixes the triple into one 64-bit seed and [`stream`] turns a seed plus a
//! stream id into an independent generator. ChaCha20 is counter based, so a
//! trial's draws do not depend on which worker runs it or in which order.
//!
//! Stream ids used inside a trial are listed in [`Stream`].

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

pub use rand_chacha::ChaCha20Rng as Rng;
pub use rand_core::RngCore;

/// Sub-streams of a single trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Features, tasks, training data, new task and its data, in that order.
    Instance = 0,
    /// Initial point of the factorized optimizer.
    OptimizerInit = 1,
}

const fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for repetition `rep` at sweep point `sweep_index`:
/// `splitmix64(splitmix64(master ⊕ splitmix64(sweep_index)) ⊕ rep)`.
pub const fn trial_seed(master_seed: u64, sweep_index: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(master_seed ^ splitmix64(sweep_index)) ^ rep)
}

/// ChaCha20 generator keyed by `seed` (little-endian in the first 8 key
/// bytes) positioned at the start of stream `stream_id`.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream_id);
    rng
}

pub fn trial_stream(seed: u64, which: Stream) -> ChaCha20Rng {
    stream(seed, which as u64)
}

/// Uniform on `(0, 1]` with 53 random bits.
#[inline]
fn unit_open_closed<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box-Muller on two uniforms, evaluated with `libm` so the bits do not
/// depend on which float backend other crates enable.
#[inline]
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = unit_open_closed(rng);
    let u2 = unit_open_closed(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// Uniform index in `0..n` (`n ≥ 1`), unbiased by rejection.
pub fn uniform_index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n) as usize;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, 0).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(stream(7, 0).next_u64(), stream(7, 1).next_u64());
        assert_ne!(stream(7, 0).next_u64(), stream(8, 0).next_u64());
    }

    #[test]
    fn trial_seeds_differ() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..20 {
            for r in 0..50 {
                assert!(seen.insert(trial_seed(42, s, r)));
            }
        }
    }

    #[test]
    fn normal_moments() {
        let mut rng = stream(2, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| standard_normal(&mut rng)).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n - mean * mean;
        let kurt = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01 && (var - 1.0).abs() < 0.02 && (kurt - 3.0).abs() < 0.1);
    }

    #[test]
    fn uniform_index_in_range() {
        let mut rng = stream(1, 0);
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            counts[uniform_index(&mut rng, 3)] += 1;
        }
        assert!(counts.iter().all(|&c| c > 900));
    }
}
