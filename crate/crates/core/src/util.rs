//! Seeding and summation helpers shared by the solvers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates derived seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for sub-stream `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix(mix(base) ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `count` dense vectors of length `dim`, where `fill(i, out)`
/// adds the i-th vector into `out`.
pub fn pairwise_vec_sum<F>(count: usize, dim: usize, fill: &F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]),
{
    fn rec<F: Fn(usize, &mut [f64])>(lo: usize, hi: usize, dim: usize, fill: &F) -> Vec<f64> {
        const BLOCK: usize = 8;
        if hi - lo <= BLOCK {
            let mut out = vec![0.0; dim];
            for i in lo..hi {
                fill(i, &mut out);
            }
            return out;
        }
        let mid = lo + (hi - lo) / 2;
        let mut left = rec(lo, mid, dim, fill);
        let right = rec(mid, hi, dim, fill);
        for (a, b) in left.iter_mut().zip(&right) {
            *a += b;
        }
        left
    }
    rec(0, count, dim, fill)
}

/// Reduces already-summed vectors pairwise, in slice order.
pub fn pairwise_reduce(parts: &[Vec<f64>], dim: usize) -> Vec<f64> {
    match parts.len() {
        0 => vec![0.0; dim],
        1 => parts[0].clone(),
        n => {
            let mid = n / 2;
            let mut left = pairwise_reduce(&parts[..mid], dim);
            let right = pairwise_reduce(&parts[mid..], dim);
            for (a, b) in left.iter_mut().zip(&right) {
                *a += b;
            }
            left
        }
    }
}

pub(crate) fn thread_pool(workers: usize) -> crate::Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(crate::Error::invalid("worker count must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| crate::Error::invalid(format!("cannot build worker pool: {e}")))
}
