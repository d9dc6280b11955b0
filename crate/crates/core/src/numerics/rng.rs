//! Counter-based random number generation with explicit substreams.
//!
//! Monte Carlo results must not depend on how work is split across threads,
//! so sampling is built on the philox4x32-10 block cipher (Salmon et al.,
//! "Parallel random numbers: as easy as 1, 2, 3"): the j-th block of a
//! stream is a pure function of `(seed, stream_index, j)`. Standard normal
//! variates come from the Box-Muller transform applied to consecutive
//! uniforms. A [`RandomStream`] is a value; copying it and sampling from the
//! copy replays the same sequence.

/// Name of the underlying generator, recorded in experiment metadata.
pub const GENERATOR_NAME: &str = "philox4x32-10";

/// Name of the uniform-to-normal transform, recorded in experiment metadata.
pub const NORMAL_TRANSFORM: &str = "box-muller";

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// One keyed bijection of the 128-bit counter: 10 rounds, key bumped by the
/// Weyl constants between rounds.
fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Identity of a deterministic random sequence: a 64-bit seed plus a 64-bit
/// substream selector. Identical `(seed, stream_index)` pairs yield identical
/// sample sequences on any platform and under any thread count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        RandomStream { seed, stream_index }
    }

    /// The stream with the same seed and stream index `self.stream_index + offset`.
    /// Used to hand out one independent substream per Monte Carlo sample.
    pub fn offset(&self, offset: u64) -> Self {
        RandomStream {
            seed: self.seed,
            stream_index: self.stream_index.wrapping_add(offset),
        }
    }

    /// Cursor over this stream's sample sequence. Every call starts from the
    /// beginning of the stream.
    pub fn sampler(&self) -> Sampler {
        Sampler {
            key: [self.seed as u32, (self.seed >> 32) as u32],
            stream: [
                self.stream_index as u32,
                (self.stream_index >> 32) as u32,
            ],
            block: 0,
            buf: [0; 4],
            buf_len: 0,
            normal_spare: None,
        }
    }
}

/// Mutable cursor that draws variates from a [`RandomStream`].
#[derive(Debug, Clone)]
pub struct Sampler {
    key: [u32; 2],
    stream: [u32; 2],
    block: u64,
    buf: [u32; 4],
    buf_len: usize,
    normal_spare: Option<f64>,
}

impl Sampler {
    fn next_block(&mut self) {
        let counter = [
            self.block as u32,
            (self.block >> 32) as u32,
            self.stream[0],
            self.stream[1],
        ];
        self.buf = philox4x32_10(counter, self.key);
        self.buf_len = 4;
        self.block = self.block.wrapping_add(1);
    }

    fn next_u32(&mut self) -> u32 {
        if self.buf_len == 0 {
            self.next_block();
        }
        let word = self.buf[4 - self.buf_len];
        self.buf_len -= 1;
        word
    }

    fn next_u64(&mut self) -> u64 {
        let lo = u64::from(self.next_u32());
        let hi = u64::from(self.next_u32());
        lo | (hi << 32)
    }

    /// Uniform variate in `[0, 1)` with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform variate in `(0, 1]`; safe to pass through `ln`.
    fn uniform_open_zero(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform variate in `[lo, hi)` (degenerate intervals return `lo`).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal variate via Box-Muller on consecutive uniforms.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.normal_spare.take() {
            return z;
        }
        let u1 = self.uniform_open_zero();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.normal_spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Draws `n` standard normal variates.
    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}

/// `n` i.i.d. standard normal variates from the given stream.
pub fn sample_standard_normal(stream: RandomStream, n: usize) -> Vec<f64> {
    stream.sampler().normals(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors for philox4x32-10 from the Random123 reference
    // distribution, cross-checked against an independent implementation of
    // the published round function.
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0, 0, 0, 0], [0, 0]),
            [0x6627_E8D5, 0xE169_C58D, 0xBC57_AC4C, 0x9B00_DBD8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408F_276D, 0x41C8_3B0E, 0xA20B_C7C6, 0x6D54_51FD]
        );
        assert_eq!(
            philox4x32_10(
                [0x243F_6A88, 0x85A3_08D3, 0x1319_8A2E, 0x0370_7344],
                [0xA409_3822, 0x299F_31D0]
            ),
            [0xD16C_FE09, 0x94FD_CCEB, 0x5001_E420, 0x2412_6EA1]
        );
    }

    #[test]
    fn counter_layout_matches_reference() {
        // seed 42, stream 7, block 0 -> counter [0,0,7,0], key [42,0].
        let mut s = RandomStream::new(42, 7).sampler();
        let words = [s.next_u32(), s.next_u32(), s.next_u32(), s.next_u32()];
        assert_eq!(
            words,
            [0x67EE_6F2C, 0xE554_10CC, 0x6C7E_CA35, 0x5573_98D3]
        );
    }

    #[test]
    fn identical_streams_replay_identical_sequences() {
        let a = sample_standard_normal(RandomStream::new(123, 5), 1000);
        let b = sample_standard_normal(RandomStream::new(123, 5), 1000);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a = sample_standard_normal(RandomStream::new(123, 5), 16);
        let b = sample_standard_normal(RandomStream::new(123, 6), 16);
        let c = sample_standard_normal(RandomStream::new(124, 5), 16);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_draws_yield_empty_list() {
        assert!(sample_standard_normal(RandomStream::new(1, 0), 0).is_empty());
    }

    // CLT sanity: with n = 1e6 the sample mean sits within 4/sqrt(n) of 0
    // and the sample variance within 1% of 1.
    #[test]
    fn normal_moments_match_clt_bounds() {
        let n = 1_000_000usize;
        let xs = sample_standard_normal(RandomStream::new(1, 0), n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn uniforms_stay_in_unit_interval() {
        let mut s = RandomStream::new(9, 0).sampler();
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
