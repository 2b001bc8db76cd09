//! Labelled, splittable random streams.
//!
//! Generator: SplitMix64 (Steele, Lea, Flood 2014). Every quantity below is
//! specified exactly so that other implementations can reproduce the streams
//! bit for bit.
//!
//! * label hash: FNV-1a 64 over the UTF-8 bytes of the label
//!   (offset `0xcbf29ce484222325`, prime `0x100000001b3`).
//! * initial state: `mix64(seed ^ fnv1a(label))`.
//! * step: `state += 0x9e3779b97f4a7c15; return mix64(state)`.
//! * `mix64(z)`: `z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;`
//!   `z = (z ^ (z >> 27)) * 0x94d049bb133111eb; z ^ (z >> 31)` (wrapping).
//! * `next_f64`: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`.
//! * `below(n)`: `(next_u64 as u128 * n) >> 64`.
//! * `normal`: Box-Muller cosine branch, `u1 = 1 - next_f64`, `u2 = next_f64`,
//!   `sqrt(-2 ln u1) * cos(2 pi u2)`; two draws per variate, nothing cached.
//! * `shuffle`: Fisher-Yates from the last index down, `j = below(i + 1)`.
//! * `derive(child)`: a fresh stream with the same seed and label `"{label}/{child}"`.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    label: String,
    state: u64,
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let state = mix64(seed ^ fnv1a(&label));
        Self { seed, label, state }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Independent child stream; does not advance `self`.
    pub fn derive(&self, child: &str) -> RngStream {
        RngStream::new(self.seed, format!("{}/{}", self.label, child))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}
