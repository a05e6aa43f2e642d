//! Splitting file bytes into blob-sized chunks: fixed-size, or content-defined
//! with a Rabin rolling fingerprint over a sliding window.

use super::FileError;

/// A block-splitting function. Returns chunk end offsets; the last one equals
/// `data.len()` (an empty input yields one empty chunk).
pub trait Chunking {
    fn boundaries(&self, data: &[u8]) -> Vec<usize>;

    fn chunks<'a>(&self, data: &'a [u8]) -> Vec<&'a [u8]> {
        let mut start = 0;
        self.boundaries(data)
            .into_iter()
            .map(|end| {
                let chunk = &data[start..end];
                start = end;
                chunk
            })
            .collect()
    }
}

/// Irreducible over GF(2), degree 53.
pub const DEFAULT_POLYNOMIAL: u64 = 0x3DA3358B4DC173;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RabinParams {
    pub polynomial: u64,
    pub window: usize,
    pub min: usize,
    /// Expected chunk size; must be a power of two, giving the boundary mask.
    pub avg: usize,
    pub max: usize,
}

impl Default for RabinParams {
    fn default() -> Self {
        RabinParams { polynomial: DEFAULT_POLYNOMIAL, window: 48, min: 2 << 10, avg: 8 << 10, max: 64 << 10 }
    }
}

#[derive(Debug, Clone)]
pub enum Chunker {
    Fixed { size: usize },
    Rabin(Rabin),
}

impl Chunker {
    pub fn fixed(size: usize) -> Result<Self, FileError> {
        if size == 0 {
            return Err(FileError::Param("fixed chunk size must be positive".into()));
        }
        Ok(Chunker::Fixed { size })
    }

    pub fn rabin(params: RabinParams) -> Result<Self, FileError> {
        Rabin::new(params).map(Chunker::Rabin)
    }
}

impl Default for Chunker {
    fn default() -> Self {
        Chunker::Rabin(Rabin::new(RabinParams::default()).expect("default params are valid"))
    }
}

impl Chunking for Chunker {
    fn boundaries(&self, data: &[u8]) -> Vec<usize> {
        match self {
            Chunker::Fixed { size } => {
                let mut out: Vec<usize> = (1..=data.len() / size).map(|i| i * size).collect();
                if out.last() != Some(&data.len()) {
                    out.push(data.len());
                }
                out
            }
            Chunker::Rabin(r) => r.boundaries(data),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rabin {
    params: RabinParams,
    mask: u64,
    shift: u32,
    out_table: Box<[u64; 256]>,
    mod_table: Box<[u64; 256]>,
}

fn degree(p: u64) -> u32 {
    63 - p.leading_zeros()
}

fn poly_mod(mut x: u64, p: u64) -> u64 {
    let dp = degree(p);
    while x != 0 && degree(x) >= dp {
        x ^= p << (degree(x) - dp);
    }
    x
}

impl Rabin {
    pub fn new(params: RabinParams) -> Result<Self, FileError> {
        let bad = |m: &str| Err(FileError::Param(m.to_string()));
        let p = params.polynomial;
        if p == 0 || !(9..=55).contains(&degree(p)) {
            return bad("rabin polynomial degree must be between 9 and 55");
        }
        if params.window == 0 || params.window > params.min {
            return bad("rabin window must be positive and no larger than min");
        }
        if !(params.min < params.avg && params.avg < params.max) {
            return bad("rabin sizes need min < avg < max");
        }
        if !params.avg.is_power_of_two() {
            return bad("rabin avg must be a power of two");
        }
        let deg = degree(p);
        if params.avg as u64 > 1 << deg {
            return bad("rabin avg exceeds the fingerprint width");
        }
        let shift = deg - 8;
        let mut mod_table = Box::new([0u64; 256]);
        for (b, slot) in mod_table.iter_mut().enumerate() {
            let high = (b as u64) << deg;
            *slot = poly_mod(high, p) | high;
        }
        let mut out_table = Box::new([0u64; 256]);
        for (b, slot) in out_table.iter_mut().enumerate() {
            let mut h = poly_mod(b as u64, p);
            for _ in 1..params.window {
                h = poly_mod(h << 8, p);
            }
            *slot = h;
        }
        Ok(Rabin { params, mask: params.avg as u64 - 1, shift, out_table, mod_table })
    }

    pub fn params(&self) -> &RabinParams {
        &self.params
    }

    #[inline]
    fn append(&self, digest: u64, b: u8) -> u64 {
        let index = (digest >> self.shift) as usize;
        ((digest << 8) | u64::from(b)) ^ self.mod_table[index]
    }

    pub fn boundaries(&self, data: &[u8]) -> Vec<usize> {
        let RabinParams { window, min, max, .. } = self.params;
        let mut out = Vec::new();
        let mut start = 0;
        while data.len() - start > min {
            let limit = (start + max).min(data.len());
            // the fingerprint depends only on the last `window` bytes, so
            // priming starts just before the first eligible cut
            let mut digest = 0u64;
            let mut pos = start + min - window;
            for &b in &data[pos..start + min] {
                digest = self.append(digest, b);
            }
            pos = start + min;
            let mut cut = limit;
            loop {
                if digest & self.mask == self.mask {
                    cut = pos;
                    break;
                }
                if pos >= limit {
                    break;
                }
                digest ^= self.out_table[data[pos - window] as usize];
                digest = self.append(digest, data[pos]);
                pos += 1;
            }
            out.push(cut);
            start = cut;
        }
        if out.last() != Some(&data.len()) {
            out.push(data.len());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random(len: usize, seed: u64) -> Vec<u8> {
        let mut v = vec![0; len];
        ChaCha20Rng::seed_from_u64(seed).fill_bytes(&mut v);
        v
    }

    #[test]
    fn fixed_boundaries() {
        let c = Chunker::fixed(4).unwrap();
        assert_eq!(c.boundaries(b""), vec![0]);
        assert_eq!(c.boundaries(b"abcdefgh"), vec![4, 8]);
        assert_eq!(c.boundaries(b"abcdefghi"), vec![4, 8, 9]);
        assert!(matches!(Chunker::fixed(0), Err(FileError::Param(_))));
    }

    #[test]
    fn degenerate_rabin_params() {
        let d = RabinParams::default();
        for p in [
            RabinParams { min: 8192, ..d },
            RabinParams { avg: 6000, ..d },
            RabinParams { max: 8192, ..d },
            RabinParams { window: 0, ..d },
            RabinParams { polynomial: 1, ..d },
        ] {
            assert!(matches!(Chunker::rabin(p), Err(FileError::Param(_))), "{p:?}");
        }
    }

    #[test]
    fn rolling_window_matches_direct_fingerprint() {
        let r = Rabin::new(RabinParams::default()).unwrap();
        let data = random(200, 1);
        let mut rolled = 0;
        for i in 0..data.len() {
            if i >= 48 {
                rolled ^= r.out_table[data[i - 48] as usize];
            }
            rolled = r.append(rolled, data[i]);
            let direct = data[i.saturating_sub(47)..=i].iter().fold(0, |d, &b| r.append(d, b));
            assert_eq!(rolled, direct, "at {i}");
        }
    }

    #[test]
    fn short_input_is_one_chunk_and_sizes_clamped() {
        let c = Chunker::default();
        assert_eq!(c.boundaries(&random(1000, 2)), vec![1000]);
        let data = random(1 << 20, 3);
        let chunks = c.chunks(&data);
        assert_eq!(chunks.concat(), data);
        for chunk in &chunks[..chunks.len() - 1] {
            assert!((2048..=65536).contains(&chunk.len()));
        }
        // zeros never hit the mask, so they cut at max
        let zeros = vec![0u8; 200_000];
        assert_eq!(c.boundaries(&zeros), vec![65536, 131072, 196608, 200_000]);
    }

    #[test]
    fn chunk_count_for_random_megabytes() {
        let c = Chunker::default();
        let mut total = 0;
        for seed in 0..20 {
            let n = c.boundaries(&random(1 << 20, 100 + seed)).len();
            assert!((64..=256).contains(&n), "seed {seed}: {n}");
            total += n;
        }
        let mean = total as f64 / 20.0;
        assert!((96.0..=160.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn insertion_is_local() {
        let c = Chunker::default();
        for seed in 0..10 {
            let data = random(1 << 20, 200 + seed);
            let mut edited = data.clone();
            edited.insert(500 << 10, 0x5a);
            let before = c.boundaries(&data);
            let after = c.boundaries(&edited);
            let prefix = |b: &[usize]| b.iter().copied().filter(|&x| x < 499 << 10).collect::<Vec<_>>();
            assert_eq!(prefix(&before), prefix(&after));
            let old: std::collections::HashSet<&[u8]> = c.chunks(&data).into_iter().collect();
            let changed = c.chunks(&edited).into_iter().filter(|ch| !old.contains(ch)).count();
            assert!(changed <= 3, "seed {seed}: {changed} changed chunks");
        }
    }
}
