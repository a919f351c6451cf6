use thiserror::Error;

/// Bit matrix of phase codes plus the matching noise mask.
///
/// Each row holds `2 * angular` bits: for angular sample `a`, bit `2a` is the
/// real-part sign bit and bit `2a + 1` the imaginary-part sign bit. Both bits
/// of a sample always share one noise flag.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IrisTemplate {
    rows: usize,
    angular: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    noise: Vec<u64>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateFormatError {
    #[error("bad template magic")]
    BadMagic,
    #[error("unsupported template version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported bit order tag {0:#04x}")]
    UnsupportedBitOrder(u8),
    #[error("template has zero rows or angular samples")]
    EmptyShape,
    #[error("template data truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("noise flags of the two bits of a sample disagree at row {row}, sample {sample}")]
    InconsistentNoise { row: usize, sample: usize },
}

pub(crate) const MAGIC: &[u8; 4] = b"IRTM";
pub(crate) const VERSION: u8 = 1;
pub(crate) const BIT_ORDER_MSB_FIRST: u8 = b'M';
const HEADER_LEN: usize = 4 + 1 + 4 + 4 + 1;

impl IrisTemplate {
    /// All-zero template with no noise.
    pub fn zeros(rows: usize, angular: usize) -> Self {
        assert!(rows > 0 && angular > 0, "template shape must be non-empty");
        let words_per_row = (2 * angular).div_ceil(64);
        Self {
            rows,
            angular,
            words_per_row,
            bits: vec![0; rows * words_per_row],
            noise: vec![0; rows * words_per_row],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Angular samples per row; each contributes two bits.
    pub fn angular(&self) -> usize {
        self.angular
    }

    pub fn bits_per_row(&self) -> usize {
        2 * self.angular
    }

    /// Total bit count `N`.
    pub fn len_bits(&self) -> usize {
        self.rows * self.bits_per_row()
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn row_bits(&self, r: usize) -> &[u64] {
        &self.bits[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    pub fn row_noise(&self, r: usize) -> &[u64] {
        &self.noise[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    #[inline]
    pub fn bit(&self, r: usize, c: usize) -> bool {
        debug_assert!(c < self.bits_per_row());
        (self.bits[r * self.words_per_row + c / 64] >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn noise(&self, r: usize, c: usize) -> bool {
        debug_assert!(c < self.bits_per_row());
        (self.noise[r * self.words_per_row + c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn set_bit(&mut self, r: usize, c: usize, v: bool) {
        assert!(c < self.bits_per_row());
        set(&mut self.bits[r * self.words_per_row + c / 64], c % 64, v);
    }

    /// Sets the noise flag of angular sample `a` (both of its bits).
    pub fn set_sample_noise(&mut self, r: usize, a: usize, v: bool) {
        assert!(a < self.angular);
        let row = &mut self.noise[r * self.words_per_row..(r + 1) * self.words_per_row];
        set(&mut row[(2 * a) / 64], (2 * a) % 64, v);
        set(&mut row[(2 * a + 1) / 64], (2 * a + 1) % 64, v);
    }

    /// Sets a single noise bit. Used by tests and tools that build masks
    /// bit-by-bit; [`IrisTemplate::from_serialized`] still requires per-sample
    /// agreement.
    pub fn set_noise_bit(&mut self, r: usize, c: usize, v: bool) {
        assert!(c < self.bits_per_row());
        set(&mut self.noise[r * self.words_per_row + c / 64], c % 64, v);
    }

    pub fn noise_count(&self) -> usize {
        self.noise.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Circular shift by `k` angular samples: sample `j` of the result is
    /// sample `j - k` of `self`. Noise moves with the bits.
    pub fn rotate(&self, k: isize) -> Self {
        let a = self.angular as isize;
        let mut out = Self::zeros(self.rows, self.angular);
        for r in 0..self.rows {
            for j in 0..self.angular {
                let src = (j as isize - k).rem_euclid(a) as usize;
                for b in 0..2 {
                    out.set_bit(r, 2 * j + b, self.bit(r, 2 * src + b));
                    out.set_noise_bit(r, 2 * j + b, self.noise(r, 2 * src + b));
                }
            }
        }
        out
    }

    /// Packs the template: magic `IRTM`, version byte, `R` and `A` as
    /// big-endian `u32`, bit-order tag `M`, then the bit matrix and the noise
    /// matrix, each row-major and packed most-significant-bit first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len_bits();
        let mut out = Vec::with_capacity(HEADER_LEN + 2 * n.div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.rows as u32).to_be_bytes());
        out.extend_from_slice(&(self.angular as u32).to_be_bytes());
        out.push(BIT_ORDER_MSB_FIRST);
        for plane in [false, true] {
            let mut packed = vec![0u8; n.div_ceil(8)];
            let mut k = 0;
            for r in 0..self.rows {
                for c in 0..self.bits_per_row() {
                    let v = if plane { self.noise(r, c) } else { self.bit(r, c) };
                    if v {
                        packed[k / 8] |= 0x80 >> (k % 8);
                    }
                    k += 1;
                }
            }
            out.extend_from_slice(&packed);
        }
        out
    }

    pub fn from_serialized(bytes: &[u8]) -> Result<Self, TemplateFormatError> {
        if bytes.len() < HEADER_LEN {
            return Err(TemplateFormatError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
        }
        if &bytes[..4] != MAGIC {
            return Err(TemplateFormatError::BadMagic);
        }
        if bytes[4] != VERSION {
            return Err(TemplateFormatError::UnsupportedVersion(bytes[4]));
        }
        let rows = u32::from_be_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let angular = u32::from_be_bytes(bytes[9..13].try_into().unwrap()) as usize;
        if bytes[13] != BIT_ORDER_MSB_FIRST {
            return Err(TemplateFormatError::UnsupportedBitOrder(bytes[13]));
        }
        if rows == 0 || angular == 0 {
            return Err(TemplateFormatError::EmptyShape);
        }
        let n = rows * 2 * angular;
        let plane_len = n.div_ceil(8);
        let expected = HEADER_LEN + 2 * plane_len;
        if bytes.len() < expected {
            return Err(TemplateFormatError::Truncated { expected, actual: bytes.len() });
        }
        let mut t = Self::zeros(rows, angular);
        let bit_plane = &bytes[HEADER_LEN..HEADER_LEN + plane_len];
        let noise_plane = &bytes[HEADER_LEN + plane_len..expected];
        let read = |plane: &[u8], k: usize| plane[k / 8] & (0x80 >> (k % 8)) != 0;
        let bpr = 2 * angular;
        for r in 0..rows {
            for c in 0..bpr {
                let k = r * bpr + c;
                t.set_bit(r, c, read(bit_plane, k));
                t.set_noise_bit(r, c, read(noise_plane, k));
            }
            for a in 0..angular {
                if t.noise(r, 2 * a) != t.noise(r, 2 * a + 1) {
                    return Err(TemplateFormatError::InconsistentNoise { row: r, sample: a });
                }
            }
        }
        Ok(t)
    }
}

#[inline]
fn set(word: &mut u64, bit: usize, v: bool) {
    if v {
        *word |= 1 << bit;
    } else {
        *word &= !(1 << bit);
    }
}

impl std::fmt::Debug for IrisTemplate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IrisTemplate")
            .field("rows", &self.rows)
            .field("angular", &self.angular)
            .field("noise_bits", &self.noise_count())
            .finish()
    }
}
