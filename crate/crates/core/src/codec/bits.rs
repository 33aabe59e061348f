use crate::error::CodecError;

/// MSB-first bit writer.
#[derive(Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    used: u8,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_bit(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.used += 1;
        self.bits += 1;
        if self.used == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.used = 0;
        }
    }

    pub fn put_bits(&mut self, value: u64, count: u32) {
        for i in (0..count).rev() {
            self.put_bit(value >> i & 1 == 1);
        }
    }

    /// Unsigned Exp-Golomb.
    pub fn put_ue(&mut self, value: u64) {
        let v = value + 1;
        let len = 64 - v.leading_zeros();
        self.put_bits(0, len - 1);
        self.put_bits(v, len);
    }

    /// Signed Exp-Golomb: 0, 1, -1, 2, -2, ...
    pub fn put_se(&mut self, value: i64) {
        let mapped = if value > 0 {
            2 * value as u64 - 1
        } else {
            2 * value.unsigned_abs()
        };
        self.put_ue(mapped);
    }

    /// Flushes, padding the last byte with zeros.
    pub fn finish(mut self) -> (Vec<u8>, u64) {
        let bits = self.bits;
        if self.used > 0 {
            self.bytes.push(self.acc << (8 - self.used));
        }
        (self.bytes, bits)
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
    limit: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], limit_bits: u64) -> Self {
        Self {
            bytes,
            pos: 0,
            limit: limit_bits.min(bytes.len() as u64 * 8),
        }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn bit(&mut self) -> Result<bool, CodecError> {
        if self.pos >= self.limit {
            return Err(CodecError::Malformed("unexpected end of payload".into()));
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let b = byte >> (7 - self.pos % 8) & 1 == 1;
        self.pos += 1;
        Ok(b)
    }

    pub fn bits(&mut self, count: u32) -> Result<u64, CodecError> {
        let mut v = 0u64;
        for _ in 0..count {
            v = (v << 1) | self.bit()? as u64;
        }
        Ok(v)
    }

    pub fn ue(&mut self) -> Result<u64, CodecError> {
        let mut zeros = 0u32;
        while !self.bit()? {
            zeros += 1;
            if zeros > 62 {
                return Err(CodecError::Malformed("Exp-Golomb prefix too long".into()));
            }
        }
        let rest = self.bits(zeros)?;
        Ok(((1u64 << zeros) | rest) - 1)
    }

    pub fn se(&mut self) -> Result<i64, CodecError> {
        let m = self.ue()?;
        Ok(if m % 2 == 1 {
            m.div_ceil(2) as i64
        } else {
            -((m / 2) as i64)
        })
    }
}
