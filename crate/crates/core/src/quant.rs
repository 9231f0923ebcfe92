//! Bit-exact int8 tensors and the bit-level primitives built on them.
//!
//! All bit operations use two's-complement semantics: bit 7 of an element is
//! its sign bit, and flipping it maps `0` to `-128`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Shaped int8 tensor stored row-major.
///
/// `scale_shift` is bookkeeping only (real value = stored × 2^-scale_shift);
/// arithmetic always runs on the stored integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuantTensor {
    shape: Vec<usize>,
    data: Vec<i8>,
    scale_shift: u32,
}

/// One bit of one tensor element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitAddress {
    pub flat_index: usize,
    /// 0 is the LSB, 7 the sign bit.
    pub bit_pos: u8,
}

impl BitAddress {
    pub fn new(flat_index: usize, bit_pos: u8) -> Self {
        BitAddress {
            flat_index,
            bit_pos,
        }
    }

    /// Address of the `bit`-th bit of a tensor, counting 8 bits per element.
    pub fn from_linear(bit: usize) -> Self {
        BitAddress {
            flat_index: bit / 8,
            bit_pos: (bit % 8) as u8,
        }
    }

    pub fn linear(&self) -> usize {
        self.flat_index * 8 + self.bit_pos as usize
    }
}

impl QuantTensor {
    pub fn new(shape: Vec<usize>, data: Vec<i8>, scale_shift: u32) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!(
                "dimensions must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(QuantTensor {
            shape,
            data,
            scale_shift,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0; n], 0)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn scale_shift(&self) -> u32 {
        self.scale_shift
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn bit_count(&self) -> usize {
        self.data.len() * 8
    }

    pub fn into_data(self) -> Vec<i8> {
        self.data
    }

    /// Raw two's-complement bytes, as stored on disk.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| v as u8).collect()
    }

    pub fn from_bytes(shape: Vec<usize>, bytes: &[u8], scale_shift: u32) -> Result<Self> {
        Self::new(shape, bytes.iter().map(|&b| b as i8).collect(), scale_shift)
    }

    /// Hex SHA-256 of the raw element bytes.
    pub fn checksum(&self) -> String {
        sha256_hex(&self.to_bytes())
    }

    pub fn check_address(&self, addr: BitAddress) -> Result<()> {
        if addr.flat_index >= self.data.len() || addr.bit_pos > 7 {
            return Err(Error::Address {
                flat_index: addr.flat_index,
                bit_pos: addr.bit_pos,
                len: self.data.len(),
            });
        }
        Ok(())
    }

    /// Copy of `self` with one bit inverted.
    pub fn flip_bit(&self, addr: BitAddress) -> Result<QuantTensor> {
        let mut out = self.clone();
        out.flip_bit_in_place(addr)?;
        Ok(out)
    }

    pub fn flip_bit_in_place(&mut self, addr: BitAddress) -> Result<()> {
        self.check_address(addr)?;
        let v = &mut self.data[addr.flat_index];
        *v = ((*v as u8) ^ (1u8 << addr.bit_pos)) as i8;
        Ok(())
    }
}

/// Shifts `acc` right arithmetically and saturates into int8.
pub fn truncate_requantize(acc: i32, shift: u32) -> i8 {
    debug_assert!(shift <= 31);
    (acc >> shift.min(31)).clamp(i8::MIN as i32, i8::MAX as i32) as i8
}

/// Number of differing bits between two equally shaped tensors, and the
/// total number of bits compared.
pub fn count_bit_mismatches(a: &QuantTensor, b: &QuantTensor) -> Result<(u64, u64)> {
    if a.shape != b.shape {
        return Err(Error::Comparison(format!(
            "shape {:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    let mismatched = mismatched_bits(&a.data, &b.data);
    Ok((mismatched, 8 * a.data.len() as u64))
}

pub(crate) fn mismatched_bits(a: &[i8], b: &[i8]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| ((x as u8) ^ (y as u8)).count_ones() as u64)
        .sum()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
