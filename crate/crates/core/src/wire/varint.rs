//! LEB128 unsigned varints and zigzag mapping for signed integers.

use thiserror::Error;

/// Longest encoding of a `u64`.
pub const MAX_VARINT_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum VarintError {
    #[error("input ended inside a varint")]
    Truncated,
    #[error("varint longer than 10 bytes or overflowing 64 bits")]
    MalformedVarint,
}

pub fn write_varint(out: &mut Vec<u8>, mut n: u64) {
    while n >= 0x80 {
        out.push((n as u8) | 0x80);
        n >>= 7;
    }
    out.push(n as u8);
}

/// Decodes a varint from the front of `bytes`, returning it and the number
/// of bytes consumed.
pub fn read_varint(bytes: &[u8]) -> Result<(u64, usize), VarintError> {
    let mut value = 0u64;
    for (i, &byte) in bytes.iter().enumerate() {
        if i == MAX_VARINT_LEN {
            return Err(VarintError::MalformedVarint);
        }
        let low = (byte & 0x7f) as u64;
        // The tenth byte may only carry the top bit of a u64.
        if i == MAX_VARINT_LEN - 1 && low > 1 {
            return Err(VarintError::MalformedVarint);
        }
        value |= low << (7 * i);
        if byte & 0x80 == 0 {
            return Ok((value, i + 1));
        }
    }
    if bytes.len() >= MAX_VARINT_LEN {
        Err(VarintError::MalformedVarint)
    } else {
        Err(VarintError::Truncated)
    }
}

pub fn zigzag(n: i64) -> u64 {
    ((n << 1) ^ (n >> 63)) as u64
}

pub fn unzigzag(n: u64) -> i64 {
    ((n >> 1) as i64) ^ -((n & 1) as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encoded(n: u64) -> Vec<u8> {
        let mut out = Vec::new();
        write_varint(&mut out, n);
        out
    }

    #[test]
    fn leb128_reference_bytes() {
        assert_eq!(encoded(0), [0x00]);
        assert_eq!(encoded(127), [0x7f]);
        assert_eq!(encoded(300), [0xac, 0x02]);
        assert_eq!(encoded(u64::MAX).len(), MAX_VARINT_LEN);
        assert_eq!(read_varint(&encoded(u64::MAX)), Ok((u64::MAX, 10)));
    }

    #[test]
    fn zigzag_reference_values() {
        assert_eq!(zigzag(0), 0);
        assert_eq!(zigzag(-1), 1);
        assert_eq!(zigzag(1), 2);
        assert_eq!(zigzag(-2), 3);
        assert_eq!(zigzag(i64::MAX), u64::MAX - 1);
        assert_eq!(zigzag(i64::MIN), u64::MAX);
    }

    #[test]
    fn malformed_and_truncated() {
        assert_eq!(read_varint(&[0x80; 11]), Err(VarintError::MalformedVarint));
        assert_eq!(read_varint(&[0x80; 10]), Err(VarintError::MalformedVarint));
        let mut overflow = vec![0xff; 9];
        overflow.push(0x02);
        assert_eq!(read_varint(&overflow), Err(VarintError::MalformedVarint));
        assert_eq!(read_varint(&[0xac]), Err(VarintError::Truncated));
        assert_eq!(read_varint(&[]), Err(VarintError::Truncated));
    }

    #[test]
    fn random_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..100_000 {
            let n: u64 = rng.random::<u64>() >> rng.random_range(0..64);
            assert_eq!(read_varint(&encoded(n)), Ok((n, encoded(n).len())));
        }
    }

    proptest! {
        #[test]
        fn zigzag_inverts(n in any::<i64>()) {
            prop_assert_eq!(unzigzag(zigzag(n)), n);
        }
    }
}
