//! Small GF(2) helpers shared by the code tables and classical decode logic.

/// Parity of the set bits of `x`.
#[inline]
pub fn parity64(x: u64) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Parity of `a & b` interpreted as a GF(2) inner product of bit vectors.
#[inline]
pub fn dot_f2(a: u64, b: u64) -> u8 {
    parity64(a & b)
}

/// Rank of a GF(2) matrix whose rows are bit masks.
pub fn rank_f2(rows: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    for &row in rows {
        let mut v = row;
        for &b in &basis {
            let pivot = 1u64 << (63 - b.leading_zeros());
            if v & pivot != 0 {
                v ^= b;
            }
        }
        if v != 0 {
            basis.push(v);
        }
    }
    basis.len()
}

/// Is `v` in the GF(2) row span of `rows`?
pub fn in_span_f2(rows: &[u64], v: u64) -> bool {
    let mut all: Vec<u64> = rows.to_vec();
    let r = rank_f2(&all);
    all.push(v);
    rank_f2(&all) == r
}


/// Parity-check masks of the [7,4,3] Hamming code over line indices 0..6:
/// mask k selects the positions whose 1-indexed binary expansion has bit k.
pub const HAMMING_MASKS: [u64; 3] = [0b1010101, 0b1100110, 0b1111000];

/// Syndrome of a 7-bit word as the error position: 0 if the word is a
/// codeword, else π ∈ 1..=7 meaning the error sits on line π − 1.
pub fn hamming_position(y: u64) -> usize {
    let s1 = parity64(y & HAMMING_MASKS[0]) as usize;
    let s2 = parity64(y & HAMMING_MASKS[1]) as usize;
    let s3 = parity64(y & HAMMING_MASKS[2]) as usize;
    s1 + 2 * s2 + 4 * s3
}

/// Verification acceptance: the word is a Hamming codeword of even parity.
pub fn hamming_accept(y: u64) -> bool {
    hamming_position(y) == 0 && parity64(y & 0x7f) == 0
}

/// Logical bit carried by a (possibly one-bit-corrupted) readout word:
/// correct the indicated position, then take the parity.
pub fn hamming_logical(y: u64) -> u8 {
    parity64(y & 0x7f) ^ u8::from(hamming_position(y) != 0)
}
