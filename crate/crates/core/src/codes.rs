//! Cyclic S-sequences (binary Simplex codes) built by the quadratic-residue method.
//!
//! For a prime order `N ≡ 3 (mod 4)` the quadratic residues form a cyclic difference
//! set. Taking its complement (index 0 plus the non-residues) gives a binary row of
//! weight `(N+1)/2` whose circulant `S` satisfies
//!
//! ```text
//! S·Sᵀ = ((N+1)/4)·(I + J)
//! ```
//!
//! with `J` the all-ones matrix. Bit convention used throughout the crate:
//! `bit[0] = 1`, `bit[i] = 1` iff `i` is a quadratic non-residue mod `N`.
//! Row `r` of `S` is the sequence cyclically shifted right by `r`, i.e.
//! `S[r][c] = bit[(c - r) mod N]`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest order accepted by [`generate_s_sequence`].
pub const MAX_ORDER: usize = 1 << 20;

/// Orders at or below this are checked against the full `S·Sᵀ` identity on generation.
pub const FULL_CHECK_LIMIT: usize = 1024;

/// Deterministic trial-division primality test, exact for every `u64` it is fed
/// (the crate only calls it with values ≤ 2³¹).
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// True iff `n` is a prime with `n ≡ 3 (mod 4)`.
pub fn validate_order(n: u64) -> bool {
    n >= 3 && n % 4 == 3 && is_prime(n)
}

/// The set `{ k² mod n : k = 1..(n-1)/2 }` for an odd prime `n`.
pub fn quadratic_residues(n: u64) -> Result<BTreeSet<u64>> {
    if n < 3 || n % 2 == 0 || !is_prime(n) {
        return Err(Error::InvalidOrder(n));
    }
    Ok((1..=(n - 1) / 2).map(|k| (k * k) % n).collect())
}

/// A binary S-sequence of prime order `N = 4m + 3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SSequence {
    bits: Vec<u8>,
}

/// Generates the S-sequence of order `n` and checks it against the S-matrix identity.
pub fn generate_s_sequence(n: usize) -> Result<SSequence> {
    if n > MAX_ORDER || !validate_order(n as u64) {
        return Err(Error::InvalidOrder(n as u64));
    }
    let residues = quadratic_residues(n as u64)?;
    let mut bits = vec![0u8; n];
    for (i, b) in bits.iter_mut().enumerate() {
        *b = u8::from(i == 0 || !residues.contains(&(i as u64)));
    }
    let seq = SSequence { bits };
    seq.self_check()?;
    Ok(seq)
}

impl SSequence {
    /// Wraps caller-provided bits after validating order, alphabet and the S-matrix identity.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        let n = bits.len();
        if !validate_order(n as u64) {
            return Err(Error::InvalidOrder(n as u64));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidSequence("entries must be 0 or 1".into()));
        }
        let seq = SSequence { bits };
        seq.self_check()?;
        Ok(seq)
    }

    pub fn order(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// The sequence cyclically shifted right by `k` (row `k` of the S-matrix).
    pub fn shifted(&self, k: usize) -> SSequence {
        let n = self.order();
        let bits = (0..n).map(|c| self.bits[(c + n - k % n) % n]).collect();
        SSequence { bits }
    }

    /// Entry `S[row][col]` of the circulant S-matrix.
    #[inline]
    pub fn matrix_entry(&self, row: usize, col: usize) -> u8 {
        let n = self.order();
        self.bits[(col + n - row % n) % n]
    }

    /// Periodic autocorrelation `Σᵢ s[i]·s[i+lag]`, which equals every entry of
    /// `S·Sᵀ` on the `lag`-th cyclic diagonal.
    pub fn autocorrelation(&self, lag: usize) -> u64 {
        let n = self.order();
        (0..n)
            .map(|i| (self.bits[i] & self.bits[(i + lag) % n]) as u64)
            .sum()
    }

    /// Full check of `S·Sᵀ = ((N+1)/4)(I+J)` via all `N` cyclic autocorrelation lags.
    pub fn satisfies_identity(&self) -> bool {
        let n = self.order() as u64;
        if (n + 1) % 4 != 0 {
            return false;
        }
        let off = (n + 1) / 4;
        self.autocorrelation(0) == 2 * off
            && (1..self.order()).all(|lag| self.autocorrelation(lag) == off)
    }

    fn self_check(&self) -> Result<()> {
        let n = self.order();
        let expected_weight = (n + 1) / 2;
        if self.weight() != expected_weight {
            return Err(Error::InvalidSequence(format!(
                "weight {} differs from (N+1)/2 = {expected_weight}",
                self.weight()
            )));
        }
        let ok = if n <= FULL_CHECK_LIMIT {
            self.satisfies_identity()
        } else {
            // Spot-check a spread of lags; the full check is quadratic.
            let off = ((n + 1) / 4) as u64;
            let step = (n / 61).max(1);
            (1..n).step_by(step).take(64).all(|lag| self.autocorrelation(lag) == off)
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSequence(
                "circulant does not satisfy S·Sᵀ = ((N+1)/4)(I+J)".into(),
            ))
        }
    }
}

/// Single-line text form `N:bbbb…`, e.g. `7:1001011`.
impl fmt::Display for SSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.order())?;
        for &b in &self.bits {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for SSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (order, bits) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidSequence("expected `N:bits`".into()))?;
        let order: usize = order
            .trim()
            .parse()
            .map_err(|_| Error::InvalidSequence(format!("bad order `{order}`")))?;
        let bits = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(Error::InvalidSequence(format!("unexpected character `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if bits.len() != order {
            return Err(Error::LengthMismatch {
                expected: order,
                actual: bits.len(),
            });
        }
        SSequence::from_bits(bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Every binary vector of length `n` whose circulant meets the identity.
    fn brute_force_s_sequences(n: usize) -> Vec<Vec<u8>> {
        let target_off = ((n + 1) / 4) as i64;
        (0u32..(1 << n))
            .map(|mask| (0..n).map(|i| ((mask >> i) & 1) as u8).collect::<Vec<u8>>())
            .filter(|bits| {
                // dense S·Sᵀ with S[r][c] = bits[(c - r) mod n]
                let s = |r: usize, c: usize| bits[(c + n - r) % n] as i64;
                (0..n).all(|r| {
                    (0..n).all(|q| {
                        let dot: i64 = (0..n).map(|c| s(r, c) * s(q, c)).sum();
                        let want = if r == q { 2 * target_off } else { target_off };
                        dot == want
                    })
                })
            })
            .collect()
    }

    fn is_cyclic_shift(a: &[u8], b: &[u8]) -> bool {
        let n = a.len();
        (0..n).any(|k| (0..n).all(|i| a[i] == b[(i + k) % n]))
    }

    #[test]
    fn order_validation() {
        assert!(validate_order(79));
        assert!(!validate_order(4));
        // 13 is prime but 13 mod 4 = 1
        assert_eq!(13 % 4, 1);
        assert!(!validate_order(13));
        assert!(validate_order(3));
        assert!(!validate_order(15));
        assert!(validate_order(2_147_483_647)); // 2^31 - 1 is prime and ≡ 3 mod 4
    }

    #[test]
    fn residues_small_primes() {
        assert_eq!(quadratic_residues(7).unwrap(), BTreeSet::from([1, 2, 4]));
        assert_eq!(quadratic_residues(3).unwrap(), BTreeSet::from([1]));
        assert_eq!(quadratic_residues(11).unwrap(), BTreeSet::from([1, 3, 4, 5, 9]));
        assert!(matches!(quadratic_residues(9), Err(Error::InvalidOrder(9))));
        assert!(matches!(quadratic_residues(8), Err(Error::InvalidOrder(8))));
    }

    #[test]
    fn order_three_matches_brute_force() {
        let oracle = brute_force_s_sequences(3);
        assert!(!oracle.is_empty());
        let seq = generate_s_sequence(3).unwrap();
        assert_eq!(seq.weight(), 2);
        assert!(is_cyclic_shift(seq.bits(), &[0, 1, 1]));
        assert!(oracle.iter().any(|o| o == seq.bits()));
    }

    #[test]
    fn order_seven_matches_brute_force() {
        let oracle = brute_force_s_sequences(7);
        let seq = generate_s_sequence(7).unwrap();
        assert_eq!(seq.weight(), 4);
        assert!(oracle.iter().any(|o| o == seq.bits()));
        // every oracle solution has weight 4 and all shifts of ours are solutions
        assert!(oracle.iter().all(|o| o.iter().map(|&b| b as usize).sum::<usize>() == 4));
        for k in 0..7 {
            let shifted = seq.shifted(k);
            assert!(oracle.iter().any(|o| o == shifted.bits()));
        }
    }

    #[test]
    fn order_79_weight() {
        let seq = generate_s_sequence(79).unwrap();
        assert_eq!(seq.order(), 79);
        assert_eq!(seq.weight(), 40);
    }

    #[test]
    fn large_order_spot_check() {
        let seq = generate_s_sequence(4099).unwrap();
        assert_eq!(seq.weight(), 2050);
    }

    #[test]
    fn invalid_orders_rejected() {
        assert!(matches!(generate_s_sequence(4), Err(Error::InvalidOrder(4))));
        assert!(matches!(generate_s_sequence(13), Err(Error::InvalidOrder(13))));
        assert!(generate_s_sequence(MAX_ORDER + 3).is_err());
    }

    #[test]
    fn text_format() {
        let seq = generate_s_sequence(7).unwrap();
        assert_eq!(seq.to_string(), "7:1001011");
        assert_eq!("7:1001011".parse::<SSequence>().unwrap(), seq);
        assert!("7:100101".parse::<SSequence>().is_err());
        assert!("7:1111111".parse::<SSequence>().is_err());
        assert!("7:10010x1".parse::<SSequence>().is_err());
    }

    #[test]
    fn corrupted_bits_rejected() {
        let mut bits = generate_s_sequence(11).unwrap().bits().to_vec();
        bits.swap(0, 1);
        assert!(SSequence::from_bits(bits).is_err());
    }

    fn valid_orders_up_to(limit: u64) -> Vec<usize> {
        (3..=limit).filter(|&n| validate_order(n)).map(|n| n as usize).collect()
    }

    proptest! {
        #[test]
        fn residue_set_properties(idx in 0usize..20) {
            let primes: Vec<u64> = (3..200u64).filter(|&n| n % 2 == 1 && is_prime(n)).collect();
            let p = primes[idx % primes.len()];
            let qr = quadratic_residues(p).unwrap();
            prop_assert_eq!(qr.len() as u64, (p - 1) / 2);
            prop_assert!(!qr.contains(&0));
        }

        #[test]
        fn shift_closure(idx in 0usize..64, shift in 0usize..2000) {
            let orders = valid_orders_up_to(400);
            let n = orders[idx % orders.len()];
            let seq = generate_s_sequence(n).unwrap();
            let shifted = seq.shifted(shift);
            prop_assert!(shifted.satisfies_identity());
            prop_assert!(SSequence::from_bits(shifted.bits().to_vec()).is_ok());
        }

        #[test]
        fn rows_and_columns_sum_to_half(idx in 0usize..64) {
            let orders = valid_orders_up_to(400);
            let n = orders[idx % orders.len()];
            let seq = generate_s_sequence(n).unwrap();
            for r in 0..n {
                let row: usize = (0..n).map(|c| seq.matrix_entry(r, c) as usize).sum();
                let col: usize = (0..n).map(|c| seq.matrix_entry(c, r) as usize).sum();
                prop_assert_eq!(row, (n + 1) / 2);
                prop_assert_eq!(col, (n + 1) / 2);
            }
        }
    }
}
