//! Exact scalar arithmetic.
//!
//! Two rings back the protocol:
//!
//! * [`PrimeField`] / [`Fe`] — canonical residues modulo a prime `p < 2^64`.
//!   This is the production ring; the default modulus is the Mersenne prime
//!   `2^61 - 1`, which gets a branch-free reduction fast path.
//! * [`DemoRing`] / [`DemoInt`] — signed arbitrary-precision integers for the
//!   hand-checkable integer walkthrough. **Insecure**: over a ring with a gcd
//!   algorithm the distributed secret divides the gcd of every broadcast's
//!   coordinates, so this mode exists for demos and golden tests only.
//!
//! Both implement [`Ring`], which is the scalar abstraction the vector and
//! group-state layers are generic over.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use thiserror::Error;

// Re-exported because the public API takes `&mut dyn RngCore`.
pub use rand::RngCore;

/// The default modulus, `2^61 - 1`.
pub const MERSENNE61: u64 = (1 << 61) - 1;

/// Smallest modulus accepted in protocol mode.
pub const PROTOCOL_MIN_MODULUS: u64 = 1 << 31;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is below the 2^31 protocol floor (use new_test for toy fields)")]
    BelowProtocolFloor(u64),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// A prime field `F_p`, `p < 2^64`.
///
/// Primality is verified at construction with a deterministic Miller-Rabin
/// test. `elem_bits` is the serialized width of one element (fixed at 64:
/// elements travel as 8-byte little-endian canonical residues).
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    p: u64,
    elem_bits: u32,
}

impl fmt::Debug for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.p)
    }
}

impl PrimeField {
    /// Protocol-grade field: `p` must be prime and at least `2^31`.
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if !is_prime_u64(p) {
            return Err(FieldError::NotPrime(p));
        }
        if p < PROTOCOL_MIN_MODULUS {
            return Err(FieldError::BelowProtocolFloor(p));
        }
        Ok(PrimeField { p, elem_bits: 64 })
    }

    /// Any prime modulus, including tiny ones. Intended for tests and toys;
    /// protocol entry points reject fields below the security floor.
    pub fn new_test(p: u64) -> Result<Self, FieldError> {
        if !is_prime_u64(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(PrimeField { p, elem_bits: 64 })
    }

    /// `F_{2^61 - 1}`.
    pub fn default_field() -> Self {
        PrimeField { p: MERSENNE61, elem_bits: 64 }
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    /// Serialized bit width of one element (`C` in the message-length model).
    pub fn elem_bits(&self) -> u32 {
        self.elem_bits
    }

    pub fn elem_bytes(&self) -> usize {
        (self.elem_bits / 8) as usize
    }

    pub fn is_protocol_grade(&self) -> bool {
        self.p >= PROTOCOL_MIN_MODULUS
    }

    /// Element from an arbitrary integer, reduced to the canonical residue.
    pub fn elem(&self, value: u64) -> Fe {
        Fe { value: value % self.p, field: *self }
    }

    /// Element from a canonical residue; `None` if `value >= p`.
    pub fn try_elem(&self, value: u64) -> Option<Fe> {
        (value < self.p).then_some(Fe { value, field: *self })
    }

    /// Element from a signed integer (negative values wrap mod `p`).
    pub fn elem_i64(&self, value: i64) -> Fe {
        let m = self.p as i128;
        let v = ((value as i128 % m) + m) % m;
        self.elem(v as u64)
    }

    pub fn zero(&self) -> Fe {
        self.elem(0)
    }

    pub fn one(&self) -> Fe {
        self.elem(1)
    }

    /// Uniform element of `[0, p)`.
    pub fn rand(&self, rng: &mut dyn RngCore) -> Fe {
        Fe { value: uniform_below(rng, self.p), field: *self }
    }

    /// Uniform element of `[1, p)`.
    pub fn rand_nonzero(&self, rng: &mut dyn RngCore) -> Fe {
        Fe { value: 1 + uniform_below(rng, self.p - 1), field: *self }
    }

    #[inline]
    fn add_raw(&self, a: u64, b: u64) -> u64 {
        let s = a as u128 + b as u128;
        let p = self.p as u128;
        (if s >= p { s - p } else { s }) as u64
    }

    #[inline]
    fn sub_raw(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            self.p - (b - a)
        }
    }

    #[inline]
    fn mul_raw(&self, a: u64, b: u64) -> u64 {
        if self.p == MERSENNE61 {
            // 2^61 = 1 (mod p): fold the high part back onto the low part.
            let t = a as u128 * b as u128;
            let lo = t as u64 & MERSENNE61;
            let hi = (t >> 61) as u64;
            let mut s = lo + hi;
            s = (s & MERSENNE61) + (s >> 61);
            if s >= MERSENNE61 {
                s -= MERSENNE61;
            }
            s
        } else {
            (a as u128 * b as u128 % self.p as u128) as u64
        }
    }
}

/// A field element: canonical residue in `[0, p)` tagged with its field.
///
/// Arithmetic between elements of different fields is a programming error
/// and panics.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Fe {
    value: u64,
    field: PrimeField,
}

impl Fe {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn neg(&self) -> Fe {
        let value = if self.value == 0 { 0 } else { self.field.p - self.value };
        Fe { value, field: self.field }
    }

    /// Square-and-multiply exponentiation.
    pub fn pow(&self, mut exp: u64) -> Fe {
        let mut base = self.value;
        let mut acc = 1 % self.field.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.field.mul_raw(acc, base);
            }
            base = self.field.mul_raw(base, base);
            exp >>= 1;
        }
        Fe { value: acc, field: self.field }
    }

    /// Multiplicative inverse via `a^(p-2)`.
    pub fn inv(&self) -> Result<Fe, FieldError> {
        if self.value == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(self.field.p - 2))
    }

    #[inline]
    fn check_same_field(&self, other: &Fe) {
        assert_eq!(
            self.field.p, other.field.p,
            "field mismatch: operands live in F_{} and F_{}",
            self.field.p, other.field.p
        );
    }
}

impl std::ops::Add for Fe {
    type Output = Fe;
    fn add(self, rhs: Fe) -> Fe {
        self.check_same_field(&rhs);
        Fe { value: self.field.add_raw(self.value, rhs.value), field: self.field }
    }
}

impl std::ops::Sub for Fe {
    type Output = Fe;
    fn sub(self, rhs: Fe) -> Fe {
        self.check_same_field(&rhs);
        Fe { value: self.field.sub_raw(self.value, rhs.value), field: self.field }
    }
}

impl std::ops::Mul for Fe {
    type Output = Fe;
    fn mul(self, rhs: Fe) -> Fe {
        self.check_same_field(&rhs);
        Fe { value: self.field.mul_raw(self.value, rhs.value), field: self.field }
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl fmt::Debug for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.field.p)
    }
}

/// Signed arbitrary-precision integer for the demo ring. Exact arithmetic,
/// no overflow. Serializes as a decimal string.
#[derive(Clone, PartialEq, Eq)]
pub struct DemoInt(BigInt);

impl DemoInt {
    pub fn new(value: BigInt) -> Self {
        DemoInt(value)
    }

    pub fn value(&self) -> &BigInt {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn gcd(&self, other: &DemoInt) -> DemoInt {
        DemoInt(self.0.gcd(&other.0))
    }

    /// `true` iff `self` divides `other` (everything divides zero).
    pub fn divides(&self, other: &DemoInt) -> bool {
        if self.0.is_zero() {
            return other.0.is_zero();
        }
        (&other.0 % &self.0).is_zero()
    }
}

impl From<i64> for DemoInt {
    fn from(v: i64) -> Self {
        DemoInt(BigInt::from(v))
    }
}

impl fmt::Display for DemoInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for DemoInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Scalar ring abstraction shared by the protocol field and the demo
/// integers. Operations go through a ring handle so elements stay plain
/// values.
pub trait Ring: Clone + PartialEq + fmt::Debug + Send + Sync {
    type Elem: Clone + PartialEq + Eq + fmt::Debug + fmt::Display + Send + Sync;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;

    /// Exact division: `Some(q)` with `a = q * b`, `None` when no such
    /// element exists (including `b = 0`). Over a field this is `a * b^-1`.
    fn div_exact(&self, a: &Self::Elem, b: &Self::Elem) -> Option<Self::Elem>;

    /// Multiplicative inverse where one exists.
    fn inv(&self, a: &Self::Elem) -> Option<Self::Elem>;

    /// Uniform nonzero element (demo ring: small nonzero integers).
    fn rand_nonzero(&self, rng: &mut dyn RngCore) -> Self::Elem;

    /// `true` iff the element belongs to this ring instance.
    fn contains(&self, a: &Self::Elem) -> bool;

    /// Integer view of an element, available only in exact-integer mode.
    /// Gates the gcd leak probe.
    fn as_integer(&self, a: &Self::Elem) -> Option<BigInt>;

    /// `sum a_k * b_k`. Rings may override with a faster exact path; the
    /// result must equal the naive loop.
    fn dot(&self, a: &[Self::Elem], b: &[Self::Elem]) -> Self::Elem {
        debug_assert_eq!(a.len(), b.len());
        let mut acc = self.zero();
        for (x, y) in a.iter().zip(b) {
            acc = self.add(&acc, &self.mul(x, y));
        }
        acc
    }

    /// `out[k] = sum_j coeffs[j] * columns[j][k]`. All columns must have
    /// length `dim`. Overridable for the same reason as [`Ring::dot`].
    fn lincomb(&self, coeffs: &[Self::Elem], columns: &[&[Self::Elem]], dim: usize) -> Vec<Self::Elem> {
        debug_assert_eq!(coeffs.len(), columns.len());
        let mut acc = vec![self.zero(); dim];
        for (c, col) in coeffs.iter().zip(columns) {
            debug_assert_eq!(col.len(), dim);
            if self.is_zero(c) {
                continue;
            }
            for (a, x) in acc.iter_mut().zip(*col) {
                *a = self.add(a, &self.mul(c, x));
            }
        }
        acc
    }
}

impl Ring for PrimeField {
    type Elem = Fe;

    fn zero(&self) -> Fe {
        PrimeField::zero(self)
    }

    fn one(&self) -> Fe {
        PrimeField::one(self)
    }

    fn is_zero(&self, a: &Fe) -> bool {
        a.is_zero()
    }

    fn add(&self, a: &Fe, b: &Fe) -> Fe {
        *a + *b
    }

    fn sub(&self, a: &Fe, b: &Fe) -> Fe {
        *a - *b
    }

    fn mul(&self, a: &Fe, b: &Fe) -> Fe {
        *a * *b
    }

    fn neg(&self, a: &Fe) -> Fe {
        Fe::neg(a)
    }

    fn div_exact(&self, a: &Fe, b: &Fe) -> Option<Fe> {
        b.inv().ok().map(|bi| *a * bi)
    }

    fn inv(&self, a: &Fe) -> Option<Fe> {
        a.inv().ok()
    }

    fn rand_nonzero(&self, rng: &mut dyn RngCore) -> Fe {
        PrimeField::rand_nonzero(self, rng)
    }

    fn contains(&self, a: &Fe) -> bool {
        a.field.p == self.p
    }

    fn as_integer(&self, _a: &Fe) -> Option<BigInt> {
        None
    }

    fn dot(&self, a: &[Fe], b: &[Fe]) -> Fe {
        debug_assert_eq!(a.len(), b.len());
        if self.p > MERSENNE61 {
            // Products can reach 2^128; no room to defer reduction.
            let mut acc = self.zero();
            for (x, y) in a.iter().zip(b) {
                acc = acc + *x * *y;
            }
            return acc;
        }
        // p <= 2^61 - 1: each product is below 2^122, so 32 of them fit a
        // u128 accumulator between folds.
        let p = self.p as u128;
        let mut acc: u128 = 0;
        for (ca, cb) in a.chunks(DOT_CHUNK).zip(b.chunks(DOT_CHUNK)) {
            for (x, y) in ca.iter().zip(cb) {
                acc += x.value as u128 * y.value as u128;
            }
            acc %= p;
        }
        Fe { value: acc as u64, field: *self }
    }

    fn lincomb(&self, coeffs: &[Fe], columns: &[&[Fe]], dim: usize) -> Vec<Fe> {
        debug_assert_eq!(coeffs.len(), columns.len());
        if self.p > MERSENNE61 {
            let mut acc = vec![self.zero(); dim];
            for (c, col) in coeffs.iter().zip(columns) {
                debug_assert_eq!(col.len(), dim);
                for (a, x) in acc.iter_mut().zip(*col) {
                    *a = *a + *c * *x;
                }
            }
            return acc;
        }
        let p = self.p as u128;
        let mut acc = vec![0u128; dim];
        for (idx, (c, col)) in coeffs.iter().zip(columns).enumerate() {
            debug_assert_eq!(col.len(), dim);
            let cv = c.value;
            if cv != 0 {
                for (a, x) in acc.iter_mut().zip(*col) {
                    *a += cv as u128 * x.value as u128;
                }
            }
            // Unconditional fold: at most DOT_CHUNK products accumulate
            // between folds.
            if idx % DOT_CHUNK == DOT_CHUNK - 1 {
                for a in acc.iter_mut() {
                    *a %= p;
                }
            }
        }
        acc.into_iter().map(|a| Fe { value: (a % p) as u64, field: *self }).collect()
    }
}

/// Terms accumulated between reduction folds in the deferred-reduction
/// paths; 32 products of at most 2^122 stay below 2^128.
const DOT_CHUNK: usize = 32;

/// The exact-integer demo ring. See the module docs for why this is
/// insecure as a protocol instantiation.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct DemoRing;

/// Demo scalars are drawn from `[-9, 9] \ {0}`; small values keep the
/// printed traces and gcds readable.
const DEMO_RAND_BOUND: u64 = 9;

impl Ring for DemoRing {
    type Elem = DemoInt;

    fn zero(&self) -> DemoInt {
        DemoInt(BigInt::zero())
    }

    fn one(&self) -> DemoInt {
        DemoInt::from(1)
    }

    fn is_zero(&self, a: &DemoInt) -> bool {
        a.0.is_zero()
    }

    fn add(&self, a: &DemoInt, b: &DemoInt) -> DemoInt {
        DemoInt(&a.0 + &b.0)
    }

    fn sub(&self, a: &DemoInt, b: &DemoInt) -> DemoInt {
        DemoInt(&a.0 - &b.0)
    }

    fn mul(&self, a: &DemoInt, b: &DemoInt) -> DemoInt {
        DemoInt(&a.0 * &b.0)
    }

    fn neg(&self, a: &DemoInt) -> DemoInt {
        DemoInt(-&a.0)
    }

    fn div_exact(&self, a: &DemoInt, b: &DemoInt) -> Option<DemoInt> {
        if b.0.is_zero() {
            return None;
        }
        let (q, r) = a.0.div_rem(&b.0);
        r.is_zero().then_some(DemoInt(q))
    }

    fn inv(&self, a: &DemoInt) -> Option<DemoInt> {
        let one = BigInt::from(1);
        (a.0.abs() == one).then(|| DemoInt(a.0.clone()))
    }

    fn rand_nonzero(&self, rng: &mut dyn RngCore) -> DemoInt {
        let magnitude = 1 + uniform_below(rng, DEMO_RAND_BOUND) as i64;
        let sign = if uniform_below(rng, 2) == 0 { 1 } else { -1 };
        DemoInt::from(sign * magnitude)
    }

    fn contains(&self, _a: &DemoInt) -> bool {
        true
    }

    fn as_integer(&self, a: &DemoInt) -> Option<BigInt> {
        Some(a.0.clone())
    }
}

/// Deterministic seeded generator for test mode and reproducible runs.
/// ChaCha keeps the stream stable across platforms and releases.
pub type SeededRng = rand_chacha::ChaCha12Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}

/// Cryptographically strong generator for protocol mode.
pub fn secure_rng() -> rand::rngs::StdRng {
    use rand::SeedableRng;
    rand::rngs::StdRng::from_entropy()
}

/// Unbiased uniform draw from `[0, bound)` via rejection sampling.
fn uniform_below(rng: &mut dyn RngCore, bound: u64) -> u64 {
    debug_assert!(bound >= 1);
    if bound.is_power_of_two() {
        return rng.next_u64() & (bound - 1);
    }
    // Reject draws from the final partial copy of [0, bound).
    let rem = (u64::MAX % bound + 1) % bound;
    loop {
        let x = rng.next_u64();
        if rem == 0 || x <= u64::MAX - rem {
            return x % bound;
        }
    }
}

/// Deterministic Miller-Rabin, valid for all `n < 2^64` with this witness
/// set.
fn is_prime_u64(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &w in &WITNESSES {
        if n % w == 0 {
            return n == w;
        }
    }
    let r = (n - 1).trailing_zeros();
    let d = (n - 1) >> r;
    'witness: for &w in &WITNESSES {
        let mut x = powmod(w % n, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn powmod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Extended-Euclid inverse; independent oracle for the `a^(p-2)` path.
    fn egcd_inv(a: u64, p: u64) -> Option<u64> {
        let (mut r0, mut r1) = (p as i128, a as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        if r0 != 1 {
            return None;
        }
        Some(((t0 % p as i128 + p as i128) % p as i128) as u64)
    }

    #[test]
    fn wraparound_add_mul_mod_7() {
        let f = PrimeField::new_test(7).unwrap();
        assert_eq!((f.elem(5) + f.elem(4)).value(), 2);
        assert_eq!((f.elem(3) * f.elem(5)).value(), 1);
    }

    #[test]
    fn mersenne_square_of_p_minus_one() {
        // Oracle: arbitrary-precision multiply then reduce.
        let f = PrimeField::default_field();
        let p = f.modulus();
        let big = BigInt::from(p - 1) * BigInt::from(p - 1) % BigInt::from(p);
        let (_, digits) = big.to_u64_digits();
        let expected = if digits.is_empty() { 0 } else { digits[0] };
        assert_eq!(expected, 1);
        assert_eq!((f.elem(p - 1) * f.elem(p - 1)).value(), 1);
    }

    #[test]
    fn mersenne_mul_matches_wide_reduction() {
        let f = PrimeField::default_field();
        let mut rng = seeded_rng(7);
        for _ in 0..2000 {
            let a = f.rand(&mut rng);
            let b = f.rand(&mut rng);
            let wide = (a.value() as u128 * b.value() as u128 % f.modulus() as u128) as u64;
            assert_eq!((a * b).value(), wide);
        }
    }

    #[test]
    fn inverse_small_fields() {
        // Oracle: exhaustive search.
        let f7 = PrimeField::new_test(7).unwrap();
        let exhaustive =
            (1..7).find(|&x| (f7.elem(4) * f7.elem(x)).value() == 1).unwrap();
        assert_eq!(exhaustive, 2);
        assert_eq!(f7.elem(4).inv().unwrap().value(), 2);
        assert_eq!(f7.elem(1).inv().unwrap().value(), 1);

        let f13 = PrimeField::new_test(13).unwrap();
        let exhaustive =
            (1..13).find(|&x| (f13.elem(5) * f13.elem(x)).value() == 1).unwrap();
        assert_eq!(exhaustive, 8);
        assert_eq!(f13.elem(5).inv().unwrap().value(), 8);
    }

    #[test]
    fn inverse_of_zero_fails() {
        let f = PrimeField::default_field();
        assert_eq!(f.zero().inv(), Err(FieldError::ZeroInverse));
    }

    #[test]
    fn inverse_matches_extended_euclid() {
        for p in [7, 13, 10007, MERSENNE61] {
            let f = PrimeField::new_test(p).unwrap();
            let mut rng = seeded_rng(p);
            for _ in 0..200 {
                let a = f.rand_nonzero(&mut rng);
                assert_eq!(a.inv().unwrap().value(), egcd_inv(a.value(), p).unwrap());
            }
        }
    }

    #[test]
    fn inverse_involutive_and_cancels() {
        let f = PrimeField::default_field();
        let mut rng = seeded_rng(3);
        for _ in 0..500 {
            let a = f.rand_nonzero(&mut rng);
            assert_eq!(a.inv().unwrap().inv().unwrap(), a);
            assert_eq!((a * a.inv().unwrap()).value(), 1);
        }
    }

    #[test]
    #[should_panic(expected = "field mismatch")]
    fn mixed_fields_panic() {
        let a = PrimeField::new_test(7).unwrap().elem(3);
        let b = PrimeField::new_test(13).unwrap().elem(3);
        let _ = a + b;
    }

    #[test]
    fn field_axioms_hold() {
        for p in [5, 10007, MERSENNE61] {
            let f = PrimeField::new_test(p).unwrap();
            let mut rng = seeded_rng(p ^ 0xabcdef);
            for _ in 0..300 {
                let (a, b, c) = (f.rand(&mut rng), f.rand(&mut rng), f.rand(&mut rng));
                assert_eq!((a + b) + c, a + (b + c));
                assert_eq!(a + b, b + a);
                assert_eq!((a * b) * c, a * (b * c));
                assert_eq!(a * b, b * a);
                assert_eq!(a * (b + c), a * b + a * c);
                assert_eq!(a - b, a + b.neg());
            }
        }
    }

    #[test]
    fn rand_nonzero_range_and_determinism() {
        let f = PrimeField::new_test(7).unwrap();
        let mut r1 = seeded_rng(42);
        let mut r2 = seeded_rng(42);
        let first: Vec<u64> = (0..32).map(|_| f.rand_nonzero(&mut r1).value()).collect();
        let second: Vec<u64> = (0..32).map(|_| f.rand_nonzero(&mut r2).value()).collect();
        assert_eq!(first, second);
        assert!(first.iter().all(|&v| (1..7).contains(&v)));
    }

    #[test]
    fn rand_nonzero_uniform_chi_square() {
        // 10^5 draws at p = 7: each residue within 5 sigma of N/6.
        let f = PrimeField::new_test(7).unwrap();
        let mut rng = seeded_rng(2024);
        let n = 100_000usize;
        let mut counts = [0usize; 7];
        for _ in 0..n {
            counts[f.rand_nonzero(&mut rng).value() as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        let expected = n as f64 / 6.0;
        let sigma = (n as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for &c in &counts[1..] {
            assert!(
                (c as f64 - expected).abs() < 5.0 * sigma,
                "residue count {c} outside 5 sigma of {expected}"
            );
        }
    }

    #[test]
    fn primality_gate() {
        assert!(PrimeField::new(MERSENNE61).is_ok());
        assert_eq!(PrimeField::new(15), Err(FieldError::NotPrime(15)));
        assert_eq!(PrimeField::new(7), Err(FieldError::BelowProtocolFloor(7)));
        assert!(PrimeField::new_test(7).is_ok());
        assert!(PrimeField::new_test(2).is_ok());
        assert_eq!(PrimeField::new_test(1), Err(FieldError::NotPrime(1)));
        // Carmichael number: catches weak primality tests.
        assert_eq!(PrimeField::new_test(561), Err(FieldError::NotPrime(561)));
    }

    #[test]
    fn demo_ring_exact_division() {
        let r = DemoRing;
        let a = DemoInt::from(48);
        let b = DemoInt::from(12);
        assert_eq!(r.div_exact(&a, &b), Some(DemoInt::from(4)));
        assert_eq!(r.div_exact(&a, &DemoInt::from(5)), None);
        assert_eq!(r.div_exact(&a, &DemoInt::from(0)), None);
        assert_eq!(r.div_exact(&DemoInt::from(-108), &DemoInt::from(54)), Some(DemoInt::from(-2)));
    }

    #[test]
    fn demo_gcd_and_divides() {
        let g = DemoInt::from(0).gcd(&DemoInt::from(-16)).gcd(&DemoInt::from(40));
        assert_eq!(g, DemoInt::from(8));
        assert!(DemoInt::from(4).divides(&g));
        assert!(!DemoInt::from(3).divides(&g));
    }

    #[test]
    fn demo_rand_nonzero_in_bound() {
        let r = DemoRing;
        let mut rng = seeded_rng(5);
        for _ in 0..200 {
            let x = r.rand_nonzero(&mut rng);
            assert!(!x.is_zero());
            assert!(x.value().abs() <= BigInt::from(DEMO_RAND_BOUND));
        }
    }
}
