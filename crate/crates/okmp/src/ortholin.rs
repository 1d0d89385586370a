//! Vectors over a scalar ring, the symmetric bilinear form, and randomized
//! construction of orthogonal systems.
//!
//! The form is the standard dot product `<a, b> = sum a_k * b_k`; it is
//! symmetric and nondegenerate over `F_p`. Over a finite field nonzero
//! vectors with `<v, v> = 0` (isotropic vectors) exist and are fatal for
//! secret recovery, so the generator rejects them.

use rand::RngCore;
use rayon::prelude::*;
use thiserror::Error;

use crate::ffield::{Fe, FieldError, PrimeField, Ring};

/// Per-slot resample budget before generation gives up.
const MAX_RESAMPLES: usize = 64;

/// Work threshold (elements touched) above which inner loops go parallel.
/// Exact arithmetic makes the result independent of evaluation order.
const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrtholinError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("vectors must have dimension >= 1")]
    ZeroDim,
    #[error("cannot fit {n} mutually orthogonal vectors in dimension {m}")]
    DimTooSmall { n: usize, m: usize },
    #[error("no anisotropic orthogonal candidate for slot {slot} after {attempts} resamples")]
    IsotropyExhausted { slot: usize, attempts: usize },
    #[error("coordinate does not belong to the supplied ring")]
    MixedField,
    #[error("vectors {i} and {j} are not orthogonal")]
    NotOrthogonal { i: usize, j: usize },
    #[error("basis vector {index} is isotropic")]
    IsotropicBasisVector { index: usize },
    #[error("system import: {0}")]
    BadImport(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Dense coordinate vector over a scalar ring.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FVector<R: Ring> {
    ring: R,
    coords: Vec<R::Elem>,
}

impl<R: Ring> FVector<R> {
    pub fn new(ring: R, coords: Vec<R::Elem>) -> Result<Self, OrtholinError> {
        if coords.is_empty() {
            return Err(OrtholinError::ZeroDim);
        }
        if !coords.iter().all(|c| ring.contains(c)) {
            return Err(OrtholinError::MixedField);
        }
        Ok(FVector { ring, coords })
    }

    pub fn zero(ring: R, dim: usize) -> Result<Self, OrtholinError> {
        if dim == 0 {
            return Err(OrtholinError::ZeroDim);
        }
        let coords = (0..dim).map(|_| ring.zero()).collect();
        Ok(FVector { ring, coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[R::Elem] {
        &self.coords
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| self.ring.is_zero(c))
    }

    pub fn count_nonzero(&self) -> usize {
        self.coords.iter().filter(|c| !self.ring.is_zero(c)).count()
    }

    /// Componentwise sum. Panics on dimension mismatch; callers on untrusted
    /// paths check dimensions first.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "vector dimension mismatch in add");
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| self.ring.add(a, b))
            .collect();
        FVector { ring: self.ring.clone(), coords }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "vector dimension mismatch in sub");
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| self.ring.sub(a, b))
            .collect();
        FVector { ring: self.ring.clone(), coords }
    }

    pub fn scale(&self, s: &R::Elem) -> Self {
        let coords = self.coords.iter().map(|c| self.ring.mul(s, c)).collect();
        FVector { ring: self.ring.clone(), coords }
    }

    /// `<self, other> = sum self_k * other_k`.
    pub fn inner(&self, other: &Self) -> Result<R::Elem, OrtholinError> {
        if self.dim() != other.dim() {
            return Err(OrtholinError::DimMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(self.ring.dot(&self.coords, &other.coords))
    }
}

impl<R: Ring> std::fmt::Display for FVector<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// `sum coeffs_i * vectors_i`.
pub fn linear_combination<R: Ring>(
    ring: &R,
    coeffs: &[R::Elem],
    vectors: &[FVector<R>],
    dim: usize,
) -> Result<FVector<R>, OrtholinError> {
    assert_eq!(coeffs.len(), vectors.len(), "one coefficient per vector");
    if dim == 0 {
        return Err(OrtholinError::ZeroDim);
    }
    for v in vectors {
        if v.dim() != dim {
            return Err(OrtholinError::DimMismatch { left: dim, right: v.dim() });
        }
    }
    let columns: Vec<&[R::Elem]> = vectors.iter().map(|v| v.coords()).collect();
    let coords = ring.lincomb(coeffs, &columns, dim);
    Ok(FVector { ring: ring.clone(), coords })
}

/// Uniform random vector (coordinates may be zero).
pub fn random_vector(field: &PrimeField, dim: usize, rng: &mut dyn RngCore) -> FVector<PrimeField> {
    let coords = (0..dim).map(|_| field.rand(rng)).collect();
    FVector { ring: *field, coords }
}

/// A set of mutually orthogonal, anisotropic vectors with cached norms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrthogonalSystem<R: Ring> {
    ring: R,
    basis: Vec<FVector<R>>,
    norms: Vec<R::Elem>,
    dim: usize,
}

impl<R: Ring> OrthogonalSystem<R> {
    /// Builds a system from explicit vectors, verifying every invariant:
    /// consistent dimensions, `n <= m`, pairwise orthogonality, and
    /// anisotropy.
    pub fn from_basis(ring: R, basis: Vec<FVector<R>>) -> Result<Self, OrtholinError> {
        let dim = match basis.first() {
            Some(v) => v.dim(),
            None => return Err(OrtholinError::ZeroDim),
        };
        for v in &basis {
            if v.dim() != dim {
                return Err(OrtholinError::DimMismatch { left: dim, right: v.dim() });
            }
        }
        if basis.len() > dim {
            return Err(OrtholinError::DimTooSmall { n: basis.len(), m: dim });
        }
        let mut norms = Vec::with_capacity(basis.len());
        for (i, v) in basis.iter().enumerate() {
            let norm = v.inner(v)?;
            if ring.is_zero(&norm) {
                return Err(OrtholinError::IsotropicBasisVector { index: i });
            }
            norms.push(norm);
        }
        for i in 0..basis.len() {
            for j in (i + 1)..basis.len() {
                if !ring.is_zero(&basis[i].inner(&basis[j])?) {
                    return Err(OrtholinError::NotOrthogonal { i, j });
                }
            }
        }
        Ok(OrthogonalSystem { ring, basis, norms, dim })
    }

    /// Empty system of the given dimension (capacity-zero groups).
    pub fn empty(ring: R, dim: usize) -> Result<Self, OrtholinError> {
        if dim == 0 {
            return Err(OrtholinError::ZeroDim);
        }
        Ok(OrthogonalSystem { ring, basis: Vec::new(), norms: Vec::new(), dim })
    }

    pub fn ring(&self) -> &R {
        &self.ring
    }

    /// Number of vectors `n`.
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Ambient dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[FVector<R>] {
        &self.basis
    }

    pub fn vector(&self, i: usize) -> &FVector<R> {
        &self.basis[i]
    }

    pub fn norm(&self, i: usize) -> &R::Elem {
        &self.norms[i]
    }

    pub fn norms(&self) -> &[R::Elem] {
        &self.norms
    }
}

/// Randomized Gram-Schmidt construction of an orthogonal system over `F_p`.
///
/// Each slot draws a dense random candidate, subtracts its projections onto
/// the accepted vectors (classical projections are exact here, so one fused
/// pass suffices), and accepts iff the residual is anisotropic and has at
/// least two nonzero coordinates. Deterministic for a fixed rng seed.
pub fn gen_orthogonal_system(
    field: &PrimeField,
    dim: usize,
    count: usize,
    rng: &mut dyn RngCore,
) -> Result<OrthogonalSystem<PrimeField>, OrtholinError> {
    if dim == 0 {
        return Err(OrtholinError::ZeroDim);
    }
    if count > dim {
        return Err(OrtholinError::DimTooSmall { n: count, m: dim });
    }
    let mut basis: Vec<FVector<PrimeField>> = Vec::with_capacity(count);
    let mut norms: Vec<Fe> = Vec::with_capacity(count);
    let mut norm_invs: Vec<Fe> = Vec::with_capacity(count);

    for slot in 0..count {
        let mut accepted = false;
        for _ in 0..MAX_RESAMPLES {
            let cand = random_vector(field, dim, rng);
            let candidate = orthogonalize(field, &cand, &basis, &norm_invs)?;
            // Reject anything resembling a scaled standard-basis vector
            // (covers the zero vector as well).
            if candidate.count_nonzero() <= 1 {
                continue;
            }
            let norm = candidate.inner(&candidate)?;
            if norm.is_zero() {
                continue;
            }
            norm_invs.push(norm.inv().expect("norm checked nonzero"));
            norms.push(norm);
            basis.push(candidate);
            accepted = true;
            break;
        }
        if !accepted {
            return Err(OrtholinError::IsotropyExhausted { slot, attempts: MAX_RESAMPLES });
        }
    }
    Ok(OrthogonalSystem { ring: *field, basis, norms, dim })
}

/// Subtracts from `cand` its projections onto the accepted vectors.
/// Projection coefficients multiply by the cached inverse norms instead of
/// dividing.
fn orthogonalize(
    field: &PrimeField,
    cand: &FVector<PrimeField>,
    accepted: &[FVector<PrimeField>],
    norm_invs: &[Fe],
) -> Result<FVector<PrimeField>, OrtholinError> {
    if accepted.is_empty() {
        return Ok(cand.clone());
    }
    let coeff = |j: usize| -> Result<Fe, OrtholinError> {
        Ok(cand.inner(&accepted[j])? * norm_invs[j])
    };
    let coeffs: Vec<Fe> = if accepted.len() * cand.dim() >= PAR_THRESHOLD {
        (0..accepted.len())
            .into_par_iter()
            .map(coeff)
            .collect::<Result<Vec<_>, _>>()?
    } else {
        (0..accepted.len()).map(coeff).collect::<Result<Vec<_>, _>>()?
    };
    let projection = linear_combination(field, &coeffs, accepted, cand.dim())?;
    Ok(cand.sub(&projection))
}

/// Outcome of a full pairwise orthogonality and anisotropy check.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OrthoReport {
    /// Pairs `(i, j)`, `i < j`, with nonzero inner product (0-based).
    pub violated_pairs: Vec<(usize, usize)>,
    /// Indices whose self-inner-product is zero.
    pub isotropic: Vec<usize>,
}

impl OrthoReport {
    pub fn is_ok(&self) -> bool {
        self.violated_pairs.is_empty() && self.isotropic.is_empty()
    }
}

/// Recomputes every pairwise inner product and every norm; the cached norms
/// are not trusted.
pub fn verify_orthogonal<R: Ring>(sys: &OrthogonalSystem<R>) -> OrthoReport {
    let mut report = OrthoReport::default();
    let ring = sys.ring();
    for i in 0..sys.len() {
        let norm = sys.vector(i).inner(sys.vector(i)).expect("same dims");
        if ring.is_zero(&norm) {
            report.isotropic.push(i);
        }
        for j in (i + 1)..sys.len() {
            let ip = sys.vector(i).inner(sys.vector(j)).expect("same dims");
            if !ring.is_zero(&ip) {
                report.violated_pairs.push((i, j));
            }
        }
    }
    report
}

/// `log2` of the orthogonal-tuple count lower bound `q^{(3/2)n^2} / n!`
/// (the `1 + o(1)` factor is dropped). Used as a brute-force-resistance
/// estimate in bits.
pub fn tuple_count_log2(q: u64, n: u32) -> f64 {
    debug_assert!(q >= 2 && n >= 1);
    let log2_q = (q as f64).log2();
    let log2_fact: f64 = (2..=n).map(|i| (i as f64).log2()).sum();
    1.5 * (n as f64) * (n as f64) * log2_q - log2_fact
}

/// Security margin below which [`advise_params`] warns.
pub const ADVISED_MIN_BITS: f64 = 128.0;

#[derive(Clone, Debug, PartialEq)]
pub enum ParamWarning {
    /// The tuple-count estimate leaves fewer bits of brute-force work than
    /// the advised floor.
    SecurityMarginLow { bits: f64 },
    /// The field itself is below the protocol floor.
    FieldBelowProtocolFloor { modulus: u64 },
}

impl std::fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamWarning::SecurityMarginLow { bits } => {
                write!(f, "security margin below 128 bits ({bits:.1} bits of brute-force work)")
            }
            ParamWarning::FieldBelowProtocolFloor { modulus } => {
                write!(f, "field modulus {modulus} is below the 2^31 protocol floor")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamAdvice {
    /// Recommended ambient dimension, `2n + 1`.
    pub dim: usize,
    pub warnings: Vec<ParamWarning>,
}

/// Recommends `m = 2n + 1` for an expected group size `n` and flags weak
/// configurations.
pub fn advise_params(group_size: usize, field: &PrimeField) -> ParamAdvice {
    let mut warnings = Vec::new();
    if !field.is_protocol_grade() {
        warnings.push(ParamWarning::FieldBelowProtocolFloor { modulus: field.modulus() });
    }
    let bits = tuple_count_log2(field.modulus(), group_size.max(1) as u32);
    if bits < ADVISED_MIN_BITS {
        warnings.push(ParamWarning::SecurityMarginLow { bits });
    }
    ParamAdvice { dim: 2 * group_size + 1, warnings }
}

/// Serializes a system as `p (8 LE) | m (4 LE) | n (4 LE)` followed by
/// `n * m` 8-byte little-endian elements, row per basis vector.
///
/// The system is server-side secret material; treat exported bytes as
/// sensitive.
pub fn export_system(sys: &OrthogonalSystem<PrimeField>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + sys.len() * sys.dim() * 8);
    out.extend_from_slice(&sys.ring().modulus().to_le_bytes());
    out.extend_from_slice(&(sys.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(sys.len() as u32).to_le_bytes());
    for v in sys.basis() {
        for c in v.coords() {
            out.extend_from_slice(&c.value().to_le_bytes());
        }
    }
    out
}

/// Parses and fully re-verifies an exported system (primality, canonical
/// residues, orthogonality, anisotropy).
pub fn import_system(bytes: &[u8]) -> Result<OrthogonalSystem<PrimeField>, OrtholinError> {
    if bytes.len() < 16 {
        return Err(OrtholinError::BadImport("header truncated".into()));
    }
    let p = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
    let m = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let field = PrimeField::new_test(p)?;
    let body = &bytes[16..];
    let expect = n
        .checked_mul(m)
        .and_then(|e| e.checked_mul(8))
        .ok_or_else(|| OrtholinError::BadImport("element count overflow".into()))?;
    if body.len() != expect {
        return Err(OrtholinError::BadImport(format!(
            "body is {} bytes, expected {expect}",
            body.len()
        )));
    }
    if m == 0 {
        return Err(OrtholinError::ZeroDim);
    }
    let mut basis = Vec::with_capacity(n);
    for row in 0..n {
        let mut coords = Vec::with_capacity(m);
        for col in 0..m {
            let off = (row * m + col) * 8;
            let raw = u64::from_le_bytes(body[off..off + 8].try_into().unwrap());
            let fe = field
                .try_elem(raw)
                .ok_or_else(|| OrtholinError::BadImport(format!("non-canonical element {raw}")))?;
            coords.push(fe);
        }
        basis.push(FVector::new(field, coords)?);
    }
    if basis.is_empty() {
        return OrthogonalSystem::empty(field, m);
    }
    OrthogonalSystem::from_basis(field, basis)
}

/// Demo-ring vector from small signed integers; test and walkthrough helper.
pub fn demo_vector(coords: &[i64]) -> FVector<crate::ffield::DemoRing> {
    let coords = coords.iter().map(|&c| crate::ffield::DemoInt::from(c)).collect();
    FVector::new(crate::ffield::DemoRing, coords).expect("nonempty demo vector")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffield::{seeded_rng, DemoInt, DemoRing, MERSENNE61};
    use num_bigint::BigInt;

    fn fp_vec(field: &PrimeField, coords: &[u64]) -> FVector<PrimeField> {
        FVector::new(*field, coords.iter().map(|&c| field.elem(c)).collect()).unwrap()
    }

    #[test]
    fn inner_product_worked_values() {
        let a = demo_vector(&[0, -16, 40]);
        let b = demo_vector(&[2, 2, 2]);
        assert_eq!(a.inner(&b).unwrap(), DemoInt::from(48));
        assert_eq!(b.inner(&b).unwrap(), DemoInt::from(12));
        let zero = FVector::zero(DemoRing, 3).unwrap();
        assert_eq!(a.inner(&zero).unwrap(), DemoInt::from(0));
    }

    #[test]
    fn inner_dim_mismatch() {
        let a = demo_vector(&[1, 2]);
        let b = demo_vector(&[1, 2, 3]);
        assert_eq!(a.inner(&b), Err(OrtholinError::DimMismatch { left: 2, right: 3 }));
    }

    #[test]
    fn bilinearity_and_symmetry() {
        let field = PrimeField::default_field();
        let mut rng = seeded_rng(11);
        for _ in 0..100 {
            let a = random_vector(&field, 9, &mut rng);
            let b = random_vector(&field, 9, &mut rng);
            let c = random_vector(&field, 9, &mut rng);
            let alpha = field.rand(&mut rng);
            let lhs = a.scale(&alpha).add(&b).inner(&c).unwrap();
            let rhs = alpha * a.inner(&c).unwrap() + b.inner(&c).unwrap();
            assert_eq!(lhs, rhs);
            assert_eq!(a.inner(&b).unwrap(), b.inner(&a).unwrap());
        }
    }

    #[test]
    fn generate_small_field_system() {
        let f7 = PrimeField::new_test(7).unwrap();
        let sys = gen_orthogonal_system(&f7, 5, 2, &mut seeded_rng(1)).unwrap();
        assert!(verify_orthogonal(&sys).is_ok());
        assert_eq!(sys.len(), 2);
        assert_eq!(sys.dim(), 5);
    }

    #[test]
    fn generate_rejects_overfull() {
        let f7 = PrimeField::new_test(7).unwrap();
        let err = gen_orthogonal_system(&f7, 3, 4, &mut seeded_rng(1)).unwrap_err();
        assert_eq!(err, OrtholinError::DimTooSmall { n: 4, m: 3 });
    }

    #[test]
    fn generate_full_rank_small_field_many_seeds() {
        // At p = 7 with n = m the final slot's direction is forced; seeds
        // where it degenerates to a standard-basis direction surface as
        // IsotropyExhausted, not as a bad system.
        let f7 = PrimeField::new_test(7).unwrap();
        let mut exhausted = 0;
        for seed in 0..200 {
            match gen_orthogonal_system(&f7, 5, 5, &mut seeded_rng(seed)) {
                Ok(sys) => assert!(
                    verify_orthogonal(&sys).is_ok(),
                    "seed {seed} produced a non-orthogonal system"
                ),
                Err(OrtholinError::IsotropyExhausted { .. }) => exhausted += 1,
                Err(e) => panic!("seed {seed}: unexpected error {e}"),
            }
        }
        assert!(exhausted <= 10, "too many exhausted seeds: {exhausted}");
    }

    #[test]
    fn generate_default_field_shapes() {
        let field = PrimeField::default_field();
        for &(m, n) in &[(5usize, 2usize), (11, 5), (41, 20)] {
            for seed in 0..200u64 {
                let sys =
                    gen_orthogonal_system(&field, m, n, &mut seeded_rng(seed ^ (m as u64) << 32))
                        .unwrap();
                assert!(verify_orthogonal(&sys).is_ok(), "(m={m}, n={n}) seed {seed}");
                assert!(sys.basis().iter().all(|v| v.count_nonzero() > 1));
            }
        }
    }

    #[test]
    fn generate_deterministic_per_seed() {
        let field = PrimeField::default_field();
        let a = gen_orthogonal_system(&field, 11, 5, &mut seeded_rng(99)).unwrap();
        let b = gen_orthogonal_system(&field, 11, 5, &mut seeded_rng(99)).unwrap();
        assert_eq!(a, b);
        let c = gen_orthogonal_system(&field, 11, 5, &mut seeded_rng(100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn verify_flags_violations() {
        // Known orthogonal basis passes.
        let basis = vec![
            demo_vector(&[1, 1, 1]),
            demo_vector(&[1, -2, 1]),
            demo_vector(&[-1, 0, 1]),
        ];
        let sys = OrthogonalSystem::from_basis(DemoRing, basis).unwrap();
        assert!(verify_orthogonal(&sys).is_ok());

        // Non-orthogonal pair is reported (0-based indices).
        let bad = OrthogonalSystem {
            ring: DemoRing,
            basis: vec![demo_vector(&[1, 0]), demo_vector(&[1, 1])],
            norms: vec![DemoInt::from(1), DemoInt::from(2)],
            dim: 2,
        };
        let report = verify_orthogonal(&bad);
        assert_eq!(report.violated_pairs, vec![(0, 1)]);
        assert!(
            OrthogonalSystem::from_basis(DemoRing, vec![demo_vector(&[1, 0]), demo_vector(&[1, 1])])
                .is_err()
        );

        // (1, 2) over F_5: <v, v> = 1 + 4 = 0, flagged isotropic.
        let f5 = PrimeField::new_test(5).unwrap();
        let v = fp_vec(&f5, &[1, 2]);
        let iso = OrthogonalSystem { ring: f5, norms: vec![f5.elem(0)], basis: vec![v], dim: 2 };
        let report = verify_orthogonal(&iso);
        assert_eq!(report.isotropic, vec![0]);
    }

    #[test]
    fn tuple_count_closed_forms() {
        assert!((tuple_count_log2(2, 1) - 1.5).abs() < 1e-12);
        assert!((tuple_count_log2(7, 1) - 1.5 * (7f64).log2()).abs() < 1e-12);
        assert!((tuple_count_log2(7, 1) - 4.2106).abs() < 1e-3);
    }

    #[test]
    fn tuple_count_matches_bigint_oracle() {
        // Oracle: exact bit length of q^(1.5 * n^2) / n! computed with
        // arbitrary precision.
        let q = MERSENNE61;
        let n = 64u32;
        let exponent = 3 * (n as u64) * (n as u64) / 2;
        let mut num = BigInt::from(1);
        let base = BigInt::from(q);
        for _ in 0..exponent {
            num *= &base;
        }
        let mut fact = BigInt::from(1);
        for i in 2..=n {
            fact *= BigInt::from(i);
        }
        let ratio = num / fact;
        let oracle_bits = (ratio.bits() - 1) as f64; // 2^(bits-1) <= ratio < 2^bits
        let estimate = tuple_count_log2(q, n);
        assert!((estimate - oracle_bits).abs() <= 1.0, "estimate {estimate} vs oracle {oracle_bits}");
        assert!(estimate > 128.0);
    }

    #[test]
    fn advise_params_examples() {
        let default = PrimeField::default_field();
        let advice = advise_params(10, &default);
        assert_eq!(advice.dim, 21);
        assert!(advice.warnings.is_empty());

        let f7 = PrimeField::new_test(7).unwrap();
        let advice = advise_params(1, &f7);
        assert_eq!(advice.dim, 3);
        assert!(advice
            .warnings
            .iter()
            .any(|w| w.to_string().contains("security margin below 128 bits")));

        assert_eq!(advise_params(10_000, &default).dim, 20_001);
    }

    #[test]
    fn export_import_round_trip() {
        let field = PrimeField::default_field();
        let sys = gen_orthogonal_system(&field, 9, 4, &mut seeded_rng(5)).unwrap();
        let bytes = export_system(&sys);
        let back = import_system(&bytes).unwrap();
        assert_eq!(sys, back);

        // Truncation and corruption are rejected.
        assert!(import_system(&bytes[..bytes.len() - 1]).is_err());
        let mut corrupt = bytes.clone();
        let last = corrupt.len() - 1;
        corrupt[last] ^= 0xff; // makes the final element non-canonical or non-orthogonal
        assert!(import_system(&corrupt).is_err());
    }

    #[test]
    fn linear_combination_matches_serial() {
        let field = PrimeField::default_field();
        let mut rng = seeded_rng(17);
        let vectors: Vec<_> = (0..6).map(|_| random_vector(&field, 500, &mut rng)).collect();
        let coeffs: Vec<_> = (0..6).map(|_| field.rand(&mut rng)).collect();
        let combo = linear_combination(&field, &coeffs, &vectors, 500).unwrap();
        for k in 0..500 {
            let mut acc = field.zero();
            for (c, v) in coeffs.iter().zip(&vectors) {
                acc = acc + *c * v.coords()[k];
            }
            assert_eq!(acc, combo.coords()[k]);
        }
    }
}
