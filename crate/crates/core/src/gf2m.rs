//! Arithmetic in GF(2^m) and exact Vandermonde system solving.
//!
//! Fields up to m = 16 multiply through log/antilog tables; wider fields fall
//! back to shift-and-reduce. Elements are carried as `u32` words in the hot
//! paths (`*_raw` methods) and as [`FieldElement`] where the field identity
//! must be checked.

use std::fmt;

use crate::error::{CdcError, Result};

/// Largest supported extension degree.
pub const MAX_DEGREE: u32 = 32;

/// Largest degree that gets log/antilog tables.
const TABLE_DEGREE_LIMIT: u32 = 16;

/// Default reduction polynomials, indexed by `m - 1`. Degree 8 uses
/// x^8 + x^4 + x^3 + x + 1; the rest are standard primitive polynomials.
const DEFAULT_POLYS: [u64; 32] = [
    0x3,
    0x7,
    0xB,
    0x13,
    0x25,
    0x43,
    0x83,
    0x11B,
    0x211,
    0x409,
    0x805,
    0x1053,
    0x201B,
    0x4443,
    0x8003,
    0x1100B,
    0x20009,
    0x40081,
    0x80027,
    0x100009,
    0x200005,
    0x400003,
    0x800021,
    0x1000087,
    0x2000009,
    0x4000047,
    0x8000027,
    0x10000009,
    0x20000005,
    0x40800007,
    0x80000009,
    0x100400007,
];

/// Degree of a GF(2) polynomial stored as a bitmask, `None` for zero.
fn degree(p: u64) -> Option<u32> {
    (p != 0).then(|| 63 - p.leading_zeros())
}

/// Remainder of `a` divided by `b` over GF(2).
pub fn poly_mod(mut a: u64, b: u64) -> u64 {
    let db = degree(b).expect("division by the zero polynomial");
    while let Some(da) = degree(a) {
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

/// Trial division by every polynomial of degree 1..=deg/2.
pub fn is_irreducible(p: u64) -> bool {
    let Some(d) = degree(p) else { return false };
    if d == 0 {
        return false;
    }
    for dd in 1..=d / 2 {
        for f in (1u64 << dd)..(1u64 << (dd + 1)) {
            if poly_mod(p, f) == 0 {
                return false;
            }
        }
    }
    true
}

/// Shift-and-reduce multiplication in GF(2^m).
pub fn mul_shift_reduce(a: u32, b: u32, m: u32, poly: u64) -> u32 {
    let mut a = a as u64;
    let mut b = b as u64;
    let mut acc = 0u64;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if (a >> m) & 1 == 1 {
            a ^= poly;
        }
    }
    acc as u32
}

/// Extension degree plus reduction polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    m: u32,
    poly: u64,
}

impl FieldSpec {
    /// Validates degree and (for m <= 16) irreducibility.
    pub fn new(m: u32, poly: u64) -> Result<Self> {
        if m == 0 || m > MAX_DEGREE {
            return Err(CdcError::InvalidField(format!(
                "degree {m} outside 1..={MAX_DEGREE}"
            )));
        }
        if degree(poly) != Some(m) {
            return Err(CdcError::InvalidField(format!(
                "polynomial {poly:#x} does not have degree {m}"
            )));
        }
        if m <= TABLE_DEGREE_LIMIT && !is_irreducible(poly) {
            return Err(CdcError::InvalidField(format!(
                "polynomial {poly:#x} is reducible"
            )));
        }
        Ok(Self { m, poly })
    }

    pub fn with_degree(m: u32) -> Result<Self> {
        if m == 0 || m > MAX_DEGREE {
            return Err(CdcError::InvalidField(format!(
                "degree {m} outside 1..={MAX_DEGREE}"
            )));
        }
        Self::new(m, DEFAULT_POLYS[(m - 1) as usize])
    }

    pub fn gf256() -> Self {
        Self { m: 8, poly: 0x11B }
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn reduction_poly(&self) -> u64 {
        self.poly
    }

    /// Number of field elements, 2^m.
    pub fn order(&self) -> u64 {
        1u64 << self.m
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^{}) mod {:#x}", self.m, self.poly)
    }
}

/// An element tagged with the field it belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u32,
    spec: FieldSpec,
}

impl FieldElement {
    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }
}

struct LogTables {
    log: Vec<u32>,
    // Doubled so that exp[log a + log b] needs no modular reduction.
    exp: Vec<u32>,
}

/// A finite field GF(2^m), immutable after construction.
pub struct GaloisField {
    spec: FieldSpec,
    tables: Option<LogTables>,
}

impl fmt::Debug for GaloisField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaloisField")
            .field("spec", &self.spec)
            .field("tables", &self.tables.is_some())
            .finish()
    }
}

impl GaloisField {
    pub fn new(spec: FieldSpec) -> Self {
        let tables = (spec.m <= TABLE_DEGREE_LIMIT).then(|| build_tables(spec));
        Self { spec, tables }
    }

    pub fn with_degree(m: u32) -> Result<Self> {
        Ok(Self::new(FieldSpec::with_degree(m)?))
    }

    pub fn gf256() -> Self {
        Self::new(FieldSpec::gf256())
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn degree(&self) -> u32 {
        self.spec.m
    }

    fn mask(&self) -> u64 {
        self.spec.order() - 1
    }

    pub fn element(&self, value: u64) -> Result<FieldElement> {
        if value > self.mask() {
            return Err(CdcError::ElementOutOfRange {
                value,
                m: self.spec.m,
            });
        }
        Ok(FieldElement {
            value: value as u32,
            spec: self.spec,
        })
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement {
            value: 0,
            spec: self.spec,
        }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement {
            value: 1,
            spec: self.spec,
        }
    }

    fn check(&self, a: &FieldElement) -> Result<()> {
        if a.spec != self.spec {
            return Err(CdcError::FieldMismatch {
                left: a.spec.m,
                right: self.spec.m,
            });
        }
        Ok(())
    }

    fn wrap(&self, value: u32) -> FieldElement {
        FieldElement {
            value,
            spec: self.spec,
        }
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        self.check(&a)?;
        self.check(&b)?;
        Ok(self.wrap(a.value ^ b.value))
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        self.check(&a)?;
        self.check(&b)?;
        Ok(self.wrap(self.mul_raw(a.value, b.value)))
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        self.check(&a)?;
        Ok(self.wrap(self.inv_raw(a.value)?))
    }

    pub fn pow(&self, a: FieldElement, e: u64) -> Result<FieldElement> {
        self.check(&a)?;
        Ok(self.wrap(self.pow_raw(a.value, e)))
    }

    #[inline]
    pub fn mul_raw(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        match &self.tables {
            Some(t) => t.exp[(t.log[a as usize] + t.log[b as usize]) as usize],
            None => mul_shift_reduce(a, b, self.spec.m, self.spec.poly),
        }
    }

    pub fn inv_raw(&self, a: u32) -> Result<u32> {
        if a == 0 {
            return Err(CdcError::ZeroInverse);
        }
        Ok(match &self.tables {
            Some(t) => {
                let group = (self.spec.order() - 1) as u32;
                t.exp[((group - t.log[a as usize]) % group) as usize]
            }
            None => self.pow_raw(a, self.spec.order() - 2),
        })
    }

    pub fn pow_raw(&self, mut base: u32, mut e: u64) -> u32 {
        let mut acc = 1u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_raw(acc, base);
            }
            base = self.mul_raw(base, base);
            e >>= 1;
        }
        acc
    }

    /// The first `n` nonzero elements in integer order: 1, 2, ..., n.
    pub fn coefficients(&self, n: usize) -> Result<Vec<u32>> {
        if n as u64 > self.mask() {
            return Err(CdcError::NotEnoughCoefficients {
                needed: n,
                available: self.mask() as usize,
            });
        }
        Ok((1..=n as u32).collect())
    }
}

fn build_tables(spec: FieldSpec) -> LogTables {
    let order = spec.order() as usize;
    let group = order - 1;
    let generator = (1..order as u32)
        .find(|&g| multiplicative_order(g, spec) == group)
        .expect("the multiplicative group of a finite field is cyclic");
    let mut exp = vec![0u32; 2 * group];
    let mut log = vec![0u32; order];
    let mut x = 1u32;
    for i in 0..group {
        exp[i] = x;
        exp[i + group] = x;
        log[x as usize] = i as u32;
        x = mul_shift_reduce(x, generator, spec.m, spec.poly);
    }
    LogTables { log, exp }
}

fn multiplicative_order(g: u32, spec: FieldSpec) -> usize {
    let mut x = g;
    let mut n = 1;
    while x != 1 {
        x = mul_shift_reduce(x, g, spec.m, spec.poly);
        n += 1;
        if n > spec.order() as usize {
            return 0;
        }
    }
    n
}

/// `rows x alphas.len()` matrix with entry (i, c) = alphas[c]^i.
pub fn vandermonde_matrix(field: &GaloisField, alphas: &[u32], rows: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(rows);
    let mut current = vec![1u32; alphas.len()];
    for _ in 0..rows {
        out.push(current.clone());
        for (c, a) in current.iter_mut().zip(alphas) {
            *c = field.mul_raw(*c, *a);
        }
    }
    out
}

/// Gauss-Jordan inversion of a square matrix.
pub fn invert_matrix(field: &GaloisField, mut a: Vec<Vec<u32>>) -> Result<Vec<Vec<u32>>> {
    let n = a.len();
    let mut inv: Vec<Vec<u32>> = (0..n)
        .map(|i| (0..n).map(|j| u32::from(i == j)).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| a[r][col] != 0)
            .ok_or_else(|| CdcError::Decode("singular coefficient matrix".into()))?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = field.inv_raw(a[col][col])?;
        for j in 0..n {
            a[col][j] = field.mul_raw(a[col][j], scale);
            inv[col][j] = field.mul_raw(inv[col][j], scale);
        }
        for r in 0..n {
            if r == col || a[r][col] == 0 {
                continue;
            }
            let f = a[r][col];
            for j in 0..n {
                a[r][j] ^= field.mul_raw(f, a[col][j]);
                inv[r][j] ^= field.mul_raw(f, inv[col][j]);
            }
        }
    }
    Ok(inv)
}

/// Inverse of the square Vandermonde matrix over the first `n` alphas,
/// reusable across many right-hand sides.
#[derive(Clone, Debug)]
pub struct VandermondeInverse {
    inverse: Vec<Vec<u32>>,
}

impl VandermondeInverse {
    pub fn new(field: &GaloisField, alphas: &[u32], n: usize) -> Result<Self> {
        if n > alphas.len() {
            return Err(CdcError::NotEnoughCoefficients {
                needed: n,
                available: alphas.len(),
            });
        }
        let chosen = &alphas[..n];
        for (i, a) in chosen.iter().enumerate() {
            if chosen[..i].contains(a) {
                return Err(CdcError::SingularVandermonde(*a));
            }
        }
        let matrix = vandermonde_matrix(field, chosen, n);
        Ok(Self {
            inverse: invert_matrix(field, matrix)?,
        })
    }

    pub fn size(&self) -> usize {
        self.inverse.len()
    }

    /// Solves for the unknown vectors given one right-hand-side vector per row.
    pub fn apply(&self, field: &GaloisField, rhs: &[Vec<u32>]) -> Result<Vec<Vec<u32>>> {
        let n = self.inverse.len();
        if rhs.len() != n {
            return Err(CdcError::Decode(format!(
                "expected {n} right-hand sides, got {}",
                rhs.len()
            )));
        }
        let width = rhs.first().map_or(0, Vec::len);
        if rhs.iter().any(|v| v.len() != width) {
            return Err(CdcError::Decode(
                "right-hand sides have unequal lengths".into(),
            ));
        }
        let mut out = vec![vec![0u32; width]; n];
        for (c, row) in self.inverse.iter().enumerate() {
            for (coef, y) in row.iter().zip(rhs) {
                if *coef == 0 {
                    continue;
                }
                for (o, w) in out[c].iter_mut().zip(y) {
                    *o ^= field.mul_raw(*coef, *w);
                }
            }
        }
        Ok(out)
    }
}

/// Solves `sum_c alphas[c]^i * u_c = rhs_i` for i in 0..n, using the first `n`
/// alphas. Every vector is a sequence of field words processed position-wise.
pub fn vandermonde_solve(
    field: &GaloisField,
    alphas: &[u32],
    n: usize,
    rhs: &[Vec<u32>],
) -> Result<Vec<Vec<u32>>> {
    VandermondeInverse::new(field, alphas, n)?.apply(field, rhs)
}
