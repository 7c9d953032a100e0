//! Table-driven arithmetic for the small finite fields GF(p^n) used by the
//! line-scheme constructions, including the quadratic towers F_q ⊂ F_{q²}.
//!
//! Every context enumerates its elements once and fixes that order for the
//! life of the program: element `i` has coordinate vector equal to the
//! base-p digits of `i`, constants first. All later constructions (trace
//! classes, relation labels, reports) inherit their determinism from this
//! order. Multiplication goes through exp/log tables over a generator of
//! the multiplicative group, so a context for GF(4096) costs a few tens of
//! kilobytes and every field operation is O(1).

use std::sync::Arc;

use crate::{Error, Result};

/// A field element, identified by its index in the owning context's
/// enumeration order. Only meaningful together with a [`Gf`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Fe(pub u16);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// A point of the projective line PG(1,·): a field element or ∞.
///
/// `∞` compares equal only to `∞`; the derived order puts finite elements
/// (in enumeration order) before `∞`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum ProjElem {
    Finite(Fe),
    Infinity,
}

impl ProjElem {
    pub fn finite(self) -> Option<Fe> {
        match self {
            ProjElem::Finite(x) => Some(x),
            ProjElem::Infinity => None,
        }
    }

    pub fn is_infinity(self) -> bool {
        matches!(self, ProjElem::Infinity)
    }
}

impl From<Fe> for ProjElem {
    fn from(x: Fe) -> Self {
        ProjElem::Finite(x)
    }
}

/// Default irreducible polynomials over GF(2), as coefficient bit masks
/// (bit i = coefficient of x^i). Fixed so that element enumeration — and
/// with it every relation label in a report — is reproducible across runs.
const DEFAULT_BINARY_POLYS: [(u32, u64); 7] = [
    (2, 0x7),   // x^2 + x + 1
    (3, 0xB),   // x^3 + x + 1
    (4, 0x13),  // x^4 + x + 1
    (5, 0x25),  // x^5 + x^2 + 1
    (6, 0x43),  // x^6 + x + 1
    (7, 0x83),  // x^7 + x + 1
    (8, 0x11D), // x^8 + x^4 + x^3 + x^2 + 1
];

enum Repr {
    /// GF(2^n) with elements as coefficient bit masks modulo `poly`.
    Binary { poly: u64 },
    /// GF(p), p an odd prime; elements are residues.
    Prime,
    /// Quadratic step over `parent` = F_q: elements are a + b·y with
    /// index a + b·q. For characteristic 2 the step polynomial is
    /// y² + y + ν (ν of absolute trace 1, so x ↦ x^q swaps y ↦ y + 1);
    /// for odd characteristic it is y² − d with d a non-square.
    Tower { parent: Arc<Gf>, step: Fe },
}

/// An immutable finite-field context. Construct once, share via `Arc`.
pub struct Gf {
    repr: Repr,
    p: u32,
    /// Extension degree over the prime field.
    degree: u32,
    order: usize,
    /// exp[i] = g^i for a fixed generator g, i in 0..order-1.
    exp: Vec<u16>,
    /// log[x] for x != 0; log[0] is unused.
    log: Vec<u32>,
    /// Odd characteristic only: full addition table (order²).
    add_t: Vec<u16>,
    /// Odd characteristic only: negation table.
    neg_t: Vec<u16>,
    /// Square roots: total in characteristic 2, partial for odd.
    sqrt_t: Vec<Option<Fe>>,
    /// x ↦ x^p.
    frob_t: Vec<u16>,
    /// Towers only: x ↦ x^q, q the parent order.
    rel_frob_t: Vec<u16>,
    /// Characteristic 2 only: absolute trace bit per element.
    trace_t: Vec<u8>,
    /// Characteristic 2 only: one root z of z² + z = w per solvable w.
    artin_t: Vec<Option<Fe>>,
    /// Odd characteristic only: nonzero-square indicator.
    square_t: Vec<bool>,
}

impl std::fmt::Debug for Gf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Gf({}^{} = {})", self.p, self.degree, self.order)
    }
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn poly2_degree(mask: u64) -> u32 {
    63 - mask.leading_zeros()
}

fn poly2_rem(mut a: u64, b: u64) -> u64 {
    let db = poly2_degree(b);
    while a != 0 {
        let da = poly2_degree(a);
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

/// Exhaustive factor test for a polynomial mask over GF(2): trial division
/// by every monic polynomial of degree 1..=deg/2.
fn binary_irreducible(mask: u64) -> std::result::Result<(), u64> {
    let deg = poly2_degree(mask);
    for d in 1..=deg / 2 {
        for low in 0..(1u64 << d) {
            let cand = (1u64 << d) | low;
            if poly2_rem(mask, cand) == 0 {
                return Err(cand);
            }
        }
    }
    Ok(())
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

impl Gf {
    /// GF(p) for an odd prime p (GF(2) goes through [`Gf::binary`]).
    pub fn prime(p: u32) -> Result<Arc<Gf>> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if p == 2 {
            return Gf::binary_with_poly(1, 0x2);
        }
        Gf::finish(Repr::Prime, p, 1, p as usize)
    }

    /// GF(2^degree) with the default polynomial from the built-in table.
    pub fn binary(degree: u32) -> Result<Arc<Gf>> {
        if degree == 1 {
            return Gf::binary_with_poly(1, 0x2);
        }
        let mask = DEFAULT_BINARY_POLYS
            .iter()
            .find(|(d, _)| *d == degree)
            .map(|(_, m)| *m)
            .ok_or_else(|| Error::UnsupportedField(format!("no default polynomial for GF(2^{degree})")))?;
        Gf::binary_with_poly(degree, mask)
    }

    /// GF(2^degree) with an explicit polynomial mask (bit i = coefficient
    /// of x^i; the mask must have degree `degree`).
    pub fn binary_with_poly(degree: u32, poly: u64) -> Result<Arc<Gf>> {
        if degree == 0 || degree > 12 {
            return Err(Error::UnsupportedField(format!("degree {degree} out of range")));
        }
        if poly2_degree(poly) != degree {
            return Err(Error::UnsupportedField(format!(
                "polynomial 0x{poly:x} does not have degree {degree}"
            )));
        }
        if degree > 1 {
            if let Err(factor) = binary_irreducible(poly) {
                return Err(Error::ReduciblePoly(poly, factor));
            }
        }
        Gf::finish(Repr::Binary { poly }, 2, degree, 1usize << degree)
    }

    /// General entry point: prime p, degree n, optional polynomial mask
    /// (characteristic 2 only). Odd characteristic is supported for n = 1;
    /// larger fields of odd order are built with [`Gf::extend_quadratic`].
    pub fn field_ctx(p: u32, n: u32, poly: Option<u64>) -> Result<Arc<Gf>> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        match (p, n) {
            (2, n) => match poly {
                Some(mask) => Gf::binary_with_poly(n, mask),
                None => Gf::binary(n),
            },
            (p, 1) => {
                if poly.is_some() {
                    return Err(Error::UnsupportedField(
                        "polynomial masks only apply to characteristic 2".into(),
                    ));
                }
                Gf::prime(p)
            }
            (p, n) => Err(Error::UnsupportedField(format!(
                "GF({p}^{n}): odd non-prime orders are built as quadratic towers"
            ))),
        }
    }

    /// The quadratic tower step F_{q²} over F_q for even q: y² + y + ν with
    /// ν the first element of absolute trace 1 in the base enumeration.
    /// F_q embeds as the elements of index < q, and x ↦ x^q is exposed as
    /// [`Gf::rel_frob`].
    pub fn tower_extend(self: &Arc<Gf>) -> Result<Arc<Gf>> {
        if self.p != 2 {
            return Err(Error::UnsupportedField(
                "tower_extend requires characteristic 2".into(),
            ));
        }
        self.extend_quadratic()
    }

    /// The quadratic extension F_{q²} over F_q for any supported q.
    /// Characteristic 2 uses the Artin-Schreier step of [`Gf::tower_extend`];
    /// odd characteristic uses y² = d with d the first non-square.
    pub fn extend_quadratic(self: &Arc<Gf>) -> Result<Arc<Gf>> {
        if self.order > 4096 {
            return Err(Error::UnsupportedField(format!(
                "extension of GF({}) exceeds the desk-scale bound",
                self.order
            )));
        }
        let step = if self.p == 2 {
            let nu = self
                .iter()
                .find(|&x| self.abs_trace(x) == 1)
                .expect("a trace-1 element exists");
            // y² + y + ν is irreducible iff Tr(ν) = 1; root scan as a check.
            debug_assert!(self.iter().all(|y| self.add(self.mul(y, y), self.add(y, nu)) != Fe::ZERO));
            nu
        } else {
            let d = self
                .iter()
                .find(|&x| x != Fe::ZERO && !self.is_square(x))
                .expect("a non-square exists in odd characteristic");
            debug_assert!(self.iter().all(|y| self.mul(y, y) != d));
            d
        };
        Gf::finish(
            Repr::Tower {
                parent: Arc::clone(self),
                step,
            },
            self.p,
            self.degree * 2,
            self.order * self.order,
        )
    }

    fn finish(repr: Repr, p: u32, degree: u32, order: usize) -> Result<Arc<Gf>> {
        if order > u16::MAX as usize + 1 {
            return Err(Error::UnsupportedField(format!("order {order} too large")));
        }
        let mut gf = Gf {
            repr,
            p,
            degree,
            order,
            exp: Vec::new(),
            log: vec![0; order],
            add_t: Vec::new(),
            neg_t: Vec::new(),
            sqrt_t: Vec::new(),
            frob_t: Vec::new(),
            rel_frob_t: Vec::new(),
            trace_t: Vec::new(),
            artin_t: Vec::new(),
            square_t: Vec::new(),
        };
        gf.build_mul_tables();
        if gf.p != 2 {
            gf.build_odd_add_tables();
        }
        gf.build_unary_tables();
        Ok(Arc::new(gf))
    }

    // ------------------------------------------------------------------
    // Construction-time arithmetic on raw indices (no tables needed).
    // ------------------------------------------------------------------

    fn raw_add(&self, a: usize, b: usize) -> usize {
        match &self.repr {
            Repr::Binary { .. } => a ^ b,
            Repr::Prime => (a + b) % self.p as usize,
            Repr::Tower { parent, .. } => {
                let q = parent.order;
                let lo = parent.raw_add(a % q, b % q);
                let hi = parent.raw_add(a / q, b / q);
                lo + hi * q
            }
        }
    }

    fn raw_mul(&self, a: usize, b: usize) -> usize {
        match &self.repr {
            Repr::Binary { poly } => {
                let mut acc = 0u64;
                let mut a = a as u64;
                let mut b = b as u64;
                let deg = self.degree;
                while b != 0 {
                    if b & 1 != 0 {
                        acc ^= a;
                    }
                    b >>= 1;
                    a <<= 1;
                    if (a >> deg) & 1 != 0 {
                        a ^= poly;
                    }
                }
                acc as usize
            }
            Repr::Prime => a * b % self.p as usize,
            Repr::Tower { parent, step } => {
                let q = parent.order;
                let (a0, a1) = (a % q, a / q);
                let (b0, b1) = (b % q, b / q);
                let m00 = parent.raw_mul(a0, b0);
                let m11 = parent.raw_mul(a1, b1);
                let cross = parent.raw_add(parent.raw_mul(a0, b1), parent.raw_mul(a1, b0));
                let s = step.idx();
                if self.p == 2 {
                    // y² = y + ν
                    let lo = parent.raw_add(m00, parent.raw_mul(m11, s));
                    let hi = parent.raw_add(cross, m11);
                    lo + hi * q
                } else {
                    // y² = d
                    let lo = parent.raw_add(m00, parent.raw_mul(m11, s));
                    lo + cross * q
                }
            }
        }
    }

    fn raw_pow(&self, mut base: usize, mut e: usize) -> usize {
        let mut acc = 1usize;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.raw_mul(acc, base);
            }
            base = self.raw_mul(base, base);
            e >>= 1;
        }
        acc
    }

    fn build_mul_tables(&mut self) {
        let n = self.order - 1;
        if n == 1 {
            self.exp = vec![1];
            self.log[1] = 0;
            return;
        }
        let factors = prime_factors(n);
        let gen = (2..self.order)
            .find(|&g| factors.iter().all(|&f| self.raw_pow(g, n / f) != 1))
            .expect("multiplicative group of a finite field is cyclic");
        self.exp = vec![0; n];
        let mut x = 1usize;
        for i in 0..n {
            self.exp[i] = x as u16;
            self.log[x] = i as u32;
            x = self.raw_mul(x, gen);
        }
        debug_assert_eq!(x, 1);
    }

    fn build_odd_add_tables(&mut self) {
        let n = self.order;
        self.add_t = vec![0; n * n];
        for a in 0..n {
            for b in a..n {
                let s = self.raw_add(a, b) as u16;
                self.add_t[a * n + b] = s;
                self.add_t[b * n + a] = s;
            }
        }
        self.neg_t = vec![0; n];
        for a in 0..n {
            let neg = (0..n).find(|&b| self.raw_add(a, b) == 0).unwrap();
            self.neg_t[a] = neg as u16;
        }
    }

    fn build_unary_tables(&mut self) {
        let n = self.order;
        self.frob_t = (0..n).map(|x| self.raw_pow(x, self.p as usize) as u16).collect();
        if let Repr::Tower { parent, .. } = &self.repr {
            let q = parent.order;
            self.rel_frob_t = (0..n).map(|x| self.raw_pow(x, q) as u16).collect();
        }
        if self.p == 2 {
            // Squaring is a bijection; invert it for square roots.
            self.sqrt_t = vec![None; n];
            for x in 0..n {
                self.sqrt_t[self.frob_t[x] as usize] = Some(Fe(x as u16));
            }
            self.trace_t = (0..n)
                .map(|x| {
                    let mut acc = 0usize;
                    let mut y = x;
                    for _ in 0..self.degree {
                        acc ^= y;
                        y = self.frob_t[y] as usize;
                    }
                    debug_assert!(acc <= 1);
                    acc as u8
                })
                .collect();
            self.artin_t = vec![None; n];
            for z in 0..n {
                let w = self.frob_t[z] as usize ^ z;
                if self.artin_t[w].is_none() {
                    self.artin_t[w] = Some(Fe(z as u16));
                }
            }
        } else {
            self.square_t = vec![false; n];
            self.sqrt_t = vec![None; n];
            self.sqrt_t[0] = Some(Fe::ZERO);
            for x in 1..n {
                let sq = self.raw_mul(x, x);
                self.square_t[sq] = true;
                if self.sqrt_t[sq].is_none() {
                    self.sqrt_t[sq] = Some(Fe(x as u16));
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Field operations.
    // ------------------------------------------------------------------

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    /// Extension degree over the prime field.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The tower parent F_q, if this context is a quadratic step.
    pub fn parent(&self) -> Option<&Arc<Gf>> {
        match &self.repr {
            Repr::Tower { parent, .. } => Some(parent),
            _ => None,
        }
    }

    /// The step constant: ν for characteristic 2 (y²+y+ν), d for odd (y²=d).
    pub fn step_const(&self) -> Option<Fe> {
        match &self.repr {
            Repr::Tower { step, .. } => Some(*step),
            _ => None,
        }
    }

    /// Defining polynomial mask for binary base fields.
    pub fn poly_mask(&self) -> Option<u64> {
        match &self.repr {
            Repr::Binary { poly } => Some(*poly),
            _ => None,
        }
    }

    pub fn el(&self, idx: usize) -> Fe {
        debug_assert!(idx < self.order);
        Fe(idx as u16)
    }

    pub fn iter(&self) -> impl Iterator<Item = Fe> {
        (0..self.order as u16).map(Fe)
    }

    /// Coordinates over the prime field, constants first (base-p digits of
    /// the index).
    pub fn coords(&self, x: Fe) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.degree as usize);
        let mut v = x.idx();
        for _ in 0..self.degree {
            out.push((v % self.p as usize) as u32);
            v /= self.p as usize;
        }
        out
    }

    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        if self.p == 2 {
            Fe(a.0 ^ b.0)
        } else {
            Fe(self.add_t[a.idx() * self.order + b.idx()])
        }
    }

    pub fn neg(&self, a: Fe) -> Fe {
        if self.p == 2 {
            a
        } else {
            Fe(self.neg_t[a.idx()])
        }
    }

    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        if a == Fe::ZERO || b == Fe::ZERO {
            return Fe::ZERO;
        }
        let n = self.order - 1;
        let mut i = self.log[a.idx()] as usize + self.log[b.idx()] as usize;
        if i >= n {
            i -= n;
        }
        Fe(self.exp[i])
    }

    /// Multiplicative inverse; panics on zero (callers guard).
    pub fn inv(&self, a: Fe) -> Fe {
        assert!(a != Fe::ZERO, "inverse of zero");
        let n = self.order - 1;
        let i = self.log[a.idx()] as usize;
        Fe(self.exp[(n - i) % n])
    }

    pub fn div(&self, a: Fe, b: Fe) -> Fe {
        self.mul(a, self.inv(b))
    }

    pub fn sq(&self, a: Fe) -> Fe {
        self.mul(a, a)
    }

    pub fn pow(&self, a: Fe, e: usize) -> Fe {
        if a == Fe::ZERO {
            return if e == 0 { Fe::ONE } else { Fe::ZERO };
        }
        let n = self.order - 1;
        let i = self.log[a.idx()] as usize * (e % n) % n;
        Fe(self.exp[i])
    }

    pub fn sqrt(&self, a: Fe) -> Option<Fe> {
        self.sqrt_t[a.idx()]
    }

    /// x ↦ x^p.
    pub fn frobenius(&self, a: Fe) -> Fe {
        Fe(self.frob_t[a.idx()])
    }

    /// A fixed generator of the multiplicative group (the base of the
    /// exp/log tables).
    pub fn generator(&self) -> Fe {
        if self.order <= 2 {
            Fe::ONE
        } else {
            Fe(self.exp[1])
        }
    }

    /// Discrete log with respect to [`Gf::generator`]; `None` for zero.
    pub fn log_of(&self, x: Fe) -> Option<u32> {
        if x == Fe::ZERO {
            None
        } else {
            Some(self.log[x.idx()])
        }
    }

    /// Relative Frobenius x ↦ x^q of a tower step; the identity on base
    /// contexts.
    pub fn rel_frob(&self, a: Fe) -> Fe {
        if self.rel_frob_t.is_empty() {
            a
        } else {
            Fe(self.rel_frob_t[a.idx()])
        }
    }

    /// Membership in the embedded tower subfield F_q (everything, for a
    /// base context).
    pub fn in_subfield(&self, a: Fe) -> bool {
        self.rel_frob(a) == a
    }

    /// Subfield order q of a tower (the full order for base contexts).
    pub fn subfield_order(&self) -> usize {
        match &self.repr {
            Repr::Tower { parent, .. } => parent.order,
            _ => self.order,
        }
    }

    /// Embed a parent element into the tower. With the digit encoding this
    /// is the identity on indices; kept explicit for call-site clarity.
    pub fn embed(&self, a: Fe) -> Fe {
        debug_assert!(a.idx() < self.subfield_order());
        a
    }

    /// Project a tower element back to the parent context.
    pub fn to_subfield(&self, a: Fe) -> Option<Fe> {
        if self.in_subfield(a) {
            Some(a)
        } else {
            None
        }
    }

    /// Absolute trace bit (characteristic 2 only).
    pub fn abs_trace(&self, a: Fe) -> u8 {
        assert_eq!(self.p, 2, "absolute trace bit requires characteristic 2");
        self.trace_t[a.idx()]
    }

    /// Nonzero-square test for odd characteristic.
    pub fn is_square(&self, a: Fe) -> bool {
        assert_ne!(self.p, 2);
        a != Fe::ZERO && self.square_t[a.idx()]
    }

    /// All roots of Ax² + Bx + C in this context, multiplicity collapsed,
    /// in enumeration order.
    pub fn solve_quadratic(&self, a: Fe, b: Fe, c: Fe) -> Result<Vec<Fe>> {
        if a == Fe::ZERO && b == Fe::ZERO && c == Fe::ZERO {
            return Err(Error::DegenerateQuadratic);
        }
        if a == Fe::ZERO {
            if b == Fe::ZERO {
                return Ok(vec![]);
            }
            return Ok(vec![self.neg(self.div(c, b))]);
        }
        let mut roots = if self.p == 2 {
            if b == Fe::ZERO {
                // x² = C/A: unique root.
                vec![self.sqrt(self.div(c, a)).unwrap()]
            } else {
                // x = (B/A)z turns the equation into z² + z = AC/B².
                let w = self.div(self.mul(a, c), self.sq(b));
                match self.artin_t[w.idx()] {
                    None => vec![],
                    Some(z0) => {
                        let scale = self.div(b, a);
                        vec![self.mul(scale, z0), self.mul(scale, self.add(z0, Fe::ONE))]
                    }
                }
            }
        } else {
            let four = self.add(self.el(2), self.el(2));
            let disc = self.sub(self.sq(b), self.mul(four, self.mul(a, c)));
            match self.sqrt(disc) {
                None => vec![],
                Some(s) => {
                    let two_a = self.add(a, a);
                    let r1 = self.div(self.sub(self.neg(b), s), two_a);
                    let r2 = self.div(self.add(self.neg(b), s), two_a);
                    if r1 == r2 {
                        vec![r1]
                    } else {
                        vec![r1, r2]
                    }
                }
            }
        };
        roots.sort();
        Ok(roots)
    }
}

/// The trace-class subsets of a context: T₀/T₁ (absolute-trace classes for
/// even order, nonzero squares / non-squares for odd), plus the derived
/// sets T₀* and T₀⁺/T₁⁺ used to index relations.
#[derive(Debug, Clone)]
pub struct TraceClasses {
    pub t0: Vec<Fe>,
    pub t1: Vec<Fe>,
    pub t0_star: Vec<Fe>,
    pub t0_plus: Vec<Fe>,
    pub t1_plus: Vec<Fe>,
    in_t0: Vec<bool>,
    in_t1: Vec<bool>,
}

impl TraceClasses {
    /// Membership in T_e. For odd order, zero is in neither class.
    pub fn in_t(&self, e: u8, x: Fe) -> bool {
        if e == 0 {
            self.in_t0[x.idx()]
        } else {
            self.in_t1[x.idx()]
        }
    }
}

/// Enumerate the trace classes of a context.
pub fn classes(ctx: &Gf) -> TraceClasses {
    let mut t0 = Vec::new();
    let mut t1 = Vec::new();
    let mut in_t0 = vec![false; ctx.order()];
    let mut in_t1 = vec![false; ctx.order()];
    if ctx.characteristic() == 2 {
        for x in ctx.iter() {
            if ctx.abs_trace(x) == 0 {
                t0.push(x);
                in_t0[x.idx()] = true;
            } else {
                t1.push(x);
                in_t1[x.idx()] = true;
            }
        }
    } else {
        for x in ctx.iter() {
            if x == Fe::ZERO {
                continue;
            }
            if ctx.is_square(x) {
                t0.push(x);
                in_t0[x.idx()] = true;
            } else {
                t1.push(x);
                in_t1[x.idx()] = true;
            }
        }
    }
    let t0_star: Vec<Fe> = t0.iter().copied().filter(|&x| x != Fe::ZERO).collect();
    let (t0_plus, t1_plus) = if ctx.characteristic() == 2 {
        (t0.clone(), t1.clone())
    } else {
        let mut a = vec![Fe::ZERO];
        a.extend_from_slice(&t0);
        let mut b = vec![Fe::ZERO];
        b.extend_from_slice(&t1);
        (a, b)
    };
    TraceClasses {
        t0,
        t1,
        t0_star,
        t0_plus,
        t1_plus,
        in_t0,
        in_t1,
    }
}

/// The coset sets of a characteristic-2 tower F_{q²}/F_q: G_r = {x : x^q + x = r}
/// (the additive cosets of F_q) and S_r = {x² + x : x ∈ G_r}, the latter
/// partitioning T₀(q²) into q sets of size q/2.
#[derive(Debug, Clone)]
pub struct TowerCosets {
    /// g[r] = G_r, indexed by the parent element r.
    pub g: Vec<Vec<Fe>>,
    /// s[r] = S_r.
    pub s: Vec<Vec<Fe>>,
    /// For x with x ∈ S_r: s_index[x] = Some(r).
    pub s_index: Vec<Option<u16>>,
}

pub fn tower_cosets(ctx: &Gf) -> Result<TowerCosets> {
    if ctx.characteristic() != 2 || ctx.parent().is_none() {
        return Err(Error::UnsupportedField(
            "coset sets require a characteristic-2 tower".into(),
        ));
    }
    let q = ctx.subfield_order();
    let mut g = vec![Vec::new(); q];
    let mut s = vec![Vec::new(); q];
    let mut s_index = vec![None; ctx.order()];
    for x in ctx.iter() {
        let r = ctx.add(ctx.rel_frob(x), x);
        debug_assert!(r.idx() < q);
        g[r.idx()].push(x);
        let y = ctx.add(ctx.sq(x), x);
        if s_index[y.idx()].is_none() {
            s_index[y.idx()] = Some(r.0);
            s[r.idx()].push(y);
        }
    }
    for list in s.iter_mut() {
        list.sort();
    }
    Ok(TowerCosets { g, s, s_index })
}
