//! Narrow-sense binary BCH codes of length `2^m - 1`, decoded with
//! syndromes, Berlekamp-Massey and a Chien search.
//!
//! Indices are carried in a systematic message of `k` bits: the low `bits`
//! hold the index, bit `bits` is a marker that must be 1 and every higher
//! message bit must be 0. The all-zero and all-ones words therefore never
//! decode to an index.

use super::gf::Field;
use super::{CodeWord, IndexCode};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BchCode {
    field: Field,
    n_indices: usize,
    index_bits: usize,
    k: usize,
    t: usize,
    /// Codeword for each message basis bit.
    basis: Vec<CodeWord>,
}

/// Roots `alpha^j` of the generator: the union of the cyclotomic cosets of
/// `1..=2t`.
fn generator_roots(order: usize, t: usize) -> Vec<usize> {
    let mut in_set = vec![false; order];
    for i in 1..=2 * t {
        let mut c = i % order;
        while !in_set[c] {
            in_set[c] = true;
            c = (2 * c) % order;
        }
    }
    (0..order).filter(|&j| in_set[j]).collect()
}

/// Generator polynomial coefficients, lowest degree first.
fn generator_poly(field: &Field, t: usize) -> Vec<u8> {
    let mut g: Vec<u16> = vec![1];
    for j in generator_roots(field.order(), t) {
        let root = field.pow_alpha(j as i64);
        let mut next = vec![0u16; g.len() + 1];
        for (d, &c) in g.iter().enumerate() {
            next[d + 1] ^= c;
            next[d] ^= field.mul(c, root);
        }
        g = next;
    }
    g.into_iter()
        .map(|c| {
            debug_assert!(c <= 1, "generator coefficient outside GF(2)");
            c as u8
        })
        .collect()
}

/// Message length `k` of the length-`2^m - 1` code with designed radius `t`.
pub(crate) fn message_len(m: u32, t: usize) -> usize {
    let order = (1usize << m) - 1;
    order - generator_roots(order, t).len()
}

/// Remainder of `x^shift` modulo `g` (bit polynomial, lowest first).
fn rem_monomial(shift: usize, g: &[u8]) -> Vec<u8> {
    let deg = g.len() - 1;
    let mut r = vec![0u8; shift + 1];
    r[shift] = 1;
    for top in (deg..=shift).rev() {
        if r[top] == 1 {
            for (d, &c) in g.iter().enumerate() {
                r[top - deg + d] ^= c;
            }
        }
    }
    r.truncate(deg);
    r
}

pub(crate) fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

impl BchCode {
    /// Code over GF(2^m) correcting `t` errors for indices in `[0, n)`.
    pub fn new(n_indices: usize, m: u32, t: usize) -> Result<Self> {
        if !(3..=8).contains(&m) {
            return Err(Error::Parameter(format!("BCH field degree {m} outside 3..=8")));
        }
        if n_indices < 1 || t < 1 {
            return Err(Error::Parameter("BCH code needs n >= 1 and t >= 1".into()));
        }
        let field = Field::new(m);
        let len = field.order();
        let g = generator_poly(&field, t);
        let parity = g.len() - 1;
        if parity >= len {
            return Err(Error::Parameter(format!("t = {t} leaves no message bits at length {len}")));
        }
        let k = len - parity;
        let index_bits = ceil_log2(n_indices);
        if k < index_bits + 2 {
            return Err(Error::Parameter(format!(
                "BCH({len}, {k}) cannot carry {index_bits} index bits plus 2 framing bits"
            )));
        }
        let basis = (0..k)
            .map(|u| {
                let mut w = CodeWord::zeros(len);
                let pos = parity + u;
                w.set(pos, true);
                for (d, &c) in rem_monomial(pos, &g).iter().enumerate() {
                    if c == 1 {
                        w.set(d, true);
                    }
                }
                w
            })
            .collect();
        Ok(Self {
            field,
            n_indices,
            index_bits,
            k,
            t,
            basis,
        })
    }

    /// Shortest code (smallest `m`) whose relative radius `t / len` reaches
    /// `min_lambda`, taking the largest `t` that still fits the index.
    pub fn select(n_indices: usize, min_lambda: f64) -> Result<Self> {
        let need = ceil_log2(n_indices) + 2;
        for m in 3..=8u32 {
            let len = (1usize << m) - 1;
            let mut best = None;
            let mut t = 1;
            while 2 * t < len && message_len(m, t) >= need {
                best = Some(t);
                t += 1;
            }
            if let Some(t) = best {
                if t as f64 / len as f64 >= min_lambda {
                    return Self::new(n_indices, m, t);
                }
            }
        }
        Err(Error::Parameter(format!(
            "no BCH code of length <= 255 carries {n_indices} indices with lambda >= {min_lambda}"
        )))
    }

    pub fn message_len(&self) -> usize {
        self.k
    }

    pub fn field_degree(&self) -> u32 {
        self.field.degree()
    }

    fn parity_len(&self) -> usize {
        self.field.order() - self.k
    }

    fn syndromes(&self, w: &CodeWord) -> Vec<u16> {
        let mut s = vec![0u16; 2 * self.t];
        for e in w.ones() {
            for (j, sj) in s.iter_mut().enumerate() {
                *sj ^= self.field.pow_alpha(((j + 1) * e) as i64);
            }
        }
        s
    }

    /// Error locator via Berlekamp-Massey; `None` when its degree exceeds `t`.
    fn locator(&self, s: &[u16]) -> Option<Vec<u16>> {
        let f = &self.field;
        let mut c = vec![1u16];
        let mut b = vec![1u16];
        let mut l = 0usize;
        let mut shift = 1usize;
        let mut last = 1u16;
        for step in 0..s.len() {
            let mut disc = s[step];
            for i in 1..=l.min(c.len() - 1) {
                disc ^= f.mul(c[i], s[step - i]);
            }
            if disc == 0 {
                shift += 1;
                continue;
            }
            let coef = f.div(disc, last);
            let mut next = c.clone();
            if next.len() < b.len() + shift {
                next.resize(b.len() + shift, 0);
            }
            for (i, &bi) in b.iter().enumerate() {
                next[i + shift] ^= f.mul(coef, bi);
            }
            if 2 * l <= step {
                l = step + 1 - l;
                b = std::mem::replace(&mut c, next);
                last = disc;
                shift = 1;
            } else {
                c = next;
                shift += 1;
            }
        }
        while c.len() > 1 && *c.last().unwrap() == 0 {
            c.pop();
        }
        (c.len() - 1 == l && l <= self.t).then_some(c)
    }

    /// Nearest codeword within `t` flips, if the decoder finds one.
    fn correct(&self, w: &CodeWord) -> Option<CodeWord> {
        let s = self.syndromes(w);
        if s.iter().all(|&x| x == 0) {
            return Some(w.clone());
        }
        let lambda = self.locator(&s)?;
        let degree = lambda.len() - 1;
        let len = self.field.order();
        let mut fixed = w.clone();
        let mut found = 0;
        for e in 0..len {
            // Error at position e <=> lambda(alpha^-e) = 0.
            let mut acc = 0u16;
            for (i, &li) in lambda.iter().enumerate() {
                if li != 0 {
                    let exp = self.field.log(li) as i64 - (e * i) as i64;
                    acc ^= self.field.pow_alpha(exp);
                }
            }
            if acc == 0 {
                fixed.flip(e);
                found += 1;
            }
        }
        (found == degree).then_some(fixed)
    }

    fn message_of(&self, c: &CodeWord) -> Option<usize> {
        let base = self.parity_len();
        let mut index = 0usize;
        for u in 0..self.index_bits {
            if c.get(base + u) {
                index |= 1 << u;
            }
        }
        if !c.get(base + self.index_bits) {
            return None;
        }
        if (self.index_bits + 1..self.k).any(|u| c.get(base + u)) {
            return None;
        }
        (index < self.n_indices).then_some(index)
    }
}

impl IndexCode for BchCode {
    fn index_space(&self) -> usize {
        self.n_indices
    }

    fn len(&self) -> usize {
        self.field.order()
    }

    fn max_errors(&self) -> usize {
        self.t
    }

    fn encode(&self, i: usize) -> CodeWord {
        let mut w = CodeWord::zeros(self.len());
        let message = i | (1 << self.index_bits);
        for (u, b) in self.basis.iter().enumerate() {
            if message >> u & 1 == 1 {
                w.xor_assign(b);
            }
        }
        w
    }

    fn decode(&self, w: &CodeWord) -> Option<usize> {
        // Within t of the zero codeword, which carries no index.
        if w.count_ones() <= self.t {
            return None;
        }
        let c = self.correct(w)?;
        let i = self.message_of(&c)?;
        let mut diff = self.encode(i);
        diff.xor_assign(w);
        (diff.count_ones() <= self.t).then_some(i)
    }

    fn describe(&self) -> String {
        format!("BCH({}, {}, t = {})", self.len(), self.k, self.t)
    }
}
