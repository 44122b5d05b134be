//! Arithmetic in GF(2^m) for 3 <= m <= 8 via log/antilog tables.

/// Primitive polynomials, indexed by `m`, with the `x^m` term included.
const PRIMITIVE: [u32; 9] = [0, 0, 0, 0b1011, 0b1_0011, 0b10_0101, 0b100_0011, 0b1000_1001, 0b1_0001_1101];

#[derive(Debug, Clone)]
pub(crate) struct Field {
    m: u32,
    order: usize,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl Field {
    pub(crate) fn new(m: u32) -> Self {
        assert!((3..=8).contains(&m), "unsupported field degree {m}");
        let order = (1usize << m) - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; order + 1];
        let mut x: u32 = 1;
        for k in 0..order {
            exp[k] = x as u16;
            log[x as usize] = k as u16;
            x <<= 1;
            if x & (1 << m) != 0 {
                x ^= PRIMITIVE[m as usize];
            }
        }
        for k in order..2 * order {
            exp[k] = exp[k - order];
        }
        Self { m, order, exp, log }
    }

    pub(crate) fn degree(&self) -> u32 {
        self.m
    }

    /// Multiplicative order, `2^m - 1`, which is also the code length.
    pub(crate) fn order(&self) -> usize {
        self.order
    }

    /// `alpha^k` for any integer exponent.
    #[inline]
    pub(crate) fn pow_alpha(&self, k: i64) -> u16 {
        self.exp[k.rem_euclid(self.order as i64) as usize]
    }

    #[inline]
    pub(crate) fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    #[inline]
    pub(crate) fn div(&self, a: u16, b: u16) -> u16 {
        assert!(b != 0, "division by zero in GF(2^m)");
        if a == 0 {
            0
        } else {
            let e = self.log[a as usize] as usize + self.order - self.log[b as usize] as usize;
            self.exp[e % self.order]
        }
    }

    #[inline]
    pub(crate) fn log(&self, a: u16) -> usize {
        debug_assert!(a != 0);
        self.log[a as usize] as usize
    }
}
