//! Dense matrix products used by the query pipeline.
//!
//! All matrices are row-major `f64` slices. Implement [`MatMul`] to swap in a
//! different kernel.

pub trait MatMul: Send + Sync + std::fmt::Debug {
    /// `out (m x n) = a (m x k) * b^T`, where `b` is `n x k`. Overwrites `out`.
    fn mul_transposed(&self, a: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]);
}

fn check_shapes(a: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &[f64]) {
    assert_eq!(a.len(), m * k, "left operand shape");
    assert_eq!(b.len(), n * k, "right operand shape");
    assert_eq!(out.len(), m * n, "output shape");
}

/// Textbook triple loop, kept as a reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveMatMul;

impl MatMul for NaiveMatMul {
    fn mul_transposed(&self, a: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]) {
        check_shapes(a, b, m, n, k, out);
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for c in 0..k {
                    s += a[i * k + c] * b[j * k + c];
                }
                out[i * n + j] = s;
            }
        }
    }
}

/// Cache-blocked kernel with a 4x4 register tile.
#[derive(Debug, Clone, Copy)]
pub struct BlockedMatMul {
    pub block_rows: usize,
    pub block_depth: usize,
}

impl Default for BlockedMatMul {
    fn default() -> Self {
        Self {
            block_rows: 64,
            block_depth: 256,
        }
    }
}

const TILE: usize = 4;

#[inline(always)]
fn tile_4x4(a: &[f64], b: &[f64], k: usize, i: usize, j: usize, c0: usize, c1: usize) -> [[f64; TILE]; TILE] {
    let mut acc = [[0.0f64; TILE]; TILE];
    let ar: [&[f64]; TILE] = std::array::from_fn(|r| &a[(i + r) * k + c0..(i + r) * k + c1]);
    let br: [&[f64]; TILE] = std::array::from_fn(|r| &b[(j + r) * k + c0..(j + r) * k + c1]);
    for c in 0..c1 - c0 {
        let av = [ar[0][c], ar[1][c], ar[2][c], ar[3][c]];
        let bv = [br[0][c], br[1][c], br[2][c], br[3][c]];
        for r in 0..TILE {
            for s in 0..TILE {
                acc[r][s] += av[r] * bv[s];
            }
        }
    }
    acc
}

impl MatMul for BlockedMatMul {
    fn mul_transposed(&self, a: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]) {
        check_shapes(a, b, m, n, k, out);
        out.fill(0.0);
        let mb = self.block_rows.max(TILE);
        let kb = self.block_depth.max(1);
        for c0 in (0..k).step_by(kb) {
            let c1 = (c0 + kb).min(k);
            for i0 in (0..m).step_by(mb) {
                let i1 = (i0 + mb).min(m);
                for j0 in (0..n).step_by(mb) {
                    let j1 = (j0 + mb).min(n);
                    let mut i = i0;
                    while i < i1 {
                        let full_i = i + TILE <= i1;
                        let mut j = j0;
                        while j < j1 {
                            if full_i && j + TILE <= j1 {
                                let acc = tile_4x4(a, b, k, i, j, c0, c1);
                                for (r, row) in acc.iter().enumerate() {
                                    let o = &mut out[(i + r) * n + j..(i + r) * n + j + TILE];
                                    for (dst, v) in o.iter_mut().zip(row) {
                                        *dst += v;
                                    }
                                }
                                j += TILE;
                            } else {
                                let ie = if full_i { i + TILE } else { i1 };
                                let je = if full_i { j + 1 } else { j1 };
                                for ii in i..ie {
                                    for jj in j..je {
                                        let s = crate::sketch::dot(&a[ii * k + c0..ii * k + c1], &b[jj * k + c0..jj * k + c1]);
                                        out[ii * n + jj] += s;
                                    }
                                }
                                j = je;
                            }
                        }
                        i = if full_i { i + TILE } else { i1 };
                    }
                }
            }
        }
    }
}
