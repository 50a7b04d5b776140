//! Banded LU with partial pivoting, in the column-major band layout of
//! LAPACK's `gbtrf` (`ldab = 2kl + ku + 1`, the top `kl` rows hold fill-in).

#![allow(clippy::needless_range_loop)]

#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SingularPivot(pub usize);

impl BandMatrix {
    pub(crate) fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        col * self.ldab + self.kl + self.ku + row - col
    }

    /// Adds `v` at `(row, col)`; the entry must lie inside the declared band.
    pub(crate) fn add(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(row <= col + self.kl && col <= row + self.ku);
        let i = self.idx(row, col);
        self.ab[i] += v;
    }

    /// Factorises in place; returns the pivot rows.
    pub(crate) fn factor(mut self) -> Result<BandLu, SingularPivot> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.ku + self.kl;
        let ldab = self.ldab;
        let scale = self.ab.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * 1e-3;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let base = j * ldab + kv;
            let mut jp = 0;
            let mut best = self.ab[base].abs();
            for i in 1..=km {
                let v = self.ab[base + i].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if !(best > tiny) {
                return Err(SingularPivot(j));
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[base];
            for i in 1..=km {
                self.ab[base + i] /= pivot;
            }
            for c in (j + 1)..=ju {
                let t = self.ab[self.idx(j, c)];
                if t == 0.0 {
                    continue;
                }
                let col = c * ldab + kv + j - c;
                for i in 1..=km {
                    self.ab[col + i] -= self.ab[base + i] * t;
                }
            }
        }
        Ok(BandLu { m: self, ipiv })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandLu {
    m: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        let kv = m.kl + m.ku;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let lm = m.kl.min(n - 1 - j);
            let base = j * m.ldab + kv;
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=lm {
                    b[j + i] -= m.ab[base + i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let base = j * m.ldab + kv;
            b[j] /= m.ab[base];
            let bj = b[j];
            if bj != 0.0 {
                let top = j.saturating_sub(kv);
                for i in top..j {
                    b[i] -= m.ab[base - (j - i)] * bj;
                }
            }
        }
    }
}
