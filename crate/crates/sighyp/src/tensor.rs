//! Truncated tensor algebra T^(N)(ℝ^d).
//!
//! Level n is stored densely as d^n coefficients; the word (i₁,…,i_n) with
//! letters in 1..=d sits at index Σ (i_k − 1)·d^{n−k}.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Hard cap on the total number of stored coefficients.
pub const MAX_COEFFS: u128 = 100_000_000;

/// A word over the alphabet {1..d}; letters are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index(&self, d: usize) -> Result<usize> {
        let mut idx = 0usize;
        for &l in &self.0 {
            if l == 0 || l > d {
                return Err(Error::Range(format!("letter {l} outside 1..={d}")));
            }
            idx = idx * d + (l - 1);
        }
        Ok(idx)
    }

    pub fn from_index(mut idx: usize, n: usize, d: usize) -> Word {
        let mut letters = vec![0; n];
        for slot in letters.iter_mut().rev() {
            *slot = idx % d + 1;
            idx /= d;
        }
        Word(letters)
    }

    pub fn parse(s: &str) -> Result<Word> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word(vec![]));
        }
        s.split('.')
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| Error::Config(format!("bad word letter {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(".")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTensor {
    dim: usize,
    coeffs: Vec<Vec<f64>>,
}

fn check_size(d: usize, n: usize) -> Result<()> {
    let mut total: u128 = 0;
    let mut p: u128 = 1;
    for _ in 0..=n {
        total += p;
        if total > MAX_COEFFS {
            return Err(Error::TooLarge { coeffs: total, limit: MAX_COEFFS });
        }
        p *= d as u128;
    }
    Ok(())
}

impl TruncatedTensor {
    pub fn zeros(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Shape("dimension must be ≥ 1".into()));
        }
        check_size(d, n)?;
        let coeffs = (0..=n).map(|k| vec![0.0; d.pow(k as u32)]).collect();
        Ok(TruncatedTensor { dim: d, coeffs })
    }

    /// The unit 𝟏 = (1, 0, 0, …).
    pub fn unit(d: usize, n: usize) -> Result<Self> {
        let mut t = Self::zeros(d, n)?;
        t.coeffs[0][0] = 1.0;
        Ok(t)
    }

    pub fn from_levels(d: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Shape("need at least level 0".into()));
        }
        check_size(d, levels.len() - 1)?;
        for (n, lv) in levels.iter().enumerate() {
            if lv.len() != d.pow(n as u32) {
                return Err(Error::Shape(format!(
                    "level {n} has {} entries, expected {}",
                    lv.len(),
                    d.pow(n as u32)
                )));
            }
            if lv.iter().any(|x| !x.is_finite()) {
                return Err(Error::Shape(format!("non-finite entry at level {n}")));
            }
        }
        Ok(TruncatedTensor { dim: d, coeffs: levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Truncation order N.
    pub fn level(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn proj(&self, n: usize) -> &[f64] {
        &self.coeffs[n]
    }

    pub fn proj_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.coeffs[n]
    }

    pub fn get(&self, w: &Word) -> Result<f64> {
        if w.len() > self.level() {
            return Err(Error::Range(format!("word {w} longer than level {}", self.level())));
        }
        Ok(self.coeffs[w.len()][w.index(self.dim)?])
    }

    pub fn set(&mut self, w: &Word, v: f64) -> Result<()> {
        if w.len() > self.level() {
            return Err(Error::Range(format!("word {w} longer than level {}", self.level())));
        }
        let i = w.index(self.dim)?;
        self.coeffs[w.len()][i] = v;
        Ok(())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.level() != other.level() {
            return Err(Error::Shape(format!(
                "(d={}, N={}) vs (d={}, N={})",
                self.dim,
                self.level(),
                other.dim,
                other.level()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// λ𝐚: every level multiplied by λ (not the grading; see [`Self::dilation`]).
    pub fn scale(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().flatten().for_each(|x| *x *= lambda);
        out
    }

    /// Level n multiplied by λ^n.
    pub fn dilation(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        let mut p = 1.0;
        for lv in out.coeffs.iter_mut() {
            lv.iter_mut().for_each(|x| *x *= p);
            p *= lambda;
        }
        out
    }

    /// Truncated Cauchy product c_n = Σ_k a_k ⊗ b_{n−k}.
    pub fn tensor_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let d = self.dim;
        let mut out = Self::zeros(d, self.level())?;
        for n in 0..=self.level() {
            let c = &mut out.coeffs[n];
            for k in 0..=n {
                let a = &self.coeffs[k];
                let b = &other.coeffs[n - k];
                let stride = b.len();
                for (iu, &au) in a.iter().enumerate() {
                    if au == 0.0 {
                        continue;
                    }
                    let row = &mut c[iu * stride..(iu + 1) * stride];
                    row.iter_mut().zip(b).for_each(|(x, &bv)| *x += au * bv);
                }
            }
        }
        Ok(out)
    }

    /// In place `self ← self ⊗ exp(v)`, the Chen update for one straight segment.
    pub fn mul_segment_exp(&mut self, v: &[f64]) -> Result<()> {
        let d = self.dim;
        if v.len() != d {
            return Err(Error::Shape(format!("increment has {} entries, d = {d}", v.len())));
        }
        if v.iter().all(|&x| x == 0.0) {
            return Ok(());
        }
        // Horner per level, highest first so lower levels are still the old ones.
        let top = self.coeffs[self.level()].len();
        let mut a: Vec<f64> = Vec::with_capacity(top);
        let mut b: Vec<f64> = Vec::with_capacity(top);
        for n in (1..=self.level()).rev() {
            a.clear();
            a.push(self.coeffs[0][0]);
            for j in 1..=n {
                let inv = 1.0 / (n - j + 1) as f64;
                b.clear();
                b.extend_from_slice(&self.coeffs[j]);
                for (iu, &tu) in a.iter().enumerate() {
                    let s = tu * inv;
                    for (x, &vi) in b[iu * d..(iu + 1) * d].iter_mut().zip(v) {
                        *x += s * vi;
                    }
                }
                std::mem::swap(&mut a, &mut b);
            }
            self.coeffs[n].copy_from_slice(&a);
        }
        Ok(())
    }

    /// ℓ¹ norm of level n (equals the projective norm for the ℓ¹ base norm).
    pub fn l1_norm_level(&self, n: usize) -> Result<f64> {
        self.coeffs
            .get(n)
            .map(|lv| lv.iter().map(|x| x.abs()).sum())
            .ok_or_else(|| Error::Range(format!("level {n} > N = {}", self.level())))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .coeffs
            .iter()
            .flatten()
            .zip(other.coeffs.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Iterate `(level, word, value)` in file order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, Word, f64)> + '_ {
        let d = self.dim;
        self.coeffs.iter().enumerate().flat_map(move |(n, lv)| {
            lv.iter().enumerate().map(move |(i, &x)| (n, Word::from_index(i, n, d), x))
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "level,word,value")?;
        for (n, word, x) in self.entries() {
            writeln!(w, "{n},{word},{x:e}")?;
        }
        Ok(())
    }

    /// Reads the `level,word,value` format. Missing entries are zero.
    pub fn read_csv<R: BufRead>(r: R, d: usize) -> Result<Self> {
        let mut rows = vec![];
        let mut max_level = 0;
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            if ln == 0 || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Parse { line: ln + 1, msg: "expected 3 fields".into() });
            }
            let perr = |m: String| Error::Parse { line: ln + 1, msg: m };
            let n: usize = parts[0].trim().parse().map_err(|e| perr(format!("{e}")))?;
            let w = Word::parse(parts[1]).map_err(|e| perr(e.to_string()))?;
            let x: f64 = parts[2].trim().parse().map_err(|e| perr(format!("{e}")))?;
            if w.len() != n {
                return Err(perr(format!("word {w} does not have length {n}")));
            }
            max_level = max_level.max(n);
            rows.push((w, x));
        }
        let mut t = Self::zeros(d, max_level)?;
        for (w, x) in rows {
            t.set(&w, x)?;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor_strategy(d: usize, n: usize) -> impl Strategy<Value = TruncatedTensor> {
        let sizes: Vec<usize> = (0..=n).map(|k| d.pow(k as u32)).collect();
        sizes
            .into_iter()
            .map(|s| prop::collection::vec(-2.0f64..2.0, s))
            .collect::<Vec<_>>()
            .prop_map(move |lv| TruncatedTensor::from_levels(d, lv).unwrap())
    }

    #[test]
    fn unit_layout() {
        let u = TruncatedTensor::unit(2, 2).unwrap();
        assert_eq!(u.proj(0), &[1.0]);
        assert_eq!(u.proj(1), &[0.0, 0.0]);
        assert_eq!(u.proj(2), &[0.0; 4]);
        assert_eq!(TruncatedTensor::unit(3, 4).unwrap().proj(0)[0], 1.0);
    }

    #[test]
    fn word_index_roundtrip() {
        let w = Word(vec![1, 2, 1]);
        assert_eq!(w.index(2).unwrap(), 2);
        assert_eq!(Word::from_index(2, 3, 2), w);
        assert_eq!(w.to_string(), "1.2.1");
        assert_eq!(Word::parse("1.2.1").unwrap(), w);
        assert!(Word(vec![3]).index(2).is_err());
    }

    #[test]
    fn cauchy_product_d1() {
        let a = TruncatedTensor::from_levels(1, vec![vec![1.0], vec![2.0], vec![0.0]]).unwrap();
        let b = TruncatedTensor::from_levels(1, vec![vec![1.0], vec![3.0], vec![0.0]]).unwrap();
        let c = a.tensor_mul(&b).unwrap();
        assert_eq!(c.proj(1), &[5.0]);
        assert_eq!(c.proj(2), &[6.0]);
    }

    #[test]
    fn single_level_product() {
        let mut x = TruncatedTensor::zeros(2, 3).unwrap();
        x.proj_mut(1).copy_from_slice(&[1.5, -2.0]);
        let mut y = TruncatedTensor::zeros(2, 3).unwrap();
        y.proj_mut(1).copy_from_slice(&[0.5, 3.0]);
        let c = x.tensor_mul(&y).unwrap();
        assert_eq!(c.proj(2), &[0.75, 4.5, -1.0, -6.0]);
        assert!(c.proj(0)[0] == 0.0 && c.proj(1).iter().all(|&v| v == 0.0));
        assert!(c.proj(3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn l1_norm() {
        let mut t = TruncatedTensor::zeros(2, 1).unwrap();
        t.proj_mut(1).copy_from_slice(&[3.0, -4.0]);
        assert_eq!(t.l1_norm_level(1).unwrap(), 7.0);
        assert_eq!(TruncatedTensor::unit(2, 1).unwrap().l1_norm_level(0).unwrap(), 1.0);
        assert!(t.l1_norm_level(2).is_err());
    }

    #[test]
    fn scale_vs_dilation() {
        let u = TruncatedTensor::unit(2, 2).unwrap();
        assert_eq!(u.scale(2.0).proj(0), &[2.0]);
        let mut t = TruncatedTensor::unit(1, 2).unwrap();
        t.proj_mut(1)[0] = 1.0;
        t.proj_mut(2)[0] = 1.0;
        let z = t.dilation(0.0);
        assert_eq!(z.proj(0), &[1.0]);
        assert_eq!(z.proj(2), &[0.0]);
        assert_eq!(t.dilation(1.0), t);
    }

    #[test]
    fn mismatch_is_error() {
        let a = TruncatedTensor::unit(2, 2).unwrap();
        let b = TruncatedTensor::unit(3, 2).unwrap();
        assert!(a.add(&b).is_err());
        assert!(a.tensor_mul(&TruncatedTensor::unit(2, 3).unwrap()).is_err());
    }

    #[test]
    fn size_guard() {
        assert!(matches!(TruncatedTensor::zeros(10, 9), Err(Error::TooLarge { .. })));
        assert!(TruncatedTensor::zeros(9, 8).is_ok());
    }

    #[test]
    fn csv_roundtrip() {
        let mut t = TruncatedTensor::unit(2, 2).unwrap();
        t.set(&Word(vec![1, 2]), 0.25).unwrap();
        let mut buf = vec![];
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf.clone()).unwrap();
        assert!(s.starts_with("level,word,value\n0,,"));
        let back = TruncatedTensor::read_csv(&buf[..], 2).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn associativity(a in tensor_strategy(2, 4), b in tensor_strategy(2, 4), c in tensor_strategy(2, 4)) {
            let l = a.tensor_mul(&b).unwrap().tensor_mul(&c).unwrap();
            let r = a.tensor_mul(&b.tensor_mul(&c).unwrap()).unwrap();
            let scale = l.entries().map(|e| e.2.abs()).fold(1.0, f64::max);
            prop_assert!(l.max_abs_diff(&r).unwrap() <= 1e-12 * scale);
        }

        #[test]
        fn unit_laws(a in tensor_strategy(3, 3)) {
            let u = TruncatedTensor::unit(3, 3).unwrap();
            prop_assert_eq!(u.tensor_mul(&a).unwrap(), a.clone());
            prop_assert_eq!(a.tensor_mul(&u).unwrap(), a);
        }

        #[test]
        fn add_assoc_and_inverse(a in tensor_strategy(2, 3), b in tensor_strategy(2, 3), c in tensor_strategy(2, 3)) {
            let l = a.add(&b).unwrap().add(&c).unwrap();
            let r = a.add(&b.add(&c).unwrap()).unwrap();
            prop_assert!(l.max_abs_diff(&r).unwrap() < 1e-14);
            let z = a.add(&a.scale(-1.0)).unwrap();
            prop_assert!(z.entries().all(|e| e.2 == 0.0));
        }

        #[test]
        fn dilation_is_multiplicative(a in tensor_strategy(2, 4), b in tensor_strategy(2, 4), lam in -2.0f64..2.0) {
            let l = a.tensor_mul(&b).unwrap().dilation(lam);
            let r = a.dilation(lam).tensor_mul(&b.dilation(lam)).unwrap();
            prop_assert!(l.max_abs_diff(&r).unwrap() < 1e-10);
        }

        #[test]
        fn l1_submultiplicative(a in tensor_strategy(2, 4), b in tensor_strategy(2, 4)) {
            let c = a.tensor_mul(&b).unwrap();
            for n in 0..=4 {
                let bound: f64 = (0..=n).map(|k| a.l1_norm_level(k).unwrap() * b.l1_norm_level(n - k).unwrap()).sum();
                prop_assert!(c.l1_norm_level(n).unwrap() <= bound * (1.0 + 1e-12));
            }
        }

        #[test]
        fn segment_update_matches_product(a in tensor_strategy(2, 4), v in prop::array::uniform2(-1.5f64..1.5)) {
            let mut e = TruncatedTensor::unit(2, 4).unwrap();
            e.mul_segment_exp(&v).unwrap();
            let want = a.tensor_mul(&e).unwrap();
            let mut got = a.clone();
            got.mul_segment_exp(&v).unwrap();
            prop_assert!(got.max_abs_diff(&want).unwrap() < 1e-12);
        }
    }
}
