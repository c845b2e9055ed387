//! Hyperbolic development: tensors and polylines mapped into gl(d+1; ℝ).
//!
//! H(e_i) is zero except for the (i, d+1) and (d+1, i) entries, which are 1.
//! Developments of paths act on the base point (0, …, 0, 1) of the hyperboloid
//! Σ_{j≤d} (x^j)² − (x^{d+1})² = −1.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::signature::Polyline;
use crate::tensor::TruncatedTensor;

pub type DevMatrix = DMatrix<f64>;
pub type DevVector = DVector<f64>;

/// Largest allowed λ·(1-variation) before cosh overflows.
pub const OVERFLOW_GUARD: f64 = 700.0;

/// H(e_i), `i` 1-based.
pub fn h_basis(i: usize, d: usize) -> Result<DevMatrix> {
    if i == 0 || i > d {
        return Err(Error::Range(format!("basis index {i} outside 1..={d}")));
    }
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m[(i - 1, d)] = 1.0;
    m[(d, i - 1)] = 1.0;
    Ok(m)
}

pub fn h_basis_all(d: usize) -> Vec<DevMatrix> {
    (1..=d).map(|i| h_basis(i, d).unwrap()).collect()
}

/// H(v) = Σ v_i H(e_i).
pub fn h_of(v: &[f64]) -> DevMatrix {
    let d = v.len();
    let mut m = DMatrix::zeros(d + 1, d + 1);
    for (i, &x) in v.iter().enumerate() {
        m[(i, d)] = x;
        m[(d, i)] = x;
    }
    m
}

pub fn base_point(d: usize) -> DevVector {
    let mut v = DVector::zeros(d + 1);
    v[d] = 1.0;
    v
}

/// Σ_n λ^n Σ_{|w|=n} a[w] · B_{w₁}⋯B_{w_n}, the linear extension of the basis images.
pub fn apply_morphism(a: &TruncatedTensor, lambda: f64, basis: &[DevMatrix]) -> Result<DevMatrix> {
    let d = a.dim();
    if basis.len() != d {
        return Err(Error::Shape(format!("{} basis images for d = {d}", basis.len())));
    }
    let m = basis[0].nrows();
    if basis.iter().any(|b| b.nrows() != m || b.ncols() != m) {
        return Err(Error::Shape("basis images must be square and equal-sized".into()));
    }
    // Σ_w c[w] B_{w1}⋯B_{wn} = Σ_i B_i · (Σ_u c[i u] B_u), recursively on the first letter.
    fn level_sum(c: &[f64], n: usize, basis: &[DevMatrix], m: usize) -> DevMatrix {
        if n == 0 {
            return DMatrix::identity(m, m) * c[0];
        }
        let d = basis.len();
        let stride = c.len() / d;
        let mut acc = DMatrix::zeros(m, m);
        for (i, b) in basis.iter().enumerate() {
            let part = &c[i * stride..(i + 1) * stride];
            if part.iter().all(|&x| x == 0.0) {
                continue;
            }
            acc += b * level_sum(part, n - 1, basis, m);
        }
        acc
    }
    let mut out = DMatrix::zeros(m, m);
    let mut p = 1.0;
    for n in 0..=a.level() {
        out += level_sum(a.proj(n), n, basis, m) * p;
        p *= lambda;
    }
    Ok(out)
}

/// exp(λH(v)) in closed form: I + sinh(λ|v|)/|v|·H(v) + (cosh(λ|v|)−1)/|v|²·H(v)².
pub fn segment_development_exact(v: &[f64], lambda: f64) -> DevMatrix {
    let d = v.len();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut m = DMatrix::identity(d + 1, d + 1);
    if norm == 0.0 || lambda == 0.0 {
        return m;
    }
    let t = lambda * norm;
    let s = t.sinh() / norm;
    // cosh t − 1 = 2 sinh²(t/2), without cancellation for short segments
    let c = 2.0 * (0.5 * t).sinh().powi(2) / (norm * norm);
    // H(v)² has v vᵀ in the top-left block and |v|² in the corner.
    for i in 0..d {
        m[(i, d)] += s * v[i];
        m[(d, i)] += s * v[i];
        for j in 0..d {
            m[(i, j)] += c * v[i] * v[j];
        }
    }
    m[(d, d)] += c * norm * norm;
    m
}

fn guard(p: &Polyline, lambda: f64) -> Result<()> {
    let len = lambda.abs() * p.length();
    if len > OVERFLOW_GUARD {
        return Err(Error::Overflow(len));
    }
    Ok(())
}

/// Ordered product of segment boosts.
pub fn polyline_development_matrix(p: &Polyline, lambda: f64) -> Result<DevMatrix> {
    guard(p, lambda)?;
    let d = p.dim();
    let mut m = DMatrix::identity(d + 1, d + 1);
    let mut buf = vec![0.0; d + 1];
    for v in p.increments() {
        mul_segment_development(&mut m, &v, lambda, &mut buf);
    }
    Ok(m)
}

/// m ← m · exp(λH(v)) in O(d²), using the block structure of the boost.
/// `buf` needs d+1 slots.
pub fn mul_segment_development(m: &mut DevMatrix, v: &[f64], lambda: f64, buf: &mut [f64]) {
    let d = v.len();
    let n2: f64 = v.iter().map(|x| x * x).sum();
    if n2 == 0.0 || lambda == 0.0 {
        return;
    }
    let norm = n2.sqrt();
    // sinh and cosh − 1 from one exp_m1, without cancellation for short steps
    let em = (lambda * norm).exp_m1();
    let e = 1.0 + em;
    let s = 0.5 * (em + em / e) / norm;
    let c = 0.5 * em * em / e / n2;
    for r in 0..=d {
        // buf[r] = (m[r, :d] · v)
        let mut acc = 0.0;
        for (j, vj) in v.iter().enumerate() {
            acc += m[(r, j)] * vj;
        }
        buf[r] = acc;
    }
    for r in 0..=d {
        let last = m[(r, d)];
        let mv = buf[r];
        for (j, vj) in v.iter().enumerate() {
            m[(r, j)] += vj * (s * last + c * mv);
        }
        m[(r, d)] = last * (1.0 + c * n2) + s * mv;
    }
}

/// h_λ(γ) = H(S(λγ))·(0,…,0,1)ᵀ.
pub fn polyline_development(p: &Polyline, lambda: f64) -> Result<DevVector> {
    Ok(polyline_development_matrix(p, lambda)?.column(p.dim()).into_owned())
}

/// Σ_{j≤d}(x^j)² − (x^{d+1})², which is −1 on the hyperboloid.
pub fn minkowski_form(h: &DevVector) -> f64 {
    let d = h.len() - 1;
    h.iter().take(d).map(|x| x * x).sum::<f64>() - h[d] * h[d]
}

/// Component k (1-based) of H(λ-graded a)·(0,…,0,1)ᵀ, summed over the surviving words.
///
/// With products taken in word order, only (i₁,i₁,…,i_n,i_n) reaches the last
/// slot and only (k,i₁,i₁,…,i_n,i_n) reaches slot k ≤ d.
pub fn squared_word_series(a: &TruncatedTensor, lambda: f64, k: usize) -> Result<f64> {
    let d = a.dim();
    if k == 0 || k > d + 1 {
        return Err(Error::Range(format!("component {k} outside 1..={}", d + 1)));
    }
    let head = if k <= d { Some(k) } else { None };
    let extra = head.is_some() as usize;
    let mut total = 0.0;
    let mut n = 0;
    while 2 * n + extra <= a.level() {
        let len = 2 * n + extra;
        let level = a.proj(len);
        let pw = lambda.powi(len as i32);
        // enumerate (i₁..i_n) in base d
        let count = d.pow(n as u32);
        let mut s = 0.0;
        for code in 0..count {
            let mut idx = head.map_or(0, |h| h - 1);
            let mut c = code;
            let mut digits = vec![0usize; n];
            for slot in digits.iter_mut().rev() {
                *slot = c % d;
                c /= d;
            }
            for &i in &digits {
                idx = idx * d + i;
                idx = idx * d + i;
            }
            s += level[idx];
        }
        total += pw * s;
        n += 1;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::{polyline_signature, segment_signature};
    use proptest::prelude::*;

    fn poly_strategy(d: usize, max_seg: usize) -> impl Strategy<Value = Polyline> {
        prop::collection::vec(prop::collection::vec(-0.7f64..0.7, d), 1..=max_seg + 1)
            .prop_map(|v| Polyline::new(v).unwrap())
    }

    fn max_diff(a: &DevMatrix, b: &DevMatrix) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn basis_shape() {
        let h = h_basis(1, 2).unwrap();
        assert_eq!(h[(0, 2)], 1.0);
        assert_eq!(h[(2, 0)], 1.0);
        assert_eq!(h.iter().filter(|&&x| x != 0.0).count(), 2);
        let sq = &h * &h;
        assert_eq!(sq, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 1.0])));
        let d = 4;
        let sum: DevMatrix = h_basis_all(d).iter().map(|b| b * b).fold(DMatrix::zeros(5, 5), |a, b| a + b);
        let mut want = DMatrix::identity(5, 5);
        want[(4, 4)] = d as f64;
        assert_eq!(sum, want);
        assert!(h_basis(3, 2).is_err());
    }

    #[test]
    fn morphism_of_unit_and_word() {
        let basis = h_basis_all(2);
        let u = TruncatedTensor::unit(2, 3).unwrap();
        assert_eq!(apply_morphism(&u, 0.7, &basis).unwrap(), DMatrix::identity(3, 3));
        let mut t = TruncatedTensor::zeros(2, 2).unwrap();
        t.set(&crate::tensor::Word(vec![1, 2]), 1.0).unwrap();
        assert_eq!(apply_morphism(&t, 1.0, &basis).unwrap(), &basis[0] * &basis[1]);
    }

    #[test]
    fn series_matches_boost() {
        let v = [0.3, -0.5, 0.2];
        let s = segment_signature(&v, 12).unwrap();
        let m = apply_morphism(&s, 1.0, &h_basis_all(3)).unwrap();
        assert!(max_diff(&m, &segment_development_exact(&v, 1.0)) < 1e-10);
    }

    #[test]
    fn boost_along_axis() {
        let l = 1.3;
        let m = segment_development_exact(&[l, 0.0, 0.0], 1.0);
        let col = m.column(3);
        assert!((col[0] - l.sinh()).abs() < 1e-14);
        assert!(col[1] == 0.0 && col[2] == 0.0);
        assert!((col[3] - l.cosh()).abs() < 1e-14);
        assert_eq!(segment_development_exact(&[0.0, 0.0], 2.0), DMatrix::identity(3, 3));
        let p = Polyline::new(vec![vec![0.0, 0.0], vec![l, 0.0]]).unwrap();
        let h = polyline_development(&p, 1.0).unwrap();
        assert!((h[0] - l.sinh()).abs() < 1e-14 && (h[2] - l.cosh()).abs() < 1e-14);
    }

    #[test]
    fn constant_path() {
        let p = Polyline::new(vec![vec![0.1, 0.2, 0.3]]).unwrap();
        assert_eq!(polyline_development(&p, 3.0).unwrap(), base_point(3));
    }

    #[test]
    fn incremental_update_matches_product() {
        let mut m = segment_development_exact(&[0.3, -0.2, 0.5], 1.1);
        let want = &m * segment_development_exact(&[-0.7, 0.1, 0.2], 1.1);
        let mut buf = vec![0.0; 4];
        mul_segment_development(&mut m, &[-0.7, 0.1, 0.2], 1.1, &mut buf);
        assert!(max_diff(&m, &want) < 1e-14);
    }

    #[test]
    fn overflow_guard() {
        let p = Polyline::new(vec![vec![0.0], vec![800.0]]).unwrap();
        assert!(matches!(polyline_development(&p, 1.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn squared_words_cosh_partial_sum() {
        let s = segment_signature(&[1.0, 0.0], 4).unwrap();
        let v = squared_word_series(&s, 1.0, 3).unwrap();
        assert!((v - (1.0 + 0.5 + 1.0 / 24.0)).abs() < 1e-15);
        let u = TruncatedTensor::unit(2, 4).unwrap();
        assert_eq!(squared_word_series(&u, 2.0, 3).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn det_one(v in prop::collection::vec(-2.0f64..2.0, 3), lam in -2.0f64..2.0) {
            let m = segment_development_exact(&v, lam);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn hyperboloid(p in poly_strategy(3, 10), lam in 0.0f64..3.0) {
            let h = polyline_development(&p, lam).unwrap();
            prop_assert!((minkowski_form(&h) + 1.0).abs() <= 1e-9 * h[3] * h[3]);
            prop_assert!(h[3] >= 1.0 && h[3] >= h[0].abs());
        }

        #[test]
        fn squared_series_is_column(levels in prop::collection::vec(-1.0f64..1.0, 1 + 2 + 4 + 8 + 16), lam in -1.5f64..1.5) {
            let mut lv = vec![];
            let mut off = 0;
            for n in 0..=4u32 {
                let s = 2usize.pow(n);
                lv.push(levels[off..off + s].to_vec());
                off += s;
            }
            let a = TruncatedTensor::from_levels(2, lv).unwrap();
            let col = apply_morphism(&a, lam, &h_basis_all(2)).unwrap() * base_point(2);
            for k in 1..=3 {
                prop_assert!((squared_word_series(&a, lam, k).unwrap() - col[k - 1]).abs() < 1e-12);
            }
        }

        #[test]
        fn series_converges(p in poly_strategy(2, 3)) {
            prop_assume!(p.length() < 1.0);
            let exact = polyline_development(&p, 1.0).unwrap();
            let mut prev = f64::INFINITY;
            for n in [4usize, 8, 12] {
                let s = polyline_signature(&p, n).unwrap();
                let err = (squared_word_series(&s, 1.0, 3).unwrap() - exact[2]).abs();
                prop_assert!(err <= prev + 1e-15);
                prev = err;
            }
            prop_assert!(prev < 1e-6);
        }

        #[test]
        fn rotation_equivariance(p in poly_strategy(2, 5), th in 0.0f64..6.28, lam in 0.0f64..2.0) {
            let (c, s) = (th.cos(), th.sin());
            let rot = |x: &[f64]| vec![c * x[0] - s * x[1], s * x[0] + c * x[1]];
            let q = p.map_vertices(rot).unwrap();
            let hp = polyline_development(&p, lam).unwrap();
            let hq = polyline_development(&q, lam).unwrap();
            let r = rot(&[hp[0], hp[1]]);
            prop_assert!((hq[0] - r[0]).abs() < 1e-9 * hp[2] && (hq[1] - r[1]).abs() < 1e-9 * hp[2]);
            prop_assert!((hq[2] - hp[2]).abs() < 1e-9 * hp[2]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn morphism_property(p in poly_strategy(2, 3), q in poly_strategy(2, 3)) {
            // group-like inputs; compare at matched truncation against the exact boosts
            prop_assume!(p.length() + q.length() < 1.0);
            let basis = h_basis_all(2);
            let n = 16;
            let sp = polyline_signature(&p, n).unwrap();
            let sq = polyline_signature(&q, n).unwrap();
            let lhs = apply_morphism(&sp.tensor_mul(&sq).unwrap(), 1.0, &basis).unwrap();
            let rhs = apply_morphism(&sp, 1.0, &basis).unwrap() * apply_morphism(&sq, 1.0, &basis).unwrap();
            prop_assert!(max_diff(&lhs, &rhs) < 1e-10);
            let exact = polyline_development_matrix(&p.concat(&q).unwrap(), 1.0).unwrap();
            prop_assert!(max_diff(&lhs, &exact) < 1e-10);
        }
    }
}
