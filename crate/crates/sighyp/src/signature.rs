//! Exact truncated signatures of piecewise-linear paths.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::tensor::TruncatedTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    dim: usize,
    vertices: Vec<Vec<f64>>,
}

impl Polyline {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vertices
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::Shape("polyline needs at least one vertex".into()))?;
        if dim == 0 {
            return Err(Error::Shape("zero-dimensional vertex".into()));
        }
        for (k, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Shape(format!("vertex {k} has {} coords, expected {dim}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Shape(format!("vertex {k} is not finite")));
            }
        }
        Ok(Polyline { dim, vertices })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> &[f64] {
        &self.vertices[0]
    }

    pub fn end(&self) -> &[f64] {
        self.vertices.last().unwrap()
    }

    pub fn increments(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.vertices
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
    }

    /// Total 1-variation (Euclidean length).
    pub fn length(&self) -> f64 {
        self.increments().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).sum()
    }

    pub fn reverse(&self) -> Polyline {
        let mut v = self.vertices.clone();
        v.reverse();
        Polyline { dim: self.dim, vertices: v }
    }

    /// Joins `other` after `self`, translating it so it starts at `self.end()`.
    pub fn concat(&self, other: &Polyline) -> Result<Polyline> {
        if other.dim != self.dim {
            return Err(Error::Shape("dimension mismatch in concat".into()));
        }
        let shift: Vec<f64> = self.end().iter().zip(other.start()).map(|(a, b)| a - b).collect();
        let mut v = self.vertices.clone();
        v.extend(
            other.vertices[1..]
                .iter()
                .map(|p| p.iter().zip(&shift).map(|(x, s)| x + s).collect()),
        );
        Ok(Polyline { dim: self.dim, vertices: v })
    }

    pub fn scaled(&self, lambda: f64) -> Polyline {
        let vertices = self.vertices.iter().map(|p| p.iter().map(|x| lambda * x).collect()).collect();
        Polyline { dim: self.dim, vertices }
    }

    pub fn map_vertices(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Polyline> {
        Polyline::new(self.vertices.iter().map(|p| f(p)).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in &self.vertices {
            let row: Vec<String> = p.iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads a `x1,...,xd` CSV; the header fixes d.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Polyline> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
        let header = header?;
        let d = header.split(',').count();
        for (k, h) in header.split(',').enumerate() {
            if h.trim() != format!("x{}", k + 1) {
                return Err(Error::Parse { line: 1, msg: format!("bad header field {h:?}") });
            }
        }
        let mut verts = vec![];
        for (ln, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: ln + 1, msg: e.to_string() })?;
            if row.len() != d {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("{} fields, expected {d}", row.len()),
                });
            }
            verts.push(row);
        }
        if verts.is_empty() {
            return Err(Error::Parse { line: 2, msg: "no vertices".into() });
        }
        Polyline::new(verts)
    }
}

/// exp(v) truncated at level N: level n is v^{⊗n}/n!.
pub fn segment_signature(v: &[f64], n: usize) -> Result<TruncatedTensor> {
    let d = v.len();
    let mut levels = vec![vec![1.0]];
    for k in 1..=n {
        let prev = &levels[k - 1];
        let mut next = Vec::with_capacity(prev.len() * d);
        for &p in prev {
            next.extend(v.iter().map(|&x| p * x / k as f64));
        }
        levels.push(next);
    }
    TruncatedTensor::from_levels(d, levels)
}

/// Chen product of the segment exponentials. Zero-length segments are skipped.
pub fn polyline_signature(p: &Polyline, n: usize) -> Result<TruncatedTensor> {
    let mut s = TruncatedTensor::unit(p.dim(), n)?;
    for v in p.increments() {
        s.mul_segment_exp(&v)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly_strategy(d: usize, max_seg: usize) -> impl Strategy<Value = Polyline> {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), 1..=max_seg + 1)
            .prop_map(|v| Polyline::new(v).unwrap())
    }

    fn rel_close(a: &TruncatedTensor, b: &TruncatedTensor, tol: f64) -> bool {
        let scale = a.entries().map(|e| e.2.abs()).fold(1.0, f64::max);
        a.max_abs_diff(b).unwrap() <= tol * scale
    }

    #[test]
    fn exp_series_d1() {
        let s = segment_signature(&[2.0], 3).unwrap();
        assert_eq!(s.proj(1), &[2.0]);
        assert_eq!(s.proj(2), &[2.0]);
        assert!((s.proj(3)[0] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(segment_signature(&[0.0, 0.0], 3).unwrap(), TruncatedTensor::unit(2, 3).unwrap());
    }

    #[test]
    fn l_path_area() {
        let p = Polyline::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let s = polyline_signature(&p, 2).unwrap();
        let w12 = s.get(&crate::tensor::Word(vec![1, 2])).unwrap();
        let w21 = s.get(&crate::tensor::Word(vec![2, 1])).unwrap();
        assert!((w12 - 1.0).abs() < 1e-15 && w21.abs() < 1e-15);
    }

    #[test]
    fn single_vertex_is_unit() {
        let p = Polyline::new(vec![vec![0.3, 0.1, 2.0]]).unwrap();
        assert_eq!(polyline_signature(&p, 4).unwrap(), TruncatedTensor::unit(3, 4).unwrap());
        assert_eq!(p.reverse(), p);
    }

    #[test]
    fn csv_roundtrip() {
        let p = Polyline::new(vec![vec![0.0, 0.5], vec![1.25, -3.0]]).unwrap();
        let mut buf = vec![];
        p.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x1,x2\n"));
        assert_eq!(Polyline::read_csv(&buf[..]).unwrap(), p);
        let bad = b"x1,x2\n0,1\n2\n";
        match Polyline::read_csv(&bad[..]) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn segment_matches_chen_update(v in prop::collection::vec(-2.0f64..2.0, 3)) {
            let mut e = TruncatedTensor::unit(3, 5).unwrap();
            e.mul_segment_exp(&v).unwrap();
            prop_assert!(rel_close(&segment_signature(&v, 5).unwrap(), &e, 1e-14));
        }

        #[test]
        fn chen(p in poly_strategy(2, 6), q in poly_strategy(2, 6)) {
            let pq = p.concat(&q).unwrap();
            let lhs = polyline_signature(&pq, 4).unwrap();
            let rhs = polyline_signature(&p, 4).unwrap().tensor_mul(&polyline_signature(&q, 4).unwrap()).unwrap();
            prop_assert!(rel_close(&lhs, &rhs, 1e-12));
        }

        #[test]
        fn level_one_is_increment(p in poly_strategy(3, 8)) {
            let s = polyline_signature(&p, 2).unwrap();
            for i in 0..3 {
                prop_assert!((s.proj(1)[i] - (p.end()[i] - p.start()[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn scaling(p in poly_strategy(2, 5), lam in -2.0f64..2.0) {
            let a = polyline_signature(&p.scaled(lam), 4).unwrap();
            let b = polyline_signature(&p, 4).unwrap().dilation(lam);
            prop_assert!(rel_close(&a, &b, 1e-12));
        }

        #[test]
        fn reversal_inverse(p in poly_strategy(3, 6)) {
            let s = polyline_signature(&p.concat(&p.reverse()).unwrap(), 4).unwrap();
            prop_assert!(s.max_abs_diff(&TruncatedTensor::unit(3, 4).unwrap()).unwrap() < 1e-10);
            prop_assert_eq!(p.reverse().reverse(), p);
        }

        #[test]
        fn collinear_midpoint(p in poly_strategy(2, 4), seg in 0usize..4, t in 0.05f64..0.95) {
            prop_assume!(p.len() >= 2);
            let k = seg % (p.len() - 1);
            let (a, b) = (&p.vertices()[k], &p.vertices()[k + 1]);
            let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
            let mut v = p.vertices().to_vec();
            v.insert(k + 1, mid);
            let q = Polyline::new(v).unwrap();
            prop_assert!(rel_close(&polyline_signature(&p, 4).unwrap(), &polyline_signature(&q, 4).unwrap(), 1e-12));
        }

        #[test]
        fn symmetric_part_level2(p in poly_strategy(3, 6)) {
            let s = polyline_signature(&p, 2).unwrap();
            let inc: Vec<f64> = (0..3).map(|i| p.end()[i] - p.start()[i]).collect();
            for i in 0..3 {
                for j in 0..3 {
                    let sym = 0.5 * (s.proj(2)[3 * i + j] + s.proj(2)[3 * j + i]);
                    prop_assert!((sym - 0.5 * inc[i] * inc[j]).abs() < 1e-12);
                }
            }
        }
    }
}
