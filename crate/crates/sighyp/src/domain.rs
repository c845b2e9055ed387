//! Bounded domains given by an implicit function φ (φ < 0 inside, φ = 0 on the
//! boundary): balls, ellipsoids, and rotations, reflections and translations of
//! those.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::GaussianStream;

/// Largest supported dimension (fixed-size scratch buffers).
pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    #[serde(alias = "ellipse")]
    Ellipsoid {
        semi_axes: Vec<f64>,
    },
    /// R(Ω); `rotation` is row-major and must lie in SO(d).
    Rotated {
        base: Box<DomainSpec>,
        rotation: Vec<Vec<f64>>,
    },
    /// {(x₁, −x₂, …, −x_d) : x ∈ Ω}.
    Reflected {
        base: Box<DomainSpec>,
    },
    /// Ω + shift.
    Translated {
        base: Box<DomainSpec>,
        shift: Vec<f64>,
    },
}

impl DomainSpec {
    pub fn unit_ball(d: usize) -> DomainSpec {
        DomainSpec::Ball { center: vec![0.0; d], radius: 1.0 }
    }

    pub fn rotated(self, r: &DMatrix<f64>) -> DomainSpec {
        let rotation = (0..r.nrows()).map(|i| r.row(i).iter().copied().collect()).collect();
        DomainSpec::Rotated { base: Box::new(self), rotation }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Ball { center, .. } => center.len(),
            DomainSpec::Ellipsoid { semi_axes } => semi_axes.len(),
            DomainSpec::Rotated { base, .. } | DomainSpec::Reflected { base } | DomainSpec::Translated { base, .. } => {
                base.dim()
            }
        }
    }

    /// Checks shapes and parameters; errors name the offending field.
    pub fn validate(&self) -> Result<usize> {
        self.validate_at("domain")
    }

    fn validate_at(&self, path: &str) -> Result<usize> {
        let bad = |f: &str, m: String| Err(Error::Config(format!("{path}.{f}: {m}")));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let d = match self {
            DomainSpec::Ball { center, radius } => {
                if center.is_empty() || !finite(center) {
                    return bad("center", "must be a non-empty finite vector".into());
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad("radius", format!("must be > 0, got {radius}"));
                }
                center.len()
            }
            DomainSpec::Ellipsoid { semi_axes } => {
                if semi_axes.is_empty() || semi_axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    return bad("semi_axes", "must be positive and finite".into());
                }
                semi_axes.len()
            }
            DomainSpec::Rotated { base, rotation } => {
                let d = base.validate_at(&format!("{path}.base"))?;
                if rotation.len() != d || rotation.iter().any(|r| r.len() != d || !finite(r)) {
                    return bad("rotation", format!("must be a finite {d}x{d} matrix"));
                }
                let m = DMatrix::from_fn(d, d, |i, j| rotation[i][j]);
                let err = (m.transpose() * &m - DMatrix::identity(d, d)).amax();
                if err > 1e-9 || (m.determinant() - 1.0).abs() > 1e-9 {
                    return bad("rotation", "must be orthogonal with determinant 1".into());
                }
                d
            }
            DomainSpec::Reflected { base } => base.validate_at(&format!("{path}.base"))?,
            DomainSpec::Translated { base, shift } => {
                let d = base.validate_at(&format!("{path}.base"))?;
                if shift.len() != d || !finite(shift) {
                    return bad("shift", format!("must be a finite vector of length {d}"));
                }
                d
            }
        };
        if d > MAX_DIM {
            return bad("dim", format!("dimension {d} exceeds {MAX_DIM}"));
        }
        Ok(d)
    }

    /// The implicit function φ; negative exactly in the interior.
    pub fn level(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                r2 / (radius * radius) - 1.0
            }
            DomainSpec::Ellipsoid { semi_axes } => {
                x.iter().zip(semi_axes).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() - 1.0
            }
            DomainSpec::Rotated { base, rotation } => {
                // x ∈ R(Ω) ⇔ Rᵀx ∈ Ω
                let d = x.len();
                let mut y = [0.0; MAX_DIM];
                for (i, row) in rotation.iter().enumerate() {
                    for j in 0..d {
                        y[j] += row[j] * x[i];
                    }
                }
                base.level(&y[..d])
            }
            DomainSpec::Reflected { base } => {
                let d = x.len();
                let mut y = [0.0; MAX_DIM];
                y[..d].copy_from_slice(x);
                reflect(&mut y[..d]);
                base.level(&y[..d])
            }
            DomainSpec::Translated { base, shift } => {
                let d = x.len();
                let mut y = [0.0; MAX_DIM];
                for i in 0..d {
                    y[i] = x[i] - shift[i];
                }
                base.level(&y[..d])
            }
        }
    }

    /// ∇φ, written into `out`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            DomainSpec::Ball { center, radius } => {
                for i in 0..d {
                    out[i] = 2.0 * (x[i] - center[i]) / (radius * radius);
                }
            }
            DomainSpec::Ellipsoid { semi_axes } => {
                for i in 0..d {
                    out[i] = 2.0 * x[i] / (semi_axes[i] * semi_axes[i]);
                }
            }
            DomainSpec::Rotated { base, rotation } => {
                let mut y = [0.0; MAX_DIM];
                for (i, row) in rotation.iter().enumerate() {
                    for j in 0..d {
                        y[j] += row[j] * x[i];
                    }
                }
                let mut g = [0.0; MAX_DIM];
                base.gradient(&y[..d], &mut g[..d]);
                for (i, row) in rotation.iter().enumerate() {
                    out[i] = (0..d).map(|j| row[j] * g[j]).sum();
                }
            }
            DomainSpec::Reflected { base } => {
                let mut y = [0.0; MAX_DIM];
                y[..d].copy_from_slice(x);
                reflect(&mut y[..d]);
                base.gradient(&y[..d], out);
                reflect(&mut out[..d]);
            }
            DomainSpec::Translated { base, shift } => {
                let mut y = [0.0; MAX_DIM];
                for i in 0..d {
                    y[i] = x[i] - shift[i];
                }
                base.gradient(&y[..d], out);
            }
        }
    }

    /// Distance from an interior point to the boundary: exact for balls,
    /// −φ/|∇φ| (first order near the boundary) otherwise.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::Ball { center, radius } => {
                radius - x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt()
            }
            DomainSpec::Translated { base, shift } => {
                let mut y = [0.0; MAX_DIM];
                for i in 0..x.len() {
                    y[i] = x[i] - shift[i];
                }
                base.boundary_distance(&y[..x.len()])
            }
            _ => {
                let mut g = [0.0; MAX_DIM];
                self.gradient(x, &mut g[..x.len()]);
                let n = g[..x.len()].iter().map(|v| v * v).sum::<f64>().sqrt();
                if n == 0.0 {
                    f64::INFINITY
                } else {
                    -self.level(x) / n
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.level(x) < 0.0
    }

    /// Point where the segment from `a` (inside) to `b` (outside) meets the
    /// boundary, by bisection until |φ| < 1e−12. Returns the point and the
    /// fraction t ∈ ]0, 1] along the segment.
    pub fn boundary_crossing(&self, a: &[f64], b: &[f64], out: &mut [f64]) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let at = |t: f64, out: &mut [f64]| {
            for i in 0..a.len() {
                out[i] = a[i] + t * (b[i] - a[i]);
            }
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            at(mid, out);
            let f = self.level(out);
            if f.abs() < 1e-12 {
                return mid;
            }
            if f < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        at(hi, out);
        hi
    }

    /// A ball (center, radius) containing the domain.
    pub fn bounding_ball(&self) -> (Vec<f64>, f64) {
        match self {
            DomainSpec::Ball { center, radius } => (center.clone(), *radius),
            DomainSpec::Ellipsoid { semi_axes } => {
                (vec![0.0; semi_axes.len()], semi_axes.iter().copied().fold(0.0, f64::max))
            }
            DomainSpec::Rotated { base, rotation } => {
                let (c, r) = base.bounding_ball();
                let rc = rotation.iter().map(|row| row.iter().zip(&c).map(|(a, b)| a * b).sum()).collect();
                (rc, r)
            }
            DomainSpec::Reflected { base } => {
                let (mut c, r) = base.bounding_ball();
                reflect(&mut c);
                (c, r)
            }
            DomainSpec::Translated { base, shift } => {
                let (c, r) = base.bounding_ball();
                (c.iter().zip(shift).map(|(a, b)| a + b).collect(), r)
            }
        }
    }

    /// Radius ρ such that B(0, ρ) ⊂ R(Ω) for every rotation R, when it is
    /// known in closed form (balls and ellipsoids, possibly transformed).
    pub fn rotation_invariant_core(&self) -> Option<f64> {
        match self {
            DomainSpec::Ball { center, radius } => {
                let c = center.iter().map(|x| x * x).sum::<f64>().sqrt();
                Some((radius - c).max(0.0))
            }
            DomainSpec::Ellipsoid { semi_axes } => Some(semi_axes.iter().copied().fold(f64::INFINITY, f64::min)),
            DomainSpec::Rotated { base, .. } | DomainSpec::Reflected { base } => base.rotation_invariant_core(),
            DomainSpec::Translated { base, shift } => {
                let s = shift.iter().map(|x| x * x).sum::<f64>().sqrt();
                base.rotation_invariant_core().map(|r| (r - s).max(0.0))
            }
        }
    }
}

/// Negate coordinates 2..d.
pub fn reflect(x: &mut [f64]) {
    for v in x.iter_mut().skip(1) {
        *v = -*v;
    }
}

/// Haar-distributed rotation in SO(d): QR of a Gaussian matrix, columns
/// sign-fixed by diag(R), first column flipped if the determinant is −1.
pub fn haar_rotation(d: usize, g: &mut GaussianStream) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| g.gaussian());
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}
