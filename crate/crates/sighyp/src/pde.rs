//! Finite-difference solution of the nested Poisson system for the expected
//! signature on planar domains:
//!
//!   Δ f_{i₁i₂…iₙ} = −2 ∂_{i₁} f_{i₂…iₙ} − δ_{i₁i₂} f_{i₃…iₙ},   f = 0 on ∂Ω (n ≥ 1),
//!
//! with f_∅ ≡ 1. Nodes next to the curved boundary use unequal-arm
//! (Shortley–Weller) stencils; the linear systems are solved by Jacobi-
//! preconditioned BiCGSTAB.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::stopped_bm::{mc_expected_signature, McConfig};
use crate::tensor::Word;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSettings {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_h() -> f64 {
    0.02
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    20_000
}

impl Default for PdeSettings {
    fn default() -> Self {
        PdeSettings { h: default_h(), tol: default_tol(), max_iter: default_max_iter() }
    }
}

impl PdeSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(Error::Config(format!("pde.h: must be in ]0, 1[, got {}", self.h)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("pde.tol: must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("pde.max_iter: must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellKind {
    Interior,
    /// Outside node adjacent to the interior; carries the boundary point
    /// reached from its first interior neighbour.
    Boundary { proj: [f64; 2] },
    Exterior,
}

/// Neighbour of an interior node: another unknown, or the boundary at
/// distance `arm`.
#[derive(Debug, Clone, Copy)]
struct Arm {
    len: f64,
    node: Option<usize>,
}

/// Square grid x = c + h·(ix − k, iy − k) over the bounding box of a planar domain.
#[derive(Debug, Clone)]
pub struct MaskedGrid {
    pub h: f64,
    pub origin: [f64; 2],
    pub nx: usize,
    pub kinds: Vec<CellKind>,
    /// Interior nodes as cell indices; position = unknown number.
    pub interior: Vec<usize>,
    unknown_of: Vec<Option<usize>>,
    /// E, W, N, S arms per unknown.
    arms: Vec<[Arm; 4]>,
}

impl MaskedGrid {
    pub fn new(domain: &DomainSpec, h: f64) -> Result<MaskedGrid> {
        if domain.validate()? != 2 {
            return Err(Error::Dimension(domain.dim()));
        }
        if !(h > 0.0) {
            return Err(Error::Config("pde.h: must be > 0".into()));
        }
        let (c, r) = domain.bounding_ball();
        let k = (r / h).ceil() as usize + 1;
        let nx = 2 * k + 1;
        let origin = [c[0] - k as f64 * h, c[1] - k as f64 * h];
        let pos = |cell: usize| [origin[0] + (cell % nx) as f64 * h, origin[1] + (cell / nx) as f64 * h];
        let mut kinds = vec![CellKind::Exterior; nx * nx];
        let mut interior = vec![];
        let mut unknown_of = vec![None; nx * nx];
        for cell in 0..nx * nx {
            if domain.contains(&pos(cell)) {
                unknown_of[cell] = Some(interior.len());
                interior.push(cell);
                kinds[cell] = CellKind::Interior;
            }
        }
        if interior.is_empty() {
            return Err(Error::Config(format!("pde.h: grid spacing {h} leaves no interior nodes")));
        }
        let steps: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        let mut arms = Vec::with_capacity(interior.len());
        for &cell in &interior {
            let (ix, iy) = ((cell % nx) as isize, (cell / nx) as isize);
            let p = pos(cell);
            let mut a = [Arm { len: h, node: None }; 4];
            for (s, &(dx, dy)) in steps.iter().enumerate() {
                let nb = ((iy + dy) as usize) * nx + (ix + dx) as usize;
                if let Some(u) = unknown_of[nb] {
                    a[s] = Arm { len: h, node: Some(u) };
                } else {
                    let q = pos(nb);
                    let mut b = [0.0; 2];
                    let t = domain.boundary_crossing(&p, &q, &mut b);
                    a[s] = Arm { len: (t * h).max(1e-9 * h), node: None };
                    if kinds[nb] == CellKind::Exterior {
                        kinds[nb] = CellKind::Boundary { proj: b };
                    }
                }
            }
            arms.push(a);
        }
        Ok(MaskedGrid { h, origin, nx, kinds, interior, unknown_of, arms })
    }

    pub fn unknowns(&self) -> usize {
        self.interior.len()
    }

    pub fn position(&self, cell: usize) -> [f64; 2] {
        [self.origin[0] + (cell % self.nx) as f64 * self.h, self.origin[1] + (cell / self.nx) as f64 * self.h]
    }

    /// Discrete Laplacian with zero boundary values.
    fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        for (p, a) in self.arms.iter().enumerate() {
            let mut acc = 0.0;
            for pair in [[0, 1], [2, 3]] {
                let (e, w) = (a[pair[0]], a[pair[1]]);
                let ue = e.node.map_or(0.0, |n| u[n]);
                let uw = w.node.map_or(0.0, |n| u[n]);
                acc += 2.0 / (e.len + w.len) * ((ue - u[p]) / e.len + (uw - u[p]) / w.len);
            }
            out[p] = acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.arms
            .iter()
            .map(|a| -2.0 / (a[0].len * a[1].len) - 2.0 / (a[2].len * a[3].len))
            .collect()
    }

    /// ∂_x (axis 0) or ∂_y (axis 1), second order with unequal arms.
    fn gradient(&self, u: &[f64], axis: usize, out: &mut [f64]) {
        for (p, a) in self.arms.iter().enumerate() {
            let (e, w) = (a[2 * axis], a[2 * axis + 1]);
            let ue = e.node.map_or(0.0, |n| u[n]);
            let uw = w.node.map_or(0.0, |n| u[n]);
            let (he, hw) = (e.len, w.len);
            out[p] = (hw * hw * ue - he * he * uw + (he * he - hw * hw) * u[p]) / (he * hw * (he + hw));
        }
    }

    /// Value at an arbitrary point: bilinear when the four surrounding nodes
    /// are unknowns, else the nearest unknown.
    pub fn sample(&self, u: &[f64], x: &[f64]) -> f64 {
        let fx = (x[0] - self.origin[0]) / self.h;
        let fy = (x[1] - self.origin[1]) / self.h;
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let at = |i: usize, j: usize| self.unknown_of.get(j * self.nx + i).copied().flatten();
        if let (Some(a), Some(b), Some(c), Some(d)) = (at(ix, iy), at(ix + 1, iy), at(ix, iy + 1), at(ix + 1, iy + 1)) {
            return (1.0 - ty) * ((1.0 - tx) * u[a] + tx * u[b]) + ty * ((1.0 - tx) * u[c] + tx * u[d]);
        }
        let mut best = (f64::INFINITY, 0.0);
        for (p, &cell) in self.interior.iter().enumerate() {
            let q = self.position(cell);
            let dist = (q[0] - x[0]).powi(2) + (q[1] - x[1]).powi(2);
            if dist < best.0 {
                best = (dist, u[p]);
            }
        }
        best.1
    }

    /// Solves Δu = b, u = 0 on the boundary. Returns (u, relative residual, iterations).
    pub fn solve_poisson(&self, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
        let n = self.unknowns();
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok((vec![0.0; n], 0.0, 0));
        }
        let dinv: Vec<f64> = self.diagonal().iter().map(|d| 1.0 / d).collect();
        let precond = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = dinv[i] * v[i];
            }
        };
        // BiCGSTAB, right preconditioned
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let r0 = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut phat = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut shat = vec![0.0; n];
        let mut t = vec![0.0; n];
        let mut res = 1.0;
        for it in 1..=max_iter {
            let rho_new = dot(&r0, &r);
            if rho_new == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            precond(&p, &mut phat);
            self.laplacian(&phat, &mut v);
            alpha = rho / dot(&r0, &v);
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) / bnorm < tol {
                for i in 0..n {
                    x[i] += alpha * phat[i];
                }
                let rr = self.residual(&x, b) / bnorm;
                return Ok((x, rr, it));
            }
            precond(&s, &mut shat);
            self.laplacian(&shat, &mut t);
            omega = dot(&t, &s) / dot(&t, &t);
            for i in 0..n {
                x[i] += alpha * phat[i] + omega * shat[i];
                r[i] = s[i] - omega * t[i];
            }
            res = norm(&r) / bnorm;
            if res < tol {
                let rr = self.residual(&x, b) / bnorm;
                return Ok((x, rr, it));
            }
        }
        Err(Error::NoConvergence { iters: max_iter, residual: res })
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.laplacian(x, &mut ax);
        norm(&ax.iter().zip(b).map(|(a, b)| a - b).collect::<Vec<_>>())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Level n of the expected signature on the grid: one vector of nodal values
/// per word (words in lexicographic index order).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelField {
    pub level: usize,
    pub words: Vec<Vec<f64>>,
}

impl LevelField {
    pub fn sup_norm(&self) -> f64 {
        self.words.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn word(&self, w: &[usize]) -> Result<&[f64]> {
        let idx = Word(w.to_vec()).index(2)?;
        self.words.get(idx).map(|v| v.as_slice()).ok_or_else(|| Error::Shape(format!("word {w:?} not at level {}", self.level)))
    }
}

/// Solves level n ≥ 2 from the two levels below.
pub fn solve_level(
    grid: &MaskedGrid,
    n: usize,
    prev: &LevelField,
    prev2: &LevelField,
    settings: &PdeSettings,
) -> Result<LevelField> {
    if n < 2 || prev.level + 1 != n || prev2.level + 2 != n {
        return Err(Error::Range(format!("level {n} needs levels {} and {}", n.saturating_sub(1), n.saturating_sub(2))));
    }
    let d = 2usize;
    let m = grid.unknowns();
    let count = d.pow(n as u32);
    let mut words = Vec::with_capacity(count);
    let mut grad = vec![0.0; m];
    for idx in 0..count {
        let w = Word::from_index(idx, n, d);
        let (i1, i2) = (w.0[0], w.0[1]);
        let tail1 = Word(w.0[1..].to_vec()).index(d)?;
        grid.gradient(&prev.words[tail1], i1 - 1, &mut grad);
        let mut b: Vec<f64> = grad.iter().map(|g| -2.0 * g).collect();
        if i1 == i2 {
            let tail2 = Word(w.0[2..].to_vec()).index(d)?;
            for (bi, f) in b.iter_mut().zip(&prev2.words[tail2]) {
                *bi -= f;
            }
        }
        let (u, _, _) = grid.solve_poisson(&b, settings.tol, settings.max_iter)?;
        words.push(u);
    }
    Ok(LevelField { level: n, words })
}

/// Levels 0..=N; level 0 is 1 and level 1 is 0 in the interior.
pub fn solve_cascade(grid: &MaskedGrid, n: usize, settings: &PdeSettings) -> Result<Vec<LevelField>> {
    let m = grid.unknowns();
    let mut out = vec![
        LevelField { level: 0, words: vec![vec![1.0; m]] },
        LevelField { level: 1, words: vec![vec![0.0; m]; 2] },
    ];
    for k in 2..=n {
        let f = solve_level(grid, k, &out[k - 1], &out[k - 2], settings)?;
        out.push(f);
    }
    out.truncate(n + 1);
    Ok(out)
}

/// CSV `ix,iy,level,word,value` over interior and boundary cells.
pub fn write_fields_csv<W: Write>(grid: &MaskedGrid, fields: &[LevelField], mut w: W) -> Result<()> {
    writeln!(w, "ix,iy,level,word,value")?;
    for f in fields {
        for (idx, vals) in f.words.iter().enumerate() {
            let word = Word::from_index(idx, f.level, 2);
            for (cell, kind) in grid.kinds.iter().enumerate() {
                let v = match kind {
                    CellKind::Interior => vals[grid.unknown_of[cell].unwrap()],
                    // the boundary condition
                    CellKind::Boundary { .. } => {
                        if f.level == 0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    CellKind::Exterior => continue,
                };
                writeln!(w, "{},{},{},{},{:e}", cell % grid.nx, cell / grid.nx, f.level, word, v)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub word: Word,
    pub mc: f64,
    pub stderr: f64,
    pub pde: f64,
    pub grid_err: f64,
    pub score: f64,
    pub flagged: bool,
}

/// MC estimate at `cfg.start` against the grid solution, word by word. The
/// grid error is estimated by comparison with a grid of twice the spacing.
/// A row is flagged when |MC − PDE| / max(stderr, grid error) > 5.
pub fn compare_mc_pde(domain: &DomainSpec, n: usize, cfg: &McConfig) -> Result<Vec<CompareRow>> {
    let settings = cfg.pde.unwrap_or_default();
    let fine = MaskedGrid::new(domain, settings.h)?;
    let coarse = MaskedGrid::new(domain, 2.0 * settings.h)?;
    let ff = solve_cascade(&fine, n, &settings)?;
    let fc = solve_cascade(&coarse, n, &settings)?;
    let mc = mc_expected_signature(domain, &McConfig { level: n, ..cfg.clone() })?;
    let mut rows = vec![];
    for k in 0..=n {
        for idx in 0..2usize.pow(k as u32) {
            let w = Word::from_index(idx, k, 2);
            let pde = fine.sample(&ff[k].words[idx], &cfg.start);
            let grid_err = (pde - coarse.sample(&fc[k].words[idx], &cfg.start)).abs();
            let (m, s) = mc.sig(&w.0).ok_or_else(|| Error::Shape(format!("no MC value for {w}")))?;
            let diff = (m - pde).abs();
            let scale = s.max(grid_err);
            let score = if diff == 0.0 { 0.0 } else { diff / scale };
            rows.push(CompareRow { word: w, mc: m, stderr: s, pde, grid_err, score, flagged: score > 5.0 });
        }
    }
    Ok(rows)
}
