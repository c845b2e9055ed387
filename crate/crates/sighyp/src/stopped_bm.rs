//! Brownian motion run until it leaves a domain, and Monte-Carlo estimates of
//! the expected signature, the hyperbolic development and the exit time.
//!
//! Paths are grouped in fixed chunks; each chunk is summed sequentially and the
//! chunk sums are added in index order, so estimates are bit-identical for any
//! number of worker threads.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::development::{base_point, mul_segment_development, DevVector};
use crate::domain::{haar_rotation, DomainSpec, MAX_DIM};
use crate::error::{Error, Result};
use crate::pde::PdeSettings;
use crate::rng::GaussianStream;
use crate::signature::Polyline;
use crate::tensor::{TruncatedTensor, Word};

pub const MAX_STEPS: u64 = 100_000_000;
const CHUNK: u64 = 256;
/// Substream offset for rotation sampling, away from path indices.
const ROTATION_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub seed: u64,
    pub paths: u64,
    pub step: f64,
    pub level: usize,
    pub lambda: f64,
    pub start: Vec<f64>,
    pub domain: DomainSpec,
    /// Haar rotations for the domain-averaged development; absent = plain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeSettings>,
}

impl McConfig {
    /// Semantic checks; messages carry the field path.
    pub fn validate(&self) -> Result<usize> {
        let d = self.domain.validate()?;
        if self.paths == 0 {
            return Err(Error::Config("paths: must be ≥ 1".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step: must be > 0, got {}", self.step)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::Config("lambda: must be finite".into()));
        }
        if self.start.len() != d {
            return Err(Error::Config(format!("start: has {} coordinates, domain has {d}", self.start.len())));
        }
        if !self.domain.contains(&self.start) {
            return Err(Error::Config("start: not in the interior of the domain".into()));
        }
        if self.rotations == Some(0) {
            return Err(Error::Config("rotations: must be ≥ 1".into()));
        }
        if let Some(p) = &self.pde {
            p.validate()?;
        }
        Ok(d)
    }
}

/// Componentwise mean and standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub labels: Vec<String>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub paths: u64,
}

impl McEstimate {
    pub fn get(&self, label: &str) -> Option<(f64, f64)> {
        self.labels.iter().position(|l| l == label).map(|i| (self.mean[i], self.stderr[i]))
    }

    /// Estimate for signature word `w`.
    pub fn sig(&self, w: &[usize]) -> Option<(f64, f64)> {
        self.get(&sig_label(&Word(w.to_vec())))
    }

    /// Estimate for development component `i` (1-based).
    pub fn dev(&self, i: usize) -> Option<(f64, f64)> {
        self.get(&format!("dev:{i}"))
    }

    pub fn signature_mean(&self, d: usize, n: usize) -> Result<TruncatedTensor> {
        let mut t = TruncatedTensor::zeros(d, n)?;
        for k in 0..=n {
            for idx in 0..d.pow(k as u32) {
                let w = Word::from_index(idx, k, d);
                let (m, _) = self.get(&sig_label(&w)).ok_or_else(|| Error::Shape(format!("no estimate for {w}")))?;
                t.set(&w, m)?;
            }
        }
        Ok(t)
    }

    pub fn development_mean(&self, d: usize) -> Result<DevVector> {
        let v = (1..=d + 1)
            .map(|i| self.dev(i).map(|x| x.0).ok_or_else(|| Error::Shape(format!("no dev:{i}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(DevVector::from_vec(v))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "component,mean,stderr")?;
        for i in 0..self.labels.len() {
            writeln!(w, "{},{:e},{:e}", self.labels[i], self.mean[i], self.stderr[i])?;
        }
        Ok(())
    }
}

fn sig_label(w: &Word) -> String {
    format!("sig:{w}")
}

/// Which per-path quantities to accumulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outputs {
    pub tau: bool,
    pub signature: Option<usize>,
    pub development: Option<f64>,
}

fn check_start(domain: &DomainSpec, start: &[f64], step: f64) -> Result<usize> {
    let d = domain.validate()?;
    if start.len() != d {
        return Err(Error::Shape(format!("start has {} coordinates, domain has {d}", start.len())));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Range(format!("step must be > 0, got {step}")));
    }
    if !domain.contains(start) {
        return Err(Error::Range("start is not an interior point".into()));
    }
    Ok(d)
}

/// Runs the Euler walk until it leaves the domain, feeding each increment to
/// `on_inc`; the last increment ends on the boundary. A step ends the walk when
/// its end vertex is outside the closed domain, or when the Brownian bridge
/// between two interior vertices is sampled to have crossed the boundary
/// (probability exp(−2δ₀δ₁/Δt) for boundary distances δ₀, δ₁); the latter
/// removes the O(√Δt) bias of discrete monitoring. `map` may transform the
/// standard normals before use. Returns the exit time estimate.
fn walk<M, F>(domain: &DomainSpec, start: &[f64], step: f64, rng: &mut GaussianStream, mut map: M, mut on_inc: F) -> Result<f64>
where
    M: FnMut(&mut [f64]),
    F: FnMut(&[f64]),
{
    let d = start.len();
    let sq = step.sqrt();
    let mut x = [0.0; MAX_DIM];
    let mut y = [0.0; MAX_DIM];
    let mut z = [0.0; MAX_DIM];
    let mut inc = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM];
    x[..d].copy_from_slice(start);
    let mut dx = domain.boundary_distance(&x[..d]);
    for k in 0..MAX_STEPS {
        rng.fill_gaussian(&mut z[..d]);
        map(&mut z[..d]);
        for i in 0..d {
            inc[i] = sq * z[i];
            y[i] = x[i] + inc[i];
        }
        if domain.level(&y[..d]) >= 0.0 {
            let t = domain.boundary_crossing(&x[..d], &y[..d], &mut b[..d]);
            for i in 0..d {
                inc[i] = b[i] - x[i];
            }
            on_inc(&inc[..d]);
            return Ok((k as f64 + t) * step);
        }
        let dy = domain.boundary_distance(&y[..d]);
        let e = 2.0 * dx * dy / step;
        // below e^{-40} the uniform is not drawn at all
        if e < 40.0 && rng.uniform() < (-e).exp() {
            // exit through the boundary point nearest y along the normal
            let mut g = [0.0; MAX_DIM];
            domain.gradient(&y[..d], &mut g[..d]);
            let gn = g[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            let reach = 2.0 * dy.max(0.0) + sq;
            let mut far = [0.0; MAX_DIM];
            for i in 0..d {
                far[i] = y[i] + reach * g[i] / gn;
            }
            if gn > 0.0 && domain.level(&far[..d]) > 0.0 {
                domain.boundary_crossing(&y[..d], &far[..d], &mut b[..d]);
                for i in 0..d {
                    inc[i] = b[i] - x[i];
                }
                on_inc(&inc[..d]);
                return Ok((k as f64 + 0.5) * step);
            }
        }
        on_inc(&inc[..d]);
        x = y;
        dx = dy;
    }
    Err(Error::NoExit(MAX_STEPS))
}

/// One sampled exit path; its last vertex lies on the boundary.
pub fn simulate_exit_path(domain: &DomainSpec, start: &[f64], step: f64, rng: &mut GaussianStream) -> Result<Polyline> {
    simulate_exit_path_with(domain, start, step, rng, |_| {})
}

/// As [`simulate_exit_path`], with `map` applied to every normal draw (e.g. a
/// rotation or reflection of the increment stream).
pub fn simulate_exit_path_with<M: FnMut(&mut [f64])>(
    domain: &DomainSpec,
    start: &[f64],
    step: f64,
    rng: &mut GaussianStream,
    map: M,
) -> Result<Polyline> {
    check_start(domain, start, step)?;
    let mut verts = vec![start.to_vec()];
    let mut cur = start.to_vec();
    walk(domain, start, step, rng, map, |inc| {
        for (c, v) in cur.iter_mut().zip(inc) {
            *c += v;
        }
        verts.push(cur.clone());
    })?;
    Polyline::new(verts)
}

struct Layout {
    d: usize,
    width: usize,
}

fn layout(d: usize, out: &Outputs) -> Layout {
    let sig_len = out.signature.map_or(0, |n| (0..=n).map(|k| d.pow(k as u32)).sum());
    let width = out.tau as usize + sig_len + if out.development.is_some() { d + 1 } else { 0 };
    Layout { d, width }
}

fn labels(l: &Layout, out: &Outputs) -> Vec<String> {
    let mut v = vec![];
    if out.tau {
        v.push("tau".to_string());
    }
    if let Some(n) = out.signature {
        for k in 0..=n {
            for idx in 0..l.d.pow(k as u32) {
                v.push(sig_label(&Word::from_index(idx, k, l.d)));
            }
        }
    }
    if out.development.is_some() {
        v.extend((1..=l.d + 1).map(|i| format!("dev:{i}")));
    }
    v
}

/// Samples for one path written into `row`.
fn sample_path(
    domain: &DomainSpec,
    start: &[f64],
    step: f64,
    g: &mut GaussianStream,
    out: &Outputs,
    l: &Layout,
    row: &mut [f64],
) -> Result<()> {
    let d = l.d;
    let mut sig = match out.signature {
        Some(n) => Some(TruncatedTensor::unit(d, n)?),
        None => None,
    };
    let mut dev = out.development.map(|_| DMatrix::<f64>::identity(d + 1, d + 1));
    let lambda = out.development.unwrap_or(0.0);
    let mut buf = vec![0.0; d + 1];
    let mut err = None;
    let tau = walk(domain, start, step, g, |_| {}, |inc| {
        if let Some(s) = sig.as_mut() {
            if let Err(e) = s.mul_segment_exp(inc) {
                err.get_or_insert(e);
            }
        }
        if let Some(m) = dev.as_mut() {
            mul_segment_development(m, inc, lambda, &mut buf);
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let mut k = 0;
    if out.tau {
        row[0] = tau;
        k = 1;
    }
    if let Some(s) = &sig {
        for (_, _, v) in s.entries() {
            row[k] = v;
            k += 1;
        }
    }
    if let Some(m) = &dev {
        let h = m * base_point(d);
        if !h.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow(lambda));
        }
        row[k..k + d + 1].copy_from_slice(h.as_slice());
    }
    Ok(())
}

/// Core estimator: path `i` runs in `domains[i / per_domain]` with substream `i`.
fn estimate(
    domains: &[DomainSpec],
    start: &[f64],
    step: f64,
    seed: u64,
    paths: u64,
    out: Outputs,
) -> Result<McEstimate> {
    let d = check_start(&domains[0], start, step)?;
    for dm in &domains[1..] {
        check_start(dm, start, step)?;
    }
    let l = layout(d, &out);
    let per_domain = paths.div_ceil(domains.len() as u64);
    let nchunks = paths.div_ceil(CHUNK);
    let chunk_sums: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let mut s = vec![0.0; l.width];
            let mut s2 = vec![0.0; l.width];
            let mut row = vec![0.0; l.width];
            for i in c * CHUNK..((c + 1) * CHUNK).min(paths) {
                let dom = &domains[(i / per_domain) as usize];
                let mut g = GaussianStream::new(seed, i);
                sample_path(dom, start, step, &mut g, &out, &l, &mut row)?;
                for j in 0..l.width {
                    s[j] += row[j];
                    s2[j] += row[j] * row[j];
                }
            }
            Ok((s, s2))
        })
        .collect();
    let mut s = vec![0.0; l.width];
    let mut s2 = vec![0.0; l.width];
    for cs in chunk_sums {
        let (a, b) = cs?;
        for j in 0..l.width {
            s[j] += a[j];
            s2[j] += b[j];
        }
    }
    let n = paths as f64;
    let mean: Vec<f64> = s.iter().map(|x| x / n).collect();
    let stderr = (0..l.width)
        .map(|j| {
            if paths < 2 {
                return 0.0;
            }
            let var = ((s2[j] - n * mean[j] * mean[j]) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(McEstimate { labels: labels(&l, &out), mean, stderr, paths })
}

/// Estimates τ, the expected signature up to `level` and (if λ ≠ 0 or asked)
/// the development in a single pass over the paths.
pub fn mc_estimate(domain: &DomainSpec, cfg: &McConfig, out: Outputs) -> Result<McEstimate> {
    estimate(std::slice::from_ref(domain), &cfg.start, cfg.step, cfg.seed, cfg.paths, out)
}

pub fn mc_expected_signature(domain: &DomainSpec, cfg: &McConfig) -> Result<McEstimate> {
    mc_estimate(domain, cfg, Outputs { tau: false, signature: Some(cfg.level), development: None })
}

pub fn mc_exit_time(domain: &DomainSpec, cfg: &McConfig) -> Result<McEstimate> {
    mc_estimate(domain, cfg, Outputs { tau: true, signature: None, development: None })
}

pub fn mc_development(domain: &DomainSpec, cfg: &McConfig) -> Result<McEstimate> {
    mc_estimate(domain, cfg, Outputs { tau: false, signature: None, development: Some(cfg.lambda) })
}

/// Development averaged over the given rotations of the domain; the paths are
/// split evenly between them.
pub fn mc_averaged_development_with(
    domain: &DomainSpec,
    cfg: &McConfig,
    rotations: &[DMatrix<f64>],
) -> Result<McEstimate> {
    if rotations.is_empty() {
        return Err(Error::Range("need at least one rotation".into()));
    }
    let doms: Vec<DomainSpec> = rotations.iter().map(|r| domain.clone().rotated(r)).collect();
    let out = Outputs { tau: false, signature: None, development: Some(cfg.lambda) };
    estimate(&doms, &cfg.start, cfg.step, cfg.seed, cfg.paths, out)
}

/// The Haar rotations used by [`mc_domain_averaged_development`].
pub fn sample_rotations(d: usize, seed: u64, count: usize) -> Vec<DMatrix<f64>> {
    (0..count as u64)
        .map(|k| haar_rotation(d, &mut GaussianStream::new(seed, ROTATION_STREAM + k)))
        .collect()
}

/// Haar-averaged development over `rotations` random rotations of the domain.
pub fn mc_domain_averaged_development(domain: &DomainSpec, cfg: &McConfig, rotations: usize) -> Result<McEstimate> {
    let d = domain.validate()?;
    if let Some(rho) = domain.rotation_invariant_core() {
        let r = cfg.start.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r >= rho {
            return Err(Error::Range(format!("start |z| = {r} is not inside every rotated domain (core radius {rho})")));
        }
    }
    mc_averaged_development_with(domain, cfg, &sample_rotations(d, cfg.seed, rotations))
}

/// Runs `f` on a pool with `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("threads: {e}")))?;
    Ok(pool.install(f))
}
