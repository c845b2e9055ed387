//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Each export wraps a plain Rust function returning `Result<_, String>`, so
//! the logic is testable natively.

use wasm_bindgen::prelude::*;

use sighyp::bessel::{h_general_domain, numerator_ball, theta};
use sighyp::development::polyline_development;
use sighyp::signature::Polyline;
use sighyp::verify::{blowup_scan, bracket_theta_root, DEFAULT_DELTAS};

/// Rows (λ, Θ, 𝒩, h^{(d+1)}(0)) flattened; h is NaN at a root of Θ.
pub fn profile_rows(d: usize, from: f64, to: f64, samples: usize) -> Result<Vec<f64>, String> {
    if !(2..=100_000).contains(&samples) || !(from < to) {
        return Err("need 2 ≤ samples ≤ 100000 and from < to".into());
    }
    let mut out = Vec::with_capacity(4 * samples);
    for k in 0..samples {
        let l = from + (to - from) * k as f64 / (samples - 1) as f64;
        out.push(l);
        out.push(theta(l, d).map_err(|e| e.to_string())?);
        out.push(numerator_ball(l, d).map_err(|e| e.to_string())?);
        out.push(h_general_domain(0.0, 1.0, l, d, 0.0, 1.0).map(|x| x.1).unwrap_or(f64::NAN));
    }
    Ok(out)
}

/// Development of the polyline with row-major `vertices` of dimension `dim`.
pub fn develop_polyline(vertices: &[f64], dim: usize, lambda: f64) -> Result<Vec<f64>, String> {
    if dim == 0 || !vertices.len().is_multiple_of(dim) {
        return Err(format!("{} coordinates do not split into points of dimension {dim}", vertices.len()));
    }
    let p = Polyline::new(vertices.chunks(dim).map(<[f64]>::to_vec).collect()).map_err(|e| e.to_string())?;
    let h = polyline_development(&p, lambda).map_err(|e| e.to_string())?;
    Ok(h.iter().copied().collect())
}

/// Text report of |h^{(d+1)}(0)| approaching the root of Θ.
pub fn blowup_text(d: usize, eps: f64, p: f64, q: f64) -> Result<String, String> {
    blowup_scan(d, eps, p, q, &DEFAULT_DELTAS).map(|r| r.to_text()).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn profile(d: usize, from: f64, to: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    profile_rows(d, from, to, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn develop(vertices: &[f64], dim: usize, lambda: f64) -> Result<Vec<f64>, JsError> {
    develop_polyline(vertices, dim, lambda).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn blowup(d: usize, eps: f64, p: f64, q: f64) -> Result<String, JsError> {
    blowup_text(d, eps, p, q).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn theta_root(d: usize) -> Result<f64, JsError> {
    bracket_theta_root(d, 2.5, 3.0, 1e-10).map(|b| b.root).map_err(|e| JsError::new(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_shape_and_sign_change() {
        let v = profile_rows(2, 2.5, 3.0, 11).unwrap();
        assert_eq!(v.len(), 44);
        assert!(v[1] < 0.0 && v[41] > 0.0);
        assert!(profile_rows(2, 3.0, 2.5, 11).is_err());
        assert!(profile_rows(12, 2.5, 3.0, 11).is_err());
    }

    #[test]
    fn development_on_hyperboloid() {
        let h = develop_polyline(&[0.0, 0.0, 1.0, 0.0, 1.0, 1.0], 2, 0.5).unwrap();
        assert_eq!(h.len(), 3);
        let q = h[2] * h[2] - h[0] * h[0] - h[1] * h[1];
        assert!((q - 1.0).abs() < 1e-12);
        assert!(develop_polyline(&[0.0, 0.0, 1.0], 2, 0.5).is_err());
    }

    #[test]
    fn blowup_report() {
        let t = blowup_text(3, 1.0, 0.0, 1.0).unwrap();
        assert!(t.contains("PASS") && !t.contains("FAIL"));
    }
}
