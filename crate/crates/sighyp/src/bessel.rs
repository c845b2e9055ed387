//! Bessel functions J_ν of complex argument for integer and half-integer ν,
//! truncated Taylor sums with remainder bounds, the dimension constants, and
//! the closed-form radial solutions (h^{(1)}, h^{(d+1)}) on balls.
//!
//! Truncation convention: `terms = n` keeps k = 0..n−1 of
//! J_ν(z) = (z/2)^ν Σ_k (−z²/4)^k / (k! Γ(k+ν+1)).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::interval::{CInterval, CertInterval};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// 2ν as an integer; ν must be a non-negative multiple of ½.
pub fn twice_order(nu: f64) -> Result<u32> {
    let t = 2.0 * nu;
    if t < 0.0 || t.fract() != 0.0 || t > 400.0 {
        return Err(Error::Range(format!("order ν = {nu} must be a non-negative half-integer")));
    }
    Ok(t as u32)
}

/// Γ(m/2) for m ≥ 1: factorial for even m, (m−2)!!·√π / 2^{(m−1)/2} for odd m.
pub fn gamma_half(m: u32) -> f64 {
    assert!(m >= 1);
    if m.is_multiple_of(2) {
        (1..m / 2).map(|k| k as f64).product()
    } else {
        let mut df = 1.0;
        let mut j = m as i64 - 2;
        while j > 1 {
            df *= j as f64;
            j -= 2;
        }
        df * SQRT_PI / 2f64.powi(((m - 1) / 2) as i32)
    }
}

/// Enclosure of Γ(m/2).
pub fn gamma_half_ci(m: u32) -> CertInterval {
    assert!(m >= 1);
    let mut g = if m.is_multiple_of(2) { CertInterval::point(1.0) } else { CertInterval::pi().sqrt() };
    let mut j = if m.is_multiple_of(2) { 2 } else { 1 };
    // Γ(x+1) = x Γ(x), starting from Γ(1) or Γ(½)
    while j < m {
        g = g * CertInterval::point(j as f64 / 2.0);
        j += 2;
    }
    g
}

fn half_power(z: C64, nu2: u32) -> C64 {
    let base = z.powi((nu2 / 2) as i32);
    if nu2 % 2 == 1 {
        base * z.sqrt()
    } else {
        base
    }
}

/// Σ_{k<terms} (−z²/4)^k / (k! Γ(k+ν+1)); J_ν(z) = (z/2)^ν times this.
pub fn bessel_series(nu: f64, z: C64, terms: usize) -> Result<C64> {
    let nu2 = twice_order(nu)?;
    let w = -z * z / 4.0;
    let mut t = C64::new(1.0 / gamma_half(nu2 + 2), 0.0);
    let mut s = C64::new(0.0, 0.0);
    for k in 0..terms {
        if k > 0 {
            t = t * w / (k as f64 * (k as f64 + nu));
        }
        s += t;
    }
    Ok(s)
}

/// Truncated J̊_ν with the given number of terms (principal branch of (z/2)^ν).
pub fn bessel_j(nu: f64, z: C64, terms: usize) -> Result<C64> {
    let nu2 = twice_order(nu)?;
    Ok(half_power(z / 2.0, nu2) * bessel_series(nu, z, terms)?)
}

/// Enough terms that the tail is far below f64 resolution.
pub fn terms_for(z: C64) -> usize {
    let a = z.norm();
    (2.0 * a + 30.0).ceil() as usize
}

/// J_ν(z) to full double precision for moderate |z|.
pub fn bessel_j_full(nu: f64, z: C64) -> Result<C64> {
    bessel_j(nu, z, terms_for(z))
}

/// J_ν and J_ν′ together, using J_ν′ = (ν/z) J_ν − J_{ν+1}.
pub fn bessel_j_and_deriv(nu: f64, z: C64) -> Result<(C64, C64)> {
    let j = bessel_j_full(nu, z)?;
    let jp1 = bessel_j_full(nu + 1.0, z)?;
    Ok((j, nu / z * j - jp1))
}

/// The remainder bound |J_ν − J̊_ν| ≤ (|z|/2)^{2n+ν} / (n! Γ(n+ν+1)) / (1 − |z|²/(4(n+1)²)),
/// valid for |z| < 2(n+1); `n` is the number of kept terms.
pub fn remainder_bound(nu: f64, z: C64, n: usize) -> Result<f64> {
    remainder_bound_abs(nu, z.norm(), n)
}

pub fn remainder_bound_abs(nu: f64, abs_z: f64, n: usize) -> Result<f64> {
    let nu2 = twice_order(nu)?;
    let limit = 2.0 * (n as f64 + 1.0);
    if abs_z >= limit {
        return Err(Error::BoundInvalid { abs_z, limit });
    }
    let x = abs_z / 2.0;
    let mut v = half_power(C64::new(x, 0.0), nu2).re / gamma_half(nu2 + 2);
    for k in 1..=n {
        v *= x * x / (k as f64 * (k as f64 + nu));
    }
    Ok(v / (1.0 - x * x / ((n as f64 + 1.0) * (n as f64 + 1.0))))
}

/// Upper bound of the same quantity, evaluated in interval arithmetic.
pub fn remainder_bound_certified(nu: f64, abs_z_hi: f64, n: usize) -> Result<f64> {
    let nu2 = twice_order(nu)?;
    let limit = 2.0 * (n as f64 + 1.0);
    if abs_z_hi >= limit {
        return Err(Error::BoundInvalid { abs_z: abs_z_hi, limit });
    }
    let x = CertInterval::point(abs_z_hi) / CertInterval::point(2.0);
    let xnu = x.powi(nu2 / 2) * if nu2 % 2 == 1 { x.sqrt() } else { CertInterval::point(1.0) };
    let mut v = xnu / gamma_half_ci(nu2 + 2);
    let x2 = x.sqr();
    for k in 1..=n {
        v = v * x2 / CertInterval::point(k as f64 * (k as f64 + nu));
    }
    let n1 = CertInterval::point((n as f64 + 1.0) * (n as f64 + 1.0));
    let den = CertInterval::point(1.0) - x2 / n1;
    Ok((v / den).hi)
}

/// A coarser variant with Γ(n+ν+1) replaced by n!·n^⌊ν⌋·Γ(1+{ν}) ≤ Γ(n+ν+1).
/// Still an upper bound; it is the one behind the reference error columns.
pub fn coarse_remainder_bound(abs_z: f64, n: usize, nu: f64) -> Result<f64> {
    let nu2 = twice_order(nu)?;
    let limit = 2.0 * (n as f64 + 1.0);
    if abs_z >= limit || n == 0 {
        return Err(Error::BoundInvalid { abs_z, limit });
    }
    let x = abs_z / 2.0;
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let frac_gamma = if nu2 % 2 == 1 { SQRT_PI / 2.0 } else { 1.0 };
    let den = fact * fact * (n as f64).powi((nu2 / 2) as i32) * frac_gamma;
    let geo = 1.0 / (1.0 - x * x / ((n as f64 + 1.0) * (n as f64 + 1.0)));
    Ok(x.powf(2.0 * n as f64 + nu) / den * geo)
}

/// Interval Horner sum Σ_{k<terms} (−w)^k / (k! Γ(k+ν+1)) for w = z²/4.
pub fn bessel_series_certified(nu: f64, w: CInterval, terms: usize) -> Result<CInterval> {
    let nu2 = twice_order(nu)?;
    if terms == 0 {
        return Ok(CInterval::point(0.0, 0.0));
    }
    let mut coef = Vec::with_capacity(terms);
    let mut c = gamma_half_ci(nu2 + 2).recip();
    coef.push(c);
    for k in 1..terms {
        c = c / CertInterval::point(k as f64 * (k as f64 + nu));
        coef.push(c);
    }
    let mw = -w;
    let mut s = CInterval::real(coef[terms - 1]);
    for k in (0..terms - 1).rev() {
        s = CInterval::real(coef[k]) + mw * s;
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// dimension constants

#[derive(Debug, Clone, Copy)]
pub struct DimConstants {
    pub d: usize,
    pub upsilon: f64,
    pub beta_p: C64,
    pub beta_m: C64,
    pub eta_p: C64,
    pub eta_m: C64,
    /// d = 2 only: ζ = β₊/2, a root of z⁴ + z² + 2.
    pub zeta: Option<C64>,
    /// d = 2 only: α = ζ + ζ³/2.
    pub alpha: Option<C64>,
}

pub fn dim_constants(d: usize) -> Result<DimConstants> {
    if !(2..=8).contains(&d) {
        return Err(Error::Dimension(d));
    }
    let df = d as f64;
    let upsilon = ((df - 1.0) * (9.0 - df)).sqrt();
    let sd = df.sqrt();
    let beta_p = C64::new((2.0 * sd + df - 3.0).sqrt(), (2.0 * sd - df + 3.0).sqrt());
    let eta_p = C64::new(df + 3.0, upsilon);
    let (zeta, alpha) = if d == 2 {
        let z = beta_p / 2.0;
        (Some(z), Some(z + z * z * z / 2.0))
    } else {
        (None, None)
    };
    Ok(DimConstants {
        d,
        upsilon,
        beta_p,
        beta_m: beta_p.conj(),
        eta_p,
        eta_m: eta_p.conj(),
        zeta,
        alpha,
    })
}

/// Interval versions of |β| = 2 d^{1/4}, β₊ and η₋.
#[derive(Debug, Clone, Copy)]
pub struct DimConstantsCert {
    pub d: usize,
    pub beta_abs: CertInterval,
    pub beta_p: CInterval,
    pub eta_m: CInterval,
}

pub fn dim_constants_certified(d: usize) -> Result<DimConstantsCert> {
    if !(2..=8).contains(&d) {
        return Err(Error::Dimension(d));
    }
    let df = CertInterval::point(d as f64);
    let sd = df.sqrt();
    let three = CertInterval::point(3.0);
    let two = CertInterval::point(2.0);
    let re = (two * sd + df - three).sqrt();
    let im = (two * sd - df + three).sqrt();
    let ups = ((df - CertInterval::point(1.0)) * (CertInterval::point(9.0) - df)).sqrt();
    Ok(DimConstantsCert {
        d,
        beta_abs: two * sd.sqrt(),
        beta_p: CInterval::new(re, im),
        eta_m: CInterval::new(df + 3.0, -ups),
    })
}

fn nu_of(d: usize) -> f64 {
    d as f64 / 2.0
}

// ---------------------------------------------------------------------------
// Θ and 𝒩

/// Θ(λ) = Im{η₋β₋ [J_{d/2−1}(λβ₊/2)]^† J_{d/2}(λβ₊/2)}.
pub fn theta(lambda: f64, d: usize) -> Result<f64> {
    let c = dim_constants(d)?;
    let w = lambda * c.beta_p / 2.0;
    theta_with(lambda, d, terms_for(w))
}

/// |η₋β₋ J_{d/2−1} J_{d/2}|, the size Θ is compared with when testing for a zero.
pub fn theta_scale(lambda: f64, d: usize) -> Result<f64> {
    let c = dim_constants(d)?;
    let w = lambda * c.beta_p / 2.0;
    let nu = nu_of(d);
    Ok((c.eta_m * c.beta_m).norm() * bessel_j_full(nu - 1.0, w)?.norm() * bessel_j_full(nu, w)?.norm())
}

pub fn theta_with(lambda: f64, d: usize, terms: usize) -> Result<f64> {
    let c = dim_constants(d)?;
    let nu = nu_of(d);
    let w = lambda * c.beta_p / 2.0;
    let a = bessel_j(nu - 1.0, w, terms)?;
    let b = bessel_j(nu, w, terms)?;
    Ok((c.eta_m * c.beta_m * a.conj() * b).im)
}

/// Θ enclosed for every λ in `lambda`: truncated sum in interval arithmetic plus
/// the remainder bound at the largest |z|.
pub fn theta_certified(lambda: CertInterval, d: usize, terms: usize) -> Result<CertInterval> {
    let c = dim_constants_certified(d)?;
    let nu = nu_of(d);
    let quarter = CertInterval::point(0.25);
    // u = λβ₊/4 = w/2, and conj(J_{ν−1}(w))·J_ν(w) = |u|^{d−2}·u·conj(S_{ν−1})·S_ν
    let u = c.beta_p.scale(lambda * quarter);
    let w2 = u * u; // (w/2)² = w²/4
    let s1 = bessel_series_certified(nu - 1.0, w2, terms)?;
    let s2 = bessel_series_certified(nu, w2, terms)?;
    let abs_u = c.beta_abs * lambda * quarter;
    let pref = abs_u.powi(d as u32 - 2);
    let eb = c.eta_m * c.beta_p.conj();
    let core = (eb * u * s1.conj() * s2).im * pref;
    // remainder: |ηβ|·(E₁|J̊₂| + |J̊₁|E₂ + E₁E₂) at |w| = 2|u|
    let abs_w_hi = (abs_u * CertInterval::point(2.0)).hi;
    let e1 = remainder_bound_certified(nu - 1.0, abs_w_hi, terms)?;
    let e2 = remainder_bound_certified(nu, abs_w_hi, terms)?;
    let pow_half = |x: CertInterval, nu: f64| {
        let n2 = (2.0 * nu) as u32;
        x.powi(n2 / 2) * if n2 % 2 == 1 { x.sqrt() } else { CertInterval::point(1.0) }
    };
    let j1 = (pow_half(abs_u, nu - 1.0) * s1.abs()).hi;
    let j2 = (pow_half(abs_u, nu) * s2.abs()).hi;
    let e1i = CertInterval::point(e1);
    let e2i = CertInterval::point(e2);
    let err = eb.abs() * (e1i * j2 + CertInterval::point(j1) * e2i + e1i * e2i);
    Ok(core.pm(err.hi))
}

/// 𝒩(λ) = Γ(d/2)^{−1}·Im(η₋β₋ (λβ₋/4)^{d/2−1} J_{d/2}(λβ₊/2)), the limit r^{1−d/2}(…) at r → 0.
pub fn numerator_ball(lambda: f64, d: usize) -> Result<f64> {
    let c = dim_constants(d)?;
    numerator_ball_with(lambda, d, terms_for(lambda * c.beta_p / 2.0))
}

pub fn numerator_ball_with(lambda: f64, d: usize, terms: usize) -> Result<f64> {
    let c = dim_constants(d)?;
    let nu = nu_of(d);
    let pre = half_power(lambda * c.beta_m / 4.0, (2.0 * (nu - 1.0)) as u32);
    let j = bessel_j(nu, lambda * c.beta_p / 2.0, terms)?;
    Ok((c.eta_m * c.beta_m * pre * j).im / gamma_half(d as u32))
}

/// Error bound for `numerator_ball_with` when the sum keeps `terms` terms.
fn numerator_ball_cert_parts(
    lambda: CertInterval,
    d: usize,
    terms: usize,
) -> Result<(CertInterval, f64)> {
    let c = dim_constants_certified(d)?;
    let nu = nu_of(d);
    let quarter = CertInterval::point(0.25);
    let u = c.beta_p.scale(lambda * quarter);
    let s = bessel_series_certified(nu, u * u, terms)?;
    // 𝒩̊ = (λ/4)^{d−1}·|β|^d/Γ(d/2)·Im(η₋ S_ν)
    let g = gamma_half_ci(d as u32);
    let lam4 = lambda * quarter;
    let val = lam4.powi(d as u32 - 1) * c.beta_abs.powi(d as u32) / g * (c.eta_m * s).im;
    // |η₋β₋ (λβ₋/4)^{ν−1}|/Γ = 4√d·|β|·(λ|β|/4)^{ν−1}/Γ
    let abs_u = c.beta_abs * lam4;
    let n2 = (2.0 * (nu - 1.0)) as u32;
    let upow = abs_u.powi(n2 / 2) * if n2 % 2 == 1 { abs_u.sqrt() } else { CertInterval::point(1.0) };
    let four_sqrt_d = CertInterval::point(4.0) * CertInterval::point(d as f64).sqrt();
    let p1 = four_sqrt_d * c.beta_abs * upow / g;
    let e = remainder_bound_certified(nu, (abs_u * CertInterval::point(2.0)).hi, terms)?;
    Ok((val, (p1 * CertInterval::point(e)).hi))
}

pub fn numerator_ball_certified(lambda: CertInterval, d: usize, terms: usize) -> Result<CertInterval> {
    let (v, e) = numerator_ball_cert_parts(lambda, d, terms)?;
    Ok(v.pm(e))
}

/// 𝒩⁽¹⁾ and 𝒩⁽²⁾ for the general-domain numerator, ε = 1 scaling (μ = ελ).
pub fn numerators_general(mu: f64, d: usize) -> Result<(f64, f64)> {
    let c = dim_constants(d)?;
    numerators_general_with(mu, d, terms_for(mu * c.beta_p / 2.0))
}

pub fn numerators_general_with(mu: f64, d: usize, terms: usize) -> Result<(f64, f64)> {
    let c = dim_constants(d)?;
    let nu = nu_of(d);
    let n1 = numerator_ball_with(mu, d, terms)?;
    let pre = half_power(mu * c.beta_p / 4.0, (2.0 * (nu - 1.0)) as u32);
    let j = bessel_j(nu - 1.0, mu * c.beta_m / 2.0, terms)?;
    let k = c.eta_p * c.beta_p * c.eta_m * c.beta_m / (8.0 * d as f64);
    Ok((n1, (k * j * pre).im / gamma_half(d as u32)))
}

/// Enclosures of (𝒩⁽¹⁾, 𝒩⁽²⁾) over `mu`.
pub fn numerators_general_certified(
    mu: CertInterval,
    d: usize,
    terms: usize,
) -> Result<(CertInterval, CertInterval)> {
    let n1 = numerator_ball_certified(mu, d, terms)?;
    let c = dim_constants_certified(d)?;
    let nu = nu_of(d);
    let quarter = CertInterval::point(0.25);
    let lam4 = mu * quarter;
    // 𝒩⁽²⁾ = 2|β|^d (μ/4)^{d−2}/Γ(d/2) · Im S_{ν−1}(μβ₋/2)
    let um = c.beta_p.conj().scale(lam4);
    let s = bessel_series_certified(nu - 1.0, um * um, terms)?;
    let g = gamma_half_ci(d as u32);
    let two = CertInterval::point(2.0);
    let val = two * c.beta_abs.powi(d as u32) * lam4.powi(d as u32 - 2) / g * s.im;
    // |η₊β₊η₋β₋/(8d)·(μβ₊/4)^{ν−1}|/Γ = 2|β|²·(μ|β|/4)^{ν−1}/Γ
    let abs_u = c.beta_abs * lam4;
    let n2 = (2.0 * (nu - 1.0)) as u32;
    let upow = abs_u.powi(n2 / 2) * if n2 % 2 == 1 { abs_u.sqrt() } else { CertInterval::point(1.0) };
    let p2 = two * c.beta_abs.sqr() * upow / g;
    let e = remainder_bound_certified(nu - 1.0, (abs_u * two).hi, terms)?;
    Ok((n1, val.pm((p2 * CertInterval::point(e)).hi)))
}

// ---------------------------------------------------------------------------
// closed-form radial solutions

/// `value` counts as a zero when it is below 1e-13 relative to `scale`.
fn pole_check(which: &'static str, value: f64, scale: f64) -> Result<()> {
    if !value.is_finite() || value.abs() <= 1e-13 * scale {
        return Err(Error::Pole { which, value });
    }
    Ok(())
}

/// Value, first and second r-derivatives of r^a · Im{c · J_ν(k r)}.
fn radial_term(r: f64, a: f64, c: C64, nu: f64, k: C64) -> Result<[f64; 3]> {
    let x = k * r;
    let (j, jp) = bessel_j_and_deriv(nu, x)?;
    // Bessel's equation: J″ = −J′/x − (1 − ν²/x²) J
    let jpp = -jp / x - (1.0 - nu * nu / (x * x)) * j;
    let g = c * j;
    let g1 = c * k * jp;
    let g2 = c * k * k * jpp;
    let p = r.powf(a);
    let p1 = a * r.powf(a - 1.0);
    let p2 = a * (a - 1.0) * r.powf(a - 2.0);
    Ok([
        p * g.im,
        (p1 * g + p * g1).im,
        (p2 * g + 2.0 * p1 * g1 + p * g2).im,
    ])
}

/// (h^{(1)}, h^{(d+1)}) on the unit ball with h^{(1)}(1) = 0, h^{(d+1)}(1) = 1,
/// each as [value, d/dr, d²/dr²].
pub fn ball_solution(r: f64, lambda: f64, d: usize) -> Result<([f64; 3], [f64; 3])> {
    general_solution(r, 1.0, lambda, d, 0.0, 1.0)
}

/// Radial solution on B(0, ε) with h^{(1)}(ε) = p and h^{(d+1)}(ε) = q, with derivatives.
pub fn general_solution(
    r: f64,
    eps: f64,
    lambda: f64,
    d: usize,
    p: f64,
    q: f64,
) -> Result<([f64; 3], [f64; 3])> {
    if !(r > 0.0 && r <= eps) {
        return Err(Error::Range(format!("need 0 < r ≤ ε, got r = {r}, ε = {eps}")));
    }
    let c = dim_constants(d)?;
    let nu = nu_of(d);
    let df = d as f64;
    let a = 1.0 - nu;
    let bp = c.beta_p;
    let bm = c.beta_m;
    let em = c.eta_m;
    let ep = c.eta_p;
    let le = lambda * eps;
    let jnm1_me = bessel_j_full(nu - 1.0, le * bm / 2.0)?;
    let jn_pe = bessel_j_full(nu, le * bp / 2.0)?;
    let jn_me = bessel_j_full(nu, le * bm / 2.0)?;
    let den_c = em * bm * jnm1_me * jn_pe;
    let den = den_c.im;
    pole_check("Θ", den, den_c.norm())?;
    // r^{1−d/2} is normalised by ε^{1−d/2}
    let sc = eps.powf(-a) / den;
    let k_p = lambda * bp / 2.0;
    let k_m = lambda * bm / 2.0;
    let h1a = radial_term(r, a, em * bm * jnm1_me, nu, k_p)?;
    let h1b = radial_term(r, a, jn_me, nu, k_p)?;
    let hda = radial_term(r, a, ep * bp * em * bm * jnm1_me / (8.0 * df), nu - 1.0, k_p)?;
    let hdb = radial_term(r, a, em * bm * jn_pe, nu - 1.0, k_m)?;
    let mut h1 = [0.0; 3];
    let mut hd = [0.0; 3];
    for i in 0..3 {
        h1[i] = sc * (p * h1a[i] + 8.0 * df * q * h1b[i]);
        // the p-part enters with a minus sign (checked against the ODE)
        hd[i] = sc * (q * hdb[i] - p * hda[i]);
    }
    Ok((h1, hd))
}

pub fn h1_closed_form(r: f64, lambda: f64, d: usize) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(ball_solution(r, lambda, d)?.0[0])
}

/// h^{(d+1)} on the unit ball; r = 0 gives the limit 𝒩(λ)/Θ(λ).
pub fn hd1_closed_form(r: f64, lambda: f64, d: usize) -> Result<f64> {
    if r == 0.0 {
        return hd1_at_zero(lambda, d);
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    Ok(ball_solution(r, lambda, d)?.1[0])
}

pub fn hd1_at_zero(lambda: f64, d: usize) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(1.0);
    }
    let th = theta(lambda, d)?;
    pole_check("Θ", th, theta_scale(lambda, d)?)?;
    Ok(numerator_ball(lambda, d)? / th)
}

/// (h^{(1)}, h^{(d+1)}) on B(0, ε) with boundary data (p, q) at r = ε.
pub fn h_general_domain(r: f64, eps: f64, lambda: f64, d: usize, p: f64, q: f64) -> Result<(f64, f64)> {
    if r == 0.0 {
        let c = dim_constants(d)?;
        let nu = nu_of(d);
        let le = lambda * eps;
        let thc = c.eta_m * c.beta_m * bessel_j_full(nu - 1.0, le * c.beta_m / 2.0)? * bessel_j_full(nu, le * c.beta_p / 2.0)?;
        let th = thc.im;
        pole_check("Θ_ε", th, thc.norm())?;
        let (n1, n2) = numerators_general(le, d)?;
        return Ok((0.0, (q * n1 - p * n2) / th));
    }
    let (h1, hd) = general_solution(r, eps, lambda, d, p, q)?;
    Ok((h1[0], hd[0]))
}

/// Residuals of the radial ODE system for given [f, f′, f″] of both components.
pub fn ode_residuals(r: f64, lambda: f64, d: usize, h1: [f64; 3], hd: [f64; 3]) -> (f64, f64) {
    let dm1 = d as f64 - 1.0;
    let e1 = h1[2] + dm1 / r * h1[1] - dm1 * h1[0] / (r * r) + 2.0 * lambda * hd[1] + lambda * lambda * h1[0];
    let e2 = hd[2] + dm1 / r * hd[1] + 2.0 * lambda * (dm1 / r * h1[0] + h1[1]) + d as f64 * lambda * lambda * hd[0];
    (e1, e2)
}

/// The d = 2 construction 𝔪 = αJ₁(λζr), 𝔫 = J₀(λζr), A = u𝔪 + v𝔪^†, C = u𝔫 + v𝔫^†,
/// with A(ε) = 𝔟 and C(ε) = 𝔠. Returns (A(r), C(r)).
pub fn ansatz_2d(r: f64, lambda: f64, eps: f64, b: f64, c: f64) -> Result<(f64, f64)> {
    let k = dim_constants(2)?;
    let (zeta, alpha) = (k.zeta.unwrap(), k.alpha.unwrap());
    let m = |s: f64| -> Result<C64> { Ok(alpha * bessel_j_full(1.0, lambda * zeta * s)?) };
    let n = |s: f64| -> Result<C64> { bessel_j_full(0.0, lambda * zeta * s) };
    let (me, ne) = (m(eps)?, n(eps)?);
    let det = me * ne.conj() - ne * me.conj();
    pole_check("Wrönskian", det.norm(), me.norm() * ne.norm())?;
    let u = (ne.conj() * b - me.conj() * c) / det;
    let v = (-ne * b + me * c) / det;
    let (mr, nr) = (m(r)?, n(r)?);
    Ok(((u * mr + v * mr.conj()).re, (u * nr + v * nr.conj()).re))
}

// ---------------------------------------------------------------------------
// d = 9
//
// The closed form cancels heavily for small λr (terms of size (λr)^{-9}), so it
// is evaluated in double-double arithmetic.

type Dd = twofloat::TwoFloat;

fn dd(x: f64) -> Dd {
    Dd::from(x)
}

/// Second-order jet: value with first and second derivative in one variable.
#[derive(Debug, Clone, Copy)]
struct Jet {
    v: Dd,
    d1: Dd,
    d2: Dd,
}

impl Jet {
    fn var(x: f64) -> Jet {
        Jet { v: dd(x), d1: dd(1.0), d2: dd(0.0) }
    }
    fn cst(x: Dd) -> Jet {
        Jet { v: x, d1: dd(0.0), d2: dd(0.0) }
    }
    fn scale(self, s: Dd) -> Jet {
        Jet { v: s * self.v, d1: s * self.d1, d2: s * self.d2 }
    }
    fn sin_cos(self) -> (Jet, Jet) {
        let (s, c) = self.v.sin_cos();
        let d11 = self.d1 * self.d1;
        (
            Jet { v: s, d1: c * self.d1, d2: c * self.d2 - s * d11 },
            Jet { v: c, d1: -s * self.d1, d2: -s * self.d2 - c * d11 },
        )
    }
    fn powi(self, n: i32) -> Jet {
        let x = self.v;
        let nf = dd(n as f64);
        let f1 = nf * x.powi(n - 1);
        let f2 = nf * (nf - 1.0) * x.powi(n - 2);
        Jet { v: x.powi(n), d1: f1 * self.d1, d2: f1 * self.d2 + f2 * self.d1 * self.d1 }
    }
    fn out(self) -> [f64; 3] {
        [self.v.into(), self.d1.into(), self.d2.into()]
    }
}

impl std::ops::Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}
impl std::ops::Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}
impl std::ops::Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + dd(2.0) * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

/// (C₂, C₄, 𝒲[λ]) fixing h^{(1)}(1) = 0, h^{(10)}(1) = 1 in the d = 9 solution.
pub fn d9_constants(lambda: f64) -> Result<(f64, f64, f64)> {
    let l = dd(lambda);
    let s3 = dd(3.0).sqrt();
    let (s, c) = (l * s3).sin_cos();
    let p = |n: i32| l.powi(n);
    let w = (dd(-324.0) * p(6) + dd(4410.0) * p(4) - dd(8550.0) * p(2) + 1575.0) * c * c
        - dd(18.0) * l * s3 * s * (p(6) - dd(50.0) * p(4) + dd(250.0) * p(2) - 175.0) * c
        + dd(27.0) * p(8)
        + dd(54.0) * p(6)
        - dd(2385.0) * p(4)
        + dd(3825.0) * p(2)
        - 1575.0;
    let wf: f64 = w.into();
    // 𝒲 ~ λ^{12} near 0, compare with that scale
    pole_check("𝒲", wf, 1e-3 * lambda.abs().powi(12).min(1.0))?;
    let c2 = dd(3.0) * l / w
        * ((p(5) - dd(35.0) * p(3) + dd(105.0) * l) * c
            - dd(5.0) * (p(4) - dd(28.0) * p(2) / 3.0 + 7.0) * s * s3);
    let c4 = dd(-3.0) / w * l * ((p(3) - dd(5.0) * l) * c - dd(2.0) * (p(2) - dd(5.0) / 6.0) * s * s3);
    Ok((c2.into(), c4.into(), wf))
}

/// The d = 9 solution and its first two r-derivatives, as ([h¹, h¹′, h¹″], [h¹⁰, …]).
pub fn d9_solution_derivs(r: f64, lambda: f64, c2: f64, c4: f64) -> Result<([f64; 3], [f64; 3])> {
    if !(r > 0.0 && r <= 1.0) || lambda == 0.0 {
        return Err(Error::Range(format!("need r in ]0, 1] and λ ≠ 0, got r = {r}, λ = {lambda}")));
    }
    let l = dd(lambda);
    let (c2, c4) = (dd(c2), dd(c4));
    let s3 = dd(3.0).sqrt();
    let t = Jet::var(r);
    let (sn, cs) = t.scale(l * s3).sin_cos();
    let t2 = t.powi(2);
    let t4 = t.powi(4);
    let k = Jet::cst;
    let l2 = l * l;
    let l4 = l2 * l2;
    let p1 = t4.scale(l2 * (l2 * c4 + c2)) + t2.scale(dd(-35.0) * l2 * c4 - dd(5.0) * c2) + k(dd(105.0) * c4);
    let p2 = t4.scale(l2 * (dd(2.5) * l2 * c4 + c2))
        + t2.scale(dd(-70.0) * l2 * c4 / 3.0 - dd(5.0) / 6.0 * c2)
        + k(dd(17.5) * c4);
    let h1 = t.powi(-8) * ((t * p1 * cs).scale(dd(-3.0) * l) + (sn * p2).scale(dd(6.0) * s3));
    let q1 = t4.scale(l4 * l2 * c4) + (t2 * (t2.scale(c2) - k(dd(13.0) * c4))).scale(l4)
        + (t2.scale(dd(5.0) * c2) + k(dd(10.0) * c4)).scale(l2)
        - k(dd(5.0) * c2);
    let q2 = t2.scale(l4 * c4) + k(dd(-10.0) / 3.0 * l2 * c4 + dd(5.0) / 3.0 * c2);
    let hd = (t.powi(-7) * ((q1 * sn).scale(-s3) - (t * cs * q2).scale(dd(9.0) * l))).scale(l.recip());
    Ok((h1.out(), hd.out()))
}

pub fn d9_solution(r: f64, lambda: f64, c2: f64, c4: f64) -> Result<(f64, f64)> {
    let (a, b) = d9_solution_derivs(r, lambda, c2, c4)?;
    Ok((a[0], b[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gamma_values() {
        assert!(close(gamma_half(1), SQRT_PI, 1e-15));
        assert!(close(gamma_half(3), SQRT_PI / 2.0, 1e-15));
        assert!(close(gamma_half(7), 15.0 * SQRT_PI / 8.0, 1e-14));
        assert_eq!(gamma_half(8), 6.0);
        for m in 1..30 {
            assert!(gamma_half_ci(m).contains(gamma_half(m)), "m = {m}");
        }
    }

    #[test]
    fn j0_at_zero_and_known_values() {
        assert_eq!(bessel_j(0.0, C64::new(0.0, 0.0), 5).unwrap(), C64::new(1.0, 0.0));
        assert!(close(bessel_j_full(0.0, C64::new(1.0, 0.0)).unwrap().re, 0.765_197_686_557_966_6, 1e-15));
        assert!(close(bessel_j_full(1.0, C64::new(2.5, 0.0)).unwrap().re, 0.497_094_102_464_274_4, 1e-15));
        // J_{1/2}(x) = √(2/(πx)) sin x
        let x: f64 = 1.7;
        let want = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sin();
        assert!(close(bessel_j_full(0.5, C64::new(x, 0.0)).unwrap().re, want, 1e-15));
        assert!(bessel_j(0.3, C64::new(1.0, 0.0), 4).is_err());
    }

    #[test]
    fn conjugation() {
        let z = C64::new(1.3, 0.8);
        for nu in [0.0, 0.5, 1.0, 2.5, 4.0] {
            let a = bessel_j(nu, z.conj(), 12).unwrap();
            let b = bessel_j(nu, z, 12).unwrap().conj();
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn recurrence() {
        for &z in &[C64::new(1.1, 0.4), C64::new(2.9, -1.3), C64::new(0.4, 3.0)] {
            for nu in [1.0, 1.5, 2.0, 3.5] {
                let a = bessel_j_full(nu - 1.0, z).unwrap();
                let b = bessel_j_full(nu + 1.0, z).unwrap();
                let c = bessel_j_full(nu, z).unwrap();
                let res = a + b - 2.0 * nu / z * c;
                let scale = a.norm().max(b.norm()).max(c.norm());
                assert!(res.norm() <= 1e-11 * scale, "ν={nu} z={z} res={res}");
            }
        }
    }

    #[test]
    fn bound_validity_region() {
        assert!(matches!(remainder_bound(0.0, C64::new(12.0, 0.0), 5), Err(Error::BoundInvalid { .. })));
        let e = remainder_bound(0.0, C64::new(0.0, 0.0), 3).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn constants_identities() {
        for d in 2..=8 {
            let c = dim_constants(d).unwrap();
            assert!((c.eta_p * c.eta_m - 16.0 * d as f64).norm() < 1e-12);
            assert!((c.beta_p * c.beta_m - 4.0 * (d as f64).sqrt()).norm() < 1e-12);
            assert!(c.beta_p.re > 0.0 && c.beta_m.re > 0.0);
            let b2 = c.beta_p * c.beta_p;
            assert!((b2 - C64::new(2.0 * (d as f64 - 3.0), 2.0 * c.upsilon)).norm() < 1e-12);
            let cc = dim_constants_certified(d).unwrap();
            assert!(cc.beta_p.contains(c.beta_p) && cc.eta_m.contains(c.eta_m));
            assert!(cc.beta_abs.contains(c.beta_p.norm()));
        }
        let c = dim_constants(2).unwrap();
        let z = c.zeta.unwrap();
        assert!((z.powi(4) + z * z + 2.0).norm() < 1e-14);
        assert!((c.beta_p.norm().powi(4) - 32.0).abs() < 1e-12);
        let bm_em = c.beta_m * c.eta_m;
        let alt = -16.0 * bm_em / bm_em.norm_sqr();
        assert!((c.alpha.unwrap() - alt).norm() < 1e-12);
        assert!(dim_constants(9).is_err());
    }

    #[test]
    fn theta_2d_matches_alpha_form() {
        let c = dim_constants(2).unwrap();
        let (z, a) = (c.zeta.unwrap(), c.alpha.unwrap());
        for l in [2.6, 2.8] {
            let alt = (a.conj() * bessel_j_full(1.0, l * z).unwrap().conj() * bessel_j_full(0.0, l * z).unwrap()).im;
            assert_eq!(theta(l, 2).unwrap().signum(), alt.signum());
        }
    }

    #[test]
    fn certified_contains_point() {
        for d in 2..=8 {
            for l in [0.7, 2.5, 2.77, 3.0] {
                let th = theta_certified(CertInterval::point(l), d, 8).unwrap();
                assert!(th.contains(theta(l, d).unwrap()), "d={d} λ={l} {th}");
                let n = numerator_ball_certified(CertInterval::point(l), d, 6).unwrap();
                assert!(n.contains(numerator_ball(l, d).unwrap()));
                let (n1, n2) = numerators_general_certified(CertInterval::point(l), d, 7).unwrap();
                let (m1, m2) = numerators_general(l, d).unwrap();
                assert!(n1.contains(m1) && n2.contains(m2), "d={d} λ={l}");
            }
        }
    }

    #[test]
    fn sqrt_free_forms_agree() {
        for d in 3..=8 {
            let l = 2.7;
            let th = theta_certified(CertInterval::point(l), d, 40).unwrap();
            assert!(th.width() < 1e-10, "{th}");
            assert!(close(th.mid(), theta(l, d).unwrap(), 1e-10));
        }
    }

    #[test]
    fn ball_boundary_values() {
        for d in 2..=8 {
            for l in [0.5, 1.0, 2.0] {
                assert!(close(h1_closed_form(1.0, l, d).unwrap(), 0.0, 1e-10));
                assert!(close(hd1_closed_form(1.0, l, d).unwrap(), 1.0, 1e-10));
            }
            for r in [0.0, 0.3, 0.9] {
                assert!(close(hd1_closed_form(r, 1e-6, d).unwrap(), 1.0, 1e-9));
            }
            let near0 = hd1_closed_form(1e-5, 1.3, d).unwrap();
            assert!(close(near0, hd1_at_zero(1.3, d).unwrap(), 1e-6));
        }
    }

    #[test]
    fn general_domain_reduces_and_hits_boundary() {
        for d in [2, 3, 6] {
            let (a, b) = h_general_domain(0.4, 1.0, 1.2, d, 0.0, 1.0).unwrap();
            assert!(close(a, h1_closed_form(0.4, 1.2, d).unwrap(), 1e-12));
            assert!(close(b, hd1_closed_form(0.4, 1.2, d).unwrap(), 1e-12));
            let (p, q) = h_general_domain(0.6, 0.6, 2.1, d, 0.4, 1.7).unwrap();
            let z0 = h_general_domain(0.0, 0.6, 2.1, d, 0.4, 1.7).unwrap().1;
            let z1 = h_general_domain(1e-5, 0.6, 2.1, d, 0.4, 1.7).unwrap().1;
            assert!(close(z0, z1, 1e-6), "d={d} {z0} {z1}");
            assert!(close(p, 0.4, 1e-10) && close(q, 1.7, 1e-10));
            for r in [0.1, 0.35, 0.5] {
                let (h1, hd) = general_solution(r, 0.6, 2.1, d, 0.4, 1.7).unwrap();
                let (e1, e2) = ode_residuals(r, 2.1, d, h1, hd);
                assert!(e1.abs() < 1e-9 && e2.abs() < 1e-9, "d={d} r={r} {e1} {e2}");
            }
        }
    }

    #[test]
    fn ansatz_matches_ball_in_2d() {
        for l in [0.5, 1.0, 2.0] {
            for r in [0.0, 0.25, 0.5, 0.9] {
                let (a, c) = ansatz_2d(r, l, 1.0, 0.0, 1.0).unwrap();
                assert!(close(a, h1_closed_form(r, l, 2).unwrap(), 1e-10), "λ={l} r={r}");
                assert!(close(c, hd1_closed_form(r, l, 2).unwrap(), 1e-10));
            }
        }
    }

    #[test]
    fn d9_boundary_and_residual() {
        for l in [1.0, 2.0, 2.5] {
            let (c2, c4, _) = d9_constants(l).unwrap();
            let (a, b) = d9_solution(1.0, l, c2, c4).unwrap();
            assert!(close(a, 0.0, 1e-8) && close(b, 1.0, 1e-8), "λ={l} {a} {b}");
            for r in [0.2, 0.4, 0.6, 0.8] {
                let (h1, hd) = d9_solution_derivs(r, l, c2, c4).unwrap();
                let (e1, e2) = ode_residuals(r, l, 9, h1, hd);
                assert!(e1.abs() < 1e-8 && e2.abs() < 1e-8, "λ={l} r={r} {e1:e} {e2:e}");
            }
        }
    }

    #[test]
    fn d9_wronskian_values() {
        let w = |l: f64| d9_constants(l).unwrap().2;
        assert!((w(1.0) + 0.01515).abs() < 1e-4);
        assert!((w(2.0) + 263.9).abs() < 0.1);
        assert!((w(0.5) + 3.07e-7).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1024))]
        #[test]
        fn remainder_soundness(re in -5.0f64..5.0, im in -5.0f64..5.0, nu2 in 0u32..=8, n in 4usize..=10) {
            let z = C64::new(re, im);
            prop_assume!(z.norm() <= 5.0);
            let nu = nu2 as f64 / 2.0;
            let diff = (bessel_j(nu, z, n).unwrap() - bessel_j(nu, z, 60).unwrap()).norm();
            let e = remainder_bound(nu, z, n).unwrap();
            prop_assert!(diff <= e * (1.0 + 1e-12) + 1e-15, "diff={} e={}", diff, e);
        }
    }
}
