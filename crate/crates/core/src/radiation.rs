//! Radiation modes of the nanofiber and spontaneous emission into them.
//!
//! Exterior fields are carried in the real Bessel basis: the two Hankel
//! terms are recombined as a_J J_m + a_Y Y_m (and b_J, b_Y for the magnetic
//! coefficients), which avoids cancellation between huge H^(1) and H^(2)
//! parts when q a is small.

use crate::atoms::{reduced_dipole_f, DipoleTable, HyperfineTransition};
use crate::constants::{C, EPS0, HBAR, MU0};
use crate::error::{Error, Result};
use crate::fiber::FiberSpec;
use crate::numerics::quadrature::gauss_legendre_cached;
use crate::numerics::{JyTable, ToleranceConfig};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::sync::{Arc, Mutex};

const I: Complex64 = Complex64::new(0.0, 1.0);
const M_HARD_CAP: i32 = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationMode {
    pub omega: f64,
    pub beta: f64,
    pub m: i32,
    /// Polarization label, +1 or -1.
    pub l: i8,
    /// A, real, fixed by N_ν = 1.
    pub a_coef: f64,
    pub b_coef: Complex64,
    /// C_1, C_2 (Hankel basis).
    pub c: [Complex64; 2],
    /// D_1, D_2 (Hankel basis).
    pub d: [Complex64; 2],
    pub eta: f64,
    pub h: f64,
    pub q: f64,
    fiber: FiberSpec,
    // e_z = aj J_m + ay Y_m outside, and likewise for the magnetic part
    aj: Complex64,
    ay: Complex64,
    bj: Complex64,
    by: Complex64,
}

/// Coefficients for one (β, m, l) given Bessel tables at h a and q a.
fn build_mode(
    fiber: &FiberSpec,
    omega: f64,
    beta: f64,
    m: i32,
    l: i8,
    jha: &JyTable,
    jqa: &JyTable,
) -> Option<RadiationMode> {
    let (n1, n2, a) = (fiber.n1, fiber.n2, fiber.radius);
    let k = omega / C;
    let h = jha.x / a;
    let q = jqa.x / a;
    let jh = jha.j_signed(m);
    let jph = jha.j_prime_signed(m);
    let vml = |z: f64, zp: f64| {
        let v = m as f64 * k * beta / (a * h * h * q * q) * (n2 * n2 - n1 * n1) * jh * z;
        let mm = jph * z / h - jh * zp / q;
        let ll = n1 * n1 / h * jph * z - n2 * n2 / q * jh * zp;
        (v, mm, ll)
    };
    let (vj, mj, lj) = vml(jqa.j_signed(m), jqa.j_prime_signed(m));
    let (vy, my, ly) = vml(jqa.y_signed(m), jqa.y_prime_signed(m));
    // common rescaling; the normalized field does not depend on it
    let s = [vj, mj, lj, vy, my, ly]
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if !(s.is_finite() && s > 0.0) {
        return None;
    }
    let (vj, mj, lj, vy, my, ly) = (vj / s, mj / s, lj / s, vy / s, my / s, ly / s);

    // |V_1|^2 = VJ^2 + VY^2 since all six are real
    let v2 = vj * vj + vy * vy;
    let m2 = mj * mj + my * my;
    let l2 = lj * lj + ly * ly;
    let eta = EPS0 * C * ((n2 * n2 * v2 + l2) / (v2 + n2 * n2 * m2)).sqrt();
    let b = if l > 0 { I * eta } else { -I * eta };

    let pref = I * (PI * q * q * a / 4.0);
    let n22 = n2 * n2;
    let aj = pref / n22 * (2.0 * I) * (ly + I * MU0 * C * b * vy);
    let ay = -I * pref / n22 * 2.0 * (lj + I * MU0 * C * b * vj);
    let bj = pref * (-2.0 * I) * (I * EPS0 * C * vy - b * my);
    let by = I * pref * 2.0 * (I * EPS0 * C * vj - b * mj);
    let norm = 8.0 * PI * omega / (q * q)
        * 0.25
        * (n22 * (aj.norm_sqr() + ay.norm_sqr()) + MU0 / EPS0 * (bj.norm_sqr() + by.norm_sqr()));
    if !(norm.is_finite() && norm > 0.0) {
        return None;
    }
    let sc = 1.0 / norm.sqrt();
    let (aj, ay, bj, by) = (aj * sc, ay * sc, bj * sc, by * sc);
    // C_1 = (aJ - i aY)/2, C_2 = (aJ + i aY)/2
    let c = [(aj - I * ay) * 0.5, (aj + I * ay) * 0.5];
    let d = [(bj - I * by) * 0.5, (bj + I * by) * 0.5];
    let a_coef = sc / s;
    Some(RadiationMode {
        omega,
        beta,
        m,
        l,
        a_coef,
        b_coef: b * a_coef,
        c,
        d,
        eta,
        h,
        q,
        fiber: *fiber,
        aj,
        ay,
        bj,
        by,
    })
}

impl RadiationMode {
    pub fn new(fiber: &FiberSpec, omega: f64, beta: f64, m: i32, l: i8) -> Result<Self> {
        let k = omega / C;
        let kn2 = k * fiber.n2;
        if !(beta.abs() < kn2) {
            return Err(Error::Domain(format!(
                "|beta| = {} is not below k n2 = {kn2}; not a radiation mode",
                beta.abs()
            )));
        }
        if l != 1 && l != -1 {
            return Err(Error::Domain(format!("polarization label must be +1 or -1, got {l}")));
        }
        let h = (k * k * fiber.n1 * fiber.n1 - beta * beta).sqrt();
        let q = (kn2 * kn2 - beta * beta).sqrt();
        let order = m.unsigned_abs() as usize;
        let jha = JyTable::new(order, h * fiber.radius)?;
        let jqa = JyTable::new(order, q * fiber.radius)?;
        build_mode(fiber, omega, beta, m, l, &jha, &jqa).ok_or_else(|| {
            Error::Domain(format!("radiation mode m={m} overflows at q a = {}", q * fiber.radius))
        })
    }

    pub fn fiber(&self) -> &FiberSpec {
        &self.fiber
    }

    fn exterior_from(&self, jqr: &JyTable, r: f64) -> [Complex64; 3] {
        let m = self.m;
        let (q, beta) = (self.q, self.beta);
        let wmu = self.omega * MU0;
        let (jm, ym) = (jqr.j_signed(m), jqr.y_signed(m));
        let (jpm, ypm) = (jqr.j_prime_signed(m), jqr.y_prime_signed(m));
        let z_a = self.aj * jm + self.ay * ym;
        let zp_a = self.aj * jpm + self.ay * ypm;
        let z_b = self.bj * jm + self.by * ym;
        let zp_b = self.bj * jpm + self.by * ypm;
        let iq2 = I / (q * q);
        let mf = m as f64;
        [
            iq2 * (zp_a * (beta * q) + I * (mf * wmu / r) * z_b),
            iq2 * (I * (mf * beta / r) * z_a - zp_b * (q * wmu)),
            z_a,
        ]
    }

    fn interior(&self, r: f64) -> Result<[Complex64; 3]> {
        let m = self.m;
        let h = self.h;
        let wmu = self.omega * MU0;
        let a = Complex64::new(self.a_coef, 0.0);
        let b = self.b_coef;
        if r == 0.0 {
            // only |m| = 1 survives on the axis (transverse); e_z needs m = 0
            let ez = if m == 0 { a } else { Complex64::new(0.0, 0.0) };
            if m.abs() != 1 {
                return Ok([Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), ez]);
            }
            // J_m(hr)/r -> h/2 * sign, J'_m -> 1/2 * sign for m = ±1
            let sgn = if m < 0 { -1.0 } else { 1.0 };
            let (jr, jp) = (sgn * h / 2.0, sgn * 0.5);
            let mf = m as f64;
            let ih2 = I / (h * h);
            return Ok([
                ih2 * (a * (self.beta * h * jp) + I * (mf * wmu * jr) * b),
                ih2 * (I * (mf * self.beta * jr) * a - b * (h * wmu * jp)),
                ez,
            ]);
        }
        let t = JyTable::new(m.unsigned_abs() as usize, h * r)?;
        let (jm, jpm) = (t.j_signed(m), t.j_prime_signed(m));
        let mf = m as f64;
        let ih2 = I / (h * h);
        Ok([
            ih2 * (a * (self.beta * h * jpm) + I * (mf * wmu / r * jm) * b),
            ih2 * (I * (mf * self.beta / r * jm) * a - b * (h * wmu * jpm)),
            a * jm,
        ])
    }

    /// Cylindrical components (r, φ, z) of the mode function at radius r.
    pub fn profile(&self, r: f64) -> Result<[Complex64; 3]> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Domain(format!("radius must be >= 0, got {r}")));
        }
        if r < self.fiber.radius {
            self.interior(r)
        } else {
            let t = JyTable::new(self.m.unsigned_abs() as usize, self.q * r)?;
            Ok(self.exterior_from(&t, r))
        }
    }

    /// Interior branch at r <= a, for interface checks.
    pub fn profile_inside(&self, r: f64) -> Result<[Complex64; 3]> {
        if !(r >= 0.0 && r <= self.fiber.radius) {
            return Err(Error::Domain(format!("interior branch needs 0 <= r <= a, got {r}")));
        }
        self.interior(r)
    }

    /// Coefficient of δ(ω - ω') in the overlap of two modes with equal β and m,
    /// taken from the far-field amplitudes. Equals 1 for a mode with itself.
    pub fn overlap_weight(&self, other: &RadiationMode) -> Complex64 {
        let n22 = self.fiber.n2 * self.fiber.n2;
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..2 {
            s += self.c[j] * other.c[j].conj() * n22 + self.d[j] * other.d[j].conj() * (MU0 / EPS0);
        }
        s * (8.0 * PI * self.omega / (self.q * self.q) * 0.5)
    }
}

pub fn radiation_profile(mode: &RadiationMode, r: f64) -> Result<[Complex64; 3]> {
    mode.profile(r)
}

/// Σ_{m,l} ∫ dβ e_{-q} e*_{-q'} at the atom, indexed by 1 - q (q = 1, 0, -1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionTensor {
    pub p: [[Complex64; 3]; 3],
    pub panels: usize,
    pub m_max_used: i32,
}

impl EmissionTensor {
    pub fn trace(&self) -> f64 {
        (0..3).map(|i| self.p[i][i].re).sum()
    }

    /// Free-space value of each diagonal entry, 2ω²/(3πc³).
    pub fn free_space_diagonal(omega: f64) -> f64 {
        2.0 * omega * omega / (3.0 * PI * C * C * C)
    }
}

const NODES_PER_PANEL: usize = 64;
const START_PANELS: usize = 8;
const MAX_PANELS: usize = 256;
const PANEL_REL_TOL: f64 = 1e-4;

fn node_contribution(
    fiber: &FiberSpec,
    omega: f64,
    beta: f64,
    r: f64,
    phi: f64,
    m_tol: f64,
) -> ([[Complex64; 3]; 3], i32) {
    let k = omega / C;
    let kn2 = k * fiber.n2;
    let h = (k * k * fiber.n1 * fiber.n1 - beta * beta).sqrt();
    let q = (kn2 * kn2 - beta * beta).sqrt();
    let a = fiber.radius;
    // orders above q r + margin carry nothing measurable
    let m_cap = ((q * r).ceil() as i32 + 40).min(M_HARD_CAP);
    let order = m_cap as usize;
    let (Ok(jha), Ok(jqa), Ok(jqr)) = (
        JyTable::new(order, h * a),
        JyTable::new(order, q * a),
        JyTable::new(order, q * r),
    ) else {
        return ([[Complex64::new(0.0, 0.0); 3]; 3], 0);
    };
    let (sp, cp) = phi.sin_cos();
    let mut acc = [[Complex64::new(0.0, 0.0); 3]; 3];
    let mut total = 0.0;
    let mut m_used = 0;
    for mabs in 0..=m_cap {
        let mut term = [[Complex64::new(0.0, 0.0); 3]; 3];
        let signs: &[i32] = if mabs == 0 { &[0] } else { &[1, -1] };
        let mut ok = true;
        for &sg in signs {
            let m = sg * mabs;
            for l in [1i8, -1] {
                let Some(mode) = build_mode(fiber, omega, beta, m, l, &jha, &jqa) else {
                    ok = false;
                    continue;
                };
                let e = mode.exterior_from(&jqr, r);
                let phase = Complex64::from_polar(1.0, m as f64 * phi);
                let ex = (e[0] * cp - e[1] * sp) * phase;
                let ey = (e[0] * sp + e[1] * cp) * phase;
                let ez = e[2] * phase;
                let v = [
                    (ex - I * ey) * FRAC_1_SQRT_2,
                    ez,
                    -(ex + I * ey) * FRAC_1_SQRT_2,
                ];
                if v.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                    ok = false;
                    continue;
                }
                for i in 0..3 {
                    for j in 0..3 {
                        term[i][j] += v[i] * v[j].conj();
                    }
                }
            }
        }
        let t: f64 = (0..3).map(|i| term[i][i].re).sum();
        for i in 0..3 {
            for j in 0..3 {
                acc[i][j] += term[i][j];
            }
        }
        total += t;
        m_used = mabs;
        if !ok || (mabs as f64 > q * r + 2.0 && t <= m_tol * total) {
            break;
        }
    }
    (acc, m_used)
}

fn tensor_with_panels(
    fiber: &FiberSpec,
    omega: f64,
    r: f64,
    phi: f64,
    panels: usize,
    m_tol: f64,
) -> ([[Complex64; 3]; 3], i32) {
    let kn2 = omega / C * fiber.n2;
    let rule = gauss_legendre_cached(NODES_PER_PANEL);
    let width = PI / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| {
            let lo = -FRAC_PI_2 + width * p as f64;
            let rule = rule.clone();
            (0..NODES_PER_PANEL).map(move |i| {
                let u = lo + 0.5 * width * (rule.0[i] + 1.0);
                // β = k n2 sin u removes the 1/q edge behaviour
                (kn2 * u.sin(), rule.1[i] * 0.5 * width * kn2 * u.cos())
            })
        })
        .collect();
    let parts: Vec<([[Complex64; 3]; 3], i32)> = nodes
        .par_iter()
        .map(|&(beta, w)| {
            let (mut p, mu) = node_contribution(fiber, omega, beta, r, phi, m_tol);
            for row in p.iter_mut() {
                for x in row.iter_mut() {
                    *x *= w;
                }
            }
            (p, mu)
        })
        .collect();
    let mut p = [[Complex64::new(0.0, 0.0); 3]; 3];
    let mut m_max = 0;
    // fixed summation order keeps results independent of thread scheduling
    for (part, mu) in parts {
        for i in 0..3 {
            for j in 0..3 {
                p[i][j] += part[i][j];
            }
        }
        m_max = m_max.max(mu);
    }
    (p, m_max)
}

/// Emission tensor into radiation modes for an atom at (r, φ) outside the fiber.
pub fn emission_tensor(
    fiber: &FiberSpec,
    omega: f64,
    r: f64,
    phi: f64,
    tol: &ToleranceConfig,
) -> Result<EmissionTensor> {
    if !(r.is_finite() && r >= fiber.radius) {
        return Err(Error::Domain(format!(
            "atom must sit outside the fiber (r = {r}, a = {})",
            fiber.radius
        )));
    }
    let mut panels = START_PANELS;
    let (mut p, mut mu) = tensor_with_panels(fiber, omega, r, phi, panels, tol.m_truncation_tol);
    loop {
        let next = panels * 2;
        let (p2, mu2) = tensor_with_panels(fiber, omega, r, phi, next, tol.m_truncation_tol);
        let t1: f64 = (0..3).map(|i| p[i][i].re).sum();
        let t2: f64 = (0..3).map(|i| p2[i][i].re).sum();
        p = p2;
        mu = mu.max(mu2);
        panels = next;
        if (t2 - t1).abs() <= PANEL_REL_TOL * t2.abs() {
            break;
        }
        if panels >= MAX_PANELS {
            return Err(Error::Quadrature {
                estimate: Complex64::new(t2, 0.0),
                error: (t2 - t1).abs(),
            });
        }
    }
    Ok(EmissionTensor { p, panels, m_max_used: mu })
}

/// Radiative decay coefficients γ^(rad)_{ee'} (rad/s) and their sublevel average.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiativeRates {
    /// Indexed by (M'_e + F', M'_{e'} + F').
    pub matrix: Vec<Vec<Complex64>>,
    pub average: f64,
    pub tensor: EmissionTensor,
}

impl RadiativeRates {
    pub fn from_tensor(t: &HyperfineTransition, tensor: EmissionTensor) -> Result<Self> {
        let table = DipoleTable::new(t)?;
        let ne = t.excited_count();
        let pref = t.omega0 / (2.0 * EPS0 * HBAR);
        let mut matrix = vec![vec![Complex64::new(0.0, 0.0); ne]; ne];
        for (ie, me) in (-t.f_prime..=t.f_prime).enumerate() {
            for (ie2, me2) in (-t.f_prime..=t.f_prime).enumerate() {
                let mut s = Complex64::new(0.0, 0.0);
                for mg in -t.f..=t.f {
                    let (qa, qb) = (me - mg, me2 - mg);
                    if qa.abs() > 1 || qb.abs() > 1 {
                        continue;
                    }
                    let sign = if (qa + qb).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    let dd = table.get(me, mg) * table.get(me2, mg);
                    s += tensor.p[(1 - qa) as usize][(1 - qb) as usize] * (sign * dd);
                }
                matrix[ie][ie2] = s * pref;
            }
        }
        let average = (0..ne).map(|i| matrix[i][i].re).sum::<f64>() / ne as f64;
        Ok(Self { matrix, average, tensor })
    }
}

pub fn gamma_rad(
    fiber: &FiberSpec,
    t: &HyperfineTransition,
    r: f64,
    phi: f64,
) -> Result<RadiativeRates> {
    gamma_rad_with(fiber, t, r, phi, &ToleranceConfig::default())
}

pub fn gamma_rad_with(
    fiber: &FiberSpec,
    t: &HyperfineTransition,
    r: f64,
    phi: f64,
    tol: &ToleranceConfig,
) -> Result<RadiativeRates> {
    let tensor = emission_tensor(fiber, t.omega0, r, phi, tol)?;
    RadiativeRates::from_tensor(t, tensor)
}

/// Free-space decay rate of the hyperfine transition (rad/s).
pub fn gamma_free_space(t: &HyperfineTransition) -> f64 {
    let d = reduced_dipole_f(t);
    t.omega0.powi(3) * d * d
        / (3.0 * PI * EPS0 * HBAR * C.powi(3) * t.excited_count() as f64)
}

type CacheKey = [u64; 8];

/// Memoizes radiative rates by exact parameter values; safe to share across threads.
#[derive(Debug, Default)]
pub struct RadiativeCache {
    map: Mutex<HashMap<CacheKey, Arc<RadiativeRates>>>,
}

impl RadiativeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &self,
        fiber: &FiberSpec,
        t: &HyperfineTransition,
        r: f64,
        tol: &ToleranceConfig,
    ) -> Result<Arc<RadiativeRates>> {
        let key = [
            fiber.radius.to_bits(),
            fiber.n1.to_bits(),
            fiber.n2.to_bits(),
            t.omega0.to_bits(),
            t.reduced_dipole_j.to_bits(),
            ((t.f as u64) << 32) | t.f_prime as u32 as u64,
            r.to_bits(),
            tol.m_truncation_tol.to_bits(),
        ];
        if let Some(v) = self.map.lock().expect("cache poisoned").get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(gamma_rad_with(fiber, t, r, 0.0, tol)?);
        self.map.lock().expect("cache poisoned").insert(key, v.clone());
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::cesium_d2_default;
    use crate::fiber::sellmeier_silica;

    fn fiber() -> FiberSpec {
        FiberSpec::new(250e-9, sellmeier_silica(852e-9), 1.0).unwrap()
    }

    fn omega() -> f64 {
        2.0 * PI * C / 852e-9
    }

    #[test]
    fn rejects_guided_beta() {
        let k = omega() / C;
        assert!(RadiationMode::new(&fiber(), omega(), 1.01 * k, 1, 1).is_err());
    }

    #[test]
    fn polarizations_are_orthogonal() {
        let k = omega() / C;
        for &(beta, m) in &[(0.3 * k, 0), (-0.7 * k, 1), (0.95 * k, -3), (0.1 * k, 7)] {
            let p = RadiationMode::new(&fiber(), omega(), beta, m, 1).unwrap();
            let n = RadiationMode::new(&fiber(), omega(), beta, m, -1).unwrap();
            assert!((p.overlap_weight(&p).re - 1.0).abs() < 1e-12);
            assert!((n.overlap_weight(&n).re - 1.0).abs() < 1e-12);
            assert!(p.overlap_weight(&n).norm() < 1e-6, "beta={beta} m={m}");
            // both outgoing and incoming parts carry the same weight
            let n22 = 1.0;
            let w1 = p.c[0].norm_sqr() * n22 + p.d[0].norm_sqr() * MU0 / EPS0;
            let w2 = p.c[1].norm_sqr() * n22 + p.d[1].norm_sqr() * MU0 / EPS0;
            assert!((w1 - w2).abs() < 1e-10 * w1);
        }
    }

    #[test]
    fn tangential_continuity() {
        let k = omega() / C;
        let f = fiber();
        for &(beta, m, l) in &[(0.2 * k, 0, 1), (0.6 * k, 2, -1), (-0.9 * k, -1, 1)] {
            let mode = RadiationMode::new(&f, omega(), beta, m, l).unwrap();
            let inn = mode.profile_inside(f.radius).unwrap();
            let out = mode.profile(f.radius).unwrap();
            let scale = out.iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert!((inn[2] - out[2]).norm() < 1e-8 * scale, "e_z jump m={m}");
            assert!((inn[1] - out[1]).norm() < 1e-8 * scale, "e_phi jump m={m}");
            let dn = inn[0] * (f.n1 * f.n1) - out[0];
            assert!(dn.norm() < 1e-8 * scale * f.n1 * f.n1, "D_r jump m={m}");
        }
    }

    #[test]
    fn free_space_limit_for_thin_fiber() {
        let thin = FiberSpec::new(1e-9, 1.45, 1.0).unwrap();
        let t = emission_tensor(&thin, omega(), 400e-9, 0.0, &ToleranceConfig::default()).unwrap();
        let reference = EmissionTensor::free_space_diagonal(omega());
        for i in 0..3 {
            assert!((t.p[i][i].re / reference - 1.0).abs() < 1e-3, "{:?}", t.p[i][i]);
        }
    }

    #[test]
    fn far_atom_matches_free_space_rate() {
        let t = cesium_d2_default();
        let rates = gamma_rad(&fiber(), &t, 2.5e-6, 0.0).unwrap();
        let g0 = gamma_free_space(&t);
        assert!((rates.average / g0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn free_space_rate_value() {
        // 2π × 5.2487 MHz from ω³ D_FF'^2 / (3π ε0 ħ c³ (2F'+1))
        let g0 = gamma_free_space(&cesium_d2_default());
        assert!((g0 / (2.0 * PI * 1e6) - 5.2487).abs() < 1e-3);
    }
}
