//! Fundamental HE11 guided modes of a step-index nanofiber.

use crate::constants::C;
use crate::error::{Error, Result};
use crate::numerics::quadrature::integrate_limited;
use crate::numerics::{bessel, find_root, ToleranceConfig};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

const SINGLE_MODE_V: f64 = 2.404_825_557_695_773;
const SCAN_POINTS: usize = 2000;

/// Fused-silica index from the Malitson Sellmeier fit (wavelength in metres).
pub fn sellmeier_silica(wavelength: f64) -> f64 {
    let l2 = (wavelength * 1e6).powi(2);
    let terms = [
        (0.696_166_3, 0.068_404_3),
        (0.407_942_6, 0.116_241_4),
        (0.897_479_4, 9.896_161),
    ];
    let mut n2 = 1.0;
    for (b, c) in terms {
        n2 += b * l2 / (l2 - c * c);
    }
    n2.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    pub radius: f64,
    pub n1: f64,
    pub n2: f64,
}

impl FiberSpec {
    pub fn new(radius: f64, n1: f64, n2: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Invalid(format!("fiber radius must be > 0, got {radius}")));
        }
        if !(n2 >= 1.0 && n1 > n2 && n1.is_finite()) {
            return Err(Error::Invalid(format!("need n1 > n2 >= 1, got n1={n1}, n2={n2}")));
        }
        Ok(Self { radius, n1, n2 })
    }

    /// Silica core in vacuum, index from the Sellmeier fit at `wavelength`.
    pub fn silica_in_vacuum(radius: f64, wavelength: f64) -> Result<Self> {
        Self::new(radius, sellmeier_silica(wavelength), 1.0)
    }

    pub fn v_number(&self, k: f64) -> f64 {
        k * self.radius * (self.n1 * self.n1 - self.n2 * self.n2).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    pub omega: f64,
    pub k: f64,
    pub beta: f64,
    pub h: f64,
    pub q: f64,
    pub s_param: f64,
    pub norm_c: f64,
    pub v_group: f64,
    pub v_phase: f64,
    /// Scaled residual of the eigenvalue equation at `beta`.
    pub residual: f64,
    fiber: FiberSpec,
    /// K_1(qa) / J_1(ha)
    kj_ratio: f64,
}

/// Left and right sides of the HE11 eigenvalue equation.
fn eigen_sides(fiber: &FiberSpec, k: f64, beta: f64) -> Option<(f64, f64)> {
    let (n1, n2, a) = (fiber.n1, fiber.n2, fiber.radius);
    let h2 = n1 * n1 * k * k - beta * beta;
    let q2 = beta * beta - n2 * n2 * k * k;
    if h2 <= 0.0 || q2 <= 0.0 {
        return None;
    }
    let (ha, qa) = (h2.sqrt() * a, q2.sqrt() * a);
    let j0 = bessel::bessel_j(0, ha).ok()?;
    let j1 = bessel::bessel_j(1, ha).ok()?;
    let kv = bessel::k_values(2, qa).ok()?;
    let k1p = -0.5 * (kv[0] + kv[2]);
    let kk = k1p / (qa * kv[1]);
    let lhs = j0 / (ha * j1);
    let n12 = n1 * n1;
    let inv = 1.0 / (qa * qa) + 1.0 / (ha * ha);
    let a1 = (n12 - n2 * n2) / (2.0 * n12) * kk;
    let rhs = -(n12 + n2 * n2) / (2.0 * n12) * kk + 1.0 / (ha * ha)
        - (a1 * a1 + beta * beta / (n12 * k * k) * inv * inv).sqrt();
    Some((lhs, rhs))
}

/// |LHS - RHS| / max(|LHS|, |RHS|) of the eigenvalue equation.
pub fn eigen_residual(fiber: &FiberSpec, k: f64, beta: f64) -> f64 {
    match eigen_sides(fiber, k, beta) {
        Some((l, r)) => (l - r).abs() / l.abs().max(r.abs()).max(f64::MIN_POSITIVE),
        None => f64::INFINITY,
    }
}

fn solve_beta(fiber: &FiberSpec, k: f64, rel_tol: f64) -> Result<f64> {
    if fiber.n1 <= fiber.n2 {
        return Err(Error::ModeCutoff(format!(
            "no index contrast (n1={}, n2={})",
            fiber.n1, fiber.n2
        )));
    }
    let lo = fiber.n2 * k * (1.0 + 1e-9);
    let hi = fiber.n1 * k * (1.0 - 1e-9);
    if lo >= hi {
        return Err(Error::ModeCutoff("index contrast below scan resolution".into()));
    }
    let f = |b: f64| eigen_sides(fiber, k, b).map(|(l, r)| l - r).unwrap_or(f64::NAN);
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let mut best: Option<f64> = None;
    let mut prev_b = lo;
    let mut prev_f = f(lo);
    for i in 1..SCAN_POINTS {
        let b = lo + step * i as f64;
        let fb = f(b);
        if prev_f.is_finite() && fb.is_finite() && prev_f.signum() != fb.signum() {
            if let Ok(root) = find_root(&f, prev_b, b, rel_tol) {
                // reject sign flips caused by poles of J0/J1
                if eigen_residual(fiber, k, root) < 1e-8 {
                    best = Some(best.map_or(root, |x: f64| x.max(root)));
                }
            }
        }
        prev_b = b;
        prev_f = fb;
    }
    best.ok_or_else(|| Error::ModeCutoff(format!("no root between n2k and n1k at k={k}")))
}

pub fn solve_mode(fiber: &FiberSpec, omega: f64) -> Result<ModeSolution> {
    solve_mode_with(fiber, omega, &ToleranceConfig::default())
}

pub fn solve_mode_with(fiber: &FiberSpec, omega: f64, tol: &ToleranceConfig) -> Result<ModeSolution> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Invalid(format!("omega must be > 0, got {omega}")));
    }
    let k = omega / C;
    let v = fiber.v_number(k);
    if v >= SINGLE_MODE_V {
        log::warn!("fiber is not single-mode at this frequency (V = {v:.4})");
    }
    // Brent runs to near machine precision; tighter than requested never hurts here
    let root_tol = tol.root_rel_tol.min(4.0 * f64::EPSILON);
    let beta = solve_beta(fiber, k, root_tol)?;

    let dw = omega * 1e-6;
    let bp = solve_beta(fiber, (omega + dw) / C, root_tol)?;
    let bm = solve_beta(fiber, (omega - dw) / C, root_tol)?;
    let v_group = 2.0 * dw / (bp - bm);

    let (n1, n2, a) = (fiber.n1, fiber.n2, fiber.radius);
    let h = (n1 * n1 * k * k - beta * beta).sqrt();
    let q = (beta * beta - n2 * n2 * k * k).sqrt();
    let (ha, qa) = (h * a, q * a);
    let j = bessel::JyTable::new(2, ha)?;
    let kv = bessel::k_values(2, qa)?;
    let j1p = j.j_prime(1);
    let k1p = -0.5 * (kv[0] + kv[2]);
    let s_param = (1.0 / (ha * ha) + 1.0 / (qa * qa)) / (j1p / (ha * j.j(1)) + k1p / (qa * kv[1]));

    let mut mode = ModeSolution {
        omega,
        k,
        beta,
        h,
        q,
        s_param,
        norm_c: 1.0,
        v_group,
        v_phase: omega / beta,
        residual: eigen_residual(fiber, k, beta),
        fiber: *fiber,
        kj_ratio: kv[1] / j.j(1),
    };
    // norm_c is 1 at this point
    mode.norm_c = 1.0 / normalization_integral(&mode, tol.quad_rel_tol)?.sqrt();
    Ok(mode)
}

/// ∫ dφ ∫ n² |e|² r dr for the profile as currently scaled by `norm_c`.
fn normalization_integral(mode: &ModeSolution, rel_tol: f64) -> Result<f64> {
    let fiber = mode.fiber;
    let a = fiber.radius;
    let mut density = |r: f64| {
        let p = mode.raw_profile(r);
        let n = if r < a { fiber.n1 } else { fiber.n2 };
        n * n * (p[0].norm_sqr() + p[1].norm_sqr() + p[2].norm_sqr()) * r
    };
    let inside: f64 = integrate_limited(&mut density, 0.0, a, rel_tol, 0.0, 2000)?;
    // exterior decays like exp(-2qr); stop where it is 1e-18 below the surface value
    let decay_len = 1.0 / (2.0 * mode.q);
    let r_max = a + decay_len * (18.0 * std::f64::consts::LN_10 + 10.0);
    let mut outside = 0.0;
    let pieces = 8;
    for i in 0..pieces {
        let r0 = a + (r_max - a) * (i as f64 / pieces as f64).powi(2);
        let r1 = a + (r_max - a) * ((i + 1) as f64 / pieces as f64).powi(2);
        outside += integrate_limited(&mut density, r0, r1, rel_tol, 0.0, 2000)?;
    }
    Ok(2.0 * PI * (inside + outside))
}

impl ModeSolution {
    pub fn fiber(&self) -> &FiberSpec {
        &self.fiber
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }

    /// β'(ω) = 1/v_g
    pub fn beta_prime(&self) -> f64 {
        1.0 / self.v_group
    }

    fn raw_profile(&self, r: f64) -> [Complex64; 3] {
        let a = self.fiber.radius;
        let s = self.s_param;
        let c = self.norm_c;
        if r < a {
            let (j0, j1, j2) = if r == 0.0 {
                (1.0, 0.0, 0.0)
            } else {
                let j = bessel::JyTable::new(2, self.h * r).expect("h r is positive and finite");
                (j.j(0), j.j(1), j.j(2))
            };
            let pref = c * self.q / self.h * self.kj_ratio;
            [
                Complex64::new(0.0, pref * ((1.0 - s) * j0 - (1.0 + s) * j2)),
                Complex64::new(-pref * ((1.0 - s) * j0 + (1.0 + s) * j2), 0.0),
                Complex64::new(c * 2.0 * self.q / self.beta * self.kj_ratio * j1, 0.0),
            ]
        } else {
            let kv = bessel::k_values(2, self.q * r).expect("q r is positive");
            [
                Complex64::new(0.0, c * ((1.0 - s) * kv[0] + (1.0 + s) * kv[2])),
                Complex64::new(-c * ((1.0 - s) * kv[0] - (1.0 + s) * kv[2]), 0.0),
                Complex64::new(c * 2.0 * self.q / self.beta * kv[1], 0.0),
            ]
        }
    }

    /// Interior branch for r < a, exterior branch for r >= a.
    pub fn profile(&self, r: f64) -> Result<GuidedProfile> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Domain(format!("radius must be >= 0, got {r}")));
        }
        let [e_r, e_phi, e_z] = self.raw_profile(r);
        Ok(GuidedProfile { r, e_r, e_phi, e_z })
    }

    /// Interior branch evaluated at r (used to expose the interface jump at r = a).
    pub fn profile_inside(&self, r: f64) -> Result<GuidedProfile> {
        let a = self.fiber.radius;
        if !(r.is_finite() && r >= 0.0 && r <= a) {
            return Err(Error::Domain(format!("interior branch needs 0 <= r <= a, got {r}")));
        }
        let rr = if r == a { a * (1.0 - f64::EPSILON) } else { r };
        let [e_r, e_phi, e_z] = self.raw_profile(rr);
        Ok(GuidedProfile { r, e_r, e_phi, e_z })
    }
}

pub fn profile_reference(mode: &ModeSolution, r: f64) -> Result<GuidedProfile> {
    mode.profile(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedProfile {
    pub r: f64,
    pub e_r: Complex64,
    pub e_phi: Complex64,
    pub e_z: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GuidedPolarization {
    /// Quasicircular, counterclockwise (l = +1).
    CircPlus,
    /// Quasicircular, clockwise (l = -1).
    CircMinus,
    /// Quasilinear along the major principal axis.
    X,
    /// Quasilinear along the minor principal axis.
    Y,
}

impl GuidedPolarization {
    pub fn label(&self) -> &'static str {
        match self {
            Self::CircPlus => "circ+",
            Self::CircMinus => "circ-",
            Self::X => "x",
            Self::Y => "y",
        }
    }
}

/// Cylindrical components (r, φ, z) of the polarized mode profile, without
/// the e^{ifβz} factor. Quasicircular modes also omit e^{ilφ}.
pub fn profile_polarized(
    profile: &GuidedProfile,
    phi: f64,
    f: i8,
    p: GuidedPolarization,
) -> [Complex64; 3] {
    let fz = f as f64;
    let (er, ep, ez) = (profile.e_r, profile.e_phi, profile.e_z);
    let i = Complex64::i();
    match p {
        GuidedPolarization::CircPlus => [er, ep, ez * fz],
        GuidedPolarization::CircMinus => [er, -ep, ez * fz],
        GuidedPolarization::X => {
            let (s, c) = phi.sin_cos();
            [er * (SQRT_2 * c), i * ep * (SQRT_2 * s), ez * (SQRT_2 * fz * c)]
        }
        GuidedPolarization::Y => {
            let (s, c) = phi.sin_cos();
            [er * (SQRT_2 * s), -i * ep * (SQRT_2 * c), ez * (SQRT_2 * fz * s)]
        }
    }
}

/// Cylindrical (r, φ, z) to Cartesian (x, y, z) at azimuth φ.
pub fn cyl_to_cart(v: [Complex64; 3], phi: f64) -> [Complex64; 3] {
    let (s, c) = phi.sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c, v[2]]
}

/// Spherical tensor components indexed by q + 1 (q = -1, 0, +1):
/// V_0 = V_z, V_{±1} = ∓(V_x ± i V_y)/√2.
pub fn spherical_components(cart: [Complex64; 3]) -> [Complex64; 3] {
    let i = Complex64::i();
    [
        (cart[0] - i * cart[1]) * FRAC_1_SQRT_2,
        cart[2],
        -(cart[0] + i * cart[1]) * FRAC_1_SQRT_2,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalMagnitudes {
    pub e0: f64,
    pub e_plus: f64,
    pub e_minus: f64,
}

pub fn spherical_magnitudes(profile: &GuidedProfile) -> SphericalMagnitudes {
    let (er, ep) = (profile.e_r.norm(), profile.e_phi.norm());
    SphericalMagnitudes {
        e0: profile.e_z.norm(),
        e_plus: (er - ep) * FRAC_1_SQRT_2,
        e_minus: (er + ep) * FRAC_1_SQRT_2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_fiber() -> (FiberSpec, ModeSolution) {
        let lambda = 852e-9;
        let fiber = FiberSpec::silica_in_vacuum(250e-9, lambda).unwrap();
        let mode = solve_mode(&fiber, 2.0 * PI * C / lambda).unwrap();
        (fiber, mode)
    }

    #[test]
    fn sellmeier_value() {
        assert!((sellmeier_silica(852e-9) - 1.452_467).abs() < 2e-6);
    }

    #[test]
    fn guided_bounds_and_residual() {
        let (fiber, mode) = reference_fiber();
        assert!(mode.beta > fiber.n2 * mode.k && mode.beta < fiber.n1 * mode.k);
        assert!(mode.residual < 1e-10);
        assert!(mode.norm_c > 0.0);
        assert!(mode.v_group > 0.0);
        // frozen from an independent scipy solve (brentq on the same equation)
        assert!((mode.beta / mode.k - 1.143_99).abs() < 2e-5);
        assert!((mode.v_group / C - 0.663_35).abs() < 2e-5);
        let p = mode.profile(fiber.radius + 200e-9).unwrap();
        assert!((p.e_r.norm() / p.e_z.norm() - 1.8225).abs() < 2e-4);
    }

    #[test]
    fn normalization_is_unity() {
        let (_, mode) = reference_fiber();
        let n = normalization_integral(&mode, 1e-11).unwrap();
        assert!((n - 1.0).abs() < 1e-8, "{n}");
    }

    #[test]
    fn no_contrast_is_cutoff() {
        let fiber = FiberSpec { radius: 250e-9, n1: 1.0, n2: 1.0 };
        assert!(matches!(solve_mode(&fiber, 2.2e15), Err(Error::ModeCutoff(_))));
        assert!(FiberSpec::new(250e-9, 1.0, 1.0).is_err());
    }

    #[test]
    fn phase_conventions() {
        let (_, mode) = reference_fiber();
        for r in [0.3e-7, 2.5e-7, 4.5e-7] {
            let p = mode.profile(r).unwrap();
            assert_eq!(p.e_r.re, 0.0);
            assert!(p.e_r.im > 0.0);
            assert_eq!(p.e_phi.im, 0.0);
            assert!(p.e_phi.re < 0.0);
            assert_eq!(p.e_z.im, 0.0);
        }
    }

    #[test]
    fn interface_continuity() {
        let (fiber, mode) = reference_fiber();
        let a = fiber.radius;
        let inn = mode.profile_inside(a).unwrap();
        let out = mode.profile(a).unwrap();
        assert!((inn.e_z - out.e_z).norm() < 1e-12 * out.e_z.norm());
        assert!((inn.e_phi - out.e_phi).norm() < 1e-9 * out.e_phi.norm());
        let d_in = inn.e_r * (fiber.n1 * fiber.n1);
        let d_out = out.e_r * (fiber.n2 * fiber.n2);
        assert!((d_in - d_out).norm() < 1e-9 * d_out.norm());
    }

    #[test]
    fn ratio_window_outside() {
        let (fiber, mode) = reference_fiber();
        let mut x: f64 = 1.0 + 1e-6;
        while x <= 5.0 {
            let p = mode.profile(x * fiber.radius).unwrap();
            let ratio = p.e_r.norm() / p.e_z.norm();
            assert!(ratio > 1.75 && ratio < 2.1, "r/a={x} ratio={ratio}");
            assert!(p.e_r.norm() > p.e_phi.norm() && p.e_r.norm() > p.e_z.norm());
            x += 0.01;
        }
    }

    #[test]
    fn polarized_forms_at_phi_zero() {
        let (_, mode) = reference_fiber();
        let p = mode.profile(4.5e-7).unwrap();
        let x = profile_polarized(&p, 0.0, -1, GuidedPolarization::X);
        assert!((x[0] - p.e_r * SQRT_2).norm() < 1e-15);
        assert_eq!(x[1].norm(), 0.0);
        assert!((x[2] + p.e_z * SQRT_2).norm() < 1e-15);
        let y = profile_polarized(&p, 0.0, 1, GuidedPolarization::Y);
        assert_eq!(y[0].norm(), 0.0);
        assert!((y[1] + Complex64::i() * p.e_phi * SQRT_2).norm() < 1e-15);
        // circular = (x + i y)/√2 for l = +1
        let x1 = profile_polarized(&p, 0.0, 1, GuidedPolarization::X);
        let c = profile_polarized(&p, 0.0, 1, GuidedPolarization::CircPlus);
        for k in 0..3 {
            let sup = (x1[k] + Complex64::i() * y[k]) * FRAC_1_SQRT_2;
            assert!((sup - c[k]).norm() < 1e-12 * c[0].norm());
        }
    }

    #[test]
    fn spherical_magnitudes_match_components() {
        let (_, mode) = reference_fiber();
        let p = mode.profile(4.5e-7).unwrap();
        let m = spherical_magnitudes(&p);
        let sph = spherical_components(cyl_to_cart(
            profile_polarized(&p, 0.0, 1, GuidedPolarization::CircPlus),
            0.0,
        ));
        assert!((sph[0].norm() - m.e_minus).abs() < 1e-12 * m.e_minus);
        assert!((sph[1].norm() - m.e0).abs() < 1e-12 * m.e0);
        assert!((sph[2].norm() - m.e_plus).abs() < 1e-12 * m.e_minus);
        let total = m.e0 * m.e0 + m.e_plus * m.e_plus + m.e_minus * m.e_minus;
        let cyl = p.e_r.norm_sqr() + p.e_phi.norm_sqr() + p.e_z.norm_sqr();
        assert!((total - cyl).abs() < 1e-12 * cyl);
        assert!(m.e_minus > m.e_plus && m.e_plus >= 0.0);
    }
}
