//! Propagation through a periodic array of identical atoms.

use crate::emission::AtomSite;
use crate::error::{Error, Result};
use crate::scattering::{
    channel_scalars, general_transfer_4x4, single_atom_transfer, Channel, ModeBasis,
    PolarizationChannel, ScatteringMatrix, C64,
};
use nalgebra::{Matrix2, Matrix4};
use std::f64::consts::PI;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const RESCALE_ABOVE: f64 = 1e100;
const DEGENERATE_SINH: f64 = 1e-14;

/// Array period described relative to the guided-mode dispersion.
///
/// `order` is the Bragg order n with β(ω_lat)Λ = nπ, and `delta_lat` is
/// ω_lat − ω₀. With β_L ≈ β₀ + δ/v_g the per-period phase is nπ + ϕ,
/// ϕ = (δ − δ_lat)Λ/v_g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub period: f64,
    pub order: i64,
    pub delta_lat: f64,
}

impl Lattice {
    /// Period that is Bragg resonant at detuning `delta_lat`.
    pub fn bragg(site: &AtomSite, order: i64, delta_lat: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::Invalid(format!("Bragg order must be >= 1, got {order}")));
        }
        let beta_lat = site.beta0 + delta_lat / site.v_group;
        Ok(Self { period: order as f64 * PI / beta_lat, order, delta_lat })
    }

    pub fn from_period(site: &AtomSite, period: f64) -> Result<Self> {
        if !(period.is_finite() && period >= 0.0) {
            return Err(Error::Invalid(format!("period must be >= 0, got {period}")));
        }
        if period == 0.0 {
            return Ok(Self { period, order: 0, delta_lat: 0.0 });
        }
        let order = (site.beta0 * period / PI).round() as i64;
        let delta_lat = (order as f64 * PI / period - site.beta0) * site.v_group;
        Ok(Self { period, order, delta_lat })
    }

    /// (n, ϕ) with β_LΛ = nπ + ϕ.
    pub fn phase(&self, site: &AtomSite, delta: f64) -> (i64, f64) {
        (self.order, (delta - self.delta_lat) * self.period / site.v_group)
    }

    pub fn beta_lambda(&self, site: &AtomSite, delta: f64) -> f64 {
        let (n, phi) = self.phase(site, delta);
        n as f64 * PI + phi
    }
}

/// Bragg period nπ/β₀ at the atomic resonance.
pub fn bragg_period(site: &AtomSite, order: i64) -> f64 {
    order as f64 * PI / site.beta0
}

/// e^{iβΛ} from the split nπ + ϕ, without rounding of large βΛ.
fn phase_factor(n: i64, phi: f64) -> C64 {
    let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    C64::from_polar(sign, phi)
}

pub fn free_propagator(n: i64, phi: f64) -> Matrix2<C64> {
    let e = phase_factor(n, phi);
    Matrix2::new(e, ZERO, ZERO, e.conj())
}

/// Free propagator for the (+x, +y, −x, −y) mode vector.
pub fn free_propagator_4x4(n: i64, phi: f64) -> Matrix4<C64> {
    let e = phase_factor(n, phi);
    Matrix4::from_diagonal(&nalgebra::Vector4::new(e, e, e.conj(), e.conj()))
}

/// Free propagator for an arbitrary real phase βΛ.
pub fn free_propagator_phase(beta_lambda: f64) -> Matrix2<C64> {
    let e = C64::from_polar(1.0, beta_lambda);
    Matrix2::new(e, ZERO, ZERO, e.conj())
}

/// Matrix stored as `m · e^{log_scale}` so long products never overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled<Mat> {
    pub m: Mat,
    pub log_scale: f64,
}

macro_rules! scaled_ops {
    ($mat:ty) => {
        impl Scaled<$mat> {
            pub fn identity() -> Self {
                Self { m: <$mat>::identity(), log_scale: 0.0 }
            }

            fn renormalized(mut self) -> Self {
                let big = self.m.iter().map(|x| x.norm()).fold(0.0, f64::max);
                if big > RESCALE_ABOVE || (big > 0.0 && big < 1.0 / RESCALE_ABOVE) {
                    self.m /= C64::new(big, 0.0);
                    self.log_scale += big.ln();
                }
                self
            }

            pub fn mul(&self, other: &Self) -> Self {
                Self { m: self.m * other.m, log_scale: self.log_scale + other.log_scale }
                    .renormalized()
            }

            /// Entries divided by `e^{target}`; used to compare two scaled results.
            pub fn rescaled_to(&self, target: f64) -> $mat {
                self.m * C64::new((self.log_scale - target).exp(), 0.0)
            }

            pub fn unscaled(&self) -> $mat {
                self.rescaled_to(0.0)
            }

            /// `base^k` by repeated squaring.
            pub fn power(base: &$mat, mut k: u64) -> Self {
                let mut result = Self::identity();
                let mut b = Self { m: *base, log_scale: 0.0 }.renormalized();
                while k > 0 {
                    if k & 1 == 1 {
                        result = result.mul(&b);
                    }
                    k >>= 1;
                    if k > 0 {
                        b = b.mul(&b);
                    }
                }
                result
            }
        }
    };
}

scaled_ops!(Matrix2<C64>);
scaled_ops!(Matrix4<C64>);

pub type Scaled2 = Scaled<Matrix2<C64>>;
pub type Scaled4 = Scaled<Matrix4<C64>>;

pub fn channel_matrix(ch: &PolarizationChannel) -> Matrix2<C64> {
    Matrix2::new(ch.m[0][0], ch.m[0][1], ch.m[1][0], ch.m[1][1])
}

/// W = (MF)^{N−1} M.
pub fn total_transfer_product(m: &Matrix2<C64>, f: &Matrix2<C64>, n: u64) -> Result<Scaled2> {
    if n == 0 {
        return Err(Error::Invalid("array needs N >= 1".into()));
    }
    let cell = m * f;
    Ok(Scaled2::power(&cell, n - 1).mul(&Scaled2 { m: *m, log_scale: 0.0 }))
}

pub fn total_transfer_product_4x4(m: &Matrix4<C64>, f: &Matrix4<C64>, n: u64) -> Result<Scaled4> {
    if n == 0 {
        return Err(Error::Invalid("array needs N >= 1".into()));
    }
    let cell = m * f;
    Ok(Scaled4::power(&cell, n - 1).mul(&Scaled4 { m: *m, log_scale: 0.0 }))
}

/// M_N F_{N−1} M_{N−1} ⋯ F_1 M_1 for atoms at arbitrary axial positions `z`
/// (sorted), with `beta` the propagation constant.
pub fn total_transfer_positions(ms: &[Matrix2<C64>], z: &[f64], beta: f64) -> Result<Scaled2> {
    if ms.is_empty() || ms.len() != z.len() {
        return Err(Error::Invalid("need one transfer matrix per atom position".into()));
    }
    if z.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid("atom positions must be sorted".into()));
    }
    let mut w = Scaled2 { m: ms[0], log_scale: 0.0 };
    for j in 1..ms.len() {
        let f = free_propagator_phase(beta * (z[j] - z[j - 1]));
        w = Scaled2 { m: ms[j] * f, log_scale: 0.0 }.mul(&w);
    }
    Ok(w)
}

fn cexpm1(z: C64) -> C64 {
    let (a, b) = (z.re, z.im);
    let s = (0.5 * b).sin();
    C64::new(a.exp_m1() * b.cos() - 2.0 * s * s, a.exp() * b.sin())
}

/// asinh accurate for small |z| (the library form loses digits there).
fn casinh(z: C64) -> C64 {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        z * (ONE - z2 / 6.0 + z2 * z2 * (3.0 / 40.0) - z2 * z2 * z2 * (5.0 / 112.0))
    } else {
        z.asinh()
    }
}

/// Bloch parameter of one period: cosh θ = ½(M₁₁e^{iβΛ} + M₂₂e^{−iβΛ}),
/// θ = ϑ + inπ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bloch {
    pub order: i64,
    pub phi: f64,
    /// ϑ with Re ϑ ≥ 0 (Im ϑ ≥ 0 when Re ϑ = 0).
    pub theta: C64,
    /// cosh ϑ − 1.
    pub cosh_minus_one: C64,
}

impl Bloch {
    pub fn new(dm11: C64, dm22: C64, order: i64, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let h = (0.5 * phi).sin();
        let cm1 = (dm11 + dm22) * (0.5 * c) + C64::i() * (dm11 - dm22) * (0.5 * s)
            - C64::new(2.0 * h * h, 0.0);
        let mut theta = casinh((cm1 * 0.5).sqrt()) * 2.0;
        if theta.re < 0.0 || (theta.re == 0.0 && theta.im < 0.0) {
            theta = -theta;
        }
        Self { order, phi, theta, cosh_minus_one: cm1 }
    }

    pub fn from_channel(ch: &PolarizationChannel, order: i64, phi: f64) -> Self {
        Self::new(ch.dm11, ch.dm22, order, phi)
    }

    fn degenerate(&self) -> bool {
        self.theta.sinh().norm() < DEGENERATE_SINH
    }

    /// (sinh((N−1)ϑ)/sinh(Nϑ), sinh ϑ/sinh(Nϑ)) without forming sinh(Nϑ).
    pub fn sinh_ratios(&self, n: u64) -> (C64, C64) {
        let nf = n as f64;
        let th = self.theta;
        if self.degenerate() {
            let t2 = th * th;
            let rho = (ONE + t2 * (((nf - 1.0).powi(2) - nf * nf) / 6.0)) * ((nf - 1.0) / nf);
            let s = (ONE + t2 * ((1.0 - nf * nf) / 6.0)) / nf;
            return (rho, s);
        }
        let den = cexpm1(-th * (2.0 * nf));
        let rho = (-th).exp() * cexpm1(-th * (2.0 * (nf - 1.0))) / den;
        let s = (-th * (nf - 1.0)).exp() * cexpm1(-th * 2.0) / den;
        (rho, s)
    }

    /// U_k = sinh((k+1)θ)/sinh θ multiplied by e^{−log_scale}.
    fn chebyshev_scaled(&self, k: i64, log_scale: f64) -> C64 {
        if k < 0 {
            return ZERO;
        }
        let sign = if (k * self.order).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let kp = (k + 1) as f64;
        let th = self.theta;
        if self.degenerate() {
            let v = (ONE + th * th * ((kp * kp - 1.0) / 6.0)) * kp;
            return v * (sign * (-log_scale).exp());
        }
        let num = ((th * kp) - log_scale).exp() - ((-th * kp) - log_scale).exp();
        num * 0.5 / th.sinh() * sign
    }
}

/// W from the Chebyshev closed form, scaled by e^{(N−1)Re ϑ}.
pub fn total_transfer_closed(ch: &PolarizationChannel, order: i64, phi: f64, n: u64) -> Result<(Scaled2, Bloch)> {
    if n == 0 {
        return Err(Error::Invalid("array needs N >= 1".into()));
    }
    let b = Bloch::from_channel(ch, order, phi);
    let log_scale = (n as f64 - 1.0) * b.theta.re.max(0.0);
    let k = n as i64;
    let u1 = b.chebyshev_scaled(k - 1, log_scale);
    let u2 = b.chebyshev_scaled(k - 2, log_scale);
    let e = phase_factor(order, phi);
    let m = &ch.m;
    let w = Matrix2::new(
        m[0][0] * u1 - e.conj() * u2,
        m[0][1] * u1,
        m[1][0] * u1,
        m[1][1] * u1 - e * u2,
    );
    Ok((Scaled2 { m: w, log_scale }, b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayResponse {
    pub r_n: C64,
    pub t_n: C64,
    pub reflectivity: f64,
    pub transmittivity: f64,
    /// Outgoing guided power over input power.
    pub p_tot: f64,
    pub theta: Option<C64>,
}

impl ArrayResponse {
    fn new(r_n: C64, t_n: C64, theta: Option<C64>) -> Self {
        let (rr, tt) = (r_n.norm_sqr(), t_n.norm_sqr());
        Self { r_n, t_n, reflectivity: rr, transmittivity: tt, p_tot: rr + tt, theta }
    }
}

/// R_N = −W₂₁/W₂₂, T_N = 1/W₂₂.
pub fn array_response(w: &Scaled2) -> ArrayResponse {
    let w22 = w.m[(1, 1)];
    let w21 = w.m[(1, 0)];
    if w22.norm() < 1e-300 {
        return ArrayResponse::new(ZERO, ZERO, None);
    }
    let r = -w21 / w22;
    let t = (ONE / w22) * (-w.log_scale).exp();
    ArrayResponse::new(r, t, None)
}

/// Stable R_N, T_N of a uniform array in one channel.
pub fn channel_response(ch: &PolarizationChannel, order: i64, phi: f64, n: u64) -> Result<ArrayResponse> {
    if n == 0 {
        return Err(Error::Invalid("array needs N >= 1".into()));
    }
    let b = Bloch::from_channel(ch, order, phi);
    let (rho, s) = b.sinh_ratios(n);
    let den = ONE - ch.t * C64::from_polar(1.0, phi) * rho;
    let parity = ((n as i64 + 1) * order).rem_euclid(2);
    let sign = if parity == 0 { 1.0 } else { -1.0 };
    Ok(ArrayResponse::new(ch.r / den, ch.t * s / den * sign, Some(b.theta)))
}

/// One step of the recurrence R_N, T_N → R_{N+1}, T_{N+1}.
pub fn recurrence_step(r_n: C64, t_n: C64, r: C64, t: C64, beta_lambda: f64) -> (C64, C64) {
    let e1 = C64::from_polar(1.0, beta_lambda);
    let e2 = e1 * e1;
    let den = ONE - r_n * r * e2;
    (r_n + t_n * t_n * r * e2 / den, t_n * t * e1 / den)
}

/// Channel transfer for an atom at `site` and detuning δ.
pub fn channel_at(site: &AtomSite, xi: Channel, delta: f64) -> Result<PolarizationChannel> {
    let (sr, sp, sz) = channel_scalars(site, delta);
    single_atom_transfer(xi, sr, sp, sz)
}

pub fn respond(site: &AtomSite, xi: Channel, lattice: &Lattice, delta: f64, n: u64) -> Result<ArrayResponse> {
    let ch = channel_at(site, xi, delta)?;
    let (order, phi) = lattice.phase(site, delta);
    channel_response(&ch, order, phi, n)
}

/// Output powers for quasicircular (l = +) input, split by circular component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularResponse {
    pub x: ArrayResponse,
    pub y: ArrayResponse,
    /// Transmitted power into (+, l = +) and (+, l = −).
    pub p_forward: [f64; 2],
    /// Reflected power into (−, l = +) and (−, l = −).
    pub p_backward: [f64; 2],
    pub p_tot: f64,
}

/// Quasicircular input is (x + i y)/√2; the channels propagate independently.
pub fn combine_circular(x: ArrayResponse, y: ArrayResponse) -> CircularResponse {
    let half = 0.5;
    let pf = [((x.t_n + y.t_n) * half).norm_sqr(), ((x.t_n - y.t_n) * half).norm_sqr()];
    let pb = [((x.r_n + y.r_n) * half).norm_sqr(), ((x.r_n - y.r_n) * half).norm_sqr()];
    CircularResponse { x, y, p_forward: pf, p_backward: pb, p_tot: pf[0] + pf[1] + pb[0] + pb[1] }
}

pub fn respond_circular(site: &AtomSite, lattice: &Lattice, delta: f64, n: u64) -> Result<CircularResponse> {
    let x = respond(site, Channel::X, lattice, delta, n)?;
    let y = respond(site, Channel::Y, lattice, delta, n)?;
    Ok(combine_circular(x, y))
}

/// Closed forms at exact Bragg resonance for the y channel (ϑ = 0).
pub fn bragg_y(site: &AtomSite, delta: f64, order: i64, n: u64) -> ArrayResponse {
    let g = C64::new(site.gamma(), -2.0 * delta);
    let ue = site.rates.u0 * site.e_phi * site.e_phi;
    let nf = n as f64;
    let den = g + (nf - 1.0) * ue;
    let sign = if ((n as i64 + 1) * order).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    ArrayResponse::new(-(nf * ue) / den, (g - ue) / den * sign, Some(ZERO))
}

/// Large-N limit of the x-channel reflection at exact Bragg resonance,
/// −(|e_r| − |e_z|)/(|e_r| + |e_z|).
pub fn bragg_x_limit(site: &AtomSite) -> f64 {
    -(site.e_r - site.e_z) / (site.e_r + site.e_z)
}

/// Approximate x-channel Bloch parameter at Bragg, ϑ ≈ 2γ_s/(γ − 2iδ).
pub fn bragg_x_theta(site: &AtomSite, delta: f64) -> C64 {
    C64::new(2.0 * site.rates.gamma_s, 0.0) / C64::new(site.gamma(), -2.0 * delta)
}

/// Solves A_R = W A_L for the outgoing amplitudes. `x_in` holds incoming
/// (+x, +y) at the left end and (−x, −y) at the right end; the result holds
/// the transmitted forward amplitudes (X₁, X₂) and the reflected backward
/// amplitudes (X₃, X₄).
pub fn input_output_4mode(w: &Matrix4<C64>, x_in: [C64; 4]) -> Result<[C64; 4]> {
    let q = w[(2, 2)] * w[(3, 3)] - w[(2, 3)] * w[(3, 2)];
    if q.norm() < 1e-300 {
        return Err(Error::SingularTransfer("input-output determinant Q vanishes".into()));
    }
    let a3 = w[(2, 0)] * x_in[0] + w[(2, 1)] * x_in[1] - x_in[2];
    let a4 = w[(3, 0)] * x_in[0] + w[(3, 1)] * x_in[1] - x_in[3];
    let x3 = (w[(2, 3)] * a4 - w[(3, 3)] * a3) / q;
    let x4 = (w[(3, 2)] * a3 - w[(2, 2)] * a4) / q;
    let x1 = w[(0, 0)] * x_in[0] + w[(0, 1)] * x_in[1] + w[(0, 2)] * x3 + w[(0, 3)] * x4;
    let x2 = w[(1, 0)] * x_in[0] + w[(1, 1)] * x_in[1] + w[(1, 2)] * x3 + w[(1, 3)] * x4;
    Ok([x1, x2, x3, x4])
}

/// 4×4 total transfer matrix from a scattering matrix, via the product form.
pub fn total_transfer_4x4(s: &ScatteringMatrix, order: i64, phi: f64, n: u64) -> Result<Scaled4> {
    if s.basis != ModeBasis::Linear {
        return Err(Error::Invalid("4-mode propagation expects the linear basis".into()));
    }
    let m = general_transfer_4x4(s)?;
    total_transfer_product_4x4(&m, &free_propagator_4x4(order, phi), n)
}

/// Continuum limit W = exp((iB − S/Λ)L); meaningful only far from Bragg resonance.
pub fn homogenized_transfer(s: &ScatteringMatrix, beta: f64, period: f64, length: f64) -> Result<Matrix4<C64>> {
    if !(period > 0.0 && length >= 0.0) {
        return Err(Error::Invalid("homogenized medium needs period > 0 and length >= 0".into()));
    }
    let mut g = -s.to_matrix() / C64::new(period, 0.0);
    for i in 0..4 {
        let f = if i < 2 { 1.0 } else { -1.0 };
        g[(i, i)] += C64::new(0.0, f * beta);
    }
    Ok((g * C64::new(length, 0.0)).exp())
}
