//! Bloch analysis near Bragg resonance: band gaps, thresholds, the
//! infinite-array reflection coefficient and its group delay.

use crate::array::{channel_at, channel_response, Bloch, Lattice};
use crate::emission::AtomSite;
use crate::error::{Error, Result};
use crate::scattering::{channel_scalars, single_atom_transfer, Channel, PolarizationChannel, C64};
use std::f64::consts::PI;

const ONE: C64 = C64::new(1.0, 0.0);
const MAX_PHI: f64 = 0.1;
/// Central-difference step for the group delay (rad/s).
pub const DELAY_STEP: f64 = 2.0 * PI * 1e6;

/// Channel with the loss parts Re(S) removed, keeping i Im(S).
pub fn lossless_channel(site: &AtomSite, xi: Channel, delta: f64) -> Result<PolarizationChannel> {
    let (sr, sp, sz) = channel_scalars(site, delta);
    let im = |s: C64| C64::new(0.0, s.im);
    single_atom_transfer(xi, im(sr), im(sp), im(sz))
}

fn checked_phase(site: &AtomSite, lattice: &Lattice, delta: f64) -> Result<(i64, f64)> {
    let (n, phi) = lattice.phase(site, delta);
    if phi.abs() >= MAX_PHI {
        return Err(Error::Domain(format!(
            "mismatch phase {phi:.3e} is not small; detuning too far from the lattice resonance"
        )));
    }
    Ok((n, phi))
}

/// Exact ϑ from cosh ϑ = ½(M₁₁ + M₂₂)cos ϕ + ½(M₁₁ − M₂₂) i sin ϕ.
pub fn bloch_theta(site: &AtomSite, xi: Channel, lattice: &Lattice, delta: f64, lossless: bool) -> Result<Bloch> {
    let (n, phi) = checked_phase(site, lattice, delta)?;
    let ch = if lossless { lossless_channel(site, xi, delta)? } else { channel_at(site, xi, delta)? };
    Ok(Bloch::from_channel(&ch, n, phi))
}

fn principal_sqrt(z: C64) -> C64 {
    let mut s = z.sqrt();
    if s.re < 0.0 || (s.re == 0.0 && s.im < 0.0) {
        s = -s;
    }
    s
}

/// Second-order expansion ϑ ≈ √(M₁₁ + M₂₂ − 2 + i(M₁₁ − M₂₂)ϕ − ϕ²).
pub fn theta_second_order(ch: &PolarizationChannel, phi: f64) -> C64 {
    principal_sqrt(ch.dm11 + ch.dm22 + C64::i() * (ch.dm11 - ch.dm22) * phi - phi * phi)
}

/// x channel: ϑ ≈ √(4S_rS_z − 2i(S_r + S_z)ϕ − ϕ²).
pub fn theta_x_approx(sr: C64, sz: C64, phi: f64) -> C64 {
    principal_sqrt(sr * sz * 4.0 - C64::i() * (sr + sz) * (2.0 * phi) - phi * phi)
}

/// y channel: ϑ ≈ √(−2iS_φϕ − ϕ²).
pub fn theta_y_approx(sphi: C64, phi: f64) -> C64 {
    principal_sqrt(-C64::i() * sphi * (2.0 * phi) - phi * phi)
}

/// Re(cosh ϑ − 1) with losses removed; positive inside a band gap.
pub fn gap_indicator(site: &AtomSite, xi: Channel, lattice: &Lattice, delta: f64) -> Result<f64> {
    Ok(bloch_theta(site, xi, lattice, delta, true)?.cosh_minus_one.re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapInterval {
    pub lo: f64,
    pub hi: f64,
}

impl GapInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, delta: f64) -> bool {
        delta > self.lo && delta < self.hi
    }
}

fn bisect_edge<F: Fn(f64) -> Result<f64>>(f: &F, mut outside: f64, mut inside: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (outside + inside);
        if mid == outside || mid == inside {
            break;
        }
        if f(mid)? > 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
        if (inside - outside).abs() <= 1e-12 * inside.abs().max(outside.abs()).max(1.0) {
            break;
        }
    }
    Ok(0.5 * (outside + inside))
}

/// Numerical gap intervals in δ over [c − half_range, c + half_range], where
/// c = δ_lat/2 is the gap centre. `points` is forced odd so that the grid
/// contains c itself.
pub fn find_gaps(site: &AtomSite, xi: Channel, lattice: &Lattice, half_range: f64, points: usize) -> Result<Vec<GapInterval>> {
    let points = points.max(3) | 1;
    let centre = 0.5 * lattice.delta_lat;
    let f = |d: f64| gap_indicator(site, xi, lattice, d);
    let step = 2.0 * half_range / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| centre - half_range + step * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&d| f(d)).collect::<Result<_>>()?;
    let mut gaps = Vec::new();
    let mut start: Option<f64> = if vals[0] > 0.0 { Some(grid[0]) } else { None };
    for i in 1..points {
        let (was, is) = (vals[i - 1] > 0.0, vals[i] > 0.0);
        if !was && is {
            start = Some(bisect_edge(&f, grid[i - 1], grid[i])?);
        } else if was && !is {
            let end = bisect_edge(&f, grid[i], grid[i - 1])?;
            gaps.push(GapInterval { lo: start.take().unwrap_or(grid[0]), hi: end });
        }
    }
    if let Some(s) = start {
        gaps.push(GapInterval { lo: s, hi: grid[points - 1] });
    }
    Ok(gaps)
}

/// Closed-form gap parameters (γ neglected at the edges).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapClosedForm {
    pub delta_max: f64,
    /// Inner gap edge, x channel only.
    pub delta_min: Option<f64>,
    pub delta_gap: f64,
    pub n_gap: f64,
    pub delta_mid: f64,
    /// R_gap at +δ_mid and −δ_mid.
    pub r_gap: [C64; 2],
    /// √(u₀|e|²v_g/Λ) / max(γ, |δ_lat|); the closed forms need this ≫ 1.
    pub validity_ratio: f64,
}

pub fn gap_closed_form(site: &AtomSite, xi: Channel, lattice: &Lattice) -> GapClosedForm {
    let (u0, vg, l, g) = (site.rates.u0, site.v_group, lattice.period, site.gamma());
    let dl2 = 0.25 * lattice.delta_lat * lattice.delta_lat;
    match xi {
        Channel::X => {
            let (er, ez) = (site.e_r, site.e_z);
            let dmax = (dl2 + u0 * er * er * vg / l).sqrt();
            let dmin = (dl2 + u0 * ez * ez * vg / l).sqrt();
            let corr = 1.0 - g / (2.0 * (u0 * vg / l).sqrt() * (er - ez));
            let (a, b) = (er.sqrt(), ez.sqrt());
            let r_plus = -(C64::new(a, b) / C64::new(a, -b)) * corr;
            let r_minus = -(C64::new(a, -b) / C64::new(a, b)) * corr;
            GapClosedForm {
                delta_max: dmax,
                delta_min: Some(dmin),
                delta_gap: dmax - dmin,
                n_gap: (vg / (u0 * l)).sqrt() / (er - ez),
                delta_mid: (u0 * er * ez * vg / l).sqrt(),
                r_gap: [r_plus, r_minus],
                validity_ratio: (u0 * ez * ez * vg / l).sqrt() / g.max(lattice.delta_lat.abs()),
            }
        }
        Channel::Y => {
            let ep = site.e_phi;
            let w2 = u0 * ep * ep * vg / l;
            let dmax = (dl2 + w2).sqrt();
            let corr = 1.0 - g / (3.0 * w2).sqrt();
            let s3 = 3f64.sqrt();
            GapClosedForm {
                delta_max: dmax,
                delta_min: None,
                delta_gap: dmax - 0.5 * lattice.delta_lat.abs(),
                n_gap: (4.0 * vg / (3.0 * u0 * l)).sqrt() / ep,
                delta_mid: 0.5 * w2.sqrt(),
                r_gap: [-C64::new(1.0, s3) * 0.5 * corr, -C64::new(1.0, -s3) * 0.5 * corr],
                validity_ratio: w2.sqrt() / g.max(lattice.delta_lat.abs()),
            }
        }
    }
}

/// R_∞ = R/(1 − T e^{iϕ − ϑ}) with the exact (lossy) ϑ.
pub fn infinite_array_reflection(site: &AtomSite, xi: Channel, lattice: &Lattice, delta: f64) -> Result<C64> {
    let (n, phi) = checked_phase(site, lattice, delta)?;
    let ch = channel_at(site, xi, delta)?;
    let b = Bloch::from_channel(&ch, n, phi);
    Ok(ch.r / (ONE - ch.t * (C64::new(-b.theta.re, phi - b.theta.im)).exp()))
}

/// dφ_{R∞}/dω by central difference with step [`DELAY_STEP`] (seconds).
pub fn group_delay(site: &AtomSite, xi: Channel, lattice: &Lattice, delta: f64) -> Result<f64> {
    let hi = infinite_array_reflection(site, xi, lattice, delta + DELAY_STEP)?;
    let lo = infinite_array_reflection(site, xi, lattice, delta - DELAY_STEP)?;
    Ok((hi / lo).arg() / (2.0 * DELAY_STEP))
}

/// Mean of the central-difference group delay over the gap intervals,
/// sampled on a grid of spacing [`DELAY_STEP`].
pub fn mean_group_delay(site: &AtomSite, xi: Channel, lattice: &Lattice, gaps: &[GapInterval]) -> Result<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for gap in gaps {
        let k = (gap.width() / DELAY_STEP).floor() as usize;
        for i in 0..k {
            let d = gap.lo + DELAY_STEP * (i as f64 + 0.5);
            sum += group_delay(site, xi, lattice, d)?;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Invalid("no gap region to average the group delay over".into()));
    }
    Ok(sum / count as f64)
}

/// Plateau half-width estimate √(γ_sγN)/2 for the x channel at Bragg resonance.
pub fn delta_flat_closed(site: &AtomSite, n: u64) -> f64 {
    0.5 * (site.rates.gamma_s * site.gamma() * n as f64).sqrt()
}

/// Smallest |δ| at which the finite array stops behaving like the infinite
/// one: ||R_N(δ)|²/|R_∞(δ)|² − 1| > `rel`. Scans outward on a 2π×1 MHz grid
/// up to `max_delta` on both sides and bisects the first crossing.
pub fn delta_flat_numeric(site: &AtomSite, lattice: &Lattice, n: u64, rel: f64, max_delta: f64) -> Result<f64> {
    let departs = |d: f64| -> Result<bool> {
        let reference = infinite_array_reflection(site, Channel::X, lattice, d)?.norm_sqr();
        let ch = channel_at(site, Channel::X, d)?;
        let (order, phi) = lattice.phase(site, d);
        let r = channel_response(&ch, order, phi, n)?.reflectivity;
        Ok((r / reference - 1.0).abs() > rel)
    };
    let step = 2.0 * PI * 1e6;
    let mut best = f64::INFINITY;
    for sign in [1.0, -1.0] {
        let mut prev = 0.0;
        let mut d = step;
        while d <= max_delta {
            if departs(sign * d)? {
                let (mut lo, mut hi) = (prev, d);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if departs(sign * mid)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                best = best.min(0.5 * (lo + hi));
                break;
            }
            prev = d;
            d += step;
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Invalid("reflectivity never left the plateau within the scan range".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub xi: Channel,
    pub delta_lat: f64,
    /// ω_c − ω₀ = δ_lat/2.
    pub omega_c_offset: f64,
    pub closed: GapClosedForm,
    pub gaps: Vec<GapInterval>,
    /// Outer edge distance from ω_c, from the numerical gaps.
    pub delta_max: f64,
    /// Inner edge distance from ω_c (x channel).
    pub delta_min: Option<f64>,
    pub delta_gap: f64,
    /// R_∞ at ±δ_mid with the full lossy channel.
    pub r_gap: [C64; 2],
    pub tau_delay: f64,
}

pub fn gap_report(site: &AtomSite, xi: Channel, lattice: &Lattice) -> Result<GapReport> {
    let closed = gap_closed_form(site, xi, lattice);
    if closed.validity_ratio < 10.0 {
        log::warn!(
            "gap closed forms are marginal here (ratio {:.2} < 10)",
            closed.validity_ratio
        );
    }
    let c = 0.5 * lattice.delta_lat;
    let gaps = find_gaps(site, xi, lattice, 1.5 * closed.delta_max, 3001)?;
    if gaps.is_empty() {
        return Err(Error::Invalid("no band gap found".into()));
    }
    let delta_max = gaps
        .iter()
        .map(|g| (g.lo - c).abs().max((g.hi - c).abs()))
        .fold(0.0, f64::max);
    let delta_min = match xi {
        Channel::X => Some(
            gaps.iter()
                .map(|g| (g.lo - c).abs().min((g.hi - c).abs()))
                .fold(f64::INFINITY, f64::min),
        ),
        Channel::Y => None,
    };
    let delta_gap = gaps.iter().map(|g| g.width()).sum::<f64>() / gaps.len() as f64;
    let r_gap = [
        infinite_array_reflection(site, xi, lattice, c + closed.delta_mid)?,
        infinite_array_reflection(site, xi, lattice, c - closed.delta_mid)?,
    ];
    let tau_delay = mean_group_delay(site, xi, lattice, &gaps)?;
    Ok(GapReport {
        xi,
        delta_lat: lattice.delta_lat,
        omega_c_offset: c,
        closed,
        gaps,
        delta_max,
        delta_min,
        delta_gap,
        r_gap,
        tau_delay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::cesium_d2_default;
    use crate::emission::atom_site;
    use crate::fiber::{solve_mode, FiberSpec};
    use crate::numerics::ToleranceConfig;

    fn site(r: f64) -> AtomSite {
        let t = cesium_d2_default();
        let fiber = FiberSpec::silica_in_vacuum(250e-9, t.wavelength()).unwrap();
        let mode = solve_mode(&fiber, t.omega0).unwrap();
        atom_site(&mode, &t, r, &ToleranceConfig::default(), None).unwrap()
    }

    #[test]
    fn y_theta_vanishes_at_bragg() {
        let s = site(450e-9);
        let lat = Lattice::bragg(&s, 2, 0.0).unwrap();
        let b = bloch_theta(&s, Channel::Y, &lat, 0.0, false).unwrap();
        assert_eq!(b.theta, C64::new(0.0, 0.0));
    }

    #[test]
    fn x_theta_first_order_form() {
        // ϑ ≈ 2γ_s/γ neglects O(S_r + S_z); far from the fiber that is below 1%
        let s = site(800e-9);
        let lat = Lattice::bragg(&s, 2, 0.0).unwrap();
        let b = bloch_theta(&s, Channel::X, &lat, 0.0, false).unwrap();
        let approx = 2.0 * s.rates.gamma_s / s.gamma();
        assert!(b.theta.im.abs() < 1e-12 * b.theta.re);
        assert!((b.theta.re / approx - 1.0).abs() < 1e-2);
    }

    #[test]
    fn second_order_expansion_matches_exact() {
        let s = site(450e-9);
        for xi in [Channel::X, Channel::Y] {
            let ch = channel_at(&s, xi, 2.0 * PI * 3e6).unwrap();
            for k in -10..=10 {
                let phi = 0.001 * k as f64;
                let exact = Bloch::from_channel(&ch, 2, phi).theta;
                let approx = theta_second_order(&ch, phi);
                assert!((exact - approx).norm() <= 1e-3 * exact.norm(), "{xi:?} phi={phi} {exact} {approx}");
            }
        }
    }

    #[test]
    fn channel_specific_approximations() {
        let s = site(450e-9);
        let d = 2.0 * PI * 1e9;
        let lat = Lattice::bragg(&s, 2, 0.0).unwrap();
        let (_, phi) = lat.phase(&s, d);
        let (sr, sp, sz) = channel_scalars(&s, d);
        let x = bloch_theta(&s, Channel::X, &lat, d, false).unwrap().theta;
        let y = bloch_theta(&s, Channel::Y, &lat, d, false).unwrap().theta;
        assert!((theta_x_approx(sr, sz, phi) - x).norm() < 2e-2 * x.norm());
        assert!((theta_y_approx(sp, phi) - y).norm() < 2e-2 * y.norm());
    }

    #[test]
    fn gaps_are_symmetric_without_lattice_detuning() {
        let s = site(450e-9);
        let lat = Lattice::bragg(&s, 2, 0.0).unwrap();
        for xi in [Channel::X, Channel::Y] {
            let closed = gap_closed_form(&s, xi, &lat);
            let gaps = find_gaps(&s, xi, &lat, 1.5 * closed.delta_max, 3001).unwrap();
            assert_eq!(gaps.len(), 2, "{xi:?}");
            assert!((gaps[0].lo + gaps[1].hi).abs() < 1e-10 * gaps[1].hi);
            assert!((gaps[0].hi + gaps[1].lo).abs() < 1e-10 * gaps[1].hi + 1e-3);
        }
    }

    #[test]
    fn y_gaps_share_the_resonance_edge() {
        let s = site(450e-9);
        let lat = Lattice::bragg(&s, 2, 0.0).unwrap();
        let closed = gap_closed_form(&s, Channel::Y, &lat);
        let gaps = find_gaps(&s, Channel::Y, &lat, 1.5 * closed.delta_max, 3001).unwrap();
        assert!(gaps[0].hi.abs() < 2.0 * PI * 1e3 && gaps[1].lo.abs() < 2.0 * PI * 1e3);
    }

    #[test]
    fn lossless_theta_small_away_from_gaps() {
        let s = site(450e-9);
        let lat = Lattice::bragg(&s, 2, 0.0).unwrap();
        let closed = gap_closed_form(&s, Channel::X, &lat);
        let peak = bloch_theta(&s, Channel::X, &lat, closed.delta_mid, true).unwrap().theta.re;
        for d in [1.2 * closed.delta_max, 0.3 * closed.delta_min.unwrap()] {
            let v = bloch_theta(&s, Channel::X, &lat, d, true).unwrap().theta.re;
            assert!(v < 0.1 * peak, "d={d} v={v} peak={peak}");
        }
    }

    #[test]
    fn gap_reflectivity_near_unity() {
        let s = site(450e-9);
        let lat = Lattice::bragg(&s, 2, 0.0).unwrap();
        for xi in [Channel::X, Channel::Y] {
            let c = gap_closed_form(&s, xi, &lat);
            for r in c.r_gap {
                assert!((r.norm_sqr() - 1.0).abs() < 0.05);
            }
            assert!((c.r_gap[0].norm() - c.r_gap[1].norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_rises_across_gaps() {
        let s = site(450e-9);
        let lat = Lattice::bragg(&s, 2, 0.0).unwrap();
        let rep = gap_report(&s, Channel::X, &lat).unwrap();
        for g in &rep.gaps {
            let mid = 0.5 * (g.lo + g.hi);
            assert!(group_delay(&s, Channel::X, &lat, mid).unwrap() > 0.0);
        }
        assert!(rep.tau_delay > 0.0);
    }

    #[test]
    fn far_phase_mismatch_rejected() {
        let s = site(450e-9);
        let lat = Lattice::bragg(&s, 2, 0.0).unwrap();
        assert!(bloch_theta(&s, Channel::X, &lat, 2.0 * PI * 1e13, false).is_err());
    }
}
