//! Atom-field coupling coefficients and the decay-rate scalars derived from them.

use crate::atoms::{reduced_dipole_f, DipoleTable, HyperfineTransition};
use crate::constants::{EPS0, HBAR};
use crate::error::{Error, Result};
use crate::fiber::{
    cyl_to_cart, profile_polarized, spherical_components, GuidedPolarization, ModeSolution,
};
use crate::numerics::ToleranceConfig;
use crate::radiation::{gamma_rad_with, RadiativeCache, RadiativeRates};
use num_complex::Complex64;
use std::sync::Arc;

/// Couplings 𝒢_{fpeg} for one guided mode (f, p), indexed by (M_e + F', M_g + F).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    pub f: i8,
    pub p: GuidedPolarization,
    pub f_ground: i32,
    pub f_excited: i32,
    values: Vec<Complex64>,
}

impl CouplingTable {
    pub fn get(&self, m_e: i32, m_g: i32) -> Complex64 {
        if m_e.abs() > self.f_excited || m_g.abs() > self.f_ground {
            return Complex64::new(0.0, 0.0);
        }
        let ng = (2 * self.f_ground + 1) as usize;
        self.values[(m_e + self.f_excited) as usize * ng + (m_g + self.f_ground) as usize]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Σ_eg 𝒢*_{this} 𝒢_{other}
    pub fn overlap(&self, other: &CouplingTable) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// 𝒢_{fpeg} = √(ω/2ε₀ħv_g) d_eg·e^{(fp)} for an atom at (r, φ).
pub fn coupling(
    mode: &ModeSolution,
    t: &HyperfineTransition,
    r: f64,
    phi: f64,
    f: i8,
    p: GuidedPolarization,
) -> Result<CouplingTable> {
    if f != 1 && f != -1 {
        return Err(Error::Domain(format!("propagation direction must be ±1, got {f}")));
    }
    if r < mode.fiber().radius {
        log::warn!("atom placed inside the fiber (r = {r})");
    }
    let table = DipoleTable::new(t)?;
    let profile = mode.profile(r)?;
    let mut cart = cyl_to_cart(profile_polarized(&profile, phi, f, p), phi);
    let l = match p {
        GuidedPolarization::CircPlus => 1.0,
        GuidedPolarization::CircMinus => -1.0,
        _ => 0.0,
    };
    if l != 0.0 {
        let ph = Complex64::from_polar(1.0, l * phi);
        cart.iter_mut().for_each(|c| *c *= ph);
    }
    let sph = spherical_components(cart);
    let pref = (mode.omega / (2.0 * EPS0 * HBAR * mode.v_group)).sqrt();
    let (ng, ne) = (t.ground_count(), t.excited_count());
    let mut values = vec![Complex64::new(0.0, 0.0); ng * ne];
    for me in -t.f_prime..=t.f_prime {
        for mg in -t.f..=t.f {
            let q = me - mg;
            if q.abs() > 1 {
                continue;
            }
            let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            values[(me + t.f_prime) as usize * ng + (mg + t.f) as usize] =
                sph[(1 - q) as usize] * (sign * pref * table.get(me, mg));
        }
    }
    Ok(CouplingTable { f, p, f_ground: t.f, f_excited: t.f_prime, values })
}

/// Couplings for all four guided modes of one polarization basis, ordered
/// (+, p1), (+, p2), (-, p1), (-, p2).
pub fn coupling_set(
    mode: &ModeSolution,
    t: &HyperfineTransition,
    r: f64,
    phi: f64,
    circular: bool,
) -> Result<Vec<CouplingTable>> {
    let ps = if circular {
        [GuidedPolarization::CircPlus, GuidedPolarization::CircMinus]
    } else {
        [GuidedPolarization::X, GuidedPolarization::Y]
    };
    let mut out = Vec::with_capacity(4);
    for f in [1i8, -1] {
        for p in ps {
            out.push(coupling(mode, t, r, phi, f, p)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidedRates {
    /// γ^(fp)_{eg} = |𝒢_{fpeg}|², one table per input coupling table.
    pub per_mode: Vec<Vec<f64>>,
    /// γ^(gyd)_{ee'}, indexed by (M_e + F', M_e' + F').
    pub matrix: Vec<Vec<Complex64>>,
    /// Sublevel-averaged scalar rate into all guided modes.
    pub gamma_gyd: f64,
    /// Averaged rate into the forward (+) and backward (-) modes.
    pub gamma_forward: f64,
    pub gamma_backward: f64,
}

pub fn guided_rates(tables: &[CouplingTable]) -> Result<GuidedRates> {
    let first = tables
        .first()
        .ok_or_else(|| Error::Invalid("guided_rates needs coupling tables".into()))?;
    let (fe, fg) = (first.f_excited, first.f_ground);
    let ne = (2 * fe + 1) as usize;
    let ng = (2 * fg + 1) as usize;
    let mut matrix = vec![vec![Complex64::new(0.0, 0.0); ne]; ne];
    let mut per_mode = Vec::with_capacity(tables.len());
    let (mut fwd, mut bwd) = (0.0, 0.0);
    for tab in tables {
        if tab.f_excited != fe || tab.f_ground != fg {
            return Err(Error::Invalid("coupling tables from different transitions".into()));
        }
        per_mode.push(tab.values.iter().map(|g| g.norm_sqr()).collect::<Vec<_>>());
        let total: f64 = tab.values.iter().map(|g| g.norm_sqr()).sum();
        if tab.f > 0 {
            fwd += total;
        } else {
            bwd += total;
        }
        for e in 0..ne {
            for e2 in 0..ne {
                let mut s = Complex64::new(0.0, 0.0);
                for g in 0..ng {
                    s += tab.values[e * ng + g] * tab.values[e2 * ng + g].conj();
                }
                matrix[e][e2] += s;
            }
        }
    }
    let gamma_gyd = (0..ne).map(|e| matrix[e][e].re).sum::<f64>() / ne as f64;
    Ok(GuidedRates {
        per_mode,
        matrix,
        gamma_gyd,
        gamma_forward: fwd / ne as f64,
        gamma_backward: bwd / ne as f64,
    })
}

/// Scalar rates (rad/s) for an atom on the x axis at distance r from the fiber axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRates {
    pub gamma_gyd: f64,
    pub gamma_rad: f64,
    pub gamma_total: f64,
    pub gamma_1d_y: f64,
    pub gamma_s: f64,
    /// 2ω D_FF'² / (3(2F+1) ε₀ ħ v_g), multiplies squared profile components.
    pub u0: f64,
}

impl DecayRates {
    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma_gyd, self.gamma_rad, self.gamma_total, self.u0];
        if all.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidRates(format!("non-positive decay rate in {self:?}")));
        }
        Ok(())
    }
}

/// Everything downstream needs about one atom position: the guided-mode
/// profile magnitudes there and the decay rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSite {
    pub r: f64,
    pub e_r: f64,
    pub e_phi: f64,
    pub e_z: f64,
    pub omega0: f64,
    pub beta0: f64,
    pub v_group: f64,
    pub rates: DecayRates,
}

impl AtomSite {
    pub fn gamma(&self) -> f64 {
        self.rates.gamma_total
    }
}

pub fn u0(mode: &ModeSolution, t: &HyperfineTransition) -> f64 {
    let d = reduced_dipole_f(t);
    2.0 * mode.omega * d * d / (3.0 * t.ground_count() as f64 * EPS0 * HBAR * mode.v_group)
}

fn assemble(
    mode: &ModeSolution,
    t: &HyperfineTransition,
    r: f64,
    rad: &RadiativeRates,
) -> Result<AtomSite> {
    let tables = coupling_set(mode, t, r, 0.0, false)?;
    let guided = guided_rates(&tables)?;
    let prof = mode.profile(r)?;
    let (er, ep, ez) = (prof.e_r.norm(), prof.e_phi.norm(), prof.e_z.norm());
    let u = u0(mode, t);
    let rates = DecayRates {
        gamma_gyd: guided.gamma_gyd,
        gamma_rad: rad.average,
        gamma_total: guided.gamma_gyd + rad.average,
        gamma_1d_y: u * ep * ep,
        gamma_s: u * er * ez,
        u0: u,
    };
    rates.validate()?;
    Ok(AtomSite {
        r,
        e_r: er,
        e_phi: ep,
        e_z: ez,
        omega0: mode.omega,
        beta0: mode.beta,
        v_group: mode.v_group,
        rates,
    })
}

pub fn total_rates(mode: &ModeSolution, t: &HyperfineTransition, r: f64) -> Result<DecayRates> {
    Ok(atom_site(mode, t, r, &ToleranceConfig::default(), None)?.rates)
}

/// Builds the per-position record, reusing `cache` for the radiative part if given.
pub fn atom_site(
    mode: &ModeSolution,
    t: &HyperfineTransition,
    r: f64,
    tol: &ToleranceConfig,
    cache: Option<&RadiativeCache>,
) -> Result<AtomSite> {
    if (mode.omega - t.omega0).abs() > 1e-9 * t.omega0 {
        return Err(Error::Invalid("guided mode must be solved at the transition frequency".into()));
    }
    let rad: Arc<RadiativeRates> = match cache {
        Some(c) => c.get_or_compute(mode.fiber(), t, r, tol)?,
        None => Arc::new(gamma_rad_with(mode.fiber(), t, r, 0.0, tol)?),
    };
    assemble(mode, t, r, &rad)
}
