//! Single-atom scattering matrix, optical depth and field-transfer matrices.

use crate::atoms::HyperfineTransition;
use crate::emission::{coupling_set, AtomSite, CouplingTable};
use crate::error::{Error, Result};
use crate::fiber::ModeSolution;
use nalgebra::Matrix4;
use num_complex::Complex64;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeBasis {
    /// (+x, +y, -x, -y)
    Linear,
    /// (+ circ+, + circ-, - circ+, - circ-)
    Circular,
}

/// S_{fp,f'p'} in the order of [`ModeBasis`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringMatrix {
    pub basis: ModeBasis,
    pub delta: f64,
    pub entries: [[C64; 4]; 4],
}

fn direction(index: usize) -> f64 {
    if index < 2 {
        1.0
    } else {
        -1.0
    }
}

/// S_{fpf'p'} = 2f/(γ - 2iδ) Σ_eg p_g 𝒢*_{fpeg} 𝒢_{f'p'eg}, with flat p_g.
pub fn scattering_matrix(
    tables: &[CouplingTable],
    basis: ModeBasis,
    gamma: f64,
    delta: f64,
) -> Result<ScatteringMatrix> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidRates(format!("total decay rate must be > 0, got {gamma}")));
    }
    if tables.len() != 4 {
        return Err(Error::Invalid(format!("need 4 coupling tables, got {}", tables.len())));
    }
    let pg = 1.0 / (2 * tables[0].f_ground + 1) as f64;
    let denom = C64::new(gamma, -2.0 * delta);
    let mut entries = [[ZERO; 4]; 4];
    for (i, row) in entries.iter_mut().enumerate() {
        for (j, s) in row.iter_mut().enumerate() {
            *s = tables[i].overlap(&tables[j]) * (2.0 * direction(i) * pg) / denom;
        }
    }
    Ok(ScatteringMatrix { basis, delta, entries })
}

/// Builds couplings for the atom at `site` and evaluates the sublevel sum.
pub fn site_scattering_matrix(
    mode: &ModeSolution,
    t: &HyperfineTransition,
    site: &AtomSite,
    basis: ModeBasis,
    delta: f64,
) -> Result<ScatteringMatrix> {
    let tables = coupling_set(mode, t, site.r, 0.0, basis == ModeBasis::Circular)?;
    scattering_matrix(&tables, basis, site.gamma(), delta)
}

/// Nonzero linear-basis entries from the profile magnitudes:
/// S_{fx,f'x} = f u₀(|e_r|² + ff'|e_z|²)/(γ - 2iδ), S_{fy,f'y} = f u₀|e_φ|²/(γ - 2iδ).
pub fn closed_form_linear(site: &AtomSite, delta: f64) -> ScatteringMatrix {
    let denom = C64::new(site.gamma(), -2.0 * delta);
    let u0 = site.rates.u0;
    let mut entries = [[ZERO; 4]; 4];
    for i in [0usize, 2] {
        for j in [0usize, 2] {
            let (f, f2) = (direction(i), direction(j));
            entries[i][j] = f * u0 * (site.e_r * site.e_r + f * f2 * site.e_z * site.e_z) / denom;
            entries[i + 1][j + 1] = f * u0 * site.e_phi * site.e_phi / denom;
        }
    }
    ScatteringMatrix { basis: ModeBasis::Linear, delta, entries }
}

impl ScatteringMatrix {
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i][j]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// 2 Re(f S_{fp,fp}) for mode index `i`.
    pub fn optical_depth(&self, i: usize) -> f64 {
        2.0 * (self.entries[i][i] * direction(i)).re
    }

    pub fn to_matrix(&self) -> Matrix4<C64> {
        Matrix4::from_fn(|i, j| self.entries[i][j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    X,
    Y,
}

impl Channel {
    pub fn label(&self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
        }
    }
}

/// Optical depth per atom from the closed forms.
pub fn optical_depth(site: &AtomSite, channel: Channel, delta: f64) -> f64 {
    let g = site.gamma();
    let e2 = match channel {
        Channel::X => site.e_r * site.e_r + site.e_z * site.e_z,
        Channel::Y => site.e_phi * site.e_phi,
    };
    4.0 * g / (g * g + 4.0 * delta * delta) * site.rates.u0 * e2 / 2.0
}

/// Optical depth for quasicircular input, the mean of the x and y values.
pub fn optical_depth_circular(site: &AtomSite, delta: f64) -> f64 {
    0.5 * (optical_depth(site, Channel::X, delta) + optical_depth(site, Channel::Y, delta))
}

/// S_r, S_φ, S_z = u₀|e_{r,φ,z}|²/(γ - 2iδ).
pub fn channel_scalars(site: &AtomSite, delta: f64) -> (C64, C64, C64) {
    let denom = C64::new(site.gamma(), -2.0 * delta);
    let u0 = site.rates.u0;
    (
        u0 * site.e_r * site.e_r / denom,
        u0 * site.e_phi * site.e_phi / denom,
        u0 * site.e_z * site.e_z / denom,
    )
}

/// 2×2 transfer matrix of one atom in one decoupled polarization channel.
/// `dm11` and `dm22` hold M₁₁ - 1 and M₂₂ - 1 without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationChannel {
    pub xi: Channel,
    pub s_r: C64,
    pub s_phi: C64,
    pub s_z: C64,
    pub m: [[C64; 2]; 2],
    pub dm11: C64,
    pub dm22: C64,
    pub r: C64,
    pub t: C64,
}

impl PolarizationChannel {
    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }
}

pub fn single_atom_transfer(xi: Channel, s_r: C64, s_phi: C64, s_z: C64) -> Result<PolarizationChannel> {
    let (m, dm11, dm22, r, t) = match xi {
        Channel::X => {
            let d = ONE - s_r - s_z;
            if d.norm() < 1e-300 {
                return Err(Error::SingularTransfer("1 - S_r - S_z vanishes".into()));
            }
            let off = (s_r - s_z) / d;
            let dm11 = (-s_r - s_z + s_r * s_z * 4.0) / d;
            let dm22 = (s_r + s_z) / d;
            ([[ONE + dm11, -off], [off, ONE + dm22]], dm11, dm22, s_z - s_r, d)
        }
        Channel::Y => {
            let d = ONE - s_phi;
            if d.norm() < 1e-300 {
                return Err(Error::SingularTransfer("1 - S_phi vanishes".into()));
            }
            let off = s_phi / d;
            let dm11 = -s_phi / d;
            let dm22 = s_phi / d;
            ([[ONE + dm11, -off], [off, ONE + dm22]], dm11, dm22, -s_phi, d)
        }
    };
    Ok(PolarizationChannel { xi, s_r, s_phi, s_z, m, dm11, dm22, r, t })
}

/// Transfer matrix for a general 2-mode (forward, backward) scattering block.
pub fn transfer_2x2(spp: C64, spm: C64, smp: C64, smm: C64) -> Result<[[C64; 2]; 2]> {
    let d = ONE + smm;
    if d.norm() < 1e-300 {
        return Err(Error::SingularTransfer("1 + S_-- vanishes".into()));
    }
    Ok([[ONE - spp + spm * smp / d, -spm / d], [-smp / d, ONE / d]])
}

/// Channel from the forward row of a linear-basis scattering matrix.
pub fn channel_from_matrix(s: &ScatteringMatrix, xi: Channel) -> Result<PolarizationChannel> {
    if s.basis != ModeBasis::Linear {
        return Err(Error::Invalid("channel extraction needs the linear basis".into()));
    }
    match xi {
        Channel::X => {
            let (ff, fb) = (s.entries[0][0], s.entries[0][2]);
            single_atom_transfer(xi, (ff + fb) * 0.5, ZERO, (ff - fb) * 0.5)
        }
        Channel::Y => single_atom_transfer(xi, ZERO, s.entries[1][1], ZERO),
    }
}

/// M = (1 + S⁽⁻⁾)⁻¹ (1 - S⁽⁺⁾), with S⁽±⁾ keeping the columns of incoming
/// forward (+) or backward (-) modes.
pub fn general_transfer_4x4(s: &ScatteringMatrix) -> Result<Matrix4<C64>> {
    let full = s.to_matrix();
    let mut plus = Matrix4::<C64>::zeros();
    let mut minus = Matrix4::<C64>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            if j < 2 {
                plus[(i, j)] = full[(i, j)];
            } else {
                minus[(i, j)] = full[(i, j)];
            }
        }
    }
    let id = Matrix4::<C64>::identity();
    let inv = (id + minus)
        .try_inverse()
        .ok_or_else(|| Error::SingularTransfer("1 + S^(-) is not invertible".into()))?;
    Ok(inv * (id - plus))
}
