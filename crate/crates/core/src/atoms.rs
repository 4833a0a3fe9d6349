//! Hyperfine transition data and dipole matrix elements.

use crate::constants::C;
use crate::error::{Error, Result};
use crate::numerics::{wigner_3j, wigner_6j};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineTransition {
    pub j: f64,
    pub j_prime: f64,
    pub nuclear_spin: f64,
    pub f: i32,
    pub f_prime: i32,
    /// Transition angular frequency (rad/s).
    pub omega0: f64,
    /// ⟨J'‖D‖J⟩ in C·m.
    pub reduced_dipole_j: f64,
}

fn triangle(a: f64, b: f64, c: f64) -> bool {
    c >= (a - b).abs() - 1e-12 && c <= a + b + 1e-12
}

impl HyperfineTransition {
    pub fn new(
        j: f64,
        j_prime: f64,
        nuclear_spin: f64,
        f: i32,
        f_prime: i32,
        omega0: f64,
        reduced_dipole_j: f64,
    ) -> Result<Self> {
        let t = Self { j, j_prime, nuclear_spin, f, f_prime, omega0, reduced_dipole_j };
        if (f - f_prime).abs() > 1 {
            return Err(Error::Invalid(format!("|F - F'| > 1 (F={f}, F'={f_prime})")));
        }
        if !triangle(j, nuclear_spin, f as f64) || !triangle(j_prime, nuclear_spin, f_prime as f64) {
            return Err(Error::Invalid("hyperfine levels violate the angular momentum triangle".into()));
        }
        if !(reduced_dipole_j > 0.0 && omega0 > 0.0) {
            return Err(Error::Invalid("reduced dipole and omega0 must be > 0".into()));
        }
        Ok(t)
    }

    pub fn ground_count(&self) -> usize {
        (2 * self.f + 1) as usize
    }

    pub fn excited_count(&self) -> usize {
        (2 * self.f_prime + 1) as usize
    }

    /// Flat ground-state population 1/(2F+1).
    pub fn ground_population(&self) -> f64 {
        1.0 / self.ground_count() as f64
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI * C / self.omega0
    }
}

/// F = 4 -> F' = 5 line of the cesium D2 transition at 852 nm.
pub fn cesium_d2_default() -> HyperfineTransition {
    HyperfineTransition {
        j: 0.5,
        j_prime: 1.5,
        nuclear_spin: 3.5,
        f: 4,
        f_prime: 5,
        omega0: 2.0 * PI * C / 852e-9,
        reduced_dipole_j: 5.38e-29,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleElement {
    /// Ground sublevel M.
    pub m: i32,
    /// Excited sublevel M'.
    pub m_prime: i32,
    pub q: i32,
    pub value: f64,
}

/// Spherical component d^(q)_{M'M} with q = M' - M.
pub fn dipole_component(t: &HyperfineTransition, m: i32, m_prime: i32) -> Result<DipoleElement> {
    if m.abs() > t.f || m_prime.abs() > t.f_prime {
        return Err(Error::Domain(format!(
            "sublevel out of range: M={m} (F={}), M'={m_prime} (F'={})",
            t.f, t.f_prime
        )));
    }
    let q = m_prime - m;
    if q.abs() > 1 {
        return Ok(DipoleElement { m, m_prime, q, value: 0.0 });
    }
    let (f, fp) = (t.f as f64, t.f_prime as f64);
    let six = wigner_6j(t.j_prime, fp, t.nuclear_spin, f, t.j, 1.0)?;
    let three = wigner_3j(f, 1.0, fp, m as f64, q as f64, -(m_prime as f64))?;
    let exponent = (t.nuclear_spin + t.j_prime - m_prime as f64).round() as i64;
    let sign = if exponent.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let value = sign
        * t.reduced_dipole_j
        * ((2.0 * f + 1.0) * (2.0 * fp + 1.0)).sqrt()
        * six
        * three;
    Ok(DipoleElement { m, m_prime, q, value })
}

/// D_FF' from the J-basis reduced element and the hyperfine 6j symbol.
pub fn reduced_dipole_f(t: &HyperfineTransition) -> f64 {
    let (f, fp) = (t.f as f64, t.f_prime as f64);
    let six = wigner_6j(f, 1.0, fp, t.j_prime, t.nuclear_spin, t.j).unwrap_or(0.0);
    ((2.0 * f + 1.0) * (2.0 * fp + 1.0)).sqrt() * six.abs() * t.reduced_dipole_j
}

/// Dense d^(q)_{M'M} table, indexed by (M' + F', M + F).
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleTable {
    pub f: i32,
    pub f_prime: i32,
    values: Vec<f64>,
}

impl DipoleTable {
    pub fn new(t: &HyperfineTransition) -> Result<Self> {
        let (ng, ne) = (t.ground_count(), t.excited_count());
        let mut values = vec![0.0; ng * ne];
        for mp in -t.f_prime..=t.f_prime {
            for m in -t.f..=t.f {
                let d = dipole_component(t, m, mp)?;
                values[(mp + t.f_prime) as usize * ng + (m + t.f) as usize] = d.value;
            }
        }
        Ok(Self { f: t.f, f_prime: t.f_prime, values })
    }

    pub fn get(&self, m_prime: i32, m: i32) -> f64 {
        if m.abs() > self.f || m_prime.abs() > self.f_prime {
            return 0.0;
        }
        let ng = (2 * self.f + 1) as usize;
        self.values[(m_prime + self.f_prime) as usize * ng + (m + self.f) as usize]
    }

    /// Nonzero entries, excited-major order.
    pub fn nonzero(&self) -> Vec<DipoleElement> {
        let mut out = Vec::new();
        for mp in -self.f_prime..=self.f_prime {
            for m in -self.f..=self.f {
                let value = self.get(mp, m);
                if value != 0.0 {
                    out.push(DipoleElement { m, m_prime: mp, q: mp - m, value });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::AU_DIPOLE;

    #[test]
    fn defaults() {
        let t = cesium_d2_default();
        assert_eq!((t.ground_count(), t.excited_count()), (9, 11));
        assert!((t.omega0 - 2.0 * PI * C / 852e-9).abs() < 1e-6);
        assert_eq!(t.reduced_dipole_j, 5.38e-29);
        // 6.347 a.u. quoted alongside; agreement to the quoted digits
        assert!((t.reduced_dipole_j / AU_DIPOLE - 6.347).abs() < 5e-3);
        assert!(HyperfineTransition::new(0.5, 1.5, 3.5, 4, 5, t.omega0, 5.38e-29).is_ok());
        assert!(HyperfineTransition::new(0.5, 1.5, 3.5, 4, 6, t.omega0, 5.38e-29).is_err());
    }

    #[test]
    fn selection_rules() {
        let t = cesium_d2_default();
        assert_eq!(dipole_component(&t, 0, 2).unwrap().value, 0.0);
        assert_eq!(dipole_component(&t, -3, -1).unwrap().value, 0.0);
        assert!(dipole_component(&t, 5, 0).is_err());
        let table = DipoleTable::new(&t).unwrap();
        // 9 ground levels x 3 polarizations, all inside the F'=5 manifold
        assert_eq!(table.nonzero().len(), 27);
    }

    #[test]
    fn sum_rules() {
        let t = cesium_d2_default();
        let d2 = reduced_dipole_f(&t).powi(2);
        let table = DipoleTable::new(&t).unwrap();
        let mut per_q = [0.0; 3];
        for e in table.nonzero() {
            per_q[(e.q + 1) as usize] += e.value * e.value;
        }
        for s in per_q {
            assert!((s - d2 / 3.0).abs() < 1e-12 * d2);
        }
        // brute-force total against 99 {6j}^2 <J'||D||J>^2
        let six = wigner_6j(4.0, 1.0, 5.0, 1.5, 3.5, 0.5).unwrap();
        let expect = 99.0 * six * six * t.reduced_dipole_j.powi(2);
        assert!((per_q.iter().sum::<f64>() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn reflection_symmetry() {
        let t = cesium_d2_default();
        let table = DipoleTable::new(&t).unwrap();
        for mp in -5..=5 {
            for m in -4..=4 {
                assert!((table.get(mp, m).abs() - table.get(-mp, -m).abs()).abs() < 1e-40);
            }
        }
    }

    #[test]
    fn stretched_transition() {
        // |d| for M=4 -> M'=5 equals D_FF' / sqrt(11)
        let t = cesium_d2_default();
        let d = dipole_component(&t, 4, 5).unwrap().value.abs();
        assert!((d - reduced_dipole_f(&t) / 11f64.sqrt()).abs() < 1e-12 * d);
    }

    #[test]
    fn forbidden_pair_has_zero_reduced_element() {
        let mut t = cesium_d2_default();
        t.f = 3;
        assert_eq!(reduced_dipole_f(&t), 0.0);
    }
}
