//! Special functions and numerical kernels used throughout the crate.

pub mod bessel;
pub mod quadrature;
pub mod roots;
pub mod wigner;

pub use bessel::{
    bessel_i, bessel_i_prime, bessel_j, bessel_j_prime, bessel_k, bessel_k_prime, bessel_y,
    bessel_y_prime, hankel, hankel_prime, JyTable,
};
pub use quadrature::{gauss_legendre, integrate, integrate_gl, QuadValue};
pub use roots::find_root;
pub use wigner::{wigner_3j, wigner_6j};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub root_rel_tol: f64,
    pub quad_rel_tol: f64,
    pub series_abs_tol: f64,
    pub m_truncation_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            root_rel_tol: 1e-12,
            quad_rel_tol: 1e-10,
            series_abs_tol: 1e-14,
            m_truncation_tol: 1e-6,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("root_rel_tol", self.root_rel_tol),
            ("quad_rel_tol", self.quad_rel_tol),
            ("series_abs_tol", self.series_abs_tol),
            ("m_truncation_tol", self.m_truncation_tol),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.root_rel_tol > 1e-8 {
            return Err(Error::Invalid(format!(
                "root_rel_tol must be <= 1e-8, got {}",
                self.root_rel_tol
            )));
        }
        Ok(())
    }
}
