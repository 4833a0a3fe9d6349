//! CODATA 2018 constants in SI units.

pub const C: f64 = 299_792_458.0;
pub const EPS0: f64 = 8.854_187_812_8e-12;
pub const MU0: f64 = 1.256_637_062_12e-6;
pub const HBAR: f64 = 1.054_571_817e-34;
/// Atomic unit of electric dipole moment, C·m.
pub const AU_DIPOLE: f64 = 8.478_353_625_5e-30;
