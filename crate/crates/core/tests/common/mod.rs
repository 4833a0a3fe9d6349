#![allow(dead_code)]

use fiberqed::emission::AtomSite;
use fiberqed::selfcheck::Setup;
use std::sync::OnceLock;

pub const A: f64 = 250e-9;

pub fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| Setup::new().unwrap())
}

/// Atom 200 nm from the surface.
pub fn site() -> &'static AtomSite {
    static S: OnceLock<AtomSite> = OnceLock::new();
    S.get_or_init(|| setup().site(A + 200e-9).unwrap())
}

pub fn site_at_surface() -> &'static AtomSite {
    static S: OnceLock<AtomSite> = OnceLock::new();
    S.get_or_init(|| setup().site(A).unwrap())
}

pub fn mhz(f: f64) -> f64 {
    2.0 * std::f64::consts::PI * 1e6 * f
}
