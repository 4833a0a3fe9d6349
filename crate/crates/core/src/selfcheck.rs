//! Reference-value checks for the default cesium D2 / 250 nm nanofiber
//! setup, one per acceptance criterion. Shared by the `acceptance` test
//! target and the command-line `selfcheck` command.

use crate::array::{
    bragg_x_limit, bragg_y, channel_at, channel_matrix, channel_response, free_propagator,
    recurrence_step, respond, respond_circular, total_transfer_product, array_response, Lattice,
};
use crate::atoms::{cesium_d2_default, HyperfineTransition};
use crate::bandgap::{delta_flat_numeric, gap_report, infinite_array_reflection};
use crate::emission::{atom_site, AtomSite};
use crate::error::Result;
use crate::fiber::{eigen_residual, solve_mode, FiberSpec, ModeSolution};
use crate::numerics::{bessel_i, bessel_i_prime, bessel_k, bessel_k_prime, wigner_3j, JyTable, ToleranceConfig};
use crate::radiation::{gamma_free_space, RadiativeCache};
use crate::scattering::{
    closed_form_linear, optical_depth, optical_depth_circular, site_scattering_matrix, Channel,
    ModeBasis,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

const RADIUS: f64 = 250e-9;
const TWO_PI_GHZ: f64 = 2.0 * PI * 1e9;
const TWO_PI_MHZ: f64 = 2.0 * PI * 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} {}: {} ({:.2?})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed
        )
    }
}

/// Shared fiber, transition and mode; atom sites are built on demand.
pub struct Setup {
    pub transition: HyperfineTransition,
    pub fiber: FiberSpec,
    pub mode: ModeSolution,
    pub tol: ToleranceConfig,
    cache: RadiativeCache,
}

impl Setup {
    pub fn new() -> Result<Self> {
        let transition = cesium_d2_default();
        let fiber = FiberSpec::silica_in_vacuum(RADIUS, transition.wavelength())?;
        let mode = solve_mode(&fiber, transition.omega0)?;
        Ok(Self { transition, fiber, mode, tol: ToleranceConfig::default(), cache: RadiativeCache::new() })
    }

    pub fn site(&self, r: f64) -> Result<AtomSite> {
        atom_site(&self.mode, &self.transition, r, &self.tol, Some(&self.cache))
    }
}

/// Accumulates named sub-results into one verdict line.
struct Verdict {
    ok: bool,
    parts: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { ok: true, parts: Vec::new() }
    }

    fn check(&mut self, ok: bool, text: String) {
        self.ok &= ok;
        self.parts.push(if ok { text } else { format!("{text} <- out of tolerance") });
    }

    /// |value/target − 1| ≤ rel.
    fn rel(&mut self, label: &str, value: f64, target: f64, rel: f64) {
        let dev = value / target - 1.0;
        self.check(dev.abs() <= rel, format!("{label}={value:.4} (target {target} ±{:.0}%)", rel * 100.0));
    }

    fn below(&mut self, label: &str, value: f64, limit: f64) {
        self.check(value < limit, format!("{label}={value:.3e} (< {limit:.0e})"));
    }
}

fn finish(id: u8, name: &'static str, start: Instant, v: Result<Verdict>) -> CheckOutcome {
    match v {
        Ok(v) => CheckOutcome { id, name, passed: v.ok, detail: v.parts.join("; "), elapsed: start.elapsed() },
        Err(e) => CheckOutcome { id, name, passed: false, detail: format!("error: {e}"), elapsed: start.elapsed() },
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "mode solver"),
    (2, "optical depth per atom"),
    (3, "single-atom reflectivity"),
    (4, "x-channel Bragg asymptote"),
    (5, "y-channel Bragg reflection"),
    (6, "large-N guided power"),
    (7, "band-gap edges and thresholds"),
    (8, "central plateau half-width"),
    (9, "group delay in the gaps"),
    (10, "property suite"),
];

pub fn run_one(setup: &Setup, id: u8) -> CheckOutcome {
    let start = Instant::now();
    let name = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("unknown");
    let v = match id {
        1 => mode_solver(setup),
        2 => optical_depths(setup),
        3 => single_atom(setup),
        4 => x_asymptote(setup),
        5 => y_bragg(setup),
        6 => power_limits(setup),
        7 => gap_edges(setup),
        8 => plateau(setup),
        9 => delays(setup),
        10 => properties(setup),
        _ => Err(crate::Error::Invalid(format!("no criterion {id}"))),
    };
    finish(id, name, start, v)
}

pub fn run_all(setup: &Setup) -> Vec<CheckOutcome> {
    CRITERIA.iter().map(|c| run_one(setup, c.0)).collect()
}

fn mode_solver(s: &Setup) -> Result<Verdict> {
    let start = Instant::now();
    let mode = solve_mode(&s.fiber, s.transition.omega0)?;
    let took = start.elapsed();
    let mut v = Verdict::new();
    let res = eigen_residual(&s.fiber, mode.k, mode.beta).abs();
    v.below("residual", res, 1e-10);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 1..=400 {
        let r = RADIUS * (1.0 + 1e-6 + 19.0 * (i as f64 / 400.0).powi(2));
        let p = mode.profile(r)?;
        let ratio = p.e_r.norm() / p.e_z.norm();
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    v.check(lo > 1.75 && hi < 2.1, format!("|e_r|/|e_z| in [{lo:.4}, {hi:.4}] (inside (1.75, 2.1))"));
    v.check(took.as_secs_f64() < 1.0, format!("solve {took:.2?} (< 1 s)"));
    Ok(v)
}

fn optical_depths(s: &Setup) -> Result<Verdict> {
    let start = Instant::now();
    let site = s.site(1.8 * RADIUS)?;
    let mut v = Verdict::new();
    v.rel("D_circ", optical_depth_circular(&site, 0.0), 0.036, 0.15);
    v.rel("D_x", optical_depth(&site, Channel::X, 0.0), 0.053, 0.15);
    v.rel("D_y", optical_depth(&site, Channel::Y, 0.0), 0.019, 0.15);
    let took = start.elapsed();
    v.check(took.as_secs_f64() < 30.0, format!("{took:.2?} (< 30 s)"));
    Ok(v)
}

fn single_atom(s: &Setup) -> Result<Verdict> {
    let site = s.site(RADIUS)?;
    let mut v = Verdict::new();
    v.rel("|R|^2", channel_at(&site, Channel::X, 0.0)?.r.norm_sqr(), 0.009, 0.20);
    Ok(v)
}

fn bragg_setup(s: &Setup) -> Result<(AtomSite, Lattice)> {
    let site = s.site(RADIUS + 200e-9)?;
    let lattice = Lattice::bragg(&site, 2, 0.0)?;
    Ok((site, lattice))
}

fn x_asymptote(s: &Setup) -> Result<Verdict> {
    let (site, lat) = bragg_setup(s)?;
    let mut v = Verdict::new();
    v.check(
        (lat.period - 745e-9).abs() < 1e-9,
        format!("period {:.2} nm", lat.period * 1e9),
    );
    let r_inf = infinite_array_reflection(&site, Channel::X, &lat, 0.0)?.norm_sqr();
    v.rel("|R_inf|^2", r_inf, 0.087, 0.10);
    let closed = bragg_x_limit(&site).powi(2);
    let numeric = respond(&site, Channel::X, &lat, 0.0, 150_000)?.reflectivity;
    let diff = (closed - numeric).abs();
    v.check(
        diff <= 1e-3,
        format!("profile-ratio limit {closed:.5} vs N=150000 {numeric:.5}, |diff|={diff:.2e} (<= 1e-3)"),
    );
    Ok(v)
}

fn y_bragg(s: &Setup) -> Result<Verdict> {
    let (site, lat) = bragg_setup(s)?;
    let mut v = Verdict::new();
    let far = bragg_y(&site, 0.0, lat.order, 1_000_000).r_n;
    v.below("|R_N(1e6) + 1|", (far + 1.0).norm(), 1e-3);
    v.check(
        bragg_y(&site, 0.0, lat.order, 800).reflectivity > 0.78,
        format!("|R_800|^2={:.4} (> 0.78)", bragg_y(&site, 0.0, lat.order, 800).reflectivity),
    );
    let ch = channel_at(&site, Channel::Y, 0.0)?;
    let (order, phi) = lat.phase(&site, 0.0);
    let (m, f) = (channel_matrix(&ch), free_propagator(order, phi));
    let mut worst = 0.0f64;
    for n in [1u64, 10, 100, 1600] {
        let rational = bragg_y(&site, 0.0, order, n);
        let product = array_response(&total_transfer_product(&m, &f, n)?);
        worst = worst.max((rational.r_n - product.r_n).norm()).max((rational.t_n - product.t_n).norm());
    }
    v.below("rational vs matrix", worst, 1e-10);
    Ok(v)
}

fn power_limits(s: &Setup) -> Result<Verdict> {
    let (site, lat) = bragg_setup(s)?;
    let c = respond_circular(&site, &lat, 0.0, 1_000_000)?;
    let mut v = Verdict::new();
    v.rel("P_circ", c.p_tot, 0.543, 0.02);
    v.rel("P_x", c.x.p_tot, 0.087, 0.02);
    v.rel("P_y", c.y.p_tot, 1.0, 0.02);
    v.below("|P_circ - (P_x+P_y)/2|", (c.p_tot - 0.5 * (c.x.p_tot + c.y.p_tot)).abs(), 1e-12);
    Ok(v)
}

fn gap_edges(s: &Setup) -> Result<Verdict> {
    let (site, lat) = bragg_setup(s)?;
    let x = gap_report(&site, Channel::X, &lat)?;
    let y = gap_report(&site, Channel::Y, &lat)?;
    let mut v = Verdict::new();
    v.rel("x Dmin/2pi GHz", x.delta_min.unwrap_or(f64::NAN) / TWO_PI_GHZ, 1.19, 0.05);
    v.rel("x Dmax/2pi GHz", x.delta_max / TWO_PI_GHZ, 2.16, 0.05);
    v.rel("y Dmax/2pi GHz", y.delta_max / TWO_PI_GHZ, 1.46, 0.05);
    v.rel("x N_gap", x.closed.n_gap, 43_000.0, 0.10);
    v.rel("y N_gap", y.closed.n_gap, 33_000.0, 0.10);
    Ok(v)
}

fn plateau(s: &Setup) -> Result<Verdict> {
    let (site, lat) = bragg_setup(s)?;
    let measured = delta_flat_numeric(&site, &lat, 150_000, 0.01, TWO_PI_GHZ)?;
    let mut v = Verdict::new();
    v.rel("delta_flat/2pi MHz", measured / TWO_PI_MHZ, 111.0, 0.25);
    Ok(v)
}

fn delays(s: &Setup) -> Result<Verdict> {
    let (site, lat) = bragg_setup(s)?;
    let mut v = Verdict::new();
    v.rel("tau_x ns", gap_report(&site, Channel::X, &lat)?.tau_delay * 1e9, 0.5, 0.30);
    v.rel("tau_y ns", gap_report(&site, Channel::Y, &lat)?.tau_delay * 1e9, 0.3, 0.30);
    Ok(v)
}

fn properties(s: &Setup) -> Result<Verdict> {
    let start = Instant::now();
    let site = s.site(RADIUS + 200e-9)?;
    let g = site.gamma();
    let mut v = Verdict::new();
    let detunings: Vec<f64> = (-20..=20).map(|k| 0.5 * g * k as f64).collect();

    let mut det_err = 0.0f64;
    let mut ty_err = 0.0f64;
    let mut cross = 0.0f64;
    let mut closed_err = 0.0f64;
    for &d in &detunings {
        for xi in [Channel::X, Channel::Y] {
            det_err = det_err.max((channel_at(&site, xi, d)?.det() - 1.0).norm());
        }
        let y = channel_at(&site, Channel::Y, d)?;
        ty_err = ty_err.max((y.t - (y.r + 1.0)).norm());
        let full = site_scattering_matrix(&s.mode, &s.transition, &site, ModeBasis::Linear, d)?;
        for i in 0..4 {
            for j in 0..4 {
                if i % 2 != j % 2 {
                    cross = cross.max(full.get(i, j).norm());
                }
            }
        }
        let closed = closed_form_linear(&site, d);
        for i in 0..4 {
            for j in 0..4 {
                closed_err = closed_err.max((full.get(i, j) - closed.get(i, j)).norm());
            }
        }
    }
    v.below("|det M - 1|", det_err, 1e-12);
    v.below("|S_fx,f'y|", cross, 1e-12);
    v.below("|T - (1+R)| (y)", ty_err, 1e-12);
    v.below("sublevel sum vs closed form", closed_err, 1e-12);

    // closed-form power of the transfer matrix vs repeated products
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut prod_err = 0.0f64;
    for _ in 0..100 {
        let xi = if rng.random_bool(0.5) { Channel::X } else { Channel::Y };
        let d = rng.random_range(-10.0..10.0) * g;
        let order = rng.random_range(1..=3i64);
        let phi = rng.random_range(-0.5..0.5);
        let n = rng.random_range(1..=2000u64);
        let ch = channel_at(&site, xi, d)?;
        let closed = channel_response(&ch, order, phi, n)?;
        let product = array_response(&total_transfer_product(&channel_matrix(&ch), &free_propagator(order, phi), n)?);
        prod_err = prod_err.max((closed.r_n - product.r_n).norm()).max((closed.t_n - product.t_n).norm());
    }
    v.below("closed vs product (100 draws)", prod_err, 1e-9);

    let lat = Lattice::bragg(&site, 2, 0.0)?;
    let mut rec_err = 0.0f64;
    let mut passive = 0.0f64;
    for &d in detunings.iter().step_by(4) {
        for xi in [Channel::X, Channel::Y] {
            let ch = channel_at(&site, xi, d)?;
            let bl = lat.beta_lambda(&site, d);
            let (mut r_n, mut t_n) = (ch.r, ch.t);
            for n in 2..=300u64 {
                (r_n, t_n) = recurrence_step(r_n, t_n, ch.r, ch.t, bl);
                if n % 50 == 0 {
                    let c = respond(&site, xi, &lat, d, n)?;
                    rec_err = rec_err.max((c.r_n - r_n).norm()).max((c.t_n - t_n).norm());
                }
            }
            for n in [1u64, 7, 100, 5_000, 150_000, 1_000_000] {
                passive = passive.max(respond(&site, xi, &lat, d, n)?.p_tot);
            }
        }
    }
    v.below("recurrence vs closed form", rec_err, 1e-10);
    v.check(passive <= 1.0 + 1e-12, format!("max |R_N|^2+|T_N|^2={passive:.12} (<= 1)"));

    let far = s.site(10.0 * RADIUS)?;
    let ratio = far.rates.gamma_rad / free_space_rate_oracle(&s.transition);
    v.check((ratio - 1.0).abs() <= 0.02, format!("gamma_rad/gamma_0 at r/a=10 = {ratio:.5} (±2%)"));
    let internal = (gamma_free_space(&s.transition) / free_space_rate_oracle(&s.transition) - 1.0).abs();
    v.below("free-space rate vs oracle", internal, 1e-12);

    v.below("3j orthogonality", wigner_orthogonality_error()?, 1e-10);
    v.below("Wronskians", wronskian_error()?, 1e-12);
    let took = start.elapsed();
    v.check(took.as_secs_f64() < 120.0, format!("{took:.2?} (< 2 min)"));
    Ok(v)
}

/// Weisskopf–Wigner rate from the D2 line strength: ω³|⟨J‖d‖J′⟩|²/(3πε₀ħc³(2J′+1)).
fn free_space_rate_oracle(t: &HyperfineTransition) -> f64 {
    use crate::constants::{C, EPS0, HBAR};
    t.omega0.powi(3) * t.reduced_dipole_j.powi(2)
        / (3.0 * PI * EPS0 * HBAR * C.powi(3) * (2.0 * t.j_prime + 1.0))
}

/// max over cases of |Σ_{m1,m2} (2j₃+1)(j₁ j₂ j₃; m₁ m₂ m₃)(j₁ j₂ j₃′; m₁ m₂ m₃′) − δδ|.
fn wigner_orthogonality_error() -> Result<f64> {
    let mut worst = 0.0f64;
    for (j1, j2) in [(1.0, 1.0), (1.5, 1.0), (3.0, 1.0), (4.0, 3.0), (2.5, 3.5)] {
        let lo = f64::abs(j1 - j2);
        let mut j3 = lo;
        while j3 <= j1 + j2 + 1e-9 {
            let mut j3p = lo;
            while j3p <= j1 + j2 + 1e-9 {
                let mut m3 = -j3;
                while m3 <= j3 + 1e-9 {
                    let mut sum = 0.0;
                    let mut m1 = -j1;
                    while m1 <= j1 + 1e-9 {
                        let m2 = -m3 - m1;
                        if m2.abs() <= j2 + 1e-9 {
                            sum += (2.0 * j3 + 1.0)
                                * wigner_3j(j1, j2, j3, m1, m2, m3)?
                                * wigner_3j(j1, j2, j3p, m1, m2, m3)?;
                        }
                        m1 += 1.0;
                    }
                    let expect = if (j3 - j3p).abs() < 1e-9 { 1.0 } else { 0.0 };
                    worst = worst.max((sum - expect).abs());
                    m3 += 1.0;
                }
                j3p += 1.0;
            }
            j3 += 1.0;
        }
    }
    Ok(worst)
}

/// Relative deviation of J/Y and I/K Wronskians from 2/(πx) and −1/x.
fn wronskian_error() -> Result<f64> {
    let mut worst = 0.0f64;
    let mut x = 0.1;
    while x <= 50.0 {
        let t = JyTable::new(12, x)?;
        for n in 0..12 {
            let w = t.j(n) * t.y_prime(n) - t.j_prime(n) * t.y(n);
            worst = worst.max((w * PI * x / 2.0 - 1.0).abs());
        }
        for n in 0..5u32 {
            let w = bessel_i(n, x)? * bessel_k_prime(n, x)? - bessel_i_prime(n, x)? * bessel_k(n, x)?;
            worst = worst.max((w * x + 1.0).abs());
        }
        x *= 1.17;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_pieces_are_tight() {
        assert!(wigner_orthogonality_error().unwrap() < 1e-10);
        assert!(wronskian_error().unwrap() < 1e-12);
    }

    #[test]
    fn unknown_criterion_fails_cleanly() {
        let s = Setup::new().unwrap();
        let out = run_one(&s, 42);
        assert!(!out.passed && out.detail.starts_with("error"));
    }

    #[test]
    fn outcome_line_format() {
        let o = CheckOutcome { id: 3, name: "x", passed: true, detail: "ok".into(), elapsed: Duration::ZERO };
        assert!(o.to_string().starts_with("[PASS] criterion  3 x: ok"));
    }
}
