//! Subcommand implementations. Each builds a [`ResultTable`] from a
//! validated scenario.

use crate::config::{CountSpec, PeriodSpec, Polarization, Resolved, ResolvedArray, ScenarioConfig};
use crate::table::{Cell, ResultTable};
use fiberqed::array::{combine_circular, respond, CircularResponse, Lattice};
use fiberqed::atoms::{cesium_d2_default, HyperfineTransition};
use fiberqed::bandgap::{
    bloch_theta, delta_flat_closed, delta_flat_numeric, gap_report, infinite_array_reflection,
};
use fiberqed::emission::{atom_site, AtomSite};
use fiberqed::fiber::{sellmeier_silica, solve_mode_with, FiberSpec, ModeSolution};
use fiberqed::radiation::{gamma_free_space, RadiativeCache};
use fiberqed::scattering::{optical_depth, optical_depth_circular, Channel};
use fiberqed::selfcheck::{self, CheckOutcome};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(crate::config::ConfigError),
    Compute(fiberqed::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Compute(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<fiberqed::Error> for CliError {
    fn from(e: fiberqed::Error) -> Self {
        CliError::Compute(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn config_err(field: &str, msg: &str) -> CliError {
    CliError::Config(crate::config::ConfigError::new(field, msg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    Lambda,
    Delta,
}

const TWO_PI_MHZ: f64 = 2.0 * PI * 1e6;

fn to_mhz(d: f64) -> f64 {
    d / TWO_PI_MHZ
}

pub struct Context {
    pub raw: ScenarioConfig,
    pub cfg: Resolved,
    pub transition: HyperfineTransition,
    pub fiber: FiberSpec,
    pub mode: ModeSolution,
    pub gamma0: f64,
    cache: RadiativeCache,
}

impl Context {
    pub fn new(raw: ScenarioConfig) -> Result<Self, CliError> {
        let cfg = raw.resolve()?;
        let transition = cesium_d2_default();
        let n1 = cfg.n1.unwrap_or_else(|| sellmeier_silica(transition.wavelength()));
        let fiber = FiberSpec::new(cfg.radius, n1, cfg.n2)?;
        let mode = solve_mode_with(&fiber, transition.omega0, &cfg.tolerances)?;
        let gamma0 = gamma_free_space(&transition);
        Ok(Self { raw, cfg, transition, fiber, mode, gamma0, cache: RadiativeCache::new() })
    }

    pub fn site(&self, r: f64) -> Result<AtomSite, CliError> {
        Ok(atom_site(&self.mode, &self.transition, r, &self.cfg.tolerances, Some(&self.cache))?)
    }

    fn sites(&self, rs: &[f64]) -> Result<Vec<AtomSite>, CliError> {
        rs.par_iter().map(|&r| self.site(r)).collect()
    }

    fn lattice(&self, site: &AtomSite, spec: PeriodSpec) -> Result<Lattice, CliError> {
        Ok(match spec {
            PeriodSpec::Period(p) => Lattice::from_period(site, p)?,
            PeriodSpec::Bragg { order, delta_lat } => Lattice::bragg(site, order, delta_lat)?,
        })
    }

    fn array(&self) -> Result<&ResolvedArray, CliError> {
        self.cfg.array.as_ref().ok_or_else(|| config_err("array", "this command needs an array section"))
    }

    fn channel(&self, command: &str) -> Result<Channel, CliError> {
        match self.cfg.polarization {
            Polarization::X => Ok(Channel::X),
            Polarization::Y => Ok(Channel::Y),
            _ => Err(config_err("field.polarization", &format!("{command} needs polarization \"x\" or \"y\""))),
        }
    }

    fn single_detuning(&self, what: &str) -> Result<f64, CliError> {
        if self.cfg.detuning_is_range {
            return Err(config_err("field.detuning_range_mhz", &format!("{what} needs a single field.detuning_mhz")));
        }
        Ok(self.cfg.detunings[0])
    }

    /// Parameters shared by every command; enough to rebuild each row.
    fn header(&self, t: &mut ResultTable, command: &str) {
        t.meta("tool", format!("fiberqed {}", fiberqed::VERSION));
        t.meta("command", command);
        t.meta("config", serde_json::to_string(&self.raw).unwrap_or_default());
        t.meta_num("fiber.n1_used", self.fiber.n1);
        t.meta_num("fiber.radius_m", self.fiber.radius);
        t.meta_num("atom.r_m", self.cfg.r);
        t.meta_num("transition.omega0_rad_s", self.transition.omega0);
        t.meta_num("transition.wavelength_m", self.transition.wavelength());
        t.meta_num("gamma0_rad_s", self.gamma0);
        t.meta_num("mode.beta_per_m", self.mode.beta);
        t.meta_num("mode.beta_over_k", self.mode.beta / self.mode.k);
        t.meta_num("mode.v_group_m_s", self.mode.v_group);
        t.meta_num("mode.v_phase_m_s", self.mode.v_phase);
        t.meta_num("mode.s", self.mode.s_param);
        t.meta_num("mode.norm_c", self.mode.norm_c);
        t.meta_num("mode.residual", self.mode.residual);
        let tol = &self.cfg.tolerances;
        t.meta(
            "tolerances",
            format!(
                "root_rel_tol={:e} quad_rel_tol={:e} series_abs_tol={:e} m_truncation_tol={:e}",
                tol.root_rel_tol, tol.quad_rel_tol, tol.series_abs_tol, tol.m_truncation_tol
            ),
        );
    }

    fn lattice_meta(&self, t: &mut ResultTable, lat: &Lattice) {
        t.meta_num("array.period_m", lat.period);
        t.meta("array.bragg_order", lat.order);
        t.meta_num("array.delta_lat_mhz", to_mhz(lat.delta_lat));
    }
}

pub fn cmd_mode(ctx: &Context) -> Result<ResultTable, CliError> {
    let a = ctx.cfg.radius;
    let grid = ctx
        .cfg
        .r_grid
        .clone()
        .unwrap_or_else(|| (0..=100).map(|i| a * 5.0 * i as f64 / 100.0).collect());
    let mut t = ResultTable::new(vec![
        "r_over_a", "side", "re_e_r", "im_e_r", "re_e_phi", "im_e_phi", "re_e_z", "im_e_z", "abs_er_over_ez",
    ]);
    ctx.header(&mut t, "mode");
    let mut rows: Vec<(f64, bool)> = grid.iter().filter(|&&r| r != a).map(|&r| (r, r > a)).collect();
    rows.push((a, false));
    rows.push((a, true));
    rows.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
    for (r, outside) in rows {
        let p = if outside || r > a { ctx.mode.profile(r)? } else { ctx.mode.profile_inside(r)? };
        let ratio = if p.e_z.norm() > 0.0 { p.e_r.norm() / p.e_z.norm() } else { f64::NAN };
        t.push(vec![
            Cell::Num(r / a),
            Cell::Text(if outside { "outside" } else { "inside" }),
            p.e_r.re.into(),
            p.e_r.im.into(),
            p.e_phi.re.into(),
            p.e_phi.im.into(),
            p.e_z.re.into(),
            p.e_z.im.into(),
            ratio.into(),
        ]);
    }
    Ok(t)
}

/// (r, δ) grid: radial grid if given, otherwise the configured position;
/// detunings from the field section.
fn r_delta_grid(ctx: &Context) -> (Vec<f64>, Vec<f64>) {
    let rs = ctx.cfg.r_grid.clone().unwrap_or_else(|| vec![ctx.cfg.r]);
    (rs, ctx.cfg.detunings.clone())
}

pub fn cmd_rates(ctx: &Context) -> Result<ResultTable, CliError> {
    let (rs, ds) = r_delta_grid(ctx);
    let sites = ctx.sites(&rs)?;
    let g0 = ctx.gamma0;
    let mut t = ResultTable::new(vec![
        "r_over_a",
        "detuning_mhz",
        "gamma_gyd_over_gamma0",
        "gamma_rad_over_gamma0",
        "gamma_over_gamma0",
        "gamma_s_over_gamma0",
        "gamma_1d_y_over_gamma0",
        "u0_er2_over_gamma0",
        "u0_ephi2_over_gamma0",
        "u0_ez2_over_gamma0",
        "d_circ",
        "d_x",
        "d_y",
    ]);
    ctx.header(&mut t, "rates");
    for s in &sites {
        let gyd = s.rates.gamma_gyd / g0;
        let rad = s.rates.gamma_rad / g0;
        let u = s.rates.u0 / g0;
        for &d in &ds {
            t.push(vec![
                Cell::Num(s.r / ctx.cfg.radius),
                Cell::Num(to_mhz(d)),
                gyd.into(),
                rad.into(),
                (gyd + rad).into(),
                (s.rates.gamma_s / g0).into(),
                (s.rates.gamma_1d_y / g0).into(),
                (u * s.e_r * s.e_r).into(),
                (u * s.e_phi * s.e_phi).into(),
                (u * s.e_z * s.e_z).into(),
                optical_depth_circular(s, d).into(),
                optical_depth(s, Channel::X, d).into(),
                optical_depth(s, Channel::Y, d).into(),
            ]);
        }
    }
    Ok(t)
}

pub fn cmd_single(ctx: &Context) -> Result<ResultTable, CliError> {
    let xi = ctx.channel("single")?;
    let (rs, ds) = r_delta_grid(ctx);
    let sites = ctx.sites(&rs)?;
    let mut t = ResultTable::new(vec![
        "r_over_a", "detuning_mhz", "re_r", "im_r", "re_t", "im_t", "reflectivity", "transmittivity",
    ]);
    ctx.header(&mut t, "single");
    t.meta("field.channel", xi.label());
    for s in &sites {
        for &d in &ds {
            let ch = fiberqed::array::channel_at(s, xi, d)?;
            t.push(vec![
                Cell::Num(s.r / ctx.cfg.radius),
                Cell::Num(to_mhz(d)),
                ch.r.re.into(),
                ch.r.im.into(),
                ch.t.re.into(),
                ch.t.im.into(),
                ch.r.norm_sqr().into(),
                ch.t.norm_sqr().into(),
            ]);
        }
    }
    Ok(t)
}

/// Guided output powers for one array configuration, in the input polarization's terms.
fn scan_row(site: &AtomSite, pol: Polarization, lat: &Lattice, d: f64, n: u64) -> Result<Vec<Cell>, CliError> {
    let cells = match pol {
        Polarization::X | Polarization::Y => {
            let xi = if pol == Polarization::X { Channel::X } else { Channel::Y };
            let r = respond(site, xi, lat, d, n)?;
            vec![
                r.r_n.re.into(),
                r.r_n.im.into(),
                r.t_n.re.into(),
                r.t_n.im.into(),
                r.reflectivity.into(),
                r.transmittivity.into(),
                r.p_tot.into(),
            ]
        }
        Polarization::CircPlus | Polarization::CircMinus => {
            let x = respond(site, Channel::X, lat, d, n)?;
            let y = respond(site, Channel::Y, lat, d, n)?;
            let c: CircularResponse = combine_circular(x, y);
            // index 0 is the input's own handedness for either sign of l
            vec![
                c.p_forward[0].into(),
                c.p_forward[1].into(),
                c.p_backward[0].into(),
                c.p_backward[1].into(),
                c.p_tot.into(),
            ]
        }
    };
    Ok(cells)
}

fn scan_columns(pol: Polarization) -> Vec<&'static str> {
    match pol {
        Polarization::X | Polarization::Y => {
            vec!["re_r_n", "im_r_n", "re_t_n", "im_t_n", "reflectivity", "transmittivity", "p_tot"]
        }
        Polarization::CircPlus => {
            vec!["p_forward_plus", "p_forward_minus", "p_backward_plus", "p_backward_minus", "p_tot"]
        }
        Polarization::CircMinus => {
            vec!["p_forward_minus", "p_forward_plus", "p_backward_minus", "p_backward_plus", "p_tot"]
        }
    }
}

fn single_count(arr: &ResolvedArray, what: &str) -> Result<u64, CliError> {
    match arr.count {
        CountSpec::One(n) => Ok(n),
        CountSpec::Range(_) => Err(config_err("array.n_range", &format!("{what} needs a single array.n"))),
    }
}

pub fn cmd_scan(ctx: &Context, axis: Axis) -> Result<ResultTable, CliError> {
    let arr = ctx.array()?;
    let site = ctx.site(ctx.cfg.r)?;
    let pol = ctx.cfg.polarization;
    let axis_col = match axis {
        Axis::N => "n",
        Axis::Lambda => "period_nm",
        Axis::Delta => "detuning_mhz",
    };
    let mut cols = vec![axis_col];
    cols.extend(scan_columns(pol));
    let mut t = ResultTable::new(cols);
    ctx.header(&mut t, "scan");
    t.meta("scan.axis", axis_col);
    let rows: Vec<Vec<Cell>> = match axis {
        Axis::N => {
            let d = ctx.single_detuning("scan --axis N")?;
            let lat = ctx.lattice(&site, arr.period)?;
            ctx.lattice_meta(&mut t, &lat);
            t.meta_num("field.detuning_mhz", to_mhz(d));
            arr.count
                .values()
                .par_iter()
                .map(|&n| {
                    let mut row = vec![Cell::Int(n)];
                    row.extend(scan_row(&site, pol, &lat, d, n)?);
                    Ok(row)
                })
                .collect::<Result<_, CliError>>()?
        }
        Axis::Lambda => {
            let d = ctx.single_detuning("scan --axis lambda")?;
            let n = single_count(arr, "scan --axis lambda")?;
            let grid = ctx
                .cfg
                .period_grid
                .clone()
                .ok_or_else(|| config_err("run.period_range_nm", "scan --axis lambda needs run.period_range_nm"))?;
            t.meta("array.n", n);
            t.meta_num("field.detuning_mhz", to_mhz(d));
            // configured period, for reference against the scanned axis
            let reference = ctx.lattice(&site, arr.period)?;
            ctx.lattice_meta(&mut t, &reference);
            grid.par_iter()
                .map(|&p| {
                    let lat = Lattice::from_period(&site, p)?;
                    let mut row = vec![Cell::Num(p * 1e9)];
                    row.extend(scan_row(&site, pol, &lat, d, n)?);
                    Ok(row)
                })
                .collect::<Result<_, CliError>>()?
        }
        Axis::Delta => {
            let n = single_count(arr, "scan --axis delta")?;
            let lat = ctx.lattice(&site, arr.period)?;
            ctx.lattice_meta(&mut t, &lat);
            t.meta("array.n", n);
            ctx.cfg
                .detunings
                .par_iter()
                .map(|&d| {
                    let mut row = vec![Cell::Num(to_mhz(d))];
                    row.extend(scan_row(&site, pol, &lat, d, n)?);
                    Ok(row)
                })
                .collect::<Result<_, CliError>>()?
        }
    };
    for row in rows {
        t.push(row);
    }
    Ok(t)
}

pub fn cmd_bandgap(ctx: &Context) -> Result<ResultTable, CliError> {
    let xi = ctx.channel("bandgap")?;
    let arr = ctx.array()?;
    let n = single_count(arr, "bandgap")?;
    let site = ctx.site(ctx.cfg.r)?;
    let lat = ctx.lattice(&site, arr.period)?;
    let rep = gap_report(&site, xi, &lat)?;
    let mut t = ResultTable::new(vec![
        "detuning_mhz",
        "reflectivity",
        "transmittivity",
        "r_inf_sq",
        "phase_r_inf",
        "re_theta",
        "im_theta",
        "re_theta_lossless",
        "in_gap",
    ]);
    ctx.header(&mut t, "bandgap");
    ctx.lattice_meta(&mut t, &lat);
    t.meta("field.channel", xi.label());
    t.meta("array.n", n);
    let c = &rep.closed;
    t.meta_num("gap.closed.delta_max_mhz", to_mhz(c.delta_max));
    if let Some(m) = c.delta_min {
        t.meta_num("gap.closed.delta_min_mhz", to_mhz(m));
    }
    t.meta_num("gap.closed.delta_gap_mhz", to_mhz(c.delta_gap));
    t.meta_num("gap.closed.n_gap", c.n_gap);
    t.meta_num("gap.closed.delta_mid_mhz", to_mhz(c.delta_mid));
    t.meta(
        "gap.closed.r_gap",
        format!("{:+.6}{:+.6}i, {:+.6}{:+.6}i", c.r_gap[0].re, c.r_gap[0].im, c.r_gap[1].re, c.r_gap[1].im),
    );
    t.meta_num("gap.closed.validity_ratio", c.validity_ratio);
    t.meta_num("gap.numeric.delta_max_mhz", to_mhz(rep.delta_max));
    if let Some(m) = rep.delta_min {
        t.meta_num("gap.numeric.delta_min_mhz", to_mhz(m));
    }
    t.meta_num("gap.numeric.delta_gap_mhz", to_mhz(rep.delta_gap));
    let intervals: Vec<String> =
        rep.gaps.iter().map(|g| format!("[{:.6}, {:.6}]", to_mhz(g.lo), to_mhz(g.hi))).collect();
    t.meta("gap.numeric.intervals_mhz", intervals.join(" "));
    t.meta(
        "gap.numeric.r_inf_at_mid",
        format!("{:+.6}{:+.6}i, {:+.6}{:+.6}i", rep.r_gap[0].re, rep.r_gap[0].im, rep.r_gap[1].re, rep.r_gap[1].im),
    );
    t.meta_num("gap.tau_delay_ns", rep.tau_delay * 1e9);
    if xi == Channel::X {
        t.meta_num("plateau.delta_flat_closed_mhz", to_mhz(delta_flat_closed(&site, n)));
        match delta_flat_numeric(&site, &lat, n, 0.01, 2.0 * PI * 1e9) {
            Ok(v) => t.meta_num("plateau.delta_flat_numeric_mhz", to_mhz(v)),
            Err(e) => t.meta("plateau.delta_flat_numeric_mhz", format!("unavailable ({e})")),
        }
    }
    let ds = if ctx.cfg.detuning_is_range {
        ctx.cfg.detunings.clone()
    } else {
        let half = 1.5 * c.delta_max;
        (0..=600).map(|i| rep.omega_c_offset - half + 2.0 * half * i as f64 / 600.0).collect()
    };
    let rows: Vec<Vec<Cell>> = ds
        .par_iter()
        .map(|&d| {
            let r = respond(&site, xi, &lat, d, n)?;
            let r_inf = infinite_array_reflection(&site, xi, &lat, d)?;
            let theta = bloch_theta(&site, xi, &lat, d, false)?.theta;
            let lossless = bloch_theta(&site, xi, &lat, d, true)?;
            let in_gap = u64::from(lossless.cosh_minus_one.re > 0.0);
            Ok(vec![
                Cell::Num(to_mhz(d)),
                r.reflectivity.into(),
                r.transmittivity.into(),
                r_inf.norm_sqr().into(),
                r_inf.arg().into(),
                theta.re.into(),
                theta.im.into(),
                lossless.theta.re.into(),
                Cell::Int(in_gap),
            ])
        })
        .collect::<Result<_, CliError>>()?;
    for row in rows {
        t.push(row);
    }
    Ok(t)
}

pub fn cmd_selfcheck() -> Result<Vec<CheckOutcome>, CliError> {
    let setup = selfcheck::Setup::new()?;
    Ok(selfcheck::run_all(&setup))
}
