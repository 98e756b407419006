//! One function per command; each returns an `Outcome` without touching the disk.

use chiral_array::atomdata::{self, RydbergState};
use chiral_array::chiral::{
    chain_scatter, ns_gate_circuit, optimize_sorting, sorting_metrics, sorting_pulse, EmitterChain, SortingResult,
};
use chiral_array::coupling::{collective_parameters, coupling_matrix, Collective, CouplingMatrix};
use chiral_array::interferometer::{
    beta_opt, effective_emitter_fit, effective_emitter_fit_amplitude, emitter_transmission, two_sided_amplitudes,
    WaveguideFit,
};
use chiral_array::lattice::{bragg_threshold_angle, build_array, gaussian_mode, validate_bragg, ArrayGeometry, Direction, ModeVector};
use chiral_array::protocols::{calibrate_pi_area, eit_retrieval, ControlRamp};
use chiral_array::pulse::{bound_state_decay_rate, overlap_infidelity, propagate_weak_pulse, PulseSpec};
use chiral_array::steady_state::{
    at_resonances, default_grid, locate_peaks, raman_resonance, reduce_two_level, ArrayResponse, DriveParams,
    EffectiveParams,
};
use chiral_array::two_photon::{g2_all, pair_steady_state, pair_steady_state_3level, InteractionModel, MAX_ATOMS_3LEVEL};
use chiral_array::C64;

use crate::config::{Command, InteractionKind, Level, RunConfig};
use crate::error::CliError;
use crate::output::{Cell, Outcome, Summary, Table};

/// Largest array handed to the two-excitation solvers.
pub const MAX_ATOMS_PAIRS: usize = 441;

/// Geometry, couplings, mode and drive shared by the array commands.
pub struct Setup {
    pub geom: ArrayGeometry,
    pub coupling: CouplingMatrix,
    pub mode: ModeVector,
    pub collective: Collective,
    pub state: RydbergState,
    pub drive: DriveParams,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let g = &cfg.geometry;
        let geom = build_array(g.nside, g.a, g.shape)?;
        let coupling = coupling_matrix(&geom, g.polarization.vector())?;
        let mode = gaussian_mode(&geom, cfg.mode.w0, cfg.mode.theta_deg.to_radians(), Direction::Forward)?;
        let collective = collective_parameters(&geom, &coupling, &mode)?;
        let table = match &cfg.atom_table {
            Some(p) => atomdata::load_states(p)?,
            None => atomdata::bundled(),
        };
        let state = table.interpolate_state(cfg.drive.n)?;
        let d = &cfg.drive;
        let delta_c = collective.mode_weighted.delta_c;
        let delta_e = d.delta_e.unwrap_or_else(|| raman_resonance(d.delta_r, delta_c, d.omega));
        let mut drive = DriveParams::new(delta_e, d.delta_r, d.omega, d.gamma.unwrap_or(state.gamma));
        drive.omega_p = d.omega_p;
        drive.validate()?;
        Ok(Setup { geom, coupling, mode, collective, state, drive })
    }

    pub fn effective(&self) -> Result<EffectiveParams, CliError> {
        Ok(reduce_two_level(&self.drive, &self.coupling)?)
    }

    pub fn interaction(&self, cfg: &RunConfig) -> InteractionModel {
        match cfg.interaction.kind {
            InteractionKind::Vdw => InteractionModel::Vdw { c6: cfg.interaction.c6.unwrap_or(self.state.c6) },
            InteractionKind::HardBlockade => InteractionModel::HardBlockade { r_b: cfg.interaction.r_b.unwrap_or(0.0) },
            InteractionKind::None => InteractionModel::None,
        }
    }

    fn describe(&self, s: &mut Summary) {
        s.int("atoms", self.geom.len() as i64);
        s.num("delta_c", self.collective.mode_weighted.delta_c);
        s.num("gamma_c", self.collective.mode_weighted.gamma_c);
        s.num("delta_c_lattice", self.collective.lattice_sum.delta_c);
        s.num("gamma_c_lattice", self.collective.lattice_sum.gamma_c);
        s.num("delta_e", self.drive.delta_e);
        s.num("gamma", self.drive.gamma);
    }
}

fn cap(n: usize, limit: usize, what: &str) -> Result<(), CliError> {
    if n > limit {
        return Err(chiral_array::Error::ResourceCap(format!("{what} with N = {n} exceeds the cap N ≤ {limit}")).into());
    }
    Ok(())
}

fn describe_effective(eff: &EffectiveParams, mode: &ModeVector, s: &mut Summary) {
    let cb = eff.collective_mode(mode);
    s.num("delta_bar", eff.delta_bar);
    s.num("delta_bar_c", cb.delta_c);
    s.num("gamma_bar_c", cb.gamma_c);
    s.num("eps_ratio", eff.eps_ratio(mode));
}

pub fn run_command(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = match cfg.command {
        Command::Spectrum => spectrum(cfg),
        Command::G2 => g2(cfg),
        Command::ChiralFit => chiral_fit(cfg),
        Command::Pulse => pulse(cfg),
        Command::StoreRetrieve => store_retrieve(cfg),
        Command::Sort => sort(cfg),
        Command::NsGate => ns_gate(cfg),
        Command::Sweep => Err(CliError::Config("command: sweep is dispatched by the sweep runner".into())),
    }?;
    out.summary.0.insert(0, ("command".into(), cfg.command.name().into()));
    Ok(out)
}

fn spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let st = Setup::new(cfg)?;
    let cp = st.collective.mode_weighted;
    let d = st.drive;
    let grid = match &cfg.spectrum.grid {
        Some(g) => g.values(),
        None => default_grid(&d, cp.delta_c, cp.gamma_c),
    };
    let resp = ArrayResponse::new(&st.coupling, &st.mode)?;
    let three = resp.spectrum_3level(&d, &grid)?;
    let two = resp.spectrum_2level_tracking(&d, &grid)?;
    let mut t = Table::new(&["delta_e", "delta_bar", "R3", "T3", "L3", "R2", "T2", "L2"]);
    for i in 0..grid.len() {
        let x = grid[i];
        let db = if x != 0.0 { x + d.delta_r - d.omega * d.omega / x } else { f64::NAN };
        t.push_nums(&[x, db, three.r[i], three.t[i], three.l[i], two.r[i], two.t[i], two.l[i]]);
    }
    let mut s = Summary::default();
    st.describe(&mut s);
    let (ap, am) = at_resonances(d.delta_r, cp.delta_c, d.omega);
    s.num("at_plus", ap);
    s.num("at_minus", am);
    let peaks = locate_peaks(|x| Ok(resp.reflection_3level(&d.with_delta_e(x))?.norm_sqr()), &grid)?;
    let mut pt = Table::new(&["position", "height", "fwhm", "closed_form"]);
    for p in &peaks {
        let cf = if (p.position - ap).abs() < (p.position - am).abs() { ap } else { am };
        pt.push_nums(&[p.position, p.height, p.fwhm, cf]);
    }
    s.int("peaks", peaks.len() as i64);
    Ok(Outcome { summary: s, tables: vec![("spectrum.csv".into(), t), ("peaks.csv".into(), pt)], ..Default::default() })
}

fn g2(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let st = Setup::new(cfg)?;
    let n = st.geom.len();
    match cfg.g2.level {
        Level::Two => cap(n, MAX_ATOMS_PAIRS, "two-excitation solve")?,
        Level::Three => cap(n, MAX_ATOMS_3LEVEL, "three-level two-excitation solve")?,
    }
    let inter = st.interaction(cfg);
    let at = |delta_e: f64| -> Result<(f64, (f64, f64, f64)), CliError> {
        let drive = st.drive.with_delta_e(delta_e);
        let eff = reduce_two_level(&drive, &st.coupling)?;
        let pair = match cfg.g2.level {
            Level::Two => pair_steady_state(&st.geom, &eff, &st.mode, &inter, drive.omega_p)?,
            Level::Three => pair_steady_state_3level(&st.geom, &st.coupling, &drive, &st.mode, &inter, drive.omega_p)?,
        };
        Ok((eff.delta_bar, g2_all(&pair)?))
    };
    let mut s = Summary::default();
    st.describe(&mut s);
    let eff = st.effective()?;
    describe_effective(&eff, &st.mode, &mut s);
    let (_, (bb, ff, bf)) = at(st.drive.delta_e)?;
    s.num("g2_bb", bb);
    s.num("g2_ff", ff);
    s.num("g2_bf", bf);
    let mut t = Table::new(&["delta_e", "delta_bar", "g2_bb", "g2_ff", "g2_bf"]);
    t.push_nums(&[st.drive.delta_e, eff.delta_bar, bb, ff, bf]);
    for &x in &cfg.g2.delta_e {
        let (db, (bb, ff, bf)) = at(x)?;
        t.push_nums(&[x, db, bb, ff, bf]);
    }
    Ok(Outcome { summary: s, tables: vec![("g2.csv".into(), t)], ..Default::default() })
}

fn fit_summary(s: &mut Summary, prefix: &str, f: &WaveguideFit) {
    s.num(&format!("{prefix}_gamma_tilde"), f.gamma_tilde);
    s.num(&format!("{prefix}_Gamma_tilde"), f.big_gamma_tilde);
    s.num(&format!("{prefix}_beta"), f.beta);
    s.num(&format!("{prefix}_center"), f.center);
    s.num(&format!("{prefix}_residual"), f.residual);
}

/// Two-sided amplitudes on ±span linewidths and both lineshape fits.
pub struct ChiralFit {
    pub samples: Vec<(f64, C64)>,
    pub intensity: WaveguideFit,
    pub amplitude: WaveguideFit,
    pub gamma_bar_c: f64,
    pub delta_bar_c: f64,
}

pub fn fit_array(st: &Setup, eff: &EffectiveParams, span: f64, points: usize) -> Result<ChiralFit, CliError> {
    let cb = eff.collective_mode(&st.mode);
    let w = cb.gamma_c + eff.gamma();
    let grid: Vec<f64> = (0..points).map(|k| -span * w + 2.0 * span * w * k as f64 / (points - 1) as f64).collect();
    let samples = two_sided_amplitudes(&st.coupling, eff, &st.mode, &st.mode, &grid)?;
    let t: Vec<(f64, f64)> = samples.iter().map(|(d, a)| (*d, a.norm_sqr())).collect();
    let intensity = effective_emitter_fit(&t)?;
    let amplitude = effective_emitter_fit_amplitude(&samples)?;
    Ok(ChiralFit { samples, intensity, amplitude, gamma_bar_c: cb.gamma_c, delta_bar_c: cb.delta_c })
}

fn chiral_fit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let st = Setup::new(cfg)?;
    let eff = st.effective()?;
    let fit = fit_array(&st, &eff, cfg.fit.span, cfg.fit.points)?;
    let mut s = Summary::default();
    st.describe(&mut s);
    describe_effective(&eff, &st.mode, &mut s);
    s.num("beta_opt", beta_opt(fit.gamma_bar_c, eff.gamma()));
    fit_summary(&mut s, "fit_T", &fit.intensity);
    fit_summary(&mut s, "fit_amp", &fit.amplitude);
    let theta = cfg.mode.theta_deg.to_radians();
    let bragg = validate_bragg(cfg.geometry.a, theta);
    s.text("bragg_ok", bragg.ok.to_string());
    s.num("bragg_margin", bragg.margin);
    s.num("bragg_threshold_deg", bragg_threshold_angle(cfg.geometry.a).map_or(f64::NAN, f64::to_degrees));
    let (fi, fa) = (&fit.intensity, &fit.amplitude);
    let mut t = Table::new(&["delta", "T", "re_t", "im_t", "T_fit", "T_amp_fit"]);
    for (d, a) in &fit.samples {
        t.push_nums(&[
            *d,
            a.norm_sqr(),
            a.re,
            a.im,
            emitter_transmission(d - fi.center, fi.gamma_tilde, fi.big_gamma_tilde),
            emitter_transmission(d - fa.center, fa.gamma_tilde, fa.big_gamma_tilde),
        ]);
    }
    Ok(Outcome { summary: s, tables: vec![("transmission.csv".into(), t)], warnings: eff.warnings.clone(), ..Default::default() })
}

fn pulse(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let st = Setup::new(cfg)?;
    let inter = st.interaction(cfg);
    if inter != InteractionModel::None {
        cap(st.geom.len(), MAX_ATOMS_PAIRS, "two-photon pulse propagation")?;
    }
    let eff = st.effective()?;
    let fit = fit_array(&st, &eff, cfg.fit.span, cfg.fit.points)?;
    let pc = &cfg.pulse;
    let gt = fit.amplitude.big_gamma_tilde;
    let tau = pc.gamma_tau / gt;
    let dt = tau.min(1.0 / fit.gamma_bar_c) / pc.samples;
    let mut spec = PulseSpec::gaussian(tau, dt, 6.0 * tau + pc.tail / gt).with_delta0(pc.delta0);
    spec.a_in = pc.a_in;
    // carrier on the collective resonance δ = Δ̄ + Δ̄c = 0
    let eff0 = eff.with_delta_bar(-fit.delta_bar_c);
    let grid = propagate_weak_pulse(&st.geom, &eff0, &st.mode, &inter, &spec)?;
    let mut s = Summary::default();
    st.describe(&mut s);
    describe_effective(&eff, &st.mode, &mut s);
    fit_summary(&mut s, "fit_amp", &fit.amplitude);
    s.num("tau", tau);
    s.num("dt", dt);
    s.int("samples", grid.nt() as i64);
    s.num("P1", grid.p1());
    s.num("P2", grid.p2());
    let win = (1.0 / gt, 6.0 / gt);
    let rate = if inter != InteractionModel::None { bound_state_decay_rate(&grid, 0.0, win).ok() } else { None };
    s.num("bound_decay_rate", rate.unwrap_or(f64::NAN));
    let mut chain = EmitterChain::new(1, fit.amplitude.big_gamma_tilde, fit.amplitude.gamma_tilde);
    chain.detuning = -fit.amplitude.center;
    let reference = if pc.compare { Some(chain_scatter(&chain, &spec)?) } else { None };
    if let Some(r) = &reference {
        let (i1, i2) = overlap_infidelity(&grid, r)?;
        s.num("I1", i1);
        s.num("I2", i2);
        s.num("ref_P1", r.p1());
        s.num("ref_P2", r.p2());
        s.num("ref_bound_decay_rate", bound_state_decay_rate(r, 0.0, win).unwrap_or(f64::NAN));
    }
    let mut t = Table::new(&["t", "input", "re_psi", "im_psi", "re_ref", "im_ref"]);
    for (k, time) in grid.times().into_iter().enumerate() {
        let p = grid.psi[k];
        let r = reference.as_ref().map_or(C64::new(f64::NAN, f64::NAN), |g| g.psi[k]);
        t.push_nums(&[time, grid.input[k].re, p.re, p.im, r.re, r.im]);
    }
    let mut blobs = Vec::new();
    if pc.write_psi2 {
        let mut b = Vec::new();
        grid.write_psi2(&mut b)?;
        blobs.push(("psi2.bin".to_string(), b));
    }
    Ok(Outcome { summary: s, tables: vec![("psi.csv".into(), t)], blobs, warnings: eff.warnings.clone() })
}

fn store_retrieve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let st = Setup::new(cfg)?;
    let eff = st.effective()?;
    let sc = &cfg.storage;
    let (a_in, run) = calibrate_pi_area(&eff, &st.mode, sc.tau)?;
    let cp = st.collective.mode_weighted;
    let mut ramp = ControlRamp::standard(cp.delta_c, cp.gamma_c);
    ramp.omega_max = sc.omega_max;
    ramp.t_r = sc.ramp / cp.gamma_c;
    let stored = run.state.normalized()?;
    let ret = eit_retrieval(&stored, &st.coupling, &ramp, &st.mode, st.drive.gamma, sc.t_max)?;
    let mut s = Summary::default();
    st.describe(&mut s);
    describe_effective(&eff, &st.mode, &mut s);
    s.num("a_in", a_in);
    s.num("P_u", run.state.p_u);
    s.num("one_minus_P_u", 1.0 - run.state.p_u);
    s.num("P_u_abs", run.state.p_u_abs);
    s.num("stored_norm", run.state.norm_sqr());
    s.num("eta", ret.eta);
    s.num("residual", ret.residual);
    let mut ts = Table::new(&["t", "P_u_abs"]);
    for (t, p) in run.times.iter().zip(&run.p_u_trace) {
        ts.push_nums(&[*t, *p]);
    }
    let mut tr = Table::new(&["t", "emitted"]);
    for (t, e) in ret.times.iter().zip(&ret.emitted) {
        tr.push_nums(&[*t, *e]);
    }
    let mut warnings = eff.warnings.clone();
    warnings.extend(run.state.warnings.iter().cloned());
    warnings.extend(ret.warnings.iter().cloned());
    Ok(Outcome { summary: s, tables: vec![("storage.csv".into(), ts), ("retrieval.csv".into(), tr)], warnings, ..Default::default() })
}

fn chain_of(cfg: &RunConfig) -> EmitterChain {
    let c = &cfg.chain;
    let mut ch = EmitterChain::new(c.m, c.big_gamma_tilde, c.gamma_tilde);
    ch.detuning = c.detuning;
    ch
}

/// Fixed or optimised Γ̃τ with the sorting metrics at that point.
pub fn sorting_point(cfg: &RunConfig, chain: &EmitterChain) -> Result<(f64, PulseSpec, SortingResult), CliError> {
    let so = &cfg.sort;
    let gt = match so.gamma_tau {
        Some(x) => x,
        None => optimize_sorting(chain, so.lo, so.hi, so.samples_per_tau)?.0,
    };
    let pulse = sorting_pulse(chain, gt / chain.big_gamma_tilde, so.samples_per_tau);
    let r = sorting_metrics(&chain_scatter(chain, &pulse)?, &pulse)?;
    Ok((gt, pulse, r))
}

fn sort(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let chain = chain_of(cfg);
    let (gt, pulse, r) = sorting_point(cfg, &chain)?;
    let mut s = Summary::default();
    s.int("emitters", chain.m as i64);
    s.num("beta", chain.beta());
    s.num("gamma_tau", gt);
    s.num("F", r.f);
    s.num("P", r.p);
    s.num("orthogonality", r.orthogonality);
    s.num("theta_amplitude", r.theta_amplitude);
    s.num("time_reversal_overlap", r.time_reversal_overlap);
    s.num("delay", r.delay);
    s.num("lambda1", r.lambda1);
    let mut t = Table::new(&["t", "re_psi_out", "im_psi_out", "re_theta", "im_theta"]);
    for (k, (p, th)) in r.psi_out.iter().zip(r.theta_out.iter()).enumerate() {
        t.push_nums(&[pulse.t0 + k as f64 * pulse.dt, p.re, p.im, th.re, th.im]);
    }
    Ok(Outcome { summary: s, tables: vec![("modes.csv".into(), t)], ..Default::default() })
}

fn ns_gate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let chain = chain_of(cfg);
    let (gt, pulse, _) = sorting_point(cfg, &chain)?;
    let c = cfg.ns_gate.coefficients.map(|z| C64::new(z[0], z[1]));
    let r = ns_gate_circuit(c, &chain, &pulse)?;
    let mut s = Summary::default();
    s.int("emitters", chain.m as i64);
    s.num("gamma_tau", gt);
    s.num("fidelity", r.fidelity);
    let mut t = Table::new(&["k", "re_in", "im_in", "re_out", "im_out"]);
    let outs = [r.c0, r.c1, r.c2];
    for k in 0..3 {
        let row = vec![Cell::Int(k as i64), c[k].re.into(), c[k].im.into(), outs[k].re.into(), outs[k].im.into()];
        t.push(row);
        s.num(&format!("re_c{k}_out"), outs[k].re);
        s.num(&format!("im_c{k}_out"), outs[k].im);
    }
    Ok(Outcome { summary: s, tables: vec![("gate.csv".into(), t)], ..Default::default() })
}
