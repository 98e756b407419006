//! Weak-drive cw response of the three-level array and of its effective two-level image.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::coupling::{lattice_sum, mode_weighted, CollectiveParams, CouplingMatrix};
use crate::error::{invalid, Error, Result};
use crate::lattice::{ArrayGeometry, ModeVector};
use crate::linalg::{solve, vdot, Resolvent};
use crate::units::G2_OVER_C;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub delta_e: f64,
    pub delta_r: f64,
    pub omega: f64,
    pub gamma: f64,
    /// Peak probe Rabi frequency.
    #[serde(default = "default_omega_p")]
    pub omega_p: f64,
}

fn default_omega_p() -> f64 {
    1e-3
}

impl DriveParams {
    pub fn new(delta_e: f64, delta_r: f64, omega: f64, gamma: f64) -> Self {
        Self { delta_e, delta_r, omega, gamma, omega_p: default_omega_p() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) || !(self.gamma >= 0.0) || !(self.omega_p > 0.0) {
            return invalid("drive requires Ω ≥ 0, γ ≥ 0 and Ωp > 0");
        }
        Ok(())
    }

    /// Linear response is trusted only for Ωp ≤ 0.01.
    pub fn weak(&self) -> bool {
        self.omega_p <= 0.01
    }

    /// Δe − Ω²/(Δe + Δr + iγ/2): the dressed shift seen by |e⟩.
    pub fn dressed_shift(&self) -> C64 {
        let two = C64::new(self.delta_e + self.delta_r, 0.5 * self.gamma);
        C64::new(self.delta_e, 0.0) - self.omega * self.omega / two
    }

    pub fn with_delta_e(mut self, delta_e: f64) -> Self {
        self.delta_e = delta_e;
        self
    }
}

/// Two-level image of the ladder after eliminating |e⟩.
#[derive(Clone, Debug)]
pub struct EffectiveParams {
    pub drive: DriveParams,
    pub delta_bar: f64,
    /// ḡ/g = −Ω/Δe.
    pub g_ratio: f64,
    /// (Ω/Δe)².
    pub scale: f64,
    pub j_bar: Array2<f64>,
    pub gam_bar: Array2<f64>,
    pub warnings: Vec<String>,
}

impl EffectiveParams {
    pub fn gamma(&self) -> f64 {
        self.drive.gamma
    }

    /// ḡ²/c.
    pub fn g_bar_sq(&self) -> f64 {
        G2_OVER_C * self.scale
    }

    pub fn g_bar(&self) -> f64 {
        G2_OVER_C.sqrt() * self.g_ratio
    }

    pub fn len(&self) -> usize {
        self.j_bar.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.j_bar.is_empty()
    }

    /// K̄ = J̄ + iΓ̄/2 including the diagonal iΓ̄_jj/2.
    pub fn k_bar(&self) -> Array2<C64> {
        let mut k = Array2::zeros(self.j_bar.raw_dim());
        ndarray::Zip::from(&mut k)
            .and(&self.j_bar)
            .and(&self.gam_bar)
            .for_each(|k, &j, &g| *k = C64::new(j, 0.5 * g));
        k
    }

    /// K̄ + (Δ̄ + iγ/2)·I.
    pub fn generator(&self) -> Array2<C64> {
        let mut a = self.k_bar();
        let z = C64::new(self.delta_bar, 0.5 * self.gamma());
        for i in 0..a.nrows() {
            a[[i, i]] += z;
        }
        a
    }

    pub fn collective_mode(&self, mode: &ModeVector) -> CollectiveParams {
        mode_weighted(&self.j_bar, &self.gam_bar, &mode.u)
    }

    pub fn collective_lattice(&self, geom: &ArrayGeometry) -> CollectiveParams {
        lattice_sum(&self.j_bar, &self.gam_bar, geom.central_site())
    }

    /// |ε|/|a_in|: the omitted background emission from |e⟩ relative to the input field.
    pub fn eps_ratio(&self, mode: &ModeVector) -> f64 {
        G2_OVER_C * mode.obliquity() * mode.norm_sqr() / self.drive.delta_e.abs()
    }

    pub fn with_delta_bar(&self, delta_bar: f64) -> Self {
        let mut e = self.clone();
        e.delta_bar = delta_bar;
        e
    }
}

pub fn reduce_two_level(drive: &DriveParams, coupling: &CouplingMatrix) -> Result<EffectiveParams> {
    drive.validate()?;
    if drive.delta_e == 0.0 {
        return invalid("Δe = 0 admits no adiabatic elimination");
    }
    let ratio = drive.omega / drive.delta_e;
    let scale = ratio * ratio;
    let mut warnings = Vec::new();
    if drive.delta_e.abs() < 3.0 * drive.omega {
        warnings.push(format!(
            "|Δe|/Ω = {:.3} < 3: reduction is poorly justified",
            drive.delta_e.abs() / drive.omega.max(f64::MIN_POSITIVE)
        ));
    }
    let jmax = coupling.j.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if drive.delta_e.abs() < 3.0 * jmax {
        warnings.push(format!("|Δe| = {:.3} is not large against max|J| = {jmax:.3}", drive.delta_e.abs()));
    }
    Ok(EffectiveParams {
        drive: *drive,
        delta_bar: drive.delta_e + drive.delta_r - drive.omega * drive.omega / drive.delta_e,
        g_ratio: -ratio,
        scale,
        j_bar: &coupling.j * scale,
        gam_bar: &coupling.gam * scale,
        warnings,
    })
}

/// Autler–Townes reflection maxima (Δe⁺, Δe⁻).
pub fn at_resonances(delta_r: f64, delta_c: f64, omega: f64) -> (f64, f64) {
    let root = ((delta_r - delta_c).powi(2) + 4.0 * omega * omega).sqrt();
    let base = -(delta_r + delta_c);
    ((base + root) / 2.0, (base - root) / 2.0)
}

/// R, T and L from a reflection amplitude; T = |1 + r|².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rtl {
    pub r: f64,
    pub t: f64,
    pub l: f64,
}

impl Rtl {
    pub fn from_amplitude(r: C64) -> Self {
        let (rr, tt) = (r.norm_sqr(), (C64::new(1.0, 0.0) + r).norm_sqr());
        Self { r: rr, t: tt, l: 1.0 - rr - tt }
    }
}

/// Single-excitation solution of the three-level problem.
#[derive(Clone, Debug)]
pub struct SingleExcitation {
    pub e: Array1<C64>,
    pub rydberg: Array1<C64>,
    pub reflection: C64,
    pub rtl: Rtl,
}

fn umax(mode: &ModeVector) -> f64 {
    mode.u.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Direct dense solve of (K + Δe − Ω²/(Δe+Δr+iγ/2))·e = −Ωp·u/max|u|.
pub fn solve_single_excitation_3level(
    coupling: &CouplingMatrix,
    mode: &ModeVector,
    drive: &DriveParams,
) -> Result<SingleExcitation> {
    drive.validate()?;
    check_sizes(coupling.len(), mode)?;
    let mut a = coupling.complex();
    let z = drive.dressed_shift();
    for i in 0..a.nrows() {
        a[[i, i]] += z;
    }
    let um = umax(mode);
    let src = mode.u.mapv(|x| x * (drive.omega_p / um));
    // probe amplitude whose peak Rabi frequency g·a_in·max|u| equals Ωp
    let g = (G2_OVER_C * mode.obliquity()).sqrt();
    let a_in = drive.omega_p / (g * um);
    let e = -solve(&a, &src)?;
    let two = C64::new(drive.delta_e + drive.delta_r, 0.5 * drive.gamma);
    let rydberg = e.mapv(|x| -drive.omega * x / two);
    let reflection = C64::i() * g * vdot(&mode.u, &e) / a_in;
    Ok(SingleExcitation { e, rydberg, reflection, rtl: Rtl::from_amplitude(reflection) })
}

/// Direct dense solve of the reduced problem (K̄ + Δ̄ + iγ/2)·c = −Ω̄p·u/max|u|.
/// Returns the Rydberg amplitudes and the reflection amplitude.
pub fn solve_single_excitation_2level(effective: &EffectiveParams, mode: &ModeVector) -> Result<(Array1<C64>, C64)> {
    check_sizes(effective.len(), mode)?;
    let um = umax(mode);
    let ob = mode.obliquity().sqrt();
    let gb = effective.g_bar() * ob;
    // same probe amplitude as the three-level drive, seen through ḡ
    let a_in = effective.drive.omega_p / (G2_OVER_C.sqrt() * ob * um);
    let src = mode.u.mapv(|x| x * (gb * a_in));
    let c = -solve(&effective.generator(), &src)?;
    let r = C64::i() * gb * vdot(&mode.u, &c) / a_in;
    Ok((c, r))
}

fn check_sizes(n: usize, mode: &ModeVector) -> Result<()> {
    if n != mode.len() || n == 0 {
        return invalid("coupling and mode sizes differ");
    }
    Ok(())
}

/// Mode-projected response u†(K + z)⁻¹u of one array and mode, shared by every cw model.
#[derive(Clone, Debug)]
pub struct ArrayResponse {
    res: Resolvent,
    /// g²/c times the mode obliquity.
    g2: f64,
}

impl ArrayResponse {
    pub fn new(coupling: &CouplingMatrix, mode: &ModeVector) -> Result<Self> {
        check_sizes(coupling.len(), mode)?;
        Ok(Self { res: Resolvent::new(&coupling.complex(), &mode.u, &mode.u)?, g2: G2_OVER_C * mode.obliquity() })
    }

    /// Response to an arbitrary illumination vector `v` (used for two-sided driving).
    pub fn with_vector(coupling: &CouplingMatrix, v: &Array1<C64>, obliquity: f64) -> Result<Self> {
        if v.len() != coupling.len() {
            return invalid("illumination vector size differs from the coupling matrix");
        }
        Ok(Self { res: Resolvent::new(&coupling.complex(), v, v)?, g2: G2_OVER_C * obliquity })
    }

    /// u†(K + z)⁻¹u.
    pub fn projection(&self, z: C64) -> Result<C64> {
        self.res.eval(z)
    }

    /// Three-level reflection amplitude r = −i(g²/c)·sec θ·u†(K + Δe − Ω²/(Δe+Δr+iγ/2))⁻¹u.
    pub fn reflection_3level(&self, drive: &DriveParams) -> Result<C64> {
        Ok(-C64::i() * self.g2 * self.res.eval(drive.dressed_shift())?)
    }

    /// Two-level reflection r = −i(ḡ²/c)·u†(sK + Δ̄ + iγ/2)⁻¹u.
    pub fn reflection_2level(&self, scale: f64, delta_bar: f64, gamma: f64) -> Result<C64> {
        let z = C64::new(delta_bar, 0.5 * gamma) / scale;
        Ok(-C64::i() * self.g2 * self.res.eval(z)?)
    }

    /// Bare |g⟩–|e⟩ response (Rydberg level fully blockaded).
    pub fn reflection_blockaded(&self, delta_e: f64) -> Result<C64> {
        Ok(-C64::i() * self.g2 * self.res.eval(C64::new(delta_e, 0.0))?)
    }

    pub fn spectrum_3level(&self, drive: &DriveParams, grid: &[f64]) -> Result<LinearSpectrum> {
        let mut s = LinearSpectrum::new(SpectrumAxis::DeltaE);
        for &x in grid {
            s.push(x, Rtl::from_amplitude(self.reflection_3level(&drive.with_delta_e(x))?));
        }
        Ok(s)
    }

    /// Reduced spectrum at fixed effective parameters, swept in Δ̄.
    pub fn spectrum_2level(&self, effective: &EffectiveParams, grid: &[f64]) -> Result<LinearSpectrum> {
        let mut s = LinearSpectrum::new(SpectrumAxis::DeltaBar);
        for &x in grid {
            s.push(x, Rtl::from_amplitude(self.reflection_2level(effective.scale, x, effective.gamma())?));
        }
        Ok(s)
    }

    /// Reduced model re-derived at every Δe of the grid, so s and Δ̄ follow Δe.
    pub fn spectrum_2level_tracking(&self, drive: &DriveParams, grid: &[f64]) -> Result<LinearSpectrum> {
        let mut s = LinearSpectrum::new(SpectrumAxis::DeltaE);
        for &x in grid {
            s.push(x, Rtl::from_amplitude(self.reflection_2level_at(drive, x)?));
        }
        Ok(s)
    }

    pub fn reflection_2level_at(&self, drive: &DriveParams, delta_e: f64) -> Result<C64> {
        if delta_e == 0.0 {
            return invalid("Δe = 0 on the reduced-model grid");
        }
        let scale = (drive.omega / delta_e).powi(2);
        let db = delta_e + drive.delta_r - drive.omega * drive.omega / delta_e;
        self.reflection_2level(scale, db, drive.gamma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumAxis {
    DeltaE,
    DeltaBar,
}

impl SpectrumAxis {
    pub fn name(self) -> &'static str {
        match self {
            SpectrumAxis::DeltaE => "delta_e",
            SpectrumAxis::DeltaBar => "delta_bar",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearSpectrum {
    pub axis: SpectrumAxis,
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub l: Vec<f64>,
}

impl LinearSpectrum {
    fn new(axis: SpectrumAxis) -> Self {
        Self { axis, x: vec![], r: vec![], t: vec![], l: vec![] }
    }

    fn push(&mut self, x: f64, p: Rtl) {
        self.x.push(x);
        self.r.push(p.r);
        self.t.push(p.t);
        self.l.push(p.l);
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// A located maximum with its full width at half maximum.
#[derive(Clone, Copy, Debug)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
    pub fwhm: f64,
}

/// Refines every interior local maximum of `f` sampled on `grid` and measures its FWHM.
pub fn locate_peaks<F>(f: F, grid: &[f64]) -> Result<Vec<Peak>>
where
    F: Fn(f64) -> Result<f64>,
{
    let vals = grid.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let mut peaks = Vec::new();
    for i in 1..grid.len().saturating_sub(1) {
        if !(vals[i] >= vals[i - 1] && vals[i] > vals[i + 1]) {
            continue;
        }
        let (mut lo, mut hi) = (grid[i - 1], grid[i + 1]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
            if f(m1)? < f(m2)? {
                lo = m1;
            } else {
                hi = m2;
            }
            if hi - lo < 1e-13 * (1.0 + lo.abs()) {
                break;
            }
        }
        let position = 0.5 * (lo + hi);
        let height = f(position)?;
        let half = 0.5 * height;
        let side = |dir: f64| -> Result<f64> {
            let mut step = 0.5 * (grid[i + 1] - grid[i - 1]).abs().max(1e-9);
            let mut far = position + dir * step;
            let mut n = 0;
            while f(far)? > half {
                step *= 2.0;
                far = position + dir * step;
                n += 1;
                if n > 60 {
                    return Err(Error::Numerical("peak half-width not bracketed".into()));
                }
            }
            let (mut a, mut b) = (position, far);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if f(m)? > half {
                    a = m;
                } else {
                    b = m;
                }
            }
            Ok(0.5 * (a + b))
        };
        let fwhm = side(1.0)? - side(-1.0)?;
        peaks.push(Peak { position, height, fwhm });
    }
    Ok(peaks)
}

/// Infinite-array three-level reflection with closed-form coupling g²/(ca²).
pub fn reflection_infinite_3level(drive: &DriveParams, a: f64, delta_c: f64, gamma_c: f64) -> f64 {
    let den = drive.dressed_shift() + C64::new(delta_c, 0.5 * gamma_c);
    (G2_OVER_C / (a * a) / den).norm_sqr()
}

/// |(Γ̄c/2)/(Δ̄ + Δ̄c + i(Γ̄c+γ)/2)|².
pub fn reflection_infinite_2level(delta_bar: f64, delta_bar_c: f64, gamma_bar_c: f64, gamma: f64) -> f64 {
    (C64::new(0.5 * gamma_bar_c, 0.0) / C64::new(delta_bar + delta_bar_c, 0.5 * (gamma_bar_c + gamma))).norm_sqr()
}

/// Reflection of the blockaded array, |(3/(8πa²))/(Δe + Δc + iΓc/2)|².
pub fn blockaded_reflection(drive: &DriveParams, a: f64, delta_c: f64, gamma_c: f64) -> f64 {
    (C64::new(G2_OVER_C / (a * a), 0.0) / C64::new(drive.delta_e + delta_c, 0.5 * gamma_c)).norm_sqr()
}

/// r_b = (C6/Γ̄c)^{1/6}.
pub fn blockade_radius(c6: f64, gamma_bar_c: f64) -> Result<f64> {
    if !(c6 > 0.0) || !(gamma_bar_c > 0.0) {
        return invalid("blockade radius needs C6 > 0 and Γ̄c > 0");
    }
    Ok((c6 / gamma_bar_c).powf(1.0 / 6.0))
}

/// Narrow Autler–Townes branch: the root farther from the bare resonance −Δc.
pub fn narrow_resonance(delta_r: f64, delta_c: f64, omega: f64) -> f64 {
    let (p, m) = at_resonances(delta_r, delta_c, omega);
    if (p + delta_c).abs() >= (m + delta_c).abs() {
        p
    } else {
        m
    }
}

/// Δe at which the reduced model is on resonance, Δ̄(Δe) + s(Δe)·Δc = 0, nearest the narrow branch.
pub fn raman_resonance(delta_r: f64, delta_c: f64, omega: f64) -> f64 {
    // Δe·(Δe + Δr) − Ω² + Ω²Δc/Δe = 0, refined by Newton from the Autler–Townes root
    let f = |x: f64| x + delta_r - omega * omega / x + omega * omega * delta_c / (x * x);
    let df = |x: f64| 1.0 + omega * omega / (x * x) - 2.0 * omega * omega * delta_c / (x * x * x);
    let mut x = narrow_resonance(delta_r, delta_c, omega);
    for _ in 0..100 {
        let dx = f(x) / df(x);
        x -= dx;
        if dx.abs() < 1e-15 * x.abs() {
            break;
        }
    }
    x
}

/// Default Δe grid: 400 points over [Δe⁻−5, Δe⁺+5] plus 100 points within ±5Γ̄c of the narrow line.
pub fn default_grid(drive: &DriveParams, delta_c: f64, gamma_c: f64) -> Vec<f64> {
    let (p, m) = at_resonances(drive.delta_r, delta_c, drive.omega);
    let (lo, hi) = (p.min(m) - 5.0, p.max(m) + 5.0);
    let mut g: Vec<f64> = (0..400).map(|i| lo + (hi - lo) * i as f64 / 399.0).collect();
    let nar = narrow_resonance(drive.delta_r, delta_c, drive.omega);
    let s = (drive.omega / nar).powi(2);
    // dΔ̄/dΔe = 1 + s near the line
    let width = 5.0 * s * gamma_c / (1.0 + s);
    g.extend((0..100).map(|i| nar - width + 2.0 * width * i as f64 / 99.0));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}
