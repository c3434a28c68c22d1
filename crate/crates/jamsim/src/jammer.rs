//! Eve's side: artificial channel synthesis, strategy timing and power, array illumination,
//! target mimicry, and a closed-form model of the CTF Bob estimates under jamming.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{steering_delay, steering_doppler, DopplerPhasor, PropagationSpec};
use crate::geometry::{bistatic_delay, bistatic_doppler, path_gain, PathParams, ScenarioTopology, Target, Vec2};
use crate::grid::Grid;
use crate::scalar::{cast, cis, widen, Real};
use crate::sync::AlignmentCase;
use crate::waveform::{modulate, modulate_factored, BasebandSignal, OfdmConfig, WaveformError};

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Error)]
pub enum JammerError {
    #[error("artificial target {index}: delay {delay_s} s is outside (0, Q·T)")]
    BadDelay { index: usize, delay_s: f64 },
    #[error("Eve would have to transmit at {start_s} s, before hearing the announcement at {heard_s} s")]
    Infeasible { start_s: f64, heard_s: f64 },
    #[error("array: {0}")]
    Array(String),
    #[error("selective injection needs an array with at least two elements")]
    NoArray,
    #[error("invalid strategy: {0}")]
    Strategy(String),
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("path {index} is not a whole number of samples away")]
    Fractional { index: usize },
    #[error("path {index} reaches the FFT window {offset} samples off the cyclic prefix")]
    Isi { index: usize, offset: i64 },
    #[error("grid of shape {got:?}, expected {want:?}")]
    Shape { got: (usize, usize), want: (usize, usize) },
    #[error(transparent)]
    Waveform(#[from] WaveformError),
}

/// One spoofed echo: `ᾱ d(τ̄) b^H(f̄)` on top of the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtificialTarget {
    pub gain: Complex<f64>,
    /// Excess delay over the direct path, seconds.
    pub delay: f64,
    pub doppler: f64,
}

impl ArtificialTarget {
    /// Target shown `range_m` behind the reference peak, closing at `speed_mps` of bistatic range rate.
    pub fn at(cfg: &OfdmConfig, range_m: f64, speed_mps: f64, gain: Complex<f64>) -> Self {
        Self { gain, delay: range_m / crate::geometry::SPEED_OF_LIGHT, doppler: speed_mps / cfg.wavelength() }
    }
}

fn check_targets(cfg: &OfdmConfig, targets: &[ArtificialTarget]) -> Result<(), JammerError> {
    let max = cfg.q as f64 * cfg.t();
    for (index, a) in targets.iter().enumerate() {
        if !(a.delay > 0.0 && a.delay < max) || !a.doppler.is_finite() || !a.gain.norm().is_finite() {
            return Err(JammerError::BadDelay { index, delay_s: a.delay });
        }
    }
    Ok(())
}

/// `1 + Σ ᾱ_i d(τ̄_i) b^H(f̄_i)`.
pub fn make_artificial_ctf<T: Real>(cfg: &OfdmConfig, targets: &[ArtificialTarget]) -> Result<Grid<T>, JammerError> {
    check_targets(cfg, targets)?;
    let mut h = Grid::from_fn(cfg.q, cfg.m, |_, _| Complex::new(T::one(), T::zero()));
    for a in targets {
        let d = steering_delay::<f64>(cfg, a.delay);
        let b = steering_doppler::<f64>(cfg, a.doppler);
        for m in 0..cfg.m {
            let k = a.gain * b[m].conj();
            for (z, dq) in h.col_mut(m).iter_mut().zip(&d) {
                *z = *z + cast::<T>(dq * k);
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectMode {
    #[default]
    #[serde(rename = "overcrowd_a1")]
    OvercrowdA1,
    #[serde(rename = "selective_a2")]
    SelectiveA2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InvalidateMode {
    #[serde(rename = "preceding_b1")]
    PrecedingB1,
    #[default]
    #[serde(rename = "forced_sync_b2")]
    ForcedSyncB2,
    #[serde(rename = "none")]
    None,
}

/// `f_md·sin(2π·rate·g·T_s + phase)` on slow-time index g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroDoppler {
    pub amplitude_hz: f64,
    pub rate_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MimicState {
    pub pos: Vec2,
    pub vel: Vec2,
    #[serde(default)]
    pub accel: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MimicryConfig {
    pub kinematics: MimicState,
    #[serde(default = "default_rcs")]
    pub rcs: f64,
    #[serde(default)]
    pub micro_doppler: Option<MicroDoppler>,
}

fn default_rcs() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub element_count: usize,
    #[serde(default = "half")]
    pub spacing_wavelengths: f64,
    /// Direction the array line points in, radians from +x.
    #[serde(default = "quarter_turn")]
    pub axis_rad: f64,
    /// `None` points at Bob.
    #[serde(default)]
    pub beam_angle: Option<f64>,
    /// `None` nulls every scattered departure.
    #[serde(default)]
    pub null_angles: Option<Vec<f64>>,
}

fn half() -> f64 {
    0.5
}

fn quarter_turn() -> f64 {
    std::f64::consts::FRAC_PI_2
}

/// Where an artificial target sits on Bob's map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub range_m: f64,
    pub speed_mps: f64,
    #[serde(default = "default_gain_db")]
    pub gain_db: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

fn default_gain_db() -> f64 {
    -10.0
}

impl Placement {
    pub fn target(&self, cfg: &OfdmConfig) -> ArtificialTarget {
        ArtificialTarget::at(cfg, self.range_m, self.speed_mps, Complex::from_polar(10f64.powf(self.gain_db / 20.0), self.phase_rad))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    #[serde(default)]
    pub inject_mode: InjectMode,
    #[serde(default)]
    pub mimicry_a3: Option<MimicryConfig>,
    #[serde(default)]
    pub invalidate_mode: InvalidateMode,
    pub jsr_db: f64,
    #[serde(default)]
    pub eve_cfo_hz: f64,
    /// Extra lead of Eve's arrival over Alice's at Bob. Under B1 the default clears Eve's whole pulse
    /// plus half a symbol, so Alice stays out of the correlator window Bob locks on; 0 otherwise.
    #[serde(default)]
    pub timing_advance_s: Option<f64>,
    /// Half-width of Eve's uniform clock error under B2, samples.
    #[serde(default = "default_jitter")]
    pub alignment_jitter_samples: f64,
    /// Pins Eve's clock error, samples.
    #[serde(default)]
    pub clock_offset_samples: Option<f64>,
    #[serde(default = "default_ndpa")]
    pub ndpa_lead_s: f64,
    #[serde(default)]
    pub array: Option<ArrayConfig>,
    #[serde(default)]
    pub artificial: Vec<Placement>,
}

fn default_jitter() -> f64 {
    24.0
}

fn default_ndpa() -> f64 {
    40e-6
}

impl StrategyConfig {
    pub fn new(jsr_db: f64) -> Self {
        Self {
            inject_mode: InjectMode::OvercrowdA1,
            mimicry_a3: None,
            invalidate_mode: InvalidateMode::ForcedSyncB2,
            jsr_db,
            eve_cfo_hz: 0.0,
            timing_advance_s: None,
            alignment_jitter_samples: default_jitter(),
            clock_offset_samples: None,
            ndpa_lead_s: default_ndpa(),
            array: None,
            artificial: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), JammerError> {
        let bad = |s: &str| Err(JammerError::Strategy(s.into()));
        if !self.jsr_db.is_finite() || !self.eve_cfo_hz.is_finite() {
            return bad("jsr_db and eve_cfo_hz must be finite");
        }
        if !(self.alignment_jitter_samples >= 0.0) || !self.alignment_jitter_samples.is_finite() {
            return bad("alignment_jitter_samples must be finite and non-negative");
        }
        if !(self.ndpa_lead_s >= 0.0) {
            return bad("ndpa_lead_s must be non-negative");
        }
        if self.timing_advance_s.is_some_and(|a| !a.is_finite()) || self.clock_offset_samples.is_some_and(|c| !c.is_finite()) {
            return bad("timing values must be finite");
        }
        if self.inject_mode == InjectMode::SelectiveA2 && self.array.as_ref().map_or(true, |a| a.element_count < 2) {
            return Err(JammerError::NoArray);
        }
        Ok(())
    }
}

/// What Eve knows about the link, from ranging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JamGeometry {
    pub tau_ab: f64,
    pub tau_eb: f64,
    pub tau_ae: f64,
    /// Direct-path gain magnitudes at Bob.
    pub alice_los: f64,
    pub eve_los: f64,
}

impl JamGeometry {
    pub fn from_topology(topo: &ScenarioTopology, f_c: f64) -> Self {
        Self {
            tau_ab: bistatic_delay(topo.alice, topo.bob, None),
            tau_eb: bistatic_delay(topo.eve, topo.bob, None),
            tau_ae: bistatic_delay(topo.alice, topo.eve, None),
            alice_los: path_gain(topo.alice, topo.bob, None, f_c).norm(),
            eve_los: path_gain(topo.eve, topo.bob, None, f_c).norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JamPlan {
    /// Eve's first pulse leaves at this time; Alice's leaves at 0.
    pub tx_start: f64,
    /// Eve's arrival at Bob minus Alice's, seconds.
    pub arrival_offset: f64,
    /// Transmit amplitude scale meeting the JSR.
    pub amplitude: f64,
    pub cfo: f64,
}

fn preceding_lead(cfg: &OfdmConfig) -> f64 {
    (cfg.symbols_per_pulse as f64 + 0.5) * cfg.t_o()
}

/// Timing and power for one snapshot. Draws Eve's clock error under B2.
pub fn plan_jam<R: Rng + ?Sized>(
    cfg: &OfdmConfig,
    strategy: &StrategyConfig,
    geom: &JamGeometry,
    rng: &mut R,
) -> Result<JamPlan, JammerError> {
    strategy.validate()?;
    let t = cfg.t();
    let pinned = strategy.clock_offset_samples.map(|c| c * t);
    let arrival_offset = match strategy.invalidate_mode {
        InvalidateMode::PrecedingB1 => -strategy.timing_advance_s.unwrap_or(preceding_lead(cfg)) + pinned.unwrap_or(0.0),
        InvalidateMode::ForcedSyncB2 => {
            let j = strategy.alignment_jitter_samples;
            let clock = pinned.unwrap_or_else(|| if j > 0.0 { rng.gen_range(-j..=j) * t } else { 0.0 });
            -strategy.timing_advance_s.unwrap_or(0.0) + clock
        }
        InvalidateMode::None => -strategy.timing_advance_s.unwrap_or(0.0) + pinned.unwrap_or(0.0),
    };
    let tx_start = geom.tau_ab + arrival_offset - geom.tau_eb;
    let heard = geom.tau_ae - strategy.ndpa_lead_s;
    if tx_start < heard {
        return Err(JammerError::Infeasible { start_s: tx_start, heard_s: heard });
    }
    let amplitude = 10f64.powf(strategy.jsr_db / 20.0) * geom.alice_los / geom.eve_los;
    Ok(JamPlan { tx_start, arrival_offset, amplitude, cfo: strategy.eve_cfo_hz })
}

/// Transmit columns as `Σ_k column_k · weights_k[m]`.
pub type Terms<T> = Vec<(Vec<Complex<T>>, Vec<Complex<T>>)>;

#[derive(Debug, Clone)]
pub struct JamSignal<T> {
    /// Eve's transmitted pulse train on her own frame (first pulse at 0).
    pub signal: BasebandSignal<T>,
    pub terms: Terms<T>,
    pub plan: JamPlan,
    /// Targets actually injected, including the mimicked one.
    pub targets: Vec<ArtificialTarget>,
}

impl<T> JamSignal<T> {
    /// Propagation through `paths` with Eve's start time and carrier offset.
    pub fn propagation(&self, paths: Vec<PathParams>, noise_std: f64, doppler: DopplerPhasor) -> PropagationSpec {
        PropagationSpec { paths, cfo: self.plan.cfo, clock_offset: self.plan.tx_start, noise_std, doppler }
    }
}

/// Per-pulse phase of an artificial target, with the optional micro-Doppler integrated over slow time.
fn slow_phases(cfg: &OfdmConfig, doppler: f64, md: Option<&MicroDoppler>, snapshot: usize) -> Vec<f64> {
    let t_s = cfg.t_s();
    let mut acc = 0.0;
    (0..cfg.m)
        .map(|m| {
            let phase = acc;
            let f = doppler + md.map_or(0.0, |s| micro_doppler_signature(s, snapshot * cfg.m + m, t_s));
            acc = (acc + f * t_s).fract();
            phase
        })
        .collect()
}

/// Eve's pulses for snapshot `snapshot`: `A·modulate(H̄⊙S)`, with A3 targets advanced first.
/// Timing and carrier offset are carried in the returned plan and applied on propagation.
pub fn synthesize_jam_signal<T: Real>(
    cfg: &OfdmConfig,
    targets: &[ArtificialTarget],
    s: &Grid<T>,
    strategy: &StrategyConfig,
    snapshot: usize,
    plan: JamPlan,
    topo: &ScenarioTopology,
) -> Result<JamSignal<T>, JammerError> {
    if s.shape() != (cfg.q, cfg.m) {
        return Err(JammerError::Shape { got: s.shape(), want: (cfg.q, cfg.m) });
    }
    let mut all = targets.to_vec();
    let mut phases: Vec<Vec<f64>> = targets.iter().map(|a| slow_phases(cfg, a.doppler, None, snapshot)).collect();
    if let Some(mimic) = &strategy.mimicry_a3 {
        let state = mimic_state_at(cfg, &mimic.kinematics, snapshot)?;
        let a = artificial_from_state(topo.alice, topo.bob, &state, mimic.rcs, cfg.f_c);
        phases.push(slow_phases(cfg, a.doppler, mimic.micro_doppler.as_ref(), snapshot));
        all.push(a);
    }
    check_targets(cfg, &all)?;
    let amp = T::of(plan.amplitude);
    let uniform = (1..cfg.m).all(|m| s.col(m) == s.col(0));
    if !uniform {
        // Per-pulse training: no shared atom, so modulate the full grid.
        let h = make_artificial_grid(cfg, &all, &phases);
        let x = h.hadamard(s).scale(Complex::new(amp, T::zero()));
        let signal = modulate(cfg, &x)?;
        let terms = (0..cfg.m)
            .map(|m| {
                let mut w = vec![Complex::new(T::zero(), T::zero()); cfg.m];
                w[m] = Complex::new(T::one(), T::zero());
                (x.col(m).to_vec(), w)
            })
            .collect();
        return Ok(JamSignal { signal, terms, plan, targets: all });
    }
    let s0 = s.col(0);
    let mut terms: Terms<T> = vec![(
        s0.iter().map(|&z| z * amp).collect(),
        vec![Complex::new(T::one(), T::zero()); cfg.m],
    )];
    for (a, ph) in all.iter().zip(&phases) {
        let d = steering_delay::<T>(cfg, a.delay);
        let column = s0.iter().zip(&d).map(|(&x, &dq)| x * dq * amp).collect();
        let weights = ph.iter().map(|&p| cast::<T>(a.gain) * cis::<T>(TAU * p)).collect();
        terms.push((column, weights));
    }
    let signal = modulate_factored(cfg, &terms)?;
    Ok(JamSignal { signal, terms, plan, targets: all })
}

fn make_artificial_grid<T: Real>(cfg: &OfdmConfig, targets: &[ArtificialTarget], phases: &[Vec<f64>]) -> Grid<T> {
    let mut h = Grid::from_fn(cfg.q, cfg.m, |_, _| Complex::new(T::one(), T::zero()));
    for (a, ph) in targets.iter().zip(phases) {
        let d = steering_delay::<f64>(cfg, a.delay);
        for m in 0..cfg.m {
            let k = a.gain * cis::<f64>(TAU * ph[m]);
            for (z, dq) in h.col_mut(m).iter_mut().zip(&d) {
                *z = *z + cast::<T>(dq * k);
            }
        }
    }
    h
}

fn steer(array: &ArrayConfig, angle: f64) -> Vec<Complex<f64>> {
    let u = array.spacing_wavelengths * (angle - array.axis_rad).cos();
    (0..array.element_count).map(|n| cis(TAU * (u * n as f64).fract())).collect()
}

/// Minimum-norm weights with unit gain toward the beam and zeros toward each null.
pub fn array_weights(array: &ArrayConfig) -> Result<Vec<Complex<f64>>, JammerError> {
    let err = |s: String| Err(JammerError::Array(s));
    let n = array.element_count;
    let beam = match array.beam_angle {
        Some(b) => b,
        None => return err("beam angle not resolved".into()),
    };
    let nulls = array.null_angles.as_deref().unwrap_or(&[]);
    if n < 1 || !(array.spacing_wavelengths > 0.0) {
        return err(format!("{n} elements at {} wavelengths", array.spacing_wavelengths));
    }
    if nulls.len() >= n {
        return err(format!("{} nulls need more than {n} elements", nulls.len()));
    }
    let mut angles = vec![beam];
    angles.extend_from_slice(nulls);
    if angles.iter().any(|a| !a.is_finite()) {
        return err("non-finite angle".into());
    }
    let cols: Vec<Vec<Complex<f64>>> = angles.iter().map(|&a| steer(array, a)).collect();
    let a = DMatrix::from_fn(n, angles.len(), |i, j| cols[j][i]);
    let sv = a.clone().svd(false, false).singular_values;
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if !(lo > 1e-6 * hi) {
        return err(format!("constraint angles too close to resolve (condition {:.1e})", hi / lo));
    }
    // Aᵀw = f with w = conj(A)·(Aᵀconj(A))⁻¹f.
    let conj_a = a.map(|z| z.conj());
    let gram = a.transpose() * &conj_a;
    let mut f = nalgebra::DVector::zeros(angles.len());
    f[0] = Complex::new(1.0, 0.0);
    let y = match gram.lu().solve(&f) {
        Some(y) => y,
        None => return err("singular constraint system".into()),
    };
    Ok((conj_a * y).iter().copied().collect())
}

pub fn array_factor(array: &ArrayConfig, weights: &[Complex<f64>], angle: f64) -> Complex<f64> {
    steer(array, angle).iter().zip(weights).map(|(a, w)| a * w).sum()
}

/// Array factor toward each path's departure angle; scales that path's gain.
pub fn illumination_weights(array: &ArrayConfig, path_angles: &[f64]) -> Result<Vec<Complex<f64>>, JammerError> {
    let w = array_weights(array)?;
    Ok(path_angles.iter().map(|&a| array_factor(array, &w, a)).collect())
}

/// Fills unset beam and null angles from Eve's path list: beam on the direct path, nulls on the rest.
pub fn resolve_array(array: &ArrayConfig, eve_paths: &[PathParams]) -> ArrayConfig {
    let mut out = array.clone();
    let los = eve_paths.iter().find(|p| p.is_los);
    if out.beam_angle.is_none() {
        out.beam_angle = los.map(|p| p.departure);
    }
    if out.null_angles.is_none() {
        out.null_angles = Some(eve_paths.iter().filter(|p| !p.is_los).map(|p| p.departure).collect());
    }
    out
}

/// Applies the array factor to every path of Eve's channel.
pub fn illuminate(array: &ArrayConfig, eve_paths: &[PathParams]) -> Result<Vec<PathParams>, JammerError> {
    let angles: Vec<f64> = eve_paths.iter().map(|p| p.departure).collect();
    let af = illumination_weights(array, &angles)?;
    Ok(eve_paths.iter().zip(af).map(|(p, g)| PathParams { gain: p.gain * g, ..*p }).collect())
}

/// Newtonian step.
pub fn kinematic_update(state: &MimicState, dt: f64) -> Result<MimicState, JammerError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(JammerError::BadStep(dt));
    }
    let step = |p: f64, v: f64, a: f64| p + v * dt + 0.5 * a * dt * dt;
    Ok(MimicState {
        pos: [step(state.pos[0], state.vel[0], state.accel[0]), step(state.pos[1], state.vel[1], state.accel[1])],
        vel: [state.vel[0] + state.accel[0] * dt, state.vel[1] + state.accel[1] * dt],
        accel: state.accel,
    })
}

/// State after `snapshot` frames of `M·T_s` each.
pub fn mimic_state_at(cfg: &OfdmConfig, initial: &MimicState, snapshot: usize) -> Result<MimicState, JammerError> {
    if snapshot == 0 {
        return Ok(*initial);
    }
    kinematic_update(initial, snapshot as f64 * cfg.m as f64 * cfg.t_s())
}

/// The echo a real scatterer in `state` would put on the Alice→Bob channel, relative to the direct path.
pub fn artificial_from_state(alice: Vec2, bob: Vec2, state: &MimicState, rcs: f64, f_c: f64) -> ArtificialTarget {
    let target = Target { pos: state.pos, vel: state.vel, rcs };
    ArtificialTarget {
        gain: path_gain(alice, bob, Some((state.pos, rcs)), f_c) / path_gain(alice, bob, None, f_c),
        delay: bistatic_delay(alice, bob, Some(state.pos)) - bistatic_delay(alice, bob, None),
        doppler: bistatic_doppler(alice, bob, &target, f_c),
    }
}

/// Doppler offset at global slow-time index `slow_index`.
pub fn micro_doppler_signature(sig: &MicroDoppler, slow_index: usize, t_s: f64) -> f64 {
    sig.amplitude_hz * (TAU * (sig.rate_hz * slow_index as f64 * t_s).fract() + sig.phase_rad).sin()
}

/// Subcarrier mixing from a residual carrier offset, as the closed-form matrices.
#[derive(Debug, Clone)]
pub struct IciModel {
    /// Q×Q, row q, column i.
    pub p_matrix: Grid<f64>,
    pub lambda_diag: Vec<Complex<f64>>,
    pub eta_w: f64,
}

impl IciModel {
    /// `P·S·Λ`.
    pub fn c_matrix(&self, s: &Grid<f64>) -> Grid<f64> {
        let q = self.p_matrix.rows();
        Grid::from_fn(q, s.cols(), |r, m| {
            let dot: Complex<f64> = (0..q).map(|i| self.p_matrix.get(r, i) * s.get(i, m)).sum();
            dot * self.lambda_diag[m]
        })
    }
}

/// `(1 − e^{jθQ}) / (1 − e^{jθ})` with `θ = 2π(δ/Q − ηT)`, Q at the removable singularity.
pub fn ici_entry(delta: i64, eta_t: f64, q: usize) -> Complex<f64> {
    let qf = q as f64;
    // θQ = 2πδ − 2πηTQ; drop the whole turns before the trig call.
    let num = Complex::new(1.0, 0.0) - cis::<f64>(-TAU * (eta_t * qf).fract());
    let theta = TAU * ((delta.rem_euclid(q as i64) as f64 / qf) - eta_t).fract();
    let den = Complex::new(1.0, 0.0) - cis::<f64>(theta);
    if den.norm() < 1e-12 {
        Complex::new(qf, 0.0)
    } else {
        num / den
    }
}

pub fn ici_matrices(cfg: &OfdmConfig, eta_w: f64) -> IciModel {
    let eta_t = eta_w * cfg.t();
    let row: Vec<Complex<f64>> = (0..cfg.q as i64).map(|d| ici_entry(d, eta_t, cfg.q)).collect();
    let p_matrix = Grid::from_fn(cfg.q, cfg.q, |r, i| row[(r + cfg.q - i) % cfg.q]);
    let step = eta_w * cfg.t_s();
    let lambda_diag = (0..cfg.m).map(|m| cis(-TAU * (step * m as f64).fract())).collect();
    IciModel { p_matrix, lambda_diag, eta_w }
}

/// One transmitter as Bob hears it.
#[derive(Debug, Clone, Copy)]
pub struct SourceModel<'a, T> {
    pub terms: &'a [(Vec<Complex<T>>, Vec<Complex<T>>)],
    /// Delays exclude the transmit start; Doppler is held per pulse.
    pub paths: &'a [PathParams],
    pub tx_start: f64,
    pub cfo: f64,
}

/// Bob's frame choice: FFT read at `sync_sample − backoff + Q_cp`, offset `cfo_estimate` removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverModel {
    pub sync_sample: i64,
    pub cfo_estimate: f64,
    pub backoff: usize,
}

/// Circular mixing kernel `c[δ] = conj(P[δ])/Q · e^{j2πδb/Q}`; `None` when there is nothing to mix.
fn mixing_kernel(cfg: &OfdmConfig, nu: f64, backoff: usize) -> Option<Vec<Complex<f64>>> {
    if nu == 0.0 {
        return None;
    }
    let qf = cfg.q as f64;
    let eta_t = nu * cfg.t();
    Some(
        (0..cfg.q)
            .map(|d| ici_entry(d as i64, eta_t, cfg.q).conj() / qf * cis::<f64>(TAU * ((d * backoff) % cfg.q) as f64 / qf))
            .collect(),
    )
}

fn mix(kernel: &[Complex<f64>], v: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let q = v.len();
    (0..q)
        .map(|r| {
            let mut acc = Complex::new(0.0, 0.0);
            for (i, &x) in v.iter().enumerate() {
                acc += kernel[(r + q - i) % q] * x;
            }
            acc
        })
        .collect()
}

/// Received grid before the `⊘S` step, exact for whole-sample delays that stay inside the prefix.
pub fn source_grid<T: Real>(cfg: &OfdmConfig, src: &SourceModel<T>, rx: &ReceiverModel) -> Result<Grid<f64>, JammerError> {
    let (q, qcp) = (cfg.q as i64, cfg.q_cp as i64);
    let t = cfg.t();
    let nu = src.cfo - rx.cfo_estimate;
    let kernel = mixing_kernel(cfg, nu, rx.backoff);
    let b = rx.backoff as i64;
    let mut out = Grid::<f64>::zeros(cfg.q, cfg.m);
    for (index, p) in src.paths.iter().enumerate() {
        let arrival = (src.tx_start + p.delay) / t;
        let k = arrival.round();
        if (arrival - k).abs() > 1e-6 {
            return Err(JammerError::Fractional { index });
        }
        let d = rx.sync_sample - b - k as i64;
        let shift = (0..cfg.symbols_per_pulse as i64)
            .map(|j| d - j * (q + qcp))
            .find(|s| (-qcp..=0).contains(s))
            .ok_or(JammerError::Isi { index, offset: d })?;
        let e = shift + b;
        let ramp: Vec<Complex<f64>> = (0..cfg.q).map(|i| cis(TAU * ((i as i64 * e).rem_euclid(q)) as f64 / q as f64)).collect();
        let slow: Vec<Complex<f64>> = (0..cfg.m)
            .map(|m| {
                let read = (rx.sync_sample - b + qcp + (m * cfg.pri_samples()) as i64) as f64;
                p.gain * cis::<f64>(TAU * ((p.doppler * m as f64 * cfg.t_s()).fract() + (nu * read * t).fract()))
            })
            .collect();
        for (column, weights) in src.terms {
            let v: Vec<Complex<f64>> = column.iter().zip(&ramp).map(|(&x, r)| widen(x) * r).collect();
            let u = match &kernel {
                Some(kern) => mix(kern, &v),
                None => v,
            };
            for m in 0..cfg.m {
                let w = widen(weights[m]) * slow[m];
                if w == Complex::new(0.0, 0.0) {
                    continue;
                }
                for (z, x) in out.col_mut(m).iter_mut().zip(&u) {
                    *z += x * w;
                }
            }
        }
    }
    Ok(out)
}

/// The jammed scene as Bob's estimator sees it.
#[derive(Debug, Clone, Copy)]
pub struct JammedScene<'a, T> {
    pub training: &'a Grid<T>,
    pub eve: SourceModel<'a, T>,
    pub alice: SourceModel<'a, T>,
    pub receiver: ReceiverModel,
}

/// Noiseless closed-form CTF: Eve alone in case 1, both in case 2, Alice alone in case 3.
pub fn analytic_jammed_ctf<T: Real>(cfg: &OfdmConfig, scene: &JammedScene<T>, case: AlignmentCase) -> Result<Grid<f64>, JammerError> {
    let s = scene.training;
    if s.shape() != (cfg.q, cfg.m) {
        return Err(JammerError::Shape { got: s.shape(), want: (cfg.q, cfg.m) });
    }
    let y = match case {
        AlignmentCase::Case1 => source_grid(cfg, &scene.eve, &scene.receiver)?,
        AlignmentCase::Case2a | AlignmentCase::Case2b => {
            source_grid(cfg, &scene.eve, &scene.receiver)?.add(&source_grid(cfg, &scene.alice, &scene.receiver)?)
        }
        AlignmentCase::Case3 => source_grid(cfg, &scene.alice, &scene.receiver)?,
    };
    Ok(y.zip_map(&s.cast::<f64>(), |a, b| a / b))
}

/// `B_0 ⊙ H̄` for Eve's channel with delays relative to its direct path.
pub fn g1<T: Real>(cfg: &OfdmConfig, eve_paths: &[PathParams], artificial: &Grid<T>) -> Grid<T> {
    let t0 = eve_paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min);
    let rel: Vec<PathParams> = eve_paths.iter().map(|p| PathParams { delay: p.delay - t0, ..*p }).collect();
    crate::channel::build_ctf::<T>(cfg, &rel).hadamard(artificial)
}
