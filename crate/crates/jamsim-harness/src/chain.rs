//! One sensing measurement end to end: propagation, synchronization, radar processing, scoring.

use jamsim::channel::{add_noise, noise_std_for_snr, propagate, DopplerPhasor, PropagationSpec};
use jamsim::geometry::{build_paths, PathParams, ScenarioTopology};
use jamsim::jammer::{
    illumination_weights, plan_jam, resolve_array, synthesize_jam_signal, ArtificialTarget, InjectMode, JamGeometry,
    JamPlan,
};
use jamsim::radar::{associate, compute_rdm, estimate_ctf, os_cfar, Association, Detection, Rdm, Truth, TruthKind};
use jamsim::sync::{classify_alignment, compensate_cfo, synchronize, AlignmentCase, LockedTo, SyncDecision};
use jamsim::waveform::{demodulate_backoff, make_training_grid, modulate, PulseContent};
use jamsim::{BasebandSignal, Grid64, OfdmConfig};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario::Scenario;
use crate::HarnessError;

/// Array factors below this leave a path out of the truth table.
const NULLED: f64 = 1e-3;

/// Eve's side of one measurement.
#[derive(Debug, Clone)]
pub struct EveSide {
    pub plan: JamPlan,
    /// Eve→Bob paths with the array factor already applied.
    pub paths: Vec<PathParams>,
    pub illumination: Vec<Complex<f64>>,
    pub targets: Vec<ArtificialTarget>,
}

/// Everything up to the range-Doppler map.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub cfg: OfdmConfig,
    pub rdm: Rdm<f64>,
    pub sync: SyncDecision,
    pub truths: Vec<Truth>,
    pub alice_paths: Vec<PathParams>,
    pub eve: Option<EveSide>,
    /// Alice's direct-path arrival at Bob, samples.
    pub alice_arrival: f64,
    pub eve_arrival: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub rdm: Rdm<f64>,
    pub detections: Vec<Detection>,
    pub sync: SyncDecision,
    pub truths: Vec<Truth>,
    pub association: Association,
    pub plan: Option<JamPlan>,
}

/// Compact per-snapshot summary for exports.
#[derive(Debug, Clone, Serialize)]
pub struct SnapshotReport<'a> {
    pub sync: &'a SyncDecision,
    pub plan: Option<JamPlan>,
    pub truths: &'a [Truth],
    pub detections: &'a [Detection],
    pub association: &'a Association,
}

impl Snapshot {
    pub fn report(&self) -> SnapshotReport<'_> {
        SnapshotReport {
            sync: &self.sync,
            plan: self.plan,
            truths: &self.truths,
            detections: &self.detections,
            association: &self.association,
        }
    }
}

pub fn run_snapshot(scenario: &Scenario, seed: u64) -> Result<Snapshot, HarnessError> {
    run_snapshot_with(scenario, 0, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn run_snapshot_with(scenario: &Scenario, snapshot: usize, rng: &mut ChaCha8Rng) -> Result<Snapshot, HarnessError> {
    let sim = simulate(scenario, snapshot, rng)?;
    let detections = os_cfar(&sim.rdm, &scenario.cfar)?;
    let association = associate(&detections, &sim.truths, scenario.tolerance, sim.rdm.values.shape());
    Ok(Snapshot {
        plan: sim.eve.as_ref().map(|e| e.plan),
        rdm: sim.rdm,
        detections,
        sync: sim.sync,
        truths: sim.truths,
        association,
    })
}

struct Received {
    alice: BasebandSignal<f64>,
    jam: Option<BasebandSignal<f64>>,
    training: Grid64,
    alice_paths: Vec<PathParams>,
    eve: Option<EveSide>,
    noise_std: f64,
}

fn receive(scenario: &Scenario, topo: &ScenarioTopology, snapshot: usize, rng: &mut ChaCha8Rng) -> Result<Received, HarnessError> {
    let cfg = scenario.ofdm;
    let training = make_training_grid::<f64>(&cfg, scenario.training_seed);
    let alice_paths = build_paths(topo.alice, topo.bob, &topo.targets, cfg.f_c)?;
    let mut link = PropagationSpec::new(alice_paths.clone());
    link.cfo = scenario.alice_cfo_hz;
    let alice = propagate(&modulate(&cfg, &training)?, &link, rng)?;
    let noise_std = noise_std_for_snr(alice_paths[0].gain, scenario.snr_db);
    let mut eve = None;
    let mut jam_rx = None;
    if let Some(strategy) = &scenario.jammer {
        let plan = plan_jam(&cfg, strategy, &JamGeometry::from_topology(topo, cfg.f_c), rng)?;
        let mut paths = build_paths(topo.eve, topo.bob, &topo.targets, cfg.f_c)?;
        let illumination = match (strategy.inject_mode, &strategy.array) {
            (InjectMode::SelectiveA2, Some(array)) => {
                let angles: Vec<f64> = paths.iter().map(|p| p.departure).collect();
                illumination_weights(&resolve_array(array, &paths), &angles)?
            }
            _ => vec![Complex::new(1.0, 0.0); paths.len()],
        };
        for (p, g) in paths.iter_mut().zip(&illumination) {
            p.gain *= g;
        }
        let targets: Vec<ArtificialTarget> = strategy.artificial.iter().map(|p| p.target(&cfg)).collect();
        let jam = synthesize_jam_signal(&cfg, &targets, &training, strategy, snapshot, plan, topo)?;
        let rx = propagate(&jam.signal, &jam.propagation(paths.clone(), 0.0, DopplerPhasor::Continuous), rng)?;
        jam_rx = Some(rx);
        eve = Some(EveSide { plan, paths, illumination, targets: jam.targets });
    }
    Ok(Received { alice, jam: jam_rx, training, alice_paths, eve, noise_std })
}

/// Propagation, synchronization and radar processing, without detection.
pub fn simulate(scenario: &Scenario, snapshot: usize, rng: &mut ChaCha8Rng) -> Result<Simulated, HarnessError> {
    let cfg = scenario.ofdm;
    let topo = scenario.topology()?;
    let rx = receive(scenario, &topo, snapshot, rng)?;
    let t = cfg.t();
    let alice_arrival = rx.alice_paths[0].delay / t;
    let eve_arrival = rx.eve.as_ref().map(|e| (e.plan.tx_start + e.paths[0].delay) / t);
    let mut labels = vec![(LockedTo::Alice, alice_arrival.round() as i64)];
    if let Some(a) = eve_arrival {
        labels.push((LockedTo::Eve, a.round() as i64));
    }
    let clean = match &rx.jam {
        Some(j) => rx.alice.add(j)?,
        None => rx.alice.clone(),
    };
    // Room for an early lock plus the FFT backoff.
    let clean = clean.widened(cfg.q_cp, cfg.q_cp)?;
    let signal = add_noise(&clean, rx.noise_std, rng)?;
    let mut sync = synchronize(&cfg, &signal, &scenario.sync, &labels)?;
    sync.alignment_case = eve_arrival.map(|e| classify_alignment(alice_arrival * t, e * t, &cfg));
    let r = demodulate_backoff(&cfg, &compensate_cfo(&signal, sync.cfo_estimate), sync.sync_sample, scenario.backoff())?;
    let ctf = estimate_ctf(&r, &rx.training)?;
    let rdm = compute_rdm(&cfg, &ctf, scenario.window, scenario.window);
    let truths = truth_table(&cfg, scenario, &rx.alice_paths, rx.eve.as_ref(), &sync);
    Ok(Simulated { cfg, rdm, sync, truths, alice_paths: rx.alice_paths, eve: rx.eve, alice_arrival, eve_arrival })
}

/// Where every echo should land on Bob's map given his timing and carrier estimate.
pub fn truth_table(
    cfg: &OfdmConfig,
    scenario: &Scenario,
    alice_paths: &[PathParams],
    eve: Option<&EveSide>,
    sync: &SyncDecision,
) -> Vec<Truth> {
    let t = cfg.t();
    let frame = cfg.m as f64 * cfg.t_s();
    let s = sync.sync_sample as f64;
    let at = |kind, arrival_s: f64, doppler: f64| Truth { kind, range_bin: arrival_s / t - s, doppler_bin: (doppler - sync.cfo_estimate) * frame };
    let mut out = Vec::new();
    for p in alice_paths {
        let kind = if p.is_los { TruthKind::Reference } else { TruthKind::Real };
        out.push(at(kind, p.delay, p.doppler + scenario.alice_cfo_hz));
    }
    if let Some(e) = eve {
        for (p, g) in e.paths.iter().zip(&e.illumination) {
            if g.norm() < NULLED {
                continue;
            }
            let arrival = e.plan.tx_start + p.delay;
            let doppler = p.doppler + e.plan.cfo;
            out.push(at(if p.is_los { TruthKind::Reference } else { TruthKind::Combined }, arrival, doppler));
            for a in &e.targets {
                let kind = if p.is_los { TruthKind::Artificial } else { TruthKind::Combined };
                out.push(at(kind, arrival + a.delay, doppler + a.doppler));
            }
        }
    }
    out
}

/// Measured per-subcarrier SNR and JNR at Bob, each source demodulated alone at its own arrival.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Calibration {
    pub snr_db: f64,
    pub jnr_db: f64,
}

pub fn measure_calibration(scenario: &Scenario, seed: u64) -> Result<Calibration, HarnessError> {
    let cfg = scenario.ofdm;
    let topo = scenario.topology()?;
    let mut quiet = scenario.clone();
    quiet.alice_cfo_hz = 0.0;
    let strategy = quiet.jammer.as_mut().ok_or_else(|| HarnessError::Config("calibration needs a jammer".into()))?;
    strategy.eve_cfo_hz = 0.0;
    strategy.artificial.clear();
    strategy.mimicry_a3 = None;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rx = receive(&quiet, &topo, 0, &mut rng)?;
    let (eve, jam) = (rx.eve.as_ref().expect("jammer ran"), rx.jam.as_ref().expect("jammer ran"));
    let t = cfg.t();
    let power = |signal: &BasebandSignal<f64>, arrival: f64| -> Result<f64, HarnessError> {
        let g = demodulate_backoff(&cfg, signal, arrival.round() as i64, scenario.backoff())?;
        Ok(g.energy() / (cfg.q * cfg.m) as f64)
    };
    let alice_arrival = rx.alice_paths[0].delay / t;
    let silent = rx.alice.clone().into_windows();
    let silent = BasebandSignal {
        content: PulseContent::Windows(vec![vec![Complex::new(0.0, 0.0); silent.window_len]; silent.pulses()]),
        ..silent
    };
    let noise = add_noise(&silent, rx.noise_std, &mut rng)?;
    let s = power(&rx.alice, alice_arrival)?;
    let j = power(jam, (eve.plan.tx_start + eve.paths[0].delay) / t)?;
    let n = power(&noise, alice_arrival)?;
    Ok(Calibration { snr_db: 10.0 * (s / n).log10(), jnr_db: 10.0 * (j / n).log10() })
}

/// Alignment case implied by the plan alone (before noise and synchronization).
pub fn planned_case(cfg: &OfdmConfig, plan: &JamPlan) -> AlignmentCase {
    classify_alignment(0.0, plan.arrival_offset, cfg)
}
