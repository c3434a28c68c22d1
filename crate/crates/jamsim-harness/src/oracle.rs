//! Sample-level chain versus the closed-form jammed CTF on whole-sample scenes.

use jamsim::channel::{propagate, DopplerPhasor, PropagationSpec};
use jamsim::geometry::{PathParams, ScenarioTopology};
use jamsim::jammer::{
    analytic_jammed_ctf, synthesize_jam_signal, ArtificialTarget, JamPlan, JammedScene, ReceiverModel, SourceModel,
    StrategyConfig, Terms,
};
use jamsim::radar::estimate_ctf;
use jamsim::sync::{classify_alignment, compensate_cfo, AlignmentCase};
use jamsim::waveform::{demodulate_backoff, make_training_grid, modulate};
use jamsim::OfdmConfig;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::HarnessError;

/// Which arrival pattern to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OracleLayout {
    /// Eve leads by one and a half symbols; Alice never reaches Bob's FFT window.
    Preceding,
    /// Both inside the prefix; Alice within ±24 samples of Eve.
    Overlapped,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OracleOutcome {
    pub layout: OracleLayout,
    pub case: AlignmentCase,
    pub seed: u64,
    pub nrmse_db: f64,
}

const BACKOFF: usize = 32;

fn random_path(rng: &mut ChaCha8Rng, cfg: &OfdmConfig, samples: i64, los: bool) -> PathParams {
    let gain = if los { 1.0 } else { rng.gen_range(0.1..0.8) };
    PathParams {
        gain: Complex::from_polar(gain, rng.gen_range(0.0..std::f64::consts::TAU)),
        delay: samples as f64 * cfg.t(),
        doppler: if los { 0.0 } else { rng.gen_range(-200.0..200.0) },
        angle: 0.0,
        departure: 0.0,
        is_los: los,
    }
}

fn random_paths(rng: &mut ChaCha8Rng, cfg: &OfdmConfig, los: i64, max_excess: i64) -> Vec<PathParams> {
    let mut out = vec![random_path(rng, cfg, los, true)];
    for _ in 0..rng.gen_range(1..=3) {
        let excess = rng.gen_range(1..=max_excess);
        out.push(random_path(rng, cfg, los + excess, false));
    }
    out
}

/// Draws one scene, runs both sides and returns the normalized error of the chain against the model.
pub fn oracle_scene(cfg: &OfdmConfig, layout: OracleLayout, seed: u64) -> Result<OracleOutcome, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let training = make_training_grid::<f64>(cfg, seed);
    let eve_los = rng.gen_range(200..400);
    let alice_los = match layout {
        OracleLayout::Preceding => eve_los + (1.5 * cfg.symbol_len() as f64) as i64,
        OracleLayout::Overlapped => eve_los + rng.gen_range(-24..=24),
    };
    let eve_paths = random_paths(&mut rng, cfg, eve_los, 20);
    let alice_paths = random_paths(&mut rng, cfg, alice_los, 8);
    let (eve_cfo, alice_cfo) = (rng.gen_range(-5e3..5e3), rng.gen_range(-4e4..4e4));

    let bin = cfg.doppler_bin_hz();
    let targets: Vec<ArtificialTarget> = (0..rng.gen_range(1..=2))
        .map(|_| ArtificialTarget {
            gain: Complex::from_polar(rng.gen_range(0.1..0.5), rng.gen_range(0.0..std::f64::consts::TAU)),
            delay: rng.gen_range(1..12) as f64 * cfg.t(),
            doppler: rng.gen_range(-20..=20) as f64 * bin,
        })
        .collect();
    let plan = JamPlan { tx_start: 0.0, arrival_offset: 0.0, amplitude: rng.gen_range(1.0..4.0), cfo: eve_cfo };
    let strategy = StrategyConfig::new(0.0);
    let jam = synthesize_jam_signal(cfg, &targets, &training, &strategy, 0, plan, &ScenarioTopology::reference())?;

    let eve_rx = propagate(&jam.signal, &jam.propagation(eve_paths.clone(), 0.0, DopplerPhasor::PerPulse), &mut rng)?;
    let mut link = PropagationSpec::new(alice_paths.clone());
    link.cfo = alice_cfo;
    link.doppler = DopplerPhasor::PerPulse;
    let alice_rx = propagate(&modulate(cfg, &training)?, &link, &mut rng)?;
    let rx = eve_rx.add(&alice_rx)?;

    let r = demodulate_backoff(cfg, &compensate_cfo(&rx, eve_cfo), eve_los, BACKOFF)?;
    let measured = estimate_ctf(&r, &training)?;

    let alice_terms: Terms<f64> = vec![(training.col(0).to_vec(), vec![Complex::new(1.0, 0.0); cfg.m])];
    let scene = JammedScene {
        training: &training,
        eve: SourceModel { terms: &jam.terms, paths: &eve_paths, tx_start: 0.0, cfo: eve_cfo },
        alice: SourceModel { terms: &alice_terms, paths: &alice_paths, tx_start: 0.0, cfo: alice_cfo },
        receiver: ReceiverModel { sync_sample: eve_los, cfo_estimate: eve_cfo, backoff: BACKOFF },
    };
    let t = cfg.t();
    let case = classify_alignment(alice_los as f64 * t, eve_los as f64 * t, cfg);
    let model = analytic_jammed_ctf(cfg, &scene, case)?;
    let nrmse_db = 20.0 * measured.rel_error(&model).log10();
    Ok(OracleOutcome { layout, case, seed, nrmse_db })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> OfdmConfig {
        OfdmConfig { q: 128, q_cp: 64, m: 16, pri_symbols: 6, ..OfdmConfig::default() }
    }

    #[test]
    fn small_scenes_agree() {
        for (i, layout) in [OracleLayout::Preceding, OracleLayout::Overlapped].into_iter().enumerate() {
            let o = oracle_scene(&small(), layout, 40 + i as u64).unwrap();
            assert!(o.nrmse_db < -100.0, "{o:?}");
        }
    }
}
