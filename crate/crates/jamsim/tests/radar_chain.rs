//! The library chain end to end, without the harness: geometry to detections.

use jamsim::channel::{propagate, PropagationSpec};
use jamsim::geometry::{build_paths, ScenarioTopology};
use jamsim::radar::{compute_rdm, estimate_ctf, os_cfar, read_rdm, CfarConfig, Window};
use jamsim::sync::{compensate_cfo, synchronize, SyncConfig};
use jamsim::waveform::{demodulate_backoff, make_training_grid, modulate};
use jamsim::{Grid, OfdmConfig, Real};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BACKOFF: usize = 32;

/// Clean reference scene through Bob's whole receiver in precision `T`.
fn rdm_for<T: Real>(cfg: &OfdmConfig, cfo: f64) -> (jamsim::radar::Rdm<T>, i64) {
    let topo = ScenarioTopology::reference();
    let paths = build_paths(topo.alice, topo.bob, &topo.targets, cfg.f_c).unwrap();
    let s: Grid<T> = make_training_grid(cfg, 7);
    let mut link = PropagationSpec::new(paths);
    link.cfo = cfo;
    let rx = propagate(&modulate(cfg, &s).unwrap(), &link, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let sync = synchronize(cfg, &rx, &SyncConfig::default(), &[]).unwrap();
    let r = demodulate_backoff(cfg, &compensate_cfo(&rx, sync.cfo_estimate), sync.sync_sample, BACKOFF).unwrap();
    let ctf = estimate_ctf(&r, &s).unwrap();
    (compute_rdm(cfg, &ctf, Window::Blackman, Window::Blackman), sync.sync_sample)
}

fn truth_cells(cfg: &OfdmConfig) -> Vec<(f64, f64)> {
    let topo = ScenarioTopology::reference();
    let paths = build_paths(topo.alice, topo.bob, &topo.targets, cfg.f_c).unwrap();
    let frame = cfg.m as f64 * cfg.t_s();
    paths.iter().map(|p| ((p.delay - paths[0].delay) / cfg.t(), p.doppler * frame)).collect()
}

fn hits(cfg: &OfdmConfig, rdm: &jamsim::radar::Rdm<f64>) -> Vec<bool> {
    let det = os_cfar(rdm, &CfarConfig::default()).unwrap();
    let (q, m) = (cfg.q as f64, cfg.m as f64);
    let wrap = |d: f64, n: f64| {
        let d = d.rem_euclid(n);
        d.min(n - d)
    };
    truth_cells(cfg)
        .iter()
        .map(|&(r, d)| det.iter().any(|x| wrap(x.range_bin as f64 - r, q) <= 1.0 && wrap(x.doppler_bin as f64 - d, m) <= 1.0))
        .collect()
}

#[test]
fn reference_scene_shows_direct_path_and_target() {
    let cfg = OfdmConfig::wide_spacing();
    let (rdm, _) = rdm_for::<f64>(&cfg, 3_000.0);
    assert_eq!(hits(&cfg, &rdm), vec![true, true]);
}

#[test]
fn single_precision_chain_finds_the_same_peaks() {
    let cfg = OfdmConfig::wide_spacing();
    let (a, sa) = rdm_for::<f64>(&cfg, 0.0);
    let (b, sb) = rdm_for::<f32>(&cfg, 0.0);
    assert_eq!(sa, sb);
    let widened = jamsim::radar::Rdm { values: b.values.cast::<f64>(), range_bin_m: b.range_bin_m, speed_bin_mps: b.speed_bin_mps, window: b.window };
    // Peaks within 50 dB of the strongest; the noiseless floor below that is rounding.
    let strong = |r: &jamsim::radar::Rdm<f64>| {
        let d = os_cfar(r, &CfarConfig::default()).unwrap();
        let top = d.iter().map(|d| d.magnitude).fold(0.0, f64::max);
        d.iter().filter(|d| d.magnitude > 3e-3 * top).map(|d| (d.range_bin, d.doppler_bin)).collect::<Vec<_>>()
    };
    let d64 = strong(&a);
    assert!(d64.len() >= 2);
    assert_eq!(d64, strong(&widened));
    assert!(widened.values.rel_error(&a.values) < 1e-4);
}

#[test]
fn rdm_file_round_trip() {
    let cfg = OfdmConfig::wide_spacing();
    let (rdm, _) = rdm_for::<f64>(&cfg, 0.0);
    let dir = tempfile::tempdir().unwrap();
    let (data, side) = (dir.path().join("rdm.f32"), dir.path().join("rdm.json"));
    rdm.export(&data, &side).unwrap();
    let (meta, values) = read_rdm(&data, &side).unwrap();
    assert_eq!((meta.q, meta.m), (cfg.q, cfg.m));
    assert_eq!(values, rdm.centered_db());
}
