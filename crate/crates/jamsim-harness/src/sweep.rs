//! Monte Carlo sweeps. Every trial draws from its own seed, so results do not depend on
//! how trials are spread over workers.

use jamsim::geometry::{bistatic_delay, bistatic_doppler, Target};
use jamsim::jammer::{InjectMode, InvalidateMode};
use jamsim::radar::{associate, os_cfar_multi, Association};
use jamsim::sync::LockedTo;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{run_snapshot_with, simulate};
use crate::scenario::Scenario;
use crate::stats::{trial_seed, wilson};
use crate::HarnessError;

/// Real-target speeds are drawn uniformly up to this, in a uniform direction.
pub const MAX_TARGET_SPEED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub trials: usize,
    pub base_seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl SweepOptions {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials per point must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scored result of one trial for one series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Outcome {
    pub real_detected: usize,
    pub real_total: usize,
    pub artificial_detected: usize,
    pub artificial_total: usize,
    pub count: usize,
    pub locked_to_eve: bool,
    pub infeasible: bool,
}

impl Outcome {
    fn from_association(a: &Association, locked: LockedTo) -> Self {
        Self {
            real_detected: a.real_detected,
            real_total: a.real_total,
            artificial_detected: a.artificial_detected,
            artificial_total: a.artificial_total,
            count: a.count,
            locked_to_eve: locked == LockedTo::Eve,
            infeasible: false,
        }
    }

    fn infeasible() -> Self {
        Self { infeasible: true, ..Self::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub point: usize,
    pub trial: usize,
    pub seed: u64,
    pub x: f64,
    pub series: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub series: String,
    pub x: f64,
    pub trials: usize,
    pub infeasible: usize,
    pub real_detected: usize,
    pub real_total: usize,
    pub artificial_detected: usize,
    pub artificial_total: usize,
    pub pd_real: Option<f64>,
    pub pd_real_ci: Option<(f64, f64)>,
    pub pd_artificial: Option<f64>,
    pub pd_artificial_ci: Option<(f64, f64)>,
    pub mdr_real: Option<f64>,
    pub mdr_real_ci: Option<(f64, f64)>,
    pub dr_artificial: Option<f64>,
    pub dr_artificial_ci: Option<(f64, f64)>,
    pub mean_detection_count: Option<f64>,
    pub mean_detection_count_ci: Option<(f64, f64)>,
    pub expected_count: Option<f64>,
    pub locked_to_eve: usize,
}

impl SweepPoint {
    fn aggregate(series: &str, x: f64, expected_count: Option<f64>, outcomes: &[Outcome]) -> Self {
        let ok: Vec<&Outcome> = outcomes.iter().filter(|o| !o.infeasible).collect();
        let sum = |f: fn(&Outcome) -> usize| ok.iter().map(|o| f(o)).sum::<usize>();
        let (rd, rt) = (sum(|o| o.real_detected), sum(|o| o.real_total));
        let (ad, at) = (sum(|o| o.artificial_detected), sum(|o| o.artificial_total));
        let rate = |h: usize, n: usize| (n > 0).then(|| h as f64 / n as f64);
        let n = ok.len();
        let (mean, mean_ci) = if n == 0 {
            (None, None)
        } else {
            let mean = sum(|o| o.count) as f64 / n as f64;
            let var = if n > 1 {
                ok.iter().map(|o| (o.count as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let half = 1.959_963_984_540_054 * (var / n as f64).sqrt();
            (Some(mean), Some((mean - half, mean + half)))
        };
        Self {
            series: series.to_string(),
            x,
            trials: outcomes.len(),
            infeasible: outcomes.len() - n,
            real_detected: rd,
            real_total: rt,
            artificial_detected: ad,
            artificial_total: at,
            pd_real: rate(rd, rt),
            pd_real_ci: wilson(rd, rt),
            pd_artificial: rate(ad, at),
            pd_artificial_ci: wilson(ad, at),
            mdr_real: rate(rt - rd, rt),
            mdr_real_ci: wilson(rt - rd, rt),
            dr_artificial: rate(ad, at),
            dr_artificial_ci: wilson(ad, at),
            mean_detection_count: mean,
            mean_detection_count_ci: mean_ci,
            expected_count,
            locked_to_eve: ok.iter().filter(|o| o.locked_to_eve).count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    PdVsCfo,
    PdVsJsr,
    MdrDr,
    Overcrowding,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Self::PdVsCfo => "pd_vs_cfo",
            Self::PdVsJsr => "pd_vs_jsr",
            Self::MdrDr => "mdr_dr",
            Self::Overcrowding => "overcrowding",
        }
    }

    pub fn x_label(self) -> &'static str {
        match self {
            Self::PdVsCfo => "cfo_ppm",
            Self::PdVsJsr | Self::MdrDr => "jsr_db",
            Self::Overcrowding => "n_targets",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub figure: Figure,
    pub points: Vec<SweepPoint>,
    #[serde(skip)]
    pub trials: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn point(&self, series: &str, x: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.series == series && p.x == x)
    }

    pub fn series(&self, series: &str) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.series == series).collect()
    }
}

/// One sweep point: its x value, and the series names its trials report into.
struct PointPlan {
    x: f64,
    series: Vec<String>,
    expected: Option<f64>,
    /// CFO-difference range drawn per trial, ppm.
    cfo_ppm: (f64, f64),
    scenario: Scenario,
}

fn run<F>(figure: Figure, plans: Vec<PointPlan>, opts: &SweepOptions, trial: F) -> Result<SweepResult, HarnessError>
where
    F: Fn(&PointPlan, &mut ChaCha8Rng) -> Result<Vec<Outcome>, HarnessError> + Sync,
{
    opts.validate()?;
    let jobs: Vec<(usize, usize)> = (0..plans.len()).flat_map(|p| (0..opts.trials).map(move |t| (p, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<Vec<Outcome>, HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, t)| {
                let plan = &plans[p];
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(opts.base_seed, p, t));
                match trial(plan, &mut rng) {
                    Err(HarnessError::Infeasible(_)) => Ok(vec![Outcome::infeasible(); plan.series.len()]),
                    r => r,
                }
            })
            .collect()
    });
    let mut per_point: Vec<Vec<Vec<Outcome>>> = plans.iter().map(|s| vec![Vec::new(); s.series.len()]).collect();
    let mut records = Vec::with_capacity(jobs.len());
    for (&(p, t), r) in jobs.iter().zip(results) {
        let outcomes = r?;
        for (k, o) in outcomes.into_iter().enumerate() {
            per_point[p][k].push(o);
            records.push(TrialRecord {
                point: p,
                trial: t,
                seed: trial_seed(opts.base_seed, p, t),
                x: plans[p].x,
                series: plans[p].series[k].clone(),
                outcome: o,
            });
        }
    }
    let mut points = Vec::new();
    for (plan, outs) in plans.iter().zip(&per_point) {
        for (name, o) in plan.series.iter().zip(outs) {
            points.push(SweepPoint::aggregate(name, plan.x, plan.expected, o));
        }
    }
    Ok(SweepResult { figure, points, trials: records })
}

/// Every topology target gets a uniform speed up to [`MAX_TARGET_SPEED`] in a uniform direction.
/// Draws that would put a target inside the direct path's peak on Bob's map are redrawn, since
/// such a target is unresolvable with or without a jammer.
pub fn randomize_speeds<R: Rng>(scenario: &mut Scenario, rng: &mut R) {
    let cfg = scenario.ofdm;
    let frame = cfg.m as f64 * cfg.t_s();
    let topo = &mut scenario.topology;
    let los = bistatic_delay(topo.alice, topo.bob, None);
    for t in &mut topo.targets {
        let range = (bistatic_delay(topo.alice, topo.bob, Some(t.pos)) - los) / cfg.t();
        for _ in 0..SPEED_ATTEMPTS {
            let speed = rng.gen_range(0.0..=MAX_TARGET_SPEED);
            let heading = rng.gen_range(0.0..std::f64::consts::TAU);
            t.vel = [speed * heading.cos(), speed * heading.sin()];
            let bins = (bistatic_doppler(topo.alice, topo.bob, t, cfg.f_c) * frame).rem_euclid(cfg.m as f64);
            if range >= RESOLVABLE_BINS || bins.min(cfg.m as f64 - bins) >= RESOLVABLE_BINS {
                break;
            }
        }
    }
}

const SPEED_ATTEMPTS: usize = 1000;

fn random_sign<R: Rng>(rng: &mut R) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn single_trial(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<Vec<Outcome>, HarnessError> {
    let snap = run_snapshot_with(scenario, 0, rng)?;
    Ok(vec![Outcome::from_association(&snap.association, snap.sync.locked_to)])
}

/// Detection probability against the Alice–Eve CFO difference, ppm of the carrier.
/// Speeds are redrawn and the sign of the split is random in each trial.
pub fn sweep_pd_vs_cfo(base: &Scenario, series: &str, ppm: &[f64], opts: &SweepOptions) -> Result<SweepResult, HarnessError> {
    base.validate()?;
    base.strategy()?;
    check_values(ppm)?;
    let plans = ppm
        .iter()
        .map(|&x| PointPlan { x, series: vec![series.to_string()], expected: None, cfo_ppm: (x, x), scenario: base.clone() })
        .collect();
    run(Figure::PdVsCfo, plans, opts, |plan, rng| {
        let mut s = plan.scenario.clone();
        randomize_speeds(&mut s, rng);
        let delta = s.ofdm.ppm_to_hz(plan.x);
        s.set_cfo_difference(delta, random_sign(rng))?;
        single_trial(&s, rng)
    })
}

fn jsr_plans(base: &Scenario, region: &str, jsr: &[f64]) -> Result<Vec<PointPlan>, HarnessError> {
    let (lo, hi) = base.cfo_regions.get(region).ok_or_else(|| HarnessError::Config(format!("unknown cfo region {region:?}")))?;
    Ok(jsr
        .iter()
        .map(|&x| {
            let mut s = base.clone();
            s.strategy_mut().expect("checked").jsr_db = x;
            PointPlan { x, series: vec![region.to_string()], expected: None, cfo_ppm: (lo, hi), scenario: s }
        })
        .collect())
}

fn jsr_trial(plan: &PointPlan, rng: &mut ChaCha8Rng) -> Result<Vec<Outcome>, HarnessError> {
    let mut s = plan.scenario.clone();
    randomize_speeds(&mut s, rng);
    let (lo, hi) = plan.cfo_ppm;
    let ppm = rng.gen_range(lo..=hi);
    let delta = s.ofdm.ppm_to_hz(ppm);
    s.set_cfo_difference(delta, random_sign(rng))?;
    single_trial(&s, rng)
}

/// Detection probability against JSR with the CFO difference drawn from one region.
pub fn sweep_pd_vs_jsr(base: &Scenario, region: &str, jsr: &[f64], opts: &SweepOptions) -> Result<SweepResult, HarnessError> {
    base.validate()?;
    base.strategy()?;
    check_values(jsr)?;
    run(Figure::PdVsJsr, jsr_plans(base, region, jsr)?, opts, jsr_trial)
}

/// Missed-detection rate of real targets and detection rate of artificial ones, per CFO region.
pub fn sweep_mdr_dr(base: &Scenario, jsr: &[f64], opts: &SweepOptions) -> Result<SweepResult, HarnessError> {
    base.validate()?;
    base.strategy()?;
    check_values(jsr)?;
    let mut plans = Vec::new();
    for region in ["low", "med", "high"] {
        plans.extend(jsr_plans(base, region, jsr)?);
    }
    run(Figure::MdrDr, plans, opts, jsr_trial)
}

/// Side of the square, centred between the devices, that random scatterers are drawn from, m.
pub const ROOM_SIZE: f64 = 20.0;
/// Fresh layouts tried per trial, and draws per layout before it is abandoned.
const LAYOUT_RESTARTS: usize = 200;
const LAYOUT_ATTEMPTS: usize = 200;
/// Truth cells closer than this on both axes are not counted as separate peaks: a Blackman
/// mainlobe half-width (3) plus the CFAR guard (2), so a weak peak next to a strong
/// one is still a guard-region maximum.
const RESOLVABLE_BINS: f64 = 5.0;

/// Overcrowding with preceding jamming at 10 dB JSR: `n` random scatterers, several false-alarm rates.
pub fn sweep_overcrowding(base: &Scenario, n_targets: &[usize], pfas: &[f64], opts: &SweepOptions) -> Result<SweepResult, HarnessError> {
    base.validate()?;
    if pfas.is_empty() || pfas.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(HarnessError::Config("pfa values must lie in (0, 1)".into()));
    }
    let mut scenario = base.clone();
    {
        let j = scenario.strategy_mut()?;
        j.inject_mode = InjectMode::OvercrowdA1;
        j.invalidate_mode = InvalidateMode::PrecedingB1;
        j.jsr_db = 10.0;
    }
    let n_art = scenario.strategy()?.artificial.len() + scenario.strategy()?.mimicry_a3.is_some() as usize;
    let series: Vec<String> = pfas.iter().map(|p| format!("pfa={p:e}")).collect();
    let plans = n_targets
        .iter()
        .map(|&l| PointPlan {
            x: l as f64,
            series: series.clone(),
            expected: Some(((l + 1) * (n_art + 1)) as f64),
            cfo_ppm: (0.0, 0.0),
            scenario: scenario.clone(),
        })
        .collect();
    let pfas = pfas.to_vec();
    run(Figure::Overcrowding, plans, opts, move |plan, rng| {
        let mut s = plan.scenario.clone();
        s.topology.targets = resolvable_scatterers(&s, plan.x as usize, rng)?;
        let sim = simulate(&s, 0, rng)?;
        let (q, m) = sim.rdm.values.shape();
        let per_pfa = os_cfar_multi(&sim.rdm.power(), q, m, &s.cfar, &pfas)?;
        Ok(per_pfa
            .iter()
            .map(|d| Outcome::from_association(&associate(d, &sim.truths, s.tolerance, (q, m)), sim.sync.locked_to))
            .collect())
    })
}

/// `n` scatterers whose Eve-side peaks, and the artificial copies of them, are pairwise resolvable.
pub fn resolvable_scatterers<R: Rng>(scenario: &Scenario, n: usize, rng: &mut R) -> Result<Vec<Target>, HarnessError> {
    let cfg = scenario.ofdm;
    let topo = &scenario.topology;
    let t = cfg.t();
    let frame = cfg.m as f64 * cfg.t_s();
    let arts: Vec<(f64, f64)> = scenario
        .strategy()?
        .artificial
        .iter()
        .map(|p| {
            let a = p.target(&cfg);
            (a.delay / t, a.doppler * frame)
        })
        .collect();
    let (cx, cy) = ((topo.alice[0] + topo.bob[0] + topo.eve[0]) / 3.0, (topo.alice[1] + topo.bob[1] + topo.eve[1]) / 3.0);
    let los = bistatic_delay(topo.eve, topo.bob, None);
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let push = |cells: &mut Vec<(f64, f64)>, c: (f64, f64)| {
        cells.push(c);
        for a in &arts {
            cells.push((c.0 + a.0, c.1 + a.1));
        }
    };
    push(&mut cells, (0.0, 0.0));
    let base = cells;
    for _ in 0..LAYOUT_RESTARTS {
        let mut cells = base.clone();
        let mut out = Vec::with_capacity(n);
        for _ in 0..LAYOUT_ATTEMPTS {
            if out.len() == n {
                break;
            }
            let pos = [cx + rng.gen_range(-0.5..0.5) * ROOM_SIZE, cy + rng.gen_range(-0.5..0.5) * ROOM_SIZE];
            let mut target = Target::stationary(pos, 0.1);
            let speed = rng.gen_range(0.0..=MAX_TARGET_SPEED);
            let heading = rng.gen_range(0.0..std::f64::consts::TAU);
            target.vel = [speed * heading.cos(), speed * heading.sin()];
            let near = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]) < 1.0;
            if near(pos, topo.alice) || near(pos, topo.bob) || near(pos, topo.eve) {
                continue;
            }
            let cell = (
                (bistatic_delay(topo.eve, topo.bob, Some(pos)) - los) / t,
                bistatic_doppler(topo.eve, topo.bob, &target, cfg.f_c) * frame,
            );
            let mut trial = cells.clone();
            push(&mut trial, cell);
            let fresh = &trial[cells.len()..];
            let apart = |a: &(f64, f64), b: &(f64, f64)| {
                let dr = (a.0 - b.0).abs();
                let dd = (a.1 - b.1).rem_euclid(cfg.m as f64);
                dr >= RESOLVABLE_BINS || dd.min(cfg.m as f64 - dd) >= RESOLVABLE_BINS
            };
            let ok = fresh.iter().enumerate().all(|(i, a)| trial[..cells.len() + i].iter().all(|b| apart(a, b)))
                && cell.0 < (cfg.q_cp / 2) as f64;
            if ok {
                cells = trial;
                out.push(target);
            }
        }
        if out.len() == n {
            return Ok(out);
        }
    }
    Err(HarnessError::Config(format!("could not place {n} resolvable scatterers in a {ROOM_SIZE} m room")))
}

fn check_values(values: &[f64]) -> Result<(), HarnessError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::Config("sweep values must be finite".into()));
    }
    Ok(())
}
