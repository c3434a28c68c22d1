//! Planar topology, bistatic path parameters and round-trip-time ranging.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Vec2 = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("devices {0} and {1} are co-located")]
    CoLocated(&'static str, &'static str),
    #[error("target {index}: rcs must be positive, got {rcs}")]
    BadRcs { index: usize, rcs: f64 },
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("target {index} has the same bistatic delay as the direct path")]
    DelayTie { index: usize },
    #[error("transmitter and receiver are the same point")]
    SameEndpoints,
    #[error("rtt measurements out of order: {0:?}")]
    RttOrder([f64; 4]),
    #[error("idle time must be positive, got {0}")]
    RttIdle(f64),
    #[error("inconsistent rtt measurements: {name} = {value}")]
    RttNegative { name: &'static str, value: f64 },
}

fn dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn finite(p: Vec2) -> bool {
    p[0].is_finite() && p[1].is_finite()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub pos: Vec2,
    pub vel: Vec2,
    pub rcs: f64,
}

impl Target {
    pub fn stationary(pos: Vec2, rcs: f64) -> Self {
        Self { pos, vel: [0.0, 0.0], rcs }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTopology {
    pub alice: Vec2,
    pub bob: Vec2,
    pub eve: Vec2,
    pub targets: Vec<Target>,
    /// Linear power scale of Eve's transmitter relative to Alice's.
    pub eve_tx_power_gain: f64,
}

/// On-disk scenario layout (meters, m/s, m², dB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDoc {
    pub alice: Vec2,
    pub bob: Vec2,
    pub eve: Vec2,
    #[serde(default)]
    pub targets: Vec<Target>,
    #[serde(default)]
    pub eve_power_gain_db: f64,
}

impl ScenarioTopology {
    pub fn new(
        alice: Vec2,
        bob: Vec2,
        eve: Vec2,
        targets: Vec<Target>,
        eve_tx_power_gain: f64,
    ) -> Result<Self, GeometryError> {
        let t = Self { alice, bob, eve, targets, eve_tx_power_gain };
        t.validate()?;
        Ok(t)
    }

    /// Table-style reference layout: Alice 10 m from Bob, Eve and one moving target 11 m out.
    pub fn reference() -> Self {
        Self {
            alice: [10.0, 0.0],
            bob: [0.0, 0.0],
            eve: [5.0, 10.0],
            targets: vec![Target { pos: [5.0, 10.0], vel: [-3.0, -3.0], rcs: 0.1 }],
            eve_tx_power_gain: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, p) in [("alice", self.alice), ("bob", self.bob), ("eve", self.eve)] {
            if !finite(p) {
                return Err(GeometryError::NonFinite(name));
            }
        }
        for (a, an, b, bn) in [
            (self.alice, "alice", self.bob, "bob"),
            (self.alice, "alice", self.eve, "eve"),
            (self.bob, "bob", self.eve, "eve"),
        ] {
            if dist(a, b) <= 0.0 {
                return Err(GeometryError::CoLocated(an, bn));
            }
        }
        for (index, t) in self.targets.iter().enumerate() {
            if !finite(t.pos) || !finite(t.vel) {
                return Err(GeometryError::NonFinite("target"));
            }
            if !(t.rcs > 0.0) {
                return Err(GeometryError::BadRcs { index, rcs: t.rcs });
            }
        }
        Ok(())
    }

    pub fn from_doc(doc: &TopologyDoc) -> Result<Self, GeometryError> {
        Self::new(
            doc.alice,
            doc.bob,
            doc.eve,
            doc.targets.clone(),
            10f64.powf(doc.eve_power_gain_db / 10.0),
        )
    }

    pub fn to_doc(&self) -> TopologyDoc {
        TopologyDoc {
            alice: self.alice,
            bob: self.bob,
            eve: self.eve,
            targets: self.targets.clone(),
            eve_power_gain_db: 10.0 * self.eve_tx_power_gain.log10(),
        }
    }
}

/// Total path length over c. `point = None` is the direct path.
pub fn bistatic_delay(tx: Vec2, rx: Vec2, point: Option<Vec2>) -> f64 {
    match point {
        Some(p) => (dist(tx, p) + dist(p, rx)) / SPEED_OF_LIGHT,
        None => dist(tx, rx) / SPEED_OF_LIGHT,
    }
}

/// Rate of change of the bistatic path length, m/s.
pub fn bistatic_range_rate(tx: Vec2, rx: Vec2, target: &Target) -> f64 {
    let leg = |from: Vec2| {
        let d = [target.pos[0] - from[0], target.pos[1] - from[1]];
        let n = d[0].hypot(d[1]);
        if n == 0.0 {
            0.0
        } else {
            (d[0] * target.vel[0] + d[1] * target.vel[1]) / n
        }
    };
    leg(tx) + leg(rx)
}

/// Positive for a shrinking bistatic path.
pub fn bistatic_doppler(tx: Vec2, rx: Vec2, target: &Target, f_c: f64) -> f64 {
    -f_c / SPEED_OF_LIGHT * bistatic_range_rate(tx, rx, target)
}

/// Free-space direct-path gain, or bistatic radar-equation gain when `scatter = Some((point, rcs))`.
pub fn path_gain(tx: Vec2, rx: Vec2, scatter: Option<(Vec2, f64)>, f_c: f64) -> Complex<f64> {
    let lambda = SPEED_OF_LIGHT / f_c;
    let four_pi = 4.0 * std::f64::consts::PI;
    let (mag, delay) = match scatter {
        None => (lambda / (four_pi * dist(tx, rx)), bistatic_delay(tx, rx, None)),
        Some((p, rcs)) => (
            lambda * rcs.sqrt() / (four_pi.powf(1.5) * dist(tx, p) * dist(p, rx)),
            bistatic_delay(tx, rx, Some(p)),
        ),
    };
    Complex::from_polar(mag, carrier_phase(delay, f_c))
}

/// `-2π·delay·f_c`, reduced before the trig call to keep precision for long delays.
pub fn carrier_phase(delay: f64, f_c: f64) -> f64 {
    let cycles = delay * f_c;
    -2.0 * std::f64::consts::PI * (cycles - cycles.round())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub gain: Complex<f64>,
    /// Absolute bistatic delay, seconds.
    pub delay: f64,
    pub doppler: f64,
    /// Arrival angle at the receiver, radians from +x.
    pub angle: f64,
    /// Departure angle at the transmitter, radians from +x.
    pub departure: f64,
    pub is_los: bool,
}

fn bearing(from: Vec2, to: Vec2) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Direct path first, then one path per target, sorted by delay.
pub fn build_paths(
    tx: Vec2,
    rx: Vec2,
    targets: &[Target],
    f_c: f64,
) -> Result<Vec<PathParams>, GeometryError> {
    if dist(tx, rx) == 0.0 {
        return Err(GeometryError::SameEndpoints);
    }
    let los_delay = bistatic_delay(tx, rx, None);
    let mut paths = vec![PathParams {
        gain: path_gain(tx, rx, None, f_c),
        delay: los_delay,
        doppler: 0.0,
        angle: bearing(rx, tx),
        departure: bearing(tx, rx),
        is_los: true,
    }];
    let mut scattered = Vec::with_capacity(targets.len());
    for (index, t) in targets.iter().enumerate() {
        let delay = bistatic_delay(tx, rx, Some(t.pos));
        if delay <= los_delay {
            return Err(GeometryError::DelayTie { index });
        }
        scattered.push(PathParams {
            gain: path_gain(tx, rx, Some((t.pos, t.rcs)), f_c),
            delay,
            doppler: bistatic_doppler(tx, rx, t, f_c),
            angle: bearing(rx, t.pos),
            departure: bearing(tx, t.pos),
            is_los: false,
        });
    }
    scattered.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    paths.extend(scattered);
    Ok(paths)
}

/// Reception times on Eve's clock, which reads zero at Alice's first transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttMeasurements {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub tau_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveRanging {
    pub tau_abx: f64,
    pub tau_be: f64,
    pub tau_ae: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegitRanging {
    pub alice_estimate: f64,
    pub bob_estimate: f64,
}

/// What Eve overhears while Alice and Bob alternate with idle time `tau_x`.
pub fn rtt_timeline(tau_ab: f64, tau_be: f64, tau_ae: f64, tau_x: f64) -> RttMeasurements {
    let abx = tau_ab + tau_x;
    RttMeasurements {
        c1: abx + tau_be,
        c2: 2.0 * abx + tau_ae,
        c3: 3.0 * abx + tau_be,
        c4: 4.0 * abx + tau_ae,
        tau_x,
    }
}

pub fn rtt_eavesdrop(meas: &RttMeasurements) -> Result<EveRanging, GeometryError> {
    let RttMeasurements { c1, c2, c3, c4, tau_x } = *meas;
    if !(c1 < c2 && c2 < c3 && c3 < c4) {
        return Err(GeometryError::RttOrder([c1, c2, c3, c4]));
    }
    if !(tau_x > 0.0) {
        return Err(GeometryError::RttIdle(tau_x));
    }
    let out = EveRanging {
        tau_abx: (c3 - c1) / 2.0,
        tau_be: (3.0 * c1 - c3) / 2.0,
        tau_ae: c2 - c3 + c1,
    };
    for (name, value) in [("tau_abx", out.tau_abx), ("tau_be", out.tau_be), ("tau_ae", out.tau_ae)] {
        if !(value > 0.0) {
            return Err(GeometryError::RttNegative { name, value });
        }
    }
    Ok(out)
}

/// Noiseless two-way exchange; each side removes its known idle time.
pub fn rtt_legitimate(tau_ab: f64, tau_x: f64) -> LegitRanging {
    // Alice: her transmission at 0 comes back at 2τ_ab + τ_x.
    let alice_rx = 2.0 * tau_ab + tau_x;
    let alice_estimate = (alice_rx - tau_x) / 2.0;
    // Bob starts his clock on the first reception and hears Alice again after 2τ_ab + 2τ_x.
    let bob_rx = (3.0 * tau_ab + 2.0 * tau_x) - tau_ab;
    let bob_estimate = (bob_rx - 2.0 * tau_x) / 2.0;
    LegitRanging { alice_estimate, bob_estimate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn delay_examples() {
        assert!(close(bistatic_delay([10.0, 0.0], [0.0, 0.0], None), 33.356_409_5e-9, 1e-8));
        let d = bistatic_delay([10.0, 0.0], [0.0, 0.0], Some([5.0, 10.0]));
        assert!(close(d, 2.0 * 125f64.sqrt() / SPEED_OF_LIGHT, 1e-14));
        assert!((d - 74.587e-9).abs() < 0.01e-9);
        assert!(close(bistatic_delay([0.0, 0.0], [0.0, 0.0], Some([3.0, 4.0])), 10.0 / SPEED_OF_LIGHT, 1e-14));
    }

    // Independent oracle: differentiate the path length numerically.
    fn doppler_by_differencing(tx: Vec2, rx: Vec2, t: &Target, f_c: f64) -> f64 {
        let h = 1e-6;
        let at = |s: f64| {
            let p = [t.pos[0] + t.vel[0] * s, t.pos[1] + t.vel[1] * s];
            dist(tx, p) + dist(p, rx)
        };
        -f_c / SPEED_OF_LIGHT * (at(h) - at(-h)) / (2.0 * h)
    }

    #[test]
    fn reference_target_doppler() {
        let t = Target { pos: [5.0, 10.0], vel: [-3.0, -3.0], rcs: 0.1 };
        let rate = bistatic_range_rate([10.0, 0.0], [0.0, 0.0], &t);
        assert!((rate - -5.3666).abs() < 1e-4);
        let f = bistatic_doppler([10.0, 0.0], [0.0, 0.0], &t, 5e9);
        assert!((f - 89.51).abs() < 0.01, "{f}");
        assert!(close(f, doppler_by_differencing([10.0, 0.0], [0.0, 0.0], &t, 5e9), 1e-6));
        assert_eq!(bistatic_doppler([10.0, 0.0], [0.0, 0.0], &Target::stationary([5.0, 10.0], 1.0), 5e9), 0.0);
    }

    #[test]
    fn perpendicular_motion_has_no_doppler() {
        // Target on the bisector, moving along the baseline direction.
        let t = Target { pos: [5.0, 10.0], vel: [2.0, 0.0], rcs: 1.0 };
        assert!(bistatic_doppler([10.0, 0.0], [0.0, 0.0], &t, 5e9).abs() < 1e-9);
    }

    #[test]
    fn gain_examples() {
        let g = path_gain([10.0, 0.0], [0.0, 0.0], None, 5e9);
        let lambda = SPEED_OF_LIGHT / 5e9;
        assert!((lambda - 0.059_958_5).abs() < 1e-7);
        assert!((g.norm() - 4.772e-4).abs() < 5e-7);
        let near = path_gain([1.0, 0.0], [-1.0, 0.0], Some(([0.0, 3.0], 1.0)), 5e9).norm();
        let far = path_gain([2.0, 0.0], [-2.0, 0.0], Some(([0.0, 6.0], 1.0)), 5e9).norm();
        assert!(close(far, near / 4.0, 1e-12));
        // Integer cycle count gives zero phase.
        assert_eq!(carrier_phase(3.0 / 5e9, 5e9), 0.0);
    }

    #[test]
    fn reference_paths() {
        let topo = ScenarioTopology::reference();
        let p = build_paths(topo.alice, topo.bob, &topo.targets, 5e9).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p[0].is_los && p[0].doppler == 0.0);
        let excess = p[1].delay - p[0].delay;
        assert!((excess - 41.23e-9).abs() < 0.02e-9, "{excess}");
        assert!((excess * SPEED_OF_LIGHT - 12.36).abs() < 0.01);
        assert_eq!(build_paths(topo.alice, topo.bob, &[], 5e9).unwrap().len(), 1);
        // Eve sitting on the target: the scattered path is exactly as long as the direct one.
        assert_eq!(
            build_paths(topo.eve, topo.bob, &topo.targets, 5e9),
            Err(GeometryError::DelayTie { index: 0 })
        );
    }

    #[test]
    fn delay_tie_rejected() {
        let t = Target::stationary([5.0, 0.0], 1.0);
        assert_eq!(
            build_paths([10.0, 0.0], [0.0, 0.0], &[t], 5e9),
            Err(GeometryError::DelayTie { index: 0 })
        );
    }

    #[test]
    fn topology_validation() {
        assert!(ScenarioTopology::reference().validate().is_ok());
        let bad = ScenarioTopology::new([0.0, 0.0], [0.0, 0.0], [1.0, 1.0], vec![], 1.0);
        assert!(matches!(bad, Err(GeometryError::CoLocated("alice", "bob"))));
        let bad = ScenarioTopology::new([1.0, 0.0], [0.0, 0.0], [1.0, 1.0], vec![Target::stationary([3.0, 3.0], 0.0)], 1.0);
        assert!(matches!(bad, Err(GeometryError::BadRcs { .. })));
    }

    #[test]
    fn rtt_examples() {
        let m = RttMeasurements { c1: 12.0, c2: 23.0, c3: 32.0, c4: 43.0, tau_x: 1.0 };
        let r = rtt_eavesdrop(&m).unwrap();
        assert_eq!((r.tau_abx, r.tau_be, r.tau_ae), (10.0, 2.0, 3.0));
        let tau = 7.0;
        let sym = rtt_timeline(tau, tau, tau, 0.0);
        assert_eq!((sym.c1, sym.c3), (2.0 * tau, 4.0 * tau));
        let m = RttMeasurements { c1: 10.0, c2: 15.0, c3: 30.0, c4: 40.0, tau_x: 1.0 };
        assert!(matches!(rtt_eavesdrop(&m), Err(GeometryError::RttNegative { name: "tau_be", .. })));
        let l = rtt_legitimate(33.356e-9, 16e-6);
        assert!(close(l.alice_estimate, 33.356e-9, 1e-9) && close(l.bob_estimate, 33.356e-9, 1e-9));
    }

    fn pos() -> impl Strategy<Value = Vec2> {
        (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y)| [x, y])
    }

    proptest! {
        #[test]
        fn paths_sorted_los_first(tx in pos(), rx in pos(), pts in prop::collection::vec((pos(), 0.01..10.0f64), 0..6)) {
            prop_assume!(dist(tx, rx) > 0.1);
            let targets: Vec<Target> = pts.iter().map(|&(p, r)| Target::stationary(p, r)).collect();
            if let Ok(p) = build_paths(tx, rx, &targets, 5e9) {
                prop_assert!(p[0].is_los);
                for w in p.windows(2) {
                    prop_assert!(w[0].delay <= w[1].delay);
                }
                prop_assert!(p[1..].iter().all(|x| x.delay > p[0].delay));
            }
        }

        #[test]
        fn doppler_linear_in_velocity(tx in pos(), rx in pos(), p in pos(), v1 in pos(), v2 in pos(), k in -3.0..3.0f64) {
            let t = |v: Vec2| Target { pos: p, vel: v, rcs: 1.0 };
            let sum = [v1[0] + k * v2[0], v1[1] + k * v2[1]];
            let lhs = bistatic_doppler(tx, rx, &t(sum), 5e9);
            let rhs = bistatic_doppler(tx, rx, &t(v1), 5e9) + k * bistatic_doppler(tx, rx, &t(v2), 5e9);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn gain_reciprocal(tx in pos(), rx in pos(), p in pos(), rcs in 0.01..10.0f64) {
            prop_assume!(dist(tx, rx) > 0.01 && dist(tx, p) > 0.01 && dist(rx, p) > 0.01);
            let a = path_gain(tx, rx, Some((p, rcs)), 5e9).norm();
            let b = path_gain(rx, tx, Some((p, rcs)), 5e9).norm();
            prop_assert!(close(a, b, 1e-12));
            prop_assert!(close(path_gain(tx, rx, None, 5e9).norm(), path_gain(rx, tx, None, 5e9).norm(), 1e-12));
        }

        #[test]
        fn eavesdrop_inverts_timeline(a in pos(), b in pos(), e in pos(), tau_x in 1e-6..1e-4f64) {
            prop_assume!(dist(a, b) > 0.1 && dist(a, e) > 0.1 && dist(b, e) > 0.1);
            let (ab, be, ae) = (dist(a, b) / SPEED_OF_LIGHT, dist(b, e) / SPEED_OF_LIGHT, dist(a, e) / SPEED_OF_LIGHT);
            let r = rtt_eavesdrop(&rtt_timeline(ab, be, ae, tau_x)).unwrap();
            prop_assert!(close(r.tau_abx, ab + tau_x, 1e-12));
            prop_assert!((r.tau_be - be).abs() <= 1e-12 * (ab + tau_x));
            prop_assert!((r.tau_ae - ae).abs() <= 1e-12 * (ab + tau_x));
        }
    }
}
