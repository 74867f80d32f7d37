//! Drive-by street-canyon channel.
//!
//! The transmitter car moves on a straight track towards a receiver mounted
//! above a crossing. Paths are the line of sight plus one specular bounce off
//! each planar reflector (canyon walls, a parked truck, the street surface)
//! found with the image-source method. Each path is weighted by free-space
//! loss, the horn gain towards its departure direction, the receive antenna
//! gain and the bounce loss.

mod geometry;
mod synth;

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use geometry::{horn_gain, local_angles, BeamPattern, Bounce, Point, Reflector};
pub use synth::{apply_channel, synthesize, Impairments, PathModel, ScenarioModel, StaticPaths};

use crate::error::{Error, Result};
use crate::params::{SounderConfig, SPEED_OF_LIGHT};

/// Longest single-bounce detour accounted for at the trigger distance, m.
pub const MAX_EXCESS_PATH_AT_TRIGGER: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Los,
    Wall,
    Truck,
    Ground,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Los => "los",
            PathKind::Wall => "wall",
            PathKind::Truck => "truck",
            PathKind::Ground => "ground",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Seconds.
    pub delay: f64,
    /// Hz, positive while the path shortens.
    pub doppler: f64,
    /// Complex baseband amplitude including the carrier phase `exp(-j 2 pi fc delay)`.
    pub gain: Complex64,
    pub kind: PathKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub t: f64,
    pub tx_index: usize,
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn los(&self) -> Option<&Path> {
        self.paths.iter().find(|p| p.kind == PathKind::Los)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rx_position: [f64; 3],
    pub rx_gain_dbi: f64,
    /// Transmitter antenna position when the light barrier fires, m.
    pub tx_start_position: [f64; 3],
    /// Constant transmitter velocity, m/s.
    pub tx_velocity: [f64; 3],
    pub reflectors: Vec<Reflector>,
    /// Seconds after the trigger.
    pub duration: f64,
    /// Receiver noise variance per complex sample, dB relative to a unit tone.
    pub noise_power_db: f64,
    /// Carrier frequency offset between transmitter and receiver, Hz.
    pub cfo: f64,
    /// One beam per transmitter.
    pub tx_beams: Vec<BeamPattern>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::drive_by(DriveBy::default())
    }
}

/// Parameters of the default drive-by layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveBy {
    pub trigger_distance: f64,
    pub speed: f64,
    pub rx_height: f64,
    pub tx_height: f64,
    pub lane_offset: f64,
    pub canyon_width: f64,
    pub crossing_width: f64,
    pub wall_loss_db: f64,
    pub ground_loss_db: Option<f64>,
    pub truck: bool,
}

impl Default for DriveBy {
    fn default() -> Self {
        Self {
            trigger_distance: 41.0,
            speed: 13.0,
            rx_height: 5.0,
            tx_height: 2.0,
            lane_offset: -2.5,
            canyon_width: 20.0,
            crossing_width: 16.0,
            wall_loss_db: 6.0,
            ground_loss_db: Some(6.0),
            truck: true,
        }
    }
}

impl ScenarioConfig {
    /// Street along +x, receiver above the crossing at the origin, side walls
    /// at `y = +-canyon_width / 2` interrupted by the crossing, and a parked
    /// truck next to the lane that is only visible during the first part of
    /// the approach.
    pub fn drive_by(p: DriveBy) -> Self {
        let half = p.canyon_width / 2.0;
        let gap = p.crossing_width / 2.0;
        let wall = |y: f64, x0: f64, x1: f64| Reflector {
            kind: PathKind::Wall,
            origin: [x0, y, 0.0],
            edge_u: [x1 - x0, 0.0, 0.0],
            edge_v: [0.0, 0.0, 20.0],
            loss_db: p.wall_loss_db,
        };
        let mut reflectors = vec![
            wall(half, -150.0, -gap),
            wall(-half, -150.0, -gap),
            wall(half, gap, 150.0),
            wall(-half, gap, 150.0),
        ];
        if let Some(loss) = p.ground_loss_db {
            reflectors.push(Reflector {
                kind: PathKind::Ground,
                origin: [-150.0, -half, 0.0],
                edge_u: [300.0, 0.0, 0.0],
                edge_v: [0.0, p.canyon_width, 0.0],
                loss_db: loss,
            });
        }
        if p.truck {
            // Trailer side facing the lane, 3 m to its right.
            reflectors.push(Reflector {
                kind: PathKind::Truck,
                origin: [-27.0, p.lane_offset - 3.0, 0.0],
                edge_u: [18.0, 0.0, 0.0],
                edge_v: [0.0, 0.0, 4.0],
                loss_db: p.wall_loss_db,
            });
        }
        Self {
            rx_position: [0.0, 0.0, p.rx_height],
            rx_gain_dbi: -4.0,
            tx_start_position: [-p.trigger_distance, p.lane_offset, p.tx_height],
            tx_velocity: [p.speed, 0.0, 0.0],
            reflectors,
            duration: 3.6,
            noise_power_db: -70.0,
            cfo: 850.0,
            tx_beams: vec![BeamPattern::horn(0.0), BeamPattern::horn(15.0)],
        }
    }

    pub fn rx(&self) -> Point {
        Vector3::from(self.rx_position)
    }

    pub fn tx_at(&self, t: f64) -> Point {
        Vector3::from(self.tx_start_position) + t * Vector3::from(self.tx_velocity)
    }

    pub fn speed(&self) -> f64 {
        Vector3::from(self.tx_velocity).norm()
    }

    /// Line-of-sight distance when the recording is triggered.
    pub fn trigger_los_distance(&self) -> f64 {
        (self.tx_at(0.0) - self.rx()).norm()
    }

    /// Same geometry with the car parked at its trigger position.
    pub fn at_standstill(&self) -> Self {
        Self {
            tx_velocity: [0.0; 3],
            ..self.clone()
        }
    }

    pub fn noise_power(&self) -> f64 {
        10f64.powf(self.noise_power_db / 10.0)
    }

    /// Largest single-bounce detour relative to the line of sight at time `t`, m.
    pub fn max_excess_path(&self, t: f64) -> f64 {
        let tx = self.tx_at(t);
        let rx = self.rx();
        let los = (tx - rx).norm();
        self.reflectors
            .iter()
            .filter_map(|r| r.bounce(&tx, &rx))
            .map(|b| b.length - los)
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, cfg: &SounderConfig) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::config("duration", "empty record: duration must be positive"));
        }
        if self.duration > cfg.recording_time * (1.0 + 1e-12) {
            return Err(Error::config(
                "duration",
                format!("{} s exceeds recording time {} s", self.duration, cfg.recording_time),
            ));
        }
        if self.speed() > cfg.max_speed {
            return Err(Error::config(
                "tx_velocity",
                format!("speed {} m/s exceeds {} m/s", self.speed(), cfg.max_speed),
            ));
        }
        if self.tx_beams.len() != cfg.tx_count {
            return Err(Error::config(
                "tx_beams",
                format!("{} beams for {} transmitters", self.tx_beams.len(), cfg.tx_count),
            ));
        }
        for r in &self.reflectors {
            r.validate()?;
        }
        let at_trigger = self.max_excess_path(0.0);
        if at_trigger > MAX_EXCESS_PATH_AT_TRIGGER {
            return Err(Error::config(
                "reflectors",
                format!("{at_trigger:.2} m single-bounce detour at the trigger"),
            ));
        }
        let alias_free = SPEED_OF_LIGHT * cfg.max_excess_delay;
        let steps = (self.duration / 0.05).ceil() as usize;
        for i in 0..=steps {
            let t = (i as f64 * 0.05).min(self.duration);
            let excess = self.max_excess_path(t);
            if excess > alias_free {
                return Err(Error::config(
                    "reflectors",
                    format!("{excess:.2} m detour at t = {t:.2} s aliases in delay"),
                ));
            }
        }
        Ok(())
    }
}

fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Propagation paths from transmitter `tx_index` to the receiver at time `t`.
pub fn scenario_paths(sc: &ScenarioConfig, cfg: &SounderConfig, t: f64, tx_index: usize) -> Result<PathSet> {
    if !(0.0..=sc.duration).contains(&t) {
        return Err(Error::OutOfRange {
            t,
            duration: sc.duration,
        });
    }
    let beam = sc
        .tx_beams
        .get(tx_index)
        .ok_or_else(|| Error::config("tx_beams", format!("no beam for transmitter {tx_index}")))?;
    let fc = cfg.center_frequency;
    let wavelength = SPEED_OF_LIGHT / fc;
    let tx = sc.tx_at(t);
    let rx = sc.rx();
    let velocity = Vector3::from(sc.tx_velocity);

    // `source` is the (image) transmitter, `source_velocity` its velocity and
    // `departure` the direction leaving the real antenna.
    let make_path = |kind: PathKind, source: Point, source_velocity: Point, departure: Point, loss_db: f64| {
        let to_rx = rx - source;
        let length = to_rx.norm();
        let delay = length / SPEED_OF_LIGHT;
        let doppler = to_rx.dot(&source_velocity) / length / wavelength;
        let (az, el) = local_angles(&departure, &velocity);
        let antenna_db = horn_gain(beam, az, el) + sc.rx_gain_dbi - loss_db;
        let mut amplitude = db_to_amplitude(antenna_db) * wavelength / (4.0 * PI * length);
        if kind != PathKind::Los {
            amplitude = -amplitude;
        }
        // Carrier phase reduced in cycles before scaling by 2 pi.
        let cycles = (length / wavelength).fract();
        Path {
            delay,
            doppler,
            gain: Complex64::from_polar(amplitude, -2.0 * PI * cycles),
            kind,
        }
    };

    let mut paths = vec![make_path(PathKind::Los, tx, velocity, rx - tx, 0.0)];
    for r in &sc.reflectors {
        if let Some(b) = r.bounce(&tx, &rx) {
            paths.push(make_path(
                r.kind,
                b.image,
                r.mirror_direction(&velocity),
                b.point - tx,
                r.loss_db,
            ));
        }
    }
    Ok(PathSet { t, tx_index, paths })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SounderConfig {
        SounderConfig::street_crossing()
    }

    fn at_14_mps() -> ScenarioConfig {
        ScenarioConfig::drive_by(DriveBy {
            speed: 14.0,
            lane_offset: 0.0,
            ..DriveBy::default()
        })
    }

    #[test]
    fn los_doppler_at_trigger() {
        let ps = scenario_paths(&at_14_mps(), &cfg(), 0.0, 0).unwrap();
        let los = ps.los().unwrap();
        assert!((los.doppler - 2800.0).abs() < 10.0, "{}", los.doppler);
        assert!(los.doppler > 2500.0);
    }

    #[test]
    fn los_doppler_changes_sign_when_passing() {
        let sc = at_14_mps();
        let t_abeam = 41.0 / 14.0;
        let before = scenario_paths(&sc, &cfg(), t_abeam - 0.05, 0).unwrap();
        let after = scenario_paths(&sc, &cfg(), t_abeam + 0.05, 0).unwrap();
        let at = scenario_paths(&sc, &cfg(), t_abeam, 0).unwrap();
        assert!(before.los().unwrap().doppler > 0.0);
        assert!(after.los().unwrap().doppler < 0.0);
        assert!(at.los().unwrap().doppler.abs() < 1e-6);
    }

    #[test]
    fn los_delay_matches_distance() {
        let sc = ScenarioConfig::default();
        for i in 0..=36 {
            let t = i as f64 * 0.1;
            let ps = scenario_paths(&sc, &cfg(), t, 1).unwrap();
            let d = (sc.tx_at(t) - sc.rx()).norm();
            assert!((ps.los().unwrap().delay * SPEED_OF_LIGHT - d).abs() < 1e-3);
            assert!(ps.paths.iter().all(|p| p.delay >= ps.los().unwrap().delay));
        }
    }

    #[test]
    fn wall_detour_at_forty_metres() {
        let sc = ScenarioConfig::drive_by(DriveBy {
            trigger_distance: 40.0,
            lane_offset: 0.0,
            ground_loss_db: None,
            truck: false,
            ..DriveBy::default()
        });
        let ps = scenario_paths(&sc, &cfg(), 0.0, 0).unwrap();
        let los = ps.los().unwrap().delay;
        let walls: Vec<_> = ps.paths.iter().filter(|p| p.kind == PathKind::Wall).collect();
        assert_eq!(walls.len(), 2);
        for w in walls {
            let excess = w.delay - los;
            assert!(excess > 0.0 && excess <= 54e-9, "{excess}");
        }
    }

    #[test]
    fn truck_disappears_after_passing_it() {
        let sc = ScenarioConfig::default();
        let has_truck = |t: f64| {
            scenario_paths(&sc, &cfg(), t, 0)
                .unwrap()
                .paths
                .iter()
                .any(|p| p.kind == PathKind::Truck)
        };
        assert!(has_truck(0.0));
        assert!(has_truck(1.0));
        assert!(!has_truck(2.5));
    }

    #[test]
    fn out_of_range_time_is_rejected() {
        let sc = ScenarioConfig::default();
        assert!(matches!(
            scenario_paths(&sc, &cfg(), -0.1, 0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(scenario_paths(&sc, &cfg(), 3.7, 0).is_err());
    }

    #[test]
    fn default_scenario_validates() {
        ScenarioConfig::default().validate(&cfg()).unwrap();
        let fast = ScenarioConfig {
            tx_velocity: [15.0, 0.0, 0.0],
            ..ScenarioConfig::default()
        };
        assert!(fast.validate(&cfg()).is_err());
        let empty = ScenarioConfig {
            duration: 0.0,
            ..ScenarioConfig::default()
        };
        assert!(empty.validate(&cfg()).is_err());
    }

    #[test]
    fn los_gain_follows_free_space_loss() {
        let sc = ScenarioConfig::default();
        let c = cfg();
        let ps = scenario_paths(&sc, &c, 0.0, 0).unwrap();
        let los = ps.los().unwrap();
        let d = sc.trigger_los_distance();
        let (az, el) = local_angles(&(sc.rx() - sc.tx_at(0.0)), &Vector3::from(sc.tx_velocity));
        let expected_db = horn_gain(&sc.tx_beams[0], az, el)
            - 4.0
            - crate::params::free_space_path_loss(d, c.center_frequency).unwrap();
        assert!((20.0 * los.gain.norm().log10() - expected_db).abs() < 1e-9);
    }
}
