//! Scenario labels and corpus partitioning.
//!
//! Each window is tagged with pedestrian factors (scale, walking/standing
//! state on both horizons) and ego factors (speed, turning, speed change).
//! A [`Partition`] groups sample indices by any subset of those tags.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Corpus, PedestrianState, TrajectorySample};

/// Box-height bins in pixels, left-inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScaleBin {
    #[serde(rename = "0-50")]
    S0_50,
    #[serde(rename = "50-80")]
    S50_80,
    #[serde(rename = "80-100")]
    S80_100,
    #[serde(rename = "100-150")]
    S100_150,
    #[serde(rename = "150-200")]
    S150_200,
    #[serde(rename = "200-300")]
    S200_300,
    #[serde(rename = "300+")]
    S300p,
}

impl ScaleBin {
    pub const ALL: [ScaleBin; 7] = [
        ScaleBin::S0_50,
        ScaleBin::S50_80,
        ScaleBin::S80_100,
        ScaleBin::S100_150,
        ScaleBin::S150_200,
        ScaleBin::S200_300,
        ScaleBin::S300p,
    ];
    pub const EDGES: [f64; 6] = [50.0, 80.0, 100.0, 150.0, 200.0, 300.0];

    pub fn from_height(h: f64) -> ScaleBin {
        let idx = Self::EDGES.iter().take_while(|&&edge| h >= edge).count();
        Self::ALL[idx]
    }

    pub fn name(self) -> &'static str {
        match self {
            ScaleBin::S0_50 => "0-50",
            ScaleBin::S50_80 => "50-80",
            ScaleBin::S80_100 => "80-100",
            ScaleBin::S100_150 => "100-150",
            ScaleBin::S150_200 => "150-200",
            ScaleBin::S200_300 => "200-300",
            ScaleBin::S300p => "300+",
        }
    }
}

/// Ego-speed bins in km/h. `Z0` is reserved for windows where the vehicle
/// never moves; the rest are left-exclusive, right-inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpeedBin {
    #[serde(rename = "0")]
    Z0,
    #[serde(rename = "0-5")]
    V0_5,
    #[serde(rename = "5-10")]
    V5_10,
    #[serde(rename = "10-20")]
    V10_20,
    #[serde(rename = "20-30")]
    V20_30,
    #[serde(rename = "30+")]
    V30p,
}

impl SpeedBin {
    pub const ALL: [SpeedBin; 6] = [
        SpeedBin::Z0,
        SpeedBin::V0_5,
        SpeedBin::V5_10,
        SpeedBin::V10_20,
        SpeedBin::V20_30,
        SpeedBin::V30p,
    ];
    pub const EDGES: [f64; 4] = [5.0, 10.0, 20.0, 30.0];

    /// Bin of a strictly moving window's mean speed.
    pub fn from_mean_speed(kmh: f64) -> SpeedBin {
        let idx = Self::EDGES.iter().take_while(|&&edge| kmh > edge).count();
        Self::ALL[idx + 1]
    }

    pub fn name(self) -> &'static str {
        match self {
            SpeedBin::Z0 => "0",
            SpeedBin::V0_5 => "0-5",
            SpeedBin::V5_10 => "5-10",
            SpeedBin::V10_20 => "10-20",
            SpeedBin::V20_30 => "20-30",
            SpeedBin::V30p => "30+",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EgoAction {
    Straight,
    Turn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EgoMotion {
    Constant,
    Change,
}

/// Majority state on observation vs prediction horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateTransition {
    #[serde(rename = "W-W")]
    WW,
    #[serde(rename = "S-S")]
    SS,
    #[serde(rename = "Wo-Sp")]
    WoSp,
    #[serde(rename = "So-Wp")]
    SoWp,
}

impl StateTransition {
    pub fn from_states(obs: PedestrianState, fut: PedestrianState) -> Self {
        use PedestrianState::*;
        match (obs, fut) {
            (Walking, Walking) => StateTransition::WW,
            (Standing, Standing) => StateTransition::SS,
            (Walking, Standing) => StateTransition::WoSp,
            (Standing, Walking) => StateTransition::SoWp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelRule {
    /// Any frame with |a| at or above the threshold.
    AnyFrame,
    /// Mean |a| over the window at or above the threshold.
    MeanAbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Observation,
    Window,
}

/// Thresholds and conventions for labeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub yaw_threshold_deg: f64,
    pub accel_threshold_ms2: f64,
    pub zero_speed_kmh: f64,
    pub accel_rule: AccelRule,
    pub action_horizon: Horizon,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            yaw_threshold_deg: 5.0,
            accel_threshold_ms2: 0.3,
            zero_speed_kmh: 0.1,
            accel_rule: AccelRule::AnyFrame,
            action_horizon: Horizon::Window,
        }
    }
}

/// Every factor label of one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioKey {
    pub scale_bin: ScaleBin,
    pub obs_state: PedestrianState,
    pub fut_state: PedestrianState,
    pub speed_bin: SpeedBin,
    pub ego_action: EgoAction,
    pub ego_motion: EgoMotion,
    pub state_transition: StateTransition,
}

pub fn scale_bin(sample: &TrajectorySample) -> ScaleBin {
    let n = sample.obs_boxes.len().max(1) as f64;
    let mean = sample.obs_boxes.iter().map(|b| b.height()).sum::<f64>() / n;
    ScaleBin::from_height(mean)
}

/// Majority vote. Even-length ties are reported, never broken.
pub fn state_label(states: &[PedestrianState]) -> Result<PedestrianState> {
    if states.is_empty() {
        return Err(Error::LengthMismatch {
            expected: 1,
            actual: 0,
        });
    }
    let walking = states
        .iter()
        .filter(|&&s| s == PedestrianState::Walking)
        .count();
    let standing = states.len() - walking;
    match walking.cmp(&standing) {
        std::cmp::Ordering::Greater => Ok(PedestrianState::Walking),
        std::cmp::Ordering::Less => Ok(PedestrianState::Standing),
        std::cmp::Ordering::Equal => Err(Error::Tie { count: walking }),
    }
}

pub fn speed_bin(sample: &TrajectorySample) -> SpeedBin {
    speed_bin_with(sample, &LabelConfig::default())
}

pub fn speed_bin_with(sample: &TrajectorySample, cfg: &LabelConfig) -> SpeedBin {
    if sample.all_ego().all(|e| e.speed_kmh < cfg.zero_speed_kmh) {
        return SpeedBin::Z0;
    }
    let n = (sample.obs_ego.len() + sample.fut_ego.len()) as f64;
    let mean = sample.all_ego().map(|e| e.speed_kmh).sum::<f64>() / n;
    SpeedBin::from_mean_speed(mean)
}

pub fn ego_action_label(sample: &TrajectorySample) -> EgoAction {
    ego_action_with(sample, &LabelConfig::default())
}

pub fn ego_action_with(sample: &TrajectorySample, cfg: &LabelConfig) -> EgoAction {
    let yaws: Vec<f64> = match cfg.action_horizon {
        Horizon::Window => sample.all_ego().map(|e| e.yaw_deg).collect(),
        Horizon::Observation => sample.obs_ego.iter().map(|e| e.yaw_deg).collect(),
    };
    let max = yaws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = yaws.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min >= cfg.yaw_threshold_deg {
        EgoAction::Turn
    } else {
        EgoAction::Straight
    }
}

pub fn ego_motion_label(sample: &TrajectorySample) -> EgoMotion {
    ego_motion_with(sample, &LabelConfig::default())
}

pub fn ego_motion_with(sample: &TrajectorySample, cfg: &LabelConfig) -> EgoMotion {
    let changed = match cfg.accel_rule {
        AccelRule::AnyFrame => sample
            .all_ego()
            .any(|e| e.accel_ms2.abs() >= cfg.accel_threshold_ms2),
        AccelRule::MeanAbs => {
            let n = (sample.obs_ego.len() + sample.fut_ego.len()).max(1) as f64;
            sample.all_ego().map(|e| e.accel_ms2.abs()).sum::<f64>() / n
                >= cfg.accel_threshold_ms2
        }
    };
    if changed {
        EgoMotion::Change
    } else {
        EgoMotion::Constant
    }
}

pub fn state_transition_label(sample: &TrajectorySample) -> Result<StateTransition> {
    Ok(StateTransition::from_states(
        state_label(&sample.obs_states)?,
        state_label(&sample.fut_states)?,
    ))
}

pub fn label_sample(sample: &TrajectorySample, cfg: &LabelConfig) -> Result<ScenarioKey> {
    let obs_state = state_label(&sample.obs_states)?;
    let fut_state = state_label(&sample.fut_states)?;
    Ok(ScenarioKey {
        scale_bin: scale_bin(sample),
        obs_state,
        fut_state,
        speed_bin: speed_bin_with(sample, cfg),
        ego_action: ego_action_with(sample, cfg),
        ego_motion: ego_motion_with(sample, cfg),
        state_transition: StateTransition::from_states(obs_state, fut_state),
    })
}

/// Labels every sample, attaching the sample id to any failure.
pub fn label_corpus(corpus: &Corpus, cfg: &LabelConfig) -> Result<Vec<ScenarioKey>> {
    corpus
        .samples
        .par_iter()
        .map(|s| {
            label_sample(s, cfg).map_err(|e| Error::Label {
                sample: s.id(),
                source: Box::new(e),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Scale,
    State,
    FutState,
    Speed,
    Action,
    Motion,
    Transition,
}

impl Factor {
    pub const ALL: [Factor; 7] = [
        Factor::Scale,
        Factor::State,
        Factor::FutState,
        Factor::Speed,
        Factor::Action,
        Factor::Motion,
        Factor::Transition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Factor::Scale => "scale",
            Factor::State => "state",
            Factor::FutState => "fut_state",
            Factor::Speed => "speed",
            Factor::Action => "action",
            Factor::Motion => "motion",
            Factor::Transition => "transition",
        }
    }

    pub fn parse(s: &str) -> Result<Factor> {
        let s = s.trim();
        Factor::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .or(match s {
                "scale_bin" => Some(Factor::Scale),
                "speed_bin" => Some(Factor::Speed),
                "obs_state" => Some(Factor::State),
                "ego_action" => Some(Factor::Action),
                "ego_motion" => Some(Factor::Motion),
                "state_transition" => Some(Factor::Transition),
                _ => None,
            })
            .ok_or_else(|| Error::UnknownFactor(s.to_string()))
    }

    /// Parses a comma-separated list such as `speed,scale`.
    pub fn parse_list(s: &str) -> Result<Vec<Factor>> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(Factor::parse)
            .collect()
    }

    pub fn value_of(self, key: &ScenarioKey) -> FactorValue {
        match self {
            Factor::Scale => FactorValue::Scale(key.scale_bin),
            Factor::State => FactorValue::State(key.obs_state),
            Factor::FutState => FactorValue::State(key.fut_state),
            Factor::Speed => FactorValue::Speed(key.speed_bin),
            Factor::Action => FactorValue::Action(key.ego_action),
            Factor::Motion => FactorValue::Motion(key.ego_motion),
            Factor::Transition => FactorValue::Transition(key.state_transition),
        }
    }

    /// Every value this factor can take, in display order.
    pub fn domain(self) -> Vec<FactorValue> {
        use PedestrianState::*;
        match self {
            Factor::Scale => ScaleBin::ALL.into_iter().map(FactorValue::Scale).collect(),
            Factor::State | Factor::FutState => {
                vec![FactorValue::State(Walking), FactorValue::State(Standing)]
            }
            Factor::Speed => SpeedBin::ALL.into_iter().map(FactorValue::Speed).collect(),
            Factor::Action => vec![
                FactorValue::Action(EgoAction::Straight),
                FactorValue::Action(EgoAction::Turn),
            ],
            Factor::Motion => vec![
                FactorValue::Motion(EgoMotion::Constant),
                FactorValue::Motion(EgoMotion::Change),
            ],
            Factor::Transition => [
                StateTransition::WW,
                StateTransition::SS,
                StateTransition::WoSp,
                StateTransition::SoWp,
            ]
            .into_iter()
            .map(FactorValue::Transition)
            .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactorValue {
    Scale(ScaleBin),
    State(PedestrianState),
    Speed(SpeedBin),
    Action(EgoAction),
    Motion(EgoMotion),
    Transition(StateTransition),
}

impl fmt::Display for FactorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FactorValue::Scale(b) => b.name(),
            FactorValue::State(PedestrianState::Walking) => "walking",
            FactorValue::State(PedestrianState::Standing) => "standing",
            FactorValue::Speed(b) => b.name(),
            FactorValue::Action(EgoAction::Straight) => "straight",
            FactorValue::Action(EgoAction::Turn) => "turn",
            FactorValue::Motion(EgoMotion::Constant) => "constant",
            FactorValue::Motion(EgoMotion::Change) => "change",
            FactorValue::Transition(StateTransition::WW) => "W-W",
            FactorValue::Transition(StateTransition::SS) => "S-S",
            FactorValue::Transition(StateTransition::WoSp) => "Wo-Sp",
            FactorValue::Transition(StateTransition::SoWp) => "So-Wp",
        };
        f.write_str(s)
    }
}

pub type CellKey = Vec<FactorValue>;

/// Formats `factor=value[,factor=value]`.
pub fn cell_name(factors: &[Factor], key: &[FactorValue]) -> String {
    factors
        .iter()
        .zip(key)
        .map(|(f, v)| format!("{}={}", f.name(), v))
        .collect::<Vec<_>>()
        .join(",")
}

/// Sample indices grouped by the cross product of the chosen factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub factors: Vec<Factor>,
    pub cells: BTreeMap<CellKey, Vec<usize>>,
    pub total: usize,
}

impl Partition {
    pub fn from_keys(keys: &[ScenarioKey], factors: &[Factor]) -> Result<Partition> {
        if factors.is_empty() {
            return Err(Error::EmptyFactors);
        }
        let mut cells: BTreeMap<CellKey, Vec<usize>> = BTreeMap::new();
        for (i, key) in keys.iter().enumerate() {
            let cell: CellKey = factors.iter().map(|f| f.value_of(key)).collect();
            cells.entry(cell).or_default().push(i);
        }
        Ok(Partition {
            factors: factors.to_vec(),
            cells,
            total: keys.len(),
        })
    }

    pub fn cell_names(&self) -> Vec<String> {
        self.cells
            .keys()
            .map(|k| cell_name(&self.factors, k))
            .collect()
    }

    pub fn counts(&self) -> BTreeMap<String, usize> {
        self.cells
            .iter()
            .map(|(k, v)| (cell_name(&self.factors, k), v.len()))
            .collect()
    }

    pub fn to_json(&self, corpus: &Corpus) -> serde_json::Value {
        let mut cells = serde_json::Map::new();
        for (key, idx) in &self.cells {
            let ids: Vec<String> = idx.iter().map(|&i| corpus.samples[i].id()).collect();
            cells.insert(
                cell_name(&self.factors, key),
                serde_json::json!({ "count": idx.len(), "samples": ids }),
            );
        }
        serde_json::json!({
            "factors": self.factors.iter().map(|f| f.name()).collect::<Vec<_>>(),
            "total": self.total,
            "cells": cells,
        })
    }
}

pub fn partition(corpus: &Corpus, factors: &[Factor], cfg: &LabelConfig) -> Result<Partition> {
    if factors.is_empty() {
        return Err(Error::EmptyFactors);
    }
    let keys = label_corpus(corpus, cfg)?;
    Partition::from_keys(&keys, factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{BoundingBox, EgoState, ImageGeometry};
    use PedestrianState::*;

    fn ego(speed: f64, accel: f64, yaw: f64) -> EgoState {
        EgoState {
            speed_kmh: speed,
            accel_ms2: accel,
            yaw_deg: yaw,
            yaw_rate_dps: 0.0,
            lat: 0.0,
            lon: 0.0,
        }
    }

    fn sample_with(heights: &[f64], ego_seq: Vec<EgoState>) -> TrajectorySample {
        let o = heights.len();
        let fut = ego_seq.len() - o;
        TrajectorySample {
            ped_id: "p".into(),
            video_id: "v".into(),
            start_frame: 0,
            obs_boxes: heights
                .iter()
                .map(|&h| BoundingBox::new(100.0, 100.0, 130.0, 100.0 + h).unwrap())
                .collect(),
            fut_boxes: vec![BoundingBox::new(100.0, 100.0, 130.0, 150.0).unwrap(); fut],
            obs_states: vec![Walking; o],
            fut_states: vec![Walking; fut],
            obs_ego: ego_seq[..o].to_vec(),
            fut_ego: ego_seq[o..].to_vec(),
            geometry: ImageGeometry::default(),
            truth: None,
        }
    }

    fn still(n: usize) -> Vec<EgoState> {
        vec![ego(0.0, 0.0, 0.0); n]
    }

    #[test]
    fn scale_bin_examples() {
        assert_eq!(scale_bin(&sample_with(&[40.0; 3], still(4))), ScaleBin::S0_50);
        assert_eq!(scale_bin(&sample_with(&[50.0; 3], still(4))), ScaleBin::S50_80);
        assert_eq!(
            scale_bin(&sample_with(&[90.0, 110.0, 130.0], still(4))),
            ScaleBin::S100_150
        );
        assert_eq!(ScaleBin::from_height(299.999), ScaleBin::S200_300);
        assert_eq!(ScaleBin::from_height(300.0), ScaleBin::S300p);
        assert_eq!(ScaleBin::from_height(1e6), ScaleBin::S300p);
    }

    #[test]
    fn majority_vote_examples() {
        assert_eq!(state_label(&[Walking; 15]).unwrap(), Walking);
        let mut mixed = vec![Walking; 8];
        mixed.extend([Standing; 7]);
        assert_eq!(state_label(&mixed).unwrap(), Walking);
        assert!(matches!(
            state_label(&[Walking, Standing, Walking, Standing]),
            Err(Error::Tie { count: 2 })
        ));
    }

    #[test]
    fn speed_bin_examples() {
        assert_eq!(speed_bin(&sample_with(&[60.0; 2], still(6))), SpeedBin::Z0);
        let cruise = vec![ego(12.0, 0.0, 0.0); 6];
        assert_eq!(speed_bin(&sample_with(&[60.0; 2], cruise)), SpeedBin::V10_20);
        let ramp: Vec<_> = (0..=10).map(|i| ego(i as f64, 0.0, 0.0)).collect();
        assert_eq!(speed_bin(&sample_with(&[60.0; 3], ramp)), SpeedBin::V0_5);
        let crawl = vec![ego(0.05, 0.0, 0.0); 6];
        assert_eq!(speed_bin(&sample_with(&[60.0; 2], crawl)), SpeedBin::Z0);
        assert_eq!(SpeedBin::from_mean_speed(30.0), SpeedBin::V20_30);
        assert_eq!(SpeedBin::from_mean_speed(30.01), SpeedBin::V30p);
    }

    #[test]
    fn ego_action_examples() {
        assert_eq!(
            ego_action_label(&sample_with(&[60.0; 2], still(6))),
            EgoAction::Straight
        );
        let turn: Vec<_> = (0..=6).map(|i| ego(20.0, 0.0, 10.0 + i as f64)).collect();
        assert_eq!(ego_action_label(&sample_with(&[60.0; 2], turn)), EgoAction::Turn);
        let wobble: Vec<_> = (0..8)
            .map(|i| ego(20.0, 0.0, if i % 2 == 0 { 2.0 } else { -2.0 }))
            .collect();
        assert_eq!(
            ego_action_label(&sample_with(&[60.0; 2], wobble)),
            EgoAction::Straight
        );
    }

    #[test]
    fn ego_action_observation_horizon_option() {
        let mut seq = still(6);
        seq[5].yaw_deg = 9.0;
        let s = sample_with(&[60.0; 2], seq);
        let cfg = LabelConfig {
            action_horizon: Horizon::Observation,
            ..Default::default()
        };
        assert_eq!(ego_action_with(&s, &cfg), EgoAction::Straight);
        assert_eq!(ego_action_label(&s), EgoAction::Turn);
    }

    #[test]
    fn ego_motion_examples() {
        assert_eq!(
            ego_motion_label(&sample_with(&[60.0; 2], still(6))),
            EgoMotion::Constant
        );
        let mut one = still(6);
        one[3].accel_ms2 = 0.3;
        assert_eq!(ego_motion_label(&sample_with(&[60.0; 2], one)), EgoMotion::Change);
        let below = vec![ego(10.0, 0.29, 0.0); 6];
        assert_eq!(
            ego_motion_label(&sample_with(&[60.0; 2], below)),
            EgoMotion::Constant
        );
        let mut braking = still(6);
        braking[1].accel_ms2 = -0.8;
        assert_eq!(
            ego_motion_label(&sample_with(&[60.0; 2], braking.clone())),
            EgoMotion::Change
        );
        let mean_rule = LabelConfig {
            accel_rule: AccelRule::MeanAbs,
            ..Default::default()
        };
        assert_eq!(
            ego_motion_with(&sample_with(&[60.0; 2], braking), &mean_rule),
            EgoMotion::Constant
        );
    }

    #[test]
    fn transition_examples() {
        let mut s = sample_with(&[60.0; 15], still(60));
        s.fut_states = vec![Standing; 45];
        assert_eq!(state_transition_label(&s).unwrap(), StateTransition::WoSp);
        s.obs_states = vec![Standing; 15];
        assert_eq!(state_transition_label(&s).unwrap(), StateTransition::SS);
        s.obs_states = [vec![Walking; 8], vec![Standing; 7]].concat();
        s.fut_states = [vec![Standing; 23], vec![Walking; 22]].concat();
        assert_eq!(state_transition_label(&s).unwrap(), StateTransition::WoSp);
    }

    #[test]
    fn empty_factor_set_is_rejected() {
        assert!(matches!(
            Partition::from_keys(&[], &[]),
            Err(Error::EmptyFactors)
        ));
    }

    #[test]
    fn factor_names_parse() {
        assert_eq!(
            Factor::parse_list("speed, scale").unwrap(),
            vec![Factor::Speed, Factor::Scale]
        );
        assert!(Factor::parse("colour").is_err());
    }

    #[test]
    fn cell_names_follow_factor_order() {
        let key = vec![
            FactorValue::Speed(SpeedBin::V0_5),
            FactorValue::Scale(ScaleBin::S300p),
        ];
        assert_eq!(
            cell_name(&[Factor::Speed, Factor::Scale], &key),
            "speed=0-5,scale=300+"
        );
    }
}
