use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FINGER_NAMES: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];

/// Finger flexion targets: 0 fully open, 1 fully closed; thumb to pinky.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "[f32; 5]", into = "[f32; 5]")]
pub struct Trajectory([f32; 5]);

impl Trajectory {
    pub const RELAXED: Trajectory = Trajectory([0.0; 5]);

    pub fn new(values: [f32; 5]) -> Result<Self> {
        if values.iter().all(|v| (0.0..=1.0).contains(v)) {
            Ok(Self(values))
        } else {
            Err(Error::LabelMap(format!("trajectory {values:?} leaves [0, 1]")))
        }
    }

    /// Clamps each component into `[0, 1]`; NaN becomes 0.
    pub fn clamped(values: [f32; 5]) -> Self {
        Self(values.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
    }

    pub fn values(&self) -> [f32; 5] {
        self.0
    }

    pub fn thumb(&self) -> f32 {
        self.0[0]
    }

    pub fn index(&self) -> f32 {
        self.0[1]
    }

    pub fn middle(&self) -> f32 {
        self.0[2]
    }

    pub fn ring(&self) -> f32 {
        self.0[3]
    }

    pub fn pinky(&self) -> f32 {
        self.0[4]
    }
}

impl TryFrom<[f32; 5]> for Trajectory {
    type Error = Error;

    fn try_from(v: [f32; 5]) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Trajectory> for [f32; 5] {
    fn from(t: Trajectory) -> Self {
        t.0
    }
}

/// Word to trajectory table. Words outside the table map to the relaxed hand.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    entries: BTreeMap<String, Trajectory>,
}

pub const DEFAULT_KEY: &str = "__default__";

/// The eight command words of the default dictionary.
pub const COMMAND_WORDS: [&str; 8] = ["zero", "one", "two", "three", "four", "five", "on", "off"];

fn normalize(word: &str) -> String {
    word.trim().to_lowercase()
}

impl Default for LabelMap {
    /// "one" and "two" follow the counting gestures; the other six rows are
    /// configurable placeholders.
    fn default() -> Self {
        let rows: [(&str, [f32; 5]); 8] = [
            ("zero", [1.0, 1.0, 1.0, 1.0, 1.0]),
            ("one", [1.0, 0.0, 1.0, 1.0, 1.0]),
            ("two", [1.0, 0.0, 0.0, 1.0, 1.0]),
            ("three", [1.0, 0.0, 0.0, 0.0, 1.0]),
            ("four", [1.0, 0.0, 0.0, 0.0, 0.0]),
            ("five", [0.0, 0.0, 0.0, 0.0, 0.0]),
            ("on", [0.0, 1.0, 1.0, 1.0, 1.0]),
            ("off", [1.0, 1.0, 1.0, 1.0, 1.0]),
        ];
        Self {
            entries: rows
                .into_iter()
                .map(|(w, t)| (w.to_string(), Trajectory(t)))
                .collect(),
        }
    }
}

impl LabelMap {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, word: &str, trajectory: Trajectory) {
        self.entries.insert(normalize(word), trajectory);
    }

    /// Exact (trimmed, case-insensitive) lookup, else the relaxed hand.
    pub fn label_of(&self, word: &str) -> Trajectory {
        self.entries
            .get(&normalize(word))
            .copied()
            .unwrap_or(Trajectory::RELAXED)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(&normalize(word))
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<f64>> =
            serde_json::from_str(text).map_err(|e| Error::LabelMap(e.to_string()))?;
        let mut map = Self::empty();
        for (word, values) in raw {
            let arr: [f32; 5] = values
                .iter()
                .map(|&v| v as f32)
                .collect::<Vec<_>>()
                .try_into()
                .map_err(|_| Error::LabelMap(format!("{word:?} needs exactly five numbers")))?;
            let t = Trajectory::new(arr).map_err(|_| Error::LabelMap(format!("{word:?}: values outside [0, 1]")))?;
            if word == DEFAULT_KEY {
                if t != Trajectory::RELAXED {
                    return Err(Error::LabelMap(format!("{DEFAULT_KEY} must be all zeros")));
                }
                continue;
            }
            map.insert(&word, t);
        }
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        let mut raw: BTreeMap<&str, [f32; 5]> = self.entries.iter().map(|(w, t)| (w.as_str(), t.0)).collect();
        raw.insert(DEFAULT_KEY, [0.0; 5]);
        serde_json::to_string_pretty(&raw).expect("label map serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.at(path))
    }
}
