//! The discrete 11-label dataset-generation policy.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const NUM_LABELS: usize = 11;
pub const LEVELS: u8 = 9;

/// Label positions.
pub mod slot {
    pub const ROTATION: usize = 0;
    pub const TRANSLATION: usize = 1;
    pub const SCALE: usize = 2;
    pub const SHEAR: [usize; 3] = [3, 4, 5];
    pub const STRETCH: [usize; 3] = [6, 7, 8];
    pub const PRIMITIVE_COUNT: usize = 9;
    pub const TRUNCATION: usize = 10;
}

/// Largest magnitude of each operation, reached at label 8.
pub mod envelope {
    pub const ROTATION: f64 = std::f64::consts::PI;
    pub const TRANSLATION: f64 = 0.6;
    pub const SCALE: f64 = 0.5;
    pub const SHEAR: f64 = 0.6;
    pub const STRETCH: f64 = 1.0;
    pub const TRUNCATION: f64 = 0.9;
}

/// One generation recipe: eleven labels in `0..9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Policy {
    labels: [u8; NUM_LABELS],
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    labels: Vec<u8>,
    version: u32,
}

const FILE_VERSION: u32 = 1;

impl Policy {
    pub fn new(labels: [u8; NUM_LABELS]) -> Result<Self> {
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l >= LEVELS) {
            return Err(Error::InvalidParameter(format!(
                "policy label {i} is {l}, must be below {LEVELS}"
            )));
        }
        Ok(Policy { labels })
    }

    pub fn from_slice(labels: &[u8]) -> Result<Self> {
        let arr: [u8; NUM_LABELS] = labels.try_into().map_err(|_| {
            Error::InvalidParameter(format!(
                "policy needs exactly {NUM_LABELS} labels, got {}",
                labels.len()
            ))
        })?;
        Self::new(arr)
    }

    pub fn labels(&self) -> &[u8; NUM_LABELS] {
        &self.labels
    }

    pub fn label(&self, slot: usize) -> u8 {
        self.labels[slot]
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let mut labels = [0u8; NUM_LABELS];
        for l in &mut labels {
            *l = rng.random_range(0..LEVELS);
        }
        Policy { labels }
    }

    /// Every label at its maximum.
    pub fn full_range() -> Self {
        Policy {
            labels: [LEVELS - 1; NUM_LABELS],
        }
    }

    /// Changes one uniformly chosen label to a different, uniformly chosen
    /// label.
    pub fn mutate(&self, rng: &mut impl Rng) -> Self {
        let slot = rng.random_range(0..NUM_LABELS);
        let mut next = rng.random_range(0..LEVELS - 1);
        if next >= self.labels[slot] {
            next += 1;
        }
        let mut child = *self;
        child.labels[slot] = next;
        child
    }

    /// All 88 single-label mutations, in slot-major order.
    pub fn neighbours(&self) -> impl Iterator<Item = Policy> + '_ {
        (0..NUM_LABELS).flat_map(move |slot| {
            (0..LEVELS)
                .filter(move |&l| l != self.labels[slot])
                .map(move |l| {
                    let mut child = *self;
                    child.labels[slot] = l;
                    child
                })
        })
    }

    pub fn hamming(&self, other: &Policy) -> usize {
        self.labels
            .iter()
            .zip(&other.labels)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// The policy read as a base-9 number, slot 0 most significant.
    pub fn index(&self) -> u64 {
        self.labels
            .iter()
            .fold(0u64, |acc, &l| acc * u64::from(LEVELS) + u64::from(l))
    }

    pub fn from_index(mut index: u64) -> Result<Self> {
        if index >= search_space_size() {
            return Err(Error::InvalidParameter(format!(
                "policy index {index} outside the search space"
            )));
        }
        let mut labels = [0u8; NUM_LABELS];
        for l in labels.iter_mut().rev() {
            *l = (index % u64::from(LEVELS)) as u8;
            index /= u64::from(LEVELS);
        }
        Ok(Policy { labels })
    }

    /// Stable content hash, used to derive per-policy seeds.
    pub fn stable_hash(&self) -> u64 {
        seed::stable_hash(&self.labels)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("policy JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn ranges(&self) -> GenerationRanges {
        GenerationRanges::from_policy(self)
    }
}

impl Serialize for Policy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolicyFile {
            labels: self.labels.to_vec(),
            version: FILE_VERSION,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Policy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = PolicyFile::deserialize(d)?;
        if file.version != FILE_VERSION {
            return Err(serde::de::Error::custom(format!(
                "unsupported policy version {}",
                file.version
            )));
        }
        Policy::from_slice(&file.labels).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.labels {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// `9^11`.
pub fn search_space_size() -> u64 {
    u64::from(LEVELS).pow(NUM_LABELS as u32)
}

/// Fraction of an envelope selected by a label: `(label + 1) / 9`.
pub fn level_fraction(label: u8) -> f64 {
    f64::from(label + 1) / f64::from(LEVELS)
}

/// Numeric sampling intervals selected by a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationRanges {
    /// Rotation angle is drawn from `[0, max_rotation]`.
    pub max_rotation: f64,
    /// Each translation component is drawn from `[-translation, translation]`.
    pub translation: f64,
    /// Overall scale is drawn from `[1 - scale, 1 + scale]`.
    pub scale: f64,
    /// Shear coefficients are drawn from `[-shear[i], shear[i]]`.
    pub shear: [f64; 3],
    /// Stretch factors are drawn from `[1 / (1 + stretch[i]), 1 + stretch[i]]`.
    pub stretch: [f64; 3],
    pub primitive_count: usize,
    /// Truncation depth, as a fraction of the part's radius, is drawn from
    /// `[0, truncation]`.
    pub truncation: f64,
}

impl GenerationRanges {
    pub fn from_policy(p: &Policy) -> Self {
        let at = |slot: usize, env: f64| level_fraction(p.label(slot)) * env;
        GenerationRanges {
            max_rotation: at(slot::ROTATION, envelope::ROTATION),
            translation: at(slot::TRANSLATION, envelope::TRANSLATION),
            scale: at(slot::SCALE, envelope::SCALE),
            shear: slot::SHEAR.map(|s| at(s, envelope::SHEAR)),
            stretch: slot::STRETCH.map(|s| at(s, envelope::STRETCH)),
            primitive_count: usize::from(p.label(slot::PRIMITIVE_COUNT)) + 2,
            truncation: at(slot::TRUNCATION, envelope::TRUNCATION),
        }
    }

    pub fn scale_interval(&self) -> (f64, f64) {
        (1.0 - self.scale, 1.0 + self.scale)
    }

    pub fn stretch_interval(&self, axis: usize) -> (f64, f64) {
        (1.0 / (1.0 + self.stretch[axis]), 1.0 + self.stretch[axis])
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=PI).contains(&self.max_rotation)
            && self.translation >= 0.0
            && (0.0..1.0).contains(&self.scale)
            && self.shear.iter().all(|&s| s >= 0.0)
            && self.stretch.iter().all(|&s| s >= 0.0)
            && self.primitive_count >= 1
            && (0.0..1.0).contains(&self.truncation);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid generation ranges {self:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use std::collections::HashSet;

    #[test]
    fn search_space_matches_nine_to_the_eleventh() {
        assert_eq!(search_space_size(), 31_381_059_609);
        assert_eq!(search_space_size(), (0..11).fold(1u64, |a, _| a * 9));
    }

    #[test]
    fn base9_bijection_spot_checks() {
        let mut rng = seed::rng(3);
        for _ in 0..1000 {
            let idx = rng.random_range(0..search_space_size());
            let p = Policy::from_index(idx).unwrap();
            assert_eq!(p.index(), idx);
        }
        assert_eq!(Policy::from_index(0).unwrap().labels(), &[0; 11]);
        assert_eq!(Policy::full_range().index(), search_space_size() - 1);
        assert!(Policy::from_index(search_space_size()).is_err());
    }

    #[test]
    fn label_bounds_enforced() {
        assert!(Policy::new([9; 11]).is_err());
        assert!(Policy::from_slice(&[0; 10]).is_err());
        assert!(Policy::from_json(r#"{"labels":[0,0,0,0,0,0,0,0,0,0,0],"version":2}"#).is_err());
    }

    #[test]
    fn json_format() {
        let p = Policy::new([0, 1, 2, 3, 4, 5, 6, 7, 8, 0, 1]).unwrap();
        assert_eq!(p.to_json(), r#"{"labels":[0,1,2,3,4,5,6,7,8,0,1],"version":1}"#);
        assert_eq!(Policy::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn mapping_examples() {
        let full = Policy::full_range();
        assert_eq!(full.labels(), &[8; 11]);
        let r = full.ranges();
        assert_eq!(r.max_rotation, PI);
        assert_eq!(r.primitive_count, 10);
        let zero = Policy::new([0; 11]).unwrap();
        assert_eq!(zero.ranges().primitive_count, 2);
        let mut labels = [0; 11];
        labels[slot::TRANSLATION] = 2;
        let r = Policy::new(labels).unwrap().ranges();
        assert!((r.translation - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ranges_are_valid_for_extremes() {
        for p in [Policy::new([0; 11]).unwrap(), Policy::full_range()] {
            let r = p.ranges();
            r.validate().unwrap();
            assert!(r.scale_interval().0 > 0.0);
        }
    }

    #[test]
    fn exhaustive_children() {
        let mut rng = seed::rng(5);
        for _ in 0..50 {
            let p = Policy::random(&mut rng);
            let kids: HashSet<Policy> = p.neighbours().collect();
            assert_eq!(kids.len(), 88);
            assert!(kids.iter().all(|k| k.hamming(&p) == 1));
        }
    }

    #[test]
    fn mutate_hits_every_neighbour_uniformly() {
        let p = Policy::new([4; 11]).unwrap();
        let mut rng = seed::rng(9);
        let mut counts = std::collections::HashMap::new();
        let n = 88_000;
        for _ in 0..n {
            *counts.entry(p.mutate(&mut rng)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 88);
        // each child expects 1000; 5 sigma is about 160
        assert!(counts.values().all(|&c| (840..=1160).contains(&c)));
    }

    #[test]
    fn full_range_mutation_lowers_one_label() {
        let mut rng = seed::rng(1);
        let child = Policy::full_range().mutate(&mut rng);
        assert_eq!(child.labels().iter().filter(|&&l| l < 8).count(), 1);
    }

    #[test]
    fn random_policy_cells_are_uniform() {
        let mut rng = seed::rng(2024);
        let mut counts = [[0usize; 9]; 11];
        let n = 90_000;
        for _ in 0..n {
            let p = Policy::random(&mut rng);
            for (slot, &l) in p.labels().iter().enumerate() {
                counts[slot][l as usize] += 1;
            }
        }
        for row in counts {
            for c in row {
                let freq = c as f64 / n as f64;
                assert!((0.10..=0.122).contains(&freq), "{freq}");
            }
        }
    }

    #[test]
    fn random_policy_is_deterministic() {
        assert_eq!(
            Policy::random(&mut seed::rng(77)),
            Policy::random(&mut seed::rng(77))
        );
    }

    proptest! {
        #[test]
        fn mutate_is_hamming_one(idx in 0u64..31_381_059_609, s in any::<u64>()) {
            let p = Policy::from_index(idx).unwrap();
            let child = p.mutate(&mut seed::rng(s));
            prop_assert_eq!(child.hamming(&p), 1);
            prop_assert!(Policy::new(*child.labels()).is_ok());
        }

        #[test]
        fn json_round_trip(idx in 0u64..31_381_059_609) {
            let p = Policy::from_index(idx).unwrap();
            prop_assert_eq!(Policy::from_json(&p.to_json()).unwrap(), p);
        }
    }
}
