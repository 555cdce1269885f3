//! Independent families of random signs with reproducible, splittable seeds.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// One step of the splitmix64 generator, used only to mix seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `salt` under `parent`; distinct salts give unrelated streams.
pub fn derive_seed(parent: u64, salt: u64) -> u64 {
    splitmix64(parent ^ splitmix64(salt))
}

/// Seed of sample `sample` at size `n`: `derive(derive(master, n), sample)`.
/// Each sign family `f` of that sample then draws from ChaCha8 seeded with
/// `derive(task, f)`.
pub fn task_seed(master: u64, n: usize, sample: usize) -> u64 {
    derive_seed(derive_seed(master, n as u64), sample as u64)
}

/// Signs `a_j` for `j` in a contiguous index range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignFamily {
    pub lo: i64,
    pub signs: Vec<i8>,
}

impl SignFamily {
    pub fn constant(range: RangeInclusive<i64>) -> Self {
        let len = (range.end() - range.start() + 1).max(0) as usize;
        Self {
            lo: *range.start(),
            signs: vec![1; len],
        }
    }

    pub fn range(&self) -> RangeInclusive<i64> {
        self.lo..=self.lo + self.signs.len() as i64 - 1
    }

    pub fn get(&self, j: i64) -> Option<f64> {
        let i = usize::try_from(j - self.lo).ok()?;
        self.signs.get(i).map(|&s| f64::from(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RademacherDraw {
    /// `None` for hand-built draws (enumeration, unsigned families).
    pub seed: Option<u64>,
    pub families: Vec<SignFamily>,
}

impl RademacherDraw {
    pub fn generate(seed: u64, ranges: &[RangeInclusive<i64>]) -> Self {
        let families = ranges
            .iter()
            .enumerate()
            .map(|(f, range)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, f as u64));
                let len = (range.end() - range.start() + 1).max(0) as usize;
                SignFamily {
                    lo: *range.start(),
                    signs: (0..len).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect(),
                }
            })
            .collect();
        Self {
            seed: Some(seed),
            families,
        }
    }

    pub fn from_families(families: Vec<SignFamily>) -> Self {
        Self { seed: None, families }
    }

    /// All signs `+1`.
    pub fn constant(ranges: &[RangeInclusive<i64>]) -> Self {
        Self::from_families(ranges.iter().cloned().map(SignFamily::constant).collect())
    }

    pub fn family(&self, f: usize) -> Result<&SignFamily> {
        self.families.get(f).ok_or_else(|| {
            LabError::InvalidParameter(format!(
                "draw has {} sign families, family {f} requested",
                self.families.len()
            ))
        })
    }

    pub fn sign(&self, f: usize, j: i64) -> Result<f64> {
        let fam = self.family(f)?;
        fam.get(j).ok_or_else(|| {
            LabError::InvalidParameter(format!(
                "sign family {f} covers {:?}, index {j} requested",
                fam.range()
            ))
        })
    }
}
