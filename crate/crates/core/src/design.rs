//! Planned wave-missingness designs.
//!
//! A design is a `groups × waves` grid of observed/missing flags plus integer
//! allocation weights. Participants are split across groups in proportion to
//! the weights; a participant whose group misses a wave loses every indicator
//! of both constructs at that wave.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::lgm::{wave_of, DataMatrix, N_VARS, WAVES};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingDesign {
    name: String,
    waves: usize,
    /// Row-major `groups × waves`, `true` = observed.
    group_wave_mask: Vec<bool>,
    allocation: Vec<u32>,
}

impl MissingDesign {
    pub fn new(
        name: impl Into<String>,
        group_wave_mask: Vec<Vec<bool>>,
        allocation: Vec<u32>,
    ) -> Result<Self> {
        let groups = group_wave_mask.len();
        if groups == 0 {
            return Err(Error::InvalidDesign("design has no groups".into()));
        }
        let waves = group_wave_mask[0].len();
        if waves != WAVES {
            return Err(Error::InvalidDesign(format!(
                "design has {waves} waves, the growth model has {WAVES}"
            )));
        }
        if let Some(g) = group_wave_mask.iter().position(|r| r.len() != waves) {
            return Err(Error::InvalidDesign(format!(
                "group {} has a different number of waves",
                g + 1
            )));
        }
        if let Some(g) = group_wave_mask.iter().position(|r| !r.iter().any(|&o| o)) {
            return Err(Error::InvalidDesign(format!(
                "group {} observes no wave",
                g + 1
            )));
        }
        if allocation.len() != groups {
            return Err(Error::InvalidDesign(format!(
                "{} allocation weights for {groups} groups",
                allocation.len()
            )));
        }
        if allocation.iter().all(|&w| w == 0) {
            return Err(Error::InvalidDesign(
                "allocation weights are all zero".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            waves,
            group_wave_mask: group_wave_mask.into_iter().flatten().collect(),
            allocation,
        })
    }

    /// Equal allocation across groups.
    pub fn balanced(name: impl Into<String>, group_wave_mask: Vec<Vec<bool>>) -> Result<Self> {
        let g = group_wave_mask.len();
        Self::new(name, group_wave_mask, vec![1; g])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn groups(&self) -> usize {
        self.group_wave_mask.len() / self.waves
    }

    pub fn waves(&self) -> usize {
        self.waves
    }

    pub fn observed(&self, group: usize, wave: usize) -> bool {
        self.group_wave_mask[group * self.waves + wave]
    }

    pub fn group_row(&self, group: usize) -> &[bool] {
        &self.group_wave_mask[group * self.waves..(group + 1) * self.waves]
    }

    pub fn allocation(&self) -> &[u32] {
        &self.allocation
    }

    pub fn proportions(&self) -> Vec<f64> {
        let total: u64 = self.allocation.iter().map(|&w| u64::from(w)).sum();
        self.allocation
            .iter()
            .map(|&w| f64::from(w) / total as f64)
            .collect()
    }

    /// Rows per group for `n` participants: `floor(n·w/W)` each, with the
    /// remainder handed out one by one starting from the first group.
    pub fn group_sizes(&self, n: usize) -> Vec<usize> {
        let total: u64 = self.allocation.iter().map(|&w| u64::from(w)).sum();
        let mut sizes: Vec<usize> = self
            .allocation
            .iter()
            .map(|&w| (n as u64 * u64::from(w) / total) as usize)
            .collect();
        let mut remainder = n - sizes.iter().sum::<usize>();
        for s in sizes.iter_mut() {
            if remainder == 0 {
                break;
            }
            *s += 1;
            remainder -= 1;
        }
        sizes
    }
}

/// Simple wave missing design with six groups: group 1 is complete and group
/// `g ∈ 2..=6` misses wave `7 − g`.
pub fn swmd6() -> MissingDesign {
    let rows = (0..6)
        .map(|g| {
            (0..WAVES)
                .map(|t| g == 0 || t != WAVES - g)
                .collect::<Vec<_>>()
        })
        .collect();
    MissingDesign::balanced("swmd6", rows).expect("SWMD-6 is a valid design")
}

/// A single fully observed group.
pub fn complete_design() -> MissingDesign {
    MissingDesign::balanced("complete", vec![vec![true; WAVES]]).expect("valid design")
}

/// Balanced group labels (0-based), randomly permuted across rows.
pub fn assign_groups<R: Rng + ?Sized>(
    n: usize,
    design: &MissingDesign,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n < design.groups() {
        return Err(Error::InsufficientSample {
            needed: design.groups(),
            got: n,
        });
    }
    let mut labels: Vec<usize> = design
        .group_sizes(n)
        .into_iter()
        .enumerate()
        .flat_map(|(g, size)| core::iter::repeat_n(g, size))
        .collect();
    labels.shuffle(rng);
    Ok(labels)
}

/// Masks every column of each wave the row's group does not observe.
/// Values are copied untouched; only the mask changes.
pub fn apply_design(
    data: &DataMatrix,
    labels: &[usize],
    design: &MissingDesign,
) -> Result<DataMatrix> {
    if labels.len() != data.n_rows() {
        return Err(Error::LengthMismatch {
            expected: data.n_rows(),
            got: labels.len(),
        });
    }
    if data.n_cols() != N_VARS {
        return Err(Error::InvalidDesign(format!(
            "data has {} columns, the growth model layout has {N_VARS}",
            data.n_cols()
        )));
    }
    let groups = design.groups();
    if let Some(&label) = labels.iter().find(|&&l| l >= groups) {
        return Err(Error::InvalidGroup { label, groups });
    }
    let mut out = data.clone();
    let n_cols = data.n_cols();
    let mask = out.mask_mut();
    for (r, &g) in labels.iter().enumerate() {
        let row = design.group_row(g);
        for c in 0..n_cols {
            if !row[wave_of(c)] {
                mask[r * n_cols + c] = false;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgm::column_names;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const O: bool = true;
    const X: bool = false;

    #[test]
    fn swmd6_table() {
        let d = swmd6();
        let expected = [
            [O, O, O, O, O],
            [O, O, O, O, X],
            [O, O, O, X, O],
            [O, O, X, O, O],
            [O, X, O, O, O],
            [X, O, O, O, O],
        ];
        assert_eq!(d.groups(), 6);
        for (g, row) in expected.iter().enumerate() {
            assert_eq!(d.group_row(g), row, "group {}", g + 1);
        }
        for t in 0..WAVES {
            assert_eq!((0..6).filter(|&g| d.observed(g, t)).count(), 5);
        }
    }

    #[test]
    fn group_sizes_balanced() {
        let d = swmd6();
        assert_eq!(d.group_sizes(60), vec![10; 6]);
        assert_eq!(d.group_sizes(40), vec![7, 7, 7, 7, 6, 6]);
        assert_eq!(d.group_sizes(6), vec![1; 6]);
        let lopsided = MissingDesign::new("x", vec![vec![true; 5]; 2], vec![1, 2]).unwrap();
        assert_eq!(lopsided.group_sizes(10), vec![4, 6]);
    }

    #[test]
    fn assignment_counts_and_determinism() {
        let d = swmd6();
        let a = assign_groups(40, &d, &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        let b = assign_groups(40, &d, &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let mut counts = [0; 6];
        for &g in &a {
            counts[g] += 1;
        }
        assert_eq!(counts, [7, 7, 7, 7, 6, 6]);
        assert_eq!(
            assign_groups(5, &d, &mut ChaCha20Rng::seed_from_u64(3)),
            Err(Error::InsufficientSample { needed: 6, got: 5 })
        );
    }

    fn data(n: usize) -> DataMatrix {
        let values = (0..n * N_VARS).map(|i| i as f64 * 0.5).collect();
        DataMatrix::complete(N_VARS, values, column_names()).unwrap()
    }

    #[test]
    fn apply_masks_whole_waves() {
        let d = swmd6();
        let x = data(6);
        let labels = [0, 1, 2, 3, 4, 5];
        let m = apply_design(&x, &labels, &d).unwrap();
        assert_eq!(m.values(), x.values());
        assert!(m.row_mask(0).iter().all(|&o| o));
        let row6 = m.row_mask(5);
        let missing: Vec<usize> = (0..N_VARS).filter(|&c| !row6[c]).collect();
        assert_eq!(missing.len(), 6);
        assert!(missing.iter().all(|&c| wave_of(c) == 0));
        assert_eq!(apply_design(&m, &labels, &d).unwrap(), m);
    }

    #[test]
    fn missing_fraction_is_one_sixth() {
        let d = swmd6();
        let n = 600;
        let labels = assign_groups(n, &d, &mut ChaCha20Rng::seed_from_u64(11)).unwrap();
        let m = apply_design(&data(n), &labels, &d).unwrap();
        assert_eq!(m.missing_count(), 5 * 100 * 6);
        assert_eq!(m.missing_count() * 6, n * N_VARS);
    }

    #[test]
    fn apply_rejects_bad_labels() {
        let d = swmd6();
        assert_eq!(
            apply_design(&data(2), &[0, 6], &d),
            Err(Error::InvalidGroup {
                label: 6,
                groups: 6
            })
        );
        assert!(matches!(
            apply_design(&data(2), &[0], &d),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn design_validation() {
        assert!(MissingDesign::balanced("e", vec![]).is_err());
        assert!(MissingDesign::balanced("w", vec![vec![true; 4]]).is_err());
        assert!(MissingDesign::balanced("none", vec![vec![false; 5]]).is_err());
        assert!(MissingDesign::new("z", vec![vec![true; 5]], vec![0]).is_err());
        assert_eq!(complete_design().groups(), 1);
    }
}
