use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{CategoryLabel, DatasetError, Result};
use crate::compose::{BackgroundSetup, SourceRef};
use crate::seed::{rng_from, stream};

/// One epoch of pairings in which every foreground and every background is
/// used exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochSchedule {
    pub epoch: u64,
    /// `(foreground id, background id, label)` in foreground-id order.
    pub pairs: Vec<(String, String, CategoryLabel)>,
}

/// Pairs foregrounds with a seeded random permutation of the backgrounds.
/// For the same-category setup the permutation is drawn per category.
pub fn schedule_epoch(
    setup: BackgroundSetup,
    fgs: &[SourceRef],
    bgs: &[SourceRef],
    seed: u64,
    epoch: u64,
) -> Result<EpochSchedule> {
    let mut fgs = fgs.to_vec();
    let mut bgs = bgs.to_vec();
    fgs.sort();
    bgs.sort();
    let pairs = match setup {
        BackgroundSetup::AllCategoriesBgWithFg => {
            if fgs.len() != bgs.len() {
                return Err(DatasetError::CountMismatch(format!("{} foregrounds vs {} backgrounds", fgs.len(), bgs.len())));
            }
            let mut perm: Vec<usize> = (0..bgs.len()).collect();
            perm.shuffle(&mut rng_from(&[stream::SCHEDULE, seed, epoch]));
            fgs.iter().zip(perm).map(|(f, j)| (f.id.clone(), bgs[j].id.clone(), f.label)).collect()
        }
        BackgroundSetup::SameCategoryBgWithFg => {
            let mut fg_by: BTreeMap<CategoryLabel, Vec<&SourceRef>> = BTreeMap::new();
            let mut bg_by: BTreeMap<CategoryLabel, Vec<&SourceRef>> = BTreeMap::new();
            for f in &fgs {
                fg_by.entry(f.label).or_default().push(f);
            }
            for b in &bgs {
                bg_by.entry(b.label).or_default().push(b);
            }
            let labels: Vec<_> = fg_by.keys().chain(bg_by.keys()).copied().collect();
            let mut chosen: BTreeMap<&str, &str> = BTreeMap::new();
            for label in labels {
                let f = fg_by.get(&label).map_or(&[][..], Vec::as_slice);
                let b = bg_by.get(&label).map_or(&[][..], Vec::as_slice);
                if f.len() != b.len() {
                    return Err(DatasetError::CountMismatch(format!(
                        "category {label}: {} foregrounds vs {} backgrounds",
                        f.len(),
                        b.len()
                    )));
                }
                let mut perm: Vec<usize> = (0..b.len()).collect();
                perm.shuffle(&mut rng_from(&[stream::SCHEDULE, seed, epoch, 1 + label.id() as u64]));
                for (fi, j) in f.iter().zip(perm) {
                    chosen.insert(&fi.id, &b[j].id);
                }
            }
            fgs.iter().map(|f| (f.id.clone(), chosen[f.id.as_str()].to_string(), f.label)).collect()
        }
        other => return Err(DatasetError::UnsupportedSetup(other)),
    };
    Ok(EpochSchedule { epoch, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn refs(prefix: &str, n: usize, classes: u8) -> Vec<SourceRef> {
        (0..n).map(|i| SourceRef::new(format!("{prefix}{i:04}"), CategoryLabel::new(i as u8 % classes).unwrap())).collect()
    }

    #[test]
    fn single_pair() {
        let s = schedule_epoch(BackgroundSetup::AllCategoriesBgWithFg, &refs("f", 1, 1), &refs("b", 1, 1), 1, 0).unwrap();
        assert_eq!(s.pairs, vec![("f0000".to_string(), "b0000".to_string(), CategoryLabel::new(0).unwrap())]);
    }

    #[test]
    fn three_is_a_permutation() {
        let s = schedule_epoch(BackgroundSetup::AllCategoriesBgWithFg, &refs("f", 3, 3), &refs("b", 3, 2), 9, 4).unwrap();
        let bgs: BTreeSet<_> = s.pairs.iter().map(|p| p.1.clone()).collect();
        assert_eq!(bgs.len(), 3);
    }

    #[test]
    fn same_category_respects_labels() {
        let fg = refs("f", 20, 4);
        let bg = refs("b", 20, 4);
        let s = schedule_epoch(BackgroundSetup::SameCategoryBgWithFg, &fg, &bg, 2, 7).unwrap();
        let bg_label = |id: &str| bg.iter().find(|b| b.id == id).unwrap().label;
        assert!(s.pairs.iter().all(|(_, b, l)| bg_label(b) == *l));
        assert_eq!(s.pairs.iter().map(|p| &p.1).collect::<BTreeSet<_>>().len(), 20);
    }

    #[test]
    fn mismatched_counts() {
        assert!(matches!(
            schedule_epoch(BackgroundSetup::AllCategoriesBgWithFg, &refs("f", 3, 1), &refs("b", 2, 1), 0, 0),
            Err(DatasetError::CountMismatch(_))
        ));
        assert!(matches!(
            schedule_epoch(BackgroundSetup::SameCategoryBgWithFg, &refs("f", 4, 2), &refs("b", 4, 1), 0, 0),
            Err(DatasetError::CountMismatch(_))
        ));
        assert!(matches!(
            schedule_epoch(BackgroundSetup::GrayBgWithFg, &refs("f", 4, 2), &refs("b", 4, 2), 0, 0),
            Err(DatasetError::UnsupportedSetup(_))
        ));
    }

    #[test]
    fn epochs_differ_and_repeat() {
        let (fg, bg) = (refs("f", 30, 1), refs("b", 30, 1));
        let a = schedule_epoch(BackgroundSetup::AllCategoriesBgWithFg, &fg, &bg, 5, 0).unwrap();
        let b = schedule_epoch(BackgroundSetup::AllCategoriesBgWithFg, &fg, &bg, 5, 1).unwrap();
        assert_ne!(a.pairs, b.pairs);
        assert_eq!(a, schedule_epoch(BackgroundSetup::AllCategoriesBgWithFg, &fg, &bg, 5, 0).unwrap());
    }

    proptest! {
        #[test]
        fn always_a_bijection(n in 1usize..40, classes in 1u8..6, seed: u64, epoch in 0u64..1000) {
            let (fg, bg) = (refs("f", n, classes), refs("b", n, classes));
            for setup in [BackgroundSetup::AllCategoriesBgWithFg, BackgroundSetup::SameCategoryBgWithFg] {
                let s = schedule_epoch(setup, &fg, &bg, seed, epoch).unwrap();
                prop_assert_eq!(s.pairs.len(), n);
                prop_assert_eq!(s.pairs.iter().map(|p| &p.0).collect::<BTreeSet<_>>().len(), n);
                prop_assert_eq!(s.pairs.iter().map(|p| &p.1).collect::<BTreeSet<_>>().len(), n);
            }
        }
    }
}
