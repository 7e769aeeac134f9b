use ctxaug_core::compose::{BackgroundSetup, SourceRef};
use ctxaug_core::dataset::schedule_epoch;
use ctxaug_core::CategoryLabel;

fn refs(prefix: &str, n: usize) -> Vec<SourceRef> {
    (0..n).map(|i| SourceRef::new(format!("{prefix}{i}"), CategoryLabel::new((i % 10) as u8).unwrap())).collect()
}

#[test]
fn pair_frequencies_are_uniform() {
    let n = 4;
    let epochs = 1000u64;
    let (fgs, bgs) = (refs("f", n), refs("b", n));
    let mut counts = vec![0u32; n * n];
    for epoch in 0..epochs {
        let s = schedule_epoch(BackgroundSetup::AllCategoriesBgWithFg, &fgs, &bgs, 2024, epoch).unwrap();
        for (f, b, _) in &s.pairs {
            let fi: usize = f[1..].parse().unwrap();
            let bi: usize = b[1..].parse().unwrap();
            counts[fi * n + bi] += 1;
        }
    }
    let expected = epochs as f64 / n as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // (n-1)^2 degrees of freedom; mean + 3 standard deviations.
    let df = ((n - 1) * (n - 1)) as f64;
    assert!(chi2 <= df + 3.0 * (2.0 * df).sqrt(), "chi2 {chi2} counts {counts:?}");
}

#[test]
fn same_category_epochs_stay_within_category() {
    let fgs = refs("f", 20);
    let bgs = refs("b", 20);
    for epoch in 0..50 {
        let s = schedule_epoch(BackgroundSetup::SameCategoryBgWithFg, &fgs, &bgs, 5, epoch).unwrap();
        for (f, b, label) in &s.pairs {
            let fi: usize = f[1..].parse().unwrap();
            let bi: usize = b[1..].parse().unwrap();
            assert_eq!(fi % 10, bi % 10);
            assert_eq!(label.index(), fi % 10);
        }
    }
}
