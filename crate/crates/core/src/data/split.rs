use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::record::{Dataset, SplitTag, UserRecord};
use crate::error::{HanError, Result};

/// `(train, val, test)` sizes for `n` users: val and test each get
/// `round(0.2 n)`, train takes the rest.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let held = (2 * n + 5) / 10;
    (n - 2 * held, held, held)
}

/// Largest-remainder allocation of `total` across classes of the given sizes.
fn allocate(total: usize, sizes: [usize; 2]) -> [usize; 2] {
    let n: usize = sizes.iter().sum();
    let mut out = [0; 2];
    let mut rems = [(0usize, 0usize); 2];
    for c in 0..2 {
        out[c] = total * sizes[c] / n;
        rems[c] = (total * sizes[c] % n, c);
    }
    let mut left = total - out.iter().sum::<usize>();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in &rems {
        if left == 0 {
            break;
        }
        out[c] += 1;
        left -= 1;
    }
    out
}

/// Seeded, label-stratified 60/20/20 user split. Users are tagged with
/// their split.
pub fn split(dataset: &Dataset, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let n = dataset.len();
    if n < 5 {
        return Err(HanError::TooFewUsers(format!("need at least 5 users, got {n}")));
    }
    let counts = dataset.label_counts();
    if counts.iter().any(|&c| c < 2) {
        return Err(HanError::TooFewUsers(format!(
            "need at least 2 users per class, got {} negative / {} positive",
            counts[0], counts[1]
        )));
    }
    let (_, n_val, n_test) = split_counts(n);
    let val_q = allocate(n_val, counts);
    let test_q = allocate(n_test, counts);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<UserRecord>; 3] = Default::default();
    for (label, (&nv, &nt)) in val_q.iter().zip(&test_q).enumerate() {
        let mut idx: Vec<usize> = (0..n).filter(|&i| dataset.users[i].label as usize == label).collect();
        idx.shuffle(&mut rng);
        for (k, &i) in idx.iter().enumerate() {
            let (slot, tag) = if k < nv {
                (1, SplitTag::Val)
            } else if k < nv + nt {
                (2, SplitTag::Test)
            } else {
                (0, SplitTag::Train)
            };
            let mut u = dataset.users[i].clone();
            u.split = Some(tag);
            parts[slot].push(u);
        }
    }
    for p in &mut parts {
        p.shuffle(&mut rng);
    }
    let [train, val, test] = parts;
    let d = dataset.d;
    Ok((
        Dataset { d, users: train },
        Dataset { d, users: val },
        Dataset { d, users: test },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Mat;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn dataset(pos: usize, neg: usize) -> Dataset {
        let users = (0..pos + neg)
            .map(|i| UserRecord {
                user_id: format!("u{i}"),
                label: u8::from(i < pos),
                tweets: vec!["t".into()],
                mcms: vec![],
                tweet_emb: Mat::zeros(1, 1),
                mcm_emb: Mat::zeros(0, 1),
                split: None,
            })
            .collect();
        Dataset::new(1, users).unwrap()
    }

    #[test]
    fn counts() {
        assert_eq!(split_counts(10), (6, 2, 2));
        assert_eq!(split_counts(4208), (2524, 842, 842));
        let (tr, va, te) = split(&dataset(5, 5), 1).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (6, 2, 2));
        assert_eq!(va.label_counts(), [1, 1]);
    }

    #[test]
    fn mdl_sized_split_is_stratified() {
        let (tr, va, te) = split(&dataset(2159, 2049), 7).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (2524, 842, 842));
        assert_eq!(va.label_counts(), [410, 432]);
        assert_eq!(te.label_counts(), [410, 432]);
    }

    #[test]
    fn deterministic_and_tagged() {
        let ds = dataset(8, 7);
        let a = split(&ds, 3).unwrap();
        assert_eq!(a, split(&ds, 3).unwrap());
        assert_ne!(a, split(&ds, 4).unwrap());
        assert!(a.0.users.iter().all(|u| u.split == Some(SplitTag::Train)));
        assert!(a.2.users.iter().all(|u| u.split == Some(SplitTag::Test)));
    }

    #[test]
    fn too_few_users() {
        assert!(matches!(split(&dataset(2, 2), 0), Err(HanError::TooFewUsers(_))));
        assert!(matches!(split(&dataset(9, 1), 0), Err(HanError::TooFewUsers(_))));
    }

    proptest! {
        #[test]
        fn split_is_a_partition(pos in 2usize..40, neg in 2usize..40, seed in any::<u64>()) {
            prop_assume!(pos + neg >= 5);
            let ds = dataset(pos, neg);
            let (tr, va, te) = split(&ds, seed).unwrap();
            let mut ids = HashSet::new();
            for u in tr.users.iter().chain(&va.users).chain(&te.users) {
                prop_assert!(ids.insert(u.user_id.clone()));
            }
            prop_assert_eq!(ids.len(), ds.len());
            let (ntr, nva, nte) = split_counts(ds.len());
            prop_assert_eq!((tr.len(), va.len(), te.len()), (ntr, nva, nte));
        }
    }
}
