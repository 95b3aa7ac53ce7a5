use super::Paper;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Train / validation / test partition of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<Paper>,
    pub valid: Vec<Paper>,
    pub test: Vec<Paper>,
}

/// Papers from `test_start_year` on go to test; the earlier ones are shuffled
/// with `seed` and `valid_fraction` of them (rounded) go to validation.
///
/// Within each part papers keep their input order.
pub fn split_by_year(papers: &[Paper], test_start_year: i32, valid_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(0.0..1.0).contains(&valid_fraction) {
        return Err(Error::InvalidInput(format!(
            "valid fraction {valid_fraction} must lie in [0, 1)"
        )));
    }
    let (test, pool): (Vec<&Paper>, Vec<&Paper>) = papers.iter().partition(|p| p.year >= test_start_year);
    let n_valid = (pool.len() as f64 * valid_fraction).round() as usize;
    if pool.len() <= n_valid {
        return Err(Error::EmptyTrainPool);
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_valid = vec![false; pool.len()];
    for &i in &order[..n_valid] {
        is_valid[i] = true;
    }
    let mut train = Vec::with_capacity(pool.len() - n_valid);
    let mut valid = Vec::with_capacity(n_valid);
    for (paper, v) in pool.into_iter().zip(is_valid) {
        if v {
            valid.push(paper.clone());
        } else {
            train.push(paper.clone());
        }
    }
    Ok(DatasetSplit {
        train,
        valid,
        test: test.into_iter().cloned().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn paper(id: usize, year: i32) -> Paper {
        Paper {
            id: format!("p{id}"),
            title: String::new(),
            abstract_text: String::new(),
            venue: None,
            authors: vec![],
            references: vec![],
            labels: BTreeSet::from(["l".to_string()]),
            year,
        }
    }

    #[test]
    fn boundary_years_route_correctly() {
        let papers = vec![paper(0, 2016), paper(1, 1981), paper(2, 2015), paper(3, 2020)];
        let split = split_by_year(&papers, 2016, 0.0, 1).unwrap();
        let test: Vec<_> = split.test.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(test, vec!["p0", "p3"]);
        assert_eq!(split.train.len(), 2);
    }

    #[test]
    fn valid_count_and_determinism() {
        let papers: Vec<Paper> = (0..100).map(|i| paper(i, 1990 + (i % 20) as i32)).collect();
        let a = split_by_year(&papers, 2016, 0.2, 7).unwrap();
        let b = split_by_year(&papers, 2016, 0.2, 7).unwrap();
        assert_eq!(a.valid.len(), 20);
        assert_eq!(a.train.len(), 80);
        assert_eq!(a, b);
        let c = split_by_year(&papers, 2016, 0.2, 8).unwrap();
        assert_ne!(a.valid, c.valid);
    }

    #[test]
    fn empty_pool_is_an_error() {
        let papers = vec![paper(0, 2017)];
        assert!(matches!(
            split_by_year(&papers, 2016, 0.2, 0),
            Err(Error::EmptyTrainPool)
        ));
        assert!(matches!(split_by_year(&[], 2016, 0.2, 0), Err(Error::EmptyTrainPool)));
    }

    proptest! {
        #[test]
        fn split_partitions_input(
            years in proptest::collection::vec(1981i32..2021, 1..60),
            frac in 0.0f64..0.9,
            seed in any::<u64>(),
        ) {
            let papers: Vec<Paper> = years.iter().enumerate().map(|(i, &y)| paper(i, y)).collect();
            match split_by_year(&papers, 2016, frac, seed) {
                Ok(s) => {
                    let mut ids: Vec<&str> = s.train.iter().chain(&s.valid).chain(&s.test).map(|p| p.id.as_str()).collect();
                    prop_assert_eq!(ids.len(), papers.len());
                    ids.sort();
                    ids.dedup();
                    prop_assert_eq!(ids.len(), papers.len());
                    prop_assert!(s.test.iter().all(|p| p.year >= 2016));
                    prop_assert!(s.train.iter().chain(&s.valid).all(|p| p.year < 2016));
                }
                Err(e) => prop_assert!(matches!(e, Error::EmptyTrainPool)),
            }
        }
    }
}
