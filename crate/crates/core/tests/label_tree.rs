mod common;

use common::{check_tree, random_reps, unit};
use mapletag::label_tree::{balanced_2means, build_forest, build_tree, label_representations};
use mapletag::{LabelRepresentation, SparseVector, TreeConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sum over groups of the cosine similarity between each member and the group's
/// normalized centroid.
fn objective(reps: &[LabelRepresentation<f64>], groups: [&[u32]; 2]) -> f64 {
    let dim = reps[0].vector.dim();
    groups
        .iter()
        .map(|g| {
            let mut sum = vec![0.0; dim];
            for &l in g.iter() {
                reps[l as usize].vector.axpy_into(1.0, &mut sum);
            }
            let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
            g.iter()
                .map(|&l| reps[l as usize].vector.dot_dense(&sum) / norm)
                .sum::<f64>()
        })
        .sum()
}

#[test]
fn two_means_groups_identical_directions() {
    let e = |i| unit(2, vec![(i, 1.0)]);
    let reps: Vec<_> = [0, 0, 1, 1]
        .into_iter()
        .enumerate()
        .map(|(l, axis)| LabelRepresentation {
            label: l as u32,
            vector: e(axis),
        })
        .collect();
    // Brute force over the three balanced partitions of four labels.
    let partitions: [([u32; 2], [u32; 2]); 3] = [([0, 1], [2, 3]), ([0, 2], [1, 3]), ([0, 3], [1, 2])];
    let best = partitions
        .iter()
        .max_by(|a, b| objective(&reps, [&a.0, &a.1]).total_cmp(&objective(&reps, [&b.0, &b.1])))
        .unwrap();
    assert_eq!(*best, ([0, 1], [2, 3]));
    for seed in 0..10 {
        let (a, b) = balanced_2means(&reps, seed, &TreeConfig::default());
        let mut groups = [a, b];
        groups.sort();
        assert_eq!(groups, [vec![0, 1], vec![2, 3]], "seed {seed}");
    }
}

#[test]
fn two_means_sizes() {
    let cfg = TreeConfig::default();
    let (a, b) = balanced_2means(&random_reps(2, 5, 1), 3, &cfg);
    assert_eq!((a.len(), b.len()), (1, 1));
    let (a, b) = balanced_2means(&random_reps(5, 5, 1), 3, &cfg);
    assert_eq!((a.len(), b.len()), (3, 2));
}

#[test]
fn two_means_beats_random_balanced_assignments() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut wins = 0;
    for trial in 0..100 {
        let n = rng.gen_range(4..40);
        let reps = random_reps(n, 12, trial);
        let (a, b) = balanced_2means(&reps, trial, &TreeConfig::default());
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(&mut rng);
        let (ra, rb) = perm.split_at(n.div_ceil(2));
        if objective(&reps, [&a, &b]) >= objective(&reps, [ra, rb]) - 1e-12 {
            wins += 1;
        }
    }
    assert!(wins >= 95, "2-means beat a random assignment in only {wins}/100 trials");
}

#[test]
fn boundary_and_example_trees() {
    let cfg = TreeConfig::default();
    let single = build_tree(&random_reps(100, 20, 2), &cfg, 0);
    assert_eq!(single.nodes().len(), 1);

    let tree = build_tree(&random_reps(250, 30, 3), &cfg, 0);
    check_tree(&tree, 250, 100);
    let leaves: Vec<usize> = tree.leaves().map(|(_, n)| n.labels.len()).collect();
    assert_eq!(leaves.len(), 4);
    assert_eq!(tree.depth(), 2);
    assert!(tree.leaves().all(|(_, n)| n.depth == 2));
    let mut sizes = leaves.clone();
    sizes.sort_unstable();
    assert_eq!(sizes, [62, 62, 63, 63]);

    let small = TreeConfig {
        max_leaf_labels: 2,
        ..cfg
    };
    let tree = build_tree(&random_reps(3, 4, 4), &small, 0);
    assert_eq!(tree.depth(), 1);
    let mut sizes: Vec<usize> = tree.leaves().map(|(_, n)| n.labels.len()).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, [1, 2]);
}

#[test]
fn forests_are_deterministic_and_cover_all_labels() {
    let reps = random_reps(300, 25, 5);
    let cfg = TreeConfig {
        max_leaf_labels: 20,
        ..TreeConfig::default()
    };
    let forest = build_forest(&reps, &cfg);
    assert_eq!(forest.len(), 3);
    assert_eq!(forest, build_forest(&reps, &cfg));
    for (t, tree) in forest.iter().enumerate() {
        assert_eq!(*tree, build_tree(&reps, &cfg, cfg.seed + t as u64));
        check_tree(tree, 300, 20);
    }
    let one = TreeConfig { num_trees: 1, ..cfg };
    assert_eq!(build_forest(&reps, &one), vec![build_tree(&reps, &one, one.seed)]);
    let other = build_forest(&reps, &TreeConfig { seed: 17, ..cfg });
    for tree in &other {
        check_tree(tree, 300, 20);
    }
}

#[test]
fn representations_are_normalized_means() {
    let e1 = SparseVector::new(3, vec![(0, 1.0)]).unwrap();
    let e2 = SparseVector::new(3, vec![(1, 1.0)]).unwrap();
    let x = SparseVector::new(3, vec![(0, 3.0), (2, 4.0)]).unwrap();
    let reps = label_representations(&[e1, e2, x], &[vec![0], vec![0], vec![1]], 2, 0).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((reps[0].vector.get(0) - h).abs() < 1e-15 && (reps[0].vector.get(1) - h).abs() < 1e-15);
    assert_eq!(reps[1].vector.values(), &[0.6, 0.8]);
    assert!(label_representations(&[SparseVector::<f64>::zeros(3)], &[vec![0]], 2, 0).is_err());
}

#[test]
fn all_zero_label_gets_a_unit_direction() {
    let reps = label_representations(&[SparseVector::<f64>::zeros(50)], &[vec![0]], 1, 4).unwrap();
    assert!((reps[0].vector.norm() - 1.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn trees_satisfy_structure_invariants(n in 2usize..400, max_leaf in 2usize..60, seed in 0u64..1000) {
        let reps = random_reps(n, 16, seed);
        let cfg = TreeConfig { max_leaf_labels: max_leaf, ..TreeConfig::default() };
        let tree = build_tree(&reps, &cfg, seed);
        check_tree(&tree, n, max_leaf);
        prop_assert_eq!(&tree, &build_tree(&reps, &cfg, seed));
    }
}
