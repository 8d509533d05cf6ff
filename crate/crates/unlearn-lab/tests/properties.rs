//! Property tests for the structural invariants.

use proptest::prelude::*;

use unlearn_lab::data::{make_split, Dataset, ForgetKind, ForgetSpec};
use unlearn_lab::localization::{
    build_mask, top_k_param_mask, Criterion, CriticalityScores, NeuronScore,
};
use unlearn_lab::nn::{ArchSpec, Model};
use unlearn_lab::unlearning::relabel_forget;

fn balanced_dataset(n: usize, classes: usize) -> Dataset {
    let features: Vec<f32> = (0..n).map(|i| i as f32 / n as f32).collect();
    let labels: Vec<u32> = (0..n).map(|i| (i % classes) as u32).collect();
    Dataset::new("prop", features, labels, 1, classes).unwrap()
}

proptest! {
    #[test]
    fn split_partitions_train_indices(
        n in 10usize..400,
        classes in 2usize..8,
        fraction in 0.02f64..0.9,
        seed in any::<u64>(),
    ) {
        prop_assume!((fraction * n as f64).round() >= 1.0);
        let ds = balanced_dataset(n, classes);
        let split = make_split(&ds, &ForgetSpec {
            kind: ForgetKind::Iid,
            fraction,
            classes: vec![],
            seed,
        }).unwrap();
        let mut all: Vec<usize> = split.forget_indices.iter()
            .chain(&split.retain_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let target = (fraction * n as f64).round() as usize;
        prop_assert!(split.forget_indices.len().abs_diff(target) <= 1);
    }

    #[test]
    fn non_iid_forget_set_is_pure(
        classes in 3usize..8,
        per_class in 10usize..40,
        seed in any::<u64>(),
    ) {
        let n = classes * per_class;
        let ds = balanced_dataset(n, classes);
        let listed = vec![0u32, (classes - 1) as u32];
        let split = make_split(&ds, &ForgetSpec {
            kind: ForgetKind::NonIid,
            fraction: 0.10,
            classes: listed.clone(),
            seed,
        }).unwrap();
        for &i in &split.forget_indices {
            prop_assert!(listed.contains(&ds.labels[i]));
        }
        let target = (0.10 * n as f64).round() as usize;
        prop_assert!(split.forget_indices.len().abs_diff(target) <= listed.len());
    }

    #[test]
    fn budgeted_masks_respect_floor(
        scores in prop::collection::vec(0.0f64..10.0, 1..400),
        alpha in 0.0f64..=1.0,
    ) {
        let p = scores.len();
        let budget = (alpha * p as f64).floor() as usize;
        let mask = top_k_param_mask(&scores, alpha, "prop").unwrap();
        prop_assert_eq!(mask.popcount(), budget);
    }

    #[test]
    fn greedy_mask_is_tight_under_budget(
        counts in prop::collection::vec(1usize..20, 1..30),
        raw_scores in prop::collection::vec(0u32..16, 30),
        alpha in 0.0f64..=1.0,
    ) {
        let mut neurons = Vec::new();
        let mut ranges = Vec::new();
        let mut cursor = 0usize;
        for (i, &count) in counts.iter().enumerate() {
            neurons.push(NeuronScore {
                layer: 0,
                neuron: i,
                score: f64::from(raw_scores[i % raw_scores.len()]),
                param_count: count,
            });
            ranges.push(cursor..cursor + count);
            cursor += count;
        }
        let p = cursor;
        let budget = (alpha * p as f64).floor() as usize;
        let scores = CriticalityScores {
            param_scores: vec![0.0; p],
            neuron_scores: neurons.clone(),
            h: 1,
            criterion: Criterion::WeightedGradForget,
        };
        let mask = build_mask(&scores, &ranges, alpha, p, "prop").unwrap();
        prop_assert!(mask.popcount() <= budget);
        // each group is entirely in or entirely out
        for r in &ranges {
            let pc = mask.popcount_in(r.clone());
            prop_assert!(pc == 0 || pc == r.len());
        }
    }

    #[test]
    fn relabeling_never_keeps_the_original(
        labels in prop::collection::vec(0u32..6, 1..100),
        seed in any::<u64>(),
    ) {
        let relabeled = relabel_forget(&labels, 6, seed);
        for (o, r) in labels.iter().zip(&relabeled) {
            prop_assert_ne!(o, r);
            prop_assert!(*r < 6);
        }
    }

    #[test]
    fn neuron_groups_partition_every_architecture(
        conv_channels in 1usize..5,
        hidden in 1usize..10,
        classes in 2usize..5,
    ) {
        let flat = conv_channels * 9;
        let arch = ArchSpec::parse(&format!(
            "input 1 5 5 | conv2d 1 {conv_channels} 3 | relu | flatten | dense {flat} {hidden} | relu | dense {hidden} {classes}"
        )).unwrap();
        let model = Model::zeros(arch).unwrap();
        let mut seen = vec![0u8; model.param_count()];
        for g in model.neuron_groups() {
            for j in g.range {
                seen[j] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }
}
