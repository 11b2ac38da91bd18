mod common;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;

use common::*;
use seqsel::diversity::{build_bow, diversity_score, kmeans_cosine, lsa_fit, PairNormalization};
use seqsel::lexmodel::{bag_prob, InstanceBag, Vocabulary, WordModel};
use seqsel::pipeline::oracle_search;
use seqsel::selector::{celf_select, generate_sequences, greedy_select, wta_associate, CostModel, RegionSequence, SelectionStrategy, SentenceLexicalSet};
use seqsel::submodular::{
    kl_divergence, LexicalMode, LexicalProbMap, Region, ScoringOptions, SequenceObjective, SubmodularWeights,
};

fn weights_strategy() -> impl Strategy<Value = SubmodularWeights> {
    (0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64).prop_map(|(a, b, c)| SubmodularWeights::new(a, b, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noisy_or_is_order_free_and_monotone(seed in any::<u64>(), v in 1usize..4, d in 1usize..4, n in 1usize..6) {
        let mut r = rng(seed);
        let model = WordModel::new(
            v,
            d,
            (0..v * d).map(|_| r.gen_range(-3.0..3.0)).collect(),
            (0..v).map(|_| r.gen_range(-3.0..3.0)).collect(),
        ).unwrap();
        let mut inst: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
        let labels = vec![true; v];
        let p = bag_prob(&model, &InstanceBag::new(inst.clone(), labels.clone()).unwrap()).unwrap();
        inst.reverse();
        let q = bag_prob(&model, &InstanceBag::new(inst.clone(), labels.clone()).unwrap()).unwrap();
        prop_assert_eq!(&p, &q);
        inst.push((0..d).map(|_| r.gen_range(-2.0..2.0)).collect());
        let grown = bag_prob(&model, &InstanceBag::new(inst, labels).unwrap()).unwrap();
        for (a, b) in grown.iter().zip(&p) {
            prop_assert!(a >= b);
            prop_assert!((0.0..=1.0).contains(a));
        }
    }

    #[test]
    fn incremental_gain_matches_recompute(seed in any::<u64>(), w in weights_strategy(), transform in any::<bool>()) {
        let mut r = rng(seed);
        let raw = random_raw(&mut r, 4, 3, 3, 4, 3);
        let (p, f) = raw.maps();
        let options = ScoringOptions { coherence_transform: transform, ..ScoringOptions::default() };
        let obj = SequenceObjective::new(&p, &f, w, LexicalMode::Unsupervised, options).unwrap();
        // one earlier sequence supplies a stored distribution
        let first = greedy_select(&obj, &[]).unwrap();
        let existing = vec![obj.distribution(first.sequence.regions()).unwrap()];
        let mut state = obj.empty_state(existing.clone()).unwrap();
        let mut cells: Vec<usize> = Vec::new();
        for t in 0..raw.frames {
            let before = if cells.is_empty() { 0.0 } else { obj.evaluate_value(&cells, &existing).unwrap() };
            let candidates = seqsel::selector::feasible_candidates(p.grid(), cells.last().copied()).unwrap();
            for &c in &candidates {
                let mut next = cells.clone();
                next.push(c);
                let after = obj.evaluate_value(&next, &existing).unwrap();
                let gain = obj.marginal_gain(&state, Region::new(t, c)).unwrap();
                prop_assert!((gain - (after - before)).abs() <= 1e-9, "gain {} vs {}", gain, after - before);
            }
            let pick = candidates[r.gen_range(0..candidates.len())];
            obj.commit(&mut state, Region::new(t, pick)).unwrap();
            cells.push(pick);
            let fresh = obj.evaluate(&cells, &existing).unwrap();
            prop_assert!(fresh.div >= 0.0);
        }
    }

    #[test]
    fn scaling_weights_scales_gains(seed in any::<u64>(), w in weights_strategy(), k in -3i32..4) {
        let c = 2f64.powi(k);
        let mut r = rng(seed);
        let raw = random_raw(&mut r, 5, 3, 3, 5, 3);
        let (p, f) = raw.maps();
        let obj = SequenceObjective::new(&p, &f, w, LexicalMode::Unsupervised, ScoringOptions::default()).unwrap();
        let scaled = obj.with_weights(w.scaled(c).unwrap()).unwrap();
        let state = obj.empty_state(vec![]).unwrap();
        for g in 0..9 {
            let a = obj.marginal_gain(&state, Region::new(0, g)).unwrap();
            let b = scaled.marginal_gain(&state, Region::new(0, g)).unwrap();
            prop_assert_eq!(b, a * c);
        }
        prop_assert_eq!(greedy_select(&obj, &[]).unwrap().sequence, greedy_select(&scaled, &[]).unwrap().sequence);
        let odd = obj.with_weights(w.scaled(0.37).unwrap()).unwrap();
        for g in 0..9 {
            let a = obj.marginal_gain(&state, Region::new(0, g)).unwrap();
            let b = odd.marginal_gain(&state, Region::new(0, g)).unwrap();
            prop_assert!((b - 0.37 * a).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn selections_are_feasible_and_dominated(seed in any::<u64>(), w in weights_strategy()) {
        let mut r = rng(seed);
        let raw = random_small(&mut r, 4, 4, 6);
        let (p, f) = raw.maps();
        let obj = SequenceObjective::new(&p, &f, w, LexicalMode::Unsupervised, ScoringOptions::default()).unwrap();
        let oracle = oracle_search(&obj, &[]).unwrap();
        for strategy in [SelectionStrategy::Greedy, SelectionStrategy::Celf] {
            let s = strategy.select(&obj, &[]).unwrap();
            prop_assert_eq!(s.sequence.len(), raw.frames);
            for pair in s.sequence.regions().windows(2) {
                prop_assert!(adjacent(raw.cols, pair[0], pair[1]));
            }
            prop_assert!(s.value <= oracle.value);
        }
    }

    #[test]
    fn celf_with_costs_returns_a_feasible_sequence(seed in any::<u64>()) {
        let mut r = rng(seed);
        let raw = random_raw(&mut r, 6, 3, 3, 5, 3);
        let (p, f) = raw.maps();
        let obj = SequenceObjective::new(&p, &f, SubmodularWeights::new(1.0, 0.0, 0.0).unwrap(), LexicalMode::Unsupervised, ScoringOptions::default()).unwrap();
        let costs = CostModel::PerRegion((0..9).map(|_| r.gen_range(0.5..2.0)).collect());
        let c = celf_select(&obj, &[], &costs).unwrap();
        let uc = celf_select(&obj, &[], &CostModel::Unit).unwrap();
        // the better of the two passes is kept, so costs never hurt R
        prop_assert!(c.value >= uc.value);
        prop_assert_eq!(c.sequence.len(), 6);
    }

    #[test]
    fn generated_sequences_carry_valid_distributions(seed in any::<u64>(), k in 1usize..4) {
        let mut r = rng(seed);
        let raw = random_raw(&mut r, 4, 2, 3, 6, 3);
        let (p, f) = raw.maps();
        let obj = SequenceObjective::new(&p, &f, SubmodularWeights::ones(), LexicalMode::Unsupervised, ScoringOptions::default()).unwrap();
        let seqs = generate_sequences(&obj, k, &SelectionStrategy::Celf).unwrap();
        prop_assert_eq!(seqs.len(), k);
        prop_assert_eq!(seqs[0].components.div, 0.0);
        for s in &seqs {
            let total: f64 = s.distribution.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(s.distribution.iter().all(|&x| x > 0.0));
            prop_assert!(s.components.div >= 0.0);
        }
    }

    #[test]
    fn kl_is_gibbs(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum(); v.into_iter().map(|x| x / s).collect::<Vec<_>>() };
        let p = norm((0..n).map(|_| r.gen_range(0.01..1.0)).collect());
        let q = norm((0..n).map(|_| r.gen_range(0.01..1.0)).collect());
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-15);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-15);
    }

    #[test]
    fn wta_winner_survives_power_of_two_rescaling(seed in any::<u64>(), k in 1i32..5) {
        let c = 2f64.powi(-k);
        let mut r = rng(seed);
        let raw = random_small(&mut r, 4, 4, 6);
        let (p, _) = raw.maps();
        let all = all_sequences(&raw);
        let seqs: Vec<RegionSequence> = (0..3).map(|_| RegionSequence::new(p.grid(), all[r.gen_range(0..all.len())].clone()).unwrap()).collect();
        let sentences: Vec<SentenceLexicalSet> = (0..2).map(|i| SentenceLexicalSet::new(format!("s{i}"), (0..raw.vocab).filter(|_| r.gen_bool(0.5)).collect())).collect();
        let theta = r.gen_range(0.0..0.9);
        let scaled = LexicalProbMap::new(p.grid(), raw.frames, raw.vocab, raw.probs.iter().map(|x| x * c).collect()).unwrap();
        let a = wta_associate(&sentences, &seqs, &p, theta).unwrap();
        let b = wta_associate(&sentences, &seqs, &scaled, theta * c).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.sequence, y.sequence);
            prop_assert_eq!(x.score * c, y.score);
        }
    }

    #[test]
    fn diversity_ignores_caption_order(seed in any::<u64>(), n in 2usize..8) {
        let mut r = rng(seed);
        let words = ["man", "dog", "ball", "runs", "guitar", "plays", "car", "road", "red", "woman"];
        let captions: Vec<String> = (0..n)
            .map(|_| (0..r.gen_range(1..5)).map(|_| words[r.gen_range(0..words.len())]).collect::<Vec<_>>().join(" "))
            .collect();
        let vocab = Vocabulary::from_captions(&captions).unwrap();
        let mut shuffled = captions.clone();
        shuffled.reverse();
        shuffled.rotate_left(r.gen_range(0..n));
        for norm in [PairNormalization::UnorderedPairs, PairNormalization::PerCaption] {
            let a = diversity_score(&captions, &vocab, None, norm).unwrap();
            let b = diversity_score(&shuffled, &vocab, None, norm).unwrap();
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
            prop_assert!(a >= -1e-12);
        }
    }

    #[test]
    fn kmeans_objective_never_increases(seed in any::<u64>(), n in 2usize..20, k in 1usize..5) {
        let k = k.min(n);
        let mut r = rng(seed);
        let vectors: Vec<Vec<f64>> = (0..n).map(|_| unit_vector(&mut r, 4)).collect();
        let c = kmeans_cosine(&vectors, k, seed).unwrap();
        for pair in c.objective_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
        let mut members: Vec<usize> = c.clusters.iter().flat_map(|x| x.members.clone()).collect();
        members.sort();
        prop_assert_eq!(members, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(c.clusters.len(), k);
        for cl in &c.clusters {
            prop_assert!(cl.members.contains(&cl.representative));
        }
    }

    #[test]
    fn svd_matches_gram_eigenvalues(seed in any::<u64>(), terms in 2usize..9, sentences in 2usize..9) {
        let mut r = rng(seed);
        let names: Vec<String> = (0..terms).map(|i| format!("t{i}")).collect();
        let vocab = Vocabulary::new(names.clone()).unwrap();
        let counts: Vec<Vec<usize>> = (0..sentences).map(|_| (0..terms).map(|_| r.gen_range(0..4)).collect()).collect();
        let captions: Vec<String> = counts.iter().map(|col| {
            col.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(names[i].as_str(), c)).collect::<Vec<_>>().join(" ")
        }).collect();
        let bow = build_bow(&captions, &vocab).unwrap();
        let a = DMatrix::from_fn(terms, sentences, |i, j| counts[j][i] as f64);
        let mut oracle: Vec<f64> = SymmetricEigen::new(&a * a.transpose()).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
        oracle.sort_by(|x, y| y.total_cmp(x));
        let k = terms.min(sentences);
        let space = lsa_fit(&bow, k, seed).unwrap();
        for (s, o) in space.singular_values().iter().zip(&oracle) {
            prop_assert!((s - o).abs() <= 1e-6, "{} vs {}", s, o);
        }
        let u = space.left_vectors();
        let err = (u.transpose() * u - DMatrix::<f64>::identity(k, k)).abs().max();
        prop_assert!(err <= 1e-6);
    }
}
