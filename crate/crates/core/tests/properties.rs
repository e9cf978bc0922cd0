mod common;

use common::*;
use layerrank_core::eval::{score_query, QueryRun};
use layerrank_core::explain::{explain_excluded, explain_included, ExplanationKind};
use layerrank_core::hierarchy::{
    hierarchical_compare, level_compare, ComparatorSpec, DocumentId, Hierarchy, OptionThought, PartialOrdering, ScoreMatrix, Slot,
};
use layerrank_core::pipeline::{
    apply_metric, replay_trace, run_pipeline, verify_trace, AggregationMetric, RunOptions,
};
use layerrank_core::providers::{score_threshold, ProviderRegistry};
use layerrank_core::ranking::{depth_map, maximal_set, progressive_top_k, progressive_top_k_staged, top_k};
use proptest::prelude::*;
use rand::Rng as _;

fn pairs(tiers: &[(DocumentId, usize)]) -> Vec<(DocumentId, usize)> {
    tiers.to_vec()
}

fn ranked_pairs(out: &layerrank_core::ranking::RankedOutput) -> Vec<(DocumentId, usize)> {
    out.survivors.iter().map(|d| (d.clone(), out.depth(d).unwrap())).collect()
}

/// `inst` with an extra document scored exactly like `original`.
fn with_twin(inst: &Instance, original: &DocumentId) -> (Instance, DocumentId) {
    let twin = DocumentId::new("twin").unwrap();
    let mut matrix = inst.matrix.clone();
    for (t, s) in inst.matrix.row(original).unwrap() {
        matrix.insert(twin.clone(), t.clone(), *s).unwrap();
    }
    let mut docs = inst.docs.clone();
    docs.push(twin.clone());
    (Instance { docs, matrix, hierarchy: inst.hierarchy.clone() }, twin)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn level_comparison_axioms(seed in any::<u64>()) {
        let inst = instance(&mut rng(seed), 8, 3);
        for slot in inst.hierarchy.slots() {
            let cmp = |a: &DocumentId, b: &DocumentId| level_compare(&inst.matrix, a, b, slot.thoughts(), slot.comparator()).unwrap();
            for a in &inst.docs {
                for b in &inst.docs {
                    let ab = cmp(a, b);
                    prop_assert_eq!(cmp(b, a), ab.reverse());
                    if slot.comparator().is_total() {
                        prop_assert_ne!(ab, PartialOrdering::Incomparable);
                    }
                    let dominated = slot.thoughts().iter().all(|t| inst.matrix.get(a, &t.id) <= inst.matrix.get(b, &t.id));
                    if dominated {
                        prop_assert!(matches!(ab, PartialOrdering::Worse | PartialOrdering::Equivalent));
                    }
                    for c in &inst.docs {
                        if ab == PartialOrdering::Better && cmp(b, c) == PartialOrdering::Better {
                            prop_assert_eq!(cmp(a, c), PartialOrdering::Better);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn identical_scores_are_interchangeable(seed in any::<u64>()) {
        let inst = instance(&mut rng(seed), 8, 3);
        let original = inst.docs[0].clone();
        let (twin_inst, twin) = with_twin(&inst, &original);
        prop_assert_eq!(hierarchical_compare(&twin_inst.matrix, &original, &twin, &inst.hierarchy).unwrap(), PartialOrdering::Equivalent);
        for other in &inst.docs {
            prop_assert_eq!(
                hierarchical_compare(&twin_inst.matrix, &twin, other, &inst.hierarchy).unwrap(),
                hierarchical_compare(&twin_inst.matrix, &original, other, &inst.hierarchy).unwrap()
            );
        }
    }

    #[test]
    fn hierarchical_better_is_transitive_and_persists(seed in any::<u64>()) {
        let inst = instance(&mut rng(seed), 8, 4);
        let h = &inst.hierarchy;
        for a in &inst.docs {
            for b in &inst.docs {
                let full = hierarchical_compare(&inst.matrix, a, b, h).unwrap();
                for j in 1..=h.len() {
                    if hierarchical_compare(&inst.matrix, a, b, &h.prefix(j)).unwrap() == PartialOrdering::Better {
                        prop_assert_eq!(full, PartialOrdering::Better);
                    }
                }
                if full != PartialOrdering::Better {
                    continue;
                }
                for c in &inst.docs {
                    if hierarchical_compare(&inst.matrix, b, c, h).unwrap() == PartialOrdering::Better {
                        prop_assert_eq!(hierarchical_compare(&inst.matrix, a, c, h).unwrap(), PartialOrdering::Better);
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_a_slot_keeps_its_outcomes(seed in any::<u64>(), exponent in -10i32..=10) {
        // powers of two scale exactly, so ties survive floating-point rounding
        let factor = 2f64.powi(exponent);
        let inst = instance(&mut rng(seed), 8, 3);
        for slot in inst.hierarchy.slots() {
            let scaled: Vec<OptionThought> = slot.thoughts().iter().map(|t| t.clone().with_weight(t.weight * factor)).collect();
            for a in &inst.docs {
                for b in &inst.docs {
                    prop_assert_eq!(
                        level_compare(&inst.matrix, a, b, &scaled, slot.comparator()).unwrap(),
                        level_compare(&inst.matrix, a, b, slot.thoughts(), slot.comparator()).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn ranking_matches_the_oracle(seed in any::<u64>(), k in 1usize..=3) {
        let inst = instance(&mut rng(seed), 12, 4);
        let expected = oracle_top_k(&inst, k);
        let one_shot = top_k(&inst.docs, &inst.matrix, &inst.hierarchy, k).unwrap();
        let progressive = progressive_top_k(&inst.docs, &inst.matrix, &inst.hierarchy, k).unwrap();
        prop_assert_eq!(ranked_pairs(&one_shot), pairs(&expected));
        prop_assert_eq!(ranked_pairs(&progressive), pairs(&expected));
    }

    #[test]
    fn pruned_documents_are_deep(seed in any::<u64>(), k in 1usize..=3) {
        let inst = instance(&mut rng(seed), 12, 4);
        let depths = oracle_depths(&inst);
        let (_, stages) = progressive_top_k_staged(&inst.docs, &inst.matrix, &inst.hierarchy, k).unwrap();
        for stage in stages {
            for d in stage.pruned {
                let i = inst.docs.iter().position(|x| *x == d).unwrap();
                prop_assert!(depths[i] >= k);
            }
        }
    }

    #[test]
    fn tiers_nest_and_cover(seed in any::<u64>()) {
        let inst = instance(&mut rng(seed), 10, 3);
        let mut previous: Vec<DocumentId> = Vec::new();
        for k in 1..=inst.docs.len() {
            let current = top_k(&inst.docs, &inst.matrix, &inst.hierarchy, k).unwrap().survivors;
            prop_assert!(is_subset(&previous, &current));
            previous = current;
        }
        let mut covered = previous.clone();
        covered.sort();
        let mut all = inst.docs.clone();
        all.sort();
        prop_assert_eq!(covered, all);
    }

    #[test]
    fn maximal_set_is_depth_zero(seed in any::<u64>()) {
        let inst = instance(&mut rng(seed), 10, 3);
        let depths = depth_map(&inst.docs, &inst.matrix, &inst.hierarchy).unwrap();
        let zero: Vec<DocumentId> = depths.iter().filter(|(_, d)| *d == 0).map(|(id, _)| id.clone()).collect();
        prop_assert_eq!(maximal_set(&inst.docs, &inst.matrix, &inst.hierarchy).unwrap(), zero);
    }

    #[test]
    fn weaker_slot_never_lowers_depth(seed in any::<u64>()) {
        let inst = instance(&mut rng(seed), 10, 4);
        let h = &inst.hierarchy;
        for j in 1..h.len() {
            let shorter = depth_map(&inst.docs, &inst.matrix, &h.prefix(j)).unwrap();
            let longer = depth_map(&inst.docs, &inst.matrix, &h.prefix(j + 1)).unwrap();
            for d in &inst.docs {
                prop_assert!(longer.get(d).unwrap() >= shorter.get(d).unwrap());
            }
        }
    }

    #[test]
    fn explanations_are_sound_and_complete(seed in any::<u64>(), k in 1usize..=3) {
        let inst = instance(&mut rng(seed), 10, 4);
        let ranked = top_k(&inst.docs, &inst.matrix, &inst.hierarchy, k).unwrap();
        let flat: Vec<_> = inst.hierarchy.thoughts().map(|t| t.id.clone()).collect();
        for d in &inst.docs {
            if ranked.contains(d) {
                let e = explain_included(&inst.matrix, d, k, &ranked, &inst.hierarchy, &[]).unwrap();
                if let ExplanationKind::Included { witness: Some(w), .. } = &e.kind {
                    prop_assert!(!e.fallback);
                    prop_assert_eq!(hierarchical_compare(&inst.matrix, d, w, &inst.hierarchy).unwrap(), PartialOrdering::Better);
                } else {
                    prop_assert!(e.fallback);
                }
            } else {
                let e = explain_excluded(&inst.matrix, d, k, &ranked, &inst.hierarchy).unwrap();
                let ExplanationKind::Excluded { witness, .. } = &e.kind else { panic!("wrong kind") };
                prop_assert!(ranked.contains(witness));
                prop_assert_eq!(hierarchical_compare(&inst.matrix, witness, d, &inst.hierarchy).unwrap(), PartialOrdering::Better);
                // every thought appears once, in hierarchy order
                let listed: Vec<_> = e.soft_thoughts().cloned().collect();
                let mut expected = flat.clone();
                expected.retain(|t| listed.contains(t));
                prop_assert_eq!(listed, expected);
                prop_assert_eq!(e.slots.len(), inst.hierarchy.len());
            }
        }
    }

    #[test]
    fn metric_subsets(seed in any::<u64>(), k in 1usize..=4) {
        let mut r = rng(seed);
        let docs: Vec<DocumentId> = (0..r.random_range(1..=10)).map(doc).collect();
        let mut matrix = ScoreMatrix::new();
        let base = binary_layer(&mut r, &docs, &mut matrix, AggregationMetric::All);
        let thoughts = base.thoughts().count();
        let run = |metric| apply_metric(&[], &docs, &matrix, &with_metric(&base, metric)).unwrap().0;
        let locally = run(AggregationMetric::LocallyBetter);
        prop_assert!(is_subset(&run(AggregationMetric::MaxCount), &locally));
        prop_assert!(is_subset(&run(AggregationMetric::MaxWeight), &locally));
        let all = run(AggregationMetric::All);
        let at_least_one = run(AggregationMetric::AtLeastK(1));
        prop_assert!(is_subset(&at_least_one, &docs));
        if k <= thoughts {
            let at_least_k = run(AggregationMetric::AtLeastK(k));
            prop_assert!(is_subset(&all, &at_least_k));
            prop_assert!(is_subset(&at_least_k, &at_least_one));
        }
    }

    #[test]
    fn staged_pipeline_equals_flat_ranking(seed in any::<u64>()) {
        let p = comparator_pipeline(&mut rng(seed), 8);
        let registry = ProviderRegistry::new().with_table(p.table.clone());
        let run = run_pipeline(&p.spec, &p.corpus, "q", &registry, &RunOptions::default()).unwrap();
        let docs: Vec<DocumentId> = p.corpus.iter().map(|d| d.id.clone()).collect();
        let flat = top_k(&docs, &p.table.to_matrix(), &p.flat, p.spec.top_k.unwrap()).unwrap();
        let mut staged = ranked_pairs(&run.output);
        let mut expected = ranked_pairs(&flat);
        staged.sort();
        expected.sort();
        prop_assert_eq!(staged, expected);
    }

    #[test]
    fn runs_replay_and_repeat(seed in any::<u64>()) {
        let p = comparator_pipeline(&mut rng(seed), 8);
        let registry = ProviderRegistry::new().with_table(p.table.clone());
        let first = run_pipeline(&p.spec, &p.corpus, "q", &registry, &RunOptions { parallelism: 1, ..Default::default() }).unwrap();
        let second = run_pipeline(&p.spec, &p.corpus, "q", &registry, &RunOptions { parallelism: 3, ..Default::default() }).unwrap();
        prop_assert_eq!(&first, &second);
        let replayed = replay_trace(&first.trace).unwrap();
        let recorded: Vec<_> = first.trace.layers.iter().map(|r| r.survivors.clone()).collect();
        prop_assert_eq!(replayed, recorded);
        verify_trace(&first.trace).unwrap();
    }

    #[test]
    fn threshold_is_monotone(inner in 0.0f64..100.0, bump in 0.0f64..10.0, tau in 0.0f64..100.0, raise in 0.0f64..10.0) {
        prop_assert!(score_threshold(inner, tau) <= score_threshold(inner + bump, tau));
        prop_assert!(score_threshold(inner, tau + raise) <= score_threshold(inner, tau));
        prop_assert!(matches!(score_threshold(inner, tau), 0.0 | 1.0));
    }

    #[test]
    fn reported_f2_matches_reported_precision_and_recall(retrieved in proptest::collection::vec(0u8..12, 0..10), relevant in proptest::collection::vec(0u8..12, 1..6)) {
        let names = |v: &[u8]| v.iter().map(|i| format!("d{i}")).collect();
        let s = score_query(&QueryRun { query: "q".into(), retrieved: names(&retrieved), relevant: names(&relevant) }).unwrap();
        let recomputed = if s.precision + s.recall == 0.0 { 0.0 } else { 5.0 * s.precision * s.recall / (4.0 * s.precision + s.recall) };
        prop_assert!((s.f2 - recomputed).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&s.f2));
    }
}

#[test]
fn single_slot_local_hierarchy_is_the_pareto_front() {
    let inst = instance(&mut rng(7), 12, 1);
    let local = Hierarchy::new(vec![Slot::new(inst.hierarchy.slots()[0].thoughts().to_vec(), ComparatorSpec::Local).unwrap()]).unwrap();
    let front = maximal_set(&inst.docs, &inst.matrix, &local).unwrap();
    for d in &inst.docs {
        let dominated = inst.docs.iter().any(|e| {
            let ts = local.slots()[0].thoughts();
            ts.iter().all(|t| inst.matrix.get(e, &t.id) >= inst.matrix.get(d, &t.id))
                && ts.iter().any(|t| inst.matrix.get(e, &t.id) > inst.matrix.get(d, &t.id))
        });
        assert_eq!(front.contains(d), !dominated, "{d:?}");
    }
}
