use proptest::prelude::*;
use relayflow_core::flowgraph::{
    conservation_residuals, cut_flow, enumerate_cuts, is_conserving, min_cut_value, random_conserving_allocation,
    reduced_min_cut, Cut, SlotSchedule,
};
use relayflow_core::RandomSource;

#[test]
fn cut_counts() {
    for n in 3..=8 {
        let cuts = enumerate_cuts(n).unwrap();
        assert_eq!(cuts.len(), 1 << (n - 2));
        let mut sides: Vec<u64> = cuts.iter().map(Cut::source_side).collect();
        sides.sort_unstable();
        sides.dedup();
        assert_eq!(sides.len(), cuts.len());
        assert!(cuts.iter().all(|c| c.on_source_side(0) && !c.on_source_side(n - 1)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reduced_cuts_bound_every_cut(n in 4usize..=6, seed in any::<u64>()) {
        let schedule = SlotSchedule::canonical(n).unwrap();
        let mut rng = RandomSource::new(seed, 0).rng();
        let alloc = random_conserving_allocation(&schedule, &mut rng);
        prop_assert!(is_conserving(&alloc));
        prop_assert!(conservation_residuals(&alloc).iter().all(|r| r.abs() < 1e-9));
        let reduced = reduced_min_cut(&alloc).unwrap();
        for cut in enumerate_cuts(n).unwrap() {
            prop_assert!(cut_flow(&cut, &alloc) >= reduced - 1e-9);
        }
        prop_assert!((min_cut_value(&alloc) - reduced).abs() < 1e-9);
    }

    #[test]
    fn cut_flow_is_linear(n in 3usize..=6, seed in any::<u64>(), a in 0.0f64..5.0, b in 0.0f64..5.0) {
        let schedule = SlotSchedule::canonical(n).unwrap();
        let mut rng = RandomSource::new(seed, 1).rng();
        let f1 = random_conserving_allocation(&schedule, &mut rng);
        let f2 = random_conserving_allocation(&schedule, &mut rng);
        let mix = f1.combine(a, &f2, b).unwrap();
        for cut in enumerate_cuts(n).unwrap() {
            let want = a * cut_flow(&cut, &f1) + b * cut_flow(&cut, &f2);
            prop_assert!((cut_flow(&cut, &mix) - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }
}

#[test]
fn reduced_form_rejects_leaky_allocations() {
    let schedule = SlotSchedule::canonical(4).unwrap();
    let mut alloc = relayflow_core::flowgraph::FlowAllocation::zeros(schedule);
    alloc.set(0, 0, 1, 0.5).unwrap();
    assert!(!is_conserving(&alloc));
    assert!(reduced_min_cut(&alloc).is_err());
}

#[test]
fn json_dump_uses_slot_keys() {
    let schedule = SlotSchedule::canonical(4).unwrap();
    let mut rng = RandomSource::new(3, 0).rng();
    let alloc = random_conserving_allocation(&schedule, &mut rng);
    let v = alloc.to_json();
    let text = v.to_string();
    assert!(text.contains("\"slots\""), "{text}");
    let flows = v["flows"].as_object().unwrap();
    assert!(flows.keys().all(|k| {
        let (slot, link) = k.split_once(':').unwrap();
        slot.parse::<usize>().is_ok() && link.contains("->")
    }));
}
