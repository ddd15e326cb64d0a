use adp_core::data::{
    load_trajectory, load_transactions, parse_trajectory, parse_transactions, synth_concentrated_visits,
    synth_zipf_transactions, TrajectoryDataset, TransactionDataset,
};
use adp_core::monitor::Visit;
use adp_core::{CountingQuery, Policy};
use proptest::prelude::*;

fn transactions() -> impl Strategy<Value = TransactionDataset> {
    prop::collection::vec(prop::collection::vec(0u32..40, 0..8), 0..30).prop_map(TransactionDataset::from_records)
}

fn trajectories() -> impl Strategy<Value = TrajectoryDataset> {
    prop::collection::vec((0u64..100, 0u64..20, -50i64..50), 0..60).prop_map(|v| {
        TrajectoryDataset::new(
            v.into_iter().map(|(user_id, location_id, timestamp)| Visit { user_id, location_id, timestamp }).collect(),
            [],
        )
    })
}

proptest! {
    #[test]
    fn transactions_round_trip(t in transactions()) {
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = parse_transactions(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(back.item_counts(), t.item_counts());
    }

    #[test]
    fn trajectories_round_trip(t in trajectories()) {
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        prop_assert_eq!(parse_trajectory(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn counts_agree_after_conversion(t in transactions()) {
        let d = t.to_dataset().unwrap();
        let policy = Policy::visited_is_sensitive(d.attribute_count());
        for (pos, &item) in t.item_universe.iter().enumerate() {
            let q = CountingQuery::new(pos, true, &policy).unwrap();
            prop_assert_eq!(q.evaluate(&d).unwrap(), t.count(item));
            prop_assert_eq!(t.item_counts()[pos], t.count(item));
        }
    }
}

#[test]
fn files_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let tp = dir.path().join("t.dat");
    let t = synth_zipf_transactions(300, 40, 1.1, 5).unwrap();
    t.write(std::fs::File::create(&tp).unwrap()).unwrap();
    assert_eq!(load_transactions(&tp).unwrap(), t);

    let vp = dir.path().join("v.csv");
    let v = synth_concentrated_visits(400, 200, 0.05, 5).unwrap();
    v.write(std::fs::File::create(&vp).unwrap()).unwrap();
    assert_eq!(load_trajectory(&vp).unwrap().visits, v.visits);
    assert!(load_transactions(dir.path().join("missing")).is_err());
}

#[test]
fn zipf_counts_follow_rank() {
    let t = synth_zipf_transactions(10_000, 500, 1.0, 1).unwrap();
    assert_eq!(t.len(), 10_000);
    let mut counts = t.item_counts();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    // the head should dominate the tail by roughly the rank ratio
    assert!(counts[0] > 20 * counts[199]);
    assert!(counts[99] > 0);
}

#[test]
fn empty_baskets_convert() {
    let t = TransactionDataset::from_records(vec![vec![], vec![]]);
    let d = t.to_dataset().unwrap();
    assert_eq!(d.len(), 2);
    assert_eq!(d.count_value(0, true), 0);
}
