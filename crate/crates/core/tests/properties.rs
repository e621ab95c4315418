use proptest::prelude::*;

use podl_core::chain::{make_block, merkle_root, BlockTemplate, ChainStore, Digest, MinerId, Transaction};
use podl_core::dl::{Accuracy, Model};
use podl_core::netsim::Scheduler;

fn model_strategy() -> impl Strategy<Value = Model> {
    (prop::collection::vec(1usize..5, 1..3), 2usize..5).prop_flat_map(|(mut sizes, classes)| {
        sizes.push(classes);
        let w: Vec<_> = sizes.windows(2).map(|p| prop::collection::vec(-1e3f64..1e3, p[0] * p[1])).collect();
        let b: Vec<_> = sizes[1..].iter().map(|&n| prop::collection::vec(-1e3f64..1e3, n)).collect();
        (Just(sizes), w, b).prop_map(|(layer_sizes, weights, biases)| Model { layer_sizes, weights, biases })
    })
}

proptest! {
    #[test]
    fn model_bytes_round_trip(m in model_strategy()) {
        let bytes = m.serialize().unwrap();
        let back = Model::deserialize(&bytes).unwrap();
        prop_assert_eq!(back.serialize().unwrap(), bytes);
        prop_assert_eq!(back, m);
    }

    #[test]
    fn truncated_model_bytes_are_rejected(m in model_strategy(), cut in 1usize..16) {
        let bytes = m.serialize().unwrap();
        let n = bytes.len().saturating_sub(cut);
        prop_assert!(Model::deserialize(&bytes[..n]).is_err());
    }

    #[test]
    fn accuracy_order_matches_rationals(a in 0u64..1000, b in 1u64..1000, c in 0u64..1000, d in 1u64..1000) {
        prop_assume!(a <= b && c <= d);
        let (x, y) = (Accuracy::new(a, b).unwrap(), Accuracy::new(c, d).unwrap());
        prop_assert_eq!(x.cmp(&y), (a * d).cmp(&(c * b)));
    }

    #[test]
    fn merkle_root_commits_to_every_transaction(payloads in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..8), 1..9), idx in any::<prop::sample::Index>()) {
        let mut txs = vec![Transaction::coinbase(50, b"m".to_vec())];
        txs.extend(payloads.into_iter().map(Transaction::transfer));
        let root = merkle_root(&txs).unwrap();
        let i = idx.index(txs.len());
        let mut changed = txs.clone();
        changed[i] = Transaction::transfer(b"tampered-payload-xyz".to_vec());
        prop_assert_ne!(merkle_root(&changed).unwrap(), root);
    }

    #[test]
    fn scheduler_pops_in_time_then_insertion_order(times in prop::collection::vec(0u64..50, 1..40)) {
        let mut s = Scheduler::new();
        for (i, &t) in times.iter().enumerate() {
            s.schedule_at(t, i).unwrap();
        }
        let mut last = (0u64, 0usize);
        let mut first = true;
        while let Some(ev) = s.pop() {
            let key = (ev.fire_at, ev.payload);
            prop_assert!(first || key > last);
            prop_assert_eq!(ev.fire_at, times[ev.payload]);
            last = key;
            first = false;
        }
    }

    #[test]
    fn store_only_accepts_the_next_height(n in 1u64..6, skip in 1u64..4) {
        let model = Model::zeros(&[1, 2]).unwrap();
        let mut store = ChainStore::new();
        let block = |h: u64, prev: Digest| make_block(BlockTemplate {
            height: h,
            prev_header_hash: prev,
            transactions: vec![Transaction::coinbase(50, b"m".to_vec())],
            model: &model,
            training: None,
            claimed_accuracy: None,
            miner_id: MinerId::new("m"),
            now: h,
        }).unwrap();
        for h in 0..n {
            store.append(block(h, store.tip_hash())).unwrap();
        }
        prop_assert!(store.append(block(n + skip, store.tip_hash())).is_err());
        prop_assert!(store.headers_linked());
    }
}
