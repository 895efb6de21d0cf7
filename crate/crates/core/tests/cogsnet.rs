use fairdyn::cogsnet::{snapshots, CogsnetError, CogsnetParams, TemporalNetwork};
use fairdyn::data::{Channel, IndexedEvent};
use proptest::prelude::*;

const HOUR: i64 = 3600;

fn params(mu: f64, theta: f64, lambda: f64) -> CogsnetParams {
    CogsnetParams::new(mu, theta, lambda).unwrap()
}

fn hourly() -> CogsnetParams {
    params(0.4, 0.1, std::f64::consts::LN_2 / HOUR as f64)
}

#[test]
fn forgetting_values() {
    let p = hourly();
    assert_eq!(p.forgetting(0.0).unwrap(), 1.0);
    assert!((p.forgetting(3600.0).unwrap() - 0.5).abs() < 1e-12);
    let ten = 10.0 / p.lambda;
    assert!((p.forgetting(ten).unwrap() - (-10f64).exp()).abs() < 1e-15);
    assert!((p.forgetting(ten).unwrap() - 4.54e-5).abs() < 1e-7);
    assert!(matches!(p.forgetting(-1.0), Err(CogsnetError::NegativeInterval(_))));
}

#[test]
fn reinforcement_examples() {
    let mut net = TemporalNetwork::new(hourly(), 3).unwrap();
    net.process_event(0, 1, 0, Channel::Call).unwrap();
    assert_eq!(net.weight_at(0, 1, 0).unwrap(), 0.4);
    // one half-life later: 0.4 + 0.4 * 0.5 * 0.6
    net.process_event(1, 0, HOUR, Channel::Text).unwrap();
    let w = net.weight_at(0, 1, HOUR).unwrap();
    assert!((w - 0.52).abs() < 1e-12);
    // immediate repeat: 0.4 + 0.52 * 0.6
    net.process_event(0, 1, HOUR, Channel::Text).unwrap();
    assert!((net.weight_at(0, 1, HOUR).unwrap() - 0.712).abs() < 1e-12);
}

#[test]
fn out_of_order_events_are_rejected_with_both_times() {
    let mut net = TemporalNetwork::new(hourly(), 3).unwrap();
    net.process_event(0, 1, 100, Channel::Call).unwrap();
    let err = net.process_event(1, 2, 50, Channel::Call).unwrap_err();
    assert_eq!(err, CogsnetError::OutOfOrder { clock: 100, event: 50 });
    let msg = err.to_string();
    assert!(msg.contains("100") && msg.contains("50"));
}

#[test]
fn weight_queries() {
    let mut net = TemporalNetwork::new(hourly(), 3).unwrap();
    assert_eq!(net.weight_at(0, 2, 10).unwrap(), 0.0);
    net.process_event(0, 1, 1000, Channel::Call).unwrap();
    assert_eq!(net.weight_at(0, 1, 1000).unwrap(), 0.4);
    // three half-lives: 0.4 / 8 = 0.05 < theta
    assert_eq!(net.weight_at(0, 1, 1000 + 3 * HOUR).unwrap(), 0.0);
    assert!(matches!(
        net.weight_at(0, 1, 999),
        Err(CogsnetError::QueryBeforeLastEvent { query: 999, last: 1000 })
    ));
}

#[test]
fn snapshot_examples() {
    let p = hourly();
    let empty = TemporalNetwork::new(p, 4).unwrap().snapshot_at(0);
    assert_eq!((empty.n(), empty.edge_count()), (4, 0));

    let mut net = TemporalNetwork::new(p, 4).unwrap();
    net.process_event(2, 3, 500, Channel::Text).unwrap();
    let g = net.snapshot_at(500);
    assert_eq!(g.edges().collect::<Vec<_>>(), vec![(2, 3, 0.4)]);
    assert_eq!(net.snapshot_at(500 + 1000 * HOUR).edge_count(), 0);
}

#[test]
fn pruned_edges_restart_at_mu() {
    let mut net = TemporalNetwork::new(hourly(), 2).unwrap();
    net.process_event(0, 1, 0, Channel::Call).unwrap();
    net.process_event(0, 1, 10 * HOUR, Channel::Call).unwrap();
    assert_eq!(net.weight_at(0, 1, 10 * HOUR).unwrap(), 0.4);
}

#[test]
fn invalid_parameters() {
    assert!(CogsnetParams::new(0.4, 0.5, 1.0).is_err());
    assert!(CogsnetParams::new(1.2, 0.1, 1.0).is_err());
    assert!(CogsnetParams::new(0.4, 0.1, 0.0).is_err());
    assert!(CogsnetParams::new(0.4, 0.0, 1.0).is_err());
}

#[test]
fn replayed_snapshots_match_direct_processing() {
    let p = hourly();
    let events: Vec<IndexedEvent> = (0..20)
        .map(|i| IndexedEvent {
            source: i % 3,
            target: 3 + i % 2,
            timestamp: i as i64 * 900,
            channel: Channel::Call,
        })
        .collect();
    let times = [0, 5000, 9000, 30000];
    let snaps = snapshots(p, 5, &events, &times).unwrap();
    for (t, snap) in times.iter().zip(&snaps) {
        let mut net = TemporalNetwork::new(p, 5).unwrap();
        for e in events.iter().filter(|e| e.timestamp <= *t) {
            net.process(e).unwrap();
        }
        assert_eq!(&net.snapshot_at(*t), snap);
    }
}

fn event_stream() -> impl Strategy<Value = Vec<(usize, usize, i64)>> {
    proptest::collection::vec((0usize..5, 0usize..5, 0i64..20_000), 1..80).prop_map(|mut v| {
        v.retain(|(a, b, _)| a != b);
        v.sort_by_key(|e| e.2);
        v
    })
}

fn params_strategy() -> impl Strategy<Value = CogsnetParams> {
    (0.05f64..=1.0, 0.01f64..0.99, 1e-5f64..1e-2).prop_map(|(mu, frac, lambda)| params(mu, mu * frac, lambda))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn stored_weights_stay_in_unit_interval(p in params_strategy(), events in event_stream()) {
        let mut net = TemporalNetwork::new(p, 5).unwrap();
        for (a, b, t) in events {
            net.process_event(a, b, t, Channel::Text).unwrap();
            for (_, e) in net.stored_edges() {
                prop_assert!(e.weight_at_last_event > 0.0 && e.weight_at_last_event <= 1.0);
            }
        }
    }

    #[test]
    fn forgetting_is_monotone_and_pruning_idempotent(
        p in params_strategy(),
        events in event_stream(),
        probes in proptest::collection::vec(0i64..200_000, 1..20),
    ) {
        let mut net = TemporalNetwork::new(p, 5).unwrap();
        let last = events.last().map(|e| e.2).unwrap_or(0);
        for (a, b, t) in &events {
            net.process_event(*a, *b, *t, Channel::Call).unwrap();
        }
        let mut probes: Vec<i64> = probes.into_iter().map(|d| last + d).collect();
        probes.sort_unstable();
        for ((u, v), _) in net.stored_edges() {
            let mut prev = f64::INFINITY;
            for &t in &probes {
                let w = net.weight_at(u, v, t).unwrap();
                prop_assert!(w <= prev);
                if prev == 0.0 {
                    prop_assert_eq!(w, 0.0);
                }
                prev = w;
            }
        }
    }

    #[test]
    fn two_event_closed_form(p in params_strategy(), t1 in 0i64..1_000_000, gap in 0i64..1_000_000) {
        let mut net = TemporalNetwork::new(p, 2).unwrap();
        net.process_event(0, 1, t1, Channel::Call).unwrap();
        net.process_event(0, 1, t1 + gap, Channel::Call).unwrap();
        let decayed = p.mu * (-p.lambda * gap as f64).exp();
        let want = if decayed >= p.theta { p.mu + decayed * (1.0 - p.mu) } else { p.mu };
        prop_assert!((net.weight_at(0, 1, t1 + gap).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn same_timestamp_order_is_irrelevant(p in params_strategy(), events in event_stream(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        // shuffle within each timestamp, keeping each pair's own events in order
        let mut shuffled = events.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut i = 0;
        while i < shuffled.len() {
            let j = shuffled[i..].iter().position(|e| e.2 != shuffled[i].2).map_or(shuffled.len(), |k| i + k);
            shuffled[i..j].shuffle(&mut rng);
            i = j;
        }
        let run = |evs: &[(usize, usize, i64)]| {
            let mut net = TemporalNetwork::new(p, 5).unwrap();
            for (a, b, t) in evs {
                net.process_event(*a, *b, *t, Channel::Call).unwrap();
            }
            net.stored_edges().map(|(k, e)| (k, *e)).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(&events), run(&shuffled));
    }
}
