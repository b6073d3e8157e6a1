mod common;

use common::network;
use pem_core::harness::{random_market, MarketShape};
use pem_core::market::{AgentId, WindowParams};
use pem_core::protocol::{Payload, Phase, ProtocolMessage, Recipient};
use pem_core::runtime::{bandwidth_report, ring_successor, Coalition, SendMode, Transport};

fn ids(n: u16) -> Vec<AgentId> {
    (1..=n).map(AgentId).collect()
}

#[test]
fn unicast_and_broadcast_accounting() {
    let t = Transport::new(ids(6), true).unwrap();
    t.begin_window(1).unwrap();
    let msg = ProtocolMessage::new(1, Phase::PriceBroadcast, AgentId(1), Recipient::Broadcast, Payload::Price {
        fixed: 95_000_000,
        scale: 1_000_000,
    });
    let len = msg.encode().len();
    let others: Vec<AgentId> = ids(6).into_iter().skip(1).collect();
    let receipt = t.send(&msg, SendMode::Broadcast(&others)).unwrap();
    assert_eq!((receipt.deliveries, receipt.bytes), (5, len));
    for &to in &others {
        let got = t.recv_from(to, AgentId(1), Phase::PriceBroadcast).unwrap();
        assert_eq!(got.payload, msg.payload);
    }
    let traffic = t.end_window().unwrap();
    assert_eq!(traffic.messages(), 5);
    assert_eq!(traffic.bytes_sent, 5 * len as u64);
    assert_eq!(traffic.bytes_sent, traffic.bytes_received);
    assert_eq!(t.take_transcript().len(), 5);
}

#[test]
fn undelivered_message_fails_the_window() {
    let t = Transport::new(ids(2), false).unwrap();
    t.begin_window(4).unwrap();
    let msg = ProtocolMessage::new(4, Phase::Payment, AgentId(1), Recipient::Agent(AgentId(2)), Payload::Payment {
        buyer: AgentId(1),
        seller: AgentId(2),
        amount: 1.5,
    });
    t.send(&msg, SendMode::Unicast).unwrap();
    assert_eq!(t.pending(AgentId(2)), 1);
    assert!(t.end_window().is_err());
}

#[test]
fn rings_wrap_in_id_order() {
    let c: Coalition = [AgentId(9), AgentId(2), AgentId(5)].into_iter().collect();
    assert_eq!(ring_successor(AgentId(2), &c).unwrap(), Some(AgentId(5)));
    assert_eq!(ring_successor(AgentId(5), &c).unwrap(), Some(AgentId(9)));
    assert_eq!(ring_successor(AgentId(9), &c).unwrap(), None);
    assert!(ring_successor(AgentId(3), &c).is_err());
}

#[test]
fn windows_conserve_bytes() {
    let net = network(12, 512, false);
    for seed in 0..5 {
        let ps = random_market(seed, MarketShape { sellers: 5, buyers: 6, off_market: 1 });
        let run = net.run_window(&ps, &WindowParams::standard(1), seed).unwrap();
        assert_eq!(run.traffic.in_flight(), 0);
        let per_agent_sent: u64 = run.traffic.per_agent.values().map(|(s, _)| s).sum();
        assert_eq!(per_agent_sent, run.traffic.bytes_sent);
    }
}

/// Doubling the key size roughly doubles the bytes of phases that carry
/// ciphertexts. Plaintext routing and payment records do not grow.
#[test]
fn ciphertext_bandwidth_tracks_key_size() {
    const CRYPTO: [Phase; 6] = [
        Phase::EvalRound1,
        Phase::EvalRound2,
        Phase::PricingK,
        Phase::PricingDenom,
        Phase::DistAggregate,
        Phase::DistRatio,
    ];
    let ps = random_market(3, MarketShape { sellers: 8, buyers: 12, off_market: 0 });
    let report = |bits| {
        let run = network(20, bits, false).run_window(&ps, &WindowParams::standard(1), 1).unwrap();
        bandwidth_report(&[run.traffic])
    };
    let (small, large) = (report(1024), report(2048));
    let ratio = large.mean_mb_in(&CRYPTO) / small.mean_mb_in(&CRYPTO);
    assert!((1.8..=2.6).contains(&ratio), "ciphertext ratio {ratio}");
    assert!(large.mean_mb_per_window > small.mean_mb_per_window);
}
