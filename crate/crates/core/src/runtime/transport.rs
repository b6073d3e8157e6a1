use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use parking_lot::Mutex;

use super::meter::WindowTraffic;
use crate::error::{PemError, Result};
use crate::market::AgentId;
use crate::protocol::{Phase, ProtocolMessage, Recipient, BROADCAST};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SendMode<'a> {
    Unicast,
    /// Delivered to every listed agent; the sender is skipped.
    Broadcast(&'a [AgentId]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeliveryReceipt {
    pub deliveries: usize,
    /// Serialized size of one copy, header included.
    pub bytes: usize,
}

/// One delivery as it crossed the wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub to: AgentId,
    pub bytes: Arc<[u8]>,
}

impl TranscriptEntry {
    pub fn message(&self) -> Result<ProtocolMessage> {
        ProtocolMessage::decode(&self.bytes)
    }
}

struct Envelope {
    sender: AgentId,
    phase: Phase,
    bytes: Arc<[u8]>,
}

struct State {
    window: Option<u32>,
    inboxes: BTreeMap<AgentId, VecDeque<Envelope>>,
    traffic: WindowTraffic,
    transcript: Option<Vec<TranscriptEntry>>,
}

/// In-memory transport with per-agent FIFO inboxes. Every message is
/// serialized on send and decoded on receipt, so the metered bytes are
/// exactly the wire bytes.
pub struct Transport {
    state: Mutex<State>,
}

impl Transport {
    pub fn new(agents: impl IntoIterator<Item = AgentId>, record_transcript: bool) -> Result<Self> {
        let mut inboxes = BTreeMap::new();
        for id in agents {
            if id.0 == BROADCAST {
                return Err(PemError::Config(format!("agent id {BROADCAST:#x} is reserved")));
            }
            if inboxes.insert(id, VecDeque::new()).is_some() {
                return Err(PemError::Config(format!("duplicate agent id {id}")));
            }
        }
        Ok(Transport {
            state: Mutex::new(State {
                window: None,
                inboxes,
                traffic: WindowTraffic::default(),
                transcript: record_transcript.then(Vec::new),
            }),
        })
    }

    pub fn agents(&self) -> Vec<AgentId> {
        self.state.lock().inboxes.keys().copied().collect()
    }

    pub fn begin_window(&self, t: u32) -> Result<()> {
        let mut s = self.state.lock();
        if let Some(open) = s.window {
            return Err(PemError::Protocol(format!("window {open} still open")));
        }
        s.window = Some(t);
        s.traffic = WindowTraffic::new(t);
        Ok(())
    }

    /// Closes the window; fails if any message is still in flight.
    pub fn end_window(&self) -> Result<WindowTraffic> {
        let mut s = self.state.lock();
        let t = s.window.take().ok_or_else(|| PemError::Protocol("no open window".into()))?;
        let pending: usize = s.inboxes.values().map(VecDeque::len).sum();
        if pending > 0 || s.traffic.in_flight() > 0 {
            for q in s.inboxes.values_mut() {
                q.clear();
            }
            return Err(PemError::Integrity(format!(
                "window {t}: {pending} messages ({} bytes) still in flight",
                s.traffic.in_flight()
            )));
        }
        Ok(std::mem::take(&mut s.traffic))
    }

    /// Drops undelivered messages after a failed window.
    pub fn abort_window(&self) -> WindowTraffic {
        let mut s = self.state.lock();
        s.window = None;
        for q in s.inboxes.values_mut() {
            q.clear();
        }
        std::mem::take(&mut s.traffic)
    }

    pub fn send(&self, msg: &ProtocolMessage, mode: SendMode<'_>) -> Result<DeliveryReceipt> {
        let mut s = self.state.lock();
        if s.window != Some(msg.window) {
            return Err(PemError::Protocol(format!(
                "message for window {} outside open window {:?}",
                msg.window, s.window
            )));
        }
        if !s.inboxes.contains_key(&msg.sender) {
            return Err(PemError::Routing(msg.sender));
        }
        let targets: Vec<AgentId> = match (mode, msg.recipient) {
            (SendMode::Unicast, Recipient::Agent(to)) => vec![to],
            (SendMode::Broadcast(list), Recipient::Broadcast) => {
                list.iter().copied().filter(|a| *a != msg.sender).collect()
            }
            _ => return Err(PemError::Protocol("send mode does not match the recipient field".into())),
        };
        if let Some(bad) = targets.iter().find(|a| !s.inboxes.contains_key(a)) {
            return Err(PemError::Routing(*bad));
        }
        let bytes: Arc<[u8]> = msg.encode().into();
        let len = bytes.len();
        s.traffic
            .record_send(msg.sender, msg.phase, len as u64, targets.len() as u64);
        for to in &targets {
            s.inboxes.get_mut(to).expect("checked").push_back(Envelope {
                sender: msg.sender,
                phase: msg.phase,
                bytes: bytes.clone(),
            });
            if let Some(tr) = s.transcript.as_mut() {
                tr.push(TranscriptEntry {
                    to: *to,
                    bytes: bytes.clone(),
                });
            }
        }
        Ok(DeliveryReceipt {
            deliveries: targets.len(),
            bytes: len,
        })
    }

    /// Takes the oldest message in `agent`'s inbox from `sender`. Per-channel
    /// FIFO holds because messages from one sender are never reordered.
    pub fn recv_from(&self, agent: AgentId, sender: AgentId, phase: Phase) -> Result<ProtocolMessage> {
        let mut s = self.state.lock();
        let inbox = s.inboxes.get_mut(&agent).ok_or(PemError::Routing(agent))?;
        let pos = inbox
            .iter()
            .position(|e| e.sender == sender)
            .ok_or_else(|| PemError::Protocol(format!("{agent} has no message from {sender} in {phase}")))?;
        if inbox[pos].phase != phase {
            return Err(PemError::Protocol(format!(
                "{agent} expected {phase} from {sender}, found {}",
                inbox[pos].phase
            )));
        }
        let env = inbox.remove(pos).expect("position is valid");
        s.traffic.record_receive(agent, env.bytes.len() as u64);
        ProtocolMessage::decode(&env.bytes)
    }

    pub fn pending(&self, agent: AgentId) -> usize {
        self.state.lock().inboxes.get(&agent).map_or(0, VecDeque::len)
    }

    /// Returns and clears the recorded transcript (empty when not recording).
    pub fn take_transcript(&self) -> Vec<TranscriptEntry> {
        self.state
            .lock()
            .transcript
            .as_mut()
            .map(std::mem::take)
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{Payload, HEADER_LEN};

    fn ids(n: u16) -> Vec<AgentId> {
        (1..=n).map(AgentId).collect()
    }

    fn ratios(len: usize) -> Payload {
        Payload::Ratios(vec![(AgentId(0), 0.0); len])
    }

    #[test]
    fn unicast_counts_header_and_payload() {
        let tr = Transport::new(ids(2), false).unwrap();
        tr.begin_window(1).unwrap();
        // tag + count + 10 entries of 10 bytes = 105
        let msg = ProtocolMessage::new(1, Phase::DistRatioBroadcast, AgentId(1), Recipient::Agent(AgentId(2)), ratios(10));
        let r = tr.send(&msg, SendMode::Unicast).unwrap();
        assert_eq!(r.bytes, HEADER_LEN + 105);
        assert_eq!(tr.recv_from(AgentId(2), AgentId(1), Phase::DistRatioBroadcast).unwrap(), msg);
        let traffic = tr.end_window().unwrap();
        assert_eq!(traffic.per_agent[&AgentId(1)], ((HEADER_LEN + 105) as u64, 0));
        assert_eq!(traffic.per_agent[&AgentId(2)], (0, (HEADER_LEN + 105) as u64));
    }

    #[test]
    fn broadcast_fans_out() {
        let tr = Transport::new(ids(6), false).unwrap();
        tr.begin_window(3).unwrap();
        let all = ids(6);
        let msg = ProtocolMessage::new(3, Phase::PriceBroadcast, AgentId(1), Recipient::Broadcast, Payload::Price { fixed: 1, scale: 1 });
        let r = tr.send(&msg, SendMode::Broadcast(&all)).unwrap();
        assert_eq!(r.deliveries, 5);
        assert!(matches!(tr.end_window(), Err(PemError::Integrity(_))));

        tr.begin_window(4).unwrap();
        let msg = ProtocolMessage { window: 4, ..msg };
        tr.send(&msg, SendMode::Broadcast(&all)).unwrap();
        for a in 2..=6 {
            tr.recv_from(AgentId(a), AgentId(1), Phase::PriceBroadcast).unwrap();
        }
        let t = tr.end_window().unwrap();
        assert_eq!(t.bytes_sent, 5 * r.bytes as u64);
        assert_eq!(t.in_flight(), 0);
    }

    #[test]
    fn routing_and_window_errors() {
        let tr = Transport::new(ids(2), true).unwrap();
        let msg = ProtocolMessage::new(1, Phase::Payment, AgentId(1), Recipient::Agent(AgentId(9)), Payload::ComparisonResult(true));
        assert!(matches!(tr.send(&msg, SendMode::Unicast), Err(PemError::Protocol(_))));
        tr.begin_window(1).unwrap();
        assert_eq!(tr.send(&msg, SendMode::Unicast), Err(PemError::Routing(AgentId(9))));
        let stale = ProtocolMessage { window: 0, recipient: Recipient::Agent(AgentId(2)), ..msg };
        assert!(tr.send(&stale, SendMode::Unicast).is_err());
        assert!(Transport::new([AgentId(1), AgentId(1)], false).is_err());
    }

    #[test]
    fn per_channel_fifo() {
        let tr = Transport::new(ids(3), true).unwrap();
        tr.begin_window(1).unwrap();
        for i in 0..5 {
            for from in [1u16, 3] {
                let m = ProtocolMessage::new(
                    1,
                    Phase::EnergyRoute,
                    AgentId(from),
                    Recipient::Agent(AgentId(2)),
                    Payload::Allocation { seller: AgentId(from), buyer: AgentId(2), energy: i as f64 },
                );
                tr.send(&m, SendMode::Unicast).unwrap();
            }
        }
        for from in [3u16, 1] {
            for i in 0..5 {
                let m = tr.recv_from(AgentId(2), AgentId(from), Phase::EnergyRoute).unwrap();
                assert_eq!(m.payload, Payload::Allocation { seller: AgentId(from), buyer: AgentId(2), energy: i as f64 });
            }
        }
        tr.end_window().unwrap();
        assert_eq!(tr.take_transcript().len(), 10);
    }
}
