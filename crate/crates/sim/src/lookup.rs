use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use crate::id::{Distance, NodeId};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Pending,
    Responded,
    Failed,
}

/// Outcome of an iterative node lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Trace {
    /// Up to k responsive nodes nearest the target, nearest first. May
    /// include the origin.
    pub closest: Vec<u32>,
    /// Sequential query rounds.
    pub hops: u32,
    pub contacted: u32,
    pub elapsed_ms: u64,
}

impl Network {
    /// Iterative Kademlia lookup from `origin` toward `target`.
    ///
    /// Each round queries up to alpha unqueried nodes among the k best
    /// known. When a round brings nothing closer, the next round queries
    /// every unqueried node among the k best. The lookup ends once the k
    /// best known live nodes have all answered. Unreachable nodes time out
    /// at the maximum RTT.
    pub(crate) fn iterative_lookup(&self, origin: u32, target: &NodeId) -> Trace {
        let k = self.config.k;
        let alpha = self.config.alpha;
        let ids = &self.ids;
        // Dead peers are evicted from buckets once they stop answering, so
        // nodes never hand them out. Live peers behind a partition are
        // still handed out and time out for the querier.
        let live = |p: u32| self.nodes[p as usize].alive;
        let mut short: BTreeMap<Distance, (u32, State)> = BTreeMap::new();
        short.insert(ids[origin as usize].distance(target), (origin, State::Responded));
        for p in self.nodes[origin as usize].table.closest_where(ids, target, k, live) {
            short.entry(ids[p as usize].distance(target)).or_insert((p, State::Pending));
        }

        let mut best = *short.keys().next().expect("origin present");
        let mut stalled = false;
        let (mut hops, mut contacted, mut elapsed_ms) = (0u32, 0u32, 0u64);
        loop {
            let pending: Vec<(Distance, u32)> = short
                .iter()
                .filter(|(_, (_, s))| *s != State::Failed)
                .take(k)
                .filter(|(_, (_, s))| *s == State::Pending)
                .map(|(d, (n, _))| (*d, *n))
                .collect();
            if pending.is_empty() {
                break;
            }
            let batch = if stalled { &pending[..] } else { &pending[..pending.len().min(alpha)] };
            hops += 1;
            let mut round_ms = 0;
            for &(d, n) in batch {
                contacted += 1;
                let ok = self.reachable(origin, n);
                round_ms = round_ms.max(if ok { self.rtt_ms(origin, n) } else { self.config.rtt.max_ms });
                short.get_mut(&d).expect("candidate").1 = if ok { State::Responded } else { State::Failed };
                if ok {
                    for p in self.nodes[n as usize].table.closest_where(ids, target, k, live) {
                        if let Entry::Vacant(v) = short.entry(ids[p as usize].distance(target)) {
                            v.insert((p, State::Pending));
                        }
                    }
                }
            }
            elapsed_ms += round_ms;
            let nearest = short
                .iter()
                .find(|(_, (_, s))| *s == State::Responded)
                .map(|(d, _)| *d)
                .expect("origin responded");
            stalled = nearest >= best;
            best = best.min(nearest);
        }
        let closest = short
            .values()
            .filter(|(_, s)| *s == State::Responded)
            .take(k)
            .map(|(n, _)| *n)
            .collect();
        Trace { closest, hops, contacted, elapsed_ms }
    }
}
