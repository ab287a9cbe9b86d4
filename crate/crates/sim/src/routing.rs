use rand::seq::index;
use rand::Rng;

use crate::id::{Distance, NodeId};

/// One node's k-buckets. Only non-empty buckets are stored, in ascending
/// bucket order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoutingTable {
    buckets: Vec<(u8, Vec<u32>)>,
}

impl RoutingTable {
    /// Peers in bucket `i`: those whose distance from this node has its
    /// highest set bit at position `i`.
    pub fn bucket(&self, i: usize) -> &[u32] {
        self.buckets
            .iter()
            .find(|(b, _)| *b as usize == i)
            .map(|(_, peers)| peers.as_slice())
            .unwrap_or(&[])
    }

    pub fn non_empty_buckets(&self) -> impl Iterator<Item = (usize, &[u32])> {
        self.buckets.iter().map(|(b, p)| (*b as usize, p.as_slice()))
    }

    pub fn peers(&self) -> impl Iterator<Item = u32> + '_ {
        self.buckets.iter().flat_map(|(_, p)| p.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(|(_, p)| p.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Up to `n` known peers closest to `target`, nearest first.
    pub fn closest(&self, ids: &[NodeId], target: &NodeId, n: usize) -> Vec<u32> {
        self.closest_where(ids, target, n, |_| true)
    }

    /// As [`RoutingTable::closest`], restricted to peers passing `keep`.
    pub fn closest_where(&self, ids: &[NodeId], target: &NodeId, n: usize, keep: impl Fn(u32) -> bool) -> Vec<u32> {
        let mut all: Vec<(Distance, u32)> =
            self.peers().filter(|&p| keep(p)).map(|p| (ids[p as usize].distance(target), p)).collect();
        if all.len() > n {
            all.select_nth_unstable(n);
            all.truncate(n);
        }
        all.sort_unstable();
        all.into_iter().map(|(_, p)| p).collect()
    }
}

/// Builds converged routing tables for `ids`, which must be sorted and
/// distinct.
///
/// Nodes sharing a prefix form a contiguous run of the sorted list, so the
/// peers eligible for a node's bucket `i` are exactly the opposite half
/// when that run is split on bit `i`. Buckets larger than `k` are filled
/// with a uniform sample.
pub fn build_tables<R: Rng>(ids: &[NodeId], k: usize, rng: &mut R) -> Vec<RoutingTable> {
    debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    let mut tables = vec![RoutingTable::default(); ids.len()];
    let mut stack = vec![(0usize, ids.len(), 255usize)];
    while let Some((lo, hi, bit)) = stack.pop() {
        if hi - lo < 2 {
            continue;
        }
        let mid = lo + ids[lo..hi].partition_point(|id| !id.bit(bit));
        if mid != lo && mid != hi {
            for t in &mut tables[lo..mid] {
                t.buckets.push((bit as u8, sample_range(mid, hi, k, rng)));
            }
            for t in &mut tables[mid..hi] {
                t.buckets.push((bit as u8, sample_range(lo, mid, k, rng)));
            }
        }
        if bit == 0 {
            continue;
        }
        // pushed high half first so the low half is processed first
        if mid != hi {
            stack.push((mid, hi, bit - 1));
        }
        if mid != lo {
            stack.push((lo, mid, bit - 1));
        }
    }
    for t in &mut tables {
        t.buckets.sort_unstable_by_key(|(b, _)| *b);
    }
    tables
}

fn sample_range<R: Rng>(lo: usize, hi: usize, k: usize, rng: &mut R) -> Vec<u32> {
    let len = hi - lo;
    if len <= k {
        return (lo..hi).map(|i| i as u32).collect();
    }
    let mut picked: Vec<u32> = index::sample(rng, len, k).into_iter().map(|i| (lo + i) as u32).collect();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_ids(n: usize, seed: u64) -> Vec<NodeId> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids: Vec<NodeId> = (0..n).map(|_| NodeId(rng.gen())).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Quadratic reference: which peers are eligible for each bucket.
    fn eligible(ids: &[NodeId], i: usize) -> std::collections::BTreeMap<usize, Vec<u32>> {
        let mut out = std::collections::BTreeMap::<usize, Vec<u32>>::new();
        for (j, other) in ids.iter().enumerate() {
            if let Some(b) = ids[i].bucket_index(other) {
                out.entry(b).or_default().push(j as u32);
            }
        }
        out
    }

    #[test]
    fn buckets_match_quadratic_reference() {
        let ids = random_ids(300, 7);
        let k = 8;
        let tables = build_tables(&ids, k, &mut ChaCha8Rng::seed_from_u64(1));
        for (i, t) in tables.iter().enumerate() {
            let reference = eligible(&ids, i);
            let built: Vec<usize> = t.non_empty_buckets().map(|(b, _)| b).collect();
            assert_eq!(built, reference.keys().copied().collect::<Vec<_>>());
            for (b, peers) in t.non_empty_buckets() {
                let all = &reference[&b];
                assert_eq!(peers.len(), all.len().min(k));
                assert!(peers.iter().all(|p| all.contains(p)));
            }
        }
    }

    #[test]
    fn small_networks_are_fully_connected() {
        let ids = random_ids(20, 3);
        let tables = build_tables(&ids, 20, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(tables.iter().all(|t| t.len() == 19));
        assert!(build_tables(&ids[..1], 20, &mut ChaCha8Rng::seed_from_u64(0))[0].is_empty());
    }

    #[test]
    fn closest_orders_by_distance() {
        let ids = random_ids(64, 11);
        let tables = build_tables(&ids, 64, &mut ChaCha8Rng::seed_from_u64(0));
        let target = NodeId([u64::MAX / 3; 4]);
        let got = tables[0].closest(&ids, &target, 5);
        let mut all: Vec<u32> = (1..64).collect();
        all.sort_by_key(|&p| ids[p as usize].distance(&target));
        assert_eq!(got, all[..5]);
    }
}
