use std::fmt;

/// 256-bit identifier in the XOR metric space, stored as big-endian words
/// so that word-wise comparison is numeric comparison.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeId(pub [u64; 4]);

/// XOR distance between two identifiers.
pub type Distance = [u64; 4];

impl NodeId {
    pub fn from_bytes(bytes: &[u8; 32]) -> Self {
        let mut words = [0u64; 4];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks_exact(8)) {
            *w = u64::from_be_bytes(chunk.try_into().expect("8 bytes"));
        }
        NodeId(words)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (chunk, w) in out.chunks_exact_mut(8).zip(self.0) {
            chunk.copy_from_slice(&w.to_be_bytes());
        }
        out
    }

    pub fn distance(&self, other: &NodeId) -> Distance {
        [self.0[0] ^ other.0[0], self.0[1] ^ other.0[1], self.0[2] ^ other.0[2], self.0[3] ^ other.0[3]]
    }

    /// Value of bit `i`, where bit 255 is the most significant.
    pub fn bit(&self, i: usize) -> bool {
        let word = 3 - i / 64;
        (self.0[word] >> (i % 64)) & 1 == 1
    }

    /// Index of the k-bucket `other` belongs to from this node's point of
    /// view: the position of the highest set bit of the distance.
    pub fn bucket_index(&self, other: &NodeId) -> Option<usize> {
        bucket_of(&self.distance(other))
    }
}

pub fn bucket_of(d: &Distance) -> Option<usize> {
    d.iter()
        .position(|&w| w != 0)
        .map(|word| 255 - (word * 64 + d[word].leading_zeros() as usize))
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodeId({:016x}..)", self.0[0])
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in self.0 {
            write!(f, "{w:016x}")?;
        }
        Ok(())
    }
}
