use std::collections::BTreeMap;

/// Set of sequence numbers stored as disjoint inclusive ranges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeqRanges {
    // start -> end, inclusive, non-adjacent
    ranges: BTreeMap<u64, u64>,
    len: u64,
}

impl SeqRanges {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Number of sequence numbers held.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn highest(&self) -> Option<u64> {
        self.ranges.last_key_value().map(|(_, &e)| e)
    }

    pub fn contains(&self, seq: u64) -> bool {
        self.ranges
            .range(..=seq)
            .next_back()
            .is_some_and(|(_, &e)| seq <= e)
    }

    /// Adds `seq`, returning false if it was already present.
    pub fn insert(&mut self, seq: u64) -> bool {
        if self.contains(seq) {
            return false;
        }
        let mut start = seq;
        let mut end = seq;
        if let Some((&s, &e)) = self.ranges.range(..seq).next_back() {
            if e + 1 == seq {
                start = s;
                self.ranges.remove(&s);
            }
        }
        if let Some(&e) = self.ranges.get(&(seq + 1)) {
            end = e;
            self.ranges.remove(&(seq + 1));
        }
        self.ranges.insert(start, end);
        self.len += 1;
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.ranges.iter().map(|(&s, &e)| (s, e))
    }

    pub fn block_count(&self) -> usize {
        self.ranges.len()
    }
}

/// Selective acknowledgement blocks for `received`: the lowest `max_blocks`
/// blocks, in ascending order. Every gap between reported blocks is then a
/// true hole.
///
/// Panics if nothing has been received.
pub fn build_sack(received: &SeqRanges, max_blocks: usize) -> Vec<(u64, u64)> {
    assert!(!received.is_empty(), "SACK requested before any data arrived");
    assert!(max_blocks >= 1);
    received.iter().take(max_blocks).collect()
}
