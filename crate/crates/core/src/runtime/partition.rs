use std::ops::Range;

use crate::error::{Error, Result};

/// Row-block distribution: rank `r` owns the consecutive rows
/// `starts[r]..starts[r + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    starts: Vec<usize>,
}

impl Partition {
    /// Splits `n` rows over `nranks` ranks; the first `n % nranks` ranks get one extra row.
    pub fn uniform(n: usize, nranks: usize) -> Self {
        assert!(nranks >= 1, "partition needs at least one rank");
        let base = n / nranks;
        let extra = n % nranks;
        let mut starts = Vec::with_capacity(nranks + 1);
        starts.push(0);
        for r in 0..nranks {
            let len = base + usize::from(r < extra);
            starts.push(starts[r] + len);
        }
        Self { starts }
    }

    pub fn from_counts(counts: &[usize]) -> Self {
        assert!(!counts.is_empty(), "partition needs at least one rank");
        let mut starts = Vec::with_capacity(counts.len() + 1);
        starts.push(0);
        for &c in counts {
            starts.push(starts.last().unwrap() + c);
        }
        Self { starts }
    }

    pub fn from_starts(starts: Vec<usize>) -> Result<Self> {
        if starts.len() < 2 || starts[0] != 0 || starts.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidCsr(format!("invalid partition offsets {starts:?}")));
        }
        Ok(Self { starts })
    }

    pub fn nranks(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn global_n(&self) -> usize {
        *self.starts.last().unwrap()
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn range(&self, rank: usize) -> Range<usize> {
        self.starts[rank]..self.starts[rank + 1]
    }

    pub fn extent(&self, rank: usize) -> usize {
        self.starts[rank + 1] - self.starts[rank]
    }

    /// Rank owning global index `i`. Empty ranks never own anything.
    pub fn owner(&self, i: usize) -> usize {
        debug_assert!(i < self.global_n());
        self.starts.partition_point(|&s| s <= i) - 1
    }
}
