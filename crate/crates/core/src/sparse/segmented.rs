use std::ops::Range;

use super::spgemm::RowSource;
use super::CsrMatrix;
use crate::error::{Error, Result};

/// Owned row block of a row-partitioned matrix plus an auxiliary CSR holding
/// rows harvested from other ranks.
///
/// Row lookups take global indices: indices inside `owned_range` go to the
/// local block, everything else must appear in `aux_row_map`.
#[derive(Debug, Clone)]
pub struct SegmentedCsr<'a> {
    local: &'a CsrMatrix,
    aux: CsrMatrix,
    aux_row_map: Vec<usize>,
    owned_range: Range<usize>,
    global_nrows: usize,
}

impl<'a> SegmentedCsr<'a> {
    pub fn new(
        local: &'a CsrMatrix,
        aux: CsrMatrix,
        aux_row_map: Vec<usize>,
        owned_range: Range<usize>,
        global_nrows: usize,
    ) -> Result<Self> {
        if local.nrows() != owned_range.len() {
            return Err(Error::DimensionMismatch {
                op: "segmented csr (local rows)",
                expected: owned_range.len(),
                got: local.nrows(),
            });
        }
        if aux.nrows() != aux_row_map.len() {
            return Err(Error::DimensionMismatch {
                op: "segmented csr (aux rows)",
                expected: aux_row_map.len(),
                got: aux.nrows(),
            });
        }
        if aux.ncols() != local.ncols() {
            return Err(Error::DimensionMismatch {
                op: "segmented csr (columns)",
                expected: local.ncols(),
                got: aux.ncols(),
            });
        }
        if aux_row_map.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCsr("aux_row_map must be strictly increasing".into()));
        }
        if let Some(&bad) = aux_row_map
            .iter()
            .find(|&&g| owned_range.contains(&g) || g >= global_nrows)
        {
            return Err(Error::InvalidCsr(format!(
                "aux row {bad} overlaps the owned range or exceeds {global_nrows}"
            )));
        }
        Ok(Self {
            local,
            aux,
            aux_row_map,
            owned_range,
            global_nrows,
        })
    }

    /// A view with no harvested rows: only owned rows are resolvable.
    pub fn local_only(local: &'a CsrMatrix, owned_range: Range<usize>, global_nrows: usize) -> Result<Self> {
        let ncols = local.ncols();
        Self::new(local, CsrMatrix::zeros(0, ncols), Vec::new(), owned_range, global_nrows)
    }

    pub fn local(&self) -> &CsrMatrix {
        self.local
    }

    pub fn aux(&self) -> &CsrMatrix {
        &self.aux
    }

    pub fn aux_row_map(&self) -> &[usize] {
        &self.aux_row_map
    }

    pub fn owned_range(&self) -> Range<usize> {
        self.owned_range.clone()
    }

    /// Which block serves global row `g`: `Some(true)` local, `Some(false)` aux.
    pub fn source_of(&self, g: usize) -> Option<bool> {
        if self.owned_range.contains(&g) {
            Some(true)
        } else if self.aux_row_map.binary_search(&g).is_ok() {
            Some(false)
        } else {
            None
        }
    }
}

impl RowSource for SegmentedCsr<'_> {
    fn global_nrows(&self) -> usize {
        self.global_nrows
    }

    fn ncols(&self) -> usize {
        self.local.ncols()
    }

    #[inline]
    fn global_row(&self, g: usize) -> Option<(&[usize], &[f64])> {
        if self.owned_range.contains(&g) {
            Some(self.local.row(g - self.owned_range.start))
        } else {
            self.aux_row_map
                .binary_search(&g)
                .ok()
                .map(|slot| self.aux.row(slot))
        }
    }
}
