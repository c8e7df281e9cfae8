//! Patch scheduling over the replicated memory layout.
//!
//! Within a patch row, a time slot starts each of the eight 16-column
//! windows at the same column offset. Offsets step by the stride, and
//! replicas stored with a column shift let one slot cover patches that
//! would otherwise need a later offset.

use std::collections::BTreeSet;

use crate::error::Result;
use crate::memory::{storage_pattern, MEM_COLS};
use crate::noise::{GROUPS, GROUP_WIDTH};
use crate::perf::fmap_size;
use crate::pipeline::FILTER_SIZE;

/// One window evaluated in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotEntry {
    /// SC amplifier / ADC group.
    pub group: usize,
    pub replica: usize,
    /// First memory column of the 16-column window.
    pub mem_col: usize,
    /// Patch column index (origin = index * stride in the downsampled image).
    pub patch_col: usize,
}

/// A patch position with the slot and hardware that compute it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledPatch {
    pub slot: usize,
    pub replica: usize,
    pub patch_row: usize,
    pub patch_col: usize,
    pub group: usize,
    pub mem_col: usize,
}

impl ScheduledPatch {
    /// Top-left pixel of the patch in the downsampled image.
    pub fn origin(&self, stride: usize) -> (usize, usize) {
        (self.patch_row * stride, self.patch_col * stride)
    }
}

/// Slots needed for one patch row, each listing the windows it evaluates.
pub fn column_plan(ds: usize, stride: usize) -> Result<Vec<Vec<SlotEntry>>> {
    let n_f = fmap_size(ds, stride)?;
    let pattern = storage_pattern(ds)?;
    let width = pattern.replica_width();
    let mut covered = BTreeSet::new();
    let mut plan = Vec::new();
    for offset in (0..GROUP_WIDTH).step_by(stride) {
        let mut slot = Vec::new();
        for group in 0..GROUPS {
            let m = group * GROUP_WIDTH + offset;
            if m + FILTER_SIZE > MEM_COLS {
                continue;
            }
            let replica = m / width;
            if (m + FILTER_SIZE - 1) / width != replica {
                continue;
            }
            let Some(c) = pattern.source(m).image_col else {
                continue;
            };
            if c % stride != 0 || c + FILTER_SIZE > width {
                continue;
            }
            let patch_col = c / stride;
            if covered.insert(patch_col) {
                slot.push(SlotEntry {
                    group,
                    replica,
                    mem_col: m,
                    patch_col,
                });
            }
        }
        if !slot.is_empty() {
            plan.push(slot);
        }
    }
    debug_assert_eq!(covered.len(), n_f);
    Ok(plan)
}

pub fn slots_per_patch_row(ds: usize, stride: usize) -> Result<usize> {
    Ok(column_plan(ds, stride)?.len())
}

/// Every patch of one filter pass, in execution order.
pub fn stride_schedule(ds: usize, stride: usize) -> Result<Vec<ScheduledPatch>> {
    let n_f = fmap_size(ds, stride)?;
    let plan = column_plan(ds, stride)?;
    let mut out = Vec::with_capacity(n_f * n_f);
    for patch_row in 0..n_f {
        for (s, slot) in plan.iter().enumerate() {
            for e in slot {
                out.push(ScheduledPatch {
                    slot: patch_row * plan.len() + s,
                    replica: e.replica,
                    patch_row,
                    patch_col: e.patch_col,
                    group: e.group,
                    mem_col: e.mem_col,
                });
            }
        }
    }
    Ok(out)
}
