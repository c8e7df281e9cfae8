//! 16 x 128 analog memory with source-follower readout and replica layout.

use crate::error::{Error, Result};
use crate::noise::{gauss, NoiseContext, SampleRng};
use crate::{ARRAY_SIZE, BOLTZMANN, ROOM_TEMPERATURE};

pub const MEM_ROWS: usize = 16;
pub const MEM_COLS: usize = ARRAY_SIZE;
/// Maximum tolerated drift of a stored voltage (half an 8b LSB at 1.2 V).
pub const RETENTION_LIMIT: f64 = 2.35e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryParams {
    /// Storage capacitance (F).
    pub c_mem: f64,
    /// Readout source-follower slope (V/V).
    pub a_sf_mem: f64,
    /// Stored-voltage drift (V/s), positive means the level rises.
    pub drift_rate: f64,
    /// Static per-cell readout offset (V).
    pub sf_mismatch_sigma: f64,
    /// Optional cubic term of the readout transfer (V^-2), zero by default.
    pub cubic_coeff: f64,
    /// Kelvin.
    pub temperature: f64,
}

impl Default for MemoryParams {
    fn default() -> Self {
        Self::typical()
    }
}

impl MemoryParams {
    /// Typical corner: 2.61 mV drift per 100 ms.
    pub fn typical() -> Self {
        Self {
            c_mem: 32e-15,
            a_sf_mem: 0.83,
            drift_rate: 26.1e-3,
            sf_mismatch_sigma: 3.5e-3,
            cubic_coeff: 0.0,
            temperature: ROOM_TEMPERATURE,
        }
    }

    /// Fast corner: 2.18 mV drift per 100 ms.
    pub fn fast() -> Self {
        Self {
            drift_rate: 21.8e-3,
            ..Self::typical()
        }
    }

    /// Drift rate chosen so that the cell reaches the retention limit after `t_ret`.
    pub fn from_retention(t_ret: f64) -> Self {
        Self {
            drift_rate: RETENTION_LIMIT / t_ret,
            ..Self::typical()
        }
    }

    /// Unity gain, no drift, no mismatch: write then read is the identity.
    pub fn transparent() -> Self {
        Self {
            a_sf_mem: 1.0,
            drift_rate: 0.0,
            sf_mismatch_sigma: 0.0,
            ..Self::typical()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_sf_mem > 0.0 && self.a_sf_mem <= 1.0) {
            return Err(Error::Precondition("memory params: a_sf_mem must lie in (0, 1]".into()));
        }
        if !(self.drift_rate >= 0.0) || !(self.c_mem > 0.0) || !(self.sf_mismatch_sigma >= 0.0) {
            return Err(Error::Precondition(
                "memory params: drift and mismatch must be non-negative, c_mem positive".into(),
            ));
        }
        Ok(())
    }
}

/// kT/C noise of a read, referred to the buffer output.
pub fn memory_read_noise_sigma(p: &MemoryParams) -> f64 {
    p.a_sf_mem * (BOLTZMANN * p.temperature / p.c_mem).sqrt()
}

/// True while the accumulated drift after `dt` stays within the retention limit.
pub fn retention_ok(dt: f64, p: &MemoryParams) -> bool {
    // Relative slack so a hold time derived from the limit itself passes.
    p.drift_rate * dt <= RETENTION_LIMIT * (1.0 + 1e-12)
}

/// Stored voltages, write timestamps and static per-cell offsets.
#[derive(Debug, Clone)]
pub struct AnalogMemoryState {
    cells: Vec<f64>,
    write_time: Vec<f64>,
    written: Vec<bool>,
    cell_mismatch: Vec<f64>,
}

impl AnalogMemoryState {
    pub fn new(p: &MemoryParams, ctx: &NoiseContext) -> Self {
        let n = MEM_ROWS * MEM_COLS;
        let cell_mismatch = if ctx.flags().mem_mismatch {
            ctx.draws().mem_cell.iter().map(|z| z * p.sf_mismatch_sigma).collect()
        } else {
            vec![0.0; n]
        };
        Self {
            cells: vec![0.0; n],
            write_time: vec![0.0; n],
            written: vec![false; n],
            cell_mismatch,
        }
    }

    fn index(row: usize, col: usize) -> Result<usize> {
        if row >= MEM_ROWS {
            return Err(Error::RowOutOfRange(row));
        }
        if col >= MEM_COLS {
            return Err(Error::Dimension {
                expected: format!("column < {MEM_COLS}"),
                got: col.to_string(),
            });
        }
        Ok(row * MEM_COLS + col)
    }

    /// Overwrites one full memory row.
    pub fn write_row(&mut self, mem_row: usize, values: &[f64], now: f64) -> Result<()> {
        if mem_row >= MEM_ROWS {
            return Err(Error::RowOutOfRange(mem_row));
        }
        if values.len() != MEM_COLS {
            return Err(Error::Dimension {
                expected: format!("{MEM_COLS} values"),
                got: values.len().to_string(),
            });
        }
        let base = mem_row * MEM_COLS;
        self.cells[base..base + MEM_COLS].copy_from_slice(values);
        self.write_time[base..base + MEM_COLS].fill(now);
        self.written[base..base + MEM_COLS].fill(true);
        Ok(())
    }

    /// Stored (pre-drift) voltage of a cell.
    pub fn stored(&self, row: usize, col: usize) -> Result<f64> {
        let i = Self::index(row, col)?;
        if !self.written[i] {
            return Err(Error::UninitializedCell { row, col });
        }
        Ok(self.cells[i])
    }

    /// Seconds since the cell was last written.
    pub fn held_for(&self, row: usize, col: usize, now: f64) -> Result<f64> {
        let i = Self::index(row, col)?;
        if !self.written[i] {
            return Err(Error::UninitializedCell { row, col });
        }
        Ok(now - self.write_time[i])
    }

    pub fn cell_mismatch(&self, row: usize, col: usize) -> f64 {
        self.cell_mismatch[row * MEM_COLS + col]
    }

    /// Buffered readout of one cell at time `now`. Does not disturb the cell.
    pub fn read_cell(
        &self,
        mem_row: usize,
        col: usize,
        p: &MemoryParams,
        now: f64,
        ctx: &NoiseContext,
        rng: &mut SampleRng,
    ) -> Result<f64> {
        let i = Self::index(mem_row, col)?;
        if !self.written[i] {
            return Err(Error::UninitializedCell { row: mem_row, col });
        }
        let held = (now - self.write_time[i]).max(0.0);
        let v = self.cells[i] + p.drift_rate * held;
        let thermal = if ctx.flags().mem_thermal {
            gauss(rng, memory_read_noise_sigma(p))
        } else {
            0.0
        };
        Ok(p.a_sf_mem * v + p.cubic_coeff * v * v * v + self.cell_mismatch[i] + thermal)
    }
}

/// Where a memory column's content comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSource {
    pub replica: usize,
    /// Column of the downsampled image, `None` when the shifted copy runs past its edge.
    pub image_col: Option<usize>,
}

/// Replica layout of the downsampled image across the 128 memory columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoragePattern {
    ds: usize,
    shifts: Vec<usize>,
}

impl StoragePattern {
    pub fn ds(&self) -> usize {
        self.ds
    }

    pub fn replicas(&self) -> usize {
        self.shifts.len()
    }

    /// Memory columns per replica, equal to the downsampled image width.
    pub fn replica_width(&self) -> usize {
        MEM_COLS / self.ds
    }

    /// Left shift of each replica, in downsampled columns.
    pub fn shifts(&self) -> &[usize] {
        &self.shifts
    }

    pub fn source(&self, mem_col: usize) -> ColumnSource {
        let w = self.replica_width();
        let replica = mem_col / w;
        let c = mem_col - replica * w + self.shifts[replica];
        ColumnSource {
            replica,
            image_col: (c < w).then_some(c),
        }
    }

    /// Memory column holding `image_col` in `replica`, if it is stored there.
    pub fn mem_col(&self, replica: usize, image_col: usize) -> Option<usize> {
        let w = self.replica_width();
        let shift = *self.shifts.get(replica)?;
        (image_col >= shift && image_col < w).then(|| replica * w + image_col - shift)
    }

    /// Lays one downsampled row out over all 128 memory columns. Columns past
    /// the image edge of a shifted replica repeat the last image column.
    pub fn layout(&self, row: &[f64]) -> Vec<f64> {
        (0..MEM_COLS)
            .map(|m| {
                let src = self.source(m);
                row[src.image_col.unwrap_or(row.len() - 1)]
            })
            .collect()
    }
}

pub fn storage_pattern(ds: usize) -> Result<StoragePattern> {
    let shifts = match ds {
        1 => vec![0],
        2 => vec![0, 8],
        4 => vec![0, 4, 8, 12],
        _ => {
            return Err(Error::UnsupportedConfig(format!(
                "downsampling factor {ds} not in {{1, 2, 4}}"
            )))
        }
    };
    Ok(StoragePattern { ds, shifts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseFlags, Stream};

    fn rng() -> SampleRng {
        NoiseContext::noiseless().stream(Stream::MemoryRead, 0)
    }

    #[test]
    fn transparent_identity() {
        let p = MemoryParams::transparent();
        let ctx = NoiseContext::noiseless();
        let mut m = AnalogMemoryState::new(&p, &ctx);
        let row: Vec<f64> = (0..128).map(|i| i as f64 / 100.0).collect();
        m.write_row(5, &row, 0.0).unwrap();
        for (c, v) in row.iter().enumerate() {
            assert_eq!(m.read_cell(5, c, &p, 0.0, &ctx, &mut rng()).unwrap(), *v);
        }
    }

    #[test]
    fn second_write_wins() {
        let p = MemoryParams::transparent();
        let ctx = NoiseContext::noiseless();
        let mut m = AnalogMemoryState::new(&p, &ctx);
        m.write_row(0, &[1.4; 128], 0.0).unwrap();
        m.write_row(0, &[0.7; 128], 1e-3).unwrap();
        assert_eq!(m.read_cell(0, 9, &p, 1e-3, &ctx, &mut rng()).unwrap(), 0.7);
    }

    #[test]
    fn drift_after_100ms() {
        let p = MemoryParams::typical();
        let ctx = NoiseContext::noiseless();
        let mut m = AnalogMemoryState::new(&p, &ctx);
        m.write_row(1, &[1.0; 128], 0.0).unwrap();
        let v = m.read_cell(1, 0, &p, 0.1, &ctx, &mut rng()).unwrap();
        assert!((v / p.a_sf_mem - 1.0 - 2.61e-3).abs() < 1e-12);
    }

    #[test]
    fn gain_and_noise_anchor() {
        let p = MemoryParams::typical();
        let ctx = NoiseContext::noiseless();
        let mut m = AnalogMemoryState::new(&p, &ctx);
        m.write_row(2, &[1.0; 128], 0.0).unwrap();
        assert!((m.read_cell(2, 0, &p, 0.0, &ctx, &mut rng()).unwrap() - 0.83).abs() < 1e-12);
        let s = memory_read_noise_sigma(&p);
        assert!((s - 0.30e-3).abs() / 0.30e-3 < 0.02, "{s}");
    }

    #[test]
    fn linear_drift_oracle() {
        let p = MemoryParams {
            a_sf_mem: 1.0,
            sf_mismatch_sigma: 0.0,
            ..MemoryParams::typical()
        };
        let ctx = NoiseContext::noiseless();
        let mut m = AnalogMemoryState::new(&p, &ctx);
        m.write_row(3, &[1.2; 128], 0.25).unwrap();
        let v = m.read_cell(3, 7, &p, 0.30, &ctx, &mut rng()).unwrap();
        assert!((v - 1.2 - 26.1e-3 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn uninitialized_and_out_of_range() {
        let p = MemoryParams::typical();
        let ctx = NoiseContext::noiseless();
        let mut m = AnalogMemoryState::new(&p, &ctx);
        assert!(matches!(
            m.read_cell(4, 4, &p, 0.0, &ctx, &mut rng()),
            Err(Error::UninitializedCell { row: 4, col: 4 })
        ));
        assert!(matches!(m.write_row(16, &[0.0; 128], 0.0), Err(Error::RowOutOfRange(16))));
    }

    #[test]
    fn reads_differ_only_by_temporal_noise() {
        let p = MemoryParams::typical();
        let ctx = NoiseContext::new(3, NoiseFlags::all());
        let mut m = AnalogMemoryState::new(&p, &ctx);
        m.write_row(0, &[1.0; 128], 0.0).unwrap();
        let mut r = ctx.stream(Stream::MemoryRead, 1);
        let a = m.read_cell(0, 0, &p, 0.01, &ctx, &mut r).unwrap();
        let b = m.read_cell(0, 0, &p, 0.01, &ctx, &mut r).unwrap();
        assert_ne!(a, b);
        assert!((a - b).abs() < 10.0 * memory_read_noise_sigma(&p));
    }

    #[test]
    fn retention_boundaries() {
        let p = MemoryParams::from_retention(90.3e-3);
        assert!(retention_ok(90.3e-3, &p));
        assert!(!retention_ok(90.4e-3, &p));
        assert!(retention_ok(0.0, &MemoryParams::typical()));
        // 26.1 mV/s * 0.2 s = 5.22 mV > 2.35 mV.
        assert!(!retention_ok(0.2, &MemoryParams::typical()));
    }

    #[test]
    fn pattern_examples() {
        let p1 = storage_pattern(1).unwrap();
        assert_eq!(p1.source(37), ColumnSource { replica: 0, image_col: Some(37) });
        let p2 = storage_pattern(2).unwrap();
        assert_eq!(p2.source(64), ColumnSource { replica: 1, image_col: Some(8) });
        let p4 = storage_pattern(4).unwrap();
        assert_eq!(p4.source(96), ColumnSource { replica: 3, image_col: Some(12) });
        assert!(storage_pattern(3).is_err());
    }

    #[test]
    fn pattern_inverse() {
        for ds in [1, 2, 4] {
            let p = storage_pattern(ds).unwrap();
            for m in 0..MEM_COLS {
                let s = p.source(m);
                if let Some(c) = s.image_col {
                    assert_eq!(p.mem_col(s.replica, c), Some(m));
                }
            }
        }
    }
}
