//! Arithmetic cost of the 3D transforms, both analytical (lifted from the 1D
//! counts) and measured by running kernels on counting samples.

use std::cell::Cell;

use crate::kernels::{build_stages, count_1d, Beta, Kernel1d, LoefflerDct, Multiplierless, LOEFFLER_COUNT, N};
use crate::scalar::{Counted, OpCount};
use crate::search::Candidate;
use crate::tensor::Tensor3;
use crate::transform3d::{reflect_combine, row_column_execute};
use crate::Result;

/// One method's 3D cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub method: String,
    pub op_count: OpCount,
}

// flat, so that it fits a CSV record
impl serde::Serialize for ComplexityRow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ComplexityRow", 4)?;
        st.serialize_field("method", &self.method)?;
        st.serialize_field("multiplications", &self.op_count.multiplications)?;
        st.serialize_field("additions", &self.op_count.additions)?;
        st.serialize_field("shifts", &self.op_count.shifts)?;
        st.end()
    }
}

/// `3 n^2` row transforms, plus `3 n^3` additions for the reflected
/// combination when `hartley_overhead` is set.
pub fn lift_3d(c1d: OpCount, n: usize, hartley_overhead: bool) -> OpCount {
    let n = n as u64;
    let mut c = c1d.scaled(3 * n * n);
    if hartley_overhead {
        c.additions += 3 * n * n * n;
    }
    c
}

/// Published cost of the split-radix 3D DHT for 8x8x8 blocks. The algorithm
/// itself is not implemented here.
pub const SPLIT_RADIX_DHT_3D: OpCount = OpCount::new(384, 5760, 0);

/// The grid points reported alongside the exact methods.
pub const SELECTED: [u8; 4] = [8, 11, 12, 16];

/// Cost table for 8x8x8 blocks: the DCT and DHT baselines followed by the
/// selected approximations.
pub fn table() -> Result<Vec<ComplexityRow>> {
    let mut rows = vec![
        ComplexityRow {
            method: "3D DCT row-column".into(),
            op_count: lift_3d(LOEFFLER_COUNT, N, false),
        },
        ComplexityRow {
            method: "3D DHT row-column".into(),
            op_count: lift_3d(count_1d(Beta::Sqrt2)?, N, true),
        },
        ComplexityRow {
            method: "3D DHT split-radix".into(),
            op_count: SPLIT_RADIX_DHT_3D,
        },
    ];
    for m in SELECTED {
        let c = Candidate::new(m)?;
        rows.push(ComplexityRow {
            method: c.to_string(),
            op_count: lift_3d(c.op_count(), N, true),
        });
    }
    Ok(rows)
}

/// Operations performed by one run of `kernel` on an arbitrary input.
pub fn verified_count_1d<K>(kernel: &K) -> OpCount
where
    K: for<'a> Kernel1d<Counted<'a>> + ?Sized,
{
    let tally = Cell::new(OpCount::default());
    let x: [Counted<'_>; N] = std::array::from_fn(|i| Counted::new(i as f64 + 1.0, &tally));
    kernel.apply(&x);
    tally.get()
}

/// Operations performed transforming `blocks` with the row-column strategy,
/// followed by the reflected combination for Hartley kinds. The one half of
/// that combination is merged into quantization and not charged.
pub fn verified_count_3d<K>(kernel: &K, hartley: bool, blocks: &[Tensor3<f64>]) -> Result<OpCount>
where
    K: for<'a> Kernel1d<Counted<'a>> + ?Sized,
{
    let tally = Cell::new(OpCount::default());
    for block in blocks {
        let x = block.map(|&v| Counted::new(v, &tally));
        let ys = row_column_execute(&x, kernel)?;
        if hartley {
            reflect_combine(&ys);
        }
    }
    Ok(tally.get())
}

/// Measured 3D cost of every table method over `blocks`, in table order
/// (the split-radix row has no executable counterpart and is skipped).
pub fn verified_table(blocks: &[Tensor3<f64>]) -> Result<Vec<ComplexityRow>> {
    let mut rows = vec![
        ComplexityRow {
            method: "3D DCT row-column".into(),
            op_count: verified_count_3d(&LoefflerDct::default(), false, blocks)?,
        },
        ComplexityRow {
            method: "3D DHT row-column".into(),
            op_count: verified_count_3d(&build_stages(Beta::Sqrt2)?, true, blocks)?,
        },
    ];
    for m in SELECTED {
        let c = Candidate::new(m)?;
        let stages = c.stages();
        rows.push(ComplexityRow {
            method: c.to_string(),
            op_count: verified_count_3d(&Multiplierless(&stages), true, blocks)?,
        });
    }
    Ok(rows)
}
