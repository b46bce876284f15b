//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature, [`Execution::Parallel`] fans work out over the
//! rayon pool. Without it, both variants run sequentially. Work is always
//! split into the same fixed-size pieces and merged in order, so results are
//! bit-identical regardless of thread count or execution mode.

use ndarray::{concatenate, Array2, ArrayView2, Axis};

/// Rows per chunk for row-parallel evaluation. Fixed so that chunking (and
/// hence floating-point rounding) does not depend on the thread count.
pub const ROW_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map_ordered<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Applies a row-wise map to `input` in fixed [`ROW_CHUNK`]-row pieces and
/// stacks the results.
pub fn map_row_chunks<F, E>(exec: Execution, input: ArrayView2<f64>, f: F) -> Result<Array2<f64>, E>
where
    F: Fn(ArrayView2<f64>) -> Result<Array2<f64>, E> + Sync + Send,
    E: Send,
{
    let chunks: Vec<ArrayView2<f64>> = input.axis_chunks_iter(Axis(0), ROW_CHUNK).collect();
    if chunks.len() <= 1 {
        return f(input);
    }
    let parts = map_ordered(exec, &chunks, |c| f(c.view()));
    let parts = parts.into_iter().collect::<Result<Vec<_>, E>>()?;
    let views: Vec<ArrayView2<f64>> = parts.iter().map(|p| p.view()).collect();
    Ok(concatenate(Axis(0), &views).expect("chunks share a column count"))
}
