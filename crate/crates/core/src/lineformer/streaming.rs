//! Line-buffer executor for line attention.
//!
//! Rows of Q, K and V arrive top to bottom, as they would from a line-scanning
//! sensor. Each consumed row is reduced to a `C×C` aggregate immediately; the
//! executor keeps at most `min(h, H)` of them in a ring plus one `C×C` running
//! window sum, and emits output row `r` as soon as row `r + (h−1)/2` (or the
//! last row) has been consumed. Query rows wait in a small delay line until
//! their window is complete; that delay line is not part of the key/value
//! state.

use std::collections::VecDeque;

use serde::Serialize;

use super::attention::{
    add_into, apply_row, check_qkv, check_window, gather_row, row_aggregate_into, scatter_row, sub_from,
};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// `Σ_{j ∈ row} K_jᵀ V_j` for one image row, stored row-major `C×C` in f64.
#[derive(Clone, Debug)]
pub struct RowAggregate {
    pub row: usize,
    pub matrix: Vec<f64>,
}

impl RowAggregate {
    pub fn from_row<T: Element>(row: usize, k_row: &[T], v_row: &[T], channels: usize, width: usize) -> Self {
        let mut matrix = vec![0.0; channels * channels];
        row_aggregate_into(k_row, v_row, channels, width, &mut matrix);
        RowAggregate { row, matrix }
    }
}

/// One row in channel-major layout (`[c][x]`, length `C·W`).
#[derive(Clone, Debug, PartialEq)]
pub struct InputRow<T> {
    pub index: usize,
    pub q: Vec<T>,
    pub k: Vec<T>,
    pub v: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputRow<T> {
    pub index: usize,
    pub data: Vec<T>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StreamStats {
    /// Largest number of row aggregates held at once.
    pub peak_aggregates: usize,
    /// Peak persistent key/value state in numbers: ring plus window sum.
    pub peak_kv_state: usize,
    pub peak_pending_queries: usize,
    /// Input row whose consumption released the first output row.
    pub first_emit_after_row: Option<usize>,
}

#[derive(Debug)]
pub struct LineBufferState<T> {
    channels: usize,
    width: usize,
    height: usize,
    window: usize,
    half: usize,
    ring: VecDeque<RowAggregate>,
    window_sum: Vec<f64>,
    pending_queries: VecDeque<(usize, Vec<T>)>,
    next_in: usize,
    next_out: usize,
    stats: StreamStats,
}

impl<T: Element> LineBufferState<T> {
    pub fn new(channels: usize, width: usize, height: usize, h: usize) -> Result<Self> {
        check_window(h)?;
        if channels == 0 || width == 0 || height == 0 {
            return Err(Error::dim("line_buffer", format!("C={channels}, W={width}, H={height} must all be positive")));
        }
        Ok(LineBufferState {
            channels,
            width,
            height,
            window: h,
            half: (h - 1) / 2,
            ring: VecDeque::with_capacity(h.min(height)),
            window_sum: vec![0.0; channels * channels],
            pending_queries: VecDeque::new(),
            next_in: 0,
            next_out: 0,
            stats: StreamStats::default(),
        })
    }

    pub fn occupancy(&self) -> usize {
        self.ring.len()
    }

    /// Current persistent key/value state in numbers.
    pub fn kv_state_len(&self) -> usize {
        (self.ring.len() + 1) * self.channels * self.channels
    }

    pub fn stats(&self) -> StreamStats {
        self.stats
    }

    pub fn rows_consumed(&self) -> usize {
        self.next_in
    }

    pub fn rows_emitted(&self) -> usize {
        self.next_out
    }

    pub fn is_complete(&self) -> bool {
        self.next_out == self.height
    }

    fn evict_before(&mut self, first_kept: usize) {
        while let Some(front) = self.ring.front() {
            if front.row >= first_kept {
                break;
            }
            let gone = self.ring.pop_front().expect("front exists");
            sub_from(&mut self.window_sum, &gone.matrix);
        }
    }

    fn emit(&mut self, row: usize) -> OutputRow<T> {
        let first_kept = row.saturating_sub(self.half);
        self.evict_before(first_kept);
        let last = (row + self.half).min(self.height - 1);
        assert!(self.next_in > last, "line buffer: row {row} emitted before input row {last} arrived");
        assert_eq!(
            self.ring.front().map(|a| a.row),
            Some(first_kept),
            "line buffer: window of row {row} is incomplete"
        );
        let (q_row_index, q_row) = self.pending_queries.pop_front().expect("query row pending");
        debug_assert_eq!(q_row_index, row);
        let mut data = vec![T::zero(); self.channels * self.width];
        apply_row(&q_row, &self.window_sum, self.channels, self.width, &mut data);
        self.next_out += 1;
        OutputRow { index: row, data }
    }

    /// Consumes input row `index`; returns the output row it completes, if any.
    pub fn push_row(&mut self, index: usize, q: &[T], k: &[T], v: &[T]) -> Result<Option<OutputRow<T>>> {
        if index != self.next_in {
            return Err(Error::Protocol(format!("expected input row {}, received row {index}", self.next_in)));
        }
        if index >= self.height {
            return Err(Error::Protocol(format!("image has {} rows; row {index} is past the end", self.height)));
        }
        let len = self.channels * self.width;
        for (name, row) in [("Q", q), ("K", k), ("V", v)] {
            if row.len() != len {
                return Err(Error::dim(
                    "line_buffer",
                    format!("{name} row has {} values, expected C·W = {len}", row.len()),
                ));
            }
        }
        // Make room: the oldest row any future output can still need is
        // `index + 1 - h`.
        self.evict_before((index + 1).saturating_sub(self.window));
        let aggregate = RowAggregate::from_row(index, k, v, self.channels, self.width);
        add_into(&mut self.window_sum, &aggregate.matrix);
        self.ring.push_back(aggregate);
        self.pending_queries.push_back((index, q.to_vec()));
        self.next_in += 1;

        self.stats.peak_aggregates = self.stats.peak_aggregates.max(self.ring.len());
        self.stats.peak_kv_state = self.stats.peak_kv_state.max(self.kv_state_len());
        self.stats.peak_pending_queries = self.stats.peak_pending_queries.max(self.pending_queries.len());

        if index >= self.half {
            let out = self.emit(index - self.half);
            self.stats.first_emit_after_row.get_or_insert(index);
            Ok(Some(out))
        } else {
            Ok(None)
        }
    }

    /// Flushes the bottom rows once every input row has been consumed.
    pub fn finish(&mut self) -> Result<Vec<OutputRow<T>>> {
        if self.next_in != self.height {
            return Err(Error::Protocol(format!("finish after {} of {} rows", self.next_in, self.height)));
        }
        let mut rows = Vec::with_capacity(self.height - self.next_out);
        while self.next_out < self.height {
            let row = self.next_out;
            rows.push(self.emit(row));
            self.stats.first_emit_after_row.get_or_insert(self.height - 1);
        }
        Ok(rows)
    }
}

/// Adapts an iterator of input rows into an iterator of output rows.
pub struct StreamingRows<I, T> {
    rows: I,
    state: LineBufferState<T>,
    ready: VecDeque<OutputRow<T>>,
    flushed: bool,
    failed: bool,
}

impl<I, T> StreamingRows<I, T> {
    pub fn state(&self) -> &LineBufferState<T> {
        &self.state
    }
}

pub fn stream_rows<T, I>(rows: I, state: LineBufferState<T>) -> StreamingRows<I::IntoIter, T>
where
    T: Element,
    I: IntoIterator<Item = InputRow<T>>,
{
    StreamingRows { rows: rows.into_iter(), state, ready: VecDeque::new(), flushed: false, failed: false }
}

impl<I, T> Iterator for StreamingRows<I, T>
where
    T: Element,
    I: Iterator<Item = InputRow<T>>,
{
    type Item = Result<OutputRow<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(row) = self.ready.pop_front() {
                return Some(Ok(row));
            }
            if self.flushed || self.failed {
                return None;
            }
            match self.rows.next() {
                Some(input) => match self.state.push_row(input.index, &input.q, &input.k, &input.v) {
                    Ok(Some(out)) => return Some(Ok(out)),
                    Ok(None) => {}
                    Err(e) => {
                        self.failed = true;
                        return Some(Err(e));
                    }
                },
                None => {
                    self.flushed = true;
                    match self.state.finish() {
                        Ok(rows) => self.ready.extend(rows),
                        Err(e) => return Some(Err(e)),
                    }
                }
            }
        }
    }
}

/// Rows of sample `n` of a NCHW Q/K/V triple, top to bottom.
pub fn image_rows<'a, T: Element>(
    q: &'a Tensor<T>,
    k: &'a Tensor<T>,
    v: &'a Tensor<T>,
    n: usize,
) -> impl Iterator<Item = InputRow<T>> + 'a {
    let [_, c, height, width] = [q.shape()[0], q.shape()[1], q.shape()[2], q.shape()[3]];
    (0..height).map(move |r| InputRow {
        index: r,
        q: gather_row(q.data(), n, c, height, width, r),
        k: gather_row(k.data(), n, c, height, width, r),
        v: gather_row(v.data(), n, c, height, width, r),
    })
}

/// Runs every sample through its own line buffer and reassembles the image.
/// Returned stats are the maxima over samples.
pub fn line_attention_streaming<T: Element>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    h: usize,
) -> Result<(Tensor<T>, StreamStats)> {
    let [n, c, height, width] = check_qkv(q, k, v, h)?;
    let mut out = vec![T::zero(); q.numel()];
    let mut stats = StreamStats::default();
    for ni in 0..n {
        let state = LineBufferState::new(c, width, height, h)?;
        let mut stream = stream_rows(image_rows(q, k, v, ni), state);
        for row in stream.by_ref() {
            let row = row?;
            scatter_row(&mut out, ni, c, height, width, row.index, &row.data);
        }
        let s = stream.state().stats();
        stats.peak_aggregates = stats.peak_aggregates.max(s.peak_aggregates);
        stats.peak_kv_state = stats.peak_kv_state.max(s.peak_kv_state);
        stats.peak_pending_queries = stats.peak_pending_queries.max(s.peak_pending_queries);
        stats.first_emit_after_row = stats.first_emit_after_row.or(s.first_emit_after_row);
    }
    Ok((Tensor::new(q.shape().to_vec(), out)?, stats))
}
