//! Shared FFT planning and two-dimensional transforms.
//!
//! Plans are cached in a process-wide planner per scalar type, so repeated
//! transforms of the same length reuse twiddle tables across the whole
//! crate. Forward transforms are plain unnormalized sums; inverse
//! transforms through [`fft2`] carry the usual `1/(rows*cols)` factor.
//! Spectra are kept in natural (unshifted) bin order everywhere.

use num_complex::Complex;
use once_cell::sync::Lazy;
use rustfft::num_traits::{Float, Zero};
use rustfft::{Fft, FftDirection, FftNum, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

struct PlanCache<T: FftNum> {
    planner: FftPlanner<T>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<T>>>,
}

impl<T: FftNum> PlanCache<T> {
    fn new() -> Self {
        PlanCache { planner: FftPlanner::new(), plans: HashMap::new() }
    }

    fn get(&mut self, len: usize, inverse: bool) -> Arc<dyn Fft<T>> {
        self.plans
            .entry((len, inverse))
            .or_insert_with(|| {
                let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
                self.planner.plan_fft(len, dir)
            })
            .clone()
    }
}

static PLANS_F64: Lazy<Mutex<PlanCache<f64>>> = Lazy::new(|| Mutex::new(PlanCache::new()));
static PLANS_F32: Lazy<Mutex<PlanCache<f32>>> = Lazy::new(|| Mutex::new(PlanCache::new()));

/// Scalar types the transforms run on. The engine defaults to `f64`; `f32`
/// is available where throughput matters more than the last digits.
pub trait FftScalar: FftNum + Float {
    fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<Self>>;
}

impl FftScalar for f64 {
    fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<Self>> {
        PLANS_F64.lock().unwrap().get(len, inverse)
    }
}

impl FftScalar for f32 {
    fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<Self>> {
        PLANS_F32.lock().unwrap().get(len, inverse)
    }
}

/// Transposes the `rows` x `cols` row-major matrix `src` into `dst`.
pub fn transpose<T: Copy>(src: &[T], dst: &mut [T], rows: usize, cols: usize) {
    assert_eq!(src.len(), rows * cols);
    assert_eq!(dst.len(), rows * cols);
    // Blocked to keep both access streams cache-resident on large grids.
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// In-place 2D FFT of a `rows` x `cols` row-major buffer. The inverse
/// direction divides by `rows * cols`.
pub fn fft2<T: FftScalar>(data: &mut [Complex<T>], rows: usize, cols: usize, inverse: bool) {
    assert_eq!(data.len(), rows * cols);
    let row_plan = T::plan(cols, inverse);
    let col_plan = T::plan(rows, inverse);
    let scratch_len = row_plan.get_inplace_scratch_len().max(col_plan.get_inplace_scratch_len());
    let mut scratch = vec![Complex::<T>::zero(); scratch_len];
    for r in 0..rows {
        row_plan.process_with_scratch(&mut data[r * cols..(r + 1) * cols], &mut scratch);
    }
    let mut tmp = vec![Complex::<T>::zero(); data.len()];
    transpose(data, &mut tmp, rows, cols);
    for c in 0..cols {
        col_plan.process_with_scratch(&mut tmp[c * rows..(c + 1) * rows], &mut scratch);
    }
    transpose(&tmp, data, cols, rows);
    if inverse {
        let scale = T::from_f64(1.0 / (rows * cols) as f64).unwrap();
        for v in data.iter_mut() {
            *v = *v * scale;
        }
    }
}
