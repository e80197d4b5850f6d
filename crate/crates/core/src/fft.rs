//! Thin wrapper over rustfft with a thread-local plan cache.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward DFT (unscaled).
pub fn forward(buf: &mut [Complex<f64>]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

/// In-place inverse DFT (unscaled; divide by n for the true inverse).
pub fn inverse(buf: &mut [Complex<f64>]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(buf.len());
        fft.process(buf);
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let n = 12;
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|i| Complex::new((i as f64).sin(), 0.0))
            .collect();
        let orig = buf.clone();
        forward(&mut buf);
        inverse(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a.re / n as f64 - b.re).abs() < 1e-12);
            assert!((a.im / n as f64).abs() < 1e-12);
        }
    }
}
