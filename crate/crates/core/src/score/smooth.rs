/// Half-width of the kernel in units of σ.
pub const KERNEL_RADIUS_SIGMAS: f64 = 4.0;

/// Unnormalized Gaussian taps for offsets `-r..=r`, `r = floor(4σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (KERNEL_RADIUS_SIGMAS * sigma).floor() as i64;
    (-r..=r)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Gaussian smoothing with the kernel renormalized over the taps that fall
/// inside the series.
pub fn smooth(series: &[f64], sigma: f64) -> Vec<f64> {
    if series.is_empty() {
        return Vec::new();
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let n = series.len() as isize;
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    (0..n)
        .map(|i| {
            let (mut acc, mut mass) = (0.0, 0.0);
            for j in (i - r).max(0)..=(i + r).min(n - 1) {
                let w = kernel[(j - i + r) as usize];
                acc += w * series[j as usize];
                mass += w;
            }
            (acc / mass).clamp(lo, hi)
        })
        .collect()
}
