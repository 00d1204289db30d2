/// Plain filtered-reference LMS step: `w += mu * e * x_filt`.
#[inline]
pub fn fxlms_update(w: &mut [f64], mu: f64, e: f64, x_filt: &[f64]) {
    for (wi, &xf) in w.iter_mut().zip(x_filt) {
        *wi += mu * (e * xf);
    }
}

/// Constrained step with a penalty on the control output power:
/// `w += mu * (e * x_filt - alpha * y * x)`.
///
/// With `alpha == 0` the arithmetic reduces bit-for-bit to [`fxlms_update`].
#[inline]
pub fn mov_fxlms_update(
    w: &mut [f64],
    mu: f64,
    e: f64,
    x_filt: &[f64],
    alpha: f64,
    y: f64,
    x: &[f64],
) {
    debug_assert_eq!(w.len(), x_filt.len());
    debug_assert_eq!(w.len(), x.len());
    let leak = alpha * y;
    for ((wi, &xf), &xi) in w.iter_mut().zip(x_filt).zip(x) {
        *wi += mu * (e * xf - leak * xi);
    }
}
