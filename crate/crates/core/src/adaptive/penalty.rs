use super::ControlError;

/// Time-varying penalty factor for the output-power constraint.
///
/// `dhat_window` holds the last `M` disturbance estimates, `gs` is the
/// secondary-path power gain and `rho` the RMS limit on the control signal.
/// An infinite `rho` disables the constraint and always yields zero.
///
/// ```text
/// alpha = max( gs * ( sqrt( sum(dhat^2) / (M * gs * rho^2) ) - 1 ), 0 )
/// ```
pub fn penalty_factor(dhat_window: &[f64], gs: f64, rho: f64) -> Result<f64, ControlError> {
    let energy: f64 = dhat_window.iter().map(|d| d * d).sum();
    penalty_factor_from_energy(energy, dhat_window.len(), gs, rho)
}

/// Same as [`penalty_factor`] with the windowed energy already accumulated.
pub fn penalty_factor_from_energy(
    energy: f64,
    frame_len: usize,
    gs: f64,
    rho: f64,
) -> Result<f64, ControlError> {
    if !(gs > 0.0) || !gs.is_finite() {
        return Err(ControlError::Config(format!(
            "secondary-path gain must be positive, got {gs}"
        )));
    }
    if !(rho > 0.0) {
        return Err(ControlError::Config(format!(
            "output RMS limit must be positive, got {rho}"
        )));
    }
    if frame_len == 0 {
        return Err(ControlError::Config("penalty window is empty".into()));
    }
    let ratio = energy / (frame_len as f64 * gs * rho * rho);
    Ok((gs * (ratio.sqrt() - 1.0)).max(0.0))
}
