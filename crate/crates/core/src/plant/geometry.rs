use super::PathModel;

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
pub const DEFAULT_MIN_DISTANCE: f64 = 0.05;

pub type Position = [f64; 3];

pub fn distance(a: &Position, b: &Position) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Free-field monopole path between two points: integer-sample propagation
/// delay and `1/r` spreading, with `r` clamped to `r_min`.
///
/// The second return value is true when the clamp was applied.
pub fn free_field_path(
    from: &Position,
    to: &Position,
    sample_rate: u32,
    speed_of_sound: f64,
    r_min: f64,
) -> (PathModel, bool) {
    let r = distance(from, to);
    let clamped = r < r_min;
    let r = r.max(r_min);
    let delay = (sample_rate as f64 * r / speed_of_sound).round() as usize;
    (PathModel::pure(delay, 1.0 / r), clamped)
}

/// Paths from every emitter to every receiver, indexed `[emitter][receiver]`.
pub fn geometry_to_paths(
    emitters: &[Position],
    receivers: &[Position],
    sample_rate: u32,
    speed_of_sound: f64,
    r_min: f64,
) -> Vec<Vec<PathModel>> {
    emitters
        .iter()
        .map(|e| {
            receivers
                .iter()
                .map(|r| {
                    let (p, clamped) = free_field_path(e, r, sample_rate, speed_of_sound, r_min);
                    if clamped {
                        log::warn!("emitter {e:?} and receiver {r:?} closer than {r_min} m; clamped");
                    }
                    p
                })
                .collect()
        })
        .collect()
}
