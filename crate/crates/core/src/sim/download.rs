use crate::allocate::ItemKey;

/// Reconciles a planned allocation with the bytes the link actually carried.
///
/// When the link falls short, increments are served in playback order
/// (earliest frame first, then tile order) and the last one served is cut
/// to what is left.
pub fn download_with_actual_bandwidth(planned: &[(ItemKey, f64)], actual_bytes: f64) -> Vec<(ItemKey, f64)> {
    let total: f64 = planned.iter().map(|d| d.1).sum();
    if total <= actual_bytes {
        return planned.to_vec();
    }
    let mut order = planned.to_vec();
    order.sort_by_key(|d| d.0);
    let mut left = actual_bytes.max(0.0);
    let mut out = Vec::new();
    for (key, delta) in order {
        if left <= 0.0 {
            break;
        }
        let take = delta.min(left);
        out.push((key, take));
        left -= take;
    }
    out
}
