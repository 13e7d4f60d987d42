//! Bessel functions of the first kind for integer order.

/// `J_0(x), …, J_{max_order}(x)` by Miller's downward recurrence, normalized
/// with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_all(max_order: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = max_order.max(ax.ceil() as usize);
    // Start well above both the order and the turning point.
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut next = 0.0f64;
    let mut cur = 1e-300f64;
    let mut even_sum = 0.0f64;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        let order = k - 1;
        if order <= max_order {
            out[order] = cur;
        }
        if order % 2 == 0 && order > 0 {
            even_sum += cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            even_sum *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = cur + 2.0 * even_sum;
    for (k, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && k % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

pub fn bessel_j(order: usize, x: f64) -> f64 {
    bessel_j_all(order, x)[order]
}
