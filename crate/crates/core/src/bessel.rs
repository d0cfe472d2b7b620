//! Bessel functions of the first kind for integer order.

/// `J_n(x)` for integer order `n >= 0` and real `x`.
///
/// Evaluated by Miller's backward recurrence started well above
/// `max(n, |x|)`, normalized with `J_0 + 2 * sum_k J_{2k} = 1`. Accurate to
/// about 1e-14 absolute for `|x|` up to a few hundred.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    if x < 0.0 {
        // J_n(-x) = (-1)^n J_n(x)
        let v = bessel_j(order, -x);
        return if order % 2 == 0 { v } else { -v };
    }
    let n = order as usize;
    let top = (n as f64).max(x);
    let mut start = (top + 30.0 + 3.0 * top.sqrt()).ceil() as usize;
    start += start % 2;

    const RESCALE: f64 = 1e250;
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    let mut target = 0.0;
    for k in (1..=start).rev() {
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        if k == n {
            target = cur;
        }
        let prev = k as f64 * two_over_x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            next /= RESCALE;
            norm /= RESCALE;
            target /= RESCALE;
        }
    }
    // cur now holds J_0.
    norm += cur;
    if n == 0 {
        target = cur;
    }
    target / norm
}
