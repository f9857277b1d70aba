use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail(n: u64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln_half = -(n as f64) * std::f64::consts::LN_2;
    // Sum from the far tail inwards so small terms are added first.
    (k..=n).rev().map(|j| (ln_choose(n, j) + ln_half).exp()).sum::<f64>().min(1.0)
}

/// Accuracy `k/n` for the smallest `k` with `P(X > k) <= alpha` under
/// guessing (the inverse binomial CDF at `1 - alpha`): accuracies above
/// this level are significant.
pub fn chance_level(n: u64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("chance level needs n >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    let ln_half = -(n as f64) * std::f64::consts::LN_2;
    let mut tail = 0.0;
    let mut k = n + 1;
    // Walk k downwards while P(X >= k - 1) stays within alpha.
    while k > 0 {
        let next = tail + (ln_choose(n, k - 1) + ln_half).exp();
        if next > alpha {
            break;
        }
        tail = next;
        k -= 1;
    }
    // k is now the smallest count with P(X >= k) <= alpha.
    Ok((k - 1) as f64 / n as f64)
}
