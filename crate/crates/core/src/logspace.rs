//! Natural-log probability arithmetic.

/// Streaming log-sum-exp: accumulates `ln(sum(exp(t)))` over pushed terms
/// while keeping every exponentiated quantity in `[0, 1]` relative to the
/// running maximum.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    pub fn push(&mut self, term: f64) {
        if term == f64::NEG_INFINITY {
            return;
        }
        if term > self.max {
            self.scaled = self.scaled * (self.max - term).exp() + 1.0;
            self.max = term;
        } else {
            self.scaled += (term - self.max).exp();
        }
    }

    /// `ln(sum(exp(t)))`, or negative infinity when nothing finite was pushed.
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

pub fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = LogSumExp::new();
    terms.into_iter().for_each(|t| acc.push(t));
    acc.value()
}

/// `ln(1 - exp(x))` for `x < 0`, accurate near both ends.
pub fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}
