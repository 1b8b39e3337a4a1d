use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::SessionError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionTest {
    pub chi_square: f64,
    pub p_value: f64,
}

/// Pearson chi-square test (no continuity correction) on the 2x2 table of
/// successes and failures of two groups; p from the chi-square(1) upper tail.
///
/// A table whose success or failure column is empty gives
/// [`SessionError::DegenerateTable`]; report it as p = 1.
pub fn compare_proportions(
    a_success: u64,
    a_total: u64,
    b_success: u64,
    b_total: u64,
) -> Result<ProportionTest, SessionError> {
    if a_total == 0 || b_total == 0 || a_success > a_total || b_success > b_total {
        return Err(SessionError::InvalidArgument(format!(
            "need 0 < totals and successes <= totals, got {a_success}/{a_total} and {b_success}/{b_total}"
        )));
    }
    let (a, b) = (a_success as f64, (a_total - a_success) as f64);
    let (c, d) = (b_success as f64, (b_total - b_success) as f64);
    let success = a + c;
    let failure = b + d;
    if success == 0.0 || failure == 0.0 {
        return Err(SessionError::DegenerateTable);
    }
    let n = a + b + c + d;
    let cross = a * d - b * c;
    let chi_square = n * cross * cross / ((a + b) * (c + d) * success * failure);
    let dist = ChiSquared::new(1.0).expect("one degree of freedom");
    Ok(ProportionTest {
        chi_square,
        p_value: dist.sf(chi_square),
    })
}
