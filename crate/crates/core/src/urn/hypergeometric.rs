use rand::Rng;

use crate::error::{Error, Result};

/// Number of color-A balls among `draws` balls taken without replacement
/// from an urn holding `total` balls, `successes` of them color A.
///
/// The draw is simulated ball by ball on the shrinking urn, so the result
/// follows the hypergeometric law exactly with no pmf evaluation. Cost is
/// O(`draws`), which is tiny because draw sizes are bounded by `k`.
pub fn sample_hypergeometric<R: Rng + ?Sized>(
    rng: &mut R,
    draws: u64,
    total: u64,
    successes: u64,
) -> Result<u64> {
    if draws < 1 {
        return Err(Error::invalid("hypergeometric: N >= 1 required (N = 0)"));
    }
    if draws > total {
        return Err(Error::invalid(format!(
            "hypergeometric: N <= S required (N = {draws}, S = {total})"
        )));
    }
    if successes > total {
        return Err(Error::invalid(format!(
            "hypergeometric: H <= S required (H = {successes}, S = {total})"
        )));
    }

    let mut remaining = total;
    let mut remaining_a = successes;
    let mut x = 0;
    for drawn in 0..draws {
        if remaining_a == 0 {
            break;
        }
        if remaining_a == remaining {
            // only color A left
            x += draws - drawn;
            break;
        }
        if rng.random_range(0..remaining) < remaining_a {
            x += 1;
            remaining_a -= 1;
        }
        remaining -= 1;
    }
    Ok(x)
}
