use crate::error::{Error, Result};

/// Cell assignment of real observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Binned {
    /// Cell index of each observation.
    pub cells: Vec<usize>,
    /// Number of observations per cell.
    pub counts: Vec<usize>,
}

/// Assigns each observation to `[b_j, b_{j+1})`, the last cell being closed.
pub fn bin_data(x: &[f64], breakpoints: &[f64]) -> Result<Binned> {
    if breakpoints.len() < 2 {
        return Err(Error::Partition("need at least two breakpoints".into()));
    }
    if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Partition(
            "breakpoints must be finite and strictly increasing".into(),
        ));
    }
    let lo = breakpoints[0];
    let hi = *breakpoints.last().expect("len >= 2");
    let cells_n = breakpoints.len() - 1;
    let mut counts = vec![0; cells_n];
    let cells = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if !(lo..=hi).contains(&v) {
                return Err(Error::Partition(format!("observation {i} = {v} outside [{lo}, {hi}]")));
            }
            // first breakpoint strictly greater than v, minus one
            let j = breakpoints
                .partition_point(|&b| b <= v)
                .saturating_sub(1)
                .min(cells_n - 1);
            counts[j] += 1;
            Ok(j)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Binned { cells, counts })
}
