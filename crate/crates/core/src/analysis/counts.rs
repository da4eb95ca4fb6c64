use thiserror::Error;

use crate::lds::Formulation;

#[derive(Debug, Error, PartialEq)]
pub enum CountError {
    #[error("invalid dimensions N = {n}, T = {t}, W = {w}: need N, T, W >= 1 and W <= N")]
    InvalidDims { n: usize, t: usize, w: usize },
}

fn check(n: usize, t: usize, w: usize) -> Result<(), CountError> {
    if n == 0 || t == 0 || w == 0 || w > n {
        Err(CountError::InvalidDims { n, t, w })
    } else {
        Ok(())
    }
}

/// Rows one LDS unit adds under `formulation`, with `N` input periods of
/// length `T` and `W` representatives.
pub fn count_rows_closed_form(
    formulation: Formulation,
    n: usize,
    t: usize,
    w: usize,
) -> Result<usize, CountError> {
    check(n, t, w)?;
    Ok(match formulation {
        Formulation::ExplicitHourly => 2 * n * t,
        Formulation::ImplicitHourly => w * (t - 1) + n + 2 * n * t,
        Formulation::ImplicitMinMax => w * (4 * t - 1) + 3 * n,
        Formulation::OriginalRelaxed => w * (2 * t + 1) + 2 * n,
    })
}

/// Variables one LDS unit adds under `formulation`.
pub fn count_vars_closed_form(
    formulation: Formulation,
    n: usize,
    t: usize,
    w: usize,
) -> Result<usize, CountError> {
    check(n, t, w)?;
    Ok(match formulation {
        Formulation::ExplicitHourly => n * t,
        Formulation::ImplicitHourly => w * t + n,
        Formulation::ImplicitMinMax => w * t + n + 3 * w,
        Formulation::OriginalRelaxed => w * t + n + w,
    })
}

/// The exact formulations (original excluded) with the fewest added rows.
pub fn fewest_rows(n: usize, t: usize, w: usize) -> Result<Vec<Formulation>, CountError> {
    let exact = [
        Formulation::ExplicitHourly,
        Formulation::ImplicitHourly,
        Formulation::ImplicitMinMax,
    ];
    let rows: Vec<usize> = exact
        .iter()
        .map(|&f| count_rows_closed_form(f, n, t, w))
        .collect::<Result<_, _>>()?;
    let min = *rows.iter().min().expect("non-empty");
    Ok(exact
        .into_iter()
        .zip(rows)
        .filter(|&(_, r)| r == min)
        .map(|(f, _)| f)
        .collect())
}

/// Whether min-max adds strictly fewer rows than implicit-hourly, which
/// reduces to `3WT < N(2T - 2)`.
pub fn minmax_fewer_rows_than_implicit(n: usize, t: usize, w: usize) -> Result<bool, CountError> {
    check(n, t, w)?;
    Ok(3 * w * t < n * (2 * t - 2))
}
