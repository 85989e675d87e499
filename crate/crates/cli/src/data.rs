//! Reading datasets and the ingest transforms.

use std::fs;
use std::path::Path;

use mgd::ParticleEnsemble;

use crate::config::{DataFormat, Family, Layout};
use crate::error::{CliError, CliResult};
use crate::fieldfile::{header_path, FieldFile};

/// Format from the flag, else `.csv` means CSV and anything with a sidecar
/// header is a field file.
pub fn detect_format(path: &Path, given: Option<DataFormat>) -> DataFormat {
    if let Some(f) = given {
        return f;
    }
    let csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("txt"));
    if !csv && header_path(path).exists() {
        DataFormat::Field
    } else {
        DataFormat::Csv
    }
}

/// Numeric table with comma or whitespace separators. Blank lines and `#`
/// comments are skipped; a first line that does not parse is a header.
pub fn parse_csv(text: &str) -> CliResult<(usize, Vec<f64>)> {
    let mut cols = None;
    let mut values = Vec::new();
    let mut first = true;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|s| s.parse::<f64>()).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(_) => return Err(CliError::data(format!("line {}: not a number in {line:?}", lineno + 1))),
        };
        first = false;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(CliError::data(format!(
                    "line {}: expected {c} columns, found {}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
    }
    match cols {
        Some(c) if !values.is_empty() => Ok((c, values)),
        _ => Err(CliError::data("no numeric rows in the input")),
    }
}

/// Reads a CSV table (single columns become 1D arrays) or a field file.
pub fn read_array(path: &Path, format: Option<DataFormat>) -> CliResult<FieldFile> {
    match detect_format(path, format) {
        DataFormat::Field => FieldFile::read(path),
        DataFormat::Csv => {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
            let (cols, values) = parse_csv(&text)?;
            let rows = values.len() / cols;
            let dims = if cols == 1 { vec![rows] } else { vec![rows, cols] };
            FieldFile::new(dims, values)
        }
    }
}

/// Fails listing (up to ten) flat positions of NaNs or infinities.
pub fn check_finite(values: &[f64]) -> CliResult<()> {
    let bad: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite())
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        return Ok(());
    }
    let shown: Vec<String> = bad.iter().take(10).map(|i| i.to_string()).collect();
    let more = if bad.len() > 10 { format!(" and {} more", bad.len() - 10) } else { String::new() };
    Err(CliError::data(format!(
        "{} non-finite values at positions {}{more}",
        bad.len(),
        shown.join(", ")
    )))
}

/// Splits an array into samples for `family`: scattering takes the trailing
/// field axes as one sample, other families take each leading index as one
/// sample made of the remaining axes.
pub fn to_samples(array: &FieldFile, family: &Family) -> CliResult<(ParticleEnsemble, Layout)> {
    check_finite(&array.values)?;
    let dims = array.dims();
    let sample_dims: Vec<usize> = match family.field_axes() {
        Some(k) => {
            if dims.len() < k {
                return Err(CliError::data(format!("{family} needs {k}-axis fields, data dims are {dims:?}")));
            }
            dims[dims.len() - k..].to_vec()
        }
        None if dims.len() == 1 => vec![1],
        None => vec![dims[1..].iter().product()],
    };
    let layout = Layout { sample_dims };
    let d = layout.dim();
    let n = array.values.len() / d;
    Ok((ParticleEnsemble::from_flat(n, d, array.values.clone())?, layout))
}

/// `log P(u) − log P(u − 1)`.
pub fn log_returns(prices: &[f64]) -> CliResult<Vec<f64>> {
    if let Some(i) = prices.iter().position(|&p| !(p > 0.0)) {
        return Err(CliError::data(format!("log-returns need positive prices; entry {i} is {}", prices[i])));
    }
    if prices.len() < 2 {
        return Err(CliError::data("log-returns need at least two prices"));
    }
    Ok(prices.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
}

/// Mean and standard deviation removed in place.
pub fn standardize(values: &mut [f64]) -> CliResult<(f64, f64)> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(CliError::data("input is constant; cannot standardize"));
    }
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    Ok((mean, sd))
}

/// Largest power of two not above `n`.
pub fn dyadic_floor(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        1 << (usize::BITS - 1 - n.leading_zeros())
    }
}

/// Keeps the leading dyadic part of a series, or the top-left dyadic square
/// of a field.
pub fn dyadic_crop(values: &[f64], dims: &[usize]) -> CliResult<(Vec<f64>, Vec<usize>)> {
    match dims {
        [n] => {
            let m = dyadic_floor(*n);
            Ok((values[..m].to_vec(), vec![m]))
        }
        [rows, cols] => {
            let m = dyadic_floor((*rows).min(*cols));
            let mut out = Vec::with_capacity(m * m);
            for r in 0..m {
                out.extend_from_slice(&values[r * cols..r * cols + m]);
            }
            Ok((out, vec![m, m]))
        }
        _ => Err(CliError::data(format!("cannot crop data with dims {dims:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_header_and_comments() {
        let (c, v) = parse_csv("# prices\nx,y\n1,2\n\n3 4\n").unwrap();
        assert_eq!(c, 2);
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(parse_csv("1,2\n3\n").is_err());
        assert!(parse_csv("a\nb\n").is_err());
        assert!(parse_csv("").is_err());
    }

    #[test]
    fn exponential_prices_give_unit_returns() {
        let e = std::f64::consts::E;
        let r = log_returns(&[1.0, e, e * e]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
        assert!(log_returns(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn constant_prices_cannot_be_standardized() {
        let mut r = log_returns(&[5.0; 10]).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        assert_eq!(standardize(&mut r).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn standardized_values_have_unit_variance() {
        let mut v: Vec<f64> = (0..100).map(|i| (i as f64).sin() * 3.0 + 7.0).collect();
        standardize(&mut v).unwrap();
        let m = v.iter().sum::<f64>() / 100.0;
        let s = v.iter().map(|x| x * x).sum::<f64>() / 100.0;
        assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crop_to_dyadic_sizes() {
        assert_eq!(dyadic_floor(100), 64);
        assert_eq!(dyadic_floor(64), 64);
        assert_eq!(dyadic_floor(1), 1);
        let field: Vec<f64> = (0..100 * 100).map(|i| i as f64).collect();
        let (v, d) = dyadic_crop(&field, &[100, 100]).unwrap();
        assert_eq!(d, vec![64, 64]);
        assert_eq!(v[64], 100.0);
        let (v, d) = dyadic_crop(&field[..70], &[70]).unwrap();
        assert_eq!((v.len(), d), (64, vec![64]));
    }

    #[test]
    fn non_finite_positions_are_listed() {
        let err = check_finite(&[1.0, f64::NAN, 2.0, f64::INFINITY]).unwrap_err();
        assert!(err.message.contains("1, 3"), "{}", err.message);
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn samples_follow_the_family() {
        let a = FieldFile::new(vec![3, 4, 4], vec![0.5; 48]).unwrap();
        let (e, l) = to_samples(&a, &Family::Scattering { j: 1, l: 4 }).unwrap();
        assert_eq!((e.n_rep(), e.dim(), l.sample_dims.clone()), (3, 16, vec![4, 4]));
        let (e, _) = to_samples(&a, &Family::Scattering { j: 1, l: 1 }).unwrap();
        assert_eq!((e.n_rep(), e.dim()), (12, 4));
        let (e, _) = to_samples(&a, &Family::Quadratic).unwrap();
        assert_eq!((e.n_rep(), e.dim()), (3, 16));
        let s = FieldFile::new(vec![5], vec![1.0; 5]).unwrap();
        let (e, _) = to_samples(&s, &Family::Monomial(2)).unwrap();
        assert_eq!((e.n_rep(), e.dim()), (5, 1));
    }
}
