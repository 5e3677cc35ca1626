//! Observation and state CSV handling.
//!
//! Observations travel as CSV with header `time,y` for the scalar families
//! and `time,y1,...,yK` for Wright-Fisher. Times must be strictly
//! increasing and every malformed row is reported with its line number, so
//! a bad file points at itself rather than at the filter.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use dualfilt::models::ObservationValue;
use dualfilt::{ModelSpec, Observation};

use crate::config::CliError;

/// Formats a float with 17 significant digits, enough for the printed text
/// to parse back to the identical bit pattern.
pub fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Opens the destination file, or stdout when no path is given.
pub fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| {
                CliError::input(format!("cannot create output file {}: {e}", p.display()))
            })?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

pub fn write_err(e: io::Error) -> CliError {
    CliError::input(format!("cannot write output: {e}"))
}

fn expected_header(model: &ModelSpec) -> Vec<String> {
    match model {
        ModelSpec::WrightFisher(_) => std::iter::once("time".to_string())
            .chain((1..=model.signal_dim()).map(|j| format!("y{j}")))
            .collect(),
        _ => vec!["time".to_string(), "y".to_string()],
    }
}

/// Reads and validates one observation file against the model's emission
/// shape.
pub fn read_observations(path: &Path, model: &ModelSpec) -> Result<Vec<Observation>, CliError> {
    let file = File::open(path).map_err(|e| {
        CliError::input(format!(
            "cannot open observation file {}: {e}",
            path.display()
        ))
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let expected = expected_header(model);
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("observation file {}: {e}", path.display())))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(CliError::input(format!(
            "observation file {}: header is '{}', expected '{}' for model {}",
            path.display(),
            got.join(","),
            expected.join(","),
            model.name()
        )));
    }

    let dim = model.signal_dim();
    let mut out = Vec::new();
    let mut prev_time = f64::NEG_INFINITY;
    for (idx, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| CliError::input(format!("observation file {}: {e}", path.display())))?;
        let line = record.position().map_or(idx as u64 + 2, |p| p.line());
        if record.len() != expected.len() {
            return Err(CliError::input(format!(
                "observation file {} line {line}: expected {} fields, got {}",
                path.display(),
                expected.len(),
                record.len()
            )));
        }
        let time = parse_time(&record[0], path, line)?;
        if time <= prev_time {
            return Err(CliError::input(format!(
                "observation file {} line {line}: time {time} is not strictly increasing",
                path.display()
            )));
        }
        prev_time = time;
        let obs = match model {
            ModelSpec::Cir(_) => Observation::count(time, parse_count(&record[1], path, line)?),
            ModelSpec::Ou(_) => Observation::real(time, parse_real(&record[1], path, line)?),
            ModelSpec::WrightFisher(_) => {
                let mut ys = Vec::with_capacity(dim);
                for j in 1..=dim {
                    ys.push(parse_count(&record[j], path, line)?);
                }
                Observation::counts(time, ys)
            }
        };
        out.push(obs);
    }
    if out.is_empty() {
        return Err(CliError::input(format!(
            "observation file {} contains no data rows",
            path.display()
        )));
    }
    Ok(out)
}

fn parse_time(raw: &str, path: &Path, line: u64) -> Result<f64, CliError> {
    let v: f64 = raw.parse().map_err(|_| {
        CliError::input(format!(
            "observation file {} line {line}: invalid time '{raw}'",
            path.display()
        ))
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(CliError::input(format!(
            "observation file {} line {line}: time must be finite and nonnegative, got '{raw}'",
            path.display()
        )));
    }
    Ok(v)
}

fn parse_count(raw: &str, path: &Path, line: u64) -> Result<u64, CliError> {
    raw.parse().map_err(|_| {
        CliError::input(format!(
            "observation file {} line {line}: invalid count '{raw}'",
            path.display()
        ))
    })
}

fn parse_real(raw: &str, path: &Path, line: u64) -> Result<f64, CliError> {
    let v: f64 = raw.parse().map_err(|_| {
        CliError::input(format!(
            "observation file {} line {line}: invalid value '{raw}'",
            path.display()
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::input(format!(
            "observation file {} line {line}: value must be finite, got '{raw}'",
            path.display()
        )));
    }
    Ok(v)
}

/// Writes observations in the same format `read_observations` accepts, so
/// simulate output feeds straight back into filter.
pub fn write_observations(
    w: &mut dyn Write,
    model: &ModelSpec,
    obs: &[Observation],
) -> io::Result<()> {
    writeln!(w, "{}", expected_header(model).join(","))?;
    for o in obs {
        match &o.value {
            ObservationValue::Count(c) => writeln!(w, "{},{c}", sig17(o.time))?,
            ObservationValue::Real(v) => writeln!(w, "{},{}", sig17(o.time), sig17(*v))?,
            ObservationValue::Counts(cs) => {
                let joined = cs
                    .iter()
                    .map(u64::to_string)
                    .collect::<Vec<_>>()
                    .join(",");
                writeln!(w, "{},{joined}", sig17(o.time))?;
            }
        }
    }
    Ok(())
}

/// Writes the hidden signal path, one row per observation time.
pub fn write_states(w: &mut dyn Write, times: &[f64], states: &[Vec<f64>]) -> io::Result<()> {
    let dim = states.first().map_or(1, Vec::len);
    if dim == 1 {
        writeln!(w, "time,x")?;
    } else {
        let header = (1..=dim).map(|j| format!("x{j}")).collect::<Vec<_>>();
        writeln!(w, "time,{}", header.join(","))?;
    }
    for (t, x) in times.iter().zip(states) {
        let coords = x.iter().map(|v| sig17(*v)).collect::<Vec<_>>();
        writeln!(w, "{},{}", sig17(*t), coords.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().expect("temp file");
        f.write_all(content.as_bytes()).expect("write");
        f
    }

    #[test]
    fn scalar_counts_round_trip() {
        let model = ModelSpec::cir(2.0, 1.0, 1.0, 1.0).unwrap();
        let f = write_tmp("time,y\n0.0,3\n0.5,1\n");
        let obs = read_observations(f.path(), &model).unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[1].value, ObservationValue::Count(1));

        let mut buf = Vec::new();
        write_observations(&mut buf, &model, &obs).unwrap();
        let f2 = write_tmp(std::str::from_utf8(&buf).unwrap());
        assert_eq!(read_observations(f2.path(), &model).unwrap(), obs);
    }

    #[test]
    fn wf_header_carries_the_dimension() {
        let model = ModelSpec::wright_fisher(vec![1.0, 0.5]).unwrap();
        let f = write_tmp("time,y1,y2\n0.0,2,1\n");
        let obs = read_observations(f.path(), &model).unwrap();
        assert_eq!(obs[0].value, ObservationValue::Counts(vec![2, 1]));

        let wrong = write_tmp("time,y\n0.0,2\n");
        let err = read_observations(wrong.path(), &model).unwrap_err();
        assert!(err.to_string().contains("header"));
    }

    #[test]
    fn decreasing_time_cites_its_line() {
        let model = ModelSpec::cir(2.0, 1.0, 1.0, 1.0).unwrap();
        let f = write_tmp("time,y\n0.0,1\n0.4,0\n0.2,2\n");
        let err = read_observations(f.path(), &model).unwrap_err();
        assert!(err.to_string().contains("line 4"), "got: {err}");
    }

    #[test]
    fn negative_count_cites_its_line() {
        let model = ModelSpec::cir(2.0, 1.0, 1.0, 1.0).unwrap();
        let f = write_tmp("time,y\n0.0,1\n0.4,-2\n");
        let err = read_observations(f.path(), &model).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("'-2'"), "got: {msg}");
    }

    #[test]
    fn ragged_row_cites_its_line() {
        let model = ModelSpec::cir(2.0, 1.0, 1.0, 1.0).unwrap();
        let f = write_tmp("time,y\n0.0,1\n0.4,2,7\n");
        let err = read_observations(f.path(), &model).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("got 3"), "got: {msg}");
    }

    #[test]
    fn header_only_file_is_empty() {
        let model = ModelSpec::cir(2.0, 1.0, 1.0, 1.0).unwrap();
        let f = write_tmp("time,y\n");
        let err = read_observations(f.path(), &model).unwrap_err();
        assert!(err.to_string().contains("no data rows"));
    }

    #[test]
    fn printed_floats_parse_back_exactly() {
        let vals = [
            1.0 / 3.0,
            -2.718281828459045e-7,
            6.02214076e23,
            f64::MIN_POSITIVE,
        ];
        for v in vals {
            assert_eq!(sig17(v).parse::<f64>().unwrap(), v);
        }
    }
}
