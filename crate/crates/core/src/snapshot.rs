//! Field snapshots as CSV: a header `# t=<time> field=<name> n=<points>`
//! followed by one comma-separated row per `x2` level, `x2 = 0` first.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::RenderError;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: String,
    pub points: usize,
    pub values: Vec<f64>,
}

pub fn format_snapshot(t: f64, field: &str, points: usize, values: &[f64]) -> String {
    let mut s = format!("# t={t} field={field} n={points}\n");
    for row in values.chunks(points) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:e}");
        }
        s.push('\n');
    }
    s
}

pub fn write_snapshot(path: &Path, t: f64, field: &str, points: usize, values: &[f64]) -> std::io::Result<()> {
    fs::write(path, format_snapshot(t, field, points, values))
}

pub fn parse_snapshot(text: &str) -> Result<Snapshot, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let header = header.strip_prefix("# ").ok_or("missing header")?;
    let (mut t, mut field, mut points) = (None, None, None);
    for item in header.split_whitespace() {
        let (key, value) = item.split_once('=').ok_or("bad header field")?;
        match key {
            "t" => t = Some(value.parse::<f64>().map_err(|_| "bad time")?),
            "field" => field = Some(value.to_string()),
            "n" => points = Some(value.parse::<usize>().map_err(|_| "bad point count")?),
            _ => return Err(format!("unknown header field `{key}`")),
        }
    }
    let (t, field, points) = (t.ok_or("missing t")?, field.ok_or("missing field")?, points.ok_or("missing n")?);
    let mut values = Vec::with_capacity(points * points);
    for (j, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let row = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| format!("unparsable value in row {j}"))?;
        if row.len() != points {
            return Err(format!("row {j} has {} values, expected {points}", row.len()));
        }
        values.extend(row);
    }
    if values.len() != points * points {
        return Err(format!("{} rows, expected {points}", values.len() / points.max(1)));
    }
    Ok(Snapshot { t, field, points, values })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, RenderError> {
    let text = fs::read_to_string(path).map_err(|source| RenderError::Io { path: path.to_path_buf(), source })?;
    parse_snapshot(&text).map_err(|reason| RenderError::Malformed { path: path.to_path_buf(), reason })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let values = vec![0.0, 1.5, -2.25e-300, 1.0 / 3.0];
        let text = format_snapshot(0.75, "r", 2, &values);
        assert!(text.starts_with("# t=0.75 field=r n=2\n"));
        let s = parse_snapshot(&text).unwrap();
        assert_eq!(s, Snapshot { t: 0.75, field: "r".into(), points: 2, values });
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(parse_snapshot("# t=0 field=u1 n=2\n1,2\n3\n").is_err());
        assert!(parse_snapshot("# t=0 field=u1 n=2\n1,2\n").is_err());
        assert!(parse_snapshot("t=0\n").is_err());
    }
}
