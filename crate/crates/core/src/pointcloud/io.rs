//! Plain-text cloud format:
//!
//! ```text
//! # d=<d> k=<k> n=<n> m=<m>
//! x1,...,xd,V      (n rows)
//! index,A          (m rows, 0-based index into the point rows)
//! ```
//!
//! Floats are written with 17 significant digits so a round trip is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::PointCloud;
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_cloud<W: Write>(cloud: &PointCloud, mut out: W) -> Result<()> {
    writeln!(
        out,
        "# d={} k={} n={} m={}",
        cloud.dim(),
        cloud.intrinsic_dim(),
        cloud.len(),
        cloud.boundary_len()
    )?;
    for (p, v) in cloud.points().zip(cloud.volume_weights()) {
        let mut row: Vec<String> = p.iter().copied().map(fmt_f64).collect();
        row.push(fmt_f64(*v));
        writeln!(out, "{}", row.join(","))?;
    }
    for (i, a) in cloud.boundary_indices().iter().zip(cloud.area_weights()) {
        writeln!(out, "{i},{}", fmt_f64(*a))?;
    }
    Ok(())
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_cloud(cloud, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    read_cloud(BufReader::new(File::open(path)?), path)
}

/// Parses a cloud; `origin` only labels error messages.
pub fn read_cloud<R: BufRead>(input: R, origin: impl Into<PathBuf>) -> Result<PointCloud> {
    let origin = origin.into();
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.clone(),
        line,
        msg,
    };
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));

    let (hline, header) = match lines.next() {
        Some((i, l)) => (i, l?),
        None => return Err(err(1, "missing header".into())),
    };
    let header = parse_header(&header).map_err(|m| err(hline, m))?;

    let parse_f = |line: usize, s: &str| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| err(line, format!("cannot parse `{}` as a number", s.trim())))?;
        if !v.is_finite() {
            return Err(err(line, format!("non-finite value `{}`", s.trim())));
        }
        Ok(v)
    };

    let mut coords = Vec::with_capacity(header.n * header.d);
    let mut volume = Vec::with_capacity(header.n);
    for row in 0..header.n {
        let (line, text) = match lines.next() {
            Some((i, l)) => (i, l?),
            None => return Err(err(hline, format!("expected {} point rows, found {row}", header.n))),
        };
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != header.d + 1 {
            return Err(err(
                line,
                format!(
                    "point row has {} fields, expected {} coordinates plus a weight",
                    fields.len(),
                    header.d
                ),
            ));
        }
        for f in &fields[..header.d] {
            coords.push(parse_f(line, f)?);
        }
        let v = parse_f(line, fields[header.d])?;
        if v <= 0.0 {
            return Err(err(line, format!("volume weight {v} must be positive")));
        }
        volume.push(v);
    }

    let mut boundary = Vec::with_capacity(header.m);
    let mut area = Vec::with_capacity(header.m);
    for row in 0..header.m {
        let (line, text) = match lines.next() {
            Some((i, l)) => (i, l?),
            None => return Err(err(hline, format!("expected {} boundary rows, found {row}", header.m))),
        };
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 2 {
            return Err(err(line, format!("boundary row has {} fields, expected 2", fields.len())));
        }
        let idx: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| err(line, format!("bad boundary index `{}`", fields[0].trim())))?;
        if idx >= header.n {
            return Err(err(line, format!("boundary index {idx} out of range")));
        }
        let a = parse_f(line, fields[1])?;
        if a <= 0.0 {
            return Err(err(line, format!("area weight {a} must be positive")));
        }
        boundary.push(idx);
        area.push(a);
    }
    if let Some((line, _)) = lines.next() {
        return Err(err(line, "unexpected trailing row".into()));
    }
    PointCloud::new(header.d, header.k, coords, volume, boundary, area)
}

struct Header {
    d: usize,
    k: usize,
    n: usize,
    m: usize,
}

fn parse_header(line: &str) -> std::result::Result<Header, String> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| "header must start with `#`".to_string())?;
    let (mut d, mut k, mut n, mut m) = (None, None, None, None);
    for tok in body.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| format!("malformed header token `{tok}`"))?;
        let val: usize = val
            .parse()
            .map_err(|_| format!("header value `{val}` is not a count"))?;
        let slot = match key {
            "d" => &mut d,
            "k" => &mut k,
            "n" => &mut n,
            "m" => &mut m,
            _ => return Err(format!("unknown header key `{key}`")),
        };
        *slot = Some(val);
    }
    match (d, k, n, m) {
        (Some(d), Some(k), Some(n), Some(m)) => Ok(Header { d, k, n, m }),
        _ => Err("header must define d, k, n and m".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<PointCloud> {
        read_cloud(s.as_bytes(), "mem")
    }

    #[test]
    fn reads_simple_file() {
        let c = parse("# d=2 k=1 n=2 m=1\n0,0,0.5\n1,0,0.5\n1,2\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.point(1), &[1.0, 0.0]);
        assert_eq!(c.boundary_indices(), &[1]);
        assert_eq!(c.area_weights(), &[2.0]);
    }

    #[test]
    fn zero_weight_names_row() {
        let e = parse("# d=1 k=1 n=3 m=0\n0,1\n0.5,0\n1,1\n").unwrap_err();
        match e {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("positive"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_row_names_row() {
        let e = parse("# d=3 k=2 n=2 m=0\n0,0,0,1\n1,1,1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn other_malformations() {
        assert!(parse("").is_err());
        assert!(parse("d=1 k=1 n=1 m=0\n0,1\n").is_err());
        assert!(parse("# d=1 k=1 n=2 m=0\n0,1\n").is_err());
        assert!(parse("# d=1 k=1 n=1 m=1\n0,1\n3,1\n").is_err());
        assert!(parse("# d=1 k=1 n=1 m=0\nx,1\n").is_err());
        assert!(parse("# d=1 k=1 n=1 m=0\n0,1\n0,1\n").is_err());
        assert!(parse("# d=1 k=1 n=1 m=0\nnan,1\n").is_err());
    }

    #[test]
    fn file_round_trip() {
        let c = PointCloud::new(
            2,
            1,
            vec![0.1, 1.0 / 3.0, -2.5e-300, 7.0],
            vec![std::f64::consts::PI, 1e-5],
            vec![1],
            vec![0.7],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        save_cloud(&c, &path).unwrap();
        assert_eq!(load_cloud(&path).unwrap(), c);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            pts in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6, 1e-9f64..1e3), 1..20),
            nb in 0usize..5,
        ) {
            let n = pts.len();
            let coords: Vec<f64> = pts.iter().flat_map(|p| [p.0, p.1]).collect();
            let v: Vec<f64> = pts.iter().map(|p| p.2).collect();
            let boundary: Vec<usize> = (0..nb.min(n)).collect();
            let area: Vec<f64> = boundary.iter().map(|&i| v[i] * 1.5).collect();
            let c = PointCloud::new(2, 1, coords, v, boundary, area).unwrap();
            let mut buf = Vec::new();
            write_cloud(&c, &mut buf).unwrap();
            let back = read_cloud(buf.as_slice(), "mem").unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
