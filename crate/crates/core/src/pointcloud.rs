//! Flat point storage and the point-cloud CSV format.
//!
//! CSV layout: a header `re0,im0,re1,im1,…` followed by one row per point with
//! `2n+2` real columns in the same interleaved order as [`ChartPoint`].
//! Values are written with Rust's shortest round-trip formatting, so a
//! write/read cycle is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::ChartPoint;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        PointCloud { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, points: usize) -> Self {
        PointCloud {
            dim,
            data: Vec::with_capacity(dim * points),
        }
    }

    pub fn from_points(dim: usize, points: &[ChartPoint]) -> Result<Self> {
        let mut cloud = PointCloud::with_capacity(dim, points.len());
        for p in points {
            cloud.push(p.coords())?;
        }
        Ok(cloud)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        self.data.extend_from_slice(p);
        Ok(())
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn chart_point(&self, i: usize) -> ChartPoint {
        ChartPoint::new(self.point(i).to_vec()).expect("cloud dimension is even")
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Keeps the points whose indices are listed, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut out = PointCloud::with_capacity(self.dim, indices.len());
        for &i in indices {
            out.data.extend_from_slice(self.point(i));
        }
        out
    }

    pub fn header(dim: usize) -> Vec<String> {
        (0..dim / 2)
            .flat_map(|j| [format!("re{j}"), format!("im{j}")])
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let fail = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(Self::header(self.dim)).map_err(fail)?;
        for p in self.iter() {
            w.write_record(p.iter().map(|v| v.to_string())).map_err(fail)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    /// Parses the CSV layout described in the module docs. Row numbers in
    /// errors count data rows from 1; columns count from 1.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = r
            .headers()
            .map_err(|e| Error::Csv {
                row: 0,
                column: 0,
                message: e.to_string(),
            })?
            .clone();
        let dim = header.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Csv {
                row: 0,
                column: dim,
                message: format!("header must have an even, nonzero number of columns, found {dim}"),
            });
        }
        for (k, (got, want)) in header.iter().zip(Self::header(dim)).enumerate() {
            if got.trim() != want {
                return Err(Error::Csv {
                    row: 0,
                    column: k + 1,
                    message: format!("expected header `{want}`, found `{got}`"),
                });
            }
        }
        let mut cloud = PointCloud::new(dim);
        let mut buf = vec![0.0; dim];
        for (i, record) in r.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| Error::Csv {
                row,
                column: 0,
                message: e.to_string(),
            })?;
            if record.len() != dim {
                return Err(Error::Csv {
                    row,
                    column: record.len().min(dim) + 1,
                    message: format!("expected {dim} fields, found {}", record.len()),
                });
            }
            for (k, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Csv {
                    row,
                    column: k + 1,
                    message: format!("`{field}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        row,
                        column: k + 1,
                        message: format!("`{field}` is not finite"),
                    });
                }
                buf[k] = v;
            }
            cloud.data.extend_from_slice(&buf);
        }
        Ok(cloud)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| match e {
            Error::Format(m) => Error::io(path, std::io::Error::other(m)),
            other => other,
        })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let mut cloud = PointCloud::new(4);
        cloud.push(&[0.1, -1.0 / 3.0, 1e-300, 2.5e17]).unwrap();
        cloud.push(&[f64::MIN_POSITIVE, -0.0, 7.0, std::f64::consts::PI]).unwrap();
        let mut buf = Vec::new();
        cloud.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("re0,im0,re1,im1\n"));
        let back = PointCloud::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.as_flat().iter().zip(cloud.as_flat()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_row_is_named() {
        let text = "re0,im0,re1,im1\n1,2,3,4\n1,2,x,4\n";
        match PointCloud::read_csv(text.as_bytes()) {
            Err(Error::Csv { row, column, .. }) => assert_eq!((row, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        let short = "re0,im0,re1,im1\n1,2,3\n";
        assert!(matches!(
            PointCloud::read_csv(short.as_bytes()),
            Err(Error::Csv { row: 1, .. })
        ));
    }

    #[test]
    fn bad_header_is_rejected() {
        let text = "x,y,re1,im1\n1,2,3,4\n";
        assert!(matches!(
            PointCloud::read_csv(text.as_bytes()),
            Err(Error::Csv { row: 0, column: 1, .. })
        ));
        assert!(PointCloud::read_csv("re0,im0,re1\n".as_bytes()).is_err());
    }

    #[test]
    fn push_checks_dimension() {
        let mut cloud = PointCloud::new(4);
        assert!(cloud.push(&[1.0, 2.0]).is_err());
    }
}
