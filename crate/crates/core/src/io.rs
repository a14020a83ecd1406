//! File formats: the `GADCMAT1` dense container, header-free feature CSV,
//! `node_id,label` CSV and split JSON.
//!
//! `GADCMAT1` layout: the 8 ASCII bytes `GADCMAT1`, then `n` and `d` as
//! little-endian `u64`, then `n·d` little-endian `f64` values in row-major
//! order. Nothing else.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{load_graph, Graph};

pub const MATRIX_MAGIC: &[u8; 8] = b"GADCMAT1";

pub fn write_matrix_bin<W: Write>(m: ArrayView2<'_, f64>, mut w: W) -> std::io::Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for row in m.rows() {
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix_bin<R: Read>(mut r: R, source_name: &str) -> Result<Array2<f64>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::input(source_name, None, "truncated header at offset 0"))?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::input(
            source_name,
            None,
            "bad magic at offset 0, expected GADCMAT1",
        ));
    }
    let mut word = [0u8; 8];
    let mut read_u64 = |offset: usize| -> Result<u64> {
        r.read_exact(&mut word)
            .map_err(|_| Error::input(source_name, None, format!("truncated header at offset {offset}")))?;
        Ok(u64::from_le_bytes(word))
    };
    let n = read_u64(8)? as usize;
    let d = read_u64(16)? as usize;
    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::input(source_name, None, "n·d overflows"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::input(source_name, None, e.to_string()))?;
    if bytes.len() != count * 8 {
        return Err(Error::input(
            source_name,
            None,
            format!(
                "payload at offset 24 has {} bytes, expected {} for {n}x{d}",
                bytes.len(),
                count * 8
            ),
        ));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((n, d), values).expect("length checked"))
}

/// Header-free CSV, one row per node.
pub fn read_features_csv<R: BufRead>(r: R, source_name: &str) -> Result<FeatureMatrix> {
    let mut values = Vec::new();
    let mut d: Option<usize> = None;
    let mut n = 0usize;
    for (idx, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::input(source_name, Some(idx + 1), e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::input(source_name, Some(idx + 1), format!("bad number {:?}", field.trim())))?;
            if !v.is_finite() {
                return Err(Error::input(source_name, Some(idx + 1), "non-finite feature"));
            }
            values.push(v);
        }
        let width = values.len() - before;
        match d {
            None => d = Some(width),
            Some(w) if w != width => {
                return Err(Error::input(
                    source_name,
                    Some(idx + 1),
                    format!("row has {width} columns, expected {w}"),
                ))
            }
            _ => {}
        }
        n += 1;
    }
    let arr = Array2::from_shape_vec((n, d.unwrap_or(0)), values).expect("consistent widths");
    Ok(FeatureMatrix::from_trusted(arr))
}

pub fn write_features_csv<W: Write>(x: &FeatureMatrix, mut w: W) -> std::io::Result<()> {
    for row in x.as_array().rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads features from `path`, choosing the binary container when the file
/// starts with the magic bytes and CSV otherwise.
pub fn read_features_file(path: &Path) -> Result<FeatureMatrix> {
    let name = path.display().to_string();
    let mut f = BufReader::new(open(path)?);
    let head = f.fill_buf().map_err(|e| Error::io(path, e))?;
    if head.starts_with(MATRIX_MAGIC) {
        let arr = read_matrix_bin(f, &name)?;
        FeatureMatrix::new(arr).map_err(|e| Error::input(name, None, e.to_string()))
    } else {
        read_features_csv(f, &name)
    }
}

pub fn write_matrix_file(path: &Path, m: ArrayView2<'_, f64>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_matrix_bin(m, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_graph_file(path: &Path, n: usize) -> Result<Graph> {
    load_graph(BufReader::new(open(path)?), n, &path.display().to_string())
}

/// `node_id,label` CSV. A non-numeric first line is treated as a header.
pub fn read_labels_csv<R: BufRead>(r: R, n: usize, source_name: &str) -> Result<Vec<usize>> {
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::input(source_name, Some(lineno), e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a.trim(), b.trim()),
            _ => {
                return Err(Error::input(source_name, Some(lineno), "expected node_id,label"));
            }
        };
        let (node, label) = match (a.parse::<usize>(), b.parse::<usize>()) {
            (Ok(node), Ok(label)) => (node, label),
            _ if lineno == 1 => continue,
            _ => return Err(Error::input(source_name, Some(lineno), "non-integer node_id or label")),
        };
        if node >= n {
            return Err(Error::input(
                source_name,
                Some(lineno),
                format!("node {node} out of range for n = {n}"),
            ));
        }
        if labels[node].replace(label).is_some() {
            return Err(Error::input(
                source_name,
                Some(lineno),
                format!("duplicate label for node {node}"),
            ));
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::input(source_name, None, format!("node {i} has no label"))))
        .collect()
}

pub fn write_labels_csv<W: Write>(labels: &[usize], mut w: W) -> std::io::Result<()> {
    writeln!(w, "node_id,label")?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    Ok(())
}

/// `{"train": [...], "val": [...], "test": [...]}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn read_splits_json<R: Read>(r: R, source_name: &str) -> Result<Splits> {
    serde_json::from_reader(r).map_err(|e| Error::input(source_name, Some(e.line()), e.to_string()))
}

pub fn read_labels_file(path: &Path, n: usize) -> Result<Vec<usize>> {
    read_labels_csv(BufReader::new(open(path)?), n, &path.display().to_string())
}

pub fn read_splits_file(path: &Path) -> Result<Splits> {
    read_splits_json(BufReader::new(open(path)?), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn container_layout_is_exact() {
        let m = array![[1.0, -2.5], [0.0, 3.25]];
        let mut buf = Vec::new();
        write_matrix_bin(m.view(), &mut buf).unwrap();
        assert_eq!(&buf[..8], b"GADCMAT1");
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), -2.5);
        assert_eq!(buf.len(), 24 + 4 * 8);
        assert_eq!(read_matrix_bin(buf.as_slice(), "m").unwrap(), m);
    }

    #[test]
    fn container_rejects_truncation_and_bad_magic() {
        let mut buf = Vec::new();
        write_matrix_bin(array![[1.0, 2.0]].view(), &mut buf).unwrap();
        let err = read_matrix_bin(&buf[..buf.len() - 1], "t").unwrap_err();
        assert!(err.to_string().contains("offset 24"));
        buf[0] = b'X';
        assert!(read_matrix_bin(buf.as_slice(), "t").is_err());
    }

    #[test]
    fn csv_features_parse_and_check_width() {
        let x = read_features_csv("1,2\n3,4.5\n".as_bytes(), "f").unwrap();
        assert_eq!(x.as_array(), &array![[1.0, 2.0], [3.0, 4.5]]);
        let err = read_features_csv("1,2\n3\n".as_bytes(), "f").unwrap_err();
        assert!(matches!(err, Error::Input { line: Some(2), .. }));
    }

    #[test]
    fn labels_with_header_and_missing_node() {
        let l = read_labels_csv("node_id,label\n1,0\n0,2\n".as_bytes(), 2, "l").unwrap();
        assert_eq!(l, vec![2, 0]);
        assert!(read_labels_csv("0,1\n".as_bytes(), 2, "l").is_err());
    }

    #[test]
    fn splits_json() {
        let s = read_splits_json(r#"{"train":[0,1],"val":[2],"test":[3]}"#.as_bytes(), "s").unwrap();
        assert_eq!(s.train, vec![0, 1]);
        assert_eq!(s.test, vec![3]);
    }
}
