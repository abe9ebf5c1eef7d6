//! The vector collection and its line-based text format.
//!
//! One vector per line: `id<TAB>dim:weight dim:weight ...` with
//! dimensions ascending. Lines starting with `#` are comments. Ids must
//! be unique and dense in `[0, n)`; vectors may appear in any order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::vector::SparseVector;

/// An immutable collection of sparse vectors with dense ids.
#[derive(Debug, Clone)]
pub struct Dataset {
    vectors: Vec<SparseVector>,
}

impl Dataset {
    /// Validates dense ids `0..n` and stores the vectors sorted by id.
    pub fn new(mut vectors: Vec<SparseVector>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidInput("empty dataset".into()));
        }
        vectors.sort_by_key(|v| v.id());
        for (i, v) in vectors.iter().enumerate() {
            if v.id() as usize != i {
                return Err(Error::InvalidInput(format!(
                    "ids must be unique and dense in [0, n): expected {i}, found {}",
                    v.id()
                )));
            }
        }
        Ok(Self { vectors })
    }

    pub fn n(&self) -> usize {
        self.vectors.len()
    }

    /// Number of unordered pairs, `n(n-1)/2`.
    pub fn pair_count(&self) -> u64 {
        let n = self.vectors.len() as u64;
        n * (n - 1) / 2
    }

    pub fn get(&self, id: u32) -> &SparseVector {
        &self.vectors[id as usize]
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut vectors = Vec::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            vectors.push(parse_line(line).map_err(|msg| Error::Parse { line: lineno, msg })?);
        }
        Self::new(vectors)
    }

    pub fn read_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(file)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.vectors {
            write!(w, "{}\t", v.id())?;
            let mut first = true;
            for &(dim, weight) in v.entries() {
                if !first {
                    write!(w, " ")?;
                }
                write!(w, "{dim}:{weight}")?;
                first = false;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut file)?;
        file.flush()?;
        Ok(())
    }
}

fn parse_line(line: &str) -> std::result::Result<SparseVector, String> {
    let (id_str, rest) = line
        .split_once('\t')
        .ok_or_else(|| "expected `id<TAB>entries`".to_string())?;
    let id: u32 = id_str
        .trim()
        .parse()
        .map_err(|_| format!("bad id {id_str:?}"))?;
    let mut entries = Vec::new();
    for tok in rest.split_whitespace() {
        let (d, w) = tok
            .split_once(':')
            .ok_or_else(|| format!("bad entry {tok:?}, expected dim:weight"))?;
        let dim: u32 = d.parse().map_err(|_| format!("bad dimension {d:?}"))?;
        let weight: f64 = w.parse().map_err(|_| format!("bad weight {w:?}"))?;
        entries.push((dim, weight));
    }
    SparseVector::new(id, entries).map_err(|e| e.to_string())
}
