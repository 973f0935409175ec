//! Binary parameter checkpoints.
//!
//! All integers and floats are little-endian; a string is a `u32` byte
//! length followed by UTF-8 bytes.
//!
//! ```text
//! magic      8 bytes  "DSNRCKPT"
//! version    u32      1
//! arch       u32 embedding_dim, u32 window_radius, u32 hidden_dim,
//!            u32 num_labels, f64 dropout_rate, u64 init_seed
//! n_tables   u32
//!   table    string name, u32 count, count × string
//! n_arrays   u32
//!   array    string name, u32 rows, u32 cols, rows·cols × f64 (row-major)
//! ```
//!
//! Arrays are the five parameter blocks (`embedding`, `hidden_w`, `hidden_b`,
//! `output_w`, `output_b`; vectors are stored with one row). String tables
//! carry whatever the caller needs to interpret the model, e.g. the label
//! alphabet and the vocabulary. Floats are stored bit-for-bit.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{TaggerArch, TaggerParams, BLOCK_NAMES};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"DSNRCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: TaggerParams,
    pub tables: Vec<(String, Vec<String>)>,
}

impl Checkpoint {
    pub fn new(params: TaggerParams) -> Self {
        Self {
            params,
            tables: Vec::new(),
        }
    }

    pub fn with_table(mut self, name: &str, entries: Vec<String>) -> Self {
        self.tables.push((name.to_string(), entries));
        self
    }

    pub fn table(&self, name: &str) -> Option<&[String]> {
        self.tables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        let a = &self.params.arch;
        put_u32(&mut out, a.embedding_dim as u32);
        put_u32(&mut out, a.window_radius as u32);
        put_u32(&mut out, a.hidden_dim as u32);
        put_u32(&mut out, a.num_labels as u32);
        out.extend_from_slice(&a.dropout_rate.to_le_bytes());
        out.extend_from_slice(&a.init_seed.to_le_bytes());

        put_u32(&mut out, self.tables.len() as u32);
        for (name, entries) in &self.tables {
            put_str(&mut out, name);
            put_u32(&mut out, entries.len() as u32);
            for e in entries {
                put_str(&mut out, e);
            }
        }

        let p = &self.params;
        let shapes = [
            p.embedding.dim(),
            p.hidden_w.dim(),
            (1, p.hidden_b.len()),
            p.output_w.dim(),
            (1, p.output_b.len()),
        ];
        put_u32(&mut out, shapes.len() as u32);
        for ((name, data), (rows, cols)) in p.blocks().into_iter().zip(shapes) {
            put_str(&mut out, name);
            put_u32(&mut out, rows as u32);
            put_u32(&mut out, cols as u32);
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let arch = TaggerArch {
            embedding_dim: r.u32()? as usize,
            window_radius: r.u32()? as usize,
            hidden_dim: r.u32()? as usize,
            num_labels: r.u32()? as usize,
            dropout_rate: f64::from_le_bytes(r.array()?),
            init_seed: u64::from_le_bytes(r.array()?),
        };
        arch.validate()
            .map_err(|e| Error::Checkpoint(format!("invalid architecture: {e}")))?;

        let n_tables = r.u32()?;
        let mut tables = Vec::new();
        for _ in 0..n_tables {
            let name = r.string()?;
            let count = r.u32()?;
            let entries = (0..count).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
            tables.push((name, entries));
        }

        let n_arrays = r.u32()? as usize;
        if n_arrays != BLOCK_NAMES.len() {
            return Err(Error::Checkpoint(format!(
                "expected 5 arrays, found {n_arrays}"
            )));
        }
        let mut arrays = Vec::new();
        for expected in BLOCK_NAMES {
            let name = r.string()?;
            if name != expected {
                return Err(Error::Checkpoint(format!(
                    "expected array `{expected}`, found `{name}`"
                )));
            }
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let data = (0..rows * cols)
                .map(|_| r.array().map(f64::from_le_bytes))
                .collect::<Result<Vec<_>>>()?;
            arrays.push(((rows, cols), data));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }

        let mut it = arrays.into_iter();
        let mut matrix = |want: (usize, usize)| -> Result<Array2<f64>> {
            let (shape, data) = it.next().expect("five arrays");
            if want.0 != usize::MAX && shape != want {
                return Err(Error::Checkpoint(format!(
                    "array shape {shape:?}, expected {want:?}"
                )));
            }
            Array2::from_shape_vec(shape, data).map_err(|e| Error::Checkpoint(e.to_string()))
        };
        let embedding = matrix((usize::MAX, 0))?;
        if embedding.ncols() != arch.embedding_dim || embedding.nrows() == 0 {
            return Err(Error::Checkpoint(
                "embedding shape does not match architecture".into(),
            ));
        }
        let hidden_w = matrix((arch.input_dim(), arch.hidden_dim))?;
        let hidden_b = matrix((1, arch.hidden_dim))?;
        let output_w = matrix((arch.hidden_dim, arch.num_labels))?;
        let output_b = matrix((1, arch.num_labels))?;
        let params = TaggerParams {
            arch,
            embedding,
            hidden_w,
            hidden_b: Array1::from(hidden_b.into_raw_vec_and_offset().0),
            output_w,
            output_b: Array1::from(output_b.into_raw_vec_and_offset().0),
        };
        Ok(Self { params, tables })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::from(e).in_file(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        fs::read(path)
            .map_err(Error::from)
            .and_then(|b| Self::from_bytes(&b))
            .map_err(|e| e.in_file(path))
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}
