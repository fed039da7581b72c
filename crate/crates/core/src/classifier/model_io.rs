//! Model file format.
//!
//! A model file is a flat little-endian binary container:
//!
//! ```text
//! magic        8 bytes   "SETCONV\0"
//! version      u32       MODEL_FORMAT_VERSION
//! kind         u8        1 = binary, 2 = one-vs-all
//! seed         u64       run seed
//! n_classes    u32       classes in the training data
//! s_post       u64       post-training subset size
//! data_rows    u64       rows of the dataset the run was split from
//! n_test       u64       held-out row count, then n_test × u64 row indices
//! n_heads      u32       1 for binary, n_classes for one-vs-all
//! n_heads × head:
//!   d, d_o, H              u32 × 3
//!   majority_label         u32
//!   minority_label         u32
//!   head_seed              u64
//!   w       d·d_o   f64    row-major
//!   w1      d·H     f64    row-major
//!   b1      H       f64
//!   w2      H·d_o   f64    row-major
//!   b2      d_o     f64
//!   anchor  d       f64
//!   rep_maj d_o     f64
//!   rep_min d_o     f64
//! ```
//!
//! Every float is the raw IEEE-754 bit pattern, so a save/load round trip
//! is bit-exact. Trailing bytes are rejected.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{BinaryClassifier, ClassRepresentatives, OneVsAllModel, TrainedModel};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::setconv::{Anchor, MlpParams, SetConvParams};

pub const MODEL_MAGIC: &[u8; 8] = b"SETCONV\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;

const KIND_BINARY: u8 = 1;
const KIND_ONE_VS_ALL: u8 = 2;

/// Run-level information stored next to the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMetadata {
    pub seed: u64,
    pub n_classes: usize,
    pub s_post: usize,
    /// Row count of the dataset the run was split from.
    pub data_rows: usize,
    /// Held-out rows of that dataset, sorted.
    pub test_indices: Vec<usize>,
}

// both variants are built once per process; boxing buys nothing
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Binary(BinaryClassifier),
    OneVsAll(OneVsAllModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub metadata: ModelMetadata,
    pub body: ModelBody,
}

impl ModelFile {
    pub fn input_dim(&self) -> usize {
        match &self.body {
            ModelBody::Binary(b) => b.model.input_dim(),
            ModelBody::OneVsAll(m) => m.input_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.metadata;
        if let Some(&bad) = m.test_indices.iter().find(|&&i| i >= m.data_rows) {
            return Err(Error::ShapeInconsistency(format!(
                "held-out index {bad} outside {} data rows",
                m.data_rows
            )));
        }
        match &self.body {
            ModelBody::Binary(b) => {
                b.validate()?;
                let top = b.model.majority_label.max(b.model.minority_label);
                if top >= m.n_classes {
                    return Err(Error::ShapeInconsistency(format!(
                        "label {top} outside {} classes",
                        m.n_classes
                    )));
                }
            }
            ModelBody::OneVsAll(ova) => {
                ova.validate()?;
                if ova.n_classes() != m.n_classes {
                    return Err(Error::ShapeInconsistency(format!(
                        "{} heads for {} classes",
                        ova.n_classes(),
                        m.n_classes
                    )));
                }
            }
        }
        Ok(())
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::ShapeInconsistency(format!("{what} {v} exceeds u32")))
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for &v in values {
        out.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn write_head<W: Write>(out: &mut W, head: &BinaryClassifier) -> Result<()> {
    let p = &head.model.params;
    out.write_u32::<LittleEndian>(to_u32(p.input_dim(), "d")?)?;
    out.write_u32::<LittleEndian>(to_u32(p.output_dim(), "d_o")?)?;
    out.write_u32::<LittleEndian>(to_u32(p.hidden_width(), "H")?)?;
    out.write_u32::<LittleEndian>(to_u32(head.model.majority_label, "label")?)?;
    out.write_u32::<LittleEndian>(to_u32(head.model.minority_label, "label")?)?;
    out.write_u64::<LittleEndian>(head.model.seed)?;
    for t in p.tensors() {
        write_f64s(out, t)?;
    }
    write_f64s(out, head.model.anchor.as_slice())?;
    write_f64s(out, &head.reps.majority)?;
    write_f64s(out, &head.reps.minority)?;
    Ok(())
}

/// Serializes a model into the documented byte layout.
pub fn encode_model(file: &ModelFile) -> Result<Vec<u8>> {
    file.validate()?;
    let mut out = Vec::new();
    let m = &file.metadata;
    out.write_all(MODEL_MAGIC)?;
    out.write_u32::<LittleEndian>(MODEL_FORMAT_VERSION)?;
    let heads: Vec<&BinaryClassifier> = match &file.body {
        ModelBody::Binary(b) => {
            out.write_u8(KIND_BINARY)?;
            vec![b]
        }
        ModelBody::OneVsAll(ova) => {
            out.write_u8(KIND_ONE_VS_ALL)?;
            ova.heads.iter().collect()
        }
    };
    out.write_u64::<LittleEndian>(m.seed)?;
    out.write_u32::<LittleEndian>(to_u32(m.n_classes, "n_classes")?)?;
    out.write_u64::<LittleEndian>(m.s_post as u64)?;
    out.write_u64::<LittleEndian>(m.data_rows as u64)?;
    out.write_u64::<LittleEndian>(m.test_indices.len() as u64)?;
    for &i in &m.test_indices {
        out.write_u64::<LittleEndian>(i as u64)?;
    }
    out.write_u32::<LittleEndian>(to_u32(heads.len(), "n_heads")?)?;
    for head in heads {
        write_head(&mut out, head)?;
    }
    Ok(out)
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

impl<'a> Reader<'a> {
    fn truncated(what: &str) -> Error {
        Error::MalformedModel(format!("truncated while reading {what}"))
    }

    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        self.cur.read_u8().map_err(|_| Self::truncated(what))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.cur
            .read_u32::<LittleEndian>()
            .map_err(|_| Self::truncated(what))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        self.cur
            .read_u64::<LittleEndian>()
            .map_err(|_| Self::truncated(what))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let v = self.u64(what)?;
        usize::try_from(v).map_err(|_| Error::MalformedModel(format!("{what} {v} too large")))
    }

    /// Reads `count` floats after checking that enough bytes remain, so a
    /// corrupt length cannot trigger a huge allocation.
    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        if count.checked_mul(8).is_none_or(|bytes| bytes > self.remaining()) {
            return Err(Self::truncated(what));
        }
        let mut out = vec![0.0; count];
        self.cur
            .read_f64_into::<LittleEndian>(&mut out)
            .map_err(|_| Self::truncated(what))?;
        Ok(out)
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Matrix> {
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::MalformedModel(format!("{what} shape overflows")))?;
        let data = self.f64s(count, what)?;
        Matrix::from_vec(rows, cols, data)
            .map_err(|_| Error::MalformedModel(format!("{what} holds non-finite values")))
    }

    fn vector(&mut self, len: usize, what: &str) -> Result<Vector> {
        let data = self.f64s(len, what)?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedModel(format!("{what} holds non-finite values")));
        }
        Ok(Vector::from(data))
    }

    fn head(&mut self) -> Result<BinaryClassifier> {
        let d = self.u32("d")? as usize;
        let d_out = self.u32("d_o")? as usize;
        let hidden = self.u32("H")? as usize;
        if d == 0 || d_out == 0 || hidden == 0 {
            return Err(Error::ShapeInconsistency(format!(
                "zero dimension in head (d={d}, d_o={d_out}, H={hidden})"
            )));
        }
        let majority_label = self.u32("majority label")? as usize;
        let minority_label = self.u32("minority label")? as usize;
        let seed = self.u64("head seed")?;
        let params = SetConvParams {
            w: self.matrix(d, d_out, "w")?,
            mlp: MlpParams {
                w1: self.matrix(d, hidden, "w1")?,
                b1: self.vector(hidden, "b1")?,
                w2: self.matrix(hidden, d_out, "w2")?,
                b2: self.vector(d_out, "b2")?,
            },
        };
        let anchor = Anchor::new(self.vector(d, "anchor")?)?;
        let reps = ClassRepresentatives {
            majority: self.vector(d_out, "majority representative")?,
            minority: self.vector(d_out, "minority representative")?,
        };
        Ok(BinaryClassifier {
            model: TrainedModel {
                params,
                anchor,
                majority_label,
                minority_label,
                seed,
            },
            reps,
        })
    }
}

/// Parses bytes produced by [`encode_model`].
pub fn decode_model(bytes: &[u8]) -> Result<ModelFile> {
    let mut r = Reader {
        cur: Cursor::new(bytes),
    };
    let mut magic = [0u8; 8];
    r.cur
        .read_exact(&mut magic)
        .map_err(|_| Reader::truncated("magic"))?;
    if &magic != MODEL_MAGIC {
        return Err(Error::MalformedModel("not a SetConv model file".into()));
    }
    let version = r.u32("version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelVersion {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let kind = r.u8("kind")?;
    let seed = r.u64("seed")?;
    let n_classes = r.u32("n_classes")? as usize;
    let s_post = r.usize("s_post")?;
    let data_rows = r.usize("data_rows")?;
    let n_test = r.usize("n_test")?;
    if n_test.checked_mul(8).is_none_or(|b| b > r.remaining()) {
        return Err(Reader::truncated("held-out indices"));
    }
    let test_indices = (0..n_test)
        .map(|_| r.usize("held-out index"))
        .collect::<Result<Vec<_>>>()?;
    let n_heads = r.u32("n_heads")? as usize;
    let body = match kind {
        KIND_BINARY => {
            if n_heads != 1 {
                return Err(Error::ShapeInconsistency(format!(
                    "binary model with {n_heads} heads"
                )));
            }
            ModelBody::Binary(r.head()?)
        }
        KIND_ONE_VS_ALL => {
            let heads = (0..n_heads)
                .map(|_| r.head())
                .collect::<Result<Vec<_>>>()?;
            ModelBody::OneVsAll(OneVsAllModel { heads })
        }
        other => return Err(Error::MalformedModel(format!("unknown model kind {other}"))),
    };
    if r.remaining() != 0 {
        return Err(Error::MalformedModel(format!(
            "{} trailing bytes",
            r.remaining()
        )));
    }
    let file = ModelFile {
        metadata: ModelMetadata {
            seed,
            n_classes,
            s_post,
            data_rows,
            test_indices,
        },
        body,
    };
    file.validate()?;
    Ok(file)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn save_model(path: impl AsRef<Path>, file: &ModelFile) -> Result<()> {
    write_atomic(path, &encode_model(file)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use crate::setconv::init_params;

    fn head(seed: u64, labels: (usize, usize)) -> BinaryClassifier {
        let mut rng = Rng::seed_from(seed);
        let mut params = init_params(3, 4, 5, &mut rng).unwrap();
        params.mlp.b1.iter_mut().for_each(|b| *b = rng.normal());
        let rand_vec = |rng: &mut Rng, n: usize| Vector::from((0..n).map(|_| rng.normal()).collect::<Vec<_>>());
        BinaryClassifier {
            model: TrainedModel {
                params,
                anchor: Anchor::new(rand_vec(&mut rng, 3)).unwrap(),
                majority_label: labels.0,
                minority_label: labels.1,
                seed,
            },
            reps: ClassRepresentatives {
                majority: rand_vec(&mut rng, 4),
                minority: rand_vec(&mut rng, 4),
            },
        }
    }

    fn binary_file() -> ModelFile {
        ModelFile {
            metadata: ModelMetadata {
                seed: 42,
                n_classes: 2,
                s_post: 1000,
                data_rows: 10,
                test_indices: vec![1, 4, 9],
            },
            body: ModelBody::Binary(head(1, (0, 1))),
        }
    }

    #[test]
    fn round_trip_binary_and_one_vs_all() {
        let file = binary_file();
        let bytes = encode_model(&file).unwrap();
        assert_eq!(&bytes[..8], MODEL_MAGIC);
        assert_eq!(decode_model(&bytes).unwrap(), file);

        let ova = ModelFile {
            metadata: ModelMetadata {
                n_classes: 3,
                ..file.metadata.clone()
            },
            body: ModelBody::OneVsAll(OneVsAllModel {
                heads: vec![head(2, (1, 0)), head(3, (0, 1)), head(4, (0, 1))],
            }),
        };
        let bytes = encode_model(&ova).unwrap();
        assert_eq!(decode_model(&bytes).unwrap(), ova);
    }

    #[test]
    fn truncation_is_malformed() {
        let bytes = encode_model(&binary_file()).unwrap();
        for cut in [0, 5, 12, 40, bytes.len() - 1] {
            assert!(
                matches!(decode_model(&bytes[..cut]), Err(Error::MalformedModel(_))),
                "cut at {cut}"
            );
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_model(&extra), Err(Error::MalformedModel(_))));
    }

    #[test]
    fn wrong_version_is_reported() {
        let mut bytes = encode_model(&binary_file()).unwrap();
        bytes[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            decode_model(&bytes),
            Err(Error::ModelVersion { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn shape_inconsistencies_are_reported() {
        let mut file = binary_file();
        file.metadata.test_indices.push(10);
        assert!(matches!(encode_model(&file), Err(Error::ShapeInconsistency(_))));

        // declare 2 heads on a binary model
        let mut bytes = encode_model(&binary_file()).unwrap();
        let heads_at = 8 + 4 + 1 + 8 + 4 + 8 + 8 + 8 + 3 * 8;
        bytes[heads_at..heads_at + 4].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(decode_model(&bytes), Err(Error::ShapeInconsistency(_))));

        // zero hidden width
        let mut bytes = encode_model(&binary_file()).unwrap();
        let h_at = heads_at + 4 + 8;
        bytes[h_at..h_at + 4].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_model(&bytes), Err(Error::ShapeInconsistency(_))));
    }

    #[test]
    fn bad_magic_is_malformed() {
        let mut bytes = encode_model(&binary_file()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(Error::MalformedModel(_))));
    }

    #[test]
    fn save_and_load_via_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let file = binary_file();
        save_model(&p, &file).unwrap();
        assert_eq!(load_model(&p).unwrap(), file);
        assert_eq!(
            std::fs::read_dir(dir.path()).unwrap().count(),
            1,
            "temporary file left behind"
        );
        assert!(matches!(
            load_model(dir.path().join("nope.bin")),
            Err(Error::MissingFile(_))
        ));
    }
}
