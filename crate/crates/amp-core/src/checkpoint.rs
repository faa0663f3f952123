//! Model checkpoint serialization.
//!
//! Layout:
//! - 16-byte magic: `AMP-MLP-CKPT` padded with four NUL bytes;
//! - little-endian `u32` metadata length, then that many bytes of UTF-8
//!   `key=value` lines (`version`, `layer_sizes`, `activation`,
//!   `num_classes`, `init_seed`);
//! - for each layer in order: weight entries row-major, then bias entries,
//!   each as a little-endian `f64`.
//!
//! Round-trips are bit-exact: the float payload is the raw IEEE 754 bits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{AmpError, Result};
use crate::nn::mlp::{Activation, MlpModel};
use crate::tensor::Tensor2D;

pub const MAGIC: &[u8; 16] = b"AMP-MLP-CKPT\0\0\0\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn save(model: &MlpModel, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;

    let sizes: Vec<String> = model.layer_sizes().iter().map(|s| s.to_string()).collect();
    let meta = format!(
        "version={}\nlayer_sizes={}\nactivation={}\nnum_classes={}\ninit_seed={}\n",
        FORMAT_VERSION,
        sizes.join(","),
        model.activation().name(),
        model.num_classes(),
        model.init_seed(),
    );
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(meta.as_bytes())?;

    for l in 0..model.num_layers() {
        write_floats(&mut w, model.weight(l).data())?;
        write_floats(&mut w, model.bias(l).data())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<MlpModel> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 16];
    r.read_exact(&mut magic)
        .map_err(|_| AmpError::Checkpoint("file too short for magic header".into()))?;
    if &magic != MAGIC {
        return Err(AmpError::Checkpoint("bad magic header".into()));
    }

    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)
        .map_err(|_| AmpError::Checkpoint("missing metadata length".into()))?;
    let meta_len = u32::from_le_bytes(len_bytes) as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes)
        .map_err(|_| AmpError::Checkpoint("truncated metadata block".into()))?;
    let meta = String::from_utf8(meta_bytes)
        .map_err(|_| AmpError::Checkpoint("metadata is not UTF-8".into()))?;

    let fields: BTreeMap<&str, &str> = meta
        .lines()
        .filter(|l| !l.is_empty())
        .filter_map(|l| l.split_once('='))
        .collect();
    let get = |key: &str| -> Result<&str> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| AmpError::Checkpoint(format!("missing metadata key '{key}'")))
    };

    let version: u32 = parse_field(get("version")?, "version")?;
    if version != FORMAT_VERSION {
        return Err(AmpError::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let layer_sizes: Vec<usize> = get("layer_sizes")?
        .split(',')
        .map(|s| parse_field(s, "layer_sizes"))
        .collect::<Result<_>>()?;
    let activation = Activation::parse(get("activation")?)?;
    let num_classes: usize = parse_field(get("num_classes")?, "num_classes")?;
    let init_seed: u64 = parse_field(get("init_seed")?, "init_seed")?;

    if layer_sizes.last() != Some(&num_classes) {
        return Err(AmpError::Checkpoint(format!(
            "num_classes {num_classes} does not match last layer of {layer_sizes:?}"
        )));
    }

    let mut model = MlpModel::zeros(&layer_sizes, activation)?;
    let mut weights = Vec::with_capacity(model.num_layers());
    let mut biases = Vec::with_capacity(model.num_layers());
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        weights.push(Tensor2D::new(
            fan_in,
            fan_out,
            read_floats(&mut r, fan_in * fan_out)?,
        )?);
        biases.push(Tensor2D::new(1, fan_out, read_floats(&mut r, fan_out)?)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(AmpError::Checkpoint("trailing bytes after parameters".into()));
    }
    model.set_params(weights, biases);
    model.set_init_seed(init_seed);
    Ok(model)
}

fn write_floats(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for &v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_floats(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)
        .map_err(|_| AmpError::Checkpoint("truncated parameter payload".into()))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn parse_field<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
    s.parse()
        .map_err(|_| AmpError::Checkpoint(format!("cannot parse '{s}' for key '{key}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let model = MlpModel::new(&[4, 16, 3], Activation::Relu, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&model, &path).unwrap();
        let restored = load(&path).unwrap();
        assert_eq!(model, restored);
        for l in 0..model.num_layers() {
            for (a, b) in model.weight(l).data().iter().zip(restored.weight(l).data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn save_is_byte_deterministic() {
        let model = MlpModel::new(&[2, 8, 2], Activation::Relu, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
        save(&model, &p1).unwrap();
        save(&model, &p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn rejects_corrupted_files() {
        let model = MlpModel::new(&[2, 4, 2], Activation::Relu, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&model, &path).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xff;
        let bad_magic = dir.path().join("bad_magic.ckpt");
        std::fs::write(&bad_magic, &bytes).unwrap();
        assert!(matches!(load(&bad_magic), Err(AmpError::Checkpoint(_))));

        let mut truncated = std::fs::read(&path).unwrap();
        truncated.truncate(truncated.len() - 5);
        let short = dir.path().join("short.ckpt");
        std::fs::write(&short, &truncated).unwrap();
        assert!(matches!(load(&short), Err(AmpError::Checkpoint(_))));
    }
}
