//! Checkpoint container: a flat list of named f64 arrays.
//!
//! Byte layout (all integers little-endian):
//! - magic `b"MCLG"`, format version `u32` (currently 1)
//! - array count `u32`
//! - per array: name length `u32`, UTF-8 name bytes, ndim `u32`,
//!   each dim as `u64`, then the row-major values as `f64` LE.
//!
//! Network parameters are stored under stable names
//! (`gen.layer<i>.w` / `.b`, `disc.trunk.layer<i>.w` / `.b`,
//! `disc.head.w` / `.b`) so a checkpoint can be loaded back into freshly
//! constructed networks of the same architecture.

use crate::error::{Error, Result};
use crate::nets::{GeneratorNet, MultiDiscriminator};
use crate::tensor::Tensor;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MCLG";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub dims: Vec<u64>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn push(&mut self, name: impl Into<String>, dims: Vec<u64>, data: Vec<f64>) -> Result<()> {
        let name = name.into();
        let expected: u64 = dims.iter().product();
        if expected != data.len() as u64 {
            return Err(Error::Checkpoint(format!(
                "array '{name}': dims {dims:?} expect {expected} values, got {}",
                data.len()
            )));
        }
        if self.arrays.iter().any(|a| a.name == name) {
            return Err(Error::Checkpoint(format!("duplicate array name '{name}'")));
        }
        self.arrays.push(NamedArray { name, dims, data });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array '{name}'")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&VERSION.to_le_bytes())?;
        f.write_all(&(self.arrays.len() as u32).to_le_bytes())?;
        for a in &self.arrays {
            f.write_all(&(a.name.len() as u32).to_le_bytes())?;
            f.write_all(a.name.as_bytes())?;
            f.write_all(&(a.dims.len() as u32).to_le_bytes())?;
            for &d in &a.dims {
                f.write_all(&d.to_le_bytes())?;
            }
            for &v in &a.data {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        f.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
        }
        let version = read_u32(&mut f)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let count = read_u32(&mut f)? as usize;
        let mut arrays = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(&mut f)? as usize;
            let mut name = vec![0u8; name_len];
            f.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?;
            let ndim = read_u32(&mut f)? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(read_u64(&mut f)?);
            }
            let n: u64 = dims.iter().product();
            let mut data = Vec::with_capacity(n as usize);
            let mut buf = [0u8; 8];
            for _ in 0..n {
                f.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            arrays.push(NamedArray { name, dims, data });
        }
        Ok(Checkpoint { arrays })
    }
}

fn read_u32(f: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    f.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(f: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    f.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn push_tensor(ckpt: &mut Checkpoint, name: String, t: &Tensor<f64>) -> Result<()> {
    ckpt.push(name, vec![t.rows() as u64, t.cols() as u64], t.data().to_vec())
}

fn load_tensor(ckpt: &Checkpoint, name: &str, t: &mut Tensor<f64>) -> Result<()> {
    let a = ckpt.get(name)?;
    if a.dims != [t.rows() as u64, t.cols() as u64] {
        return Err(Error::Checkpoint(format!(
            "array '{name}': shape {:?} does not match expected {}x{}",
            a.dims,
            t.rows(),
            t.cols()
        )));
    }
    t.data_mut().copy_from_slice(&a.data);
    Ok(())
}

/// Snapshot both networks into one checkpoint.
pub fn from_nets(gen: &GeneratorNet<f64>, disc: &MultiDiscriminator<f64>) -> Result<Checkpoint> {
    let mut ckpt = Checkpoint::default();
    for (i, layer) in gen.mlp.layers.iter().enumerate() {
        push_tensor(&mut ckpt, format!("gen.layer{i}.w"), &layer.w)?;
        push_tensor(&mut ckpt, format!("gen.layer{i}.b"), &layer.b)?;
    }
    for (i, layer) in disc.trunk.layers.iter().enumerate() {
        push_tensor(&mut ckpt, format!("disc.trunk.layer{i}.w"), &layer.w)?;
        push_tensor(&mut ckpt, format!("disc.trunk.layer{i}.b"), &layer.b)?;
    }
    push_tensor(&mut ckpt, "disc.head.w".into(), &disc.head_w)?;
    push_tensor(&mut ckpt, "disc.head.b".into(), &disc.head_b)?;
    Ok(ckpt)
}

/// Load a checkpoint's arrays into already-constructed networks; shapes must
/// match the architecture exactly.
pub fn into_nets(
    ckpt: &Checkpoint,
    gen: &mut GeneratorNet<f64>,
    disc: &mut MultiDiscriminator<f64>,
) -> Result<()> {
    for (i, layer) in gen.mlp.layers.iter_mut().enumerate() {
        load_tensor(ckpt, &format!("gen.layer{i}.w"), &mut layer.w)?;
        load_tensor(ckpt, &format!("gen.layer{i}.b"), &mut layer.b)?;
    }
    for (i, layer) in disc.trunk.layers.iter_mut().enumerate() {
        load_tensor(ckpt, &format!("disc.trunk.layer{i}.w"), &mut layer.w)?;
        load_tensor(ckpt, &format!("disc.trunk.layer{i}.b"), &mut layer.b)?;
    }
    load_tensor(ckpt, "disc.head.w", &mut disc.head_w)?;
    load_tensor(ckpt, "disc.head.b", &mut disc.head_b)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn roundtrip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let mut ckpt = Checkpoint::default();
        ckpt.push("x", vec![2, 3], vec![1.0, -2.5, f64::MIN_POSITIVE, 0.0, 1e300, -0.0])
            .unwrap();
        ckpt.push("y", vec![1], vec![42.0]).unwrap();
        ckpt.write(&path).unwrap();
        let back = Checkpoint::read(&path).unwrap();
        assert_eq!(back.arrays.len(), 2);
        for (a, b) in ckpt.arrays.iter().zip(&back.arrays) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.dims, b.dims);
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn push_validates_dims_and_duplicates() {
        let mut ckpt = Checkpoint::default();
        assert!(ckpt.push("x", vec![2, 2], vec![0.0; 3]).is_err());
        ckpt.push("x", vec![2], vec![0.0; 2]).unwrap();
        assert!(ckpt.push("x", vec![2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn nets_roundtrip_restores_outputs() {
        let mut rng = SeededRng::new(31);
        let gen = GeneratorNet::<f64>::new(2, &[8, 8], 2, &mut rng).unwrap();
        let disc = MultiDiscriminator::<f64>::new(2, &[8], 4, 0.2, &mut rng).unwrap();
        let ckpt = from_nets(&gen, &disc).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nets.ckpt");
        ckpt.write(&path).unwrap();
        let back = Checkpoint::read(&path).unwrap();

        let mut rng2 = SeededRng::new(99);
        let mut gen2 = GeneratorNet::<f64>::new(2, &[8, 8], 2, &mut rng2).unwrap();
        let mut disc2 = MultiDiscriminator::<f64>::new(2, &[8], 4, 0.2, &mut rng2).unwrap();
        into_nets(&back, &mut gen2, &mut disc2).unwrap();

        let z = Tensor::from_vec(5, 2, (0..10).map(|i| i as f64 * 0.3 - 1.0).collect()).unwrap();
        assert_eq!(gen.eval(&z).unwrap(), gen2.eval(&z).unwrap());
        let x = gen.eval(&z).unwrap();
        assert_eq!(disc.eval_logits(&x).unwrap(), disc2.eval_logits(&x).unwrap());
    }

    #[test]
    fn into_nets_rejects_architecture_mismatch() {
        let mut rng = SeededRng::new(7);
        let gen = GeneratorNet::<f64>::new(2, &[8], 2, &mut rng).unwrap();
        let disc = MultiDiscriminator::<f64>::new(2, &[8], 4, 0.2, &mut rng).unwrap();
        let ckpt = from_nets(&gen, &disc).unwrap();
        let mut gen2 = GeneratorNet::<f64>::new(2, &[16], 2, &mut rng).unwrap();
        let mut disc2 = MultiDiscriminator::<f64>::new(2, &[8], 4, 0.2, &mut rng).unwrap();
        assert!(into_nets(&ckpt, &mut gen2, &mut disc2).is_err());
    }
}
