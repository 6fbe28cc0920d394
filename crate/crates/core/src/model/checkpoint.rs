//! Model checkpoint serialization: a small binary container holding the
//! configuration as TOML plus every tensor (learnables and running
//! normalization statistics) as named f64 blocks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

use super::{ModelConfig, ModelParams};

/// File identifier; literal bytes `UERCM` followed by NUL.
pub const CHECKPOINT_MAGIC: &[u8; 6] = b"UERCM\0";
const CHECKPOINT_VERSION: u16 = 1;

fn io_err(path: &Path, action: &str, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::other(format!("{action} {}: {e}", path.display())))
}

struct TensorRef<'a> {
    name: String,
    dims: Vec<u32>,
    data: &'a [f64],
}

fn tensor_list(params: &ModelParams) -> Vec<TensorRef<'_>> {
    fn t2<'a>(name: &str, a: &'a Array2<f64>) -> TensorRef<'a> {
        TensorRef {
            name: name.to_string(),
            dims: vec![a.nrows() as u32, a.ncols() as u32],
            data: a.as_slice().expect("standard layout"),
        }
    }
    fn t1<'a>(name: &str, a: &'a Array1<f64>) -> TensorRef<'a> {
        TensorRef {
            name: name.to_string(),
            dims: vec![a.len() as u32],
            data: a.as_slice().expect("standard layout"),
        }
    }
    let mut out = vec![t2("w_h", &params.w_h), t1("b_h", &params.b_h), t2("p", &params.p)];
    for (i, w) in params.w_q.iter().enumerate() {
        out.push(t2(&format!("w_q.{i}"), w));
    }
    for (i, w) in params.w_k.iter().enumerate() {
        out.push(t2(&format!("w_k.{i}"), w));
    }
    for (i, w) in params.w_v.iter().enumerate() {
        out.push(t2(&format!("w_v.{i}"), w));
    }
    for (i, w) in params.w_m.iter().enumerate() {
        out.push(t2(&format!("w_m.{i}"), w));
    }
    out.push(t1("gamma", &params.gamma));
    out.push(t1("beta", &params.beta));
    out.push(t1("running_mean", &params.running_mean));
    out.push(t1("running_var", &params.running_var));
    out.push(t2("w_s", &params.w_s));
    out.push(t1("b_s", &params.b_s));
    out.push(t2("w_o", &params.w_o));
    out.push(t1("b_o", &params.b_o));
    out
}

/// Write config and parameters to `path`, overwriting any existing file.
pub fn save_checkpoint(path: &Path, config: &ModelConfig, params: &ModelParams) -> Result<()> {
    config.validate()?;
    let config_toml = toml::to_string(config)
        .map_err(|e| Error::Parse(format!("cannot encode checkpoint config: {e}")))?;
    let tensors = tensor_list(params);
    let file = File::create(path).map_err(|e| io_err(path, "cannot create", e))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| io_err(path, "cannot write", e);
    w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(config_toml.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(config_toml.as_bytes()).map_err(io)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes()).map_err(io)?;
    for t in &tensors {
        w.write_all(&(t.name.len() as u16).to_le_bytes()).map_err(io)?;
        w.write_all(t.name.as_bytes()).map_err(io)?;
        w.write_all(&[t.dims.len() as u8]).map_err(io)?;
        for d in &t.dims {
            w.write_all(&d.to_le_bytes()).map_err(io)?;
        }
        for v in t.data {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    Ok(())
}

struct CheckpointReader<R> {
    inner: R,
    path: String,
}

impl<R: Read> CheckpointReader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Parse(format!("{}: truncated checkpoint ({e})", self.path)))?;
        Ok(buf)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.bytes(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.bytes(n * 8)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

/// Read a checkpoint, validating the header and every tensor shape
/// against the embedded configuration.
pub fn load_checkpoint(path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let file = File::open(path).map_err(|e| io_err(path, "cannot open", e))?;
    let mut r = CheckpointReader { inner: BufReader::new(file), path: path.display().to_string() };

    let magic = r.bytes(CHECKPOINT_MAGIC.len())?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Parse(format!(
            "{}: not a model checkpoint (bad magic {:02x?})",
            path.display(),
            &magic
        )));
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Parse(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    let config_len = r.u32()? as usize;
    let config_bytes = r.bytes(config_len)?;
    let config_str = String::from_utf8(config_bytes)
        .map_err(|e| Error::Parse(format!("{}: config is not UTF-8: {e}", path.display())))?;
    let config: ModelConfig = toml::from_str(&config_str)
        .map_err(|e| Error::Parse(format!("{}: invalid checkpoint config: {e}", path.display())))?;
    config.validate()?;

    let mut params = ModelParams::zeros(&config);
    let expected = {
        let mut names = vec!["w_h".to_string(), "b_h".to_string(), "p".to_string()];
        for prefix in ["w_q", "w_k", "w_v", "w_m"] {
            for i in 0..config.heads {
                names.push(format!("{prefix}.{i}"));
            }
        }
        for n in ["gamma", "beta", "running_mean", "running_var", "w_s", "b_s", "w_o", "b_o"] {
            names.push(n.to_string());
        }
        names
    };
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Data(format!(
            "{}: checkpoint holds {count} tensors, expected {}",
            path.display(),
            expected.len()
        )));
    }
    for expect_name in &expected {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.bytes(name_len)?)
            .map_err(|e| Error::Parse(format!("{}: tensor name is not UTF-8: {e}", path.display())))?;
        if &name != expect_name {
            return Err(Error::Data(format!(
                "{}: tensor order mismatch, found {name:?} where {expect_name:?} belongs",
                path.display()
            )));
        }
        let ndim = r.bytes(1)?[0] as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32()? as usize);
        }
        let n: usize = dims.iter().product();
        let data = r.f64_vec(n)?;
        write_tensor(&mut params, &name, &dims, data, &r.path)?;
    }
    let mut trailer = [0u8; 1];
    match r.inner.read(&mut trailer) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::Parse(format!(
                "{}: trailing bytes after final tensor",
                path.display()
            )))
        }
        Err(e) => return Err(Error::Io(e)),
    }
    Ok((config, params))
}

fn write_tensor(
    params: &mut ModelParams,
    name: &str,
    dims: &[usize],
    data: Vec<f64>,
    path: &str,
) -> Result<()> {
    fn fill2(
        target: &mut Array2<f64>,
        name: &str,
        dims: &[usize],
        data: Vec<f64>,
        path: &str,
    ) -> Result<()> {
        if dims != [target.nrows(), target.ncols()] {
            return Err(Error::Data(format!(
                "{path}: tensor {name} has shape {dims:?}, expected [{}, {}]",
                target.nrows(),
                target.ncols()
            )));
        }
        *target = Array2::from_shape_vec((dims[0], dims[1]), data).expect("checked shape");
        Ok(())
    }
    fn fill1(
        target: &mut Array1<f64>,
        name: &str,
        dims: &[usize],
        data: Vec<f64>,
        path: &str,
    ) -> Result<()> {
        if dims != [target.len()] {
            return Err(Error::Data(format!(
                "{path}: tensor {name} has shape {dims:?}, expected [{}]",
                target.len()
            )));
        }
        *target = Array1::from_vec(data);
        Ok(())
    }

    if let Some((prefix, idx)) = name.split_once('.') {
        let i: usize = idx
            .parse()
            .map_err(|_| Error::Data(format!("{path}: bad tensor name {name:?}")))?;
        let slot = match prefix {
            "w_q" => &mut params.w_q,
            "w_k" => &mut params.w_k,
            "w_v" => &mut params.w_v,
            "w_m" => &mut params.w_m,
            _ => return Err(Error::Data(format!("{path}: unknown tensor {name:?}"))),
        };
        let t = slot
            .get_mut(i)
            .ok_or_else(|| Error::Data(format!("{path}: head index out of range in {name:?}")))?;
        return fill2(t, name, dims, data, path);
    }
    match name {
        "w_h" => fill2(&mut params.w_h, name, dims, data, path),
        "b_h" => fill1(&mut params.b_h, name, dims, data, path),
        "p" => fill2(&mut params.p, name, dims, data, path),
        "gamma" => fill1(&mut params.gamma, name, dims, data, path),
        "beta" => fill1(&mut params.beta, name, dims, data, path),
        "running_mean" => fill1(&mut params.running_mean, name, dims, data, path),
        "running_var" => fill1(&mut params.running_var, name, dims, data, path),
        "w_s" => fill2(&mut params.w_s, name, dims, data, path),
        "b_s" => fill1(&mut params.b_s, name, dims, data, path),
        "w_o" => fill2(&mut params.w_o, name, dims, data, path),
        "b_o" => fill1(&mut params.b_o, name, dims, data, path),
        _ => Err(Error::Data(format!("{path}: unknown tensor {name:?}"))),
    }
}
