//! PCAMOD model container.
//!
//! Header (40 bytes, little-endian) mirrors SIGMAT: magic `PCAMOD`, version,
//! flags, L as u64, T as u64, sample rate as binary64, samples per cycle as
//! u64. Six tagged sections follow, each a 4-byte ASCII tag, a u64 element
//! count and that many binary64 values:
//!
//! `MEAN` (T), `WREC` (L·T, row-major), `SIGR` (L), `ZMIN` (L), `ZMAX` (L),
//! `EVRT` (L).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::ReconstructionModel;
use crate::error::{Error, Result};

pub const PCAMOD_MAGIC: &[u8; 6] = b"PCAMOD";
const VERSION: u8 = 1;
const HEADER_LEN: usize = 40;
const TAGS: [&[u8; 4]; 6] = [b"MEAN", b"WREC", b"SIGR", b"ZMIN", b"ZMAX", b"EVRT"];

pub fn write_model(model: &ReconstructionModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(PCAMOD_MAGIC)?;
    w.write_all(&[VERSION, 0])?;
    w.write_all(&(model.components() as u64).to_le_bytes())?;
    w.write_all(&(model.signature_len() as u64).to_le_bytes())?;
    w.write_all(&model.sample_rate_hz.to_le_bytes())?;
    w.write_all(&(model.samples_per_cycle as u64).to_le_bytes())?;
    let sections: [(&[u8; 4], Vec<f64>); 6] = [
        (TAGS[0], model.mean_row.to_vec()),
        (TAGS[1], model.w_r.iter().copied().collect()),
        (TAGS[2], model.sigma_r.to_vec()),
        (TAGS[3], model.z_min.to_vec()),
        (TAGS[4], model.z_max.to_vec()),
        (TAGS[5], model.explained_variance_ratio.to_vec()),
    ];
    for (tag, values) in sections {
        w.write_all(tag)?;
        w.write_all(&(values.len() as u64).to_le_bytes())?;
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ReconstructionModel> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_model(&bytes)
}

fn read_u64(bytes: &[u8], at: usize) -> Result<u64> {
    bytes
        .get(at..at + 8)
        .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
        .ok_or_else(|| Error::format(bytes.len() as u64, "unexpected end of file"))
}

pub(crate) fn parse_model(bytes: &[u8]) -> Result<ReconstructionModel> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    if &bytes[0..6] != PCAMOD_MAGIC {
        return Err(Error::format(0, "bad magic, expected `PCAMOD`"));
    }
    if bytes[6] != VERSION {
        return Err(Error::format(6, format!("unsupported version {}", bytes[6])));
    }
    if bytes[7] != 0 {
        return Err(Error::format(7, format!("unsupported flags {:#04x}", bytes[7])));
    }
    let l = read_u64(bytes, 8)? as usize;
    let t = read_u64(bytes, 16)? as usize;
    let sample_rate = f64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes"));
    let spc = read_u64(bytes, 32)? as usize;
    if l == 0 || t == 0 || l > t {
        return Err(Error::format(8, format!("invalid dimensions L={l}, T={t}")));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::format(24, format!("invalid sample rate {sample_rate}")));
    }
    if spc == 0 || t % spc != 0 {
        return Err(Error::format(32, format!("samples_per_cycle {spc} does not divide T={t}")));
    }
    let lt = l
        .checked_mul(t)
        .ok_or_else(|| Error::format(8, "dimension overflow"))?;
    let expected_len = [t, lt, l, l, l, l];

    let mut sections: [Option<Vec<f64>>; 6] = Default::default();
    let mut at = HEADER_LEN;
    while at < bytes.len() {
        let tag = bytes
            .get(at..at + 4)
            .ok_or_else(|| Error::format(at as u64, "truncated section tag"))?;
        let idx = TAGS
            .iter()
            .position(|t| &t[..] == tag)
            .ok_or_else(|| Error::format(at as u64, format!("unknown section tag {tag:?}")))?;
        if sections[idx].is_some() {
            return Err(Error::format(at as u64, "duplicate section"));
        }
        let count = read_u64(bytes, at + 4)? as usize;
        if count != expected_len[idx] {
            return Err(Error::format(
                (at + 4) as u64,
                format!("section has {count} values, expected {}", expected_len[idx]),
            ));
        }
        let start = at + 12;
        let end = count
            .checked_mul(8)
            .and_then(|n| n.checked_add(start))
            .filter(|e| *e <= bytes.len())
            .ok_or_else(|| Error::format(bytes.len() as u64, "truncated section payload"))?;
        let values: Vec<f64> = bytes[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::format((start + 8 * i) as u64, "non-finite value"));
        }
        sections[idx] = Some(values);
        at = end;
    }
    let mut take = |i: usize| {
        sections[i]
            .take()
            .ok_or_else(|| Error::format(bytes.len() as u64, format!("missing section {:?}", TAGS[i])))
    };
    let mean_row = Array1::from(take(0)?);
    let w_r = Array2::from_shape_vec((l, t), take(1)?).expect("length checked");
    Ok(ReconstructionModel {
        mean_row,
        w_r,
        sigma_r: Array1::from(take(2)?),
        z_min: Array1::from(take(3)?),
        z_max: Array1::from(take(4)?),
        explained_variance_ratio: Array1::from(take(5)?),
        sample_rate_hz: sample_rate,
        samples_per_cycle: spc,
    })
}
