//! Binary serialization of TT cores for experiment checkpointing.
//!
//! Layout: the 4-byte magic `TTC1`, a u64 core count, one `(r_left, n,
//! r_right)` u64 triple per core, then each core's values as contiguous
//! little-endian f64 in `(r_left, n, r_right)` row-major order.

use super::{TTTensor, TtError};
use ndarray::Array3;
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"TTC1";

fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

impl TTTensor {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), TtError> {
        w.write_all(MAGIC)?;
        write_u64(w, self.cores().len() as u64)?;
        for core in self.cores() {
            let (rl, n, rr) = core.dim();
            write_u64(w, rl as u64)?;
            write_u64(w, n as u64)?;
            write_u64(w, rr as u64)?;
        }
        for core in self.cores() {
            for v in core.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, TtError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TtError::BadFile("bad magic".into()));
        }
        let d = read_u64(r)? as usize;
        if d == 0 || d > 64 {
            return Err(TtError::BadFile(format!("implausible core count {d}")));
        }
        let mut dims = Vec::with_capacity(d);
        for _ in 0..d {
            let rl = read_u64(r)? as usize;
            let n = read_u64(r)? as usize;
            let rr = read_u64(r)? as usize;
            if rl == 0 || n == 0 || rr == 0 || rl.saturating_mul(n).saturating_mul(rr) > (1 << 32)
            {
                return Err(TtError::BadFile(format!(
                    "implausible core shape ({rl}, {n}, {rr})"
                )));
            }
            dims.push((rl, n, rr));
        }
        let mut cores = Vec::with_capacity(d);
        for (rl, n, rr) in dims {
            let mut values = vec![0.0_f64; rl * n * rr];
            let mut buf = [0u8; 8];
            for v in &mut values {
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
            cores.push(
                Array3::from_shape_vec((rl, n, rr), values)
                    .map_err(|e| TtError::BadFile(e.to_string()))?,
            );
        }
        Self::from_cores(cores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_tensor() {
        let x = TTTensor::random_uniform(90, &[4, 5, 3, 4], &[2, 4, 3]).unwrap();
        let mut buf = Vec::new();
        x.write_to(&mut buf).unwrap();
        let y = TTTensor::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(x.mode_sizes(), y.mode_sizes());
        assert_eq!(x.ranks(), y.ranks());
        // bit-exact core roundtrip
        for (a, b) in x.cores().iter().zip(y.cores()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_garbage() {
        let mut buf = b"NOPE".to_vec();
        buf.extend_from_slice(&[0u8; 64]);
        assert!(TTTensor::read_from(&mut buf.as_slice()).is_err());
        // truncated payload
        let x = TTTensor::random_uniform(91, &[3, 3, 3, 3], &[2, 2, 2]).unwrap();
        let mut full = Vec::new();
        x.write_to(&mut full).unwrap();
        full.truncate(full.len() - 9);
        assert!(TTTensor::read_from(&mut full.as_slice()).is_err());
    }
}
