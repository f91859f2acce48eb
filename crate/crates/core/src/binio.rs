//! Little-endian primitives shared by the snapshot formats.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

pub(crate) fn write_u32<W: Write + ?Sized>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn write_u64<W: Write + ?Sized>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn write_f64<W: Write + ?Sized>(w: &mut W, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn write_f64s<W: Write + ?Sized>(w: &mut W, vs: &[f64]) -> io::Result<()> {
    for &v in vs {
        write_f64(w, v)?;
    }
    Ok(())
}

pub(crate) fn read_array<R: Read + ?Sized, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Snapshot("truncated".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub(crate) fn read_u32<R: Read + ?Sized>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_u64<R: Read + ?Sized>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_f64<R: Read + ?Sized>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_f64s<R: Read + ?Sized>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

pub(crate) fn expect_magic<R: Read + ?Sized>(r: &mut R, magic: &[u8; 8]) -> Result<()> {
    let got: [u8; 8] = read_array(r)?;
    if &got != magic {
        return Err(Error::Snapshot(format!("bad magic {got:?}")));
    }
    Ok(())
}
