//! Field snapshots on disk. The container is CHSF: magic "CHSF",
//! u16 version, u8 dims, then per axis a u32 sample count and f64 edge
//! length, an f64 time stamp, and the row-major f64 samples. Everything
//! is little-endian.

use crate::error::SimError;
use crate::field::Field;
use crate::grid::Grid;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: [u8; 4] = *b"CHSF";
const VERSION: u16 = 1;

pub fn write_chsf(w: &mut impl Write, field: &Field, time: f64) -> io::Result<()> {
    let grid = field.grid();
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[grid.dims() as u8])?;
    for axis in 0..grid.dims() {
        w.write_all(&(grid.shape()[axis] as u32).to_le_bytes())?;
        w.write_all(&grid.lengths()[axis].to_le_bytes())?;
    }
    w.write_all(&time.to_le_bytes())?;
    for &v in field.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_chsf(path: &Path, field: &Field, time: f64) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_chsf(&mut w, field, time)?;
    w.flush()
}

fn bad(msg: String) -> SimError {
    SimError::Io(io::Error::new(io::ErrorKind::InvalidData, msg))
}

fn read_array<const N: usize>(r: &mut impl Read) -> io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_chsf(r: &mut impl Read) -> Result<(Field, f64), SimError> {
    let magic: [u8; 4] = read_array(r)?;
    if magic != MAGIC {
        return Err(bad(format!("bad magic {magic:?}, want {MAGIC:?}")));
    }
    let version = u16::from_le_bytes(read_array(r)?);
    if version != VERSION {
        return Err(bad(format!(
            "unsupported version {version}, want {VERSION}"
        )));
    }
    let dims = read_array::<1>(r)?[0] as usize;
    if !(1..=2).contains(&dims) {
        return Err(bad(format!("unsupported dims {dims}")));
    }
    let mut shape = Vec::with_capacity(dims);
    let mut lengths = Vec::with_capacity(dims);
    for _ in 0..dims {
        let n = u32::from_le_bytes(read_array(r)?) as usize;
        let l = f64::from_le_bytes(read_array(r)?);
        if n < 4 || !l.is_finite() || l <= 0.0 {
            return Err(bad(format!("bad axis: n={n}, length={l}")));
        }
        shape.push(n);
        lengths.push(l);
    }
    let time = f64::from_le_bytes(read_array(r)?);
    let total: usize = shape.iter().product();
    let mut data = Vec::with_capacity(total);
    for _ in 0..total {
        data.push(f64::from_le_bytes(read_array(r)?));
    }
    let grid = Grid::new(&shape, &lengths);
    Ok((Field::from_samples(&grid, data), time))
}

pub fn load_chsf(path: &Path) -> Result<(Field, f64), SimError> {
    let mut r = BufReader::new(File::open(path)?);
    read_chsf(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn round_trip_is_exact_1d() {
        let grid = Grid::new_1d(37, 2.5);
        let f = Field::from_fn(&grid, |x| 0.3 + (PI * x[0] / 2.5).cos() * 1e-7);
        let mut buf = Vec::new();
        write_chsf(&mut buf, &f, 0.125).unwrap();
        let (g, t) = read_chsf(&mut buf.as_slice()).unwrap();
        assert_eq!(t, 0.125);
        assert_eq!(g.grid(), f.grid());
        assert_eq!(g.data(), f.data());
    }

    #[test]
    fn round_trip_is_exact_2d() {
        let grid = Grid::new_2d(8, 5, 1.0, 3.0);
        let f = Field::from_fn(&grid, |x| x[0] * 7.0 - x[1] * x[1]);
        let mut buf = Vec::new();
        write_chsf(&mut buf, &f, -4.0).unwrap();
        let (g, t) = read_chsf(&mut buf.as_slice()).unwrap();
        assert_eq!(t, -4.0);
        assert_eq!(g.grid(), f.grid());
        assert_eq!(g.data(), f.data());
    }

    #[test]
    fn header_is_as_documented() {
        let grid = Grid::new_1d(4, 1.0);
        let f = Field::zeros(&grid);
        let mut buf = Vec::new();
        write_chsf(&mut buf, &f, 0.0).unwrap();
        assert_eq!(&buf[0..4], b"CHSF");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), 1);
        assert_eq!(buf[6], 1);
        assert_eq!(u32::from_le_bytes([buf[7], buf[8], buf[9], buf[10]]), 4);
        // 4 magic + 2 version + 1 dims + (4 + 8) axis + 8 time + 4 * 8 data
        assert_eq!(buf.len(), 4 + 2 + 1 + 12 + 8 + 32);
    }

    #[test]
    fn rejects_malformed_input() {
        let grid = Grid::new_1d(8, 1.0);
        let f = Field::zeros(&grid);
        let mut buf = Vec::new();
        write_chsf(&mut buf, &f, 0.0).unwrap();

        let mut wrong_magic = buf.clone();
        wrong_magic[0] = b'X';
        assert!(read_chsf(&mut wrong_magic.as_slice()).is_err());

        let mut wrong_version = buf.clone();
        wrong_version[4] = 9;
        assert!(read_chsf(&mut wrong_version.as_slice()).is_err());

        let truncated = &buf[..buf.len() - 5];
        assert!(read_chsf(&mut &truncated[..]).is_err());
    }

    #[test]
    fn save_and_load_via_files() {
        let dir = std::env::temp_dir().join(format!("chsf_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("snap.chsf");
        let grid = Grid::new_2d(6, 4, 2.0, 1.0);
        let f = Field::from_fn(&grid, |x| x[0] + 10.0 * x[1]);
        save_chsf(&path, &f, 3.5).unwrap();
        let (g, t) = load_chsf(&path).unwrap();
        assert_eq!(t, 3.5);
        assert_eq!(g.data(), f.data());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
