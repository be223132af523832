//! Stack persistence.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "GHSTSTK\0"
//! version    u32      1
//! flags      u32      bit 0: counts normalized (f64), bit 1: per-frame mu present
//! width      u32
//! height     u32
//! frames     u64
//! source     u8       0 twin beam, 1 thermal
//! mu         f64
//! modes      u64
//! eta1, eta2 f64, f64
//! cells      u64      resolution cells R
//! pump var   f64
//! seed       u64
//! mask       width*height bytes, 1 = transmitting
//! payload    per frame: object counts then reference counts, row-major,
//!            u32 each (f64 when normalized)
//! frame mu   frames x f64, when flagged
//! ```

use std::io::{BufRead, BufWriter, Read, Write};

use super::{Counts, FrameStack, MaskSpec};
use crate::error::{Error, Result};
use crate::geometry::ExperimentParams;
use crate::moments::SourceKind;

pub const MAGIC: [u8; 8] = *b"GHSTSTK\0";
pub const VERSION: u32 = 1;

const FLAG_NORMALIZED: u32 = 1;
const FLAG_FRAME_MU: u32 = 2;

pub fn write_stack<W: Write>(stack: &FrameStack, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    let p = &stack.params;
    let mut flags = 0;
    if stack.is_normalized() {
        flags |= FLAG_NORMALIZED;
    }
    if stack.frame_mu().is_some() {
        flags |= FLAG_FRAME_MU;
    }
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    w.write_all(&(stack.mask.width() as u32).to_le_bytes())?;
    w.write_all(&(stack.mask.height() as u32).to_le_bytes())?;
    w.write_all(&(stack.frames() as u64).to_le_bytes())?;
    w.write_all(&[match p.source {
        SourceKind::TwinBeam => 0u8,
        SourceKind::Thermal => 1,
    }])?;
    w.write_all(&p.mu.to_le_bytes())?;
    w.write_all(&p.modes_per_pixel.to_le_bytes())?;
    w.write_all(&p.eta1.to_le_bytes())?;
    w.write_all(&p.eta2.to_le_bytes())?;
    w.write_all(&p.resolution_cells.to_le_bytes())?;
    w.write_all(&p.pump_mu_variance.to_le_bytes())?;
    w.write_all(&stack.seed.to_le_bytes())?;
    let mask: Vec<u8> = stack.mask.transmission().iter().map(|&t| t as u8).collect();
    w.write_all(&mask)?;

    let n = stack.cells();
    for arm_pair in 0..stack.frames() {
        for counts in [stack.object_counts(), stack.reference_counts()] {
            let row = arm_pair * n..(arm_pair + 1) * n;
            match counts {
                Counts::Raw(v) => v[row].iter().try_for_each(|c| w.write_all(&c.to_le_bytes()))?,
                Counts::Normalized(v) => v[row].iter().try_for_each(|c| w.write_all(&c.to_le_bytes()))?,
            }
        }
    }
    if let Some(mu) = stack.frame_mu() {
        mu.iter().try_for_each(|m| w.write_all(&m.to_le_bytes()))?;
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Container("truncated file".into()),
            _ => Error::Io(e),
        })?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        self.bytes().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.bytes().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.bytes().map(f64::from_le_bytes)
    }
}

pub fn read_stack<R: BufRead>(input: R) -> Result<FrameStack> {
    let mut r = Reader { inner: input };
    if r.bytes::<8>()? != MAGIC {
        return Err(Error::Container("not a frame stack (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let flags = r.u32()?;
    if flags & !(FLAG_NORMALIZED | FLAG_FRAME_MU) != 0 {
        return Err(Error::Container(format!("unknown flags {flags:#x}")));
    }
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let frames = r.u64()?;
    let source = match r.bytes::<1>()?[0] {
        0 => SourceKind::TwinBeam,
        1 => SourceKind::Thermal,
        other => return Err(Error::Container(format!("unknown source tag {other}"))),
    };
    let params = ExperimentParams {
        source,
        mu: r.f64()?,
        modes_per_pixel: r.u64()?,
        eta1: r.f64()?,
        eta2: r.f64()?,
        resolution_cells: r.u64()?,
        frames,
        pump_mu_variance: r.f64()?,
    };
    params.validate()?;
    let seed = r.u64()?;
    let cells = width
        .checked_mul(height)
        .ok_or_else(|| Error::Container("grid size overflows".into()))?;
    let mut mask = vec![0u8; cells];
    r.inner.read_exact(&mut mask)?;
    let mask = MaskSpec::new(width, height, mask.iter().map(|&b| b != 0).collect())?;

    let total = usize::try_from(frames)
        .ok()
        .and_then(|f| f.checked_mul(cells))
        .ok_or_else(|| Error::Container("frame count overflows".into()))?;
    let (object, reference) = if flags & FLAG_NORMALIZED != 0 {
        let mut obj = Vec::with_capacity(total);
        let mut refr = Vec::with_capacity(total);
        for _ in 0..frames {
            for _ in 0..cells {
                obj.push(r.f64()?);
            }
            for _ in 0..cells {
                refr.push(r.f64()?);
            }
        }
        (Counts::Normalized(obj), Counts::Normalized(refr))
    } else {
        let mut obj = Vec::with_capacity(total);
        let mut refr = Vec::with_capacity(total);
        for _ in 0..frames {
            for _ in 0..cells {
                obj.push(r.u32()?);
            }
            for _ in 0..cells {
                refr.push(r.u32()?);
            }
        }
        (Counts::Raw(obj), Counts::Raw(refr))
    };
    let frame_mu = if flags & FLAG_FRAME_MU != 0 {
        Some((0..frames).map(|_| r.f64()).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest)? != 0 {
        return Err(Error::Container("trailing bytes after payload".into()));
    }
    FrameStack::from_parts(params, mask, seed, object, reference, frame_mu)
}

/// One row per frame and cell: `frame,cell,x,y,transmission,object,reference`
/// plus `mu` when per-frame brightness was recorded.
pub fn write_stack_csv<W: Write>(stack: &FrameStack, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    let p = &stack.params;
    writeln!(w, "# ghostsnr {} frame stack", env!("CARGO_PKG_VERSION"))?;
    writeln!(
        w,
        "# source={} mu={} modes={} eta1={} eta2={} cells={} frames={} pump_mu_variance={} seed={} normalized={}",
        p.source,
        p.mu,
        p.modes_per_pixel,
        p.eta1,
        p.eta2,
        p.resolution_cells,
        stack.frames(),
        p.pump_mu_variance,
        stack.seed,
        stack.is_normalized()
    )?;
    let mu = stack.frame_mu();
    write!(w, "frame,cell,x,y,transmission,object,reference")?;
    writeln!(w, "{}", if mu.is_some() { ",mu" } else { "" })?;
    let width = stack.mask.width();
    for f in 0..stack.frames() {
        for c in 0..stack.cells() {
            write!(
                w,
                "{f},{c},{},{},{},{},{}",
                c % width,
                c / width,
                stack.mask.transmits(c) as u8,
                stack.object(f, c),
                stack.reference(f, c)
            )?;
            match mu {
                Some(mu) => writeln!(w, ",{}", mu[f])?,
                None => writeln!(w)?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{normalize_frames, sample_stack, NormalizationRegion};

    fn small() -> FrameStack {
        let mut params = ExperimentParams::new(SourceKind::TwinBeam, 0.5, 4, 0.7, 2, 20).unwrap();
        params.pump_mu_variance = 0.0025;
        let mask = MaskSpec::from_ascii("#.\n#.").unwrap();
        sample_stack(&params, &mask, 3).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let s = small();
        let mut buf = Vec::new();
        write_stack(&s, &mut buf).unwrap();
        assert_eq!(&buf[..8], &MAGIC);
        assert_eq!(read_stack(&buf[..]).unwrap(), s);

        let n = normalize_frames(&s, &NormalizationRegion::WholeGrid).unwrap();
        let mut buf = Vec::new();
        write_stack(&n, &mut buf).unwrap();
        assert_eq!(read_stack(&buf[..]).unwrap(), n);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let s = small();
        let mut buf = Vec::new();
        write_stack(&s, &mut buf).unwrap();
        assert!(matches!(read_stack(&buf[..buf.len() - 3]), Err(Error::Container(_))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_stack(&extra[..]), Err(Error::Container(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_stack(&bad[..]), Err(Error::Container(_))));
        let mut version = buf;
        version[8] = 9;
        assert!(matches!(read_stack(&version[..]), Err(Error::Container(_))));
    }

    #[test]
    fn csv_rows() {
        let s = small();
        let mut buf = Vec::new();
        write_stack_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "frame,cell,x,y,transmission,object,reference,mu");
        assert_eq!(rows.len(), 1 + 20 * 4);
        let fields: Vec<&str> = rows[3].split(',').collect();
        assert_eq!(&fields[..5], &["0", "2", "0", "1", "1"]);
        assert_eq!(fields[7].parse::<f64>().unwrap(), s.frame_mu().unwrap()[0]);
    }
}
