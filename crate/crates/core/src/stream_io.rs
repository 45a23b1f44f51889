//! Binary serialization of sample streams. The byte layout is described in
//! `docs/formats.md`.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::frontend::{ComplexSampleStream, QuantKind, Quantizer, QuantizerSpec, SampleStream, Zone};
use crate::rational::{Rational, RationalError, RationalFreq};

pub const MAGIC: &[u8; 4] = b"SCFS";
pub const VERSION: u16 = 1;

const FLAG_COMPLEX: u8 = 1;

#[derive(Debug, Error)]
pub enum StreamIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("corrupt header: {0}")]
    Corrupt(&'static str),
    #[error("expected a {expected} stream")]
    WrongKind { expected: &'static str },
    #[error("sample {index} is not a level of the declared quantizer")]
    NotOnGrid { index: usize },
    #[error(transparent)]
    Rational(#[from] RationalError),
}

struct Header {
    rate: RationalFreq,
    epoch: Rational,
    quant: QuantizerSpec,
    zone: Zone,
    complex: bool,
    count: u64,
    valid: (u64, u64),
}

fn write_header<W: Write>(w: &mut W, h: &Header) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [h.rate.as_rational().numer(), h.rate.as_rational().denom(), h.epoch.numer(), h.epoch.denom()] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&[h.quant.kind.code(), h.zone.number(), if h.complex { FLAG_COMPLEX } else { 0 }, 0])?;
    w.write_all(&h.quant.loading.to_le_bytes())?;
    for v in [h.count, h.valid.0, h.valid.1] {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_header<R: Read>(r: &mut R) -> Result<Header, StreamIoError> {
    if &read_array::<4, _>(r)? != MAGIC {
        return Err(StreamIoError::BadMagic);
    }
    let version = u16::from_le_bytes(read_array(r)?);
    if version != VERSION {
        return Err(StreamIoError::Version(version));
    }
    let mut ints = [0i128; 4];
    for v in &mut ints {
        *v = i128::from_le_bytes(read_array(r)?);
    }
    let rate = RationalFreq::new(ints[0], ints[1])?;
    let epoch = Rational::new(ints[2], ints[3])?;
    let [qk, zn, flags, _] = read_array::<4, _>(r)?;
    let kind = QuantKind::from_code(qk).ok_or(StreamIoError::Corrupt("quantizer code"))?;
    let zone = Zone::from_number(zn).ok_or(StreamIoError::Corrupt("zone"))?;
    let loading = f64::from_le_bytes(read_array(r)?);
    let count = u64::from_le_bytes(read_array(r)?);
    let valid = (u64::from_le_bytes(read_array(r)?), u64::from_le_bytes(read_array(r)?));
    if valid.0 > valid.1 || valid.1 > count {
        return Err(StreamIoError::Corrupt("valid range"));
    }
    Ok(Header {
        rate,
        epoch,
        quant: QuantizerSpec { kind, loading },
        zone,
        complex: flags & FLAG_COMPLEX != 0,
        count,
        valid,
    })
}

fn write_values<W: Write>(w: &mut W, quant: QuantizerSpec, values: impl Iterator<Item = f64>) -> Result<(), StreamIoError> {
    if quant.is_float() {
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        return Ok(());
    }
    let q = Quantizer::new(quant).map_err(|_| StreamIoError::Corrupt("quantizer loading"))?;
    let mut buf = Vec::new();
    for (index, v) in values.enumerate() {
        let c = q.code(v);
        if q.level(c) != v {
            return Err(StreamIoError::NotOnGrid { index });
        }
        buf.push(c as u8);
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_values<R: Read>(r: &mut R, quant: QuantizerSpec, n: usize) -> Result<Vec<f64>, StreamIoError> {
    if quant.is_float() {
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)?;
        return Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect());
    }
    let q = Quantizer::new(quant).map_err(|_| StreamIoError::Corrupt("quantizer loading"))?;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf.into_iter().map(|b| q.level(b as i8)).collect())
}

fn write_marks<W: Write>(w: &mut W, marks: &[usize]) -> io::Result<()> {
    w.write_all(&(marks.len() as u64).to_le_bytes())?;
    for &m in marks {
        w.write_all(&(m as u64).to_le_bytes())?;
    }
    Ok(())
}

fn read_marks<R: Read>(r: &mut R) -> Result<Vec<usize>, StreamIoError> {
    let n = u64::from_le_bytes(read_array(r)?);
    (0..n).map(|_| Ok(u64::from_le_bytes(read_array(r)?) as usize)).collect()
}

pub fn write_stream<W: Write>(w: &mut W, s: &SampleStream) -> Result<(), StreamIoError> {
    let h = Header {
        rate: s.rate,
        epoch: s.epoch,
        quant: s.quant,
        zone: s.zone,
        complex: false,
        count: s.data.len() as u64,
        valid: (s.valid.start as u64, s.valid.end as u64),
    };
    write_header(w, &h)?;
    write_values(w, s.quant, s.data.iter().copied())?;
    write_marks(w, &s.pps_marks)?;
    Ok(())
}

pub fn read_stream<R: Read>(r: &mut R) -> Result<SampleStream, StreamIoError> {
    let h = read_header(r)?;
    if h.complex {
        return Err(StreamIoError::WrongKind { expected: "real" });
    }
    let data = read_values(r, h.quant, h.count as usize)?;
    Ok(SampleStream {
        rate: h.rate,
        epoch: h.epoch,
        data,
        quant: h.quant,
        zone: h.zone,
        pps_marks: read_marks(r)?,
        valid: h.valid.0 as usize..h.valid.1 as usize,
    })
}

pub fn write_complex_stream<W: Write>(w: &mut W, s: &ComplexSampleStream) -> Result<(), StreamIoError> {
    let h = Header {
        rate: s.rate,
        epoch: s.epoch,
        quant: s.quant,
        zone: s.zone,
        complex: true,
        count: s.data.len() as u64,
        valid: (s.valid.start as u64, s.valid.end as u64),
    };
    write_header(w, &h)?;
    write_values(w, s.quant, s.data.iter().flat_map(|c| [c.re, c.im]))?;
    write_marks(w, &s.pps_marks)?;
    Ok(())
}

pub fn read_complex_stream<R: Read>(r: &mut R) -> Result<ComplexSampleStream, StreamIoError> {
    let h = read_header(r)?;
    if !h.complex {
        return Err(StreamIoError::WrongKind { expected: "complex" });
    }
    let flat = read_values(r, h.quant, 2 * h.count as usize)?;
    Ok(ComplexSampleStream {
        rate: h.rate,
        epoch: h.epoch,
        data: flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
        quant: h.quant,
        zone: h.zone,
        pps_marks: read_marks(r)?,
        valid: h.valid.0 as usize..h.valid.1 as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::quantize;
    use proptest::prelude::*;

    fn stream(data: Vec<f64>, marks: Vec<usize>, num: i64, den: i64, zone2: bool) -> SampleStream {
        let n = data.len();
        SampleStream {
            rate: RationalFreq::new(30000000001, 10).unwrap(),
            epoch: Rational::new(num as i128, den as i128).unwrap(),
            data,
            quant: QuantizerSpec::FLOAT,
            zone: if zone2 { Zone::Two } else { Zone::One },
            pps_marks: marks,
            valid: n / 4..n - n / 4,
        }
    }

    proptest! {
        #[test]
        fn float_round_trip(data in prop::collection::vec(-1e6f64..1e6, 0..300), marks in prop::collection::vec(0usize..1000, 0..10),
                            num in -1_000_000i64..1_000_000, den in 1i64..1_000_000, zone2 in any::<bool>()) {
            let s = stream(data, marks, num, den, zone2);
            let mut buf = Vec::new();
            write_stream(&mut buf, &s).unwrap();
            prop_assert_eq!(read_stream(&mut buf.as_slice()).unwrap(), s);
        }

        #[test]
        fn quantized_round_trip(data in prop::collection::vec(-5f64..5.0, 1..300), q8 in any::<bool>()) {
            let spec = if q8 { QuantizerSpec::q8(1.1) } else { QuantizerSpec::q4(0.9) };
            let s = quantize(&stream(data, vec![3], 1, 3, false), spec).unwrap();
            let mut buf = Vec::new();
            write_stream(&mut buf, &s).unwrap();
            prop_assert_eq!(buf.len(), 4 + 2 + 64 + 4 + 8 + 24 + s.len() + 16);
            prop_assert_eq!(read_stream(&mut buf.as_slice()).unwrap(), s);
        }

        #[test]
        fn complex_round_trip(re in prop::collection::vec(-1f64..1.0, 0..100)) {
            let s = ComplexSampleStream::from_real(&stream(re, vec![], 0, 1, false));
            let mut c = s.clone();
            for (i, v) in c.data.iter_mut().enumerate() {
                v.im = i as f64 * 0.25;
            }
            let mut buf = Vec::new();
            write_complex_stream(&mut buf, &c).unwrap();
            prop_assert_eq!(read_complex_stream(&mut buf.as_slice()).unwrap(), c.clone());
            let wrong = matches!(read_stream(&mut buf.as_slice()), Err(StreamIoError::WrongKind { .. }));
            prop_assert!(wrong);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_stream(&mut &b"NOPE00"[..]), Err(StreamIoError::BadMagic)));
        let s = stream(vec![0.5], vec![], 0, 1, false);
        let mut buf = Vec::new();
        write_stream(&mut buf, &s).unwrap();
        buf[4] = 9;
        assert!(matches!(read_stream(&mut buf.as_slice()), Err(StreamIoError::Version(9))));
        let mut bad = s.clone();
        bad.quant = QuantizerSpec::q8(1.0);
        assert!(matches!(write_stream(&mut Vec::new(), &bad), Err(StreamIoError::NotOnGrid { index: 0 })));
    }
}
