//! `TOMO1` binary grid files, JSON sidecars and 16-bit PGM export.
//!
//! Byte layout (all little-endian), see `docs/FORMAT.md`:
//!
//! | offset | size | field                                        |
//! |--------|------|----------------------------------------------|
//! | 0      | 5    | magic `TOMO1`                                |
//! | 5      | 1    | kind (0 cartesian .. 4 spectrum)             |
//! | 6      | 1    | dtype (0 real32, 1 real64, 2 complex64, 3 complex128) |
//! | 7      | 1    | endianness, `b'L'`                           |
//! | 8      | 8    | dim0 (u64)                                   |
//! | 16     | 8    | dim1 (u64)                                   |
//! | 24     | 32   | four f64 grid parameters                     |
//! | 56     | ...  | payload, row-major                           |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::grids::{CartesianImage, LogPolarImage, PolarSinogram, PolarSpectrum, Sinogram};

pub const MAGIC: &[u8; 5] = b"TOMO1";
pub const HEADER_LEN: usize = 56;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Cartesian,
    Sinogram,
    Polar,
    Logpolar,
    Spectrum,
}

impl GridKind {
    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Self::Cartesian,
            1 => Self::Sinogram,
            2 => Self::Polar,
            3 => Self::Logpolar,
            4 => Self::Spectrum,
            _ => return None,
        })
    }

    fn is_complex(self) -> bool {
        self == Self::Spectrum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dtype {
    Real32,
    Real64,
    Complex64,
    Complex128,
}

impl Dtype {
    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Self::Real32,
            1 => Self::Real64,
            2 => Self::Complex64,
            3 => Self::Complex128,
            _ => return None,
        })
    }

    fn code(self) -> u8 {
        self as u8
    }

    pub fn bytes(self) -> usize {
        match self {
            Self::Real32 => 4,
            Self::Real64 | Self::Complex64 => 8,
            Self::Complex128 => 16,
        }
    }

    fn is_complex(self) -> bool {
        matches!(self, Self::Complex64 | Self::Complex128)
    }
}

/// Header of a `TOMO1` file. `params` depend on the kind:
/// cartesian `[xmin, xmax, ymin, ymax]`, sinogram `[tmin, tmax, θmin, θmax]`,
/// polar `[smin, smax, φmin, φmax]`, logpolar `[ρ₀, Δρ, φmin, φmax]`,
/// spectrum `[Δσ, 0, φmin, φmax]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFileHeader {
    pub magic: String,
    pub kind: GridKind,
    pub dims: [u64; 2],
    pub params: [f64; 4],
    pub dtype: Dtype,
    pub endianness: String,
}

impl ImageFileHeader {
    /// Number of scalar samples (complex counts once).
    pub fn sample_count(&self) -> Result<u64> {
        let [a, b] = self.dims;
        let rows = if self.kind == GridKind::Polar { a.checked_add(1) } else { Some(a) };
        rows.and_then(|r| r.checked_mul(b))
            .ok_or_else(|| TomoError::Parse { offset: 8, message: "dims overflow".into() })
    }

    pub fn payload_len(&self) -> Result<u64> {
        self.sample_count()?
            .checked_mul(self.dtype.bytes() as u64)
            .ok_or_else(|| TomoError::Parse { offset: 8, message: "dims overflow".into() })
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..5].copy_from_slice(MAGIC);
        out[5] = self.kind.code();
        out[6] = self.dtype.code();
        out[7] = b'L';
        out[8..16].copy_from_slice(&self.dims[0].to_le_bytes());
        out[16..24].copy_from_slice(&self.dims[1].to_le_bytes());
        for (k, p) in self.params.iter().enumerate() {
            out[24 + 8 * k..32 + 8 * k].copy_from_slice(&p.to_le_bytes());
        }
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        let parse = |offset: u64, message: &str| TomoError::Parse { offset, message: message.into() };
        if bytes.len() < HEADER_LEN {
            return Err(parse(bytes.len() as u64, "file shorter than the 56-byte header"));
        }
        if let Some(i) = (0..5).find(|&i| bytes[i] != MAGIC[i]) {
            return Err(parse(i as u64, "bad magic, expected TOMO1"));
        }
        let kind = GridKind::from_code(bytes[5]).ok_or_else(|| parse(5, "unknown grid kind"))?;
        let dtype = Dtype::from_code(bytes[6]).ok_or_else(|| parse(6, "unknown dtype"))?;
        if bytes[7] != b'L' {
            return Err(parse(7, "only little-endian payloads are supported"));
        }
        if kind.is_complex() != dtype.is_complex() {
            return Err(parse(6, "dtype does not match grid kind"));
        }
        let u = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let dims = [u(8), u(16)];
        if dims[0] == 0 {
            return Err(parse(8, "zero dimension"));
        }
        if dims[1] == 0 {
            return Err(parse(16, "zero dimension"));
        }
        let mut params = [0.0; 4];
        for (k, p) in params.iter_mut().enumerate() {
            *p = f64::from_le_bytes(bytes[24 + 8 * k..32 + 8 * k].try_into().unwrap());
            if !p.is_finite() {
                return Err(parse(24 + 8 * k as u64, "non-finite grid parameter"));
            }
        }
        Ok(Self { magic: "TOMO1".into(), kind, dims, params, dtype, endianness: "little".into() })
    }
}

/// Any grid object that can be stored.
#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    Cartesian(CartesianImage),
    Sinogram(Sinogram),
    Polar(PolarSinogram),
    Logpolar(LogPolarImage),
    Spectrum(PolarSpectrum),
}

impl GridData {
    pub fn kind(&self) -> GridKind {
        match self {
            Self::Cartesian(_) => GridKind::Cartesian,
            Self::Sinogram(_) => GridKind::Sinogram,
            Self::Polar(_) => GridKind::Polar,
            Self::Logpolar(_) => GridKind::Logpolar,
            Self::Spectrum(_) => GridKind::Spectrum,
        }
    }

    pub fn header(&self) -> ImageFileHeader {
        use std::f64::consts::PI;
        let (dims, params, dtype) = match self {
            Self::Cartesian(c) => ([c.nx, c.ny], [-1.0, 1.0, -1.0, 1.0], Dtype::Real64),
            Self::Sinogram(s) => ([s.nt, s.ntheta], [-1.0, 1.0, 0.0, PI], Dtype::Real64),
            Self::Polar(p) => ([p.ns, p.nphi], [0.0, 1.0, 0.0, 2.0 * PI], Dtype::Real64),
            Self::Logpolar(l) => ([l.nrho, l.nphi], [l.rho0, l.drho, 0.0, 2.0 * PI], Dtype::Real64),
            Self::Spectrum(s) => ([s.nsigma, s.nphi], [s.dsigma, 0.0, 0.0, 2.0 * PI], Dtype::Complex128),
        };
        ImageFileHeader {
            magic: "TOMO1".into(),
            kind: self.kind(),
            dims: [dims[0] as u64, dims[1] as u64],
            params,
            dtype,
            endianness: "little".into(),
        }
    }

    pub fn into_cartesian(self) -> Result<CartesianImage> {
        match self {
            Self::Cartesian(c) => Ok(c),
            other => Err(TomoError::InvalidParameter(format!("expected a cartesian image, got {:?}", other.kind()))),
        }
    }

    pub fn into_sinogram(self) -> Result<Sinogram> {
        match self {
            Self::Sinogram(s) => Ok(s),
            other => Err(TomoError::InvalidParameter(format!("expected a sinogram, got {:?}", other.kind()))),
        }
    }
}

impl From<CartesianImage> for GridData {
    fn from(v: CartesianImage) -> Self {
        Self::Cartesian(v)
    }
}

impl From<Sinogram> for GridData {
    fn from(v: Sinogram) -> Self {
        Self::Sinogram(v)
    }
}

pub fn encode(obj: &GridData) -> Vec<u8> {
    let header = obj.header();
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len().unwrap_or(0) as usize);
    out.extend_from_slice(&header.encode());
    let reals = |out: &mut Vec<u8>, v: &[f64]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    match obj {
        GridData::Cartesian(c) => reals(&mut out, &c.values),
        GridData::Sinogram(s) => reals(&mut out, &s.values),
        GridData::Polar(p) => reals(&mut out, &p.values),
        GridData::Logpolar(l) => reals(&mut out, &l.values),
        GridData::Spectrum(s) => {
            for z in &s.values {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    out
}

fn read_scalars(payload: &[u8], dtype: Dtype) -> Vec<f64> {
    match dtype {
        Dtype::Real32 | Dtype::Complex64 => {
            payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect()
        }
        Dtype::Real64 | Dtype::Complex128 => {
            payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect()
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<GridData> {
    let header = ImageFileHeader::decode(bytes)?;
    let expected = header.payload_len()?;
    let actual = (bytes.len() - HEADER_LEN) as u64;
    if actual < expected {
        return Err(TomoError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(TomoError::Parse {
            offset: HEADER_LEN as u64 + expected,
            message: format!("{} trailing bytes after payload", actual - expected),
        });
    }
    let scalars = read_scalars(&bytes[HEADER_LEN..], header.dtype);
    let [a, b] = header.dims;
    let (a, b) = (a as usize, b as usize);
    let p = header.params;
    Ok(match header.kind {
        GridKind::Cartesian => GridData::Cartesian(CartesianImage::new(a, b, scalars)?),
        GridKind::Sinogram => GridData::Sinogram(Sinogram::new(a, b, scalars)?),
        GridKind::Polar => GridData::Polar(PolarSinogram::new(a, b, scalars)?),
        GridKind::Logpolar => {
            let mut l = LogPolarImage::with_mesh(p[0], p[1], a, b)?;
            l.values = scalars;
            GridData::Logpolar(l)
        }
        GridKind::Spectrum => {
            let mut s = PolarSpectrum::zeros(a, b, p[0])?;
            s.values = scalars.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            GridData::Spectrum(s)
        }
    })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the binary file and its `.json` sidecar.
pub fn write_image(obj: &GridData, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(obj))?;
    let json = serde_json::to_string_pretty(&obj.header())?;
    fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

pub fn read_image(path: &Path) -> Result<GridData> {
    decode(&fs::read(path)?)
}

/// Binary 16-bit PGM. Values are clamped to `[0, 1]` and mapped to `0..=65535`;
/// row 0 of the file is the top of the image (largest `y`).
pub fn pgm16(img: &CartesianImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.nx, img.ny).into_bytes();
    for iy in (0..img.ny).rev() {
        for ix in 0..img.nx {
            let v = (img.at(ix, iy).clamp(0.0, 1.0) * 65535.0).round() as u16;
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

/// Rescales to `[0, 1]` by min and max (a constant image maps to 0).
pub fn normalize_unit(img: &CartesianImage) -> CartesianImage {
    let lo = img.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = img.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let values = img.values.iter().map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 }).collect();
    CartesianImage { nx: img.nx, ny: img.ny, values }
}

pub fn export_pgm(img: &CartesianImage, path: &Path) -> Result<()> {
    fs::write(path, pgm16(&normalize_unit(img)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantoms::{rasterize, shepp_logan};

    fn samples() -> Vec<GridData> {
        let mut l = LogPolarImage::standard(-3.0, 8, 6).unwrap();
        l.values.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.1);
        let mut s = PolarSpectrum::zeros(4, 3, 0.5).unwrap();
        s.values.iter_mut().enumerate().for_each(|(i, v)| *v = Complex64::new(i as f64, -1.0 / (1.0 + i as f64)));
        vec![
            GridData::Cartesian(rasterize(&shepp_logan(), 16)),
            GridData::Sinogram(Sinogram::from_fn(8, 5, |t, th| t.sin() + th)),
            GridData::Polar(PolarSinogram::new(3, 4, (0..16).map(|i| i as f64 / 7.0).collect()).unwrap()),
            GridData::Logpolar(l),
            GridData::Spectrum(s),
        ]
    }

    #[test]
    fn round_trip_is_bit_identical() {
        for obj in samples() {
            let back = decode(&encode(&obj)).unwrap();
            assert_eq!(back, obj);
        }
    }

    #[test]
    fn round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.tomo");
        let obj = samples().remove(0);
        write_image(&obj, &path).unwrap();
        assert_eq!(read_image(&path).unwrap(), obj);
        let side: ImageFileHeader = serde_json::from_str(&fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(side, obj.header());
    }

    #[test]
    fn truncated_payload_names_byte_counts() {
        let bytes = encode(&samples().remove(0));
        match decode(&bytes[..bytes.len() - 3]) {
            Err(TomoError::Truncated { expected, actual }) => {
                assert_eq!(expected, 16 * 16 * 8);
                assert_eq!(actual, 16 * 16 * 8 - 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_headers_report_offsets() {
        let mut bytes = encode(&samples().remove(1));
        bytes[2] = b'X';
        assert!(matches!(decode(&bytes), Err(TomoError::Parse { offset: 2, .. })));
        let mut bytes = encode(&samples().remove(1));
        bytes[16..24].copy_from_slice(&0u64.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(TomoError::Parse { offset: 16, .. })));
        let mut bytes = encode(&samples().remove(1));
        bytes[5] = 9;
        assert!(matches!(decode(&bytes), Err(TomoError::Parse { offset: 5, .. })));
        assert!(matches!(decode(b"TOMO"), Err(TomoError::Parse { .. })));
    }

    #[test]
    fn real32_payloads_are_accepted() {
        let mut bytes = encode(&GridData::Sinogram(Sinogram::from_fn(4, 2, |t, _| t)));
        bytes[6] = 0;
        let payload: Vec<u8> = read_scalars(&bytes[HEADER_LEN..], Dtype::Real64)
            .iter()
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect();
        bytes.truncate(HEADER_LEN);
        bytes.extend(payload);
        let s = decode(&bytes).unwrap().into_sinogram().unwrap();
        assert_eq!(s.values, vec![-1.0, -0.5, 0.0, 0.5, -1.0, -0.5, 0.0, 0.5]);
    }

    #[test]
    fn pgm_peak_is_full_scale() {
        let img = normalize_unit(&rasterize(&shepp_logan(), 32));
        let bytes = pgm16(&img);
        let header = b"P5\n32 32\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let max = bytes[header.len()..].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).max();
        assert_eq!(max, Some(65535));
    }
}
