//! Test phantoms, portable graymap (PGM) files, and CSV output.
//!
//! Graymaps: `P2` (ASCII) and `P5` (binary) are read, with 8- or 16-bit
//! samples; `P5` with `maxval = 255` is written. Pixel values map to `[0, 1]`
//! by dividing by `maxval`.

use std::f64::consts::TAU;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{FieldKind, GridShape, SpatialImage};
use crate::solver::SolverTrace;

/// Decimal notation (never an exponent) with at least 15 significant digits.
pub fn fmt_decimal(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (14 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

// ---------------------------------------------------------------- graymaps

/// A decoded graymap before scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format {
                offset: start,
                message: format!("expected {what}"),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Graymap> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::Format {
            offset: 0,
            message: "missing 'P' magic number".into(),
        });
    }
    let binary = match bytes[1] {
        b'2' => false,
        b'5' => true,
        b'1' | b'3' | b'4' | b'6' | b'7' => {
            return Err(Error::UnsupportedFormat(format!(
                "P{} is not a grayscale graymap (only P2 and P5 are supported)",
                bytes[1] as char
            )))
        }
        _ => {
            return Err(Error::Format {
                offset: 1,
                message: "unknown magic number".into(),
            })
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > u16::MAX as usize {
        return Err(Error::Format {
            offset: maxval_at,
            message: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let count = width * height;
    let mut samples = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::Format {
                offset: cur.pos,
                message: "expected whitespace after maxval".into(),
            });
        }
        let start = cur.pos + 1;
        let per = if maxval < 256 { 1 } else { 2 };
        let expected = count * per;
        let available = bytes.len() - start;
        if available < expected {
            return Err(Error::Format {
                offset: bytes.len(),
                message: format!("truncated raster: expected {expected} bytes, found {available}"),
            });
        }
        let raster = &bytes[start..start + expected];
        if per == 1 {
            samples.extend(raster.iter().map(|&b| b as u16));
        } else {
            samples.extend(
                raster
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]])),
            );
        }
    } else {
        for _ in 0..count {
            let at = cur.pos;
            let v = cur.number("pixel value")?;
            if v > maxval {
                return Err(Error::Format {
                    offset: at,
                    message: format!("pixel value {v} exceeds maxval {maxval}"),
                });
            }
            samples.push(v as u16);
        }
    }
    if let Some(&v) = samples.iter().find(|&&v| v as usize > maxval) {
        return Err(Error::Format {
            offset: 0,
            message: format!("pixel value {v} exceeds maxval {maxval}"),
        });
    }
    Ok(Graymap {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

/// Reads a P2/P5 graymap as a real image in `[0, 1]`; rows become the first
/// grid index.
pub fn load_image(path: impl AsRef<Path>) -> Result<SpatialImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let map = decode_pgm(&bytes)?;
    let shape = GridShape::new(map.height, map.width)?;
    let scale = 1.0 / map.maxval as f64;
    SpatialImage::real(
        shape,
        map.samples.iter().map(|&v| v as f64 * scale).collect(),
    )
}

/// Dimensions `(rows, cols)` from a graymap header.
pub fn peek_image_shape(path: impl AsRef<Path>) -> Result<GridShape> {
    Ok(load_image(path)?.shape())
}

pub fn encode_pgm(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a real image (clamped to `[0, 1]`) as an 8-bit P5 graymap.
pub fn save_image(x: &SpatialImage, path: impl AsRef<Path>) -> Result<()> {
    let pixels: Vec<u8> = x.values().iter().map(|v| quantize(v.re)).collect();
    write_file(path, &encode_pgm(x.shape().n1(), x.shape().n2(), &pixels))
}

/// Real images are written as values, complex ones as magnitudes.
pub fn save_reconstruction(x: &SpatialImage, path: impl AsRef<Path>) -> Result<()> {
    let pixels: Vec<u8> = match x.kind() {
        FieldKind::Real => x.values().iter().map(|v| quantize(v.re)).collect(),
        FieldKind::Complex => x.values().iter().map(|v| quantize(v.norm())).collect(),
    };
    write_file(path, &encode_pgm(x.shape().n1(), x.shape().n2(), &pixels))
}

pub(crate) fn write_file(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- phantoms

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomKind {
    /// Deterministic rectangles on a gradient.
    SyntheticReal,
    /// A user-supplied graymap.
    FileReal(PathBuf),
    /// A magnitude image (synthetic, or a graymap) times a seeded uniform
    /// random phase.
    SyntheticComplex { magnitude: Option<PathBuf> },
}

impl PhantomKind {
    pub fn is_complex(&self) -> bool {
        matches!(self, PhantomKind::SyntheticComplex { .. })
    }

    pub fn label(&self) -> String {
        match self {
            PhantomKind::SyntheticReal => "synthetic-real".into(),
            PhantomKind::FileReal(p) => format!("file:{}", p.display()),
            PhantomKind::SyntheticComplex { magnitude: None } => "synthetic-complex".into(),
            PhantomKind::SyntheticComplex { magnitude: Some(p) } => {
                format!("complex:{}", p.display())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub shape: GridShape,
    pub seed: u64,
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<SpatialImage> {
    match &spec.kind {
        PhantomKind::SyntheticReal => Ok(synthetic_real(spec.shape)),
        PhantomKind::FileReal(path) => load_matching(path, spec.shape),
        PhantomKind::SyntheticComplex { magnitude } => {
            let mag = match magnitude {
                Some(path) => load_matching(path, spec.shape)?,
                None => synthetic_real(spec.shape),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let values = mag
                .values()
                .iter()
                .map(|v| Complex64::from_polar(v.re, rng.random_range(0.0..TAU)))
                .collect();
            SpatialImage::complex(spec.shape, values)
        }
    }
}

fn load_matching(path: &Path, shape: GridShape) -> Result<SpatialImage> {
    let img = load_image(path)?;
    if img.shape() != shape {
        return Err(Error::dimension(shape, img.shape()));
    }
    Ok(img)
}

/// Piecewise-constant blocks over a linear ramp, scaled so the maximum is 1.
fn synthetic_real(shape: GridShape) -> SpatialImage {
    let (n1, n2) = (shape.n1(), shape.n2());
    // (row0, row1, col0, col1, level) in fractions of the grid
    const BLOCKS: [(f64, f64, f64, f64, f64); 4] = [
        (0.10, 0.45, 0.15, 0.60, 0.55),
        (0.55, 0.90, 0.50, 0.85, 0.35),
        (0.25, 0.70, 0.70, 0.90, -0.15),
        (0.60, 0.80, 0.10, 0.35, 0.25),
    ];
    let mut values = Vec::with_capacity(n1 * n2);
    for i1 in 0..n1 {
        let u = (i1 as f64 + 0.5) / n1 as f64;
        for i2 in 0..n2 {
            let v = (i2 as f64 + 0.5) / n2 as f64;
            let mut p = 0.2 + 0.3 * (0.6 * u + 0.4 * v);
            for (r0, r1, c0, c1, level) in BLOCKS {
                if u >= r0 && u < r1 && v >= c0 && v < c1 {
                    p += level;
                }
            }
            values.push(p);
        }
    }
    let peak = values.iter().cloned().fold(f64::MIN, f64::max);
    values.iter_mut().for_each(|v| *v /= peak);
    SpatialImage::real(shape, values).expect("length matches shape")
}

// --------------------------------------------------------------------- CSV

pub fn trace_csv(trace: &SolverTrace) -> String {
    let mut s = String::from("iter,rel_err,residual\n");
    for r in &trace.records {
        s.push_str(&format!(
            "{},{},{}\n",
            r.iter,
            r.rel_err.map(fmt_decimal).unwrap_or_default(),
            fmt_decimal(r.residual)
        ));
    }
    s
}

pub fn save_trace_csv(trace: &SolverTrace, path: impl AsRef<Path>) -> Result<()> {
    write_file(path, trace_csv(trace).as_bytes())
}

/// One cell of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub image: String,
    pub beta: f64,
    pub d1: f64,
    pub d2: Option<f64>,
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub iters: usize,
    /// Final relative error, or an error tag when the cell failed.
    pub outcome: std::result::Result<f64, String>,
}

pub const SWEEP_HEADER: &str = "image,beta,d1,d2,snr_db,seed,iters,final_rel_err";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            csv_field(&r.image),
            r.beta,
            r.d1,
            r.d2.map(|v| v.to_string()).unwrap_or_default(),
            r.snr_db.map(|v| v.to_string()).unwrap_or_default(),
            r.seed,
            r.iters,
            match &r.outcome {
                Ok(e) => fmt_decimal(*e),
                Err(tag) => format!("error:{}", csv_field(tag)),
            }
        ));
    }
    s
}

pub fn save_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    write_file(path, sweep_csv(rows).as_bytes())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FourierField;
    use crate::solver::{Termination, TraceRecord};

    #[test]
    fn decimal_format() {
        assert_eq!(fmt_decimal(0.0), "0");
        assert_eq!(fmt_decimal(0.5), "0.500000000000000");
        assert_eq!(fmt_decimal(1e-15), "0.00000000000000100000000000000");
        assert_eq!(fmt_decimal(123.25), "123.250000000000");
        assert!(!fmt_decimal(3.7e-9).contains('e'));
        assert_eq!(fmt_decimal(f64::NAN), "nan");
        let back: f64 = fmt_decimal(0.1234567890123456).parse().unwrap();
        assert!((back - 0.1234567890123456).abs() < 1e-15);
    }

    #[test]
    fn ascii_graymap() {
        let map = decode_pgm(b"P2 2 2 255\n0 255 128 64\n").unwrap();
        assert_eq!(map.samples, vec![0, 255, 128, 64]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        fs::write(&p, b"P2\n# comment\n2 2\n255\n0 255\n128 64\n").unwrap();
        let img = load_image(&p).unwrap();
        let want = [0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0];
        for (v, w) in img.values().iter().zip(want) {
            assert!((v.re - w).abs() < 1e-15);
        }
    }

    #[test]
    fn truncated_binary_reports_counts() {
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4]);
        match decode_pgm(&bytes) {
            Err(Error::Format { message, .. }) => {
                assert!(message.contains("expected 6 bytes"), "{message}");
                assert!(message.contains("found 4"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_color_and_garbage() {
        assert!(matches!(
            decode_pgm(b"P6 1 1 255\n\0\0\0"),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode_pgm(b"GIF89a"),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            decode_pgm(b"P2 2 x"),
            Err(Error::Format { offset: 5, .. })
        ));
        assert!(matches!(
            decode_pgm(b"P2 1 1 10 11"),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn sixteen_bit_binary() {
        let mut bytes = b"P5 2 1 1000\n".to_vec();
        bytes.extend_from_slice(&[0x03, 0xE8, 0x01, 0xF4]);
        let map = decode_pgm(&bytes).unwrap();
        assert_eq!(map.samples, vec![1000, 500]);
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.pgm");
        let shape = GridShape::new(3, 4).unwrap();
        let pixels: Vec<u8> = (0..12).map(|i| (i * 23) as u8).collect();
        let img =
            SpatialImage::real(shape, pixels.iter().map(|&v| v as f64 / 255.0).collect()).unwrap();
        save_image(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back.shape(), shape);
        assert_eq!(
            fs::read(&p).unwrap()[fs::read(&p).unwrap().len() - 12..],
            pixels[..]
        );
        for (a, b) in back.values().iter().zip(img.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constant_magnitude_saves_mid_gray() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.pgm");
        let shape = GridShape::new(2, 3).unwrap();
        let x = SpatialImage::complex(
            shape,
            (0..6)
                .map(|k| Complex64::from_polar(0.5, k as f64))
                .collect(),
        )
        .unwrap();
        save_reconstruction(&x, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.ends_with(&[128; 6]));
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
    }

    #[test]
    fn phantoms() {
        let shape = GridShape::new(32, 32).unwrap();
        let real = make_phantom(&PhantomSpec {
            kind: PhantomKind::SyntheticReal,
            shape,
            seed: 0,
        })
        .unwrap();
        let mags = real.magnitudes();
        assert!(mags.iter().all(|&v| v >= 0.0));
        assert_eq!(mags.iter().cloned().fold(0.0, f64::max), 1.0);
        assert_eq!(real.kind(), FieldKind::Real);

        let spec = PhantomSpec {
            kind: PhantomKind::SyntheticComplex { magnitude: None },
            shape,
            seed: 5,
        };
        let a = make_phantom(&spec).unwrap();
        assert_eq!(a, make_phantom(&spec).unwrap());
        for (c, r) in a.values().iter().zip(real.values()) {
            assert!((c.norm() - r.re).abs() < 1e-12);
        }
        let other = make_phantom(&PhantomSpec { seed: 6, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn file_phantom_shape_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.pgm");
        fs::write(&p, encode_pgm(2, 3, &[1, 2, 3, 4, 5, 6])).unwrap();
        let ok = PhantomSpec {
            kind: PhantomKind::FileReal(p.clone()),
            shape: GridShape::new(2, 3).unwrap(),
            seed: 0,
        };
        assert!(make_phantom(&ok).is_ok());
        let bad = PhantomSpec {
            shape: GridShape::new(3, 2).unwrap(),
            ..ok
        };
        assert!(matches!(make_phantom(&bad), Err(Error::Dimension { .. })));
        assert!(matches!(
            load_image(dir.path().join("missing.pgm")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn trace_and_sweep_csv() {
        let shape = GridShape::new(2, 2).unwrap();
        let trace = SolverTrace {
            records: (1..=3)
                .map(|i| TraceRecord {
                    iter: i,
                    rel_err: Some(0.1 / i as f64),
                    residual: 0.5,
                })
                .collect(),
            final_image: SpatialImage::ones(shape),
            final_fourier: FourierField::zeros(shape, 1),
            termination: Termination::MaxIterations,
        };
        let csv = trace_csv(&trace);
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().next().unwrap(), "iter,rel_err,residual");

        let rows = vec![
            SweepRow {
                image: "synthetic-real".into(),
                beta: 0.8,
                d1: 3.0,
                d2: None,
                snr_db: Some(40.0),
                seed: 1,
                iters: 150,
                outcome: Ok(0.01),
            },
            SweepRow {
                image: "x".into(),
                beta: 0.9,
                d1: 3.0,
                d2: Some(-3.0),
                snr_db: None,
                seed: 2,
                iters: 0,
                outcome: Err("degenerate".into()),
            },
        ];
        let csv = sweep_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(
            lines[1],
            "synthetic-real,0.8,3,,40,1,150,0.0100000000000000"
        );
        assert_eq!(lines[2], "x,0.9,3,-3,,2,0,error:degenerate");
    }
}
