//! Grayscale-image ingestion, density preparation, and transport-based
//! comparison products: divergence maps, warped-density frames, and the
//! transport distance.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::PeriodicGrid;
use crate::ma::SolveReport;
use crate::scalar::Scalar;
use crate::stencil::{gradient, laplacian, DiffOrder};

/// Decoded grayscale image with intensities in [0, 1], row-major by
/// (row, column).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    pub fn new(width: usize, height: usize, pixels: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Image(format!(
                "pixel buffer of {} does not match {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        if pixels
            .iter()
            .any(|p| !p.is_finite() || *p < T::zero() || *p > T::one())
        {
            return Err(Error::Image("intensities must lie in [0, 1]".into()));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.pixels[row * self.width + col]
    }

    /// Decodes PGM (P2/P5) by magic number, anything else through the PNG
    /// decoder.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
            decode_pgm(bytes)
        } else {
            decode_png(bytes)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Image(format!("cannot read {}: {e}", path.display())))?;
        Self::decode(&bytes)
    }

    /// 8-bit quantization, round to nearest.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| (p * T::cast(255.0)).round().to_u8().unwrap_or(255))
            .collect()
    }

    /// Binary PGM (P5), maxval 255.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.to_u8());
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let buf: image::ImageBuffer<image::Luma<u8>, Vec<u8>> =
            image::ImageBuffer::from_raw(self.width as u32, self.height as u32, self.to_u8())
                .ok_or_else(|| Error::Image("buffer size mismatch".into()))?;
        buf.save(path)
            .map_err(|e| Error::Image(format!("cannot write {}: {e}", path.display())))
    }
}

fn decode_png<T: Scalar>(bytes: &[u8]) -> Result<GrayImage<T>> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Image(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels: Vec<T> = match img {
        image::DynamicImage::ImageLuma8(buf) => buf
            .pixels()
            .map(|p| T::cast(p.0[0] as f64 / 255.0))
            .collect(),
        image::DynamicImage::ImageLuma16(buf) => buf
            .pixels()
            .map(|p| T::cast(p.0[0] as f64 / 65535.0))
            .collect(),
        other => {
            // Pinned luma weighting for color inputs.
            other
                .to_rgb8()
                .pixels()
                .map(|p| {
                    let [r, g, b] = p.0;
                    T::cast((0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0)
                })
                .collect()
        }
    };
    GrayImage::new(w, h, pixels)
}

fn decode_pgm<T: Scalar>(bytes: &[u8]) -> Result<GrayImage<T>> {
    let mut cursor = 0usize;
    let magic = pgm_token(bytes, &mut cursor).ok_or_else(|| bad_pgm("missing magic"))?;
    let binary = match magic.as_slice() {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(bad_pgm("unsupported magic")),
    };
    let width = pgm_number(bytes, &mut cursor).ok_or_else(|| bad_pgm("missing width"))?;
    let height = pgm_number(bytes, &mut cursor).ok_or_else(|| bad_pgm("missing height"))?;
    let maxval = pgm_number(bytes, &mut cursor).ok_or_else(|| bad_pgm("missing maxval"))?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad_pgm("bad header values"));
    }
    let count = width * height;
    let scale = T::one() / T::cast(maxval as f64);
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        cursor += 1;
        if maxval < 256 {
            let raster = bytes
                .get(cursor..cursor + count)
                .ok_or_else(|| bad_pgm("truncated raster"))?;
            pixels.extend(raster.iter().map(|&b| T::cast(b as f64) * scale));
        } else {
            let raster = bytes
                .get(cursor..cursor + 2 * count)
                .ok_or_else(|| bad_pgm("truncated raster"))?;
            pixels.extend(raster.chunks_exact(2).map(|c| {
                let v = u16::from_be_bytes([c[0], c[1]]);
                T::cast(v as f64) * scale
            }));
        }
    } else {
        for _ in 0..count {
            let v = pgm_number(bytes, &mut cursor).ok_or_else(|| bad_pgm("truncated raster"))?;
            pixels.push(T::cast(v as f64) * scale);
        }
    }
    if pixels.iter().any(|p| *p > T::one()) {
        return Err(bad_pgm("sample exceeds maxval"));
    }
    GrayImage::new(width, height, pixels)
}

fn bad_pgm(what: &str) -> Error {
    Error::Image(format!("invalid PGM: {what}"))
}

/// Next whitespace-delimited token, skipping '#' comment lines.
fn pgm_token(bytes: &[u8], cursor: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    if *cursor >= bytes.len() {
        return None;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    Some(bytes[start..*cursor].to_vec())
}

fn pgm_number(bytes: &[u8], cursor: &mut usize) -> Option<usize> {
    let token = pgm_token(bytes, cursor)?;
    std::str::from_utf8(&token).ok()?.parse().ok()
}

/// Bilinear read of the image at fractional pixel coordinates, clamped at
/// the borders (images are not periodic).
fn sample_image<T: Scalar>(img: &GrayImage<T>, row: T, col: T) -> T {
    let clamp = |v: T, max: usize| v.max(T::zero()).min(T::from_grid(max - 1));
    let r = clamp(row, img.height);
    let c = clamp(col, img.width);
    let r0 = r.floor().to_usize().unwrap_or(0).min(img.height - 1);
    let c0 = c.floor().to_usize().unwrap_or(0).min(img.width - 1);
    let r1 = (r0 + 1).min(img.height - 1);
    let c1 = (c0 + 1).min(img.width - 1);
    let fr = r - T::from_grid(r0);
    let fc = c - T::from_grid(c0);
    let one = T::one();
    (one - fr) * ((one - fc) * img.get(r0, c0) + fc * img.get(r0, c1))
        + fr * ((one - fc) * img.get(r1, c0) + fc * img.get(r1, c1))
}

/// Resamples the image to n-by-n by bilinear reduction or enlargement, then
/// shifts and scales affinely so the minimum lands on `floor` and the grid
/// mean is exactly 1. Returns the density and whether the image was
/// degenerate (constant), in which case the density is identically 1.
pub fn to_density<T: Scalar>(
    img: &GrayImage<T>,
    n: usize,
    floor: T,
) -> Result<(ScalarField<T>, bool)> {
    if floor <= T::zero() || floor >= T::one() {
        return Err(Error::InvalidDensity(format!(
            "floor must lie in (0, 1), got {floor}"
        )));
    }
    let grid = PeriodicGrid::new(n)?;
    grid.require_even()?;
    grid.require_power_of_two()?;
    let half = T::cast(0.5);
    let resampled = ScalarField::from_fn(grid, |x1, x2| {
        // Field axis 1 runs down the image rows, axis 2 across columns;
        // pixel centers align with grid cell centers.
        let row = (x1 + half / T::from_grid(n)) * T::from_grid(img.height) - half;
        let col = (x2 + half / T::from_grid(n)) * T::from_grid(img.width) - half;
        sample_image(img, row, col)
    });

    let min = resampled.min_value();
    let mean = resampled.mean();
    if mean - min <= T::cast(1e-12) {
        return Ok((ScalarField::constant(grid, T::one()), true));
    }
    let a = (T::one() - floor) / (mean - min);
    let c = floor - a * min;
    let mut density = resampled.map(|v| a * v + c);
    // Exact unit-mean translation, then pin values that roundoff pushed
    // a hair below the floor.
    let shift = T::one() - density.mean();
    density = density.map(|v| (v + shift).max(floor));
    Ok((density, false))
}

/// Displacement field grad u of the transport map x + grad u, by
/// fourth-order stencils.
pub fn displacement_field<T: Scalar>(u: &ScalarField<T>) -> Result<VectorField<T>> {
    let (u1, u2) = gradient(u, DiffOrder::Four)?;
    VectorField::new(u1, u2)
}

/// Squared-displacement transport cost d(f, g) = integral |grad u|^2 f,
/// by Simpson quadrature with fourth-order gradient stencils.
pub fn transport_distance<T: Scalar>(u: &ScalarField<T>, f: &ScalarField<T>) -> Result<T> {
    if u.grid() != f.grid() {
        return Err(Error::GridMismatch(u.n(), f.n()));
    }
    let integrand = displacement_field(u)?.norm_sq().zip_map(f, |d, w| d * w);
    integrand.simpson_average()
}

/// Divergence of the displacement field grad u, i.e. the Laplacian of u,
/// by fourth-order stencils. Highlights mass creation and removal.
pub fn divergence_map<T: Scalar>(u: &ScalarField<T>) -> Result<ScalarField<T>> {
    laplacian(u, DiffOrder::Four)
}

/// Registration products of one transport solve between a source density
/// and a target.
#[derive(Debug, Clone)]
pub struct TransportResult<T> {
    /// Zero-mean potential perturbation of the optimal map.
    pub u: ScalarField<T>,
    /// Squared-displacement transport cost d(f, g).
    pub distance: T,
    /// Divergence of the displacement field.
    pub divergence: ScalarField<T>,
    pub report: SolveReport<T>,
}

impl<T: Scalar> TransportResult<T> {
    /// Derives the comparison products from a completed solve.
    pub fn from_solution(
        u: ScalarField<T>,
        f: &ScalarField<T>,
        report: SolveReport<T>,
    ) -> Result<Self> {
        let distance = transport_distance(&u, f)?;
        let divergence = divergence_map(&u)?;
        Ok(Self {
            u,
            distance,
            divergence,
            report,
        })
    }
}

/// Renders a field to grayscale by the affine map [min, max] -> [0, 1];
/// a flat field renders as black.
pub fn render_field<T: Scalar>(field: &ScalarField<T>) -> GrayImage<T> {
    let n = field.n();
    let min = field.min_value();
    let max = field.max_value();
    let pixels = if max - min <= T::cast(1e-300) {
        vec![T::zero(); n * n]
    } else {
        let scale = T::one() / (max - min);
        field.values().iter().map(|&v| (v - min) * scale).collect()
    };
    GrayImage {
        width: n,
        height: n,
        pixels,
    }
}

/// Renders each retained density iterate to 8-bit grayscale frames.
pub fn warp_sequence<T: Scalar>(density_history: &[ScalarField<T>]) -> Vec<GrayImage<T>> {
    density_history.iter().map(render_field).collect()
}
