//! Built-in block-transform codec.
//!
//! 8x8 orthonormal DCT-II after a level shift, uniform mid-tread
//! quantization with step `2^((qp - 4) / 6)`, zig-zag scan and Exp-Golomb
//! coded `(run, level)` tokens. The DC level is coded as a difference from
//! the previous block.
//!
//! Bitstream layout: `b"JRC1"`, `u16` width, `u16` height (little-endian),
//! `u8` qp, `u8` peak, then the MSB-first payload.
//!
//! The encoder rounds every coefficient to the nearest level. The decoder
//! returns 8-bit samples whose coefficients fall in the same quantization
//! cells, so compressing a decoded image reproduces the same bitstream. When
//! the decoder's search would miss, the AC count is offset by 64 and the
//! block's sample residuals follow as signed Exp-Golomb codes.

use std::sync::OnceLock;

use super::bits::{BitReader, BitWriter};
use super::{Bitstream, Codec};
use crate::error::CodecError;
use crate::image::Image;

const MAGIC: &[u8; 4] = b"JRC1";
const HEADER_BYTES: usize = 10;
/// Slightly under half a step, so cell membership survives rounding noise.
const CELL_HALF: f64 = 0.5 - 1e-9;
/// Added to the AC count of a block whose decoder search misses its cell;
/// such blocks carry the exact samples as residuals after the tokens.
const ESCAPE: u64 = 64;
const PROJECTION_ROUNDS: usize = 4;
const PROJECTION_MARGIN: f64 = 0.05;
const MAX_PIXEL_STEPS: usize = 512;

/// Quantizer step for `qp`.
pub fn step_size(qp: u8) -> f64 {
    2f64.powf((f64::from(qp) - 4.0) / 6.0)
}

const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20,
    13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59,
    52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

/// `BASIS[u][x] = c(u) cos((2x + 1) u pi / 16)`.
fn basis() -> &'static [[f64; 8]; 8] {
    static B: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    B.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let c = if u == 0 {
                (1.0f64 / 8.0).sqrt()
            } else {
                (2.0f64 / 8.0).sqrt()
            };
            for (x, v) in row.iter_mut().enumerate() {
                *v = c * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        b
    })
}

pub fn forward_dct(block: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    // rows: tmp[y][u] = sum_x block[y][x] B[u][x]
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| block[y * 8 + x] * b[u][x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| tmp[y * 8 + u] * b[v][y]).sum();
        }
    }
    out
}

pub fn inverse_dct(coef: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|v| coef[v * 8 + u] * b[v][y]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|u| tmp[y * 8 + u] * b[u][x]).sum();
        }
    }
    out
}

/// Quantization and reconstruction parameters shared by encoder and decoder.
#[derive(Clone, Copy, Debug)]
pub(crate) struct BlockQuantizer {
    step: f64,
    shift: f64,
    peak: f64,
}

impl BlockQuantizer {
    pub(crate) fn new(qp: u8, peak: u8) -> Self {
        Self {
            step: step_size(qp),
            shift: f64::from(peak.div_ceil(2)),
            peak: f64::from(peak),
        }
    }

    pub(crate) fn quantize(&self, pixels: &[f64; 64]) -> [i64; 64] {
        let mut shifted = [0.0; 64];
        for (s, p) in shifted.iter_mut().zip(pixels) {
            *s = p - self.shift;
        }
        let coef = forward_dct(&shifted);
        let mut levels = [0i64; 64];
        for (l, c) in levels.iter_mut().zip(&coef) {
            *l = (c / self.step).round() as i64;
        }
        levels
    }

    pub(crate) fn dequantize(&self, levels: &[i64; 64]) -> [f64; 64] {
        let mut coef = [0.0; 64];
        for (c, &l) in coef.iter_mut().zip(levels) {
            *c = l as f64 * self.step;
        }
        coef
    }

    pub(crate) fn reconstruct(&self, levels: &[i64; 64]) -> [f64; 64] {
        let px = inverse_dct(&self.dequantize(levels));
        let mut out = [0.0; 64];
        for (o, p) in out.iter_mut().zip(&px) {
            *o = (p + self.shift).round().clamp(0.0, self.peak);
        }
        out
    }
}

/// Replicates the last visible row/column into the padded part of a block.
fn repad(block: &mut [f64; 64], vis_w: usize, vis_h: usize) {
    for y in 0..8 {
        let sy = y.min(vis_h - 1);
        for x in 0..8 {
            let sx = x.min(vis_w - 1);
            block[y * 8 + x] = block[sy * 8 + sx];
        }
    }
}

fn visible_pixels(vis_w: usize, vis_h: usize) -> impl Iterator<Item = usize> {
    (0..vis_h).flat_map(move |y| (0..vis_w).map(move |x| y * 8 + x))
}

/// How far the coefficients lie outside the quantization cell of `levels`,
/// in steps.
fn cell_violation(q: &BlockQuantizer, coef: &[f64; 64], levels: &[i64; 64]) -> f64 {
    coef.iter()
        .zip(levels)
        .map(|(c, &l)| ((c / q.step - l as f64).abs() - CELL_HALF).max(0.0))
        .sum()
}

fn shifted_dct(q: &BlockQuantizer, block: &[f64; 64]) -> [f64; 64] {
    forward_dct(&std::array::from_fn(|i| block[i] - q.shift))
}

/// Change of every coefficient when visible pixel `p` (and its padded
/// copies) grows by one.
fn pixel_column(p: usize, vis_w: usize, vis_h: usize) -> [f64; 64] {
    let (px, py) = (p % 8, p / 8);
    let mut delta = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            if x.min(vis_w - 1) == px && y.min(vis_h - 1) == py {
                delta[y * 8 + x] = 1.0;
            }
        }
    }
    forward_dct(&delta)
}

/// Looks for 8-bit samples that quantize back to `levels`.
///
/// Starts from the rounded inverse transform. If that leaves the cell, it
/// alternates projection onto the cell with rounding, then walks single
/// pixel steps downhill on the cell violation. The search is deterministic,
/// so the encoder knows when it fails and escapes the block.
fn decode_block(q: &BlockQuantizer, levels: &[i64; 64], vis_w: usize, vis_h: usize) -> [f64; 64] {
    let mut v = q.reconstruct(levels);
    repad(&mut v, vis_w, vis_h);
    if q.quantize(&v) == *levels {
        return v;
    }
    for _ in 0..PROJECTION_ROUNDS {
        let mut coef = shifted_dct(q, &v);
        for (c, &l) in coef.iter_mut().zip(levels) {
            let lo = (l as f64 - CELL_HALF + PROJECTION_MARGIN) * q.step;
            let hi = (l as f64 + CELL_HALF - PROJECTION_MARGIN) * q.step;
            *c = c.clamp(lo, hi);
        }
        let px = inverse_dct(&coef);
        for (o, p) in v.iter_mut().zip(&px) {
            *o = (p + q.shift).round().clamp(0.0, q.peak);
        }
        repad(&mut v, vis_w, vis_h);
        if q.quantize(&v) == *levels {
            return v;
        }
    }
    let visible: Vec<usize> = visible_pixels(vis_w, vis_h).collect();
    let columns: Vec<[f64; 64]> = visible
        .iter()
        .map(|&p| pixel_column(p, vis_w, vis_h))
        .collect();
    let mut coef = shifted_dct(q, &v);
    let mut current = cell_violation(q, &coef, levels);
    for _ in 0..MAX_PIXEL_STEPS {
        let mut best: Option<(usize, f64, f64)> = None;
        for (j, &p) in visible.iter().enumerate() {
            for s in [-1.0, 1.0] {
                let next = v[p] + s;
                if !(0.0..=q.peak).contains(&next) {
                    continue;
                }
                let trial: [f64; 64] = std::array::from_fn(|k| coef[k] + s * columns[j][k]);
                let score = cell_violation(q, &trial, levels);
                if score < best.map_or(current, |b| b.2) {
                    best = Some((j, s, score));
                }
            }
        }
        let Some((j, s, score)) = best else { break };
        let p = visible[j];
        v[p] += s;
        repad(&mut v, vis_w, vis_h);
        coef = shifted_dct(q, &v);
        current = score;
        if q.quantize(&v) == *levels {
            break;
        }
    }
    v
}

#[derive(Clone, Copy, Debug)]
pub struct ReferenceCodec {
    qp: u8,
    peak: u8,
}

impl ReferenceCodec {
    pub fn new(qp: u8, peak: u8) -> Result<Self, CodecError> {
        if qp > 51 {
            return Err(CodecError::QpOutOfRange(i32::from(qp)));
        }
        if peak == 0 {
            return Err(CodecError::Malformed("peak must be positive".into()));
        }
        Ok(Self { qp, peak })
    }

    /// Quantized levels of every block in raster order, for inspection.
    pub fn block_levels(&self, x: &Image) -> Result<Vec<[i64; 64]>, CodecError> {
        let q = BlockQuantizer::new(self.qp, self.peak);
        let samples = x.to_u8_clipped(f64::from(self.peak));
        let (w, h) = check_dims(x)?;
        let mut out = Vec::new();
        for by in 0..h.div_ceil(8) {
            for bx in 0..w.div_ceil(8) {
                let (block, _, _) = gather_block(&samples, w, h, bx, by);
                out.push(q.quantize(&block));
            }
        }
        Ok(out)
    }
}

fn check_dims(x: &Image) -> Result<(usize, usize), CodecError> {
    let (w, h) = x.dims();
    if w < 8 || h < 8 {
        return Err(CodecError::ImageTooSmall {
            width: w,
            height: h,
        });
    }
    if w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(CodecError::ImageTooLarge {
            width: w,
            height: h,
        });
    }
    Ok((w, h))
}

/// Block `(bx, by)` with edge-replication padding, plus its visible extent.
fn gather_block(
    samples: &[u8],
    w: usize,
    h: usize,
    bx: usize,
    by: usize,
) -> ([f64; 64], usize, usize) {
    let mut block = [0.0; 64];
    for y in 0..8 {
        let sy = (by * 8 + y).min(h - 1);
        for x in 0..8 {
            let sx = (bx * 8 + x).min(w - 1);
            block[y * 8 + x] = f64::from(samples[sy * w + sx]);
        }
    }
    let vw = (w - bx * 8).min(8);
    let vh = (h - by * 8).min(8);
    (block, vw, vh)
}

impl Codec for ReferenceCodec {
    fn compress(&self, x: &Image) -> Result<Bitstream, CodecError> {
        let (w, h) = check_dims(x)?;
        let q = BlockQuantizer::new(self.qp, self.peak);
        let samples = x.to_u8_clipped(f64::from(self.peak));
        let mut bw = BitWriter::new();
        let mut prev_dc = 0i64;
        for by in 0..h.div_ceil(8) {
            for bx in 0..w.div_ceil(8) {
                let (block, vw, vh) = gather_block(&samples, w, h, bx, by);
                let levels = q.quantize(&block);
                let decoded = decode_block(&q, &levels, vw, vh);
                let escape = q.quantize(&decoded) != levels;
                bw.put_se(levels[0] - prev_dc);
                prev_dc = levels[0];
                let nonzero = ZIGZAG[1..].iter().filter(|&&i| levels[i] != 0).count() as u64;
                bw.put_ue(if escape { ESCAPE + nonzero } else { nonzero });
                let mut run = 0u64;
                for &i in &ZIGZAG[1..] {
                    let l = levels[i];
                    if l == 0 {
                        run += 1;
                        continue;
                    }
                    bw.put_ue(run);
                    bw.put_ue(l.unsigned_abs() - 1);
                    bw.put_bit(l < 0);
                    run = 0;
                }
                if escape {
                    for p in visible_pixels(vw, vh) {
                        bw.put_se((block[p] - decoded[p]) as i64);
                    }
                }
            }
        }
        let (payload, payload_bits) = bw.finish();
        let mut bytes = Vec::with_capacity(HEADER_BYTES + payload.len());
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&(w as u16).to_le_bytes());
        bytes.extend_from_slice(&(h as u16).to_le_bytes());
        bytes.push(self.qp);
        bytes.push(self.peak);
        bytes.extend_from_slice(&payload);
        Ok(Bitstream::new(
            bytes,
            HEADER_BYTES as u64 * 8 + payload_bits,
            (w, h),
        ))
    }

    fn decompress(&self, b: &Bitstream) -> Result<Image, CodecError> {
        decode(b)
    }
}

/// Decodes a reference bitstream; quantizer settings come from its header.
pub fn decode(b: &Bitstream) -> Result<Image, CodecError> {
    let payload_bits = b
        .bit_count()
        .checked_sub(HEADER_BYTES as u64 * 8)
        .ok_or_else(|| CodecError::Malformed("bit count shorter than header".into()))?;
    let (img, used) = decode_payload(b.bytes(), payload_bits)?;
    if used != payload_bits {
        return Err(CodecError::Malformed("trailing payload bits".into()));
    }
    Ok(img)
}

/// Decodes a stream read back from a byte-aligned file and recovers its
/// exact bit count. Only zero padding of the final byte may follow the payload.
pub fn decode_bytes(bytes: &[u8]) -> Result<(Bitstream, Image), CodecError> {
    let available = (bytes.len().saturating_sub(HEADER_BYTES) * 8) as u64;
    let (img, used) = decode_payload(bytes, available)?;
    let pad = available - used;
    if pad >= 8 {
        return Err(CodecError::Malformed("trailing payload bytes".into()));
    }
    if pad > 0 && bytes[bytes.len() - 1] & ((1u8 << pad) - 1) != 0 {
        return Err(CodecError::Malformed("nonzero padding bits".into()));
    }
    let b = Bitstream::new(bytes.to_vec(), HEADER_BYTES as u64 * 8 + used, img.dims());
    Ok((b, img))
}

fn decode_payload(bytes: &[u8], payload_bits: u64) -> Result<(Image, u64), CodecError> {
    if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
        return Err(CodecError::Malformed("missing JRC1 header".into()));
    }
    let w = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let h = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let qp = bytes[8];
    let peak = bytes[9];
    if w < 8 || h < 8 || qp > 51 || peak == 0 {
        return Err(CodecError::Malformed(format!(
            "bad header: {w}x{h}, qp {qp}, peak {peak}"
        )));
    }
    let q = BlockQuantizer::new(qp, peak);
    let mut r = BitReader::new(&bytes[HEADER_BYTES..], payload_bits);
    let mut out = vec![0.0; w * h];
    let mut prev_dc = 0i64;
    for by in 0..h.div_ceil(8) {
        for bx in 0..w.div_ceil(8) {
            let mut levels = [0i64; 64];
            prev_dc += r.se()?;
            levels[0] = prev_dc;
            let mut nonzero = r.ue()?;
            let escape = nonzero >= ESCAPE;
            if escape {
                nonzero -= ESCAPE;
            }
            if nonzero > 63 {
                return Err(CodecError::Malformed("too many AC tokens".into()));
            }
            let mut pos = 0usize;
            for _ in 0..nonzero {
                pos += r.ue()? as usize;
                let mag = r.ue()? as i64 + 1;
                let neg = r.bit()?;
                pos += 1;
                if pos > 63 {
                    return Err(CodecError::Malformed("AC run past end of block".into()));
                }
                levels[ZIGZAG[pos]] = if neg { -mag } else { mag };
            }
            let (vw, vh) = ((w - bx * 8).min(8), (h - by * 8).min(8));
            let mut px = decode_block(&q, &levels, vw, vh);
            if escape {
                for p in visible_pixels(vw, vh) {
                    px[p] += r.se()? as f64;
                    if !(0.0..=q.peak).contains(&px[p]) {
                        return Err(CodecError::Malformed("escaped sample out of range".into()));
                    }
                }
                repad(&mut px, vw, vh);
            }
            for y in 0..8 {
                let oy = by * 8 + y;
                if oy >= h {
                    break;
                }
                for x in 0..8 {
                    let ox = bx * 8 + x;
                    if ox < w {
                        out[oy * w + ox] = px[y * 8 + x];
                    }
                }
            }
        }
    }
    Ok((Image::from_raw(w, h, out), r.position()))
}
