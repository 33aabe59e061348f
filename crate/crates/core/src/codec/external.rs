//! Adapter that runs a standard codec through its command-line tools.
//!
//! Command templates are split on whitespace and `{input}`, `{output}` and
//! `{qp}` are substituted inside each argument, e.g.
//! `bpgenc -q {qp} -o {output} {input}` and `bpgdec -o {output} {input}`.
//! The coded size is the size of the file written by the encoder.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;

use super::{Bitstream, Codec};
use crate::error::{CodecError, Error};
use crate::image::Image;

/// Image format handed to and read back from the external tools.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InterchangeFormat {
    #[default]
    Png,
    Pgm,
}

impl InterchangeFormat {
    fn extension(self) -> &'static str {
        match self {
            InterchangeFormat::Png => "png",
            InterchangeFormat::Pgm => "pgm",
        }
    }
}

impl FromStr for InterchangeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "png" => Ok(InterchangeFormat::Png),
            "pgm" => Ok(InterchangeFormat::Pgm),
            other => Err(Error::InvalidParameter(format!(
                "unknown image format `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExternalTemplate {
    pub encode_cmd: String,
    pub decode_cmd: String,
    pub scratch_dir: PathBuf,
    pub format: InterchangeFormat,
}

impl ExternalTemplate {
    pub fn new(encode_cmd: impl Into<String>, decode_cmd: impl Into<String>) -> Self {
        Self {
            encode_cmd: encode_cmd.into(),
            decode_cmd: decode_cmd.into(),
            scratch_dir: std::env::temp_dir(),
            format: InterchangeFormat::Png,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExternalCodec {
    template: ExternalTemplate,
    qp: i32,
    peak: f64,
}

/// Removes scratch files on drop.
struct Scratch(Vec<PathBuf>);

impl Drop for Scratch {
    fn drop(&mut self) {
        for p in &self.0 {
            let _ = std::fs::remove_file(p);
        }
    }
}

impl ExternalCodec {
    pub fn new(template: ExternalTemplate, qp: i32, peak: f64) -> Self {
        Self { template, qp, peak }
    }

    fn scratch_path(&self, tag: &str, ext: &str) -> PathBuf {
        self.template.scratch_dir.join(format!(
            "jointrec-{}-{tag}.{ext}",
            uuid::Uuid::new_v4().simple()
        ))
    }

    fn run(&self, template: &str, input: &Path, output: &Path) -> Result<(), CodecError> {
        let args: Vec<String> = template
            .split_whitespace()
            .map(|tok| {
                tok.replace("{input}", &input.to_string_lossy())
                    .replace("{output}", &output.to_string_lossy())
                    .replace("{qp}", &self.qp.to_string())
            })
            .collect();
        let (program, rest) = args
            .split_first()
            .ok_or_else(|| CodecError::NotConfigured("empty command template".into()))?;
        let out = Command::new(program)
            .args(rest)
            .output()
            .map_err(|e| CodecError::External {
                command: program.clone(),
                message: format!("could not start: {e}"),
            })?;
        if !out.status.success() {
            return Err(CodecError::External {
                command: program.clone(),
                message: format!(
                    "exited with {}: {}",
                    out.status,
                    String::from_utf8_lossy(&out.stderr).trim()
                ),
            });
        }
        Ok(())
    }

    fn io_error(&self, what: &str, path: &Path, e: impl std::fmt::Display) -> CodecError {
        CodecError::External {
            command: what.to_string(),
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl Codec for ExternalCodec {
    fn compress(&self, x: &Image) -> Result<Bitstream, CodecError> {
        let input = self.scratch_path("in", self.template.format.extension());
        let output = self.scratch_path("enc", "bin");
        let _guard = Scratch(vec![input.clone(), output.clone()]);
        x.save(&input, self.peak)
            .map_err(|e| self.io_error("write codec input", &input, e))?;
        self.run(&self.template.encode_cmd, &input, &output)?;
        let bytes = std::fs::read(&output)
            .map_err(|e| self.io_error(&self.template.encode_cmd, &output, e))?;
        let bits = 8 * bytes.len() as u64;
        Ok(Bitstream::new(bytes, bits, x.dims()))
    }

    fn decompress(&self, b: &Bitstream) -> Result<Image, CodecError> {
        let input = self.scratch_path("dec", "bin");
        let output = self.scratch_path("out", self.template.format.extension());
        let _guard = Scratch(vec![input.clone(), output.clone()]);
        std::fs::write(&input, b.bytes())
            .map_err(|e| self.io_error("write codec stream", &input, e))?;
        self.run(&self.template.decode_cmd, &input, &output)?;
        let img = Image::load(&output)
            .map_err(|e| self.io_error(&self.template.decode_cmd, &output, e))?;
        if img.dims() != b.dims() {
            return Err(CodecError::External {
                command: self.template.decode_cmd.clone(),
                message: format!("decoded {:?} image, expected {:?}", img.dims(), b.dims()),
            });
        }
        Ok(img)
    }
}
