//! RIFF/WAVE reading and writing: 16/24-bit PCM and 32-bit float, one or
//! two channels. Unknown chunks are skipped.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::AudioBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Pcm24,
    Float32,
}

impl WavFormat {
    fn bytes(self) -> usize {
        match self {
            WavFormat::Pcm16 => 2,
            WavFormat::Pcm24 => 3,
            WavFormat::Float32 => 4,
        }
    }

    fn tag(self) -> u16 {
        match self {
            WavFormat::Float32 => 3,
            _ => 1,
        }
    }
}

const TAG_PCM: u16 = 1;
const TAG_FLOAT: u16 = 3;
const TAG_EXTENSIBLE: u16 = 0xFFFE;

fn err(offset: usize, detail: impl Into<String>) -> Error {
    Error::Wav { offset: offset as u64, detail: detail.into() }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Fmt {
    format: WavFormat,
    channels: usize,
    sample_rate: u32,
}

fn parse_fmt(b: &[u8], body: usize, size: usize) -> Result<Fmt> {
    if size < 16 {
        return Err(err(body, format!("`fmt ` chunk is {size} bytes, need 16")));
    }
    let mut tag = u16_at(b, body);
    let channels = u16_at(b, body + 2) as usize;
    let sample_rate = u32_at(b, body + 4);
    let block_align = u16_at(b, body + 12) as usize;
    let bits = u16_at(b, body + 14);
    if tag == TAG_EXTENSIBLE {
        if size < 40 {
            return Err(err(body, "extensible `fmt ` chunk shorter than 40 bytes"));
        }
        tag = u16_at(b, body + 24);
    }
    let format = match (tag, bits) {
        (TAG_PCM, 16) => WavFormat::Pcm16,
        (TAG_PCM, 24) => WavFormat::Pcm24,
        (TAG_FLOAT, 32) => WavFormat::Float32,
        _ => return Err(err(body, format!("unsupported codec: format tag {tag}, {bits} bits per sample"))),
    };
    if !(1..=2).contains(&channels) {
        return Err(err(body + 2, format!("unsupported channel count {channels}")));
    }
    if sample_rate == 0 {
        return Err(err(body + 4, "sample rate is zero"));
    }
    if block_align != channels * format.bytes() {
        return Err(err(body + 12, format!("block align {block_align} does not match {channels} x {bits}-bit")));
    }
    Ok(Fmt { format, channels, sample_rate })
}

fn decode(data: &[u8], fmt: &Fmt) -> Vec<Vec<f64>> {
    let width = fmt.format.bytes();
    let frames = data.len() / (width * fmt.channels);
    let mut out = vec![Vec::with_capacity(frames); fmt.channels];
    for frame in data.chunks_exact(width * fmt.channels) {
        for (ch, s) in out.iter_mut().zip(frame.chunks_exact(width)) {
            ch.push(match fmt.format {
                WavFormat::Pcm16 => i16::from_le_bytes([s[0], s[1]]) as f64 / 32_768.0,
                WavFormat::Pcm24 => (i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8) as f64 / 8_388_608.0,
                WavFormat::Float32 => f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64,
            });
        }
    }
    out
}

/// Parses a complete WAV file image.
pub fn parse_wav(b: &[u8]) -> Result<(AudioBuffer, WavFormat)> {
    if b.len() < 12 {
        return Err(err(b.len(), "truncated before the end of the RIFF header"));
    }
    if &b[0..4] != b"RIFF" {
        return Err(err(0, "missing `RIFF` chunk"));
    }
    if &b[8..12] != b"WAVE" {
        return Err(err(8, "RIFF form type is not `WAVE`"));
    }
    let mut pos = 12;
    let mut fmt: Option<Fmt> = None;
    while pos + 8 <= b.len() {
        let id = &b[pos..pos + 4];
        let size = u32_at(b, pos + 4) as usize;
        let body = pos + 8;
        let name = String::from_utf8_lossy(id).into_owned();
        match id {
            b"fmt " => {
                if body + size > b.len() {
                    return Err(err(body, format!("truncated `fmt ` chunk: {size} bytes declared, {} present", b.len() - body)));
                }
                fmt = Some(parse_fmt(b, body, size)?);
            }
            b"data" => {
                let fmt = fmt.ok_or_else(|| err(pos, "missing `fmt ` chunk before `data`"))?;
                if body + size > b.len() {
                    return Err(err(
                        body,
                        format!("truncated `data` chunk: {size} bytes declared, {} present", b.len() - body),
                    ));
                }
                let frame = fmt.format.bytes() * fmt.channels;
                if !size.is_multiple_of(frame) {
                    return Err(err(body, format!("`data` size {size} is not a multiple of the {frame}-byte frame")));
                }
                if size == 0 {
                    return Err(err(body, "`data` chunk holds no samples"));
                }
                let samples = decode(&b[body..body + size], &fmt);
                let audio = AudioBuffer::new(samples, fmt.sample_rate).map_err(|e| err(body, e.to_string()))?;
                return Ok((audio, fmt.format));
            }
            _ => log::debug!("skipping `{name}` chunk at byte {pos}"),
        }
        pos = body + size + (size & 1);
    }
    if fmt.is_none() {
        Err(err(b.len(), "missing `fmt ` chunk"))
    } else {
        Err(err(b.len(), "missing `data` chunk"))
    }
}

pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes).map(|(a, _)| a).map_err(|e| match e {
        Error::Wav { offset, detail } => Error::Wav { offset, detail: format!("{}: {detail}", path.display()) },
        other => other,
    })
}

/// Serializes `audio`. PCM samples are clipped to the representable range.
pub fn encode_wav(audio: &AudioBuffer, format: WavFormat) -> Vec<u8> {
    let ch = audio.channels();
    let width = format.bytes();
    let data_len = audio.len() * ch * width;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.tag().to_le_bytes());
    out.extend_from_slice(&(ch as u16).to_le_bytes());
    out.extend_from_slice(&audio.sample_rate().to_le_bytes());
    out.extend_from_slice(&(audio.sample_rate() * (ch * width) as u32).to_le_bytes());
    out.extend_from_slice(&((ch * width) as u16).to_le_bytes());
    out.extend_from_slice(&((width * 8) as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for i in 0..audio.len() {
        for c in 0..ch {
            let v = audio.channel(c)[i];
            match format {
                WavFormat::Pcm16 => {
                    let q = (v * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
                    out.extend_from_slice(&q.to_le_bytes());
                }
                WavFormat::Pcm24 => {
                    let q = (v * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                    out.extend_from_slice(&q.to_le_bytes()[..3]);
                }
                WavFormat::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    out
}

pub fn write_wav(path: &Path, audio: &AudioBuffer, format: WavFormat) -> Result<()> {
    fs::write(path, encode_wav(audio, format)).map_err(|e| Error::io(path, e))
}
