//! On-disk formats.
//!
//! Tag and symbol files start with one text header line,
//! `<kind> v<version> key=value ...`, followed by the payload. Tag payloads
//! are 9-byte records (channel, then time in ps as u64 little-endian) or, in
//! the CSV form, `channel,time_ps` rows under a `# `-prefixed header.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::extractor::pack_symbols;
use crate::protocol::SymbolStream;
use crate::sim::franson::FringePoint;
use crate::sim::{Provenance, TimeTag};

pub const FORMAT_VERSION: u32 = 1;
pub const TAGS_KIND: &str = "hdqrng-tags";
pub const SYMBOLS_KIND: &str = "hdqrng-symbols";
pub const FRINGE_KIND: &str = "hdqrng-fringe";
const TAG_RECORD_BYTES: usize = 9;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub kind: String,
    pub version: u32,
    pub fields: BTreeMap<String, String>,
}

impl Header {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            version: FORMAT_VERSION,
            fields: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.insert(key.to_string(), value.to_string());
        self
    }

    pub fn render(&self) -> String {
        let mut s = format!("{} v{}", self.kind, self.version);
        for (k, v) in &self.fields {
            s.push(' ');
            s.push_str(k);
            s.push('=');
            s.push_str(v);
        }
        s
    }

    pub fn parse(line: &str, path: &Path) -> Result<Self> {
        let mut parts = line.split_whitespace();
        let kind = parts.next().ok_or_else(|| Error::format(path, "empty header"))?;
        let version = parts
            .next()
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::format(path, "missing format version"))?;
        if version != FORMAT_VERSION {
            return Err(Error::format(path, format!("unsupported format version {version}")));
        }
        let mut fields = BTreeMap::new();
        for kv in parts {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::format(path, format!("malformed header field '{kv}'")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        Ok(Self {
            kind: kind.to_string(),
            version,
            fields,
        })
    }

    pub fn expect_kind(&self, kind: &str, path: &Path) -> Result<()> {
        if self.kind != kind {
            return Err(Error::format(path, format!("expected a {kind} file, found {}", self.kind)));
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        let raw = self
            .fields
            .get(key)
            .ok_or_else(|| Error::format(path, format!("header lacks '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::format(path, format!("header field {key}={raw} does not parse")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagFormat {
    Binary,
    Csv,
}

impl TagFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TagFormat::Binary => "tags",
            TagFormat::Csv => "csv",
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(fs::File::open(path).map_err(|e| Error::io(path, e))?))
}

fn read_header_line<R: BufRead>(reader: &mut R, path: &Path) -> Result<String> {
    let mut buf = Vec::new();
    reader
        .read_until(b'\n', &mut buf)
        .map_err(|e| Error::io(path, e))?;
    if buf.last() != Some(&b'\n') {
        return Err(Error::format(path, "missing header line"));
    }
    buf.pop();
    String::from_utf8(buf).map_err(|_| Error::format(path, "header is not UTF-8"))
}

pub fn write_tags(path: &Path, header: &Header, tags: &[TimeTag], format: TagFormat) -> Result<()> {
    let mut w = create(path)?;
    let header = header.clone().with("count", tags.len());
    let res = (|| -> std::io::Result<()> {
        match format {
            TagFormat::Binary => {
                writeln!(w, "{}", header.render())?;
                for t in tags {
                    w.write_all(&[t.channel])?;
                    w.write_all(&t.time_ps.to_le_bytes())?;
                }
            }
            TagFormat::Csv => {
                writeln!(w, "# {}", header.render())?;
                writeln!(w, "channel,time_ps")?;
                for t in tags {
                    writeln!(w, "{},{}", t.channel, t.time_ps)?;
                }
            }
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

fn tag(channel: u8, time_ps: u64) -> TimeTag {
    TimeTag {
        channel,
        time_ps,
        provenance: Provenance::Unknown,
    }
}

/// Reads either tag format; the form is recognised from the first byte.
pub fn read_tags(path: &Path) -> Result<(Header, Vec<TimeTag>)> {
    let mut r = open(path)?;
    let line = read_header_line(&mut r, path)?;
    let tags = if let Some(rest) = line.strip_prefix("# ") {
        let header = Header::parse(rest, path)?;
        header.expect_kind(TAGS_KIND, path)?;
        let mut tags = Vec::new();
        for (i, row) in r.lines().enumerate() {
            let row = row.map_err(|e| Error::io(path, e))?;
            if i == 0 && row.trim() == "channel,time_ps" {
                continue;
            }
            if row.trim().is_empty() {
                continue;
            }
            let bad = || Error::format(path, format!("bad CSV row {}: '{row}'", i + 2));
            let (c, t) = row.split_once(',').ok_or_else(bad)?;
            tags.push(tag(
                c.trim().parse().map_err(|_| bad())?,
                t.trim().parse().map_err(|_| bad())?,
            ));
        }
        (header, tags)
    } else {
        let header = Header::parse(&line, path)?;
        header.expect_kind(TAGS_KIND, path)?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
        if payload.len() % TAG_RECORD_BYTES != 0 {
            return Err(Error::format(path, "truncated tag record"));
        }
        let tags = payload
            .chunks_exact(TAG_RECORD_BYTES)
            .map(|rec| tag(rec[0], u64::from_le_bytes(rec[1..].try_into().unwrap())))
            .collect();
        (header, tags)
    };
    let (header, tags) = tags;
    if let Some(count) = header.fields.get("count") {
        if count.parse::<usize>().ok() != Some(tags.len()) {
            return Err(Error::format(path, format!("header count {count} but {} records", tags.len())));
        }
    }
    Ok((header, tags))
}

pub fn write_symbols(path: &Path, header: &Header, stream: &SymbolStream) -> Result<()> {
    let sample_bits = stream.n_d.trailing_zeros();
    let packed = pack_symbols(&stream.symbols, sample_bits)?;
    let header = header
        .clone()
        .with("delta_ps", stream.delta_ps)
        .with("n_d", stream.n_d)
        .with("n_t", stream.n_t)
        .with("p_alpha_est", stream.p_alpha_est)
        .with("frames_total", stream.frames_total)
        .with("frames_empty", stream.frames_empty)
        .with("frames_multi", stream.frames_multi);
    let mut w = create(path)?;
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "{}", header.render())?;
        w.write_all(&packed.to_bytes_le())?;
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_symbols(path: &Path) -> Result<(Header, SymbolStream)> {
    let mut r = open(path)?;
    let header = Header::parse(&read_header_line(&mut r, path)?, path)?;
    header.expect_kind(SYMBOLS_KIND, path)?;
    let n_d: u32 = header.get("n_d", path)?;
    if !n_d.is_power_of_two() || n_d < 2 {
        return Err(Error::format(path, format!("n_d = {n_d} is not a power of two")));
    }
    let n_t: u64 = header.get("n_t", path)?;
    let sample_bits = n_d.trailing_zeros();
    let total_bits = n_t as usize * sample_bits as usize;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    if payload.len() != total_bits.div_ceil(8) {
        return Err(Error::format(
            path,
            format!("payload has {} bytes, header implies {}", payload.len(), total_bits.div_ceil(8)),
        ));
    }
    let bits = BitString::from_bytes_le(&payload, total_bits);
    let symbols = (0..n_t as usize)
        .map(|i| bits.read_bits(i * sample_bits as usize, sample_bits) as u32)
        .collect();
    let stream = SymbolStream {
        symbols,
        n_d,
        delta_ps: header.get("delta_ps", path)?,
        n_t,
        p_alpha_est: header.get("p_alpha_est", path)?,
        frames_total: header.get("frames_total", path)?,
        frames_empty: header.get("frames_empty", path)?,
        frames_multi: header.get("frames_multi", path)?,
    };
    Ok((header, stream))
}

/// One row of a fringe file: the monitoring slice it belongs to and the point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeRow {
    pub slice: u32,
    pub point: FringePoint,
}

pub fn write_fringe(path: &Path, header: &Header, rows: &[FringeRow]) -> Result<()> {
    let mut w = create(path)?;
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "# {}", header.render())?;
        writeln!(w, "slice,phase,coincidences,accidentals")?;
        for r in rows {
            writeln!(
                w,
                "{},{:?},{},{}",
                r.slice, r.point.phase, r.point.coincidences, r.point.accidentals
            )?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_fringe(path: &Path) -> Result<(Header, Vec<FringeRow>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::format(path, "empty fringe file"))?;
    let header = Header::parse(
        first
            .strip_prefix("# ")
            .ok_or_else(|| Error::format(path, "missing header line"))?,
        path,
    )?;
    header.expect_kind(FRINGE_KIND, path)?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() || (i == 0 && line.starts_with("slice")) {
            continue;
        }
        let bad = || Error::format(path, format!("bad fringe row {}: '{line}'", i + 2));
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(bad());
        }
        rows.push(FringeRow {
            slice: cols[0].parse().map_err(|_| bad())?,
            point: FringePoint {
                phase: cols[1].parse().map_err(|_| bad())?,
                coincidences: cols[2].parse().map_err(|_| bad())?,
                accidentals: cols[3].parse().map_err(|_| bad())?,
            },
        });
    }
    Ok((header, rows))
}

/// Groups fringe rows by slice, in slice order.
pub fn fringe_slices(rows: &[FringeRow]) -> Vec<(u32, Vec<FringePoint>)> {
    let mut map: BTreeMap<u32, Vec<FringePoint>> = BTreeMap::new();
    for r in rows {
        map.entry(r.slice).or_default().push(r.point);
    }
    map.into_iter().collect()
}

pub fn write_bits(path: &Path, bits: &BitString) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(&bits.to_bytes_le())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads a raw bit file. `len` defaults to every bit in the file.
pub fn read_bits(path: &Path, len: Option<usize>) -> Result<BitString> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let available = bytes.len() * 8;
    let len = len.unwrap_or(available);
    if len > available {
        return Err(Error::format(path, format!("file holds {available} bits, {len} required")));
    }
    Ok(BitString::from_bytes_le(&bytes, len))
}

/// Reads the first `bits` bits of a seed file, refusing files that are too short.
pub fn read_seed(path: &Path, bits: usize) -> Result<BitString> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() * 8 < bits {
        return Err(Error::LengthMismatch {
            expected: bits,
            got: bytes.len() * 8,
        });
    }
    Ok(BitString::from_bytes_le(&bytes, bits))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_digest: String,
    pub master_seed: u64,
    pub artifacts: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(config_digest: &str, master_seed: u64) -> Self {
        Self {
            config_digest: config_digest.to_string(),
            master_seed,
            artifacts: Vec::new(),
        }
    }

    /// Records `path` relative to `root`.
    pub fn add(&mut self, root: &Path, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let rel: PathBuf = path.strip_prefix(root).unwrap_or(path).to_path_buf();
        let rel = rel.to_string_lossy().replace('\\', "/");
        self.artifacts.retain(|a| a.path != rel);
        self.artifacts.push(ManifestEntry {
            path: rel,
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }
}
