//! Input traces: file formats and synthetic generators.
//!
//! All three formats are line-oriented text. The first non-blank line is a
//! versioned header starting with `#`; later lines starting with `#` are
//! comments. Fields are separated by whitespace.
//!
//! | file      | header                                   | columns                                   |
//! |-----------|------------------------------------------|-------------------------------------------|
//! | FoV       | `# pcvstream-fov v1`                     | `frame x y z yaw pitch roll`              |
//! | bandwidth | `# pcvstream-bandwidth v1`               | `t_seconds mbps`                          |
//! | tiles     | `# pcvstream-tiles v1 cube_height=H tile_level=L lod_count=N` | `frame tx ty tz a b s1 .. sN` |
//!
//! Angles are degrees, positions meters, LoD sizes cumulative bytes.

mod bandwidth;
mod fov;
mod video;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use bandwidth::{generate_bandwidth, load_bandwidth_trace, save_bandwidth_trace, BandwidthModel, BandwidthSample};
pub use fov::{generate_fov_trace, load_fov_trace, save_fov_trace, FovTraceModel, FovTraceSpec, RandomWalkParams};
pub use video::{generate_video, load_video, save_video, SyntheticVideoSpec, Video};

/// Data lines of a trace file with their 1-based line numbers, after
/// checking the header.
pub(crate) fn read_records(path: &Path, magic: &str) -> Result<(String, Vec<(usize, String)>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&path.display().to_string(), &text, magic)
}

pub(crate) fn parse_records(name: &str, text: &str, magic: &str) -> Result<(String, Vec<(usize, String)>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let header = loop {
        match lines.next() {
            Some((_, "")) => continue,
            Some((n, l)) => break (n, l),
            None => return Err(Error::parse(name, 0, "empty file")),
        }
    };
    let rest = header
        .1
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|h| h.strip_prefix(magic))
        .ok_or_else(|| Error::parse(name, header.0, format!("expected header `# {magic} v1`")))?;
    let mut words = rest.split_whitespace();
    if words.next() != Some("v1") {
        return Err(Error::parse(name, header.0, "unsupported format version"));
    }
    let header_args = words.collect::<Vec<_>>().join(" ");
    let records = lines
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| (n, l.to_string()))
        .collect();
    Ok((header_args, records))
}

pub(crate) fn parse_fields<const N: usize>(name: &str, line: usize, text: &str) -> Result<[f64; N]> {
    let mut out = [0.0f64; N];
    let mut it = text.split_whitespace();
    for (k, slot) in out.iter_mut().enumerate() {
        let tok = it
            .next()
            .ok_or_else(|| Error::parse(name, line, format!("expected {N} fields, found {k}")))?;
        *slot = tok
            .parse()
            .map_err(|_| Error::parse(name, line, format!("bad number `{tok}`")))?;
        if !slot.is_finite() {
            return Err(Error::parse(name, line, format!("non-finite value `{tok}`")));
        }
    }
    if it.next().is_some() {
        return Err(Error::parse(name, line, format!("expected {N} fields, found more")));
    }
    Ok(out)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_comments() {
        let (args, recs) = parse_records(
            "t",
            "\n# pcvstream-fov v1 a=1\n# note\n1 2\n\n3 4\n\n\n",
            "pcvstream-fov",
        )
        .unwrap();
        assert_eq!(args, "a=1");
        assert_eq!(recs, vec![(4, "1 2".to_string()), (6, "3 4".to_string())]);
    }

    #[test]
    fn bad_header() {
        assert!(parse_records("t", "1 2 3\n", "pcvstream-fov").is_err());
        assert!(parse_records("t", "# pcvstream-fov v2\n", "pcvstream-fov").is_err());
        assert!(parse_records("t", "", "pcvstream-fov").is_err());
    }

    #[test]
    fn field_errors_carry_line() {
        let err = parse_fields::<2>("f.txt", 7, "1 x").unwrap_err();
        assert!(err.to_string().contains("f.txt:7"), "{err}");
        assert!(parse_fields::<2>("f", 1, "1").is_err());
        assert!(parse_fields::<2>("f", 1, "1 2 3").is_err());
        assert!(parse_fields::<2>("f", 1, "1 NaN").is_err());
    }
}
