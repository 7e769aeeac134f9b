//! Line-oriented provenance manifest.
//!
//! ```text
//! ctxaug-manifest v1
//! 1\t<output_id>\t<fg|->\t<bg|->\t<setup>\t<label_id>\t<ops|->\t<seed>\t<path>
//! ```
//!
//! `ops` is a comma-separated list of `kind:mode:params`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{io_err, CategoryLabel, DatasetError, Result};
use crate::augment::AugmentOpSpec;
use crate::compose::BackgroundSetup;

pub const MANIFEST_HEADER: &str = "ctxaug-manifest v1";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
const NONE: &str = "-";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub output_id: String,
    pub fg_source_id: Option<String>,
    pub bg_source_id: Option<String>,
    pub setup: BackgroundSetup,
    pub ops: Vec<AugmentOpSpec>,
    pub label: CategoryLabel,
    /// Relative to the manifest's directory.
    pub path: String,
    pub seed: u64,
}

fn check_field(line: usize, what: &str, v: &str) -> Result<()> {
    if v.is_empty() || v == NONE || v.contains(['\t', '\n', '\r']) {
        return Err(DatasetError::MalformedRecord { line, reason: format!("{what} '{v}' is not a valid field") });
    }
    Ok(())
}

impl ManifestEntry {
    fn to_line(&self, line: usize) -> Result<String> {
        check_field(line, "output_id", &self.output_id)?;
        check_field(line, "path", &self.path)?;
        for id in [&self.fg_source_id, &self.bg_source_id].into_iter().flatten() {
            check_field(line, "source id", id)?;
        }
        let ops = if self.ops.is_empty() {
            NONE.to_string()
        } else {
            self.ops.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        };
        let mut s = String::new();
        write!(
            s,
            "{MANIFEST_SCHEMA_VERSION}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.output_id,
            self.fg_source_id.as_deref().unwrap_or(NONE),
            self.bg_source_id.as_deref().unwrap_or(NONE),
            self.setup,
            self.label.id(),
            ops,
            self.seed,
            self.path
        )
        .unwrap();
        Ok(s)
    }

    fn parse(line_no: usize, line: &str) -> Result<Self> {
        let bad = |reason: String| DatasetError::MalformedRecord { line: line_no, reason };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(bad(format!("expected 9 fields, found {}", f.len())));
        }
        if f[0] != MANIFEST_SCHEMA_VERSION.to_string() {
            return Err(bad(format!("unsupported schema version '{}'", f[0])));
        }
        let opt = |v: &str| (v != NONE).then(|| v.to_string());
        let label = f[5]
            .parse::<u8>()
            .ok()
            .and_then(CategoryLabel::new)
            .ok_or_else(|| bad(format!("bad label '{}'", f[5])))?;
        let ops = if f[6] == NONE {
            Vec::new()
        } else {
            f[6].split(',').map(|s| s.parse::<AugmentOpSpec>().map_err(|e| bad(e.to_string()))).collect::<Result<_>>()?
        };
        Ok(Self {
            output_id: f[1].to_string(),
            fg_source_id: opt(f[2]),
            bg_source_id: opt(f[3]),
            setup: f[4].parse().map_err(bad)?,
            ops,
            label,
            seed: f[7].parse().map_err(|_| bad(format!("bad seed '{}'", f[7])))?,
            path: f[8].to_string(),
        })
    }
}

pub(crate) fn render_manifest(entries: &[ManifestEntry]) -> Result<String> {
    let mut seen = HashSet::new();
    let mut out = String::new();
    out.push_str(MANIFEST_HEADER);
    out.push('\n');
    for (i, e) in entries.iter().enumerate() {
        if !seen.insert(e.output_id.as_str()) {
            return Err(DatasetError::DuplicateOutputId(e.output_id.clone()));
        }
        out.push_str(&e.to_line(i + 2)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let text = render_manifest(entries)?;
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_manifest(&text)
}

pub(crate) fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(MANIFEST_HEADER) => {}
        other => {
            return Err(DatasetError::MalformedRecord { line: 1, reason: format!("bad header {other:?}") });
        }
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let e = ManifestEntry::parse(i + 2, line)?;
        if !seen.insert(e.output_id.clone()) {
            return Err(DatasetError::DuplicateOutputId(e.output_id));
        }
        entries.push(e);
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{Mode, OpParams};

    fn entry(id: &str) -> ManifestEntry {
        ManifestEntry {
            output_id: id.to_string(),
            fg_source_id: Some("fg1".into()),
            bg_source_id: None,
            setup: BackgroundSetup::GrayBgWithFg,
            ops: vec![
                AugmentOpSpec::new(Mode::Standard, OpParams::Rotate { degrees: 2.75 }).unwrap(),
                AugmentOpSpec::new(Mode::Segmented, OpParams::Translate { dx: 5, dy: -10 }).unwrap(),
            ],
            label: CategoryLabel::new(3).unwrap(),
            path: format!("gray/cat/{id}.png"),
            seed: 42,
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        let mut entries = vec![entry("a"), entry("b"), entry("c")];
        entries[2].ops.clear();
        entries[2].bg_source_id = Some("bg9".into());
        write_manifest(&entries, &path).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), entries);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "1\ta\tfg1\t-\tgray\t3\trotate:standard:2.75,translate:segmented:5/-10\t42\tgray/cat/a.png"
        );
    }

    #[test]
    fn empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        write_manifest(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{MANIFEST_HEADER}\n"));
        assert!(read_manifest(&path).unwrap().is_empty());
    }

    #[test]
    fn duplicates_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        assert!(matches!(write_manifest(&[entry("a"), entry("a")], &path), Err(DatasetError::DuplicateOutputId(id)) if id == "a"));
        let line = entry("a").to_line(2).unwrap();
        let text = format!("{MANIFEST_HEADER}\n{line}\n{line}\n");
        assert!(matches!(parse_manifest(&text), Err(DatasetError::DuplicateOutputId(_))));
    }

    #[test]
    fn malformed_records() {
        for text in [
            "not-a-header\n".to_string(),
            format!("{MANIFEST_HEADER}\n1\ta\tb\n"),
            format!("{MANIFEST_HEADER}\n2\ta\t-\t-\tgray\t3\t-\t1\tp.png\n"),
            format!("{MANIFEST_HEADER}\n1\ta\t-\t-\tgray\t12\t-\t1\tp.png\n"),
            format!("{MANIFEST_HEADER}\n1\ta\t-\t-\tblue\t1\t-\t1\tp.png\n"),
            format!("{MANIFEST_HEADER}\n1\ta\t-\t-\tgray\t1\tspin:x:1\t1\tp.png\n"),
        ] {
            assert!(matches!(parse_manifest(&text), Err(DatasetError::MalformedRecord { .. })), "{text}");
        }
        let mut e = entry("x");
        e.output_id = "has\ttab".into();
        assert!(matches!(render_manifest(&[e]), Err(DatasetError::MalformedRecord { .. })));
    }
}
