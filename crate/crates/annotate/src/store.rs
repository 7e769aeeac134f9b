//! On-disk annotation state. The directory is the only source of truth:
//!
//! ```text
//! <root>/images/<id>.png                 native RGB image
//! <root>/masks/<id>.png                  latest submitted mask (bytes as uploaded)
//! <root>/masks/history/<id>.<ts>.png     every overwritten mask
//! <root>/clicks/<id>.log                 "t x y tool button" per line, append-only
//! <root>/labels.tsv                      "<id>\t<label id>"
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use ctxaug_core::dataset::{read_labels, write_labels};
use ctxaug_core::imaging::{decode_image, decode_mask, encode_image, RawImage};
use ctxaug_core::MaskedExample;
use thiserror::Error;

pub const MAX_SCALE: u32 = 8;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("unknown image id '{0}'")]
    UnknownId(String),
    #[error("scale {0} outside 1..={MAX_SCALE}")]
    BadScale(u32),
    #[error("mask is {got:?}, image is {expected:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("malformed PNG: {0}")]
    MalformedStream(String),
    #[error("timestamp {got} precedes {last}")]
    TimestampRegression { last: u64, got: u64 },
    #[error("bad click record: {0}")]
    BadClick(String),
    #[error("no finished annotations to export")]
    NothingToExport,
    #[error("'{id}' cannot be exported: {reason}")]
    InvalidExample { id: String, reason: String },
    #[error("store unavailable: {0}")]
    StoreUnavailable(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, AnnotateError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AnnotateError + '_ {
    move |source| AnnotateError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageStatus {
    Pending,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tool {
    Brush,
    Eraser,
    Polygon,
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tool::Brush => "brush",
            Tool::Eraser => "eraser",
            Tool::Polygon => "polygon",
        })
    }
}

impl FromStr for Tool {
    type Err = AnnotateError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brush" => Ok(Tool::Brush),
            "eraser" => Ok(Tool::Eraser),
            "polygon" => Ok(Tool::Polygon),
            _ => Err(AnnotateError::BadClick(format!("unknown tool '{s}'"))),
        }
    }
}

/// One pointer event in native pixel coordinates, `t` in milliseconds
/// since the session started.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Click {
    pub t: u64,
    pub x: u32,
    pub y: u32,
    pub tool: Tool,
    pub button: u8,
}

impl fmt::Display for Click {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {} {}", self.t, self.x, self.y, self.tool, self.button)
    }
}

impl FromStr for Click {
    type Err = AnnotateError;
    fn from_str(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || AnnotateError::BadClick(format!("expected 't x y tool button', got '{line}'"));
        if f.len() != 5 {
            return Err(bad());
        }
        Ok(Click {
            t: f[0].parse().map_err(|_| bad())?,
            x: f[1].parse().map_err(|_| bad())?,
            y: f[2].parse().map_err(|_| bad())?,
            tool: f[3].parse()?,
            button: f[4].parse().map_err(|_| bad())?,
        })
    }
}

/// Parses a batch of click lines, skipping blank lines.
pub fn parse_clicks(text: &str) -> Result<Vec<Click>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(str::parse).collect()
}

/// Write `bytes` to `path` through a synced temporary file and a rename.
fn write_durable(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().expect("store paths have a parent");
    let tmp = dir.join(format!(".{}.tmp", path.file_name().unwrap().to_string_lossy()));
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn upscale(img: &RawImage, k: usize) -> RawImage {
    RawImage::from_fn(img.width() * k, img.height() * k, |x, y| img.pixel(x / k, y / k)).unwrap()
}

pub struct SessionStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl SessionStore {
    /// Opens (creating subdirectories if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(AnnotateError::StoreUnavailable(format!("{} is not a directory", root.display())));
        }
        for sub in ["images", "masks", "masks/history", "clicks"] {
            let d = root.join(sub);
            fs::create_dir_all(&d).map_err(io_err(&d))?;
        }
        Ok(SessionStore { root, locks: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn image_path(&self, id: &str) -> PathBuf {
        self.root.join("images").join(format!("{id}.png"))
    }

    fn mask_path(&self, id: &str) -> PathBuf {
        self.root.join("masks").join(format!("{id}.png"))
    }

    fn clicks_path(&self, id: &str) -> PathBuf {
        self.root.join("clicks").join(format!("{id}.log"))
    }

    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().unwrap().entry(id.to_string()).or_default().clone()
    }

    fn check_id(&self, id: &str) -> Result<()> {
        if valid_id(id) && self.image_path(id).is_file() {
            Ok(())
        } else {
            Err(AnnotateError::UnknownId(id.to_string()))
        }
    }

    fn native_image(&self, id: &str) -> Result<RawImage> {
        let path = self.image_path(id);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        decode_image(&bytes).map_err(|e| AnnotateError::MalformedStream(e.to_string()))
    }

    /// Adds an image (and its label) to the store.
    pub fn add_image(&self, id: &str, image: &RawImage, label: ctxaug_core::CategoryLabel) -> Result<()> {
        if !valid_id(id) {
            return Err(AnnotateError::UnknownId(id.to_string()));
        }
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        write_durable(&self.image_path(id), &encode_image(image))?;
        let labels_path = self.root.join("labels.tsv");
        let labels_lock = self.lock("\0labels");
        let _labels_guard = labels_lock.lock().unwrap();
        let mut labels = if labels_path.exists() { self.labels()? } else { BTreeMap::new() };
        labels.insert(id.to_string(), label);
        write_labels(&labels_path, &labels).map_err(|e| AnnotateError::StoreUnavailable(e.to_string()))
    }

    fn labels(&self) -> Result<BTreeMap<String, ctxaug_core::CategoryLabel>> {
        let path = self.root.join("labels.tsv");
        if !path.exists() {
            return Ok(BTreeMap::new());
        }
        read_labels(&path).map_err(|e| AnnotateError::StoreUnavailable(e.to_string()))
    }

    /// Every image id with its status, in id order.
    pub fn list_images(&self) -> Result<Vec<(String, ImageStatus)>> {
        let dir = self.root.join("images");
        let entries = fs::read_dir(&dir).map_err(|e| AnnotateError::StoreUnavailable(e.to_string()))?;
        let mut ids = Vec::new();
        for entry in entries {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_some_and(|e| e == "png") {
                if let Some(id) = path.file_stem().and_then(|s| s.to_str()).filter(|s| valid_id(s)) {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids
            .into_iter()
            .map(|id| {
                let status = if self.mask_path(&id).is_file() { ImageStatus::Done } else { ImageStatus::Pending };
                (id, status)
            })
            .collect())
    }

    /// PNG of the image enlarged `scale` times by pixel replication.
    pub fn get_image(&self, id: &str, scale: u32) -> Result<Vec<u8>> {
        if !(1..=MAX_SCALE).contains(&scale) {
            return Err(AnnotateError::BadScale(scale));
        }
        self.check_id(id)?;
        let img = self.native_image(id)?;
        Ok(encode_image(&upscale(&img, scale as usize)))
    }

    /// The stored mask bytes, if one was submitted.
    pub fn get_mask(&self, id: &str) -> Result<Option<Vec<u8>>> {
        self.check_id(id)?;
        let path = self.mask_path(id);
        match fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Stores `png` verbatim as the mask of `id`. A previous mask is moved
    /// to `masks/history/<id>.<unix ms>.png` first.
    pub fn put_mask(&self, id: &str, png: &[u8]) -> Result<()> {
        self.check_id(id)?;
        let mask = decode_mask(png).map_err(|e| AnnotateError::MalformedStream(e.to_string()))?;
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        let img = self.native_image(id)?;
        if mask.dims() != img.dims() {
            return Err(AnnotateError::DimensionMismatch { expected: img.dims(), got: mask.dims() });
        }
        let current = self.mask_path(id);
        if current.is_file() {
            let ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
            let history = self.root.join("masks/history");
            let mut n = 0;
            let backup = loop {
                let name = if n == 0 { format!("{id}.{ms}.png") } else { format!("{id}.{ms}-{n}.png") };
                let p = history.join(name);
                if !p.exists() {
                    break p;
                }
                n += 1;
            };
            let old = fs::read(&current).map_err(io_err(&current))?;
            write_durable(&backup, &old)?;
        }
        write_durable(&current, png)
    }

    /// Previous mask versions of `id`, oldest first.
    pub fn mask_history(&self, id: &str) -> Result<Vec<PathBuf>> {
        self.check_id(id)?;
        let dir = self.root.join("masks/history");
        let prefix = format!("{id}.");
        let mut out: Vec<(u128, usize, PathBuf)> = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            let Some(rest) = name.strip_prefix(&prefix).and_then(|r| r.strip_suffix(".png")) else { continue };
            let (ms, n) = rest.split_once('-').unwrap_or((rest, "0"));
            if let (Ok(ms), Ok(n)) = (ms.parse(), n.parse()) {
                out.push((ms, n, path));
            }
        }
        out.sort();
        Ok(out.into_iter().map(|(_, _, p)| p).collect())
    }

    pub fn clicks(&self, id: &str) -> Result<Vec<Click>> {
        self.check_id(id)?;
        let path = self.clicks_path(id);
        match fs::read_to_string(&path) {
            Ok(text) => parse_clicks(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Appends a batch to the click log of `id`. Timestamps must not go
    /// backwards, within the batch or relative to the stored log.
    pub fn append_clicks(&self, id: &str, batch: &[Click]) -> Result<()> {
        self.check_id(id)?;
        if batch.is_empty() {
            return Ok(());
        }
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        let img = self.native_image(id)?;
        let mut last = self.clicks(id)?.last().map(|c| c.t);
        for c in batch {
            if (c.x as usize) >= img.width() || (c.y as usize) >= img.height() {
                return Err(AnnotateError::BadClick(format!("({}, {}) outside the image", c.x, c.y)));
            }
            if let Some(l) = last.filter(|&l| c.t < l) {
                return Err(AnnotateError::TimestampRegression { last: l, got: c.t });
            }
            last = Some(c.t);
        }
        let path = self.clicks_path(id);
        let text: String = batch.iter().map(|c| format!("{c}\n")).collect();
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        f.write_all(text.as_bytes()).map_err(io_err(&path))?;
        f.sync_all().map_err(io_err(&path))
    }

    /// Writes every finished annotation to `out_dir` in the masked-dataset
    /// layout (images/, masks/, labels.tsv), copying stored bytes unchanged.
    pub fn export(&self, out_dir: &Path) -> Result<usize> {
        let labels = self.labels()?;
        let done: Vec<String> =
            self.list_images()?.into_iter().filter(|(_, s)| *s == ImageStatus::Done).map(|(id, _)| id).collect();
        if done.is_empty() {
            return Err(AnnotateError::NothingToExport);
        }
        let mut picked = BTreeMap::new();
        let mut files = Vec::new();
        for id in &done {
            let lock = self.lock(id);
            let _guard = lock.lock().unwrap();
            let invalid = |reason: String| AnnotateError::InvalidExample { id: id.clone(), reason };
            let label = *labels.get(id).ok_or_else(|| invalid("no label".into()))?;
            let image_path = self.image_path(id);
            let image_bytes = fs::read(&image_path).map_err(io_err(&image_path))?;
            let mask_path = self.mask_path(id);
            let mask_bytes = fs::read(&mask_path).map_err(io_err(&mask_path))?;
            let example = MaskedExample {
                id: id.clone(),
                image: decode_image(&image_bytes).map_err(|e| invalid(e.to_string()))?,
                mask: decode_mask(&mask_bytes).map_err(|e| invalid(e.to_string()))?,
                label,
            };
            example.validate().map_err(|e| invalid(e.to_string()))?;
            picked.insert(id.clone(), label);
            files.push((id.clone(), image_bytes, mask_bytes));
        }
        for sub in ["images", "masks"] {
            let d = out_dir.join(sub);
            fs::create_dir_all(&d).map_err(io_err(&d))?;
        }
        for (id, image, mask) in &files {
            write_durable(&out_dir.join("images").join(format!("{id}.png")), image)?;
            write_durable(&out_dir.join("masks").join(format!("{id}.png")), mask)?;
        }
        let labels_path = out_dir.join("labels.tsv");
        write_labels(&labels_path, &picked).map_err(|e| AnnotateError::StoreUnavailable(e.to_string()))?;
        Ok(files.len())
    }
}
