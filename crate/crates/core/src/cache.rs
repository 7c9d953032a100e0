//! Binary cache files for built configurations, with a JSON descriptor
//! alongside. A cache entry is keyed by (field, polynomial, method) and
//! carries a checksum so a truncated or edited file is rejected rather
//! than silently mislabelling relations.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coherent::{CoherentConfiguration, RelId, RelationInfo};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"CCFG";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct CacheMeta {
    pub format_version: u32,
    /// Label meanings depend on the element enumeration, which depends on
    /// the building code; refuse entries from other versions.
    pub code_version: String,
    /// Order of the working field.
    pub field_order: usize,
    /// Polynomial mask of the base binary field (0 for odd primes).
    pub poly_mask: u64,
    /// Subfield order when the working field is a tower, else 0.
    pub tower_sub: usize,
    /// What was built (the CLI always caches the full configuration).
    pub variant: String,
    /// formula | orbit.
    pub method: String,
}

impl CacheMeta {
    pub fn key(&self) -> String {
        let tower = if self.tower_sub > 0 {
            format!("_t{}", self.tower_sub)
        } else {
            String::new()
        };
        format!(
            "cc_f{}_p{:x}{}_{}",
            self.field_order, self.poly_mask, tower, self.method
        )
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: CacheMeta,
    fibre: Vec<u8>,
    relations: Vec<RelationInfo>,
    n: usize,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn cache_paths(dir: &Path, meta: &CacheMeta) -> (PathBuf, PathBuf) {
    let key = meta.key();
    (dir.join(format!("{key}.bin")), dir.join(format!("{key}.json")))
}

/// Write the binary entry and its JSON descriptor.
pub fn save(dir: &Path, cc: &CoherentConfiguration, meta: &CacheMeta) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let (bin_path, json_path) = cache_paths(dir, meta);

    let header = Header {
        meta: meta.clone(),
        fibre: cc.fibre.clone(),
        relations: cc.relations.clone(),
        n: cc.n,
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| Error::Cache(format!("header encode: {e}")))?;

    let mut buf = Vec::with_capacity(16 + header_json.len() + cc.rel.len() * 2);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_json);
    for &id in &cc.rel {
        buf.extend_from_slice(&id.to_le_bytes());
    }
    let checksum = fnv1a64(&buf);
    buf.extend_from_slice(&checksum.to_le_bytes());

    let mut f = std::fs::File::create(&bin_path)?;
    f.write_all(&buf)?;

    let descriptor = serde_json::json!({
        "meta": meta,
        "n": cc.n,
        "fibre_sizes": cc.fibre_sizes,
        "relations": cc.relations,
        "checksum": format!("{checksum:016x}"),
    });
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&descriptor).expect("descriptor prints"),
    )?;
    Ok(bin_path)
}

/// Load and validate an entry; the meta must match exactly.
pub fn load(dir: &Path, meta: &CacheMeta) -> Result<Option<CoherentConfiguration>> {
    let (bin_path, _) = cache_paths(dir, meta);
    if !bin_path.exists() {
        return Ok(None);
    }
    let mut buf = Vec::new();
    std::fs::File::open(&bin_path)?.read_to_end(&mut buf)?;
    if buf.len() < 24 || &buf[0..4] != MAGIC {
        return Err(Error::Cache(format!("{}: bad magic", bin_path.display())));
    }
    let body_len = buf.len() - 8;
    let stored = u64::from_le_bytes(buf[body_len..].try_into().unwrap());
    if fnv1a64(&buf[..body_len]) != stored {
        return Err(Error::Cache(format!("{}: checksum mismatch", bin_path.display())));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Cache(format!("{}: format version {version}", bin_path.display())));
    }
    let hlen = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(&buf[12..12 + hlen])
        .map_err(|e| Error::Cache(format!("header decode: {e}")))?;
    if header.meta != *meta {
        // A different build landed on the same key; treat as a miss.
        return Ok(None);
    }
    let matrix = &buf[12 + hlen..body_len];
    if matrix.len() != header.n * header.n * 2 {
        return Err(Error::Cache("matrix length mismatch".into()));
    }
    let rel: Vec<RelId> = matrix
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    if rel.iter().any(|&id| id as usize >= header.relations.len()) {
        return Err(Error::Cache("relation id out of range".into()));
    }
    Ok(Some(CoherentConfiguration::assemble(
        header.fibre,
        rel,
        header.relations,
    )))
}

/// Remove every cache entry in the directory.
pub fn clean(dir: &Path) -> Result<usize> {
    if !dir.exists() {
        return Ok(0);
    }
    let mut removed = 0;
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
        if name.starts_with("cc_") && (name.ends_with(".bin") || name.ends_with(".json")) {
            std::fs::remove_file(&path)?;
            removed += 1;
        }
    }
    Ok(removed)
}

/// Advisory lock file: at most one writer per cache directory.
pub struct CacheLock {
    path: PathBuf,
}

impl CacheLock {
    pub fn acquire(dir: &Path) -> Result<CacheLock> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        for _ in 0..50 {
            match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(CacheLock { path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    std::thread::sleep(std::time::Duration::from_millis(100));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(Error::Cache(format!(
            "cache is locked by another process ({})",
            path.display()
        )))
    }
}

impl Drop for CacheLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
