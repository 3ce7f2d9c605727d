//! LMFDB coefficient fetching with an on-disk cache, so everything else
//! stays offline-capable. Fetches go through a pluggable transport; payloads
//! are re-validated locally and written atomically (write-then-rename).

use crate::lfunc::{self, ModularForm};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LmfdbError {
    #[error("offline: populate the cache file {path} manually or enable networking")]
    Offline { path: PathBuf },
    #[error("http error for {url}: {msg}")]
    Http { url: String, msg: String },
    #[error("label {0} not found upstream")]
    NotFound(String),
    #[error("rejected payload for {label}: {reason}")]
    Rejected { label: String, reason: String },
    #[error("label {0} is not of the form N.k.x.y")]
    BadLabel(String),
    #[error("cache io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Minimal HTTP GET abstraction; tests inject stubs, the CLI uses ureq.
pub trait Transport {
    fn get(&self, url: &str) -> Result<String, LmfdbError>;
}

/// Default transport backed by ureq.
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<String, LmfdbError> {
        let resp = ureq::get(url).call().map_err(|e| match e {
            ureq::Error::Status(404, _) => LmfdbError::NotFound(url.to_string()),
            other => LmfdbError::Http {
                url: url.to_string(),
                msg: other.to_string(),
            },
        })?;
        resp.into_string().map_err(|e| LmfdbError::Http {
            url: url.to_string(),
            msg: e.to_string(),
        })
    }
}

/// A validated cache record.
#[derive(Clone, Debug)]
pub struct CacheEntry {
    pub label: String,
    pub fetched_at: std::time::SystemTime,
    pub payload: String,
    pub source_url: String,
}

impl CacheEntry {
    /// The payload must parse as a coefficient file whose label matches.
    pub fn is_valid(&self) -> bool {
        ModularForm::parse(&self.payload)
            .map(|f| f.label == self.label)
            .unwrap_or(false)
    }
}

/// Client configuration: URL template with a `{label}` placeholder, cache
/// directory, and an offline switch.
pub struct LmfdbClient<T: Transport> {
    pub url_template: String,
    pub cache_dir: PathBuf,
    pub offline: bool,
    pub transport: T,
}

pub const DEFAULT_URL_TEMPLATE: &str =
    "https://www.lmfdb.org/ModularForm/GL2/Q/holomorphic/download_qexp/{label}";

impl LmfdbClient<HttpTransport> {
    pub fn new(cache_dir: PathBuf, offline: bool) -> Self {
        LmfdbClient {
            url_template: DEFAULT_URL_TEMPLATE.to_string(),
            cache_dir,
            offline,
            transport: HttpTransport,
        }
    }
}

fn parse_label(label: &str) -> Result<(u64, u32), LmfdbError> {
    let parts: Vec<&str> = label.split('.').collect();
    if parts.len() != 4 {
        return Err(LmfdbError::BadLabel(label.to_string()));
    }
    let level = parts[0]
        .parse()
        .map_err(|_| LmfdbError::BadLabel(label.to_string()))?;
    let weight = parts[1]
        .parse()
        .map_err(|_| LmfdbError::BadLabel(label.to_string()))?;
    Ok((level, weight))
}

impl<T: Transport> LmfdbClient<T> {
    pub fn cache_path(&self, label: &str) -> PathBuf {
        self.cache_dir.join(format!("{label}.coeffs"))
    }

    /// The current cache record for `label`, if any.
    pub fn cache_entry(&self, label: &str) -> Option<CacheEntry> {
        let path = self.cache_path(label);
        let payload = fs::read_to_string(&path).ok()?;
        let fetched_at = fs::metadata(&path)
            .and_then(|m| m.modified())
            .unwrap_or(std::time::UNIX_EPOCH);
        Some(CacheEntry {
            label: label.to_string(),
            fetched_at,
            payload,
            source_url: format!("file://{}", path.display()),
        })
    }

    /// Return validated coefficient-file contents for `label` with a_p at
    /// all primes <= `upto`: from cache when sufficient, else by fetching,
    /// transforming, validating, and caching atomically.
    pub fn fetch_coefficients(&self, label: &str, upto: u64) -> Result<String, LmfdbError> {
        let (level, weight) = parse_label(label)?;
        let path = self.cache_path(label);
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(form) = ModularForm::parse(&text) {
                if cache_sufficient(&form, label, upto) {
                    return Ok(text);
                }
            }
        }
        if self.offline {
            return Err(LmfdbError::Offline { path });
        }
        let url = self.url_template.replace("{label}", label);
        let body = self.transport.get(&url)?;
        let form = transform_payload(&body, label, level, weight)?;
        validate(&form, label, upto)?;
        let payload = form.serialize();
        write_atomic(&path, &payload).map_err(|source| LmfdbError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(payload)
    }
}

fn cache_sufficient(form: &ModularForm, label: &str, upto: u64) -> bool {
    if form.label != label {
        return false;
    }
    (2..=upto).filter(|&p| lfunc::is_prime(p)).all(|p| form.ap.contains_key(&p))
}

/// Accept either the native coefficient-file format or a bare q-expansion
/// list `[a1, a2, a3, ...]` (the download_qexp shape); keep prime indices.
fn transform_payload(
    body: &str,
    label: &str,
    level: u64,
    weight: u32,
) -> Result<ModularForm, LmfdbError> {
    if body.contains("label") {
        let mut form = ModularForm::parse(body).map_err(|e| LmfdbError::Rejected {
            label: label.to_string(),
            reason: e.to_string(),
        })?;
        form.label = form.label.trim().to_string();
        return Ok(form);
    }
    let cleaned: String = body
        .chars()
        .map(|c| if c == '[' || c == ']' || c == ',' { ' ' } else { c })
        .collect();
    let values: Result<Vec<i64>, _> = cleaned.split_whitespace().map(|t| t.parse()).collect();
    let values = values.map_err(|_| LmfdbError::Rejected {
        label: label.to_string(),
        reason: "payload is neither a coefficient file nor an integer list".into(),
    })?;
    if values.first() != Some(&1) {
        return Err(LmfdbError::Rejected {
            label: label.to_string(),
            reason: "q-expansion must be normalized (a_1 = 1)".into(),
        });
    }
    let mut ap = std::collections::BTreeMap::new();
    for (idx, &v) in values.iter().enumerate() {
        let n = idx as u64 + 1;
        if lfunc::is_prime(n) {
            ap.insert(n, v);
        }
    }
    Ok(ModularForm {
        label: label.to_string(),
        weight,
        level,
        ap,
        eps: None,
    })
}

fn validate(form: &ModularForm, label: &str, upto: u64) -> Result<(), LmfdbError> {
    if form.label != label {
        return Err(LmfdbError::Rejected {
            label: label.to_string(),
            reason: format!("payload label {} does not match", form.label),
        });
    }
    if !form.satisfies_deligne_bound() {
        return Err(LmfdbError::Rejected {
            label: label.to_string(),
            reason: "a_p violates the Deligne bound at a good prime".into(),
        });
    }
    let missing: Vec<u64> = (2..=upto)
        .filter(|&p| lfunc::is_prime(p) && !form.ap.contains_key(&p))
        .collect();
    if !missing.is_empty() {
        return Err(LmfdbError::Rejected {
            label: label.to_string(),
            reason: format!("payload missing primes {missing:?}"),
        });
    }
    Ok(())
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("cache"),
        std::process::id()
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
