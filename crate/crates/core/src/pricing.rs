//! Purchase prices and buyability. A local CSV catalog is the single
//! source during search; vendor quotes are fetched only on request and
//! merged only by an explicit sync.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{canonicalize, write_canonical_smiles, Molecule};

pub const DEFAULT_BUYABLE_THRESHOLD: f64 = 100.0;
pub const DEFAULT_NONBUYABLE_CAP: f64 = 500.0;
pub const VENDOR_KEY_ENV: &str = "MHNPATH_VENDOR_KEY";

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("catalog line {line}: {msg}")]
    Catalog { line: u64, msg: String },
    #[error("invalid buyability policy: {0}")]
    Policy(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Thresholds in USD per gram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuyabilityPolicy {
    pub buyable_threshold: f64,
    pub nonbuyable_cap: f64,
}

impl Default for BuyabilityPolicy {
    fn default() -> Self {
        BuyabilityPolicy {
            buyable_threshold: DEFAULT_BUYABLE_THRESHOLD,
            nonbuyable_cap: DEFAULT_NONBUYABLE_CAP,
        }
    }
}

impl BuyabilityPolicy {
    pub fn validate(&self) -> Result<(), PricingError> {
        let (t, c) = (self.buyable_threshold, self.nonbuyable_cap);
        if t.is_finite() && c.is_finite() && 0.0 < t && t <= c {
            Ok(())
        } else {
            Err(PricingError::Policy(format!(
                "need 0 < buyable_threshold <= nonbuyable_cap, got {t} and {c}"
            )))
        }
    }
}

/// Strictly under the threshold; unpriced is never buyable.
pub fn is_buyable(price: Option<f64>, policy: &BuyabilityPolicy) -> bool {
    price.is_some_and(|p| p < policy.buyable_threshold)
}

/// Price clamped to the cap; unpriced molecules cost the cap.
pub fn effective_cost(price: Option<f64>, policy: &BuyabilityPolicy) -> f64 {
    price.map_or(policy.nonbuyable_cap, |p| p.min(policy.nonbuyable_cap))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceEntry {
    pub usd_per_g: f64,
    pub source: String,
    pub retrieved_at: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogRow {
    canonical_smiles: String,
    usd_per_g: f64,
    source: String,
    retrieved_at: String,
}

/// Canonical SMILES to one entry per source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceCatalog {
    entries: BTreeMap<String, Vec<PriceEntry>>,
}

impl PriceCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, PricingError> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    /// Columns: canonical_smiles, usd_per_g, source, retrieved_at.
    /// SMILES are re-canonicalized so hand-written files still key correctly.
    pub fn parse_csv(text: &str) -> Result<Self, PricingError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| PricingError::Catalog { line: 1, msg: e.to_string() })?
            .clone();
        let mut cat = PriceCatalog::new();
        for raw in rdr.records() {
            let raw = raw.map_err(|e| PricingError::Catalog {
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = raw.position().map_or(0, |p| p.line());
            let bad = |msg: String| PricingError::Catalog { line, msg };
            let row: CatalogRow = raw.deserialize(Some(&headers)).map_err(|e| bad(e.to_string()))?;
            let key = canonicalize(&row.canonical_smiles).map_err(|e| bad(e.to_string()))?;
            cat.insert(&key, row.usd_per_g, &row.source, &row.retrieved_at)
                .map_err(|e| bad(e.to_string()))?;
        }
        Ok(cat)
    }

    /// Adds or replaces the entry for (`key`, `source`). `key` must be canonical.
    pub fn insert(&mut self, key: &str, usd_per_g: f64, source: &str, retrieved_at: &str) -> Result<(), PricingError> {
        if !(usd_per_g >= 0.0 && usd_per_g.is_finite()) {
            return Err(PricingError::Catalog {
                line: 0,
                msg: format!("price must be finite and non-negative, got {usd_per_g}"),
            });
        }
        let list = self.entries.entry(key.to_string()).or_default();
        let e = PriceEntry {
            usd_per_g,
            source: source.to_string(),
            retrieved_at: retrieved_at.to_string(),
        };
        match list.iter_mut().find(|x| x.source == source) {
            Some(x) => *x = e,
            None => list.push(e),
        }
        list.sort_by(|a, b| a.source.cmp(&b.source));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self, key: &str) -> &[PriceEntry] {
        self.entries.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Minimum price over sources for a canonical key.
    pub fn price_of_key(&self, key: &str) -> Option<f64> {
        self.entries(key).iter().map(|e| e.usd_per_g).reduce(f64::min)
    }

    /// Rows sorted by key then source.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (k, list) in &self.entries {
            for e in list {
                w.serialize(CatalogRow {
                    canonical_smiles: k.clone(),
                    usd_per_g: e.usd_per_g,
                    source: e.source.clone(),
                    retrieved_at: e.retrieved_at.clone(),
                })
                .expect("in-memory write");
            }
        }
        if self.entries.is_empty() {
            w.write_record(["canonical_smiles", "usd_per_g", "source", "retrieved_at"])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<(), PricingError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Minimum catalog price for the molecule's canonical form.
pub fn lookup_price(catalog: &PriceCatalog, m: &Molecule) -> Option<f64> {
    catalog.price_of_key(&write_canonical_smiles(m))
}

#[derive(Debug, Error)]
pub enum VendorError {
    #[error("vendor rejected the credential (401)")]
    Auth,
    #[error("vendor rate limit (429), retry after {retry_after_s} s")]
    RateLimited { retry_after_s: u64 },
    #[error("vendor unreachable or timed out: {0}")]
    Timeout(String),
    #[error("vendor returned HTTP {0}")]
    Status(u16),
    #[error("malformed vendor response: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Quote {
    pub source: String,
    pub usd_per_g: f64,
}

#[derive(Deserialize)]
struct QuoteResponse {
    quotes: Vec<Quote>,
}

/// Client for the vendor quote protocol: `GET {endpoint}/price?smiles=...`
/// with an `X-Api-Key` header.
#[derive(Debug, Clone)]
pub struct VendorClient {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
    /// 429 responses are retried this many times.
    pub max_retries: u32,
    /// Retry-After values above this are not waited for.
    pub max_wait: Duration,
}

impl VendorClient {
    pub fn new(endpoint: &str, api_key: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        VendorClient {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            agent,
            max_retries: 2,
            max_wait: Duration::from_secs(30),
        }
    }

    /// Credential from `MHNPATH_VENDOR_KEY`.
    pub fn from_env(endpoint: &str, timeout: Duration) -> Option<Self> {
        std::env::var(VENDOR_KEY_ENV)
            .ok()
            .map(|k| Self::new(endpoint, &k, timeout))
    }

    pub fn fetch_quotes(&self, m: &Molecule) -> Result<Vec<Quote>, VendorError> {
        self.fetch_quotes_for_key(&write_canonical_smiles(m))
    }

    pub fn fetch_quotes_for_key(&self, key: &str) -> Result<Vec<Quote>, VendorError> {
        let url = format!("{}/price", self.endpoint);
        let mut attempt = 0;
        loop {
            let resp = self
                .agent
                .get(&url)
                .header("X-Api-Key", &self.api_key)
                .query("smiles", key)
                .call();
            let mut resp = match resp {
                Ok(r) => r,
                Err(e) => return Err(VendorError::Timeout(e.to_string())),
            };
            match resp.status().as_u16() {
                200 => {
                    let body = resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| VendorError::Protocol(e.to_string()))?;
                    let parsed: QuoteResponse =
                        serde_json::from_str(&body).map_err(|e| VendorError::Protocol(e.to_string()))?;
                    if let Some(q) = parsed.quotes.iter().find(|q| !(q.usd_per_g >= 0.0 && q.usd_per_g.is_finite())) {
                        return Err(VendorError::Protocol(format!("invalid price {}", q.usd_per_g)));
                    }
                    return Ok(parsed.quotes);
                }
                401 => return Err(VendorError::Auth),
                429 => {
                    let retry_after_s = resp
                        .headers()
                        .get("retry-after")
                        .and_then(|v| v.to_str().ok())
                        .and_then(|v| v.trim().parse::<u64>().ok())
                        .unwrap_or(1);
                    let wait = Duration::from_secs(retry_after_s);
                    if attempt >= self.max_retries || wait > self.max_wait {
                        return Err(VendorError::RateLimited { retry_after_s });
                    }
                    attempt += 1;
                    log::info!("vendor rate limited, retrying in {retry_after_s} s");
                    std::thread::sleep(wait);
                }
                s => return Err(VendorError::Status(s)),
            }
        }
    }
}

/// Quotes for every key with at most `parallelism` requests in flight.
/// Results are in input order. Failures are logged and yield no quotes,
/// except `Auth`, which aborts.
pub fn fetch_all(
    client: &VendorClient,
    keys: &[String],
    parallelism: usize,
) -> Result<Vec<(String, Vec<Quote>)>, VendorError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| VendorError::Protocol(e.to_string()))?;
    let results: Vec<Result<Vec<Quote>, VendorError>> =
        pool.install(|| keys.par_iter().map(|k| client.fetch_quotes_for_key(k)).collect());
    let mut out = Vec::with_capacity(keys.len());
    for (k, r) in keys.iter().zip(results) {
        match r {
            Ok(q) => out.push((k.clone(), q)),
            Err(VendorError::Auth) => return Err(VendorError::Auth),
            Err(e) => {
                log::warn!("no quotes for {k}: {e}; keeping catalog prices");
                out.push((k.clone(), Vec::new()));
            }
        }
    }
    Ok(out)
}

/// Merge fetched quotes into the catalog, stamping each with `retrieved_at`.
pub fn merge_quotes(catalog: &mut PriceCatalog, quotes: &[(String, Vec<Quote>)], retrieved_at: &str) -> usize {
    let mut n = 0;
    for (k, qs) in quotes {
        for q in qs {
            if catalog.insert(k, q.usd_per_g, &q.source, retrieved_at).is_ok() {
                n += 1;
            }
        }
    }
    n
}
