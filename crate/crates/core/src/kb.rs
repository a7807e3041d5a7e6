//! Entity knowledge base: id/name mapping plus geographic facts.
//!
//! Ingested from TSV with columns `entity_id  name  lat  lon  country` and
//! an optional sixth `wikidata_id` column (e.g. `Q90`). Empty cells mean
//! unknown. A first row whose first cell is `entity_id` is taken as a
//! header. Names are NFC-normalized.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use crate::codec::{self, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::store::EntitySelector;

const MAGIC: &[u8; 8] = b"ENTITYKB";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Coord {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EntityRecord {
    pub entity_id: u64,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coord: Option<Coord>,
    /// Country entity identifier, e.g. `Q142`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wikidata_id: Option<String>,
}

impl EntityRecord {
    pub fn new(entity_id: u64, name: impl Into<String>) -> Self {
        EntityRecord { entity_id, name: name.into(), coord: None, country: None, wikidata_id: None }
    }

    pub fn at(mut self, lat: f64, lon: f64) -> Self {
        self.coord = Some(Coord { lat, lon });
        self
    }

    pub fn in_country(mut self, country: impl Into<String>) -> Self {
        self.country = Some(country.into());
        self
    }

    pub fn with_wikidata_id(mut self, qid: impl Into<String>) -> Self {
        self.wikidata_id = Some(qid.into());
        self
    }

    fn check(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::schema(format!("entity {}: empty name", self.entity_id)));
        }
        if let Some(c) = self.coord {
            if !(-90.0..=90.0).contains(&c.lat) {
                return Err(Error::schema(format!("entity {}: latitude {} outside [-90, 90]", self.entity_id, c.lat)));
            }
            if !(-180.0..=180.0).contains(&c.lon) {
                return Err(Error::schema(format!("entity {}: longitude {} outside [-180, 180]", self.entity_id, c.lon)));
            }
        }
        Ok(())
    }
}

/// Axis-aligned box in degrees, edges inclusive. Boxes crossing the
/// antimeridian are not supported.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self> {
        let finite = [min_lat, min_lon, max_lat, max_lon].iter().all(|v| v.is_finite());
        if !finite || min_lat > max_lat || min_lon > max_lon {
            return Err(Error::usage(format!(
                "invalid bounding box ({min_lat},{min_lon},{max_lat},{max_lon}): need min <= max on both axes"
            )));
        }
        Ok(BoundingBox { min_lat, max_lat, min_lon, max_lon })
    }

    pub fn world() -> Self {
        BoundingBox { min_lat: -90.0, max_lat: 90.0, min_lon: -180.0, max_lon: 180.0 }
    }

    pub fn contains(&self, c: Coord) -> bool {
        (self.min_lat..=self.max_lat).contains(&c.lat) && (self.min_lon..=self.max_lon).contains(&c.lon)
    }
}

/// Parses `min_lat,min_lon,max_lat,max_lon`.
impl FromStr for BoundingBox {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::usage(format!("bbox {s:?}: expected four comma-separated numbers")))?;
        match parts[..] {
            [a, b, c, d] => BoundingBox::new(a, b, c, d),
            _ => Err(Error::usage(format!("bbox {s:?}: expected min_lat,min_lon,max_lat,max_lon"))),
        }
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.min_lat, self.min_lon, self.max_lat, self.max_lon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionFilter {
    BBox(BoundingBox),
    /// Matches the country relation, not geometric containment.
    Country(String),
}

impl RegionFilter {
    pub fn matches(&self, r: &EntityRecord) -> bool {
        match self {
            RegionFilter::BBox(b) => r.coord.is_some_and(|c| b.contains(c)),
            RegionFilter::Country(q) => r.country.as_deref() == Some(q.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct RejectedRow {
    /// 1-based row number in the input, or position in the record stream.
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct KbIngestReport {
    pub accepted: usize,
    pub rejected: Vec<RejectedRow>,
}

#[derive(Debug, Default)]
pub struct KnowledgeBase {
    records: Vec<EntityRecord>,
    by_id: HashMap<u64, usize>,
    by_name: HashMap<String, usize>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a KB from records, rejecting rows that break an invariant.
    pub fn from_records(rows: impl IntoIterator<Item = EntityRecord>) -> (Self, KbIngestReport) {
        let mut kb = KnowledgeBase::new();
        let report = kb.ingest(rows.into_iter().map(Ok));
        (kb, report)
    }

    /// Adds rows; invalid, duplicate-id and duplicate-name rows are
    /// rejected and reported.
    pub fn ingest(&mut self, rows: impl IntoIterator<Item = Result<EntityRecord>>) -> KbIngestReport {
        let mut report = KbIngestReport::default();
        for (i, row) in rows.into_iter().enumerate() {
            match row.and_then(|r| self.insert(r)) {
                Ok(()) => report.accepted += 1,
                Err(e) => report.rejected.push(RejectedRow { row: i + 1, reason: e.to_string() }),
            }
        }
        report
    }

    pub fn insert(&mut self, mut record: EntityRecord) -> Result<()> {
        record.name = record.name.nfc().collect();
        record.check()?;
        if self.by_id.contains_key(&record.entity_id) {
            return Err(Error::Duplicate(format!("entity id {}", record.entity_id)));
        }
        if self.by_name.contains_key(&record.name) {
            return Err(Error::Duplicate(format!("entity name {:?}", record.name)));
        }
        let idx = self.records.len();
        self.by_id.insert(record.entity_id, idx);
        self.by_name.insert(record.name.clone(), idx);
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EntityRecord] {
        &self.records
    }

    pub fn get(&self, id: u64) -> Option<&EntityRecord> {
        self.by_id.get(&id).map(|&i| &self.records[i])
    }

    pub fn get_by_name(&self, name: &str) -> Option<&EntityRecord> {
        let name: String = name.nfc().collect();
        self.by_name.get(&name).map(|&i| &self.records[i])
    }

    pub fn lookup(&self, selector: &EntitySelector) -> Result<&EntityRecord> {
        match selector {
            EntitySelector::Id(id) => self.get(*id).ok_or_else(|| Error::NotFound(format!("entity id {id}"))),
            EntitySelector::Name(n) => self.get_by_name(n).ok_or_else(|| Error::NotFound(format!("entity {n:?}"))),
        }
    }

    /// Records matching the filter, ordered by entity id.
    pub fn query_entities(&self, filter: &RegionFilter) -> Vec<&EntityRecord> {
        let mut out: Vec<_> = self.records.iter().filter(|r| filter.matches(r)).collect();
        out.sort_by_key(|r| r.entity_id);
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        codec::write_atomic(path, |enc| self.encode(enc).map_err(Error::from))
    }

    fn encode<W: Write>(&self, enc: &mut Encoder<W>) -> std::io::Result<()> {
        enc.header(MAGIC, VERSION)?;
        enc.len(self.records.len())?;
        for r in &self.records {
            enc.u64(r.entity_id)?;
            enc.str(&r.name)?;
            match r.coord {
                Some(c) => {
                    enc.u8(1)?;
                    enc.f64(c.lat)?;
                    enc.f64(c.lon)?;
                }
                None => enc.u8(0)?,
            }
            enc.opt_str(r.country.as_deref())?;
            enc.opt_str(r.wikidata_id.as_deref())?;
        }
        Ok(())
    }

    pub fn open(path: &Path) -> Result<Self> {
        let buf = fs::read(path)?;
        let mut dec = Decoder::new(&buf);
        dec.header(MAGIC, VERSION)?;
        let n = dec.len(15)?;
        let mut kb = KnowledgeBase::new();
        for _ in 0..n {
            let entity_id = dec.u64()?;
            let name = dec.str()?;
            let coord = match dec.u8()? {
                0 => None,
                1 => Some(Coord { lat: dec.f64()?, lon: dec.f64()? }),
                t => return Err(Error::corrupt(format!("bad coordinate tag {t}"))),
            };
            let country = dec.opt_str()?;
            let wikidata_id = dec.opt_str()?;
            kb.insert(EntityRecord { entity_id, name, coord, country, wikidata_id })
                .map_err(|e| Error::corrupt(format!("stored record invalid: {e}")))?;
        }
        dec.finish()?;
        Ok(kb)
    }
}

/// Reads KB rows from TSV. Each item is one data row; malformed rows come
/// back as errors so the caller can report them alongside rejected ones.
pub fn read_tsv<R: BufRead>(reader: R) -> impl Iterator<Item = Result<EntityRecord>> {
    reader
        .lines()
        .enumerate()
        .filter(|(i, line)| match line {
            Ok(l) => !l.trim().is_empty() && !(*i == 0 && l.split('\t').next() == Some("entity_id")),
            Err(_) => true,
        })
        .map(|(i, line)| parse_tsv_row(&line?).map_err(|e| Error::schema(format!("line {}: {e}", i + 1))))
}

fn parse_tsv_row(line: &str) -> Result<EntityRecord> {
    let cells: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
    if !(5..=6).contains(&cells.len()) {
        return Err(Error::schema(format!("expected 5 or 6 tab-separated columns, found {}", cells.len())));
    }
    let entity_id = cells[0].trim().parse().map_err(|_| Error::schema(format!("bad entity_id {:?}", cells[0])))?;
    let num = |s: &str| -> Result<Option<f64>> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| Error::schema(format!("bad coordinate {s:?}")))
    };
    let coord = match (num(cells[2])?, num(cells[3])?) {
        (Some(lat), Some(lon)) => Some(Coord { lat, lon }),
        (None, None) => None,
        _ => return Err(Error::schema("latitude and longitude must both be present or both empty")),
    };
    let opt = |s: &str| Some(s.trim()).filter(|s| !s.is_empty()).map(str::to_owned);
    Ok(EntityRecord {
        entity_id,
        name: cells[1].to_owned(),
        coord,
        country: opt(cells[4]),
        wikidata_id: cells.get(5).and_then(|s| opt(s)),
    })
}
