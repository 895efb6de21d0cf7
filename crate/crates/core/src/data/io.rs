//! CSV and JSON (de)serialization of datasets.
//!
//! CSV layout (UTF-8, header row required, `#` lines are comments):
//!
//! - `participants.csv`: `id`, then one `attr@w<k>` column per attribute and wave
//! - `events.csv`: `source,target,timestamp,channel`
//! - `opinions.csv`: `participant_id,question,wave,stance`
//! - `waves.csv` (optional): `wave,timestamp`
//! - `codebook.json`, `manifest.json` (optional, carries provenance)
//!
//! The JSON mirror is one `dataset.json` object with `participants`, `events`,
//! `opinions` and `waves` arrays using the same field names.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    Channel, Codebook, CommEvent, DataError, Dataset, OpinionRecord, Participant, Provenance, Question, Timestamp,
    Wave, WaveCalendar,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub enum DatasetSource {
    Csv {
        participants: PathBuf,
        events: PathBuf,
        opinions: PathBuf,
        waves: Option<PathBuf>,
        codebook: PathBuf,
        manifest: Option<PathBuf>,
    },
    Json {
        dataset: PathBuf,
        codebook: PathBuf,
        manifest: Option<PathBuf>,
    },
}

impl DatasetSource {
    /// Conventional file names inside `dir`. Optional files are used when present.
    pub fn in_dir(dir: &Path, format: Format) -> Self {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        match format {
            Format::Csv => DatasetSource::Csv {
                participants: dir.join("participants.csv"),
                events: dir.join("events.csv"),
                opinions: dir.join("opinions.csv"),
                waves: opt("waves.csv"),
                codebook: dir.join("codebook.json"),
                manifest: opt("manifest.json"),
            },
            Format::Json => DatasetSource::Json {
                dataset: dir.join("dataset.json"),
                codebook: dir.join("codebook.json"),
                manifest: opt("manifest.json"),
            },
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> DataError {
    DataError::Parse {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_codebook(path: &Path) -> Result<Codebook, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let codebook: Codebook = serde_json::from_str(&text).map_err(|e| DataError::Codebook {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    for (name, kind) in &codebook.attributes {
        if codebook.attribute_kind(name).is_err() {
            return Err(DataError::Codebook {
                path: path.display().to_string(),
                message: format!("unknown attribute type {kind:?} for {name:?}"),
            });
        }
    }
    Ok(codebook)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    provenance: Provenance,
}

fn read_provenance(path: Option<&PathBuf>) -> Result<Provenance, DataError> {
    let Some(path) = path else {
        return Ok(Provenance::Real);
    };
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))?;
    match value.get("provenance") {
        Some(p) => serde_json::from_value(p.clone()).map_err(|e| parse_err(path, 0, e.to_string())),
        None => Ok(Provenance::Real),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, DataError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(file))
}

fn records(path: &Path, expected: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, DataError> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected header {expected:?}, found {got:?}"),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

/// Split an `attr@w<k>` column name.
fn split_column(name: &str) -> Option<(&str, Wave)> {
    let (attr, wave) = name.rsplit_once("@w")?;
    let w: i64 = wave.parse().ok()?;
    (!attr.is_empty() && super::is_valid_wave(w)).then_some((attr, w as Wave))
}

fn cell_value(raw: &str) -> Option<&str> {
    let t = raw.trim();
    (!t.is_empty()).then_some(t)
}

fn read_participants_csv(path: &Path) -> Result<Vec<Participant>, DataError> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    if headers.get(0).map(str::trim) != Some("id") {
        return Err(parse_err(path, 1, "first column must be `id`"));
    }
    let mut columns = Vec::new();
    for h in headers.iter().skip(1) {
        let (attr, wave) = split_column(h.trim())
            .ok_or_else(|| parse_err(path, 1, format!("column {h:?} is not of the form attr@w<1..6>")))?;
        columns.push((attr.to_string(), wave));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let id = cell_value(&rec[0]).ok_or_else(|| parse_err(path, line, "empty participant id"))?;
        let mut p = Participant::new(id);
        for ((attr, wave), raw) in columns.iter().zip(rec.iter().skip(1)) {
            p.set(*wave, attr, cell_value(raw));
        }
        out.push(p);
    }
    Ok(out)
}

fn parse_event(path: &Path, line: u64, f: [&str; 4]) -> Result<CommEvent, DataError> {
    let timestamp: Timestamp = f[2]
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad timestamp {:?}", f[2])))?;
    let channel = Channel::parse(f[3]).ok_or_else(|| parse_err(path, line, format!("bad channel {:?}", f[3])))?;
    Ok(CommEvent {
        source: f[0].trim().to_string(),
        target: f[1].trim().to_string(),
        timestamp,
        channel,
    })
}

fn parse_opinion(path: &Path, line: u64, codebook: &Codebook, f: [&str; 4]) -> Result<OpinionRecord, DataError> {
    let question: Question = f[1]
        .parse()
        .map_err(|e: super::UnknownQuestion| parse_err(path, line, e.to_string()))?;
    let wave: i64 = f[2]
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad wave {:?}", f[2])))?;
    if !super::is_valid_wave(wave) {
        return Err(parse_err(path, line, format!("wave {wave} outside 1..=6")));
    }
    let stance = codebook
        .stance(question, f[3])
        .ok_or_else(|| parse_err(path, line, format!("answer {:?} not in codebook for {question}", f[3])))?;
    Ok(OpinionRecord {
        participant_id: f[0].trim().to_string(),
        question,
        wave: wave as Wave,
        stance,
    })
}

fn read_waves_csv(path: &Path) -> Result<WaveCalendar, DataError> {
    let mut times = BTreeMap::new();
    for (line, rec) in records(path, &["wave", "timestamp"])? {
        let w: i64 = rec[0].trim().parse().map_err(|_| parse_err(path, line, "bad wave"))?;
        let t: Timestamp = rec[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, "bad timestamp"))?;
        if !super::is_valid_wave(w) {
            return Err(parse_err(path, line, format!("wave {w} outside 1..=6")));
        }
        times.insert(w as Wave, t);
    }
    WaveCalendar::new(times).map_err(DataError::Calendar)
}

fn default_calendar(events: &[CommEvent]) -> WaveCalendar {
    let start = events.iter().map(|e| e.timestamp).min().unwrap_or(0);
    let end = events.iter().map(|e| e.timestamp).max().unwrap_or(start + 5);
    WaveCalendar::evenly_spaced(start, end)
}

/// Load and validate a dataset.
pub fn load_dataset(source: &DatasetSource) -> Result<Dataset, DataError> {
    let ds = match source {
        DatasetSource::Csv {
            participants,
            events,
            opinions,
            waves,
            codebook,
            manifest,
        } => {
            let cb = read_codebook(codebook)?;
            let ps = read_participants_csv(participants)?;
            let ev = records(events, &["source", "target", "timestamp", "channel"])?
                .into_iter()
                .map(|(line, r)| parse_event(events, line, [&r[0], &r[1], &r[2], &r[3]]))
                .collect::<Result<Vec<_>, _>>()?;
            let op = records(opinions, &["participant_id", "question", "wave", "stance"])?
                .into_iter()
                .map(|(line, r)| parse_opinion(opinions, line, &cb, [&r[0], &r[1], &r[2], &r[3]]))
                .collect::<Result<Vec<_>, _>>()?;
            let calendar = match waves {
                Some(p) => read_waves_csv(p)?,
                None => default_calendar(&ev),
            };
            let prov = read_provenance(manifest.as_ref())?;
            Dataset::new(ps, ev, op, calendar, cb, prov)?
        }
        DatasetSource::Json {
            dataset,
            codebook,
            manifest,
        } => {
            let cb = read_codebook(codebook)?;
            let text = fs::read_to_string(dataset).map_err(io_err(dataset))?;
            let doc: JsonDataset =
                serde_json::from_str(&text).map_err(|e| parse_err(dataset, e.line() as u64, e.to_string()))?;
            let (ps, ev, op, calendar) = doc.into_parts(dataset, &cb)?;
            let prov = read_provenance(manifest.as_ref())?;
            Dataset::new(ps, ev, op, calendar, cb, prov)?
        }
    };
    let (p, e, o) = ds.counts();
    log::info!("loaded dataset: {p} participants, {e} events, {o} opinion rows");
    Ok(ds)
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEvent {
    source: String,
    target: String,
    timestamp: Timestamp,
    channel: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonOpinion {
    participant_id: String,
    question: String,
    wave: i64,
    stance: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonWave {
    wave: i64,
    timestamp: Timestamp,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonDataset {
    participants: Vec<Map<String, Value>>,
    events: Vec<JsonEvent>,
    opinions: Vec<JsonOpinion>,
    #[serde(default)]
    waves: Vec<JsonWave>,
}

type DatasetParts = (Vec<Participant>, Vec<CommEvent>, Vec<OpinionRecord>, WaveCalendar);

impl JsonDataset {
    fn into_parts(self, path: &Path, cb: &Codebook) -> Result<DatasetParts, DataError> {
        let mut ps = Vec::new();
        for (i, obj) in self.participants.iter().enumerate() {
            let line = i as u64 + 1;
            let id = obj
                .get("id")
                .and_then(Value::as_str)
                .ok_or_else(|| parse_err(path, line, "participant without string `id`"))?;
            let mut p = Participant::new(id);
            for (k, v) in obj.iter().filter(|(k, _)| k.as_str() != "id") {
                let (attr, wave) = split_column(k)
                    .ok_or_else(|| parse_err(path, line, format!("field {k:?} is not of the form attr@w<1..6>")))?;
                let value = match v {
                    Value::Null => None,
                    Value::String(s) => cell_value(s).map(str::to_string),
                    Value::Number(n) => Some(n.to_string()),
                    Value::Bool(b) => Some(b.to_string()),
                    _ => return Err(parse_err(path, line, format!("field {k:?} must be a scalar"))),
                };
                p.set(wave, attr, value.as_deref());
            }
            ps.push(p);
        }
        let ev = self
            .events
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let ts = e.timestamp.to_string();
                parse_event(path, i as u64 + 1, [&e.source, &e.target, &ts, &e.channel])
            })
            .collect::<Result<Vec<_>, _>>()?;
        let op = self
            .opinions
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let w = o.wave.to_string();
                parse_opinion(path, i as u64 + 1, cb, [&o.participant_id, &o.question, &w, &o.stance])
            })
            .collect::<Result<Vec<_>, _>>()?;
        let calendar = if self.waves.is_empty() {
            default_calendar(&ev)
        } else {
            let mut times = BTreeMap::new();
            for w in &self.waves {
                if !super::is_valid_wave(w.wave) {
                    return Err(DataError::Calendar(format!("wave {} outside 1..=6", w.wave)));
                }
                times.insert(w.wave as Wave, w.timestamp);
            }
            WaveCalendar::new(times).map_err(DataError::Calendar)?
        };
        Ok((ps, ev, op, calendar))
    }
}

fn provenance_comment(ds: &Dataset) -> Option<String> {
    match ds.provenance() {
        Provenance::Real => None,
        Provenance::Synthetic { seed, config_hash } => {
            Some(format!("# fairdyn synthetic config_hash={config_hash} seed={seed}\n"))
        }
    }
}

/// All `(attribute, wave)` columns used by any participant, in name then wave order.
fn attribute_columns(ds: &Dataset) -> Vec<(String, Wave)> {
    let cols: BTreeSet<(String, Wave)> = ds
        .participants()
        .iter()
        .flat_map(|p| {
            p.survey_attributes
                .iter()
                .flat_map(|(w, m)| m.keys().map(move |k| (k.clone(), *w)))
        })
        .collect();
    cols.into_iter().collect()
}

fn csv_bytes(comment: &Option<String>, header: &[String], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut buf = Vec::new();
    if let Some(c) = comment {
        buf.extend_from_slice(c.as_bytes());
    }
    let mut w = csv::WriterBuilder::new().from_writer(buf);
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Serialized file contents keyed by file name, in normalized form.
pub fn serialize_dataset(ds: &Dataset, format: Format) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let comment = provenance_comment(ds);
    let cols = attribute_columns(ds);
    let codebook = serde_json::to_vec_pretty(ds.codebook()).expect("codebook serializes");
    files.insert("codebook.json".to_string(), codebook);
    if let Provenance::Synthetic { .. } = ds.provenance() {
        let manifest = serde_json::to_vec_pretty(&Manifest {
            provenance: ds.provenance().clone(),
        })
        .expect("manifest serializes");
        files.insert("manifest.json".to_string(), manifest);
    }
    match format {
        Format::Csv => {
            let mut header = vec!["id".to_string()];
            header.extend(cols.iter().map(|(a, w)| format!("{a}@w{w}")));
            let rows = ds
                .participants()
                .iter()
                .map(|p| {
                    let mut r = vec![p.id.clone()];
                    r.extend(cols.iter().map(|(a, w)| p.attr(*w, a).unwrap_or("").to_string()));
                    r
                })
                .collect();
            files.insert("participants.csv".into(), csv_bytes(&comment, &header, rows));

            let header: Vec<String> = ["source", "target", "timestamp", "channel"].map(String::from).to_vec();
            let rows = ds
                .events()
                .iter()
                .map(|e| {
                    vec![
                        e.source.clone(),
                        e.target.clone(),
                        e.timestamp.to_string(),
                        e.channel.as_str().into(),
                    ]
                })
                .collect();
            files.insert("events.csv".into(), csv_bytes(&comment, &header, rows));

            let header: Vec<String> = ["participant_id", "question", "wave", "stance"]
                .map(String::from)
                .to_vec();
            let rows = ds
                .opinions()
                .iter()
                .map(|o| {
                    vec![
                        o.participant_id.clone(),
                        o.question.shortcode().into(),
                        o.wave.to_string(),
                        o.stance.as_str().into(),
                    ]
                })
                .collect();
            files.insert("opinions.csv".into(), csv_bytes(&comment, &header, rows));

            let header: Vec<String> = ["wave", "timestamp"].map(String::from).to_vec();
            let rows = ds
                .calendar()
                .iter()
                .map(|(w, t)| vec![w.to_string(), t.to_string()])
                .collect();
            files.insert("waves.csv".into(), csv_bytes(&comment, &header, rows));
        }
        Format::Json => {
            let participants = ds
                .participants()
                .iter()
                .map(|p| {
                    let mut m = Map::new();
                    m.insert("id".into(), Value::String(p.id.clone()));
                    for (a, w) in &cols {
                        let v = p.attr(*w, a).map_or(Value::Null, |s| Value::String(s.into()));
                        m.insert(format!("{a}@w{w}"), v);
                    }
                    m
                })
                .collect();
            let doc = JsonDataset {
                participants,
                events: ds
                    .events()
                    .iter()
                    .map(|e| JsonEvent {
                        source: e.source.clone(),
                        target: e.target.clone(),
                        timestamp: e.timestamp,
                        channel: e.channel.as_str().into(),
                    })
                    .collect(),
                opinions: ds
                    .opinions()
                    .iter()
                    .map(|o| JsonOpinion {
                        participant_id: o.participant_id.clone(),
                        question: o.question.shortcode().into(),
                        wave: o.wave as i64,
                        stance: o.stance.as_str().into(),
                    })
                    .collect(),
                waves: ds
                    .calendar()
                    .iter()
                    .map(|(w, t)| JsonWave {
                        wave: w as i64,
                        timestamp: t,
                    })
                    .collect(),
            };
            files.insert(
                "dataset.json".into(),
                serde_json::to_vec_pretty(&doc).expect("dataset serializes"),
            );
        }
    }
    files
}

/// Write the dataset into `dir` using the conventional file names.
pub fn save_dataset(ds: &Dataset, dir: &Path, format: Format) -> Result<Vec<PathBuf>, DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for (name, bytes) in serialize_dataset(ds, format) {
        let path = dir.join(&name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
