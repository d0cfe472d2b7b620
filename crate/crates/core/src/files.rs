//! Kernel, plan, observation and estimate files.
//!
//! Every file is a self-describing document with a JSON header and a set of
//! named `f64` arrays. Complex data is stored as interleaved `re, im` pairs,
//! matrices row-major, port indices 1-based. Two encodings carry the same
//! fields:
//!
//! * binary (any extension other than `.json`):
//!   ```text
//!   b"SBARFILE" | u32 version | u32 document kind | u64 header length
//!   | header (UTF-8 JSON) | arrays, f64 little-endian, in header order
//!   ```
//!   The header lists the arrays as `"arrays": [{"name": .., "len": ..}]`.
//! * text (`.json`): one JSON object holding the header fields, `"format":
//!   "sbar"`, `"version"`, `"type"`, and each array under its name.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{ChannelModel, ChannelRealization, PilotObservation};
use crate::kernels::{Kernel, KernelKind, LengthUnit};
use crate::plan::{Reconstruction, SamplingPlan};

pub const MAGIC: &[u8; 8] = b"SBARFILE";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Binary,
    Json,
}

impl Encoding {
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Encoding::Json,
            _ => Encoding::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum DocumentKind {
    Kernel = 1,
    Plan = 2,
    Observation = 3,
    Estimate = 4,
    Channel = 5,
}

impl DocumentKind {
    fn name(self) -> &'static str {
        match self {
            DocumentKind::Kernel => "kernel",
            DocumentKind::Plan => "plan",
            DocumentKind::Observation => "observation",
            DocumentKind::Estimate => "estimate",
            DocumentKind::Channel => "channel",
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        [Self::Kernel, Self::Plan, Self::Observation, Self::Estimate, Self::Channel]
            .into_iter()
            .find(|k| *k as u32 == code)
    }

    fn from_name(name: &str) -> Option<Self> {
        [Self::Kernel, Self::Plan, Self::Observation, Self::Estimate, Self::Channel]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

/// Header fields plus named arrays, independent of encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub kind: DocumentKind,
    pub header: Map<String, Value>,
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl Document {
    fn new(kind: DocumentKind, header: Value) -> Self {
        let header = match header {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Self {
            kind,
            header,
            arrays: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, data: Vec<f64>) {
        self.arrays.push((name.to_owned(), data));
    }

    fn array(&self, name: &str, path: &Path) -> Result<&[f64]> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
            .ok_or_else(|| Error::format(path, format!("missing array `{name}`")))
    }

    fn field<T: for<'de> Deserialize<'de>>(&self, path: &Path) -> Result<T> {
        serde_json::from_value(Value::Object(self.header.clone()))
            .map_err(|e| Error::format(path, format!("bad header: {e}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = self.header.clone();
        header.insert(
            "arrays".into(),
            Value::Array(
                self.arrays
                    .iter()
                    .map(|(n, d)| json!({ "name": n, "len": d.len() }))
                    .collect(),
            ),
        );
        let header = serde_json::to_vec(&Value::Object(header)).expect("header serializes");
        let payload: usize = self.arrays.iter().map(|(_, d)| d.len() * 8).sum();
        let mut out = Vec::with_capacity(24 + header.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind as u32).to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, data) in &self.arrays {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::format(path, reason);
        if bytes.len() < 24 || &bytes[..8] != MAGIC {
            return Err(bad("not an sbar binary file"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = word(8);
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let kind = DocumentKind::from_code(word(12)).ok_or_else(|| bad("unknown document kind"))?;
        let header_len = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let header_end = 24usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let mut header: Map<String, Value> =
            serde_json::from_slice(&bytes[24..header_end]).map_err(|e| bad(&format!("bad header: {e}")))?;
        #[derive(Deserialize)]
        struct Entry {
            name: String,
            len: usize,
        }
        let entries: Vec<Entry> = header
            .remove("arrays")
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| bad(&format!("bad array table: {e}")))?
            .unwrap_or_default();
        let mut at = header_end;
        let mut arrays = Vec::with_capacity(entries.len());
        for e in entries {
            let end = e
                .len
                .checked_mul(8)
                .and_then(|n| at.checked_add(n))
                .filter(|&end| end <= bytes.len())
                .ok_or_else(|| bad("truncated payload"))?;
            let data = bytes[at..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push((e.name, data));
            at = end;
        }
        if at != bytes.len() {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Self { kind, header, arrays })
    }

    pub fn to_json(&self) -> String {
        let mut obj = Map::new();
        obj.insert("format".into(), json!("sbar"));
        obj.insert("version".into(), json!(FORMAT_VERSION));
        obj.insert("type".into(), json!(self.kind.name()));
        for (k, v) in &self.header {
            obj.insert(k.clone(), v.clone());
        }
        for (name, data) in &self.arrays {
            obj.insert(name.clone(), json!(data));
        }
        serde_json::to_string_pretty(&Value::Object(obj)).expect("document serializes")
    }

    pub fn from_json(text: &str, path: &Path, array_names: &[&str]) -> Result<Self> {
        let bad = |reason: String| Error::format(path, reason);
        let mut obj: Map<String, Value> = serde_json::from_str(text).map_err(|e| bad(format!("bad JSON: {e}")))?;
        if obj.remove("format") != Some(json!("sbar")) {
            return Err(bad("not an sbar document".into()));
        }
        match obj.remove("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            other => return Err(bad(format!("unsupported version {other:?}"))),
        }
        let kind = obj
            .remove("type")
            .and_then(|v| v.as_str().and_then(DocumentKind::from_name))
            .ok_or_else(|| bad("unknown document type".into()))?;
        let mut arrays = Vec::new();
        for &name in array_names {
            if let Some(v) = obj.remove(name) {
                let data: Vec<f64> =
                    serde_json::from_value(v).map_err(|e| bad(format!("array `{name}`: {e}")))?;
                arrays.push((name.to_owned(), data));
            }
        }
        Ok(Self {
            kind,
            header: obj,
            arrays,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        match Encoding::for_path(path) {
            Encoding::Binary => f.write_all(&self.to_bytes())?,
            Encoding::Json => {
                f.write_all(self.to_json().as_bytes())?;
                f.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn read(path: &Path, expected: DocumentKind, array_names: &[&str]) -> Result<Self> {
        let doc = match Encoding::for_path(path) {
            Encoding::Binary => Self::from_bytes(&fs::read(path)?, path)?,
            Encoding::Json => Self::from_json(&fs::read_to_string(path)?, path, array_names)?,
        };
        if doc.kind != expected {
            return Err(Error::format(
                path,
                format!("expected a {} file, found a {} file", expected.name(), doc.kind.name()),
            ));
        }
        Ok(doc)
    }
}

fn interleave<'a>(values: impl IntoIterator<Item = &'a Complex64>) -> Vec<f64> {
    values.into_iter().flat_map(|c| [c.re, c.im]).collect()
}

fn deinterleave(data: &[f64], expected: usize, what: &str, path: &Path) -> Result<Vec<Complex64>> {
    if data.len() != 2 * expected {
        return Err(Error::format(
            path,
            format!("`{what}` holds {} values, expected {}", data.len(), 2 * expected),
        ));
    }
    Ok(data.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
}

fn row_major(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len() * 2);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            out.push(v.re);
            out.push(v.im);
        }
    }
    out
}

fn from_row_major(data: &[f64], rows: usize, cols: usize, what: &str, path: &Path) -> Result<DMatrix<Complex64>> {
    let flat = deinterleave(data, rows * cols, what, path)?;
    Ok(DMatrix::from_row_slice(rows, cols, &flat))
}

#[derive(Serialize, Deserialize)]
struct KernelHeader {
    #[serde(flatten)]
    kind: KernelKind,
    num_ports: usize,
    unit: LengthUnit,
    jitter: f64,
    carrier_hz: Option<f64>,
    fingerprint: String,
}

const KERNEL_ARRAYS: &[&str] = &["matrix"];

pub fn kernel_document(kernel: &Kernel) -> Document {
    let header = KernelHeader {
        kind: *kernel.kind(),
        num_ports: kernel.num_ports(),
        unit: kernel.unit(),
        jitter: kernel.jitter(),
        carrier_hz: kernel.carrier_hz(),
        fingerprint: kernel.fingerprint().to_owned(),
    };
    let mut doc = Document::new(DocumentKind::Kernel, serde_json::to_value(header).unwrap());
    doc.push("matrix", row_major(kernel.matrix()));
    doc
}

pub fn save_kernel(kernel: &Kernel, path: &Path) -> Result<()> {
    kernel_document(kernel).write(path)
}

pub fn load_kernel(path: &Path) -> Result<Kernel> {
    let doc = Document::read(path, DocumentKind::Kernel, KERNEL_ARRAYS)?;
    let h: KernelHeader = doc.field(path)?;
    let n = h.num_ports;
    let matrix = from_row_major(doc.array("matrix", path)?, n, n, "matrix", path)?;
    let kernel = Kernel::from_parts(matrix, h.kind, h.unit, h.jitter, h.carrier_hz)
        .map_err(|e| Error::format(path, e.to_string()))?;
    if kernel.fingerprint() != h.fingerprint {
        return Err(Error::format(path, "kernel fingerprint does not match its contents"));
    }
    Ok(kernel)
}

#[derive(Serialize, Deserialize)]
struct PlanHeader {
    num_ports: usize,
    num_timeslots: usize,
    antennas_per_slot: usize,
    noise_power: f64,
    kernel_fingerprint: String,
    plan_id: String,
    /// 1-based port indices in selection order.
    order: Vec<usize>,
}

const PLAN_ARRAYS: &[&str] = &["weights", "posterior_variance"];

pub fn plan_document(plan: &SamplingPlan) -> Document {
    let header = PlanHeader {
        num_ports: plan.num_ports(),
        num_timeslots: plan.num_timeslots(),
        antennas_per_slot: plan.antennas_per_slot(),
        noise_power: plan.noise_power(),
        kernel_fingerprint: plan.kernel_fingerprint().to_owned(),
        plan_id: plan.id().to_owned(),
        order: plan.order().iter().map(|p| p + 1).collect(),
    };
    let mut doc = Document::new(DocumentKind::Plan, serde_json::to_value(header).unwrap());
    doc.push("weights", row_major(plan.weights()));
    doc.push("posterior_variance", plan.posterior_variance().to_vec());
    doc
}

pub fn save_plan(plan: &SamplingPlan, path: &Path) -> Result<()> {
    plan_document(plan).write(path)
}

pub fn load_plan(path: &Path) -> Result<SamplingPlan> {
    let doc = Document::read(path, DocumentKind::Plan, PLAN_ARRAYS)?;
    let h: PlanHeader = doc.field(path)?;
    if h.order.contains(&0) {
        return Err(Error::format(path, "port indices are 1-based"));
    }
    let pm = h.num_timeslots * h.antennas_per_slot;
    let weights = from_row_major(doc.array("weights", path)?, pm, h.num_ports, "weights", path)?;
    let plan = SamplingPlan::from_parts(
        h.num_ports,
        h.num_timeslots,
        h.antennas_per_slot,
        h.order.iter().map(|p| p - 1).collect(),
        weights,
        doc.array("posterior_variance", path)?.to_vec(),
        h.noise_power,
        h.kernel_fingerprint,
    )
    .map_err(|e| Error::format(path, e.to_string()))?;
    if plan.id() != h.plan_id {
        return Err(Error::format(path, "plan id does not match its contents"));
    }
    Ok(plan)
}

#[derive(Serialize, Deserialize)]
struct ObservationHeader {
    plan_id: String,
    noise_power: f64,
    len: usize,
}

const OBSERVATION_ARRAYS: &[&str] = &["values"];

pub fn save_observation(y: &PilotObservation, path: &Path) -> Result<()> {
    let header = ObservationHeader {
        plan_id: y.plan_id.clone(),
        noise_power: y.noise_power,
        len: y.values.len(),
    };
    let mut doc = Document::new(DocumentKind::Observation, serde_json::to_value(header).unwrap());
    doc.push("values", interleave(y.values.iter()));
    doc.write(path)
}

pub fn load_observation(path: &Path) -> Result<PilotObservation> {
    let doc = Document::read(path, DocumentKind::Observation, OBSERVATION_ARRAYS)?;
    let h: ObservationHeader = doc.field(path)?;
    let values = deinterleave(doc.array("values", path)?, h.len, "values", path)?;
    Ok(PilotObservation {
        values: DVector::from_vec(values),
        noise_power: h.noise_power,
        plan_id: h.plan_id,
    })
}

#[derive(Serialize, Deserialize)]
struct EstimateHeader {
    plan_id: String,
    num_ports: usize,
}

const ESTIMATE_ARRAYS: &[&str] = &["estimate", "posterior_variance", "confidence_lo", "confidence_hi"];

pub fn save_estimate(r: &Reconstruction, plan_id: &str, path: &Path) -> Result<()> {
    let header = EstimateHeader {
        plan_id: plan_id.to_owned(),
        num_ports: r.estimate.len(),
    };
    let mut doc = Document::new(DocumentKind::Estimate, serde_json::to_value(header).unwrap());
    doc.push("estimate", interleave(r.estimate.iter()));
    doc.push("posterior_variance", r.post_variance.clone());
    doc.push("confidence_lo", interleave(&r.confidence_lo));
    doc.push("confidence_hi", interleave(&r.confidence_hi));
    doc.write(path)
}

pub fn load_estimate(path: &Path) -> Result<(Reconstruction, String)> {
    let doc = Document::read(path, DocumentKind::Estimate, ESTIMATE_ARRAYS)?;
    let h: EstimateHeader = doc.field(path)?;
    let n = h.num_ports;
    let estimate = DVector::from_vec(deinterleave(doc.array("estimate", path)?, n, "estimate", path)?);
    let post_variance = doc.array("posterior_variance", path)?.to_vec();
    if post_variance.len() != n {
        return Err(Error::format(path, "posterior_variance length mismatch"));
    }
    let confidence_lo = deinterleave(doc.array("confidence_lo", path)?, n, "confidence_lo", path)?;
    let confidence_hi = deinterleave(doc.array("confidence_hi", path)?, n, "confidence_hi", path)?;
    Ok((
        Reconstruction {
            estimate,
            post_variance,
            confidence_lo,
            confidence_hi,
        },
        h.plan_id,
    ))
}

#[derive(Serialize, Deserialize)]
struct ChannelHeader {
    num_ports: usize,
    model: ChannelModel,
}

pub fn save_channel(h: &ChannelRealization, path: &Path) -> Result<()> {
    let header = ChannelHeader {
        num_ports: h.len(),
        model: h.model,
    };
    let mut doc = Document::new(DocumentKind::Channel, serde_json::to_value(header).unwrap());
    doc.push("values", interleave(h.values.iter()));
    doc.write(path)
}

pub fn load_channel(path: &Path) -> Result<ChannelRealization> {
    let doc = Document::read(path, DocumentKind::Channel, &["values"])?;
    let h: ChannelHeader = doc.field(path)?;
    let values = deinterleave(doc.array("values", path)?, h.num_ports, "values", path)?;
    Ok(ChannelRealization {
        values: DVector::from_vec(values),
        model: h.model,
    })
}
