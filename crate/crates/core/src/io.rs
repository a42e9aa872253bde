//! CSV formats: long-format time series in, wide feature tables, priors,
//! confusion matrices and shift estimates.
//!
//! Floats are written with 17 significant digits so every value round-trips.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDate;

use crate::classify::{ClassList, Dataset};
use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::features::{BandManifest, DroppedPixel, FeatureVector, Observation, PixelTimeSeries};
use crate::priors::ClassPriors;
use crate::shift::{aggregate_to_priors, ClassArea, RegionalShift};

/// Tolerance on per-region proportion sums in priors files.
pub const PRIORS_FILE_TOLERANCE: f64 = 1e-6;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

struct Header(HashMap<String, usize>);

impl Header {
    fn read<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Self> {
        let h = rdr.headers()?;
        Ok(Header(h.iter().enumerate().map(|(i, n)| (n.trim().to_string(), i)).collect()))
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| parse_err(1, format!("missing column {name}")))
    }

    fn get(&self, name: &str) -> Option<usize> {
        self.0.get(name).copied()
    }
}

fn field(rec: &csv::StringRecord, col: usize, line: u64) -> Result<&str> {
    rec.get(col)
        .map(str::trim)
        .ok_or_else(|| parse_err(line, format!("missing field {col}")))
}

fn parse_f64(s: &str, what: &str, line: u64) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| parse_err(line, format!("bad {what}: {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite {what}")));
    }
    Ok(v)
}

/// Reads `pixel_id,region_id,label,band,time_years,value,clear`.
///
/// `time_years` is either a year fraction or an ISO date, which is converted
/// relative to `anchor`. Rows sharing a pixel and time form one observation,
/// which is clear only if every row at that time is clear.
pub fn read_timeseries_csv<R: Read>(reader: R, anchor: Option<NaiveDate>) -> Result<Vec<PixelTimeSeries>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let h = Header::read(&mut rdr)?;
    let cols = [
        h.require("pixel_id")?,
        h.require("region_id")?,
        h.require("label")?,
        h.require("band")?,
        h.require("time_years")?,
        h.require("value")?,
        h.require("clear")?,
    ];

    struct Pixel {
        region: String,
        label: Option<String>,
        obs: BTreeMap<u64, Observation>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut pixels: HashMap<String, Pixel> = HashMap::new();

    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let [pid, region, label, band, time, value, clear] = cols.map(|c| field(&rec, c, line));
        let (pid, region, label, band, time, value, clear) = (pid?, region?, label?, band?, time?, value?, clear?);
        let t = match time.parse::<f64>() {
            Ok(t) if t.is_finite() => t,
            Ok(_) => return Err(parse_err(line, "non-finite time_years")),
            Err(_) => {
                let date = NaiveDate::parse_from_str(time, "%Y-%m-%d")
                    .map_err(|_| parse_err(line, format!("bad time_years: {time:?}")))?;
                let anchor = anchor.ok_or_else(|| parse_err(line, "dates require an anchor date"))?;
                crate::features::year_fraction(date, anchor)
            }
        };
        let value = parse_f64(value, "value", line)?;
        let clear = match clear {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(line, format!("clear must be 0 or 1, got {other:?}"))),
        };
        let label = (!label.is_empty()).then(|| label.to_string());
        let px = pixels.entry(pid.to_string()).or_insert_with(|| {
            order.push(pid.to_string());
            Pixel { region: region.to_string(), label: label.clone(), obs: BTreeMap::new() }
        });
        if px.region != region || px.label != label {
            return Err(parse_err(line, format!("pixel {pid} changes region or label")));
        }
        let key = ordered_key(t);
        let obs = px.obs.entry(key).or_insert_with(|| Observation {
            time_years: t,
            band_values: BTreeMap::new(),
            clear: true,
        });
        if obs.band_values.insert(band.to_string(), value).is_some() {
            return Err(parse_err(line, format!("duplicate band {band} for pixel {pid} at time {time}")));
        }
        obs.clear &= clear;
    }

    Ok(order
        .into_iter()
        .map(|pid| {
            let px = pixels.remove(&pid).expect("pixel recorded");
            PixelTimeSeries {
                pixel_id: pid,
                region_id: px.region,
                label: px.label,
                observations: px.obs.into_values().collect(),
            }
        })
        .collect())
}

/// Order-preserving integer key for a finite float.
fn ordered_key(t: f64) -> u64 {
    let bits = (t + 0.0).to_bits();
    if bits >> 63 == 1 { !bits } else { bits | (1 << 63) }
}

pub fn write_features_csv<W: Write>(writer: W, features: &[FeatureVector], manifest: &BandManifest) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["pixel_id".to_string(), "region_id".into(), "label".into()];
    header.extend(manifest.feature_names());
    w.write_record(&header)?;
    for fv in features {
        let mut rec = vec![fv.pixel_id.clone(), fv.region_id.clone(), fv.label.clone().unwrap_or_default()];
        rec.extend(fv.values.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_manifest<W: Write>(mut writer: W, manifest: &BandManifest) -> Result<()> {
    for b in manifest.bands() {
        writeln!(writer, "{b}")?;
    }
    Ok(())
}

pub fn read_manifest(text: &str) -> BandManifest {
    BandManifest::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
}

pub fn write_drop_report<W: Write>(writer: W, dropped: &[DroppedPixel]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["pixel_id", "region_id", "reason"])?;
    for d in dropped {
        w.write_record([&d.pixel_id, &d.region_id, &d.reason])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes labeled datasets in the wide feature schema.
pub fn write_dataset_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["pixel_id".to_string(), "region_id".into(), "label".into()];
    header.extend((0..data.dim()).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec = vec![
            data.ids()[i].clone(),
            data.regions()[i].clone(),
            data.class_list().name(data.labels()[i]).to_string(),
        ];
        rec.extend(data.row(i).iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Raw wide-format rows before a class list is fixed.
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub regions: Vec<String>,
    pub labels: Vec<String>,
    pub groups: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn label_names(&self) -> BTreeSet<String> {
        self.labels.iter().cloned().collect()
    }

    pub fn append(&mut self, other: FeatureTable) -> Result<()> {
        if let (Some(a), Some(b)) = (self.rows.first(), other.rows.first()) {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
            }
        }
        let was_empty = self.rows.is_empty();
        self.groups = match (self.groups.take(), other.groups) {
            (Some(mut a), Some(b)) => {
                a.extend(b);
                Some(a)
            }
            (None, Some(b)) if was_empty => Some(b),
            _ => None,
        };
        self.ids.extend(other.ids);
        self.regions.extend(other.regions);
        self.labels.extend(other.labels);
        self.rows.extend(other.rows);
        Ok(())
    }

    pub fn into_dataset(self, class_list: &ClassList) -> Result<Dataset> {
        let labels = self
            .labels
            .iter()
            .map(|l| class_list.index_of(l).ok_or_else(|| Error::UnknownLabel(l.clone())))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(class_list.clone(), self.ids, self.rows, labels, self.regions, self.groups)
    }
}

/// Reads `pixel_id,region_id,label,f0,...` with an optional `group_id` column.
/// Every row must carry a label.
pub fn read_features_csv<R: Read>(reader: R) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let h = Header::read(&mut rdr)?;
    let (c_id, c_region, c_label) = (h.require("pixel_id")?, h.require("region_id")?, h.require("label")?);
    let c_group = h.get("group_id");
    let mut feature_cols = Vec::new();
    while let Some(c) = h.get(&format!("f{}", feature_cols.len())) {
        feature_cols.push(c);
    }
    if feature_cols.is_empty() {
        return Err(parse_err(1, "no feature columns f0.."));
    }
    let mut t = FeatureTable { groups: c_group.map(|_| Vec::new()), ..Default::default() };
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let label = field(&rec, c_label, line)?;
        if label.is_empty() {
            return Err(parse_err(line, "missing label"));
        }
        t.ids.push(field(&rec, c_id, line)?.to_string());
        t.regions.push(field(&rec, c_region, line)?.to_string());
        t.labels.push(label.to_string());
        if let (Some(g), Some(c)) = (t.groups.as_mut(), c_group) {
            g.push(field(&rec, c, line)?.to_string());
        }
        t.rows.push(
            feature_cols
                .iter()
                .enumerate()
                .map(|(j, &c)| parse_f64(field(&rec, c, line)?, &format!("f{j}"), line))
                .collect::<Result<_>>()?,
        );
    }
    Ok(t)
}

/// Reads a priors file in either schema:
/// `region_id,class,proportion` or `region_id,class,area,mean_field_area`.
pub fn read_priors_csv<R: Read>(reader: R) -> Result<BTreeMap<String, ClassPriors>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let h = Header::read(&mut rdr)?;
    let (c_region, c_class) = (h.require("region_id")?, h.require("class")?);
    let by_proportion = h.get("proportion");
    let by_area = match (h.get("area"), h.get("mean_field_area")) {
        (Some(a), Some(m)) => Some((a, m)),
        _ => None,
    };
    if by_proportion.is_none() && by_area.is_none() {
        return Err(parse_err(1, "expected a proportion column or area,mean_field_area columns"));
    }

    let mut props: BTreeMap<String, Vec<(String, f64, u64)>> = BTreeMap::new();
    let mut areas: BTreeMap<String, BTreeMap<String, ClassArea>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let region = field(&rec, c_region, line)?.to_string();
        let class = field(&rec, c_class, line)?.to_string();
        if let Some(c) = by_proportion {
            let p = parse_f64(field(&rec, c, line)?, "proportion", line)?;
            if p < 0.0 {
                return Err(parse_err(line, "negative proportion"));
            }
            let entry = props.entry(region).or_default();
            if entry.iter().any(|e| e.0 == class) {
                return Err(parse_err(line, format!("duplicate class {class}")));
            }
            entry.push((class, p, line));
        } else if let Some((ca, cm)) = by_area {
            let area = ClassArea {
                area: parse_f64(field(&rec, ca, line)?, "area", line)?,
                mean_field_area: parse_f64(field(&rec, cm, line)?, "mean_field_area", line)?,
            };
            if areas.entry(region).or_default().insert(class.clone(), area).is_some() {
                return Err(parse_err(line, format!("duplicate class {class}")));
            }
        }
    }

    if by_proportion.is_some() {
        props
            .into_iter()
            .map(|(region, entries)| {
                let sum: f64 = entries.iter().map(|e| e.1).sum();
                if (sum - 1.0).abs() > PRIORS_FILE_TOLERANCE {
                    let line = entries.last().map(|e| e.2).unwrap_or(0);
                    return Err(parse_err(line, format!("proportions of region {region} sum to {sum}")));
                }
                let priors = ClassPriors::new(region.clone(), entries.into_iter().map(|e| (e.0, e.1 / sum)))?;
                Ok((region, priors))
            })
            .collect()
    } else {
        areas
            .into_iter()
            .map(|(region, a)| Ok((region.clone(), aggregate_to_priors(&region, &a)?)))
            .collect()
    }
}

pub fn write_priors_csv<'a, W: Write>(writer: W, priors: impl IntoIterator<Item = &'a ClassPriors>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["region_id", "class", "proportion"])?;
    for p in priors {
        for (c, v) in p.classes().iter().zip(p.proportions()) {
            w.write_record([p.region_id(), c.as_str(), &fmt_f64(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Header row `true\predicted,<classes>`, then one row per true class.
pub fn write_confusion_csv<W: Write>(writer: W, cm: &ConfusionMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(cm.class_list().names().iter().cloned());
    w.write_record(&header)?;
    for (name, row) in cm.class_list().names().iter().zip(cm.counts()) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_shift_csv<'a, W: Write>(writer: W, shifts: impl IntoIterator<Item = &'a RegionalShift>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let shifts: Vec<&RegionalShift> = shifts.into_iter().collect();
    let d = shifts.first().map(|s| s.offset.len()).unwrap_or(0);
    let mut header = vec!["region_id".to_string()];
    header.extend((0..d).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for s in shifts {
        let mut rec = vec![s.region_id.clone()];
        rec.extend(s.offset.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
