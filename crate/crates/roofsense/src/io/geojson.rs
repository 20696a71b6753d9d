//! Footprint polygons in, classified maps out, as GeoJSON FeatureCollections
//! in a projected CRS.

use std::path::Path;

use roofsense_core::geom::{Footprint, FootprintSet, Polygon};
use roofsense_core::{Country, LabelSchema, Task};
use serde_json::{json, Map, Value};

use crate::{Error, Result};

/// A footprint plus whatever labels its properties carry.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFootprint {
    pub footprint: Footprint,
    pub roof_type: Option<u8>,
    pub roof_material: Option<u8>,
}

pub fn read_footprints(path: impl AsRef<Path>) -> Result<Vec<LabeledFootprint>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_footprints(&text).map_err(|m| Error::format(path, m))
}

pub fn parse_footprints(text: &str) -> std::result::Result<Vec<LabeledFootprint>, String> {
    let doc: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err("expected a FeatureCollection".into());
    }
    let features = doc.get("features").and_then(Value::as_array).ok_or("missing features array")?;
    let mut out = Vec::with_capacity(features.len());
    for (i, feature) in features.iter().enumerate() {
        let empty = Map::new();
        let props = feature.get("properties").and_then(Value::as_object).unwrap_or(&empty);
        let building_id = match props.get("building_id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(format!("feature {i}: missing property building_id")),
        };
        let polygon = feature
            .get("geometry")
            .ok_or_else(|| format!("feature {building_id}: missing geometry"))
            .and_then(|g| parse_geometry(g).map_err(|m| format!("feature {building_id}: {m}")))?;
        let country = props.get("country").and_then(Value::as_str).map(Country::parse).unwrap_or_default();
        let roof_type = label(props.get("roof_type"), Task::RoofType.schema())
            .map_err(|m| format!("feature {building_id}: {m}"))?;
        let roof_material = label(props.get("roof_material"), Task::RoofMaterial.schema())
            .map_err(|m| format!("feature {building_id}: {m}"))?;
        out.push(LabeledFootprint { footprint: Footprint { building_id, polygon, country }, roof_type, roof_material });
    }
    FootprintSet::new(out.iter().map(|f| f.footprint.clone()).collect()).map_err(|e| e.to_string())?;
    Ok(out)
}

/// Accepts a class name or index; null and absent mean unlabeled.
pub fn label(v: Option<&Value>, schema: LabelSchema) -> std::result::Result<Option<u8>, String> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.is_empty() => Ok(None),
        Some(Value::String(s)) => schema
            .index_of(s)
            .map(|i| Some(i as u8))
            .ok_or_else(|| format!("unknown class {s:?} for {}", schema.task.as_str())),
        Some(Value::Number(n)) => match n.as_u64() {
            Some(i) if (i as usize) < schema.len() => Ok(Some(i as u8)),
            _ => Err(format!("class index {n} out of range for {}", schema.task.as_str())),
        },
        Some(other) => Err(format!("bad label {other}")),
    }
}

fn ring(v: &Value) -> std::result::Result<Vec<[f64; 2]>, String> {
    let pts = v.as_array().ok_or("ring is not an array")?;
    let mut out: Vec<[f64; 2]> = pts
        .iter()
        .map(|p| match p.as_array().map(|a| a.as_slice()) {
            Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok([x, y]),
                _ => Err("non-numeric coordinate".to_string()),
            },
            _ => Err("malformed position".to_string()),
        })
        .collect::<std::result::Result<_, _>>()?;
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    Ok(out)
}

fn polygon_from_rings(rings: &[Value]) -> std::result::Result<Polygon, String> {
    let (first, rest) = rings.split_first().ok_or("polygon without rings")?;
    Ok(Polygon { exterior: ring(first)?, holes: rest.iter().map(ring).collect::<std::result::Result<_, _>>()? })
}

/// Polygon, or the largest member of a MultiPolygon.
fn parse_geometry(g: &Value) -> std::result::Result<Polygon, String> {
    let coords = g.get("coordinates").and_then(Value::as_array).ok_or("missing coordinates")?;
    match g.get("type").and_then(Value::as_str) {
        Some("Polygon") => polygon_from_rings(coords),
        Some("MultiPolygon") => coords
            .iter()
            .map(|p| polygon_from_rings(p.as_array().ok_or("malformed multipolygon")?))
            .collect::<std::result::Result<Vec<_>, _>>()?
            .into_iter()
            .max_by(|a, b| a.area().total_cmp(&b.area()))
            .ok_or_else(|| "empty multipolygon".to_string()),
        other => Err(format!("unsupported geometry type {other:?}")),
    }
}

fn geometry(p: &Polygon) -> Value {
    let close = |r: &[[f64; 2]]| {
        let mut v: Vec<Value> = r.iter().map(|c| json!([c[0], c[1]])).collect();
        if let Some(first) = r.first() {
            v.push(json!([first[0], first[1]]));
        }
        Value::Array(v)
    };
    let mut rings = vec![close(&p.exterior)];
    rings.extend(p.holes.iter().map(|h| close(h)));
    json!({ "type": "Polygon", "coordinates": rings })
}

fn collection(features: Vec<Value>, crs: Option<&str>) -> Value {
    let mut doc = json!({ "type": "FeatureCollection", "features": features });
    if let Some(crs) = crs {
        doc["crs"] = json!({ "type": "name", "properties": { "name": crs } });
    }
    doc
}

pub fn write_json(path: impl AsRef<Path>, doc: &Value) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Footprints with label names in their properties.
pub fn footprints_document(items: &[LabeledFootprint], crs: Option<&str>) -> Value {
    let features = items
        .iter()
        .map(|f| {
            let name = |task: Task, l: Option<u8>| l.and_then(|i| task.schema().name(i as usize));
            json!({
                "type": "Feature",
                "geometry": geometry(&f.footprint.polygon),
                "properties": {
                    "building_id": f.footprint.building_id,
                    "country": f.footprint.country.as_str(),
                    "roof_type": name(Task::RoofType, f.roof_type),
                    "roof_material": name(Task::RoofMaterial, f.roof_material),
                },
            })
        })
        .collect();
    collection(features, crs)
}

/// One classified building of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedFeature {
    pub footprint: Footprint,
    pub predicted_class: String,
    pub confidence: f64,
}

pub fn classified_map(items: &[ClassifiedFeature], model_ref: &str, crs: Option<&str>) -> Value {
    let features = items
        .iter()
        .map(|f| {
            json!({
                "type": "Feature",
                "geometry": geometry(&f.footprint.polygon),
                "properties": {
                    "building_id": f.footprint.building_id,
                    "predicted_class": f.predicted_class,
                    "confidence": f.confidence,
                    "model_ref": model_ref,
                },
            })
        })
        .collect();
    collection(features, crs)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{"building_id":"a","country":"Dominica","roof_type":"Hip"},
         "geometry":{"type":"Polygon","coordinates":[[[0,0],[4,0],[4,3],[0,3],[0,0]]]}},
        {"type":"Feature","properties":{"building_id":7,"roof_material":3},
         "geometry":{"type":"MultiPolygon","coordinates":[[[[0,0],[1,0],[1,1],[0,0]]],[[[5,5],[9,5],[9,9],[5,9],[5,5]]]]}}
    ]}"#;

    #[test]
    fn parses_ids_labels_and_geometry() {
        let f = parse_footprints(DOC).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].footprint.building_id, "a");
        assert_eq!(f[0].roof_type, Some(1));
        assert_eq!(f[0].footprint.polygon.exterior.len(), 4);
        assert_eq!(f[1].footprint.building_id, "7");
        assert_eq!(f[1].roof_material, Some(3));
        assert_eq!(f[1].footprint.polygon.area(), 16.0);
        assert_eq!(f[1].footprint.country, Country::Other);
    }

    #[test]
    fn missing_building_id_is_named() {
        let doc = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]}"#;
        assert!(parse_footprints(doc).unwrap_err().contains("building_id"));
    }

    #[test]
    fn written_footprints_parse_back() {
        let f = parse_footprints(DOC).unwrap();
        let doc = footprints_document(&f, Some("EPSG:32620"));
        assert_eq!(parse_footprints(&doc.to_string()).unwrap(), f);
    }

    #[test]
    fn empty_map_is_a_valid_collection() {
        let doc = classified_map(&[], "m", None);
        assert_eq!(doc["type"], "FeatureCollection");
        assert_eq!(doc["features"].as_array().unwrap().len(), 0);
    }
}
