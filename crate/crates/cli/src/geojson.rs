//! Typed GeoJSON emission: one Point feature per city, colored by
//! community id from a fixed palette so identical inputs always render
//! identically.

use serde::Serialize;

use respair_core::ingest::Gazetteer;

/// Fixed color palette; community `c` gets `PALETTE[c % PALETTE.len()]`.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
];

#[derive(Debug, Serialize)]
pub struct FeatureCollection {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub features: Vec<Feature>,
}

#[derive(Debug, Serialize)]
pub struct Feature {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub geometry: Geometry,
    pub properties: Properties,
}

#[derive(Debug, Serialize)]
pub struct Geometry {
    #[serde(rename = "type")]
    pub kind: &'static str,
    /// GeoJSON position order: longitude, then latitude.
    pub coordinates: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct Properties {
    pub city: String,
    pub community: usize,
    pub color: String,
}

/// Builds the overlay from (city, community) rows, resolving coordinates
/// through the gazetteer. Returns the sorted list of unresolvable city
/// names on failure so the caller can report all of them at once.
pub fn feature_collection(
    rows: &[(String, usize)],
    gz: &Gazetteer,
) -> Result<FeatureCollection, Vec<String>> {
    let mut missing: Vec<String> = rows
        .iter()
        .filter(|(city, _)| gz.find(city).is_none())
        .map(|(city, _)| city.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(missing);
    }
    let features = rows
        .iter()
        .map(|(city, community)| {
            let entry = gz.find(city).expect("checked above");
            Feature {
                kind: "Feature",
                geometry: Geometry {
                    kind: "Point",
                    coordinates: [entry.longitude, entry.latitude],
                },
                properties: Properties {
                    city: city.clone(),
                    community: *community,
                    color: PALETTE[community % PALETTE.len()].to_owned(),
                },
            }
        })
        .collect();
    Ok(FeatureCollection {
        kind: "FeatureCollection",
        features,
    })
}
