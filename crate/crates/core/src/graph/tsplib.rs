use serde::{Deserialize, Serialize};

use super::{DynamicInstance, GraphSnapshot, ProblemKind};
use crate::error::{Error, Result};

/// The 14-city TSPLIB instance `burma14` (GEO metric).
pub const BURMA14: &str = include_str!("../../data/burma14.tsp");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "EUC_2D")]
    Euc2d,
    #[serde(rename = "GEO")]
    Geo,
}

/// Node coordinates plus the metric that turns them into distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TspNodeSet {
    pub name: String,
    pub coords: Vec<(f64, f64)>,
    pub metric: Metric,
    /// TSPLIB integer rounding for EUC_2D. GEO distances are always integral.
    pub rounding: bool,
}

// TSPLIB's GEO metric is defined with this truncated value.
#[allow(clippy::approx_constant)]
const GEO_PI: f64 = 3.141592;
const EARTH_RADIUS: f64 = 6378.388;

fn geo_radians(x: f64) -> f64 {
    let deg = x.trunc();
    let min = x - deg;
    GEO_PI * (deg + 5.0 * min / 3.0) / 180.0
}

impl TspNodeSet {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Distance between two coordinate pairs under this set's metric.
    pub fn distance(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        match self.metric {
            Metric::Euc2d => {
                let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                if self.rounding {
                    (d + 0.5).floor()
                } else {
                    d
                }
            }
            Metric::Geo => {
                let (lat_i, lon_i) = (geo_radians(a.0), geo_radians(a.1));
                let (lat_j, lon_j) = (geo_radians(b.0), geo_radians(b.1));
                let q1 = (lon_i - lon_j).cos();
                let q2 = (lat_i - lat_j).cos();
                let q3 = (lat_i + lat_j).cos();
                let arg = (0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)).clamp(-1.0, 1.0);
                (EARTH_RADIUS * arg.acos() + 1.0).floor()
            }
        }
    }

    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.coords.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let w = self.distance(self.coords[i], self.coords[j]);
                d[i][j] = w;
                d[j][i] = w;
            }
        }
        d
    }

    fn bounding_box(&self) -> ((f64, f64), (f64, f64)) {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.coords {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        (lo, hi)
    }

    /// True when `p` lies inside the axis-aligned bounding box of the nodes.
    pub fn contains(&self, p: (f64, f64)) -> bool {
        let (lo, hi) = self.bounding_box();
        p.0 >= lo.0 && p.0 <= hi.0 && p.1 >= lo.1 && p.1 <= hi.1
    }
}

/// Parses the TSPLIB subset used here: `NAME`, `DIMENSION`,
/// `EDGE_WEIGHT_TYPE` (EUC_2D or GEO), `NODE_COORD_SECTION`, `EOF`. Other
/// header keywords are accepted and ignored.
pub fn parse_tsplib(raw: &str) -> Result<TspNodeSet> {
    let mut name = String::new();
    let mut dimension: Option<usize> = None;
    let mut metric: Option<Metric> = None;
    let mut coords = Vec::new();
    let mut in_coords = false;
    let mut saw_section = false;

    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        if in_coords {
            let tok: Vec<&str> = line.split_whitespace().collect();
            let nums: Option<Vec<f64>> = tok.iter().map(|t| t.parse().ok()).collect();
            match nums {
                Some(v) if v.len() == 3 => {
                    coords.push((v[1], v[2]));
                    continue;
                }
                _ => in_coords = false,
            }
        }
        if line.starts_with("NODE_COORD_SECTION") {
            in_coords = true;
            saw_section = true;
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(Error::Parse { line: lineno + 1, message: format!("unrecognized line `{line}`") });
        };
        let value = value.trim();
        match key.trim() {
            "NAME" => name = value.to_string(),
            "DIMENSION" => {
                dimension = Some(
                    value
                        .parse()
                        .map_err(|_| Error::Parse { line: lineno + 1, message: format!("bad DIMENSION `{value}`") })?,
                )
            }
            "EDGE_WEIGHT_TYPE" => {
                metric = Some(match value {
                    "EUC_2D" => Metric::Euc2d,
                    "GEO" => Metric::Geo,
                    other => return Err(Error::Unsupported(format!("EDGE_WEIGHT_TYPE {other}"))),
                })
            }
            _ => {}
        }
    }

    let metric = metric.ok_or_else(|| Error::Parse { line: 0, message: "missing EDGE_WEIGHT_TYPE".into() })?;
    if !saw_section {
        return Err(Error::Parse { line: 0, message: "missing NODE_COORD_SECTION".into() });
    }
    if let Some(d) = dimension {
        if d != coords.len() {
            return Err(Error::Parse { line: 0, message: format!("DIMENSION {d} but {} coordinates", coords.len()) });
        }
    }
    if coords.len() < 3 {
        return Err(Error::invalid("a TSP instance needs at least 3 nodes"));
    }
    Ok(TspNodeSet { name, coords, metric, rounding: true })
}

/// Default straight-line path of the extra node for burma14, inside the
/// bounding box of the base cities.
pub const BURMA14_TRAJECTORY: ((f64, f64), (f64, f64)) = ((16.0, 93.0), (24.0, 97.5));

/// Appends one extra node that moves in a straight line from `start` to `end`
/// across `snapshots` equally spaced positions. The moving node is the last
/// index. Positions outside the bounding box of `base` are allowed; callers
/// can check [`TspNodeSet::contains`] to warn about them.
pub fn build_moving_node_instance(
    base: &TspNodeSet,
    start: (f64, f64),
    end: (f64, f64),
    snapshots: usize,
) -> Result<DynamicInstance> {
    if snapshots < 2 {
        return Err(Error::invalid("a moving-node instance needs at least 2 snapshots"));
    }
    let n = base.len();
    let base_dist = base.distance_matrix();
    let mut snaps = Vec::with_capacity(snapshots);
    for t in 0..snapshots {
        let s = t as f64 / (snapshots - 1) as f64;
        let p = (start.0 + s * (end.0 - start.0), start.1 + s * (end.1 - start.1));
        let mut dist: Vec<Vec<f64>> = base_dist
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.push(0.0);
                r
            })
            .collect();
        let mut last = vec![0.0; n + 1];
        for i in 0..n {
            let w = base.distance(base.coords[i], p);
            dist[i][n] = w;
            last[i] = w;
        }
        dist.push(last);
        snaps.push(GraphSnapshot::complete(&dist)?);
    }
    DynamicInstance::new(ProblemKind::Tsp, snaps)
}

/// Position of the moving node in snapshot `t` (0-based).
pub fn moving_node_position(start: (f64, f64), end: (f64, f64), snapshots: usize, t: usize) -> (f64, f64) {
    let s = t as f64 / (snapshots - 1) as f64;
    (start.0 + s * (end.0 - start.0), start.1 + s * (end.1 - start.1))
}
