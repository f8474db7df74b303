use std::collections::BTreeSet;

use serde::Serialize;

use crate::mplp::{Orientation, Road, RoadRealization};

/// Coordinates are micrometers on an integer lattice. Exact integer lengths
/// make equal-length route ties exact, so the charging tie-break and the
/// lexicographic node-sequence tie-break are deterministic; float summation
/// order can never reorder two routes.
pub(crate) const MICRO: f64 = 1e6;

pub(crate) fn to_micro(meters: f64) -> i64 {
    (meters * MICRO).round() as i64
}

pub(crate) fn to_meters(micro: i64) -> f64 {
    micro as f64 / MICRO
}

/// Which family an edge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// One directed adjacency entry; every undirected edge appears once per
/// endpoint.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Arc {
    pub(crate) to: usize,
    pub(crate) len: u64,
    pub(crate) charging: bool,
    pub(crate) axis: Axis,
}

/// Explicit intersection graph of one sampled realization.
///
/// Nodes are road crossings plus the source and destination points; edges are
/// the road segments between consecutive nodes on each road, carrying the
/// road's charging flag. Node indices are assigned in lexicographic
/// coordinate order, and adjacency lists are sorted the same way, so every
/// traversal of the graph is deterministic.
#[derive(Debug, Clone)]
pub struct GridGraph {
    nodes: Vec<(i64, i64)>,
    adj: Vec<Vec<Arc>>,
    source: usize,
    dest: usize,
}

#[derive(Debug, Clone, Copy)]
struct Line {
    coord: i64,
    charging: bool,
    axis: Axis,
}

/// Builds the intersection graph of the realization's roads.
///
/// Includes every road inside the trip spans plus the nearest `margin` roads
/// past each span boundary on each side, so the graph offers exactly the
/// detour options the routing decisions assume (and nothing hidden beyond
/// them). The source and destination roads are always included.
///
/// # Panics
/// Panics if `margin` is 0: without at least one road beyond each boundary
/// the source and destination would sit on dangling edges.
pub fn build_grid(realization: &RoadRealization, margin: usize) -> GridGraph {
    assert!(margin >= 1, "margin must be at least 1");
    let geo = &realization.geometry;
    let (d_h, d_v) = (geo.d_h(), geo.d_v());

    let mut h_lines = select_lines(&realization.h_roads, d_v, margin, Axis::Horizontal);
    let mut v_lines = select_lines(&realization.v_roads, d_h, margin, Axis::Vertical);
    match geo.orientation() {
        Orientation::Parallel => {
            // source and destination roads are the two parallel verticals
            v_lines.push(line(0.0, realization.source_charging, Axis::Vertical));
            v_lines.push(line(d_h, realization.dest_charging, Axis::Vertical));
        }
        Orientation::Perpendicular => {
            h_lines.push(line(0.0, realization.source_charging, Axis::Horizontal));
            v_lines.push(line(d_h, realization.dest_charging, Axis::Vertical));
        }
    }
    dedupe(&mut h_lines);
    dedupe(&mut v_lines);

    let source = (0, 0);
    let dest = (to_micro(d_h), to_micro(d_v));
    let mut coords: BTreeSet<(i64, i64)> = BTreeSet::new();
    for v in &v_lines {
        for h in &h_lines {
            coords.insert((v.coord, h.coord));
        }
    }
    coords.insert(source);
    coords.insert(dest);

    let nodes: Vec<(i64, i64)> = coords.into_iter().collect();
    let index = |c: (i64, i64)| nodes.binary_search(&c).expect("node inserted above");
    let mut adj: Vec<Vec<Arc>> = vec![Vec::new(); nodes.len()];

    let mut connect = |line: &Line, members: &mut Vec<(i64, i64)>| {
        members.sort_unstable();
        members.dedup();
        for pair in members.windows(2) {
            let (a, b) = (index(pair[0]), index(pair[1]));
            let len = (pair[1].0 - pair[0].0 + pair[1].1 - pair[0].1) as u64;
            adj[a].push(Arc { to: b, len, charging: line.charging, axis: line.axis });
            adj[b].push(Arc { to: a, len, charging: line.charging, axis: line.axis });
        }
    };

    for l in &h_lines {
        let mut members: Vec<(i64, i64)> = v_lines.iter().map(|v| (v.coord, l.coord)).collect();
        for extra in [source, dest] {
            if extra.1 == l.coord {
                members.push(extra);
            }
        }
        connect(l, &mut members);
    }
    for l in &v_lines {
        let mut members: Vec<(i64, i64)> = h_lines.iter().map(|h| (l.coord, h.coord)).collect();
        for extra in [source, dest] {
            if extra.0 == l.coord {
                members.push(extra);
            }
        }
        connect(l, &mut members);
    }

    for list in &mut adj {
        list.sort_unstable_by_key(|arc| nodes[arc.to]);
    }

    GridGraph {
        source: index(source),
        dest: index(dest),
        nodes,
        adj,
    }
}

fn line(coord_m: f64, charging: bool, axis: Axis) -> Line {
    Line { coord: to_micro(coord_m), charging, axis }
}

/// In-span roads plus the nearest `margin` roads past each side, as lattice
/// lines. `roads` is ascending by signed offset.
fn select_lines(roads: &[Road], span: f64, margin: usize, axis: Axis) -> Vec<Line> {
    let below = roads.iter().take_while(|r| r.offset < 0.0).count();
    let in_span = roads[below..].iter().take_while(|r| r.offset < span).count();
    let lo = below.saturating_sub(margin);
    let hi = (below + in_span + margin).min(roads.len());
    roads[lo..hi]
        .iter()
        .map(|r| line(r.offset, r.charging, axis))
        .collect()
}

/// Quantization can in principle collide two nearby lines onto one lattice
/// coordinate; keep them distinct by bumping, preserving order.
fn dedupe(lines: &mut [Line]) {
    lines.sort_unstable_by_key(|l| l.coord);
    for i in 1..lines.len() {
        if lines[i].coord <= lines[i - 1].coord {
            lines[i].coord = lines[i - 1].coord + 1;
        }
    }
}

impl GridGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Every undirected edge once, as (node, node, length in meters,
    /// charging, axis) with the smaller node index first.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64, bool, Axis)> + '_ {
        self.adj.iter().enumerate().flat_map(move |(a, arcs)| {
            arcs.iter().filter(move |arc| arc.to > a).map(move |arc| {
                (a, arc.to, to_meters(arc.len as i64), arc.charging, arc.axis)
            })
        })
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    /// Node position in meters.
    pub fn node(&self, node: usize) -> (f64, f64) {
        let (x, y) = self.nodes[node];
        (to_meters(x), to_meters(y))
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn dest(&self) -> usize {
        self.dest
    }

    #[cfg(test)]
    pub(crate) fn coords(&self, node: usize) -> (i64, i64) {
        self.nodes[node]
    }

    pub(crate) fn arcs(&self, node: usize) -> &[Arc] {
        &self.adj[node]
    }

    /// Manhattan distance between two nodes in lattice units.
    pub(crate) fn manhattan(&self, a: usize, b: usize) -> u64 {
        let (ax, ay) = self.nodes[a];
        let (bx, by) = self.nodes[b];
        (ax.abs_diff(bx) + ay.abs_diff(by)) as u64
    }
}
