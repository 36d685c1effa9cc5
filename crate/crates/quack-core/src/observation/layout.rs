//! Deterministic 2D embeddings of room graphs for rendering.

use std::collections::BTreeMap;

use crate::map::{Map, RoomId};

pub const CANVAS_W: f64 = 1000.0;
pub const CANVAS_H: f64 = 520.0;

/// Room center positions on the render canvas.
#[derive(Debug, Clone)]
pub struct MapLayout {
    positions: BTreeMap<RoomId, (f64, f64)>,
}

// Hand-authored ship layout for the bundled default map.
const DEFAULT_POSITIONS: [(&str, f64, f64); 10] = [
    ("upper_engine", 120.0, 120.0),
    ("medbay", 300.0, 140.0),
    ("cafeteria", 490.0, 100.0),
    ("weapons", 700.0, 90.0),
    ("oxygen", 760.0, 210.0),
    ("navigation", 900.0, 150.0),
    ("security", 170.0, 260.0),
    ("lower_engine", 130.0, 410.0),
    ("electrical", 380.0, 400.0),
    ("storage", 560.0, 330.0),
];

impl MapLayout {
    pub fn for_map(map: &Map) -> MapLayout {
        let rooms: Vec<&RoomId> = map.rooms().collect();
        let default_covers = rooms
            .iter()
            .all(|r| DEFAULT_POSITIONS.iter().any(|(name, _, _)| *name == r.as_str()))
            && rooms.len() == DEFAULT_POSITIONS.len();
        if default_covers {
            let positions = DEFAULT_POSITIONS
                .iter()
                .map(|(name, x, y)| (RoomId::new(name), (*x, *y)))
                .collect();
            return MapLayout { positions };
        }
        MapLayout { positions: force_directed(map) }
    }

    pub fn position(&self, room: &RoomId) -> (f64, f64) {
        *self.positions.get(room).expect("room has a layout position")
    }
}

/// Force-directed fallback for custom maps: deterministic circular start,
/// fixed iteration count, pure f64 arithmetic.
fn force_directed(map: &Map) -> BTreeMap<RoomId, (f64, f64)> {
    let rooms: Vec<RoomId> = map.rooms().cloned().collect();
    let n = rooms.len();
    let cx = CANVAS_W / 2.0;
    let cy = CANVAS_H / 2.0;
    let radius = (CANVAS_H / 2.0) - 70.0;

    let mut pos: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let angle = (i as f64) * std::f64::consts::TAU / (n as f64);
            (cx + radius * angle.cos(), cy + radius * angle.sin())
        })
        .collect();

    if n <= 2 {
        return rooms.into_iter().zip(pos).collect();
    }

    let index: BTreeMap<&RoomId, usize> = rooms.iter().zip(0..).collect();
    let edges: Vec<(usize, usize, f64)> = map
        .corridors()
        .map(|(a, b, w)| (index[a], index[b], w as f64))
        .collect();

    let spring = 90.0;
    for _ in 0..200 {
        let mut force = vec![(0.0f64, 0.0f64); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = pos[i].0 - pos[j].0;
                let dy = pos[i].1 - pos[j].1;
                let d2 = (dx * dx + dy * dy).max(1.0);
                let d = d2.sqrt();
                let repulse = 240_000.0 / d2;
                force[i].0 += repulse * dx / d;
                force[i].1 += repulse * dy / d;
                force[j].0 -= repulse * dx / d;
                force[j].1 -= repulse * dy / d;
            }
        }
        for &(i, j, w) in &edges {
            let dx = pos[i].0 - pos[j].0;
            let dy = pos[i].1 - pos[j].1;
            let d = (dx * dx + dy * dy).sqrt().max(1.0);
            let rest = spring * w;
            let pull = 0.02 * (d - rest);
            force[i].0 -= pull * dx / d;
            force[i].1 -= pull * dy / d;
            force[j].0 += pull * dx / d;
            force[j].1 += pull * dy / d;
        }
        for i in 0..n {
            pos[i].0 = (pos[i].0 + force[i].0.clamp(-12.0, 12.0)).clamp(60.0, CANVAS_W - 60.0);
            pos[i].1 = (pos[i].1 + force[i].1.clamp(-12.0, 12.0)).clamp(50.0, CANVAS_H - 50.0);
        }
    }

    // Round to stop float-format jitter from reaching the SVG output.
    rooms
        .into_iter()
        .zip(pos.into_iter().map(|(x, y)| ((x * 10.0).round() / 10.0, (y * 10.0).round() / 10.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map_uses_authored_layout() {
        let map = Map::default_map();
        let layout = MapLayout::for_map(&map);
        assert_eq!(layout.position(&RoomId::new("cafeteria")), (490.0, 100.0));
    }

    #[test]
    fn custom_map_layout_is_deterministic() {
        let map = Map::load(
            r#"
            rooms = ["a", "b", "c", "d"]
            emergency_room = "a"
            [[corridors]]
            a = "a"
            b = "b"
            weight = 1
            [[corridors]]
            a = "b"
            b = "c"
            weight = 2
            [[corridors]]
            a = "c"
            b = "d"
            weight = 1
            [[corridors]]
            a = "d"
            b = "a"
            weight = 1
            "#,
        )
        .unwrap();
        let l1 = MapLayout::for_map(&map);
        let l2 = MapLayout::for_map(&map);
        for room in map.rooms() {
            assert_eq!(l1.position(room), l2.position(room));
        }
    }
}
