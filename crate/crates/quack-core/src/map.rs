//! Weighted room-graph maps: loading, validation, adjacency and travel queries.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled default map config (10 rooms, 14 corridors).
pub const DEFAULT_MAP_TOML: &str = include_str!("../assets/maps/default.toml");

/// Normalized room identifier: lowercase, whitespace runs collapsed to `_`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomId(String);

impl RoomId {
    pub fn new(raw: &str) -> Self {
        let mut out = String::with_capacity(raw.len());
        let mut pending_sep = false;
        for ch in raw.trim().chars() {
            if ch.is_whitespace() || ch == '_' || ch == '-' {
                pending_sep = !out.is_empty();
            } else {
                if pending_sep {
                    out.push('_');
                    pending_sep = false;
                }
                out.extend(ch.to_lowercase());
            }
        }
        RoomId(out)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Collapsed form used for alias matching ("med bay" / "med_bay" -> "medbay").
    pub fn squashed(&self) -> String {
        self.0.replace('_', "")
    }
}

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("map config parse failure: {0}")]
    Parse(String),
    #[error("map has no rooms")]
    EmptyRooms,
    #[error("duplicate room `{0}`")]
    DuplicateRoom(RoomId),
    #[error("empty room name in config")]
    EmptyRoomName,
    #[error("unknown room `{0}`")]
    UnknownRoom(RoomId),
    #[error("corridor {a}-{b} has invalid weight {weight} (must be >= 1)")]
    InvalidWeight { a: RoomId, b: RoomId, weight: i64 },
    #[error("self-loop corridor at `{0}`")]
    SelfLoop(RoomId),
    #[error("duplicate corridor {a}-{b}")]
    DuplicateCorridor { a: RoomId, b: RoomId },
    #[error("map is disconnected: `{0}` unreachable from `{1}`")]
    Disconnected(RoomId, RoomId),
}

/// On-disk / in-header map description. Field order is the canonical one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapConfig {
    #[serde(default = "default_map_name")]
    pub name: String,
    pub rooms: Vec<String>,
    #[serde(default)]
    pub task_rooms: Vec<String>,
    pub emergency_room: String,
    pub corridors: Vec<CorridorConfig>,
}

fn default_map_name() -> String {
    "unnamed".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorridorConfig {
    pub a: String,
    pub b: String,
    pub weight: i64,
}

/// Undirected weighted room graph with task anchors and the emergency-button room.
///
/// Immutable after load; safe to share across concurrently running games.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Map {
    name: String,
    rooms: BTreeSet<RoomId>,
    // Key is the (min, max) oriented pair; adjacency below is derived.
    corridors: BTreeMap<(RoomId, RoomId), u32>,
    adjacency: BTreeMap<RoomId, Vec<(RoomId, u32)>>,
    task_rooms: BTreeSet<RoomId>,
    emergency_room: RoomId,
}

impl Map {
    /// Parses and validates a map-config document (TOML).
    pub fn load(source: &str) -> Result<Map, MapError> {
        let config: MapConfig = toml::from_str(source).map_err(|e| MapError::Parse(e.to_string()))?;
        Map::from_config(&config)
    }

    /// The bundled default map.
    pub fn default_map() -> Map {
        Map::load(DEFAULT_MAP_TOML).expect("bundled default map is valid")
    }

    pub fn from_config(config: &MapConfig) -> Result<Map, MapError> {
        if config.rooms.is_empty() {
            return Err(MapError::EmptyRooms);
        }
        let mut rooms = BTreeSet::new();
        for raw in &config.rooms {
            let id = RoomId::new(raw);
            if id.as_str().is_empty() {
                return Err(MapError::EmptyRoomName);
            }
            if !rooms.insert(id.clone()) {
                return Err(MapError::DuplicateRoom(id));
            }
        }

        let mut corridors = BTreeMap::new();
        for c in &config.corridors {
            let a = RoomId::new(&c.a);
            let b = RoomId::new(&c.b);
            for end in [&a, &b] {
                if !rooms.contains(end) {
                    return Err(MapError::UnknownRoom(end.clone()));
                }
            }
            if a == b {
                return Err(MapError::SelfLoop(a));
            }
            if c.weight < 1 || c.weight > u32::MAX as i64 {
                return Err(MapError::InvalidWeight { a, b, weight: c.weight });
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if corridors.insert(key.clone(), c.weight as u32).is_some() {
                return Err(MapError::DuplicateCorridor { a: key.0, b: key.1 });
            }
        }

        let mut adjacency: BTreeMap<RoomId, Vec<(RoomId, u32)>> =
            rooms.iter().map(|r| (r.clone(), Vec::new())).collect();
        for ((a, b), w) in &corridors {
            adjacency.get_mut(a).unwrap().push((b.clone(), *w));
            adjacency.get_mut(b).unwrap().push((a.clone(), *w));
        }
        for neighbors in adjacency.values_mut() {
            neighbors.sort();
        }

        let emergency_room = RoomId::new(&config.emergency_room);
        if !rooms.contains(&emergency_room) {
            return Err(MapError::UnknownRoom(emergency_room));
        }

        let mut task_rooms = BTreeSet::new();
        for raw in &config.task_rooms {
            let id = RoomId::new(raw);
            if !rooms.contains(&id) {
                return Err(MapError::UnknownRoom(id));
            }
            task_rooms.insert(id);
        }

        // Connectivity check from the lexicographically first room.
        let start = rooms.iter().next().unwrap().clone();
        let mut seen = BTreeSet::new();
        let mut stack = vec![start.clone()];
        while let Some(r) = stack.pop() {
            if seen.insert(r.clone()) {
                for (n, _) in &adjacency[&r] {
                    if !seen.contains(n) {
                        stack.push(n.clone());
                    }
                }
            }
        }
        if let Some(unreachable) = rooms.iter().find(|r| !seen.contains(*r)) {
            return Err(MapError::Disconnected(unreachable.clone(), start));
        }

        Ok(Map {
            name: config.name.clone(),
            rooms,
            corridors,
            adjacency,
            task_rooms,
            emergency_room,
        })
    }

    /// Canonical config form (rooms and corridors sorted); identical maps
    /// produce identical configs.
    pub fn to_config(&self) -> MapConfig {
        MapConfig {
            name: self.name.clone(),
            rooms: self.rooms.iter().map(|r| r.as_str().to_string()).collect(),
            task_rooms: self.task_rooms.iter().map(|r| r.as_str().to_string()).collect(),
            emergency_room: self.emergency_room.as_str().to_string(),
            corridors: self
                .corridors
                .iter()
                .map(|((a, b), w)| CorridorConfig {
                    a: a.as_str().to_string(),
                    b: b.as_str().to_string(),
                    weight: *w as i64,
                })
                .collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rooms(&self) -> impl Iterator<Item = &RoomId> {
        self.rooms.iter()
    }

    pub fn room_count(&self) -> usize {
        self.rooms.len()
    }

    pub fn corridor_count(&self) -> usize {
        self.corridors.len()
    }

    pub fn corridors(&self) -> impl Iterator<Item = (&RoomId, &RoomId, u32)> {
        self.corridors.iter().map(|((a, b), w)| (a, b, *w))
    }

    pub fn contains(&self, room: &RoomId) -> bool {
        self.rooms.contains(room)
    }

    pub fn task_rooms(&self) -> impl Iterator<Item = &RoomId> {
        self.task_rooms.iter()
    }

    pub fn task_room_count(&self) -> usize {
        self.task_rooms.len()
    }

    pub fn emergency_room(&self) -> &RoomId {
        &self.emergency_room
    }

    pub fn weight(&self, a: &RoomId, b: &RoomId) -> Option<u32> {
        let key = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        self.corridors.get(&key).copied()
    }

    /// Neighbors of `r` with corridor weights, ordered lexicographically.
    pub fn adjacent(&self, r: &RoomId) -> Result<&[(RoomId, u32)], MapError> {
        self.adjacency
            .get(r)
            .map(|v| v.as_slice())
            .ok_or_else(|| MapError::UnknownRoom(r.clone()))
    }

    /// Minimal-cost path from `a` to `b`; ties broken lexicographically by
    /// the full room sequence.
    pub fn shortest_travel(&self, a: &RoomId, b: &RoomId) -> Result<(Vec<RoomId>, u32), MapError> {
        for r in [a, b] {
            if !self.rooms.contains(r) {
                return Err(MapError::UnknownRoom(r.clone()));
            }
        }
        // Uniform-cost search popping the smallest (cost, path); the first
        // pop of each room is its optimal, lexicographically least path.
        // Fine for the map sizes this engine targets.
        let mut heap: BinaryHeap<std::cmp::Reverse<(u32, Vec<RoomId>)>> = BinaryHeap::new();
        heap.push(std::cmp::Reverse((0, vec![a.clone()])));
        let mut done: BTreeSet<RoomId> = BTreeSet::new();
        while let Some(std::cmp::Reverse((cost, path))) = heap.pop() {
            let here = path.last().unwrap().clone();
            if here == *b {
                return Ok((path, cost));
            }
            if !done.insert(here.clone()) {
                continue;
            }
            for (next, w) in &self.adjacency[&here] {
                if !done.contains(next) {
                    let mut p = path.clone();
                    p.push(next.clone());
                    heap.push(std::cmp::Reverse((cost + w, p)));
                }
            }
        }
        unreachable!("map is connected by construction")
    }

    /// Resolves a possibly-aliased room name ("Med Bay", "med_bay") against
    /// this map's rooms.
    pub fn resolve_room(&self, raw: &str) -> Option<RoomId> {
        let id = RoomId::new(raw);
        if self.rooms.contains(&id) {
            return Some(id);
        }
        let squashed = id.squashed();
        self.rooms.iter().find(|r| r.squashed() == squashed).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_room_map() -> Map {
        Map::load(
            r#"
            rooms = ["a", "b"]
            emergency_room = "a"
            task_rooms = ["b"]
            [[corridors]]
            a = "a"
            b = "b"
            weight = 1
            "#,
        )
        .unwrap()
    }

    #[test]
    fn default_map_matches_documented_shape() {
        let map = Map::default_map();
        assert_eq!(map.room_count(), 10);
        assert_eq!(map.corridor_count(), 14);
        let names: Vec<&str> = map.rooms().map(|r| r.as_str()).collect();
        for expected in [
            "cafeteria",
            "oxygen",
            "weapons",
            "upper_engine",
            "medbay",
            "electrical",
            "security",
            "lower_engine",
            "storage",
            "navigation",
        ] {
            assert!(names.contains(&expected), "missing room {expected}");
        }
        for (_, _, w) in map.corridors() {
            assert!((1..=3).contains(&w));
        }
        assert_eq!(map.emergency_room().as_str(), "cafeteria");
        assert_eq!(map.task_room_count(), 10);
        // Every room has degree >= 2.
        for r in map.rooms() {
            assert!(map.adjacent(r).unwrap().len() >= 2, "degree of {r} too low");
        }
    }

    #[test]
    fn minimal_two_room_map_loads() {
        let map = two_room_map();
        assert_eq!(map.room_count(), 2);
        let a = RoomId::new("a");
        let b = RoomId::new("b");
        assert_eq!(map.adjacent(&a).unwrap(), &[(b.clone(), 1)]);
        assert_eq!(map.shortest_travel(&a, &b).unwrap(), (vec![a.clone(), b], 1));
        assert_eq!(map.shortest_travel(&a, &a).unwrap(), (vec![a], 0));
    }

    #[test]
    fn room_names_normalize() {
        assert_eq!(RoomId::new("Med Bay").as_str(), "med_bay");
        assert_eq!(RoomId::new("  UPPER   engine ").as_str(), "upper_engine");
        assert_eq!(RoomId::new("med-bay").squashed(), "medbay");
        let map = Map::default_map();
        assert_eq!(map.resolve_room("Med Bay").unwrap().as_str(), "medbay");
        assert_eq!(map.resolve_room("upper engine").unwrap().as_str(), "upper_engine");
        assert!(map.resolve_room("bridge").is_none());
    }

    #[test]
    fn load_errors_name_the_offending_element() {
        let dup = Map::load(
            r#"
            rooms = ["a", "A"]
            emergency_room = "a"
            [[corridors]]
            a = "a"
            b = "A"
            weight = 1
            "#,
        );
        assert!(matches!(dup, Err(MapError::DuplicateRoom(r)) if r.as_str() == "a"));

        let weight = Map::load(
            r#"
            rooms = ["a", "b"]
            emergency_room = "a"
            [[corridors]]
            a = "a"
            b = "b"
            weight = 0
            "#,
        );
        assert!(matches!(weight, Err(MapError::InvalidWeight { weight: 0, .. })));

        let disconnected = Map::load(
            r#"
            rooms = ["a", "b", "c"]
            emergency_room = "a"
            [[corridors]]
            a = "a"
            b = "b"
            weight = 1
            "#,
        );
        assert!(matches!(disconnected, Err(MapError::Disconnected(..))));

        let unknown = Map::load(
            r#"
            rooms = ["a", "b"]
            emergency_room = "z"
            [[corridors]]
            a = "a"
            b = "b"
            weight = 1
            "#,
        );
        assert!(matches!(unknown, Err(MapError::UnknownRoom(r)) if r.as_str() == "z"));

        assert!(matches!(Map::load("rooms = ["), Err(MapError::Parse(_))));
    }

    #[test]
    fn adjacency_is_symmetric_with_equal_weights() {
        let map = Map::default_map();
        for a in map.rooms() {
            for (b, w) in map.adjacent(a).unwrap() {
                let back = map.adjacent(b).unwrap();
                assert!(back.iter().any(|(r, w2)| r == a && w2 == w));
            }
        }
    }

    /// Exhaustive simple-path enumeration; independent of the search in
    /// `shortest_travel`.
    fn brute_force_cost(map: &Map, a: &RoomId, b: &RoomId) -> u32 {
        fn walk(
            map: &Map,
            here: &RoomId,
            b: &RoomId,
            cost: u32,
            visited: &mut BTreeSet<RoomId>,
            best: &mut u32,
        ) {
            if here == b {
                *best = (*best).min(cost);
                return;
            }
            for (next, w) in map.adjacent(here).unwrap() {
                if !visited.contains(next) {
                    visited.insert(next.clone());
                    walk(map, next, b, cost + w, visited, best);
                    visited.remove(next);
                }
            }
        }
        let mut best = u32::MAX;
        let mut visited = BTreeSet::from([a.clone()]);
        walk(map, a, b, 0, &mut visited, &mut best);
        best
    }

    #[test]
    fn shortest_travel_matches_brute_force_on_default_map() {
        let map = Map::default_map();
        let rooms: Vec<RoomId> = map.rooms().cloned().collect();
        for a in &rooms {
            for b in &rooms {
                let (path, cost) = map.shortest_travel(a, b).unwrap();
                assert_eq!(cost, brute_force_cost(&map, a, b), "{a} -> {b}");
                assert_eq!(path.first(), Some(a));
                assert_eq!(path.last(), Some(b));
                // Path cost adds up edge by edge.
                let mut sum = 0;
                for pair in path.windows(2) {
                    sum += map.weight(&pair[0], &pair[1]).expect("path uses real corridors");
                }
                assert_eq!(sum, cost);
                // Symmetric cost.
                assert_eq!(map.shortest_travel(b, a).unwrap().1, cost);
            }
        }
    }

    #[test]
    fn default_map_diameter_within_budget() {
        let map = Map::default_map();
        let rooms: Vec<RoomId> = map.rooms().cloned().collect();
        let mut diameter = 0;
        for a in &rooms {
            for b in &rooms {
                diameter = diameter.max(map.shortest_travel(a, b).unwrap().1);
            }
        }
        assert!(diameter <= 6, "diameter {diameter} exceeds 6 ticks");
    }

    #[test]
    fn load_is_pure_in_config_bytes() {
        let m1 = Map::load(DEFAULT_MAP_TOML).unwrap();
        let m2 = Map::load(DEFAULT_MAP_TOML).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.to_config(), m2.to_config());
    }
}
