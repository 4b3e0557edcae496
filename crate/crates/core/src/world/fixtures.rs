//! Bundled maps.

use super::{load_map, WorldMap};

pub const HALLWAY: &str = include_str!("maps/hallway.map");
pub const HALLWAY_PEDS: &str = include_str!("maps/hallway-peds.map");
pub const CLASSROOM: &str = include_str!("maps/classroom.map");

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 3] = ["hallway", "hallway-peds", "classroom"];

pub fn text(name: &str) -> Option<&'static str> {
    match name {
        "hallway" => Some(HALLWAY),
        "hallway-peds" => Some(HALLWAY_PEDS),
        "classroom" => Some(CLASSROOM),
        _ => None,
    }
}

pub fn by_name(name: &str) -> Option<WorldMap> {
    text(name).map(|t| load_map(t).expect("bundled map is valid"))
}

pub fn hallway() -> WorldMap {
    load_map(HALLWAY).expect("bundled map is valid")
}

pub fn hallway_peds() -> WorldMap {
    load_map(HALLWAY_PEDS).expect("bundled map is valid")
}

pub fn classroom() -> WorldMap {
    load_map(CLASSROOM).expect("bundled map is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_maps_load() {
        for n in NAMES {
            let m = by_name(n).unwrap();
            assert_eq!(m.name, n);
            assert!(!m.robot_collides(m.spawn.position()), "{n}");
            assert_eq!(m.route.len(), 4);
        }
        assert_eq!(hallway_peds().pedestrians.len(), 3);
        assert!(by_name("atrium").is_none());
    }
}
