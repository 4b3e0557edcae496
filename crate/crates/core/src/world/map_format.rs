//! ASCII map documents.
//!
//! ```text
//! MS3L-MAP v1 cell=0.25 name=demo
//! #####
//! #S.W0#
//! #####
//! spawn_heading=0
//! PED speed=0.5 radius=0.2 path=(1,1);(1,3)
//! ```

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Cell, Grid, PedestrianSpec, Pose, Vec2, WorldMap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("cell size must be positive")]
    CellSize,
    #[error("grid must be at least 3x3, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("spawn occupied")]
    SpawnOccupied,
    #[error("route waypoint {0} occupied")]
    WaypointOccupied(usize),
    #[error("route waypoint {0} missing")]
    WaypointMissing(usize),
    #[error("pedestrian {0} has negative speed or non-positive radius")]
    Pedestrian(usize),
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, column, message: message.into() }
}

fn parse_f64(s: &str, line: usize, column: usize) -> Result<f64, ParseError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| err(line, column, alloc::format!("expected a number, found `{s}`")))
}

/// Parses and validates a map document.
pub fn load_map(text: &str) -> Result<WorldMap, MapError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let (hline, header) = lines.next().ok_or_else(|| err(1, 1, "empty document"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("MS3L-MAP") {
        return Err(err(hline, 1, "expected `MS3L-MAP` header").into());
    }
    if parts.next() != Some("v1") {
        return Err(err(hline, 10, "unsupported map version").into());
    }
    let mut cell_size = None;
    let mut name = String::new();
    for part in parts {
        let col = column_of(header, part);
        match part.split_once('=') {
            Some(("cell", v)) => cell_size = Some(parse_f64(v, hline, col + 5)?),
            Some(("name", v)) => name = v.to_string(),
            _ => return Err(err(hline, col, alloc::format!("unknown header field `{part}`")).into()),
        }
    }
    let cell_size = cell_size.ok_or_else(|| err(hline, header.len() + 1, "missing `cell=`"))?;

    let mut rows: Vec<Vec<Cell>> = Vec::new();
    let mut spawn_cell = None;
    let mut waypoints: Vec<(usize, usize, usize, usize, usize)> = Vec::new();
    let mut heading = 0.0;
    let mut peds = Vec::new();
    let mut in_grid = true;

    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if in_grid && (line.starts_with("spawn_heading=") || line.starts_with("PED")) {
            in_grid = false;
        }
        if in_grid {
            let row = rows.len();
            let cells = parse_grid_line(line, ln, row, &mut spawn_cell, &mut waypoints)?;
            if let Some(first) = rows.first() {
                if first.len() != cells.len() {
                    return Err(err(
                        ln,
                        line.len().max(1),
                        alloc::format!("row has {} cells, expected {}", cells.len(), first.len()),
                    )
                    .into());
                }
            }
            rows.push(cells);
        } else if let Some(v) = line.strip_prefix("spawn_heading=") {
            heading = parse_f64(v.trim(), ln, 15)?;
        } else if line.starts_with("PED ") {
            peds.push(parse_ped(line, ln)?);
        } else {
            return Err(err(ln, 1, "expected `spawn_heading=` or `PED` line after the grid").into());
        }
    }

    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let grid = Grid::new(nrows, ncols, rows.into_iter().flatten().collect())
        .ok_or_else(|| err(1, 1, "ragged grid"))?;
    if nrows < 3 || ncols < 3 {
        return Err(MapError::TooSmall { rows: nrows, cols: ncols });
    }
    let (sr, sc) = spawn_cell.ok_or_else(|| err(2, 1, "grid has no `S` spawn cell"))?;

    waypoints.sort_by_key(|w| w.0);
    for (i, w) in waypoints.iter().enumerate() {
        if w.0 != i {
            if w.0 < i {
                return Err(err(w.3, w.4, alloc::format!("duplicate waypoint W{}", w.0)).into());
            }
            return Err(MapError::WaypointMissing(i));
        }
    }

    let center = |r: usize, c: usize| {
        Vec2::new((c as f64 + 0.5) * cell_size, (nrows as f64 - r as f64 - 0.5) * cell_size)
    };
    let spawn_pos = center(sr, sc);
    let route = waypoints.iter().map(|w| center(w.1, w.2)).collect();
    let mut ped_specs = Vec::new();
    for (ln, speed, radius, path) in peds {
        let mut pts = Vec::new();
        for (r, c, col) in path {
            if r >= nrows || c >= ncols {
                return Err(err(ln, col, alloc::format!("cell ({r},{c}) outside the grid")).into());
            }
            pts.push(center(r, c));
        }
        ped_specs.push(PedestrianSpec { start: pts[0], path: pts, speed, radius });
    }

    WorldMap::new(&name, grid, cell_size, Pose::new(spawn_pos.x, spawn_pos.y, heading), route, ped_specs)
}

fn column_of(line: &str, part: &str) -> usize {
    part.as_ptr() as usize - line.as_ptr() as usize + 1
}

type Waypoint = (usize, usize, usize, usize, usize);

fn parse_grid_line(
    line: &str,
    ln: usize,
    row: usize,
    spawn: &mut Option<(usize, usize)>,
    waypoints: &mut Vec<Waypoint>,
) -> Result<Vec<Cell>, ParseError> {
    let bytes = line.as_bytes();
    let mut cells = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let col = i + 1;
        match bytes[i] {
            b'#' => cells.push(Cell::Wall),
            b'.' => cells.push(Cell::Free),
            b'F' => cells.push(Cell::Furniture),
            b'S' => {
                if spawn.is_some() {
                    return Err(err(ln, col, "second `S` spawn cell"));
                }
                *spawn = Some((row, cells.len()));
                cells.push(Cell::Free);
            }
            b'W' => {
                let start = i + 1;
                let mut end = start;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
                let k: usize = line[start..end]
                    .parse()
                    .map_err(|_| err(ln, col, "`W` must be followed by a waypoint index"))?;
                waypoints.push((k, row, cells.len(), ln, col));
                cells.push(Cell::Free);
                i = end;
                continue;
            }
            other => {
                return Err(err(ln, col, alloc::format!("unexpected character `{}`", other as char)));
            }
        }
        i += 1;
    }
    Ok(cells)
}

type PedLine = (usize, f64, f64, Vec<(usize, usize, usize)>);

fn parse_ped(line: &str, ln: usize) -> Result<PedLine, ParseError> {
    let mut speed = None;
    let mut radius = None;
    let mut path = None;
    for part in line.split_whitespace().skip(1) {
        let col = column_of(line, part);
        match part.split_once('=') {
            Some(("speed", v)) => speed = Some(parse_f64(v, ln, col + 6)?),
            Some(("radius", v)) => radius = Some(parse_f64(v, ln, col + 7)?),
            Some(("path", v)) => path = Some(parse_path(line, v, ln)?),
            _ => return Err(err(ln, col, alloc::format!("unknown pedestrian field `{part}`"))),
        }
    }
    let end = line.len() + 1;
    Ok((
        ln,
        speed.ok_or_else(|| err(ln, end, "pedestrian missing `speed=`"))?,
        radius.ok_or_else(|| err(ln, end, "pedestrian missing `radius=`"))?,
        path.ok_or_else(|| err(ln, end, "pedestrian missing `path=`"))?,
    ))
}

fn parse_path(line: &str, v: &str, ln: usize) -> Result<Vec<(usize, usize, usize)>, ParseError> {
    let mut out = Vec::new();
    for item in v.split(';') {
        let col = column_of(line, item);
        let inner = item
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| err(ln, col, "expected `(row,col)`"))?;
        let (r, c) = inner.split_once(',').ok_or_else(|| err(ln, col, "expected `(row,col)`"))?;
        let r = r.trim().parse().map_err(|_| err(ln, col + 1, "bad row index"))?;
        let c = c.trim().parse().map_err(|_| err(ln, col + 1, "bad column index"))?;
        out.push((r, c, col));
    }
    if out.is_empty() {
        return Err(err(ln, 1, "empty pedestrian path"));
    }
    Ok(out)
}
