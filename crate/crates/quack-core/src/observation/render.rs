//! SVG emission for the global map view and the local room view.

use std::fmt::Write as _;

use crate::engine::{AgentLocation, EngineError, GameState, MoveDirection, PlayerId};
use crate::map::{Map, RoomId};

use super::layout::{MapLayout, CANVAS_H, CANVAS_W};
use super::RenderedView;

const ROOM_W: f64 = 120.0;
const ROOM_H: f64 = 54.0;

fn fmt1(v: f64) -> String {
    format!("{:.1}", v)
}

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the viewer's two views. The global view shows the full layout,
/// the viewer's own position and task markers, and no other players; the
/// local view shows only what the viewer presently perceives.
pub fn render_views(
    map: &Map,
    state: &GameState,
    viewer: &PlayerId,
) -> Result<(RenderedView, RenderedView), EngineError> {
    let agent = state.agent(viewer).ok_or_else(|| EngineError::UnknownPlayer(viewer.clone()))?;
    if !agent.alive {
        return Err(EngineError::DeadPlayer(viewer.clone()));
    }
    let layout = MapLayout::for_map(map);
    Ok((render_global(map, state, viewer, &layout), render_local(map, state, viewer, &layout)))
}

fn svg_open(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" font-family=\"monospace\">",
        fmt1(w),
        fmt1(h)
    );
    let _ = writeln!(out, "<title>{}</title>", esc(title));
    let _ = writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#10141c\"/>", fmt1(w), fmt1(h));
}

fn room_box(out: &mut String, x: f64, y: f64, label: &str, highlight: bool) {
    let stroke = if highlight { "#ffd75f" } else { "#8fa3bf" };
    let _ = writeln!(
        out,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" rx=\"8\" fill=\"#1d2633\" stroke=\"{}\" stroke-width=\"2\"/>",
        fmt1(x - ROOM_W / 2.0),
        fmt1(y - ROOM_H / 2.0),
        fmt1(ROOM_W),
        fmt1(ROOM_H),
        stroke
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" fill=\"#dce6f2\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        fmt1(x),
        fmt1(y - ROOM_H / 2.0 - 6.0),
        esc(label)
    );
}

fn render_global(map: &Map, state: &GameState, viewer: &PlayerId, layout: &MapLayout) -> RenderedView {
    let agent = state.agent(viewer).expect("viewer exists");
    let mut out = String::new();
    svg_open(&mut out, CANVAS_W, CANVAS_H, &format!("global map for {viewer}"));

    for (a, b, w) in map.corridors() {
        let (ax, ay) = layout.position(a);
        let (bx, by) = layout.position(b);
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#51637d\" stroke-width=\"2\"/>",
            fmt1(ax),
            fmt1(ay),
            fmt1(bx),
            fmt1(by)
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" fill=\"#9db2cc\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            fmt1((ax + bx) / 2.0),
            fmt1((ay + by) / 2.0 - 4.0),
            w
        );
    }

    let viewer_room = agent.current_room();
    for room in map.rooms() {
        let (x, y) = layout.position(room);
        room_box(&mut out, x, y, room.as_str(), viewer_room == Some(room));
        if room == map.emergency_room() {
            let _ = writeln!(
                out,
                "<circle cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"#d64545\"/>",
                fmt1(x - ROOM_W / 2.0 + 12.0),
                fmt1(y + ROOM_H / 2.0 - 12.0)
            );
        }
    }

    // The viewer's own task anchors; no one else's, and no other players.
    for task in &agent.tasks {
        let (x, y) = layout.position(&task.room);
        let fill = if task.completed { "none" } else { "#59c27d" };
        let _ = writeln!(
            out,
            "<path d=\"M {} {} l 8 8 l -8 8 l -8 -8 z\" fill=\"{}\" stroke=\"#59c27d\"/>",
            fmt1(x + ROOM_W / 2.0 - 16.0),
            fmt1(y - 8.0),
            fill
        );
    }

    match agent.location.as_ref().expect("placed agent") {
        AgentLocation::Room(r) => {
            let (x, y) = layout.position(r);
            let _ = writeln!(
                out,
                "<circle cx=\"{}\" cy=\"{}\" r=\"9\" fill=\"#ffd75f\"/>",
                fmt1(x),
                fmt1(y + 8.0)
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" fill=\"#ffd75f\" font-size=\"12\" text-anchor=\"middle\">you</text>",
                fmt1(x),
                fmt1(y + 34.0)
            );
        }
        AgentLocation::Transit { from, to, remaining } => {
            let (fx, fy) = layout.position(from);
            let (tx, ty) = layout.position(to);
            let total = map.weight(from, to).unwrap_or(1).max(1) as f64;
            let frac = 1.0 - (*remaining as f64) / total;
            let x = fx + (tx - fx) * frac;
            let y = fy + (ty - fy) * frac;
            let _ = writeln!(
                out,
                "<circle cx=\"{}\" cy=\"{}\" r=\"9\" fill=\"#ffd75f\"/>",
                fmt1(x),
                fmt1(y)
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" fill=\"#ffd75f\" font-size=\"12\" text-anchor=\"middle\">you (in transit)</text>",
                fmt1(x),
                fmt1(y + 22.0)
            );
        }
    }

    out.push_str("</svg>\n");
    RenderedView { width: CANVAS_W as u32, height: CANVAS_H as u32, svg: out }
}

const LOCAL_W: f64 = 640.0;
const LOCAL_H: f64 = 400.0;

fn render_local(map: &Map, state: &GameState, viewer: &PlayerId, _layout: &MapLayout) -> RenderedView {
    let agent = state.agent(viewer).expect("viewer exists");
    let mut out = String::new();
    svg_open(&mut out, LOCAL_W, LOCAL_H, &format!("local view for {viewer}"));

    match agent.location.as_ref().expect("placed agent") {
        AgentLocation::Transit { from, to, remaining } => {
            // Corridor context only: no room occupants are visible in transit.
            let _ = writeln!(
                out,
                "<rect x=\"40\" y=\"150\" width=\"140\" height=\"70\" rx=\"8\" fill=\"#1d2633\" stroke=\"#8fa3bf\" stroke-width=\"2\"/>"
            );
            let _ = writeln!(
                out,
                "<text x=\"110\" y=\"190\" fill=\"#dce6f2\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
                esc(from.as_str())
            );
            let _ = writeln!(
                out,
                "<rect x=\"460\" y=\"150\" width=\"140\" height=\"70\" rx=\"8\" fill=\"#1d2633\" stroke=\"#8fa3bf\" stroke-width=\"2\"/>"
            );
            let _ = writeln!(
                out,
                "<text x=\"530\" y=\"190\" fill=\"#dce6f2\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
                esc(to.as_str())
            );
            let _ = writeln!(
                out,
                "<line x1=\"180\" y1=\"185\" x2=\"460\" y2=\"185\" stroke=\"#51637d\" stroke-width=\"3\"/>"
            );
            let total = map.weight(from, to).unwrap_or(1).max(1) as f64;
            let frac = 1.0 - (*remaining as f64) / total;
            let x = 180.0 + 280.0 * frac;
            let _ = writeln!(out, "<circle cx=\"{}\" cy=\"185\" r=\"10\" fill=\"#ffd75f\"/>", fmt1(x));
            let _ = writeln!(
                out,
                "<text x=\"320\" y=\"240\" fill=\"#9db2cc\" font-size=\"13\" text-anchor=\"middle\">in transit, {} tick(s) remaining</text>",
                remaining
            );
        }
        AgentLocation::Room(room) => {
            let _ = writeln!(
                out,
                "<rect x=\"60\" y=\"60\" width=\"520\" height=\"260\" rx=\"10\" fill=\"#1d2633\" stroke=\"#ffd75f\" stroke-width=\"2\"/>"
            );
            let _ = writeln!(
                out,
                "<text x=\"320\" y=\"46\" fill=\"#dce6f2\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
                esc(room.as_str())
            );

            // Occupants (always includes the viewer), deterministic order.
            let mut occupants = state.occupants(room);
            occupants.sort();
            let mut x = 120.0;
            for p in &occupants {
                let me = p == viewer;
                let fill = if me { "#ffd75f" } else { "#7fc4e8" };
                let _ = writeln!(
                    out,
                    "<circle cx=\"{}\" cy=\"170\" r=\"14\" fill=\"{}\"/>",
                    fmt1(x),
                    fill
                );
                let label = if me { format!("{p} (you)") } else { p.to_string() };
                let _ = writeln!(
                    out,
                    "<text x=\"{}\" y=\"200\" fill=\"#dce6f2\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
                    fmt1(x),
                    esc(&label)
                );
                x += 90.0;
            }

            let mut bx = 120.0;
            for body in state.bodies.values().filter(|b| &b.room == room) {
                let _ = writeln!(
                    out,
                    "<path d=\"M {} 250 l 18 18 M {} 268 l 18 -18\" stroke=\"#d64545\" stroke-width=\"4\"/>",
                    fmt1(bx),
                    fmt1(bx)
                );
                let _ = writeln!(
                    out,
                    "<text x=\"{}\" y=\"288\" fill=\"#d64545\" font-size=\"12\" text-anchor=\"middle\">{} (body)</text>",
                    fmt1(bx + 9.0),
                    esc(body.victim.as_str())
                );
                bx += 90.0;
            }

            // This tick's witnessed movement, as labelled direction arrows.
            let mut wy = 90.0;
            for w in state.buffers.witnessed_moves.iter().filter(|w| w.witnesses.contains(viewer)) {
                let (x1, x2, label) = match w.direction {
                    MoveDirection::Departed => (540.0, 610.0, format!("{} -> {}", w.mover, w.via)),
                    MoveDirection::Arrived => (610.0, 540.0, format!("{} <- {}", w.mover, w.via)),
                };
                let _ = writeln!(
                    out,
                    "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#e8a33d\" stroke-width=\"3\" marker-end=\"url(#arrow)\"/>",
                    fmt1(x1),
                    fmt1(wy),
                    fmt1(x2),
                    fmt1(wy)
                );
                let _ = writeln!(
                    out,
                    "<text x=\"575\" y=\"{}\" fill=\"#e8a33d\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
                    fmt1(wy - 6.0),
                    esc(&label)
                );
                wy += 34.0;
            }
        }
    }

    out.push_str("</svg>\n");
    RenderedView { width: LOCAL_W as u32, height: LOCAL_H as u32, svg: out }
}
