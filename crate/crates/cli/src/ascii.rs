use arena25::render::{project, RenderConfig};
use arena25::WorldState;

pub const AGENT: char = 'A';
pub const OPPONENT: char = 'O';
pub const OVERLAP: char = '*';
pub const EMPTY: char = '.';

/// One character per pixel; each fighter is drawn at its projected position.
pub fn render(state: &WorldState, rc: &RenderConfig) -> String {
    let (w, h) = (rc.width, rc.height);
    let mut grid = vec![vec![EMPTY; w]; h];
    for (pos, glyph) in [(state.agent.pos, AGENT), (state.opponent.pos, OPPONENT)] {
        let (u, v) = project(pos, &state.config, rc);
        if u < 0 || v < 0 || u as usize >= w || v as usize >= h {
            continue;
        }
        let cell = &mut grid[v as usize][u as usize];
        *cell = if *cell == EMPTY { glyph } else { OVERLAP };
    }
    let mut s = String::with_capacity((w + 1) * h);
    for row in grid {
        s.extend(row);
        s.push('\n');
    }
    s.pop();
    s
}
