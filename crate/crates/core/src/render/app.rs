use std::collections::BTreeMap;

use crate::protocol::{Action, Framebuffer, InputEvent, DEFAULT_TILE_SIZE};

use super::raster::line_pixels;
use super::RenderError;

pub const GLYPH_WIDTH: usize = 8;
pub const GLYPH_HEIGHT: usize = 16;

const SEGMENT_COLOR: [u8; 3] = [255, 255, 255];

/// Canvas application state for one session.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AppState {
    width: usize,
    height: usize,
    pub cursor_col: u16,
    pub cursor_row: u16,
    pub drawn_segments: Vec<((u16, u16), (u16, u16))>,
    pub typed_cells: BTreeMap<(u16, u16), u16>,
    pub drag_origin: Option<(u16, u16)>,
}

impl AppState {
    pub fn new(width: usize, height: usize, tile: usize) -> Result<Self, RenderError> {
        let ok = width > 0
            && height > 0
            && tile > 0
            && width <= u16::MAX as usize
            && height <= u16::MAX as usize
            && width % GLYPH_WIDTH == 0
            && height % GLYPH_HEIGHT == 0
            && width % tile == 0
            && height % tile == 0;
        if !ok {
            return Err(RenderError::BadGeometry {
                width,
                height,
                tile,
            });
        }
        Ok(Self {
            width,
            height,
            cursor_col: 0,
            cursor_row: 0,
            drawn_segments: Vec::new(),
            typed_cells: BTreeMap::new(),
            drag_origin: None,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Glyph grid (columns, rows).
    pub fn grid(&self) -> (u16, u16) {
        (
            (self.width / GLYPH_WIDTH) as u16,
            (self.height / GLYPH_HEIGHT) as u16,
        )
    }

    /// Applies one event. Out-of-range coordinates are the caller's responsibility.
    pub fn apply_event(&mut self, e: &InputEvent) {
        match e.action {
            Action::KeyDown { keycode } => {
                self.typed_cells
                    .insert((self.cursor_col, self.cursor_row), keycode);
                let (cols, rows) = self.grid();
                self.cursor_col += 1;
                if self.cursor_col == cols {
                    self.cursor_col = 0;
                    self.cursor_row += 1;
                    if self.cursor_row == rows {
                        self.cursor_row = 0;
                    }
                }
            }
            Action::KeyUp { .. } => {}
            Action::MouseDown { x, y, .. } => self.drag_origin = Some((x, y)),
            Action::MouseMove { x, y } => {
                if let Some(origin) = self.drag_origin {
                    self.drawn_segments.push((origin, (x, y)));
                    self.drag_origin = Some((x, y));
                }
            }
            Action::MouseUp { .. } => self.drag_origin = None,
        }
    }
}

/// Fresh 8×16-grid canvas with the default tile size.
pub fn new_session(width: usize, height: usize) -> Result<AppState, RenderError> {
    AppState::new(width, height, DEFAULT_TILE_SIZE)
}

pub fn glyph_color(keycode: u16) -> [u8; 3] {
    let c = keycode as u32;
    [
        (c % 256) as u8,
        ((3 * c) % 256) as u8,
        ((7 * c) % 256) as u8,
    ]
}

/// Black background, glyph cells, then segments in white on top.
pub fn render(state: &AppState) -> Framebuffer {
    let mut fb = Framebuffer::new(state.width, state.height);
    for (&(col, row), &code) in &state.typed_cells {
        fb.fill_rect(
            col as usize * GLYPH_WIDTH,
            row as usize * GLYPH_HEIGHT,
            GLYPH_WIDTH,
            GLYPH_HEIGHT,
            glyph_color(code),
        );
    }
    for &(a, b) in &state.drawn_segments {
        for (x, y) in line_pixels(a, b) {
            fb.set_pixel(x as usize, y as usize, SEGMENT_COLOR);
        }
    }
    fb
}
