use crate::Digest;

use super::ProtocolError;

/// Row-major RGB framebuffer, 3 bytes per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct Framebuffer {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Framebuffer {
    /// All-black framebuffer.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height * 3],
        }
    }

    pub fn from_pixels(
        width: usize,
        height: usize,
        pixels: Vec<u8>,
    ) -> Result<Self, ProtocolError> {
        if pixels.len() != width * height * 3 {
            return Err(ProtocolError::BadTileLength {
                expected: width * height * 3,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Fills the rectangle `[x, x+w) × [y, y+h)`, clipped to the frame.
    pub fn fill_rect(&mut self, x: usize, y: usize, w: usize, h: usize, rgb: [u8; 3]) {
        let x1 = (x + w).min(self.width);
        let y1 = (y + h).min(self.height);
        for row in y.min(y1)..y1 {
            let start = (row * self.width + x) * 3;
            let end = (row * self.width + x1) * 3;
            for px in self.pixels[start..end].chunks_exact_mut(3) {
                px.copy_from_slice(&rgb);
            }
        }
    }

    pub fn check_tiling(&self, tile: usize) -> Result<(), ProtocolError> {
        if tile == 0 || self.width % tile != 0 || self.height % tile != 0 {
            return Err(ProtocolError::BadGeometry {
                width: self.width,
                height: self.height,
                tile,
            });
        }
        Ok(())
    }

    /// Tile grid dimensions (columns, rows).
    pub fn tile_grid(&self, tile: usize) -> (usize, usize) {
        (self.width / tile, self.height / tile)
    }

    /// One tile row as a contiguous byte slice.
    pub(crate) fn tile_row_slice(&self, col: usize, row: usize, tile: usize, line: usize) -> &[u8] {
        let y = row * tile + line;
        let start = (y * self.width + col * tile) * 3;
        &self.pixels[start..start + tile * 3]
    }

    /// Copies out the pixels of tile (`col`, `row`) in row-major order.
    pub fn tile_pixels(&self, col: usize, row: usize, tile: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(tile * tile * 3);
        for line in 0..tile {
            out.extend_from_slice(self.tile_row_slice(col, row, tile, line));
        }
        out
    }

    pub fn write_tile(&mut self, col: usize, row: usize, tile: usize, pixels: &[u8]) {
        debug_assert_eq!(pixels.len(), tile * tile * 3);
        for (line, src) in pixels.chunks_exact(tile * 3).enumerate() {
            let y = row * tile + line;
            let start = (y * self.width + col * tile) * 3;
            self.pixels[start..start + tile * 3].copy_from_slice(src);
        }
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.pixels)
    }
}

impl std::fmt::Debug for Framebuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Framebuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("digest", &self.digest())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiles_round_trip() {
        let mut fb = Framebuffer::new(32, 32);
        fb.fill_rect(16, 0, 16, 16, [1, 2, 3]);
        let t = fb.tile_pixels(1, 0, 16);
        assert!(t.chunks(3).all(|p| p == [1, 2, 3]));
        let mut other = Framebuffer::new(32, 32);
        other.write_tile(1, 0, 16, &t);
        assert_eq!(other, fb);
    }

    #[test]
    fn fill_rect_clips() {
        let mut fb = Framebuffer::new(8, 8);
        fb.fill_rect(6, 6, 10, 10, [9, 9, 9]);
        assert_eq!(fb.pixel(7, 7), [9, 9, 9]);
        assert_eq!(fb.pixel(5, 7), [0, 0, 0]);
    }

    #[test]
    fn wrong_pixel_count_rejected() {
        assert!(Framebuffer::from_pixels(2, 2, vec![0; 11]).is_err());
    }
}
