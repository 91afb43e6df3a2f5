use super::tile::{decode_tile, encode_tile};
use super::update::{DirtyTile, DirtyTileSet};
use super::{Framebuffer, ProtocolError};

fn tile_differs(
    prev: &Framebuffer,
    next: &Framebuffer,
    col: usize,
    row: usize,
    tile: usize,
) -> bool {
    (0..tile).any(|line| {
        prev.tile_row_slice(col, row, tile, line) != next.tile_row_slice(col, row, tile, line)
    })
}

fn encode_at(fb: &Framebuffer, col: usize, row: usize, tile: usize) -> DirtyTile {
    DirtyTile {
        col: col as u16,
        row: row as u16,
        encoding: encode_tile(&fb.tile_pixels(col, row, tile), tile)
            .expect("tile extracted from framebuffer has the right length"),
    }
}

/// Lists, in row-major tile order, every tile whose pixels differ between `prev` and `next`.
///
/// The returned set has `frame_seq` 0; callers stamp it with [`DirtyTileSet::with_frame_seq`].
pub fn diff_framebuffer(
    prev: &Framebuffer,
    next: &Framebuffer,
    tile: usize,
) -> Result<DirtyTileSet, ProtocolError> {
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(ProtocolError::DimensionMismatch(
            prev.width(),
            prev.height(),
            next.width(),
            next.height(),
        ));
    }
    next.check_tiling(tile)?;
    let (cols, rows) = next.tile_grid(tile);
    let mut tiles = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            if tile_differs(prev, next, col, row, tile) {
                tiles.push(encode_at(next, col, row, tile));
            }
        }
    }
    Ok(DirtyTileSet {
        frame_seq: 0,
        tile_size: tile,
        tiles,
    })
}

/// Every tile of `fb`: the synchronization point sent when a viewer subscribes.
pub fn full_frame(
    fb: &Framebuffer,
    tile: usize,
    frame_seq: u64,
) -> Result<DirtyTileSet, ProtocolError> {
    fb.check_tiling(tile)?;
    let (cols, rows) = fb.tile_grid(tile);
    let tiles = (0..rows)
        .flat_map(|row| (0..cols).map(move |col| (col, row)))
        .map(|(col, row)| encode_at(fb, col, row, tile))
        .collect();
    Ok(DirtyTileSet {
        frame_seq,
        tile_size: tile,
        tiles,
    })
}

pub fn apply_update_in_place(
    fb: &mut Framebuffer,
    update: &DirtyTileSet,
) -> Result<(), ProtocolError> {
    let tile = update.tile_size;
    fb.check_tiling(tile)?;
    let (cols, rows) = fb.tile_grid(tile);
    // validate everything first so a bad update leaves the framebuffer untouched
    let mut decoded = Vec::with_capacity(update.tiles.len());
    for t in &update.tiles {
        if t.col as usize >= cols || t.row as usize >= rows {
            return Err(ProtocolError::TileOutOfBounds {
                col: t.col,
                row: t.row,
            });
        }
        decoded.push(decode_tile(&t.encoding, tile)?);
    }
    for (t, pixels) in update.tiles.iter().zip(decoded) {
        fb.write_tile(t.col as usize, t.row as usize, tile, &pixels);
    }
    Ok(())
}

pub fn apply_update(fb: &Framebuffer, update: &DirtyTileSet) -> Result<Framebuffer, ProtocolError> {
    let mut out = fb.clone();
    apply_update_in_place(&mut out, update)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{decode_update, encode_update};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Per-pixel brute force: a tile is dirty iff some pixel inside it differs.
    fn oracle_dirty(prev: &Framebuffer, next: &Framebuffer, tile: usize) -> Vec<(u16, u16)> {
        let mut dirty = std::collections::BTreeSet::new();
        for y in 0..next.height() {
            for x in 0..next.width() {
                if prev.pixel(x, y) != next.pixel(x, y) {
                    dirty.insert(((y / tile) as u16, (x / tile) as u16));
                }
            }
        }
        dirty.into_iter().map(|(r, c)| (c, r)).collect()
    }

    fn random_pair(rng: &mut ChaCha8Rng) -> (Framebuffer, Framebuffer) {
        let prev_px: Vec<u8> = (0..64 * 64 * 3).map(|_| rng.random_range(0..4u8)).collect();
        let mut next_px = prev_px.clone();
        let changes = rng.random_range(0..40);
        for _ in 0..changes {
            let i = rng.random_range(0..64 * 64) * 3;
            next_px[i + rng.random_range(0..3)] ^= 1 + rng.random_range(0..3u8);
        }
        (
            Framebuffer::from_pixels(64, 64, prev_px).unwrap(),
            Framebuffer::from_pixels(64, 64, next_px).unwrap(),
        )
    }

    #[test]
    fn identical_frames_have_no_dirty_tiles() {
        let fb = Framebuffer::new(64, 64);
        assert!(diff_framebuffer(&fb, &fb, 16).unwrap().is_empty());
    }

    #[test]
    fn single_pixel_dirties_one_tile() {
        let prev = Framebuffer::new(64, 64);
        let mut next = prev.clone();
        next.set_pixel(20, 20, [1, 1, 1]);
        let d = diff_framebuffer(&prev, &next, 16).unwrap();
        let coords: Vec<_> = d.tiles.iter().map(|t| (t.col, t.row)).collect();
        assert_eq!(coords, [(1, 1)]);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Framebuffer::new(64, 64);
        let b = Framebuffer::new(64, 32);
        assert!(matches!(
            diff_framebuffer(&a, &b, 16),
            Err(ProtocolError::DimensionMismatch(..))
        ));
        assert!(matches!(
            diff_framebuffer(&a, &a, 24),
            Err(ProtocolError::BadGeometry { .. })
        ));
    }

    #[test]
    fn random_pairs_match_pixel_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (prev, next) = random_pair(&mut rng);
            let d = diff_framebuffer(&prev, &next, 16).unwrap();
            let got: Vec<_> = d.tiles.iter().map(|t| (t.col, t.row)).collect();
            assert_eq!(got, oracle_dirty(&prev, &next, 16));
            assert_eq!(apply_update(&prev, &d).unwrap().digest(), next.digest());
        }
    }

    #[test]
    fn empty_update_is_identity() {
        let mut fb = Framebuffer::new(32, 32);
        fb.set_pixel(3, 3, [1, 2, 3]);
        assert_eq!(apply_update(&fb, &DirtyTileSet::empty(1, 16)).unwrap(), fb);
    }

    #[test]
    fn full_frame_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, next) = random_pair(&mut rng);
        let u = full_frame(&next, 16, 4).unwrap();
        assert_eq!(u.tiles.len(), 16);
        assert_eq!(apply_update(&Framebuffer::new(64, 64), &u).unwrap(), next);
    }

    #[test]
    fn out_of_bounds_tile_rejected_without_side_effects() {
        let fb = Framebuffer::new(32, 32);
        let mut u = full_frame(&fb, 16, 0).unwrap();
        u.tiles[0].encoding = encode_tile(&[5; 768], 16).unwrap();
        u.tiles[3].col = 2;
        let mut target = fb.clone();
        assert_eq!(
            apply_update_in_place(&mut target, &u),
            Err(ProtocolError::TileOutOfBounds { col: 2, row: 1 })
        );
        assert_eq!(target, fb);
    }

    proptest! {
        #[test]
        fn update_wire_round_trip(seed in any::<u64>(), frame_seq in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (prev, next) = random_pair(&mut rng);
            let d = diff_framebuffer(&prev, &next, 16).unwrap().with_frame_seq(frame_seq);
            let bytes = encode_update(&d).unwrap();
            prop_assert_eq!(bytes.len(), d.wire_len());
            let back = decode_update(&bytes, 16).unwrap();
            prop_assert_eq!(&back, &d);
            prop_assert_eq!(apply_update(&prev, &back).unwrap(), next);
        }

        #[test]
        fn update_size_grows_with_dirty_tiles(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prev = Framebuffer::new(64, 64);
            let mut next = prev.clone();
            let mut order: Vec<(usize, usize)> = (0..4).flat_map(|r| (0..4).map(move |c| (c, r))).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let mut last = 0;
            for (k, (c, r)) in order.into_iter().enumerate() {
                next.set_pixel(c * 16 + rng.random_range(0..16), r * 16 + rng.random_range(0..16), [9, 9, 9]);
                let d = diff_framebuffer(&prev, &next, 16).unwrap();
                prop_assert_eq!(d.tiles.len(), k + 1);
                prop_assert!(d.wire_len() >= last);
                last = d.wire_len();
            }
        }
    }
}
