/// Pixels of the 1-pixel line from `a` to `b`, in order from `a`.
///
/// Walks the major axis one pixel at a time and rounds the minor-axis offset to nearest, halves
/// rounding away from `a`. This is the pixel set classic integer Bresenham produces.
pub fn line_pixels(a: (u16, u16), b: (u16, u16)) -> Vec<(u16, u16)> {
    let (x0, y0) = (a.0 as i64, a.1 as i64);
    let (dx, dy) = (b.0 as i64 - x0, b.1 as i64 - y0);
    let (adx, ady) = (dx.abs(), dy.abs());
    let (sx, sy) = (dx.signum(), dy.signum());
    let (major, minor) = if adx >= ady { (adx, ady) } else { (ady, adx) };
    (0..=major)
        .map(|k| {
            let off = if major == 0 {
                0
            } else {
                (2 * k * minor + major) / (2 * major)
            };
            let (x, y) = if adx >= ady {
                (x0 + sx * k, y0 + sy * off)
            } else {
                (x0 + sx * off, y0 + sy * k)
            };
            (x as u16, y as u16)
        })
        .collect()
}
