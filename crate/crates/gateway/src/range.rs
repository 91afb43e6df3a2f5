//! Single-range `Range: bytes=` headers.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeError {
    /// Not a single byte range; the header is ignored and the whole file is sent.
    Malformed,
    /// Well formed but outside the file: 416.
    Unsatisfiable,
}

/// Resolves `bytes=a-b`, `bytes=a-` or `bytes=-n` against a file of `total` bytes into
/// `(offset, length)`.
pub fn parse_range(header: &str, total: u64) -> Result<(u64, u64), RangeError> {
    let spec = header
        .trim()
        .strip_prefix("bytes=")
        .ok_or(RangeError::Malformed)?;
    if spec.contains(',') {
        return Err(RangeError::Malformed);
    }
    let (first, last) = spec.split_once('-').ok_or(RangeError::Malformed)?;
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| RangeError::Malformed);
    match (first.trim().is_empty(), last.trim().is_empty()) {
        (true, true) => Err(RangeError::Malformed),
        (true, false) => {
            let n = num(last)?;
            if n == 0 || total == 0 {
                return Err(RangeError::Unsatisfiable);
            }
            let n = n.min(total);
            Ok((total - n, n))
        }
        (false, open_ended) => {
            let start = num(first)?;
            let end = if open_ended { u64::MAX } else { num(last)? };
            if end < start {
                return Err(RangeError::Malformed);
            }
            if start >= total {
                return Err(RangeError::Unsatisfiable);
            }
            let end = end.min(total - 1);
            Ok((start, end - start + 1))
        }
    }
}
