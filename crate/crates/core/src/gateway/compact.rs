//! Compact form packaging: `count u16 | (key_len u8, key, val_len u16, value)*`, big-endian.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompactError {
    #[error("empty key")]
    EmptyKey,
    #[error("key of {0} bytes exceeds 255")]
    KeyTooLong(usize),
    #[error("value of {0} bytes exceeds 65535")]
    ValueTooLong(usize),
    #[error("{0} fields exceed 65535")]
    TooManyFields(usize),
    #[error("malformed compact message: {0}")]
    Malformed(&'static str),
}

/// Ordered key/value fields of a submitted form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompactMessage {
    pub fields: Vec<(String, String)>,
}

impl CompactMessage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.fields.push((key.into(), value.into()));
        self
    }

    /// First value stored under `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn package(&self) -> Result<Vec<u8>, CompactError> {
        package_form(&self.fields)
    }

    pub fn unpackage(buf: &[u8]) -> Result<Self, CompactError> {
        unpackage_form(buf).map(|fields| Self { fields })
    }
}

pub fn package_form<K: AsRef<str>, V: AsRef<str>>(
    fields: &[(K, V)],
) -> Result<Vec<u8>, CompactError> {
    let count =
        u16::try_from(fields.len()).map_err(|_| CompactError::TooManyFields(fields.len()))?;
    let mut out = Vec::new();
    out.extend_from_slice(&count.to_be_bytes());
    for (k, v) in fields {
        let (k, v) = (k.as_ref().as_bytes(), v.as_ref().as_bytes());
        if k.is_empty() {
            return Err(CompactError::EmptyKey);
        }
        let klen = u8::try_from(k.len()).map_err(|_| CompactError::KeyTooLong(k.len()))?;
        let vlen = u16::try_from(v.len()).map_err(|_| CompactError::ValueTooLong(v.len()))?;
        out.push(klen);
        out.extend_from_slice(k);
        out.extend_from_slice(&vlen.to_be_bytes());
        out.extend_from_slice(v);
    }
    Ok(out)
}

pub fn unpackage_form(buf: &[u8]) -> Result<Vec<(String, String)>, CompactError> {
    fn take<'a>(buf: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8], CompactError> {
        let end = pos.checked_add(n).filter(|&e| e <= buf.len());
        let end = end.ok_or(CompactError::Malformed("truncated"))?;
        let s = &buf[*pos..end];
        *pos = end;
        Ok(s)
    }
    fn text(bytes: &[u8]) -> Result<String, CompactError> {
        String::from_utf8(bytes.to_vec()).map_err(|_| CompactError::Malformed("invalid utf-8"))
    }
    let mut pos = 0;
    let count = u16::from_be_bytes(take(buf, &mut pos, 2)?.try_into().unwrap()) as usize;
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        let klen = take(buf, &mut pos, 1)?[0] as usize;
        if klen == 0 {
            return Err(CompactError::EmptyKey);
        }
        let key = text(take(buf, &mut pos, klen)?)?;
        let vlen = u16::from_be_bytes(take(buf, &mut pos, 2)?.try_into().unwrap()) as usize;
        let value = text(take(buf, &mut pos, vlen)?)?;
        fields.push((key, value));
    }
    if pos != buf.len() {
        return Err(CompactError::Malformed("trailing bytes"));
    }
    Ok(fields)
}
