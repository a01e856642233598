//! RPMD dataset files.
//!
//! Layout (little-endian): `"RPMD"`, version u32, item count u32, then per
//! item: config id u8, target u8, rule count u8, rules as (rule id u8,
//! attribute id u8, param i8), resolution u16, 16 planes of res×res bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::Configuration;
use crate::error::{Result, RpmError};
use crate::item::RpmItem;
use crate::rules::{Attribute, Rule, RuleSpec};

pub const MAGIC: &[u8; 4] = b"RPMD";
pub const VERSION: u32 = 1;

fn invalid(msg: impl Into<String>) -> RpmError {
    RpmError::InvalidArgument(msg.into())
}

pub fn write_to<W: Write>(items: &[RpmItem], w: &mut W) -> Result<()> {
    let count = u32::try_from(items.len()).map_err(|_| invalid("too many items"))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    for (i, item) in items.iter().enumerate() {
        let plane = item.resolution as usize * item.resolution as usize;
        if item.resolution == 0 || item.images.len() != RpmItem::PANELS * plane {
            return Err(invalid(format!(
                "item {i}: expected {} image bytes, found {}",
                RpmItem::PANELS * plane,
                item.images.len()
            )));
        }
        if item.target >= 8 {
            return Err(invalid(format!("item {i}: target {} out of range", item.target)));
        }
        let rules = u8::try_from(item.rules.len()).map_err(|_| invalid(format!("item {i}: too many rules")))?;
        w.write_all(&[item.config.id(), item.target, rules])?;
        for r in &item.rules {
            w.write_all(&[r.rule.id(), r.attribute.id(), r.param as u8])?;
        }
        w.write_all(&item.resolution.to_le_bytes())?;
        w.write_all(&item.images)?;
    }
    Ok(())
}

pub fn to_bytes(items: &[RpmItem]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_to(items, &mut buf)?;
    Ok(buf)
}

pub fn write_dataset(items: &[RpmItem], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write_to(items, &mut f)?;
    f.flush()?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(RpmError::Format {
                msg: format!("truncated while reading {what}"),
                offset: self.buf.len() as u64,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn error(&self, at: usize, msg: String) -> RpmError {
        RpmError::Format { msg, offset: at as u64 }
    }
}

/// Parses a complete RPMD buffer. Items come back without symbolic form.
pub fn from_bytes(buf: &[u8]) -> Result<Vec<RpmItem>> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(c.error(0, "bad magic, not an RPMD file".into()));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(c.error(4, format!("unsupported version {version}, expected {VERSION}")));
    }
    let count = c.u32("item count")?;
    let mut items = Vec::with_capacity(count.min(1 << 16) as usize);
    for i in 0..count {
        let at = c.pos;
        let config = Configuration::from_id(c.u8("config id")?)
            .ok_or_else(|| c.error(at, format!("item {i}: unknown configuration id")))?;
        let target = c.u8("target")?;
        if target >= 8 {
            return Err(c.error(at + 1, format!("item {i}: target {target} out of range")));
        }
        let n = c.u8("rule count")?;
        let mut rules = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let at = c.pos;
            let rule = Rule::from_id(c.u8("rule id")?);
            let attribute = Attribute::from_id(c.u8("attribute id")?);
            let param = c.u8("rule param")? as i8;
            match (rule, attribute) {
                (Some(rule), Some(attribute)) => rules.push(RuleSpec { rule, attribute, param }),
                _ => return Err(c.error(at, format!("item {i}: unknown rule or attribute id"))),
            }
        }
        let resolution = c.u16("resolution")?;
        if resolution == 0 {
            return Err(c.error(c.pos - 2, format!("item {i}: zero resolution")));
        }
        let plane = resolution as usize * resolution as usize;
        let images = c.take(RpmItem::PANELS * plane, "image planes")?.to_vec();
        items.push(RpmItem { config, rules, target, resolution, images, symbolic: None });
    }
    if c.pos != buf.len() {
        return Err(c.error(c.pos, format!("{} trailing bytes", buf.len() - c.pos)));
    }
    Ok(items)
}

pub fn read_dataset(path: &Path) -> Result<Vec<RpmItem>> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_has_header_only() {
        let bytes = to_bytes(&[]).unwrap();
        assert_eq!(bytes, b"RPMD\x01\x00\x00\x00\x00\x00\x00\x00");
        assert!(from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn header_errors() {
        assert!(matches!(from_bytes(b"RPMX\x01\0\0\0\0\0\0\0"), Err(RpmError::Format { offset: 0, .. })));
        assert!(matches!(from_bytes(b"RPMD\x02\0\0\0\0\0\0\0"), Err(RpmError::Format { offset: 4, .. })));
        assert!(matches!(from_bytes(b"RPMD\x01\0\0\0\x01\0\0\0"), Err(RpmError::Format { offset: 12, .. })));
    }
}
