//! Tab-separated interaction and corpus files.
//!
//! Interaction log, one impression per line:
//!
//! ```text
//! day  user  content  reward  score  arm  request
//! ```
//!
//! `reward` is `0` or `1`; `score` is the served probability printed in
//! shortest round-trip form, so a read-back log is bit-identical.
//!
//! Corpus file, one item per line:
//!
//! ```text
//! id  provider  publish_day  graduation_day  lifetime_positives  quality  arm
//! ```
//!
//! Missing `graduation_day` and `arm` are written as `-`. Lines starting
//! with `#` are comments.

use std::io::{BufRead, Write};
use std::str::FromStr;

use super::{ArmId, ContentId, ContentItem, InteractionRecord, ProviderId, UserId};
use crate::error::{Error, Result};

pub const LOG_HEADER: &str = "# day\tuser\tcontent\treward\tscore\tarm\trequest";
pub const CORPUS_HEADER: &str = "# id\tprovider\tpublish_day\tgraduation_day\tlifetime_positives\tquality\tarm";

/// The per-item facts metrics need, detached from the live world.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusRow {
    pub id: ContentId,
    pub provider: ProviderId,
    pub publish_day: u32,
    pub graduation_day: Option<u32>,
    pub lifetime_positives: u64,
    pub quality: f64,
    pub arm: Option<ArmId>,
}

impl From<&ContentItem> for CorpusRow {
    fn from(it: &ContentItem) -> Self {
        Self {
            id: it.id,
            provider: it.provider_id,
            publish_day: it.publish_day,
            graduation_day: it.graduation_day,
            lifetime_positives: it.lifetime_positives,
            quality: it.quality,
            arm: it.arm_tag,
        }
    }
}

pub fn write_log<W: Write>(w: &mut W, records: &[InteractionRecord]) -> Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.day, r.user, r.content, r.reward, r.served_score, r.arm, r.request
        )?;
    }
    Ok(())
}

fn field<T: FromStr>(parts: &[&str], i: usize, line: usize, name: &str) -> Result<T> {
    parts[i].parse().map_err(|_| Error::LogParse {
        line,
        reason: format!("bad {name} {:?}", parts[i]),
    })
}

fn optional<T: FromStr>(parts: &[&str], i: usize, line: usize, name: &str) -> Result<Option<T>> {
    if parts[i] == "-" {
        Ok(None)
    } else {
        field(parts, i, line, name).map(Some)
    }
}

fn rows<R: BufRead>(r: R, columns: usize) -> impl Iterator<Item = Result<(usize, String)>> {
    r.lines().enumerate().filter_map(move |(i, l)| match l {
        Err(e) => Some(Err(e.into())),
        Ok(l) if l.trim().is_empty() || l.starts_with('#') => None,
        Ok(l) => {
            let n = l.split('\t').count();
            if n != columns {
                Some(Err(Error::LogParse {
                    line: i + 1,
                    reason: format!("expected {columns} fields, found {n}"),
                }))
            } else {
                Some(Ok((i + 1, l)))
            }
        }
    })
}

/// Reads a log written by [`write_log`]. Features are not stored, so every
/// record comes back with `features: None`.
pub fn read_log<R: BufRead>(r: R) -> Result<Vec<InteractionRecord>> {
    rows(r, 7)
        .map(|row| {
            let (line, text) = row?;
            let p: Vec<&str> = text.split('\t').collect();
            let reward: u8 = field(&p, 3, line, "reward")?;
            if reward > 1 {
                return Err(Error::LogParse {
                    line,
                    reason: format!("reward {reward} is not 0 or 1"),
                });
            }
            Ok(InteractionRecord {
                day: field(&p, 0, line, "day")?,
                user: UserId(field(&p, 1, line, "user")?),
                content: ContentId(field(&p, 2, line, "content")?),
                reward,
                served_score: field(&p, 4, line, "score")?,
                arm: ArmId(field(&p, 5, line, "arm")?),
                request: field(&p, 6, line, "request")?,
                features: None,
            })
        })
        .collect()
}

pub fn write_corpus<W: Write>(w: &mut W, rows: &[CorpusRow]) -> Result<()> {
    writeln!(w, "{CORPUS_HEADER}")?;
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    for c in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            c.id,
            c.provider,
            c.publish_day,
            opt(c.graduation_day.map(|d| d.to_string())),
            c.lifetime_positives,
            c.quality,
            opt(c.arm.map(|a| a.to_string())),
        )?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(r: R) -> Result<Vec<CorpusRow>> {
    rows(r, 7)
        .map(|row| {
            let (line, text) = row?;
            let p: Vec<&str> = text.split('\t').collect();
            Ok(CorpusRow {
                id: ContentId(field(&p, 0, line, "id")?),
                provider: ProviderId(field(&p, 1, line, "provider")?),
                publish_day: field(&p, 2, line, "publish_day")?,
                graduation_day: optional(&p, 3, line, "graduation_day")?,
                lifetime_positives: field(&p, 4, line, "lifetime_positives")?,
                quality: field(&p, 5, line, "quality")?,
                arm: optional(&p, 6, line, "arm")?.map(ArmId),
            })
        })
        .collect()
}
