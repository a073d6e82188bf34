use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::LogRecord;
use crate::topology::ComponentId;

/// Normalized log line with node-, time- and id-specific fields replaced by
/// placeholders.
pub type LogTemplate = String;

const DEFAULT_RULES: &str = include_str!("../../rules/lustre.rules");
const MAX_PASSES: usize = 64;

/// Ordered regex rewrite rules.
#[derive(Debug, Clone)]
pub struct LogNormalizer {
    rules: Vec<(Regex, String)>,
}

impl Default for LogNormalizer {
    fn default() -> Self {
        Self::from_rules(DEFAULT_RULES).expect("bundled rules parse")
    }
}

impl LogNormalizer {
    /// Parses a rules file: one `pattern => placeholder` per line (`→` is
    /// accepted too); blank lines and lines starting with `#` are ignored.
    pub fn from_rules(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (pat, rep) = line
                .rsplit_once("=>")
                .or_else(|| line.rsplit_once('→'))
                .ok_or_else(|| Error::Parse(format!("rule {}: missing `=>`", i + 1)))?;
            let re = Regex::new(pat.trim())
                .map_err(|e| Error::Parse(format!("rule {}: {e}", i + 1)))?;
            rules.push((re, rep.trim().to_string()));
        }
        // A placeholder that some rule rewrites would break idempotence.
        for (_, rep) in &rules {
            if rules.iter().any(|(r, _)| r.is_match(rep)) {
                return Err(Error::Parse(format!("placeholder `{rep}` is rewritten by a rule")));
            }
        }
        Ok(LogNormalizer { rules })
    }

    /// Applies the rules in order, repeating until the text stops changing,
    /// which makes normalization idempotent.
    pub fn normalize(&self, text: &str) -> LogTemplate {
        let mut cur = text.to_string();
        for _ in 0..MAX_PASSES {
            let mut next = cur.clone();
            for (re, rep) in &self.rules {
                if re.is_match(&next) {
                    next = re.replace_all(&next, rep.as_str()).into_owned();
                }
            }
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }
}

/// Deduplicated templates per component.
pub fn template_logs(
    records: &[LogRecord],
    normalizer: &LogNormalizer,
) -> BTreeMap<ComponentId, BTreeSet<LogTemplate>> {
    let mut out: BTreeMap<ComponentId, BTreeSet<LogTemplate>> = BTreeMap::new();
    for r in records {
        out.entry(r.component)
            .or_default()
            .insert(normalizer.normalize(&r.text));
    }
    out
}

/// Templates of the unhealthy component that no healthy peer produced.
pub fn log_delta(
    unhealthy: &BTreeSet<LogTemplate>,
    healthy: &[&BTreeSet<LogTemplate>],
) -> Result<BTreeSet<LogTemplate>> {
    if healthy.is_empty() {
        return Err(Error::Config(
            "log comparison needs at least one healthy peer".into(),
        ));
    }
    Ok(unhealthy
        .iter()
        .filter(|t| !healthy.iter().any(|h| h.contains(*t)))
        .cloned()
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEvidence {
    pub component: ComponentId,
    pub delta: BTreeSet<LogTemplate>,
    /// Healthy peers the component was compared against.
    pub comparison_group: Vec<ComponentId>,
}
