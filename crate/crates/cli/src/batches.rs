//! Rollout JSONL input, grouped by `(id, question)`.

use std::path::Path;

use anyhow::{anyhow, Context};
use cotagree_core::RolloutRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RolloutGroup {
    pub id: String,
    pub question: String,
    pub texts: Vec<String>,
}

/// Groups keep the order in which their first record appears; blank lines
/// are skipped. Errors carry the 1-based line number.
pub fn read_groups(path: &Path) -> anyhow::Result<Vec<RolloutGroup>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut groups: Vec<RolloutGroup> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RolloutRecord =
            serde_json::from_str(line).map_err(|e| anyhow!("{}:{}: {e}", path.display(), k + 1))?;
        match groups.iter_mut().find(|g| g.id == rec.id && g.question == rec.question) {
            Some(g) => g.texts.push(rec.text),
            None => groups.push(RolloutGroup { id: rec.id, question: rec.question, texts: vec![rec.text] }),
        }
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_in_first_seen_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        std::fs::write(
            &p,
            concat!(
                r#"{"id":"b","question":"q","text":"1"}"#, "\n",
                r#"{"id":"a","question":"q","text":"2"}"#, "\n\n",
                r#"{"id":"b","question":"q","text":"3"}"#, "\n",
            ),
        )
        .unwrap();
        let g = read_groups(&p).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].id.as_str(), g[0].texts.clone()), ("b", vec!["1".to_string(), "3".to_string()]));
    }

    #[test]
    fn bad_line_is_reported_by_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        std::fs::write(&p, "{\"id\":\"a\",\"question\":\"q\",\"text\":\"x\"}\n{\"id\":1}\n").unwrap();
        let msg = read_groups(&p).unwrap_err().to_string();
        assert!(msg.contains("r.jsonl:2:"), "{msg}");
    }
}
