//! PromptScript: a JSON list of session steps replayed against a server.
//!
//! ```json
//! { "steps": [
//!     { "load_image": "phantom.svol" },
//!     { "prompt": { "type": "point", "coord": [10, 12, 4] } },
//!     "next_segment",
//!     { "switch_segment": 0 },
//!     "reset",
//!     { "expect_digest": "<64 hex chars>" }
//! ] }
//! ```
//!
//! Relative image paths resolve against the script's directory.

use std::fmt;
use std::path::{Path, PathBuf};

use promptseg_core::{Digest, Prompt, Volume3D};
use serde::{Deserialize, Serialize};

use crate::client::{ClientError, ClientSession};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    LoadImage(PathBuf),
    Prompt(Prompt),
    Reset,
    NextSegment,
    SwitchSegment(usize),
    ExpectDigest(Digest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptScript {
    pub steps: Vec<Step>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("ScriptParse: {0}")]
    Parse(String),
    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<ScriptError> },
    #[error("{0}")]
    Client(#[from] ClientError),
    #[error("cannot load image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("{0}")]
    Mismatch(Box<Mismatch>),
    #[error("expect_digest with no active segment")]
    NothingToCheck,
}

/// Diff report for a failed `expect_digest`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub step: usize,
    pub segment: usize,
    pub expected: Digest,
    pub actual: Digest,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (e, a) = (self.expected.to_hex(), self.actual.to_hex());
        let marks: String = e.chars().zip(a.chars()).map(|(x, y)| if x == y { ' ' } else { '^' }).collect();
        write!(
            f,
            "digest mismatch at step {} (segment {}):\n  expected {e}\n  actual   {a}\n           {}",
            self.step,
            self.segment,
            marks.trim_end()
        )
    }
}

impl PromptScript {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ScriptError> {
        let mut s: PromptScript = serde_json::from_str(text).map_err(|e| ScriptError::Parse(e.to_string()))?;
        match s.steps.first() {
            None => return Err(ScriptError::Parse("script has no steps; it must start with load_image".into())),
            Some(Step::LoadImage(_)) => {}
            Some(_) => return Err(ScriptError::Parse("first step must be load_image".into())),
        }
        s.base_dir = base_dir.into();
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScriptError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scripts always serialize")
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Final state of a replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub segment_digests: Vec<Digest>,
    pub expectations_checked: usize,
}

/// Runs every step on `session`, stopping at the first failure.
pub fn replay(
    script: &PromptScript,
    session: &mut ClientSession,
    load: &dyn Fn(&Path) -> Result<Volume3D, String>,
) -> Result<ReplayReport, ScriptError> {
    let mut checked = 0;
    for (i, step) in script.steps.iter().enumerate() {
        let at = |e: ScriptError| ScriptError::Step { step: i, source: Box::new(e) };
        match step {
            Step::LoadImage(p) => {
                let path = script.resolve(p);
                let vol = load(&path).map_err(|message| at(ScriptError::Image { path: path.clone(), message }))?;
                session.load_image(vol);
                session.ensure_synced().map_err(|e| at(e.into()))?;
            }
            Step::Prompt(p) => {
                session.prompt(p.clone()).map_err(|e| at(e.into()))?;
            }
            Step::Reset => session.reset_segment().map_err(|e| at(e.into()))?,
            Step::NextSegment => {
                session.next_segment().map_err(|e| at(e.into()))?;
            }
            Step::SwitchSegment(k) => session.switch_segment(*k).map_err(|e| at(e.into()))?,
            Step::ExpectDigest(expected) => {
                let (segment, seg) = session
                    .active_index()
                    .zip(session.active_segment())
                    .ok_or_else(|| at(ScriptError::NothingToCheck))?;
                checked += 1;
                if seg.digest() != *expected {
                    return Err(ScriptError::Mismatch(Box::new(Mismatch {
                        step: i,
                        segment,
                        expected: *expected,
                        actual: seg.digest(),
                    })));
                }
            }
        }
    }
    Ok(ReplayReport {
        segment_digests: session.segments().iter().map(|s| s.digest()).collect(),
        expectations_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_misordered_scripts_are_rejected() {
        assert!(matches!(PromptScript::parse(r#"{"steps":[]}"#, "."), Err(ScriptError::Parse(_))));
        assert!(matches!(PromptScript::parse(r#"{"steps":["reset"]}"#, "."), Err(ScriptError::Parse(_))));
        assert!(matches!(PromptScript::parse("", "."), Err(ScriptError::Parse(_))));
        assert!(matches!(PromptScript::parse(r#"{"steps":[{"bogus":1}]}"#, "."), Err(ScriptError::Parse(_))));
    }

    #[test]
    fn step_syntax() {
        let d = Digest::of_bytes(b"x").to_hex();
        let text = format!(
            r#"{{"steps":[{{"load_image":"a.svol"}},{{"prompt":{{"type":"point","coord":[1,2,3],"polarity":"negative"}}}},"reset","next_segment",{{"switch_segment":1}},{{"expect_digest":"{d}"}}]}}"#
        );
        let s = PromptScript::parse(&text, "/base").unwrap();
        assert_eq!(s.steps.len(), 6);
        assert_eq!(s.steps[2], Step::Reset);
        assert_eq!(s.steps[4], Step::SwitchSegment(1));
        assert_eq!(s.resolve(Path::new("a.svol")), PathBuf::from("/base/a.svol"));
        let back = PromptScript::parse(&s.to_json(), "/base").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn mismatch_report_marks_differences() {
        let expected = Digest::of_bytes(b"a");
        let mut hex = expected.to_hex().into_bytes();
        hex[3] = if hex[3] == b'0' { b'1' } else { b'0' };
        let actual: Digest = String::from_utf8(hex).unwrap().parse().unwrap();
        let report = Mismatch { step: 4, segment: 1, expected, actual }.to_string();
        assert!(report.contains("step 4"));
        assert!(report.lines().last().unwrap().trim() == "^");
    }
}
