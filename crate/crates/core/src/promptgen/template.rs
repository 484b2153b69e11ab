//! Plain-text prompt templates with `{{name}}` placeholders.
//!
//! A template has a `[system]` section and a `[user]` section. Lines before
//! the first section starting with `#` are header comments; `#version: x`
//! names the template version. The optional example block is delimited by
//! `{{#example}}` and `{{/example}}` and is dropped when no example is given.

use std::collections::HashMap;

use super::PromptError;

pub const DEFAULT_TEMPLATE: &str = include_str!("../../templates/summarize_v1.txt");

pub const PLACEHOLDERS: &[&str] = &["system", "example_doc", "example_aspect", "example_summary", "document", "aspect"];

const EXAMPLE_OPEN: &str = "{{#example}}";
const EXAMPLE_CLOSE: &str = "{{/example}}";

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub version: String,
    system: String,
    user: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATE).expect("bundled template parses")
    }
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut version = String::from("unversioned");
        let mut section: Option<&str> = None;
        let mut system = Vec::new();
        let mut user = Vec::new();
        for line in text.lines() {
            match line.trim_end() {
                "[system]" => section = Some("system"),
                "[user]" => section = Some("user"),
                l => match section {
                    None => {
                        if let Some(v) = l.strip_prefix("#version:") {
                            version = v.trim().to_string();
                        } else if !l.trim().is_empty() && !l.starts_with('#') {
                            return Err(PromptError::Template(format!("text outside a section: {l:?}")));
                        }
                    }
                    Some("system") => system.push(line),
                    Some(_) => user.push(line),
                },
            }
        }
        let t = Self { version, system: system.join("\n"), user: user.join("\n") };
        t.check()?;
        Ok(t)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PromptError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PromptError::Template(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn check(&self) -> Result<(), PromptError> {
        for part in [&self.system, &self.user] {
            let mut rest = part.as_str();
            while let Some(start) = rest.find("{{") {
                let Some(len) = rest[start..].find("}}") else {
                    return Err(PromptError::Template("unterminated placeholder".into()));
                };
                let name = &rest[start + 2..start + len];
                let known = PLACEHOLDERS.contains(&name) || name == "#example" || name == "/example";
                if !known {
                    return Err(PromptError::Template(format!("unknown placeholder {{{{{name}}}}}")));
                }
                rest = &rest[start + len + 2..];
            }
        }
        if !self.user.contains("{{document}}") {
            return Err(PromptError::Template("template must contain {{document}}".into()));
        }
        let opens = self.user.matches(EXAMPLE_OPEN).count();
        let closes = self.user.matches(EXAMPLE_CLOSE).count();
        if opens != closes || opens > 1 {
            return Err(PromptError::Template("unbalanced example block".into()));
        }
        Ok(())
    }

    /// Renders `(system, user)` messages. Substitution is single-pass, so
    /// placeholder-like text inside values is left alone.
    pub fn render(&self, values: &HashMap<&str, &str>, with_example: bool) -> (String, String) {
        let user = strip_example_block(&self.user, with_example);
        (substitute(&self.system, values), substitute(&user, values))
    }
}

fn strip_example_block(text: &str, keep: bool) -> String {
    let (Some(open), Some(close)) = (text.find(EXAMPLE_OPEN), text.find(EXAMPLE_CLOSE)) else {
        return text.to_string();
    };
    let after_open = skip_newline(text, open + EXAMPLE_OPEN.len());
    let after_close = skip_newline(text, close + EXAMPLE_CLOSE.len());
    if keep {
        format!("{}{}{}", &text[..open], &text[after_open..close], &text[after_close..])
    } else {
        format!("{}{}", &text[..open], &text[after_close..])
    }
}

fn skip_newline(text: &str, at: usize) -> usize {
    if text[at..].starts_with('\n') {
        at + 1
    } else {
        at
    }
}

fn substitute(text: &str, values: &HashMap<&str, &str>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        match tail.find("}}") {
            Some(end) => {
                let name = &tail[2..end];
                match values.get(name) {
                    Some(v) => out.push_str(v),
                    None => out.push_str(&tail[..end + 2]),
                }
                rest = &tail[end + 2..];
            }
            None => {
                out.push_str(tail);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
