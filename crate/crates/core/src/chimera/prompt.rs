//! Translation and fusion prompt templates.

use crate::corpus::LanguageTag;

/// Which instruction language a translation prompt uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateLanguage {
    Chinese,
    English,
}

/// Chinese template whenever a Sinitic language (zh, zh-Hant, yue) is on either side.
pub fn template_language(src: LanguageTag, tgt: LanguageTag) -> TemplateLanguage {
    if src.is_sinitic() || tgt.is_sinitic() {
        TemplateLanguage::Chinese
    } else {
        TemplateLanguage::English
    }
}

pub fn render_translation_prompt(src: LanguageTag, tgt: LanguageTag, text: &str) -> Result<String, PromptError> {
    if src == tgt {
        return Err(PromptError::SameLanguage(src.code().to_string()));
    }
    Ok(match template_language(src, tgt) {
        TemplateLanguage::Chinese => {
            format!("把下面的文本翻译成{}，不要额外解释。\n\n{}", tgt.chinese_name(), text)
        }
        TemplateLanguage::English => format!(
            "Translate the following segment into {}, without additional explanation.\n\n{}",
            tgt.english_name(),
            text
        ),
    })
}

fn longest_backtick_run(s: &str) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for c in s.chars() {
        if c == '`' {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Wraps `content` in a backtick fence longer than any backtick run inside it
/// (at least three). One space of padding is added on each side when the
/// content is empty, starts or ends with a backtick, or both starts and ends
/// with a space; a reader strips exactly that padding.
pub fn fence(content: &str) -> String {
    let ticks = "`".repeat(3.max(longest_backtick_run(content) + 1));
    let pad = content.is_empty()
        || content.starts_with('`')
        || content.ends_with('`')
        || (content.starts_with(' ') && content.ends_with(' '));
    if pad {
        format!("{ticks} {content} {ticks}")
    } else {
        format!("{ticks}{content}{ticks}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("fusion needs at least two candidates, got {0}")]
    TooFewCandidates(usize),
    #[error("source and target language are both `{0}`")]
    SameLanguage(String),
}

pub fn render_fusion_prompt(
    src: LanguageTag,
    tgt: LanguageTag,
    source: &str,
    candidates: &[String],
) -> Result<String, PromptError> {
    if src == tgt {
        return Err(PromptError::SameLanguage(src.code().to_string()));
    }
    if candidates.len() < 2 {
        return Err(PromptError::TooFewCandidates(candidates.len()));
    }
    let (s, t) = (src.english_name(), tgt.english_name());
    let mut out = format!(
        "Analyze the following multiple {t} translations of the {s} segment surrounded in triple backticks \
         and generate a single refined {t} translation. Only output the refined translation, do not explain.\n\
         \n\
         The {s} segment:\n\
         {}\n\
         \n\
         The multiple {t} translations:",
        fence(source)
    );
    for (i, c) in candidates.iter().enumerate() {
        out.push_str(&format!("\n{}. {}", i + 1, fence(c)));
    }
    Ok(out)
}

/// Normalizes a model response: trims whitespace and removes one enclosing
/// code fence (with an optional info string on the opening line).
pub fn clean_response(text: &str) -> String {
    let t = text.trim();
    let lead = t.chars().take_while(|c| *c == '`').count();
    if lead >= 3 && t.len() >= 2 * lead {
        let trail = t.chars().rev().take_while(|c| *c == '`').count();
        if trail == lead {
            let inner = &t[lead..t.len() - trail];
            let inner = match inner.split_once('\n') {
                Some((info, rest)) if !info.trim().contains(char::is_whitespace) => rest,
                _ => inner,
            };
            return inner.trim().to_string();
        }
    }
    t.to_string()
}
