//! Closed language registry and translation-direction grouping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CorpusError;

/// How running text in a language is split into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    /// Whitespace-delimited words.
    Whitespace,
    /// One token per non-whitespace Unicode scalar value.
    Codepoint,
}

struct LangInfo {
    code: &'static str,
    english: &'static str,
    chinese: &'static str,
    segmentation: Segmentation,
    /// Member of the 33-language core evaluation grid (the remaining entries
    /// are the minority languages and Cantonese).
    core: bool,
}

const fn lang(
    code: &'static str,
    english: &'static str,
    chinese: &'static str,
    segmentation: Segmentation,
    core: bool,
) -> LangInfo {
    LangInfo { code, english, chinese, segmentation, core }
}

use Segmentation::{Codepoint as CP, Whitespace as WS};

static REGISTRY: [LangInfo; 38] = [
    lang("zh", "Chinese", "中文", CP, true),
    lang("en", "English", "英语", WS, true),
    lang("fr", "French", "法语", WS, true),
    lang("pt", "Portuguese", "葡萄牙语", WS, true),
    lang("es", "Spanish", "西班牙语", WS, true),
    lang("ja", "Japanese", "日语", CP, true),
    lang("tr", "Turkish", "土耳其语", WS, true),
    lang("ru", "Russian", "俄语", WS, true),
    lang("ar", "Arabic", "阿拉伯语", WS, true),
    lang("ko", "Korean", "韩语", WS, true),
    lang("th", "Thai", "泰语", CP, true),
    lang("it", "Italian", "意大利语", WS, true),
    lang("de", "German", "德语", WS, true),
    lang("vi", "Vietnamese", "越南语", WS, true),
    lang("ms", "Malay", "马来语", WS, true),
    lang("id", "Indonesian", "印尼语", WS, true),
    lang("tl", "Filipino", "菲律宾语", WS, true),
    lang("hi", "Hindi", "印地语", WS, true),
    lang("zh-Hant", "Traditional Chinese", "繁体中文", CP, true),
    lang("pl", "Polish", "波兰语", WS, true),
    lang("cs", "Czech", "捷克语", WS, true),
    lang("nl", "Dutch", "荷兰语", WS, true),
    lang("km", "Khmer", "高棉语", CP, true),
    lang("my", "Burmese", "缅甸语", CP, true),
    lang("fa", "Persian", "波斯语", WS, true),
    lang("gu", "Gujarati", "古吉拉特语", WS, true),
    lang("ur", "Urdu", "乌尔都语", WS, true),
    lang("te", "Telugu", "泰卢固语", WS, true),
    lang("mr", "Marathi", "马拉地语", WS, true),
    lang("he", "Hebrew", "希伯来语", WS, true),
    lang("bn", "Bengali", "孟加拉语", WS, true),
    lang("ta", "Tamil", "泰米尔语", WS, true),
    lang("uk", "Ukrainian", "乌克兰语", WS, true),
    lang("bo", "Tibetan", "藏语", CP, false),
    lang("kk", "Kazakh", "哈萨克语", WS, false),
    lang("mn", "Mongolian", "蒙古语", WS, false),
    lang("ug", "Uyghur", "维吾尔语", WS, false),
    lang("yue", "Cantonese", "粤语", CP, false),
];

/// A supported language. Ordering follows registry order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LanguageTag(u8);

impl LanguageTag {
    pub const ZH: LanguageTag = LanguageTag(0);
    pub const EN: LanguageTag = LanguageTag(1);

    /// Parses a registry code. Matching is exact and case-sensitive.
    pub fn parse(code: &str) -> Result<Self, CorpusError> {
        REGISTRY
            .iter()
            .position(|l| l.code == code)
            .map(|i| LanguageTag(i as u8))
            .ok_or_else(|| CorpusError::UnknownLanguage(code.to_string()))
    }

    /// All registered languages in registry order.
    pub fn all() -> impl Iterator<Item = LanguageTag> {
        (0..REGISTRY.len() as u8).map(LanguageTag)
    }

    /// The 33 languages of the core evaluation grid.
    pub fn core() -> impl Iterator<Item = LanguageTag> {
        Self::all().filter(|t| t.info().core)
    }

    fn info(self) -> &'static LangInfo {
        &REGISTRY[self.0 as usize]
    }

    pub fn code(self) -> &'static str {
        self.info().code
    }

    pub fn english_name(self) -> &'static str {
        self.info().english
    }

    pub fn chinese_name(self) -> &'static str {
        self.info().chinese
    }

    pub fn segmentation(self) -> Segmentation {
        self.info().segmentation
    }

    /// Position in the registry, used for deterministic tie-breaking.
    pub fn registry_index(self) -> usize {
        self.0 as usize
    }

    /// Chinese and its Sinitic variants (`zh-Hant`, `yue`).
    pub fn is_sinitic(self) -> bool {
        matches!(self.code(), "zh" | "zh-Hant" | "yue")
    }
}

impl fmt::Debug for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LanguageTag({})", self.code())
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for LanguageTag {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for LanguageTag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for LanguageTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = String::deserialize(d)?;
        LanguageTag::parse(&code).map_err(serde::de::Error::custom)
    }
}

/// Reporting bucket for a translation direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DirectionGroup {
    ZhToXx,
    XxToZh,
    EnToXx,
    XxToEn,
    XxToXx,
}

impl DirectionGroup {
    pub const ALL: [DirectionGroup; 5] = [
        DirectionGroup::ZhToXx,
        DirectionGroup::XxToZh,
        DirectionGroup::EnToXx,
        DirectionGroup::XxToEn,
        DirectionGroup::XxToXx,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DirectionGroup::ZhToXx => "ZH=>XX",
            DirectionGroup::XxToZh => "XX=>ZH",
            DirectionGroup::EnToXx => "EN=>XX",
            DirectionGroup::XxToEn => "XX=>EN",
            DirectionGroup::XxToXx => "XX=>XX",
        }
    }
}

impl fmt::Display for DirectionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Assigns an ordered language pair to its reporting group.
///
/// Chinese-centric groups take precedence, so `zh -> en` is `ZH_TO_XX` and
/// `en -> zh` is `XX_TO_ZH`. Only the `zh` tag itself counts as Chinese here;
/// `zh-Hant` and `yue` are ordinary XX languages.
pub fn classify_direction(
    src: LanguageTag,
    tgt: LanguageTag,
) -> Result<DirectionGroup, CorpusError> {
    if src == tgt {
        return Err(CorpusError::SameLanguage(src.code().to_string()));
    }
    Ok(if src == LanguageTag::ZH {
        DirectionGroup::ZhToXx
    } else if tgt == LanguageTag::ZH {
        DirectionGroup::XxToZh
    } else if src == LanguageTag::EN {
        DirectionGroup::EnToXx
    } else if tgt == LanguageTag::EN {
        DirectionGroup::XxToEn
    } else {
        DirectionGroup::XxToXx
    })
}
