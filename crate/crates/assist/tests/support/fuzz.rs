//! Fuzzed provider replies and an independent validity oracle driven by the
//! bundled response_format files. Shared with the workspace acceptance suite.

#![allow(dead_code)]

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::{json, Value};

pub const FEATURES: [&str; 4] = ["drift", "discussion", "summary", "keywords"];

pub fn schema(feature: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../assist/templates").join(format!("{feature}.schema.json"));
    let raw = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&raw).unwrap()
}

/// Top-level object entries in source order, duplicates kept.
struct Entries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Entries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(V)
    }
}

fn filled(v: Option<&Value>) -> bool {
    v.and_then(Value::as_str).is_some_and(|s| !s.trim().is_empty())
}

fn keyword_line_ok(line: &str) -> bool {
    let items: Vec<&str> = line.split("; ").collect();
    (1..=12).contains(&items.len())
        && items.iter().all(|i| !i.is_empty() && i.trim() == *i && i.split_whitespace().count() <= 5)
}

/// True iff `raw` is acceptable for `feature`.
pub fn oracle_valid(feature: &str, raw: &str) -> bool {
    let Ok(Entries(entries)) = serde_json::from_str::<Entries>(raw) else { return false };
    let s = schema(feature);
    let props = s["json_schema"]["schema"]["properties"].as_object().unwrap();
    let required: Vec<&str> = s["json_schema"]["schema"]["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let mut seen: Vec<&str> = Vec::new();
    for (k, v) in &entries {
        if seen.contains(&k.as_str()) {
            return false;
        }
        seen.push(k);
        let Some(prop) = props.get(k) else { return false };
        let type_ok = match prop["type"].as_str().unwrap() {
            "string" => v.is_string() || (k == "suggested_definition" && v.is_null()),
            "boolean" => v.is_boolean(),
            other => panic!("unexpected schema type {other}"),
        };
        if !type_ok {
            return false;
        }
    }
    if !required.iter().all(|r| seen.contains(r)) {
        return false;
    }
    let get = |k: &str| entries.iter().find(|(n, _)| n == k).map(|(_, v)| v);
    match feature {
        "drift" => {
            let detected = get("drift_detected").and_then(Value::as_bool).unwrap();
            let suggestion = get("suggested_definition").filter(|v| !v.is_null());
            filled(get("explanation")) && (detected || suggestion.is_none()) && suggestion.is_none_or(|v| filled(Some(v)))
        }
        "discussion" => filled(get("prompt")) && filled(get("title")),
        "summary" => ["linguisticPatterns", "positionalityNarrative", "alternativeThinkingPatterns", "notes"].iter().all(|k| filled(get(k))),
        "keywords" => get("keywords").and_then(Value::as_str).is_some_and(keyword_line_ok),
        _ => unreachable!(),
    }
}

const WORDS: &[&str] = &["process", "budget", "equity", "lens", "trust", "city", "review", "residents", "policy", "HCI"];

fn sentence(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(1..8);
    let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    format!("{}.", words.join(" "))
}

fn keyword_line(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(1..=12);
    (0..n)
        .map(|_| {
            let w = rng.gen_range(1..=4);
            (0..w).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn base(rng: &mut impl Rng, feature: &str) -> Vec<(String, Value)> {
    let mut e: Vec<(String, Value)> = match feature {
        "drift" => {
            let detected = rng.gen_bool(0.5);
            let mut v = vec![("drift_detected".into(), json!(detected)), ("explanation".into(), json!(sentence(rng)))];
            match (detected, rng.gen_range(0..3)) {
                (true, 0) | (true, 1) => v.push(("suggested_definition".into(), json!(sentence(rng)))),
                (_, 2) => v.push(("suggested_definition".into(), Value::Null)),
                _ => {}
            }
            v
        }
        "discussion" => vec![("prompt".into(), json!(sentence(rng))), ("title".into(), json!(sentence(rng)))],
        "summary" => ["linguisticPatterns", "positionalityNarrative", "alternativeThinkingPatterns", "notes"]
            .iter()
            .map(|k| (k.to_string(), json!(sentence(rng))))
            .collect(),
        "keywords" => vec![("keywords".into(), json!(keyword_line(rng)))],
        _ => unreachable!(),
    };
    e.shuffle(rng);
    e
}

fn render(entries: &[(String, Value)]) -> String {
    let body: Vec<String> = entries.iter().map(|(k, v)| format!("{}:{}", Value::String(k.clone()), v)).collect();
    format!("{{{}}}", body.join(","))
}

fn junk_value(rng: &mut impl Rng) -> Value {
    match rng.gen_range(0..7) {
        0 => Value::Null,
        1 => json!(rng.gen_range(-5..5)),
        2 => json!(rng.gen_bool(0.5)),
        3 => json!(["a", 1]),
        4 => json!({"nested": "x"}),
        5 => json!(""),
        _ => json!("   "),
    }
}

fn camel(k: &str) -> String {
    let mut out = String::new();
    let mut up = false;
    for c in k.chars() {
        if c == '_' {
            up = true;
        } else if up {
            out.extend(c.to_uppercase());
            up = false;
        } else {
            out.push(c);
        }
    }
    out
}

fn snake(k: &str) -> String {
    k.chars().flat_map(|c| if c.is_uppercase() { vec!['_', c.to_ascii_lowercase()] } else { vec![c] }).collect()
}

/// A reply that is valid about a third of the time and otherwise broken in one of many ways.
pub fn fuzz_reply(rng: &mut impl Rng, feature: &str) -> String {
    let mut e = base(rng, feature);
    if rng.gen_bool(0.35) {
        return render(&e);
    }
    match rng.gen_range(0..14) {
        0 => {
            let i = rng.gen_range(0..e.len());
            e.remove(i);
        }
        1 => e.push(("confidence".into(), json!(0.9))),
        2 => {
            let i = rng.gen_range(0..e.len());
            let k = e[i].0.clone();
            e[i].0 = if k.contains('_') { camel(&k) } else if k.chars().any(char::is_uppercase) { snake(&k) } else { k.to_uppercase() };
        }
        3 | 4 => {
            let i = rng.gen_range(0..e.len());
            e[i].1 = junk_value(rng);
        }
        5 => {
            let i = rng.gen_range(0..e.len());
            let dup = e[i].clone();
            e.push(dup);
        }
        6 => return format!("[{}]", e.iter().map(|(_, v)| v.to_string()).collect::<Vec<_>>().join(",")),
        7 => return json!(sentence(rng)).to_string(),
        8 => {
            let s = render(&e);
            let cut = rng.gen_range(0..s.len());
            return s[..cut].to_owned();
        }
        9 => return format!("```json\n{}\n```", render(&e)),
        10 => {
            // feature-specific constraint breaks
            match feature {
                "drift" => {
                    e.retain(|(k, _)| k != "drift_detected" && k != "suggested_definition");
                    e.push(("drift_detected".into(), json!(false)));
                    e.push(("suggested_definition".into(), json!(sentence(rng))));
                }
                "keywords" => {
                    let bad = match rng.gen_range(0..4) {
                        0 => vec!["k"; 13].join("; "),
                        1 => "one two three four five six".to_owned(),
                        2 => format!("{}; ", keyword_line(rng)),
                        _ => keyword_line(rng).replace("; ", ";"),
                    };
                    e = vec![("keywords".into(), json!(bad))];
                }
                _ => {
                    let i = rng.gen_range(0..e.len());
                    e[i].1 = json!(" ");
                }
            }
        }
        11 => e.clear(),
        12 => return "null".into(),
        _ => {
            // a sibling feature's payload
            let other = FEATURES.choose(rng).unwrap();
            e = base(rng, other);
        }
    }
    render(&e)
}

/// Field values of `raw`, for comparing against a constructed result.
pub fn fields(raw: &str) -> serde_json::Map<String, Value> {
    serde_json::from_str::<Value>(raw).unwrap().as_object().unwrap().clone()
}
