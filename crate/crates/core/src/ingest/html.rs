//! Plain-text extraction from HTML pages.
//!
//! A small tag scanner, not a conforming HTML parser: it tracks only which
//! elements open and close, drops the contents of non-content elements
//! (scripts, navigation, forms, ...), turns block elements into paragraph
//! breaks and decodes the common character references. Paragraphs shorter
//! than a minimum length are treated as boilerplate.

pub const DEFAULT_MIN_PARAGRAPH_CHARS: usize = 25;

const SKIPPED: &[&str] = &[
    "script", "style", "noscript", "nav", "header", "footer", "aside", "form", "template", "svg", "iframe", "head",
    "button", "select", "textarea", "canvas", "object",
];

/// Elements whose content is raw text up to the matching end tag.
const RAW_TEXT: &[&str] = &["script", "style", "textarea", "template"];

const BLOCKS: &[&str] = &[
    "p", "div", "br", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "section", "article", "main", "blockquote",
    "pre", "table", "tr", "td", "th", "thead", "tbody", "dl", "dd", "dt", "figure", "figcaption", "hr", "body", "caption",
];

/// Extracts body paragraphs with the default minimum length.
pub fn extract_main_text(html: &str) -> String {
    extract_main_text_with(html, DEFAULT_MIN_PARAGRAPH_CHARS)
}

/// Paragraphs of at least `min_chars` characters, joined by blank lines.
pub fn extract_main_text_with(html: &str, min_chars: usize) -> String {
    let mut paragraphs: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut skip_depth = 0usize;
    let mut rest = html;

    let flush = |current: &mut String, paragraphs: &mut Vec<String>| {
        let text = collapse_whitespace(&decode_entities(current));
        if text.chars().count() >= min_chars {
            paragraphs.push(text);
        }
        current.clear();
    };

    while !rest.is_empty() {
        let Some(lt) = rest.find('<') else {
            if skip_depth == 0 {
                current.push_str(rest);
            }
            break;
        };
        if skip_depth == 0 {
            current.push_str(&rest[..lt]);
        }
        rest = &rest[lt..];

        if let Some(after) = rest.strip_prefix("<!--") {
            rest = after.find("-->").map_or("", |e| &after[e + 3..]);
            continue;
        }
        let Some(tag) = parse_tag(rest) else {
            // A stray `<` is text.
            if skip_depth == 0 {
                current.push('<');
            }
            rest = &rest[1..];
            continue;
        };
        rest = &rest[tag.len..];

        let name = tag.name.as_str();
        if SKIPPED.contains(&name) {
            if tag.closing {
                skip_depth = skip_depth.saturating_sub(1);
            } else if !tag.self_closing {
                if RAW_TEXT.contains(&name) {
                    rest = skip_raw_text(rest, name);
                } else {
                    skip_depth += 1;
                }
            }
            flush(&mut current, &mut paragraphs);
            continue;
        }
        if skip_depth == 0 && BLOCKS.contains(&name) {
            flush(&mut current, &mut paragraphs);
        }
    }
    flush(&mut current, &mut paragraphs);
    paragraphs.join("\n\n")
}

struct Tag {
    name: String,
    closing: bool,
    self_closing: bool,
    len: usize,
}

/// Parses a tag at the start of `s` (which begins with `<`). Declarations
/// such as `<!DOCTYPE>` come back with an empty name.
fn parse_tag(s: &str) -> Option<Tag> {
    let bytes = s.as_bytes();
    let mut i = 1;
    let closing = bytes.get(i) == Some(&b'/');
    if closing {
        i += 1;
    }
    let declaration = matches!(bytes.get(i), Some(b'!') | Some(b'?'));
    let name_start = i;
    while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
        i += 1;
    }
    if i == name_start && !declaration {
        return None;
    }
    let name = s[name_start..i].to_ascii_lowercase();
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => {
                let self_closing = i > 0 && bytes[i - 1] == b'/';
                return Some(Tag {
                    name: if declaration { String::new() } else { name },
                    closing,
                    self_closing,
                    len: i + 1,
                });
            }
            None => {}
        }
        i += 1;
    }
    // Unterminated tag: swallow the rest.
    Some(Tag {
        name: String::new(),
        closing,
        self_closing: true,
        len: s.len(),
    })
}

fn skip_raw_text<'a>(s: &'a str, name: &str) -> &'a str {
    let lower = s.to_ascii_lowercase();
    let end_tag = format!("</{name}");
    match lower.find(&end_tag) {
        Some(p) => {
            let after = &s[p..];
            after.find('>').map_or("", |g| &after[g + 1..])
        }
        None => "",
    }
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Decodes numeric references and a handful of common named ones.
pub fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let decoded = rest[1..].find(';').filter(|&e| e <= 10).and_then(|e| {
            let entity = &rest[1..1 + e];
            decode_entity(entity).map(|c| (c, e + 2))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entity(entity: &str) -> Option<char> {
    if let Some(num) = entity.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        return char::from_u32(code);
    }
    Some(match entity {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        "ndash" => '\u{2013}',
        "mdash" => '\u{2014}',
        "lsquo" => '\u{2018}',
        "rsquo" => '\u{2019}',
        "ldquo" => '\u{201c}',
        "rdquo" => '\u{201d}',
        "hellip" => '\u{2026}',
        "copy" => '\u{a9}',
        _ => return None,
    })
}
