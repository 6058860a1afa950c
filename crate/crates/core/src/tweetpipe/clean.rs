use std::collections::{BTreeMap, BTreeSet};

use regex::Regex;

use crate::ingest::Lexicons;

/// Nine-step tweet text normalizer.
#[derive(Debug, Clone)]
pub struct TextCleaner {
    url: Regex,
    email: Regex,
    phone: Regex,
    mention: Regex,
    hashtag: Regex,
    slang: BTreeMap<String, String>,
    words: BTreeSet<String>,
    max_word: usize,
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32, 0x1F000..=0x1FAFF | 0x2600..=0x27BF | 0x2B00..=0x2BFF | 0xFE00..=0xFE0F | 0x200D | 0x20E3)
}

impl TextCleaner {
    pub fn new(lex: &Lexicons) -> Self {
        let words: BTreeSet<String> = lex.wordlist.iter().map(|w| w.trim().to_lowercase()).filter(|w| !w.is_empty()).collect();
        TextCleaner {
            url: Regex::new(r"(?:https?://|www\.)\S+").unwrap(),
            email: Regex::new(r"[\w.+-]+@[\w-]+\.[\w.-]+").unwrap(),
            phone: Regex::new(r"\+?\d[\d\-\s().]{7,}\d").unwrap(),
            mention: Regex::new(r"@\w+").unwrap(),
            hashtag: Regex::new(r"#(\w+)").unwrap(),
            slang: lex.slang.iter().map(|(k, v)| (k.to_lowercase(), v.to_lowercase())).collect(),
            max_word: words.iter().map(|w| w.chars().count()).max().unwrap_or(0),
            words,
        }
    }

    /// Greedy longest-match split against the wordlist; unmatched characters
    /// are glued into words of their own.
    pub fn segment_hashtag(&self, tag: &str) -> String {
        let chars: Vec<char> = tag.chars().collect();
        let mut out: Vec<String> = Vec::new();
        let mut pending = String::new();
        let mut i = 0;
        while i < chars.len() {
            let mut matched = 0;
            for len in (1..=self.max_word.min(chars.len() - i)).rev() {
                let cand: String = chars[i..i + len].iter().collect();
                if self.words.contains(&cand) {
                    matched = len;
                    break;
                }
            }
            if matched == 0 {
                pending.push(chars[i]);
                i += 1;
            } else {
                if !pending.is_empty() {
                    out.push(std::mem::take(&mut pending));
                }
                out.push(chars[i..i + matched].iter().collect());
                i += matched;
            }
        }
        if !pending.is_empty() {
            out.push(pending);
        }
        out.join(" ")
    }

    fn one_pass(&self, raw: &str) -> String {
        // 1. lowercase
        let s = raw.to_lowercase();
        // 2. urls, emails, phone numbers, mentions, emojis
        let s = self.url.replace_all(&s, " ");
        let s = self.email.replace_all(&s, " ");
        let s = self.phone.replace_all(&s, " ");
        let s = self.mention.replace_all(&s, " ");
        let s: String = s.chars().filter(|c| !is_emoji(*c)).collect();
        // 3. hashtags
        let s = self.hashtag.replace_all(&s, |c: &regex::Captures| format!(" {} ", self.segment_hashtag(&c[1])));
        // 4. spaced-out letters
        let s = join_spaced_letters(&s);
        // 5. repeated suffixes
        let s = s.split_whitespace().map(collapse_repeats).collect::<Vec<_>>().join(" ");
        // 6. slang
        let s = s
            .split_whitespace()
            .map(|w| {
                let core = w.trim_end_matches(['.', ',', '!', '?']);
                match self.slang.get(core) {
                    Some(v) => format!("{v}{}", &w[core.len()..]),
                    None => w.to_string(),
                }
            })
            .collect::<Vec<_>>()
            .join(" ");
        // 7. special characters and brackets
        let s: String = s
            .chars()
            .map(|c| match c {
                '\u{2018}' | '\u{2019}' | '\u{02bc}' => '\'',
                c if c.is_alphanumeric() || c.is_whitespace() || "'.,!?".contains(c) => c,
                _ => ' ',
            })
            .collect();
        // 8. whitespace
        let s = s.split_whitespace().collect::<Vec<_>>().join(" ");
        // 9. ending mark
        if s.is_empty() {
            ".".to_string()
        } else if s.ends_with(['.', '!', '?']) {
            s
        } else {
            s + "."
        }
    }

    /// Apply the steps until the text stops changing.
    pub fn clean(&self, raw: &str) -> String {
        let mut cur = self.one_pass(raw);
        for _ in 0..8 {
            let next = self.one_pass(&cur);
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }
}

/// Join runs of three or more single-letter tokens ("h a p p y" -> "happy").
fn join_spaced_letters(s: &str) -> String {
    let tokens: Vec<&str> = s.split_whitespace().collect();
    let single = |t: &str| {
        let mut it = t.chars();
        matches!((it.next(), it.next()), (Some(c), None) if c.is_alphabetic())
    };
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut j = i;
        while j < tokens.len() && single(tokens[j]) {
            j += 1;
        }
        if j - i >= 3 {
            out.push(tokens[i..j].concat());
            i = j;
        } else {
            out.push(tokens[i].to_string());
            i += 1;
        }
    }
    out.join(" ")
}

/// Collapse a character repeated three or more times to one, and a 2-3
/// character unit repeated three or more times to a single copy.
pub fn collapse_repeats(word: &str) -> String {
    let mut cur: Vec<char> = word.chars().collect();
    loop {
        let mut changed = false;
        'unit: for u in 1..=3 {
            let mut i = 0;
            while i + 3 * u <= cur.len() {
                let unit = &cur[i..i + u];
                let mut reps = 1;
                while i + (reps + 1) * u <= cur.len() && cur[i + reps * u..i + (reps + 1) * u] == *unit {
                    reps += 1;
                }
                if reps >= 3 && (u == 1 || unit.iter().collect::<BTreeSet<_>>().len() > 1) {
                    cur.drain(i + u..i + reps * u);
                    changed = true;
                    break 'unit;
                }
                i += 1;
            }
        }
        if !changed {
            return cur.into_iter().collect();
        }
    }
}
