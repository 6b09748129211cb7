//! Arabic orthographic normalization and English casing transforms.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::{Error, Result, TokenSeq};

pub const DEFAULT_LRB: &str = "-LRB-";
pub const DEFAULT_RRB: &str = "-RRB-";

/// Character and token rewrite rules.
///
/// Replacement strings never contain a mapped or stripped character, which
/// makes [`normalize_arabic`] idempotent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormRules {
    char_map: BTreeMap<char, String>,
    strip_set: BTreeSet<char>,
    token_map: BTreeMap<String, String>,
}

impl Default for NormRules {
    fn default() -> Self {
        Self::with_brackets(DEFAULT_LRB, DEFAULT_RRB).expect("default rules are closed")
    }
}

impl NormRules {
    pub fn new(
        char_map: BTreeMap<char, String>,
        strip_set: BTreeSet<char>,
        token_map: BTreeMap<String, String>,
    ) -> Result<Self> {
        for (from, to) in &char_map {
            if strip_set.contains(from) {
                return Err(Error::InvalidArgument(format!(
                    "U+{:04X} is both mapped and stripped",
                    *from as u32
                )));
            }
            if let Some(c) = to
                .chars()
                .find(|c| char_map.contains_key(c) || strip_set.contains(c))
            {
                return Err(Error::InvalidArgument(format!(
                    "replacement for U+{:04X} contains rewritten character U+{:04X}",
                    *from as u32, c as u32
                )));
            }
        }
        Ok(NormRules {
            char_map,
            strip_set,
            token_map,
        })
    }

    /// The standard alif/ya/diacritic inventory with custom bracket tokens.
    pub fn with_brackets(lrb: &str, rrb: &str) -> Result<Self> {
        let mut char_map = BTreeMap::new();
        for alif in ['\u{0622}', '\u{0623}', '\u{0625}'] {
            char_map.insert(alif, "\u{0627}".to_owned());
        }
        char_map.insert('\u{0649}', "\u{064A}".to_owned());
        char_map.insert('(', lrb.to_owned());
        char_map.insert(')', rrb.to_owned());

        let mut strip_set: BTreeSet<char> = ('\u{064B}'..='\u{0652}').collect();
        strip_set.insert('\u{0670}');
        strip_set.insert('\u{0640}');
        Self::new(char_map, strip_set, BTreeMap::new())
    }

    pub fn char_map(&self) -> &BTreeMap<char, String> {
        &self.char_map
    }

    pub fn strip_set(&self) -> &BTreeSet<char> {
        &self.strip_set
    }

    pub fn token_map(&self) -> &BTreeMap<String, String> {
        &self.token_map
    }

    /// TSV with `hex_codepoint<TAB>replacement` lines (empty replacement
    /// strips); whole-token rules are written as `=token<TAB>replacement`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (c, rep) in &self.char_map {
            out.push_str(&format!("{:04X}\t{}\n", *c as u32, rep));
        }
        for c in &self.strip_set {
            out.push_str(&format!("{:04X}\t\n", *c as u32));
        }
        for (tok, rep) in &self.token_map {
            out.push_str(&format!("={tok}\t{rep}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut char_map = BTreeMap::new();
        let mut strip_set = BTreeSet::new();
        let mut token_map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rep) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected `codepoint<TAB>replacement`"))?;
            if let Some(tok) = key.strip_prefix('=') {
                token_map.insert(tok.to_owned(), rep.to_owned());
                continue;
            }
            let c = u32::from_str_radix(key.trim_start_matches("U+"), 16)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| Error::parse(i + 1, format!("bad codepoint `{key}`")))?;
            if rep.is_empty() {
                strip_set.insert(c);
            } else {
                char_map.insert(c, rep.to_owned());
            }
        }
        Self::new(char_map, strip_set, token_map)
    }
}

/// Applies character rewrites and stripping, then whole-token rewrites.
/// Whitespace is preserved exactly.
pub fn normalize_arabic(text: &str, rules: &NormRules) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if rules.strip_set.contains(&c) {
            continue;
        }
        match rules.char_map.get(&c) {
            Some(rep) => out.push_str(rep),
            None => out.push(c),
        }
    }
    if rules.token_map.is_empty() {
        return out;
    }
    let mut res = String::with_capacity(out.len());
    let mut word = String::new();
    let flush = |word: &mut String, res: &mut String| {
        match rules.token_map.get(word.as_str()) {
            Some(rep) => res.push_str(rep),
            None => res.push_str(word),
        }
        word.clear();
    };
    for c in out.chars() {
        if c.is_whitespace() {
            flush(&mut word, &mut res);
            res.push(c);
        } else {
            word.push(c);
        }
    }
    flush(&mut word, &mut res);
    res
}

pub fn lowercase(text: &str) -> String {
    text.to_lowercase()
}

/// Most frequent surface casing per lowercased word.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TruecaseModel {
    case_freq: BTreeMap<String, (String, usize)>,
}

impl TruecaseModel {
    pub fn len(&self) -> usize {
        self.case_freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.case_freq.is_empty()
    }

    pub fn get(&self, lower: &str) -> Option<&str> {
        self.case_freq.get(lower).map(|(s, _)| s.as_str())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (lower, (surface, count)) in &self.case_freq {
            out.push_str(&format!("{lower}\t{surface}\t{count}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut case_freq = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [lower, surface, count] = fields[..] else {
                return Err(Error::parse(i + 1, "expected `lower<TAB>surface<TAB>count`"));
            };
            if lowercase(surface) != lower {
                return Err(Error::parse(
                    i + 1,
                    format!("`{surface}` does not lowercase to `{lower}`"),
                ));
            }
            let count = count
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad count `{count}`")))?;
            case_freq.insert(lower.to_owned(), (surface.to_owned(), count));
        }
        Ok(TruecaseModel { case_freq })
    }
}

fn pick_casing(forms: &HashMap<&str, usize>, lower: &str) -> (String, usize) {
    let (surface, count) = forms
        .iter()
        .max_by(|a, b| {
            a.1.cmp(b.1)
                .then_with(|| (*a.0 == lower).cmp(&(*b.0 == lower)))
                .then_with(|| b.0.cmp(a.0))
        })
        .expect("nonempty casing table");
    ((*surface).to_owned(), *count)
}

/// Sentence-initial occurrences only count for words never seen medially.
pub fn truecase_train(corpus: &[TokenSeq]) -> TruecaseModel {
    let mut medial: HashMap<String, HashMap<&str, usize>> = HashMap::new();
    let mut initial: HashMap<String, HashMap<&str, usize>> = HashMap::new();
    for sent in corpus {
        for (i, tok) in sent.iter().enumerate() {
            let table = if i == 0 { &mut initial } else { &mut medial };
            *table
                .entry(lowercase(tok))
                .or_default()
                .entry(tok.as_str())
                .or_default() += 1;
        }
    }
    let mut case_freq = BTreeMap::new();
    for (lower, forms) in &medial {
        case_freq.insert(lower.clone(), pick_casing(forms, lower));
    }
    for (lower, forms) in &initial {
        if !case_freq.contains_key(lower) {
            case_freq.insert(lower.clone(), pick_casing(forms, lower));
        }
    }
    TruecaseModel { case_freq }
}

pub fn truecase_apply(sentence: &[String], model: &TruecaseModel) -> TokenSeq {
    sentence
        .iter()
        .map(|tok| match model.get(&lowercase(tok)) {
            Some(surface) => surface.to_owned(),
            None => tok.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::split_tokens;
    use proptest::prelude::*;

    #[test]
    fn arabic_examples() {
        let r = NormRules::default();
        assert_eq!(normalize_arabic("آ", &r), "ا");
        assert_eq!(normalize_arabic("أحمد إلى", &r), "احمد الي");
        assert_eq!(normalize_arabic("( نعم )", &r), "-LRB- نعم -RRB-");
        assert_eq!(normalize_arabic("كِتَاب", &r), "كتاب");
        assert_eq!(normalize_arabic("كتـــاب", &r), "كتاب");
        assert_eq!(normalize_arabic("هٰذا", &r), "هذا");
        // hamza on waw / ya untouched
        assert_eq!(normalize_arabic("مؤمن رئيس", &r), "مؤمن رئيس");
        assert_eq!(normalize_arabic("plain text", &r), "plain text");
    }

    #[test]
    fn custom_brackets_and_token_rules() {
        let r = NormRules::with_brackets("--LRB--", "--RRB--").unwrap();
        assert_eq!(normalize_arabic("(x)", &r), "--LRB--x--RRB--");

        let text = "0622\tا\n064E\t\n=foo\tbar\n";
        let r = NormRules::from_tsv(text).unwrap();
        assert_eq!(normalize_arabic("foo آَ food", &r), "bar ا food");
        assert_eq!(NormRules::from_tsv(&r.to_tsv()).unwrap(), r);
    }

    #[test]
    fn rejects_open_rules() {
        assert!(NormRules::from_tsv("0622\t0623\n").is_ok());
        assert!(NormRules::from_tsv("0622\tأ\n0623\tا\n").is_err());
        assert!(NormRules::from_tsv("zz\tx\n").is_err());
    }

    #[test]
    fn lowercasing() {
        assert_eq!(lowercase("The Cat"), "the cat");
        assert_eq!(lowercase("MT05"), "mt05");
        assert_eq!(lowercase("already lower"), "already lower");
    }

    #[test]
    fn truecase_training() {
        let mut corpus = vec![];
        for _ in 0..5 {
            corpus.push(split_tokens("we met Obama today"));
        }
        corpus.push(split_tokens("obama"));
        for _ in 0..10 {
            corpus.push(split_tokens("on the mat"));
        }
        corpus.push(split_tokens("a Bank and a bank"));
        corpus.push(split_tokens("a Bank and a bank"));
        corpus.push(split_tokens("Sentence initial"));
        let m = truecase_train(&corpus);
        assert_eq!(m.get("obama"), Some("Obama"));
        assert_eq!(m.get("the"), Some("the"));
        assert_eq!(m.get("bank"), Some("bank"));
        assert_eq!(m.get("we"), Some("we"));
        assert_eq!(m.get("sentence"), Some("Sentence"));
        assert_eq!(TruecaseModel::from_tsv(&m.to_tsv()).unwrap(), m);
    }

    #[test]
    fn truecase_application() {
        let m = truecase_train(&[split_tokens("x the cat")]);
        assert_eq!(truecase_apply(&split_tokens("The cat"), &m), split_tokens("the cat"));
        assert_eq!(truecase_apply(&split_tokens("zxqv"), &m), split_tokens("zxqv"));
        assert!(truecase_apply(&[], &m).is_empty());
    }

    fn arabic_string() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop_oneof![
                8 => (0x0600u32..=0x06FF).prop_map(|c| char::from_u32(c).unwrap()),
                1 => Just(' '),
                1 => prop::sample::select(vec!['(', ')', 'a', '.']),
            ],
            0..40,
        )
        .prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(s in arabic_string()) {
            let r = NormRules::default();
            let once = normalize_arabic(&s, &r);
            prop_assert_eq!(normalize_arabic(&once, &r), once);
        }

        #[test]
        fn normalization_keeps_token_count(s in arabic_string()) {
            let r = NormRules::default();
            let toks: Vec<&str> = s.split(' ').filter(|t| !t.is_empty()).collect();
            let non_empty = toks.iter().filter(|t| !normalize_arabic(t, &r).is_empty()).count();
            prop_assert_eq!(split_tokens(&normalize_arabic(&s, &r)).len(), non_empty);
        }

        #[test]
        fn lowercase_idempotent(s in "\\PC{0,30}") {
            prop_assert_eq!(lowercase(&lowercase(&s)), lowercase(&s));
        }

        #[test]
        fn truecase_keeps_lowercase_projection(
            corpus in prop::collection::vec(prop::collection::vec("[a-cA-C]{1,3}", 1..6), 1..8),
            sent in prop::collection::vec("[a-dA-D]{1,3}", 0..6),
        ) {
            let m = truecase_train(&corpus);
            let out = truecase_apply(&sent, &m);
            let lc = |s: &[String]| s.iter().map(|t| lowercase(t)).collect::<Vec<_>>();
            prop_assert_eq!(lc(&out), lc(&sent));
        }
    }
}
