use serde::{Deserialize, Serialize};

/// Characters emitted as standalone tokens. `:` is deliberately absent so that
/// `key:` and clock times such as `10:30` stay single tokens.
const PUNCTUATION: &[char] = &['.', ',', ';', '!', '?', '"', '\'', '(', ')', '[', ']'];

const SENTENCE_TERMINATORS: &[&str] = &[".", "!", "?"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub byte_start: usize,
    pub byte_end: usize,
    pub sentence_id: usize,
}

/// Tokens of one text together with the text they were cut from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSeq {
    source: String,
    tokens: Vec<Token>,
}

impl TokenSeq {
    /// Builds a sequence from explicit tokens. Byte offsets are synthesized as
    /// if the surfaces were joined by single spaces.
    pub fn from_surfaces<S: AsRef<str>>(surfaces: &[S]) -> Self {
        let mut source = String::new();
        let mut tokens = Vec::with_capacity(surfaces.len());
        for (i, s) in surfaces.iter().enumerate() {
            if i > 0 {
                source.push(' ');
            }
            let start = source.len();
            source.push_str(s.as_ref());
            tokens.push(Token { surface: s.as_ref().to_owned(), byte_start: start, byte_end: source.len(), sentence_id: 0 });
        }
        segment_sentences(TokenSeq { source, tokens })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn sentence_count(&self) -> usize {
        self.tokens.last().map_or(0, |t| t.sentence_id + 1)
    }

    /// Surfaces stitched back together with the original inter-token bytes.
    pub fn reconstruct(&self) -> String {
        let mut out = String::with_capacity(self.source.len());
        let mut cursor = 0;
        for t in &self.tokens {
            out.push_str(&self.source[cursor..t.byte_start]);
            out.push_str(&t.surface);
            cursor = t.byte_end;
        }
        out.push_str(&self.source[cursor..]);
        out
    }
}

/// Hook for swapping in a model-specific tokenizer.
pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> TokenSeq;
}

/// Unicode-whitespace splitting with punctuation broken out into single-char tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordPunctTokenizer;

impl Tokenizer for WordPunctTokenizer {
    fn tokenize(&self, text: &str) -> TokenSeq {
        let mut tokens = Vec::new();
        let mut word_start: Option<usize> = None;
        let flush = |start: &mut Option<usize>, end: usize, tokens: &mut Vec<Token>| {
            if let Some(s) = start.take() {
                tokens.push(Token { surface: text[s..end].to_owned(), byte_start: s, byte_end: end, sentence_id: 0 });
            }
        };
        for (i, c) in text.char_indices() {
            if c.is_whitespace() {
                flush(&mut word_start, i, &mut tokens);
            } else if PUNCTUATION.contains(&c) {
                flush(&mut word_start, i, &mut tokens);
                let end = i + c.len_utf8();
                tokens.push(Token { surface: text[i..end].to_owned(), byte_start: i, byte_end: end, sentence_id: 0 });
            } else if word_start.is_none() {
                word_start = Some(i);
            }
        }
        flush(&mut word_start, text.len(), &mut tokens);
        segment_sentences(TokenSeq { source: text.to_owned(), tokens })
    }
}

pub fn tokenize(text: &str) -> TokenSeq {
    WordPunctTokenizer.tokenize(text)
}

fn is_terminator(surface: &str) -> bool {
    SENTENCE_TERMINATORS.contains(&surface)
}

/// Assigns sentence ids. A token opens a new sentence when a newline precedes
/// it, or when the previous token is a terminator and it is not one itself
/// (so `"?!"` closes a single sentence).
pub fn segment_sentences(mut seq: TokenSeq) -> TokenSeq {
    let mut sentence = 0;
    for i in 0..seq.tokens.len() {
        if i > 0 {
            let prev = &seq.tokens[i - 1];
            let cur = &seq.tokens[i];
            let gap = &seq.source[prev.byte_end..cur.byte_start];
            if gap.contains('\n') || (is_terminator(&prev.surface) && !is_terminator(&cur.surface)) {
                sentence += 1;
            }
        }
        seq.tokens[i].sentence_id = sentence;
    }
    seq
}

/// Canonical text form of a token run: surfaces joined by single spaces.
pub fn render_tokens<'a>(surfaces: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for (i, s) in surfaces.into_iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(s);
    }
    out
}

/// One `(prefix, next token)` pair cut from the context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixRecord {
    pub prefix_text: String,
    pub target_token: String,
    pub position: usize,
    pub sentence_id: usize,
}

/// One record per token; each prefix runs from the first token of the
/// token's sentence up to (not including) the token.
pub fn build_records(seq: &TokenSeq) -> Vec<PrefixRecord> {
    let tokens = seq.tokens();
    let mut records = Vec::with_capacity(tokens.len());
    let mut sentence_start = 0;
    for (t, tok) in tokens.iter().enumerate() {
        if t > 0 && tok.sentence_id != tokens[t - 1].sentence_id {
            sentence_start = t;
        }
        records.push(PrefixRecord {
            prefix_text: render_tokens(tokens[sentence_start..t].iter().map(|x| x.surface.as_str())),
            target_token: tok.surface.clone(),
            position: t,
            sentence_id: tok.sentence_id,
        });
    }
    records
}
