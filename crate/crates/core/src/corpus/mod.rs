//! Context text handling and the prefix key-value datastore.

mod datastore;
mod tokenize;

pub use datastore::{
    build_datastore, load_datastore, save_datastore, Datastore, DatastoreEntry, PREFIX_JOIN, PREFIX_POLICY,
};
pub use tokenize::{
    build_records, render_tokens, segment_sentences, tokenize, PrefixRecord, Token, TokenSeq, Tokenizer,
    WordPunctTokenizer,
};
