//! Vocabulary tree over binary descriptors, tf-idf bag-of-words vectors and an
//! inverted-index keyframe database.

mod database;
mod vector;
mod vocabulary;

pub use database::BowDatabase;
pub use vector::{score, BowVector};
pub use vocabulary::{train_vocabulary, VocabError, Vocabulary, VocabularyMeta, WordId};
