#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "mona/config.hpp"
#include "mona/corpus.hpp"

namespace mona {

/// `corpus.<field> = value` lines, one per config field.
void write_corpus_config(std::ostream& out, const SyntheticCorpusConfig& config);
/// Reads every `corpus.*` key present, keeping `defaults` elsewhere.
SyntheticCorpusConfig read_corpus_config(KeyValueConfig& kv, SyntheticCorpusConfig defaults = {});

/// Full corpus with signals stored as hex floats (bit-exact round trip).
void save_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(std::istream& in);
Corpus load_corpus(const std::string& path);

/// Tab-separated overview: id, class, split, frames, parallel id, text.
void write_manifest(std::ostream& out, const Corpus& corpus);

}  // namespace mona
