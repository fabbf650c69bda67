/* Copyright 2026 The MetaLSTM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef METALSTM_DATA_HPP_
#define METALSTM_DATA_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "metalstm/types.hpp"

namespace metalstm {

// Token table with reserved indices 0 = padding and 1 = unknown. Lookup of
// an unseen token returns the unknown index.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();

  int add(const std::string& token);         // returns existing id if present
  int lookup(const std::string& token) const;  // unseen -> kUnk
  const std::string& token(int index) const;
  int size() const { return static_cast<int>(index_to_token_.size()); }
  std::uint64_t hash() const;  // over tokens in index order

 private:
  std::vector<std::string> index_to_token_;
  std::unordered_map<std::string, int> token_to_index_;
};

// One encoded example: token indices plus either a class index or an
// aligned tag index sequence.
struct Example {
  std::vector<int> tokens;
  std::variant<int, std::vector<int>> label;

  int class_label() const { return std::get<int>(label); }
  const std::vector<int>& tag_labels() const {
    return std::get<std::vector<int>>(label);
  }
};

struct Corpus {
  std::vector<Example> train, dev, test;
};

struct ClassificationHead {
  int n_classes = 2;
};

struct TaggingHead {
  std::vector<std::string> tagset;
};

using HeadSpec = std::variant<ClassificationHead, TaggingHead>;

// One task: identity, output head, loss weight, and its corpus splits.
struct TaskSpec {
  std::string id;
  HeadSpec head;
  double lambda = 1.0;
  Corpus corpus;

  bool is_tagging() const {
    return std::holds_alternative<TaggingHead>(head);
  }
  int n_outputs() const;
};

// ---------------------------------------------------------------------------
// Loaders. Classification files hold `label<TAB>text` lines; text is
// whitespace-tokenized and lowercased. CoNLL files hold one token per line
// (first column word, last column tag) with blank lines between sentences.

struct RawClassificationExample {
  int label = 0;
  std::vector<std::string> tokens;
};

struct ClassificationRaw {
  std::vector<RawClassificationExample> train, dev, test;
};

std::vector<RawClassificationExample> read_classification_file(
    const std::string& path);

// Splits 70/10/20 after a seeded shuffle.
ClassificationRaw load_classification(const std::string& path,
                                      std::uint64_t seed);

struct RawTaggingSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

struct ConllData {
  std::vector<RawTaggingSentence> sentences;
  std::vector<std::string> tagset;  // in first-seen order
};

ConllData load_conll(const std::string& path);
void write_conll(std::ostream& os,
                 const std::vector<RawTaggingSentence>& sentences);

// Fills rows for vocab tokens found in a `token v1 ... vd` text file; rows
// for missing tokens are drawn uniform(-0.1, 0.1) under the seed. Reports
// how many vocab tokens the file covered through `coverage`.
Matrix load_embeddings(const std::string& path, const Vocab& vocab, int dim,
                       std::uint64_t seed, int* coverage = nullptr);

// ---------------------------------------------------------------------------
// Encoding.

std::vector<int> encode_tokens(const Vocab& vocab,
                               const std::vector<std::string>& tokens,
                               int truncate = 400);

Corpus encode_classification(const ClassificationRaw& raw, const Vocab& vocab,
                             int truncate = 400);

// ---------------------------------------------------------------------------
// Synthetic multi-task suite. K binary classification tasks over a shared
// 50-token vocabulary. Every task uses the same trigger grammar with its own
// trigger pair (a, b): label 1 iff a occurs before b at distance <= 4.
// Negatives are near misses (reversed pair, single trigger, or none), so the
// tasks require order detection rather than bag-of-words cues. Splits are
// 600/100/200 with labels balanced by construction.
struct SynthSuite {
  Vocab vocab;
  std::vector<TaskSpec> tasks;
};

SynthSuite synth_tasks(int k, std::uint64_t seed);

// Token strings for one encoded example (used when writing suites to disk).
std::vector<std::string> decode_tokens(const Vocab& vocab,
                                       const std::vector<int>& tokens);

}  // namespace metalstm

#endif  // METALSTM_DATA_HPP_
