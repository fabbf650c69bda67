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
#include "metalstm/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace metalstm {

namespace {

std::string lowercase(std::string s) {
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

std::vector<std::string> split_whitespace(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    out.push_back(tok);
  }
  return out;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open file: " + path);
  }
  return in;
}

}  // namespace

Vocab::Vocab() {
  add("<pad>");
  add("<unk>");
}

int Vocab::add(const std::string& token) {
  auto it = token_to_index_.find(token);
  if (it != token_to_index_.end()) {
    return it->second;
  }
  const int id = static_cast<int>(index_to_token_.size());
  index_to_token_.push_back(token);
  token_to_index_.emplace(token, id);
  return id;
}

int Vocab::lookup(const std::string& token) const {
  auto it = token_to_index_.find(token);
  return it == token_to_index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int index) const {
  if (index < 0 || index >= size()) {
    throw std::out_of_range("Vocab: index " + std::to_string(index));
  }
  return index_to_token_[static_cast<std::size_t>(index)];
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const std::string& t : index_to_token_) {
    h = fnv1a(t.data(), t.size(), h);
    h = fnv1a("\n", 1, h);
  }
  return h;
}

int TaskSpec::n_outputs() const {
  if (const auto* c = std::get_if<ClassificationHead>(&head)) {
    return c->n_classes;
  }
  return static_cast<int>(std::get<TaggingHead>(head).tagset.size());
}

std::vector<RawClassificationExample> read_classification_file(
    const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<RawClassificationExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected label<TAB>text");
    }
    RawClassificationExample ex;
    try {
      std::size_t used = 0;
      ex.label = std::stoi(line.substr(0, tab), &used);
      if (used != tab || ex.label < 0) {
        throw std::invalid_argument("label");
      }
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": malformed label '" + line.substr(0, tab) + "'");
    }
    ex.tokens = split_whitespace(lowercase(line.substr(tab + 1)));
    out.push_back(std::move(ex));
  }
  return out;
}

ClassificationRaw load_classification(const std::string& path,
                                      std::uint64_t seed) {
  std::vector<RawClassificationExample> all = read_classification_file(path);
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n = all.size();
  const std::size_t n_train = 7 * n / 10;
  const std::size_t n_dev = n / 10;
  ClassificationRaw out;
  for (std::size_t i = 0; i < n; ++i) {
    auto& ex = all[order[i]];
    if (i < n_train) {
      out.train.push_back(std::move(ex));
    } else if (i < n_train + n_dev) {
      out.dev.push_back(std::move(ex));
    } else {
      out.test.push_back(std::move(ex));
    }
  }
  return out;
}

ConllData load_conll(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  ConllData out;
  std::unordered_map<std::string, int> seen_tags;
  RawTaggingSentence current;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&]() {
    if (!current.tokens.empty()) {
      out.sentences.push_back(std::move(current));
      current = RawTaggingSentence{};
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::vector<std::string> cols = split_whitespace(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols.size() < 2) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected at least word and tag columns");
    }
    current.tokens.push_back(cols.front());
    current.tags.push_back(cols.back());
    if (seen_tags.emplace(cols.back(), 1).second) {
      out.tagset.push_back(cols.back());
    }
  }
  flush();
  return out;
}

void write_conll(std::ostream& os,
                 const std::vector<RawTaggingSentence>& sentences) {
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      os << s.tokens[i] << " " << s.tags[i] << "\n";
    }
    os << "\n";
  }
}

Matrix load_embeddings(const std::string& path, const Vocab& vocab, int dim,
                       std::uint64_t seed, int* coverage) {
  std::ifstream in = open_or_throw(path);
  std::mt19937_64 rng(seed);
  Matrix table = uniform_matrix(vocab.size(), dim, -0.1, 0.1, rng);

  std::vector<bool> filled(static_cast<std::size_t>(vocab.size()), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::istringstream is(line);
    std::string token;
    is >> token;
    const int id = vocab.lookup(token);
    std::vector<double> values;
    double v = 0.0;
    while (is >> v) {
      values.push_back(v);
    }
    if (static_cast<int>(values.size()) != dim) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": embedding for token '" + token + "' has " +
                       std::to_string(values.size()) + " values, expected " +
                       std::to_string(dim));
    }
    if (id != Vocab::kUnk || token == vocab.token(Vocab::kUnk)) {
      for (int j = 0; j < dim; ++j) {
        table(id, j) = values[static_cast<std::size_t>(j)];
      }
      filled[static_cast<std::size_t>(id)] = true;
    }
  }
  if (coverage != nullptr) {
    *coverage = static_cast<int>(
        std::count(filled.begin(), filled.end(), true));
  }
  return table;
}

std::vector<int> encode_tokens(const Vocab& vocab,
                               const std::vector<std::string>& tokens,
                               int truncate) {
  std::vector<int> out;
  const std::size_t limit =
      truncate > 0 ? std::min<std::size_t>(tokens.size(),
                                           static_cast<std::size_t>(truncate))
                   : tokens.size();
  out.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) {
    out.push_back(vocab.lookup(tokens[i]));
  }
  return out;
}

Corpus encode_classification(const ClassificationRaw& raw, const Vocab& vocab,
                             int truncate) {
  Corpus out;
  auto encode_split = [&](const std::vector<RawClassificationExample>& split,
                          std::vector<Example>& dst) {
    dst.reserve(split.size());
    for (const auto& ex : split) {
      Example e;
      e.tokens = encode_tokens(vocab, ex.tokens, truncate);
      e.label = ex.label;
      dst.push_back(std::move(e));
    }
  };
  encode_split(raw.train, out.train);
  encode_split(raw.dev, out.dev);
  encode_split(raw.test, out.test);
  return out;
}

std::vector<std::string> decode_tokens(const Vocab& vocab,
                                       const std::vector<int>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (int id : tokens) {
    out.push_back(vocab.token(id));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kSynthVocabTokens = 50;
constexpr int kSynthTrain = 600;
constexpr int kSynthDev = 100;
constexpr int kSynthTest = 200;
constexpr int kMinLen = 8;
constexpr int kMaxLen = 15;
constexpr int kNearGap = 4;  // pattern: a first-role token, then a
                             // second-role token within this distance
constexpr int kClassSize = 8;
constexpr double kRoleRate = 0.12;

bool in_set(int token, const std::vector<int>& set) {
  return std::find(set.begin(), set.end(), token) != set.end();
}

bool has_near_pair(const std::vector<int>& tokens,
                   const std::vector<int>& first_role,
                   const std::vector<int>& second_role) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!in_set(tokens[i], first_role)) {
      continue;
    }
    const std::size_t hi = std::min(tokens.size(), i + 1 + kNearGap);
    for (std::size_t j = i + 1; j < hi; ++j) {
      if (in_set(tokens[j], second_role)) {
        return true;
      }
    }
  }
  return false;
}

// Role tokens occur throughout every sequence at a natural rate, so mere
// presence carries no signal. The label says whether some first-role token
// precedes some second-role token at distance <= kNearGap, which requires
// learning the role memberships jointly with the order-and-distance rule.
// Sequences are rejection-sampled to the requested label, balancing each
// split by construction.
Example synth_example(int label, const std::vector<int>& first_role,
                      const std::vector<int>& second_role,
                      const std::vector<int>& fillers, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len_dist(kMinLen, kMaxLen);
  std::uniform_int_distribution<std::size_t> filler_dist(0,
                                                         fillers.size() - 1);
  std::uniform_int_distribution<std::size_t> role_dist(0,
                                                       first_role.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Example ex;
  while (true) {
    const int len = len_dist(rng);
    ex.tokens.clear();
    ex.tokens.reserve(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
      const double u = unit(rng);
      if (u < kRoleRate) {
        ex.tokens.push_back(first_role[role_dist(rng)]);
      } else if (u < 2.0 * kRoleRate) {
        ex.tokens.push_back(second_role[role_dist(rng)]);
      } else {
        ex.tokens.push_back(fillers[filler_dist(rng)]);
      }
    }
    int count = 0;
    for (int t : ex.tokens) count += in_set(t, first_role) ? 1 : 0;
    if ((count % 2) == label) {
      break;
    }
  }
  ex.label = label;
  return ex;
}

}  // namespace

SynthSuite synth_tasks(int k, std::uint64_t seed) {
  if (k < 1 || k > 24) {
    throw std::invalid_argument("synth_tasks: need 1 <= k <= 24 tasks");
  }
  SynthSuite suite;
  std::vector<int> token_ids(kSynthVocabTokens);
  for (int i = 0; i < kSynthVocabTokens; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "w%02d", i);
    token_ids[static_cast<std::size_t>(i)] = suite.vocab.add(buf);
  }

  for (int task = 0; task < k; ++task) {
    // Task-specific role classes from a per-task shuffle of the shared
    // vocabulary; every task applies the same grammar to its own classes.
    std::vector<int> shuffled = token_ids;
    std::mt19937_64 class_rng(
        mix_seed(seed, 0x726f6c65u + static_cast<std::uint64_t>(task)));
    std::shuffle(shuffled.begin(), shuffled.end(), class_rng);
    const std::vector<int> first_role(shuffled.begin(),
                                      shuffled.begin() + kClassSize);
    const std::vector<int> second_role(shuffled.begin() + kClassSize,
                                       shuffled.begin() + 2 * kClassSize);
    const std::vector<int> fillers(shuffled.begin() + 2 * kClassSize,
                                   shuffled.end());

    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(task)));
    TaskSpec spec;
    spec.id = "synth" + std::to_string(task);
    spec.head = ClassificationHead{2};
    spec.lambda = 1.0;
    const int total = kSynthTrain + kSynthDev + kSynthTest;
    for (int i = 0; i < total; ++i) {
      Example ex = synth_example(i % 2, first_role, second_role, fillers, rng);
      if (i < kSynthTrain) {
        spec.corpus.train.push_back(std::move(ex));
      } else if (i < kSynthTrain + kSynthDev) {
        spec.corpus.dev.push_back(std::move(ex));
      } else {
        spec.corpus.test.push_back(std::move(ex));
      }
    }
    suite.tasks.push_back(std::move(spec));
  }
  return suite;
}

}  // namespace metalstm
