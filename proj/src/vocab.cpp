#include "spactor/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include "spactor/rng.hpp"

namespace spactor {

namespace {

std::string sentinel_name(int k) { return "[S" + std::to_string(k) + "]"; }

template <class Fn>
void for_each_token(std::string_view text, Fn&& fn) {
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) fn(text.substr(i, j - i));
    i = j;
  }
}

}  // namespace

Vocabulary Vocabulary::build(std::istream& corpus, int max_size, int num_sentinels) {
  require(num_sentinels >= 1, "vocab: num_sentinels must be >= 1");
  const int reserved = kFirstSentinel + num_sentinels;
  require(max_size > reserved, "vocab too small");

  std::unordered_map<std::string, std::int64_t> counts;
  std::string line;
  bool any = false;
  while (std::getline(corpus, line)) {
    for_each_token(line, [&](std::string_view tok) {
      any = true;
      counts[std::string(tok)] += 1;
    });
  }
  require(any, "empty corpus");

  std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.num_sentinels_ = num_sentinels;
  v.id_to_token_.reserve(max_size);
  v.id_to_token_ = {"[PAD]", "[EOS]", "[UNK]", "[M]"};
  for (int k = 0; k < num_sentinels; ++k) v.id_to_token_.push_back(sentinel_name(k));

  for (const auto& [tok, cnt] : ranked) {
    if (static_cast<int>(v.id_to_token_.size()) >= max_size) break;
    // A corpus word spelled like a reserved symbol would shadow it; skip.
    if (tok.size() >= 3 && tok.front() == '[' && tok.back() == ']') continue;
    v.id_to_token_.push_back(tok);
  }
  v.rebuild_index();
  return v;
}

Vocabulary Vocabulary::build_from_file(const std::filesystem::path& corpus, int max_size,
                                       int num_sentinels) {
  std::ifstream in(corpus);
  require(in.good(), "cannot open corpus file: " + corpus.string());
  return build(in, max_size, num_sentinels);
}

Vocabulary Vocabulary::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  require(in.good(), "cannot open vocabulary file: " + file.string());
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) v.id_to_token_.push_back(line);
  require(static_cast<int>(v.id_to_token_.size()) > kFirstSentinel,
          "vocabulary file truncated: " + file.string());
  require(v.id_to_token_[0] == "[PAD]" && v.id_to_token_[1] == "[EOS]" &&
              v.id_to_token_[2] == "[UNK]" && v.id_to_token_[3] == "[M]",
          "vocabulary file has unexpected reserved-token layout");
  int k = 0;
  while (kFirstSentinel + k < static_cast<int>(v.id_to_token_.size()) &&
         v.id_to_token_[kFirstSentinel + k] == sentinel_name(k))
    ++k;
  require(k >= 1, "vocabulary file lists no sentinels");
  v.num_sentinels_ = k;
  v.rebuild_index();
  return v;
}

void Vocabulary::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  require(out.good(), "cannot write vocabulary file: " + file.string());
  for (const auto& tok : id_to_token_) out << tok << '\n';
}

TokenId Vocabulary::sentinel_id(int k) const {
  require(k >= 0 && k < num_sentinels_, "sentinel budget exceeded");
  return kFirstSentinel + k;
}

TokenSeq Vocabulary::encode(std::string_view text) const {
  TokenSeq out;
  for_each_token(text, [&](std::string_view tok) {
    auto it = token_to_id_.find(std::string(tok));
    if (it == token_to_id_.end() || is_special(it->second)) {
      out.push_back(kUnkId);
    } else {
      out.push_back(it->second);
    }
  });
  return out;
}

std::string Vocabulary::decode(TokenView ids) const {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

const std::string& Vocabulary::token(TokenId id) const {
  require(id >= 0 && id < size(), "id out of range");
  return id_to_token_[id];
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& tok : id_to_token_) {
    h = fnv1a64(tok.data(), tok.size(), h);
    h = fnv1a64("\n", 1, h);
  }
  return h;
}

void Vocabulary::rebuild_index() {
  token_to_id_.clear();
  token_to_id_.reserve(id_to_token_.size());
  for (size_t i = 0; i < id_to_token_.size(); ++i)
    token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i));
}

}  // namespace spactor
