#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spactor/common.hpp"

namespace spactor {

/// Whitespace token vocabulary with the reserved ids the corruption pipeline
/// needs. Fixed id layout:
///   0        [PAD]
///   1        [EOS]
///   2        [UNK]   (unknown-content id; emitted by encode for OOV words)
///   3        [M]     (MLM mask)
///   4..4+K-1 [S0]..[S(K-1)] sentinels
///   then frequency-ranked content tokens.
/// Immutable after construction; safe to share across threads.
class Vocabulary {
 public:
  static constexpr TokenId kPadId = 0;
  static constexpr TokenId kEosId = 1;
  static constexpr TokenId kUnkId = 2;
  static constexpr TokenId kMlmId = 3;
  static constexpr TokenId kFirstSentinel = 4;

  /// Frequency-ranked vocabulary from a corpus stream (one document per
  /// line). Ties break lexicographically so identical corpus bytes give a
  /// byte-identical vocabulary.
  static Vocabulary build(std::istream& corpus, int max_size, int num_sentinels);
  static Vocabulary build_from_file(const std::filesystem::path& corpus, int max_size,
                                    int num_sentinels);

  /// One token per line, line number = id.
  static Vocabulary load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int num_sentinels() const { return num_sentinels_; }
  int num_reserved() const { return kFirstSentinel + num_sentinels_; }

  TokenId pad_id() const { return kPadId; }
  TokenId eos_id() const { return kEosId; }
  TokenId unk_id() const { return kUnkId; }
  TokenId mlm_id() const { return kMlmId; }
  TokenId sentinel_id(int k) const;

  bool is_sentinel(TokenId id) const {
    return id >= kFirstSentinel && id < kFirstSentinel + num_sentinels_;
  }
  /// pad/eos/mlm/sentinel. [UNK] counts as content, not as a special.
  bool is_special(TokenId id) const {
    return id == kPadId || id == kEosId || id == kMlmId || is_sentinel(id);
  }

  /// Whitespace-split encode. Never emits special ids; OOV words (and words
  /// that collide with a reserved spelling) map to [UNK].
  TokenSeq encode(std::string_view text) const;

  /// Space-joined decode; specials render as their bracketed names.
  std::string decode(TokenView ids) const;

  const std::string& token(TokenId id) const;

  /// FNV-1a over the serialized token list.
  std::uint64_t content_hash() const;

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  int num_sentinels_ = 0;

  void rebuild_index();
};

}  // namespace spactor
