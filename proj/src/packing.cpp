#include "spactor/packing.hpp"

#include <fstream>
#include <sstream>

#include "spactor/rng.hpp"

namespace spactor {

TokenSeq encode_corpus_text(std::string_view text, const Vocabulary& vocab) {
  TokenSeq ids;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty()) {
      TokenSeq doc = vocab.encode(line);
      if (!doc.empty()) {
        ids.insert(ids.end(), doc.begin(), doc.end());
        ids.push_back(vocab.eos_id());
      }
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return ids;
}

TokenSeq encode_corpus_file(const std::filesystem::path& file, const Vocabulary& vocab) {
  std::ifstream in(file, std::ios::binary);
  require(in.good(), "cannot open corpus file: " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return encode_corpus_text(ss.str(), vocab);
}

BatchStream::BatchStream(TokenSeq corpus_ids, int input_len, int batch_size, std::uint64_t seed,
                         TokenId pad_id)
    : ids_(std::move(corpus_ids)),
      input_len_(input_len),
      batch_size_(batch_size),
      seed_(seed),
      pad_id_(pad_id) {
  require(input_len_ >= 8, "input_len must be >= 8");
  require(batch_size_ >= 1, "batch_size must be >= 1");
  require(!ids_.empty(), "empty corpus");
  num_chunks_ = (ids_.size() + input_len_ - 1) / input_len_;
  batches_per_epoch_ = (num_chunks_ + batch_size_ - 1) / batch_size_;
  reshuffle();
}

void BatchStream::reshuffle() {
  perm_.resize(num_chunks_);
  for (std::uint64_t i = 0; i < num_chunks_; ++i) perm_[i] = i;
  RngStream rng = RngStream::named(seed_, "pack").fork(cursor_.epoch);
  for (std::uint64_t i = 0; i + 1 < num_chunks_; ++i) {
    std::uint64_t j = i + rng.next_below(num_chunks_ - i);
    std::swap(perm_[i], perm_[j]);
  }
}

void BatchStream::fill_row(TokenMatrix& m, int row, std::uint64_t chunk) const {
  const std::uint64_t begin = chunk * input_len_;
  for (int c = 0; c < input_len_; ++c) {
    const std::uint64_t k = begin + c;
    m.at(row, c) = k < ids_.size() ? ids_[k] : pad_id_;
  }
}

TokenMatrix BatchStream::next() {
  TokenMatrix m(batch_size_, input_len_, pad_id_);
  for (int r = 0; r < batch_size_; ++r) {
    // wrap within the epoch so every batch is full
    const std::uint64_t pos = (cursor_.index * batch_size_ + r) % num_chunks_;
    fill_row(m, r, perm_[pos]);
  }
  ++cursor_.index;
  if (cursor_.index >= batches_per_epoch_) {
    cursor_.index = 0;
    ++cursor_.epoch;
    reshuffle();
  }
  return m;
}

void BatchStream::seek(Cursor c) {
  require(c.index < batches_per_epoch_, "cursor index out of range");
  const bool epoch_changed = c.epoch != cursor_.epoch;
  cursor_ = c;
  if (epoch_changed) reshuffle();
}

PrefetchingBatchSource::PrefetchingBatchSource(BatchStream stream, size_t depth)
    : stream_(std::move(stream)),
      start_epoch_batches_(stream_.cursor().epoch * stream_.batches_per_epoch() +
                           stream_.cursor().index),
      queue_(depth == 0 ? 1 : depth) {
  if (depth > 0) {
    producer_ = std::thread([this] {
      while (queue_.push(stream_.next())) {
      }
    });
  }
}

PrefetchingBatchSource::~PrefetchingBatchSource() {
  queue_.close();
  if (producer_.joinable()) producer_.join();
}

TokenMatrix PrefetchingBatchSource::next() {
  if (!producer_.joinable()) return stream_.next();
  auto m = queue_.pop();
  require(m.has_value(), "batch queue closed");
  return std::move(*m);
}

BatchStream::Cursor PrefetchingBatchSource::cursor_after(std::uint64_t batches_consumed) const {
  const std::uint64_t bpe = stream_.batches_per_epoch();
  const std::uint64_t linear = start_epoch_batches_ + batches_consumed;
  return {linear / bpe, linear % bpe};
}

}  // namespace spactor
