#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>

#include "spactor/common.hpp"
#include "spactor/vocab.hpp"

namespace spactor {

/// Encode a one-document-per-line corpus and join documents with [EOS].
TokenSeq encode_corpus_file(const std::filesystem::path& file, const Vocabulary& vocab);
TokenSeq encode_corpus_text(std::string_view text, const Vocabulary& vocab);

/// Deterministic stream of [batch_size x input_len] id matrices.
///
/// The corpus id sequence is chunked into input_len rows (final short chunk
/// padded with [PAD]); each epoch visits all chunks once in a seed-derived
/// random order, wrapping around so every batch is full. (corpus, seed,
/// config) fully determine the stream.
class BatchStream {
 public:
  struct Cursor {
    std::uint64_t epoch = 0;
    std::uint64_t index = 0;  // batch index within the epoch
  };

  BatchStream(TokenSeq corpus_ids, int input_len, int batch_size, std::uint64_t seed,
              TokenId pad_id);

  TokenMatrix next();

  std::uint64_t num_chunks() const { return num_chunks_; }
  std::uint64_t batches_per_epoch() const { return batches_per_epoch_; }

  Cursor cursor() const { return cursor_; }
  void seek(Cursor c);

 private:
  TokenSeq ids_;
  int input_len_;
  int batch_size_;
  std::uint64_t seed_;
  TokenId pad_id_;
  std::uint64_t num_chunks_ = 0;
  std::uint64_t batches_per_epoch_ = 0;

  Cursor cursor_;
  std::vector<std::uint64_t> perm_;  // chunk order for cursor_.epoch

  void reshuffle();
  void fill_row(TokenMatrix& m, int row, std::uint64_t chunk) const;
};

/// Single-producer single-consumer bounded queue; the producer/consumer
/// contract under which batch production may overlap training.
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(size_t capacity) : capacity_(capacity) {}

  /// False once the queue is closed.
  bool push(T item) {
    std::unique_lock lk(mu_);
    cv_pop_.wait(lk, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    cv_push_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lk(mu_);
    cv_push_.wait(lk, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    cv_pop_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lk(mu_);
    closed_ = true;
    cv_push_.notify_all();
    cv_pop_.notify_all();
  }

 private:
  size_t capacity_;
  std::mutex mu_;
  std::condition_variable cv_push_, cv_pop_;
  std::deque<T> items_;
  bool closed_ = false;
};

/// Runs a BatchStream on a producer thread with a bounded prefetch queue.
/// Batches arrive in stream order, so the training stream is unchanged.
class PrefetchingBatchSource {
 public:
  PrefetchingBatchSource(BatchStream stream, size_t depth);
  ~PrefetchingBatchSource();

  TokenMatrix next();
  BatchStream::Cursor cursor_after(std::uint64_t batches_consumed) const;

 private:
  BatchStream stream_;  // producer-owned after start; cursor math done statically
  std::uint64_t start_epoch_batches_;
  BoundedQueue<TokenMatrix> queue_;
  std::thread producer_;
  bool stopped_ = false;
};

}  // namespace spactor
