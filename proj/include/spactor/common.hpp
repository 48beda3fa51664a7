#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spactor {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;
using TokenView = std::span<const TokenId>;

/// Dense [rows x cols] matrix of token ids, row-major.
struct TokenMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<TokenId> data;

  TokenMatrix() = default;
  TokenMatrix(int r, int c, TokenId fill = 0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  TokenId& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  TokenId at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  TokenView row(int r) const {
    return TokenView(data.data() + static_cast<size_t>(r) * cols, cols);
  }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace spactor
