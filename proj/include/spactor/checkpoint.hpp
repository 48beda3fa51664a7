#pragma once

#include <filesystem>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "spactor/config.hpp"
#include "spactor/model.hpp"
#include "spactor/optimizer.hpp"
#include "spactor/packing.hpp"

namespace spactor {

enum class Stage { Hybrid, ScOnly };
inline std::string stage_name(Stage s) { return s == Stage::Hybrid ? "hybrid" : "sc_only"; }
inline Stage parse_stage(const std::string& s) {
  if (s == "hybrid") return Stage::Hybrid;
  if (s == "sc_only") return Stage::ScOnly;
  throw Error("unknown stage '" + s + "'");
}

namespace ckpt_detail {

template <class Derived>
void write_tensor(const std::filesystem::path& file, const Eigen::PlainObjectBase<Derived>& m) {
  using S = typename Derived::Scalar;
  std::ofstream out(file, std::ios::binary);
  require(out.good(), "cannot write tensor file: " + file.string());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(S) * m.size()));
  require(out.good(), "short write: " + file.string());
}

template <class S>
Mat<S> read_tensor(const std::filesystem::path& file, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(file, std::ios::binary);
  require(in.good(), "cannot read tensor file: " + file.string());
  Mat<S> m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(S) * m.size()));
  require(in.gcount() == static_cast<std::streamsize>(sizeof(S) * m.size()),
          "truncated tensor file: " + file.string());
  return m;
}

}  // namespace ckpt_detail

/// One directory per checkpoint: a manifest listing every tensor (name,
/// shape, dtype) plus the config snapshot, and one raw binary file per
/// parameter and optimizer accumulator. Byte-stable given equal runs.
template <class S>
struct Checkpoint {
  std::uint64_t step = 0;
  Stage stage = Stage::Hybrid;
  ModelParams<S> params;
  std::map<std::string, typename Optimizer<S>::Slot> opt_slots;
  std::string optimizer = "adafactor";
  BatchStream::Cursor cursor;
};

template <class S>
void save_checkpoint(const std::filesystem::path& dir, const TrainConfig& cfg,
                     std::uint64_t vocab_hash, std::uint64_t step, Stage stage,
                     const ModelParams<S>& params, const Optimizer<S>& opt,
                     BatchStream::Cursor cursor) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "params");
  fs::create_directories(dir / "opt");

  nlohmann::json j;
  j["version"] = kVersionTag;
  j["step"] = step;
  j["stage"] = stage_name(stage);
  j["config"] = cfg.canonical_text();
  j["config_hash"] = cfg.config_hash();
  j["vocab_hash"] = vocab_hash;
  j["dtype"] = cfg.dtype;
  j["optimizer"] = optimizer_name(opt.kind());
  j["cursor"] = {{"epoch", cursor.epoch}, {"index", cursor.index}};

  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, m] : params.tensors) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    ckpt_detail::write_tensor(dir / "params" / (name + ".bin"), m);
  }
  j["tensors"] = tensors;

  nlohmann::json slots = nlohmann::json::array();
  for (const auto& [name, slot] : opt.slots()) {
    if (slot.factored) {
      slots.push_back({{"name", name}, {"kind", "factored"}, {"rows", slot.row.size()},
                       {"cols", slot.col.size()}});
      ckpt_detail::write_tensor(dir / "opt" / (name + ".row.bin"), slot.row);
      ckpt_detail::write_tensor(dir / "opt" / (name + ".col.bin"), slot.col);
    } else {
      slots.push_back({{"name", name}, {"kind", "full"}, {"rows", slot.full.rows()},
                       {"cols", slot.full.cols()}});
      ckpt_detail::write_tensor(dir / "opt" / (name + ".full.bin"), slot.full);
    }
  }
  j["opt_slots"] = slots;

  std::ofstream out(dir / "manifest.json", std::ios::binary);
  require(out.good(), "cannot write checkpoint manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

template <class S>
Checkpoint<S> load_checkpoint(const std::filesystem::path& dir, const TrainConfig& cfg) {
  std::ifstream in(dir / "manifest.json");
  require(in.good(), "cannot open checkpoint manifest in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("corrupt checkpoint manifest in " + dir.string() + ": " + e.what());
  }

  require(j.value("config_hash", std::uint64_t(0)) == cfg.config_hash(),
          "checkpoint config hash does not match the supplied config");
  require(j.value("dtype", "") == cfg.dtype, "checkpoint dtype mismatch");

  Checkpoint<S> c;
  c.step = j.at("step").get<std::uint64_t>();
  c.stage = parse_stage(j.at("stage").get<std::string>());
  c.optimizer = j.value("optimizer", "adafactor");
  c.cursor.epoch = j.at("cursor").at("epoch").get<std::uint64_t>();
  c.cursor.index = j.at("cursor").at("index").get<std::uint64_t>();

  for (const auto& t : j.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    c.params.tensors[name] = ckpt_detail::read_tensor<S>(
        dir / "params" / (name + ".bin"), t.at("rows").get<Eigen::Index>(),
        t.at("cols").get<Eigen::Index>());
  }

  for (const auto& t : j.at("opt_slots")) {
    const std::string name = t.at("name").get<std::string>();
    typename Optimizer<S>::Slot slot;
    if (t.at("kind").get<std::string>() == "factored") {
      slot.factored = true;
      slot.row = ckpt_detail::read_tensor<S>(dir / "opt" / (name + ".row.bin"),
                                             t.at("rows").get<Eigen::Index>(), 1);
      slot.col = ckpt_detail::read_tensor<S>(dir / "opt" / (name + ".col.bin"),
                                             t.at("cols").get<Eigen::Index>(), 1);
    } else {
      slot.factored = false;
      slot.full = ckpt_detail::read_tensor<S>(dir / "opt" / (name + ".full.bin"),
                                              t.at("rows").get<Eigen::Index>(),
                                              t.at("cols").get<Eigen::Index>());
    }
    c.opt_slots[name] = slot;
  }
  return c;
}

/// Parameters only (enough for evaluation); no config cross-check.
template <class S>
ModelParams<S> load_checkpoint_params(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  require(in.good(), "cannot open checkpoint manifest in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("corrupt checkpoint manifest in " + dir.string() + ": " + e.what());
  }
  ModelParams<S> params;
  for (const auto& t : j.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    params.tensors[name] = ckpt_detail::read_tensor<S>(
        dir / "params" / (name + ".bin"), t.at("rows").get<Eigen::Index>(),
        t.at("cols").get<Eigen::Index>());
  }
  return params;
}

/// step -> directory, discovered from "step_<N>" names under `checkpoints/`.
std::map<std::uint64_t, std::filesystem::path> list_checkpoints(
    const std::filesystem::path& run_dir);
std::filesystem::path checkpoint_dir_for_step(const std::filesystem::path& run_dir,
                                              std::uint64_t step);

}  // namespace spactor
