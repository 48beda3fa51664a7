#include "spactor/checkpoint.hpp"

namespace spactor {

std::map<std::uint64_t, std::filesystem::path> list_checkpoints(
    const std::filesystem::path& run_dir) {
  std::map<std::uint64_t, std::filesystem::path> out;
  const auto base = run_dir / "checkpoints";
  if (!std::filesystem::is_directory(base)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(base)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("step_", 0) != 0) continue;
    try {
      out[std::stoull(name.substr(5))] = entry.path();
    } catch (const std::exception&) {
      // not a checkpoint directory; ignore
    }
  }
  return out;
}

std::filesystem::path checkpoint_dir_for_step(const std::filesystem::path& run_dir,
                                              std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%08llu", static_cast<unsigned long long>(step));
  return run_dir / "checkpoints" / buf;
}

}  // namespace spactor
