#include "spactor/config.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "spactor/optimizer.hpp"
#include "spactor/rng.hpp"

namespace spactor {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& value, long long lo, long long hi) {
  try {
    size_t pos = 0;
    long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing chars");
    if (v < lo || v > hi)
      throw Error("config key '" + key + "' must be in [" + std::to_string(lo) + ", " +
                  std::to_string(hi) + "], got " + value);
    return static_cast<int>(v);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "' expects an integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing chars");
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw Error("config key '" + key + "' expects a nonnegative integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing chars");
    return v;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "' expects a number, got '" + value + "'");
  }
}

std::string resolve_path(const std::filesystem::path& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty()) return p;
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return p;
  return (base_dir / fp).lexically_normal().string();
}

}  // namespace

TrainConfig TrainConfig::parse_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  require(in.good(), "cannot open config file: " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), file.parent_path());
}

TrainConfig TrainConfig::parse_text(const std::string& text,
                                    const std::filesystem::path& base_dir) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    require(eq != std::string::npos,
            "config line " + std::to_string(lineno) + " is not key=value: '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));

    if (key == "d") cfg.d = parse_int(key, value, 2, 1 << 16);
    else if (key == "disc_layers") cfg.disc_layers = parse_int(key, value, 1, 256);
    else if (key == "disc_heads") cfg.disc_heads = parse_int(key, value, 1, 256);
    else if (key == "disc_mlp") cfg.disc_mlp = parse_int(key, value, 1, 1 << 20);
    else if (key == "gen_layers") cfg.gen_layers = parse_int(key, value, 1, 256);
    else if (key == "gen_mlp") cfg.gen_mlp = parse_int(key, value, 1, 1 << 20);
    else if (key == "rtd_mlp") cfg.rtd_mlp = parse_int(key, value, 1, 1 << 20);
    else if (key == "max_len") cfg.max_len = parse_int(key, value, 0, 1 << 20);
    else if (key == "dtype") cfg.dtype = value;
    else if (key == "corpus") cfg.corpus = resolve_path(base_dir, value);
    else if (key == "val_corpus") cfg.val_corpus = resolve_path(base_dir, value);
    else if (key == "vocab") cfg.vocab = resolve_path(base_dir, value);
    else if (key == "max_vocab") cfg.max_vocab = parse_int(key, value, 16, 1 << 24);
    else if (key == "input_len") cfg.input_len = parse_int(key, value, 8, 1 << 20);
    else if (key == "batch_size") cfg.batch_size = parse_int(key, value, 1, 1 << 20);
    else if (key == "r_sc") cfg.r_sc = parse_double(key, value);
    else if (key == "mu") cfg.mu = parse_double(key, value);
    else if (key == "r_mlm") cfg.r_mlm = parse_double(key, value);
    else if (key == "lambda1") cfg.lambda1 = parse_double(key, value);
    else if (key == "lambda2") cfg.lambda2 = parse_double(key, value);
    else if (key == "loss_reduction") cfg.loss_reduction = value;
    else if (key == "tau") cfg.tau = (value == "inf") ? kTauInfinity : parse_u64(key, value);
    else if (key == "total_steps") cfg.total_steps = parse_u64(key, value);
    else if (key == "kappa") cfg.kappa = parse_u64(key, value);
    else if (key == "optimizer") cfg.optimizer = value;
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "checkpoint_every") cfg.checkpoint_every = parse_u64(key, value);
    else if (key == "prefetch_batches") cfg.prefetch_batches = parse_int(key, value, 0, 1024);
    else if (key == "eval_threads") cfg.eval_threads = parse_int(key, value, 1, 256);
    else throw Error("unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

void TrainConfig::validate() const {
  auto range = [](bool ok, const std::string& key, const std::string& allowed) {
    if (!ok) throw Error("config key '" + key + "' out of range; allowed: " + allowed);
  };
  range(r_sc > 0.0 && r_sc < 1.0, "r_sc", "(0, 1)");
  range(mu >= 1.0, "mu", ">= 1");
  range(r_mlm >= 0.0 && r_mlm < 1.0, "r_mlm", "[0, 1)");
  range(lambda1 >= 0.0, "lambda1", ">= 0");
  range(lambda2 >= 0.0, "lambda2", ">= 0");
  range(kappa >= 1, "kappa", ">= 1");
  range(tau == kTauInfinity || tau <= total_steps, "tau", "<= total_steps or 'inf'");
  range(input_len >= 8, "input_len", ">= 8");
  range(batch_size >= 1, "batch_size", ">= 1");
  range(total_steps >= 1, "total_steps", ">= 1");
  parse_reduction(loss_reduction);
  parse_optimizer(optimizer);
  // model-shape checks (vocab size filled in later; use a placeholder)
  ModelConfig mc = model_config(std::max(max_vocab, 8));
  mc.validate();
}

ModelConfig TrainConfig::model_config(int vocab_size) const {
  ModelConfig mc;
  mc.d = d;
  mc.v = vocab_size;
  mc.disc_layers = disc_layers;
  mc.disc_heads = disc_heads;
  mc.disc_mlp = disc_mlp;
  mc.gen_layers = gen_layers;
  mc.gen_mlp = gen_mlp;
  mc.rtd_mlp = rtd_mlp;
  mc.max_len = effective_max_len();
  mc.dtype = dtype;
  return mc;
}

CorruptionConfig TrainConfig::corruption_config() const { return {r_sc, mu, r_mlm}; }

int TrainConfig::num_sentinels() const {
  return static_cast<int>(std::ceil(input_len * r_sc)) + 1;
}

std::string TrainConfig::canonical_text() const {
  std::map<std::string, std::string> kv;
  auto num = [](double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
  };
  kv["d"] = std::to_string(d);
  kv["disc_layers"] = std::to_string(disc_layers);
  kv["disc_heads"] = std::to_string(disc_heads);
  kv["disc_mlp"] = std::to_string(disc_mlp);
  kv["gen_layers"] = std::to_string(gen_layers);
  kv["gen_mlp"] = std::to_string(gen_mlp);
  kv["rtd_mlp"] = std::to_string(rtd_mlp);
  kv["max_len"] = std::to_string(max_len);
  kv["dtype"] = dtype;
  kv["corpus"] = corpus;
  kv["val_corpus"] = val_corpus;
  kv["vocab"] = vocab;
  kv["max_vocab"] = std::to_string(max_vocab);
  kv["input_len"] = std::to_string(input_len);
  kv["batch_size"] = std::to_string(batch_size);
  kv["r_sc"] = num(r_sc);
  kv["mu"] = num(mu);
  kv["r_mlm"] = num(r_mlm);
  kv["lambda1"] = num(lambda1);
  kv["lambda2"] = num(lambda2);
  kv["loss_reduction"] = loss_reduction;
  kv["tau"] = tau == kTauInfinity ? "inf" : std::to_string(tau);
  kv["total_steps"] = std::to_string(total_steps);
  kv["kappa"] = std::to_string(kappa);
  kv["optimizer"] = optimizer;
  kv["seed"] = std::to_string(seed);
  kv["checkpoint_every"] = std::to_string(checkpoint_every);
  kv["prefetch_batches"] = std::to_string(prefetch_batches);
  kv["eval_threads"] = std::to_string(eval_threads);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t TrainConfig::config_hash() const { return fnv1a64(canonical_text()); }

// ----------------------------------------------------------- run manifest

namespace {

nlohmann::json load_manifest(const std::filesystem::path& run_dir) {
  std::ifstream in(run_dir / "manifest.json");
  require(in.good(), "cannot open run manifest in " + run_dir.string());
  nlohmann::json j;
  in >> j;
  return j;
}

void store_manifest(const std::filesystem::path& run_dir, const nlohmann::json& j) {
  std::ofstream out(run_dir / "manifest.json", std::ios::binary);
  require(out.good(), "cannot write run manifest in " + run_dir.string());
  out << j.dump(2) << '\n';
}

std::string now_iso8601() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
  return buf;
}

std::uint64_t file_hash(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
  return h;
}

}  // namespace

void RunManifest::write_initial(const std::filesystem::path& run_dir, const TrainConfig& cfg,
                                std::uint64_t vocab_hash) {
  nlohmann::json j;
  j["version"] = kVersionTag;
  j["created"] = now_iso8601();
  j["config"] = cfg.canonical_text();
  j["config_hash"] = cfg.config_hash();
  j["seed"] = cfg.seed;
  j["vocab_hash"] = vocab_hash;
  j["optimizer_state_at_transition"] = "retained for discriminator and embedder";
  store_manifest(run_dir, j);
}

void RunManifest::record_transition(const std::filesystem::path& run_dir, std::uint64_t step) {
  nlohmann::json j = load_manifest(run_dir);
  j["transition"] = {{"step", step}, {"time", now_iso8601()}};
  store_manifest(run_dir, j);
}

void RunManifest::record_completion(const std::filesystem::path& run_dir) {
  nlohmann::json j = load_manifest(run_dir);
  nlohmann::json files = nlohmann::json::object();
  for (auto it = std::filesystem::recursive_directory_iterator(run_dir);
       it != std::filesystem::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const auto rel = std::filesystem::relative(it->path(), run_dir).generic_string();
    if (rel == "manifest.json") continue;
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(file_hash(it->path())));
    files[rel] = hex;
  }
  j["files"] = files;
  j["completed"] = now_iso8601();
  store_manifest(run_dir, j);
}

}  // namespace spactor
