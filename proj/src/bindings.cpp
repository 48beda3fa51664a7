#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "spactor/evaluation.hpp"
#include "spactor/flops.hpp"
#include "spactor/regression.hpp"
#include "spactor/synthetic.hpp"
#include "spactor/trainer.hpp"

namespace py = pybind11;
using namespace spactor;

namespace {

Vocabulary vocab_from_text(const std::string& text, int max_size, int num_sentinels) {
  std::istringstream in(text);
  return Vocabulary::build(in, max_size, num_sentinels);
}

std::map<std::string, std::string> config_to_dict(const TrainConfig& cfg) {
  std::map<std::string, std::string> out;
  std::istringstream in(cfg.canonical_text());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Span-corruption + replaced-token-detection pre-training core";

  py::register_exception<Error>(m, "SpactorError");

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("build", &vocab_from_text, py::arg("corpus_text"), py::arg("max_size"),
                  py::arg("num_sentinels"))
      .def_static("load", &Vocabulary::load, py::arg("path"))
      .def("save", &Vocabulary::save, py::arg("path"))
      .def("encode", &Vocabulary::encode, py::arg("text"))
      .def("decode",
           [](const Vocabulary& v, const TokenSeq& ids) {
             return v.decode(TokenView(ids.data(), ids.size()));
           },
           py::arg("ids"))
      .def("token", &Vocabulary::token, py::arg("id"))
      .def("is_sentinel", &Vocabulary::is_sentinel, py::arg("id"))
      .def("sentinel_id", &Vocabulary::sentinel_id, py::arg("k"))
      .def_property_readonly("size", &Vocabulary::size)
      .def_property_readonly("num_sentinels", &Vocabulary::num_sentinels)
      .def_property_readonly("pad_id", &Vocabulary::pad_id)
      .def_property_readonly("eos_id", &Vocabulary::eos_id)
      .def_property_readonly("unk_id", &Vocabulary::unk_id)
      .def_property_readonly("mlm_id", &Vocabulary::mlm_id);

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def_static("named", &RngStream::named, py::arg("master"), py::arg("name"))
      .def("fork", &RngStream::fork, py::arg("i"))
      .def("next_u64", &RngStream::next_u64)
      .def("next_double", &RngStream::next_double)
      .def("next_below", &RngStream::next_below, py::arg("n"));

  py::class_<Span>(m, "Span")
      .def_readonly("start", &Span::start)
      .def_readonly("end", &Span::end)
      .def_property_readonly("length", &Span::length);

  py::class_<SpanSet>(m, "SpanSet")
      .def_readonly("spans", &SpanSet::spans)
      .def_property_readonly("count", &SpanSet::count)
      .def_property_readonly("covered_tokens", &SpanSet::covered_tokens);

  py::class_<MlmSet>(m, "MlmSet")
      .def_readonly("positions", &MlmSet::positions)
      .def_property_readonly("count", &MlmSet::count);

  py::class_<CorruptedExample>(m, "CorruptedExample")
      .def_readonly("original", &CorruptedExample::original)
      .def_readonly("sc_text", &CorruptedExample::sc_text)
      .def_readonly("masked_text", &CorruptedExample::masked_text)
      .def_readonly("target", &CorruptedExample::target)
      .def_readonly("span_set", &CorruptedExample::span_set)
      .def_readonly("mlm_set", &CorruptedExample::mlm_set)
      .def_readonly("n", &CorruptedExample::n);

  m.def("plan_spans",
        [](int n_tokens, double r_sc, double mu, RngStream& rng) {
          return plan_spans(n_tokens, r_sc, mu, rng);
        },
        py::arg("n_tokens"), py::arg("r_sc"), py::arg("mu"), py::arg("rng"));
  m.def("corrupt_example",
        [](const TokenSeq& x, double r_sc, double mu, double r_mlm, RngStream& rng,
           const Vocabulary& vocab) {
          return corrupt_example(TokenView(x.data(), x.size()), {r_sc, mu, r_mlm}, rng, vocab);
        },
        py::arg("x"), py::arg("r_sc"), py::arg("mu"), py::arg("r_mlm"), py::arg("rng"),
        py::arg("vocab"));
  m.def("rtd_labels",
        [](const TokenSeq& masked, const TokenSeq& replaced, const TokenSeq& sc) {
          auto v = rtd_labels(TokenView(masked.data(), masked.size()),
                              TokenView(replaced.data(), replaced.size()),
                              TokenView(sc.data(), sc.size()));
          return std::vector<bool>(v.begin(), v.end());
        },
        py::arg("masked_text"), py::arg("replaced_text"), py::arg("sc_text"));

  py::class_<HybridLossBreakdown>(m, "HybridLossBreakdown")
      .def_readonly("l_g", &HybridLossBreakdown::l_g)
      .def_readonly("l_rtd", &HybridLossBreakdown::l_rtd)
      .def_readonly("l_sc", &HybridLossBreakdown::l_sc)
      .def_readonly("total", &HybridLossBreakdown::total)
      .def_readonly("lambda1", &HybridLossBreakdown::lambda1)
      .def_readonly("lambda2", &HybridLossBreakdown::lambda2);

  m.def("hybrid_loss", &hybrid_loss, py::arg("l_g"), py::arg("l_rtd"), py::arg("l_sc"),
        py::arg("lambda1"), py::arg("lambda2"));

  m.def("loss_generator",
        [](const std::vector<Mat<double>>& logits, const std::vector<std::vector<int>>& positions,
           const std::vector<std::vector<int>>& originals, const std::string& reduction) {
          return loss_generator<double>(logits, positions, originals,
                                        parse_reduction(reduction));
        },
        py::arg("gen_logits"), py::arg("mlm_positions"), py::arg("original_tokens"),
        py::arg("reduction") = "mean");
  m.def("loss_rtd",
        [](const std::vector<Vec<double>>& probs,
           const std::vector<std::vector<std::uint8_t>>& labels,
           const std::vector<std::vector<std::uint8_t>>& valid, const std::string& reduction) {
          return loss_rtd<double>(probs, labels, valid, parse_reduction(reduction));
        },
        py::arg("probs"), py::arg("labels"), py::arg("valid"), py::arg("reduction") = "mean");
  m.def("loss_sc",
        [](const std::vector<Mat<double>>& logits, const std::vector<std::vector<int>>& targets,
           const std::vector<std::vector<std::uint8_t>>& valid, const std::string& reduction) {
          return loss_sc<double>(logits, targets, valid, parse_reduction(reduction));
        },
        py::arg("dec_logits"), py::arg("targets"), py::arg("valid"),
        py::arg("reduction") = "mean");

  m.def("lr_schedule", &lr_schedule, py::arg("step"), py::arg("kappa"));

  py::class_<RegressionResult>(m, "RegressionResult")
      .def_readonly("beta0", &RegressionResult::beta0)
      .def_readonly("beta1", &RegressionResult::beta1)
      .def_readonly("stderr_beta0", &RegressionResult::stderr_beta0)
      .def_readonly("t_stat", &RegressionResult::t_stat)
      .def_readonly("p_value", &RegressionResult::p_value)
      .def_readonly("n_points", &RegressionResult::n_points);

  m.def("ols_trend_test",
        [](const std::vector<double>& x, const std::vector<double>& y) {
          return ols_trend_test(std::span<const double>(x), std::span<const double>(y));
        },
        py::arg("x"), py::arg("y"));
  m.def("student_t_two_sided_p", &student_t_two_sided_p, py::arg("t"), py::arg("dof"));

  py::class_<FlopsReport>(m, "FlopsReport")
      .def_readonly("baseline_gflops_per_step", &FlopsReport::baseline_gflops_per_step)
      .def_readonly("hybrid_gflops_per_step", &FlopsReport::hybrid_gflops_per_step)
      .def_readonly("ratio", &FlopsReport::ratio)
      .def_readonly("normalized_cumulative", &FlopsReport::normalized_cumulative);

  m.def("flops_report",
        [](const std::string& config_path, std::uint64_t tau, std::uint64_t steps,
           std::uint64_t reference_steps) {
          TrainConfig cfg = TrainConfig::parse_file(config_path);
          return flops_report(cfg.model_config(cfg.max_vocab), cfg.input_len, cfg.r_sc, cfg.mu,
                              cfg.batch_size, tau, steps, reference_steps);
        },
        py::arg("config_path"), py::arg("tau"), py::arg("steps"),
        py::arg("reference_steps") = 500000);
  m.def("normalized_cumulative_flops", &normalized_cumulative_flops, py::arg("tau"),
        py::arg("total_steps"), py::arg("ratio"), py::arg("reference_steps") = 500000);

  m.def("synthetic_corpus", &synthetic_corpus, py::arg("n_bytes"), py::arg("seed"),
        py::arg("n_types") = 2200);

  m.def("parse_config",
        [](const std::string& path) { return config_to_dict(TrainConfig::parse_file(path)); },
        py::arg("path"));

  m.def("run_pretrain",
        [](const std::string& config_path, const std::string& out_dir,
           const std::optional<std::string>& resume_dir) {
          TrainConfig cfg = TrainConfig::parse_file(config_path);
          std::optional<std::filesystem::path> resume;
          if (resume_dir) resume = *resume_dir;
          RunResult res = run_pretrain(cfg, out_dir, resume);
          py::dict out;
          out["run_dir"] = res.run_dir.string();
          out["final_step"] = res.final_step;
          return out;
        },
        py::arg("config_path"), py::arg("out_dir"), py::arg("resume_dir") = py::none());

  m.def("eval_sc_loss",
        [](const std::string& run_dir, std::uint64_t step, const std::string& mode,
           std::uint64_t seed, const std::optional<std::string>& val_corpus, int threads) {
          const std::filesystem::path run(run_dir);
          TrainConfig cfg = load_run_config(run);
          Vocabulary vocab = Vocabulary::load(run / "vocab.txt");
          std::filesystem::path corpus =
              val_corpus ? std::filesystem::path(*val_corpus)
                         : std::filesystem::path(cfg.val_corpus.empty() ? cfg.corpus
                                                                        : cfg.val_corpus);
          EvalOptions opts;
          opts.mode = parse_context_mode(mode);
          opts.seed = seed;
          opts.threads = threads;
          return eval_sc_loss(checkpoint_dir_for_step(run, step), cfg, vocab, corpus, opts);
        },
        py::arg("run_dir"), py::arg("step"), py::arg("mode") = "clean", py::arg("seed") = 0,
        py::arg("val_corpus") = py::none(), py::arg("threads") = 1);
}
