#include "satp/cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "satp/error.hpp"
#include "satp/data/dataset.hpp"
#include "satp/pipeline/checkpoint.hpp"
#include "satp/pipeline/config.hpp"
#include "satp/pipeline/pipeline.hpp"

namespace satp {

namespace fs = std::filesystem;

std::string metrics_filename(const std::string& method) { return "metrics_" + method + ".json"; }

std::string cutoff_filename(const std::string& method, const std::string& metric) {
  return "cutoff_" + method + "_" + metric + ".csv";
}

std::string checkpoint_filename(const std::string& stage, std::size_t member) {
  if (stage == kStageEnsemble) return "ensemble_" + std::to_string(member) + ".ckpt";
  return stage + ".ckpt";
}

namespace {

const std::vector<std::string> kCommands{"gen-data",      "train-predictor", "train-selfaware", "train-baseline",
                                         "evaluate",      "ablate",          "report",          "print-config"};
const std::vector<std::string> kBaselines{"mu", "mc_dropout", "ensemble", "ae"};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::vector<std::string> methods;
  bool timing = false;
  bool quiet = false;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw DataError("write to '" + path.string() + "' failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// SATP_THREADS must be a positive integer when set. Training runs on one
// thread, so any valid value caps the worker count at 1.
void check_threads_env() {
  const char* v = std::getenv("SATP_THREADS");
  if (!v || !*v) return;
  const std::string s(v);
  unsigned long n = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc() || p != s.data() + s.size() || n == 0) {
    throw UsageError("SATP_THREADS must be a positive integer, got '" + s + "'");
  }
}

TrainConfig effective_config(const Options& o) {
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_config(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.generator.seed = *o.seed;
  }
  if (!o.out.empty()) cfg.out = o.out;
  if (!o.data.empty()) cfg.data.csv = o.data;
  if (o.timing) cfg.eval.measure_timing = true;
  cfg.sync();
  cfg.validate();
  return cfg;
}

fs::path out_dir(const TrainConfig& cfg) {
  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + cfg.out + "': " + ec.message());
  return dir;
}

Checkpoint need_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing checkpoint '" + path.string() + "'");
  return load_checkpoint(path.string());
}

std::vector<std::string> expand_methods(const std::vector<std::string>& given,
                                        const std::vector<std::string>& allowed,
                                        const std::vector<std::string>& fallback) {
  if (given.empty()) return fallback;
  std::vector<std::string> out;
  for (const auto& m : given) {
    if (m == "all") return allowed;
    if (std::find(allowed.begin(), allowed.end(), m) == allowed.end()) {
      throw UsageError("unknown method '" + m + "'");
    }
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

void save(const fs::path& dir, const Checkpoint& c, std::size_t member, const Logger& log) {
  const fs::path p = dir / checkpoint_filename(c.stage, member);
  save_checkpoint(p.string(), c);
  if (log) log("wrote " + p.string());
}

int gen_data(const TrainConfig& cfg, std::ostream& out) {
  const fs::path dir = out_dir(cfg);
  const fs::path p = dir / "data.csv";
  save_csv(p, load_records(cfg));
  out << p.string() << "\n";
  return kExitOk;
}

int train_predictor(const TrainConfig& cfg, const Logger& log) {
  const fs::path dir = out_dir(cfg);
  const Corpus corpus = prepare_corpus(cfg);
  save(dir, train_stage1(cfg, corpus, log).checkpoint, 0, log);
  return kExitOk;
}

int train_selfaware(const TrainConfig& cfg, const Logger& log) {
  const fs::path dir = out_dir(cfg);
  const Checkpoint p = need_checkpoint(dir / checkpoint_filename(kStagePredictor));
  const Corpus corpus = prepare_corpus(cfg);
  save(dir, train_stage2(cfg, corpus, p, log).checkpoint, 0, log);
  return kExitOk;
}

int train_baseline(const TrainConfig& cfg, const std::vector<std::string>& methods, const Logger& log) {
  const fs::path dir = out_dir(cfg);
  const auto picked = expand_methods(methods, kBaselines, kBaselines);
  std::optional<Checkpoint> predictor;
  if (std::find(picked.begin(), picked.end(), "ae") != picked.end()) {
    predictor = need_checkpoint(dir / checkpoint_filename(kStagePredictor));
  }
  const Corpus corpus = prepare_corpus(cfg);
  for (const auto& m : picked) {
    if (m == "mu") {
      save(dir, train_mu(cfg, corpus, log).checkpoint, 0, log);
    } else if (m == "mc_dropout") {
      save(dir, train_dropout(cfg, corpus, log).checkpoint, 0, log);
    } else if (m == "ensemble") {
      for (std::size_t k = 0; k < cfg.ensemble_members; ++k) {
        save(dir, train_ensemble_member(cfg, corpus, k, log).checkpoint, k, log);
      }
    } else {
      save(dir, train_ae(cfg, corpus, *predictor, log).checkpoint, 0, log);
    }
  }
  return kExitOk;
}

ModelBundle load_bundle(const fs::path& dir, const std::string& method, const TrainConfig& cfg) {
  ModelBundle b;
  auto file = [&](const char* stage, std::size_t member = 0) {
    return need_checkpoint(dir / checkpoint_filename(stage, member));
  };
  if (method == "ours") {
    b.predictor = file(kStagePredictor);
    b.selfaware = file(kStageSelfaware);
  } else if (method == "mu") {
    b.mu = file(kStageMu);
  } else if (method == "mc_dropout") {
    b.dropout = file(kStageDropout);
  } else if (method == "ensemble") {
    for (std::size_t k = 0; k < cfg.ensemble_members; ++k) b.ensemble.push_back(file(kStageEnsemble, k));
  } else {
    b.predictor = file(kStagePredictor);
    b.ae = file(kStageAe);
  }
  return b;
}

int evaluate(const TrainConfig& cfg, const std::vector<std::string>& methods, std::ostream& out,
             const Logger& log) {
  const fs::path dir = out_dir(cfg);
  const auto picked = expand_methods(methods, kMethods, {"ours"});
  // Checkpoints are checked before the corpus is built so a missing file fails fast.
  std::vector<ModelBundle> bundles;
  for (const auto& m : picked) bundles.push_back(load_bundle(dir, m, cfg));
  const Corpus corpus = prepare_corpus(cfg);
  for (std::size_t k = 0; k < picked.size(); ++k) {
    const std::string& m = picked[k];
    if (log) log("scoring " + m);
    const EvalReport r = evaluate_method(m, corpus, bundles[k], cfg);
    write_text(dir / metrics_filename(m), report_json(r));
    write_text(dir / cutoff_filename(m, "ade"), curve_csv(r.curve_ade));
    write_text(dir / cutoff_filename(m, "fde"), curve_csv(r.curve_fde));
    out << (dir / metrics_filename(m)).string() << "\n";
  }
  return kExitOk;
}

int ablate(const TrainConfig& cfg, std::ostream& out, const Logger& log) {
  const fs::path dir = out_dir(cfg);
  const Checkpoint p = need_checkpoint(dir / checkpoint_filename(kStagePredictor));
  const Corpus corpus = prepare_corpus(cfg);
  const AblationReport a = run_ablations(cfg, corpus, p, log);
  write_text(dir / "ablation.json", ablation_json(a));
  out << (dir / "ablation.json").string() << "\n";
  return kExitOk;
}

int report(const TrainConfig& cfg, std::ostream& out) {
  const fs::path dir(cfg.out);
  if (!fs::is_directory(dir)) throw DataError("output directory '" + cfg.out + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("metrics_", 0) == 0 && e.path().extension() == ".json") {
      files.push_back(e.path());
    }
  }
  if (files.empty()) throw DataError("no metrics_*.json files in '" + cfg.out + "'");
  // known methods first in their canonical order, anything else by name
  auto rank = [](const fs::path& p) {
    const std::string name = p.stem().string().substr(8);
    const auto it = std::find(kMethods.begin(), kMethods.end(), name);
    return std::make_pair(static_cast<std::size_t>(it - kMethods.begin()), name);
  };
  std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) { return rank(a) < rank(b); });
  std::vector<std::string> texts;
  for (const auto& f : files) texts.push_back(read_text(f));
  const std::string table = comparison_table(read_reports(texts));
  write_text(dir / "report.md", table);
  out << table;
  return kExitOk;
}

int run(const std::string& cmd, const Options& o, std::ostream& out, std::ostream& err) {
  check_threads_env();
  const TrainConfig cfg = effective_config(o);
  Logger log;
  if (!o.quiet) log = [&err, &cmd](const std::string& m) { err << cmd << ": " << m << "\n" << std::flush; };
  if (cmd == "print-config") {
    out << to_toml(cfg);
    return kExitOk;
  }
  if (cmd == "gen-data") return gen_data(cfg, out);
  if (cmd == "train-predictor") return train_predictor(cfg, log);
  if (cmd == "train-selfaware") return train_selfaware(cfg, log);
  if (cmd == "train-baseline") return train_baseline(cfg, o.methods, log);
  if (cmd == "evaluate") return evaluate(cfg, o.methods, out, log);
  if (cmd == "ablate") return ablate(cfg, out, log);
  return report(cfg, out);
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-aware trajectory prediction: training, baselines and evaluation", "satp"};
  app.require_subcommand(1);
  Options o;
  for (const auto& name : kCommands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", o.config, "TOML configuration file");
    sub->add_option("--seed", o.seed, "master seed; also seeds the synthetic generator");
    sub->add_option("--out", o.out, "artifact directory");
    if (name != "print-config" && name != "report") {
      sub->add_option("--data", o.data, "trajectory CSV used instead of the synthetic corpus");
      sub->add_flag("--quiet", o.quiet, "suppress progress messages");
    }
    if (name == "train-baseline") {
      sub->add_option("--method", o.methods, "mu, mc_dropout, ensemble, ae or all (default all)");
    }
    if (name == "evaluate") {
      sub->add_option("--method", o.methods, "ours, mu, mc_dropout, ensemble, ae or all (default ours)");
      sub->add_flag("--timing", o.timing, "measure ms per frame");
    }
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  std::string cmd = "satp";
  try {
    app.parse(rev);
    cmd = app.get_subcommands().front()->get_name();
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "satp: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    return run(cmd, o, out, err);
  } catch (const UsageError& e) {
    err << "satp " << cmd << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "satp " << cmd << ": " << e.what() << "\n";
    return kExitDivergence;
  } catch (const NumericError& e) {
    err << "satp " << cmd << ": " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "satp " << cmd << ": " << e.what() << "\n";
    return kExitData;
  }
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace satp
