#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "memonet/checkpoint.hpp"
#include "memonet/kif.hpp"

namespace memonet::cli {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void refuse_overwrite(std::initializer_list<fs::path> outputs, bool force) {
  if (force) return;
  for (const auto& p : outputs) {
    if (fs::exists(p)) throw Error(p.string() + " already exists; pass --force to overwrite");
  }
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (!text.empty()) {
    auto comma = text.find(',');
    auto item = trim(text.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::uint64_t parse_u64(std::string_view flag, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw Error(std::string(flag) + ": not an unsigned integer: '" + std::string(text) + "'");
  }
  return v;
}

// Options shared by gen, train and sweep.
struct CommonFlags {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::vector<std::string> sets;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--config", config, "key=value config file");
    cmd.add_option("--data", data, "data directory");
    cmd.add_option("--out", out, "output directory");
    cmd.add_option("--seed", seed, "overrides the config seed");
    cmd.add_flag("--force", force, "overwrite existing outputs");
    cmd.add_option("--set", sets, "extra key=value setting (repeatable)");
  }

  RunConfig resolve() const {
    RunConfig rc = config.empty() ? RunConfig{} : RunConfig::load(config);
    for (const auto& s : sets) rc.apply(s, "--set");
    if (!data.empty()) rc.data = data;
    if (!out.empty()) rc.out = out;
    if (seed) {
      rc.train.seed = *seed;
      rc.generator.seed = *seed;
    }
    return rc;
  }
};

const fs::path& require(const std::optional<fs::path>& p, const char* what) {
  if (!p) throw Error(std::string("missing ") + what + " (flag or config key)");
  return *p;
}

void log_epoch(std::ostream& log, const EpochMetrics& m) {
  log << "epoch " << m.epoch << " train_logloss=" << fmt(m.train_logloss) << " valid_logloss=" << fmt(m.valid_logloss)
      << " valid_auc=" << fmt(m.valid_auc) << " seconds=" << fmt(m.seconds) << '\n';
}

int cmd_gen(const CommonFlags& flags, std::ostream& out) {
  const RunConfig rc = flags.resolve();
  const fs::path& dir = require(rc.out, "output directory");
  rc.generator.validate();
  refuse_overwrite({dir / "schema.txt", dir / "train.csv", dir / "valid.csv", dir / "test.csv", dir / "oracle.csv"},
                   flags.force);
  const SyntheticData data = generate(rc.generator);
  write_dataset(data, dir);
  write_file(dir / "generator.resolved.txt", rc.generator.to_text());
  nlohmann::ordered_json j;
  j["out"] = dir.string();
  j["train"] = data.train.size();
  j["valid"] = data.valid.size();
  j["test"] = data.test.size();
  j["bayes_auc_test"] = bayes_auc(data.test);
  out << j.dump() << '\n';
  return 0;
}

int cmd_train(const CommonFlags& flags, std::ostream& out, std::ostream& err) {
  const RunConfig rc = flags.resolve();
  rc.train.validate();
  const fs::path& data_dir = require(rc.data, "data directory");
  const fs::path& out_dir = require(rc.out, "output directory");
  refuse_overwrite({out_dir / "checkpoint.bin", out_dir / "history.jsonl"}, flags.force);
  const LoadedData data = load_data_dir(data_dir);
  const TrainOutcome outcome = train_run(rc.train, data, out_dir, flags.force, err);
  nlohmann::ordered_json j;
  j["out"] = out_dir.string();
  j["best_epoch"] = outcome.fit.best_epoch;
  j["best_valid_auc"] = outcome.fit.best_valid_auc;
  if (outcome.test) j["test"] = nlohmann::ordered_json::parse(outcome.test->to_json());
  out << j.dump() << '\n';
  return 0;
}

fs::path split_path(const fs::path& data, const std::string& split) {
  return fs::is_directory(data) ? data / (split + ".csv") : data;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& split, std::size_t threads,
             const std::string& out_path, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset ds = ingest_with_vocabulary(split_path(data, split), ck.schema, ck.vocabulary);
  const EvalResult result = evaluate(ck.model, encode(ds, ck.config), threads);
  const std::string json = result.to_json();
  if (!out_path.empty()) write_file(out_path, json + "\n");
  out << json << '\n';
  return 0;
}

int cmd_kif(const std::string& checkpoint, const std::string& data, const std::string& split, const std::string& method,
            std::size_t top_k, const std::string& out_path, std::ostream& out) {
  const KifMethod m = parse_kif_method(method);
  std::optional<FieldScoreReport> report;
  std::optional<Checkpoint> ck;
  if (!checkpoint.empty()) ck = load_checkpoint(checkpoint);
  if (m == KifMethod::kFar) {
    if (!ck) throw Error("kif: method far needs a trained MemoNet --checkpoint");
    if (data.empty()) throw Error("kif: method far needs --data");
    const Dataset ds = ingest_with_vocabulary(split_path(data, split), ck->schema, ck->vocabulary);
    report = far_scores(ck->model, encode(ds, ck->config), ck->schema);
  } else if (ck) {
    report = fnr_scores(ck->vocabulary, ck->schema);
  } else {
    if (data.empty() || !fs::is_directory(data)) throw Error("kif: method fnr needs --checkpoint or a --data directory");
    const Schema schema = Schema::load(fs::path(data) / "schema.txt");
    const IngestResult ing = ingest(fs::path(data) / "train.csv", schema);
    report = fnr_scores(ing.vocabulary, schema);
  }
  auto j = nlohmann::ordered_json::parse(report->to_json());
  j["top_k"] = top_k;
  j["selected"] = select_kif(*report, top_k);
  const std::string json = j.dump(2);
  if (!out_path.empty()) write_file(out_path, json + "\n");
  out << json << '\n';
  return 0;
}

struct SweepJob {
  std::string value;
  std::uint64_t seed = 0;
  TrainConfig config;
  fs::path dir;
  std::optional<TrainOutcome> outcome;
  std::string log;
};

int cmd_sweep(const CommonFlags& flags, const std::string& key, const std::string& values, const std::string& seeds,
              std::size_t parallel, std::ostream& out, std::ostream& err) {
  const RunConfig rc = flags.resolve();
  if (!TrainConfig::is_key(key)) throw Error("sweep: unknown config key '" + key + "'");
  const auto value_list = split_list(values);
  if (value_list.empty()) throw Error("sweep: --values is empty");
  std::vector<std::uint64_t> seed_list;
  for (const auto& s : split_list(seeds)) seed_list.push_back(parse_u64("--seeds", s));
  if (seed_list.empty()) seed_list.push_back(rc.train.seed);
  const fs::path& data_dir = require(rc.data, "data directory");
  const fs::path& out_dir = require(rc.out, "output directory");
  refuse_overwrite({out_dir / "summary.csv"}, flags.force);

  std::vector<SweepJob> jobs;
  for (const auto& v : value_list) {
    for (auto s : seed_list) {
      SweepJob job;
      job.value = v;
      job.seed = s;
      job.config = rc.train;
      job.config.set(key, v);
      job.config.seed = s;
      job.config.validate();
      job.dir = out_dir / (key + "-" + v) / ("seed-" + std::to_string(s));
      refuse_overwrite({job.dir / "checkpoint.bin"}, flags.force);
      jobs.push_back(std::move(job));
    }
  }

  const LoadedData data = load_data_dir(data_dir);
  if (!data.test) throw Error("sweep: " + (data_dir / "test.csv").string() + " is required");
  write_file(out_dir / "sweep.resolved.txt", rc.train.to_text() + "sweep_key=" + key + "\nsweep_values=" + values +
                                                 "\nsweep_seeds=" + seeds + "\n");

  std::mutex log_mutex;
  auto run_job = [&](SweepJob& job, bool buffered) {
    std::ostringstream buf;
    std::ostream& log = buffered ? static_cast<std::ostream&>(buf) : err;
    log << "run " << key << "=" << job.value << " seed=" << job.seed << '\n';
    job.outcome = train_run(job.config, data, job.dir, flags.force, log);
    if (buffered) {
      std::lock_guard lock(log_mutex);
      err << buf.str();
    }
  };
  parallel = std::clamp<std::size_t>(parallel, 1, jobs.size());
  if (parallel == 1) {
    for (auto& job : jobs) run_job(job, false);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(parallel);
    for (std::size_t w = 0; w < parallel; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < jobs.size(); i += parallel) run_job(jobs[i], true);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::string csv = key + ",seed,test_auc,test_logloss,best_valid_auc\n";
  for (const auto& job : jobs) {
    csv += job.value + "," + std::to_string(job.seed) + "," + fmt(job.outcome->test->auc) + "," +
           fmt(job.outcome->test->logloss) + "," + fmt(job.outcome->fit.best_valid_auc) + "\n";
  }
  write_file(out_dir / "summary.csv", csv);
  out << csv;
  return 0;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "data") {
    data = fs::path(std::string(value));
  } else if (key == "out") {
    out = fs::path(std::string(value));
  } else if (key == "seed") {
    train.set(key, value);
    generator.set(key, value);
  } else if (TrainConfig::is_key(key)) {
    train.set(key, value);
  } else if (GeneratorSpec::is_key(key)) {
    generator.set(key, value);
  } else {
    throw Error("unknown config key '" + std::string(key) + "'");
  }
}

void RunConfig::apply(std::string_view text, const std::string& source) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::string where = source + " line " + std::to_string(line_no) + ": ";
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(where + "expected key=value, got '" + std::string(line) + "'");
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  }
}

RunConfig RunConfig::load(const fs::path& path) {
  RunConfig rc;
  rc.apply(read_file(path), path.string());
  return rc;
}

LoadedData load_data_dir(const fs::path& dir) {
  LoadedData d;
  d.schema = Schema::load(dir / "schema.txt");
  IngestResult ing = ingest(dir / "train.csv", d.schema);
  d.train = std::move(ing.dataset);
  d.vocabulary = std::move(ing.vocabulary);
  d.valid = ingest_with_vocabulary(dir / "valid.csv", d.schema, d.vocabulary);
  if (fs::exists(dir / "test.csv")) d.test = ingest_with_vocabulary(dir / "test.csv", d.schema, d.vocabulary);
  return d;
}

TrainOutcome train_run(const TrainConfig& config, const LoadedData& data, const fs::path& out_dir, bool force,
                       std::ostream& log) {
  config.validate();
  refuse_overwrite({out_dir / "checkpoint.bin", out_dir / "history.jsonl"}, force);
  fs::create_directories(out_dir);
  write_file(out_dir / "config.resolved.txt", config.to_text());

  const EncodedDataset train = encode(data.train, config);
  const EncodedDataset valid = encode(data.valid, config);
  std::ofstream history(out_dir / "history.jsonl", std::ios::binary | std::ios::trunc);
  if (!history) throw Error("cannot write " + (out_dir / "history.jsonl").string());

  TrainOutcome outcome;
  outcome.fit = fit(config, data.schema.num_fields(), data.vocabulary.size(), train, valid, [&](const EpochMetrics& m) {
    history << m.to_json() << '\n' << std::flush;
    log_epoch(log, m);
  });
  save_checkpoint(out_dir / "checkpoint.bin", outcome.fit.best, data.schema, data.vocabulary,
                  {{"best_epoch", std::to_string(outcome.fit.best_epoch)},
                   {"best_valid_auc", fmt(outcome.fit.best_valid_auc)},
                   {"seed", std::to_string(config.seed)}});
  if (data.test) {
    outcome.test = evaluate(outcome.fit.best, encode(*data.test, config));
    write_file(out_dir / "test_metrics.json", outcome.test->to_json() + "\n");
  }
  return outcome;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"memonet: CTR models with a multi-hash codebook"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, sweep_flags;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset from a spec");
  gen_flags.add_to(*gen);

  auto* train = app.add_subcommand("train", "train a model on a data directory");
  train_flags.add_to(*train);

  std::string checkpoint, data, split = "test", out_path, method = "far";
  std::size_t threads = 1, top_k = 1;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a CSV split");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data, "CSV file or data directory")->required();
  eval->add_option("--split", split, "split name when --data is a directory");
  eval->add_option("--threads", threads, "scoring threads");
  eval->add_option("--out", out_path, "also write the JSON result here");

  auto* kif = app.add_subcommand("kif", "rank fields by FNR or FAR");
  std::string kif_split = "valid";
  kif->add_option("--checkpoint", checkpoint, "trained checkpoint (required for far)");
  kif->add_option("--data", data, "data directory or CSV file");
  kif->add_option("--split", kif_split, "split name when --data is a directory");
  kif->add_option("--method", method, "fnr or far");
  kif->add_option("--top-k", top_k, "number of key fields to select");
  kif->add_option("--out", out_path, "also write the JSON report here");

  auto* sweep = app.add_subcommand("sweep", "train once per value of one config key");
  sweep_flags.add_to(*sweep);
  std::string sweep_key, sweep_values, sweep_seeds;
  std::size_t parallel = 1;
  sweep->add_option("--key", sweep_key, "config key to sweep")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds (default: config seed)");
  sweep->add_option("--parallel", parallel, "concurrent runs (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*gen) return cmd_gen(gen_flags, out);
    if (*train) return cmd_train(train_flags, out, err);
    if (*eval) return cmd_eval(checkpoint, data, split, threads, out_path, out);
    if (*kif) return cmd_kif(checkpoint, data, kif_split, method, top_k, out_path, out);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_key, sweep_values, sweep_seeds, parallel, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace memonet::cli
