/*
 * Copyright 2026 The rctgan Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end: fit, sample and eval over the C API.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rctgan/rctgan.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

enum class Verbosity { kError, kInfo, kDebug };

Verbosity verbosity() {
  const char* env = std::getenv("RCTGAN_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") return Verbosity::kError;
  if (level == "debug") return Verbosity::kDebug;
  return Verbosity::kInfo;
}

void info(const std::string& message) {
  if (verbosity() != Verbosity::kError) std::cerr << message << "\n";
}

// Raised once a failure has been reported; carries the exit code.
struct Exit {
  int code;
};

int exit_code_for(rctgan_status status) {
  switch (status) {
    case RCTGAN_NON_FINITE_LOSS:
    case RCTGAN_IO_ERROR:
    case RCTGAN_WIDTH_MISMATCH:
    case RCTGAN_MISSING_ANCESTOR_ROW:
    case RCTGAN_DIMENSION_MISMATCH:
    case RCTGAN_GRAPH_NOT_RECORDED:
    case RCTGAN_UNSUPPORTED_LAYER:
    case RCTGAN_INTERNAL_ERROR:
      return kExitRuntime;
    default:
      return kExitInput;
  }
}

void check(rctgan_status status) {
  if (status == RCTGAN_OK) return;
  std::cerr << "error: " << rctgan_last_error() << " (" << rctgan_status_name(status) << ")\n";
  throw Exit{exit_code_for(status)};
}

[[noreturn]] void input_error(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  throw Exit{kExitInput};
}

std::string take(char* text) {
  std::string out(text ? text : "");
  rctgan_string_free(text);
  return out;
}

struct SchemaDeleter {
  void operator()(rctgan_schema* p) const { rctgan_schema_free(p); }
};
struct DatabaseDeleter {
  void operator()(rctgan_database* p) const { rctgan_database_free(p); }
};
struct ModelDeleter {
  void operator()(rctgan_model* p) const { rctgan_model_free(p); }
};
using Schema = std::unique_ptr<rctgan_schema, SchemaDeleter>;
using Database = std::unique_ptr<rctgan_database, DatabaseDeleter>;
using Model = std::unique_ptr<rctgan_model, ModelDeleter>;

Schema load_schema(const std::string& path) {
  rctgan_schema* raw = nullptr;
  check(rctgan_schema_from_file(path.c_str(), &raw));
  return Schema(raw);
}

Database load_checked(const rctgan_schema* schema, const std::string& dir) {
  rctgan_database* raw = nullptr;
  check(rctgan_database_load(schema, dir.c_str(), &raw));
  Database db(raw);
  char* report = nullptr;
  check(rctgan_database_check_integrity(db.get(), &report));
  const auto violations = nlohmann::json::parse(take(report));
  if (!violations.empty()) {
    const auto& v = violations.front();
    input_error(dir + ": " + std::to_string(violations.size()) +
                " referential-integrity violation(s); first: table '" +
                v.at("table").get<std::string>() + "', column '" +
                v.at("column").get<std::string>() + "', row " +
                std::to_string(v.at("row").get<std::size_t>() + 1) + ", value '" +
                v.at("value").get<std::string>() + "'");
  }
  return db;
}

struct FitArgs {
  std::string metadata, data, out, config;
  std::uint64_t seed = 0;
  int depth = 0;
  int threads = 1;
};

struct SampleArgs {
  std::string model, out;
  double scale = 1.0;
  std::uint64_t seed = 0;
};

struct EvalArgs {
  std::string metadata, real, synth, report;
  int folds = 3;
  std::uint64_t seed = 0;
};

int run_fit(FitArgs args, const CLI::App& cmd) {
  nlohmann::json config = nlohmann::json::object();
  if (!args.config.empty()) {
    std::ifstream in(args.config);
    if (!in) input_error("cannot open config file '" + args.config + "'");
    try {
      in >> config;
    } catch (const nlohmann::json::exception& e) {
      input_error("config file '" + args.config + "' is not valid JSON: " + e.what());
    }
    if (!config.is_object()) input_error("config file '" + args.config + "' must hold an object");
  }
  // Run-level keys are consumed here; the rest belongs to training.
  if (config.contains("seed")) {
    if (!config["seed"].is_number_unsigned()) input_error("config 'seed' must be a non-negative integer");
    if (cmd.count("--seed") == 0) args.seed = config["seed"].get<std::uint64_t>();
    config.erase("seed");
  }
  if (config.contains("folds")) {
    if (!config["folds"].is_number_integer() || config["folds"].get<int>() < 2) {
      input_error("config 'folds' must be an integer of at least 2");
    }
    config.erase("folds");
  }
  if (cmd.count("--depth")) config["max_depth"] = args.depth;

  const Schema schema = load_schema(args.metadata);
  const Database data = load_checked(schema.get(), args.data);

  const std::string log_path = args.out + ".log";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) input_error("cannot write training log '" + log_path + "'");
  struct LogSink {
    std::ofstream* file;
    bool echo;
  } sink{&log, verbosity() == Verbosity::kDebug};
  auto on_epoch = [](const char* line, void* user) {
    auto* s = static_cast<LogSink*>(user);
    *s->file << line << "\n";
    if (s->echo) std::cerr << line << "\n";
  };

  info("fitting " + args.data + " (seed " + std::to_string(args.seed) + ")");
  rctgan_model* raw = nullptr;
  check(rctgan_model_fit(data.get(), config.dump().c_str(), args.seed, args.threads, on_epoch,
                         &sink, &raw));
  const Model model(raw);
  check(rctgan_model_save(model.get(), args.out.c_str()));
  info("model written to " + args.out + ", training log " + log_path);
  return kExitOk;
}

int run_sample(const SampleArgs& args) {
  rctgan_model* raw = nullptr;
  check(rctgan_model_load(args.model.c_str(), &raw));
  const Model model(raw);
  rctgan_database* synth = nullptr;
  check(rctgan_model_sample(model.get(), args.scale, args.seed, &synth));
  const Database db(synth);
  check(rctgan_database_write(db.get(), args.out.c_str()));
  info("synthetic database written to " + args.out);
  return kExitOk;
}

int run_eval(const EvalArgs& args) {
  const Schema schema = load_schema(args.metadata);
  const Database real = load_checked(schema.get(), args.real);
  const Database synth = load_checked(schema.get(), args.synth);
  char* json = nullptr;
  char* text = nullptr;
  check(rctgan_evaluate(real.get(), synth.get(), args.folds, args.seed, &json, &text));
  const std::string report = take(json);
  std::cout << take(text);
  std::ofstream out(args.report, std::ios::binary | std::ios::trunc);
  if (!out) input_error("cannot write report '" + args.report + "'");
  out << report;
  if (!out) {
    std::cerr << "error: failed writing report '" << args.report << "'\n";
    throw Exit{kExitRuntime};
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relational database synthesizer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rctgan_version()));

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Train one conditional GAN per table");
  fit_cmd->add_option("--metadata", fit.metadata, "Schema JSON")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--data", fit.data, "Directory of <table>.csv files")->required();
  fit_cmd->add_option("--out", fit.out, "Model file to write")->required();
  fit_cmd->add_option("--config", fit.config, "Training config JSON");
  fit_cmd->add_option("--seed", fit.seed, "Training seed");
  fit_cmd->add_option("--depth", fit.depth, "Ancestor depth: 1 parents, 2 also grandparents")
      ->check(CLI::IsMember({1, 2}));
  fit_cmd->add_option("--threads", fit.threads, "Maximum worker threads")->check(CLI::PositiveNumber);

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "Generate a synthetic database");
  sample_cmd->add_option("--model", sample.model, "Model file")->required();
  sample_cmd->add_option("--out", sample.out, "Output directory")->required();
  sample_cmd->add_option("--scale", sample.scale, "Root-table size multiplier")
      ->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", sample.seed, "Sampling seed");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score synthetic data with logistic detection");
  eval_cmd->add_option("--metadata", eval.metadata, "Schema JSON")->required();
  eval_cmd->add_option("--real", eval.real, "Real data directory")->required();
  eval_cmd->add_option("--synth", eval.synth, "Synthetic data directory")->required();
  eval_cmd->add_option("--report", eval.report, "Report JSON to write")->required();
  eval_cmd->add_option("--folds", eval.folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
  eval_cmd->add_option("--seed", eval.seed, "Evaluation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit, *fit_cmd);
    if (sample_cmd->parsed()) return run_sample(sample);
    return run_eval(eval);
  } catch (const Exit& e) {
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
