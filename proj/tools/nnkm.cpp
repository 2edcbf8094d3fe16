// nnkm: command-line front end for NNK-Means.
//
//   nnkm synth         write a labeled synthetic train/test pair
//   nnkm fit           train one dictionary or one per class
//   nnkm code          sparse-code samples against a single dictionary
//   nnkm classify      minimum-reconstruction-error classification
//   nnkm bench         accuracy/time sweep over atom counts vs the k=1 trainer
//   nnkm export-atoms  input-space atom surrogates, one per row
//
// Exit codes: 0 ok, 2 usage, 3 data, 4 numerical.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nnkm/nnkm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string kernel = "gaussian:sigma=1";
  bool quiet = false;
  bool json = false;
};

void note(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

std::string provenance(const std::string& command, const json& config) {
  return std::string("nnkm ") + kVersion + " " + command + "\nconfig: " + config.dump();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw nnkm::data_error("cannot create directory '" + dir.string() + "'");
}

nnkm::DeadAtomPolicy parse_policy(const std::string& s) {
  if (s == "reseed_worst") return nnkm::DeadAtomPolicy::reseed_worst;
  if (s == "drop") return nnkm::DeadAtomPolicy::drop;
  throw nnkm::usage_error("unknown dead-atom policy '" + s + "' (reseed_worst | drop)");
}

nnkm::InitMethod parse_init(const std::string& s) {
  if (s == "uniform") return nnkm::InitMethod::uniform;
  if (s == "kmeans++") return nnkm::InitMethod::kmeans_plus_plus;
  throw nnkm::usage_error("unknown init '" + s + "' (uniform | kmeans++)");
}

json fit_config_json(const nnkm::FitConfig& c, const nnkm::KernelSpec& kernel) {
  return {{"kernel", kernel.to_string()},
          {"atoms", c.atoms_M},
          {"sparsity", c.sparsity_k},
          {"iters", c.max_iters},
          {"tol", c.rel_obj_tol},
          {"seed", c.seed},
          {"dead_atoms", c.dead_atom_policy == nnkm::DeadAtomPolicy::drop ? "drop" : "reseed_worst"},
          {"init", c.init == nnkm::InitMethod::uniform ? "uniform" : "kmeans++"},
          {"threads", c.threads}};
}

json report_json(const nnkm::FitReport& r) {
  json events = json::array();
  for (const auto& e : r.dead_atom_events) events.push_back({{"iteration", e.iteration}, {"atom", e.atom}});
  json timing = json::array();
  for (const auto& t : r.wall_time_per_phase) timing.push_back({{"coding_s", t.coding_s}, {"update_s", t.update_s}});
  return {{"objective_per_iter", r.objective_per_iter},
          {"dead_atom_events", events},
          {"wall_time_per_phase", timing},
          {"guard_rejections", r.guard_rejections},
          {"converged", r.converged}};
}

// Data through the model's stored standardization, if any.
nnkm::FeatureMatrix prepare(const nnkm::FeatureMatrix& data, const nnkm::ModelFile& model) {
  if (model.standardization) return model.standardization->apply(data);
  return data;
}

std::vector<int> load_labels(const fs::path& path) {
  nnkm::CsvOptions options = nnkm::sniff_csv(path);
  if (options.label_column) {
    // a lone label column would leave no features; read it as plain values
    const nnkm::FeatureMatrix f = nnkm::load_csv(path, options.has_header, std::nullopt);
    if (f.dims() == 1) options.label_column.reset();
    else return *nnkm::load_csv(path, options).labels;
  }
  nnkm::FeatureMatrix f = nnkm::load_csv(path, options);
  if (f.dims() != 1) throw nnkm::data_error("labels file must have one column or a 'label' column");
  std::vector<int> out;
  for (Eigen::Index i = 0; i < f.samples(); ++i) {
    const double v = f.data(0, i);
    if (v != static_cast<double>(static_cast<int>(v)) || v < 0) {
      throw nnkm::data_error("labels file: row " + std::to_string(i) + " is not a non-negative integer");
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  nnkm::SynthSpec spec;
  std::string out;
};

int run_synth(const Globals& g, SynthArgs a) {
  a.spec.seed = g.seed;
  const auto split = nnkm::make_synthetic(a.spec);
  const json cfg = {{"classes", a.spec.classes}, {"train", a.spec.n_train},   {"test", a.spec.n_test},
                    {"noise", a.spec.noise_sigma}, {"spacing", a.spec.arc_spacing}, {"seed", a.spec.seed}};
  ensure_dir(a.out);
  const fs::path train = fs::path(a.out) / "train.csv";
  const fs::path test = fs::path(a.out) / "test.csv";
  nnkm::write_csv(train, split.train, provenance("synth", cfg));
  nnkm::write_csv(test, split.test, provenance("synth", cfg));
  if (g.json) {
    std::cout << json{{"config", cfg}, {"train", train.string()}, {"test", test.string()}}.dump(2) << '\n';
  } else {
    std::cout << "wrote " << train.string() << " (" << split.train.samples() << " samples) and "
              << test.string() << " (" << split.test.samples() << " samples)\n";
  }
  return 0;
}

struct FitArgs {
  std::string data;
  std::string model;
  nnkm::FitConfig config;
  bool per_class = false;
  bool standardize = false;
  std::string dead_atoms = "reseed_worst";
  std::string init = "uniform";
};

int run_fit(const Globals& g, FitArgs a) {
  const nnkm::KernelSpec kernel = nnkm::KernelSpec::parse(g.kernel);
  a.config.seed = g.seed;
  a.config.threads = g.threads;
  a.config.dead_atom_policy = parse_policy(a.dead_atoms);
  a.config.init = parse_init(a.init);

  nnkm::FeatureMatrix data = nnkm::load_features(a.data);
  nnkm::ModelFile file;
  if (a.standardize) {
    auto s = nnkm::standardize(data);
    data = std::move(s.data);
    file.standardization = s.params;
  }
  json cfg = fit_config_json(a.config, kernel);
  cfg["data"] = a.data;
  cfg["per_class"] = a.per_class;
  cfg["standardize"] = a.standardize;
  file.config = cfg;
  file.per_class = a.per_class;

  json out = {{"config", cfg}, {"model", a.model}};
  if (a.per_class) {
    std::vector<nnkm::FitReport> reports;
    file.model = nnkm::fit_per_class(data, kernel, a.config, &reports);
    json classes = json::array();
    for (std::size_t c = 0; c < reports.size(); ++c) {
      classes.push_back({{"class", file.model.class_ids[c]}, {"report", report_json(reports[c])}});
      if (!g.json) {
        for (std::size_t t = 0; t < reports[c].objective_per_iter.size(); ++t) {
          std::printf("class %d iter %zu objective %.10g\n", file.model.class_ids[c], t + 1,
                      reports[c].objective_per_iter[t]);
        }
      }
    }
    out["classes"] = classes;
  } else {
    data.labels.reset();
    const auto progress = [&](const nnkm::IterationState& s) {
      if (!g.json) std::printf("iter %d objective %.10g dead %zu\n", s.iteration, s.objective, s.dead_atoms);
    };
    nnkm::FitResult result = nnkm::fit(data, kernel, a.config, progress);
    out["report"] = report_json(result.report);
    file.model = nnkm::ClassifierModel{{std::move(result.dictionary)}, {0}};
  }
  nnkm::save_model(file, a.model);
  if (g.json) {
    std::cout << out.dump(2) << '\n';
  } else {
    note(g, "model written to " + a.model);
  }
  return 0;
}

struct CodeArgs {
  std::string model;
  std::string data;
  std::string out;
  bool dense = false;
  int sparsity = 0;
  int cls = 0;
};

int run_code(const Globals& g, const CodeArgs& a) {
  const nnkm::ModelFile file = nnkm::load_model(a.model);
  if (a.cls < 0 || a.cls >= static_cast<int>(file.model.classes())) {
    throw nnkm::usage_error("--class " + std::to_string(a.cls) + " out of range");
  }
  const nnkm::Dictionary& dict = file.model.dictionaries[static_cast<std::size_t>(a.cls)];
  const nnkm::FeatureMatrix data = prepare(nnkm::load_features(a.data), file);
  nnkm::CodingConfig coding = nnkm::coding_for(file.model);
  if (a.sparsity > 0) coding.sparsity_k = a.sparsity;
  const nnkm::CodeBatch batch = nnkm::code_batch(data, dict, coding, g.threads);
  batch.throw_if_failed();
  const json cfg = {{"model", a.model}, {"data", a.data}, {"sparsity", coding.sparsity_k},
                    {"class", a.cls},   {"dense", a.dense}, {"threads", g.threads}};
  if (a.dense) {
    nnkm::write_codes_dense_csv(a.out, batch.codes, dict.atoms(), provenance("code", cfg));
  } else {
    nnkm::write_codes_csv(a.out, batch.codes, provenance("code", cfg));
  }
  double total = 0.0;
  for (const double e : batch.errors) total += e;
  if (g.json) {
    std::cout << json{{"config", cfg}, {"samples", batch.codes.size()}, {"total_error", total}}.dump(2) << '\n';
  } else {
    std::printf("coded %zu samples, total reconstruction error %.10g\n", batch.codes.size(), total);
  }
  return 0;
}

struct ClassifyArgs {
  std::string model;
  std::string data;
  std::string labels;
  std::string out;
  int sparsity = 0;
};

int run_classify(const Globals& g, const ClassifyArgs& a) {
  const nnkm::ModelFile file = nnkm::load_model(a.model);
  const nnkm::FeatureMatrix data = prepare(nnkm::load_features(a.data), file);
  nnkm::CodingConfig coding = nnkm::coding_for(file.model);
  if (a.sparsity > 0) coding.sparsity_k = a.sparsity;
  const nnkm::Classification result = nnkm::classify(data, file.model, coding, g.threads);
  const json cfg = {{"model", a.model}, {"data", a.data}, {"sparsity", coding.sparsity_k}, {"threads", g.threads},
                    {"class_ids", file.model.class_ids}};
  nnkm::write_predictions_csv(a.out, result, provenance("classify", cfg));

  std::optional<std::vector<int>> truth;
  if (!a.labels.empty()) {
    truth = load_labels(a.labels);
  } else if (data.labels) {
    truth = *data.labels;
  }
  json out = {{"config", cfg}, {"predictions", a.out}};
  if (truth) {
    const double acc = nnkm::accuracy(result.labels, *truth);
    out["accuracy"] = acc;
    if (!g.json) std::printf("accuracy %.6f\n", acc);
  }
  if (g.json) std::cout << out.dump(2) << '\n';
  return 0;
}

struct BenchArgs {
  std::string data;
  std::string test;
  double test_fraction = 0.25;
  std::vector<int> atoms_grid{10};
  int sparsity = 30;
  int iters = 10;
  int repeats = 10;
  std::string out;
  bool standardize = false;
  bool no_baseline = false;
  std::vector<long> scaling_sizes;
};

int run_bench(const Globals& g, const BenchArgs& a) {
  const nnkm::KernelSpec kernel = nnkm::KernelSpec::parse(g.kernel);
  nnkm::FeatureMatrix train;
  nnkm::FeatureMatrix test;
  if (a.test.empty()) {
    auto split = nnkm::split_train_test(nnkm::load_features(a.data), a.test_fraction, g.seed);
    train = std::move(split.train);
    test = std::move(split.test);
  } else {
    train = nnkm::load_features(a.data);
    test = nnkm::load_features(a.test);
  }
  if (!train.labels || !test.labels) throw nnkm::data_error("bench needs labeled data");
  if (a.standardize) {
    auto s = nnkm::standardize(train);
    train = std::move(s.data);
    test = s.params.apply(test);
  }

  nnkm::BenchConfig bc;
  bc.atoms_grid = a.atoms_grid;
  bc.sparsity_k = a.sparsity;
  bc.max_iters = a.iters;
  bc.repeats = a.repeats;
  bc.seed = g.seed;
  bc.threads = g.threads;
  bc.baseline = !a.no_baseline;
  bc.validate();

  const json cfg = {{"data", a.data},          {"test", a.test},       {"test_fraction", a.test_fraction},
                    {"kernel", kernel.to_string()}, {"atoms_grid", a.atoms_grid}, {"sparsity", a.sparsity},
                    {"iters", a.iters},        {"repeats", a.repeats}, {"seed", g.seed},
                    {"threads", g.threads},    {"standardize", a.standardize}, {"baseline", bc.baseline},
                    {"repeat_seed", "seed + repeat"}};

  std::vector<nnkm::BenchRow> rows;
  for (const int atoms : bc.atoms_grid) {
    nnkm::BenchConfig one = bc;
    one.atoms_grid = {atoms};
    const auto part = nnkm::run_bench(train, test, kernel, one);
    for (const auto& r : part) {
      note(g, r.method + " atoms " + std::to_string(r.atoms) + " repeat " + std::to_string(r.repeat) +
                  " accuracy " + std::to_string(r.accuracy));
    }
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto summary = nnkm::summarize(rows);

  ensure_dir(a.out);
  const fs::path csv_path = fs::path(a.out) / "bench.csv";
  {
    std::ofstream os(csv_path);
    if (!os) throw nnkm::data_error("cannot open '" + csv_path.string() + "' for writing");
    nnkm::detail::write_comment(os, provenance("bench", cfg));
    os << "method,atoms,repeat,seed,accuracy,train_s,test_s,coding_s,update_s\n";
    for (const auto& r : rows) {
      os << r.method << ',' << r.atoms << ',' << r.repeat << ',' << r.seed << ','
         << nnkm::detail::format_double(r.accuracy) << ',' << nnkm::detail::format_double(r.train_s) << ','
         << nnkm::detail::format_double(r.test_s) << ',' << nnkm::detail::format_double(r.coding_s) << ','
         << nnkm::detail::format_double(r.update_s) << '\n';
    }
  }

  json sj = json::array();
  for (const auto& s : summary) {
    json entry = {{"method", s.method},
                  {"atoms", s.atoms},
                  {"runs", s.runs},
                  {"accuracy_mean", s.accuracy_mean},
                  {"accuracy_std", s.accuracy_std},
                  {"train_s_mean", s.train_s_mean},
                  {"train_s_std", s.train_s_std},
                  {"test_s_mean", s.test_s_mean},
                  {"test_s_std", s.test_s_std}};
    if (s.method == "nnk" && bc.baseline) entry["repeats_nnk_ge_kmeans"] = nnkm::nnk_wins(rows, s.atoms);
    sj.push_back(entry);
  }
  json result = {{"config", cfg}, {"summary", sj}};

  if (!a.scaling_sizes.empty()) {
    // One unlabeled dictionary on the training split, then coding time on
    // the training columns repeated cyclically up to each size.
    nnkm::FitConfig fc;
    fc.atoms_M = bc.atoms_grid.front();
    fc.sparsity_k = bc.sparsity_k;
    fc.max_iters = bc.max_iters;
    fc.seed = g.seed;
    fc.threads = g.threads;
    nnkm::FeatureMatrix unlabeled = train;
    unlabeled.labels.reset();
    const nnkm::Dictionary dict = nnkm::fit(unlabeled, kernel, fc).dictionary;
    long largest = 0;
    for (const long n : a.scaling_sizes) largest = std::max(largest, n);
    nnkm::Matrix queries(train.dims(), largest);
    for (long i = 0; i < largest; ++i) queries.col(i) = train.data.col(i % train.samples());
    std::vector<Eigen::Index> sizes(a.scaling_sizes.begin(), a.scaling_sizes.end());
    const auto points = nnkm::coding_scaling(queries, dict, fc.coding(), sizes, 3, g.threads);
    std::vector<double> xs, ys;
    json sc = json::array();
    for (const auto& p : points) {
      xs.push_back(static_cast<double>(p.samples));
      ys.push_back(p.seconds);
      sc.push_back({{"samples", p.samples}, {"seconds", p.seconds}});
    }
    result["scaling"] = {{"points", sc}, {"loglog_slope", points.size() > 1 ? nnkm::loglog_slope(xs, ys) : 0.0}};
  }

  const fs::path json_path = fs::path(a.out) / "summary.json";
  {
    std::ofstream os(json_path);
    if (!os) throw nnkm::data_error("cannot open '" + json_path.string() + "' for writing");
    os << result.dump(2) << '\n';
  }
  if (g.json) {
    std::cout << result.dump(2) << '\n';
  } else {
    for (const auto& s : summary) {
      std::printf("%-6s atoms %4d accuracy %.4f +- %.4f train %.3fs test %.3fs\n", s.method.c_str(), s.atoms,
                  s.accuracy_mean, s.accuracy_std, s.train_s_mean, s.test_s_mean);
    }
    note(g, "wrote " + csv_path.string() + " and " + json_path.string());
  }
  return 0;
}

struct ExportArgs {
  std::string model;
  std::string out;
  int cls = 0;
};

int run_export(const Globals& g, const ExportArgs& a) {
  const nnkm::ModelFile file = nnkm::load_model(a.model);
  if (a.cls < 0 || a.cls >= static_cast<int>(file.model.classes())) {
    throw nnkm::usage_error("--class " + std::to_string(a.cls) + " out of range");
  }
  nnkm::FeatureMatrix atoms;
  atoms.data = nnkm::export_atoms(file.model.dictionaries[static_cast<std::size_t>(a.cls)]);
  const json cfg = {{"model", a.model}, {"class", a.cls}, {"kernel", file.model.kernel().to_string()}};
  nnkm::write_csv(a.out, atoms, provenance("export-atoms", cfg));
  if (g.json) {
    std::cout << json{{"config", cfg}, {"atoms", atoms.samples()}, {"dims", atoms.dims()}}.dump(2) << '\n';
  } else {
    note(g, "wrote " + std::to_string(atoms.samples()) + " atoms to " + a.out);
  }
  return 0;
}

int exit_code(nnkm::ErrorKind kind) {
  switch (kind) {
    case nnkm::ErrorKind::usage: return 2;
    case nnkm::ErrorKind::data: return 3;
    case nnkm::ErrorKind::numerical: return 4;
  }
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NNK-Means kernel dictionary learning"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for coding")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--kernel", g.kernel, "gaussian:sigma=<x> | cosine | linear")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "No progress on stderr");
  app.add_flag("--json", g.json, "Machine-readable summary on stdout");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write train.csv/test.csv of interleaved noisy arcs");
  s->add_option("--classes", synth.spec.classes)->capture_default_str();
  s->add_option("--train", synth.spec.n_train)->capture_default_str();
  s->add_option("--test", synth.spec.n_test)->capture_default_str();
  s->add_option("--noise", synth.spec.noise_sigma)->capture_default_str();
  s->add_option("--spacing", synth.spec.arc_spacing, "Radial gap between class arcs")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Train a dictionary (or one per class) and write a model file");
  f->add_option("--data", fit.data, "CSV or .nnkm matrix, one sample per row")->required();
  f->add_option("--atoms", fit.config.atoms_M)->capture_default_str();
  f->add_option("--sparsity", fit.config.sparsity_k)->capture_default_str();
  f->add_option("--iters", fit.config.max_iters)->capture_default_str();
  f->add_option("--tol", fit.config.rel_obj_tol, "Relative objective decrease to stop")->capture_default_str();
  f->add_flag("--per-class", fit.per_class, "One dictionary per label");
  f->add_flag("--standardize", fit.standardize, "Standardize features, stored in the model");
  f->add_option("--dead-atoms", fit.dead_atoms, "reseed_worst | drop")->capture_default_str();
  f->add_option("--init", fit.init, "uniform | kmeans++")->capture_default_str();
  f->add_option("--model", fit.model, "Output model file")->required();

  CodeArgs code;
  auto* c = app.add_subcommand("code", "Sparse-code samples against a dictionary");
  c->add_option("--model", code.model)->required();
  c->add_option("--data", code.data)->required();
  c->add_option("--out", code.out, "Codes CSV")->required();
  c->add_flag("--dense", code.dense, "Dense W instead of (sample, atom, weight) triples");
  c->add_option("--sparsity", code.sparsity, "Override the trained sparsity");
  c->add_option("--class", code.cls, "Dictionary index in a per-class model")->capture_default_str();

  ClassifyArgs cls;
  auto* k = app.add_subcommand("classify", "Assign each sample to the class with the lowest error");
  k->add_option("--model", cls.model)->required();
  k->add_option("--data", cls.data)->required();
  k->add_option("--labels", cls.labels, "Ground-truth labels CSV; defaults to the data's label column");
  k->add_option("--out", cls.out, "Predictions CSV")->required();
  k->add_option("--sparsity", cls.sparsity, "Override the trained sparsity");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Accuracy and timing over a grid of atom counts");
  b->add_option("--data", bench.data, "Labeled training data (or the full set without --test)")->required();
  b->add_option("--test", bench.test, "Labeled test data; otherwise a stratified split of --data");
  b->add_option("--test-fraction", bench.test_fraction)->capture_default_str();
  b->add_option("--atoms-grid", bench.atoms_grid, "Comma-separated atom counts")->delimiter(',')->capture_default_str();
  b->add_option("--sparsity", bench.sparsity)->capture_default_str();
  b->add_option("--iters", bench.iters)->capture_default_str();
  b->add_option("--repeats", bench.repeats)->capture_default_str();
  b->add_flag("--standardize", bench.standardize);
  b->add_flag("--no-baseline", bench.no_baseline, "Skip the k=1 trainer");
  b->add_option("--scaling-sizes", bench.scaling_sizes, "Also time coding at these sample counts")->delimiter(',');
  b->add_option("--out", bench.out, "Output directory")->required();

  ExportArgs exp;
  auto* e = app.add_subcommand("export-atoms", "Write support * A, one atom per row");
  e->add_option("--model", exp.model)->required();
  e->add_option("--out", exp.out)->required();
  e->add_option("--class", exp.cls, "Dictionary index in a per-class model")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) return run_synth(g, synth);
    if (f->parsed()) return run_fit(g, fit);
    if (c->parsed()) return run_code(g, code);
    if (k->parsed()) return run_classify(g, cls);
    if (b->parsed()) return run_bench(g, bench);
    if (e->parsed()) return run_export(g, exp);
  } catch (const nnkm::Error& err) {
    std::cerr << "nnkm: " << err.what() << '\n';
    return exit_code(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "nnkm: " << err.what() << '\n';
    return 4;
  }
  return 2;
}
