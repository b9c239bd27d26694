// pttag: command-line front end for the publication-type tagging pipeline.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 backend or
// sidecar failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "pttag/corpus.hpp"
#include "pttag/errors.hpp"
#include "pttag/evaluator.hpp"
#include "pttag/partitioner.hpp"
#include "pttag/pipeline.hpp"
#include "pttag/reference_scorer.hpp"
#include "pttag/tag_compiler.hpp"

namespace {

using nlohmann::json;
using namespace pttag;

// Flags shared by the subcommands that build a tagging engine.
struct CommonFlags {
  std::string config_path;
  PipelineConfig config;
  std::string architecture = "monolithic";
  std::string output;
  std::string format = "json";
  CLI::App* app = nullptr;

  bool given(const std::string& name) const {
    const auto* opt = app->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  }
};

void add_engine_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "JSON config file; flags override it");
  app->add_option("--vocab", f.config.vocab_path, "vocabulary JSON file");
  app->add_option("--policy", f.config.policy_path, "tag compiler policy JSON file");
  app->add_option("--symbol-map", f.config.symbol_map_path, "symbol map JSON file");
  app->add_option("--scorer", f.config.scorers,
                  "scorer file, \"stub\" or \"stub:<label>\"; repeat for ensembles");
  app->add_option("--sidecar", f.config.sidecar_address, "tcp:<host>:<port> or stdio:<command>");
  app->add_option("--architecture", f.architecture, "monolithic or ensemble")
      ->check(CLI::IsMember({"monolithic", "ensemble"}));
  app->add_option("--budget", f.config.token_budget, "token budget per input");
  app->add_option("--seed", f.config.seed, "random seed");
  app->add_option("--workers", f.config.workers, "worker threads");
  app->add_option("--batch-size", f.config.batch_size, "citations per scoring batch");
  app->add_option("--stub-cost-us", f.config.stub_cost_us, "per-input cost of stub scorers");
}

// Applies --config, then every flag that was given on the command line.
PipelineConfig resolve_config(const CommonFlags& f) {
  PipelineConfig c;
  if (!f.config_path.empty()) c = PipelineConfig::load_file(f.config_path, false);
  const auto& o = f.config;
  if (f.given("--corpus")) c.corpus_path = o.corpus_path;
  if (f.given("--vocab")) c.vocab_path = o.vocab_path;
  if (f.given("--policy")) c.policy_path = o.policy_path;
  if (f.given("--symbol-map")) c.symbol_map_path = o.symbol_map_path;
  if (f.given("--scorer")) c.scorers = o.scorers;
  if (f.given("--sidecar")) c.sidecar_address = o.sidecar_address;
  if (f.given("--architecture")) {
    c.architecture = f.architecture == "ensemble" ? Architecture::kEnsemble : Architecture::kMonolithic;
  }
  if (f.given("--budget")) c.token_budget = o.token_budget;
  if (f.given("--seed")) c.seed = o.seed;
  if (f.given("--workers")) c.workers = o.workers;
  if (f.given("--batch-size")) c.batch_size = o.batch_size;
  if (f.given("--stub-cost-us")) c.stub_cost_us = o.stub_cost_us;
  c.validate();
  return c;
}

// Writes to the -o file when given, otherwise standard output.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw DataError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

Corpus require_corpus(const PipelineConfig& c) {
  if (c.corpus_path.empty()) throw ConfigError("--corpus is required");
  if (c.corpus_path == "-") return read_corpus(std::cin);
  return read_corpus_file(c.corpus_path);
}

LabelVocabulary require_vocab(const PipelineConfig& c) {
  if (c.vocab_path.empty()) throw ConfigError("--vocab is required");
  return load_vocabulary_file(c.vocab_path);
}

SplitRatios parse_ratios(const std::vector<double>& r) {
  if (r.size() != 3) throw ConfigError("--ratios takes three values");
  SplitRatios s{r[0], r[1], r[2]};
  s.validate();
  return s;
}

std::string file_stem_for(const std::string& label) {
  std::string s;
  for (char c : label) {
    s.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '_');
  }
  return s;
}

std::vector<LabeledInput> labeled_inputs(const Corpus& corpus, const TaggingEngine& shell) {
  std::vector<LabeledInput> out;
  out.reserve(corpus.size());
  for (const auto& c : corpus) {
    const Citation clean = normalize_citation_text(c, shell.symbols);
    out.push_back({assemble_input(clean, *shell.tokenizer, shell.token_budget), c.labels});
  }
  return out;
}

// Normalized text + assembled inputs for scoring, skipping nothing: a record
// that cannot be assembled is a data error here.
std::vector<ModelInput> assemble_all(const Corpus& corpus, const TaggingEngine& e) {
  std::vector<ModelInput> inputs;
  inputs.reserve(corpus.size());
  for (const auto& c : corpus) {
    inputs.push_back(assemble_input(normalize_citation_text(c, e.symbols), *e.tokenizer, e.token_budget));
  }
  return inputs;
}

std::vector<ScoreVector> score_all(const Corpus& corpus, const TaggingEngine& e) {
  const auto inputs = assemble_all(corpus, e);
  std::vector<ScoreVector> scores;
  for (std::size_t begin = 0; begin < inputs.size(); begin += 256) {
    const auto len = std::min<std::size_t>(256, inputs.size() - begin);
    auto part = e.score(std::span(inputs).subspan(begin, len));
    std::move(part.begin(), part.end(), std::back_inserter(scores));
  }
  return scores;
}

void log_record_errors(const std::vector<TagList>& tags) {
  for (const auto& t : tags) {
    if (!t.ok()) std::cerr << "warning: citation " << t.citation_id << ": " << t.error << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Publication-type tagging pipeline"};
  app.require_subcommand(1);

  CommonFlags f;
  std::vector<double> ratios{0.9, 0.05, 0.05};
  double tolerance = -1.0;
  std::string out_dir, partition_path, predictions_path, eval_corpus_path, target = "monolithic";
  std::vector<std::string> labels;
  std::size_t min_size = 0, n_citations = 0, stub_ensemble = 0;
  bool apply_label_norm = false, sort_rows = false;
  TrainingHyper hyper;
  std::string class_weights = "none", objective = "max_f1";
  double min_recall = 0.9;

  auto add_io = [&](CLI::App* sub, bool needs_corpus = true) {
    if (needs_corpus) sub->add_option("--corpus", f.config.corpus_path, "corpus JSONL (\"-\" for stdin)");
    sub->add_option("-o,--output", f.output, "output file (default: standard output)");
  };

  auto* normalize = app.add_subcommand("normalize", "clean citation text and normalize label sets");
  add_io(normalize);
  normalize->add_option("--vocab", f.config.vocab_path, "vocabulary; enables label normalization");
  normalize->add_option("--symbol-map", f.config.symbol_map_path, "symbol map JSON file");

  auto* stats = app.add_subcommand("stats", "per-label counts and tags-per-citation histogram");
  add_io(stats);
  stats->add_option("--vocab", f.config.vocab_path)->required();
  stats->add_flag("--normalize-labels", apply_label_norm, "normalize label sets first");

  auto* correlate = app.add_subcommand("correlate", "phi correlation matrix of labels");
  add_io(correlate);
  correlate->add_option("--vocab", f.config.vocab_path)->required();
  correlate->add_option("--format", f.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  correlate->add_flag("--normalize-labels", apply_label_norm, "normalize label sets first");

  auto* split = app.add_subcommand("split", "stratified train/eval/test partition");
  add_io(split);
  split->add_option("--ratios", ratios, "train eval test ratios")->expected(3);
  split->add_option("--seed", f.config.seed);
  split->add_option("--vocab", f.config.vocab_path, "vocabulary for --tolerance checks");
  split->add_option("--tolerance", tolerance, "report labels whose train share misses by more (points)");
  split->add_option("--out-dir", out_dir, "also write train/eval/test JSONL files here");

  auto* binary = app.add_subcommand("binary-datasets", "balanced one-vs-rest datasets");
  add_io(binary);
  binary->add_option("--vocab", f.config.vocab_path)->required();
  binary->add_option("--label", labels, "labels (default: every vocabulary label)");
  binary->add_option("--partition", partition_path, "build one dataset per split of this partition");
  binary->add_option("--min-size", min_size, "oversample positives up to half this size");
  binary->add_option("--seed", f.config.seed);

  auto* train = app.add_subcommand("train-ref", "train the reference hashed logistic scorer");
  add_io(train);
  train->add_option("--vocab", f.config.vocab_path)->required();
  train->add_option("--eval-corpus", eval_corpus_path, "validation corpus for descriptor metrics");
  train->add_option("--target", target, "monolithic, binary:<label> or ensemble");
  train->add_option("--epochs", hyper.epochs);
  train->add_option("--learning-rate", hyper.learning_rate);
  train->add_option("--hash-dim", hyper.hash_dim);
  train->add_option("--class-weights", class_weights, "none or balanced")
      ->check(CLI::IsMember({"none", "balanced"}));
  train->add_option("--min-size", min_size, "binary datasets: oversample positives up to half this size");
  train->add_option("--seed", f.config.seed);
  train->add_option("--budget", f.config.token_budget);
  train->add_option("--out-dir", out_dir, "ensemble target: directory for one file per label");

  auto* tune = app.add_subcommand("tune-thresholds", "per-label thresholds from an eval split");
  add_engine_flags(tune, f);
  add_io(tune);
  tune->add_option("--objective", objective, "max_f1 or recall_at_least")
      ->check(CLI::IsMember({"max_f1", "recall_at_least"}));
  tune->add_option("--min-recall", min_recall, "recall target for recall_at_least");

  auto* tag = app.add_subcommand("tag", "tag citations");
  add_engine_flags(tag, f);
  add_io(tag);

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold labels");
  add_engine_flags(evaluate, f);
  add_io(evaluate);
  evaluate->add_option("--predictions", predictions_path, "tag output JSONL")->required();
  evaluate->add_option("--format", f.format, "json or text")->check(CLI::IsMember({"json", "text"}));

  auto* sweep = app.add_subcommand("sweep", "max-tags x reliability-threshold grid");
  add_engine_flags(sweep, f);
  add_io(sweep);
  sweep->add_option("--format", f.format, "json or text")->check(CLI::IsMember({"json", "text"}));
  sweep->add_flag("--sort", sort_rows, "order rows by micro-F1");

  auto* benchmark = app.add_subcommand("bench", "time end-to-end tagging");
  add_engine_flags(benchmark, f);
  add_io(benchmark);
  benchmark->add_option("-n,--citations", n_citations, "synthesize this many citations");
  benchmark->add_option("--stub-ensemble", stub_ensemble,
                        "use stub binaries for the k most prevalent labels");
  benchmark->add_option("--format", f.format, "json or text")->check(CLI::IsMember({"json", "text"}));

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
  synth->add_option("-o,--output", f.output);
  synth->add_option("--vocab", f.config.vocab_path)->required();
  synth->add_option("-n,--citations", n_citations)->required();
  synth->add_option("--seed", f.config.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    f.app = app.get_subcommands().front();
    const PipelineConfig config = resolve_config(f);
    Output out(f.output);

    if (*normalize) {
      const Corpus corpus = require_corpus(config);
      const SymbolMap symbols = config.symbol_map_path.empty()
                                    ? SymbolMap::defaults()
                                    : SymbolMap::load_file(config.symbol_map_path);
      Corpus cleaned;
      cleaned.reserve(corpus.size());
      for (const auto& c : corpus) cleaned.push_back(normalize_citation_text(c, symbols));
      if (!config.vocab_path.empty()) cleaned = normalize_corpus(cleaned, require_vocab(config));
      write_corpus(out.stream(), cleaned);
    } else if (*stats) {
      const auto vocab = require_vocab(config);
      Corpus corpus = require_corpus(config);
      if (apply_label_norm) corpus = normalize_corpus(corpus, vocab);
      out.stream() << compute_corpus_stats(corpus, vocab).to_json().dump(2) << '\n';
    } else if (*correlate) {
      const auto vocab = require_vocab(config);
      Corpus corpus = require_corpus(config);
      if (apply_label_norm) corpus = normalize_corpus(corpus, vocab);
      const auto m = compute_label_correlations(corpus, vocab);
      if (f.format == "csv") {
        auto quote = [](const std::string& s) { return "\"" + s + "\""; };
        out.stream() << "label";
        for (const auto& l : m.labels) out.stream() << ',' << quote(l);
        out.stream() << '\n';
        for (std::size_t i = 0; i < m.labels.size(); ++i) {
          out.stream() << quote(m.labels[i]);
          for (double v : m.values[i]) out.stream() << ',' << v;
          out.stream() << '\n';
        }
      } else {
        out.stream() << m.to_json().dump() << '\n';
      }
    } else if (*split) {
      const Corpus corpus = require_corpus(config);
      const Partition part = stratified_split(corpus, parse_ratios(ratios), config.seed);
      out.stream() << part.to_json().dump() << '\n';
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        for (const auto& [name, split_id] : {std::pair{"train", Split::kTrain},
                                             {"eval", Split::kEval}, {"test", Split::kTest}}) {
          std::ofstream file(std::filesystem::path(out_dir) / (std::string(name) + ".jsonl"));
          write_corpus(file, select_citations(corpus, part.ids(split_id)));
        }
      }
      if (tolerance >= 0) {
        const auto report = verify_stratification(part, corpus, require_vocab(config), tolerance);
        for (const auto& d : report) {
          std::cerr << "share deviation: " << d.label << " train " << d.shares[0] << "% (target "
                    << d.train_target << "%, off by " << d.deviation << ")\n";
        }
        if (!report.empty()) return 2;
      }
    } else if (*binary) {
      const auto vocab = require_vocab(config);
      const Corpus corpus = normalize_corpus(require_corpus(config), vocab);
      if (labels.empty()) labels = vocab.labels();
      json result = json::array();
      auto build = [&](const Corpus& subset, const std::string& label, const char* split_name) {
        try {
          json ds = build_binary_dataset(subset, label, config.seed, min_size).to_json();
          if (split_name) ds["split"] = split_name;
          result.push_back(ds);
        } catch (const InsufficientDataError& e) {
          std::cerr << "warning: " << e.what() << '\n';
        }
      };
      if (partition_path.empty()) {
        for (const auto& l : labels) build(corpus, l, nullptr);
      } else {
        std::ifstream in(partition_path);
        if (!in) throw DataError("cannot open partition " + partition_path);
        const Partition part = Partition::from_json(json::parse(in));
        for (const auto& [name, split_id] : {std::pair{"train", Split::kTrain},
                                             {"eval", Split::kEval}, {"test", Split::kTest}}) {
          const Corpus subset = select_citations(corpus, part.ids(split_id));
          for (const auto& l : labels) build(subset, l, name);
        }
      }
      out.stream() << result.dump() << '\n';
    } else if (*train) {
      TaggingEngine shell;
      shell.vocab = require_vocab(config);
      shell.token_budget = config.token_budget;
      const Corpus corpus = normalize_corpus(require_corpus(config), shell.vocab);
      const auto data = labeled_inputs(corpus, shell);
      std::vector<LabeledInput> eval_data;
      if (!eval_corpus_path.empty()) {
        eval_data = labeled_inputs(normalize_corpus(read_corpus_file(eval_corpus_path), shell.vocab), shell);
      }
      std::map<std::string, const LabeledInput*> by_id;
      for (const auto& d : data) by_id[d.input.citation_id] = &d;

      auto weights_for = [&](const std::vector<std::string>& ls, const std::vector<LabeledInput>& ds) {
        std::map<std::string, double> w;
        if (class_weights != "balanced") return w;
        for (const auto& l : ls) {
          const auto pos = std::count_if(ds.begin(), ds.end(), [&](const auto& x) { return x.labels.count(l) > 0; });
          if (pos > 0) w[l] = static_cast<double>(ds.size() - pos) / static_cast<double>(pos);
        }
        return w;
      };
      auto train_binary = [&](const std::string& label) {
        const BinaryDataset ds = build_binary_dataset(corpus, label, config.seed, min_size);
        std::vector<LabeledInput> balanced;
        for (const auto* side : {&ds.positives, &ds.negatives}) {
          for (const auto& id : *side) balanced.push_back(*by_id.at(id));
        }
        TrainingHyper h = hyper;
        h.class_weights = weights_for({label}, balanced);
        return train_reference_scorer(balanced, TrainingTarget::binary(label), h, config.seed, eval_data);
      };

      if (target == "monolithic") {
        if (f.output.empty()) throw ConfigError("train-ref needs -o for the scorer file");
        std::vector<std::string> present;
        for (const auto& l : shell.vocab.labels()) {
          if (std::any_of(data.begin(), data.end(), [&](const auto& x) { return x.labels.count(l) > 0; })) {
            present.push_back(l);
          }
        }
        TrainingHyper h = hyper;
        h.class_weights = weights_for(present, data);
        const auto model = train_reference_scorer(data, TrainingTarget::monolithic(present), h,
                                                  config.seed, eval_data);
        model.save(f.output);
        std::cerr << "final training loss " << model.loss_history().back() << '\n';
      } else if (target.rfind("binary:", 0) == 0) {
        if (f.output.empty()) throw ConfigError("train-ref needs -o for the scorer file");
        const auto model = train_binary(target.substr(7));
        model.save(f.output);
        std::cerr << "final training loss " << model.loss_history().back() << '\n';
      } else if (target == "ensemble") {
        if (out_dir.empty()) throw ConfigError("--target ensemble needs --out-dir");
        std::filesystem::create_directories(out_dir);
        for (const auto& l : shell.vocab.labels()) {
          try {
            const auto model = train_binary(l);
            const auto path = std::filesystem::path(out_dir) / (file_stem_for(l) + ".ptsc");
            model.save(path.string());
            std::cout << path.string() << '\n';
          } catch (const InsufficientDataError& e) {
            std::cerr << "skipping: " << e.what() << '\n';
          }
        }
      } else {
        throw ConfigError("--target must be monolithic, binary:<label> or ensemble");
      }
    } else if (*tune) {
      const TaggingEngine engine = load_engine(config);
      const Corpus gold = normalize_corpus(require_corpus(config), engine.vocab);
      const auto scores = score_all(gold, engine);
      const auto obj = objective == "max_f1" ? TuningObjective::max_f1()
                                             : TuningObjective::recall_at_least(min_recall);
      const ThresholdTuning tuned = tune_thresholds(scores, gold, obj);
      for (const auto& w : tuned.warnings) std::cerr << "warning: " << w << '\n';
      CompilerPolicy policy = engine.policy;
      policy.threshold_mode = ThresholdMode::kPerLabel;
      policy.thresholds = tuned.thresholds;
      out.stream() << policy.to_json().dump(2) << '\n';
    } else if (*tag) {
      const TaggingEngine engine = load_engine(config);
      const Corpus corpus = require_corpus(config);
      const auto tags = run_tagging(engine, corpus, config.workers, config.batch_size);
      log_record_errors(tags);
      write_taglists(out.stream(), tags);
    } else if (*evaluate) {
      const auto vocab = require_vocab(config);
      const Corpus gold = normalize_corpus(require_corpus(config), vocab);
      std::ifstream in(predictions_path);
      if (!in) throw DataError("cannot open predictions " + predictions_path);
      const auto predicted = read_taglists(in);
      const MetricReport report = metric_report(confusion_counts(predicted, gold, vocab));
      json auc = json::object();
      if (!config.scorers.empty() || !config.sidecar_address.empty()) {
        const TaggingEngine engine = load_engine(config);
        const auto scores = score_all(gold, engine);
        for (const auto& l : vocab.labels()) {
          const auto ex = scored_examples(scores, gold, l);
          json entry = json::object();
          try {
            entry["auc_roc"] = auc_roc(ex);
          } catch (const UndefinedMetricError&) {
          }
          try {
            entry["auc_pr"] = auc_pr(ex);
          } catch (const UndefinedMetricError&) {
          }
          if (!entry.empty()) auc[l] = entry;
        }
      }
      if (f.format == "text") {
        out.stream() << report.to_text();
        for (const auto& [l, e] : auc.items()) {
          out.stream() << "AUC " << l << ": " << e.dump() << '\n';
        }
      } else {
        json j = report.to_json();
        if (!auc.empty()) j["auc"] = auc;
        out.stream() << j.dump(2) << '\n';
      }
    } else if (*sweep) {
      const TaggingEngine engine = load_engine(config);
      const Corpus gold = normalize_corpus(require_corpus(config), engine.vocab);
      const auto scores = score_all(gold, engine);
      auto rows = evaluate_run(scores, gold, engine.descriptors(), engine.policy, engine.vocab);
      if (sort_rows) sort_by_micro_f1(rows);
      if (f.format == "text") {
        out.stream() << sweep_to_text(rows);
      } else {
        out.stream() << sweep_to_json(rows).dump(2) << '\n';
      }
    } else if (*benchmark) {
      PipelineConfig c = config;
      if (stub_ensemble > 0) {
        const auto vocab = require_vocab(c);
        if (stub_ensemble > vocab.size()) throw ConfigError("--stub-ensemble exceeds the vocabulary size");
        c.scorers.clear();
        for (std::size_t k = 0; k < stub_ensemble; ++k) c.scorers.push_back("stub:" + vocab.entries()[k].label);
        c.architecture = Architecture::kEnsemble;
      }
      const TaggingEngine engine = load_engine(c);
      Corpus corpus;
      if (n_citations > 0) {
        corpus = make_synthetic_corpus(n_citations, engine.vocab, c.seed);
      } else if (!c.corpus_path.empty()) {
        corpus = require_corpus(c);
      }
      const BenchReport report = bench(engine, corpus, c.batch_size);
      out.stream() << (f.format == "text" ? report.to_text() : report.to_json().dump(2) + "\n");
    } else if (*synth) {
      const auto vocab = require_vocab(config);
      write_corpus(out.stream(), make_synthetic_corpus(n_citations, vocab, config.seed));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
