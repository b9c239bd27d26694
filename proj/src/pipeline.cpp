#include "pttag/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "pttag/errors.hpp"
#include "pttag/hash.hpp"
#include "pttag/reference_scorer.hpp"
#include "pttag/remote_scorer.hpp"
#include "pttag/rng.hpp"

namespace pttag {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Prepared {
  std::vector<ModelInput> inputs;
  std::vector<std::size_t> positions;  // index into the batch for each input
};

std::vector<TagList> tag_batch(const TaggingEngine& engine, std::span<const Citation> batch) {
  std::vector<TagList> out(batch.size());
  Prepared prep;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out[i].citation_id = batch[i].id;
    try {
      const Citation clean = normalize_citation_text(batch[i], engine.symbols);
      prep.inputs.push_back(assemble_input(clean, *engine.tokenizer, engine.token_budget));
      prep.positions.push_back(i);
    } catch (const DataError& e) {
      out[i].error = e.what();
    }
  }
  const auto scores = engine.score(prep.inputs);
  const auto descriptors = engine.descriptors();
  for (std::size_t k = 0; k < scores.size(); ++k) {
    auto& slot = out[prep.positions[k]];
    try {
      slot = compile_tags(scores[k], engine.policy, engine.vocab, descriptors);
    } catch (const DataError& e) {
      slot.error = e.what();
    }
  }
  return out;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "patients", "study",    "clinical", "results",   "treatment", "analysis", "outcomes",
      "cells",    "disease",  "protein",  "expression", "risk",     "cohort",   "therapy",
      "methods",  "samples",  "effect",   "response",  "model",     "data",     "levels",
      "group",    "years",    "increase", "associated", "mice",     "gene",     "factors",
      "clinical", "trial",    "compared", "significant", "review",  "evidence", "health",
      "care",     "children", "women",    "imaging",   "surgery"};
  return words;
}

}  // namespace

void PipelineConfig::validate() const {
  if (workers < 1) throw ConfigError("worker count must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (token_budget < 1) throw ConfigError("token budget must be positive");
  if (stub_cost_us < 0) throw ConfigError("stub cost must be non-negative");
}

PipelineConfig PipelineConfig::from_json(const json& j, bool validate) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  try {
    c.corpus_path = j.value("corpus", c.corpus_path);
    c.vocab_path = j.value("vocab", c.vocab_path);
    c.policy_path = j.value("policy", c.policy_path);
    c.symbol_map_path = j.value("symbol_map", c.symbol_map_path);
    c.scorers = j.value("scorers", c.scorers);
    c.sidecar_address = j.value("sidecar", c.sidecar_address);
    const auto arch = j.value("architecture", std::string("monolithic"));
    if (arch == "monolithic") {
      c.architecture = Architecture::kMonolithic;
    } else if (arch == "ensemble") {
      c.architecture = Architecture::kEnsemble;
    } else {
      throw ConfigError("architecture must be monolithic or ensemble");
    }
    c.token_budget = j.value("token_budget", c.token_budget);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.stub_cost_us = j.value("stub_cost_us", c.stub_cost_us);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (validate) c.validate();
  return c;
}

PipelineConfig PipelineConfig::load_file(const std::string& path, bool validate) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
  return from_json(j, validate);
}

std::vector<ScorerDescriptor> TaggingEngine::descriptors() const {
  std::vector<ScorerDescriptor> out;
  out.reserve(scorers.size());
  for (const auto& s : scorers) out.push_back(s->descriptor());
  return out;
}

void TaggingEngine::validate() const {
  if (scorers.empty()) throw ConfigError("no scorer configured");
  if (architecture == Architecture::kMonolithic) {
    if (scorers.size() != 1) {
      throw ConfigError("monolithic architecture takes exactly one scorer, got " +
                        std::to_string(scorers.size()));
    }
    if (scorers.front()->descriptor().kind != ScorerKind::kMonolithic) {
      throw ConfigError("monolithic architecture needs a monolithic scorer");
    }
  } else {
    validate_ensemble(scorers);
  }
  for (const auto& s : scorers) {
    for (const auto& label : s->descriptor().vocabulary) {
      if (!vocab.contains(label)) {
        throw ConfigError("scorer \"" + s->descriptor().name + "\" emits unknown label \"" +
                          label + "\"");
      }
    }
  }
}

std::vector<ScoreVector> TaggingEngine::score(std::span<const ModelInput> inputs,
                                              std::vector<double>* per_scorer_seconds) const {
  if (architecture == Architecture::kEnsemble) {
    return ensemble_score(scorers, inputs, per_scorer_seconds);
  }
  auto out = scorers.front()->score_batch(inputs);
  if (out.size() != inputs.size()) {
    throw BackendError("scorer returned " + std::to_string(out.size()) + " vectors for " +
                       std::to_string(inputs.size()) + " inputs");
  }
  return out;
}

ScorerPtr load_scorer(const std::string& spec, const LabelVocabulary& vocab,
                      double stub_cost_us) {
  const auto cost = std::chrono::nanoseconds(static_cast<long long>(stub_cost_us * 1000.0));
  if (spec == "stub") {
    return std::make_shared<StubScorer>(
        ScorerDescriptor{"stub-monolithic", ScorerKind::kMonolithic, vocab.labels(), std::nullopt},
        cost);
  }
  if (spec.rfind("stub:", 0) == 0) {
    const std::string label = spec.substr(5);
    if (!vocab.contains(label)) throw ConfigError("stub scorer for unknown label \"" + label + "\"");
    return std::make_shared<StubScorer>(
        ScorerDescriptor{"stub-" + label, ScorerKind::kBinary, {label}, std::nullopt}, cost);
  }
  return std::make_shared<ReferenceScorer>(ReferenceScorer::load(spec));
}

TaggingEngine load_engine(const PipelineConfig& config) {
  config.validate();
  if (config.vocab_path.empty()) throw ConfigError("a vocabulary file is required");
  TaggingEngine e;
  e.vocab = load_vocabulary_file(config.vocab_path);
  if (!config.policy_path.empty()) {
    e.policy = CompilerPolicy::load_file(config.policy_path, e.vocab);
  }
  if (!config.symbol_map_path.empty()) e.symbols = SymbolMap::load_file(config.symbol_map_path);
  e.architecture = config.architecture;
  e.token_budget = config.token_budget;
  for (const auto& spec : config.scorers) {
    e.scorers.push_back(load_scorer(spec, e.vocab, config.stub_cost_us));
  }
  std::string sidecar = config.sidecar_address;
  if (sidecar.empty() && config.scorers.empty()) {
    if (const char* env = std::getenv("PT_SIDECAR_ADDR")) sidecar = env;
  }
  if (!sidecar.empty()) e.scorers.push_back(std::make_shared<RemoteScorer>(sidecar));
  e.validate();
  return e;
}

Citation normalize_citation_text(const Citation& c, const SymbolMap& symbols) {
  Citation out = c;
  out.title = normalize_text(c.title, symbols);
  out.abstract = normalize_text(c.abstract, symbols);
  out.journal_id = normalize_text(c.journal_id, symbols);
  if (out.journal_id.empty()) throw SchemaError("journal_id", "citation " + c.id + " after cleaning");
  if (out.title.empty()) throw SchemaError("title", "citation " + c.id + " after cleaning");
  return out;
}

std::vector<TagList> run_tagging(const TaggingEngine& engine, std::span<const Citation> corpus,
                                 std::size_t workers, std::size_t batch_size) {
  if (workers < 1) throw ConfigError("worker count must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  std::vector<TagList> out(corpus.size());
  const std::size_t n_batches = (corpus.size() + batch_size - 1) / batch_size;
  if (n_batches == 0) return out;

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_batches || failed.load()) return;
      const std::size_t begin = b * batch_size;
      const std::size_t len = std::min(batch_size, corpus.size() - begin);
      try {
        auto tagged = tag_batch(engine, corpus.subspan(begin, len));
        std::move(tagged.begin(), tagged.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_threads = std::min(workers, n_batches);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

void write_taglists(std::ostream& out, std::span<const TagList> tags) {
  for (const auto& t : tags) out << t.to_json().dump() << '\n';
}

std::vector<TagList> read_taglists(std::istream& in) {
  std::vector<TagList> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(line_number, "malformed JSON");
    TagList t;
    try {
      t.citation_id = j.at("id").get<std::string>();
      if (j.contains("error")) {
        t.error = j["error"].is_string() ? j["error"].get<std::string>() : j["error"].dump();
      } else {
        t.tags = j.at("tags").get<std::vector<std::string>>();
        const json prov = j.value("provenance", json::object());
        for (const auto& tag : t.tags) {
          TagProvenance p;
          if (auto it = prov.find(tag); it != prov.end()) {
            p.score = it->value("score", 0.0);
            p.source = it->value("source", std::string{});
            if (it->contains("threshold") && !(*it)["threshold"].is_null()) {
              p.threshold = (*it)["threshold"].get<double>();
            }
            p.actions = it->value("actions", std::vector<std::string>{});
          }
          t.provenance.push_back(std::move(p));
        }
      }
    } catch (const json::exception& e) {
      throw ParseError(line_number, e.what());
    }
    out.push_back(std::move(t));
  }
  return out;
}

json BenchReport::to_json() const {
  json per = json::array();
  for (const auto& [name, s] : per_classifier_seconds) per.push_back({{"scorer", name}, {"seconds", s}});
  return {{"citations", citations},
          {"seconds", seconds},
          {"citations_per_second", citations_per_second},
          {"stage_seconds", stage_seconds},
          {"per_classifier_seconds", per}};
}

std::string BenchReport::to_text() const {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "citations: %zu\nwall clock: %.4f s\nthroughput: %.1f citations/s\n",
                citations, seconds, citations_per_second);
  out << buf;
  for (const auto& [stage, s] : stage_seconds) {
    std::snprintf(buf, sizeof buf, "  %-10s %10.4f s  (%5.1f%%)\n", stage.c_str(), s,
                  seconds > 0 ? 100.0 * s / seconds : 0.0);
    out << buf;
  }
  for (const auto& [name, s] : per_classifier_seconds) {
    std::snprintf(buf, sizeof buf, "    %-44s %10.4f s\n", name.c_str(), s);
    out << buf;
  }
  return out.str();
}

BenchReport bench(const TaggingEngine& engine, std::span<const Citation> corpus,
                  std::size_t batch_size) {
  if (corpus.empty()) throw DataError("empty benchmark");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  BenchReport r;
  r.citations = corpus.size();
  const auto total_start = Clock::now();

  auto t = Clock::now();
  std::vector<Citation> clean;
  clean.reserve(corpus.size());
  for (const auto& c : corpus) {
    try {
      clean.push_back(normalize_citation_text(c, engine.symbols));
    } catch (const DataError&) {
    }
  }
  r.stage_seconds["normalize"] = seconds_since(t);

  t = Clock::now();
  std::vector<ModelInput> inputs;
  inputs.reserve(clean.size());
  for (const auto& c : clean) {
    try {
      inputs.push_back(assemble_input(c, *engine.tokenizer, engine.token_budget));
    } catch (const DataError&) {
    }
  }
  r.stage_seconds["assemble"] = seconds_since(t);

  t = Clock::now();
  std::vector<ScoreVector> scores;
  scores.reserve(inputs.size());
  std::vector<double> per_total(engine.scorers.size(), 0.0);
  std::vector<double> per_batch;
  for (std::size_t begin = 0; begin < inputs.size(); begin += batch_size) {
    const auto len = std::min(batch_size, inputs.size() - begin);
    auto part = engine.score(std::span(inputs).subspan(begin, len), &per_batch);
    for (std::size_t k = 0; k < per_batch.size(); ++k) per_total[k] += per_batch[k];
    std::move(part.begin(), part.end(), std::back_inserter(scores));
  }
  r.stage_seconds["score"] = seconds_since(t);
  if (engine.architecture == Architecture::kEnsemble) {
    for (std::size_t k = 0; k < engine.scorers.size(); ++k) {
      r.per_classifier_seconds.emplace_back(engine.scorers[k]->descriptor().name, per_total[k]);
    }
  }

  t = Clock::now();
  const auto descriptors = engine.descriptors();
  std::vector<TagList> compiled;
  compiled.reserve(scores.size());
  for (const auto& sv : scores) {
    try {
      compiled.push_back(compile_tags(sv, engine.policy, engine.vocab, descriptors));
    } catch (const DataError&) {
    }
  }
  r.stage_seconds["compile"] = seconds_since(t);

  r.seconds = seconds_since(total_start);
  r.citations_per_second = r.seconds > 0 ? static_cast<double>(r.citations) / r.seconds : 0.0;
  return r;
}

std::string synthetic_cue(const std::string& label) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "cue%08llx",
                static_cast<unsigned long long>(fnv1a64(label) & 0xffffffffULL));
  return buf;
}

Corpus make_synthetic_corpus(std::size_t n, const LabelVocabulary& vocab, std::uint64_t seed) {
  Rng rng(seed);
  const auto& entries = vocab.entries();
  std::vector<std::size_t> specific;
  std::vector<double> cumulative;
  double total = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].label == vocab.base_label()) continue;
    specific.push_back(i);
    total += static_cast<double>(entries[i].count) + 1.0;
    cumulative.push_back(total);
  }
  const auto& words = filler_words();
  auto filler = [&](std::size_t count, std::string& out) {
    for (std::size_t k = 0; k < count; ++k) {
      if (!out.empty()) out += ' ';
      out += words[rng.uniform_index(words.size())];
    }
  };

  Corpus corpus;
  corpus.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Citation c;
    c.id = "syn" + std::to_string(i);
    c.journal_id = "J" + std::to_string(rng.uniform_index(50));
    c.labels.insert(vocab.base_label());
    if (!specific.empty() && rng.uniform_real() < 0.6) {
      const std::size_t k = 1 + rng.uniform_index(2);
      for (std::size_t m = 0; m < k; ++m) {
        const double x = rng.uniform_real() * total;
        const auto pos = std::upper_bound(cumulative.begin(), cumulative.end(), x) - cumulative.begin();
        c.labels.insert(entries[specific[std::min<std::size_t>(pos, specific.size() - 1)]].label);
      }
    }
    filler(3 + rng.uniform_index(5), c.title);
    const bool has_abstract = rng.uniform_real() >= 0.1;
    if (has_abstract) filler(15 + rng.uniform_index(40), c.abstract);
    for (const auto& label : c.labels) {
      if (label == vocab.base_label()) continue;
      std::string& field = has_abstract && rng.uniform_real() < 0.5 ? c.abstract : c.title;
      field += ' ';
      field += synthetic_cue(label);
    }
    corpus.push_back(std::move(c));
  }
  return normalize_corpus(corpus, vocab);
}

}  // namespace pttag
