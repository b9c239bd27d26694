#include "pttag/reference_scorer.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "pttag/errors.hpp"
#include "pttag/hash.hpp"
#include "pttag/rng.hpp"

namespace pttag {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'S', 'C'};

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <typename Fn>
void for_each_word(std::string_view text, Fn fn) {
  std::string word;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (!word.empty()) {
      fn(word);
      word.clear();
    }
  }
  if (!word.empty()) fn(word);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::istream& in, int bytes, const std::string& path) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == EOF) throw BackendError("scorer file " + path + " is truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

ReferenceScorer::ReferenceScorer(ScorerDescriptor descriptor, std::uint32_t hash_dim,
                                 std::vector<double> weights)
    : descriptor_(std::move(descriptor)), hash_dim_(hash_dim), weights_(std::move(weights)) {
  descriptor_.validate();
  if (hash_dim_ == 0) throw ConfigError("hash dimension must be positive");
  if (weights_.size() != descriptor_.vocabulary.size() * (std::size_t{hash_dim_} + 1)) {
    throw ConfigError("weight array does not match vocabulary size and hash dimension");
  }
}

std::vector<std::uint32_t> ReferenceScorer::features(std::string_view text,
                                                     std::uint32_t hash_dim) {
  const InputFields fields = split_input_text(text);
  std::vector<std::uint32_t> out;
  auto add = [&](std::string_view prefix, std::string_view token) {
    out.push_back(static_cast<std::uint32_t>(fnv1a64(token, fnv1a64(prefix)) % hash_dim));
  };
  if (!fields.journal_id.empty()) add("journal:", fields.journal_id);
  if (fields.abstract.empty()) add("", "\x01no-abstract");
  for_each_word(fields.title, [&](const std::string& w) {
    add("", w);
    add("title:", w);
  });
  for_each_word(fields.abstract, [&](const std::string& w) { add("", w); });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double ReferenceScorer::logit(std::size_t label_index,
                              std::span<const std::uint32_t> feats) const {
  const double* w = weights_.data() + label_index * (std::size_t{hash_dim_} + 1);
  double z = w[hash_dim_];
  for (std::uint32_t f : feats) z += w[f];
  return z;
}

std::vector<ScoreVector> ReferenceScorer::score_batch(std::span<const ModelInput> inputs) const {
  std::vector<ScoreVector> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    const auto feats = features(in.text, hash_dim_);
    ScoreVector v;
    v.citation_id = in.citation_id;
    for (std::size_t l = 0; l < descriptor_.vocabulary.size(); ++l) {
      v.scores[descriptor_.vocabulary[l]] = sigmoid(logit(l, feats));
    }
    out.push_back(std::move(v));
  }
  return out;
}

void ReferenceScorer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BackendError("cannot write scorer file " + path);
  nlohmann::json header = descriptor_.to_json();
  header["hash_dim"] = hash_dim_;
  header["loss_history"] = loss_history_;
  const std::string bytes = header.dump();
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kFormatVersion);
  put_u64(out, bytes.size());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  for (double w : weights_) put_u64(out, std::bit_cast<std::uint64_t>(w));
  if (!out) throw BackendError("failed writing scorer file " + path);
}

ReferenceScorer ReferenceScorer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendError("cannot open scorer file " + path);
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw BackendError(path + " is not a scorer file");
  }
  const auto version = static_cast<std::uint32_t>(get_le(in, 4, path));
  if (version != kFormatVersion) {
    throw BackendError(path + ": unsupported scorer format version " + std::to_string(version));
  }
  const std::uint64_t length = get_le(in, 8, path);
  if (length > (std::uint64_t{1} << 32)) throw BackendError(path + ": descriptor too large");
  std::string bytes(length, '\0');
  if (!in.read(bytes.data(), static_cast<std::streamsize>(length))) {
    throw BackendError("scorer file " + path + " is truncated");
  }
  auto header = nlohmann::json::parse(bytes, nullptr, false);
  if (header.is_discarded() || !header.contains("hash_dim")) {
    throw BackendError(path + ": corrupt descriptor");
  }
  ScorerDescriptor descriptor;
  try {
    descriptor = ScorerDescriptor::from_json(header);
  } catch (const ConfigError& e) {
    throw BackendError(path + ": " + e.what());
  }
  const auto hash_dim = header["hash_dim"].get<std::uint32_t>();
  const std::size_t n = descriptor.vocabulary.size() * (std::size_t{hash_dim} + 1);
  std::vector<double> weights(n);
  for (auto& w : weights) w = std::bit_cast<double>(get_le(in, 8, path));
  ReferenceScorer s(std::move(descriptor), hash_dim, std::move(weights));
  if (header.contains("loss_history")) {
    s.loss_history_ = header["loss_history"].get<std::vector<double>>();
  }
  return s;
}

ReferenceScorer train_reference_scorer(std::span<const LabeledInput> dataset,
                                       const TrainingTarget& target, const TrainingHyper& hyper,
                                       std::uint64_t seed,
                                       std::span<const LabeledInput> eval_set) {
  if (dataset.empty()) throw TrainingError("training dataset is empty");
  if (hyper.epochs <= 0) throw ConfigError("epochs must be positive");
  if (!(hyper.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (hyper.hash_dim == 0) throw ConfigError("hash dimension must be positive");

  ScorerDescriptor descriptor;
  descriptor.kind = target.kind;
  descriptor.vocabulary = target.labels;
  if (target.kind == ScorerKind::kBinary) {
    if (target.labels.size() != 1) throw ConfigError("binary target needs exactly one label");
    descriptor.name = "reference-binary-" + target.labels.front();
  } else {
    if (descriptor.vocabulary.empty()) {
      std::set<std::string> seen;
      for (const auto& ex : dataset) seen.insert(ex.labels.begin(), ex.labels.end());
      descriptor.vocabulary.assign(seen.begin(), seen.end());
    }
    if (descriptor.vocabulary.empty()) throw TrainingError("training data carries no labels");
    descriptor.name = "reference-monolithic";
  }
  descriptor.validate();
  const std::vector<std::string> labels = descriptor.vocabulary;  // descriptor is moved below
  const std::size_t n_labels = labels.size();
  const std::size_t stride = std::size_t{hyper.hash_dim} + 1;

  // Targets and features, computed once.
  std::vector<std::vector<std::uint32_t>> feats(dataset.size());
  std::vector<std::vector<std::uint8_t>> y(dataset.size(), std::vector<std::uint8_t>(n_labels));
  std::vector<std::size_t> positives(n_labels, 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    feats[i] = ReferenceScorer::features(dataset[i].input.text, hyper.hash_dim);
    for (std::size_t l = 0; l < n_labels; ++l) {
      y[i][l] = dataset[i].labels.count(labels[l]) ? 1 : 0;
      positives[l] += y[i][l];
    }
  }
  if (target.kind == ScorerKind::kBinary &&
      (positives[0] == 0 || positives[0] == dataset.size())) {
    throw TrainingError("binary dataset for \"" + labels[0] + "\" has a single class");
  }
  std::vector<double> pos_weight(n_labels, 1.0);
  for (std::size_t l = 0; l < n_labels; ++l) {
    if (auto it = hyper.class_weights.find(labels[l]); it != hyper.class_weights.end()) {
      if (!(it->second > 0.0)) throw ConfigError("class weights must be positive");
      pos_weight[l] = it->second;
    }
  }

  Rng rng(seed);
  std::vector<double> weights(n_labels * stride);
  for (auto& w : weights) w = (rng.uniform_real() - 0.5) * 0.02;
  ReferenceScorer model(std::move(descriptor), hyper.hash_dim, std::move(weights));

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  const double lr = hyper.learning_rate;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t i : order) {
      for (std::size_t l = 0; l < n_labels; ++l) {
        const double p = sigmoid(model.logit(l, feats[i]));
        const double g = (y[i][l] ? pos_weight[l] : 1.0) * (p - static_cast<double>(y[i][l]));
        double* w = model.weights_.data() + l * stride;
        for (std::uint32_t f : feats[i]) w[f] -= lr * g;
        w[hyper.hash_dim] -= lr * g;
      }
    }

    double loss = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      for (std::size_t l = 0; l < n_labels; ++l) {
        const double z = model.logit(l, feats[i]);
        // log(1 + e^-z) and log(1 + e^z), computed stably
        const double softplus_neg = std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z)));
        const double softplus_pos = softplus_neg + z;
        loss += y[i][l] ? pos_weight[l] * softplus_neg : softplus_pos;
      }
    }
    loss /= static_cast<double>(dataset.size() * n_labels);
    if (!std::isfinite(loss)) throw DivergenceError(epoch, "training loss is not finite");
    model.loss_history_.push_back(loss);
  }

  if (!eval_set.empty()) {
    std::vector<std::uint64_t> tp(n_labels), fp(n_labels), fn(n_labels);
    for (const auto& ex : eval_set) {
      const auto f = ReferenceScorer::features(ex.input.text, hyper.hash_dim);
      for (std::size_t l = 0; l < n_labels; ++l) {
        const bool predicted = sigmoid(model.logit(l, f)) >= hyper.decision_threshold;
        const bool gold = ex.labels.count(labels[l]) != 0;
        tp[l] += predicted && gold;
        fp[l] += predicted && !gold;
        fn[l] += !predicted && gold;
      }
    }
    std::map<std::string, Prf> metrics;
    for (std::size_t l = 0; l < n_labels; ++l) {
      metrics[labels[l]] = prf_from_counts(tp[l], fp[l], fn[l]);
    }
    model.descriptor_.validation_metrics = std::move(metrics);
  }
  return model;
}

}  // namespace pttag
