#include "prosody/predictor.hpp"

#include <algorithm>
#include <cmath>

#include "prosody/error.hpp"

namespace prosody::pred {

using nlohmann::json;
using nn::Mode;
using nn::Network;
using nn::Tensor;

nn::Tensor length_regulate(const Tensor& word_seq,
                           const std::vector<int>& phones_per_word) {
  if (word_seq.rank() != 2 ||
      word_seq.dim(0) != static_cast<int>(phones_per_word.size())) {
    throw DataError("length_regulate: one count per word vector required");
  }
  int total = 0;
  for (int c : phones_per_word) {
    if (c <= 0) throw DataError("length_regulate: phoneme count must be >= 1");
    total += c;
  }
  const int dim = word_seq.dim(1);
  Tensor out({total, dim});
  int pos = 0;
  for (std::size_t w = 0; w < phones_per_word.size(); ++w) {
    for (int r = 0; r < phones_per_word[w]; ++r, ++pos) {
      for (int d = 0; d < dim; ++d) {
        out.at(pos, d) = word_seq.at(static_cast<int>(w), d);
      }
    }
  }
  return out;
}

namespace {

// Gradient counterpart of length_regulate: sums phoneme-position gradients
// back into their word slots.
Tensor length_regulate_backward(const Tensor& grad_out,
                                const std::vector<int>& phones_per_word) {
  const int dim = grad_out.dim(1);
  Tensor dw({static_cast<int>(phones_per_word.size()), dim});
  int pos = 0;
  for (std::size_t w = 0; w < phones_per_word.size(); ++w) {
    for (int r = 0; r < phones_per_word[w]; ++r, ++pos) {
      for (int d = 0; d < dim; ++d) {
        dw.at(static_cast<int>(w), d) += grad_out.at(pos, d);
      }
    }
  }
  return dw;
}

void build_trunk(Network& net, const PredictorConfig& cfg) {
  net.add(std::make_unique<nn::Conv1d>(cfg.input_dim, cfg.conv_channels,
                                       cfg.kernel));
  net.add(std::make_unique<nn::Relu>());
  net.add(std::make_unique<nn::LayerNorm>(cfg.conv_channels));
  net.add(std::make_unique<nn::Dropout>(cfg.dropout));
  net.add(std::make_unique<nn::Conv1d>(cfg.conv_channels, cfg.conv_channels,
                                       cfg.kernel));
  net.add(std::make_unique<nn::Relu>());
  net.add(std::make_unique<nn::LayerNorm>(cfg.conv_channels));
  net.add(std::make_unique<nn::Dropout>(cfg.dropout));
  net.add(std::make_unique<nn::Linear>(cfg.conv_channels, cfg.output_dim));
}

std::string loss_kind_of(LabelKind kind) {
  return kind == LabelKind::rule_based ? "mae" : "mse";
}

// loss and output-gradient of one utterance, already scaled by inv_batch;
// targets are standardized
double loss_and_grad(const Tensor& pred, const Tensor& target, LabelKind kind,
                     double inv_batch, Tensor* grad) {
  const double scale = 1.0 / pred.v.size();
  *grad = Tensor(pred.shape);
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    const double d = pred.v[i] - target.v[i];
    if (kind == LabelKind::rule_based) {
      loss += std::abs(d) * scale;
      grad->v[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * scale * inv_batch;
    } else {
      loss += d * d * scale;
      grad->v[i] = 2.0 * d * scale * inv_batch;
    }
  }
  return loss * inv_batch;
}

// Deterministic per-step stream: batching and dropout state depend only on
// (seed, step), which makes interrupted runs resumable mid-stream.
Rng step_rng(std::uint64_t seed, int step) {
  return Rng(seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(step));
}

struct TrainDriver {
  const nn::TrainConfig& cfg;
  std::vector<Network*> nets;      // reseeded every step
  nn::AdamOptimizer opt;
  PredictorTrainReport report;
  int start_step = 0;

  // BatchFn: (Rng& rng, double inv_batch) -> double batch loss; performs
  // forward/backward for cfg.batch_size utterances.
  template <typename BatchFn>
  void run(BatchFn&& fn) {
    cfg.validate();
    for (int step = start_step + 1; step <= cfg.total_steps; ++step) {
      Rng rng = step_rng(cfg.rng_seed, step);
      for (Network* net : nets) {
        Rng derived(rng.next_u64());
        net->rng().set_state(derived.state());
        net->zero_grad();
      }
      const double loss = fn(rng, 1.0 / cfg.batch_size);
      if (!std::isfinite(loss)) {
        throw NumericError("training loss is non-finite at step " +
                           std::to_string(step));
      }
      if (report.curve.empty()) report.step0_loss = loss;
      report.curve.emplace_back(step, loss);
      opt.step(cfg, step);
      report.steps_run = step;
      if (cfg.early_stop_ratio > 0.0 && report.curve.size() >= 20) {
        double tail = 0.0;
        for (int i = 0; i < 10; ++i) {
          tail += report.curve[report.curve.size() - 1 - i].second;
        }
        tail /= 10.0;
        if (tail <= cfg.early_stop_ratio * report.step0_loss) break;
      }
    }
    const int tail_n =
        std::min<int>(10, static_cast<int>(report.curve.size()));
    double acc = 0.0;
    for (int i = 0; i < tail_n; ++i) {
      acc += report.curve[report.curve.size() - 1 - i].second;
    }
    report.final_loss = tail_n ? acc / tail_n : 0.0;
  }

  json state_json(const std::vector<Network*>& model_nets) const {
    json nets_j = json::array();
    for (const Network* net : model_nets) nets_j.push_back(net->to_json(true));
    json curve_j = json::array();
    for (const auto& [s, l] : report.curve) curve_j.push_back({s, l});
    return {{"step", report.steps_run},
            {"nets", std::move(nets_j)},
            {"adam", opt.to_json(true)},
            {"step0_loss", report.step0_loss},
            {"curve", std::move(curve_j)}};
  }

  void load_state(const json& j, const std::vector<Network*>& model_nets) {
    const auto& nets_j = j.at("nets");
    if (nets_j.size() != model_nets.size()) {
      throw DataError("resume state network count mismatch");
    }
    for (std::size_t i = 0; i < model_nets.size(); ++i) {
      Network restored = Network::from_json(nets_j[i]);
      auto restored_layers = restored.layers();
      auto target_layers = model_nets[i]->layers();
      if (restored_layers.size() != target_layers.size()) {
        throw DataError("resume state layer count mismatch");
      }
      for (std::size_t l = 0; l < target_layers.size(); ++l) {
        target_layers[l]->params() = restored_layers[l]->params();
      }
    }
    opt.load_state(j.at("adam"));
    start_step = j.at("step").get<int>();
    report.step0_loss = j.at("step0_loss").get<double>();
    for (const auto& pt : j.at("curve")) {
      report.curve.emplace_back(pt[0].get<int>(), pt[1].get<double>());
    }
    report.steps_run = start_step;
  }
};

}  // namespace

json PredictorConfig::to_json() const {
  return {{"input_dim", input_dim},
          {"conv_channels", conv_channels},
          {"kernel", kernel},
          {"dropout", dropout},
          {"output_dim", output_dim}};
}

PredictorConfig PredictorConfig::from_json(const json& j) {
  PredictorConfig cfg;
  cfg.input_dim = j.value("input_dim", cfg.input_dim);
  cfg.conv_channels = j.value("conv_channels", cfg.conv_channels);
  cfg.kernel = j.value("kernel", cfg.kernel);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.output_dim = j.value("output_dim", cfg.output_dim);
  return cfg;
}

TargetStats TargetStats::fit(const std::vector<Tensor>& targets, int dim) {
  TargetStats stats;
  stats.mean.assign(dim, 0.0);
  stats.stdev.assign(dim, 1.0);
  long count = 0;
  for (const auto& t : targets) {
    for (int r = 0; r < t.rows(); ++r) {
      for (int d = 0; d < dim; ++d) stats.mean[d] += t.at(r, d);
      ++count;
    }
  }
  if (count == 0) throw DataError("cannot fit target stats on empty data");
  for (auto& m : stats.mean) m /= static_cast<double>(count);
  std::vector<double> var(dim, 0.0);
  for (const auto& t : targets) {
    for (int r = 0; r < t.rows(); ++r) {
      for (int d = 0; d < dim; ++d) {
        const double diff = t.at(r, d) - stats.mean[d];
        var[d] += diff * diff;
      }
    }
  }
  for (int d = 0; d < dim; ++d) {
    const double s = std::sqrt(var[d] / static_cast<double>(count));
    stats.stdev[d] = s > 1e-8 ? s : 1.0;
  }
  return stats;
}

void TargetStats::standardize(Tensor& t) const {
  const int dim = static_cast<int>(mean.size());
  for (int r = 0; r < t.rows(); ++r) {
    for (int d = 0; d < dim; ++d) {
      t.at(r, d) = (t.at(r, d) - mean[d]) / stdev[d];
    }
  }
}

void TargetStats::destandardize(Tensor& t) const {
  const int dim = static_cast<int>(mean.size());
  for (int r = 0; r < t.rows(); ++r) {
    for (int d = 0; d < dim; ++d) {
      t.at(r, d) = t.at(r, d) * stdev[d] + mean[d];
    }
  }
}

json TargetStats::to_json() const { return {{"mean", mean}, {"stdev", stdev}}; }

TargetStats TargetStats::from_json(const json& j) {
  TargetStats stats;
  stats.mean = j.at("mean").get<std::vector<double>>();
  stats.stdev = j.at("stdev").get<std::vector<double>>();
  return stats;
}

TokenTargets targets_from_labels(const ProsodyLabelSet& labels,
                                 const RuleQuantizers* quantizers,
                                 const vq::Codebook* codebook) {
  TokenTargets out;
  if (labels.kind == LabelKind::rule_based) {
    if (quantizers == nullptr) {
      throw ConfigError("rule-based targets need fitted quantizers");
    }
    const int n = static_cast<int>(labels.rule.size());
    out.continuous = Tensor({n, 2});
    out.rule = labels.rule;
    for (int i = 0; i < n; ++i) {
      out.continuous.at(i, 0) = quantizers->f0.dequantize(labels.rule[i].f0_bin);
      out.continuous.at(i, 1) =
          quantizers->energy.dequantize(labels.rule[i].energy_bin);
    }
  } else {
    (void)codebook;  // the stored latent already is the codeword vector
    const int n = static_cast<int>(labels.neural.size());
    out.continuous = Tensor({n, 3});
    out.codewords.reserve(n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) {
        out.continuous.at(i, k) = labels.neural[i].latent[k];
      }
      out.codewords.push_back(labels.neural[i].codeword);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// WordPredictor

WordPredictor::WordPredictor(LabelKind kind, const PredictorConfig& cfg,
                             std::uint64_t seed)
    : kind_(kind), cfg_(cfg), net_(std::make_unique<Network>(seed)) {
  build_trunk(*net_, cfg_);
  net_->init_params();
  stats_.mean.assign(cfg_.output_dim, 0.0);
  stats_.stdev.assign(cfg_.output_dim, 1.0);
}

Tensor WordPredictor::predict(const Tensor& word_features) {
  Tensor out = net_->forward(word_features, Mode::eval);
  stats_.destandardize(out);
  return out;
}

PredictorTrainReport WordPredictor::train(
    const std::vector<PredictorSample>& dataset, const nn::TrainConfig& cfg,
    const std::string& resume_state, std::string* state_out) {
  if (dataset.empty()) throw DataError("word predictor needs training data");
  std::vector<Tensor> raw;
  raw.reserve(dataset.size());
  for (const auto& s : dataset) raw.push_back(s.word.continuous);

  TrainDriver driver{cfg, {net_.get()}, {}, {}, 0};
  driver.opt.register_layers(net_->layers());
  if (!resume_state.empty()) {
    driver.load_state(json::parse(resume_state), {net_.get()});
    stats_ = TargetStats::from_json(
        json::parse(resume_state).at("target_stats"));
  } else {
    stats_ = TargetStats::fit(raw, cfg_.output_dim);
  }
  std::vector<Tensor> std_targets = raw;
  for (auto& t : std_targets) stats_.standardize(t);

  const int n = static_cast<int>(dataset.size());
  driver.run([&](Rng& rng, double inv_batch) {
    double loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int idx = static_cast<int>(rng.below(n));
      const Tensor pred =
          net_->forward(dataset[idx].word_features, Mode::train);
      Tensor grad;
      loss += loss_and_grad(pred, std_targets[idx], kind_, inv_batch, &grad);
      net_->backward(grad);
    }
    return loss;
  });

  driver.report.loss_kind = loss_kind_of(kind_);
  if (state_out != nullptr) {
    json st = driver.state_json({net_.get()});
    st["target_stats"] = stats_.to_json();
    *state_out = st.dump();
  }
  return driver.report;
}

json WordPredictor::to_json(bool full_precision) const {
  return {{"kind", to_string(kind_)},
          {"config", cfg_.to_json()},
          {"net", net_->to_json(full_precision)},
          {"target_stats", stats_.to_json()}};
}

WordPredictor WordPredictor::from_json(const json& j) {
  WordPredictor p;
  p.kind_ = label_kind_from_string(j.at("kind").get<std::string>());
  p.cfg_ = PredictorConfig::from_json(j.at("config"));
  p.net_ = std::make_unique<Network>(Network::from_json(j.at("net")));
  p.stats_ = TargetStats::from_json(j.at("target_stats"));
  return p;
}

// ---------------------------------------------------------------------------
// PhonemePredictor

PhonemePredictor::PhonemePredictor(LabelKind kind, const PredictorConfig& cfg,
                                   std::vector<std::string> symbols,
                                   std::uint64_t seed)
    : kind_(kind), cfg_(cfg), symbols_(std::move(symbols)) {
  if (symbols_.empty() || symbols_[0] != "<unk>") {
    symbols_.insert(symbols_.begin(), "<unk>");
  }
  embed_ = std::make_unique<Network>(seed);
  embed_->add(std::make_unique<nn::EmbeddingLookup>(
      static_cast<int>(symbols_.size()), cfg_.input_dim));
  trunk_ = std::make_unique<Network>(seed + 0x517cc1b727220a95ull);
  build_trunk(*trunk_, cfg_);
  embed_->init_params();
  trunk_->init_params();
  stats_.mean.assign(cfg_.output_dim, 0.0);
  stats_.stdev.assign(cfg_.output_dim, 1.0);
}

int PhonemePredictor::symbol_id(const std::string& symbol) const {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] == symbol) return static_cast<int>(i);
  }
  return 0;
}

Tensor PhonemePredictor::forward(const std::vector<int>& ids,
                                 const Tensor* inject, Mode mode) {
  Tensor id_tensor({static_cast<int>(ids.size())});
  for (std::size_t i = 0; i < ids.size(); ++i) id_tensor.v[i] = ids[i];
  Tensor features = embed_->forward(id_tensor, mode);
  if (inject != nullptr) {
    if (inject->shape != features.shape) {
      throw DataError("injected word-prosody sequence shape mismatch");
    }
    for (std::size_t i = 0; i < features.v.size(); ++i) {
      features.v[i] += inject->v[i];
    }
  }
  return trunk_->forward(features, mode);
}

Tensor PhonemePredictor::backward_trunk(const Tensor& grad_out) {
  const Tensor d_features = trunk_->backward(grad_out);
  embed_->backward(d_features);
  return d_features;
}

Tensor PhonemePredictor::predict(const std::vector<int>& ids) {
  Tensor out = forward(ids, nullptr, Mode::eval);
  stats_.destandardize(out);
  return out;
}

PredictorTrainReport PhonemePredictor::train(
    const std::vector<PredictorSample>& dataset, const nn::TrainConfig& cfg,
    const std::string& resume_state, std::string* state_out) {
  if (dataset.empty()) throw DataError("phoneme predictor needs training data");
  std::vector<Tensor> raw;
  raw.reserve(dataset.size());
  for (const auto& s : dataset) raw.push_back(s.phoneme.continuous);

  TrainDriver driver{cfg, {embed_.get(), trunk_.get()}, {}, {}, 0};
  driver.opt.register_layers(embed_->layers());
  driver.opt.register_layers(trunk_->layers());
  if (!resume_state.empty()) {
    const json st = json::parse(resume_state);
    driver.load_state(st, {embed_.get(), trunk_.get()});
    stats_ = TargetStats::from_json(st.at("target_stats"));
  } else {
    stats_ = TargetStats::fit(raw, cfg_.output_dim);
  }
  std::vector<Tensor> std_targets = raw;
  for (auto& t : std_targets) stats_.standardize(t);

  const int n = static_cast<int>(dataset.size());
  driver.run([&](Rng& rng, double inv_batch) {
    double loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int idx = static_cast<int>(rng.below(n));
      const Tensor pred =
          forward(dataset[idx].phoneme_ids, nullptr, Mode::train);
      Tensor grad;
      loss += loss_and_grad(pred, std_targets[idx], kind_, inv_batch, &grad);
      backward_trunk(grad);
    }
    return loss;
  });

  driver.report.loss_kind = loss_kind_of(kind_);
  if (state_out != nullptr) {
    json st = driver.state_json({embed_.get(), trunk_.get()});
    st["target_stats"] = stats_.to_json();
    *state_out = st.dump();
  }
  return driver.report;
}

json PhonemePredictor::to_json(bool full_precision) const {
  return {{"kind", to_string(kind_)},
          {"config", cfg_.to_json()},
          {"symbols", symbols_},
          {"embed", embed_->to_json(full_precision)},
          {"trunk", trunk_->to_json(full_precision)},
          {"target_stats", stats_.to_json()}};
}

PhonemePredictor PhonemePredictor::from_json(const json& j) {
  PhonemePredictor p;
  p.kind_ = label_kind_from_string(j.at("kind").get<std::string>());
  p.cfg_ = PredictorConfig::from_json(j.at("config"));
  p.symbols_ = j.at("symbols").get<std::vector<std::string>>();
  p.embed_ = std::make_unique<Network>(Network::from_json(j.at("embed")));
  p.trunk_ = std::make_unique<Network>(Network::from_json(j.at("trunk")));
  p.stats_ = TargetStats::from_json(j.at("target_stats"));
  return p;
}

// ---------------------------------------------------------------------------
// HierarchicalPredictor

HierarchicalPredictor::HierarchicalPredictor(
    LabelKind word_kind, LabelKind phoneme_kind,
    const PredictorConfig& word_cfg, const PredictorConfig& phoneme_cfg,
    std::vector<std::string> symbols, int n_bins, std::uint64_t seed,
    bool embed_discrete)
    : embed_discrete_(embed_discrete), n_bins_(n_bins) {
  word_ = std::make_unique<WordPredictor>(word_kind, word_cfg, seed);
  phoneme_ = std::make_unique<PhonemePredictor>(
      phoneme_kind, phoneme_cfg, std::move(symbols),
      seed + 0x2545f4914f6cdd1dull);
  const int feat_dim = phoneme_cfg.input_dim;
  const std::uint64_t table_seed = seed + 0x9e3779b97f4a7c15ull;
  // Label tables start at zero: the injection is an additive identity until
  // trained, and label bins never seen in training keep injecting nothing
  // instead of noise when the word stage's prediction lands next to a
  // trained bin.
  if (word_kind == LabelKind::rule_based) {
    table_f0_ = std::make_unique<Network>(table_seed);
    table_f0_->add(std::make_unique<nn::EmbeddingLookup>(n_bins_, feat_dim));
    table_energy_ = std::make_unique<Network>(table_seed + 1);
    table_energy_->add(
        std::make_unique<nn::EmbeddingLookup>(n_bins_, feat_dim));
  } else {
    table_code_ = std::make_unique<Network>(table_seed);
    table_code_->add(std::make_unique<nn::EmbeddingLookup>(n_bins_, feat_dim));
  }
  if (!embed_discrete_) {
    // zero-initialized linear map from the continuous word prediction,
    // additive identity until trained
    projection_ = std::make_unique<Network>(table_seed + 2);
    projection_->add(
        std::make_unique<nn::Linear>(word_cfg.output_dim, feat_dim));
  }
}

void HierarchicalPredictor::set_word_discretizers(
    std::optional<RuleQuantizers> quantizers,
    std::optional<vq::Codebook> codebook) {
  word_quantizers_ = std::move(quantizers);
  word_codebook_ = std::move(codebook);
}

std::vector<nn::Layer*> HierarchicalPredictor::label_table_layers() {
  std::vector<nn::Layer*> out;
  for (Network* net : {table_f0_.get(), table_energy_.get(), table_code_.get(),
                       projection_.get()}) {
    if (net == nullptr) continue;
    for (auto* l : net->layers()) out.push_back(l);
  }
  return out;
}

Tensor HierarchicalPredictor::embed_word_labels(
    const std::vector<RuleLabel>& rule, const std::vector<int>& codewords,
    Mode mode) {
  if (word_->kind() == LabelKind::rule_based) {
    const int n = static_cast<int>(rule.size());
    Tensor f0_ids({n}), energy_ids({n});
    for (int i = 0; i < n; ++i) {
      f0_ids.v[i] = rule[i].f0_bin;
      energy_ids.v[i] = rule[i].energy_bin;
    }
    Tensor emb = table_f0_->forward(f0_ids, mode);
    const Tensor e2 = table_energy_->forward(energy_ids, mode);
    for (std::size_t i = 0; i < emb.v.size(); ++i) emb.v[i] += e2.v[i];
    return emb;
  }
  const int n = static_cast<int>(codewords.size());
  Tensor ids({n});
  for (int i = 0; i < n; ++i) ids.v[i] = codewords[i];
  return table_code_->forward(ids, mode);
}

HierarchicalPredictor::Prediction HierarchicalPredictor::predict(
    const Tensor& word_features, const std::vector<int>& phoneme_ids,
    const std::vector<int>& phones_per_word) {
  Prediction out;
  out.word = word_->predict(word_features);

  if (!embed_discrete_) {
    const Tensor word_emb = projection_->forward(out.word, Mode::eval);
    const Tensor expanded = length_regulate(word_emb, phones_per_word);
    out.phoneme = phoneme_->forward(phoneme_ids, &expanded, Mode::eval);
    phoneme_->stats().destandardize(out.phoneme);
    return out;
  }

  // discretize the word prediction, then embed the discrete label
  std::vector<RuleLabel> rule;
  std::vector<int> codewords;
  if (word_->kind() == LabelKind::rule_based) {
    if (!word_quantizers_) {
      throw ConfigError("hierarchical model is missing word quantizers");
    }
    for (int w = 0; w < out.word.dim(0); ++w) {
      RuleLabel label;
      label.f0_bin = word_quantizers_->f0.quantize(out.word.at(w, 0));
      label.energy_bin = word_quantizers_->energy.quantize(out.word.at(w, 1));
      rule.push_back(label);
    }
  } else {
    if (!word_codebook_) {
      throw ConfigError("hierarchical model is missing the word codebook");
    }
    for (int w = 0; w < out.word.dim(0); ++w) {
      const std::vector<double> z{out.word.at(w, 0), out.word.at(w, 1),
                                  out.word.at(w, 2)};
      codewords.push_back(vq::quantize_latent(z, *word_codebook_).index);
    }
  }
  const Tensor word_emb = embed_word_labels(rule, codewords, Mode::eval);
  const Tensor expanded = length_regulate(word_emb, phones_per_word);
  out.phoneme = phoneme_->forward(phoneme_ids, &expanded, Mode::eval);
  phoneme_->stats().destandardize(out.phoneme);
  return out;
}

PredictorTrainReport HierarchicalPredictor::train_word(
    const std::vector<PredictorSample>& dataset, const nn::TrainConfig& cfg) {
  return word_->train(dataset, cfg);
}

PredictorTrainReport HierarchicalPredictor::train_phoneme(
    const std::vector<PredictorSample>& dataset, const nn::TrainConfig& cfg,
    bool teacher_force, const std::string& resume_state,
    std::string* state_out) {
  if (dataset.empty()) throw DataError("hierarchical stage needs data");
  std::vector<Tensor> raw;
  raw.reserve(dataset.size());
  for (const auto& s : dataset) raw.push_back(s.phoneme.continuous);

  std::vector<Network*> nets{&phoneme_->embed_net(), &phoneme_->trunk_net()};
  if (embed_discrete_) {
    if (table_f0_) nets.push_back(table_f0_.get());
    if (table_energy_) nets.push_back(table_energy_.get());
    if (table_code_) nets.push_back(table_code_.get());
  } else {
    nets.push_back(projection_.get());
  }

  TrainDriver driver{cfg, nets, {}, {}, 0};
  for (Network* net : nets) driver.opt.register_layers(net->layers());
  if (!resume_state.empty()) {
    const json st = json::parse(resume_state);
    driver.load_state(st, nets);
    phoneme_->stats() = TargetStats::from_json(st.at("target_stats"));
  } else {
    phoneme_->stats() = TargetStats::fit(raw, phoneme_->config().output_dim);
  }
  std::vector<Tensor> std_targets = raw;
  for (auto& t : std_targets) phoneme_->stats().standardize(t);

  const int n = static_cast<int>(dataset.size());
  driver.run([&](Rng& rng, double inv_batch) {
    double loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int idx = static_cast<int>(rng.below(n));
      const auto& sample = dataset[idx];

      if (!embed_discrete_) {
        const Tensor word_in = teacher_force
                                   ? sample.word.continuous
                                   : word_->predict(sample.word_features);
        const Tensor word_emb = projection_->forward(word_in, Mode::train);
        const Tensor expanded =
            length_regulate(word_emb, sample.phones_per_word);
        const Tensor pred =
            phoneme_->forward(sample.phoneme_ids, &expanded, Mode::train);
        Tensor grad;
        loss += loss_and_grad(pred, std_targets[idx], phoneme_->kind(),
                              inv_batch, &grad);
        const Tensor d_features = phoneme_->backward_trunk(grad);
        projection_->backward(
            length_regulate_backward(d_features, sample.phones_per_word));
        continue;
      }

      std::vector<RuleLabel> rule = sample.word.rule;
      std::vector<int> codewords = sample.word.codewords;
      if (!teacher_force) {
        // condition on the frozen word stage's own predictions
        const Tensor wp = word_->predict(sample.word_features);
        rule.clear();
        codewords.clear();
        if (word_->kind() == LabelKind::rule_based) {
          if (!word_quantizers_) {
            throw ConfigError("hierarchical model is missing word quantizers");
          }
          for (int w = 0; w < wp.dim(0); ++w) {
            rule.push_back({word_quantizers_->f0.quantize(wp.at(w, 0)),
                            word_quantizers_->energy.quantize(wp.at(w, 1))});
          }
        } else {
          if (!word_codebook_) {
            throw ConfigError("hierarchical model is missing the word codebook");
          }
          for (int w = 0; w < wp.dim(0); ++w) {
            const std::vector<double> z{wp.at(w, 0), wp.at(w, 1), wp.at(w, 2)};
            codewords.push_back(vq::quantize_latent(z, *word_codebook_).index);
          }
        }
      }

      const Tensor word_emb =
          embed_word_labels(rule, codewords, Mode::train);
      const Tensor expanded =
          length_regulate(word_emb, sample.phones_per_word);
      const Tensor pred =
          phoneme_->forward(sample.phoneme_ids, &expanded, Mode::train);
      Tensor grad;
      loss += loss_and_grad(pred, std_targets[idx], phoneme_->kind(),
                            inv_batch, &grad);
      const Tensor d_features = phoneme_->backward_trunk(grad);
      const Tensor d_word_emb =
          length_regulate_backward(d_features, sample.phones_per_word);
      if (word_->kind() == LabelKind::rule_based) {
        table_f0_->backward(d_word_emb);
        table_energy_->backward(d_word_emb);
      } else {
        table_code_->backward(d_word_emb);
      }
    }
    return loss;
  });

  driver.report.loss_kind = loss_kind_of(phoneme_->kind());
  if (state_out != nullptr) {
    json st = driver.state_json(nets);
    st["target_stats"] = phoneme_->stats().to_json();
    *state_out = st.dump();
  }
  return driver.report;
}

json HierarchicalPredictor::to_json(bool full_precision) const {
  json j;
  j["word"] = word_->to_json(full_precision);
  j["phoneme"] = phoneme_->to_json(full_precision);
  j["n_bins"] = n_bins_;
  if (table_f0_) j["table_f0"] = table_f0_->to_json(full_precision);
  if (table_energy_) j["table_energy"] = table_energy_->to_json(full_precision);
  if (table_code_) j["table_code"] = table_code_->to_json(full_precision);
  j["embed_discrete"] = embed_discrete_;
  if (projection_) j["projection"] = projection_->to_json(full_precision);
  if (word_quantizers_) {
    j["word_quantizers"] = {
        {"f0", json::parse(word_quantizers_->f0.to_json())},
        {"energy", json::parse(word_quantizers_->energy.to_json())}};
  }
  if (word_codebook_) j["word_codebook"] = word_codebook_->to_json(full_precision);
  return j;
}

HierarchicalPredictor HierarchicalPredictor::from_json(const json& j) {
  HierarchicalPredictor h;
  h.word_ = std::make_unique<WordPredictor>(WordPredictor::from_json(j.at("word")));
  h.phoneme_ = std::make_unique<PhonemePredictor>(
      PhonemePredictor::from_json(j.at("phoneme")));
  h.n_bins_ = j.value("n_bins", 256);
  if (j.contains("table_f0")) {
    h.table_f0_ = std::make_unique<Network>(Network::from_json(j["table_f0"]));
  }
  if (j.contains("table_energy")) {
    h.table_energy_ =
        std::make_unique<Network>(Network::from_json(j["table_energy"]));
  }
  if (j.contains("table_code")) {
    h.table_code_ =
        std::make_unique<Network>(Network::from_json(j["table_code"]));
  }
  h.embed_discrete_ = j.value("embed_discrete", true);
  if (j.contains("projection")) {
    h.projection_ =
        std::make_unique<Network>(Network::from_json(j["projection"]));
  }
  if (j.contains("word_quantizers")) {
    h.word_quantizers_ = RuleQuantizers{
        Quantizer::from_json(j["word_quantizers"]["f0"].dump()),
        Quantizer::from_json(j["word_quantizers"]["energy"].dump())};
  }
  if (j.contains("word_codebook")) {
    h.word_codebook_ = vq::Codebook::from_json(j["word_codebook"]);
  }
  return h;
}

ProsodyLabelSet labels_from_prediction(const Tensor& continuous,
                                       LabelKind kind, TokenLevel level,
                                       const std::string& utterance_id,
                                       const RuleQuantizers* quantizers,
                                       const vq::Codebook* codebook) {
  ProsodyLabelSet set;
  set.utterance_id = utterance_id;
  set.kind = kind;
  set.level = level;
  const int n = continuous.rank() == 2 ? continuous.dim(0) : 0;
  if (kind == LabelKind::rule_based) {
    if (quantizers == nullptr) {
      throw ConfigError("rule-based discretization needs fitted quantizers");
    }
    for (int i = 0; i < n; ++i) {
      set.rule.push_back({quantizers->f0.quantize(continuous.at(i, 0)),
                          quantizers->energy.quantize(continuous.at(i, 1))});
    }
  } else {
    if (codebook == nullptr) {
      throw ConfigError("neural-based discretization needs a codebook");
    }
    for (int i = 0; i < n; ++i) {
      std::vector<double> z(codebook->dim);
      for (int k = 0; k < codebook->dim; ++k) z[k] = continuous.at(i, k);
      const auto q = vq::quantize_latent(z, *codebook);
      NeuralLabel label;
      label.codeword = q.index;
      for (int k = 0; k < 3 && k < codebook->dim; ++k) {
        label.latent[k] = q.codeword[k];
      }
      set.neural.push_back(label);
    }
  }
  return set;
}

}  // namespace prosody::pred
