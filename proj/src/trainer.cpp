#include "tdh/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tdh/error.hpp"
#include "tdh/metrics.hpp"

namespace tdh {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent stream per (seed, epoch, purpose); a resumed run draws the
// same numbers as an uninterrupted one.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t epoch, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32),
                    purpose};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kEpochStream = 1;
constexpr std::uint32_t kMonitorStream = 2;

EncoderConfig encoder_config(const TrainConfig& config, std::size_t input_dim) {
  return {input_dim, config.hidden_dims, config.code_length, config.activation};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_value(std::string_view text, const std::string& where) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw InvalidArgument(where + ": invalid value '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view text, const std::string& where) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw InvalidArgument(where + ": expected true|false, got '" + std::string(text) + "'");
}

}  // namespace

HyperParams TrainConfig::hyper_params() const {
  HyperParams hp = HyperParams::defaults_for(code_length);
  if (alpha >= 0.0) hp.alpha = alpha;
  hp.gamma = gamma;
  hp.eta = eta;
  hp.beta = beta;
  return hp;
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  if (lr_decay_every == 0) return learning_rate;
  return learning_rate * std::pow(lr_decay, static_cast<double>(epoch / lr_decay_every));
}

void TrainConfig::validate() const {
  if (code_length == 0) throw InvalidArgument("code_length must be >= 1");
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  if (positives_per_anchor == 0 || negatives_per_anchor == 0) {
    throw InvalidArgument("positives_per_anchor and negatives_per_anchor must be >= 1");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be >= 0");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvalidArgument("lr_decay must be in (0, 1]");
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be > 0");
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw InvalidArgument("hidden_dims entries must be >= 1");
  }
  hyper_params().validate();
}

TrainConfig parse_train_config(std::istream& in, const std::string& source_name, bool* seed_set) {
  TrainConfig c;
  if (seed_set != nullptr) *seed_set = false;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source_name, line_no, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const std::string where = source_name + ":" + std::to_string(line_no) + ": " + key;
    try {
      if (key == "code_length") {
        c.code_length = parse_value<std::size_t>(value, where);
      } else if (key == "hidden_dims") {
        c.hidden_dims.clear();
        if (value != "none" && !value.empty()) {
          std::size_t start = 0;
          while (true) {
            const auto comma = value.find(',', start);
            c.hidden_dims.push_back(parse_value<std::size_t>(
                trim(value.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)),
                where));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
          }
        }
      } else if (key == "activation") {
        c.activation = parse_activation(value);
      } else if (key == "batch_size") {
        c.batch_size = parse_value<std::size_t>(value, where);
      } else if (key == "outer_iterations") {
        c.outer_iterations = parse_value<std::size_t>(value, where);
      } else if (key == "learning_rate") {
        c.learning_rate = parse_value<double>(value, where);
      } else if (key == "lr_decay") {
        c.lr_decay = parse_value<double>(value, where);
      } else if (key == "lr_decay_every") {
        c.lr_decay_every = parse_value<std::size_t>(value, where);
      } else if (key == "anchors_per_batch") {
        c.anchors_per_batch = parse_value<std::size_t>(value, where);
      } else if (key == "positives_per_anchor") {
        c.positives_per_anchor = parse_value<std::size_t>(value, where);
      } else if (key == "negatives_per_anchor") {
        c.negatives_per_anchor = parse_value<std::size_t>(value, where);
      } else if (key == "seed") {
        c.seed = parse_value<std::uint64_t>(value, where);
        if (seed_set != nullptr) *seed_set = true;
      } else if (key == "alpha") {
        c.alpha = parse_value<double>(value, where);
      } else if (key == "gamma") {
        c.gamma = parse_value<double>(value, where);
      } else if (key == "eta") {
        c.eta = parse_value<double>(value, where);
      } else if (key == "beta") {
        c.beta = parse_value<double>(value, where);
      } else if (key == "anchor_only_gradients") {
        c.anchor_only_gradients = parse_bool(value, where);
      } else if (key == "similarity") {
        if (value == "share_any") {
          c.similarity = SimilarityRule::share_any;
        } else if (value == "exact_match") {
          c.similarity = SimilarityRule::exact_match;
        } else {
          throw InvalidArgument(where + ": expected share_any|exact_match");
        }
      } else {
        throw ParseError(source_name, line_no, "unknown key '" + key + "'");
      }
    } catch (const InvalidArgument& e) {
      throw ParseError(source_name, line_no, e.what());
    }
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path, bool* seed_set) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_train_config(in, path.string(), seed_set);
}

void write_train_config(std::ostream& out, const TrainConfig& c) {
  out << "code_length = " << c.code_length << '\n';
  out << "hidden_dims = ";
  if (c.hidden_dims.empty()) out << "none";
  for (std::size_t i = 0; i < c.hidden_dims.size(); ++i) out << (i > 0 ? "," : "") << c.hidden_dims[i];
  out << '\n';
  out << "activation = " << to_string(c.activation) << '\n';
  out << "batch_size = " << c.batch_size << '\n';
  out << "outer_iterations = " << c.outer_iterations << '\n';
  out << "learning_rate = " << format_real(c.learning_rate) << '\n';
  out << "lr_decay = " << format_real(c.lr_decay) << '\n';
  out << "lr_decay_every = " << c.lr_decay_every << '\n';
  out << "anchors_per_batch = " << c.anchors_per_batch << '\n';
  out << "positives_per_anchor = " << c.positives_per_anchor << '\n';
  out << "negatives_per_anchor = " << c.negatives_per_anchor << '\n';
  out << "seed = " << c.seed << '\n';
  out << "alpha = " << format_real(c.alpha) << '\n';
  out << "gamma = " << format_real(c.gamma) << '\n';
  out << "eta = " << format_real(c.eta) << '\n';
  out << "beta = " << format_real(c.beta) << '\n';
  out << "anchor_only_gradients = " << (c.anchor_only_gradients ? "true" : "false") << '\n';
  out << "similarity = " << (c.similarity == SimilarityRule::share_any ? "share_any" : "exact_match")
      << '\n';
}

TripletSample sample_triplets(std::span<const LabelSet> labels, std::span<const std::size_t> anchors,
                              std::size_t m1, std::size_t m2, std::mt19937_64& rng) {
  if (m1 == 0 || m2 == 0) throw InvalidArgument("sample_triplets: m1 and m2 must be >= 1");
  TripletSample out;
  out.triplets.reserve(anchors.size() * m1 * m2);
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  for (std::size_t q : anchors) {
    if (q >= labels.size()) throw InvalidArgument("sample_triplets: anchor " + std::to_string(q) + " out of range");
    positives.clear();
    negatives.clear();
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels_overlap(labels[q], labels[j])) {
        if (j != q) positives.push_back(j);
      } else {
        negatives.push_back(j);
      }
    }
    if (positives.empty() || negatives.empty()) {
      ++out.skipped_anchors;
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick_pos(0, positives.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_neg(0, negatives.size() - 1);
    std::vector<std::size_t> ps(m1);
    std::vector<std::size_t> ns(m2);
    for (auto& p : ps) p = positives[pick_pos(rng)];
    for (auto& n : ns) n = negatives[pick_neg(rng)];
    for (std::size_t p : ps)
      for (std::size_t n : ns) out.triplets.push_back({q, p, n});
  }
  if (!anchors.empty() && out.skipped_anchors == anchors.size()) {
    throw InvalidArgument("sample_triplets: none of the " + std::to_string(anchors.size()) +
                          " anchors has both a positive and a negative candidate");
  }
  return out;
}

TrainingData TrainingData::from(const BimodalDataset& dataset, const TrainConfig& config) {
  config.validate();
  dataset.validate();
  const auto& idx = dataset.split.train;
  if (idx.empty()) throw InvalidArgument("training split is empty");
  std::vector<LabelSet> labels;
  labels.reserve(idx.size());
  for (std::size_t i : idx) labels.push_back(dataset.labels[i]);
  SimilarityGraph graph = build_graph(labels, config.similarity);
  CodeUpdater updater(graph.laplacian, config.gamma, config.beta);

  std::vector<std::size_t> all(idx.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto rng = stream_rng(config.seed, 0, kMonitorStream);
  auto monitor = sample_triplets(labels, all, 1, 1, rng).triplets;

  return TrainingData{dataset.x.select_cols(idx), dataset.y.select_cols(idx), std::move(labels),
                      std::move(graph),           std::move(updater),         std::move(monitor)};
}

void refresh_outputs(TrainState& state, const TrainingData& data) {
  state.g = encode(state.params_x, data.x);
  state.f = encode(state.params_y, data.y);
}

TrainState init_state(const TrainingData& data, const TrainConfig& config) {
  config.validate();
  TrainState state;
  state.params_x = init_encoder(encoder_config(config, data.x.rows()), splitmix64(config.seed ^ 0x1));
  state.params_y = init_encoder(encoder_config(config, data.y.rows()), splitmix64(config.seed ^ 0x2));
  refresh_outputs(state, data);
  state.b = data.updater.update(state.f, state.g);
  return state;
}

Matrix modality_step(TrainState& state, const TrainingData& data, const TrainConfig& config,
                     Modality modality, std::span<const std::size_t> batch,
                     std::span<const TripletLabel> triplets, double learning_rate) {
  const bool text = modality == Modality::text;
  EncoderParams& params = text ? state.params_x : state.params_y;
  Matrix& outputs = text ? state.g : state.f;
  const Matrix& features = text ? data.x : data.y;

  ForwardResult fwd = forward(params, features.select_cols(batch));
  for (std::size_t j = 0; j < batch.size(); ++j) outputs.set_col(batch[j], fwd.codes.col(j));

  const HyperParams hp = config.hyper_params();
  const GradientMode mode = config.anchor_only_gradients ? GradientMode::anchor_only : GradientMode::full;
  const Matrix grad = text ? grad_g(state.f, state.g, state.b, triplets, hp, mode)
                           : grad_f(state.f, state.g, state.b, triplets, hp, mode);
  Matrix upstream = grad.select_cols(batch);
  if (learning_rate > 0.0) {
    const BackwardResult bwd = backward(params, fwd.tape, upstream);
    const double scale = static_cast<double>(batch.size()) * static_cast<double>(outputs.cols());
    params = sgd_step(params, bwd.param_grads, learning_rate / scale);
  }
  return upstream;
}

TrainState train_epoch(TrainState state, const TrainConfig& config, const TrainingData& data) {
  const std::size_t n = data.size();
  refresh_outputs(state, data);
  state.b = data.updater.update(state.f, state.g);

  auto rng = stream_rng(config.seed, state.iteration, kEpochStream);
  const double lr = config.learning_rate_at(state.iteration);
  std::vector<std::size_t> order(n);
  for (Modality modality : {Modality::text, Modality::image}) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(config.batch_size, n - start));
      const auto anchors = batch.first(std::min(config.anchors(), batch.size()));
      const auto sample = sample_triplets(data.labels, anchors, config.positives_per_anchor,
                                          config.negatives_per_anchor, rng);
      modality_step(state, data, config, modality, batch, sample.triplets, lr);
    }
  }

  refresh_outputs(state, data);
  const LossBreakdown loss = total_loss(state.f, state.g, state.b, data.graph.laplacian,
                                        data.monitor_triplets, config.hyper_params());
  const std::pair<const char*, double> terms[] = {
      {"j_inter", loss.j_inter}, {"j_intra", loss.j_intra}, {"j_re", loss.j_re}, {"total", loss.total}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      throw NumericError("epoch " + std::to_string(state.iteration + 1) + ": " + name +
                         " is not finite (" + format_real(value) + "); lower learning_rate");
    }
  }
  state.loss_history.push_back(loss);
  ++state.iteration;
  return state;
}

void write_history_csv(const std::filesystem::path& path, std::span<const LossBreakdown> history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,j_inter,j_intra,j_re,total\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& h = history[e];
    out << (e + 1) << ',' << format_real(h.j_inter) << ',' << format_real(h.j_intra) << ','
        << format_real(h.j_re) << ',' << format_real(h.total) << '\n';
  }
}

std::vector<LossBreakdown> read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<LossBreakdown> history;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (fields.size() != 5) throw ParseError(path.string(), line_no, "expected 5 fields");
    try {
      const auto epoch = parse_value<std::size_t>(fields[0], "epoch");
      if (epoch != history.size() + 1) throw ParseError(path.string(), line_no, "epochs out of sequence");
      history.push_back({parse_value<double>(fields[1], "j_inter"), parse_value<double>(fields[2], "j_intra"),
                         parse_value<double>(fields[3], "j_re"), parse_value<double>(fields[4], "total")});
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return history;
}

void save_checkpoint(const std::filesystem::path& dir, const EncoderParams& params_x,
                     const EncoderParams& params_y, const CodeMatrix& codes,
                     std::span<const LossBreakdown> history) {
  std::filesystem::create_directories(dir);
  save_encoder(dir / "params_x.tdh", params_x, Modality::text);
  save_encoder(dir / "params_y.tdh", params_y, Modality::image);
  save_codes(dir / "codes.tdhbin", PackedCodes::from(codes));
  write_history_csv(dir / "history.csv", history);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  Checkpoint c;
  Modality mx{};
  Modality my{};
  c.params_x = load_encoder(dir / "params_x.tdh", &mx);
  c.params_y = load_encoder(dir / "params_y.tdh", &my);
  if (mx != Modality::text || my != Modality::image) {
    throw IoError(dir.string() + ": encoder modality tags do not match params_x/params_y");
  }
  c.codes = load_codes(dir / "codes.tdhbin").unpack();
  c.history = read_history_csv(dir / "history.csv");
  return c;
}

TrainResult train(const BimodalDataset& dataset, const TrainConfig& config, const TrainOptions& options) {
  const TrainingData data = TrainingData::from(dataset, config);
  TrainState state;
  const bool resuming = options.resume && options.checkpoint_dir &&
                        std::filesystem::exists(*options.checkpoint_dir / "history.csv");
  if (resuming) {
    Checkpoint ckpt = load_checkpoint(*options.checkpoint_dir);
    const auto expected_x = encoder_config(config, data.x.rows()).layer_dims();
    const auto expected_y = encoder_config(config, data.y.rows()).layer_dims();
    if (ckpt.params_x.layer_dims() != expected_x || ckpt.params_y.layer_dims() != expected_y ||
        ckpt.params_x.activation != config.activation || ckpt.params_y.activation != config.activation) {
      throw InvalidArgument("checkpoint in " + options.checkpoint_dir->string() +
                            " does not match the configured architecture");
    }
    state.params_x = std::move(ckpt.params_x);
    state.params_y = std::move(ckpt.params_y);
    state.loss_history = std::move(ckpt.history);
    state.iteration = state.loss_history.size();
    refresh_outputs(state, data);
    state.b = data.updater.update(state.f, state.g);
  } else {
    state = init_state(data, config);
  }

  while (state.iteration < config.outer_iterations) {
    state = train_epoch(std::move(state), config, data);
    if (options.on_epoch) options.on_epoch(state.iteration, state.loss_history.back());
    if (options.checkpoint_dir && options.checkpoint_every > 0 &&
        state.iteration % options.checkpoint_every == 0 && state.iteration < config.outer_iterations) {
      save_checkpoint(*options.checkpoint_dir, state.params_x, state.params_y, state.b, state.loss_history);
    }
  }

  // Codes for the final parameters.
  refresh_outputs(state, data);
  state.b = data.updater.update(state.f, state.g);
  if (options.checkpoint_dir) {
    save_checkpoint(*options.checkpoint_dir, state.params_x, state.params_y, state.b, state.loss_history);
  }
  return {std::move(state.params_x), std::move(state.params_y), std::move(state.b),
          std::move(state.loss_history)};
}

}  // namespace tdh
