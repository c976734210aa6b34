#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tdh/dataio.hpp"
#include "tdh/error.hpp"
#include "tdh/metrics.hpp"
#include "tdh/retrieval.hpp"
#include "tdh/trainer.hpp"

namespace tdh::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error("usage", message) {}
};

struct GenDataArgs {
  fs::path out;
  std::size_t classes = 4;
  std::size_t per_class = 100;
  std::size_t d_x = 64;
  std::size_t d_y = 96;
  std::size_t latent = 16;
  double noise = 0.2;
  double multilabel = 0.0;
  double query_fraction = 0.1;
  std::size_t train_size = 0;
  std::optional<std::uint64_t> seed;
};

struct TrainArgs {
  fs::path config;
  fs::path data_dir;
  fs::path out;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  std::size_t checkpoint_every = 0;
  std::size_t log_every = 10;
};

struct EncodeArgs {
  fs::path checkpoint;
  fs::path data_dir;
  fs::path out;
  std::string modality;
  std::string split = "retrieval";
};

struct RetrieveArgs {
  fs::path index;
  fs::path query;
  fs::path checkpoint;
  std::string modality;
  std::size_t top = 10;
};

struct EvalArgs {
  fs::path checkpoint;
  fs::path data_dir;
  fs::path out;
  std::vector<std::size_t> topn{1, 5, 10, 20, 50, 100};
  std::optional<std::size_t> r_cap;
};

struct ExportArgs {
  fs::path queries;
  fs::path database;
  fs::path out;
  std::vector<std::size_t> topn{1, 5, 10, 20, 50, 100};
  std::optional<std::size_t> r_cap;
};

// --seed, then the config file, then TDH_SEED, then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::optional<std::uint64_t> from_config) {
  if (flag) return *flag;
  if (from_config) return *from_config;
  if (const char* env = std::getenv("TDH_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t value = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto [ptr, ec] = std::from_chars(env, end, value);
    if (ec != std::errc() || ptr != end) throw UsageError("TDH_SEED is not an unsigned integer: '" + std::string(env) + "'");
    return value;
  }
  return 0;
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " not found: " + path.string());
}

void require_dir(const fs::path& path, const char* what) {
  if (!fs::is_directory(path)) throw IoError(std::string(what) + " not found: " + path.string());
}

void require_checkpoint(const fs::path& dir) {
  require_dir(dir, "checkpoint directory");
  require_file(dir / "params_x.tdh", "text encoder");
  require_file(dir / "params_y.tdh", "image encoder");
}

void require_dataset(const fs::path& dir) {
  require_dir(dir, "data directory");
  for (const char* name : {"features_x.csv", "features_y.csv", "labels.csv"}) require_file(dir / name, "dataset file");
}

void require_index(const fs::path& dir) {
  require_dir(dir, "index directory");
  require_file(dir / "codes.tdhbin", "index codes");
  require_file(dir / "manifest.csv", "index manifest");
}

EncoderParams encoder_for(const fs::path& checkpoint, Modality modality) {
  return load_encoder(checkpoint / (modality == Modality::text ? "params_x.tdh" : "params_y.tdh"));
}

template <typename T>
std::vector<T> pick(const std::vector<T>& items, const std::vector<std::size_t>& indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(items[i]);
  return out;
}

RetrievalIndex index_subset(const BimodalDataset& ds, const EncoderParams& params, Modality modality,
                            const std::vector<std::size_t>& subset) {
  const Matrix& features = modality == Modality::text ? ds.x : ds.y;
  return build_index(params, features.select_cols(subset), pick(ds.ids, subset), pick(ds.labels, subset));
}

std::vector<std::size_t> usable_topn(const std::vector<std::size_t>& requested, std::size_t database_size) {
  std::vector<std::size_t> out;
  for (std::size_t n : requested) {
    if (n == 0) throw UsageError("--topn values must be >= 1");
    if (!out.empty() && n <= out.back()) throw UsageError("--topn values must be strictly ascending");
    if (n <= database_size) out.push_back(n);
  }
  return out;
}

EvalReport evaluate_pair(const RetrievalIndex& queries, const RetrievalIndex& database,
                         const std::vector<std::size_t>& topn, std::optional<std::size_t> r_cap) {
  EvalOptions opts;
  opts.r_cap = r_cap;
  return evaluate(queries, database, usable_topn(topn, database.size()), opts);
}

void cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  SyntheticSpec spec;
  spec.num_classes = a.classes;
  spec.per_class = a.per_class;
  spec.d_x = a.d_x;
  spec.d_y = a.d_y;
  spec.latent_dim = a.latent;
  spec.noise_sigma = a.noise;
  spec.multilabel_rate = a.multilabel;
  spec.query_fraction = a.query_fraction;
  spec.train_size = a.train_size;
  spec.seed = resolve_seed(a.seed, std::nullopt);
  const BimodalDataset ds = generate_synthetic(spec);
  save_dataset(a.out, ds);
  out << "wrote " << ds.size() << " instances to " << a.out.string() << '\n';
}

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.config, "config file");
  require_dataset(a.data_dir);
  bool seed_in_config = false;
  TrainConfig config = load_train_config(a.config, &seed_in_config);
  config.seed = resolve_seed(a.seed, seed_in_config ? std::optional(config.seed) : std::nullopt);
  config.validate();
  SplitSpec split;
  split.seed = config.seed;
  const BimodalDataset ds = load_dataset_dir(a.data_dir, split);

  TrainOptions opts;
  opts.checkpoint_dir = a.out;
  opts.checkpoint_every = a.checkpoint_every;
  opts.resume = a.resume;
  if (a.log_every > 0) {
    opts.on_epoch = [&err, every = a.log_every](std::size_t epoch, const LossBreakdown& l) {
      if (epoch % every == 0) err << "epoch " << epoch << " total " << format_real(l.total) << '\n';
    };
  }
  const TrainResult result = train(ds, config, opts);
  std::ofstream cfg(a.out / "config.txt", std::ios::trunc);
  if (!cfg) throw IoError("cannot write " + (a.out / "config.txt").string());
  write_train_config(cfg, config);
  out << "trained " << result.loss_history.size() << " epochs; checkpoint in " << a.out.string() << '\n';
  if (!result.loss_history.empty()) out << "final total " << format_real(result.loss_history.back().total) << '\n';
}

std::vector<std::size_t> split_members(const BimodalDataset& ds, const std::string& name) {
  if (name == "query") return ds.split.query;
  if (name == "retrieval") return ds.split.retrieval;
  if (name == "train") return ds.split.train;
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

void cmd_encode(const EncodeArgs& a, std::ostream& out) {
  const Modality modality = parse_modality(a.modality);
  require_checkpoint(a.checkpoint);
  require_dataset(a.data_dir);
  const EncoderParams params = encoder_for(a.checkpoint, modality);
  const BimodalDataset ds = load_dataset_dir(a.data_dir);
  const RetrievalIndex index = index_subset(ds, params, modality, split_members(ds, a.split));
  save_index(a.out, index);
  out << "indexed " << index.size() << ' ' << to_string(modality) << " items (" << index.bits() << " bits) in "
      << a.out.string() << '\n';
}

void cmd_retrieve(const RetrieveArgs& a, std::ostream& out) {
  const Modality modality = parse_modality(a.modality);
  if (a.top == 0) throw UsageError("--top must be >= 1");
  require_index(a.index);
  require_file(a.query, "query file");
  require_checkpoint(a.checkpoint);
  const RetrievalIndex index = load_index(a.index);
  const EncoderParams params = encoder_for(a.checkpoint, modality);
  const Matrix queries = read_feature_csv(a.query);
  if (queries.rows() != params.input_dim()) {
    throw ShapeError("query features have " + std::to_string(queries.rows()) + " values per line, the " +
                     std::string(to_string(modality)) + " encoder expects " + std::to_string(params.input_dim()));
  }
  const CodeMatrix codes = encode_out_of_sample(params, queries);
  if (codes.bits() != index.bits()) {
    throw ShapeError("encoder emits " + std::to_string(codes.bits()) + "-bit codes, index holds " +
                     std::to_string(index.bits()) + "-bit codes");
  }
  for (std::size_t q = 0; q < codes.count(); ++q) {
    if (q > 0) out << '\n';
    for (const Hit& h : rank(index, BinaryCode::from(codes, q), a.top)) out << h.id << ',' << h.distance << '\n';
  }
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  require_checkpoint(a.checkpoint);
  require_dataset(a.data_dir);
  const EncoderParams text = encoder_for(a.checkpoint, Modality::text);
  const EncoderParams image = encoder_for(a.checkpoint, Modality::image);
  const BimodalDataset ds = load_dataset_dir(a.data_dir);
  const auto i2t = evaluate_pair(index_subset(ds, image, Modality::image, ds.split.query),
                                 index_subset(ds, text, Modality::text, ds.split.retrieval), a.topn, a.r_cap);
  const auto t2i = evaluate_pair(index_subset(ds, text, Modality::text, ds.split.query),
                                 index_subset(ds, image, Modality::image, ds.split.retrieval), a.topn, a.r_cap);
  write_report(a.out / "image_to_text", i2t);
  write_report(a.out / "text_to_image", t2i);
  out << "image_to_text map " << format_real(i2t.map) << '\n';
  out << "text_to_image map " << format_real(t2i.map) << '\n';
}

void cmd_export_curves(const ExportArgs& a, std::ostream& out) {
  require_index(a.queries);
  require_index(a.database);
  const RetrievalIndex queries = load_index(a.queries);
  const RetrievalIndex database = load_index(a.database);
  const EvalReport report = evaluate_pair(queries, database, a.topn, a.r_cap);
  write_report(a.out, report);
  out << "map " << format_real(report.map) << '\n';
}

int exit_code_for(const Error& e) {
  const std::string& c = e.category();
  if (c == "usage") return kUsage;
  if (c == "io") return kIo;
  if (c == "numeric") return kNumeric;
  return kInvalidInput;
}

const char* const kFooter =
    "Exit codes: 0 success, 1 internal error, 2 usage error, 3 I/O error,\n"
    "4 invalid input (malformed file or invariant violation), 5 numeric failure.\n"
    "Errors print one line to stderr: `error: <category>: <message>`.\n"
    "Seeds: --seed, else the config file's `seed`, else $TDH_SEED, else 0.";

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app("Triplet-based deep hashing for cross-modal retrieval", "tdh");
  app.option_defaults()->always_capture_default();
  app.footer(kFooter);
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic bimodal dataset directory");
  gen_cmd->add_option("--out", gen.out, "Output dataset directory")->required();
  gen_cmd->add_option("--classes", gen.classes, "Number of classes")->check(CLI::Range(2ul, 1ul << 20));
  gen_cmd->add_option("--per-class", gen.per_class, "Instances per class")->check(CLI::Range(2ul, 1ul << 24));
  gen_cmd->add_option("--dx", gen.d_x, "Text feature dimension")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--dy", gen.d_y, "Image feature dimension")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--latent", gen.latent, "Latent prototype dimension")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise standard deviation")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--multilabel", gen.multilabel, "Fraction of instances with a second label")
      ->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--query-fraction", gen.query_fraction, "Fraction of instances in the query split")
      ->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--train-size", gen.train_size, "Training instances drawn from retrieval (0 = all)");
  gen_cmd->add_option("--seed", gen.seed, "Random seed (default: $TDH_SEED, else 0)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train both encoders and write a checkpoint directory");
  train_cmd->add_option("--config", tr.config, "Training config file (key = value lines)")->required();
  train_cmd->add_option("--data-dir", tr.data_dir, "Dataset directory")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint directory")->required();
  train_cmd->add_option("--seed", tr.seed, "Random seed (default: config `seed`, else $TDH_SEED, else 0)");
  train_cmd->add_flag("--resume", tr.resume, "Continue from the checkpoint in --out when present");
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "Also checkpoint every N epochs (0 = only at the end)");
  train_cmd->add_option("--log-every", tr.log_every, "Print the objective to stderr every N epochs (0 = never)");

  EncodeArgs en;
  auto* encode_cmd = app.add_subcommand("encode", "Hash one split of a dataset into an index directory");
  encode_cmd->add_option("--checkpoint", en.checkpoint, "Checkpoint directory")->required();
  encode_cmd->add_option("--data-dir", en.data_dir, "Dataset directory")->required();
  encode_cmd->add_option("--modality", en.modality, "Which encoder and features to use")
      ->required()
      ->check(CLI::IsMember({"text", "image"}));
  encode_cmd->add_option("--split", en.split, "Instances to index")->check(CLI::IsMember({"query", "retrieval", "train", "all"}));
  encode_cmd->add_option("--out", en.out, "Output index directory")->required();

  RetrieveArgs re;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank an index against query features (prints id,distance)");
  retrieve_cmd->add_option("--index", re.index, "Index directory written by `encode`")->required();
  retrieve_cmd->add_option("--query", re.query, "Query feature CSV, one query per line")->required();
  retrieve_cmd->add_option("--modality", re.modality, "Modality of the query features")
      ->required()
      ->check(CLI::IsMember({"text", "image"}));
  retrieve_cmd->add_option("--checkpoint", re.checkpoint, "Checkpoint directory")->required();
  retrieve_cmd->add_option("--top", re.top, "Hits per query");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Cross-modal MAP, precision-recall and top-N curves on the query split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--data-dir", ev.data_dir, "Dataset directory")->required();
  eval_cmd->add_option("--out", ev.out, "Report directory")->required();
  eval_cmd->add_option("--topn", ev.topn, "Ascending cut-offs for top-N precision")->delimiter(',');
  eval_cmd->add_option("--r-cap", ev.r_cap, "Ranked-list cut-off for AP (default: whole list)");

  ExportArgs ex;
  auto* export_cmd = app.add_subcommand("export-curves", "Curve CSVs for a query index against a database index");
  export_cmd->add_option("--queries", ex.queries, "Query index directory (with labels)")->required();
  export_cmd->add_option("--database", ex.database, "Database index directory (with labels)")->required();
  export_cmd->add_option("--out", ex.out, "Report directory")->required();
  export_cmd->add_option("--topn", ex.topn, "Ascending cut-offs for top-N precision")->delimiter(',');
  export_cmd->add_option("--r-cap", ex.r_cap, "Ranked-list cut-off for AP (default: whole list)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help("", CLI::AppFormatMode::All) : app.help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*gen_cmd) cmd_gen_data(gen, out);
    if (*train_cmd) cmd_train(tr, out, err);
    if (*encode_cmd) cmd_encode(en, out);
    if (*retrieve_cmd) cmd_retrieve(re, out);
    if (*eval_cmd) cmd_eval(ev, out);
    if (*export_cmd) cmd_export_curves(ex, out);
  } catch (const Error& e) {
    err << "error: " << e.category() << ": " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: io: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}

}  // namespace tdh::cli
