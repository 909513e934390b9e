// SPDX-License-Identifier: Apache-2.0
#include "glowcast/app/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "glowcast/app/pipeline.hpp"
#include "glowcast/data/preprocess.hpp"
#include "glowcast/data/synth.hpp"
#include "glowcast/error.hpp"
#include "glowcast/model/checkpoint.hpp"
#include "glowcast/model/config_json.hpp"
#include "glowcast/numerics/tape.hpp"

namespace glowcast {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Flags that override the JSON config; unset ones leave it alone.
struct Overrides {
  std::optional<std::string> config, data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> hidden, layers, heads, embed, history, horizon;
  std::optional<std::string> attention_source;
  bool no_attention = false;
  std::optional<std::size_t> epochs, patience, batch;
  std::optional<double> lr, tau, clip, sigma;
  std::optional<std::vector<std::size_t>> milestones;
  std::optional<std::vector<double>> ratios;
  std::optional<std::size_t> var_order;

  void add_to(CLI::App* cmd, bool with_data) {
    cmd->add_option("--config", config, "JSON run config (flags take precedence)")->check(CLI::ExistingFile);
    if (with_data) cmd->add_option("--data", data, "panel CSV (date column + one column per station)");
    cmd->add_option("--seed", seed, "seed for initialization, shuffling and sampling");
    cmd->add_option("--workers", workers, "evaluation threads")->check(CLI::PositiveNumber);
    cmd->add_option("--hidden", hidden, "hidden width d_h")->check(CLI::PositiveNumber);
    cmd->add_option("--layers", layers, "GCRN layers")->check(CLI::PositiveNumber);
    cmd->add_option("--heads", heads, "attention heads")->check(CLI::PositiveNumber);
    cmd->add_option("--embed", embed, "node embedding width")->check(CLI::PositiveNumber);
    cmd->add_option("--history", history, "history length T")->check(CLI::PositiveNumber);
    cmd->add_option("--horizon", horizon, "forecast horizon H")->check(CLI::PositiveNumber);
    cmd->add_option("--attention-source", attention_source, "encoder or raw")
        ->check(CLI::IsMember({"encoder", "raw"}));
    cmd->add_flag("--no-attention", no_attention, "plain GCRN encoder-decoder");
    cmd->add_option("--epochs", epochs, "maximum epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--patience", patience, "early-stopping patience in epochs");
    cmd->add_option("--batch", batch, "minibatch size")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", lr, "base learning rate");
    cmd->add_option("--tau", tau, "curriculum constant");
    cmd->add_option("--clip", clip, "gradient clipping norm (<= 0 disables)");
    cmd->add_option("--milestones", milestones, "epochs at which the learning rate decays");
    cmd->add_option("--sigma", sigma, "smoothing width in days");
    cmd->add_option("--ratios", ratios, "train val test shares")->expected(3);
    cmd->add_option("--var-order", var_order, "VAR lag order")->check(CLI::PositiveNumber);
  }

  RunConfig resolve_config() const {
    RunConfig c;
    if (config) {
      std::ifstream in(*config);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("cannot parse " + *config + ": " + e.what());
      }
      merge_json(j, c);
    }
    if (data) c.data = *data;
    if (seed) c.seed = *seed;
    if (workers) c.workers = *workers;
    if (hidden) c.model.hidden_width = *hidden;
    if (layers) c.model.layers = *layers;
    if (heads) c.model.heads = *heads;
    if (embed) c.model.embed_width = *embed;
    if (history) c.model.history_len = *history;
    if (horizon) c.model.horizon = *horizon;
    if (attention_source) c.model.attention_source = parse_attention_source(*attention_source);
    if (no_attention) c.model.use_attention = false;
    if (epochs) c.train.max_epochs = *epochs;
    if (patience) c.train.patience = *patience;
    if (batch) c.train.batch_size = *batch;
    if (lr) c.train.base_lr = *lr;
    if (tau) c.train.curriculum_tau = *tau;
    if (clip) c.train.clip_norm = *clip;
    if (milestones) c.train.milestones = *milestones;
    if (sigma) c.pipeline.sigma = *sigma;
    if (ratios) c.pipeline.ratios = {(*ratios)[0], (*ratios)[1], (*ratios)[2]};
    if (var_order) c.pipeline.var_order = *var_order;
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IngestError("cannot write " + path.string());
}

StationPanel load_panel(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("no input data: pass --data or set \"data\" in the config");
  return ingest_csv(c.data);
}

// Evaluate and predict take the model from the checkpoint and everything else
// from the echoed run config beside it (or --config), then apply flags.
RunConfig config_for_checkpoint(const Overrides& flags, const fs::path& checkpoint, const Checkpoint& ckpt) {
  Overrides o = flags;
  const fs::path echoed = checkpoint.parent_path() / "config.json";
  if (!o.config && fs::exists(echoed)) o.config = echoed.string();
  RunConfig c = o.resolve_config();
  c.model = ckpt.config;
  return c;
}

int cmd_synth(std::size_t n, std::size_t days, std::uint64_t seed, std::size_t lag,
              const std::optional<std::string>& out_dir, std::ostream& out) {
  SynthOptions o;
  o.stations = n;
  o.days = days;
  o.seed = seed;
  o.lag = lag;
  const SynthDataset ds = synth_generate(o);
  const fs::path dir = out_dir ? fs::path(*out_dir) : create_run_dir(seed);
  fs::create_directories(dir);
  export_csv(ds.panel, dir / "panel.csv");
  std::ostringstream graph;
  write_matrix_csv(ds.coupling, n, graph);
  write_text(dir / "graph.csv", graph.str());
  out << "wrote " << (dir / "panel.csv").string() << " (" << days << " days x " << n
      << " stations) and " << (dir / "graph.csv").string() << "\n";
  return 0;
}

int cmd_preprocess(const Overrides& flags, const std::optional<std::string>& out_path, std::ostream& out) {
  RunConfig c = flags.resolve_config();
  const StationPanel raw = load_panel(c);
  c.resolve(raw.stations());
  const fs::path dir = create_run_dir(c.seed);
  write_text(dir / "config.json", to_json(c).dump(2) + "\n");
  const StationPanel clean = preprocess(raw, c.pipeline);
  const fs::path dest = out_path ? fs::path(*out_path) : dir / "preprocessed.csv";
  export_csv(clean, dest);
  out << "imputed " << raw.missing_count() << " missing values, smoothed with sigma "
      << c.pipeline.sigma << "; wrote " << dest.string() << "\n";
  return 0;
}

int cmd_train(const Overrides& flags, std::ostream& out) {
  RunConfig c = flags.resolve_config();
  const StationPanel raw = load_panel(c);
  c.resolve(raw.stations());
  const fs::path dir = create_run_dir(c.seed);
  write_text(dir / "config.json", to_json(c).dump(2) + "\n");
  out << "run directory " << dir.string() << "\n";

  const PreparedData data = prepare(raw, c);
  out << "windows: train " << data.train.size() << ", val " << data.val.size() << ", test "
      << data.test.size() << "\n";
  std::ofstream log(dir / "history.csv");
  log << "epoch,learning_rate,train_loss,val_mae,teacher_prob\n";
  const auto start = std::chrono::steady_clock::now();
  const TrainedRun run = train_run(c, data, [&](const EpochRecord& r) {
    log << r.epoch << ',' << format_double(r.learning_rate) << ',' << format_double(r.train_loss)
        << ',' << format_double(r.val_mae) << ',' << format_double(r.teacher_prob) << '\n';
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char line[160];
    std::snprintf(line, sizeof line, "epoch %4zu  lr %.2e  train %.5f  val %.5f  tf %.3f  %6.1fs\n",
                  r.epoch, r.learning_rate, r.train_loss, r.val_mae, r.teacher_prob, secs);
    out << line << std::flush;
  });
  save_checkpoint(run.result.best, dir / "checkpoint.bin");
  out << "best epoch " << run.result.best.epoch << " (val MAE " << run.result.best.best_val_mae
      << ")" << (run.result.stopped_early ? ", stopped early" : "") << "; wrote "
      << (dir / "checkpoint.bin").string() << "\n";
  return 0;
}

int cmd_evaluate(const Overrides& flags, const std::string& checkpoint_path, bool baselines,
                 const std::optional<std::string>& json_path, const std::optional<std::string>& dump_path,
                 std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RunConfig c = config_for_checkpoint(flags, checkpoint_path, ckpt);
  const StationPanel raw = load_panel(c);
  c.resolve(raw.stations());
  c.model = ckpt.config;
  if (ckpt.config.stations != raw.stations())
    throw ConfigError("checkpoint expects " + std::to_string(ckpt.config.stations) +
                      " stations, data has " + std::to_string(raw.stations()));
  const fs::path dir = create_run_dir(c.seed);
  write_text(dir / "config.json", to_json(c).dump(2) + "\n");

  const PreparedData data = prepare(raw, c);
  const Seq2SeqModel model = restore(ckpt);
  const Evaluation e = evaluate_run(model, data, c, baselines);
  json reports = json::array();
  for (const MetricReport& r : e.reports) reports.push_back(to_json(r));
  const json doc = {{"checkpoint", checkpoint_path}, {"test_windows", data.test.size()}, {"reports", reports}};
  write_text(dir / "metrics.json", doc.dump(2) + "\n");
  if (json_path) write_text(*json_path, doc.dump(2) + "\n");
  const std::string table = format_table(e.reports);
  write_text(dir / "metrics.txt", table);
  out << table << "wrote " << (dir / "metrics.json").string() << "\n";
  if (dump_path) {
    std::ofstream dump(*dump_path);
    if (!dump) throw IngestError("cannot write " + *dump_path);
    write_predictions_csv(e, raw.station_ids, dump);
    out << "wrote " << *dump_path << "\n";
  }
  return 0;
}

int cmd_predict(const Overrides& flags, const std::string& checkpoint_path, std::optional<std::size_t> steps,
                const std::optional<std::string>& out_path, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  Overrides o = flags;
  o.horizon.reset();  // --horizon here truncates the forecast, it does not reshape the model
  RunConfig c = config_for_checkpoint(o, checkpoint_path, ckpt);
  const StationPanel raw = load_panel(c);
  c.resolve(raw.stations());
  c.model = ckpt.config;
  const ModelConfig& mc = ckpt.config;
  const std::size_t horizon = steps.value_or(mc.horizon);
  if (horizon > mc.horizon)
    throw ConfigError("--horizon " + std::to_string(horizon) + " exceeds the model horizon " +
                      std::to_string(mc.horizon));
  if (mc.stations != raw.stations())
    throw ConfigError("checkpoint expects " + std::to_string(mc.stations) + " stations, data has " +
                      std::to_string(raw.stations()));
  const StationPanel clean = preprocess(raw, c.pipeline);
  if (clean.days() < mc.history_len)
    throw ConfigError("data has " + std::to_string(clean.days()) + " days, the model needs " +
                      std::to_string(mc.history_len));

  const StationPanel z = normalize_panel(clean.slice(clean.days() - mc.history_len, mc.history_len), ckpt.stats);
  ForecastBatch one;
  one.history_len = mc.history_len;
  one.horizon = mc.horizon;
  one.stations = mc.stations;
  one.history = z.values;
  one.target.assign(mc.horizon * mc.stations, 0.0);
  one.window_end.push_back(clean.dates.back());
  const std::vector<double> pred = predict_windows(restore(ckpt), one);

  const fs::path dir = create_run_dir(c.seed);
  write_text(dir / "config.json", to_json(c).dump(2) + "\n");
  const fs::path dest = out_path ? fs::path(*out_path) : dir / "forecast.csv";
  std::ofstream csv(dest);
  if (!csv) throw IngestError("cannot write " + dest.string());
  csv << "station,date,step,prediction\n";
  for (std::size_t s = 0; s < mc.stations; ++s)
    for (std::size_t k = 0; k < horizon; ++k)
      csv << raw.station_ids[s] << ',' << format_iso_date(clean.dates.back() + std::chrono::days{static_cast<long>(k + 1)})
          << ',' << k + 1 << ',' << format_double(ckpt.stats.denormalize(pred[k * mc.stations + s], s)) << '\n';
  out << "wrote " << horizon << " steps for " << mc.stations << " stations to " << dest.string() << "\n";
  return 0;
}

int cmd_report_params(const Overrides& flags, std::optional<std::size_t> stations, std::ostream& out) {
  RunConfig c = flags.resolve_config();
  std::size_t n = c.model.stations;
  if (stations) n = *stations;
  else if (!c.data.empty()) n = ingest_csv(c.data).stations();
  c.resolve(n);
  const Seq2SeqModel model = Seq2SeqModel::init(c.model);
  char line[160];
  for (const Tensor& t : model.parameters()) {
    std::snprintf(line, sizeof line, "%-36s %-14s %10zu\n", t.name().c_str(), shape_string(t.shape()).c_str(),
                  t.numel());
    out << line;
  }
  out << "total " << count_parameters(model) << "\n";
  return 0;
}

int cmd_report_graph(const std::string& checkpoint_path, const std::optional<std::string>& out_path,
                     std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Seq2SeqModel model = restore(ckpt);
  NoGradGuard guard;
  const Tensor adj = derive_adjacency(model.graph);
  std::ostringstream csv;
  write_matrix_csv(adj.values(), model.config.stations, csv);
  if (out_path) {
    write_text(*out_path, csv.str());
    out << "wrote " << *out_path << "\n";
  } else {
    out << csv.str();
  }
  return 0;
}

}  // namespace

fs::path create_run_dir(unsigned long long seed) {
  const char* env = std::getenv("GLOWCAST_RUN_DIR");
  const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  const std::string base = std::string(stamp) + "_seed" + std::to_string(seed);
  fs::create_directories(root);
  for (int attempt = 1;; ++attempt) {
    const fs::path dir = root / (attempt == 1 ? base : base + "-" + std::to_string(attempt));
    if (fs::create_directory(dir)) return dir;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"glowcast: graph-convolutional recurrent forecaster with sparse attention"};
  app.require_subcommand(1);

  std::size_t synth_n = 8, synth_days = 4000, synth_lag = 1;
  std::uint64_t synth_seed = 7;
  std::optional<std::string> out_path, json_path, dump_path;
  std::string checkpoint;
  bool no_baselines = false;
  std::optional<std::size_t> steps, stations;

  auto* synth = app.add_subcommand("synth", "generate a synthetic coupled river panel");
  synth->add_option("--n", synth_n, "stations")->check(CLI::PositiveNumber);
  synth->add_option("--days", synth_days, "days")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--lag", synth_lag, "upstream travel time in days")->check(CLI::PositiveNumber);
  synth->add_option("--out", out_path, "output directory (default: a new run directory)");

  Overrides pre_flags, train_flags, eval_flags, predict_flags, param_flags;
  auto* pre = app.add_subcommand("preprocess", "impute and smooth a panel");
  pre_flags.add_to(pre, true);
  pre->add_option("--out", out_path, "output CSV (default: preprocessed.csv in the run directory)");

  auto* trn = app.add_subcommand("train", "train a model and write its best checkpoint");
  train_flags.add_to(trn, true);

  auto* evl = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  eval_flags.add_to(evl, true);
  evl->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  evl->add_flag("--no-baselines", no_baselines, "skip HA and VAR");
  evl->add_option("--json", json_path, "also write the report JSON here");
  evl->add_option("--dump-predictions", dump_path, "CSV of issued,step,date,station,truth,prediction");

  auto* prd = app.add_subcommand("predict", "forecast the days after the end of the data");
  predict_flags.add_to(prd, true);
  prd->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  prd->add_option("--steps", steps, "number of forecast days (at most the model horizon)")
      ->check(CLI::PositiveNumber);
  prd->add_option("--out", out_path, "output CSV (default: forecast.csv in the run directory)");

  auto* par = app.add_subcommand("report-params", "list trainable tensors and their total size");
  param_flags.add_to(par, true);
  par->add_option("--stations", stations, "station count (default: from --data or the config)")
      ->check(CLI::PositiveNumber);

  auto* grp = app.add_subcommand("report-graph", "print the learned adjacency of a checkpoint");
  grp->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  grp->add_option("--out", out_path, "output CSV (default: stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*synth) return cmd_synth(synth_n, synth_days, synth_seed, synth_lag, out_path, out);
    if (*pre) return cmd_preprocess(pre_flags, out_path, out);
    if (*trn) return cmd_train(train_flags, out);
    if (*evl) return cmd_evaluate(eval_flags, checkpoint, !no_baselines, json_path, dump_path, out);
    if (*prd) {
      // For predict, --horizon is the number of days to emit.
      if (predict_flags.horizon) steps = predict_flags.horizon;
      return cmd_predict(predict_flags, checkpoint, steps, out_path, out);
    }
    if (*par) return cmd_report_params(param_flags, stations, out);
    if (*grp) return cmd_report_graph(checkpoint, out_path, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace glowcast
