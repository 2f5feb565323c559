// adtrack: train, track, cost and benchmark the adaptive-depth Siamese tracker.
//
// Exit status: 0 success, 1 runtime or training failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "adtrack/checkpoint.hpp"
#include "adtrack/cost_model.hpp"
#include "adtrack/experiment.hpp"
#include "adtrack/tracker.hpp"
#include "adtrack/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace adtrack;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataFlags {
  std::string dir;
  std::string synthetic;
  int count = 12;
  Index length = 50;
  std::string split = "train";

  void attach(CLI::App* app, const std::string& default_split) {
    split = default_split;
    auto* d = app->add_option("--data", dir, "Directory of sequences (or one sequence)");
    auto* s = app->add_option("--synthetic", synthetic, "Generate data instead: easy|hard|mixed")
                  ->check(CLI::IsMember({"easy", "hard", "mixed"}));
    d->excludes(s);
    app->add_option("--count", count, "Synthetic sequence count")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--length", length, "Synthetic sequence length")->capture_default_str()->check(CLI::Range(2, 100000));
    app->add_option("--split", split, "Sequences to use: train|test|all (75/25 hold-out)")
        ->capture_default_str()
        ->check(CLI::IsMember({"train", "test", "all"}));
  }

  json describe() const {
    json j{{"split", split}};
    if (!synthetic.empty()) {
      j["synthetic"] = synthetic;
      j["count"] = count;
      j["length"] = length;
    } else {
      j["data"] = dir;
    }
    return j;
  }

  // Sequences of the requested split and the dataset fill colour.
  Dataset load(std::uint64_t seed) const {
    if (dir.empty() && synthetic.empty()) throw UsageError("one of --data or --synthetic is required");
    DatasetSource src;
    if (!synthetic.empty()) {
      src.synthetic = parse_synth_mix(synthetic);
      src.count = count;
      src.length = length;
      src.seed = seed;
    } else {
      src.dir = dir;
    }
    Dataset ds = load_dataset(src);
    if (split == "all") return ds;
    Split parts = split_sequences(std::move(ds.sequences), kHoldOutFraction, seed);
    ds.sequences = split == "train" ? std::move(parts.train) : std::move(parts.test);
    if (ds.sequences.empty()) throw UsageError("split '" + split + "' is empty");
    return ds;
  }
};

json fill_json(const std::array<double, 3>& fill) { return json::array({fill[0], fill[1], fill[2]}); }

std::string file_checksum(const fs::path& p) { return checksum_hex(read_file(p)); }

class Manifest {
 public:
  Manifest(std::string subcommand, fs::path out_dir) : out_dir_(std::move(out_dir)) {
    j_["subcommand"] = std::move(subcommand);
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }
  json& config() { return j_["config"]; }
  void seed(std::uint64_t s) { j_["seed"] = s; }
  void input(const std::string& role, const fs::path& p) {
    j_["inputs"][role] = {{"path", p.string()}, {"checksum", file_checksum(p)}};
  }
  void write(const std::string& name, const std::string& text) {
    write_file_atomic(out_dir_ / name, text);
    record(name);
  }
  void write(const std::string& name, const Checkpoint& ckpt) {
    save_checkpoint(ckpt, out_dir_ / name);
    record(name);
  }
  void finish() {
    const std::string name = j_["subcommand"].get<std::string>() + ".manifest.json";
    write_file_atomic(out_dir_ / name, j_.dump(2) + "\n");
  }

 private:
  void record(const std::string& name) { j_["outputs"][name] = file_checksum(out_dir_ / name); }

  fs::path out_dir_;
  json j_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + ": cannot create output directory");
}

std::array<double, 3> checkpoint_fill(const Checkpoint& ckpt, const Dataset& ds) {
  if (ckpt.meta.contains("pad_fill")) {
    const auto v = ckpt.meta["pad_fill"].get<std::vector<double>>();
    if (v.size() == 3) return {v[0], v[1], v[2]};
  }
  return ds.pad_fill;
}

Checkpoint load_backbone(const fs::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (!ckpt.weights) throw std::runtime_error(path.string() + ": checkpoint has no backbone");
  return ckpt;
}

std::string histogram_line(const std::array<std::size_t, kNumDepths>& h) {
  std::size_t total = 0;
  for (auto v : h) total += v;
  std::string out;
  for (int d = 0; d < kNumDepths; ++d) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%sd%d=%zu (%.1f%%)", d ? "  " : "", d + 1, h[d],
                  total ? 100.0 * double(h[d]) / double(total) : 0.0);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------

struct TrainBackboneCmd {
  DataFlags data;
  std::string preset = "toy";
  std::string mode = "all-depths";
  std::string out;
  std::uint64_t seed = 0;
  BackboneHyper hyper;
  TrainingSetSpec set;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("train-backbone", "Phase 1: train the backbone on the conv loss");
    data.attach(app, "train");
    app->add_option("--preset", preset, "Backbone preset")->capture_default_str()->check(CLI::IsMember({"toy", "vgg19-track"}));
    app->add_option("--mode", mode, "Supervision")->capture_default_str()->check(CLI::IsMember({"all-depths", "deepest-only"}));
    app->add_option("--epochs", hyper.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--lr", hyper.learning_rate)->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--momentum", hyper.momentum)->capture_default_str()->check(CLI::Range(0.0, 1.0));
    app->add_option("--sigma", hyper.sigma, "Ground-truth Gaussian width (map cells)")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--groups-per-sequence", set.groups_per_sequence)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--searches-per-group", set.searches_per_group)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--out", out, "Output directory")->required();
    app->callback([this] { run(); });
  }

  void run() {
    const Dataset ds = data.load(seed);
    const auto config = BackboneConfig::from_preset(preset);
    const Supervision sup = parse_supervision(mode);
    hyper.seed = seed;
    const auto groups = build_training_set(ds.sequences, set, seed);
    ensure_dir(out);

    Manifest m("train-backbone", out);
    m.seed(seed);
    m.config() = {{"data", data.describe()}, {"preset", preset}, {"mode", mode}, {"epochs", hyper.epochs},
                  {"lr", hyper.learning_rate}, {"momentum", hyper.momentum}, {"grad_clip", hyper.grad_clip},
                  {"groups_per_step", hyper.groups_per_step}, {"sigma", hyper.sigma},
                  {"groups_per_sequence", set.groups_per_sequence},
                  {"searches_per_group", set.searches_per_group}, {"max_jitter_cells", set.max_jitter_cells},
                  {"pad_fill", fill_json(ds.pad_fill)}};

    const BackboneTrainResult r = train_backbone(config, ds.sequences, groups, sup, hyper, ds.pad_fill);

    std::string csv = "epoch,L1,L2,L3,L4,L5,total\n";
    for (const auto& e : r.trace) {
      csv += std::to_string(e.epoch);
      for (const auto& d : e.depth) csv += "," + (d ? format_real(*d) : std::string());
      csv += "," + format_real(e.total) + "\n";
    }
    Checkpoint ckpt;
    ckpt.weights = r.weights;
    ckpt.meta = {{"sigma", hyper.sigma}, {"mode", mode}, {"pad_fill", fill_json(ds.pad_fill)}, {"seed", seed}};
    m.write("backbone.adtk", ckpt);
    m.write("loss_trace.csv", csv);
    m.finish();
    if (!r.trace.empty()) std::cout << "final loss " << format_real(r.trace.back().total) << "\n";
    std::cout << "wrote " << (fs::path(out) / "backbone.adtk").string() << "\n";
  }
};

struct TrainGatesCmd {
  DataFlags data;
  std::string checkpoint;
  std::string out;
  std::vector<double> costs;
  double threshold = kDefaultThreshold;
  std::uint64_t seed = 0;
  GateLossConfig config;
  TrainingSetSpec set;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("train-gates", "Phase 2: train gate parameters over a frozen backbone");
    data.attach(app, "train");
    app->add_option("--checkpoint", checkpoint, "Backbone checkpoint from train-backbone")->required()->check(CLI::ExistingFile);
    app->add_option("--lambda", config.lambda, "Accuracy-cost trade-off")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--costs", costs, "Incremental costs p_1..p_5")->expected(5);
    app->add_option("--lr", config.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--epochs", config.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--batch", config.batch)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--threshold", threshold, "Hard-gating threshold for the reported histogram")->capture_default_str();
    app->add_option("--groups-per-sequence", set.groups_per_sequence)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--searches-per-group", set.searches_per_group)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--out", out, "Output directory")->required();
    app->callback([this] { run(); });
  }

  void run() {
    if (!costs.empty()) std::copy(costs.begin(), costs.end(), config.costs.begin());
    config.seed = seed;
    Checkpoint ckpt = load_backbone(checkpoint);
    const Dataset ds = data.load(seed);
    const auto fill = checkpoint_fill(ckpt, ds);
    const double sigma = ckpt.meta.value("sigma", kDefaultSigma);
    const std::string before = weights_checksum(*ckpt.weights);
    ensure_dir(out);

    Manifest m("train-gates", out);
    m.seed(seed);
    m.input("checkpoint", checkpoint);
    m.config() = {{"data", data.describe()}, {"lambda", config.lambda}, {"costs", config.costs},
                  {"lr", config.learning_rate}, {"epochs", config.epochs}, {"batch", config.batch},
                  {"threshold", threshold}, {"sigma", sigma},
                  {"groups_per_sequence", set.groups_per_sequence},
                  {"searches_per_group", set.searches_per_group}, {"pad_fill", fill_json(fill)}};

    const auto groups = build_training_set(ds.sequences, set, seed);
    const auto samples = collect_gate_samples(*ckpt.weights, ds.sequences, groups, fill, sigma);
    const GateTrainResult r = train_gates(samples, config);
    if (weights_checksum(*ckpt.weights) != before) throw std::logic_error("backbone changed during gate training");

    std::array<std::size_t, kNumDepths> hist{};
    for (const auto& s : samples) ++hist[hard_gate_depth(s, r.params, threshold) - 1];
    std::string csv = "epoch,tracking,cost,total\n";
    for (const auto& e : r.trace)
      csv += std::to_string(e.epoch) + "," + format_real(e.tracking) + "," + format_real(e.cost) + "," +
             format_real(e.tracking + e.cost) + "\n";

    ckpt.gates = r.params;
    ckpt.meta["lambda"] = config.lambda;
    ckpt.meta["costs"] = config.costs;
    ckpt.meta["backbone_checksum"] = before;
    m.write("gates.adtk", ckpt);
    m.write("gate_trace.csv", csv);
    m.finish();

    std::cout << "depth histogram (hard, threshold " << format_real(threshold) << "): " << histogram_line(hist) << "\n";
    for (int d = 0; d < kNumDepths; ++d)
      if (!samples.empty() && double(hist[d]) >= 0.9 * double(samples.size()))
        std::cerr << "warning: polarized policy, " << histogram_line(hist) << "\n";
  }
};

struct TrackCmd {
  DataFlags data;
  std::string checkpoint;
  std::string policy = "fixed:5";
  std::string out;
  double threshold = kDefaultThreshold;
  std::uint64_t seed = 0;
  TrackOptions options;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("track", "Track sequences with one policy");
    data.attach(app, "all");
    app->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
    app->add_option("--policy", policy, "fixed:<1-5> | soft | hard")
        ->capture_default_str()
        ->check(CLI::IsMember({"fixed:1", "fixed:2", "fixed:3", "fixed:4", "fixed:5", "soft", "hard"}));
    app->add_option("--threshold", threshold, "Hard-gating threshold (0.25, 0.5, 0.75 or custom)")->capture_default_str();
    app->add_option("--horizon", options.horizon, "Search frames per key frame")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--batch", options.batch, "Costing batch size")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Seed for synthetic data and the hold-out split")->capture_default_str();
    app->add_option("--out", out, "Output directory")->required();
    app->callback([this] { run(); });
  }

  void run() {
    const Policy p = Policy::parse(policy, threshold);
    const Checkpoint ckpt = load_backbone(checkpoint);
    if (p.needs_gates() && !ckpt.gates) throw UsageError("policy " + policy + " needs a checkpoint with gates");
    const Dataset ds = data.load(seed);
    options.pad_fill = checkpoint_fill(ckpt, ds);
    ensure_dir(out);

    Manifest m("track", out);
    m.seed(seed);
    m.input("checkpoint", checkpoint);
    m.config() = {{"data", data.describe()}, {"policy", p.label()}, {"threshold", threshold},
                  {"horizon", options.horizon}, {"key_stride", options.key_stride}, {"batch", options.batch},
                  {"pad_fill", fill_json(options.pad_fill)}};

    std::vector<TrackResult> results;
    for (const auto& seq : ds.sequences)
      results.push_back(track_sequence(*ckpt.weights, ckpt.gates ? &*ckpt.gates : nullptr, seq, p, options));
    m.write("track.csv", track_csv(results));
    m.finish();

    std::cout << "policy " << p.label() << "  IOU@1 " << format_real(pooled_iou_at(results, 1)) << "  IOU@5 "
              << format_real(pooled_iou_at(results, 5)) << "  IOU@25 " << format_real(pooled_iou_at(results, 25))
              << "  mean FLOPs " << format_real(pooled_mean_flops(results)) << "\n";
  }
};

struct FlopsCmd {
  std::string preset = "vgg19-track";
  Index key_res = kKeyCrop;
  Index search_res = kSearchCrop;
  Index batch = 25;
  std::string out;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("flops", "Analytic multiply counts per key-search batch");
    app->add_option("--preset", preset)->capture_default_str()->check(CLI::IsMember({"toy", "vgg19-track"}));
    app->add_option("--key-res", key_res)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--search-res", search_res)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--batch", batch)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--out", out, "Also write flops.csv and a manifest here");
    app->callback([this] { run(); });
  }

  void run() {
    const CostModel cm = CostModel::build(BackboneConfig::from_preset(preset), key_res, search_res, batch);
    std::string csv = "policy,flops,ratio,key_pathway,search_pathway,correlation\n";
    for (int d = 1; d <= kNumDepths; ++d)
      csv += "xcorr" + std::to_string(d) + "," + format_real(cm.fixed_depth(d)) + "," +
             format_real(cm.ratio(cm.fixed_depth(d))) + "," + format_real(cm.key_pathway(d)) + "," +
             format_real(cm.search_pathway(d)) + "," + format_real(cm.correlation(d)) + "\n";
    double corr = 0.0;
    for (int d = 1; d <= kNumDepths; ++d) corr += cm.correlation(d);
    csv += "soft-gating," + format_real(cm.soft_gating()) + "," + format_real(cm.ratio(cm.soft_gating())) + "," +
           format_real(cm.key_pathway(kNumDepths)) + "," + format_real(cm.search_pathway(kNumDepths)) + "," +
           format_real(corr) + "\n";
    std::cout << csv;
    std::cout << "incremental costs p:";
    for (double p : cm.incremental_costs()) std::cout << " " << format_real(p);
    std::cout << "\n";
    if (out.empty()) return;
    ensure_dir(out);
    Manifest m("flops", out);
    m.config() = {{"preset", preset}, {"key_res", key_res}, {"search_res", search_res}, {"batch", batch}};
    m.write("flops.csv", csv);
    m.finish();
  }
};

struct BenchCmd {
  DataFlags data;
  std::string checkpoint;
  std::vector<double> lambdas;
  std::vector<double> thresholds{kDefaultThresholds.begin(), kDefaultThresholds.end()};
  int k = 25;
  bool wall_clock = false;
  std::string out;
  std::uint64_t seed = 0;
  GateLossConfig gate_config;
  TrainingSetSpec set;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("bench", "Accuracy-versus-FLOPs curve over all policies");
    data.attach(app, "test");
    app->add_option("--checkpoint", checkpoint, "Backbone checkpoint, optionally with gates")->required()->check(CLI::ExistingFile);
    app->add_option("--lambdas", lambdas, "Train one gate set per lambda on the training split");
    app->add_option("--thresholds", thresholds)->capture_default_str();
    app->add_option("--k", k, "IOU@k horizon")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--gate-epochs", gate_config.epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_flag("--wall-clock", wall_clock, "Add an informational seconds column");
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--out", out, "Output directory")->required();
    app->callback([this] { run(); });
  }

  void run() {
    const Checkpoint ckpt = load_backbone(checkpoint);
    const Dataset ds = data.load(seed);
    const auto fill = checkpoint_fill(ckpt, ds);
    const double sigma = ckpt.meta.value("sigma", kDefaultSigma);

    std::vector<GateSet> sets;
    if (!lambdas.empty()) {
      DataFlags train = data;
      train.split = "train";
      const Dataset tr = train.load(seed);
      const auto groups = build_training_set(tr.sequences, set, seed);
      const auto samples = collect_gate_samples(*ckpt.weights, tr.sequences, groups, fill, sigma);
      for (double lambda : lambdas) {
        GateLossConfig cfg = gate_config;
        cfg.lambda = lambda;
        cfg.seed = seed;
        sets.push_back({lambda, train_gates(samples, cfg).params});
      }
    } else if (ckpt.gates) {
      sets.push_back({ckpt.meta.value("lambda", kDefaultLambda), *ckpt.gates});
    } else {
      throw UsageError("bench needs --lambdas or a checkpoint with gates");
    }
    ensure_dir(out);

    Manifest m("bench", out);
    m.seed(seed);
    m.input("checkpoint", checkpoint);
    m.config() = {{"data", data.describe()}, {"lambdas", lambdas}, {"thresholds", thresholds}, {"k", k},
                  {"gate_epochs", gate_config.epochs}, {"wall_clock", wall_clock}, {"pad_fill", fill_json(fill)}};
    TrackOptions options;
    options.pad_fill = fill;
    options.horizon = k;
    const auto points = pareto_curve(*ckpt.weights, sets, thresholds, ds.sequences, options, k);
    const std::string csv = curve_csv(points, wall_clock);
    m.write("curve.csv", csv);
    m.finish();
    std::cout << csv;
  }
};

struct SynthCmd {
  std::string mix = "mixed";
  int count = 12;
  Index length = 50;
  std::uint64_t seed = 0;
  std::string out;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("synth", "Write synthetic sequences in the on-disk sequence layout");
    app->add_option("--synthetic", mix)->capture_default_str()->check(CLI::IsMember({"easy", "hard", "mixed"}));
    app->add_option("--count", count)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--length", length)->capture_default_str()->check(CLI::Range(2, 100000));
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--out", out, "Output directory")->required();
    app->callback([this] { run(); });
  }

  void run() {
    ensure_dir(out);
    Manifest m("synth", out);
    m.seed(seed);
    m.config() = {{"synthetic", mix}, {"count", count}, {"length", length}};
    for (const auto& seq : make_synthetic_dataset(parse_synth_mix(mix), count, length, seed))
      save_sequence(seq, fs::path(out) / seq.name);
    m.finish();
  }
};

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep large activation buffers on the heap instead of mmap/munmap per call.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
  CLI::App app{"Adaptive-depth Siamese tracker"};
  app.require_subcommand(1);
  TrainBackboneCmd train_backbone_cmd;
  TrainGatesCmd train_gates_cmd;
  TrackCmd track_cmd;
  FlopsCmd flops_cmd;
  BenchCmd bench_cmd;
  SynthCmd synth_cmd;
  train_backbone_cmd.attach(app);
  train_gates_cmd.attach(app);
  track_cmd.attach(app);
  flops_cmd.attach(app);
  bench_cmd.attach(app);
  synth_cmd.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingFailure& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
