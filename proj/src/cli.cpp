#include "saldist/cli.hpp"

#include "saldist/data.hpp"
#include "saldist/grid.hpp"
#include "saldist/losses.hpp"
#include "saldist/metrics.hpp"
#include "saldist/net.hpp"
#include "saldist/pipeline.hpp"
#include "saldist/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace saldist::cli {
namespace {

using json = nlohmann::ordered_json;

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& s : split_list(csv)) seeds.push_back(std::stoull(s));
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

// key=value config file; '#' starts a comment. Returned as --key=value tokens
// inserted before the explicit flags, so the command line wins on conflicts.
std::vector<std::string> read_config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.find('=') == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
    }
    tokens.push_back("--" + line);
  }
  return tokens;
}

std::vector<std::string> apply_config_file(std::vector<std::string> args) {
  // Locate the subcommand (first non-flag token) and any --config value.
  std::size_t sub_pos = args.size();
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (sub_pos == args.size() && !args[i].empty() && args[i][0] != '-') {
      sub_pos = i;
      continue;
    }
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty() || sub_pos == args.size()) return args;
  const std::vector<std::string> tokens = read_config_tokens(config_path);
  args.insert(args.begin() + sub_pos + 1, tokens.begin(), tokens.end());
  return args;
}

// --- option bundles -------------------------------------------------------

struct GtOpts {
  int kernel_width = 0;  // 0: take the preset
  double sigma = 0.0;
  std::string preset = "salicon";

  void attach(CLI::App* cmd, int default_width, double default_sigma) {
    kernel_width = default_width;
    sigma = default_sigma;
    cmd->add_option("--gt.kernel_width", kernel_width,
                    "Gaussian kernel width in pixels (odd)");
    cmd->add_option("--gt.sigma", sigma, "Gaussian kernel standard deviation in pixels");
    cmd->add_option("--gt.preset", preset, "named kernel preset: salicon or osie")
        ->check(CLI::IsMember({"salicon", "osie"}));
    preset.clear();  // only applied when explicitly set
  }

  GtParams resolve() const {
    GtParams p;
    if (!preset.empty()) {
      p = GtParams::preset(preset);
    } else {
      p.kernel_width = kernel_width;
      p.sigma = sigma;
    }
    p.validate();
    return p;
  }
};

struct SynthOpts {
  SynthConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--synth.n_images", cfg.n_images, "number of images");
    cmd->add_option("--synth.height", cfg.height, "image height in pixels");
    cmd->add_option("--synth.width", cfg.width, "image width in pixels");
    cmd->add_option("--synth.channels", cfg.channels, "image channels (1 or 3)");
    cmd->add_option("--synth.blobs_min", cfg.blobs_min, "minimum blobs per image");
    cmd->add_option("--synth.blobs_max", cfg.blobs_max, "maximum blobs per image");
    cmd->add_option("--synth.fixations_per_image", cfg.fixations_per_image,
                    "fixations drawn per image");
    cmd->add_option("--synth.center_bias_weight", cfg.center_bias_weight,
                    "probability a fixation follows the center prior");
    cmd->add_option("--synth.noise_sigma", cfg.noise_sigma, "background noise level");
  }
};

struct TrainOpts {
  TrainConfig cfg;
  double init_sigma = 0.01;

  void attach(CLI::App* cmd) {
    cmd->add_option("--train.base_lr", cfg.base_lr, "global learning rate");
    cmd->add_option("--train.momentum", cfg.momentum, "SGD momentum");
    cmd->add_option("--train.weight_decay", cfg.weight_decay, "L2 weight decay");
    cmd->add_option("--train.batch_size", cfg.batch_size, "images per SGD step");
    cmd->add_option("--train.epochs", cfg.epochs, "passes over the training set");
    cmd->add_option("--train.frozen_prefix", cfg.frozen_prefix,
                    "leading conv layers excluded from updates");
    cmd->add_option("--train.init_sigma", init_sigma, "Gaussian init sigma for conv weights");
    cmd->add_option("--train.val_sauc_splits", cfg.val_sauc_splits,
                    "sAUC splits used for per-epoch validation");
  }
};

// --- commands ---------------------------------------------------------------

struct SynthCmd {
  SynthOpts synth;
  GtOpts gt;
  std::string out;
  std::uint64_t seed = 0;

  void execute() const {
    SynthConfig cfg = synth.cfg;
    cfg.seed = seed;
    const GtParams gtp = gt.resolve();
    const std::vector<Sample> samples = generate(cfg, gtp);
    const std::filesystem::path manifest = write_dataset(out, samples, cfg, gtp);
    std::cout << "seed " << seed << ": wrote " << samples.size() << " samples to " << manifest
              << "\n";
  }
};

struct GtgenCmd {
  std::string fix_path, out;
  int height = 0, width = 0;
  GtOpts gt;

  void execute() const {
    const FixationSet fix = read_fixations_csv(fix_path, height, width);
    const PixelDistribution g = make_gt_distribution(fix, gt.resolve());
    write_pfm(out, g.grid());
    std::cout << "wrote " << out << " (" << height << "x" << width << ", " << fix.size()
              << " fixations)\n";
  }
};

void write_train_log(const std::filesystem::path& path, const TrainLog& log,
                     std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (const IterationLog& it : log.iterations) {
    json row;
    row["type"] = "iteration";
    row["iteration"] = it.iteration;
    row["epoch"] = it.epoch;
    row["loss"] = it.loss;
    row["seed"] = seed;
    out << row.dump() << "\n";
  }
  for (const EpochLog& ep : log.epochs) {
    json row;
    row["type"] = "epoch";
    row["epoch"] = ep.epoch;
    row["cc"] = ep.cc;
    row["sauc"] = ep.sauc;
    row["nss"] = ep.nss;
    row["sim"] = ep.sim;
    row["auc_judd"] = ep.auc_judd;
    row["seed"] = seed;
    out << row.dump() << "\n";
  }
}

struct TrainCmd {
  std::string data, val, out, log_path, loss_name = "bhattacharyya";
  std::uint64_t seed = 0;
  TrainOpts train_opts;

  void execute() const {
    LoadedDataset ds = load_dataset(data);
    std::vector<Sample> val_set;
    if (!val.empty()) val_set = std::move(load_dataset(val).samples);

    TrainConfig cfg = train_opts.cfg;
    cfg.loss.kind = loss_kind_from_name(loss_name);
    cfg.seed = seed;
    cfg.metric_seed = seed;

    FcnModel model = make_toy_model(ds.synth.channels, seed, train_opts.init_sigma);
    const TrainLog log = train(model, ds.samples, val_set, cfg, ds.gt);
    save_model(out, model);
    if (!log_path.empty()) write_train_log(log_path, log, seed);

    std::cout << "seed " << seed << ": trained " << loss_name << " for " << cfg.epochs
              << " epochs (" << log.iterations.size() << " iterations)";
    if (!log.iterations.empty()) std::cout << ", final loss " << log.iterations.back().loss;
    if (!log.epochs.empty()) {
      std::cout << ", validation cc " << log.epochs.back().cc << " sauc "
                << log.epochs.back().sauc;
    }
    std::cout << "\nwrote " << out << "\n";
  }
};

struct PredictCmd {
  std::string model_path, image_path, out;

  void execute() const {
    const FcnModel model = load_model(model_path);
    const ChannelStack image = read_pfm_stack(image_path);
    write_pfm(out, predict(model, image).grid());
    std::cout << "wrote " << out << "\n";
  }
};

struct PostprocessCmd {
  std::string in, out;
  CenterBiasParams params;

  void execute() const {
    const PixelDistribution p = distribution_from_map(read_pfm(in));
    write_pfm(out, center_bias_postprocess(p, params).grid());
    std::cout << "wrote " << out << "\n";
  }
};

void print_report_row(const std::string& label, const MetricReport& r) {
  auto cell = [](const std::optional<double>& v) {
    std::ostringstream ss;
    if (v) {
      ss << std::fixed << std::setprecision(4) << *v;
    } else {
      ss << "-";
    }
    return ss.str();
  };
  std::cout << std::left << std::setw(12) << label << std::right << std::setw(9)
            << cell(r.auc_judd) << std::setw(9) << cell(r.auc_borji) << std::setw(9)
            << cell(r.sauc) << std::setw(9) << cell(r.cc) << std::setw(9) << cell(r.nss)
            << std::setw(9) << cell(r.sim) << std::setw(9) << cell(r.emd) << "\n";
}

void print_report_header() {
  std::cout << std::left << std::setw(12) << "image" << std::right << std::setw(9) << "auc_judd"
            << std::setw(9) << "auc_borji" << std::setw(9) << "sauc" << std::setw(9) << "cc"
            << std::setw(9) << "nss" << std::setw(9) << "sim" << std::setw(9) << "emd" << "\n";
}

MetricReport mean_report(const std::vector<MetricReport>& reports) {
  MetricReport mean;
  auto fold = [&](std::optional<double> MetricReport::* field) {
    double total = 0.0;
    int count = 0;
    for (const MetricReport& r : reports) {
      if (r.*field) {
        total += *(r.*field);
        ++count;
      }
    }
    if (count > 0) mean.*field = total / count;
  };
  fold(&MetricReport::auc_judd);
  fold(&MetricReport::auc_borji);
  fold(&MetricReport::sauc);
  fold(&MetricReport::cc);
  fold(&MetricReport::nss);
  fold(&MetricReport::sim);
  fold(&MetricReport::emd);
  if (!reports.empty()) mean.params = reports.front().params;
  return mean;
}

struct EvalCmd {
  std::string pred, gt, fix, bank_csv, data, model_path, out;
  std::uint64_t seed = 0;
  MetricParams params;
  bool no_emd = false;
  int jobs = 1;

  void execute() const {
    MetricParams mp = params;
    mp.with_emd = !no_emd;
    std::vector<MetricReport> reports;

    if (!data.empty()) {
      if (model_path.empty()) {
        throw std::invalid_argument("eval: --data requires --model to produce predictions");
      }
      LoadedDataset ds = load_dataset(data);
      const FcnModel model = load_model(model_path);
      reports.resize(ds.samples.size());
      const int n_jobs = std::max(1, jobs);
      std::vector<std::thread> workers;
      std::atomic<std::size_t> next{0};
      auto work = [&]() {
        for (std::size_t i = next.fetch_add(1); i < ds.samples.size(); i = next.fetch_add(1)) {
          const Sample& s = ds.samples[i];
          ShuffleBank bank;
          for (std::size_t j = 0; j < ds.samples.size(); ++j) {
            if (j != i) bank.sets.push_back(ds.samples[j].fixations);
          }
          MetricParams local = mp;
          local.seed = rng::substream(seed, i);  // per-image substream
          reports[i] = evaluate_all(predict(model, s.image), &s.gt, &s.fixations,
                                    bank.sets.empty() ? nullptr : &bank, local);
        }
      };
      for (int t = 1; t < n_jobs; ++t) workers.emplace_back(work);
      work();
      for (std::thread& t : workers) t.join();
    } else {
      if (pred.empty() || gt.empty()) {
        throw std::invalid_argument("eval: need --pred and --gt (or --data with --model)");
      }
      const PixelDistribution p = distribution_from_map(read_pfm(pred));
      const PixelDistribution g = distribution_from_map(read_pfm(gt));
      const FixationSet* fix_ptr = nullptr;
      FixationSet fixations(1, 1);
      if (!fix.empty()) {
        fixations = read_fixations_csv(fix, static_cast<int>(p.height()),
                                       static_cast<int>(p.width()));
        fix_ptr = &fixations;
      }
      ShuffleBank bank;
      for (const std::string& path : split_list(bank_csv)) {
        bank.sets.push_back(read_fixations_csv(path, static_cast<int>(p.height()),
                                               static_cast<int>(p.width())));
      }
      MetricParams local = mp;
      local.seed = seed;
      reports.push_back(
          evaluate_all(p, &g, fix_ptr, bank.sets.empty() ? nullptr : &bank, local));
    }

    if (!out.empty()) write_metric_reports_jsonl(out, reports);
    print_report_header();
    for (std::size_t i = 0; i < reports.size(); ++i) {
      print_report_row(std::to_string(i), reports[i]);
    }
    print_report_row("mean", mean_report(reports));
    std::cout << "seed " << seed << ", " << reports.size() << " image(s)";
    if (!out.empty()) std::cout << ", wrote " << out;
    std::cout << "\n";
  }
};

// Scale-relative gradient mismatch: max |a - f| over max(||f||_inf, floor).
double gradient_rel_error(const GridMap& analytic, const GridMap& reference) {
  const double scale = std::max(reference.abs().maxCoeff(), 1e-12);
  return (analytic - reference).abs().maxCoeff() / scale;
}

struct GradcheckResult {
  std::string name;
  double max_rel_err = 0.0;
};

GradcheckResult gradcheck_loss(LossKind kind, int trials, std::uint64_t seed, double h) {
  LossSpec spec;
  spec.kind = kind;
  std::mt19937_64 eng = rng::engine(seed, static_cast<std::uint64_t>(kind));
  GradcheckResult result{std::string(loss_name(kind)), 0.0};
  for (int t = 0; t < trials; ++t) {
    while (true) {
      const int rows = 1 + rng::uniform_int(eng, 16);
      const int cols = 1 + rng::uniform_int(eng, 16);
      if (rows * cols < 2) continue;
      GridMap logits(rows, cols), glogits(rows, cols);
      for (Eigen::Index i = 0; i < logits.size(); ++i) {
        logits.data()[i] = rng::normal(eng);
        glogits.data()[i] = rng::normal(eng);
      }
      const PixelDistribution p = softmax(logits);
      const PixelDistribution g = softmax(glogits);
      if (kind == LossKind::kTotalVariation &&
          ((p.grid() - g.grid()).abs() < 1e-6).any()) {
        continue;  // resample away from the subgradient kinks
      }
      const GridMap analytic = loss_grad(spec, p, g);
      const GridMap reference = finite_diff_grad(spec, logits, g, h);
      result.max_rel_err = std::max(result.max_rel_err, gradient_rel_error(analytic, reference));
      break;
    }
  }
  return result;
}

GradcheckResult gradcheck_net(LossKind kind, std::uint64_t seed, double h) {
  LossSpec spec;
  spec.kind = kind;
  const FcnModel model = make_tiny_model(1, seed);
  std::mt19937_64 eng = rng::engine(seed, 900 + static_cast<std::uint64_t>(kind));

  ChannelStack image(1, 16, 16);
  for (Eigen::Index i = 0; i < image.values.size(); ++i) {
    image.values.data()[i] = rng::normal(eng);
  }
  const int d = model.downsample_factor();
  GridMap glogits(16 / d, 16 / d);
  for (Eigen::Index i = 0; i < glogits.size(); ++i) glogits.data()[i] = rng::normal(eng);

  return {std::string(loss_name(kind)),
          parameter_gradcheck(model, image, softmax(glogits), spec, h)};
}

struct GradcheckCmd {
  std::string loss = "all";
  int trials = 100;
  std::uint64_t seed = 0;
  double h = 1e-5;
  bool net = false;
  double tolerance = 1e-5;
  double net_tolerance = 1e-4;
  double net_h = 1e-4;

  int execute() const {
    std::vector<LossKind> kinds;
    if (loss == "all") {
      kinds.assign(std::begin(kAllLossKinds), std::end(kAllLossKinds));
    } else {
      kinds.push_back(loss_kind_from_name(loss));
    }
    bool ok = true;
    for (LossKind kind : kinds) {
      const GradcheckResult r = gradcheck_loss(kind, trials, seed, h);
      const bool pass = r.max_rel_err <= tolerance;
      ok = ok && pass;
      std::cout << "loss " << std::left << std::setw(14) << r.name << " max_rel_err "
                << std::scientific << std::setprecision(3) << r.max_rel_err << std::defaultfloat
                << " (trials " << trials << ", tol " << tolerance << ") "
                << (pass ? "OK" : "FAIL") << "\n";
    }
    if (net) {
      for (LossKind kind : kinds) {
        const GradcheckResult r = gradcheck_net(kind, seed, net_h);
        const bool pass = r.max_rel_err <= net_tolerance;
        ok = ok && pass;
        std::cout << "net  " << std::left << std::setw(14) << r.name << " max_rel_err "
                  << std::scientific << std::setprecision(3) << r.max_rel_err
                  << std::defaultfloat << " (tol " << net_tolerance << ") "
                  << (pass ? "OK" : "FAIL") << "\n";
      }
    }
    std::cout << "seed " << seed << "\n";
    return ok ? 0 : 1;
  }
};

struct LossbenchCmd {
  std::string losses = "chi2,tv,cosine,bhattacharyya,kl,euclidean,huber";
  std::string seeds = "0,1,2";
  std::string out;
  int train_images = 500;
  int val_images = 100;
  int final_sauc_splits = 100;
  std::uint64_t data_seed = 17;
  SynthOpts synth;
  GtOpts gt;
  TrainOpts train_opts;

  void execute() const {
    const std::vector<std::string> loss_names = split_list(losses);
    if (loss_names.empty()) throw std::invalid_argument("lossbench: empty loss list");
    const std::vector<std::uint64_t> seed_list = parse_seed_list(seeds);

    SynthConfig cfg = synth.cfg;
    cfg.n_images = train_images + val_images;
    cfg.seed = data_seed;
    const GtParams gtp = gt.resolve();

    std::cerr << "generating " << cfg.n_images << " images (data seed " << data_seed << ")\n";
    std::vector<Sample> samples = generate(cfg, gtp);
    const std::vector<Sample> train_set(samples.begin(), samples.begin() + train_images);
    const std::vector<Sample> val_set(samples.begin() + train_images, samples.end());

    std::ofstream jsonl;
    if (!out.empty()) {
      jsonl.open(out);
      if (!jsonl) throw std::runtime_error("cannot open for writing: " + out);
    }

    struct Cell {
      std::string loss;
      std::uint64_t seed;
      EpochLog final;
    };
    std::vector<Cell> cells;

    for (const std::string& name : loss_names) {
      const LossKind kind = loss_kind_from_name(name);
      for (std::uint64_t seed : seed_list) {
        TrainConfig tc = train_opts.cfg;
        tc.loss.kind = kind;
        tc.seed = seed;
        tc.metric_seed = seed;
        FcnModel model = make_toy_model(cfg.channels, seed, train_opts.init_sigma);
        const TrainLog log = train(model, train_set, val_set, tc, gtp);

        for (const EpochLog& ep : log.epochs) {
          json row;
          row["loss"] = name;
          row["seed"] = seed;
          row["epoch"] = ep.epoch;
          row["cc"] = ep.cc;
          row["sauc"] = ep.sauc;
          row["nss"] = ep.nss;
          row["sim"] = ep.sim;
          row["auc_judd"] = ep.auc_judd;
          if (jsonl.is_open()) jsonl << row.dump() << "\n";
        }
        const EpochLog final_log =
            validate(model, val_set, final_sauc_splits, rng::substream(seed, 999), tc.epochs);
        json row;
        row["loss"] = name;
        row["seed"] = seed;
        row["final"] = true;
        row["cc"] = final_log.cc;
        row["sauc"] = final_log.sauc;
        row["nss"] = final_log.nss;
        row["sim"] = final_log.sim;
        row["auc_judd"] = final_log.auc_judd;
        if (jsonl.is_open()) jsonl << row.dump() << "\n";
        cells.push_back({name, seed, final_log});
        std::cerr << name << " seed " << seed << ": cc " << final_log.cc << " sauc "
                  << final_log.sauc << "\n";
      }
    }

    std::cout << std::left << std::setw(14) << "loss" << std::right << std::setw(10) << "mean_cc"
              << std::setw(11) << "mean_sauc" << "\n";
    for (const std::string& name : loss_names) {
      double cc_total = 0.0, sauc_total = 0.0;
      int count = 0;
      for (const Cell& c : cells) {
        if (c.loss == name) {
          cc_total += c.final.cc;
          sauc_total += c.final.sauc;
          ++count;
        }
      }
      std::cout << std::left << std::setw(14) << name << std::right << std::fixed
                << std::setprecision(4) << std::setw(10) << cc_total / count << std::setw(11)
                << sauc_total / count << std::defaultfloat << "\n";
    }
  }
};

}  // namespace

int run(std::vector<std::string> args) {
  try {
    args = apply_config_file(std::move(args));

    CLI::App app{"saliency distribution toolkit"};
    app.require_subcommand(1);

    auto defaults = [](CLI::App* cmd) {
      cmd->option_defaults()->always_capture_default();
      cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      cmd->add_option("--config", "key=value file; explicit flags override it");
    };

    // synth
    auto synth_cmd = std::make_shared<SynthCmd>();
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic fixation dataset");
    defaults(synth);
    synth->add_option("--out", synth_cmd->out, "output directory")->required();
    synth->add_option("--seed", synth_cmd->seed, "generation seed (echoed in the manifest)");
    synth_cmd->synth.attach(synth);
    synth_cmd->gt.attach(synth, 25, 3.5);
    synth->callback([synth_cmd] { synth_cmd->execute(); });

    // gtgen
    auto gtgen_cmd = std::make_shared<GtgenCmd>();
    CLI::App* gtgen = app.add_subcommand("gtgen", "build a ground-truth map from fixations");
    defaults(gtgen);
    gtgen->add_option("--fix", gtgen_cmd->fix_path, "fixation CSV (row,col)")->required();
    gtgen->add_option("--height", gtgen_cmd->height, "image height")->required();
    gtgen->add_option("--width", gtgen_cmd->width, "image width")->required();
    gtgen->add_option("--out", gtgen_cmd->out, "output PFM path")->required();
    gtgen_cmd->gt.attach(gtgen, 153, 19.0);
    gtgen->callback([gtgen_cmd] { gtgen_cmd->execute(); });

    // train
    auto train_cmd = std::make_shared<TrainCmd>();
    CLI::App* train = app.add_subcommand("train", "train the saliency network");
    defaults(train);
    train->add_option("--data", train_cmd->data, "training manifest.json")->required();
    train->add_option("--val", train_cmd->val, "validation manifest.json");
    train->add_option("--loss", train_cmd->loss_name,
                      "chi2|tv|cosine|bhattacharyya|kl|euclidean|huber");
    train->add_option("--out", train_cmd->out, "model checkpoint path")->required();
    train->add_option("--log", train_cmd->log_path, "training log JSONL path");
    train->add_option("--seed", train_cmd->seed, "init/shuffle seed (echoed)");
    train_cmd->train_opts.attach(train);
    train->callback([train_cmd] { train_cmd->execute(); });

    // predict
    auto predict_cmd = std::make_shared<PredictCmd>();
    CLI::App* predict = app.add_subcommand("predict", "predict a saliency distribution");
    defaults(predict);
    predict->add_option("--model", predict_cmd->model_path, "model checkpoint")->required();
    predict->add_option("--image", predict_cmd->image_path, "input image PFM")->required();
    predict->add_option("--out", predict_cmd->out, "output PFM path")->required();
    predict->callback([predict_cmd] { predict_cmd->execute(); });

    // eval
    auto eval_cmd = std::make_shared<EvalCmd>();
    CLI::App* eval = app.add_subcommand("eval", "compute saliency metrics");
    defaults(eval);
    eval->add_option("--pred", eval_cmd->pred, "predicted map PFM");
    eval->add_option("--gt", eval_cmd->gt, "ground-truth map PFM");
    eval->add_option("--fix", eval_cmd->fix, "fixation CSV for the image");
    eval->add_option("--bank", eval_cmd->bank_csv,
                     "comma-separated fixation CSVs from other images (sAUC negatives)");
    eval->add_option("--data", eval_cmd->data, "dataset manifest (batch mode)");
    eval->add_option("--model", eval_cmd->model_path, "model checkpoint (batch mode)");
    eval->add_option("--out", eval_cmd->out, "JSONL report path");
    eval->add_option("--seed", eval_cmd->seed, "seed for stochastic metrics (echoed)");
    eval->add_option("--metrics.n_splits", eval_cmd->params.n_splits,
                     "negative-set splits for AUC-Borji/sAUC");
    eval->add_option("--metrics.n_neg", eval_cmd->params.n_neg,
                     "negatives per split (0: match fixation count)");
    eval->add_option("--metrics.emd_grid_limit", eval_cmd->params.emd_grid_limit,
                     "max EMD solve grid side");
    eval->add_flag("--metrics.no_emd", eval_cmd->no_emd, "skip the EMD metric");
    eval->add_option("--jobs", eval_cmd->jobs, "parallel images in batch mode");
    eval->callback([eval_cmd] { eval_cmd->execute(); });

    // gradcheck
    auto gradcheck_cmd = std::make_shared<GradcheckCmd>();
    auto gradcheck_rc = std::make_shared<int>(0);
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "certify analytic gradients");
    defaults(gradcheck);
    gradcheck->add_option("--loss", gradcheck_cmd->loss, "loss name or 'all'");
    gradcheck->add_option("--trials", gradcheck_cmd->trials, "random instances per loss");
    gradcheck->add_option("--seed", gradcheck_cmd->seed, "instance seed (echoed)");
    gradcheck->add_option("--step", gradcheck_cmd->h, "central difference step");
    gradcheck->add_flag("--net", gradcheck_cmd->net, "also check network parameter gradients");
    gradcheck->add_option("--tolerance", gradcheck_cmd->tolerance, "loss gradient tolerance");
    gradcheck->callback([gradcheck_cmd, gradcheck_rc] { *gradcheck_rc = gradcheck_cmd->execute(); });

    // lossbench
    auto bench_cmd = std::make_shared<LossbenchCmd>();
    CLI::App* bench = app.add_subcommand("lossbench", "train per loss and compare metrics");
    defaults(bench);
    bench->add_option("--losses", bench_cmd->losses, "comma-separated loss names");
    bench->add_option("--seeds", bench_cmd->seeds, "comma-separated training seeds");
    bench->add_option("--out", bench_cmd->out, "JSONL output path");
    bench->add_option("--train_images", bench_cmd->train_images, "training images");
    bench->add_option("--val_images", bench_cmd->val_images, "validation images");
    bench->add_option("--data_seed", bench_cmd->data_seed, "dataset generation seed");
    bench->add_option("--final_sauc_splits", bench_cmd->final_sauc_splits,
                      "sAUC splits for the final evaluation");
    bench_cmd->synth.attach(bench);
    bench_cmd->gt.attach(bench, 25, 3.5);
    bench_cmd->train_opts.attach(bench);
    bench->callback([bench_cmd] { bench_cmd->execute(); });

    // postprocess
    auto post_cmd = std::make_shared<PostprocessCmd>();
    CLI::App* post = app.add_subcommand("postprocess", "center-bias/blur post-processing");
    defaults(post);
    post->add_option("--in", post_cmd->in, "input distribution PFM")->required();
    post->add_option("--out", post_cmd->out, "output PFM path")->required();
    post->add_option("--post.blur_sigma", post_cmd->params.blur_sigma, "blur sigma in pixels");
    post->add_option("--post.bias_weight", post_cmd->params.bias_weight,
                     "center prior blend weight in [0, 1]");
    post->add_option("--post.bias_sigma", post_cmd->params.bias_sigma,
                     "center prior sigma as a fraction of the diagonal");
    post->callback([post_cmd] { post_cmd->execute(); });

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("saldist");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);  // prints help, exit 0
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return 1;
    }
    return *gradcheck_rc;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace saldist::cli
