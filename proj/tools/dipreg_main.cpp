// dipreg command line: per-pair registration, benchmark suites and
// synthetic pair generation.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical abort. Failures
// additionally print one machine-parsable JSON line on stderr.

#include "dipreg/baseline.hpp"
#include "dipreg/config.hpp"
#include "dipreg/engine.hpp"
#include "dipreg/field_io.hpp"
#include "dipreg/file_util.hpp"
#include "dipreg/image_io.hpp"
#include "dipreg/metrics.hpp"
#include "dipreg/report.hpp"
#include "dipreg/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace dipreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

void print_error(const char* kind, const std::string& message) {
  nlohmann::ordered_json j{{"error", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

// ---- shared helpers ----

struct PaddedPair {
  ImagePair padded;
  Index top = 0, left = 0;       // crop offsets
  Index height = 0, width = 0;   // original extents
};

Tensor pad_image(const Tensor& image, Index top, Index bottom, Index left,
                 Index right) {
  const Index c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const Index ph = h + top + bottom, pw = w + left + right;
  ArrayXd out = ArrayXd::Zero(c * ph * pw);
  for (Index ci = 0; ci < c; ++ci) {
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        out[(ci * ph + y + top) * pw + x + left] = image.at(ci, y, x);
      }
    }
  }
  return Tensor::constant({c, ph, pw}, std::move(out));
}

Tensor crop_tensor(const Tensor& t, Index top, Index left, Index h, Index w) {
  const Index c = t.dim(0), ph = t.dim(1), pw = t.dim(2);
  (void)ph;
  ArrayXd out(c * h * w);
  for (Index ci = 0; ci < c; ++ci) {
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        out[(ci * h + y) * w + x] = t.values()[(ci * pw + 0) * 0 +
                                               (ci * ph + y + top) * pw + x +
                                               left];
      }
    }
  }
  return Tensor::constant({c, h, w}, std::move(out));
}

// Symmetric zero padding up to the next multiple of `divisor`.
PaddedPair pad_to_divisible(const ImagePair& pair, Index divisor) {
  PaddedPair out;
  out.height = pair.height();
  out.width = pair.width();
  const Index ph = (pair.height() + divisor - 1) / divisor * divisor;
  const Index pw = (pair.width() + divisor - 1) / divisor * divisor;
  out.top = (ph - pair.height()) / 2;
  out.left = (pw - pair.width()) / 2;
  if (ph == pair.height() && pw == pair.width()) {
    out.padded = pair;
    return out;
  }
  const Index bottom = ph - pair.height() - out.top;
  const Index right = pw - pair.width() - out.left;
  out.padded = ImagePair{
      pad_image(pair.input, out.top, bottom, out.left, right),
      pad_image(pair.target, out.top, bottom, out.left, right)};
  return out;
}

// Crops a finished run back to the original frame; metrics are computed
// on original-size arrays only.
RunResult crop_result(const RunResult& result, const PaddedPair& frame) {
  if (frame.top == 0 && frame.left == 0 &&
      result.warped.dim(1) == frame.height &&
      result.warped.dim(2) == frame.width) {
    return result;
  }
  RunResult out;
  out.loss_curve = result.loss_curve;
  out.elapsed_seconds = result.elapsed_seconds;
  out.warped = crop_tensor(result.warped, frame.top, frame.left,
                           frame.height, frame.width);
  out.displacement.u = crop_tensor(result.displacement.u, frame.top,
                                   frame.left, frame.height, frame.width);
  out.grid = deformation_from(out.displacement);
  return out;
}

RunResult run_method(const std::string& method, const ImagePair& pair,
                     const FileConfig& config) {
  if (method == "dip") {
    const PaddedPair frame =
        pad_to_divisible(pair, config.run.generator.divisibility());
    return crop_result(register_dip(frame.padded, config.run), frame);
  }
  return register_baseline(pair, config.baseline);
}

Tensor detj_to_image(const JacobianMap& map) {
  // Normalized view: [0,2] mapped linearly onto [0,1]; raw values go to
  // the float32 sidecar.
  ArrayXd v = (map.det.max(0.0).min(2.0)) / 2.0;
  return Tensor::constant({1, map.height, map.width}, std::move(v));
}

void write_detj_sidecar(const fs::path& path, const JacobianMap& map) {
  std::vector<unsigned char> bytes;
  bytes.reserve(4 * map.det.size());
  for (Index i = 0; i < map.det.size(); ++i) {
    const float f = static_cast<float>(map.det[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    bytes.push_back(static_cast<unsigned char>(bits));
    bytes.push_back(static_cast<unsigned char>(bits >> 8));
    bytes.push_back(static_cast<unsigned char>(bits >> 16));
    bytes.push_back(static_cast<unsigned char>(bits >> 24));
  }
  atomic_write_file(path, bytes.data(), bytes.size());
}

// ---- register ----

struct RegisterArgs {
  std::string input, target, out_dir;
  std::string method;
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

int run_register(const RegisterArgs& args) {
  FileConfig config;
  if (!args.config_path.empty()) {
    try {
      config = config_from_key_values(load_key_values(args.config_path));
    } catch (const std::invalid_argument& e) {
      print_error("usage", e.what());
      return kExitUsage;
    } catch (const std::runtime_error& e) {
      print_error("io", e.what());
      return kExitIo;
    }
  }
  std::string method = args.method;
  if (method.empty()) method = config.method.value_or("");
  if (method != "dip" && method != "baseline") {
    print_error("usage", "--method must be dip or baseline (or set "
                         "'method' in the config file)");
    return kExitUsage;
  }
  if (args.seed) {
    config.run.seed = *args.seed;
    config.baseline.seed = *args.seed;
  }

  ImagePair pair;
  try {
    pair = ImagePair{load_image(args.input), load_image(args.target)};
    pair.validate();
  } catch (const std::runtime_error& e) {
    print_error("io", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    print_error("usage", e.what());
    return kExitUsage;
  }

  RunResult result;
  try {
    result = run_method(method, pair, config);
  } catch (const NumericalError& e) {
    print_error("numeric", e.what());
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    print_error("usage", e.what());
    return kExitUsage;
  }

  try {
    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    const PairMetrics metrics = evaluate_pair(pair, result, method);
    const JacobianMap detj = jacobian_det(result.grid);

    save_image(dir / "warped.pgm", result.warped);
    save_field(dir / "field.dipf", result.displacement);
    save_image(dir / "detj.pgm", detj_to_image(detj));
    write_detj_sidecar(dir / "detj_raw.f32", detj);
    atomic_write_file(dir / "metrics.json", metrics_to_json(metrics));
    atomic_write_file(dir / "loss_curve.csv",
                      loss_curve_to_csv(result.loss_curve));

    std::cout << "method=" << method << " ssim=" << metrics.ssim
              << " mean_detj=" << metrics.mean_detj
              << " neg_frac=" << metrics.neg_frac
              << " final_loss=" << metrics.final_loss
              << " elapsed_s=" << result.elapsed_seconds << "\n";
  } catch (const std::exception& e) {
    print_error("io", e.what());
    return kExitIo;
  }
  return kExitOk;
}

// ---- bench ----

struct BenchArgs {
  std::string suite;
  std::string methods = "dip,baseline";
  std::string out = "report.json";
  std::string config_path;
  unsigned jobs = 0;
};

struct SuiteEntry {
  std::string name;
  ImagePair pair;
};

std::vector<SuiteEntry> load_suite(const std::string& suite_path) {
  std::vector<SuiteEntry> entries;
  const fs::path path(suite_path);
  if (fs::is_directory(path)) {
    // Pairs are <name>_input.<ext> and <name>_target.<ext>.
    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(path)) {
      const std::string stem = entry.path().stem().string();
      if (stem.size() > 6 && stem.ends_with("_input")) {
        inputs.push_back(entry.path());
      }
    }
    std::sort(inputs.begin(), inputs.end());
    for (const fs::path& in : inputs) {
      std::string stem = in.stem().string();
      stem.resize(stem.size() - 6);  // drop "_input"
      fs::path target = in.parent_path() / (stem + "_target" +
                                            in.extension().string());
      if (!fs::exists(target)) {
        throw std::runtime_error("suite: missing target image for " +
                                 in.string());
      }
      SuiteEntry e;
      e.name = stem;
      e.pair = ImagePair{load_image(in), load_image(target)};
      e.pair.validate();
      entries.push_back(std::move(e));
    }
    if (entries.empty()) {
      throw std::runtime_error("suite: no *_input.* images under " +
                               suite_path);
    }
    return entries;
  }

  const SuiteManifest manifest =
      manifest_from_key_values(load_key_values(path));
  for (int i = 0; i < manifest.count; ++i) {
    SynthSpec spec = manifest.spec;
    spec.seed = manifest.spec.seed + static_cast<std::uint64_t>(i);
    SynthPair sp = synth_pair(spec);
    SuiteEntry e;
    std::ostringstream name;
    name << "synth_" << std::setw(3) << std::setfill('0') << i;
    e.name = name.str();
    e.pair = std::move(sp.pair);
    entries.push_back(std::move(e));
  }
  return entries;
}

int run_bench(const BenchArgs& args) {
  FileConfig config;
  std::vector<std::string> methods;
  {
    std::stringstream ss(args.methods);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item != "dip" && item != "baseline") {
        print_error("usage", "--methods entries must be dip or baseline");
        return kExitUsage;
      }
      methods.push_back(item);
    }
  }
  if (methods.empty()) {
    print_error("usage", "--methods must name at least one method");
    return kExitUsage;
  }
  if (!args.config_path.empty()) {
    try {
      config = config_from_key_values(load_key_values(args.config_path));
    } catch (const std::invalid_argument& e) {
      print_error("usage", e.what());
      return kExitUsage;
    } catch (const std::runtime_error& e) {
      print_error("io", e.what());
      return kExitIo;
    }
  }

  std::vector<SuiteEntry> suite;
  try {
    suite = load_suite(args.suite);
  } catch (const std::exception& e) {
    print_error("io", e.what());
    return kExitIo;
  }

  // One task per (pair, method); pairs are independent engine instances,
  // so tasks may run concurrently. Results land in a preallocated slot
  // per task, keeping row order deterministic.
  struct Task {
    std::size_t pair_index;
    std::string method;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < suite.size(); ++p) {
    for (const std::string& m : methods) tasks.push_back({p, m});
  }
  std::vector<BenchRow> rows(tasks.size());

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned jobs = std::min<std::size_t>(
      args.jobs == 0 ? hw : args.jobs, tasks.size());

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const Task& task = tasks[t];
      const SuiteEntry& entry = suite[task.pair_index];
      BenchRow& row = rows[t];
      row.pair_name = entry.name;
      row.method = task.method;
      try {
        FileConfig local = config;
        // Stable per-pair seeds, independent of execution order.
        local.run.seed = config.run.seed + task.pair_index;
        local.baseline.seed = config.baseline.seed + task.pair_index;
        const RunResult result = run_method(task.method, entry.pair, local);
        row.metrics = evaluate_pair(entry.pair, result, task.method);
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << entry.name << " " << task.method
                  << ": ssim=" << row.metrics->ssim
                  << " detj=" << row.metrics->mean_detj
                  << " (" << result.elapsed_seconds << "s)\n";
      } catch (const std::exception& e) {
        row.error = e.what();
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << entry.name << " " << task.method
                  << ": FAILED: " << e.what() << "\n";
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& th : pool) th.join();

  std::vector<PairMetrics> ok;
  for (const BenchRow& row : rows) {
    if (row.metrics) ok.push_back(*row.metrics);
  }
  if (ok.empty()) {
    print_error("numeric", "bench: every pair failed");
    return kExitNumeric;
  }

  try {
    const fs::path out(args.out);
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    fs::path csv = out;
    csv.replace_extension(".csv");
    atomic_write_file(csv, bench_rows_to_csv(rows));
    atomic_write_file(out, report_to_json(aggregate(ok)));
    std::cout << report_to_json(aggregate(ok));
  } catch (const std::exception& e) {
    print_error("io", e.what());
    return kExitIo;
  }
  return kExitOk;
}

// ---- synth ----

struct SynthArgs {
  std::string out_dir;
  int count = 1;
  SynthSpec spec;
};

int run_synth(const SynthArgs& args) {
  try {
    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    for (int i = 0; i < args.count; ++i) {
      SynthSpec spec = args.spec;
      spec.seed = args.spec.seed + static_cast<std::uint64_t>(i);
      const SynthPair sp = synth_pair(spec);
      std::ostringstream stem;
      stem << "pair_" << std::setw(3) << std::setfill('0') << i;
      save_image(dir / (stem.str() + "_input.pgm"), sp.pair.input);
      save_image(dir / (stem.str() + "_target.pgm"), sp.pair.target);
      save_field(dir / (stem.str() + "_gt.dipf"), sp.ground_truth);
    }
    std::cout << "wrote " << args.count << " pair(s) to " << args.out_dir
              << "\n";
  } catch (const std::invalid_argument& e) {
    print_error("usage", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    print_error("io", e.what());
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-free deformable registration: a convolutional "
               "generator, optimized per image pair, parameterizes the "
               "displacement field"};
  app.require_subcommand(1);

  RegisterArgs reg;
  CLI::App* reg_cmd = app.add_subcommand(
      "register", "Register one image pair and write results");
  reg_cmd->add_option("--input", reg.input, "Input (moving) image")
      ->required();
  reg_cmd->add_option("--target", reg.target, "Target (fixed) image")
      ->required();
  reg_cmd->add_option("--method", reg.method, "dip or baseline");
  reg_cmd->add_option("--config", reg.config_path,
                      "Flat key = value configuration file");
  reg_cmd->add_option("--out-dir", reg.out_dir, "Output directory")
      ->required();
  std::uint64_t seed_value = 0;
  CLI::Option* seed_opt =
      reg_cmd->add_option("--seed", seed_value, "Seed override");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "Run a suite of pairs under every method and aggregate");
  bench_cmd->add_option("--suite", bench.suite,
                        "Directory of *_input/*_target pairs, or a synth "
                        "manifest file")->required();
  bench_cmd->add_option("--methods", bench.methods,
                        "Comma list from {dip, baseline}");
  bench_cmd->add_option("--out", bench.out,
                        "Aggregate JSON path (per-pair CSV lands next to "
                        "it)");
  bench_cmd->add_option("--config", bench.config_path,
                        "Configuration applied to every run");
  bench_cmd->add_option("--jobs", bench.jobs,
                        "Concurrent runs (default: hardware threads)");

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand(
      "synth", "Generate synthetic pairs with known ground truth");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")
      ->required();
  synth_cmd->add_option("--count", synth.count, "Number of pairs");
  synth_cmd->add_option("--height", synth.spec.height, "Image height");
  synth_cmd->add_option("--width", synth.spec.width, "Image width");
  synth_cmd->add_option("--pattern", synth.spec.pattern,
                        "blobs, rings or checker");
  synth_cmd->add_option("--base-image", synth.spec.base_image,
                        "Base image path (overrides --pattern)");
  synth_cmd->add_option("--spacing", synth.spec.control_spacing,
                        "Control grid spacing, px");
  synth_cmd->add_option("--max-displacement", synth.spec.max_displacement,
                        "Max control displacement, px");
  synth_cmd->add_option("--sigma", synth.spec.smooth_sigma,
                        "Field smoothing sigma, px");
  synth_cmd->add_option("--seed", synth.spec.seed, "Base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      return app.exit(e);
    }
    print_error("usage", e.what());
    app.exit(e);  // prints usage text on stderr
    return kExitUsage;
  }

  if (reg_cmd->parsed()) {
    if (*seed_opt) reg.seed = seed_value;
    return run_register(reg);
  }
  if (bench_cmd->parsed()) return run_bench(bench);
  if (synth_cmd->parsed()) return run_synth(synth);
  return kExitUsage;
}
