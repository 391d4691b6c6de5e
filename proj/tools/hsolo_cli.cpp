// hsolo command-line tool: solve, generate, bench, theory, calibrate-epsilon-r.
//
// Exit codes: 0 success, 1 estimation failure, 2 input error.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hsolo/bench.hpp"
#include "hsolo/errors.hpp"
#include "hsolo/geometry.hpp"
#include "hsolo/hsolo.hpp"
#include "hsolo/io.hpp"
#include "hsolo/robust.hpp"
#include "hsolo/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNoModel = 1;
constexpr int kExitInputError = 2;

struct EstimatorFlags {
  double epsilon = 4.0;
  double p = 0.95;
  double w_f = 0.7;
  std::size_t n_f = 21;
  double epsilon_r = 20.0;
  std::uint64_t seed = 0;
  std::uint64_t max_iterations = hsolo::kDefaultMaxIterations;
  double inlier_scaling = 0.7;

  hsolo::HsoloConfig hsolo() const {
    hsolo::HsoloConfig c;
    c.epsilon = epsilon;
    c.p = p;
    c.w_f = w_f;
    c.n_f = n_f;
    c.epsilon_r = epsilon_r;
    c.seed = seed;
    c.inlier_scaling = inlier_scaling;
    c.max_outer_iterations = max_iterations;
    c.max_inner_iterations = max_iterations;
    return c;
  }

  hsolo::RansacConfig ransac() const {
    hsolo::RansacConfig c;
    c.epsilon = epsilon;
    c.p = p;
    c.seed = seed;
    c.max_iterations = max_iterations;
    return c;
  }

  nlohmann::ordered_json echo() const {
    nlohmann::ordered_json j;
    j["epsilon"] = epsilon;
    j["p"] = p;
    j["wf"] = w_f;
    j["nf"] = n_f;
    j["epsilon_r"] = epsilon_r;
    j["seed"] = seed;
    j["max_iterations"] = max_iterations;
    j["inlier_scaling"] = inlier_scaling;
    return j;
  }
};

void add_estimator_flags(CLI::App* app, EstimatorFlags& f) {
  app->add_option("--epsilon", f.epsilon, "Support threshold in pixels")->capture_default_str();
  app->add_option("--p", f.p, "Target success probability")->capture_default_str();
  app->add_option("--wf", f.w_f, "Assumed inlier rate of the filtered set")->capture_default_str();
  app->add_option("--nf", f.n_f, "Filtered set size")->capture_default_str();
  app->add_option("--epsilon-r", f.epsilon_r, "Median-error gate in pixels")->capture_default_str();
  app->add_option("--seed", f.seed, "Random seed")->capture_default_str();
  app->add_option("--max-iterations", f.max_iterations, "Iteration cap (RANSAC, and HSolo inner and outer loops)")
      ->capture_default_str();
  app->add_option("--inlier-scaling", f.inlier_scaling, "Factor applied to w when sizing the HSolo outer loop")
      ->capture_default_str();
}

struct SceneFlags {
  std::size_t n_total = 500;
  double inlier_rate = 0.1;
  double width = 640.0;
  double height = 480.0;
  double pixel_noise = 0.0;
  double scale_noise = 0.0;
  double angle_noise = 0.0;
  std::vector<double> truth;

  hsolo::SceneSpec spec() const {
    hsolo::SceneSpec s;
    if (!truth.empty()) {
      if (truth.size() != 9) throw hsolo::InvalidArgument("--truth needs 9 comma-separated entries");
      std::array<double, 9> h{};
      std::copy(truth.begin(), truth.end(), h.begin());
      s.truth = hsolo::Homography::from_row_major(h);
    } else {
      s.truth = hsolo::default_truth();
    }
    s.n_total = n_total;
    s.inlier_rate = inlier_rate;
    s.width = width;
    s.height = height;
    s.pixel_noise_sigma = pixel_noise;
    s.scale_noise_sigma = scale_noise;
    s.angle_noise_sigma = angle_noise;
    return s;
  }
};

void add_scene_flags(CLI::App* app, SceneFlags& f, bool with_rate) {
  app->add_option("--n-total", f.n_total, "Number of candidate correspondences")->capture_default_str();
  if (with_rate) app->add_option("--inlier-rate", f.inlier_rate, "Fraction of true correspondences")->capture_default_str();
  app->add_option("--width", f.width, "Image width in pixels")->capture_default_str();
  app->add_option("--height", f.height, "Image height in pixels")->capture_default_str();
  app->add_option("--pixel-noise", f.pixel_noise, "Gaussian sigma on inlier targets (pixels)")->capture_default_str();
  app->add_option("--scale-noise", f.scale_noise, "Log-normal sigma on feature scale")->capture_default_str();
  app->add_option("--angle-noise", f.angle_noise, "Gaussian sigma on feature angle (radians)")->capture_default_str();
  app->add_option("--truth", f.truth, "Ground-truth homography h1..h9, row-major")->delimiter(',');
}

// Writes to a file, or stdout for "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw hsolo::Error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

hsolo::CorrespondenceSet load_input(const std::string& path, bool points_only, std::optional<int> label) {
  if (points_only) return hsolo::load_point_correspondences(path, label);
  return hsolo::load_correspondences(path);
}

std::vector<hsolo::Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<hsolo::Method> out;
  for (const auto& n : names) {
    if (n == "hsolo") {
      out.push_back(hsolo::Method::kHsolo);
    } else if (n == "ransac") {
      out.push_back(hsolo::Method::kRansac);
    } else {
      throw hsolo::InvalidArgument("unknown method '" + n + "'");
    }
  }
  if (out.empty()) throw hsolo::InvalidArgument("no methods selected");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust homography estimation from affine-aware correspondences"};
  app.require_subcommand(1);

  // solve
  EstimatorFlags solve_flags;
  std::string solve_input, solve_output = "-", solve_method = "hsolo";
  bool solve_points_only = false, solve_no_timing = false;
  std::optional<int> solve_label;
  auto* solve = app.add_subcommand("solve", "Estimate a homography from a correspondence file");
  solve->add_option("--input,-i", solve_input, "Correspondence file")->required();
  solve->add_option("--output,-o", solve_output, "Result document ('-' for stdout)")->capture_default_str();
  solve->add_option("--method", solve_method, "hsolo or ransac")->check(CLI::IsMember({"hsolo", "ransac"}))->capture_default_str();
  solve->add_flag("--points-only", solve_points_only, "Input is point-only (u1 v1 u2 v2 [label]); ransac only");
  solve->add_option("--label", solve_label, "Structure label treated as inlier in point-only input");
  solve->add_flag("--no-timing", solve_no_timing, "Report elapsed time as 0 for reproducible output");
  add_estimator_flags(solve, solve_flags);

  // generate
  SceneFlags gen_scene;
  std::string gen_output = "-";
  std::uint64_t gen_seed = 0;
  bool gen_no_labels = false;
  auto* generate = app.add_subcommand("generate", "Write a synthetic correspondence file");
  generate->add_option("--output,-o", gen_output, "Correspondence file ('-' for stdout)")->capture_default_str();
  generate->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  generate->add_flag("--no-labels", gen_no_labels, "Omit the ground-truth inlier column");
  add_scene_flags(generate, gen_scene, true);

  // bench
  EstimatorFlags bench_flags;
  SceneFlags bench_scene;
  std::string bench_input, bench_records, bench_summary = "-";
  std::vector<double> bench_rates{0.03, 0.05, 0.10, 0.20, 0.40};
  std::vector<std::string> bench_methods{"hsolo", "ransac"};
  std::size_t bench_trials = 100, bench_threads = 1, bench_min_pts = 0;
  double bench_eps = 0.5, bench_threshold = 2.0;
  bool bench_points_only = false, bench_no_timing = false;
  std::optional<int> bench_label;
  auto* bench = app.add_subcommand("bench", "Compare estimators over seeded trials");
  bench->add_option("--input,-i", bench_input, "Correspondence file (default: synthetic sweep)");
  bench->add_flag("--points-only", bench_points_only, "Input is point-only; ransac only");
  bench->add_option("--label", bench_label, "Structure label treated as inlier in point-only input");
  bench->add_option("--rates", bench_rates, "Inlier rates of the synthetic sweep")->delimiter(',')->capture_default_str();
  bench->add_option("--methods", bench_methods, "Estimators to run")->delimiter(',')->capture_default_str();
  bench->add_option("--trials", bench_trials, "Trials per inlier rate")->capture_default_str();
  bench->add_option("--threads", bench_threads, "Worker threads")->capture_default_str();
  bench->add_option("--records", bench_records, "Per-trial CSV output");
  bench->add_option("--summary", bench_summary, "Summary CSV output ('-' for stdout)")->capture_default_str();
  bench->add_option("--success-threshold", bench_threshold, "Mean ground-truth error counted as success (pixels)")
      ->capture_default_str();
  bench->add_option("--dbscan-eps", bench_eps, "Clustering radius on mean errors (pixels)")->capture_default_str();
  bench->add_option("--dbscan-min-pts", bench_min_pts, "Clustering density (0: max(5, 2% of trials))")->capture_default_str();
  bench->add_flag("--no-timing", bench_no_timing, "Report elapsed times as 0 for reproducible output");
  add_estimator_flags(bench, bench_flags);
  add_scene_flags(bench, bench_scene, false);

  // theory
  std::vector<double> theory_rates;
  std::vector<std::size_t> theory_n{4};
  double theory_p = 0.95, theory_wf = 0.7;
  std::size_t theory_nf = 21;
  std::string theory_output = "-";
  auto* theory = app.add_subcommand("theory", "Tabulate theoretical iteration counts and HSolo speedup");
  theory->add_option("--rates", theory_rates, "Inlier rates (default 0.01..1.00 in steps of 0.01)")->delimiter(',');
  theory->add_option("--n", theory_n, "RANSAC sample sizes")->delimiter(',')->capture_default_str();
  theory->add_option("--p", theory_p, "Target success probability")->capture_default_str();
  theory->add_option("--nf", theory_nf, "Filtered set size")->capture_default_str();
  theory->add_option("--wf", theory_wf, "Assumed inlier rate of the filtered set")->capture_default_str();
  theory->add_option("--output,-o", theory_output, "CSV output ('-' for stdout)")->capture_default_str();

  // calibrate-epsilon-r
  std::string cal_input, cal_errors, cal_output = "-";
  std::size_t cal_nf = 21;
  auto* calibrate = app.add_subcommand("calibrate-epsilon-r", "Estimate the median-error gate as Q3 + 3 IQR");
  auto* cal_in_opt = calibrate->add_option("--input,-i", cal_input, "Correspondence file (inliers flagged when available)");
  auto* cal_err_opt = calibrate->add_option("--errors", cal_errors, "Plain list of errors, one per line");
  cal_in_opt->excludes(cal_err_opt);
  calibrate->add_option("--nf", cal_nf, "Filtered set size")->capture_default_str();
  calibrate->add_option("--output,-o", cal_output, "CSV output ('-' for stdout)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (*solve) {
      const auto data = load_input(solve_input, solve_points_only, solve_label);
      hsolo::EstimationResult result;
      nlohmann::ordered_json config;
      config["method"] = solve_method;
      config["input"] = solve_input;
      const nlohmann::ordered_json flags = solve_flags.echo();
      for (const auto& [k, v] : flags.items()) config[k] = v;
      try {
        if (solve_method == "hsolo") {
          if (!data.has_byproducts) throw hsolo::InvalidArgument("hsolo needs scale and angle columns; use --method ransac");
          result = hsolo::hsolo_estimate(data.items, solve_flags.hsolo());
        } else {
          if (data.items.size() < 4) throw hsolo::InsufficientData("ransac needs at least 4 correspondences");
          result = hsolo::ransac_homography(data.items, data.items, 1.0 / static_cast<double>(data.items.size()),
                                            solve_flags.ransac());
        }
      } catch (const hsolo::NoModelFound& e) {
        std::cerr << "no model found: " << e.what() << '\n';
        return kExitNoModel;
      }
      if (solve_no_timing) result.elapsed = 0.0;
      Output out(solve_output);
      hsolo::write_result(out.stream(), result, config);
    } else if (*generate) {
      hsolo::SceneSpec spec = gen_scene.spec();
      spec.seed = gen_seed;
      const hsolo::Scene scene = hsolo::generate_scene(spec);
      hsolo::CorrespondenceSet set;
      set.items = scene.correspondences;
      if (!gen_no_labels) set.inlier_mask = scene.inlier_mask;
      Output out(gen_output);
      hsolo::write_correspondences(out.stream(), set);
    } else if (*bench) {
      hsolo::BenchConfig config;
      config.inlier_rates = bench_rates;
      config.methods = parse_methods(bench_methods);
      config.trials = bench_trials;
      config.seed = bench_flags.seed;
      config.scene = bench_scene.spec();
      config.hsolo = bench_flags.hsolo();
      config.ransac = bench_flags.ransac();
      config.success_threshold = bench_threshold;
      config.threads = bench_threads;
      config.record_timing = !bench_no_timing;
      config.dbscan_eps = bench_eps;
      config.dbscan_min_pts = bench_min_pts;

      hsolo::BenchReport report;
      if (!bench_input.empty()) {
        report = hsolo::run_benchmark(load_input(bench_input, bench_points_only, bench_label), config);
      } else {
        report = hsolo::run_benchmark(config);
      }
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      if (!bench_records.empty()) {
        Output rec(bench_records);
        hsolo::write_records_csv(rec.stream(), report.records);
      }
      Output sum(bench_summary);
      hsolo::write_summary_csv(sum.stream(), report.summary);
    } else if (*theory) {
      if (theory_rates.empty()) {
        for (int i = 1; i <= 100; ++i) theory_rates.push_back(i / 100.0);
      }
      const auto rows = hsolo::theory_curves(theory_rates, theory_n, theory_p, theory_nf, theory_wf);
      Output out(theory_output);
      hsolo::write_theory_csv(out.stream(), rows);
    } else if (*calibrate) {
      std::vector<double> errors;
      if (!cal_errors.empty()) {
        std::ifstream in(cal_errors);
        if (!in) throw hsolo::Error("cannot open " + cal_errors);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
          ++line_no;
          const auto field = hsolo::detail::trim(line);
          if (hsolo::detail::skip_line(field)) continue;
          errors.push_back(hsolo::detail::parse_double(field, line_no));
        }
      } else if (!cal_input.empty()) {
        // Median filtered-set error seeded from each (flagged) inlier.
        const auto data = hsolo::load_correspondences(cal_input);
        for (std::size_t i = 0; i < data.items.size(); ++i) {
          if (data.inlier_mask && !(*data.inlier_mask)[i]) continue;
          const auto fs = hsolo::filter_by_model(hsolo::single_match_homography(data.items[i]), data.items, cal_nf);
          errors.push_back(fs.median_error);
        }
      } else {
        throw hsolo::InvalidArgument("calibrate-epsilon-r needs --input or --errors");
      }
      std::vector<double> sorted = errors;
      std::sort(sorted.begin(), sorted.end());
      const double eps_r = hsolo::estimate_epsilon_r(errors);
      Output out(cal_output);
      out.stream() << "epsilon_r,q1,q3,samples\n"
                   << hsolo::detail::format_double(eps_r) << ','
                   << hsolo::detail::format_double(hsolo::interpolated_percentile(sorted, 0.25)) << ','
                   << hsolo::detail::format_double(hsolo::interpolated_percentile(sorted, 0.75)) << ','
                   << errors.size() << '\n';
    }
  } catch (const hsolo::NoModelFound& e) {
    std::cerr << "no model found: " << e.what() << '\n';
    return kExitNoModel;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitOk;
}
