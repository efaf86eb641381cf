// command-line front end: simulation, fitting, prediction, diagnostics and
// multigraph export with machine-readable outputs

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "micropart/diagnostics.hpp"
#include "micropart/generative.hpp"
#include "micropart/graphs.hpp"
#include "micropart/inference.hpp"
#include "micropart/io.hpp"
#include "micropart/partition.hpp"
#include "micropart/predict.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace micropart;

namespace {

struct CommonOpts {
  std::string model = "nonexch";
  double xi = 1.0;
  double gamma_coef = 1.0;
  double sigma = 0.5;
  double zeta = 1.0;
  double sigma2 = 0.0;
  double kappa2 = 1.0;
  std::uint64_t seed = 1;
  std::string out = ".";
};

ModelParams model_params(const CommonOpts& opt) {
  return ModelParams(opt.xi, opt.gamma_coef, opt.sigma, opt.zeta);
}

CrpParams crp_params(const CommonOpts& opt) { return CrpParams(opt.sigma2, opt.kappa2); }

void add_model_flags(CLI::App* cmd, CommonOpts& opt) {
  cmd->add_option("--model", opt.model, "nonexch | crp | crp2")
      ->check(CLI::IsMember({"nonexch", "crp", "crp2"}));
  cmd->add_option("--xi", opt.xi, "base-measure growth exponent");
  cmd->add_option("--gamma", opt.gamma_coef, "base-measure multiplier");
  cmd->add_option("--sigma", opt.sigma, "GGP power-law index in [0,1)");
  cmd->add_option("--zeta", opt.zeta, "GGP exponential tilt > 0");
  cmd->add_option("--sigma2", opt.sigma2, "CRP discount in [0,1)");
  cmd->add_option("--kappa2", opt.kappa2, "CRP strength > -sigma2");
}

std::string stats_json(const Partition& p) {
  const auto s = stats(p);
  json j;
  j["n"] = s.n;
  j["k"] = s.k;
  j["sizes"] = s.sizes;
  json hist = json::object();
  for (const auto& [r, count] : s.size_histogram) hist[std::to_string(r)] = count;
  j["size_histogram"] = hist;
  return j.dump(2) + "\n";
}

void write_latent_csv(const fs::path& path, const LatentState& state) {
  std::ostringstream out;
  out << "i,tau,theta,cluster\n";
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto c = static_cast<std::size_t>(state.labels[i]);
    out << (i + 1) << ',' << io::format_double(state.arrivals[i]) << ','
        << io::format_double(state.locations[c - 1]) << ',' << state.labels[i] << '\n';
  }
  io::write_text(path, out.str());
}

int cmd_simulate(const CommonOpts& opt, std::size_t n) {
  const fs::path dir(opt.out);
  fs::create_directories(dir);
  Rng rng(opt.seed);
  if (opt.model == "nonexch") {
    const auto [partition, state] = simulate_partition(n, model_params(opt), rng);
    io::write_partition(dir / "partition.txt", partition);
    write_latent_csv(dir / "latent.csv", state);
    io::write_text(dir / "stats.json", stats_json(partition));
  } else {
    const CrpParams crp = opt.model == "crp" ? CrpParams(0.0, opt.kappa2) : crp_params(opt);
    const auto partition = simulate_two_param_crp(n, crp, rng);
    io::write_partition(dir / "partition.txt", partition);
    io::write_text(dir / "stats.json", stats_json(partition));
  }
  return 0;
}

std::string surface_csv(const std::vector<SurfacePoint>& surface, bool crp) {
  std::ostringstream out;
  out << (crp ? "sigma2,kappa2" : "xi,sigma,zeta")
      << ",loglik_mean,loglik_sd,replicates,status\n";
  for (const auto& point : surface) {
    if (!crp) out << io::format_double(point.xi) << ',';
    out << io::format_double(point.sigma) << ',' << io::format_double(point.zeta) << ','
        << io::format_double(point.loglik_mean) << ',' << io::format_double(point.loglik_sd)
        << ',' << point.replicates << ',' << (point.ok ? "ok" : point.message) << '\n';
  }
  return out.str();
}

int cmd_fit(const CommonOpts& opt, const std::string& input, double train_frac,
            FitConfig config) {
  const fs::path dir(opt.out);
  fs::create_directories(dir);
  const auto full = io::read_partition(input);
  const auto n_train =
      std::max<std::size_t>(1, static_cast<std::size_t>(train_frac * static_cast<double>(full.size())));
  const auto train = restrict(full, n_train);
  config.seed = opt.seed;
  config.gamma_coef = opt.gamma_coef;

  json j;
  j["model"] = opt.model;
  j["n"] = full.size();
  j["n_train"] = n_train;
  if (opt.model == "nonexch") {
    const auto fit = fit_mle(train, config);
    j["best"] = {{"xi", fit.best.base.xi},
                 {"gamma", fit.best.base.gamma_coef},
                 {"sigma", fit.best.levy.sigma},
                 {"zeta", fit.best.levy.zeta}};
    j["loglik"] = fit.best_loglik;
    j["particles"] = config.n_particles;
    j["replicates"] = config.replicates;
    io::write_text(dir / "surface.csv", surface_csv(fit.surface, false));
  } else {
    const auto fit = fit_two_param_crp(train, config);
    j["best"] = {{"sigma2", fit.best.discount}, {"kappa2", fit.best.strength}};
    j["loglik"] = fit.best_loglik;
    io::write_text(dir / "surface.csv", surface_csv(fit.surface, true));
  }
  io::write_text(dir / "fit.json", j.dump(2) + "\n");
  return 0;
}

// reads fitted parameters back from a fit.json produced by cmd_fit
void apply_fit_file(const std::string& path, CommonOpts& opt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fit file " + path);
  json j;
  in >> j;
  const auto& best = j.at("best");
  opt.model = j.at("model").get<std::string>();
  if (opt.model == "nonexch") {
    opt.xi = best.at("xi").get<double>();
    opt.gamma_coef = best.at("gamma").get<double>();
    opt.sigma = best.at("sigma").get<double>();
    opt.zeta = best.at("zeta").get<double>();
  } else {
    opt.sigma2 = best.at("sigma2").get<double>();
    opt.kappa2 = best.at("kappa2").get<double>();
  }
}

int cmd_predict(const CommonOpts& opt, const std::string& input, double train_frac,
                std::size_t horizon_opt, std::size_t n_samples, std::size_t particles,
                std::int64_t r_max, int threads) {
  const fs::path dir(opt.out);
  fs::create_directories(dir);
  const auto truth = io::read_partition(input);
  const auto n_train =
      std::max<std::size_t>(1, static_cast<std::size_t>(train_frac * static_cast<double>(truth.size())));
  if (n_train >= truth.size() && horizon_opt == 0)
    throw std::invalid_argument("predict: train fraction leaves no test items");
  const auto train = restrict(truth, n_train);
  const std::size_t m = horizon_opt > 0 ? horizon_opt : truth.size() - n_train;

  std::vector<PredictiveSample> samples;
  Rng rng(opt.seed);
  if (opt.model == "nonexch") {
    FitConfig config;
    config.n_particles = particles;
    config.threads = threads;
    ParticleSystem system(train, model_params(opt), config, opt.seed);
    system.run_to_end();
    samples = predict_continuation(system, m, model_params(opt), rng, n_samples, threads);
  } else {
    const CrpParams crp = opt.model == "crp" ? CrpParams(0.0, opt.kappa2) : crp_params(opt);
    samples = predict_continuation_crp(train, m, crp, rng, n_samples);
  }

  // per-sample trajectories plus their pointwise mean
  const auto k_train = static_cast<std::size_t>(train.num_clusters());
  std::ostringstream traj;
  traj << "sample,step,cluster,size\n";
  std::vector<std::vector<double>> mean(k_train, std::vector<double>(m, 0.0));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (std::size_t j = 0; j < k_train; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        traj << s << ',' << (n_train + i + 1) << ',' << (j + 1) << ','
             << samples[s].trajectories[j][i] << '\n';
        mean[j][i] += static_cast<double>(samples[s].trajectories[j][i]);
      }
    }
  }
  io::write_text(dir / "trajectories.csv", traj.str());
  std::ostringstream mtraj;
  mtraj << "step,cluster,mean_size\n";
  for (std::size_t j = 0; j < k_train; ++j)
    for (std::size_t i = 0; i < m; ++i)
      mtraj << (n_train + i + 1) << ',' << (j + 1) << ','
            << io::format_double(mean[j][i] / static_cast<double>(samples.size())) << '\n';
  io::write_text(dir / "mean_trajectories.csv", mtraj.str());

  // L2 error distribution when the horizon matches the held-out span
  if (n_train + m == truth.size()) {
    const auto errors = l2_error(samples, truth, n_train);
    std::ostringstream err;
    err << "sample,E\n";
    for (std::size_t s = 0; s < errors.size(); ++s)
      err << s << ',' << io::format_double(errors[s]) << '\n';
    io::write_text(dir / "error.csv", err.str());

    auto sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
      const double pos = q * static_cast<double>(sorted.size() - 1);
      const auto lo = static_cast<std::size_t>(pos);
      const auto hi = std::min(lo + 1, sorted.size() - 1);
      return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    double total = 0.0;
    for (const double e : errors) total += e;
    json ej;
    ej["mean"] = total / static_cast<double>(errors.size());
    ej["q05"] = quantile(0.05);
    ej["q50"] = quantile(0.50);
    ej["q95"] = quantile(0.95);
    ej["samples"] = errors.size();
    io::write_text(dir / "error_summary.json", ej.dump(2) + "\n");
  }

  const auto bands = size_proportion_bands(samples, r_max, 0.95);
  std::ostringstream bandcsv;
  bandcsv << "r,lower,upper\n";
  for (const auto& band : bands)
    bandcsv << band.r << ',' << io::format_double(band.lower) << ','
            << io::format_double(band.upper) << '\n';
  io::write_text(dir / "bands.csv", bandcsv.str());
  return 0;
}

int cmd_graph(const CommonOpts& opt, const std::string& input) {
  const fs::path dir(opt.out);
  fs::create_directories(dir);
  const auto p = io::read_partition(input);
  const auto g = partition_to_multigraph(p);
  const auto deg = degree_stats(g);

  std::ostringstream edges;
  for (const auto& [a, b] : g.edges) edges << a << ' ' << b << '\n';
  io::write_text(dir / "edges.txt", edges.str());

  json j;
  j["vertices"] = g.num_vertices;
  j["edges"] = g.edges.size();
  j["dropped_last_item"] = g.dropped_last_item;
  json hist = json::object();
  for (const auto& [d, count] : deg.degree_histogram) hist[std::to_string(d)] = count;
  j["degree_histogram"] = hist;
  io::write_text(dir / "graph_summary.json", j.dump(2) + "\n");
  return 0;
}

int cmd_diagnose(const CommonOpts& opt, std::size_t n, double tail_fraction) {
  const fs::path dir(opt.out);
  fs::create_directories(dir);
  const auto params = model_params(opt);
  Rng rng(opt.seed);
  const auto [partition, state] = simulate_partition(n, params, rng);
  (void)partition;

  DiagnosticTolerances tol;
  tol.tail_fraction = tail_fraction;
  const auto report = asymptotic_report(state, params, tol);

  json j;
  j["params"] = {{"xi", opt.xi}, {"gamma", opt.gamma_coef}, {"sigma", opt.sigma}, {"zeta", opt.zeta}};
  j["n"] = n;
  j["seed"] = opt.seed;
  j["regime"] = to_string(report.regime);
  j["all_pass"] = report.all_pass;
  json checks = json::array();
  for (const auto& check : report.checks) {
    checks.push_back({{"name", check.name},
                      {"empirical", check.empirical},
                      {"theoretical", check.theoretical},
                      {"gap", check.gap},
                      {"tolerance", check.tolerance},
                      {"pass", check.pass}});
  }
  j["checks"] = checks;
  io::write_text(dir / "report.json", j.dump(2) + "\n");

  std::ostringstream traj;
  traj << "n,t,k,m1,m2,m3\n";
  std::int32_t k = 0;
  std::int64_t m1 = 0, m2 = 0, m3 = 0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    k = std::max(k, state.labels[i]);
    if (state.labels[i] == 1) ++m1;
    if (state.labels[i] == 2) ++m2;
    if (state.labels[i] == 3) ++m3;
    traj << (i + 1) << ',' << io::format_double(state.arrivals[i]) << ',' << k << ',' << m1 << ','
         << m2 << ',' << m3 << '\n';
  }
  io::write_text(dir / "trajectory.csv", traj.str());
  return report.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"non-exchangeable random partition toolkit"};
  app.require_subcommand(1);

  CommonOpts opt;
  std::size_t n = 1000;
  std::string input;
  double train_frac = 1.0;
  std::size_t horizon = 0;
  std::size_t n_samples = 100;
  std::int64_t r_max = 10;
  double tail_fraction = 0.5;
  FitConfig fit_config;
  std::string fit_file;
  std::string kernel_name = "fast";
  int threads = 1;

  auto* simulate = app.add_subcommand("simulate", "draw a partition and its latent state");
  add_model_flags(simulate, opt);
  simulate->add_option("--n", n, "number of items")->required();
  simulate->add_option("--seed", opt.seed, "rng seed")->required();
  simulate->add_option("--out", opt.out, "output directory")->required();

  auto* fit = app.add_subcommand("fit", "grid maximum likelihood on a training prefix");
  add_model_flags(fit, opt);
  fit->add_option("--input", input, "partition file, one token per line")->required();
  fit->add_option("--train-frac", train_frac, "prefix fraction used for fitting");
  fit->add_option("--particles", fit_config.n_particles, "SMC particle count");
  fit->add_option("--grid-sigma", fit_config.sigma_grid, "number of sigma grid points in [0,1)");
  fit->add_option("--grid-xi", fit_config.xi_grid, "xi grid values")->delimiter(',');
  std::vector<double> zeta_range{0.0, 100.0};
  fit->add_option("--zeta-range", zeta_range, "zeta search interval lo,hi")
      ->delimiter(',')
      ->expected(2);
  fit->add_option("--zeta-depth", fit_config.zeta_depth, "golden-section iterations");
  fit->add_option("--replicates", fit_config.replicates, "SMC replicates per objective value");
  fit->add_option("--ess-threshold", fit_config.ess_threshold, "resampling trigger fraction");
  fit->add_option("--kernel", kernel_name, "reference | fast")
      ->check(CLI::IsMember({"reference", "fast"}));
  fit->add_option("--threads", threads, "worker threads");
  fit->add_option("--seed", opt.seed, "rng seed")->required();
  fit->add_option("--out", opt.out, "output directory")->required();

  auto* predict = app.add_subcommand("predict", "posterior-predictive continuation");
  add_model_flags(predict, opt);
  predict->add_option("--input", input, "full partition file (train prefix + test span)")->required();
  predict->add_option("--fit", fit_file, "fit.json with fitted parameters");
  predict->add_option("--train-frac", train_frac, "prefix fraction treated as observed");
  predict->add_option("--m", horizon, "continuation length (default: rest of the file)");
  predict->add_option("--samples", n_samples, "number of predictive samples");
  predict->add_option("--particles", fit_config.n_particles, "SMC particle count");
  predict->add_option("--r-max", r_max, "largest cluster size in the bands file");
  predict->add_option("--threads", threads, "worker threads");
  predict->add_option("--seed", opt.seed, "rng seed")->required();
  predict->add_option("--out", opt.out, "output directory")->required();

  auto* graph = app.add_subcommand("graph", "partition-to-multigraph export");
  graph->add_option("--input", input, "partition file")->required();
  graph->add_option("--out", opt.out, "output directory")->required();

  auto* diagnose = app.add_subcommand("diagnose", "simulate and check the asymptotic laws");
  add_model_flags(diagnose, opt);
  diagnose->add_option("--n", n, "number of items (>= 1000)")->check(CLI::Range(std::size_t{1000}, std::size_t{100000000}));
  diagnose->add_option("--tail-fraction", tail_fraction, "fraction of points in exponent fits");
  diagnose->add_option("--seed", opt.seed, "rng seed")->required();
  diagnose->add_option("--out", opt.out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(opt, n);
    if (fit->parsed()) {
      fit_config.zeta_lo = zeta_range[0];
      fit_config.zeta_hi = zeta_range[1];
      fit_config.kernel = kernel_name == "reference" ? Kernel::reference : Kernel::fast;
      fit_config.threads = threads;
      return cmd_fit(opt, input, train_frac, fit_config);
    }
    if (predict->parsed()) {
      if (!fit_file.empty()) apply_fit_file(fit_file, opt);
      return cmd_predict(opt, input, train_frac, horizon, n_samples, fit_config.n_particles,
                         r_max, threads);
    }
    if (graph->parsed()) return cmd_graph(opt, input);
    if (diagnose->parsed()) return cmd_diagnose(opt, n, tail_fraction);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
