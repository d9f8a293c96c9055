// Command-line surface for the library: fit, transform, reconstruct,
// mu-sweep evaluation, loading inspection, synthetic data generation, and
// fit-time benchmarking. Exit codes: 0 success, 1 usage error, 2 runtime
// error. All output is deterministic given the flags.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "apca/apca.hpp"

namespace {

using apca::Matrix;

apca::Flavor parse_flavor(const std::string& s) {
  if (s == "supervised") return apca::Flavor::Supervised;
  if (s == "adversarial") return apca::Flavor::Adversarial;
  throw CLI::ValidationError("--flavor", "must be supervised or adversarial");
}

apca::Inference parse_inference(const std::string& s) {
  if (s == "local") return apca::Inference::Local;
  if (s == "encoded") return apca::Inference::Encoded;
  throw CLI::ValidationError("--inference", "must be local or encoded");
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> grid;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ','))
    grid.push_back(std::stod(tok));
  return grid;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(static_cast<std::size_t>(std::stoull(tok)));
  return out;
}

struct FitFlags {
  std::string primary, augmenting, out;
  bool has_header = false;
  std::string flavor = "supervised", inference = "encoded", decomp = "exact";
  std::size_t components = 2, oversample = 5, power_iters = 5;
  double mu = 0.0;
  std::uint64_t seed = 0;
};

void add_model_options(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--flavor", f.flavor)
      ->check(CLI::IsMember({"supervised", "adversarial"}))
      ->required();
  cmd->add_option("--inference", f.inference)
      ->check(CLI::IsMember({"local", "encoded"}))
      ->required();
  cmd->add_option("--components", f.components)
      ->check(CLI::PositiveNumber)
      ->required();
  cmd->add_option("--mu", f.mu)->check(CLI::NonNegativeNumber)->required();
  cmd->add_option("--decomp", f.decomp)
      ->check(CLI::IsMember({"exact", "approx"}));
  cmd->add_option("--oversample", f.oversample);
  cmd->add_option("--power-iters", f.power_iters);
  cmd->add_option("--seed", f.seed)->required();
}

apca::ApcaConfig make_config(const FitFlags& f) {
  apca::ApcaConfig cfg;
  cfg.flavor = parse_flavor(f.flavor);
  cfg.inference = parse_inference(f.inference);
  cfg.k = f.components;
  cfg.mu = f.mu;
  cfg.decomp = f.decomp == "exact" ? apca::Decomp::Exact : apca::Decomp::Approx;
  cfg.oversample = f.oversample;
  cfg.power_iters = f.power_iters;
  cfg.seed = f.seed;
  return cfg;
}

void emit_csv(const Matrix& m, const std::string& path) {
  if (path.empty())
    apca::write_csv(m, std::cout);
  else
    apca::write_csv(m, path);
}

int run_fit(const FitFlags& f) {
  const Matrix x = apca::read_csv(f.primary, f.has_header).values;
  const Matrix y = apca::read_csv(f.augmenting, f.has_header).values;
  const apca::ApcaModel model = apca::fit(make_config(f), x, y);
  apca::save(model, f.out);
  if (model.singular_gram_warning)
    std::cerr << "warning: singular Gram combination, pseudoinverse used\n";
  return 0;
}

int run_transform(const std::string& model_path, const std::string& primary,
                  const std::string& augmenting, bool has_header,
                  const std::string& out, bool reconstruct_mode,
                  const std::string& out_aug) {
  const apca::ApcaModel model = apca::load(model_path);
  const Matrix x = apca::read_csv(primary, has_header).values;
  Matrix y;
  const bool have_y = !augmenting.empty();
  if (have_y) y = apca::read_csv(augmenting, has_header).values;

  if (!reconstruct_mode) {
    const Matrix s = apca::transform(model, x, have_y ? &y : nullptr);
    emit_csv(s, out);
    return 0;
  }
  auto [xhat, yhat] = apca::reconstruct(model, x, have_y ? &y : nullptr);
  emit_csv(xhat, out);
  if (!out_aug.empty()) apca::write_csv(yhat, out_aug);
  return 0;
}

int run_eval(const FitFlags& f, const std::string& labels_path,
             const std::string& grid_csv, double test_fraction,
             bool standardize, const std::string& out) {
  apca::Dataset ds;
  ds.x = apca::read_csv(f.primary, f.has_header).values;
  ds.y = apca::read_csv(f.augmenting, f.has_header).values;
  if (!labels_path.empty()) {
    const Matrix raw = apca::read_csv(labels_path, f.has_header).values;
    if (raw.cols() != 1)
      throw std::runtime_error("label file must have exactly one column");
    for (std::size_t i = 0; i < raw.rows(); ++i)
      ds.labels.push_back(static_cast<int>(raw(i, 0)));
  }
  const std::vector<double> grid = parse_grid(grid_csv);
  const apca::EvalReport report = apca::mu_sweep(
      ds, make_config(f), grid, f.seed, test_fraction, standardize);
  if (out.empty()) {
    apca::write_report_csv(report, std::cout);
  } else {
    std::ofstream file(out);
    if (!file) throw std::runtime_error("cannot open report file: " + out);
    apca::write_report_csv(report, file);
  }
  return 0;
}

int run_top_loadings(const std::string& model_path, std::size_t component,
                     std::size_t top, const std::string& out) {
  const apca::ApcaModel model = apca::load(model_path);
  const std::size_t count = top == 0 ? model.p() : top;
  const auto ranked = apca::top_loadings(model.w, component, count);
  Matrix table(ranked.size(), 2);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    table(i, 0) = static_cast<double>(ranked[i].first);
    table(i, 1) = ranked[i].second;
  }
  if (out.empty())
    apca::write_csv(table, std::cout, {"feature", "loading"});
  else
    apca::write_csv(table, out, {"feature", "loading"});
  return 0;
}

int run_synth(const std::string& recipe, std::size_t n, std::size_t p,
              double noise_scale, std::uint64_t seed,
              const std::string& prefix) {
  const apca::Dataset ds = recipe == "supervised"
                               ? apca::synth_supervised(n, p, noise_scale, seed)
                               : apca::synth_adversarial(n, p, seed);
  apca::write_csv(ds.x, prefix + "_X.csv");
  apca::write_csv(ds.y, prefix + "_Y.csv");
  Matrix labels(ds.labels.size(), 1);
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    labels(i, 0) = static_cast<double>(ds.labels[i]);
  apca::write_csv(labels, prefix + "_labels.csv");
  return 0;
}

int run_bench(const std::string& p_list, std::size_t n, std::size_t q,
              std::size_t k, double mu, std::size_t oversample,
              std::size_t power_iters, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  std::cout << "p,n,q,exact_ms,approx_ms\n";
  for (std::size_t p : parse_size_list(p_list)) {
    const Matrix x = apca::gaussian_matrix(n, p, seed + p);
    const Matrix y = apca::gaussian_matrix(n, q, seed + p + 1);
    apca::ApcaConfig cfg;
    cfg.flavor = apca::Flavor::Supervised;
    cfg.inference = apca::Inference::Local;
    cfg.k = k;
    cfg.mu = mu;
    cfg.seed = seed;
    cfg.oversample = oversample;
    cfg.power_iters = power_iters;

    const auto t0 = clock::now();
    apca::fit(cfg, x, y);
    const auto t1 = clock::now();
    cfg.decomp = apca::Decomp::Approx;
    apca::fit(cfg, x, y);
    const auto t2 = clock::now();

    const auto ms = [](auto d) {
      return std::chrono::duration<double, std::milli>(d).count();
    };
    std::cout << p << ',' << n << ',' << q << ','
              << apca::format_double(ms(t1 - t0)) << ','
              << apca::format_double(ms(t2 - t1)) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised and adversarial augmented PCA"};
  app.require_subcommand(1);

  FitFlags fit_flags;
  CLI::App* fit = app.add_subcommand("fit", "Fit a model and save it");
  fit->add_option("--primary", fit_flags.primary)->required();
  fit->add_option("--augmenting", fit_flags.augmenting)->required();
  fit->add_flag("--has-header", fit_flags.has_header);
  add_model_options(fit, fit_flags);
  fit->add_option("--out", fit_flags.out)->required();

  std::string model_path, primary, augmenting, out, out_aug;
  bool has_header = false;
  CLI::App* transform =
      app.add_subcommand("transform", "Project data onto fitted factors");
  transform->add_option("--model", model_path)->required();
  transform->add_option("--primary", primary)->required();
  transform->add_option("--augmenting", augmenting);
  transform->add_flag("--has-header", has_header);
  transform->add_option("--out", out);

  CLI::App* reconstruct =
      app.add_subcommand("reconstruct", "Rebuild data from fitted factors");
  reconstruct->add_option("--model", model_path)->required();
  reconstruct->add_option("--primary", primary)->required();
  reconstruct->add_option("--augmenting", augmenting);
  reconstruct->add_flag("--has-header", has_header);
  reconstruct->add_option("--out", out);
  reconstruct->add_option("--out-augmenting", out_aug);

  FitFlags eval_flags;
  std::string labels_path, mu_grid;
  double test_fraction = 0.5;
  bool standardize = false;
  CLI::App* eval =
      app.add_subcommand("eval", "Mu-sweep with downstream classification");
  eval->add_option("--primary", eval_flags.primary)->required();
  eval->add_option("--augmenting", eval_flags.augmenting)->required();
  eval->add_option("--labels", labels_path);
  eval->add_flag("--has-header", eval_flags.has_header);
  add_model_options(eval, eval_flags);
  eval->get_option("--mu")->required(false);  // the grid supplies mu
  eval->add_option("--mu-grid", mu_grid)->required();
  eval->add_option("--test-fraction", test_fraction)
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  eval->add_flag("--standardize", standardize);
  eval->add_option("--out", out);

  std::string component_model;
  std::size_t component = 0, top = 0;
  CLI::App* loadings =
      app.add_subcommand("top-loadings", "Rank loading entries by magnitude");
  loadings->add_option("--model", component_model)->required();
  loadings->add_option("--component", component)->required();
  loadings->add_option("--top", top);
  loadings->add_option("--out", out);

  std::string recipe, prefix;
  std::size_t synth_n = 400, synth_p = 20;
  double noise_scale = 5.0;
  std::uint64_t synth_seed = 0;
  CLI::App* synth =
      app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("recipe", recipe)
      ->check(CLI::IsMember({"supervised", "adversarial"}))
      ->required();
  synth->add_option("--n", synth_n);
  synth->add_option("--p", synth_p);
  synth->add_option("--noise-scale", noise_scale);
  synth->add_option("--seed", synth_seed)->required();
  synth->add_option("--out", prefix)->required();

  std::string bench_p = "500,1000,2000";
  std::size_t bench_n = 1000, bench_q = 1, bench_k = 2, bench_s = 5,
              bench_t = 5;
  double bench_mu = 1.0;
  std::uint64_t bench_seed = 0;
  CLI::App* bench =
      app.add_subcommand("bench", "Time exact vs approximate fits");
  bench->add_option("--p", bench_p);
  bench->add_option("--n", bench_n);
  bench->add_option("--q", bench_q);
  bench->add_option("--components", bench_k);
  bench->add_option("--mu", bench_mu);
  bench->add_option("--oversample", bench_s);
  bench->add_option("--power-iters", bench_t);
  bench->add_option("--seed", bench_seed)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (fit->parsed()) return run_fit(fit_flags);
    if (transform->parsed())
      return run_transform(model_path, primary, augmenting, has_header, out,
                           false, "");
    if (reconstruct->parsed())
      return run_transform(model_path, primary, augmenting, has_header, out,
                           true, out_aug);
    if (eval->parsed())
      return run_eval(eval_flags, labels_path, mu_grid, test_fraction,
                      standardize, out);
    if (loadings->parsed())
      return run_top_loadings(component_model, component, top, out);
    if (synth->parsed())
      return run_synth(recipe, synth_n, synth_p, noise_scale, synth_seed,
                       prefix);
    if (bench->parsed())
      return run_bench(bench_p, bench_n, bench_q, bench_k, bench_mu, bench_s,
                       bench_t, bench_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
