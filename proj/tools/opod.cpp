// Command-line front end: simulate | sweep | reproduce | selftest.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration (with a
// JSON error object on stderr).

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "opod/experiment.hpp"
#include "opod/selftest.hpp"

namespace {

int config_error(const std::string& message)
{
   std::cerr << nlohmann::json{{"error", "invalid_config"}, {"message", message}}.dump() << '\n';
   return 2;
}

int runtime_error(const std::string& message)
{
   std::cerr << nlohmann::json{{"error", "runtime_failure"}, {"message", message}}.dump() << '\n';
   return 1;
}

/// Raw flag values; only those actually given override the config file.
struct Flags {
   std::string config;
   std::string instance, policy, out, axis, grid, offline_mode, adaptive_policy;
   double kappa = 0, K = 0, delta0 = 0, epsilon0 = 0, offline_price = 0, offline_delta = 0, offline_sigma = 0,
          fixed_price = 0;
   std::uint64_t T = 0, seed = 0, offline_n = 0, horizon_bound = 0;
   std::size_t reps = 0, jobs = 0, search_samples = 0;
   std::vector<double> offline_prices;
   bool pooled = false;
};

struct Registered {
   std::vector<std::pair<CLI::Option*, std::function<void(opod::ExperimentConfig&)>>> apply;
};

template <class T, class Setter>
void add(CLI::App* app, Registered& reg, const std::string& name, T& slot, const std::string& help, Setter set)
{
   CLI::Option* opt = app->add_option(name, slot, help);
   reg.apply.emplace_back(opt, [&slot, set](opod::ExperimentConfig& c) { set(c, slot); });
}

void add_common(CLI::App* app, Flags& f, Registered& reg)
{
   using C = opod::ExperimentConfig;
   app->add_option("--config", f.config, "JSON config file or emitted manifest");
   add(app, reg, "--instance", f.instance, "fixture name or instance JSON path",
       [](C& c, const std::string& v) { c.instance = v; });
   add(app, reg, "--policy", f.policy, "o3fu | m_o3fu | tm_o3fu | speculator | cils | myopic | fixed",
       [](C& c, const std::string& v) { c.policy = v; });
   add(app, reg, "--T", f.T, "selling horizon", [](C& c, std::uint64_t v) { c.T = v; });
   add(app, reg, "--reps", f.reps, "replications", [](C& c, std::size_t v) { c.reps = v; });
   add(app, reg, "--seed", f.seed, "experiment seed", [](C& c, std::uint64_t v) { c.seed = v; });
   add(app, reg, "--jobs", f.jobs, "worker threads (0 = all cores)", [](C& c, std::size_t v) { c.jobs = v; });
   add(app, reg, "--out", f.out, "output directory", [](C& c, const std::string& v) { c.out = v; });
   add(app, reg, "--kappa", f.kappa, "CILS perturbation scale", [](C& c, double v) { c.kappa = v; });
   add(app, reg, "--K", f.K, "TM-O3FU corner-test threshold", [](C& c, double v) { c.K = v; });
   add(app, reg, "--epsilon0", f.epsilon0, "TM-O3FU offline confidence level",
       [](C& c, double v) { c.epsilon0 = v; });
   add(app, reg, "--delta0", f.delta0, "Speculator bet", [](C& c, double v) { c.delta0 = v; });
   add(app, reg, "--horizon-bound", f.horizon_bound, "myopic C0 horizon bound (0 = T)",
       [](C& c, std::uint64_t v) { c.horizon_bound = v; });
   add(app, reg, "--fixed-price", f.fixed_price, "price of the fixed baseline (default p*)",
       [](C& c, double v) { c.fixed_price = v; });
   add(app, reg, "--search-samples", f.search_samples, "line-search samples",
       [](C& c, std::size_t v) { c.search_samples = v; });
   add(app, reg, "--offline-mode", f.offline_mode, "auto | none | fixed | split | adaptive",
       [](C& c, const std::string& v) { c.offline_mode = v; });
   add(app, reg, "--offline-n", f.offline_n, "offline sample count", [](C& c, std::uint64_t v) { c.offline_n = v; });
   add(app, reg, "--offline-price", f.offline_price, "single offline price, or split center",
       [](C& c, double v) { c.offline_price = v; });
   add(app, reg, "--offline-prices", f.offline_prices, "explicit offline price list",
       [](C& c, const std::vector<double>& v) { c.offline_prices = v; });
   add(app, reg, "--offline-delta", f.offline_delta, "single offline price at p* + delta",
       [](C& c, double v) { c.offline_delta = v; });
   add(app, reg, "--offline-sigma", f.offline_sigma, "split offline prices at center -/+ sigma",
       [](C& c, double v) { c.offline_sigma = v; });
   add(app, reg, "--adaptive-policy", f.adaptive_policy, "constant | alternating | myopic",
       [](C& c, const std::string& v) { c.adaptive_policy = v; });
   CLI::Option* pooled = app->add_flag("--pooled", f.pooled, "keep single-price offline data as a sufficient statistic");
   reg.apply.emplace_back(pooled, [&f](C& c) { c.pooled = f.pooled; });
}

opod::ExperimentConfig resolve(const std::string& command, const Flags& f, const Registered& reg)
{
   opod::ExperimentConfig c;
   if (!f.config.empty()) opod::merge_config(c, opod::read_json_file(f.config));
   c.command = command;
   for (const auto& [opt, set] : reg.apply)
      if (opt->count() > 0) set(c);
   return c;
}

int selftest(std::uint64_t seed, std::size_t jobs)
{
   bool ok = true;
   const auto rep = opod::oracle_equivalence(50, seed);
   const bool oracle_ok = rep.missing == 0 && rep.max_value_gap <= 1e-4 && rep.max_price_gap <= 1e-3;
   std::printf("%s oracle-equivalence: %zu cases, max value gap %.3g, max price gap %.3g\n",
               oracle_ok ? "PASS" : "FAIL", rep.cases, rep.max_value_gap, rep.max_price_gap);
   ok = ok && oracle_ok;

   const opod::Instance inst = opod::resolve_instance("instance1");
   const double cov = opod::coverage_fraction(inst, 500, 200, seed, jobs);
   const bool cov_ok = cov >= 0.90;
   std::printf("%s coverage: theta* in every C_t on %.3f of 200 runs (T = 500)\n", cov_ok ? "PASS" : "FAIL", cov);
   ok = ok && cov_ok;
   return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
   CLI::App app{"Online pricing with offline data: simulation and regret experiments"};
   app.require_subcommand(1);
   app.set_version_flag("--version", opod::version());

   Flags sim_flags, sweep_flags, repro_flags;
   Registered sim_reg, sweep_reg, repro_reg;

   CLI::App* sim = app.add_subcommand("simulate", "replicate one policy and write per-period traces");
   add_common(sim, sim_flags, sim_reg);

   CLI::App* sw = app.add_subcommand("sweep", "replicated regret across a grid of one axis");
   add_common(sw, sweep_flags, sweep_reg);
   add(sw, sweep_reg, "--axis", sweep_flags.axis, "offline_size | delta | sigma | horizon",
       [](opod::ExperimentConfig& c, const std::string& v) { c.axis = v; });
   add(sw, sweep_reg, "--grid", sweep_flags.grid, "lo:hi:logN, lo:hi:linN or a comma list",
       [](opod::ExperimentConfig& c, const std::string& v) { c.grid = v; });

   std::string figure;
   CLI::App* repro = app.add_subcommand("reproduce", "run a figure preset (fig5..fig10)");
   add_common(repro, repro_flags, repro_reg);
   repro->add_option("figure", figure, "figure id")->required();

   std::uint64_t st_seed = 1;
   std::size_t st_jobs = 0;
   CLI::App* st = app.add_subcommand("selftest", "oracle-equivalence and coverage checks");
   st->add_option("--seed", st_seed, "seed");
   st->add_option("--jobs", st_jobs, "worker threads (0 = all cores)");

   try {
      app.parse(argc, argv);
   } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
   } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
   } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
   } catch (const CLI::ParseError& e) {
      return config_error(e.what());
   }

   try {
      if (st->parsed()) return selftest(st_seed, st_jobs);
      opod::ExperimentConfig cfg;
      if (sim->parsed()) cfg = resolve("simulate", sim_flags, sim_reg);
      else if (sw->parsed()) cfg = resolve("sweep", sweep_flags, sweep_reg);
      else {
         cfg = resolve("reproduce", repro_flags, repro_reg);
         cfg.figure = figure;
      }
      const auto res = opod::run_command(cfg);
      for (const auto& p : res.outputs) std::cout << p.string() << '\n';
      return 0;
   } catch (const opod::ParameterError& e) {
      return config_error(e.what());
   } catch (const std::exception& e) {
      return runtime_error(e.what());
   }
}
