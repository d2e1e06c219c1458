#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "opod/io.hpp"

#ifndef OPOD_FIXTURE_DIR
#define OPOD_FIXTURE_DIR "fixtures"
#endif

#ifndef OPOD_VERSION
#define OPOD_VERSION "0.0.0-unknown"
#endif

namespace opod {

inline std::string version() { return OPOD_VERSION; }

/// Fixture directory: $OPOD_FIXTURES when set, else the build-time default.
inline std::filesystem::path fixture_dir()
{
   if (const char* env = std::getenv("OPOD_FIXTURES"); env && *env) return env;
   return OPOD_FIXTURE_DIR;
}

/// Everything a CLI invocation needs. Absent optionals mean "use the command's
/// default". Precedence is defaults < --config file < command-line flags.
struct ExperimentConfig {
   std::string command = "simulate";

   /// Fixture name ("instance1"), a path to an instance file, or an inline object.
   nlohmann::json instance = "instance1";

   std::string policy = "o3fu";
   double kappa = 0.1;
   double K = 1.0;
   std::optional<double> epsilon0;
   double delta0 = 0.1;
   std::uint64_t horizon_bound = 0;
   std::optional<double> fixed_price;
   std::size_t search_samples = 2048;

   /// auto infers the mode from which offline fields are set.
   std::string offline_mode = "auto";
   std::uint64_t offline_n = 0;
   std::optional<double> offline_price;  // single price, split center, adaptive seed price
   std::vector<double> offline_prices;
   std::optional<double> offline_delta;  // single price p* + delta
   std::optional<double> offline_sigma;  // split half-gap
   std::string adaptive_policy = "alternating";
   bool pooled = false;

   std::uint64_t T = 1000;
   std::optional<std::size_t> reps;
   std::uint64_t seed = 0;
   std::size_t jobs = 0;
   std::string out = "out";

   std::string axis;
   std::string grid;
   std::string figure;
};

inline nlohmann::json to_json(const ExperimentConfig& c)
{
   nlohmann::json j;
   j["command"] = c.command;
   j["instance"] = c.instance;
   j["policy"] = c.policy;
   j["kappa"] = c.kappa;
   j["K"] = c.K;
   j["epsilon0"] = c.epsilon0 ? nlohmann::json(*c.epsilon0) : nlohmann::json();
   j["delta0"] = c.delta0;
   j["horizon_bound"] = c.horizon_bound;
   j["fixed_price"] = c.fixed_price ? nlohmann::json(*c.fixed_price) : nlohmann::json();
   j["search_samples"] = c.search_samples;
   j["offline_mode"] = c.offline_mode;
   j["offline_n"] = c.offline_n;
   j["offline_price"] = c.offline_price ? nlohmann::json(*c.offline_price) : nlohmann::json();
   j["offline_prices"] = c.offline_prices;
   j["offline_delta"] = c.offline_delta ? nlohmann::json(*c.offline_delta) : nlohmann::json();
   j["offline_sigma"] = c.offline_sigma ? nlohmann::json(*c.offline_sigma) : nlohmann::json();
   j["adaptive_policy"] = c.adaptive_policy;
   j["pooled"] = c.pooled;
   j["T"] = c.T;
   j["reps"] = c.reps ? nlohmann::json(*c.reps) : nlohmann::json();
   j["seed"] = c.seed;
   j["jobs"] = c.jobs;
   j["out"] = c.out;
   j["axis"] = c.axis;
   j["grid"] = c.grid;
   j["figure"] = c.figure;
   return j;
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& dst)
{
   if (!j.contains(key) || j.at(key).is_null()) return;
   try {
      dst = j.at(key).get<T>();
   } catch (const nlohmann::json::exception&) {
      throw ParameterError(std::string("config field '") + key + "' has the wrong type");
   }
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, std::optional<T>& dst)
{
   if (!j.contains(key) || j.at(key).is_null()) return;
   T v{};
   read_field(j, key, v);
   dst = v;
}

} // namespace detail

/// Overlays the fields present in `j` onto `c`. Accepts a bare config object or
/// an emitted manifest (whose "config" member is used).
inline void merge_config(ExperimentConfig& c, const nlohmann::json& j_in)
{
   const nlohmann::json& j = j_in.contains("config") && j_in.at("config").is_object() ? j_in.at("config") : j_in;
   if (!j.is_object()) throw ParameterError("config must be a JSON object");
   static const char* known[] = {"command", "instance", "policy", "kappa", "K", "epsilon0", "delta0",
                                 "horizon_bound", "fixed_price", "search_samples", "offline_mode", "offline_n",
                                 "offline_price", "offline_prices", "offline_delta", "offline_sigma",
                                 "adaptive_policy", "pooled", "T", "reps", "seed", "jobs", "out", "axis", "grid",
                                 "figure"};
   for (const auto& [key, _] : j.items()) {
      if (std::find(std::begin(known), std::end(known), key) == std::end(known))
         throw ParameterError("unknown config field '" + key + "'");
   }
   using detail::read_field;
   read_field(j, "command", c.command);
   if (j.contains("instance") && !j.at("instance").is_null()) c.instance = j.at("instance");
   read_field(j, "policy", c.policy);
   read_field(j, "kappa", c.kappa);
   read_field(j, "K", c.K);
   read_field(j, "epsilon0", c.epsilon0);
   read_field(j, "delta0", c.delta0);
   read_field(j, "horizon_bound", c.horizon_bound);
   read_field(j, "fixed_price", c.fixed_price);
   read_field(j, "search_samples", c.search_samples);
   read_field(j, "offline_mode", c.offline_mode);
   read_field(j, "offline_n", c.offline_n);
   read_field(j, "offline_price", c.offline_price);
   read_field(j, "offline_prices", c.offline_prices);
   read_field(j, "offline_delta", c.offline_delta);
   read_field(j, "offline_sigma", c.offline_sigma);
   read_field(j, "adaptive_policy", c.adaptive_policy);
   read_field(j, "pooled", c.pooled);
   read_field(j, "T", c.T);
   read_field(j, "reps", c.reps);
   read_field(j, "seed", c.seed);
   read_field(j, "jobs", c.jobs);
   read_field(j, "out", c.out);
   read_field(j, "axis", c.axis);
   read_field(j, "grid", c.grid);
   read_field(j, "figure", c.figure);
}

inline nlohmann::json read_json_file(const std::string& path)
{
   std::ifstream in(path);
   if (!in) throw ParameterError("cannot open config file: " + path);
   try {
      return nlohmann::json::parse(in);
   } catch (const nlohmann::json::exception& e) {
      throw ParameterError("config file " + path + " is not valid JSON: " + e.what());
   }
}

/// Resolves an instance reference: inline object, existing path, or fixture name.
inline Instance resolve_instance(const nlohmann::json& ref)
{
   if (ref.is_object()) return instance_from_json(ref, "inline");
   if (!ref.is_string()) throw ParameterError("instance must be a fixture name, a path or an object");
   const std::string s = ref.get<std::string>();
   if (std::filesystem::exists(s)) return load_instance(s);
   std::filesystem::path p = fixture_dir() / s;
   if (p.extension() != ".json") p += ".json";
   if (std::filesystem::exists(p)) return load_instance(p.string());
   throw ParameterError("instance '" + s + "' is neither a file nor a fixture in " + fixture_dir().string());
}

/// Parses "lo:hi:logN", "lo:hi:linN" or a comma-separated list.
inline std::vector<double> parse_grid(const std::string& spec)
{
   auto to_double = [&](const std::string& s) {
      try {
         std::size_t used = 0;
         const double v = std::stod(s, &used);
         if (used != s.size()) throw std::invalid_argument(s);
         return v;
      } catch (const std::exception&) {
         throw ParameterError("bad number '" + s + "' in grid '" + spec + "'");
      }
   };
   std::vector<double> out;
   if (spec.find(':') != std::string::npos) {
      std::vector<std::string> parts;
      std::stringstream ss(spec);
      for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
      if (parts.size() != 3) throw ParameterError("grid '" + spec + "' must look like lo:hi:logN or lo:hi:linN");
      const double lo = to_double(parts[0]);
      const double hi = to_double(parts[1]);
      const std::string& kind = parts[2];
      const bool log = kind.rfind("log", 0) == 0;
      if (!log && kind.rfind("lin", 0) != 0) throw ParameterError("grid spacing must be logN or linN");
      const double count_d = to_double(kind.substr(3));
      const auto count = static_cast<std::size_t>(count_d);
      if (count < 1 || static_cast<double>(count) != count_d) throw ParameterError("grid point count must be >= 1");
      if (!(lo <= hi)) throw ParameterError("grid requires lo <= hi");
      if (log && !(lo > 0.0)) throw ParameterError("log grid requires lo > 0");
      for (std::size_t i = 0; i < count; ++i) {
         const double f = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
         double x = log ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f;
         if (i + 1 == count) x = hi;
         out.push_back(x);
      }
   } else {
      std::stringstream ss(spec);
      for (std::string part; std::getline(ss, part, ',');) out.push_back(to_double(part));
   }
   if (out.empty()) throw ParameterError("grid is empty");
   if (!std::is_sorted(out.begin(), out.end())) throw ParameterError("grid must be sorted");
   return out;
}

/// Builds a validated scenario from a configuration.
inline Scenario build_scenario(const ExperimentConfig& c)
{
   Scenario sc;
   sc.instance = resolve_instance(c.instance);
   const Instance& inst = sc.instance;
   if (c.T < 1) throw ParameterError("T must be at least 1");
   sc.T = c.T;

   PolicySpec& p = sc.policy;
   p.kind = policy_from_string(c.policy);
   p.kappa = c.kappa;
   p.K = c.K;
   p.epsilon0 = c.epsilon0;
   p.delta0 = c.delta0;
   p.horizon_bound = c.horizon_bound;
   p.fixed_price = c.fixed_price;
   p.search.samples = c.search_samples;
   if (c.search_samples < 2) throw ParameterError("search_samples must be at least 2");
   if (p.kind == PolicyKind::cils && !(c.kappa > 0.0)) throw ParameterError("kappa must be positive");
   if (p.kind == PolicyKind::tm_o3fu && !(c.K > 0.0)) throw ParameterError("K must be positive");
   if (c.epsilon0 && !(*c.epsilon0 > 0.0 && *c.epsilon0 <= 1.0)) throw ParameterError("epsilon0 must lie in (0, 1]");
   if (p.kind == PolicyKind::fixed_price && c.fixed_price && !inst.prices.contains(*c.fixed_price))
      throw ParameterError("fixed price outside [l, u]");

   OfflineSpec& o = sc.offline;
   const double p_star = optimal_price(inst.theta_star, inst.prices);
   std::string mode = c.offline_mode;
   if (mode == "auto") {
      if (!c.offline_prices.empty()) mode = "fixed";
      else if (c.offline_sigma) mode = "split";
      else if (c.offline_n > 0) mode = "fixed";
      else mode = "none";
   }
   if (mode == "none") {
      o.mode = OfflineMode::none;
   } else if (mode == "fixed") {
      o.mode = OfflineMode::fixed;
      o.pooled = c.pooled;
      if (!c.offline_prices.empty()) {
         o.prices = c.offline_prices;
         for (double x : o.prices)
            if (!inst.prices.contains(x)) throw ParameterError("offline price outside [l, u]");
      } else {
         if (c.offline_delta && c.offline_price)
            throw ParameterError("give either an offline price or an offline delta, not both");
         if (!c.offline_delta && !c.offline_price)
            throw ParameterError("single-price offline data needs an offline price or delta");
         o.price = c.offline_delta ? p_star + *c.offline_delta : *c.offline_price;
         o.n = c.offline_n;
         if (!inst.prices.contains(o.price)) throw ParameterError("offline price outside [l, u]");
      }
   } else if (mode == "split") {
      o.mode = OfflineMode::split;
      if (!(c.offline_sigma.value_or(0.0) >= 0.0)) throw ParameterError("split offline data needs sigma >= 0");
      if (!c.offline_price) throw ParameterError("split offline data needs a center price");
      o.center = *c.offline_price;
      o.sigma = c.offline_sigma.value_or(0.0);
      o.n = c.offline_n;
      if (!inst.prices.contains(o.center - o.sigma) || !inst.prices.contains(o.center + o.sigma))
         throw ParameterError("split offline prices center -/+ sigma outside [l, u]");
   } else if (mode == "adaptive") {
      o.mode = OfflineMode::adaptive;
      o.adaptive = adaptive_policy_from_string(c.adaptive_policy);
      o.price = c.offline_price.value_or(inst.prices.midpoint());
      o.n = c.offline_n;
   } else {
      throw ParameterError("unknown offline mode '" + mode + "'");
   }

   // Policy/data compatibility, checked up front so failures are config errors.
   const std::uint64_t n = o.mode == OfflineMode::none ? 0 : (o.prices.empty() ? o.n : o.prices.size());
   const bool single = o.mode == OfflineMode::none ||
                       (o.mode == OfflineMode::fixed &&
                        (o.prices.empty() || std::all_of(o.prices.begin(), o.prices.end(),
                                                         [&](double x) { return x == o.prices.front(); }))) ||
                       (o.mode == OfflineMode::split && (o.sigma == 0.0 || n < 2));
   if ((p.kind == PolicyKind::o3fu || p.kind == PolicyKind::speculator) && o.mode != OfflineMode::adaptive &&
       !single)
      throw ParameterError(std::string(to_string(p.kind)) + " requires single-price offline data");
   if ((p.kind == PolicyKind::tm_o3fu || p.kind == PolicyKind::speculator) && n == 0)
      throw ParameterError(std::string(to_string(p.kind)) + " requires offline data");
   if (p.kind == PolicyKind::myopic && (n < 2 || single))
      throw ParameterError("myopic requires offline data with at least two distinct prices");
   if (p.kind == PolicyKind::speculator && o.mode == OfflineMode::fixed && o.prices.empty()) {
      if (!inst.prices.contains(o.price - c.delta0) || !inst.prices.contains(o.price + c.delta0))
         throw ParameterError("speculator arms p_hat -/+ delta0 outside [l, u]");
   }
   return sc;
}

// ---------------------------------------------------------------------------
// Figure presets

/// One sweep of a reproduce preset.
struct PresetRun {
   Scenario scenario;
   SweepAxis axis;
   std::vector<double> grid;
};

inline const std::vector<std::string>& figure_ids()
{
   static const std::vector<std::string> ids = {"fig5", "fig6", "fig7", "fig8", "fig9", "fig10"};
   return ids;
}

/// The three bundled numerical-study instances with their study settings.
struct StudyInstance {
   const char* fixture;
   double offline_price;  // single historical price
   double split_center;   // mean historical price of the dispersion study
};

inline constexpr StudyInstance kStudy[] = {{"instance1", 1.8, 0.8}, {"instance2", 0.9, 0.8}, {"instance3", 1.0, 0.7}};

inline std::vector<double> log_grid(double lo, double hi, std::size_t count)
{
   std::vector<double> g;
   for (std::size_t i = 0; i < count; ++i) {
      const double f = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
      g.push_back(i + 1 == count ? hi : lo * std::pow(hi / lo, f));
   }
   return g;
}

inline std::vector<double> lin_grid(double lo, double hi, std::size_t count)
{
   std::vector<double> g;
   for (std::size_t i = 0; i < count; ++i) {
      const double f = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
      g.push_back(i + 1 == count ? hi : lo + (hi - lo) * f);
   }
   return g;
}

/// Sweeps making up a figure, at T = 10^4 as in the numerical study.
inline std::vector<PresetRun> figure_preset(const std::string& figure)
{
   constexpr std::uint64_t T = 10000;
   const std::vector<double> horizon = lin_grid(500, static_cast<double>(T), 20);
   std::vector<PresetRun> runs;
   auto base = [&](const StudyInstance& s) {
      Scenario sc;
      sc.instance = resolve_instance(s.fixture);
      sc.T = T;
      return sc;
   };
   auto with_policy = [](Scenario sc, PolicyKind k, double kappa = 0.1) {
      sc.policy.kind = k;
      sc.policy.kappa = kappa;
      return sc;
   };
   auto with_single = [](Scenario sc, double price, std::uint64_t n) {
      sc.offline.mode = OfflineMode::fixed;
      sc.offline.price = price;
      sc.offline.n = n;
      return sc;
   };

   for (const auto& s : kStudy) {
      const Scenario b = base(s);
      const double p_star = optimal_price(b.instance.theta_star, b.instance.prices);
      if (figure == "fig5" || figure == "fig6") {
         const Scenario src = figure == "fig6" ? with_single(b, s.offline_price, 1000) : b;
         runs.push_back({with_policy(src, PolicyKind::o3fu), SweepAxis::horizon, horizon});
         runs.push_back({with_policy(src, PolicyKind::cils, 0.1), SweepAxis::horizon, horizon});
         runs.push_back({with_policy(src, PolicyKind::cils, 0.5), SweepAxis::horizon, horizon});
      } else if (figure == "fig7") {
         runs.push_back({with_single(b, s.offline_price, 0), SweepAxis::offline_size, log_grid(20, 12000, 12)});
      } else if (figure == "fig8") {
         const double hi = 0.95 * (b.instance.prices.u - p_star);
         runs.push_back({with_single(b, p_star, 500), SweepAxis::delta, log_grid(0.05, hi, 9)});
      } else if (figure == "fig9") {
         Scenario sc = with_policy(b, PolicyKind::m_o3fu);
         sc.offline.mode = OfflineMode::split;
         sc.offline.center = s.split_center;
         sc.offline.n = 500;
         const double room = std::min(s.split_center - b.instance.prices.l, b.instance.prices.u - s.split_center);
         runs.push_back({sc, SweepAxis::sigma, log_grid(0.02, 0.95 * room, 9)});
      } else if (figure == "fig10") {
         for (const Scenario& src : {b, with_single(b, s.offline_price, 1000)}) {
            runs.push_back({with_policy(src, PolicyKind::o3fu), SweepAxis::horizon, horizon});
            runs.push_back({with_policy(src, PolicyKind::cils, 0.5), SweepAxis::horizon, horizon});
         }
      } else {
         throw ParameterError("unknown figure '" + figure + "' (expected fig5..fig10)");
      }
   }
   return runs;
}

// ---------------------------------------------------------------------------
// Commands

struct CommandResult {
   std::vector<std::filesystem::path> outputs;
   nlohmann::json summary;
};

inline void ensure_dir(const std::filesystem::path& dir)
{
   std::error_code ec;
   std::filesystem::create_directories(dir, ec);
   if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline std::ofstream open_output(const std::filesystem::path& path)
{
   std::ofstream out(path, std::ios::binary);
   if (!out) throw std::runtime_error("cannot write " + path.string());
   return out;
}

inline nlohmann::json aggregate_json(const Aggregate& a, std::size_t reps)
{
   return {{"reps", reps},
           {"mean_regret", a.mean},
           {"std_regret", a.std ? nlohmann::json(*a.std) : nlohmann::json()},
           {"ci95", a.ci95},
           {"mean_relative_regret", a.mean_relative}};
}

/// `reps` replications; writes trace.csv with one row per (replication, period).
inline CommandResult run_simulate(const ExperimentConfig& c)
{
   const Scenario sc = build_scenario(c);
   const std::size_t reps = c.reps.value_or(10);
   if (reps == 0) throw ParameterError("reps must be at least 1");
   std::vector<Trace> traces(reps);
   std::vector<RegretRecord> records(reps);
   parallel_for(reps, c.jobs, [&](std::size_t r) {
      CounterRng rng = replication_stream(c.seed, r);
      traces[r] = run_scenario(sc, rng);
      records[r] = regret(traces[r], sc.instance.theta_star, sc.instance.prices);
      records[r].replication_id = r;
      records[r].seed = c.seed;
   });
   ensure_dir(c.out);
   const auto path = std::filesystem::path(c.out) / "trace.csv";
   auto out = open_output(path);
   out << kTraceHeader << '\n';
   for (std::size_t r = 0; r < reps; ++r) write_trace_rows(out, traces[r], r);
   return {{path}, aggregate_json(summarize(std::move(records)), reps)};
}

inline CommandResult run_sweep_command(const ExperimentConfig& c)
{
   if (c.axis.empty()) throw ParameterError("sweep needs --axis");
   if (c.grid.empty()) throw ParameterError("sweep needs --grid");
   const SweepAxis axis = sweep_axis_from_string(c.axis);
   const auto grid = parse_grid(c.grid);
   Scenario sc = build_scenario(c);
   if (axis == SweepAxis::offline_size && sc.offline.mode == OfflineMode::none) {
      // An offline-size sweep only needs the price; n comes from the grid.
      if (!c.offline_price && !c.offline_delta) throw ParameterError("offline_size sweep needs an offline price");
      sc.offline.mode = OfflineMode::fixed;
      sc.offline.price = c.offline_delta ? optimal_price(sc.instance.theta_star, sc.instance.prices) + *c.offline_delta
                                         : *c.offline_price;
      sc.offline.pooled = c.pooled;
   }
   const std::size_t reps = c.reps.value_or(100);
   const SweepResult r = sweep(axis, grid, sc, reps, c.seed, c.jobs);
   ensure_dir(c.out);
   const auto path = std::filesystem::path(c.out) / "sweep.csv";
   auto out = open_output(path);
   write_sweep_csv(out, r);
   return {{path}, {{"points", r.points.size()}, {"reps", reps}}};
}

inline CommandResult run_reproduce(const ExperimentConfig& c)
{
   const auto& ids = figure_ids();
   if (std::find(ids.begin(), ids.end(), c.figure) == ids.end())
      throw ParameterError("unknown figure '" + c.figure + "' (expected fig5..fig10)");
   const auto runs = figure_preset(c.figure);
   const std::size_t reps = c.reps.value_or(100);
   ensure_dir(c.out);
   const auto path = std::filesystem::path(c.out) / (c.figure + ".csv");
   auto out = open_output(path);
   out << kSweepHeader << '\n';
   std::size_t rows = 0;
   for (const auto& run : runs) {
      const SweepResult r = sweep(run.axis, run.grid, run.scenario, reps, c.seed, c.jobs);
      write_sweep_rows(out, r);
      rows += r.points.size();
   }
   return {{path}, {{"rows", rows}, {"reps", reps}, {"sweeps", runs.size()}}};
}

/// Runs the configured command and writes manifest.json next to its outputs.
inline CommandResult run_command(const ExperimentConfig& c)
{
   const auto start = std::chrono::steady_clock::now();
   CommandResult res;
   if (c.command == "simulate") res = run_simulate(c);
   else if (c.command == "sweep") res = run_sweep_command(c);
   else if (c.command == "reproduce") res = run_reproduce(c);
   else throw ParameterError("unknown command '" + c.command + "'");
   const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

   nlohmann::json manifest;
   manifest["tool"] = "opod";
   manifest["version"] = version();
   manifest["config"] = to_json(c);
   manifest["wall_time_seconds"] = wall;
   manifest["summary"] = res.summary;
   std::vector<std::string> names;
   for (const auto& p : res.outputs) names.push_back(p.filename().string());
   manifest["outputs"] = names;
   const auto path = std::filesystem::path(c.out) / "manifest.json";
   auto out = open_output(path);
   out << manifest.dump(2) << '\n';
   res.outputs.push_back(path);
   return res;
}

} // namespace opod
