#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "opod/harness.hpp"

namespace opod {

/// Shortest round-trip representation; locale independent.
inline std::string format_number(double x)
{
   char buf[32];
   std::snprintf(buf, sizeof buf, "%.17g", x);
   return buf;
}

// ---------------------------------------------------------------------------
// Instances

inline Instance instance_from_json(const nlohmann::json& j, std::string name = {})
{
   Instance inst;
   try {
      inst.name = j.value("name", std::move(name));
      inst.theta_star = {j.at("alpha").get<double>(), j.at("beta").get<double>()};
      inst.box = {j.at("alpha_min").get<double>(), j.at("alpha_max").get<double>(), j.at("beta_min").get<double>(),
                  j.at("beta_max").get<double>()};
      inst.prices = {j.at("l").get<double>(), j.at("u").get<double>()};
      inst.noise.scale = j.at("R").get<double>();
      inst.noise.family = noise_family_from_string(j.value("noise_family", std::string("gaussian")));
   } catch (const nlohmann::json::exception& e) {
      throw ParameterError(std::string("malformed instance: ") + e.what());
   }
   inst.validate();
   return inst;
}

inline nlohmann::json instance_to_json(const Instance& inst)
{
   return {{"name", inst.name},
           {"alpha", inst.theta_star.alpha},
           {"beta", inst.theta_star.beta},
           {"alpha_min", inst.box.alpha_min},
           {"alpha_max", inst.box.alpha_max},
           {"beta_min", inst.box.beta_min},
           {"beta_max", inst.box.beta_max},
           {"l", inst.prices.l},
           {"u", inst.prices.u},
           {"R", inst.noise.scale},
           {"noise_family", std::string(to_string(inst.noise.family))}};
}

inline Instance load_instance(const std::string& path)
{
   std::ifstream in(path);
   if (!in) throw ParameterError("cannot open instance file: " + path);
   nlohmann::json j;
   try {
      in >> j;
   } catch (const nlohmann::json::exception& e) {
      throw ParameterError("instance file " + path + " is not valid JSON: " + e.what());
   }
   std::string stem = path;
   if (auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
   if (auto dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
   return instance_from_json(j, stem);
}

// ---------------------------------------------------------------------------
// Design state checkpoints

inline nlohmann::json design_to_json(const DesignState& s)
{
   return {{"V", {s.V.xx, s.V.xy, s.V.yy}}, {"Y", {s.Y.alpha, s.Y.beta}}, {"t", s.t}, {"n", s.n}, {"lambda", s.lambda}};
}

inline DesignState design_from_json(const nlohmann::json& j)
{
   DesignState s;
   try {
      const auto& v = j.at("V");
      const auto& y = j.at("Y");
      if (v.size() != 3 || y.size() != 2) throw ParameterError("design state expects V[3] and Y[2]");
      s.V = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
      s.Y = {y[0].get<double>(), y[1].get<double>()};
      s.t = j.at("t").get<std::uint64_t>();
      s.n = j.at("n").get<std::uint64_t>();
      s.lambda = j.at("lambda").get<double>();
   } catch (const nlohmann::json::exception& e) {
      throw ParameterError(std::string("malformed design state: ") + e.what());
   }
   return s;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kTraceHeader = "rep,t,price,demand,flags";
inline constexpr const char* kSweepHeader = "axis,x,mean,std,ci95,reps,policy,instance,T,n,sigma,delta,seed";

inline void write_trace_rows(std::ostream& out, const Trace& trace, std::size_t rep)
{
   for (const auto& p : trace.periods) {
      out << rep << ',' << p.t << ',' << format_number(p.price) << ',' << format_number(p.demand) << ','
          << static_cast<unsigned>(p.flags) << '\n';
   }
}

inline void write_trace_csv(std::ostream& out, const Trace& trace, std::size_t rep = 0)
{
   out << kTraceHeader << '\n';
   write_trace_rows(out, trace, rep);
}

inline void write_sweep_rows(std::ostream& out, const SweepResult& r)
{
   for (const auto& p : r.points) {
      out << to_string(r.axis) << ',' << format_number(p.x) << ',' << format_number(p.mean) << ','
          << format_number(p.std) << ',' << format_number(p.ci95) << ',' << p.reps << ',' << r.policy << ','
          << r.instance << ',' << p.T << ',' << p.n << ',' << format_number(p.sigma) << ','
          << format_number(p.delta) << ',' << r.seed << '\n';
   }
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& r)
{
   out << kSweepHeader << '\n';
   write_sweep_rows(out, r);
}

} // namespace opod
