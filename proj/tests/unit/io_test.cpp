#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "opod/experiment.hpp"
#include "oracles.hpp"

using namespace opod;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
   std::ifstream in(p, std::ios::binary);
   std::stringstream ss;
   ss << in.rdbuf();
   return ss.str();
}

fs::path scratch_dir(const std::string& name)
{
   const fs::path dir = fs::temp_directory_path() / ("opod_io_test_" + name);
   fs::remove_all(dir);
   fs::create_directories(dir);
   return dir;
}

} // namespace

TEST(InstanceJson, FixturesMatchReferenceInstances)
{
   const Instance refs[] = {oracle::instance1(), oracle::instance2(), oracle::instance3()};
   for (const auto& ref : refs) {
      const Instance inst = resolve_instance(ref.name);
      EXPECT_EQ(inst.name, ref.name);
      EXPECT_EQ(inst.theta_star, ref.theta_star);
      EXPECT_EQ(inst.box.alpha_min, ref.box.alpha_min);
      EXPECT_EQ(inst.box.alpha_max, ref.box.alpha_max);
      EXPECT_EQ(inst.box.beta_min, ref.box.beta_min);
      EXPECT_EQ(inst.box.beta_max, ref.box.beta_max);
      EXPECT_EQ(inst.prices.l, ref.prices.l);
      EXPECT_EQ(inst.prices.u, ref.prices.u);
      EXPECT_EQ(inst.noise.scale, ref.noise.scale);
      EXPECT_EQ(inst.noise.family, NoiseFamily::gaussian);
   }
}

TEST(InstanceJson, RoundTrip)
{
   Instance a = oracle::instance3();
   a.noise.family = NoiseFamily::uniform;
   const Instance b = instance_from_json(instance_to_json(a));
   EXPECT_EQ(b.name, a.name);
   EXPECT_EQ(b.theta_star, a.theta_star);
   EXPECT_EQ(b.noise.family, NoiseFamily::uniform);
   EXPECT_EQ(b.prices.u, a.prices.u);
}

TEST(InstanceJson, RejectsMalformedOrInfeasible)
{
   nlohmann::json j = instance_to_json(oracle::instance1());
   j.erase("R");
   EXPECT_THROW(instance_from_json(j), ParameterError);
   j = instance_to_json(oracle::instance1());
   j["alpha"] = 9.0;
   EXPECT_THROW(instance_from_json(j), ParameterError);
   EXPECT_THROW(resolve_instance("no_such_instance"), ParameterError);
   EXPECT_THROW(resolve_instance(42), ParameterError);
}

TEST(InstanceJson, FixtureDirectoryOverride)
{
   const fs::path dir = scratch_dir("fixtures");
   nlohmann::json j = instance_to_json(oracle::instance2());
   j.erase("name");
   std::ofstream(dir / "custom.json") << j.dump();
   ::setenv("OPOD_FIXTURES", dir.c_str(), 1);
   const Instance inst = resolve_instance("custom");
   ::unsetenv("OPOD_FIXTURES");
   EXPECT_EQ(inst.name, "custom");
   EXPECT_EQ(inst.theta_star, oracle::instance2().theta_star);
}

TEST(DesignJson, RoundTrip)
{
   OfflineDataset d;
   d.add(0.3, 1.7);
   d.add(1.1, 0.2);
   DesignState s = design_update(design_init(d, 5.0), 0.9, 1.3);
   const DesignState r = design_from_json(nlohmann::json::parse(design_to_json(s).dump()));
   EXPECT_EQ(r.V, s.V);
   EXPECT_EQ(r.Y, s.Y);
   EXPECT_EQ(r.t, 1u);
   EXPECT_EQ(r.n, 2u);
   EXPECT_EQ(r.lambda, 5.0);
   EXPECT_THROW(design_from_json(nlohmann::json{{"V", {1, 2}}, {"Y", {0, 0}}, {"t", 0}, {"n", 0}, {"lambda", 1}}),
                ParameterError);
}

TEST(Csv, NumbersRoundTrip)
{
   for (double x : {0.1, 1.0 / 3.0, -2.718281828459045, 1e-300, 12345678.9}) EXPECT_EQ(std::stod(format_number(x)), x);
}

TEST(Csv, TraceRows)
{
   Trace tr;
   tr.push(0.5, 1.25);
   tr.push(1.0, -0.5, std::nullopt, kCornerBranch | kRestart);
   std::ostringstream out;
   write_trace_csv(out, tr, 3);
   EXPECT_EQ(out.str(), "rep,t,price,demand,flags\n3,1,0.5,1.25,0\n3,2,1,-0.5,6\n");
}

TEST(Csv, SweepSchema)
{
   SweepResult r;
   r.axis = SweepAxis::delta;
   r.policy = "o3fu";
   r.instance = "instance1";
   r.seed = 7;
   SweepPoint p;
   p.x = 0.25;
   p.mean = 10;
   p.std = 2;
   p.ci95 = 0.5;
   p.reps = 64;
   p.T = 1000;
   p.n = 500;
   p.sigma = 0;
   p.delta = 0.25;
   r.points.push_back(p);
   std::ostringstream out;
   write_sweep_csv(out, r);
   EXPECT_EQ(out.str(), "axis,x,mean,std,ci95,reps,policy,instance,T,n,sigma,delta,seed\n"
                        "delta,0.25,10,2,0.5,64,o3fu,instance1,1000,500,0,0.25,7\n");
}

TEST(ParseGrid, LogLinAndList)
{
   const auto g = parse_grid("20:12000:log12");
   ASSERT_EQ(g.size(), 12u);
   EXPECT_DOUBLE_EQ(g.front(), 20.0);
   EXPECT_DOUBLE_EQ(g.back(), 12000.0);
   for (std::size_t i = 1; i + 1 < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], g[i + 1] / g[i], 1e-9);
   EXPECT_EQ(parse_grid("1:3:lin3"), (std::vector<double>{1, 2, 3}));
   EXPECT_EQ(parse_grid("5,7.5,9"), (std::vector<double>{5, 7.5, 9}));
   EXPECT_EQ(parse_grid("4:4:log1"), (std::vector<double>{4}));
}

TEST(ParseGrid, RejectsBadSpecs)
{
   for (const char* bad : {"", "1:2", "1:2:sqrt3", "0:5:log3", "5:1:lin3", "1:2:lin0", "1,x", "3,2,1", "1:2:log2.5"})
      EXPECT_THROW(parse_grid(bad), ParameterError) << bad;
}

TEST(Config, MergeAndPrecedence)
{
   ExperimentConfig c;
   merge_config(c, nlohmann::json{{"policy", "cils"}, {"kappa", 0.5}, {"T", 250}, {"reps", 3}, {"epsilon0", nullptr}});
   EXPECT_EQ(c.policy, "cils");
   EXPECT_EQ(c.kappa, 0.5);
   EXPECT_EQ(c.T, 250u);
   EXPECT_EQ(c.reps, 3u);
   EXPECT_FALSE(c.epsilon0);
   // A manifest's config member is accepted in place of a bare config.
   ExperimentConfig d;
   merge_config(d, nlohmann::json{{"tool", "opod"}, {"config", to_json(c)}});
   EXPECT_EQ(to_json(d), to_json(c));
   EXPECT_THROW(merge_config(d, nlohmann::json{{"polcy", "o3fu"}}), ParameterError);
   EXPECT_THROW(merge_config(d, nlohmann::json{{"T", "many"}}), ParameterError);
   EXPECT_THROW(merge_config(d, nlohmann::json::array()), ParameterError);
}

TEST(Config, BuildScenarioOfflineRecipes)
{
   ExperimentConfig c;
   c.offline_n = 100;
   c.offline_delta = 0.3;
   Scenario sc = build_scenario(c);
   EXPECT_EQ(sc.offline.mode, OfflineMode::fixed);
   EXPECT_NEAR(sc.offline.price, 2.6 / 3.6 + 0.3, 1e-12);

   c = {};
   c.policy = "m_o3fu";
   c.offline_n = 500;
   c.offline_price = 0.8;
   c.offline_sigma = 0.2;
   sc = build_scenario(c);
   EXPECT_EQ(sc.offline.mode, OfflineMode::split);
   EXPECT_EQ(sc.offline.center, 0.8);
   EXPECT_EQ(sc.offline.sigma, 0.2);

   c = {};
   EXPECT_EQ(build_scenario(c).offline.mode, OfflineMode::none);
}

TEST(Config, BuildScenarioRejectsIncompatibleSettings)
{
   auto bad = [](auto mutate) {
      ExperimentConfig c;
      mutate(c);
      EXPECT_THROW(build_scenario(c), ParameterError);
   };
   bad([](ExperimentConfig& c) { c.policy = "thompson"; });
   bad([](ExperimentConfig& c) { c.T = 0; });
   bad([](ExperimentConfig& c) { c.offline_n = 10; });  // neither price nor delta
   bad([](ExperimentConfig& c) {
      c.offline_n = 10;
      c.offline_price = 5.0;
   });
   bad([](ExperimentConfig& c) {
      c.offline_n = 10;
      c.offline_price = 1.0;
      c.offline_delta = 0.1;
   });
   bad([](ExperimentConfig& c) {
      c.offline_n = 10;
      c.offline_price = 1.0;
      c.offline_sigma = 0.3;  // o3fu with multi-price data
   });
   bad([](ExperimentConfig& c) { c.policy = "tm_o3fu"; });
   bad([](ExperimentConfig& c) { c.policy = "speculator"; });
   bad([](ExperimentConfig& c) {
      c.policy = "speculator";
      c.offline_n = 10;
      c.offline_price = 1.95;
   });
   bad([](ExperimentConfig& c) {
      c.policy = "myopic";
      c.offline_n = 10;
      c.offline_price = 1.0;
   });
   bad([](ExperimentConfig& c) {
      c.policy = "cils";
      c.kappa = 0.0;
   });
   bad([](ExperimentConfig& c) { c.epsilon0 = 1.5; });
   bad([](ExperimentConfig& c) { c.offline_mode = "mixed"; });
   bad([](ExperimentConfig& c) {
      c.policy = "fixed";
      c.fixed_price = 7.0;
   });
}

TEST(FigurePresets, ShapeOfEachFigure)
{
   for (const auto& id : figure_ids()) EXPECT_FALSE(figure_preset(id).empty()) << id;
   EXPECT_THROW(figure_preset("fig11"), ParameterError);

   for (const auto& run : figure_preset("fig7")) {
      EXPECT_EQ(run.axis, SweepAxis::offline_size);
      EXPECT_DOUBLE_EQ(run.grid.front(), 20.0);
      EXPECT_DOUBLE_EQ(run.grid.back(), 12000.0);
      EXPECT_EQ(run.scenario.T, 10000u);
   }
   for (const auto& run : figure_preset("fig8")) {
      EXPECT_EQ(run.axis, SweepAxis::delta);
      EXPECT_EQ(run.scenario.offline.n, 500u);
   }
   for (const auto& run : figure_preset("fig9")) {
      EXPECT_EQ(run.axis, SweepAxis::sigma);
      EXPECT_EQ(run.scenario.offline.mode, OfflineMode::split);
      EXPECT_EQ(run.scenario.offline.n, 500u);
      EXPECT_EQ(run.scenario.policy.kind, PolicyKind::m_o3fu);
   }
   // Every preset sweep is internally consistent.
   for (const auto& id : figure_ids())
      for (const auto& run : figure_preset(id))
         for (double x : run.grid) EXPECT_NO_THROW(sweep_scenario(run.axis, x, run.scenario)) << id;
}

TEST(RunCommand, SimulateWritesTraceAndManifest)
{
   const fs::path dir = scratch_dir("simulate");
   ExperimentConfig c;
   c.T = 40;
   c.reps = 2;
   c.seed = 7;
   c.out = dir.string();
   const auto res = run_command(c);
   ASSERT_EQ(res.outputs.size(), 2u);
   const std::string trace = slurp(dir / "trace.csv");
   EXPECT_EQ(trace.substr(0, trace.find('\n')), kTraceHeader);
   EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 1 + 2 * 40);
   const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
   EXPECT_EQ(manifest.at("version"), version());
   EXPECT_TRUE(manifest.at("wall_time_seconds").is_number());
   EXPECT_EQ(manifest.at("config").at("T"), 40);
}

TEST(RunCommand, ManifestRerunIsByteIdentical)
{
   const fs::path first = scratch_dir("rerun_a"), second = scratch_dir("rerun_b");
   ExperimentConfig c;
   c.command = "sweep";
   c.axis = "offline_size";
   c.grid = "10,40";
   c.offline_price = 1.8;
   c.T = 60;
   c.reps = 3;
   c.seed = 5;
   c.out = first.string();
   run_command(c);
   ExperimentConfig again;
   merge_config(again, nlohmann::json::parse(slurp(first / "manifest.json")));
   again.out = second.string();
   run_command(again);
   EXPECT_EQ(slurp(first / "sweep.csv"), slurp(second / "sweep.csv"));
}
