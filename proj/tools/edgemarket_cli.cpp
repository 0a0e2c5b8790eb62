// edgemarket command-line driver: simulate, train, compare, gen-trace.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgemarket/config.hpp"
#include "edgemarket/harness.hpp"
#include "edgemarket/trace.hpp"
#include "edgemarket/training.hpp"

using namespace edgemarket;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::string snapshot;
  std::string rt_clock = "wall";
  int runs = 0;  // 0: from config
  long long seed = -1;
};

std::vector<harness::Method> parse_methods(const std::string& list) {
  std::vector<harness::Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(harness::parse_method(item));
  if (out.empty()) throw std::invalid_argument("--methods needs at least one method");
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::shared_ptr<const reputation::LearnerState> learner_for(const config::MarketConfig& cfg, const Common& c,
                                                            const std::vector<harness::Method>& methods) {
  bool needed = false;
  for (auto m : methods) needed = needed || m == harness::Method::oh_trust;
  if (!needed) return nullptr;
  if (!c.snapshot.empty()) return std::make_shared<reputation::LearnerState>(reputation::load_snapshot(c.snapshot));
  auto res = training::run_training(cfg.scenario, cfg.rl, cfg.seed, cfg.rl.episodes);
  return std::make_shared<reputation::LearnerState>(std::move(res.learner));
}

int evaluate(const Common& c, const std::vector<harness::Method>& methods) {
  auto cfg = config::load(c.config);
  if (c.runs > 0) cfg.runs = c.runs;
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  harness::MonteCarloConfig mc;
  mc.runs = cfg.runs;
  mc.seed = cfg.seed;
  mc.options.clock.mode = c.rt_clock == "ops" ? market::DecisionClock::Mode::ops : market::DecisionClock::Mode::wall;
  mc.options.learner = learner_for(cfg, c, methods);
  const auto rep = harness::run_monte_carlo(cfg.scenario, cfg.rl, methods, mc);
  auto out = open_out(c.out);
  harness::write_report(out, rep);
  if (!out) throw std::runtime_error("failed writing " + c.out);
  for (const auto& r : rep.aggregate) harness::write_row(std::cout, r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edge resource market simulator"};
  app.require_subcommand(1);

  Common sim;
  std::string method;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo evaluation of one method");
  simulate->add_option("--config", sim.config, "config file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--method", method, "oh-trust, conspot, confutures, hybridfs or random")->required();
  simulate->add_option("--runs", sim.runs, "number of runs (default: run.runs)")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "base seed (default: run.seed)")->check(CLI::NonNegativeNumber);
  simulate->add_option("--out", sim.out, "metrics CSV")->required();
  simulate->add_option("--snapshot", sim.snapshot, "trained renewal agent (oh-trust); trains from the config if absent")
      ->check(CLI::ExistingFile);
  simulate->add_option("--rt-clock", sim.rt_clock, "decision runtime clock")->check(CLI::IsMember({"wall", "ops"}));

  Common cmp;
  std::string methods = "oh-trust,conspot,confutures,hybridfs,random";
  auto* compare = app.add_subcommand("compare", "Monte-Carlo evaluation of several methods on shared instances");
  compare->add_option("--config", cmp.config, "config file")->required()->check(CLI::ExistingFile);
  compare->add_option("--methods", methods, "comma-separated methods")->capture_default_str();
  compare->add_option("--runs", cmp.runs, "number of runs (default: run.runs)")->check(CLI::PositiveNumber);
  compare->add_option("--seed", cmp.seed, "base seed (default: run.seed)")->check(CLI::NonNegativeNumber);
  compare->add_option("--out", cmp.out, "metrics CSV")->required();
  compare->add_option("--snapshot", cmp.snapshot, "trained renewal agent; trains from the config if absent")
      ->check(CLI::ExistingFile);
  compare->add_option("--rt-clock", cmp.rt_clock, "decision runtime clock")->check(CLI::IsMember({"wall", "ops"}));

  std::string train_config, train_out, rewards_out;
  int episodes = 0;
  long long train_seed = -1;
  auto* train = app.add_subcommand("train", "Train the contract-renewal agent");
  train->add_option("--config", train_config, "config file")->required()->check(CLI::ExistingFile);
  train->add_option("--episodes", episodes, "training episodes (default: rl.episodes)")->check(CLI::PositiveNumber);
  train->add_option("--seed", train_seed, "seed (default: run.seed)")->check(CLI::NonNegativeNumber);
  train->add_option("--out", train_out, "snapshot file")->required();
  train->add_option("--rewards", rewards_out, "per-episode reward CSV");

  int buyers = 0, days = 0;
  long long gen_seed = 0;
  std::string gen_out;
  trace::GeneratorSpec spec;
  auto* gen = app.add_subcommand("gen-trace", "Write a synthetic demand trace");
  gen->add_option("--buyers", buyers, "number of buyers")->required()->check(CLI::PositiveNumber);
  gen->add_option("--days", days, "days per buyer")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "generator seed")->required()->check(CLI::NonNegativeNumber);
  gen->add_option("--out", gen_out, "trace CSV")->required();
  gen->add_option("--mean-min", spec.mean_min, "lowest per-buyer mean")->capture_default_str();
  gen->add_option("--mean-max", spec.mean_max, "highest per-buyer mean")->capture_default_str();
  gen->add_option("--season-amplitude", spec.season_amplitude, "relative seasonal swing")->capture_default_str();
  gen->add_option("--season-period", spec.season_period, "seasonal period in days")->capture_default_str();
  gen->add_option("--shift-day", spec.shift_day, "day of a level shift (negative: none)")->capture_default_str();
  gen->add_option("--shift-factor-min", spec.shift_factor_min, "lowest per-buyer multiplier after the shift")
      ->capture_default_str();
  gen->add_option("--shift-factor-max", spec.shift_factor_max, "highest per-buyer multiplier after the shift")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return evaluate(sim, {harness::parse_method(method)});
    if (*compare) return evaluate(cmp, parse_methods(methods));
    if (*train) {
      auto cfg = config::load(train_config);
      if (episodes > 0) cfg.rl.episodes = episodes;
      if (train_seed >= 0) cfg.seed = static_cast<std::uint64_t>(train_seed);
      const auto res = training::run_training(cfg.scenario, cfg.rl, cfg.seed, cfg.rl.episodes);
      reputation::save_snapshot(res.learner, train_out);
      if (!rewards_out.empty()) {
        auto out = open_out(rewards_out);
        out << "episode,reward,renewals\n";
        for (std::size_t k = 0; k < res.episode_rewards.size(); ++k) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.10g", res.episode_rewards[k]);
          out << k << ',' << buf << ',' << res.episode_renewals[k] << '\n';
        }
      }
      std::cout << "trained " << res.episode_rewards.size() << " episodes, snapshot written to " << train_out << '\n';
      return 0;
    }
    if (*gen) {
      trace::write_trace(gen_out, trace::generate_trace(buyers, days, static_cast<std::uint64_t>(gen_seed), spec));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
