#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stempick/config.hpp"
#include "stempick/harness.hpp"

namespace {

// accepts "2", "0,2,5" or "0..5"
std::vector<int> parse_greens(const std::string& spec) {
  std::vector<int> out;
  const auto dots = spec.find("..");
  if (dots != std::string::npos) {
    const int lo = std::stoi(spec.substr(0, dots));
    const int hi = std::stoi(spec.substr(dots + 2));
    for (int g = lo; g <= hi; ++g) out.push_back(g);
    return out;
  }
  size_t pos = 0;
  while (pos < spec.size()) {
    const size_t comma = spec.find(',', pos);
    const std::string tok =
        spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    out.push_back(std::stoi(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strawberry-picking training and evaluation harness"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run seeded training");
  std::string train_config, train_algo, train_out;
  std::vector<std::uint64_t> train_seeds;
  long train_steps = -1;
  train->add_option("--config", train_config, "YAML run configuration");
  train->add_option("--seed", train_seeds, "override the seed list");
  train->add_option("--algo", train_algo, "drm or drqv2")
      ->check(CLI::IsMember({"drm", "drqv2"}));
  train->add_option("--steps", train_steps, "override total steps");
  train->add_option("--out", train_out, "output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "run the evaluation protocol");
  std::string eval_ckpt, eval_out = "eval_out", eval_greens = "0..5";
  int eval_trials = 30;
  std::uint64_t eval_seed = 7;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--trials", eval_trials, "trials per configuration");
  eval->add_option("--greens", eval_greens, "green counts, e.g. 0..5 or 0,3,5");
  eval->add_option("--out", eval_out, "output directory");
  eval->add_option("--seed", eval_seed, "base seed for trial randomization");

  // trace
  auto* trace = app.add_subcommand("trace", "dump one episode as CSV");
  std::string trace_ckpt, trace_out = ".";
  std::uint64_t trace_seed = 0;
  int trace_greens = 0;
  trace->add_option("--ckpt", trace_ckpt, "checkpoint file")->required();
  trace->add_option("--seed", trace_seed, "episode seed");
  trace->add_option("--greens", trace_greens, "green strawberry count");
  trace->add_option("--out", trace_out, "output directory");

  // plot
  auto* plot = app.add_subcommand("plot", "render SVG charts from CSV");
  std::vector<std::string> plot_in;
  std::string plot_out = "plots";
  plot->add_option("--in", plot_in, "input CSV files")->required();
  plot->add_option("--out", plot_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train)) {
      stempick::RunConfig cfg;
      if (!train_config.empty()) cfg = stempick::load_run_config(train_config);
      if (!train_seeds.empty()) cfg.seeds = train_seeds;
      if (!train_algo.empty()) {
        cfg.algo = stempick::algo_from_name(train_algo);
        cfg.agent.algo = cfg.algo;
      }
      if (train_steps > 0) cfg.total_steps = train_steps;
      if (!train_out.empty()) cfg.out_dir = train_out;
      const auto results = stempick::cmd_train(cfg);
      for (const auto& r : results)
        std::cout << "seed " << r.seed << ": final eval success "
                  << r.last_eval_success << " (" << r.final_checkpoint << ")\n";
    } else if (app.got_subcommand(eval)) {
      stempick::cmd_eval(eval_ckpt, eval_trials, parse_greens(eval_greens), eval_out,
                         eval_seed);
    } else if (app.got_subcommand(trace)) {
      stempick::cmd_trace(trace_ckpt, trace_seed, trace_greens, trace_out);
    } else if (app.got_subcommand(plot)) {
      for (const auto& f : stempick::cmd_plot(plot_in, plot_out))
        std::cout << "wrote " << f << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
