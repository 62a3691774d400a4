// Command-line front end: verify | denoise | classify | stats.
// Exit status: 0 success, 1 invariant failure, 2 config/load error.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "plapf/pipeline.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
};

int run(const std::string& task, const CliOptions& opts) {
  plapf::ExperimentConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = plapf::load_config(opts.config_path);
  } else if (task != "verify") {
    std::fprintf(stderr, "error: %s requires --config\n", task.c_str());
    return 2;
  }
  cfg.task = task;
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.workers > 0) cfg.workers = opts.workers;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;

  plapf::RunReport report = plapf::run_task(cfg);
  plapf::write_report(report, cfg.out_dir);

  if (task == "verify") {
    for (const auto& row : report.rows)
      std::printf("%-7s %s/%s residual=%s threshold=%s\n", row[4].c_str(),
                  row[0].c_str(), row[1].c_str(), row[2].c_str(), row[3].c_str());
  }
  std::printf("%s: %zu rows -> %s/%s_report.csv\n", task.c_str(), report.rows.size(),
              cfg.out_dir.c_str(), task.c_str());
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph quasi-framelet transforms with p-Laplacian smoothing"};
  app.require_subcommand(1);

  CliOptions opts;
  std::string task;
  for (const auto& [name, desc] :
       {std::pair<const char*, const char*>{"verify", "run the verification suites"},
        {"denoise", "feature denoising experiments"},
        {"classify", "semi-supervised node classification"},
        {"stats", "dataset statistics and homophily"}}) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", opts.config_path, "JSON config file");
    sub->add_option("--seed", opts.seed, "override the config seed")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    sub->add_option("--workers", opts.workers, "parallel grid workers");
    sub->add_option("--out", opts.out_dir, "report output directory");
    sub->callback([&task, name = std::string(name)] { task = name; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return run(task, opts);
  } catch (const plapf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const plapf::LoadError& e) {
    std::fprintf(stderr, "load error: %s\n", e.what());
    return 2;
  } catch (const plapf::SplitError& e) {
    std::fprintf(stderr, "split error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
