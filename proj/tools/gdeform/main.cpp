#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "gdeform/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kVerification = 1, kConfig = 2, kIo = 3 };

std::shared_ptr<spdlog::logger> make_logger() {
  const char* env = std::getenv("GD_LOG");
  const std::string level = env ? env : "info";
  auto logger = spdlog::stderr_logger_st("gdeform");
  logger->set_pattern("[%l] %v");
  if (level == "quiet") logger->set_level(spdlog::level::off);
  else if (level == "info") logger->set_level(spdlog::level::info);
  else if (level == "debug") logger->set_level(spdlog::level::debug);
  else throw gdeform::ConfigError("GD_LOG must be quiet, info or debug, got '" + level + "'");
  return logger;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conjugate-net deformations of surfaces in S^3 and their reconstruction"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path, out_dir, grid_flag;
  double tol = 0;
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--tol", tol, "tolerance for membership and structure residuals");
  app.add_option("--grid", grid_flag, "grid override NUxNV or NUxNVxNT");

  for (const char* name : {"classify", "membership", "build", "reconstruct", "all"}) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  std::shared_ptr<spdlog::logger> log;
  try {
    log = make_logger();
  } catch (const gdeform::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }

  try {
    gdeform::Pipeline p;
    p.cfg = gdeform::load_config(config_path);
    if (!out_dir.empty()) p.cfg.out = out_dir;
    if (app.count("--tol")) {
      if (!(tol > 0)) throw gdeform::ConfigError("--tol must be positive");
      p.cfg.membership_tol = tol;
      p.cfg.triple_tol = tol;
    }
    if (!grid_flag.empty()) {
      const auto g = gdeform::parse_grid_flag(grid_flag);
      p.cfg.grid.nu = g[0];
      p.cfg.grid.nv = g[1];
      if (g.size() == 3) p.cfg.tgrid.nt = g[2];
    }
    gdeform::finalize_config(p.cfg);
    p.log = [&log](int level, const std::string& msg) {
      if (level == 0) log->info(msg);
      else log->debug(msg);
    };
    log->info("running {} into {}", sub, p.cfg.out.string());
    const bool pass = gdeform::run_subcommand(p, sub);
    std::ifstream summary(p.cfg.out / "summary.txt");
    for (std::string line; std::getline(summary, line);) log->info(line);
    return pass ? kOk : kVerification;
  } catch (const gdeform::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const gdeform::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kVerification;
  }
}
