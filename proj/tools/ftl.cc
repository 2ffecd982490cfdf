/*
 * Copyright 2026 The Secure FTL Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Experiment runner.
//
//   ftl --config run.conf --transport tcp --port 7100 --seed 3 --out results/

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ftl/errors.h"
#include "ftl/experiments.h"

int main(int argc, char** argv) {
  CLI::App app{"Secure federated transfer learning experiments"};
  std::string config_path, transport, out_dir = "out";
  int port = -1;
  int64_t seed = -1;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key = value experiment config")
      ->check(CLI::ExistingFile);
  app.add_option("--transport", transport, "loopback or tcp")
      ->check(CLI::IsMember({"loopback", "tcp"}));
  app.add_option("--port", port, "TCP port for the socket transport")
      ->check(CLI::Range(0, 65535));
  app.add_option("--seed", seed, "base seed")->check(CLI::NonNegativeNumber);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--set", overrides, "extra key=value settings");
  CLI11_PARSE(app, argc, argv);

  try {
    ftl::experiments::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = ftl::experiments::LoadConfig(config_path);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ftl::ConfigError("--set needs key=value");
      ftl::experiments::ApplySetting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!transport.empty()) ftl::experiments::ApplySetting(cfg, "transport", transport);
    if (port >= 0) cfg.protocol.port = static_cast<uint16_t>(port);
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);

    const ftl::experiments::RunResult r = ftl::experiments::RunExperiment(cfg);
    ftl::experiments::WriteOutputs(r, out_dir);
    std::cout << ftl::experiments::KindName(cfg.kind) << ": "
              << r.results.size() << " result rows written to " << out_dir
              << "\n";
  } catch (const ftl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
