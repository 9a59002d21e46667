// Acceptance suite: runs every criterion and prints one PASS/FAIL line each.
// Usage: riskdpg_acceptance [--only N[,N...]] [--out DIR]

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "criteria.hpp"

int main(int argc, char** argv) {
  using namespace riskdpg::acceptance;
  std::set<int> only;
  std::filesystem::path out = std::filesystem::temp_directory_path() / "riskdpg_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else if (arg == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else {
      std::cerr << "usage: " << argv[0] << " [--only N[,N...]] [--out DIR]\n";
      return 2;
    }
  }
  std::filesystem::create_directories(out);

  int failed = 0, ran = 0;
  auto run = [&](int id, auto&& check) {
    if (!only.empty() && !only.count(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = CriterionResult{id, "criterion " + std::to_string(id), false,
                          std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << format_line(r) << " (" << secs << " s)" << std::endl;
    ++ran;
    failed += !r.passed;
  };

  run(1, [] { return gradient_fidelity(100); });
  run(2, [] { return cvar_oracle_equivalence(1000); });
  run(3, [] { return alpha_zero_reduction(50); });
  run(4, [] { return quantile_recovery(); });
  run(5, [] { return risk_separation(50'000, 3); });
  run(6, [&] { return robustness_protocol(out, 100'000); });
  run(7, [&] { return determinism(out); });
  run(8, [] { return hygiene(); });

  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
