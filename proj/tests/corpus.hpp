#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

/// Every shipped model file plus a few grammar corner cases, as (name, source).
inline std::vector<std::pair<std::string, std::string>> test_corpus() {
  std::vector<std::pair<std::string, std::string>> out;
  const std::filesystem::path dir = std::filesystem::path(BUGSMC_SOURCE_DIR) / "models";
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".bug") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    std::ostringstream ss;
    ss << in.rdbuf();
    out.emplace_back(f.filename().string(), ss.str());
  }
  out.emplace_back("nested",
                   "model {\n  for (i in 1:N) { for (j in 1:M) { z[i,j] ~ dnorm(m[i] - -j, 1 / s^2) T(, 10) } }\n"
                   "  q <- (a != b) + (a <= b) * (a >= b) - (a < b) / (a > b) ^ 2 ^ -1 # comment\n}\n");
  out.emplace_back("slices", "model { x[,1] ~ dnorm(0, 1); y <- sum(p[2,]) + p[1:2, 3]; }\n");
  out.emplace_back("empty", "model { }\n");
  return out;
}
