#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "uk/bench.hpp"
#include "uk/error.hpp"

namespace uk::bench {

double quantile(std::vector<double> s, double q) {
  if (s.empty()) raise(Errc::bad_params, "no samples");
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (s[hi] - s[lo]) * (pos - static_cast<double>(lo));
}

Summary summarize(const std::vector<double>& samples) {
  return {quantile(samples, 0.5), quantile(samples, 0.1), quantile(samples, 0.9)};
}

BenchResult make_result(std::string name, std::map<std::string, std::string> params,
                        std::string unit, std::vector<double> samples) {
  if (samples.empty()) raise(Errc::bad_params, name + ": no samples");
  return {std::move(name), std::move(params), std::move(unit), std::move(samples), {}};
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_csv(const std::vector<BenchResult>& results) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : results) {
    std::map<std::string, std::string> params = r.params;
    params["unit"] = r.unit;
    std::string p;
    for (const auto& [k, v] : params) {
      if (!p.empty()) p += ';';
      p += k + "=" + v;
    }
    const Summary s = r.summary();
    out += r.name + "," + p + "," + num(s.median) + "," + num(s.p10) + "," + num(s.p90) + ",";
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      if (i) out += ' ';
      out += num(r.samples[i]);
    }
    out += '\n';
  }
  return out;
}

std::string to_json(const std::vector<BenchResult>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    const Summary s = r.summary();
    arr.push_back({{"name", r.name},
                   {"params", r.params},
                   {"unit", r.unit},
                   {"samples", r.samples},
                   {"median", s.median},
                   {"p10", s.p10},
                   {"p90", s.p90},
                   {"failures", r.failures}});
  }
  return arr.dump(2) + "\n";
}

}  // namespace uk::bench
