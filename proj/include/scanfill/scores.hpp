#ifndef SCANFILL_SCORES_HPP
#define SCANFILL_SCORES_HPP

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "scanfill/tensor.hpp"

namespace scanfill {

struct ScoreRow {
  std::string model;
  std::string region;
  int fold = 0;
  std::string image_id;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const ScoreRow&) const = default;
};

using ScoreTable = std::vector<ScoreRow>;

inline void write_score_csv(std::ostream& os, const ScoreTable& table) {
  os << "model,region,fold,image_id,metric,value,seed\n";
  os << std::setprecision(17);
  for (const auto& r : table)
    os << r.model << ',' << r.region << ',' << r.fold << ',' << r.image_id
       << ',' << r.metric << ',' << r.value << ',' << r.seed << '\n';
}

inline void save_score_csv(const std::string& path, const ScoreTable& table) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_score_csv(os, table);
}

inline ScoreTable read_score_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) ||
      line != "model,region,fold,image_id,metric,value,seed")
    throw std::runtime_error("score table: bad or missing header");
  ScoreTable table;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ScoreRow r;
    std::string fold, value, seed;
    if (!std::getline(ls, r.model, ',') || !std::getline(ls, r.region, ',') ||
        !std::getline(ls, fold, ',') || !std::getline(ls, r.image_id, ',') ||
        !std::getline(ls, r.metric, ',') || !std::getline(ls, value, ',') ||
        !std::getline(ls, seed, ','))
      throw std::runtime_error("score table: malformed row: " + line);
    r.fold = std::stoi(fold);
    r.value = std::stod(value);
    r.seed = std::stoull(seed);
    table.push_back(std::move(r));
  }
  return table;
}

inline ScoreTable load_score_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_score_csv(is);
}

struct AggregateRow {
  std::string model;
  std::string region;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;  // sd / sqrt(n), 0 for a single sample
  std::size_t n = 0;
};

// per-(model, region, metric) mean and standard error of the mean
inline std::vector<AggregateRow> aggregate_scores(const ScoreTable& table) {
  std::map<std::tuple<std::string, std::string, std::string>,
           std::vector<double>>
      groups;
  for (const auto& r : table)
    groups[{r.model, r.region, r.metric}].push_back(r.value);
  std::vector<AggregateRow> out;
  for (const auto& [key, values] : groups) {
    AggregateRow a;
    std::tie(a.model, a.region, a.metric) = key;
    a.n = values.size();
    double sum = 0;
    for (double v : values) sum += v;
    a.mean = sum / static_cast<double>(a.n);
    if (a.n > 1) {
      double ss = 0;
      for (double v : values) ss += (v - a.mean) * (v - a.mean);
      const double sd = std::sqrt(ss / static_cast<double>(a.n - 1));
      a.stderr_ = sd / std::sqrt(static_cast<double>(a.n));
    }
    out.push_back(std::move(a));
  }
  return out;
}

inline void write_aggregate_csv(std::ostream& os,
                                const std::vector<AggregateRow>& rows) {
  os << "model,region,metric,mean,stderr,n\n";
  os << std::setprecision(17);
  for (const auto& a : rows)
    os << a.model << ',' << a.region << ',' << a.metric << ',' << a.mean << ','
       << a.stderr_ << ',' << a.n << '\n';
}

}  // namespace scanfill

#endif  // SCANFILL_SCORES_HPP
