#ifndef STABTUNE_IO_HPP
#define STABTUNE_IO_HPP

// CSV and JSON readers/writers for datasets, tuning tables, selection
// frequencies, experiment results and ground-truth sidecars.

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "stabtune/core.hpp"
#include "stabtune/eval.hpp"
#include "stabtune/simdata.hpp"
#include "stabtune/stabsel.hpp"
#include "stabtune/tuning.hpp"

namespace stabtune {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that parses back to the same double.
[[nodiscard]] inline std::string format_number(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  if (res.ec != std::errc{}) throw IoError("cannot format number");
  return std::string(buf, res.ptr);
}

[[nodiscard]] inline double parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw IoError("not a number: '" + std::string(text) + "'");
  return value;
}

[[nodiscard]] inline std::size_t parse_count(std::string_view text) {
  std::size_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw IoError("not a non-negative integer: '" + std::string(text) + "'");
  return value;
}

[[nodiscard]] inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[nodiscard]] inline std::string join_indices(const FeatureSet& set, char sep = ';') {
  std::string out;
  for (std::size_t a = 0; a < set.size(); ++a) {
    if (a) out += sep;
    out += std::to_string(set[a]);
  }
  return out;
}

namespace detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

// Commas would break the column layout.
inline std::string sanitize(std::string text) {
  for (char& c : text)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return text;
}

}  // namespace detail

// ---- datasets --------------------------------------------------------------

inline void write_dataset_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t j = 0; j < data.p(); ++j) out << data.feature_name(j) << ',';
  out << "y\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.p(); ++j)
      out << format_number(data.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << ',';
    out << data.y[i] << '\n';
  }
}

inline void write_dataset_csv(const std::string& path, const Dataset& data) {
  auto out = detail::open_out(path);
  write_dataset_csv(out, data);
  detail::finish(out, path);
}

/// Header row required; every column other than `label` is a numeric
/// feature. Labels must be 0 or 1.
[[nodiscard]] inline Dataset read_dataset_csv(std::istream& in, const std::string& label = "y") {
  std::string line;
  if (!detail::read_line(in, line)) throw IoError("dataset CSV is empty");
  const auto header = split(line, ',');
  std::size_t label_col = header.size();
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label && label_col == header.size()) label_col = c;
    else names.push_back(header[c]);
  }
  if (label_col == header.size()) throw IoError("dataset CSV has no label column '" + label + "'");
  if (names.empty()) throw IoError("dataset CSV has no feature columns");

  std::vector<double> values;
  std::vector<int> y;
  std::size_t row = 0;
  while (detail::read_line(in, line)) {
    if (line.empty()) continue;
    ++row;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw IoError("dataset CSV row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                    " fields, expected " + std::to_string(header.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      try {
        v = parse_number(cells[c]);
      } catch (const IoError& e) {
        throw IoError("dataset CSV row " + std::to_string(row) + ": " + e.what());
      }
      if (c == label_col) {
        if (v != 0.0 && v != 1.0)
          throw IoError("dataset CSV row " + std::to_string(row) + ": label must be 0 or 1");
        y.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
  }
  if (y.empty()) throw IoError("dataset CSV has no data rows");
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto p = static_cast<Eigen::Index>(names.size());
  Eigen::MatrixXd x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, p);
  try {
    return Dataset(std::move(x), std::move(y), std::move(names));
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("dataset CSV: ") + e.what());
  }
}

[[nodiscard]] inline Dataset read_dataset_csv(const std::string& path, const std::string& label = "y") {
  auto in = detail::open_in(path);
  return read_dataset_csv(in, label);
}

// ---- ground truth ----------------------------------------------------------

[[nodiscard]] inline nlohmann::json ground_truth_json(const GroundTruth& truth, const ScenarioSpec& spec) {
  nlohmann::json j;
  j["generating_features"] = truth.generating_features.indices();
  j["block_size"] = truth.block_size;
  j["p"] = spec.p;
  j["n"] = spec.n;
  j["within_corr"] = spec.within_corr;
  j["between_corr"] = spec.between_corr;
  j["seed"] = spec.seed;
  return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  detail::finish(out, path);
}

[[nodiscard]] inline nlohmann::json read_json(const std::string& path) {
  auto in = detail::open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

[[nodiscard]] inline GroundTruth read_ground_truth(const std::string& path) {
  const auto j = read_json(path);
  try {
    GroundTruth truth;
    truth.generating_features = FeatureSet(j.at("generating_features").get<std::vector<Index>>());
    truth.block_size = j.at("block_size").get<std::size_t>();
    if (truth.block_size < 1) throw IoError("ground truth: block_size must be >= 1");
    return truth;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("ground truth '" + path + "': " + e.what());
  }
}

// ---- tuning tables ---------------------------------------------------------

inline void write_tuning_csv(std::ostream& out, const std::vector<ConfigPerformance>& configs) {
  out << "k,mean_accuracy,stability,fold_support_sizes,error\n";
  for (const auto& c : configs) {
    out << c.k << ',' << format_number(c.mean_accuracy) << ','
        << (c.stability ? format_number(*c.stability) : std::string()) << ',';
    for (std::size_t f = 0; f < c.fold_feature_sets.size(); ++f)
      out << (f ? ";" : "") << c.fold_feature_sets[f].size();
    out << ',' << detail::sanitize(c.error) << '\n';
  }
}

inline void write_frequencies_csv(std::ostream& out, const SelectionFrequencies& freqs,
                                  const Dataset& data) {
  out << "feature,frequency\n";
  for (std::size_t j = 0; j < freqs.freq.size(); ++j)
    out << data.feature_name(j) << ',' << format_number(freqs.freq[j]) << '\n';
}

// ---- experiment results ----------------------------------------------------

inline constexpr const char* kResultsHeader =
    "scenario_id,replication,approach,test_accuracy,false_positives,false_negatives,n_selected,"
    "chosen_k,wall_time_ms,error";

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << r.scenario_id << ',' << r.replication << ',' << to_string(r.approach) << ','
        << format_number(r.test_accuracy) << ',' << r.false_positives << ',' << r.false_negatives << ','
        << r.n_selected << ',' << (r.chosen_k ? std::to_string(*r.chosen_k) : std::string()) << ','
        << format_number(r.wall_time_ms) << ',' << detail::sanitize(r.error) << '\n';
  }
}

[[nodiscard]] inline std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!detail::read_line(in, line) || line != kResultsHeader) throw IoError("results CSV: unexpected header");
  std::vector<ResultRow> rows;
  while (detail::read_line(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 10) throw IoError("results CSV: expected 10 fields in '" + line + "'");
    ResultRow r;
    r.scenario_id = cells[0];
    r.replication = parse_count(cells[1]);
    r.approach = parse_approach(cells[2]);
    r.test_accuracy = parse_number(cells[3]);
    r.false_positives = parse_count(cells[4]);
    r.false_negatives = parse_count(cells[5]);
    r.n_selected = parse_count(cells[6]);
    if (!cells[7].empty()) r.chosen_k = parse_count(cells[7]);
    r.wall_time_ms = parse_number(cells[8]);
    r.error = cells[9];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_nested_cv_csv(std::ostream& out, const std::vector<NestedCvRow>& rows) {
  out << "approach,outer_fold,test_accuracy,n_selected,chosen_k,cutoff,pfer,error\n";
  for (const auto& r : rows) {
    out << to_string(r.approach) << ',' << r.outer_fold << ',' << format_number(r.test_accuracy) << ','
        << r.n_selected << ',' << (r.chosen_k ? std::to_string(*r.chosen_k) : std::string()) << ','
        << (r.stabsel_params ? format_number(r.stabsel_params->cutoff) : std::string()) << ','
        << (r.stabsel_params ? format_number(r.stabsel_params->pfer) : std::string()) << ','
        << detail::sanitize(r.error) << '\n';
  }
}

/// Writes through a string buffer so a failed run leaves no partial file.
template <class Writer>
void write_file(const std::string& path, Writer&& writer) {
  std::ostringstream buffer;
  writer(buffer);
  auto out = detail::open_out(path);
  out << buffer.str();
  detail::finish(out, path);
}

}  // namespace stabtune

#endif  // STABTUNE_IO_HPP
