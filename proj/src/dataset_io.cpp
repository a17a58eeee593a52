/*
 * Copyright 2026 The dgplvm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include "dgplvm/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "dgplvm/errors.hpp"

namespace dgplvm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ParseError(row, col,
                     "row " + std::to_string(row) + ", column " + std::to_string(col) +
                         ": expected a finite number, got '" + t + "'");
  }
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  // Shortest representation that round-trips.
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  if (!line.empty()) out.push_back(trim(cell));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

LoadedDataset parse_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw ParseError(1, 1, "dataset file is empty (no header row)");
  }
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "x_obs") {
    throw ParseError(1, 1, "header must start with 'id,x_obs'");
  }
  std::size_t col = 2;
  bool has_truth = false;
  if (header[col] == "x_true") {
    has_truth = true;
    ++col;
  }
  std::vector<std::string> y_names, dy_names;
  std::vector<std::size_t> y_cols, dy_cols;
  for (; col < header.size(); ++col) {
    const std::string& h = header[col];
    if (h.rfind("y:", 0) == 0 && h.size() > 2) {
      if (!dy_names.empty()) {
        throw ParseError(1, col + 1, "y: columns must precede dy: columns");
      }
      y_names.push_back(h.substr(2));
      y_cols.push_back(col);
    } else if (h.rfind("dy:", 0) == 0 && h.size() > 3) {
      dy_names.push_back(h.substr(3));
      dy_cols.push_back(col);
    } else {
      throw ParseError(1, col + 1, "unrecognized column '" + h +
                                       "' (expected x_true, y:<name> or dy:<name>)");
    }
  }
  if (y_names.empty()) throw ParseError(1, header.size(), "no y:<name> output columns");
  auto check_unique = [](const std::vector<std::string>& names, const std::string& kind) {
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (!seen.insert(n).second) {
        throw SchemaError("duplicate " + kind + " column name '" + n + "'");
      }
    }
  };
  check_unique(y_names, "y:");
  check_unique(dy_names, "dy:");

  LoadedDataset out;
  if (dy_names.empty()) {
    out.warnings.push_back("no dy: columns; derivative outputs are absent and only "
                           "derivative-free variants can be fitted");
  } else if (dy_names != y_names) {
    throw SchemaError("dy: columns must name the same dimensions as y: columns, in order");
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> x_obs, x_true;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(row, std::min(cells.size(), header.size()) + 1,
                       "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                           " cells, header has " + std::to_string(header.size()));
    }
    out.ids.push_back(cells[0]);
    x_obs.push_back(parse_number(cells[1], row, 2));
    if (has_truth) x_true.push_back(parse_number(cells[2], row, 3));
    std::vector<double> values;
    for (std::size_t c : y_cols) values.push_back(parse_number(cells[c], row, c + 1));
    for (std::size_t c : dy_cols) values.push_back(parse_number(cells[c], row, c + 1));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError(2, 1, "dataset has a header but no data rows");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(y_names.size());
  Dataset& data = out.data;
  data.x_obs = Eigen::Map<Eigen::VectorXd>(x_obs.data(), n);
  if (has_truth) data.x_true = Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(x_true.data(), n));
  data.y.resize(n, d);
  if (!dy_names.empty()) data.y_prime = Eigen::MatrixXd(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < d; ++k) {
      data.y(i, k) = r[static_cast<std::size_t>(k)];
      if (data.y_prime) (*data.y_prime)(i, k) = r[static_cast<std::size_t>(d + k)];
    }
  }
  data.dim_names = y_names;
  data.validate();
  return out;
}

LoadedDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  return parse_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data, bool include_truth,
                       const std::vector<std::string>& ids) {
  data.validate();
  const bool truth = include_truth && data.x_true.has_value();
  std::vector<std::string> names = data.dim_names;
  if (names.empty()) {
    for (Eigen::Index d = 0; d < data.n_dims(); ++d) names.push_back("d" + std::to_string(d + 1));
  }
  out << "id,x_obs";
  if (truth) out << ",x_true";
  for (const auto& n : names) out << ",y:" << n;
  if (data.y_prime) {
    for (const auto& n : names) out << ",dy:" << n;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < data.n_obs(); ++i) {
    out << (ids.empty() ? std::to_string(i + 1) : ids[static_cast<std::size_t>(i)]);
    out << ',' << format_double(data.x_obs[i]);
    if (truth) out << ',' << format_double((*data.x_true)[i]);
    for (Eigen::Index d = 0; d < data.n_dims(); ++d) out << ',' << format_double(data.y(i, d));
    if (data.y_prime) {
      for (Eigen::Index d = 0; d < data.n_dims(); ++d) {
        out << ',' << format_double((*data.y_prime)(i, d));
      }
    }
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       bool include_truth, const std::vector<std::string>& ids) {
  std::ofstream out = open_out(path);
  write_dataset_csv(out, data, include_truth, ids);
}

std::string dataset_hash(const Dataset& data) {
  std::ostringstream ss;
  write_dataset_csv(ss, data, false);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : ss.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json truth_to_json(const GroundTruth& t, const std::vector<std::string>& dim_names) {
  nlohmann::json j;
  j["x_true"] = vec_json(t.x_true);
  j["rho"] = vec_json(t.rho);
  j["alpha"] = vec_json(t.alpha);
  j["alpha_prime"] = vec_json(t.alpha_prime);
  j["sigma"] = vec_json(t.sigma);
  j["sigma_prime"] = vec_json(t.sigma_prime);
  nlohmann::json c = nlohmann::json::array();
  for (Eigen::Index i = 0; i < t.corr_matrix.rows(); ++i) {
    c.push_back(vec_json(t.corr_matrix.row(i).transpose()));
  }
  j["corr_matrix"] = c;
  j["dim_names"] = dim_names;
  return j;
}

GroundTruth truth_from_json(const nlohmann::json& j) {
  GroundTruth t;
  try {
    t.x_true = json_vec(j.at("x_true"));
    t.rho = json_vec(j.at("rho"));
    t.alpha = json_vec(j.at("alpha"));
    t.alpha_prime = json_vec(j.at("alpha_prime"));
    t.sigma = json_vec(j.at("sigma"));
    t.sigma_prime = json_vec(j.at("sigma_prime"));
    const auto& c = j.at("corr_matrix");
    t.corr_matrix.resize(static_cast<Eigen::Index>(c.size()), static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) {
      t.corr_matrix.row(static_cast<Eigen::Index>(i)) = json_vec(c[i]).transpose();
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed ground-truth JSON: ") + e.what());
  }
  return t;
}

void write_draws_csv(const std::filesystem::path& path, const std::vector<ChainDraws>& chains) {
  if (chains.empty()) throw InvalidArgument("no chains to write");
  std::ofstream out = open_out(path);
  const bool multi = chains.size() > 1;
  if (multi) out << "chain,";
  for (std::size_t k = 0; k < chains[0].param_names.size(); ++k) {
    out << (k ? "," : "") << csv_field(chains[0].param_names[k]);
  }
  out << '\n';
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const Eigen::MatrixXd& d = chains[c].draws;
    for (Eigen::Index s = 0; s < d.rows(); ++s) {
      if (multi) out << c + 1 << ',';
      for (Eigen::Index k = 0; k < d.cols(); ++k) out << (k ? "," : "") << format_double(d(s, k));
      out << '\n';
    }
  }
}

DrawTable read_draws_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, 1, "draws file is empty");
  DrawTable t;
  t.names = split_csv_line(line);
  const bool multi = !t.names.empty() && t.names[0] == "chain";
  if (multi) t.names.erase(t.names.begin());
  if (t.names.empty()) throw ParseError(1, 1, "draws file has no parameter columns");
  std::vector<std::vector<std::vector<double>>> per_chain;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.names.size() + (multi ? 1 : 0)) {
      throw ParseError(row, 1, "row " + std::to_string(row) + " has the wrong number of cells");
    }
    std::size_t chain = 0;
    if (multi) {
      const double c = parse_number(cells[0], row, 1);
      if (c < 1 || c != std::floor(c)) throw ParseError(row, 1, "chain ids must be 1, 2, ...");
      chain = static_cast<std::size_t>(c) - 1;
    }
    if (per_chain.size() <= chain) per_chain.resize(chain + 1);
    std::vector<double> values;
    for (std::size_t k = multi ? 1 : 0; k < cells.size(); ++k) {
      values.push_back(parse_number(cells[k], row, k + 1));
    }
    per_chain[chain].push_back(std::move(values));
  }
  for (const auto& rows : per_chain) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(t.names.size()));
    for (std::size_t s = 0; s < rows.size(); ++s) {
      for (std::size_t k = 0; k < rows[s].size(); ++k) {
        m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = rows[s][k];
      }
    }
    t.chains.push_back(std::move(m));
  }
  return t;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

}  // namespace dgplvm
