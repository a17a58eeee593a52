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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgplvm/model.hpp"
#include "dgplvm/sampler.hpp"
#include "dgplvm/simgen.hpp"

// File formats. Datasets are CSV with the header
//   id,x_obs[,x_true],y:<dim>...,dy:<dim>...
// draws are CSV with one column per parameter, summaries JSON.

namespace dgplvm {

/// A parsed dataset plus its row identifiers and non-fatal findings.
struct LoadedDataset {
  Dataset data;
  std::vector<std::string> ids;
  std::vector<std::string> warnings;
};

/// Parses the dataset CSV format. ParseError carries 1-based row/column of
/// the offending cell (row 1 is the header); SchemaError reports duplicate
/// or mismatched dimension names. A file without dy: columns loads with
/// y_prime absent and a warning.
LoadedDataset parse_dataset_csv(std::istream& in);
LoadedDataset read_dataset_csv(const std::filesystem::path& path);

/// Writes the dataset CSV; x_true is written only when requested and known.
/// Numbers use round-trip precision.
void write_dataset_csv(std::ostream& out, const Dataset& data, bool include_truth,
                       const std::vector<std::string>& ids = {});
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       bool include_truth, const std::vector<std::string>& ids = {});

/// FNV-1a of the canonical model-visible CSV (no x_true), as 16 hex digits.
std::string dataset_hash(const Dataset& data);

nlohmann::json truth_to_json(const GroundTruth& truth, const std::vector<std::string>& dim_names);
GroundTruth truth_from_json(const nlohmann::json& j);

/// Draws of one or more chains; a leading "chain" column is written when
/// more than one chain is present.
void write_draws_csv(const std::filesystem::path& path, const std::vector<ChainDraws>& chains);

/// Draws read back from CSV: one matrix per chain (S x P) and the names.
struct DrawTable {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> chains;
};
DrawTable read_draws_csv(const std::filesystem::path& path);

/// Round-trip decimal formatting (%.17g, shortest form preferred).
std::string format_double(double v);

/// Splits one CSV line on commas. Double-quoted fields may contain commas
/// (draws headers such as "C[1,2]" need this); cells are trimmed.
std::vector<std::string> split_csv_line(const std::string& line);
/// Quotes a field when it contains a comma or a quote.
std::string csv_field(const std::string& s);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace dgplvm
