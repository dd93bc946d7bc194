/*
 * Copyright 2026 The medimpute Authors
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
 */

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "medimpute/panel.hpp"

namespace medimpute {

/// Token that marks a missing cell in panel CSV files.
inline constexpr const char* missing_token = "NA";

/// Parses a panel CSV against its schema. Rows come back sorted by
/// (individual, timestamp). Throws DataError naming the offending data row
/// (1-based, header excluded) on any violation.
PanelDataset read_csv(std::istream& in, const Schema& schema);
PanelDataset load_csv(const std::string& path, const Schema& schema);

/// Writes id, time and features in the dataset's column order; missing cells as NA.
void write_csv(std::ostream& out, const PanelDataset& ds);
void save_csv(const std::string& path, const PanelDataset& ds);

/// Same layout as write_csv with 0/1 flags in place of values (1 = missing).
void write_mask_csv(std::ostream& out, const PanelDataset& ds);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double x);

/// Splits one CSV line; handles double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace medimpute
