#pragma once

#include <map>
#include <string>
#include <vector>

#include "bugsmc/common.hpp"

namespace bugsmc {

/// Dense row-major array with a per-element missing mask.
struct DataArray {
  Dims dims{1};
  std::vector<double> values{0.0};
  std::vector<bool> missing{false};

  static DataArray scalar(double v);
  static DataArray vector(std::vector<double> v);
  static DataArray matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);
  /// An all-missing array of the given shape.
  static DataArray empty(Dims dims);

  std::size_t size() const { return values.size(); }
  bool fully_observed() const;
  /// Row-major offset of a 1-based index vector; throws on out-of-range.
  std::size_t offset(const std::vector<long>& index) const;

  friend bool operator==(const DataArray&, const DataArray&) = default;
};

/// Named model inputs: constants, observations, partially missing arrays.
class DataTable {
 public:
  void set(const std::string& name, DataArray array);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const DataArray* find(const std::string& name) const;
  DataArray* find(const std::string& name);
  void erase(const std::string& name) { entries_.erase(name); }
  const std::map<std::string, DataArray>& entries() const { return entries_; }

  /// Sets one element by label (`x`, `x[3]`, `pi[1,2]`); creates nothing.
  void set_element(const std::string& label, double value);

  /// JSON object {name: {dim: [...], values: [...], mask: [...]}}. Missing
  /// elements are written as null and flagged true in `mask`.
  std::string to_json() const;
  static DataTable from_json(const std::string& text);
  static DataTable load(const std::string& path);
  void save(const std::string& path) const;

  friend bool operator==(const DataTable&, const DataTable&) = default;

 private:
  std::map<std::string, DataArray> entries_;
};

/// Splits `pi[1,2]` into ("pi", {1, 2}); a bare name yields an empty index.
std::pair<std::string, std::vector<long>> parse_element_label(const std::string& label);

}  // namespace bugsmc
